// Copyright 2026 The mcenoc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use std::collections::HashSet;

use mcenoc::netsim::{
    build_network, check_no_loss, engineer_conflict, measure_error_latency, measure_setup_latency,
    run, Action, EventKind, FlowScenario, InitiatorModel, Network, Probe, RunConfig, SetupOutcome,
    Simulation, TargetModel,
};
use mcenoc::routing::{parse_bits, route_permutation, Permutation};
use mcenoc::topology::{Hop, Topology};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bits(s: &str) -> Vec<bool> {
    parse_bits(s).unwrap()
}

fn probes_on(path: &[Hop]) -> HashSet<Probe> {
    path.iter()
        .flat_map(|h| {
            [
                Probe::Input {
                    stage: h.stage,
                    port: h.input,
                },
                Probe::Output {
                    stage: h.stage,
                    port: h.output,
                },
            ]
        })
        .collect()
}

#[test]
fn network_matches_topology_counts() {
    let net = build_network(&Topology::new(8, 1).unwrap());
    assert_eq!(net.switch_count(), 20);
    assert_eq!(net.boundary_count(), 4);
    assert!(net.is_idle());
    let net = build_network(&Topology::new(4, 2).unwrap());
    assert_eq!(net.switch_count(), 1);
    assert_eq!(net.boundary_count(), 0);
}

#[test]
fn payload_arrives_in_order() {
    let topo = Topology::new(8, 1).unwrap();
    let mut net = build_network(&topo);
    let payload: Vec<bool> = (0..16).map(|i| (i * 7) % 3 == 1).collect();
    let init = InitiatorModel::transfer(0, &bits("10001"), &payload);
    let trace = run(&mut net, &[init], &[], RunConfig::new(200)).unwrap();
    assert_eq!(trace.delivered(1), payload);
    assert_eq!(trace.delivered_by_node().len(), 1);
    assert!(trace.summary.completed);
    let cycles: Vec<u64> = trace.events.iter().map(|e| e.cycle).collect();
    assert!(cycles.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn idle_network_only_resets() {
    let topo = Topology::new(8, 1).unwrap();
    let mut net = build_network(&topo);
    let mut sim = Simulation::new(&mut net, &[], &[], false).unwrap();
    for _ in 0..30 {
        sim.step();
        assert!(sim.network().is_idle());
    }
    let trace = sim.into_trace();
    assert_eq!(trace.events.len(), 1);
    assert!(matches!(trace.events[0].kind, EventKind::Reset { .. }));
}

#[test]
fn conflicting_claims_open_one_route() {
    let topo = Topology::new(8, 1).unwrap();
    let mut net = build_network(&topo);
    let script =
        |node| InitiatorModel::new(node, vec![Action::Open(bits("10001")), Action::Idle(30)]);
    let trace = run(&mut net, &[script(0), script(1)], &[], RunConfig::new(200)).unwrap();
    assert_eq!(trace.opened().count(), 1);
    assert_eq!(trace.rejected().count(), 1);
    assert!(trace.err_at(1).is_some());
}

#[test]
fn short_transfers_are_attributed_to_their_source() {
    let topo = Topology::new(8, 1).unwrap();
    let set = route_permutation(&topo, &Permutation::rotation(8, 3)).unwrap();
    let inits: Vec<InitiatorModel> = set
        .headers
        .iter()
        .map(|(&s, h)| InitiatorModel::transfer(s, &h.bits, &[true]).starting_at(s as u64))
        .collect();
    let mut net = build_network(&topo);
    let trace = run(&mut net, &inits, &[], RunConfig::new(200)).unwrap();
    let mut opened: Vec<(usize, usize)> = trace.opened().map(|(_, s, d)| (s.unwrap(), d)).collect();
    opened.sort_unstable();
    let expected: Vec<(usize, usize)> = (0..8).map(|s| (s, (s + 3) % 8)).collect();
    assert_eq!(opened, expected);
}

#[test]
fn rejects_bad_endpoint_lists() {
    let topo = Topology::new(8, 1).unwrap();
    let mut net = build_network(&topo);
    let a = InitiatorModel::new(3, vec![]);
    assert!(run(&mut net, &[a.clone(), a], &[], RunConfig::new(10)).is_err());
    let far = InitiatorModel::new(8, vec![]);
    assert!(run(&mut net, &[far], &[], RunConfig::new(10)).is_err());
}

#[test]
fn pending_scripts_are_reported() {
    let topo = Topology::new(8, 1).unwrap();
    let mut net = build_network(&topo);
    let init = InitiatorModel::new(2, vec![Action::Idle(100)]);
    let trace = run(&mut net, &[init], &[], RunConfig::new(10)).unwrap();
    assert!(!trace.summary.completed);
    assert_eq!(trace.summary.pending, vec![2]);
    assert_eq!(trace.summary.cycles, 10);
}

#[test]
fn traces_are_deterministic() {
    let topo = Topology::new(16, 1).unwrap();
    let perm = Permutation::rotation(16, 5);
    let set = route_permutation(&topo, &perm).unwrap();
    let inits: Vec<InitiatorModel> = set
        .headers
        .iter()
        .map(|(&s, h)| InitiatorModel::transfer(s, &h.bits, &[true, false, true, true]))
        .collect();
    let render = || {
        let mut net = build_network(&topo);
        let trace = run(&mut net, &inits, &[], RunConfig::new(500).with_dump()).unwrap();
        let mut vcd = Vec::new();
        trace.write_vcd(&mut vcd).unwrap();
        (trace.events_text(), vcd)
    };
    let (a, av) = render();
    let (b, bv) = render();
    assert_eq!(a, b);
    assert_eq!(av, bv);
    let vcd = String::from_utf8(av).unwrap();
    assert!(vcd.contains("$enddefinitions $end"));
    assert!(vcd.contains("s0_w0_p0"));
}

#[test]
fn setup_latency_bound_holds_across_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for &(n, b) in &[
        (4, 1),
        (4, 2),
        (8, 1),
        (8, 2),
        (16, 2),
        (32, 2),
        (32, 3),
        (64, 3),
    ] {
        let topo = Topology::new(n, b).unwrap();
        let bound = topo.plan().setup_bound();
        let mut net = build_network(&topo);
        for _ in 0..20 {
            let src = rng.gen_range(0..n);
            let h: Vec<bool> = (0..topo.header_bits()).map(|_| rng.gen()).collect();
            match measure_setup_latency(&mut net, src, &h).unwrap() {
                SetupOutcome::Opened {
                    cycles,
                    destination,
                } => {
                    assert!(cycles <= bound, "N={n} b={b}: {cycles} > {bound}");
                    assert_eq!(Some(destination), topo.destination(src, &h));
                }
                other => panic!("lone route rejected: {other:?}"),
            }
        }
    }
}

#[test]
fn error_latency_grows_with_conflict_depth() {
    let topo = Topology::new(8, 1).unwrap();
    let mut net = build_network(&topo);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = vec![0u64; topo.stage_count()];
    let mut best = vec![u64::MAX; topo.stage_count()];
    for stage in 0..topo.stage_count() {
        for _ in 0..30 {
            let sc = engineer_conflict(&topo, stage, 0, &mut rng).unwrap();
            let e = measure_error_latency(&mut net, &sc).unwrap();
            assert_eq!(e.stage, stage);
            worst[stage] = worst[stage].max(e.cycles);
            best[stage] = best[stage].min(e.cycles);
        }
    }
    assert!(worst[4] <= 15);
    assert!(worst[0] < best[4]);
}

#[test]
fn disjoint_route_does_not_disturb_existing_one() {
    let topo = Topology::new(8, 1).unwrap();
    let perm = Permutation::new(vec![1, 0, 3, 2, 5, 4, 7, 6]).unwrap();
    let set = route_permutation(&topo, &perm).unwrap();
    let payload: Vec<bool> = (0..24).map(|i| i % 5 < 2).collect();
    let a = InitiatorModel::transfer(0, &set.headers[&0].bits, &payload);
    let b = InitiatorModel::transfer(5, &set.headers[&5].bits, &payload).starting_at(3);
    let path = topo.walk(0, &set.headers[&0].bits).unwrap();
    let probes = probes_on(&path);

    let mut net = build_network(&topo);
    let alone = run(
        &mut net,
        std::slice::from_ref(&a),
        &[],
        RunConfig::new(120).with_dump(),
    )
    .unwrap();
    let together = run(&mut net, &[a, b], &[], RunConfig::new(120).with_dump()).unwrap();
    assert_eq!(alone.signals_at(&probes), together.signals_at(&probes));
    assert_eq!(together.delivered(4), payload);
}

#[test]
fn flow_control_prevents_loss() {
    let topo = Topology::new(8, 1).unwrap();
    let s = topo.stage_count();
    let mut net = build_network(&topo);
    let payload: Vec<bool> = (0..256).map(|i| (i * 13) % 7 < 3).collect();
    let flow = FlowScenario {
        source: 0,
        header: bits("10001"),
        payload,
        target: TargetModel::buffered(1, 2 * s, 2 * s, 1, 4),
        max_cycles: 4000,
    };
    let out = check_no_loss(&mut net, &flow).unwrap();
    assert!(out.lossless);
    assert_eq!(out.lost, 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn established_routes_are_transparent(
        payload in prop::collection::vec(any::<bool>(), 0..64),
        seed in any::<u64>(),
        shape in prop::sample::select(vec![(8usize, 1u32), (8, 2), (16, 1), (16, 3), (32, 2)]),
    ) {
        let (n, b) = shape;
        let topo = Topology::new(n, b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = rng.gen_range(0..n);
        let h: Vec<bool> = (0..topo.header_bits()).map(|_| rng.gen()).collect();
        let dst = topo.destination(src, &h).unwrap();
        let mut net = Network::new(topo);
        let trace = run(&mut net, &[InitiatorModel::transfer(src, &h, &payload)], &[], RunConfig::new(1000)).unwrap();
        prop_assert_eq!(trace.delivered(dst), payload);
    }

    #[test]
    fn no_loss_with_adequate_buffer(
        len in 0usize..300,
        num in 1u32..4,
        den in 1u32..9,
        extra in 0usize..6,
    ) {
        let topo = Topology::new(16, 1).unwrap();
        let s = topo.stage_count();
        let mut net = build_network(&topo);
        let payload: Vec<bool> = (0..len).map(|i| i % 3 == 0).collect();
        let header = vec![false; topo.header_bits() as usize];
        let dst = topo.destination(0, &header).unwrap();
        let flow = FlowScenario {
            source: 0,
            header,
            payload,
            target: TargetModel::buffered(dst, 2 * s + extra, 2 * s, num, den),
            max_cycles: 20_000,
        };
        let out = check_no_loss(&mut net, &flow).unwrap();
        prop_assert!(out.lossless, "{:?}", out);
    }
}
