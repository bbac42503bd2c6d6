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

use std::collections::BTreeSet;

use mcenoc::tdm::{
    all_to_all_schedule, bisection_bandwidth, broadcast_schedule, informed_sizes,
    mesh_emulation_schedule, model_report_csv, simulate_broadcast, simulate_schedule,
    slot_cycles_for, tdm_cycle_time, validate_schedule, Launch, TimingModel,
};
use mcenoc::topology::Topology;
use proptest::prelude::*;

const F: f64 = 364e6;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn all_to_all_covers_every_pair_once() {
    for n in [2usize, 4, 8, 16] {
        let s = all_to_all_schedule(n, 100).unwrap();
        assert_eq!(s.len(), n);
        assert_eq!(
            s.slots[0].perm.mapping(),
            (0..n).collect::<Vec<_>>().as_slice()
        );
        let mut pairs = BTreeSet::new();
        for slot in &s.slots {
            for src in 0..n {
                assert!(pairs.insert((src, slot.perm.get(src))));
            }
        }
        assert_eq!(pairs.len(), n * n);
    }
    assert_eq!(
        all_to_all_schedule(2, 1).unwrap().slots[1].perm.mapping(),
        &[1, 0]
    );
}

#[test]
fn mesh_slot_counts() {
    assert_eq!(mesh_emulation_schedule(16, 2, 10).unwrap().len(), 4);
    assert_eq!(mesh_emulation_schedule(8, 3, 10).unwrap().len(), 6);
    assert_eq!(mesh_emulation_schedule(4, 1, 10).unwrap().len(), 2);
    assert!(mesh_emulation_schedule(8, 4, 10).is_err());
    let east = &mesh_emulation_schedule(16, 2, 10).unwrap().slots[0];
    // Row-major 4x4: node 3 wraps to node 0 in its row.
    assert_eq!(east.perm.get(3), 0);
    assert_eq!(east.perm.get(5), 6);
}

#[test]
fn broadcast_doubles() {
    let s = broadcast_schedule(8, 0, 64).unwrap();
    assert_eq!(s.len(), 3);
    assert_eq!(informed_sizes(&s, 0), vec![2, 4, 8]);
    assert_eq!(broadcast_schedule(2, 1, 64).unwrap().len(), 1);
    let topo = Topology::new(16, 1).unwrap();
    let s = broadcast_schedule(16, 5, 64).unwrap();
    assert_eq!(s.len(), 4);
    assert_eq!(simulate_broadcast(&topo, &s, 5).unwrap(), vec![2, 4, 8, 16]);
}

#[test]
fn cycle_time_reproduces_published_figures() {
    let t = tdm_cycle_time(&TimingModel {
        f_hz: F,
        efficiency: 0.99,
        nodes: 128,
        switch_bits: 1,
    })
    .unwrap();
    assert!(rel(t.slot_seconds, 7.14e-6) < 0.005, "{t:?}");
    assert!(rel(t.cycle_seconds, 914e-6) < 0.005, "{t:?}");
    let t = tdm_cycle_time(&TimingModel {
        f_hz: F,
        efficiency: 0.99,
        nodes: 65536,
        switch_bits: 1,
    })
    .unwrap();
    assert!(rel(t.slot_seconds, 17.03e-6) < 0.005, "{t:?}");
    assert!(rel(t.cycle_seconds, 1.12) < 0.005, "{t:?}");
}

#[test]
fn bisection_examples() {
    assert!((bisection_bandwidth(F, 1, 8).bisection_bits_per_s - 2.912e9).abs() < 1e-3);
    assert!((bisection_bandwidth(F, 1, 32).bisection_bits_per_s - 11.648e9).abs() < 1e-3);
    assert_eq!(bisection_bandwidth(F, 0, 32).bisection_bits_per_s, 0.0);
    assert_eq!(bisection_bandwidth(F, 0, 32).per_node_per_bit, 0.0);
}

#[test]
fn csv_report_has_header_and_rows() {
    let rows: Vec<TimingModel> = [0.9, 0.99]
        .iter()
        .map(|&e| TimingModel {
            f_hz: F,
            efficiency: e,
            nodes: 128,
            switch_bits: 1,
        })
        .collect();
    let csv = model_report_csv(&rows).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "N,B,efficiency,f_Hz,slot_us,cycle_us");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("128,2,0.99,"));
}

#[test]
fn validation_flags_short_slots_and_priority_inversions() {
    let topo = Topology::new(8, 1).unwrap();
    let s = all_to_all_schedule(8, 10).unwrap();
    assert!(validate_schedule(&topo, &s).passed());
    let mut s = all_to_all_schedule(8, 9).unwrap();
    let report = validate_schedule(&topo, &s);
    assert!(!report.passed());
    assert!(report.slots.iter().all(|c| !c.cycles_ok && c.verified));
    s.slots[2].cycles = 40;
    s.slots[2].launches = vec![
        Launch {
            source: 0,
            at: 0,
            priority: 1,
        },
        Launch {
            source: 3,
            at: 2,
            priority: 5,
        },
    ];
    let report = validate_schedule(&topo, &s);
    assert_eq!(report.slots[2].priority_violations.len(), 1);
}

#[test]
fn simulated_utilization_meets_efficiency() {
    let topo = Topology::new(8, 1).unwrap();
    for e in [0.5, 0.8, 0.9] {
        let slot = slot_cycles_for(10, e).unwrap();
        let s = all_to_all_schedule(8, slot).unwrap();
        let u = simulate_schedule(&topo, &s).unwrap();
        assert_eq!(u.lost, 0);
        assert!(u.utilization >= e - 1.0 / slot as f64, "e={e}: {u:?}");
    }
}

proptest! {
    #[test]
    fn bandwidth_is_an_exact_product(f in 1.0f64..1e10, w in 0u32..64, n in 0usize..100_000) {
        let r = bisection_bandwidth(f, w, n);
        prop_assert_eq!(r.bisection_bits_per_s, f * f64::from(w) * n as f64);
    }

    #[test]
    fn broadcast_informed_sizes(nbits in 1u32..10, src_seed in any::<usize>()) {
        let n = 1usize << nbits;
        let src = src_seed % n;
        let s = broadcast_schedule(n, src, 1).unwrap();
        let sizes = informed_sizes(&s, src);
        let expected: Vec<usize> = (0..s.len()).map(|k| (1usize << (k + 1)).min(n)).collect();
        prop_assert_eq!(sizes, expected);
    }
}
