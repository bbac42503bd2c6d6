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

//! Latency and flow-control measurements built on single simulation runs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{run, Action, InitiatorModel, Network, RunConfig, SimError, TargetModel};
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SetupOutcome {
    Opened { cycles: u64, destination: usize },
    Rejected { cycles: u64, stage: usize },
}

impl SetupOutcome {
    pub fn cycles(&self) -> u64 {
        match *self {
            SetupOutcome::Opened { cycles, .. } | SetupOutcome::Rejected { cycles, .. } => cycles,
        }
    }
}

fn check_header(network: &Network, header: &[bool]) -> Result<(), SimError> {
    let expected = network.topology().header_bits() as usize;
    if header.len() != expected {
        return Err(SimError::HeaderLength {
            got: header.len(),
            expected,
        });
    }
    Ok(())
}

fn horizon(network: &Network) -> u64 {
    let t = network.topology();
    4 * (u64::from(t.header_bits()) + t.stage_count() as u64) + 8
}

/// Cycles from the first header bit until the last stage latches the route.
pub fn measure_setup_latency(
    network: &mut Network,
    source: usize,
    header: &[bool],
) -> Result<SetupOutcome, SimError> {
    check_header(network, header)?;
    let hold = horizon(network);
    let init = InitiatorModel::new(
        source,
        vec![Action::Open(header.to_vec()), Action::Idle(hold)],
    );
    let trace = run(network, &[init], &[], RunConfig::new(2 * hold))?;
    if let Some((cycle, _, destination)) = trace.opened().find(|o| o.1 == Some(source)) {
        return Ok(SetupOutcome::Opened {
            cycles: cycle,
            destination,
        });
    }
    let stage = trace.rejected().next().map_or(0, |r| r.2);
    let cycles = trace.err_at(source).unwrap_or(trace.summary.cycles);
    Ok(SetupOutcome::Rejected { cycles, stage })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteClaim {
    pub source: usize,
    pub header: Vec<bool>,
    pub start_cycle: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictScenario {
    pub routes: Vec<RouteClaim>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ErrorLatency {
    pub source: usize,
    pub stage: usize,
    /// Cycles from the losing route's first header bit to `err` at its source.
    pub cycles: u64,
}

/// Runs the claims concurrently, holding each route open, and times the
/// first rejection back to its source.
pub fn measure_error_latency(
    network: &mut Network,
    scenario: &ConflictScenario,
) -> Result<ErrorLatency, SimError> {
    if scenario.routes.len() < 2 {
        return Err(SimError::TooFewRoutes);
    }
    let hold = horizon(network);
    let mut inits = Vec::new();
    for claim in &scenario.routes {
        check_header(network, &claim.header)?;
        inits.push(
            InitiatorModel::new(
                claim.source,
                vec![Action::Open(claim.header.clone()), Action::Idle(hold)],
            )
            .starting_at(claim.start_cycle),
        );
    }
    let last_start = scenario
        .routes
        .iter()
        .map(|r| r.start_cycle)
        .max()
        .unwrap_or(0);
    let trace = run(network, &inits, &[], RunConfig::new(last_start + 2 * hold))?;
    let (_, source, stage) = trace.rejected().next().ok_or(SimError::NoConflict)?;
    let source = source.ok_or(SimError::NoConflict)?;
    let start = scenario
        .routes
        .iter()
        .find(|r| r.source == source)
        .map_or(0, |r| r.start_cycle);
    let err = trace.err_at(source).ok_or(SimError::NoConflict)?;
    Ok(ErrorLatency {
        source,
        stage,
        cycles: err - start,
    })
}

/// Random pair of claims whose paths share no link before `stage` and
/// request the same output there. The second claim starts `stagger`
/// cycles after the first.
pub fn engineer_conflict<R: Rng>(
    topology: &Topology,
    stage: usize,
    stagger: u64,
    rng: &mut R,
) -> Option<ConflictScenario> {
    let n = topology.nodes();
    let p = topology.header_bits() as usize;
    if stage >= topology.stage_count() {
        return None;
    }
    let random_header = |rng: &mut R| (0..p).map(|_| rng.gen::<bool>()).collect::<Vec<_>>();
    let a = rng.gen_range(0..n);
    let ha = random_header(rng);
    let path_a = topology.walk(a, &ha)?;
    for _ in 0..200_000 {
        let b = rng.gen_range(0..n);
        if b == a {
            continue;
        }
        let hb = random_header(rng);
        let path_b = topology.walk(b, &hb)?;
        let disjoint = (0..stage).all(|t| path_a[t].output != path_b[t].output);
        if disjoint && path_a[stage].output == path_b[stage].output {
            return Some(ConflictScenario {
                routes: vec![
                    RouteClaim {
                        source: a,
                        header: ha,
                        start_cycle: 0,
                    },
                    RouteClaim {
                        source: b,
                        header: hb,
                        start_cycle: stagger,
                    },
                ],
            });
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlowScenario {
    pub source: usize,
    pub header: Vec<bool>,
    pub payload: Vec<bool>,
    pub target: TargetModel,
    pub max_cycles: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlowOutcome {
    pub delivered: Vec<bool>,
    pub lost: usize,
    pub cycles: u64,
    /// Every payload bit arrived exactly once, in order, and nothing was dropped.
    pub lossless: bool,
}

/// Streams a payload into a finite target FIFO and compares what arrives.
pub fn check_no_loss(network: &mut Network, flow: &FlowScenario) -> Result<FlowOutcome, SimError> {
    check_header(network, &flow.header)?;
    let init = InitiatorModel::transfer(flow.source, &flow.header, &flow.payload);
    let trace = run(
        network,
        &[init],
        &[flow.target],
        RunConfig::new(flow.max_cycles),
    )?;
    let delivered = trace.delivered(flow.target.node);
    let lost = trace.lost();
    Ok(FlowOutcome {
        lossless: lost == 0 && delivered == flow.payload,
        delivered,
        lost,
        cycles: trace.summary.cycles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::build_network;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bits(s: &str) -> Vec<bool> {
        s.bytes().map(|c| c == b'1').collect()
    }

    #[test]
    fn setup_latency_within_bound() {
        let topo = Topology::new(8, 1).unwrap();
        let mut net = build_network(&topo);
        let out = measure_setup_latency(&mut net, 0, &bits("10001")).unwrap();
        assert_eq!(
            out,
            SetupOutcome::Opened {
                cycles: 9,
                destination: 1
            }
        );
        let again = measure_setup_latency(&mut net, 0, &bits("10001")).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn single_crossbar_latency() {
        let topo = Topology::new(4, 2).unwrap();
        let mut net = build_network(&topo);
        let out = measure_setup_latency(&mut net, 2, &bits("11")).unwrap();
        assert_eq!(
            out,
            SetupOutcome::Opened {
                cycles: 2,
                destination: 3
            }
        );
    }

    #[test]
    fn no_conflict_is_an_error() {
        let topo = Topology::new(8, 1).unwrap();
        let mut net = build_network(&topo);
        let scenario = ConflictScenario {
            routes: vec![
                RouteClaim {
                    source: 0,
                    header: bits("00000"),
                    start_cycle: 0,
                },
                RouteClaim {
                    source: 7,
                    header: bits("11111"),
                    start_cycle: 0,
                },
            ],
        };
        assert_eq!(
            measure_error_latency(&mut net, &scenario),
            Err(SimError::NoConflict)
        );
    }

    #[test]
    fn engineered_conflicts_reject() {
        let topo = Topology::new(8, 1).unwrap();
        let mut net = build_network(&topo);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for stage in 0..topo.stage_count() {
            let sc = engineer_conflict(&topo, stage, 0, &mut rng).unwrap();
            let e = measure_error_latency(&mut net, &sc).unwrap();
            assert_eq!(e.stage, stage);
            assert!(e.cycles <= topo.plan().error_bound());
        }
    }

    #[test]
    fn small_fifo_loses_bits() {
        let topo = Topology::new(8, 1).unwrap();
        let s = topo.stage_count();
        let mut net = build_network(&topo);
        let payload: Vec<bool> = (0..256).map(|i| i % 3 == 0).collect();
        let mut flow = FlowScenario {
            source: 0,
            header: bits("10001"),
            payload,
            target: TargetModel::buffered(1, 2 * s, 2 * s, 1, 4),
            max_cycles: 5_000,
        };
        assert!(check_no_loss(&mut net, &flow).unwrap().lossless);
        flow.target = TargetModel::buffered(1, 1, 1, 1, 4);
        let out = check_no_loss(&mut net, &flow).unwrap();
        assert!(!out.lossless);
        assert!(out.lost > 0);
        flow.payload.clear();
        assert!(check_no_loss(&mut net, &flow).unwrap().lossless);
    }
}
