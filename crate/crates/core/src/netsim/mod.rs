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

//! Cycle-stepped network simulation.
//!
//! Every switch output is registered, so each inter-stage link behaves as a
//! one-deep pipeline in both directions. Endpoints are combinational: in
//! cycle `t` they observe the registers written at the end of cycle `t - 1`
//! and drive values that the first and last stages consume in cycle `t`.

mod endpoint;
mod measure;
mod trace;

use std::collections::BTreeSet;

use thiserror::Error;

pub use endpoint::{Action, InitiatorModel, TargetModel};
pub use measure::{
    check_no_loss, engineer_conflict, measure_error_latency, measure_setup_latency,
    ConflictScenario, ErrorLatency, FlowOutcome, FlowScenario, SetupOutcome,
};
pub use trace::{Event, EventKind, Probe, RunSummary, SignalRecord, Trace};

use crate::switch::{Backward, Forward, Mutation, PortState, Switch, Transition};
use crate::topology::Topology;
use endpoint::{Initiator, Target};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("node {node} out of range for a {nodes}-node network")]
    NodeOutOfRange { node: usize, nodes: usize },
    #[error("node {0} appears in more than one initiator")]
    DuplicateInitiator(usize),
    #[error("node {0} appears in more than one target")]
    DuplicateTarget(usize),
    #[error("header has {got} bits, network expects {expected}")]
    HeaderLength { got: usize, expected: usize },
    #[error("scenario produced no conflict")]
    NoConflict,
    #[error("scenario needs at least two routes")]
    TooFewRoutes,
}

/// Switch instances wired per a [`Topology`].
#[derive(Debug, Clone)]
pub struct Network {
    topology: Topology,
    stages: Vec<Vec<Switch>>,
    fwd_in: Vec<Vec<Forward>>,
    bwd_in: Vec<Vec<Backward>>,
    transitions: Vec<Transition>,
    /// Source node of the claim that last won each output, per stage.
    origin: Vec<Vec<Option<usize>>>,
    granted: Vec<(usize, usize, usize)>,
    cycle: u64,
}

/// A switch about to step, with the inputs it will see.
pub struct SwitchView<'a> {
    pub cycle: u64,
    pub stage: usize,
    pub index: usize,
    pub switch: &'a Switch,
    pub fwd_in: &'a [Forward],
    pub bwd_in: &'a [Backward],
}

/// A switch state change, located in the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetTransition {
    pub stage: usize,
    pub switch: usize,
    pub transition: Transition,
}

pub fn build_network(topology: &Topology) -> Network {
    Network::new(topology.clone())
}

impl Network {
    pub fn new(topology: Topology) -> Self {
        Self::with_mutation(topology, Mutation::None)
    }

    /// Network whose every switch carries `mutation`.
    pub fn with_mutation(topology: Topology, mutation: Mutation) -> Self {
        let n = topology.nodes();
        let stages = topology
            .plan()
            .stages
            .iter()
            .map(|s| {
                (0..s.switch_count)
                    .map(|_| Switch::with_mutation(s.port_bits, mutation))
                    .collect()
            })
            .collect();
        let s = topology.stage_count();
        Network {
            stages,
            fwd_in: vec![vec![Forward::IDLE; n]; s],
            bwd_in: vec![vec![Backward::READY; n]; s],
            transitions: Vec::new(),
            origin: vec![vec![None; n]; s],
            granted: Vec::new(),
            cycle: 0,
            topology,
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn stages(&self) -> &[Vec<Switch>] {
        &self.stages
    }

    pub fn switch(&self, stage: usize, index: usize) -> &Switch {
        &self.stages[stage][index]
    }

    pub fn switch_count(&self) -> usize {
        self.stages.iter().map(Vec::len).sum()
    }

    /// Number of registered inter-stage boundaries.
    pub fn boundary_count(&self) -> usize {
        self.stages.len() - 1
    }

    pub fn reset(&mut self) {
        for sw in self.stages.iter_mut().flatten() {
            sw.reset();
        }
        for o in self.origin.iter_mut().flatten() {
            *o = None;
        }
        self.cycle = 0;
    }

    pub fn is_idle(&self) -> bool {
        self.stages.iter().flatten().all(|sw| {
            sw.is_idle()
                && sw.fwd_out().iter().all(|f| f.is_idle())
                && sw.bwd_out().iter().all(|b| *b == Backward::READY)
        })
    }

    fn locate(&self, stage: usize, port: usize) -> (usize, usize) {
        let d = self.topology.degree(stage);
        (port / d, port % d)
    }

    /// Backward signal visible to source node `node`.
    pub fn source_view(&self, node: usize) -> Backward {
        let (w, q) = self.locate(0, node);
        self.stages[0][w].bwd_out()[q]
    }

    /// Forward signal visible to destination node `node`.
    pub fn target_view(&self, node: usize) -> Forward {
        let last = self.stages.len() - 1;
        let (w, r) = self.locate(last, node);
        self.stages[last][w].fwd_out()[r]
    }

    /// State of input port `port` (global index) of `stage`.
    pub fn input_state(&self, stage: usize, port: usize) -> PortState {
        let (w, q) = self.locate(stage, port);
        self.stages[stage][w].port(q).state
    }

    /// Source node whose claim reaches input `port` of `stage`. Origins are
    /// recorded as claims are granted, so a route whose tail has already
    /// left upstream switches is still attributed.
    pub fn trace_back(&self, stage: usize, port: usize) -> Option<usize> {
        if stage == 0 {
            return Some(port);
        }
        self.origin[stage - 1][self.topology.prev_port(stage, port)]
    }

    /// Advances one cycle. `src` and `dst` hold the endpoint drives, indexed
    /// by node. Transitions are appended to `out`; `observe` sees each switch
    /// just before it steps.
    pub fn step(
        &mut self,
        src: &[Forward],
        dst: &[Backward],
        out: &mut Vec<NetTransition>,
        mut observe: Option<&mut dyn FnMut(&SwitchView<'_>)>,
    ) {
        let s = self.stages.len();
        let n = self.topology.nodes();
        assert_eq!(src.len(), n);
        assert_eq!(dst.len(), n);

        self.fwd_in[0].copy_from_slice(src);
        for t in 1..s {
            let d = self.topology.degree(t - 1);
            for port in 0..n {
                let prev = self.topology.prev_port(t, port);
                self.fwd_in[t][port] = self.stages[t - 1][prev / d].fwd_out()[prev % d];
            }
        }
        self.bwd_in[s - 1].copy_from_slice(dst);
        for t in 0..s - 1 {
            let d = self.topology.degree(t + 1);
            for port in 0..n {
                let next = self.topology.next_port(t, port);
                self.bwd_in[t][port] = self.stages[t + 1][next / d].bwd_out()[next % d];
            }
        }

        for t in 0..s {
            let d = self.topology.degree(t);
            for (w, sw) in self.stages[t].iter_mut().enumerate() {
                let fwd = &self.fwd_in[t][w * d..(w + 1) * d];
                let bwd = &self.bwd_in[t][w * d..(w + 1) * d];
                if let Some(f) = observe.as_mut() {
                    f(&SwitchView {
                        cycle: self.cycle,
                        stage: t,
                        index: w,
                        switch: sw,
                        fwd_in: fwd,
                        bwd_in: bwd,
                    });
                }
                self.transitions.clear();
                sw.step(fwd, bwd, &mut self.transitions);
                for tr in &self.transitions {
                    if let Transition::Accepted { input, output } = *tr {
                        self.granted.push((t, w * d + input, w * d + output));
                    }
                }
                out.extend(self.transitions.iter().map(|&transition| NetTransition {
                    stage: t,
                    switch: w,
                    transition,
                }));
            }
        }
        let mut granted = std::mem::take(&mut self.granted);
        let sources: Vec<_> = granted
            .iter()
            .map(|&(t, i, _)| self.trace_back(t, i))
            .collect();
        for (&(t, _, output), source) in granted.iter().zip(sources) {
            self.origin[t][output] = source;
        }
        granted.clear();
        self.granted = granted;
        self.cycle += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunConfig {
    pub max_cycles: u64,
    /// Record every signal change, not just events.
    pub full_dump: bool,
}

impl RunConfig {
    pub fn new(max_cycles: u64) -> Self {
        RunConfig {
            max_cycles,
            full_dump: false,
        }
    }

    pub fn with_dump(mut self) -> Self {
        self.full_dump = true;
        self
    }
}

/// A network together with endpoint models, stepped one cycle at a time.
pub struct Simulation<'n> {
    network: &'n mut Network,
    initiators: Vec<Initiator>,
    targets: Vec<Target>,
    trace: Trace,
    src: Vec<Forward>,
    dst: Vec<Backward>,
    pending: Vec<EventKind>,
    transitions: Vec<NetTransition>,
    last: Vec<(Probe, u8)>,
    drain: u64,
    idle_since: Option<u64>,
}

impl<'n> Simulation<'n> {
    /// Resets `network` and attaches the endpoints. Nodes without a target
    /// model get an unbounded sink.
    pub fn new(
        network: &'n mut Network,
        initiators: &[InitiatorModel],
        targets: &[TargetModel],
        full_dump: bool,
    ) -> Result<Self, SimError> {
        let n = network.topology().nodes();
        let mut seen = BTreeSet::new();
        for i in initiators {
            if i.node >= n {
                return Err(SimError::NodeOutOfRange {
                    node: i.node,
                    nodes: n,
                });
            }
            if !seen.insert(i.node) {
                return Err(SimError::DuplicateInitiator(i.node));
            }
        }
        let mut models: Vec<Option<TargetModel>> = vec![None; n];
        for t in targets {
            if t.node >= n {
                return Err(SimError::NodeOutOfRange {
                    node: t.node,
                    nodes: n,
                });
            }
            if models[t.node].replace(*t).is_some() {
                return Err(SimError::DuplicateTarget(t.node));
            }
        }
        network.reset();
        let topo = network.topology();
        let degrees = (0..topo.stage_count()).map(|s| topo.degree(s)).collect();
        let mut trace = Trace::new(degrees, full_dump);
        trace.events.push(Event {
            cycle: 0,
            kind: EventKind::Reset {
                nodes: n,
                stages: topo.stage_count(),
                header_bits: topo.header_bits(),
            },
        });
        let drain = 2 * topo.stage_count() as u64 + 2;
        Ok(Simulation {
            initiators: initiators.iter().cloned().map(Initiator::new).collect(),
            targets: models
                .into_iter()
                .enumerate()
                .map(|(q, m)| Target::new(m.unwrap_or_else(|| TargetModel::sink(q))))
                .collect(),
            trace,
            src: vec![Forward::IDLE; n],
            dst: vec![Backward::READY; n],
            pending: Vec::new(),
            transitions: Vec::new(),
            last: Vec::new(),
            drain,
            idle_since: None,
            network,
        })
    }

    pub fn network(&self) -> &Network {
        self.network
    }

    pub fn cycle(&self) -> u64 {
        self.network.cycle()
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn scripts_done(&self) -> bool {
        self.initiators.iter().all(Initiator::done)
    }

    /// True once every script has finished and the drain period has passed.
    pub fn finished(&self) -> bool {
        self.idle_since
            .is_some_and(|c| self.cycle() >= c + self.drain)
    }

    pub fn step(&mut self) {
        self.step_observed(None);
    }

    pub fn step_observed(&mut self, observe: Option<&mut dyn FnMut(&SwitchView<'_>)>) {
        let t = self.network.cycle();
        self.pending.clear();
        self.src.fill(Forward::IDLE);
        for i in &mut self.initiators {
            let node = i.model.node;
            let seen = self.network.source_view(node);
            self.src[node] = i.tick(t, seen, &mut self.pending);
        }
        for (d, target) in self.targets.iter_mut().enumerate() {
            let seen = self.network.target_view(d);
            self.dst[d] = target.tick(t, seen, &mut self.pending);
        }
        for kind in self.pending.drain(..) {
            self.trace.events.push(Event { cycle: t, kind });
        }
        if self.trace.signals.is_some() {
            self.record_endpoints(t);
        }

        self.transitions.clear();
        self.network
            .step(&self.src, &self.dst, &mut self.transitions, observe);

        let last_stage = self.network.topology().stage_count() - 1;
        for nt in &self.transitions {
            let d = self.network.topology().degree(nt.stage);
            let global = |p: usize| nt.switch * d + p;
            let kind = match nt.transition {
                Transition::Accepted { input, output } if nt.stage == last_stage => {
                    EventKind::RouteOpened {
                        source: self.network.trace_back(nt.stage, global(input)),
                        destination: global(output),
                    }
                }
                Transition::Rejected { input, output } => EventKind::RouteRejected {
                    source: self.network.trace_back(nt.stage, global(input)),
                    stage: nt.stage,
                    switch: nt.switch,
                    output,
                },
                Transition::Aborted { input, .. } if nt.stage == 0 => EventKind::RouteAborted {
                    source: global(input),
                },
                Transition::TornDown { input, .. } if nt.stage == 0 => EventKind::RouteClosed {
                    source: global(input),
                },
                _ => continue,
            };
            self.trace.events.push(Event { cycle: t + 1, kind });
        }
        if self.trace.signals.is_some() {
            self.record_switches(t + 1);
        }
        if self.idle_since.is_none() && self.scripts_done() {
            self.idle_since = Some(t + 1);
        }
    }

    fn record(&mut self, slot: usize, cycle: u64, probe: Probe, value: u8) {
        let signals = self.trace.signals.as_mut().expect("dump enabled");
        if slot == self.last.len() {
            self.last.push((probe, value));
            signals.push(SignalRecord {
                cycle,
                probe,
                value,
            });
        } else if self.last[slot].1 != value {
            self.last[slot].1 = value;
            signals.push(SignalRecord {
                cycle,
                probe,
                value,
            });
        }
    }

    fn record_endpoints(&mut self, cycle: u64) {
        let n = self.src.len();
        for node in 0..n {
            let f = self.src[node];
            let b = self.dst[node];
            self.record(2 * node, cycle, Probe::Source { node }, pack_fwd(f));
            self.record(2 * node + 1, cycle, Probe::Target { node }, pack_bwd(b));
        }
    }

    fn record_switches(&mut self, cycle: u64) {
        let n = self.src.len();
        let mut slot = 2 * n;
        for stage in 0..self.network.stages.len() {
            let d = self.network.topology.degree(stage);
            for port in 0..n {
                let sw = &self.network.stages[stage][port / d];
                let p = port % d;
                let input = (sw.port(p).state.code() << 2) | pack_bwd(sw.bwd_out()[p]);
                let output = pack_fwd(sw.fwd_out()[p]);
                self.record(slot, cycle, Probe::Input { stage, port }, input);
                self.record(slot + 1, cycle, Probe::Output { stage, port }, output);
                slot += 2;
            }
        }
    }

    /// Steps until the scripts finish (plus drain) or `max_cycles` is reached.
    pub fn run(mut self, max_cycles: u64) -> Trace {
        while self.cycle() < max_cycles && !self.finished() {
            self.step();
        }
        self.into_trace()
    }

    pub fn into_trace(mut self) -> Trace {
        self.trace.summary = RunSummary {
            cycles: self.network.cycle(),
            completed: self.scripts_done(),
            pending: self
                .initiators
                .iter()
                .filter(|i| !i.done())
                .map(|i| i.model.node)
                .collect(),
        };
        self.trace
    }
}

fn pack_fwd(f: Forward) -> u8 {
    (f.clm as u8) << 2 | (f.act as u8) << 1 | f.dat as u8
}

fn pack_bwd(b: Backward) -> u8 {
    (b.err as u8) << 1 | b.cts as u8
}

/// Runs the endpoints on `network` from reset.
pub fn run(
    network: &mut Network,
    initiators: &[InitiatorModel],
    targets: &[TargetModel],
    config: RunConfig,
) -> Result<Trace, SimError> {
    let sim = Simulation::new(network, initiators, targets, config.full_dump)?;
    Ok(sim.run(config.max_cycles))
}
