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

//! Executable specification criteria.
//!
//! Monitors mirror assertion semantics: a property is evaluated every cycle,
//! counts how often its precondition fired, and records a counterexample
//! window when the postcondition fails. A property whose precondition never
//! fired is reported as vacuous rather than passing.
//!
//! Checking is simulation based: bounded exhaustive enumeration on small
//! networks plus seeded random campaigns. It is not a formal proof.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netsim::{
    Action, EventKind, InitiatorModel, Network, Simulation, SwitchView, TargetModel,
};
use crate::routing::{self, Permutation, Router};
use crate::switch::{Backward, Forward, InputPort, Mutation, PortState, Switch};
use crate::tdm::ScheduleReport;
use crate::topology::Topology;

const MAX_COUNTEREXAMPLES: usize = 5;
const WINDOW: usize = 8;

pub const METHOD: &str = "bounded exhaustive and seeded random simulation (not a formal proof)";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PropError {
    #[error("exhaustive mode supports N = 4 or 8, got {0}; use randomized mode instead")]
    TooLargeForExhaustive(usize),
    #[error("{pairs} (source, header) pairs are too many to enumerate; use random sampling")]
    TooManyPairs { pairs: u128 },
    #[error(transparent)]
    Topology(#[from] crate::topology::TopologyError),
    #[error("invalid campaign: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Core,
    Network,
    System,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Legality {
    /// Drivers follow the claim/teardown protocol and react to `err`.
    #[default]
    Legal,
    /// Any signal value on any cycle.
    Unconstrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stimulus {
    pub seed: u64,
    pub cycles: u64,
    pub legality: Legality,
}

impl Stimulus {
    pub fn new(seed: u64, cycles: u64, legality: Legality) -> Self {
        Stimulus {
            seed,
            cycles,
            legality,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Vacuous,
    Uncovered,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Vacuous => "vacuous",
            Status::Uncovered => "uncovered",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub cycle: u64,
    pub location: String,
    pub detail: String,
    /// Up to eight cycles of context ending at the failing cycle.
    pub window: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyResult {
    pub id: String,
    pub level: Level,
    pub evaluations: u64,
    pub hits: u64,
    pub failures: u64,
    pub counterexamples: Vec<Counterexample>,
}

impl PropertyResult {
    pub fn new(id: &str, level: Level) -> Self {
        PropertyResult {
            id: id.to_string(),
            level,
            evaluations: 0,
            hits: 0,
            failures: 0,
            counterexamples: Vec::new(),
        }
    }

    pub fn status(&self) -> Status {
        if self.failures > 0 {
            Status::Fail
        } else if self.hits == 0 {
            Status::Vacuous
        } else {
            Status::Pass
        }
    }

    fn fail(&mut self, cx: impl FnOnce() -> Counterexample) {
        self.failures += 1;
        if self.counterexamples.len() < MAX_COUNTEREXAMPLES {
            self.counterexamples.push(cx());
        }
    }

    fn merge(&mut self, other: &PropertyResult) {
        self.evaluations += other.evaluations;
        self.hits += other.hits;
        self.failures += other.failures;
        for c in &other.counterexamples {
            if self.counterexamples.len() < MAX_COUNTEREXAMPLES {
                self.counterexamples.push(c.clone());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Default)]
pub struct CheckReport {
    pub properties: Vec<PropertyResult>,
    pub cycles: u64,
    pub method: String,
}

impl CheckReport {
    fn with(properties: Vec<PropertyResult>, cycles: u64) -> Self {
        CheckReport {
            properties,
            cycles,
            method: METHOD.to_string(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.id == id)
    }

    pub fn failed(&self) -> bool {
        self.properties.iter().any(|p| p.status() == Status::Fail)
    }

    pub fn merge(&mut self, other: &CheckReport) {
        for p in &other.properties {
            match self.properties.iter_mut().find(|q| q.id == p.id) {
                Some(q) => q.merge(p),
                None => self.properties.push(p.clone()),
            }
        }
        self.cycles += other.cycles;
        if self.method.is_empty() {
            self.method = other.method.clone();
        }
    }

    pub fn merged<'a>(reports: impl IntoIterator<Item = &'a CheckReport>) -> CheckReport {
        let mut out = CheckReport::default();
        for r in reports {
            out.merge(r);
        }
        out
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:<8} {:<8} {:>12} {:>12} {:>9}  status",
            "property", "level", "evaluations", "pre-hits", "failures"
        )
        .unwrap();
        for p in &self.properties {
            writeln!(
                out,
                "{:<8} {:<8} {:>12} {:>12} {:>9}  {}",
                p.id,
                format!("{:?}", p.level).to_lowercase(),
                p.evaluations,
                p.hits,
                p.failures,
                p.status()
            )
            .unwrap();
            for c in &p.counterexamples {
                writeln!(
                    out,
                    "  counterexample at cycle {} ({}): {}",
                    c.cycle, c.location, c.detail
                )
                .unwrap();
                for line in &c.window {
                    writeln!(out, "    {line}").unwrap();
                }
            }
        }
        writeln!(
            out,
            "cycles simulated: {}; method: {}",
            self.cycles, self.method
        )
        .unwrap();
        out
    }
}

/// One switch at one cycle, before it steps.
pub struct Sample<'a> {
    pub cycle: u64,
    pub ports: &'a [InputPort],
    pub fwd_in: &'a [Forward],
    pub bwd_in: &'a [Backward],
    pub fwd_out: &'a [Forward],
    pub bwd_out: &'a [Backward],
}

fn pack_f(f: Forward) -> u32 {
    (f.clm as u32) << 2 | (f.act as u32) << 1 | f.dat as u32
}

fn pack_b(b: Backward) -> u32 {
    (b.err as u32) << 1 | b.cts as u32
}

fn render(cycle: u64, packed: &[u32]) -> String {
    let mut s = format!("t={cycle:<6}");
    for (i, &v) in packed.iter().enumerate() {
        let state = ["W", "A", "R", "X"][(v & 3) as usize];
        write!(
            s,
            " | p{i} {state}>{} in={:03b} eo={:02b} out={:03b} ei={:02b}",
            v >> 16,
            (v >> 2) & 7,
            (v >> 5) & 3,
            (v >> 7) & 7,
            (v >> 10) & 3
        )
        .unwrap();
    }
    s
}

#[derive(Debug, Clone, Copy)]
struct Obligation {
    input: usize,
    output: usize,
    /// Cycle at which the precondition held.
    start: u64,
}

#[derive(Debug, Default, Clone)]
struct SwitchState {
    prev_err: Vec<bool>,
    prev_cycle: Option<u64>,
    pending: Vec<Obligation>,
    ring: VecDeque<(u64, Vec<u32>)>,
}

/// C1 (`no_shared_direction`) and C15 (`reject_on_err`) over any number of
/// switches.
#[derive(Debug, Clone)]
pub struct SwitchMonitors {
    pub c1: PropertyResult,
    pub c15: PropertyResult,
    switches: Vec<SwitchState>,
}

impl SwitchMonitors {
    pub fn new(switches: usize) -> Self {
        SwitchMonitors {
            c1: PropertyResult::new("C1", Level::Core),
            c15: PropertyResult::new("C15", Level::Core),
            switches: vec![SwitchState::default(); switches],
        }
    }

    /// Forgets temporal history, e.g. between independent runs.
    pub fn restart(&mut self) {
        for s in &mut self.switches {
            s.prev_err.clear();
            s.prev_cycle = None;
            s.pending.clear();
            s.ring.clear();
        }
    }

    fn window(state: &SwitchState) -> Vec<String> {
        state.ring.iter().map(|(c, p)| render(*c, p)).collect()
    }

    pub fn observe(&mut self, id: usize, location: impl Fn() -> String, s: &Sample<'_>) {
        let deg = s.ports.len();
        let state = &mut self.switches[id];
        let mut packed = if state.ring.len() == WINDOW {
            state.ring.pop_front().map(|(_, v)| v).unwrap_or_default()
        } else {
            Vec::with_capacity(deg)
        };
        packed.clear();
        for i in 0..deg {
            packed.push(
                u32::from(s.ports[i].state.code())
                    | pack_f(s.fwd_in[i]) << 2
                    | pack_b(s.bwd_out[i]) << 5
                    | pack_f(s.fwd_out[i]) << 7
                    | pack_b(s.bwd_in[i]) << 10
                    | (s.ports[i].direction as u32) << 16,
            );
        }
        state.ring.push_back((s.cycle, packed));

        // C1: accepted inputs hold pairwise distinct outputs.
        self.c1.evaluations += 1;
        let accepted: Vec<(usize, usize)> = s
            .ports
            .iter()
            .enumerate()
            .filter(|(_, p)| p.state == PortState::Accept)
            .map(|(q, p)| (q, p.direction))
            .collect();
        if accepted.len() >= 2 {
            self.c1.hits += 1;
            let outs: BTreeSet<usize> = accepted.iter().map(|a| a.1).collect();
            if outs.len() != accepted.len() {
                let window = Self::window(state);
                self.c1.fail(|| Counterexample {
                    cycle: s.cycle,
                    location: location(),
                    detail: format!("accepted (input, output) pairs {accepted:?}"),
                    window,
                });
            }
        }

        // C15: pending obligations first, then new preconditions.
        let contiguous = state.prev_cycle.is_some_and(|c| c + 1 == s.cycle);
        if !contiguous {
            state.pending.clear();
            state.prev_err.clear();
        }
        let mut keep = Vec::new();
        for ob in std::mem::take(&mut state.pending) {
            let age = s.cycle - ob.start;
            let ok = if age == 1 {
                s.ports[ob.input].state == PortState::Abort && s.bwd_out[ob.input].err
            } else {
                s.fwd_out[ob.output].is_idle()
            };
            if !ok {
                let window = Self::window(state);
                let what = if age == 1 {
                    format!(
                        "input {} not in Abort with err_out after err on output {}",
                        ob.input, ob.output
                    )
                } else {
                    format!("output {} still driven two cycles after err", ob.output)
                };
                self.c15.fail(|| Counterexample {
                    cycle: s.cycle,
                    location: location(),
                    detail: what,
                    window,
                });
            } else if age == 1 {
                keep.push(ob);
            }
        }
        state.pending = keep;

        for (q, p) in s.ports.iter().enumerate() {
            if p.state != PortState::Accept {
                continue;
            }
            self.c15.evaluations += 1;
            let r = p.direction;
            let rose = s.bwd_in[r].err && !state.prev_err.get(r).copied().unwrap_or(true);
            if rose {
                self.c15.hits += 1;
                state.pending.push(Obligation {
                    input: q,
                    output: r,
                    start: s.cycle,
                });
            }
        }
        state.prev_err.clear();
        state.prev_err.extend(s.bwd_in.iter().map(|b| b.err));
        state.prev_cycle = Some(s.cycle);
    }

    pub fn results(&self) -> Vec<PropertyResult> {
        vec![self.c1.clone(), self.c15.clone()]
    }
}

/// Upstream driver that follows the claim protocol with a one-cycle
/// reaction delay, as a registered neighbour would.
#[derive(Debug, Clone, Copy, Default)]
struct LegalDriver {
    claiming: bool,
    header_left: u32,
    backoff: u32,
}

impl LegalDriver {
    fn drive(&mut self, bits: u32, seen: Backward, rng: &mut ChaCha8Rng) -> Forward {
        if self.backoff > 0 {
            self.backoff -= 1;
            return Forward::IDLE;
        }
        if self.claiming && (seen.err || rng.gen_bool(0.04)) {
            self.claiming = false;
            self.backoff = rng.gen_range(0..3);
            return Forward::IDLE;
        }
        if !self.claiming {
            if rng.gen_bool(0.3) {
                self.claiming = true;
                self.header_left = bits;
            } else {
                return Forward::IDLE;
            }
        }
        if self.header_left > 0 {
            if rng.gen_bool(0.85) {
                self.header_left -= 1;
                return Forward::bit(rng.gen());
            }
            return Forward::HOLD;
        }
        if seen.cts && rng.gen_bool(0.7) {
            Forward::bit(rng.gen())
        } else {
            Forward::HOLD
        }
    }
}

/// Downstream responder: may reject a claim and then holds `err` until the
/// claim is dropped.
#[derive(Debug, Clone, Copy, Default)]
struct LegalResponder {
    rejecting: bool,
}

impl LegalResponder {
    fn respond(&mut self, seen: Forward, rng: &mut ChaCha8Rng) -> Backward {
        if !seen.clm {
            self.rejecting = false;
        } else if !self.rejecting && rng.gen_bool(0.08) {
            self.rejecting = true;
        }
        if self.rejecting {
            Backward::ERROR
        } else {
            Backward {
                err: false,
                cts: rng.gen_bool(0.85),
            }
        }
    }
}

fn random_forward(rng: &mut ChaCha8Rng) -> Forward {
    Forward {
        clm: rng.gen_bool(0.8),
        act: rng.gen_bool(0.6),
        dat: rng.gen(),
    }
}

fn random_backward(rng: &mut ChaCha8Rng) -> Backward {
    Backward {
        err: rng.gen_bool(0.1),
        cts: rng.gen_bool(0.8),
    }
}

/// Steps a single switch under the stimulus and evaluates C1 and C15.
pub fn check_core(switch_bits: u32, stimulus: &Stimulus) -> CheckReport {
    check_core_with(switch_bits, stimulus, Mutation::None)
}

pub fn check_core_with(switch_bits: u32, stimulus: &Stimulus, mutation: Mutation) -> CheckReport {
    let mut sw = Switch::with_mutation(switch_bits, mutation);
    let deg = sw.degree();
    let mut rng = ChaCha8Rng::seed_from_u64(stimulus.seed);
    let mut monitors = SwitchMonitors::new(1);
    let mut drivers = vec![LegalDriver::default(); deg];
    let mut responders = vec![LegalResponder::default(); deg];
    let mut fwd = vec![Forward::IDLE; deg];
    let mut bwd = vec![Backward::READY; deg];
    let mut seen_bwd = sw.bwd_out().to_vec();
    let mut seen_fwd = sw.fwd_out().to_vec();
    let mut events = Vec::new();

    for cycle in 0..stimulus.cycles {
        match stimulus.legality {
            Legality::Legal => {
                for q in 0..deg {
                    fwd[q] = drivers[q].drive(switch_bits, seen_bwd[q], &mut rng);
                }
                for r in 0..deg {
                    bwd[r] = responders[r].respond(seen_fwd[r], &mut rng);
                }
            }
            Legality::Unconstrained => {
                for q in 0..deg {
                    fwd[q] = random_forward(&mut rng);
                    bwd[q] = random_backward(&mut rng);
                }
            }
        }
        seen_bwd.copy_from_slice(sw.bwd_out());
        seen_fwd.copy_from_slice(sw.fwd_out());
        monitors.observe(
            0,
            || "switch".to_string(),
            &Sample {
                cycle,
                ports: sw.ports(),
                fwd_in: &fwd,
                bwd_in: &bwd,
                fwd_out: sw.fwd_out(),
                bwd_out: sw.bwd_out(),
            },
        );
        events.clear();
        sw.step(&fwd, &bwd, &mut events);
    }
    CheckReport::with(monitors.results(), stimulus.cycles)
}

/// How `(source, header)` pairs are chosen for N4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sampling {
    Exhaustive,
    Random(usize),
}

const PAIR_LIMIT: u128 = 1 << 22;

fn header_bits(code: u64, p: u32) -> Vec<bool> {
    (0..p).rev().map(|i| (code >> i) & 1 == 1).collect()
}

fn switch_ids(topology: &Topology) -> Vec<usize> {
    let mut offsets = Vec::new();
    let mut acc = 0;
    for s in &topology.plan().stages {
        offsets.push(acc);
        acc += s.switch_count;
    }
    offsets
}

struct NetworkChecker<'t> {
    topology: &'t Topology,
    network: Network,
    offsets: Vec<usize>,
    monitors: SwitchMonitors,
    n4: PropertyResult,
    cycles: u64,
}

impl<'t> NetworkChecker<'t> {
    fn new(topology: &'t Topology, mutation: Mutation) -> Self {
        NetworkChecker {
            topology,
            network: Network::with_mutation(topology.clone(), mutation),
            offsets: switch_ids(topology),
            monitors: SwitchMonitors::new(topology.switch_count()),
            n4: PropertyResult::new("N4", Level::Network),
            cycles: 0,
        }
    }

    /// Runs one trial, feeding every switch to the monitors, and returns the
    /// events.
    fn trial(
        &mut self,
        inits: &[InitiatorModel],
        targets: &[TargetModel],
        max_cycles: u64,
    ) -> Vec<crate::netsim::Event> {
        self.monitors.restart();
        let offsets = &self.offsets;
        let monitors = &mut self.monitors;
        let mut sim = Simulation::new(&mut self.network, inits, targets, false)
            .expect("campaign endpoints are valid");
        let mut observe = |v: &SwitchView<'_>| {
            monitors.observe(
                offsets[v.stage] + v.index,
                || format!("s{}_w{}", v.stage, v.index),
                &Sample {
                    cycle: v.cycle,
                    ports: v.switch.ports(),
                    fwd_in: v.fwd_in,
                    bwd_in: v.bwd_in,
                    fwd_out: v.switch.fwd_out(),
                    bwd_out: v.switch.bwd_out(),
                },
            )
        };
        while sim.cycle() < max_cycles && !sim.finished() {
            sim.step_observed(Some(&mut observe));
        }
        let trace = sim.into_trace();
        self.cycles += trace.summary.cycles;
        trace.events
    }

    fn event_window(events: &[crate::netsim::Event], cycle: u64) -> Vec<String> {
        events
            .iter()
            .filter(|e| e.cycle + WINDOW as u64 > cycle && e.cycle <= cycle)
            .map(|e| e.to_string())
            .collect()
    }

    /// A lone route: unless the target signals an error, it must open at the
    /// decoded destination.
    fn pair(&mut self, source: usize, header: Vec<bool>, err_window: Option<(u64, u64)>) {
        let expected = self
            .topology
            .destination(source, &header)
            .expect("header length matches");
        let init = InitiatorModel::new(
            source,
            vec![
                Action::Open(header.clone()),
                Action::Send(vec![true, false, true, true]),
                Action::Close,
            ],
        );
        let mut target = TargetModel::sink(expected);
        target.err_window = err_window;
        let horizon =
            4 * (u64::from(self.topology.header_bits()) + self.topology.stage_count() as u64) + 16;
        let events = self.trial(&[init], &[target], horizon);
        self.n4.evaluations += 1;
        let rejected = events
            .iter()
            .any(|e| matches!(e.kind, EventKind::RouteRejected { .. }));
        if err_window.is_some() || rejected {
            return;
        }
        self.n4.hits += 1;
        let opened = events.iter().find_map(|e| match e.kind {
            EventKind::RouteOpened {
                source: Some(s),
                destination,
            } if s == source => Some((e.cycle, destination)),
            _ => None,
        });
        if opened.map(|o| o.1) != Some(expected) {
            let cycle = opened.map_or(horizon, |o| o.0);
            let window = Self::event_window(&events, cycle);
            let bits: String = header.iter().map(|&b| if b { '1' } else { '0' }).collect();
            self.n4.fail(|| Counterexample {
                cycle,
                location: format!("n{source}"),
                detail: format!(
                    "header {bits} from {source}: expected {expected}, reached {:?}",
                    opened.map(|o| o.1)
                ),
                window,
            });
        }
    }

    /// Random concurrent traffic with conflicts and target errors.
    fn traffic(&mut self, rng: &mut ChaCha8Rng, legality: Legality) {
        let topo = self.topology;
        let n = topo.nodes();
        let p = topo.header_bits();
        let horizon = 3 * (u64::from(p) + topo.stage_count() as u64) + 32;
        let mut inits = Vec::new();
        let mut headers = BTreeMap::new();
        for q in 0..n {
            if !rng.gen_bool(0.6) {
                continue;
            }
            let h = header_bits(rng.gen(), p);
            let mut script = vec![Action::Idle(rng.gen_range(0..6))];
            if legality == Legality::Unconstrained && rng.gen_bool(0.2) {
                let cut = rng.gen_range(0..p as usize);
                script.push(Action::Open(h[..cut].to_vec()));
            } else {
                script.push(Action::Open(h.clone()));
                headers.insert(q, h);
                let len = rng.gen_range(0..12);
                script.push(Action::Send((0..len).map(|_| rng.gen()).collect()));
                script.push(Action::Idle(rng.gen_range(0..4)));
            }
            script.push(Action::Close);
            inits.push(InitiatorModel::new(q, script));
        }
        let err_rate = match legality {
            Legality::Legal => 0.05,
            Legality::Unconstrained => 0.15,
        };
        let mut targets = Vec::new();
        let mut erring = BTreeSet::new();
        for d in 0..n {
            if rng.gen_bool(err_rate) {
                let a = rng.gen_range(0..horizon);
                let mut t = TargetModel::sink(d);
                t.err_window = Some((a, a + rng.gen_range(1..8)));
                targets.push(t);
                erring.insert(d);
            }
        }
        let events = self.trial(&inits, &targets, horizon);
        for e in &events {
            let EventKind::RouteOpened {
                source: Some(s),
                destination,
            } = e.kind
            else {
                continue;
            };
            let Some(h) = headers.get(&s) else { continue };
            let expected = topo.destination(s, h).expect("header length matches");
            self.n4.evaluations += 1;
            if erring.contains(&expected) {
                continue;
            }
            self.n4.hits += 1;
            if destination != expected {
                let window = Self::event_window(&events, e.cycle);
                self.n4.fail(|| Counterexample {
                    cycle: e.cycle,
                    location: format!("n{s}"),
                    detail: format!("expected {expected}, reached {destination}"),
                    window,
                });
            }
        }
    }

    fn report(mut self) -> CheckReport {
        let mut props = self.monitors.results();
        for p in &mut props {
            p.level = Level::Network;
        }
        props.push(self.n4.clone());
        self.n4 = PropertyResult::new("N4", Level::Network);
        CheckReport::with(props, self.cycles)
    }
}

/// N4 over sampled `(source, header)` pairs, then random concurrent traffic
/// for `stimulus.cycles` cycles, with C1 and C15 re-checked on every switch.
pub fn check_network(
    topology: &Topology,
    stimulus: &Stimulus,
    sampling: Sampling,
) -> Result<CheckReport, PropError> {
    check_network_with(topology, stimulus, sampling, Mutation::None)
}

pub fn check_network_with(
    topology: &Topology,
    stimulus: &Stimulus,
    sampling: Sampling,
    mutation: Mutation,
) -> Result<CheckReport, PropError> {
    let n = topology.nodes();
    let p = topology.header_bits();
    let mut rng = ChaCha8Rng::seed_from_u64(stimulus.seed);
    let mut checker = NetworkChecker::new(topology, mutation);
    let inject = |rng: &mut ChaCha8Rng| {
        (stimulus.legality == Legality::Unconstrained && rng.gen_bool(0.1))
            .then(|| (0, 2 * u64::from(p) + 4))
    };
    match sampling {
        Sampling::Exhaustive => {
            let pairs = (n as u128) << p;
            if pairs > PAIR_LIMIT {
                return Err(PropError::TooManyPairs { pairs });
            }
            for src in 0..n {
                for code in 0..1u64 << p {
                    let err = inject(&mut rng);
                    checker.pair(src, header_bits(code, p), err);
                }
            }
        }
        Sampling::Random(count) => {
            for _ in 0..count {
                let src = rng.gen_range(0..n);
                let h = header_bits(rng.gen(), p);
                let err = inject(&mut rng);
                checker.pair(src, h, err);
            }
        }
    }
    let budget = checker.cycles + stimulus.cycles;
    while checker.cycles < budget {
        checker.traffic(&mut rng, stimulus.legality);
    }
    Ok(checker.report())
}

/// Routes and simulates every permutation of `nodes` endpoints.
pub fn exhaustive_small(nodes: usize, switch_bits: u32) -> Result<CheckReport, PropError> {
    if nodes != 4 && nodes != 8 {
        return Err(PropError::TooLargeForExhaustive(nodes));
    }
    let topology = Topology::new(nodes, switch_bits)?;
    let perms: Vec<Vec<usize>> = {
        use itertools::Itertools;
        (0..nodes).permutations(nodes).collect()
    };
    let router = Router::new(&topology);
    let chunk = perms
        .len()
        .div_ceil(rayon::current_num_threads().max(1) * 4)
        .max(1);
    let parts: Vec<PropertyResult> = perms
        .par_chunks(chunk)
        .map(|part| {
            let mut network = Network::new(topology.clone());
            let mut result = PropertyResult::new("PERM", Level::Network);
            for m in part {
                result.evaluations += 1;
                result.hits += 1;
                let perm = Permutation::new(m.clone()).expect("generated permutations are valid");
                let outcome = router
                    .route(&perm)
                    .map_err(|e| e.to_string())
                    .and_then(|set| {
                        routing::verify_on(&mut network, &set).map_err(|e| e.to_string())
                    });
                match outcome {
                    Ok(r) if r.all_correct() && r.opened() == nodes => {}
                    Ok(r) => result.fail(|| Counterexample {
                        cycle: 0,
                        location: format!("{m:?}"),
                        detail: format!("{} opened, {} rejections", r.opened(), r.rejections),
                        window: Vec::new(),
                    }),
                    Err(e) => result.fail(|| Counterexample {
                        cycle: 0,
                        location: format!("{m:?}"),
                        detail: e,
                        window: Vec::new(),
                    }),
                }
            }
            result
        })
        .collect();
    let mut total = PropertyResult::new("PERM", Level::Network);
    for p in &parts {
        total.merge(p);
    }
    Ok(CheckReport::with(vec![total], 0))
}

/// Runs one check per seed in parallel and merges the reports.
pub fn campaign<F>(seeds: &[u64], run: F) -> Result<CheckReport, PropError>
where
    F: Fn(u64) -> Result<CheckReport, PropError> + Sync,
{
    let reports: Vec<CheckReport> = seeds
        .par_iter()
        .map(|&s| run(s))
        .collect::<Result<_, _>>()?;
    Ok(CheckReport::merged(&reports))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub level: Level,
    #[serde(default)]
    pub n: Option<usize>,
    pub switch_bits: u32,
    pub seeds: Vec<u64>,
    pub cycles: u64,
    #[serde(default)]
    pub legality: Legality,
    #[serde(default)]
    pub exhaustive: bool,
    #[serde(default)]
    pub pairs: Option<usize>,
}

impl CampaignConfig {
    pub fn from_json(text: &str) -> Result<Self, PropError> {
        serde_json::from_str(text).map_err(|e| PropError::Config(e.to_string()))
    }

    pub fn run(&self) -> Result<CheckReport, PropError> {
        match self.level {
            Level::Core => campaign(&self.seeds, |seed| {
                Ok(check_core(
                    self.switch_bits,
                    &Stimulus::new(seed, self.cycles, self.legality),
                ))
            }),
            Level::Network => {
                let n = self
                    .n
                    .ok_or_else(|| PropError::Config("network level needs `n`".into()))?;
                let topology = Topology::new(n, self.switch_bits)?;
                let mut report = if self.exhaustive {
                    let mut r = exhaustive_small(n, self.switch_bits)?;
                    r.merge(&check_network(
                        &topology,
                        &Stimulus::new(self.seeds.first().copied().unwrap_or(0), 0, self.legality),
                        Sampling::Exhaustive,
                    )?);
                    r
                } else {
                    CheckReport::default()
                };
                let pairs = self.pairs.unwrap_or(if self.exhaustive { 0 } else { 1000 });
                report.merge(&campaign(&self.seeds, |seed| {
                    check_network(
                        &topology,
                        &Stimulus::new(seed, self.cycles, self.legality),
                        Sampling::Random(pairs),
                    )
                })?);
                Ok(report)
            }
            Level::System => Err(PropError::Config(
                "system-level criteria are checked on schedules, not by campaign".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageRow {
    pub id: String,
    pub level: Level,
    pub checked_by: String,
    pub hits: u64,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Coverage {
    pub rows: Vec<CoverageRow>,
}

impl Coverage {
    pub fn row(&self, id: &str) -> Option<&CoverageRow> {
        self.rows.iter().find(|r| r.id == id)
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:<8} {:<8} {:>12}  {:<10} checked by",
            "id", "level", "hits", "status"
        )
        .unwrap();
        for r in &self.rows {
            writeln!(
                out,
                "{:<8} {:<8} {:>12}  {:<10} {}",
                r.id,
                format!("{:?}", r.level).to_lowercase(),
                r.hits,
                r.status.to_string(),
                r.checked_by
            )
            .unwrap();
        }
        out
    }
}

/// Maps each published criterion to the monitor that covers it. Criteria
/// defined only by this tool are appended after the published ones.
pub fn coverage_report(reports: &[CheckReport], schedule: Option<&ScheduleReport>) -> Coverage {
    let merged = CheckReport::merged(reports);
    let published = [
        ("C1", Level::Core, "no_shared_direction monitor"),
        ("C15", Level::Core, "reject_on_err monitor"),
        ("N4", Level::Network, "route_correct endpoint check"),
    ];
    let mut rows: Vec<CoverageRow> = published
        .iter()
        .map(|&(id, level, by)| match merged.get(id) {
            Some(p) => CoverageRow {
                id: id.into(),
                level,
                checked_by: by.into(),
                hits: p.hits,
                status: p.status(),
            },
            None => CoverageRow {
                id: id.into(),
                level,
                checked_by: "-".into(),
                hits: 0,
                status: Status::Uncovered,
            },
        })
        .collect();
    rows.push(match schedule {
        Some(s) => CoverageRow {
            id: "S4".into(),
            level: Level::System,
            checked_by: "validated statically in tdm".into(),
            hits: s
                .slots
                .iter()
                .filter(|c| !c.priority_violations.is_empty())
                .count() as u64
                + s.slots.len() as u64,
            status: if s.priority_violations() == 0 {
                Status::Pass
            } else {
                Status::Fail
            },
        },
        None => CoverageRow {
            id: "S4".into(),
            level: Level::System,
            checked_by: "-".into(),
            hits: 0,
            status: Status::Uncovered,
        },
    });
    for p in &merged.properties {
        if rows.iter().all(|r| r.id != p.id) {
            rows.push(CoverageRow {
                id: p.id.clone(),
                level: p.level,
                checked_by: "artifact-defined".into(),
                hits: p.hits,
                status: p.status(),
            });
        }
    }
    Coverage { rows }
}
