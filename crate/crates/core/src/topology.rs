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

//! Beneš network construction.
//!
//! A network of `N` nodes built from `B = 2^p` port crossbars is laid out as an
//! odd number of stages, symmetric about a middle stage. When `B` does not
//! evenly divide the network into `log_B(N)` levels the middle stage uses
//! smaller `2^m` port switches, with twice (or more) as many of them.
//!
//! Inter-stage wiring is a block-local `B`-way shuffle. Counting boundaries
//! outward from the middle stage, boundary `n` rotates port indices left by
//! `p` bits inside blocks of `min(B^(n+2), N)` ports; the input half of the
//! network uses the inverse rotation so the two halves mirror each other.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::routing::{self, Permutation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("node count {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("node count {0} is below the minimum of 4")]
    TooFewNodes(usize),
    #[error("switch_bits must be at least 1")]
    ZeroSwitchBits,
    #[error("switch degree 2^{switch_bits} exceeds node count {nodes}")]
    SwitchTooLarge { nodes: usize, switch_bits: u32 },
    #[error("boundary index {index} out of range ({count} boundaries)")]
    BoundaryOutOfRange { index: usize, count: usize },
    #[error("unknown diagram format `{0}` (expected `tikz` or `dot`)")]
    UnknownFormat(String),
}

/// Node count and switch size requested for a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    #[serde(rename = "nodes")]
    pub n_nodes: usize,
    pub switch_bits: u32,
}

impl NetworkSpec {
    pub fn new(n_nodes: usize, switch_bits: u32) -> Result<Self, TopologyError> {
        let spec = NetworkSpec {
            n_nodes,
            switch_bits,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<(), TopologyError> {
        if !self.n_nodes.is_power_of_two() {
            return Err(TopologyError::NotPowerOfTwo(self.n_nodes));
        }
        if self.n_nodes < 4 {
            return Err(TopologyError::TooFewNodes(self.n_nodes));
        }
        if self.switch_bits == 0 {
            return Err(TopologyError::ZeroSwitchBits);
        }
        if self.switch_bits > self.n_nodes.trailing_zeros() {
            return Err(TopologyError::SwitchTooLarge {
                nodes: self.n_nodes,
                switch_bits: self.switch_bits,
            });
        }
        Ok(())
    }

    /// Full-size switch degree `B`.
    pub fn degree(&self) -> usize {
        1 << self.switch_bits
    }

    pub fn node_bits(&self) -> u32 {
        self.n_nodes.trailing_zeros()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSpec {
    pub port_bits: u32,
    pub switch_count: usize,
}

impl StageSpec {
    pub fn degree(&self) -> usize {
        1 << self.port_bits
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagePlan {
    pub stages: Vec<StageSpec>,
    pub total_header_bits: u32,
}

impl StagePlan {
    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    /// Boundaries per half network, `(S - 1) / 2`.
    pub fn half_depth(&self) -> usize {
        (self.stages.len() - 1) / 2
    }

    pub fn port_bits(&self) -> Vec<u32> {
        self.stages.iter().map(|s| s.port_bits).collect()
    }

    pub fn is_uniform(&self) -> bool {
        self.stages
            .windows(2)
            .all(|w| w[0].port_bits == w[1].port_bits)
    }

    /// `P + S`, the route setup bound in cycles.
    pub fn setup_bound(&self) -> u64 {
        self.total_header_bits as u64 + self.stages.len() as u64
    }

    /// `2P + S`, the error notification bound in cycles.
    pub fn error_bound(&self) -> u64 {
        2 * self.total_header_bits as u64 + self.stages.len() as u64
    }
}

/// Lays out the stages of an `n_nodes` network of `2^switch_bits` port switches.
///
/// `X = ceil(log_B N)` levels give `2X - 1` stages; the middle one carries
/// whatever `m = log2(N / B^(X-1))` bits remain, which equals `switch_bits`
/// when `B^X = N`.
pub fn plan_stages(n_nodes: usize, switch_bits: u32) -> Result<StagePlan, TopologyError> {
    let spec = NetworkSpec::new(n_nodes, switch_bits)?;
    let node_bits = spec.node_bits();
    let levels = node_bits.div_ceil(switch_bits);
    let middle_bits = node_bits - switch_bits * (levels - 1);
    let outer = StageSpec {
        port_bits: switch_bits,
        switch_count: n_nodes >> switch_bits,
    };
    let middle = StageSpec {
        port_bits: middle_bits,
        switch_count: n_nodes >> middle_bits,
    };
    let mut stages = Vec::with_capacity(2 * levels as usize - 1);
    stages.extend(std::iter::repeat_n(outer, levels as usize - 1));
    stages.push(middle);
    stages.extend(std::iter::repeat_n(outer, levels as usize - 1));
    let total_header_bits = stages.iter().map(|s| s.port_bits).sum();
    Ok(StagePlan {
        stages,
        total_header_bits,
    })
}

/// Port connectivity of half-boundary `n` (0 is adjacent to the middle stage).
///
/// Returns `j` for every inner port `i`: the inner port `i` of the boundary
/// connects to outer port `j`.
pub fn connectivity(
    n: usize,
    spec: &NetworkSpec,
    plan: &StagePlan,
) -> Result<Vec<usize>, TopologyError> {
    let half = plan.half_depth();
    if n >= half {
        return Err(TopologyError::BoundaryOutOfRange {
            index: n,
            count: half,
        });
    }
    let nodes = spec.n_nodes;
    let radix = spec.degree();
    let block_bits = (spec.switch_bits as usize * (n + 2)).min(spec.node_bits() as usize);
    let block = 1usize << block_bits;
    Ok((0..nodes)
        .map(|i| {
            let origin = (i / block) * block;
            let k = (i - origin) * radix;
            (k + k / block) % block + origin
        })
        .collect())
}

/// Forward wiring of boundary `index` in stage order: output port of stage
/// `index` to input port of stage `index + 1`.
pub fn wire_boundary(
    index: usize,
    spec: &NetworkSpec,
    plan: &StagePlan,
) -> Result<Vec<usize>, TopologyError> {
    let count = plan.stage_count() - 1;
    if index >= count {
        return Err(TopologyError::BoundaryOutOfRange { index, count });
    }
    let half = plan.half_depth();
    if index < half {
        let map = connectivity(half - 1 - index, spec, plan)?;
        Ok(invert(&map).expect("connectivity is a bijection"))
    } else {
        connectivity(index - half, spec, plan)
    }
}

/// Inverse of a bijection on `[0, len)`, or `None` if `map` is not one.
pub fn invert(map: &[usize]) -> Option<Vec<usize>> {
    let mut inv = vec![usize::MAX; map.len()];
    for (i, &j) in map.iter().enumerate() {
        if j >= map.len() || inv[j] != usize::MAX {
            return None;
        }
        inv[j] = i;
    }
    Some(inv)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WiringMap {
    /// `boundaries[b][out_port]` is the input port of stage `b + 1`.
    pub boundaries: Vec<Vec<usize>>,
}

impl WiringMap {
    pub fn is_bijection(&self, boundary: usize) -> bool {
        invert(&self.boundaries[boundary]).is_some()
    }
}

/// An immutable, folded Beneš network description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    spec: NetworkSpec,
    plan: StagePlan,
    wiring: WiringMap,
    inverse: Vec<Vec<usize>>,
    folded: bool,
}

pub fn build_topology(spec: NetworkSpec) -> Result<Topology, TopologyError> {
    let plan = plan_stages(spec.n_nodes, spec.switch_bits)?;
    let boundaries = (0..plan.stage_count() - 1)
        .map(|b| wire_boundary(b, &spec, &plan))
        .collect::<Result<Vec<_>, _>>()?;
    let topology = Topology::assemble(spec, plan, WiringMap { boundaries });
    debug_assert!(topology.structural_checks().iter().all(|c| c.passed));
    Ok(topology)
}

impl Topology {
    pub fn new(n_nodes: usize, switch_bits: u32) -> Result<Self, TopologyError> {
        build_topology(NetworkSpec::new(n_nodes, switch_bits)?)
    }

    /// Puts a topology together from parts without checking them.
    ///
    /// Used when loading external descriptions and for fault injection;
    /// run [`Topology::validate`] before trusting the result.
    pub fn assemble(spec: NetworkSpec, plan: StagePlan, wiring: WiringMap) -> Self {
        let inverse = wiring
            .boundaries
            .iter()
            .map(|map| {
                let mut inv = vec![usize::MAX; map.len()];
                for (i, &j) in map.iter().enumerate() {
                    if j < inv.len() {
                        inv[j] = i;
                    }
                }
                inv
            })
            .collect();
        Topology {
            spec,
            plan,
            wiring,
            inverse,
            folded: true,
        }
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn plan(&self) -> &StagePlan {
        &self.plan
    }

    pub fn wiring(&self) -> &WiringMap {
        &self.wiring
    }

    pub fn folded(&self) -> bool {
        self.folded
    }

    pub fn nodes(&self) -> usize {
        self.spec.n_nodes
    }

    pub fn stage_count(&self) -> usize {
        self.plan.stage_count()
    }

    pub fn stage(&self, stage: usize) -> &StageSpec {
        &self.plan.stages[stage]
    }

    pub fn degree(&self, stage: usize) -> usize {
        self.plan.stages[stage].degree()
    }

    pub fn header_bits(&self) -> u32 {
        self.plan.total_header_bits
    }

    pub fn switch_count(&self) -> usize {
        self.plan.stages.iter().map(|s| s.switch_count).sum()
    }

    /// Input port of stage `stage + 1` fed by output port `port` of `stage`.
    #[inline]
    pub fn next_port(&self, stage: usize, port: usize) -> usize {
        self.wiring.boundaries[stage][port]
    }

    /// Output port of stage `stage - 1` feeding input port `port` of `stage`.
    #[inline]
    pub fn prev_port(&self, stage: usize, port: usize) -> usize {
        self.inverse[stage - 1][port]
    }

    /// Path taken by `header` from `source`, one hop per stage, or `None`
    /// if the header length does not match the network.
    pub fn walk(&self, source: usize, header: &[bool]) -> Option<Vec<Hop>> {
        if source >= self.spec.n_nodes || header.len() != self.plan.total_header_bits as usize {
            return None;
        }
        let mut hops = Vec::with_capacity(self.stage_count());
        let mut bits = header.iter();
        let mut port = source;
        for (t, stage) in self.plan.stages.iter().enumerate() {
            let d = stage.degree();
            let r = bits
                .by_ref()
                .take(stage.port_bits as usize)
                .fold(0usize, |acc, &b| (acc << 1) | b as usize);
            let out = port / d * d + r;
            hops.push(Hop {
                stage: t,
                input: port,
                output: out,
            });
            if t + 1 < self.stage_count() {
                port = self.next_port(t, out);
            }
        }
        Some(hops)
    }

    /// Node reached by `header` from `source`.
    pub fn destination(&self, source: usize, header: &[bool]) -> Option<usize> {
        self.walk(source, header)
            .and_then(|h| h.last().map(|hop| hop.output))
    }

    fn structural_checks(&self) -> Vec<Check> {
        let mut checks = Vec::new();
        let nodes = self.spec.n_nodes;
        for (b, map) in self.wiring.boundaries.iter().enumerate() {
            let ok = map.len() == nodes && invert(map).is_some();
            checks.push(Check::new(
                format!("boundary {b} bijection"),
                ok,
                if ok {
                    String::new()
                } else {
                    "port map is not a bijection on [0, N)".into()
                },
            ));
        }
        let bits = self.plan.port_bits();
        let palindrome = bits.iter().eq(bits.iter().rev()) && bits.len() % 2 == 1;
        checks.push(Check::new(
            "stage plan palindrome".into(),
            palindrome,
            format!("{bits:?}"),
        ));
        let counts = self
            .plan
            .stages
            .iter()
            .all(|s| s.switch_count * s.degree() == nodes);
        let header = self.plan.total_header_bits == bits.iter().sum::<u32>();
        checks.push(Check::new(
            "stage sizes".into(),
            counts && header,
            format!("P={}", self.plan.total_header_bits),
        ));
        let last = self.wiring.boundaries.len();
        let mirror = (0..last).all(|b| {
            let a = &self.wiring.boundaries[b];
            let z = &self.wiring.boundaries[last - 1 - b];
            invert(a).is_some_and(|inv| &inv == z)
        });
        checks.push(Check::new("mirror symmetry".into(), mirror, String::new()));
        checks
    }

    /// Structural checks, plus exhaustive routability for networks of at most
    /// eight nodes.
    pub fn validate(&self) -> ValidationReport {
        let checks = self.structural_checks();
        let structural_ok = checks.iter().all(|c| c.passed);
        let routability = if self.spec.n_nodes <= 8 && structural_ok {
            Some(self.exhaustive_routability())
        } else {
            None
        };
        ValidationReport {
            checks,
            routability,
        }
    }

    fn exhaustive_routability(&self) -> Routability {
        use itertools::Itertools;
        let n = self.spec.n_nodes;
        let mut routable = 0u64;
        let mut total = 0u64;
        for perm in (0..n).permutations(n) {
            total += 1;
            let perm = Permutation::new(perm).expect("generated permutations are valid");
            let ok = routing::route_permutation(self, &perm)
                .map(|set| routing::check_static(self, &set, Some(&perm)).is_clean())
                .unwrap_or(false);
            if ok {
                routable += 1;
            }
        }
        Routability {
            routable,
            total,
            exhaustive: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Hop {
    pub stage: usize,
    /// Global input port index within the stage.
    pub input: usize,
    /// Global output port index within the stage.
    pub output: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: String, passed: bool, detail: String) -> Self {
        Check {
            name,
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Routability {
    pub routable: u64,
    pub total: u64,
    pub exhaustive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub routability: Option<Routability>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
            && self.routability.is_none_or(|r| r.routable == r.total)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let mark = if c.passed { "ok  " } else { "FAIL" };
            write!(f, "[{mark}] {}", c.name)?;
            if !c.detail.is_empty() {
                write!(f, " ({})", c.detail)?;
            }
            writeln!(f)?;
        }
        if let Some(r) = &self.routability {
            writeln!(
                f,
                "routable permutations: {}/{}{}",
                r.routable,
                r.total,
                if r.exhaustive { " (exhaustive)" } else { "" }
            )?;
        }
        Ok(())
    }
}

/// Serialized form of a topology. Only `nodes` and `switch_bits` are needed
/// to rebuild it; the rest is informational.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologyFile {
    pub nodes: usize,
    pub switch_bits: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<Vec<StageSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub header_bits: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundaries: Option<Vec<Vec<usize>>>,
}

impl From<&Topology> for TopologyFile {
    fn from(t: &Topology) -> Self {
        TopologyFile {
            nodes: t.spec.n_nodes,
            switch_bits: t.spec.switch_bits,
            stages: Some(t.plan.stages.clone()),
            header_bits: Some(t.plan.total_header_bits),
            boundaries: Some(t.wiring.boundaries.clone()),
        }
    }
}

impl TopologyFile {
    /// Rebuilds the network. Wiring in the file, when present, is taken
    /// as-is so hand-edited descriptions can be validated.
    pub fn into_topology(self) -> Result<Topology, TopologyError> {
        let spec = NetworkSpec::new(self.nodes, self.switch_bits)?;
        match self.boundaries {
            None => build_topology(spec),
            Some(boundaries) => {
                let plan = plan_stages(spec.n_nodes, spec.switch_bits)?;
                let count = plan.stage_count() - 1;
                if boundaries.len() != count {
                    return Err(TopologyError::BoundaryOutOfRange {
                        index: boundaries.len(),
                        count,
                    });
                }
                Ok(Topology::assemble(spec, plan, WiringMap { boundaries }))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagramFormat {
    Tikz,
    Dot,
}

impl FromStr for DiagramFormat {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tikz" => Ok(DiagramFormat::Tikz),
            "dot" => Ok(DiagramFormat::Dot),
            _ => Err(TopologyError::UnknownFormat(s.to_string())),
        }
    }
}

/// Renders the network. Output depends only on the topology.
pub fn emit_diagram(topology: &Topology, format: DiagramFormat) -> String {
    match format {
        DiagramFormat::Dot => emit_dot(topology),
        DiagramFormat::Tikz => emit_tikz(topology),
    }
}

fn switch_name(stage: usize, switch: usize) -> String {
    format!("s{stage}_w{switch}")
}

fn emit_dot(t: &Topology) -> String {
    let mut out = String::new();
    let last = t.stage_count() - 1;
    let _ = writeln!(out, "digraph mcenoc {{");
    let _ = writeln!(out, "  rankdir=LR;");
    let _ = writeln!(out, "  node [shape=record, fontsize=10];");
    for q in 0..t.nodes() {
        let _ = writeln!(out, "  n{q}_tx [shape=circle, label=\"{q}\"];");
    }
    for (stage, spec) in t.plan.stages.iter().enumerate() {
        let deg = spec.degree();
        let _ = writeln!(
            out,
            "  // stage {stage}: {} x {deg}-port",
            spec.switch_count
        );
        for w in 0..spec.switch_count {
            let name = switch_name(stage, w);
            let ins: Vec<String> = (0..deg).map(|p| format!("<{name}_p{p}_in>{p}")).collect();
            let outs: Vec<String> = (0..deg).map(|p| format!("<{name}_p{p}_out>{p}")).collect();
            let _ = writeln!(
                out,
                "  {name} [label=\"{{ {{{}}} | {name} | {{{}}} }}\"];",
                ins.join("|"),
                outs.join("|")
            );
        }
    }
    for q in 0..t.nodes() {
        let _ = writeln!(out, "  n{q}_rx [shape=doublecircle, label=\"{q}\"];");
    }
    let deg0 = t.degree(0);
    for q in 0..t.nodes() {
        let name = switch_name(0, q / deg0);
        let _ = writeln!(out, "  n{q}_tx -> {name}:{name}_p{}_in;", q % deg0);
    }
    for stage in 0..last {
        let (da, db) = (t.degree(stage), t.degree(stage + 1));
        for port in 0..t.nodes() {
            let to = t.next_port(stage, port);
            let a = switch_name(stage, port / da);
            let b = switch_name(stage + 1, to / db);
            let _ = writeln!(
                out,
                "  {a}:{a}_p{}_out -> {b}:{b}_p{}_in;",
                port % da,
                to % db
            );
        }
    }
    let dl = t.degree(last);
    for q in 0..t.nodes() {
        let name = switch_name(last, q / dl);
        let _ = writeln!(out, "  {name}:{name}_p{}_out -> n{q}_rx;", q % dl);
    }
    let _ = writeln!(out, "}}");
    out
}

fn emit_tikz(t: &Topology) -> String {
    const STAGE_PITCH: f64 = 3.0;
    const WIDTH: f64 = 1.0;
    let mut out = String::new();
    let last = t.stage_count() - 1;
    let _ = writeln!(
        out,
        "% {} nodes, {} stages, P={}",
        t.nodes(),
        t.stage_count(),
        t.header_bits()
    );
    let _ = writeln!(out, "\\begin{{tikzpicture}}[x=1cm, y=0.4cm]");
    let _ = writeln!(
        out,
        "  \\tikzset{{switch/.style={{draw, rectangle, minimum width={WIDTH}cm, anchor=north west}}}}"
    );
    for (stage, spec) in t.plan.stages.iter().enumerate() {
        let deg = spec.degree();
        let x = stage as f64 * STAGE_PITCH;
        let _ = writeln!(
            out,
            "  % stage {stage}: {} switches of {deg} ports",
            spec.switch_count
        );
        for w in 0..spec.switch_count {
            let name = switch_name(stage, w);
            let top = -((w * deg) as f64) + 0.5;
            let _ = writeln!(
                out,
                "  \\node[switch, minimum height={:.1}cm] ({name}) at ({x:.1},{top:.1}) {{}};",
                deg as f64 * 0.4
            );
            for p in 0..deg {
                let y = -((w * deg + p) as f64);
                let _ = writeln!(out, "  \\coordinate ({name}_p{p}_in) at ({x:.1},{y:.1});");
                let _ = writeln!(
                    out,
                    "  \\coordinate ({name}_p{p}_out) at ({:.1},{y:.1});",
                    x + WIDTH
                );
            }
        }
    }
    let deg0 = t.degree(0);
    let dl = t.degree(last);
    let right = last as f64 * STAGE_PITCH + WIDTH + 1.0;
    for q in 0..t.nodes() {
        let y = -(q as f64);
        let a = switch_name(0, q / deg0);
        let z = switch_name(last, q / dl);
        let _ = writeln!(
            out,
            "  \\draw[->] (-1.0,{y:.1}) node[left] {{{q}}} -- ({a}_p{}_in);",
            q % deg0
        );
        let _ = writeln!(
            out,
            "  \\draw[->] ({z}_p{}_out) -- ({right:.1},{y:.1}) node[right] {{{q}}};",
            q % dl
        );
    }
    for stage in 0..last {
        let (da, db) = (t.degree(stage), t.degree(stage + 1));
        for port in 0..t.nodes() {
            let to = t.next_port(stage, port);
            let _ = writeln!(
                out,
                "  \\draw ({}_p{}_out) -- ({}_p{}_in);",
                switch_name(stage, port / da),
                port % da,
                switch_name(stage + 1, to / db),
                to % db
            );
        }
    }
    let _ = writeln!(out, "\\end{{tikzpicture}}");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_32_nodes_four_port() {
        let plan = plan_stages(32, 2).unwrap();
        assert_eq!(plan.port_bits(), vec![2, 2, 1, 2, 2]);
        assert_eq!(plan.total_header_bits, 9);
        assert_eq!(plan.stages[2].switch_count, 16);
        assert_eq!(plan.stages[0].switch_count, 8);
        assert_eq!(plan.stages[2].switch_count, 2 * plan.stages[1].switch_count);
    }

    #[test]
    fn plan_small_networks() {
        let plan = plan_stages(8, 2).unwrap();
        assert_eq!(plan.port_bits(), vec![2, 1, 2]);
        assert_eq!(plan.total_header_bits, 5);

        let plan = plan_stages(4, 1).unwrap();
        assert_eq!(plan.port_bits(), vec![1, 1, 1]);
        assert_eq!(plan.total_header_bits, 3);

        let plan = plan_stages(4, 2).unwrap();
        assert_eq!(plan.port_bits(), vec![2]);
        assert_eq!(plan.stages[0].switch_count, 1);
    }

    #[test]
    fn plan_64_nodes() {
        // 2 log2(64) - 1
        let plan = plan_stages(64, 1).unwrap();
        assert_eq!(plan.stage_count(), 11);
        assert!(plan.is_uniform());
        assert_eq!(plan.total_header_bits, 11);

        // 64 = 4^3: five full 4-port stages
        let plan = plan_stages(64, 2).unwrap();
        assert_eq!(plan.port_bits(), vec![2; 5]);
    }

    #[test]
    fn plan_rejects_bad_specs() {
        assert_eq!(plan_stages(6, 1), Err(TopologyError::NotPowerOfTwo(6)));
        assert_eq!(plan_stages(2, 1), Err(TopologyError::TooFewNodes(2)));
        assert_eq!(plan_stages(8, 0), Err(TopologyError::ZeroSwitchBits));
        assert!(matches!(
            plan_stages(8, 4),
            Err(TopologyError::SwitchTooLarge { .. })
        ));
    }

    #[test]
    fn radix_two_plans_are_uniform() {
        for bits in 2..=12u32 {
            let plan = plan_stages(1 << bits, 1).unwrap();
            assert_eq!(plan.stage_count(), 2 * bits as usize - 1);
            assert!(plan.is_uniform());
        }
    }

    #[test]
    fn middle_boundary_of_four_nodes() {
        let spec = NetworkSpec::new(4, 1).unwrap();
        let plan = plan_stages(4, 1).unwrap();
        assert_eq!(connectivity(0, &spec, &plan).unwrap(), vec![0, 2, 1, 3]);
    }

    #[test]
    fn outer_boundary_is_a_perfect_shuffle() {
        let spec = NetworkSpec::new(8, 1).unwrap();
        let plan = plan_stages(8, 1).unwrap();
        let c = connectivity(1, &spec, &plan).unwrap();
        assert_eq!(c[4], 1);
        assert_eq!(c, vec![0, 2, 4, 6, 1, 3, 5, 7]);
        // last boundary in stage order is the outer one of the output half
        assert_eq!(wire_boundary(3, &spec, &plan).unwrap()[4], 1);
        assert!(wire_boundary(4, &spec, &plan).is_err());
        assert!(connectivity(2, &spec, &plan).is_err());
    }

    #[test]
    fn port_zero_is_fixed_everywhere() {
        for (n, b) in [(4, 1), (8, 1), (8, 2), (16, 2), (32, 2), (32, 3), (64, 2)] {
            let t = Topology::new(n, b).unwrap();
            for map in &t.wiring().boundaries {
                assert_eq!(map[0], 0);
            }
        }
    }

    #[test]
    fn duplicated_entry_fails_bijection_check() {
        let t = Topology::new(8, 1).unwrap();
        let mut wiring = t.wiring().clone();
        wiring.boundaries[1][3] = wiring.boundaries[1][2];
        let broken = Topology::assemble(*t.spec(), t.plan().clone(), wiring);
        let report = broken.validate();
        assert!(!report.passed());
        assert!(report
            .failed_checks()
            .any(|c| c.name == "boundary 1 bijection"));
    }

    #[test]
    fn validate_small_networks_exhaustively() {
        let report = Topology::new(4, 1).unwrap().validate();
        assert!(report.passed(), "{report}");
        assert_eq!(
            report.routability,
            Some(Routability {
                routable: 24,
                total: 24,
                exhaustive: true
            })
        );
        let report = Topology::new(8, 1).unwrap().validate();
        assert!(report.passed(), "{report}");
        assert_eq!(report.routability.unwrap().routable, 40320);
    }

    #[test]
    fn single_crossbar() {
        let t = Topology::new(4, 2).unwrap();
        assert_eq!(t.stage_count(), 1);
        assert!(t.wiring().boundaries.is_empty());
        assert!(t.validate().passed());
    }

    #[test]
    fn diagram_format_parsing() {
        assert_eq!("dot".parse::<DiagramFormat>(), Ok(DiagramFormat::Dot));
        assert_eq!("TikZ".parse::<DiagramFormat>(), Ok(DiagramFormat::Tikz));
        assert!(matches!(
            "svg".parse::<DiagramFormat>(),
            Err(TopologyError::UnknownFormat(_))
        ));
    }

    #[test]
    fn dot_has_one_node_per_switch() {
        let t = Topology::new(8, 1).unwrap();
        let dot = emit_diagram(&t, DiagramFormat::Dot);
        let switches = dot
            .lines()
            .filter(|l| l.trim_start().starts_with('s') && l.contains("[label="))
            .count();
        assert_eq!(switches, t.switch_count());
        assert_eq!(switches, 20);
        assert!(dot.starts_with("digraph"));
        assert_eq!(dot, emit_diagram(&t, DiagramFormat::Dot));
    }

    #[test]
    fn tikz_shows_mixed_stage_sizes() {
        let t = Topology::new(8, 2).unwrap();
        let tikz = emit_diagram(&t, DiagramFormat::Tikz);
        assert!(tikz.contains("% stage 0: 2 switches of 4 ports"));
        assert!(tikz.contains("% stage 1: 4 switches of 2 ports"));
        assert!(tikz.contains("% stage 2: 2 switches of 4 ports"));
        let nodes = tikz.matches("\\node[switch").count();
        assert_eq!(nodes, 8);
        assert!(tikz.contains("(s1_w3_p1_out)"));
        assert_eq!(tikz, emit_diagram(&t, DiagramFormat::Tikz));
    }

    #[test]
    fn topology_file_round_trip() {
        let t = Topology::new(32, 2).unwrap();
        let json = serde_json::to_string(&TopologyFile::from(&t)).unwrap();
        let back: TopologyFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_topology().unwrap(), t);
        let minimal: TopologyFile =
            serde_json::from_str(r#"{"nodes": 32, "switch_bits": 2}"#).unwrap();
        assert_eq!(minimal.into_topology().unwrap(), t);
    }
}
