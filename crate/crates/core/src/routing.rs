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

//! Offline route computation.
//!
//! A Beneš network is a Clos network whose middle stage is itself a smaller
//! Beneš network. [`Router`] peels off the outer stage pair, assigns every
//! request one of the `B` inner subnetworks by splitting the request
//! multigraph into perfect matchings, and recurses. For two-port switches
//! this is the classical looping algorithm. Subnetworks are discovered from
//! the actual wiring, so any wiring fault shows up as a routing error or a
//! failed simulation rather than being assumed away.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netsim::{self, Action, EventKind, InitiatorModel, Network, RunConfig};
use crate::topology::{StagePlan, Topology};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RoutingError {
    #[error("mapping is not a bijection on [0, {0})")]
    NotPermutation(usize),
    #[error("permutation has {got} entries, network has {expected} nodes")]
    SizeMismatch { expected: usize, got: usize },
    #[error("header has {got} bits, plan expects {expected}")]
    HeaderLength { expected: usize, got: usize },
    #[error("invalid header character {0:?}")]
    HeaderChar(char),
    #[error("source {node} out of range for {nodes} nodes")]
    SourceOutOfRange { node: usize, nodes: usize },
    #[error("wiring is not a recursive Clos network: {0}")]
    NotRearrangeable(String),
    #[error("malformed route set: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = RoutingError;
    fn try_from(v: Vec<usize>) -> Result<Self, Self::Error> {
        Permutation::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.mapping
    }
}

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self, RoutingError> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &d in &mapping {
            if d >= n || std::mem::replace(&mut seen[d], true) {
                return Err(RoutingError::NotPermutation(n));
            }
        }
        Ok(Permutation { mapping })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            mapping: (0..n).collect(),
        }
    }

    /// `src -> (src + shift) mod n`.
    pub fn rotation(n: usize, shift: usize) -> Self {
        Permutation {
            mapping: (0..n).map(|s| (s + shift) % n).collect(),
        }
    }

    /// Completes a partial mapping. Unmapped sources route to themselves when
    /// that destination is free, otherwise to the lowest free destination.
    pub fn complete(n: usize, pairs: &[(usize, usize)]) -> Result<Self, RoutingError> {
        let mut mapping = vec![usize::MAX; n];
        let mut used = vec![false; n];
        for &(s, d) in pairs {
            if s >= n || d >= n || mapping[s] != usize::MAX || used[d] {
                return Err(RoutingError::NotPermutation(n));
            }
            mapping[s] = d;
            used[d] = true;
        }
        for s in 0..n {
            if mapping[s] == usize::MAX && !used[s] {
                mapping[s] = s;
                used[s] = true;
            }
        }
        let mut free = (0..n).filter(|&d| !used[d]);
        for m in mapping.iter_mut().filter(|m| **m == usize::MAX) {
            *m = free.next().expect("counts balance");
        }
        Ok(Permutation { mapping })
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn get(&self, src: usize) -> usize {
        self.mapping[src]
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RouteHeader {
    pub bits: Vec<bool>,
    pub grouping: Vec<u32>,
}

impl RouteHeader {
    pub fn parse(text: &str, plan: &StagePlan) -> Result<Self, RoutingError> {
        let bits = parse_bits(text)?;
        regroup_header(&bits, plan)
    }

    /// Per-stage groups joined by `-`, e.g. `10-0-01`.
    pub fn grouped(&self) -> String {
        let mut out = String::new();
        let mut i = 0;
        for (g, &n) in self.grouping.iter().enumerate() {
            if g > 0 {
                out.push('-');
            }
            for b in &self.bits[i..i + n as usize] {
                out.push(if *b { '1' } else { '0' });
            }
            i += n as usize;
        }
        out
    }

    pub fn groups(&self) -> Vec<String> {
        self.grouped().split('-').map(str::to_string).collect()
    }
}

impl fmt::Display for RouteHeader {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Parses a string of `0`/`1`, ignoring `-` separators.
pub fn parse_bits(text: &str) -> Result<Vec<bool>, RoutingError> {
    text.chars()
        .filter(|c| *c != '-')
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(RoutingError::HeaderChar(other)),
        })
        .collect()
}

/// Groups a bit string by the stage widths of `plan`.
pub fn regroup_header(bits: &[bool], plan: &StagePlan) -> Result<RouteHeader, RoutingError> {
    let expected = plan.total_header_bits as usize;
    if bits.len() != expected {
        return Err(RoutingError::HeaderLength {
            expected,
            got: bits.len(),
        });
    }
    Ok(RouteHeader {
        bits: bits.to_vec(),
        grouping: plan.port_bits(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RouteSet {
    pub headers: BTreeMap<usize, RouteHeader>,
    pub permutation: Option<Permutation>,
}

impl RouteSet {
    pub fn len(&self) -> usize {
        self.headers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.headers.is_empty()
    }

    pub fn insert(&mut self, source: usize, header: RouteHeader) {
        self.headers.insert(source, header);
    }

    pub fn to_json(&self) -> String {
        let map: BTreeMap<String, String> = self
            .headers
            .iter()
            .map(|(s, h)| (s.to_string(), h.to_string()))
            .collect();
        serde_json::to_string_pretty(&map).expect("string map serializes")
    }

    pub fn from_json(text: &str, plan: &StagePlan) -> Result<Self, RoutingError> {
        let map: BTreeMap<String, String> =
            serde_json::from_str(text).map_err(|e| RoutingError::Format(e.to_string()))?;
        let mut set = RouteSet::default();
        for (k, v) in map {
            let src = k
                .parse()
                .map_err(|_| RoutingError::Format(format!("bad source key {k:?}")))?;
            set.insert(src, RouteHeader::parse(&v, plan)?);
        }
        Ok(set)
    }
}

/// Precomputed subnetwork structure for one topology.
#[derive(Debug, Clone)]
pub struct Router {
    topology: Topology,
    /// `ingress[k][port]`: inner subnetwork entered by stage `k + 1` input `port`.
    ingress: Vec<Vec<usize>>,
    /// `egress[k][port]`: inner subnetwork left by stage `S - 2 - k` output `port`.
    egress: Vec<Vec<usize>>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Request {
    source: usize,
    input: usize,
    output: usize,
}

impl Router {
    pub fn new(topology: &Topology) -> Self {
        let s = topology.stage_count();
        let n = topology.nodes();
        let mid = topology.plan().half_depth();
        let mut ingress = Vec::new();
        let mut egress = Vec::new();
        for k in 0..mid {
            let (first, last) = (k + 1, s - 2 - k);
            // Port-level union-find over the inner stages.
            let id = |stage: usize, port: usize| (stage - first) * n + port;
            let mut uf = UnionFind((0..(last - first + 1) * n).collect());
            for t in first..=last {
                let d = topology.degree(t);
                for port in 0..n {
                    uf.union(id(t, port), id(t, port / d * d));
                    if t < last {
                        uf.union(id(t, port), id(t + 1, topology.next_port(t, port)));
                    }
                }
            }
            let mut label = BTreeMap::new();
            let mut name = |root: usize| {
                let next = label.len();
                *label.entry(root).or_insert(next)
            };
            let ins: Vec<usize> = (0..n).map(|p| name(uf.find(id(first, p)))).collect();
            let outs: Vec<usize> = (0..n).map(|p| name(uf.find(id(last, p)))).collect();
            ingress.push(ins);
            egress.push(outs);
        }
        Router {
            topology: topology.clone(),
            ingress,
            egress,
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn route(&self, perm: &Permutation) -> Result<RouteSet, RoutingError> {
        let topo = &self.topology;
        let n = topo.nodes();
        if perm.len() != n {
            return Err(RoutingError::SizeMismatch {
                expected: n,
                got: perm.len(),
            });
        }
        let requests: Vec<Request> = (0..n)
            .map(|src| Request {
                source: src,
                input: src,
                output: perm.get(src),
            })
            .collect();
        let mut dirs = vec![vec![0usize; topo.stage_count()]; n];
        self.route_level(0, requests, &mut dirs)?;

        let plan = topo.plan();
        let mut set = RouteSet {
            headers: BTreeMap::new(),
            permutation: Some(perm.clone()),
        };
        for (src, d) in dirs.iter().enumerate() {
            let mut bits = Vec::with_capacity(plan.total_header_bits as usize);
            for (stage, &dir) in plan.stages.iter().zip(d) {
                for i in (0..stage.port_bits).rev() {
                    bits.push((dir >> i) & 1 == 1);
                }
            }
            set.insert(src, regroup_header(&bits, plan)?);
        }
        Ok(set)
    }

    fn route_level(
        &self,
        k: usize,
        requests: Vec<Request>,
        dirs: &mut [Vec<usize>],
    ) -> Result<(), RoutingError> {
        let topo = &self.topology;
        let s = topo.stage_count();
        let d = topo.degree(k);
        let (ing, egr) = (k, s - 1 - k);

        if ing == egr {
            for r in requests {
                if r.input / d != r.output / d {
                    return Err(RoutingError::NotRearrangeable(format!(
                        "middle stage {k}: input {} cannot reach output {}",
                        r.input, r.output
                    )));
                }
                dirs[r.source][k] = r.output % d;
            }
            return Ok(());
        }

        let colours = split_matchings(&requests, d, |r| r.input / d, |r| r.output / d);

        // Colour c is the subnetwork reached from port c of the lowest
        // ingress switch in this subnetwork.
        let first_switch = requests.iter().map(|r| r.input / d).min().unwrap_or(0);
        let colour_comp: Vec<usize> = (0..d)
            .map(|c| self.ingress[k][topo.next_port(ing, first_switch * d + c)])
            .collect();

        let mut groups: BTreeMap<usize, Vec<Request>> = BTreeMap::new();
        for (r, &c) in requests.iter().zip(&colours) {
            let comp = colour_comp[c];
            let w = r.input / d;
            let out = (0..d)
                .map(|p| w * d + p)
                .find(|&p| self.ingress[k][topo.next_port(ing, p)] == comp)
                .ok_or_else(|| {
                    RoutingError::NotRearrangeable(format!(
                        "stage {ing} switch {w} has no link into subnetwork {comp}"
                    ))
                })?;
            let v = r.output / d;
            let inp = (0..d)
                .map(|q| v * d + q)
                .find(|&q| self.egress[k][topo.prev_port(egr, q)] == comp)
                .ok_or_else(|| {
                    RoutingError::NotRearrangeable(format!(
                        "stage {egr} switch {v} has no link from subnetwork {comp}"
                    ))
                })?;
            dirs[r.source][ing] = out % d;
            dirs[r.source][egr] = r.output % d;
            groups.entry(comp).or_default().push(Request {
                source: r.source,
                input: topo.next_port(ing, out),
                output: topo.prev_port(egr, inp),
            });
        }
        for (comp, reqs) in groups {
            let ins: BTreeSet<usize> = reqs.iter().map(|r| r.input).collect();
            let outs: BTreeSet<usize> = reqs.iter().map(|r| r.output).collect();
            if ins.len() != reqs.len() || outs.len() != reqs.len() {
                return Err(RoutingError::NotRearrangeable(format!(
                    "subnetwork {comp} at depth {} receives overlapping requests",
                    k + 1
                )));
            }
            self.route_level(k + 1, reqs, dirs)?;
        }
        Ok(())
    }
}

/// Splits a `degree`-regular bipartite multigraph into `degree` perfect
/// matchings by repeated Euler splits. Returns a colour per edge.
///
/// Each split walks closed trails starting from the lowest unassigned edge,
/// giving the first edge colour 0 and alternating thereafter.
fn split_matchings<E>(
    edges: &[E],
    degree: usize,
    left: impl Fn(&E) -> usize,
    right: impl Fn(&E) -> usize,
) -> Vec<usize> {
    let ends: Vec<(usize, usize)> = edges.iter().map(|e| (left(e), right(e))).collect();
    let mut colour = vec![0usize; edges.len()];
    let all: Vec<usize> = (0..edges.len()).collect();
    split_recursive(&ends, &all, degree, 0, 1, &mut colour);
    colour
}

fn split_recursive(
    ends: &[(usize, usize)],
    subset: &[usize],
    degree: usize,
    base: usize,
    stride: usize,
    colour: &mut [usize],
) {
    if degree <= 1 {
        for &e in subset {
            colour[e] = base;
        }
        return;
    }
    let (halves, _) = euler_split(ends, subset);
    split_recursive(ends, &halves[0], degree / 2, base, stride * 2, colour);
    split_recursive(
        ends,
        &halves[1],
        degree / 2,
        base + stride,
        stride * 2,
        colour,
    );
}

fn euler_split(ends: &[(usize, usize)], subset: &[usize]) -> ([Vec<usize>; 2], usize) {
    let mut at_left: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut at_right: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &e in subset {
        at_left.entry(ends[e].0).or_default().push(e);
        at_right.entry(ends[e].1).or_default().push(e);
    }
    let mut used: BTreeSet<usize> = BTreeSet::new();
    let mut halves = [Vec::new(), Vec::new()];
    let mut trails = 0;
    let take = |list: &Vec<usize>, used: &BTreeSet<usize>| {
        list.iter().copied().find(|e| !used.contains(e))
    };
    for &start in subset {
        if used.contains(&start) {
            continue;
        }
        trails += 1;
        let mut e = start;
        let mut c = 0;
        loop {
            used.insert(e);
            halves[c].push(e);
            c ^= 1;
            // Even steps leave a left vertex, odd steps a right vertex.
            let next = if c == 1 {
                take(&at_right[&ends[e].1], &used)
            } else {
                take(&at_left[&ends[e].0], &used)
            };
            match next {
                Some(n) => e = n,
                None => break,
            }
        }
    }
    (halves, trails)
}

pub fn route_permutation(
    topology: &Topology,
    perm: &Permutation,
) -> Result<RouteSet, RoutingError> {
    Router::new(topology).route(perm)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Conflict {
    pub stage: usize,
    pub output: usize,
    pub sources: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct StaticReport {
    pub conflicts: Vec<Conflict>,
    /// `(source, reached, expected)` for routes ending at the wrong node.
    pub misrouted: Vec<(usize, usize, usize)>,
    pub bad_length: Vec<usize>,
}

impl StaticReport {
    pub fn is_clean(&self) -> bool {
        self.conflicts.is_empty() && self.misrouted.is_empty() && self.bad_length.is_empty()
    }
}

/// Decodes every header against the wiring and looks for shared output links.
pub fn check_static(
    topology: &Topology,
    set: &RouteSet,
    expected: Option<&Permutation>,
) -> StaticReport {
    let mut report = StaticReport::default();
    let mut owners: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (&src, h) in &set.headers {
        let Some(path) = topology.walk(src, &h.bits) else {
            report.bad_length.push(src);
            continue;
        };
        for hop in &path {
            owners.entry((hop.stage, hop.output)).or_default().push(src);
        }
        let reached = path.last().map_or(src, |h| h.output);
        if let Some(p) = expected.or(set.permutation.as_ref()) {
            if src < p.len() && p.get(src) != reached {
                report.misrouted.push((src, reached, p.get(src)));
            }
        }
    }
    report.conflicts = owners
        .into_iter()
        .filter(|(_, v)| v.len() > 1)
        .map(|((stage, output), sources)| Conflict {
            stage,
            output,
            sources,
        })
        .collect();
    report
}

/// Node reached from `source` by `header`, decoded without simulation.
pub fn decode_header(topology: &Topology, source: usize, header: &RouteHeader) -> Option<usize> {
    topology.destination(source, &header.bits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RouteOutcome {
    pub source: usize,
    pub opened: bool,
    pub destination: Option<usize>,
    pub expected: Option<usize>,
}

impl RouteOutcome {
    pub fn correct(&self) -> bool {
        self.opened && (self.expected.is_none() || self.destination == self.expected)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct VerifyReport {
    pub routes: Vec<RouteOutcome>,
    pub rejections: usize,
}

impl VerifyReport {
    pub fn opened(&self) -> usize {
        self.routes.iter().filter(|r| r.opened).count()
    }

    pub fn all_correct(&self) -> bool {
        self.rejections == 0 && self.routes.iter().all(RouteOutcome::correct)
    }
}

/// Simulates concurrent setup of every route in the set.
pub fn verify_routeset(topology: &Topology, set: &RouteSet) -> Result<VerifyReport, RoutingError> {
    let mut network = Network::new(topology.clone());
    verify_on(&mut network, set)
}

/// As [`verify_routeset`], reusing an existing network.
pub fn verify_on(network: &mut Network, set: &RouteSet) -> Result<VerifyReport, RoutingError> {
    let topo = network.topology();
    let n = topo.nodes();
    let p = topo.header_bits() as usize;
    let hold = (p + 2 * topo.stage_count() + 2) as u64;
    let mut inits = Vec::with_capacity(set.len());
    for (&src, h) in &set.headers {
        if src >= n {
            return Err(RoutingError::SourceOutOfRange {
                node: src,
                nodes: n,
            });
        }
        if h.bits.len() != p {
            return Err(RoutingError::HeaderLength {
                expected: p,
                got: h.bits.len(),
            });
        }
        inits.push(InitiatorModel::new(
            src,
            vec![Action::Open(h.bits.clone()), Action::Idle(hold)],
        ));
    }
    let trace = netsim::run(network, &inits, &[], RunConfig::new(p as u64 + 2 * hold))
        .map_err(|e| RoutingError::Format(e.to_string()))?;
    let mut reached: BTreeMap<usize, usize> = BTreeMap::new();
    let mut rejections = 0;
    for e in &trace.events {
        match e.kind {
            EventKind::RouteOpened {
                source: Some(s),
                destination,
            } => {
                reached.insert(s, destination);
            }
            EventKind::RouteRejected { .. } => rejections += 1,
            _ => {}
        }
    }
    let routes = set
        .headers
        .keys()
        .map(|&src| RouteOutcome {
            source: src,
            opened: reached.contains_key(&src),
            destination: reached.get(&src).copied(),
            expected: set.permutation.as_ref().map(|p| p.get(src)),
        })
        .collect();
    Ok(VerifyReport { routes, rejections })
}
