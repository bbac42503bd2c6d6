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

//! Scenario files: initiators addressed by destination or explicit header.

use std::collections::BTreeSet;

use anyhow::{bail, Context, Result};
use mcenoc::netsim::{Action, InitiatorModel, TargetModel};
use mcenoc::routing::{parse_bits, Permutation, Router};
use mcenoc::topology::Topology;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitiatorEntry {
    pub node: usize,
    #[serde(default)]
    pub route_to: Option<usize>,
    #[serde(default)]
    pub header: Option<String>,
    #[serde(default)]
    pub payload_bits: Option<String>,
    /// Random payload of this length, drawn from the run seed.
    #[serde(default)]
    pub payload_len: Option<usize>,
    #[serde(default)]
    pub start_cycle: u64,
    /// Cycles to hold the route after the payload before closing.
    #[serde(default)]
    pub hold: u64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub initiators: Vec<InitiatorEntry>,
    #[serde(default)]
    pub targets: Vec<TargetModel>,
    #[serde(default)]
    pub max_cycles: Option<u64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScenarioShape {
    Full(ScenarioFile),
    List(Vec<InitiatorEntry>),
}

pub fn parse(text: &str) -> Result<ScenarioFile> {
    let shape: ScenarioShape = serde_json::from_str(text).context("parsing scenario")?;
    Ok(match shape {
        ScenarioShape::Full(f) => f,
        ScenarioShape::List(initiators) => ScenarioFile {
            initiators,
            ..ScenarioFile::default()
        },
    })
}

pub struct Resolved {
    pub initiators: Vec<InitiatorModel>,
    pub targets: Vec<TargetModel>,
    pub headers: Vec<(usize, Vec<bool>)>,
    pub max_cycles: u64,
}

/// Turns entries into initiator scripts. Destinations are routed together so
/// that distinct destinations get conflict-free headers; a repeated
/// destination is routed on its own and will contend with the first.
pub fn resolve(topology: &Topology, file: &ScenarioFile, seed: u64) -> Result<Resolved> {
    let n = topology.nodes();
    for e in &file.initiators {
        if e.node >= n {
            bail!("scenario node {} out of range for {n} nodes", e.node);
        }
        if let Some(d) = e.route_to {
            if d >= n {
                bail!("scenario destination {d} out of range for {n} nodes");
            }
        }
    }
    for t in &file.targets {
        if t.node >= n {
            bail!("target node {} out of range for {n} nodes", t.node);
        }
    }

    let router = Router::new(topology);
    let mut joint = Vec::new();
    let mut used = BTreeSet::new();
    let mut alone = Vec::new();
    for e in &file.initiators {
        if let (None, Some(d)) = (&e.header, e.route_to) {
            if used.insert(d) {
                joint.push((e.node, d));
            } else {
                alone.push((e.node, d));
            }
        }
    }
    let joint_set = router.route(&Permutation::complete(n, &joint)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut initiators = Vec::new();
    let mut headers = Vec::new();
    for e in &file.initiators {
        let header = match (&e.header, e.route_to) {
            (Some(h), _) => {
                let bits = parse_bits(h)?;
                if bits.len() != topology.header_bits() as usize {
                    bail!(
                        "header {h:?} has {} bits, network expects {}",
                        bits.len(),
                        topology.header_bits()
                    );
                }
                bits
            }
            (None, Some(d)) if alone.contains(&(e.node, d)) => {
                let perm = Permutation::complete(n, &[(e.node, d)])?;
                router.route(&perm)?.headers[&e.node].bits.clone()
            }
            (None, Some(_)) => joint_set.headers[&e.node].bits.clone(),
            (None, None) => bail!("initiator {} needs `route_to` or `header`", e.node),
        };
        let payload = match (&e.payload_bits, e.payload_len) {
            (Some(p), _) => parse_bits(p)?,
            (None, Some(len)) => (0..len).map(|_| rng.gen()).collect(),
            (None, None) => Vec::new(),
        };
        let mut script = vec![Action::Open(header.clone()), Action::Send(payload)];
        if e.hold > 0 {
            script.push(Action::Idle(e.hold));
        }
        script.push(Action::Close);
        initiators.push(InitiatorModel::new(e.node, script).starting_at(e.start_cycle));
        headers.push((e.node, header));
    }
    let max_cycles = file.max_cycles.unwrap_or(100_000);
    Ok(Resolved {
        initiators,
        targets: file.targets.clone(),
        headers,
        max_cycles,
    })
}
