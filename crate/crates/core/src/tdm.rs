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

//! Time-division schedules of permutations and the analytic timing model.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netsim::{self, InitiatorModel, Network, RunConfig};
use crate::routing::{self, Permutation, Router};
use crate::topology::Topology;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TdmError {
    #[error("schedules need at least {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },
    #[error("source {source_node} out of range for {nodes} nodes")]
    SourceOutOfRange { source_node: usize, nodes: usize },
    #[error("{nodes} nodes cannot form a {dims}-dimensional grid of power-of-two sides >= 2")]
    GridShape { nodes: usize, dims: usize },
    #[error("efficiency {0} must lie strictly between 0 and 1")]
    Efficiency(f64),
    #[error("node count {0} must be a power of two")]
    NotPowerOfTwo(usize),
    #[error("switch_bits {bits} invalid for {nodes} nodes")]
    SwitchBits { nodes: usize, bits: u32 },
    #[error("slot {slot}: {reason}")]
    Slot { slot: usize, reason: String },
    #[error("malformed schedule: {0}")]
    Format(String),
}

/// A route launch inside a slot. Larger `priority` is more critical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Launch {
    pub source: usize,
    /// Cycle offset from the start of the slot.
    pub at: u64,
    pub priority: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TdmSlot {
    pub perm: Permutation,
    pub cycles: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub launches: Vec<Launch>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl TdmSlot {
    pub fn new(perm: Permutation, cycles: u64) -> Self {
        TdmSlot {
            perm,
            cycles,
            priority: None,
            launches: Vec::new(),
            label: None,
        }
    }

    fn labelled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TdmSchedule {
    pub slots: Vec<TdmSlot>,
}

impl TdmSchedule {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn total_cycles(&self) -> u64 {
        self.slots.iter().map(|s| s.cycles).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TdmError> {
        serde_json::from_str(text).map_err(|e| TdmError::Format(e.to_string()))
    }
}

/// Slot `r` sends every node to the node `r` places ahead.
pub fn all_to_all_schedule(nodes: usize, slot_cycles: u64) -> Result<TdmSchedule, TdmError> {
    if nodes < 2 {
        return Err(TdmError::TooFewNodes { min: 2, got: nodes });
    }
    let slots = (0..nodes)
        .map(|r| {
            TdmSlot::new(Permutation::rotation(nodes, r), slot_cycles).labelled(format!("+{r}"))
        })
        .collect();
    Ok(TdmSchedule { slots })
}

/// Power-of-two side lengths, as equal as possible, largest first.
pub fn grid_shape(nodes: usize, dims: usize) -> Result<Vec<usize>, TdmError> {
    if !nodes.is_power_of_two() {
        return Err(TdmError::NotPowerOfTwo(nodes));
    }
    let bits = nodes.trailing_zeros() as usize;
    if dims == 0 || bits < dims {
        return Err(TdmError::GridShape { nodes, dims });
    }
    Ok((0..dims)
        .map(|d| 1usize << (bits / dims + usize::from(d < bits % dims)))
        .collect())
}

/// Torus neighbour exchange: a `+1` and a `-1` cyclic shift per dimension.
pub fn mesh_emulation_schedule(
    nodes: usize,
    dims: usize,
    slot_cycles: u64,
) -> Result<TdmSchedule, TdmError> {
    let shape = grid_shape(nodes, dims)?;
    let mut slots = Vec::with_capacity(2 * dims);
    let mut stride = 1;
    for (d, &side) in shape.iter().enumerate() {
        for (dir, name) in [(1, "+"), (side - 1, "-")] {
            let mapping = (0..nodes)
                .map(|q| {
                    let c = (q / stride) % side;
                    q - c * stride + ((c + dir) % side) * stride
                })
                .collect();
            let perm = Permutation::new(mapping).expect("shift is a bijection");
            slots.push(TdmSlot::new(perm, slot_cycles).labelled(format!("dim{d}{name}")));
        }
        stride *= side;
    }
    Ok(TdmSchedule { slots })
}

/// Doubling broadcast. Relative to the source, slot `k` swaps each node
/// `i < 2^k` with `i + 2^k`; everyone else routes to itself.
pub fn broadcast_schedule(
    nodes: usize,
    source: usize,
    slot_cycles: u64,
) -> Result<TdmSchedule, TdmError> {
    if nodes < 2 {
        return Err(TdmError::TooFewNodes { min: 2, got: nodes });
    }
    if source >= nodes {
        return Err(TdmError::SourceOutOfRange {
            source_node: source,
            nodes,
        });
    }
    let rounds = usize::BITS - (nodes - 1).leading_zeros();
    let slots = (0..rounds)
        .map(|k| {
            let span = 1usize << k;
            let mapping = (0..nodes)
                .map(|q| {
                    let rel = (q + nodes - source) % nodes;
                    let to = if rel < span && rel + span < nodes {
                        rel + span
                    } else if rel >= span && rel < 2 * span {
                        rel - span
                    } else {
                        rel
                    };
                    (to + source) % nodes
                })
                .collect();
            let perm = Permutation::new(mapping).expect("swaps form a bijection");
            TdmSlot::new(perm, slot_cycles).labelled(format!("round{k}"))
        })
        .collect();
    Ok(TdmSchedule { slots })
}

/// Informed-set size after each slot, assuming every informed node forwards
/// along its slot mapping.
pub fn informed_sizes(schedule: &TdmSchedule, source: usize) -> Vec<usize> {
    let mut informed = BTreeSet::from([source]);
    schedule
        .slots
        .iter()
        .map(|slot| {
            let reached: Vec<usize> = informed.iter().map(|&q| slot.perm.get(q)).collect();
            informed.extend(reached);
            informed.len()
        })
        .collect()
}

/// Route-setup overhead `P + S` in cycles for `nodes` nodes built from
/// `2^switch_bits` port switches. Accepts two-node networks.
pub fn setup_overhead(nodes: usize, switch_bits: u32) -> Result<u64, TdmError> {
    if !nodes.is_power_of_two() || nodes < 2 {
        return Err(TdmError::NotPowerOfTwo(nodes));
    }
    let n = nodes.trailing_zeros();
    if switch_bits == 0 || switch_bits > n {
        return Err(TdmError::SwitchBits {
            nodes,
            bits: switch_bits,
        });
    }
    let x = n.div_ceil(switch_bits);
    let m = n - switch_bits * (x - 1);
    let stages = 2 * x - 1;
    let header = 2 * switch_bits * (x - 1) + m;
    Ok(u64::from(stages + header))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingModel {
    pub f_hz: f64,
    pub efficiency: f64,
    pub nodes: usize,
    pub switch_bits: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleTime {
    pub overhead_cycles: u64,
    pub slot_cycles: f64,
    pub slot_seconds: f64,
    pub cycle_seconds: f64,
}

/// Time for one slot and for a full `N`-slot all-to-all cycle.
pub fn tdm_cycle_time(model: &TimingModel) -> Result<CycleTime, TdmError> {
    let e = model.efficiency;
    if !(e > 0.0 && e < 1.0) {
        return Err(TdmError::Efficiency(e));
    }
    let overhead = setup_overhead(model.nodes, model.switch_bits)?;
    let slot_cycles = overhead as f64 / (1.0 - e);
    let slot_seconds = slot_cycles / model.f_hz;
    Ok(CycleTime {
        overhead_cycles: overhead,
        slot_cycles,
        slot_seconds,
        cycle_seconds: model.nodes as f64 * slot_seconds,
    })
}

/// Whole slot length achieving at least `efficiency`.
pub fn slot_cycles_for(overhead: u64, efficiency: f64) -> Result<u64, TdmError> {
    if !(efficiency > 0.0 && efficiency < 1.0) {
        return Err(TdmError::Efficiency(efficiency));
    }
    Ok((overhead as f64 / (1.0 - efficiency) - 1e-9).ceil() as u64)
}

/// CSV rows `N,B,efficiency,f_Hz,slot_us,cycle_us`.
pub fn model_report_csv(models: &[TimingModel]) -> Result<String, TdmError> {
    let mut out = String::from("N,B,efficiency,f_Hz,slot_us,cycle_us\n");
    for m in models {
        let t = tdm_cycle_time(m)?;
        writeln!(
            out,
            "{},{},{},{},{:.6},{:.6}",
            m.nodes,
            1u64 << m.switch_bits,
            m.efficiency,
            m.f_hz,
            t.slot_seconds * 1e6,
            t.cycle_seconds * 1e6
        )
        .expect("writing to a String");
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandwidthReport {
    pub bisection_bits_per_s: f64,
    pub per_node_per_bit: f64,
}

pub fn bisection_bandwidth(f_hz: f64, width: u32, ports: usize) -> BandwidthReport {
    let total = f_hz * f64::from(width) * ports as f64;
    let lanes = f64::from(width) * ports as f64;
    BandwidthReport {
        bisection_bits_per_s: total,
        per_node_per_bit: if lanes > 0.0 { total / lanes } else { 0.0 },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotCheck {
    pub slot: usize,
    pub routed: bool,
    pub verified: bool,
    pub cycles_ok: bool,
    /// Pairs `(earlier, later)` where a less critical launch precedes a more
    /// critical one.
    pub priority_violations: Vec<(Launch, Launch)>,
    pub detail: String,
}

impl SlotCheck {
    pub fn passed(&self) -> bool {
        self.routed && self.verified && self.cycles_ok && self.priority_violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScheduleReport {
    pub overhead_cycles: u64,
    pub slots: Vec<SlotCheck>,
}

impl ScheduleReport {
    pub fn passed(&self) -> bool {
        self.slots.iter().all(SlotCheck::passed)
    }

    pub fn priority_violations(&self) -> usize {
        self.slots.iter().map(|s| s.priority_violations.len()).sum()
    }
}

/// Less critical launches that start strictly before more critical ones.
pub fn priority_violations(launches: &[Launch]) -> Vec<(Launch, Launch)> {
    let mut out = Vec::new();
    for a in launches {
        for b in launches {
            if a.priority < b.priority && a.at < b.at {
                out.push((*a, *b));
            }
        }
    }
    out
}

/// Routes and simulates every slot, checks slot length against setup
/// overhead, and checks launch order against priorities.
pub fn validate_schedule(topology: &Topology, schedule: &TdmSchedule) -> ScheduleReport {
    let overhead = u64::from(topology.header_bits()) + topology.stage_count() as u64;
    let router = Router::new(topology);
    let mut network = Network::new(topology.clone());
    let slots = schedule
        .slots
        .iter()
        .enumerate()
        .map(|(i, slot)| {
            let mut check = SlotCheck {
                slot: i,
                routed: false,
                verified: false,
                cycles_ok: slot.cycles >= overhead,
                priority_violations: priority_violations(&slot.launches),
                detail: String::new(),
            };
            match router.route(&slot.perm) {
                Ok(set) => {
                    check.routed = true;
                    match routing::verify_on(&mut network, &set) {
                        Ok(r) => {
                            check.verified = r.all_correct();
                            if !check.verified {
                                check.detail = format!(
                                    "{} of {} routes opened, {} rejections",
                                    r.opened(),
                                    r.routes.len(),
                                    r.rejections
                                );
                            }
                        }
                        Err(e) => check.detail = e.to_string(),
                    }
                }
                Err(e) => check.detail = e.to_string(),
            }
            if !check.cycles_ok {
                check.detail = format!("slot of {} cycles below overhead {overhead}", slot.cycles);
            }
            check
        })
        .collect();
    ScheduleReport {
        overhead_cycles: overhead,
        slots,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Utilization {
    pub total_cycles: u64,
    pub payload_bits: u64,
    /// Delivered payload bits per node-cycle.
    pub utilization: f64,
    pub lost: usize,
}

/// Simulates each slot in turn. Every source opens its route at the start of
/// the slot (or at its launch offset) and sends as many payload bits as fit
/// before the slot ends.
pub fn simulate_schedule(
    topology: &Topology,
    schedule: &TdmSchedule,
) -> Result<Utilization, TdmError> {
    let router = Router::new(topology);
    let mut network = Network::new(topology.clone());
    let n = topology.nodes();
    let overhead = u64::from(topology.header_bits()) + topology.stage_count() as u64;
    let mut payload_bits = 0u64;
    let mut lost = 0;
    for (i, slot) in schedule.slots.iter().enumerate() {
        let set = router.route(&slot.perm).map_err(|e| TdmError::Slot {
            slot: i,
            reason: e.to_string(),
        })?;
        let inits: Vec<InitiatorModel> = set
            .headers
            .iter()
            .map(|(&src, h)| {
                let at = slot
                    .launches
                    .iter()
                    .find(|l| l.source == src)
                    .map_or(0, |l| l.at);
                let len = slot.cycles.saturating_sub(overhead + at) as usize;
                let payload: Vec<bool> = (0..len).map(|b| (b + src) % 2 == 0).collect();
                InitiatorModel::transfer(src, &h.bits, &payload).starting_at(at)
            })
            .collect();
        let trace =
            netsim::run(&mut network, &inits, &[], RunConfig::new(slot.cycles)).map_err(|e| {
                TdmError::Slot {
                    slot: i,
                    reason: e.to_string(),
                }
            })?;
        payload_bits += trace
            .delivered_by_node()
            .values()
            .map(|&c| c as u64)
            .sum::<u64>();
        lost += trace.lost();
    }
    let total = schedule.total_cycles();
    Ok(Utilization {
        total_cycles: total,
        payload_bits,
        utilization: if total == 0 {
            0.0
        } else {
            payload_bits as f64 / (total as f64 * n as f64)
        },
        lost,
    })
}

/// Informed-set sizes after each slot, measured from simulated deliveries.
pub fn simulate_broadcast(
    topology: &Topology,
    schedule: &TdmSchedule,
    source: usize,
) -> Result<Vec<usize>, TdmError> {
    let router = Router::new(topology);
    let mut network = Network::new(topology.clone());
    let mut informed = BTreeSet::from([source]);
    let mut sizes = Vec::new();
    for (i, slot) in schedule.slots.iter().enumerate() {
        let set = router.route(&slot.perm).map_err(|e| TdmError::Slot {
            slot: i,
            reason: e.to_string(),
        })?;
        let inits: Vec<InitiatorModel> = informed
            .iter()
            .filter(|&&q| slot.perm.get(q) != q)
            .map(|&q| InitiatorModel::transfer(q, &set.headers[&q].bits, &[true; 8]))
            .collect();
        let trace = netsim::run(
            &mut network,
            &inits,
            &[],
            RunConfig::new(slot.cycles.max(64)),
        )
        .map_err(|e| TdmError::Slot {
            slot: i,
            reason: e.to_string(),
        })?;
        informed.extend(trace.delivered_by_node().keys());
        sizes.push(informed.len());
    }
    Ok(sizes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overhead_matches_stage_plan() {
        for &(n, b) in &[(4, 1), (8, 1), (8, 2), (32, 2), (128, 3)] {
            let topo = Topology::new(n, b).unwrap();
            let expected = u64::from(topo.header_bits()) + topo.stage_count() as u64;
            assert_eq!(setup_overhead(n, b).unwrap(), expected);
        }
        assert_eq!(setup_overhead(2, 1).unwrap(), 2);
    }

    #[test]
    fn two_node_half_efficiency() {
        let t = tdm_cycle_time(&TimingModel {
            f_hz: 1.0,
            efficiency: 0.5,
            nodes: 2,
            switch_bits: 1,
        })
        .unwrap();
        assert_eq!(t.overhead_cycles, 2);
        assert!((t.slot_cycles - 4.0).abs() < 1e-12);
    }

    #[test]
    fn efficiency_bounds() {
        for e in [0.0, 1.0, -0.1, f64::NAN] {
            let m = TimingModel {
                f_hz: 1.0,
                efficiency: e,
                nodes: 8,
                switch_bits: 1,
            };
            assert!(tdm_cycle_time(&m).is_err());
        }
    }

    #[test]
    fn grid_shapes() {
        assert_eq!(grid_shape(16, 2).unwrap(), vec![4, 4]);
        assert_eq!(grid_shape(8, 3).unwrap(), vec![2, 2, 2]);
        assert_eq!(grid_shape(32, 2).unwrap(), vec![8, 4]);
        assert!(grid_shape(4, 3).is_err());
        assert!(grid_shape(12, 2).is_err());
    }

    #[test]
    fn priority_rule() {
        let hi = Launch {
            source: 0,
            at: 0,
            priority: 2,
        };
        let lo = Launch {
            source: 1,
            at: 3,
            priority: 1,
        };
        assert!(priority_violations(&[hi, lo]).is_empty());
        let early_lo = Launch { at: 0, ..lo };
        let late_hi = Launch { at: 1, ..hi };
        assert_eq!(
            priority_violations(&[late_hi, early_lo]),
            vec![(early_lo, late_hi)]
        );
        let tie = Launch { at: 0, ..lo };
        assert!(priority_violations(&[hi, tie]).is_empty());
    }

    #[test]
    fn schedule_json() {
        let s = all_to_all_schedule(4, 40).unwrap();
        let back = TdmSchedule::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        let raw = r#"[{"perm":[1,0,2,3],"cycles":12,"priority":2}]"#;
        let s = TdmSchedule::from_json(raw).unwrap();
        assert_eq!(s.slots[0].priority, Some(2));
        assert!(TdmSchedule::from_json(r#"[{"perm":[1,1],"cycles":1}]"#).is_err());
    }
}
