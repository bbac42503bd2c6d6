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

//! Simulation traces: event records, optional change-only signal dumps, and
//! their text and VCD renderings.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{self, Write};

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Reset {
        nodes: usize,
        stages: usize,
        header_bits: u32,
    },
    RouteOpened {
        source: Option<usize>,
        destination: usize,
    },
    RouteRejected {
        source: Option<usize>,
        stage: usize,
        switch: usize,
        output: usize,
    },
    RouteAborted {
        source: usize,
    },
    RouteClosed {
        source: usize,
    },
    ErrAtSource {
        node: usize,
    },
    BitDelivered {
        node: usize,
        bit: bool,
    },
    BitLost {
        node: usize,
        bit: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Event {
    pub cycle: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

fn node_or_unknown(n: Option<usize>) -> String {
    n.map_or_else(|| "?".to_string(), |n| n.to_string())
}

impl fmt::Display for Event {
    /// `cycle,kind,location,detail`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.cycle;
        match self.kind {
            EventKind::Reset {
                nodes,
                stages,
                header_bits,
            } => write!(
                f,
                "{c},reset,network,nodes={nodes} stages={stages} P={header_bits}"
            ),
            EventKind::RouteOpened {
                source,
                destination,
            } => write!(
                f,
                "{c},route_opened,n{},dst={destination}",
                node_or_unknown(source)
            ),
            EventKind::RouteRejected {
                source,
                stage,
                switch,
                output,
            } => write!(
                f,
                "{c},route_rejected,s{stage}_w{switch},src={} out={output}",
                node_or_unknown(source)
            ),
            EventKind::RouteAborted { source } => write!(f, "{c},route_aborted,n{source},"),
            EventKind::RouteClosed { source } => write!(f, "{c},route_closed,n{source},"),
            EventKind::ErrAtSource { node } => write!(f, "{c},err_at_source,n{node},"),
            EventKind::BitDelivered { node, bit } => {
                write!(f, "{c},bit_delivered,n{node},{}", bit as u8)
            }
            EventKind::BitLost { node, bit } => write!(f, "{c},bit_lost,n{node},{}", bit as u8),
        }
    }
}

/// A signal group sampled in full dumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Probe {
    /// Forward drive of a source node, packed `clm act dat`.
    Source { node: usize },
    /// Backward drive of a destination node, packed `err cts`.
    Target { node: usize },
    /// Switch input port: state code and registered `err cts`.
    Input { stage: usize, port: usize },
    /// Switch output port: registered `clm act dat`.
    Output { stage: usize, port: usize },
}

impl Probe {
    pub fn scope(&self, degree: impl Fn(usize) -> usize) -> String {
        match *self {
            Probe::Source { node } => format!("n{node}_tx"),
            Probe::Target { node } => format!("n{node}_rx"),
            Probe::Input { stage, port } | Probe::Output { stage, port } => {
                let d = degree(stage);
                format!("s{stage}_w{}_p{}", port / d, port % d)
            }
        }
    }

    fn wires(&self) -> &'static [(&'static str, u32, u32)] {
        // (name, width, shift)
        match self {
            Probe::Source { .. } | Probe::Output { .. } => {
                &[("clm", 1, 2), ("act", 1, 1), ("dat", 1, 0)]
            }
            Probe::Target { .. } => &[("err", 1, 1), ("cts", 1, 0)],
            Probe::Input { .. } => &[("state", 2, 2), ("err", 1, 1), ("cts", 1, 0)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SignalRecord {
    pub cycle: u64,
    pub probe: Probe,
    pub value: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct RunSummary {
    pub cycles: u64,
    pub completed: bool,
    /// Source nodes whose scripts had not finished when the run stopped.
    pub pending: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Trace {
    pub events: Vec<Event>,
    pub signals: Option<Vec<SignalRecord>>,
    pub summary: RunSummary,
    #[serde(skip)]
    pub(crate) degrees: Vec<usize>,
}

impl Trace {
    pub(crate) fn new(degrees: Vec<usize>, full_dump: bool) -> Self {
        Trace {
            events: Vec::new(),
            signals: full_dump.then(Vec::new),
            summary: RunSummary::default(),
            degrees,
        }
    }

    pub fn opened(&self) -> impl Iterator<Item = (u64, Option<usize>, usize)> + '_ {
        self.events.iter().filter_map(|e| match e.kind {
            EventKind::RouteOpened {
                source,
                destination,
            } => Some((e.cycle, source, destination)),
            _ => None,
        })
    }

    pub fn rejected(&self) -> impl Iterator<Item = (u64, Option<usize>, usize)> + '_ {
        self.events.iter().filter_map(|e| match e.kind {
            EventKind::RouteRejected { source, stage, .. } => Some((e.cycle, source, stage)),
            _ => None,
        })
    }

    pub fn count(&self, pred: impl Fn(&EventKind) -> bool) -> usize {
        self.events.iter().filter(|e| pred(&e.kind)).count()
    }

    /// Cycle at which `node` first saw `err`.
    pub fn err_at(&self, node: usize) -> Option<u64> {
        self.events.iter().find_map(|e| match e.kind {
            EventKind::ErrAtSource { node: n } if n == node => Some(e.cycle),
            _ => None,
        })
    }

    pub fn delivered(&self, node: usize) -> Vec<bool> {
        self.events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::BitDelivered { node: n, bit } if n == node => Some(bit),
                _ => None,
            })
            .collect()
    }

    pub fn delivered_by_node(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for e in &self.events {
            if let EventKind::BitDelivered { node, .. } = e.kind {
                *out.entry(node).or_default() += 1;
            }
        }
        out
    }

    pub fn lost(&self) -> usize {
        self.count(|k| matches!(k, EventKind::BitLost { .. }))
    }

    /// Signal records restricted to `probes`, in recording order.
    pub fn signals_at(&self, probes: &HashSet<Probe>) -> Vec<SignalRecord> {
        self.signals
            .iter()
            .flatten()
            .filter(|r| probes.contains(&r.probe))
            .copied()
            .collect()
    }

    pub fn write_events<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.events {
            writeln!(w, "{e}")?;
        }
        Ok(())
    }

    pub fn events_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_events(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("event lines are ASCII")
    }

    /// Writes the full signal dump as a VCD waveform, one time unit per cycle.
    pub fn write_vcd<W: Write>(&self, mut w: W) -> io::Result<()> {
        let Some(records) = &self.signals else {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                "trace was recorded without a full signal dump",
            ));
        };
        let mut probes: Vec<Probe> = records.iter().map(|r| r.probe).collect();
        probes.sort();
        probes.dedup();

        let degrees = &self.degrees;
        let mut ids: BTreeMap<(Probe, usize), String> = BTreeMap::new();
        let mut next = 0usize;
        writeln!(w, "$timescale 1ns $end")?;
        writeln!(w, "$scope module mcenoc $end")?;
        for p in &probes {
            writeln!(w, "$scope module {} $end", p.scope(|s| degrees[s]))?;
            for (i, (name, width, _)) in p.wires().iter().enumerate() {
                let id = vcd_id(next);
                next += 1;
                writeln!(w, "$var wire {width} {id} {name} $end")?;
                ids.insert((*p, i), id);
            }
            writeln!(w, "$upscope $end")?;
        }
        writeln!(w, "$upscope $end")?;
        writeln!(w, "$enddefinitions $end")?;

        let mut current = None;
        for r in records {
            if current != Some(r.cycle) {
                writeln!(w, "#{}", r.cycle)?;
                current = Some(r.cycle);
            }
            for (i, (_, width, shift)) in r.probe.wires().iter().enumerate() {
                let v = (r.value >> shift) & ((1u8 << width) - 1);
                let id = &ids[&(r.probe, i)];
                if *width == 1 {
                    writeln!(w, "{v}{id}")?;
                } else {
                    writeln!(w, "b{v:b} {id}")?;
                }
            }
        }
        Ok(())
    }
}

fn vcd_id(mut n: usize) -> String {
    const FIRST: u8 = b'!';
    const SPAN: usize = (b'~' - b'!' + 1) as usize;
    let mut id = String::new();
    loop {
        id.push((FIRST + (n % SPAN) as u8) as char);
        n /= SPAN;
        if n == 0 {
            break;
        }
        n -= 1;
    }
    id
}
