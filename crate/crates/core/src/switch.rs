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

//! Cycle model of a single `2^p` port switching element.
//!
//! An input claims an output in-band: while `clm` and `act` are high, each
//! cycle shifts one `dat` bit into the port's direction register, most
//! significant bit first. After `p` bits the port either connects to the
//! requested output (`Accept`) or is refused (`Reject`). Once connected,
//! forward signals pass through a one-deep register, and `err`/`cts` flow
//! back through another.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub enum PortState {
    #[default]
    Wait,
    Accept,
    Reject,
    Abort,
}

impl PortState {
    /// Numeric encoding used in waveform dumps.
    pub fn code(self) -> u8 {
        match self {
            PortState::Wait => 0,
            PortState::Accept => 1,
            PortState::Reject => 2,
            PortState::Abort => 3,
        }
    }
}

/// Signals travelling from a route's source towards its destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Forward {
    pub clm: bool,
    pub act: bool,
    pub dat: bool,
}

impl Forward {
    pub const IDLE: Forward = Forward {
        clm: false,
        act: false,
        dat: false,
    };

    /// Claim held, no data this cycle.
    pub const HOLD: Forward = Forward {
        clm: true,
        act: false,
        dat: false,
    };

    pub fn bit(dat: bool) -> Forward {
        Forward {
            clm: true,
            act: true,
            dat,
        }
    }

    pub fn is_idle(self) -> bool {
        !(self.clm || self.act || self.dat)
    }
}

/// Signals travelling back towards a route's source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Backward {
    pub err: bool,
    pub cts: bool,
}

impl Backward {
    pub const READY: Backward = Backward {
        err: false,
        cts: true,
    };
    pub const ERROR: Backward = Backward {
        err: true,
        cts: false,
    };
}

impl Default for Backward {
    fn default() -> Self {
        Backward::READY
    }
}

/// Deliberate single-line faults used to show that the property monitors
/// can detect a broken switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub enum Mutation {
    #[default]
    None,
    /// Keeps forwarding (and keeps the output) after an inbound error.
    ForwardAfterErr,
    /// Grants a claim without checking whether the output is taken.
    IgnoreOwnership,
    /// Connects to the bitwise complement of the requested output.
    InvertDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InputPort {
    pub state: PortState,
    pub bits_seen: u32,
    /// Requested (and, in `Accept`, connected) output.
    pub direction: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    Accepted {
        input: usize,
        output: usize,
    },
    Rejected {
        input: usize,
        output: usize,
    },
    Aborted {
        input: usize,
        output: usize,
    },
    /// Upstream dropped `clm` on a connected port.
    TornDown {
        input: usize,
        output: usize,
    },
    /// A rejected or aborted port returned to `Wait`.
    Cleared {
        input: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Switch {
    bits: u32,
    inputs: Vec<InputPort>,
    owner: Vec<Option<usize>>,
    fwd_out: Vec<Forward>,
    bwd_out: Vec<Backward>,
    mutation: Mutation,
    busy: Vec<bool>,
    fresh: Vec<bool>,
}

impl Switch {
    pub fn new(bits: u32) -> Self {
        Self::with_mutation(bits, Mutation::None)
    }

    pub fn with_mutation(bits: u32, mutation: Mutation) -> Self {
        assert!((1..=16).contains(&bits), "switch bits out of range: {bits}");
        let deg = 1usize << bits;
        Switch {
            bits,
            inputs: vec![InputPort::default(); deg],
            owner: vec![None; deg],
            fwd_out: vec![Forward::IDLE; deg],
            bwd_out: vec![Backward::READY; deg],
            mutation,
            busy: vec![false; deg],
            fresh: vec![false; deg],
        }
    }

    pub fn reset(&mut self) {
        self.inputs.fill(InputPort::default());
        self.owner.fill(None);
        self.fwd_out.fill(Forward::IDLE);
        self.bwd_out.fill(Backward::READY);
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn degree(&self) -> usize {
        self.inputs.len()
    }

    pub fn mutation(&self) -> Mutation {
        self.mutation
    }

    pub fn port(&self, input: usize) -> &InputPort {
        &self.inputs[input]
    }

    pub fn ports(&self) -> &[InputPort] {
        &self.inputs
    }

    pub fn owner(&self, output: usize) -> Option<usize> {
        self.owner[output]
    }

    /// Registered forward outputs, one per output port.
    pub fn fwd_out(&self) -> &[Forward] {
        &self.fwd_out
    }

    /// Registered backward outputs, one per input port.
    pub fn bwd_out(&self) -> &[Backward] {
        &self.bwd_out
    }

    /// All inputs waiting with no partial claim.
    pub fn is_idle(&self) -> bool {
        self.inputs
            .iter()
            .all(|p| p.state == PortState::Wait && p.bits_seen == 0)
    }

    /// Advances one clock cycle.
    ///
    /// `fwd_in` holds this cycle's forward signals per input port and
    /// `bwd_in` the backward signals per output port. Registers take their
    /// new values at the end of the call; state changes are appended to
    /// `events`.
    pub fn step(&mut self, fwd_in: &[Forward], bwd_in: &[Backward], events: &mut Vec<Transition>) {
        let deg = self.degree();
        assert_eq!(fwd_in.len(), deg);
        assert_eq!(bwd_in.len(), deg);
        let mask = deg - 1;

        for r in 0..deg {
            self.busy[r] = self.owner[r].is_some();
            self.fresh[r] = false;
        }

        for (q, &input) in fwd_in.iter().enumerate() {
            let port = &mut self.inputs[q];
            match port.state {
                PortState::Wait => {
                    if !input.clm {
                        port.bits_seen = 0;
                        port.direction = 0;
                    } else if input.act {
                        port.direction = ((port.direction << 1) | input.dat as usize) & mask;
                        port.bits_seen += 1;
                        if port.bits_seen == self.bits {
                            let r = match self.mutation {
                                Mutation::InvertDirection => !port.direction & mask,
                                _ => port.direction,
                            };
                            port.direction = r;
                            port.bits_seen = 0;
                            let free = !self.busy[r] && !self.fresh[r];
                            if free || self.mutation == Mutation::IgnoreOwnership {
                                port.state = PortState::Accept;
                                self.owner[r] = Some(q);
                                self.fresh[r] = true;
                                events.push(Transition::Accepted {
                                    input: q,
                                    output: r,
                                });
                            } else {
                                port.state = PortState::Reject;
                                events.push(Transition::Rejected {
                                    input: q,
                                    output: r,
                                });
                            }
                        }
                    }
                }
                PortState::Accept => {
                    let r = port.direction;
                    if bwd_in[r].err {
                        port.state = PortState::Abort;
                        events.push(Transition::Aborted {
                            input: q,
                            output: r,
                        });
                    } else if !input.clm {
                        port.state = PortState::Wait;
                        port.direction = 0;
                        if self.owner[r] == Some(q) {
                            self.owner[r] = None;
                        }
                        events.push(Transition::TornDown {
                            input: q,
                            output: r,
                        });
                    }
                }
                PortState::Reject => {
                    if !input.clm {
                        *port = InputPort::default();
                        events.push(Transition::Cleared { input: q });
                    }
                }
                PortState::Abort => {
                    let r = port.direction;
                    let keep = self.mutation == Mutation::ForwardAfterErr && input.clm;
                    if self.owner[r] == Some(q) && !keep {
                        self.owner[r] = None;
                    }
                    if !input.clm {
                        *port = InputPort::default();
                        events.push(Transition::Cleared { input: q });
                    }
                }
            }
        }

        for r in 0..deg {
            self.fwd_out[r] = match self.owner[r] {
                Some(_) if self.fresh[r] => Forward::HOLD,
                Some(q) => match self.inputs[q].state {
                    PortState::Accept => fwd_in[q],
                    PortState::Abort if self.mutation == Mutation::ForwardAfterErr => fwd_in[q],
                    _ => Forward::IDLE,
                },
                None => Forward::IDLE,
            };
        }

        for q in 0..deg {
            let port = &self.inputs[q];
            self.bwd_out[q] = match port.state {
                PortState::Wait => Backward::READY,
                PortState::Accept => Backward {
                    err: false,
                    cts: bwd_in[port.direction].cts,
                },
                PortState::Reject | PortState::Abort => Backward::ERROR,
            };
        }
    }

    /// Outputs of inputs currently in `Accept`, in input order.
    pub fn accept_directions(&self) -> impl Iterator<Item = usize> + '_ {
        self.inputs
            .iter()
            .filter(|p| p.state == PortState::Accept)
            .map(|p| p.direction)
    }
}
