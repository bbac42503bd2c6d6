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

//! Endpoint models: scripted initiators and FIFO targets.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::trace::EventKind;
use crate::switch::{Backward, Forward};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// Drives a route header, one bit per cycle, regardless of `cts`.
    Open(Vec<bool>),
    /// Drives payload bits, pausing while `cts` is low.
    Send(Vec<bool>),
    /// Holds the current claim (or stays idle) for a number of cycles.
    Idle(u64),
    /// Drops `clm`, releasing the route.
    Close,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitiatorModel {
    pub node: usize,
    pub script: Vec<Action>,
    #[serde(default)]
    pub start_cycle: u64,
}

impl InitiatorModel {
    pub fn new(node: usize, script: Vec<Action>) -> Self {
        InitiatorModel {
            node,
            script,
            start_cycle: 0,
        }
    }

    /// Opens a route, sends `payload`, then closes.
    pub fn transfer(node: usize, header: &[bool], payload: &[bool]) -> Self {
        Self::new(
            node,
            vec![
                Action::Open(header.to_vec()),
                Action::Send(payload.to_vec()),
                Action::Close,
            ],
        )
    }

    pub fn starting_at(mut self, cycle: u64) -> Self {
        self.start_cycle = cycle;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetModel {
    pub node: usize,
    pub fifo_capacity: usize,
    /// Consumes `consume_num` bits every `consume_den` cycles.
    pub consume_num: u32,
    pub consume_den: u32,
    pub cts_threshold: usize,
    /// Cycles `[start, end)` during which the target drives `err`.
    #[serde(default)]
    pub err_window: Option<(u64, u64)>,
}

impl TargetModel {
    /// Unbounded sink that consumes every bit immediately.
    pub fn sink(node: usize) -> Self {
        TargetModel {
            node,
            fifo_capacity: usize::MAX,
            consume_num: 1,
            consume_den: 1,
            cts_threshold: 0,
            err_window: None,
        }
    }

    pub fn buffered(node: usize, capacity: usize, threshold: usize, num: u32, den: u32) -> Self {
        TargetModel {
            node,
            fifo_capacity: capacity,
            consume_num: num,
            consume_den: den.max(1),
            cts_threshold: threshold,
            err_window: None,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Initiator {
    pub model: InitiatorModel,
    pc: usize,
    offset: u64,
    open: bool,
    erred: bool,
}

impl Initiator {
    pub fn new(model: InitiatorModel) -> Self {
        Initiator {
            model,
            pc: 0,
            offset: 0,
            open: false,
            erred: false,
        }
    }

    pub fn done(&self) -> bool {
        self.pc >= self.model.script.len()
    }

    fn advance(&mut self) {
        self.pc += 1;
        self.offset = 0;
    }

    fn hold(&self) -> Forward {
        if self.open {
            Forward::HOLD
        } else {
            Forward::IDLE
        }
    }

    pub fn tick(&mut self, cycle: u64, seen: Backward, events: &mut Vec<EventKind>) -> Forward {
        if cycle < self.model.start_cycle {
            return Forward::IDLE;
        }
        if self.open && seen.err && !self.erred {
            events.push(EventKind::ErrAtSource {
                node: self.model.node,
            });
            self.erred = true;
            self.open = false;
            let script = &self.model.script;
            let close = script[self.pc..]
                .iter()
                .position(|a| *a == Action::Close)
                .map_or(script.len(), |i| self.pc + i + 1);
            self.pc = close;
            self.offset = 0;
            return Forward::IDLE;
        }
        while let Some(action) = self.model.script.get(self.pc) {
            match action {
                Action::Open(bits) => {
                    if self.offset == 0 {
                        if seen.err {
                            return Forward::IDLE;
                        }
                        self.open = true;
                        self.erred = false;
                    }
                    let Some(&b) = bits.get(self.offset as usize) else {
                        self.advance();
                        continue;
                    };
                    self.offset += 1;
                    if self.offset as usize == bits.len() {
                        self.advance();
                    }
                    return Forward::bit(b);
                }
                Action::Send(bits) => {
                    let Some(&b) = bits.get(self.offset as usize) else {
                        self.advance();
                        continue;
                    };
                    if !seen.cts {
                        return self.hold();
                    }
                    self.offset += 1;
                    if self.offset as usize == bits.len() {
                        self.advance();
                    }
                    return Forward {
                        clm: self.open,
                        act: self.open,
                        dat: b && self.open,
                    };
                }
                Action::Idle(n) => {
                    if self.offset >= *n {
                        self.advance();
                        continue;
                    }
                    self.offset += 1;
                    return self.hold();
                }
                Action::Close => {
                    self.advance();
                    self.open = false;
                    return Forward::IDLE;
                }
            }
        }
        self.hold()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Target {
    pub model: TargetModel,
    fifo: VecDeque<bool>,
    credit: u64,
}

impl Target {
    pub fn new(model: TargetModel) -> Self {
        Target {
            model,
            fifo: VecDeque::new(),
            credit: 0,
        }
    }

    pub fn tick(&mut self, cycle: u64, seen: Forward, events: &mut Vec<EventKind>) -> Backward {
        let node = self.model.node;
        if seen.clm && seen.act {
            if self.fifo.len() < self.model.fifo_capacity {
                self.fifo.push_back(seen.dat);
                events.push(EventKind::BitDelivered {
                    node,
                    bit: seen.dat,
                });
            } else {
                events.push(EventKind::BitLost {
                    node,
                    bit: seen.dat,
                });
            }
        }
        self.credit += u64::from(self.model.consume_num);
        let den = u64::from(self.model.consume_den.max(1));
        while self.credit >= den {
            self.credit -= den;
            self.fifo.pop_front();
        }
        let free = self.model.fifo_capacity - self.fifo.len();
        let err = self
            .model
            .err_window
            .is_some_and(|(a, b)| (a..b).contains(&cycle));
        Backward {
            err,
            cts: free >= self.model.cts_threshold,
        }
    }
}
