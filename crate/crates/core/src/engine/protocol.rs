//! Message-passing realisation of the followers' solver.
//!
//! The station (CPS) and every consumer (EC) are separate state machines that
//! only exchange [`Message`]s through a [`Bus`]. A consumer keeps its capacity,
//! preference, price and iterate to itself and reports scalar values for its
//! own coordinate; the station combines the reports, computes the coupled
//! projections and broadcasts the resulting scalars. No consumer ever sees a
//! message addressed to another consumer or originating from one.

use serde::{Deserialize, Serialize};

use crate::error::{GridError, Result};
use crate::gnep::{drive, CommitStep, FollowerNetwork, FollowerState, GnepTrace, ProbeStep, SshpmConfig};
use crate::model::{EcParams, EnergyVector};

/// What the station asks of every consumer in a solver round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Instruction {
    Probe(ProbeStep),
    Commit(CommitStep),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Message {
    /// Deficiency and total unit-price budget for the time slot.
    Announce {
        deficiency: f64,
        price_budget: f64,
    },
    /// A consumer's reply to `Announce`: the box bound the station needs for
    /// the coupled projection.
    Register {
        ec_id: usize,
        capacity: f64,
    },
    Offer {
        ec_id: usize,
        energy: f64,
    },
    SlackReport {
        ec_id: usize,
        slack: f64,
    },
    PriceUpdate {
        ec_id: usize,
        price: f64,
    },
    ContinueIteration(Instruction),
    Converged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Party {
    Station,
    Consumer(usize),
    /// Every consumer.
    Broadcast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub from: Party,
    pub to: Party,
    pub message: Message,
}

/// One consumer agent.
#[derive(Debug, Clone)]
pub struct EcAgent {
    params: EcParams,
    state: FollowerState,
    inbox: Vec<Envelope>,
}

impl EcAgent {
    pub fn new(params: EcParams) -> Self {
        let state = FollowerState::new(params.available_energy, params.preference, 0.0);
        Self {
            params,
            state,
            inbox: Vec::new(),
        }
    }

    pub fn id(&self) -> usize {
        self.params.id
    }

    /// Every envelope this consumer has received.
    pub fn inbox(&self) -> &[Envelope] {
        &self.inbox
    }

    pub fn clear_inbox(&mut self) {
        self.inbox.clear();
    }

    fn handle(&mut self, envelope: &Envelope) -> Result<Vec<Message>> {
        self.inbox.push(envelope.clone());
        let id = self.params.id;
        Ok(match envelope.message {
            Message::Announce { .. } => vec![Message::Register {
                ec_id: id,
                capacity: self.params.available_energy,
            }],
            Message::PriceUpdate { ec_id, price } if ec_id == id => {
                self.state = FollowerState::new(self.params.available_energy, self.params.preference, price);
                Vec::new()
            }
            Message::ContinueIteration(Instruction::Probe(step)) => {
                vec![Message::SlackReport {
                    ec_id: id,
                    slack: self.state.probe(&step),
                }]
            }
            Message::ContinueIteration(Instruction::Commit(step)) => {
                let (energy, slack) = self.state.commit(&step);
                vec![
                    Message::Offer { ec_id: id, energy },
                    Message::SlackReport { ec_id: id, slack },
                ]
            }
            Message::Converged => Vec::new(),
            ref other => return Err(GridError::Invariant(format!("consumer {id} cannot handle {other:?}"))),
        })
    }
}

/// Delivers envelopes and keeps count. Broadcasts reach consumers in
/// ascending id order and their replies are collected in the same order.
#[derive(Debug, Clone)]
pub struct Bus {
    agents: Vec<EcAgent>,
    registered: Option<Vec<f64>>,
    delivered: usize,
}

impl Bus {
    /// Consumers must be listed in strictly ascending id order.
    pub fn new(params: &[EcParams]) -> Result<Self> {
        if params.windows(2).any(|w| w[0].id >= w[1].id) {
            return Err(GridError::InvalidParameter(
                "consumer ids must be strictly ascending".into(),
            ));
        }
        Ok(Self {
            agents: params.iter().cloned().map(EcAgent::new).collect(),
            registered: None,
            delivered: 0,
        })
    }

    pub fn agents(&self) -> &[EcAgent] {
        &self.agents
    }

    /// Messages delivered so far, counting a broadcast once.
    pub fn message_count(&self) -> usize {
        self.delivered
    }

    /// Sends from the station; returns the consumers' replies in id order.
    pub fn send(&mut self, to: Party, message: Message) -> Result<Vec<Message>> {
        let envelope = Envelope {
            from: Party::Station,
            to,
            message,
        };
        self.delivered += 1;
        let mut replies = Vec::new();
        for agent in &mut self.agents {
            let addressed = match to {
                Party::Broadcast => true,
                Party::Consumer(id) => agent.id() == id,
                Party::Station => false,
            };
            if addressed {
                replies.extend(agent.handle(&envelope)?);
            }
        }
        self.delivered += replies.len();
        Ok(replies)
    }

    /// Opening exchange of a time slot; the station records the capacities
    /// the consumers register with.
    pub fn announce(&mut self, deficiency: f64, price_budget: f64) -> Result<()> {
        let replies = self.send(
            Party::Broadcast,
            Message::Announce {
                deficiency,
                price_budget,
            },
        )?;
        let capacities = replies
            .into_iter()
            .map(|m| match m {
                Message::Register { capacity, .. } => Ok(capacity),
                other => Err(unexpected(&other)),
            })
            .collect::<Result<Vec<f64>>>()?;
        self.registered = Some(capacities);
        Ok(())
    }

    /// Sends each consumer its own price.
    pub fn update_prices(&mut self, prices: &[f64]) -> Result<()> {
        if prices.len() != self.agents.len() {
            return Err(GridError::Dimension {
                expected: self.agents.len(),
                found: prices.len(),
            });
        }
        let ids: Vec<usize> = self.agents.iter().map(EcAgent::id).collect();
        for (id, &price) in ids.into_iter().zip(prices) {
            self.send(Party::Consumer(id), Message::PriceUpdate { ec_id: id, price })?;
        }
        Ok(())
    }

    /// True when no consumer has received anything originating from, or
    /// carrying the offer of, another consumer.
    pub fn privacy_audit(&self) -> bool {
        self.agents.iter().all(|agent| {
            agent.inbox().iter().all(|env| {
                let foreign_offer = matches!(env.message, Message::Offer { ec_id, .. } if ec_id != agent.id());
                env.from == Party::Station && !foreign_offer
            })
        })
    }

    pub fn clear_logs(&mut self) {
        for agent in &mut self.agents {
            agent.clear_inbox();
        }
    }
}

fn unexpected(message: &Message) -> GridError {
    GridError::Invariant(format!("unexpected reply {message:?}"))
}

/// The station's view of the consumers during one solve.
struct Mediated<'a> {
    bus: &'a mut Bus,
    capacities: Vec<f64>,
}

impl FollowerNetwork for Mediated<'_> {
    fn capacities(&self) -> Vec<f64> {
        self.capacities.clone()
    }

    fn commit(&mut self, step: &CommitStep) -> Result<(Vec<f64>, Vec<f64>)> {
        let replies = self
            .bus
            .send(Party::Broadcast, Message::ContinueIteration(Instruction::Commit(*step)))?;
        let mut energies = Vec::with_capacity(self.capacities.len());
        let mut slacks = Vec::with_capacity(self.capacities.len());
        for reply in replies {
            match reply {
                Message::Offer { energy, .. } => energies.push(energy),
                Message::SlackReport { slack, .. } => slacks.push(slack),
                other => return Err(unexpected(&other)),
            }
        }
        Ok((energies, slacks))
    }

    fn probe(&mut self, step: &ProbeStep) -> Result<Vec<f64>> {
        self.bus
            .send(Party::Broadcast, Message::ContinueIteration(Instruction::Probe(*step)))?
            .into_iter()
            .map(|reply| match reply {
                Message::SlackReport { slack, .. } => Ok(slack),
                other => Err(unexpected(&other)),
            })
            .collect()
    }

    fn finish(&mut self) -> Result<()> {
        self.bus.send(Party::Broadcast, Message::Converged)?;
        Ok(())
    }
}

/// Solves the followers' game at `prices` through the message protocol.
///
/// Requires a prior [`Bus::announce`]. The station sends every consumer its
/// price, then runs the hyperplane
/// projection iteration with the consumers as remote parties. The iteration is
/// the same code path as [`crate::gnep::sshpm_solve`], so the result is
/// bit-identical to it.
pub fn gnep_mediated(
    prices: &[f64],
    bus: &mut Bus,
    params: &[EcParams],
    deficiency: f64,
    cfg: &SshpmConfig,
) -> Result<(EnergyVector, GnepTrace)> {
    cfg.validate()?;
    let capacities = bus
        .registered
        .clone()
        .ok_or_else(|| GridError::Invariant("consumers have not registered".into()))?;
    bus.update_prices(prices)?;
    let mut network = Mediated { bus, capacities };
    let (energies, trace) = drive(&mut network, deficiency, cfg)?;
    Ok((EnergyVector::new(energies, params, deficiency)?, trace))
}
