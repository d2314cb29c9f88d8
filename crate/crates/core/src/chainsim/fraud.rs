//! Fraud generators. Each pattern is a conjunction of behaviours (amount band,
//! burst timing, novelty of receiver or corridor) rather than a single
//! out-of-range value, so no one feature separates it from legitimate traffic.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::Rng;
use serde_json::Value;

use super::{Injection, SimError, SimState, DAY};
use crate::record::{FraudPattern, Label, Reason};

const DORMANCY: i64 = 30 * DAY;

/// Optional overrides accepted by [`SimState::inject_fraud_pattern`].
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct PatternParams {
    pub count: Option<usize>,
    pub window_seconds: Option<i64>,
    pub sender_id: Option<String>,
    pub receiver_id: Option<String>,
    pub start_offset: Option<i64>,
}

impl PatternParams {
    fn parse(params: &BTreeMap<String, Value>) -> Result<PatternParams, SimError> {
        let mut out = PatternParams::default();
        let bad = |name: &str, reason: &str| SimError::InvalidParam {
            name: name.to_string(),
            reason: reason.to_string(),
        };
        for (key, value) in params {
            match key.as_str() {
                "count" => {
                    out.count = Some(value.as_u64().ok_or_else(|| bad(key, "expected a positive integer"))? as usize)
                }
                "window_seconds" => {
                    let w = value.as_i64().filter(|w| *w > 0);
                    out.window_seconds = Some(w.ok_or_else(|| bad(key, "expected seconds > 0"))?)
                }
                "start_offset" => {
                    let w = value.as_i64().filter(|w| *w >= 1);
                    out.start_offset = Some(w.ok_or_else(|| bad(key, "expected seconds >= 1"))?)
                }
                "sender_id" => {
                    out.sender_id = Some(value.as_str().ok_or_else(|| bad(key, "expected a string"))?.to_string())
                }
                "receiver_id" => {
                    out.receiver_id = Some(value.as_str().ok_or_else(|| bad(key, "expected a string"))?.to_string())
                }
                _ => return Err(bad(key, "unknown parameter")),
            }
        }
        Ok(out)
    }
}

struct Shape {
    min_actors: usize,
    count: (usize, usize),
    window: (i64, i64),
    max_window: i64,
}

fn shape(pattern: FraudPattern) -> Shape {
    match pattern {
        FraudPattern::Structuring => Shape {
            min_actors: 2,
            count: (5, 15),
            window: (1_800, 14_400),
            max_window: DAY,
        },
        FraudPattern::AccountTakeover => Shape {
            min_actors: 2,
            count: (5, 8),
            window: (600, 3_600),
            max_window: 3_600,
        },
        FraudPattern::MuleFanIn => Shape {
            min_actors: 9,
            count: (8, 12),
            window: (1_800, 10_800),
            max_window: 6 * 3_600,
        },
        FraudPattern::VelocityBurst => Shape {
            min_actors: 2,
            count: (10, 16),
            window: (120, 600),
            max_window: 600,
        },
    }
}

impl SimState {
    /// Appends one labeled burst of `pattern` to the pending pool and returns
    /// the new transaction hashes. Timing starts just after the current clock
    /// (or `start_offset` seconds after it).
    pub fn inject_fraud_pattern(
        &mut self,
        pattern: &str,
        params: &BTreeMap<String, Value>,
    ) -> Result<Vec<String>, SimError> {
        let pattern: FraudPattern = pattern
            .parse()
            .map_err(|_| SimError::UnknownPattern(pattern.to_string()))?;
        let params = PatternParams::parse(params)?;
        let start = self.clock + params.start_offset.unwrap_or(1);
        self.inject_at(pattern, start, &params)
    }

    pub(crate) fn inject_at(
        &mut self,
        pattern: FraudPattern,
        start: i64,
        params: &PatternParams,
    ) -> Result<Vec<String>, SimError> {
        let shape = shape(pattern);
        let n = self.customers.len();
        if n < shape.min_actors {
            return Err(SimError::InsufficientCustomers {
                pattern,
                needed: shape.min_actors,
                available: n,
            });
        }
        let count = match params.count {
            Some(c) if c < shape.count.0 || (pattern == FraudPattern::Structuring && c > shape.count.1) => {
                return Err(SimError::InvalidParam {
                    name: "count".into(),
                    reason: format!("{pattern} needs between {} and {}", shape.count.0, shape.count.1),
                })
            }
            Some(c) => c,
            None => self.rng.random_range(shape.count.0..=shape.count.1),
        };
        if pattern == FraudPattern::MuleFanIn && count + 1 > n {
            return Err(SimError::InsufficientCustomers {
                pattern,
                needed: count + 1,
                available: n,
            });
        }
        let window = match params.window_seconds {
            Some(w) if w > shape.max_window => {
                return Err(SimError::InvalidParam {
                    name: "window_seconds".into(),
                    reason: format!("{pattern} must complete within {} s", shape.max_window),
                })
            }
            Some(w) => w,
            None => self.rng.random_range(shape.window.0..=shape.window.1),
        };
        if window < 2 * count as i64 {
            return Err(SimError::InvalidParam {
                name: "window_seconds".into(),
                reason: format!("too short for {count} transfers"),
            });
        }
        let lookup = |id: &Option<String>, role: &str| -> Result<Option<usize>, SimError> {
            match id {
                None => Ok(None),
                Some(id) => self.customer_index(id).map(Some).ok_or_else(|| SimError::InvalidParam {
                    name: format!("{role}_id"),
                    reason: format!("unknown customer `{id}`"),
                }),
            }
        };
        let sender = lookup(&params.sender_id, "sender")?;
        let receiver = lookup(&params.receiver_id, "receiver")?;

        let hashes = match pattern {
            FraudPattern::Structuring => self.structuring(sender, start, count, window)?,
            FraudPattern::AccountTakeover => self.account_takeover(sender, receiver, start, count, window)?,
            FraudPattern::MuleFanIn => self.mule_fan_in(receiver, start, count, window)?,
            FraudPattern::VelocityBurst => self.velocity_burst(sender, start, count, window)?,
        };
        self.injections.push(Injection {
            pattern,
            hashes: hashes.clone(),
        });
        Ok(hashes)
    }

    /// Distinct sorted offsets starting at 0. `count` seconds of slack are kept
    /// at the end so nudging around a sender's existing timestamps stays inside
    /// the window.
    fn burst_times(&mut self, count: usize, window: i64) -> Vec<i64> {
        let span = (window - count as i64).max(count as i64) as usize;
        let mut t: Vec<i64> = sample(&mut self.rng, span, count.saturating_sub(1))
            .into_iter()
            .map(|i| i as i64 + 1)
            .collect();
        t.push(0);
        t.sort_unstable();
        t
    }

    fn pick_idle_customer(&mut self, start: i64, exclude: &BTreeSet<usize>) -> Option<usize> {
        let n = self.customers.len();
        for _ in 0..64 {
            let c = self.rng.random_range(0..n);
            if !exclude.contains(&c) && self.fraud_busy_until[c] < start {
                return Some(c);
            }
        }
        (0..n).find(|c| !exclude.contains(c) && self.fraud_busy_until[*c] < start)
    }

    fn random_other(&mut self, not: usize) -> usize {
        let mut r = self.rng.random_range(0..self.customers.len() - 1);
        if r >= not {
            r += 1;
        }
        r
    }

    /// Places a burst of transfers from `sender`, keeping timestamps unique per sender.
    #[allow(clippy::too_many_arguments)]
    fn emit_burst(
        &mut self,
        pattern: FraudPattern,
        sender: usize,
        start: i64,
        times: &[i64],
        mut plan: impl FnMut(&mut Self, usize) -> (usize, u64, usize, Reason),
    ) -> Vec<String> {
        let mut hashes = Vec::with_capacity(times.len());
        let mut last = i64::MIN;
        for (i, off) in times.iter().enumerate() {
            let candidate = (start + off).max(last + 1);
            let Some(ts) = self.free_slot(sender, candidate, i64::MAX) else {
                continue;
            };
            let (receiver, amount, corridor, reason) = plan(self, i);
            if let Some(h) = self.create_tx(sender, receiver, amount, corridor, reason, ts, Label::Fraud(pattern)) {
                hashes.push(h);
                last = ts;
            }
        }
        self.fraud_busy_until[sender] = self.fraud_busy_until[sender].max(last);
        hashes
    }

    /// k transfers just under the reporting threshold from one sender.
    fn structuring(
        &mut self,
        sender: Option<usize>,
        start: i64,
        count: usize,
        window: i64,
    ) -> Result<Vec<String>, SimError> {
        let pattern = FraudPattern::Structuring;
        let sender = match sender {
            Some(s) => s,
            None => self
                .pick_idle_customer(start, &BTreeSet::new())
                .ok_or(SimError::NoEligibleActor {
                    pattern,
                    reason: "every customer is already in a burst".into(),
                })?,
        };
        let threshold = self.config.report_threshold;
        let lo = (threshold * 70).div_ceil(100);
        let hi = threshold * 99 / 100;
        let n_receivers = self.rng.random_range(1..=3usize);
        let receivers: Vec<usize> = (0..n_receivers).map(|_| self.random_other(sender)).collect();
        let corridor = self.customers[sender].home_corridor;
        let times = self.burst_times(count, window);
        let hashes = self.emit_burst(pattern, sender, start, &times, |s, i| {
            let amount = s.rng.random_range(lo..=hi);
            let reason = if s.rng.random::<bool>() {
                Reason::Business
            } else {
                Reason::FamilySupport
            };
            (receivers[i % receivers.len()], amount, corridor, reason)
        });
        Ok(hashes)
    }

    /// A dormant account suddenly sends to a never-seen receiver on a new corridor.
    fn account_takeover(
        &mut self,
        sender: Option<usize>,
        receiver: Option<usize>,
        start: i64,
        count: usize,
        window: i64,
    ) -> Result<Vec<String>, SimError> {
        let pattern = FraudPattern::AccountTakeover;
        let dormant = |s: &SimState, c: usize| {
            s.fraud_busy_until[c] < start
                && s.history[c]
                    .iter()
                    .next_back()
                    .is_none_or(|(ts, _)| *ts <= start - DORMANCY)
        };
        let sender = match sender {
            Some(s) if dormant(self, s) => s,
            Some(_) => {
                return Err(SimError::NoEligibleActor {
                    pattern,
                    reason: "sender was active in the last 30 days".into(),
                })
            }
            None => {
                let candidates: Vec<usize> = (0..self.customers.len()).filter(|&c| dormant(self, c)).collect();
                if candidates.is_empty() {
                    return Err(SimError::NoEligibleActor {
                        pattern,
                        reason: "no dormant customer".into(),
                    });
                }
                candidates[self.rng.random_range(0..candidates.len())]
            }
        };
        let fresh = |s: &SimState, r: usize| r != sender && !s.receivers_seen[sender].contains(&r);
        let receiver = match receiver {
            Some(r) if fresh(self, r) => r,
            Some(_) => {
                return Err(SimError::NoEligibleActor {
                    pattern,
                    reason: "receiver was already paid by the sender".into(),
                })
            }
            None => {
                let mut pick = None;
                for _ in 0..64 {
                    let r = self.random_other(sender);
                    if fresh(self, r) {
                        pick = Some(r);
                        break;
                    }
                }
                pick.or_else(|| (0..self.customers.len()).find(|&r| fresh(self, r)))
                    .ok_or(SimError::NoEligibleActor {
                        pattern,
                        reason: "no never-seen receiver".into(),
                    })?
            }
        };
        let home = self.customers[sender].home_currency.clone();
        let unused: Vec<usize> = (0..self.config.corridors.len())
            .filter(|c| !self.corridors_used[sender].contains(c))
            .collect();
        let riskiest = |cands: Vec<usize>, s: &SimState| {
            cands.into_iter().max_by(|a, b| {
                s.config.corridors[*a]
                    .risk
                    .total_cmp(&s.config.corridors[*b].risk)
                    .then(b.cmp(a))
            })
        };
        let same_source: Vec<usize> = unused
            .iter()
            .copied()
            .filter(|c| self.config.corridors[*c].source == home && *c != self.customers[sender].home_corridor)
            .collect();
        let corridor =
            riskiest(same_source, self)
                .or_else(|| riskiest(unused, self))
                .ok_or(SimError::NoEligibleActor {
                    pattern,
                    reason: "sender has used every corridor".into(),
                })?;
        let base = self.customers[sender].typical_amount.median();
        let times = self.burst_times(count, window);
        let hashes = self.emit_burst(pattern, sender, start, &times, |s, _| {
            let amount = (base * s.rng.random_range(2.0..6.0)).round().max(1_000.0) as u64;
            (receiver, amount, corridor, Reason::Other)
        });
        Ok(hashes)
    }

    /// Many distinct senders paying one receiver in round amounts.
    fn mule_fan_in(
        &mut self,
        receiver: Option<usize>,
        start: i64,
        senders: usize,
        window: i64,
    ) -> Result<Vec<String>, SimError> {
        let pattern = FraudPattern::MuleFanIn;
        let n = self.customers.len();
        let receiver = match receiver {
            Some(r) => r,
            None => self.rng.random_range(0..n),
        };
        let mut chosen = BTreeSet::from([receiver]);
        let mut order = Vec::with_capacity(senders);
        for _ in 0..senders {
            match self.pick_idle_customer(start, &chosen) {
                Some(c) => {
                    chosen.insert(c);
                    order.push(c);
                }
                None => break,
            }
        }
        if order.len() < senders {
            // fall back to busy customers rather than failing; timestamps stay unique per sender
            let rest: Vec<usize> = (0..n).filter(|c| !chosen.contains(c)).collect();
            let picks = sample(&mut self.rng, rest.len(), senders - order.len());
            order.extend(picks.into_iter().map(|i| rest[i]));
        }
        let times = self.burst_times(senders, window);
        let mut hashes = Vec::with_capacity(senders);
        for (sender, off) in order.into_iter().zip(times) {
            let home = &self.customers[sender].home_currency;
            let corridor = (0..self.config.corridors.len())
                .filter(|c| &self.config.corridors[*c].source == home)
                .max_by(|a, b| {
                    self.config.corridors[*a]
                        .risk
                        .total_cmp(&self.config.corridors[*b].risk)
                        .then(b.cmp(a))
                })
                .unwrap_or(self.customers[sender].home_corridor);
            let amount = self.rng.random_range(5..=30u64) * 100_00;
            hashes.extend(self.emit_burst(pattern, sender, start, &[off], |_, _| {
                (receiver, amount, corridor, Reason::FamilySupport)
            }));
        }
        Ok(hashes)
    }

    /// One sender, at least ten transfers within minutes.
    fn velocity_burst(
        &mut self,
        sender: Option<usize>,
        start: i64,
        count: usize,
        window: i64,
    ) -> Result<Vec<String>, SimError> {
        let pattern = FraudPattern::VelocityBurst;
        let sender = match sender {
            Some(s) => s,
            None => self
                .pick_idle_customer(start, &BTreeSet::new())
                .ok_or(SimError::NoEligibleActor {
                    pattern,
                    reason: "every customer is already in a burst".into(),
                })?,
        };
        let typical = self.customers[sender].typical_amount;
        let corridor = self.customers[sender].home_corridor;
        let times = self.burst_times(count, window);
        let hashes = self.emit_burst(pattern, sender, start, &times, |s, _| {
            let receiver = s.random_other(sender);
            let amount = (typical.sample(&mut s.rng) * s.rng.random_range(0.5..1.5))
                .round()
                .max(1_000.0) as u64;
            let reason = Reason::ALL[s.rng.random_range(0..Reason::ALL.len())];
            (receiver, amount, corridor, reason)
        });
        Ok(hashes)
    }
}
