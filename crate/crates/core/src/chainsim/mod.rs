//! Deterministic blockchain-style remittance network simulator.
//!
//! A [`SimState`] owns a seeded ChaCha stream; every byte it emits is a pure
//! function of the [`ScenarioConfig`] and the sequence of operations applied.
//! Legitimate customers transact with Poisson arrivals modulated by time of
//! day, and fraud generators interleave labeled bursts so that the long-run
//! fraud share tracks `fraud_rate`.

pub mod config;
pub mod customer;
pub mod export;
mod fraud;

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{Corridor, FeePolicy, ScenarioConfig};
pub use customer::{CustomerProfile, LogNormalParams, Segment};
pub use export::{export_dataset, read_dataset, DatasetHeader};

use crate::digest::sha256_hex;
use crate::record::{FraudPattern, Label, Reason};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unknown fraud pattern `{0}`")]
    UnknownPattern(String),
    #[error("pattern {pattern} needs {needed} customers but the scenario has {available}")]
    InsufficientCustomers {
        pattern: FraudPattern,
        needed: usize,
        available: usize,
    },
    #[error("no eligible actor for {pattern}: {reason}")]
    NoEligibleActor { pattern: FraudPattern, reason: String },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed dataset: {0}")]
    Malformed(String),
}

/// Fixed block header overhead added to the transaction payload bytes.
const BLOCK_HEADER_BYTES: u64 = 508;
/// Blocks in the trailing throughput window.
const THROUGHPUT_WINDOW_BLOCKS: usize = 10;
const MIN_BLOCK_GAP: f64 = 1.0;
const MAX_BLOCK_GAP: f64 = 120.0;
const DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemittanceTransaction {
    pub tx_hash: String,
    pub sender_id: String,
    pub receiver_id: String,
    pub sender_wallet: String,
    pub receiver_wallet: String,
    pub amount: u64,
    pub currency: String,
    pub destination_currency: String,
    pub reason: Reason,
    /// Unix seconds.
    pub timestamp: i64,
    pub fee: u64,
    pub gas_fee: u64,
    pub block_height: Option<u64>,
    pub label: Label,
    pub size_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkMetrics {
    pub hash_rate: f64,
    pub difficulty: f64,
    pub propagation_ms: f64,
    pub throughput_tps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    /// Unix seconds.
    pub block_timestamp: i64,
    pub block_size: u64,
    pub tx_count: usize,
    pub transactions: Vec<String>,
    pub parent_height: Option<u64>,
    /// Absent for genesis.
    pub network: Option<NetworkMetrics>,
}

/// Provenance of one fraud-generator invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub pattern: FraudPattern,
    pub hashes: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Counters {
    nonce: u64,
    legit: u64,
    fraud: u64,
}

/// Full simulator state. Cloning yields an immutable snapshot that can be
/// shared across threads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimState {
    config: ScenarioConfig,
    rng: ChaCha8Rng,
    clock: i64,
    customers: Vec<CustomerProfile>,
    /// (timestamp, hash) of transactions not yet in a block.
    pending: BTreeSet<(i64, String)>,
    chain: Vec<Block>,
    ledger: BTreeMap<String, RemittanceTransaction>,
    /// Per sender (customer index): (timestamp, hash) of every sent transaction.
    history: Vec<BTreeSet<(i64, String)>>,
    receivers_seen: Vec<BTreeSet<usize>>,
    corridors_used: Vec<BTreeSet<usize>>,
    fraud_busy_until: Vec<i64>,
    injections: Vec<Injection>,
    counters: Counters,
    difficulty: f64,
}

impl SimState {
    /// Builds the customer base and the genesis block.
    pub fn init_scenario(config: ScenarioConfig) -> Result<SimState, SimError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let customers = customer::generate_customers(&config, &mut rng);
        let n = customers.len();
        let start = config.start_time.timestamp();
        let genesis = Block {
            height: 0,
            block_timestamp: start,
            block_size: BLOCK_HEADER_BYTES,
            tx_count: 0,
            transactions: Vec::new(),
            parent_height: None,
            network: None,
        };
        Ok(SimState {
            config,
            rng,
            clock: start,
            customers,
            pending: BTreeSet::new(),
            chain: vec![genesis],
            ledger: BTreeMap::new(),
            history: vec![BTreeSet::new(); n],
            receivers_seen: vec![BTreeSet::new(); n],
            corridors_used: vec![BTreeSet::new(); n],
            fraud_busy_until: vec![i64::MIN; n],
            injections: Vec::new(),
            counters: Counters::default(),
            difficulty: 2.5e15,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn clock(&self) -> i64 {
        self.clock
    }

    pub fn customers(&self) -> &[CustomerProfile] {
        &self.customers
    }

    pub fn customer(&self, customer_id: &str) -> Option<&CustomerProfile> {
        self.customer_index(customer_id).map(|i| &self.customers[i])
    }

    fn customer_index(&self, customer_id: &str) -> Option<usize> {
        let idx: usize = customer_id.strip_prefix('C')?.parse().ok()?;
        (self.customers.get(idx)?.customer_id == customer_id).then_some(idx)
    }

    pub fn chain(&self) -> &[Block] {
        &self.chain
    }

    pub fn ledger(&self) -> &BTreeMap<String, RemittanceTransaction> {
        &self.ledger
    }

    pub fn transaction(&self, tx_hash: &str) -> Option<&RemittanceTransaction> {
        self.ledger.get(tx_hash)
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    pub fn injections(&self) -> &[Injection] {
        &self.injections
    }

    /// Mined transactions in (block height, intra-block index) order.
    pub fn mined(&self) -> impl Iterator<Item = &RemittanceTransaction> + '_ {
        self.chain
            .iter()
            .flat_map(|b| b.transactions.iter())
            .map(|h| &self.ledger[h])
    }

    pub fn mined_count(&self) -> usize {
        self.chain.iter().map(|b| b.tx_count).sum()
    }

    /// Sent-transaction hashes of one customer, oldest first.
    pub fn sender_history(&self, customer_id: &str) -> Vec<&str> {
        self.customer_index(customer_id)
            .map(|i| self.history[i].iter().map(|(_, h)| h.as_str()).collect())
            .unwrap_or_default()
    }

    /// Appends `n_blocks` blocks, generating the traffic that falls in each gap.
    pub fn advance(&mut self, n_blocks: u64) -> Vec<Block> {
        let mut produced = Vec::with_capacity(n_blocks as usize);
        for _ in 0..n_blocks {
            let gap = self.draw_block_gap();
            let from = self.clock;
            let to = self.clock + gap;
            if self.config.fraud_rate < 1.0 {
                self.generate_legit(from, to);
            }
            self.top_up_fraud(from, to);
            let block = self.mine_block(to, gap);
            self.clock = to;
            produced.push(block);
        }
        produced
    }

    fn draw_block_gap(&mut self) -> i64 {
        let exp = Exp::new(1.0 / self.config.mean_block_interval).expect("validated interval");
        let gap: f64 = exp.sample(&mut self.rng);
        gap.clamp(MIN_BLOCK_GAP, MAX_BLOCK_GAP).round() as i64
    }

    fn generate_legit(&mut self, from: i64, to: i64) {
        let n = self.customers.len();
        if n < 2 {
            return;
        }
        let gap = (to - from) as f64;
        let diurnal = diurnal_factor((from + to) / 2);
        for c in 0..n {
            let lambda = self.customers[c].activity_rate / DAY as f64 * gap * diurnal;
            if lambda <= 0.0 {
                continue;
            }
            let arrivals: f64 = Poisson::new(lambda).expect("positive rate").sample(&mut self.rng);
            for _ in 0..arrivals as u64 {
                self.legit_transfer(c, from, to);
            }
        }
    }

    fn legit_transfer(&mut self, sender: usize, from: i64, to: i64) {
        let n = self.customers.len();
        let candidate = self.rng.random_range(from + 1..=to);
        let profile = &self.customers[sender];
        let receiver = if !profile.contacts.is_empty() && self.rng.random::<f64>() < 0.85 {
            profile.contacts[self.rng.random_range(0..profile.contacts.len())]
        } else {
            let mut r = self.rng.random_range(0..n - 1);
            if r >= sender {
                r += 1;
            }
            r
        };
        let corridor = if self.rng.random::<f64>() < 0.9 {
            profile.home_corridor
        } else {
            let home = &self.config.corridors[profile.home_corridor].source;
            let options: Vec<usize> = (0..self.config.corridors.len())
                .filter(|&i| &self.config.corridors[i].source == home)
                .collect();
            options[self.rng.random_range(0..options.len())]
        };
        let amount = (profile.typical_amount.sample(&mut self.rng).round() as u64).max(1_000);
        let u: f64 = self.rng.random();
        let reason = match profile.segment {
            Segment::Business if u < 0.85 => Reason::Business,
            Segment::Business => Reason::Other,
            _ if u < 0.55 => Reason::FamilySupport,
            _ if u < 0.70 => Reason::Education,
            _ if u < 0.80 => Reason::Medical,
            _ => Reason::Other,
        };
        if let Some(ts) = self.free_slot(sender, candidate, to) {
            self.create_tx(sender, receiver, amount, corridor, reason, ts, Label::Legit);
        }
    }

    /// Injects fraud until the generated fraud share reaches `fraud_rate`.
    fn top_up_fraud(&mut self, from: i64, to: i64) {
        let rate = self.config.fraud_rate;
        if rate <= 0.0 {
            return;
        }
        let weights: Vec<f64> = FraudPattern::ALL.iter().map(|p| self.config.mix_weight(*p)).collect();
        let mut failures = 0;
        let mut injected = false;
        while failures < 8 {
            let due = if rate >= 1.0 {
                // nothing legit to balance against: one burst per block
                !injected
            } else {
                (self.counters.fraud as f64) < rate / (1.0 - rate) * self.counters.legit as f64
            };
            if !due {
                break;
            }
            let pattern = FraudPattern::ALL[weighted_pick(&mut self.rng, &weights)];
            let start = self.rng.random_range(from + 1..=to);
            match self.inject_at(pattern, start, &fraud::PatternParams::default()) {
                Ok(_) => injected = true,
                Err(_) => failures += 1,
            }
        }
    }

    fn mine_block(&mut self, block_ts: i64, gap: i64) -> Block {
        let mut txs = Vec::new();
        while txs.len() < self.config.max_tx_per_block {
            match self.pending.first() {
                Some((ts, _)) if *ts <= block_ts => {
                    let (_, h) = self.pending.pop_first().expect("peeked");
                    txs.push(h);
                }
                _ => break,
            }
        }
        let height = self.chain.len() as u64;
        let mut payload = 0;
        for h in &txs {
            let tx = self.ledger.get_mut(h).expect("pending hashes live in the ledger");
            tx.block_height = Some(height);
            payload += tx.size_bytes;
        }
        let block_size = BLOCK_HEADER_BYTES + payload;

        // difficulty retargets gently towards the mean interval
        let mean = self.config.mean_block_interval;
        let adjust = ((mean - gap as f64) / mean * 0.05).clamp(-0.05, 0.05);
        self.difficulty *= 1.0 + adjust;
        let jitter: f64 = self.rng.random_range(0.95..1.05);
        let hash_rate = self.difficulty / mean * jitter;
        let tail: f64 = Exp::new(1.0 / 30.0).expect("positive").sample(&mut self.rng);
        let propagation_ms = 40.0 + block_size as f64 * 0.002 + tail;
        let window = self
            .chain
            .iter()
            .rev()
            .take(THROUGHPUT_WINDOW_BLOCKS - 1)
            .filter(|b| b.height > 0)
            .collect::<Vec<_>>();
        let window_tx: usize = window.iter().map(|b| b.tx_count).sum::<usize>() + txs.len();
        let window_start = window
            .last()
            .and_then(|b| b.parent_height)
            .map(|p| self.chain[p as usize].block_timestamp)
            .unwrap_or(block_ts - gap);
        let throughput_tps = window_tx as f64 / (block_ts - window_start) as f64;

        let block = Block {
            height,
            block_timestamp: block_ts,
            block_size,
            tx_count: txs.len(),
            transactions: txs,
            parent_height: Some(height - 1),
            network: Some(NetworkMetrics {
                hash_rate,
                difficulty: self.difficulty,
                propagation_ms,
                throughput_tps,
            }),
        };
        self.chain.push(block.clone());
        block
    }

    /// First timestamp in `[candidate, latest]` not already used by the sender.
    fn free_slot(&self, sender: usize, candidate: i64, latest: i64) -> Option<i64> {
        let used = &self.history[sender];
        let mut ts = candidate;
        while ts <= latest {
            let taken = used
                .range((ts, String::new())..(ts + 1, String::new()))
                .next()
                .is_some();
            if !taken {
                return Some(ts);
            }
            ts += 1;
        }
        None
    }

    #[allow(clippy::too_many_arguments)]
    fn create_tx(
        &mut self,
        sender: usize,
        receiver: usize,
        amount: u64,
        corridor: usize,
        reason: Reason,
        ts: i64,
        label: Label,
    ) -> Option<String> {
        let route = &self.config.corridors[corridor];
        let s = &self.customers[sender];
        let r = &self.customers[receiver];
        let nonce = self.counters.nonce;
        let payload = format!(
            "{nonce}|{}|{}|{}|{}|{amount}|{}|{}|{reason}|{ts}",
            s.customer_id, r.customer_id, s.wallet_address, r.wallet_address, route.source, route.destination
        );
        let size_bytes = payload.len() as u64;
        let gas_fee = self.config.fee_policy.base_fee + self.config.fee_policy.per_byte_fee * size_bytes;
        let fee = amount / 100;
        if fee + gas_fee >= amount || s.token_balance < amount + fee + gas_fee {
            return None;
        }
        let tx_hash = format!("0x{}", sha256_hex(format!("{payload}|{fee}|{gas_fee}")));
        let tx = RemittanceTransaction {
            tx_hash: tx_hash.clone(),
            sender_id: s.customer_id.clone(),
            receiver_id: r.customer_id.clone(),
            sender_wallet: s.wallet_address.clone(),
            receiver_wallet: r.wallet_address.clone(),
            amount,
            currency: route.source.clone(),
            destination_currency: route.destination.clone(),
            reason,
            timestamp: ts,
            fee,
            gas_fee,
            block_height: None,
            label,
            size_bytes,
        };
        self.counters.nonce += 1;
        match label {
            Label::Legit => self.counters.legit += 1,
            Label::Fraud(_) => self.counters.fraud += 1,
        }
        self.customers[sender].token_balance -= amount + fee + gas_fee;
        self.customers[receiver].token_balance += amount;
        self.history[sender].insert((ts, tx_hash.clone()));
        self.receivers_seen[sender].insert(receiver);
        self.corridors_used[sender].insert(corridor);
        self.pending.insert((ts, tx_hash.clone()));
        self.ledger.insert(tx_hash.clone(), tx);
        Some(tx_hash)
    }

    /// Checks every structural invariant of the state, rebuilding the derived
    /// indexes from the ledger. Returns the first violation found.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (i, b) in self.chain.iter().enumerate() {
            if b.height != i as u64 {
                return Err(format!("block {i} has height {}", b.height));
            }
            if i > 0 {
                let prev = &self.chain[i - 1];
                if b.block_timestamp < prev.block_timestamp {
                    return Err(format!("block {i} timestamp goes backwards"));
                }
                if b.parent_height != Some(prev.height) {
                    return Err(format!("block {i} parent mismatch"));
                }
                let m = b.network.as_ref().ok_or("missing network metrics")?;
                if !(m.hash_rate > 0.0 && m.difficulty > 0.0 && m.propagation_ms > 0.0 && m.throughput_tps >= 0.0) {
                    return Err(format!("block {i} has non-positive network metrics"));
                }
            }
            if b.tx_count != b.transactions.len() || b.tx_count > self.config.max_tx_per_block {
                return Err(format!("block {i} tx_count inconsistent"));
            }
        }
        let mut seen = BTreeSet::new();
        for b in &self.chain {
            for h in &b.transactions {
                if !seen.insert(h.clone()) {
                    return Err(format!("{h} mined twice"));
                }
                let tx = self.ledger.get(h).ok_or(format!("{h} missing from ledger"))?;
                if tx.block_height != Some(b.height) || tx.timestamp > b.block_timestamp {
                    return Err(format!("{h} block placement inconsistent"));
                }
            }
        }
        let pending: BTreeSet<String> = self.pending.iter().map(|(_, h)| h.clone()).collect();
        let ledger_keys: BTreeSet<String> = self.ledger.keys().cloned().collect();
        let union: BTreeSet<String> = seen.union(&pending).cloned().collect();
        if union != ledger_keys || !seen.is_disjoint(&pending) {
            return Err("ledger keys differ from chain + pending".into());
        }
        let mut rebuilt = vec![BTreeSet::new(); self.customers.len()];
        for tx in self.ledger.values() {
            let i = self.customer_index(&tx.sender_id).ok_or("unknown sender")?;
            if !rebuilt[i].insert((tx.timestamp, tx.tx_hash.clone())) {
                return Err("duplicate history entry".into());
            }
            if tx.fee + tx.gas_fee >= tx.amount {
                return Err(format!("{} fees exceed amount", tx.tx_hash));
            }
        }
        if rebuilt != self.history {
            return Err("history index differs from ledger rebuild".into());
        }
        for h in &self.history {
            let times: BTreeSet<i64> = h.iter().map(|(t, _)| *t).collect();
            if times.len() != h.len() {
                return Err("sender has two transactions in the same second".into());
            }
        }
        let injected: BTreeSet<&String> = self.injections.iter().flat_map(|i| &i.hashes).collect();
        for tx in self.ledger.values() {
            let from_generator = injected.contains(&tx.tx_hash);
            if tx.label.is_fraud() != from_generator {
                return Err(format!("{} label does not match provenance", tx.tx_hash));
            }
        }
        for inj in &self.injections {
            if inj
                .hashes
                .iter()
                .any(|h| self.ledger[h].label != Label::Fraud(inj.pattern))
            {
                return Err("injected transaction carries the wrong pattern".into());
            }
        }
        Ok(())
    }
}

fn diurnal_factor(ts: i64) -> f64 {
    let hour = ts.rem_euclid(DAY) as f64 / 3600.0;
    1.0 + 0.5 * (2.0 * PI * (hour - 14.0) / 24.0).cos()
}

fn weighted_pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}
