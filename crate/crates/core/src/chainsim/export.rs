//! Line-delimited dataset export: a header record followed by one record per
//! mined transaction in chain order.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{RemittanceTransaction, ScenarioConfig, SimError, SimState};
use crate::digest::DIGEST_NAME;
use crate::record::{from_epoch_seconds, TxRecord};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema_version: u32,
    pub seed: u64,
    pub digest_name: String,
    pub config: ScenarioConfig,
}

impl DatasetHeader {
    pub fn for_config(config: &ScenarioConfig) -> Self {
        DatasetHeader {
            schema_version: SCHEMA_VERSION,
            seed: config.seed,
            digest_name: DIGEST_NAME.to_string(),
            config: config.clone(),
        }
    }
}

impl SimState {
    /// Joins a ledger transaction with both parties' profiles into the wire record.
    /// Returns `None` for pending transactions.
    pub fn to_record(&self, tx: &RemittanceTransaction) -> Option<TxRecord> {
        let block_height = tx.block_height?;
        let s = self.customer(&tx.sender_id)?;
        let r = self.customer(&tx.receiver_id)?;
        Some(TxRecord {
            tx_hash: tx.tx_hash.clone(),
            sender_id: s.customer_id.clone(),
            sender_name: s.name.clone(),
            sender_address: s.postal_address.clone(),
            sender_identification_number: s.identification_number.clone(),
            sender_wallet: tx.sender_wallet.clone(),
            receiver_id: r.customer_id.clone(),
            receiver_name: r.name.clone(),
            receiver_address: r.postal_address.clone(),
            receiver_identification_number: r.identification_number.clone(),
            receiver_wallet: tx.receiver_wallet.clone(),
            amount_minor: tx.amount,
            currency: tx.currency.clone(),
            destination_currency: tx.destination_currency.clone(),
            reason: tx.reason,
            timestamp: from_epoch_seconds(tx.timestamp),
            fee_minor: tx.fee,
            gas_fee_minor: tx.gas_fee,
            block_height,
            label: tx.label,
        })
    }

    /// Mined transactions as wire records, in chain order.
    pub fn records(&self) -> Vec<TxRecord> {
        self.mined()
            .map(|tx| self.to_record(tx).expect("mined transactions have both parties"))
            .collect()
    }
}

/// Writes the header and every mined transaction; returns the record count
/// (header excluded). Pending transactions are never written.
pub fn export_dataset<W: Write>(state: &SimState, mut sink: W) -> Result<usize, SimError> {
    let header = DatasetHeader::for_config(state.config());
    serde_json::to_writer(&mut sink, &header).map_err(std::io::Error::from)?;
    sink.write_all(b"\n")?;
    let mut count = 0;
    for tx in state.mined() {
        let record = state.to_record(tx).expect("mined transactions have both parties");
        serde_json::to_writer(&mut sink, &record).map_err(std::io::Error::from)?;
        sink.write_all(b"\n")?;
        count += 1;
    }
    sink.flush()?;
    Ok(count)
}

/// Strict reader for files produced by [`export_dataset`].
pub fn read_dataset<R: BufRead>(source: R) -> Result<(DatasetHeader, Vec<TxRecord>), SimError> {
    let mut lines = source.lines();
    let first = lines
        .next()
        .ok_or_else(|| SimError::Malformed("missing header line".into()))??;
    let header: DatasetHeader =
        serde_json::from_str(&first).map_err(|e| SimError::Malformed(format!("header: {e}")))?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(SimError::Malformed(format!(
            "unsupported schema_version {}",
            header.schema_version
        )));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| SimError::Malformed(format!("line {}: {e}", i + 2)))?;
        records.push(rec);
    }
    Ok((header, records))
}
