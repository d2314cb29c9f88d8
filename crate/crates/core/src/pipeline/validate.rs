use std::io::BufRead;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::chainsim::customer::is_wallet_address;
use crate::chainsim::DatasetHeader;
use crate::record::{parse_timestamp, Label, Reason, TxRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("invalid field `{field}`: {rule}")]
    InvalidField { field: String, rule: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationWarning {
    pub field: String,
    pub message: String,
}

/// A validated transaction plus any recoverable oddities found on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanRecord {
    pub tx: TxRecord,
    pub warnings: Vec<ValidationWarning>,
}

impl CleanRecord {
    pub fn epoch_seconds(&self) -> i64 {
        self.tx.epoch_seconds()
    }
}

/// Aliases mapped onto the canonical reasons. Anything else becomes `other`.
const REASON_ALIASES: &[(&str, Reason)] = &[
    ("family", Reason::FamilySupport),
    ("family_support", Reason::FamilySupport),
    ("remittance", Reason::FamilySupport),
    ("school", Reason::Education),
    ("tuition", Reason::Education),
    ("health", Reason::Medical),
    ("hospital", Reason::Medical),
    ("trade", Reason::Business),
    ("invoice", Reason::Business),
];

pub fn map_reason(raw: &str) -> (Reason, bool) {
    if let Some(r) = Reason::from_canonical(raw) {
        return (r, true);
    }
    let lower = raw.to_ascii_lowercase();
    if let Some(r) = Reason::from_canonical(&lower) {
        return (r, false);
    }
    let r = REASON_ALIASES
        .iter()
        .find(|(alias, _)| *alias == lower)
        .map(|(_, r)| *r)
        .unwrap_or(Reason::Other);
    (r, false)
}

fn invalid(field: &str, rule: &str) -> ValidationError {
    ValidationError::InvalidField {
        field: field.to_string(),
        rule: rule.to_string(),
    }
}

struct Fields<'a> {
    obj: &'a Map<String, Value>,
}

impl Fields<'_> {
    fn get(&self, field: &str) -> Result<&Value, ValidationError> {
        match self.obj.get(field) {
            None | Some(Value::Null) => Err(invalid(field, "is required")),
            Some(v) => Ok(v),
        }
    }

    fn text(&self, field: &str) -> Result<String, ValidationError> {
        let s = self
            .get(field)?
            .as_str()
            .ok_or_else(|| invalid(field, "must be a string"))?;
        if s.trim().is_empty() {
            return Err(invalid(field, "must be non-empty"));
        }
        Ok(s.to_string())
    }

    fn uint(&self, field: &str) -> Result<u64, ValidationError> {
        self.get(field)?
            .as_u64()
            .ok_or_else(|| invalid(field, "must be a non-negative integer"))
    }

    fn wallet(&self, field: &str) -> Result<String, ValidationError> {
        let w = self.text(field)?;
        if !is_wallet_address(&w) {
            return Err(invalid(field, "must match ^0x[0-9a-f]{40}$"));
        }
        Ok(w)
    }

    fn currency(&self, field: &str) -> Result<String, ValidationError> {
        let c = self.text(field)?;
        if !crate::chainsim::config::is_currency_code(&c) {
            return Err(invalid(field, "must be 3 uppercase letters"));
        }
        Ok(c)
    }
}

fn is_tx_hash(s: &str) -> bool {
    s.len() == 66 && s.starts_with("0x") && s[2..].bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

/// Validates one raw export line. Fields are checked in wire order and the
/// first violated rule is reported.
pub fn validate(raw: &[u8]) -> Result<CleanRecord, ValidationError> {
    let value: Value = serde_json::from_slice(raw).map_err(|e| ValidationError::MalformedRecord(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| ValidationError::MalformedRecord("expected an object".into()))?;
    let f = Fields { obj };
    let mut warnings = Vec::new();

    let tx_hash = f.text("tx_hash")?;
    if !is_tx_hash(&tx_hash) {
        return Err(invalid("tx_hash", "must match ^0x[0-9a-f]{64}$"));
    }
    let sender_id = f.text("sender_id")?;
    let sender_name = f.text("sender_name")?;
    let sender_address = f.text("sender_address")?;
    let sender_identification_number = f.text("sender_identification_number")?;
    let sender_wallet = f.wallet("sender_wallet")?;
    let receiver_id = f.text("receiver_id")?;
    let receiver_name = f.text("receiver_name")?;
    let receiver_address = f.text("receiver_address")?;
    let receiver_identification_number = f.text("receiver_identification_number")?;
    let receiver_wallet = f.wallet("receiver_wallet")?;
    let amount_minor = match f.get("amount_minor")? {
        Value::Number(n) if n.as_u64() == Some(0) => return Err(invalid("amount_minor", "must be > 0")),
        Value::Number(n) if n.as_i64().is_some_and(|v| v < 0) => return Err(invalid("amount_minor", "must be > 0")),
        Value::Number(n) => n
            .as_u64()
            .ok_or_else(|| invalid("amount_minor", "must be an integer in minor units"))?,
        _ => return Err(invalid("amount_minor", "must be an integer in minor units")),
    };
    let currency = f.currency("currency")?;
    let destination_currency = f.currency("destination_currency")?;
    let raw_reason = f.text("reason")?;
    let (reason, canonical) = map_reason(&raw_reason);
    if !canonical {
        warnings.push(ValidationWarning {
            field: "reason".into(),
            message: format!("`{raw_reason}` mapped to `{reason}`"),
        });
    }
    let ts_text = f.text("timestamp")?;
    let timestamp =
        parse_timestamp(&ts_text).ok_or_else(|| invalid("timestamp", "must be an ISO-8601 UTC timestamp"))?;
    let fee_minor = f.uint("fee_minor")?;
    let gas_fee_minor = f.uint("gas_fee_minor")?;
    let block_height = f.uint("block_height")?;
    let label: Label = f
        .text("label")?
        .parse()
        .map_err(|_| invalid("label", "must be `legit` or `fraud:<pattern>`"))?;

    for key in obj.keys() {
        if !KNOWN_FIELDS.contains(&key.as_str()) {
            warnings.push(ValidationWarning {
                field: key.clone(),
                message: "unknown field ignored".into(),
            });
        }
    }

    Ok(CleanRecord {
        tx: TxRecord {
            tx_hash,
            sender_id,
            sender_name,
            sender_address,
            sender_identification_number,
            sender_wallet,
            receiver_id,
            receiver_name,
            receiver_address,
            receiver_identification_number,
            receiver_wallet,
            amount_minor,
            currency,
            destination_currency,
            reason,
            timestamp,
            fee_minor,
            gas_fee_minor,
            block_height,
            label,
        },
        warnings,
    })
}

const KNOWN_FIELDS: &[&str] = &[
    "tx_hash",
    "sender_id",
    "sender_name",
    "sender_address",
    "sender_identification_number",
    "sender_wallet",
    "receiver_id",
    "receiver_name",
    "receiver_address",
    "receiver_identification_number",
    "receiver_wallet",
    "amount_minor",
    "currency",
    "destination_currency",
    "reason",
    "timestamp",
    "fee_minor",
    "gas_fee_minor",
    "block_height",
    "label",
];

/// Outcome of validating a whole export.
#[derive(Debug, Default)]
pub struct LoadedDataset {
    pub header: Option<DatasetHeader>,
    pub records: Vec<CleanRecord>,
    /// (1-based line number, error) for every rejected line.
    pub rejected: Vec<(usize, ValidationError)>,
}

/// Validates every line of an export. The first line is taken as the header
/// when it carries `schema_version`.
pub fn load_dataset<R: BufRead>(source: R) -> std::io::Result<LoadedDataset> {
    let mut out = LoadedDataset::default();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 {
            if let Ok(header) = serde_json::from_str::<DatasetHeader>(&line) {
                out.header = Some(header);
                continue;
            }
        }
        match validate(line.as_bytes()) {
            Ok(rec) => out.records.push(rec),
            Err(e) => out.rejected.push((i + 1, e)),
        }
    }
    Ok(out)
}
