use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::query::{run_query, Query};
use super::{AnalyticsError, ScoreLookup};
use crate::digest::sha256_hex;
use crate::record::{iso_seconds, TxRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Transaction,
    Customer,
    Alert,
    Model,
    Rule,
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntityKind::Transaction => "transaction",
            EntityKind::Customer => "customer",
            EntityKind::Alert => "alert",
            EntityKind::Model => "model",
            EntityKind::Rule => "rule",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub kind: EntityKind,
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataAnnotation {
    pub target: Target,
    pub key: String,
    pub value: String,
    pub author: String,
    #[serde(with = "iso_seconds")]
    pub created_at: DateTime<Utc>,
}

/// Builds an annotation after checking that its target exists.
pub fn annotate(
    exists: impl Fn(&Target) -> bool,
    target: Target,
    key: &str,
    value: &str,
    author: &str,
    created_at: DateTime<Utc>,
) -> Result<MetadataAnnotation, AnalyticsError> {
    if !exists(&target) {
        return Err(AnalyticsError::TargetNotFound {
            kind: target.kind.to_string(),
            id: target.id,
        });
    }
    Ok(MetadataAnnotation {
        target,
        key: key.to_string(),
        value: value.to_string(),
        author: author.to_string(),
        created_at,
    })
}

/// A named, frozen query result. Fields are private so the contents cannot change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkingSet {
    name: String,
    query: Query,
    #[serde(with = "iso_seconds")]
    created_at: DateTime<Utc>,
    records: Vec<TxRecord>,
    content_hash: String,
}

fn content_hash(records: &[TxRecord]) -> String {
    sha256_hex(serde_json::to_vec(records).expect("records serialize"))
}

impl WorkingSet {
    pub fn create(
        name: &str,
        query: Query,
        records: &[TxRecord],
        scores: &dyn ScoreLookup,
        created_at: DateTime<Utc>,
    ) -> Result<Self, AnalyticsError> {
        let page = run_query(records, scores, &query)?;
        Ok(Self {
            name: name.to_string(),
            query,
            created_at,
            content_hash: content_hash(&page.records),
            records: page.records,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn query(&self) -> &Query {
        &self.query
    }

    pub fn created_at(&self) -> DateTime<Utc> {
        self.created_at
    }

    pub fn records(&self) -> &[TxRecord] {
        &self.records
    }

    pub fn content_hash(&self) -> &str {
        &self.content_hash
    }

    /// True when the contents still hash to the value recorded at creation.
    pub fn verify(&self) -> bool {
        content_hash(&self.records) == self.content_hash
    }
}
