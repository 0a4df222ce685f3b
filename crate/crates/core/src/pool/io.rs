//! JSON-lines pool files.
//!
//! ```text
//! {"dim":16,"seed":7,"round":0}
//! {"id":0,"features":[...],"query":"cat","truth":"cat","kind":"InDistribution","label":"cat"}
//! {"id":1,"features":[...],"query":"cat","truth":null,"kind":"Noisy"}
//! ```
//!
//! The first line is the header; `label` is present only on labeled samples.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Kind, PoolState, Proposal, Sample, SampleId};
use crate::dedup::DHash64;
use crate::taxonomy::ConceptId;

#[derive(Debug, Error)]
pub enum PoolIoError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    dim: usize,
    seed: u64,
    #[serde(default)]
    round: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: SampleId,
    features: Vec<f64>,
    query: ConceptId,
    truth: Option<ConceptId>,
    kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    proposals: Option<Vec<Proposal>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hash: Option<DHash64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<ConceptId>,
}

impl Record {
    fn new(s: &Sample, label: Option<&ConceptId>) -> Self {
        Record {
            id: s.id,
            features: s.features.clone(),
            query: s.query.clone(),
            truth: s.truth.clone(),
            kind: s.kind,
            proposals: s.proposals.clone(),
            hash: s.hash,
            label: label.cloned(),
        }
    }

    fn split(self) -> (Sample, Option<ConceptId>) {
        (
            Sample {
                id: self.id,
                features: self.features,
                query: self.query,
                truth: self.truth,
                kind: self.kind,
                proposals: self.proposals,
                hash: self.hash,
            },
            self.label,
        )
    }
}

/// Labeled samples first, then unlabeled, each in id order.
pub fn save_pool<W: Write>(pool: &PoolState, mut w: W) -> Result<(), PoolIoError> {
    let header = Header { dim: pool.dim, seed: pool.seed, round: pool.round };
    writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes"))?;
    let records = pool
        .labeled()
        .values()
        .map(|(s, l)| Record::new(s, Some(l)))
        .chain(pool.unlabeled().values().map(|s| Record::new(s, None)));
    for r in records {
        writeln!(w, "{}", serde_json::to_string(&r).expect("record serializes"))?;
    }
    Ok(())
}

pub fn load_pool<R: BufRead>(reader: R) -> Result<PoolState, PoolIoError> {
    let mut pool = PoolState::default();
    let mut seen_header = false;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let err = |message: String| PoolIoError::Parse { line: i + 1, message };
        if line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            let h: Header = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
            pool = PoolState::new(h.dim, h.seed);
            pool.round = h.round;
            seen_header = true;
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        let (sample, label) = rec.split();
        sample.check().map_err(err)?;
        if sample.features.len() != pool.dim {
            return Err(err(format!("sample {} has dim {}, header says {}", sample.id, sample.features.len(), pool.dim)));
        }
        let inserted = match label {
            Some(l) => pool.insert_labeled(sample, l),
            None => pool.insert_unlabeled(sample),
        };
        inserted.map_err(|e| err(e.to_string()))?;
    }
    Ok(pool)
}
