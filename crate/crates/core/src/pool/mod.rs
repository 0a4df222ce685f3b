//! Synthetic crawl pools and the labeled/unlabeled partition.
//!
//! Samples live directly in feature space. A pool mixes in-distribution
//! samples with three kinds of out-of-distribution data: uniform noise,
//! variance-inflated (covariate shifted) samples of a queried class, and
//! samples of an unrelated class returned for the query (semantic shift).

mod generate;
mod io;

pub use generate::{generate_det_samples, generate_pool, ClassSpec, KindCounts, PoolSpec, ProposalLaw};
pub use io::{load_pool, save_pool, PoolIoError};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::active::Annotator;
use crate::dedup::DHash64;
use crate::taxonomy::ConceptId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SampleId(pub u64);

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Kind {
    InDistribution,
    Noisy,
    CovariateShift,
    SemanticShift,
}

impl Kind {
    pub const ALL: [Kind; 4] = [Kind::InDistribution, Kind::Noisy, Kind::CovariateShift, Kind::SemanticShift];

    pub(crate) fn stream(self) -> u64 {
        self as u64
    }
}

/// Detector output for one box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub category: ConceptId,
    pub score: f64,
    /// `(x, y, w, h)`; `w` and `h` are positive.
    pub bbox: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: SampleId,
    pub features: Vec<f64>,
    pub query: ConceptId,
    pub truth: Option<ConceptId>,
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposals: Option<Vec<Proposal>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hash: Option<DHash64>,
}

impl Sample {
    /// Checks the kind/truth consistency rules.
    pub fn check(&self) -> Result<(), String> {
        match (self.kind, &self.truth) {
            (Kind::Noisy, Some(_)) => Err(format!("sample {}: noisy sample carries a truth", self.id)),
            (Kind::InDistribution, t) if t.as_ref() != Some(&self.query) => {
                Err(format!("sample {}: in-distribution truth differs from query", self.id))
            }
            (Kind::SemanticShift, t) if t.is_none() || t.as_ref() == Some(&self.query) => {
                Err(format!("sample {}: semantic-shift truth must differ from query", self.id))
            }
            (Kind::CovariateShift, None) => Err(format!("sample {}: covariate-shift sample lacks truth", self.id)),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PoolError {
    #[error("invalid pool spec: {0}")]
    Spec(String),
    #[error("sample {0} is already in the pool")]
    Duplicate(SampleId),
    #[error("sample {0} is not unlabeled")]
    NotUnlabeled(SampleId),
}

/// The labeled and unlabeled partitions at some round.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PoolState {
    pub dim: usize,
    pub seed: u64,
    pub round: u32,
    labeled: BTreeMap<SampleId, (Sample, ConceptId)>,
    unlabeled: BTreeMap<SampleId, Sample>,
}

impl PoolState {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self { dim, seed, ..Self::default() }
    }

    /// A fresh pool holding every sample as unlabeled.
    pub fn from_samples(dim: usize, seed: u64, samples: impl IntoIterator<Item = Sample>) -> Result<Self, PoolError> {
        let mut pool = Self::new(dim, seed);
        for s in samples {
            pool.insert_unlabeled(s)?;
        }
        Ok(pool)
    }

    pub fn insert_unlabeled(&mut self, s: Sample) -> Result<(), PoolError> {
        if self.contains(s.id) {
            return Err(PoolError::Duplicate(s.id));
        }
        self.unlabeled.insert(s.id, s);
        Ok(())
    }

    pub fn insert_labeled(&mut self, s: Sample, label: ConceptId) -> Result<(), PoolError> {
        if self.contains(s.id) {
            return Err(PoolError::Duplicate(s.id));
        }
        self.labeled.insert(s.id, (s, label));
        Ok(())
    }

    pub fn contains(&self, id: SampleId) -> bool {
        self.labeled.contains_key(&id) || self.unlabeled.contains_key(&id)
    }

    pub fn labeled(&self) -> &BTreeMap<SampleId, (Sample, ConceptId)> {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &BTreeMap<SampleId, Sample> {
        &self.unlabeled
    }

    pub fn labeled_len(&self) -> usize {
        self.labeled.len()
    }

    pub fn unlabeled_len(&self) -> usize {
        self.unlabeled.len()
    }

    /// Remove from the unlabeled partition without labeling.
    pub fn discard(&mut self, id: SampleId) -> Result<Sample, PoolError> {
        self.unlabeled.remove(&id).ok_or(PoolError::NotUnlabeled(id))
    }

    /// Move an unlabeled sample to the labeled partition.
    pub fn promote(&mut self, id: SampleId, label: ConceptId) -> Result<(), PoolError> {
        let s = self.discard(id)?;
        self.labeled.insert(id, (s, label));
        Ok(())
    }

    pub fn is_disjoint(&self) -> bool {
        self.labeled.keys().all(|k| !self.unlabeled.contains_key(k))
    }

    pub fn labeled_count(&self, class: &ConceptId) -> usize {
        self.labeled.values().filter(|(_, l)| l == class).count()
    }

    /// Every query concept present in the pool, plus every label, sorted.
    pub fn classes(&self) -> Vec<ConceptId> {
        let mut set: std::collections::BTreeSet<ConceptId> =
            self.unlabeled.values().map(|s| s.query.clone()).collect();
        set.extend(self.labeled.values().map(|(_, l)| l.clone()));
        set.into_iter().collect()
    }
}

/// Annotate unlabeled samples in ascending id order until every class has
/// `quota` labels. Rejected samples stay unlabeled; running out of
/// candidates is not an error. Returns the number of samples promoted.
pub fn cold_start(pool: &mut PoolState, annotator: &Annotator, quota: usize) -> usize {
    debug_assert_eq!(pool.round, 0);
    let mut moved = 0;
    for class in pool.classes() {
        let mut have = pool.labeled_count(&class);
        if have >= quota {
            continue;
        }
        let candidates: Vec<SampleId> = pool
            .unlabeled
            .values()
            .filter(|s| s.query == class)
            .map(|s| s.id)
            .collect();
        for id in candidates {
            if have >= quota {
                break;
            }
            if annotator.accepts(&pool.unlabeled[&id], 0) {
                pool.promote(id, class.clone()).expect("candidate is unlabeled");
                have += 1;
                moved += 1;
            }
        }
    }
    debug_assert!(pool.is_disjoint());
    moved
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: u64, query: &str, kind: Kind) -> Sample {
        let truth = match kind {
            Kind::Noisy => None,
            Kind::SemanticShift => Some(ConceptId::from("elsewhere")),
            _ => Some(ConceptId::from(query)),
        };
        Sample { id: SampleId(id), features: vec![id as f64], query: query.into(), truth, kind, proposals: None, hash: None }
    }

    fn noiseless() -> Annotator {
        Annotator { error_rate: 0.0, votes: 5, threshold: 3, seed: 0 }
    }

    #[test]
    fn sample_invariants() {
        for k in Kind::ALL {
            assert!(sample(1, "cat", k).check().is_ok());
        }
        let mut s = sample(1, "cat", Kind::InDistribution);
        s.truth = Some("dog".into());
        assert!(s.check().is_err());
        s.kind = Kind::Noisy;
        assert!(s.check().is_err());
        s.kind = Kind::SemanticShift;
        s.truth = Some("cat".into());
        assert!(s.check().is_err());
    }

    #[test]
    fn cold_start_respects_existing_labels() {
        let mut pool = PoolState::new(1, 0);
        for i in 0..60 {
            pool.insert_labeled(sample(i, "cat", Kind::InDistribution), "cat".into()).unwrap();
        }
        for i in 100..180 {
            pool.insert_unlabeled(sample(i, "cat", Kind::InDistribution)).unwrap();
        }
        assert_eq!(cold_start(&mut pool, &noiseless(), 50), 0);
        assert_eq!(pool.labeled_count(&"cat".into()), 60);
    }

    #[test]
    fn cold_start_fills_quota_in_id_order() {
        let mut pool = PoolState::new(1, 0);
        for i in (0..80).rev() {
            pool.insert_unlabeled(sample(i, "dog", Kind::InDistribution)).unwrap();
        }
        for i in 80..90 {
            pool.insert_unlabeled(sample(i, "dog", Kind::Noisy)).unwrap();
        }
        assert_eq!(cold_start(&mut pool, &noiseless(), 50), 50);
        let ids: Vec<u64> = pool.labeled().keys().map(|k| k.0).collect();
        assert_eq!(ids, (0..50).collect::<Vec<_>>());
        assert_eq!(pool.unlabeled_len(), 40);
        assert!(pool.is_disjoint());
    }

    #[test]
    fn cold_start_exhaustion_is_not_an_error() {
        let mut pool = PoolState::new(1, 0);
        for i in 0..20 {
            let kind = if i % 3 == 0 { Kind::InDistribution } else { Kind::CovariateShift };
            pool.insert_unlabeled(sample(i, "owl", kind)).unwrap();
        }
        assert_eq!(cold_start(&mut pool, &noiseless(), 50), 7);
        assert_eq!(pool.unlabeled_len(), 13);
    }

    #[test]
    fn partition_moves() {
        let mut pool = PoolState::from_samples(1, 0, [sample(1, "a", Kind::InDistribution)]).unwrap();
        assert_eq!(pool.insert_unlabeled(sample(1, "a", Kind::InDistribution)), Err(PoolError::Duplicate(SampleId(1))));
        pool.promote(SampleId(1), "a".into()).unwrap();
        assert_eq!(pool.promote(SampleId(1), "a".into()), Err(PoolError::NotUnlabeled(SampleId(1))));
        assert!(pool.is_disjoint());
    }
}
