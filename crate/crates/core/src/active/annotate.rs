use crate::pool::{Kind, Sample};
use crate::rng;
use crate::taxonomy::ConceptId;

const VOTE: u64 = 0x766f_7465;

/// Simulated annotator panel. Each member reports the sample's true
/// validity, flipped with probability `error_rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotator {
    pub error_rate: f64,
    pub votes: usize,
    pub threshold: usize,
    pub seed: u64,
}

impl Annotator {
    /// Only in-distribution samples are described by their query.
    pub fn truly_valid(sample: &Sample) -> bool {
        sample.kind == Kind::InDistribution
    }

    /// Votes keyed by `(round, sample id, annotator index)`.
    pub fn votes(&self, sample: &Sample, round: usize) -> Vec<bool> {
        let valid = Self::truly_valid(sample);
        (0..self.votes)
            .map(|i| {
                let flip = rng::uniform(self.seed, &[VOTE, round as u64, sample.id.0, i as u64]) < self.error_rate;
                valid ^ flip
            })
            .collect()
    }

    pub fn accepts(&self, sample: &Sample, round: usize) -> bool {
        consensus(&self.votes(sample, round), self.threshold)
    }
}

/// At least `threshold` positive votes.
pub fn consensus(votes: &[bool], threshold: usize) -> bool {
    votes.iter().filter(|&&v| v).count() >= threshold
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    /// Accepted samples with their label (the query concept).
    pub accepted: Vec<(Sample, ConceptId)>,
    pub rejected: usize,
}

pub fn annotate(batch: &[Sample], annotator: &Annotator, round: usize) -> Annotation {
    let mut accepted = Vec::new();
    let mut rejected = 0;
    for s in batch {
        if annotator.accepts(s, round) {
            accepted.push((s.clone(), s.query.clone()));
        } else {
            rejected += 1;
        }
    }
    Annotation { accepted, rejected }
}
