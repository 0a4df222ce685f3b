//! Nearest-class-mean classifier with a softmax over negative distances.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pool::Sample;
use crate::taxonomy::ConceptId;

pub const DEFAULT_TEMPERATURE: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum LearnerError {
    #[error("no labeled samples to train on")]
    EmptyTrainingSet,
    #[error("feature dimension {got} does not match model dimension {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("at least two classes are required")]
    SingleClass,
    #[error("evaluation set is empty")]
    EmptyEvalSet,
    #[error("temperature must be positive, got {0}")]
    Temperature(f64),
    #[error("k must be at least 1")]
    ZeroK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerState {
    /// Sorted ascending.
    pub classes: Vec<ConceptId>,
    pub prototypes: Vec<Vec<f64>>,
    pub temperature: f64,
}

/// Ranked `(class, probability)` pairs, most probable first.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub ranked: Vec<(ConceptId, f64)>,
}

impl Prediction {
    pub fn top(&self) -> &ConceptId {
        &self.ranked[0].0
    }
}

pub fn train<'a, I>(labeled: I, temperature: f64) -> Result<LearnerState, LearnerError>
where
    I: IntoIterator<Item = (&'a Sample, &'a ConceptId)>,
{
    if !(temperature > 0.0) {
        return Err(LearnerError::Temperature(temperature));
    }
    let mut sums: BTreeMap<&ConceptId, (Vec<f64>, usize)> = BTreeMap::new();
    let mut dim = None;
    for (s, label) in labeled {
        let d = *dim.get_or_insert(s.features.len());
        if s.features.len() != d {
            return Err(LearnerError::DimMismatch { expected: d, got: s.features.len() });
        }
        let (sum, n) = sums.entry(label).or_insert_with(|| (vec![0.0; d], 0));
        for (acc, x) in sum.iter_mut().zip(&s.features) {
            *acc += x;
        }
        *n += 1;
    }
    if sums.is_empty() {
        return Err(LearnerError::EmptyTrainingSet);
    }
    let (classes, prototypes) = sums
        .into_iter()
        .map(|(c, (sum, n))| (c.clone(), sum.into_iter().map(|v| v / n as f64).collect()))
        .unzip();
    Ok(LearnerState { classes, prototypes, temperature })
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl LearnerState {
    pub fn dim(&self) -> usize {
        self.prototypes[0].len()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Class probabilities in class order.
    pub fn probabilities(&self, features: &[f64]) -> Result<Vec<f64>, LearnerError> {
        if features.len() != self.dim() {
            return Err(LearnerError::DimMismatch { expected: self.dim(), got: features.len() });
        }
        let d: Vec<f64> = self.prototypes.iter().map(|p| distance(features, p)).collect();
        Ok(softmax_neg_distances(&d, self.temperature))
    }

    /// Top `k` classes. Equal probabilities rank the smaller class id first.
    pub fn predict(&self, features: &[f64], k: usize) -> Result<Prediction, LearnerError> {
        if k == 0 {
            return Err(LearnerError::ZeroK);
        }
        let probs = self.probabilities(features)?;
        let mut order: Vec<usize> = (0..probs.len()).collect();
        // classes are sorted, so index order is id order
        order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
        order.truncate(k);
        Ok(Prediction {
            ranked: order.into_iter().map(|i| (self.classes[i].clone(), probs[i])).collect(),
        })
    }

    /// Gap between the two largest probabilities.
    pub fn margin(&self, features: &[f64]) -> Result<f64, LearnerError> {
        if self.num_classes() < 2 {
            return Err(LearnerError::SingleClass);
        }
        Ok(margin_of(&self.probabilities(features)?))
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self, features: &[f64]) -> Result<f64, LearnerError> {
        Ok(entropy_of(&self.probabilities(features)?))
    }

    /// Fraction of `(features, truth)` pairs whose top-1 class is the truth.
    pub fn evaluate<'a, I>(&self, eval: I) -> Result<f64, LearnerError>
    where
        I: IntoIterator<Item = (&'a [f64], &'a ConceptId)>,
    {
        let (mut hits, mut n) = (0usize, 0usize);
        for (x, truth) in eval {
            n += 1;
            if self.predict(x, 1)?.top() == truth {
                hits += 1;
            }
        }
        if n == 0 {
            return Err(LearnerError::EmptyEvalSet);
        }
        Ok(hits as f64 / n as f64)
    }
}

/// `softmax(-d / temperature)`.
pub fn softmax_neg_distances(distances: &[f64], temperature: f64) -> Vec<f64> {
    let dmin = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let exps: Vec<f64> = distances.iter().map(|d| (-(d - dmin) / temperature).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub fn margin_of(probs: &[f64]) -> f64 {
    let (mut p1, mut p2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &p in probs {
        if p > p1 {
            p2 = p1;
            p1 = p;
        } else if p > p2 {
            p2 = p;
        }
    }
    p1 - p2
}

pub fn entropy_of(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}
