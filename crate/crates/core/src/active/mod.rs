//! Active annotation loop with out-of-distribution rectification.
//!
//! Each round: filter the unlabeled pool with the previous model (drop
//! samples whose predictions are unrelated to their query, or whose
//! detector proposals look like noise or crowds), pick a batch with a
//! sampling strategy, have simulated annotators vote on validity, move the
//! batch out of the unlabeled pool, keep the accepted samples, retrain.

mod annotate;
mod cluster;
mod rectify;
mod run;
mod sampling;

pub use annotate::{annotate, consensus, Annotation, Annotator};
pub use cluster::average_linkage;
pub use rectify::{rectify_cls, rectify_det};
pub use run::{run_loop, EvalItem, RunOutcome};
pub use sampling::{
    covering_radius, sample_cluster_margin, sample_coreset, sample_random, sample_uncertainty,
    Uncertainty,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learner::LearnerError;
use crate::pool::{PoolError, SampleId};
use crate::taxonomy::TaxonomyError;

#[derive(Debug, Error, PartialEq)]
pub enum ActiveError {
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error("sample {0} has no proposals")]
    MissingProposals(SampleId),
    #[error("invalid loop config: {0}")]
    Config(String),
    #[error("labeled pool is empty; run cold start first")]
    NotColdStarted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Random,
    Entropy,
    Margin,
    #[serde(rename = "coreset")]
    CoreSet,
    ClusterMargin,
}

impl Strategy {
    pub const ALL: [Strategy; 5] =
        [Strategy::Random, Strategy::Entropy, Strategy::Margin, Strategy::CoreSet, Strategy::ClusterMargin];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Entropy => "entropy",
            Strategy::Margin => "margin",
            Strategy::CoreSet => "coreset",
            Strategy::ClusterMargin => "cluster_margin",
        }
    }

    /// Strategies that rank by model uncertainty.
    pub fn is_uncertainty(self) -> bool {
        matches!(self, Strategy::Entropy | Strategy::Margin | Strategy::ClusterMargin)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown strategy `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ALConfig {
    pub rounds: usize,
    pub batch: usize,
    pub strategy: Strategy,
    pub rectify: bool,
    pub top_k: usize,
    pub related_levels: usize,
    pub det_min_proposals: usize,
    pub det_max_identical: usize,
    pub votes: usize,
    pub vote_threshold: usize,
    pub annotator_error: f64,
    pub cluster_count: usize,
    pub margin_multiplier: f64,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for ALConfig {
    fn default() -> Self {
        Self {
            rounds: 5,
            batch: 200,
            strategy: Strategy::ClusterMargin,
            rectify: true,
            top_k: 5,
            related_levels: 1,
            det_min_proposals: 2,
            det_max_identical: 15,
            votes: 5,
            vote_threshold: 3,
            annotator_error: 0.0,
            cluster_count: 10,
            margin_multiplier: 2.0,
            temperature: crate::learner::DEFAULT_TEMPERATURE,
            seed: 0,
        }
    }
}

impl ALConfig {
    pub fn validate(&self) -> Result<(), ActiveError> {
        let bad = |m: &str| Err(ActiveError::Config(m.to_string()));
        if self.rounds == 0 {
            return bad("rounds must be at least 1");
        }
        if self.batch == 0 {
            return bad("batch must be at least 1");
        }
        if self.top_k == 0 {
            return bad("top_k must be at least 1");
        }
        if self.votes == 0 || self.vote_threshold > self.votes {
            return bad("vote_threshold must not exceed votes");
        }
        if !(0.0..1.0).contains(&self.annotator_error) {
            return bad("annotator_error must lie in [0, 1)");
        }
        if self.cluster_count == 0 {
            return bad("cluster_count must be at least 1");
        }
        if !(self.margin_multiplier >= 1.0) {
            return bad("margin_multiplier must be at least 1");
        }
        if !(self.temperature > 0.0) {
            return bad("temperature must be positive");
        }
        Ok(())
    }

    pub fn annotator(&self) -> Annotator {
        Annotator {
            error_rate: self.annotator_error,
            votes: self.votes,
            threshold: self.vote_threshold,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub rectified: usize,
    pub sampled: usize,
    pub valid: usize,
    pub labeled_total: usize,
    pub accuracy: f64,
    pub elapsed_ms: u64,
}
