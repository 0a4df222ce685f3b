use std::time::Instant;

use super::sampling::{sample_cluster_margin, sample_coreset, sample_random, sample_uncertainty, Uncertainty};
use super::{annotate, rectify_cls, rectify_det, ALConfig, ActiveError, RoundReport, Strategy};
use crate::learner::{train, LearnerState};
use crate::pool::{PoolState, Sample};
use crate::rng;
use crate::taxonomy::{ConceptId, LabelSystem};

const ROUND: u64 = 0x726f_756e;

/// A held-out sample with its ground-truth class.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalItem {
    pub features: Vec<f64>,
    pub truth: ConceptId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub reports: Vec<RoundReport>,
    /// Accuracy of the cold-start model.
    pub initial_accuracy: f64,
    pub final_state: LearnerState,
}

fn fit(pool: &PoolState, temperature: f64) -> Result<LearnerState, ActiveError> {
    Ok(train(pool.labeled().values().map(|(s, l)| (s, l)), temperature)?)
}

fn accuracy(state: &LearnerState, eval: &[EvalItem]) -> Result<f64, ActiveError> {
    Ok(state.evaluate(eval.iter().map(|e| (e.features.as_slice(), &e.truth)))?)
}

/// Samples carrying detector proposals go through the detection rule, the
/// rest through the classification rule. Output keeps ascending id order.
fn rectify<'a>(
    cfg: &ALConfig,
    state: &LearnerState,
    sys: &LabelSystem,
    unlabeled: &[&'a Sample],
) -> Result<Vec<&'a Sample>, ActiveError> {
    let (det, cls): (Vec<&Sample>, Vec<&Sample>) = unlabeled.iter().partition(|s| s.proposals.is_some());
    let mut kept = rectify_cls(state, &cls, sys, cfg.top_k, cfg.related_levels)?;
    kept.extend(rectify_det(&det, cfg.det_min_proposals, cfg.det_max_identical)?);
    kept.sort_by_key(|s| s.id);
    Ok(kept)
}

fn select<'a>(
    cfg: &ALConfig,
    state: &LearnerState,
    pool: &PoolState,
    candidates: &[&'a Sample],
    round_seed: u64,
) -> Result<Vec<&'a Sample>, ActiveError> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let b = cfg.batch;
    match cfg.strategy {
        Strategy::Random => Ok(sample_random(candidates, b, round_seed)),
        Strategy::Entropy => sample_uncertainty(state, candidates, b, Uncertainty::Entropy),
        Strategy::Margin => sample_uncertainty(state, candidates, b, Uncertainty::Margin),
        Strategy::CoreSet => {
            let centers: Vec<&[f64]> = pool.labeled().values().map(|(s, _)| s.features.as_slice()).collect();
            Ok(sample_coreset(&centers, candidates, b))
        }
        Strategy::ClusterMargin => {
            sample_cluster_margin(state, candidates, b, cfg.cluster_count, cfg.margin_multiplier)
        }
    }
}

/// Runs `cfg.rounds` rounds on a cold-started pool. Every sampled item
/// leaves the unlabeled partition; accepted ones join the labeled one.
pub fn run_loop(
    cfg: &ALConfig,
    sys: &LabelSystem,
    pool: &mut PoolState,
    eval: &[EvalItem],
) -> Result<RunOutcome, ActiveError> {
    cfg.validate()?;
    if pool.labeled_len() == 0 {
        return Err(ActiveError::NotColdStarted);
    }
    let annotator = cfg.annotator();
    let mut state = fit(pool, cfg.temperature)?;
    let initial_accuracy = accuracy(&state, eval)?;
    let mut reports = Vec::with_capacity(cfg.rounds);

    for r in 1..=cfg.rounds {
        let started = Instant::now();
        let round_seed = rng::derive(cfg.seed, &[ROUND, r as u64]);
        let batch: Vec<Sample> = {
            let unlabeled: Vec<&Sample> = pool.unlabeled().values().collect();
            let candidates = if cfg.rectify { rectify(cfg, &state, sys, &unlabeled)? } else { unlabeled };
            let rectified = candidates.len();
            let picked = select(cfg, &state, pool, &candidates, round_seed)?;
            reports.push(RoundReport {
                round: r,
                rectified,
                sampled: picked.len(),
                valid: 0,
                labeled_total: 0,
                accuracy: 0.0,
                elapsed_ms: 0,
            });
            picked.into_iter().cloned().collect()
        };
        let ann = annotate(&batch, &annotator, r);
        for s in &batch {
            pool.discard(s.id)?;
        }
        let valid = ann.accepted.len();
        for (s, label) in ann.accepted {
            pool.insert_labeled(s, label)?;
        }
        pool.round = r as u32;
        debug_assert!(pool.is_disjoint());
        state = fit(pool, cfg.temperature)?;
        let report = reports.last_mut().expect("pushed above");
        report.valid = valid;
        report.labeled_total = pool.labeled_len();
        report.accuracy = accuracy(&state, eval)?;
        report.elapsed_ms = started.elapsed().as_millis() as u64;
    }
    Ok(RunOutcome { reports, initial_accuracy, final_state: state })
}
