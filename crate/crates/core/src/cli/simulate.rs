use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::active::{run_loop, RoundReport, Strategy};
use crate::pool::{cold_start, generate_pool, PoolState};
use crate::taxonomy::LabelSystem;

/// One strategy / rectification / repeat combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub strategy: Strategy,
    pub rectify: bool,
    pub repeat: usize,
    pub seed: u64,
    pub cold_start_labeled: usize,
    pub initial_accuracy: f64,
    pub total_valid: usize,
    pub final_accuracy: f64,
    pub rounds: Vec<RoundReport>,
}

/// Aggregate over repeats for one strategy and rectification setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub strategy: Strategy,
    pub rectify: bool,
    pub mean_valid: f64,
    pub mean_final_accuracy: f64,
    pub valid: Vec<usize>,
    pub final_accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub rounds: usize,
    pub batch: usize,
    pub repeat: usize,
    pub cells: Vec<Cell>,
}

impl Comparison {
    pub fn cell(&self, strategy: Strategy, rectify: bool) -> Option<&Cell> {
        self.cells.iter().find(|c| c.strategy == strategy && c.rectify == rectify)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
    }

    /// Aligned plain-text table, one row per cell.
    pub fn table(&self) -> String {
        let mut rows = vec![["strategy".to_string(), "rectify".into(), "mean_valid".into(), "mean_accuracy".into()]];
        for c in &self.cells {
            rows.push([
                c.strategy.to_string(),
                if c.rectify { "on" } else { "off" }.into(),
                format!("{:.1}", c.mean_valid),
                format!("{:.4}", c.mean_final_accuracy),
            ]);
        }
        let widths: Vec<usize> = (0..4).map(|i| rows.iter().map(|r| r[i].len()).max().unwrap_or(0)).collect();
        let mut out = format!("{} (T={}, B={}, repeats={})\n", self.name, self.rounds, self.batch, self.repeat);
        for r in rows {
            let _ = writeln!(
                out,
                "{:<w0$}  {:<w1$}  {:>w2$}  {:>w3$}",
                r[0], r[1], r[2], r[3],
                w0 = widths[0], w1 = widths[1], w2 = widths[2], w3 = widths[3]
            );
        }
        out
    }
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len() as f64;
    xs.sum::<f64>() / n
}

/// Runs one combination from scratch: generate the pool, cold start, loop.
pub fn run_one(cfg: &RunConfig, sys: &LabelSystem, strategy: Strategy, rectify: bool, repeat: usize) -> Result<RunSummary> {
    let seed = cfg.repeat_seed(repeat);
    let al = cfg.al_config(strategy, rectify, seed);
    let samples = generate_pool(&cfg.pool_spec(seed))?;
    let mut pool = PoolState::from_samples(cfg.pool.dim, seed, samples)?;
    let cold = cold_start(&mut pool, &al.annotator(), cfg.cold_start_quota);
    let eval = cfg.eval_set();
    let out = run_loop(&al, sys, &mut pool, &eval)?;
    let final_accuracy = out.reports.last().map_or(out.initial_accuracy, |r| r.accuracy);
    Ok(RunSummary {
        name: format!("{}-{}-{}", strategy, if rectify { "rectified" } else { "plain" }, repeat),
        strategy,
        rectify,
        repeat,
        seed,
        cold_start_labeled: cold,
        initial_accuracy: out.initial_accuracy,
        total_valid: out.reports.iter().map(|r| r.valid).sum(),
        final_accuracy,
        rounds: out.reports,
    })
}

/// Every strategy x {rectify on, off} x repeat, aggregated. Runs execute in
/// parallel; results are ordered by (strategy, rectify on first, repeat).
pub fn compare(cfg: &RunConfig, sys: &LabelSystem) -> Result<(Comparison, Vec<RunSummary>)> {
    let jobs: Vec<(Strategy, bool, usize)> = cfg
        .strategies
        .iter()
        .flat_map(|&s| [true, false].into_iter().flat_map(move |r| (0..cfg.repeat).map(move |i| (s, r, i))))
        .collect();
    let runs: Vec<RunSummary> =
        jobs.par_iter().map(|&(s, r, i)| run_one(cfg, sys, s, r, i)).collect::<Result<_>>()?;
    let cells = runs
        .chunks(cfg.repeat)
        .map(|chunk| Cell {
            strategy: chunk[0].strategy,
            rectify: chunk[0].rectify,
            mean_valid: mean(chunk.iter().map(|r| r.total_valid as f64)),
            mean_final_accuracy: mean(chunk.iter().map(|r| r.final_accuracy)),
            valid: chunk.iter().map(|r| r.total_valid).collect(),
            final_accuracy: chunk.iter().map(|r| r.final_accuracy).collect(),
        })
        .collect();
    let comparison = Comparison {
        name: cfg.name.clone(),
        rounds: cfg.al.rounds,
        batch: cfg.al.batch,
        repeat: cfg.repeat,
        cells,
    };
    Ok((comparison, runs))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Layout under `out`:
///
/// ```text
/// comparison.json
/// runs/<run>/round_<r>.json
/// runs/<run>/rounds.csv
/// runs/<run>/summary.json
/// ```
pub fn write_outputs(out: &Path, comparison: &Comparison, runs: &[RunSummary]) -> Result<()> {
    for run in runs {
        let dir = out.join("runs").join(&run.name);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut csv = String::from("round,rectified,sampled,valid,labeled_total,accuracy,ms\n");
        for r in &run.rounds {
            write_json(&dir.join(format!("round_{}.json", r.round)), r)?;
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                r.round, r.rectified, r.sampled, r.valid, r.labeled_total, r.accuracy, r.elapsed_ms
            );
        }
        fs::write(dir.join("rounds.csv"), csv)?;
        write_json(&dir.join("summary.json"), run)?;
    }
    write_json(&out.join("comparison.json"), comparison)
}

pub fn load_taxonomy(path: &Path) -> Result<LabelSystem> {
    let f = fs::File::open(path).with_context(|| format!("opening taxonomy {}", path.display()))?;
    Ok(LabelSystem::load(BufReader::new(f))?)
}

/// Load the taxonomy named by `cfg`, run the comparison and write it.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<Comparison> {
    let sys = load_taxonomy(&cfg.taxonomy)?;
    let (comparison, runs) = compare(cfg, &sys)?;
    write_outputs(out, &comparison, &runs)?;
    Ok(comparison)
}
