//! Command implementations behind the `curate` binary. Each returns an
//! error instead of exiting so the commands can be driven from tests.

pub mod config;
pub mod simulate;

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::dedup::{dhash, overlap_filter, read_hash_list, read_pnm, DHash64, OverlapResult};
use crate::pool::SampleId;
use crate::taxonomy::{integrate, EmbeddingTable, ExternalConcept, IntegrationReport, TaxonomyError, DEFAULT_MIN_SIM};

pub use config::{ConfigError, RunConfig};
pub use simulate::{cmd_simulate, load_taxonomy, Cell, Comparison, RunSummary};

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

/// External concepts, one JSON object per line.
pub fn read_external(path: &Path) -> Result<Vec<ExternalConcept>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ext = serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        out.push(ext);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct TaxonomyBuild {
    pub base: PathBuf,
    pub external: PathBuf,
    pub embeddings: Option<PathBuf>,
    pub min_sim: f64,
    pub out: PathBuf,
}

impl TaxonomyBuild {
    pub fn new(base: PathBuf, external: PathBuf, out: PathBuf) -> Self {
        Self { base, external, embeddings: None, min_sim: DEFAULT_MIN_SIM, out }
    }
}

/// Writes `taxonomy.txt` and `report.json` under `out`. Per-concept link
/// errors are written to the report and then surfaced as an error.
pub fn cmd_taxonomy(args: &TaxonomyBuild) -> Result<IntegrationReport> {
    let mut sys = load_taxonomy(&args.base)?;
    let batch = read_external(&args.external)?;
    let table = match &args.embeddings {
        Some(p) => EmbeddingTable::load(open(p)?)?,
        None => EmbeddingTable::empty(),
    };
    let report = integrate(&mut sys, &batch, &table, args.min_sim);
    if let Some(cycle) = sys.find_cycle() {
        return Err(TaxonomyError::Cycle(cycle).into());
    }
    fs::create_dir_all(&args.out)?;
    let mut f = std::io::BufWriter::new(fs::File::create(args.out.join("taxonomy.txt"))?);
    sys.save(&mut f)?;
    f.flush()?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    fs::write(args.out.join("report.json"), json)?;
    if let Some(bad) = report.outcomes.iter().find(|o| o.error.is_some()) {
        bail!(
            "{} of {} concepts failed to link; first: {}: {}",
            report.counts.errors,
            batch.len(),
            bad.name,
            bad.error.as_deref().unwrap_or_default()
        );
    }
    Ok(report)
}

/// Filter crawled hashes against downstream hashes; the kept ids go to
/// `out`, one per line.
pub fn cmd_dedup(crawled: &Path, downstream: &Path, out: &Path) -> Result<OverlapResult> {
    let crawled = read_hash_list(open(crawled)?).with_context(|| format!("reading {}", crawled.display()))?;
    let down: HashSet<DHash64> = read_hash_list(open(downstream)?)
        .with_context(|| format!("reading {}", downstream.display()))?
        .into_iter()
        .map(|(_, h)| h)
        .collect();
    let result = overlap_filter(&crawled, &down);
    let text: String = result.kept.iter().map(|SampleId(id)| format!("{id}\n")).collect();
    fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
    Ok(result)
}

/// Hash-list lines for PNM images, numbered from `first_id`.
pub fn cmd_hash(images: &[PathBuf], first_id: u64) -> Result<String> {
    let mut out = String::new();
    for (i, p) in images.iter().enumerate() {
        let img = read_pnm(open(p)?).with_context(|| format!("decoding {}", p.display()))?;
        out += &format!("{} {}\n", first_id + i as u64, dhash(&img));
    }
    Ok(out)
}

pub fn cmd_report(comparison: &Path) -> Result<String> {
    Ok(Comparison::load(comparison)?.table())
}
