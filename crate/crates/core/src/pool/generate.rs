use serde::{Deserialize, Serialize};

use super::{Kind, PoolError, Proposal, Sample, SampleId};
use crate::rng;
use crate::taxonomy::ConceptId;

// Stream tags; the first word of every draw key.
const FEATURE: u64 = 1;
const QUERY: u64 = 2;
const ORDER: u64 = 3;
const PROPOSAL: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub id: ConceptId,
    pub mean: Vec<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindCounts {
    pub in_distribution: usize,
    pub noisy: usize,
    pub covariate: usize,
    pub semantic: usize,
}

impl KindCounts {
    pub fn total(&self) -> usize {
        self.in_distribution + self.noisy + self.covariate + self.semantic
    }

    pub fn get(&self, kind: Kind) -> usize {
        match kind {
            Kind::InDistribution => self.in_distribution,
            Kind::Noisy => self.noisy,
            Kind::CovariateShift => self.covariate,
            Kind::SemanticShift => self.semantic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub classes: Vec<ClassSpec>,
    pub counts: KindCounts,
    /// Standard-deviation multiplier for covariate-shift samples; above 1.
    pub covariate_scale: f64,
    /// Half-width of the cube noisy samples are drawn from.
    pub noise_radius: f64,
    pub dim: usize,
    /// Source classes for semantic-shift samples.
    pub outside_classes: Vec<ClassSpec>,
    pub seed: u64,
}

impl PoolSpec {
    pub fn validate(&self) -> Result<(), PoolError> {
        let err = |m: String| Err(PoolError::Spec(m));
        if self.dim == 0 {
            return err("feature_dim must be positive".into());
        }
        if self.classes.is_empty() {
            return err("at least one class is required".into());
        }
        if !(self.covariate_scale > 1.0) {
            return err(format!("covariate_scale must exceed 1, got {}", self.covariate_scale));
        }
        if !(self.noise_radius > 0.0) {
            return err(format!("noise_radius must be positive, got {}", self.noise_radius));
        }
        if self.counts.semantic > 0 && self.outside_classes.is_empty() {
            return err("semantic-shift samples need outside classes".into());
        }
        for c in self.classes.iter().chain(&self.outside_classes) {
            if c.mean.len() != self.dim {
                return err(format!("class `{}` mean has dim {}, expected {}", c.id, c.mean.len(), self.dim));
            }
            if !(c.sigma > 0.0) {
                return err(format!("class `{}` sigma must be positive", c.id));
            }
        }
        for o in &self.outside_classes {
            if self.classes.iter().any(|c| c.id == o.id) {
                return err(format!("outside class `{}` is also a pool class", o.id));
            }
        }
        Ok(())
    }
}

fn gaussian_vector(seed: u64, kind: Kind, class: usize, within: usize, mean: &[f64], sd: f64) -> Vec<f64> {
    mean.iter()
        .enumerate()
        .map(|(j, m)| m + sd * rng::gaussian(seed, &[FEATURE, kind.stream(), class as u64, within as u64, j as u64]))
        .collect()
}

/// Draw a pool. Sample `j` of a kind belongs to class `j % n` (for semantic
/// shift: outside class `j % n_outside`) and is that class's `j / n`-th
/// sample; every coordinate is keyed by `(kind, class, sample, coordinate)`.
/// The concatenated list (kinds in declaration order) is then shuffled and
/// ids are assigned by final position.
pub fn generate_pool(spec: &PoolSpec) -> Result<Vec<Sample>, PoolError> {
    spec.validate()?;
    let n = spec.classes.len();
    let seed = spec.seed;
    let mut samples = Vec::with_capacity(spec.counts.total());
    for kind in Kind::ALL {
        for j in 0..spec.counts.get(kind) {
            let (class, within) = (j % n, j / n);
            let c = &spec.classes[class];
            let (features, query, truth) = match kind {
                Kind::InDistribution => (gaussian_vector(seed, kind, class, within, &c.mean, c.sigma), &c.id, Some(&c.id)),
                Kind::CovariateShift => (
                    gaussian_vector(seed, kind, class, within, &c.mean, spec.covariate_scale * c.sigma),
                    &c.id,
                    Some(&c.id),
                ),
                Kind::Noisy => {
                    let f = (0..spec.dim)
                        .map(|d| {
                            let u = rng::uniform(seed, &[FEATURE, kind.stream(), class as u64, within as u64, d as u64]);
                            spec.noise_radius * (2.0 * u - 1.0)
                        })
                        .collect();
                    (f, &c.id, None)
                }
                Kind::SemanticShift => {
                    let m = spec.outside_classes.len();
                    let (src, within) = (j % m, j / m);
                    let o = &spec.outside_classes[src];
                    let q = rng::index(seed, &[QUERY, kind.stream(), src as u64, within as u64], n);
                    (gaussian_vector(seed, kind, src, within, &o.mean, o.sigma), &spec.classes[q].id, Some(&o.id))
                }
            };
            samples.push(Sample {
                id: SampleId(0),
                features,
                query: query.clone(),
                truth: truth.cloned(),
                kind,
                proposals: None,
                hash: None,
            });
        }
    }
    let len = samples.len();
    for i in 0..len.saturating_sub(1) {
        let j = i + rng::index(seed, &[ORDER, i as u64], len - i);
        samples.swap(i, j);
    }
    for (i, s) in samples.iter_mut().enumerate() {
        s.id = SampleId(i as u64);
    }
    Ok(samples)
}

/// How the simulated detector populates proposals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProposalLaw {
    /// 0 or 1 proposal.
    Sparse,
    /// One or two categories, 2 to 15 proposals each.
    Normal,
    /// 16 to 30 proposals of the query category.
    Crowded,
    /// Normal for in-distribution, crowded for covariate shift, sparse for
    /// noisy and semantic-shift samples.
    ByKind,
}

fn proposal(seed: u64, id: SampleId, slot: u64, category: &ConceptId) -> Proposal {
    let u = |k: u64| rng::uniform(seed, &[PROPOSAL, id.0, slot, k]);
    Proposal {
        category: category.clone(),
        score: 0.05 + 0.95 * u(0),
        bbox: [100.0 * u(1), 100.0 * u(2), 1.0 + 49.0 * u(3), 1.0 + 49.0 * u(4)],
    }
}

/// `generate_pool` plus a seeded proposal list per sample.
pub fn generate_det_samples(spec: &PoolSpec, law: ProposalLaw) -> Result<Vec<Sample>, PoolError> {
    let mut samples = generate_pool(spec)?;
    let seed = spec.seed;
    let classes: Vec<&ConceptId> = spec.classes.iter().map(|c| &c.id).collect();
    for s in &mut samples {
        let law = match (law, s.kind) {
            (ProposalLaw::ByKind, Kind::InDistribution) => ProposalLaw::Normal,
            (ProposalLaw::ByKind, Kind::CovariateShift) => ProposalLaw::Crowded,
            (ProposalLaw::ByKind, _) => ProposalLaw::Sparse,
            (l, _) => l,
        };
        let draw = |k: u64, n: usize| rng::index(seed, &[PROPOSAL, s.id.0, u64::MAX, k], n);
        let mut cats: Vec<(&ConceptId, usize)> = Vec::new();
        match law {
            ProposalLaw::Sparse => cats.push((&s.query, draw(0, 2))),
            ProposalLaw::Crowded => cats.push((&s.query, 16 + draw(0, 15))),
            ProposalLaw::Normal => {
                cats.push((&s.query, 2 + draw(0, 14)));
                let others: Vec<&ConceptId> = classes.iter().copied().filter(|c| **c != s.query).collect();
                if draw(1, 2) == 1 && !others.is_empty() {
                    cats.push((others[draw(2, others.len())], 2 + draw(3, 14)));
                }
            }
            ProposalLaw::ByKind => unreachable!(),
        }
        let mut slot = 0;
        let mut props = Vec::new();
        for (cat, count) in cats {
            for _ in 0..count {
                props.push(proposal(seed, s.id, slot, cat));
                slot += 1;
            }
        }
        s.proposals = Some(props);
    }
    Ok(samples)
}
