//! Linking external concepts into the label system.
//!
//! Three linkers are tried in priority order for every external concept:
//! the concept's own `subclass_of` relation, the head word of its name, and
//! finally the nearest synset by embedding cosine similarity.

use serde::{Deserialize, Serialize};

use super::embedding::cosine;
use super::{
    normalize_lemma, Commonality, Concept, ConceptId, EmbeddingTable, LabelSystem, Source,
    TaxonomyError, Visuality,
};

/// Similarity floor for embedding links when none is configured.
pub const DEFAULT_MIN_SIM: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalConcept {
    pub name: String,
    #[serde(default)]
    pub subclass_of: Vec<ConceptId>,
    #[serde(default)]
    pub embedding_key: Option<String>,
    #[serde(default = "default_source")]
    pub source: Source,
}

fn default_source() -> Source {
    Source::Wikidata
}

impl ExternalConcept {
    pub fn named(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            subclass_of: Vec::new(),
            embedding_key: None,
            source: Source::Wikidata,
        }
    }

    pub fn with_parents(mut self, ids: impl IntoIterator<Item = ConceptId>) -> Self {
        self.subclass_of = ids.into_iter().collect();
        self
    }

    pub fn with_embedding(mut self, key: impl Into<String>) -> Self {
        self.embedding_key = Some(key.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkStatus {
    Linked,
    AlreadyPresent,
    NoMatch,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Solution {
    SubclassOf,
    HeadParse,
    Embedding,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkOutcome {
    pub name: String,
    pub status: LinkStatus,
    pub attached_under: Option<ConceptId>,
    pub new_id: Option<ConceptId>,
    pub solution_used: Solution,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl LinkOutcome {
    fn no_match(name: &str, solution: Solution) -> Self {
        Self {
            name: name.to_string(),
            status: LinkStatus::NoMatch,
            attached_under: None,
            new_id: None,
            solution_used: solution,
            similarity: None,
            error: None,
        }
    }

    fn linked(name: &str, solution: Solution, parent: ConceptId, new_id: ConceptId) -> Self {
        Self {
            name: name.to_string(),
            status: LinkStatus::Linked,
            attached_under: Some(parent),
            new_id: Some(new_id),
            solution_used: solution,
            similarity: None,
            error: None,
        }
    }
}

fn attach(sys: &mut LabelSystem, ext: &ExternalConcept, parent: &ConceptId) -> ConceptId {
    let lemma = normalize_lemma(&ext.name);
    let id = sys.fresh_id(&lemma);
    sys.attach_new(
        Concept {
            id: id.clone(),
            lemmas: vec![lemma],
            gloss: String::new(),
            source: ext.source,
            visuality: Visuality::Untagged,
            common: Commonality::Untagged,
        },
        parent,
    );
    id
}

fn check_name(ext: &ExternalConcept) -> Option<LinkOutcome> {
    if normalize_lemma(&ext.name).is_empty() {
        Some(LinkOutcome {
            error: Some(TaxonomyError::EmptyAfterTokenize.to_string()),
            status: LinkStatus::Error,
            ..LinkOutcome::no_match(&ext.name, Solution::None)
        })
    } else {
        None
    }
}

/// Attach under the first `subclass_of` target present in the system.
pub fn link_by_subclass_of(sys: &mut LabelSystem, ext: &ExternalConcept) -> LinkOutcome {
    if let Some(bad) = check_name(ext) {
        return bad;
    }
    match ext.subclass_of.iter().find(|id| sys.contains(id)) {
        Some(parent) => {
            let parent = parent.clone();
            let id = attach(sys, ext, &parent);
            LinkOutcome::linked(&ext.name, Solution::SubclassOf, parent, id)
        }
        None => LinkOutcome::no_match(&ext.name, Solution::SubclassOf),
    }
}

/// Rightmost-token head of a compound name, lowercased. Tokens are split on
/// whitespace, hyphens and underscores.
pub fn head_compound(name: &str) -> Result<String, TaxonomyError> {
    name.to_lowercase()
        .split(|c: char| c.is_whitespace() || c == '-' || c == '_')
        .rfind(|t| !t.is_empty())
        .map(str::to_string)
        .ok_or(TaxonomyError::EmptyAfterTokenize)
}

/// Attach under the synset carrying the name's head word.
///
/// A name that is already a lemma is reported as `AlreadyPresent` and the
/// system is left untouched. Among several synsets sharing the head lemma
/// the smallest id wins.
pub fn link_by_head_parse(sys: &mut LabelSystem, ext: &ExternalConcept) -> LinkOutcome {
    let head = match head_compound(&ext.name) {
        Ok(h) => h,
        Err(e) => {
            return LinkOutcome {
                status: LinkStatus::Error,
                error: Some(e.to_string()),
                ..LinkOutcome::no_match(&ext.name, Solution::HeadParse)
            }
        }
    };
    let whole = normalize_lemma(&ext.name);
    if let Some(existing) = sys.lookup_lemma(&whole) {
        return LinkOutcome {
            status: LinkStatus::AlreadyPresent,
            attached_under: existing.first().cloned(),
            ..LinkOutcome::no_match(&ext.name, Solution::HeadParse)
        };
    }
    match sys.lookup_lemma(&head).and_then(|s| s.first()).cloned() {
        Some(parent) => {
            let id = attach(sys, ext, &parent);
            LinkOutcome::linked(&ext.name, Solution::HeadParse, parent, id)
        }
        None => LinkOutcome::no_match(&ext.name, Solution::HeadParse),
    }
}

/// Attach under the concept whose first lemma has the most similar vector.
pub fn link_by_embedding(
    sys: &mut LabelSystem,
    ext: &ExternalConcept,
    table: &EmbeddingTable,
    min_sim: f64,
) -> Result<LinkOutcome, TaxonomyError> {
    if let Some(bad) = check_name(ext) {
        return Ok(bad);
    }
    let key = ext
        .embedding_key
        .as_deref()
        .ok_or_else(|| TaxonomyError::MissingEmbedding(ext.name.clone()))?;
    let query = table
        .get(key)
        .ok_or_else(|| TaxonomyError::MissingEmbedding(key.to_string()))?;
    // Concepts iterate in id order, so a strict `>` keeps the smallest id on ties.
    let mut best: Option<(f64, &ConceptId)> = None;
    for c in sys.concepts() {
        if let Some(v) = table.get(&c.lemmas[0]) {
            let sim = cosine(query, v);
            if best.is_none_or(|(b, _)| sim > b) {
                best = Some((sim, &c.id));
            }
        }
    }
    let (sim, parent) = best.ok_or_else(|| TaxonomyError::MissingEmbedding(key.to_string()))?;
    if sim < min_sim {
        return Ok(LinkOutcome {
            similarity: Some(sim),
            ..LinkOutcome::no_match(&ext.name, Solution::Embedding)
        });
    }
    let parent = parent.clone();
    let id = attach(sys, ext, &parent);
    Ok(LinkOutcome {
        similarity: Some(sim),
        ..LinkOutcome::linked(&ext.name, Solution::Embedding, parent, id)
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionCounts {
    pub subclass_of: usize,
    pub head_parse: usize,
    pub embedding: usize,
    pub already_present: usize,
    pub no_match: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegrationReport {
    pub outcomes: Vec<LinkOutcome>,
    pub counts: SolutionCounts,
}

impl IntegrationReport {
    pub fn has_errors(&self) -> bool {
        self.counts.errors > 0
    }
}

/// Link every concept of `batch` in input order. The first linker that
/// links (or finds the name already present) decides the outcome; errors
/// are recorded per concept and never abort the batch.
pub fn integrate(
    sys: &mut LabelSystem,
    batch: &[ExternalConcept],
    table: &EmbeddingTable,
    min_sim: f64,
) -> IntegrationReport {
    let mut report = IntegrationReport::default();
    for ext in batch {
        let mut outcome = link_by_subclass_of(sys, ext);
        if outcome.status == LinkStatus::NoMatch {
            outcome = link_by_head_parse(sys, ext);
        }
        if outcome.status == LinkStatus::NoMatch {
            outcome = link_by_embedding(sys, ext, table, min_sim).unwrap_or_else(|e| LinkOutcome {
                status: LinkStatus::Error,
                error: Some(e.to_string()),
                ..LinkOutcome::no_match(&ext.name, Solution::Embedding)
            });
        }
        if outcome.status == LinkStatus::NoMatch {
            outcome.solution_used = Solution::None;
        }
        let counts = &mut report.counts;
        match (outcome.status, outcome.solution_used) {
            (LinkStatus::Linked, Solution::SubclassOf) => counts.subclass_of += 1,
            (LinkStatus::Linked, Solution::HeadParse) => counts.head_parse += 1,
            (LinkStatus::Linked, _) => counts.embedding += 1,
            (LinkStatus::AlreadyPresent, _) => counts.already_present += 1,
            (LinkStatus::NoMatch, _) => counts.no_match += 1,
            (LinkStatus::Error, _) => counts.errors += 1,
        }
        report.outcomes.push(outcome);
    }
    report
}
