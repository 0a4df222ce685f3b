//! Hierarchical label system.
//!
//! Concepts (synsets) are nodes of a directed acyclic graph whose edges point
//! from a hyponym to each of its hypernyms. A concept may have several
//! parents and the system may have several roots.
//!
//! Text format, one record per line:
//!
//! ```text
//! # comment
//! C <id> <lemma1|lemma2|...> [gloss ...]
//! E <child_id> <parent_id>
//! ```

mod embedding;
mod link;

pub use embedding::EmbeddingTable;
pub use link::{
    head_compound, integrate, link_by_embedding, link_by_head_parse, link_by_subclass_of,
    ExternalConcept, IntegrationReport, LinkOutcome, LinkStatus, Solution, SolutionCounts,
    DEFAULT_MIN_SIM,
};

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaxonomyError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cycle detected: {}", .0.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(" -> "))]
    Cycle(Vec<ConceptId>),
    #[error("edge references undeclared concept `{0}`")]
    DanglingEdge(ConceptId),
    #[error("unknown concept `{0}`")]
    UnknownConcept(ConceptId),
    #[error("expected exactly 5 votes, got {0}")]
    VoteCount(usize),
    #[error("concept `{0}` is not tagged visual")]
    NotVisual(ConceptId),
    #[error("name is empty after tokenization")]
    EmptyAfterTokenize,
    #[error("missing embedding for `{0}`")]
    MissingEmbedding(String),
    #[error("invalid embedding table: {0}")]
    Embedding(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for TaxonomyError {
    fn from(e: std::io::Error) -> Self {
        TaxonomyError::Io(e.to_string())
    }
}

/// Opaque concept token. Never empty, never contains whitespace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(String);

impl ConceptId {
    pub fn new(id: impl Into<String>) -> Option<Self> {
        let id = id.into();
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            None
        } else {
            Some(ConceptId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ConceptId {
    /// Panics on an invalid token; intended for literals.
    fn from(s: &str) -> Self {
        ConceptId::new(s).unwrap_or_else(|| panic!("invalid concept id {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    WordNetBase,
    PublicDataset,
    Wikidata,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Visuality {
    #[default]
    Untagged,
    Visual,
    NonVisual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Commonality {
    #[default]
    Untagged,
    Common,
    NotCommon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub id: ConceptId,
    pub lemmas: Vec<String>,
    pub gloss: String,
    pub source: Source,
    pub visuality: Visuality,
    pub common: Commonality,
}

/// Lowercase, trim, and join internal whitespace runs with `_`.
pub fn normalize_lemma(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join("_")
}

/// Number of votes each tagging decision collects.
pub const TAG_VOTES: usize = 5;
/// Votes needed for a positive tag.
pub const TAG_THRESHOLD: usize = 3;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelSystem {
    concepts: BTreeMap<ConceptId, Concept>,
    parents: BTreeMap<ConceptId, BTreeSet<ConceptId>>,
    children: BTreeMap<ConceptId, BTreeSet<ConceptId>>,
    lemma_index: BTreeMap<String, BTreeSet<ConceptId>>,
}

impl LabelSystem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parse and validate a taxonomy file.
    pub fn load<R: BufRead>(reader: R) -> Result<Self, TaxonomyError> {
        let mut sys = LabelSystem::new();
        let mut edges: Vec<(ConceptId, ConceptId)> = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let parse_err = |message: &str| TaxonomyError::Parse {
                line: lineno,
                message: message.to_string(),
            };
            let mut fields = trimmed.split_whitespace();
            match fields.next() {
                Some("C") => {
                    let id = fields
                        .next()
                        .and_then(ConceptId::new)
                        .ok_or_else(|| parse_err("missing concept id"))?;
                    let lemmas: Vec<String> = fields
                        .next()
                        .ok_or_else(|| parse_err("missing lemmas"))?
                        .split('|')
                        .map(normalize_lemma)
                        .collect();
                    if lemmas.iter().any(String::is_empty) {
                        return Err(parse_err("empty lemma"));
                    }
                    let gloss = fields.collect::<Vec<_>>().join(" ");
                    if sys.concepts.contains_key(&id) {
                        return Err(parse_err(&format!("duplicate concept `{id}`")));
                    }
                    sys.insert_concept(Concept {
                        id,
                        lemmas,
                        gloss,
                        source: Source::WordNetBase,
                        visuality: Visuality::Untagged,
                        common: Commonality::Untagged,
                    });
                }
                Some("E") => {
                    let child = fields.next().and_then(ConceptId::new);
                    let parent = fields.next().and_then(ConceptId::new);
                    match (child, parent, fields.next()) {
                        (Some(c), Some(p), None) => edges.push((c, p)),
                        _ => return Err(parse_err("edge needs exactly two ids")),
                    }
                }
                Some(tag) => return Err(parse_err(&format!("unknown record type `{tag}`"))),
                None => unreachable!(),
            }
        }
        for (child, parent) in edges {
            for id in [&child, &parent] {
                if !sys.concepts.contains_key(id) {
                    return Err(TaxonomyError::DanglingEdge(id.clone()));
                }
            }
            sys.parents.entry(child.clone()).or_default().insert(parent.clone());
            sys.children.entry(parent).or_default().insert(child);
        }
        if let Some(cycle) = sys.find_cycle() {
            return Err(TaxonomyError::Cycle(cycle));
        }
        Ok(sys)
    }

    /// Write in the same format `load` reads. Output order is by id.
    pub fn save<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for c in self.concepts.values() {
            write!(w, "C {} {}", c.id, c.lemmas.join("|"))?;
            if !c.gloss.is_empty() {
                write!(w, " {}", c.gloss)?;
            }
            writeln!(w)?;
        }
        for (child, parents) in &self.parents {
            for p in parents {
                writeln!(w, "E {child} {p}")?;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.parents.values().map(BTreeSet::len).sum()
    }

    pub fn contains(&self, id: &ConceptId) -> bool {
        self.concepts.contains_key(id)
    }

    pub fn get(&self, id: &ConceptId) -> Option<&Concept> {
        self.concepts.get(id)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    pub fn parents(&self, id: &ConceptId) -> impl Iterator<Item = &ConceptId> {
        self.parents.get(id).into_iter().flatten()
    }

    pub fn children(&self, id: &ConceptId) -> impl Iterator<Item = &ConceptId> {
        self.children.get(id).into_iter().flatten()
    }

    pub fn lookup_lemma(&self, lemma: &str) -> Option<&BTreeSet<ConceptId>> {
        self.lemma_index.get(lemma)
    }

    pub fn lemma_index(&self) -> &BTreeMap<String, BTreeSet<ConceptId>> {
        &self.lemma_index
    }

    /// Rebuild the lemma index from scratch.
    pub fn rebuild_lemma_index(&self) -> BTreeMap<String, BTreeSet<ConceptId>> {
        let mut index: BTreeMap<String, BTreeSet<ConceptId>> = BTreeMap::new();
        for c in self.concepts.values() {
            for l in &c.lemmas {
                index.entry(l.clone()).or_default().insert(c.id.clone());
            }
        }
        index
    }

    fn insert_concept(&mut self, concept: Concept) {
        for l in &concept.lemmas {
            self.lemma_index
                .entry(l.clone())
                .or_default()
                .insert(concept.id.clone());
        }
        self.concepts.insert(concept.id.clone(), concept);
    }

    /// Add a new leaf under an existing concept. The new node has no
    /// children, so no cycle can form.
    pub(crate) fn attach_new(&mut self, concept: Concept, parent: &ConceptId) {
        debug_assert!(self.concepts.contains_key(parent));
        debug_assert!(!self.concepts.contains_key(&concept.id));
        let id = concept.id.clone();
        self.insert_concept(concept);
        self.parents.entry(id.clone()).or_default().insert(parent.clone());
        self.children.entry(parent.clone()).or_default().insert(id);
    }

    /// First free id derived from `base`: `base`, `base#2`, `base#3`, ...
    pub(crate) fn fresh_id(&self, base: &str) -> ConceptId {
        let base = ConceptId::new(base).expect("normalized lemma is a valid id");
        if !self.concepts.contains_key(&base) {
            return base;
        }
        (2..)
            .map(|n| ConceptId(format!("{base}#{n}")))
            .find(|id| !self.concepts.contains_key(id))
            .unwrap()
    }

    /// One cycle, if any, as a closed path `a -> ... -> a` along parent edges.
    pub fn find_cycle(&self) -> Option<Vec<ConceptId>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let mut mark: BTreeMap<&ConceptId, Mark> =
            self.concepts.keys().map(|k| (k, Mark::New)).collect();
        let empty = BTreeSet::new();
        for start in self.concepts.keys() {
            if mark[start] != Mark::New {
                continue;
            }
            // Iterative DFS; the stack holds (node, remaining parents).
            let mut stack: Vec<(&ConceptId, std::collections::btree_set::Iter<ConceptId>)> =
                vec![(start, self.parents.get(start).unwrap_or(&empty).iter())];
            mark.insert(start, Mark::Active);
            while let Some((node, iter)) = stack.last_mut() {
                match iter.next() {
                    Some(next) => match mark[next] {
                        Mark::New => {
                            mark.insert(next, Mark::Active);
                            stack.push((next, self.parents.get(next).unwrap_or(&empty).iter()));
                        }
                        Mark::Active => {
                            let pos = stack.iter().position(|(n, _)| *n == next).unwrap();
                            let mut cycle: Vec<ConceptId> =
                                stack[pos..].iter().map(|(n, _)| (*n).clone()).collect();
                            cycle.push(next.clone());
                            return Some(cycle);
                        }
                        Mark::Done => {}
                    },
                    None => {
                        mark.insert(node, Mark::Done);
                        stack.pop();
                    }
                }
            }
        }
        None
    }

    fn require(&self, id: &ConceptId) -> Result<(), TaxonomyError> {
        if self.concepts.contains_key(id) {
            Ok(())
        } else {
            Err(TaxonomyError::UnknownConcept(id.clone()))
        }
    }

    /// Concepts reachable from `id` by following at most `levels` parent
    /// edges, including `id` itself.
    pub fn ancestors(&self, id: &ConceptId, levels: usize) -> Result<BTreeSet<ConceptId>, TaxonomyError> {
        self.require(id)?;
        let mut seen = BTreeSet::from([id.clone()]);
        let mut frontier = vec![id.clone()];
        for _ in 0..levels {
            let mut next = Vec::new();
            for node in &frontier {
                for p in self.parents(node) {
                    if seen.insert(p.clone()) {
                        next.push(p.clone());
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        Ok(seen)
    }

    /// Full hyponym closure of `id`, including `id`.
    pub fn descendants(&self, id: &ConceptId) -> Result<BTreeSet<ConceptId>, TaxonomyError> {
        self.require(id)?;
        let mut seen = BTreeSet::from([id.clone()]);
        let mut queue = VecDeque::from([id.clone()]);
        while let Some(node) = queue.pop_front() {
            for c in self.children(&node) {
                if seen.insert(c.clone()) {
                    queue.push_back(c.clone());
                }
            }
        }
        Ok(seen)
    }

    /// Union of the subtrees rooted at every ancestor of `query` within
    /// `levels` hops.
    pub fn related_categories(
        &self,
        query: &ConceptId,
        levels: usize,
    ) -> Result<BTreeSet<ConceptId>, TaxonomyError> {
        let mut out = BTreeSet::new();
        for a in self.ancestors(query, levels)? {
            if out.contains(&a) {
                continue;
            }
            out.extend(self.descendants(&a)?);
        }
        Ok(out)
    }

    /// `votes[i] == true` means annotator `i` judged the concept non-visual.
    pub fn tag_visuality(&mut self, id: &ConceptId, votes: &[bool]) -> Result<&Concept, TaxonomyError> {
        self.require(id)?;
        if votes.len() != TAG_VOTES {
            return Err(TaxonomyError::VoteCount(votes.len()));
        }
        let concept = self.concepts.get_mut(id).unwrap();
        if votes.iter().filter(|&&v| v).count() >= TAG_THRESHOLD {
            concept.visuality = Visuality::NonVisual;
            // commonality is only defined for visual concepts
            concept.common = Commonality::Untagged;
        } else {
            concept.visuality = Visuality::Visual;
        }
        Ok(concept)
    }

    /// `votes[i] == true` means annotator `i` judged the concept common.
    pub fn tag_commonality(&mut self, id: &ConceptId, votes: &[bool]) -> Result<&Concept, TaxonomyError> {
        self.require(id)?;
        let concept = self.concepts.get_mut(id).unwrap();
        if concept.visuality != Visuality::Visual {
            return Err(TaxonomyError::NotVisual(id.clone()));
        }
        if votes.len() != TAG_VOTES {
            return Err(TaxonomyError::VoteCount(votes.len()));
        }
        concept.common = if votes.iter().filter(|&&v| v).count() >= TAG_THRESHOLD {
            Commonality::Common
        } else {
            Commonality::NotCommon
        };
        Ok(concept)
    }
}
