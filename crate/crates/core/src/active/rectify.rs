use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;

use super::ActiveError;
use crate::learner::LearnerState;
use crate::pool::Sample;
use crate::taxonomy::{ConceptId, LabelSystem};

/// Keep the samples whose top-`k` predicted classes meet the related
/// categories of their query. Input order is preserved.
pub fn rectify_cls<'a>(
    state: &LearnerState,
    unlabeled: &[&'a Sample],
    sys: &LabelSystem,
    top_k: usize,
    levels: usize,
) -> Result<Vec<&'a Sample>, ActiveError> {
    let mut related: HashMap<&ConceptId, BTreeSet<ConceptId>> = HashMap::new();
    for s in unlabeled {
        if !related.contains_key(&s.query) {
            related.insert(&s.query, sys.related_categories(&s.query, levels)?);
        }
    }
    let keep: Vec<bool> = unlabeled
        .par_iter()
        .map(|s| {
            let pred = state.predict(&s.features, top_k)?;
            let rel = &related[&s.query];
            Ok(pred.ranked.iter().any(|(c, _)| rel.contains(c)))
        })
        .collect::<Result<_, ActiveError>>()?;
    Ok(unlabeled.iter().zip(keep).filter(|(_, k)| *k).map(|(s, _)| *s).collect())
}

/// Keep samples with at least `min_proposals` proposals and no category
/// proposed more than `max_identical` times.
pub fn rectify_det<'a>(
    samples: &[&'a Sample],
    min_proposals: usize,
    max_identical: usize,
) -> Result<Vec<&'a Sample>, ActiveError> {
    let mut out = Vec::new();
    for &s in samples {
        let props = s.proposals.as_ref().ok_or(ActiveError::MissingProposals(s.id))?;
        if props.len() < min_proposals {
            continue;
        }
        let mut per_cat: BTreeMap<&ConceptId, usize> = BTreeMap::new();
        for p in props {
            *per_cat.entry(&p.category).or_default() += 1;
        }
        if per_cat.values().all(|&n| n <= max_identical) {
            out.push(s);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::train;
    use crate::pool::{Kind, Proposal, SampleId};

    fn sys() -> LabelSystem {
        LabelSystem::load(
            "\
C entity entity
C animal animal
C feline feline
C cat cat
C lion lion
C canine canine
C dog dog
C plant plant
C tree tree
E animal entity
E feline animal
E cat feline
E lion feline
E canine animal
E dog canine
E plant entity
E tree plant
"
            .as_bytes(),
        )
        .unwrap()
    }

    fn sample(id: u64, x: f64, query: &str) -> Sample {
        Sample {
            id: SampleId(id),
            features: vec![x],
            query: query.into(),
            truth: Some(query.into()),
            kind: Kind::InDistribution,
            proposals: None,
            hash: None,
        }
    }

    fn model() -> LearnerState {
        let data = [sample(0, 0.0, "cat"), sample(1, 10.0, "dog"), sample(2, 20.0, "tree")];
        train(data.iter().map(|s| (s, &s.query)), 1.0).unwrap()
    }

    #[test]
    fn keeps_related_predictions() {
        let st = model();
        // predicted "cat"; query "feline" covers cat
        let a = sample(10, 0.5, "feline");
        // predicted "tree"; related(cat, 1) = feline subtree
        let b = sample(11, 19.0, "cat");
        // predicted "dog" for a lion query: unrelated at level 1
        let c = sample(12, 10.0, "lion");
        let kept = rectify_cls(&st, &[&a, &b, &c], &sys(), 1, 1).unwrap();
        assert_eq!(kept.iter().map(|s| s.id.0).collect::<Vec<_>>(), [10]);
        // lifting the ancestor depth to 2 relates lion to dog via animal
        let kept = rectify_cls(&st, &[&a, &b, &c], &sys(), 1, 2).unwrap();
        assert_eq!(kept.iter().map(|s| s.id.0).collect::<Vec<_>>(), [10, 12]);
    }

    #[test]
    fn full_top_k_keeps_everything_related_to_the_class_list() {
        let st = model();
        let samples: Vec<Sample> = (0..30).map(|i| sample(i, i as f64 * 3.0 - 20.0, ["cat", "lion", "dog", "tree"][i as usize % 4])).collect();
        let refs: Vec<&Sample> = samples.iter().collect();
        let kept = rectify_cls(&st, &refs, &sys(), 3, 1).unwrap();
        assert_eq!(kept.len(), refs.len());
    }

    #[test]
    fn unknown_query_is_an_error() {
        let s = sample(1, 0.0, "ghost");
        assert!(matches!(rectify_cls(&model(), &[&s], &sys(), 1, 1), Err(ActiveError::Taxonomy(_))));
    }

    fn with_props(id: u64, cats: &[(&str, usize)]) -> Sample {
        let mut s = sample(id, 0.0, "person");
        s.proposals = Some(
            cats.iter()
                .flat_map(|&(c, n)| (0..n).map(move |_| Proposal { category: c.into(), score: 0.9, bbox: [0.0, 0.0, 1.0, 1.0] }))
                .collect(),
        );
        s
    }

    #[test]
    fn detection_boundaries() {
        let one = with_props(1, &[("person", 1)]);
        let crowd = with_props(2, &[("person", 16)]);
        let edge = with_props(3, &[("person", 15), ("dog", 1)]);
        let none = with_props(4, &[]);
        let kept = rectify_det(&[&one, &crowd, &edge, &none], 2, 15).unwrap();
        assert_eq!(kept.iter().map(|s| s.id.0).collect::<Vec<_>>(), [3]);
        let bare = sample(5, 0.0, "person");
        assert_eq!(rectify_det(&[&bare], 2, 15), Err(ActiveError::MissingProposals(SampleId(5))));
    }
}
