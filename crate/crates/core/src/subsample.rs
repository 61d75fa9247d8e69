//! Seeded degradation of training/validation splits: dropping entity
//! annotations (partially labeled data) and dropping whole documents
//! (few-shot budgets).

use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Document, Split};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsampleKind {
    Tags,
    Documents,
}

/// How many entities of a document survive tag sub-sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagSampling {
    /// Each entity kept independently with probability `ratio`.
    #[default]
    Bernoulli,
    /// Exactly `round(ratio * entities)` kept per document.
    ExactCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsampleSpec {
    pub kind: SubsampleKind,
    pub ratio: f64,
    pub seed: u64,
    #[serde(default)]
    pub tag_sampling: TagSampling,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BadRatio(pub f64);

impl fmt::Display for BadRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ratio {} is outside (0, 1]", self.0)
    }
}

impl core::error::Error for BadRatio {}

pub fn check_ratio(ratio: f64) -> Result<(), BadRatio> {
    if ratio > 0.0 && ratio <= 1.0 {
        Ok(())
    } else {
        Err(BadRatio(ratio))
    }
}

impl SubsampleSpec {
    pub fn apply(&self, split: &Split) -> Result<Split, BadRatio> {
        match self.kind {
            SubsampleKind::Tags => subsample_tags(split, self.ratio, self.seed, self.tag_sampling),
            SubsampleKind::Documents => subsample_documents(split, self.ratio, self.seed),
        }
    }
}

/// Removes entity annotations at random; documents left without any entity
/// are discarded. Token streams of surviving documents are untouched.
pub fn subsample_tags(split: &Split, ratio: f64, seed: u64, sampling: TagSampling) -> Result<Split, BadRatio> {
    check_ratio(ratio)?;
    let documents = split
        .documents
        .iter()
        .filter_map(|doc| {
            let kept = keep_mask(doc, ratio, seed, sampling);
            let entities: Vec<_> = doc
                .entities
                .iter()
                .zip(&kept)
                .filter(|(_, k)| **k)
                .map(|(e, _)| e.clone())
                .collect();
            if entities.is_empty() {
                return None;
            }
            Some(Document { entities, ..doc.clone() })
        })
        .collect();
    Ok(Split { name: split.name.clone(), documents })
}

fn keep_mask(doc: &Document, ratio: f64, seed: u64, sampling: TagSampling) -> Vec<bool> {
    let mut stream = rng::keyed(seed, &doc.id);
    let n = doc.entities.len();
    match sampling {
        TagSampling::Bernoulli => (0..n).map(|_| stream.gen_bool(ratio)).collect(),
        TagSampling::ExactCount => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut stream);
            let mut mask = alloc::vec![false; n];
            for &i in &order[..rng::scaled_count(ratio, n)] {
                mask[i] = true;
            }
            mask
        }
    }
}

/// Keeps exactly `round(ratio * documents)` documents chosen by a seeded
/// shuffle, in their original order.
pub fn subsample_documents(split: &Split, ratio: f64, seed: u64) -> Result<Split, BadRatio> {
    check_ratio(ratio)?;
    let n = split.documents.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));
    let mut chosen = order[..rng::scaled_count(ratio, n)].to_vec();
    chosen.sort_unstable();
    Ok(Split {
        name: split.name.clone(),
        documents: chosen.into_iter().map(|i| split.documents[i].clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{receipt, words};
    use alloc::format;

    fn grid_split(docs: usize, per_doc: usize) -> Split {
        let documents = (0..docs)
            .map(|i| {
                let w: Vec<_> = (0..per_doc * 2).map(|j| format!("w{j}")).collect();
                let refs: Vec<&str> = w.iter().map(|s| s.as_str()).collect();
                let mut d = Document::from_words(format!("doc-{i}"), words(&refs));
                d.entities = (0..per_doc).map(|j| d.entity("total", 2 * j, 1)).collect();
                d
            })
            .collect();
        Split::new("train", documents)
    }

    #[test]
    fn ratio_one_is_identity() {
        let s = grid_split(20, 5);
        assert_eq!(subsample_tags(&s, 1.0, 3, TagSampling::Bernoulli).unwrap(), s);
        assert_eq!(subsample_tags(&s, 1.0, 3, TagSampling::ExactCount).unwrap(), s);
        assert_eq!(subsample_documents(&s, 1.0, 3).unwrap(), s);
    }

    #[test]
    fn bad_ratios() {
        let s = grid_split(2, 1);
        assert_eq!(subsample_tags(&s, 0.0, 1, TagSampling::Bernoulli), Err(BadRatio(0.0)));
        assert!(subsample_documents(&s, 1.5, 1).is_err());
        assert!(subsample_documents(&s, f64::NAN, 1).is_err());
    }

    #[test]
    fn half_of_tags_over_five_seeds() {
        let s = grid_split(100, 5);
        let total = s.entity_count() as f64;
        let mean = (0..5u64)
            .map(|seed| subsample_tags(&s, 0.5, seed, TagSampling::Bernoulli).unwrap().entity_count() as f64 / total)
            .sum::<f64>()
            / 5.0;
        // 2500 Bernoulli(0.5) draws: sd of the mean is 0.01.
        assert!((mean - 0.5).abs() <= 0.05, "mean kept fraction {mean}");
    }

    #[test]
    fn tag_subsampling_is_deterministic_and_order_free() {
        let s = grid_split(30, 4);
        let a = subsample_tags(&s, 0.4, 11, TagSampling::Bernoulli).unwrap();
        assert_eq!(a, subsample_tags(&s, 0.4, 11, TagSampling::Bernoulli).unwrap());

        let mut reversed = s.clone();
        reversed.documents.reverse();
        let mut b = subsample_tags(&reversed, 0.4, 11, TagSampling::Bernoulli).unwrap();
        b.documents.reverse();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_documents_are_discarded_tokens_untouched() {
        let s = grid_split(50, 1);
        let out = subsample_tags(&s, 0.3, 5, TagSampling::Bernoulli).unwrap();
        assert!(out.documents.len() < 50);
        for d in &out.documents {
            assert!(!d.entities.is_empty());
            let orig = s.find(&d.id).unwrap();
            assert_eq!(d.tokens, orig.tokens);
            assert_eq!(d.text, orig.text);
        }
    }

    #[test]
    fn exact_count_per_document() {
        let s = grid_split(10, 5);
        let out = subsample_tags(&s, 0.5, 2, TagSampling::ExactCount).unwrap();
        assert_eq!(out.documents.len(), 10);
        assert!(out.documents.iter().all(|d| d.entities.len() == 3));
        let sparse = subsample_tags(&grid_split(4, 1), 0.4, 2, TagSampling::ExactCount).unwrap();
        assert!(sparse.documents.is_empty());
    }

    #[test]
    fn document_budget_is_exact() {
        let s = Split::new("train", (0..10).map(|i| receipt(&format!("r{i}"))).collect());
        let out = subsample_documents(&s, 0.3, 42).unwrap();
        assert_eq!(out.documents.len(), 3);

        // Oracle: the same seeded shuffle, first three indices, original order.
        let mut order: Vec<usize> = (0..10).collect();
        order.shuffle(&mut rng::seeded(42));
        let mut expect = order[..3].to_vec();
        expect.sort();
        let ids: Vec<_> = out.documents.iter().map(|d| d.id.clone()).collect();
        let expect_ids: Vec<_> = expect.iter().map(|i| format!("r{i}")).collect();
        assert_eq!(ids, expect_ids);
        for d in &out.documents {
            assert_eq!(d.entities, s.find(&d.id).unwrap().entities);
        }
        assert_eq!(out, subsample_documents(&s, 0.3, 42).unwrap());
        let others: Vec<_> = (0..20u64).map(|seed| subsample_documents(&s, 0.3, seed).unwrap()).collect();
        assert!(others.iter().any(|o| *o != out));
    }

    #[test]
    fn spec_dispatch() {
        let s = grid_split(10, 2);
        let spec = SubsampleSpec { kind: SubsampleKind::Documents, ratio: 0.5, seed: 1, tag_sampling: TagSampling::Bernoulli };
        assert_eq!(spec.apply(&s).unwrap().documents.len(), 5);
    }
}
