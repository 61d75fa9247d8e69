//! Entity-level precision, recall and F1 per label, with support-weighted
//! averages.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::Entity;

/// When a predicted entity counts as the same as a gold one (labels must
/// always be equal).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Identical token ranges.
    Span,
    /// Identical whitespace-normalized text.
    Text,
}

impl core::str::FromStr for MatchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "span" => Ok(MatchMode::Span),
            "text" => Ok(MatchMode::Text),
            _ => Err(alloc::format!("unknown match mode {s:?}")),
        }
    }
}

impl core::fmt::Display for MatchMode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            MatchMode::Span => "span",
            MatchMode::Text => "text",
        })
    }
}

/// Raw per-label counts; combine across documents by addition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl Tally {
    pub fn add(&mut self, other: &Tally) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
    }

    pub fn support(&self) -> usize {
        self.true_positives + self.false_negatives
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub label: String,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl LabelMetrics {
    pub fn from_tally(label: String, t: &Tally) -> Self {
        let precision = ratio(t.true_positives, t.true_positives + t.false_positives);
        let recall = ratio(t.true_positives, t.true_positives + t.false_negatives);
        LabelMetrics {
            label,
            true_positives: t.true_positives,
            false_positives: t.false_positives,
            false_negatives: t.false_negatives,
            precision,
            recall,
            f1: harmonic_mean(precision, recall),
            support: t.support(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub match_mode: MatchMode,
    pub labels: Vec<LabelMetrics>,
    /// Averages weighted by gold support; all zero when there is no gold.
    pub weighted_avg: Averages,
}

impl Report {
    pub fn label(&self, name: &str) -> Option<&LabelMetrics> {
        self.labels.iter().find(|l| l.label == name)
    }

    pub fn total_support(&self) -> usize {
        self.labels.iter().map(|l| l.support).sum()
    }

    /// Builds the report from per-label counts. Rows follow `label_set`;
    /// labels seen only in the counts are appended in sorted order.
    pub fn from_tallies(tallies: &BTreeMap<String, Tally>, label_set: &[String], match_mode: MatchMode) -> Self {
        let mut order: Vec<&String> = label_set.iter().collect();
        for l in tallies.keys() {
            if !label_set.contains(l) {
                order.push(l);
            }
        }
        let labels: Vec<LabelMetrics> = order
            .into_iter()
            .map(|l| LabelMetrics::from_tally(l.clone(), &tallies.get(l).copied().unwrap_or_default()))
            .collect();
        let total: usize = labels.iter().map(|l| l.support).sum();
        let weighted = |f: fn(&LabelMetrics) -> f64| -> f64 {
            if total == 0 {
                return 0.0;
            }
            labels.iter().map(|l| l.support as f64 * f(l)).sum::<f64>() / total as f64
        };
        let weighted_avg = Averages {
            precision: weighted(|l| l.precision),
            recall: weighted(|l| l.recall),
            f1: weighted(|l| l.f1),
        };
        Report { match_mode, labels, weighted_avg }
    }
}

/// Collapses runs of whitespace to single spaces and trims.
pub fn normalize_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for (i, w) in s.split_whitespace().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(w);
    }
    out
}

fn same(p: &Entity, g: &Entity, mode: MatchMode) -> bool {
    p.label == g.label
        && match mode {
            MatchMode::Span => p.token_start == g.token_start && p.token_len == g.token_len,
            MatchMode::Text => normalize_text(&p.text) == normalize_text(&g.text),
        }
}

/// Counts for one document. Predictions are matched in order, each to the
/// first still-unmatched equal gold entity.
pub fn tally_document(pred: &[Entity], gold: &[Entity], mode: MatchMode, into: &mut BTreeMap<String, Tally>) {
    let mut used = alloc::vec![false; gold.len()];
    for p in pred {
        let hit = gold.iter().enumerate().position(|(i, g)| !used[i] && same(p, g, mode));
        let t = into.entry(p.label.clone()).or_default();
        match hit {
            Some(i) => {
                used[i] = true;
                t.true_positives += 1;
            }
            None => t.false_positives += 1,
        }
    }
    for (g, matched) in gold.iter().zip(used) {
        if !matched {
            into.entry(g.label.clone()).or_default().false_negatives += 1;
        }
    }
}

/// Scores paired `(predictions, gold)` entity lists, one pair per document.
pub fn score<'a, I>(documents: I, label_set: &[String], mode: MatchMode) -> Report
where
    I: IntoIterator<Item = (&'a [Entity], &'a [Entity])>,
{
    let mut tallies = BTreeMap::new();
    for (pred, gold) in documents {
        tally_document(pred, gold, mode, &mut tallies);
    }
    Report::from_tallies(&tallies, label_set, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::words;
    use crate::model::Document;
    use alloc::string::ToString;
    use alloc::vec;

    fn labels() -> Vec<String> {
        vec!["company".to_string(), "date".to_string()]
    }

    fn doc() -> Document {
        Document::from_words("d", words(&["Foo", "Inc", "paid", "on", "the", "3rd", "May"]))
    }

    #[test]
    fn identity_is_perfect() {
        let d = doc();
        let gold = [d.entity("company", 0, 2), d.entity("date", 5, 2)];
        for mode in [MatchMode::Span, MatchMode::Text] {
            let r = score([(&gold[..], &gold[..])], &labels(), mode);
            for l in &r.labels {
                assert_eq!((l.precision, l.recall, l.f1), (1.0, 1.0, 1.0));
            }
            assert_eq!(r.weighted_avg, Averages { precision: 1.0, recall: 1.0, f1: 1.0 });
        }
    }

    #[test]
    fn empty_predictions_score_zero() {
        let d = doc();
        let gold = [d.entity("company", 0, 2)];
        let r = score([(&[][..], &gold[..])], &labels(), MatchMode::Span);
        assert_eq!(r.weighted_avg, Averages::default());
        let c = r.label("company").unwrap();
        assert_eq!((c.precision, c.recall, c.f1, c.false_negatives), (0.0, 0.0, 0.0, 1));
    }

    #[test]
    fn mixed_case_half_weighted_f1() {
        let d = doc();
        let gold = [d.entity("company", 0, 2), d.entity("date", 5, 1)];
        let pred = [d.entity("company", 0, 2), d.entity("date", 4, 2)];
        let r = score([(&pred[..], &gold[..])], &labels(), MatchMode::Span);
        assert_eq!(r.label("company").unwrap().f1, 1.0);
        assert_eq!(r.label("date").unwrap().f1, 0.0);
        assert_eq!(r.weighted_avg.f1, 0.5);
    }

    #[test]
    fn duplicates_count_once() {
        let d = doc();
        let gold = [d.entity("company", 0, 2)];
        let pred = [gold[0].clone(), gold[0].clone()];
        let r = score([(&pred[..], &gold[..])], &labels(), MatchMode::Span);
        let c = r.label("company").unwrap();
        assert_eq!((c.true_positives, c.false_positives, c.false_negatives), (1, 1, 0));
        assert_eq!(c.precision, 0.5);
    }

    #[test]
    fn text_mode_ignores_position_and_spacing() {
        let d = Document::from_words("d", words(&["Foo", "Inc", "x", "Foo", "Inc"]));
        let gold = [d.entity("company", 0, 2)];
        let mut p = d.entity("company", 3, 2);
        p.text = " Foo   Inc".to_string();
        let r = score([(&[p.clone()][..], &gold[..])], &labels(), MatchMode::Text);
        assert_eq!(r.weighted_avg.f1, 1.0);
        let r = score([(&[p][..], &gold[..])], &labels(), MatchMode::Span);
        assert_eq!(r.weighted_avg.f1, 0.0);
    }

    #[test]
    fn unknown_prediction_labels_get_rows() {
        let d = doc();
        let pred = [d.entity("vendor", 0, 1)];
        let r = score([(&pred[..], &[][..])], &labels(), MatchMode::Span);
        assert_eq!(r.labels.len(), 3);
        assert_eq!(r.labels[2].false_positives, 1);
        assert_eq!(r.total_support(), 0);
        assert_eq!(r.weighted_avg.f1, 0.0);
    }
}
