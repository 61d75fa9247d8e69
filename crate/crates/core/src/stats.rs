//! Per-label entity length statistics.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelLengthStat {
    pub label: String,
    pub count: usize,
    pub mean_chars: f64,
    pub median_chars: f64,
}

/// Median of a sorted slice; even counts average the two middle values.
pub fn median_sorted(sorted: &[usize]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    }
}

/// Length statistics (in characters of `Entity::text`) for every label with
/// at least one entity in the named splits, longest mean first, truncated to
/// `n`. Splits missing from the dataset are ignored.
pub fn rank_labels_by_length(dataset: &Dataset, splits: &[&str], n: usize) -> Vec<LabelLengthStat> {
    let mut lengths: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for split in dataset.splits.iter().filter(|s| splits.contains(&s.name.as_str())) {
        for doc in &split.documents {
            for e in &doc.entities {
                lengths.entry(e.label.as_str()).or_default().push(e.text.chars().count());
            }
        }
    }
    let mut stats: Vec<LabelLengthStat> = lengths
        .into_iter()
        .map(|(label, mut ls)| {
            ls.sort_unstable();
            let total: usize = ls.iter().sum();
            LabelLengthStat {
                label: String::from(label),
                count: ls.len(),
                mean_chars: total as f64 / ls.len() as f64,
                median_chars: median_sorted(&ls),
            }
        })
        .collect();
    stats.sort_by(|a, b| b.mean_chars.total_cmp(&a.mean_chars).then_with(|| a.label.cmp(&b.label)));
    stats.truncate(n);
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Document, Split, Word, BBox};
    use alloc::string::ToString;
    use alloc::vec;

    fn ds(entities: &[(&str, &str)]) -> Dataset {
        let docs = entities
            .iter()
            .enumerate()
            .map(|(i, (label, text))| {
                let mut d = Document::from_words(alloc::format!("d{i}"), vec![Word::new(*text, 0, BBox::default())]);
                d.entities = vec![d.entity(*label, 0, 1)];
                d
            })
            .collect();
        Dataset {
            name: "t".to_string(),
            label_set: vec!["a".to_string(), "b".to_string()],
            splits: vec![Split::new("train", docs), Split::new("test", Vec::new())],
        }
    }

    #[test]
    fn single_label_even_count() {
        let got = rank_labels_by_length(&ds(&[("a", "abc"), ("a", "abcde")]), &["train", "validation"], 10);
        assert_eq!(got, vec![LabelLengthStat { label: "a".to_string(), count: 2, mean_chars: 4.0, median_chars: 4.0 }]);
    }

    #[test]
    fn sorted_by_mean_and_truncated() {
        let d = ds(&[("a", "xx"), ("b", "xxxxxx"), ("a", "xxxxxxxx"), ("a", "x")]);
        let got = rank_labels_by_length(&d, &["train"], 10);
        assert_eq!(got.iter().map(|s| s.label.as_str()).collect::<Vec<_>>(), ["b", "a"]);
        assert_eq!(got[1].median_chars, 2.0);
        assert_eq!(got[1].mean_chars, 11.0 / 3.0);
        assert_eq!(rank_labels_by_length(&d, &["train"], 1).len(), 1);
        assert!(rank_labels_by_length(&d, &["test"], 3).is_empty());
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median_sorted(&[]), 0.0);
        assert_eq!(median_sorted(&[7]), 7.0);
        assert_eq!(median_sorted(&[1, 2, 10]), 2.0);
        assert_eq!(median_sorted(&[1, 2, 4, 10]), 3.0);
    }
}
