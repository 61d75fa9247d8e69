#![allow(dead_code)]

use docex_core::model::{BBox, Dataset, Document, Split, Word};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn labels(n: usize) -> Vec<String> {
    ["company", "address", "total", "date", "party", "effective_date"][..n].iter().map(|s| s.to_string()).collect()
}

const VOCAB: [&str; 10] = ["ACME", "Corp", "Zoë", "12.50", "St", "naïve", "Ltd", "€5", "01/02/2020", "x"];

/// A document with `n` tokens and random non-overlapping entities.
pub fn document(r: &mut ChaCha8Rng, id: &str, n: usize, label_set: &[String]) -> Document {
    let words = (0..n)
        .map(|i| Word::new(VOCAB[r.gen_range(0..VOCAB.len())], (i / 50) as u32, BBox::new(0, 0, 10, 10)))
        .collect();
    let mut doc = Document::from_words(id, words);
    let mut t = 0;
    let mut entities = Vec::new();
    while t < n {
        if r.gen_bool(0.35) {
            let len = r.gen_range(1..=4.min(n - t));
            let label = &label_set[r.gen_range(0..label_set.len())];
            entities.push(doc.entity(label.clone(), t, len));
            t += len;
            // Sometimes leave no gap so adjacent entities are exercised.
            if r.gen_bool(0.7) {
                t += 1;
            }
        } else {
            t += 1;
        }
    }
    doc.entities = entities;
    doc
}

pub fn split(r: &mut ChaCha8Rng, name: &str, docs: usize, max_tokens: usize, label_set: &[String]) -> Split {
    let documents = (0..docs)
        .map(|i| {
            let n = r.gen_range(0..=max_tokens);
            document(r, &format!("{name}-{i}"), n, label_set)
        })
        .collect();
    Split::new(name, documents)
}

pub fn dataset(r: &mut ChaCha8Rng, docs: usize, max_tokens: usize, n_labels: usize) -> Dataset {
    let label_set = labels(n_labels);
    let train = split(r, "train", docs, max_tokens, &label_set);
    Dataset { name: "random".into(), label_set, splits: vec![train] }
}
