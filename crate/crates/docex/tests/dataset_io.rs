mod common;

use docex::core::model::{BBox, Dataset, Document, Split, Word};
use docex::dataset::{self, Format};
use docex::Error;
use proptest::prelude::*;

fn word() -> impl Strategy<Value = Word> {
    ("[a-zA-Z0-9äöüßçé€£¥漢字]{1,8}", 0u32..3, 0u32..900, 0u32..900).prop_map(|(t, p, x, y)| Word::new(t, p, BBox::new(x, y, x + 50, y + 20)))
}

fn document(id: usize) -> impl Strategy<Value = Document> {
    (prop::collection::vec(word(), 0..12), prop::collection::vec((0usize..12, 1usize..4, 0usize..3), 0..4)).prop_map(move |(words, spans)| {
        let mut d = Document::from_words(format!("d{id}"), words);
        let n = d.tokens.len();
        let mut taken = vec![false; n];
        for (start, len, label) in spans {
            if start + len <= n && !taken[start..start + len].iter().any(|t| *t) {
                taken[start..start + len].iter_mut().for_each(|t| *t = true);
                d.entities.push(d.entity(["a", "b", "c"][label], start, len));
            }
        }
        d.entities.sort_by_key(|e| e.token_start);
        d
    })
}

fn dataset() -> impl Strategy<Value = Dataset> {
    (prop::collection::vec(document(0), 0..4), prop::collection::vec(document(1), 0..2)).prop_map(|(a, b)| {
        let mut a = a;
        for (i, d) in a.iter_mut().enumerate() {
            d.id = format!("train-{i}");
        }
        let mut b = b;
        for (i, d) in b.iter_mut().enumerate() {
            d.id = format!("test-{i}");
        }
        Dataset {
            name: "p".into(),
            label_set: vec!["a".into(), "b".into(), "c".into()],
            splits: vec![Split::new("train", a), Split::new("test", b), Split::new("empty", Vec::new())],
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn canonical_round_trip(ds in dataset()) {
        let dir = tempfile::tempdir().unwrap();
        dataset::save(&ds, dir.path()).unwrap();
        let back = dataset::load(dir.path(), Format::Canonical).unwrap();
        prop_assert_eq!(&back, &ds);
        // Saving again yields identical bytes.
        let again = tempfile::tempdir().unwrap();
        dataset::save(&back, again.path()).unwrap();
        for split in ["train", "test", "empty"] {
            let f = format!("{split}.json");
            prop_assert_eq!(std::fs::read(dir.path().join(&f)).unwrap(), std::fs::read(again.path().join(&f)).unwrap());
        }
    }
}

#[test]
fn truncated_split_reports_byte_offset() {
    let dir = tempfile::tempdir().unwrap();
    dataset::save(&common::dataset(1, 3, 10), dir.path()).unwrap();
    let path = dir.path().join("test.json");
    let full = std::fs::read_to_string(&path).unwrap();
    let cut = full.len() / 2;
    std::fs::write(&path, &full[..cut]).unwrap();
    match dataset::load(dir.path(), Format::Canonical) {
        Err(Error::Parse { path: p, offset, .. }) => {
            assert_eq!(p, path);
            assert!(offset <= cut && offset + 2 >= cut, "offset {offset} vs truncation at {cut}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn invalid_dataset_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut ds = common::dataset(2, 2, 10);
    dataset::save(&ds, dir.path()).unwrap();
    ds.splits[0].documents[0].entities.push(docex::core::model::Entity {
        label: "nope".into(),
        token_start: 0,
        token_len: 1,
        text: String::new(),
    });
    std::fs::write(dir.path().join("test.json"), serde_json::to_string(&ds.splits[0].documents).unwrap()).unwrap();
    assert!(matches!(dataset::load(dir.path(), Format::Canonical), Err(Error::Invalid(_))));
    assert!(matches!(dataset::save(&ds, dir.path()), Err(Error::Invalid(_))));
}

#[test]
fn split_by_id_is_stable_and_partitions() {
    let ds = common::dataset(3, 40, 5);
    let a = dataset::split_by_id(&ds, "test", 0.75).unwrap();
    assert_eq!(a, dataset::split_by_id(&ds, "test", 0.75).unwrap());
    let train = a.split("train").unwrap();
    let test = a.split("test").unwrap();
    assert_eq!(train.documents.len(), 30);
    assert_eq!(train.documents.len() + test.documents.len(), 40);
    assert!(train.documents.iter().all(|d| test.find(&d.id).is_none()));
}
