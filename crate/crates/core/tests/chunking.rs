mod common;

use docex_core::chunk::{chunk, remap, BoundaryPolicy, ChunkSpec, Edge};
use proptest::prelude::*;
use rand::Rng;

fn ranges(n: usize, window: usize, overlap: usize) -> Vec<(usize, usize)> {
    chunk("d", n, ChunkSpec::new(window, overlap).unwrap()).iter().map(|c| (c.start, c.end)).collect()
}

#[test]
fn ten_tokens_window_four_overlap_two() {
    assert_eq!(ranges(10, 4, 2), [(0, 4), (2, 6), (4, 8), (6, 10)]);
}

proptest! {
    #[test]
    fn windows_cover_every_token(n in 0usize..400, window in 1usize..64, overlap_frac in 0.0f64..1.0) {
        let overlap = ((window as f64) * overlap_frac) as usize;
        let overlap = overlap.min(window - 1);
        let chunks = chunk("d", n, ChunkSpec::new(window, overlap).unwrap());
        let mut seen = vec![false; n];
        for (i, c) in chunks.iter().enumerate() {
            prop_assert_eq!(c.index, i);
            prop_assert!(c.len() <= window && !c.is_empty());
            seen[c.start..c.end].iter_mut().for_each(|s| *s = true);
            if i > 0 {
                prop_assert_eq!(c.start, chunks[i - 1].start + window - overlap);
            }
        }
        prop_assert!(seen.into_iter().all(|s| s));
        if n > 0 {
            prop_assert_eq!(chunks.last().unwrap().end, n);
        }
    }

    #[test]
    fn entities_no_longer_than_overlap_fit_in_some_window(
        n in 1usize..300, window in 2usize..40, overlap_frac in 0.0f64..1.0, start_frac in 0.0f64..1.0, len in 1usize..40
    ) {
        let overlap = (((window as f64) * overlap_frac) as usize).min(window - 1);
        let len = len.min(overlap.max(1)).min(n);
        let start = ((n - len) as f64 * start_frac) as usize;
        let chunks = chunk("d", n, ChunkSpec::new(window, overlap).unwrap());
        let fits = chunks.iter().any(|c| c.contains(start, len));
        prop_assert!(fits || len > overlap, "entity ({start}, {len}) lost with window {window} overlap {overlap}");
    }
}

#[test]
fn remap_round_trips_whole_entities() {
    let label_set = common::labels(3);
    let mut r = common::rng(4);
    for _ in 0..300 {
        let n = r.gen_range(1..80);
        let doc = common::document(&mut r, "d", n, &label_set);
        let window = r.gen_range(2..20);
        let spec = ChunkSpec::new(window, r.gen_range(0..window)).unwrap();
        for c in chunk("d", n, spec) {
            for policy in [BoundaryPolicy::Drop, BoundaryPolicy::Clip, BoundaryPolicy::MarkPartial] {
                for local in remap(&c, &doc.entities, policy) {
                    assert!(local.start + local.len <= c.len());
                    let (start, len) = local.to_document(&c);
                    let whole = doc.entities.iter().any(|e| e.token_start == start && e.token_len == len && e.label == local.label);
                    match local.edge {
                        Edge::Whole => assert!(whole),
                        Edge::Clipped => assert_eq!(policy, BoundaryPolicy::Clip),
                        Edge::Partial { cut_before, cut_after } => {
                            assert_eq!(policy, BoundaryPolicy::MarkPartial);
                            assert!(cut_before + cut_after > 0);
                            let src = start - cut_before;
                            assert!(doc.entities.iter().any(|e| e.token_start == src && e.token_len == len + cut_before + cut_after));
                        }
                    }
                }
            }
        }
    }
}
