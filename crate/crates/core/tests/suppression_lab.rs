// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use chaoscope_core::engine::{argmax, embed, forward, init_weights, Hooks, ModelConfig};
use chaoscope_core::suppression::*;
use chaoscope_core::Error;
use common::*;

fn toy() -> chaoscope_core::engine::ModelWeights {
    init_weights(&ModelConfig::toy()).unwrap()
}

#[test]
fn zeroed_counts_follow_the_floor_rule() {
    let w = model(3, 16, 2, 32, 4);
    let x = input(&w, 2, 5);
    let n = 5 * 16;
    for half in 0..=200u32 {
        let k = f64::from(half) / 2.0;
        let t = suppressed_forward(&w, &x, k).unwrap();
        let want = half as usize * n / 200;
        assert_eq!(t.suppressed, vec![want; 3], "k={k}");
    }
    assert!(matches!(suppressed_forward(&w, &x, 101.0), Err(Error::Argument(_))));
}

#[test]
fn half_suppression_matches_sorted_oracle() {
    let w = model(1, 8, 2, 16, 6);
    let x = input(&w, 3, 3);
    let plain = forward(&w, &x, &Hooks::none()).unwrap();
    let t = suppressed_forward(&w, &x, 50.0).unwrap();
    let raw = plain.states[1].as_slice();
    let mut idx: Vec<usize> = (0..raw.len()).collect();
    idx.sort_by(|&a, &b| raw[a].abs().partial_cmp(&raw[b].abs()).unwrap().then(a.cmp(&b)));
    let zeroed: std::collections::BTreeSet<usize> = idx[..raw.len() / 2].iter().copied().collect();
    for (i, (&got, &orig)) in t.states[1].as_slice().iter().zip(raw).enumerate() {
        if zeroed.contains(&i) {
            assert_eq!(got, 0.0);
        } else {
            assert_eq!(got, orig);
        }
    }
}

#[test]
fn dataset_is_deterministic_and_self_consistent() {
    let w = toy();
    let a = generate_toy_dataset(&w, 3, 40, 6, 4).unwrap();
    assert_eq!(a, generate_toy_dataset(&w, 3, 40, 6, 4).unwrap());
    assert_ne!(a, generate_toy_dataset(&w, 4, 40, 6, 4).unwrap());
    for item in &a {
        item.validate(64, 64).unwrap();
        assert_ne!(evaluate_item(&w, item, 0.0).unwrap(), Outcome::Incorrect);
    }
    assert!(generate_toy_dataset(&w, 3, 10, 6, 1).is_err());
    assert!(generate_toy_dataset(&w, 3, 10, 6, 65).is_err());
    assert!(generate_toy_dataset(&w, 3, 10, 0, 4).is_err());
    assert!(generate_toy_dataset(&w, 3, 0, 6, 4).is_err());
}

#[test]
fn full_alphabet_leaves_nothing_irrelevant() {
    let w = toy();
    let items = generate_toy_dataset(&w, 8, 20, 5, 64).unwrap();
    let r = sweep_suppression(&w, &items, &[0.0, 10.0, 50.0]).unwrap();
    for row in &r.rows {
        assert_eq!(row.irrelevant, 0);
        assert_eq!(row.correct + row.incorrect, 20);
    }
    assert_eq!(r.rows[0].correct, 20);
}

#[test]
fn total_suppression_picks_token_zero() {
    let w = toy();
    let items = generate_toy_dataset(&w, 5, 30, 4, 4).unwrap();
    for item in &items {
        let (logits, _) = final_logits(&w, item, 100.0).unwrap();
        assert_eq!(argmax(&logits), 0);
        let want = if item.correct_token() == 0 {
            Outcome::Correct
        } else if item.choice_tokens.contains(&0) {
            Outcome::Incorrect
        } else {
            Outcome::Irrelevant
        };
        assert_eq!(evaluate_item(&w, item, 100.0).unwrap(), want);
    }
    let r = sweep_suppression(&w, &items, &[100.0]).unwrap();
    let baseline_zero = items
        .iter()
        .filter(|it| {
            let t = forward(&w, &embed(&w, &it.prompt).unwrap(), &Hooks::none()).unwrap();
            let last = t.final_state().row_slice(it.prompt.len() - 1, 1);
            argmax(chaoscope_core::engine::logits(&w, &last).unwrap().row(0)) == 0
        })
        .count();
    assert_eq!(r.rows[0].top1_agreement, baseline_zero as f64 / 30.0);
}

#[test]
fn sweep_rows_partition_and_baseline() {
    let w = toy();
    let items = generate_toy_dataset(&w, 1, 200, 6, 4).unwrap();
    let coarse: Vec<f64> = (0..=20).map(|i| 5.0 * i as f64).collect();
    let r = sweep_suppression(&w, &items, &coarse).unwrap();
    assert_eq!(r.rows.len(), 21);
    assert_eq!(r.rows[0].top1_agreement, 1.0);
    assert_eq!(r.rows[0].mean_kl, 0.0);
    assert_eq!(r.rows[0].incorrect, 0);
    let elements: usize = items.iter().map(|it| it.prompt.len() * 32).sum();
    for row in &r.rows {
        assert_eq!(row.total(), 200);
        let per_item: usize = items
            .iter()
            .map(|it| (row.k * (it.prompt.len() * 32) as f64 / 100.0).floor() as usize)
            .sum();
        assert_eq!(row.zeroed_per_layer, vec![per_item; 4]);
        assert!(row.zeroed_per_layer[0] <= elements);
    }
    let fine: Vec<f64> = (0..=20).map(|i| 0.5 * i as f64).collect();
    assert_eq!(sweep_suppression(&w, &items[..10], &fine).unwrap().rows.len(), 21);
    assert_eq!(r, sweep_suppression(&w, &items, &coarse).unwrap());
}

#[test]
fn external_logits_reproduce_the_sweep() {
    let w = toy();
    let items = generate_toy_dataset(&w, 2, 12, 5, 3).unwrap();
    let grid = [0.0, 5.0, 20.0];
    let mut records = Vec::new();
    for &k in &grid {
        for (i, item) in items.iter().enumerate() {
            records.push(LogitRecord {
                k,
                item: i,
                logits: final_logits(&w, item, k).unwrap().0,
            });
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("logits.jsonl");
    write_logit_records(&p, &records).unwrap();
    let external = report_from_logits(&items, &read_logit_records(&p).unwrap()).unwrap();
    let internal = sweep_suppression(&w, &items, &grid).unwrap();
    for (a, b) in external.rows.iter().zip(&internal.rows) {
        assert_eq!((a.correct, a.incorrect, a.irrelevant), (b.correct, b.incorrect, b.irrelevant));
        assert_eq!(a.top1_agreement, b.top1_agreement);
        assert_eq!(a.mean_kl, b.mean_kl);
    }
}
