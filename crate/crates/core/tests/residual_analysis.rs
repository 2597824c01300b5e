// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use chaoscope_core::engine::{forward, Hooks, PerturbationMode, PerturbationSpec, SuppressionSpec};
use chaoscope_core::numerics::{norm2, pearson_corr};
use chaoscope_core::residual::*;
use chaoscope_core::Error;
use common::*;

#[test]
fn ledger_reconstructs_random_model() {
    let w = model(8, 64, 4, 128, 7);
    let t = forward(&w, &input(&w, 2, 6), &Hooks::none()).unwrap();
    for m in 0..6 {
        let l = build_ledger(&t, m).unwrap();
        assert!(l.relative_error() < 1e-9, "token {m}: {}", l.relative_error());
        assert_eq!(l.layers(), 8);
    }
    assert!(matches!(build_ledger(&t, 6), Err(Error::Index(_))));
}

#[test]
fn single_layer_step_is_exact() {
    let w = model(1, 16, 2, 32, 3);
    let t = forward(&w, &input(&w, 1, 3), &Hooks::none()).unwrap();
    let l = build_ledger(&t, 2).unwrap();
    assert_eq!(l.reconstruct(), l.final_state);
}

#[test]
fn zero_model_ledger_and_projection() {
    let w = zero_model(4, 8);
    let t = forward(&w, &gaussian_input(1, 2, 8), &Hooks::none()).unwrap();
    let l = build_ledger(&t, 0).unwrap();
    assert_eq!(l.final_state, l.initial);
    let p = projection_decomposition(&l).unwrap();
    assert_eq!(p.initial, 1.0);
    assert!(p.att.iter().chain(&p.mlp).all(|&f| f == 0.0));
}

#[test]
fn projection_closes_under_hooks() {
    let w = model(6, 32, 4, 64, 21);
    let x = input(&w, 4, 5);
    let hooks = [
        Hooks::none(),
        Hooks::none().with_suppression(SuppressionSpec::new(12.5).unwrap()),
        Hooks::none().with_perturbation(PerturbationSpec::at_layer(3, 2, None, PerturbationMode::Relative {
            k_frac: 0.1,
        })),
        Hooks::none().with_perturbation(PerturbationSpec::on_embedding(1, Some(3), PerturbationMode::Absolute {
            delta: 0.5,
        })),
    ];
    for h in &hooks {
        let t = forward(&w, &x, h).unwrap();
        for m in 0..5 {
            let p = projection_decomposition(&build_ledger(&t, m).unwrap()).unwrap();
            assert!((p.total() - 1.0).abs() < 1e-9, "total {}", p.total());
        }
    }
}

#[test]
fn magnitude_curves_of_diagnostic_models() {
    let w = model(6, 16, 2, 32, 2);
    let x = input(&w, 3, 4);
    let id = Hooks {
        diagnostics: (0..6)
            .map(|layer| chaoscope_core::engine::DiagnosticLayerSpec {
                layer,
                replacement: chaoscope_core::engine::Replacement::Identity,
            })
            .collect(),
        ..Hooks::none()
    };
    let c = input_magnitude_curve(&w, &x, true, &id).unwrap();
    assert!(c.average.iter().all(|&r| r == 0.0));
    for c0 in [0.5, 3.0] {
        let curve = input_magnitude_curve(&w, &x, true, &Hooks::scale_layers(0..6, c0)).unwrap();
        assert_eq!(curve.average[0], 0.0);
        for (l, r) in curve.average.iter().enumerate() {
            assert!((r - l as f64 * f64::ln(c0)).abs() < 1e-12, "l={l} r={r}");
        }
        let s = cross_layer_std(&curve, 4).unwrap();
        assert!(s.entries.iter().all(|e| e.std < 1e-12));
    }
}

#[test]
fn magnitude_curve_matches_direct_norms() {
    let w = model(8, 32, 4, 64, 13);
    let x = input(&w, 6, 5);
    let curve = input_magnitude_curve(&w, &x, true, &Hooks::none()).unwrap();
    let xn = normalize_rows(&x).unwrap();
    let t = forward(&w, &xn, &Hooks::none()).unwrap();
    for l in 0..=8 {
        let mut avg = 0.0;
        for i in 0..5 {
            let direct = (norm2(t.states[l].row(i)) / norm2(xn.row(i))).ln();
            assert!((curve.per_token[l][i] - direct).abs() < 1e-12);
            avg += direct / 5.0;
        }
        assert!(curve.average[l].is_finite());
        assert!((curve.average[l] - avg).abs() < 1e-12);
    }
    let mut zero = x.clone();
    zero.row_mut(2).fill(0.0);
    assert!(matches!(
        input_magnitude_curve(&w, &zero, true, &Hooks::none()),
        Err(Error::DegenerateInput { token: 2 })
    ));
}

#[test]
fn planted_growth_factors() {
    let average: Vec<f64> = (0..39)
        .map(|l| {
            let x = l as f64;
            if l <= 9 {
                0.27 * x
            } else {
                2.7 + 0.075 * (x - 10.0)
            }
        })
        .collect();
    let g = fit_growth(&MagnitudeCurve::from_average(average)).unwrap();
    assert_eq!(g.fit.breakpoint, 9);
    assert!((g.fit.left.slope - 0.27).abs() < 1e-12);
    assert!((g.fit.right.slope - 0.075).abs() < 1e-12);
    // the quoted real-domain factors are two-digit roundings
    assert!((g.left_factor - 1.32).abs() < 0.015);
    assert!((g.right_factor - 1.08).abs() < 0.005);
}

#[test]
fn correlation_matrix_properties() {
    let w = model(6, 32, 4, 64, 17);
    let t = forward(&w, &input(&w, 9, 6), &Hooks::none()).unwrap();
    for mode in [CorrelationMode::TokenAveraged, CorrelationMode::Flattened] {
        let c = interlayer_pearson(&t, mode).unwrap();
        assert_eq!(c.size(), 7);
        for a in 0..7 {
            assert_eq!(c.get(a, a), 1.0);
            for b in 0..7 {
                assert!((c.get(a, b) - c.get(b, a)).abs() < 1e-12);
                assert!((-1.0..=1.0).contains(&c.get(a, b)));
            }
        }
    }
    // oracle for one entry
    let c = interlayer_pearson(&t, CorrelationMode::TokenAveraged).unwrap();
    let direct: f64 =
        (0..6).map(|i| pearson_corr(t.states[1].row(i), t.states[4].row(i)).unwrap()).sum::<f64>() / 6.0;
    assert!((c.get(1, 4) - direct).abs() < 1e-12);

    // positive per-layer rescaling leaves the matrix unchanged
    let mut scaled = t.clone();
    for (l, s) in scaled.states.iter_mut().enumerate() {
        *s = s.scale(0.5 + l as f64);
    }
    let c2 = interlayer_pearson(&scaled, CorrelationMode::TokenAveraged).unwrap();
    for (a, b) in c.values.as_slice().iter().zip(c2.values.as_slice()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn identity_model_correlates_perfectly() {
    let w = zero_model(3, 8);
    let t = forward(&w, &gaussian_input(3, 4, 8), &Hooks::none()).unwrap();
    let c = interlayer_pearson(&t, CorrelationMode::TokenAveraged).unwrap();
    assert!(c.values.as_slice().iter().all(|&v| (v - 1.0).abs() < 1e-15));
}

#[test]
fn constant_rows_are_excluded_then_fatal() {
    let w = zero_model(2, 4);
    let mut x = gaussian_input(3, 3, 4);
    x.row_mut(1).fill(2.0);
    let c = interlayer_pearson(&forward(&w, &x, &Hooks::none()).unwrap(), CorrelationMode::TokenAveraged).unwrap();
    assert_eq!(c.excluded[0][2], 1);
    let mut flat = x.clone();
    for i in 0..3 {
        flat.row_mut(i).fill(1.0);
    }
    assert!(matches!(
        interlayer_pearson(&forward(&w, &flat, &Hooks::none()).unwrap(), CorrelationMode::TokenAveraged),
        Err(Error::UndefinedCorrelation(_))
    ));
}

#[test]
fn geometry_matches_raw_vectors() {
    let w = model(5, 32, 4, 64, 23);
    let t = forward(&w, &input(&w, 2, 4), &Hooks::none()).unwrap();
    let g = component_geometry(&t, 3).unwrap();
    let target = t.final_state().row(3);
    for row in &g {
        let v = t.mlp[row.layer].row(3);
        let dot: f64 = v.iter().zip(target).map(|(a, b)| a * b).sum();
        let cos = dot / (norm2(v) * norm2(target));
        assert!((row.mlp.cosine.unwrap() - cos).abs() < 1e-12);
        assert!((row.mlp.ratio - norm2(v) / norm2(target)).abs() < 1e-12);
        assert!(row.att.cosine.unwrap().abs() <= 1.0);
    }
    let zero = forward(&zero_model(2, 4), &gaussian_input(1, 1, 4), &Hooks::none()).unwrap();
    let g = component_geometry(&zero, 0).unwrap();
    assert!(g.iter().all(|r| r.att.cosine.is_none() && r.mlp.ratio == 0.0));
}
