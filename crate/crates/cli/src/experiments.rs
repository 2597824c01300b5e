// SPDX-License-Identifier: MIT OR Apache-2.0

//! One function per experiment kind; each writes its files into the staging
//! area and returns nothing else.

use std::fs;

use chaoscope_core::engine::{
    embed, forward, load_weights, Hooks, ModelWeights, PerturbationSpec,
};
use chaoscope_core::numerics::{lyapunov_discrete_map, LinearMap, LogisticMap, Matrix};
use chaoscope_core::qle::{
    delta_sweep, qle_elementwise_field, qle_intra, qle_iterative, FieldLabel, FieldSpec, QleConfig, QleSite,
};
use chaoscope_core::residual::{
    build_ledger, component_geometry, cross_layer_std, fit_growth, input_magnitude_curve,
    interlayer_pearson, projection_decomposition, ContributionLedger, MagnitudeCurve,
};
use chaoscope_core::suppression::{
    generate_toy_dataset, read_dataset, read_logit_records, report_from_logits, sweep_suppression,
};
use serde_json::json;

use crate::config::{DatasetParams, Experiment, ExperimentConfig, Init, MapSpec};
use crate::report::{header, num, opt_num, Staging};
use crate::CliError;

struct Context {
    weights: Option<ModelWeights>,
    tokens: Option<Vec<u32>>,
    seed: u64,
}

impl Context {
    fn build(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let weights = match &cfg.model {
            None => None,
            Some(m) => Some(match (&m.config, &m.weights_path) {
                (Some(c), None) => match m.init {
                    Init::Seeded => chaoscope_core::engine::init_weights(c)?,
                    Init::Zero => ModelWeights::zeroed(c)?,
                },
                (None, Some(p)) => load_weights(p)?,
                _ => unreachable!("validated"),
            }),
        };
        let tokens = cfg.input.as_ref().map(|i| i.token_ids()).transpose()?;
        if let (Some(w), Some(t)) = (&weights, &tokens) {
            if cfg.input.as_ref().is_some_and(|i| i.text.is_some()) && w.config.vocab < 256 {
                return Err(CliError::Config(format!(
                    "text input needs vocab >= 256, model has {}",
                    w.config.vocab
                )));
            }
            if t.is_empty() {
                return Err(CliError::Config("input sequence is empty".into()));
            }
        }
        Ok(Self {
            weights,
            tokens,
            seed: cfg.seed,
        })
    }

    fn weights(&self) -> Result<&ModelWeights, CliError> {
        self.weights.as_ref().ok_or_else(|| CliError::Config("experiment needs a model".into()))
    }

    fn tokens(&self) -> Result<&[u32], CliError> {
        self.tokens.as_deref().ok_or_else(|| CliError::Config("experiment needs an input".into()))
    }

    fn x0(&self) -> Result<Matrix, CliError> {
        Ok(embed(self.weights()?, self.tokens()?)?)
    }
}

fn hidden_header(prefix: &[&str], width: usize, stem: &str) -> Vec<String> {
    let mut h = header(prefix);
    h.extend((0..width).map(|j| format!("{stem}{j}")));
    h
}

fn row_cells(leading: Vec<String>, values: &[f64]) -> Vec<String> {
    let mut cells = leading;
    cells.extend(values.iter().map(|&v| num(v)));
    cells
}

pub fn execute(cfg: &ExperimentConfig, out: &mut Staging) -> Result<(), CliError> {
    let ctx = Context::build(cfg)?;
    match &cfg.experiment {
        Experiment::Trace { hooks } => trace(&ctx, hooks, out),
        Experiment::Decompose { tokens, hooks } => decompose(&ctx, tokens.as_deref(), hooks, out),
        Experiment::Growth {
            normalize_input,
            max_interval,
            curve_path,
            hooks,
        } => {
            let curve = match curve_path {
                Some(p) => serde_json::from_slice::<MagnitudeCurve>(&fs::read(p)?)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
                None => input_magnitude_curve(ctx.weights()?, &ctx.x0()?, *normalize_input, hooks)?,
            };
            growth(&curve, *max_interval, out)
        }
        Experiment::Correlate { mode, hooks } => {
            let t = forward(ctx.weights()?, &ctx.x0()?, hooks)?;
            let c = interlayer_pearson(&t, *mode)?;
            let n = c.size();
            out.csv(
                "correlation.csv",
                &hidden_header(&["layer"], n, "layer"),
                (0..n).map(|a| row_cells(vec![a.to_string()], c.values.row(a))),
            )?;
            let excluded: usize = c.excluded.iter().flatten().sum::<usize>() / 2;
            let adjacent: Vec<f64> = (0..n - 1).map(|a| c.get(a, a + 1)).collect();
            out.json(
                "summary.json",
                &json!({"kind": "correlate", "mode": c.mode, "size": n,
                        "excluded_pairs": excluded, "adjacent": adjacent}),
            )
        }
        Experiment::Geometry { token, hooks } => {
            let t = forward(ctx.weights()?, &ctx.x0()?, hooks)?;
            let m = token.unwrap_or(t.seq_len() - 1);
            let g = component_geometry(&t, m)?;
            out.csv(
                "geometry.csv",
                &header(["layer", "att_ratio", "att_cosine", "mlp_ratio", "mlp_cosine"]),
                g.iter().map(|r| {
                    vec![
                        r.layer.to_string(),
                        num(r.att.ratio),
                        opt_num(r.att.cosine),
                        num(r.mlp.ratio),
                        opt_num(r.mlp.cosine),
                    ]
                }),
            )?;
            out.json(
                "summary.json",
                &json!({"kind": "geometry", "token": m, "layers": g.len(),
                        "final_att_cosine": g.last().and_then(|r| r.att.cosine)}),
            )
        }
        Experiment::Project {
            token,
            ledger_path,
            hooks,
        } => {
            let ledger = match ledger_path {
                Some(p) => {
                    let l: ContributionLedger = serde_json::from_slice(&fs::read(p)?)
                        .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                    l.validate()?;
                    l
                }
                None => {
                    let t = forward(ctx.weights()?, &ctx.x0()?, hooks)?;
                    build_ledger(&t, token.unwrap_or(t.seq_len() - 1))?
                }
            };
            project(&ledger, out)
        }
        Experiment::QleIntra {
            token,
            element,
            mode,
            span,
            halving_check,
            sweep,
            hooks,
        } => {
            let (w, x) = (ctx.weights()?, ctx.x0()?);
            let site = QleSite {
                token: *token,
                element: *element,
            };
            let qc = QleConfig {
                mode: *mode,
                span: *span,
                halving_check: *halving_check,
            };
            let r = qle_intra(w, &x, site, &qc, hooks)?;
            let mut summary = json!({"kind": "qle-intra", "span": span, "mode": mode,
                "lambda": num(r.lambda), "delta_in": num(r.delta_in), "delta_out": num(r.delta_out),
                "halving": r.halving.map(|h| json!({"lambda": num(h.lambda), "discrepancy": num(h.discrepancy)}))});
            if let Some(deltas) = sweep {
                let s = delta_sweep(w, &x, site, &qc, deltas, hooks)?;
                out.csv(
                    "delta_sweep.csv",
                    &header(["delta", "lambda"]),
                    s.points.iter().map(|(d, l)| vec![num(*d), num(*l)]),
                )?;
                summary["extrapolated"] = json!(s.extrapolated.map(num));
            }
            out.json("summary.json", &summary)
        }
        Experiment::QleField {
            layer,
            token,
            mode,
            observed,
            hooks,
        } => {
            let spec = FieldSpec {
                layer: *layer,
                token: *token,
                mode: *mode,
                observed: observed.unwrap_or(layer + 1),
            };
            let f = qle_elementwise_field(ctx.weights()?, &ctx.x0()?, &spec, hooks)?;
            let d = f.source_delta.len();
            out.csv(
                "field.csv",
                &hidden_header(&["token"], d, "e"),
                f.values.iter().enumerate().map(|(i, row)| row_cells(vec![i.to_string()], row)),
            )?;
            out.json(
                "field.json",
                &json!({"kind": "qle-field", "spec": spec, "labels": f.labels,
                    "source_delta": f.source_delta.iter().map(|&v| num(v)).collect::<Vec<_>>(),
                    "divergent": f.count(FieldLabel::Divergent),
                    "convergent": f.count(FieldLabel::Convergent),
                    "undefined": f.count(FieldLabel::Undefined)}),
            )
        }
        Experiment::QleIter {
            token,
            element,
            mode,
            steps,
        } => {
            let (w, prompt) = (ctx.weights()?, ctx.tokens()?);
            let spec = PerturbationSpec::on_embedding(token.unwrap_or(prompt.len() - 1), *element, *mode);
            let r = qle_iterative(w, prompt, &spec, *steps)?;
            let p = prompt.len();
            out.csv(
                "iterative.csv",
                &header(["step", "gap", "lambda", "baseline_token", "perturbed_token"]),
                (0..=*steps).map(|m| {
                    let lambda = if m == 0 { String::new() } else { num(r.lambdas[m - 1]) };
                    let tok = |t: &[u32]| if m == 0 { String::new() } else { t[p + m - 1].to_string() };
                    vec![
                        m.to_string(),
                        num(r.gaps[m]),
                        lambda,
                        tok(&r.baseline_tokens),
                        tok(&r.perturbed_tokens),
                    ]
                }),
            )?;
            out.json(
                "summary.json",
                &json!({"kind": "qle-iter", "steps": steps, "delta0": num(r.delta0),
                    "first_divergence": r.first_divergence,
                    "baseline_len": r.baseline_len, "perturbed_len": r.perturbed_len,
                    "baseline_tokens": r.baseline_tokens, "perturbed_tokens": r.perturbed_tokens,
                    "final_lambda": num(r.lambdas[steps - 1])}),
            )
        }
        Experiment::Suppress {
            grid,
            step,
            dataset_path,
            dataset,
            logits_path,
        } => suppress(&ctx, grid, *step, dataset_path.as_deref(), *dataset, logits_path.as_deref(), out),
        Experiment::LyapunovMap {
            map,
            x0,
            burn_in,
            iters,
        } => {
            let lambda = match *map {
                MapSpec::Logistic { r } => lyapunov_discrete_map(&LogisticMap { r }, *x0, *burn_in, *iters)?,
                MapSpec::Linear { c } => lyapunov_discrete_map(&LinearMap { c }, *x0, *burn_in, *iters)?,
            };
            out.json(
                "summary.json",
                &json!({"kind": "lyapunov-map", "map": map, "x0": x0, "burn_in": burn_in,
                        "iters": iters, "lambda": lambda}),
            )
        }
    }
}

fn trace(ctx: &Context, hooks: &Hooks, out: &mut Staging) -> Result<(), CliError> {
    let x = ctx.x0()?;
    let t = forward(ctx.weights()?, &x, hooks)?;
    let d = t.hidden();
    let mut rows = Vec::new();
    for (tap, s) in t.states.iter().enumerate() {
        for (i, r) in s.row_iter().enumerate() {
            rows.push(row_cells(vec![tap.to_string(), i.to_string()], r));
        }
    }
    out.csv("trace_states.csv", &hidden_header(&["tap", "token"], d, "h"), rows)?;
    let mut norms = Vec::new();
    for n in 0..t.layers() {
        for i in 0..t.seq_len() {
            let norm = |m: &Matrix| num(chaoscope_core::numerics::norm2(m.row(i)));
            norms.push(vec![n.to_string(), i.to_string(), norm(&t.states[n]), norm(&t.att[n]), norm(&t.mlp[n])]);
        }
    }
    out.csv(
        "trace_norms.csv",
        &header(["layer", "token", "input_norm", "att_norm", "mlp_norm"]),
        norms,
    )?;
    let diff = t
        .final_state()
        .as_slice()
        .iter()
        .zip(x.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    out.json(
        "summary.json",
        &json!({"kind": "trace", "layers": t.layers(), "seq_len": t.seq_len(), "hidden": d,
            "final_equals_input": t.final_state() == &x, "max_abs_final_minus_input": num(diff),
            "suppressed": t.suppressed, "injections": t.injections.len()}),
    )
}

fn decompose(ctx: &Context, tokens: Option<&[usize]>, hooks: &Hooks, out: &mut Staging) -> Result<(), CliError> {
    let t = forward(ctx.weights()?, &ctx.x0()?, hooks)?;
    let all: Vec<usize> = (0..t.seq_len()).collect();
    let tokens = tokens.unwrap_or(&all);
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &m in tokens {
        let l = build_ledger(&t, m)?;
        worst = worst.max(l.relative_error());
        rows.push(vec![
            m.to_string(),
            num(l.relative_error()),
            num(l.mass_relative_error()),
            l.interventions.len().to_string(),
        ]);
        out.json(&format!("ledger_token{m}.json"), &l)?;
    }
    out.csv(
        "decompose.csv",
        &header(["token", "relative_error", "mass_relative_error", "interventions"]),
        rows,
    )?;
    out.json(
        "summary.json",
        &json!({"kind": "decompose", "tokens": tokens, "max_relative_error": num(worst)}),
    )
}

fn growth(curve: &MagnitudeCurve, max_interval: Option<usize>, out: &mut Staging) -> Result<(), CliError> {
    let n = curve.points();
    let width = curve.per_token.first().map_or(0, Vec::len);
    out.csv(
        "curve.csv",
        &hidden_header(&["layer", "average"], width, "token"),
        (0..n).map(|l| row_cells(vec![l.to_string(), num(curve.average[l])], &curve.per_token[l])),
    )?;
    let g = fit_growth(curve)?;
    let seg = |name: &str, f: &chaoscope_core::numerics::LineFit, factor: f64| {
        vec![
            name.to_string(),
            f.range.start().to_string(),
            f.range.end().to_string(),
            num(f.slope),
            num(f.intercept),
            num(factor),
            num(f.sse),
        ]
    };
    out.csv(
        "fit.csv",
        &header(["segment", "start", "end", "slope", "intercept", "factor", "sse"]),
        [seg("left", &g.fit.left, g.left_factor), seg("right", &g.fit.right, g.right_factor)],
    )?;
    let s = cross_layer_std(curve, max_interval.unwrap_or((n - 1).min(8)))?;
    out.csv(
        "cross_layer_std.csv",
        &header(["interval", "std", "samples"]),
        s.entries.iter().map(|e| vec![e.interval.to_string(), num(e.std), e.samples.to_string()]),
    )?;
    out.json(
        "summary.json",
        &json!({"kind": "growth", "points": n, "breakpoint": g.fit.breakpoint,
            "left_slope": g.fit.left.slope, "right_slope": g.fit.right.slope,
            "left_factor": g.left_factor, "right_factor": g.right_factor,
            "total_sse": g.fit.total_sse, "omitted_intervals": s.omitted}),
    )
}

fn percent(v: f64) -> String {
    format!("{:.4}", 100.0 * v)
}

fn project(ledger: &ContributionLedger, out: &mut Staging) -> Result<(), CliError> {
    let p = projection_decomposition(ledger)?;
    let mut rows = vec![vec!["init".to_string(), String::new(), num(p.initial)]];
    for (layer, f) in p.att.iter().enumerate() {
        rows.push(vec!["att".into(), layer.to_string(), num(*f)]);
    }
    for (layer, f) in p.mlp.iter().enumerate() {
        rows.push(vec!["mlp".into(), layer.to_string(), num(*f)]);
    }
    if !ledger.interventions.is_empty() {
        rows.push(vec!["interventions".into(), String::new(), num(p.interventions)]);
    }
    out.csv("projection.csv", &header(["component", "layer", "fraction"]), rows)?;
    out.json(
        "summary.json",
        &json!({"kind": "project", "token": p.token, "layers": p.att.len(),
            "mlp_total": p.mlp_total, "att_total": p.att_total, "init": p.initial,
            "interventions": p.interventions, "total": p.total(),
            "mlp_percent": percent(p.mlp_total), "att_percent": percent(p.att_total),
            "init_percent": percent(p.initial)}),
    )
}

fn suppress(
    ctx: &Context,
    grid: &Option<Vec<f64>>,
    step: Option<f64>,
    dataset_path: Option<&std::path::Path>,
    params: Option<DatasetParams>,
    logits_path: Option<&std::path::Path>,
    out: &mut Staging,
) -> Result<(), CliError> {
    let grid = match (grid, step) {
        (Some(g), None) => g.clone(),
        (None, Some(s)) if s > 0.0 && s.is_finite() => {
            let count = (100.0 / s).floor() as usize;
            (0..=count).map(|i| i as f64 * s).collect()
        }
        _ => return Err(CliError::Config("suppress needs a positive `step` or a `grid`".into())),
    };
    let items = match (dataset_path, params) {
        (Some(p), None) => read_dataset(p)?,
        (None, Some(d)) => generate_toy_dataset(ctx.weights()?, ctx.seed, d.size, d.prompt_len, d.alphabet_size)?,
        _ => unreachable!("validated"),
    };
    let report = match logits_path {
        Some(p) => report_from_logits(&items, &read_logit_records(p)?)?,
        None => sweep_suppression(ctx.weights()?, &items, &grid)?,
    };
    let layers = report.rows.iter().map(|r| r.zeroed_per_layer.len()).max().unwrap_or(0);
    let mut h = header(["k", "correct", "incorrect", "irrelevant", "top1_agreement", "mean_kl"]);
    h.extend((0..layers).map(|l| format!("zeroed_l{l}")));
    out.csv(
        "suppression.csv",
        &h,
        report.rows.iter().map(|r| {
            let mut cells = vec![
                num(r.k),
                r.correct.to_string(),
                r.incorrect.to_string(),
                r.irrelevant.to_string(),
                num(r.top1_agreement),
                num(r.mean_kl),
            ];
            cells.extend(r.zeroed_per_layer.iter().map(usize::to_string));
            cells
        }),
    )?;
    out.json(
        "summary.json",
        &json!({"kind": "suppress", "items": report.items, "grid": grid, "rows": report.rows.len(),
            "external_logits": logits_path.is_some()}),
    )
}
