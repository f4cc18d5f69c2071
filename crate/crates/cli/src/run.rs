//! Scenario actions. Each returns the `results` section of the report and
//! writes its CSV files into the output directory.

use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Value};

use weaknull::conditions::{ModelFit, TrialSummary, CLASSIFY_BLOWUP_THRESHOLD};
use weaknull::export::{save_grid, save_trace, save_trajectory};
use weaknull::ode::IntegratorOptions;
use weaknull::wave1d::{evolve_with, DerivativeNorms, EvolveOptions, GridStatus};
use weaknull::{
    blowup_time_estimate, certify_hamiltonian, check_condition_1, classical_null_condition,
    classify_growth, compare_to_asymptotic, hamiltonian_drift, hamiltonian_value,
    integrate_with, radiation_trace, CharacteristicData, CharacteristicGrid, ClassificationReport,
    Condition1Params, DualVector, Forcing, HamiltonianCertificate, Status, Trajectory, Verdict,
};

use crate::config::{Action, ResolvedSystem, ScenarioConfig};
use crate::report::{certificate, config, fitted, int, measured, opt, vector, Obj, Provenance};

/// What an action produced.
pub struct ActionOutput {
    pub results: Value,
    /// Files written, relative to the output directory.
    pub files: Vec<String>,
    /// `Some(false)` makes the run exit with status 2.
    pub passed: Option<bool>,
    pub warnings: Vec<String>,
}

pub fn run_action(cfg: &ScenarioConfig, sys: &ResolvedSystem, out: &Path) -> Result<ActionOutput> {
    match cfg.action {
        Action::Asymptotic => asymptotic(cfg, sys, out),
        Action::Classify => classify(cfg, sys, out),
        Action::Condition1 => condition1(cfg, sys),
        Action::Wave => wave(cfg, sys, out),
        Action::Trace => trace(cfg, sys, out),
        Action::FullPipeline => full_pipeline(cfg, sys, out),
    }
}

fn status_json(s: &Status) -> Value {
    match *s {
        Status::Completed { s_max } => json!({"status": "completed", "s_max": measured(s_max)}),
        Status::Blowup { s_estimate } => json!({"status": "blowup", "s_estimate": fitted(s_estimate)}),
        Status::StepUnderflow { s_last } => json!({"status": "step_underflow", "s_last": measured(s_last)}),
    }
}

fn verdict_json(v: &Verdict) -> Value {
    let o = Obj::new().set("kind", v.name());
    match *v {
        Verdict::ClassicalNull => o,
        Verdict::BoundedStable { c_tilde } | Verdict::Unbounded { c_tilde } => o.set("c_tilde", measured(c_tilde)),
        Verdict::LinearGrowth { rate } | Verdict::ExponentialGrowth { rate } | Verdict::SuperExponential { rate } => {
            o.set("rate", fitted(rate))
        }
        Verdict::Blowup { s_star } => o.set("s_star", fitted(s_star)),
    }
    .build()
}

fn fit_json(f: &ModelFit) -> Value {
    json!({
        "model": f.model,
        "a": fitted(f.a),
        "b": fitted(f.b),
        "rss": fitted(f.rss),
        "r_squared": fitted(f.r_squared),
    })
}

fn trial_json(t: &TrialSummary) -> Value {
    Obj::new()
        .set("id", int(t.id as u64, Provenance::Config))
        .set("data", vector(&t.data, Provenance::Config))
        .set("forcing", json!(t.forcing))
        .set("status", status_json(&t.status))
        .set("sup_abs", measured(t.sup_abs))
        .set("sup_metric", opt(t.sup_metric, Provenance::Measured))
        .set("s_star", opt(t.s_star, Provenance::Fitted))
        .set("within_certificate", json!(t.within_certificate))
        .build()
}

fn certificate_json(c: &HamiltonianCertificate) -> Value {
    json!({
        "status": c.status,
        "drift_bound": certificate(c.drift_bound),
        "lambda_min": certificate(c.lambda_min),
        "lambda_max": certificate(c.lambda_max),
        "k1": certificate(c.k1),
        "k2": certificate(c.k2),
        "c_tilde_bound": certificate(c.c_tilde_bound),
    })
}

fn classification_json(r: &ClassificationReport, include_trials: bool) -> Value {
    let mut o = Obj::new()
        .set("verdict", verdict_json(&r.verdict))
        .set("c_tilde_empirical", opt(r.c_tilde_empirical, Provenance::Measured))
        .set("n_trials", int(r.trials.len() as u64, Provenance::Config))
        .set("fits", Value::Array(r.fits.iter().map(fit_json).collect()))
        .set("passed", json!(r.passed));
    if let Some(w) = r.worst_trial {
        o.insert("worst_trial", trial_json(&r.trials[w]));
    }
    if let Some(c) = &r.certificate {
        o.insert("certificate", certificate_json(c));
    }
    let failures = |pred: &dyn Fn(&TrialSummary) -> bool| r.trials.iter().filter(|t| pred(t)).count() as u64;
    o.insert("blowups", int(failures(&|t| t.s_star.is_some()), Provenance::Measured));
    o.insert(
        "certificate_violations",
        int(failures(&|t| t.within_certificate == Some(false)), Provenance::Measured),
    );
    if include_trials {
        o.insert("trials", Value::Array(r.trials.iter().map(trial_json).collect()));
    }
    o.build()
}

fn trajectory_json(t: &Trajectory) -> Value {
    Obj::new()
        .set("status", status_json(&t.status))
        .set("final_s", measured(t.last().s))
        .set("final_phi", vector(&t.last().phi, Provenance::Measured))
        .set("sup_abs", measured(t.stats.max_abs))
        .set("accepted_steps", int(t.stats.accepted_steps as u64, Provenance::Measured))
        .set("rejected_steps", int(t.stats.rejected_steps as u64, Provenance::Measured))
        .set("samples", int(t.samples.len() as u64, Provenance::Measured))
        .build()
}

fn asymptotic(cfg: &ScenarioConfig, sys: &ResolvedSystem, out: &Path) -> Result<ActionOutput> {
    let phi0 = cfg.phi0.clone().unwrap_or_else(|| vec![cfg.eps(); sys.spec.n_fields]);
    let opts = IntegratorOptions::with_tol(cfg.tol);
    let traj = integrate_with(&sys.asymptotic, &phi0, cfg.s_max(), &Forcing::zero(), &opts)?;
    save_trajectory(&out.join("trajectory.csv"), &traj)?;
    let mut o = Obj::new()
        .set("phi0", vector(&phi0, Provenance::Config))
        .set("trajectory", trajectory_json(&traj))
        .set("blowup_time_fit", opt(blowup_time_estimate(&traj), Provenance::Fitted));
    if let Some((_, ham)) = sys.hamiltonian() {
        let h0 = hamiltonian_value(ham, &DualVector(phi0.clone()))?;
        let drift = traj
            .samples
            .iter()
            .map(|p| hamiltonian_value(ham, &DualVector(p.phi.clone())).map(|h| (h - h0).abs()))
            .try_fold(0.0f64, |m, h| h.map(|h| m.max(h)))?;
        o.insert("hamiltonian_initial", measured(h0));
        o.insert("hamiltonian_max_drift", measured(drift));
    }
    Ok(ActionOutput {
        results: o.build(),
        files: vec!["trajectory.csv".into()],
        passed: None,
        warnings: Vec::new(),
    })
}

fn classify(cfg: &ScenarioConfig, sys: &ResolvedSystem, out: &Path) -> Result<ActionOutput> {
    if classical_null_condition(&sys.spec) {
        let o = Obj::new().set("verdict", verdict_json(&Verdict::ClassicalNull));
        return Ok(ActionOutput {
            results: o.build(),
            files: Vec::new(),
            passed: Some(true),
            warnings: Vec::new(),
        });
    }
    let r = classify_growth(&sys.asymptotic, cfg.eps(), cfg.s_max(), cfg.trials(), cfg.seed)?;
    let mut files = Vec::new();
    if let Some(w) = r.worst_trial {
        let opts = IntegratorOptions {
            blowup_threshold: CLASSIFY_BLOWUP_THRESHOLD,
            ..IntegratorOptions::with_tol(cfg.tol)
        };
        let traj = integrate_with(&sys.asymptotic, &r.trials[w].data, cfg.s_max(), &Forcing::zero(), &opts)?;
        save_trajectory(&out.join("worst_trajectory.csv"), &traj)?;
        files.push("worst_trajectory.csv".into());
    }
    Ok(ActionOutput {
        results: classification_json(&r, false),
        files,
        passed: Some(!r.verdict.is_failure()),
        warnings: r.warnings,
    })
}

fn condition1_params(cfg: &ScenarioConfig) -> Condition1Params {
    Condition1Params {
        fail_threshold: cfg.fail_threshold,
        tol: cfg.tol,
        ..Condition1Params::new(cfg.eps(), cfg.delta, cfg.c, cfg.trials(), cfg.s_max(), cfg.seed)
    }
}

fn condition1(cfg: &ScenarioConfig, sys: &ResolvedSystem) -> Result<ActionOutput> {
    let r = check_condition_1(&sys.asymptotic, &condition1_params(cfg))?;
    Ok(ActionOutput {
        results: classification_json(&r, true),
        files: Vec::new(),
        passed: Some(r.passed != Some(false) && !r.verdict.is_failure()),
        warnings: r.warnings,
    })
}

fn norms_json(n: &DerivativeNorms) -> Value {
    json!({
        "psi_u": measured(n.psi_u),
        "psi_v": measured(n.psi_v),
        "phi": measured(n.phi),
    })
}

fn grid_status_json(s: &GridStatus) -> Value {
    match *s {
        GridStatus::Completed => json!({"status": "completed"}),
        GridStatus::Blowup { u, v } => json!({"status": "blowup", "u": measured(u), "v": measured(v)}),
    }
}

fn solve_grid(cfg: &ScenarioConfig, sys: &ResolvedSystem, h: f64) -> Result<CharacteristicGrid> {
    let w = &cfg.wave;
    let data = CharacteristicData::bumps(
        (w.u_range[0], w.u_range[1]),
        (w.v_range[0], w.v_range[1]),
        &w.amplitudes_for(sys.spec.n_fields),
        w.center(),
        w.width,
    )?;
    let opts = EvolveOptions {
        blowup_threshold: Some(w.blowup_threshold),
        ..EvolveOptions::default()
    };
    Ok(evolve_with(&sys.spec, &data, h, &opts)?)
}

fn grid_json(grid: &CharacteristicGrid) -> Value {
    Obj::new()
        .set("h", config(grid.h))
        .set("nu", int(grid.nu as u64, Provenance::Config))
        .set("nv", int(grid.nv as u64, Provenance::Config))
        .set("status", grid_status_json(&grid.status))
        .set("derivative_norms", norms_json(&grid.derivative_norms()))
        .build()
}

fn wave(cfg: &ScenarioConfig, sys: &ResolvedSystem, out: &Path) -> Result<ActionOutput> {
    let grid = solve_grid(cfg, sys, cfg.wave.h)?;
    let mut files = Vec::new();
    if cfg.wave.export_grid {
        save_grid(out, "grid", &grid)?;
        files.extend(["grid.csv".to_string(), "grid.meta.json".to_string()]);
    }
    Ok(ActionOutput {
        results: json!({ "grid": grid_json(&grid) }),
        files,
        passed: None,
        warnings: Vec::new(),
    })
}

/// Traces every requested ray, compares with the asymptotic system and, for
/// Hamiltonian systems, tracks the Hamiltonian along the trace.
fn trace_rays(
    cfg: &ScenarioConfig,
    sys: &ResolvedSystem,
    grid: &CharacteristicGrid,
    out: Option<&Path>,
    files: &mut Vec<String>,
    warnings: &mut Vec<String>,
) -> Result<(Value, Vec<Option<f64>>)> {
    let mut rays = Vec::new();
    let mut deviations = Vec::new();
    for (k, &u) in cfg.wave.u_fixed().iter().enumerate() {
        let mut o = Obj::new().set("u_fixed", config(u));
        if !grid.is_completed() {
            warnings.push(format!("grid blew up; ray u = {u} not traced"));
            deviations.push(None);
            rays.push(o.build());
            continue;
        }
        let tr = radiation_trace(grid, u).with_context(|| format!("tracing u = {u}"))?;
        if let Some(dir) = out {
            let name = format!("trace_u{k}.csv");
            save_trace(&dir.join(&name), &tr)?;
            files.push(name);
        }
        let (s0, s1) = tr.s_range();
        o.insert("s_range", vector(&[s0, s1], Provenance::Measured));
        // Default: the last sample leaving a full decade of r.
        let s_start = cfg.wave.s_start.unwrap_or_else(|| {
            let latest = s1 - std::f64::consts::LN_10;
            tr.samples.iter().map(|p| p.s).filter(|&s| s <= latest).last().unwrap_or(s0)
        });
        o.insert("s_start", config(s_start));
        match compare_to_asymptotic(&tr, &sys.asymptotic, s_start) {
            Ok(c) => {
                o.insert("sup_relative_deviation", measured(c.sup_relative_deviation));
                o.insert("eps", measured(c.eps));
                deviations.push(Some(c.sup_relative_deviation));
            }
            Err(e) => {
                warnings.push(format!("ray u = {u}: {e}"));
                deviations.push(None);
            }
        }
        if let Some((_, ham)) = sys.hamiltonian() {
            let d = hamiltonian_drift(&tr, ham)?;
            o.insert(
                "hamiltonian",
                Obj::new()
                    .set("tail_start", config(d.tail_start))
                    .set("tail_mean", measured(d.tail_mean))
                    .set("tail_oscillation", measured(d.tail_oscillation))
                    .set("relative_tail_oscillation", measured(d.relative_tail_oscillation))
                    .set("decay_rate", opt(d.decay_rate, Provenance::Fitted)),
            );
        }
        rays.push(o.build());
    }
    Ok((Value::Array(rays), deviations))
}

fn trace_section(
    cfg: &ScenarioConfig,
    sys: &ResolvedSystem,
    out: &Path,
    files: &mut Vec<String>,
    warnings: &mut Vec<String>,
) -> Result<Value> {
    let grid = solve_grid(cfg, sys, cfg.wave.h)?;
    let mut o = Obj::new().set("grid", grid_json(&grid));
    if cfg.wave.export_grid {
        save_grid(out, "grid", &grid)?;
        files.extend(["grid.csv".to_string(), "grid.meta.json".to_string()]);
    }
    let (rays, coarse) = trace_rays(cfg, sys, &grid, Some(out), files, warnings)?;
    o.insert("rays", rays);
    if cfg.wave.refine {
        drop(grid);
        let fine = solve_grid(cfg, sys, 0.5 * cfg.wave.h)?;
        let (fine_rays, fine_dev) = trace_rays(cfg, sys, &fine, None, &mut Vec::new(), warnings)?;
        let ratios: Vec<Value> = coarse
            .iter()
            .zip(&fine_dev)
            .map(|(c, f)| match (c, f) {
                (Some(c), Some(f)) if *f > 0.0 => measured(c / f),
                _ => Value::Null,
            })
            .collect();
        o.insert(
            "refined",
            Obj::new()
                .set("grid", grid_json(&fine))
                .set("rays", fine_rays)
                .set("deviation_ratio", Value::Array(ratios)),
        );
    }
    Ok(o.build())
}

fn trace(cfg: &ScenarioConfig, sys: &ResolvedSystem, out: &Path) -> Result<ActionOutput> {
    let mut files = Vec::new();
    let mut warnings = Vec::new();
    let results = trace_section(cfg, sys, out, &mut files, &mut warnings)?;
    Ok(ActionOutput {
        results,
        files,
        passed: None,
        warnings,
    })
}

fn full_pipeline(cfg: &ScenarioConfig, sys: &ResolvedSystem, out: &Path) -> Result<ActionOutput> {
    let mut files = Vec::new();
    let mut warnings = Vec::new();
    let mut o = Obj::new().set("classical_null", json!(classical_null_condition(&sys.spec)));
    if let Some((alg, ham)) = sys.hamiltonian() {
        let c = certify_hamiltonian(alg, ham, cfg.eps(), cfg.delta, cfg.c)?;
        o.insert("certificate", certificate_json(&c));
    }
    let r = check_condition_1(&sys.asymptotic, &condition1_params(cfg))?;
    let passed = r.passed != Some(false) && !r.verdict.is_failure();
    o.insert("condition1", classification_json(&r, false));
    warnings.extend(r.warnings.iter().cloned());
    o.insert("wave", trace_section(cfg, sys, out, &mut files, &mut warnings)?);
    Ok(ActionOutput {
        results: o.build(),
        files,
        passed: Some(passed),
        warnings,
    })
}
