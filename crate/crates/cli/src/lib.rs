//! Scenario runner: reads a JSON scenario, runs one action and writes
//! `report.json` plus CSV outputs into a directory.

pub mod config;
pub mod report;
pub mod run;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::Value;

use crate::config::ScenarioConfig;
use crate::report::{config as cfg_num, int, Obj, Provenance, SCHEMA_VERSION};

/// Exit status for a scenario whose verdict is a failure.
pub const EXIT_FAILED_VERDICT: i32 = 2;

#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: Value,
    pub output_dir: PathBuf,
}

#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,
}

fn config_section(cfg: &ScenarioConfig) -> Value {
    let o = Obj::new()
        .set("eps", cfg_num(cfg.eps()))
        .set("delta", cfg_num(cfg.delta))
        .set("c", cfg_num(cfg.c))
        .set("seed", int(cfg.seed, Provenance::Config))
        .set("s_max", cfg_num(cfg.s_max()))
        .set("trials", int(cfg.trials() as u64, Provenance::Config))
        .set("tol", cfg_num(cfg.tol))
        .set("fail_threshold", cfg_num(cfg.fail_threshold));
    o.build()
}

/// Runs a parsed scenario and writes `report.json`.
pub fn run_config(mut cfg: ScenarioConfig, ov: &Overrides) -> Result<Outcome> {
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    let sys = cfg.validate()?;
    let out = ov
        .output_dir
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = ov.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    log::info!("running {} on {}", cfg.action.name(), sys.label);
    let result = pool.install(|| run::run_action(&cfg, &sys, &out))?;

    let mut report = Obj::new()
        .set("schema_version", SCHEMA_VERSION)
        .set("timestamp", chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
        .set("action", cfg.action.name())
        .set("system", sys.label.as_str())
        .set("n_fields", int(sys.spec.n_fields as u64, Provenance::Config))
        .set("config", config_section(&cfg))
        .set("results", result.results)
        .set("passed", serde_json::json!(result.passed))
        .set("warnings", serde_json::json!(result.warnings));
    let mut files = result.files;
    files.push("report.json".into());
    report.insert("files", serde_json::json!(files));
    let report = report.build();
    write_report(&out.join("report.json"), &report)?;
    for w in report["warnings"].as_array().into_iter().flatten() {
        log::warn!("{}", w.as_str().unwrap_or_default());
    }
    Ok(Outcome {
        exit_code: if result.passed == Some(false) { EXIT_FAILED_VERDICT } else { 0 },
        report,
        output_dir: out,
    })
}

pub fn write_report(path: &Path, report: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
