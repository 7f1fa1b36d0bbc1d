//! Reproducible experiment runner: parse a flat key=value config, dispatch
//! the experiment, write CSV/JSON artifacts plus a pass/fail summary.
//!
//! Exit codes: 0 on success, 1 if any declared invariant fails, 2 on config
//! validation failure (with line-level diagnostics on stderr).

mod config;
mod experiments;
mod plotdata;
mod verify;

use clap::{Parser, Subcommand};
use config::{Config, ConfigError};
use experiments::ExperimentOutput;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "ahmass", about = "Experiment runner for the radial hyperbolic-mass laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Path to the experiment config (flat key = value with [sections]).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides [experiment] out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for independent cells (overrides [experiment] jobs).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Random seed (overrides [experiment] seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy, PartialEq)]
enum Command {
    /// Mass-table experiments (kind = mass_table)
    Mass,
    /// Flow runs (kind = flow_run)
    Flow,
    /// Cutoff experiments (kind = cutoff_drift or two_radius)
    Cutoff,
    /// Heat-kernel runs (kind = kernel)
    Kernel,
    /// Lower-bound certificate lattice (kind = certificate)
    Certificate,
    /// Full invariant suite (kind = verify_all)
    Verify,
}

fn kind_matches(cmd: Command, kind: &str) -> bool {
    matches!(
        (cmd, kind),
        (Command::Mass, "mass_table")
            | (Command::Flow, "flow_run")
            | (Command::Cutoff, "cutoff_drift")
            | (Command::Cutoff, "two_radius")
            | (Command::Kernel, "kernel")
            | (Command::Certificate, "certificate")
            | (Command::Verify, "verify_all")
    )
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            2
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, ConfigError> {
    let path = cli.config.as_ref().ok_or(ConfigError {
        line: None,
        message: "--config PATH is required".into(),
    })?;
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        line: None,
        message: format!("cannot read config {}: {e}", path.display()),
    })?;
    let cfg = Config::parse(&text)?;

    let kind = cfg.require_str("experiment", "kind")?;
    if !kind_matches(cli.command, &kind) {
        return Err(ConfigError {
            line: None,
            message: format!("config kind '{kind}' does not belong to this subcommand"),
        });
    }
    // read the global parameters from the config first (so the keys are
    // consumed and echoed), then let flags override them
    let _ = cfg.get_u32("experiment", "n", 3)?;
    let mut seed = cfg.get_usize("experiment", "seed", 42)? as u64;
    if let Some(s) = cli.seed {
        cfg.resolved.borrow_mut().insert("experiment.seed".into(), format!("{s} (flag)"));
        seed = s;
    }
    let mut jobs = cfg.get_usize("experiment", "jobs", 1)?;
    if let Some(j) = cli.jobs {
        cfg.resolved.borrow_mut().insert("experiment.jobs".into(), format!("{j} (flag)"));
        jobs = j;
    }
    let mut out_dir = PathBuf::from(cfg.get_str("experiment", "out", "out"));
    if let Some(p) = &cli.out {
        cfg.resolved
            .borrow_mut()
            .insert("experiment.out".into(), format!("{} (flag)", p.display()));
        out_dir = p.clone();
    }

    if jobs > 0 {
        // ignore failure if a global pool already exists (repeated calls in tests)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }

    let output = match kind.as_str() {
        "mass_table" => experiments::mass_table(&cfg)?,
        "flow_run" => experiments::flow_run(&cfg)?,
        "cutoff_drift" => experiments::cutoff_drift(&cfg)?,
        "two_radius" => experiments::two_radius(&cfg)?,
        "kernel" => experiments::kernel(&cfg)?,
        "certificate" => experiments::certificate(&cfg)?,
        "verify_all" => verify::run_verify(&cfg, seed)?,
        other => {
            return Err(ConfigError {
                line: None,
                message: format!("unknown experiment kind '{other}'"),
            })
        }
    };
    cfg.finish()?;

    std::fs::create_dir_all(&out_dir).map_err(|e| ConfigError {
        line: None,
        message: format!("cannot create output directory {}: {e}", out_dir.display()),
    })?;

    // a completed experiment with nothing plottable is an invariant
    // failure (exit 1), not a configuration problem
    if output.series.is_empty() {
        eprintln!("experiment produced no plottable outputs");
        return Ok(1);
    }
    write_outputs(&out_dir, &kind, &cfg, seed, &output).map_err(|e| ConfigError {
        line: None,
        message: format!("cannot write outputs: {e}"),
    })?;

    let all_pass = output.checks.iter().all(|c| c.pass);
    for c in &output.checks {
        println!("{}: {} ({})", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
    }
    Ok(if all_pass { 0 } else { 1 })
}

fn write_outputs(
    out_dir: &std::path::Path,
    kind: &str,
    cfg: &Config,
    seed: u64,
    output: &ExperimentOutput,
) -> std::io::Result<()> {
    for (name, bytes) in &output.files {
        std::fs::write(out_dir.join(name), bytes)?;
    }
    std::fs::write(out_dir.join("plot_data.csv"), plotdata::plot_csv(&output.series))?;
    std::fs::write(out_dir.join("plot_readme.md"), plotdata::plot_readme(kind, &output.series))?;

    // summary.json: every resolved parameter, key scalars, per-check status
    let mut params = serde_json::Map::new();
    for (k, v) in cfg.resolved.borrow().iter() {
        params.insert(k.clone(), serde_json::Value::String(v.clone()));
    }
    let mut scalars = serde_json::Map::new();
    for (k, v) in &output.scalars {
        scalars.insert(
            k.clone(),
            serde_json::Number::from_f64(*v)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
        );
    }
    let checks: Vec<serde_json::Value> = output
        .checks
        .iter()
        .map(|c| {
            serde_json::json!({
                "name": c.name,
                "pass": c.pass,
                "detail": c.detail,
            })
        })
        .collect();
    let all_pass = output.checks.iter().all(|c| c.pass);
    let summary = serde_json::json!({
        "kind": kind,
        "seed": seed,
        "parameters": serde_json::Value::Object(params),
        "scalars": serde_json::Value::Object(scalars),
        "checks": checks,
        "exit": if all_pass { 0 } else { 1 },
    });
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    std::fs::write(out_dir.join("summary.json"), text)
}
