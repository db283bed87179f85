use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dfp_core::fictitious_play::{evaluate_on, evaluation_noise, run_with};
use dfp_core::game_model::lq_game;
use dfp_core::lq_oracle::{compare_profiles, contraction_factor, solve_riccati, BenchmarkReport};
use dfp_core::policy::{checkpoint_file_name, PlayerPolicy};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::export;
use crate::{exit_code, Exit};

/// Sample paths written to `control_samples.csv`.
const CONTROL_SAMPLE_PATHS: usize = 16;

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

pub fn resolve(config: &Path, overrides: &Overrides) -> Result<ExperimentConfig, Exit> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(out) = &overrides.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = overrides.seed {
        cfg.run.seed = seed;
    }
    if let Some(jobs) = overrides.jobs {
        cfg.run.jobs = jobs;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Prints the contraction diagnostics. Returns the exit code: nonzero only
/// with `strict` when the factor is at least 1.
pub fn check(cfg: &ExperimentConfig, strict: bool, out: &mut dyn Write) -> Result<i32, Exit> {
    let ric = solve_riccati(&cfg.lq, cfg.oracle_grid)?;
    let rep = contraction_factor(&cfg.lq, &ric)?;
    writeln!(out, "players             {}", cfg.lq.n())?;
    writeln!(out, "K range             [{:.6}, {:.6}]", rep.k_min, rep.k_max)?;
    writeln!(out, "gamma_min           {:.6}", rep.gamma_min)?;
    writeln!(out, "constant C          {:.6}", rep.constant)?;
    writeln!(out, "factor              {:.6}", rep.factor)?;
    writeln!(out, "converges           {}", rep.converges)?;
    match rep.regimes.horizon_threshold {
        Some(t) => writeln!(out, "horizon threshold   {t:.6}")?,
        None => writeln!(out, "horizon threshold   none below 1024")?,
    }
    writeln!(out, "short horizon       {}", rep.regimes.short_horizon)?;
    writeln!(out, "strong reversion    {}", rep.regimes.strong_reversion)?;
    writeln!(out, "small coefficients  {}", rep.regimes.small_coefficients)?;
    Ok(if strict && !rep.converges {
        exit_code::NOT_CONTRACTIVE
    } else {
        exit_code::OK
    })
}

fn jsonl_line<T: Serialize>(w: &mut impl Write, value: &T) -> std::io::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")
}

#[derive(Serialize)]
struct RunSummary<'a> {
    stop_reason: &'a str,
    stages: usize,
}

/// Runs fictitious play, writes the artifact directory and evaluates the
/// result against the exact equilibrium.
pub fn train(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<BenchmarkReport, Exit> {
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.json"), cfg.to_json())?;
    let mut stages = BufWriter::new(File::create(dir.join("stages.jsonl"))?);
    let mut history = BufWriter::new(File::create(dir.join("history.jsonl"))?);
    let game = lq_game(cfg.lq.clone())?;

    writeln!(out, "{:>5}  {:>12}  costs", "stage", "err")?;
    let artifact = run_with(&game, &cfg.run, |report, records| {
        jsonl_line(&mut stages, report)?;
        stages.flush()?;
        for r in records {
            jsonl_line(&mut history, r)?;
        }
        history.flush()?;
        let err = if report.err.is_finite() {
            format!("{:.6e}", report.err)
        } else {
            "inf".into()
        };
        let costs: Vec<String> = report.costs.iter().map(|c| format!("{c:.6}")).collect();
        writeln!(out, "{:>5}  {:>12}  {}", report.stage, err, costs.join(" "))?;
        Ok(())
    })?;
    for p in &artifact.policies {
        p.save(dir)?;
    }
    let summary = RunSummary {
        stop_reason: artifact.stop_reason.as_str(),
        stages: artifact.reports.len(),
    };
    std::fs::write(dir.join("run.json"), serde_json::to_string_pretty(&summary)?)?;
    writeln!(out, "stopped after {} stages: {}", summary.stages, summary.stop_reason)?;
    evaluate(cfg, dir, out)
}

#[derive(Serialize)]
struct EvaluationFile<'a> {
    n_eval_paths: usize,
    noise_seed: u64,
    passes: usize,
    dfp_costs: &'a [f64],
    dfp_std_errors: &'a [f64],
    benchmark: &'a BenchmarkReport,
}

fn load_policies(dir: &Path, n: usize) -> Result<Vec<PlayerPolicy>, Exit> {
    (0..n)
        .map(|i| {
            if !dir.join(checkpoint_file_name(i)).exists() {
                return Err(Exit::failure(format!("missing checkpoint {}", dir.join(checkpoint_file_name(i)).display())));
            }
            PlayerPolicy::load(dir, i).map_err(Exit::from)
        })
        .collect()
}

/// Scores the checkpoints in `dir` on fresh paths and writes the report
/// and plot data next to them.
pub fn evaluate(cfg: &ExperimentConfig, dir: &Path, out: &mut dyn Write) -> Result<BenchmarkReport, Exit> {
    let policies = load_policies(dir, cfg.lq.n())?;
    let game = lq_game(cfg.lq.clone())?;
    let noise = evaluation_noise(&cfg.lq.dims, &cfg.run);
    let evaluation = evaluate_on(&game, &policies, &noise)?;
    let ric = solve_riccati(&cfg.lq, cfg.oracle_grid)?;
    let cmp = compare_profiles(&cfg.lq, &ric, &noise, evaluation.controls.clone())?;

    let file = EvaluationFile {
        n_eval_paths: noise.n_paths(),
        noise_seed: noise.seed(),
        passes: evaluation.passes,
        dfp_costs: &evaluation.costs,
        dfp_std_errors: &evaluation.std_errors,
        benchmark: &cmp.report,
    };
    std::fs::write(dir.join("evaluation.json"), serde_json::to_string_pretty(&file)?)?;
    let stages_path = dir.join("stages.jsonl");
    if stages_path.exists() {
        export::write_costs_by_stage(&dir.join("costs_by_stage.csv"), &export::read_stages(&stages_path)?)?;
    }
    export::write_trajectory_errors(&dir.join("trajectory_errors.csv"), &cmp.gaps)?;
    export::write_control_samples(&dir.join("control_samples.csv"), &cmp, CONTROL_SAMPLE_PATHS)?;

    writeln!(out, "{:>6}  {:>12}  {:>12}  {:>10}", "player", "J_dfp", "J_true", "error")?;
    for c in &cmp.report.costs {
        let kind = if c.relative { "" } else { " (abs)" };
        writeln!(out, "{:>6}  {:>12.6}  {:>12.6}  {:>10.4e}{kind}", c.player, c.dfp_cost, c.oracle_cost, c.error)?;
    }
    writeln!(out, "max cost error      {:.4e}", cmp.report.max_cost_error)?;
    writeln!(out, "trajectory error    {:.4e}", cmp.report.trajectory_error)?;
    Ok(cmp.report)
}

/// Writes the Riccati grids to `riccati.csv` in the output directory.
pub fn oracle(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<(), Exit> {
    let ric = solve_riccati(&cfg.lq, cfg.oracle_grid)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let path = cfg.output_dir.join("riccati.csv");
    export::write_riccati(&path, &ric)?;
    writeln!(out, "K(0) = {:.10}, eta(0) = {:.10}", ric.k[0], ric.eta[0])?;
    writeln!(out, "wrote {} grid points to {}", ric.times.len(), path.display())?;
    Ok(())
}
