//! CSV exports. Every file has a fixed header; column counts never vary.

use std::path::Path;

use dfp_core::lq_oracle::{Comparison, RiccatiSolution, TrajectoryGap};
use serde::Deserialize;

use crate::Exit;

pub const RICCATI_HEADER: [&str; 5] = ["t", "K", "eta", "gamma", "kappa"];
pub const COSTS_BY_STAGE_HEADER: [&str; 4] = ["stage", "player", "cost", "err"];
pub const TRAJECTORY_ERRORS_HEADER: [&str; 6] = ["player", "step", "t", "mean_error", "std_error", "mean_abs_error"];
pub const CONTROL_SAMPLES_HEADER: [&str; 7] = ["path", "step", "player", "x_true", "x_dfp", "alpha_true", "alpha_dfp"];

/// One line of `stages.jsonl` as read back from disk.
#[derive(Debug, Clone, Deserialize)]
pub struct StageLine {
    pub stage: usize,
    pub costs: Vec<f64>,
    pub err: Option<f64>,
}

pub fn read_stages(path: &Path) -> Result<Vec<StageLine>, Exit> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Exit::from))
        .collect()
}

fn num(v: f64) -> String {
    v.to_string()
}

pub fn write_riccati(path: &Path, ric: &RiccatiSolution) -> Result<(), Exit> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RICCATI_HEADER)?;
    for j in 0..ric.times.len() {
        w.write_record([ric.times[j], ric.k[j], ric.eta[j], ric.gamma[j], ric.kappa[j]].map(num))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_costs_by_stage(path: &Path, stages: &[StageLine]) -> Result<(), Exit> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(COSTS_BY_STAGE_HEADER)?;
    for s in stages {
        let err = s.err.map(num).unwrap_or_default();
        for (player, cost) in s.costs.iter().enumerate() {
            w.write_record([s.stage.to_string(), player.to_string(), num(*cost), err.clone()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory_errors(path: &Path, gaps: &[TrajectoryGap]) -> Result<(), Exit> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRAJECTORY_ERRORS_HEADER)?;
    for g in gaps {
        w.write_record([
            g.player.to_string(),
            g.step.to_string(),
            num(g.t),
            num(g.mean_error),
            num(g.std_error),
            num(g.mean_abs_error),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// States and controls of the first `n_paths` evaluation paths. Controls
/// are undefined at the terminal step and left empty there.
pub fn write_control_samples(path: &Path, cmp: &Comparison, n_paths: usize) -> Result<(), Exit> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CONTROL_SAMPLES_HEADER)?;
    let n = cmp.oracle.n_players;
    let n_steps = cmp.oracle_controls.n_steps();
    for p in 0..n_paths.min(cmp.oracle.states.n_paths()) {
        for step in 0..=n_steps {
            for i in 0..n {
                let (a_true, a_dfp) = if step < n_steps {
                    (num(cmp.oracle_controls.get(p, step, i)), num(cmp.dfp_controls.get(p, step, i)))
                } else {
                    (String::new(), String::new())
                };
                w.write_record([
                    p.to_string(),
                    step.to_string(),
                    i.to_string(),
                    num(cmp.oracle.states.get(p, step, i)),
                    num(cmp.dfp.states.get(p, step, i)),
                    a_true,
                    a_dfp,
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
