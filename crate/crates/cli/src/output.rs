//! CSV and PGM artifacts for a finished mission.

use std::fs;
use std::path::Path;

use fieldmapper::field::{in_true_high_intensity, Point};
use fieldmapper::pgm::Pgm;
use fieldmapper::swarm::MissionResult;
use fieldmapper::{FieldSpec, TestGrid};
use sha2::{Digest, Sha256};

use crate::config::CliError;

/// Locale-free, 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

/// SHA-256 over the raw bits of every agent's initial plan.
pub fn initial_plan_hash(result: &MissionResult) -> String {
    let mut h = Sha256::new();
    for agent in &result.agents {
        h.update((agent.id as u64).to_le_bytes());
        for p in &agent.initial_plan {
            h.update(p.x.to_bits().to_le_bytes());
            h.update(p.y.to_bits().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

pub fn write_metrics(path: &Path, result: &MissionResult) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record([
        "step",
        "agent",
        "l2_error",
        "fill_distance",
        "mesh_ratio",
        "n_circles",
        "cum_intensity_inside",
        "cum_count_inside",
        "rmse",
        "separation_radius",
        "cum_count_inside_truth",
        "cum_exposure_flags",
        "relocated",
        "encountered",
    ])?;
    let steps = result.agents.first().map_or(0, |a| a.records.len());
    for s in 0..steps {
        for agent in &result.agents {
            let r = &agent.records[s];
            w.write_record([
                r.step.to_string(),
                agent.id.to_string(),
                fmt_real(r.l2_error),
                fmt_real(r.fill_distance),
                fmt_opt(r.mesh_ratio),
                r.circles.len().to_string(),
                fmt_real(r.cum_intensity_inside),
                r.cum_count_inside.to_string(),
                fmt_real(r.rmse),
                fmt_opt(r.separation_radius),
                r.cum_count_inside_truth.to_string(),
                r.cum_exposure_flags.to_string(),
                r.relocated.to_string(),
                u8::from(r.encountered).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_circles(path: &Path, result: &MissionResult) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["step", "agent", "cx", "cy", "r", "score"])?;
    let steps = result.agents.first().map_or(0, |a| a.records.len());
    for s in 0..steps {
        for agent in &result.agents {
            let r = &agent.records[s];
            for (c, score) in r.circles.iter() {
                w.write_record([
                    r.step.to_string(),
                    agent.id.to_string(),
                    fmt_real(c.cx),
                    fmt_real(c.cy),
                    fmt_real(c.r),
                    fmt_real(score),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_encounters(path: &Path, result: &MissionResult) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["step", "i", "j"])?;
    for e in &result.encounters {
        w.write_record([e.step.to_string(), e.i.to_string(), e.j.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Initially planned locations (`executed = 0`, step = planned slot) followed
/// by the locations actually measured (`executed = 1`).
pub fn write_plan(
    path: &Path,
    result: &MissionResult,
    agent: usize,
    field: &FieldSpec,
) -> Result<(), CliError> {
    let a = &result.agents[agent];
    let g_thresh = result.config.g_thresh;
    let mut w = writer(path)?;
    w.write_record(["step", "x", "y", "executed", "inside_true_region"])?;
    let mut row = |step: usize, p: &Point, executed: bool, inside: bool| {
        w.write_record([
            step.to_string(),
            fmt_real(p.x),
            fmt_real(p.y),
            u8::from(executed).to_string(),
            u8::from(inside).to_string(),
        ])
    };
    for (i, p) in a.initial_plan.iter().enumerate() {
        row(i + 1, p, false, in_true_high_intensity(field, p, g_thresh)?)?;
    }
    for e in &a.executed {
        row(e.step, &e.location, true, e.inside_true_region)?;
    }
    w.flush()?;
    Ok(())
}

/// Every artifact of a single run except the manifest.
pub fn write_run(
    dir: &Path,
    result: &MissionResult,
    field: &FieldSpec,
    grid: &TestGrid,
) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    write_metrics(&dir.join("metrics.csv"), result)?;
    write_circles(&dir.join("circles.csv"), result)?;
    write_encounters(&dir.join("encounters.csv"), result)?;
    let (lo, hi) = field.bounds();
    for agent in &result.agents {
        write_plan(&dir.join(format!("plan_{}.csv", agent.id)), result, agent.id, field)?;
        let mean = Pgm::from_scaled(grid.side(), &agent.final_estimate.mean, lo, hi)?;
        fs::write(dir.join(format!("mean_{}.pgm", agent.id)), mean.to_text())?;
        fs::write(
            dir.join(format!("binary_{}.pgm", agent.id)),
            agent.final_binary.to_pgm().to_text(),
        )?;
    }
    let truth = Pgm::from_scaled(grid.side(), &grid.truth(field)?, lo, hi)?;
    fs::write(dir.join("truth.pgm"), truth.to_text())?;
    Ok(())
}
