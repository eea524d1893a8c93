//! `run`, `compare` and `hough-test` subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fieldmapper::field::make_test_grid;
use fieldmapper::hough::{accumulate, detect_circles, BinaryMap, CircleSet, HoughConfig};
use fieldmapper::pgm::Pgm;
use fieldmapper::swarm::{run_mission, MissionResult};
use fieldmapper::DomainBox;
use rayon::prelude::*;

use crate::config::{load_config, CliError, ManifestInfo, RunConfig, RunManifest};
use crate::output::{self, fmt_real};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Command-line overrides applied on top of a loaded configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub agents: Option<usize>,
    pub steps: Option<usize>,
    pub no_avoidance: bool,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let m = &mut cfg.mission;
        if let Some(s) = self.seed {
            m.seed = s;
        }
        if let Some(n) = self.agents {
            m.n_agents = n;
        }
        if let Some(n) = self.steps {
            m.n_trn = n;
        }
        if self.no_avoidance {
            m.avoidance_enabled = false;
        }
    }
}

/// Runs one mission and writes its artifacts under `out`.
pub fn execute_run(cfg: &RunConfig, out: &Path) -> Result<MissionResult, CliError> {
    let started = Instant::now();
    let mission = cfg.mission.resolve(&cfg.field)?;
    let grid = make_test_grid(&cfg.field.domain, mission.grid_side)?;
    let result = run_mission(&mission, &cfg.field)?;
    output::write_run(out, &result, &cfg.field, &grid)?;
    let manifest = RunManifest {
        config: RunConfig {
            field: cfg.field.clone(),
            mission,
        },
        info: ManifestInfo {
            tool_version: TOOL_VERSION.to_string(),
            output_dir: out.to_path_buf(),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        },
    };
    fs::write(out.join("manifest.json"), manifest.to_json()?)?;
    Ok(result)
}

pub fn cmd_run(config: &Path, overrides: &Overrides, out: &Path) -> Result<(), CliError> {
    let mut cfg = load_config(config)?;
    overrides.apply(&mut cfg);
    cfg.mission.validate()?;
    execute_run(&cfg, out)?;
    Ok(())
}

/// One paired seed of a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub seed: u64,
    pub baseline_plan_hash: String,
    pub gpht_plan_hash: String,
    pub baseline_l2: f64,
    pub gpht_l2: f64,
    pub baseline_intensity: f64,
    pub gpht_intensity: f64,
    pub baseline_count: usize,
    pub gpht_count: usize,
}

impl CompareRow {
    fn from_results(seed: u64, baseline: &MissionResult, gpht: &MissionResult) -> Self {
        CompareRow {
            seed,
            baseline_plan_hash: output::initial_plan_hash(baseline),
            gpht_plan_hash: output::initial_plan_hash(gpht),
            baseline_l2: baseline.mean_final_l2_error(),
            gpht_l2: gpht.mean_final_l2_error(),
            baseline_intensity: baseline.total_intensity_inside(),
            gpht_intensity: gpht.total_intensity_inside(),
            baseline_count: baseline.total_count_inside(),
            gpht_count: gpht.total_count_inside(),
        }
    }
}

fn reduction_pct(gpht: f64, baseline: f64) -> f64 {
    if baseline == 0.0 {
        0.0
    } else {
        100.0 * (1.0 - gpht / baseline)
    }
}

/// Across-seed means of a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareSummary {
    pub baseline_l2: f64,
    pub gpht_l2: f64,
    pub baseline_intensity: f64,
    pub gpht_intensity: f64,
    pub baseline_count: f64,
    pub gpht_count: f64,
    /// Fraction of seeds where the avoidance arm's inside count is no larger.
    pub count_le_fraction: f64,
    pub count_reduction_pct: f64,
    pub intensity_reduction_pct: f64,
}

impl CompareSummary {
    pub fn from_rows(rows: &[CompareRow]) -> Self {
        let n = rows.len() as f64;
        let mean = |f: &dyn Fn(&CompareRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        let baseline_count = mean(&|r| r.baseline_count as f64);
        let gpht_count = mean(&|r| r.gpht_count as f64);
        let baseline_intensity = mean(&|r| r.baseline_intensity);
        let gpht_intensity = mean(&|r| r.gpht_intensity);
        CompareSummary {
            baseline_l2: mean(&|r| r.baseline_l2),
            gpht_l2: mean(&|r| r.gpht_l2),
            baseline_intensity,
            gpht_intensity,
            baseline_count,
            gpht_count,
            count_le_fraction: mean(&|r| f64::from(u8::from(r.gpht_count <= r.baseline_count))),
            count_reduction_pct: reduction_pct(gpht_count, baseline_count),
            intensity_reduction_pct: reduction_pct(gpht_intensity, baseline_intensity),
        }
    }
}

/// Runs both arms for `n_seeds` consecutive seeds starting at the configured
/// one. Per-seed artifacts go to `out/seed_<s>/{baseline,gpht}` when `out`
/// is given.
pub fn execute_compare(
    cfg: &RunConfig,
    n_seeds: usize,
    out: Option<&Path>,
) -> Result<(Vec<CompareRow>, CompareSummary), CliError> {
    if n_seeds == 0 {
        return Err(CliError::Config("`seeds` must be >= 1".into()));
    }
    let first = cfg.mission.seed;
    let rows = (0..n_seeds as u64)
        .into_par_iter()
        .map(|offset| {
            let seed = first + offset;
            let arm = |avoid: bool, name: &str| -> Result<MissionResult, CliError> {
                let mut c = cfg.clone();
                c.mission.seed = seed;
                c.mission.avoidance_enabled = avoid;
                match out {
                    Some(dir) => execute_run(&c, &dir.join(format!("seed_{seed}")).join(name)),
                    None => Ok(run_mission(&c.mission, &c.field)?),
                }
            };
            let baseline = arm(false, "baseline")?;
            let gpht = arm(true, "gpht")?;
            Ok(CompareRow::from_results(seed, &baseline, &gpht))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let summary = CompareSummary::from_rows(&rows);
    Ok((rows, summary))
}

pub fn write_compare_csv(
    path: &Path,
    rows: &[CompareRow],
    summary: &CompareSummary,
) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record([
        "seed",
        "baseline_plan_hash",
        "gpht_plan_hash",
        "baseline_l2",
        "gpht_l2",
        "baseline_intensity",
        "gpht_intensity",
        "baseline_count",
        "gpht_count",
        "gpht_count_le_baseline",
        "count_reduction_pct",
        "intensity_reduction_pct",
    ])?;
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            r.baseline_plan_hash.clone(),
            r.gpht_plan_hash.clone(),
            fmt_real(r.baseline_l2),
            fmt_real(r.gpht_l2),
            fmt_real(r.baseline_intensity),
            fmt_real(r.gpht_intensity),
            fmt_real(r.baseline_count as f64),
            fmt_real(r.gpht_count as f64),
            fmt_real(f64::from(u8::from(r.gpht_count <= r.baseline_count))),
            fmt_real(reduction_pct(r.gpht_count as f64, r.baseline_count as f64)),
            fmt_real(reduction_pct(r.gpht_intensity, r.baseline_intensity)),
        ])?;
    }
    let s = summary;
    w.write_record([
        "summary".to_string(),
        String::new(),
        String::new(),
        fmt_real(s.baseline_l2),
        fmt_real(s.gpht_l2),
        fmt_real(s.baseline_intensity),
        fmt_real(s.gpht_intensity),
        fmt_real(s.baseline_count),
        fmt_real(s.gpht_count),
        fmt_real(s.count_le_fraction),
        fmt_real(s.count_reduction_pct),
        fmt_real(s.intensity_reduction_pct),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn cmd_compare(config: &Path, n_seeds: usize, out: &Path) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let resolved = RunConfig {
        mission: cfg.mission.resolve(&cfg.field)?,
        field: cfg.field.clone(),
    };
    fs::create_dir_all(out)?;
    let started = Instant::now();
    let (rows, summary) = execute_compare(&resolved, n_seeds, Some(out))?;
    write_compare_csv(&out.join("compare.csv"), &rows, &summary)?;
    let manifest = RunManifest {
        config: resolved,
        info: ManifestInfo {
            tool_version: TOOL_VERSION.to_string(),
            output_dir: out.to_path_buf(),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        },
    };
    fs::write(out.join("manifest.json"), manifest.to_json()?)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct HoughTestArgs {
    pub image: PathBuf,
    pub r_min: f64,
    pub r_max: f64,
    pub sensitivity: f64,
    pub accumulator_dir: Option<PathBuf>,
}

/// Detects circles in a square PGM image mapped onto the unit box.
pub fn hough_test(args: &HoughTestArgs) -> Result<CircleSet, CliError> {
    let text = fs::read_to_string(&args.image)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.image.display())))?;
    let img = Pgm::parse(&text).map_err(|e| CliError::Config(e.to_string()))?;
    let map = BinaryMap::from_pgm(&img)?;
    let grid = make_test_grid(&DomainBox::unit(), map.side())?;
    let cfg = HoughConfig::new(args.r_min, args.r_max, args.sensitivity);
    let circles = detect_circles(&map, &cfg, &grid)?;
    if let Some(dir) = &args.accumulator_dir {
        fs::create_dir_all(dir)?;
        for (i, plane) in accumulate(&map, &cfg, &grid)?.iter().enumerate() {
            fs::write(
                dir.join(format!("accumulator_{i:03}.pgm")),
                plane.to_pgm(map.side()).to_text(),
            )?;
        }
    }
    Ok(circles)
}

pub fn write_circle_csv<W: Write>(out: &mut W, circles: &CircleSet) -> std::io::Result<()> {
    writeln!(out, "cx,cy,r,score")?;
    for (c, score) in circles.iter() {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_real(c.cx),
            fmt_real(c.cy),
            fmt_real(c.r),
            fmt_real(score)
        )?;
    }
    Ok(())
}

pub fn cmd_hough_test(args: &HoughTestArgs) -> Result<(), CliError> {
    let circles = hough_test(args)?;
    let stdout = std::io::stdout();
    write_circle_csv(&mut stdout.lock(), &circles)?;
    Ok(())
}
