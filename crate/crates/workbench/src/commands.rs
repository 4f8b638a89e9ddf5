//! Subcommand implementations. Each returns the report data it wrote so the
//! functions can be driven from tests as well as from the CLI.

use std::fs;
use std::io::Write;
use std::path::Path;

use epochsim_core::array::Phase;
use epochsim_core::mapper::{validate_plan, PlanDocument};
use epochsim_core::metrics::BORIAKOFF_UTILIZATION;
use epochsim_core::par::{par_map, with_threads, ExecPolicy};
use epochsim_core::sim::plan_ssm_layer;
use serde::{Deserialize, Serialize};

use crate::config::{LayerEntry, Workload, WorkloadConfig};
use crate::error::CliError;
use crate::report::{write_all, SimReport};
use crate::run::run_workload;

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub policy: ExecPolicy,
}

impl RunOptions {
    fn apply(&self, cfg: &WorkloadConfig) -> WorkloadConfig {
        let mut cfg = cfg.clone();
        if let Some(t) = self.tolerance {
            cfg.tolerance = Some(t);
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg
    }
}

/// Runs the workload, writes the report files (see [`write_all`]),
/// and fails with a tolerance error if the oracle check does not pass.
pub fn simulate(cfg: &WorkloadConfig, out: &Path, opts: &RunOptions) -> Result<SimReport, CliError> {
    let w = opts.apply(cfg).resolve()?;
    let run = with_threads(opts.threads, || run_workload(&w, opts.policy))?;
    let report = SimReport::build(&w, &run);
    write_all(out, &report, &run)?;
    if !report.oracle.within_tolerance {
        return Err(CliError::Tolerance {
            error: report.oracle.max_abs_error,
            tolerance: report.oracle.tolerance,
            location: report.oracle.location.as_ref().map_or_else(|| "unknown".into(), |l| l.to_string()),
        });
    }
    Ok(report)
}

/// One grid axis: a parameter name and its values.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub name: String,
    pub values: Vec<f64>,
}

pub const SWEEP_KEYS: &[&str] = &["n", "h", "dt", "seq_len", "batch", "seed"];

/// Parses `name=v1,v2,...`.
pub fn parse_axis(s: &str) -> Result<SweepAxis, CliError> {
    let (name, vals) = s.split_once('=').ok_or_else(|| CliError::Config(format!("sweep parameter \"{s}\" must look like name=v1,v2")))?;
    let name = name.trim().to_string();
    if !SWEEP_KEYS.contains(&name.as_str()) {
        return Err(CliError::Config(format!("unknown sweep parameter \"{name}\"; expected one of {}", SWEEP_KEYS.join(", "))));
    }
    let values = vals
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| CliError::Config(format!("sweep parameter {name}: \"{v}\": {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(CliError::Config(format!("sweep parameter {name} has no values")));
    }
    Ok(SweepAxis { name, values })
}

/// Cartesian product of the axes, first axis varying slowest.
pub fn grid_points(axes: &[SweepAxis]) -> Vec<Vec<(String, f64)>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push((axis.name.clone(), v));
                    q
                })
            })
            .collect();
    }
    points
}

fn as_count(name: &str, v: f64) -> Result<usize, CliError> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(CliError::Config(format!("{name} must be a non-negative integer, got {v}")))
    }
}

/// Applies one grid point to a config. `n`, `h` and `dt` change every SSM
/// layer whose coefficients are generated.
pub fn apply_point(cfg: &WorkloadConfig, point: &[(String, f64)]) -> Result<WorkloadConfig, CliError> {
    let mut cfg = cfg.clone();
    let needs_layers = point.iter().any(|(k, _)| matches!(k.as_str(), "n" | "h" | "dt"));
    if needs_layers && cfg.layers.is_empty() {
        // materialize the preset's default stack so it can be edited
        let w = cfg.resolve()?;
        cfg.layers = w.config.layers;
    }
    for (k, v) in point {
        match k.as_str() {
            "seq_len" => cfg.seq_len = Some(as_count(k, *v)?),
            "batch" => cfg.batch = as_count(k, *v)?,
            "seed" => cfg.seed = as_count(k, *v)? as u64,
            "n" | "h" | "dt" => {
                for l in &mut cfg.layers {
                    if let LayerEntry::S4(e) | LayerEntry::LiquidS4(e) = l {
                        if e.params.is_none() {
                            match k.as_str() {
                                "n" => e.n = as_count(k, *v)?,
                                "h" => e.h = as_count(k, *v)?,
                                _ => e.dt = *v,
                            }
                        }
                    }
                }
            }
            other => return Err(CliError::Config(format!("unknown sweep parameter \"{other}\""))),
        }
    }
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: usize,
    pub n: Option<usize>,
    pub h: Option<usize>,
    pub dt: Option<f64>,
    pub seq_len: Option<usize>,
    pub batch: usize,
    pub seed: u64,
    pub status: String,
    pub compute_cycles: Option<u64>,
    pub total_cycles: Option<u64>,
    pub first_output: Option<u64>,
    pub compute_energy_nj: Option<f64>,
    pub total_energy_nj: Option<f64>,
    pub active_pes: Option<usize>,
    pub total_pes: Option<usize>,
    pub utilization: Option<f64>,
    pub max_abs_error: Option<f64>,
    pub saturations: Option<u64>,
    pub error: Option<String>,
}

fn first_ssm_shape(cfg: &WorkloadConfig) -> (Option<usize>, Option<usize>, Option<f64>) {
    cfg.layers
        .iter()
        .find_map(|l| match l {
            LayerEntry::S4(e) | LayerEntry::LiquidS4(e) => Some(match &e.params {
                Some(p) => (Some(p.n()), Some(p.h()), Some(p.dt)),
                None => (Some(e.n), Some(e.h), Some(e.dt)),
            }),
            _ => None,
        })
        .unwrap_or((None, None, None))
}

fn sweep_point(index: usize, cfg: Result<WorkloadConfig, CliError>) -> SweepRow {
    let mut row = SweepRow {
        point: index,
        n: None,
        h: None,
        dt: None,
        seq_len: None,
        batch: 0,
        seed: 0,
        status: "error".into(),
        compute_cycles: None,
        total_cycles: None,
        first_output: None,
        compute_energy_nj: None,
        total_energy_nj: None,
        active_pes: None,
        total_pes: None,
        utilization: None,
        max_abs_error: None,
        saturations: None,
        error: None,
    };
    let result = cfg.and_then(|cfg| {
        let w = cfg.resolve()?;
        let (n, h, dt) = first_ssm_shape(&w.config);
        row.n = n;
        row.h = h;
        row.dt = dt;
        row.seq_len = Some(w.seq_len);
        row.batch = w.batch;
        row.seed = w.seed;
        // points already run concurrently; each point runs its tiles in order
        let run = run_workload(&w, ExecPolicy::Sequential)?;
        Ok((w, run))
    });
    match result {
        Ok((w, run)) => {
            let rep = SimReport::build(&w, &run);
            row.status = if rep.oracle.within_tolerance { "ok" } else { "tolerance" }.into();
            row.compute_cycles = Some(rep.cycles.compute);
            row.total_cycles = Some(rep.cycles.total);
            row.first_output = rep.first_output_latency;
            row.compute_energy_nj = Some(rep.energy.phase_nj[&Phase::Compute.to_string()]);
            row.total_energy_nj = Some(rep.energy.total_nj);
            if let Some(u) = rep.utilization {
                row.active_pes = Some(u.active_pes);
                row.total_pes = Some(u.total_pes);
                row.utilization = Some(u.ratio);
            }
            row.max_abs_error = Some(rep.oracle.max_abs_error);
            row.saturations = Some(rep.saturations);
        }
        Err(e) => {
            row.status = match e {
                CliError::Capacity(_) => "capacity",
                CliError::Config(_) => "config",
                _ => "error",
            }
            .into();
            row.error = Some(e.to_string());
        }
    }
    row
}

/// Runs every grid point (concurrently under the parallel policy) and writes
/// `sweep.csv`. Failed points are recorded, not fatal.
pub fn sweep(cfg: &WorkloadConfig, axes: &[SweepAxis], out: &Path, opts: &RunOptions) -> Result<Vec<SweepRow>, CliError> {
    let base = opts.apply(cfg);
    let points = grid_points(axes);
    let configs: Vec<(usize, Result<WorkloadConfig, CliError>)> = points.iter().enumerate().map(|(i, p)| (i, apply_point(&base, p))).collect();
    let rows = with_threads(opts.threads, || par_map(&configs, opts.policy, |(i, c)| sweep_point(*i, c.clone())));
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub name: String,
    pub n: usize,
    pub h: usize,
    pub seq_len: usize,
    pub batch: usize,
    pub epoch_compute_cycles: u64,
    pub epoch_total_cycles: u64,
    pub epoch_energy_nj: f64,
    pub baseline_cycles: u64,
    pub baseline_energy_nj: f64,
    pub cycle_ratio: f64,
    pub energy_ratio: f64,
    pub epoch_utilization: f64,
    pub baseline_utilization: f64,
    pub boriakoff_utilization: f64,
}

fn compare_point(w: &Workload) -> Result<CompareRow, CliError> {
    let (variant_count, (n, h)) = {
        let v: Vec<_> = w.ssm_layers().map(|(_, p)| (p.n(), p.h())).collect();
        (v.len(), v.first().copied().unwrap_or((0, 0)))
    };
    if variant_count == 0 {
        return Err(CliError::Config("compare needs at least one SSM layer".into()));
    }
    let run = run_workload(w, ExecPolicy::Sequential)?;
    let rep = SimReport::build(w, &run);
    let (rows, cols) = (w.array.rows, w.array.cols);
    let tokens = (w.seq_len * w.batch) as u64;
    let mut base_cycles = 0;
    let mut base_aj = 0u128;
    for (_, p) in w.ssm_layers() {
        base_cycles += w.baseline.cycles(tokens, p.n() as u64, p.h() as u64);
        base_aj += w.baseline.energy_aj(tokens, p.n() as u64, p.h() as u64, rows, cols, &w.array);
    }
    let base_nj = base_aj as f64 / 1e9;
    let util = rep.utilization.map_or(0.0, |u| u.ratio);
    let footprint = rep.layers.iter().find_map(|l| l.plan_rows.zip(l.plan_cols)).unwrap_or((rows, cols));
    Ok(CompareRow {
        name: w.name.clone(),
        n,
        h,
        seq_len: w.seq_len,
        batch: w.batch,
        epoch_compute_cycles: rep.cycles.compute,
        epoch_total_cycles: rep.cycles.total,
        epoch_energy_nj: rep.energy.total_nj,
        baseline_cycles: base_cycles,
        baseline_energy_nj: base_nj,
        cycle_ratio: base_cycles as f64 / rep.cycles.compute.max(1) as f64,
        energy_ratio: base_nj / rep.energy.total_nj,
        epoch_utilization: util,
        baseline_utilization: w.baseline.utilization(n, h, footprint.0, footprint.1),
        boriakoff_utilization: BORIAKOFF_UTILIZATION,
    })
}

/// Writes `compare.csv`: one row per grid point, followed by `#` comment
/// lines listing every model assumption.
pub fn compare(cfg: &WorkloadConfig, axes: &[SweepAxis], out: &Path, opts: &RunOptions) -> Result<Vec<CompareRow>, CliError> {
    let base = opts.apply(cfg);
    let workloads = grid_points(axes).iter().map(|p| apply_point(&base, p)?.resolve()).collect::<Result<Vec<_>, _>>()?;
    let rows = with_threads(opts.threads, || par_map(&workloads, opts.policy, compare_point)).into_iter().collect::<Result<Vec<_>, _>>()?;
    fs::create_dir_all(out)?;
    let path = out.join("compare.csv");
    {
        let mut w = csv::Writer::from_path(&path)?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    let mut f = fs::OpenOptions::new().append(true).open(&path)?;
    let first = &workloads[0];
    let mut notes = vec![
        "cycle_ratio = baseline_cycles / epoch_compute_cycles".to_string(),
        "energy_ratio = baseline_energy_nj / epoch_energy_nj (all phases)".to_string(),
        format!("epoch utilization = MAC-mode PEs / plan footprint PEs; Boriakoff reference {BORIAKOFF_UTILIZATION}"),
        format!("array {}x{} at {} ns, {:?} power table", first.array.rows, first.array.cols, first.array.cycle_time_ns, first.array.power_table),
        "baseline processes every sequence of the batch back to back after one preload per layer".to_string(),
    ];
    notes.extend(first.baseline.assumptions());
    for n in notes {
        writeln!(f, "# {n}")?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub name: String,
    pub ok: bool,
    pub plans: Vec<PlanDocument>,
    pub violations: Vec<String>,
}

/// Resolves the config, plans every SSM layer and checks the plans.
/// Writes `plans.json` when `out` is given.
pub fn validate(cfg: &WorkloadConfig, out: Option<&Path>, opts: &RunOptions) -> Result<ValidationReport, CliError> {
    let w = opts.apply(cfg).resolve()?;
    let mut plans = Vec::new();
    let mut violations = Vec::new();
    for (i, (variant, p)) in w.ssm_layers().enumerate() {
        match plan_ssm_layer(p, variant, &w.array) {
            Ok(plan) => {
                if let Err(v) = validate_plan(&plan, &w.array) {
                    violations.extend(v.iter().map(|x| format!("ssm layer {i}: {x:?}")));
                }
                plans.push(plan.to_document());
            }
            Err(epochsim_core::sim::SimError::InvalidPlan(v)) => violations.extend(v.iter().map(|x| format!("ssm layer {i}: {x:?}"))),
            Err(e) => return Err(e.into()),
        }
    }
    let report = ValidationReport { name: w.name.clone(), ok: violations.is_empty(), plans, violations };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("plans.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    }
    if !report.ok {
        return Err(CliError::Other(format!("plan validation failed: {}", report.violations.join("; "))));
    }
    Ok(report)
}
