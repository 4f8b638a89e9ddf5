//! Report assembly and output files.

use std::fs;
use std::path::Path;

use epochsim_core::array::{PortTotals, PortTrace};
use epochsim_core::metrics::{bandwidth_summary, energy_of, EnergyReport, SramSizing, UtilizationReport, ENERGY_FOOTNOTE};
use epochsim_core::ArrayConfig;
use serde::{Deserialize, Serialize};

use crate::config::{Workload, WorkloadConfig};
use crate::run::{CycleSummary, ErrorLocation, LayerReport, RunOutcome};

pub const VERSION: &str = env!("EPOCHSIM_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortSummary {
    pub totals: PortTotals,
    pub window_cycles: usize,
    pub peak_weight_words_per_cycle: f64,
    pub peak_io_words_per_cycle: f64,
    pub peak_weight_words_per_ns: f64,
    pub peak_io_words_per_ns: f64,
}

impl PortSummary {
    pub fn from_trace(trace: &PortTrace, window: usize, cycle_time_ns: f64) -> Self {
        let series = bandwidth_summary(trace, window, cycle_time_ns);
        let peak = |f: fn(&epochsim_core::metrics::BandwidthPoint) -> f64| series.iter().map(f).fold(0.0, f64::max);
        PortSummary {
            totals: trace.totals(),
            window_cycles: window,
            peak_weight_words_per_cycle: peak(|p| p.weight_words_per_cycle),
            peak_io_words_per_cycle: peak(|p| p.io_words_per_cycle),
            peak_weight_words_per_ns: peak(|p| p.weight_words_per_ns),
            peak_io_words_per_ns: peak(|p| p.io_words_per_ns),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub max_abs_error: f64,
    pub location: Option<ErrorLocation>,
    pub tolerance: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub version: String,
    pub name: String,
    pub config: WorkloadConfig,
    pub array: ArrayConfig,
    pub cycles: CycleSummary,
    pub first_output_latency: Option<u64>,
    pub layers: Vec<LayerReport>,
    pub energy: EnergyReport,
    pub ports: PortSummary,
    pub sram: Option<SramSizing>,
    pub utilization: Option<UtilizationReport>,
    pub oracle: OracleSummary,
    pub saturations: u64,
    pub warnings: Vec<String>,
    pub assumptions: Vec<String>,
}

impl SimReport {
    pub fn build(w: &Workload, run: &RunOutcome) -> Self {
        let first_ssm = run.layers.iter().find(|l| l.sram.is_some());
        let mut assumptions = vec![
            "outputs of SSM layers add the skip term D*u on the host".to_string(),
            "dense layers run as weight-stationary GEMM; bias, activation and layer norm run on the host".to_string(),
        ];
        let energy = energy_of(&run.ledger, &w.array);
        assumptions.extend(energy.assumptions.iter().cloned());
        assumptions.dedup();
        if !assumptions.iter().any(|a| a == ENERGY_FOOTNOTE) {
            assumptions.push(ENERGY_FOOTNOTE.into());
        }
        SimReport {
            version: VERSION.to_string(),
            name: w.name.clone(),
            config: w.config.clone(),
            array: w.array,
            cycles: CycleSummary::from(&run.ledger),
            first_output_latency: first_ssm.and_then(|l| l.measured_first_output),
            layers: run.layers.clone(),
            energy,
            ports: PortSummary::from_trace(&run.trace, w.bandwidth_window, w.array.cycle_time_ns),
            sram: first_ssm.and_then(|l| l.sram),
            utilization: first_ssm.and_then(|l| l.utilization),
            oracle: OracleSummary {
                max_abs_error: run.max_abs_error,
                location: run.error_location.clone(),
                tolerance: w.tolerance,
                within_tolerance: run.max_abs_error <= w.tolerance,
            },
            saturations: run.saturations,
            warnings: run.warnings.clone(),
            assumptions,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// `outputs.csv`: one row per (sequence, time step, channel).
pub fn write_outputs_csv(path: &Path, run: &RunOutcome) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sequence", "t", "channel", "simulated", "reference", "abs_error"])?;
    for (s, (sim, gold)) in run.simulated.iter().zip(&run.golden).enumerate() {
        for (t, (rs, rg)) in sim.iter().zip(gold).enumerate() {
            for (c, (a, b)) in rs.iter().zip(rg).enumerate() {
                w.serialize((s, t, c, a, b, (a - b).abs()))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `report.json`, `trace.csv`, `outputs.csv` and `bandwidth.csv`
/// (trailing-window words per cycle per port).
pub fn write_all(dir: &Path, report: &SimReport, run: &RunOutcome) -> Result<(), crate::error::CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), report.to_json())?;
    run.trace.write_csv(fs::File::create(dir.join("trace.csv"))?)?;
    write_outputs_csv(&dir.join("outputs.csv"), run)?;
    let mut w = csv::Writer::from_path(dir.join("bandwidth.csv"))?;
    for p in bandwidth_summary(&run.trace, report.ports.window_cycles, report.array.cycle_time_ns) {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
