//! Post-processing over simulation ledgers and traces: energy, SRAM sizing,
//! utilization, bandwidth, and an analytic cost model of a conventional
//! systolic array that has no recurrent MAC modes.

use std::collections::BTreeMap;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::array::{ArrayConfig, ClassTally, Phase, PhaseLedger, PortTrace};
use crate::mapper::LayoutPlan;
use crate::pe::{PeMode, PowerClass, PowerTable};

/// 1-D systolic array utilization reference.
pub const BORIAKOFF_UTILIZATION: f64 = 0.667;

/// On-chip SRAM budget in bytes (10 MB).
pub const SRAM_BUDGET_BYTES: u64 = 10_000_000;

pub const ENERGY_FOOTNOTE: &str = "SRAM access energy excluded for every machine";

const AJ_PER_NJ: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub cycle_time_ns: f64,
    pub power_table: PowerTable,
    /// Mode powers in mW of the table in use.
    pub mode_power_mw: BTreeMap<String, f64>,
    /// Exact per-phase energy in attojoules, indexed like [`Phase::ALL`].
    pub phase_aj: [u128; 4],
    pub phase_nj: BTreeMap<String, f64>,
    pub class_pe_cycles: ClassTally,
    /// Compute-phase PE-cycles per mode.
    pub mode_pe_cycles: BTreeMap<String, u64>,
    pub total_aj: u128,
    pub total_nj: f64,
    pub assumptions: Vec<String>,
}

impl EnergyReport {
    pub fn phase_energy_aj(&self, phase: Phase) -> u128 {
        self.phase_aj[phase.index()]
    }

    fn refresh_derived(&mut self) {
        self.total_aj = self.phase_aj.iter().sum();
        self.total_nj = self.total_aj as f64 / AJ_PER_NJ;
        self.phase_nj = Phase::ALL.iter().map(|p| (p.to_string(), self.phase_aj[p.index()] as f64 / AJ_PER_NJ)).collect();
    }
}

/// Energies of two runs on the same configuration add.
impl Add for EnergyReport {
    type Output = EnergyReport;

    fn add(mut self, rhs: EnergyReport) -> EnergyReport {
        assert_eq!(self.power_table, rhs.power_table, "adding energy reports from different power tables");
        for i in 0..4 {
            self.phase_aj[i] += rhs.phase_aj[i];
        }
        self.class_pe_cycles.merge(&rhs.class_pe_cycles);
        for (k, v) in rhs.mode_pe_cycles {
            *self.mode_pe_cycles.entry(k).or_default() += v;
        }
        self.refresh_derived();
        self
    }
}

pub fn mode_power_table(table: PowerTable) -> BTreeMap<String, f64> {
    PeMode::ALL.iter().map(|m| (m.to_string(), crate::pe::power_of(*m, table))).collect()
}

/// Energy of everything recorded in `ledger`.
pub fn energy_of(ledger: &PhaseLedger, cfg: &ArrayConfig) -> EnergyReport {
    let ps = cfg.cycle_ps();
    let mut phase_aj = [0u128; 4];
    let mut classes = ClassTally::default();
    for p in Phase::ALL {
        phase_aj[p.index()] = ledger.classes[p.index()].energy_aj(cfg.power_table, ps);
        classes.merge(&ledger.classes[p.index()]);
    }
    let mut r = EnergyReport {
        cycle_time_ns: cfg.cycle_time_ns,
        power_table: cfg.power_table,
        mode_power_mw: mode_power_table(cfg.power_table),
        phase_aj,
        phase_nj: BTreeMap::new(),
        class_pe_cycles: classes,
        mode_pe_cycles: PeMode::ALL.iter().map(|m| (m.to_string(), ledger.by_mode[m.index()])).collect(),
        total_aj: 0,
        total_nj: 0.0,
        assumptions: vec![
            format!("cycle time {} ns", cfg.cycle_time_ns),
            format!("power table {:?}", cfg.power_table),
            "preload billed at pass-through power for PEs inside the plan footprint".into(),
            "reset and inter-sequence clears billed at sleep power".into(),
            ENERGY_FOOTNOTE.into(),
        ],
    };
    r.refresh_derived();
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SramSizing {
    pub weight_sram_bytes: u64,
    pub io_sram_bytes: u64,
    pub budget_bytes: u64,
    pub fits_budget: bool,
    pub seq_len: u64,
    pub batch: u64,
    pub heads: u64,
    pub word_bits: u32,
    pub plan_rows: usize,
    pub plan_cols: usize,
}

/// Weight SRAM holds one word per PE of the plan; io SRAM holds the input
/// sequence and every head's output for the whole batch.
pub fn sram_sizes(seq_len: u64, batch: u64, heads: u64, plan: &LayoutPlan, cfg: &ArrayConfig) -> SramSizing {
    let word_bytes = u64::from(cfg.word_bits) / 8;
    let weight = (plan.rows * plan.cols) as u64 * word_bytes;
    let io = batch * (seq_len + seq_len * heads) * word_bytes;
    SramSizing {
        weight_sram_bytes: weight,
        io_sram_bytes: io,
        budget_bytes: SRAM_BUDGET_BYTES,
        fits_budget: weight + io <= SRAM_BUDGET_BYTES,
        seq_len,
        batch,
        heads,
        word_bits: cfg.word_bits,
        plan_rows: plan.rows,
        plan_cols: plan.cols,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilizationReport {
    pub active_pes: usize,
    pub total_pes: usize,
    pub ratio: f64,
    pub boriakoff_reference: f64,
}

/// Share of the plan footprint's PEs in a MAC mode.
pub fn utilization(plan: &LayoutPlan) -> UtilizationReport {
    let total = plan.rows * plan.cols;
    let active = plan.active_pes();
    UtilizationReport {
        active_pes: active,
        total_pes: total,
        ratio: if total == 0 { 0.0 } else { active as f64 / total as f64 },
        boriakoff_reference: BORIAKOFF_UTILIZATION,
    }
}

/// Cost model of a conventional weight-stationary array running an SSM layer.
///
/// Per token:
/// * Layer-I scale `bbar ⊙ u` as a diagonal WS pass: `N` cycles plus a fill of
///   `scale_fill_per_state · N`;
/// * recurrence emulated as an elementwise read-modify-write pass: `N` cycles
///   plus `sram_round_trips` transfers of `N` words at
///   `sram_cycles_per_word` each;
/// * Layer-II as a `1×N · N×H` WS product: `N + H` cycles.
///
/// A single preload of `N + preload_extra` cycles precedes the stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineModel {
    pub preload_extra: u64,
    pub scale_fill_per_state: u64,
    pub sram_round_trips: u64,
    pub sram_cycles_per_word: u64,
    /// Conventional PE power in µW, fixed-point 32 and int8.
    pub pe_power_uw_fp32: u64,
    pub pe_power_uw_int8: u64,
}

impl Default for BaselineModel {
    fn default() -> Self {
        BaselineModel {
            preload_extra: 1,
            scale_fill_per_state: 1,
            sram_round_trips: 2,
            sram_cycles_per_word: 2,
            pe_power_uw_fp32: 7_400,
            pe_power_uw_int8: 840,
        }
    }
}

impl BaselineModel {
    pub fn preload_cycles(&self, n: u64) -> u64 {
        n + self.preload_extra
    }

    pub fn per_token_cycles(&self, n: u64, h: u64) -> u64 {
        let scale = n + self.scale_fill_per_state * n;
        let recurrence = n + self.sram_round_trips * n * self.sram_cycles_per_word;
        let readout = n + h;
        scale + recurrence + readout
    }

    pub fn cycles(&self, seq_len: u64, n: u64, h: u64) -> u64 {
        self.preload_cycles(n) + seq_len * self.per_token_cycles(n, h)
    }

    pub fn pe_power_uw(&self, table: PowerTable) -> u64 {
        match table {
            PowerTable::FixedPoint32 => self.pe_power_uw_fp32,
            PowerTable::Int8 => self.pe_power_uw_int8,
        }
    }

    /// Every PE of a `rows × cols` array billed at conventional PE power for
    /// every cycle, in attojoules.
    pub fn energy_aj(&self, seq_len: u64, n: u64, h: u64, rows: usize, cols: usize, cfg: &ArrayConfig) -> u128 {
        self.cycles(seq_len, n, h) as u128 * (rows * cols) as u128 * self.pe_power_uw(cfg.power_table) as u128 * cfg.cycle_ps() as u128
    }

    /// Mean of the Layer-I (`N` PEs) and Layer-II (`N·H` PEs) occupancy.
    pub fn utilization(&self, n: usize, h: usize, rows: usize, cols: usize) -> f64 {
        let total = (rows * cols) as f64;
        (n as f64 / total + (n * h) as f64 / total) / 2.0
    }

    pub fn assumptions(&self) -> Vec<String> {
        vec![
            format!("baseline preload = N + {} cycles", self.preload_extra),
            format!("baseline Layer-I scale = N + {}*N cycles per token", self.scale_fill_per_state),
            format!(
                "baseline recurrence = N + ({} SRAM round trips * N words * {} cycles/word) per token",
                self.sram_round_trips, self.sram_cycles_per_word
            ),
            "baseline Layer-II = N + H cycles per token".into(),
            format!("baseline PE power {} uW (fp32), {} uW (int8), all PEs every cycle", self.pe_power_uw_fp32, self.pe_power_uw_int8),
            "baseline utilization = mean of N/(R*C) and N*H/(R*C)".into(),
            ENERGY_FOOTNOTE.into(),
        ]
    }
}

/// Shorthand for [`BaselineModel::cycles`] with default constants.
pub fn baseline_tpu_cycles(seq_len: u64, n: u64, h: u64) -> u64 {
    BaselineModel::default().cycles(seq_len, n, h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthPoint {
    /// Last cycle of the window (1-based).
    pub cycle: u64,
    pub weight_words_per_cycle: f64,
    pub io_words_per_cycle: f64,
    pub weight_words_per_ns: f64,
    pub io_words_per_ns: f64,
}

pub const DEFAULT_BANDWIDTH_WINDOW: usize = 64;

/// Trailing-window average of words moved per port (reads plus writes).
/// Windows at the start of the trace cover the cycles seen so far.
pub fn bandwidth_summary(trace: &PortTrace, window: usize, cycle_time_ns: f64) -> Vec<BandwidthPoint> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(trace.len());
    let (mut w_sum, mut io_sum) = (0u64, 0u64);
    for (i, s) in trace.samples.iter().enumerate() {
        w_sum += u64::from(s.weight_reads + s.weight_writes);
        io_sum += u64::from(s.io_reads + s.io_writes);
        if i >= window {
            let old = &trace.samples[i - window];
            w_sum -= u64::from(old.weight_reads + old.weight_writes);
            io_sum -= u64::from(old.io_reads + old.io_writes);
        }
        let span = (i + 1).min(window) as f64;
        let (w, io) = (w_sum as f64 / span, io_sum as f64 / span);
        out.push(BandwidthPoint {
            cycle: i as u64 + 1,
            weight_words_per_cycle: w,
            io_words_per_cycle: io,
            weight_words_per_ns: w / cycle_time_ns,
            io_words_per_ns: io / cycle_time_ns,
        });
    }
    out
}

/// Energy of `pes` PEs held in one power class for `cycles` cycles, in aJ.
pub fn flat_energy_aj(pes: u64, cycles: u64, class: PowerClass, cfg: &ArrayConfig) -> u128 {
    let mut t = ClassTally::default();
    match class {
        PowerClass::Sleep => t.sleep = pes * cycles,
        PowerClass::PassThrough => t.pass = pes * cycles,
        PowerClass::Mac => t.mac = pes * cycles,
    }
    t.energy_aj(cfg.power_table, cfg.cycle_ps())
}
