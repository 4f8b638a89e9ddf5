//! The systolic fabric: a grid of PEs with fixed nearest-neighbour wiring,
//! boundary injectors and collectors, the four-phase protocol and per-cycle
//! SRAM port accounting.
//!
//! Timing model: every PE output is registered, so a value produced in cycle
//! `t` is visible to the neighbour in cycle `t + 1`. Boundary injectors drive
//! their value in the cycle it is scheduled. Cycles are numbered from 1 within
//! each phase.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapper::{InjectPlan, LayoutPlan, ReadoutTap};
use crate::numerics::{NumericConfig, ScalarValue};
use crate::pe::{PeCycles, PeError, PeMode, PeState, PortsIn, PortsOut, PowerClass, PowerTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArrayError {
    #[error("array too small: plan needs {need_rows}x{need_cols} PEs, array is {rows}x{cols}")]
    Capacity { need_rows: usize, need_cols: usize, rows: usize, cols: usize },
    #[error("invalid array configuration: {0}")]
    Config(String),
    #[error("phase {to} cannot follow {from}")]
    PhaseOrder { from: String, to: Phase },
    #[error("stream vector {index} has {got} elements, plan expects {expected}")]
    StreamShape { index: usize, expected: usize, got: usize },
    #[error(transparent)]
    Pe(#[from] PeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub rows: usize,
    pub cols: usize,
    pub cycle_time_ns: f64,
    pub numeric: NumericConfig,
    pub word_bits: u32,
    pub power_table: PowerTable,
}

impl ArrayConfig {
    /// 32-bit real datapath at 1.4 ns.
    pub fn new(rows: usize, cols: usize) -> Self {
        ArrayConfig {
            rows,
            cols,
            cycle_time_ns: 1.4,
            numeric: NumericConfig::default(),
            word_bits: 32,
            power_table: PowerTable::FixedPoint32,
        }
    }

    pub fn with_numeric(mut self, numeric: NumericConfig) -> Self {
        self.numeric = numeric;
        self
    }

    pub fn with_power_table(mut self, table: PowerTable) -> Self {
        self.power_table = table;
        self
    }

    /// Cycle time in whole picoseconds.
    pub fn cycle_ps(&self) -> u64 {
        (self.cycle_time_ns * 1000.0).round() as u64
    }

    pub fn pes(&self) -> usize {
        self.rows * self.cols
    }

    pub fn validate(&self) -> Result<(), ArrayError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(ArrayError::Config(format!("array must have at least one PE, got {}x{}", self.rows, self.cols)));
        }
        if !(self.cycle_time_ns > 0.0 && self.cycle_time_ns.is_finite()) {
            return Err(ArrayError::Config(format!("cycle time must be positive, got {}", self.cycle_time_ns)));
        }
        if self.word_bits != 32 {
            return Err(ArrayError::Config(format!("word size must be 32 bits, got {}", self.word_bits)));
        }
        self.numeric.validate().map_err(|e| ArrayError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Reset,
    PreLoad,
    Compute,
    Readout,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Reset, Phase::PreLoad, Phase::Compute, Phase::Readout];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::Reset => "reset",
            Phase::PreLoad => "preload",
            Phase::Compute => "compute",
            Phase::Readout => "readout",
        };
        f.write_str(s)
    }
}

/// Word counts on the two SRAM ports during one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortSample {
    pub phase: Phase,
    pub weight_reads: u32,
    pub weight_writes: u32,
    pub io_reads: u32,
    pub io_writes: u32,
}

impl PortSample {
    fn idle(phase: Phase) -> Self {
        PortSample { phase, weight_reads: 0, weight_writes: 0, io_reads: 0, io_writes: 0 }
    }
}

/// One sample per simulated cycle since the last reset.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortTrace {
    pub samples: Vec<PortSample>,
}

impl PortTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn totals(&self) -> PortTotals {
        let mut t = PortTotals::default();
        for s in &self.samples {
            t.weight_reads += u64::from(s.weight_reads);
            t.weight_writes += u64::from(s.weight_writes);
            t.io_reads += u64::from(s.io_reads);
            t.io_writes += u64::from(s.io_writes);
        }
        t
    }

    /// CSV with columns `cycle, weight_reads, weight_writes, io_reads, io_writes`.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["cycle", "weight_reads", "weight_writes", "io_reads", "io_writes"])?;
        for (i, s) in self.samples.iter().enumerate() {
            out.serialize((i + 1, s.weight_reads, s.weight_writes, s.io_reads, s.io_writes))?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortTotals {
    pub weight_reads: u64,
    pub weight_writes: u64,
    pub io_reads: u64,
    pub io_writes: u64,
}

/// PE-cycles per power class, accumulated over a phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTally {
    pub sleep: u64,
    pub pass: u64,
    pub mac: u64,
}

impl ClassTally {
    fn add(&mut self, class: PowerClass, n: u64) {
        match class {
            PowerClass::Sleep => self.sleep += n,
            PowerClass::PassThrough => self.pass += n,
            PowerClass::Mac => self.mac += n,
        }
    }

    pub fn merge(&mut self, o: &ClassTally) {
        self.sleep += o.sleep;
        self.pass += o.pass;
        self.mac += o.mac;
    }

    pub fn pe_cycles(&self) -> u64 {
        self.sleep + self.pass + self.mac
    }

    /// Energy in attojoules (µW · ps).
    pub fn energy_aj(&self, table: PowerTable, cycle_ps: u64) -> u128 {
        let uw = self.sleep as u128 * table.power_uw(PowerClass::Sleep) as u128
            + self.pass as u128 * table.power_uw(PowerClass::PassThrough) as u128
            + self.mac as u128 * table.power_uw(PowerClass::Mac) as u128;
        uw * cycle_ps as u128
    }
}

/// Cycle and PE-occupancy bookkeeping for every phase.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseLedger {
    pub cycles: [u64; 4],
    pub classes: [ClassTally; 4],
    /// Compute-phase PE-cycles per mode, indexed by [`PeMode::index`].
    pub by_mode: [u64; 8],
}

impl PhaseLedger {
    pub fn total_cycles(&self) -> u64 {
        self.cycles.iter().sum()
    }

    pub fn merge(&mut self, o: &PhaseLedger) {
        for i in 0..4 {
            self.cycles[i] += o.cycles[i];
            self.classes[i].merge(&o.classes[i]);
        }
        for i in 0..8 {
            self.by_mode[i] += o.by_mode[i];
        }
    }
}

/// A boundary port a PE output leaves through or a PE input comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Endpoint {
    Pe { row: usize, col: usize },
    NorthEdge { col: usize },
    WestEdge { row: usize },
    EastEdge { row: usize },
    SouthEdge { col: usize },
    /// The top-right injector feeding diagonal inputs on the north and east edges.
    DiagInjector { row: usize, col: usize },
}

/// Neighbour map of one PE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Wiring {
    pub north_from: Endpoint,
    pub west_from: Endpoint,
    pub diag_from: Endpoint,
    pub south_to: Endpoint,
    pub east_to: Endpoint,
    pub diag_to: Endpoint,
}

/// Fixed interconnect: south → north of the PE below, east → west of the PE
/// to the right, diag → diag of the PE below-left.
pub fn wire(rows: usize, cols: usize, r: usize, c: usize) -> Wiring {
    assert!(r < rows && c < cols, "PE ({r},{c}) outside {rows}x{cols} array");
    let pe = |row, col| Endpoint::Pe { row, col };
    Wiring {
        north_from: if r == 0 { Endpoint::NorthEdge { col: c } } else { pe(r - 1, c) },
        west_from: if c == 0 { Endpoint::WestEdge { row: r } } else { pe(r, c - 1) },
        diag_from: if r == 0 || c + 1 == cols { Endpoint::DiagInjector { row: r, col: c } } else { pe(r - 1, c + 1) },
        south_to: if r + 1 == rows { Endpoint::SouthEdge { col: c } } else { pe(r + 1, c) },
        east_to: if c + 1 == cols { Endpoint::EastEdge { row: r } } else { pe(r, c + 1) },
        diag_to: if c == 0 {
            Endpoint::WestEdge { row: r }
        } else if r + 1 == rows {
            Endpoint::SouthEdge { col: c - 1 }
        } else {
            pe(r + 1, c - 1)
        },
    }
}

/// Input sequence for the compute phase.
#[derive(Debug, Clone, Copy)]
pub enum Stream<'a> {
    /// Scalar tokens, one per cycle.
    Tokens(&'a [f64]),
    /// Vectors, one per stream element.
    Vectors(&'a [Vec<f64>]),
}

impl Stream<'_> {
    pub fn len(&self) -> usize {
        match self {
            Stream::Tokens(t) => t.len(),
            Stream::Vectors(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Values collected during one compute phase.
#[derive(Debug, Clone, PartialEq)]
pub struct ComputeOutput {
    /// One column per tap, one entry per stream element.
    pub taps: Vec<Vec<ScalarValue>>,
    pub cycles: u64,
    /// First cycle in which any tap carried a nonzero word.
    pub first_nonzero_cycle: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SnapshotCell {
    pub mode: String,
    pub stationary: String,
    pub accum: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Snapshot {
    pub rows: usize,
    pub cols: usize,
    pub grid: Vec<Vec<SnapshotCell>>,
}

/// Simulated array state.
#[derive(Debug, Clone)]
pub struct Array {
    cfg: ArrayConfig,
    pes: Vec<PeState>,
    next: Vec<PeState>,
    regs: Vec<PortsOut>,
    next_regs: Vec<PortsOut>,
    last_phase: Option<Phase>,
    footprint: Option<(usize, usize)>,
    ledger: PhaseLedger,
    trace: PortTrace,
    warnings: Vec<String>,
}

impl Array {
    /// A powered-up array; call [`Array::run_reset`] before use.
    pub fn new(cfg: ArrayConfig) -> Result<Self, ArrayError> {
        cfg.validate()?;
        let zero = cfg.numeric.zero();
        let n = cfg.pes();
        Ok(Array {
            cfg,
            pes: vec![PeState::new(zero); n],
            next: vec![PeState::new(zero); n],
            regs: vec![PortsOut::splat(zero); n],
            next_regs: vec![PortsOut::splat(zero); n],
            last_phase: None,
            footprint: None,
            ledger: PhaseLedger::default(),
            trace: PortTrace::default(),
            warnings: Vec::new(),
        })
    }

    pub fn config(&self) -> &ArrayConfig {
        &self.cfg
    }

    pub fn pe(&self, r: usize, c: usize) -> &PeState {
        &self.pes[r * self.cfg.cols + c]
    }

    pub fn ledger(&self) -> &PhaseLedger {
        &self.ledger
    }

    pub fn trace(&self) -> &PortTrace {
        &self.trace
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn last_phase(&self) -> Option<Phase> {
        self.last_phase
    }

    /// Saturation events summed over all PEs since the last reset.
    pub fn saturations(&self) -> u64 {
        self.pes.iter().map(|p| p.saturations).sum()
    }

    pub fn pe_cycles(&self) -> PeCycles {
        let mut t = PeCycles::default();
        for p in &self.pes {
            t.sleep += p.cycles.sleep;
            t.pass += p.cycles.pass;
            t.mac += p.cycles.mac;
            for i in 0..8 {
                t.by_mode[i] += p.cycles.by_mode[i];
            }
        }
        t
    }

    fn check_order(&self, to: Phase) -> Result<(), ArrayError> {
        let ok = match to {
            Phase::Reset => true,
            Phase::PreLoad => self.last_phase == Some(Phase::Reset),
            Phase::Compute => matches!(self.last_phase, Some(Phase::PreLoad | Phase::Compute | Phase::Readout)),
            Phase::Readout => self.last_phase == Some(Phase::Compute),
        };
        if ok {
            Ok(())
        } else {
            let from = self.last_phase.map_or_else(|| "power-up".to_string(), |p| p.to_string());
            Err(ArrayError::PhaseOrder { from, to })
        }
    }

    /// Bills one cycle: footprint PEs at `inside`, the rest at Sleep.
    fn bill_cycle(&mut self, phase: Phase, inside: PowerClass) {
        let (fr, fc) = self.footprint.unwrap_or((0, 0));
        let cols = self.cfg.cols;
        for (i, pe) in self.pes.iter_mut().enumerate() {
            let class = if i / cols < fr && i % cols < fc { inside } else { PowerClass::Sleep };
            pe.cycles.charge(class);
        }
        let inner = (fr * fc) as u64;
        let tally = &mut self.ledger.classes[phase.index()];
        tally.add(inside, inner);
        tally.add(PowerClass::Sleep, self.cfg.pes() as u64 - inner);
        self.ledger.cycles[phase.index()] += 1;
    }

    /// Clears every buffer and counter, then spends one cycle at Sleep power.
    pub fn run_reset(&mut self) {
        let zero = self.cfg.numeric.zero();
        self.pes.fill(PeState::new(zero));
        self.regs.fill(PortsOut::splat(zero));
        self.ledger = PhaseLedger::default();
        self.trace = PortTrace::default();
        self.warnings.clear();
        self.footprint = None;
        self.bill_cycle(Phase::Reset, PowerClass::Sleep);
        self.trace.samples.push(PortSample::idle(Phase::Reset));
        self.last_phase = Some(Phase::Reset);
    }

    /// Clears accumulators and pipeline registers between sequences while
    /// keeping stationary operands and control words. Costs one Reset-phase
    /// cycle at Sleep power.
    pub fn clear_state(&mut self) {
        let zero = self.cfg.numeric.zero();
        for p in &mut self.pes {
            p.accum = zero;
            p.cycles.charge(PowerClass::Sleep);
        }
        self.regs.fill(PortsOut::splat(zero));
        self.ledger.classes[Phase::Reset.index()].add(PowerClass::Sleep, self.cfg.pes() as u64);
        self.ledger.cycles[Phase::Reset.index()] += 1;
        self.trace.samples.push(PortSample::idle(Phase::Reset));
    }

    /// Shifts the plan's stationary operands and control words in from the
    /// west edge, last column first. Takes `plan.cols + 1` cycles: one to read
    /// the first column vector, then one per column shift (each overlapping
    /// the read of the next vector).
    pub fn run_preload(&mut self, plan: &LayoutPlan) -> Result<u64, ArrayError> {
        if plan.rows > self.cfg.rows || plan.cols > self.cfg.cols {
            return Err(ArrayError::Capacity { need_rows: plan.rows, need_cols: plan.cols, rows: self.cfg.rows, cols: self.cfg.cols });
        }
        self.check_order(Phase::PreLoad)?;
        let (fr, fc) = (plan.rows, plan.cols);
        let cols = self.cfg.cols;
        self.footprint = Some((fr, fc));
        let column = |c: usize| -> Vec<(ScalarValue, u32)> { (0..fr).map(|r| (plan.stationary_at(r, c), plan.control_word(r, c))).collect() };
        let mut load_reg: Vec<(ScalarValue, u32)> = Vec::new();
        for cycle in 1..=(fc as u64 + 1) {
            if cycle > 1 {
                for (r, &(mut carry)) in load_reg.iter().enumerate() {
                    for c in 0..fc {
                        let i = r * cols + c;
                        let (next, out) = self.pes[i].preload_step(carry.0, carry.1)?;
                        self.pes[i] = next;
                        carry = out;
                    }
                }
                // preload_step already charged the footprint; charge the rest.
                for (i, pe) in self.pes.iter_mut().enumerate() {
                    if i / cols >= fr || i % cols >= fc {
                        pe.cycles.charge(PowerClass::Sleep);
                    }
                }
            } else {
                for (i, pe) in self.pes.iter_mut().enumerate() {
                    let inside = i / cols < fr && i % cols < fc;
                    pe.cycles.charge(if inside { PowerClass::PassThrough } else { PowerClass::Sleep });
                }
            }
            let reads = if cycle <= fc as u64 {
                load_reg = column(fc - cycle as usize);
                fr as u32
            } else {
                0
            };
            let inner = (fr * fc) as u64;
            let tally = &mut self.ledger.classes[Phase::PreLoad.index()];
            tally.add(PowerClass::PassThrough, inner);
            tally.add(PowerClass::Sleep, self.cfg.pes() as u64 - inner);
            self.ledger.cycles[Phase::PreLoad.index()] += 1;
            self.trace.samples.push(PortSample { weight_reads: reads, ..PortSample::idle(Phase::PreLoad) });
        }
        self.last_phase = Some(Phase::PreLoad);
        Ok(fc as u64 + 1)
    }

    /// Streams `input` through the loaded plan and collects tap outputs.
    pub fn run_compute(&mut self, plan: &LayoutPlan, input: Stream<'_>) -> Result<ComputeOutput, ArrayError> {
        self.check_order(Phase::Compute)?;
        let len = input.len();
        if let (Stream::Vectors(v), InjectPlan::WestSkewed | InjectPlan::OutputStationary { .. }) = (input, &plan.inject) {
            for (i, vec) in v.iter().enumerate() {
                let expected = match plan.inject {
                    InjectPlan::WestSkewed => plan.rows,
                    _ => v.first().map_or(0, Vec::len),
                };
                if vec.len() != expected {
                    return Err(ArrayError::StreamShape { index: i, expected, got: vec.len() });
                }
            }
        }
        let total = plan.predicted_total(len);
        let numeric = self.cfg.numeric;
        let zero = numeric.zero();
        let (rows, cols) = (self.cfg.rows, self.cfg.cols);

        let tokens: Vec<ScalarValue> = match input {
            Stream::Tokens(t) => t.iter().map(|&u| numeric.encode(u, 0.0)).collect(),
            Stream::Vectors(_) => Vec::new(),
        };
        let vectors: Vec<Vec<ScalarValue>> = match input {
            Stream::Vectors(v) => v.iter().map(|row| row.iter().map(|&x| numeric.encode(x, 0.0)).collect()).collect(),
            Stream::Tokens(_) => Vec::new(),
        };

        let mut taps: Vec<Vec<ScalarValue>> = vec![Vec::with_capacity(len); plan.taps.len()];
        let mut first_nonzero = None;
        let mut north_in = vec![zero; cols];
        let mut west_in = vec![zero; rows];

        let mut mode_hist = [0u64; 8];
        for p in &self.pes {
            mode_hist[p.mode().index()] += 1;
        }

        for cycle in 1..=total {
            north_in.fill(zero);
            west_in.fill(zero);
            let mut diag_top = zero;
            let mut sample = PortSample::idle(Phase::Compute);
            match &plan.inject {
                InjectPlan::Broadcast => {
                    let t = cycle as usize - 1;
                    if t < len {
                        diag_top = match input {
                            Stream::Tokens(_) => tokens[t],
                            Stream::Vectors(_) => numeric.encode(*input_vector(input, t).first().unwrap_or(&0.0), 0.0),
                        };
                        sample.io_reads = 1;
                    }
                }
                InjectPlan::WestSkewed => {
                    for (k, w) in west_in.iter_mut().enumerate().take(plan.rows) {
                        if let Some(s) = (cycle as usize).checked_sub(k + 1).filter(|&s| s < len) {
                            *w = stream_elem(input, &tokens, &vectors, s, k);
                            sample.io_reads += 1;
                        }
                    }
                }
                InjectPlan::OutputStationary { north } => {
                    for (m, w) in west_in.iter_mut().enumerate().take(plan.rows.min(len)) {
                        let kk = vectors.get(m).map_or(0, Vec::len);
                        if let Some(k) = (cycle as usize).checked_sub(m + 1).filter(|&k| k < kk) {
                            *w = vectors[m][k];
                            sample.io_reads += 1;
                        }
                    }
                    for (n, col) in north.iter().enumerate().take(plan.cols) {
                        if let Some(k) = (cycle as usize).checked_sub(n + 1).filter(|&k| k < col.len()) {
                            north_in[n] = col[k];
                            sample.weight_reads += 1;
                        }
                    }
                }
            }

            self.step(&north_in, &west_in, diag_top);

            for (ti, tap) in plan.taps.iter().enumerate() {
                let v = self.regs[tap.row * cols + tap.col].south;
                if first_nonzero.is_none() && !v.is_zero() {
                    first_nonzero = Some(cycle);
                }
                if let Some(s) = collect_index(tap, cycle, len) {
                    debug_assert_eq!(taps[ti].len(), s);
                    taps[ti].push(v);
                    sample.io_writes += 1;
                }
            }
            self.trace.samples.push(sample);
        }

        let tally = &mut self.ledger.classes[Phase::Compute.index()];
        for m in PeMode::ALL {
            tally.add(m.power_class(), mode_hist[m.index()] * total);
            self.ledger.by_mode[m.index()] += mode_hist[m.index()] * total;
        }
        self.ledger.cycles[Phase::Compute.index()] += total;
        self.last_phase = Some(Phase::Compute);
        Ok(ComputeOutput { taps, cycles: total, first_nonzero_cycle: first_nonzero })
    }

    /// One synchronous cycle: all PEs read the registered outputs from the
    /// previous cycle, then all registers update together.
    fn step(&mut self, north_in: &[ScalarValue], west_in: &[ScalarValue], diag_top: ScalarValue) {
        let (rows, cols) = (self.cfg.rows, self.cfg.cols);
        let zero = self.cfg.numeric.zero();
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                let north = if r == 0 { north_in[c] } else { self.regs[i - cols].south };
                let west = if c == 0 { west_in[r] } else { self.regs[i - 1].east };
                let diag = if r == 0 {
                    diag_top
                } else if c + 1 == cols {
                    zero
                } else {
                    self.regs[i - cols + 1].diag
                };
                let (pe, out) = self.pes[i].compute_step(PortsIn { north, west, diag });
                self.next[i] = pe;
                self.next_regs[i] = out;
            }
        }
        std::mem::swap(&mut self.pes, &mut self.next);
        std::mem::swap(&mut self.regs, &mut self.next_regs);
    }

    /// Drains accumulator-resident results by shifting each column south one
    /// row per cycle. Returns the `rows × cols` result grid of the footprint.
    ///
    /// On a streaming plan this is a no-op that records a warning.
    pub fn run_readout(&mut self, plan: &LayoutPlan) -> Result<Vec<Vec<ScalarValue>>, ArrayError> {
        self.check_order(Phase::Readout)?;
        if !plan.resident_outputs {
            self.warnings.push("readout requested on a plan with streaming outputs; skipped".into());
            return Ok(Vec::new());
        }
        let (fr, fc) = (plan.rows, plan.cols);
        let cols = self.cfg.cols;
        let zero = self.cfg.numeric.zero();
        let mut out = vec![vec![zero; fc]; fr];
        for cycle in 0..fr {
            let dest = fr - 1 - cycle;
            for c in 0..fc {
                out[dest][c] = self.pes[(fr - 1) * cols + c].accum;
                for r in (1..fr).rev() {
                    self.pes[r * cols + c].accum = self.pes[(r - 1) * cols + c].accum;
                }
                self.pes[c].accum = zero;
            }
            self.bill_cycle(Phase::Readout, PowerClass::PassThrough);
            self.trace.samples.push(PortSample { io_writes: fc as u32, ..PortSample::idle(Phase::Readout) });
        }
        self.last_phase = Some(Phase::Readout);
        Ok(out)
    }

    /// Debug dump of the PE grid.
    pub fn snapshot(&self) -> Snapshot {
        let grid = (0..self.cfg.rows)
            .map(|r| {
                (0..self.cfg.cols)
                    .map(|c| {
                        let p = self.pe(r, c);
                        SnapshotCell {
                            mode: p.mode().to_string(),
                            stationary: format!("{:08x}", p.stationary.to_word()),
                            accum: format!("{:08x}", p.accum.to_word()),
                        }
                    })
                    .collect()
            })
            .collect();
        Snapshot { rows: self.cfg.rows, cols: self.cfg.cols, grid }
    }
}

fn input_vector<'a>(input: Stream<'a>, s: usize) -> &'a [f64] {
    match input {
        Stream::Vectors(v) => &v[s],
        Stream::Tokens(t) => std::slice::from_ref(&t[s]),
    }
}

fn stream_elem(input: Stream<'_>, tokens: &[ScalarValue], vectors: &[Vec<ScalarValue>], s: usize, k: usize) -> ScalarValue {
    match input {
        Stream::Tokens(_) => tokens[s],
        Stream::Vectors(_) => vectors[s][k],
    }
}

fn collect_index(tap: &ReadoutTap, cycle: u64, len: usize) -> Option<usize> {
    let s = cycle.checked_sub(tap.first_cycle)? as usize;
    (s < len).then_some(s)
}
