//! Dataflow planning: turns a layer description and an array geometry into a
//! [`LayoutPlan`] (per-PE modes, stationary operands, injection style, readout
//! taps and predicted latency).
//!
//! # SSM layout
//!
//! For `n` states and `h` heads the footprint is `(n + h + 1) × (n + h)`:
//!
//! * row 0, columns `h..h+n`: BWS cells holding `bbar_j`, scaling the token
//!   broadcast on the top diagonal inputs;
//! * row 1, same columns: FRI (S4) or TRI (Liquid-S4) cells holding `abar_j`;
//!   they keep `x_j` in their accumulator and emit it on the diagonal;
//! * below, `x_j` travels south-west and crosses head column `k < h` at row
//!   `1 + (h + j - k)`, where a BWS cell holding `C[k][j]` adds its product to
//!   the partial sum moving south;
//! * diagonal paths are bridged with pass-through cells, and head columns
//!   below their last product pass the sum down to the bottom row;
//! * everything else sleeps.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array::ArrayConfig;
use crate::golden::{DiscreteCoeffs, GoldenError, Matrix, SsmLayerParams, SsmVariant};
use crate::numerics::{Precision, ScalarValue};
use crate::pe::{PeControl, PeMode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("array too small: plan needs {need_rows}x{need_cols} PEs, array is {rows}x{cols}")]
    Capacity { need_rows: usize, need_cols: usize, rows: usize, cols: usize },
    #[error("complex coefficient {0} cannot be mapped in real32 precision")]
    Precision(String),
    #[error("matrix shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Golden(#[from] GoldenError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataflow {
    Os,
    Ws,
    Is,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    Ssm { variant: SsmVariant, n: usize, h: usize },
    Gemm { dataflow: Dataflow },
}

/// How boundary inputs are driven during the compute phase.
#[derive(Debug, Clone, PartialEq)]
pub enum InjectPlan {
    /// One token per cycle, fanned out to every top-row diagonal input.
    Broadcast,
    /// Vector `s` of the stream enters the west edge skewed: element `k`
    /// reaches row `k` at compute cycle `s + k + 1`.
    WestSkewed,
    /// Output-stationary: row `m` of the stream enters the west edge with
    /// element `k` at cycle `k + m + 1`; column `c` receives `north[c][k]` at
    /// cycle `k + c + 1`.
    OutputStationary { north: Vec<Vec<ScalarValue>> },
}

/// A collection point: the south output of PE `(row, col)`. Stream element
/// `s` is valid there at compute cycle `first_cycle + s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadoutTap {
    pub row: usize,
    pub col: usize,
    pub first_cycle: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutPlan {
    pub kind: PlanKind,
    pub array_rows: usize,
    pub array_cols: usize,
    /// Footprint, anchored at the array's top-left PE.
    pub rows: usize,
    pub cols: usize,
    pub complex: bool,
    pub modes: Vec<PeMode>,
    pub stationary: Vec<ScalarValue>,
    pub inject: InjectPlan,
    pub taps: Vec<ReadoutTap>,
    /// Outputs resident in accumulators, drained by a readout phase.
    pub resident_outputs: bool,
    pub predicted_first_output: u64,
    /// Cycles after the last stream element needed to flush the pipeline.
    pub drain_cycles: u64,
}

impl LayoutPlan {
    #[inline]
    pub fn mode(&self, r: usize, c: usize) -> PeMode {
        self.modes[r * self.cols + c]
    }

    #[inline]
    pub fn stationary_at(&self, r: usize, c: usize) -> ScalarValue {
        self.stationary[r * self.cols + c]
    }

    pub fn control_word(&self, r: usize, c: usize) -> u32 {
        PeControl::new(self.mode(r, c), self.complex).encode()
    }

    /// Predicted compute cycles for a stream of `len` elements.
    pub fn predicted_total(&self, len: usize) -> u64 {
        if len == 0 {
            0
        } else {
            len as u64 + self.drain_cycles
        }
    }

    pub fn active_pes(&self) -> usize {
        self.modes.iter().filter(|m| m.is_mac()).count()
    }

    pub fn count_mode(&self, mode: PeMode) -> usize {
        self.modes.iter().filter(|&&m| m == mode).count()
    }

    /// Inspection document: modes as strings, stationary operands as hex words.
    pub fn to_document(&self) -> PlanDocument {
        let grid = |f: &dyn Fn(usize, usize) -> String| -> Vec<Vec<String>> {
            (0..self.rows).map(|r| (0..self.cols).map(|c| f(r, c)).collect()).collect()
        };
        PlanDocument {
            kind: self.kind,
            array_rows: self.array_rows,
            array_cols: self.array_cols,
            rows: self.rows,
            cols: self.cols,
            precision: if self.complex { Precision::Complex16 } else { Precision::Real32 },
            modes: grid(&|r, c| self.mode(r, c).to_string()),
            stationary: grid(&|r, c| format!("{:08x}", self.stationary_at(r, c).to_word())),
            taps: self.taps.clone(),
            predicted_first_output: self.predicted_first_output,
            drain_cycles: self.drain_cycles,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub kind: PlanKind,
    pub array_rows: usize,
    pub array_cols: usize,
    pub rows: usize,
    pub cols: usize,
    pub precision: Precision,
    pub modes: Vec<Vec<String>>,
    pub stationary: Vec<Vec<String>>,
    pub taps: Vec<ReadoutTap>,
    pub predicted_first_output: u64,
    pub drain_cycles: u64,
}

fn encode_coeff(cfg: &ArrayConfig, what: &str, z: Complex64) -> Result<ScalarValue, MapError> {
    if cfg.numeric.precision == Precision::Real32 && z.im != 0.0 {
        return Err(MapError::Precision(format!("{what} = {z}")));
    }
    Ok(cfg.numeric.encode(z.re, z.im))
}

/// Footprint of an SSM layer with `n` states and `h` heads.
pub fn ssm_footprint(n: usize, h: usize) -> (usize, usize) {
    (n + h + 1, n + h)
}

fn plan_ssm(p: &SsmLayerParams, c: &DiscreteCoeffs, cfg: &ArrayConfig, variant: SsmVariant) -> Result<LayoutPlan, MapError> {
    p.validate()?;
    let (n, h) = (p.n(), p.h());
    if c.abar.len() != n || c.bbar.len() != n {
        return Err(MapError::Shape(format!("coefficients have {} entries, layer has {n} states", c.abar.len())));
    }
    let (rows, cols) = ssm_footprint(n, h);
    if rows > cfg.rows || cols > cfg.cols {
        return Err(MapError::Capacity { need_rows: rows, need_cols: cols, rows: cfg.rows, cols: cfg.cols });
    }
    let zero = cfg.numeric.zero();
    let mut modes = vec![PeMode::Sleep; rows * cols];
    let mut stationary = vec![zero; rows * cols];
    let recur = match variant {
        SsmVariant::S4 => PeMode::Fri,
        SsmVariant::Liquid => PeMode::Tri,
    };
    for j in 0..n {
        let col = h + j;
        modes[col] = PeMode::Bws;
        stationary[col] = encode_coeff(cfg, &format!("bbar[{j}]"), c.bbar[j])?;
        modes[cols + col] = recur;
        stationary[cols + col] = encode_coeff(cfg, &format!("abar[{j}]"), c.abar[j])?;
    }
    for r in 2..rows {
        for col in 0..cols {
            // State index whose diagonal path passes through (r, col).
            let j = col as isize - h as isize + r as isize - 1;
            let idx = r * cols + col;
            if col < h {
                if (0..n as isize).contains(&j) {
                    modes[idx] = PeMode::Bws;
                    stationary[idx] = encode_coeff(cfg, &format!("C[{col}][{j}]"), p.c[col][j as usize])?;
                } else if j >= n as isize {
                    modes[idx] = PeMode::PassThrough;
                }
            } else if j < n as isize {
                modes[idx] = PeMode::PassThrough;
            }
        }
    }
    let taps = (0..h).map(|k| ReadoutTap { row: rows - 1, col: k, first_cycle: rows as u64 }).collect();
    Ok(LayoutPlan {
        kind: PlanKind::Ssm { variant, n, h },
        array_rows: cfg.rows,
        array_cols: cfg.cols,
        rows,
        cols,
        complex: cfg.numeric.precision == Precision::Complex16,
        modes,
        stationary,
        inject: InjectPlan::Broadcast,
        taps,
        resident_outputs: false,
        predicted_first_output: rows as u64,
        drain_cycles: rows as u64 - 1,
    })
}

pub fn plan_s4(p: &SsmLayerParams, c: &DiscreteCoeffs, cfg: &ArrayConfig) -> Result<LayoutPlan, MapError> {
    plan_ssm(p, c, cfg, SsmVariant::S4)
}

pub fn plan_liquid(p: &SsmLayerParams, c: &DiscreteCoeffs, cfg: &ArrayConfig) -> Result<LayoutPlan, MapError> {
    plan_ssm(p, c, cfg, SsmVariant::Liquid)
}

/// `M × K` times `K × N` under one dataflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GemmSpec {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub dataflow: Dataflow,
}

/// One array-sized block of a tiled product.
#[derive(Debug, Clone, PartialEq)]
pub struct GemmTile {
    pub m0: usize,
    pub k0: usize,
    pub n0: usize,
    pub tm: usize,
    pub tk: usize,
    pub tn: usize,
    pub plan: LayoutPlan,
    /// Streamed operand, one vector per stream element.
    pub stream: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GemmSchedule {
    pub spec: GemmSpec,
    pub tiles: Vec<GemmTile>,
}

fn blocks(len: usize, step: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..len).step_by(step).map(move |s| (s, step.min(len - s)))
}

fn encode_real(cfg: &ArrayConfig, x: f64) -> ScalarValue {
    cfg.numeric.encode(x, 0.0)
}

/// Splits `a · b` into tiles and plans each one.
///
/// Stationary dimensions are cut to the array size; the streamed dimension is
/// cut into blocks of `cfg.rows` elements. Partial products over `K` are summed
/// on the host.
pub fn plan_gemm(spec: GemmSpec, a: &Matrix, b: &Matrix, cfg: &ArrayConfig) -> Result<GemmSchedule, MapError> {
    if spec.m == 0 || spec.k == 0 || spec.n == 0 {
        return Err(MapError::Shape("GEMM dimensions must be positive".into()));
    }
    if a.len() != spec.m || a.iter().any(|r| r.len() != spec.k) {
        return Err(MapError::Shape(format!("A must be {}x{}", spec.m, spec.k)));
    }
    if b.len() != spec.k || b.iter().any(|r| r.len() != spec.n) {
        return Err(MapError::Shape(format!("B must be {}x{}", spec.k, spec.n)));
    }
    let (rows, cols) = (cfg.rows, cfg.cols);
    let zero = cfg.numeric.zero();
    let complex = cfg.numeric.precision == Precision::Complex16;
    let mut tiles = Vec::new();
    let base = |kind, fr: usize, fc: usize, mode| LayoutPlan {
        kind,
        array_rows: rows,
        array_cols: cols,
        rows: fr,
        cols: fc,
        complex,
        modes: vec![mode; fr * fc],
        stationary: vec![zero; fr * fc],
        inject: InjectPlan::WestSkewed,
        taps: Vec::new(),
        resident_outputs: false,
        predicted_first_output: 0,
        drain_cycles: (fr + fc - 2) as u64,
    };
    let kind = PlanKind::Gemm { dataflow: spec.dataflow };
    match spec.dataflow {
        Dataflow::Ws => {
            for (k0, tk) in blocks(spec.k, rows) {
                for (n0, tn) in blocks(spec.n, cols) {
                    for (m0, tm) in blocks(spec.m, rows) {
                        let mut plan = base(kind, tk, tn, PeMode::Ws);
                        for k in 0..tk {
                            for n in 0..tn {
                                plan.stationary[k * tn + n] = encode_real(cfg, b[k0 + k][n0 + n]);
                            }
                        }
                        plan.taps = (0..tn).map(|c| ReadoutTap { row: tk - 1, col: c, first_cycle: (tk + c) as u64 }).collect();
                        plan.predicted_first_output = tk as u64;
                        let stream = (0..tm).map(|m| a[m0 + m][k0..k0 + tk].to_vec()).collect();
                        tiles.push(GemmTile { m0, k0, n0, tm, tk, tn, plan, stream });
                    }
                }
            }
        }
        Dataflow::Is => {
            for (k0, tk) in blocks(spec.k, rows) {
                for (m0, tm) in blocks(spec.m, cols) {
                    for (n0, tn) in blocks(spec.n, rows) {
                        let mut plan = base(kind, tk, tm, PeMode::Is);
                        for k in 0..tk {
                            for m in 0..tm {
                                plan.stationary[k * tm + m] = encode_real(cfg, a[m0 + m][k0 + k]);
                            }
                        }
                        plan.taps = (0..tm).map(|c| ReadoutTap { row: tk - 1, col: c, first_cycle: (tk + c) as u64 }).collect();
                        plan.predicted_first_output = tk as u64;
                        let stream = (0..tn).map(|n| (0..tk).map(|k| b[k0 + k][n0 + n]).collect()).collect();
                        tiles.push(GemmTile { m0, k0, n0, tm, tk, tn, plan, stream });
                    }
                }
            }
        }
        Dataflow::Os => {
            for (m0, tm) in blocks(spec.m, rows) {
                for (n0, tn) in blocks(spec.n, cols) {
                    for (k0, tk) in blocks(spec.k, rows) {
                        let mut plan = base(kind, tm, tn, PeMode::Tos);
                        let north = (0..tn).map(|n| (0..tk).map(|k| encode_real(cfg, b[k0 + k][n0 + n])).collect()).collect();
                        plan.inject = InjectPlan::OutputStationary { north };
                        plan.resident_outputs = true;
                        plan.drain_cycles = (tk + tn - 2) as u64;
                        plan.predicted_first_output = (tk + tm + tn - 2) as u64;
                        let stream = (0..tm).map(|m| a[m0 + m][k0..k0 + tk].to_vec()).collect();
                        tiles.push(GemmTile { m0, k0, n0, tm, tk, tn, plan, stream });
                    }
                }
            }
        }
    }
    Ok(GemmSchedule { spec, tiles })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    Dimension { rows: usize, cols: usize, array_rows: usize, array_cols: usize },
    GridShape { expected: usize, modes: usize, stationary: usize },
    /// A computing PE none of whose inputs can carry data.
    Unreachable { row: usize, col: usize, mode: PeMode },
    /// A computing PE whose results never reach a collector.
    Dangling { row: usize, col: usize, mode: PeMode },
    SleepWithStationary { row: usize, col: usize },
}

struct PortUse {
    north: bool,
    west: bool,
    diag: bool,
}

fn consumes(mode: PeMode) -> PortUse {
    match mode {
        PeMode::Fri | PeMode::Tri => PortUse { north: true, west: false, diag: false },
        PeMode::Bws => PortUse { north: true, west: false, diag: true },
        PeMode::Tos | PeMode::Ws | PeMode::Is => PortUse { north: true, west: true, diag: false },
        PeMode::PassThrough => PortUse { north: true, west: true, diag: true },
        PeMode::Sleep => PortUse { north: false, west: false, diag: false },
    }
}

/// Output ports as (south, east, diag).
fn drives(mode: PeMode) -> PortUse {
    match mode {
        PeMode::Fri | PeMode::Tri => PortUse { north: false, west: false, diag: true },
        PeMode::Bws => PortUse { north: true, west: false, diag: true },
        PeMode::Tos | PeMode::Ws | PeMode::Is => PortUse { north: true, west: true, diag: false },
        PeMode::PassThrough => PortUse { north: true, west: true, diag: true },
        PeMode::Sleep => PortUse { north: false, west: false, diag: false },
    }
}

/// Structural checks; returns every violation found.
pub fn validate_plan(plan: &LayoutPlan, cfg: &ArrayConfig) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let (rows, cols) = (plan.rows, plan.cols);
    if rows > cfg.rows || cols > cfg.cols || rows == 0 || cols == 0 {
        out.push(Violation::Dimension { rows, cols, array_rows: cfg.rows, array_cols: cfg.cols });
    }
    if plan.modes.len() != rows * cols || plan.stationary.len() != rows * cols {
        out.push(Violation::GridShape { expected: rows * cols, modes: plan.modes.len(), stationary: plan.stationary.len() });
        return Err(out);
    }

    // Sources are north, west and north-east, so one row-major pass settles
    // forward reachability; sinks lie south, east and south-west, so one
    // reverse pass settles the backward direction.
    let mut fed = vec![false; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let use_ = consumes(plan.mode(r, c));
            let from_north = r == 0 || (fed[(r - 1) * cols + c] && drives(plan.mode(r - 1, c)).north);
            let from_west = c == 0 || (fed[r * cols + c - 1] && drives(plan.mode(r, c - 1)).west);
            let from_diag = r == 0 || (c + 1 < cols && fed[(r - 1) * cols + c + 1] && drives(plan.mode(r - 1, c + 1)).diag);
            fed[r * cols + c] = (use_.north && from_north) || (use_.west && from_west) || (use_.diag && from_diag);
        }
    }
    let tapped: Vec<bool> = {
        let mut t = vec![false; rows * cols];
        for tap in &plan.taps {
            if tap.row < rows && tap.col < cols {
                t[tap.row * cols + tap.col] = true;
            }
        }
        t
    };
    let mut drains = vec![false; rows * cols];
    for r in (0..rows).rev() {
        for c in (0..cols).rev() {
            let mode = plan.mode(r, c);
            let d = drives(mode);
            let to_south = tapped[r * cols + c] || (r + 1 < rows && drains[(r + 1) * cols + c] && consumes(plan.mode(r + 1, c)).north);
            let to_east = c + 1 < cols && drains[r * cols + c + 1] && consumes(plan.mode(r, c + 1)).west;
            let to_diag = r + 1 < rows && c > 0 && drains[(r + 1) * cols + c - 1] && consumes(plan.mode(r + 1, c - 1)).diag;
            drains[r * cols + c] = (plan.resident_outputs && mode == PeMode::Tos)
                || (d.north && to_south)
                || (d.west && (to_east || (c + 1 == cols && plan.resident_outputs)))
                || (d.diag && to_diag);
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            let mode = plan.mode(r, c);
            let i = r * cols + c;
            if mode == PeMode::Sleep {
                if !plan.stationary[i].is_zero() {
                    out.push(Violation::SleepWithStationary { row: r, col: c });
                }
                continue;
            }
            if !fed[i] {
                out.push(Violation::Unreachable { row: r, col: c, mode });
            }
            if !drains[i] {
                out.push(Violation::Dangling { row: r, col: c, mode });
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
