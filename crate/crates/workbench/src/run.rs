//! Executes a resolved workload on the simulator and on the reference model.

use epochsim_core::array::{Phase, PhaseLedger, PortTrace};
use epochsim_core::golden::{apply_pointwise, gemm_oracle, LayerSpec, Matrix};
use epochsim_core::mapper::Dataflow;
use epochsim_core::metrics::{sram_sizes, utilization, SramSizing, UtilizationReport};
use epochsim_core::par::ExecPolicy;
use epochsim_core::sim::{simulate_gemm, simulate_ssm_batch};
use epochsim_core::GemmSpec;
use serde::{Deserialize, Serialize};

use crate::config::{ResolvedLayer, Workload};
use crate::error::CliError;

/// Per-layer results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub index: usize,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_cols: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_first_output: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured_first_output: Option<u64>,
    /// Compute cycles per sequence of the batch.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub compute_cycles: Vec<u64>,
    pub cycles: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tiles: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utilization: Option<UtilizationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sram: Option<SramSizing>,
    /// Average io-port words per cycle while tokens stream in and outputs stream out.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady_io_words_per_cycle: Option<f64>,
    pub saturations: u64,
    /// Largest deviation from the reference for standalone GEMM layers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gemm_max_abs_error: Option<f64>,
}

impl LayerReport {
    fn new(index: usize, kind: &str) -> Self {
        LayerReport {
            index,
            kind: kind.to_string(),
            states: None,
            heads: None,
            plan_rows: None,
            plan_cols: None,
            predicted_first_output: None,
            measured_first_output: None,
            compute_cycles: Vec::new(),
            cycles: 0,
            tiles: None,
            utilization: None,
            sram: None,
            steady_io_words_per_cycle: None,
            saturations: 0,
            gemm_max_abs_error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorLocation {
    /// `None` for a standalone GEMM layer.
    pub sequence: Option<usize>,
    pub layer: Option<usize>,
    pub row: usize,
    pub column: usize,
}

impl std::fmt::Display for ErrorLocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.sequence, self.layer) {
            (Some(s), _) => write!(f, "sequence {s}, t={}, channel {}", self.row, self.column),
            (None, Some(l)) => write!(f, "gemm layer {l}, element ({}, {})", self.row, self.column),
            (None, None) => write!(f, "({}, {})", self.row, self.column),
        }
    }
}

/// Everything a run produces before it is turned into report files.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub layers: Vec<LayerReport>,
    pub ledger: PhaseLedger,
    pub trace: PortTrace,
    pub saturations: u64,
    /// Per sequence, final stack output `T × width`.
    pub simulated: Vec<Matrix>,
    pub golden: Vec<Matrix>,
    pub max_abs_error: f64,
    pub error_location: Option<ErrorLocation>,
    pub warnings: Vec<String>,
}

/// Steady-state io traffic of one SSM compute phase: the mean over cycles in
/// which both a token enters and an output leaves.
fn steady_io(trace: &PortTrace, compute_start: usize, first: u64, seq_len: usize) -> Option<f64> {
    let lo = first as usize;
    let hi = seq_len;
    if hi < lo {
        return None;
    }
    let window = &trace.samples[compute_start + lo - 1..compute_start + hi];
    let words: u64 = window.iter().map(|s| u64::from(s.io_reads + s.io_writes)).sum();
    Some(words as f64 / window.len() as f64)
}

/// Dense layer on the array: `X · W` as a weight-stationary GEMM, bias and
/// activation on the host.
fn run_dense(seq: &Matrix, layer: &LayerSpec, w: &Workload, policy: ExecPolicy) -> Result<(Matrix, epochsim_core::sim::GemmResult), CliError> {
    let LayerSpec::Dense { weights, bias, activation } = layer else { unreachable!("dense layer expected") };
    let spec = GemmSpec { m: seq.len(), k: weights.len(), n: weights.first().map_or(0, Vec::len), dataflow: Dataflow::Ws };
    let r = simulate_gemm(spec, seq, weights, &w.array, policy)?;
    let mut y = r.c.clone();
    for row in &mut y {
        if let Some(b) = bias {
            row.iter_mut().zip(b).for_each(|(y, b)| *y += b);
        }
        if let Some(f) = activation {
            row.iter_mut().for_each(|y| *y = f.eval(*y));
        }
    }
    Ok((y, r))
}

pub fn run_workload(w: &Workload, policy: ExecPolicy) -> Result<RunOutcome, CliError> {
    let inputs = w.inputs();
    let golden: Vec<Matrix> = inputs
        .iter()
        .map(|u| w.golden.layers.iter().try_fold(u.clone(), |seq, l| apply_pointwise(l, &seq)))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Other(format!("reference model: {e}")))?;

    let mut cur = inputs;
    let mut ledger = PhaseLedger::default();
    let mut trace = PortTrace::default();
    let mut layers = Vec::new();
    let mut saturations = 0;
    let mut warnings = Vec::new();
    let mut gemm_err: (f64, Option<ErrorLocation>) = (0.0, None);

    for (i, layer) in w.layers.iter().enumerate() {
        let mut rep = LayerReport::new(i, layer.kind());
        match layer {
            ResolvedLayer::Ssm { variant, params, .. } => {
                let seqs: Vec<Vec<f64>> = cur.iter().map(|s| s.iter().map(|r| r[0]).collect()).collect();
                let r = simulate_ssm_batch(params, *variant, &w.array, &seqs)?;
                let fc = r.plan.cols;
                rep.states = Some(params.n());
                rep.heads = Some(params.h());
                rep.plan_rows = Some(r.plan.rows);
                rep.plan_cols = Some(fc);
                rep.predicted_first_output = Some(r.plan.predicted_first_output);
                rep.measured_first_output = r.measured_first_output;
                rep.compute_cycles = r.compute_cycles.clone();
                rep.cycles = r.ledger.total_cycles();
                rep.utilization = Some(utilization(&r.plan));
                rep.sram = Some(sram_sizes(w.seq_len as u64, w.batch as u64, params.h() as u64, &r.plan, &w.array));
                // reset (1) + preload, then the first sequence's compute phase
                let compute_start = trace.len() + 1 + r.preload_cycles as usize;
                rep.saturations = r.saturations;
                saturations += r.saturations;
                ledger.merge(&r.ledger);
                trace.samples.extend(r.trace.samples.iter().copied());
                rep.steady_io_words_per_cycle = steady_io(&trace, compute_start, r.plan.predicted_first_output, w.seq_len);
                if !r.plan.taps.is_empty() && r.measured_first_output != Some(r.plan.predicted_first_output) {
                    warnings.push(format!(
                        "layer {i}: measured first output {:?} differs from predicted {}",
                        r.measured_first_output, r.plan.predicted_first_output
                    ));
                }
                cur = r.outputs;
            }
            ResolvedLayer::Host(spec @ LayerSpec::Dense { .. }) => {
                let mut next = Vec::with_capacity(cur.len());
                for seq in &cur {
                    let (y, r) = run_dense(seq, spec, w, policy)?;
                    rep.cycles += r.cycles;
                    rep.tiles = Some(rep.tiles.unwrap_or(0) + r.tiles);
                    rep.saturations += r.saturations;
                    ledger.merge(&r.ledger);
                    trace.samples.extend(r.trace.samples);
                    next.push(y);
                }
                saturations += rep.saturations;
                cur = next;
            }
            ResolvedLayer::Host(spec) => {
                cur = cur
                    .iter()
                    .map(|s| apply_pointwise(spec, s))
                    .collect::<Result<_, _>>()
                    .map_err(|e| CliError::Other(format!("layer {i}: {e}")))?;
            }
            ResolvedLayer::Gemm { spec, a, b } => {
                let r = simulate_gemm(*spec, a, b, &w.array, policy)?;
                let gold = gemm_oracle(a, b).map_err(|e| CliError::Other(e.to_string()))?;
                let (err, loc) = max_abs_diff(&r.c, &gold);
                if err > gemm_err.0 || gemm_err.1.is_none() {
                    gemm_err = (err, loc.map(|(row, column)| ErrorLocation { sequence: None, layer: Some(i), row, column }));
                }
                rep.gemm_max_abs_error = Some(err);
                rep.cycles = r.cycles;
                rep.tiles = Some(r.tiles);
                rep.saturations = r.saturations;
                saturations += r.saturations;
                ledger.merge(&r.ledger);
                trace.samples.extend(r.trace.samples);
            }
        }
        layers.push(rep);
    }

    let mut max_abs_error = 0.0;
    let mut error_location = None;
    for (s, (sim, gold)) in cur.iter().zip(&golden).enumerate() {
        let (e, loc) = max_abs_diff(sim, gold);
        if error_location.is_none() || e > max_abs_error {
            max_abs_error = e;
            error_location = loc.map(|(row, column)| ErrorLocation { sequence: Some(s), layer: None, row, column });
        }
    }
    if gemm_err.0 > max_abs_error || (error_location.is_none() && gemm_err.1.is_some()) {
        max_abs_error = gemm_err.0;
        error_location = gemm_err.1;
    }
    Ok(RunOutcome { layers, ledger, trace, saturations, simulated: cur, golden, max_abs_error, error_location, warnings })
}

/// Largest elementwise difference and its position; NaN counts as infinite.
fn max_abs_diff(a: &Matrix, b: &Matrix) -> (f64, Option<(usize, usize)>) {
    let mut best = (0.0, None);
    for (i, (ra, rb)) in a.iter().zip(b).enumerate() {
        for (j, (x, y)) in ra.iter().zip(rb).enumerate() {
            let d = (x - y).abs();
            let d = if d.is_nan() { f64::INFINITY } else { d };
            if best.1.is_none() || d > best.0 {
                best = (d, Some((i, j)));
            }
        }
    }
    best
}

/// Cycles per phase, summed over the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleSummary {
    pub reset: u64,
    pub preload: u64,
    pub compute: u64,
    pub readout: u64,
    pub total: u64,
}

impl From<&PhaseLedger> for CycleSummary {
    fn from(l: &PhaseLedger) -> Self {
        CycleSummary {
            reset: l.cycles[Phase::Reset.index()],
            preload: l.cycles[Phase::PreLoad.index()],
            compute: l.cycles[Phase::Compute.index()],
            readout: l.cycles[Phase::Readout.index()],
            total: l.total_cycles(),
        }
    }
}
