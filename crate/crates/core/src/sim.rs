//! End-to-end runs: plan, preload, stream and collect for SSM layers and GEMM.

use thiserror::Error;

use crate::array::{Array, ArrayConfig, ArrayError, PhaseLedger, PortTrace, Stream};
use crate::golden::{discretize, GoldenError, Matrix, SsmLayerParams, SsmVariant};
use crate::mapper::{plan_gemm, plan_liquid, plan_s4, validate_plan, Dataflow, GemmSpec, GemmTile, LayoutPlan, MapError, Violation};
use crate::numerics::ScalarValue;
use crate::par::{par_map, ExecPolicy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Array(#[from] ArrayError),
    #[error(transparent)]
    Golden(#[from] GoldenError),
    #[error("plan failed validation: {0:?}")]
    InvalidPlan(Vec<Violation>),
}

impl SimError {
    pub fn is_capacity(&self) -> bool {
        matches!(self, SimError::Map(MapError::Capacity { .. }) | SimError::Array(ArrayError::Capacity { .. }))
    }
}

#[derive(Debug, Clone)]
pub struct SsmBatchResult {
    pub plan: LayoutPlan,
    /// Per sequence, `T × H` outputs (real part plus host-side skip term).
    pub outputs: Vec<Matrix>,
    pub compute_cycles: Vec<u64>,
    pub preload_cycles: u64,
    /// First compute cycle at which a tap carries data, found by probing the
    /// plan with unit coefficients and a unit token.
    pub measured_first_output: Option<u64>,
    pub ledger: PhaseLedger,
    pub trace: PortTrace,
    pub saturations: u64,
}

pub fn plan_ssm_layer(p: &SsmLayerParams, variant: SsmVariant, cfg: &ArrayConfig) -> Result<LayoutPlan, SimError> {
    let coeffs = discretize(p)?;
    let plan = match variant {
        SsmVariant::S4 => plan_s4(p, &coeffs, cfg)?,
        SsmVariant::Liquid => plan_liquid(p, &coeffs, cfg)?,
    };
    validate_plan(&plan, cfg).map_err(SimError::InvalidPlan)?;
    Ok(plan)
}

/// Runs a batch of sequences through one preloaded plan. Accumulators are
/// cleared between sequences; weights stay resident.
pub fn simulate_ssm_batch(p: &SsmLayerParams, variant: SsmVariant, cfg: &ArrayConfig, seqs: &[Vec<f64>]) -> Result<SsmBatchResult, SimError> {
    let plan = plan_ssm_layer(p, variant, cfg)?;
    let mut array = Array::new(*cfg)?;
    array.run_reset();
    let preload_cycles = array.run_preload(&plan)?;
    let mut outputs = Vec::with_capacity(seqs.len());
    let mut compute_cycles = Vec::with_capacity(seqs.len());
    for (i, u) in seqs.iter().enumerate() {
        if i > 0 {
            array.clear_state();
        }
        let out = array.run_compute(&plan, Stream::Tokens(u))?;
        compute_cycles.push(out.cycles);
        let y = (0..u.len()).map(|t| out.taps.iter().enumerate().map(|(h, col)| col[t].re_f64() + p.skip(h) * u[t]).collect()).collect();
        outputs.push(y);
    }
    Ok(SsmBatchResult {
        measured_first_output: measure_first_output(&plan, cfg)?,
        saturations: array.saturations(),
        ledger: array.ledger().clone(),
        trace: array.trace().clone(),
        plan,
        outputs,
        compute_cycles,
        preload_cycles,
    })
}

/// Drives a single unit token through `plan` with every active stationary
/// operand set to one and reports the first cycle a tap sees a nonzero word.
pub fn measure_first_output(plan: &LayoutPlan, cfg: &ArrayConfig) -> Result<Option<u64>, SimError> {
    let mut probe = plan.clone();
    let one = cfg.numeric.encode(1.0, 0.0);
    for (s, m) in probe.stationary.iter_mut().zip(&probe.modes) {
        if m.is_mac() {
            *s = one;
        }
    }
    let mut array = Array::new(*cfg)?;
    array.run_reset();
    array.run_preload(&probe)?;
    Ok(array.run_compute(&probe, Stream::Tokens(&[1.0]))?.first_nonzero_cycle)
}

#[derive(Debug, Clone)]
pub struct GemmResult {
    pub c: Matrix,
    pub tiles: usize,
    /// Cycles summed over every tile and phase, tiles run back to back.
    pub cycles: u64,
    pub ledger: PhaseLedger,
    pub trace: PortTrace,
    pub saturations: u64,
}

struct TileRun {
    values: Vec<Vec<ScalarValue>>,
    ledger: PhaseLedger,
    trace: PortTrace,
    saturations: u64,
}

fn run_tile(tile: &GemmTile, dataflow: Dataflow, cfg: &ArrayConfig) -> Result<TileRun, SimError> {
    let mut array = Array::new(*cfg)?;
    array.run_reset();
    array.run_preload(&tile.plan)?;
    let out = array.run_compute(&tile.plan, Stream::Vectors(&tile.stream))?;
    let zero = cfg.numeric.zero();
    let mut values = vec![vec![zero; tile.tn]; tile.tm];
    match dataflow {
        Dataflow::Ws => {
            for (n, col) in out.taps.iter().enumerate() {
                for (m, v) in col.iter().enumerate() {
                    values[m][n] = *v;
                }
            }
        }
        Dataflow::Is => {
            for (m, col) in out.taps.iter().enumerate() {
                for (n, v) in col.iter().enumerate() {
                    values[m][n] = *v;
                }
            }
        }
        Dataflow::Os => {
            values = array.run_readout(&tile.plan)?;
        }
    }
    Ok(TileRun { values, ledger: array.ledger().clone(), trace: array.trace().clone(), saturations: array.saturations() })
}

/// Tiles the product, runs tiles independently, and sums partial products
/// over `K` on the host in schedule order.
pub fn simulate_gemm(spec: GemmSpec, a: &Matrix, b: &Matrix, cfg: &ArrayConfig, policy: ExecPolicy) -> Result<GemmResult, SimError> {
    let schedule = plan_gemm(spec, a, b, cfg)?;
    for t in &schedule.tiles {
        validate_plan(&t.plan, cfg).map_err(SimError::InvalidPlan)?;
    }
    let runs = par_map(&schedule.tiles, policy, |t| run_tile(t, spec.dataflow, cfg));
    let zero = cfg.numeric.zero();
    let mut acc = vec![vec![zero; spec.n]; spec.m];
    let mut ledger = PhaseLedger::default();
    let mut trace = PortTrace::default();
    let mut saturations = 0;
    for (tile, run) in schedule.tiles.iter().zip(runs) {
        let run = run?;
        for (m, row) in run.values.iter().enumerate() {
            for (n, v) in row.iter().enumerate() {
                let cell = &mut acc[tile.m0 + m][tile.n0 + n];
                let (s, hit) = cell.add_sat(*v);
                saturations += u64::from(hit);
                *cell = s;
            }
        }
        ledger.merge(&run.ledger);
        trace.samples.extend(run.trace.samples);
        saturations += run.saturations;
    }
    Ok(GemmResult {
        c: acc.iter().map(|r| r.iter().map(|v| v.re_f64()).collect()).collect(),
        tiles: schedule.tiles.len(),
        cycles: ledger.total_cycles(),
        ledger,
        trace,
        saturations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::golden::{gemm_oracle, run_layer};
    use crate::mapper::ssm_footprint;
    use crate::numerics::NumericConfig;
    use num_complex::Complex64;

    fn params(n: usize, h: usize) -> SsmLayerParams {
        SsmLayerParams {
            lambda: (0..n).map(|j| Complex64::new(0.3 + 0.2 * j as f64, 0.0)).collect(),
            b: vec![Complex64::new(1.0, 0.0); n],
            c: (0..h).map(|k| (0..n).map(|j| Complex64::new(0.25 - 0.1 * (k + j) as f64, 0.0)).collect()).collect(),
            d: Some(vec![0.5; h]),
            dt: 1.0,
        }
    }

    fn cfg_for(n: usize, h: usize) -> ArrayConfig {
        let (r, c) = ssm_footprint(n, h);
        ArrayConfig::new(r, c)
    }

    fn max_err(a: &Matrix, b: &Matrix) -> f64 {
        a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn s4_n3_latency_and_total() {
        let p = params(3, 1);
        let r = simulate_ssm_batch(&p, SsmVariant::S4, &cfg_for(3, 1), &[vec![0.5, -0.25, 1.0, 0.0]]).unwrap();
        assert_eq!(r.measured_first_output, Some(5));
        assert_eq!(r.plan.predicted_first_output, 5);
        assert_eq!(r.compute_cycles, vec![8]);
        assert_eq!(r.preload_cycles, 5);
    }

    #[test]
    fn s4_n1_first_output_cycle_3() {
        let r = simulate_ssm_batch(&params(1, 1), SsmVariant::S4, &cfg_for(1, 1), &[vec![1.0; 3]]).unwrap();
        assert_eq!(r.measured_first_output, Some(3));
    }

    #[test]
    fn matches_golden_real_and_complex() {
        let u: Vec<f64> = (0..40).map(|t| ((t * 7 % 11) as f64 / 11.0) - 0.5).collect();
        for (n, h) in [(1, 1), (3, 1), (4, 2), (5, 3)] {
            let mut p = params(n, h);
            for v in [SsmVariant::S4, SsmVariant::Liquid] {
                let gold = run_layer(&p, &u, v).unwrap();
                let sim = simulate_ssm_batch(&p, v, &cfg_for(n, h), &[u.clone()]).unwrap();
                assert!(max_err(&gold, &sim.outputs[0]) < 1e-3, "{n} {h} {v:?}");
                assert_eq!(sim.saturations, 0);
            }
            p.lambda = (0..n).map(|j| Complex64::new(0.4, 0.5 * j as f64)).collect();
            let cfg = cfg_for(n, h).with_numeric(NumericConfig::default_complex());
            let gold = run_layer(&p, &u, SsmVariant::S4).unwrap();
            let sim = simulate_ssm_batch(&p, SsmVariant::S4, &cfg, &[u.clone()]).unwrap();
            assert!(max_err(&gold, &sim.outputs[0]) < 0.0625, "complex {n} {h}");
        }
    }

    #[test]
    fn liquid_equals_s4_on_zero_input() {
        let p = params(3, 2);
        let z = vec![vec![0.0; 16]];
        let a = simulate_ssm_batch(&p, SsmVariant::S4, &cfg_for(3, 2), &z).unwrap();
        let b = simulate_ssm_batch(&p, SsmVariant::Liquid, &cfg_for(3, 2), &z).unwrap();
        assert_eq!(a.outputs, b.outputs);
    }

    #[test]
    fn batch_sequences_are_independent() {
        let p = params(2, 1);
        let cfg = cfg_for(2, 1);
        let s1 = vec![0.3; 10];
        let s2 = vec![-0.7; 10];
        let both = simulate_ssm_batch(&p, SsmVariant::S4, &cfg, &[s1.clone(), s2.clone()]).unwrap();
        let only2 = simulate_ssm_batch(&p, SsmVariant::S4, &cfg, &[s2]).unwrap();
        assert_eq!(both.outputs[1], only2.outputs[0]);
    }

    #[test]
    fn empty_stream_has_zero_compute_cycles() {
        let r = simulate_ssm_batch(&params(2, 1), SsmVariant::S4, &cfg_for(2, 1), &[vec![]]).unwrap();
        assert_eq!(r.compute_cycles, vec![0]);
        assert!(r.outputs[0].is_empty());
    }

    fn ints(rows: usize, cols: usize, seed: i64) -> Matrix {
        (0..rows).map(|i| (0..cols).map(|j| ((i as i64 * 31 + j as i64 * 17 + seed) % 9 - 4) as f64).collect()).collect()
    }

    #[test]
    fn gemm_dataflows_match_oracle() {
        for (m, k, n, ar, ac) in [(2, 2, 2, 2, 2), (4, 4, 4, 2, 2), (3, 5, 7, 2, 3), (5, 3, 2, 4, 4)] {
            let a = ints(m, k, 1);
            let b = ints(k, n, 2);
            let gold = gemm_oracle(&a, &b).unwrap();
            for df in [Dataflow::Os, Dataflow::Ws, Dataflow::Is] {
                let r = simulate_gemm(GemmSpec { m, k, n, dataflow: df }, &a, &b, &ArrayConfig::new(ar, ac), ExecPolicy::Sequential).unwrap();
                assert_eq!(r.c, gold, "{df:?} {m}x{k}x{n} on {ar}x{ac}");
            }
        }
    }

    #[test]
    fn os_identity_on_2x2() {
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let m = vec![vec![3.0, -2.0], vec![5.0, 7.0]];
        let r = simulate_gemm(GemmSpec { m: 2, k: 2, n: 2, dataflow: Dataflow::Os }, &id, &m, &ArrayConfig::new(2, 2), ExecPolicy::Sequential).unwrap();
        assert_eq!(r.c, m);
        assert_eq!(r.tiles, 1);
        assert_eq!(r.ledger.cycles[crate::array::Phase::Readout.index()], 2);
    }

    #[test]
    fn ws_diagonal_scales_stream() {
        let diag = vec![vec![2.0, 0.0, 0.0], vec![0.0, -1.0, 0.0], vec![0.0, 0.0, 0.5]];
        let u = vec![vec![1.0, 2.0, 4.0], vec![-3.0, 0.5, 8.0]];
        let r = simulate_gemm(GemmSpec { m: 2, k: 3, n: 3, dataflow: Dataflow::Ws }, &u, &diag, &ArrayConfig::new(3, 3), ExecPolicy::Sequential).unwrap();
        assert_eq!(r.c, vec![vec![2.0, -2.0, 2.0], vec![-6.0, -0.5, 4.0]]);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let a = ints(9, 7, 3);
        let b = ints(7, 6, 4);
        let spec = GemmSpec { m: 9, k: 7, n: 6, dataflow: Dataflow::Ws };
        let cfg = ArrayConfig::new(3, 3);
        let s = simulate_gemm(spec, &a, &b, &cfg, ExecPolicy::Sequential).unwrap();
        let p = simulate_gemm(spec, &a, &b, &cfg, ExecPolicy::Parallel).unwrap();
        assert_eq!(s.c, p.c);
        assert_eq!(s.ledger, p.ledger);
        assert_eq!(s.trace, p.trace);
    }
}
