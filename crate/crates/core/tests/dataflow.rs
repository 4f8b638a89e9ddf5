//! End-to-end checks of the SSM and GEMM dataflows against independent
//! oracles: a fixed-point replay of the same arithmetic in program order, the
//! floating-point reference, and port-traffic bookkeeping.

use epochsim_core::array::{Phase, Stream};
use epochsim_core::golden::{discretize, gemm_oracle, run_layer, Matrix, SsmLayerParams, SsmVariant};
use epochsim_core::mapper::{plan_gemm, plan_liquid, plan_s4, ssm_footprint};
use epochsim_core::numerics::{NumericConfig, ScalarValue};
use epochsim_core::par::ExecPolicy;
use epochsim_core::sim::{simulate_gemm, simulate_ssm_batch};
use epochsim_core::{Array, ArrayConfig, Dataflow, GemmSpec};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_layer(rng: &mut ChaCha8Rng, n: usize, h: usize, complex: bool) -> SsmLayerParams {
    SsmLayerParams {
        lambda: (0..n).map(|_| Complex64::new(rng.gen_range(0.1..1.0), if complex { rng.gen_range(-3.0..3.0) } else { 0.0 })).collect(),
        b: vec![Complex64::new(1.0, 0.0); n],
        c: (0..h)
            .map(|_| (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0) / n as f64, if complex { rng.gen_range(-1.0..1.0) / n as f64 } else { 0.0 })).collect())
            .collect(),
        d: None,
        dt: 1.0,
    }
}

fn fitting(n: usize, h: usize, numeric: NumericConfig) -> ArrayConfig {
    let (r, c) = ssm_footprint(n, h);
    ArrayConfig::new(r, c).with_numeric(numeric)
}

/// Replays the layer with the same saturating operations in program order:
/// state update per token, then each head's partial sum over states 0..n.
fn fixed_point_replay(p: &SsmLayerParams, u: &[f64], variant: SsmVariant, nc: NumericConfig) -> Vec<Vec<ScalarValue>> {
    let co = discretize(p).unwrap();
    let enc = |z: Complex64| nc.encode(z.re, z.im);
    let abar: Vec<_> = co.abar.iter().map(|&z| enc(z)).collect();
    let bbar: Vec<_> = co.bbar.iter().map(|&z| enc(z)).collect();
    let c: Vec<Vec<_>> = p.c.iter().map(|row| row.iter().map(|&z| enc(z)).collect()).collect();
    let mut x = vec![nc.zero(); p.n()];
    let mut out = Vec::new();
    for &ut in u {
        let uq = nc.encode(ut, 0.0);
        for j in 0..p.n() {
            let bu = bbar[j].mul_sat(uq).0;
            let coef = match variant {
                SsmVariant::S4 => abar[j],
                SsmVariant::Liquid => abar[j].add_sat(bu).0,
            };
            x[j] = coef.mul_sat(x[j]).0.add_sat(bu).0;
        }
        out.push(
            c.iter()
                .map(|row| row.iter().zip(&x).fold(nc.zero(), |acc, (cj, xj)| acc.add_sat(cj.mul_sat(*xj).0).0))
                .collect(),
        );
    }
    out
}

#[test]
fn array_is_bit_exact_with_program_order_replay() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (n, h) in [(1, 1), (2, 1), (3, 2), (6, 3), (8, 4)] {
        for nc in [NumericConfig::default(), NumericConfig::default_complex()] {
            let complex = nc.precision == epochsim_core::Precision::Complex16;
            let p = random_layer(&mut rng, n, h, complex);
            let u: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for variant in [SsmVariant::S4, SsmVariant::Liquid] {
                let cfg = fitting(n, h, nc);
                let co = discretize(&p).unwrap();
                let plan = match variant {
                    SsmVariant::S4 => plan_s4(&p, &co, &cfg).unwrap(),
                    SsmVariant::Liquid => plan_liquid(&p, &co, &cfg).unwrap(),
                };
                let mut a = Array::new(cfg).unwrap();
                a.run_reset();
                a.run_preload(&plan).unwrap();
                let out = a.run_compute(&plan, Stream::Tokens(&u)).unwrap();
                let replay = fixed_point_replay(&p, &u, variant, nc);
                for t in 0..u.len() {
                    for k in 0..h {
                        assert_eq!(out.taps[k][t], replay[t][k], "n={n} h={h} {variant:?} {:?} t={t} head={k}", nc.precision);
                    }
                }
            }
        }
    }
}

#[test]
fn liquid_n2_h1_t8_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = random_layer(&mut rng, 2, 1, false);
    let u: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let gold = run_layer(&p, &u, SsmVariant::Liquid).unwrap();
    let sim = simulate_ssm_batch(&p, SsmVariant::Liquid, &fitting(2, 1, NumericConfig::default()), &[u]).unwrap();
    for (g, s) in gold.iter().zip(&sim.outputs[0]) {
        assert!((g[0] - s[0]).abs() < 2f64.powi(-10));
    }
}

#[test]
fn larger_array_than_footprint_gives_same_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = random_layer(&mut rng, 4, 2, false);
    let u: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let tight = simulate_ssm_batch(&p, SsmVariant::S4, &fitting(4, 2, NumericConfig::default()), std::slice::from_ref(&u)).unwrap();
    let roomy = simulate_ssm_batch(&p, SsmVariant::S4, &ArrayConfig::new(16, 12), &[u]).unwrap();
    assert_eq!(tight.outputs, roomy.outputs);
    assert_eq!(tight.compute_cycles, roomy.compute_cycles);
}

#[test]
fn ssm_port_traffic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (n, h, t) = (4, 2, 40);
    let p = random_layer(&mut rng, n, h, false);
    let seqs: Vec<Vec<f64>> = (0..3).map(|_| (0..t).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let r = simulate_ssm_batch(&p, SsmVariant::S4, &fitting(n, h, NumericConfig::default()), &seqs).unwrap();
    let tot = r.trace.totals();
    // conservation: one read per token, one write per head per token
    assert_eq!(tot.io_reads, 3 * t as u64);
    assert_eq!(tot.io_writes, 3 * (t * h) as u64);
    // weights: exactly one footprint's worth, all during preload
    let (fr, fc) = ssm_footprint(n, h);
    assert_eq!(tot.weight_reads, (fr * fc) as u64);
    assert!(r.trace.samples.iter().filter(|s| s.phase != Phase::PreLoad).all(|s| s.weight_reads == 0));
    // steady state: H writes per cycle once the pipeline is full
    let compute: Vec<_> = r.trace.samples.iter().skip(1 + fc + 1).take(r.compute_cycles[0] as usize).collect();
    let first = r.plan.predicted_first_output as usize;
    for (i, s) in compute.iter().enumerate() {
        let cycle = i + 1;
        let in_window = cycle >= first && cycle < first + t;
        assert_eq!(s.io_writes as usize, if in_window { h } else { 0 }, "cycle {cycle}");
        assert_eq!(s.io_reads, u32::from(cycle <= t));
    }
}

#[test]
fn identical_runs_are_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let p = random_layer(&mut rng, 5, 2, true);
    let u: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let cfg = fitting(5, 2, NumericConfig::default_complex());
    let a = simulate_ssm_batch(&p, SsmVariant::S4, &cfg, std::slice::from_ref(&u)).unwrap();
    let b = simulate_ssm_batch(&p, SsmVariant::S4, &cfg, &[u]).unwrap();
    assert_eq!(a.outputs, b.outputs);
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.ledger, b.ledger);
}

fn int_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    (0..r).map(|_| (0..c).map(|_| rng.gen_range(-8i32..=8) as f64).collect()).collect()
}

#[test]
fn gemm_4x4x4_on_2x2_uses_8_tiles() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = int_matrix(&mut rng, 4, 4);
    let b = int_matrix(&mut rng, 4, 4);
    let gold = gemm_oracle(&a, &b).unwrap();
    for df in [Dataflow::Os, Dataflow::Ws, Dataflow::Is] {
        let spec = GemmSpec { m: 4, k: 4, n: 4, dataflow: df };
        assert_eq!(plan_gemm(spec, &a, &b, &ArrayConfig::new(2, 2)).unwrap().tiles.len(), 8);
        let r = simulate_gemm(spec, &a, &b, &ArrayConfig::new(2, 2), ExecPolicy::Parallel).unwrap();
        assert_eq!(r.tiles, 8);
        assert_eq!(r.c, gold, "{df:?}");
    }
}

#[test]
fn gemm_dataflows_agree_with_each_other() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let (m, k, n) = (rng.gen_range(1..12), rng.gen_range(1..12), rng.gen_range(1..12));
        let cfg = ArrayConfig::new(rng.gen_range(1..6), rng.gen_range(1..6));
        let a = int_matrix(&mut rng, m, k);
        let b = int_matrix(&mut rng, k, n);
        let results: Vec<Matrix> = [Dataflow::Os, Dataflow::Ws, Dataflow::Is]
            .iter()
            .map(|&df| simulate_gemm(GemmSpec { m, k, n, dataflow: df }, &a, &b, &cfg, ExecPolicy::Sequential).unwrap().c)
            .collect();
        assert_eq!(results[0], results[1]);
        assert_eq!(results[1], results[2]);
    }
}

#[test]
fn ws_tile_traffic_counts_distinct_words() {
    let a = vec![vec![1.0, 2.0, 3.0]; 5];
    let b = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
    let r = simulate_gemm(GemmSpec { m: 5, k: 3, n: 2, dataflow: Dataflow::Ws }, &a, &b, &ArrayConfig::new(3, 2), ExecPolicy::Sequential).unwrap();
    let t = r.trace.totals();
    assert_eq!(t.io_reads, 15);
    assert_eq!(t.io_writes, 10);
    // the streamed dimension is blocked by array rows: tiles of 3 and 2 rows
    assert_eq!(r.tiles, 2);
    assert_eq!(t.weight_reads, 12);
    assert_eq!(r.ledger.cycles[Phase::Compute.index()], (3 + 3 + 2 - 2) + (2 + 3 + 2 - 2));
}
