//! Floating-point reference model for diagonal SSM layers (S4 and Liquid-S4),
//! dense layers, activations and layer norm.
//!
//! Everything here works in `f64`/`Complex64` and is the oracle the simulated
//! array is checked against.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GoldenError {
    #[error("eigenvalue lambda[{0}] is zero")]
    ZeroEigenvalue(usize),
    #[error("eigenvalue lambda[{0}] has non-positive real part")]
    Unstable(usize),
    #[error("invalid layer parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch { context: String, expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SsmVariant {
    S4,
    Liquid,
}

/// Continuous-time diagonal SSM layer: one input channel, `h` output heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsmLayerParams {
    pub lambda: Vec<Complex64>,
    pub b: Vec<Complex64>,
    /// `h` rows of `n` entries.
    pub c: Vec<Vec<Complex64>>,
    /// Optional per-head skip term.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<f64>>,
    pub dt: f64,
}

impl SsmLayerParams {
    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn h(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<(), GoldenError> {
        let n = self.n();
        if n == 0 {
            return Err(GoldenError::InvalidParams("state size must be at least 1".into()));
        }
        if self.h() == 0 {
            return Err(GoldenError::InvalidParams("head count must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(GoldenError::InvalidParams(format!("dt must be positive, got {}", self.dt)));
        }
        if self.b.len() != n {
            return Err(GoldenError::DimensionMismatch { context: "B".into(), expected: n, got: self.b.len() });
        }
        for row in &self.c {
            if row.len() != n {
                return Err(GoldenError::DimensionMismatch { context: "C row".into(), expected: n, got: row.len() });
            }
        }
        if let Some(d) = &self.d {
            if d.len() != self.h() {
                return Err(GoldenError::DimensionMismatch { context: "D".into(), expected: self.h(), got: d.len() });
            }
        }
        for (i, l) in self.lambda.iter().enumerate() {
            if *l == Complex64::new(0.0, 0.0) {
                return Err(GoldenError::ZeroEigenvalue(i));
            }
            if l.re <= 0.0 {
                return Err(GoldenError::Unstable(i));
            }
        }
        Ok(())
    }

    pub fn skip(&self, head: usize) -> f64 {
        self.d.as_ref().map_or(0.0, |d| d[head])
    }
}

/// Zero-order-hold coefficients of the diagonal recurrence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCoeffs {
    pub abar: Vec<Complex64>,
    pub bbar: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateVector(pub Vec<Complex64>);

impl StateVector {
    pub fn zeros(n: usize) -> Self {
        StateVector(vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `abar = exp(-lambda dt)`, `bbar = (1 - abar) B / lambda`.
///
/// Only a zero eigenvalue is rejected here; stability is checked by
/// [`SsmLayerParams::validate`].
pub fn discretize(p: &SsmLayerParams) -> Result<DiscreteCoeffs, GoldenError> {
    let mut abar = Vec::with_capacity(p.n());
    let mut bbar = Vec::with_capacity(p.n());
    for (i, (&l, &b)) in p.lambda.iter().zip(&p.b).enumerate() {
        if l == Complex64::new(0.0, 0.0) {
            return Err(GoldenError::ZeroEigenvalue(i));
        }
        let a = (-l * p.dt).exp();
        abar.push(a);
        bbar.push((Complex64::new(1.0, 0.0) - a) * b / l);
    }
    Ok(DiscreteCoeffs { abar, bbar })
}

pub fn s4_step(x: &StateVector, u: f64, c: &DiscreteCoeffs) -> StateVector {
    StateVector(x.0.iter().zip(c.abar.iter().zip(&c.bbar)).map(|(&x, (&a, &b))| a * x + b * u).collect())
}

pub fn liquid_step(x: &StateVector, u: f64, c: &DiscreteCoeffs) -> StateVector {
    StateVector(
        x.0.iter()
            .zip(c.abar.iter().zip(&c.bbar))
            .map(|(&x, (&a, &b))| (a + b * u) * x + b * u)
            .collect(),
    )
}

/// `y_h = Re(C_h · x) + D_h u`.
pub fn linear_out(x: &StateVector, u: f64, p: &SsmLayerParams) -> Vec<f64> {
    p.c.iter()
        .enumerate()
        .map(|(h, row)| {
            let acc: Complex64 = row.iter().zip(&x.0).map(|(c, x)| c * x).sum();
            acc.re + p.skip(h) * u
        })
        .collect()
}

/// Runs one layer over a sequence from a zero state; returns `T × H` outputs.
pub fn run_layer(p: &SsmLayerParams, u_seq: &[f64], variant: SsmVariant) -> Result<Matrix, GoldenError> {
    p.validate()?;
    let coeffs = discretize(p)?;
    let mut x = StateVector::zeros(p.n());
    let mut out = Vec::with_capacity(u_seq.len());
    for &u in u_seq {
        x = match variant {
            SsmVariant::S4 => s4_step(&x, u, &coeffs),
            SsmVariant::Liquid => liquid_step(&x, u, &coeffs),
        };
        out.push(linear_out(&x, u, p));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Silu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Silu => x / (1.0 + (-x).exp()),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
        }
    }
}

pub fn apply_activation(v: &[f64], f: Activation) -> Vec<f64> {
    v.iter().map(|&x| f.eval(x)).collect()
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

pub fn layer_norm(v: &[f64], gamma: &[f64], beta: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
    v.iter().zip(gamma.iter().zip(beta)).map(|(x, (g, b))| (x - mean) * inv * g + b).collect()
}

/// Plain triple-loop matrix product.
pub fn gemm_oracle(a: &Matrix, b: &Matrix) -> Result<Matrix, GoldenError> {
    let k = b.len();
    let np = b.first().map_or(0, Vec::len);
    let mut c = vec![vec![0.0; np]; a.len()];
    for (i, row) in a.iter().enumerate() {
        if row.len() != k {
            return Err(GoldenError::DimensionMismatch { context: "gemm inner".into(), expected: k, got: row.len() });
        }
        for j in 0..np {
            let mut s = 0.0;
            for (p, &x) in row.iter().enumerate() {
                s += x * b[p][j];
            }
            c[i][j] = s;
        }
    }
    Ok(c)
}

/// One layer of a model stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    S4(SsmLayerParams),
    LiquidS4(SsmLayerParams),
    /// `y = act(x · W + bias)`, `W` is `inputs × outputs`.
    Dense {
        weights: Matrix,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bias: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        activation: Option<Activation>,
    },
    LayerNorm { gamma: Vec<f64>, beta: Vec<f64> },
    Activation { function: Activation },
}

impl LayerSpec {
    /// Input width, or `None` for width-preserving layers.
    pub fn input_width(&self) -> Option<usize> {
        match self {
            LayerSpec::S4(_) | LayerSpec::LiquidS4(_) => Some(1),
            LayerSpec::Dense { weights, .. } => Some(weights.len()),
            LayerSpec::LayerNorm { gamma, .. } => Some(gamma.len()),
            LayerSpec::Activation { .. } => None,
        }
    }

    pub fn output_width(&self, input: usize) -> usize {
        match self {
            LayerSpec::S4(p) | LayerSpec::LiquidS4(p) => p.h(),
            LayerSpec::Dense { weights, .. } => weights.first().map_or(0, Vec::len),
            LayerSpec::LayerNorm { gamma, .. } => gamma.len(),
            LayerSpec::Activation { .. } => input,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::S4(_) => "s4",
            LayerSpec::LiquidS4(_) => "liquid_s4",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::LayerNorm { .. } => "layer_norm",
            LayerSpec::Activation { .. } => "activation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LayerStackSpec {
    pub layers: Vec<LayerSpec>,
}

impl LayerStackSpec {
    /// Checks that widths compose starting from `input_width`; returns the
    /// output width.
    pub fn check(&self, input_width: usize) -> Result<usize, GoldenError> {
        let mut width = input_width;
        for (i, layer) in self.layers.iter().enumerate() {
            if let Some(w) = layer.input_width() {
                if w != width {
                    return Err(GoldenError::DimensionMismatch {
                        context: format!("layer {i} ({})", layer.name()),
                        expected: w,
                        got: width,
                    });
                }
            }
            match layer {
                LayerSpec::S4(p) | LayerSpec::LiquidS4(p) => p.validate()?,
                LayerSpec::Dense { weights, bias, .. } => {
                    let out = layer.output_width(width);
                    if weights.iter().any(|r| r.len() != out) {
                        return Err(GoldenError::InvalidParams(format!("layer {i}: ragged dense weights")));
                    }
                    if let Some(b) = bias {
                        if b.len() != out {
                            return Err(GoldenError::DimensionMismatch {
                                context: format!("layer {i} bias"),
                                expected: out,
                                got: b.len(),
                            });
                        }
                    }
                }
                LayerSpec::LayerNorm { gamma, beta } => {
                    if gamma.len() != beta.len() || gamma.is_empty() {
                        return Err(GoldenError::InvalidParams(format!("layer {i}: gamma/beta lengths")));
                    }
                }
                LayerSpec::Activation { .. } => {}
            }
            width = layer.output_width(width);
        }
        Ok(width)
    }
}

/// Applies one non-SSM layer to every time step of a `T × D` sequence.
pub fn apply_pointwise(layer: &LayerSpec, seq: &Matrix) -> Result<Matrix, GoldenError> {
    match layer {
        LayerSpec::Dense { weights, bias, activation } => {
            let mut y = gemm_oracle(seq, weights)?;
            for row in &mut y {
                if let Some(b) = bias {
                    row.iter_mut().zip(b).for_each(|(y, b)| *y += b);
                }
                if let Some(f) = activation {
                    row.iter_mut().for_each(|y| *y = f.eval(*y));
                }
            }
            Ok(y)
        }
        LayerSpec::LayerNorm { gamma, beta } => Ok(seq.iter().map(|v| layer_norm(v, gamma, beta)).collect()),
        LayerSpec::Activation { function } => Ok(seq.iter().map(|v| apply_activation(v, *function)).collect()),
        LayerSpec::S4(p) => run_layer(p, &single_channel(seq)?, SsmVariant::S4),
        LayerSpec::LiquidS4(p) => run_layer(p, &single_channel(seq)?, SsmVariant::Liquid),
    }
}

fn single_channel(seq: &Matrix) -> Result<Vec<f64>, GoldenError> {
    seq.iter()
        .map(|row| match row.as_slice() {
            [u] => Ok(*u),
            _ => Err(GoldenError::DimensionMismatch { context: "SSM input width".into(), expected: 1, got: row.len() }),
        })
        .collect()
}

/// Runs a full stack over a `T × D` input sequence.
pub fn run_model(spec: &LayerStackSpec, input: &Matrix) -> Result<Matrix, GoldenError> {
    let width = input.first().map_or(0, Vec::len);
    spec.check(width)?;
    let mut seq = input.clone();
    for layer in &spec.layers {
        seq = apply_pointwise(layer, &seq)?;
    }
    Ok(seq)
}
