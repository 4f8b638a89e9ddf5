//! Workload configuration: a single JSON document describing a layer stack,
//! sequence length, batch, array geometry and numeric format.

use std::path::Path;

use epochsim_core::golden::{Activation, LayerSpec, LayerStackSpec, Matrix, SsmLayerParams};
use epochsim_core::mapper::ssm_footprint;
use epochsim_core::metrics::{BaselineModel, DEFAULT_BANDWIDTH_WINDOW};
use epochsim_core::numerics::QFormat;
use epochsim_core::{ArrayConfig, Dataflow, GemmSpec, NumericConfig, PowerTable, Precision, SsmVariant};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::presets;

pub const DEFAULT_STATES: usize = 64;
pub const DEFAULT_HEADS: usize = 1;
pub const DEFAULT_DT: f64 = 1.0;

/// Largest auto-sized array used when a stack has no SSM layer.
const AUTO_GEMM_LIMIT: usize = 64;

fn default_states() -> usize {
    DEFAULT_STATES
}
fn default_heads() -> usize {
    DEFAULT_HEADS
}
fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_batch() -> usize {
    1
}
fn default_cycle_time() -> f64 {
    1.4
}
fn default_scale() -> f64 {
    1.0
}
fn default_window() -> usize {
    DEFAULT_BANDWIDTH_WINDOW
}

/// An SSM layer: either explicit parameters or generated ones of the given shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsmEntry {
    #[serde(default = "default_states")]
    pub n: usize,
    #[serde(default = "default_heads")]
    pub h: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<SsmLayerParams>,
}

impl SsmEntry {
    pub fn generated(n: usize, h: usize, dt: f64) -> Self {
        SsmEntry { n, h, dt, d: None, params: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerEntry {
    S4(SsmEntry),
    LiquidS4(SsmEntry),
    Dense {
        weights: Matrix,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bias: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        activation: Option<Activation>,
    },
    LayerNorm {
        gamma: Vec<f64>,
        beta: Vec<f64>,
    },
    Activation {
        function: Activation,
    },
    /// A standalone matrix product with random small-integer operands unless
    /// `a` and `b` are given.
    Gemm {
        m: usize,
        k: usize,
        n: usize,
        dataflow: Dataflow,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<Matrix>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<Matrix>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(untagged)]
pub enum ArraySetting {
    #[default]
    #[serde(with = "auto_tag")]
    Auto,
    Fixed {
        rows: usize,
        cols: usize,
    },
}

mod auto_tag {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("auto")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "auto" {
            Ok(())
        } else {
            Err(D::Error::custom(format!("array must be \"auto\" or {{\"rows\", \"cols\"}}, got \"{s}\"")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default)]
    pub layers: Vec<LayerEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq_len: Option<usize>,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default)]
    pub array: ArraySetting,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<Precision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub real_format: Option<QFormat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complex_format: Option<QFormat>,
    #[serde(default = "default_cycle_time")]
    pub cycle_time_ns: f64,
    #[serde(default)]
    pub power_table: PowerTable,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Inputs are drawn uniformly from `[-input_scale, input_scale]`.
    #[serde(default = "default_scale")]
    pub input_scale: f64,
    #[serde(default)]
    pub baseline: BaselineModel,
    #[serde(default = "default_window")]
    pub bandwidth_window: usize,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config deserializes")
    }
}

impl WorkloadConfig {
    pub fn from_preset(name: &str) -> Result<Self, CliError> {
        if presets::find(name).is_none() {
            return Err(CliError::Config(format!("unknown preset \"{name}\"; known presets: {}", presets::names().join(", "))));
        }
        Ok(WorkloadConfig { preset: Some(name.to_string()), ..Default::default() })
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("{origin}:{}:{}: {e}", e.line(), e.column())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Fills preset defaults and generates coefficients.
    pub fn resolve(&self) -> Result<Workload, CliError> {
        let mut cfg = self.clone();
        if let Some(name) = &self.preset {
            let p = presets::find(name).ok_or_else(|| CliError::Config(format!("unknown preset \"{name}\"")))?;
            cfg.name.get_or_insert_with(|| p.name.to_string());
            cfg.seq_len.get_or_insert(p.seq_len);
            if cfg.layers.is_empty() {
                let e = SsmEntry::generated(DEFAULT_STATES, DEFAULT_HEADS, DEFAULT_DT);
                cfg.layers.push(match p.variant {
                    SsmVariant::S4 => LayerEntry::S4(e),
                    SsmVariant::Liquid => LayerEntry::LiquidS4(e),
                });
            }
        }
        let seq_len = cfg.seq_len.ok_or_else(|| CliError::Config("seq_len is required unless a preset is given".into()))?;
        if seq_len == 0 {
            return Err(CliError::Config("seq_len must be at least 1".into()));
        }
        if cfg.batch == 0 {
            return Err(CliError::Config("batch must be at least 1".into()));
        }
        if cfg.layers.is_empty() {
            return Err(CliError::Config("layer stack is empty".into()));
        }
        if !(cfg.input_scale.is_finite() && cfg.input_scale >= 0.0) {
            return Err(CliError::Config(format!("input_scale must be a non-negative number, got {}", cfg.input_scale)));
        }
        if let Some(t) = cfg.tolerance {
            if t.is_nan() || t < 0.0 {
                return Err(CliError::Config(format!("tolerance must be non-negative, got {t}")));
            }
        }
        cfg.name.get_or_insert_with(|| "workload".into());
        let precision = *cfg.precision.get_or_insert(Precision::Complex16);
        let mut numeric = match precision {
            Precision::Real32 => NumericConfig::real(QFormat::Q16_16),
            Precision::Complex16 => NumericConfig::default_complex(),
        };
        if let Some(f) = cfg.real_format {
            numeric.real_format = f;
        }
        if let Some(f) = cfg.complex_format {
            numeric.complex_format = f;
        }
        numeric.validate().map_err(|e| CliError::Config(e.to_string()))?;

        let mut layers = Vec::with_capacity(cfg.layers.len());
        let max_value = match precision {
            Precision::Real32 => numeric.real_format.max_value(),
            Precision::Complex16 => numeric.complex_format.max_value(),
        };
        for (i, entry) in cfg.layers.iter().enumerate() {
            layers.push(resolve_layer(i, entry, &cfg, precision, max_value)?);
        }
        let golden = LayerStackSpec { layers: layers.iter().filter_map(|l| l.golden().cloned()).collect() };
        golden.check(1).map_err(|e| CliError::Config(format!("layer stack: {e}")))?;

        let (rows, cols) = match cfg.array {
            ArraySetting::Fixed { rows, cols } => (rows, cols),
            ArraySetting::Auto => auto_array(&layers),
        };
        let array = ArrayConfig { rows, cols, cycle_time_ns: cfg.cycle_time_ns, numeric, word_bits: 32, power_table: cfg.power_table };
        array.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let tolerance = cfg.tolerance.unwrap_or(default_tolerance(precision));
        Ok(Workload {
            name: cfg.name.clone().unwrap_or_default(),
            seq_len,
            batch: cfg.batch,
            array,
            layers,
            golden,
            seed: cfg.seed,
            tolerance,
            input_scale: cfg.input_scale,
            baseline: cfg.baseline,
            bandwidth_window: cfg.bandwidth_window,
            config: cfg,
        })
    }
}

/// Default oracle tolerance: 2^-10 for Q16.16 reals, 2^-4 for Q8.8 complex.
pub fn default_tolerance(p: Precision) -> f64 {
    match p {
        Precision::Real32 => 2f64.powi(-10),
        Precision::Complex16 => 2f64.powi(-4),
    }
}

fn auto_array(layers: &[ResolvedLayer]) -> (usize, usize) {
    let ssm = layers.iter().filter_map(|l| match l {
        ResolvedLayer::Ssm { params, .. } => Some(ssm_footprint(params.n(), params.h())),
        _ => None,
    });
    let (r, c) = ssm.fold((0, 0), |(r, c), (a, b)| (r.max(a), c.max(b)));
    if r > 0 {
        return (r, c);
    }
    let dim = layers
        .iter()
        .map(|l| match l {
            ResolvedLayer::Gemm { spec, .. } => spec.m.max(spec.k).max(spec.n),
            ResolvedLayer::Host(LayerSpec::Dense { weights, .. }) => weights.len().max(weights.first().map_or(0, Vec::len)),
            _ => 1,
        })
        .max()
        .unwrap_or(1);
    let d = dim.clamp(1, AUTO_GEMM_LIMIT);
    (d, d)
}

/// `lambda_k = 0.5 + i·pi·k` with the real part clamped so that
/// `|abar| = exp(-Re(lambda)·dt)` stays inside `(0.3, 0.99)`.
pub fn complex_lambdas(n: usize, dt: f64) -> Vec<Complex64> {
    let lo = -(0.99f64).ln() / dt;
    let hi = -(0.3f64).ln() / dt;
    (0..n).map(|k| Complex64::new(0.5f64.clamp(lo * 1.0001, hi * 0.9999), std::f64::consts::PI * k as f64)).collect()
}

/// Real eigenvalues placing `abar` evenly in `[0.3, 0.99]`.
pub fn real_lambdas(n: usize, dt: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let a = if n == 1 { 0.645 } else { 0.3 + (0.99 - 0.3) * k as f64 / (n - 1) as f64 };
            -a.ln() / dt
        })
        .collect()
}

pub fn generate_ssm(n: usize, h: usize, dt: f64, d: Option<Vec<f64>>, precision: Precision, rng: &mut ChaCha8Rng) -> SsmLayerParams {
    let scale = 1.0 / n as f64;
    let (lambda, c) = match precision {
        Precision::Complex16 => (
            complex_lambdas(n, dt),
            (0..h).map(|_| (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..=1.0) * scale, rng.gen_range(-1.0..=1.0) * scale)).collect()).collect(),
        ),
        Precision::Real32 => (
            real_lambdas(n, dt).into_iter().map(|l| Complex64::new(l, 0.0)).collect(),
            (0..h).map(|_| (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..=1.0) * scale, 0.0)).collect()).collect(),
        ),
    };
    SsmLayerParams { lambda, b: vec![Complex64::new(1.0, 0.0); n], c, d, dt }
}

/// RNG stream for layer `i` (stream 0 is reserved for inputs).
pub fn layer_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64 + 1);
    rng
}

pub fn input_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

fn resolve_layer(i: usize, entry: &LayerEntry, cfg: &WorkloadConfig, precision: Precision, max_value: f64) -> Result<ResolvedLayer, CliError> {
    let mut rng = layer_rng(cfg.seed, i);
    Ok(match entry {
        LayerEntry::S4(e) | LayerEntry::LiquidS4(e) => {
            let variant = if matches!(entry, LayerEntry::S4(_)) { SsmVariant::S4 } else { SsmVariant::Liquid };
            let params = match &e.params {
                Some(p) => p.clone(),
                None => {
                    if e.n == 0 || e.h == 0 {
                        return Err(CliError::Config(format!("layer {i}: n and h must be at least 1 (got n={}, h={})", e.n, e.h)));
                    }
                    generate_ssm(e.n, e.h, e.dt, e.d.clone(), precision, &mut rng)
                }
            };
            params.validate().map_err(|err| CliError::Config(format!("layer {i}: {err}")))?;
            let golden = match variant {
                SsmVariant::S4 => LayerSpec::S4(params.clone()),
                SsmVariant::Liquid => LayerSpec::LiquidS4(params.clone()),
            };
            ResolvedLayer::Ssm { variant, params, golden }
        }
        LayerEntry::Dense { weights, bias, activation } => {
            ResolvedLayer::Host(LayerSpec::Dense { weights: weights.clone(), bias: bias.clone(), activation: *activation })
        }
        LayerEntry::LayerNorm { gamma, beta } => ResolvedLayer::Host(LayerSpec::LayerNorm { gamma: gamma.clone(), beta: beta.clone() }),
        LayerEntry::Activation { function } => ResolvedLayer::Host(LayerSpec::Activation { function: *function }),
        LayerEntry::Gemm { m, k, n, dataflow, a, b } => {
            if *m == 0 || *k == 0 || *n == 0 {
                return Err(CliError::Config(format!("layer {i}: GEMM dimensions must be positive")));
            }
            // small integers whose k-term dot products stay inside the format
            let bound = ((max_value / *k as f64).sqrt().floor() as i32).clamp(1, 8);
            let mut ints = |r: usize, c: usize| -> Matrix { (0..r).map(|_| (0..c).map(|_| rng.gen_range(-bound..=bound) as f64).collect()).collect() };
            let a = a.clone().unwrap_or_else(|| ints(*m, *k));
            let b = b.clone().unwrap_or_else(|| ints(*k, *n));
            if a.len() != *m || a.iter().any(|r| r.len() != *k) || b.len() != *k || b.iter().any(|r| r.len() != *n) {
                return Err(CliError::Config(format!("layer {i}: GEMM operands do not match {m}x{k} and {k}x{n}")));
            }
            ResolvedLayer::Gemm { spec: GemmSpec { m: *m, k: *k, n: *n, dataflow: *dataflow }, a, b }
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedLayer {
    Ssm { variant: SsmVariant, params: SsmLayerParams, golden: LayerSpec },
    /// Evaluated on the host (activation, layer norm) or as a tiled GEMM (dense).
    Host(LayerSpec),
    Gemm { spec: GemmSpec, a: Matrix, b: Matrix },
}

impl ResolvedLayer {
    pub fn golden(&self) -> Option<&LayerSpec> {
        match self {
            ResolvedLayer::Ssm { golden, .. } => Some(golden),
            ResolvedLayer::Host(spec) => Some(spec),
            ResolvedLayer::Gemm { .. } => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ResolvedLayer::Ssm { golden, .. } | ResolvedLayer::Host(golden) => golden.name(),
            ResolvedLayer::Gemm { .. } => "gemm",
        }
    }
}

/// A fully resolved, runnable workload.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub name: String,
    pub seq_len: usize,
    pub batch: usize,
    pub array: ArrayConfig,
    pub layers: Vec<ResolvedLayer>,
    pub golden: LayerStackSpec,
    pub seed: u64,
    pub tolerance: f64,
    pub input_scale: f64,
    pub baseline: BaselineModel,
    pub bandwidth_window: usize,
    /// The input config with every default filled in.
    pub config: WorkloadConfig,
}

impl Workload {
    /// `batch` sequences of `seq_len` single-channel inputs.
    pub fn inputs(&self) -> Vec<Matrix> {
        let mut rng = input_rng(self.seed);
        let s = self.input_scale;
        (0..self.batch).map(|_| (0..self.seq_len).map(|_| vec![if s > 0.0 { rng.gen_range(-s..=s) } else { 0.0 }]).collect()).collect()
    }

    pub fn ssm_layers(&self) -> impl Iterator<Item = (SsmVariant, &SsmLayerParams)> {
        self.layers.iter().filter_map(|l| match l {
            ResolvedLayer::Ssm { variant, params, .. } => Some((*variant, params)),
            _ => None,
        })
    }
}
