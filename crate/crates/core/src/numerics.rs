//! Bit-exact fixed-point arithmetic.
//!
//! Real values are two's-complement Q formats held in an `i32`; complex values
//! pack two 16-bit components into one 32-bit word (real part in bits 31..16,
//! imaginary part in bits 15..0). Every operation rounds to nearest-even and
//! saturates instead of wrapping. Saturation never fails an operation; it bumps
//! a process-wide event counter, and the `*_sat` variants also report it to the
//! caller so simulators can keep their own per-run tallies.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

static SATURATION_EVENTS: AtomicU64 = AtomicU64::new(0);

/// Total saturation events observed by this process.
pub fn saturation_events() -> u64 {
    SATURATION_EVENTS.load(Ordering::Relaxed)
}

pub fn reset_saturation_events() {
    SATURATION_EVENTS.store(0, Ordering::Relaxed);
}

#[inline]
pub(crate) fn note_saturation_event() {
    SATURATION_EVENTS.fetch_add(1, Ordering::Relaxed);
}

#[inline]
fn note_saturation(hit: bool) {
    if hit {
        SATURATION_EVENTS.fetch_add(1, Ordering::Relaxed);
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("unsupported total width {0} (expected 8, 16 or 32 bits)")]
    Width(u8),
    #[error("fraction bits {frac} must lie strictly between 0 and {total}")]
    Fraction { total: u8, frac: u8 },
    #[error("complex components must be 16 bits wide, got {0}")]
    ComplexWidth(u8),
}

/// A signed fixed-point format: `total_bits` wide with `frac_bits` after the point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawFormat", into = "RawFormat")]
pub struct QFormat {
    total_bits: u8,
    frac_bits: u8,
}

#[derive(Serialize, Deserialize)]
struct RawFormat {
    total_bits: u8,
    frac_bits: u8,
}

impl TryFrom<RawFormat> for QFormat {
    type Error = FormatError;
    fn try_from(r: RawFormat) -> Result<Self, FormatError> {
        QFormat::new(r.total_bits, r.frac_bits)
    }
}

impl From<QFormat> for RawFormat {
    fn from(f: QFormat) -> Self {
        RawFormat { total_bits: f.total_bits, frac_bits: f.frac_bits }
    }
}

impl QFormat {
    /// Default real format.
    pub const Q16_16: QFormat = QFormat { total_bits: 32, frac_bits: 16 };
    /// Default complex component format.
    pub const Q8_8: QFormat = QFormat { total_bits: 16, frac_bits: 8 };
    pub const Q4_4: QFormat = QFormat { total_bits: 8, frac_bits: 4 };

    pub fn new(total_bits: u8, frac_bits: u8) -> Result<Self, FormatError> {
        if !matches!(total_bits, 8 | 16 | 32) {
            return Err(FormatError::Width(total_bits));
        }
        if frac_bits == 0 || frac_bits >= total_bits {
            return Err(FormatError::Fraction { total: total_bits, frac: frac_bits });
        }
        Ok(QFormat { total_bits, frac_bits })
    }

    pub fn total_bits(self) -> u8 {
        self.total_bits
    }

    pub fn frac_bits(self) -> u8 {
        self.frac_bits
    }

    #[inline]
    pub fn min_raw(self) -> i64 {
        -(1i64 << (self.total_bits - 1))
    }

    #[inline]
    pub fn max_raw(self) -> i64 {
        (1i64 << (self.total_bits - 1)) - 1
    }

    /// One unit in the last place.
    pub fn ulp(self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    pub fn max_value(self) -> f64 {
        self.max_raw() as f64 * self.ulp()
    }

    pub fn min_value(self) -> f64 {
        self.min_raw() as f64 * self.ulp()
    }

    #[inline]
    fn clamp(self, wide: i64) -> (i32, bool) {
        if wide > self.max_raw() {
            (self.max_raw() as i32, true)
        } else if wide < self.min_raw() {
            (self.min_raw() as i32, true)
        } else {
            (wide as i32, false)
        }
    }
}

impl fmt::Display for QFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}.{}", self.total_bits - self.frac_bits, self.frac_bits)
    }
}

/// Arithmetic shift right by `shift` with round-half-to-even.
#[inline]
fn shift_round_even(wide: i64, shift: u8) -> i64 {
    let floor = wide >> shift;
    let rem = wide - (floor << shift);
    let half = 1i64 << (shift - 1);
    if rem > half || (rem == half && floor & 1 == 1) {
        floor + 1
    } else {
        floor
    }
}

/// A real fixed-point scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QReal {
    raw: i32,
    fmt: QFormat,
}

impl QReal {
    pub fn zero(fmt: QFormat) -> Self {
        QReal { raw: 0, fmt }
    }

    /// Builds a value from a raw integer, saturating if it does not fit.
    pub fn from_raw(raw: i64, fmt: QFormat) -> Self {
        let (raw, hit) = fmt.clamp(raw);
        note_saturation(hit);
        QReal { raw, fmt }
    }

    pub fn raw(self) -> i32 {
        self.raw
    }

    pub fn format(self) -> QFormat {
        self.fmt
    }

    pub fn to_f64(self) -> f64 {
        self.raw as f64 * self.fmt.ulp()
    }

    pub fn from_f64_sat(x: f64, fmt: QFormat) -> (Self, bool) {
        if x.is_nan() {
            return (QReal::zero(fmt), true);
        }
        let scaled = (x * (fmt.frac_bits as f64).exp2()).round_ties_even();
        let (raw, hit) = if scaled >= fmt.max_raw() as f64 {
            (fmt.max_raw() as i32, scaled > fmt.max_raw() as f64)
        } else if scaled <= fmt.min_raw() as f64 {
            (fmt.min_raw() as i32, scaled < fmt.min_raw() as f64)
        } else {
            (scaled as i32, false)
        };
        (QReal { raw, fmt }, hit)
    }

    #[inline]
    pub fn mul_sat(self, rhs: QReal) -> (QReal, bool) {
        debug_assert_eq!(self.fmt, rhs.fmt);
        let wide = self.raw as i64 * rhs.raw as i64;
        let (raw, hit) = self.fmt.clamp(shift_round_even(wide, self.fmt.frac_bits));
        (QReal { raw, fmt: self.fmt }, hit)
    }

    #[inline]
    pub fn add_sat(self, rhs: QReal) -> (QReal, bool) {
        debug_assert_eq!(self.fmt, rhs.fmt);
        let (raw, hit) = self.fmt.clamp(self.raw as i64 + rhs.raw as i64);
        (QReal { raw, fmt: self.fmt }, hit)
    }

    /// Two's-complement bit pattern as it appears in dumps.
    pub fn to_bits(self) -> u32 {
        let mask = if self.fmt.total_bits == 32 { u32::MAX } else { (1u32 << self.fmt.total_bits) - 1 };
        (self.raw as u32) & mask
    }
}

/// A complex value with two 16-bit components sharing one 32-bit word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QComplex {
    pub re: QReal,
    pub im: QReal,
}

impl QComplex {
    pub fn zero(fmt: QFormat) -> Self {
        QComplex { re: QReal::zero(fmt), im: QReal::zero(fmt) }
    }

    pub fn format(self) -> QFormat {
        self.re.fmt
    }

    pub fn from_parts(re: f64, im: f64, fmt: QFormat) -> (Self, bool) {
        let (re, a) = QReal::from_f64_sat(re, fmt);
        let (im, b) = QReal::from_f64_sat(im, fmt);
        (QComplex { re, im }, a || b)
    }

    pub fn to_parts(self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }

    /// Packs the components: real part in the high half-word.
    pub fn pack(self) -> u32 {
        ((self.re.raw as u16 as u32) << 16) | (self.im.raw as u16 as u32)
    }

    pub fn unpack(word: u32, fmt: QFormat) -> Result<Self, FormatError> {
        if fmt.total_bits != 16 {
            return Err(FormatError::ComplexWidth(fmt.total_bits));
        }
        let re = (word >> 16) as u16 as i16 as i32;
        let im = word as u16 as i16 as i32;
        Ok(QComplex { re: QReal { raw: re, fmt }, im: QReal { raw: im, fmt } })
    }

    #[inline]
    pub fn mul_sat(self, rhs: QComplex) -> (QComplex, bool) {
        let fmt = self.re.fmt;
        let (ar, ai) = (self.re.raw as i64, self.im.raw as i64);
        let (br, bi) = (rhs.re.raw as i64, rhs.im.raw as i64);
        let (re, h1) = fmt.clamp(shift_round_even(ar * br - ai * bi, fmt.frac_bits));
        let (im, h2) = fmt.clamp(shift_round_even(ar * bi + ai * br, fmt.frac_bits));
        (QComplex { re: QReal { raw: re, fmt }, im: QReal { raw: im, fmt } }, h1 || h2)
    }

    #[inline]
    pub fn add_sat(self, rhs: QComplex) -> (QComplex, bool) {
        let (re, h1) = self.re.add_sat(rhs.re);
        let (im, h2) = self.im.add_sat(rhs.im);
        (QComplex { re, im }, h1 || h2)
    }
}

/// Quantize with round-to-nearest-even, saturating to the format range.
pub fn q_from_float(x: f64, fmt: QFormat) -> QReal {
    let (q, hit) = QReal::from_f64_sat(x, fmt);
    note_saturation(hit);
    q
}

pub fn q_to_float(q: QReal) -> f64 {
    q.to_f64()
}

pub fn q_mul(a: QReal, b: QReal) -> QReal {
    let (q, hit) = a.mul_sat(b);
    note_saturation(hit);
    q
}

pub fn q_add(a: QReal, b: QReal) -> QReal {
    let (q, hit) = a.add_sat(b);
    note_saturation(hit);
    q
}

pub fn c_mul(a: QComplex, b: QComplex) -> QComplex {
    let (q, hit) = a.mul_sat(b);
    note_saturation(hit);
    q
}

pub fn c_add(a: QComplex, b: QComplex) -> QComplex {
    let (q, hit) = a.add_sat(b);
    note_saturation(hit);
    q
}

/// Precision flag carried by every PE operand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    Real32,
    Complex16,
}

/// A PE operand: either a real word or a packed complex word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarValue {
    Real(QReal),
    Complex(QComplex),
}

impl ScalarValue {
    pub fn precision(self) -> Precision {
        match self {
            ScalarValue::Real(_) => Precision::Real32,
            ScalarValue::Complex(_) => Precision::Complex16,
        }
    }

    pub fn is_zero(self) -> bool {
        match self {
            ScalarValue::Real(q) => q.raw == 0,
            ScalarValue::Complex(c) => c.re.raw == 0 && c.im.raw == 0,
        }
    }

    /// The 32-bit word this value occupies on a bus or in SRAM.
    pub fn to_word(self) -> u32 {
        match self {
            ScalarValue::Real(q) => q.to_bits(),
            ScalarValue::Complex(c) => c.pack(),
        }
    }

    /// Real component (the real value itself for real operands).
    pub fn re_f64(self) -> f64 {
        match self {
            ScalarValue::Real(q) => q.to_f64(),
            ScalarValue::Complex(c) => c.re.to_f64(),
        }
    }

    pub fn im_f64(self) -> f64 {
        match self {
            ScalarValue::Real(_) => 0.0,
            ScalarValue::Complex(c) => c.im.to_f64(),
        }
    }

    /// Multiply; both operands must share a precision tag.
    #[inline]
    pub fn mul_sat(self, rhs: ScalarValue) -> (ScalarValue, bool) {
        match (self, rhs) {
            (ScalarValue::Real(a), ScalarValue::Real(b)) => {
                let (q, h) = a.mul_sat(b);
                (ScalarValue::Real(q), h)
            }
            (ScalarValue::Complex(a), ScalarValue::Complex(b)) => {
                let (q, h) = a.mul_sat(b);
                (ScalarValue::Complex(q), h)
            }
            _ => panic!("mixed-precision MAC operands"),
        }
    }

    #[inline]
    pub fn add_sat(self, rhs: ScalarValue) -> (ScalarValue, bool) {
        match (self, rhs) {
            (ScalarValue::Real(a), ScalarValue::Real(b)) => {
                let (q, h) = a.add_sat(b);
                (ScalarValue::Real(q), h)
            }
            (ScalarValue::Complex(a), ScalarValue::Complex(b)) => {
                let (q, h) = a.add_sat(b);
                (ScalarValue::Complex(q), h)
            }
            _ => panic!("mixed-precision MAC operands"),
        }
    }
}

/// Formats used by one run: a real format and a complex component format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NumericConfig {
    pub precision: Precision,
    pub real_format: QFormat,
    pub complex_format: QFormat,
}

impl Default for NumericConfig {
    fn default() -> Self {
        NumericConfig { precision: Precision::Real32, real_format: QFormat::Q16_16, complex_format: QFormat::Q8_8 }
    }
}

impl NumericConfig {
    pub fn real(fmt: QFormat) -> Self {
        NumericConfig { precision: Precision::Real32, real_format: fmt, ..Default::default() }
    }

    pub fn complex(fmt: QFormat) -> Self {
        NumericConfig { precision: Precision::Complex16, complex_format: fmt, ..Default::default() }
    }

    /// Complex mode with Q8.8 components.
    pub fn default_complex() -> Self {
        Self::complex(QFormat::Q8_8)
    }

    pub fn zero(&self) -> ScalarValue {
        match self.precision {
            Precision::Real32 => ScalarValue::Real(QReal::zero(self.real_format)),
            Precision::Complex16 => ScalarValue::Complex(QComplex::zero(self.complex_format)),
        }
    }

    /// Encodes `re + i·im`. In real mode the imaginary part is dropped, so
    /// callers must check it is zero beforehand.
    pub fn encode_sat(&self, re: f64, im: f64) -> (ScalarValue, bool) {
        match self.precision {
            Precision::Real32 => {
                let (q, h) = QReal::from_f64_sat(re, self.real_format);
                (ScalarValue::Real(q), h)
            }
            Precision::Complex16 => {
                let (c, h) = QComplex::from_parts(re, im, self.complex_format);
                (ScalarValue::Complex(c), h)
            }
        }
    }

    pub fn encode(&self, re: f64, im: f64) -> ScalarValue {
        let (v, hit) = self.encode_sat(re, im);
        note_saturation(hit);
        v
    }

    /// Quantization step of the active format.
    pub fn ulp(&self) -> f64 {
        match self.precision {
            Precision::Real32 => self.real_format.ulp(),
            Precision::Complex16 => self.complex_format.ulp(),
        }
    }

    pub fn validate(&self) -> Result<(), FormatError> {
        if self.complex_format.total_bits != 16 {
            return Err(FormatError::ComplexWidth(self.complex_format.total_bits));
        }
        Ok(())
    }
}
