//! The programmable processing element.
//!
//! A PE holds one stationary operand and one accumulator, latches three
//! inputs per cycle (north, west, and the north-east diagonal) and drives
//! three outputs (south, east, south-west diagonal). Its mode, chosen at
//! preload, decides which MAC it performs and which ports carry data.
//!
//! Control word layout (bits not listed are reserved and must be zero):
//!
//! | bits | field |
//! |------|-------|
//! | 2..0 | mode code, see [`PeMode::code`] |
//! | 3    | complex flag (packed 16+16 operands) |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::ScalarValue;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PeError {
    #[error("invalid control word {0:#010x}: reserved bits set")]
    InvalidControl(u32),
    #[error("unknown PE mode '{0}'")]
    UnknownMode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PeMode {
    /// Fixed-coefficient recurrent integration: `acc = s·acc + n`.
    Fri,
    /// Time-varying recurrent integration: `acc = (s + n)·acc + n`.
    Tri,
    /// Banded weight-stationary: operand on the diagonal, partial sum south.
    Bws,
    /// Output-stationary: `acc += n·w`.
    Tos,
    Ws,
    Is,
    PassThrough,
    Sleep,
}

impl PeMode {
    pub const ALL: [PeMode; 8] =
        [PeMode::Fri, PeMode::Tri, PeMode::Bws, PeMode::Tos, PeMode::Ws, PeMode::Is, PeMode::PassThrough, PeMode::Sleep];

    pub fn code(self) -> u32 {
        match self {
            PeMode::Fri => 0b000,
            PeMode::Tri => 0b001,
            PeMode::Bws => 0b010,
            PeMode::Tos => 0b011,
            PeMode::Ws => 0b100,
            PeMode::Is => 0b101,
            PeMode::PassThrough => 0b110,
            PeMode::Sleep => 0b111,
        }
    }

    pub fn from_code(code: u32) -> PeMode {
        PeMode::ALL[(code & 0b111) as usize]
    }

    pub fn index(self) -> usize {
        self.code() as usize
    }

    pub fn is_mac(self) -> bool {
        !matches!(self, PeMode::PassThrough | PeMode::Sleep)
    }

    pub fn power_class(self) -> PowerClass {
        match self {
            PeMode::Sleep => PowerClass::Sleep,
            PeMode::PassThrough => PowerClass::PassThrough,
            _ => PowerClass::Mac,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PeMode::Fri => "FRI",
            PeMode::Tri => "TRI",
            PeMode::Bws => "BWS",
            PeMode::Tos => "TOS",
            PeMode::Ws => "WS",
            PeMode::Is => "IS",
            PeMode::PassThrough => "PT",
            PeMode::Sleep => "SLP",
        }
    }
}

impl fmt::Display for PeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PeMode {
    type Err = PeError;
    fn from_str(s: &str) -> Result<Self, PeError> {
        PeMode::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| PeError::UnknownMode(s.to_string()))
    }
}

/// Energy bucket a cycle is billed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerClass {
    Sleep,
    PassThrough,
    Mac,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PowerTable {
    #[default]
    FixedPoint32,
    Int8,
}

impl PowerTable {
    /// Per-PE power in microwatts (measured mode powers).
    pub fn power_uw(self, class: PowerClass) -> u64 {
        match (self, class) {
            (PowerTable::FixedPoint32, PowerClass::Sleep) => 3_800,
            (PowerTable::FixedPoint32, PowerClass::PassThrough) => 6_700,
            (PowerTable::FixedPoint32, PowerClass::Mac) => 11_500,
            (PowerTable::Int8, PowerClass::Sleep) => 540,
            (PowerTable::Int8, PowerClass::PassThrough) => 730,
            (PowerTable::Int8, PowerClass::Mac) => 890,
        }
    }
}

/// Mode power in mW.
pub fn power_of(mode: PeMode, table: PowerTable) -> f64 {
    table.power_uw(mode.power_class()) as f64 / 1000.0
}

/// Which internal clock is running. The two clocks are never on together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockEnable {
    Load,
    Compute,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PeControl {
    pub mode: PeMode,
    pub complex: bool,
    pub clock: ClockEnable,
}

impl PeControl {
    pub fn new(mode: PeMode, complex: bool) -> Self {
        PeControl { mode, complex, clock: ClockEnable::Off }
    }

    pub fn encode(self) -> u32 {
        self.mode.code() | (u32::from(self.complex) << 3)
    }
}

impl Default for PeControl {
    fn default() -> Self {
        PeControl::new(PeMode::Sleep, false)
    }
}

pub fn decode_control(word: u32) -> Result<PeControl, PeError> {
    if word & !0b1111 != 0 {
        return Err(PeError::InvalidControl(word));
    }
    Ok(PeControl { mode: PeMode::from_code(word), complex: word & 0b1000 != 0, clock: ClockEnable::Load })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PortsIn {
    pub north: ScalarValue,
    pub west: ScalarValue,
    pub diag: ScalarValue,
}

impl PortsIn {
    pub fn splat(v: ScalarValue) -> Self {
        PortsIn { north: v, west: v, diag: v }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PortsOut {
    pub south: ScalarValue,
    pub east: ScalarValue,
    pub diag: ScalarValue,
}

impl PortsOut {
    pub fn splat(v: ScalarValue) -> Self {
        PortsOut { south: v, east: v, diag: v }
    }
}

/// Cycle counters, bucketed by what the PE was doing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PeCycles {
    pub sleep: u64,
    pub pass: u64,
    pub mac: u64,
    /// Compute-phase cycles per mode, indexed by [`PeMode::index`].
    pub by_mode: [u64; 8],
}

impl PeCycles {
    pub fn charge(&mut self, class: PowerClass) {
        match class {
            PowerClass::Sleep => self.sleep += 1,
            PowerClass::PassThrough => self.pass += 1,
            PowerClass::Mac => self.mac += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.sleep + self.pass + self.mac
    }

    /// Energy in attojoules for a cycle time in picoseconds.
    pub fn energy_aj(&self, table: PowerTable, cycle_ps: u64) -> u128 {
        let uw_cycles = self.sleep * table.power_uw(PowerClass::Sleep)
            + self.pass * table.power_uw(PowerClass::PassThrough)
            + self.mac * table.power_uw(PowerClass::Mac);
        uw_cycles as u128 * cycle_ps as u128
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeState {
    pub stationary: ScalarValue,
    pub accum: ScalarValue,
    pub control: PeControl,
    pub cycles: PeCycles,
    pub saturations: u64,
}

impl PeState {
    /// A cleared PE in Sleep mode whose buffers hold `zero`.
    pub fn new(zero: ScalarValue) -> Self {
        PeState { stationary: zero, accum: zero, control: PeControl::default(), cycles: PeCycles::default(), saturations: 0 }
    }

    pub fn mode(&self) -> PeMode {
        self.control.mode
    }

    #[inline]
    fn zero(&self) -> ScalarValue {
        match self.accum {
            ScalarValue::Real(q) => ScalarValue::Real(crate::numerics::QReal::zero(q.format())),
            ScalarValue::Complex(c) => ScalarValue::Complex(crate::numerics::QComplex::zero(c.format())),
        }
    }

    /// Latches a stationary operand and control word; the previous contents
    /// are returned so a row of PEs behaves as a shift register.
    pub fn preload_step(&self, stationary_in: ScalarValue, control_in: u32) -> Result<(PeState, (ScalarValue, u32)), PeError> {
        let control = decode_control(control_in)?;
        let forwarded = (self.stationary, self.control.encode());
        let mut next = *self;
        next.stationary = stationary_in;
        next.control = control;
        next.cycles.charge(PowerClass::PassThrough);
        Ok((next, forwarded))
    }

    /// One compute-phase cycle. Outputs are a function of the latched inputs
    /// and the state at the start of the cycle; recurrent modes forward the
    /// freshly computed state on the diagonal.
    #[inline]
    pub fn compute_step(&self, inp: PortsIn) -> (PeState, PortsOut) {
        let zero = self.zero();
        let mut next = *self;
        let mut sat = false;
        let mut mul = |a: ScalarValue, b: ScalarValue| {
            let (v, h) = a.mul_sat(b);
            sat |= h;
            v
        };
        let out = match self.control.mode {
            PeMode::Fri => {
                let p = mul(self.stationary, self.accum);
                let (acc, h) = p.add_sat(inp.north);
                sat |= h;
                next.accum = acc;
                PortsOut { south: zero, east: zero, diag: acc }
            }
            PeMode::Tri => {
                let (coef, h1) = self.stationary.add_sat(inp.north);
                let p = mul(coef, self.accum);
                let (acc, h2) = p.add_sat(inp.north);
                sat |= h1 || h2;
                next.accum = acc;
                PortsOut { south: zero, east: zero, diag: acc }
            }
            PeMode::Bws => {
                let p = mul(self.stationary, inp.diag);
                let (s, h) = inp.north.add_sat(p);
                sat |= h;
                PortsOut { south: s, east: zero, diag: inp.diag }
            }
            PeMode::Tos => {
                let p = mul(inp.north, inp.west);
                let (acc, h) = self.accum.add_sat(p);
                sat |= h;
                next.accum = acc;
                PortsOut { south: inp.north, east: inp.west, diag: zero }
            }
            PeMode::Ws | PeMode::Is => {
                let p = mul(self.stationary, inp.west);
                let (s, h) = inp.north.add_sat(p);
                sat |= h;
                PortsOut { south: s, east: inp.west, diag: zero }
            }
            PeMode::PassThrough => PortsOut { south: inp.north, east: inp.west, diag: inp.diag },
            PeMode::Sleep => PortsOut::splat(zero),
        };
        if sat {
            next.saturations += 1;
            crate::numerics::note_saturation_event();
        }
        next.cycles.charge(self.control.mode.power_class());
        next.cycles.by_mode[self.control.mode.index()] += 1;
        (next, out)
    }
}
