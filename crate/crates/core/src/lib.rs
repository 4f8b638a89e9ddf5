//! Cycle-accurate simulator of a programmable systolic array that runs
//! diagonal state-space layers (S4, Liquid-S4) and GEMM, together with a
//! floating-point reference model and cost metrics.
//!
//! Layers are planned onto the array by [`mapper`], executed phase by phase in
//! [`array`], checked against [`golden`] and costed by [`metrics`]. The
//! [`sim`] module wires these together.

pub mod array;
pub mod golden;
pub mod mapper;
pub mod metrics;
pub mod numerics;
pub mod par;
pub mod pe;
pub mod sim;

pub use array::{Array, ArrayConfig, Phase, PortTrace, Stream};
pub use golden::{Matrix, SsmLayerParams, SsmVariant};
pub use mapper::{Dataflow, GemmSpec, LayoutPlan};
pub use numerics::{NumericConfig, Precision, QFormat};
pub use par::ExecPolicy;
pub use pe::{PeMode, PowerTable};
