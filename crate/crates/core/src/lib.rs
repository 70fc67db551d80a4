//! Emulating real, time-dependent `n`-level Hamiltonians in the
//! single-excitation subspace of `n` tunably coupled qubits.
//!
//! The pipeline is: a [`TargetHamiltonian`] is compiled against
//! [`HardwareConstraints`] into a [`ControlSchedule`]; the [`propagator`]
//! evolves the target, the ideal subspace Hamiltonian and the full circuit;
//! [`metrics`] scores fidelity and leakage. [`collision`] builds targets from
//! semiclassical atomic-collision channel data.
//!
//! Everything is generic over the scalar type ([`Real`]); `f64` aliases are
//! provided below.

// `!(a < b)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod circuit;
pub mod collision;
pub mod error;
pub mod hamiltonian;
pub mod metrics;
pub mod num;
pub mod pipeline;
pub mod propagator;
pub mod schedule;
pub mod units;

pub use circuit::{CouplingTensor, HardwareConstraints, PhiCoefficients};
pub use collision::{ChannelData, Trajectory};
pub use error::{Error, Result};
pub use hamiltonian::{EnergyProfile, TargetHamiltonian, Violation};
pub use metrics::SimulationReport;
pub use num::Real;
pub use propagator::{EvolutionResult, PropagatorConfig};
pub use schedule::{Binding, CompileOptions, ControlSchedule, EnergySign, LambdaProfile};
pub use units::UnitSystem;

pub type TargetHamiltonianF64 = TargetHamiltonian<f64>;
pub type CouplingTensorF64 = CouplingTensor<f64>;
pub type HardwareConstraintsF64 = HardwareConstraints<f64>;
pub type ControlScheduleF64 = ControlSchedule<f64>;
pub type CompileOptionsF64 = CompileOptions<f64>;
pub type LambdaProfileF64 = LambdaProfile<f64>;
pub type EvolutionResultF64 = EvolutionResult<f64>;
pub type PropagatorConfigF64 = PropagatorConfig<f64>;
pub type SimulationReportF64 = SimulationReport<f64>;
pub type ChannelDataF64 = ChannelData<f64>;
pub type TrajectoryF64 = Trajectory<f64>;

pub type TargetHamiltonianF32 = TargetHamiltonian<f32>;
pub type ControlScheduleF32 = ControlSchedule<f32>;
