//! Asymptotic systems of semilinear wave equations and the machinery to test
//! them numerically.
//!
//! - [`algebra`]: Lie algebras, quadratic Hamiltonians, Euler equations.
//! - [`system`]: wave systems, the example catalogue, asymptotic systems.
//! - [`ode`]: adaptive integration with forcing and blow-up detection.
//! - [`conditions`]: null-condition, growth and boundedness/stability classifiers.
//! - [`wave1d`]: spherically symmetric double-null solver and radiation traces.

pub mod algebra;
pub mod conditions;
pub mod error;
pub mod export;
pub mod ode;
pub mod system;
pub mod tensor;
pub mod wave1d;

pub use algebra::{
    euler_rhs, hamiltonian_value, rigid_body, validate_algebra, AlgebraReport, DualVector,
    LieAlgebra, QuadraticHamiltonian,
};
pub use conditions::{
    certify_hamiltonian, check_condition_1, classical_null_condition, classify_growth,
    ClassificationReport, Condition1Params, HamiltonianCertificate, Verdict,
};
pub use error::{Error, Result};
pub use ode::{
    blowup_time_estimate, integrate, integrate_with, make_forcing, Forcing, ForcingKind,
    IntegratorOptions, Status, Trajectory,
};
pub use system::{
    asymptotic_system, catalogue, catalogue_hamiltonian, from_hamiltonian,
    hamiltonian_asymptotic_system, list_catalogue, AsymptoticSystem, WaveSystemSpec,
};
pub use tensor::Tensor3;
pub use wave1d::{
    compare_to_asymptotic, evolve, hamiltonian_drift, radiation_trace, CharacteristicData,
    CharacteristicGrid, RadiationTrace,
};
