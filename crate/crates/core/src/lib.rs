//! Simulator for a controlled-phase gate on charge qubits with auxiliary dots.
//!
//! Each qubit is a single electron shared between two quantum dots, augmented
//! with a third (auxiliary) dot that mediates the Coulomb interaction between
//! neighbouring qubits. The crate models the six-dot two-qubit system, builds
//! piecewise control timelines for the four-step CPHASE protocol, propagates
//! the resulting 9-level Schroedinger dynamics, and evaluates gate quality
//! (average gate fidelity, leakage, Bloch trajectories and geometric phases).
//!
//! All dynamics are dimensionless: the effective auxiliary-auxiliary Coulomb
//! energy is the unit of energy and `hbar` over that energy is the unit of
//! time. Physical units (meV, ps, rad/s) only appear in reporting.

pub mod analysis;
pub mod cli;
pub mod cphase;
pub mod error;
pub mod experiments;
pub mod model;
pub mod propagate;
pub mod schedule;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

use num_complex::Complex64;

pub type C64 = Complex64;
pub type Matrix2 = nalgebra::SMatrix<C64, 2, 2>;
pub type Matrix3 = nalgebra::SMatrix<C64, 3, 3>;
pub type Matrix4 = nalgebra::SMatrix<C64, 4, 4>;
pub type Matrix9 = nalgebra::SMatrix<C64, 9, 9>;
pub type Vector9 = nalgebra::SVector<C64, 9>;

/// Index of the basis state `|d d'>` (dots numbered 1..=3) in the fixed
/// basis order `|11>, |12>, |13>, |21>, |22>, |23>, |31>, |32>, |33>`.
#[inline]
pub fn basis_index(d: usize, dp: usize) -> usize {
    debug_assert!((1..=3).contains(&d) && (1..=3).contains(&dp));
    3 * (d - 1) + (dp - 1)
}

/// Basis ket `|d d'>` as a 9-vector.
pub fn basis_ket(d: usize, dp: usize) -> Vector9 {
    let mut v = Vector9::zeros();
    v[basis_index(d, dp)] = C64::new(1.0, 0.0);
    v
}

/// Indices of the two-qubit subspace `{|11>, |12>, |21>, |22>}`.
pub const QUBIT_SUBSPACE: [usize; 4] = [0, 1, 3, 4];
