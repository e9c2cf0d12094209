//! Cooling dynamics of a membrane-in-the-middle optomechanical system driven
//! by two red-detuned fields.
//!
//! The crate integrates the linearized quantum Langevin dynamics in the
//! displaced interaction frame, propagates the second moments of the
//! fluctuations to obtain the thermal phonon number, compares the mean
//! quadratures against the factorized nonlinear equations, and evaluates the
//! sideband-resolved (adiabatic) cooling limits.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adiabatic;
pub mod covariance;
pub mod error;
pub mod harness;
pub mod meanfield;
pub mod model;
pub mod ode;
pub mod propagator;

pub use error::{Error, Result};
pub use model::{Cavity, DerivedQuantities, Mode, System, SystemParams};

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;

pub type CMatrix6 = SMatrix<Complex64, 6, 6>;
pub type CVector6 = SVector<Complex64, 6>;

/// Integration tolerances shared by every time-domain solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Tolerance {
    /// Relative tolerance `tol` with an absolute floor a hundred times smaller.
    pub fn new(tol: f64) -> Self {
        Tolerance {
            rtol: tol,
            atol: tol * 1e-2,
        }
    }

    pub(crate) fn control(&self, sys: &System) -> ode::StepControl {
        ode::StepControl::new(self.rtol, self.atol, sys.max_step())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rtol: 1e-8,
            atol: 1e-10,
        }
    }
}

/// Uniform output grid `0, dt, 2 dt, ...` up to and including `t_max`.
pub fn output_grid(t_max: f64, dt_out: f64) -> Result<Vec<f64>> {
    if !(t_max >= 0.0) || !(dt_out > 0.0) || !t_max.is_finite() || !dt_out.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need t_max >= 0 and dt_out > 0 (got {t_max}, {dt_out})"
        )));
    }
    let n = (t_max / dt_out + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| i as f64 * dt_out).collect();
    if t_max - grid[n] > 1e-9 * dt_out {
        grid.push(t_max);
    }
    Ok(grid)
}
