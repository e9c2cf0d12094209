//! Factorized nonlinear mean-field equations, used to check the linearized
//! solver's quadratures.
//!
//! Same frames as the linear solver: cavities rotate at their resonance
//! frequencies, the mechanics at `omega_m`, and the tunneling carries the
//! phase `e^{∓i(Δ2-Δ1)t}`. Noise terms average to zero and are dropped.

use nalgebra::SVector;
use num_complex::Complex64;

use crate::error::Result;
use crate::model::System;
use crate::ode;
use crate::propagator::Quadratures;
use crate::{output_grid, Tolerance};

const I: Complex64 = Complex64::new(0.0, 1.0);

type Amplitudes = SVector<Complex64, 3>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldState {
    pub t: f64,
    pub alpha1: Complex64,
    pub beta: Complex64,
    pub alpha2: Complex64,
}

fn rhs(sys: &System, t: f64, y: &Amplitudes) -> Amplitudes {
    let p = sys.params();
    let (a1, b, a2) = (y[0], y[1], y[2]);
    let em = Complex64::cis(-p.omega_m * t);
    let ep = em.conj();
    let x = em * b + ep * b.conj();
    let tunnel = -I * p.j * Complex64::cis(-sys.derived().cavity_freq_gap * t);
    let da1 = -p.kappa1 * a1 + I * p.gm * x * a1 + tunnel * a2 + p.e1 * Complex64::cis(p.delta1 * t);
    let db = -p.gamma_m * b + I * p.gm * ep * (a1.norm_sqr() - a2.norm_sqr());
    let da2 = -p.kappa2 * a2 - I * p.gm * x * a2 - tunnel.conj() * a1 + p.e2 * Complex64::cis(p.delta2 * t);
    Amplitudes::new(da1, db, da2)
}

/// Integrate the amplitudes from zero, sampled every `dt_out`.
pub fn integrate_meanfield(sys: &System, t_max: f64, dt_out: f64, tol: &Tolerance) -> Result<Vec<MeanFieldState>> {
    let grid = output_grid(t_max, dt_out)?;
    let mut out = Vec::with_capacity(grid.len());
    ode::integrate(
        |t, y: &Amplitudes| rhs(sys, t, y),
        0.0,
        Amplitudes::zeros(),
        t_max,
        &grid,
        &tol.control(sys),
        |t, y| {
            out.push(MeanFieldState {
                t,
                alpha1: y[0],
                beta: y[1],
                alpha2: y[2],
            });
            Ok(())
        },
    )?;
    Ok(out)
}

/// `X = √2 Re(amplitude)` for each mode.
pub fn meanfield_quadratures(series: &[MeanFieldState]) -> Vec<Quadratures> {
    let s2 = std::f64::consts::SQRT_2;
    series
        .iter()
        .map(|s| Quadratures {
            t: s.t,
            x_c1: s2 * s.alpha1.re,
            x_c2: s2 * s.alpha2.re,
            x_m: s2 * s.beta.re,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemParams;
    use crate::propagator::{drive_envelope, integrate_means, quadratures};
    use crate::Cavity;

    fn detuned_pair() -> SystemParams {
        SystemParams {
            kappa1: 1.0,
            kappa2: 5.0,
            gm: 1e-5,
            omega_m: 50.0,
            gamma_m: 1e-3,
            delta1: 45.0,
            delta2: 55.0,
            e1: 4.5e6,
            e2: 5.5e6,
            j: 1.0,
            n_th: 100.0,
        }
    }

    #[test]
    fn undriven_stays_at_rest() {
        let s = SystemParams { e1: 0.0, e2: 0.0, ..detuned_pair() }.validate().unwrap();
        let r = integrate_meanfield(&s, 3.0, 0.5, &Tolerance::default()).unwrap();
        let q = meanfield_quadratures(&r);
        assert!(q.iter().all(|x| x.x_c1 == 0.0 && x.x_c2 == 0.0 && x.x_m == 0.0));
    }

    #[test]
    fn linear_driven_decay_closed_form() {
        let s = SystemParams { gm: 0.0, j: 0.0, ..detuned_pair() }.validate().unwrap();
        let r = integrate_meanfield(&s, 4.0, 0.2, &Tolerance::new(1e-10)).unwrap();
        for st in &r {
            for (a, e, k, d) in [(st.alpha1, 4.5e6, 1.0, 45.0), (st.alpha2, 5.5e6, 5.0, 55.0)] {
                let exact = e * (Complex64::cis(d * st.t) - (-k * st.t).exp()) / Complex64::new(k, d);
                assert!((a - exact).norm() <= 1e-8 * exact.norm().max(1.0), "t={} {a} {exact}", st.t);
            }
            assert_eq!(st.beta, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn quadrature_of_real_amplitude() {
        let st = MeanFieldState {
            t: 0.0,
            alpha1: Complex64::new(3.0, 0.0),
            beta: Complex64::new(0.0, 0.0),
            alpha2: Complex64::new(0.0, 7.0),
        };
        let q = meanfield_quadratures(&[st])[0];
        assert!((q.x_c1 - 3.0 * std::f64::consts::SQRT_2).abs() < 1e-15);
        assert_eq!(q.x_c2, 0.0);
    }

    #[test]
    fn uncoupled_linear_and_nonlinear_agree() {
        let s = SystemParams { gm: 0.0, ..detuned_pair() }.validate().unwrap();
        let tol = Tolerance::new(1e-10);
        let nl = meanfield_quadratures(&integrate_meanfield(&s, 2.0, 0.05, &tol).unwrap());
        let lin = quadratures(&s, &integrate_means(&s, 2.0, 0.05, &tol).unwrap());
        for (a, b) in lin.iter().zip(&nl) {
            assert!((a.x_c1 - b.x_c1).abs() <= 1e-7 * b.x_c1.abs().max(1e3));
            assert!((a.x_c2 - b.x_c2).abs() <= 1e-7 * b.x_c2.abs().max(1e3));
            assert_eq!(a.x_m, 0.0);
        }
    }

    #[test]
    fn weak_drive_amplitudes_match_linear_solver() {
        // g|β| ≪ κ1: the factorized and linearized amplitudes coincide.
        let s = SystemParams { e1: 4.5e3, e2: 5.5e3, ..detuned_pair() }.validate().unwrap();
        let tol = Tolerance::new(1e-10);
        let nl = integrate_meanfield(&s, 5.0, 0.01, &tol).unwrap();
        let lin = integrate_means(&s, 5.0, 0.01, &tol).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for (a, b) in lin.iter().zip(&nl) {
            let alpha1 = a.mu[0] + drive_envelope(&s, Cavity::One, a.t);
            let alpha2 = a.mu[4] + drive_envelope(&s, Cavity::Two, a.t);
            num += (alpha1 - b.alpha1).norm_sqr() + (alpha2 - b.alpha2).norm_sqr();
            den += b.alpha1.norm_sqr() + b.alpha2.norm_sqr();
        }
        assert!((num / den).sqrt() < 1e-3, "{}", (num / den).sqrt());
    }

    #[test]
    fn swap_symmetry_of_amplitudes() {
        let p = SystemParams { j: 0.5, ..detuned_pair() };
        let tol = Tolerance::new(1e-10);
        let a = integrate_meanfield(&p.validate().unwrap(), 3.0, 0.5, &tol).unwrap();
        let b = integrate_meanfield(&p.swap12().validate().unwrap(), 3.0, 0.5, &tol).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.beta.norm() - y.beta.norm()).abs() <= 1e-7 * x.beta.norm().max(1.0));
            assert!((x.alpha1.norm() - y.alpha2.norm()).abs() <= 1e-7 * x.alpha1.norm().max(1.0));
            assert!((x.alpha2.norm() - y.alpha1.norm()).abs() <= 1e-7 * x.alpha2.norm().max(1.0));
        }
    }
}
