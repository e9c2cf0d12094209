//! Linearized dynamics in the displaced interaction frame.
//!
//! The fluctuation operators `c = (a1, a1†, b, b†, a2, a2†)` obey
//! `dc/dt = M(t) c + λ(t) + noise`. This module evaluates the classical
//! displacement `E_j(t)`, the drift `M(t)`, the drive `λ(t)`, and integrates
//! the fundamental matrix `Φ(t, τ)` and the mean vector.
//!
//! Frame conventions: cavity operators rotate at their own resonance
//! frequency and carry the displacement `E_j(t)`, the mechanical operator
//! rotates at `omega_m`. The tunneling phase is `e^{-i(Δ2-Δ1)t}` in the
//! cavity-1 equation and `e^{+i(Δ2-Δ1)t}` in the cavity-2 equation. All
//! phases are evaluated from `t` directly at every stage.

use num_complex::Complex64;

use crate::error::Result;
use crate::model::{Cavity, Mode, System};
use crate::ode;
use crate::{output_grid, CMatrix6, CVector6, Tolerance};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
fn cis(phase: f64) -> Complex64 {
    Complex64::cis(phase)
}

/// Classical displacement `E_j(t) = (i E_j / Δ_j)(1 - e^{iΔ_j t})`.
pub fn drive_envelope(sys: &System, cavity: Cavity, t: f64) -> Complex64 {
    let e = sys.drive(cavity);
    let d = sys.detuning(cavity);
    // 1 - e^{ix} = -2i sin(x/2) e^{ix/2}, which keeps full precision near t = 0.
    let half = 0.5 * d * t;
    let one_minus = -2.0 * I * half.sin() * cis(half);
    I * (e / d) * one_minus
}

/// Optomechanical and tunneling coefficients of the three non-daggered
/// equations of motion, from which the full drift matrix is assembled.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Coefficients {
    /// `i gm E1(t) e^{-i ωm t}`: beam-splitter coupling of cavity 1.
    pub rot1: Complex64,
    /// `i gm E1(t) e^{+i ωm t}`: squeezing coupling of cavity 1.
    pub ctr1: Complex64,
    pub rot2: Complex64,
    pub ctr2: Complex64,
    /// `-i J e^{-i(Δ2-Δ1)t}`, the coefficient of `a2` in the `a1` equation.
    pub tunnel: Complex64,
}

impl Coefficients {
    pub(crate) fn at(sys: &System, t: f64) -> Self {
        let p = sys.params();
        let e1 = drive_envelope(sys, Cavity::One, t);
        let e2 = drive_envelope(sys, Cavity::Two, t);
        let em = cis(-p.omega_m * t);
        let ep = em.conj();
        let g1 = I * p.gm * e1;
        let g2 = I * p.gm * e2;
        Coefficients {
            rot1: g1 * em,
            ctr1: g1 * ep,
            rot2: g2 * em,
            ctr2: g2 * ep,
            tunnel: -I * p.j * cis(-sys.derived().cavity_freq_gap * t),
        }
    }
}

/// Assemble the 6×6 drift from the three non-daggered equations
///
/// ```text
/// a1' = -κ1 a1 + rot1 b + ctr1 b† + tunnel a2
/// b'  = -γm b  - rot1* a1 + ctr1 a1† + rot2* a2 - ctr2 a2†
/// a2' = -κ2 a2 - rot2 b - ctr2 b† - tunnel* a1
/// ```
///
/// and fill every daggered row as the conjugate of its partner with columns
/// swapped within each adjoint pair.
pub(crate) fn assemble(sys: &System, c: &Coefficients) -> CMatrix6 {
    use Mode::*;
    let p = sys.params();
    let mut m = CMatrix6::zeros();
    let mut set = |r: Mode, col: Mode, v: Complex64| {
        m[(r.index(), col.index())] = v;
        m[(r.adjoint().index(), col.adjoint().index())] = v.conj();
    };
    set(A1, A1, (-p.kappa1).into());
    set(A1, B, c.rot1);
    set(A1, BDag, c.ctr1);
    set(A1, A2, c.tunnel);

    set(B, B, (-p.gamma_m).into());
    set(B, A1, -c.rot1.conj());
    set(B, A1Dag, c.ctr1);
    set(B, A2, c.rot2.conj());
    set(B, A2Dag, -c.ctr2);

    set(A2, A2, (-p.kappa2).into());
    set(A2, B, -c.rot2);
    set(A2, BDag, -c.ctr2);
    set(A2, A1, -c.tunnel.conj());
    m
}

/// Drift matrix `M(t)`.
pub fn drift_matrix(sys: &System, t: f64) -> CMatrix6 {
    assemble(sys, &Coefficients::at(sys, t))
}

/// Coherent drive `λ(t)` generated by the frame displacement.
pub fn drive_vector(sys: &System, t: f64) -> CVector6 {
    let p = sys.params();
    let e1 = drive_envelope(sys, Cavity::One, t);
    let e2 = drive_envelope(sys, Cavity::Two, t);
    let tunnel = -I * p.j * cis(-sys.derived().cavity_freq_gap * t);
    let l1 = tunnel * e2 - p.kappa1 * e1;
    let lb = I * p.gm * cis(p.omega_m * t) * (e1.norm_sqr() - e2.norm_sqr());
    let l3 = -tunnel.conj() * e1 - p.kappa2 * e2;
    CVector6::new(l1, l1.conj(), lb, lb.conj(), l3, l3.conj())
}

/// Fundamental matrix `Φ(t, τ)`; element `(i, j)` is `d_{i+1, j+1}(t, τ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator {
    pub tau: f64,
    pub t: f64,
    pub matrix: CMatrix6,
}

impl Propagator {
    #[inline]
    pub fn d(&self, row: Mode, col: Mode) -> Complex64 {
        self.matrix[(row.index(), col.index())]
    }
}

/// Solve `dΦ/dt = M(t) Φ` with `Φ(τ, τ) = I`.
pub fn integrate_propagator(sys: &System, tau: f64, t: f64, tol: &Tolerance) -> Result<Propagator> {
    if !(0.0 <= tau && tau <= t) {
        return Err(crate::Error::InvalidArgument(format!(
            "propagator needs 0 <= tau <= t (got tau={tau}, t={t})"
        )));
    }
    let matrix = ode::integrate(
        |s, phi: &CMatrix6| drift_matrix(sys, s) * phi,
        tau,
        CMatrix6::identity(),
        t,
        &[],
        &tol.control(sys),
        |_, _| Ok(()),
    )?;
    Ok(Propagator { tau, t, matrix })
}

/// `Φ(t, τ)` for every `τ` in `taus` (descending, each in `[0, t]`) from one
/// backward sweep of `∂Φ(t,τ)/∂τ = -Φ(t,τ) M(τ)` starting at `Φ(t, t) = I`.
pub fn propagator_family(sys: &System, t: f64, taus: &[f64], tol: &Tolerance) -> Result<Vec<Propagator>> {
    let mut out = Vec::with_capacity(taus.len());
    let t_end = taus.last().copied().unwrap_or(t).min(t);
    ode::integrate(
        |s, phi: &CMatrix6| -(phi * drift_matrix(sys, s)),
        t,
        CMatrix6::identity(),
        t_end,
        taus,
        &tol.control(sys),
        |tau, phi| {
            out.push(Propagator {
                tau,
                t,
                matrix: *phi,
            });
            Ok(())
        },
    )?;
    Ok(out)
}

/// First moments `μ(t) = ⟨c(t)⟩` in the interaction frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanState {
    pub t: f64,
    pub mu: CVector6,
}

/// Solve `dμ/dt = M(t) μ + λ(t)` from `μ(0) = 0`, sampled every `dt_out`.
pub fn integrate_means(sys: &System, t_max: f64, dt_out: f64, tol: &Tolerance) -> Result<Vec<MeanState>> {
    let grid = output_grid(t_max, dt_out)?;
    let mut out = Vec::with_capacity(grid.len());
    ode::integrate(
        |s, mu: &CVector6| drift_matrix(sys, s) * mu + drive_vector(sys, s),
        0.0,
        CVector6::zeros(),
        t_max,
        &grid,
        &tol.control(sys),
        |t, mu| {
            out.push(MeanState { t, mu: *mu });
            Ok(())
        },
    )?;
    Ok(out)
}

/// Cavity quadratures and mechanical displacement at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratures {
    pub t: f64,
    pub x_c1: f64,
    pub x_c2: f64,
    pub x_m: f64,
}

/// Quadratures `X = √2 Re⟨·⟩` with the displacement `E_j(t)` restored on the
/// cavity amplitudes. Cavities are in their own rotating frames, the
/// mechanics in the frame rotating at `omega_m`.
pub fn quadratures(sys: &System, means: &[MeanState]) -> Vec<Quadratures> {
    let s2 = std::f64::consts::SQRT_2;
    means
        .iter()
        .map(|m| Quadratures {
            t: m.t,
            x_c1: s2 * (m.mu[Mode::A1.index()] + drive_envelope(sys, Cavity::One, m.t)).re,
            x_c2: s2 * (m.mu[Mode::A2.index()] + drive_envelope(sys, Cavity::Two, m.t)).re,
            x_m: s2 * m.mu[Mode::B.index()].re,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemParams;
    use proptest::prelude::*;
    use std::f64::consts::PI;

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

    fn sys(p: SystemParams) -> System {
        p.validate().unwrap()
    }

    fn max_abs(m: &CMatrix6) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn envelope_special_values() {
        let s = sys(detuned_pair());
        assert_eq!(drive_envelope(&s, Cavity::One, 0.0), Complex64::new(0.0, 0.0));
        let t = PI / 45.0;
        let v = drive_envelope(&s, Cavity::One, t);
        let expect = I * 2.0 * 4.5e6 / 45.0;
        assert!((v - expect).norm() < 1e-9 * expect.norm());
    }

    #[test]
    fn envelope_matches_quadrature_of_its_derivative() {
        // dE/dt = i E e^{iΔt}... integrated by composite Simpson as an oracle.
        let p = SystemParams { e1: 1e7, delta1: 100.0, ..detuned_pair() };
        let s = sys(p);
        let t = 0.005;
        let n = 2000;
        let h = t / n as f64;
        let f = |x: f64| Complex64::new(1e7, 0.0) * cis(100.0 * x);
        let mut acc = f(0.0) + f(t);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += f(k as f64 * h) * w;
        }
        // ∫ E e^{iΔs} ds from 0 to t is the amplitude accumulated by the free drive.
        let quad = acc * (h / 3.0);
        let v = drive_envelope(&s, Cavity::One, t);
        assert!((v - quad).norm() <= 1e-9 * quad.norm(), "{v} vs {quad}");
    }

    #[test]
    fn undriven_uncoupled_drift_is_diagonal() {
        let p = SystemParams { e1: 0.0, e2: 0.0, j: 0.0, ..detuned_pair() };
        let s = sys(p);
        for t in [0.0, 0.3, 17.0] {
            let m = drift_matrix(&s, t);
            let d = [-1.0, -1.0, -1e-3, -1e-3, -5.0, -5.0];
            for i in 0..6 {
                for j in 0..6 {
                    let want = if i == j { d[i] } else { 0.0 };
                    assert_eq!(m[(i, j)], Complex64::new(want, 0.0));
                }
            }
        }
    }

    #[test]
    fn drift_at_zero_keeps_only_tunneling() {
        let s = sys(detuned_pair());
        let m = drift_matrix(&s, 0.0);
        for i in 0..6 {
            for j in 0..6 {
                let tunnel = matches!((i, j), (0, 4) | (1, 5) | (4, 0) | (5, 1));
                if i != j && !tunnel {
                    assert_eq!(m[(i, j)].norm(), 0.0, "({i},{j})");
                }
            }
        }
        assert_eq!(m[(0, 4)], Complex64::new(0.0, -1.0));
        assert_eq!(m[(5, 1)], Complex64::new(0.0, 1.0));
    }

    /// The drift matrix written out entry by entry in terms of
    /// `P_j(t) = i gm E_j(t)` and `J(t) = -iJ e^{-i(Δ2-Δ1)t}`.
    fn reference_matrix(s: &System, t: f64) -> CMatrix6 {
        let p = s.params();
        let p1 = I * p.gm * drive_envelope(s, Cavity::One, t);
        let p2 = I * p.gm * drive_envelope(s, Cavity::Two, t);
        let jt = -I * p.j * cis(-(p.delta2 - p.delta1) * t);
        let em = cis(-p.omega_m * t);
        let ep = cis(p.omega_m * t);
        let z = Complex64::new(0.0, 0.0);
        let k1 = Complex64::from(-p.kappa1);
        let k2 = Complex64::from(-p.kappa2);
        let g = Complex64::from(-p.gamma_m);
        #[rustfmt::skip]
        let rows = [
            [k1, z, p1 * em, p1 * ep, jt, z],
            [z, k1, p1.conj() * em, p1.conj() * ep, z, jt.conj()],
            [-p1.conj() * ep, p1 * ep, g, z, p2.conj() * ep, -p2 * ep],
            [p1.conj() * em, -p1 * em, z, g, -p2.conj() * em, p2 * em],
            [-jt.conj(), z, -p2 * em, -p2 * ep, k2, z],
            [z, -jt, -p2.conj() * em, -p2.conj() * ep, z, k2],
        ];
        CMatrix6::from_fn(|i, j| rows[i][j])
    }

    #[test]
    fn drift_matches_reference_matrix() {
        let s = sys(detuned_pair());
        for t in [0.0, 0.013, 0.4, 3.3, 19.7] {
            let m = drift_matrix(&s, t);
            let q = reference_matrix(&s, t);
            assert!(max_abs(&(m - q)) <= 1e-12 * max_abs(&q).max(1.0), "t={t}");
        }
    }

    #[test]
    fn drive_vector_special_cases() {
        let s = sys(detuned_pair());
        assert_eq!(drive_vector(&s, 0.0), CVector6::zeros());

        let p = SystemParams { e2: 4.5e6, delta2: 45.0, ..detuned_pair() };
        let s = sys(p);
        for t in [0.1, 1.7, 9.3] {
            assert!(drive_vector(&s, t)[Mode::B.index()].norm() < 1e-6);
        }
    }

    #[test]
    fn drive_vector_term_by_term() {
        let s = sys(detuned_pair());
        let t = 0.77;
        let e1 = (I * 4.5e6 / 45.0) * (Complex64::new(1.0, 0.0) - cis(45.0 * t));
        let e2 = (I * 5.5e6 / 55.0) * (Complex64::new(1.0, 0.0) - cis(55.0 * t));
        let l1 = -I * cis(-10.0 * t) * e2 - e1;
        let l2 = I * 1e-5 * cis(50.0 * t) * (e1.norm_sqr() - e2.norm_sqr());
        let l3 = -I * cis(10.0 * t) * e1 - 5.0 * e2;
        let v = drive_vector(&s, t);
        for (got, want) in [(v[0], l1), (v[1], l1.conj()), (v[2], l2), (v[3], l2.conj()), (v[4], l3), (v[5], l3.conj())] {
            assert!((got - want).norm() <= 1e-9 * want.norm().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn propagator_identity_and_decay() {
        let tol = Tolerance::default();
        let s = sys(detuned_pair());
        let phi = integrate_propagator(&s, 0.7, 0.7, &tol).unwrap();
        assert_eq!(phi.matrix, CMatrix6::identity());

        let s = sys(SystemParams { e1: 0.0, e2: 0.0, j: 0.0, ..detuned_pair() });
        let phi = integrate_propagator(&s, 0.5, 2.5, &tol).unwrap();
        let rates = [1.0, 1.0, 1e-3, 1e-3, 5.0, 5.0];
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { (-rates[i] * 2.0f64).exp() } else { 0.0 };
                assert!((phi.matrix[(i, j)] - want).norm() < 1e-9, "({i},{j})");
            }
        }
    }

    #[test]
    fn propagator_cocycle() {
        let tol = Tolerance::new(1e-9);
        let s = sys(detuned_pair());
        let full = integrate_propagator(&s, 0.0, 2.0, &tol).unwrap();
        let a = integrate_propagator(&s, 0.0, 1.0, &tol).unwrap();
        let b = integrate_propagator(&s, 1.0, 2.0, &tol).unwrap();
        let diff = full.matrix - b.matrix * a.matrix;
        let scale = max_abs(&full.matrix).max(1.0);
        assert!(max_abs(&diff) <= 10.0 * tol.rtol * scale, "{}", max_abs(&diff));
    }

    #[test]
    fn backward_family_matches_forward() {
        let tol = Tolerance::new(1e-10);
        let s = sys(detuned_pair());
        let fam = propagator_family(&s, 1.5, &[1.5, 1.0, 0.4, 0.0], &tol).unwrap();
        assert_eq!(fam.len(), 4);
        assert_eq!(fam[0].matrix, CMatrix6::identity());
        for p in &fam[1..] {
            let fwd = integrate_propagator(&s, p.tau, 1.5, &tol).unwrap();
            let scale = max_abs(&fwd.matrix).max(1.0);
            assert!(max_abs(&(fwd.matrix - p.matrix)) <= 1e-8 * scale, "tau={}", p.tau);
        }
    }

    #[test]
    fn mechanics_untouched_without_coupling() {
        let p = SystemParams { gm: 0.0, ..detuned_pair() };
        let s = sys(p);
        let phi = integrate_propagator(&s, 0.0, 3.0, &Tolerance::default()).unwrap();
        let decay = (-1e-3f64 * 3.0).exp();
        assert_eq!(phi.d(Mode::B, Mode::B), phi.d(Mode::BDag, Mode::BDag));
        assert!((phi.d(Mode::B, Mode::B) - decay).norm() < 1e-12);
        for m in Mode::ALL {
            if m != Mode::B {
                assert_eq!(phi.d(Mode::B, m).norm(), 0.0);
            }
        }
    }

    #[test]
    fn undriven_means_stay_zero() {
        let s = sys(SystemParams { e1: 0.0, e2: 0.0, ..detuned_pair() });
        let m = integrate_means(&s, 2.0, 0.5, &Tolerance::default()).unwrap();
        assert_eq!(m.len(), 5);
        assert!(m.iter().all(|x| x.mu == CVector6::zeros()));
    }

    #[test]
    fn means_are_conjugate_paired() {
        let tol = Tolerance::default();
        let s = sys(detuned_pair());
        let m = integrate_means(&s, 3.0, 0.25, &tol).unwrap();
        for st in &m {
            for k in [0, 2, 4] {
                let a = st.mu[k];
                let b = st.mu[k + 1];
                assert!((a - b.conj()).norm() <= 10.0 * tol.rtol * a.norm().max(1.0));
            }
        }
        let q = quadratures(&s, &m);
        assert_eq!((q[0].x_c1, q[0].x_c2, q[0].x_m), (0.0, 0.0, 0.0));
    }

    #[test]
    fn undriven_second_cavity_has_zero_quadrature() {
        let s = sys(SystemParams { e2: 0.0, j: 0.0, ..detuned_pair() });
        let m = integrate_means(&s, 2.0, 0.1, &Tolerance::default()).unwrap();
        assert!(quadratures(&s, &m).iter().all(|q| q.x_c2 == 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn drift_rows_are_adjoint_paired(t in 0.0f64..50.0, j in 0.0f64..3.0, k2 in 0.5f64..10.0) {
            let s = sys(SystemParams { j, kappa2: k2, ..detuned_pair() });
            let m = drift_matrix(&s, t);
            for r in 0..6 {
                for c in 0..6 {
                    let a = m[(r, c)];
                    let b = m[(Mode::adjoint_index(r), Mode::adjoint_index(c))].conj();
                    prop_assert!((a - b).norm() == 0.0);
                }
            }
            let diag = [-1.0, -1.0, -1e-3, -1e-3, -k2, -k2];
            for i in 0..6 {
                prop_assert_eq!(m[(i, i)], Complex64::from(diag[i]));
            }
        }

        #[test]
        fn envelope_bounded(t in 0.0f64..1e3) {
            let s = sys(detuned_pair());
            let v = drive_envelope(&s, Cavity::Two, t);
            prop_assert!(v.norm() <= 2.0 * 5.5e6 / 55.0 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn envelope_period_average() {
        let s = sys(detuned_pair());
        let period = 2.0 * PI / 45.0;
        let n = 4096;
        let h = period / n as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..n {
            acc += drive_envelope(&s, Cavity::One, (k as f64 + 0.5) * h);
        }
        let avg = acc / n as f64;
        let want = I * 4.5e6 / 45.0;
        assert!((avg - want).norm() < 1e-9 * want.norm());
    }
}
