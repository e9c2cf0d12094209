//! Second moments of the fluctuations and the thermal phonon number.
//!
//! The main path integrates `dΣ/dt = M Σ + Σ Mᵀ + D` once, with cost linear
//! in the horizon. [`phonon_oracle`] recomputes `n_m(t)` independently from
//! the fundamental matrix: the initial-state part `Φ(t,0) Σ(0) Φ(t,0)ᵀ` and
//! the noise integral `∫ Φ(t,τ) D Φ(t,τ)ᵀ dτ`, written out term by term.
//!
//! `D` is constant: the noise operators carry phases `e^{iωt}` but only
//! same-time products of a noise and its adjoint enter, so the phases cancel.
//! Cavity baths are at zero temperature.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{Mode, System};
use crate::ode;
use crate::propagator::{drift_matrix, propagator_family, Propagator};
use crate::{output_grid, CMatrix6, Tolerance};

/// Same-time noise correlators `⟨n_i n_j⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionMatrix(pub CMatrix6);

impl DiffusionMatrix {
    pub fn new(sys: &System) -> Self {
        let p = sys.params();
        let mut d = CMatrix6::zeros();
        d[(Mode::A1.index(), Mode::A1Dag.index())] = (2.0 * p.kappa1).into();
        d[(Mode::B.index(), Mode::BDag.index())] = (2.0 * p.gamma_m * (p.n_th + 1.0)).into();
        d[(Mode::BDag.index(), Mode::B.index())] = (2.0 * p.gamma_m * p.n_th).into();
        d[(Mode::A2.index(), Mode::A2Dag.index())] = (2.0 * p.kappa2).into();
        DiffusionMatrix(d)
    }

    #[inline]
    pub fn get(&self, i: Mode, j: Mode) -> f64 {
        self.0[(i.index(), j.index())].re
    }
}

/// `Σ_ij = ⟨c_i c_j⟩` over the zero-mean fluctuation state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondMoments(pub CMatrix6);

impl SecondMoments {
    #[inline]
    pub fn get(&self, i: Mode, j: Mode) -> Complex64 {
        self.0[(i.index(), j.index())]
    }

    /// `|Σ[x, x†] - Σ[x†, x] - 1|` for the three modes.
    pub fn commutator_defects(&self) -> [f64; 3] {
        [(Mode::A1, Mode::A1Dag), (Mode::B, Mode::BDag), (Mode::A2, Mode::A2Dag)]
            .map(|(a, ad)| (self.get(a, ad) - self.get(ad, a) - 1.0).norm())
    }

    pub fn max_commutator_defect(&self) -> f64 {
        self.commutator_defects().into_iter().fold(0.0, f64::max)
    }
}

/// Vacuum cavities and a thermal mechanical state.
pub fn initial_moments(sys: &System) -> SecondMoments {
    let n = sys.params().n_th;
    let mut s = CMatrix6::zeros();
    s[(Mode::A1.index(), Mode::A1Dag.index())] = 1.0.into();
    s[(Mode::B.index(), Mode::BDag.index())] = (n + 1.0).into();
    s[(Mode::BDag.index(), Mode::B.index())] = n.into();
    s[(Mode::A2.index(), Mode::A2Dag.index())] = 1.0.into();
    SecondMoments(s)
}

/// `Re Σ[b†, b]`, rejecting values that are complex or negative beyond `tol`.
pub fn thermal_phonon_number(sigma: &SecondMoments, tol: f64) -> Result<f64> {
    let z = sigma.get(Mode::BDag, Mode::B);
    if z.im.abs() > tol {
        return Err(Error::ComplexPhonon { imag: z.im });
    }
    if z.re < -tol {
        return Err(Error::NegativePhonon { value: z.re });
    }
    Ok(z.re)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSample {
    pub t: f64,
    pub sigma: SecondMoments,
}

/// Absolute tolerance used for commutator and phonon-number checks.
pub fn invariant_tolerance(sys: &System, tol: &Tolerance) -> f64 {
    1e3 * tol.rtol * (sys.params().n_th + 1.0)
}

/// Integrate the second moments from [`initial_moments`], sampled every
/// `dt_out`. Fails with `CommutatorDrift` if any sample breaks the canonical
/// commutators by more than [`invariant_tolerance`].
pub fn integrate_covariance(sys: &System, t_max: f64, dt_out: f64, tol: &Tolerance) -> Result<Vec<MomentSample>> {
    let grid = output_grid(t_max, dt_out)?;
    let d = DiffusionMatrix::new(sys).0;
    let limit = invariant_tolerance(sys, tol);
    let mut out = Vec::with_capacity(grid.len());
    ode::integrate(
        |s, sigma: &CMatrix6| {
            let m = drift_matrix(sys, s);
            m * sigma + sigma * m.transpose() + d
        },
        0.0,
        initial_moments(sys).0,
        t_max,
        &grid,
        &tol.control(sys),
        |t, sigma| {
            let sm = SecondMoments(*sigma);
            let defect = sm.max_commutator_defect();
            if defect > limit {
                return Err(Error::CommutatorDrift { t, defect });
            }
            out.push(MomentSample { t, sigma: sm });
            Ok(())
        },
    )?;
    Ok(out)
}

/// `⟨b†b⟩` from the initial state, term by term from `d_ij(t, 0)`.
fn initial_part(phi: &Propagator, n_th: f64) -> Complex64 {
    use Mode::*;
    let d = |i, j| phi.d(i, j);
    d(B, A1Dag) * d(BDag, A1)
        + d(B, B) * d(BDag, BDag) * n_th
        + d(B, BDag) * d(BDag, B) * (n_th + 1.0)
        + d(B, A2Dag) * d(BDag, A2)
}

/// Noise integrand at one `τ`, term by term from `d_ij(t, τ)`.
fn noise_integrand(phi: &Propagator, sys: &System) -> Complex64 {
    use Mode::*;
    let p = sys.params();
    let d = |i, j| phi.d(i, j);
    d(B, A1Dag) * d(BDag, A1) * (2.0 * p.kappa1)
        + d(B, B) * d(BDag, BDag) * (2.0 * p.gamma_m * p.n_th)
        + d(B, BDag) * d(BDag, B) * (2.0 * p.gamma_m * (p.n_th + 1.0))
        + d(B, A2Dag) * d(BDag, A2) * (2.0 * p.kappa2)
}

const ORACLE_MAX_DOUBLINGS: usize = 8;

/// Thermal phonon number at `t` from the fundamental matrix and an explicit
/// quadrature of the noise contribution over `τ ∈ [0, t]`.
///
/// Composite Simpson on a uniform grid, starting at half the integrator step
/// cap and doubling until two successive estimates agree to `tol` relative to
/// the result.
pub fn phonon_oracle(sys: &System, t: f64, tol: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("oracle time must be >= 0 (got {t})")));
    }
    let n_th = sys.params().n_th;
    if t == 0.0 {
        return Ok(n_th);
    }
    let ode_tol = Tolerance::new(1e-11);
    let mut intervals = ((t / (0.5 * sys.max_step())).ceil() as usize).max(64);
    intervals += intervals % 2;

    let mut previous: Option<f64> = None;
    let mut change = f64::INFINITY;
    for _ in 0..=ORACLE_MAX_DOUBLINGS {
        let h = t / intervals as f64;
        let taus: Vec<f64> = (0..=intervals).rev().map(|k| k as f64 * h).collect();
        let family = propagator_family(sys, t, &taus, &ode_tol)?;
        debug_assert_eq!(family.len(), taus.len());

        // family[k] holds τ = (intervals - k) h; Simpson weights are symmetric.
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, phi) in family.iter().enumerate() {
            let w = if k == 0 || k == intervals {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += noise_integrand(phi, sys) * w;
        }
        let noise = acc * (h / 3.0);
        let start = initial_part(family.last().expect("grid includes τ = 0"), n_th);
        let total = (start + noise).re;

        if let Some(prev) = previous {
            change = (total - prev).abs();
            if change <= tol * total.abs().max(1e-12) {
                return Ok(total);
            }
        }
        previous = Some(total);
        intervals *= 2;
    }
    Err(Error::QuadratureNotConverged { t, change })
}

/// Stable phonon number extracted from the tail of a series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalEstimate {
    pub value: f64,
    pub converged: bool,
    /// Relative change between the last two window means.
    pub rel_drift: f64,
    /// Smallest and largest sample in the last window.
    pub spread: (f64, f64),
}

pub const DEFAULT_WINDOW_FRAC: f64 = 0.1;
pub const DEFAULT_REL_TOL: f64 = 1e-3;

fn interpolate(times: &[f64], values: &[f64], x: f64) -> f64 {
    let k = times.partition_point(|&t| t < x);
    if k == 0 {
        return values[0];
    }
    if k >= times.len() {
        return values[times.len() - 1];
    }
    let (t0, t1) = (times[k - 1], times[k]);
    let w = (x - t0) / (t1 - t0);
    values[k - 1] * (1.0 - w) + values[k] * w
}

/// Trapezoidal time average of a sampled series over `[a, b]`.
fn window_mean(times: &[f64], values: &[f64], a: f64, b: f64) -> f64 {
    let mut pts: Vec<(f64, f64)> = vec![(a, interpolate(times, values, a))];
    pts.extend(
        times
            .iter()
            .zip(values)
            .filter(|(t, _)| **t > a && **t < b)
            .map(|(t, v)| (*t, *v)),
    );
    pts.push((b, interpolate(times, values, b)));
    let area: f64 = pts.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
    area / (b - a)
}

/// Average the trailing `window_frac` of the series over a whole number of
/// mechanical periods (at least one), and flag convergence when that mean
/// differs from the preceding window's by less than `rel_tol`.
pub fn extract_final(times: &[f64], values: &[f64], mech_period: f64, window_frac: f64, rel_tol: f64) -> FinalEstimate {
    assert_eq!(times.len(), values.len());
    assert!(!times.is_empty(), "empty series");
    let last = *values.last().expect("non-empty");
    let t0 = times[0];
    let t1 = *times.last().expect("non-empty");
    let span = t1 - t0;
    let periods = (window_frac * span / mech_period).floor().max(1.0);
    let w = periods * mech_period;
    if span <= 0.0 || !(w < span) {
        return FinalEstimate {
            value: last,
            converged: false,
            rel_drift: f64::INFINITY,
            spread: (last, last),
        };
    }
    let value = window_mean(times, values, t1 - w, t1);
    let (lo, hi) = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t1 - w)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, v)| (lo.min(*v), hi.max(*v)));
    let (rel_drift, converged) = if 2.0 * w <= span {
        let prev = window_mean(times, values, t1 - 2.0 * w, t1 - w);
        let scale = value.abs().max(f64::MIN_POSITIVE);
        let d = (value - prev).abs() / scale;
        (d, d < rel_tol)
    } else {
        (f64::INFINITY, false)
    };
    FinalEstimate {
        value,
        converged,
        rel_drift,
        spread: (lo, hi),
    }
}

/// Time series of the thermal phonon number and its long-time value.
#[derive(Debug, Clone, PartialEq)]
pub struct CoolingResult {
    pub times: Vec<f64>,
    pub n_m: Vec<f64>,
    pub final_estimate: FinalEstimate,
    /// `n_m_final / (Γ_m n_th)`; NaN when `n_th = 0`.
    pub cooling_ratio: f64,
    pub max_commutator_defect: f64,
}

impl CoolingResult {
    pub fn n_m_final(&self) -> f64 {
        self.final_estimate.value
    }

    pub fn converged(&self) -> bool {
        self.final_estimate.converged
    }
}

/// Full dynamical run: propagate the second moments and extract `n_m(t)`.
pub fn simulate_cooling(sys: &System, t_max: f64, dt_out: f64, tol: &Tolerance) -> Result<CoolingResult> {
    let samples = integrate_covariance(sys, t_max, dt_out, tol)?;
    let check = invariant_tolerance(sys, tol);
    let mut times = Vec::with_capacity(samples.len());
    let mut n_m = Vec::with_capacity(samples.len());
    let mut defect: f64 = 0.0;
    for s in &samples {
        times.push(s.t);
        n_m.push(thermal_phonon_number(&s.sigma, check)?);
        defect = defect.max(s.sigma.max_commutator_defect());
    }
    let final_estimate = extract_final(&times, &n_m, sys.mechanical_period(), DEFAULT_WINDOW_FRAC, DEFAULT_REL_TOL);
    let denom = sys.derived().gamma_ratio * sys.params().n_th;
    let cooling_ratio = if denom > 0.0 {
        final_estimate.value.max(0.0) / denom
    } else {
        f64::NAN
    };
    Ok(CoolingResult {
        times,
        n_m,
        final_estimate,
        cooling_ratio,
        max_commutator_defect: defect,
    })
}
