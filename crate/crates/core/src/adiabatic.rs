//! Sideband-resolved limit `omega_m / kappa1 → ∞`.
//!
//! The rotating couplings `i gm E_j(t) e^{-iωm t}` average to
//! `G_j = gm E_j / omega_m` and the counter-rotating ones vanish, so with
//! `J = 0` the drift is constant and the steady second moments solve the
//! Lyapunov equation `M Σ + Σ Mᵀ + D = 0`. This module provides that solver,
//! the closed-form cooling ratios for the three drive configurations, and a
//! derivative-free search for the best second-cavity damping rate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::covariance::{DiffusionMatrix, SecondMoments};
use crate::error::{Error, Result};
use crate::model::{Mode, System, SystemParams};
use crate::propagator::{assemble, Coefficients};
use crate::CMatrix6;

/// Constant drift of the adiabatic limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticMatrix(pub CMatrix6);

/// Build the adiabatic drift. Requires `J = 0`.
pub fn adiabatic_matrix(sys: &System) -> Result<AdiabaticMatrix> {
    let p = sys.params();
    if p.j != 0.0 {
        return Err(Error::TunnelingNotZero(p.j));
    }
    let zero = Complex64::new(0.0, 0.0);
    let c = Coefficients {
        rot1: (p.gm * p.e1 / p.omega_m).into(),
        ctr1: zero,
        rot2: (p.gm * p.e2 / p.omega_m).into(),
        ctr2: zero,
        tunnel: zero,
    };
    Ok(AdiabaticMatrix(assemble(sys, &c)))
}

impl AdiabaticMatrix {
    /// Largest real part among the eigenvalues.
    pub fn spectral_abscissa(&self) -> f64 {
        match self.0.schur().eigenvalues() {
            Some(ev) => ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max),
            None => f64::NAN,
        }
    }
}

/// Solve `M Σ + Σ Mᵀ + D = 0` through the 36-dimensional vectorized system.
pub fn solve_lyapunov(m: &CMatrix6, d: &CMatrix6) -> Result<CMatrix6> {
    const N: usize = 6;
    let mut a = DMatrix::<Complex64>::zeros(N * N, N * N);
    for i in 0..N {
        for j in 0..N {
            let row = N * i + j;
            for k in 0..N {
                a[(row, N * k + j)] += m[(i, k)];
                a[(row, N * i + k)] += m[(j, k)];
            }
        }
    }
    let rhs = DVector::<Complex64>::from_iterator(N * N, (0..N * N).map(|p| -d[(p / N, p % N)]));
    let x = a.lu().solve(&rhs).ok_or(Error::SingularLyapunov)?;
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SingularLyapunov);
    }
    Ok(CMatrix6::from_fn(|i, j| x[N * i + j]))
}

/// Steady state of the adiabatic dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub sigma: SecondMoments,
    pub phonon_number: f64,
    /// `‖M Σ + Σ Mᵀ + D‖ / ‖D‖`.
    pub relative_residual: f64,
}

pub fn steady_state(m: &AdiabaticMatrix, d: &DiffusionMatrix) -> Result<SteadyState> {
    let abscissa = m.spectral_abscissa();
    if !(abscissa < 0.0) {
        return Err(Error::SingularLyapunov);
    }
    let sigma = solve_lyapunov(&m.0, &d.0)?;
    let residual = m.0 * sigma + sigma * m.0.transpose() + d.0;
    let relative_residual = residual.norm() / d.0.norm().max(f64::MIN_POSITIVE);
    Ok(SteadyState {
        sigma: SecondMoments(sigma),
        phonon_number: sigma[(Mode::BDag.index(), Mode::B.index())].re,
        relative_residual,
    })
}

/// `Re Σ[b†, b]` at the adiabatic steady state.
pub fn steady_state_phonon(m: &AdiabaticMatrix, d: &DiffusionMatrix) -> Result<f64> {
    steady_state(m, d).map(|s| s.phonon_number)
}

/// One point of the adiabatic problem in `kappa1 = 1` units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticPoint {
    pub gamma_ratio: f64,
    pub je1: f64,
    pub je2: f64,
    pub kappa2_ratio: f64,
    pub n_th: f64,
}

impl AdiabaticPoint {
    pub fn new(gamma_ratio: f64, je1: f64, je2: f64, kappa2_ratio: f64) -> Self {
        AdiabaticPoint {
            gamma_ratio,
            je1,
            je2,
            kappa2_ratio,
            n_th: 100.0,
        }
    }

    pub fn system(&self) -> Result<System> {
        // omega_m only sets the scale of E; the adiabatic drift never sees it.
        let omega_m = 1e3;
        let gm = 1e-5;
        SystemParams {
            kappa1: 1.0,
            kappa2: self.kappa2_ratio,
            gm,
            omega_m,
            gamma_m: self.gamma_ratio,
            delta1: omega_m,
            delta2: omega_m,
            e1: self.je1 * omega_m / gm,
            e2: self.je2 * omega_m / gm,
            j: 0.0,
            n_th: self.n_th,
        }
        .validate()
    }

    /// Steady-state cooling ratio `n_mf / (Γ_m n_th)` from the Lyapunov solve.
    pub fn lyapunov_ratio(&self) -> Result<f64> {
        lyapunov_ratio(&self.system()?)
    }
}

/// Cooling ratio of a validated system in the adiabatic limit.
pub fn lyapunov_ratio(sys: &System) -> Result<f64> {
    let m = adiabatic_matrix(sys)?;
    let n = steady_state_phonon(&m, &DiffusionMatrix::new(sys))?;
    Ok(n / (sys.derived().gamma_ratio * sys.params().n_th))
}

/// Equal damping rates: `(1+Γ+J1²+J2²) / ((1+Γ)(Γ+J1²+J2²))`.
pub fn cooling_ratio_case_a(gamma_ratio: f64, je1: f64, je2: f64) -> f64 {
    let s = je1 * je1 + je2 * je2;
    (1.0 + gamma_ratio + s) / ((1.0 + gamma_ratio) * (gamma_ratio + s))
}

fn kappa2_from_radicand(gamma_ratio: f64, radicand: f64) -> Result<f64> {
    if radicand < 0.0 {
        return Err(Error::DomainError { radicand });
    }
    Ok((1.0 + gamma_ratio + radicand.sqrt()) / 2.0)
}

/// Closed-form best `kappa2 / kappa1` for equal drives.
pub fn optimal_kappa2_case_b(gamma_ratio: f64, je: f64) -> Result<f64> {
    let g = gamma_ratio;
    kappa2_from_radicand(g, 24.0 * je * je - 3.0 + 2.0 * g - g * g)
}

/// Closed-form cooling limit for equal drives, `4√6 / (3 J_E)`.
pub fn limit_case_b(je: f64) -> f64 {
    4.0 * 6f64.sqrt() / (3.0 * je)
}

/// Closed-form best `kappa2 / kappa1` for unequal drives.
pub fn optimal_kappa2_case_c(gamma_ratio: f64, je1: f64, je2: f64) -> Result<f64> {
    let g = gamma_ratio;
    kappa2_from_radicand(g, 12.0 * je1 * je1 + 12.0 * je2 * je2 - 3.0 + 2.0 * g - g * g)
}

/// Closed-form cooling limit for unequal drives, `4√3 √(J1²+J2²) / (3 J2²)`.
pub fn limit_case_c(je1: f64, je2: f64) -> Result<f64> {
    if je2 == 0.0 {
        return Err(Error::DegenerateDrive);
    }
    Ok(4.0 * 3f64.sqrt() * (je1 * je1 + je2 * je2).sqrt() / (3.0 * je2 * je2))
}

/// Minimizer of a function of `kappa2 / kappa1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub kappa2_ratio: f64,
    pub ratio: f64,
}

pub const ARGMIN_GRID_POINTS: usize = 200;
pub const ARGMIN_REL_TOL: f64 = 1e-4;

/// Log-spaced scan of `[1, upper]` followed by golden-section refinement
/// around the best grid point.
pub fn argmin_kappa2<F>(f: F, upper: f64) -> Result<Optimum>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(upper > 1.0) {
        return Err(Error::InvalidArgument(format!("search bound must exceed 1 (got {upper})")));
    }
    let n = ARGMIN_GRID_POINTS;
    let grid: Vec<f64> = (0..n)
        .map(|k| (upper.ln() * k as f64 / (n - 1) as f64).exp())
        .collect();
    let mut best = (0, f64::INFINITY);
    for (k, &x) in grid.iter().enumerate() {
        let v = f(x)?;
        if v < best.1 {
            best = (k, v);
        }
    }
    let (mut a, mut b) = (grid[best.0.saturating_sub(1)], grid[(best.0 + 1).min(n - 1)]);

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a) > ARGMIN_REL_TOL * 0.5 * (a + b) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    let v = f(x)?;
    let (kappa2_ratio, ratio) = if v <= best.1 { (x, v) } else { (grid[best.0], best.1) };
    Ok(Optimum { kappa2_ratio, ratio })
}

/// Lyapunov-optimal second-cavity damping for given drive intensities.
pub fn optimal_kappa2_lyapunov(gamma_ratio: f64, je1: f64, je2: f64, upper: f64) -> Result<Optimum> {
    argmin_kappa2(|k| AdiabaticPoint::new(gamma_ratio, je1, je2, k).lyapunov_ratio(), upper)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitCase {
    /// `kappa2 = kappa1`.
    A,
    /// `kappa2 ≠ kappa1`, equal drives.
    B,
    /// `kappa2 ≠ kappa1`, unequal drives.
    C,
}

impl std::str::FromStr for LimitCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(LimitCase::A),
            "B" | "b" => Ok(LimitCase::B),
            "C" | "c" => Ok(LimitCase::C),
            _ => Err(Error::InvalidArgument(format!("unknown case `{s}` (expected A, B or C)"))),
        }
    }
}

impl std::fmt::Display for LimitCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            LimitCase::A => "A",
            LimitCase::B => "B",
            LimitCase::C => "C",
        };
        f.write_str(s)
    }
}

/// Closed-form versus Lyapunov comparison at one input point.
///
/// For cases B and C, `kappa2_ratio` is the closed-form optimum, `ratio_lyapunov`
/// is evaluated there, and `optimum` holds the brute-force minimum over
/// `kappa2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoolingLimitReport {
    pub case: LimitCase,
    pub gamma_ratio: f64,
    pub je1: f64,
    pub je2: f64,
    pub kappa2_ratio: f64,
    pub ratio_closed_form: f64,
    pub ratio_lyapunov: f64,
    pub rel_gap: f64,
    pub optimum: Option<Optimum>,
    pub error: Option<Error>,
}

impl CoolingLimitReport {
    fn failed(case: LimitCase, gamma_ratio: f64, je1: f64, je2: f64, e: Error) -> Self {
        CoolingLimitReport {
            case,
            gamma_ratio,
            je1,
            je2,
            kappa2_ratio: f64::NAN,
            ratio_closed_form: f64::NAN,
            ratio_lyapunov: f64::NAN,
            rel_gap: f64::NAN,
            optimum: None,
            error: Some(e),
        }
    }
}

fn rel_gap(closed: f64, numeric: f64) -> f64 {
    (closed - numeric).abs() / numeric.abs()
}

/// Search bound for the brute-force optimum: ten times the closed-form value,
/// and never below 10 so that a small closed-form value cannot hide the dip.
fn search_upper(formula: f64) -> f64 {
    (10.0 * formula).max(10.0)
}

pub fn report_case_a(gamma_ratio: f64, je1: f64, je2: f64) -> CoolingLimitReport {
    let closed = cooling_ratio_case_a(gamma_ratio, je1, je2);
    match AdiabaticPoint::new(gamma_ratio, je1, je2, 1.0).lyapunov_ratio() {
        Ok(num) => CoolingLimitReport {
            case: LimitCase::A,
            gamma_ratio,
            je1,
            je2,
            kappa2_ratio: 1.0,
            ratio_closed_form: closed,
            ratio_lyapunov: num,
            rel_gap: rel_gap(closed, num),
            optimum: None,
            error: None,
        },
        Err(e) => CoolingLimitReport::failed(LimitCase::A, gamma_ratio, je1, je2, e),
    }
}

pub fn report_case_b(gamma_ratio: f64, je: f64) -> CoolingLimitReport {
    let run = || -> Result<CoolingLimitReport> {
        let k2 = optimal_kappa2_case_b(gamma_ratio, je)?;
        let closed = limit_case_b(je);
        let num = AdiabaticPoint::new(gamma_ratio, je, je, k2).lyapunov_ratio()?;
        let opt = optimal_kappa2_lyapunov(gamma_ratio, je, je, search_upper(k2))?;
        Ok(CoolingLimitReport {
            case: LimitCase::B,
            gamma_ratio,
            je1: je,
            je2: je,
            kappa2_ratio: k2,
            ratio_closed_form: closed,
            ratio_lyapunov: num,
            rel_gap: rel_gap(closed, num),
            optimum: Some(opt),
            error: None,
        })
    };
    run().unwrap_or_else(|e| CoolingLimitReport::failed(LimitCase::B, gamma_ratio, je, je, e))
}

pub fn report_case_c(gamma_ratio: f64, je1: f64, je2: f64) -> CoolingLimitReport {
    let run = || -> Result<CoolingLimitReport> {
        let closed = limit_case_c(je1, je2)?;
        let k2 = optimal_kappa2_case_c(gamma_ratio, je1, je2)?;
        let num = AdiabaticPoint::new(gamma_ratio, je1, je2, k2).lyapunov_ratio()?;
        let opt = optimal_kappa2_lyapunov(gamma_ratio, je1, je2, search_upper(k2))?;
        Ok(CoolingLimitReport {
            case: LimitCase::C,
            gamma_ratio,
            je1,
            je2,
            kappa2_ratio: k2,
            ratio_closed_form: closed,
            ratio_lyapunov: num,
            rel_gap: rel_gap(closed, num),
            optimum: Some(opt),
            error: None,
        })
    };
    run().unwrap_or_else(|e| CoolingLimitReport::failed(LimitCase::C, gamma_ratio, je1, je2, e))
}
