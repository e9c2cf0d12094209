//! Run orchestration and CSV output for the command-line tool.
//!
//! Every CSV starts with `#` comment lines echoing the run manifest. Floats
//! are written with 17 significant digits in scientific notation and no
//! timestamps are emitted, so identical invocations give identical bytes.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::adiabatic::{self, CoolingLimitReport, LimitCase};
use crate::covariance::{simulate_cooling, CoolingResult};
use crate::error::{Error, Result};
use crate::meanfield::{integrate_meanfield, meanfield_quadratures};
use crate::model::{System, SystemParams};
use crate::propagator::{integrate_means, quadratures};
use crate::Tolerance;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fixed float format used in every CSV.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Settle-time horizon used when none is given:
/// `20 / max(Γ_eff, γ_m)` with `Γ_eff = 4 J_E² κ1 / (1 + κ2/κ1)` and `J_E` the
/// larger of the two effective drive intensities.
pub fn default_t_max(sys: &System) -> f64 {
    let p = sys.params();
    let d = sys.derived();
    let je = d.je1.max(d.je2);
    let gamma_eff = 4.0 * je * je * p.kappa1 / (1.0 + p.kappa2 / p.kappa1);
    20.0 / gamma_eff.max(p.gamma_m)
}

/// Default output spacing: sixteen samples per mechanical period.
pub fn default_dt_out(sys: &System) -> f64 {
    sys.mechanical_period() / 16.0
}

/// Everything that determines a run's output bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub params: SystemParams,
    pub tolerance: Tolerance,
    /// Extra `key = value` settings in emission order.
    pub settings: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str, params: SystemParams, tolerance: Tolerance) -> Self {
        RunManifest {
            command: command.to_string(),
            params,
            tolerance,
            settings: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.settings.push((key.to_string(), value.to_string()));
        self
    }

    pub fn write_header<W: Write + ?Sized>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# mimcool {VERSION}")?;
        writeln!(w, "# command = {}", self.command)?;
        writeln!(w, "# integrator = dopri5")?;
        writeln!(w, "# rtol = {}", fmt_f64(self.tolerance.rtol))?;
        writeln!(w, "# atol = {}", fmt_f64(self.tolerance.atol))?;
        for (k, v) in &self.settings {
            writeln!(w, "# {k} = {v}")?;
        }
        for (k, v) in self.params.named_values() {
            writeln!(w, "# param {k} = {}", fmt_f64(v))?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- simulate

/// Summary of a single dynamical run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub result: CoolingResult,
    /// Final phonon number clamped at zero.
    pub n_m_final: f64,
    pub cooling_ratio: f64,
    pub converged: bool,
}

impl std::fmt::Display for SimulateSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "n_m_final = {} cooling_ratio = {} converged = {}",
            fmt_f64(self.n_m_final),
            fmt_f64(self.cooling_ratio),
            self.converged
        )
    }
}

/// Full dynamical run, written as `t, n_m, converged_hint`.
///
/// `converged_hint` is 1 for samples that already sit inside the band of the
/// final averaging window of a converged run.
pub fn run_simulate<W: Write + ?Sized>(
    sys: &System,
    t_max: f64,
    dt_out: f64,
    tol: &Tolerance,
    out: &mut W,
) -> Result<SimulateSummary> {
    let result = simulate_cooling(sys, t_max, dt_out, tol)?;
    let est = result.final_estimate;
    RunManifest::new("simulate", *sys.params(), *tol)
        .with("t_max", fmt_f64(t_max))
        .with("dt_out", fmt_f64(dt_out))
        .write_header(out)?;
    writeln!(out, "t,n_m,converged_hint")?;
    for (t, n) in result.times.iter().zip(&result.n_m) {
        let hint = est.converged && *n >= est.spread.0 && *n <= est.spread.1;
        writeln!(out, "{},{},{}", fmt_f64(*t), fmt_f64(*n), u8::from(hint))?;
    }
    Ok(SimulateSummary {
        n_m_final: result.n_m_final().max(0.0),
        cooling_ratio: result.cooling_ratio,
        converged: result.converged(),
        result,
    })
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Kappa2,
    J,
    /// Both drives set to the same value.
    E,
    E1,
    E2,
    OmegaM,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Kappa2 => "kappa2",
            SweepParam::J => "J",
            SweepParam::E => "E",
            SweepParam::E1 => "E1",
            SweepParam::E2 => "E2",
            SweepParam::OmegaM => "omega_m",
        }
    }

    /// Write `value` into `p`. Sweeping `omega_m` drags along any detuning
    /// that sat on resonance in the base configuration.
    pub fn apply(self, base: &SystemParams, p: &mut SystemParams, value: f64) {
        match self {
            SweepParam::Kappa2 => p.kappa2 = value,
            SweepParam::J => p.j = value,
            SweepParam::E => {
                p.e1 = value;
                p.e2 = value;
            }
            SweepParam::E1 => p.e1 = value,
            SweepParam::E2 => p.e2 = value,
            SweepParam::OmegaM => {
                p.omega_m = value;
                if base.delta1 == base.omega_m {
                    p.delta1 = value;
                }
                if base.delta2 == base.omega_m {
                    p.delta2 = value;
                }
            }
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "kappa2" => SweepParam::Kappa2,
            "J" => SweepParam::J,
            "E" => SweepParam::E,
            "E1" => SweepParam::E1,
            "E2" => SweepParam::E2,
            "omega_m" => SweepParam::OmegaM,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "cannot sweep `{s}` (expected kappa2, J, E, E1, E2 or omega_m)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Lin,
    Log,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lin" => Ok(Scale::Lin),
            "log" => Ok(Scale::Log),
            _ => Err(Error::InvalidArgument(format!("unknown scale `{s}` (expected lin or log)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Dynamic,
    Adiabatic,
}

impl FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dynamic" => Ok(SweepMode::Dynamic),
            "adiabatic" => Ok(SweepMode::Adiabatic),
            _ => Err(Error::InvalidArgument(format!("unknown mode `{s}` (expected dynamic or adiabatic)"))),
        }
    }
}

/// One swept axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    pub scale: Scale,
}

impl SweepAxis {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !self.from.is_finite() || !self.to.is_finite() {
            return bad(format!("{}: range must be finite", self.param.name()));
        }
        if self.points == 0 {
            return bad(format!("{}: need at least one point", self.param.name()));
        }
        if self.points > 1 && self.from == self.to {
            return bad(format!("{}: degenerate range", self.param.name()));
        }
        if self.scale == Scale::Log && !(self.from > 0.0 && self.to > 0.0) {
            return bad(format!("{}: log scale needs positive bounds", self.param.name()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        if n == 1 {
            return vec![self.from];
        }
        (0..n)
            .map(|k| {
                let s = k as f64 / (n - 1) as f64;
                if k == n - 1 {
                    return self.to;
                }
                match self.scale {
                    Scale::Lin => self.from + s * (self.to - self.from),
                    Scale::Log => (self.from.ln() + s * (self.to.ln() - self.from.ln())).exp(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// One or two axes; the first varies slowest.
    pub axes: Vec<SweepAxis>,
    pub base: SystemParams,
    pub mode: SweepMode,
    /// Horizon for dynamic runs; `None` uses [`default_t_max`] per point.
    pub t_max: Option<f64>,
    /// Output spacing for dynamic runs; `None` uses [`default_dt_out`].
    pub dt_out: Option<f64>,
    pub tol: Tolerance,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::InvalidArgument(format!(
                "a sweep takes one or two parameters (got {})",
                self.axes.len()
            )));
        }
        if self.axes.len() == 2 && self.axes[0].param == self.axes[1].param {
            return Err(Error::InvalidArgument("the two swept parameters must differ".into()));
        }
        self.axes.iter().try_for_each(SweepAxis::validate)
    }

    /// Swept values of every point in emission order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut pts: Vec<Vec<f64>> = vec![Vec::new()];
        for axis in &self.axes {
            let vals = axis.values();
            pts = pts
                .into_iter()
                .flat_map(|p| {
                    vals.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push(*v);
                        q
                    })
                })
                .collect();
        }
        pts
    }

    pub fn params_at(&self, values: &[f64]) -> SystemParams {
        let mut p = self.base;
        for (axis, v) in self.axes.iter().zip(values) {
            axis.param.apply(&self.base, &mut p, *v);
        }
        p
    }

    pub fn manifest(&self) -> RunManifest {
        let mode = match self.mode {
            SweepMode::Dynamic => "dynamic",
            SweepMode::Adiabatic => "adiabatic",
        };
        let mut m = RunManifest::new("sweep", self.base, self.tol).with("mode", mode);
        for a in &self.axes {
            let scale = if a.scale == Scale::Lin { "lin" } else { "log" };
            m = m.with(
                &format!("sweep {}", a.param.name()),
                format!("{} .. {} points {} {scale}", fmt_f64(a.from), fmt_f64(a.to), a.points),
            );
        }
        if let Some(t) = self.t_max {
            m = m.with("t_max", fmt_f64(t));
        }
        if let Some(dt) = self.dt_out {
            m = m.with("dt_out", fmt_f64(dt));
        }
        m
    }
}

/// Outcome of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub values: Vec<f64>,
    pub cooling_ratio: f64,
    pub n_m_final: f64,
    pub converged: bool,
    /// Horizon actually used (NaN in adiabatic mode).
    pub t_max: f64,
    pub error: Option<Error>,
}

fn evaluate_point(spec: &SweepSpec, values: &[f64]) -> SweepRow {
    let mut row = SweepRow {
        values: values.to_vec(),
        cooling_ratio: f64::NAN,
        n_m_final: f64::NAN,
        converged: false,
        t_max: f64::NAN,
        error: None,
    };
    let outcome = spec.params_at(values).validate().and_then(|sys| match spec.mode {
        SweepMode::Adiabatic => {
            let ratio = adiabatic::lyapunov_ratio(&sys)?;
            row.cooling_ratio = ratio;
            row.n_m_final = ratio * sys.derived().gamma_ratio * sys.params().n_th;
            row.converged = true;
            Ok(())
        }
        SweepMode::Dynamic => {
            let t_max = spec.t_max.unwrap_or_else(|| default_t_max(&sys));
            let dt_out = spec.dt_out.unwrap_or_else(|| default_dt_out(&sys));
            row.t_max = t_max;
            let r = simulate_cooling(&sys, t_max, dt_out, &spec.tol)?;
            row.cooling_ratio = r.cooling_ratio;
            row.n_m_final = r.n_m_final().max(0.0);
            row.converged = r.converged();
            Ok(())
        }
    });
    if let Err(e) = outcome {
        row.cooling_ratio = f64::NAN;
        row.n_m_final = f64::NAN;
        row.converged = false;
        row.error = Some(e);
    }
    row
}

/// Evaluate all sweep points on a pool of `threads` workers (0 lets rayon
/// decide). Rows come back in sweep order.
pub fn sweep_rows(spec: &SweepSpec, threads: usize) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let points = spec.points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(|| points.par_iter().map(|v| evaluate_point(spec, v)).collect()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub failed: usize,
}

/// Run a sweep and write `<params>, cooling_ratio, n_m_final, converged,
/// t_max, error`.
pub fn run_sweep<W: Write + ?Sized>(spec: &SweepSpec, threads: usize, out: &mut W) -> Result<SweepSummary> {
    let rows = sweep_rows(spec, threads)?;
    spec.manifest().write_header(out)?;
    let names: Vec<&str> = spec.axes.iter().map(|a| a.param.name()).collect();
    writeln!(out, "{},cooling_ratio,n_m_final,converged,t_max,error", names.join(","))?;
    for r in &rows {
        for v in &r.values {
            write!(out, "{},", fmt_f64(*v))?;
        }
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(r.cooling_ratio),
            fmt_f64(r.n_m_final),
            u8::from(r.converged),
            fmt_f64(r.t_max),
            csv_text(r.error.as_ref())
        )?;
    }
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    Ok(SweepSummary { rows, failed })
}

fn csv_text(e: Option<&Error>) -> String {
    match e {
        None => String::new(),
        Some(e) => format!("\"{}\"", e.to_string().replace('"', "'")),
    }
}

// ---------------------------------------------------------------- compare

/// Relative RMS discrepancy `rms(lin - nl) / rms(nl)` per trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareSummary {
    pub x_c1: f64,
    pub x_c2: f64,
    pub x_m: f64,
}

impl CompareSummary {
    pub fn max(&self) -> f64 {
        self.x_c1.max(self.x_c2).max(self.x_m)
    }
}

impl std::fmt::Display for CompareSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "rms_rel X_c1 = {} X_c2 = {} X_m = {}",
            fmt_f64(self.x_c1),
            fmt_f64(self.x_c2),
            fmt_f64(self.x_m)
        )
    }
}

/// Relative RMS of `a - b` against `b`; zero when both vanish.
pub fn rms_relative(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let norm: f64 = b.iter().map(|y| y * y).sum();
    if diff == 0.0 {
        0.0
    } else {
        (diff / norm).sqrt()
    }
}

/// Linear and nonlinear quadrature traces on one grid.
pub fn compare_traces(sys: &System, t_max: f64, dt_out: f64, tol: &Tolerance) -> Result<(Vec<crate::propagator::Quadratures>, Vec<crate::propagator::Quadratures>)> {
    let lin = quadratures(sys, &integrate_means(sys, t_max, dt_out, tol)?);
    let nl = meanfield_quadratures(&integrate_meanfield(sys, t_max, dt_out, tol)?);
    Ok((lin, nl))
}

pub fn run_compare<W: Write + ?Sized>(
    sys: &System,
    t_max: f64,
    dt_out: f64,
    tol: &Tolerance,
    out: &mut W,
) -> Result<CompareSummary> {
    let (lin, nl) = compare_traces(sys, t_max, dt_out, tol)?;
    RunManifest::new("compare", *sys.params(), *tol)
        .with("t_max", fmt_f64(t_max))
        .with("dt_out", fmt_f64(dt_out))
        .write_header(out)?;
    writeln!(out, "t,X_c1_lin,X_c1_nl,X_c2_lin,X_c2_nl,X_m_lin,X_m_nl")?;
    for (a, b) in lin.iter().zip(&nl) {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_f64(a.t),
            fmt_f64(a.x_c1),
            fmt_f64(b.x_c1),
            fmt_f64(a.x_c2),
            fmt_f64(b.x_c2),
            fmt_f64(a.x_m),
            fmt_f64(b.x_m)
        )?;
    }
    let col = |q: &[crate::propagator::Quadratures], f: fn(&crate::propagator::Quadratures) -> f64| -> Vec<f64> { q.iter().map(f).collect() };
    Ok(CompareSummary {
        x_c1: rms_relative(&col(&lin, |q| q.x_c1), &col(&nl, |q| q.x_c1)),
        x_c2: rms_relative(&col(&lin, |q| q.x_c2), &col(&nl, |q| q.x_c2)),
        x_m: rms_relative(&col(&lin, |q| q.x_m), &col(&nl, |q| q.x_m)),
    })
}

// ---------------------------------------------------------------- adiabatic

/// Inputs of an adiabatic-limit table.
///
/// Case A and C evaluate every `(je1, je2)` pair; case B uses `je1` only
/// (equal drives).
#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticArgs {
    pub case: LimitCase,
    pub gamma_ratio: f64,
    pub je1: Vec<f64>,
    pub je2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticSummary {
    pub reports: Vec<CoolingLimitReport>,
    pub failed: usize,
}

pub fn adiabatic_reports(args: &AdiabaticArgs, threads: usize) -> Result<Vec<CoolingLimitReport>> {
    if !(args.gamma_ratio > 0.0) || !args.gamma_ratio.is_finite() {
        return Err(Error::InvalidArgument(format!("gamma ratio must be positive (got {})", args.gamma_ratio)));
    }
    let pairs: Vec<(f64, f64)> = match args.case {
        LimitCase::B => args.je1.iter().map(|&j| (j, j)).collect(),
        _ => args.je1.iter().flat_map(|&a| args.je2.iter().map(move |&b| (a, b))).collect(),
    };
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no drive intensities given".into()));
    }
    if let Some(&(a, b)) = pairs.iter().find(|(a, b)| !(*a >= 0.0 && *b >= 0.0)) {
        return Err(Error::InvalidArgument(format!("drive intensities must be non-negative (got {a}, {b})")));
    }
    let g = args.gamma_ratio;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        pairs
            .par_iter()
            .map(|&(a, b)| match args.case {
                LimitCase::A => adiabatic::report_case_a(g, a, b),
                LimitCase::B => adiabatic::report_case_b(g, a),
                LimitCase::C => adiabatic::report_case_c(g, a, b),
            })
            .collect()
    }))
}

/// Closed form against Lyapunov, written as `J_E1, J_E2,
/// kappa2_over_kappa1, ratio_closed_form, ratio_lyapunov, rel_gap,
/// kappa2_argmin, ratio_argmin, error`.
pub fn run_adiabatic<W: Write + ?Sized>(args: &AdiabaticArgs, threads: usize, out: &mut W) -> Result<AdiabaticSummary> {
    let reports = adiabatic_reports(args, threads)?;
    writeln!(out, "# mimcool {VERSION}")?;
    writeln!(out, "# command = adiabatic")?;
    writeln!(out, "# case = {}", args.case)?;
    writeln!(out, "# gamma_m_over_kappa1 = {}", fmt_f64(args.gamma_ratio))?;
    writeln!(out, "J_E1,J_E2,kappa2_over_kappa1,ratio_closed_form,ratio_lyapunov,rel_gap,kappa2_argmin,ratio_argmin,error")?;
    for r in &reports {
        let (ka, ra) = r.optimum.map_or((f64::NAN, f64::NAN), |o| (o.kappa2_ratio, o.ratio));
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            fmt_f64(r.je1),
            fmt_f64(r.je2),
            fmt_f64(r.kappa2_ratio),
            fmt_f64(r.ratio_closed_form),
            fmt_f64(r.ratio_lyapunov),
            fmt_f64(r.rel_gap),
            fmt_f64(ka),
            fmt_f64(ra),
            csv_text(r.error.as_ref())
        )?;
    }
    let failed = reports.iter().filter(|r| r.error.is_some()).count();
    Ok(AdiabaticSummary { reports, failed })
}
