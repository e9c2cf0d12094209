use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mimcool::adiabatic::LimitCase;
use mimcool::harness::{self, AdiabaticArgs, Scale, SweepAxis, SweepMode, SweepParam, SweepSpec};
use mimcool::{Error, Result, System, SystemParams, Tolerance};

#[derive(Parser)]
#[command(name = "mimcool", version, about = "Sideband cooling of a two-drive membrane-in-the-middle optomechanical system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the second moments and report the thermal phonon number.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Cooling ratio over a one- or two-parameter grid.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Parameter to sweep (kappa2, J, E, E1, E2, omega_m). Repeat for a 2-D grid.
        #[arg(long = "param", required = true)]
        params: Vec<String>,
        #[arg(long = "from", required = true, allow_hyphen_values = true)]
        from: Vec<f64>,
        #[arg(long = "to", required = true, allow_hyphen_values = true)]
        to: Vec<f64>,
        #[arg(long = "points", required = true)]
        points: Vec<usize>,
        /// lin or log, one per --param (defaults to lin).
        #[arg(long = "scale")]
        scale: Vec<String>,
        /// dynamic or adiabatic.
        #[arg(long, default_value = "dynamic")]
        mode: String,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Linearized against nonlinear mean quadratures.
    Compare {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Closed-form cooling limits against the Lyapunov steady state.
    Adiabatic {
        /// A (equal damping), B (equal drives) or C (unequal drives).
        #[arg(long)]
        case: String,
        /// gamma_m / kappa1.
        #[arg(long, default_value_t = 1e-3)]
        gamma_ratio: f64,
        /// Comma-separated first drive intensities (the common one for case B).
        #[arg(long, value_delimiter = ',', required = true)]
        je1: Vec<f64>,
        /// Comma-separated second drive intensities (cases A and C).
        #[arg(long, value_delimiter = ',')]
        je2: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Parameter file with `key = value` lines.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    dt_out: Option<f64>,
    /// Relative integration tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

impl RunArgs {
    fn params(&self) -> Result<SystemParams> {
        SystemParams::from_config_file(&self.config)
    }

    fn system(&self) -> Result<System> {
        let sys = self.params()?.validate()?;
        if sys.weak_coupling_warning() {
            eprintln!("warning: gm / omega_m is not small; the linearization may be inaccurate");
        }
        Ok(sys)
    }

    fn tolerance(&self) -> Result<Tolerance> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidArgument(format!("--tol must lie in (0, 1) (got {})", self.tol)));
        }
        Ok(Tolerance::new(self.tol))
    }
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Simulate { run } => {
            let sys = run.system()?;
            let tol = run.tolerance()?;
            let t_max = run.t_max.unwrap_or_else(|| harness::default_t_max(&sys));
            let dt_out = run.dt_out.unwrap_or_else(|| harness::default_dt_out(&sys));
            let mut out = open_output(&run.output)?;
            let summary = harness::run_simulate(&sys, t_max, dt_out, &tol, &mut out)?;
            out.flush()?;
            eprintln!("{summary}");
            Ok(0)
        }
        Command::Sweep { run, params, from, to, points, scale, mode, threads } => {
            let n = params.len();
            if from.len() != n || to.len() != n || points.len() != n || (scale.len() != n && !scale.is_empty()) {
                return Err(Error::InvalidArgument(
                    "--from, --to, --points and --scale must be given once per --param".into(),
                ));
            }
            let mut axes = Vec::with_capacity(n);
            for k in 0..n {
                axes.push(SweepAxis {
                    param: params[k].parse::<SweepParam>()?,
                    from: from[k],
                    to: to[k],
                    points: points[k],
                    scale: scale.get(k).map_or(Ok(Scale::Lin), |s| s.parse())?,
                });
            }
            let spec = SweepSpec {
                axes,
                base: run.params()?,
                mode: mode.parse::<SweepMode>()?,
                t_max: run.t_max,
                dt_out: run.dt_out,
                tol: run.tolerance()?,
            };
            let mut out = open_output(&run.output)?;
            let summary = harness::run_sweep(&spec, threads, &mut out)?;
            out.flush()?;
            eprintln!("{} points, {} failed", summary.rows.len(), summary.failed);
            Ok(if summary.failed > 0 { 4 } else { 0 })
        }
        Command::Compare { run } => {
            let sys = run.system()?;
            let tol = run.tolerance()?;
            let t_max = run.t_max.unwrap_or(20.0 / sys.params().kappa1);
            let dt_out = run.dt_out.unwrap_or(0.01 / sys.params().kappa1);
            let mut out = open_output(&run.output)?;
            let summary = harness::run_compare(&sys, t_max, dt_out, &tol, &mut out)?;
            out.flush()?;
            eprintln!("{summary}");
            Ok(0)
        }
        Command::Adiabatic { case, gamma_ratio, je1, je2, threads, output } => {
            let case: LimitCase = case.parse()?;
            if case != LimitCase::B && je2.is_empty() {
                return Err(Error::InvalidArgument(format!("case {case} needs --je2")));
            }
            let args = AdiabaticArgs { case, gamma_ratio, je1, je2 };
            let mut out = open_output(&output)?;
            let summary = harness::run_adiabatic(&args, threads, &mut out)?;
            out.flush()?;
            eprintln!("{} rows, {} failed", summary.reports.len(), summary.failed);
            Ok(if summary.failed > 0 { 4 } else { 0 })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
