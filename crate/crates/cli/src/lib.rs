//! The `vstab` command-line front end.
//!
//! [`run`] parses arguments, dispatches one subcommand and returns the
//! process exit code: 0 on success, 1 on usage errors, 2 on domain errors,
//! 3 on numerical or certification failures.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use vstab_core::io::{self as vio, format_f64, KernelFile, MatrixFile};
use vstab_core::radii::{self, Validity};
use vstab_core::tvcert::{self, Trajectory};
use vstab_core::{
    operators, spectral, AnalysisConfig, Complex64, ConvolutionKernel, Error, PerturbationStructure, PhaseSpace,
    Prehistory, StateNorm,
};

const CSV_HELP: &str = "\
CSV outputs:
  resolvent          n,i,j,re,im       one row per entry X(n)[i,j]
  radius --profile   theta,norm        transfer norm on the uniform circle grid
  simulate           n,re_0,im_0,...,re_{d-1},im_{d-1},norm

Exit codes: 0 success, 1 usage error, 2 domain error, 3 numerical failure.";

#[derive(Debug, Parser)]
#[command(name = "vstab", version, about = "Stability analysis of Volterra convolution difference systems", after_help = CSV_HELP)]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Uniform grid points on the unit circle (power of two, at least 64).
    #[arg(long, global = true, default_value_t = 4096)]
    grid_size: usize,
    #[arg(long, global = true, default_value_t = 1e-9)]
    sigma_tol: f64,
    #[arg(long, global = true, default_value_t = 1e-8)]
    refine_tol: f64,
    /// Length of resolvent sequences used by the analyses.
    #[arg(long, global = true, default_value_t = 256)]
    n_max: usize,
    /// Block size of finite Toeplitz sections.
    #[arg(long, global = true, default_value_t = 128)]
    section: usize,
    /// State norm: 1, 2 or inf.
    #[arg(long, global = true, default_value = "2")]
    state_norm: StateNorm,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Rate reported when a sequence vanishes.
    #[arg(long, global = true, default_value_t = 50.0)]
    nu_max: f64,
}

impl ConfigArgs {
    fn to_config(&self) -> AnalysisConfig {
        AnalysisConfig {
            grid_size: self.grid_size,
            sigma_tol: self.sigma_tol,
            refine_tol: self.refine_tol,
            n_max: self.n_max,
            section: self.section,
            state_norm: self.state_norm,
            seed: self.seed,
            nu_max: self.nu_max,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Uniform exponential stability verdict in the resolvent sense.
    Analyze { kernel: PathBuf },
    /// Resolvent sequence X(0..=nmax) as CSV.
    Resolvent {
        kernel: PathBuf,
        #[arg(long)]
        nmax: Option<usize>,
    },
    /// Bounds on the input-state (or input-output) operator norm on l^q.
    Norms {
        kernel: PathBuf,
        /// Sequence-space exponent: 1, 2 or inf.
        #[arg(long, default_value = "2")]
        q: StateNorm,
        /// Structure file; bounds the input-output operator instead.
        #[arg(long)]
        structure: Option<PathBuf>,
    },
    /// Complex and real stability radii.
    Radius {
        kernel: PathBuf,
        /// Phase space p:gamma[:variant], p may be inf, variant ellp or czero.
        #[arg(long, default_value = "inf:0:czero")]
        space: PhaseSpace,
        /// Unstructured perturbations (the default).
        #[arg(long, conflicts_with_all = ["structure", "delayed_feedback"])]
        unstructured: bool,
        /// Structure file {"D": matrix, "E": kernel}.
        #[arg(long, conflicts_with = "delayed_feedback")]
        structure: Option<PathBuf>,
        /// Delayed feedback file {"D": matrix, "frakE": matrix}.
        #[arg(long)]
        delayed_feedback: Option<PathBuf>,
        /// Write the transfer norm profile on the circle grid to this CSV file.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Rank-one destabilizing perturbation of minimal norm (2-norm only).
    Destabilize {
        kernel: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        margin: f64,
        #[arg(long)]
        structure: Option<PathBuf>,
    },
    /// Small-gain certificate for a time-varying disturbance.
    Certify {
        /// Base kernel; not used with --base-zero.
        #[arg(required_unless_present = "base_zero")]
        kernel: Option<PathBuf>,
        /// Disturbance file {"rows": [kernel], "eventual": kernel}.
        #[arg(long)]
        disturbance: PathBuf,
        #[arg(long, default_value = "inf:0:czero")]
        space: PhaseSpace,
        /// Structure file; rows are then memoryless matrices Δ(n).
        #[arg(long, conflicts_with = "base_zero")]
        structure: Option<PathBuf>,
        /// Test the disturbance alone against the zero base kernel on B^{p,beta}.
        #[arg(long, requires_all = ["p", "beta"])]
        base_zero: bool,
        #[arg(long, value_parser = parse_exponent)]
        p: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Simulate a trajectory; CSV on stdout, decay estimate as JSON.
    Simulate {
        kernel: PathBuf,
        /// Prehistory file; defaults to the impulse e_0 at m = 0.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        disturbance: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        tau: usize,
        #[arg(long, default_value_t = 100)]
        horizon: usize,
        /// Write the decay estimate JSON here instead of stderr.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn parse_exponent(s: &str) -> std::result::Result<f64, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        other => match other.parse::<f64>() {
            Ok(p) if p >= 1.0 => Ok(p),
            _ => Err(format!("expected a number >= 1 or inf, got '{s}'")),
        },
    }
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    schema: &'static str,
    config: &'a AnalysisConfig,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    validity: Option<Validity>,
}

#[derive(Serialize)]
struct DestabilizerBody {
    delta: MatrixFile,
    verification: Verification,
}

#[derive(Serialize)]
struct Verification {
    #[serde(with = "vstab_core::serde_util::complex_pair")]
    zeta_star: Complex64,
    transfer_max: f64,
    delta_norm: f64,
    margin: f64,
    pencil_residual: f64,
    perturbed_ue_resolvent_sense: bool,
    #[serde(with = "vstab_core::serde_util::option_complex_pair")]
    perturbed_witness_zeta: Option<Complex64>,
    perturbed_kernel: KernelFile,
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Runs one command, writing reports to `out` and diagnostics to `err`.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(out, "{}", e.render());
                    if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 1 } else { 0 }
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    1
                }
            };
            return code;
        }
    };
    let cfg = cli.config.to_config();
    let result = match cfg.validate() {
        Ok(()) => dispatch(&cli.command, &cfg, out, err),
        Err(e) => Err(Failure::Usage(config_error(&e))),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
        Err(Failure::Core(e)) => {
            if let (Error::BaseUnstable(_), Command::Radius { .. }) = (&e, &cli.command) {
                let body = ErrorReport { error: "base_unstable", message: e.to_string(), validity: Some(Validity::BaseNotUes) };
                if let Ok(text) = vio::to_json(&Report { schema: "vstab.radius.error/1", config: &cfg, body }) {
                    let _ = out.write_all(text.as_bytes());
                }
            }
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn config_error(e: &Error) -> String {
    let msg = e.to_string();
    let fields = ["grid_size", "sigma_tol", "refine_tol", "n_max", "section", "nu_max"];
    match fields.iter().find(|f| msg.contains(*f)) {
        Some(f) => format!("invalid value for --{}: {msg}", f.replace('_', "-")),
        None => format!("invalid configuration flag: {msg}"),
    }
}

/// Exit status for a failed operation: 3 for numerical failures, 2 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

/// Runs one command against the process's standard streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    let code = run_with(args, &mut out, &mut err);
    let _ = out.flush();
    code
}

fn read(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Core(Error::InvalidInput(format!("cannot read {}: {e}", path.display()))))
}

fn load_kernel(path: &Path) -> std::result::Result<ConvolutionKernel, Failure> {
    Ok(vio::parse_kernel(&read(path)?)?)
}

fn load_structure(path: &Path) -> std::result::Result<PerturbationStructure, Failure> {
    Ok(vio::parse_structure(&read(path)?)?)
}

fn write_file(path: &Path, text: &str) -> Outcome {
    fs::write(path, text)
        .map_err(|e| Failure::Core(Error::InvalidInput(format!("cannot write {}: {e}", path.display()))))
}

fn emit<T: Serialize>(out: &mut dyn Write, schema: &'static str, cfg: &AnalysisConfig, body: T) -> Outcome {
    let text = vio::to_json(&Report { schema, config: cfg, body })?;
    out.write_all(text.as_bytes())
        .map_err(|e| Failure::Core(Error::InvalidInput(format!("cannot write output: {e}"))))
}

fn dispatch(command: &Command, cfg: &AnalysisConfig, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    match command {
        Command::Analyze { kernel } => {
            let k = load_kernel(kernel)?;
            emit(out, "vstab.verdict/1", cfg, spectral::ue_verdict(&k, cfg)?)
        }
        Command::Resolvent { kernel, nmax } => {
            let k = load_kernel(kernel)?;
            let xs = spectral::resolvent_sequence(&k, nmax.unwrap_or(cfg.n_max))?;
            let mut csv = String::from("n,i,j,re,im\n");
            for (n, x) in xs.iter().enumerate() {
                for i in 0..x.nrows() {
                    for j in 0..x.ncols() {
                        let z = x[(i, j)];
                        let _ = writeln!(csv, "{n},{i},{j},{},{}", format_f64(z.re), format_f64(z.im));
                    }
                }
            }
            write_out(out, &csv)
        }
        Command::Norms { kernel, q, structure } => {
            let k = load_kernel(kernel)?;
            let bounds = match structure {
                Some(path) => operators::io_norm(&k, &load_structure(path)?, *q, cfg.section, cfg)?,
                None => operators::gamma_norm(&k, *q, cfg.section, cfg)?,
            };
            emit(out, "vstab.norms/1", cfg, bounds)
        }
        Command::Radius { kernel, space, structure, delayed_feedback, profile, .. } => {
            let k = load_kernel(kernel)?;
            let (report, profile_structure) = if let Some(path) = structure {
                let s = load_structure(path)?;
                (radii::radius_structured(&k, &s, space, cfg)?, s)
            } else if let Some(path) = delayed_feedback {
                let (d, frak_e) = vio::parse_delayed_feedback(&read(path)?)?;
                let s = PerturbationStructure::new(d.clone(), ConvolutionKernel::memoryless(frak_e.clone()))?;
                (radii::radius_delayed_feedback(&k, &d, &frak_e, space, cfg)?, s)
            } else {
                (radii::radius_unstructured(&k, space, cfg)?, PerturbationStructure::memoryless(k.dim_out()))
            };
            if let Some(path) = profile {
                let points = radii::circle_profile(&k, &profile_structure, cfg.grid_size, cfg.state_norm)?;
                let mut csv = String::from("theta,norm\n");
                for (theta, value) in points {
                    let _ = writeln!(csv, "{},{}", format_f64(theta), format_f64(value));
                }
                write_file(path, &csv)?;
            }
            emit(out, "vstab.radius/1", cfg, report)
        }
        Command::Destabilize { kernel, margin, structure } => {
            let k = load_kernel(kernel)?;
            let s = match structure {
                Some(path) => load_structure(path)?,
                None => PerturbationStructure::memoryless(k.dim_out()),
            };
            let d = radii::synthesize_destabilizer(&k, &s, *margin, cfg)?;
            let perturbed = radii::perturbed_kernel(&k, &s, &d.delta)?;
            let verdict = spectral::ue_verdict(&perturbed, cfg)?;
            let body = DestabilizerBody {
                delta: MatrixFile::from_matrix(&d.delta),
                verification: Verification {
                    zeta_star: d.zeta_star,
                    transfer_max: d.transfer_max,
                    delta_norm: d.delta_norm,
                    margin: *margin,
                    pencil_residual: d.pencil_residual,
                    perturbed_ue_resolvent_sense: verdict.ue_resolvent_sense,
                    perturbed_witness_zeta: verdict.witness_zeta,
                    perturbed_kernel: KernelFile::from_kernel(&perturbed),
                },
            };
            emit(out, "vstab.destabilizer/1", cfg, body)
        }
        Command::Certify { kernel, disturbance, space, structure, base_zero, p, beta } => {
            let spec = vio::parse_disturbance(&read(disturbance)?)?;
            let cert = if *base_zero {
                let (p, beta) = (p.unwrap_or(f64::INFINITY), beta.unwrap_or(0.0));
                tvcert::base_zero_test(&spec, p, beta, cfg.state_norm)?
            } else {
                let path = kernel.as_deref().ok_or_else(|| Failure::Usage("certify needs a kernel file".into()))?;
                let k = load_kernel(path)?;
                let s = structure.as_deref().map(load_structure).transpose()?;
                tvcert::smallgain_certify(&k, &spec, space, s.as_ref(), cfg)?
            };
            emit(out, "vstab.certificate/1", cfg, cert)
        }
        Command::Simulate { kernel, init, disturbance, tau, horizon, report } => {
            let k = load_kernel(kernel)?;
            let phi = match init {
                Some(path) => vio::parse_prehistory(&read(path)?)?,
                None => Prehistory::impulse(k.dim_out(), 0, 0)?,
            };
            let spec = disturbance.as_deref().map(|p| Ok::<_, Failure>(vio::parse_disturbance(&read(p)?)?)).transpose()?;
            let traj = tvcert::simulate(&k, spec.as_ref(), &phi, *tau, *horizon, cfg)?;
            write_out(out, &trajectory_csv(&traj, cfg.state_norm))?;
            let text = vio::to_json(&Report { schema: "vstab.decay/1", config: cfg, body: DecayBody { decay: traj.decay.clone() } })?;
            match report {
                Some(path) => write_file(path, &text),
                None => write_out(err, &text),
            }
        }
    }
}

#[derive(Serialize)]
struct DecayBody {
    decay: Option<spectral::DecayEstimate>,
}

fn write_out(out: &mut dyn Write, text: &str) -> Outcome {
    out.write_all(text.as_bytes())
        .map_err(|e| Failure::Core(Error::InvalidInput(format!("cannot write output: {e}"))))
}

/// `n,re_0,im_0,…,norm` with absolute time `n = τ + k`.
pub fn trajectory_csv(traj: &Trajectory, norm: StateNorm) -> String {
    let d = traj.states.first().map_or(0, |x| x.len());
    let mut csv = String::from("n");
    for i in 0..d {
        let _ = write!(csv, ",re_{i},im_{i}");
    }
    csv.push_str(",norm\n");
    for (k, x) in traj.states.iter().enumerate() {
        let _ = write!(csv, "{}", traj.tau + k);
        for z in x.iter() {
            let _ = write!(csv, ",{},{}", format_f64(z.re), format_f64(z.im));
        }
        let _ = writeln!(csv, ",{}", format_f64(norm.vector_norm(x.iter())));
    }
    csv
}
