//! `cohere`: coherence measures and GIO convertibility from the command line.
//!
//! Every command prints a [`RunReport`] as JSON on standard output and a
//! short human summary on standard error (suppressed by `--json`).
//!
//! Exit codes: 0 success or convertible, 1 not convertible, 2 input error,
//! 3 solver error.

pub mod doc;
pub mod report;

use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coherence_core::channels::{
    apply_schur, conjugation_example, omega_materialize, validate_observable, ChannelClass, DensityMatrix,
};
use coherence_core::convert::{
    construct_mcs_gio, decide_gio, decide_offdiag, search_witness_measure, sqrt_diagonal_state, Decision, Reason,
    Verdict,
};
use coherence_core::matcore::min_eigenvalue;
use coherence_core::measures::{c_l1, c_roc, cm_class, cm_gio, MeasureReport, Witness};
use coherence_core::sdpcore::{SdpStatus, SolverSettings};
use coherence_core::{Error, Result};
use serde_json::{json, Value};

pub use doc::MatrixDocument;
pub use report::RunReport;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERTIBLE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Exact value of `C_M(M)` for the built-in example observable.
pub const EXAMPLE_EXPECTED: f64 = 934.0 / 2025.0;

#[derive(Debug, Parser)]
#[command(name = "cohere", version, about = "Coherence measures and GIO state conversion")]
pub struct Cli {
    #[command(flatten)]
    pub flags: Flags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Flags {
    /// Solver tolerance on residuals and duality gap.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,
    /// Iteration cap for each SDP solve.
    #[arg(long, global = true, default_value_t = 50_000)]
    pub max_iter: usize,
    /// Seed for the randomised witness search.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Restarts of the Ω witness search run when a GIO conversion fails
    /// (0 disables it).
    #[arg(long, global = true, default_value_t = 32)]
    pub samples: usize,
    /// Print only the JSON report.
    #[arg(long, global = true)]
    pub json: bool,
}

impl Flags {
    pub fn settings(&self) -> SolverSettings {
        SolverSettings {
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureKind {
    L1,
    Roc,
    Cm,
    CmClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConvertMode {
    Gio,
    Offdiag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassArg {
    Gio,
    Dio,
    Mio,
}

impl From<ClassArg> for ChannelClass {
    fn from(c: ClassArg) -> Self {
        match c {
            ClassArg::Gio => ChannelClass::Gio,
            ClassArg::Dio => ChannelClass::Dio,
            ClassArg::Mio => ChannelClass::Mio,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a coherence measure of a state.
    Measure {
        kind: MeasureKind,
        /// State file or built-in (psi-plus:d, rho-p:d:p, example, example-conj).
        state: String,
        /// Observable in Ω for cm / cm-class (file or built-in); defaults to psi-plus.
        #[arg(long)]
        observable: Option<String>,
        /// Channel class for cm-class.
        #[arg(long, value_enum, default_value = "gio")]
        class: ClassArg,
    },
    /// Decide whether rho can be converted into sigma.
    Convert {
        mode: ConvertMode,
        rho: String,
        sigma: String,
        /// Channel class for offdiag mode.
        #[arg(long, value_enum, default_value = "gio")]
        class: ClassArg,
    },
    /// Build the GIO that prepares a target from its maximally coherent parent.
    Construct { target: String },
    /// Reproduce the three-level example where C_M(M) differs from C_M(M*).
    WorkedExample,
}

/// Outcome of a command: the report and the exit code to use.
pub struct Outcome {
    pub report: RunReport,
    pub exit_code: i32,
    pub summary: String,
}

pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Solver(_) | Error::NoConvergence { .. } => EXIT_SOLVER,
        _ => EXIT_INPUT,
    }
}

/// Runs a parsed command line. `args` is echoed into the report.
pub fn run(cli: &Cli, args: Vec<String>) -> Result<Outcome> {
    let settings = cli.flags.settings();
    settings.validate()?;
    let start = Instant::now();
    let mut outcome = match &cli.command {
        Command::Measure {
            kind,
            state,
            observable,
            class,
        } => {
            let mut report = RunReport::new("measure", args, &settings, cli.flags.samples);
            let summary = cmd_measure(&mut report, *kind, state, observable.as_deref(), (*class).into(), &settings)?;
            Outcome {
                report,
                exit_code: EXIT_OK,
                summary,
            }
        }
        Command::Convert {
            mode,
            rho,
            sigma,
            class,
        } => {
            let mut report = RunReport::new("convert", args, &settings, cli.flags.samples);
            let (summary, decision) =
                cmd_convert(&mut report, *mode, rho, sigma, (*class).into(), cli.flags.samples, &settings)?;
            Outcome {
                report,
                exit_code: match decision {
                    Decision::Convertible => EXIT_OK,
                    Decision::NotConvertible => EXIT_NOT_CONVERTIBLE,
                },
                summary,
            }
        }
        Command::Construct { target } => {
            let mut report = RunReport::new("construct", args, &settings, cli.flags.samples);
            let summary = cmd_construct(&mut report, target)?;
            Outcome {
                report,
                exit_code: EXIT_OK,
                summary,
            }
        }
        Command::WorkedExample => {
            let mut report = RunReport::new("worked-example", args, &settings, cli.flags.samples);
            let (summary, pass) = cmd_worked_example(&mut report, &settings)?;
            Outcome {
                report,
                exit_code: if pass { EXIT_OK } else { EXIT_SOLVER },
                summary,
            }
        }
    };
    outcome.report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(outcome)
}

fn status_name(s: SdpStatus) -> &'static str {
    match s {
        SdpStatus::Optimal => "optimal",
        SdpStatus::Infeasible => "infeasible",
        SdpStatus::MaxIterations => "max_iterations",
    }
}

fn record_solver(report: &mut RunReport, r: &MeasureReport) {
    report.diagnostic("status", status_name(r.status));
    report.diagnostic("primal_residual", r.primal_residual);
    report.diagnostic("dual_gap", r.dual_gap);
    report.diagnostic("iterations", r.iterations);
}

fn record_witness(report: &mut RunReport, w: &Witness) {
    match w {
        Witness::Schur(ch) => report.witness("tau", ch.tau()),
        Witness::Choi(choi) => report.witness("choi", choi.matrix()),
        Witness::Incoherent(delta) => report.witness("delta", delta.matrix()),
    }
}

pub fn cmd_measure(
    report: &mut RunReport,
    kind: MeasureKind,
    state: &str,
    observable: Option<&str>,
    class: ChannelClass,
    settings: &SolverSettings,
) -> Result<String> {
    let (input, rho) = doc::load_density(state)?;
    report.input("state", &input);
    let d = rho.dim();
    let (name, r) = match kind {
        MeasureKind::L1 => {
            let v = c_l1(&rho);
            report.result("measure", "l1");
            report.result("value", v);
            return Ok(format!("C_l1 = {v:.10}"));
        }
        MeasureKind::Roc => ("roc".to_string(), c_roc(&rho, settings)?),
        MeasureKind::Cm | MeasureKind::CmClass => {
            let obs = doc::load(observable.unwrap_or("psi-plus"), Some(d))?;
            if obs.matrix.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: obs.matrix.dim(),
                });
            }
            validate_observable(&obs.matrix)?;
            report.input("observable", &obs);
            if kind == MeasureKind::Cm {
                ("cm".to_string(), cm_gio(&rho, &obs.matrix, settings)?)
            } else {
                report.result("class", class.name());
                ("cm-class".to_string(), cm_class(&rho, &obs.matrix, class, settings)?)
            }
        }
    };
    report.result("measure", name.as_str());
    report.result("value", r.value);
    if let Some(w) = &r.witness {
        record_witness(report, w);
    }
    record_solver(report, &r);
    Ok(format!("{name} = {:.10}", r.value))
}

fn reason_json(r: Reason) -> Value {
    match r {
        Reason::DiagonalMismatch(i) => json!({"kind": "diagonal_mismatch", "index": i}),
        Reason::ForcedEntryTooLarge(i, j) => json!({"kind": "forced_entry_too_large", "entry": [i, j]}),
        Reason::ZeroToNonzero(i, j) => json!({"kind": "zero_to_nonzero", "entry": [i, j]}),
        Reason::CompletionInfeasible => json!({"kind": "completion_infeasible"}),
        Reason::None => json!({"kind": "none"}),
    }
}

pub fn cmd_convert(
    report: &mut RunReport,
    mode: ConvertMode,
    rho_arg: &str,
    sigma_arg: &str,
    class: ChannelClass,
    samples: usize,
    settings: &SolverSettings,
) -> Result<(String, Decision)> {
    let (rho_in, rho) = doc::load_density(rho_arg)?;
    let (sigma_in, sigma) = doc::load_density(sigma_arg)?;
    report.input("rho", &rho_in);
    report.input("sigma", &sigma_in);
    let verdict: Verdict = match mode {
        ConvertMode::Gio => decide_gio(&rho, &sigma, settings)?,
        ConvertMode::Offdiag => {
            report.result("class", class.name());
            decide_offdiag(&rho, &sigma, class, settings)?
        }
    };
    let convertible = verdict.decision == Decision::Convertible;
    report.result("mode", if mode == ConvertMode::Gio { "gio" } else { "offdiag" });
    report.result("verdict", if convertible { "convertible" } else { "not_convertible" });
    report.result("reason", reason_json(verdict.reason));
    report.result("margin", verdict.margin);
    if let Some(w) = &verdict.witness {
        record_witness(report, w);
    }

    let mut summary = format!(
        "{} (margin {:.3e})",
        if convertible { "convertible" } else { "not convertible" },
        verdict.margin
    );
    let searchable = mode == ConvertMode::Gio && !matches!(verdict.reason, Reason::DiagonalMismatch(_));
    if !convertible && searchable && samples > 0 {
        match search_witness_measure(&rho, &sigma, samples, settings.seed, settings)? {
            Some(w) => {
                let m = omega_materialize(&w.omega, rho.dim())?;
                report.result("measure_gap", w.gap);
                report.witness("observable", &m);
                report.diagnostic("search_restart", w.restart);
                summary.push_str(&format!("; observable with C_M gap {:.3e}", w.gap));
            }
            None => report.result("measure_gap", Value::Null),
        }
    }
    Ok((summary, verdict.decision))
}

pub fn cmd_construct(report: &mut RunReport, target: &str) -> Result<String> {
    let (input, rho) = doc::load_density(target)?;
    report.input("target", &input);
    let ch = construct_mcs_gio(&rho)?;
    let psi = sqrt_diagonal_state(&rho);
    let eta = DensityMatrix::pure(&psi)?;
    let residual = apply_schur(&ch, &eta)?.matrix().max_abs_diff(rho.matrix());
    let lambda = min_eigenvalue(ch.tau())?;
    let zero: Vec<usize> = rho
        .diag()
        .iter()
        .enumerate()
        .filter(|(_, p)| **p <= coherence_core::convert::ZERO_DIAGONAL)
        .map(|(i, _)| i)
        .collect();
    report.result("psi", psi.iter().map(|z| vec![z.re, z.im]).collect::<Vec<_>>());
    report.result("residual", residual);
    report.result("min_eigenvalue", lambda);
    report.result("zero_diagonals", zero);
    report.witness("tau0", ch.tau());
    Ok(format!("action residual {residual:.3e}, min eigenvalue of tau0 {lambda:.3e}"))
}

/// Values of the built-in example: `(C_M(M), C_M(M*))` with their reports.
pub fn worked_example(settings: &SolverSettings) -> Result<(MeasureReport, MeasureReport)> {
    let m = omega_materialize(&conjugation_example(), 3)?;
    let state = DensityMatrix::new(m.clone())?;
    let a = cm_gio(&state, &m, settings)?;
    let b = cm_gio(&state.conj(), &m, settings)?;
    Ok((a, b))
}

pub fn cmd_worked_example(report: &mut RunReport, settings: &SolverSettings) -> Result<(String, bool)> {
    let m = omega_materialize(&conjugation_example(), 3)?;
    let (a, b) = worked_example(settings)?;
    let gap = a.value - b.value;
    let pass = (a.value - EXAMPLE_EXPECTED).abs() <= 1e-5 && gap > 0.0;
    report.witness("observable", &m);
    report.result("c_m", a.value);
    report.result("c_m_conj", b.value);
    report.result("gap", gap);
    report.result("expected_c_m", EXAMPLE_EXPECTED);
    report.result("diagonal", 1.0 / 3.0);
    report.result(
        "note",
        "every diagonal entry of M is 1/3 = 1/d, as for any element of Ω, not 1",
    );
    report.result("pass", pass);
    if let Some(Witness::Schur(ch)) = &a.witness {
        report.witness("tau", ch.tau());
    }
    if let Some(Witness::Schur(ch)) = &b.witness {
        report.witness("tau_conj", ch.tau());
    }
    report.diagnostic("status", status_name(a.status));
    report.diagnostic("status_conj", status_name(b.status));
    report.diagnostic("dual_gap", a.dual_gap);
    report.diagnostic("dual_gap_conj", b.dual_gap);
    Ok((
        format!(
            "C_M(M) = {:.7} (expected {:.7}), C_M(M*) = {:.7}, gap {:.3e}: {}",
            a.value,
            EXAMPLE_EXPECTED,
            b.value,
            gap,
            if pass { "pass" } else { "FAIL" }
        ),
        pass,
    ))
}
