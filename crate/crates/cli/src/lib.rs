//! Command-line front end. [`run`] parses arguments, executes one command and
//! returns the text for standard output together with the exit code.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod heat_demo;
pub mod report;

use report::{Diagnostic, Report, Severity, EXIT_INPUT, EXIT_OK};
use roesser2d::lmi::LmiVariant;
use roesser2d::FeedbackMode;

#[derive(Debug, Parser)]
#[command(name = "roesser2d", version, about = "Analysis, LMI certification and feedback synthesis for 2D singular Roesser systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Model file utilities.
    #[command(subcommand)]
    Model(ModelCommand),
    /// Regularity, causality and spectrum scan.
    Analyze {
        file: PathBuf,
        #[arg(long, default_value_t = 257)]
        samples: usize,
    },
    /// Solve a stability LMI and report a certificate or infeasibility.
    Certify {
        file: PathBuf,
        #[arg(long, value_enum)]
        variant: VariantArg,
        /// Run the solver even when the structural precheck already decides.
        #[arg(long)]
        force_solve: bool,
    },
    /// Synthesize a feedback gain from the feedback LMI.
    Synthesize {
        file: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, value_enum)]
        variant: VariantArg,
        #[arg(long)]
        force_solve: bool,
    },
    /// Verify a given gain on the closed loop.
    Verify {
        file: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Comma-separated entries, row-major.
        #[arg(long, allow_hyphen_values = true)]
        gain: String,
        /// Skip the decay simulation.
        #[arg(long)]
        no_simulation: bool,
    },
    /// Simulate on an N1 x N2 grid and write CSV files.
    Simulate(SimulateArgs),
    /// Heat-transfer case study, end to end.
    HeatDemo {
        #[arg(long, allow_negative_numbers = true)]
        dx: f64,
        #[arg(long, allow_negative_numbers = true)]
        dt: f64,
        #[arg(long)]
        out: PathBuf,
        /// Use the coefficients truncated to three decimals.
        #[arg(long)]
        paper_rounding: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum ModelCommand {
    /// Structural validation.
    Validate { file: PathBuf },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub file: PathBuf,
    #[arg(long, value_enum, requires = "gain")]
    pub mode: Option<ModeArg>,
    #[arg(long, allow_hyphen_values = true, requires = "mode")]
    pub gain: Option<String>,
    #[arg(long)]
    pub n1: usize,
    #[arg(long)]
    pub n2: usize,
    /// `const:<value>` on every dynamic boundary channel.
    #[arg(long, default_value = "const:1", allow_hyphen_values = true)]
    pub boundary: String,
    /// Heatmap channel: `xh_K`, `xv_K`, `y_K` or `u_K` (default `y_0`, or the
    /// first state when the model has no outputs).
    #[arg(long)]
    pub channel: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Faithful,
    SignCorrected,
    Eq12,
}

impl From<VariantArg> for LmiVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Faithful => LmiVariant::Faithful,
            VariantArg::SignCorrected => LmiVariant::SignCorrected,
            VariantArg::Eq12 => LmiVariant::Eq12Direct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    State,
    Output,
}

impl From<ModeArg> for FeedbackMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::State => FeedbackMode::State,
            ModeArg::Output => FeedbackMode::Output,
        }
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Model(ModelCommand::Validate { .. }) => "model validate",
            Self::Analyze { .. } => "analyze",
            Self::Certify { .. } => "certify",
            Self::Synthesize { .. } => "synthesize",
            Self::Verify { .. } => "verify",
            Self::Simulate(_) => "simulate",
            Self::HeatDemo { .. } => "heat-demo",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub stdout: String,
    pub code: i32,
    pub report: Option<Report>,
}

pub fn run<I, T>(args: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let start = Instant::now();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return Output { stdout: e.render().to_string(), code: EXIT_OK, report: None };
            }
            let report = Report {
                command: "usage".into(),
                model_summary: None,
                result: serde_json::json!({ "status": "error", "error_code": "USAGE" }),
                diagnostics: vec![Diagnostic::new(Severity::Error, "USAGE", e.render().to_string().trim_end())],
                timing_ms: start.elapsed().as_secs_f64() * 1e3,
            };
            return Output { stdout: report.to_json() + "\n", code: EXIT_INPUT, report: Some(report) };
        }
    };
    let mut report = commands::execute(&cli.command);
    report.timing_ms = start.elapsed().as_secs_f64() * 1e3;
    if let Command::HeatDemo { out, .. } = &cli.command {
        if report.status() != "error" {
            let path = out.join("report.json");
            if let Err(e) = std::fs::write(&path, report.to_json() + "\n") {
                let err = roesser2d::Error::Io(format!("{}: {e}", path.display()));
                report.diagnostics.push(Diagnostic::from_error(&err));
                report.result = report::error_result(&err);
            }
        }
    }
    let code = report.exit_code();
    Output { stdout: report.to_json() + "\n", code, report: Some(report) }
}
