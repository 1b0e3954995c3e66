use std::path::Path;

use nalgebra::DMatrix;
use serde_json::{json, Value};

use roesser2d::admissibility::{analyze, ScanOptions, SpectrumVerdict};
use roesser2d::lmi::{self, build_stability, certify_default, CertifyResult, LmiVariant};
use roesser2d::model::read_model;
use roesser2d::simulate::{
    csv_heatmap, csv_long, reduce_pointwise, simulate, BoundaryData, Channel, TrajectoryGrid,
};
use roesser2d::synthesis::{
    synthesize_output_feedback, synthesize_state_feedback, verify_gain, SynthesisOptions, SynthesisOutcome,
};
use roesser2d::{ClosedLoop, Error, FeedbackMode, Result, Roesser2D};

use crate::report::{error_result, with_status, Diagnostic, ModelSummary, Report, Severity};
use crate::{Command, ModelCommand, SimulateArgs};

/// Tolerance of the eigenvalue check applied to returned certificates.
pub const CHECK_TOL: f64 = 1e-9;

pub struct Partial {
    pub summary: Option<ModelSummary>,
    pub result: Value,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn execute(cmd: &Command) -> Report {
    let mut summary = None;
    let outcome = match cmd {
        Command::Model(ModelCommand::Validate { file }) => validate(file, &mut summary),
        Command::Analyze { file, samples } => load(file, &mut summary).and_then(|m| analyze_cmd(&m, *samples)),
        Command::Certify { file, variant, force_solve } => {
            load(file, &mut summary).and_then(|m| certify_cmd(&m, (*variant).into(), *force_solve))
        }
        Command::Synthesize { file, mode, variant, force_solve } => {
            load(file, &mut summary).and_then(|m| synthesize_cmd(&m, (*mode).into(), (*variant).into(), *force_solve))
        }
        Command::Verify { file, mode, gain, no_simulation } => {
            load(file, &mut summary).and_then(|m| verify_cmd(&m, (*mode).into(), gain, !*no_simulation))
        }
        Command::Simulate(args) => load(&args.file, &mut summary).and_then(|m| simulate_cmd(&m, args)),
        Command::HeatDemo { dx, dt, out, paper_rounding } => crate::heat_demo::run(*dx, *dt, out, *paper_rounding),
    };
    let (result, diagnostics, summary) = match outcome {
        Ok(p) => (p.result, p.diagnostics, p.summary.or(summary)),
        Err(e) => (error_result(&e), vec![Diagnostic::from_error(&e)], summary),
    };
    Report { command: cmd.name().into(), model_summary: summary, result, diagnostics, timing_ms: 0.0 }
}

fn load(path: &Path, summary: &mut Option<ModelSummary>) -> Result<Roesser2D> {
    let model = read_model(path)?;
    *summary = Some(ModelSummary::of(&model));
    Ok(model)
}

fn validate(path: &Path, summary: &mut Option<ModelSummary>) -> Result<Partial> {
    let model = load(path, summary)?;
    let report = model.validate()?;
    Ok(Partial { summary: None, result: with_status("valid", &report), diagnostics: vec![] })
}

pub fn analyze_cmd(model: &Roesser2D, samples: usize) -> Result<Partial> {
    if samples == 0 {
        return Err(Error::InvalidParams("--samples must be at least 1".into()));
    }
    let opts = ScanOptions { n_samples: samples, ..ScanOptions::default() };
    let report = analyze(model, &opts);
    let mut diagnostics = Vec::new();
    if !report.regular {
        diagnostics.push(Diagnostic::new(Severity::Warning, "NOT_REGULAR", "characteristic polynomial vanishes identically"));
    }
    if report.causal == Some(false) {
        diagnostics.push(Diagnostic::new(
            Severity::Warning,
            "NOT_CAUSAL",
            format!("total degree {} differs from rank(E) = {}", report.degree, report.rank_e),
        ));
    }
    let indeterminate = match report.spectrum.as_ref().map(|s| &s.verdict) {
        Some(SpectrumVerdict::UnstableWitness { witness }) => {
            diagnostics.push(Diagnostic::new(
                Severity::Warning,
                "UNSTABLE_WITNESS",
                format!(
                    "zero at |z1| = {:.6}, |z2| = {:.6} (sample {})",
                    witness.z1_abs(),
                    witness.z2_abs(),
                    witness.sample_index
                ),
            ));
            false
        }
        Some(SpectrumVerdict::Indeterminate { reason, .. }) => {
            diagnostics.push(Diagnostic::new(Severity::Warning, "SPECTRUM_INDETERMINATE", reason.clone()));
            true
        }
        _ => false,
    };
    let status = if report.admissible_indication() {
        "admissible"
    } else if indeterminate && report.regular && report.causal == Some(true) {
        "indeterminate"
    } else {
        "not_admissible"
    };
    Ok(Partial { summary: None, result: with_status(status, &report), diagnostics })
}

fn structural_note() -> Diagnostic {
    Diagnostic::new(
        Severity::Info,
        "STRUCTURAL_INFEASIBILITY",
        "for singular E the block LMI has a direction w = (v, 0), v in null(E), on which its quadratic form \
         is identically zero, so no P can make it negative definite; a stabilizing gain may still exist and \
         can be checked with `verify`",
    )
}

pub fn certify_value(model: &Roesser2D, res: &CertifyResult) -> Value {
    let check = res.certificate.as_ref().map(|c| lmi::independent_check(model.e(), model.a(), &c.p(), CHECK_TOL));
    let structural = res.precheck.is_some() && !res.outcome.is_feasible();
    let mut v = with_status(res.outcome.status(), res);
    v["structural"] = json!(structural);
    v["independent_check"] = json!(check);
    v
}

pub fn certify_cmd(model: &Roesser2D, variant: LmiVariant, force_solve: bool) -> Result<Partial> {
    let problem = build_stability(model, variant);
    let res = certify_default(&problem, force_solve)?;
    let mut diagnostics = Vec::new();
    if res.precheck.is_some() {
        diagnostics.push(structural_note());
    }
    if let roesser2d::sdp::SolveOutcome::Indeterminate { diagnostic: Some(d), .. } = &res.outcome {
        diagnostics.push(Diagnostic::new(Severity::Warning, "SOLVER_INDETERMINATE", d.clone()));
    }
    Ok(Partial { summary: None, result: certify_value(model, &res), diagnostics })
}

pub fn synthesize_cmd(model: &Roesser2D, mode: FeedbackMode, variant: LmiVariant, force_solve: bool) -> Result<Partial> {
    let opts = SynthesisOptions { force_solve, ..SynthesisOptions::default() };
    let out = match mode {
        FeedbackMode::State => synthesize_state_feedback(model, variant, &opts)?,
        FeedbackMode::Output => synthesize_output_feedback(model, variant, &opts)?,
    };
    let mut diagnostics = Vec::new();
    let status = match &out {
        SynthesisOutcome::Verified(_) => "verified",
        SynthesisOutcome::RecoveryInconsistent { reason, .. } => {
            diagnostics.push(Diagnostic::new(Severity::Error, "RECOVERY_INCONSISTENT", reason.clone()));
            "recovery_inconsistent"
        }
        SynthesisOutcome::Infeasible { lmi } => {
            if lmi.precheck.is_some() {
                diagnostics.push(structural_note());
            }
            "infeasible"
        }
        SynthesisOutcome::Indeterminate { .. } => "indeterminate",
    };
    let mut v = json!({ "mode": mode, "variant": variant, "outcome": out });
    if let SynthesisOutcome::Infeasible { lmi } = &out {
        v["structural"] = json!(lmi.precheck.is_some());
    }
    Ok(Partial { summary: None, result: with_status(status, &v), diagnostics })
}

pub fn parse_gain(text: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|e| Error::Parse {
                context: "--gain".into(),
                message: format!("`{}`: {e}", s.trim()),
            })
        })
        .collect::<Result<_>>()?;
    if values.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "gain has {} entries, expected {rows}x{cols} = {}",
            values.len(),
            rows * cols
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("--gain".into()));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn gain_shape(model: &Roesser2D, mode: FeedbackMode) -> (usize, usize) {
    let d = model.dims();
    match mode {
        FeedbackMode::State => (d.m, d.n()),
        FeedbackMode::Output => (d.m, d.p),
    }
}

pub fn verify_cmd(model: &Roesser2D, mode: FeedbackMode, gain: &str, simulate: bool) -> Result<Partial> {
    let (r, c) = gain_shape(model, mode);
    let k = parse_gain(gain, r, c)?;
    let opts = SynthesisOptions {
        simulation_grid: if simulate { Some((50, 50)) } else { None },
        ..SynthesisOptions::default()
    };
    let rep = verify_gain(model, &k, mode, &opts)?;
    let diagnostics = rep
        .diagnostics
        .iter()
        .map(|d| Diagnostic::new(Severity::Info, "VERIFICATION_NOTE", d.clone()))
        .collect();
    let status = if rep.verified { "verified" } else { "not_verified" };
    Ok(Partial { summary: None, result: with_status(status, &rep), diagnostics })
}

pub fn parse_boundary(text: &str, r_h: usize, r_v: usize) -> Result<BoundaryData> {
    let value = text
        .strip_prefix("const:")
        .ok_or_else(|| Error::Parse { context: "--boundary".into(), message: format!("`{text}`: expected const:<value>") })?;
    let v: f64 = value
        .parse()
        .map_err(|e| Error::Parse { context: "--boundary".into(), message: format!("`{value}`: {e}") })?;
    if !v.is_finite() {
        return Err(Error::NonFinite("--boundary".into()));
    }
    Ok(BoundaryData::constant(v, r_h, r_v))
}

/// Writes `trajectory.csv`, `heatmap.csv` and `trajectory.meta.json` into `dir`.
pub fn write_trajectory(grid: &TrajectoryGrid, dir: &Path, channel: Channel) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let heatmap = csv_heatmap(grid, channel)?;
    let files = [
        ("trajectory.csv", csv_long(grid)),
        ("heatmap.csv", heatmap),
        ("trajectory.meta.json", serde_json::to_string_pretty(&grid.sidecar()).expect("sidecar serializes")),
    ];
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        written.push(path.display().to_string());
    }
    Ok(written)
}

pub fn default_channel(model: &Roesser2D) -> Channel {
    let d = model.dims();
    if d.p > 0 {
        Channel::Y(0)
    } else if d.n_h > 0 {
        Channel::Xh(0)
    } else {
        Channel::Xv(0)
    }
}

pub fn simulation_value(grid: &TrajectoryGrid, poles: &[[f64; 2]], files: Vec<String>) -> Value {
    let status = if grid.diverged { "diverged" } else { "completed" };
    json!({
        "status": status,
        "N1": grid.n1,
        "N2": grid.n2,
        "diverged": grid.diverged,
        "truncated_at": grid.truncated_at.map(|(i, j)| [i, j]),
        "points_stored": grid.points.len(),
        "terminal_sup_norm": grid.terminal_sup_norm(),
        "sup_norm_per_antidiagonal": grid.sup_norm_per_antidiagonal,
        "reduced_poles": poles,
        "files": files,
    })
}

fn simulate_cmd(model: &Roesser2D, args: &SimulateArgs) -> Result<Partial> {
    if args.n1 == 0 || args.n2 == 0 {
        return Err(Error::InvalidParams("--n1 and --n2 must be positive".into()));
    }
    let channel = match &args.channel {
        Some(text) => text.parse()?,
        None => default_channel(model),
    };
    let closed_loop = match (&args.mode, &args.gain) {
        (Some(mode), Some(gain)) => {
            let mode: FeedbackMode = (*mode).into();
            let (r, c) = gain_shape(model, mode);
            ClosedLoop::with_gain(mode, parse_gain(gain, r, c)?)
        }
        _ => ClosedLoop::Open,
    };
    let reduced = reduce_pointwise(model, &closed_loop)?;
    let boundary = parse_boundary(&args.boundary, reduced.partition.r_h, reduced.partition.r_v)?;
    let grid = simulate(model, &reduced, &boundary, args.n1, args.n2, None)?;
    let files = write_trajectory(&grid, &args.out, channel)?;
    let mut diagnostics = Vec::new();
    if let Some((i, j)) = grid.truncated_at {
        diagnostics.push(Diagnostic::new(
            Severity::Warning,
            "DIVERGED",
            format!("state sup-norm exceeded 1e9 at ({i}, {j}); grid truncated"),
        ));
    }
    Ok(Partial { summary: None, result: simulation_value(&grid, &reduced.reduced_poles(), files), diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_parsing() {
        let k = parse_gain("-10, 21.0084", 1, 2).unwrap();
        assert_eq!(k[(0, 1)], 21.0084);
        assert!(matches!(parse_gain("1,2,3", 1, 2), Err(Error::DimensionMismatch(_))));
        assert!(matches!(parse_gain("1,x", 1, 2), Err(Error::Parse { .. })));
        assert!(matches!(parse_gain("1,inf", 1, 2), Err(Error::NonFinite(_))));
    }

    #[test]
    fn boundary_parsing() {
        assert_eq!(parse_boundary("const:-2.5", 1, 0).unwrap(), BoundaryData::constant(-2.5, 1, 0));
        assert!(parse_boundary("table:x", 1, 0).is_err());
        assert!(parse_boundary("const:abc", 1, 0).is_err());
    }
}
