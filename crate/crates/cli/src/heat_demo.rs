//! End-to-end heat-transfer case study with a consolidated report.
//!
//! Every step records what it is expected to show and what was observed. The
//! `DISCREPANCY` section lists where the published case study and the
//! computation disagree; neither side is silently preferred.

use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};

use roesser2d::heat::{build_heat_model, HeatParams};
use roesser2d::lmi::{build_stability, certify_default, LmiVariant};
use roesser2d::model::write_model;
use roesser2d::simulate::{reduce_pointwise, simulate, BoundaryData, Channel};
use roesser2d::synthesis::{
    synthesize_output_feedback, synthesize_state_feedback, verify_gain, SynthesisOptions, SynthesisOutcome,
};
use roesser2d::{ClosedLoop, Error, FeedbackMode, Result, Roesser2D};

use crate::commands::{analyze_cmd, certify_value, simulation_value, write_trajectory, Partial};
use crate::report::{Diagnostic, ModelSummary, Severity};

/// State-feedback gain reported for the reference discretization.
pub const REFERENCE_STATE_GAIN: [f64; 2] = [-10.0, 21.0084];
/// Output-feedback gain reported for the reference discretization (1x2).
pub const REFERENCE_OUTPUT_GAIN: [f64; 2] = [-0.8137, 0.5039];
pub const GRID: usize = 50;

#[derive(Debug, Clone, Serialize)]
pub struct Step {
    pub name: String,
    pub expected: String,
    pub observed: String,
    /// `None` when the step has no documented expectation for these parameters.
    pub consistent: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Discrepancy {
    pub id: &'static str,
    pub reference_claim: String,
    pub computed: String,
    pub resolution: String,
}

fn step(name: &str, expected: &str, observed: impl Into<String>, consistent: Option<bool>) -> Step {
    Step { name: name.into(), expected: expected.into(), observed: observed.into(), consistent }
}

pub fn run(dx: f64, dt: f64, out: &Path, paper_rounding: bool) -> Result<Partial> {
    let params = HeatParams::new(dx, dt).with_paper_rounding(paper_rounding);
    let model = build_heat_model(&params)?;
    std::fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    write_model(&model, out.join("model.json"))?;
    let reference = dx == 0.1 && dt == 0.1;
    let mut steps = Vec::new();
    let mut diagnostics = Vec::new();

    // Analysis.
    let analysis = analyze_cmd(&model, 257)?;
    let status = analysis.result["status"].as_str().unwrap_or("").to_string();
    steps.push(step("analyze", "admissible", &status, Some(status == "admissible")));

    // Stability LMIs.
    let mut certs = serde_json::Map::new();
    for variant in LmiVariant::ALL {
        let res = certify_default(&build_stability(&model, variant), false)?;
        let value = certify_value(&model, &res);
        let structural = value["structural"].as_bool().unwrap_or(false);
        let observed = format!("{}{}", res.outcome.status(), if structural { " (structural)" } else { "" });
        let (expected, ok) = match variant {
            LmiVariant::Eq12Direct => {
                let checked = value["independent_check"]["passed"].as_bool().unwrap_or(false);
                ("feasible, certificate passes the eigenvalue check", res.outcome.is_feasible() && checked)
            }
            _ => ("infeasible (structural)", structural),
        };
        steps.push(step(&format!("certify {}", variant.name()), expected, observed, Some(ok)));
        certs.insert(variant.name().into(), value);
    }

    // Synthesis LMIs.
    let quick = SynthesisOptions { simulation_grid: None, ..SynthesisOptions::default() };
    let mut synth = serde_json::Map::new();
    for mode in [FeedbackMode::State, FeedbackMode::Output] {
        let out = match mode {
            FeedbackMode::State => synthesize_state_feedback(&model, LmiVariant::Faithful, &quick)?,
            FeedbackMode::Output => synthesize_output_feedback(&model, LmiVariant::Faithful, &quick)?,
        };
        let structural = matches!(&out, SynthesisOutcome::Infeasible { lmi } if lmi.precheck.is_some());
        let name = match mode {
            FeedbackMode::State => "synthesize state faithful",
            FeedbackMode::Output => "synthesize output faithful",
        };
        let observed = format!("{}{}", out.status(), if structural { " (structural)" } else { "" });
        steps.push(step(name, "infeasible (structural)", observed, Some(structural)));
        synth.insert(format!("{mode:?}").to_lowercase(), json!(out));
    }

    // Reference gains.
    let k_state = DMatrix::from_row_slice(1, 2, &REFERENCE_STATE_GAIN);
    let state_check = verify_gain(&model, &k_state, FeedbackMode::State, &SynthesisOptions::default())?;
    steps.push(step(
        "verify reference state gain",
        if reference { "verified" } else { "recorded only (gain belongs to the 0.1/0.1 grid)" },
        if state_check.verified { "verified" } else { "not_verified" },
        reference.then_some(state_check.verified),
    ));
    let k_out = DMatrix::from_row_slice(1, 2, &REFERENCE_OUTPUT_GAIN);
    let out_check = verify_gain(&model, &k_out, FeedbackMode::Output, &quick);
    let out_observed = match &out_check {
        Err(e) => e.code().to_string(),
        Ok(r) => if r.verified { "verified" } else { "not_verified" }.to_string(),
    };
    steps.push(step(
        "verify reference output gain (1x2)",
        "DIMENSION_MISMATCH",
        &out_observed,
        Some(matches!(out_check, Err(Error::DimensionMismatch(_)))),
    ));

    // Simulations.
    let open = run_simulation(&model, &ClosedLoop::Open, out, &mut diagnostics)?;
    let open_diverged = open["diverged"].as_bool().unwrap_or(true);
    steps.push(step(
        "simulate open loop",
        "completed, decaying",
        open["status"].as_str().unwrap_or("error"),
        Some(!open_diverged),
    ));
    let closed_loop = ClosedLoop::with_gain(FeedbackMode::State, k_state.clone());
    let closed = run_simulation(&model, &closed_loop, &out.join("closed_loop"), &mut diagnostics)?;
    steps.push(step(
        "simulate closed loop (reference state gain)",
        if reference { "completed, decaying" } else { "recorded only" },
        closed["status"].as_str().unwrap_or("error"),
        reference.then(|| closed["status"] == "completed"),
    ));

    // Discrepancies.
    let open_pole = open["reduced_poles"][0][0].as_f64().unwrap_or(f64::NAN);
    let discrepancy = vec![
        Discrepancy {
            id: "open_loop_divergence",
            reference_claim: "the published zero-input response of the open-loop heat model grows without bound".into(),
            computed: format!(
                "after eliminating the algebraic state the open-loop recursion has pole {open_pole:.6} inside the unit \
                 circle; the {GRID}x{GRID} simulation decays (terminal sup-norm {:.3e}, diverged = {open_diverged})",
                open["terminal_sup_norm"].as_f64().unwrap_or(f64::NAN)
            ),
            resolution: "dynamics are not altered to match the published plot; the computed decay is reported".into(),
        },
        Discrepancy {
            id: "state_feedback_lmi_vs_reference_gain",
            reference_claim: format!(
                "the state-feedback gain K = {REFERENCE_STATE_GAIN:?} is reported as the solution of the state-feedback LMI"
            ),
            computed: format!(
                "the state-feedback LMI is {} for singular E (null-space argument), so this K cannot come from it; \
                 independently, K is {} on this model with reduced pole {:.6}",
                steps.iter().find(|s| s.name == "synthesize state faithful").map(|s| s.observed.as_str()).unwrap_or("?"),
                if state_check.verified { "verified stabilizing" } else { "not verified" },
                state_check.reduced_spectral_radius.unwrap_or(f64::NAN),
            ),
            resolution: "the gain's stabilizing property is checked directly; its synthesis path is not reproduced".into(),
        },
        Discrepancy {
            id: "output_feedback_gain_dimension",
            reference_claim: format!(
                "the output-feedback gain is given as the 1x2 row {REFERENCE_OUTPUT_GAIN:?} (and elsewhere as {REFERENCE_STATE_GAIN:?})"
            ),
            computed: format!(
                "u = -K y with one input and one output needs a 1x1 K; the 1x2 entry is rejected ({out_observed}). \
                 Scalar gains k give the reduced pole (a - 0.1 b k) / (1 + 0.1 b k) for this model"
            ),
            resolution: "the dimensionally consistent scalar form is implemented; the published entry is not used".into(),
        },
    ];

    let consistent = steps.iter().all(|s| s.consistent != Some(false));
    for s in steps.iter().filter(|s| s.consistent == Some(false)) {
        diagnostics.push(Diagnostic::new(
            Severity::Warning,
            "UNEXPECTED_OUTCOME",
            format!("{}: expected {}, observed {}", s.name, s.expected, s.observed),
        ));
    }
    let result = json!({
        "status": if consistent { "consistent" } else { "inconsistent" },
        "params": {
            "dx": dx,
            "dt": dt,
            "paper_rounding": paper_rounding,
            "a": model.a()[(0, 0)],
            "b": model.b()[(0, 0)],
        },
        "steps": steps,
        "analysis": analysis.result,
        "certify": certs,
        "synthesis": synth,
        "reference_state_gain": state_check,
        "reference_output_gain": match &out_check {
            Ok(r) => json!(r),
            Err(e) => json!({ "error_code": e.code(), "message": e.to_string() }),
        },
        "simulations": { "open_loop": open, "closed_loop": closed },
        "DISCREPANCY": discrepancy,
        "artifacts_dir": out.display().to_string(),
    });
    Ok(Partial { summary: Some(ModelSummary::of(&model)), result, diagnostics })
}

fn run_simulation(model: &Roesser2D, cl: &ClosedLoop, dir: &Path, diagnostics: &mut Vec<Diagnostic>) -> Result<Value> {
    let reduced = match reduce_pointwise(model, cl) {
        Ok(r) => r,
        Err(e) => {
            diagnostics.push(Diagnostic::from_error(&e));
            return Ok(json!({ "status": "error", "error_code": e.code(), "diverged": true }));
        }
    };
    let grid = simulate(model, &reduced, &BoundaryData::unit(&reduced), GRID, GRID, None)?;
    let files = write_trajectory(&grid, dir, Channel::default())?;
    Ok(simulation_value(&grid, &reduced.reduced_poles(), files))
}
