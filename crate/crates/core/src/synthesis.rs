//! Feedback gain recovery and independent verification.
//!
//! A feasible point `(P, Z)` of the state-feedback LMI yields `K^T = Z pinv(B^T P)`
//! (output feedback: `K^T = X pinv(B^T P)`). The gain is only returned after
//! [`verify_gain`] has checked the closed loop on its own terms.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::admissibility::{analyze, AdmissibilityReport, ScanOptions};
use crate::error::{Error, Result};
use crate::linalg::{self, ser_mat};
use crate::lmi::{
    build_output_feedback, build_stability_for, build_state_feedback, certify, Certificate, CertifyResult,
    LmiProblem, LmiVariant,
};
use crate::model::{ClosedLoop, FeedbackMode, Roesser2D};
use crate::sdp::{SolveOptions, SolveOutcome, Solver};
use crate::simulate::{reduce_pointwise, simulate_unit, DecaySummary};

pub const PINV_TOL: f64 = 1e-10;
pub const MAX_RECOVERY_RESIDUAL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthesisOptions {
    pub solve: SolveOptions,
    pub scan: ScanOptions,
    /// Grid for the decay simulation; `None` skips it.
    pub simulation_grid: Option<(usize, usize)>,
    pub force_solve: bool,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default(),
            scan: ScanOptions::default(),
            simulation_grid: Some((50, 50)),
            force_solve: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub mode: FeedbackMode,
    #[serde(serialize_with = "ser_mat")]
    pub gain: DMatrix<f64>,
    #[serde(serialize_with = "ser_mat")]
    pub closed_loop_matrix: DMatrix<f64>,
    /// Solver outcome of the direct condition on the closed loop.
    pub eq12: SolveOutcome,
    pub eq12_certificate: Option<Certificate>,
    pub analysis: AdmissibilityReport,
    /// Eigenvalues `[re, im]` of the reduced recursion, when it exists.
    pub reduced_poles: Option<Vec<[f64; 2]>>,
    pub reduced_spectral_radius: Option<f64>,
    pub simulation_decay: Option<DecaySummary>,
    pub diagnostics: Vec<String>,
    pub verified: bool,
}

impl VerificationReport {
    pub fn spectrum_stable(&self) -> bool {
        self.analysis.spectrum.as_ref().is_some_and(|s| s.verdict.is_stable())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainResult {
    #[serde(serialize_with = "ser_mat")]
    pub k: DMatrix<f64>,
    pub recovery_residual: f64,
    pub verification: VerificationReport,
    /// Absent when `B = 0` and no LMI was solved.
    pub certificate: Option<Certificate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SynthesisOutcome {
    Verified(GainResult),
    /// The LMI was feasible but the recovered gain failed the residual bound
    /// or verification.
    RecoveryInconsistent { candidate: GainResult, reason: String },
    Infeasible { lmi: CertifyResult },
    Indeterminate { lmi: CertifyResult },
}

impl SynthesisOutcome {
    pub fn status(&self) -> &'static str {
        match self {
            Self::Verified(_) => "verified",
            Self::RecoveryInconsistent { .. } => "recovery_inconsistent",
            Self::Infeasible { .. } => "infeasible",
            Self::Indeterminate { .. } => "indeterminate",
        }
    }

    pub fn gain(&self) -> Option<&GainResult> {
        match self {
            Self::Verified(g) => Some(g),
            _ => None,
        }
    }

    /// The error form of a `RecoveryInconsistent` outcome.
    pub fn into_result(self) -> Result<GainResult> {
        match self {
            Self::Verified(g) => Ok(g),
            Self::RecoveryInconsistent { reason, .. } => Err(Error::RecoveryInconsistent(reason)),
            Self::Infeasible { .. } => Err(Error::BadProblem("synthesis LMI infeasible".into())),
            Self::Indeterminate { .. } => Err(Error::BadProblem("synthesis LMI indeterminate".into())),
        }
    }
}

/// `K^T = W pinv(B^T P)` and the relative residual `|W - K^T B^T P|_F / max(1, |W|_F)`.
pub fn recover_gain(b: &DMatrix<f64>, p: &DMatrix<f64>, w: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let btp = b.transpose() * p;
    let kt = w * linalg::pinv(&btp, PINV_TOL);
    let residual = recovery_residual(b, p, w, &kt.transpose());
    (kt.transpose(), residual)
}

pub fn recovery_residual(b: &DMatrix<f64>, p: &DMatrix<f64>, w: &DMatrix<f64>, k: &DMatrix<f64>) -> f64 {
    let diff = w - k.transpose() * b.transpose() * p;
    diff.norm() / w.norm().max(1.0)
}

pub fn synthesize_state_feedback(model: &Roesser2D, variant: LmiVariant, opts: &SynthesisOptions) -> Result<SynthesisOutcome> {
    let problem = build_state_feedback(model, variant)?;
    synthesize(model, FeedbackMode::State, problem, opts)
}

pub fn synthesize_output_feedback(model: &Roesser2D, variant: LmiVariant, opts: &SynthesisOptions) -> Result<SynthesisOutcome> {
    let problem = build_output_feedback(model, variant)?;
    synthesize(model, FeedbackMode::Output, problem, opts)
}

fn synthesize(model: &Roesser2D, mode: FeedbackMode, problem: LmiProblem, opts: &SynthesisOptions) -> Result<SynthesisOutcome> {
    let d = model.dims();
    let k_cols = match mode {
        FeedbackMode::State => d.n(),
        FeedbackMode::Output => d.p,
    };
    if model.b().iter().all(|&x| x == 0.0) {
        // The input cannot act on the plant; the loop is the open loop.
        let k = DMatrix::zeros(d.m, k_cols);
        let verification = verify_gain(model, &k, mode, opts)?;
        let certificate = verification.eq12_certificate.clone();
        let result = GainResult { k, recovery_residual: 0.0, verification, certificate };
        return Ok(finish(result));
    }

    let lmi = certify(&problem, &Solver::new(), &opts.solve, opts.force_solve)?;
    let cert = match (&lmi.outcome, &lmi.certificate) {
        (SolveOutcome::Feasible { .. }, Some(c)) => c.clone(),
        (SolveOutcome::Infeasible { .. }, _) => return Ok(SynthesisOutcome::Infeasible { lmi }),
        _ => return Ok(SynthesisOutcome::Indeterminate { lmi }),
    };
    let w = cert.extra.as_ref().expect("feedback layouts carry an extra block");
    let (k, residual) = recover_gain(model.b(), &cert.p(), w);
    let verification = verify_gain(model, &k, mode, opts)?;
    let result = GainResult { k, recovery_residual: residual, verification, certificate: Some(cert) };
    if residual > MAX_RECOVERY_RESIDUAL {
        let reason = format!(
            "recovery residual {residual:.3e} exceeds {MAX_RECOVERY_RESIDUAL:e}: the LMI solution is not of the form K'B'P"
        );
        return Ok(SynthesisOutcome::RecoveryInconsistent { candidate: result, reason });
    }
    Ok(finish(result))
}

fn finish(result: GainResult) -> SynthesisOutcome {
    if result.verification.verified {
        SynthesisOutcome::Verified(result)
    } else {
        let reason = format!("recovered gain failed verification: {}", result.verification.diagnostics.join("; "));
        SynthesisOutcome::RecoveryInconsistent { candidate: result, reason }
    }
}

/// Closed-loop checks: (a) the direct Lyapunov LMI, (b) the spectrum scan,
/// (c) an optional decay simulation. Only (b) and a feasible (a) decide the
/// verdict; (a) is sufficient, not necessary.
pub fn verify_gain(model: &Roesser2D, k: &DMatrix<f64>, mode: FeedbackMode, opts: &SynthesisOptions) -> Result<VerificationReport> {
    let closed_loop = ClosedLoop::with_gain(mode, k.clone());
    let a_cl = closed_loop.effective_a(model)?;
    let cl_model = model.with_a(a_cl.clone())?;
    let mut diagnostics = Vec::new();

    let lmi = build_stability_for(model, &a_cl, LmiVariant::Eq12Direct);
    let eq12 = certify(&lmi, &Solver::new(), &opts.solve, false)?;

    let analysis = analyze(&cl_model, &opts.scan);
    let stable = analysis.spectrum.as_ref().is_some_and(|s| s.verdict.is_stable());
    match &analysis.spectrum {
        None => diagnostics.push("closed loop is not regular".into()),
        Some(s) if !s.verdict.is_stable() => diagnostics.push(format!("spectrum scan: {}", s.verdict.label())),
        _ => {}
    }
    if analysis.causal == Some(false) {
        diagnostics.push("closed loop is not causal".into());
    }

    let (reduced_poles, reduced_spectral_radius) = match reduce_pointwise(model, &closed_loop) {
        Ok(r) => (Some(r.reduced_poles()), Some(r.spectral_radius())),
        Err(e) => {
            diagnostics.push(format!("pointwise reduction failed: {e}"));
            (None, None)
        }
    };

    let simulation_decay = match opts.simulation_grid {
        Some((n1, n2)) if reduced_poles.is_some() => match simulate_unit(model, &closed_loop, n1, n2) {
            Ok(g) => Some(DecaySummary::from(&g)),
            Err(e) => {
                diagnostics.push(format!("simulation failed: {e}"));
                None
            }
        },
        _ => None,
    };

    let eq12_ok = match &eq12.certificate {
        Some(c) => c.margin > 0.0,
        None => {
            diagnostics.push(format!("direct Lyapunov LMI: {} (sufficient condition only)", eq12.outcome.status()));
            true
        }
    };
    Ok(VerificationReport {
        mode,
        gain: k.clone(),
        closed_loop_matrix: a_cl,
        eq12: eq12.outcome,
        eq12_certificate: eq12.certificate,
        analysis,
        reduced_poles,
        reduced_spectral_radius,
        simulation_decay,
        diagnostics,
        verified: stable && eq12_ok,
    })
}
