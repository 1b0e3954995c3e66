//! LMI conditions for singular Roesser systems.
//!
//! With `P = diag(P_h, P_v)` symmetric, three forms are assembled:
//!
//! | variant          | strict constraint                                  | extra            |
//! |------------------|----------------------------------------------------|------------------|
//! | `Faithful`       | `[[-E'PE, A'P + W], [PA + W', +P]] < 0`             | `E'PE >= 0`      |
//! | `SignCorrected`  | `[[-E'PE, A'P + W], [PA + W', -P]] < 0`             | `E'PE >= 0`, `P >= eps_P I` |
//! | `Eq12Direct`     | `A'PA - E'PE < 0` (stability only, `P` sign-free)   | `E'PE >= 0`      |
//!
//! `W` is zero for stability, `Z` for state feedback (`Z = K'B'P`) and
//! `-F'X` for output feedback (`X = K'B'P`, `u = -K y`). The sign-corrected
//! form is the congruence `diag(I, P)` of the Schur-complement form, so for
//! `P > 0` it is equivalent to `A'PA - E'PE < 0`. The faithful form keeps the
//! `+P` lower-right block; for singular `E` it is unsatisfiable (see
//! [`structural_precheck`]).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, ser_mat, ser_opt_mat};
use crate::model::{Roesser2D, TAU_RANK};
use crate::sdp::{
    self, check_point, AffineMatrixConstraint, SdpProblem, Sense, SolveOptions, SolveOutcome, Solver,
    StructuralWitness,
};

/// Lower bound on `P` in the sign-corrected variant.
pub const EPS_P: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LmiVariant {
    #[serde(rename = "faithful")]
    Faithful,
    #[serde(rename = "sign-corrected")]
    SignCorrected,
    #[serde(rename = "eq12")]
    Eq12Direct,
}

impl LmiVariant {
    pub const ALL: [LmiVariant; 3] = [Self::Faithful, Self::SignCorrected, Self::Eq12Direct];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Faithful => "faithful",
            Self::SignCorrected => "sign-corrected",
            Self::Eq12Direct => "eq12",
        }
    }
}

impl std::str::FromStr for LmiVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "faithful" => Ok(Self::Faithful),
            "sign-corrected" => Ok(Self::SignCorrected),
            "eq12" => Ok(Self::Eq12Direct),
            other => Err(Error::InvalidParams(format!(
                "unknown variant `{other}` (expected faithful, sign-corrected or eq12)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Stability,
    StateFeedback,
    OutputFeedback,
}

/// Extra decision matrix appended after `P_h`, `P_v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtraBlock {
    None,
    /// `Z`, `n x n`.
    Z { n: usize },
    /// `X`, `p x n`.
    X { p: usize, n: usize },
}

/// Packing of the decision vector: upper triangle of `P_h` row-major, then
/// upper triangle of `P_v`, then the extra block row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VariableLayout {
    pub n_h: usize,
    pub n_v: usize,
    pub extra: ExtraBlock,
}

fn tri(k: usize) -> usize {
    k * (k + 1) / 2
}

impl VariableLayout {
    pub fn n(&self) -> usize {
        self.n_h + self.n_v
    }

    pub fn p_len(&self) -> usize {
        tri(self.n_h) + tri(self.n_v)
    }

    pub fn extra_shape(&self) -> Option<(usize, usize)> {
        match self.extra {
            ExtraBlock::None => None,
            ExtraBlock::Z { n } => Some((n, n)),
            ExtraBlock::X { p, n } => Some((p, n)),
        }
    }

    pub fn len(&self) -> usize {
        self.p_len() + self.extra_shape().map(|(r, c)| r * c).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pack(&self, p_h: &DMatrix<f64>, p_v: &DMatrix<f64>, extra: Option<&DMatrix<f64>>) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.len());
        for block in [p_h, p_v] {
            for r in 0..block.nrows() {
                for c in r..block.ncols() {
                    y.push(block[(r, c)]);
                }
            }
        }
        if let (Some((rows, cols)), Some(x)) = (self.extra_shape(), extra) {
            for r in 0..rows {
                for c in 0..cols {
                    y.push(x[(r, c)]);
                }
            }
        }
        y
    }

    /// `(P_h, P_v, extra)`; `P_h`, `P_v` are symmetric by construction.
    pub fn unpack(&self, y: &[f64]) -> (DMatrix<f64>, DMatrix<f64>, Option<DMatrix<f64>>) {
        let mut k = 0;
        let mut sym = |size: usize| {
            let mut m = DMatrix::zeros(size, size);
            for r in 0..size {
                for c in r..size {
                    m[(r, c)] = y[k];
                    m[(c, r)] = y[k];
                    k += 1;
                }
            }
            m
        };
        let p_h = sym(self.n_h);
        let p_v = sym(self.n_v);
        let extra = self.extra_shape().map(|(rows, cols)| DMatrix::from_fn(rows, cols, |r, c| y[k + r * cols + c]));
        (p_h, p_v, extra)
    }

    pub fn full_p(&self, y: &[f64]) -> DMatrix<f64> {
        let (p_h, p_v, _) = self.unpack(y);
        linalg::block_diag(&p_h, &p_v)
    }
}

/// Assembled LMI problem plus the data needed for prechecks and certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiProblem {
    pub kind: ProblemKind,
    pub variant: LmiVariant,
    pub layout: VariableLayout,
    pub sdp: SdpProblem,
    pub e: DMatrix<f64>,
    pub a: DMatrix<f64>,
}

/// Strictness margin `1e-6 (1 + |A|_2 + |E|_2)`.
pub fn strictness_epsilon(e: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
    1e-6 * (1.0 + linalg::norm2(a) + linalg::norm2(e))
}

/// Coupling term in the (1,2) block.
enum Coupling<'a> {
    None,
    Z,
    X(&'a DMatrix<f64>),
}

fn assemble(
    model: &Roesser2D,
    a: &DMatrix<f64>,
    variant: LmiVariant,
    kind: ProblemKind,
    coupling: Coupling<'_>,
) -> LmiProblem {
    let dims = model.dims();
    let n = dims.n();
    let e = model.e();
    let extra = match coupling {
        Coupling::None => ExtraBlock::None,
        Coupling::Z => ExtraBlock::Z { n },
        Coupling::X(f) => ExtraBlock::X { p: f.nrows(), n },
    };
    let layout = VariableLayout { n_h: dims.n_h, n_v: dims.n_v, extra };
    let d = layout.len();

    // Unit vectors of the packed space, split into (P, W) contributions.
    let mut p_basis = Vec::with_capacity(d);
    let mut w_basis = Vec::with_capacity(d);
    for i in 0..d {
        let mut y = vec![0.0; d];
        y[i] = 1.0;
        let (_, _, x) = layout.unpack(&y);
        p_basis.push(layout.full_p(&y));
        let w = match (&coupling, x) {
            (Coupling::Z, Some(z)) => z,
            (Coupling::X(f), Some(x)) => -(f.transpose() * x),
            _ => DMatrix::zeros(n, n),
        };
        w_basis.push(w);
    }

    let etpe = |p: &DMatrix<f64>| e.transpose() * p * e;
    let mut constraints = Vec::new();
    match variant {
        LmiVariant::Faithful | LmiVariant::SignCorrected => {
            let sign = if variant == LmiVariant::Faithful { 1.0 } else { -1.0 };
            let gi = p_basis
                .iter()
                .zip(&w_basis)
                .map(|(p, w)| linalg::sym_block2(&-etpe(p), &(a.transpose() * p + w), &(p * sign)))
                .collect();
            constraints.push(AffineMatrixConstraint::new("block", Sense::NegDef, DMatrix::zeros(2 * n, 2 * n), gi));
        }
        LmiVariant::Eq12Direct => {
            let gi = p_basis.iter().map(|p| a.transpose() * p * a - etpe(p)).collect();
            constraints.push(AffineMatrixConstraint::new("psi", Sense::NegDef, DMatrix::zeros(n, n), gi));
        }
    }
    constraints.push(AffineMatrixConstraint::new(
        "ETPE",
        Sense::Psd,
        DMatrix::zeros(n, n),
        p_basis.iter().map(etpe).collect(),
    ));
    if variant == LmiVariant::SignCorrected {
        constraints.push(AffineMatrixConstraint::new(
            "P_lower_bound",
            Sense::Psd,
            DMatrix::identity(n, n) * -EPS_P,
            p_basis.clone(),
        ));
    }

    LmiProblem {
        kind,
        variant,
        layout,
        sdp: SdpProblem { n_vars: d, constraints, epsilon: strictness_epsilon(e, a) },
        e: e.clone(),
        a: a.clone(),
    }
}

pub fn build_stability(model: &Roesser2D, variant: LmiVariant) -> LmiProblem {
    assemble(model, model.a(), variant, ProblemKind::Stability, Coupling::None)
}

/// Stability LMI for `E x+ = A_eff x` (e.g. a closed loop).
pub fn build_stability_for(model: &Roesser2D, a_eff: &DMatrix<f64>, variant: LmiVariant) -> LmiProblem {
    assemble(model, a_eff, variant, ProblemKind::Stability, Coupling::None)
}

pub fn build_state_feedback(model: &Roesser2D, variant: LmiVariant) -> Result<LmiProblem> {
    if model.dims().m == 0 {
        return Err(Error::NoActuation);
    }
    if variant == LmiVariant::Eq12Direct {
        return Err(Error::VariantUnsupported(variant.name().into()));
    }
    Ok(assemble(model, model.a(), variant, ProblemKind::StateFeedback, Coupling::Z))
}

pub fn build_output_feedback(model: &Roesser2D, variant: LmiVariant) -> Result<LmiProblem> {
    if model.dims().m == 0 {
        return Err(Error::NoActuation);
    }
    if model.dims().p == 0 {
        return Err(Error::NoMeasurement);
    }
    if variant == LmiVariant::Eq12Direct {
        return Err(Error::VariantUnsupported(variant.name().into()));
    }
    Ok(assemble(model, model.a(), variant, ProblemKind::OutputFeedback, Coupling::X(model.f())))
}

/// For singular `E` and the block variants, any `v` in `null(E)` embedded as
/// `w = (v, 0)` gives `w' G(y) w = v'(-E'PE)v = 0` for every `y`, so the block
/// matrix can never be `<= -eps I`.
pub fn structural_precheck(problem: &LmiProblem) -> Option<StructuralWitness> {
    if problem.variant == LmiVariant::Eq12Direct {
        return None;
    }
    let null = linalg::null_space(&problem.e, TAU_RANK);
    if null.ncols() == 0 {
        return None;
    }
    let mut v: DVector<f64> = null.column(0).into_owned();
    if v.iter().copied().find(|x| x.abs() > 1e-14).unwrap_or(1.0) < 0.0 {
        v.neg_mut();
    }
    let n = v.len();
    let mut w = DVector::zeros(2 * n);
    w.rows_mut(0, n).copy_from(&v);

    let block = &problem.sdp.constraints[0];
    let quad = |g: &DMatrix<f64>| (w.transpose() * g * &w)[(0, 0)];
    let scale = 1.0 + block.gi.iter().map(|g| g.amax()).fold(0.0, f64::max);
    let annihilated = block.gi.iter().all(|g| quad(g).abs() <= 1e-12 * scale);
    if !annihilated || quad(&block.g0) < -1e-12 * scale {
        return None;
    }
    Some(StructuralWitness {
        constraint_index: 0,
        direction: w.iter().copied().collect(),
        null_vector: v.iter().copied().collect(),
        explanation: "v in null(E) makes the (1,1) block quadratic form v'(-E'PE)v vanish for every P, \
                      so the block matrix has a nonnegative Rayleigh quotient and cannot be negative definite"
            .into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    #[serde(serialize_with = "ser_mat")]
    pub p_h: DMatrix<f64>,
    #[serde(serialize_with = "ser_mat")]
    pub p_v: DMatrix<f64>,
    /// `Z` (state feedback) or `X` (output feedback).
    #[serde(serialize_with = "ser_opt_mat")]
    pub extra: Option<DMatrix<f64>>,
    pub margin: f64,
    pub psd_min_eig: f64,
    pub variant: LmiVariant,
}

impl Certificate {
    pub fn p(&self) -> DMatrix<f64> {
        linalg::block_diag(&self.p_h, &self.p_v)
    }
}

impl LmiProblem {
    pub fn evaluate(&self, y: &[f64]) -> Vec<DMatrix<f64>> {
        self.sdp.constraints.iter().map(|c| c.eval(y)).collect()
    }

    pub fn margin_at(&self, y: &[f64]) -> f64 {
        check_point(&self.sdp, y).margin
    }

    pub fn certificate(&self, y: &[f64]) -> Certificate {
        let (p_h, p_v, extra) = self.layout.unpack(y);
        let check = check_point(&self.sdp, y);
        Certificate { p_h, p_v, extra, margin: check.margin, psd_min_eig: check.psd_min_eig, variant: self.variant }
    }

    /// Packed vector for a certificate-like triple.
    pub fn pack(&self, p_h: &DMatrix<f64>, p_v: &DMatrix<f64>, extra: Option<&DMatrix<f64>>) -> Vec<f64> {
        self.layout.pack(p_h, p_v, extra)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyResult {
    pub variant: LmiVariant,
    pub kind: ProblemKind,
    pub n_vars: usize,
    pub epsilon: f64,
    pub precheck: Option<StructuralWitness>,
    pub solver_skipped: bool,
    pub outcome: SolveOutcome,
    pub certificate: Option<Certificate>,
}

/// Precheck, then solve unless the precheck proves infeasibility and
/// `force_solve` is off.
pub fn certify(problem: &LmiProblem, solver: &Solver, options: &SolveOptions, force_solve: bool) -> Result<CertifyResult> {
    let precheck = structural_precheck(problem);
    let skip = precheck.is_some() && !force_solve;
    let outcome = if skip {
        let y0 = vec![0.0; problem.sdp.n_vars];
        SolveOutcome::Infeasible { best_margin_found: problem.margin_at(&y0), structural: precheck.clone() }
    } else {
        match solver.solve(&problem.sdp, options)? {
            SolveOutcome::Infeasible { best_margin_found, structural: None } if precheck.is_some() => {
                SolveOutcome::Infeasible { best_margin_found, structural: precheck.clone() }
            }
            other => other,
        }
    };
    let certificate = match &outcome {
        SolveOutcome::Feasible { y, .. } => Some(problem.certificate(y)),
        _ => None,
    };
    Ok(CertifyResult {
        variant: problem.variant,
        kind: problem.kind,
        n_vars: problem.sdp.n_vars,
        epsilon: problem.sdp.epsilon,
        precheck,
        solver_skipped: skip,
        outcome,
        certificate,
    })
}

/// Convenience wrapper using the built-in engine.
pub fn certify_default(problem: &LmiProblem, force_solve: bool) -> Result<CertifyResult> {
    certify(problem, &Solver::new(), &SolveOptions::default(), force_solve)
}

/// `A'PA - E'PE`.
pub fn psi(e: &DMatrix<f64>, a: &DMatrix<f64>, p: &DMatrix<f64>) -> DMatrix<f64> {
    a.transpose() * p * a - e.transpose() * p * e
}

/// Lyapunov difference `x'(A'PA - E'PE)x` along `E x+ = A x`.
pub fn lyapunov_delta(e: &DMatrix<f64>, a: &DMatrix<f64>, p: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    let ax = a * x;
    let ex = e * x;
    (ax.transpose() * p * &ax)[(0, 0)] - (ex.transpose() * p * &ex)[(0, 0)]
}

/// Eigenvalue check of a certificate computed from `P` alone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependentCheck {
    /// Largest eigenvalue of `A'PA - E'PE`.
    pub psi_max_eig: f64,
    /// Smallest eigenvalue of `E'PE`.
    pub etpe_min_eig: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Passes when `A'PA - E'PE <= -tol` and `E'PE >= -tol` (eigenvalue-wise).
pub fn independent_check(e: &DMatrix<f64>, a: &DMatrix<f64>, p: &DMatrix<f64>, tol: f64) -> IndependentCheck {
    let psi_max_eig = linalg::lambda_max(&psi(e, a, p));
    let etpe_min_eig = linalg::lambda_min(&(e.transpose() * p * e));
    IndependentCheck { psi_max_eig, etpe_min_eig, tolerance: tol, passed: psi_max_eig <= -tol && etpe_min_eig >= -tol }
}

/// Re-export so callers need a single import for the common path.
pub use sdp::solve_feasibility;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::{build_heat_model, HeatParams};

    fn heat() -> Roesser2D {
        build_heat_model(&HeatParams::paper()).unwrap()
    }

    fn diag_p(h: f64, v: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        (DMatrix::from_element(1, 1, h), DMatrix::from_element(1, 1, v))
    }

    #[test]
    fn layout_round_trip() {
        let layout = VariableLayout { n_h: 2, n_v: 1, extra: ExtraBlock::X { p: 2, n: 3 } };
        assert_eq!(layout.len(), 3 + 1 + 6);
        let y: Vec<f64> = (0..layout.len()).map(|k| k as f64 + 0.5).collect();
        let (ph, pv, x) = layout.unpack(&y);
        assert_eq!(ph, ph.transpose());
        assert_eq!(layout.pack(&ph, &pv, x.as_ref()), y);
    }

    #[test]
    fn eq12_at_hand_certificate() {
        let prob = build_stability(&heat(), LmiVariant::Eq12Direct);
        let (ph, pv) = diag_p(1.0, -1.0);
        let y = prob.pack(&ph, &pv, None);
        let mats = prob.evaluate(&y);
        let expected = DMatrix::from_row_slice(2, 2, &[-1.0, 0.476, 0.476, -1.0]);
        assert!((&mats[0] - expected).amax() < 1e-15);
        let eig = linalg::sym_eigenvalues(&mats[0]);
        assert!((eig[0] + 1.476).abs() < 1e-12 && (eig[1] + 0.524).abs() < 1e-12);
        assert_eq!(mats[1], DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert!(check_point(&prob.sdp, &y).ok);
        let chk = independent_check(&prob.e, &prob.a, &prob.layout.full_p(&y), 1e-9);
        assert!(chk.passed && (chk.psi_max_eig + 0.524).abs() < 1e-12);
    }

    #[test]
    fn zero_p_is_never_negative_definite() {
        for v in [LmiVariant::Faithful, LmiVariant::SignCorrected, LmiVariant::Eq12Direct] {
            let prob = build_stability(&heat(), v);
            let y = vec![0.0; prob.sdp.n_vars];
            assert!(prob.evaluate(&y)[0].iter().all(|&x| x == 0.0));
            assert!(prob.margin_at(&y) <= 0.0);
        }
    }

    #[test]
    fn sign_corrected_at_identity_has_unit_margin() {
        let m = Roesser2D::autonomous(1, 1, DMatrix::identity(2, 2), DMatrix::zeros(2, 2)).unwrap();
        let prob = build_stability(&m, LmiVariant::SignCorrected);
        let (ph, pv) = diag_p(1.0, 1.0);
        let y = prob.pack(&ph, &pv, None);
        assert_eq!(prob.evaluate(&y)[0], -DMatrix::<f64>::identity(4, 4));
        assert!((prob.sdp.constraints[0].margin_at(&y) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn feedback_layout_sizes() {
        let sf = build_state_feedback(&heat(), LmiVariant::Faithful).unwrap();
        assert_eq!(sf.sdp.n_vars, 6);
        let of = build_output_feedback(&heat(), LmiVariant::Faithful).unwrap();
        assert_eq!(of.sdp.n_vars, 4);
        assert_eq!(of.layout.extra, ExtraBlock::X { p: 1, n: 2 });
    }

    #[test]
    fn feedback_builder_errors() {
        let auto = Roesser2D::autonomous(1, 1, DMatrix::identity(2, 2), DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(build_state_feedback(&auto, LmiVariant::Faithful).unwrap_err(), Error::NoActuation);
        assert_eq!(build_output_feedback(&auto, LmiVariant::Faithful).unwrap_err(), Error::NoActuation);
        assert!(matches!(build_state_feedback(&heat(), LmiVariant::Eq12Direct), Err(Error::VariantUnsupported(_))));
        assert!(matches!(build_output_feedback(&heat(), LmiVariant::Eq12Direct), Err(Error::VariantUnsupported(_))));
        let h = heat();
        let no_y = Roesser2D::new(
            crate::model::PartitionDims::new(1, 1, 1, 0).unwrap(),
            h.e().clone(),
            h.a().clone(),
            h.b().clone(),
            DMatrix::zeros(0, 2),
        )
        .unwrap();
        assert_eq!(build_output_feedback(&no_y, LmiVariant::Faithful).unwrap_err(), Error::NoMeasurement);
    }

    #[test]
    fn output_block_at_zero_x_is_a_transpose() {
        let prob = build_output_feedback(&heat(), LmiVariant::Faithful).unwrap();
        let (ph, pv) = diag_p(1.0, 1.0);
        let x = DMatrix::zeros(1, 2);
        let y = prob.pack(&ph, &pv, Some(&x));
        let block = &prob.evaluate(&y)[0];
        assert_eq!(block.view((0, 2), (2, 2)).into_owned(), heat().a().transpose());
    }

    #[test]
    fn precheck_finds_null_direction_of_heat_e() {
        for v in [LmiVariant::Faithful, LmiVariant::SignCorrected] {
            let w = structural_precheck(&build_stability(&heat(), v)).expect("singular E");
            assert_eq!(w.null_vector, vec![0.0, 1.0]);
            assert_eq!(w.direction, vec![0.0, 1.0, 0.0, 0.0]);
        }
        assert!(structural_precheck(&build_stability(&heat(), LmiVariant::Eq12Direct)).is_none());
        let full = Roesser2D::autonomous(1, 1, DMatrix::identity(2, 2), DMatrix::zeros(2, 2)).unwrap();
        assert!(structural_precheck(&build_stability(&full, LmiVariant::Faithful)).is_none());
    }

    #[test]
    fn certify_skips_solver_on_structural_infeasibility() {
        let r = certify_default(&build_stability(&heat(), LmiVariant::Faithful), false).unwrap();
        assert!(r.solver_skipped);
        assert!(matches!(r.outcome, SolveOutcome::Infeasible { structural: Some(_), .. }));
    }

    #[test]
    fn forced_solve_still_reports_precheck() {
        let r = certify_default(&build_stability(&heat(), LmiVariant::Faithful), true).unwrap();
        assert!(!r.solver_skipped);
        assert!(r.precheck.is_some());
        assert!(!r.outcome.is_feasible(), "{:?}", r.outcome);
    }

    #[test]
    fn lyapunov_delta_examples() {
        let h = heat();
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let x = DVector::from_row_slice(&[1.0, 0.476]);
        // [1, .476] [[-1, .476], [.476, -1]] [1, .476]' = -1 + 2(.476)^2 - (.476)^2
        let expected = -1.0 + 0.476 * 0.476;
        assert!((lyapunov_delta(h.e(), h.a(), &p, &x) - expected).abs() < 1e-14);
        assert!((expected + 0.773424).abs() < 1e-12);
        assert_eq!(lyapunov_delta(h.e(), h.a(), &p, &DVector::zeros(2)), 0.0);
        let id = DMatrix::identity(2, 2);
        let ones = DVector::from_element(2, 1.0);
        assert_eq!(lyapunov_delta(&id, &DMatrix::zeros(2, 2), &id, &ones), -2.0);
    }
}
