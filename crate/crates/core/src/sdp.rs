//! Feasibility engine for systems of affine symmetric-matrix constraints.
//!
//! Each constraint is `G(y) = G0 + sum_i y_i G_i` with a sense:
//!
//! * `NegDef`: `G(y) <= -eps I` (strict, contributes `-lambda_max(G)` to the margin)
//! * `Psd`: `G(y) >= 0` (contributes `lambda_min` of `G` restricted to the
//!   complement of its structural kernel, the subspace every `G_i` annihilates)
//!
//! The built-in engine maximizes the common margin `t` over `(y, t)` inside the
//! box `|y|_inf <= R` with a log-det barrier path-following method. It stops as
//! soon as `t >= 2 eps` and declares infeasibility only once the barrier's
//! duality-gap bound proves no point with margin `>= 2 eps` exists in the box.
//! Any `Feasible` outcome, from any backend, is re-verified with a fresh
//! eigenvalue computation before it is returned.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance on the raw minimum eigenvalue of `Psd` constraints.
pub const PSD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Sense {
    NegDef,
    Psd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrixConstraint {
    pub label: String,
    pub sense: Sense,
    pub g0: DMatrix<f64>,
    pub gi: Vec<DMatrix<f64>>,
}

impl AffineMatrixConstraint {
    pub fn new(label: impl Into<String>, sense: Sense, g0: DMatrix<f64>, gi: Vec<DMatrix<f64>>) -> Self {
        Self { label: label.into(), sense, g0, gi }
    }

    pub fn size(&self) -> usize {
        self.g0.nrows()
    }

    pub fn eval(&self, y: &[f64]) -> DMatrix<f64> {
        let mut g = self.g0.clone();
        for (yi, gi) in y.iter().zip(&self.gi) {
            if *yi != 0.0 {
                g += gi * *yi;
            }
        }
        g
    }

    /// Orthonormal basis for the complement of the common kernel of
    /// `G0, G_1, ..., G_d`.
    pub fn range_basis(&self) -> DMatrix<f64> {
        let n = self.size();
        let mut h = &self.g0 * &self.g0;
        for g in &self.gi {
            h += g * g;
        }
        let (vals, vecs) = linalg::sym_eigen(&h);
        let top = vals.iter().copied().fold(0.0, f64::max);
        let cutoff = 1e-20 * top;
        let keep: Vec<usize> = (0..n).filter(|&k| top > 0.0 && vals[k] > cutoff).collect();
        DMatrix::from_fn(n, keep.len(), |r, c| vecs[(r, keep[c])])
    }

    /// Margin contribution at `y`.
    pub fn margin_at(&self, y: &[f64]) -> f64 {
        let g = self.eval(y);
        match self.sense {
            Sense::NegDef => -linalg::lambda_max(&g),
            Sense::Psd => {
                let q = self.range_basis();
                if q.ncols() == 0 {
                    f64::INFINITY
                } else {
                    linalg::lambda_min(&(q.transpose() * g * q))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub n_vars: usize,
    pub constraints: Vec<AffineMatrixConstraint>,
    /// Required strictness margin.
    pub epsilon: f64,
}

impl SdpProblem {
    pub fn check(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::BadProblem(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        for (k, c) in self.constraints.iter().enumerate() {
            let n = c.size();
            if c.gi.len() != self.n_vars {
                return Err(Error::BadProblem(format!(
                    "constraint {k} ({}) has {} coefficient matrices, expected {}",
                    c.label,
                    c.gi.len(),
                    self.n_vars
                )));
            }
            for (i, m) in std::iter::once(&c.g0).chain(&c.gi).enumerate() {
                if m.shape() != (n, n) {
                    return Err(Error::BadProblem(format!("constraint {k} matrix {i} is not {n}x{n}")));
                }
                if m.iter().any(|x| !x.is_finite()) {
                    return Err(Error::BadProblem(format!("constraint {k} matrix {i} has non-finite entries")));
                }
                if !linalg::is_symmetric(m, 1e-12) {
                    return Err(Error::BadProblem(format!(
                        "constraint {k} ({}) matrix {i} is not symmetric",
                        c.label
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    pub max_iterations: usize,
    /// Newton-decrement tolerance for centering.
    pub tolerance: f64,
    /// Search box `|y|_inf <= box_bound`.
    pub box_bound: f64,
    /// Always true; the engine has no random state.
    pub deterministic: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { max_iterations: 2000, tolerance: 1e-9, box_bound: 1e6, deterministic: true }
    }
}

/// Null-space argument showing a `NegDef` constraint can never hold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructuralWitness {
    pub constraint_index: usize,
    /// Vector `w` with `w^T G(y) w >= 0` for every `y`.
    pub direction: Vec<f64>,
    /// The underlying `v` in `null(E)`.
    pub null_vector: Vec<f64>,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SolveOutcome {
    /// `margin` is `+inf` (serialized as `null`) for an empty constraint list.
    Feasible { y: Vec<f64>, margin: f64 },
    Infeasible { best_margin_found: f64, structural: Option<StructuralWitness> },
    Indeterminate { iterations_used: usize, best_margin_found: f64, diagnostic: Option<String> },
}

impl SolveOutcome {
    pub fn status(&self) -> &'static str {
        match self {
            Self::Feasible { .. } => "feasible",
            Self::Infeasible { .. } => "infeasible",
            Self::Indeterminate { .. } => "indeterminate",
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, Self::Feasible { .. })
    }

    pub fn best_margin(&self) -> f64 {
        match self {
            Self::Feasible { margin, .. } => *margin,
            Self::Infeasible { best_margin_found, .. } | Self::Indeterminate { best_margin_found, .. } => {
                *best_margin_found
            }
        }
    }
}

/// Independent check of a candidate point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointCheck {
    pub margin: f64,
    /// Smallest raw eigenvalue over `Psd` constraints (`+inf` if none).
    pub psd_min_eig: f64,
    pub ok: bool,
}

/// Fresh eigenvalue evaluation of every constraint at `y`.
pub fn check_point(problem: &SdpProblem, y: &[f64]) -> PointCheck {
    let mut margin = f64::INFINITY;
    let mut psd_min = f64::INFINITY;
    for c in &problem.constraints {
        margin = margin.min(c.margin_at(y));
        if c.sense == Sense::Psd {
            let g = c.eval(y);
            let scale = 1.0 + g.amax();
            psd_min = psd_min.min(linalg::lambda_min(&g) / scale);
        }
    }
    let ok = y.len() == problem.n_vars
        && y.iter().all(|v| v.is_finite())
        && margin >= problem.epsilon / 2.0
        && psd_min >= -PSD_TOLERANCE;
    PointCheck { margin, psd_min_eig: psd_min, ok }
}

/// A pluggable solver. Outcomes are re-verified by [`Solver::solve`].
pub trait SdpBackend: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, problem: &SdpProblem, options: &SolveOptions) -> Result<SolveOutcome>;
}

/// Built-in log-det barrier engine.
#[derive(Debug, Default, Clone, Copy)]
pub struct BarrierBackend;

impl SdpBackend for BarrierBackend {
    fn name(&self) -> &str {
        "barrier"
    }

    fn solve(&self, problem: &SdpProblem, options: &SolveOptions) -> Result<SolveOutcome> {
        Ok(Barrier::new(problem, options).run())
    }
}

/// Front end that owns an optional external backend.
#[derive(Default)]
pub struct Solver {
    backend: Option<Box<dyn SdpBackend>>,
}

impl Solver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_backend(&mut self, backend: Box<dyn SdpBackend>) {
        self.backend = Some(backend);
    }

    pub fn backend_name(&self) -> &str {
        self.backend.as_ref().map(|b| b.name()).unwrap_or("barrier")
    }

    pub fn solve(&self, problem: &SdpProblem, options: &SolveOptions) -> Result<SolveOutcome> {
        problem.check()?;
        if !(options.tolerance > 0.0) {
            return Err(Error::BadProblem("tolerance must be positive".into()));
        }
        let outcome = match &self.backend {
            None => BarrierBackend.solve(problem, options)?,
            Some(b) => b.solve(problem, options).map_err(|e| Error::Backend {
                backend: b.name().to_string(),
                message: e.to_string(),
            })?,
        };
        Ok(verify_outcome(problem, outcome))
    }
}

/// Solve with the built-in engine.
pub fn solve_feasibility(problem: &SdpProblem, options: &SolveOptions) -> Result<SolveOutcome> {
    Solver::new().solve(problem, options)
}

fn verify_outcome(problem: &SdpProblem, outcome: SolveOutcome) -> SolveOutcome {
    let SolveOutcome::Feasible { y, margin } = outcome else {
        return outcome;
    };
    let check = check_point(problem, &y);
    if check.ok {
        SolveOutcome::Feasible { y, margin: check.margin }
    } else {
        SolveOutcome::Indeterminate {
            iterations_used: 0,
            best_margin_found: check.margin,
            diagnostic: Some(format!(
                "verification failed: claimed margin {margin:.3e}, recomputed margin {:.3e} (need >= {:.3e}), \
                 psd min eigenvalue {:.3e}",
                check.margin,
                problem.epsilon / 2.0,
                check.psd_min_eig
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// Barrier engine

/// Slack block `S(y, t) = C + sum_i y_i D_i - t I`, required positive definite.
struct Block {
    c: DMatrix<f64>,
    d: Vec<DMatrix<f64>>,
}

impl Block {
    fn slack(&self, y: &[f64], t: f64) -> DMatrix<f64> {
        let mut s = self.c.clone();
        for (yi, di) in y.iter().zip(&self.d) {
            if *yi != 0.0 {
                s += di * *yi;
            }
        }
        for k in 0..s.nrows() {
            s[(k, k)] -= t;
        }
        s
    }
}

struct Barrier<'a> {
    problem: &'a SdpProblem,
    blocks: Vec<Block>,
    opts: SolveOptions,
    target: f64,
}

struct Eval {
    value: f64,
}

impl<'a> Barrier<'a> {
    fn new(problem: &'a SdpProblem, opts: &SolveOptions) -> Self {
        let mut blocks = Vec::new();
        for c in &problem.constraints {
            match c.sense {
                Sense::NegDef => blocks.push(Block { c: -&c.g0, d: c.gi.iter().map(|g| -g).collect() }),
                Sense::Psd => {
                    let q = c.range_basis();
                    if q.ncols() == 0 {
                        continue;
                    }
                    let qt = q.transpose();
                    let proj = |g: &DMatrix<f64>| linalg::symmetrize(&(&qt * g * &q));
                    blocks.push(Block { c: proj(&c.g0), d: c.gi.iter().map(proj).collect() });
                }
            }
        }
        Self { problem, blocks, opts: *opts, target: 2.0 * problem.epsilon }
    }

    fn degree(&self) -> f64 {
        (self.blocks.iter().map(|b| b.c.nrows()).sum::<usize>() + 2 * self.problem.n_vars) as f64
    }

    /// Barrier value, or `None` outside the domain.
    fn value(&self, x: &[f64], tau: f64) -> Option<Eval> {
        let d = self.problem.n_vars;
        let (y, t) = (&x[..d], x[d]);
        let r = self.opts.box_bound;
        let mut f = -tau * t;
        for yi in y {
            if yi.abs() >= r {
                return None;
            }
            f -= (r - yi).ln() + (r + yi).ln();
        }
        for b in &self.blocks {
            let chol = Cholesky::new(b.slack(y, t))?;
            f -= 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        }
        f.is_finite().then_some(Eval { value: f })
    }

    fn grad_hess(&self, x: &[f64], tau: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let d = self.problem.n_vars;
        let (y, t) = (&x[..d], x[d]);
        let r = self.opts.box_bound;
        let mut g = DVector::zeros(d + 1);
        let mut h = DMatrix::zeros(d + 1, d + 1);
        g[d] = -tau;
        for b in &self.blocks {
            let s_inv = Cholesky::new(b.slack(y, t))?.inverse();
            let mut w: Vec<DMatrix<f64>> = b.d.iter().map(|di| &s_inv * di).collect();
            w.push(-&s_inv);
            for i in 0..=d {
                g[i] -= w[i].trace();
                for j in 0..=i {
                    let v = w[i].component_mul(&w[j].transpose()).sum();
                    h[(i, j)] += v;
                    if i != j {
                        h[(j, i)] += v;
                    }
                }
            }
        }
        for i in 0..d {
            let (a, b) = (r - y[i], r + y[i]);
            g[i] += 1.0 / a - 1.0 / b;
            h[(i, i)] += 1.0 / (a * a) + 1.0 / (b * b);
        }
        Some((g, h))
    }

    fn newton_step(g: &DVector<f64>, h: &DMatrix<f64>) -> Option<DVector<f64>> {
        if let Some(ch) = Cholesky::new(h.clone()) {
            let step = ch.solve(&(-g));
            if step.iter().all(|v| v.is_finite()) {
                return Some(step);
            }
        }
        let reg = 1e-12 * (1.0 + h.diagonal().amax());
        let mut hr = h.clone();
        for k in 0..hr.nrows() {
            hr[(k, k)] += reg;
        }
        let step = Cholesky::new(hr)?.solve(&(-g));
        step.iter().all(|v| v.is_finite()).then_some(step)
    }

    fn margin_of(&self, x: &[f64]) -> f64 {
        let d = self.problem.n_vars;
        let mut m = f64::INFINITY;
        for b in &self.blocks {
            m = m.min(linalg::lambda_min(&b.slack(&x[..d], 0.0)));
        }
        m
    }

    fn run(&self) -> SolveOutcome {
        let d = self.problem.n_vars;
        if self.blocks.is_empty() {
            // No constraint restricts y; every Psd block was identically zero.
            return SolveOutcome::Feasible { y: vec![0.0; d], margin: f64::INFINITY };
        }
        let mut x = vec![0.0; d + 1];
        let start = self.margin_of(&x);
        if start >= self.target {
            return SolveOutcome::Feasible { y: x[..d].to_vec(), margin: start };
        }
        x[d] = start - 1.0;

        let mut best = start;
        let mut tau = 1.0;
        let mu = 10.0;
        let m = self.degree();
        let mut iters = 0usize;

        loop {
            // Centering at the current tau.
            let mut stalled = false;
            loop {
                if iters >= self.opts.max_iterations {
                    return SolveOutcome::Indeterminate {
                        iterations_used: iters,
                        best_margin_found: best,
                        diagnostic: Some("iteration limit reached".into()),
                    };
                }
                iters += 1;
                let Some((g, h)) = self.grad_hess(&x, tau) else {
                    return self.numerical_failure(iters, best, "slack left the cone");
                };
                let Some(step) = Self::newton_step(&g, &h) else {
                    return self.numerical_failure(iters, best, "singular Newton system");
                };
                let decrement = -g.dot(&step);
                if decrement / 2.0 <= self.opts.tolerance {
                    break;
                }
                let f0 = self.value(&x, tau).expect("iterate is interior").value;
                let mut alpha = 1.0;
                let mut accepted = None;
                while alpha > 1e-14 {
                    let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + alpha * s).collect();
                    if let Some(e) = self.value(&trial, tau) {
                        if e.value <= f0 - 0.25 * alpha * decrement {
                            accepted = Some(trial);
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                let Some(next) = accepted else {
                    stalled = true;
                    break;
                };
                x = next;
                let margin = self.margin_of(&x);
                best = best.max(margin);
                if margin >= self.target {
                    return SolveOutcome::Feasible { y: x[..d].to_vec(), margin };
                }
            }

            let upper = x[d] + m / tau;
            if upper < self.target && !stalled {
                return SolveOutcome::Infeasible { best_margin_found: best, structural: None };
            }
            if stalled && m / tau < self.problem.epsilon * 1e-3 {
                return self.numerical_failure(iters, best, "line search stalled near the boundary");
            }
            tau *= mu;
        }
    }

    fn numerical_failure(&self, iters: usize, best: f64, why: &str) -> SolveOutcome {
        SolveOutcome::Indeterminate {
            iterations_used: iters,
            best_margin_found: best,
            diagnostic: Some(why.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    /// `(a^2 - 1) p <= -eps`, `p - delta >= 0`.
    fn scalar_lyapunov(a: f64) -> SdpProblem {
        SdpProblem {
            n_vars: 1,
            constraints: vec![
                AffineMatrixConstraint::new("decrease", Sense::NegDef, scalar(0.0), vec![scalar(a * a - 1.0)]),
                AffineMatrixConstraint::new("positivity", Sense::Psd, scalar(-1e-6), vec![scalar(1.0)]),
            ],
            epsilon: 1e-6,
        }
    }

    #[test]
    fn contracting_scalar_is_feasible() {
        let p = scalar_lyapunov(0.5);
        let out = solve_feasibility(&p, &SolveOptions::default()).unwrap();
        let SolveOutcome::Feasible { y, margin } = &out else { panic!("{out:?}") };
        assert!(y[0] > 0.0);
        assert!(*margin >= 1e-6);
        // hand point: p = 1 gives 0.75
        assert!((check_point(&p, &[1.0]).margin - 0.75).abs() < 1e-12);
    }

    #[test]
    fn expanding_scalar_is_infeasible() {
        let out = solve_feasibility(&scalar_lyapunov(2.0), &SolveOptions::default()).unwrap();
        assert!(matches!(out, SolveOutcome::Infeasible { structural: None, .. }), "{out:?}");
        assert!(out.best_margin() < 0.0);
    }

    #[test]
    fn empty_problem_is_trivially_feasible() {
        let p = SdpProblem { n_vars: 2, constraints: vec![], epsilon: 1e-6 };
        let out = solve_feasibility(&p, &SolveOptions::default()).unwrap();
        assert_eq!(out, SolveOutcome::Feasible { y: vec![0.0, 0.0], margin: f64::INFINITY });
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let mut p = scalar_lyapunov(0.5);
        p.constraints[0].g0 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        p.constraints[0].gi = vec![DMatrix::zeros(2, 2)];
        assert!(matches!(solve_feasibility(&p, &SolveOptions::default()), Err(Error::BadProblem(_))));
    }

    #[test]
    fn zero_negdef_constraint_is_infeasible() {
        let p = SdpProblem {
            n_vars: 1,
            constraints: vec![AffineMatrixConstraint::new("zero", Sense::NegDef, DMatrix::zeros(2, 2), vec![DMatrix::zeros(2, 2)])],
            epsilon: 1e-6,
        };
        let out = solve_feasibility(&p, &SolveOptions::default()).unwrap();
        assert!(matches!(out, SolveOutcome::Infeasible { .. }), "{out:?}");
    }

    struct Liar;
    impl SdpBackend for Liar {
        fn name(&self) -> &str {
            "liar"
        }
        fn solve(&self, p: &SdpProblem, _: &SolveOptions) -> Result<SolveOutcome> {
            Ok(SolveOutcome::Feasible { y: vec![-5.0; p.n_vars], margin: 1.0 })
        }
    }

    struct Broken;
    impl SdpBackend for Broken {
        fn name(&self) -> &str {
            "broken"
        }
        fn solve(&self, _: &SdpProblem, _: &SolveOptions) -> Result<SolveOutcome> {
            Err(Error::BadProblem("license server unreachable".into()))
        }
    }

    #[test]
    fn unverifiable_backend_answer_is_downgraded() {
        let mut s = Solver::new();
        s.register_backend(Box::new(Liar));
        let out = s.solve(&scalar_lyapunov(0.5), &SolveOptions::default()).unwrap();
        match out {
            SolveOutcome::Indeterminate { diagnostic: Some(d), .. } => assert!(d.contains("verification failed")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn backend_errors_carry_context() {
        let mut s = Solver::new();
        s.register_backend(Box::new(Broken));
        match s.solve(&scalar_lyapunov(0.5), &SolveOptions::default()) {
            Err(Error::Backend { backend, message }) => {
                assert_eq!(backend, "broken");
                assert!(message.contains("license server"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn explicit_builtin_backend_matches_default() {
        let mut s = Solver::new();
        s.register_backend(Box::new(BarrierBackend));
        let p = scalar_lyapunov(0.5);
        assert_eq!(s.solve(&p, &SolveOptions::default()).unwrap(), solve_feasibility(&p, &SolveOptions::default()).unwrap());
        assert_eq!(Solver::new().backend_name(), "barrier");
    }

    #[test]
    fn psd_kernel_is_factored_out() {
        // diag(p, 0) >= 0 has no interior in R^2 but is fine on its range.
        let c = AffineMatrixConstraint::new(
            "ETPE",
            Sense::Psd,
            DMatrix::zeros(2, 2),
            vec![DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])],
        );
        let q = c.range_basis();
        assert_eq!(q.ncols(), 1);
        assert!((c.margin_at(&[3.0]) - 3.0).abs() < 1e-12);
    }
}
