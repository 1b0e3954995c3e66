//! Regularity, causality and a sampled spectral-stability scan.
//!
//! The stability check is a *scan*: for `z2` sampled on the unit circle the
//! roots of `p(., z2)` must lie strictly inside the disc, and symmetrically
//! with the roles of `z1`, `z2` swapped. It is a necessary-condition check,
//! not a decision procedure, and reports say so.

use nalgebra::{Complex, DMatrix};
use serde::Serialize;

use crate::charpoly::{char_poly, BivariatePoly, C64, TAU_COEF_REL};
use crate::error::{Error, Result};
use crate::model::Roesser2D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanOptions {
    pub n_samples: usize,
    pub tau_stab: f64,
    pub tau_det: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { n_samples: 257, tau_stab: 1e-6, tau_det: 1e-9 }
    }
}

/// Which variable is sampled on the unit circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanPass {
    Z2OnCircle,
    Z1OnCircle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub pass: ScanPass,
    pub sample_index: usize,
    /// `[re, im]`
    pub z1: [f64; 2],
    pub z2: [f64; 2],
    pub det_abs: f64,
}

impl Witness {
    pub fn z1_abs(&self) -> f64 {
        self.z1[0].hypot(self.z1[1])
    }
    pub fn z2_abs(&self) -> f64 {
        self.z2[0].hypot(self.z2[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SpectrumVerdict {
    StableIndication,
    UnstableWitness { witness: Witness },
    Indeterminate { reason: String, witness: Option<Witness> },
}

impl SpectrumVerdict {
    pub fn is_stable(&self) -> bool {
        matches!(self, Self::StableIndication)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::StableIndication => "stable_indication",
            Self::UnstableWitness { .. } => "unstable_witness",
            Self::Indeterminate { .. } => "indeterminate",
        }
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Self::StableIndication => None,
            Self::UnstableWitness { witness } => Some(witness),
            Self::Indeterminate { witness, .. } => witness.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumScan {
    pub verdict: SpectrumVerdict,
    pub samples_used: usize,
    /// Largest finite-root modulus seen over all samples.
    pub max_root_modulus: f64,
    /// Samples where the leading coefficient vanished (roots at infinity).
    /// These relate to causality, not stability.
    pub samples_with_roots_at_infinity: usize,
    pub method: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub regular: bool,
    /// `None` when the system is not regular.
    pub causal: Option<bool>,
    /// Causality compares the *total* degree in `(z1, z2)` with `rank(E)`.
    pub degree_reading: &'static str,
    pub degree: usize,
    pub rank_e: usize,
    pub char_poly: BivariatePoly,
    pub spectrum: Option<SpectrumScan>,
}

impl AdmissibilityReport {
    pub fn admissible_indication(&self) -> bool {
        self.regular
            && self.causal == Some(true)
            && self.spectrum.as_ref().is_some_and(|s| s.verdict.is_stable())
    }
}

fn poly_tau(p: &BivariatePoly) -> f64 {
    TAU_COEF_REL * (1.0 + p.max_abs())
}

pub fn is_regular(model: &Roesser2D) -> bool {
    is_regular_poly(&char_poly(model))
}

fn is_regular_poly(p: &BivariatePoly) -> bool {
    let tau = poly_tau(p);
    p.coeffs().iter().any(|c| c.abs() > tau)
}

pub fn is_causal(model: &Roesser2D) -> Result<bool> {
    let p = char_poly(model);
    if !is_regular_poly(&p) {
        return Err(Error::NotRegular);
    }
    Ok(p.total_degree() == model.rank_e())
}

pub fn spectrum_scan(model: &Roesser2D, opts: &ScanOptions) -> Result<SpectrumScan> {
    let p = char_poly(model);
    if !is_regular_poly(&p) {
        return Err(Error::NotRegular);
    }
    Ok(scan_poly(&p, opts))
}

pub fn analyze(model: &Roesser2D, opts: &ScanOptions) -> AdmissibilityReport {
    let p = char_poly(model);
    let regular = is_regular_poly(&p);
    let rank_e = model.rank_e();
    let degree = p.total_degree();
    AdmissibilityReport {
        regular,
        causal: regular.then_some(degree == rank_e),
        degree_reading: "total",
        degree,
        rank_e,
        spectrum: regular.then(|| scan_poly(&p, opts)),
        char_poly: p,
    }
}

enum SliceOutcome {
    Inside { max_modulus: f64, at_infinity: bool },
    Outside(Witness, f64),
    NearCircle(Witness, f64),
    IdenticallyZero,
}

/// Scan a regular polynomial. The witness is the first offending sample in
/// (pass, sample index) order.
pub fn scan_poly(p: &BivariatePoly, opts: &ScanOptions) -> SpectrumScan {
    let n = opts.n_samples.max(1);
    let tau = poly_tau(p);
    let mut max_modulus: f64 = 0.0;
    let mut at_inf = 0;
    let mut near: Option<Witness> = None;
    let mut zero_slice: Option<(ScanPass, usize)> = None;

    for pass in [ScanPass::Z2OnCircle, ScanPass::Z1OnCircle] {
        for k in 0..n {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let w = C64::from_polar(1.0, theta);
            let coeffs = match pass {
                ScanPass::Z2OnCircle => p.slice_in_z1(w),
                ScanPass::Z1OnCircle => p.slice_in_z2(w),
            };
            match classify_slice(p, pass, k, w, &coeffs, tau, opts) {
                SliceOutcome::Inside { max_modulus: m, at_infinity } => {
                    max_modulus = max_modulus.max(m);
                    at_inf += at_infinity as usize;
                }
                SliceOutcome::Outside(witness, m) => {
                    return SpectrumScan {
                        verdict: SpectrumVerdict::UnstableWitness { witness },
                        samples_used: n,
                        max_root_modulus: max_modulus.max(m),
                        samples_with_roots_at_infinity: at_inf,
                        method: "scan",
                    };
                }
                SliceOutcome::NearCircle(witness, m) => {
                    max_modulus = max_modulus.max(m);
                    near.get_or_insert(witness);
                }
                SliceOutcome::IdenticallyZero => {
                    zero_slice.get_or_insert((pass, k));
                }
            }
        }
    }

    let verdict = if let Some(w) = near {
        SpectrumVerdict::Indeterminate { reason: "root within tau_stab of the unit circle".into(), witness: Some(w) }
    } else if let Some((pass, k)) = zero_slice {
        SpectrumVerdict::Indeterminate {
            reason: format!("polynomial vanishes identically on slice {k} of pass {pass:?}"),
            witness: None,
        }
    } else {
        SpectrumVerdict::StableIndication
    };
    SpectrumScan {
        verdict,
        samples_used: n,
        max_root_modulus: max_modulus,
        samples_with_roots_at_infinity: at_inf,
        method: "scan",
    }
}

fn classify_slice(
    p: &BivariatePoly,
    pass: ScanPass,
    k: usize,
    w: C64,
    coeffs: &[C64],
    tau: f64,
    opts: &ScanOptions,
) -> SliceOutcome {
    let Some(deg) = coeffs.iter().rposition(|c| c.norm() > tau) else {
        return SliceOutcome::IdenticallyZero;
    };
    let at_infinity = deg + 1 < coeffs.len();
    let roots = poly_roots(&coeffs[..=deg]);
    let mut max_modulus: f64 = 0.0;
    let mut near = None;
    for r in roots {
        let m = r.norm();
        max_modulus = max_modulus.max(m);
        let (z1, z2) = match pass {
            ScanPass::Z2OnCircle => (r, w),
            ScanPass::Z1OnCircle => (w, r),
        };
        let make = || Witness {
            pass,
            sample_index: k,
            z1: [z1.re, z1.im],
            z2: [z2.re, z2.im],
            det_abs: p.eval(z1, z2).norm(),
        };
        if m >= 1.0 + opts.tau_stab {
            let witness = make();
            if witness.det_abs <= opts.tau_det * residual_scale(coeffs, m) {
                return SliceOutcome::Outside(witness, m);
            }
            near.get_or_insert(witness);
        } else if m >= 1.0 - opts.tau_stab {
            near.get_or_insert_with(make);
        }
    }
    match near {
        Some(w) => SliceOutcome::NearCircle(w, max_modulus),
        None => SliceOutcome::Inside { max_modulus, at_infinity },
    }
}

/// `max(1, sum |c_k| |z|^k)`: the backward-error scale of a polynomial value.
fn residual_scale(coeffs: &[C64], modulus: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * modulus + c.norm()).max(1.0)
}

/// Roots of `sum c_k z^k` (ascending coefficients, nonzero leading term)
/// as companion-matrix eigenvalues, refined by a few Newton steps.
pub fn poly_roots(coeffs: &[C64]) -> Vec<C64> {
    let deg = coeffs.len().saturating_sub(1);
    if deg == 0 {
        return Vec::new();
    }
    let lead = coeffs[deg];
    let mut comp = DMatrix::<C64>::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = Complex::new(1.0, 0.0);
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -coeffs[i] / lead;
    }
    let eig = nalgebra::linalg::Schur::new(comp.clone())
        .eigenvalues()
        .unwrap_or_else(|| comp.diagonal());
    eig.iter().map(|&z| polish(coeffs, z)).collect()
}

fn polish(coeffs: &[C64], mut z: C64) -> C64 {
    for _ in 0..3 {
        let (mut f, mut df) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        for c in coeffs.iter().rev() {
            df = df * z + f;
            f = f * z + c;
        }
        if df.norm() == 0.0 || f.norm() == 0.0 {
            break;
        }
        let step = f / df;
        let next = z - step;
        if !next.re.is_finite() || !next.im.is_finite() {
            break;
        }
        z = next;
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::{build_heat_model, HeatParams};

    fn diag(a: f64, b: f64) -> Roesser2D {
        Roesser2D::autonomous(1, 1, DMatrix::identity(2, 2), DMatrix::from_row_slice(2, 2, &[a, 0.0, 0.0, b]))
            .unwrap()
    }

    #[test]
    fn heat_is_regular_causal_and_stable() {
        let m = build_heat_model(&HeatParams::paper()).unwrap();
        assert!(is_regular(&m));
        assert!(is_causal(&m).unwrap());
        let scan = spectrum_scan(&m, &ScanOptions::default()).unwrap();
        assert_eq!(scan.verdict, SpectrumVerdict::StableIndication);
        assert!((scan.max_root_modulus - 0.476).abs() < 1e-12);
        let report = analyze(&m, &ScanOptions::default());
        assert!(report.admissible_indication());
    }

    #[test]
    fn zero_system_is_irregular() {
        let m = Roesser2D::autonomous(1, 0, DMatrix::zeros(1, 1), DMatrix::zeros(1, 1)).unwrap();
        assert!(!is_regular(&m));
        assert_eq!(is_causal(&m), Err(Error::NotRegular));
        assert_eq!(spectrum_scan(&m, &ScanOptions::default()).unwrap_err(), Error::NotRegular);
        let report = analyze(&m, &ScanOptions::default());
        assert!(!report.regular && report.causal.is_none() && report.spectrum.is_none());
    }

    #[test]
    fn identity_e_is_regular_and_causal() {
        let m = diag(0.0, 0.0);
        assert!(is_regular(&m));
        assert!(is_causal(&m).unwrap());
        assert!(is_causal(&diag(3.0, -2.0)).unwrap());
        let scan = spectrum_scan(&m, &ScanOptions::default()).unwrap();
        assert!(scan.verdict.is_stable());
    }

    #[test]
    fn nilpotent_e_is_not_causal() {
        let m = Roesser2D::autonomous(2, 0, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]), DMatrix::identity(2, 2))
            .unwrap();
        let p = char_poly(&m);
        assert_eq!(p.coeffs().shape(), (1, 1));
        assert!((p.coeff(0, 0) - 1.0).abs() < 1e-12);
        assert!(!is_causal(&m).unwrap());
    }

    #[test]
    fn unstable_diagonal_gives_witness_at_one_point_five() {
        let scan = spectrum_scan(&diag(1.5, 0.5), &ScanOptions::default()).unwrap();
        let SpectrumVerdict::UnstableWitness { witness } = &scan.verdict else {
            panic!("expected witness, got {:?}", scan.verdict);
        };
        assert_eq!(witness.pass, ScanPass::Z2OnCircle);
        assert_eq!(witness.sample_index, 0);
        assert!((witness.z1[0] - 1.5).abs() < 1e-12 && witness.z1[1].abs() < 1e-12);
        assert!(witness.z1_abs() >= 1.0 - 1e-6);
        assert!(witness.det_abs <= 1e-9);
    }

    #[test]
    fn root_on_circle_is_indeterminate() {
        let scan = spectrum_scan(&diag(1.0, 0.2), &ScanOptions::default()).unwrap();
        assert!(matches!(scan.verdict, SpectrumVerdict::Indeterminate { .. }));
    }

    #[test]
    fn verdict_stable_under_sample_doubling() {
        let models = [build_heat_model(&HeatParams::paper()).unwrap(), diag(1.5, 0.5), diag(0.0, 0.0), diag(0.3, -0.9)];
        for m in &models {
            let a = spectrum_scan(m, &ScanOptions::default()).unwrap().verdict.label();
            let b = spectrum_scan(m, &ScanOptions { n_samples: 514, ..Default::default() }).unwrap().verdict.label();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn companion_roots_of_cubic() {
        // (z - 1)(z + 2)(z - 0.5) = z^3 + 0.5 z^2 - 2.5 z + 1
        let c: Vec<C64> = [1.0, -2.5, 0.5, 1.0].iter().map(|&x| C64::new(x, 0.0)).collect();
        let mut r: Vec<f64> = poly_roots(&c).iter().map(|z| z.re).collect();
        r.sort_by(f64::total_cmp);
        for (got, want) in r.iter().zip([-2.0, 0.5, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }
}
