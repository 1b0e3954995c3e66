//! Characteristic polynomial `det(E I(z1, z2) - A)` with
//! `I(z1, z2) = diag(z1 I_{n_h}, z2 I_{n_v})`.
//!
//! Two independent routes are provided: evaluation on a tensor grid of real
//! nodes followed by Vandermonde interpolation, and an exact Leibniz expansion
//! over polynomial entries that serves as the oracle for small `n`.

use nalgebra::{Complex, DMatrix};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::Roesser2D;

pub type C64 = Complex<f64>;

/// Largest `n` accepted by [`char_poly_oracle`].
pub const ORACLE_LIMIT: usize = 6;

/// Relative coefficient threshold: `tau_coef = TAU_COEF_REL * (1 + max |c|)`.
pub const TAU_COEF_REL: f64 = 1e-9;

/// Real polynomial in `(z1, z2)`; `coeffs[(a, b)]` multiplies `z1^a z2^b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariatePoly {
    coeffs: DMatrix<f64>,
}

impl BivariatePoly {
    pub fn zero() -> Self {
        Self { coeffs: DMatrix::zeros(1, 1) }
    }

    /// Zeroes coefficients below `tau_coef` and trims trailing zero rows and
    /// columns.
    pub fn from_coeffs(coeffs: DMatrix<f64>) -> Self {
        if coeffs.is_empty() {
            return Self::zero();
        }
        let tau = tau_coef(&coeffs);
        let cleaned = coeffs.map(|c| if c.abs() > tau { c } else { 0.0 });
        let rows = (0..cleaned.nrows()).rev().find(|&r| cleaned.row(r).iter().any(|&c| c != 0.0));
        let cols = (0..cleaned.ncols()).rev().find(|&c| cleaned.column(c).iter().any(|&x| x != 0.0));
        match (rows, cols) {
            (Some(r), Some(c)) => Self { coeffs: cleaned.view((0, 0), (r + 1, c + 1)).into_owned() },
            _ => Self::zero(),
        }
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn coeff(&self, a: usize, b: usize) -> f64 {
        if a < self.coeffs.nrows() && b < self.coeffs.ncols() {
            self.coeffs[(a, b)]
        } else {
            0.0
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.amax()
    }

    pub fn deg_z1(&self) -> usize {
        self.coeffs.nrows() - 1
    }

    pub fn deg_z2(&self) -> usize {
        self.coeffs.ncols() - 1
    }

    /// `max{a + b : c_ab != 0}`; zero for the zero polynomial.
    pub fn total_degree(&self) -> usize {
        let mut deg = 0;
        for a in 0..self.coeffs.nrows() {
            for b in 0..self.coeffs.ncols() {
                if self.coeffs[(a, b)] != 0.0 {
                    deg = deg.max(a + b);
                }
            }
        }
        deg
    }

    pub fn eval(&self, z1: C64, z2: C64) -> C64 {
        // Horner in z1 over Horner-evaluated rows in z2.
        let mut acc = C64::new(0.0, 0.0);
        for a in (0..self.coeffs.nrows()).rev() {
            let mut row = C64::new(0.0, 0.0);
            for b in (0..self.coeffs.ncols()).rev() {
                row = row * z2 + self.coeffs[(a, b)];
            }
            acc = acc * z1 + row;
        }
        acc
    }

    /// Coefficients (ascending in `z1`) of `p(., z2)`.
    pub fn slice_in_z1(&self, z2: C64) -> Vec<C64> {
        (0..self.coeffs.nrows())
            .map(|a| {
                (0..self.coeffs.ncols()).rev().fold(C64::new(0.0, 0.0), |acc, b| acc * z2 + self.coeffs[(a, b)])
            })
            .collect()
    }

    /// Coefficients (ascending in `z2`) of `p(z1, .)`.
    pub fn slice_in_z2(&self, z1: C64) -> Vec<C64> {
        (0..self.coeffs.ncols())
            .map(|b| {
                (0..self.coeffs.nrows()).rev().fold(C64::new(0.0, 0.0), |acc, a| acc * z1 + self.coeffs[(a, b)])
            })
            .collect()
    }

    /// `max |c_ab - d_ab|` over the union of supports.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let r = self.coeffs.nrows().max(other.coeffs.nrows());
        let c = self.coeffs.ncols().max(other.coeffs.ncols());
        let mut d: f64 = 0.0;
        for a in 0..r {
            for b in 0..c {
                d = d.max((self.coeff(a, b) - other.coeff(a, b)).abs());
            }
        }
        d
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        linalg::to_rows(&self.coeffs)
    }

    /// Human-readable form like `0.476 - 1 z1`.
    pub fn display(&self) -> String {
        let mut terms = Vec::new();
        for a in 0..self.coeffs.nrows() {
            for b in 0..self.coeffs.ncols() {
                let c = self.coeffs[(a, b)];
                if c == 0.0 {
                    continue;
                }
                let mono = match (a, b) {
                    (0, 0) => String::new(),
                    (a, 0) => mono("z1", a),
                    (0, b) => mono("z2", b),
                    (a, b) => format!("{} {}", mono("z1", a), mono("z2", b)),
                };
                terms.push((c, mono));
            }
        }
        if terms.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        for (k, (c, m)) in terms.iter().enumerate() {
            let mag = format!("{}", c.abs());
            let body = if m.is_empty() { mag } else { format!("{mag} {m}") };
            match (k, *c < 0.0) {
                (0, false) => out.push_str(&body),
                (0, true) => out.push_str(&format!("-{body}")),
                (_, false) => out.push_str(&format!(" + {body}")),
                (_, true) => out.push_str(&format!(" - {body}")),
            }
        }
        out
    }
}

fn mono(var: &str, pow: usize) -> String {
    if pow == 1 {
        var.to_string()
    } else {
        format!("{var}^{pow}")
    }
}

fn tau_coef(coeffs: &DMatrix<f64>) -> f64 {
    TAU_COEF_REL * (1.0 + coeffs.amax())
}

impl Serialize for BivariatePoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("BivariatePoly", 3)?;
        st.serialize_field("coeffs", &self.to_rows())?;
        st.serialize_field("total_degree", &self.total_degree())?;
        st.serialize_field("text", &self.display())?;
        st.end()
    }
}

/// `E I(z1, z2) - A` at a complex point.
pub fn characteristic_matrix(model: &Roesser2D, z1: C64, z2: C64) -> DMatrix<C64> {
    let nh = model.dims().n_h;
    let n = model.n();
    DMatrix::from_fn(n, n, |r, c| {
        let z = if c < nh { z1 } else { z2 };
        z * model.e()[(r, c)] - model.a()[(r, c)]
    })
}

/// Direct determinant of the characteristic matrix via LU.
pub fn det_at(model: &Roesser2D, z1: C64, z2: C64) -> C64 {
    characteristic_matrix(model, z1, z2).determinant()
}

fn real_det_at(model: &Roesser2D, x1: f64, x2: f64) -> f64 {
    let nh = model.dims().n_h;
    let n = model.n();
    let m = DMatrix::from_fn(n, n, |r, c| {
        let z = if c < nh { x1 } else { x2 };
        z * model.e()[(r, c)] - model.a()[(r, c)]
    });
    m.determinant()
}

/// Integer nodes centered on zero, scaled by `scale`.
fn nodes(count: usize, scale: f64) -> Vec<f64> {
    let shift = (count - 1) / 2;
    (0..count).map(|k| (k as f64 - shift as f64) * scale).collect()
}

fn vandermonde(x: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), x.len(), |r, c| x[r].powi(c as i32))
}

/// Characteristic polynomial by evaluation on an `(n_h+1) x (n_v+1)` grid and
/// two Vandermonde solves.
pub fn char_poly(model: &Roesser2D) -> BivariatePoly {
    let d = model.dims();
    let scale = 1.0 + linalg::norm_inf(model.a());
    let x1 = nodes(d.n_h + 1, scale);
    let x2 = nodes(d.n_v + 1, scale);
    let values = DMatrix::from_fn(x1.len(), x2.len(), |a, b| real_det_at(model, x1[a], x2[b]));
    // values = V1 C V2^T  =>  C = V1^{-1} values V2^{-T}
    let v1 = vandermonde(&x1).lu();
    let v2 = vandermonde(&x2).lu();
    let left = v1.solve(&values).expect("distinct nodes give an invertible Vandermonde matrix");
    let coeffs_t = v2
        .solve(&left.transpose())
        .expect("distinct nodes give an invertible Vandermonde matrix");
    BivariatePoly::from_coeffs(coeffs_t.transpose())
}

/// Dense bivariate polynomial used by the exact expansion.
#[derive(Clone)]
struct Dense {
    c: Vec<Vec<f64>>,
}

impl Dense {
    fn zero(r: usize, c: usize) -> Self {
        Self { c: vec![vec![0.0; c]; r] }
    }

    fn mul_into(&self, other: &Dense, out: &mut Dense) {
        for row in out.c.iter_mut() {
            row.iter_mut().for_each(|x| *x = 0.0);
        }
        let (r, c) = (out.c.len(), out.c[0].len());
        for (a1, row1) in self.c.iter().enumerate() {
            for (b1, &x) in row1.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                for (a2, row2) in other.c.iter().enumerate() {
                    for (b2, &y) in row2.iter().enumerate() {
                        if y != 0.0 && a1 + a2 < r && b1 + b2 < c {
                            out.c[a1 + a2][b1 + b2] += x * y;
                        }
                    }
                }
            }
        }
    }
}

/// Independent oracle: Leibniz expansion with polynomial entries.
pub fn char_poly_oracle(model: &Roesser2D) -> Result<BivariatePoly> {
    let n = model.n();
    if n > ORACLE_LIMIT {
        return Err(Error::SizeLimit { n, limit: ORACLE_LIMIT });
    }
    let d = model.dims();
    let (r, c) = (d.n_h + 1, d.n_v + 1);
    let entry = |row: usize, col: usize| {
        let mut p = Dense::zero(r, c);
        p.c[0][0] = -model.a()[(row, col)];
        let e = model.e()[(row, col)];
        if col < d.n_h {
            p.c[1][0] += e;
        } else {
            p.c[0][1] += e;
        }
        p
    };
    let entries: Vec<Vec<Dense>> = (0..n).map(|i| (0..n).map(|j| entry(i, j)).collect()).collect();

    let mut total = Dense::zero(r, c);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut scratch = Dense::zero(r, c);
    permute(&mut perm, 0, 1.0, &mut |p, sign| {
        let mut term = entries[0][p[0]].clone();
        for (row, &col) in p.iter().enumerate().skip(1) {
            term.mul_into(&entries[row][col], &mut scratch);
            std::mem::swap(&mut term, &mut scratch);
        }
        for a in 0..r {
            for b in 0..c {
                total.c[a][b] += sign * term.c[a][b];
            }
        }
    });
    Ok(BivariatePoly::from_coeffs(DMatrix::from_fn(r, c, |a, b| total.c[a][b])))
}

fn permute(p: &mut Vec<usize>, k: usize, sign: f64, visit: &mut dyn FnMut(&[usize], f64)) {
    if k == p.len() {
        visit(p, sign);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, if i == k { sign } else { -sign }, visit);
        p.swap(k, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::{build_heat_model, HeatParams};

    fn diag_model(a: f64, b: f64) -> Roesser2D {
        Roesser2D::autonomous(1, 1, DMatrix::identity(2, 2), DMatrix::from_row_slice(2, 2, &[a, 0.0, 0.0, b]))
            .unwrap()
    }

    #[test]
    fn heat_polynomial_is_linear_in_z1() {
        let m = build_heat_model(&HeatParams::paper()).unwrap();
        for p in [char_poly(&m), char_poly_oracle(&m).unwrap()] {
            assert_eq!(p.coeffs().shape(), (2, 1));
            assert!((p.coeff(0, 0) - 0.476).abs() < 1e-12);
            assert!((p.coeff(1, 0) + 1.0).abs() < 1e-12);
            assert_eq!(p.total_degree(), 1);
        }
    }

    #[test]
    fn identity_e_zero_a_is_z1_z2() {
        let p = char_poly(&diag_model(0.0, 0.0));
        assert_eq!(p.coeffs().shape(), (2, 2));
        assert!((p.coeff(1, 1) - 1.0).abs() < 1e-12);
        assert_eq!(p.coeff(0, 0), 0.0);
        assert_eq!(p.coeff(1, 0), 0.0);
        assert_eq!(p.coeff(0, 1), 0.0);
    }

    #[test]
    fn diagonal_a_factors() {
        let (a, b) = (0.7, -1.3);
        let p = char_poly(&diag_model(a, b));
        // (z1 - a)(z2 - b) = ab - b z1 - a z2 + z1 z2
        assert!((p.coeff(0, 0) - a * b).abs() < 1e-12);
        assert!((p.coeff(1, 0) + b).abs() < 1e-12);
        assert!((p.coeff(0, 1) + a).abs() < 1e-12);
        assert!((p.coeff(1, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_e_identity_a_is_sign() {
        for n in 1..=4 {
            let m = Roesser2D::autonomous(n, 0, DMatrix::zeros(n, n), DMatrix::identity(n, n)).unwrap();
            let p = char_poly_oracle(&m).unwrap();
            let expected = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(p.coeffs().shape(), (1, 1));
            assert_eq!(p.coeff(0, 0), expected);
        }
    }

    #[test]
    fn oracle_refuses_large_models() {
        let m = Roesser2D::autonomous(4, 3, DMatrix::identity(7, 7), DMatrix::zeros(7, 7)).unwrap();
        assert_eq!(char_poly_oracle(&m), Err(Error::SizeLimit { n: 7, limit: 6 }));
    }

    #[test]
    fn zero_polynomial_is_one_by_one() {
        let p = BivariatePoly::from_coeffs(DMatrix::from_element(3, 2, 1e-14));
        assert_eq!(p, BivariatePoly::zero());
        assert!(p.is_zero());
        assert_eq!(p.display(), "0");
    }

    #[test]
    fn display_formats_signs() {
        let m = build_heat_model(&HeatParams::paper()).unwrap();
        assert_eq!(char_poly_oracle(&m).unwrap().display(), "0.476 - 1 z1");
    }
}
