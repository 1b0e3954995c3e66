//! Grid simulation by pointwise elimination of algebraic states.
//!
//! With `T = diag(T_h, T_v)` (`T_d = S_d^{-1} U_d^T`) and `V = diag(V_h, V_v)`
//! from the rank decomposition, the coordinates `x = V xi` turn
//! `E [x^h(i+1,j); x^v(i,j+1)] = A_eff x(i,j) + B u` into
//!
//! ```text
//! xi^h_d(i+1,j) = At[hd, :] xi(i,j) + Bt[hd] u
//! xi^v_d(i,j+1) = At[vd, :] xi(i,j) + Bt[vd] u
//!             0 = At[alg, :] xi(i,j) + Bt[alg] u
//! ```
//!
//! with `At = T A_eff V`, `Bt = T B`. The last block is solved for the algebraic
//! components at each grid point.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, ser_mat};
use crate::model::{rank_decompose, ClosedLoop, Roesser2D};

pub const DIVERGENCE_THRESHOLD: f64 = 1e9;
/// Largest admissible condition number of `M_alg`.
pub const MAX_ALG_CONDITION: f64 = 1e12;

/// Index sets into the decomposed coordinates `xi = (xi^h_d, xi^h_a, xi^v_d, xi^v_a)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatePartition {
    pub n_h: usize,
    pub n_v: usize,
    pub r_h: usize,
    pub r_v: usize,
}

impl StatePartition {
    pub fn n(&self) -> usize {
        self.n_h + self.n_v
    }
    pub fn h_dyn(&self) -> Vec<usize> {
        (0..self.r_h).collect()
    }
    pub fn v_dyn(&self) -> Vec<usize> {
        (self.n_h..self.n_h + self.r_v).collect()
    }
    pub fn dynamic(&self) -> Vec<usize> {
        let mut d = self.h_dyn();
        d.extend(self.v_dyn());
        d
    }
    pub fn algebraic(&self) -> Vec<usize> {
        (self.r_h..self.n_h).chain(self.n_h + self.r_v..self.n()).collect()
    }
    /// `q = (n_h - r_h) + (n_v - r_v)`.
    pub fn q(&self) -> usize {
        self.n() - self.r_h - self.r_v
    }
}

fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| m[(rows[r], cols[c])])
}

fn gather(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&k| v[k]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedForm {
    pub partition: StatePartition,
    /// Row transform `T`.
    #[serde(serialize_with = "ser_mat")]
    pub t: DMatrix<f64>,
    /// Coordinate transform `V` (`x = V xi`); block-diagonal `diag(V_h, V_v)`.
    #[serde(serialize_with = "ser_mat")]
    pub v: DMatrix<f64>,
    #[serde(serialize_with = "ser_mat")]
    pub a_tilde: DMatrix<f64>,
    #[serde(serialize_with = "ser_mat")]
    pub b_tilde: DMatrix<f64>,
    #[serde(serialize_with = "ser_mat")]
    pub m_alg: DMatrix<f64>,
    pub condition: f64,
    /// Dynamic recursion after eliminating the algebraic states.
    #[serde(serialize_with = "ser_mat")]
    pub a_reduced: DMatrix<f64>,
    #[serde(skip)]
    m_alg_inv: DMatrix<f64>,
    #[serde(skip)]
    closed_loop: ClosedLoop,
}

impl ReducedForm {
    /// Eigenvalues of the reduced recursion as `[re, im]`, sorted by
    /// decreasing modulus.
    pub fn reduced_poles(&self) -> Vec<[f64; 2]> {
        if self.a_reduced.nrows() == 0 {
            return Vec::new();
        }
        let mut poles: Vec<[f64; 2]> =
            self.a_reduced.complex_eigenvalues().iter().map(|z| [z.re, z.im]).collect();
        poles.sort_by(|a, b| b[0].hypot(b[1]).total_cmp(&a[0].hypot(a[1])).then(b[1].total_cmp(&a[1])));
        poles
    }

    pub fn spectral_radius(&self) -> f64 {
        self.reduced_poles().first().map(|p| p[0].hypot(p[1])).unwrap_or(0.0)
    }

    /// One grid point: from the dynamic components (ordered as
    /// `partition.dynamic()`) and the external input, returns the full state
    /// in original coordinates plus the next `xi^h_d` and `xi^v_d`.
    pub fn step(&self, xi_dyn: &DVector<f64>, u_ext: Option<&DVector<f64>>) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let part = &self.partition;
        let dyn_idx = part.dynamic();
        let alg_idx = part.algebraic();
        let n = part.n();

        let mut xi = DVector::zeros(n);
        for (k, &d) in dyn_idx.iter().enumerate() {
            xi[d] = xi_dyn[k];
        }
        let forcing = |rows: &[usize]| -> DVector<f64> {
            match u_ext {
                Some(u) if self.b_tilde.ncols() > 0 => select(&self.b_tilde, rows, &(0..self.b_tilde.ncols()).collect::<Vec<_>>()) * u,
                _ => DVector::zeros(rows.len()),
            }
        };
        if !alg_idx.is_empty() {
            let rhs = select(&self.a_tilde, &alg_idx, &dyn_idx) * xi_dyn + forcing(&alg_idx);
            let xi_alg = -(&self.m_alg_inv * rhs);
            for (k, &a) in alg_idx.iter().enumerate() {
                xi[a] = xi_alg[k];
            }
        }
        let x = &self.v * &xi;
        let advance = |rows: Vec<usize>| -> DVector<f64> {
            let f = forcing(&rows);
            gather(&(&self.a_tilde * &xi), &rows) + f
        };
        (x, advance(part.h_dyn()), advance(part.v_dyn()))
    }
}

/// Builds the decomposed recursion for the closed loop.
pub fn reduce_pointwise(model: &Roesser2D, closed_loop: &ClosedLoop) -> Result<ReducedForm> {
    let a_eff = closed_loop.effective_a(model)?;
    let rd = rank_decompose(model);
    let t = linalg::block_diag(&rd.h.left_transform(), &rd.v.left_transform());
    let v = linalg::block_diag(&rd.h.v, &rd.v.v);
    let d = model.dims();
    let partition = StatePartition { n_h: d.n_h, n_v: d.n_v, r_h: rd.h.rank, r_v: rd.v.rank };
    let a_tilde = &t * &a_eff * &v;
    let b_tilde = &t * model.b();

    let dyn_idx = partition.dynamic();
    let alg_idx = partition.algebraic();
    let m_alg = select(&a_tilde, &alg_idx, &alg_idx);
    let condition = linalg::condition_number(&m_alg);
    if !(condition <= MAX_ALG_CONDITION) {
        return Err(Error::NonCausalPointwise { condition });
    }
    let m_alg_inv = if alg_idx.is_empty() {
        DMatrix::zeros(0, 0)
    } else {
        m_alg.clone().try_inverse().ok_or(Error::NonCausalPointwise { condition: f64::INFINITY })?
    };
    let a_dd = select(&a_tilde, &dyn_idx, &dyn_idx);
    let a_reduced = if alg_idx.is_empty() {
        a_dd
    } else {
        a_dd - select(&a_tilde, &dyn_idx, &alg_idx) * &m_alg_inv * select(&a_tilde, &alg_idx, &dyn_idx)
    };
    Ok(ReducedForm {
        partition,
        t,
        v,
        a_tilde,
        b_tilde,
        m_alg,
        condition,
        a_reduced,
        m_alg_inv,
        closed_loop: closed_loop.clone(),
    })
}

/// Boundary source for one direction, in decomposed dynamic coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundarySource {
    Constant(Vec<f64>),
    /// Entry `k` is the value at index `k` along the boundary.
    Table(Vec<Vec<f64>>),
}

impl BoundarySource {
    fn at(&self, k: usize) -> &[f64] {
        match self {
            Self::Constant(v) => v,
            Self::Table(t) => t.get(k).map(Vec::as_slice).unwrap_or(&[]),
        }
    }

    fn check(&self, label: &str, width: usize, len: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::BoundaryDimensionMismatch(format!("{label} boundary: {msg}")));
        match self {
            Self::Constant(v) if v.len() != width => bad(format!("{} components given, {width} dynamic", v.len())),
            Self::Table(t) if width > 0 && t.len() < len => bad(format!("{} entries given, {len} needed", t.len())),
            Self::Table(t) => match t.iter().position(|row| row.len() != width) {
                Some(k) => bad(format!("entry {k} has {} components, {width} dynamic", t[k].len())),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    fn scaled(&self, s: f64) -> Self {
        let sc = |v: &Vec<f64>| v.iter().map(|x| x * s).collect::<Vec<_>>();
        match self {
            Self::Constant(v) => Self::Constant(sc(v)),
            Self::Table(t) => Self::Table(t.iter().map(sc).collect()),
        }
    }
}

/// `h`: `xi^h_d(0, j)` as a function of `j`; `v`: `xi^v_d(i, 0)` as a function of `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub h: BoundarySource,
    pub v: BoundarySource,
}

impl BoundaryData {
    pub fn constant(value: f64, r_h: usize, r_v: usize) -> Self {
        Self { h: BoundarySource::Constant(vec![value; r_h]), v: BoundarySource::Constant(vec![value; r_v]) }
    }

    /// Constant 1 on every dynamic channel.
    pub fn unit(reduced: &ReducedForm) -> Self {
        Self::constant(1.0, reduced.partition.r_h, reduced.partition.r_v)
    }

    pub fn tabulated(h: Vec<Vec<f64>>, v: Vec<Vec<f64>>) -> Self {
        Self { h: BoundarySource::Table(h), v: BoundarySource::Table(v) }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { h: self.h.scaled(s), v: self.v.scaled(s) }
    }
}

/// External input `u(i, j)` for open-loop runs.
pub type InputField<'a> = &'a dyn Fn(usize, usize) -> DVector<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub u: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryGrid {
    pub n1: usize,
    pub n2: usize,
    pub n_h: usize,
    pub n_v: usize,
    /// Points in raster order (`j` outer, `i` inner); shorter than `n1 * n2`
    /// when the sweep stopped on divergence.
    pub points: Vec<GridPoint>,
    pub diverged: bool,
    /// Grid index `(i, j)` of the point that crossed the threshold.
    pub truncated_at: Option<(usize, usize)>,
    /// `max |x(i,j)|_inf` over `i + j = k`.
    pub sup_norm_per_antidiagonal: Vec<f64>,
}

impl TrajectoryGrid {
    pub fn get(&self, i: usize, j: usize) -> Option<&GridPoint> {
        if i >= self.n1 || j >= self.n2 {
            return None;
        }
        self.points.get(j * self.n1 + i)
    }

    pub fn is_complete(&self) -> bool {
        self.points.len() == self.n1 * self.n2
    }

    pub fn indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.points.len()).map(move |k| (k % self.n1, k / self.n1))
    }

    /// Largest `|x|_inf` on the boundary lines `i = 0` or `j = 0`.
    pub fn boundary_sup_norm(&self) -> f64 {
        self.indices()
            .zip(&self.points)
            .filter(|((i, j), _)| *i == 0 || *j == 0)
            .map(|(_, p)| p.x.amax())
            .fold(0.0, f64::max)
    }

    /// `max |x(i,j)|_inf` over `i >= floor(4 n1 / 5)`, `j >= floor(4 n2 / 5)`,
    /// divided by the boundary sup-norm (`inf` if the sweep was truncated).
    pub fn terminal_sup_norm(&self) -> f64 {
        if !self.is_complete() {
            return f64::INFINITY;
        }
        let (i0, j0) = (4 * self.n1 / 5, 4 * self.n2 / 5);
        let tail = self
            .indices()
            .zip(&self.points)
            .filter(|((i, j), _)| *i >= i0 && *j >= j0)
            .map(|(_, p)| p.x.amax())
            .fold(0.0, f64::max);
        let scale = self.boundary_sup_norm();
        if scale > 0.0 {
            tail / scale
        } else {
            tail
        }
    }

    pub fn sidecar(&self) -> Sidecar {
        Sidecar { diverged: self.diverged, n1: self.n1, n2: self.n2, truncated_at: self.truncated_at.map(|(i, j)| [i, j]) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sidecar {
    pub diverged: bool,
    #[serde(rename = "N1")]
    pub n1: usize,
    #[serde(rename = "N2")]
    pub n2: usize,
    pub truncated_at: Option<[usize; 2]>,
}

/// Summary of a decay run used by gain verification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecaySummary {
    pub n1: usize,
    pub n2: usize,
    pub diverged: bool,
    pub terminal_sup_norm: f64,
}

impl From<&TrajectoryGrid> for DecaySummary {
    fn from(g: &TrajectoryGrid) -> Self {
        Self { n1: g.n1, n2: g.n2, diverged: g.diverged, terminal_sup_norm: g.terminal_sup_norm() }
    }
}

/// Raster sweep over `0 <= i < n1`, `0 <= j < n2`.
pub fn simulate(
    model: &Roesser2D,
    reduced: &ReducedForm,
    boundary: &BoundaryData,
    n1: usize,
    n2: usize,
    u_field: Option<InputField<'_>>,
) -> Result<TrajectoryGrid> {
    let part = &reduced.partition;
    let d = model.dims();
    if part.n_h != d.n_h || part.n_v != d.n_v {
        return Err(Error::DimensionMismatch("reduced form was built for a different model".into()));
    }
    boundary.h.check("h", part.r_h, n2)?;
    boundary.v.check("v", part.r_v, n1)?;
    let closed = !matches!(reduced.closed_loop, ClosedLoop::Open);
    if closed && u_field.is_some() {
        return Err(Error::InvalidParams("an input field is only allowed in open loop".into()));
    }

    let mut grid = TrajectoryGrid {
        n1,
        n2,
        n_h: d.n_h,
        n_v: d.n_v,
        points: Vec::with_capacity(n1 * n2),
        diverged: false,
        truncated_at: None,
        sup_norm_per_antidiagonal: vec![0.0; (n1 + n2).saturating_sub(1)],
    };
    let mut v_carry: Vec<DVector<f64>> = (0..n1).map(|i| DVector::from_column_slice(boundary.v.at(i))).collect();
    for j in 0..n2 {
        let mut h_carry = DVector::from_column_slice(boundary.h.at(j));
        for i in 0..n1 {
            let xi_dyn = DVector::from_iterator(part.r_h + part.r_v, h_carry.iter().chain(v_carry[i].iter()).copied());
            let u_ext = match u_field {
                Some(f) => {
                    let u = f(i, j);
                    if u.len() != d.m {
                        return Err(Error::DimensionMismatch(format!(
                            "input field returned {} components at ({i}, {j}), expected {}",
                            u.len(),
                            d.m
                        )));
                    }
                    Some(u)
                }
                None => None,
            };
            let (x, next_h, next_v) = reduced.step(&xi_dyn, u_ext.as_ref());
            let u = u_ext.unwrap_or_else(|| reduced.closed_loop.input(model, &x));
            let y = model.f() * &x;
            let norm = x.amax();
            let slot = &mut grid.sup_norm_per_antidiagonal[i + j];
            *slot = slot.max(norm);
            grid.points.push(GridPoint { x, y, u });
            if !(norm <= DIVERGENCE_THRESHOLD) {
                grid.diverged = true;
                grid.truncated_at = Some((i, j));
                return Ok(grid);
            }
            h_carry = next_h;
            v_carry[i] = next_v;
        }
    }
    Ok(grid)
}

/// Reduce and simulate with a unit constant boundary.
pub fn simulate_unit(model: &Roesser2D, closed_loop: &ClosedLoop, n1: usize, n2: usize) -> Result<TrajectoryGrid> {
    let reduced = reduce_pointwise(model, closed_loop)?;
    simulate(model, &reduced, &BoundaryData::unit(&reduced), n1, n2, None)
}

/// Scalar channel for heatmap export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Xh(usize),
    Xv(usize),
    Y(usize),
    U(usize),
}

impl Default for Channel {
    fn default() -> Self {
        Self::Y(0)
    }
}

impl std::str::FromStr for Channel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParams(format!("unknown channel `{s}` (expected xh_K, xv_K, y_K or u_K)"));
        let (kind, idx) = s.rsplit_once('_').ok_or_else(bad)?;
        let k: usize = idx.parse().map_err(|_| bad())?;
        match kind {
            "xh" => Ok(Self::Xh(k)),
            "xv" => Ok(Self::Xv(k)),
            "y" => Ok(Self::Y(k)),
            "u" => Ok(Self::U(k)),
            _ => Err(bad()),
        }
    }
}

impl Channel {
    fn value(&self, grid: &TrajectoryGrid, p: &GridPoint) -> Option<f64> {
        match *self {
            Self::Xh(k) if k < grid.n_h => Some(p.x[k]),
            Self::Xv(k) if k < grid.n_v => Some(p.x[grid.n_h + k]),
            Self::Y(k) => p.y.get(k).copied(),
            Self::U(k) => p.u.get(k).copied(),
            _ => None,
        }
    }
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Long CSV: one row per stored point in raster order.
pub fn csv_long(grid: &TrajectoryGrid) -> String {
    let mut out = String::from("i,j");
    let (m, p) = grid.points.first().map(|pt| (pt.u.len(), pt.y.len())).unwrap_or((0, 0));
    for (prefix, count) in [("xh", grid.n_h), ("xv", grid.n_v), ("y", p), ("u", m)] {
        for k in 0..count {
            let _ = write!(out, ",{prefix}_{k}");
        }
    }
    out.push('\n');
    for ((i, j), pt) in grid.indices().zip(&grid.points) {
        let _ = write!(out, "{i},{j}");
        for v in pt.x.iter().chain(pt.y.iter()).chain(pt.u.iter()) {
            let _ = write!(out, ",{}", fmt_num(*v));
        }
        out.push('\n');
    }
    out
}

/// `n1` lines of `n2` values (row `i`, column `j`); points past a truncation
/// are written as `nan`.
pub fn csv_heatmap(grid: &TrajectoryGrid, channel: Channel) -> Result<String> {
    if let Some(p) = grid.points.first() {
        if channel.value(grid, p).is_none() {
            return Err(Error::InvalidParams(format!("channel {channel:?} does not exist for this model")));
        }
    }
    let mut out = String::new();
    for i in 0..grid.n1 {
        let row: Vec<String> = (0..grid.n2)
            .map(|j| match grid.get(i, j).and_then(|p| channel.value(grid, p)) {
                Some(v) => fmt_num(v),
                None => "nan".to_string(),
            })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    CsvLong,
    CsvHeatmap(Channel),
}

pub fn export_trajectory(grid: &TrajectoryGrid, path: impl AsRef<Path>, format: ExportFormat) -> Result<()> {
    let text = match format {
        ExportFormat::CsvLong => csv_long(grid),
        ExportFormat::CsvHeatmap(ch) => csv_heatmap(grid, ch)?,
    };
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn write_sidecar(grid: &TrajectoryGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&grid.sidecar()).expect("sidecar serializes");
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::{build_heat_model, HeatParams};
    use crate::model::FeedbackMode;

    fn heat() -> Roesser2D {
        build_heat_model(&HeatParams::paper()).unwrap()
    }

    fn paper_gain() -> ClosedLoop {
        ClosedLoop::with_gain(FeedbackMode::State, DMatrix::from_row_slice(1, 2, &[-10.0, 21.0084]))
    }

    #[test]
    fn heat_open_loop_reduction() {
        let r = reduce_pointwise(&heat(), &ClosedLoop::Open).unwrap();
        assert_eq!(r.partition.q(), 1);
        assert_eq!(r.m_alg, DMatrix::from_element(1, 1, 1.0));
        assert_eq!(r.condition, 1.0);
        assert!((r.spectral_radius() - 0.476).abs() < 1e-15);
    }

    #[test]
    fn heat_closed_loop_reduction() {
        let r = reduce_pointwise(&heat(), &paper_gain()).unwrap();
        assert!((r.m_alg[(0, 0)] - 0.01261).abs() < 1e-5);
        let pole = 0.006 / 0.0126050;
        assert!((r.spectral_radius() - 0.4758).abs() < 1e-3);
        assert!((r.spectral_radius() - pole).abs() < 1e-3);
    }

    #[test]
    fn identity_e_is_purely_dynamic() {
        let m = Roesser2D::autonomous(1, 1, DMatrix::identity(2, 2), DMatrix::zeros(2, 2)).unwrap();
        let r = reduce_pointwise(&m, &ClosedLoop::Open).unwrap();
        assert_eq!(r.partition.q(), 0);
        assert_eq!(r.m_alg.shape(), (0, 0));
        let g = simulate(&m, &r, &BoundaryData::constant(3.0, 1, 1), 6, 5, None).unwrap();
        for (i, j) in g.indices() {
            if i >= 1 && j >= 1 {
                assert_eq!(g.get(i, j).unwrap().x.amax(), 0.0);
            }
        }
    }

    #[test]
    fn zero_algebraic_coefficient_is_non_causal() {
        let m = Roesser2D::autonomous(
            1,
            1,
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 1.0, 0.0]),
        )
        .unwrap();
        assert!(matches!(reduce_pointwise(&m, &ClosedLoop::Open), Err(Error::NonCausalPointwise { .. })));
    }

    #[test]
    fn heat_open_loop_closed_form() {
        let g = simulate_unit(&heat(), &ClosedLoop::Open, 50, 50).unwrap();
        assert!(!g.diverged);
        for (i, j) in g.indices() {
            let p = g.get(i, j).unwrap();
            let xh = 0.476f64.powi(i as i32);
            assert!((p.x[0] - xh).abs() <= 1e-9);
            assert!((p.x[1] - 0.476 * xh).abs() <= 1e-9);
            assert_eq!(p.u[0], 0.0);
        }
    }

    #[test]
    fn heat_closed_loop_closed_form() {
        let g = simulate_unit(&heat(), &paper_gain(), 50, 50).unwrap();
        let r = reduce_pointwise(&heat(), &paper_gain()).unwrap();
        let rho = r.a_reduced[(0, 0)];
        for (i, j) in g.indices() {
            assert!((g.get(i, j).unwrap().x[0] - rho.powi(i as i32)).abs() <= 1e-9);
        }
        assert!(g.terminal_sup_norm() <= 1e-12);
    }

    #[test]
    fn divergence_truncates_grid() {
        let m = Roesser2D::autonomous(
            1,
            1,
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[1.2, 0.0, 0.0, 1.0]),
        )
        .unwrap();
        let g = simulate_unit(&m, &ClosedLoop::Open, 200, 3).unwrap();
        assert!(g.diverged);
        let (i, j) = g.truncated_at.unwrap();
        assert_eq!(j, 0);
        assert_eq!(g.points.len(), i + 1);
        assert!(1.2f64.powi(i as i32) > DIVERGENCE_THRESHOLD && 1.2f64.powi(i as i32 - 1) <= DIVERGENCE_THRESHOLD);
        assert!(g.terminal_sup_norm().is_infinite());
        let hm = csv_heatmap(&g, Channel::Xh(0)).unwrap();
        assert_eq!(hm.lines().count(), 200);
        assert!(hm.lines().next().unwrap().ends_with("nan,nan"));
        assert_eq!(g.sidecar().truncated_at, Some([i, 0]));
    }

    #[test]
    fn boundary_dimension_errors() {
        let h = heat();
        let r = reduce_pointwise(&h, &ClosedLoop::Open).unwrap();
        let bad = BoundaryData::constant(1.0, 2, 0);
        assert!(matches!(simulate(&h, &r, &bad, 3, 3, None), Err(Error::BoundaryDimensionMismatch(_))));
        let short = BoundaryData::tabulated(vec![vec![1.0]; 2], vec![]);
        assert!(matches!(simulate(&h, &r, &short, 3, 3, None), Err(Error::BoundaryDimensionMismatch(_))));
        let ok = BoundaryData::tabulated(vec![vec![1.0]; 3], vec![]);
        assert!(simulate(&h, &r, &ok, 3, 3, None).is_ok());
    }

    #[test]
    fn input_field_only_in_open_loop() {
        let h = heat();
        let r = reduce_pointwise(&h, &paper_gain()).unwrap();
        let f = |_: usize, _: usize| DVector::from_element(1, 1.0);
        let res = simulate(&h, &r, &BoundaryData::unit(&r), 2, 2, Some(&f));
        assert!(matches!(res, Err(Error::InvalidParams(_))));
    }

    #[test]
    fn long_csv_format() {
        let g = simulate_unit(&heat(), &ClosedLoop::Open, 2, 2).unwrap();
        let text = csv_long(&g);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "i,j,xh_0,xv_0,y_0,u_0");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,0,1.0000000000000000e0,"));
        assert!(lines[2].starts_with("1,0,"));
        let first: f64 = lines[2].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(first, 0.476);
    }

    #[test]
    fn heatmap_shape() {
        let g = simulate_unit(&heat(), &ClosedLoop::Open, 50, 50).unwrap();
        let hm = csv_heatmap(&g, Channel::default()).unwrap();
        assert_eq!(hm.lines().count(), 50);
        assert!(hm.lines().all(|l| l.split(',').count() == 50));
        assert!(csv_heatmap(&g, Channel::Xv(3)).is_err());
        assert_eq!("xv_0".parse::<Channel>().unwrap(), Channel::Xv(0));
    }

    #[test]
    fn export_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let g = simulate_unit(&heat(), &ClosedLoop::Open, 3, 2).unwrap();
        export_trajectory(&g, dir.path().join("t.csv"), ExportFormat::CsvLong).unwrap();
        write_sidecar(&g, dir.path().join("meta.json")).unwrap();
        let meta: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("meta.json")).unwrap()).unwrap();
        assert_eq!(meta["N1"], 3);
        assert_eq!(meta["diverged"], false);
        assert!(meta["truncated_at"].is_null());
        let missing = dir.path().join("no/such/dir/t.csv");
        assert!(matches!(export_trajectory(&g, missing, ExportFormat::CsvLong), Err(Error::Io(_))));
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use crate::lmi::{build_stability_for, certify_default, lyapunov_delta, LmiVariant};
    use proptest::prelude::*;

    /// Random (2, 1)-partitioned model with `E = diag(1, e1, e2)`, some
    /// entries possibly zero, scaled so that the reduced form stays moderate.
    fn model_strategy() -> impl Strategy<Value = Roesser2D> {
        (prop::collection::vec(-0.6..0.6f64, 9), prop::collection::vec(-0.5..0.5f64, 3), 0..3usize, 0..2usize)
            .prop_map(|(a, b, sing_h, sing_v)| {
                let mut a = DMatrix::from_row_slice(3, 3, &a);
                let mut e = DMatrix::identity(3, 3);
                if sing_h == 1 {
                    e[(1, 1)] = 0.0;
                    a[(1, 1)] = 1.5;
                }
                if sing_v == 1 {
                    e[(2, 2)] = 0.0;
                    a[(2, 2)] = -1.5;
                }
                let b = DMatrix::from_column_slice(3, 1, &b);
                let f = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 1.0]);
                Roesser2D::new(crate::model::PartitionDims::new(2, 1, 1, 1).unwrap(), e, a, b, f).unwrap()
            })
    }

    fn residual_ok(model: &Roesser2D, a_eff: &DMatrix<f64>, g: &TrajectoryGrid, with_input: bool) -> bool {
        let n_h = model.dims().n_h;
        for (i, j) in g.indices() {
            let (Some(p), Some(ph), Some(pv)) = (g.get(i, j), g.get(i + 1, j), g.get(i, j + 1)) else { continue };
            let mut next = DVector::zeros(model.n());
            next.rows_mut(0, n_h).copy_from(&ph.x.rows(0, n_h));
            let nv = model.n() - n_h;
            next.rows_mut(n_h, nv).copy_from(&pv.x.rows(n_h, nv));
            let mut rhs = a_eff * &p.x;
            if with_input {
                rhs += model.b() * &p.u;
            }
            let lhs = model.e() * next;
            let scale = 1.0 + rhs.amax().max(lhs.amax());
            if (lhs - rhs).amax() > 1e-9 * scale {
                return false;
            }
        }
        true
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

        #[test]
        fn simulated_points_satisfy_the_recursion(m in model_strategy(), k in prop::collection::vec(-1.0..1.0f64, 3),
                                                  bh in prop::collection::vec(-2.0..2.0f64, 12),
                                                  bv in prop::collection::vec(-2.0..2.0f64, 12)) {
            let loops = [ClosedLoop::Open, ClosedLoop::with_gain(crate::model::FeedbackMode::State, DMatrix::from_row_slice(1, 3, &k))];
            for cl in loops {
                let Ok(r) = reduce_pointwise(&m, &cl) else { continue };
                let (rh, rv) = (r.partition.r_h, r.partition.r_v);
                let bd = BoundaryData::tabulated(
                    (0..10).map(|j| bh[j..j + rh].to_vec()).collect(),
                    (0..10).map(|i| bv[i..i + rv].to_vec()).collect(),
                );
                let field = |i: usize, j: usize| DVector::from_element(1, ((i * 7 + j * 3) % 5) as f64 - 2.0);
                let open = matches!(cl, ClosedLoop::Open);
                let g = simulate(&m, &r, &bd, 10, 10, if open { Some(&field as InputField) } else { None }).unwrap();
                let a_eff = cl.effective_a(&m).unwrap();
                prop_assert!(residual_ok(&m, &a_eff, &g, open));
            }
        }

        #[test]
        fn simulation_is_linear_in_the_boundary(m in model_strategy(), c in -3.0..3.0f64) {
            let Ok(r) = reduce_pointwise(&m, &ClosedLoop::Open) else { return Ok(()) };
            let b = BoundaryData::constant(c, r.partition.r_h, r.partition.r_v);
            let g1 = simulate(&m, &r, &b, 12, 12, None).unwrap();
            let g2 = simulate(&m, &r, &b.scaled(2.0), 12, 12, None).unwrap();
            prop_assume!(!g1.diverged && !g2.diverged);
            for (p1, p2) in g1.points.iter().zip(&g2.points) {
                let tol = 1e-9 * (1.0 + p2.x.amax());
                prop_assert!((&p2.x - &p1.x * 2.0).amax() <= tol);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

        #[test]
        fn lyapunov_difference_is_nonpositive_along_trajectories(m in model_strategy()) {
            let cert = certify_default(&build_stability_for(&m, m.a(), LmiVariant::Eq12Direct), false).unwrap();
            let Some(c) = cert.certificate else { return Ok(()) };
            let Ok(g) = simulate_unit(&m, &ClosedLoop::Open, 15, 15) else { return Ok(()) };
            let p = c.p();
            for pt in &g.points {
                let scale = 1e-12 * (1.0 + pt.x.norm_squared()) * (1.0 + p.amax());
                prop_assert!(lyapunov_delta(m.e(), m.a(), &p, &pt.x) <= scale);
            }
        }
    }
}
