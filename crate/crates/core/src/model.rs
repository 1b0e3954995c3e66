//! Singular Roesser models
//!
//! A discrete 2D descriptor system in Roesser form
//!
//! ```text
//! E [x^h(i+1, j); x^v(i, j+1)] = A [x^h(i, j); x^v(i, j)] + B u(i, j)
//!                       y(i, j) = F [x^h(i, j); x^v(i, j)]
//! ```
//!
//! where `E` may be singular. `E` must be block-diagonal over the
//! horizontal/vertical partition so that the Lyapunov function splits into
//! separate `E^h`, `E^v` factors.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg;

/// Default relative threshold for numerical rank decisions.
pub const TAU_RANK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionDims {
    pub n_h: usize,
    pub n_v: usize,
    pub m: usize,
    pub p: usize,
}

impl PartitionDims {
    pub fn new(n_h: usize, n_v: usize, m: usize, p: usize) -> Result<Self> {
        if n_h + n_v == 0 {
            return Err(Error::DimensionMismatch("n = n_h + n_v must be at least 1".into()));
        }
        Ok(Self { n_h, n_v, m, p })
    }

    pub fn n(&self) -> usize {
        self.n_h + self.n_v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Roesser2D {
    dims: PartitionDims,
    e: DMatrix<f64>,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    f: DMatrix<f64>,
}

impl Roesser2D {
    /// Builds a model after checking shapes and finiteness. Block structure of
    /// `E` is checked by [`Roesser2D::validate`], not here, so that invalid
    /// files can still be loaded and reported on.
    pub fn new(
        dims: PartitionDims,
        e: DMatrix<f64>,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        f: DMatrix<f64>,
    ) -> Result<Self> {
        let n = dims.n();
        if n == 0 {
            return Err(Error::DimensionMismatch("n = n_h + n_v must be at least 1".into()));
        }
        let check = |name: &str, m: &DMatrix<f64>, r: usize, c: usize| -> Result<()> {
            if m.shape() != (r, c) {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {r}x{c}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(name.to_string()));
            }
            Ok(())
        };
        check("E", &e, n, n)?;
        check("A", &a, n, n)?;
        check("B", &b, n, dims.m)?;
        check("F", &f, dims.p, n)?;
        Ok(Self { dims, e, a, b, f })
    }

    /// Model without inputs or outputs.
    pub fn autonomous(n_h: usize, n_v: usize, e: DMatrix<f64>, a: DMatrix<f64>) -> Result<Self> {
        let dims = PartitionDims::new(n_h, n_v, 0, 0)?;
        let n = dims.n();
        Self::new(dims, e, a, DMatrix::zeros(n, 0), DMatrix::zeros(0, n))
    }

    pub fn dims(&self) -> PartitionDims {
        self.dims
    }
    pub fn n(&self) -> usize {
        self.dims.n()
    }
    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn e_h(&self) -> DMatrix<f64> {
        let nh = self.dims.n_h;
        self.e.view((0, 0), (nh, nh)).into_owned()
    }

    pub fn e_v(&self) -> DMatrix<f64> {
        let (nh, nv) = (self.dims.n_h, self.dims.n_v);
        self.e.view((nh, nh), (nv, nv)).into_owned()
    }

    /// Same model with a different dynamics matrix (used for closed loops).
    pub fn with_a(&self, a: DMatrix<f64>) -> Result<Self> {
        Self::new(self.dims, self.e.clone(), a, self.b.clone(), self.f.clone())
    }

    pub fn validate(&self) -> Result<ValidationReport> {
        self.validate_with(TAU_RANK)
    }

    pub fn validate_with(&self, tau_rank: f64) -> Result<ValidationReport> {
        let nh = self.dims.n_h;
        let n = self.n();
        let mut coupling = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if (i < nh) != (j < nh) && self.e[(i, j)] != 0.0 {
                    coupling.push((i, j, self.e[(i, j)]));
                }
            }
        }
        if !coupling.is_empty() {
            return Err(Error::NonBlockDiagonalE { entries: coupling });
        }
        let sv = linalg::singular_values(&self.e);
        let cutoff = rank_cutoff(&sv, tau_rank);
        let rank_e = sv.iter().filter(|&&s| s > cutoff).count();
        let rank_h = numerical_rank(&self.e_h(), cutoff);
        let rank_v = numerical_rank(&self.e_v(), cutoff);
        Ok(ValidationReport {
            valid: true,
            block_diagonal: true,
            rank_e,
            rank_h,
            rank_v,
            singular_values_e: sv,
            tau_rank,
        })
    }

    /// Numerical rank of `E` with the default threshold.
    pub fn rank_e(&self) -> usize {
        let sv = linalg::singular_values(&self.e);
        let cutoff = rank_cutoff(&sv, TAU_RANK);
        sv.iter().filter(|&&s| s > cutoff).count()
    }
}

fn rank_cutoff(sv: &[f64], tau_rank: f64) -> f64 {
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax > 0.0 {
        tau_rank * smax
    } else {
        0.0
    }
}

fn numerical_rank(m: &DMatrix<f64>, cutoff: f64) -> usize {
    linalg::singular_values(m).iter().filter(|&&s| s > cutoff).count()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub block_diagonal: bool,
    pub rank_e: usize,
    pub rank_h: usize,
    pub rank_v: usize,
    pub singular_values_e: Vec<f64>,
    pub tau_rank: f64,
}

/// Orthogonal factorization of one diagonal block of `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFactor {
    /// Left factor; `U^T E_d V = diag(sigma_1..sigma_r, 0..)`.
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub rank: usize,
    /// Nonzero singular values, descending.
    pub sigma: Vec<f64>,
}

impl BlockFactor {
    fn of(block: &DMatrix<f64>, cutoff: f64) -> Self {
        let (u, s, v) = linalg::svd_sorted(block);
        let rank = s.iter().filter(|&&x| x > cutoff).count();
        if rank == 0 {
            let k = block.nrows();
            return Self { u: DMatrix::identity(k, k), v: DMatrix::identity(k, k), rank, sigma: vec![] };
        }
        let sigma = s.iter().take(rank).copied().collect();
        Self { u, v, rank, sigma }
    }

    pub fn size(&self) -> usize {
        self.u.nrows()
    }

    /// Row scaling `S^{-1} U^T` that maps the block to `diag(I_r, 0)`.
    pub fn left_transform(&self) -> DMatrix<f64> {
        let mut t = self.u.transpose();
        for (k, s) in self.sigma.iter().enumerate() {
            let mut row = t.row_mut(k);
            row /= *s;
        }
        t
    }

    /// `S^{-1} U^T E_d V`, which should equal `diag(I_r, 0)`.
    pub fn scaled_product(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        self.left_transform() * block * &self.v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankDecomposition {
    pub h: BlockFactor,
    pub v: BlockFactor,
}

impl RankDecomposition {
    pub fn rank(&self) -> usize {
        self.h.rank + self.v.rank
    }
}

pub fn rank_decompose(model: &Roesser2D) -> RankDecomposition {
    rank_decompose_with(model, TAU_RANK)
}

/// Per-block SVD factorization; the rank threshold is relative to the largest
/// singular value of the whole `E`, so `r_h + r_v = rank(E)`.
pub fn rank_decompose_with(model: &Roesser2D, tau_rank: f64) -> RankDecomposition {
    let sv = linalg::singular_values(model.e());
    let cutoff = rank_cutoff(&sv, tau_rank);
    RankDecomposition {
        h: BlockFactor::of(&model.e_h(), cutoff),
        v: BlockFactor::of(&model.e_v(), cutoff),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackMode {
    State,
    Output,
}

impl std::str::FromStr for FeedbackMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "state" => Ok(Self::State),
            "output" => Ok(Self::Output),
            other => Err(Error::InvalidParams(format!("unknown mode `{other}`"))),
        }
    }
}

/// Which loop is closed around the plant.
#[derive(Debug, Clone, PartialEq)]
pub enum ClosedLoop {
    Open,
    /// `u = K x`, `K` is m x n.
    StateFeedback(DMatrix<f64>),
    /// `u = -K y`, `K` is m x p.
    OutputFeedback(DMatrix<f64>),
}

impl ClosedLoop {
    pub fn with_gain(mode: FeedbackMode, k: DMatrix<f64>) -> Self {
        match mode {
            FeedbackMode::State => Self::StateFeedback(k),
            FeedbackMode::Output => Self::OutputFeedback(k),
        }
    }

    pub fn mode_name(&self) -> &'static str {
        match self {
            Self::Open => "open",
            Self::StateFeedback(_) => "state_feedback",
            Self::OutputFeedback(_) => "output_feedback",
        }
    }

    /// `A`, `A + B K` or `A - B K F`.
    pub fn effective_a(&self, model: &Roesser2D) -> Result<DMatrix<f64>> {
        let d = model.dims();
        match self {
            Self::Open => Ok(model.a().clone()),
            Self::StateFeedback(k) => {
                if k.shape() != (d.m, d.n()) {
                    return Err(Error::DimensionMismatch(format!(
                        "state-feedback gain is {}x{}, expected {}x{}",
                        k.nrows(),
                        k.ncols(),
                        d.m,
                        d.n()
                    )));
                }
                Ok(model.a() + model.b() * k)
            }
            Self::OutputFeedback(k) => {
                if k.shape() != (d.m, d.p) {
                    return Err(Error::DimensionMismatch(format!(
                        "output-feedback gain is {}x{}, expected {}x{}",
                        k.nrows(),
                        k.ncols(),
                        d.m,
                        d.p
                    )));
                }
                Ok(model.a() - model.b() * k * model.f())
            }
        }
    }

    /// Input applied at state `x` (empty in open loop).
    pub fn input(&self, model: &Roesser2D, x: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
        match self {
            Self::Open => nalgebra::DVector::zeros(model.dims().m),
            Self::StateFeedback(k) => k * x,
            Self::OutputFeedback(k) => -(k * (model.f() * x)),
        }
    }
}

// ---------------------------------------------------------------------------
// File I/O

#[derive(Serialize)]
struct ModelFile {
    n_h: usize,
    n_v: usize,
    m: usize,
    p: usize,
    #[serde(rename = "E")]
    e: Vec<Vec<f64>>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B", skip_serializing_if = "Option::is_none")]
    b: Option<Vec<Vec<f64>>>,
    #[serde(rename = "F", skip_serializing_if = "Option::is_none")]
    f: Option<Vec<Vec<f64>>>,
}

pub fn model_to_json(model: &Roesser2D) -> String {
    let d = model.dims();
    let file = ModelFile {
        n_h: d.n_h,
        n_v: d.n_v,
        m: d.m,
        p: d.p,
        e: linalg::to_rows(model.e()),
        a: linalg::to_rows(model.a()),
        b: (d.m > 0).then(|| linalg::to_rows(model.b())),
        f: (d.p > 0).then(|| linalg::to_rows(model.f())),
    };
    serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
}

pub fn model_from_json(text: &str) -> Result<Roesser2D> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        context: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let obj = root
        .as_object()
        .ok_or_else(|| Error::Schema("model file must be a JSON object".into()))?;

    let dim = |key: &str| -> Result<usize> {
        let v = obj.get(key).ok_or_else(|| Error::Schema(format!("missing key `{key}`")))?;
        v.as_u64()
            .map(|x| x as usize)
            .ok_or_else(|| Error::Schema(format!("`{key}` must be a non-negative integer")))
    };
    let dims = PartitionDims::new(dim("n_h")?, dim("n_v")?, dim("m")?, dim("p")?)?;
    let n = dims.n();

    let e = parse_matrix(obj.get("E"), "E", n, n)?;
    let a = parse_matrix(obj.get("A"), "A", n, n)?;
    let b = match obj.get("B") {
        None if dims.m == 0 => DMatrix::zeros(n, 0),
        v => parse_matrix(v, "B", n, dims.m)?,
    };
    let f = match obj.get("F") {
        None if dims.p == 0 => DMatrix::zeros(0, n),
        v => parse_matrix(v, "F", dims.p, n)?,
    };
    Roesser2D::new(dims, e, a, b, f)
}

fn parse_matrix(v: Option<&Value>, key: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let v = v.ok_or_else(|| Error::Schema(format!("missing key `{key}`")))?;
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Schema(format!("`{key}` must be an array of rows")))?;
    // Zero-column matrices may be written as `[]` or as a list of empty rows.
    if cols == 0 && arr.is_empty() {
        return Ok(DMatrix::zeros(rows, 0));
    }
    let mut data: Vec<Vec<f64>> = Vec::with_capacity(arr.len());
    let mut width = None;
    for (r, row) in arr.iter().enumerate() {
        let row = row.as_array().ok_or_else(|| Error::Parse {
            context: format!("key `{key}`, row {r}"),
            message: "row is not an array".into(),
        })?;
        let w = *width.get_or_insert(row.len());
        if row.len() != w {
            return Err(Error::Parse {
                context: format!("key `{key}`, row {r}"),
                message: format!("ragged row: {} entries, expected {w}", row.len()),
            });
        }
        let vals = row
            .iter()
            .enumerate()
            .map(|(c, x)| {
                x.as_f64().ok_or_else(|| Error::Parse {
                    context: format!("key `{key}`, row {r}, column {c}"),
                    message: format!("expected a number, found {x}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        data.push(vals);
    }
    let w = width.unwrap_or(0);
    if data.len() != rows || w != cols {
        return Err(Error::DimensionMismatch(format!(
            "{key} is {}x{w}, expected {rows}x{cols}",
            data.len()
        )));
    }
    Ok(DMatrix::from_fn(rows, cols, |i, j| data[i][j]))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<Roesser2D> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    model_from_json(&text)
}

pub fn write_model(model: &Roesser2D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_json(model) + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
