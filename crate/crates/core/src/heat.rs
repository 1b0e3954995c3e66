//! Heat-transfer tube model.
//!
//! Backward differences of `T_x = -T_t - T + U` on a `(dx, dt)` grid, with
//! `x^h(i, j) = T((i-1) dx, j dt)` and `x^v(i, j) = T(i dx, j dt)`, give a
//! singular Roesser model with `E = diag(1, 0)`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{PartitionDims, Roesser2D};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatParams {
    pub dx: f64,
    pub dt: f64,
    /// Output row `F`.
    pub f_row: [f64; 2],
    /// Use the 3-decimal coefficients as printed for (0.1, 0.1), obtained by
    /// truncation (0.47619 -> 0.476, 0.047619 -> 0.047).
    pub paper_rounding: bool,
}

impl HeatParams {
    pub fn new(dx: f64, dt: f64) -> Self {
        Self { dx, dt, f_row: [0.1, 0.1], paper_rounding: false }
    }

    /// `dx = dt = 0.1` with printed 3-decimal coefficients.
    pub fn paper() -> Self {
        Self { paper_rounding: true, ..Self::new(0.1, 0.1) }
    }

    pub fn with_paper_rounding(mut self, on: bool) -> Self {
        self.paper_rounding = on;
        self
    }

    fn check(&self) -> Result<()> {
        for (name, v) in [("dx", self.dx), ("dt", self.dt)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be finite and positive, got {v}")));
            }
        }
        if self.f_row.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("output row F must be finite".into()));
        }
        Ok(())
    }
}

/// Exact `(a, b)` with `a = dt / (dx + dt + dx dt)` and `b = dx dt / (dx + dt + dx dt)`.
pub fn heat_coefficients(dx: f64, dt: f64) -> (f64, f64) {
    let den = dx + dt + dx * dt;
    (dt / den, dx * dt / den)
}

fn truncate3(x: f64) -> f64 {
    (x * 1000.0).trunc() / 1000.0
}

pub fn build_heat_model(params: &HeatParams) -> Result<Roesser2D> {
    params.check()?;
    let (mut a, mut b) = heat_coefficients(params.dx, params.dt);
    if params.paper_rounding {
        a = truncate3(a);
        b = truncate3(b);
    }
    let dims = PartitionDims::new(1, 1, 1, 1)?;
    Roesser2D::new(
        dims,
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        DMatrix::from_row_slice(2, 2, &[a, 0.0, -a, 1.0]),
        DMatrix::from_column_slice(2, 1, &[b, -b]),
        DMatrix::from_row_slice(1, 2, &params.f_row),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tenth_step_coefficients() {
        let m = build_heat_model(&HeatParams::new(0.1, 0.1)).unwrap();
        assert!((m.a()[(0, 0)] - 0.1 / 0.21).abs() < 1e-15);
        assert!((m.b()[(0, 0)] - 0.01 / 0.21).abs() < 1e-15);
        assert_eq!(m.a()[(1, 1)], 1.0);
        assert_eq!(m.f()[(0, 0)], 0.1);
    }

    #[test]
    fn printed_coefficients_with_rounding() {
        let m = build_heat_model(&HeatParams::paper()).unwrap();
        assert_eq!(m.a()[(0, 0)], 0.476);
        assert_eq!(m.a()[(1, 0)], -0.476);
        assert_eq!(m.b()[(0, 0)], 0.047);
        assert_eq!(m.b()[(1, 0)], -0.047);
    }

    #[test]
    fn unit_steps_give_one_third() {
        let (a, b) = heat_coefficients(1.0, 1.0);
        assert!((a - 1.0 / 3.0).abs() < 1e-15);
        assert!((b - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_steps_rejected() {
        for (dx, dt) in [(0.0, 0.1), (0.1, -1.0), (f64::NAN, 0.1), (0.1, f64::INFINITY)] {
            assert!(matches!(build_heat_model(&HeatParams::new(dx, dt)), Err(Error::InvalidParams(_))));
        }
    }

    proptest! {
        #[test]
        fn equal_steps_simplify(d in 1e-3f64..10.0) {
            let (a, _) = heat_coefficients(d, d);
            prop_assert!((a - 1.0 / (2.0 + d)).abs() <= 1e-14 * a.max(1.0));
        }

        #[test]
        fn coefficient_identities(dx in 1e-3f64..10.0, dt in 1e-3f64..10.0) {
            let (a, b) = heat_coefficients(dx, dt);
            let den = dx + dt + dx * dt;
            prop_assert!((a * den - dt).abs() <= 1e-15 * dt * 4.0);
            prop_assert!((b - a * dx).abs() <= 1e-15 * b.max(1e-300) * 4.0);
            prop_assert!(a > 0.0 && a < 1.0);
            let m = build_heat_model(&HeatParams::new(dx, dt)).unwrap();
            prop_assert_eq!(m.validate().unwrap().rank_e, 1);
        }
    }
}
