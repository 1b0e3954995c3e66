//! Browser bindings for the heat-transfer example. Each export takes plain
//! numbers or strings and returns a JSON string; failures come back as
//! `{"error_code": ..., "message": ...}`.

use nalgebra::DMatrix;
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

use roesser2d::admissibility::{analyze, ScanOptions};
use roesser2d::heat::{build_heat_model, HeatParams};
use roesser2d::lmi::{build_stability, certify_default, LmiVariant};
use roesser2d::model::model_to_json;
use roesser2d::simulate::simulate_unit;
use roesser2d::synthesis::{verify_gain, SynthesisOptions};
use roesser2d::{ClosedLoop, Error, FeedbackMode, Result, Roesser2D};

const MAX_GRID: usize = 200;

fn heat(dx: f64, dt: f64, rounded: bool) -> Result<Roesser2D> {
    build_heat_model(&HeatParams::new(dx, dt).with_paper_rounding(rounded))
}

fn respond(r: Result<Value>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error_code": e.code(), "message": e.to_string() }).to_string(),
    }
}

fn parse_gain(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            let v: f64 = s.trim().parse().map_err(|_| Error::Parse { context: "gain".into(), message: format!("entry {s:?}") })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite(format!("gain entry {s:?}")))
            }
        })
        .collect()
}

fn gain_matrix(model: &Roesser2D, mode: FeedbackMode, entries: &[f64]) -> Result<DMatrix<f64>> {
    let d = model.dims();
    let cols = match mode {
        FeedbackMode::State => d.n_h + d.n_v,
        FeedbackMode::Output => d.p,
    };
    if entries.len() != d.m * cols {
        return Err(Error::DimensionMismatch(format!(
            "{mode:?} gain needs {} x {cols} entries, got {}",
            d.m,
            entries.len()
        )));
    }
    Ok(DMatrix::from_row_slice(d.m, cols, entries))
}

fn parse_mode(mode: &str) -> Result<FeedbackMode> {
    match mode {
        "state" => Ok(FeedbackMode::State),
        "output" => Ok(FeedbackMode::Output),
        other => Err(Error::Parse { context: "mode".into(), message: format!("{other:?} (expected state or output)") }),
    }
}

/// Heat model, its admissibility analysis and the three stability LMIs.
#[wasm_bindgen]
pub fn heat_analysis(dx: f64, dt: f64, rounded: bool) -> String {
    respond((|| {
        let model = heat(dx, dt, rounded)?;
        let report = analyze(&model, &ScanOptions::default());
        let mut lmis = serde_json::Map::new();
        for variant in LmiVariant::ALL {
            let res = certify_default(&build_stability(&model, variant), false)?;
            lmis.insert(
                variant.name().into(),
                json!({
                    "status": res.outcome.status(),
                    "structural": res.precheck.is_some(),
                    "certificate": res.certificate,
                }),
            );
        }
        let model_json: Value = serde_json::from_str(&model_to_json(&model)).expect("model JSON");
        Ok(json!({
            "model": model_json,
            "admissible": report.admissible_indication(),
            "analysis": report,
            "lmi": lmis,
        }))
    })())
}

/// Closed-loop check of a gain given as comma-separated row-major entries.
#[wasm_bindgen]
pub fn verify_heat_gain(dx: f64, dt: f64, rounded: bool, mode: &str, gain: &str) -> String {
    respond((|| {
        let model = heat(dx, dt, rounded)?;
        let mode = parse_mode(mode)?;
        let k = gain_matrix(&model, mode, &parse_gain(gain)?)?;
        let opts = SynthesisOptions { simulation_grid: Some((50, 50)), ..SynthesisOptions::default() };
        let rep = verify_gain(&model, &k, mode, &opts)?;
        Ok(json!({
            "verified": rep.verified,
            "spectrum_stable": rep.spectrum_stable(),
            "reduced_poles": rep.reduced_poles,
            "reduced_spectral_radius": rep.reduced_spectral_radius,
            "terminal_sup_norm": rep.simulation_decay.as_ref().map(|d| d.terminal_sup_norm),
            "diagnostics": rep.diagnostics,
        }))
    })())
}

/// First state on an `n x n` grid with unit boundary values, as rows over `j`.
/// An empty `gain` simulates the open loop.
#[wasm_bindgen]
pub fn simulate_heat(dx: f64, dt: f64, rounded: bool, mode: &str, gain: &str, n: usize) -> String {
    respond((|| {
        if n == 0 || n > MAX_GRID {
            return Err(Error::InvalidParams(format!("grid size {n} outside 1..={MAX_GRID}")));
        }
        let model = heat(dx, dt, rounded)?;
        let cl = if gain.trim().is_empty() {
            ClosedLoop::Open
        } else {
            let mode = parse_mode(mode)?;
            ClosedLoop::with_gain(mode, gain_matrix(&model, mode, &parse_gain(gain)?)?)
        };
        let grid = simulate_unit(&model, &cl, n, n)?;
        let rows: Vec<Vec<Option<f64>>> = (0..n)
            .map(|j| (0..n).map(|i| grid.get(i, j).map(|p| p.x[0])).collect())
            .collect();
        Ok(json!({
            "n": n,
            "diverged": grid.diverged,
            "terminal_sup_norm": grid.terminal_sup_norm(),
            "values": rows,
        }))
    })())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: String) -> Value {
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn analysis_of_reference_grid() {
        let v = parse(heat_analysis(0.1, 0.1, true));
        assert_eq!(v["admissible"], true);
        assert_eq!(v["lmi"]["faithful"]["structural"], true);
        assert_eq!(v["lmi"]["eq12"]["status"], "feasible");
    }

    #[test]
    fn reference_gain_verifies() {
        let v = parse(verify_heat_gain(0.1, 0.1, true, "state", "-10, 21.0084"));
        assert_eq!(v["verified"], true);
        assert!((v["reduced_spectral_radius"].as_f64().unwrap() - 0.476).abs() < 1e-3);
    }

    #[test]
    fn bad_gains_report_errors() {
        let v = parse(verify_heat_gain(0.1, 0.1, true, "output", "-0.8137, 0.5039"));
        assert_eq!(v["error_code"], "DIMENSION_MISMATCH");
        let v = parse(verify_heat_gain(0.1, 0.1, true, "state", "1, x"));
        assert!(v["error_code"].is_string());
        let v = parse(simulate_heat(0.1, 0.1, true, "state", "", 0));
        assert!(v["error_code"].is_string());
    }

    #[test]
    fn open_loop_heatmap_decays_geometrically() {
        let v = parse(simulate_heat(0.1, 0.1, true, "state", "", 10));
        let rows = v["values"].as_array().unwrap();
        assert_eq!(rows.len(), 10);
        let x = rows[3][4].as_f64().unwrap();
        assert!((x - 0.476f64.powi(4)).abs() < 1e-12);
    }
}
