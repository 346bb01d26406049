//! Same measurements with and without per-pair calibration, compared by decile.

use coloc::calibration::CalibrationSet;
use coloc::geometry::{Shape, CANONICAL_PAIRS};
use coloc::harness::{compare_runs, run_experiment, RunConfig};

fn main() -> coloc::Result<()> {
    let raw = RunConfig { shape: Shape::Rectangle, ..RunConfig::default() };
    let calibration = CalibrationSet::calibrate(&CANONICAL_PAIRS, &[1.0, 2.0, 3.0, 4.0], 1200, &raw.engine)?;
    let calibrated = RunConfig { calibration: Some(calibration), ..raw.clone() };

    let a = run_experiment(&calibrated)?.evaluate()?;
    let b = run_experiment(&raw)?.evaluate()?;
    println!("calibrated mean rmse {:.4} m, raw {:.4} m", a.summary.mean_rmse_excluding_origin(), b.summary.mean_rmse_excluding_origin());
    print!("{}", compare_runs(&a, &b)?);
    Ok(())
}
