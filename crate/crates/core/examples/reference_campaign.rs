//! The three reference geometries, calibrated, 120 s at 10 Hz each.

use coloc::calibration::{CalibrationSet, DEFAULT_REFERENCE_DISTANCES, DEFAULT_SAMPLES_PER_POINT};
use coloc::geometry::{Shape, CANONICAL_PAIRS};
use coloc::harness::{run_experiment_to_dir, RunConfig};
use coloc::twr::RangingEngine;

fn main() -> coloc::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "campaign".into());
    let engine = RangingEngine::default();
    let calibration = CalibrationSet::calibrate(&CANONICAL_PAIRS, &DEFAULT_REFERENCE_DISTANCES, DEFAULT_SAMPLES_PER_POINT, &engine)?;
    for shape in Shape::ALL {
        let config = RunConfig {
            shape,
            engine: engine.clone(),
            calibration: Some(calibration.clone()),
            ..RunConfig::default()
        };
        let dir = std::path::Path::new(&out).join(shape.name());
        let (_, summary) = run_experiment_to_dir(&config, &dir)?;
        let rmse: Vec<String> = summary.nodes.values().map(|n| format!("{:.4}", n.rmse)).collect();
        println!("{shape:<13} node rmse {}  mean {:.4}  -> {}", rmse.join(" "), summary.mean_rmse(), dir.display());
    }
    Ok(())
}
