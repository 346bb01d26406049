//! Reference-distance campaign for every pair, then the fitted models.

use coloc::calibration::{collect_campaign_samples, fit_linear, DEFAULT_REFERENCE_DISTANCES};
use coloc::geometry::CANONICAL_PAIRS;
use coloc::twr::RangingEngine;

fn main() -> coloc::Result<()> {
    let engine = RangingEngine::default();
    for pair in CANONICAL_PAIRS {
        let samples = collect_campaign_samples(pair, &DEFAULT_REFERENCE_DISTANCES, 1200, &engine)?;
        for s in &samples {
            println!("{pair} ref {:.1} m -> mean {:.4} m", s.reference_distance, s.mean_measured);
        }
        let model = fit_linear(&samples)?;
        let truth = engine.error.bias(&pair);
        println!(
            "{pair}: m_c {:.4} (injected {:.4}), q_c {:.4} (injected {:.4}), residual rms {:.1e}\n",
            model.slope, truth.slope, model.intercept, truth.intercept, model.residual_rms
        );
    }
    Ok(())
}
