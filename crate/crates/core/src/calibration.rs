//! Per-pair linear range calibration.
//!
//! A campaign places each tag/anchor couple at known reference distances,
//! averages many measurements per distance and fits
//! `measured ≈ slope * reference + intercept` by ordinary least squares.
//! Later measurements are corrected with the inverse map
//! `(measured - intercept) / slope`.

use std::collections::BTreeMap;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RangingPair;
use crate::twr::{RangeMeasurement, RangingEngine};

/// Fits with a larger residual RMS are flagged as suspect.
pub const RESIDUAL_WARN_THRESHOLD: f64 = 0.05;

pub const DEFAULT_REFERENCE_DISTANCES: [f64; 4] = [1.0, 2.0, 3.0, 4.0];
pub const DEFAULT_SAMPLES_PER_POINT: usize = 1200;

/// Stream ids for campaign draws start here so they never collide with a
/// ranging schedule run on the same seed.
pub const CAMPAIGN_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSample {
    pub pair: RangingPair,
    pub reference_distance: f64,
    pub mean_measured: f64,
    pub sample_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationModel {
    pub pair: RangingPair,
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub n_points: usize,
}

impl CalibrationModel {
    pub fn identity(pair: RangingPair) -> Self {
        CalibrationModel {
            pair,
            slope: 1.0,
            intercept: 0.0,
            residual_rms: 0.0,
            n_points: 2,
        }
    }

    pub fn is_suspect(&self) -> bool {
        self.residual_rms > RESIDUAL_WARN_THRESHOLD
    }

    pub fn forward(&self, reference: f64) -> f64 {
        self.slope * reference + self.intercept
    }
}

/// Least-squares line through `(reference_distance, mean_measured)`.
///
/// Samples are sorted before accumulation so the result is bitwise
/// independent of input order.
pub fn fit_linear(samples: &[CalibrationSample]) -> Result<CalibrationModel> {
    let Some(first) = samples.first() else {
        return Err(Error::DegenerateFit("no samples".into()));
    };
    if let Some(s) = samples.iter().find(|s| s.pair != first.pair) {
        return Err(Error::domain(format!(
            "samples mix pairs {} and {}",
            first.pair, s.pair
        )));
    }
    if let Some(s) = samples
        .iter()
        .find(|s| !(s.reference_distance > 0.0) || !s.mean_measured.is_finite() || s.sample_count == 0)
    {
        return Err(Error::domain(format!(
            "invalid calibration sample at d_r = {}",
            s.reference_distance
        )));
    }

    let mut points: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| (s.reference_distance, s.mean_measured))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();

    let distinct = points.windows(2).filter(|w| w[0].0 != w[1].0).count() + 1;
    if distinct < 2 || sxx == 0.0 {
        return Err(Error::DegenerateFit(format!(
            "need 2 distinct reference distances for {}, got {distinct}",
            first.pair
        )));
    }

    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    if !(slope > 0.0) {
        return Err(Error::DegenerateFit(format!(
            "non-positive slope {slope} for {}",
            first.pair
        )));
    }
    let residual_rms = (points
        .iter()
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();

    let model = CalibrationModel {
        pair: first.pair,
        slope,
        intercept,
        residual_rms,
        n_points: points.len(),
    };
    if model.is_suspect() {
        warn!(
            "calibration for {} has residual rms {:.4} m, check the campaign setup",
            model.pair, residual_rms
        );
    }
    Ok(model)
}

/// Corrected distance `(measured - intercept) / slope`.
pub fn apply_calibration(model: &CalibrationModel, measured: f64) -> f64 {
    (measured - model.intercept) / model.slope
}

/// Drives `engine` at each reference distance, averages
/// `samples_per_point` measurements per distance and fits the line.
pub fn run_calibration_campaign(
    pair: RangingPair,
    reference_distances: &[f64],
    samples_per_point: usize,
    engine: &RangingEngine,
) -> Result<CalibrationModel> {
    let samples = collect_campaign_samples(pair, reference_distances, samples_per_point, engine)?;
    fit_linear(&samples)
}

pub fn collect_campaign_samples(
    pair: RangingPair,
    reference_distances: &[f64],
    samples_per_point: usize,
    engine: &RangingEngine,
) -> Result<Vec<CalibrationSample>> {
    if reference_distances.is_empty() {
        return Err(Error::domain("no reference distances"));
    }
    if samples_per_point == 0 {
        return Err(Error::domain("samples_per_point must be at least 1"));
    }
    reference_distances
        .iter()
        .enumerate()
        .map(|(i, &reference)| {
            let point_engine = engine.with_stream(CAMPAIGN_STREAM_BASE + i as u64);
            let mut sum = 0.0;
            for k in 0..samples_per_point as u64 {
                // 10 Hz pacing, as the schedule would produce it
                let m = point_engine.measure_range(pair, reference, k, k as f64 / 10.0)?;
                sum += m.distance;
            }
            Ok(CalibrationSample {
                pair,
                reference_distance: reference,
                mean_measured: sum / samples_per_point as f64,
                sample_count: samples_per_point,
            })
        })
        .collect()
}

/// Calibration models keyed by pair. Pairs without a model pass through
/// unchanged.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CalibrationSet {
    pub models: BTreeMap<RangingPair, CalibrationModel>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CalibrationRow {
    tag: u16,
    anchor: u16,
    m_c: f64,
    q_c: f64,
    residual_rms: f64,
    n_points: usize,
}

impl CalibrationSet {
    pub fn from_models(models: impl IntoIterator<Item = CalibrationModel>) -> Self {
        CalibrationSet {
            models: models.into_iter().map(|m| (m.pair, m)).collect(),
        }
    }

    /// Runs a campaign for every pair.
    pub fn calibrate(
        pairs: &[RangingPair],
        reference_distances: &[f64],
        samples_per_point: usize,
        engine: &RangingEngine,
    ) -> Result<Self> {
        pairs
            .iter()
            .map(|pair| {
                run_calibration_campaign(*pair, reference_distances, samples_per_point, engine)
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::from_models)
    }

    pub fn correct(&self, pair: &RangingPair, measured: f64) -> f64 {
        match self.models.get(pair) {
            Some(model) => apply_calibration(model, measured),
            None => measured,
        }
    }

    pub fn correct_measurement(&self, m: &RangeMeasurement) -> f64 {
        self.correct(&m.pair, m.distance)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for m in self.models.values() {
            w.serialize(CalibrationRow {
                tag: m.pair.tag.0,
                anchor: m.pair.anchor.0,
                m_c: m.slope,
                q_c: m.intercept,
                residual_rms: m.residual_rms,
                n_points: m.n_points,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut models = Vec::new();
        for row in rdr.deserialize::<CalibrationRow>() {
            let row = row?;
            if !(row.m_c > 0.0) {
                return Err(Error::domain(format!(
                    "calibration slope for d{}{} must be positive",
                    row.tag, row.anchor
                )));
            }
            models.push(CalibrationModel {
                pair: RangingPair::new(row.tag, row.anchor),
                slope: row.m_c,
                intercept: row.q_c,
                residual_rms: row.residual_rms,
                n_points: row.n_points,
            });
        }
        Ok(Self::from_models(models))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}
