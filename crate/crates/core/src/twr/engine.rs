use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::exchange::{simulate_exchange, tof_estimate, ClockModel, DEFAULT_TICK, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::geometry::{
    true_distances, NetworkTopology, NodeId, Positions, RangingPair, D10, D20, D21, D30, D31,
};

/// Per-pair linear distortion `measured = slope * true + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairBias {
    pub slope: f64,
    pub intercept: f64,
}

impl PairBias {
    pub const IDENTITY: PairBias = PairBias {
        slope: 1.0,
        intercept: 0.0,
    };

    pub fn apply(&self, d: f64) -> f64 {
        self.slope * d + self.intercept
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    pub gaussian_sigma: f64,
    /// Pairs without an entry are unbiased.
    pub pair_bias: BTreeMap<RangingPair, PairBias>,
    pub outlier_prob: f64,
    pub outlier_sigma: f64,
    pub seed: u64,
}

impl Default for ErrorModel {
    fn default() -> Self {
        let bias = |slope, intercept| PairBias { slope, intercept };
        ErrorModel {
            gaussian_sigma: 0.02,
            pair_bias: BTreeMap::from([
                (D10, bias(0.985, 0.31)),
                (D20, bias(1.012, 0.42)),
                (D21, bias(0.994, 0.27)),
                (D30, bias(1.006, 0.36)),
                (D31, bias(1.018, 0.45)),
            ]),
            outlier_prob: 0.0,
            outlier_sigma: 0.5,
            seed: 42,
        }
    }
}

impl ErrorModel {
    /// No noise and no bias; only clock effects remain.
    pub fn noiseless() -> Self {
        ErrorModel {
            gaussian_sigma: 0.0,
            pair_bias: BTreeMap::new(),
            outlier_prob: 0.0,
            outlier_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn bias(&self, pair: &RangingPair) -> PairBias {
        self.pair_bias.get(pair).copied().unwrap_or(PairBias::IDENTITY)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gaussian_sigma >= 0.0) || !(self.outlier_sigma >= 0.0) {
            return Err(Error::domain("noise sigmas must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.outlier_prob) {
            return Err(Error::domain(format!(
                "outlier probability {} outside [0, 1)",
                self.outlier_prob
            )));
        }
        if let Some((pair, b)) = self.pair_bias.iter().find(|(_, b)| !(b.slope > 0.0)) {
            return Err(Error::domain(format!(
                "bias slope for {pair} must be positive, got {}",
                b.slope
            )));
        }
        Ok(())
    }
}

/// One reported tag→anchor distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeMeasurement {
    pub pair: RangingPair,
    pub distance: f64,
    /// Seconds since run start.
    pub timestamp: f64,
    pub sequence: u64,
    /// 0..=100
    pub quality: u8,
}

pub const NOMINAL_QUALITY: u8 = 100;
pub const OUTLIER_QUALITY: u8 = 40;

/// Independent draw streams. Schedule runs use `STREAM_SCHEDULE`; a
/// calibration campaign gives each reference distance its own stream.
pub const STREAM_SCHEDULE: u64 = 0;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the draws of one measurement; a pure function of its identity.
fn draw_seed(seed: u64, stream: u64, pair: &RangingPair, sequence: u64) -> u64 {
    let pair_word = (u64::from(pair.tag.0) << 16) | u64::from(pair.anchor.0);
    [stream, pair_word, sequence]
        .into_iter()
        .fold(splitmix64(seed), |acc, w| splitmix64(acc ^ w))
}

pub const DEFAULT_REPLY_DELAYS: (f64, f64) = (300e-6, 250e-6);

/// Simulated UWB ranging: clocks per node, the double-sided exchange and
/// the measurement error model.
#[derive(Debug, Clone, PartialEq)]
pub struct RangingEngine {
    pub error: ErrorModel,
    /// Nodes without an entry run an ideal clock.
    pub clocks: BTreeMap<NodeId, ClockModel>,
    /// (responder turnaround, initiator turnaround), seconds.
    pub reply_delays: (f64, f64),
    pub stream: u64,
}

impl Default for RangingEngine {
    fn default() -> Self {
        let clock = |offset, ppm: f64| ClockModel {
            offset,
            drift: ppm * 1e-6,
            tick_resolution: DEFAULT_TICK,
        };
        RangingEngine {
            error: ErrorModel::default(),
            clocks: BTreeMap::from([
                (NodeId(0), clock(0.0123, 4.0)),
                (NodeId(1), clock(0.0071, -7.0)),
                (NodeId(2), clock(0.0311, 11.0)),
                (NodeId(3), clock(0.0042, -3.0)),
            ]),
            reply_delays: DEFAULT_REPLY_DELAYS,
            stream: STREAM_SCHEDULE,
        }
    }
}

/// Receives the engine's output, one measurement at a time.
pub trait MeasurementSink {
    fn accept(&mut self, measurement: &RangeMeasurement) -> Result<()>;

    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

impl MeasurementSink for Vec<RangeMeasurement> {
    fn accept(&mut self, measurement: &RangeMeasurement) -> Result<()> {
        self.push(*measurement);
        Ok(())
    }
}

impl<S: MeasurementSink + ?Sized> MeasurementSink for &mut S {
    fn accept(&mut self, measurement: &RangeMeasurement) -> Result<()> {
        (**self).accept(measurement)
    }

    fn finish(&mut self) -> Result<()> {
        (**self).finish()
    }
}

impl RangingEngine {
    pub fn ideal(error: ErrorModel) -> Self {
        RangingEngine {
            error,
            clocks: BTreeMap::new(),
            reply_delays: DEFAULT_REPLY_DELAYS,
            stream: STREAM_SCHEDULE,
        }
    }

    pub fn with_stream(&self, stream: u64) -> Self {
        RangingEngine {
            stream,
            ..self.clone()
        }
    }

    pub fn clock(&self, node: NodeId) -> ClockModel {
        self.clocks.get(&node).copied().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        self.error.validate()?;
        for clock in self.clocks.values() {
            clock.validate()?;
        }
        if !(self.reply_delays.0 > 0.0 && self.reply_delays.1 > 0.0) {
            return Err(Error::domain("reply delays must be positive"));
        }
        Ok(())
    }

    /// Range as the radio would compute it from one exchange, before the
    /// error model: `c * ToF`.
    pub fn twr_range(&self, pair: &RangingPair, true_distance: f64) -> Result<f64> {
        let exchange = simulate_exchange(
            true_distance,
            &self.clock(pair.tag),
            &self.clock(pair.anchor),
            self.reply_delays.0,
            self.reply_delays.1,
        )?;
        Ok(SPEED_OF_LIGHT * tof_estimate(&exchange)?)
    }

    /// One tag→anchor measurement. Draws depend only on
    /// `(seed, stream, pair, sequence)`.
    pub fn measure_range(
        &self,
        pair: RangingPair,
        true_distance: f64,
        sequence: u64,
        timestamp: f64,
    ) -> Result<RangeMeasurement> {
        let ranged = self.twr_range(&pair, true_distance)?;
        let model = &self.error;

        let mut rng = ChaCha8Rng::seed_from_u64(draw_seed(model.seed, self.stream, &pair, sequence));
        // fixed draw order: gaussian, outlier trial, outlier magnitude
        let gaussian: f64 = rng.sample(StandardNormal);
        let trial: f64 = rng.gen();
        let spike: f64 = rng.sample(StandardNormal);

        let is_outlier = trial < model.outlier_prob;
        let mut distance = model.bias(&pair).apply(ranged) + model.gaussian_sigma * gaussian;
        if is_outlier {
            distance += model.outlier_sigma * spike;
        }

        Ok(RangeMeasurement {
            pair,
            distance: distance.max(0.0),
            timestamp,
            sequence,
            quality: if is_outlier {
                OUTLIER_QUALITY
            } else {
                NOMINAL_QUALITY
            },
        })
    }

    /// Measures every pair once per epoch, in topology order, for
    /// `floor(rate * duration)` epochs. Returns the number of epochs.
    ///
    /// All measurements of epoch `k` carry `sequence = k` and
    /// `timestamp = k / rate`.
    pub fn run_ranging_schedule(
        &self,
        topology: &NetworkTopology,
        positions: &Positions,
        rate: f64,
        duration: f64,
        sink: &mut dyn MeasurementSink,
    ) -> Result<u64> {
        if !(rate > 0.0 && duration > 0.0) || !rate.is_finite() || !duration.is_finite() {
            return Err(Error::domain("rate and duration must be positive"));
        }
        let truth = true_distances(positions, topology)?;
        let epochs = epoch_count(rate, duration);
        for k in 0..epochs {
            let timestamp = k as f64 / rate;
            for pair in &topology.pairs {
                let m = self.measure_range(*pair, truth[pair], k, timestamp)?;
                sink.accept(&m)?;
            }
        }
        sink.finish()?;
        Ok(epochs)
    }
}

/// `floor(rate * duration)`, tolerant of products like `10 * 0.3` landing a
/// hair below an integer.
pub fn epoch_count(rate: f64, duration: f64) -> u64 {
    (rate * duration + 1e-9).floor() as u64
}

#[derive(Debug, Serialize, Deserialize)]
struct MeasurementRow {
    seq: u64,
    epoch_time_s: f64,
    tag: u16,
    anchor: u16,
    distance_m: f64,
    quality: u8,
}

/// Writes `seq,epoch_time_s,tag,anchor,distance_m,quality` rows.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(inner: W) -> Self {
        CsvSink {
            writer: csv::Writer::from_writer(inner),
        }
    }

    pub fn into_inner(self) -> Result<W> {
        self.writer
            .into_inner()
            .map_err(|e| Error::Io(e.into_error()))
    }
}

impl<W: Write> MeasurementSink for CsvSink<W> {
    fn accept(&mut self, m: &RangeMeasurement) -> Result<()> {
        self.writer.serialize(MeasurementRow {
            seq: m.sequence,
            epoch_time_s: m.timestamp,
            tag: m.pair.tag.0,
            anchor: m.pair.anchor.0,
            distance_m: m.distance,
            quality: m.quality,
        })?;
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

pub fn read_measurements_csv<R: std::io::Read>(reader: R) -> Result<Vec<RangeMeasurement>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize::<MeasurementRow>()
        .map(|row| {
            let row = row?;
            Ok(RangeMeasurement {
                pair: RangingPair::new(row.tag, row.anchor),
                distance: row.distance_m,
                timestamp: row.epoch_time_s,
                sequence: row.seq,
                quality: row.quality,
            })
        })
        .collect()
}
