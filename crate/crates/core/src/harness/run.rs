use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use serde::Serialize;

use super::metrics::{summarize_poses, ErrorSummary};
use crate::bus::{
    ranging_topic, serve_stream, Bus, FrameSink, Message, ServerConfig, POSE_TOPIC,
};
use crate::calibration::CalibrationSet;
use crate::error::{Error, Result};
use crate::geometry::text::{expect_arity, parse_field, tokenized_lines};
use crate::geometry::{
    canonical_geometry, GeometryFile, NetworkTopology, Positions, RangingPair, Shape,
    DEFAULT_SCALE,
};
use crate::solver::{estimate_poses, write_poses_csv, PoseEstimate, SolverConfig};
use crate::twr::{epoch_count, CsvSink, MeasurementSink, RangeMeasurement, RangingEngine};

pub const DEFAULT_RATE: f64 = 10.0;
pub const DEFAULT_DURATION: f64 = 120.0;

/// How long the loopback path may stall before the run is abandoned.
const LOOPBACK_STALL: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transport {
    #[default]
    InProcess,
    /// Measurements travel as frames over a local TCP socket per tag.
    Loopback,
}

impl fmt::Display for Transport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transport::InProcess => "inproc",
            Transport::Loopback => "loopback",
        })
    }
}

impl FromStr for Transport {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inproc" | "in-process" => Ok(Transport::InProcess),
            "loopback" => Ok(Transport::Loopback),
            other => Err(Error::domain(format!("unknown transport `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub shape: Shape,
    pub scale: f64,
    /// Epochs per second.
    pub rate: f64,
    /// Seconds.
    pub duration: f64,
    pub engine: RangingEngine,
    pub calibration: Option<CalibrationSet>,
    pub transport: Transport,
    pub solver: SolverConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            shape: Shape::Square,
            scale: DEFAULT_SCALE,
            rate: DEFAULT_RATE,
            duration: DEFAULT_DURATION,
            engine: RangingEngine::default(),
            calibration: None,
            transport: Transport::InProcess,
            solver: SolverConfig::default(),
        }
    }
}

/// The parts of a run configuration that identify a campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    pub shape: Shape,
    pub scale: f64,
    pub rate: f64,
    pub duration: f64,
    pub seed: u64,
    pub transport: Transport,
    pub calibrated: bool,
}

impl RunMeta {
    pub fn to_text(&self) -> String {
        format!(
            "shape {}\nscale {:?}\nrate {:?}\nduration {:?}\nseed {}\ntransport {}\ncalibrated {}\n",
            self.shape,
            self.scale,
            self.rate,
            self.duration,
            self.seed,
            self.transport,
            self.calibrated
        )
    }

    pub fn parse(src: &str) -> Result<Self> {
        let mut fields: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (line, tokens) in tokenized_lines(src) {
            expect_arity(line, &tokens, 2)?;
            fields.insert(tokens[0], (line, tokens[1]));
        }
        let get = |key: &str| {
            fields
                .get(key)
                .copied()
                .ok_or_else(|| Error::parse(0, format!("missing `{key}`")))
        };
        let (l, v) = get("shape")?;
        let shape = v.parse().map_err(|e: Error| Error::parse(l, e.to_string()))?;
        let (l, v) = get("transport")?;
        let transport = v.parse().map_err(|e: Error| Error::parse(l, e.to_string()))?;
        let field = |key: &str| get(key).and_then(|(l, v)| parse_field::<f64>(l, v, key));
        let (l, v) = get("seed")?;
        let seed = parse_field(l, v, "seed")?;
        let (l, v) = get("calibrated")?;
        let calibrated = parse_field(l, v, "calibrated flag")?;
        Ok(RunMeta {
            shape,
            scale: field("scale")?,
            rate: field("rate")?,
            duration: field("duration")?,
            seed,
            transport,
            calibrated,
        })
    }

    /// Same geometry and the same number of epochs.
    pub fn comparable(&self, other: &RunMeta) -> bool {
        self.shape == other.shape
            && self.scale == other.scale
            && epoch_count(self.rate, self.duration) == epoch_count(other.rate, other.duration)
    }
}

impl RunConfig {
    pub fn meta(&self) -> RunMeta {
        RunMeta {
            shape: self.shape,
            scale: self.scale,
            rate: self.rate,
            duration: self.duration,
            seed: self.engine.error.seed,
            transport: self.transport,
            calibrated: self.calibration.is_some(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::domain(format!("rate must be positive, got {}", self.rate)));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::domain(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if epoch_count(self.rate, self.duration) == 0 {
            return Err(Error::domain("rate x duration gives no epochs"));
        }
        self.engine.validate()?;
        self.solver.validate()
    }
}

/// Everything a run produced, in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config: RunConfig,
    pub truth: Positions,
    /// What the solver saw, before calibration, ordered by epoch.
    pub measurements: Vec<RangeMeasurement>,
    pub poses: Vec<PoseEstimate>,
}

impl RunRecord {
    pub fn summarize(&self) -> Result<ErrorSummary> {
        summarize_poses(self.config.shape.name(), &self.poses, &self.truth)
    }
}

pub fn summarize(run: &RunRecord) -> Result<ErrorSummary> {
    run.summarize()
}

fn acquire(config: &RunConfig, topology: &NetworkTopology, truth: &Positions) -> Result<Vec<RangeMeasurement>> {
    match config.transport {
        Transport::InProcess => {
            let mut out = Vec::new();
            config
                .engine
                .run_ranging_schedule(topology, truth, config.rate, config.duration, &mut out)?;
            Ok(out)
        }
        Transport::Loopback => acquire_loopback(config, topology, truth),
    }
}

/// engine -> frames -> socket -> decoder -> bus, then back in epoch order.
fn acquire_loopback(
    config: &RunConfig,
    topology: &NetworkTopology,
    truth: &Positions,
) -> Result<Vec<RangeMeasurement>> {
    let epochs = epoch_count(config.rate, config.duration) as usize;
    let bus = Bus::new();
    let subscriptions: Vec<_> = topology
        .tags()
        .into_iter()
        .map(|tag| {
            let expected = epochs * topology.pairs_for_tag(tag).count();
            (
                expected,
                bus.subscribe_with_capacity(&ranging_topic(tag), expected.max(1)),
            )
        })
        .collect();
    let server = serve_stream("127.0.0.1:0", bus.clone(), ServerConfig::default())?;
    let mut sink = FrameSink::new(server.local_addr());
    config
        .engine
        .run_ranging_schedule(topology, truth, config.rate, config.duration, &mut sink)?;

    let mut received = Vec::with_capacity(sink.measurements_sent as usize);
    for (expected, sub) in &subscriptions {
        for got in 0..*expected {
            let msg = sub.recv_timeout(LOOPBACK_STALL).ok_or_else(|| {
                Error::Transport(format!(
                    "loopback stalled on {} after {got} of {expected} measurements",
                    sub.topic()
                ))
            })?;
            if let Message::Range(m) = &*msg {
                received.push(*m);
            }
        }
    }
    server.shutdown();

    let order: BTreeMap<RangingPair, usize> =
        topology.pairs.iter().enumerate().map(|(i, p)| (*p, i)).collect();
    received.sort_by_key(|m| (m.sequence, order.get(&m.pair).copied().unwrap_or(usize::MAX)));
    Ok(received)
}

/// Corrected distances grouped by epoch, in epoch order.
fn epochs_of(
    measurements: &[RangeMeasurement],
    calibration: Option<&CalibrationSet>,
) -> Vec<(f64, BTreeMap<RangingPair, f64>)> {
    let mut grouped: BTreeMap<u64, (f64, BTreeMap<RangingPair, f64>)> = BTreeMap::new();
    for m in measurements {
        let d = calibration.map_or(m.distance, |c| c.correct_measurement(m));
        grouped
            .entry(m.sequence)
            .or_insert_with(|| (m.timestamp, BTreeMap::new()))
            .1
            .insert(m.pair, d);
    }
    grouped.into_values().collect()
}

fn solve_all(
    config: &RunConfig,
    measurements: &[RangeMeasurement],
    poses: &mut Vec<PoseEstimate>,
    bus: Option<&Bus>,
) -> Result<()> {
    for (epoch, distances) in epochs_of(measurements, config.calibration.as_ref()) {
        let pose = estimate_poses(&distances, &config.solver, poses.last(), epoch).map_err(|e| {
            log::error!("solving epoch at t = {epoch} s failed: {e}");
            e
        })?;
        if let Some(bus) = bus {
            bus.publish(POSE_TOPIC, Message::Pose(pose.clone()))?;
        }
        poses.push(pose);
    }
    Ok(())
}

/// Simulates, optionally ships through the loopback transport, and solves
/// every epoch. Nothing is written to disk.
pub fn run_experiment(config: &RunConfig) -> Result<RunRecord> {
    config.validate()?;
    let truth = canonical_geometry(config.shape, config.scale)?;
    let topology = NetworkTopology::canonical();
    let measurements = acquire(config, &topology, &truth)?;
    let mut poses = Vec::new();
    let bus = (config.transport == Transport::Loopback).then(Bus::new);
    solve_all(config, &measurements, &mut poses, bus.as_ref())?;
    Ok(RunRecord {
        config: config.clone(),
        truth,
        measurements,
        poses,
    })
}

pub const MEASUREMENTS_FILE: &str = "measurements.csv";
pub const POSES_FILE: &str = "poses.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const CDF_FILE: &str = "cdf.csv";
pub const BOXSTATS_FILE: &str = "boxstats.csv";
pub const X_SERIES_FILE: &str = "x_series.csv";
pub const GEOMETRY_FILE: &str = "geometry.txt";
pub const NOISE_FILE: &str = "noise.txt";
pub const RUN_FILE: &str = "run.txt";
pub const CALIBRATION_FILE: &str = "calibration.csv";

/// Runs the experiment and persists it under `out`.
///
/// Inputs and measurements are written before solving starts; if solving
/// fails, the poses solved so far are still written.
pub fn run_experiment_to_dir(config: &RunConfig, out: &Path) -> Result<(RunRecord, ErrorSummary)> {
    config.validate()?;
    std::fs::create_dir_all(out)?;
    let truth = canonical_geometry(config.shape, config.scale)?;
    let topology = NetworkTopology::canonical();

    GeometryFile {
        topology: topology.clone(),
        positions: truth.clone(),
    }
    .save(out.join(GEOMETRY_FILE))?;
    std::fs::write(out.join(NOISE_FILE), config.engine.to_config_text())?;
    std::fs::write(out.join(RUN_FILE), config.meta().to_text())?;
    if let Some(calibration) = &config.calibration {
        calibration.save(out.join(CALIBRATION_FILE))?;
    }

    let measurements = acquire(config, &topology, &truth)?;
    let mut csv = CsvSink::new(BufWriter::new(File::create(out.join(MEASUREMENTS_FILE))?));
    for m in &measurements {
        csv.accept(m)?;
    }
    csv.finish()?;

    let mut poses = Vec::new();
    let solved = solve_all(config, &measurements, &mut poses, None);
    write_poses_csv(&poses, BufWriter::new(File::create(out.join(POSES_FILE))?))?;
    solved?;

    let record = RunRecord {
        config: config.clone(),
        truth,
        measurements,
        poses,
    };
    let summary = record.summarize()?;
    write_summary_files(&summary, out)?;
    write_x_series(&record, out)?;
    Ok((record, summary))
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    config: &'a str,
    node: String,
    rmse_m: f64,
    max_err_m: Option<f64>,
    median_m: Option<f64>,
    q1_m: Option<f64>,
    q3_m: Option<f64>,
}

#[derive(Serialize)]
struct CdfRow {
    node: u16,
    error_m: f64,
    cumulative_probability: f64,
}

#[derive(Serialize)]
struct BoxRow {
    node: u16,
    median_m: f64,
    q1_m: f64,
    q3_m: f64,
    whisker_low_m: f64,
    whisker_high_m: f64,
    outliers: usize,
}

/// Label of the summary row holding the mean RMSE over every node.
pub const MEAN_ROW: &str = "mean";
/// Label of the summary row holding the mean RMSE over nodes other than 0.
pub const MEAN_EXCLUDING_ORIGIN_ROW: &str = "mean_excl_0";

/// Writes `summary.csv`, `cdf.csv` and `boxstats.csv`.
pub fn write_summary_files(summary: &ErrorSummary, out: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(out.join(SUMMARY_FILE))?;
    for (id, n) in &summary.nodes {
        w.serialize(SummaryRow {
            config: &summary.config,
            node: id.to_string(),
            rmse_m: n.rmse,
            max_err_m: Some(n.max_error),
            median_m: Some(n.box_stats.median),
            q1_m: Some(n.box_stats.q1),
            q3_m: Some(n.box_stats.q3),
        })?;
    }
    for (label, value) in [
        (MEAN_ROW, summary.mean_rmse()),
        (MEAN_EXCLUDING_ORIGIN_ROW, summary.mean_rmse_excluding_origin()),
    ] {
        w.serialize(SummaryRow {
            config: &summary.config,
            node: label.to_string(),
            rmse_m: value,
            max_err_m: None,
            median_m: None,
            q1_m: None,
            q3_m: None,
        })?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join(CDF_FILE))?;
    for (id, n) in &summary.nodes {
        for (error_m, cumulative_probability) in n.cdf_points() {
            w.serialize(CdfRow {
                node: id.0,
                error_m,
                cumulative_probability,
            })?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join(BOXSTATS_FILE))?;
    for (id, n) in &summary.nodes {
        let b = &n.box_stats;
        w.serialize(BoxRow {
            node: id.0,
            median_m: b.median,
            q1_m: b.q1,
            q3_m: b.q3,
            whisker_low_m: b.whisker_low,
            whisker_high_m: b.whisker_high,
            outliers: b.outliers.len(),
        })?;
    }
    w.flush()?;
    Ok(())
}

fn write_x_series(record: &RunRecord, out: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(out.join(X_SERIES_FILE))?);
    writeln!(w, "epoch_time_s,node,x_m,x_true_m")?;
    for pose in &record.poses {
        for (id, n) in &pose.nodes {
            let truth = record.truth.get(id).ok_or(Error::MissingNode(*id))?;
            writeln!(w, "{:?},{},{:?},{:?}", pose.epoch, id, n.position.x, truth.x)?;
        }
    }
    w.flush()?;
    Ok(())
}
