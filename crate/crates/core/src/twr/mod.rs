//! Simulated double-sided two-way ranging between UWB nodes.

mod config;
mod engine;
mod exchange;

pub use engine::{
    epoch_count, read_measurements_csv, CsvSink, ErrorModel, MeasurementSink, PairBias,
    RangeMeasurement, RangingEngine, DEFAULT_REPLY_DELAYS, NOMINAL_QUALITY, OUTLIER_QUALITY,
    STREAM_SCHEDULE,
};
pub use exchange::{
    simulate_exchange, tof_estimate, ClockModel, ExchangeEvents, TwrExchange, DEFAULT_TICK,
    SPEED_OF_LIGHT,
};
