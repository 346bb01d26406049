use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Timestamp granularity of a typical UWB transceiver (~15.65 ps).
pub const DEFAULT_TICK: f64 = 15.65e-12;

/// A free-running node clock: `local = (global + offset) * (1 + drift)`,
/// optionally quantized to `tick_resolution` at capture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockModel {
    pub offset: f64,
    pub drift: f64,
    /// Zero means continuous timestamps.
    pub tick_resolution: f64,
}

impl Default for ClockModel {
    fn default() -> Self {
        ClockModel::ideal()
    }
}

impl ClockModel {
    pub const fn ideal() -> Self {
        ClockModel {
            offset: 0.0,
            drift: 0.0,
            tick_resolution: 0.0,
        }
    }

    pub fn new(offset: f64, drift: f64, tick_resolution: f64) -> Result<Self> {
        let clock = ClockModel {
            offset,
            drift,
            tick_resolution,
        };
        clock.validate()?;
        Ok(clock)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.offset.is_finite() || !self.drift.is_finite() {
            return Err(Error::domain("clock offset and drift must be finite"));
        }
        if self.drift.abs() >= 1e-3 {
            return Err(Error::domain(format!(
                "clock drift {} exceeds 1000 ppm",
                self.drift
            )));
        }
        if !(self.tick_resolution >= 0.0) {
            return Err(Error::domain("tick resolution must be non-negative"));
        }
        Ok(())
    }

    /// Timestamp captured by this clock for an event at `global` seconds.
    pub fn capture(&self, global: f64) -> f64 {
        let local = (global + self.offset) * (1.0 + self.drift);
        if self.tick_resolution > 0.0 {
            (local / self.tick_resolution).round() * self.tick_resolution
        } else {
            local
        }
    }
}

/// The four durations of a double-sided exchange, each read on the clock
/// of the node that measured it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwrExchange {
    pub t_round1: f64,
    pub t_reply1: f64,
    pub t_round2: f64,
    pub t_reply2: f64,
}

/// Double-sided TWR time-of-flight estimate.
///
/// `(round1 * round2 - reply1 * reply2) / (round1 + round2 + reply1 + reply2)`
///
/// First-order clock offset and drift cancel, even with asymmetric reply
/// delays.
pub fn tof_estimate(exchange: &TwrExchange) -> Result<f64> {
    let TwrExchange {
        t_round1,
        t_reply1,
        t_round2,
        t_reply2,
    } = *exchange;
    let denominator = t_round1 + t_round2 + t_reply1 + t_reply2;
    if !(denominator > 0.0) {
        return Err(Error::domain(format!(
            "non-positive TWR denominator {denominator}"
        )));
    }
    Ok((t_round1 * t_round2 - t_reply1 * t_reply2) / denominator)
}

/// Global event times of the poll / response / final exchange.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeEvents {
    pub poll_tx: f64,
    pub poll_rx: f64,
    pub response_tx: f64,
    pub response_rx: f64,
    pub final_tx: f64,
    pub final_rx: f64,
}

impl ExchangeEvents {
    /// Poll leaves the initiator at global time 0.
    pub fn schedule(true_distance: f64, reply_delay1: f64, reply_delay2: f64) -> Self {
        let flight = true_distance / SPEED_OF_LIGHT;
        let poll_tx = 0.0;
        let poll_rx = poll_tx + flight;
        let response_tx = poll_rx + reply_delay1;
        let response_rx = response_tx + flight;
        let final_tx = response_rx + reply_delay2;
        let final_rx = final_tx + flight;
        ExchangeEvents {
            poll_tx,
            poll_rx,
            response_tx,
            response_rx,
            final_tx,
            final_rx,
        }
    }
}

/// Simulates poll (initiator → responder), response and final messages,
/// timestamping every event on the owning node's clock.
///
/// `reply_delay1` is the responder's turnaround, `reply_delay2` the
/// initiator's, both in global seconds.
pub fn simulate_exchange(
    true_distance: f64,
    initiator_clock: &ClockModel,
    responder_clock: &ClockModel,
    reply_delay1: f64,
    reply_delay2: f64,
) -> Result<TwrExchange> {
    if !(true_distance >= 0.0) || !true_distance.is_finite() {
        return Err(Error::domain(format!(
            "true distance must be non-negative, got {true_distance}"
        )));
    }
    if !(reply_delay1 > 0.0 && reply_delay2 > 0.0) {
        return Err(Error::domain("reply delays must be positive"));
    }
    let ev = ExchangeEvents::schedule(true_distance, reply_delay1, reply_delay2);
    let init = |t| initiator_clock.capture(t);
    let resp = |t| responder_clock.capture(t);
    Ok(TwrExchange {
        t_round1: init(ev.response_rx) - init(ev.poll_tx),
        t_reply1: resp(ev.response_tx) - resp(ev.poll_rx),
        t_round2: resp(ev.final_rx) - resp(ev.response_tx),
        t_reply2: init(ev.final_tx) - init(ev.response_rx),
    })
}
