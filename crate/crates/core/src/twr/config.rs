//! Line-oriented error/clock configuration.
//!
//! ```text
//! noise sigma 0.02
//! noise outlier_prob 0
//! noise outlier_sigma 0.5
//! noise seed 42
//! bias 1 0 1.01 0.30        # tag anchor slope intercept_m
//! bias none                 # every pair unbiased
//! clock none                # every node runs an ideal clock
//! clock 2 0.031 11 15.65e-12  # node offset_s drift_ppm [tick_s]
//! reply 300e-6 250e-6       # responder, initiator turnaround
//! ```
//!
//! Unlisted settings keep the engine defaults. The first `bias` line
//! replaces the whole default bias table, and the first `clock` line the
//! whole clock table.

use std::fmt::Write as _;
use std::path::Path;

use super::engine::{PairBias, RangingEngine};
use super::exchange::{ClockModel, DEFAULT_TICK};
use crate::error::{Error, Result};
use crate::geometry::text::{expect_arity, parse_field, tokenized_lines};
use crate::geometry::{NodeId, RangingPair};

impl RangingEngine {
    pub fn parse_config(src: &str) -> Result<Self> {
        let mut engine = RangingEngine::default();
        let mut biases_seen = false;
        let mut clocks_seen = false;

        for (line, tokens) in tokenized_lines(src) {
            match tokens[0] {
                "noise" => {
                    expect_arity(line, &tokens, 3)?;
                    let error = &mut engine.error;
                    match tokens[1] {
                        "sigma" => error.gaussian_sigma = parse_field(line, tokens[2], "sigma")?,
                        "outlier_prob" => {
                            error.outlier_prob = parse_field(line, tokens[2], "probability")?
                        }
                        "outlier_sigma" => {
                            error.outlier_sigma = parse_field(line, tokens[2], "sigma")?
                        }
                        "seed" => error.seed = parse_field(line, tokens[2], "seed")?,
                        other => {
                            return Err(Error::parse(line, format!("unknown noise key `{other}`")))
                        }
                    }
                }
                "bias" => {
                    if !biases_seen {
                        engine.error.pair_bias.clear();
                        biases_seen = true;
                    }
                    if tokens.get(1) == Some(&"none") {
                        expect_arity(line, &tokens, 2)?;
                        continue;
                    }
                    expect_arity(line, &tokens, 5)?;
                    let pair = RangingPair {
                        tag: NodeId(parse_field(line, tokens[1], "tag id")?),
                        anchor: NodeId(parse_field(line, tokens[2], "anchor id")?),
                    };
                    let bias = PairBias {
                        slope: parse_field(line, tokens[3], "slope")?,
                        intercept: parse_field(line, tokens[4], "intercept")?,
                    };
                    engine.error.pair_bias.insert(pair, bias);
                }
                "clock" => {
                    if !clocks_seen {
                        engine.clocks.clear();
                        clocks_seen = true;
                    }
                    if tokens.get(1) == Some(&"none") {
                        expect_arity(line, &tokens, 2)?;
                        continue;
                    }
                    if !(4..=5).contains(&tokens.len()) {
                        return Err(Error::parse(line, "`clock` takes 3 or 4 arguments"));
                    }
                    let id = NodeId(parse_field(line, tokens[1], "node id")?);
                    let offset: f64 = parse_field(line, tokens[2], "offset")?;
                    let ppm: f64 = parse_field(line, tokens[3], "drift")?;
                    let tick = match tokens.get(4) {
                        Some(t) => parse_field(line, t, "tick")?,
                        None => DEFAULT_TICK,
                    };
                    let clock = ClockModel::new(offset, ppm * 1e-6, tick)
                        .map_err(|e| Error::parse(line, e.to_string()))?;
                    engine.clocks.insert(id, clock);
                }
                "reply" => {
                    expect_arity(line, &tokens, 3)?;
                    engine.reply_delays = (
                        parse_field(line, tokens[1], "reply delay")?,
                        parse_field(line, tokens[2], "reply delay")?,
                    );
                }
                other => return Err(Error::parse(line, format!("unknown directive `{other}`"))),
            }
        }

        engine.validate()?;
        Ok(engine)
    }

    pub fn load_config(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_config(&std::fs::read_to_string(path)?)
    }

    /// Complete configuration; parsing it back yields an equal engine
    /// (apart from `stream`, which is not persisted).
    pub fn to_config_text(&self) -> String {
        let e = &self.error;
        let mut out = String::new();
        let _ = writeln!(out, "noise sigma {:?}", e.gaussian_sigma);
        let _ = writeln!(out, "noise outlier_prob {:?}", e.outlier_prob);
        let _ = writeln!(out, "noise outlier_sigma {:?}", e.outlier_sigma);
        let _ = writeln!(out, "noise seed {}", e.seed);
        if e.pair_bias.is_empty() {
            out.push_str("bias none\n");
        }
        for (pair, b) in &e.pair_bias {
            let _ = writeln!(out, "bias {} {} {:?} {:?}", pair.tag, pair.anchor, b.slope, b.intercept);
        }
        if self.clocks.is_empty() {
            out.push_str("clock none\n");
        }
        for (id, c) in &self.clocks {
            let _ = writeln!(
                out,
                "clock {id} {:?} {:?} {:?}",
                c.offset,
                c.drift * 1e6,
                c.tick_resolution
            );
        }
        let _ = writeln!(out, "reply {:?} {:?}", self.reply_delays.0, self.reply_delays.1);
        out
    }
}
