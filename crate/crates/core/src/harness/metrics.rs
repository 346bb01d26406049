use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{NodeId, Position2D, Positions, NODE_0};
use crate::solver::PoseEstimate;

pub fn euclidean_error(estimate: &Position2D, truth: &Position2D) -> f64 {
    (estimate.x - truth.x).hypot(estimate.y - truth.y)
}

/// Linearly interpolated quantile of sorted data (the "type 7" rule:
/// position `(n - 1) p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Most extreme samples within 1.5 IQR of the quartiles.
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

impl BoxStats {
    pub fn from_sorted(sorted: &[f64]) -> Self {
        let q1 = quantile_sorted(sorted, 0.25);
        let median = quantile_sorted(sorted, 0.5);
        let q3 = quantile_sorted(sorted, 0.75);
        let reach = 1.5 * (q3 - q1);
        let (lo_fence, hi_fence) = (q1 - reach, q3 + reach);
        let inside = || sorted.iter().copied().filter(|v| (lo_fence..=hi_fence).contains(v));
        BoxStats {
            median,
            q1,
            q3,
            whisker_low: inside().next().unwrap_or(q1),
            whisker_high: inside().next_back().unwrap_or(q3),
            outliers: sorted
                .iter()
                .copied()
                .filter(|v| !(lo_fence..=hi_fence).contains(v))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSummary {
    pub rmse: f64,
    pub max_error: f64,
    /// Per-epoch errors, ascending.
    pub cdf: Vec<f64>,
    pub box_stats: BoxStats,
}

impl NodeSummary {
    pub fn from_errors(mut errors: Vec<f64>) -> Result<Self> {
        if errors.is_empty() {
            return Err(Error::domain("no error samples"));
        }
        if errors.iter().any(|e| !e.is_finite()) {
            return Err(Error::domain("non-finite error sample"));
        }
        let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt();
        errors.sort_by(f64::total_cmp);
        Ok(NodeSummary {
            rmse,
            max_error: *errors.last().expect("non-empty"),
            box_stats: BoxStats::from_sorted(&errors),
            cdf: errors,
        })
    }

    /// `(error, cumulative probability)` points; the last reaches 1.
    pub fn cdf_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.cdf.len() as f64;
        self.cdf
            .iter()
            .enumerate()
            .map(move |(i, e)| (*e, (i + 1) as f64 / n))
    }

    pub fn quantile(&self, p: f64) -> f64 {
        quantile_sorted(&self.cdf, p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSummary {
    /// Label of the run configuration, usually the shape name.
    pub config: String,
    pub epochs: usize,
    pub nodes: BTreeMap<NodeId, NodeSummary>,
}

impl ErrorSummary {
    pub fn rmse(&self, node: NodeId) -> Option<f64> {
        self.nodes.get(&node).map(|n| n.rmse)
    }

    /// Mean of the per-node RMSE over every node, node 0 included.
    pub fn mean_rmse(&self) -> f64 {
        mean(self.nodes.values().map(|n| n.rmse))
    }

    /// Mean of the per-node RMSE over the nodes other than the origin.
    pub fn mean_rmse_excluding_origin(&self) -> f64 {
        mean(
            self.nodes
                .iter()
                .filter(|(id, _)| **id != NODE_0)
                .map(|(_, n)| n.rmse),
        )
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Scores every epoch of `poses` against `truth`, node by node.
pub fn summarize_poses(config: &str, poses: &[PoseEstimate], truth: &Positions) -> Result<ErrorSummary> {
    if poses.is_empty() {
        return Err(Error::domain("cannot summarize a run without epochs"));
    }
    let mut errors: BTreeMap<NodeId, Vec<f64>> = BTreeMap::new();
    for pose in poses {
        for (id, estimate) in &pose.nodes {
            let t = truth.get(id).ok_or(Error::MissingNode(*id))?;
            errors
                .entry(*id)
                .or_default()
                .push(euclidean_error(&estimate.position, t));
        }
    }
    let nodes = errors
        .into_iter()
        .map(|(id, e)| Ok((id, NodeSummary::from_errors(e)?)))
        .collect::<Result<_>>()?;
    Ok(ErrorSummary {
        config: config.to_string(),
        epochs: poses.len(),
        nodes,
    })
}
