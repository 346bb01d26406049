use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{circle_intersection_oracle, solve_node, ResidualSystem, SolverConfig};
use crate::error::{Error, Result};
use crate::geometry::{
    NodeId, Position2D, Positions, RangingPair, D10, D20, D21, D30, D31, NODE_0, NODE_1, NODE_2,
    NODE_3,
};

/// Shorter node 0 – node 1 baselines are refused.
pub const MIN_BASELINE: f64 = 0.01;

/// Offset above the baseline used when the circles give no seed.
pub const FALLBACK_SEED_HEIGHT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeEstimate {
    pub position: Position2D,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl NodeEstimate {
    /// Nodes placed by the frame convention rather than by a fit.
    fn fixed(position: Position2D) -> Self {
        NodeEstimate {
            position,
            residual_norm: 0.0,
            iterations: 0,
            converged: true,
        }
    }
}

/// Node positions for one epoch. Node 0 is exactly the origin and node 1
/// exactly on the x axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseEstimate {
    pub epoch: f64,
    pub nodes: BTreeMap<NodeId, NodeEstimate>,
}

impl PoseEstimate {
    pub fn position(&self, node: NodeId) -> Option<Position2D> {
        self.nodes.get(&node).map(|n| n.position)
    }

    pub fn positions(&self) -> Positions {
        self.nodes.iter().map(|(id, n)| (*id, n.position)).collect()
    }

    /// Root of the summed squared residuals over all fitted nodes.
    pub fn residual_norm(&self) -> f64 {
        self.nodes
            .values()
            .map(|n| n.residual_norm * n.residual_norm)
            .sum::<f64>()
            .sqrt()
    }

    pub fn iterations(&self) -> usize {
        self.nodes.values().map(|n| n.iterations).sum()
    }

    pub fn converged(&self) -> bool {
        self.nodes.values().all(|n| n.converged)
    }
}

fn lookup(measurements: &BTreeMap<RangingPair, f64>, pair: RangingPair) -> Result<f64> {
    measurements
        .get(&pair)
        .copied()
        .ok_or(Error::IncompleteEpoch(pair))
}

/// Seed order: previous converged estimate, upper circle intersection,
/// then the baseline midpoint lifted to `y = +0.1`.
fn seed_for(system: &ResidualSystem, previous: Option<&NodeEstimate>) -> Position2D {
    if let Some(prev) = previous.filter(|p| p.converged && p.position.is_finite()) {
        return prev.position;
    }
    let points = circle_intersection_oracle(system);
    if let Some(upper) = points.iter().find(|p| p.y >= 0.0) {
        return *upper;
    }
    let [a, b] = system.anchors;
    Position2D::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0 + FALLBACK_SEED_HEIGHT)
}

/// Applies the frame convention, then fits nodes 2 and 3 independently
/// against node 0 and node 1.
///
/// A node whose solve fails numerically keeps its seed position and is
/// marked unconverged; the epoch itself still succeeds.
pub fn estimate_poses(
    measurements: &BTreeMap<RangingPair, f64>,
    config: &SolverConfig,
    previous: Option<&PoseEstimate>,
    epoch: f64,
) -> Result<PoseEstimate> {
    let d10 = lookup(measurements, D10)?;
    let free = [
        (NODE_2, lookup(measurements, D20)?, lookup(measurements, D21)?),
        (NODE_3, lookup(measurements, D30)?, lookup(measurements, D31)?),
    ];

    if !(d10 >= MIN_BASELINE) {
        return Err(Error::DegenerateBaseline(d10));
    }

    let origin = Position2D::ORIGIN;
    let axis = Position2D::new(d10, 0.0);
    let mut nodes = BTreeMap::from([
        (NODE_0, NodeEstimate::fixed(origin)),
        (NODE_1, NodeEstimate::fixed(axis)),
    ]);

    for (node, d_n0, d_n1) in free {
        let system = ResidualSystem::new(node, [origin, axis], [d_n0, d_n1])?;
        let prev = previous.and_then(|p| p.nodes.get(&node));
        let seed = seed_for(&system, prev);
        let estimate = match solve_node(&system, seed, config) {
            Ok((position, diag)) => NodeEstimate {
                position,
                residual_norm: diag.residual_norm,
                iterations: diag.iterations,
                converged: diag.converged,
            },
            Err(Error::NumericalFailure) => NodeEstimate {
                position: seed,
                residual_norm: f64::NAN,
                iterations: 0,
                converged: false,
            },
            Err(e) => return Err(e),
        };
        nodes.insert(node, estimate);
    }

    Ok(PoseEstimate { epoch, nodes })
}

#[derive(Debug, Serialize, Deserialize)]
struct PoseRow {
    epoch_time_s: f64,
    node: u16,
    x_m: f64,
    y_m: f64,
    residual_norm: f64,
    converged: bool,
    iterations: usize,
}

/// One `epoch_time_s,node,x_m,y_m,residual_norm,converged,iterations` row
/// per node per epoch.
pub fn write_poses_csv<W: std::io::Write>(poses: &[PoseEstimate], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for pose in poses {
        for (id, n) in &pose.nodes {
            w.serialize(PoseRow {
                epoch_time_s: pose.epoch,
                node: id.0,
                x_m: n.position.x,
                y_m: n.position.y,
                residual_norm: n.residual_norm,
                converged: n.converged,
                iterations: n.iterations,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows sharing an epoch time, in file order, form one estimate.
pub fn read_poses_csv<R: std::io::Read>(reader: R) -> Result<Vec<PoseEstimate>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut poses: Vec<PoseEstimate> = Vec::new();
    for row in rdr.deserialize::<PoseRow>() {
        let row = row?;
        let estimate = NodeEstimate {
            position: Position2D::new(row.x_m, row.y_m),
            residual_norm: row.residual_norm,
            iterations: row.iterations,
            converged: row.converged,
        };
        match poses.last_mut() {
            Some(last) if last.epoch == row.epoch_time_s => {
                last.nodes.insert(NodeId(row.node), estimate);
            }
            _ => poses.push(PoseEstimate {
                epoch: row.epoch_time_s,
                nodes: BTreeMap::from([(NodeId(row.node), estimate)]),
            }),
        }
    }
    Ok(poses)
}
