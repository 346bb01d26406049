use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Deserialize;

use super::metrics::{summarize_poses, ErrorSummary};
use super::run::{RunMeta, RunRecord, GEOMETRY_FILE, POSES_FILE, RUN_FILE};
use crate::error::{Error, Result};
use crate::geometry::{GeometryFile, NodeId};
use crate::solver::read_poses_csv;

pub const DECILES: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// A run's identity together with its error statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedRun {
    pub meta: RunMeta,
    pub summary: ErrorSummary,
}

impl RunRecord {
    pub fn evaluate(&self) -> Result<EvaluatedRun> {
        Ok(EvaluatedRun {
            meta: self.config.meta(),
            summary: self.summarize()?,
        })
    }
}

/// Recomputes the summary of a persisted run from its pose and geometry
/// files.
pub fn eval_dir(dir: &Path) -> Result<EvaluatedRun> {
    let meta = RunMeta::parse(&std::fs::read_to_string(dir.join(RUN_FILE))?)?;
    let geometry = GeometryFile::load(dir.join(GEOMETRY_FILE))?;
    let poses = read_poses_csv(std::fs::File::open(dir.join(POSES_FILE))?)?;
    let summary = summarize_poses(meta.shape.name(), &poses, &geometry.positions)?;
    Ok(EvaluatedRun { meta, summary })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Identical quantiles.
    Tie,
    /// The first run's error is no larger at every decile and smaller at
    /// one or more.
    FirstDominates,
    SecondDominates,
    Crossing,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Tie => "tie",
            Verdict::FirstDominates => "first dominates",
            Verdict::SecondDominates => "second dominates",
            Verdict::Crossing => "crossing",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeComparison {
    pub first: [f64; 9],
    pub second: [f64; 9],
    pub verdict: Verdict,
}

impl NodeComparison {
    fn new(first: [f64; 9], second: [f64; 9]) -> Self {
        let better = first.iter().zip(&second).filter(|(a, b)| a < b).count();
        let worse = first.iter().zip(&second).filter(|(a, b)| a > b).count();
        let verdict = match (better, worse) {
            (0, 0) => Verdict::Tie,
            (_, 0) => Verdict::FirstDominates,
            (0, _) => Verdict::SecondDominates,
            _ => Verdict::Crossing,
        };
        NodeComparison {
            first,
            second,
            verdict,
        }
    }

    /// The first run's error is strictly smaller at every decile.
    pub fn first_strictly_better(&self) -> bool {
        self.first.iter().zip(&self.second).all(|(a, b)| a < b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub nodes: BTreeMap<NodeId, NodeComparison>,
}

impl ComparisonReport {
    pub fn verdict(&self, node: NodeId) -> Option<Verdict> {
        self.nodes.get(&node).map(|c| c.verdict)
    }
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "node  decile  first_m  second_m")?;
        for (id, c) in &self.nodes {
            for (i, p) in DECILES.iter().enumerate() {
                writeln!(f, "{id:>4}  {p:>6.1}  {:.6}  {:.6}", c.first[i], c.second[i])?;
            }
            writeln!(f, "node {id}: {}", c.verdict)?;
        }
        Ok(())
    }
}

/// Decile-by-decile comparison of the per-node error distributions.
pub fn compare_runs(first: &EvaluatedRun, second: &EvaluatedRun) -> Result<ComparisonReport> {
    if !first.meta.comparable(&second.meta) {
        return Err(Error::domain(format!(
            "runs are not comparable: {} at scale {} over {} epochs vs {} at scale {} over {} epochs",
            first.meta.shape,
            first.meta.scale,
            first.summary.epochs,
            second.meta.shape,
            second.meta.scale,
            second.summary.epochs
        )));
    }
    let mut nodes = BTreeMap::new();
    for (id, a) in &first.summary.nodes {
        let b = second
            .summary
            .nodes
            .get(id)
            .ok_or_else(|| Error::domain(format!("node {id} missing from the second run")))?;
        nodes.insert(
            *id,
            NodeComparison::new(DECILES.map(|p| a.quantile(p)), DECILES.map(|p| b.quantile(p))),
        );
    }
    if second.summary.nodes.len() != nodes.len() {
        return Err(Error::domain("the second run has nodes the first lacks"));
    }
    Ok(ComparisonReport { nodes })
}

#[derive(Debug, Deserialize)]
struct SummaryRecord {
    config: String,
    node: String,
    rmse_m: f64,
}

/// `(config, node label, rmse)` rows of a persisted summary file.
pub fn read_summary_rmse(path: &Path) -> Result<Vec<(String, String, f64)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize::<SummaryRecord>()
        .map(|r| {
            let r = r?;
            Ok((r.config, r.node, r.rmse_m))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::{run_experiment, RunConfig};
    use crate::twr::{ErrorModel, RangingEngine};

    fn short(engine: RangingEngine) -> EvaluatedRun {
        run_experiment(&RunConfig {
            duration: 5.0,
            engine,
            ..RunConfig::default()
        })
        .unwrap()
        .evaluate()
        .unwrap()
    }

    #[test]
    fn run_against_itself_is_a_tie() {
        let run = short(RangingEngine::default());
        let report = compare_runs(&run, &run).unwrap();
        assert!(report.nodes.values().all(|c| c.verdict == Verdict::Tie));
    }

    #[test]
    fn noiseless_dominates_noisy() {
        let exact = short(RangingEngine::ideal(ErrorModel::noiseless()));
        let noisy = short(RangingEngine::default());
        let report = compare_runs(&exact, &noisy).unwrap();
        for id in 1..=3 {
            assert_eq!(report.verdict(NodeId(id)), Some(Verdict::FirstDominates));
        }
        assert_eq!(report.verdict(NodeId(0)), Some(Verdict::Tie));
    }

    #[test]
    fn mismatched_runs_are_refused() {
        let a = short(RangingEngine::default());
        let mut b = a.clone();
        b.meta.shape = crate::geometry::Shape::Rectangle;
        assert!(matches!(compare_runs(&a, &b), Err(Error::Domain(_))));
    }
}
