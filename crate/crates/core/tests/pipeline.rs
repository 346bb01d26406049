use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use coloc::calibration::CalibrationSet;
use coloc::geometry::{FrameConvention, RangingPair, Shape, CANONICAL_PAIRS, NODE_0, NODE_1};
use coloc::harness::{
    eval_dir, read_summary_rmse, run_experiment, run_experiment_to_dir, RunConfig, Transport,
    BOXSTATS_FILE, CDF_FILE, GEOMETRY_FILE, MEASUREMENTS_FILE, MEAN_EXCLUDING_ORIGIN_ROW,
    MEAN_ROW, NOISE_FILE, POSES_FILE, RUN_FILE, SUMMARY_FILE, X_SERIES_FILE,
};
use coloc::solver::{estimate_poses, SolverConfig};
use coloc::twr::{read_measurements_csv, RangingEngine};

fn short(shape: Shape) -> RunConfig {
    RunConfig {
        shape,
        duration: 20.0,
        ..RunConfig::default()
    }
}

fn read_all(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn fixed_seed_gives_byte_identical_outputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let config = short(Shape::Quadrilateral);
    run_experiment_to_dir(&config, a.path()).unwrap();
    run_experiment_to_dir(&config, b.path()).unwrap();
    let (fa, fb) = (read_all(a.path()), read_all(b.path()));
    for name in [
        MEASUREMENTS_FILE,
        POSES_FILE,
        SUMMARY_FILE,
        CDF_FILE,
        BOXSTATS_FILE,
        X_SERIES_FILE,
        GEOMETRY_FILE,
        NOISE_FILE,
        RUN_FILE,
    ] {
        assert!(fa.contains_key(name), "{name} missing");
    }
    assert_eq!(fa, fb);

    let other = tempfile::tempdir().unwrap();
    let mut reseeded = config.clone();
    reseeded.engine.error.seed += 1;
    run_experiment_to_dir(&reseeded, other.path()).unwrap();
    assert_ne!(fa[POSES_FILE], read_all(other.path())[POSES_FILE]);
}

#[test]
fn persisted_summary_matches_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let (record, summary) = run_experiment_to_dir(&short(Shape::Square), dir.path()).unwrap();
    let evaluated = eval_dir(dir.path()).unwrap();
    assert_eq!(evaluated.meta, record.config.meta());

    let rows = read_summary_rmse(&dir.path().join(SUMMARY_FILE)).unwrap();
    assert_eq!(rows.len(), summary.nodes.len() + 2);
    for (config, node, rmse) in rows {
        assert_eq!(config, "square");
        let recomputed = match node.as_str() {
            MEAN_ROW => evaluated.summary.mean_rmse(),
            MEAN_EXCLUDING_ORIGIN_ROW => evaluated.summary.mean_rmse_excluding_origin(),
            id => evaluated.summary.nodes[&coloc::geometry::NodeId(id.parse().unwrap())].rmse,
        };
        assert!((rmse - recomputed).abs() <= 1e-12, "node {node}: {rmse} vs {recomputed}");
    }

    let measurements =
        read_measurements_csv(fs::File::open(dir.path().join(MEASUREMENTS_FILE)).unwrap()).unwrap();
    assert_eq!(measurements, record.measurements);
}

#[test]
fn cdf_file_is_sorted_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment_to_dir(&short(Shape::Rectangle), dir.path()).unwrap();
    let mut rdr = csv::Reader::from_path(dir.path().join(CDF_FILE)).unwrap();
    let mut per_node: BTreeMap<u16, Vec<(f64, f64)>> = BTreeMap::new();
    for row in rdr.deserialize::<(u16, f64, f64)>() {
        let (node, e, p) = row.unwrap();
        per_node.entry(node).or_default().push((e, p));
    }
    assert_eq!(per_node.len(), 4);
    for points in per_node.values() {
        assert_eq!(points.len(), 200);
        assert!(points.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1));
        assert_eq!(points.last().unwrap().1, 1.0);
    }
}

#[test]
fn frame_convention_holds_every_epoch() {
    for shape in Shape::ALL {
        let run = run_experiment(&short(shape)).unwrap();
        assert_eq!(run.poses.len(), 200);
        assert!(FrameConvention::default().holds(&run.truth));
        for pose in &run.poses {
            assert!(FrameConvention::default().holds(&pose.positions()));
            assert_eq!(pose.position(NODE_1).unwrap().y, 0.0);
        }
        let s = run.summarize().unwrap();
        assert_eq!(s.rmse(NODE_0), Some(0.0));
        assert_eq!(s.nodes[&NODE_0].max_error, 0.0);
    }
}

#[test]
fn loopback_gap_stays_within_propagated_quantization() {
    // Each wire distance moves by at most 0.5 mm. The pose gap is bounded
    // by that step pushed through the solver's local sensitivities.
    let inproc = run_experiment(&short(Shape::Square)).unwrap();
    let loopback = run_experiment(&RunConfig {
        transport: Transport::Loopback,
        ..short(Shape::Square)
    })
    .unwrap();
    assert_eq!(inproc.poses.len(), loopback.poses.len());

    let config = SolverConfig::default();
    let h = 1e-6;
    for (k, (a, b)) in inproc.poses.iter().zip(&loopback.poses).enumerate() {
        let distances: BTreeMap<RangingPair, f64> = inproc.measurements[k * 5..k * 5 + 5]
            .iter()
            .map(|m| (m.pair, m.distance))
            .collect();
        for (id, na) in &a.nodes {
            let mut bound = [0.0f64; 2];
            for pair in CANONICAL_PAIRS {
                let shifted = |s: f64| {
                    let mut d = distances.clone();
                    *d.get_mut(&pair).unwrap() += s;
                    estimate_poses(&d, &config, None, 0.0).unwrap().position(*id).unwrap()
                };
                let (p, m) = (shifted(h), shifted(-h));
                bound[0] += ((p.x - m.x) / (2.0 * h)).abs() * 0.0005;
                bound[1] += ((p.y - m.y) / (2.0 * h)).abs() * 0.0005;
            }
            let nb = b.nodes[id].position;
            let gap = [(na.position.x - nb.x).abs(), (na.position.y - nb.y).abs()];
            for axis in 0..2 {
                assert!(
                    gap[axis] <= bound[axis] * 1.05 + 1e-9,
                    "epoch {k} node {id} axis {axis}: gap {} > bound {}",
                    gap[axis],
                    bound[axis]
                );
            }
        }
    }
}

#[test]
fn calibration_file_is_copied_into_the_run() {
    let engine = RangingEngine::default();
    let calibration = CalibrationSet::calibrate(&CANONICAL_PAIRS, &[1.0, 2.0, 3.0, 4.0], 200, &engine).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig {
        calibration: Some(calibration.clone()),
        ..short(Shape::Square)
    };
    run_experiment_to_dir(&config, dir.path()).unwrap();
    let copied = CalibrationSet::load(dir.path().join("calibration.csv")).unwrap();
    assert_eq!(copied, calibration);
    assert!(eval_dir(dir.path()).unwrap().meta.calibrated);
}
