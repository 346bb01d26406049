//! One epoch solved in the relative frame, checked against circle intersection.

use coloc::geometry::{
    canonical_geometry, true_distances, NetworkTopology, Shape, D20, D21, D30, D31, NODE_0, NODE_1, NODE_2, NODE_3,
};
use coloc::solver::{circle_intersection_oracle, estimate_poses, solve_node, ResidualSystem, SolverConfig};

fn main() -> coloc::Result<()> {
    let truth = canonical_geometry(Shape::Quadrilateral, 2.0)?;
    let exact = true_distances(&truth, &NetworkTopology::canonical())?;
    let config = SolverConfig::default();

    let pose = estimate_poses(&exact, &config, None, 0.0)?;
    for (id, node) in &pose.nodes {
        println!(
            "node {id}: ({:+.6}, {:+.6})  truth ({:+.6}, {:+.6})  iterations {}",
            node.position.x, node.position.y, truth[id].x, truth[id].y, node.iterations
        );
    }

    let b = pose.position(NODE_1).unwrap();
    for (node, pairs) in [(NODE_2, [D20, D21]), (NODE_3, [D30, D31])] {
        let measured = [exact[&pairs[0]], exact[&pairs[1]]];
        let system = ResidualSystem::new(node, [pose.position(NODE_0).unwrap(), b], measured)?;
        let candidates = circle_intersection_oracle(&system);
        let (solved, diag) = solve_node(&system, truth[&node], &config)?;
        println!(
            "node {node} from {} and {}: oracle {:?}, solver ({:.6}, {:.6}) stop {:?}",
            pairs[0], pairs[1], candidates, solved.x, solved.y, diag.stop
        );
    }
    Ok(())
}
