//! Load a geometry from text, validate it and range over it.

use coloc::geometry::{validate_topology, GeometryFile};
use coloc::twr::RangingEngine;

const GEOMETRY: &str = "\
node 0 A
node 1 AT
node 2 T
node 3 T
pair 1 0
pair 2 0
pair 2 1
pair 3 0
pair 3 1
pos 0 0 0
pos 1 3.0 0
pos 2 2.4 1.8
pos 3 0.2 2.1
";

fn main() -> coloc::Result<()> {
    let file = GeometryFile::parse(GEOMETRY)?;
    println!("topology: {}", validate_topology(&file.topology));

    let mut measurements = Vec::new();
    RangingEngine::default().run_ranging_schedule(&file.topology, &file.positions, 10.0, 0.3, &mut measurements)?;
    for m in &measurements {
        println!("seq {} {}: {:.3} m", m.sequence, m.pair, m.distance);
    }

    let mut starved = file.topology.clone();
    starved.pairs.retain(|p| p.to_string() != "d31");
    println!("without d31: {}", validate_topology(&starved));
    Ok(())
}
