use coloc::geometry::{
    canonical_geometry, validate_topology, GeometryFile, NetworkTopology, Position2D, Shape,
    NODE_0, NODE_1, NODE_2, NODE_3,
};

const GOLDEN: &str = include_str!("golden/quadrilateral_2m.txt");

fn corners(shape: Shape) -> [Position2D; 4] {
    let g = canonical_geometry(shape, 2.0).unwrap();
    [NODE_0, NODE_1, NODE_2, NODE_3].map(|n| g[&n])
}

fn cross(o: Position2D, a: Position2D, b: Position2D) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

#[test]
fn quadrilateral_matches_golden_file() {
    let golden = GeometryFile::parse(GOLDEN).unwrap();
    assert_eq!(golden.topology, NetworkTopology::canonical());
    assert_eq!(golden.positions, canonical_geometry(Shape::Quadrilateral, 2.0).unwrap());
    assert!(validate_topology(&golden.topology).is_valid());
}

#[test]
fn quadrilateral_is_convex_and_generic() {
    let c = corners(Shape::Quadrilateral);
    // every turn has the same (counter-clockwise) orientation
    for i in 0..4 {
        assert!(cross(c[i], c[(i + 1) % 4], c[(i + 2) % 4]) > 0.0, "turn at corner {}", (i + 1) % 4);
    }
    let sides: Vec<f64> = (0..4).map(|i| c[i].distance_to(&c[(i + 1) % 4])).collect();
    for i in 0..4 {
        for j in i + 1..4 {
            assert!((sides[i] - sides[j]).abs() > 0.05, "sides {i} and {j} too close: {sides:?}");
        }
    }
    for i in 0..4 {
        let (prev, here, next) = (c[(i + 3) % 4], c[i], c[(i + 1) % 4]);
        let (ux, uy) = (prev.x - here.x, prev.y - here.y);
        let (vx, vy) = (next.x - here.x, next.y - here.y);
        let cos = (ux * vx + uy * vy) / (ux.hypot(uy) * vx.hypot(vy));
        assert!(cos.abs() > 0.05, "corner {i} is nearly a right angle");
    }
}

#[test]
fn square_and_rectangle_corners() {
    let s = corners(Shape::Square);
    assert_eq!(s[2], Position2D::new(2.0, 2.0));
    assert_eq!(s[3], Position2D::new(0.0, 2.0));
    let r = corners(Shape::Rectangle);
    assert_eq!(r[2], Position2D::new(2.0, 1.0));
    assert_eq!(r[3], Position2D::new(0.0, 1.0));
    for shape in Shape::ALL {
        let c = corners(shape);
        assert_eq!(c[0], Position2D::ORIGIN);
        assert_eq!(c[1], Position2D::new(2.0, 0.0));
    }
}
