use super::ResidualSystem;
use crate::geometry::Position2D;

/// Closed-form intersection of the two range circles.
///
/// Two points come back left-of-baseline first (seen from anchor 0 towards
/// anchor 1), so for anchors on the +x axis the first point is the upper
/// one. Tangent circles give one point; disjoint or nested circles none.
pub fn circle_intersection_oracle(system: &ResidualSystem) -> Vec<Position2D> {
    let [c0, c1] = system.anchors;
    let [r0, r1] = system.measured;
    let (dx, dy) = (c1.x - c0.x, c1.y - c0.y);
    let d = dx.hypot(dy);
    if d == 0.0 {
        return Vec::new();
    }

    // distance from c0 along the baseline to the chord midpoint
    let a = (r0 * r0 - r1 * r1 + d * d) / (2.0 * d);
    let h2 = r0 * r0 - a * a;
    let scale = r0.max(r1).max(d);
    let tangent_tol = 1e-12 * scale * scale;

    let (ux, uy) = (dx / d, dy / d);
    let mid = Position2D::new(c0.x + a * ux, c0.y + a * uy);
    if h2 < -tangent_tol {
        Vec::new()
    } else if h2 <= tangent_tol {
        vec![mid]
    } else {
        let h = h2.sqrt();
        // left normal of the baseline is (-uy, ux)
        vec![
            Position2D::new(mid.x - h * uy, mid.y + h * ux),
            Position2D::new(mid.x + h * uy, mid.y - h * ux),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::NodeId;

    fn system(r0: f64, r1: f64) -> ResidualSystem {
        ResidualSystem::new(
            NodeId(2),
            [Position2D::ORIGIN, Position2D::new(2.0, 0.0)],
            [r0, r1],
        )
        .unwrap()
    }

    #[test]
    fn equilateral_pair() {
        let pts = circle_intersection_oracle(&system(2.0, 2.0));
        assert_eq!(pts.len(), 2);
        let s3 = 3f64.sqrt();
        assert!((pts[0].x - 1.0).abs() < 1e-15 && (pts[0].y - s3).abs() < 1e-15);
        assert!((pts[1].x - 1.0).abs() < 1e-15 && (pts[1].y + s3).abs() < 1e-15);
    }

    #[test]
    fn tangent_circles_meet_once() {
        let pts = circle_intersection_oracle(&system(1.0, 1.0));
        assert_eq!(pts, vec![Position2D::new(1.0, 0.0)]);
    }

    #[test]
    fn disjoint_and_nested_circles() {
        assert!(circle_intersection_oracle(&system(0.5, 0.5)).is_empty());
        assert!(circle_intersection_oracle(&system(5.0, 0.5)).is_empty());
    }

    #[test]
    fn mirror_symmetry_about_tilted_baseline() {
        let sys = ResidualSystem::new(
            NodeId(3),
            [Position2D::new(1.0, -1.0), Position2D::new(2.5, 1.0)],
            [2.0, 1.7],
        )
        .unwrap();
        let pts = circle_intersection_oracle(&sys);
        assert_eq!(pts.len(), 2);
        for p in &pts {
            let r = sys.residuals(p);
            assert!(r[0].abs() < 1e-12 && r[1].abs() < 1e-12);
        }
        // midpoint of the two solutions lies on the baseline
        let m = Position2D::new((pts[0].x + pts[1].x) / 2.0, (pts[0].y + pts[1].y) / 2.0);
        let [a, b] = sys.anchors;
        let cross = (b.x - a.x) * (m.y - a.y) - (b.y - a.y) * (m.x - a.x);
        assert!(cross.abs() < 1e-12);
    }
}
