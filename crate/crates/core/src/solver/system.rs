use crate::error::{Error, Result};
use crate::geometry::{NodeId, Position2D};

/// Two range residuals for one free node against two fixed anchors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualSystem {
    pub unknown: NodeId,
    pub anchors: [Position2D; 2],
    pub measured: [f64; 2],
}

pub type Jacobian = [[f64; 2]; 2];

impl ResidualSystem {
    pub fn new(unknown: NodeId, anchors: [Position2D; 2], measured: [f64; 2]) -> Result<Self> {
        if anchors[0] == anchors[1] {
            return Err(Error::domain("anchors must be distinct"));
        }
        if !anchors.iter().all(Position2D::is_finite) {
            return Err(Error::domain("anchor positions must be finite"));
        }
        if !measured.iter().all(|d| *d >= 0.0 && d.is_finite()) {
            return Err(Error::domain(format!(
                "measured distances must be non-negative, got {measured:?}"
            )));
        }
        Ok(ResidualSystem {
            unknown,
            anchors,
            measured,
        })
    }

    /// `sqrt((x - x_i)^2 + (y - y_i)^2) - d_i` for anchors 0 then 1.
    pub fn residuals(&self, candidate: &Position2D) -> [f64; 2] {
        [0, 1].map(|i| candidate.distance_to(&self.anchors[i]) - self.measured[i])
    }

    /// Sum of squared residuals.
    pub fn cost(&self, candidate: &Position2D) -> f64 {
        let [r0, r1] = self.residuals(candidate);
        r0 * r0 + r1 * r1
    }

    /// Row `i` is the unit vector from anchor `i` to the candidate.
    pub fn jacobian(&self, candidate: &Position2D) -> Result<Jacobian> {
        let mut rows = [[0.0; 2]; 2];
        for (i, anchor) in self.anchors.iter().enumerate() {
            let rho = candidate.distance_to(anchor);
            if rho == 0.0 {
                return Err(Error::SingularPoint(i));
            }
            rows[i] = [(candidate.x - anchor.x) / rho, (candidate.y - anchor.y) / rho];
        }
        Ok(rows)
    }
}

pub fn residuals(system: &ResidualSystem, candidate: &Position2D) -> [f64; 2] {
    system.residuals(candidate)
}

pub fn jacobian(system: &ResidualSystem, candidate: &Position2D) -> Result<Jacobian> {
    system.jacobian(candidate)
}
