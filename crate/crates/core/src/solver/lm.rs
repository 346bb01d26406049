use super::system::{Jacobian, ResidualSystem};
use crate::error::{Error, Result};
use crate::geometry::Position2D;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Bound on the norm of the cost gradient `2 J^T r`.
    pub gradient_tolerance: f64,
    /// Meters.
    pub step_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 50,
            gradient_tolerance: 1e-14,
            step_tolerance: 1e-12,
            initial_damping: 1e-3,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::domain("max_iterations must be at least 1"));
        }
        if !(self.gradient_tolerance > 0.0 && self.step_tolerance > 0.0) {
            return Err(Error::domain("tolerances must be positive"));
        }
        if !(self.initial_damping >= 0.0) {
            return Err(Error::domain("initial damping must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Gradient,
    Step,
    /// No damping level produced a cost decrease; the iterate is stationary
    /// to machine precision.
    NoDecrease,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    pub cost: f64,
    /// `sqrt(cost)`, meters.
    pub residual_norm: f64,
}

const DAMPING_UP: f64 = 10.0;
const DAMPING_DOWN: f64 = 10.0;
const MAX_DAMPING: f64 = 1e16;
/// Relative nudge applied when an iterate lands exactly on an anchor.
const ANCHOR_NUDGE: f64 = 1e-9;

fn normal_equations(j: &Jacobian, r: &[f64; 2]) -> ([[f64; 2]; 2], [f64; 2]) {
    let jtj = [
        [
            j[0][0] * j[0][0] + j[1][0] * j[1][0],
            j[0][0] * j[0][1] + j[1][0] * j[1][1],
        ],
        [
            j[0][1] * j[0][0] + j[1][1] * j[1][0],
            j[0][1] * j[0][1] + j[1][1] * j[1][1],
        ],
    ];
    let jtr = [
        j[0][0] * r[0] + j[1][0] * r[1],
        j[0][1] * r[0] + j[1][1] * r[1],
    ];
    (jtj, jtr)
}

/// Solves `(JtJ + damping I) step = -JtR` by Cramer's rule.
fn damped_step(jtj: &[[f64; 2]; 2], jtr: &[f64; 2], damping: f64) -> Option<[f64; 2]> {
    let a = jtj[0][0] + damping;
    let b = jtj[0][1];
    let c = jtj[1][0];
    let d = jtj[1][1] + damping;
    let det = a * d - b * c;
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([
        (-jtr[0] * d + jtr[1] * b) / det,
        (-jtr[1] * a + jtr[0] * c) / det,
    ])
}

fn jacobian_off_anchor(system: &ResidualSystem, x: &mut Position2D) -> Jacobian {
    loop {
        match system.jacobian(x) {
            Ok(j) => return j,
            Err(_) => {
                let scale = system.anchors[0].distance_to(&system.anchors[1]);
                x.y += ANCHOR_NUDGE * scale.max(1.0);
            }
        }
    }
}

/// Levenberg-Marquardt minimization of the two-residual range cost.
///
/// Damping is `λ I`, multiplied by ten after a rejected step and divided by
/// ten after an accepted one. Accepted steps strictly decrease the cost.
pub fn solve_node(
    system: &ResidualSystem,
    initial_guess: Position2D,
    config: &SolverConfig,
) -> Result<(Position2D, SolveDiagnostics)> {
    if !initial_guess.is_finite() {
        return Err(Error::domain("initial guess must be finite"));
    }
    config.validate()?;

    let mut x = initial_guess;
    let mut r = system.residuals(&x);
    let mut cost = r[0] * r[0] + r[1] * r[1];
    if !cost.is_finite() {
        return Err(Error::NumericalFailure);
    }
    let mut damping = config.initial_damping;
    let mut iterations = 0;

    let stop = loop {
        if iterations >= config.max_iterations {
            break StopReason::MaxIterations;
        }
        let j = jacobian_off_anchor(system, &mut x);
        r = system.residuals(&x);
        cost = r[0] * r[0] + r[1] * r[1];
        let (jtj, jtr) = normal_equations(&j, &r);
        let gradient = 2.0 * jtr[0].hypot(jtr[1]);
        if gradient <= config.gradient_tolerance {
            break StopReason::Gradient;
        }

        iterations += 1;
        let accepted = loop {
            if damping > MAX_DAMPING {
                break None;
            }
            let Some(step) = damped_step(&jtj, &jtr, damping) else {
                damping = (damping * DAMPING_UP).max(f64::MIN_POSITIVE);
                continue;
            };
            let candidate = Position2D::new(x.x + step[0], x.y + step[1]);
            let candidate_cost = system.cost(&candidate);
            if !candidate_cost.is_finite() {
                return Err(Error::NumericalFailure);
            }
            if candidate_cost < cost {
                damping /= DAMPING_DOWN;
                break Some((candidate, candidate_cost, step));
            }
            // also lifts a zero initial damping off the floor
            damping = (damping * DAMPING_UP).max(1e-12);
        };

        let Some((candidate, candidate_cost, step)) = accepted else {
            break StopReason::NoDecrease;
        };
        x = candidate;
        cost = candidate_cost;
        if step[0].hypot(step[1]) <= config.step_tolerance {
            break StopReason::Step;
        }
    };

    Ok((
        x,
        SolveDiagnostics {
            iterations,
            converged: stop != StopReason::MaxIterations,
            stop,
            cost,
            residual_norm: cost.sqrt(),
        },
    ))
}
