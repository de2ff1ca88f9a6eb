use super::PlanPath;
use crate::config::SimParams;
use crate::grid::Cell;
use crate::sim::{Action, AgentPose};

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerParams {
    pub turn_rate: f64,
    pub forward_speed: f64,
    /// Distance to the final cell center at which the path counts as done.
    pub waypoint_tolerance: f64,
    /// Arclength along the path between the agent's projection and the
    /// point it steers towards.
    pub lookahead: f64,
}

impl ControllerParams {
    pub fn from_sim(sim: &SimParams) -> Self {
        ControllerParams {
            turn_rate: sim.turn_rate(),
            forward_speed: sim.forward_speed,
            // An overshoot from inside the tolerance lands back inside it.
            waypoint_tolerance: (0.5 * sim.forward_speed + 0.01).max(0.2),
            lookahead: 0.6,
        }
    }
}

impl Default for ControllerParams {
    fn default() -> Self {
        ControllerParams::from_sim(&SimParams::default())
    }
}

/// Signed angle from `heading` to the direction of `to - from`; positive
/// values need right turns.
pub fn heading_error(heading: [f64; 2], from: [f64; 2], to: [f64; 2]) -> f64 {
    let v = [to[0] - from[0], to[1] - from[1]];
    let cross = heading[0] * v[1] - heading[1] * v[0];
    let dot = heading[0] * v[0] + heading[1] * v[1];
    cross.atan2(dot)
}

fn center(c: Cell) -> [f64; 2] {
    let (x, y) = c.center();
    [x, y]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Point `lookahead` further along the polyline of cell centers than the
/// agent's projection onto it.
fn carrot(pos: [f64; 2], path: &PlanPath, lookahead: f64) -> [f64; 2] {
    let pts: Vec<[f64; 2]> = path.cells.iter().map(|&c| center(c)).collect();
    if pts.len() == 1 {
        return pts[0];
    }
    // Only segments touching the agent's own cell are candidates, so the
    // projection never jumps across a wall to a later part of the path.
    let here = Cell::containing(pos[0], pos[1]);
    let segments: Vec<usize> = match path.cells.iter().position(|&c| c == here) {
        Some(i) => (i.saturating_sub(1)..=i.min(pts.len() - 2)).collect(),
        None => (0..pts.len() - 1).collect(),
    };
    let mut best = (f64::INFINITY, 0usize, 0.0f64);
    for &s in &segments {
        let (a, b) = (pts[s], pts[s + 1]);
        let ab = [b[0] - a[0], b[1] - a[1]];
        let len2 = ab[0] * ab[0] + ab[1] * ab[1];
        let t = (((pos[0] - a[0]) * ab[0] + (pos[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
        let d = dist(pos, [a[0] + ab[0] * t, a[1] + ab[1] * t]);
        if d < best.0 {
            best = (d, s, t);
        }
    }
    let (_, mut seg, t) = best;
    let mut remaining = lookahead + t * dist(pts[seg], pts[seg + 1]);
    loop {
        let len = dist(pts[seg], pts[seg + 1]);
        if remaining <= len || seg + 2 == pts.len() {
            let f = (remaining / len).min(1.0);
            let (a, b) = (pts[seg], pts[seg + 1]);
            return [a[0] + (b[0] - a[0]) * f, a[1] + (b[1] - a[1]) * f];
        }
        remaining -= len;
        seg += 1;
    }
}

/// Action that moves the agent along `path` through cell centers.
///
/// Steers at a lookahead point on the path. Turns in place while the
/// bearing error exceeds half a turn step; otherwise picks whichever of
/// forward, forward-left and forward-right leaves the smallest bearing
/// error for the next step (plain forward on ties). Returns `Noop` only
/// once the agent is within tolerance of the final cell center.
pub fn waypoint_action(pose: &AgentPose, path: &PlanPath, params: &ControllerParams) -> Action {
    assert!(!path.is_empty(), "empty plan");
    let pos = pose.position;
    let goal = center(path.goal());
    if dist(pos, goal) < params.waypoint_tolerance {
        return Action::Noop;
    }
    let target = carrot(pos, path, params.lookahead);
    let half_turn = params.turn_rate / 2.0;
    let err = heading_error(pose.heading, pos, target);
    if err.abs() > half_turn {
        return if err > 0.0 { Action::TurnRight } else { Action::TurnLeft };
    }

    let (c, s) = (params.turn_rate.cos(), params.turn_rate.sin());
    let mut best = (f64::INFINITY, Action::Forward);
    for (action, turn) in [(Action::Forward, 0.0), (Action::ForwardLeft, -1.0), (Action::ForwardRight, 1.0)] {
        let [hx, hy] = pose.heading;
        let st = s * turn;
        let ct = if turn == 0.0 { 1.0 } else { c };
        let h = [hx * ct - hy * st, hx * st + hy * ct];
        let next = [pos[0] + h[0] * params.forward_speed, pos[1] + h[1] * params.forward_speed];
        if dist(next, goal) < params.waypoint_tolerance {
            // Reaching the goal beats any heading.
            return action;
        }
        let after = heading_error(h, next, carrot(next, path, params.lookahead)).abs();
        if after + 1e-12 < best.0 {
            best = (after, action);
        }
    }
    best.1
}
