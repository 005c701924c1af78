//! Anticipatory pedestrian model with unit-speed agents steering their heading.

use serde::{Deserialize, Serialize};

use super::{advance_positions, wrap_angle};
use crate::cloud::Cloud;
use crate::error::{Error, Result};

/// Parameters of the pedestrian potential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PedestrianParams {
    pub k1: f64,
    pub k2: f64,
    /// Comfort radius `R` for the closest-approach distance.
    pub r: f64,
    /// Horizon `L` for the travelling distance.
    pub l: f64,
}

impl Default for PedestrianParams {
    fn default() -> Self {
        PedestrianParams {
            k1: 1.0,
            k2: 1.0,
            r: 0.3,
            l: 1.0,
        }
    }
}

/// Travelling distance `d` to the closest encounter, the distance `c` at that
/// encounter, and whether the other agent is visible and approaching.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PedestrianQuantities {
    pub d: f64,
    pub c: f64,
    pub s: bool,
}

/// Step of the central difference in the heading.
const HEADING_STEP: f64 = 1e-4;
const PARALLEL_TOL: f64 = 1e-12;

/// Closest-encounter quantities of agent `i` moving with `v` relative to agent
/// `j`. Returns `None` when the relative velocity vanishes.
pub fn pedestrian_quantities(xi: [f64; 2], v: [f64; 2], xj: [f64; 2], vj: [f64; 2]) -> Option<PedestrianQuantities> {
    let dx = [xj[0] - xi[0], xj[1] - xi[1]];
    let dv = [vj[0] - v[0], vj[1] - v[1]];
    let dv2 = dv[0] * dv[0] + dv[1] * dv[1];
    if dv2.sqrt() < PARALLEL_TOL {
        return None;
    }
    let vn = v[0].hypot(v[1]);
    let proj = dx[0] * dv[0] + dx[1] * dv[1];
    let dx2 = dx[0] * dx[0] + dx[1] * dx[1];
    let d = -proj / dv2 * vn;
    let c = (dx2 - proj * proj / dv2).max(0.0).sqrt();
    let dxn = dx2.sqrt();
    let visible = dxn > 0.0 && vn > 0.0 && (dx[0] * v[0] + dx[1] * v[1]) / (dxn * vn) > (7.0 * std::f64::consts::PI / 12.0).cos();
    Some(PedestrianQuantities {
        d,
        c,
        s: visible && d > 0.0,
    })
}

/// `φ_a(x) = (x/a − 1)²` for `x ≤ a`, zero beyond.
pub fn penalty_phi(x: f64, a: f64) -> f64 {
    if x <= a {
        (x / a - 1.0).powi(2)
    } else {
        0.0
    }
}

fn unit(theta: f64) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    [c, s]
}

/// Others seen by agent `i` at its current heading.
fn active_set(states: &Cloud, i: usize) -> Vec<usize> {
    let me = states.row(i);
    let v = unit(me[2]);
    (0..states.len())
        .filter(|&j| j != i)
        .filter(|&j| {
            let o = states.row(j);
            pedestrian_quantities([me[0], me[1]], v, [o[0], o[1]], unit(o[2])).is_some_and(|q| q.s)
        })
        .collect()
}

fn potential_with(states: &Cloud, i: usize, theta: f64, active: &[usize], p: &PedestrianParams) -> f64 {
    let me = states.row(i);
    let v = unit(theta);
    let target = unit(me[3]);
    let drive = p.k1 * ((v[0] - target[0]).powi(2) + (v[1] - target[1]).powi(2));
    if active.is_empty() {
        return drive;
    }
    let mut acc = 0.0;
    for &j in active {
        let o = states.row(j);
        if let Some(q) = pedestrian_quantities([me[0], me[1]], v, [o[0], o[1]], unit(o[2])) {
            acc += penalty_phi(q.c, p.r) * penalty_phi(q.d, p.l);
        }
    }
    drive + p.k2 * acc / active.len() as f64
}

/// Potential of agent `i` at heading `theta`, other agents frozen. States are
/// rows `(x, y, θ, θ̄)`.
pub fn pedestrian_potential(states: &Cloud, i: usize, theta: f64, params: &PedestrianParams) -> f64 {
    let me = states.row(i);
    let v = unit(theta);
    let active: Vec<usize> = (0..states.len())
        .filter(|&j| j != i)
        .filter(|&j| {
            let o = states.row(j);
            pedestrian_quantities([me[0], me[1]], v, [o[0], o[1]], unit(o[2])).is_some_and(|q| q.s)
        })
        .collect();
    potential_with(states, i, theta, &active, params)
}

/// Velocities `(cos θ, sin θ, θ̇, 0)` of all agents. The heading rate is the
/// negative central difference of the potential in `θ`, with the set of
/// visible approaching agents fixed at the current heading.
pub fn pedestrian_velocities(states: &Cloud, params: &PedestrianParams) -> Result<Cloud> {
    Error::check_dim(4, states.dim())?;
    let n = states.len();
    let mut vel = Cloud::zeros(n, 4);
    for i in 0..n {
        let theta = states.row(i)[2];
        let active = active_set(states, i);
        let h = HEADING_STEP;
        let dphi = (potential_with(states, i, theta + h, &active, params)
            - potential_with(states, i, theta - h, &active, params))
            / (2.0 * h);
        let [c, s] = unit(theta);
        vel.row_mut(i).copy_from_slice(&[c, s, -dphi, 0.0]);
    }
    Ok(vel)
}

/// One Euler step of the pedestrian model; returns the pre-step velocities.
pub fn step_pedestrian(states: &mut Cloud, params: &PedestrianParams, dt: f64) -> Result<Cloud> {
    let v = pedestrian_velocities(states, params)?;
    advance_positions(states, &v, dt, Some(crate::VelocityMap::Heading))?;
    for i in 0..states.len() {
        let r = states.row_mut(i);
        r[3] = wrap_angle(r[3]);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn head_on_quantities() {
        let q = pedestrian_quantities([0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [-1.0, 0.0]).unwrap();
        assert_relative_eq!(q.d, 1.0);
        assert_eq!(q.c, 0.0);
        assert!(q.s);
        let off = pedestrian_quantities([0.0, 0.0], [1.0, 0.0], [2.0, 0.1], [-1.0, 0.0]).unwrap();
        assert_relative_eq!(off.c, 0.1, epsilon = 1e-12);
        assert!(pedestrian_quantities([0.0, 0.0], [1.0, 0.0], [2.0, 0.1], [1.0, 0.0]).is_none());
    }

    #[test]
    fn agents_behind_are_not_seen() {
        let q = pedestrian_quantities([0.0, 0.0], [1.0, 0.0], [-2.0, 0.0], [1.0, 0.5]).unwrap();
        assert!(!q.s);
    }

    #[test]
    fn phi_boundaries() {
        assert_eq!(penalty_phi(0.3, 0.3), 0.0);
        assert_eq!(penalty_phi(0.0, 0.3), 1.0);
        assert_eq!(penalty_phi(5.0, 0.3), 0.0);
    }

    #[test]
    fn lone_walker_turns_towards_target() {
        let params = PedestrianParams {
            k2: 0.0,
            ..Default::default()
        };
        let mut st = Cloud::new(4, vec![0.0, 0.0, 1.2, 0.0, 10.0, 10.0, 0.0, 0.0]).unwrap();
        let v = pedestrian_velocities(&st, &params).unwrap();
        assert_relative_eq!(v.row(0)[2], -2.0 * (1.2f64).sin(), epsilon = 1e-7);
        let mut prev = 1.2;
        for _ in 0..200 {
            step_pedestrian(&mut st, &params, 0.005).unwrap();
            let a = wrap_angle(st.row(0)[2] - st.row(0)[3]).abs();
            assert!(a < prev);
            prev = a;
            let r = st.row(0);
            assert_eq!(r[3], 0.0);
        }
    }

    #[test]
    fn speed_is_one() {
        let st = Cloud::new(4, vec![0.0, 0.0, 0.3, 0.0, 1.0, 0.1, 3.0, 3.1]).unwrap();
        let v = pedestrian_velocities(&st, &PedestrianParams::default()).unwrap();
        for r in v.rows() {
            assert_relative_eq!(r[0].hypot(r[1]), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn oncoming_agent_deflects() {
        // agent 1 approaches slightly from the left; agent 0 should turn right
        let st = Cloud::new(4, vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.1, std::f64::consts::PI, std::f64::consts::PI]).unwrap();
        let v = pedestrian_velocities(&st, &PedestrianParams::default()).unwrap();
        assert!(v.row(0)[2] < 0.0);
    }
}
