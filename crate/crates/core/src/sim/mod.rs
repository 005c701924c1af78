//! Explicit Euler integrators for the forward models and the dataset
//! generator.

mod noise;
mod pedestrian;
mod run;

pub use noise::{corrupt_strategies_by_resampling, resample_strategy};
pub use pedestrian::{pedestrian_potential, pedestrian_quantities, penalty_phi, step_pedestrian, PedestrianParams, PedestrianQuantities};
pub use run::{run_simulation, Dynamics, InitialSampler, ModelKind, SimConfig};

use std::f64::consts::PI;

use crate::cloud::Cloud;
use crate::error::{Error, Result};
use crate::par;
use crate::payoff::Payoff;
use crate::strategy::{self, MixedStrategy, StrategySpace, VelocityMap};

/// Agents below this count are processed sequentially inside a step.
const PARALLEL_AGENTS: usize = 64;

/// Maps an angle to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Positions and (optionally) mixed strategies of all agents.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub positions: Cloud,
    /// Empty for models without explicit strategies.
    pub strategies: Vec<MixedStrategy>,
}

impl Ensemble {
    pub fn new(positions: Cloud, strategies: Vec<MixedStrategy>) -> Result<Self> {
        if !strategies.is_empty() {
            Error::check_dim(positions.len(), strategies.len())?;
        }
        Ok(Ensemble { positions, strategies })
    }

    /// Every agent starts from the uniform strategy.
    pub fn uniform(positions: Cloud, k: usize) -> Self {
        let n = positions.len();
        Ensemble {
            positions,
            strategies: vec![MixedStrategy::uniform(k); n],
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Diagnostics of one strategy update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    /// Largest `|(1/K) Σ σ_k − 1|` after the Euler update, before renormalizing.
    pub mass_defect: f64,
}

/// Steady state of the fast-reaction model at one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct FastReactionState {
    pub strategies: Vec<MixedStrategy>,
    pub velocities: Cloud,
}

fn integrator_error(agent: usize, reason: impl Into<String>) -> Error {
    Error::Integrator {
        realization: None,
        step: 0,
        agent,
        reason: reason.into(),
    }
}

fn per_agent<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    if n >= PARALLEL_AGENTS {
        par::map_range(n, f)
    } else {
        (0..n).map(f).collect()
    }
}

/// `g_k = (1/N) Σ_j J(x_i, u_k, x_j)`, including `j = i`.
pub fn averaged_payoff<P: Payoff + ?Sized>(payoff: &P, positions: &Cloud, i: usize, out: &mut [f64]) {
    let n = positions.len();
    let mut row = vec![0.0; out.len()];
    out.fill(0.0);
    let xi = positions.row(i);
    for xj in positions.rows() {
        payoff.eval_row(xi, xj, &mut row);
        for (o, r) in out.iter_mut().zip(&row) {
            *o += r;
        }
    }
    out.iter_mut().for_each(|o| *o /= n as f64);
}

/// `h_k = (1/N) Σ_j (1/K) Σ_l J(x_i, u_k, x_j, u_l) σ_j(u_l)`.
pub fn averaged_payoff_full<P: Payoff + ?Sized>(
    payoff: &P,
    positions: &Cloud,
    strategies: &[MixedStrategy],
    i: usize,
    out: &mut [f64],
) {
    let n = positions.len();
    let k = out.len();
    let mut table = vec![0.0; k * k];
    out.fill(0.0);
    let xi = positions.row(i);
    for (xj, sj) in positions.rows().zip(strategies) {
        payoff.eval_table(xi, xj, &mut table);
        let h = strategy::average_over_other(sj, &table);
        for (o, v) in out.iter_mut().zip(&h) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o /= n as f64);
}

fn check_space<P: Payoff + ?Sized>(payoff: &P, positions: &Cloud) -> Result<()> {
    Error::check_dim(payoff.strategies().state_dim(), positions.dim())
}

/// Strategy drift `λ·[(1/N) Σ_j f^J + f^ε]` for every agent, plus the current
/// velocities.
fn game_rates<P: Payoff + ?Sized>(
    ens: &Ensemble,
    payoff: &P,
    full: bool,
    lambda: f64,
    eps: f64,
) -> Result<(Cloud, Vec<Vec<f64>>)> {
    check_space(payoff, &ens.positions)?;
    let space = payoff.strategies();
    let k = space.k();
    Error::check_dim(ens.len(), ens.strategies.len())?;
    let rows = per_agent(ens.len(), |i| -> Result<(Vec<f64>, Vec<f64>)> {
        let sigma = &ens.strategies[i];
        let mut g = vec![0.0; k];
        if full {
            averaged_payoff_full(payoff, &ens.positions, &ens.strategies, i, &mut g);
        } else {
            averaged_payoff(payoff, &ens.positions, i, &mut g);
        }
        let mut drift = vec![0.0; k];
        strategy::replicator_into(sigma, &g, &mut drift);
        if eps > 0.0 {
            if let Some(bad) = sigma.iter().position(|&s| !(s > 0.0)) {
                return Err(integrator_error(i, format!("density entry {bad} is not positive")));
            }
            let mut ent = vec![0.0; k];
            strategy::entropy_into(sigma, eps, &mut ent);
            for (d, e) in drift.iter_mut().zip(&ent) {
                *d += e;
            }
        }
        drift.iter_mut().for_each(|d| *d *= lambda);
        let mut v = vec![0.0; space.state_dim()];
        strategy::velocity_into(ens.positions.row(i), sigma, space, &mut v);
        Ok((v, drift))
    });
    let mut vel = Cloud::zeros(ens.len(), ens.positions.dim());
    let mut drifts = Vec::with_capacity(ens.len());
    for (i, r) in rows.into_iter().enumerate() {
        let (v, d) = r?;
        vel.row_mut(i).copy_from_slice(&v);
        drifts.push(d);
    }
    Ok((vel, drifts))
}

/// `x ← x + dt·v`, wrapping headings for pedestrian states.
fn advance_positions(positions: &mut Cloud, velocities: &Cloud, dt: f64, map: Option<VelocityMap>) -> Result<()> {
    positions.advance(velocities, dt)?;
    if map == Some(VelocityMap::Heading) {
        for i in 0..positions.len() {
            let row = positions.row_mut(i);
            row[2] = wrap_angle(row[2]);
        }
    }
    if let Some(i) = positions.rows().position(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(integrator_error(i, "position became non-finite"));
    }
    Ok(())
}

/// `σ ← σ + dt·drift`, then renormalize.
fn advance_strategies(strategies: &mut [MixedStrategy], drifts: &[Vec<f64>], dt: f64) -> Result<StepReport> {
    let mut report = StepReport::default();
    for (i, (s, d)) in strategies.iter_mut().zip(drifts).enumerate() {
        let mut next: Vec<f64> = s.iter().zip(d).map(|(a, b)| a + dt * b).collect();
        if let Some(k) = next.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(integrator_error(
                i,
                format!("density entry {k} left (0, ∞) with value {} (step size too large?)", next[k]),
            ));
        }
        let m = strategy::mean(&next);
        report.mass_defect = report.mass_defect.max((m - 1.0).abs());
        next.iter_mut().for_each(|v| *v /= m);
        *s = MixedStrategy::from_raw(next);
    }
    Ok(report)
}

/// One Euler step of the full entropic model. `eps = 0` drops the entropy
/// term.
pub fn step_full_entropic<P: Payoff + ?Sized>(
    ens: &mut Ensemble,
    payoff: &P,
    lambda: f64,
    eps: f64,
    dt: f64,
) -> Result<StepReport> {
    let (v, d) = game_rates(ens, payoff, true, lambda, eps)?;
    apply_game_step(ens, &v, &d, dt, payoff.strategies())
}

/// One Euler step of the undisclosed model, where the payoff ignores the other
/// agents' strategies.
pub fn step_undisclosed<P: Payoff + ?Sized>(
    ens: &mut Ensemble,
    payoff: &P,
    lambda: f64,
    eps: f64,
    dt: f64,
) -> Result<StepReport> {
    let (v, d) = game_rates(ens, payoff, false, lambda, eps)?;
    apply_game_step(ens, &v, &d, dt, payoff.strategies())
}

fn apply_game_step(ens: &mut Ensemble, v: &Cloud, d: &[Vec<f64>], dt: f64, space: &StrategySpace) -> Result<StepReport> {
    let report = advance_strategies(&mut ens.strategies, d, dt)?;
    advance_positions(&mut ens.positions, v, dt, Some(space.velocity_map()))?;
    Ok(report)
}

/// Steady-state strategies and velocities of the fast-reaction model.
pub fn fast_reaction_state<P: Payoff + ?Sized>(positions: &Cloud, payoff: &P, eps: f64) -> Result<FastReactionState> {
    check_space(payoff, positions)?;
    if !(eps > 0.0) {
        return Err(Error::domain(format!("eps must be positive, got {eps}")));
    }
    let space = payoff.strategies();
    let k = space.k();
    let rows = per_agent(positions.len(), |i| {
        let mut g = vec![0.0; k];
        averaged_payoff(payoff, positions, i, &mut g);
        let mut sigma = vec![0.0; k];
        strategy::softmax_into(&g, eps, &mut sigma);
        let mut v = vec![0.0; positions.dim()];
        strategy::velocity_into(positions.row(i), &sigma, space, &mut v);
        (MixedStrategy::from_raw(sigma), v)
    });
    let mut velocities = Cloud::zeros(positions.len(), positions.dim());
    let mut strategies = Vec::with_capacity(rows.len());
    for (i, (s, v)) in rows.into_iter().enumerate() {
        velocities.row_mut(i).copy_from_slice(&v);
        strategies.push(s);
    }
    Ok(FastReactionState { strategies, velocities })
}

/// One Euler step of the fast-reaction model. Returns the steady state at the
/// configuration before the step.
pub fn step_fast_reaction<P: Payoff + ?Sized>(
    positions: &mut Cloud,
    payoff: &P,
    eps: f64,
    dt: f64,
) -> Result<FastReactionState> {
    let state = fast_reaction_state(positions, payoff, eps)?;
    advance_positions(positions, &state.velocities, dt, Some(payoff.strategies().velocity_map()))?;
    Ok(state)
}

/// Velocities `(1/N) Σ_j f(x_i, x_j)` of a Newtonian model.
pub fn newtonian_velocities(positions: &Cloud, force: &(dyn Fn(&[f64], &[f64], &mut [f64]) + Sync)) -> Cloud {
    let n = positions.len();
    let d = positions.dim();
    let rows = per_agent(n, |i| {
        let mut acc = vec![0.0; d];
        let mut f = vec![0.0; d];
        for xj in positions.rows() {
            force(positions.row(i), xj, &mut f);
            for (a, b) in acc.iter_mut().zip(&f) {
                *a += b;
            }
        }
        acc.iter_mut().for_each(|a| *a /= n as f64);
        acc
    });
    let mut v = Cloud::zeros(n, d);
    for (i, r) in rows.into_iter().enumerate() {
        v.row_mut(i).copy_from_slice(&r);
    }
    v
}

/// One Euler step of a Newtonian model; returns the pre-step velocities.
pub fn step_newtonian(
    positions: &mut Cloud,
    force: &(dyn Fn(&[f64], &[f64], &mut [f64]) + Sync),
    dt: f64,
) -> Result<Cloud> {
    let v = newtonian_velocities(positions, force);
    advance_positions(positions, &v, dt, None)?;
    Ok(v)
}
