//! Empirical check of the trajectory error bound `T·e^{L̂T}·sqrt(𝓔*)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::Cloud;
use crate::dataset::TrajectoryDataset;
use crate::error::{Error, Result};
use crate::metrics::norm_n;
use crate::par;
use crate::payoff::Payoff;
use crate::sim::{fast_reaction_state, step_fast_reaction};
use crate::strategy::VelocityMap;

pub const LIPSCHITZ_PROBES: usize = 200;
pub const LIPSCHITZ_SAFETY: f64 = 1.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationBound {
    pub realization: usize,
    /// `max_s ‖x(t_s) − x̂(t_s)‖_N`.
    pub max_gap: f64,
    /// Velocity residual `(1/(S·N)) Σ ‖v_i(t_s) − v_i^Ĵ(t_s)‖²`.
    pub e_star: f64,
    pub horizon: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub l_hat: f64,
    pub realizations: Vec<RealizationBound>,
    pub all_hold: bool,
}

/// Sampled Lipschitz constant of `X ↦ V^Ĵ(X)` in `‖·‖_N`, times the safety
/// factor. Pairs are dataset configurations and random perturbations of them.
pub fn sampled_lipschitz<P: Payoff + ?Sized>(
    dataset: &TrajectoryDataset,
    fitted: &P,
    eps: f64,
    probes: usize,
    seed: u64,
) -> Result<f64> {
    if dataset.snapshots.is_empty() {
        return Err(Error::config("dataset has no snapshots"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(usize, Vec<f64>)> = (0..probes)
        .map(|_| {
            let s = rng.random_range(0..dataset.snapshots.len());
            let scale = 10f64.powf(rng.random_range(-3.0..-1.0));
            let len = dataset.snapshots[s].x.as_slice().len();
            (s, (0..len).map(|_| scale * rng.random_range(-1.0..1.0)).collect())
        })
        .collect();
    let ratios = par::map_range(pairs.len(), |p| -> Result<f64> {
        let (s, delta) = &pairs[p];
        let x = &dataset.snapshots[*s].x;
        let mut y = x.clone();
        y.as_mut_slice().iter_mut().zip(delta).for_each(|(a, d)| *a += d);
        let vx = fast_reaction_state(x, fitted, eps)?.velocities;
        let vy = fast_reaction_state(&y, fitted, eps)?.velocities;
        Ok(norm_n(&vx, &vy)? / norm_n(x, &y)?)
    });
    let mut l: f64 = 0.0;
    for r in ratios {
        l = l.max(r?);
    }
    Ok(LIPSCHITZ_SAFETY * l)
}

/// Re-simulates the fast-reaction model under `fitted` from each
/// realization's first snapshot with the dataset's time step and compares with
/// the stored trajectory at every snapshot time.
pub fn trajectory_error_bound_check<P: Payoff + ?Sized>(
    dataset: &TrajectoryDataset,
    fitted: &P,
    eps: f64,
) -> Result<BoundReport> {
    if fitted.strategies().velocity_map() != VelocityMap::Identity || dataset.has_headings() {
        return Err(Error::config("the bound check applies to fast-reaction data with e(x, u) = u"));
    }
    let dt = dataset.meta.dt;
    if !(dt > 0.0) {
        return Err(Error::config("dataset time step must be positive"));
    }
    let l_hat = sampled_lipschitz(dataset, fitted, eps, LIPSCHITZ_PROBES, dataset.meta.seed)?;
    let runs = dataset.realizations();
    let rows = par::map_range(runs.len(), |ri| -> Result<RealizationBound> {
        let run = runs[ri];
        let t0 = run[0].t;
        let mut x: Cloud = run[0].x.clone();
        let mut step = 0usize;
        let mut max_gap: f64 = 0.0;
        let mut e_sum = 0.0;
        for snap in run {
            let target = ((snap.t - t0) / dt).round() as usize;
            while step < target {
                step_fast_reaction(&mut x, fitted, eps, dt)?;
                step += 1;
            }
            max_gap = max_gap.max(norm_n(&snap.x, &x)?);
            let v = fast_reaction_state(&snap.x, fitted, eps)?.velocities;
            let n = v.len() as f64;
            e_sum += v
                .as_slice()
                .iter()
                .zip(snap.v.as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / n;
        }
        let e_star = e_sum / run.len() as f64;
        let horizon = run[run.len() - 1].t - t0;
        let bound = horizon * (l_hat * horizon).exp() * e_star.sqrt();
        Ok(RealizationBound {
            realization: run[0].r,
            max_gap,
            e_star,
            horizon,
            bound,
            holds: max_gap <= bound + 1e-12,
        })
    });
    let realizations = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(BoundReport {
        l_hat,
        all_hold: realizations.iter().all(|r| r.holds),
        realizations,
    })
}
