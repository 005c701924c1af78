//! Data terms of the inference functionals and their coefficient gradients.

use crate::cloud::Cloud;
use crate::dataset::{Snapshot, TrajectoryDataset};
use crate::error::{Error, Result};
use crate::par;
use crate::payoff::{Payoff, PayoffModel};
use crate::sim::wrap_angle;
use crate::strategy::{self, MixedStrategy, VelocityMap};

use super::operator::Operator;
use super::{Functional, InferenceProblem};

/// Number of work units per evaluation. Fixed so that the summation order,
/// and hence the result, does not depend on the thread count.
const CHUNKS: usize = 64;

/// Observed strategies with exact time derivatives, for the differential
/// functional when `∂_t σ` is available directly.
#[derive(Clone, Debug)]
pub struct DifferentialSample {
    pub positions: Cloud,
    pub sigma: Vec<MixedStrategy>,
    /// `∂_t σ_i` per agent.
    pub rates: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
enum Targets {
    /// Observed densities, one row of `K` per group.
    Sigma(Vec<f64>),
    /// Observed velocities (`dim` per group) and the pure-strategy velocities
    /// `e_k` (`K × dim`).
    Velocity { v: Vec<f64>, e: Vec<f64>, dim: usize },
    /// Observed densities and `∂_t σ / λ − f^ε(σ)`, both `K` per group.
    Differential { sigma: Vec<f64>, target: Vec<f64> },
}

/// An assembled inference objective over a fixed set of observations.
#[derive(Clone, Debug)]
pub struct Objective {
    functional: Functional,
    model: PayoffModel,
    op: Operator,
    targets: Targets,
    eps: f64,
    reg: Vec<f64>,
    skipped_pairs: usize,
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("eps must be positive, got {eps}")))
    }
}

fn reg_weights(model: &PayoffModel, reg: [f64; 2]) -> Result<Vec<f64>> {
    if reg.iter().any(|&r| !(r >= 0.0) || !r.is_finite()) {
        return Err(Error::config(format!("regularization weights must be non-negative, got {reg:?}")));
    }
    Ok(reg[..model.grids().len().min(2)].to_vec())
}

fn snapshot_sigma(s: &Snapshot, k: usize) -> Result<&[MixedStrategy]> {
    let sig = s
        .sigma
        .as_deref()
        .ok_or_else(|| Error::config("this functional needs observed strategies; run `reconstruct` first"))?;
    for m in sig {
        Error::check_dim(k, m.len())?;
        if m.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::config("observed strategies contain negative or non-finite entries"));
        }
    }
    Ok(sig)
}

impl Objective {
    pub fn new(problem: &InferenceProblem<'_>) -> Result<Self> {
        check_eps(problem.eps)?;
        let ds: &TrajectoryDataset = problem.dataset;
        let model = &problem.model;
        let space = model.strategies();
        let k = space.k();
        if ds.snapshots.is_empty() {
            return Err(Error::config("dataset has no snapshots"));
        }
        let mut op = Operator::new(model);
        let mut skipped_pairs = 0;
        let targets = match problem.functional {
            Functional::Sigma => {
                if !ds.has_strategies() {
                    return Err(Error::config(
                        "the sigma functional needs observed strategies; run `reconstruct` on this dataset first",
                    ));
                }
                let mut p = Vec::new();
                for s in &ds.snapshots {
                    let states = s.states()?;
                    Error::check_dim(space.state_dim(), states.dim())?;
                    let sig = snapshot_sigma(s, k)?;
                    for (i, m) in sig.iter().enumerate() {
                        op.push_agent(model, &states, Some(sig), i)?;
                        p.extend_from_slice(m);
                    }
                }
                Targets::Sigma(p)
            }
            Functional::Velocity => {
                if space.velocity_map() != VelocityMap::Identity || ds.has_headings() {
                    return Err(Error::config(
                        "the velocity functional needs e(x, u) = u; use pedestrian_velocity for heading data",
                    ));
                }
                let dim = space.strategy_dim();
                let mut v = Vec::new();
                for s in &ds.snapshots {
                    Error::check_dim(dim, s.x.dim())?;
                    for i in 0..s.x.len() {
                        op.push_agent(model, &s.x, s.sigma.as_deref(), i)?;
                        v.extend_from_slice(s.v.row(i));
                    }
                }
                let e = space.points().concat();
                Targets::Velocity { v, e, dim }
            }
            Functional::PedestrianVelocity => {
                if space.velocity_map() != VelocityMap::Heading || !ds.has_headings() {
                    return Err(Error::config(
                        "the pedestrian functional needs heading fields and a heading payoff model",
                    ));
                }
                let mut v = Vec::new();
                for run in ds.realizations() {
                    for w in run.windows(2) {
                        let dt = w[1].t - w[0].t;
                        let states = w[1].heading_states()?;
                        let (th0, th1) = (w[0].theta.as_ref().unwrap(), w[1].theta.as_ref().unwrap());
                        for i in 0..states.len() {
                            op.push_agent(model, &states, None, i)?;
                            v.push(wrap_angle(th1[i] - th0[i]) / dt);
                        }
                    }
                }
                if v.is_empty() {
                    return Err(Error::config("the pedestrian functional needs at least two snapshots per realization"));
                }
                let e = space.points().iter().map(|p| p[0]).collect();
                Targets::Velocity { v, e, dim: 1 }
            }
            Functional::Differential => {
                if !ds.has_strategies() {
                    return Err(Error::config(
                        "the differential functional needs observed strategies; run `reconstruct` on this dataset first",
                    ));
                }
                let lambda = problem.lambda.or(ds.meta.lambda).unwrap_or(1.0);
                if !(lambda > 0.0) {
                    return Err(Error::config(format!("lambda must be positive, got {lambda}")));
                }
                let runs = ds.realizations();
                skipped_pairs = runs.len() - 1;
                let mut sigma = Vec::new();
                let mut target = Vec::new();
                let mut ent = vec![0.0; k];
                for run in runs {
                    for w in run.windows(2) {
                        let dt = w[1].t - w[0].t;
                        let (s0, s1) = (snapshot_sigma(&w[0], k)?, snapshot_sigma(&w[1], k)?);
                        let states = w[0].states()?;
                        for i in 0..states.len() {
                            if s0[i].iter().any(|&v| !(v > 0.0)) {
                                return Err(Error::config("the differential functional needs strictly positive strategies"));
                            }
                            op.push_agent(model, &states, Some(s0), i)?;
                            strategy::entropy_into(&s0[i], problem.eps, &mut ent);
                            sigma.extend_from_slice(&s0[i]);
                            for kk in 0..k {
                                target.push((s1[i][kk] - s0[i][kk]) / dt / lambda - ent[kk]);
                            }
                        }
                    }
                }
                if sigma.is_empty() {
                    return Err(Error::config("the differential functional needs consecutive snapshots"));
                }
                Targets::Differential { sigma, target }
            }
        };
        Ok(Objective {
            functional: problem.functional,
            model: model.clone(),
            op,
            targets,
            eps: problem.eps,
            reg: reg_weights(model, problem.reg)?,
            skipped_pairs,
        })
    }

    /// Differential objective from explicitly observed strategy derivatives.
    /// `lambda` rescales the rates as in [`Objective::new`].
    pub fn differential_from_samples(
        model: &PayoffModel,
        samples: &[DifferentialSample],
        eps: f64,
        lambda: f64,
        reg: [f64; 2],
    ) -> Result<Self> {
        check_eps(eps)?;
        let k = model.strategies().k();
        let mut op = Operator::new(model);
        let mut sigma = Vec::new();
        let mut target = Vec::new();
        let mut ent = vec![0.0; k];
        for s in samples {
            Error::check_dim(s.positions.len(), s.sigma.len())?;
            Error::check_dim(s.positions.len(), s.rates.len())?;
            for i in 0..s.positions.len() {
                Error::check_dim(k, s.rates[i].len())?;
                op.push_agent(model, &s.positions, Some(&s.sigma), i)?;
                strategy::entropy_into(&s.sigma[i], eps, &mut ent);
                sigma.extend_from_slice(&s.sigma[i]);
                target.extend(s.rates[i].iter().zip(&ent).map(|(r, e)| r / lambda - e));
            }
        }
        Ok(Objective {
            functional: Functional::Differential,
            model: model.clone(),
            op,
            targets: Targets::Differential { sigma, target },
            eps,
            reg: reg_weights(model, reg)?,
            skipped_pairs: 0,
        })
    }

    pub fn functional(&self) -> Functional {
        self.functional
    }

    pub fn n_coefficients(&self) -> usize {
        self.model.n_coefficients()
    }

    /// Number of `(sample, agent)` observations.
    pub fn groups(&self) -> usize {
        self.op.groups()
    }

    /// Snapshot pairs excluded from finite differencing because they straddle
    /// two realizations.
    pub fn skipped_pairs(&self) -> usize {
        self.skipped_pairs
    }

    /// Value of group `r` and its derivative with respect to the averaged
    /// payoff `g`.
    fn group(&self, r: usize, g: &[f64], q: &mut [f64], dg: &mut [f64]) -> f64 {
        let k = g.len();
        let kf = k as f64;
        let eps = self.eps;
        match &self.targets {
            Targets::Sigma(p) => {
                let p = &p[r * k..(r + 1) * k];
                let lse = strategy::softmax_into(g, eps, q);
                let mass = strategy::mean(p);
                let mut val = 0.0;
                for kk in 0..k {
                    let log_q = g[kk] / eps - lse;
                    if p[kk] > 0.0 {
                        val += p[kk] * (p[kk].ln() - log_q);
                    }
                    dg[kk] = (q[kk] * mass - p[kk]) / (kf * eps);
                }
                val / kf
            }
            Targets::Velocity { v, e, dim } => {
                let dim = *dim;
                let obs = &v[r * dim..(r + 1) * dim];
                strategy::softmax_into(g, eps, q);
                let mut vj = [0.0; 8];
                let vj = &mut vj[..dim];
                for kk in 0..k {
                    for (a, ek) in vj.iter_mut().zip(&e[kk * dim..(kk + 1) * dim]) {
                        *a += q[kk] * ek / kf;
                    }
                }
                let mut val = 0.0;
                for (a, b) in vj.iter().zip(obs) {
                    val += (a - b) * (a - b);
                }
                for kk in 0..k {
                    let ek = &e[kk * dim..(kk + 1) * dim];
                    let mut dot = 0.0;
                    for d in 0..dim {
                        dot += (vj[d] - obs[d]) * (ek[d] - vj[d]);
                    }
                    dg[kk] = 2.0 * dot * q[kk] / (kf * eps);
                }
                val
            }
            Targets::Differential { sigma, target } => {
                let s = &sigma[r * k..(r + 1) * k];
                let t = &target[r * k..(r + 1) * k];
                strategy::replicator_into(s, g, q);
                let mut val = 0.0;
                let mut acc = 0.0;
                for kk in 0..k {
                    let res = t[kk] - q[kk];
                    val += res * res / s[kk];
                    // ∂value/∂res_k, reused for the chain rule below.
                    dg[kk] = 0.5 * res / (s[kk] * kf);
                    acc += dg[kk] * s[kk];
                }
                for kk in 0..k {
                    dg[kk] = -dg[kk] * s[kk] + s[kk] * acc / kf;
                }
                0.25 * val / kf
            }
        }
    }

    /// Data term and its gradient, without regularization.
    pub fn data_term(&self, c: &[f64]) -> Result<(f64, Vec<f64>)> {
        Error::check_dim(self.n_coefficients(), c.len())?;
        let groups = self.groups();
        let n = c.len();
        let k = self.op.k();
        let per = groups.div_ceil(CHUNKS).max(1);
        let scale = 1.0 / groups as f64;
        let parts = par::map_range(groups.div_ceil(per), |chunk| {
            let mut grad = vec![0.0; n];
            let mut val = 0.0;
            let (mut g, mut q, mut dg) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
            for r in chunk * per..((chunk + 1) * per).min(groups) {
                self.op.apply(r, c, &mut g);
                val += self.group(r, &g, &mut q, &mut dg);
                self.op.scatter(r, &dg, scale, &mut grad);
            }
            (val * scale, grad)
        });
        Ok(tree_sum(parts).unwrap_or_else(|| (0.0, vec![0.0; n])))
    }

    /// Regularized objective `data + Σ λ_g R(J_g)` and its gradient.
    pub fn value_grad(&self, c: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (data, mut grad) = self.data_term(c)?;
        let pen = self.model.penalty(c, &self.reg, &mut grad);
        Ok((data + pen, grad))
    }
}

/// Pairwise sum in a fixed order.
fn tree_sum(mut parts: Vec<(f64, Vec<f64>)>) -> Option<(f64, Vec<f64>)> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some((va, mut ga)) = it.next() {
            if let Some((vb, gb)) = it.next() {
                ga.iter_mut().zip(&gb).for_each(|(a, b)| *a += b);
                next.push((va + vb, ga));
            } else {
                next.push((va, ga));
            }
        }
        parts = next;
    }
    parts.pop()
}
