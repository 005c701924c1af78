//! Strategy spaces, mixed-strategy densities and the elementary operators acting
//! on them.
//!
//! Densities are taken with respect to the uniform measure on a finite set of
//! `K` pure strategies, so a valid density averages to one: `(1/K) Σ σ_k = 1`.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|(1/K) Σ σ_k − 1|` for a density to count as normalized.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Rule turning a pure strategy into a physical velocity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityMap {
    /// `e(x, u) = u`; strategies live in the same space as positions.
    Identity,
    /// Pedestrian states `(x, y, θ, θ̄)` with scalar turning rates:
    /// `e((x, y, θ, θ̄), u) = (cos θ, sin θ, u, 0)`.
    Heading,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrategySpace {
    points: Vec<Vec<f64>>,
    velocity_map: VelocityMap,
    #[serde(skip)]
    e_max: f64,
}

#[derive(Deserialize)]
struct RawSpace {
    points: Vec<Vec<f64>>,
    velocity_map: VelocityMap,
}

impl<'de> Deserialize<'de> for StrategySpace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawSpace::deserialize(d)?;
        StrategySpace::new(raw.points, raw.velocity_map).map_err(serde::de::Error::custom)
    }
}

impl StrategySpace {
    pub fn new(points: Vec<Vec<f64>>, velocity_map: VelocityMap) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::domain("a strategy space needs at least two pure strategies"));
        }
        let m = points[0].len();
        if m == 0 {
            return Err(Error::domain("pure strategies must have positive dimension"));
        }
        for p in &points {
            Error::check_dim(m, p.len())?;
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain("non-finite pure strategy"));
            }
        }
        for (i, p) in points.iter().enumerate() {
            if points[..i].iter().any(|q| q == p) {
                return Err(Error::domain(format!("duplicate pure strategy {p:?}")));
            }
        }
        if velocity_map == VelocityMap::Heading && m != 1 {
            return Err(Error::domain("heading strategies must be scalar turning rates"));
        }
        let max_sq = points
            .iter()
            .map(|p| p.iter().map(|v| v * v).sum::<f64>())
            .fold(0.0, f64::max);
        let e_max = match velocity_map {
            VelocityMap::Identity => max_sq.sqrt(),
            VelocityMap::Heading => (1.0 + max_sq).sqrt(),
        };
        Ok(StrategySpace {
            points,
            velocity_map,
            e_max,
        })
    }

    /// Scalar strategies `u_k`.
    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&u| vec![u]).collect(), VelocityMap::Identity)
    }

    /// `n` equispaced scalar strategies on `[lo, hi]`.
    pub fn linspace(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain("need at least two strategies"));
        }
        let h = (hi - lo) / (n - 1) as f64;
        Self::scalar(&(0..n).map(|i| lo + h * i as f64).collect::<Vec<_>>())
    }

    /// Tensor product of scalar strategy sets, first coordinate slowest.
    pub fn product(axes: &[Vec<f64>]) -> Result<Self> {
        let mut points: Vec<Vec<f64>> = vec![Vec::new()];
        for axis in axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&u| {
                        let mut q = p.clone();
                        q.push(u);
                        q
                    })
                })
                .collect();
        }
        Self::new(points, VelocityMap::Identity)
    }

    /// Scalar turning rates for pedestrian states.
    pub fn heading(rates: &[f64]) -> Result<Self> {
        Self::new(rates.iter().map(|&u| vec![u]).collect(), VelocityMap::Heading)
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }

    /// Dimension of a pure strategy.
    pub fn strategy_dim(&self) -> usize {
        self.points[0].len()
    }

    /// Dimension of the physical state the velocity map acts on.
    pub fn state_dim(&self) -> usize {
        match self.velocity_map {
            VelocityMap::Identity => self.strategy_dim(),
            VelocityMap::Heading => 4,
        }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k]
    }

    pub fn velocity_map(&self) -> VelocityMap {
        self.velocity_map
    }

    /// Bound on `‖e(x, u)‖` over all states and strategies.
    pub fn e_max(&self) -> f64 {
        self.e_max
    }

    /// Weight of each pure strategy under the reference measure.
    pub fn eta_weight(&self) -> f64 {
        1.0 / self.k() as f64
    }

    /// Writes `e(x, u_k)` into `out`.
    pub fn velocity_of(&self, x: &[f64], k: usize, out: &mut [f64]) {
        match self.velocity_map {
            VelocityMap::Identity => out.copy_from_slice(&self.points[k]),
            VelocityMap::Heading => {
                let (s, c) = x[2].sin_cos();
                out[0] = c;
                out[1] = s;
                out[2] = self.points[k][0];
                out[3] = 0.0;
            }
        }
    }
}

/// A density over the pure strategies with respect to the uniform measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MixedStrategy(Vec<f64>);

impl MixedStrategy {
    /// Checks finiteness, nonnegativity and normalization.
    pub fn new(density: Vec<f64>) -> Result<Self> {
        if density.len() < 2 {
            return Err(Error::domain("a mixed strategy needs at least two entries"));
        }
        if density.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::domain("density entries must be finite and nonnegative"));
        }
        let defect = (mean(&density) - 1.0).abs();
        if defect > NORMALIZATION_TOL {
            return Err(Error::domain(format!("density is not normalized (mass defect {defect:e})")));
        }
        Ok(MixedStrategy(density))
    }

    pub fn uniform(k: usize) -> Self {
        MixedStrategy(vec![1.0; k])
    }

    /// Density `K·𝟙_{k}` concentrated on one pure strategy.
    pub fn dirac(k: usize, at: usize) -> Self {
        let mut d = vec![0.0; k];
        d[at] = k as f64;
        MixedStrategy(d)
    }

    pub(crate) fn from_raw(density: Vec<f64>) -> Self {
        MixedStrategy(density)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `a ≤ σ_k ≤ b` for every entry.
    pub fn within(&self, a: f64, b: f64) -> bool {
        self.0.iter().all(|&s| a <= s && s <= b)
    }
}

impl Deref for MixedStrategy {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Mean over strategies, i.e. the integral against the reference measure.
pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Heuristic box `[a, b]` containing all steady states for `‖J‖_∞ ≤ j_inf`.
///
/// `a` sits a factor ten below `exp(−2‖J‖_∞/ε)` and `b` a factor ten above
/// `exp(2‖J‖_∞/ε)`.
pub fn default_density_box(j_inf: f64, eps: f64) -> (f64, f64) {
    let r = 2.0 * j_inf / eps;
    ((-r).exp() / 10.0, r.exp() * 10.0)
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::domain(format!("non-finite {what}")))
    }
}

fn check_positive(sigma: &[f64]) -> Result<()> {
    match sigma.iter().position(|&s| !(s > 0.0)) {
        None => Ok(()),
        Some(k) => Err(Error::domain(format!(
            "density entry {k} is {} (must be strictly positive)",
            sigma[k]
        ))),
    }
}

/// Writes the softmax density of `g / eps` into `out` and returns the
/// log-normalizer `log((1/K) Σ exp(g_l/eps))`.
pub(crate) fn softmax_into(g: &[f64], eps: f64, out: &mut [f64]) -> f64 {
    let m = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for (o, &gk) in out.iter_mut().zip(g) {
        *o = ((gk - m) / eps).exp();
        s += *o;
    }
    s /= g.len() as f64;
    for o in out.iter_mut() {
        *o /= s;
    }
    m / eps + s.ln()
}

/// Steady state `σ_k = exp(g_k/ε) / ((1/K) Σ_l exp(g_l/ε))`.
pub fn softmax_strategy(g: &[f64], eps: f64) -> Result<MixedStrategy> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::domain(format!("eps must be positive, got {eps}")));
    }
    if g.len() < 2 {
        return Err(Error::domain("need payoffs for at least two strategies"));
    }
    check_finite(g, "payoff value")?;
    let mut out = vec![0.0; g.len()];
    softmax_into(g, eps, &mut out);
    Ok(MixedStrategy(out))
}

/// `(1/K) Σ_k e(x, u_k) σ_k`.
pub fn strategy_velocity(x: &[f64], sigma: &[f64], space: &StrategySpace) -> Result<Vec<f64>> {
    Error::check_dim(space.k(), sigma.len())?;
    Error::check_dim(space.state_dim(), x.len())?;
    let mut v = vec![0.0; x.len()];
    velocity_into(x, sigma, space, &mut v);
    Ok(v)
}

pub(crate) fn velocity_into(x: &[f64], sigma: &[f64], space: &StrategySpace, v: &mut [f64]) {
    let inv_k = space.eta_weight();
    match space.velocity_map() {
        VelocityMap::Identity => {
            v.fill(0.0);
            for (p, &s) in space.points().iter().zip(sigma) {
                for (vi, &ui) in v.iter_mut().zip(p) {
                    *vi += ui * s;
                }
            }
            v.iter_mut().for_each(|vi| *vi *= inv_k);
        }
        VelocityMap::Heading => {
            let (s, c) = x[2].sin_cos();
            let rate: f64 = space.points().iter().zip(sigma).map(|(p, &s)| p[0] * s).sum();
            v[0] = c * mean(sigma);
            v[1] = s * mean(sigma);
            v[2] = rate * inv_k;
            v[3] = 0.0;
        }
    }
}

/// `[g_k − (1/K) Σ_l g_l σ_l] σ_k`, the replicator drift for payoffs that do
/// not depend on the other agent's strategy. `g` holds the payoffs already
/// averaged over the other agents.
pub fn replicator_drift_undisclosed(sigma: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    Error::check_dim(sigma.len(), g.len())?;
    check_finite(sigma, "density")?;
    check_finite(g, "payoff value")?;
    let mut out = vec![0.0; g.len()];
    replicator_into(sigma, g, &mut out);
    Ok(out)
}

pub(crate) fn replicator_into(sigma: &[f64], g: &[f64], out: &mut [f64]) {
    let avg = g.iter().zip(sigma).map(|(a, b)| a * b).sum::<f64>() / g.len() as f64;
    for ((o, &gk), &sk) in out.iter_mut().zip(g).zip(sigma) {
        *o = (gk - avg) * sk;
    }
}

/// Replicator drift for a payoff depending on both strategies. `payoff` is the
/// `K×K` row-major table `J(x, u_k, x', u_l)`.
pub fn replicator_drift_full(sigma: &[f64], sigma_other: &[f64], payoff: &[f64]) -> Result<Vec<f64>> {
    let k = sigma.len();
    Error::check_dim(k, sigma_other.len())?;
    Error::check_dim(k * k, payoff.len())?;
    check_finite(payoff, "payoff value")?;
    let h = average_over_other(sigma_other, payoff);
    let mut out = vec![0.0; k];
    replicator_into(sigma, &h, &mut out);
    Ok(out)
}

/// `h_k = (1/K) Σ_l J_kl σ'_l`.
pub(crate) fn average_over_other(sigma_other: &[f64], payoff: &[f64]) -> Vec<f64> {
    let k = sigma_other.len();
    payoff
        .chunks_exact(k)
        .map(|row| row.iter().zip(sigma_other).map(|(j, s)| j * s).sum::<f64>() / k as f64)
        .collect()
}

/// `ε [−log σ_k + (1/K) Σ_l σ_l log σ_l] σ_k`.
pub fn entropy_drift(sigma: &[f64], eps: f64) -> Result<Vec<f64>> {
    check_positive(sigma)?;
    let mut out = vec![0.0; sigma.len()];
    entropy_into(sigma, eps, &mut out);
    Ok(out)
}

pub(crate) fn entropy_into(sigma: &[f64], eps: f64, out: &mut [f64]) {
    let neg_ent = sigma.iter().map(|&s| s * s.ln()).sum::<f64>() / sigma.len() as f64;
    for (o, &s) in out.iter_mut().zip(sigma) {
        *o = eps * (neg_ent - s.ln()) * s;
    }
}

/// `(1/K) Σ_k p_k log(p_k / q_k)`, with `0 log 0 = 0` and `+∞` when `p` puts
/// mass where `q` vanishes.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    Error::check_dim(p.len(), q.len())?;
    let mut acc = 0.0;
    for (&pk, &qk) in p.iter().zip(q) {
        if pk == 0.0 {
            continue;
        }
        if qk == 0.0 {
            return Ok(f64::INFINITY);
        }
        acc += pk * (pk / qk).ln();
    }
    // Rounding can push the value of near-identical inputs a hair below zero.
    Ok((acc / p.len() as f64).max(0.0))
}

/// `sqrt((1/4)(1/K) Σ_k (dμ_k − dν_k)² / σ_k)`.
pub fn hellinger_tangent_distance(sigma: &[f64], dmu: &[f64], dnu: &[f64]) -> Result<f64> {
    Error::check_dim(sigma.len(), dmu.len())?;
    Error::check_dim(sigma.len(), dnu.len())?;
    check_positive(sigma)?;
    let s: f64 = sigma
        .iter()
        .zip(dmu.iter().zip(dnu))
        .map(|(&sg, (&a, &b))| (a - b) * (a - b) / sg)
        .sum();
    Ok((0.25 * s / sigma.len() as f64).sqrt())
}

/// `‖p − q‖_{L¹(η)} = (1/K) Σ |p_k − q_k|`.
pub fn l1_eta(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn softmax_two_strategies() {
        // g(u) = −x·u with x = 2 on U = {−1, 1}
        let s = softmax_strategy(&[2.0, -2.0], 0.5).unwrap();
        assert_relative_eq!(s[0], 2.0 / (1.0 + (-8.0f64).exp()), max_relative = 1e-15);
        assert_relative_eq!(s[1], 2.0 / (1.0 + 8.0f64.exp()), max_relative = 1e-13);
        assert!((s[0] - 1.999329).abs() < 1e-6);
        assert!((s[1] - 6.709e-4).abs() < 1e-6);
    }

    #[test]
    fn softmax_uniform_and_shift() {
        assert_eq!(&*softmax_strategy(&[0.0; 4], 0.3).unwrap(), &[1.0; 4]);
        let g = [0.3, -1.2, 2.5];
        let a = softmax_strategy(&g, 0.7).unwrap();
        let b = softmax_strategy(&g.map(|v| v + 1e3), 0.7).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_relative_eq!(x, y, max_relative = 1e-12);
        }
    }

    #[test]
    fn softmax_survives_huge_ratios() {
        let s = softmax_strategy(&[800.0, -800.0], 1.0).unwrap();
        assert_eq!(s[0], 2.0);
        assert_eq!(s[1], 0.0);
    }

    #[test]
    fn softmax_rejects_bad_input() {
        assert!(softmax_strategy(&[f64::NAN, 0.0], 1.0).is_err());
        assert!(softmax_strategy(&[0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn velocity_examples() {
        let space = StrategySpace::scalar(&[-1.0, 1.0]).unwrap();
        assert_eq!(strategy_velocity(&[0.3], &[1.0, 1.0], &space).unwrap(), vec![0.0]);
        let s = softmax_strategy(&[2.0, -2.0], 0.5).unwrap();
        let v = strategy_velocity(&[2.0], &s, &space).unwrap();
        assert_relative_eq!(v[0], -(4.0f64).tanh(), max_relative = 1e-14);
        let d = MixedStrategy::dirac(2, 1);
        assert_eq!(strategy_velocity(&[0.0], &d, &space).unwrap(), vec![1.0]);
        assert!(strategy_velocity(&[0.0, 1.0], &d, &space).is_err());
    }

    #[test]
    fn heading_velocity() {
        let space = StrategySpace::heading(&[-2.0, 2.0]).unwrap();
        let v = strategy_velocity(&[0.0, 0.0, std::f64::consts::FRAC_PI_2, 0.0], &[0.5, 1.5], &space).unwrap();
        assert!(v[0].abs() < 1e-15);
        assert_relative_eq!(v[1], 1.0);
        assert_relative_eq!(v[2], 1.0);
        assert_relative_eq!(space.e_max(), 5.0f64.sqrt());
    }

    #[test]
    fn replicator_examples() {
        assert_eq!(replicator_drift_undisclosed(&[0.5, 1.5], &[3.0, 3.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(replicator_drift_undisclosed(&[1.0, 1.0], &[1.0, -1.0]).unwrap(), vec![1.0, -1.0]);
    }

    #[test]
    fn full_drift_matches_nested_loops() {
        let sigma = [0.4, 1.1, 1.5];
        let other = [2.0, 0.25, 0.75];
        let j = [0.3, -1.0, 2.0, 0.7, 0.1, -0.4, 1.3, -2.2, 0.5];
        let got = replicator_drift_full(&sigma, &other, &j).unwrap();
        let k = 3.0;
        let mut avg = 0.0;
        for w in 0..3 {
            for l in 0..3 {
                avg += j[w * 3 + l] * other[l] * sigma[w] / (k * k);
            }
        }
        for u in 0..3 {
            let mut first = 0.0;
            for l in 0..3 {
                first += j[u * 3 + l] * other[l] / k;
            }
            assert_relative_eq!(got[u], (first - avg) * sigma[u], epsilon = 1e-13);
        }
    }

    #[test]
    fn full_drift_reduces_to_undisclosed() {
        let h = [0.2, -0.9, 1.4];
        let j: Vec<f64> = (0..9).map(|i| h[i / 3]).collect();
        let sigma = [0.4, 1.1, 1.5];
        let a = replicator_drift_full(&sigma, &[2.0, 0.5, 0.5], &j).unwrap();
        let b = replicator_drift_undisclosed(&sigma, &h).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x, y, epsilon = 1e-15);
        }
        let indep: Vec<f64> = (0..9).map(|i| [0.3, -0.2, 1.0][i % 3]).collect();
        for d in replicator_drift_full(&sigma, &[2.0, 0.5, 0.5], &indep).unwrap() {
            assert!(d.abs() < 1e-15);
        }
    }

    #[test]
    fn entropy_examples() {
        let d = entropy_drift(&[0.5, 1.5], 1.0).unwrap();
        assert!((d[0] - 0.411980).abs() < 1e-6);
        assert!((d[1] + 0.411980).abs() < 1e-6);
        assert!(mean(&d).abs() < 1e-15);
        assert_eq!(entropy_drift(&[1.0; 3], 2.0).unwrap(), vec![0.0; 3]);
        let d3 = entropy_drift(&[0.5, 1.5], 3.0).unwrap();
        assert_relative_eq!(d3[0], 3.0 * d[0], max_relative = 1e-15);
        assert!(entropy_drift(&[0.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.5, 1.5], &[0.5, 1.5]).unwrap(), 0.0);
        assert!((kl_divergence(&[0.5, 1.5], &[1.0, 1.0]).unwrap() - 0.130812).abs() < 1e-6);
        assert_eq!(kl_divergence(&[1.0, 1.0], &[2.0, 0.0]).unwrap(), f64::INFINITY);
        assert!(kl_divergence(&[0.0, 2.0], &[1.0, 1.0]).unwrap().is_finite());
    }

    #[test]
    fn hellinger_examples() {
        assert_eq!(hellinger_tangent_distance(&[1.0, 1.0], &[0.3, 0.1], &[0.3, 0.1]).unwrap(), 0.0);
        assert_relative_eq!(hellinger_tangent_distance(&[1.0, 1.0], &[1.0, -1.0], &[0.0, 0.0]).unwrap(), 0.5);
        let s = [0.4, 1.6];
        let a = hellinger_tangent_distance(&s, &[0.2, -0.3], &[1.0, 0.5]).unwrap();
        let b = hellinger_tangent_distance(&s, &[1.0, 0.5], &[0.2, -0.3]).unwrap();
        assert_eq!(a, b);
        assert!(hellinger_tangent_distance(&[0.0, 2.0], &[0.0; 2], &[0.0; 2]).is_err());
    }

    #[test]
    fn space_validation() {
        assert!(StrategySpace::scalar(&[1.0]).is_err());
        assert!(StrategySpace::scalar(&[1.0, 1.0]).is_err());
        let s = StrategySpace::product(&[vec![-1.0, 1.0], vec![-1.0, 1.0]]).unwrap();
        assert_eq!(s.k(), 4);
        assert_eq!(s.point(1), &[-1.0, 1.0]);
        assert_relative_eq!(s.e_max(), 2.0f64.sqrt());
        assert_relative_eq!(s.eta_weight() * s.k() as f64, 1.0);
        let json = serde_json::to_string(&s).unwrap();
        let back: StrategySpace = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn mixed_strategy_validation() {
        assert!(MixedStrategy::new(vec![0.5, 1.5]).is_ok());
        assert!(MixedStrategy::new(vec![0.5, 1.6]).is_err());
        assert!(MixedStrategy::new(vec![-0.5, 2.5]).is_err());
    }
}
