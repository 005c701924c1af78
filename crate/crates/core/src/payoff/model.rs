use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::grid::{Axis, Grid};
use super::Payoff;
use crate::error::{Error, Result};
use crate::sim::wrap_angle;
use crate::strategy::{StrategySpace, VelocityMap};

/// Structural ansatz of a discretized payoff.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `J(x, u, x') = J₁(x, u) + J₂(x' − x, u)`.
    Split,
    /// `J(x, u, x', u')` on a grid over `(x, x')` with one slot per strategy pair.
    FullPair,
    /// `J = J₁(wrap(θ − θ̄), u) + J₂(R_{−θ}(x' − x), wrap(θ' − θ), u)`, with `J₂`
    /// vanishing outside its spatial box.
    Pedestrian,
}

/// A payoff represented by finite-element coefficient grids.
///
/// The flat coefficient vector is the concatenation of the grids' values.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoffModel {
    variant: Variant,
    strategies: StrategySpace,
    grids: Vec<Grid>,
    offsets: Vec<usize>,
}

impl PayoffModel {
    fn assemble(variant: Variant, strategies: StrategySpace, grids: Vec<Grid>) -> Result<Self> {
        let k = strategies.k();
        let d = strategies.state_dim();
        let slots = match variant {
            Variant::FullPair => k * k,
            _ => k,
        };
        for g in &grids {
            if g.slots() != slots {
                return Err(Error::config(format!("grid has {} slots, expected {slots}", g.slots())));
            }
        }
        let dims_ok = match variant {
            Variant::Split => {
                strategies.velocity_map() == VelocityMap::Identity
                    && grids.len() == 2
                    && grids[0].dim() == d
                    && grids[1].dim() == d
            }
            Variant::FullPair => {
                strategies.velocity_map() == VelocityMap::Identity && grids.len() == 1 && grids[0].dim() == 2 * d
            }
            Variant::Pedestrian => {
                strategies.velocity_map() == VelocityMap::Heading
                    && grids.len() == 2
                    && grids[0].dim() == 1
                    && grids[1].dim() == 3
                    && grids[0].axes()[0].periodic
                    && grids[1].axes()[2].periodic
            }
        };
        if !dims_ok {
            return Err(Error::config(format!(
                "grid shapes do not match the {variant:?} ansatz for {d}-dimensional states"
            )));
        }
        let mut offsets = Vec::with_capacity(grids.len());
        let mut acc = 0;
        for g in &grids {
            offsets.push(acc);
            acc += g.len();
        }
        Ok(PayoffModel {
            variant,
            strategies,
            grids,
            offsets,
        })
    }

    /// Zero payoff with `J₁` on `self_axes` and `J₂` on `interaction_axes`.
    pub fn split(strategies: StrategySpace, self_axes: Vec<Axis>, interaction_axes: Vec<Axis>) -> Result<Self> {
        let k = strategies.k();
        let grids = vec![Grid::zeros(self_axes, k)?, Grid::zeros(interaction_axes, k)?];
        Self::assemble(Variant::Split, strategies, grids)
    }

    /// Zero payoff on a grid over `(x, x')`.
    pub fn full_pair(strategies: StrategySpace, axes: Vec<Axis>) -> Result<Self> {
        let k = strategies.k();
        let grids = vec![Grid::zeros(axes, k * k)?];
        Self::assemble(Variant::FullPair, strategies, grids)
    }

    /// Zero pedestrian payoff: `J₁` with `self_nodes` periodic nodes over
    /// `[−π, π]`, `J₂` on `box_lo..box_hi` in the rotated relative position
    /// times a periodic relative-heading axis.
    pub fn pedestrian(
        strategies: StrategySpace,
        self_nodes: usize,
        box_lo: [f64; 2],
        box_hi: [f64; 2],
        interaction_nodes: [usize; 3],
    ) -> Result<Self> {
        let k = strategies.k();
        let grids = vec![
            Grid::zeros(vec![Axis::periodic(-PI, PI, self_nodes)], k)?,
            Grid::zeros(
                vec![
                    Axis::bounded(box_lo[0], box_hi[0], interaction_nodes[0]),
                    Axis::bounded(box_lo[1], box_hi[1], interaction_nodes[1]),
                    Axis::periodic(-PI, PI, interaction_nodes[2]),
                ],
                k,
            )?,
        ];
        Self::assemble(Variant::Pedestrian, strategies, grids)
    }

    /// Pedestrian payoff with the default resolution and vision box.
    pub fn pedestrian_default(strategies: StrategySpace) -> Result<Self> {
        Self::pedestrian(strategies, 30, [-0.15, -0.6], [1.5, 0.6], [20, 20, 20])
    }

    pub fn from_grids(variant: Variant, strategies: StrategySpace, grids: Vec<Grid>) -> Result<Self> {
        Self::assemble(variant, strategies, grids)
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn grids(&self) -> &[Grid] {
        &self.grids
    }

    pub fn grid_offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn n_coefficients(&self) -> usize {
        self.grids.iter().map(Grid::len).sum()
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.grids.iter().flat_map(|g| g.values().iter().copied()).collect()
    }

    pub fn set_coefficients(&mut self, c: &[f64]) -> Result<()> {
        Error::check_dim(self.n_coefficients(), c.len())?;
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite coefficient"));
        }
        for (g, &off) in self.grids.iter_mut().zip(&self.offsets) {
            let n = g.len();
            g.values_mut().copy_from_slice(&c[off..off + n]);
        }
        Ok(())
    }

    pub fn with_coefficients(&self, c: &[f64]) -> Result<Self> {
        let mut m = self.clone();
        m.set_coefficients(c)?;
        Ok(m)
    }

    /// Sets every coefficient from `f(grid index, node coordinates, slot)`.
    pub fn fill(&mut self, mut f: impl FnMut(usize, &[f64], usize) -> f64) {
        for (gi, g) in self.grids.iter_mut().enumerate() {
            let slots = g.slots();
            let mut coord = vec![0.0; g.dim()];
            for node in 0..g.node_count() {
                g.node_coords_into(node, &mut coord);
                for s in 0..slots {
                    let v = f(gi, &coord, s);
                    g.values_mut()[node * slots + s] = v;
                }
            }
        }
    }

    /// Calls `f(grid, node, weight)` for every interpolation corner touched by
    /// the pair `(x, y)`. The slot is determined by the queried strategies.
    pub fn for_each_node(&self, x: &[f64], y: &[f64], mut f: impl FnMut(usize, usize, f64)) {
        match self.variant {
            Variant::Split => {
                self.grids[0].for_each_corner(x, |n, w| f(0, n, w));
                let mut dx = [0.0; 8];
                for (o, (a, b)) in dx.iter_mut().zip(y.iter().zip(x)) {
                    *o = a - b;
                }
                self.grids[1].for_each_corner(&dx[..x.len()], |n, w| f(1, n, w));
            }
            Variant::FullPair => {
                let mut q = [0.0; 8];
                q[..x.len()].copy_from_slice(x);
                q[x.len()..2 * x.len()].copy_from_slice(y);
                self.grids[0].for_each_corner(&q[..2 * x.len()], |n, w| f(0, n, w));
            }
            Variant::Pedestrian => {
                self.grids[0].for_each_corner(&[wrap_angle(x[2] - x[3])], |n, w| f(0, n, w));
                if let Some(q) = self.pedestrian_relative(x, y) {
                    self.grids[1].for_each_corner(&q, |n, w| f(1, n, w));
                }
            }
        }
    }

    /// Rotated relative position and relative heading, or `None` when the other
    /// agent lies outside the vision box.
    fn pedestrian_relative(&self, x: &[f64], y: &[f64]) -> Option<[f64; 3]> {
        let (s, c) = x[2].sin_cos();
        let (dx, dy) = (y[0] - x[0], y[1] - x[1]);
        let r = [c * dx + s * dy, -s * dx + c * dy];
        let axes = self.grids[1].axes();
        if (0..2).all(|i| axes[i].lo <= r[i] && r[i] <= axes[i].hi) {
            Some([r[0], r[1], wrap_angle(y[2] - x[2])])
        } else {
            None
        }
    }

    fn slot(&self, k: usize, l: usize) -> usize {
        match self.variant {
            Variant::FullPair => k * self.strategies.k() + l,
            _ => k,
        }
    }

    /// Sparse weights `(coefficient index, weight)` with
    /// `J(x, u_k, y, u_l) = Σ weight · coefficient`.
    pub fn coefficient_weights(&self, x: &[f64], k: usize, y: &[f64], l: usize) -> Vec<(usize, f64)> {
        let s = self.slot(k, l);
        let mut out = Vec::new();
        self.for_each_node(x, y, |g, n, w| {
            out.push((self.offsets[g] + n * self.grids[g].slots() + s, w));
        });
        out
    }

    /// Sum of gradient penalties weighted per grid, evaluated at `coeffs`.
    /// Adds the weighted gradient to `grad`.
    pub fn penalty(&self, coeffs: &[f64], weights: &[f64], grad: &mut [f64]) -> f64 {
        let mut total = 0.0;
        for ((g, &off), &lam) in self.grids.iter().zip(&self.offsets).zip(weights) {
            if lam == 0.0 {
                continue;
            }
            let n = g.len();
            total += lam * g.penalty_with(&coeffs[off..off + n], &mut grad[off..off + n], lam);
        }
        total
    }

    /// Removes the gauge freedom of a full-pair payoff: at every node the
    /// values `J(x, u_k, x', u_l)` are shifted by a `u`-independent amount so
    /// that `J(x, u_{l+1}, x', u_l) = 0` (indices cyclic). For two strategies
    /// this yields `J(x, +1, x', −1) = J(x, −1, x', +1) = 0`.
    pub fn gauge_fix(&mut self) {
        if self.variant != Variant::FullPair {
            return;
        }
        let k = self.strategies.k();
        let g = &mut self.grids[0];
        let slots = g.slots();
        for node in g.values_mut().chunks_exact_mut(slots) {
            for l in 0..k {
                let shift = node[((l + 1) % k) * k + l];
                for kk in 0..k {
                    node[kk * k + l] -= shift;
                }
            }
        }
    }

    /// Default split grids covering positions in `x_box` and relative
    /// positions in `dx_box`: 1-D uses 30 and 59 nodes, 2-D uses 30×30 and
    /// 42×42.
    pub fn split_default(strategies: StrategySpace, x_box: &[(f64, f64)], dx_box: &[(f64, f64)]) -> Result<Self> {
        let d = strategies.state_dim();
        Error::check_dim(d, x_box.len())?;
        Error::check_dim(d, dx_box.len())?;
        let (n1, n2) = if d == 1 { (30, 59) } else { (30, 42) };
        let axes = |b: &[(f64, f64)], n| b.iter().map(|&(lo, hi)| Axis::bounded(lo, hi, n)).collect();
        Self::split(strategies, axes(x_box, n1), axes(dx_box, n2))
    }
}

impl Payoff for PayoffModel {
    fn strategies(&self) -> &StrategySpace {
        &self.strategies
    }

    fn eval(&self, x: &[f64], k: usize, y: &[f64], l: usize) -> f64 {
        let s = self.slot(k, l);
        let mut acc = 0.0;
        self.for_each_node(x, y, |g, n, w| {
            let grid = &self.grids[g];
            acc += w * grid.values()[n * grid.slots() + s];
        });
        acc
    }

    fn eval_row(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        debug_assert_ne!(self.variant, Variant::FullPair);
        out.fill(0.0);
        self.for_each_node(x, y, |g, n, w| {
            let grid = &self.grids[g];
            let slots = grid.slots();
            for (o, v) in out.iter_mut().zip(&grid.values()[n * slots..(n + 1) * slots]) {
                *o += w * v;
            }
        });
    }

    fn eval_table(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        if self.variant != Variant::FullPair {
            let k = self.strategies.k();
            let mut row = vec![0.0; k];
            self.eval_row(x, y, &mut row);
            for (kk, chunk) in out.chunks_exact_mut(k).enumerate() {
                chunk.fill(row[kk]);
            }
            return;
        }
        out.fill(0.0);
        self.for_each_node(x, y, |g, n, w| {
            let grid = &self.grids[g];
            let slots = grid.slots();
            for (o, v) in out.iter_mut().zip(&grid.values()[n * slots..(n + 1) * slots]) {
                *o += w * v;
            }
        });
    }

    fn depends_on_other_strategy(&self) -> bool {
        self.variant == Variant::FullPair
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model_1d() -> PayoffModel {
        let s = StrategySpace::scalar(&[-1.0, 1.0]).unwrap();
        PayoffModel::split(s, vec![Axis::bounded(-1.0, 1.0, 5)], vec![Axis::bounded(-2.0, 2.0, 9)]).unwrap()
    }

    fn pseudo_random(n: usize, seed: u64) -> Vec<f64> {
        let mut state = seed;
        (0..n)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn zero_and_nodal_values() {
        let mut m = model_1d();
        assert_eq!(m.eval(&[0.3], 1, &[-0.8], 0), 0.0);
        assert_eq!(m.n_coefficients(), 28);
        let c: Vec<f64> = (0..28).map(|i| i as f64).collect();
        m.set_coefficients(&c).unwrap();
        // x = −0.5 is node 1 of J₁; Δx = 0.5 is node 5 of J₂.
        assert_eq!(m.eval(&[-0.5], 1, &[0.0], 0), 3.0 + (10.0 + 11.0));
    }

    #[test]
    fn weights_reproduce_eval() {
        let mut m = model_1d();
        let c = pseudo_random(m.n_coefficients(), 3);
        m.set_coefficients(&c).unwrap();
        for (i, q) in pseudo_random(40, 9).chunks(2).enumerate() {
            let (x, y) = ([q[0] * 1.3], [q[1] * 1.3]);
            let k = i % 2;
            let w = m.coefficient_weights(&x, k, &y, 0);
            let dot: f64 = w.iter().map(|&(idx, wt)| wt * c[idx]).sum();
            assert!((dot - m.eval(&x, k, &y, 0)).abs() < 1e-14);
            assert!(w.iter().all(|&(_, wt)| wt >= 0.0));
            let total: f64 = w.iter().map(|p| p.1).sum();
            assert_relative_eq!(total, 2.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn pedestrian_vision_box_and_rotation() {
        let s = StrategySpace::heading(&[-2.0, 2.0]).unwrap();
        let mut m = PayoffModel::pedestrian_default(s).unwrap();
        let mut c = pseudo_random(m.n_coefficients(), 5);
        // zero out J₁ so only the interaction term remains
        let n1 = m.grids()[0].len();
        c[..n1].fill(0.0);
        m.set_coefficients(&c).unwrap();
        let me = [0.0, 0.0, 0.0, 0.0];
        let behind = [-0.5, 0.0, 0.3, 0.0];
        assert_eq!(m.eval(&me, 0, &behind, 0), 0.0);
        let ahead = [0.8, 0.2, 2.0, 1.0];
        let v = m.eval(&me, 1, &ahead, 0);
        assert!(v != 0.0);
        let a: f64 = 1.1;
        let rot = |p: &[f64; 4]| {
            let (s, c) = a.sin_cos();
            [c * p[0] - s * p[1], s * p[0] + c * p[1], wrap_angle(p[2] + a), wrap_angle(p[3] + a)]
        };
        assert_relative_eq!(m.eval(&rot(&me), 1, &rot(&ahead), 0), v, epsilon = 1e-12);
    }

    #[test]
    fn full_pair_gauge() {
        let s = StrategySpace::scalar(&[-1.0, 1.0]).unwrap();
        let mut m = PayoffModel::full_pair(s, vec![Axis::bounded(-1.0, 1.0, 3), Axis::bounded(-1.0, 1.0, 3)]).unwrap();
        let c = pseudo_random(m.n_coefficients(), 11);
        m.set_coefficients(&c).unwrap();
        m.gauge_fix();
        for q in pseudo_random(20, 4).chunks(2) {
            assert!(m.eval(&[q[0]], 1, &[q[1]], 0).abs() < 1e-15);
            assert!(m.eval(&[q[0]], 0, &[q[1]], 1).abs() < 1e-15);
        }
    }

    #[test]
    fn penalty_respects_weights() {
        let mut m = model_1d();
        let c = pseudo_random(m.n_coefficients(), 1);
        m.set_coefficients(&c).unwrap();
        let mut g = vec![0.0; c.len()];
        let both = m.penalty(&c, &[1.0, 1.0], &mut g);
        let p0 = m.grids()[0].gradient_penalty().0;
        let p1 = m.grids()[1].gradient_penalty().0;
        assert_relative_eq!(both, p0 + p1, max_relative = 1e-14);
        let mut g2 = vec![0.0; c.len()];
        assert_relative_eq!(m.penalty(&c, &[2.0, 0.0], &mut g2), 2.0 * p0, max_relative = 1e-14);
        assert!(g2[m.grid_offsets()[1]..].iter().all(|&v| v == 0.0));
    }
}
