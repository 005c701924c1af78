//! Regular tensor grids carrying piecewise multilinear finite elements.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One grid axis.
///
/// A bounded axis has `nodes` points from `lo` to `hi` inclusive and is
/// extended by constants outside. A periodic axis identifies `lo` with `hi`:
/// its `nodes` points sit at `lo + i·(hi − lo)/nodes` and the last cell wraps
/// back to the first node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
    #[serde(default)]
    pub periodic: bool,
}

impl Axis {
    pub fn bounded(lo: f64, hi: f64, nodes: usize) -> Self {
        Axis {
            lo,
            hi,
            nodes,
            periodic: false,
        }
    }

    pub fn periodic(lo: f64, hi: f64, nodes: usize) -> Self {
        Axis {
            lo,
            hi,
            nodes,
            periodic: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::domain(format!("invalid axis bounds [{}, {}]", self.lo, self.hi)));
        }
        if self.nodes < 2 {
            return Err(Error::domain("an axis needs at least two nodes"));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        if self.periodic {
            (self.hi - self.lo) / self.nodes as f64
        } else {
            (self.hi - self.lo) / (self.nodes - 1) as f64
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + self.spacing() * i as f64
    }

    /// Lower node index, upper node index and the weight of the upper node.
    fn locate(&self, q: f64) -> (usize, usize, f64) {
        let h = self.spacing();
        if self.periodic {
            let n = self.nodes as f64;
            let s = ((q - self.lo) / h).rem_euclid(n);
            let i = (s.floor() as usize).min(self.nodes - 1);
            (i, (i + 1) % self.nodes, s - i as f64)
        } else {
            let s = ((q.clamp(self.lo, self.hi) - self.lo) / h).max(0.0);
            let i = (s.floor() as usize).min(self.nodes - 2);
            (i, i + 1, (s - i as f64).min(1.0))
        }
    }

    fn pairs(&self) -> usize {
        if self.periodic {
            self.nodes
        } else {
            self.nodes - 1
        }
    }
}

/// Coefficient tensor over a regular grid, one scalar per (node, slot). Slots
/// index pure strategies (or strategy pairs); the slot index runs fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
    slots: usize,
    values: Vec<f64>,
}

impl Grid {
    pub fn zeros(axes: Vec<Axis>, slots: usize) -> Result<Self> {
        for a in &axes {
            a.validate()?;
        }
        if axes.is_empty() || slots == 0 {
            return Err(Error::domain("a grid needs at least one axis and one slot"));
        }
        let n: usize = axes.iter().map(|a| a.nodes).product::<usize>() * slots;
        Ok(Grid {
            axes,
            slots,
            values: vec![0.0; n],
        })
    }

    pub fn with_values(axes: Vec<Axis>, slots: usize, values: Vec<f64>) -> Result<Self> {
        let mut g = Self::zeros(axes, slots)?;
        Error::check_dim(g.values.len(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite grid coefficient"));
        }
        g.values = values;
        Ok(g)
    }

    /// Grid whose coefficients sample `f(node, slot)`.
    pub fn from_fn(axes: Vec<Axis>, slots: usize, mut f: impl FnMut(&[f64], usize) -> f64) -> Result<Self> {
        let mut g = Self::zeros(axes, slots)?;
        let mut coord = vec![0.0; g.axes.len()];
        for node in 0..g.node_count() {
            g.node_coords_into(node, &mut coord);
            for s in 0..slots {
                g.values[node * slots + s] = f(&coord, s);
            }
        }
        Ok(g)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn node_count(&self) -> usize {
        self.values.len() / self.slots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Coordinates of a flat node index (last axis fastest).
    pub fn node_coords_into(&self, mut node: usize, out: &mut [f64]) {
        for (a, o) in self.axes.iter().zip(out.iter_mut()).rev() {
            *o = a.node(node % a.nodes);
            node /= a.nodes;
        }
    }

    pub fn node_coords(&self, node: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.node_coords_into(node, &mut out);
        out
    }

    /// Calls `f(node, weight)` for every cell corner with nonzero interpolation
    /// weight at `q`. The weights are nonnegative and sum to one.
    pub fn for_each_corner(&self, q: &[f64], mut f: impl FnMut(usize, f64)) {
        debug_assert_eq!(q.len(), self.axes.len());
        const MAX_DIM: usize = 8;
        assert!(self.axes.len() <= MAX_DIM, "grids are limited to {MAX_DIM} axes");
        let mut lo = [0usize; MAX_DIM];
        let mut hi = [0usize; MAX_DIM];
        let mut t = [0.0f64; MAX_DIM];
        for (d, (a, &x)) in self.axes.iter().zip(q).enumerate() {
            let (i, j, w) = a.locate(x);
            lo[d] = i;
            hi[d] = j;
            t[d] = w;
        }
        let dim = self.axes.len();
        'corner: for mask in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut node = 0usize;
            for d in 0..dim {
                let upper = mask >> (dim - 1 - d) & 1 == 1;
                let wd = if upper { t[d] } else { 1.0 - t[d] };
                if wd == 0.0 {
                    continue 'corner;
                }
                w *= wd;
                node = node * self.axes[d].nodes + if upper { hi[d] } else { lo[d] };
            }
            f(node, w);
        }
    }

    /// Multilinear interpolant of slot `s` at `q`.
    pub fn eval(&self, q: &[f64], s: usize) -> f64 {
        let mut acc = 0.0;
        self.for_each_corner(q, |node, w| acc += w * self.values[node * self.slots + s]);
        acc
    }

    /// Interpolates all slots at once into `out`.
    pub fn eval_slots(&self, q: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        self.for_each_corner(q, |node, w| {
            let base = node * self.slots;
            for (o, v) in out.iter_mut().zip(&self.values[base..base + self.slots]) {
                *o += w * v;
            }
        });
    }

    /// Squared discrete gradient norm of the stored coefficients with its
    /// gradient.
    pub fn gradient_penalty(&self) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.values.len()];
        let v = self.penalty_with(&self.values, &mut grad, 1.0);
        (v, grad)
    }

    /// Penalty `Σ (Δc / h_a)² · Π_b h_b` over axis-adjacent node pairs and slots,
    /// evaluated for an external coefficient vector laid out like this grid.
    /// Adds `scale` times its gradient to `grad` and returns the unscaled value.
    pub fn penalty_with(&self, coeffs: &[f64], grad: &mut [f64], scale: f64) -> f64 {
        debug_assert_eq!(coeffs.len(), self.values.len());
        let cell: f64 = self.axes.iter().map(Axis::spacing).product();
        let mut total = 0.0;
        let dims: Vec<usize> = self.axes.iter().map(|a| a.nodes).collect();
        // Stride of each axis in node units.
        let mut stride = vec![1usize; dims.len()];
        for d in (0..dims.len().saturating_sub(1)).rev() {
            stride[d] = stride[d + 1] * dims[d + 1];
        }
        let nodes = self.node_count();
        for (a, axis) in self.axes.iter().enumerate() {
            let h = axis.spacing();
            let wgt = cell / (h * h);
            for node in 0..nodes {
                let ia = node / stride[a] % dims[a];
                if ia + 1 == dims[a] && !axis.periodic {
                    continue;
                }
                let next = if ia + 1 == dims[a] {
                    node - ia * stride[a]
                } else {
                    node + stride[a]
                };
                for s in 0..self.slots {
                    let (p, q) = (node * self.slots + s, next * self.slots + s);
                    let diff = coeffs[q] - coeffs[p];
                    total += wgt * diff * diff;
                    let g = scale * 2.0 * wgt * diff;
                    grad[q] += g;
                    grad[p] -= g;
                }
            }
            debug_assert!(axis.pairs() > 0);
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reproduces_nodes_and_midpoints() {
        let g = Grid::with_values(vec![Axis::bounded(0.0, 1.0, 2)], 1, vec![0.0, 1.0]).unwrap();
        assert_eq!(g.eval(&[0.0], 0), 0.0);
        assert_eq!(g.eval(&[1.0], 0), 1.0);
        assert_eq!(g.eval(&[0.5], 0), 0.5);
        let mut w = Vec::new();
        g.for_each_corner(&[0.5], |n, x| w.push((n, x)));
        assert_eq!(w, vec![(0, 0.5), (1, 0.5)]);
        w.clear();
        g.for_each_corner(&[1.0], |n, x| w.push((n, x)));
        assert_eq!(w, vec![(1, 1.0)]);
    }

    #[test]
    fn clamps_outside() {
        let g = Grid::with_values(vec![Axis::bounded(-1.0, 1.0, 3)], 1, vec![2.0, 0.0, 5.0]).unwrap();
        assert_eq!(g.eval(&[-7.0], 0), 2.0);
        assert_eq!(g.eval(&[9.0], 0), 5.0);
    }

    #[test]
    fn periodic_wraps() {
        let a = Axis::periodic(-1.0, 1.0, 4);
        let g = Grid::with_values(vec![a], 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(g.eval(&[-1.0], 0), 0.0);
        // halfway between the last node (0.5) and the wrapped first node (1.0 ≡ −1.0)
        assert_relative_eq!(g.eval(&[0.75], 0), 1.5);
        assert_relative_eq!(g.eval(&[0.75 - 2.0], 0), 1.5);
    }

    #[test]
    fn bilinear_weights_sum_to_one() {
        let g = Grid::zeros(vec![Axis::bounded(0.0, 1.0, 4), Axis::periodic(0.0, 2.0, 5)], 2).unwrap();
        let mut s = 0.0;
        let mut count = 0;
        g.for_each_corner(&[0.37, 1.91], |_, w| {
            s += w;
            count += 1;
        });
        assert_relative_eq!(s, 1.0, epsilon = 1e-15);
        assert_eq!(count, 4);
    }

    #[test]
    fn node_coordinates_follow_layout() {
        let g = Grid::from_fn(vec![Axis::bounded(0.0, 1.0, 2), Axis::bounded(0.0, 2.0, 3)], 2, |x, s| {
            x[0] * 10.0 + x[1] + 100.0 * s as f64
        })
        .unwrap();
        assert_eq!(g.node_coords(4), vec![1.0, 1.0]);
        assert_eq!(g.values()[4 * 2 + 1], 111.0);
        assert_relative_eq!(g.eval(&[0.25, 0.5], 1), 103.0, epsilon = 1e-12);
    }

    #[test]
    fn penalty_examples() {
        let g = Grid::with_values(vec![Axis::bounded(0.0, 1.0, 2)], 1, vec![0.0, 1.0]).unwrap();
        let (v, grad) = g.gradient_penalty();
        assert_eq!(v, 1.0);
        assert_eq!(grad, vec![-2.0, 2.0]);
        let c = Grid::with_values(vec![Axis::bounded(0.0, 1.0, 3)], 2, vec![4.0; 6]).unwrap();
        assert_eq!(c.gradient_penalty().0, 0.0);
    }

    #[test]
    fn penalty_gradient_matches_differences() {
        let axes = vec![Axis::bounded(-1.0, 2.0, 4), Axis::periodic(0.0, 1.0, 3)];
        let vals: Vec<f64> = (0..24).map(|i| ((i * 7919) % 23) as f64 / 7.0 - 1.0).collect();
        let g = Grid::with_values(axes, 2, vals.clone()).unwrap();
        let (_, grad) = g.gradient_penalty();
        let mut scratch = vec![0.0; vals.len()];
        for i in 0..vals.len() {
            let h = 1e-5;
            let mut p = vals.clone();
            p[i] += h;
            let fp = g.penalty_with(&p, &mut scratch, 0.0);
            p[i] -= 2.0 * h;
            let fm = g.penalty_with(&p, &mut scratch, 0.0);
            let fd = (fp - fm) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-6 * grad[i].abs().max(1.0), "{i}: {fd} vs {}", grad[i]);
        }
    }
}
