//! Sparse linear map from payoff coefficients to the averaged payoffs seen by
//! each observed agent.

use crate::cloud::Cloud;
use crate::error::{Error, Result};
use crate::payoff::{Payoff, PayoffModel, Variant};
use crate::strategy::MixedStrategy;

/// Row-compressed operator: group `r` has averaged payoff
/// `g_k = Σ_e w_e · c[idx_e + k · stride]`.
#[derive(Clone, Debug)]
pub(crate) struct Operator {
    k: usize,
    stride: usize,
    starts: Vec<usize>,
    idx: Vec<usize>,
    w: Vec<f64>,
}

impl Operator {
    pub fn new(model: &PayoffModel) -> Self {
        let k = model.strategies().k();
        let stride = match model.variant() {
            Variant::FullPair => k,
            _ => 1,
        };
        Operator {
            k,
            stride,
            starts: vec![0],
            idx: Vec::new(),
            w: Vec::new(),
        }
    }

    pub fn groups(&self) -> usize {
        self.starts.len() - 1
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Appends the group of agent `i` in the configuration `states`. For a
    /// full-pair model the other agents' strategies are required.
    pub fn push_agent(
        &mut self,
        model: &PayoffModel,
        states: &Cloud,
        sigma: Option<&[MixedStrategy]>,
        i: usize,
    ) -> Result<()> {
        let n = states.len() as f64;
        let k = self.k;
        let offsets = model.grid_offsets();
        let grids = model.grids();
        let mut entries: Vec<(usize, f64)> = Vec::new();
        let xi = states.row(i);
        match model.variant() {
            Variant::FullPair => {
                let sigma = sigma.ok_or_else(|| {
                    Error::config("a full-pair payoff needs observed strategies of the other agents")
                })?;
                Error::check_dim(states.len(), sigma.len())?;
                for (xj, sj) in states.rows().zip(sigma) {
                    model.for_each_node(xi, xj, |g, node, w| {
                        let base = offsets[g] + node * grids[g].slots();
                        for (l, &s) in sj.iter().enumerate() {
                            entries.push((base + l, w * s / (k as f64 * n)));
                        }
                    });
                }
            }
            _ => {
                for xj in states.rows() {
                    model.for_each_node(xi, xj, |g, node, w| {
                        entries.push((offsets[g] + node * grids[g].slots(), w / n));
                    });
                }
            }
        }
        entries.sort_unstable_by_key(|e| e.0);
        let mut last = usize::MAX;
        for (ix, w) in entries {
            if w == 0.0 {
                continue;
            }
            if ix == last {
                *self.w.last_mut().unwrap() += w;
            } else {
                self.idx.push(ix);
                self.w.push(w);
                last = ix;
            }
        }
        self.starts.push(self.idx.len());
        Ok(())
    }

    pub fn apply(&self, r: usize, c: &[f64], g: &mut [f64]) {
        g.fill(0.0);
        for e in self.starts[r]..self.starts[r + 1] {
            let (ix, w) = (self.idx[e], self.w[e]);
            for (k, gk) in g.iter_mut().enumerate() {
                *gk += w * c[ix + k * self.stride];
            }
        }
    }

    /// Adds `scale · Aᵀ dg` for group `r` to `grad`.
    pub fn scatter(&self, r: usize, dg: &[f64], scale: f64, grad: &mut [f64]) {
        for e in self.starts[r]..self.starts[r + 1] {
            let (ix, w) = (self.idx[e], self.w[e] * scale);
            for (k, d) in dg.iter().enumerate() {
                grad[ix + k * self.stride] += w * d;
            }
        }
    }
}
