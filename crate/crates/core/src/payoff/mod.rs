//! Payoff functions: finite-element grid models and closed-form references.

mod builtin;
mod grid;
mod io;
mod model;

pub use builtin::{make_builtin_payoff, newton_force, BuiltinKind, BuiltinPayoff};
pub use grid::{Axis, Grid};
pub use io::PayoffDocument;
pub use model::{PayoffModel, Variant};

use crate::strategy::StrategySpace;

/// A payoff `J(x, u_k, y, u_l)` over a finite strategy space.
pub trait Payoff: Sync {
    fn strategies(&self) -> &StrategySpace;

    /// `J(x, u_k, y, u_l)`. Payoffs that ignore the other agent's strategy
    /// ignore `l`.
    fn eval(&self, x: &[f64], k: usize, y: &[f64], l: usize) -> f64;

    /// `out[k] = J(x, u_k, y, ·)` for payoffs independent of the other
    /// strategy.
    fn eval_row(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.eval(x, k, y, 0);
        }
    }

    /// `out[k·K + l] = J(x, u_k, y, u_l)`.
    fn eval_table(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let kk = self.strategies().k();
        for k in 0..kk {
            for l in 0..kk {
                out[k * kk + l] = self.eval(x, k, y, l);
            }
        }
    }

    fn depends_on_other_strategy(&self) -> bool {
        false
    }
}

impl<P: Payoff + ?Sized> Payoff for &P {
    fn strategies(&self) -> &StrategySpace {
        (**self).strategies()
    }
    fn eval(&self, x: &[f64], k: usize, y: &[f64], l: usize) -> f64 {
        (**self).eval(x, k, y, l)
    }
    fn eval_row(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        (**self).eval_row(x, y, out)
    }
    fn eval_table(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        (**self).eval_table(x, y, out)
    }
    fn depends_on_other_strategy(&self) -> bool {
        (**self).depends_on_other_strategy()
    }
}
