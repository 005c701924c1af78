use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::model::{PayoffModel, Variant};
use super::Payoff;
use crate::error::{Error, Result};
use crate::strategy::StrategySpace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinKind {
    /// `J = −u·x − u·tanh(5Δx)·max(1 − |Δx|², 0)²` on `U = {−1, 1}`.
    OriginRepulsion1d,
    /// The same payoff in the plane, `tanh` componentwise, on `U = {±1}²`.
    OriginRepulsion2d,
    /// `J = −‖u − f(x, x')‖²` for the reference force [`newton_force`].
    NewtonEmbed,
    /// `J = (C − ‖x − x'‖)·g(u − (x' − x)/‖x' − x‖) − C·g(u)` with a hat bump `g`.
    NearestNeighbour,
    /// `J = −½(u + u')((u + 1)x⁵ + (u − 1)(x + x')³)` on `U = {−1, 1}`.
    FullPairDemo,
}

impl BuiltinKind {
    pub const ALL: [BuiltinKind; 5] = [
        BuiltinKind::OriginRepulsion1d,
        BuiltinKind::OriginRepulsion2d,
        BuiltinKind::NewtonEmbed,
        BuiltinKind::NearestNeighbour,
        BuiltinKind::FullPairDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinKind::OriginRepulsion1d => "origin_repulsion_1d",
            BuiltinKind::OriginRepulsion2d => "origin_repulsion_2d",
            BuiltinKind::NewtonEmbed => "newton_embed",
            BuiltinKind::NearestNeighbour => "nearest_neighbour",
            BuiltinKind::FullPairDemo => "full_pair_demo",
        }
    }

    /// Strategy set used when none is given.
    pub fn default_strategies(self) -> StrategySpace {
        let s = match self {
            BuiltinKind::OriginRepulsion1d | BuiltinKind::FullPairDemo => StrategySpace::scalar(&[-1.0, 1.0]),
            BuiltinKind::OriginRepulsion2d => StrategySpace::new(
                vec![vec![1.0, 1.0], vec![-1.0, 1.0], vec![-1.0, -1.0], vec![1.0, -1.0]],
                crate::VelocityMap::Identity,
            ),
            BuiltinKind::NewtonEmbed => StrategySpace::linspace(-1.5, 1.5, 121),
            BuiltinKind::NearestNeighbour => StrategySpace::linspace(-1.5, 1.5, 61),
        };
        s.expect("built-in strategy sets are valid")
    }
}

impl FromStr for BuiltinKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BuiltinKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = BuiltinKind::ALL.iter().map(|k| k.name()).collect();
                Error::config(format!("unknown built-in payoff `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

/// A closed-form payoff together with its strategy set.
#[derive(Clone, Debug, PartialEq)]
pub struct BuiltinPayoff {
    kind: BuiltinKind,
    strategies: StrategySpace,
}

const NN_C: f64 = 3.0;
const NN_DELTA: f64 = 0.25;

/// Looks up a built-in payoff by name; `strategies` overrides the default set.
pub fn make_builtin_payoff(name: &str, strategies: Option<StrategySpace>) -> Result<BuiltinPayoff> {
    let kind: BuiltinKind = name.parse()?;
    BuiltinPayoff::new(kind, strategies.unwrap_or_else(|| kind.default_strategies()))
}

/// Reference Newtonian force `f(x, x') = −x − tanh(5(x' − x)) / (1 + ‖x' − x‖)²`
/// with `tanh` taken componentwise.
pub fn newton_force(x: &[f64], y: &[f64], out: &mut [f64]) {
    let r: f64 = x.iter().zip(y).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
    let den = (1.0 + r) * (1.0 + r);
    for ((o, &a), &b) in out.iter_mut().zip(x).zip(y) {
        *o = -a - (5.0 * (b - a)).tanh() / den;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn bump(u: &[f64]) -> f64 {
    let r = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    (1.0 - r / NN_DELTA).max(0.0)
}

impl BuiltinPayoff {
    pub fn new(kind: BuiltinKind, strategies: StrategySpace) -> Result<Self> {
        let d = strategies.state_dim();
        let ok = match kind {
            BuiltinKind::OriginRepulsion1d | BuiltinKind::FullPairDemo => d == 1,
            BuiltinKind::OriginRepulsion2d => d == 2,
            BuiltinKind::NewtonEmbed | BuiltinKind::NearestNeighbour => true,
        } && strategies.velocity_map() == crate::VelocityMap::Identity;
        if !ok {
            return Err(Error::config(format!(
                "{} does not accept {d}-dimensional strategies",
                kind.name()
            )));
        }
        Ok(BuiltinPayoff { kind, strategies })
    }

    pub fn kind(&self) -> BuiltinKind {
        self.kind
    }

    /// Self-drive term `J₁(x, u_k)` for payoffs of split form.
    pub fn self_term(&self, x: &[f64], k: usize) -> Option<f64> {
        match self.kind {
            BuiltinKind::OriginRepulsion1d | BuiltinKind::OriginRepulsion2d => {
                Some(-dot(self.strategies.point(k), x))
            }
            _ => None,
        }
    }

    /// Interaction term `J₂(Δx, u_k)` for payoffs of split form.
    pub fn pair_term(&self, dx: &[f64], k: usize) -> Option<f64> {
        match self.kind {
            BuiltinKind::OriginRepulsion1d | BuiltinKind::OriginRepulsion2d => {
                let r2: f64 = dx.iter().map(|v| v * v).sum();
                let cut = (1.0 - r2).max(0.0).powi(2);
                let u = self.strategies.point(k);
                Some(-u.iter().zip(dx).map(|(a, b)| a * (5.0 * b).tanh()).sum::<f64>() * cut)
            }
            _ => None,
        }
    }

    /// Interpolates this payoff onto the grids of `model` by nodal sampling.
    pub fn project_onto(&self, model: &mut PayoffModel) -> Result<()> {
        if model.strategies() != &self.strategies {
            return Err(Error::config("payoff and model use different strategy sets"));
        }
        match (model.variant(), self.kind) {
            (Variant::Split, BuiltinKind::OriginRepulsion1d | BuiltinKind::OriginRepulsion2d) => {
                model.fill(|g, node, s| {
                    if g == 0 {
                        self.self_term(node, s).unwrap_or(0.0)
                    } else {
                        self.pair_term(node, s).unwrap_or(0.0)
                    }
                });
                Ok(())
            }
            (Variant::FullPair, _) => {
                let k = self.strategies.k();
                let d = self.strategies.state_dim();
                model.fill(|_, node, s| self.eval(&node[..d], s / k, &node[d..], s % k));
                Ok(())
            }
            _ => Err(Error::config(format!(
                "{} cannot be represented by a {:?} grid",
                self.kind.name(),
                model.variant()
            ))),
        }
    }
}

impl Payoff for BuiltinPayoff {
    fn strategies(&self) -> &StrategySpace {
        &self.strategies
    }

    fn eval(&self, x: &[f64], k: usize, y: &[f64], l: usize) -> f64 {
        let u = self.strategies.point(k);
        match self.kind {
            BuiltinKind::OriginRepulsion1d | BuiltinKind::OriginRepulsion2d => {
                let mut dx = [0.0; 8];
                for (o, (a, b)) in dx.iter_mut().zip(y.iter().zip(x)) {
                    *o = a - b;
                }
                self.self_term(x, k).unwrap_or(0.0) + self.pair_term(&dx[..x.len()], k).unwrap_or(0.0)
            }
            BuiltinKind::NewtonEmbed => {
                let mut f = [0.0; 8];
                newton_force(x, y, &mut f[..x.len()]);
                -u.iter().zip(&f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            }
            BuiltinKind::NearestNeighbour => {
                let r: f64 = x.iter().zip(y).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
                let attract = if r > 0.0 {
                    let mut w = [0.0; 8];
                    for (i, o) in w[..u.len()].iter_mut().enumerate() {
                        *o = u[i] - (y[i] - x[i]) / r;
                    }
                    (NN_C - r) * bump(&w[..u.len()])
                } else {
                    0.0
                };
                attract - NN_C * bump(u)
            }
            BuiltinKind::FullPairDemo => {
                let (uk, ul) = (u[0], self.strategies.point(l)[0]);
                let (a, b) = (x[0], y[0]);
                -0.5 * (uk + ul) * ((uk + 1.0) * a.powi(5) + (uk - 1.0) * (a + b).powi(3))
            }
        }
    }

    fn eval_row(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let d = x.len();
        let pts = self.strategies.points();
        match self.kind {
            BuiltinKind::OriginRepulsion1d | BuiltinKind::OriginRepulsion2d => {
                // J = −u·(x + c) with c = tanh(5Δx)·max(1 − |Δx|², 0)².
                let mut c = [0.0; 8];
                let r2: f64 = x.iter().zip(y).map(|(a, b)| (b - a) * (b - a)).sum();
                let cut = (1.0 - r2).max(0.0).powi(2);
                for i in 0..d {
                    let t = if cut > 0.0 { (5.0 * (y[i] - x[i])).tanh() * cut } else { 0.0 };
                    c[i] = x[i] + t;
                }
                for (o, u) in out.iter_mut().zip(pts) {
                    *o = -dot(u, &c[..d]);
                }
            }
            BuiltinKind::NewtonEmbed => {
                let mut f = [0.0; 8];
                newton_force(x, y, &mut f[..d]);
                for (o, u) in out.iter_mut().zip(pts) {
                    *o = -u.iter().zip(&f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                }
            }
            _ => {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = self.eval(x, k, y, 0);
                }
            }
        }
    }

    fn depends_on_other_strategy(&self) -> bool {
        self.kind == BuiltinKind::FullPairDemo
    }
}
