//! Browser bindings: three small interactive views over the core crate. Every
//! call returns a JSON document (or an error message) so the page stays plain
//! JavaScript.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use evogame::inference::reconstruct_strategy_from_velocity;
use evogame::metrics::norm_n;
use evogame::payoff::{make_builtin_payoff, BuiltinKind};
use evogame::sim::{run_simulation, Dynamics, InitialSampler, SimConfig};
use evogame::validation::origin_repulsion_1d;
use evogame::{StrategySpace, TrajectoryDataset};

fn text(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(text)
}

#[derive(Serialize)]
struct Paths {
    t: Vec<f64>,
    /// `x[i][j]`: position of agent `j` at time `t[i]`.
    x: Vec<Vec<f64>>,
}

fn paths(ds: &TrajectoryDataset) -> Paths {
    Paths {
        t: ds.snapshots.iter().map(|s| s.t).collect(),
        x: ds.snapshots.iter().map(|s| s.x.as_slice().to_vec()).collect(),
    }
}

#[derive(Serialize)]
struct FastReaction {
    #[serde(flatten)]
    paths: Paths,
    /// Mass each agent puts on moving right.
    right: Vec<Vec<f64>>,
}

/// Fast-reaction agents on a line with strategies `{−1, +1}` under the
/// origin-repulsion payoff.
#[wasm_bindgen]
pub fn fast_reaction(agents: usize, eps: f64, steps: usize, seed: u64) -> Result<String, String> {
    let cfg = SimConfig {
        dynamics: Dynamics::FastReaction { eps },
        agents,
        dt: 0.02,
        steps,
        subsample: 1,
        realizations: 1,
        seed,
        initial: InitialSampler::UniformBox {
            lo: vec![-1.0],
            hi: vec![1.0],
        },
    };
    let ds = run_simulation(&cfg, Some(&origin_repulsion_1d())).map_err(text)?;
    let right = ds
        .snapshots
        .iter()
        .map(|s| match &s.sigma {
            Some(sig) => sig.iter().map(|m| m[1] / 2.0).collect(),
            None => Vec::new(),
        })
        .collect();
    json(&FastReaction {
        paths: paths(&ds),
        right,
    })
}

#[derive(Serialize)]
struct NewtonVsGame {
    newton: Paths,
    game: Paths,
    /// `‖·‖_N` distance between the two at each time.
    gap: Vec<f64>,
}

/// Newtonian particles next to their fast-reaction embedding at entropy `eps`.
#[wasm_bindgen]
pub fn newton_vs_game(agents: usize, eps: f64, seed: u64) -> Result<String, String> {
    let embed = make_builtin_payoff(BuiltinKind::NewtonEmbed.name(), None).map_err(text)?;
    let cfg = |dynamics| SimConfig {
        dynamics,
        agents,
        dt: 0.02,
        steps: 101,
        subsample: 1,
        realizations: 1,
        seed,
        initial: InitialSampler::UniformBox {
            lo: vec![-1.0],
            hi: vec![1.0],
        },
    };
    let newton = run_simulation(&cfg(Dynamics::Newtonian), None).map_err(text)?;
    let game = run_simulation(&cfg(Dynamics::FastReaction { eps }), Some(&embed)).map_err(text)?;
    let gap = newton
        .snapshots
        .iter()
        .zip(&game.snapshots)
        .map(|(a, b)| norm_n(&a.x, &b.x))
        .collect::<Result<Vec<_>, _>>()
        .map_err(text)?;
    json(&NewtonVsGame {
        newton: paths(&newton),
        game: paths(&game),
        gap,
    })
}

#[derive(Serialize)]
struct Profile {
    u: Vec<f64>,
    sigma: Vec<f64>,
    v_tilde: f64,
    near_boundary: bool,
}

/// Entropic mixed strategy over `k` evenly spaced velocities in `[−1, 1]`
/// whose mean is `v`.
#[wasm_bindgen]
pub fn reconstruct(v: f64, eps: f64, k: usize) -> Result<String, String> {
    let space = StrategySpace::linspace(-1.0, 1.0, k).map_err(text)?;
    let rec = reconstruct_strategy_from_velocity(&[v], &space, eps).map_err(text)?;
    json(&Profile {
        u: space.points().iter().map(|p| p[0]).collect(),
        sigma: rec.sigma.iter().copied().collect(),
        v_tilde: rec.v_tilde[0],
        near_boundary: rec.near_boundary,
    })
}
