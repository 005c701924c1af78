use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pedestrian::{pedestrian_velocities, PedestrianParams};
use super::{advance_positions, advance_strategies, fast_reaction_state, game_rates, newtonian_velocities, wrap_angle, Ensemble};
use crate::cloud::Cloud;
use crate::dataset::{DatasetMeta, Snapshot, TrajectoryDataset};
use crate::error::{Error, Result};
use crate::par;
use crate::payoff::{newton_force, Payoff};
use crate::strategy::{MixedStrategy, VelocityMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    FullEntropic,
    Undisclosed,
    FastReaction,
    Newtonian,
    Pedestrian,
}

/// Forward model and its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Dynamics {
    FullEntropic { lambda: f64, eps: f64 },
    Undisclosed { lambda: f64, eps: f64 },
    FastReaction { eps: f64 },
    /// Driven by the reference force [`newton_force`].
    Newtonian,
    Pedestrian(PedestrianParams),
}

impl Dynamics {
    pub fn kind(&self) -> ModelKind {
        match self {
            Dynamics::FullEntropic { .. } => ModelKind::FullEntropic,
            Dynamics::Undisclosed { .. } => ModelKind::Undisclosed,
            Dynamics::FastReaction { .. } => ModelKind::FastReaction,
            Dynamics::Newtonian => ModelKind::Newtonian,
            Dynamics::Pedestrian(_) => ModelKind::Pedestrian,
        }
    }

    fn needs_payoff(&self) -> bool {
        !matches!(self, Dynamics::Newtonian | Dynamics::Pedestrian(_))
    }
}

/// How initial positions are drawn for each realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "sampler", rename_all = "snake_case")]
pub enum InitialSampler {
    /// Independent uniform draws from the box `[lo, hi]`.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Fixed positions (rows) per realization.
    Explicit { positions: Vec<Vec<Vec<f64>>> },
    /// Two groups crossing each other: the first half of the agents starts in
    /// `[0, 0.5]²` heading for `θ̄ = 0`, the second half in `[1, 1.5]×[0, 0.5]`
    /// heading for `θ̄ = π`. Initial headings are `θ̄` plus a uniform
    /// perturbation of at most `perturbation`, except every `random_every`-th
    /// realization, which draws headings uniformly.
    PedestrianCrossing { perturbation: f64, random_every: usize },
}

impl InitialSampler {
    pub fn pedestrian_default() -> Self {
        InitialSampler::PedestrianCrossing {
            perturbation: 0.25,
            random_every: 4,
        }
    }

    fn sample(&self, r: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<Cloud> {
        match self {
            InitialSampler::UniformBox { lo, hi } => {
                Error::check_dim(lo.len(), hi.len())?;
                if lo.iter().zip(hi).any(|(a, b)| !(a <= b)) {
                    return Err(Error::config("sampling box has lo > hi"));
                }
                let d = lo.len();
                let mut data = Vec::with_capacity(n * d);
                for _ in 0..n {
                    for (a, b) in lo.iter().zip(hi) {
                        data.push(a + (b - a) * rng.random::<f64>());
                    }
                }
                Cloud::new(d, data)
            }
            InitialSampler::Explicit { positions } => {
                let rows = positions
                    .get(r)
                    .ok_or_else(|| Error::config(format!("no explicit initial positions for realization {r}")))?;
                Error::check_dim(n, rows.len())?;
                Cloud::from_rows(rows)
            }
            InitialSampler::PedestrianCrossing {
                perturbation,
                random_every,
            } => {
                let random = *random_every > 0 && r % random_every == random_every - 1;
                let mut data = Vec::with_capacity(n * 4);
                for i in 0..n {
                    let second = i >= n / 2;
                    let (x0, target) = if second { (1.0, std::f64::consts::PI) } else { (0.0, 0.0) };
                    let x = x0 + 0.5 * rng.random::<f64>();
                    let y = 0.5 * rng.random::<f64>();
                    let theta = if random {
                        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
                    } else {
                        target + perturbation * (2.0 * rng.random::<f64>() - 1.0)
                    };
                    data.extend_from_slice(&[x, y, wrap_angle(theta), wrap_angle(target)]);
                }
                Cloud::new(4, data)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(flatten)]
    pub dynamics: Dynamics,
    pub agents: usize,
    pub dt: f64,
    pub steps: usize,
    /// Keep every `subsample`-th step.
    pub subsample: usize,
    pub realizations: usize,
    pub seed: u64,
    pub initial: InitialSampler,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.agents == 0 || self.realizations == 0 || self.subsample == 0 {
            return Err(Error::config("agents, realizations and subsample must be positive"));
        }
        match self.dynamics {
            Dynamics::FullEntropic { lambda, eps } | Dynamics::Undisclosed { lambda, eps } => {
                if !(lambda >= 0.0) || !(eps >= 0.0) {
                    return Err(Error::config("lambda and eps must be nonnegative"));
                }
            }
            Dynamics::FastReaction { eps } => {
                if !(eps > 0.0) {
                    return Err(Error::config("the fast-reaction model needs eps > 0"));
                }
            }
            Dynamics::Pedestrian(_) if self.agents < 2 => {
                return Err(Error::config("the pedestrian model needs at least two agents"));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Simulates every realization and records every `subsample`-th step,
/// starting with `t = 0` and stopping before the final step. Game models
/// need a payoff; the Newtonian and pedestrian models ignore it.
pub fn run_simulation(config: &SimConfig, payoff: Option<&dyn Payoff>) -> Result<TrajectoryDataset> {
    config.validate()?;
    if config.dynamics.needs_payoff() && payoff.is_none() {
        return Err(Error::config("this model needs a payoff"));
    }
    let payoff = payoff.filter(|_| config.dynamics.needs_payoff());
    let results = par::map_range(config.realizations, |r| {
        run_realization(config, payoff, r).map_err(|e| e.in_realization(r))
    });
    let mut snapshots = Vec::new();
    for res in results {
        snapshots.extend(res?);
    }
    let heading = matches!(config.dynamics, Dynamics::Pedestrian(_))
        || payoff.is_some_and(|p| p.strategies().velocity_map() == VelocityMap::Heading);
    let dim = match snapshots.first() {
        Some(s) => s.x.dim(),
        None if heading => 2,
        None => payoff.map_or(1, |p| p.strategies().state_dim()),
    };
    let (lambda, eps) = match config.dynamics {
        Dynamics::FullEntropic { lambda, eps } | Dynamics::Undisclosed { lambda, eps } => (Some(lambda), Some(eps)),
        Dynamics::FastReaction { eps } => (None, Some(eps)),
        _ => (None, None),
    };
    let meta = DatasetMeta {
        kind: config.dynamics.kind(),
        dim,
        agents: config.agents,
        strategies: payoff.map(|p| p.strategies().clone()),
        eps,
        lambda,
        dt: config.dt,
        steps: config.steps,
        subsample: config.subsample,
        seed: config.seed,
        realizations: config.realizations,
        payoff: None,
        pedestrian: match config.dynamics {
            Dynamics::Pedestrian(p) => Some(p),
            _ => None,
        },
    };
    Ok(TrajectoryDataset { meta, snapshots })
}

fn realization_rng(seed: u64, r: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    rng
}

fn make_snapshot(r: usize, t: f64, state: &Cloud, vel: &Cloud, sigma: Option<Vec<MixedStrategy>>, heading: bool) -> Result<Snapshot> {
    if !heading {
        return Ok(Snapshot {
            r,
            t,
            x: state.clone(),
            v: vel.clone(),
            sigma,
            theta: None,
            theta_bar: None,
        });
    }
    let n = state.len();
    let mut x = Vec::with_capacity(2 * n);
    let mut v = Vec::with_capacity(2 * n);
    let mut th = Vec::with_capacity(n);
    let mut tb = Vec::with_capacity(n);
    for i in 0..n {
        let s = state.row(i);
        x.extend_from_slice(&s[..2]);
        v.extend_from_slice(&vel.row(i)[..2]);
        th.push(s[2]);
        tb.push(s[3]);
    }
    Ok(Snapshot {
        r,
        t,
        x: Cloud::new(2, x)?,
        v: Cloud::new(2, v)?,
        sigma,
        theta: Some(th),
        theta_bar: Some(tb),
    })
}

fn run_realization(config: &SimConfig, payoff: Option<&dyn Payoff>, r: usize) -> Result<Vec<Snapshot>> {
    let mut rng = realization_rng(config.seed, r);
    let start = config.initial.sample(r, config.agents, &mut rng)?;
    let map = payoff.map(|p| p.strategies().velocity_map());
    let heading = matches!(config.dynamics, Dynamics::Pedestrian(_)) || map == Some(VelocityMap::Heading);
    if let Some(p) = payoff {
        Error::check_dim(p.strategies().state_dim(), start.dim())?;
    }
    let k = payoff.map_or(0, |p| p.strategies().k());
    let mut ens = match config.dynamics {
        Dynamics::FullEntropic { .. } | Dynamics::Undisclosed { .. } => Ensemble::uniform(start, k),
        _ => Ensemble::new(start, Vec::new())?,
    };
    let mut out = Vec::with_capacity(config.steps / config.subsample + 1);
    for step in 0..config.steps.max(1) {
        let record = step % config.subsample == 0;
        let t = step as f64 * config.dt;
        let annotate = |e: Error| match e {
            Error::Integrator { agent, reason, .. } => Error::Integrator {
                realization: Some(r),
                step,
                agent,
                reason,
            },
            other => other,
        };
        let (vel, drifts, sigma) = match config.dynamics {
            Dynamics::FullEntropic { lambda, eps } | Dynamics::Undisclosed { lambda, eps } => {
                let p = payoff.expect("checked above");
                let full = matches!(config.dynamics, Dynamics::FullEntropic { .. });
                let (v, d) = game_rates(&ens, p, full, lambda, eps).map_err(annotate)?;
                let s = record.then(|| ens.strategies.clone());
                (v, Some(d), s)
            }
            Dynamics::FastReaction { eps } => {
                let st = fast_reaction_state(&ens.positions, payoff.expect("checked above"), eps)?;
                (st.velocities, None, Some(st.strategies))
            }
            Dynamics::Newtonian => (newtonian_velocities(&ens.positions, &newton_force), None, None),
            Dynamics::Pedestrian(params) => (pedestrian_velocities(&ens.positions, &params)?, None, None),
        };
        if record {
            out.push(make_snapshot(r, t, &ens.positions, &vel, sigma, heading)?);
        }
        if step == config.steps {
            break;
        }
        if let Some(d) = drifts {
            advance_strategies(&mut ens.strategies, &d, config.dt).map_err(annotate)?;
        }
        let m = if heading { Some(VelocityMap::Heading) } else { None };
        advance_positions(&mut ens.positions, &vel, config.dt, m).map_err(annotate)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::make_builtin_payoff;

    fn ntfr_config(subsample: usize) -> SimConfig {
        SimConfig {
            dynamics: Dynamics::FastReaction { eps: 1.0 },
            agents: 8,
            dt: 0.02,
            steps: 10,
            subsample,
            realizations: 100,
            seed: 7,
            initial: InitialSampler::UniformBox {
                lo: vec![-1.0],
                hi: vec![1.0],
            },
        }
    }

    #[test]
    fn protocol_yields_500_configurations() {
        let p = make_builtin_payoff("origin_repulsion_1d", None).unwrap();
        let ds = run_simulation(&ntfr_config(2), Some(&p)).unwrap();
        assert_eq!(ds.snapshots.len(), 500);
        assert_eq!(ds.realizations().len(), 100);
        ds.validate().unwrap();
        for s in &ds.snapshots {
            assert!(s.v.as_slice().iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn finer_subsampling_is_a_superset() {
        let p = make_builtin_payoff("origin_repulsion_1d", None).unwrap();
        let coarse = run_simulation(&ntfr_config(2), Some(&p)).unwrap();
        let fine = run_simulation(&ntfr_config(1), Some(&p)).unwrap();
        for s in &coarse.snapshots {
            assert!(fine.snapshots.iter().any(|f| f == s));
        }
    }

    #[test]
    fn same_seed_same_data() {
        let p = make_builtin_payoff("origin_repulsion_1d", None).unwrap();
        let a = run_simulation(&ntfr_config(2), Some(&p)).unwrap();
        let b = run_simulation(&ntfr_config(2), Some(&p)).unwrap();
        assert_eq!(a, b);
        let mut c = ntfr_config(2);
        c.seed = 8;
        assert_ne!(run_simulation(&c, Some(&p)).unwrap(), a);
    }

    #[test]
    fn zero_steps_keep_initial_snapshot() {
        let p = make_builtin_payoff("origin_repulsion_1d", None).unwrap();
        let mut c = ntfr_config(2);
        c.steps = 0;
        let ds = run_simulation(&c, Some(&p)).unwrap();
        assert_eq!(ds.snapshots.len(), 100);
        assert!(ds.snapshots.iter().all(|s| s.t == 0.0));
    }

    #[test]
    fn pedestrian_run_has_headings() {
        let c = SimConfig {
            dynamics: Dynamics::Pedestrian(PedestrianParams::default()),
            agents: 6,
            dt: 0.005,
            steps: 100,
            subsample: 20,
            realizations: 4,
            seed: 1,
            initial: InitialSampler::pedestrian_default(),
        };
        let ds = run_simulation(&c, None).unwrap();
        assert!(ds.has_headings());
        assert_eq!(ds.snapshots.len(), 4 * 5);
        assert_eq!(ds.meta.dim, 2);
        for s in &ds.snapshots {
            for v in s.v.rows() {
                assert!((v[0].hypot(v[1]) - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn integrator_errors_name_the_realization() {
        let p = make_builtin_payoff("origin_repulsion_1d", None).unwrap();
        let c = SimConfig {
            dynamics: Dynamics::Undisclosed { lambda: 500.0, eps: 0.0 },
            initial: InitialSampler::UniformBox {
                lo: vec![5.0],
                hi: vec![6.0],
            },
            realizations: 3,
            ..ntfr_config(1)
        };
        match run_simulation(&c, Some(&p)) {
            Err(Error::Integrator { realization: Some(_), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_round_trips_through_json() {
        let c = ntfr_config(2);
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"model\":\"fast_reaction\""));
        let back: SimConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
