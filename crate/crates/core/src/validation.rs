//! Reference protocols and the invariant suites behind `evogame validate`.
//!
//! Each task returns rows `(task, metric, value, threshold, pass)`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::Cloud;
use crate::dataset::TrajectoryDataset;
use crate::error::{Error, Result};
use crate::inference::{
    trajectory_error_bound_check, DifferentialSample, Functional, InferenceProblem, Objective,
};
use crate::metrics::{fit_rate, norm_n, wasserstein1_empirical};
use crate::payoff::{make_builtin_payoff, Axis, BuiltinKind, BuiltinPayoff, Payoff, PayoffModel};
use crate::sim::{self, run_simulation, Dynamics, InitialSampler, SimConfig};
use crate::strategy::{self, MixedStrategy, StrategySpace};

/// The one-dimensional origin-repulsion protocol: 8 agents drawn from
/// `[−1, 1]`, ten Euler steps of 0.02, every other step kept.
pub fn ntfr_1d_config(realizations: usize, seed: u64) -> SimConfig {
    SimConfig {
        dynamics: Dynamics::FastReaction { eps: 1.0 },
        agents: 8,
        dt: 0.02,
        steps: 10,
        subsample: 2,
        realizations,
        seed,
        initial: InitialSampler::UniformBox {
            lo: vec![-1.0],
            hi: vec![1.0],
        },
    }
}

/// Zero split payoff with 30 nodes on `[−1, 1]` for `J₁` and 59 nodes on
/// `[−2, 2]` for `J₂` (178 coefficients for two strategies).
pub fn ntfr_1d_ansatz() -> PayoffModel {
    PayoffModel::split_default(
        StrategySpace::scalar(&[-1.0, 1.0]).expect("valid"),
        &[(-1.0, 1.0)],
        &[(-2.0, 2.0)],
    )
    .expect("valid grid")
}

pub fn origin_repulsion_1d() -> BuiltinPayoff {
    make_builtin_payoff(BuiltinKind::OriginRepulsion1d.name(), None).expect("built-in")
}

fn uniform_positions(n: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| vec![rng.random_range(lo..hi)]).collect()
}

/// Positions at `t = 0` and `t = steps · dt` for every realization.
fn endpoints(cfg: &SimConfig, payoff: Option<&dyn Payoff>) -> Result<Vec<Cloud>> {
    let mut c = cfg.clone();
    c.subsample = cfg.steps;
    c.steps = cfg.steps + 1;
    let ds = run_simulation(&c, payoff)?;
    Ok(ds.realizations().iter().map(|run| run[run.len() - 1].x.clone()).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaConvergence {
    pub lambdas: Vec<f64>,
    /// Mean over realizations of `‖x_λ(T) − x**(T)‖_N`.
    pub errors: Vec<f64>,
    pub slope: f64,
}

/// Undisclosed model with uniform initial strategies against its fast-reaction
/// limit, origin-repulsion payoff, `N = 8`, `T = 0.5`, `Δt = 10⁻³`.
pub fn lambda_convergence(lambdas: &[f64], realizations: usize, seed: u64) -> Result<LambdaConvergence> {
    let payoff = origin_repulsion_1d();
    let dt: f64 = 1e-3;
    let steps = (0.5 / dt).round() as usize;
    let mut cfg = ntfr_1d_config(realizations, seed);
    cfg.dt = dt;
    cfg.steps = steps;
    let limit = endpoints(&cfg, Some(&payoff))?;
    let mut errors = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        cfg.dynamics = Dynamics::Undisclosed { lambda, eps: 1.0 };
        let ends = endpoints(&cfg, Some(&payoff))?;
        let mut acc = 0.0;
        for (a, b) in ends.iter().zip(&limit) {
            acc += norm_n(a, b)?;
        }
        errors.push(acc / ends.len() as f64);
    }
    Ok(LambdaConvergence {
        lambdas: lambdas.to_vec(),
        slope: fit_rate(lambdas, &errors)?,
        errors,
    })
}

/// Supremum over time (and over `realizations` random starts in `[−1, 1]`) of
/// the `‖·‖_N` gap between the Newtonian model and its fast-reaction
/// embedding, `N = 4`, `T = 2`, `Δt = 0.02`, for each `ε`.
pub fn newton_gaps(eps_values: &[f64], realizations: usize, seed: u64) -> Result<Vec<f64>> {
    let embed = make_builtin_payoff(BuiltinKind::NewtonEmbed.name(), None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<Vec<Vec<f64>>> = (0..realizations).map(|_| uniform_positions(4, -1.0, 1.0, &mut rng)).collect();
    let cfg = |dynamics| SimConfig {
        dynamics,
        agents: 4,
        dt: 0.02,
        steps: 101,
        subsample: 1,
        realizations,
        seed,
        initial: InitialSampler::Explicit {
            positions: starts.clone(),
        },
    };
    let newton = run_simulation(&cfg(Dynamics::Newtonian), None)?;
    eps_values
        .iter()
        .map(|&eps| {
            let game = run_simulation(&cfg(Dynamics::FastReaction { eps }), Some(&embed))?;
            let mut sup: f64 = 0.0;
            for (a, b) in newton.snapshots.iter().zip(&game.snapshots) {
                sup = sup.max(norm_n(&a.x, &b.x)?);
            }
            Ok(sup)
        })
        .collect()
}

/// Mean over `seeds` of the 1-D `W₁` distance at `t = 0.5` between an
/// `N`-agent fast-reaction ensemble and one independent 512-agent reference.
pub fn mean_field_distances(ns: &[usize], seeds: usize, seed: u64) -> Result<Vec<f64>> {
    let payoff = origin_repulsion_1d();
    let at_half = |n: usize, s: u64| -> Result<Cloud> {
        let mut cfg = ntfr_1d_config(1, s);
        cfg.agents = n;
        cfg.steps = 25;
        Ok(endpoints(&cfg, Some(&payoff))?.remove(0))
    };
    let base = seed.wrapping_mul(1000);
    let reference = at_half(512, base)?;
    let mut out = vec![0.0; ns.len()];
    for s in 1..=seeds as u64 {
        for (o, &n) in out.iter_mut().zip(ns) {
            *o += wasserstein1_empirical(&at_half(n, base + s)?, &reference)?;
        }
    }
    Ok(out.into_iter().map(|v| v / seeds as f64).collect())
}

/// Full-pair grid on `[−1.5, 1.5]²` with `nodes` per axis and `U = {−1, 1}`.
pub fn full_pair_ansatz(nodes: usize) -> PayoffModel {
    PayoffModel::full_pair(
        StrategySpace::scalar(&[-1.0, 1.0]).expect("valid"),
        vec![Axis::bounded(-1.5, 1.5, nodes), Axis::bounded(-1.5, 1.5, nodes)],
    )
    .expect("valid grid")
}

/// Largest relative error between analytic and central-difference directional
/// derivatives, with step `10⁻⁵ · max(1, ‖c‖_∞)`.
pub fn gradient_error(obj: &Objective, c: &[f64], directions: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let (_, grad) = obj.value_grad(c)?;
    let h = 1e-5 * c.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    let mut worst: f64 = 0.0;
    for _ in 0..directions {
        let d: Vec<f64> = (0..c.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let plus: Vec<f64> = c.iter().zip(&d).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = c.iter().zip(&d).map(|(a, b)| a - h * b).collect();
        let fd = (obj.value_grad(&plus)?.0 - obj.value_grad(&minus)?.0) / (2.0 * h);
        let an: f64 = grad.iter().zip(&d).map(|(a, b)| a * b).sum();
        worst = worst.max((fd - an).abs() / an.abs().max(1e-6));
    }
    Ok(worst)
}

fn random_coefficients(n: usize, amp: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| amp * rng.random_range(-1.0..1.0)).collect()
}

/// Strategy-bearing data from the full-entropic model with the full-pair demo
/// payoff.
pub fn full_pair_demo_data(realizations: usize, seed: u64) -> Result<TrajectoryDataset> {
    let payoff = make_builtin_payoff(BuiltinKind::FullPairDemo.name(), None)?;
    let mut cfg = ntfr_1d_config(realizations, seed);
    cfg.dynamics = Dynamics::FullEntropic { lambda: 1.0, eps: 1.0 };
    run_simulation(&cfg, Some(&payoff))
}

/// Gradient check of the sigma, velocity and differential functionals.
pub fn gradient_check(directions: usize, seed: u64) -> Result<Vec<(Functional, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = run_simulation(&ntfr_1d_config(20, seed), Some(&origin_repulsion_1d()))?;
    let mut out = Vec::new();
    for f in [Functional::Sigma, Functional::Velocity] {
        let p = InferenceProblem::new(&data, ntfr_1d_ansatz(), f).with_reg(1e-3, 1e-3);
        let obj = Objective::new(&p)?;
        let c = random_coefficients(obj.n_coefficients(), 1.0, &mut rng);
        out.push((f, gradient_error(&obj, &c, directions, &mut rng)?));
    }
    let diff = full_pair_demo_data(10, seed)?;
    let p = InferenceProblem::new(&diff, full_pair_ansatz(12), Functional::Differential).with_reg(1e-3, 0.0);
    let obj = Objective::new(&p)?;
    let c = random_coefficients(obj.n_coefficients(), 1.0, &mut rng);
    out.push((Functional::Differential, gradient_error(&obj, &c, directions, &mut rng)?));
    Ok(out)
}

/// Largest violation of `f(αa + (1−α)b) ≤ αf(a) + (1−α)f(b)` for `α = 0.3` and
/// the midpoint, over random segments of the sigma data term.
pub fn convexity_violation(segments: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = run_simulation(&ntfr_1d_config(20, seed), Some(&origin_repulsion_1d()))?;
    let obj = Objective::new(&InferenceProblem::new(&data, ntfr_1d_ansatz(), Functional::Sigma))?;
    let n = obj.n_coefficients();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..segments {
        let a = random_coefficients(n, 3.0, &mut rng);
        let b = random_coefficients(n, 3.0, &mut rng);
        let (fa, fb) = (obj.data_term(&a)?.0, obj.data_term(&b)?.0);
        for alpha in [0.3, 0.5] {
            let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + (1.0 - alpha) * y).collect();
            let fm = obj.data_term(&m)?.0;
            worst = worst.max(fm - (alpha * fa + (1.0 - alpha) * fb));
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundSweep {
    pub trials: usize,
    pub failures: usize,
    /// Smallest `bound − gap` seen.
    pub min_slack: f64,
    pub max_gap: f64,
}

/// Trajectory-bound check for `trials` perturbations (uniform noise of
/// amplitude `noise`) of the projected origin-repulsion payoff.
pub fn bound_sweep(trials: usize, noise: f64, seed: u64) -> Result<BoundSweep> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = origin_repulsion_1d();
    let data = run_simulation(&ntfr_1d_config(20, seed), Some(&truth))?;
    let mut base = ntfr_1d_ansatz();
    truth.project_onto(&mut base)?;
    let mut out = BoundSweep {
        trials,
        failures: 0,
        min_slack: f64::INFINITY,
        max_gap: 0.0,
    };
    for _ in 0..trials {
        let c: Vec<f64> = base.coefficients().iter().map(|v| v + noise * rng.random_range(-1.0..1.0)).collect();
        let fitted = base.with_coefficients(&c)?;
        let rep = trajectory_error_bound_check(&data, &fitted, 1.0)?;
        for r in &rep.realizations {
            out.min_slack = out.min_slack.min(r.bound - r.max_gap);
            out.max_gap = out.max_gap.max(r.max_gap);
        }
        if !rep.all_hold {
            out.failures += 1;
        }
    }
    Ok(out)
}

/// Largest `𝓔_v(J) − 2 e_max² 𝓔_σ(J)` over random `(dataset, J)` pairs.
pub fn pinsker_gap(pairs: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = origin_repulsion_1d();
    let e_max = truth.strategies().e_max();
    let datasets: Vec<TrajectoryDataset> = (0..5)
        .map(|i| run_simulation(&ntfr_1d_config(10, seed + i), Some(&truth)))
        .collect::<Result<_>>()?;
    let mut worst = f64::NEG_INFINITY;
    for p in 0..pairs {
        let ds = &datasets[p % datasets.len()];
        let mut model = ntfr_1d_ansatz();
        model.set_coefficients(&random_coefficients(model.n_coefficients(), 2.0, &mut rng))?;
        let sig = Objective::new(&InferenceProblem::new(ds, model.clone(), Functional::Sigma))?;
        let vel = Objective::new(&InferenceProblem::new(ds, model.clone(), Functional::Velocity))?;
        let c = model.coefficients();
        let (es, ev) = (sig.data_term(&c)?.0, vel.data_term(&c)?.0);
        worst = worst.max(ev - 2.0 * e_max * e_max * es);
    }
    Ok(worst)
}

/// Exact-rate samples of the full-entropic model for the differential
/// functional, drawn uniformly from `[−1, 1]` with random positive strategies.
pub fn exact_rate_samples<P: Payoff + ?Sized>(
    payoff: &P,
    samples: usize,
    agents: usize,
    eps: f64,
    seed: u64,
) -> Result<Vec<DifferentialSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = payoff.strategies().k();
    (0..samples)
        .map(|_| {
            let positions = Cloud::from_rows(&uniform_positions(agents, -1.0, 1.0, &mut rng))?;
            let sigma: Vec<MixedStrategy> = (0..agents)
                .map(|_| {
                    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.9)).collect();
                    let m = strategy::mean(&raw);
                    MixedStrategy::new(raw.into_iter().map(|v| v / m).collect())
                })
                .collect::<Result<_>>()?;
            let rates = (0..agents)
                .map(|i| {
                    let mut h = vec![0.0; k];
                    sim::averaged_payoff_full(payoff, &positions, &sigma, i, &mut h);
                    let rep = strategy::replicator_drift_undisclosed(&sigma[i], &h)?;
                    let ent = strategy::entropy_drift(&sigma[i], eps)?;
                    Ok(rep.iter().zip(&ent).map(|(a, b)| a + b).collect())
                })
                .collect::<Result<_>>()?;
            Ok(DifferentialSample { positions, sigma, rates })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    LambdaConvergence,
    EpsNewton,
    Meanfield,
    Gradcheck,
    Convexity,
    TrajectoryBound,
    Pinsker,
}

impl Task {
    pub const ALL: [Task; 7] = [
        Task::LambdaConvergence,
        Task::EpsNewton,
        Task::Meanfield,
        Task::Gradcheck,
        Task::Convexity,
        Task::TrajectoryBound,
        Task::Pinsker,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::LambdaConvergence => "lambda-convergence",
            Task::EpsNewton => "eps-newton",
            Task::Meanfield => "meanfield",
            Task::Gradcheck => "gradcheck",
            Task::Convexity => "convexity",
            Task::TrajectoryBound => "trajectory-bound",
            Task::Pinsker => "pinsker",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('_', "-");
        Task::ALL.into_iter().find(|t| t.name() == norm).ok_or_else(|| {
            let names: Vec<_> = Task::ALL.iter().map(|t| t.name()).collect();
            Error::config(format!("unknown validation task {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub task: String,
    pub metric: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl ValidationRow {
    fn new(task: Task, metric: impl Into<String>, value: f64, threshold: f64, pass: bool) -> Self {
        ValidationRow {
            task: task.name().to_string(),
            metric: metric.into(),
            value,
            threshold,
            pass,
        }
    }

    fn at_most(task: Task, metric: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(task, metric, value, threshold, value <= threshold)
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Runs one task and returns its table rows.
pub fn run_task(task: Task, seed: u64) -> Result<Vec<ValidationRow>> {
    let mut rows = Vec::new();
    match task {
        Task::LambdaConvergence => {
            let r = lambda_convergence(&[1.0, 10.0, 100.0], 10, seed)?;
            for (l, e) in r.lambdas.iter().zip(&r.errors) {
                rows.push(ValidationRow::new(task, format!("error_lambda_{l}"), *e, f64::NAN, true));
            }
            let dec = strictly_decreasing(&r.errors);
            rows.push(ValidationRow::new(task, "strictly_decreasing", dec as u8 as f64, 1.0, dec));
            rows.push(ValidationRow::at_most(task, "loglog_slope", r.slope, -0.4));
        }
        Task::EpsNewton => {
            let eps = [0.5, 0.1, 0.01];
            let gaps = newton_gaps(&eps, 5, seed)?;
            for (e, g) in eps.iter().zip(&gaps) {
                rows.push(ValidationRow::new(task, format!("sup_gap_eps_{e}"), *g, f64::NAN, true));
            }
            let dec = strictly_decreasing(&gaps);
            rows.push(ValidationRow::new(task, "strictly_decreasing", dec as u8 as f64, 1.0, dec));
            rows.push(ValidationRow::at_most(task, "sup_gap_eps_0.01", gaps[2], 0.05));
        }
        Task::Meanfield => {
            let ns = [8, 32, 128, 512];
            let w = mean_field_distances(&ns, 20, seed)?;
            for (n, d) in ns.iter().zip(&w) {
                rows.push(ValidationRow::new(task, format!("w1_n_{n}"), *d, f64::NAN, true));
            }
            let dec = strictly_decreasing(&w);
            rows.push(ValidationRow::new(task, "monotone_decreasing", dec as u8 as f64, 1.0, dec));
        }
        Task::Gradcheck => {
            for (f, e) in gradient_check(20, seed)? {
                rows.push(ValidationRow::at_most(task, format!("max_rel_error_{f}"), e, 1e-5));
            }
        }
        Task::Convexity => {
            rows.push(ValidationRow::at_most(task, "max_violation", convexity_violation(100, seed)?, 1e-10));
        }
        Task::TrajectoryBound => {
            let s = bound_sweep(20, 0.1, seed)?;
            rows.push(ValidationRow::at_most(task, "failures", s.failures as f64, 0.0));
            rows.push(ValidationRow::new(task, "min_slack", s.min_slack, 0.0, s.min_slack >= 0.0));
            rows.push(ValidationRow::new(task, "max_gap", s.max_gap, f64::NAN, true));
        }
        Task::Pinsker => {
            rows.push(ValidationRow::at_most(task, "max_excess", pinsker_gap(50, seed)?, 0.0));
        }
    }
    Ok(rows)
}

/// Writes rows as CSV with header `task,metric,value,threshold,pass`.
pub fn write_csv<W: Write>(rows: &[ValidationRow], mut w: W) -> Result<()> {
    writeln!(w, "task,metric,value,threshold,pass")?;
    for r in rows {
        writeln!(w, "{},{},{:.16e},{:.16e},{}", r.task, r.metric, r.value, r.threshold, r.pass)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ansatz_has_178_coefficients() {
        assert_eq!(ntfr_1d_ansatz().n_coefficients(), 178);
    }

    #[test]
    fn task_names_round_trip() {
        for t in Task::ALL {
            assert_eq!(t.name().parse::<Task>().unwrap(), t);
        }
        assert!("nope".parse::<Task>().is_err());
    }

    #[test]
    fn convexity_and_pinsker_tasks_pass() {
        for task in [Task::Convexity, Task::Pinsker] {
            for row in run_task(task, 1).unwrap() {
                assert!(row.pass, "{row:?}");
            }
        }
    }

    #[test]
    fn csv_header() {
        let mut buf = Vec::new();
        write_csv(&[ValidationRow::at_most(Task::Convexity, "m", 0.0, 1.0)], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("task,metric,value,threshold,pass\nconvexity,m,"));
        assert!(s.trim_end().ends_with("true"));
    }
}
