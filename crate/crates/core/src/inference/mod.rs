//! Variational inference of payoff coefficients from observed trajectories.
//!
//! Four data terms are available:
//!
//! * `sigma`: mean KL divergence between observed strategies and the softmax
//!   steady states of the candidate payoff;
//! * `velocity`: mean squared gap between observed velocities and those of the
//!   steady states;
//! * `differential`: mean squared Hellinger tangent distance between observed
//!   strategy rates and the game drift;
//! * `pedestrian_velocity`: squared gap between finite-difference turning
//!   rates and the steady-state angular velocity.
//!
//! The regularized objective adds `λ₁ R(J₁) + λ₂ R(J₂)`, where `R` is the
//! squared norm of the discrete gradient of each grid.

mod bound;
mod lbfgs;
mod objective;
mod operator;
mod reconstruct;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use bound::{sampled_lipschitz, trajectory_error_bound_check, BoundReport, RealizationBound};
pub use lbfgs::{minimize_lbfgs, LbfgsOutcome, LbfgsSettings, Status};
pub use objective::{DifferentialSample, Objective};
pub use reconstruct::{
    reconstruct_dataset, reconstruct_strategy_from_velocity, DatasetReconstruction, Reconstruction, BOUNDARY_WARN,
};

use crate::dataset::TrajectoryDataset;
use crate::error::{Error, Result};
use crate::jsonfmt;
use crate::payoff::PayoffModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    Sigma,
    Velocity,
    Differential,
    PedestrianVelocity,
}

impl Functional {
    pub const ALL: [Functional; 4] = [
        Functional::Sigma,
        Functional::Velocity,
        Functional::Differential,
        Functional::PedestrianVelocity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Functional::Sigma => "sigma",
            Functional::Velocity => "velocity",
            Functional::Differential => "differential",
            Functional::PedestrianVelocity => "pedestrian_velocity",
        }
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Functional {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        Functional::ALL
            .into_iter()
            .find(|f| f.name() == norm)
            .ok_or_else(|| Error::config(format!("unknown functional {s:?}; expected sigma, velocity, differential or pedestrian_velocity")))
    }
}

/// Everything needed to fit a payoff model to a dataset.
#[derive(Clone, Debug)]
pub struct InferenceProblem<'a> {
    pub dataset: &'a TrajectoryDataset,
    /// Ansatz and initial coefficients.
    pub model: PayoffModel,
    pub functional: Functional,
    /// Penalty weights for the first and second grid.
    pub reg: [f64; 2],
    pub eps: f64,
    /// Time scale of the strategy dynamics for the differential functional;
    /// observed rates are divided by it. Defaults to the dataset's value, or 1.
    pub lambda: Option<f64>,
    pub settings: LbfgsSettings,
}

impl<'a> InferenceProblem<'a> {
    /// Problem with zero regularization, default optimizer settings and `eps`
    /// taken from the dataset (or 1).
    pub fn new(dataset: &'a TrajectoryDataset, model: PayoffModel, functional: Functional) -> Self {
        InferenceProblem {
            dataset,
            model,
            functional,
            reg: [0.0, 0.0],
            eps: dataset.meta.eps.unwrap_or(1.0),
            lambda: None,
            settings: LbfgsSettings::default(),
        }
    }

    pub fn with_reg(mut self, l1: f64, l2: f64) -> Self {
        self.reg = [l1, l2];
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub status: Status,
    pub iterations: usize,
    /// Regularized objective after every accepted iterate.
    pub objective_trace: Vec<f64>,
    /// Data term at the returned coefficients.
    pub final_data_term: f64,
    pub grad_norm: f64,
    pub wall_ms: u64,
    /// Differential functional only: snapshot pairs not differenced because
    /// they straddle realizations.
    #[serde(default)]
    pub skipped_pairs: usize,
    pub coefficients: Vec<f64>,
}

impl InferenceReport {
    /// The template model carrying the fitted coefficients.
    pub fn fitted(&self, template: &PayoffModel) -> Result<PayoffModel> {
        template.with_coefficients(&self.coefficients)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = jsonfmt::to_string(self)?;
        s.push('\n');
        Ok(s)
    }
}

fn data_term_for(problem: &InferenceProblem<'_>, functional: Functional) -> Result<(f64, Vec<f64>)> {
    let mut p = problem.clone();
    p.functional = functional;
    Objective::new(&p)?.data_term(&problem.model.coefficients())
}

/// Mean KL data term at the problem's coefficients, with its gradient.
pub fn energy_sigma(problem: &InferenceProblem<'_>) -> Result<(f64, Vec<f64>)> {
    data_term_for(problem, Functional::Sigma)
}

pub fn energy_velocity(problem: &InferenceProblem<'_>) -> Result<(f64, Vec<f64>)> {
    data_term_for(problem, Functional::Velocity)
}

pub fn energy_differential(problem: &InferenceProblem<'_>) -> Result<(f64, Vec<f64>)> {
    data_term_for(problem, Functional::Differential)
}

pub fn energy_pedestrian(problem: &InferenceProblem<'_>) -> Result<(f64, Vec<f64>)> {
    data_term_for(problem, Functional::PedestrianVelocity)
}

/// Minimizes an assembled objective from `x0`.
pub fn minimize_objective(objective: &Objective, x0: Vec<f64>, settings: &LbfgsSettings) -> Result<InferenceReport> {
    let start = Instant::now();
    Error::check_dim(objective.n_coefficients(), x0.len())?;
    let eval = |c: &[f64]| objective.value_grad(c).expect("coefficient length checked");
    let out = minimize_lbfgs(eval, x0, settings);
    let (final_data_term, _) = objective.data_term(&out.x)?;
    Ok(InferenceReport {
        status: out.status,
        iterations: out.iterations,
        objective_trace: out.trace,
        final_data_term,
        grad_norm: out.grad_norm,
        wall_ms: start.elapsed().as_millis() as u64,
        skipped_pairs: objective.skipped_pairs(),
        coefficients: out.x,
    })
}

/// Fits the problem's model by L-BFGS starting from its current coefficients.
pub fn minimize(problem: &InferenceProblem<'_>) -> Result<InferenceReport> {
    let objective = Objective::new(problem)?;
    minimize_objective(&objective, problem.model.coefficients(), &problem.settings)
}
