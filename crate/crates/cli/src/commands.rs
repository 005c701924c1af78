use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::json;

use evogame::inference::{self, reconstruct_dataset, Functional, InferenceProblem, LbfgsSettings, Status};
use evogame::metrics::norm_n;
use evogame::payoff::{Axis, Payoff, PayoffModel, Variant};
use evogame::sim::{run_simulation, Dynamics, InitialSampler, ModelKind, SimConfig};
use evogame::validation::{self, Task, ValidationRow};
use evogame::{StrategySpace, TrajectoryDataset, VelocityMap};

use crate::config::{self, Ansatz, InferDoc, InferResolved, ReconstructDoc, ReconstructResolved, RolloutDoc, RolloutResolved, SimulateDoc, SimulateResolved, ValidateDoc, ValidateResolved};
use crate::{code, Common, Failure};

#[derive(Args, Debug)]
pub struct SimulateFlags {
    /// full-entropic, undisclosed, fast-reaction, newtonian or pedestrian.
    #[arg(long)]
    model: Option<String>,
    /// `builtin:NAME` or a payoff file.
    #[arg(long)]
    payoff: Option<String>,
    /// Agents per realization.
    #[arg(long = "n")]
    agents: Option<usize>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    subsample: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Also write the trajectories as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InferFlags {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// sigma, velocity, differential or pedestrian_velocity.
    #[arg(long)]
    functional: Option<String>,
    /// Penalty weight of the first grid.
    #[arg(long)]
    reg1: Option<f64>,
    /// Penalty weight of the second grid.
    #[arg(long)]
    reg2: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    grad_tol: Option<f64>,
    /// Report path; defaults to `<out>.report.json`.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReconstructFlags {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    eps: Option<f64>,
    /// Scalar strategy set, e.g. `-1,1`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    strategies: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
pub struct RolloutFlags {
    /// `builtin:NAME` or a payoff file.
    #[arg(long)]
    payoff: Option<String>,
    /// Take initial conditions, time grid and eps from this dataset.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long = "n")]
    agents: Option<usize>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    subsample: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ValidateFlags {
    /// Tasks to run (default: all).
    tasks: Vec<String>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::config(format!("{}: {e}", path.display()))
}

fn load_dataset(path: &Path) -> Result<TrajectoryDataset, Failure> {
    TrajectoryDataset::load(path).map_err(|e| io_failure(path, e))
}

fn save_dataset(ds: &TrajectoryDataset, path: &Path, csv: Option<&Path>) -> Result<(), Failure> {
    ds.save(path).map_err(|e| io_failure(path, e))?;
    if let Some(c) = csv {
        let f = File::create(c).map_err(|e| io_failure(c, e))?;
        let mut w = BufWriter::new(f);
        ds.write_csv(&mut w).map_err(|e| io_failure(c, e))?;
        w.flush().map_err(|e| io_failure(c, e))?;
    }
    Ok(())
}

fn uniform_box(d: usize) -> InitialSampler {
    InitialSampler::UniformBox {
        lo: vec![-1.0; d],
        hi: vec![1.0; d],
    }
}

fn game_dynamics(kind: ModelKind, eps: f64, lambda: Option<f64>) -> Result<Dynamics, Failure> {
    let lambda = lambda.unwrap_or(1.0);
    match kind {
        ModelKind::FullEntropic => Ok(Dynamics::FullEntropic { lambda, eps }),
        ModelKind::Undisclosed => Ok(Dynamics::Undisclosed { lambda, eps }),
        ModelKind::FastReaction => Ok(Dynamics::FastReaction { eps }),
        other => Err(Failure::config(format!("{} is not a game model", config::model_name(other)))),
    }
}

fn max_speed(ds: &TrajectoryDataset) -> f64 {
    ds.snapshots
        .iter()
        .flat_map(|s| s.v.rows())
        .map(|v| v.iter().map(|a| a * a).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

pub fn simulate(common: &Common, flags: SimulateFlags) -> Result<(), Failure> {
    let doc: SimulateDoc = config::load(
        common.config.as_deref(),
        json!({
            "model": flags.model, "payoff": flags.payoff, "agents": flags.agents,
            "realizations": flags.realizations, "dt": flags.dt, "steps": flags.steps,
            "subsample": flags.subsample, "eps": flags.eps, "lambda": flags.lambda,
            "seed": common.seed, "out": common.out, "csv": flags.csv,
        }),
    )?;
    let kind = config::parse_model(doc.model.as_deref().unwrap_or("fast_reaction"))?;
    let pedestrian = kind == ModelKind::Pedestrian;
    let game = matches!(kind, ModelKind::FullEntropic | ModelKind::Undisclosed | ModelKind::FastReaction);

    let (payoff_source, payoff) = if game {
        let src = doc.payoff.clone().unwrap_or_else(|| "builtin:origin_repulsion_1d".into());
        let p = config::load_payoff(&src, doc.strategies.as_ref())?;
        (Some(src), Some(p))
    } else {
        if doc.payoff.is_some() {
            return Err(Failure::config(format!("the {} model takes no payoff", config::model_name(kind))));
        }
        (None, None)
    };
    let heading = pedestrian || payoff.as_ref().is_some_and(|p| p.strategies().velocity_map() == VelocityMap::Heading);
    let d = payoff.as_ref().map_or(1, |p| p.strategies().state_dim());
    let eps = game.then(|| doc.eps.unwrap_or(1.0));
    let lambda = matches!(kind, ModelKind::FullEntropic | ModelKind::Undisclosed).then(|| doc.lambda.unwrap_or(1.0));

    let resolved = SimulateResolved {
        model: config::model_name(kind),
        payoff: payoff_source,
        strategies: payoff.as_ref().map(|p| p.strategies().clone()),
        agents: doc.agents.unwrap_or(if pedestrian { 6 } else { 8 }),
        realizations: doc.realizations.unwrap_or(1),
        dt: doc.dt.unwrap_or(if pedestrian { 0.005 } else { 0.02 }),
        steps: doc.steps.unwrap_or(if pedestrian { 500 } else { 10 }),
        subsample: doc.subsample.unwrap_or(if pedestrian { 20 } else { 2 }),
        eps,
        lambda,
        seed: doc.seed.unwrap_or(0),
        initial: doc
            .initial
            .clone()
            .unwrap_or_else(|| if heading { InitialSampler::pedestrian_default() } else { uniform_box(d) }),
        pedestrian: pedestrian.then(|| doc.pedestrian.unwrap_or_default()),
        out: doc.out.clone().unwrap_or_else(|| "dataset.ndjson".into()),
        csv: doc.csv.clone(),
    };
    let dynamics = match kind {
        ModelKind::Newtonian => Dynamics::Newtonian,
        ModelKind::Pedestrian => Dynamics::Pedestrian(resolved.pedestrian.unwrap_or_default()),
        _ => game_dynamics(kind, eps.unwrap_or(1.0), lambda)?,
    };
    let cfg = SimConfig {
        dynamics,
        agents: resolved.agents,
        dt: resolved.dt,
        steps: resolved.steps,
        subsample: resolved.subsample,
        realizations: resolved.realizations,
        seed: resolved.seed,
        initial: resolved.initial.clone(),
    };
    cfg.validate()?;
    config::echo(&resolved.out, &resolved)?;
    let mut ds = run_simulation(&cfg, payoff.as_deref())?;
    ds.meta.payoff = resolved.payoff.clone();
    save_dataset(&ds, &resolved.out, resolved.csv.as_deref())?;

    let speed = max_speed(&ds);
    let check = match &payoff {
        Some(p) if !heading => {
            let e_max = p.strategies().e_max();
            format!("max speed {speed:.6} (bound {e_max}: {})", if speed <= e_max * (1.0 + 1e-12) { "ok" } else { "VIOLATED" })
        }
        _ if heading => format!("max speed {speed:.6} (unit speed expected)"),
        _ => format!("max speed {speed:.6}"),
    };
    println!(
        "wrote {}: {} realizations, {} snapshots, {check}",
        resolved.out.display(),
        resolved.realizations,
        ds.snapshots.len()
    );
    Ok(())
}

/// Per-dimension `[min, max]` of the observed positions.
fn bounding_box(ds: &TrajectoryDataset) -> Vec<[f64; 2]> {
    let d = ds.meta.dim;
    let mut b = vec![[f64::INFINITY, f64::NEG_INFINITY]; d];
    for s in &ds.snapshots {
        for row in s.x.rows() {
            for (bi, &v) in b.iter_mut().zip(row) {
                bi[0] = bi[0].min(v);
                bi[1] = bi[1].max(v);
            }
        }
    }
    for bi in &mut b {
        if !(bi[1] - bi[0] > 1e-9) {
            let c = if bi[0].is_finite() { bi[0] } else { 0.0 };
            *bi = [c - 0.5, c + 0.5];
        }
    }
    b
}

fn resolve_ansatz(ansatz: Option<Ansatz>, functional: Functional, ds: &TrajectoryDataset) -> Ansatz {
    let bbox = bounding_box(ds);
    let d = bbox.len();
    let default = match functional {
        Functional::PedestrianVelocity => Ansatz::Pedestrian {
            rates: None,
            self_nodes: None,
            box_lo: None,
            box_hi: None,
            interaction_nodes: None,
        },
        Functional::Differential => Ansatz::FullPair {
            lo: None,
            hi: None,
            nodes: None,
        },
        _ => Ansatz::Split {
            x_box: None,
            dx_box: None,
            self_nodes: None,
            interaction_nodes: None,
        },
    };
    match ansatz.unwrap_or(default) {
        Ansatz::Split {
            x_box,
            dx_box,
            self_nodes,
            interaction_nodes,
        } => Ansatz::Split {
            dx_box: Some(dx_box.unwrap_or_else(|| bbox.iter().map(|b| [b[0] - b[1], b[1] - b[0]]).collect())),
            x_box: Some(x_box.unwrap_or(bbox)),
            self_nodes: Some(self_nodes.unwrap_or(30)),
            interaction_nodes: Some(interaction_nodes.unwrap_or(if d == 1 { 59 } else { 42 })),
        },
        Ansatz::FullPair { lo, hi, nodes } => Ansatz::FullPair {
            lo: Some(lo.unwrap_or_else(|| bbox.iter().map(|b| b[0]).fold(f64::INFINITY, f64::min))),
            hi: Some(hi.unwrap_or_else(|| bbox.iter().map(|b| b[1]).fold(f64::NEG_INFINITY, f64::max))),
            nodes: Some(nodes.unwrap_or(16)),
        },
        Ansatz::Pedestrian {
            rates,
            self_nodes,
            box_lo,
            box_hi,
            interaction_nodes,
        } => Ansatz::Pedestrian {
            rates: Some(rates.unwrap_or_else(|| vec![-2.0, 2.0])),
            self_nodes: Some(self_nodes.unwrap_or(30)),
            box_lo: Some(box_lo.unwrap_or([-0.15, -0.6])),
            box_hi: Some(box_hi.unwrap_or([1.5, 0.6])),
            interaction_nodes: Some(interaction_nodes.unwrap_or([20, 20, 20])),
        },
        file @ Ansatz::File { .. } => file,
    }
}

fn build_model(ansatz: &Ansatz, strategies: &StrategySpace) -> Result<PayoffModel, Failure> {
    let axes = |b: &[[f64; 2]], n: usize| b.iter().map(|r| Axis::bounded(r[0], r[1], n)).collect::<Vec<_>>();
    let model = match ansatz {
        Ansatz::Split {
            x_box: Some(xb),
            dx_box: Some(db),
            self_nodes: Some(n1),
            interaction_nodes: Some(n2),
        } => PayoffModel::split(strategies.clone(), axes(xb, *n1), axes(db, *n2))?,
        Ansatz::FullPair {
            lo: Some(lo),
            hi: Some(hi),
            nodes: Some(n),
        } => {
            let d = strategies.state_dim();
            PayoffModel::full_pair(strategies.clone(), vec![Axis::bounded(*lo, *hi, *n); 2 * d])?
        }
        Ansatz::Pedestrian {
            self_nodes: Some(n1),
            box_lo: Some(lo),
            box_hi: Some(hi),
            interaction_nodes: Some(n2),
            ..
        } => PayoffModel::pedestrian(strategies.clone(), *n1, *lo, *hi, *n2)?,
        Ansatz::File { path } => {
            PayoffModel::load(path).map_err(|e| io_failure(path, e))?
        }
        _ => unreachable!("ansatz resolved before building"),
    };
    Ok(model)
}

pub fn infer(common: &Common, flags: InferFlags) -> Result<(), Failure> {
    let reg = match (flags.reg1, flags.reg2) {
        (None, None) => None,
        (a, b) => Some([a.or(b).unwrap_or(0.0), b.or(a).unwrap_or(0.0)]),
    };
    let doc: InferDoc = config::load(
        common.config.as_deref(),
        json!({
            "dataset": flags.dataset, "functional": flags.functional, "reg": reg,
            "eps": flags.eps, "lambda": flags.lambda, "max_iter": flags.max_iter,
            "grad_tol": flags.grad_tol, "seed": common.seed, "out": common.out, "report": flags.report,
        }),
    )?;
    let dataset_path = doc
        .dataset
        .clone()
        .ok_or_else(|| Failure::config("infer needs a dataset (--dataset or `dataset` in the config)"))?;
    let ds = load_dataset(&dataset_path)?;
    let functional: Functional = match &doc.functional {
        Some(f) => f.parse()?,
        None if ds.has_headings() => Functional::PedestrianVelocity,
        None if ds.has_strategies() => Functional::Sigma,
        None => Functional::Velocity,
    };
    let ansatz = resolve_ansatz(doc.ansatz.clone(), functional, &ds);
    let strategies = match (&ansatz, &doc.strategies, &ds.meta.strategies) {
        (Ansatz::Pedestrian { rates: Some(r), .. }, _, _) => StrategySpace::heading(r)?,
        (Ansatz::File { path }, _, _) => PayoffModel::load(path).map_err(|e| io_failure(path, e))?.strategies().clone(),
        (_, Some(s), _) | (_, None, Some(s)) => s.clone(),
        _ => {
            return Err(Failure::config(
                "the dataset carries no strategy set; give `strategies` in the config or run `reconstruct` first",
            ))
        }
    };
    let pedestrian = matches!(ansatz, Ansatz::Pedestrian { .. });
    let default_reg = if ds.meta.dim == 1 && !pedestrian { 1e-6 } else { 1e-5 };
    let defaults = LbfgsSettings::default();
    let out = doc.out.clone().unwrap_or_else(|| "payoff.json".into());
    let resolved = InferResolved {
        dataset: dataset_path,
        functional,
        strategies,
        ansatz,
        reg: doc.reg.unwrap_or([default_reg; 2]),
        eps: doc.eps.or(ds.meta.eps).unwrap_or(1.0),
        lambda: doc.lambda.or(ds.meta.lambda),
        settings: LbfgsSettings {
            max_iter: doc.max_iter.unwrap_or(defaults.max_iter),
            grad_tol: doc.grad_tol.unwrap_or(defaults.grad_tol),
            memory: doc.memory.unwrap_or(defaults.memory),
        },
        seed: doc.seed.unwrap_or(0),
        report: doc.report.clone().unwrap_or_else(|| config::suffixed(&out, ".report.json")),
        out,
    };
    let model = build_model(&resolved.ansatz, &resolved.strategies)?;
    let mut problem = InferenceProblem::new(&ds, model, functional).with_reg(resolved.reg[0], resolved.reg[1]).with_eps(resolved.eps);
    problem.lambda = resolved.lambda;
    problem.settings = resolved.settings;
    config::echo(&resolved.out, &resolved)?;

    let report = inference::minimize(&problem)?;
    let mut fitted = report.fitted(&problem.model)?;
    if fitted.variant() == Variant::FullPair {
        fitted.gauge_fix();
    }
    fitted.save(&resolved.out).map_err(|e| io_failure(&resolved.out, e))?;
    std::fs::write(&resolved.report, report.to_json()?).map_err(|e| io_failure(&resolved.report, e))?;
    println!(
        "{functional}: status {:?}, {} iterations, data term {:.6e}, grad norm {:.3e}; wrote {} and {}",
        report.status,
        report.iterations,
        report.final_data_term,
        report.grad_norm,
        resolved.out.display(),
        resolved.report.display()
    );
    if report.skipped_pairs > 0 {
        println!("skipped {} snapshot pairs that straddle realizations", report.skipped_pairs);
    }
    if report.status == Status::LineSearchFailed {
        return Err(Failure::new(code::OPTIMIZER, "line search failed; best iterate written"));
    }
    Ok(())
}

pub fn reconstruct(common: &Common, flags: ReconstructFlags) -> Result<(), Failure> {
    let strategies = flags.strategies.map(|s| StrategySpace::scalar(&s)).transpose()?;
    let doc: ReconstructDoc = config::load(
        common.config.as_deref(),
        json!({
            "dataset": flags.dataset, "eps": flags.eps, "strategies": strategies,
            "seed": common.seed, "out": common.out,
        }),
    )?;
    let dataset_path = doc
        .dataset
        .clone()
        .ok_or_else(|| Failure::config("reconstruct needs a dataset (--dataset or `dataset` in the config)"))?;
    let ds = load_dataset(&dataset_path)?;
    let resolved = ReconstructResolved {
        strategies: doc
            .strategies
            .clone()
            .or_else(|| ds.meta.strategies.clone())
            .ok_or_else(|| Failure::config("no strategy set: give --strategies or `strategies` in the config"))?,
        eps: doc.eps.or(ds.meta.eps).unwrap_or(1.0),
        seed: doc.seed.unwrap_or(0),
        out: doc.out.clone().unwrap_or_else(|| "reconstructed.ndjson".into()),
        dataset: dataset_path,
    };
    config::echo(&resolved.out, &resolved)?;
    let rec = reconstruct_dataset(&ds, &resolved.strategies, resolved.eps)?;
    if !rec.violations.is_empty() {
        for (s, i) in rec.violations.iter().take(20) {
            eprintln!("snapshot {s}, agent {i}: velocity {:?} outside the hull", ds.snapshots[*s].v.row(*i));
        }
        if rec.violations.len() > 20 {
            eprintln!("... and {} more", rec.violations.len() - 20);
        }
        return Err(Failure::new(
            code::HULL,
            format!("{} velocities lie outside the convex hull of the strategy set", rec.violations.len()),
        ));
    }
    if rec.max_residual > 1e-8 {
        return Err(Failure::new(
            code::VALIDATION,
            format!("reconstructed strategies miss the observed velocities by {:.3e}", rec.max_residual),
        ));
    }
    if !rec.near_boundary.is_empty() {
        eprintln!("warning: {} velocities lie within 1e-9 of the hull boundary", rec.near_boundary.len());
    }
    save_dataset(&rec.dataset, &resolved.out, None)?;
    println!(
        "wrote {}: {} snapshots, max residual {:.3e}",
        resolved.out.display(),
        rec.dataset.snapshots.len(),
        rec.max_residual
    );
    Ok(())
}

pub fn rollout(common: &Common, flags: RolloutFlags) -> Result<(), Failure> {
    let doc: RolloutDoc = config::load(
        common.config.as_deref(),
        json!({
            "payoff": flags.payoff, "dataset": flags.dataset, "model": flags.model,
            "agents": flags.agents, "realizations": flags.realizations, "dt": flags.dt,
            "steps": flags.steps, "subsample": flags.subsample, "eps": flags.eps,
            "lambda": flags.lambda, "seed": common.seed, "out": common.out, "csv": flags.csv,
        }),
    )?;
    let source = doc
        .payoff
        .clone()
        .ok_or_else(|| Failure::config("rollout needs a payoff (--payoff or `payoff` in the config)"))?;
    let payoff = config::load_payoff(&source, doc.strategies.as_ref())?;
    let kind = config::parse_model(doc.model.as_deref().unwrap_or("fast_reaction"))?;
    let reference = doc.dataset.as_deref().map(load_dataset).transpose()?;

    let space = payoff.strategies();
    let heading = space.velocity_map() == VelocityMap::Heading;
    let from_data = match &reference {
        Some(ds) => {
            let mut starts = Vec::new();
            for run in ds.realizations() {
                starts.push(run[0].states()?.to_rows());
            }
            Some(InitialSampler::Explicit { positions: starts })
        }
        None => None,
    };
    let meta = reference.as_ref().map(|d| &d.meta);
    let resolved = RolloutResolved {
        payoff: source,
        strategies: doc.strategies.clone(),
        dataset: doc.dataset.clone(),
        model: config::model_name(kind),
        agents: doc.agents.or(meta.map(|m| m.agents)).unwrap_or(8),
        realizations: doc
            .realizations
            .or(reference.as_ref().map(|d| d.realizations().len()))
            .unwrap_or(1),
        dt: doc.dt.or(meta.map(|m| m.dt)).unwrap_or(0.02),
        steps: doc.steps.or(meta.map(|m| m.steps)).unwrap_or(10),
        subsample: doc.subsample.or(meta.map(|m| m.subsample)).unwrap_or(1),
        eps: doc.eps.or(meta.and_then(|m| m.eps)).unwrap_or(1.0),
        lambda: doc.lambda.or(meta.and_then(|m| m.lambda)),
        seed: doc.seed.or(meta.map(|m| m.seed)).unwrap_or(0),
        initial: doc.initial.clone().or(from_data).unwrap_or_else(|| {
            if heading {
                InitialSampler::pedestrian_default()
            } else {
                uniform_box(space.state_dim())
            }
        }),
        out: doc.out.clone().unwrap_or_else(|| "rollout.ndjson".into()),
        csv: doc.csv.clone(),
    };
    let cfg = SimConfig {
        dynamics: game_dynamics(kind, resolved.eps, resolved.lambda)?,
        agents: resolved.agents,
        dt: resolved.dt,
        steps: resolved.steps,
        subsample: resolved.subsample,
        realizations: resolved.realizations,
        seed: resolved.seed,
        initial: resolved.initial.clone(),
    };
    cfg.validate()?;
    config::echo(&resolved.out, &resolved)?;
    let mut ds = run_simulation(&cfg, Some(payoff.as_ref()))?;
    ds.meta.payoff = Some(resolved.payoff.clone());
    save_dataset(&ds, &resolved.out, resolved.csv.as_deref())?;
    print!("wrote {}: {} snapshots", resolved.out.display(), ds.snapshots.len());
    if let Some(refd) = &reference {
        match max_gap(&ds, refd)? {
            Some(g) => print!(", max norm_N gap to the dataset at matching times {g:.3e}"),
            None => print!(", no snapshot times in common with the dataset"),
        }
    }
    println!();
    Ok(())
}

/// Largest `norm_N` distance between snapshots of equal realization and time.
fn max_gap(a: &TrajectoryDataset, b: &TrajectoryDataset) -> Result<Option<f64>, Failure> {
    let mut worst: Option<f64> = None;
    for s in &a.snapshots {
        let hit = b
            .snapshots
            .iter()
            .find(|o| o.r == s.r && (o.t - s.t).abs() <= 1e-9 * s.t.abs().max(1.0));
        if let Some(o) = hit {
            if o.x.len() == s.x.len() {
                let g = norm_n(&s.x, &o.x)?;
                worst = Some(worst.map_or(g, |w| w.max(g)));
            }
        }
    }
    Ok(worst)
}

pub fn validate(common: &Common, flags: ValidateFlags) -> Result<(), Failure> {
    let tasks = (!flags.tasks.is_empty()).then_some(flags.tasks);
    let doc: ValidateDoc = config::load(
        common.config.as_deref(),
        json!({ "tasks": tasks, "seed": common.seed, "format": flags.format, "out": common.out }),
    )?;
    let names = doc.tasks.clone().unwrap_or_else(|| vec!["all".into()]);
    let mut selected = Vec::new();
    for n in &names {
        if n == "all" {
            selected.extend(Task::ALL);
        } else {
            selected.push(n.parse::<Task>()?);
        }
    }
    let resolved = ValidateResolved {
        tasks: selected.iter().map(|t| t.name().to_string()).collect(),
        seed: doc.seed.unwrap_or(1),
        format: doc.format.clone().unwrap_or_else(|| "csv".into()),
        out: doc.out.clone(),
    };
    if !matches!(resolved.format.as_str(), "csv" | "json") {
        return Err(Failure::config(format!("unknown format {:?}; expected csv or json", resolved.format)));
    }
    if let Some(out) = &resolved.out {
        config::echo(out, &resolved)?;
    }
    let mut rows: Vec<ValidationRow> = Vec::new();
    for t in &selected {
        rows.extend(validation::run_task(*t, resolved.seed)?);
    }
    let mut buf = Vec::new();
    if resolved.format == "csv" {
        validation::write_csv(&rows, &mut buf)?;
    } else {
        buf = evogame::jsonfmt::to_string(&rows).map_err(evogame::Error::from)?.into_bytes();
        buf.push(b'\n');
    }
    match &resolved.out {
        Some(p) => std::fs::write(p, &buf).map_err(|e| io_failure(p, e))?,
        None => io::stdout().write_all(&buf).map_err(|e| Failure::config(e.to_string()))?,
    }
    let failed: Vec<&ValidationRow> = rows.iter().filter(|r| !r.pass).collect();
    if failed.is_empty() {
        return Ok(());
    }
    for r in &failed {
        eprintln!("FAILED {},{},{:e},{:e}", r.task, r.metric, r.value, r.threshold);
    }
    Err(Failure::new(code::VALIDATION, format!("{} validation rows failed", failed.len())))
}
