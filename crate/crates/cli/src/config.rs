//! Run configuration documents. A document is read from `--config`, command
//! line flags are laid over it, and the fully resolved form is echoed next to
//! the output.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use evogame::inference::{Functional, LbfgsSettings};
use evogame::payoff::{make_builtin_payoff, Payoff, PayoffModel};
use evogame::sim::{InitialSampler, ModelKind, PedestrianParams};
use evogame::{jsonfmt, StrategySpace};

use crate::Failure;

/// Reads the config document (or `{}`) and overlays the non-null flag values.
pub fn load<T: DeserializeOwned>(path: Option<&Path>, flags: Value) -> Result<T, Failure> {
    let mut doc = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::config(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::config(format!("config {}: {e}", p.display())))?
        }
        None => Value::Object(Map::new()),
    };
    let obj = doc
        .as_object_mut()
        .ok_or_else(|| Failure::config("config must be a JSON object"))?;
    if let Value::Object(over) = flags {
        for (k, v) in over {
            if !v.is_null() {
                obj.insert(k, v);
            }
        }
    }
    serde_json::from_value(doc).map_err(|e| Failure::config(format!("config: {e}")))
}

/// Writes the resolved config to `<out>.config.json`.
pub fn echo<T: Serialize>(out: &Path, resolved: &T) -> Result<PathBuf, Failure> {
    let path = suffixed(out, ".config.json");
    let mut text = jsonfmt::to_string(resolved).map_err(evogame::Error::from)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

pub fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Accepts `fast-reaction` as well as `fast_reaction`.
pub fn parse_model(name: &str) -> Result<ModelKind, Failure> {
    serde_json::from_value(Value::String(name.replace('-', "_")))
        .map_err(|_| Failure::config(format!("unknown model {name:?}; expected full-entropic, undisclosed, fast-reaction, newtonian or pedestrian")))
}

pub fn model_name(kind: ModelKind) -> String {
    match serde_json::to_value(kind) {
        Ok(Value::String(s)) => s,
        _ => unreachable!("model kinds serialize to strings"),
    }
}

/// `builtin:NAME` or a path to a payoff file.
pub fn load_payoff(source: &str, strategies: Option<&StrategySpace>) -> Result<Box<dyn Payoff>, Failure> {
    if let Some(name) = source.strip_prefix("builtin:") {
        Ok(Box::new(make_builtin_payoff(name, strategies.cloned())?))
    } else {
        if strategies.is_some() {
            return Err(Failure::config("`strategies` only applies to built-in payoffs; a payoff file carries its own"));
        }
        let model = PayoffModel::load(source)
            .map_err(|e| Failure::config(format!("cannot load payoff {source}: {e}")))?;
        Ok(Box::new(model))
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateDoc {
    pub model: Option<String>,
    pub payoff: Option<String>,
    pub strategies: Option<StrategySpace>,
    #[serde(alias = "n")]
    pub agents: Option<usize>,
    pub realizations: Option<usize>,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub subsample: Option<usize>,
    pub eps: Option<f64>,
    pub lambda: Option<f64>,
    pub seed: Option<u64>,
    pub initial: Option<InitialSampler>,
    pub pedestrian: Option<PedestrianParams>,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulateResolved {
    pub model: String,
    pub payoff: Option<String>,
    pub strategies: Option<StrategySpace>,
    pub agents: usize,
    pub realizations: usize,
    pub dt: f64,
    pub steps: usize,
    pub subsample: usize,
    pub eps: Option<f64>,
    pub lambda: Option<f64>,
    pub seed: u64,
    pub initial: InitialSampler,
    pub pedestrian: Option<PedestrianParams>,
    pub out: PathBuf,
    pub csv: Option<PathBuf>,
}

/// Grid ansatz for inference. Unset fields are filled from the dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Ansatz {
    Split {
        x_box: Option<Vec<[f64; 2]>>,
        dx_box: Option<Vec<[f64; 2]>>,
        self_nodes: Option<usize>,
        interaction_nodes: Option<usize>,
    },
    FullPair {
        lo: Option<f64>,
        hi: Option<f64>,
        nodes: Option<usize>,
    },
    Pedestrian {
        rates: Option<Vec<f64>>,
        self_nodes: Option<usize>,
        box_lo: Option<[f64; 2]>,
        box_hi: Option<[f64; 2]>,
        interaction_nodes: Option<[usize; 3]>,
    },
    /// Start from the coefficients and grids stored in a payoff file.
    File { path: PathBuf },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferDoc {
    pub dataset: Option<PathBuf>,
    pub functional: Option<String>,
    pub strategies: Option<StrategySpace>,
    pub ansatz: Option<Ansatz>,
    pub reg: Option<[f64; 2]>,
    pub eps: Option<f64>,
    pub lambda: Option<f64>,
    pub max_iter: Option<usize>,
    pub grad_tol: Option<f64>,
    pub memory: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InferResolved {
    pub dataset: PathBuf,
    pub functional: Functional,
    pub strategies: StrategySpace,
    pub ansatz: Ansatz,
    pub reg: [f64; 2],
    pub eps: f64,
    pub lambda: Option<f64>,
    #[serde(flatten)]
    pub settings: LbfgsSettings,
    pub seed: u64,
    pub out: PathBuf,
    pub report: PathBuf,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructDoc {
    pub dataset: Option<PathBuf>,
    pub strategies: Option<StrategySpace>,
    pub eps: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReconstructResolved {
    pub dataset: PathBuf,
    pub strategies: StrategySpace,
    pub eps: f64,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutDoc {
    pub payoff: Option<String>,
    pub strategies: Option<StrategySpace>,
    pub dataset: Option<PathBuf>,
    pub model: Option<String>,
    #[serde(alias = "n")]
    pub agents: Option<usize>,
    pub realizations: Option<usize>,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub subsample: Option<usize>,
    pub eps: Option<f64>,
    pub lambda: Option<f64>,
    pub seed: Option<u64>,
    pub initial: Option<InitialSampler>,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RolloutResolved {
    pub payoff: String,
    pub strategies: Option<StrategySpace>,
    pub dataset: Option<PathBuf>,
    pub model: String,
    pub agents: usize,
    pub realizations: usize,
    pub dt: f64,
    pub steps: usize,
    pub subsample: usize,
    pub eps: f64,
    pub lambda: Option<f64>,
    pub seed: u64,
    pub initial: InitialSampler,
    pub out: PathBuf,
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateDoc {
    pub tasks: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub format: Option<String>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidateResolved {
    pub tasks: Vec<String>,
    pub seed: u64,
    pub format: String,
    pub out: Option<PathBuf>,
}
