//! Trajectory datasets and their newline-delimited JSON form.
//!
//! The first line of a dataset file is the metadata object; every following
//! line is one snapshot `{r, t, x, v, sigma?, theta?, theta_bar?}`.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cloud::Cloud;
use crate::error::{Error, Result};
use crate::jsonfmt;
use crate::sim::{ModelKind, PedestrianParams};
use crate::strategy::{self, MixedStrategy, StrategySpace, VelocityMap};

/// Tolerance for `v = (1/K) Σ u_k σ_k` on strategy-bearing snapshots.
pub const CONSISTENCY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub kind: ModelKind,
    /// Dimension of the stored positions.
    pub dim: usize,
    pub agents: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategies: Option<StrategySpace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub dt: f64,
    pub steps: usize,
    pub subsample: usize,
    pub seed: u64,
    pub realizations: usize,
    /// Where the generating payoff came from (built-in name or file).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pedestrian: Option<PedestrianParams>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    /// Realization index.
    pub r: usize,
    pub t: f64,
    pub x: Cloud,
    pub v: Cloud,
    pub sigma: Option<Vec<MixedStrategy>>,
    pub theta: Option<Vec<f64>>,
    pub theta_bar: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct SnapshotRecord {
    r: usize,
    t: f64,
    x: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta_bar: Option<Vec<f64>>,
}

impl Snapshot {
    /// Pedestrian states as rows `(x, y, θ, θ̄)`.
    pub fn heading_states(&self) -> Result<Cloud> {
        let (Some(th), Some(tb)) = (&self.theta, &self.theta_bar) else {
            return Err(Error::config("snapshot has no heading fields"));
        };
        let mut data = Vec::with_capacity(self.x.len() * 4);
        for (i, p) in self.x.rows().enumerate() {
            data.extend_from_slice(&[p[0], p[1], th[i], tb[i]]);
        }
        Cloud::new(4, data)
    }

    /// State rows the payoff acts on: positions, or pedestrian states.
    pub fn states(&self) -> Result<Cloud> {
        if self.theta.is_some() {
            self.heading_states()
        } else {
            Ok(self.x.clone())
        }
    }

    fn to_record(&self) -> SnapshotRecord {
        SnapshotRecord {
            r: self.r,
            t: self.t,
            x: self.x.to_rows(),
            v: self.v.to_rows(),
            sigma: self
                .sigma
                .as_ref()
                .map(|s| s.iter().map(|m| m.to_vec()).collect()),
            theta: self.theta.clone(),
            theta_bar: self.theta_bar.clone(),
        }
    }

    fn from_record(rec: SnapshotRecord, dim: usize) -> Result<Self> {
        let cloud = |rows: &[Vec<f64>]| -> Result<Cloud> {
            if rows.is_empty() {
                return Ok(Cloud::zeros(0, dim));
            }
            Cloud::from_rows(rows)
        };
        Ok(Snapshot {
            r: rec.r,
            t: rec.t,
            x: cloud(&rec.x)?,
            v: cloud(&rec.v)?,
            sigma: rec
                .sigma
                .map(|rows| rows.into_iter().map(MixedStrategy::from_raw).collect()),
            theta: rec.theta,
            theta_bar: rec.theta_bar,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryDataset {
    pub meta: DatasetMeta,
    /// Ordered by realization, then time.
    pub snapshots: Vec<Snapshot>,
}

impl TrajectoryDataset {
    pub fn has_strategies(&self) -> bool {
        !self.snapshots.is_empty() && self.snapshots.iter().all(|s| s.sigma.is_some())
    }

    pub fn has_headings(&self) -> bool {
        !self.snapshots.is_empty() && self.snapshots.iter().all(|s| s.theta.is_some() && s.theta_bar.is_some())
    }

    /// Snapshots grouped by realization, in file order.
    pub fn realizations(&self) -> Vec<&[Snapshot]> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.snapshots.len() {
            if i == self.snapshots.len() || self.snapshots[i].r != self.snapshots[start].r {
                if i > start {
                    out.push(&self.snapshots[start..i]);
                }
                start = i;
            }
        }
        out
    }

    /// Checks the structural invariants: per-realization times strictly
    /// increasing, strategies normalized and consistent with the stored
    /// velocities.
    pub fn validate(&self) -> Result<()> {
        let n = self.meta.agents;
        for (idx, s) in self.snapshots.iter().enumerate() {
            Error::check_dim(n, s.x.len())?;
            Error::check_dim(n, s.v.len())?;
            if idx > 0 {
                let p = &self.snapshots[idx - 1];
                if p.r == s.r && !(s.t > p.t) {
                    return Err(Error::config(format!("snapshot {idx}: times are not increasing")));
                }
            }
            let Some(sig) = &s.sigma else { continue };
            let space = self
                .meta
                .strategies
                .as_ref()
                .ok_or_else(|| Error::config("strategies stored without a strategy space"))?;
            Error::check_dim(n, sig.len())?;
            for (i, m) in sig.iter().enumerate() {
                Error::check_dim(space.k(), m.len())?;
                if m.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                    return Err(Error::config(format!("snapshot {idx}, agent {i}: invalid density")));
                }
                let defect = (strategy::mean(m) - 1.0).abs();
                if defect > strategy::NORMALIZATION_TOL * 10.0 {
                    return Err(Error::config(format!(
                        "snapshot {idx}, agent {i}: density mass defect {defect:e}"
                    )));
                }
                if space.velocity_map() == VelocityMap::Identity {
                    let v = strategy::strategy_velocity(s.x.row(i), m, space)?;
                    let gap = v.iter().zip(s.v.row(i)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    if gap > CONSISTENCY_TOL {
                        return Err(Error::config(format!(
                            "snapshot {idx}, agent {i}: velocity disagrees with strategy by {gap:e}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn write_ndjson<W: Write>(&self, mut w: W) -> Result<()> {
        jsonfmt::to_writer(&mut w, &self.meta)?;
        w.write_all(b"\n")?;
        for s in &self.snapshots {
            jsonfmt::to_writer(&mut w, &s.to_record())?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_ndjson<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::config("empty dataset file"))??;
        let meta: DatasetMeta = serde_json::from_str(&first)?;
        let mut snapshots = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: SnapshotRecord = serde_json::from_str(&line)?;
            snapshots.push(Snapshot::from_record(rec, meta.dim)?);
        }
        Ok(TrajectoryDataset { meta, snapshots })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_ndjson(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_ndjson(std::io::BufReader::new(f))
    }

    /// Writes `r,t,agent,x…,v…` rows for plotting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.meta.dim;
        let mut header = vec!["r".to_string(), "t".into(), "agent".into()];
        header.extend((0..d).map(|i| format!("x{i}")));
        header.extend((0..d).map(|i| format!("v{i}")));
        if self.has_headings() {
            header.extend(["theta".into(), "theta_bar".into()]);
        }
        writeln!(w, "{}", header.join(","))?;
        for s in &self.snapshots {
            for i in 0..s.x.len() {
                let mut row = vec![s.r.to_string(), format!("{:.16e}", s.t), i.to_string()];
                row.extend(s.x.row(i).iter().map(|v| format!("{v:.16e}")));
                row.extend(s.v.row(i).iter().map(|v| format!("{v:.16e}")));
                if let (Some(th), Some(tb)) = (&s.theta, &s.theta_bar) {
                    row.push(format!("{:.16e}", th[i]));
                    row.push(format!("{:.16e}", tb[i]));
                }
                writeln!(w, "{}", row.join(","))?;
            }
        }
        Ok(())
    }
}
