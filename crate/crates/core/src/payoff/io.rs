use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::{Axis, Grid};
use super::model::{PayoffModel, Variant};
use super::Payoff;
use crate::error::{Error, Result};
use crate::jsonfmt;
use crate::strategy::StrategySpace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDocument {
    pub axes: Vec<Axis>,
    pub slots: usize,
    pub coefficients: Vec<f64>,
}

/// On-disk form of a [`PayoffModel`]: coefficients are flattened row-major
/// over the node grid with the strategy slot fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffDocument {
    pub variant: Variant,
    pub strategies: StrategySpace,
    pub grids: Vec<GridDocument>,
}

impl From<&PayoffModel> for PayoffDocument {
    fn from(m: &PayoffModel) -> Self {
        PayoffDocument {
            variant: m.variant(),
            strategies: m.strategies().clone(),
            grids: m
                .grids()
                .iter()
                .map(|g| GridDocument {
                    axes: g.axes().to_vec(),
                    slots: g.slots(),
                    coefficients: g.values().to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<PayoffDocument> for PayoffModel {
    type Error = Error;
    fn try_from(doc: PayoffDocument) -> Result<Self> {
        let grids = doc
            .grids
            .into_iter()
            .map(|g| Grid::with_values(g.axes, g.slots, g.coefficients))
            .collect::<Result<Vec<_>>>()?;
        PayoffModel::from_grids(doc.variant, doc.strategies, grids)
    }
}

impl PayoffModel {
    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        jsonfmt::to_writer(&mut w, &PayoffDocument::from(self))?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let doc: PayoffDocument = serde_json::from_reader(r)?;
        doc.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_json(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_json(std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_byte_identical() {
        let s = StrategySpace::scalar(&[-1.0, 1.0]).unwrap();
        let mut m = PayoffModel::split(s, vec![Axis::bounded(-1.0, 1.0, 4)], vec![Axis::bounded(-2.0, 2.0, 5)]).unwrap();
        let c: Vec<f64> = (0..m.n_coefficients()).map(|i| (i as f64 * 0.37).sin() / 3.0).collect();
        m.set_coefficients(&c).unwrap();
        let mut a = Vec::new();
        m.write_json(&mut a).unwrap();
        let back = PayoffModel::read_json(a.as_slice()).unwrap();
        assert_eq!(back, m);
        let mut b = Vec::new();
        back.write_json(&mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_wrong_coefficient_count() {
        let json = r#"{"variant":"split","strategies":{"points":[[-1.0],[1.0]],"velocity_map":"identity"},
            "grids":[{"axes":[{"lo":0.0,"hi":1.0,"nodes":2}],"slots":2,"coefficients":[0.0]},
                     {"axes":[{"lo":0.0,"hi":1.0,"nodes":2}],"slots":2,"coefficients":[0.0,0.0,0.0,0.0]}]}"#;
        assert!(PayoffModel::read_json(json.as_bytes()).is_err());
    }
}
