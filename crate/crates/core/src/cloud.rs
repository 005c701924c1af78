use crate::error::{Error, Result};

/// `N` points in `R^d`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Cloud {
    dim: usize,
    data: Vec<f64>,
}

impl Cloud {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("point dimension must be positive"));
        }
        if data.len() % dim != 0 {
            return Err(Error::domain(format!(
                "{} coordinates do not split into points of dimension {dim}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite coordinate"));
        }
        Ok(Cloud { dim, data })
    }

    pub fn zeros(n: usize, dim: usize) -> Self {
        Cloud {
            dim,
            data: vec![0.0; n * dim],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(1);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            Error::check_dim(dim, row.len())?;
            data.extend_from_slice(row);
        }
        Cloud::new(dim, data)
    }

    /// One-dimensional cloud from scalars.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Cloud::new(1, values.to_vec())
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Explicit Euler update `x_i += dt * v_i`.
    pub fn advance(&mut self, velocities: &Cloud, dt: f64) -> Result<()> {
        Error::check_dim(self.data.len(), velocities.data.len())?;
        for (x, v) in self.data.iter_mut().zip(&velocities.data) {
            *x += dt * v;
        }
        Ok(())
    }
}
