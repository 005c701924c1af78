//! Distances between particle clouds and convergence-rate fits.

use crate::cloud::Cloud;
use crate::error::{Error, Result};

/// Uniformly weighted point cloud.
pub type ParticleCloud = Cloud;

/// Largest cloud size accepted by the exact assignment in dimension ≥ 2.
pub const MAX_ASSIGNMENT_SIZE: usize = 1024;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `(1/N) Σ_i ‖a_i − b_i‖` over index-aligned points.
pub fn norm_n(a: &ParticleCloud, b: &ParticleCloud) -> Result<f64> {
    Error::check_dim(a.len(), b.len())?;
    Error::check_dim(a.dim(), b.dim())?;
    if a.is_empty() {
        return Err(Error::domain("empty cloud"));
    }
    Ok(a.rows().zip(b.rows()).map(|(x, y)| dist(x, y)).sum::<f64>() / a.len() as f64)
}

/// Wasserstein-1 distance between the empirical measures of two clouds.
///
/// In one dimension the clouds may differ in size and the distance is the
/// integral of the quantile difference. In higher dimensions both clouds must
/// have the same size (at most [`MAX_ASSIGNMENT_SIZE`]) and the value is the
/// optimal assignment cost.
pub fn wasserstein1_empirical(a: &ParticleCloud, b: &ParticleCloud) -> Result<f64> {
    Error::check_dim(a.dim(), b.dim())?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("empty cloud"));
    }
    if a.dim() == 1 {
        return Ok(w1_sorted(a.as_slice(), b.as_slice()));
    }
    Error::check_dim(a.len(), b.len())?;
    if a.len() > MAX_ASSIGNMENT_SIZE {
        return Err(Error::domain(format!(
            "exact assignment is limited to {MAX_ASSIGNMENT_SIZE} points; compare 1-D projections instead"
        )));
    }
    let n = a.len();
    let cost: Vec<f64> = a.rows().flat_map(|x| b.rows().map(move |y| dist(x, y))).collect();
    let (total, _) = assignment(n, &cost);
    Ok(total / n as f64)
}

/// `∫₀¹ |F_a⁻¹(s) − F_b⁻¹(s)| ds` for sorted quantile functions.
fn w1_sorted(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if a.len() == b.len() {
        return a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64;
    }
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut s = 0.0;
    let mut total = 0.0;
    while i < na && j < nb {
        let next_a = (i + 1) as f64 / na as f64;
        let next_b = (j + 1) as f64 / nb as f64;
        let next = next_a.min(next_b);
        total += (next - s) * (a[i] - b[j]).abs();
        s = next;
        if next_a <= next {
            i += 1;
        }
        if next_b <= next {
            j += 1;
        }
    }
    total
}

/// Minimum-cost perfect matching on a dense `n×n` cost matrix (row-major) by
/// the shortest augmenting path method. Returns the cost and, for each row,
/// the assigned column.
pub fn assignment(n: usize, cost: &[f64]) -> (f64, Vec<usize>) {
    assert_eq!(cost.len(), n * n);
    // Potentials and matching use 1-based indices with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut rows = vec![0usize; n];
    for j in 1..=n {
        rows[matched[j] - 1] = j - 1;
    }
    let total = rows.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    (total, rows)
}

/// Least-squares slope of `log err` against `log x`.
pub fn fit_rate(xs: &[f64], errs: &[f64]) -> Result<f64> {
    Error::check_dim(xs.len(), errs.len())?;
    if xs.len() < 3 {
        return Err(Error::domain("a rate fit needs at least three points"));
    }
    if xs.iter().chain(errs).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::domain("rate fits need strictly positive finite values"));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = errs.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("rate fits need distinct abscissae"));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c1(v: &[f64]) -> Cloud {
        Cloud::from_scalars(v).unwrap()
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm_n(&c1(&[0.0, 0.0]), &c1(&[1.0, 3.0])).unwrap(), 2.0);
        assert_eq!(norm_n(&c1(&[0.5, 2.0]), &c1(&[0.5, 2.0])).unwrap(), 0.0);
        assert!(norm_n(&c1(&[0.0]), &c1(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn w1_examples() {
        assert_eq!(wasserstein1_empirical(&c1(&[0.0]), &c1(&[1.0])).unwrap(), 1.0);
        assert_eq!(wasserstein1_empirical(&c1(&[0.0, 1.0]), &c1(&[0.0, 0.0])).unwrap(), 0.5);
        // unequal sizes: δ₀ against (δ₀ + δ₁)/2
        assert_eq!(wasserstein1_empirical(&c1(&[0.0]), &c1(&[0.0, 1.0])).unwrap(), 0.5);
    }

    #[test]
    fn w1_planar_assignment() {
        let a = Cloud::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let b = Cloud::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert_relative_eq!(wasserstein1_empirical(&a, &b).unwrap(), 1.0);
        let big = Cloud::zeros(1025, 2);
        assert!(wasserstein1_empirical(&big, &big).is_err());
    }

    #[test]
    fn assignment_small_brute_force() {
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let (c, rows) = assignment(3, &cost);
        assert_eq!(c, 5.0);
        assert_eq!(rows, vec![1, 0, 2]);
    }

    #[test]
    fn rate_examples() {
        let xs = [1.0, 10.0, 100.0, 1000.0];
        let inv_sqrt: Vec<f64> = xs.iter().map(|x: &f64| 1.0 / x.sqrt()).collect();
        assert!((fit_rate(&xs, &inv_sqrt).unwrap() + 0.5).abs() < 1e-12);
        assert!(fit_rate(&xs, &[2.0; 4]).unwrap().abs() < 1e-15);
        let inv: Vec<f64> = xs.iter().map(|x| 3.0 / x).collect();
        assert!((fit_rate(&xs, &inv).unwrap() + 1.0).abs() < 1e-12);
        assert!(fit_rate(&xs, &[1.0, 0.0, 1.0, 1.0]).is_err());
        assert!(fit_rate(&xs[..2], &[1.0, 1.0]).is_err());
    }
}
