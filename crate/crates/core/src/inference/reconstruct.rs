//! Mixed strategies recovered from observed velocities.

use crate::dataset::TrajectoryDataset;
use crate::error::{Error, Result};
use crate::strategy::{self, MixedStrategy, StrategySpace, VelocityMap};

/// Distance to the hull boundary below which a reconstruction is flagged.
pub const BOUNDARY_WARN: f64 = 1e-9;

const MOMENT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub sigma: MixedStrategy,
    /// Centre `ṽ` of the Gaussian profile `σ(u) = A exp(−‖u − ṽ‖²/ε)`.
    pub v_tilde: Vec<f64>,
    /// `v` lies within [`BOUNDARY_WARN`] of the hull boundary; the profile is
    /// then very concentrated and poorly conditioned.
    pub near_boundary: bool,
}

/// Signed distance from `v` to the boundary of the convex hull of `U`
/// (positive inside). `None` when it is not computed (dimension above two).
fn hull_margin(v: &[f64], space: &StrategySpace) -> Option<f64> {
    let pts = space.points();
    match v.len() {
        1 => {
            let lo = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            Some((v[0] - lo).min(hi - v[0]))
        }
        2 => {
            let hull = convex_hull(pts.iter().map(|p| [p[0], p[1]]).collect());
            if hull.len() < 3 {
                return Some(f64::NEG_INFINITY);
            }
            let mut margin = f64::INFINITY;
            for i in 0..hull.len() {
                let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
                let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
                let cross = ex * (v[1] - a[1]) - ey * (v[0] - a[0]);
                margin = margin.min(cross / ex.hypot(ey));
            }
            Some(margin)
        }
        _ => None,
    }
}

/// Counter-clockwise hull by the monotone chain.
fn convex_hull(mut p: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &q in &p {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], q) <= 0.0 {
            lower.pop();
        }
        lower.push(q);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &q in p.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], q) <= 0.0 {
            upper.pop();
        }
        upper.push(q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// The convex dual `F(z) = log Σ_k exp(b_k + u_k·z) − v·z`, whose minimizer
/// matches the first moment of the tilted weights to `v`.
struct Dual<'a> {
    pts: &'a [Vec<f64>],
    b: Vec<f64>,
    v: &'a [f64],
}

impl Dual<'_> {
    /// Value, probabilities `p_k` and gradient `Σ p_k u_k − v`.
    fn eval(&self, z: &[f64], p: &mut [f64], grad: &mut [f64]) -> f64 {
        let d = z.len();
        let mut m = f64::NEG_INFINITY;
        for (k, pk) in p.iter_mut().enumerate() {
            *pk = self.b[k] + self.pts[k].iter().zip(z).map(|(u, zi)| u * zi).sum::<f64>();
            m = m.max(*pk);
        }
        let mut s = 0.0;
        for pk in p.iter_mut() {
            *pk = (*pk - m).exp();
            s += *pk;
        }
        p.iter_mut().for_each(|pk| *pk /= s);
        for i in 0..d {
            grad[i] = p.iter().zip(self.pts).map(|(pk, u)| pk * u[i]).sum::<f64>() - self.v[i];
        }
        m + s.ln() - self.v.iter().zip(z).map(|(a, b)| a * b).sum::<f64>()
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Solves `H x = r` for a small symmetric positive definite `H`.
fn cholesky_solve(h: &[f64], r: &[f64]) -> Option<Vec<f64>> {
    let d = r.len();
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s = h[i * d + j] - (0..j).map(|m| l[i * d + m] * l[j * d + m]).sum::<f64>();
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    let mut y = vec![0.0; d];
    for i in 0..d {
        y[i] = (r[i] - (0..i).map(|m| l[i * d + m] * y[m]).sum::<f64>()) / l[i * d + i];
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        x[i] = (y[i] - (i + 1..d).map(|m| l[m * d + i] * x[m]).sum::<f64>()) / l[i * d + i];
    }
    Some(x)
}

fn newton(dual: &Dual<'_>, z: &mut [f64]) -> bool {
    let d = z.len();
    let k = dual.pts.len();
    let (mut p, mut g) = (vec![0.0; k], vec![0.0; d]);
    let (mut pt, mut gt) = (vec![0.0; k], vec![0.0; d]);
    let mut f = dual.eval(z, &mut p, &mut g);
    for _ in 0..200 {
        if max_abs(&g) <= MOMENT_TOL {
            return true;
        }
        let mut h = vec![0.0; d * d];
        for (pk, u) in p.iter().zip(dual.pts) {
            for i in 0..d {
                for j in 0..d {
                    h[i * d + j] += pk * u[i] * u[j];
                }
            }
        }
        let mean: Vec<f64> = (0..d).map(|i| g[i] + dual.v[i]).collect();
        for i in 0..d {
            for j in 0..d {
                h[i * d + j] -= mean[i] * mean[j];
            }
        }
        let Some(step) = cholesky_solve(&h, &g) else {
            return false;
        };
        let slope = -g.iter().zip(&step).map(|(a, b)| a * b).sum::<f64>();
        let mut a = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let zt: Vec<f64> = z.iter().zip(&step).map(|(zi, s)| zi - a * s).collect();
            let ft = dual.eval(&zt, &mut pt, &mut gt);
            if ft <= f + 1e-4 * a * slope || max_abs(&gt) < max_abs(&g) {
                z.copy_from_slice(&zt);
                f = ft;
                std::mem::swap(&mut p, &mut pt);
                std::mem::swap(&mut g, &mut gt);
                accepted = true;
                break;
            }
            a *= 0.5;
        }
        if !accepted || max_abs(z) > 1e12 {
            return false;
        }
    }
    max_abs(&g) <= MOMENT_TOL
}

/// Cyclic bisection on each coordinate of the dual gradient.
fn coordinate_bisection(dual: &Dual<'_>, z: &mut [f64]) -> bool {
    let d = z.len();
    let k = dual.pts.len();
    let (mut p, mut g) = (vec![0.0; k], vec![0.0; d]);
    for _ in 0..500 {
        dual.eval(z, &mut p, &mut g);
        if max_abs(&g) <= MOMENT_TOL {
            return true;
        }
        for i in 0..d {
            // ∂F/∂z_i is non-decreasing in z_i.
            let mut partial = |zi: f64, z: &mut [f64]| {
                z[i] = zi;
                dual.eval(z, &mut p, &mut g);
                g[i]
            };
            let z0 = z[i];
            let (mut lo, mut hi) = (z0 - 1.0, z0 + 1.0);
            let mut width = 1.0;
            while partial(lo, z) > 0.0 {
                width *= 2.0;
                lo = z0 - width;
                if width > 1e12 {
                    return false;
                }
            }
            width = 1.0;
            while partial(hi, z) < 0.0 {
                width *= 2.0;
                hi = z0 + width;
                if width > 1e12 {
                    return false;
                }
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if partial(mid, z) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            z[i] = 0.5 * (lo + hi);
        }
    }
    dual.eval(z, &mut p, &mut g);
    max_abs(&g) <= MOMENT_TOL
}

/// The density `σ(u) = A exp(−‖u − ṽ‖²/ε)` whose mean velocity is `v`.
pub fn reconstruct_strategy_from_velocity(v: &[f64], space: &StrategySpace, eps: f64) -> Result<Reconstruction> {
    if space.velocity_map() != VelocityMap::Identity {
        return Err(Error::config("reconstruction assumes e(x, u) = u"));
    }
    Error::check_dim(space.strategy_dim(), v.len())?;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::domain(format!("eps must be positive, got {eps}")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("non-finite velocity"));
    }
    let margin = hull_margin(v, space);
    if matches!(margin, Some(m) if !(m > 0.0)) {
        return Err(Error::Infeasible(v.to_vec()));
    }
    let pts = space.points();
    let dual = Dual {
        pts,
        b: pts.iter().map(|u| -u.iter().map(|x| x * x).sum::<f64>() / eps).collect(),
        v,
    };
    let mut z = vec![0.0; v.len()];
    if !newton(&dual, &mut z) {
        z.fill(0.0);
        if !coordinate_bisection(&dual, &mut z) {
            return Err(Error::Infeasible(v.to_vec()));
        }
    }
    let k = pts.len();
    let (mut p, mut g) = (vec![0.0; k], vec![0.0; v.len()]);
    dual.eval(&z, &mut p, &mut g);
    let sigma: Vec<f64> = p.iter().map(|pk| pk * k as f64).collect();
    let mass = strategy::mean(&sigma);
    let sigma = sigma.into_iter().map(|s| s / mass).collect();
    Ok(Reconstruction {
        sigma: MixedStrategy::from_raw(sigma),
        v_tilde: z.iter().map(|zi| 0.5 * eps * zi).collect(),
        near_boundary: margin.is_some_and(|m| m < BOUNDARY_WARN),
    })
}

/// A dataset with strategies attached to every agent, plus the rows that could
/// not be reconstructed or sit close to the hull boundary.
#[derive(Clone, Debug)]
pub struct DatasetReconstruction {
    pub dataset: TrajectoryDataset,
    /// `(snapshot, agent)` pairs whose velocity is outside the hull.
    pub violations: Vec<(usize, usize)>,
    pub near_boundary: Vec<(usize, usize)>,
    /// Largest `‖(1/K) Σ u_k σ_k − v‖_∞` over reconstructed rows.
    pub max_residual: f64,
}

/// Reconstructs strategies for every stored velocity. Rows outside the hull
/// keep a uniform density and are listed in `violations`.
pub fn reconstruct_dataset(dataset: &TrajectoryDataset, space: &StrategySpace, eps: f64) -> Result<DatasetReconstruction> {
    let mut out = dataset.clone();
    out.meta.strategies = Some(space.clone());
    out.meta.eps.get_or_insert(eps);
    let mut violations = Vec::new();
    let mut near_boundary = Vec::new();
    let mut max_residual: f64 = 0.0;
    for (si, snap) in out.snapshots.iter_mut().enumerate() {
        let mut sig = Vec::with_capacity(snap.v.len());
        for i in 0..snap.v.len() {
            let v = snap.v.row(i);
            match reconstruct_strategy_from_velocity(v, space, eps) {
                Ok(rec) => {
                    if rec.near_boundary {
                        near_boundary.push((si, i));
                    }
                    let vr = strategy::strategy_velocity(snap.x.row(i), &rec.sigma, space)?;
                    max_residual = max_residual.max(vr.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
                    sig.push(rec.sigma);
                }
                Err(Error::Infeasible(_)) => {
                    violations.push((si, i));
                    sig.push(MixedStrategy::uniform(space.k()));
                }
                Err(e) => return Err(e),
            }
        }
        snap.sigma = Some(sig);
    }
    Ok(DatasetReconstruction {
        dataset: out,
        violations,
        near_boundary,
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(u: &[f64]) -> StrategySpace {
        StrategySpace::scalar(u).unwrap()
    }

    #[test]
    fn symmetric_two_point_set() {
        let r = reconstruct_strategy_from_velocity(&[0.0], &scalar(&[-1.0, 1.0]), 0.3).unwrap();
        assert!((r.sigma[0] - 1.0).abs() < 1e-12 && (r.sigma[1] - 1.0).abs() < 1e-12);
        let r = reconstruct_strategy_from_velocity(&[0.5], &scalar(&[-1.0, 1.0]), 0.3).unwrap();
        assert!((r.sigma[0] - 0.5).abs() < 1e-10 && (r.sigma[1] - 1.5).abs() < 1e-10, "{:?}", r.sigma);
    }

    #[test]
    fn three_points_match_grid_search() {
        let space = scalar(&[-1.0, 0.0, 1.0]);
        let eps = 1.0;
        let profile = |vt: f64| -> Vec<f64> {
            let w: Vec<f64> = [-1.0f64, 0.0, 1.0].iter().map(|u| (-(u - vt).powi(2) / eps).exp()).collect();
            let a = 3.0 / w.iter().sum::<f64>();
            w.iter().map(|x| a * x).collect()
        };
        let mut best = (f64::INFINITY, 0.0);
        let mut vt = -3.0;
        while vt <= 3.0 {
            let s = profile(vt);
            let gap = ((s[2] - s[0]) / 3.0 - 0.5).abs();
            if gap < best.0 {
                best = (gap, vt);
            }
            vt += 1e-5;
        }
        let oracle = profile(best.1);
        let r = reconstruct_strategy_from_velocity(&[0.5], &space, eps).unwrap();
        for (a, b) in r.sigma.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-4, "{:?} vs {oracle:?}", r.sigma);
        }
        assert!((r.v_tilde[0] - best.1).abs() < 1e-4);
    }

    #[test]
    fn outside_hull_is_infeasible() {
        let e = reconstruct_strategy_from_velocity(&[1.0], &scalar(&[-1.0, 1.0]), 1.0).unwrap_err();
        assert!(matches!(e, Error::Infeasible(_)));
        let square = StrategySpace::product(&[vec![-1.0, 1.0], vec![-1.0, 1.0]]).unwrap();
        assert!(reconstruct_strategy_from_velocity(&[0.2, 1.1], &square, 1.0).is_err());
    }

    #[test]
    fn two_dimensional_moment_condition() {
        let square = StrategySpace::product(&[vec![-1.0, 0.0, 1.0], vec![-1.0, 0.0, 1.0]]).unwrap();
        let v = [0.3, -0.7];
        let r = reconstruct_strategy_from_velocity(&v, &square, 0.5).unwrap();
        let m = strategy::strategy_velocity(&[0.0, 0.0], &r.sigma, &square).unwrap();
        assert!((m[0] - v[0]).abs() < 1e-10 && (m[1] - v[1]).abs() < 1e-10);
        assert!((strategy::mean(&r.sigma) - 1.0).abs() < 1e-12);
        assert!(!r.near_boundary);
    }

    #[test]
    fn near_boundary_is_flagged() {
        let r = reconstruct_strategy_from_velocity(&[1.0 - 5e-10], &scalar(&[-1.0, 0.0, 1.0]), 1.0).unwrap();
        assert!(r.near_boundary);
        let m = strategy::strategy_velocity(&[0.0], &r.sigma, &scalar(&[-1.0, 0.0, 1.0])).unwrap();
        assert!((m[0] - (1.0 - 5e-10)).abs() < 1e-10);
    }
}
