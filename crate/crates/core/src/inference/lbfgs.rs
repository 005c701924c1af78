//! Limited-memory BFGS with a backtracking line search.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsSettings {
    pub max_iter: usize,
    /// Stop once `‖∇f‖ ≤ grad_tol · max(1, |f|)`.
    pub grad_tol: f64,
    pub memory: usize,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        LbfgsSettings {
            max_iter: 500,
            grad_tol: 1e-6,
            memory: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub status: Status,
    /// Objective after every accepted iterate, starting with the initial one.
    pub trace: Vec<f64>,
}

const ARMIJO: f64 = 1e-4;
const MAX_TRIALS: usize = 40;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Two-loop recursion: returns `−H ∇f`.
fn direction(grad: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alpha = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alpha.push(a);
    }
    if let Some((s, y, _)) = mem.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|qi| *qi *= gamma);
    }
    for ((s, y, rho), a) in mem.iter().zip(alpha.into_iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|qi| *qi = -*qi);
    q
}

struct Trial {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

/// Backtracking with quadratic interpolation until sufficient decrease. When
/// the accepted step leaves much of the slope unused, one secant step along
/// the same line is tried as well.
fn line_search(
    f: &mut impl FnMut(&[f64]) -> (f64, Vec<f64>),
    x: &[f64],
    fx: f64,
    slope: f64,
    d: &[f64],
    mut step: f64,
) -> Option<Trial> {
    let at = |a: f64| -> Vec<f64> { x.iter().zip(d).map(|(xi, di)| xi + a * di).collect() };
    for _ in 0..MAX_TRIALS {
        let xn = at(step);
        let (fv, gv) = f(&xn);
        if fv.is_finite() && fv <= fx + ARMIJO * step * slope {
            let mut best = Trial { x: xn, f: fv, g: gv };
            let slope_new = dot(&best.g, d);
            if slope_new.abs() > 0.1 * slope.abs() && slope_new > slope {
                let a = step * slope / (slope - slope_new);
                if a.is_finite() && a > 0.0 && (a - step).abs() > 1e-3 * step {
                    let xs = at(a);
                    let (fs, gs) = f(&xs);
                    if fs.is_finite() && fs < best.f {
                        best = Trial { x: xs, f: fs, g: gs };
                    }
                }
            }
            return Some(best);
        }
        let next = if fv.is_finite() {
            let denom = 2.0 * (fv - fx - slope * step);
            if denom > 0.0 {
                -slope * step * step / denom
            } else {
                0.5 * step
            }
        } else {
            0.1 * step
        };
        step = next.clamp(0.1 * step, 0.5 * step);
    }
    None
}

/// Minimizes `f` from `x0`. `f` returns the value and gradient.
pub fn minimize_lbfgs(
    mut f: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    x0: Vec<f64>,
    settings: &LbfgsSettings,
) -> LbfgsOutcome {
    let mut x = x0;
    let (mut fx, mut gx) = f(&x);
    let mut trace = vec![fx];
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut status = Status::MaxIterations;
    let mut iterations = 0;
    let converged = |fv: f64, g: &[f64]| norm(g) <= settings.grad_tol * fv.abs().max(1.0);
    if converged(fx, &gx) {
        status = Status::Converged;
    }
    while status == Status::MaxIterations && iterations < settings.max_iter {
        let mut d = direction(&gx, &mem);
        let mut slope = dot(&gx, &d);
        if !(slope < 0.0) {
            mem.clear();
            d = gx.iter().map(|g| -g).collect();
            slope = dot(&gx, &d);
        }
        let first = if mem.is_empty() { 1.0 / norm(&gx).max(1.0) } else { 1.0 };
        let mut trial = line_search(&mut f, &x, fx, slope, &d, first);
        if trial.is_none() && !mem.is_empty() {
            mem.clear();
            d = gx.iter().map(|g| -g).collect();
            slope = dot(&gx, &d);
            trial = line_search(&mut f, &x, fx, slope, &d, 1.0 / norm(&gx).max(1.0));
        }
        let Some(t) = trial else {
            status = Status::LineSearchFailed;
            break;
        };
        let s: Vec<f64> = t.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = t.g.iter().zip(&gx).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if mem.len() == settings.memory.max(1) {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        x = t.x;
        fx = t.f;
        gx = t.g;
        iterations += 1;
        trace.push(fx);
        if converged(fx, &gx) {
            status = Status::Converged;
        }
    }
    LbfgsOutcome {
        grad_norm: norm(&gx),
        x,
        value: fx,
        iterations,
        status,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(n: usize) -> (Vec<f64>, Vec<f64>) {
        // A = B Bᵀ + I with a fixed dense B, b_i = i − n/2.
        let b: Vec<f64> = (0..n * n).map(|i| ((i * 7919 % 101) as f64 / 101.0) - 0.5).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|m| b[i * n + m] * b[j * n + m]).sum::<f64>();
            }
            a[i * n + i] += 1.0;
        }
        let rhs = (0..n).map(|i| i as f64 - n as f64 / 2.0).collect();
        (a, rhs)
    }

    fn solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs())).unwrap();
            for j in 0..n {
                a.swap(c * n + j, p * n + j);
            }
            b.swap(c, p);
            for r in c + 1..n {
                let f = a[r * n + c] / a[c * n + c];
                for j in c..n {
                    a[r * n + j] -= f * a[c * n + j];
                }
                b[r] -= f * b[c];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|j| a[r * n + j] * x[j]).sum();
            x[r] = (b[r] - s) / a[r * n + r];
        }
        x
    }

    #[test]
    fn quadratic_reaches_closed_form_minimizer() {
        let n = 8;
        let (a, b) = quadratic(n);
        let exact = solve(a.clone(), b.clone());
        let f = |x: &[f64]| {
            let ax: Vec<f64> = (0..n).map(|i| dot(&a[i * n..(i + 1) * n], x)).collect();
            let val = 0.5 * dot(x, &ax) - dot(&b, x);
            let g = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
            (val, g)
        };
        let settings = LbfgsSettings {
            grad_tol: 1e-12,
            ..Default::default()
        };
        let out = minimize_lbfgs(f, vec![0.0; n], &settings);
        assert_eq!(out.status, Status::Converged);
        assert!(out.iterations <= n + 5, "{} iterations", out.iterations);
        let err = out.x.iter().zip(&exact).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "error {err:e}");
    }

    #[test]
    fn zero_gradient_start_stops_immediately() {
        let out = minimize_lbfgs(|x| (x.iter().map(|v| v * v).sum(), x.iter().map(|v| 2.0 * v).collect()), vec![0.0; 3], &LbfgsSettings::default());
        assert_eq!(out.status, Status::Converged);
        assert_eq!(out.iterations, 0);
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn rosenbrock_trace_is_monotone() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            (v, g)
        };
        let out = minimize_lbfgs(f, vec![-1.2, 1.0], &LbfgsSettings::default());
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!((out.x[0] - 1.0).abs() < 1e-4 && (out.x[1] - 1.0).abs() < 1e-4, "{:?}", out.x);
    }
}
