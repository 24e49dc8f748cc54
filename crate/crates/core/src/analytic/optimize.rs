use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Objective, SmoothObjective};
use crate::demand::FeasibleBox;
use crate::error::Result;
use crate::queue_sim::Policy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Points per axis of the coarse scan.
    pub grid: usize,
    /// Target norm of the projected gradient.
    pub grad_tol: f64,
    pub max_simplex_iters: usize,
    pub max_newton_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { grid: 400, grad_tol: 1e-8, max_simplex_iters: 2000, max_newton_iters: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxMinimum {
    pub x: Policy,
    pub value: f64,
    /// Norm of the projected gradient at `x`.
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalSolution {
    pub policy: Policy,
    pub f: f64,
    pub profit: f64,
    pub rho: f64,
    pub grad_norm: f64,
}

/// Zeroes gradient components that push against an active bound.
pub fn projected_gradient(g: [f64; 2], x: Policy, bx: &FeasibleBox) -> [f64; 2] {
    let clip = |gi: f64, xi: f64, lo: f64, hi: f64| {
        let tol = 1e-12 * (hi - lo);
        if (xi <= lo + tol && gi > 0.0) || (xi >= hi - tol && gi < 0.0) {
            0.0
        } else {
            gi
        }
    };
    [clip(g[0], x.mu, bx.mu_lo, bx.mu_hi), clip(g[1], x.p, bx.p_lo, bx.p_hi)]
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

fn eval(obj: &dyn SmoothObjective, x: Policy) -> f64 {
    match obj.value(x) {
        Ok(v) if v.is_finite() => v,
        _ => f64::INFINITY,
    }
}

fn grid_point(bx: &FeasibleBox, n: usize, i: usize, j: usize) -> Policy {
    let t = |k: usize| k as f64 / (n - 1) as f64;
    Policy::new(bx.mu_lo + (bx.mu_hi - bx.mu_lo) * t(i), bx.p_lo + (bx.p_hi - bx.p_lo) * t(j))
}

fn grid_scan(obj: &dyn SmoothObjective, bx: &FeasibleBox, n: usize) -> (Policy, f64) {
    (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    let x = grid_point(bx, n, i, j);
                    (x, eval(obj, x))
                })
                .fold((grid_point(bx, n, i, 0), f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((bx.midpoint(), f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
}

fn nelder_mead(obj: &dyn SmoothObjective, bx: &FeasibleBox, x0: Policy, step: [f64; 2], iters: usize) -> (Policy, f64) {
    let to_p = |v: [f64; 2]| bx.project(Policy::new(v[0], v[1]));
    let f = |v: [f64; 2]| eval(obj, to_p(v));
    let clamp = |v: [f64; 2]| {
        let p = to_p(v);
        [p.mu, p.p]
    };
    let origin = [x0.mu, x0.p];
    let mut s: Vec<([f64; 2], f64)> = Vec::with_capacity(3);
    s.push((origin, f(origin)));
    for d in 0..2 {
        let mut v = origin;
        v[d] += step[d];
        if clamp(v) == origin {
            // already on the upper bound
            v[d] = origin[d] - step[d];
        }
        let v = clamp(v);
        s.push((v, f(v)));
    }
    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    for _ in 0..iters {
        s.sort_by(|a, b| a.1.total_cmp(&b.1));
        let size = (0..2).map(|d| (s[1].0[d] - s[0].0[d]).abs().max((s[2].0[d] - s[0].0[d]).abs())).fold(0.0, f64::max);
        if size < 1e-12 {
            break;
        }
        let c = [(s[0].0[0] + s[1].0[0]) / 2.0, (s[0].0[1] + s[1].0[1]) / 2.0];
        let worst = s[2];
        let r = clamp(lerp(c, worst.0, -1.0));
        let fr = f(r);
        if fr < s[0].1 {
            let e = clamp(lerp(c, worst.0, -2.0));
            let fe = f(e);
            s[2] = if fe < fr { (e, fe) } else { (r, fr) };
        } else if fr < s[1].1 {
            s[2] = (r, fr);
        } else {
            let (k, fk) = if fr < worst.1 {
                let k = lerp(c, worst.0, -0.5);
                (k, f(k))
            } else {
                let k = lerp(c, worst.0, 0.5);
                (k, f(k))
            };
            if fk < worst.1.min(fr) {
                s[2] = (k, fk);
            } else {
                let best = s[0].0;
                for v in s.iter_mut().skip(1) {
                    v.0 = lerp(best, v.0, 0.5);
                    v.1 = f(v.0);
                }
            }
        }
    }
    s.sort_by(|a, b| a.1.total_cmp(&b.1));
    (to_p(s[0].0), s[0].1)
}

/// Projected Newton iterations; stops at the gradient tolerance or when no step improves.
fn newton_polish(obj: &dyn SmoothObjective, bx: &FeasibleBox, mut x: Policy, mut fx: f64, opts: &SolverOptions) -> BoxMinimum {
    let pg_at = |x: Policy| obj.grad(x).map(|g| (g, projected_gradient(g, x, bx)));
    let Ok((mut g, mut pg)) = pg_at(x) else {
        return BoxMinimum { x, value: fx, grad_norm: f64::INFINITY };
    };
    for _ in 0..opts.max_newton_iters {
        if norm(pg) <= opts.grad_tol {
            break;
        }
        let Ok(h) = obj.hessian(x) else { break };
        let free = [pg[0] != 0.0, pg[1] != 0.0];
        let d = match free {
            [true, true] => {
                let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
                if h[0][0] > 0.0 && det > 0.0 {
                    [-(h[1][1] * g[0] - h[0][1] * g[1]) / det, -(h[0][0] * g[1] - h[1][0] * g[0]) / det]
                } else {
                    [-g[0], -g[1]]
                }
            }
            [true, false] => [if h[0][0] > 0.0 { -g[0] / h[0][0] } else { -g[0] }, 0.0],
            [false, true] => [0.0, if h[1][1] > 0.0 { -g[1] / h[1][1] } else { -g[1] }],
            [false, false] => break,
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let y = bx.project(Policy::new(x.mu + t * d[0], x.p + t * d[1]));
            let fy = eval(obj, y);
            if fy.is_finite() {
                if fy < fx {
                    if let Ok((gy, pgy)) = pg_at(y) {
                        (x, fx, g, pg) = (y, fy, gy, pgy);
                        moved = true;
                        break;
                    }
                } else if fy <= fx + 4.0 * f64::EPSILON * fx.abs().max(1.0) {
                    // flat to rounding: accept only if the gradient shrinks
                    if let Ok((gy, pgy)) = pg_at(y) {
                        if norm(pgy) < norm(pg) {
                            (x, fx, g, pg) = (y, fy, gy, pgy);
                            moved = true;
                            break;
                        }
                    }
                }
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    BoxMinimum { x, value: fx, grad_norm: norm(pg) }
}

/// Global minimization on a box: coarse grid scan, simplex refinement, projected Newton polish.
///
/// Points where the objective errors (e.g. unstable policies) count as `+∞`.
pub fn minimize_on_box(obj: &dyn SmoothObjective, bx: &FeasibleBox, opts: &SolverOptions) -> BoxMinimum {
    let n = opts.grid.max(2);
    let (x0, _) = grid_scan(obj, bx, n);
    let step = [(bx.mu_hi - bx.mu_lo) / (n - 1) as f64, (bx.p_hi - bx.p_lo) / (n - 1) as f64];
    let (x1, f1) = nelder_mead(obj, bx, x0, step, opts.max_simplex_iters);
    newton_polish(obj, bx, x1, f1, opts)
}

pub fn solve_optimal_with(obj: &Objective, bx: &FeasibleBox, opts: &SolverOptions) -> Result<OptimalSolution> {
    bx.validate()?;
    bx.require_stable(&obj.demand)?;
    let m = minimize_on_box(obj, bx, opts);
    Ok(OptimalSolution { policy: m.x, f: m.value, profit: -m.value, rho: obj.rho(m.x), grad_norm: m.grad_norm })
}

/// Full-information optimum `(x*, f*, ρ*)` on a uniformly stable box with default options.
pub fn solve_optimal(obj: &Objective, bx: &FeasibleBox) -> Result<OptimalSolution> {
    solve_optimal_with(obj, bx, &SolverOptions::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub grid: usize,
    pub x_star: Policy,
    pub min_det: f64,
    pub min_det_point: Policy,
    pub min_dpp: f64,
    pub min_dpp_point: Policy,
    pub min_dmumu: f64,
    /// `min (x - x*)ᵀ∇f(x) / ‖x - x*‖²` over grid points other than `x*`.
    pub k0: f64,
    pub k0_point: Policy,
    /// Positive determinant and positive diagonal at every grid point.
    pub convex: bool,
    /// Grid points where derivatives could not be evaluated.
    pub skipped: usize,
}

/// Grid scan of Hessian determinant and diagonal, plus the strong-monotonicity ratio against `x_star`.
pub fn convexity_report_at(obj: &dyn SmoothObjective, bx: &FeasibleBox, grid: usize, x_star: Policy) -> ConvexityReport {
    let n = grid.max(2);
    let mut r = ConvexityReport {
        grid: n,
        x_star,
        min_det: f64::INFINITY,
        min_det_point: x_star,
        min_dpp: f64::INFINITY,
        min_dpp_point: x_star,
        min_dmumu: f64::INFINITY,
        k0: f64::INFINITY,
        k0_point: x_star,
        convex: false,
        skipped: 0,
    };
    let scale = (bx.mu_hi - bx.mu_lo).hypot(bx.p_hi - bx.p_lo);
    for i in 0..n {
        for j in 0..n {
            let x = grid_point(bx, n, i, j);
            let (Ok(h), Ok(g)) = (obj.hessian(x), obj.grad(x)) else {
                r.skipped += 1;
                continue;
            };
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            if det < r.min_det {
                r.min_det = det;
                r.min_det_point = x;
            }
            if h[1][1] < r.min_dpp {
                r.min_dpp = h[1][1];
                r.min_dpp_point = x;
            }
            r.min_dmumu = r.min_dmumu.min(h[0][0]);
            let dx = [x.mu - x_star.mu, x.p - x_star.p];
            let d2 = dx[0] * dx[0] + dx[1] * dx[1];
            if d2.sqrt() > 1e-9 * scale {
                let ratio = (dx[0] * g[0] + dx[1] * g[1]) / d2;
                if ratio < r.k0 {
                    r.k0 = ratio;
                    r.k0_point = x;
                }
            }
        }
    }
    r.convex = r.skipped == 0 && r.min_det > 0.0 && r.min_dpp > 0.0 && r.min_dmumu > 0.0;
    r
}

/// [`convexity_report_at`] with `x*` located by [`minimize_on_box`].
pub fn convexity_report(obj: &dyn SmoothObjective, bx: &FeasibleBox, grid: usize) -> ConvexityReport {
    let m = minimize_on_box(obj, bx, &SolverOptions::default());
    convexity_report_at(obj, bx, grid, m.x)
}
