//! Least-squares demand fitting from `(price, observed rate)` samples.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{DemandCurve, DemandFamily};
use crate::error::{Error, Result};

const MAX_ITERS: usize = 200;
const STEP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub curve: DemandCurve,
    /// Sum of squared residuals in rate space.
    pub residual: f64,
    pub iterations: usize,
    /// `false` when the iterative fit stopped without meeting its step tolerance;
    /// `curve` is then the best iterate found.
    pub converged: bool,
}

fn sse(curve: &DemandCurve, samples: &[(f64, f64)]) -> f64 {
    samples.iter().map(|&(p, y)| (curve.rate(p) - y).powi(2)).sum()
}

/// Ordinary least squares `y ≈ c0 + c1 x`.
fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

fn validate(family: DemandFamily, samples: &[(f64, f64)]) -> Result<()> {
    let k = family.n_params();
    if samples.len() < k {
        return Err(Error::Fit(format!("{family:?} needs at least {k} samples, got {}", samples.len())));
    }
    let mut prices: Vec<f64> = samples.iter().map(|s| s.0).collect();
    prices.sort_by(f64::total_cmp);
    prices.dedup();
    if prices.len() < k {
        return Err(Error::Fit(format!("{family:?} needs {k} distinct prices, got {}", prices.len())));
    }
    if samples.iter().any(|&(p, y)| !p.is_finite() || !y.is_finite()) {
        return Err(Error::Fit("non-finite sample".into()));
    }
    Ok(())
}

/// Fits `family` to the samples.
///
/// Linear and quadratic families use closed-form least squares; the
/// exponential family is fitted on log rates. The logit family runs
/// Gauss–Newton (with step halving) from `init`, or from a log-odds
/// linearization of the data when `init` is `None`.
pub fn fit_least_squares(
    family: DemandFamily,
    samples: &[(f64, f64)],
    init: Option<DemandCurve>,
) -> Result<FitResult> {
    validate(family, samples)?;
    let ps: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let closed = |curve: DemandCurve| FitResult {
        residual: sse(&curve, samples),
        curve,
        iterations: 0,
        converged: true,
    };
    match family {
        DemandFamily::Linear => {
            let (a, slope) = line_fit(&ps, &ys);
            Ok(closed(DemandCurve::Linear { a, b: -slope }))
        }
        DemandFamily::Quadratic => {
            let qs: Vec<f64> = ps.iter().map(|p| p * p).collect();
            let (c, slope) = line_fit(&qs, &ys);
            Ok(closed(DemandCurve::Quadratic { c, a: -slope }))
        }
        DemandFamily::Exponential => {
            if ys.iter().any(|&y| y <= 0.0) {
                return Err(Error::Fit("exponential fit needs positive rates".into()));
            }
            let ls: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
            let (a, slope) = line_fit(&ps, &ls);
            Ok(closed(DemandCurve::Exponential { a, b: -slope }))
        }
        DemandFamily::Logit => {
            let start = match init {
                Some(c @ DemandCurve::Logit { .. }) => c,
                Some(other) => {
                    return Err(Error::Fit(format!("logit fit initialized with {:?}", other.family())))
                }
                None => logodds_init(&ps, &ys)?,
            };
            gauss_newton_logit(start, samples)
        }
    }
}

/// Linear regression of `log(y / (m0 - y))` on price for a ladder of
/// saturation levels `m0` above the largest observed rate; keeps the best
/// candidate in rate space.
fn logodds_init(ps: &[f64], ys: &[f64]) -> Result<DemandCurve> {
    let ymax = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(ymax > 0.0) {
        return Err(Error::Fit("logit fit needs a positive rate".into()));
    }
    let floor = ymax * 1e-6;
    let samples: Vec<(f64, f64)> = ps.iter().copied().zip(ys.iter().copied()).collect();
    let mut best: Option<(f64, DemandCurve)> = None;
    for factor in [1.02, 1.05, 1.1, 1.2, 1.35, 1.5, 1.75, 2.0, 2.5, 3.0, 4.0, 6.0] {
        let m0 = ymax * factor;
        let zs: Vec<f64> = ys
            .iter()
            .map(|&y| {
                let y = y.max(floor);
                (y / (m0 - y)).ln()
            })
            .collect();
        let (a, slope) = line_fit(ps, &zs);
        let curve = DemandCurve::Logit { m0, a, b: -slope };
        let r = sse(&curve, &samples);
        if r.is_finite() && best.as_ref().is_none_or(|(br, _)| r < *br) {
            best = Some((r, curve));
        }
    }
    best.map(|(_, c)| c).ok_or_else(|| Error::Fit("log-odds initialization failed".into()))
}

fn gauss_newton_logit(start: DemandCurve, samples: &[(f64, f64)]) -> Result<FitResult> {
    let DemandCurve::Logit { m0, a, b } = start else { unreachable!() };
    let mut theta = [m0, a, b];
    let curve_of = |t: &[f64; 3]| DemandCurve::Logit { m0: t[0], a: t[1], b: t[2] };
    let mut cur = sse(&curve_of(&theta), samples);
    let n = samples.len();
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=MAX_ITERS {
        iterations = it;
        let mut jac = DMatrix::<f64>::zeros(n, 3);
        let mut res = DVector::<f64>::zeros(n);
        for (i, &(p, y)) in samples.iter().enumerate() {
            let s = super::logistic(theta[1] - theta[2] * p);
            let ds = theta[0] * s * (1.0 - s);
            jac[(i, 0)] = s;
            jac[(i, 1)] = ds;
            jac[(i, 2)] = -p * ds;
            res[i] = y - theta[0] * s;
        }
        let svd = jac.svd(true, true);
        let step = svd
            .solve(&res, 1e-14)
            .map_err(|e| Error::Fit(format!("Gauss-Newton step: {e}")))?;
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = [theta[0] + scale * step[0], theta[1] + scale * step[1], theta[2] + scale * step[2]];
            let r = sse(&curve_of(&trial), samples);
            if r.is_finite() && r <= cur {
                let moved = scale * step.norm();
                theta = trial;
                cur = r;
                accepted = true;
                if moved < STEP_TOL {
                    converged = true;
                }
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            // no descent along the Gauss-Newton direction: at a stationary point if the step is tiny
            converged = step.norm() * scale < STEP_TOL || cur < 1e-24;
            break;
        }
        if converged || cur < 1e-28 {
            converged = true;
            break;
        }
    }
    Ok(FitResult { curve: curve_of(&theta), residual: cur, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_determine_line() {
        let r = fit_least_squares(DemandFamily::Linear, &[(1.0, 3.0), (2.0, 1.0)], None).unwrap();
        assert_eq!(r.curve, DemandCurve::Linear { a: 5.0, b: 2.0 });
        assert!(r.residual < 1e-20);
    }

    #[test]
    fn quadratic_and_exponential_exact() {
        let q = DemandCurve::Quadratic { c: 10.0, a: 0.3 };
        let e = DemandCurve::Exponential { a: 2.0, b: 0.5 };
        let prices = [1.0, 1.5, 2.0, 2.5];
        for truth in [q, e] {
            let s: Vec<(f64, f64)> = prices.iter().map(|&p| (p, truth.rate(p))).collect();
            let r = fit_least_squares(truth.family(), &s, None).unwrap();
            assert!(r.residual < 1e-8);
            for (x, y) in r.curve.params().iter().zip(truth.params()) {
                assert!((x - y).abs() < 1e-9, "{:?} vs {:?}", r.curve, truth);
            }
        }
    }

    #[test]
    fn logit_noise_free_recovery() {
        let truth = DemandCurve::Logit { m0: 10.0, a: 4.1, b: 1.0 };
        let s: Vec<(f64, f64)> = [3.5, 4.375, 5.25, 6.125, 7.0].iter().map(|&p| (p, truth.rate(p))).collect();
        let r = fit_least_squares(DemandFamily::Logit, &s, None).unwrap();
        assert!(r.converged);
        assert!(r.residual < 1e-8);
        for (x, y) in r.curve.params().iter().zip(truth.params()) {
            assert!((x - y).abs() < 1e-6, "{:?}", r.curve);
        }
    }

    #[test]
    fn logit_with_explicit_init() {
        let truth = DemandCurve::Logit { m0: 10.0, a: 4.1, b: 1.0 };
        let s: Vec<(f64, f64)> = [3.5, 5.25, 7.0].iter().map(|&p| (p, truth.rate(p))).collect();
        let init = DemandCurve::Logit { m0: 9.0, a: 4.0, b: 0.9 };
        let r = fit_least_squares(DemandFamily::Logit, &s, Some(init)).unwrap();
        assert!(r.residual < 1e-8, "{r:?}");
        let bad = fit_least_squares(DemandFamily::Logit, &s, Some(DemandCurve::Linear { a: 1.0, b: 1.0 }));
        assert!(bad.is_err());
    }

    #[test]
    fn insufficient_or_repeated_prices_rejected() {
        assert!(fit_least_squares(DemandFamily::Linear, &[(1.0, 3.0)], None).is_err());
        assert!(fit_least_squares(DemandFamily::Linear, &[(1.0, 3.0), (1.0, 2.0)], None).is_err());
        assert!(fit_least_squares(DemandFamily::Logit, &[(1.0, 3.0), (2.0, 2.0)], None).is_err());
        assert!(fit_least_squares(DemandFamily::Exponential, &[(1.0, 3.0), (2.0, 0.0)], None).is_err());
    }
}
