//! Box-constrained quasi-Newton minimizer for small smooth problems.
//!
//! BFGS with a dense inverse-Hessian approximation, an Armijo backtracking
//! line search along the projected path, and a projected-gradient fallback
//! whenever the curvature condition fails. Dimensions here are tiny (three
//! for the choice-model fits), so dense algebra is fine.

use crate::error::{Error, Result};

/// Stopping and line-search parameters.
#[derive(Debug, Clone)]
pub struct MinimizeOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the projected gradient, infinity norm.
    pub tolerance: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo_c1: f64,
    pub max_halvings: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-8,
            armijo_c1: 1e-4,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn clamp_to_box(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// max_i |x_i - clamp(x_i - g_i)|: zero exactly at a box-constrained
/// stationary point.
fn projected_gradient_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lo.iter().zip(hi))
        .map(|((&xi, &gi), (&l, &h))| (xi - (xi - gi).clamp(l, h)).abs())
        .fold(0.0, f64::max)
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        m[i][i] = 1.0;
    }
    m
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

/// BFGS update of the inverse Hessian:
/// `H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T`.
fn bfgs_update(h: &mut Vec<Vec<f64>>, s: &[f64], y: &[f64], rho: f64) {
    let n = s.len();
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    let mut next = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            next[i][j] = h[i][j] - rho * (s[i] * hy[j] + hy[i] * s[j])
                + rho * rho * yhy * s[i] * s[j]
                + rho * s[i] * s[j];
        }
    }
    *h = next;
}

/// Minimize `f` over the box `[lo, hi]`. The callback returns the value and
/// gradient at a point. The start is clamped into the box first.
pub fn minimize_bounded<F>(
    f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: &MinimizeOptions,
) -> Result<MinimizeResult>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    if lo.len() != n || hi.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: lo.len().min(hi.len()),
        });
    }
    if lo.iter().zip(hi).any(|(l, h)| l > h || !l.is_finite() || !h.is_finite()) {
        return Err(Error::InvalidConfig("bad bounds for minimizer".to_string()));
    }

    let mut x = x0.to_vec();
    clamp_to_box(&mut x, lo, hi);
    let (mut value, mut grad) = f(&x);
    let mut h = identity(n);

    for iteration in 0..opts.max_iterations {
        if projected_gradient_norm(&x, &grad, lo, hi) < opts.tolerance {
            return Ok(MinimizeResult {
                x,
                value,
                iterations: iteration,
                converged: true,
            });
        }

        let mut direction: Vec<f64> = mat_vec(&h, &grad).iter().map(|v| -v).collect();
        if dot(&direction, &grad) >= 0.0 {
            // curvature information went stale; steepest descent restart
            h = identity(n);
            direction = grad.iter().map(|g| -g).collect();
        }

        // Backtracking along the projected path. Sufficient decrease is
        // measured against the realized displacement, which may be shorter
        // than alpha * direction once the box bends the step.
        let mut alpha = 1.0;
        let mut accepted: Option<(Vec<f64>, f64)> = None;
        for _ in 0..=opts.max_halvings {
            let mut candidate: Vec<f64> =
                x.iter().zip(&direction).map(|(xi, di)| xi + alpha * di).collect();
            clamp_to_box(&mut candidate, lo, hi);
            let displacement: Vec<f64> =
                candidate.iter().zip(&x).map(|(c, xi)| c - xi).collect();
            if displacement.iter().all(|d| *d == 0.0) {
                break; // pinned against the boundary along this direction
            }
            let candidate_value = f(&candidate).0;
            if candidate_value <= value + opts.armijo_c1 * dot(&grad, &displacement) {
                accepted = Some((candidate, candidate_value));
                break;
            }
            alpha /= 2.0;
        }

        let (next_x, next_value) = match accepted {
            Some(pair) => pair,
            None => {
                // no acceptable quasi-Newton step; backtrack along the
                // projected gradient instead, and only give up once even
                // that cannot improve on the current point
                let mut fallback: Option<(Vec<f64>, f64)> = None;
                let mut alpha = 1.0;
                for _ in 0..=opts.max_halvings {
                    let mut candidate: Vec<f64> =
                        x.iter().zip(&grad).map(|(xi, gi)| xi - alpha * gi).collect();
                    clamp_to_box(&mut candidate, lo, hi);
                    if candidate.iter().zip(&x).all(|(c, xi)| c == xi) {
                        break;
                    }
                    let candidate_value = f(&candidate).0;
                    if candidate_value < value {
                        fallback = Some((candidate, candidate_value));
                        break;
                    }
                    alpha /= 2.0;
                }
                match fallback {
                    Some(pair) => {
                        h = identity(n);
                        pair
                    }
                    None => {
                        return Ok(MinimizeResult {
                            x,
                            value,
                            iterations: iteration,
                            converged: false,
                        })
                    }
                }
            }
        };

        let next_grad = f(&next_x).1;
        let s: Vec<f64> = next_x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        // relative curvature test: tiny steps in flat valleys still carry
        // usable curvature; skip the update (rather than reset) when the
        // angle genuinely degenerates
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            bfgs_update(&mut h, &s, &y, 1.0 / sy);
        }
        x = next_x;
        value = next_value;
        grad = next_grad;
    }

    Ok(MinimizeResult {
        x,
        value,
        iterations: opts.max_iterations,
        converged: false,
    })
}
