//! Unconstrained BFGS with a backtracking line search.
//!
//! Steps are accepted on the Armijo condition or, close to a minimum where
//! function differences drown in rounding, on the approximate Wolfe
//! conditions of Hager and Zhang.

/// Objective value and gradient, or `None` outside the domain.
pub type Eval = Option<(f64, Vec<f64>)>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop once `‖∇f‖₂` falls below this value.
    pub grad_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { max_iter: 500, grad_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

const ARMIJO: f64 = 1e-4;
const WOLFE: f64 = 0.9;
const APPROX_EPS: f64 = 1e-10;
const MAX_BACKTRACK: usize = 60;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimizes `f` from `x0`. `done` may declare convergence early given the
/// current point and gradient.
pub fn minimize<F, D>(mut f: F, x0: &[f64], opts: BfgsOptions, done: D) -> Option<BfgsResult>
where
    F: FnMut(&[f64]) -> Eval,
    D: Fn(&[f64], &[f64]) -> bool,
{
    let m = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x)?;
    let mut h = identity(m);
    let mut fresh = true;
    let mut iterations = 0;
    let mut converged = norm(&g) < opts.grad_tol || done(&x, &g);
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut d: Vec<f64> = (0..m).map(|i| -dot(&h[i], &g)).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            h = identity(m);
            fresh = true;
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut step = if fresh { (1.0 / norm(&d)).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            if let Some((fn_, gn)) = f(&xn) {
                if fn_.is_finite() {
                    let armijo = fn_ <= fx + ARMIJO * step * slope;
                    let dslope = dot(&gn, &d);
                    let approx = fn_ <= fx + APPROX_EPS * fx.abs()
                        && dslope >= WOLFE * slope
                        && dslope <= (2.0 * ARMIJO - 1.0) * slope;
                    if armijo || approx {
                        accepted = Some((xn, fn_, gn));
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            if fresh {
                break;
            }
            h = identity(m);
            fresh = true;
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if fresh {
                // Shanno–Phua scaling of the first inverse-Hessian guess.
                let scale = sy / dot(&y, &y);
                for (i, row) in h.iter_mut().enumerate() {
                    row.iter_mut().for_each(|v| *v = 0.0);
                    row[i] = scale;
                }
            }
            bfgs_update(&mut h, &s, &y, sy);
            fresh = false;
        }
        x = xn;
        fx = fn_;
        g = gn;
        converged = norm(&g) < opts.grad_tol || done(&x, &g);
    }
    Some(BfgsResult { x, value: fx, grad: g, iterations, converged })
}

fn identity(m: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|i| {
            let mut r = vec![0.0; m];
            r[i] = 1.0;
            r
        })
        .collect()
}

/// `H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let m = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..m).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..m {
        for j in 0..m {
            h[i][j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Eval {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Some((f, g))
    }

    #[test]
    fn solves_rosenbrock() {
        let r = minimize(rosenbrock, &[-1.2, 1.0], BfgsOptions::default(), |_, _| false).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.x[0] - 1.0).abs() < 1e-7 && (r.x[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn respects_domain() {
        // minimum of x − log x at x = 1, undefined for x ≤ 0
        let f = |x: &[f64]| (x[0] > 0.0).then(|| (x[0] - x[0].ln(), vec![1.0 - 1.0 / x[0]]));
        let r = minimize(f, &[20.0], BfgsOptions::default(), |_, _| false).unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn invalid_start_returns_none() {
        assert!(minimize(|_| None, &[0.0], BfgsOptions::default(), |_, _| false).is_none());
    }
}
