//! Mixed Poisson quasi-maximum likelihood.
//!
//! The per-observation objective is
//!
//! ```text
//! ℓ̃ₜ = (log π̃ₜ − λ̃₁ₜ + Yₜ log λ̃₁ₜ)                1{Yₜ ≥ 0}
//!    + (log(1 − π̃ₜ) − λ̃₂ₜ − (Yₜ + 1) log(λ̃₂ₜ − 1)) 1{Yₜ < 0}
//! ```
//!
//! It splits into a Bernoulli term in φ and one Poisson-type term per
//! intensity block, so the three blocks are maximized separately.

pub mod transform;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{block_diag, sandwich, spd_inverse, weighted_outer_mean};
use crate::model::{
    filter, intensity_filter, sign_filter, FilterPath, InitPolicy, ModelOrder, PhiParams, PsiParams, SeriesZ,
    Side, Theta, LAMBDA2_GUARD, PI_GUARD,
};
use crate::optim::{minimize, BfgsOptions};
use transform::{phi_from_eta, phi_to_eta, psi_from_eta, psi_to_eta, Caps};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Gradient-norm tolerance of each block maximization.
    pub tol: f64,
    pub max_iter: usize,
    pub init: InitPolicy,
    /// Deterministic starting points per block.
    pub starts: usize,
    pub alpha_max: f64,
    pub beta_max: f64,
    /// Upper bound for ω; `None` uses `max(10·max|Y|, 10)`.
    pub omega_max: Option<f64>,
    /// Fitting requires at least this many observations per parameter.
    pub min_obs_per_param: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 1000,
            init: InitPolicy::Stationary,
            starts: 5,
            alpha_max: 0.999,
            beta_max: 0.999,
            omega_max: None,
            min_obs_per_param: 10,
        }
    }
}

impl FitOptions {
    fn caps(&self, series: &SeriesZ) -> Caps {
        let max_abs = series.y().iter().map(|v| v.unsigned_abs()).max().unwrap_or(0) as f64;
        Caps {
            alpha_max: self.alpha_max,
            beta_max: self.beta_max,
            omega_max: self.omega_max.unwrap_or((10.0 * max_abs).max(10.0)),
        }
    }
}

/// Outcome of one block maximization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockConvergence {
    pub iterations: usize,
    /// Euclidean norm of the block score in the natural parameters.
    pub gradient_norm: f64,
    pub converged: bool,
    /// Block contribution to the mean quasi-log-likelihood.
    pub objective: f64,
}

/// Plug-in estimates of Π, J₁, I₁, J₂, I₂ and the block-diagonal Σ.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance {
    pub pi_hat: DMatrix<f64>,
    pub j1: DMatrix<f64>,
    pub i1: DMatrix<f64>,
    pub j2: DMatrix<f64>,
    pub i2: DMatrix<f64>,
    /// `diag(Π̂⁻¹, Ĵ₁⁻¹Î₁Ĵ₁⁻¹, Ĵ₂⁻¹Î₂Ĵ₂⁻¹)`; blocks that cannot be inverted are NaN.
    pub sigma: DMatrix<f64>,
    /// Block-diagonal `Ĵ = diag(Π̂, Ĵ₁, Ĵ₂)`.
    pub j: DMatrix<f64>,
    /// Whether Π̂, Ĵ₁, Ĵ₂ were invertible.
    pub available: [bool; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub theta_hat: Theta,
    pub n: usize,
    /// Mean quasi-log-likelihood without θ-free constants.
    pub loglik: f64,
    /// Mean log-likelihood of the mixed Poisson law including all constants.
    pub loglik_full: f64,
    /// Convergence of the φ, ψ₁ and ψ₂ maximizations.
    pub blocks: [BlockConvergence; 3],
    pub covariance: Covariance,
    /// `√(diag Σ̂ / n)`; NaN where a block is singular.
    pub se: Vec<f64>,
    pub init: InitPolicy,
}

impl FitReport {
    pub fn converged(&self) -> bool {
        self.blocks.iter().all(|b| b.converged)
    }
}

fn clamp_pi(pi: f64) -> f64 {
    pi.clamp(PI_GUARD, 1.0 - PI_GUARD)
}

/// `ℓ̃ₜ` for a single observation.
pub fn obs_loglik(y: i64, pi: f64, lam1: f64, lam2: f64) -> f64 {
    let pi = clamp_pi(pi);
    if y >= 0 {
        pi.ln() - lam1 + y as f64 * lam1.ln()
    } else {
        (1.0 - pi).ln() - lam2 - (y + 1) as f64 * (lam2 - 1.0).max(LAMBDA2_GUARD).ln()
    }
}

/// θ-free terms that turn `ℓ̃ₜ` into the log of the mixed Poisson pmf.
fn obs_constant(y: i64) -> f64 {
    if y >= 0 {
        -ln_gamma(y as f64 + 1.0)
    } else {
        1.0 - ln_gamma(-y as f64)
    }
}

fn path_loglik(series: &SeriesZ, path: &FilterPath) -> f64 {
    let s: f64 = series
        .y()
        .iter()
        .enumerate()
        .map(|(t, &y)| obs_loglik(y, path.pi(t), path.lam1(t), path.lam2(t)))
        .sum();
    s / series.len() as f64
}

fn mean_constant(series: &SeriesZ) -> f64 {
    series.y().iter().map(|&y| obs_constant(y)).sum::<f64>() / series.len() as f64
}

/// Mean quasi-log-likelihood `(1/n) Σ ℓ̃ₜ(θ)`.
pub fn quasi_loglik(series: &SeriesZ, theta: &Theta, init: InitPolicy) -> Result<f64> {
    let path = filter(series, theta, init)?;
    Ok(path_loglik(series, &path))
}

/// Mean log-likelihood including the log-factorial constants.
pub fn full_loglik(series: &SeriesZ, theta: &Theta, init: InitPolicy) -> Result<f64> {
    Ok(quasi_loglik(series, theta, init)? + mean_constant(series))
}

/// `∂ℓ̃ₜ/∂θ` for every t, flattened row-major into an `n × d` buffer.
pub fn obs_scores(series: &SeriesZ, path: &FilterPath) -> Vec<f64> {
    let k = path.lam1.grad(0).len();
    let d = 3 + 2 * k;
    let mut out = vec![0.0; series.len() * d];
    for (t, &y) in series.y().iter().enumerate() {
        let row = &mut out[t * d..(t + 1) * d];
        let pi = clamp_pi(path.pi(t));
        let w = if y >= 0 { 1.0 / pi } else { -1.0 / (1.0 - pi) };
        for (r, dp) in row[..3].iter_mut().zip(&path.sign.dpi[t]) {
            *r = w * dp;
        }
        if y >= 0 {
            let lam = path.lam1(t);
            let w = y as f64 / lam - 1.0;
            for (r, g) in row[3..3 + k].iter_mut().zip(path.lam1.grad(t)) {
                *r = w * g;
            }
        } else {
            let m = (path.lam2(t) - 1.0).max(LAMBDA2_GUARD);
            let w = -(y + 1) as f64 / m - 1.0;
            for (r, g) in row[3 + k..].iter_mut().zip(path.lam2.grad(t)) {
                *r = w * g;
            }
        }
    }
    out
}

/// Mean score `(1/n) Σ ∂ℓ̃ₜ/∂θ`.
pub fn score(series: &SeriesZ, theta: &Theta, init: InitPolicy) -> Result<Vec<f64>> {
    let path = filter(series, theta, init)?;
    let d = theta.dim();
    let rows = obs_scores(series, &path);
    let mut g = vec![0.0; d];
    for row in rows.chunks(d) {
        for (gi, r) in g.iter_mut().zip(row) {
            *gi += r;
        }
    }
    let n = series.len() as f64;
    g.iter_mut().for_each(|v| *v /= n);
    Ok(g)
}

/// Negative mean Bernoulli log-likelihood and its φ-gradient.
fn phi_objective(b: &[u8], phi: &PhiParams, init: InitPolicy) -> (f64, [f64; 3]) {
    let path = sign_filter(b, phi, init);
    let mut val = 0.0;
    let mut grad = [0.0; 3];
    for (t, &bt) in b.iter().enumerate() {
        let pi = clamp_pi(path.pi[t]);
        let w = if bt == 1 {
            val += pi.ln();
            1.0 / pi
        } else {
            val += (1.0 - pi).ln();
            -1.0 / (1.0 - pi)
        };
        for (g, d) in grad.iter_mut().zip(&path.dpi[t]) {
            *g += w * d;
        }
    }
    let n = b.len() as f64;
    (-val / n, grad.map(|g| -g / n))
}

/// Data shared by the intensity block objectives.
struct Magnitudes<'a> {
    y: &'a [i64],
    abs_y: Vec<f64>,
    signs: &'a [u8],
}

/// Negative mean intensity-block quasi-log-likelihood and its gradient.
fn psi_objective(data: &Magnitudes, psi: &PsiParams, init: InitPolicy) -> (f64, Vec<f64>) {
    let path = intensity_filter(&data.abs_y, data.signs, psi, init);
    let k = 1 + psi.alpha.len() + psi.beta.len();
    let mut val = 0.0;
    let mut grad = vec![0.0; k];
    for (t, &y) in data.y.iter().enumerate() {
        let lam = path.lam[t];
        let w = match psi.side {
            Side::Positive if y >= 0 => {
                val += y as f64 * lam.ln() - lam;
                y as f64 / lam - 1.0
            }
            Side::Negative if y < 0 => {
                let m = (lam - 1.0).max(LAMBDA2_GUARD);
                let km1 = -(y + 1) as f64;
                val += km1 * m.ln() - lam;
                km1 / m - 1.0
            }
            _ => continue,
        };
        for (g, d) in grad.iter_mut().zip(path.grad(t)) {
            *g += w * d;
        }
    }
    let n = data.y.len() as f64;
    (-val / n, grad.into_iter().map(|g| -g / n).collect())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `Jᵀ g`.
fn chain<const N: usize>(jac: &[[f64; N]; N], g: &[f64]) -> Vec<f64> {
    (0..N).map(|j| (0..N).map(|i| jac[i][j] * g[i]).sum()).collect()
}

fn chain_dyn(jac: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    let k = g.len();
    (0..k).map(|j| (0..k).map(|i| jac[i][j] * g[i]).sum()).collect()
}

struct BlockFit<P> {
    params: P,
    conv: BlockConvergence,
}

/// Runs BFGS from every start and keeps the best objective.
fn best_of<P, F>(starts: &[Vec<f64>], tol: f64, max_iter: usize, eval: F) -> Option<BlockFit<P>>
where
    F: Fn(&[f64]) -> (P, f64, Vec<f64>, Vec<f64>),
{
    let opts = BfgsOptions { max_iter, grad_tol: tol };
    let mut best: Option<BlockFit<P>> = None;
    for x0 in starts {
        let objective = |eta: &[f64]| {
            let (_, val, _, g_eta) = eval(eta);
            (val.is_finite() && g_eta.iter().all(|v| v.is_finite())).then_some((val, g_eta))
        };
        let done = |eta: &[f64], g: &[f64]| norm(g) < 1e3 * tol && norm(&eval(eta).2) < tol;
        let Some(res) = minimize(objective, x0, opts, done) else {
            continue;
        };
        let (params, val, g_nat, g_eta) = eval(&res.x);
        let gn = norm(&g_nat);
        let conv = BlockConvergence {
            iterations: res.iterations,
            gradient_norm: gn,
            converged: gn < tol || norm(&g_eta) < tol,
            objective: -val,
        };
        if best.as_ref().is_none_or(|b| conv.objective > b.conv.objective) {
            best = Some(BlockFit { params, conv });
        }
    }
    best
}

fn phi_starts(b: &[u8], n_starts: usize) -> Vec<Vec<f64>> {
    let pbar = (b.iter().map(|&v| f64::from(v)).sum::<f64>() / b.len() as f64).clamp(0.02, 0.98);
    const AB: [(f64, f64); 5] = [(0.2, 0.2), (0.1, 0.6), (0.4, 0.1), (0.05, 0.85), (0.3, 0.4)];
    AB.iter()
        .cycle()
        .take(n_starts.max(1))
        .enumerate()
        .map(|(i, &(a, bb))| {
            let shrink = 1.0 / (1.0 + (i / AB.len()) as f64);
            let (a, bb) = (a * shrink, bb * shrink);
            let c = pbar * (1.0 - a - bb);
            phi_to_eta(&PhiParams { c, a, b: bb }).to_vec()
        })
        .collect()
}

fn psi_starts(data: &Magnitudes, order: ModelOrder, side: Side, caps: &Caps, n_starts: usize) -> Vec<Vec<f64>> {
    let want = u8::from(side == Side::Positive);
    let (sum, cnt) = data
        .abs_y
        .iter()
        .zip(data.signs)
        .filter(|(_, &s)| s == want)
        .fold((0.0, 0usize), |(s, c), (&v, _)| (s + v, c + 1));
    let side_mean = if cnt > 0 { sum / cnt as f64 } else { 1.0 };
    let abs_mean = data.abs_y.iter().sum::<f64>() / data.abs_y.len() as f64;
    const AB: [(f64, f64); 5] = [(0.2, 0.3), (0.1, 0.7), (0.4, 0.1), (0.05, 0.9), (0.3, 0.5)];
    AB.iter()
        .cycle()
        .take(n_starts.max(1))
        .enumerate()
        .map(|(i, &(a, b))| {
            let shrink = 1.0 / (1.0 + (i / AB.len()) as f64);
            let (a, b) = if order.q == 0 { (0.0, b * shrink) } else if order.p == 0 { (a * shrink, 0.0) } else { (a * shrink, b * shrink) };
            let alpha = vec![a / order.q.max(1) as f64; order.q];
            let beta = vec![b / order.p.max(1) as f64; order.p];
            let b_sum: f64 = beta.iter().sum();
            let omega = match side {
                Side::Positive => (side_mean * (1.0 - b_sum) - a * abs_mean).max(0.1 * side_mean.max(0.1)),
                Side::Negative => {
                    let floor = 1.0 - b_sum;
                    (side_mean * (1.0 - b_sum) - a * abs_mean).max(floor + 0.1 * (side_mean - 1.0).max(0.1))
                }
            };
            psi_to_eta(&PsiParams { omega, alpha, beta, side }, caps)
        })
        .collect()
}

/// Maximizes the Bernoulli block on a sign sequence.
///
/// With `warm` the search starts from that point only.
pub fn fit_phi(b: &[u8], opts: &FitOptions, warm: Option<&PhiParams>) -> Result<(PhiParams, BlockConvergence)> {
    if b.is_empty() {
        return Err(Error::degenerate("empty sign sequence"));
    }
    let starts = match warm {
        Some(phi) => vec![phi_to_eta(phi).to_vec()],
        None => phi_starts(b, opts.starts),
    };
    let init = opts.init;
    let fit = best_of(&starts, opts.tol, opts.max_iter, |eta| {
        let (phi, jac) = phi_from_eta(eta);
        let (val, g) = phi_objective(b, &phi, init);
        let g_eta = chain(&jac, &g);
        (phi, val, g.to_vec(), g_eta)
    })
    .ok_or_else(|| Error::Numerical { detail: "no start produced a finite objective".into(), residual: f64::NAN })?;
    Ok((fit.params, fit.conv))
}

fn fit_psi(data: &Magnitudes, order: ModelOrder, side: Side, caps: &Caps, opts: &FitOptions) -> Result<BlockFit<PsiParams>> {
    let starts = psi_starts(data, order, side, caps, opts.starts);
    let init = opts.init;
    best_of(&starts, opts.tol, opts.max_iter, |eta| {
        let (psi, jac) = psi_from_eta(eta, order, side, caps);
        let (val, g) = psi_objective(data, &psi, init);
        let g_eta = chain_dyn(&jac, &g);
        (psi, val, g, g_eta)
    })
    .ok_or_else(|| Error::Numerical { detail: "no start produced a finite objective".into(), residual: f64::NAN })
}

/// Fits the model by three separate block maximizations.
pub fn fit(series: &SeriesZ, order: ModelOrder, opts: &FitOptions) -> Result<FitReport> {
    let order = ModelOrder::new(order.p, order.q)?;
    let d = order.theta_dim();
    let need = opts.min_obs_per_param * d;
    if series.len() < need {
        return Err(Error::degenerate(format!(
            "{} observations for {d} parameters; at least {need} are required",
            series.len()
        )));
    }
    series.require_both_signs()?;
    let caps = opts.caps(series);
    let data = Magnitudes { y: series.y(), abs_y: series.abs_values(), signs: series.signs() };
    let (phi, c_phi) = fit_phi(series.signs(), opts, None)?;
    let psi1 = fit_psi(&data, order, Side::Positive, &caps, opts)?;
    let psi2 = fit_psi(&data, order, Side::Negative, &caps, opts)?;
    let theta_hat = Theta { phi, psi1: psi1.params, psi2: psi2.params };
    let path = filter(series, &theta_hat, opts.init)?;
    let loglik = path_loglik(series, &path);
    let covariance = covariance_from_path(series, &path);
    let se = standard_errors(&covariance.sigma, series.len());
    Ok(FitReport {
        theta_hat,
        n: series.len(),
        loglik,
        loglik_full: loglik + mean_constant(series),
        blocks: [c_phi, psi1.conv, psi2.conv],
        covariance,
        se,
        init: opts.init,
    })
}

pub fn standard_errors(sigma: &DMatrix<f64>, n: usize) -> Vec<f64> {
    (0..sigma.nrows()).map(|i| (sigma[(i, i)] / n as f64).sqrt()).collect()
}

/// Plug-in Π̂, Ĵₛ, Îₛ and Σ̂ at `theta`.
pub fn asymptotic_covariance(series: &SeriesZ, theta: &Theta, init: InitPolicy) -> Result<Covariance> {
    let path = filter(series, theta, init)?;
    Ok(covariance_from_path(series, &path))
}

pub(crate) fn covariance_from_path(series: &SeriesZ, path: &FilterPath) -> Covariance {
    let n = series.len();
    let y = series.y();
    let k = path.lam1.grad(0).len();
    let pi_hat = weighted_outer_mean(
        3,
        n,
        (0..n).map(|t| {
            let p = clamp_pi(path.pi(t));
            (1.0 / (p * (1.0 - p)), path.sign.dpi[t].as_slice())
        }),
    );
    let pos = |f: fn(f64, f64) -> f64| {
        weighted_outer_mean(
            k,
            n,
            (0..n).map(move |t| {
                let w = if y[t] >= 0 { f(y[t] as f64, path.lam1(t)) } else { 0.0 };
                (w, path.lam1.grad(t))
            }),
        )
    };
    let j1 = pos(|y, l| y / (l * l));
    let i1 = pos(|y, l| ((y - l) / l).powi(2));
    let neg = |f: fn(f64, f64) -> f64| {
        weighted_outer_mean(
            k,
            n,
            (0..n).map(move |t| {
                let w = if y[t] < 0 { f(y[t] as f64, path.lam2(t)) } else { 0.0 };
                (w, path.lam2.grad(t))
            }),
        )
    };
    let j2 = neg(|y, l| -(y + 1.0) / (l - 1.0).max(LAMBDA2_GUARD).powi(2));
    let i2 = neg(|y, l| ((y + l) / (l - 1.0).max(LAMBDA2_GUARD)).powi(2));

    let nan = |m: usize| DMatrix::from_element(m, m, f64::NAN);
    let pi_inv = spd_inverse(&pi_hat);
    let j1_inv = spd_inverse(&j1);
    let j2_inv = spd_inverse(&j2);
    let available = [pi_inv.is_some(), j1_inv.is_some(), j2_inv.is_some()];
    let s0 = pi_inv.unwrap_or_else(|| nan(3));
    let s1 = j1_inv.map(|ji| sandwich(&ji, &i1)).unwrap_or_else(|| nan(k));
    let s2 = j2_inv.map(|ji| sandwich(&ji, &i2)).unwrap_or_else(|| nan(k));
    let sigma = block_diag(&[&s0, &s1, &s2]);
    let j = block_diag(&[&pi_hat, &j1, &j2]);
    Covariance { pi_hat, j1, i1, j2, i2, sigma, j, available }
}

/// Moment estimates of the negative binomial dispersion parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionEstimates {
    /// `+∞` when `r1_underdispersed` is set.
    pub r1: f64,
    pub r2: f64,
    /// The averaged excess-variance ratio was not positive (Poisson or thinner).
    pub r1_underdispersed: bool,
    pub r2_underdispersed: bool,
}

/// Inverts the averaged studentized excess variance on each side.
pub fn estimate_dispersion(series: &SeriesZ, theta: &Theta, init: InitPolicy) -> Result<DispersionEstimates> {
    let path = filter(series, theta, init)?;
    let n = series.len() as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    for (t, &y) in series.y().iter().enumerate() {
        let pi = clamp_pi(path.pi(t));
        let (l1, l2m) = (path.lam1(t), (path.lam2(t) - 1.0).max(LAMBDA2_GUARD));
        let yf = y as f64;
        let e1 = if y >= 0 { (yf - l1).powi(2) } else { 0.0 };
        let e2 = if y < 0 { (yf + path.lam2(t)).powi(2) } else { 0.0 };
        s1 += (e1 - pi * l1) / (pi * l1 * l1).max(1e-10);
        s2 += (e2 - (1.0 - pi) * l2m) / ((1.0 - pi) * l2m * l2m).max(1e-10);
    }
    let (m1, m2) = (s1 / n, s2 / n);
    let inv = |m: f64| if m > 0.0 { 1.0 / m } else { f64::INFINITY };
    Ok(DispersionEstimates { r1: inv(m1), r2: inv(m2), r1_underdispersed: m1 <= 0.0, r2_underdispersed: m2 <= 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate, DgpSpec, Family, Linkage, SignSpec};
    use crate::rng;

    fn reference() -> Theta {
        Theta::order11(0.2, 0.2, 0.2, 1.0, 0.3, 0.3, 2.0, 0.3, 0.3).unwrap()
    }

    fn sample(n: usize, seed: u64) -> SeriesZ {
        let spec = DgpSpec { theta: reference(), family: Family::Poisson, linkage: Linkage::Linear, sign: SignSpec::BernoulliIngarch };
        simulate(&spec, n, 500, &mut rng::stream(seed)).unwrap()
    }

    #[test]
    fn single_observation_values() {
        assert!((obs_loglik(0, 0.5, 1.0, 3.0) - (0.5f64.ln() - 1.0)).abs() < 1e-15);
        assert!((obs_loglik(-1, 0.5, 1.0, 2.0) - (0.5f64.ln() - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn full_loglik_is_log_pmf() {
        use crate::dists::{MixedDifferenceLaw, PosDist};
        for y in [-4i64, -1, 0, 3] {
            let law = MixedDifferenceLaw::new(0.3, PosDist::poisson(1.7).unwrap(), PosDist::shifted_poisson(2.6).unwrap()).unwrap();
            let want = law.pmf(y).unwrap().ln();
            let got = obs_loglik(y, 0.3, 1.7, 2.6) + obs_constant(y);
            assert!((want - got).abs() < 1e-12, "{y}");
        }
    }

    #[test]
    fn score_matches_differences() {
        let s = sample(300, 2);
        let theta = Theta::order11(0.15, 0.3, 0.25, 1.2, 0.25, 0.35, 1.8, 0.2, 0.4).unwrap();
        let g = score(&s, &theta, InitPolicy::Stationary).unwrap();
        let base = theta.to_vec();
        for i in 0..base.len() {
            let h = 1e-6;
            let mut up = base.clone();
            let mut dn = base.clone();
            up[i] += h;
            dn[i] -= h;
            let fu = quasi_loglik(&s, &Theta::from_slice(&up, theta.order()), InitPolicy::Stationary).unwrap();
            let fd = quasi_loglik(&s, &Theta::from_slice(&dn, theta.order()), InitPolicy::Stationary).unwrap();
            let num = (fu - fd) / (2.0 * h);
            assert!((num - g[i]).abs() <= 1e-5 * g[i].abs().max(1e-2), "{i}: {num} vs {}", g[i]);
        }
    }

    #[test]
    fn fit_recovers_parameters() {
        let s = sample(7200, 7);
        let rep = fit(&s, ModelOrder::new(1, 1).unwrap(), &FitOptions::default()).unwrap();
        assert!(rep.converged(), "{:?}", rep.blocks);
        // ω has a standard error of 0.1 to 0.15 at this size, so it gets a
        // 3·se band; the dimensionless coefficients must sit within 0.1.
        let names = crate::model::parameter_names(rep.theta_hat.order());
        for (i, (est, truth)) in rep.theta_hat.to_vec().iter().zip(reference().to_vec()).enumerate() {
            let tol = if names[i].starts_with("omega") { 3.0 * rep.se[i] } else { 0.1 };
            assert!((est - truth).abs() < tol, "{}: {est} ({})", names[i], rep.se[i]);
        }
        assert!(rep.se.iter().all(|v| v.is_finite() && *v > 0.0));
        let g = score(&s, &rep.theta_hat, InitPolicy::Stationary).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-6), "{g:?}");
    }

    #[test]
    fn requires_both_signs_and_enough_data() {
        let s = SeriesZ::new(vec![1; 500]);
        assert!(matches!(fit(&s, ModelOrder::new(1, 1).unwrap(), &FitOptions::default()), Err(Error::DegenerateData(_))));
        let s = sample(50, 1);
        assert!(matches!(fit(&s, ModelOrder::new(1, 1).unwrap(), &FitOptions::default()), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn poisson_data_flags_no_overdispersion() {
        let s = sample(7200, 11);
        let d = estimate_dispersion(&s, &reference(), InitPolicy::Stationary).unwrap();
        assert!(d.r1 > 20.0 && d.r2 > 20.0, "{d:?}");
    }
}
