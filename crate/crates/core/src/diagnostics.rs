//! Residual autocorrelations and portmanteau goodness-of-fit tests.
//!
//! Residuals are `ε̂ₜ = Yₜ − 1{Yₜ ≥ 0}λ̃₁ₜ + 1{Yₜ < 0}λ̃₂ₜ` with `ε̂ₜ = 0`
//! outside `1..=n`. Two p-values are produced: a chi-square one from
//! `n ρ̂ᵀ V⁻¹ ρ̂` and a random-weighting bootstrap one.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};
use crate::estimate::{obs_scores, Covariance, FitReport};
use crate::linalg::{spd_inverse, symmetric_pinv};
use crate::model::{filter, intensity_levels, FilterPath, InitPolicy, SeriesZ, Theta};
use crate::rng::derived_stream;

/// Residuals and their mean square `γ̂₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSeries {
    pub eps: Vec<f64>,
    pub gamma0: f64,
}

impl ResidualSeries {
    pub fn from_eps(eps: Vec<f64>) -> Self {
        let gamma0 = eps.iter().map(|e| e * e).sum::<f64>() / eps.len().max(1) as f64;
        Self { eps, gamma0 }
    }
}

fn residual_values(y: &[i64], lam1: &[f64], lam2: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(lam1.iter().zip(lam2))
        .map(|(&y, (&l1, &l2))| if y >= 0 { y as f64 - l1 } else { y as f64 + l2 })
        .collect()
}

/// Residuals at `theta`.
pub fn residuals(series: &SeriesZ, theta: &Theta, init: InitPolicy) -> Result<ResidualSeries> {
    let path = filter(series, theta, init)?;
    Ok(residuals_from_path(series, &path))
}

pub fn residuals_from_path(series: &SeriesZ, path: &FilterPath) -> ResidualSeries {
    ResidualSeries::from_eps(residual_values(series.y(), &path.lam1.lam, &path.lam2.lam))
}

/// `γ̂ₕ = (1/n) Σₜ wₜ ε̂ₜ ε̂ₜ₋ₕ` for `h = 1..=k`; unit weights when `w` is `None`.
fn lagged_products(eps: &[f64], k: usize, w: Option<&[f64]>) -> Vec<f64> {
    let n = eps.len();
    (1..=k)
        .map(|h| {
            let s: f64 = match w {
                None => (h..n).map(|t| eps[t] * eps[t - h]).sum(),
                Some(w) => (h..n).map(|t| w[t] * eps[t] * eps[t - h]).sum(),
            };
            s / n as f64
        })
        .collect()
}

/// `ρ̂ₕ = γ̂ₕ / γ̂₀` for `h = 1..=k`.
pub fn residual_acf(res: &ResidualSeries, k: usize) -> Result<Vec<f64>> {
    let n = res.eps.len();
    if k == 0 || k >= n {
        return Err(Error::domain(format!("lag count {k} must lie in 1..{n}")));
    }
    if !(res.gamma0 > 0.0) {
        return Err(Error::degenerate("residuals are identically zero"));
    }
    Ok(lagged_products(&res.eps, k, None).into_iter().map(|g| g / res.gamma0).collect())
}

/// The pieces `Ê`, `D̂`, `Ĉ` of the autocorrelation covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct VhatParts {
    pub e: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

/// `Ê(i,j) = (1/n) Σ ε̂ₜ² ε̂ₜ₋ᵢ ε̂ₜ₋ⱼ`, `D̂(i,·) = (1/n) Σ ε̂ₜ ∂ε̂ₜ₊ᵢ/∂θ`,
/// `Ĉ(i,·) = (1/n) Σ ε̂ₜ ε̂ₜ₋ᵢ ∂ℓ̃ₜ/∂θ`.
pub fn v_hat_parts(series: &SeriesZ, path: &FilterPath, res: &ResidualSeries, k: usize) -> VhatParts {
    let n = series.len();
    let eps = &res.eps;
    let y = series.y();
    let kp = path.lam1.grad(0).len();
    let d = 3 + 2 * kp;
    let nf = n as f64;

    let mut e = DMatrix::zeros(k, k);
    for i in 1..=k {
        for j in i..=k {
            let s: f64 = (j..n).map(|t| eps[t] * eps[t] * eps[t - i] * eps[t - j]).sum();
            e[(i - 1, j - 1)] = s / nf;
            e[(j - 1, i - 1)] = s / nf;
        }
    }

    // ∂ε̂ₜ/∂θ: zero on φ, −∂λ̃₁ₜ on ψ₁ when Yₜ ≥ 0, +∂λ̃₂ₜ on ψ₂ when Yₜ < 0
    let deps = |t: usize, out: &mut [f64]| {
        out.iter_mut().for_each(|v| *v = 0.0);
        if y[t] >= 0 {
            for (o, g) in out[3..3 + kp].iter_mut().zip(path.lam1.grad(t)) {
                *o = -g;
            }
        } else {
            out[3 + kp..].copy_from_slice(path.lam2.grad(t));
        }
    };
    let mut dmat = DMatrix::zeros(k, d);
    let mut buf = vec![0.0; d];
    for i in 1..=k {
        for t in 0..n.saturating_sub(i) {
            deps(t + i, &mut buf);
            for (j, b) in buf.iter().enumerate() {
                dmat[(i - 1, j)] += eps[t] * b;
            }
        }
    }
    dmat /= nf;

    let scores = obs_scores(series, path);
    let mut c = DMatrix::zeros(k, d);
    for i in 1..=k {
        for t in i..n {
            let w = eps[t] * eps[t - i];
            for (j, s) in scores[t * d..(t + 1) * d].iter().enumerate() {
                c[(i - 1, j)] += w * s;
            }
        }
    }
    c /= nf;
    VhatParts { e, d: dmat, c }
}

/// `V̂ = γ̂₀⁻² (Ê + ĈĴ⁻¹D̂ᵀ + D̂Ĵ⁻¹Ĉᵀ + D̂Σ̂D̂ᵀ)`, symmetrized.
pub fn assemble_v_hat(parts: &VhatParts, j_inv: &DMatrix<f64>, sigma: &DMatrix<f64>, gamma0: f64) -> DMatrix<f64> {
    let VhatParts { e, d, c } = parts;
    let cjd = c * j_inv * d.transpose();
    let v = (e + &cjd + cjd.transpose() + d * sigma * d.transpose()) / (gamma0 * gamma0);
    (&v + v.transpose()) * 0.5
}

fn information_inverse(cov: &Covariance) -> Result<DMatrix<f64>> {
    if !cov.available.iter().all(|&a| a) {
        return Err(Error::degenerate("an information block is singular; the test is unavailable"));
    }
    spd_inverse(&cov.j).ok_or_else(|| Error::degenerate("information matrix is singular"))
}

/// Asymptotic `V̂` at the fitted parameter.
pub fn v_hat(series: &SeriesZ, fit: &FitReport, k: usize) -> Result<DMatrix<f64>> {
    let path = filter(series, &fit.theta_hat, fit.init)?;
    let res = residuals_from_path(series, &path);
    residual_acf(&res, k)?;
    let parts = v_hat_parts(series, &path, &res, k);
    let j_inv = information_inverse(&fit.covariance)?;
    Ok(assemble_v_hat(&parts, &j_inv, &fit.covariance.sigma, res.gamma0))
}

/// `1 − Ψₖ(stat)` for the chi-square law with `k` degrees of freedom.
pub fn chi2_sf(stat: f64, k: usize) -> f64 {
    if !(stat > 0.0) {
        return 1.0;
    }
    if stat.is_infinite() {
        return 0.0;
    }
    gamma_ur(k as f64 / 2.0, stat / 2.0)
}

/// `n ρ̂ᵀ V⁻¹ ρ̂`; falls back to the pseudo-inverse when `V` is singular.
/// The flag reports whether the fallback was used.
pub fn quadratic_stat(n: usize, rho: &[f64], v: &DMatrix<f64>) -> (f64, bool) {
    let r = DVector::from_column_slice(rho);
    let (inv, pinv) = match spd_inverse(v) {
        Some(inv) => (inv, false),
        None => (symmetric_pinv(v), true),
    };
    let stat = n as f64 * r.dot(&(&inv * &r));
    (stat.max(0.0), pinv)
}

/// Law of the bootstrap weights.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightDist {
    /// Standard exponential (mean and variance one).
    #[default]
    Exponential,
    /// All weights equal to one; the bootstrap collapses onto the estimate.
    Unit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub p2: f64,
    /// Empirical covariance of `√n ρ̂*` over the replicates.
    pub v_star: DMatrix<f64>,
    pub replicates: usize,
}

/// Random-weighting bootstrap with the one-step Newton shortcut.
///
/// Replicate `j` draws its weights from `derived_stream(seed, j)`, so the
/// result does not depend on how replicates are scheduled.
#[allow(clippy::too_many_arguments)]
pub fn rw_bootstrap(
    series: &SeriesZ,
    theta: &Theta,
    path: &FilterPath,
    cov: &Covariance,
    rho: &[f64],
    gamma0: f64,
    b: usize,
    weights: WeightDist,
    seed: u64,
    init: InitPolicy,
) -> Result<BootstrapResult> {
    if b < 2 {
        return Err(Error::domain(format!("bootstrap needs at least 2 replicates (got {b})")));
    }
    let j_inv = information_inverse(cov)?;
    let n = series.len();
    let k = rho.len();
    let d = theta.dim();
    let scores = obs_scores(series, path);
    let order = theta.order();
    let theta_hat = DVector::from_vec(theta.to_vec());
    let abs_y = series.abs_values();
    let rho_sq: f64 = rho.iter().map(|r| r * r).sum();

    let replicate = |idx: usize| -> Vec<f64> {
        let w: Vec<f64> = match weights {
            WeightDist::Exponential => {
                let mut rng = derived_stream(seed, idx as u64);
                (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect()
            }
            WeightDist::Unit => vec![1.0; n],
        };
        let mut g = DVector::zeros(d);
        for (t, wt) in w.iter().enumerate() {
            let f = (wt - 1.0) / n as f64;
            if f != 0.0 {
                for (gi, s) in g.iter_mut().zip(&scores[t * d..(t + 1) * d]) {
                    *gi += f * s;
                }
            }
        }
        let star = &theta_hat + &j_inv * g;
        let ts = Theta::from_slice(star.as_slice(), order);
        let lam1 = intensity_levels(&abs_y, series.signs(), &ts.psi1, init);
        let lam2 = intensity_levels(&abs_y, series.signs(), &ts.psi2, init);
        let eps = residual_values(series.y(), &lam1, &lam2);
        lagged_products(&eps, k, Some(&w))
            .into_iter()
            .zip(rho)
            .map(|(gh, r)| gh / gamma0 - r)
            .collect()
    };
    let reps: Vec<Vec<f64>> = (0..b).into_par_iter().map(replicate).collect();

    let exceed = reps
        .iter()
        .filter(|r| r.iter().map(|v| v * v).sum::<f64>() > rho_sq)
        .count();
    let mut mean = vec![0.0; k];
    for r in &reps {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / b as f64;
        }
    }
    let mut v_star = DMatrix::zeros(k, k);
    for r in &reps {
        for i in 0..k {
            let di = r[i] - mean[i];
            for j in i..k {
                v_star[(i, j)] += di * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..k {
        for j in i..k {
            let v = v_star[(i, j)] * n as f64 / (b - 1) as f64;
            v_star[(i, j)] = v;
            v_star[(j, i)] = v;
        }
    }
    Ok(BootstrapResult { p2: exceed as f64 / b as f64, v_star, replicates: b })
}

/// Which covariance enters the chi-square p-value reported as `p1`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum P1Variance {
    /// The bootstrap covariance `V̂*`.
    #[default]
    Bootstrap,
    /// The plug-in asymptotic covariance `V̂`.
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofOptions {
    pub lags: usize,
    pub bootstrap: usize,
    pub weights: WeightDist,
    pub seed: u64,
    pub p1_variance: P1Variance,
}

impl Default for GofOptions {
    fn default() -> Self {
        Self { lags: 10, bootstrap: 500, weights: WeightDist::Exponential, seed: 0, p1_variance: P1Variance::Bootstrap }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GofReport {
    pub k: usize,
    pub n: usize,
    pub gamma0: f64,
    pub rho_hat: Vec<f64>,
    /// Plug-in asymptotic covariance.
    pub v_hat: DMatrix<f64>,
    /// Bootstrap covariance.
    pub v_star: DMatrix<f64>,
    /// Statistic behind `p1` (per `p1_variance`).
    pub stat: f64,
    pub p1: f64,
    pub stat_asymptotic: f64,
    pub p1_asymptotic: f64,
    pub stat_bootstrap: f64,
    pub p1_bootstrap: f64,
    pub p2: f64,
    /// A pseudo-inverse replaced a singular covariance.
    pub pinv_used: bool,
    pub bootstrap: usize,
    pub weights: WeightDist,
    pub seed: u64,
    pub p1_variance: P1Variance,
}

/// Both portmanteau tests for a fitted model.
pub fn gof(series: &SeriesZ, fit: &FitReport, opts: &GofOptions) -> Result<GofReport> {
    let path = filter(series, &fit.theta_hat, fit.init)?;
    let res = residuals_from_path(series, &path);
    let k = opts.lags;
    let rho = residual_acf(&res, k)?;
    let parts = v_hat_parts(series, &path, &res, k);
    let j_inv = information_inverse(&fit.covariance)?;
    let v = assemble_v_hat(&parts, &j_inv, &fit.covariance.sigma, res.gamma0);
    let boot = rw_bootstrap(
        series,
        &fit.theta_hat,
        &path,
        &fit.covariance,
        &rho,
        res.gamma0,
        opts.bootstrap,
        opts.weights,
        opts.seed,
        fit.init,
    )?;
    let n = series.len();
    let (stat_a, pinv_a) = quadratic_stat(n, &rho, &v);
    let (stat_b, pinv_b) = quadratic_stat(n, &rho, &boot.v_star);
    let (p1_a, p1_b) = (chi2_sf(stat_a, k), chi2_sf(stat_b, k));
    let (stat, p1, pinv_used) = match opts.p1_variance {
        P1Variance::Bootstrap => (stat_b, p1_b, pinv_b),
        P1Variance::Asymptotic => (stat_a, p1_a, pinv_a),
    };
    Ok(GofReport {
        k,
        n,
        gamma0: res.gamma0,
        rho_hat: rho,
        v_hat: v,
        v_star: boot.v_star,
        stat,
        p1,
        stat_asymptotic: stat_a,
        p1_asymptotic: p1_a,
        stat_bootstrap: stat_b,
        p1_bootstrap: p1_b,
        p2: boot.p2,
        pinv_used,
        bootstrap: opts.bootstrap,
        weights: opts.weights,
        seed: opts.seed,
        p1_variance: opts.p1_variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::{fit, FitOptions};
    use crate::model::{simulate, DgpSpec, Family, Linkage, ModelOrder, SignSpec};
    use crate::rng;

    fn sample(n: usize, seed: u64) -> SeriesZ {
        let spec = DgpSpec {
            theta: Theta::order11(0.2, 0.2, 0.2, 1.0, 0.3, 0.3, 2.0, 0.3, 0.3).unwrap(),
            family: Family::Poisson,
            linkage: Linkage::Linear,
            sign: SignSpec::BernoulliIngarch,
        };
        simulate(&spec, n, 500, &mut rng::stream(seed)).unwrap()
    }

    #[test]
    fn residual_branches() {
        assert_eq!(residual_values(&[3, -2], &[2.5, 9.0], &[9.0, 1.5]), vec![0.5, -0.5]);
    }

    #[test]
    fn acf_with_zero_padding() {
        let n = 50;
        let res = ResidualSeries::from_eps(vec![2.0; n]);
        let rho = residual_acf(&res, 3).unwrap();
        for (h, r) in rho.iter().enumerate() {
            assert!((r - (n - h - 1) as f64 / n as f64).abs() < 1e-15);
        }
        let alt: Vec<f64> = (0..n).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let rho = residual_acf(&ResidualSeries::from_eps(alt), 1).unwrap();
        assert!((rho[0] + (n - 1) as f64 / n as f64).abs() < 1e-15);
        assert!(residual_acf(&ResidualSeries::from_eps(vec![0.0; 5]), 1).is_err());
    }

    #[test]
    fn v_hat_reduces_without_couplings() {
        let eps = vec![1.0, -0.5, 0.3, 2.0, -1.0, 0.2];
        let res = ResidualSeries::from_eps(eps.clone());
        let k = 1;
        let e: f64 = (1..eps.len()).map(|t| eps[t] * eps[t] * eps[t - 1] * eps[t - 1]).sum::<f64>() / 6.0;
        let parts = VhatParts { e: DMatrix::from_element(1, 1, e), d: DMatrix::zeros(k, 9), c: DMatrix::zeros(k, 9) };
        let v = assemble_v_hat(&parts, &DMatrix::identity(9, 9), &DMatrix::identity(9, 9), res.gamma0);
        assert!((v[(0, 0)] - e / res.gamma0.powi(2)).abs() < 1e-15);
    }

    #[test]
    fn chi2_tail_values() {
        assert_eq!(chi2_sf(0.0, 10), 1.0);
        assert!((chi2_sf(18.307, 10) - 0.05).abs() < 1e-4);
    }

    #[test]
    fn unit_weights_collapse() {
        let s = sample(600, 3);
        let f = fit(&s, ModelOrder::new(1, 1).unwrap(), &FitOptions::default()).unwrap();
        let opts = GofOptions { bootstrap: 20, weights: WeightDist::Unit, ..Default::default() };
        let g = gof(&s, &f, &opts).unwrap();
        assert_eq!(g.p2, 0.0);
        assert!(g.v_star.iter().all(|v| v.abs() < 1e-20));
    }

    #[test]
    fn bootstrap_is_deterministic_and_symmetric() {
        let s = sample(600, 4);
        let f = fit(&s, ModelOrder::new(1, 1).unwrap(), &FitOptions::default()).unwrap();
        let opts = GofOptions { bootstrap: 100, seed: 9, ..Default::default() };
        let a = gof(&s, &f, &opts).unwrap();
        let b = gof(&s, &f, &opts).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a.p1) && (0.0..=1.0).contains(&a.p2));
        assert!((&a.v_hat - a.v_hat.transpose()).norm() < 1e-12);
        let min_eig = a.v_hat.clone().symmetric_eigen().eigenvalues.min();
        assert!(min_eig > -1e-8);
    }
}
