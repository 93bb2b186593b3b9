//! Forecast evaluation: non-randomized PIT histograms and one-step sign
//! forecasts compared by Diebold–Mariano tests.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::dists::MixedDifferenceLaw;
use crate::error::{Error, Result};
use crate::estimate::{fit_phi, FitOptions, FitReport};
use crate::model::{filter, sign_filter, Family, InitPolicy, SeriesZ, Theta, LAMBDA2_GUARD, PI_GUARD};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PitHistogram {
    pub bins: usize,
    pub heights: Vec<f64>,
    pub band_low: f64,
    pub band_high: f64,
    pub n: usize,
    pub family: Family,
    /// Observations whose predictive cdf had no jump at the observed value.
    pub zero_mass: usize,
}

impl PitHistogram {
    /// Indices of bins whose height falls outside the band.
    pub fn outside_band(&self) -> Vec<usize> {
        (0..self.bins)
            .filter(|&j| self.heights[j] < self.band_low || self.heights[j] > self.band_high)
            .collect()
    }
}

/// `(P(Y < y), P(Y ≤ y))` pairs, aggregated into a histogram.
pub fn pit_from_bounds(bounds: &[(f64, f64)], bins: usize, family: Family) -> Result<PitHistogram> {
    if bins < 2 {
        return Err(Error::domain(format!("need at least 2 bins (got {bins})")));
    }
    let n = bounds.len();
    if n == 0 {
        return Err(Error::degenerate("no observations"));
    }
    let mut zero_mass = 0;
    let mut fbar = vec![0.0; bins + 1];
    for &(lo, hi) in bounds {
        let width = hi - lo;
        if !(width > 0.0) {
            zero_mass += 1;
        }
        for (j, f) in fbar.iter_mut().enumerate() {
            let u = j as f64 / bins as f64;
            *f += if width > 0.0 {
                ((u - lo) / width).clamp(0.0, 1.0)
            } else {
                f64::from(u8::from(u >= hi))
            };
        }
    }
    let heights: Vec<f64> = fbar.windows(2).map(|w| (w[1] - w[0]) / n as f64).collect();
    let e = 1.0 / bins as f64;
    let half = 1.96 * (e * (1.0 - e) / n as f64).sqrt();
    Ok(PitHistogram { bins, heights, band_low: e - half, band_high: e + half, n, family, zero_mass })
}

/// PIT histogram of the fitted model under `family`.
pub fn pit_histogram(series: &SeriesZ, fit: &FitReport, family: Family, bins: usize) -> Result<PitHistogram> {
    pit_histogram_at(series, &fit.theta_hat, fit.init, family, bins)
}

/// PIT histogram at a given parameter.
pub fn pit_histogram_at(series: &SeriesZ, theta: &Theta, init: InitPolicy, family: Family, bins: usize) -> Result<PitHistogram> {
    family.validate()?;
    let path = filter(series, theta, init)?;
    let bounds = series
        .y()
        .iter()
        .enumerate()
        .map(|(t, &y)| {
            let pi = path.pi(t).clamp(PI_GUARD, 1.0 - PI_GUARD);
            let l1 = path.lam1(t).max(f64::MIN_POSITIVE);
            let l2 = path.lam2(t).max(1.0 + LAMBDA2_GUARD);
            let law = MixedDifferenceLaw::new(pi, family.pos_dist(l1)?, family.neg_dist(l2)?)?;
            Ok((law.cdf(y - 1)?, law.cdf(y)?))
        })
        .collect::<Result<Vec<_>>>()?;
    pit_from_bounds(&bounds, bins, family)
}

/// Outcome of a one-sided Diebold–Mariano test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DmTest {
    pub stat: f64,
    /// `P(Z ≤ stat)`: small when the first loss is smaller.
    pub p_value: f64,
    pub bandwidth: usize,
    /// The long-run variance vanished; `p_value` is set to 1.
    pub degenerate: bool,
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Tests `E(loss_a − loss_b) = 0` against `< 0` with a Bartlett long-run
/// variance of bandwidth `⌊T^{1/3}⌋`.
pub fn diebold_mariano(loss_a: &[f64], loss_b: &[f64]) -> Result<DmTest> {
    if loss_a.len() != loss_b.len() {
        return Err(Error::domain(format!("loss lengths differ ({} vs {})", loss_a.len(), loss_b.len())));
    }
    let t = loss_a.len();
    if t < 30 {
        return Err(Error::domain(format!("need at least 30 losses (got {t})")));
    }
    let d: Vec<f64> = loss_a.iter().zip(loss_b).map(|(a, b)| a - b).collect();
    let mean = d.iter().sum::<f64>() / t as f64;
    let bandwidth = (t as f64).cbrt().floor() as usize;
    let autocov = |h: usize| (h..t).map(|i| (d[i] - mean) * (d[i - h] - mean)).sum::<f64>() / t as f64;
    let mut lrv = autocov(0);
    for h in 1..=bandwidth {
        lrv += 2.0 * (1.0 - h as f64 / (bandwidth + 1) as f64) * autocov(h);
    }
    if !(lrv > 0.0) {
        return Ok(DmTest { stat: 0.0, p_value: 1.0, bandwidth, degenerate: true });
    }
    let stat = mean / (lrv / t as f64).sqrt();
    Ok(DmTest { stat, p_value: normal_cdf(stat), bandwidth, degenerate: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignEvalOptions {
    /// Refit the sign block every this many steps; 1 refits at every step.
    pub refit_every: usize,
    pub fit: FitOptions,
}

impl Default for SignEvalOptions {
    fn default() -> Self {
        Self { refit_every: 1, fit: FitOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignEvalReport {
    pub m: usize,
    pub forecasts: usize,
    /// Fitted sign model.
    pub mae1: f64,
    /// Constant 1/2.
    pub mae2: f64,
    /// Expanding sample mean.
    pub mae3: f64,
    pub dm_mae2: DmTest,
    pub dm_mae3: DmTest,
    pub refit_every: usize,
}

/// One-step sign forecasts for `B_m, …, B_{n−1}` (zero-based), each made
/// from the observations before it.
pub fn sign_forecast_losses(signs: &[u8], m: usize, opts: &SignEvalOptions) -> Result<[Vec<f64>; 3]> {
    let n = signs.len();
    if m == 0 || m >= n {
        return Err(Error::domain(format!("training size {m} must lie in 1..{n}")));
    }
    if opts.refit_every == 0 {
        return Err(Error::domain("refit cadence must be at least 1"));
    }
    let ones = signs[..m].iter().filter(|&&b| b == 1).count();
    if ones == 0 || ones == m {
        return Err(Error::degenerate(format!("the first {m} observations share one sign")));
    }
    let mut phi = fit_phi(&signs[..m], &opts.fit, None)?.0;
    let mut count = ones;
    let mut losses = [Vec::with_capacity(n - m), Vec::with_capacity(n - m), Vec::with_capacity(n - m)];
    for t in m..n {
        if t > m && (t - m).is_multiple_of(opts.refit_every) {
            phi = fit_phi(&signs[..t], &opts.fit, Some(&phi))?.0;
        }
        let f1 = sign_filter(&signs[..t], &phi, opts.fit.init).next;
        let f3 = count as f64 / t as f64;
        let b = f64::from(signs[t]);
        losses[0].push((b - f1).abs());
        losses[1].push((b - 0.5).abs());
        losses[2].push((b - f3).abs());
        count += usize::from(signs[t]);
    }
    Ok(losses)
}

/// MAEs and Diebold–Mariano p-values for each training size.
pub fn sign_forecast_eval(series: &SeriesZ, m_values: &[usize], opts: &SignEvalOptions) -> Result<Vec<SignEvalReport>> {
    m_values
        .par_iter()
        .map(|&m| {
            let [l1, l2, l3] = sign_forecast_losses(series.signs(), m, opts)?;
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            Ok(SignEvalReport {
                m,
                forecasts: l1.len(),
                mae1: mean(&l1),
                mae2: mean(&l2),
                mae3: mean(&l3),
                dm_mae2: diebold_mariano(&l1, &l2)?,
                dm_mae3: diebold_mariano(&l1, &l3)?,
                refit_every: opts.refit_every,
            })
        })
        .collect()
}
