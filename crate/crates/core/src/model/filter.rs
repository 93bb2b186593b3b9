use serde::{Deserialize, Serialize};

use super::{Family, PhiParams, PsiParams, SeriesZ, Side, Theta};
use crate::error::{Error, Result};

/// Lower clamp applied to π̃ₜ and 1 − π̃ₜ before taking logs.
pub const PI_GUARD: f64 = 1e-10;
/// Floor applied to λ̃₂ₜ − 1 before taking logs.
pub const LAMBDA2_GUARD: f64 = 1e-10;

/// Starting values for the filters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitPolicy {
    /// λ̃ₛ₀ = ωₛ/(1 − Σβₛ), π̃₀ = c/(1 − b), B₀ = 1, pre-sample |Y| = 0.
    #[default]
    Stationary,
    /// Pre-sample values taken from sample means, independent of θ.
    SampleMean,
}

/// π̃ₜ and ∂π̃ₜ/∂(c, a, b) for t = 1..n.
#[derive(Debug, Clone, PartialEq)]
pub struct SignPath {
    pub pi: Vec<f64>,
    pub dpi: Vec<[f64; 3]>,
    /// One-step-ahead value π̃ₙ₊₁.
    pub next: f64,
}

/// λ̃ₜ and its gradient with respect to `(ω, α…, β…)` for t = 1..n.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityPath {
    pub lam: Vec<f64>,
    grad: Vec<f64>,
    k: usize,
}

impl IntensityPath {
    pub fn grad(&self, t: usize) -> &[f64] {
        &self.grad[t * self.k..(t + 1) * self.k]
    }

    pub fn len(&self) -> usize {
        self.lam.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lam.is_empty()
    }
}

/// Filtered selector probabilities and intensities with gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterPath {
    pub sign: SignPath,
    pub lam1: IntensityPath,
    pub lam2: IntensityPath,
}

impl FilterPath {
    pub fn len(&self) -> usize {
        self.sign.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sign.pi.is_empty()
    }

    pub fn pi(&self, t: usize) -> f64 {
        self.sign.pi[t]
    }

    pub fn lam1(&self, t: usize) -> f64 {
        self.lam1.lam[t]
    }

    pub fn lam2(&self, t: usize) -> f64 {
        self.lam2.lam[t]
    }
}

/// Runs all three filters after validating `theta`.
pub fn filter(series: &SeriesZ, theta: &Theta, init: InitPolicy) -> Result<FilterPath> {
    theta.validate()?;
    if series.is_empty() {
        return Err(Error::degenerate("cannot filter an empty series"));
    }
    let abs_y = series.abs_values();
    Ok(FilterPath {
        sign: sign_filter(series.signs(), &theta.phi, init),
        lam1: intensity_filter(&abs_y, series.signs(), &theta.psi1, init),
        lam2: intensity_filter(&abs_y, series.signs(), &theta.psi2, init),
    })
}

fn sign_start(b: &[u8], phi: &PhiParams, init: InitPolicy) -> (f64, [f64; 3]) {
    match init {
        InitPolicy::Stationary => {
            let s = 1.0 - phi.b;
            (phi.c / s, [1.0 / s, 0.0, phi.c / (s * s)])
        }
        InitPolicy::SampleMean => {
            let m = if b.is_empty() {
                0.5
            } else {
                b.iter().map(|&v| f64::from(v)).sum::<f64>() / b.len() as f64
            };
            (m.clamp(PI_GUARD, 1.0 - PI_GUARD), [0.0; 3])
        }
    }
}

/// Selector recursion `π̃ₜ = c + a·Bₜ₋₁ + b·π̃ₜ₋₁` with its gradient.
///
/// No validation is done on `phi`.
pub fn sign_filter(b: &[u8], phi: &PhiParams, init: InitPolicy) -> SignPath {
    let (mut prev, mut dprev) = sign_start(b, phi, init);
    let mut prev_b = 1.0;
    let mut pi = Vec::with_capacity(b.len());
    let mut dpi = Vec::with_capacity(b.len());
    for &bt in b {
        let cur = phi.c + phi.a * prev_b + phi.b * prev;
        let d = [
            1.0 + phi.b * dprev[0],
            prev_b + phi.b * dprev[1],
            prev + phi.b * dprev[2],
        ];
        pi.push(cur);
        dpi.push(d);
        prev = cur;
        dprev = d;
        prev_b = f64::from(bt);
    }
    let next = phi.c + phi.a * prev_b + phi.b * prev;
    SignPath { pi, dpi, next }
}

fn side_mean(abs_y: &[f64], signs: &[u8], side: Side) -> Option<f64> {
    let want = u8::from(side == Side::Positive);
    let (sum, count) = abs_y
        .iter()
        .zip(signs)
        .filter(|(_, &s)| s == want)
        .fold((0.0, 0usize), |(s, c), (&v, _)| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn sample_mean_level(abs_y: &[f64], signs: &[u8], side: Side) -> f64 {
    match side {
        Side::Positive => side_mean(abs_y, signs, side).unwrap_or(1.0).max(1e-3),
        Side::Negative => side_mean(abs_y, signs, side).unwrap_or(2.0).max(1.0 + 1e-3),
    }
}

/// Pre-sample intensity and its gradient.
fn intensity_start(
    abs_y: &[f64],
    signs: &[u8],
    psi: &PsiParams,
    init: InitPolicy,
) -> (f64, Vec<f64>) {
    let k = 1 + psi.alpha.len() + psi.beta.len();
    let mut d = vec![0.0; k];
    let slack = 1.0 - psi.beta_sum();
    match init {
        InitPolicy::Stationary if slack > 0.0 => {
            let level = psi.omega / slack;
            d[0] = 1.0 / slack;
            let q = psi.alpha.len();
            for dj in &mut d[1 + q..] {
                *dj = level / slack;
            }
            (level, d)
        }
        // Outside the admissible region the stationary level is undefined, so
        // fall back to the data.
        _ => (sample_mean_level(abs_y, signs, psi.side), d),
    }
}

/// Intensity recursion `λ̃ₜ = ω + Σ αᵢ|Yₜ₋ᵢ| + Σ βⱼ λ̃ₜ₋ⱼ` with its gradient.
///
/// No validation is done on `psi`.
pub fn intensity_filter(abs_y: &[f64], signs: &[u8], psi: &PsiParams, init: InitPolicy) -> IntensityPath {
    let q = psi.alpha.len();
    let p = psi.beta.len();
    let k = 1 + q + p;
    let n = abs_y.len();
    let (lam0, dlam0) = intensity_start(abs_y, signs, psi, init);
    let mut lam = Vec::with_capacity(n);
    let mut grad = vec![0.0; n * k];
    for t in 0..n {
        let mut level = psi.omega;
        let (done, rest) = grad.split_at_mut(t * k);
        let g = &mut rest[..k];
        g[0] = 1.0;
        for i in 1..=q {
            let y = if t >= i { abs_y[t - i] } else { 0.0 };
            level += psi.alpha[i - 1] * y;
            g[i] = y;
        }
        for j in 1..=p {
            let bj = psi.beta[j - 1];
            let (prev, dprev) = if t >= j {
                (lam[t - j], &done[(t - j) * k..(t - j + 1) * k])
            } else {
                (lam0, dlam0.as_slice())
            };
            level += bj * prev;
            g[q + j] += prev;
            for (gi, di) in g.iter_mut().zip(dprev) {
                *gi += bj * di;
            }
        }
        lam.push(level);
    }
    IntensityPath { lam, grad, k }
}

/// Intensity levels only, without gradients or validity checks.
pub fn intensity_levels(abs_y: &[f64], signs: &[u8], psi: &PsiParams, init: InitPolicy) -> Vec<f64> {
    let q = psi.alpha.len();
    let p = psi.beta.len();
    let (lam0, _) = intensity_start(abs_y, signs, psi, init);
    let mut lam: Vec<f64> = Vec::with_capacity(abs_y.len());
    for t in 0..abs_y.len() {
        let mut level = psi.omega;
        for i in 1..=q.min(t) {
            level += psi.alpha[i - 1] * abs_y[t - i];
        }
        for j in 1..=p {
            level += psi.beta[j - 1] * if t >= j { lam[t - j] } else { lam0 };
        }
        lam.push(level);
    }
    lam
}

/// Conditional mean and variance of Yₜ given the past.
///
/// Returns `None` when `t` is out of range or the family rejects the intensities.
pub fn conditional_moments(path: &FilterPath, t: usize, family: Family) -> Option<(f64, f64)> {
    if t >= path.len() {
        return None;
    }
    moments_at(path.pi(t), path.lam1(t), path.lam2(t), family).ok()
}

pub(crate) fn moments_at(pi: f64, lam1: f64, lam2: f64, family: Family) -> Result<(f64, f64)> {
    let v1 = family.pos_dist(lam1)?.variance();
    let v2 = family.neg_dist(lam2)?.variance();
    let mean = pi * lam1 - (1.0 - pi) * lam2;
    let var = pi * v1 + (1.0 - pi) * v2 + pi * (1.0 - pi) * (lam1 + lam2).powi(2);
    Ok((mean, var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelOrder;

    fn reference() -> Theta {
        Theta::order11(0.2, 0.2, 0.2, 1.0, 0.3, 0.3, 2.0, 0.3, 0.3).unwrap()
    }

    #[test]
    fn one_step_sign() {
        let phi = PhiParams::new(0.2, 0.2, 0.2).unwrap();
        // B₀ = 1 and π̃₀ = c/(1 − b) = 0.25
        let path = sign_filter(&[1], &phi, InitPolicy::Stationary);
        assert!((path.pi[0] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn one_step_intensity() {
        let psi = PsiParams::new(1.0, vec![0.3], vec![0.3], Side::Positive).unwrap();
        // λ̃₀ = ω/(1 − β), pre-sample |Y| = 0
        let lam = intensity_levels(&[2.0, 0.0], &[1, 1], &psi, InitPolicy::Stationary);
        assert!((lam[0] - (1.0 + 0.3 / 0.7)).abs() < 1e-15);
        assert!((lam[1] - (1.0 + 0.3 * 2.0 + 0.3 * lam[0])).abs() < 1e-15);
        // |Yₜ₋₁| = 2 with λ̃ₜ₋₁ = 1.5
        let psi = PsiParams::new(1.05, vec![0.3], vec![0.3], Side::Positive).unwrap();
        let lam = intensity_levels(&[2.0, 0.0], &[1, 1], &psi, InitPolicy::Stationary);
        assert!((lam[0] - 1.5).abs() < 1e-12);
        assert!((lam[1] - 0.05 - 2.05).abs() < 1e-12);
    }

    #[test]
    fn negative_side_stays_above_one() {
        let psi = PsiParams::new(0.75, vec![0.0], vec![0.3], Side::Negative).unwrap();
        let lam = intensity_levels(&[0.0; 50], &[1; 50], &psi, InitPolicy::SampleMean);
        assert!(lam.iter().all(|&l| l > 1.0));
    }

    fn fd_check(psi: &PsiParams, abs_y: &[f64], signs: &[u8]) {
        let path = intensity_filter(abs_y, signs, psi, InitPolicy::Stationary);
        let base = psi.to_vec();
        let order = psi.order();
        for idx in 0..base.len() {
            let h = 1e-6;
            let mut up = base.clone();
            let mut dn = base.clone();
            up[idx] += h;
            dn[idx] -= h;
            let lu = intensity_levels(abs_y, signs, &PsiParams::from_slice(&up, order, psi.side), InitPolicy::Stationary);
            let ld = intensity_levels(abs_y, signs, &PsiParams::from_slice(&dn, order, psi.side), InitPolicy::Stationary);
            for t in 0..abs_y.len() {
                let fd = (lu[t] - ld[t]) / (2.0 * h);
                let an = path.grad(t)[idx];
                assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0), "t={t} idx={idx} fd={fd} an={an}");
            }
        }
    }

    #[test]
    fn intensity_gradient_matches_differences() {
        let abs_y: Vec<f64> = (0..40).map(|i| ((i * 7) % 5) as f64).collect();
        let signs: Vec<u8> = (0..40).map(|i| u8::from(i % 3 != 0)).collect();
        fd_check(&reference().psi1, &abs_y, &signs);
        let psi = PsiParams::new(1.5, vec![0.1, 0.2], vec![0.2, 0.1, 0.05], Side::Negative).unwrap();
        fd_check(&psi, &abs_y, &signs);
    }

    #[test]
    fn sign_gradient_matches_differences() {
        let b: Vec<u8> = (0..30).map(|i| u8::from((i * 5) % 7 < 4)).collect();
        let phi = PhiParams::new(0.15, 0.3, 0.4).unwrap();
        let path = sign_filter(&b, &phi, InitPolicy::Stationary);
        let h = 1e-6;
        for idx in 0..3 {
            let mut up = phi.to_vec();
            let mut dn = phi.to_vec();
            up[idx] += h;
            dn[idx] -= h;
            let pu = sign_filter(&b, &PhiParams::from_slice(&up), InitPolicy::Stationary);
            let pd = sign_filter(&b, &PhiParams::from_slice(&dn), InitPolicy::Stationary);
            for t in 0..b.len() {
                let fd = (pu.pi[t] - pd.pi[t]) / (2.0 * h);
                assert!((fd - path.dpi[t][idx]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn moments_examples() {
        let (m, v) = moments_at(0.5, 1.0, 2.0, Family::Poisson).unwrap();
        assert!((m + 0.5).abs() < 1e-15);
        assert!((v - 3.25).abs() < 1e-12);
        let (_, v) = moments_at(1.0, 1.0, 2.0, Family::Poisson).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn filter_rejects_invalid_theta() {
        let mut t = reference();
        t.psi2.omega = 0.5;
        let s = SeriesZ::new(vec![1, -1]);
        assert!(filter(&s, &t, InitPolicy::Stationary).is_err());
        let _ = ModelOrder::new(1, 1).unwrap();
    }
}
