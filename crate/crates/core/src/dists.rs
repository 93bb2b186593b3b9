//! Count distributions on ℕ₀ and ℕ, and the mixed difference law on ℤ.
//!
//! Each [`PosDist`] is parameterized by its mean. Negative binomial laws
//! carry the number of successes `r` alongside the mean and use the success
//! probability `p = r / (r + λ)` internally, so `Var = λ + λ²/r`.
//!
//! Shifted kinds live on ℕ = {1, 2, …} and are defined as `1 + X` where `X`
//! follows the unshifted kind with mean `λ − 1`.
//!
//! Sampling is inverse-transform through [`PosDist::quantile`], so two draws
//! sharing a uniform are ordered like their means.

use rand::distr::Open01;
use rand::Rng;
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};

/// Normalization tolerance used by property checks on pmf sums.
pub const PMF_NORMALIZATION_TOL: f64 = 1e-9;
/// Tail mass below which a cdf is treated as terminal.
pub const CDF_TERMINAL_TOL: f64 = 1e-12;
/// Largest admissible mean; beyond it counts are no longer exact in `f64`.
pub const MAX_MEAN: f64 = 1e15;

/// A count law with a mean parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PosDist {
    /// Poisson with mean `lambda > 0`, support ℕ₀.
    Poisson { lambda: f64 },
    /// `1 + Poisson(lambda − 1)`, `lambda > 1`, support ℕ.
    ShiftedPoisson { lambda: f64 },
    /// Negative binomial with `r > 0` successes and mean `lambda > 0`, support ℕ₀.
    NegBinomial { r: f64, lambda: f64 },
    /// `1 + NegBinomial(r, lambda − 1)`, `lambda > 1`, support ℕ.
    ShiftedNegBinomial { r: f64, lambda: f64 },
}

/// Base (unshifted) kernel after removing any shift.
#[derive(Debug, Clone, Copy)]
enum Base {
    Poisson { mean: f64 },
    NegBin { r: f64, p: f64, mean: f64 },
}

impl Base {
    fn mean(&self) -> f64 {
        match *self {
            Base::Poisson { mean } | Base::NegBin { mean, .. } => mean,
        }
    }

    fn variance(&self) -> f64 {
        match *self {
            Base::Poisson { mean } => mean,
            Base::NegBin { r, mean, .. } => mean + mean * mean / r,
        }
    }

    /// Where the quantile walk begins: the mean, or the normal
    /// approximation once the spread makes walking from the mean costly.
    fn walk_start(&self, u: f64) -> u64 {
        let (m, sd) = (self.mean(), self.variance().sqrt());
        if sd < 32.0 {
            return m.floor() as u64;
        }
        let z = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u);
        (m + z * sd).max(0.0).floor() as u64
    }

    fn ln_pmf(&self, k: u64) -> f64 {
        let kf = k as f64;
        match *self {
            Base::Poisson { mean } => kf * mean.ln() - mean - ln_gamma(kf + 1.0),
            Base::NegBin { r, p, .. } => {
                ln_gamma(kf + r) - ln_gamma(r) - ln_gamma(kf + 1.0) + r * p.ln() + kf * (-p).ln_1p()
            }
        }
    }

    fn pmf(&self, k: u64) -> f64 {
        self.ln_pmf(k).exp()
    }

    fn cdf(&self, k: u64) -> f64 {
        let kf = k as f64;
        match *self {
            Base::Poisson { mean } => gamma_ur(kf + 1.0, mean),
            Base::NegBin { r, p, .. } => beta_reg(r, kf + 1.0, p),
        }
    }

    /// Ratio pmf(k+1) / pmf(k).
    fn step_ratio(&self, k: u64) -> f64 {
        let kf = k as f64;
        match *self {
            Base::Poisson { mean } => mean / (kf + 1.0),
            Base::NegBin { r, p, .. } => (kf + r) / (kf + 1.0) * (1.0 - p),
        }
    }

    /// Generalized inverse `min{k : cdf(k) >= u}` on ℕ₀.
    ///
    /// Starts near the answer, walks with the pmf recurrence, then settles the
    /// boundary against [`Base::cdf`] so the answer is consistent with the
    /// cdf the caller sees.
    fn quantile(&self, u: f64) -> u64 {
        if matches!(self, Base::NegBin { .. }) && self.variance() > 1e6 {
            // heavily skewed; the normal start is far off, so bisect instead
            return self.quantile_search(u);
        }
        let mut k = self.walk_start(u);
        let mut f = self.cdf(k);
        let mut mass = self.pmf(k);
        if f >= u {
            while k > 0 && f - mass >= u {
                let prev = mass / self.step_ratio(k - 1);
                f -= mass;
                k -= 1;
                mass = prev;
                if !(mass > 0.0) {
                    mass = self.pmf(k);
                }
            }
        } else {
            let mut last_exact = f;
            let mut steps = 0u32;
            while f < u {
                mass *= self.step_ratio(k);
                k += 1;
                steps += 1;
                if !(mass > 0.0) {
                    mass = self.pmf(k);
                    if mass == 0.0 && k as f64 > self.mean() {
                        // tail mass below double precision; the cdf is 1 here
                        break;
                    }
                }
                let next = f + mass;
                if next == f || steps.is_multiple_of(64) {
                    // the running sum drifts or stalls; resync with the cdf
                    let exact = self.cdf(k);
                    if exact <= last_exact && k as f64 > self.mean() {
                        break;
                    }
                    last_exact = exact;
                    f = exact;
                } else {
                    f = next;
                }
            }
        }
        while self.cdf(k) < u && self.cdf(k + 1) > self.cdf(k) {
            k += 1;
        }
        while k > 0 && self.cdf(k - 1) >= u {
            k -= 1;
        }
        k
    }
}

impl Base {
    /// Same generalized inverse as [`Base::quantile`], by bracketing and
    /// bisecting on the cdf.
    fn quantile_search(&self, u: f64) -> u64 {
        let mut lo = 0u64;
        let mut hi = self.mean().ceil().max(1.0) as u64;
        let mut target = u;
        let mut c = self.cdf(hi);
        while c < target {
            lo = hi;
            hi = hi.saturating_mul(2);
            let next = self.cdf(hi);
            if next <= c {
                // the cdf has saturated below u
                target = next;
            }
            c = next;
        }
        if self.cdf(lo) >= target {
            return lo;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.cdf(mid) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

impl PosDist {
    pub fn poisson(lambda: f64) -> Result<Self> {
        Self::Poisson { lambda }.validated()
    }

    pub fn shifted_poisson(lambda: f64) -> Result<Self> {
        Self::ShiftedPoisson { lambda }.validated()
    }

    pub fn neg_binomial(r: f64, lambda: f64) -> Result<Self> {
        Self::NegBinomial { r, lambda }.validated()
    }

    pub fn shifted_neg_binomial(r: f64, lambda: f64) -> Result<Self> {
        Self::ShiftedNegBinomial { r, lambda }.validated()
    }

    /// Checks the parameter domain and returns `self` unchanged.
    pub fn validated(self) -> Result<Self> {
        let ok_r = |r: f64| r.is_finite() && r > 0.0;
        let (lambda, min, r_ok) = match self {
            PosDist::Poisson { lambda } => (lambda, 0.0, true),
            PosDist::ShiftedPoisson { lambda } => (lambda, 1.0, true),
            PosDist::NegBinomial { r, lambda } => (lambda, 0.0, ok_r(r)),
            PosDist::ShiftedNegBinomial { r, lambda } => (lambda, 1.0, ok_r(r)),
        };
        if !r_ok {
            return Err(Error::param(format!("{self:?}: r must be finite and > 0")));
        }
        if !(lambda > min && lambda <= MAX_MEAN) {
            return Err(Error::param(format!("{self:?}: mean must lie in ({min}, {MAX_MEAN:e}]")));
        }
        Ok(self)
    }

    /// Smallest point of the support (0 or 1).
    pub fn support_min(&self) -> i64 {
        match self {
            PosDist::Poisson { .. } | PosDist::NegBinomial { .. } => 0,
            PosDist::ShiftedPoisson { .. } | PosDist::ShiftedNegBinomial { .. } => 1,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            PosDist::Poisson { lambda }
            | PosDist::ShiftedPoisson { lambda }
            | PosDist::NegBinomial { lambda, .. }
            | PosDist::ShiftedNegBinomial { lambda, .. } => lambda,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            PosDist::Poisson { lambda } => lambda,
            PosDist::ShiftedPoisson { lambda } => lambda - 1.0,
            PosDist::NegBinomial { r, lambda } => lambda + lambda * lambda / r,
            PosDist::ShiftedNegBinomial { r, lambda } => {
                let m = lambda - 1.0;
                m + m * m / r
            }
        }
    }

    fn base(&self) -> Base {
        match *self {
            PosDist::Poisson { lambda } => Base::Poisson { mean: lambda },
            PosDist::ShiftedPoisson { lambda } => Base::Poisson { mean: lambda - 1.0 },
            PosDist::NegBinomial { r, lambda } => Base::NegBin { r, p: r / (r + lambda), mean: lambda },
            PosDist::ShiftedNegBinomial { r, lambda } => {
                let mean = lambda - 1.0;
                Base::NegBin { r, p: r / (r + mean), mean }
            }
        }
    }

    /// `ln P(X = k)`; `-inf` outside the support.
    pub fn ln_pmf(&self, k: i64) -> Result<f64> {
        self.validated()?;
        let j = k - self.support_min();
        if j < 0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.base().ln_pmf(j as u64))
    }

    /// `P(X = k)`; exactly zero outside the support.
    pub fn pmf(&self, k: i64) -> Result<f64> {
        Ok(self.ln_pmf(k)?.exp())
    }

    /// `P(X ≤ k)`.
    pub fn cdf(&self, k: i64) -> Result<f64> {
        self.validated()?;
        let j = k - self.support_min();
        if j < 0 {
            return Ok(0.0);
        }
        Ok(self.base().cdf(j as u64))
    }

    /// Generalized inverse `min{k in support : cdf(k) ≥ u}` for `u ∈ (0, 1)`.
    pub fn quantile(&self, u: f64) -> Result<i64> {
        self.validated()?;
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain(format!("quantile level {u} not in (0, 1)")));
        }
        Ok(self.base().quantile(u) as i64 + self.support_min())
    }

    /// One inverse-transform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<i64> {
        let u: f64 = rng.sample(Open01);
        self.quantile(u)
    }
}

/// `B·X₁ − (1 − B)·X₂` with `P(B = 1) = pi`, `X₁` on ℕ₀ and `X₂` on ℕ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedDifferenceLaw {
    pub pi: f64,
    pub pos: PosDist,
    pub neg: PosDist,
}

impl MixedDifferenceLaw {
    pub fn new(pi: f64, pos: PosDist, neg: PosDist) -> Result<Self> {
        let law = Self { pi, pos, neg };
        law.validate()?;
        Ok(law)
    }

    fn validate(&self) -> Result<()> {
        if !(self.pi > 0.0 && self.pi < 1.0) {
            return Err(Error::param(format!("mixing probability {} not in (0, 1)", self.pi)));
        }
        self.pos.validated()?;
        self.neg.validated()?;
        if self.pos.support_min() != 0 {
            return Err(Error::param("nonnegative component must be supported on {0, 1, ...}"));
        }
        if self.neg.support_min() != 1 {
            return Err(Error::param("negative component must be supported on {1, 2, ...}"));
        }
        Ok(())
    }

    /// Two-branch pmf: `π f₁(y)` for `y ≥ 0`, `(1 − π) f₂(−y)` for `y < 0`.
    pub fn pmf(&self, y: i64) -> Result<f64> {
        self.validate()?;
        if y >= 0 {
            Ok(self.pi * self.pos.pmf(y)?)
        } else {
            Ok((1.0 - self.pi) * self.neg.pmf(-y)?)
        }
    }

    /// `P(Y ≤ y)`.
    pub fn cdf(&self, y: i64) -> Result<f64> {
        self.validate()?;
        if y >= 0 {
            Ok((1.0 - self.pi) + self.pi * self.pos.cdf(y)?)
        } else {
            // P(-X₂ ≤ y) = P(X₂ ≥ -y) = 1 - F₂(-y - 1)
            Ok((1.0 - self.pi) * (1.0 - self.neg.cdf(-y - 1)?))
        }
    }

    pub fn mean(&self) -> f64 {
        self.pi * self.pos.mean() - (1.0 - self.pi) * self.neg.mean()
    }

    /// Draws the selector first, then the active component.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<i64> {
        let u: f64 = rng.sample(Open01);
        if u < self.pi {
            self.pos.sample(rng)
        } else {
            Ok(-self.neg.sample(rng)?)
        }
    }
}
