//! Parameter containers, observation series and conditional laws.
//!
//! The model writes `Yₜ = Bₜ·X₁ₜ − (1 − Bₜ)·X₂ₜ` where the selector follows
//! `πₜ = c + a·Bₜ₋₁ + b·πₜ₋₁` and each component mean follows a linear
//! recursion in past `|Y|` and past means:
//!
//! ```text
//! λₛₜ = ωₛ + Σᵢ αₛᵢ |Yₜ₋ᵢ| + Σⱼ βₛⱼ λₛ,ₜ₋ⱼ,   s = 1, 2.
//! ```
//!
//! Flat parameter vectors use the order `(c, a, b, ω₁, α₁…, β₁…, ω₂, α₂…, β₂…)`.

mod filter;
mod simulate;

pub use filter::{
    conditional_moments, filter, intensity_filter, intensity_levels, sign_filter, FilterPath,
    InitPolicy, IntensityPath, SignPath, LAMBDA2_GUARD, PI_GUARD,
};
pub use simulate::{simulate, DgpSpec, Linkage, SignSpec};

use serde::{Deserialize, Serialize};

use crate::dists::PosDist;
use crate::error::{Error, Result};

/// Lag orders: `p` intensity feedback lags, `q` observation lags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelOrder {
    pub p: usize,
    pub q: usize,
}

impl ModelOrder {
    pub fn new(p: usize, q: usize) -> Result<Self> {
        if p + q == 0 {
            return Err(Error::param("model order needs p + q >= 1"));
        }
        Ok(Self { p, q })
    }

    /// Length of one intensity block `(ω, α₁…α_q, β₁…β_p)`.
    pub fn psi_dim(&self) -> usize {
        1 + self.p + self.q
    }

    /// Dimension of the full parameter, `3 + 2(1 + p + q)`.
    pub fn theta_dim(&self) -> usize {
        3 + 2 * self.psi_dim()
    }

    /// `max(p, q)`.
    pub fn r(&self) -> usize {
        self.p.max(self.q)
    }
}

/// Bernoulli INGARCH(1,1) selector coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiParams {
    pub c: f64,
    pub a: f64,
    pub b: f64,
}

impl PhiParams {
    pub fn new(c: f64, a: f64, b: f64) -> Result<Self> {
        let phi = Self { c, a, b };
        phi.validate()?;
        Ok(phi)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { c, a, b } = *self;
        if !(c.is_finite() && a.is_finite() && b.is_finite()) {
            return Err(Error::param("selector coefficients must be finite"));
        }
        if !(c > 0.0 && a >= 0.0 && b >= 0.0 && a + b + c < 1.0) {
            return Err(Error::param(format!(
                "selector needs c > 0, a >= 0, b >= 0, a + b + c < 1 (got c={c}, a={a}, b={b})"
            )));
        }
        Ok(())
    }

    pub fn to_vec(&self) -> [f64; 3] {
        [self.c, self.a, self.b]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self { c: v[0], a: v[1], b: v[2] }
    }

    /// Stationary mean of πₜ, `c / (1 − a − b)`.
    pub fn stationary_pi(&self) -> f64 {
        self.c / (1.0 - self.a - self.b)
    }
}

/// Which component an intensity block drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Nonnegative component `X₁` on ℕ₀.
    Positive,
    /// Component `X₂` on ℕ, entering `Y` with a minus sign.
    Negative,
}

/// One intensity recursion `(ω, α₁…α_q, β₁…β_p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiParams {
    pub omega: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub side: Side,
}

impl PsiParams {
    pub fn new(omega: f64, alpha: Vec<f64>, beta: Vec<f64>, side: Side) -> Result<Self> {
        let psi = Self { omega, alpha, beta, side };
        psi.validate()?;
        Ok(psi)
    }

    pub fn beta_sum(&self) -> f64 {
        self.beta.iter().sum()
    }

    pub fn alpha_sum(&self) -> f64 {
        self.alpha.iter().sum()
    }

    pub fn order(&self) -> ModelOrder {
        ModelOrder { p: self.beta.len(), q: self.alpha.len() }
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = self.omega.is_finite()
            && self.alpha.iter().chain(&self.beta).all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::param("intensity coefficients must be finite"));
        }
        if self.alpha.iter().chain(&self.beta).any(|&v| v < 0.0) {
            return Err(Error::param("alpha and beta coefficients must be >= 0"));
        }
        let slack = 1.0 - self.beta_sum();
        if slack <= 0.0 {
            return Err(Error::param(format!("beta coefficients sum to {} >= 1", self.beta_sum())));
        }
        match self.side {
            Side::Positive if self.omega <= 0.0 => {
                Err(Error::param(format!("omega of the nonnegative side must be > 0 (got {})", self.omega)))
            }
            Side::Negative if self.omega <= slack => Err(Error::param(format!(
                "omega of the negative side must exceed 1 - sum(beta) = {slack} (got {})",
                self.omega
            ))),
            _ => Ok(()),
        }
    }

    /// Lower bound `ω / (1 − Σβ)` of the recursion (and its fixed point with α = 0).
    pub fn floor_level(&self) -> f64 {
        self.omega / (1.0 - self.beta_sum())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(1 + self.alpha.len() + self.beta.len());
        v.push(self.omega);
        v.extend_from_slice(&self.alpha);
        v.extend_from_slice(&self.beta);
        v
    }

    pub fn from_slice(v: &[f64], order: ModelOrder, side: Side) -> Self {
        Self {
            omega: v[0],
            alpha: v[1..1 + order.q].to_vec(),
            beta: v[1 + order.q..1 + order.q + order.p].to_vec(),
            side,
        }
    }
}

/// Full parameter `(φ, ψ₁, ψ₂)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub phi: PhiParams,
    pub psi1: PsiParams,
    pub psi2: PsiParams,
}

impl Theta {
    pub fn new(phi: PhiParams, psi1: PsiParams, psi2: PsiParams) -> Result<Self> {
        let theta = Self { phi, psi1, psi2 };
        theta.validate()?;
        Ok(theta)
    }

    /// Order `(1,1)` parameter from scalars.
    #[allow(clippy::too_many_arguments)]
    pub fn order11(
        c: f64,
        a: f64,
        b: f64,
        omega1: f64,
        alpha1: f64,
        beta1: f64,
        omega2: f64,
        alpha2: f64,
        beta2: f64,
    ) -> Result<Self> {
        Self::new(
            PhiParams { c, a, b },
            PsiParams { omega: omega1, alpha: vec![alpha1], beta: vec![beta1], side: Side::Positive },
            PsiParams { omega: omega2, alpha: vec![alpha2], beta: vec![beta2], side: Side::Negative },
        )
    }

    pub fn order(&self) -> ModelOrder {
        self.psi1.order()
    }

    pub fn validate(&self) -> Result<()> {
        if self.psi1.side != Side::Positive || self.psi2.side != Side::Negative {
            return Err(Error::param("psi1 must be the positive side and psi2 the negative side"));
        }
        if self.psi1.order() != self.psi2.order() {
            return Err(Error::param("both intensity blocks must share the same (p, q)"));
        }
        ModelOrder::new(self.order().p, self.order().q)?;
        self.phi.validate()?;
        self.psi1.validate()?;
        self.psi2.validate()
    }

    pub fn dim(&self) -> usize {
        self.order().theta_dim()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.phi.to_vec().to_vec();
        v.extend(self.psi1.to_vec());
        v.extend(self.psi2.to_vec());
        v
    }

    /// Inverse of [`Theta::to_vec`]; does not validate.
    pub fn from_slice(v: &[f64], order: ModelOrder) -> Self {
        let k = order.psi_dim();
        Self {
            phi: PhiParams::from_slice(&v[..3]),
            psi1: PsiParams::from_slice(&v[3..3 + k], order, Side::Positive),
            psi2: PsiParams::from_slice(&v[3 + k..3 + 2 * k], order, Side::Negative),
        }
    }
}

/// Display names for the flat parameter vector.
pub fn parameter_names(order: ModelOrder) -> Vec<String> {
    let mut names = vec!["c".to_string(), "a".to_string(), "b".to_string()];
    for s in 1..=2 {
        names.push(format!("omega{s}"));
        for i in 1..=order.q {
            names.push(if order.q == 1 { format!("alpha{s}") } else { format!("alpha{s}_{i}") });
        }
        for j in 1..=order.p {
            names.push(if order.p == 1 { format!("beta{s}") } else { format!("beta{s}_{j}") });
        }
    }
    names
}

/// An observed ℤ-valued series and its sign indicators `Bₜ = 1{Yₜ ≥ 0}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeriesZ {
    y: Vec<i64>,
    b: Vec<u8>,
}

impl SeriesZ {
    pub fn new(y: Vec<i64>) -> Self {
        let b = y.iter().map(|&v| u8::from(v >= 0)).collect();
        Self { y, b }
    }

    pub fn y(&self) -> &[i64] {
        &self.y
    }

    pub fn signs(&self) -> &[u8] {
        &self.b
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn abs_values(&self) -> Vec<f64> {
        self.y.iter().map(|v| v.unsigned_abs() as f64).collect()
    }

    /// First `m` observations.
    pub fn prefix(&self, m: usize) -> SeriesZ {
        SeriesZ { y: self.y[..m].to_vec(), b: self.b[..m].to_vec() }
    }

    pub fn count_nonnegative(&self) -> usize {
        self.b.iter().filter(|&&b| b == 1).count()
    }

    /// Errors unless both signs occur.
    pub fn require_both_signs(&self) -> Result<()> {
        let pos = self.count_nonnegative();
        if pos == 0 || pos == self.len() {
            return Err(Error::degenerate(format!(
                "series of length {} has {} nonnegative and {} negative observations; both signs are required",
                self.len(),
                pos,
                self.len() - pos
            )));
        }
        Ok(())
    }
}

impl From<Vec<i64>> for SeriesZ {
    fn from(y: Vec<i64>) -> Self {
        Self::new(y)
    }
}

/// Conditional law of the two components given their means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    /// Poisson and shifted Poisson.
    Poisson,
    /// Negative binomial with fixed successes `r1`, `r2` (shifted on the negative side).
    NegBinomial { r1: f64, r2: f64 },
    /// Negative binomial with a fixed success probability, so `r` scales with the mean.
    NegBinomialFixedProb { p: f64 },
}

impl Family {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Family::Poisson => Ok(()),
            Family::NegBinomial { r1, r2 } => {
                if r1.is_finite() && r1 > 0.0 && r2.is_finite() && r2 > 0.0 {
                    Ok(())
                } else {
                    Err(Error::param(format!("dispersion parameters must be > 0 (got {r1}, {r2})")))
                }
            }
            Family::NegBinomialFixedProb { p } => {
                if p > 0.0 && p < 1.0 {
                    Ok(())
                } else {
                    Err(Error::param(format!("success probability {p} not in (0, 1)")))
                }
            }
        }
    }

    /// Law of `X₁` with mean `lambda`.
    pub fn pos_dist(&self, lambda: f64) -> Result<PosDist> {
        match *self {
            Family::Poisson => PosDist::poisson(lambda),
            Family::NegBinomial { r1, .. } => PosDist::neg_binomial(r1, lambda),
            Family::NegBinomialFixedProb { p } => PosDist::neg_binomial(p * lambda / (1.0 - p), lambda),
        }
    }

    /// Law of `X₂` with mean `lambda > 1`.
    pub fn neg_dist(&self, lambda: f64) -> Result<PosDist> {
        match *self {
            Family::Poisson => PosDist::shifted_poisson(lambda),
            Family::NegBinomial { r2, .. } => PosDist::shifted_neg_binomial(r2, lambda),
            Family::NegBinomialFixedProb { p } => {
                PosDist::shifted_neg_binomial(p * (lambda - 1.0) / (1.0 - p), lambda)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> Theta {
        Theta::order11(0.2, 0.2, 0.2, 1.0, 0.3, 0.3, 2.0, 0.3, 0.3).unwrap()
    }

    #[test]
    fn dimensions() {
        let o = ModelOrder::new(2, 3).unwrap();
        assert_eq!(o.theta_dim(), 3 + 2 * (1 + 2 + 3));
        assert_eq!(parameter_names(o).len(), o.theta_dim());
        assert!(ModelOrder::new(0, 0).is_err());
        assert_eq!(reference().dim(), 9);
    }

    #[test]
    fn flat_vector_round_trip() {
        let t = reference();
        let v = t.to_vec();
        assert_eq!(v, vec![0.2, 0.2, 0.2, 1.0, 0.3, 0.3, 2.0, 0.3, 0.3]);
        assert_eq!(Theta::from_slice(&v, t.order()), t);
        assert_eq!(
            parameter_names(t.order()),
            ["c", "a", "b", "omega1", "alpha1", "beta1", "omega2", "alpha2", "beta2"]
        );
    }

    #[test]
    fn invariants_are_enforced() {
        assert!(PhiParams::new(0.0, 0.2, 0.2).is_err());
        assert!(PhiParams::new(0.5, 0.3, 0.2).is_err());
        assert!(PsiParams::new(1.0, vec![0.3], vec![1.0], Side::Positive).is_err());
        // negative side: omega must exceed 1 - sum(beta)
        assert!(PsiParams::new(0.6, vec![0.3], vec![0.3], Side::Negative).is_err());
        assert!(PsiParams::new(0.8, vec![0.3], vec![0.3], Side::Negative).is_ok());
        assert!(Theta::new(
            reference().phi,
            reference().psi2.clone(),
            reference().psi1.clone()
        )
        .is_err());
    }

    #[test]
    fn signs_follow_values() {
        let s = SeriesZ::new(vec![3, 0, -1, -4, 2]);
        assert_eq!(s.signs(), &[1, 1, 0, 0, 1]);
        assert!(s.require_both_signs().is_ok());
        assert!(matches!(
            SeriesZ::new(vec![0, 1, 2]).require_both_signs(),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn fixed_probability_family_has_matching_means() {
        let f = Family::NegBinomialFixedProb { p: 0.5 };
        let d1 = f.pos_dist(3.0).unwrap();
        let d2 = f.neg_dist(3.0).unwrap();
        assert!((d1.mean() - 3.0).abs() < 1e-12);
        assert!((d1.variance() - 6.0).abs() < 1e-12);
        assert!((d2.mean() - 3.0).abs() < 1e-12);
        assert!((d2.variance() - 4.0).abs() < 1e-12);
    }
}
