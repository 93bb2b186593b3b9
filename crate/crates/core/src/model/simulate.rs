use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Family, SeriesZ, Theta};
use crate::error::{Error, Result};

/// Intensity level at which a simulated path is declared divergent.
pub const DIVERGENCE_LEVEL: f64 = 1e8;

/// How past values enter the intensities.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    /// `λₛₜ = ωₛ + Σ αₛᵢ|Yₜ₋ᵢ| + Σ βₛⱼ λₛ,ₜ₋ⱼ`.
    #[default]
    Linear,
    /// `λₛₜ = exp(ωₛ + Σ αₛᵢ log(|Yₜ₋ᵢ| + 1) + Σ βₛⱼ log λₛ,ₜ₋ⱼ)`.
    LogLinear,
}

/// Law of the selector Bₜ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignSpec {
    /// Bₜ i.i.d. Bernoulli(π); the φ block of θ is ignored.
    IidBernoulli { pi: f64 },
    /// Bₜ | past ~ Bernoulli(πₜ) with `πₜ = c + a·Bₜ₋₁ + b·πₜ₋₁`.
    BernoulliIngarch,
}

/// A data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub theta: Theta,
    pub family: Family,
    pub linkage: Linkage,
    pub sign: SignSpec,
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        self.theta.validate()?;
        self.family.validate()?;
        if let SignSpec::IidBernoulli { pi } = self.sign {
            if !(pi > 0.0 && pi < 1.0) {
                return Err(Error::param(format!("selector probability {pi} not in (0, 1)")));
            }
        }
        Ok(())
    }
}

struct Recursion<'a> {
    omega: f64,
    alpha: &'a [f64],
    beta: &'a [f64],
    lam_hist: Vec<f64>,
    linkage: Linkage,
}

impl<'a> Recursion<'a> {
    fn new(psi: &'a super::PsiParams, linkage: Linkage) -> Self {
        let slack = 1.0 - psi.beta_sum();
        let start = match linkage {
            Linkage::Linear => psi.omega / slack,
            Linkage::LogLinear => (psi.omega / slack).exp(),
        };
        Self {
            omega: psi.omega,
            alpha: &psi.alpha,
            beta: &psi.beta,
            lam_hist: vec![start; psi.beta.len()],
            linkage,
        }
    }

    /// `y_hist[i]` holds |Yₜ₋₁₋ᵢ|.
    fn next(&mut self, y_hist: &[f64]) -> f64 {
        let lam = match self.linkage {
            Linkage::Linear => {
                let mut l = self.omega;
                for (a, y) in self.alpha.iter().zip(y_hist) {
                    l += a * y;
                }
                for (b, prev) in self.beta.iter().zip(&self.lam_hist) {
                    l += b * prev;
                }
                l
            }
            Linkage::LogLinear => {
                let mut l = self.omega;
                for (a, y) in self.alpha.iter().zip(y_hist) {
                    l += a * (y + 1.0).ln();
                }
                for (b, prev) in self.beta.iter().zip(&self.lam_hist) {
                    l += b * prev.ln();
                }
                l.exp()
            }
        };
        if !self.lam_hist.is_empty() {
            self.lam_hist.rotate_right(1);
            self.lam_hist[0] = lam;
        }
        lam
    }
}

/// Draws `burn_in + n` observations and returns the last `n`.
pub fn simulate<R: Rng + ?Sized>(spec: &DgpSpec, n: usize, burn_in: usize, rng: &mut R) -> Result<SeriesZ> {
    spec.validate()?;
    let theta = &spec.theta;
    let q = theta.order().q;
    let mut rec1 = Recursion::new(&theta.psi1, spec.linkage);
    let mut rec2 = Recursion::new(&theta.psi2, spec.linkage);
    let phi = theta.phi;
    let mut pi_prev = phi.c / (1.0 - phi.b);
    let mut b_prev = 1.0;
    let mut y_hist = vec![0.0; q];
    let mut out = Vec::with_capacity(n);
    for t in 0..burn_in + n {
        let lam1 = rec1.next(&y_hist);
        let lam2 = rec2.next(&y_hist);
        if !(lam1 <= DIVERGENCE_LEVEL && lam2 <= DIVERGENCE_LEVEL) {
            return Err(Error::SimulationDiverged {
                t,
                detail: format!("intensities ({lam1:e}, {lam2:e}) exceed {DIVERGENCE_LEVEL:e}"),
            });
        }
        let pi = match spec.sign {
            SignSpec::IidBernoulli { pi } => pi,
            SignSpec::BernoulliIngarch => {
                let p = phi.c + phi.a * b_prev + phi.b * pi_prev;
                pi_prev = p;
                p
            }
        };
        let positive = rng.random::<f64>() < pi;
        let y = if positive {
            spec.family.pos_dist(lam1)?.sample(rng)?
        } else {
            -spec.family.neg_dist(lam2)?.sample(rng)?
        };
        b_prev = if positive { 1.0 } else { 0.0 };
        if q > 0 {
            y_hist.rotate_right(1);
            y_hist[0] = y.unsigned_abs() as f64;
        }
        if t >= burn_in {
            out.push(y);
        }
    }
    Ok(SeriesZ::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn reference(sign: SignSpec) -> DgpSpec {
        DgpSpec {
            theta: Theta::order11(0.2, 0.2, 0.2, 1.0, 0.3, 0.3, 2.0, 0.3, 0.3).unwrap(),
            family: Family::Poisson,
            linkage: Linkage::Linear,
            sign,
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = reference(SignSpec::BernoulliIngarch);
        let a = simulate(&spec, 1, 0, &mut rng::stream(11)).unwrap();
        let b = simulate(&spec, 1, 0, &mut rng::stream(11)).unwrap();
        assert_eq!(a, b);
        let a = simulate(&spec, 500, 100, &mut rng::stream(3)).unwrap();
        let b = simulate(&spec, 500, 100, &mut rng::stream(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 500);
    }

    #[test]
    fn iid_selector_frequency() {
        let mut spec = reference(SignSpec::IidBernoulli { pi: 0.5 });
        spec.theta.psi2 = spec.theta.psi1.clone();
        spec.theta.psi2.side = super::super::Side::Negative;
        let s = simulate(&spec, 100_000, 100, &mut rng::stream(5)).unwrap();
        let freq = s.count_nonnegative() as f64 / s.len() as f64;
        assert!((freq - 0.5).abs() < 0.01, "{freq}");
    }

    #[test]
    fn log_linear_runs() {
        let mut spec = reference(SignSpec::BernoulliIngarch);
        spec.linkage = Linkage::LogLinear;
        spec.theta.psi1.alpha = vec![0.2];
        spec.theta.psi1.beta = vec![0.2];
        spec.theta.psi2.alpha = vec![0.2];
        spec.theta.psi2.beta = vec![0.2];
        let s = simulate(&spec, 2000, 100, &mut rng::stream(9)).unwrap();
        assert!(s.y().iter().any(|&v| v < 0) && s.y().iter().any(|&v| v > 0));
    }

    #[test]
    fn explosive_log_linear_is_reported() {
        let mut spec = reference(SignSpec::BernoulliIngarch);
        spec.linkage = Linkage::LogLinear;
        spec.theta.psi1.omega = 30.0;
        spec.theta.psi1.alpha = vec![0.99];
        spec.theta.psi1.beta = vec![0.9];
        let r = simulate(&spec, 10_000, 0, &mut rng::stream(1));
        assert!(matches!(r, Err(Error::SimulationDiverged { .. })), "{r:?}");
    }

    #[test]
    fn explosive_linear_is_reported() {
        let mut spec = reference(SignSpec::BernoulliIngarch);
        spec.theta.psi1.alpha = vec![0.9];
        spec.theta.psi1.beta = vec![0.5];
        spec.theta.psi2.alpha = vec![0.9];
        spec.theta.psi2.beta = vec![0.5];
        let r = simulate(&spec, 20, 500, &mut rng::stream(1));
        assert!(matches!(r, Err(Error::SimulationDiverged { .. })), "{r:?}");
    }
}
