//! Stability matrix, spectral radius and the stationarity conditions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PsiParams, Theta};

/// Accuracy target of [`spectral_radius`].
pub const SPECTRAL_TOL: f64 = 1e-10;
const MAX_SQUARINGS: usize = 200;

/// How the selector probabilities are bounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignMode {
    /// Explicit bounds `πₜ ≤ π₁⁺` and `1 − πₜ ≤ π₀⁺`.
    Bounds { pi1_plus: f64, pi0_plus: f64 },
    /// Bₜ i.i.d. Bernoulli(π).
    Iid { pi: f64 },
    /// Two-state chain with `pij = P(Bₜ = j | Bₜ₋₁ = i)`.
    MarkovChain { p00: f64, p01: f64, p10: f64, p11: f64 },
    /// Selector recursion taken from the φ block of θ.
    BernoulliIngarch,
}

/// The block companion matrix built from `A⁽ˡ⁾`, `l = 1..r`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityMatrix {
    pub r: usize,
    pub blocks: Vec<[[f64; 2]; 2]>,
    pub companion: DMatrix<f64>,
    pub pi1_plus: f64,
    pub pi0_plus: f64,
}

fn in_open_unit(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

fn coeff(v: &[f64], l: usize) -> f64 {
    v.get(l).copied().unwrap_or(0.0)
}

/// Checks what the stability analysis needs: matching orders, finite and
/// nonnegative α, β. The `Σβ < 1` constraint is deliberately not required.
fn check_shape(theta: &Theta) -> Result<()> {
    let (p1, p2) = (&theta.psi1, &theta.psi2);
    if p1.alpha.len() != p2.alpha.len() || p1.beta.len() != p2.beta.len() {
        return Err(Error::param("both intensity blocks must share the same (p, q)"));
    }
    if p1.alpha.len() + p1.beta.len() == 0 {
        return Err(Error::param("model order needs p + q >= 1"));
    }
    let ok = [p1, p2]
        .iter()
        .flat_map(|psi| psi.alpha.iter().chain(&psi.beta))
        .all(|v| v.is_finite() && *v >= 0.0);
    if !ok {
        return Err(Error::param("alpha and beta coefficients must be finite and >= 0"));
    }
    Ok(())
}

fn resolve_bounds(theta: &Theta, mode: SignMode) -> Result<(f64, f64)> {
    match mode {
        SignMode::Bounds { pi1_plus, pi0_plus } => {
            if !in_open_unit(pi1_plus) || !(pi0_plus > 1.0 - pi1_plus && pi0_plus < 1.0) {
                return Err(Error::domain(format!(
                    "bounds need pi1+ in (0, 1) and pi0+ in (1 - pi1+, 1) (got {pi1_plus}, {pi0_plus})"
                )));
            }
            Ok((pi1_plus, pi0_plus))
        }
        SignMode::Iid { pi } => {
            if !in_open_unit(pi) {
                return Err(Error::domain(format!("selector probability {pi} not in (0, 1)")));
            }
            Ok((pi, 1.0 - pi))
        }
        SignMode::MarkovChain { p00, p01, p10, p11 } => {
            let all = [p00, p01, p10, p11];
            if !all.iter().all(|&p| in_open_unit(p)) {
                return Err(Error::domain("transition probabilities must lie in (0, 1)"));
            }
            if (p00 + p01 - 1.0).abs() > 1e-12 || (p10 + p11 - 1.0).abs() > 1e-12 {
                return Err(Error::domain("transition probabilities out of each state must sum to 1"));
            }
            Ok((p01.max(p11), p10.max(p00)))
        }
        SignMode::BernoulliIngarch => {
            theta.phi.validate()?;
            let phi = theta.phi;
            Ok((phi.a + phi.b + phi.c, 1.0 - phi.c))
        }
    }
}

/// Builds `A⁽ˡ⁾` and the companion matrix for the given selector bounds.
pub fn build_matrix(theta: &Theta, mode: SignMode) -> Result<StabilityMatrix> {
    check_shape(theta)?;
    let (pi1, pi0) = resolve_bounds(theta, mode)?;
    let (psi1, psi2) = (&theta.psi1, &theta.psi2);
    let r = theta.order().r();
    let blocks: Vec<[[f64; 2]; 2]> = (0..r)
        .map(|l| {
            let (a1, b1) = (coeff(&psi1.alpha, l), coeff(&psi1.beta, l));
            let (a2, b2) = (coeff(&psi2.alpha, l), coeff(&psi2.beta, l));
            [[a1 * pi1 + b1, a1 * pi0], [a2 * pi1, a2 * pi0 + b2]]
        })
        .collect();
    let dim = 2 * r;
    let mut companion = DMatrix::zeros(dim, dim);
    for (l, blk) in blocks.iter().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                companion[(i, 2 * l + j)] = blk[i][j];
            }
        }
    }
    for i in 2..dim {
        companion[(i, i - 2)] = 1.0;
    }
    Ok(StabilityMatrix { r, blocks, companion, pi1_plus: pi1, pi0_plus: pi0 })
}

/// Spectral radius of a nonnegative square matrix.
///
/// Raises `S = A + I` to the power `2ᵏ` by repeated squaring with
/// rescaling. The Perron root of `S` strictly dominates every other
/// eigenvalue in modulus, so the columns of `Sᴺ` align with a Perron vector
/// even for periodic or defective `A`. The radius is then read off a
/// Rayleigh quotient and accepted once the eigen-residual is small.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::domain(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
    }
    if n == 0 {
        return Ok(0.0);
    }
    if m.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::domain("spectral radius needs finite, nonnegative entries"));
    }
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(*v));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let a = m / scale;
    let mut s = &a + DMatrix::identity(n, n);
    let ones = DVector::from_element(n, 1.0);
    let mut v = DVector::zeros(n);
    // A small eigen-residual alone is not enough: for a defective Perron
    // root it shrinks quadratically faster than the direction error, so
    // iterate until the direction itself stops moving.
    for _ in 0..MAX_SQUARINGS {
        let w = &s * &ones;
        let w = &w / w.norm();
        let settled = (&w - &v).norm() <= 1e-15;
        v = w;
        if settled {
            break;
        }
        s = &s * &s;
        let mx = s.iter().fold(0.0f64, |acc, v| acc.max(*v));
        s /= mx;
    }
    let av = &a * &v;
    let rho = v.dot(&av);
    let residual = (&av - &v * rho).norm();
    if !(residual <= SPECTRAL_TOL) {
        return Err(Error::Numerical { detail: "spectral radius iteration did not settle".into(), residual });
    }
    Ok(rho.max(0.0) * scale)
}

/// Explicit radius for `p = q = 1` and an i.i.d. selector.
pub fn closed_form_rho(theta: &Theta, pi: f64) -> Result<f64> {
    let o = theta.order();
    if o.p != 1 || o.q != 1 {
        return Err(Error::Usage(format!("closed form needs p = q = 1 (got p = {}, q = {})", o.p, o.q)));
    }
    if !in_open_unit(pi) {
        return Err(Error::domain(format!("selector probability {pi} not in (0, 1)")));
    }
    let (a1, b1) = (theta.psi1.alpha[0], theta.psi1.beta[0]);
    let (a2, b2) = (theta.psi2.alpha[0], theta.psi2.beta[0]);
    let x = a1 * pi + b1;
    let y = a2 * (1.0 - pi) + b2;
    Ok(0.5 * (x + y + ((x - y).powi(2) + 4.0 * a1 * a2 * pi * (1.0 - pi)).sqrt()))
}

/// Overall verdict of [`check_conditions`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stationarity {
    /// The spectral-radius condition holds.
    Stationary,
    /// Only the necessary conditions hold and the selector is not i.i.d.
    Inconclusive,
    /// A necessary condition fails, or the i.i.d. characterization fails.
    Nonstationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub spectral_radius: f64,
    pub pi1_plus: f64,
    pub pi0_plus: f64,
    /// `ρ(A) < 1`.
    pub sufficient_spectral: bool,
    /// `Σβₛⱼ < 1` for both sides.
    pub necessary_beta_sum: bool,
    /// π-weighted persistence below one; i.i.d. selector only.
    pub necessary_mean_persistence: Option<bool>,
    /// For `p = q = 1` with an i.i.d. selector: whether the two necessary
    /// conditions together agree with the spectral condition.
    pub equivalence_agrees: Option<bool>,
    pub status: Stationarity,
}

impl ConditionReport {
    pub fn necessary_hold(&self) -> bool {
        self.necessary_beta_sum && self.necessary_mean_persistence != Some(false)
    }
}

fn persistence(psi: &PsiParams) -> f64 {
    psi.alpha_sum() / (1.0 - psi.beta_sum())
}

/// `π Σα₁/(1 − Σβ₁) + (1 − π) Σα₂/(1 − Σβ₂)`, assuming both β sums are below one.
pub fn mean_persistence(theta: &Theta, pi: f64) -> f64 {
    pi * persistence(&theta.psi1) + (1.0 - pi) * persistence(&theta.psi2)
}

/// Evaluates the sufficient and necessary conditions.
pub fn check_conditions(theta: &Theta, mode: SignMode) -> Result<ConditionReport> {
    let sm = build_matrix(theta, mode)?;
    let rho = spectral_radius(&sm.companion)?;
    let sufficient = rho < 1.0;
    let beta_ok = theta.psi1.beta_sum() < 1.0 && theta.psi2.beta_sum() < 1.0;
    let iid_pi = match mode {
        SignMode::Iid { pi } => Some(pi),
        _ => None,
    };
    let persistence_ok = iid_pi.map(|pi| beta_ok && mean_persistence(theta, pi) < 1.0);
    let o = theta.order();
    let equivalence = persistence_ok
        .filter(|_| o.p == 1 && o.q == 1)
        .map(|np| (beta_ok && np) == sufficient);
    let status = if sufficient {
        Stationarity::Stationary
    } else if !beta_ok || persistence_ok == Some(false) || iid_pi.is_some() {
        Stationarity::Nonstationary
    } else {
        Stationarity::Inconclusive
    };
    Ok(ConditionReport {
        spectral_radius: rho,
        pi1_plus: sm.pi1_plus,
        pi0_plus: sm.pi0_plus,
        sufficient_spectral: sufficient,
        necessary_beta_sum: beta_ok,
        necessary_mean_persistence: persistence_ok,
        equivalence_agrees: equivalence,
        status,
    })
}

/// `(E|Yₜ|, EYₜ)` under an i.i.d. selector with `P(Bₜ = 1) = pi`.
pub fn stationary_mean(theta: &Theta, pi: f64) -> Result<(f64, f64)> {
    check_shape(theta)?;
    if !in_open_unit(pi) {
        return Err(Error::domain(format!("selector probability {pi} not in (0, 1)")));
    }
    let (psi1, psi2) = (&theta.psi1, &theta.psi2);
    let (s1, s2) = (1.0 - psi1.beta_sum(), 1.0 - psi2.beta_sum());
    if s1 <= 0.0 || s2 <= 0.0 {
        return Err(Error::domain("beta coefficients sum to 1 or more; no finite mean"));
    }
    let denom = 1.0 - mean_persistence(theta, pi);
    if denom <= 0.0 {
        return Err(Error::domain("persistence is 1 or more; no finite mean"));
    }
    let e_abs = (pi * psi1.omega / s1 + (1.0 - pi) * psi2.omega / s2) / denom;
    let e_y = pi * (psi1.omega + psi1.alpha_sum() * e_abs) / s1
        - (1.0 - pi) * (psi2.omega + psi2.alpha_sum() * e_abs) / s2;
    Ok((e_abs, e_y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Side;

    fn theta11(a1: f64, b1: f64, a2: f64, b2: f64) -> Theta {
        Theta::order11(0.2, 0.2, 0.2, 1.0, a1, b1, 2.0, a2, b2).unwrap()
    }

    #[test]
    fn iid_matrix_example() {
        let sm = build_matrix(&theta11(0.3, 0.3, 0.3, 0.3), SignMode::Iid { pi: 0.4 }).unwrap();
        let want = [[0.42, 0.18], [0.12, 0.48]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((sm.companion[(i, j)] - want[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn bernoulli_ingarch_bounds() {
        let sm = build_matrix(&theta11(0.3, 0.3, 0.3, 0.3), SignMode::BernoulliIngarch).unwrap();
        assert!((sm.pi1_plus - 0.6).abs() < 1e-15);
        assert!((sm.pi0_plus - 0.8).abs() < 1e-15);
    }

    #[test]
    fn bounds_are_checked() {
        let t = theta11(0.3, 0.3, 0.3, 0.3);
        assert!(build_matrix(&t, SignMode::Bounds { pi1_plus: 0.6, pi0_plus: 0.3 }).is_err());
        assert!(build_matrix(&t, SignMode::Bounds { pi1_plus: 0.6, pi0_plus: 0.5 }).is_ok());
    }

    #[test]
    fn companion_layout() {
        let psi1 = PsiParams::new(1.0, vec![0.1, 0.05], vec![0.2, 0.1, 0.05], Side::Positive).unwrap();
        let psi2 = PsiParams::new(1.5, vec![0.1, 0.0], vec![0.3, 0.0, 0.1], Side::Negative).unwrap();
        let t = Theta::new(crate::model::PhiParams::new(0.2, 0.2, 0.2).unwrap(), psi1, psi2).unwrap();
        let sm = build_matrix(&t, SignMode::Iid { pi: 0.5 }).unwrap();
        assert_eq!(sm.companion.nrows(), 6);
        assert_eq!(sm.companion[(2, 0)], 1.0);
        assert_eq!(sm.companion[(5, 3)], 1.0);
        assert_eq!(sm.companion[(0, 4)], 0.05);
        assert_eq!(sm.companion[(1, 5)], 0.1);
    }

    #[test]
    fn radius_simple_cases() {
        assert!((spectral_radius(&DMatrix::identity(2, 2)).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(spectral_radius(&DMatrix::zeros(3, 3)).unwrap(), 0.0);
        // periodic: eigenvalues ±1
        let perm = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!((spectral_radius(&perm).unwrap() - 1.0).abs() < 1e-12);
        // defective: Jordan block
        let jordan = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, 0.5]);
        assert!((spectral_radius(&jordan).unwrap() - 0.5).abs() < 1e-10);
        // nilpotent
        let nil = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(spectral_radius(&nil).unwrap().abs() < 1e-10);
    }

    #[test]
    fn radius_matches_closed_form() {
        let t = theta11(0.3, 0.3, 0.3, 0.3);
        let sm = build_matrix(&t, SignMode::Iid { pi: 0.4 }).unwrap();
        let rho = spectral_radius(&sm.companion).unwrap();
        assert!((rho - closed_form_rho(&t, 0.4).unwrap()).abs() < 1e-10);
        assert!((rho - 0.6).abs() < 1e-10);
        let t = theta11(0.0, 0.4, 0.0, 0.7);
        assert!((closed_form_rho(&t, 0.3).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn conditions_reference_model() {
        let t = theta11(0.3, 0.3, 0.3, 0.3);
        let rep = check_conditions(&t, SignMode::Iid { pi: 0.3 }).unwrap();
        assert!(rep.sufficient_spectral && rep.necessary_beta_sum);
        assert_eq!(rep.necessary_mean_persistence, Some(true));
        assert_eq!(rep.equivalence_agrees, Some(true));
        assert_eq!(rep.status, Stationarity::Stationary);
    }

    #[test]
    fn unit_beta_fails_both() {
        let mut t = theta11(0.3, 0.3, 0.3, 0.3);
        t.psi1.beta = vec![1.0];
        let rep = check_conditions(&t, SignMode::Iid { pi: 0.5 }).unwrap();
        assert!(!rep.necessary_beta_sum);
        assert!(!rep.sufficient_spectral);
        assert_eq!(rep.status, Stationarity::Nonstationary);
    }

    #[test]
    fn inconclusive_for_dependent_selector() {
        // ρ(A) ≥ 1 under the (a + b + c, 1 − c) bounds while Σβ < 1
        let t = Theta::order11(0.1, 0.45, 0.4, 1.0, 0.6, 0.3, 2.0, 0.6, 0.3).unwrap();
        let rep = check_conditions(&t, SignMode::BernoulliIngarch).unwrap();
        assert!(!rep.sufficient_spectral, "{}", rep.spectral_radius);
        assert_eq!(rep.status, Stationarity::Inconclusive);
        assert_eq!(rep.necessary_mean_persistence, None);
    }

    #[test]
    fn mean_examples() {
        let t = theta11(0.3, 0.3, 0.3, 0.3);
        let (e_abs, e_y) = stationary_mean(&t, 0.5).unwrap();
        assert!((e_abs - 3.75).abs() < 1e-12);
        assert!((e_y + 5.0 / 7.0).abs() < 1e-12);
        let t = theta11(0.9, 0.3, 0.9, 0.3);
        assert!(stationary_mean(&t, 0.5).is_err());
    }
}
