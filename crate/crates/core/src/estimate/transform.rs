//! Smooth bijections between ℝᵏ and the interior of each parameter block.
//!
//! * `(c, a, b)`: `xᵢ = e^{ηᵢ} / (1 + Σ e^{ηⱼ})`, so all three are positive
//!   and sum below one.
//! * `ω₁ = ω_max σ(η)`, `αᵢ = α_max σ(ηᵢ)`, and `β = β_max · (softmax with
//!   slack)`, which keeps `Σβ < β_max`.
//! * `ω₂ = s + (ω_max − s) σ(η)` with `s = 1 − Σβ₂`, which keeps the
//!   negative-side constraint `1 − Σβ₂ < ω₂` strict.
//!
//! Jacobians are returned row-major with `J[i][j] = ∂xᵢ/∂ηⱼ`.

use crate::model::{ModelOrder, PhiParams, PsiParams, Side};

/// Upper limits of the compact parameter box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Caps {
    pub alpha_max: f64,
    pub beta_max: f64,
    pub omega_max: f64,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `sᵢ = e^{ηᵢ} / (1 + Σ e^{ηⱼ})`, computed without overflow.
fn softmax_slack(eta: &[f64]) -> Vec<f64> {
    let m = eta.iter().fold(0.0f64, |a, &v| a.max(v));
    let e: Vec<f64> = eta.iter().map(|&v| (v - m).exp()).collect();
    let denom = (-m).exp() + e.iter().sum::<f64>();
    e.into_iter().map(|v| v / denom).collect()
}

fn softmax_slack_inv(x: &[f64]) -> Vec<f64> {
    let slack = 1.0 - x.iter().sum::<f64>();
    x.iter().map(|&v| (v / slack).ln()).collect()
}

fn interior(x: f64, lo: f64, hi: f64) -> f64 {
    let pad = 1e-4 * (hi - lo);
    x.clamp(lo + pad, hi - pad)
}

pub fn phi_from_eta(eta: &[f64]) -> (PhiParams, [[f64; 3]; 3]) {
    let s = softmax_slack(eta);
    let mut jac = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            jac[i][j] = s[i] * (f64::from(u8::from(i == j)) - s[j]);
        }
    }
    (PhiParams { c: s[0], a: s[1], b: s[2] }, jac)
}

/// Inverse of [`phi_from_eta`], after nudging `phi` into the open simplex.
pub fn phi_to_eta(phi: &PhiParams) -> [f64; 3] {
    let mut x = [phi.c.max(1e-4), phi.a.max(1e-4), phi.b.max(1e-4)];
    let total: f64 = x.iter().sum();
    if total > 1.0 - 1e-4 {
        x.iter_mut().for_each(|v| *v *= (1.0 - 1e-4) / total);
    }
    let e = softmax_slack_inv(&x);
    [e[0], e[1], e[2]]
}

/// Maps `eta = (η_ω, η_α…, η_β…)` to a block and its Jacobian.
pub fn psi_from_eta(eta: &[f64], order: ModelOrder, side: Side, caps: &Caps) -> (PsiParams, Vec<Vec<f64>>) {
    let q = order.q;
    let k = order.psi_dim();
    let mut jac = vec![vec![0.0; k]; k];
    let alpha: Vec<f64> = (0..q)
        .map(|i| {
            let s = sigmoid(eta[1 + i]);
            jac[1 + i][1 + i] = caps.alpha_max * s * (1.0 - s);
            caps.alpha_max * s
        })
        .collect();
    let sb = softmax_slack(&eta[1 + q..]);
    let beta: Vec<f64> = sb.iter().map(|v| caps.beta_max * v).collect();
    for (i, si) in sb.iter().enumerate() {
        for (j, sj) in sb.iter().enumerate() {
            jac[1 + q + i][1 + q + j] = caps.beta_max * si * (f64::from(u8::from(i == j)) - sj);
        }
    }
    let so = sigmoid(eta[0]);
    let omega = match side {
        Side::Positive => {
            jac[0][0] = caps.omega_max * so * (1.0 - so);
            caps.omega_max * so
        }
        Side::Negative => {
            let floor = 1.0 - beta.iter().sum::<f64>();
            jac[0][0] = (caps.omega_max - floor) * so * (1.0 - so);
            for col in 1 + q..k {
                let dfloor: f64 = -(1 + q..k).map(|row| jac[row][col]).sum::<f64>();
                jac[0][col] = (1.0 - so) * dfloor;
            }
            floor + (caps.omega_max - floor) * so
        }
    };
    (PsiParams { omega, alpha, beta, side }, jac)
}

/// Inverse of [`psi_from_eta`], after nudging `psi` into the open box.
pub fn psi_to_eta(psi: &PsiParams, caps: &Caps) -> Vec<f64> {
    let mut beta: Vec<f64> = psi.beta.iter().map(|&b| b.max(1e-4 * caps.beta_max) / caps.beta_max).collect();
    let total: f64 = beta.iter().sum();
    if total > 1.0 - 1e-4 {
        beta.iter_mut().for_each(|v| *v *= (1.0 - 1e-4) / total);
    }
    let beta_sum: f64 = beta.iter().sum::<f64>() * caps.beta_max;
    let omega_eta = match psi.side {
        Side::Positive => logit(interior(psi.omega, 0.0, caps.omega_max) / caps.omega_max),
        Side::Negative => {
            let floor = 1.0 - beta_sum;
            logit((interior(psi.omega, floor, caps.omega_max) - floor) / (caps.omega_max - floor))
        }
    };
    let mut eta = vec![omega_eta];
    eta.extend(psi.alpha.iter().map(|&a| logit(interior(a, 0.0, caps.alpha_max) / caps.alpha_max)));
    eta.extend(softmax_slack_inv(&beta));
    eta
}
