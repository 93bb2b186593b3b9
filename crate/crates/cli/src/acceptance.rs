//! Desk-scale acceptance suite.
//!
//! Each criterion is a fixed-seed Monte Carlo or property check returning a
//! pass/fail verdict with a one-line summary. Runtime limits are part of the
//! verdict.

use std::fmt::Write as _;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use mdingarch::diagnostics::{gof, GofOptions};
use mdingarch::dists::{MixedDifferenceLaw, PosDist};
use mdingarch::estimate::{fit, quasi_loglik, score, FitOptions, FitReport};
use mdingarch::evaluate::{pit_histogram, pit_histogram_at, sign_forecast_eval, SignEvalOptions};
use mdingarch::linalg::rel_frobenius;
use mdingarch::model::{
    parameter_names, simulate, DgpSpec, Family, InitPolicy, Linkage, ModelOrder, PhiParams, PsiParams, Side, SignSpec,
    Theta,
};
use mdingarch::rng::{self, derived_stream};
use mdingarch::stationarity::{check_conditions, closed_form_rho, stationary_mean, SignMode};

use crate::commands::run_args;

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

type Verdict = Result<(bool, String), String>;

struct Criterion {
    id: usize,
    name: &'static str,
    limit: Duration,
    run: fn() -> Verdict,
}

const fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

const CRITERIA: [Criterion; 11] = [
    Criterion { id: 1, name: "stationarity oracle agreement", limit: secs(10), run: c1_stationarity },
    Criterion { id: 2, name: "stationary mean of |Y|", limit: secs(30), run: c2_mean },
    Criterion { id: 3, name: "estimator bias and RMSE", limit: secs(20 * 60), run: c3_bias },
    Criterion { id: 4, name: "standard error calibration", limit: secs(20 * 60), run: c4_se },
    Criterion { id: 5, name: "Poisson information equalities", limit: secs(60), run: c5_efficiency },
    Criterion { id: 6, name: "portmanteau size and power", limit: secs(60 * 60), run: c6_portmanteau },
    Criterion { id: 7, name: "score correctness", limit: secs(60), run: c7_gradient },
    Criterion { id: 8, name: "distribution kernel properties", limit: secs(60), run: c8_dists },
    Criterion { id: 9, name: "PIT calibration", limit: secs(5 * 60), run: c9_pit },
    Criterion { id: 10, name: "sign forecast evaluation", limit: secs(15 * 60), run: c10_sign },
    Criterion { id: 11, name: "CLI determinism", limit: secs(10 * 60), run: c11_determinism },
];

/// Runs the criteria with ids in `only` (all when empty), in order.
pub fn run_selected(only: &[usize]) -> Vec<CriterionResult> {
    CRITERIA
        .iter()
        .filter(|c| only.is_empty() || only.contains(&c.id))
        .map(|c| {
            let start = Instant::now();
            let verdict = (c.run)();
            let elapsed = start.elapsed();
            let (mut passed, mut detail) = match verdict {
                Ok(v) => v,
                Err(e) => (false, format!("error: {e}")),
            };
            if elapsed > c.limit {
                passed = false;
                detail.push_str(&format!("; runtime {:.1}s exceeds {}s", elapsed.as_secs_f64(), c.limit.as_secs()));
            }
            CriterionResult { id: c.id, name: c.name, passed, detail, elapsed }
        })
        .collect()
}

pub fn format_line(r: &CriterionResult) -> String {
    format!(
        "[{}] {:>2} {:<32} {:>8.1}s  {}",
        if r.passed { "PASS" } else { "FAIL" },
        r.id,
        r.name,
        r.elapsed.as_secs_f64(),
        r.detail
    )
}

pub fn format_table(results: &[CriterionResult]) -> String {
    let mut s = String::new();
    for r in results {
        let _ = writeln!(s, "{}", format_line(r));
    }
    let passed = results.iter().filter(|r| r.passed).count();
    let _ = writeln!(s, "{passed}/{} criteria passed", results.len());
    s
}

fn reference_theta() -> Theta {
    Theta::order11(0.2, 0.2, 0.2, 1.0, 0.3, 0.3, 2.0, 0.3, 0.3).expect("valid parameters")
}

fn dgp(theta: Theta, family: Family, linkage: Linkage, sign: SignSpec) -> DgpSpec {
    DgpSpec { theta, family, linkage, sign }
}

fn reference_pois() -> DgpSpec {
    dgp(reference_theta(), Family::Poisson, Linkage::Linear, SignSpec::BernoulliIngarch)
}

fn e(err: impl std::fmt::Display) -> String {
    err.to_string()
}

fn c1_stationarity() -> Verdict {
    let mut g = rng::stream(101);
    let (mut max_diff, mut mismatches, mut stationary) = (0.0f64, 0, 0);
    let draws = 10_000;
    for _ in 0..draws {
        let pi: f64 = g.random_range(0.01..0.99);
        let (a1, a2): (f64, f64) = (g.random_range(0.0..1.5), g.random_range(0.0..1.5));
        let (b1, b2): (f64, f64) = (g.random_range(0.0..0.99), g.random_range(0.0..0.99));
        let w1: f64 = g.random_range(0.1..5.0);
        let w2: f64 = 1.0 - b2 + g.random_range(0.1..5.0);
        let theta = Theta::order11(0.2, 0.2, 0.2, w1, a1, b1, w2, a2, b2).map_err(e)?;
        let closed = closed_form_rho(&theta, pi).map_err(e)?;
        let report = check_conditions(&theta, SignMode::Iid { pi }).map_err(e)?;
        max_diff = max_diff.max((closed - report.spectral_radius).abs());
        if report.equivalence_agrees != Some(true) {
            mismatches += 1;
        }
        stationary += usize::from(report.sufficient_spectral);
    }
    Ok((
        max_diff <= 1e-10 && mismatches == 0,
        format!("{draws} draws ({stationary} stable): max |closed - spectral| = {max_diff:.2e}, {mismatches} equivalence counterexamples"),
    ))
}

fn c2_mean() -> Verdict {
    let spec = dgp(reference_theta(), Family::Poisson, Linkage::Linear, SignSpec::IidBernoulli { pi: 0.5 });
    let n = 1_000_000;
    let s = simulate(&spec, n, 1000, &mut rng::stream(202)).map_err(e)?;
    let abs = s.abs_values();
    let mean = abs.iter().sum::<f64>() / n as f64;
    // batch means absorb the serial dependence
    let batches = 1000;
    let size = n / batches;
    let bm: Vec<f64> = abs.chunks(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let var = bm.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    let se = (var / batches as f64).sqrt();
    let (target, _) = stationary_mean(&spec.theta, 0.5).map_err(e)?;
    let z = (mean - target) / se;
    Ok((z.abs() <= 3.0, format!("mean |Y| = {mean:.5} vs {target:.5} (MC se {se:.5}, z = {z:.2})")))
}

struct MonteCarloFits {
    n: usize,
    estimates: Vec<Vec<f64>>,
    ses: Vec<Vec<f64>>,
    nonconverged: usize,
}

fn fit_replications(n: usize, reps: usize, seed: u64) -> Result<MonteCarloFits, String> {
    let spec = reference_pois();
    let order = ModelOrder { p: 1, q: 1 };
    let fits: Vec<FitReport> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let s = simulate(&spec, n, 500, &mut derived_stream(seed, i as u64)).map_err(e)?;
            fit(&s, order, &FitOptions::default()).map_err(e)
        })
        .collect::<Result<_, String>>()?;
    Ok(MonteCarloFits {
        n,
        nonconverged: fits.iter().filter(|f| !f.converged()).count(),
        estimates: fits.iter().map(|f| f.theta_hat.to_vec()).collect(),
        ses: fits.iter().map(|f| f.se.clone()).collect(),
    })
}

fn fits_3600() -> &'static Result<MonteCarloFits, String> {
    static CELL: OnceLock<Result<MonteCarloFits, String>> = OnceLock::new();
    CELL.get_or_init(|| fit_replications(3600, 200, 303))
}

fn column_mean(rows: &[Vec<f64>], j: usize) -> f64 {
    rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64
}

fn rmse(rows: &[Vec<f64>], truth: &[f64]) -> Vec<f64> {
    (0..truth.len())
        .map(|j| (rows.iter().map(|r| (r[j] - truth[j]).powi(2)).sum::<f64>() / rows.len() as f64).sqrt())
        .collect()
}

fn fmt_list(names: &[String], v: &[f64], digits: usize) -> String {
    names.iter().zip(v).map(|(n, x)| format!("{n}={x:.digits$}")).collect::<Vec<_>>().join(" ")
}

fn c3_bias() -> Verdict {
    let truth = reference_theta().to_vec();
    let names = parameter_names(ModelOrder { p: 1, q: 1 });
    let mid = fits_3600().as_ref().map_err(Clone::clone)?;
    let bias: Vec<f64> = (0..truth.len()).map(|j| column_mean(&mid.estimates, j) - truth[j]).collect();
    let small = fit_replications(1800, 100, 304)?;
    let large = fit_replications(7200, 100, 305)?;
    let (r_small, r_large) = (rmse(&small.estimates, &truth), rmse(&large.estimates, &truth));
    let bias_ok = bias.iter().all(|b| b.abs() < 0.05);
    let shrink_ok = r_large.iter().zip(&r_small).all(|(l, s)| l < s);
    let nonconv = mid.nonconverged + small.nonconverged + large.nonconverged;
    Ok((
        bias_ok && shrink_ok,
        format!(
            "bias(n={}): {}; RMSE 1800 -> 7200: {}; nonconverged fits {nonconv}",
            mid.n,
            fmt_list(&names, &bias, 3),
            names
                .iter()
                .zip(r_small.iter().zip(&r_large))
                .map(|(n, (s, l))| format!("{n} {s:.3}->{l:.3}"))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    ))
}

fn c4_se() -> Verdict {
    let mid = fits_3600().as_ref().map_err(Clone::clone)?;
    let names = parameter_names(ModelOrder { p: 1, q: 1 });
    let d = names.len();
    let ratios: Vec<f64> = (0..d)
        .map(|j| {
            let m = column_mean(&mid.estimates, j);
            let sd = (mid.estimates.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (mid.estimates.len() - 1) as f64)
                .sqrt();
            column_mean(&mid.ses, j) / sd
        })
        .collect();
    let ok = ratios.iter().all(|r| (0.7..=1.4).contains(r));
    Ok((ok, format!("mean se / empirical sd (n={}): {}", mid.n, fmt_list(&names, &ratios, 3))))
}

fn c5_efficiency() -> Verdict {
    let s = simulate(&reference_pois(), 7200, 500, &mut rng::stream(505)).map_err(e)?;
    let f = fit(&s, ModelOrder { p: 1, q: 1 }, &FitOptions::default()).map_err(e)?;
    let c = &f.covariance;
    let (d1, d2) = (rel_frobenius(&c.i1, &c.j1), rel_frobenius(&c.i2, &c.j2));
    Ok((d1 < 0.1 && d2 < 0.1, format!("||I1-J1||/||J1|| = {d1:.4}, ||I2-J2||/||J2|| = {d2:.4}")))
}

struct Rejections {
    p1: f64,
    p1_asymptotic: f64,
    p2: f64,
    failed: usize,
}

fn rejection_rates(spec: &DgpSpec, n: usize, reps: usize, seed: u64) -> Rejections {
    let order = ModelOrder { p: 1, q: 1 };
    let outcomes: Vec<Option<[bool; 3]>> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let s = simulate(spec, n, 500, &mut derived_stream(seed, i as u64)).ok()?;
            let f = fit(&s, order, &FitOptions::default()).ok()?;
            let opts = GofOptions { seed: rng::child_seed(seed, i as u64), ..Default::default() };
            let g = gof(&s, &f, &opts).ok()?;
            Some([g.p1 < 0.05, g.p1_asymptotic < 0.05, g.p2 < 0.05])
        })
        .collect();
    let ok: Vec<[bool; 3]> = outcomes.iter().flatten().copied().collect();
    let rate = |k: usize| ok.iter().filter(|o| o[k]).count() as f64 / ok.len().max(1) as f64;
    Rejections { p1: rate(0), p1_asymptotic: rate(1), p2: rate(2), failed: reps - ok.len() }
}

fn c6_portmanteau() -> Verdict {
    let null = rejection_rates(&reference_pois(), 600, 300, 606);
    let alt_theta = Theta::order11(0.2, 0.2, 0.2, 1.0, 0.2, 0.2, 2.0, 0.2, 0.2).map_err(e)?;
    let alt_spec = dgp(alt_theta, Family::Poisson, Linkage::LogLinear, SignSpec::BernoulliIngarch);
    let alt = rejection_rates(&alt_spec, 900, 300, 607);
    let ok = (0.02..=0.09).contains(&null.p1)
        && null.p2 <= 0.07
        && alt.p1 - null.p1 >= 0.10
        && alt.p2 - null.p2 >= 0.10
        && null.failed == 0
        && alt.failed == 0;
    Ok((
        ok,
        format!(
            "size(n=600): p1 {:.3} p2 {:.3} [p1 with asymptotic V {:.3}]; power(n=900): p1 {:.3} p2 {:.3} [{:.3}]; failed reps {}/{}",
            null.p1, null.p2, null.p1_asymptotic, alt.p1, alt.p2, alt.p1_asymptotic, null.failed, alt.failed
        ),
    ))
}

fn random_theta<R: Rng>(g: &mut R, order: ModelOrder) -> Result<Theta, String> {
    let phi = PhiParams::new(g.random_range(0.05..0.3), g.random_range(0.05..0.3), g.random_range(0.05..0.3)).map_err(e)?;
    let mut side = |s: Side, w: f64| {
        let alpha = (0..order.q).map(|_| g.random_range(0.05..0.3)).collect();
        let beta = (0..order.p).map(|_| g.random_range(0.05..0.3)).collect();
        PsiParams::new(w, alpha, beta, s)
    };
    let psi1 = side(Side::Positive, 1.0).map_err(e)?;
    let psi2 = side(Side::Negative, 2.0).map_err(e)?;
    let mut theta = Theta::new(phi, psi1, psi2).map_err(e)?;
    theta.psi1.omega = g.random_range(0.5..3.0);
    theta.psi2.omega = 1.0 + g.random_range(0.5..3.0);
    theta.validate().map_err(e)?;
    Ok(theta)
}

fn c7_gradient() -> Verdict {
    let mut g = rng::stream(707);
    let orders = [ModelOrder { p: 1, q: 1 }, ModelOrder { p: 2, q: 1 }, ModelOrder { p: 1, q: 2 }];
    let (mut worst, mut cross_violations) = (0.0f64, 0);
    let points = 50;
    for i in 0..points {
        let order = orders[i % orders.len()];
        let truth = random_theta(&mut g, order)?;
        let init = if i % 2 == 0 { InitPolicy::Stationary } else { InitPolicy::SampleMean };
        let spec = dgp(truth, Family::Poisson, Linkage::Linear, SignSpec::BernoulliIngarch);
        let s = simulate(&spec, 400, 200, &mut g).map_err(e)?;
        let theta = random_theta(&mut g, order)?;
        let v = theta.to_vec();
        let an = score(&s, &theta, init).map_err(e)?;
        for j in 0..v.len() {
            let h = 1e-6 * v[j].abs().max(1.0);
            let (mut up, mut dn) = (v.clone(), v.clone());
            up[j] += h;
            dn[j] -= h;
            let fu = quasi_loglik(&s, &Theta::from_slice(&up, order), init).map_err(e)?;
            let fd = quasi_loglik(&s, &Theta::from_slice(&dn, order), init).map_err(e)?;
            let num = (fu - fd) / (2.0 * h);
            worst = worst.max((an[j] - num).abs() / num.abs().max(1.0));
        }
        // moving one block must leave the other blocks' scores untouched
        let k = order.psi_dim();
        let blocks = [0..3, 3..3 + k, 3 + k..3 + 2 * k];
        for (bi, moved) in blocks.iter().enumerate() {
            let mut w = v.clone();
            for x in &mut w[moved.clone()] {
                *x *= 0.9;
            }
            if bi == 2 {
                w[3 + k] = w[3 + k].max(1.5);
            }
            let other = score(&s, &Theta::from_slice(&w, order), init).map_err(e)?;
            for (bj, fixed) in blocks.iter().enumerate() {
                if bj != bi && fixed.clone().any(|j| other[j].to_bits() != an[j].to_bits()) {
                    cross_violations += 1;
                }
            }
        }
    }
    Ok((
        worst <= 1e-5 && cross_violations == 0,
        format!("{points} points: max |analytic - central diff| / max(|diff|, 1) = {worst:.2e}; cross-block changes {cross_violations}"),
    ))
}

fn kernel_laws() -> Result<Vec<(String, Vec<PosDist>)>, String> {
    let lambdas = [1.5, 3.0, 10.0, 50.0];
    let mut out = Vec::new();
    out.push(("poisson".into(), lambdas.iter().map(|&l| PosDist::poisson(l)).collect::<mdingarch::Result<_>>().map_err(e)?));
    out.push((
        "shifted_poisson".into(),
        lambdas.iter().map(|&l| PosDist::shifted_poisson(l)).collect::<mdingarch::Result<_>>().map_err(e)?,
    ));
    for r in [0.5, 2.0, 10.0] {
        out.push((
            format!("nb(r={r})"),
            lambdas.iter().map(|&l| PosDist::neg_binomial(r, l)).collect::<mdingarch::Result<_>>().map_err(e)?,
        ));
        out.push((
            format!("shifted_nb(r={r})"),
            lambdas.iter().map(|&l| PosDist::shifted_neg_binomial(r, l)).collect::<mdingarch::Result<_>>().map_err(e)?,
        ));
    }
    Ok(out)
}

fn c8_dists() -> Verdict {
    let (mut norm_err, mut roundtrip_fail, mut order_fail, mut mean_err) = (0.0f64, 0, 0, 0.0f64);
    for (_, laws) in kernel_laws()? {
        for d in &laws {
            let top = d.quantile(1.0 - 1e-15).map_err(e)? + 50;
            let mut total = 0.0;
            for k in d.support_min()..=top {
                total += d.pmf(k).map_err(e)?;
            }
            norm_err = norm_err.max((total - 1.0).abs());
            for i in 1..200 {
                let u = i as f64 / 200.0;
                let k = d.quantile(u).map_err(e)?;
                let below = if k > d.support_min() { d.cdf(k - 1).map_err(e)? } else { 0.0 };
                if !(d.cdf(k).map_err(e)? >= u && below < u) {
                    roundtrip_fail += 1;
                }
            }
        }
        for w in laws.windows(2) {
            let top = w[1].quantile(1.0 - 1e-12).map_err(e)?;
            for k in w[0].support_min()..=top {
                if w[0].cdf(k).map_err(e)? + 1e-12 < w[1].cdf(k).map_err(e)? {
                    order_fail += 1;
                }
            }
        }
    }
    for (pi, l1, l2) in [(0.3, 2.0, 4.0), (0.5, 1.0, 2.0), (0.8, 7.5, 1.2)] {
        let law = MixedDifferenceLaw::new(pi, PosDist::poisson(l1).map_err(e)?, PosDist::shifted_poisson(l2).map_err(e)?)
            .map_err(e)?;
        let mut m = 0.0;
        for y in -200..=200 {
            m += y as f64 * law.pmf(y).map_err(e)?;
        }
        mean_err = mean_err.max((m - (pi * l1 - (1.0 - pi) * l2)).abs());
    }
    Ok((
        norm_err < 1e-9 && roundtrip_fail == 0 && order_fail == 0 && mean_err < 1e-9,
        format!(
            "pmf mass error {norm_err:.1e}; quantile/cdf failures {roundtrip_fail}; stochastic order violations {order_fail}; mixture mean error {mean_err:.1e}"
        ),
    ))
}

fn c9_pit() -> Verdict {
    let n = 100_000;
    let truth = reference_pois();
    let s = simulate(&truth, n, 500, &mut rng::stream(909)).map_err(e)?;
    let calibrated = pit_histogram_at(&s, &truth.theta, InitPolicy::Stationary, Family::Poisson, 10).map_err(e)?;
    let nb = dgp(reference_theta(), Family::NegBinomial { r1: 0.8, r2: 0.8 }, Linkage::Linear, SignSpec::BernoulliIngarch);
    let s_nb = simulate(&nb, n, 500, &mut rng::stream(910)).map_err(e)?;
    let f = fit(&s_nb, ModelOrder { p: 1, q: 1 }, &FitOptions::default()).map_err(e)?;
    let misfit = pit_histogram(&s_nb, &f, Family::Poisson, 10).map_err(e)?;
    let (inside, outside) = (calibrated.outside_band().is_empty(), misfit.outside_band().len());
    let dev = calibrated.heights.iter().map(|h| (h - 0.1).abs()).fold(0.0, f64::max);
    Ok((
        inside && outside >= 1,
        format!(
            "true model: max |h - 0.1| = {dev:.4} (band half-width {:.4}); Poisson fit to NB data: {outside} bins outside",
            calibrated.band_high - 0.1
        ),
    ))
}

fn c10_sign() -> Verdict {
    let theta = Theta::order11(0.1, 0.6, 0.2, 1.0, 0.3, 0.3, 2.0, 0.3, 0.3).map_err(e)?;
    let spec = dgp(theta, Family::Poisson, Linkage::Linear, SignSpec::BernoulliIngarch);
    let reps = 100;
    let outcomes: Vec<(bool, bool, f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let s = simulate(&spec, 4000, 500, &mut derived_stream(1010, i as u64)).map_err(e)?;
            let r = sign_forecast_eval(&s, &[1000], &SignEvalOptions::default()).map_err(e)?;
            let r = &r[0];
            Ok((r.dm_mae2.p_value < 0.05, r.dm_mae3.p_value < 0.05, r.mae1, r.mae3))
        })
        .collect::<Result<_, String>>()?;
    let rej2 = outcomes.iter().filter(|o| o.0).count();
    let rej3 = outcomes.iter().filter(|o| o.1).count();
    let mae1 = outcomes.iter().map(|o| o.2).sum::<f64>() / reps as f64;
    let mae3 = outcomes.iter().map(|o| o.3).sum::<f64>() / reps as f64;
    Ok((
        rej2 * 10 >= reps * 9,
        format!("DM rejects vs MAE2 in {rej2}/{reps}, vs MAE3 in {rej3}/{reps}; mean MAE1 {mae1:.4}, MAE3 {mae3:.4}"),
    ))
}

fn c11_determinism() -> Verdict {
    let dir = std::env::temp_dir().join(format!("mdingarch-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(e)?;
    let input = dir.join("y.csv");
    let out = run_args(["mdingarch", "simulate", "--preset", "sec6-pois", "--n", "800", "--seed", "11"]).map_err(e)?;
    std::fs::write(&input, &out.stdout).map_err(e)?;
    let input_nb = dir.join("y_nb.csv");
    let out = run_args(["mdingarch", "simulate", "--preset", "sec6-nb", "--n", "800", "--seed", "12"]).map_err(e)?;
    std::fs::write(&input_nb, &out.stdout).map_err(e)?;
    let path = input.to_string_lossy().into_owned();
    let path_nb = input_nb.to_string_lossy().into_owned();
    let commands: Vec<Vec<&str>> = vec![
        vec!["simulate", "--preset", "sec6-nb", "--n", "500", "--seed", "3"],
        vec!["simulate", "--preset", "sec6-loglinear", "--n", "500", "--seed", "4"],
        vec!["fit", "--input", &path],
        vec!["gof", "--input", &path, "--seed", "5"],
        vec!["pit", "--input", &path, "--bins", "10"],
        vec!["pit", "--input", &path_nb, "--family", "nb"],
        vec!["eval-sign", "--input", &path, "--m", "400,600"],
        vec!["stationarity", "--preset", "sec6-pois", "--sign", "iid", "--pi", "0.5"],
    ];
    let mut differing = Vec::new();
    for cmd in &commands {
        let mut outputs = Vec::new();
        for threads in ["1", "1", "4"] {
            let mut args = vec!["mdingarch", "--threads", threads];
            args.extend(cmd.iter().copied());
            match run_args(&args) {
                Ok(o) => outputs.push(Ok(o.stdout)),
                Err(err) => outputs.push(Err(err.to_string())),
            }
        }
        if outputs.iter().any(|o| o.is_err()) || outputs.windows(2).any(|w| w[0] != w[1]) {
            differing.push(format!("{} ({:?})", cmd[0], outputs.iter().find_map(|o| o.as_ref().err())));
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok((
        differing.is_empty(),
        format!(
            "{} invocations x (2 runs at 1 thread + 1 run at 4 threads): {}",
            commands.len(),
            if differing.is_empty() { "byte-identical".to_string() } else { format!("differ: {}", differing.join(", ")) }
        ),
    ))
}
