use mdingarch::dists::{MixedDifferenceLaw, PosDist};
use mdingarch::evaluate::{diebold_mariano, pit_from_bounds};
use mdingarch::model::{intensity_levels, simulate, DgpSpec, Family, InitPolicy, Linkage, SignSpec, Theta};
use mdingarch::rng;
use mdingarch::stationarity::{build_matrix, check_conditions, closed_form_rho, spectral_radius, SignMode};
use proptest::prelude::*;

fn law(kind: u8, r: f64, lambda: f64) -> PosDist {
    match kind % 4 {
        0 => PosDist::poisson(lambda).unwrap(),
        1 => PosDist::shifted_poisson(lambda).unwrap(),
        2 => PosDist::neg_binomial(r, lambda).unwrap(),
        _ => PosDist::shifted_neg_binomial(r, lambda).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pmf_normalizes(kind in 0u8..4, r in 0.3f64..20.0, lambda in 1.05f64..60.0) {
        let d = law(kind, r, lambda);
        let top = d.quantile(1.0 - 1e-12).unwrap() + 200;
        let total: f64 = (d.support_min()..=top).map(|k| d.pmf(k).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "{d:?}: {total}");
    }

    #[test]
    fn quantile_inverts_cdf(kind in 0u8..4, r in 0.3f64..20.0, lambda in 1.05f64..60.0, u in 1e-6f64..(1.0 - 1e-6)) {
        let d = law(kind, r, lambda);
        let k = d.quantile(u).unwrap();
        prop_assert!(d.cdf(k).unwrap() >= u);
        prop_assert!(k == d.support_min() || d.cdf(k - 1).unwrap() < u);
    }

    #[test]
    fn stochastic_order_in_mean(kind in 0u8..4, r in 0.3f64..20.0, lambda in 1.05f64..30.0, gap in 0.01f64..10.0) {
        let (lo, hi) = (law(kind, r, lambda), law(kind, r, lambda + gap));
        let top = hi.quantile(1.0 - 1e-10).unwrap();
        for k in lo.support_min()..=top {
            prop_assert!(lo.cdf(k).unwrap() + 1e-12 >= hi.cdf(k).unwrap());
        }
    }

    #[test]
    fn mixture_normalizes_and_mean_matches(pi in 0.05f64..0.95, l1 in 0.1f64..15.0, l2 in 1.05f64..15.0) {
        let m = MixedDifferenceLaw::new(pi, PosDist::poisson(l1).unwrap(), PosDist::shifted_poisson(l2).unwrap()).unwrap();
        let (mut total, mut mean) = (0.0, 0.0);
        for y in -200..=200 {
            let p = m.pmf(y).unwrap();
            total += p;
            mean += y as f64 * p;
        }
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!((mean - m.mean()).abs() < 1e-9);
        prop_assert!((m.cdf(200).unwrap() - 1.0).abs() < 1e-12 && m.cdf(-200).unwrap() < 1e-12);
    }

    #[test]
    fn spectral_radius_is_monotone(
        a1 in 0.0f64..1.0, b1 in 0.0f64..0.9, a2 in 0.0f64..1.0, b2 in 0.0f64..0.9,
        bump in 0.0f64..0.09, which in 0usize..4, pi in 0.05f64..0.95,
    ) {
        let theta = |v: [f64; 4]| Theta::order11(0.2, 0.2, 0.2, 1.0, v[0], v[1], 2.0, v[2], v[3]).unwrap();
        let base = [a1, b1, a2, b2];
        let mut up = base;
        up[which] += bump;
        let rho = |t: &Theta| spectral_radius(&build_matrix(t, SignMode::Iid { pi }).unwrap().companion).unwrap();
        prop_assert!(rho(&theta(up)) + 1e-12 >= rho(&theta(base)));
    }

    #[test]
    fn necessary_conditions_match_spectral(a1 in 0.0f64..1.5, b1 in 0.0f64..0.99, a2 in 0.0f64..1.5, b2 in 0.0f64..0.99, pi in 0.01f64..0.99) {
        let t = Theta::order11(0.2, 0.2, 0.2, 1.0, a1, b1, 2.0, a2, b2).unwrap();
        let rep = check_conditions(&t, SignMode::Iid { pi }).unwrap();
        prop_assert_eq!(rep.equivalence_agrees, Some(true));
        prop_assert!((closed_form_rho(&t, pi).unwrap() - rep.spectral_radius).abs() < 1e-10);
    }

    #[test]
    fn negative_intensity_stays_above_one(seed in 0u64..1000, w2 in 0.3f64..3.0, a2 in 0.0f64..0.5, b2 in 0.0f64..0.7) {
        let w2 = w2.max(1.0 - b2 + 1e-3);
        let theta = Theta::order11(0.2, 0.2, 0.2, 1.0, 0.3, 0.3, w2, a2, b2).unwrap();
        let spec = DgpSpec { theta: theta.clone(), family: Family::Poisson, linkage: Linkage::Linear, sign: SignSpec::BernoulliIngarch };
        let s = simulate(&spec, 200, 50, &mut rng::stream(seed)).unwrap();
        let lam2 = intensity_levels(&s.abs_values(), s.signs(), &theta.psi2, InitPolicy::Stationary);
        prop_assert!(lam2.iter().all(|&l| l > 1.0));
    }

    #[test]
    fn pit_heights_form_a_distribution(raw in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..60), bins in 2usize..20) {
        let bounds: Vec<(f64, f64)> = raw.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        let h = pit_from_bounds(&bounds, bins, Family::Poisson).unwrap();
        prop_assert!((h.heights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(h.heights.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
    }

    #[test]
    fn dm_p_value_monotone_in_differential(d in prop::collection::vec(-1.0f64..1.0, 40..120), shift in 0.0f64..0.5) {
        let zero = vec![0.0; d.len()];
        let shifted: Vec<f64> = d.iter().map(|v| v - shift).collect();
        let a = diebold_mariano(&d, &zero).unwrap();
        let b = diebold_mariano(&shifted, &zero).unwrap();
        prop_assert!((0.0..=1.0).contains(&a.p_value));
        if !a.degenerate {
            prop_assert!(b.p_value <= a.p_value + 1e-15);
        }
    }
}

#[test]
fn sampling_is_reproducible() {
    let d = PosDist::neg_binomial(2.0, 4.0).unwrap();
    let draw = |seed| {
        let mut g = rng::stream(seed);
        (0..100).map(|_| d.sample(&mut g).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(draw(5), draw(5));
    assert_ne!(draw(5), draw(6));
}
