mod common;

use indexfish::economics::{
    cara_utility, net_transfer, price_contract, Preferences, ProductionMode, ProductionSpec,
};
use indexfish::stochastics::{
    cdf_at, conditional_mean, sample_shocks, sample_shocks_with, PanelDesign, ShockSpec,
    ShockVariable, Side,
};
use proptest::prelude::*;

fn variable() -> impl Strategy<Value = ShockVariable> {
    prop_oneof![Just(ShockVariable::Theta), Just(ShockVariable::Omega)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cdf_is_monotone(sigma in 0.01f64..1.0, lo in -3.0f64..3.0, step in 0.0f64..1.0, v in variable()) {
        let spec = ShockSpec::independent(sigma, sigma * 0.5 + 0.01);
        let a = cdf_at(&spec, v, lo).unwrap();
        let b = cdf_at(&spec, v, lo + step).unwrap();
        prop_assert!(a <= b);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn conditional_means_straddle_trigger(sigma in 0.05f64..1.0, k in -2.5f64..2.5, v in variable()) {
        let spec = ShockSpec::independent(sigma, sigma);
        let trigger = k * sigma;
        let below = conditional_mean(&spec, v, Side::Below, trigger).unwrap();
        let above = conditional_mean(&spec, v, Side::Above, trigger).unwrap();
        prop_assert!(below < trigger && trigger < above, "{below} {trigger} {above}");
        // law of total expectation
        let p = cdf_at(&spec, v, trigger).unwrap();
        prop_assert!((p * below + (1.0 - p) * above).abs() < 1e-9 * sigma.max(1.0));
    }

    #[test]
    fn utility_is_increasing_and_concave(a in 0.1f64..5.0, w in -5.0f64..5.0, d in 1e-3f64..2.0) {
        let prefs = Preferences::new(a).unwrap();
        let (u0, u1, u2) = (cara_utility(&prefs, w), cara_utility(&prefs, w + d), cara_utility(&prefs, w + 2.0 * d));
        prop_assert!(u0 < u1 && u1 < u2);
        prop_assert!(u1 >= 0.5 * (u0 + u2));
    }

    /// With stock risk switched off, harvest variance rises with the input
    /// exactly when the risk elasticity is positive.
    #[test]
    fn harvest_variance_follows_risk_elasticity(beta in prop_oneof![-0.9f64..-0.05, 0.05f64..0.9], x in 0.2f64..3.0) {
        let spec = ProductionSpec::single(ProductionMode::Risky, 0.5, beta, 0.25);
        let shocks = ShockSpec::independent(0.0, 0.3);
        let panel = sample_shocks(&shocks, 400, 3).unwrap();
        let var = |x: f64| {
            let t = spec.terms(&[x]).unwrap();
            let ys: Vec<f64> = panel.draws().iter().map(|d| t.harvest(d.theta, d.omega)).collect();
            let m = ys.iter().sum::<f64>() / ys.len() as f64;
            ys.iter().map(|y| (y - m).powi(2)).sum::<f64>()
        };
        let grows = var(1.1 * x) > var(x);
        prop_assert_eq!(grows, beta > 0.0);
    }

    #[test]
    fn fair_premium_has_zero_mean_transfer(
        k in -1.5f64..1.5,
        gamma in 0.01f64..2.0,
        v in variable(),
        seed in 0u64..1000,
    ) {
        let shocks = ShockSpec::independent(0.3, 0.2);
        let sigma = shocks.sigma(v);
        let contract = price_contract(v, k * sigma, gamma, &shocks).unwrap();
        prop_assert!((contract.premium_abs - common::std_normal_cdf(k) * gamma).abs() < 1e-12);
        let panel = sample_shocks_with(&shocks, 20_000, seed, PanelDesign::Plain).unwrap();
        let transfers: Vec<f64> = panel.values(v).map(|z| net_transfer(&contract, z)).collect();
        let n = transfers.len() as f64;
        let mean = transfers.iter().sum::<f64>() / n;
        let sd = (transfers.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        prop_assert!(mean.abs() <= 4.5 * sd / n.sqrt() + 1e-12, "mean {mean} sd {sd}");
    }
}

#[test]
fn mean_harvest_matches_analytic_mean() {
    let spec = ProductionSpec::single(ProductionMode::Risky, 0.5, 0.4, 0.25);
    let shocks = ShockSpec::independent(0.3, 0.3);
    let panel = sample_shocks_with(&shocks, 100_000, 11, PanelDesign::Plain).unwrap();
    for x in [0.5, 1.0, 2.0] {
        let t = spec.terms(&[x]).unwrap();
        let ys: Vec<f64> = panel
            .draws()
            .iter()
            .map(|d| t.harvest(d.theta, d.omega))
            .collect();
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let sd = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let analytic = x.powf(0.5);
        assert!(
            (mean - analytic).abs() < 4.0 * sd / n.sqrt(),
            "x={x}: {mean} vs {analytic}"
        );
        assert!((t.expected_harvest() - analytic).abs() < 1e-12);
    }
}

#[test]
fn antithetic_panel_is_exactly_centered() {
    let shocks = ShockSpec::independent(0.4, 0.2);
    let panel = sample_shocks(&shocks, 1000, 5).unwrap();
    let mean = |v| panel.values(v).sum::<f64>() / panel.len() as f64;
    assert!(mean(ShockVariable::Theta).abs() < 1e-15);
    assert!(mean(ShockVariable::Omega).abs() < 1e-15);
}
