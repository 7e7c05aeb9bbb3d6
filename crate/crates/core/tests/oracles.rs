mod common;

use common::{closed_form_optimum, grid_argmax, naive_eu, Cover, Single};
use indexfish::economics::{ContractTemplate, Preferences, ProductionMode, ProductionSpec};
use indexfish::experiments::FleetCalibration;
use indexfish::optimizer::DecisionProblem;
use indexfish::propositions::mean_marginal_profit;
use indexfish::stochastics::{sample_shocks, ShockSpec, ShockVariable};

fn problem(
    m: &Single,
    a: f64,
    shocks: ShockSpec,
    index: ShockVariable,
    trigger: f64,
    draws: usize,
    seed: u64,
) -> DecisionProblem {
    let mode = if m.risky {
        ProductionMode::Risky
    } else {
        ProductionMode::Standard
    };
    DecisionProblem::new(
        ProductionSpec::single(mode, m.alpha, m.beta, m.cost),
        shocks,
        sample_shocks(&shocks, draws, seed).unwrap(),
        Preferences::new(a).unwrap(),
        ContractTemplate::new(index, trigger),
    )
    .unwrap()
}

#[test]
fn deterministic_optimum_matches_closed_form() {
    for alpha in [0.25, 0.5, 0.75] {
        for cost in [0.1, 0.25, 1.0] {
            let m = Single {
                alpha,
                beta: 0.3,
                cost,
                risky: true,
            };
            let p = problem(
                &m,
                2.0,
                ShockSpec::independent(0.0, 0.0),
                ShockVariable::Omega,
                0.0,
                10,
                1,
            );
            let x = p.baseline().unwrap().inputs[0];
            let oracle = closed_form_optimum(alpha, cost);
            assert!(
                ((x - oracle) / oracle).abs() < 1e-4,
                "alpha={alpha} c={cost}: {x} vs {oracle}"
            );
        }
    }
}

#[test]
fn expected_utility_matches_naive_loop() {
    let m = Single {
        alpha: 0.5,
        beta: -0.4,
        cost: 0.25,
        risky: true,
    };
    let shocks = ShockSpec::independent(0.25, 0.3);
    for (index, trigger) in [
        (ShockVariable::Omega, 0.0),
        (ShockVariable::Theta, -0.1),
        (ShockVariable::Omega, 0.15),
    ] {
        let p = problem(&m, 2.5, shocks, index, trigger, 1000, 9);
        for (x, gamma) in [(0.7, 0.0), (1.0, 0.4), (1.3, 1.2)] {
            let baseline_profit = 0.6;
            let cover = Cover {
                index,
                trigger,
                gamma_abs: gamma * baseline_profit,
                sigma_index: shocks.sigma(index),
            };
            let lib = p.expected_utility(&[x], gamma, baseline_profit).unwrap();
            let oracle = naive_eu(&m, x, 2.5, &cover, p.panel());
            assert!((lib - oracle).abs() < 1e-12, "{lib} vs {oracle}");
        }
    }
}

#[test]
fn stochastic_optimum_matches_grid_search() {
    let step = 1e-3;
    let cells = [
        (
            Single {
                alpha: 0.5,
                beta: 0.0,
                cost: 0.25,
                risky: false,
            },
            3.0,
            (0.3, 0.0),
            ShockVariable::Theta,
            0.0,
        ),
        (
            Single {
                alpha: 0.5,
                beta: 0.0,
                cost: 0.25,
                risky: false,
            },
            3.0,
            (0.3, 0.0),
            ShockVariable::Theta,
            0.5,
        ),
        (
            Single {
                alpha: 0.25,
                beta: 0.5,
                cost: 0.25,
                risky: true,
            },
            1.0,
            (0.2, 0.3),
            ShockVariable::Omega,
            0.0,
        ),
        (
            Single {
                alpha: 0.25,
                beta: 0.5,
                cost: 0.25,
                risky: true,
            },
            1.0,
            (0.2, 0.3),
            ShockVariable::Omega,
            1.0,
        ),
        (
            Single {
                alpha: 0.75,
                beta: -0.5,
                cost: 0.25,
                risky: true,
            },
            2.0,
            (0.1, 0.4),
            ShockVariable::Omega,
            0.0,
        ),
        (
            Single {
                alpha: 0.75,
                beta: -0.5,
                cost: 0.25,
                risky: true,
            },
            2.0,
            (0.1, 0.4),
            ShockVariable::Omega,
            0.8,
        ),
        (
            Single {
                alpha: 0.5,
                beta: 0.7,
                cost: 0.25,
                risky: true,
            },
            3.0,
            (0.4, 0.2),
            ShockVariable::Theta,
            0.0,
        ),
        (
            Single {
                alpha: 0.5,
                beta: 0.7,
                cost: 0.25,
                risky: true,
            },
            3.0,
            (0.4, 0.2),
            ShockVariable::Theta,
            1.0,
        ),
        (
            Single {
                alpha: 0.5,
                beta: -0.1,
                cost: 0.1,
                risky: true,
            },
            2.0,
            (0.3, 0.3),
            ShockVariable::Omega,
            0.0,
        ),
        (
            Single {
                alpha: 0.5,
                beta: -0.1,
                cost: 0.1,
                risky: true,
            },
            2.0,
            (0.3, 0.3),
            ShockVariable::Theta,
            0.6,
        ),
        (
            Single {
                alpha: 0.25,
                beta: 0.3,
                cost: 1.0,
                risky: true,
            },
            1.0,
            (0.2, 0.2),
            ShockVariable::Omega,
            0.3,
        ),
        (
            Single {
                alpha: 0.75,
                beta: 0.1,
                cost: 1.0,
                risky: true,
            },
            3.0,
            (0.4, 0.4),
            ShockVariable::Theta,
            0.3,
        ),
    ];
    for (i, (m, a, (st, so), index, gamma)) in cells.into_iter().enumerate() {
        let shocks = ShockSpec::independent(st, so);
        let p = problem(&m, a, shocks, index, 0.0, 1000, 100 + i as u64);
        let baseline_profit = 0.5;
        let choice = p.optimize_inputs(gamma, baseline_profit).unwrap();
        assert!(choice.converged);
        let cover = Cover {
            index,
            trigger: 0.0,
            gamma_abs: gamma * baseline_profit,
            sigma_index: shocks.sigma(index),
        };
        let oracle = grid_argmax(&m, a, &cover, p.panel(), 0.05, 3.0, step);
        assert!(
            (choice.inputs[0] - oracle).abs() <= step,
            "cell {i}: optimizer {} vs grid {oracle}",
            choice.inputs[0]
        );
    }
}

#[test]
fn finite_difference_marginal_profit_matches_derivative() {
    let shocks = ShockSpec::independent(0.3, 0.3);
    for (alpha, beta) in [(0.25, -0.7), (0.5, 0.1), (0.75, 0.7)] {
        let m = Single {
            alpha,
            beta,
            cost: 0.25,
            risky: true,
        };
        let p = problem(&m, 2.0, shocks, ShockVariable::Omega, 0.0, 2000, 4);
        for x in [0.5, 1.3, 1.7] {
            let fd = mean_marginal_profit(&p, &[x], 0).unwrap();
            let draws = p.panel().draws();
            let analytic = draws
                .iter()
                .map(|d| m.marginal_profit(x, d.theta, d.omega))
                .sum::<f64>()
                / draws.len() as f64;
            assert!(
                ((fd - analytic) / analytic).abs() < 1e-3,
                "{fd} vs {analytic}"
            );
        }
    }
}

#[test]
fn riskless_multi_input_optimum_satisfies_first_order_conditions() {
    let spec = FleetCalibration::coastal_groundfish().production();
    let x = spec.riskless_optimum();
    let t = spec.terms(&x).unwrap();
    for (xi, input) in x.iter().zip(&spec.inputs) {
        let foc =
            input.alpha * spec.biomass_mean * t.mean_output / xi - 2.0 * input.cost_coeff * xi;
        assert!(foc.abs() < 1e-10, "{foc}");
    }
}

#[test]
fn doubling_costs_weakly_lowers_inputs() {
    let shocks = ShockSpec::independent(0.2, 0.2);
    let solve = |fleet: FleetCalibration| {
        DecisionProblem::new(
            fleet.production(),
            shocks,
            sample_shocks(&shocks, 400, 8).unwrap(),
            Preferences::new(2.0).unwrap(),
            ContractTemplate::new(ShockVariable::Omega, 0.0),
        )
        .unwrap()
        .baseline()
        .unwrap()
        .inputs
    };
    for fleet in FleetCalibration::presets() {
        let c = fleet.cost_coeffs[0];
        let lo = solve(fleet.clone());
        let hi = solve(fleet.with_cost(2.0 * c));
        for (a, b) in lo.iter().zip(&hi) {
            assert!(b <= &(a * (1.0 + 1e-6)), "{lo:?} -> {hi:?}");
        }
    }
}
