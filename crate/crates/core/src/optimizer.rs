//! Monte Carlo expected-utility maximization over inputs and coverage.
//!
//! The search runs on `ln x` (and `gamma` directly for joint problems), so
//! every input stays strictly positive. Each candidate from the start set is
//! polished until no single-coordinate step of size
//! [`OptimizerSettings::check_step`] raises expected utility by more than
//! [`OptimizerSettings::tol_eu`]; a solution is `converged` only when that
//! check passes.

use serde::{Deserialize, Serialize};

use crate::economics::{
    cara_utility, net_transfer, Contract, ContractTemplate, Preferences, ProductionSpec,
};
use crate::error::{ModelError, Result};
use crate::simplex::{self, BoxBounds, SimplexOptions};
use crate::stochastics::{ShockPanel, ShockSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSettings {
    pub input_lower: f64,
    pub input_upper: f64,
    /// Upper bound on coverage, as a fraction of baseline expected profit.
    pub gamma_max: f64,
    /// Simplex diameter at which a local search stops (log-input units).
    pub simplex_tol: f64,
    /// Relative step for inputs, absolute step for coverage.
    pub check_step: f64,
    pub tol_eu: f64,
    pub max_evals: usize,
    pub max_polish: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            input_lower: 1e-3,
            input_upper: 1e3,
            gamma_max: 2.0,
            simplex_tol: 1e-6,
            check_step: 1e-3,
            tol_eu: 1e-9,
            max_evals: 100_000,
            max_polish: 6,
        }
    }
}

/// Coverage starting points for the joint search.
pub const COVERAGE_STARTS: [f64; 3] = [0.1, 0.5, 1.0];
/// Multipliers applied to the riskless optimum to form input starts.
pub const INPUT_START_SCALES: [f64; 3] = [1.0, 0.5, 2.0];

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionProblem {
    production: ProductionSpec,
    shocks: ShockSpec,
    panel: ShockPanel,
    prefs: Preferences,
    contract: ContractTemplate,
    settings: OptimizerSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalChoice {
    pub inputs: Vec<f64>,
    pub gamma_frac: f64,
    pub expected_utility: f64,
    /// `B f(x*) - c(x*)`; the fair contract adds nothing in expectation.
    pub expected_profit: f64,
    pub expected_harvest: f64,
    pub converged: bool,
    pub evaluations: usize,
    /// Largest utility gain any check step found at the returned point.
    pub check_gain: f64,
    pub settings: OptimizerSettings,
}

impl OptimalChoice {
    pub fn certainty_equivalent(&self, prefs: &Preferences) -> f64 {
        crate::economics::certainty_equivalent(prefs, self.expected_utility)
    }
}

struct Candidate {
    point: Vec<f64>,
    utility: f64,
    check_gain: f64,
    passed: bool,
}

impl DecisionProblem {
    pub fn new(
        production: ProductionSpec,
        shocks: ShockSpec,
        panel: ShockPanel,
        prefs: Preferences,
        contract: ContractTemplate,
    ) -> Result<Self> {
        production.validate()?;
        shocks.validate()?;
        prefs.validate()?;
        if panel.spec() != &shocks {
            return Err(ModelError::PanelMismatch);
        }
        if !contract.trigger.is_finite() {
            return Err(ModelError::invalid("trigger", "must be finite"));
        }
        Ok(DecisionProblem {
            production,
            shocks,
            panel,
            prefs,
            contract,
            settings: OptimizerSettings::default(),
        })
    }

    pub fn with_settings(mut self, settings: OptimizerSettings) -> Result<Self> {
        if !(settings.input_lower > 0.0 && settings.input_lower < settings.input_upper) {
            return Err(ModelError::invalid(
                "input bounds",
                "need 0 < lower < upper",
            ));
        }
        if !(settings.gamma_max > 0.0) {
            return Err(ModelError::invalid("gamma_max", "must be positive"));
        }
        self.settings = settings;
        Ok(self)
    }

    pub fn production(&self) -> &ProductionSpec {
        &self.production
    }

    pub fn shocks(&self) -> &ShockSpec {
        &self.shocks
    }

    pub fn panel(&self) -> &ShockPanel {
        &self.panel
    }

    pub fn prefs(&self) -> &Preferences {
        &self.prefs
    }

    pub fn contract(&self) -> &ContractTemplate {
        &self.contract
    }

    pub fn settings(&self) -> &OptimizerSettings {
        &self.settings
    }

    pub fn resolve_contract(&self, gamma_frac: f64, baseline_profit: f64) -> Result<Contract> {
        Contract::resolve(self.contract, gamma_frac, baseline_profit, &self.shocks)
    }

    /// Panel average of `u(profit + net transfer)`.
    pub fn expected_utility(
        &self,
        x: &[f64],
        gamma_frac: f64,
        baseline_profit: f64,
    ) -> Result<f64> {
        let contract = self.resolve_contract(gamma_frac, baseline_profit)?;
        self.expected_utility_with(x, &contract)
    }

    pub fn expected_utility_with(&self, x: &[f64], contract: &Contract) -> Result<f64> {
        let terms = self.production.terms(x)?;
        let index = contract.index;
        let total: f64 = self
            .panel
            .draws()
            .iter()
            .map(|d| {
                let wealth = terms.profit(d.theta, d.omega) + net_transfer(contract, d.get(index));
                cara_utility(&self.prefs, wealth)
            })
            .sum();
        Ok(total / self.panel.len() as f64)
    }

    fn input_bounds(&self, with_gamma: bool) -> BoxBounds {
        let d = self.production.dim();
        let mut lower = vec![self.settings.input_lower.ln(); d];
        let mut upper = vec![self.settings.input_upper.ln(); d];
        if with_gamma {
            lower.push(0.0);
            upper.push(self.settings.gamma_max);
        }
        BoxBounds { lower, upper }
    }

    fn clamp_inputs(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .map(|v| v.clamp(self.settings.input_lower, self.settings.input_upper))
            .collect()
    }

    /// Maximizes over inputs with coverage held at `gamma_frac`.
    pub fn optimize_inputs(&self, gamma_frac: f64, baseline_profit: f64) -> Result<OptimalChoice> {
        let contract = self.resolve_contract(gamma_frac, baseline_profit)?;
        let riskless = self.production.riskless_optimum();
        let starts: Vec<Vec<f64>> = INPUT_START_SCALES
            .iter()
            .map(|s| {
                let x: Vec<f64> = riskless.iter().map(|v| v * s).collect();
                self.clamp_inputs(&x).iter().map(|v| v.ln()).collect()
            })
            .collect();
        let objective = |z: &[f64]| {
            let x: Vec<f64> = z.iter().map(|v| v.exp()).collect();
            self.expected_utility_with(&x, &contract)
                .unwrap_or(f64::NEG_INFINITY)
        };
        let (best, evaluations) = self.search(&objective, &starts, false);
        Ok(self.finish(best, gamma_frac, evaluations))
    }

    /// The no-insurance optimum. Its expected profit normalizes coverage.
    pub fn baseline(&self) -> Result<OptimalChoice> {
        let choice = self.optimize_inputs(0.0, 0.0)?;
        if !(choice.expected_profit > 0.0) {
            return Err(ModelError::NonPositiveBaselineProfit(
                choice.expected_profit,
            ));
        }
        Ok(choice)
    }

    /// Joint maximization over inputs and coverage in `[0, gamma_max]`.
    pub fn optimize_inputs_and_coverage(&self) -> Result<OptimalChoice> {
        let base = self.baseline()?;
        self.optimize_inputs_and_coverage_from(&base)
    }

    /// Joint maximization reusing an existing baseline solve.
    pub fn optimize_inputs_and_coverage_from(&self, base: &OptimalChoice) -> Result<OptimalChoice> {
        let baseline_profit = base.expected_profit;
        if !(baseline_profit > 0.0) {
            return Err(ModelError::NonPositiveBaselineProfit(baseline_profit));
        }
        // fails early on a degenerate index
        self.resolve_contract(1.0, baseline_profit)?;

        let d = self.production.dim();
        let starts: Vec<Vec<f64>> = COVERAGE_STARTS
            .iter()
            .map(|&g| {
                let mut z: Vec<f64> = base.inputs.iter().map(|v| v.ln()).collect();
                z.push(g.min(self.settings.gamma_max));
                z
            })
            .collect();
        let objective = |z: &[f64]| {
            let x: Vec<f64> = z[..d].iter().map(|v| v.exp()).collect();
            self.expected_utility(&x, z[d], baseline_profit)
                .unwrap_or(f64::NEG_INFINITY)
        };
        let (best, evaluations) = self.search(&objective, &starts, true);
        let gamma = best.point[d];
        let mut choice = self.finish(best, gamma, evaluations);
        choice.evaluations += base.evaluations;
        // gamma = 0 is feasible, so the joint optimum never does worse
        if choice.expected_utility < base.expected_utility {
            let mut fallback = base.clone();
            fallback.evaluations = choice.evaluations;
            fallback.converged = base.converged && choice.converged;
            return Ok(fallback);
        }
        Ok(choice)
    }

    fn finish(&self, best: Candidate, gamma_frac: f64, evaluations: usize) -> OptimalChoice {
        let d = self.production.dim();
        let inputs: Vec<f64> = best.point[..d].iter().map(|v| v.exp()).collect();
        let terms = self
            .production
            .terms(&inputs)
            .expect("inputs inside positive bounds");
        OptimalChoice {
            inputs,
            gamma_frac,
            expected_utility: best.utility,
            expected_profit: terms.expected_profit(),
            expected_harvest: terms.expected_harvest(),
            converged: best.passed,
            evaluations,
            check_gain: best.check_gain,
            settings: self.settings,
        }
    }

    /// Multi-start search with check-and-polish. `objective` returns
    /// expected utility (to be maximized) at a search-space point.
    fn search<F>(&self, objective: &F, starts: &[Vec<f64>], with_gamma: bool) -> (Candidate, usize)
    where
        F: Fn(&[f64]) -> f64,
    {
        let bounds = self.input_bounds(with_gamma);
        let budget = self.settings.max_evals;
        let mut evaluations = 0usize;
        let mut candidates = Vec::with_capacity(starts.len());

        for start in starts {
            let mut point = start.clone();
            let mut step = 0.1;
            let mut candidate = None;
            for _ in 0..=self.settings.max_polish {
                let remaining = budget.saturating_sub(evaluations);
                if remaining == 0 {
                    break;
                }
                let opts = SimplexOptions {
                    xtol: self.settings.simplex_tol,
                    max_evals: remaining,
                    initial_step: step,
                    ..SimplexOptions::default()
                };
                let result = simplex::minimize(|z| -objective(z), &point, &bounds, &opts);
                evaluations += result.evaluations;
                let utility = -result.value;
                let (gain, better, used) = self.local_check(objective, &result.x, utility, &bounds);
                evaluations += used;
                let passed = gain <= self.settings.tol_eu;
                candidate = Some(Candidate {
                    point: result.x,
                    utility,
                    check_gain: gain,
                    passed,
                });
                match better {
                    Some(next) if !passed => {
                        point = next;
                        step = (step * 0.1).max(1e-4);
                    }
                    _ => break,
                }
            }
            if let Some(c) = candidate {
                candidates.push(c);
            }
        }

        let best = choose(candidates, self.production.dim(), self.settings.tol_eu);
        (best, evaluations)
    }

    /// Steps each coordinate up and down. Returns the largest utility gain,
    /// the point that achieved it, and the number of evaluations used.
    fn local_check<F>(
        &self,
        objective: &F,
        point: &[f64],
        utility: f64,
        bounds: &BoxBounds,
    ) -> (f64, Option<Vec<f64>>, usize)
    where
        F: Fn(&[f64]) -> f64,
    {
        let d = self.production.dim();
        let step = self.settings.check_step;
        let mut best_gain = f64::NEG_INFINITY;
        let mut best_point = None;
        let mut used = 0;
        for i in 0..point.len() {
            for sign in [1.0, -1.0] {
                let mut trial = point.to_vec();
                trial[i] = if i < d {
                    // relative step on the input itself
                    trial[i] + (1.0 + sign * step).ln()
                } else {
                    trial[i] + sign * step
                };
                bounds.project(&mut trial);
                if trial[i] == point[i] {
                    continue;
                }
                used += 1;
                let gain = objective(&trial) - utility;
                if gain > best_gain {
                    best_gain = gain;
                    best_point = Some(trial);
                }
            }
        }
        (
            best_gain.max(0.0),
            best_point.filter(|_| best_gain > 0.0),
            used,
        )
    }
}

/// Best passing candidate; among those within `tol_eu` of it, the one with
/// smallest input norm (then smallest coverage).
fn choose(mut candidates: Vec<Candidate>, dim: usize, tol_eu: f64) -> Candidate {
    let any_passed = candidates.iter().any(|c| c.passed);
    if any_passed {
        candidates.retain(|c| c.passed);
    }
    let top = candidates
        .iter()
        .map(|c| c.utility)
        .fold(f64::NEG_INFINITY, f64::max);
    let norm = |c: &Candidate| c.point[..dim].iter().map(|z| z.exp().powi(2)).sum::<f64>();
    let gamma = |c: &Candidate| c.point.get(dim).copied().unwrap_or(0.0);
    candidates
        .into_iter()
        .filter(|c| c.utility >= top - tol_eu)
        .min_by(|a, b| {
            norm(a)
                .total_cmp(&norm(b))
                .then(gamma(a).total_cmp(&gamma(b)))
        })
        .expect("at least one start")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::economics::{ProductionMode, DEFAULT_COST_COEFF};
    use crate::stochastics::{sample_shocks, ShockVariable};
    use approx::assert_relative_eq;

    fn problem(
        mode: ProductionMode,
        alpha: f64,
        beta: f64,
        st: f64,
        so: f64,
        a: f64,
        index: ShockVariable,
    ) -> DecisionProblem {
        let shocks = ShockSpec::independent(st, so);
        let panel = sample_shocks(&shocks, 1000, 11).unwrap();
        DecisionProblem::new(
            ProductionSpec::single(mode, alpha, beta, DEFAULT_COST_COEFF),
            shocks,
            panel,
            Preferences::new(a).unwrap(),
            ContractTemplate::new(index, 0.0),
        )
        .unwrap()
    }

    #[test]
    fn deterministic_utility_example() {
        let p = problem(
            ProductionMode::Risky,
            0.5,
            0.3,
            0.0,
            0.0,
            1.0,
            ShockVariable::Omega,
        );
        let eu = p.expected_utility(&[1.0], 0.0, 0.0).unwrap();
        assert_relative_eq!(eu, 1.0 - (-0.75f64).exp(), epsilon = 1e-13);
        assert_relative_eq!(eu, 0.5276, epsilon = 1e-4);
    }

    #[test]
    fn rejects_mismatched_panel() {
        let panel = sample_shocks(&ShockSpec::independent(0.1, 0.1), 10, 1).unwrap();
        let err = DecisionProblem::new(
            ProductionSpec::single(ProductionMode::Risky, 0.5, 0.3, 0.25),
            ShockSpec::independent(0.2, 0.1),
            panel,
            Preferences::new(1.0).unwrap(),
            ContractTemplate::new(ShockVariable::Omega, 0.0),
        );
        assert_eq!(err, Err(ModelError::PanelMismatch));
    }

    #[test]
    fn coverage_requires_positive_baseline_profit() {
        let p = problem(
            ProductionMode::Risky,
            0.5,
            0.3,
            0.2,
            0.2,
            1.0,
            ShockVariable::Omega,
        );
        assert_eq!(
            p.expected_utility(&[1.0], 0.5, 0.0),
            Err(ModelError::NonPositiveBaselineProfit(0.0))
        );
    }

    #[test]
    fn deterministic_optimum_is_unit_input() {
        let p = problem(
            ProductionMode::Risky,
            0.5,
            0.3,
            0.0,
            0.0,
            1.0,
            ShockVariable::Omega,
        );
        let base = p.baseline().unwrap();
        assert!(base.converged);
        assert_relative_eq!(base.inputs[0], 1.0, max_relative = 1e-5);
        assert_relative_eq!(base.expected_profit, 0.75, max_relative = 1e-9);
        assert_eq!(base.expected_harvest, base.inputs[0].sqrt());
    }

    #[test]
    fn stock_risk_lowers_input_and_utility() {
        let risky = problem(
            ProductionMode::Standard,
            0.5,
            0.0,
            0.3,
            0.0,
            3.0,
            ShockVariable::Theta,
        );
        let base = risky.baseline().unwrap();
        assert!(base.converged);
        assert!(base.inputs[0] < 1.0);
        let riskless = problem(
            ProductionMode::Standard,
            0.5,
            0.0,
            0.0,
            0.0,
            3.0,
            ShockVariable::Theta,
        );
        assert!(base.expected_utility < riskless.baseline().unwrap().expected_utility);
    }

    #[test]
    fn baseline_is_deterministic() {
        let p = problem(
            ProductionMode::Risky,
            0.25,
            -0.5,
            0.2,
            0.3,
            2.0,
            ShockVariable::Omega,
        );
        assert_eq!(p.baseline().unwrap(), p.baseline().unwrap());
    }

    #[test]
    fn joint_solution_weakly_improves_on_baseline() {
        let p = problem(
            ProductionMode::Risky,
            0.75,
            0.3,
            0.4,
            0.4,
            3.0,
            ShockVariable::Omega,
        );
        let base = p.baseline().unwrap();
        let joint = p.optimize_inputs_and_coverage_from(&base).unwrap();
        assert!(joint.converged);
        assert!(joint.expected_utility >= base.expected_utility);
        assert!(joint.gamma_frac > 0.0 && joint.gamma_frac < 2.0);
    }

    #[test]
    fn joint_solve_rejects_degenerate_index() {
        let p = problem(
            ProductionMode::Risky,
            0.5,
            0.3,
            0.2,
            0.0,
            1.0,
            ShockVariable::Omega,
        );
        assert!(matches!(
            p.optimize_inputs_and_coverage(),
            Err(ModelError::DegenerateVariable { variable: "omega" })
        ));
    }
}
