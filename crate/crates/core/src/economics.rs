//! Production, cost, profit, CARA utility, and the index contract.
//!
//! Harvest follows a Just-Pope form: `y = f(x)(B + theta) + omega h(x)`
//! with `f(x) = prod x_i^alpha_i` and `h(x) = prod x_i^beta_i`. Costs are
//! quadratic per input and the output price is one.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::stochastics::{cdf_at, ShockSpec, ShockVariable};

/// Largest exponent passed to `exp` in [`cara_utility`]. Wealth below
/// `-UTILITY_EXP_CAP / a` saturates at `1 - e^700`.
pub const UTILITY_EXP_CAP: f64 = 700.0;

/// Cost coefficient that puts the riskless single-input optimum at
/// `x* = 1` when `alpha = 0.5` and `B = 1`.
pub const DEFAULT_COST_COEFF: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProductionMode {
    /// `y = f(x)(B + theta)`; risk elasticities are ignored.
    Standard,
    #[default]
    Risky,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub name: String,
    /// Mean-production elasticity.
    pub alpha: f64,
    /// Risk elasticity; positive means risk increasing.
    pub beta: f64,
    pub cost_coeff: f64,
}

impl InputSpec {
    pub fn new(name: impl Into<String>, alpha: f64, beta: f64, cost_coeff: f64) -> Self {
        InputSpec {
            name: name.into(),
            alpha,
            beta,
            cost_coeff,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionSpec {
    pub mode: ProductionMode,
    pub inputs: Vec<InputSpec>,
    pub biomass_mean: f64,
}

/// Input-dependent pieces of profit, computed once per input vector and
/// reused across every shock draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductionTerms {
    pub mean_output: f64,
    pub risk_output: f64,
    pub cost: f64,
    pub biomass_mean: f64,
}

impl ProductionTerms {
    #[inline]
    pub fn harvest(&self, theta: f64, omega: f64) -> f64 {
        self.mean_output * (self.biomass_mean + theta) + omega * self.risk_output
    }

    #[inline]
    pub fn profit(&self, theta: f64, omega: f64) -> f64 {
        self.harvest(theta, omega) - self.cost
    }

    pub fn expected_harvest(&self) -> f64 {
        self.biomass_mean * self.mean_output
    }

    pub fn expected_profit(&self) -> f64 {
        self.expected_harvest() - self.cost
    }
}

impl ProductionSpec {
    pub fn single(mode: ProductionMode, alpha: f64, beta: f64, cost_coeff: f64) -> Self {
        ProductionSpec {
            mode,
            inputs: vec![InputSpec::new("x", alpha, beta, cost_coeff)],
            biomass_mean: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.inputs.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(ModelError::invalid(
                "inputs",
                "at least one input is required",
            ));
        }
        if !(self.biomass_mean > 0.0 && self.biomass_mean.is_finite()) {
            return Err(ModelError::invalid(
                "biomass_mean",
                format!("must be positive, got {}", self.biomass_mean),
            ));
        }
        for input in &self.inputs {
            if !(input.alpha > 0.0 && input.alpha <= 1.0) {
                return Err(ModelError::invalid(
                    "alpha",
                    format!("{}: must lie in (0, 1], got {}", input.name, input.alpha),
                ));
            }
            if !input.beta.is_finite() {
                return Err(ModelError::invalid(
                    "beta",
                    format!("{}: not finite", input.name),
                ));
            }
            if !(input.cost_coeff > 0.0 && input.cost_coeff.is_finite()) {
                return Err(ModelError::invalid(
                    "cost_coeff",
                    format!("{}: must be positive, got {}", input.name, input.cost_coeff),
                ));
            }
        }
        Ok(())
    }

    pub fn terms(&self, x: &[f64]) -> Result<ProductionTerms> {
        if x.len() != self.inputs.len() {
            return Err(ModelError::InputDimension {
                expected: self.inputs.len(),
                got: x.len(),
            });
        }
        let mut log_mean = 0.0;
        let mut log_risk = 0.0;
        let mut cost = 0.0;
        for (index, (&xi, input)) in x.iter().zip(&self.inputs).enumerate() {
            if !(xi > 0.0 && xi.is_finite()) {
                return Err(ModelError::NonPositiveInput { index, value: xi });
            }
            let ln = xi.ln();
            log_mean += input.alpha * ln;
            log_risk += input.beta * ln;
            cost += input.cost_coeff * xi * xi;
        }
        let risk_output = match self.mode {
            ProductionMode::Standard => 0.0,
            ProductionMode::Risky => log_risk.exp(),
        };
        Ok(ProductionTerms {
            mean_output: log_mean.exp(),
            risk_output,
            cost,
            biomass_mean: self.biomass_mean,
        })
    }

    /// Riskless optimum of `B f(x) - sum c_i x_i^2`.
    ///
    /// The first-order conditions give `x_i^2 = alpha_i B f(x) / (2 c_i)`,
    /// which has a unique interior solution when `sum alpha_i < 2`. Falls
    /// back to unit inputs otherwise.
    pub fn riskless_optimum(&self) -> Vec<f64> {
        let total_alpha: f64 = self.inputs.iter().map(|i| i.alpha).sum();
        if total_alpha >= 2.0 {
            return vec![1.0; self.inputs.len()];
        }
        let half_logs: Vec<f64> = self
            .inputs
            .iter()
            .map(|i| 0.5 * (i.alpha * self.biomass_mean / (2.0 * i.cost_coeff)).ln())
            .collect();
        let weighted: f64 = self
            .inputs
            .iter()
            .zip(&half_logs)
            .map(|(i, k)| i.alpha * k)
            .sum();
        let log_f = weighted / (1.0 - 0.5 * total_alpha);
        half_logs.iter().map(|k| (k + 0.5 * log_f).exp()).collect()
    }
}

pub fn harvest(spec: &ProductionSpec, x: &[f64], theta: f64, omega: f64) -> Result<f64> {
    Ok(spec.terms(x)?.harvest(theta, omega))
}

pub fn profit(spec: &ProductionSpec, x: &[f64], theta: f64, omega: f64) -> Result<f64> {
    Ok(spec.terms(x)?.profit(theta, omega))
}

/// Index variable and trigger of a contract whose payout is not yet set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractTemplate {
    pub index: ShockVariable,
    pub trigger: f64,
}

impl ContractTemplate {
    pub fn new(index: ShockVariable, trigger: f64) -> Self {
        ContractTemplate { index, trigger }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub index: ShockVariable,
    pub trigger: f64,
    /// Payout as a fraction of baseline expected profit, when the contract
    /// was resolved from one.
    pub gamma_frac: Option<f64>,
    pub gamma_abs: f64,
    pub premium_abs: f64,
}

impl Contract {
    pub fn none(template: ContractTemplate) -> Self {
        Contract {
            index: template.index,
            trigger: template.trigger,
            gamma_frac: Some(0.0),
            gamma_abs: 0.0,
            premium_abs: 0.0,
        }
    }

    /// Prices a payout given as a fraction of `baseline_profit`.
    pub fn resolve(
        template: ContractTemplate,
        gamma_frac: f64,
        baseline_profit: f64,
        shocks: &ShockSpec,
    ) -> Result<Self> {
        if !(gamma_frac >= 0.0 && gamma_frac.is_finite()) {
            return Err(ModelError::invalid(
                "gamma_frac",
                format!("must be >= 0, got {gamma_frac}"),
            ));
        }
        if gamma_frac == 0.0 {
            return Ok(Contract::none(template));
        }
        if !(baseline_profit > 0.0) {
            return Err(ModelError::NonPositiveBaselineProfit(baseline_profit));
        }
        let mut contract = price_contract(
            template.index,
            template.trigger,
            gamma_frac * baseline_profit,
            shocks,
        )?;
        contract.gamma_frac = Some(gamma_frac);
        Ok(contract)
    }

    /// The state in which the contract pays: index strictly below trigger.
    #[inline]
    pub fn is_bad_state(&self, index_value: f64) -> bool {
        index_value < self.trigger
    }
}

/// Actuarially fair pricing: premium = P(index < trigger) * payout.
pub fn price_contract(
    index: ShockVariable,
    trigger: f64,
    gamma_abs: f64,
    shocks: &ShockSpec,
) -> Result<Contract> {
    if !(gamma_abs >= 0.0 && gamma_abs.is_finite()) {
        return Err(ModelError::invalid(
            "gamma_abs",
            format!("must be >= 0, got {gamma_abs}"),
        ));
    }
    if !trigger.is_finite() {
        return Err(ModelError::invalid("trigger", "must be finite"));
    }
    let premium_abs = if gamma_abs == 0.0 {
        0.0
    } else {
        cdf_at(shocks, index, trigger)? * gamma_abs
    };
    Ok(Contract {
        index,
        trigger,
        gamma_frac: None,
        gamma_abs,
        premium_abs,
    })
}

/// Payout net of premium for one realization of the index.
#[inline]
pub fn net_transfer(contract: &Contract, index_value: f64) -> f64 {
    if contract.is_bad_state(index_value) {
        contract.gamma_abs - contract.premium_abs
    } else {
        -contract.premium_abs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preferences {
    pub risk_aversion: f64,
}

impl Preferences {
    pub fn new(risk_aversion: f64) -> Result<Self> {
        let prefs = Preferences { risk_aversion };
        prefs.validate()?;
        Ok(prefs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.risk_aversion > 0.0 && self.risk_aversion.is_finite() {
            Ok(())
        } else {
            Err(ModelError::invalid(
                "risk_aversion",
                format!("must be positive, got {}", self.risk_aversion),
            ))
        }
    }
}

/// `1 - exp(-a w)`, with the exponent capped at [`UTILITY_EXP_CAP`].
#[inline]
pub fn cara_utility(prefs: &Preferences, wealth: f64) -> f64 {
    1.0 - (-prefs.risk_aversion * wealth).min(UTILITY_EXP_CAP).exp()
}

/// Sure wealth with the same CARA utility: `-ln(1 - EU) / a`.
pub fn certainty_equivalent(prefs: &Preferences, expected_utility: f64) -> f64 {
    -(1.0 - expected_utility).ln() / prefs.risk_aversion
}
