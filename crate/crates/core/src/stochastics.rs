//! Stock (`theta`) and extraction (`omega`) shocks.
//!
//! Both shocks are zero-mean normals. Panels are drawn from a ChaCha8
//! generator seeded once per panel, with one stream per variable:
//! stream 1 feeds `theta`, stream 2 feeds `omega`. Changing one sigma
//! therefore never changes the other variable's draws, so variants of a
//! problem can be compared on common random numbers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

const THETA_STREAM: u64 = 1;
const OMEGA_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Dependence {
    #[default]
    Independent,
    PerfectlyCorrelated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[default]
    Normal,
}

/// Which shock a contract or query refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockVariable {
    Theta,
    Omega,
}

impl ShockVariable {
    pub fn name(self) -> &'static str {
        match self {
            ShockVariable::Theta => "theta",
            ShockVariable::Omega => "omega",
        }
    }
}

impl std::fmt::Display for ShockVariable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ShockVariable {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "theta" => Ok(ShockVariable::Theta),
            "omega" => Ok(ShockVariable::Omega),
            other => Err(format!(
                "unknown shock variable `{other}` (expected theta|omega)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Below,
    Above,
}

/// How the panel's draws are laid out.
///
/// `Antithetic` reflects each base draw through zero in every independent
/// coordinate (`(u, v), (-u, v), (u, -v), (-u, -v)`; `(z), (-z)` under
/// perfect correlation). Sample means and the sample cross moments of odd
/// order are then exactly zero whenever `n` is a multiple of four, and a
/// trigger at zero splits the panel exactly in half, so the fair premium
/// is also fair in-sample. `Plain` takes every draw fresh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PanelDesign {
    #[default]
    Antithetic,
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShockSpec {
    pub sigma_theta: f64,
    pub sigma_omega: f64,
    #[serde(default)]
    pub dependence: Dependence,
    #[serde(default)]
    pub family: Family,
}

impl ShockSpec {
    pub fn independent(sigma_theta: f64, sigma_omega: f64) -> Self {
        ShockSpec {
            sigma_theta,
            sigma_omega,
            dependence: Dependence::Independent,
            family: Family::Normal,
        }
    }

    pub fn perfectly_correlated(sigma_theta: f64, sigma_omega: f64) -> Self {
        ShockSpec {
            dependence: Dependence::PerfectlyCorrelated,
            ..Self::independent(sigma_theta, sigma_omega)
        }
    }

    pub fn sigma(&self, variable: ShockVariable) -> f64 {
        match variable {
            ShockVariable::Theta => self.sigma_theta,
            ShockVariable::Omega => self.sigma_omega,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, s) in [
            ("sigma_theta", self.sigma_theta),
            ("sigma_omega", self.sigma_omega),
        ] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(ModelError::invalid(
                    name,
                    format!("must be finite and >= 0, got {s}"),
                ));
            }
        }
        if self.dependence == Dependence::PerfectlyCorrelated
            && self.sigma_omega == 0.0
            && self.sigma_theta > 0.0
        {
            return Err(ModelError::UndefinedCorrelationScale);
        }
        Ok(())
    }

    fn positive_sigma(&self, variable: ShockVariable) -> Result<f64> {
        let sigma = self.sigma(variable);
        if sigma > 0.0 && sigma.is_finite() {
            Ok(sigma)
        } else {
            Err(ModelError::DegenerateVariable {
                variable: variable.name(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShockDraw {
    pub theta: f64,
    pub omega: f64,
}

impl ShockDraw {
    #[inline]
    pub fn get(&self, variable: ShockVariable) -> f64 {
        match variable {
            ShockVariable::Theta => self.theta,
            ShockVariable::Omega => self.omega,
        }
    }
}

/// An immutable sample of joint shocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockPanel {
    spec: ShockSpec,
    design: PanelDesign,
    seed: u64,
    draws: Vec<ShockDraw>,
}

impl ShockPanel {
    pub fn spec(&self) -> &ShockSpec {
        &self.spec
    }

    pub fn design(&self) -> PanelDesign {
        self.design
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn draws(&self) -> &[ShockDraw] {
        &self.draws
    }

    pub fn values(&self, variable: ShockVariable) -> impl Iterator<Item = f64> + '_ {
        self.draws.iter().map(move |d| d.get(variable))
    }
}

/// Draws `n` joint shocks with the default antithetic layout.
pub fn sample_shocks(spec: &ShockSpec, n: usize, seed: u64) -> Result<ShockPanel> {
    sample_shocks_with(spec, n, seed, PanelDesign::default())
}

pub fn sample_shocks_with(
    spec: &ShockSpec,
    n: usize,
    seed: u64,
    design: PanelDesign,
) -> Result<ShockPanel> {
    if n == 0 {
        return Err(ModelError::EmptyPanel);
    }
    spec.validate()?;

    let mut theta_rng = ChaCha8Rng::seed_from_u64(seed);
    theta_rng.set_stream(THETA_STREAM);
    let mut omega_rng = ChaCha8Rng::seed_from_u64(seed);
    omega_rng.set_stream(OMEGA_STREAM);

    let (st, so) = (spec.sigma_theta, spec.sigma_omega);
    let mut draws = Vec::with_capacity(n + 3);
    match (spec.dependence, design) {
        (Dependence::Independent, PanelDesign::Plain) => {
            for _ in 0..n {
                let u: f64 = theta_rng.sample(StandardNormal);
                let v: f64 = omega_rng.sample(StandardNormal);
                draws.push(ShockDraw {
                    theta: st * u,
                    omega: so * v,
                });
            }
        }
        (Dependence::Independent, PanelDesign::Antithetic) => {
            while draws.len() < n {
                let u: f64 = theta_rng.sample(StandardNormal);
                let v: f64 = omega_rng.sample(StandardNormal);
                for (su, sv) in [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
                    draws.push(ShockDraw {
                        theta: st * su * u,
                        omega: so * sv * v,
                    });
                }
            }
        }
        (Dependence::PerfectlyCorrelated, design) => {
            // theta is an exact rescaling of omega's underlying draw
            while draws.len() < n {
                let z: f64 = omega_rng.sample(StandardNormal);
                draws.push(ShockDraw {
                    theta: st * z,
                    omega: so * z,
                });
                if design == PanelDesign::Antithetic {
                    draws.push(ShockDraw {
                        theta: -st * z,
                        omega: -so * z,
                    });
                }
            }
        }
    }
    draws.truncate(n);

    Ok(ShockPanel {
        spec: *spec,
        design,
        seed,
        draws,
    })
}

pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

fn std_normal_sf(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Analytic CDF of the selected zero-mean normal shock.
pub fn cdf_at(spec: &ShockSpec, variable: ShockVariable, value: f64) -> Result<f64> {
    let sigma = spec.positive_sigma(variable)?;
    Ok(std_normal_cdf(value / sigma))
}

/// Truncated-normal mean `E[v | v < trigger]` or `E[v | v > trigger]`.
pub fn conditional_mean(
    spec: &ShockSpec,
    variable: ShockVariable,
    side: Side,
    trigger: f64,
) -> Result<f64> {
    let sigma = spec.positive_sigma(variable)?;
    let z = trigger / sigma;
    let lower = std_normal_cdf(z);
    let upper = std_normal_sf(z);
    if lower <= 0.0 || lower >= 1.0 || upper <= 0.0 {
        return Err(ModelError::DegenerateTrigger {
            variable: variable.name(),
            trigger,
            cdf: lower,
        });
    }
    let density = std_normal_pdf(z);
    Ok(match side {
        Side::Below => -sigma * density / lower,
        Side::Above => sigma * density / upper,
    })
}
