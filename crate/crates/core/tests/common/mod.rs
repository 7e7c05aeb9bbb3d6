//! Independent oracles shared by the integration tests. Everything here is
//! written from the model equations directly, without the library's
//! evaluation code.
#![allow(dead_code)]

use indexfish::stochastics::{ShockPanel, ShockVariable};

#[derive(Debug, Clone, Copy)]
pub struct Single {
    pub alpha: f64,
    pub beta: f64,
    pub cost: f64,
    pub risky: bool,
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

impl Single {
    pub fn profit(&self, x: f64, theta: f64, omega: f64) -> f64 {
        let risk = if self.risky {
            omega * x.powf(self.beta)
        } else {
            0.0
        };
        x.powf(self.alpha) * (1.0 + theta) + risk - self.cost * x * x
    }

    /// d profit / dx, draw by draw.
    pub fn marginal_profit(&self, x: f64, theta: f64, omega: f64) -> f64 {
        let risk = if self.risky {
            self.beta * x.powf(self.beta - 1.0) * omega
        } else {
            0.0
        };
        self.alpha * x.powf(self.alpha - 1.0) * (1.0 + theta) + risk - 2.0 * self.cost * x
    }
}

/// Contract on `index` paying `gamma_abs` when the index is strictly below
/// `trigger`, at premium `P(index < trigger) * gamma_abs` under a normal
/// law with standard deviation `sigma_index`.
#[derive(Debug, Clone, Copy)]
pub struct Cover {
    pub index: ShockVariable,
    pub trigger: f64,
    pub gamma_abs: f64,
    pub sigma_index: f64,
}

impl Cover {
    pub fn none() -> Self {
        Cover {
            index: ShockVariable::Omega,
            trigger: 0.0,
            gamma_abs: 0.0,
            sigma_index: 1.0,
        }
    }

    pub fn transfer(&self, theta: f64, omega: f64) -> f64 {
        if self.gamma_abs == 0.0 {
            return 0.0;
        }
        let premium = std_normal_cdf(self.trigger / self.sigma_index) * self.gamma_abs;
        let v = match self.index {
            ShockVariable::Theta => theta,
            ShockVariable::Omega => omega,
        };
        if v < self.trigger {
            self.gamma_abs - premium
        } else {
            -premium
        }
    }
}

pub fn naive_eu(model: &Single, x: f64, a: f64, cover: &Cover, panel: &ShockPanel) -> f64 {
    let mut total = 0.0;
    for d in panel.draws() {
        let w = model.profit(x, d.theta, d.omega) + cover.transfer(d.theta, d.omega);
        total += 1.0 - (-a * w).exp();
    }
    total / panel.len() as f64
}

/// Best point on a uniform grid `lo, lo + step, ...` up to `hi`.
pub fn grid_argmax(
    model: &Single,
    a: f64,
    cover: &Cover,
    panel: &ShockPanel,
    lo: f64,
    hi: f64,
    step: f64,
) -> f64 {
    let n = ((hi - lo) / step).round() as usize;
    let mut best = (f64::NEG_INFINITY, lo);
    for i in 0..=n {
        let x = lo + i as f64 * step;
        let v = naive_eu(model, x, a, cover, panel);
        if v > best.0 {
            best = (v, x);
        }
    }
    best.1
}

/// Deterministic single-input optimum with unit mean biomass.
pub fn closed_form_optimum(alpha: f64, cost: f64) -> f64 {
    (alpha / (2.0 * cost)).powf(1.0 / (2.0 - alpha))
}
