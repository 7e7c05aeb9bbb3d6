//! Parameter sweeps for the single-input model and the three-input
//! Norwegian fleet calibrations.
//!
//! Every cell draws its own panel from a seed derived from the base seed and
//! the cell's economic parameters (not its contract), then solves the
//! no-insurance baseline and the joint input/coverage problem on that same
//! panel. Cells are independent, run in parallel, and are returned in a
//! canonical order regardless of completion order.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::economics::{
    ContractTemplate, InputSpec, Preferences, ProductionMode, ProductionSpec, DEFAULT_COST_COEFF,
};
use crate::error::{ModelError, Result};
use crate::optimizer::{DecisionProblem, OptimalChoice, OptimizerSettings};
use crate::stochastics::{sample_shocks_with, Dependence, PanelDesign, ShockSpec, ShockVariable};

/// Cost coefficient used for the Norwegian fleets.
pub const NORWEGIAN_COST_COEFF: f64 = 0.1;
/// Label used in the `fleet` column for single-input cells.
pub const SINGLE_INPUT_FLEET: &str = "single_input";
/// Largest tolerated share of failed cells in a sweep.
pub const MAX_FAILURE_RATE: f64 = 0.01;
pub const DEFAULT_HISTOGRAM_BINS: usize = 50;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("{failed} of {total} cells failed (limit {:.0}%)", MAX_FAILURE_RATE * 100.0)]
    TooManyFailures {
        failed: usize,
        total: usize,
        result: Box<SweepResult>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub risk_aversions: Vec<f64>,
    pub sigma_thetas: Vec<f64>,
    pub sigma_omegas: Vec<f64>,
    pub contract_index: ShockVariable,
    /// Triggers in units of the indexed shock's sigma.
    pub triggers: Vec<f64>,
    pub draws: usize,
    pub base_seed: u64,
    pub mode: ProductionMode,
    pub cost_coeff: f64,
    pub dependence: Dependence,
    pub design: PanelDesign,
    pub settings: OptimizerSettings,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            alphas: vec![0.25, 0.5, 0.75],
            betas: vec![-0.7, -0.5, -0.3, -0.1, 0.1, 0.3, 0.5, 0.7],
            risk_aversions: vec![1.0, 2.0, 3.0],
            sigma_thetas: vec![0.1, 0.2, 0.3, 0.4],
            sigma_omegas: vec![0.1, 0.2, 0.3, 0.4],
            contract_index: ShockVariable::Omega,
            triggers: vec![0.0],
            draws: 1000,
            base_seed: 20_240_601,
            mode: ProductionMode::Risky,
            cost_coeff: DEFAULT_COST_COEFF,
            dependence: Dependence::Independent,
            design: PanelDesign::Antithetic,
            settings: OptimizerSettings::default(),
        }
    }
}

impl SweepGrid {
    pub fn with_index(mut self, index: ShockVariable) -> Self {
        self.contract_index = index;
        self
    }

    /// Trigger values for the trigger comparative static, in sigma units.
    pub fn trigger_sweep() -> Vec<f64> {
        vec![-1.0, -0.5, 0.0, 0.5, 1.0]
    }

    pub fn cell_count(&self) -> usize {
        self.alphas.len()
            * self.betas.len()
            * self.risk_aversions.len()
            * self.sigma_thetas.len()
            * self.sigma_omegas.len()
            * self.triggers.len()
    }

    fn validate(&self) -> Result<()> {
        if self.draws == 0 {
            return Err(ModelError::EmptyPanel);
        }
        if self.cell_count() == 0 {
            return Err(ModelError::invalid(
                "grid",
                "every parameter set must be nonempty",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetCalibration {
    pub fleet: String,
    pub alpha_k: f64,
    pub alpha_l: f64,
    pub alpha_f: f64,
    pub beta_k: f64,
    pub beta_l: f64,
    pub beta_f: f64,
    pub cost_coeffs: [f64; 3],
    pub biomass_mean: f64,
}

impl FleetCalibration {
    fn preset(fleet: &str, alphas: [f64; 3], betas: [f64; 3]) -> Self {
        FleetCalibration {
            fleet: fleet.to_string(),
            alpha_k: alphas[0],
            alpha_l: alphas[1],
            alpha_f: alphas[2],
            beta_k: betas[0],
            beta_l: betas[1],
            beta_f: betas[2],
            cost_coeffs: [NORWEGIAN_COST_COEFF; 3],
            biomass_mean: 1.0,
        }
    }

    pub fn coastal_seiners() -> Self {
        Self::preset(
            "coastal_seiners",
            [0.294, 0.421, 0.457],
            [0.184, -0.432, 0.119],
        )
    }

    pub fn coastal_groundfish() -> Self {
        Self::preset(
            "coastal_groundfish",
            [0.463, 0.421, 0.355],
            [0.965, -0.080, 0.113],
        )
    }

    pub fn groundfish_trawlers() -> Self {
        Self::preset(
            "groundfish_trawlers",
            [0.210, 0.106, 0.531],
            [-2.788, -0.110, -0.024],
        )
    }

    pub fn presets() -> Vec<Self> {
        vec![
            Self::coastal_seiners(),
            Self::coastal_groundfish(),
            Self::groundfish_trawlers(),
        ]
    }

    pub fn by_name(name: &str) -> Option<Self> {
        Self::presets().into_iter().find(|f| f.fleet == name)
    }

    pub fn with_cost(mut self, cost: f64) -> Self {
        self.cost_coeffs = [cost; 3];
        self
    }

    /// Capital, labor, fuel.
    pub fn production(&self) -> ProductionSpec {
        let [ck, cl, cf] = self.cost_coeffs;
        ProductionSpec {
            mode: ProductionMode::Risky,
            inputs: vec![
                InputSpec::new("k", self.alpha_k, self.beta_k, ck),
                InputSpec::new("l", self.alpha_l, self.beta_l, cl),
                InputSpec::new("f", self.alpha_f, self.beta_f, cf),
            ],
            biomass_mean: self.biomass_mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NorwegianGrid {
    pub risk_aversions: Vec<f64>,
    pub sigma_thetas: Vec<f64>,
    pub sigma_omegas: Vec<f64>,
    pub contract_index: ShockVariable,
    /// Triggers in units of the indexed shock's sigma.
    pub triggers: Vec<f64>,
    pub draws: usize,
    pub base_seed: u64,
    pub design: PanelDesign,
    pub settings: OptimizerSettings,
    /// Replaces every fleet's (capital, labor, fuel) cost coefficients.
    pub cost_coeffs: Option<[f64; 3]>,
}

impl Default for NorwegianGrid {
    fn default() -> Self {
        let single = SweepGrid::default();
        NorwegianGrid {
            risk_aversions: single.risk_aversions,
            sigma_thetas: single.sigma_thetas,
            sigma_omegas: single.sigma_omegas,
            contract_index: ShockVariable::Omega,
            triggers: single.triggers,
            draws: single.draws,
            base_seed: single.base_seed,
            design: single.design,
            settings: single.settings,
            cost_coeffs: None,
        }
    }
}

impl NorwegianGrid {
    pub fn with_index(mut self, index: ShockVariable) -> Self {
        self.contract_index = index;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub fleet: String,
    pub index: ShockVariable,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub risk_aversion: f64,
    pub sigma_theta: f64,
    pub sigma_omega: f64,
    /// Trigger in units of the indexed shock's sigma.
    pub trigger: f64,
    pub seed: u64,
}

impl CellParams {
    /// Canonical ordering key.
    pub fn cmp_key(&self, other: &Self) -> Ordering {
        let opt = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (a, b) => a.is_some().cmp(&b.is_some()),
        };
        self.fleet
            .cmp(&other.fleet)
            .then(self.index.cmp(&other.index))
            .then(opt(self.alpha, other.alpha))
            .then(opt(self.beta, other.beta))
            .then(self.risk_aversion.total_cmp(&other.risk_aversion))
            .then(self.sigma_theta.total_cmp(&other.sigma_theta))
            .then(self.sigma_omega.total_cmp(&other.sigma_omega))
            .then(self.trigger.total_cmp(&other.trigger))
    }

    pub fn absolute_trigger(&self) -> f64 {
        let sigma = match self.index {
            ShockVariable::Theta => self.sigma_theta,
            ShockVariable::Omega => self.sigma_omega,
        };
        self.trigger * sigma
    }
}

/// Panel seed from the base seed and the cell's economic parameters. The
/// contract (index, trigger) is left out so every contract on the same
/// environment faces the same shocks.
pub fn cell_seed(
    base_seed: u64,
    fleet: &str,
    alpha: Option<f64>,
    beta: Option<f64>,
    risk_aversion: f64,
    sigma_theta: f64,
    sigma_omega: f64,
) -> u64 {
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_else(|| "-".into());
    let key = format!(
        "{base_seed}|{fleet}|{}|{}|{risk_aversion:?}|{sigma_theta:?}|{sigma_omega:?}",
        fmt(alpha),
        fmt(beta)
    );
    let digest = Sha256::digest(key.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub cell: CellParams,
    pub input_names: Vec<String>,
    pub baseline_inputs: Vec<f64>,
    pub baseline_profit: f64,
    pub baseline_harvest: f64,
    pub baseline_utility: f64,
    pub insured_inputs: Vec<f64>,
    pub insured_profit: f64,
    pub insured_harvest: f64,
    pub insured_utility: f64,
    pub gamma_star: f64,
    pub pct_change_inputs: Vec<f64>,
    pub pct_change_harvest: f64,
    /// Certainty-equivalent gain as a percent of baseline expected profit.
    pub utility_gain_pct: f64,
    pub converged: bool,
    pub failure: Option<String>,
}

impl SweepRecord {
    fn failed(cell: CellParams, input_names: Vec<String>, reason: String) -> Self {
        let d = input_names.len();
        SweepRecord {
            cell,
            input_names,
            baseline_inputs: vec![f64::NAN; d],
            baseline_profit: f64::NAN,
            baseline_harvest: f64::NAN,
            baseline_utility: f64::NAN,
            insured_inputs: vec![f64::NAN; d],
            insured_profit: f64::NAN,
            insured_harvest: f64::NAN,
            insured_utility: f64::NAN,
            gamma_star: f64::NAN,
            pct_change_inputs: vec![f64::NAN; d],
            pct_change_harvest: f64::NAN,
            utility_gain_pct: f64::NAN,
            converged: false,
            failure: Some(reason),
        }
    }

    fn from_solutions(
        cell: CellParams,
        input_names: Vec<String>,
        prefs: &Preferences,
        base: &OptimalChoice,
        insured: &OptimalChoice,
    ) -> Self {
        let pct = |new: f64, old: f64| (new / old - 1.0) * 100.0;
        let ce_base = base.certainty_equivalent(prefs);
        let ce_ins = insured.certainty_equivalent(prefs);
        let converged = base.converged && insured.converged;
        SweepRecord {
            cell,
            input_names,
            pct_change_inputs: insured
                .inputs
                .iter()
                .zip(&base.inputs)
                .map(|(n, o)| pct(*n, *o))
                .collect(),
            pct_change_harvest: pct(insured.expected_harvest, base.expected_harvest),
            utility_gain_pct: (ce_ins - ce_base) / base.expected_profit * 100.0,
            baseline_inputs: base.inputs.clone(),
            baseline_profit: base.expected_profit,
            baseline_harvest: base.expected_harvest,
            baseline_utility: base.expected_utility,
            insured_inputs: insured.inputs.clone(),
            insured_profit: insured.expected_profit,
            insured_harvest: insured.expected_harvest,
            insured_utility: insured.expected_utility,
            gamma_star: insured.gamma_frac,
            converged,
            failure: (!converged).then(|| "optimizer did not pass the local check".to_string()),
        }
    }

    /// Percent change of the single input; NaN for multi-input records.
    pub fn pct_change_input(&self) -> f64 {
        match self.pct_change_inputs.as_slice() {
            [only] => *only,
            _ => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
    pub failed: usize,
}

impl SweepResult {
    pub fn converged(&self) -> impl Iterator<Item = &SweepRecord> {
        self.records.iter().filter(|r| r.converged)
    }

    pub fn failure_rate(&self) -> f64 {
        if self.records.is_empty() {
            0.0
        } else {
            self.failed as f64 / self.records.len() as f64
        }
    }

    fn from_records(mut records: Vec<SweepRecord>) -> std::result::Result<Self, SweepError> {
        records.sort_by(|a, b| a.cell.cmp_key(&b.cell));
        let failed = records.iter().filter(|r| !r.converged).count();
        let total = records.len();
        let result = SweepResult { records, failed };
        if result.failure_rate() > MAX_FAILURE_RATE {
            return Err(SweepError::TooManyFailures {
                failed,
                total,
                result: Box::new(result),
            });
        }
        Ok(result)
    }
}

/// One environment plus contract, fully specified.
#[derive(Debug, Clone)]
pub struct CellProblem {
    pub cell: CellParams,
    pub production: ProductionSpec,
    pub shocks: ShockSpec,
    pub prefs: Preferences,
    pub draws: usize,
    pub design: PanelDesign,
    pub settings: OptimizerSettings,
}

impl CellProblem {
    pub fn decision_problem(&self) -> Result<DecisionProblem> {
        let panel = sample_shocks_with(&self.shocks, self.draws, self.cell.seed, self.design)?;
        let contract = ContractTemplate::new(self.cell.index, self.cell.absolute_trigger());
        DecisionProblem::new(
            self.production.clone(),
            self.shocks,
            panel,
            self.prefs,
            contract,
        )?
        .with_settings(self.settings)
    }

    /// Baseline and joint solve on one panel.
    pub fn solve(&self) -> SweepRecord {
        let names: Vec<String> = self
            .production
            .inputs
            .iter()
            .map(|i| i.name.clone())
            .collect();
        let outcome = self.decision_problem().and_then(|problem| {
            let base = problem.baseline()?;
            let insured = problem.optimize_inputs_and_coverage_from(&base)?;
            Ok((base, insured))
        });
        match outcome {
            Ok((base, insured)) => {
                SweepRecord::from_solutions(self.cell.clone(), names, &self.prefs, &base, &insured)
            }
            Err(e) => SweepRecord::failed(self.cell.clone(), names, e.to_string()),
        }
    }
}

/// Enumerates the single-input grid in canonical order.
pub fn single_input_cells(grid: &SweepGrid) -> Result<Vec<CellProblem>> {
    grid.validate()?;
    let mut cells = Vec::with_capacity(grid.cell_count());
    for &alpha in &grid.alphas {
        for &beta in &grid.betas {
            for &a in &grid.risk_aversions {
                for &st in &grid.sigma_thetas {
                    for &so in &grid.sigma_omegas {
                        for &trigger in &grid.triggers {
                            let seed = cell_seed(
                                grid.base_seed,
                                SINGLE_INPUT_FLEET,
                                Some(alpha),
                                Some(beta),
                                a,
                                st,
                                so,
                            );
                            let shocks = ShockSpec {
                                dependence: grid.dependence,
                                ..ShockSpec::independent(st, so)
                            };
                            cells.push(CellProblem {
                                cell: CellParams {
                                    fleet: SINGLE_INPUT_FLEET.to_string(),
                                    index: grid.contract_index,
                                    alpha: Some(alpha),
                                    beta: Some(beta),
                                    risk_aversion: a,
                                    sigma_theta: st,
                                    sigma_omega: so,
                                    trigger,
                                    seed,
                                },
                                production: ProductionSpec::single(
                                    grid.mode,
                                    alpha,
                                    beta,
                                    grid.cost_coeff,
                                ),
                                shocks,
                                prefs: Preferences::new(a)?,
                                draws: grid.draws,
                                design: grid.design,
                                settings: grid.settings,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(cells)
}

pub fn norwegian_cells(
    calibration: &FleetCalibration,
    grid: &NorwegianGrid,
) -> Result<Vec<CellProblem>> {
    if grid.draws == 0 {
        return Err(ModelError::EmptyPanel);
    }
    let production = match grid.cost_coeffs {
        Some(cost_coeffs) => FleetCalibration {
            cost_coeffs,
            ..calibration.clone()
        }
        .production(),
        None => calibration.production(),
    };
    production.validate()?;
    let mut cells = Vec::new();
    for &a in &grid.risk_aversions {
        for &st in &grid.sigma_thetas {
            for &so in &grid.sigma_omegas {
                for &trigger in &grid.triggers {
                    let seed = cell_seed(grid.base_seed, &calibration.fleet, None, None, a, st, so);
                    cells.push(CellProblem {
                        cell: CellParams {
                            fleet: calibration.fleet.clone(),
                            index: grid.contract_index,
                            alpha: None,
                            beta: None,
                            risk_aversion: a,
                            sigma_theta: st,
                            sigma_omega: so,
                            trigger,
                            seed,
                        },
                        production: production.clone(),
                        shocks: ShockSpec::independent(st, so),
                        prefs: Preferences::new(a)?,
                        draws: grid.draws,
                        design: grid.design,
                        settings: grid.settings,
                    });
                }
            }
        }
    }
    if cells.is_empty() {
        return Err(ModelError::invalid(
            "grid",
            "every parameter set must be nonempty",
        ));
    }
    Ok(cells)
}

/// Solves cells in parallel on the current rayon pool.
pub fn run_cells(cells: &[CellProblem]) -> std::result::Result<SweepResult, SweepError> {
    let records: Vec<SweepRecord> = cells.par_iter().map(CellProblem::solve).collect();
    SweepResult::from_records(records)
}

pub fn run_single_input_sweep(grid: &SweepGrid) -> std::result::Result<SweepResult, SweepError> {
    run_cells(&single_input_cells(grid)?)
}

pub fn run_norwegian(
    calibration: &FleetCalibration,
    grid: &NorwegianGrid,
) -> std::result::Result<SweepResult, SweepError> {
    run_cells(&norwegian_cells(calibration, grid)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    Fleet,
    Index,
    Alpha,
    Beta,
    BetaSign,
    RiskAversion,
    SigmaTheta,
    SigmaOmega,
    Trigger,
}

impl GroupKey {
    pub fn name(self) -> &'static str {
        match self {
            GroupKey::Fleet => "fleet",
            GroupKey::Index => "index",
            GroupKey::Alpha => "alpha",
            GroupKey::Beta => "beta",
            GroupKey::BetaSign => "beta_sign",
            GroupKey::RiskAversion => "risk_aversion",
            GroupKey::SigmaTheta => "sigma_theta",
            GroupKey::SigmaOmega => "sigma_omega",
            GroupKey::Trigger => "trigger",
        }
    }

    fn value(self, cell: &CellParams) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "-".into());
        match self {
            GroupKey::Fleet => cell.fleet.clone(),
            GroupKey::Index => cell.index.to_string(),
            GroupKey::Alpha => opt(cell.alpha),
            GroupKey::Beta => opt(cell.beta),
            GroupKey::BetaSign => match cell.beta {
                Some(b) if b > 0.0 => "positive".into(),
                Some(b) if b < 0.0 => "negative".into(),
                Some(_) => "zero".into(),
                None => "-".into(),
            },
            GroupKey::RiskAversion => cell.risk_aversion.to_string(),
            GroupKey::SigmaTheta => cell.sigma_theta.to_string(),
            GroupKey::SigmaOmega => cell.sigma_omega.to_string(),
            GroupKey::Trigger => cell.trigger.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lower: f64,
    pub upper: f64,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub count: usize,
    pub mean: f64,
    pub mean_abs: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub histogram: Histogram,
}

impl FieldSummary {
    pub fn of(values: &[f64], bins: usize) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let (min, max) = (sorted[0], sorted[n - 1]);
        let bins = bins.max(1);
        let mut counts = vec![0usize; bins];
        let width = (max - min) / bins as f64;
        for v in &sorted {
            let bin = if width > 0.0 {
                (((v - min) / width) as usize).min(bins - 1)
            } else {
                0
            };
            counts[bin] += 1;
        }
        Some(FieldSummary {
            count: n,
            mean: sorted.iter().sum::<f64>() / n as f64,
            mean_abs: sorted.iter().map(|v| v.abs()).sum::<f64>() / n as f64,
            median,
            min,
            max,
            histogram: Histogram {
                lower: min,
                upper: max,
                counts,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub group: Vec<(String, String)>,
    pub field: String,
    pub summary: FieldSummary,
}

fn summary_fields(record: &SweepRecord) -> Vec<(String, f64)> {
    let mut fields: Vec<(String, f64)> = record
        .input_names
        .iter()
        .zip(&record.pct_change_inputs)
        .map(|(name, v)| (format!("pct_change_{name}"), *v))
        .collect();
    fields.push(("pct_change_harvest".into(), record.pct_change_harvest));
    fields.push(("utility_gain_pct".into(), record.utility_gain_pct));
    fields.push(("gamma_star".into(), record.gamma_star));
    fields
}

/// Summaries of every percent-change field per group. Failed cells are
/// skipped; groups left with no converged cells are omitted with a warning.
pub fn summarize(records: &[SweepRecord], group_by: &[GroupKey]) -> Vec<SummaryRow> {
    summarize_with_bins(records, group_by, DEFAULT_HISTOGRAM_BINS)
}

pub fn summarize_with_bins(
    records: &[SweepRecord],
    group_by: &[GroupKey],
    bins: usize,
) -> Vec<SummaryRow> {
    type Key = Vec<(String, String)>;
    let mut groups: BTreeMap<Key, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for record in records {
        let key: Key = group_by
            .iter()
            .map(|g| (g.name().to_string(), g.value(&record.cell)))
            .collect();
        let fields = groups.entry(key).or_default();
        if !record.converged {
            continue;
        }
        for (name, v) in summary_fields(record) {
            if v.is_finite() {
                fields.entry(name).or_default().push(v);
            }
        }
    }
    let mut rows = Vec::new();
    for (group, fields) in groups {
        if fields.is_empty() {
            log::warn!("group {group:?} has no converged cells; omitted from summary");
            continue;
        }
        for (field, values) in fields {
            if let Some(summary) = FieldSummary::of(&values, bins) {
                rows.push(SummaryRow {
                    group: group.clone(),
                    field,
                    summary,
                });
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake(beta: f64, value: f64, converged: bool) -> SweepRecord {
        let cell = CellParams {
            fleet: SINGLE_INPUT_FLEET.into(),
            index: ShockVariable::Omega,
            alpha: Some(0.5),
            beta: Some(beta),
            risk_aversion: 1.0,
            sigma_theta: 0.1,
            sigma_omega: 0.1,
            trigger: 0.0,
            seed: 0,
        };
        let mut r = SweepRecord::failed(cell, vec!["x".into()], String::new());
        r.pct_change_inputs = vec![value];
        r.pct_change_harvest = value / 2.0;
        r.utility_gain_pct = 1.0;
        r.gamma_star = 0.5;
        r.converged = converged;
        r
    }

    #[test]
    fn default_grid_matches_published_sets() {
        let g = SweepGrid::default();
        assert_eq!(g.alphas, [0.25, 0.5, 0.75]);
        assert_eq!(g.betas, [-0.7, -0.5, -0.3, -0.1, 0.1, 0.3, 0.5, 0.7]);
        assert_eq!(g.risk_aversions, [1.0, 2.0, 3.0]);
        assert_eq!(g.sigma_thetas, [0.1, 0.2, 0.3, 0.4]);
        assert_eq!(g.sigma_omegas, [0.1, 0.2, 0.3, 0.4]);
        assert_eq!(g.triggers, [0.0]);
        assert_eq!(g.draws, 1000);
        assert_eq!(g.cell_count(), 1152);
    }

    #[test]
    fn presets_match_published_elasticities() {
        let s = FleetCalibration::coastal_seiners();
        assert_eq!(
            [s.alpha_k, s.alpha_l, s.alpha_f, s.beta_k, s.beta_l, s.beta_f],
            [0.294, 0.421, 0.457, 0.184, -0.432, 0.119]
        );
        let g = FleetCalibration::coastal_groundfish();
        assert_eq!(
            [g.alpha_k, g.alpha_l, g.alpha_f, g.beta_k, g.beta_l, g.beta_f],
            [0.463, 0.421, 0.355, 0.965, -0.080, 0.113]
        );
        let t = FleetCalibration::groundfish_trawlers();
        assert_eq!(
            [t.alpha_k, t.alpha_l, t.alpha_f, t.beta_k, t.beta_l, t.beta_f],
            [0.210, 0.106, 0.531, -2.788, -0.110, -0.024]
        );
        assert!(FleetCalibration::presets()
            .iter()
            .all(|f| f.biomass_mean == 1.0));
    }

    #[test]
    fn cell_seed_is_stable_and_contract_free() {
        let a = cell_seed(7, "single_input", Some(0.5), Some(-0.1), 1.0, 0.2, 0.3);
        assert_eq!(
            a,
            cell_seed(7, "single_input", Some(0.5), Some(-0.1), 1.0, 0.2, 0.3)
        );
        assert_ne!(
            a,
            cell_seed(8, "single_input", Some(0.5), Some(-0.1), 1.0, 0.2, 0.3)
        );
        assert_ne!(
            a,
            cell_seed(7, "single_input", Some(0.5), Some(0.1), 1.0, 0.2, 0.3)
        );
        let grid = SweepGrid {
            alphas: vec![0.5],
            betas: vec![0.3],
            risk_aversions: vec![2.0],
            sigma_thetas: vec![0.2],
            sigma_omegas: vec![0.2],
            ..SweepGrid::default()
        };
        let w = single_input_cells(&grid).unwrap();
        let t = single_input_cells(&grid.clone().with_index(ShockVariable::Theta)).unwrap();
        assert_eq!(w[0].cell.seed, t[0].cell.seed);
    }

    #[test]
    fn summary_of_single_record() {
        let rows = summarize(&[fake(0.1, 3.5, true)], &[GroupKey::Alpha]);
        let row = rows.iter().find(|r| r.field == "pct_change_x").unwrap();
        assert_eq!(row.summary.median, 3.5);
        assert_eq!(row.summary.count, 1);
        assert_eq!(row.summary.histogram.counts.iter().sum::<usize>(), 1);
    }

    #[test]
    fn summary_of_three_records() {
        let records = [
            fake(0.1, -1.0, true),
            fake(0.1, 0.0, true),
            fake(0.1, 1.0, true),
        ];
        let rows = summarize(&records, &[]);
        let s = &rows
            .iter()
            .find(|r| r.field == "pct_change_x")
            .unwrap()
            .summary;
        assert_eq!((s.median, s.min, s.max, s.mean), (0.0, -1.0, 1.0, 0.0));
        assert_eq!(s.histogram.counts.len(), DEFAULT_HISTOGRAM_BINS);
        assert_eq!(s.histogram.counts[0], 1);
        assert_eq!(s.histogram.counts[DEFAULT_HISTOGRAM_BINS - 1], 1);
    }

    #[test]
    fn summary_groups_and_skips_failures() {
        let records = [
            fake(0.1, 4.0, true),
            fake(-0.1, -2.0, true),
            fake(-0.3, 9.0, false),
        ];
        let rows = summarize(&records, &[GroupKey::BetaSign]);
        let value = |sign: &str| {
            rows.iter()
                .find(|r| r.field == "pct_change_x" && r.group[0].1 == sign)
                .map(|r| r.summary.mean)
        };
        assert_eq!(value("positive"), Some(4.0));
        assert_eq!(value("negative"), Some(-2.0));
        // a group whose only cell failed is omitted
        let rows = summarize(&records, &[GroupKey::Beta]);
        assert!(rows.iter().all(|r| r.group[0].1 != "-0.3"));
    }

    #[test]
    fn failure_limit() {
        let mut records: Vec<SweepRecord> = (0..99).map(|i| fake(0.1, i as f64, true)).collect();
        records.push(fake(0.1, 0.0, false));
        let ok = SweepResult::from_records(records.clone()).unwrap();
        assert_eq!(ok.failed, 1);
        records.push(fake(0.1, 0.0, false));
        assert!(matches!(
            SweepResult::from_records(records),
            Err(SweepError::TooManyFailures {
                failed: 2,
                total: 101,
                ..
            })
        ));
    }
}
