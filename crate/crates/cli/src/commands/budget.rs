use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sps_core::metrics::{efficiency_budget, BUDGET_FACTORS};

use crate::config::Section;
use crate::error::CliError;
use crate::run::RunContext;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub pi_prep: f64,
    pub beta_h: f64,
    pub extraction: f64,
    pub eta_optics: f64,
}

impl Section for BudgetConfig {
    const NAME: &'static str = "budget";
    const REQUIRED: &'static [&'static str] = &["pi_prep", "beta_h", "extraction", "eta_optics"];
}

#[derive(Serialize)]
struct BudgetReport {
    sigma: f64,
    factors: BTreeMap<&'static str, f64>,
    /// ∂Σ/∂factor.
    sensitivities: BTreeMap<&'static str, f64>,
}

pub fn run(cfg: &BudgetConfig, ctx: &mut RunContext) -> Result<(), CliError> {
    let b = efficiency_budget(cfg.pi_prep, cfg.beta_h, cfg.extraction, cfg.eta_optics)?;
    let values = [b.pi_prep, b.beta_h, b.extraction, b.eta_optics];
    ctx.write_json(
        "budget.json",
        &BudgetReport {
            sigma: b.sigma,
            factors: BUDGET_FACTORS.iter().copied().zip(values).collect(),
            sensitivities: BUDGET_FACTORS.iter().copied().zip(b.sensitivities).collect(),
        },
    )
}
