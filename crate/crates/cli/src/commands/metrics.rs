use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sps_core::format::sig9;
use sps_core::metrics::{
    beta, coupling_from_field, efficiency_vs_kappa, free_space_gamma, optimal_kappa, optimal_kappa_numeric, purcell,
    purcell_from_lifetimes, DipoleParams,
};

use crate::config::Section;
use crate::error::CliError;
use crate::run::RunContext;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    pub g: f64,
    pub gamma: f64,
    #[serde(default = "default_kappa_min")]
    pub kappa_min: f64,
    #[serde(default = "default_kappa_max")]
    pub kappa_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Dipole length µ/e (nm); with `vacuum_field` adds field-derived g and γ.
    #[serde(default)]
    pub dipole_nm: Option<f64>,
    #[serde(default)]
    pub vacuum_field: Option<f64>,
    #[serde(default = "default_wavelength")]
    pub wavelength_nm: f64,
    #[serde(default = "default_medium_index")]
    pub medium_index: f64,
    /// Cavity decay used for the field-derived Purcell factor.
    #[serde(default)]
    pub kappa_for_field: Option<f64>,
    #[serde(default)]
    pub tau_on_ps: Option<f64>,
    #[serde(default)]
    pub tau_off_ps: Option<f64>,
}

fn default_kappa_min() -> f64 {
    1.0
}
fn default_kappa_max() -> f64 {
    100.0
}
fn default_points() -> usize {
    400
}
fn default_wavelength() -> f64 {
    920.0
}
fn default_medium_index() -> f64 {
    DipoleParams::DEFAULT_MEDIUM_INDEX
}

impl Section for MetricsConfig {
    const NAME: &'static str = "metrics";
    const REQUIRED: &'static [&'static str] = &["g", "gamma"];
}

#[derive(Serialize)]
struct FieldReport {
    g_ghz: f64,
    gamma_per_ns: f64,
    gamma_ghz: f64,
    purcell: Option<f64>,
}

#[derive(Serialize)]
struct MetricsReport {
    kappa_opt_ghz: f64,
    eta_opt: f64,
    kappa_opt_numeric_ghz: f64,
    curve_peak_kappa_ghz: f64,
    curve_peak_eta: f64,
    purcell_at_opt: f64,
    beta_at_opt: f64,
    field: Option<FieldReport>,
    purcell_from_lifetimes: Option<f64>,
}

pub fn run(cfg: &MetricsConfig, ctx: &mut RunContext) -> Result<(), CliError> {
    if !(cfg.kappa_max > cfg.kappa_min && cfg.kappa_min > 0.0) || cfg.points < 2 {
        return Err(CliError::Config(format!(
            "empty κ range: need 0 < kappa_min < kappa_max and points ≥ 2 (got [{}, {}], {})",
            cfg.kappa_min, cfg.kappa_max, cfg.points
        )));
    }
    let (k_opt, eta_opt) = optimal_kappa(cfg.g, cfg.gamma)?;
    let (k_num, _) = optimal_kappa_numeric(cfg.g, cfg.gamma, cfg.kappa_min, cfg.kappa_max)?;

    let mut csv = String::from("kappa_ghz,purcell,beta,efficiency\n");
    let mut peak = (0.0, f64::NEG_INFINITY);
    for k in 0..cfg.points {
        let kappa = cfg.kappa_min + (cfg.kappa_max - cfg.kappa_min) * k as f64 / (cfg.points - 1) as f64;
        let fp = purcell(cfg.g, kappa, cfg.gamma)?;
        let eta = efficiency_vs_kappa(cfg.g, cfg.gamma, kappa)?;
        if eta > peak.1 {
            peak = (kappa, eta);
        }
        let _ = writeln!(csv, "{},{},{},{}", sig9(kappa), sig9(fp), sig9(beta(fp)?), sig9(eta));
    }
    ctx.write("efficiency_vs_kappa.csv", csv.as_bytes())?;

    let field = match (cfg.dipole_nm, cfg.vacuum_field) {
        (Some(d), Some(e)) => {
            let p = DipoleParams {
                dipole_nm: d,
                vacuum_field: e,
                wavelength_nm: cfg.wavelength_nm,
                medium_index: cfg.medium_index,
            };
            let g = coupling_from_field(&p)?;
            let gamma = free_space_gamma(&p)?;
            let fp = cfg.kappa_for_field.map(|k| purcell(g, k, gamma.ghz)).transpose()?;
            Some(FieldReport { g_ghz: g, gamma_per_ns: gamma.per_ns, gamma_ghz: gamma.ghz, purcell: fp })
        }
        (None, None) => None,
        _ => return Err(CliError::Config("[metrics] dipole_nm and vacuum_field must be given together".into())),
    };
    let lifetimes = match (cfg.tau_on_ps, cfg.tau_off_ps) {
        (Some(on), Some(off)) => Some(purcell_from_lifetimes(on, off)?),
        (None, None) => None,
        _ => return Err(CliError::Config("[metrics] tau_on_ps and tau_off_ps must be given together".into())),
    };
    let fp_opt = purcell(cfg.g, k_opt, cfg.gamma)?;
    ctx.write_json(
        "metrics.json",
        &MetricsReport {
            kappa_opt_ghz: k_opt,
            eta_opt,
            kappa_opt_numeric_ghz: k_num,
            curve_peak_kappa_ghz: peak.0,
            curve_peak_eta: peak.1,
            purcell_at_opt: fp_opt,
            beta_at_opt: beta(fp_opt)?,
            field,
            purcell_from_lifetimes: lifetimes,
        },
    )
}
