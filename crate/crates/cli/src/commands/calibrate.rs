use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sps_core::format::sig9;
use sps_core::metrics::{fit_decay_vs_detuning, purcell_from_lifetimes, read_decay_csv, DecayFit};
use sps_core::stats::{
    detector_correction, photon_flux, predicted_count_rate, system_efficiency, DetectorModel, SystemEfficiency,
};

use crate::config::{Section, Source};
use crate::error::CliError;
use crate::run::RunContext;

/// Detector calibration, count-rate ↔ efficiency conversion and the
/// decay-rate fit that yields β for the collected mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    #[serde(default = "default_eff")]
    pub detector_efficiency: f64,
    #[serde(default = "default_eff_unc")]
    pub detector_efficiency_uncertainty: f64,
    #[serde(default = "default_linear_rate")]
    pub linear_rate_hz: f64,
    #[serde(default = "default_cal_rate")]
    pub calibrated_rate_hz: f64,
    #[serde(default = "default_cal_factor")]
    pub calibrated_factor: f64,
    pub rep_rate_hz: f64,
    pub attenuation: f64,
    /// Measured detector count rate → Σ.
    #[serde(default)]
    pub count_rate_hz: Option<f64>,
    /// Target Σ → predicted count rate.
    #[serde(default)]
    pub target_sigma: Option<f64>,
    /// Optical power and frequency → photon flux.
    #[serde(default)]
    pub power_w: Option<f64>,
    #[serde(default)]
    pub frequency_hz: Option<f64>,
    /// CSV `detuning_ghz,rate_ghz` for the two-mode decay fit.
    #[serde(default)]
    pub decay_rates: Option<PathBuf>,
    #[serde(default)]
    pub tau_on_ps: Option<f64>,
    #[serde(default)]
    pub tau_off_ps: Option<f64>,
    #[serde(default = "default_table_points")]
    pub table_points: usize,
}

fn default_eff() -> f64 {
    DetectorModel::default().efficiency
}
fn default_eff_unc() -> f64 {
    DetectorModel::default().efficiency_uncertainty
}
fn default_linear_rate() -> f64 {
    DetectorModel::default().linear_rate
}
fn default_cal_rate() -> f64 {
    DetectorModel::default().calibrated_rate
}
fn default_cal_factor() -> f64 {
    DetectorModel::default().calibrated_factor
}
fn default_table_points() -> usize {
    101
}

impl Section for CalibrateConfig {
    const NAME: &'static str = "calibrate";
    const REQUIRED: &'static [&'static str] = &["rep_rate_hz", "attenuation"];
}

impl CalibrateConfig {
    pub fn resolve(&mut self, src: &Source) {
        if let Some(p) = &self.decay_rates {
            let r = src.resolve_path(p);
            self.decay_rates = Some(std::path::absolute(&r).unwrap_or(r));
        }
    }

    fn detector(&self) -> DetectorModel {
        DetectorModel {
            efficiency: self.detector_efficiency,
            efficiency_uncertainty: self.detector_efficiency_uncertainty,
            linear_rate: self.linear_rate_hz,
            calibrated_rate: self.calibrated_rate_hz,
            calibrated_factor: self.calibrated_factor,
        }
    }
}

#[derive(Serialize)]
struct Prediction {
    sigma: f64,
    count_rate_hz: f64,
    correction: f64,
}

#[derive(Serialize)]
struct CalibrationReport {
    correction_model: &'static str,
    measured: Option<SystemEfficiency>,
    predicted: Option<Prediction>,
    photon_flux_per_s: Option<f64>,
    decay_fit: Option<DecayFit>,
    purcell_from_lifetimes: Option<f64>,
}

pub fn run(cfg: &CalibrateConfig, ctx: &mut RunContext) -> Result<(), CliError> {
    let det = cfg.detector();
    det.validate()?;
    if cfg.table_points < 2 {
        return Err(CliError::Config("[calibrate] table_points must be ≥ 2".into()));
    }
    let mut csv = String::from("rate_hz,correction\n");
    for k in 0..cfg.table_points {
        let r = det.calibrated_rate * k as f64 / (cfg.table_points - 1) as f64;
        let _ = writeln!(csv, "{},{}", sig9(r), sig9(detector_correction(r, &det)?.factor));
    }
    ctx.write("detector_correction.csv", csv.as_bytes())?;

    let measured = cfg
        .count_rate_hz
        .map(|c| system_efficiency(c, cfg.rep_rate_hz, cfg.attenuation, &det))
        .transpose()?;
    let predicted = cfg
        .target_sigma
        .map(|s| -> Result<Prediction, CliError> {
            let rate = predicted_count_rate(s, cfg.rep_rate_hz, cfg.attenuation, &det)?;
            Ok(Prediction { sigma: s, count_rate_hz: rate, correction: detector_correction(rate, &det)?.factor })
        })
        .transpose()?;
    let flux = match (cfg.power_w, cfg.frequency_hz) {
        (Some(p), Some(f)) => Some(photon_flux(p, f)?),
        (None, None) => None,
        _ => return Err(CliError::Config("[calibrate] power_w and frequency_hz must be given together".into())),
    };
    let decay_fit = match &cfg.decay_rates {
        Some(p) => Some(fit_decay_vs_detuning(&read_decay_csv(&ctx.read_input(p)?)?)?),
        None => None,
    };
    let lifetimes = match (cfg.tau_on_ps, cfg.tau_off_ps) {
        (Some(on), Some(off)) => Some(purcell_from_lifetimes(on, off)?),
        (None, None) => None,
        _ => return Err(CliError::Config("[calibrate] tau_on_ps and tau_off_ps must be given together".into())),
    };

    ctx.write_json(
        "calibration.json",
        &CalibrationReport {
            correction_model: "1 + (f2 - 1)((r - r1)/(r2 - r1))^2 above r1, 1 below",
            measured,
            predicted,
            photon_flux_per_s: flux,
            decay_fit,
            purcell_from_lifetimes: lifetimes,
        },
    )
}
