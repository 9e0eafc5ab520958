use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sps_core::stats::{
    approx_visibility, corrected_visibility, g2_zero, system_efficiency, v_raw, v_raw_from_areas, visibility_band,
    CoincidenceHistogram, DetectorModel, HomSetup, PhotonStatsReport, ReportUncertainties, VisibilityFormula,
};

use crate::config::{Section, Source};
use crate::error::CliError;
use crate::run::RunContext;

/// Inputs come from histogram files, zero-delay areas or direct values, in
/// that order of precedence.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomConfig {
    pub reflectance: f64,
    pub transmittance: f64,
    pub epsilon: f64,
    #[serde(default = "default_eps_unc")]
    pub epsilon_uncertainty: f64,
    /// Needed with histogram files.
    #[serde(default)]
    pub repetition_period_ns: Option<f64>,
    /// Integration half-window; defaults to a quarter period.
    #[serde(default)]
    pub window_ns: Option<f64>,
    #[serde(default)]
    pub autocorrelation: Option<PathBuf>,
    #[serde(default)]
    pub hom_parallel: Option<PathBuf>,
    #[serde(default)]
    pub hom_perpendicular: Option<PathBuf>,
    #[serde(default)]
    pub area_parallel: Option<f64>,
    #[serde(default)]
    pub area_perpendicular: Option<f64>,
    #[serde(default)]
    pub g2_zero: Option<f64>,
    #[serde(default)]
    pub v_raw: Option<f64>,
    /// Raw visibility already corrected for the interferometer, for the
    /// `(1 + 2g²(0))` estimate.
    #[serde(default)]
    pub v_raw_interferometer: Option<f64>,
    /// Optional system-efficiency inputs.
    #[serde(default)]
    pub count_rate_hz: Option<f64>,
    #[serde(default)]
    pub rep_rate_hz: Option<f64>,
    #[serde(default)]
    pub attenuation: Option<f64>,
    #[serde(default)]
    pub detector_efficiency: Option<f64>,
}

fn default_eps_unc() -> f64 {
    0.0025
}

impl Section for HomConfig {
    const NAME: &'static str = "hom";
    const REQUIRED: &'static [&'static str] = &["reflectance", "transmittance", "epsilon"];
}

impl HomConfig {
    pub fn resolve(&mut self, src: &Source) {
        for p in [&mut self.autocorrelation, &mut self.hom_parallel, &mut self.hom_perpendicular].into_iter().flatten() {
            let r = src.resolve_path(p);
            *p = std::path::absolute(&r).unwrap_or(r);
        }
    }
}

#[derive(Serialize)]
struct HomReport {
    #[serde(flatten)]
    stats: PhotonStatsReport,
    v_approx: Option<f64>,
    window_ns: Option<f64>,
}

fn histogram(ctx: &mut RunContext, path: &Path, period: Option<f64>) -> Result<CoincidenceHistogram, CliError> {
    let period = period.ok_or_else(|| CliError::Config("[hom] histogram files need repetition_period_ns".into()))?;
    let text = ctx.read_input(path)?;
    Ok(CoincidenceHistogram::read_csv(&text, period)?)
}

pub fn run(cfg: &HomConfig, ctx: &mut RunContext) -> Result<(), CliError> {
    let mut window_used = None;
    let mut window_for = |h: &CoincidenceHistogram| {
        let w = cfg.window_ns.unwrap_or_else(|| h.default_window_ns());
        window_used = Some(w);
        w
    };

    let g2 = match (&cfg.autocorrelation, cfg.g2_zero) {
        (Some(p), _) => {
            let h = histogram(ctx, p, cfg.repetition_period_ns)?;
            g2_zero(&h, window_for(&h))?
        }
        (None, Some(g)) => g,
        (None, None) => return Err(CliError::Config("[hom] missing keys: autocorrelation or g2_zero".into())),
    };

    let raw = match (&cfg.hom_parallel, &cfg.hom_perpendicular) {
        (Some(a), Some(b)) => {
            let par = histogram(ctx, a, cfg.repetition_period_ns)?;
            let perp = histogram(ctx, b, cfg.repetition_period_ns)?;
            v_raw(&par, &perp, window_for(&perp))?
        }
        (Some(_), None) | (None, Some(_)) => {
            return Err(CliError::Config("[hom] hom_parallel and hom_perpendicular must be given together".into()))
        }
        (None, None) => match (cfg.area_parallel, cfg.area_perpendicular, cfg.v_raw) {
            (Some(a), Some(b), _) => v_raw_from_areas(a, b)?,
            (None, None, Some(v)) => v,
            _ => {
                return Err(CliError::Config(
                    "[hom] missing keys: hom_parallel/hom_perpendicular, area_parallel/area_perpendicular or v_raw"
                        .into(),
                ))
            }
        },
    };

    let setup = HomSetup {
        reflectance: cfg.reflectance,
        transmittance: cfg.transmittance,
        epsilon: cfg.epsilon,
        g2_zero: g2,
    };
    let eq1 = corrected_visibility(raw, &setup, VisibilityFormula::Exact)?;
    let eq2 = corrected_visibility(raw, &setup, VisibilityFormula::NearBalanced)?;
    let (lo, hi) = visibility_band(raw, &setup, cfg.epsilon_uncertainty)?;

    let sigma = match (cfg.count_rate_hz, cfg.rep_rate_hz, cfg.attenuation) {
        (Some(c), Some(r), Some(a)) => {
            let det = DetectorModel { efficiency: cfg.detector_efficiency.unwrap_or(0.42), ..DetectorModel::default() };
            Some(system_efficiency(c, r, a, &det)?)
        }
        (None, None, None) => None,
        _ => {
            return Err(CliError::Config(
                "[hom] count_rate_hz, rep_rate_hz and attenuation must be given together".into(),
            ))
        }
    };
    let v_approx = cfg.v_raw_interferometer.map(|v| approx_visibility(v, g2)).transpose()?;

    ctx.write_json(
        "hom.json",
        &HomReport {
            stats: PhotonStatsReport {
                g2_zero: g2,
                v_raw: raw,
                v_corrected_eq1: eq1,
                v_corrected_eq2: eq2,
                sigma: sigma.map(|s| s.sigma),
                uncertainties: ReportUncertainties {
                    v_corrected_eq1_low: lo,
                    v_corrected_eq1_high: hi,
                    sigma: sigma.map(|s| s.uncertainty),
                },
            },
            v_approx,
            window_ns: window_used,
        },
    )
}
