use std::fmt::Write as _;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sps_core::cavity::{
    fiber_matching_focal_length, fit_gaussian_mode, gaussian_beam_magnitude, numerical_aperture, rayleigh_range,
    FieldSample, N_FUSED_SILICA,
};
use sps_core::format::sig9;

use crate::config::{Section, Source};
use crate::error::CliError;
use crate::run::RunContext;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeFitConfig {
    /// CSV `r_um,z_um,magnitude`. Without it a synthetic beam is sampled.
    #[serde(default)]
    pub samples: Option<PathBuf>,
    /// Waist of the synthetic beam (µm).
    #[serde(default = "default_waist")]
    pub synthetic_waist_um: f64,
    /// Relative Gaussian noise on the synthetic magnitudes; seeded by `--seed`.
    #[serde(default)]
    pub synthetic_noise: f64,
    #[serde(default = "default_index")]
    pub medium_index: f64,
    #[serde(default = "default_wavelength")]
    pub wavelength_nm: f64,
    #[serde(default = "default_objective")]
    pub objective_focal_mm: f64,
    #[serde(default = "default_fiber_mode")]
    pub fiber_mode_um: f64,
}

fn default_waist() -> f64 {
    1.05
}
fn default_index() -> f64 {
    N_FUSED_SILICA
}
fn default_wavelength() -> f64 {
    920.0
}
fn default_objective() -> f64 {
    4.51
}
fn default_fiber_mode() -> f64 {
    2.71
}

impl Section for ModeFitConfig {
    const NAME: &'static str = "mode_fit";
    const REQUIRED: &'static [&'static str] = &[];
}

impl ModeFitConfig {
    pub fn resolve(&mut self, src: &Source) {
        if let Some(p) = &self.samples {
            let r = src.resolve_path(p);
            self.samples = Some(std::path::absolute(&r).unwrap_or(r));
        }
    }
}

#[derive(Serialize)]
struct ModeReport {
    samples: usize,
    waist_um: f64,
    amplitude: f64,
    residual_norm: f64,
    rayleigh_range_um: f64,
    numerical_aperture: f64,
    fiber_focal_length_mm: f64,
}

fn parse_samples(text: &str) -> Result<Vec<FieldSample>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("r_um")) {
            continue;
        }
        let v: Vec<f64> = line.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| {
            CliError::Core(sps_core::Error::Parse { line: i + 1, msg: format!("expected r_um,z_um,magnitude: {line}") })
        })?;
        match v.as_slice() {
            [r, z, m] => out.push(FieldSample { r_um: *r, z_um: *z, magnitude: *m }),
            _ => {
                return Err(CliError::Core(sps_core::Error::Parse {
                    line: i + 1,
                    msg: "expected three columns".into(),
                }))
            }
        }
    }
    Ok(out)
}

fn synthetic(cfg: &ModeFitConfig, seed: u64) -> Result<Vec<FieldSample>, CliError> {
    if !(cfg.synthetic_noise >= 0.0) {
        return Err(CliError::Config("[mode_fit] synthetic_noise must be ≥ 0".into()));
    }
    let noise = Normal::new(0.0, cfg.synthetic_noise).map_err(|e| CliError::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = cfg.synthetic_waist_um;
    let zr = rayleigh_range(w, cfg.medium_index, cfg.wavelength_nm);
    let mut v = Vec::new();
    for iz in 0..=24 {
        for ir in 0..=30 {
            let (r, z) = (3.0 * w * ir as f64 / 30.0, 3.0 * zr * iz as f64 / 24.0);
            let m = gaussian_beam_magnitude(1.0, w, cfg.medium_index, cfg.wavelength_nm, r, z);
            v.push(FieldSample { r_um: r, z_um: z, magnitude: m * (1.0 + noise.sample(&mut rng)) });
        }
    }
    Ok(v)
}

pub fn run(cfg: &ModeFitConfig, ctx: &mut RunContext) -> Result<(), CliError> {
    let samples = match &cfg.samples {
        Some(p) => parse_samples(&ctx.read_input(p)?)?,
        None => synthetic(cfg, ctx.seed)?,
    };
    let fit = fit_gaussian_mode(&samples, cfg.medium_index, cfg.wavelength_nm)?;

    let mut csv = String::from("r_um,z_um,measured,fitted\n");
    for s in &samples {
        let f = gaussian_beam_magnitude(fit.amplitude, fit.waist_um, cfg.medium_index, cfg.wavelength_nm, s.r_um, s.z_um);
        let _ = writeln!(csv, "{},{},{},{}", sig9(s.r_um), sig9(s.z_um), sig9(s.magnitude), sig9(f));
    }
    ctx.write("mode_profile.csv", csv.as_bytes())?;
    ctx.write_json(
        "mode_fit.json",
        &ModeReport {
            samples: samples.len(),
            waist_um: fit.waist_um,
            amplitude: fit.amplitude,
            residual_norm: fit.residual_norm,
            rayleigh_range_um: rayleigh_range(fit.waist_um, cfg.medium_index, cfg.wavelength_nm),
            numerical_aperture: numerical_aperture(fit.waist_um, cfg.wavelength_nm)?,
            fiber_focal_length_mm: fiber_matching_focal_length(cfg.objective_focal_mm, cfg.fiber_mode_um, fit.waist_um)?,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_csv() {
        let s = parse_samples("r_um,z_um,magnitude\n0,0,1\n0.5,1,0.4\n").unwrap();
        assert_eq!(s.len(), 2);
        assert!(parse_samples("r_um,z_um,magnitude\n0,0\n").is_err());
    }
}
