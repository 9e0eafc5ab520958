use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sps_core::cavity::{
    cavity_q, kappa_from_q, parse_stack, spectrum, stack_reflectivity, wavelength_grid, write_spectrum_csv, Resonance,
    Side,
};

use crate::config::{Section, Source};
use crate::error::CliError;
use crate::run::RunContext;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackConfig {
    /// Layer table, see the stack-file grammar.
    pub file: PathBuf,
    pub lambda_min_nm: f64,
    pub lambda_max_nm: f64,
    #[serde(default = "default_step")]
    pub lambda_step_nm: f64,
    /// `ambient` or `substrate`.
    #[serde(default = "default_side")]
    pub incidence: String,
    /// Single wavelength reported in the JSON summary.
    #[serde(default)]
    pub probe_nm: Option<f64>,
    /// Search this window for a resonance and report its Q.
    #[serde(default)]
    pub q_window_nm: Option<[f64; 2]>,
    #[serde(default = "default_q_step")]
    pub q_step_nm: f64,
}

fn default_step() -> f64 {
    0.1
}
fn default_side() -> String {
    "ambient".into()
}
fn default_q_step() -> f64 {
    0.002
}

impl Section for StackConfig {
    const NAME: &'static str = "stack";
    const REQUIRED: &'static [&'static str] = &["file", "lambda_min_nm", "lambda_max_nm"];
}

#[derive(Serialize)]
struct Probe {
    wavelength_nm: f64,
    reflectance: f64,
    transmittance: f64,
    transmittance_ppm: f64,
}

#[derive(Serialize)]
struct StackReport {
    layers: usize,
    total_thickness_nm: f64,
    probe: Option<Probe>,
    resonance: Option<Resonance>,
    kappa_ghz: Option<f64>,
}

impl StackConfig {
    /// Makes the stack path absolute so a manifest replays from anywhere.
    pub fn resolve(&mut self, src: &Source) {
        self.file = std::path::absolute(src.resolve_path(&self.file)).unwrap_or_else(|_| src.resolve_path(&self.file));
    }
}

pub fn run(cfg: &StackConfig, ctx: &mut RunContext) -> Result<(), CliError> {
    let side = match cfg.incidence.as_str() {
        "ambient" => Side::Ambient,
        "substrate" => Side::Substrate,
        other => return Err(CliError::Config(format!("[stack] incidence must be ambient or substrate, got `{other}`"))),
    };
    let text = ctx.read_input(&cfg.file)?;
    let stack = parse_stack(&text)?;

    let grid = wavelength_grid(cfg.lambda_min_nm, cfg.lambda_max_nm, cfg.lambda_step_nm)?;
    let spec = spectrum(&stack, &grid, side, ctx.exec)?;
    let mut csv = Vec::new();
    write_spectrum_csv(&spec, &mut csv)?;
    ctx.write("spectrum.csv", &csv)?;

    let probe = cfg
        .probe_nm
        .map(|l| {
            stack_reflectivity(&stack, l, side).map(|r| Probe {
                wavelength_nm: l,
                reflectance: r.reflectance,
                transmittance: r.transmittance,
                transmittance_ppm: r.transmittance * 1e6,
            })
        })
        .transpose()?;
    let resonance = cfg.q_window_nm.map(|[lo, hi]| cavity_q(&stack, lo, hi, cfg.q_step_nm, ctx.exec)).transpose()?;
    let kappa_ghz = resonance.as_ref().map(|r| kappa_from_q(r.q, r.wavelength_nm)).transpose()?;
    ctx.write_json(
        "stack.json",
        &StackReport {
            layers: stack.layers.len(),
            total_thickness_nm: stack.total_thickness_nm(),
            probe,
            resonance,
            kappa_ghz,
        },
    )
}
