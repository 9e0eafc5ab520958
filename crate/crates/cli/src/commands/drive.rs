use serde::{Deserialize, Serialize};
use sps_core::lindblad::{pi_pulse_search, rabi_map, truncation_check, CellFailure, ExcitationModel, PiPulse, TruncationCheck};
use sps_core::pulse::{CavityFilter, FilterKernel};

use crate::config::Section;
use crate::error::CliError;
use crate::run::RunContext;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub coupling_ghz: f64,
    pub kappa_ghz: f64,
    #[serde(default)]
    pub gamma_free_ghz: f64,
    pub phonon_fs_per_k: f64,
    pub temperature_k: f64,
    #[serde(default = "default_cutoff")]
    pub fock_cutoff: usize,
    pub pulse_fwhm_ps: f64,
    pub filter_detuning_ghz: f64,
    /// Linewidth of the filtering mode; defaults to `kappa_ghz`.
    #[serde(default)]
    pub filter_kappa_ghz: Option<f64>,
    /// `single_pole` (time domain), `single_pole_fft` or `full_cosine`
    /// (both frequency domain).
    #[serde(default = "default_kernel")]
    pub kernel: String,
    /// Optical carrier for `full_cosine` (GHz).
    #[serde(default = "default_carrier")]
    pub carrier_ghz: f64,
    pub detuning_min_ghz: f64,
    pub detuning_max_ghz: f64,
    pub detuning_points: usize,
    pub amplitude_min: f64,
    pub amplitude_max: f64,
    pub amplitude_points: usize,
    #[serde(default = "yes")]
    pub refine_pi_pulse: bool,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
}

fn default_cutoff() -> usize {
    2
}
fn default_kernel() -> String {
    "single_pole".into()
}
fn default_carrier() -> f64 {
    sps_core::cavity::SPEED_OF_LIGHT / 920e-9 * 1e-9
}
fn yes() -> bool {
    true
}
fn default_rtol() -> f64 {
    1e-8
}
fn default_atol() -> f64 {
    1e-10
}

impl Section for DriveConfig {
    const NAME: &'static str = "drive";
    const REQUIRED: &'static [&'static str] = &[
        "coupling_ghz",
        "kappa_ghz",
        "phonon_fs_per_k",
        "temperature_k",
        "pulse_fwhm_ps",
        "filter_detuning_ghz",
        "detuning_min_ghz",
        "detuning_max_ghz",
        "detuning_points",
        "amplitude_min",
        "amplitude_max",
        "amplitude_points",
    ];
}

impl DriveConfig {
    pub fn model(&self) -> Result<ExcitationModel, CliError> {
        let kernel = match self.kernel.as_str() {
            "single_pole" => None,
            "single_pole_fft" => Some(FilterKernel::SinglePole),
            "full_cosine" => Some(FilterKernel::FullCosine { carrier_ghz: self.carrier_ghz }),
            other => return Err(CliError::Config(format!("[drive] unknown kernel `{other}`"))),
        };
        let mut m = ExcitationModel::reference();
        m.coupling_ghz = self.coupling_ghz;
        m.kappa_ghz = self.kappa_ghz;
        m.gamma_free_ghz = self.gamma_free_ghz;
        m.phonon_fs_per_k = self.phonon_fs_per_k;
        m.temperature_k = self.temperature_k;
        m.fock_cutoff = self.fock_cutoff;
        m.pulse_fwhm_ps = self.pulse_fwhm_ps;
        m.filter = CavityFilter::new(self.filter_detuning_ghz, self.filter_kappa_ghz.unwrap_or(self.kappa_ghz))?;
        m.kernel = kernel;
        m.solver.rtol = self.rtol;
        m.solver.atol = self.atol;
        Ok(m)
    }

    pub fn axes(&self) -> Result<(Vec<f64>, Vec<f64>), CliError> {
        let axis = |lo: f64, hi: f64, n: usize, name: &str| -> Result<Vec<f64>, CliError> {
            match n {
                0 => Err(CliError::Config(format!("[drive] {name}_points must be ≥ 1"))),
                1 => Ok(vec![lo]),
                _ if hi > lo => Ok((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()),
                _ => Err(CliError::Config(format!("[drive] {name} range is empty: [{lo}, {hi}]"))),
            }
        };
        Ok((
            axis(self.detuning_min_ghz, self.detuning_max_ghz, self.detuning_points, "detuning")?,
            axis(self.amplitude_min, self.amplitude_max, self.amplitude_points, "amplitude")?,
        ))
    }
}

#[derive(Serialize)]
struct GridPeak {
    detuning_ghz: f64,
    amplitude: f64,
    probability: f64,
}

#[derive(Serialize)]
struct DriveSummary {
    grid_peak: Option<GridPeak>,
    pi_pulse: Option<PiPulse>,
    /// Sign of the optimal laser detuning relative to the emitter.
    blue_detuned: Option<bool>,
    truncation: Option<TruncationCheck>,
    failures: Vec<CellFailure>,
}

pub fn run(cfg: &DriveConfig, ctx: &mut RunContext) -> Result<(), CliError> {
    let model = cfg.model()?;
    let (dets, amps) = cfg.axes()?;
    let map = rabi_map(&model, &dets, &amps, ctx.exec)?;
    let mut csv = Vec::new();
    map.write_csv(&mut csv)?;
    ctx.write("rabi_map.csv", &csv)?;

    let grid_peak = map.best_first_peak().map(|(id, ia, p)| GridPeak {
        detuning_ghz: dets[id],
        amplitude: amps[ia],
        probability: p,
    });
    let pi_pulse = match (&grid_peak, cfg.refine_pi_pulse) {
        (Some(_), true) => Some(pi_pulse_search(&model, &map)?),
        _ => None,
    };
    let operating = pi_pulse
        .map(|p| (p.detuning_ghz, p.amplitude))
        .or(grid_peak.as_ref().map(|g| (g.detuning_ghz, g.amplitude)));
    // A failing check aborts before any summary is written.
    let truncation = operating.map(|(d, a)| truncation_check(&model, d, a)).transpose()?;

    ctx.write_json(
        "drive_summary.json",
        &DriveSummary {
            blue_detuned: operating.map(|(d, _)| d > 0.0),
            grid_peak,
            pi_pulse,
            truncation,
            failures: map.failures.clone(),
        },
    )
}
