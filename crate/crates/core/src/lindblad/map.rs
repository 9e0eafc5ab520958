//! Parameter sweeps of the filtered-pulse excitation scheme.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{emission_from_ground, DriveModel, SolverOptions};
use crate::format::sig9;
use crate::optimize::try_golden_section_max;
use crate::parallel::{map_indexed, Execution};
use crate::pulse::{
    filter_in_frequency_domain, filter_through_cavity, gaussian_envelope, CavityFilter, FilterKernel,
    LaserPulse,
};
use crate::quantum::HilbertSpace;
use crate::{Error, Result};

/// Largest change in emission probability tolerated when the photon cutoff
/// is raised by one.
pub const TRUNCATION_TOLERANCE: f64 = 1e-3;

/// Everything needed to turn a (laser detuning, amplitude) pair into a
/// [`DriveModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationModel {
    pub coupling_ghz: f64,
    /// Decay of the mode the emitter couples to (GHz).
    pub kappa_ghz: f64,
    pub gamma_free_ghz: f64,
    pub phonon_fs_per_k: f64,
    pub temperature_k: f64,
    pub fock_cutoff: usize,
    pub pulse_fwhm_ps: f64,
    /// The orthogonal mode the pulse is filtered through.
    pub filter: CavityFilter,
    /// `None` uses the time-domain single-pole filter.
    pub kernel: Option<FilterKernel>,
    pub solver: SolverOptions,
}

impl ExcitationModel {
    /// Parameter set of the reference device: g = 4.16 GHz, κ = 25 GHz,
    /// filter mode 50 GHz red of the emitter, 5.2 ps pulses, A = 32 fs/K at 4.2 K.
    pub fn reference() -> Self {
        Self {
            coupling_ghz: 4.16,
            kappa_ghz: 25.0,
            gamma_free_ghz: 0.0,
            phonon_fs_per_k: 32.0,
            temperature_k: 4.2,
            fock_cutoff: 2,
            pulse_fwhm_ps: 5.2,
            filter: CavityFilter { detuning_ghz: -50.0, kappa_ghz: 25.0 },
            kernel: None,
            solver: SolverOptions::default(),
        }
    }

    pub fn drive_model(&self, detuning_ghz: f64, amplitude: f64) -> Result<DriveModel> {
        let pulse = LaserPulse::new(self.pulse_fwhm_ps, detuning_ghz, amplitude, 0.0)?;
        let env = gaussian_envelope(&pulse, &pulse.default_grid())?;
        let filtered = match self.kernel {
            None => filter_through_cavity(&env, &self.filter)?,
            Some(k) => filter_in_frequency_domain(&env, &self.filter, k)?,
        };
        let model = DriveModel {
            coupling_ghz: self.coupling_ghz,
            kappa_ghz: self.kappa_ghz,
            gamma_free_ghz: self.gamma_free_ghz,
            phonon_fs_per_k: self.phonon_fs_per_k,
            temperature_k: self.temperature_k,
            drive: Some(filtered),
            space: HilbertSpace::new(self.fock_cutoff)?,
        };
        model.validate()?;
        Ok(model)
    }

    /// Photon emission probability starting from the ground state.
    pub fn emission(&self, detuning_ghz: f64, amplitude: f64) -> Result<f64> {
        emission_from_ground(&self.drive_model(detuning_ghz, amplitude)?, &self.solver)
    }
}

/// Emission probability versus amplitude at one detuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiCurve {
    pub detuning_ghz: f64,
    pub amplitudes: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl RabiCurve {
    pub fn compute(model: &ExcitationModel, detuning_ghz: f64, amplitudes: &[f64], exec: Execution) -> Result<Self> {
        let probabilities = map_indexed(amplitudes.len(), exec, |i| model.emission(detuning_ghz, amplitudes[i]))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { detuning_ghz, amplitudes: amplitudes.to_vec(), probabilities })
    }

    /// Interior local maxima `(index, probability)` in amplitude order.
    pub fn maxima(&self) -> Vec<(usize, f64)> {
        local_maxima(&self.probabilities)
    }

    pub fn first_peak(&self) -> Option<(usize, f64)> {
        self.maxima().first().copied()
    }

    /// Linear interpolation in amplitude; `None` outside the sampled range.
    pub fn interpolate(&self, amplitude: f64) -> Option<f64> {
        let a = &self.amplitudes;
        if a.len() < 2 || amplitude < a[0] || amplitude > a[a.len() - 1] {
            return None;
        }
        let k = a.partition_point(|&x| x <= amplitude).clamp(1, a.len() - 1);
        let f = (amplitude - a[k - 1]) / (a[k] - a[k - 1]);
        Some(self.probabilities[k - 1] * (1.0 - f) + self.probabilities[k] * f)
    }
}

fn local_maxima(p: &[f64]) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < p.len() {
        if p[i] > p[i - 1] {
            // Walk across a plateau before deciding.
            let mut j = i;
            while j + 1 < p.len() && p[j + 1] == p[i] {
                j += 1;
            }
            if j + 1 < p.len() && p[j + 1] < p[i] {
                out.push((i, p[i]));
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellFailure {
    pub detuning_index: usize,
    pub amplitude_index: usize,
    pub message: String,
}

/// Emission probability on a (detuning × amplitude) grid. Failed cells hold NaN
/// and are listed in `failures`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiMap {
    pub detunings_ghz: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// Row-major by amplitude: `probability[ia * n_det + id]`.
    pub probability: Vec<f64>,
    pub failures: Vec<CellFailure>,
}

impl RabiMap {
    pub fn get(&self, detuning_index: usize, amplitude_index: usize) -> f64 {
        self.probability[amplitude_index * self.detunings_ghz.len() + detuning_index]
    }

    pub fn column(&self, detuning_index: usize) -> RabiCurve {
        RabiCurve {
            detuning_ghz: self.detunings_ghz[detuning_index],
            amplitudes: self.amplitudes.clone(),
            probabilities: (0..self.amplitudes.len()).map(|ia| self.get(detuning_index, ia)).collect(),
        }
    }

    /// First interior maximum along the amplitude axis of one column.
    pub fn first_peak(&self, detuning_index: usize) -> Option<(usize, f64)> {
        self.column(detuning_index).first_peak()
    }

    /// Column whose first Rabi peak is highest: `(detuning index, amplitude index, P)`.
    pub fn best_first_peak(&self) -> Option<(usize, usize, f64)> {
        (0..self.detunings_ghz.len())
            .filter_map(|id| self.first_peak(id).map(|(ia, p)| (id, ia, p)))
            .fold(None, |best, c| match best {
                Some(b) if b.2 >= c.2 => Some(b),
                _ => Some(c),
            })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "detuning_ghz,amplitude,probability")?;
        for (ia, a) in self.amplitudes.iter().enumerate() {
            for (id, d) in self.detunings_ghz.iter().enumerate() {
                writeln!(w, "{},{},{}", sig9(*d), sig9(*a), sig9(self.get(id, ia)))?;
            }
        }
        Ok(())
    }
}

/// Evaluates every cell independently; results are placed by grid index.
pub fn rabi_map(
    model: &ExcitationModel,
    detunings_ghz: &[f64],
    amplitudes: &[f64],
    exec: Execution,
) -> Result<RabiMap> {
    if detunings_ghz.is_empty() || amplitudes.is_empty() {
        return Err(Error::invalid("Rabi map needs non-empty detuning and amplitude axes"));
    }
    if amplitudes.iter().any(|a| !(*a >= 0.0)) {
        return Err(Error::invalid("amplitudes must be non-negative"));
    }
    let nd = detunings_ghz.len();
    let cells = map_indexed(nd * amplitudes.len(), exec, |k| {
        model.emission(detunings_ghz[k % nd], amplitudes[k / nd])
    });
    let mut probability = Vec::with_capacity(cells.len());
    let mut failures = Vec::new();
    for (k, c) in cells.into_iter().enumerate() {
        match c {
            Ok(p) => probability.push(p),
            Err(e) => {
                probability.push(f64::NAN);
                failures.push(CellFailure {
                    detuning_index: k % nd,
                    amplitude_index: k / nd,
                    message: e.to_string(),
                });
            }
        }
    }
    Ok(RabiMap {
        detunings_ghz: detunings_ghz.to_vec(),
        amplitudes: amplitudes.to_vec(),
        probability,
        failures,
    })
}

/// Maximises the emission probability over amplitude inside `[lo, hi]`,
/// requiring the optimum to be interior.
pub fn first_peak_at(model: &ExcitationModel, detuning_ghz: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    if !(hi > lo && lo >= 0.0) {
        return Err(Error::invalid(format!("bad amplitude bracket [{lo}, {hi}]")));
    }
    let tol = 1e-4 * hi;
    let (a, p) = try_golden_section_max(|a| model.emission(detuning_ghz, a), lo, hi, tol)?;
    if a - lo < 2.0 * tol || hi - a < 2.0 * tol {
        return Err(Error::NoMaximum(format!(
            "amplitude optimum {a} at the edge of [{lo}, {hi}] for detuning {detuning_ghz} GHz"
        )));
    }
    Ok((a, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiPulse {
    pub detuning_ghz: f64,
    pub amplitude: f64,
    pub probability: f64,
}

/// Refines the highest first Rabi peak of a coarse map: golden-section search
/// on amplitude nested inside golden-section search on detuning, both
/// restricted to the neighbouring grid cells.
pub fn pi_pulse_search(model: &ExcitationModel, map: &RabiMap) -> Result<PiPulse> {
    let (id, _, _) = map
        .best_first_peak()
        .ok_or_else(|| Error::NoMaximum("no column of the map has an interior Rabi peak".into()))?;
    let nd = map.detunings_ghz.len();
    if nd > 1 && (id == 0 || id == nd - 1) {
        return Err(Error::NoMaximum(format!(
            "best first peak sits on the detuning edge ({} GHz)",
            map.detunings_ghz[id]
        )));
    }
    let cols: Vec<usize> = if nd == 1 { vec![0] } else { vec![id - 1, id, id + 1] };
    let na = map.amplitudes.len();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &c in &cols {
        if let Some((ia, _)) = map.first_peak(c) {
            lo = lo.min(map.amplitudes[ia - 1]);
            hi = hi.max(map.amplitudes[(ia + 1).min(na - 1)]);
        }
    }

    let refine = |d: f64| first_peak_at(model, d, lo, hi);
    if nd == 1 {
        let (a, p) = refine(map.detunings_ghz[0])?;
        return Ok(PiPulse { detuning_ghz: map.detunings_ghz[0], amplitude: a, probability: p });
    }
    let (d_lo, d_hi) = (map.detunings_ghz[id - 1], map.detunings_ghz[id + 1]);
    let (d, _) = try_golden_section_max(|d| refine(d).map(|(_, p)| p), d_lo, d_hi, 0.02)?;
    let (a, p) = refine(d)?;
    Ok(PiPulse { detuning_ghz: d, amplitude: a, probability: p })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationCheck {
    pub cutoff: usize,
    pub probability: f64,
    pub probability_refined: f64,
}

impl TruncationCheck {
    pub fn difference(&self) -> f64 {
        (self.probability_refined - self.probability).abs()
    }
}

/// Recomputes one operating point with one more photon allowed; errors if the
/// result moves by [`TRUNCATION_TOLERANCE`] or more.
pub fn truncation_check(model: &ExcitationModel, detuning_ghz: f64, amplitude: f64) -> Result<TruncationCheck> {
    let p = model.emission(detuning_ghz, amplitude)?;
    let refined = ExcitationModel { fock_cutoff: model.fock_cutoff + 1, ..model.clone() };
    let q = refined.emission(detuning_ghz, amplitude)?;
    let check = TruncationCheck { cutoff: model.fock_cutoff, probability: p, probability_refined: q };
    if !(check.difference() < TRUNCATION_TOLERANCE) {
        return Err(Error::Truncation { base: p, refined: q });
    }
    Ok(check)
}
