//! Photon-counting analysis: pulsed autocorrelation histograms, Hong-Ou-Mandel
//! visibility corrections and detector calibration.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::format::sig9;
use crate::metrics::PLANCK;
use crate::parallel::{map_indexed, Execution};
use crate::{Error, Result};

/// Coincidence counts versus delay. Bin `k` is centred on
/// `(k − zero_delay_bin) · bin_width_ns`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    pub bin_width_ns: f64,
    pub repetition_period_ns: f64,
    pub zero_delay_bin: usize,
    pub counts: Vec<u64>,
}

/// Timestamp pairs per parallel chunk when binning.
const CHUNK: usize = 1 << 16;

impl CoincidenceHistogram {
    pub fn new(bin_width_ns: f64, repetition_period_ns: f64, zero_delay_bin: usize, counts: Vec<u64>) -> Result<Self> {
        let h = Self { bin_width_ns, repetition_period_ns, zero_delay_bin, counts };
        h.validate()?;
        Ok(h)
    }

    /// Empty histogram covering `±half_range_ns`.
    pub fn empty(bin_width_ns: f64, repetition_period_ns: f64, half_range_ns: f64) -> Result<Self> {
        if !(bin_width_ns > 0.0 && half_range_ns > 0.0) {
            return Err(Error::invalid("bin width and range must be positive"));
        }
        let half = (half_range_ns / bin_width_ns).round() as usize;
        Self::new(bin_width_ns, repetition_period_ns, half, vec![0; 2 * half + 1])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width_ns > 0.0 && self.repetition_period_ns > 0.0) {
            return Err(Error::invalid("bin width and repetition period must be positive"));
        }
        if self.repetition_period_ns / self.bin_width_ns < 4.0 {
            return Err(Error::invalid(format!(
                "period {} ns spans fewer than 4 bins of {} ns; peaks not resolvable",
                self.repetition_period_ns, self.bin_width_ns
            )));
        }
        if self.zero_delay_bin >= self.counts.len() {
            return Err(Error::invalid("zero-delay bin outside histogram"));
        }
        Ok(())
    }

    pub fn delay_ns(&self, bin: usize) -> f64 {
        (bin as f64 - self.zero_delay_bin as f64) * self.bin_width_ns
    }

    fn bin_of(&self, delay_ns: f64) -> Option<usize> {
        let k = (delay_ns / self.bin_width_ns).round() + self.zero_delay_bin as f64;
        (k >= 0.0 && k < self.counts.len() as f64).then_some(k as usize)
    }

    /// Adds the delays `t2 − t1` of each pair. Delays outside the range are
    /// dropped. Chunks are binned independently and summed bin-wise, so the
    /// result does not depend on `exec`.
    pub fn accumulate(&mut self, pairs: &[(f64, f64)], exec: Execution) {
        let chunks = pairs.len().div_ceil(CHUNK);
        let partial = map_indexed(chunks, exec, |c| {
            let mut local = vec![0u64; self.counts.len()];
            for &(t1, t2) in &pairs[c * CHUNK..((c + 1) * CHUNK).min(pairs.len())] {
                if let Some(k) = self.bin_of(t2 - t1) {
                    local[k] += 1;
                }
            }
            local
        });
        for local in partial {
            for (a, b) in self.counts.iter_mut().zip(local) {
                *a += b;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts summed over bins whose centre lies within `±window_ns` of `center_ns`.
    pub fn area(&self, center_ns: f64, window_ns: f64) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .filter(|(k, _)| (self.delay_ns(*k) - center_ns).abs() <= window_ns + 1e-9 * self.bin_width_ns)
            .map(|(_, c)| *c)
            .sum()
    }

    fn same_binning(&self, other: &Self) -> bool {
        self.bin_width_ns == other.bin_width_ns
            && self.repetition_period_ns == other.repetition_period_ns
            && self.zero_delay_bin == other.zero_delay_bin
            && self.counts.len() == other.counts.len()
    }

    /// Default integration half-window, a quarter of the repetition period.
    pub fn default_window_ns(&self) -> f64 {
        self.repetition_period_ns / 4.0
    }

    /// Writes `delay_ns,counts`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "delay_ns,counts")?;
        for (k, c) in self.counts.iter().enumerate() {
            writeln!(w, "{},{c}", sig9(self.delay_ns(k)))?;
        }
        Ok(())
    }

    /// Reads pre-binned `delay_ns,counts` rows on a uniform grid that
    /// contains zero delay.
    pub fn read_csv(text: &str, repetition_period_ns: f64) -> Result<Self> {
        let rows = csv_pairs(text, "delay_ns,counts")?;
        if rows.len() < 2 {
            return Err(Error::invalid("histogram needs at least two bins"));
        }
        let width = rows[1].0 - rows[0].0;
        if !(width > 0.0) {
            return Err(Error::invalid("delays must increase"));
        }
        for (k, (d, _)) in rows.iter().enumerate() {
            if (d - rows[0].0 - k as f64 * width).abs() > 1e-6 * width {
                return Err(Error::invalid(format!("non-uniform delay at row {}", k + 1)));
            }
        }
        let zero = (-rows[0].0 / width).round();
        if zero < 0.0 || zero as usize >= rows.len() || (rows[0].0 + zero * width).abs() > 1e-6 * width {
            return Err(Error::invalid("histogram has no zero-delay bin"));
        }
        let counts = rows
            .iter()
            .enumerate()
            .map(|(k, (_, c))| {
                if *c >= 0.0 && c.fract() == 0.0 {
                    Ok(*c as u64)
                } else {
                    Err(Error::invalid(format!("count at row {} is not a non-negative integer", k + 1)))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(width, repetition_period_ns, zero as usize, counts)
    }
}

/// Reads two-column numeric CSV, skipping an optional header line.
fn csv_pairs(text: &str, header: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.replace(' ', "") == header) {
            continue;
        }
        let mut it = line.split(',').map(str::trim);
        let parsed = match (it.next(), it.next(), it.next()) {
            (Some(a), Some(b), None) => a.parse::<f64>().ok().zip(b.parse::<f64>().ok()),
            _ => None,
        };
        out.push(parsed.ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected {header}: {line}") })?);
    }
    Ok(out)
}

/// Reads timestamp pairs `t1_ns,t2_ns`.
pub fn read_timestamp_pairs(text: &str) -> Result<Vec<(f64, f64)>> {
    csv_pairs(text, "t1_ns,t2_ns")
}

/// Parameters of a simulated pulsed correlation measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticHistogram {
    pub bin_width_ns: f64,
    pub repetition_period_ns: f64,
    /// Side peaks on each side of zero delay.
    pub side_peaks: usize,
    /// Expected counts in each side peak.
    pub side_area: f64,
    /// Zero-delay area relative to a side peak.
    pub zero_ratio: f64,
    /// 1/e decay time of each two-sided exponential peak.
    pub peak_decay_ns: f64,
}

impl SyntheticHistogram {
    /// Expected counts per bin, each peak normalised to its area over the
    /// full histogram.
    fn expected(&self) -> Result<(CoincidenceHistogram, Vec<f64>)> {
        if !(self.side_area >= 0.0 && self.zero_ratio >= 0.0 && self.peak_decay_ns > 0.0) || self.side_peaks == 0 {
            return Err(Error::invalid("synthetic histogram needs side peaks, non-negative areas and a positive decay"));
        }
        let half = (self.side_peaks as f64 + 0.5) * self.repetition_period_ns;
        let h = CoincidenceHistogram::empty(self.bin_width_ns, self.repetition_period_ns, half)?;
        let n = self.side_peaks as i64;
        let mut mean = vec![0.0; h.counts.len()];
        for p in -n..=n {
            let area = if p == 0 { self.zero_ratio * self.side_area } else { self.side_area };
            let center = p as f64 * self.repetition_period_ns;
            let shape: Vec<f64> = (0..mean.len())
                .map(|k| (-(h.delay_ns(k) - center).abs() / self.peak_decay_ns).exp())
                .collect();
            let norm: f64 = shape.iter().sum();
            for (m, s) in mean.iter_mut().zip(shape) {
                *m += area * s / norm;
            }
        }
        Ok((h, mean))
    }

    /// Noise-free histogram with each bin rounded to the nearest count.
    pub fn ideal(&self) -> Result<CoincidenceHistogram> {
        let (mut h, mean) = self.expected()?;
        h.counts = mean.iter().map(|m| m.round() as u64).collect();
        Ok(h)
    }

    /// Poisson-sampled histogram from a seeded ChaCha stream.
    pub fn sample(&self, seed: u64) -> Result<CoincidenceHistogram> {
        let (mut h, mean) = self.expected()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        h.counts = mean
            .iter()
            .map(|&m| if m > 0.0 { Poisson::new(m).map(|d| d.sample(&mut rng) as u64).unwrap_or(0) } else { 0 })
            .collect();
        Ok(h)
    }
}

fn check_window(h: &CoincidenceHistogram, window_ns: f64) -> Result<()> {
    h.validate()?;
    if !(window_ns > 0.0 && window_ns < h.repetition_period_ns / 2.0) {
        return Err(Error::invalid(format!(
            "window {window_ns} ns must lie in (0, {}) ns",
            h.repetition_period_ns / 2.0
        )));
    }
    Ok(())
}

/// Zero-delay peak area over the mean area of the side peaks whose window
/// lies fully inside the histogram.
pub fn g2_zero(h: &CoincidenceHistogram, window_ns: f64) -> Result<f64> {
    check_window(h, window_ns)?;
    if h.total() == 0 {
        return Err(Error::invalid("histogram is empty"));
    }
    let lo = h.delay_ns(0);
    let hi = h.delay_ns(h.counts.len() - 1);
    let mut sides = Vec::new();
    for sign in [-1.0, 1.0] {
        for p in 1.. {
            let c = sign * p as f64 * h.repetition_period_ns;
            if c - window_ns < lo - 0.5 * h.bin_width_ns || c + window_ns > hi + 0.5 * h.bin_width_ns {
                break;
            }
            sides.push(h.area(c, window_ns) as f64);
        }
    }
    if sides.len() < 2 {
        return Err(Error::invalid("histogram holds fewer than two complete side peaks"));
    }
    let mean = sides.iter().sum::<f64>() / sides.len() as f64;
    if mean == 0.0 {
        return Err(Error::invalid("side peaks are empty"));
    }
    Ok(h.area(0.0, window_ns) as f64 / mean)
}

/// `1 − A_∥/A_⊥` from the zero-delay areas of co- and cross-polarised runs.
pub fn v_raw(parallel: &CoincidenceHistogram, perpendicular: &CoincidenceHistogram, window_ns: f64) -> Result<f64> {
    check_window(parallel, window_ns)?;
    check_window(perpendicular, window_ns)?;
    if !parallel.same_binning(perpendicular) {
        return Err(Error::invalid("parallel and perpendicular histograms use different binning"));
    }
    v_raw_from_areas(parallel.area(0.0, window_ns) as f64, perpendicular.area(0.0, window_ns) as f64)
}

pub fn v_raw_from_areas(area_parallel: f64, area_perpendicular: f64) -> Result<f64> {
    if !(area_perpendicular > 0.0) {
        return Err(Error::invalid("perpendicular zero-delay area is zero"));
    }
    if !(area_parallel >= 0.0) {
        return Err(Error::invalid("parallel area must be ≥ 0"));
    }
    Ok(1.0 - area_parallel / area_perpendicular)
}

/// Beamsplitter and source imperfections of a HOM measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomSetup {
    pub reflectance: f64,
    pub transmittance: f64,
    /// `1 −` classical interferometer visibility.
    pub epsilon: f64,
    pub g2_zero: f64,
}

impl HomSetup {
    pub fn validate(&self) -> Result<()> {
        let (r, t) = (self.reflectance, self.transmittance);
        if !(r > 0.0 && r < 1.0 && t > 0.0 && t < 1.0) {
            return Err(Error::invalid("R and T must lie in (0, 1)"));
        }
        if (r + t - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("R + T = {} ≠ 1", r + t)));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::invalid(format!("ε must lie in [0, 1), got {}", self.epsilon)));
        }
        if !(self.g2_zero >= 0.0) {
            return Err(Error::invalid("g²(0) must be ≥ 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VisibilityFormula {
    /// Beamsplitter factor `(R² + T²)/(2RT)`.
    Exact,
    /// Beamsplitter factor `1 + 2(R − T)²`, valid near R = T = ½.
    NearBalanced,
}

/// `V = (1+2g²(0)) · B(R,T) · V_raw / (1−ε)²`.
pub fn corrected_visibility(v_raw: f64, setup: &HomSetup, formula: VisibilityFormula) -> Result<f64> {
    setup.validate()?;
    let (r, t) = (setup.reflectance, setup.transmittance);
    let splitter = match formula {
        VisibilityFormula::Exact => (r * r + t * t) / (2.0 * r * t),
        VisibilityFormula::NearBalanced => 1.0 + 2.0 * (r - t).powi(2),
    };
    Ok((1.0 + 2.0 * setup.g2_zero) * splitter * v_raw / (1.0 - setup.epsilon).powi(2))
}

/// Corrected visibility with ε moved by `±epsilon_uncertainty`; returns
/// `(low, high)`.
pub fn visibility_band(v_raw: f64, setup: &HomSetup, epsilon_uncertainty: f64) -> Result<(f64, f64)> {
    let at = |eps: f64| corrected_visibility(v_raw, &HomSetup { epsilon: eps.max(0.0), ..*setup }, VisibilityFormula::Exact);
    Ok((at(setup.epsilon - epsilon_uncertainty)?, at(setup.epsilon + epsilon_uncertainty)?))
}

/// `(1 + 2g²(0)) · V_raw`, applied to an already interferometer-corrected
/// raw visibility.
pub fn approx_visibility(v_raw: f64, g2_zero: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v_raw) || !(g2_zero >= 0.0) {
        return Err(Error::invalid("need V_raw in [0, 1] and g²(0) ≥ 0"));
    }
    Ok((1.0 + 2.0 * g2_zero) * v_raw)
}

/// Single-photon detector with a count-rate dependent correction pinned at
/// two calibration points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub efficiency: f64,
    pub efficiency_uncertainty: f64,
    /// Rate below which no correction applies (counts/s).
    pub linear_rate: f64,
    /// Highest calibrated rate (counts/s).
    pub calibrated_rate: f64,
    /// Correction factor at `calibrated_rate`.
    pub calibrated_factor: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            efficiency: 0.42,
            efficiency_uncertainty: 0.03,
            linear_rate: 0.2e6,
            calibrated_rate: 25e6,
            calibrated_factor: 3.32,
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::invalid(format!("efficiency must lie in (0, 1], got {}", self.efficiency)));
        }
        if !(self.efficiency_uncertainty >= 0.0) {
            return Err(Error::invalid("efficiency uncertainty must be ≥ 0"));
        }
        if !(self.linear_rate >= 0.0 && self.calibrated_rate > self.linear_rate && self.calibrated_factor >= 1.0) {
            return Err(Error::invalid("need 0 ≤ linear rate < calibrated rate and calibrated factor ≥ 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorCorrection {
    pub factor: f64,
    /// The rate lies above the highest calibration point.
    pub extrapolated: bool,
}

/// `1 + (f₂ − 1)·((r − r₁)/(r₂ − r₁))²` above `r₁`, 1 below.
pub fn detector_correction(rate: f64, model: &DetectorModel) -> Result<DetectorCorrection> {
    model.validate()?;
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::invalid(format!("count rate must be finite and ≥ 0, got {rate}")));
    }
    let x = ((rate - model.linear_rate) / (model.calibrated_rate - model.linear_rate)).max(0.0);
    Ok(DetectorCorrection {
        factor: 1.0 + (model.calibrated_factor - 1.0) * x * x,
        extrapolated: rate > model.calibrated_rate,
    })
}

/// `P / (hν)` in photons per second.
pub fn photon_flux(power_w: f64, frequency_hz: f64) -> Result<f64> {
    if !(power_w > 0.0 && frequency_hz > 0.0) {
        return Err(Error::invalid("power and frequency must be positive"));
    }
    Ok(power_w / (PLANCK * frequency_hz))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemEfficiency {
    pub sigma: f64,
    /// From the detector-efficiency uncertainty alone.
    pub uncertainty: f64,
    pub correction: f64,
    pub extrapolated: bool,
}

/// `Σ = rate · c(rate) · attenuation / (η_det · rep_rate)`.
pub fn system_efficiency(count_rate: f64, rep_rate: f64, attenuation: f64, detector: &DetectorModel) -> Result<SystemEfficiency> {
    if !(rep_rate > 0.0 && attenuation > 0.0) {
        return Err(Error::invalid("repetition rate and attenuation must be positive"));
    }
    let c = detector_correction(count_rate, detector)?;
    let sigma = count_rate * c.factor * attenuation / (detector.efficiency * rep_rate);
    if sigma > 1.0 {
        return Err(Error::Inconsistent(format!("system efficiency {sigma} exceeds 1")));
    }
    Ok(SystemEfficiency {
        sigma,
        uncertainty: sigma * detector.efficiency_uncertainty / detector.efficiency,
        correction: c.factor,
        extrapolated: c.extrapolated,
    })
}

/// Detected rate that [`system_efficiency`] maps back onto `sigma`, found by
/// fixed-point iteration on the rate-dependent correction.
pub fn predicted_count_rate(sigma: f64, rep_rate: f64, attenuation: f64, detector: &DetectorModel) -> Result<f64> {
    if !(0.0..=1.0).contains(&sigma) || !(rep_rate > 0.0 && attenuation > 0.0) {
        return Err(Error::invalid("need Σ in [0, 1] and positive rate and attenuation"));
    }
    let linear = sigma * detector.efficiency * rep_rate / attenuation;
    let mut rate = linear;
    for _ in 0..200 {
        let next = linear / detector_correction(rate, detector)?.factor;
        if (next - rate).abs() <= 1e-12 * linear.max(1.0) {
            return Ok(next);
        }
        rate = next;
    }
    Err(Error::Fit("count-rate inversion did not converge".into()))
}

/// Uncertainties attached to a photon-statistics report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportUncertainties {
    /// Corrected visibility at `ε ∓ δε`.
    pub v_corrected_eq1_low: f64,
    pub v_corrected_eq1_high: f64,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonStatsReport {
    pub g2_zero: f64,
    pub v_raw: f64,
    pub v_corrected_eq1: f64,
    pub v_corrected_eq2: f64,
    pub sigma: Option<f64>,
    pub uncertainties: ReportUncertainties,
}
