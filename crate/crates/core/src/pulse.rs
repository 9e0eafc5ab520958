//! Laser pulses and the drive envelope seen by the emitter after filtering by
//! the detuned (V-polarised) cavity mode.
//!
//! Everything lives in the frame rotating at the emitter frequency. Detunings
//! are ordinary frequencies in GHz and times are in ps, so a detuning `δ`
//! contributes the phase `exp(−i·2π·δ·t·10⁻³)`. Drive amplitudes are angular
//! Rabi frequencies in rad/ns.

use std::f64::consts::{LN_2, PI};
use std::io::{BufRead, Write};

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::format::sig9;
use crate::{Error, Result, C64};

/// GHz·ps → cycles.
const GHZ_PS: f64 = 1e-3;

/// Ring-down appended after filtering, in amplitude e-folds; e⁻¹⁴ < 10⁻⁶.
pub const RINGDOWN_EFOLDS: f64 = 14.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserPulse {
    /// Intensity FWHM (ps).
    pub fwhm_ps: f64,
    /// Laser detuning from the emitter, Δ_L/(2π) (GHz).
    pub detuning_ghz: f64,
    /// Peak Rabi frequency of the unfiltered pulse (rad/ns).
    pub amplitude: f64,
    pub center_ps: f64,
}

impl LaserPulse {
    pub fn new(fwhm_ps: f64, detuning_ghz: f64, amplitude: f64, center_ps: f64) -> Result<Self> {
        if !(fwhm_ps > 0.0) {
            return Err(Error::invalid(format!("pulse width must be positive, got {fwhm_ps}")));
        }
        if !(amplitude >= 0.0) {
            return Err(Error::invalid(format!("pulse amplitude must be non-negative, got {amplitude}")));
        }
        if !detuning_ghz.is_finite() || !center_ps.is_finite() {
            return Err(Error::invalid("pulse detuning and centre must be finite"));
        }
        Ok(Self { fwhm_ps, detuning_ghz, amplitude, center_ps })
    }

    /// Transform-limited spectral intensity FWHM (GHz).
    pub fn spectral_fwhm_ghz(&self) -> f64 {
        2.0 * LN_2 / PI / (self.fwhm_ps * GHZ_PS)
    }

    /// `t_p / 200`, capped at 0.05 ps.
    pub fn default_step_ps(&self) -> f64 {
        (self.fwhm_ps / 200.0).min(0.05)
    }

    /// Grid spanning ±5 FWHM around the pulse centre at the default step.
    pub fn default_grid(&self) -> TimeGrid {
        let step = self.default_step_ps();
        let half = 5.0 * self.fwhm_ps;
        TimeGrid::covering(self.center_ps - half, self.center_ps + half, step)
            .expect("positive step and span")
    }

    pub fn field_at(&self, t: f64) -> C64 {
        let x = (t - self.center_ps) / self.fwhm_ps;
        let env = self.amplitude * (-2.0 * LN_2 * x * x).exp();
        C64::from_polar(env, -2.0 * PI * self.detuning_ghz * t * GHZ_PS)
    }
}

/// Uniform time grid `start + k·step`, `k = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start_ps: f64,
    pub step_ps: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(start_ps: f64, step_ps: f64, len: usize) -> Result<Self> {
        if !(step_ps > 0.0) || len < 2 {
            return Err(Error::invalid("time grid needs a positive step and at least two points"));
        }
        Ok(Self { start_ps, step_ps, len })
    }

    /// Smallest grid with the given step that covers `[start, end]`.
    pub fn covering(start_ps: f64, end_ps: f64, step_ps: f64) -> Result<Self> {
        if !(end_ps > start_ps) {
            return Err(Error::invalid("grid end must exceed its start"));
        }
        let len = ((end_ps - start_ps) / step_ps).ceil() as usize + 1;
        Self::new(start_ps, step_ps, len)
    }

    pub fn end_ps(&self) -> f64 {
        self.start_ps + self.step_ps * (self.len - 1) as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start_ps + self.step_ps * k as f64
    }
}

/// The V-polarised mode that filters the pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityFilter {
    /// Mode detuning from the emitter (GHz, negative = red).
    pub detuning_ghz: f64,
    /// Energy decay rate κ/(2π) (GHz).
    pub kappa_ghz: f64,
}

impl CavityFilter {
    pub fn new(detuning_ghz: f64, kappa_ghz: f64) -> Result<Self> {
        if !(kappa_ghz > 0.0) || !kappa_ghz.is_finite() {
            return Err(Error::invalid(format!("filter linewidth must be positive, got {kappa_ghz}")));
        }
        if !detuning_ghz.is_finite() {
            return Err(Error::invalid("filter detuning must be finite"));
        }
        Ok(Self { detuning_ghz, kappa_ghz })
    }

    /// Field decay rate πκ (1/ps).
    pub fn field_decay_per_ps(&self) -> f64 {
        PI * self.kappa_ghz * GHZ_PS
    }

    /// Complex pole `πκ + i·2π·δ_c` (1/ps) of the single-pole response.
    fn pole(&self) -> C64 {
        C64::new(self.field_decay_per_ps(), 2.0 * PI * self.detuning_ghz * GHZ_PS)
    }

    /// Response to a component `exp(−i·2π·ν·t)`: `πκ / (πκ + i·2π(δ_c − ν))`.
    pub fn gain(&self, nu_ghz: f64) -> C64 {
        let p = self.field_decay_per_ps();
        C64::new(p, 0.0) / (self.pole() - C64::new(0.0, 2.0 * PI * nu_ghz * GHZ_PS))
    }

    /// Length of ring-down appended by filtering (ps).
    pub fn ringdown_ps(&self) -> f64 {
        RINGDOWN_EFOLDS / self.field_decay_per_ps()
    }
}

/// Impulse response used by the frequency-domain filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FilterKernel {
    /// Positive-frequency part of `e^{−κt/2} cos ω_c t` (the default model).
    SinglePole,
    /// Full real kernel; the counter-rotating partner sits at `−(2·carrier + δ_c)`.
    FullCosine { carrier_ghz: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct EnvelopeSource {
    pub pulse: Option<LaserPulse>,
    pub filter: Option<CavityFilter>,
}

/// Uniformly sampled complex drive `Ω(t)`; `omega` holds Ω⁺, and Ω⁻ is its conjugate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveEnvelope {
    pub start_ps: f64,
    pub step_ps: f64,
    pub omega: Vec<C64>,
    pub source: EnvelopeSource,
}

impl DriveEnvelope {
    pub fn from_samples(start_ps: f64, step_ps: f64, omega: Vec<C64>) -> Result<Self> {
        if !(step_ps > 0.0) || omega.len() < 2 {
            return Err(Error::invalid("envelope needs a positive step and at least two samples"));
        }
        Ok(Self { start_ps, step_ps, omega, source: EnvelopeSource::default() })
    }

    /// Builds an envelope from explicit sample times, which must be uniform.
    pub fn from_times(times: &[f64], omega: Vec<C64>) -> Result<Self> {
        if times.len() != omega.len() || times.len() < 2 {
            return Err(Error::invalid("times and samples must have equal length ≥ 2"));
        }
        let step = times[1] - times[0];
        if !(step > 0.0) {
            return Err(Error::invalid("time grid must be strictly increasing"));
        }
        for (k, w) in times.windows(2).enumerate() {
            if ((w[1] - w[0]) - step).abs() > 1e-9 * step.abs().max(1.0) {
                return Err(Error::invalid(format!("non-uniform time grid at sample {}", k + 1)));
            }
        }
        Self::from_samples(times[0], step, omega)
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn end_ps(&self) -> f64 {
        self.start_ps + self.step_ps * (self.omega.len() - 1) as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.omega.len()).map(move |k| self.start_ps + self.step_ps * k as f64)
    }

    /// Linear interpolation; zero outside the sampled window.
    pub fn value_at(&self, t: f64) -> C64 {
        let x = (t - self.start_ps) / self.step_ps;
        if !(x >= 0.0) {
            return C64::new(0.0, 0.0);
        }
        let k = x.floor() as usize;
        let last = self.omega.len() - 1;
        if k > last {
            return C64::new(0.0, 0.0);
        }
        if k == last {
            return if x - last as f64 <= 1e-9 { self.omega[last] } else { C64::new(0.0, 0.0) };
        }
        let f = x - k as f64;
        self.omega[k] * (1.0 - f) + self.omega[k + 1] * f
    }

    /// `|Ω(t)|` with linear interpolation of the sampled magnitudes.
    pub fn magnitude_at(&self, t: f64) -> f64 {
        let x = (t - self.start_ps) / self.step_ps;
        if !(x >= 0.0) {
            return 0.0;
        }
        let k = x.floor() as usize;
        let last = self.omega.len() - 1;
        if k >= last {
            return if k == last && x - last as f64 <= 1e-9 { self.omega[last].norm() } else { 0.0 };
        }
        let f = x - k as f64;
        self.omega[k].norm() * (1.0 - f) + self.omega[k + 1].norm() * f
    }

    pub fn peak_magnitude(&self) -> f64 {
        self.omega.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `∫|Ω|² dt` by the trapezoidal rule.
    pub fn energy(&self) -> f64 {
        let s: f64 = self.omega.iter().map(|z| z.norm_sqr()).sum();
        let ends = self.omega[0].norm_sqr() + self.omega[self.omega.len() - 1].norm_sqr();
        (s - 0.5 * ends) * self.step_ps
    }

    /// FWHM of `|Ω|²` (ps), linearly interpolating the half-maximum crossings.
    pub fn intensity_fwhm_ps(&self) -> Option<f64> {
        let inten: Vec<f64> = self.omega.iter().map(|z| z.norm_sqr()).collect();
        fwhm_of_samples(&inten, self.step_ps)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t_ps,re_omega,im_omega")?;
        for (t, z) in self.times().zip(&self.omega) {
            writeln!(w, "{},{},{}", sig9(t), sig9(z.re), sig9(z.im))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut times = Vec::new();
        let mut omega = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if i == 0 || line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(Error::Parse { line: i + 1, msg: "expected t_ps,re_omega,im_omega".into() });
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse { line: i + 1, msg: format!("not a number: {s}") })
            };
            times.push(num(cols[0])?);
            omega.push(C64::new(num(cols[1])?, num(cols[2])?));
        }
        Self::from_times(&times, omega)
    }
}

/// FWHM of a sampled single-peaked curve, linearly interpolated.
pub(crate) fn fwhm_of_samples(y: &[f64], step: f64) -> Option<f64> {
    let (imax, &ymax) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(ymax > 0.0) {
        return None;
    }
    let half = ymax / 2.0;
    let mut lo = imax;
    while lo > 0 && y[lo] >= half {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < y.len() && y[hi] >= half {
        hi += 1;
    }
    if y[lo] >= half || y[hi] >= half {
        return None;
    }
    let left = lo as f64 + (half - y[lo]) / (y[lo + 1] - y[lo]);
    let right = (hi - 1) as f64 + (y[hi - 1] - half) / (y[hi - 1] - y[hi]);
    Some((right - left) * step)
}

/// Samples a transform-limited Gaussian pulse on `grid`.
pub fn gaussian_envelope(pulse: &LaserPulse, grid: &TimeGrid) -> Result<DriveEnvelope> {
    let need = 4.0 * pulse.fwhm_ps;
    if grid.start_ps > pulse.center_ps - need || grid.end_ps() < pulse.center_ps + need {
        return Err(Error::invalid(format!(
            "grid [{}, {}] ps clips the pulse; it must span ±{need} ps around {}",
            grid.start_ps,
            grid.end_ps(),
            pulse.center_ps
        )));
    }
    let omega = (0..grid.len).map(|k| pulse.field_at(grid.time(k))).collect();
    Ok(DriveEnvelope {
        start_ps: grid.start_ps,
        step_ps: grid.step_ps,
        omega,
        source: EnvelopeSource { pulse: Some(*pulse), filter: None },
    })
}

/// `∫₀¹ e^{−z(1−u)} uᵏ du` for k = 0..3.
fn exp_moments(z: C64) -> [C64; 4] {
    let mut m = [C64::new(0.0, 0.0); 4];
    if z.norm() < 1.0 {
        // Σ_j (−z)^j k! / (k+j+1)!
        for (k, mk) in m.iter_mut().enumerate() {
            let mut term = C64::new(1.0 / (k as f64 + 1.0), 0.0);
            let mut sum = term;
            for j in 1..60 {
                term = term * (-z) / (k as f64 + j as f64 + 1.0);
                sum += term;
                if term.norm() < 1e-18 * sum.norm() {
                    break;
                }
            }
            *mk = sum;
        }
    } else {
        m[0] = (C64::new(1.0, 0.0) - (-z).exp()) / z;
        for k in 1..4 {
            m[k] = (C64::new(1.0, 0.0) - m[k - 1] * k as f64) / z;
        }
    }
    m
}

/// Causal convolution with `h(t) = πκ·e^{−πκt}·e^{−i2πδ_c t}`, `t ≥ 0`.
///
/// The input is treated as a piecewise cubic (four-point Lagrange) between
/// samples and the filter ODE `y' = −(πκ + i2πδ_c) y + πκ x` is integrated
/// exactly across each interval. The output is extended by
/// [`CavityFilter::ringdown_ps`].
pub fn filter_through_cavity(env: &DriveEnvelope, filter: &CavityFilter) -> Result<DriveEnvelope> {
    CavityFilter::new(filter.detuning_ghz, filter.kappa_ghz)?;
    let h = env.step_ps;
    let n_in = env.omega.len();
    let n_ext = (filter.ringdown_ps() / h).ceil() as usize;
    let n_out = n_in + n_ext;
    let x = |k: isize| -> C64 {
        if k < 0 || k as usize >= n_in {
            C64::new(0.0, 0.0)
        } else {
            env.omega[k as usize]
        }
    };

    let q = filter.pole();
    let z = q * h;
    let decay = (-z).exp();
    let m = exp_moments(z);
    let gain = filter.field_decay_per_ps() * h;

    let mut out = Vec::with_capacity(n_out);
    let mut y = C64::new(0.0, 0.0);
    out.push(y);
    for n in 0..(n_out - 1) {
        let k = n as isize;
        let (xm, x0, x1, x2) = (x(k - 1), x(k), x(k + 1), x(k + 2));
        let a0 = x0;
        let a1 = -xm / 3.0 - x0 / 2.0 + x1 - x2 / 6.0;
        let a2 = xm / 2.0 - x0 + x1 / 2.0;
        let a3 = -xm / 6.0 + x0 / 2.0 - x1 / 2.0 + x2 / 6.0;
        y = y * decay + (a0 * m[0] + a1 * m[1] + a2 * m[2] + a3 * m[3]) * gain;
        out.push(y);
    }
    Ok(DriveEnvelope {
        start_ps: env.start_ps,
        step_ps: h,
        omega: out,
        source: EnvelopeSource { pulse: env.source.pulse, filter: Some(*filter) },
    })
}

/// Frequency-domain route: FFT, multiply by the kernel's transfer function,
/// inverse FFT. Same output grid as [`filter_through_cavity`].
pub fn filter_in_frequency_domain(
    env: &DriveEnvelope,
    filter: &CavityFilter,
    kernel: FilterKernel,
) -> Result<DriveEnvelope> {
    CavityFilter::new(filter.detuning_ghz, filter.kappa_ghz)?;
    let h = env.step_ps;
    let n_in = env.omega.len();
    let n_ext = (filter.ringdown_ps() / h).ceil() as usize;
    let n_out = n_in + n_ext;
    // Padding long enough that the periodised kernel tail is below 1e-12.
    let wrap = (28.0 / filter.field_decay_per_ps() / h).ceil() as usize;
    let n_fft = (n_out + wrap).next_power_of_two();

    let mut buf = vec![C64::new(0.0, 0.0); n_fft];
    buf[..n_in].copy_from_slice(&env.omega);
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n_fft).process(&mut buf);

    let p = filter.field_decay_per_ps();
    for (k, v) in buf.iter_mut().enumerate() {
        let kk = if k < n_fft / 2 { k as f64 } else { k as f64 - n_fft as f64 };
        // Bin k carries exp(+i2πft); in the exp(−i2πνt) convention ν = −f.
        let f_ghz = kk / (n_fft as f64 * h) / GHZ_PS;
        let nu = -f_ghz;
        let g = match kernel {
            FilterKernel::SinglePole => filter.gain(nu),
            FilterKernel::FullCosine { carrier_ghz } => {
                let counter = C64::new(p, 0.0)
                    / C64::new(p, -2.0 * PI * (2.0 * carrier_ghz + filter.detuning_ghz + nu) * GHZ_PS);
                filter.gain(nu) + counter
            }
        };
        *v *= g;
    }
    planner.plan_fft_inverse(n_fft).process(&mut buf);
    let norm = 1.0 / n_fft as f64;
    let omega = buf[..n_out].iter().map(|z| z * norm).collect();
    Ok(DriveEnvelope {
        start_ps: env.start_ps,
        step_ps: h,
        omega,
        source: EnvelopeSource { pulse: env.source.pulse, filter: Some(*filter) },
    })
}

/// Power spectrum `|Ω(ν)|²` on the `exp(−i2πνt)` frequency axis (GHz),
/// zero-padded to at least `min_len` points, sorted by frequency.
pub fn power_spectrum(env: &DriveEnvelope, min_len: usize) -> Vec<(f64, f64)> {
    let n = min_len.max(env.omega.len()).next_power_of_two();
    let mut buf = vec![C64::new(0.0, 0.0); n];
    buf[..env.omega.len()].copy_from_slice(&env.omega);
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mut spec: Vec<(f64, f64)> = buf
        .iter()
        .enumerate()
        .map(|(k, z)| {
            let kk = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
            (-kk / (n as f64 * env.step_ps) / GHZ_PS, z.norm_sqr())
        })
        .collect();
    spec.sort_by(|a, b| a.0.total_cmp(&b.0));
    spec
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_pulse(detuning: f64) -> LaserPulse {
        LaserPulse::new(5.2, detuning, 1.0, 0.0).unwrap()
    }

    #[test]
    fn intensity_fwhm_matches_definition() {
        let p = reference_pulse(0.0);
        let g = TimeGrid::covering(-30.0, 30.0, 0.01).unwrap();
        let env = gaussian_envelope(&p, &g).unwrap();
        assert!((env.intensity_fwhm_ps().unwrap() - 5.2).abs() <= 0.01);
    }

    #[test]
    fn resonant_pulse_is_real() {
        let p = reference_pulse(0.0);
        let env = gaussian_envelope(&p, &p.default_grid()).unwrap();
        assert!(env.omega.iter().all(|z| z.im.abs() < 1e-15));
    }

    #[test]
    fn clipped_grid_rejected() {
        let p = reference_pulse(0.0);
        let g = TimeGrid::covering(-10.0, 30.0, 0.02).unwrap();
        assert!(gaussian_envelope(&p, &g).is_err());
    }

    #[test]
    fn spectral_width_formula() {
        assert!((reference_pulse(0.0).spectral_fwhm_ghz() - 84.8).abs() < 0.1);
    }

    #[test]
    fn non_uniform_times_rejected() {
        let t = [0.0, 0.1, 0.25];
        let w = vec![C64::new(0.0, 0.0); 3];
        assert!(DriveEnvelope::from_times(&t, w).is_err());
    }

    #[test]
    fn filter_rejects_bad_kappa() {
        assert!(CavityFilter::new(0.0, 0.0).is_err());
        assert!(CavityFilter::new(0.0, -1.0).is_err());
    }

    #[test]
    fn moments_series_and_recursion_agree() {
        // Near the switch-over both branches must give the same numbers.
        let z_small = C64::new(0.999, 0.3);
        let z_big = C64::new(1.001, 0.3);
        let a = exp_moments(z_small);
        let b = exp_moments(z_big);
        for k in 0..4 {
            assert!((a[k] - b[k]).norm() < 5e-3, "k={k}");
        }
        // Exact for k = 0.
        let z = C64::new(0.4, -0.2);
        assert!((exp_moments(z)[0] - (C64::new(1.0, 0.0) - (-z).exp()) / z).norm() < 1e-15);
    }

    #[test]
    fn csv_roundtrip() {
        let p = reference_pulse(32.0);
        let env = gaussian_envelope(&p, &p.default_grid()).unwrap();
        let mut buf = Vec::new();
        env.write_csv(&mut buf).unwrap();
        let back = DriveEnvelope::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), env.len());
        let worst = back.omega.iter().zip(&env.omega).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-8);
    }
}
