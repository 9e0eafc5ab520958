//! Characteristic-matrix optics of planar multilayers at normal incidence.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::format::sig9;
use crate::parallel::{map_indexed, Execution};
use crate::{Error, Result, C64};

/// One homogeneous film. The complex index is `n − i·k` with `k ≥ 0` the
/// extinction coefficient, so absorbing films have `k > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub index: f64,
    #[serde(default)]
    pub extinction: f64,
    pub thickness_nm: f64,
}

impl Layer {
    pub fn new(index: f64, thickness_nm: f64) -> Self {
        Self { index, extinction: 0.0, thickness_nm }
    }

    /// Quarter-wave film at `center_nm`.
    pub fn quarter_wave(index: f64, center_nm: f64) -> Self {
        Self::new(index, center_nm / (4.0 * index))
    }

    fn complex_index(&self) -> C64 {
        C64::new(self.index, -self.extinction)
    }
}

/// Films listed from the ambient (incidence) side towards the substrate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    pub ambient: f64,
    pub layers: Vec<Layer>,
    pub substrate: f64,
}

impl LayerStack {
    pub fn new(ambient: f64, substrate: f64) -> Self {
        Self { ambient, layers: Vec::new(), substrate }
    }

    pub fn push(&mut self, layer: Layer) -> &mut Self {
        self.layers.push(layer);
        self
    }

    pub fn extend<I: IntoIterator<Item = Layer>>(&mut self, layers: I) -> &mut Self {
        self.layers.extend(layers);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (what, n) in [("ambient", self.ambient), ("substrate", self.substrate)] {
            if !(n >= 1.0) || !n.is_finite() {
                return Err(Error::invalid(format!("{what} index must be ≥ 1, got {n}")));
            }
        }
        for (k, l) in self.layers.iter().enumerate() {
            if !(l.index >= 1.0) || !l.index.is_finite() {
                return Err(Error::invalid(format!("layer {k}: index must be ≥ 1, got {}", l.index)));
            }
            if !(l.extinction >= 0.0) || !l.extinction.is_finite() {
                return Err(Error::invalid(format!("layer {k}: extinction must be ≥ 0")));
            }
            if !(l.thickness_nm > 0.0) || !l.thickness_nm.is_finite() {
                return Err(Error::invalid(format!(
                    "layer {k}: thickness must be positive, got {}",
                    l.thickness_nm
                )));
            }
        }
        Ok(())
    }

    /// The same structure seen from the substrate side.
    pub fn reversed(&self) -> Self {
        Self {
            ambient: self.substrate,
            layers: self.layers.iter().rev().copied().collect(),
            substrate: self.ambient,
        }
    }

    pub fn is_lossless(&self) -> bool {
        self.layers.iter().all(|l| l.extinction == 0.0)
    }

    pub fn total_thickness_nm(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness_nm).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Side {
    #[default]
    Ambient,
    Substrate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectivityResult {
    pub wavelength_nm: f64,
    /// Amplitude reflection coefficient.
    pub r: C64,
    pub reflectance: f64,
    pub transmittance: f64,
}

/// Reflectance and transmittance at normal incidence.
pub fn stack_reflectivity(stack: &LayerStack, wavelength_nm: f64, side: Side) -> Result<ReflectivityResult> {
    if !(wavelength_nm > 0.0) || !wavelength_nm.is_finite() {
        return Err(Error::invalid(format!("wavelength must be positive, got {wavelength_nm}")));
    }
    stack.validate()?;
    Ok(match side {
        Side::Ambient => reflect(stack.ambient, stack.layers.iter(), stack.substrate, wavelength_nm),
        Side::Substrate => reflect(stack.substrate, stack.layers.iter().rev(), stack.ambient, wavelength_nm),
    })
}

fn reflect<'a>(
    n_in: f64,
    layers: impl Iterator<Item = &'a Layer>,
    n_out: f64,
    wavelength_nm: f64,
) -> ReflectivityResult {
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    // Accumulated characteristic matrix [[m00, m01], [m10, m11]].
    let (mut m00, mut m01, mut m10, mut m11) = (one, C64::new(0.0, 0.0), C64::new(0.0, 0.0), one);
    for l in layers {
        let n = l.complex_index();
        let delta = n * (2.0 * PI * l.thickness_nm / wavelength_nm);
        let (c, s) = (delta.cos(), delta.sin());
        let (a, b, cc, d) = (c, i * s / n, i * n * s, c);
        let t00 = m00 * a + m01 * cc;
        let t01 = m00 * b + m01 * d;
        let t10 = m10 * a + m11 * cc;
        let t11 = m10 * b + m11 * d;
        (m00, m01, m10, m11) = (t00, t01, t10, t11);
    }
    let eta_s = C64::new(n_out, 0.0);
    let big_b = m00 + m01 * eta_s;
    let big_c = m10 + m11 * eta_s;
    let denom = big_b * n_in + big_c;
    let r = (big_b * n_in - big_c) / denom;
    ReflectivityResult {
        wavelength_nm,
        r,
        reflectance: r.norm_sqr(),
        transmittance: 4.0 * n_in * eta_s.re / denom.norm_sqr(),
    }
}

pub fn spectrum(
    stack: &LayerStack,
    wavelengths_nm: &[f64],
    side: Side,
    exec: Execution,
) -> Result<Vec<ReflectivityResult>> {
    stack.validate()?;
    map_indexed(wavelengths_nm.len(), exec, |k| stack_reflectivity(stack, wavelengths_nm[k], side))
        .into_iter()
        .collect()
}

pub fn write_spectrum_csv<W: Write>(results: &[ReflectivityResult], mut w: W) -> Result<()> {
    writeln!(w, "wavelength_nm,R,T")?;
    for r in results {
        writeln!(w, "{},{},{}", sig9(r.wavelength_nm), sig9(r.reflectance), sig9(r.transmittance))?;
    }
    Ok(())
}

/// Evenly spaced wavelengths from `lo` to `hi` inclusive at roughly `step`.
pub fn wavelength_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(hi > lo && step > 0.0 && lo > 0.0) {
        return Err(Error::invalid(format!("bad wavelength range [{lo}, {hi}] step {step}")));
    }
    let n = ((hi - lo) / step).round().max(1.0) as usize;
    Ok((0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub wavelength_nm: f64,
    pub fwhm_nm: f64,
    pub q: f64,
    pub peak_transmittance: f64,
}

/// Finds the strongest transmission peak in `[lo, hi]` and its quality factor
/// `λ_res / Δλ_FWHM`.
///
/// The scan step must be fine enough to land at least one sample on the
/// resonance; the peak is then refined by bisection on the sign of dT/dλ and
/// the half-maximum points by bisection on `T − T_max/2`.
pub fn cavity_q(stack: &LayerStack, lo: f64, hi: f64, step: f64, exec: Execution) -> Result<Resonance> {
    let grid = wavelength_grid(lo, hi, step)?;
    let t: Vec<f64> = spectrum(stack, &grid, Side::Ambient, exec)?.iter().map(|r| r.transmittance).collect();
    let mut best: Option<usize> = None;
    for k in 1..grid.len().saturating_sub(1) {
        if t[k] > t[k - 1] && t[k] >= t[k + 1] && best.is_none_or(|b| t[k] > t[b]) {
            best = Some(k);
        }
    }
    let k = best.ok_or(Error::NoResonance { lo, hi })?;
    let trans = |l: f64| reflect(stack.ambient, stack.layers.iter(), stack.substrate, l).transmittance;

    // Peak: bisection on the sign of a central-difference slope.
    let (mut a, mut b) = (grid[k - 1], grid[k + 1]);
    let h = (b - a) * 1e-4;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if b - a < 1e-12 * mid {
            break;
        }
        let slope = trans(mid + h.min(0.25 * (b - a))) - trans(mid - h.min(0.25 * (b - a)));
        if slope > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let peak = 0.5 * (a + b);
    let t_peak = trans(peak);
    let half = 0.5 * t_peak;

    let crossing = |dir: f64| -> Result<f64> {
        let mut inner = peak;
        let mut outer = peak + dir * step;
        let limit = if dir > 0.0 { hi } else { lo };
        while trans(outer) > half {
            inner = outer;
            outer += dir * step;
            if (outer - limit) * dir > 0.0 {
                return Err(Error::NoResonance { lo, hi });
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (inner + outer);
            if (outer - inner).abs() < 1e-13 * mid {
                break;
            }
            if trans(mid) > half {
                inner = mid;
            } else {
                outer = mid;
            }
        }
        Ok(0.5 * (inner + outer))
    };
    let left = crossing(-1.0)?;
    let right = crossing(1.0)?;
    let fwhm = right - left;
    Ok(Resonance { wavelength_nm: peak, fwhm_nm: fwhm, q: peak / fwhm, peak_transmittance: t_peak })
}

/// Speed of light (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Energy decay rate κ/(2π) in GHz of a mode with quality factor `q`.
pub fn kappa_from_q(q: f64, wavelength_nm: f64) -> Result<f64> {
    if !(q > 0.0 && wavelength_nm > 0.0) {
        return Err(Error::invalid("Q and wavelength must be positive"));
    }
    Ok(SPEED_OF_LIGHT / (wavelength_nm * 1e-9) / q * 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;

    const N_H: f64 = 3.461;
    const N_L: f64 = 2.915;

    fn dbr(pairs: usize, center: f64, ambient: f64, substrate: f64) -> LayerStack {
        let mut s = LayerStack::new(ambient, substrate);
        for _ in 0..pairs {
            s.push(Layer::quarter_wave(N_H, center)).push(Layer::quarter_wave(N_L, center));
        }
        s
    }

    #[test]
    fn fresnel_interface() {
        let s = LayerStack::new(1.0, 3.461);
        let r = stack_reflectivity(&s, 920.0, Side::Ambient).unwrap();
        let exact = ((1.0 - 3.461) / (1.0 + 3.461f64)).powi(2);
        assert!((r.reflectance - exact).abs() < 1e-14);
        assert!((r.reflectance - 0.3043).abs() < 5e-5);
        assert!((r.reflectance + r.transmittance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quarter_wave_dbr_matches_closed_form() {
        // Stack (LH)^N from ambient n_a onto substrate n_s: the admittance
        // seen from the ambient is n_s (n_L/n_H)^{2N}.
        let (na, ns) = (1.0, 1.5);
        for n in [2usize, 5, 10] {
            let mut s = dbr(n, 920.0, na, ns);
            s.layers.reverse();
            let r = stack_reflectivity(&s, 920.0, Side::Ambient).unwrap();
            let x = (ns / na) * (N_L / N_H).powi(2 * n as i32);
            let exact = ((1.0 - x) / (1.0 + x)).powi(2);
            assert!((r.reflectance - exact).abs() < 1e-12, "N={n}: {} vs {exact}", r.reflectance);
        }
    }

    #[test]
    fn absorbing_layer_loses_energy() {
        let mut s = dbr(3, 920.0, 1.0, 3.461);
        s.layers[1].extinction = 1e-3;
        let r = stack_reflectivity(&s, 920.0, Side::Ambient).unwrap();
        assert!(r.reflectance + r.transmittance < 1.0 - 1e-6);
    }

    #[test]
    fn invalid_layers_rejected() {
        let mut s = LayerStack::new(1.0, 1.5);
        s.push(Layer::new(0.5, 100.0));
        assert!(stack_reflectivity(&s, 920.0, Side::Ambient).is_err());
        let mut s = LayerStack::new(1.0, 1.5);
        s.push(Layer::new(2.0, 0.0));
        assert!(stack_reflectivity(&s, 920.0, Side::Ambient).is_err());
        assert!(stack_reflectivity(&LayerStack::new(1.0, 1.5), -1.0, Side::Ambient).is_err());
    }

    #[test]
    fn empty_matched_stack_is_transparent() {
        let s = LayerStack::new(1.3, 1.3);
        for l in [400.0, 920.0, 1500.0] {
            let r = stack_reflectivity(&s, l, Side::Ambient).unwrap();
            assert!(r.reflectance < 1e-15);
        }
    }

    #[test]
    fn kappa_from_quality_factor() {
        let k = kappa_from_q(14_000.0, 920.0).unwrap();
        assert!((k - 23.3).abs() < 0.1, "{k}");
    }

    /// Symmetric mirrors around a long air spacer: Q ≈ F · 2L/λ.
    #[test]
    fn fabry_perot_quality_factor() {
        let center = 920.0;
        let mirror = |s: &mut LayerStack| {
            for _ in 0..2 {
                s.push(Layer::quarter_wave(N_H, center)).push(Layer::quarter_wave(1.45, center));
            }
            s.push(Layer::quarter_wave(N_H, center));
        };
        let half_waves = 2000.0;
        let spacer = half_waves * center / 2.0;
        let mut s = LayerStack::new(1.0, 1.0);
        mirror(&mut s);
        s.push(Layer::new(1.0, spacer));
        let mut back = LayerStack::new(1.0, 1.0);
        mirror(&mut back);
        s.extend(back.layers.iter().rev().copied());

        let mut m = LayerStack::new(1.0, 1.0);
        mirror(&mut m);
        let r1 = stack_reflectivity(&m, center, Side::Ambient).unwrap().reflectance;
        let finesse = PI * r1.sqrt() / (1.0 - r1);
        let q_exact = finesse * 2.0 * spacer / center;

        let fwhm_guess = center / q_exact;
        let res = cavity_q(&s, center - 0.1, center + 0.1, fwhm_guess / 4.0, Execution::Sequential).unwrap();
        assert!((res.wavelength_nm - center).abs() < 1e-3);
        assert!((res.q / q_exact - 1.0).abs() < 0.02, "{} vs {q_exact}", res.q);
    }

    #[test]
    fn q_stable_under_step_refinement() {
        let center = 920.0;
        let mut s = dbr(8, center, 1.0, 1.0);
        s.push(Layer::new(1.0, 20.0 * center / 2.0));
        s.extend(dbr(8, center, 1.0, 1.0).layers.iter().rev().copied());
        let coarse = cavity_q(&s, 915.0, 925.0, 0.01, Execution::Sequential).unwrap();
        let step = coarse.fwhm_nm / 25.0;
        let a = cavity_q(&s, 915.0, 925.0, step, Execution::Sequential).unwrap();
        let b = cavity_q(&s, 915.0, 925.0, step / 2.0, Execution::Sequential).unwrap();
        assert!((a.q / b.q - 1.0).abs() < 0.01);
    }

    #[test]
    fn no_resonance_in_flat_window() {
        let s = LayerStack::new(1.0, 1.5);
        assert!(matches!(
            cavity_q(&s, 900.0, 940.0, 0.1, Execution::Sequential),
            Err(Error::NoResonance { .. })
        ));
    }
}
