//! Gaussian-beam description of the cavity output mode.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::optimize::{levenberg_marquardt, LmOptions};
use crate::{Error, Result};

/// One sample of the field magnitude: radial and axial position in µm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub r_um: f64,
    pub z_um: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBeamFit {
    pub waist_um: f64,
    pub amplitude: f64,
    /// Euclidean norm of the residual vector.
    pub residual_norm: f64,
}

/// `z_R = n π w0² / λ0` in µm.
pub fn rayleigh_range(waist_um: f64, medium_index: f64, wavelength_nm: f64) -> f64 {
    medium_index * PI * waist_um * waist_um / (wavelength_nm * 1e-3)
}

/// `|E0| (w0/w(z)) exp(−r²/w(z)²)`.
pub fn gaussian_beam_magnitude(
    amplitude: f64,
    waist_um: f64,
    medium_index: f64,
    wavelength_nm: f64,
    r_um: f64,
    z_um: f64,
) -> f64 {
    let zr = rayleigh_range(waist_um, medium_index, wavelength_nm);
    let w2 = waist_um * waist_um * (1.0 + (z_um / zr).powi(2));
    amplitude * waist_um / w2.sqrt() * (-r_um * r_um / w2).exp()
}

/// Least-squares fit of waist and amplitude to sampled field magnitudes.
///
/// The waist is started from the second moment of the samples nearest the
/// focal plane and from four rescaled copies of that guess; the lowest
/// residual wins.
pub fn fit_gaussian_mode(samples: &[FieldSample], medium_index: f64, wavelength_nm: f64) -> Result<GaussianBeamFit> {
    if samples.len() < 3 {
        return Err(Error::Fit("need at least three field samples".into()));
    }
    if !(medium_index > 0.0 && wavelength_nm > 0.0) {
        return Err(Error::invalid("medium index and wavelength must be positive"));
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s.magnitude), b.max(s.magnitude)));
    if !(hi > 0.0) || !hi.is_finite() || hi - lo <= 1e-12 * hi {
        return Err(Error::Fit("field is flat; no beam to fit".into()));
    }

    // Second moment of |E|² in r at the plane closest to the waist.
    let z0 = samples.iter().map(|s| s.z_um.abs()).fold(f64::INFINITY, f64::min);
    let plane: Vec<&FieldSample> = samples.iter().filter(|s| (s.z_um.abs() - z0).abs() < 1e-9).collect();
    let (m0, m2) = plane
        .iter()
        .fold((0.0, 0.0), |(a, b), s| (a + s.magnitude.powi(2), b + s.magnitude.powi(2) * s.r_um.powi(2)));
    let w_guess = if m0 > 0.0 && m2 > 0.0 { 2.0 * (m2 / m0).sqrt() } else { 1.0 };

    let residuals = |p: &[f64], out: &mut [f64]| {
        for (o, s) in out.iter_mut().zip(samples) {
            *o = if p[1] > 0.0 {
                gaussian_beam_magnitude(p[0], p[1], medium_index, wavelength_nm, s.r_um, s.z_um) - s.magnitude
            } else {
                f64::NAN
            };
        }
    };
    let opts = LmOptions::default();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for scale in [1.0, 0.5, 0.75, 1.5, 2.0] {
        let Ok(sol) = levenberg_marquardt(residuals, &[hi, w_guess * scale], samples.len(), &opts) else {
            continue;
        };
        if sol.params[1] > 0.0 && sol.cost.is_finite() && best.as_ref().is_none_or(|b| sol.cost < b.0) {
            best = Some((sol.cost, sol.params));
        }
    }
    let (cost, p) = best.ok_or_else(|| Error::Fit("no start converged to a positive waist".into()))?;

    let zr = rayleigh_range(p[1], medium_index, wavelength_nm);
    let (zmin, zmax) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s.z_um), b.max(s.z_um)));
    if zmax - zmin < 2.0 * zr {
        return Err(Error::invalid(format!(
            "samples span {:.3} µm axially, less than two Rayleigh ranges ({:.3} µm)",
            zmax - zmin,
            2.0 * zr
        )));
    }
    Ok(GaussianBeamFit { waist_um: p[1], amplitude: p[0], residual_norm: cost.sqrt() })
}

/// Far-field divergence `NA = λ0 / (π w0)`.
pub fn numerical_aperture(waist_um: f64, wavelength_nm: f64) -> Result<f64> {
    if !(waist_um > 0.0 && wavelength_nm > 0.0) {
        return Err(Error::invalid("waist and wavelength must be positive"));
    }
    Ok(wavelength_nm * 1e-3 / (PI * waist_um))
}

/// Focal length of the fibre lens that maps the cavity waist onto the fibre
/// mode: `f_obj · w_fibre / w_cavity`.
pub fn fiber_matching_focal_length(objective_focal_mm: f64, fiber_mode_um: f64, waist_um: f64) -> Result<f64> {
    if !(objective_focal_mm > 0.0 && fiber_mode_um > 0.0 && waist_um > 0.0) {
        return Err(Error::invalid("focal length and mode radii must be positive"));
    }
    Ok(objective_focal_mm * fiber_mode_um / waist_um)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn synthetic_beam(w0: f64, n: f64, lambda: f64) -> Vec<FieldSample> {
        let mut v = Vec::new();
        for iz in 0..=24 {
            for ir in 0..=30 {
                let (r, z) = (ir as f64 * 0.1, iz as f64 * 0.5);
                v.push(FieldSample { r_um: r, z_um: z, magnitude: gaussian_beam_magnitude(1.0, w0, n, lambda, r, z) });
            }
        }
        v
    }

    #[test]
    fn recovers_waist_exactly() {
        let s = synthetic_beam(1.05, 1.4761, 920.0);
        let fit = fit_gaussian_mode(&s, 1.4761, 920.0).unwrap();
        assert!((fit.waist_um - 1.05).abs() < 1e-6);
        assert!((fit.amplitude - 1.0).abs() < 1e-6);
    }

    #[test]
    fn noisy_waist_within_one_percent() {
        let clean = synthetic_beam(1.05, 1.4761, 920.0);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let s: Vec<FieldSample> = clean
                .iter()
                .map(|p| FieldSample { magnitude: p.magnitude * (1.0 + noise.sample(&mut rng)), ..*p })
                .collect();
            let fit = fit_gaussian_mode(&s, 1.4761, 920.0).unwrap();
            assert!((fit.waist_um / 1.05 - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn flat_field_rejected() {
        let s: Vec<FieldSample> =
            (0..50).map(|k| FieldSample { r_um: k as f64 * 0.1, z_um: (k / 10) as f64, magnitude: 1.0 }).collect();
        assert!(fit_gaussian_mode(&s, 1.4761, 920.0).is_err());
    }

    #[test]
    fn short_axial_span_rejected() {
        let s: Vec<FieldSample> = synthetic_beam(1.05, 1.4761, 920.0).into_iter().filter(|p| p.z_um <= 3.0).collect();
        assert!(fit_gaussian_mode(&s, 1.4761, 920.0).is_err());
    }

    #[test]
    fn numerical_aperture_values() {
        assert!((numerical_aperture(1.05, 920.0).unwrap() - 0.279).abs() < 1e-3);
        let w = 0.92 / PI;
        assert!((numerical_aperture(w, 920.0).unwrap() - 1.0).abs() < 1e-12);
        let a = numerical_aperture(1.0, 920.0).unwrap();
        let b = numerical_aperture(2.0, 920.0).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fiber_lens() {
        let f = fiber_matching_focal_length(4.51, 2.71, 1.05).unwrap();
        assert!((f - 11.64).abs() < 0.01);
        assert_eq!(fiber_matching_focal_length(4.51, 1.05, 1.05).unwrap(), 4.51);
        let hi = fiber_matching_focal_length(4.51, 2.71 * 1.1, 1.05).unwrap();
        assert!((hi / f - 1.1).abs() < 1e-12);
        assert!(fiber_matching_focal_length(0.0, 1.0, 1.0).is_err());
    }
}
