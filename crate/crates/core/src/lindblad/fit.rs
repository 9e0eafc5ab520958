//! Mapping a measured power series onto a computed Rabi curve.

use serde::{Deserialize, Serialize};

use super::RabiCurve;
use crate::optimize::golden_section_max;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerAxisFit {
    /// Model amplitude per unit √power.
    pub amplitude_per_sqrt_power: f64,
    /// Counts per unit emission probability.
    pub counts_per_probability: f64,
    /// Root-mean-square residual in counts.
    pub rms_residual: f64,
}

const SCAN_POINTS: usize = 2000;

/// Least-squares fit of `counts ≈ β · P(α · √power)`.
///
/// For fixed α the count scale β is linear and solved in closed form; α is
/// found by a dense scan followed by golden-section refinement. α is limited
/// so that the largest measured √power stays inside the computed curve.
pub fn fit_power_axis(curve: &RabiCurve, measured: &[(f64, f64)]) -> Result<PowerAxisFit> {
    if measured.len() < 3 {
        return Err(Error::Fit("need at least three measured points".into()));
    }
    if curve.amplitudes.len() < 3 || curve.probabilities.iter().any(|p| !p.is_finite()) {
        return Err(Error::Fit("model curve needs at least three finite samples".into()));
    }
    if measured.iter().any(|(x, c)| !(x.is_finite() && c.is_finite() && *x >= 0.0)) {
        return Err(Error::Fit("measured series must be finite with √power ≥ 0".into()));
    }
    let (imax, cmax) = measured
        .iter()
        .enumerate()
        .map(|(i, (_, c))| (i, *c))
        .fold((0, f64::NEG_INFINITY), |b, v| if v.1 > b.1 { v } else { b });
    if imax == 0 || imax == measured.len() - 1 || !(cmax > measured[0].1 && cmax > measured[measured.len() - 1].1) {
        return Err(Error::NoMaximum("measured series has no interior maximum".into()));
    }

    let x_max = measured.iter().map(|m| m.0).fold(0.0, f64::max);
    let a_max = curve.amplitudes[curve.amplitudes.len() - 1];
    if !(x_max > 0.0 && a_max > 0.0) {
        return Err(Error::Fit("degenerate amplitude range".into()));
    }
    let alpha_hi = a_max / x_max;

    let solve = |alpha: f64| -> (f64, f64) {
        let mut spp = 0.0;
        let mut scp = 0.0;
        let mut p = Vec::with_capacity(measured.len());
        for &(x, c) in measured {
            let v = curve.interpolate(alpha * x).unwrap_or(f64::NAN);
            spp += v * v;
            scp += c * v;
            p.push(v);
        }
        if !(spp > 0.0) {
            return (0.0, f64::INFINITY);
        }
        let beta = scp / spp;
        let cost = measured.iter().zip(&p).map(|((_, c), v)| (c - beta * v).powi(2)).sum();
        (beta, cost)
    };

    let grid: Vec<f64> = (1..=SCAN_POINTS).map(|k| alpha_hi * k as f64 / SCAN_POINTS as f64).collect();
    let (kbest, _) = grid
        .iter()
        .enumerate()
        .map(|(k, &a)| (k, solve(a).1))
        .fold((0, f64::INFINITY), |b, v| if v.1 < b.1 { v } else { b });
    let lo = if kbest == 0 { grid[0] * 0.5 } else { grid[kbest - 1] };
    let hi = grid[(kbest + 1).min(SCAN_POINTS - 1)];
    let (alpha, _) = golden_section_max(|a| -solve(a).1, lo, hi, 1e-10 * alpha_hi);
    let (beta, cost) = solve(alpha);
    if !cost.is_finite() {
        return Err(Error::Fit("no amplitude scale reproduces the series".into()));
    }
    Ok(PowerAxisFit {
        amplitude_per_sqrt_power: alpha,
        counts_per_probability: beta,
        rms_residual: (cost / measured.len() as f64).sqrt(),
    })
}
