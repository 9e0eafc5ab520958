//! Closed-form cavity-QED figures of merit and the fits used to extract them.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::optimize::{golden_section_max, levenberg_marquardt, LmOptions};
use crate::{Error, Result};

// CODATA 2018 exact/recommended values.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const PLANCK: f64 = 6.626_070_15e-34;

/// `F_P = 4g²/(κγ)`.
pub fn purcell(g: f64, kappa: f64, gamma: f64) -> Result<f64> {
    if !(kappa > 0.0 && gamma > 0.0) {
        return Err(Error::invalid(format!("κ and γ must be positive (κ = {kappa}, γ = {gamma})")));
    }
    Ok(4.0 * g * g / (kappa * gamma))
}

/// `β = F_P/(F_P + 1)`.
pub fn beta(purcell_factor: f64) -> Result<f64> {
    if !(purcell_factor >= 0.0) {
        return Err(Error::invalid(format!("Purcell factor must be ≥ 0, got {purcell_factor}")));
    }
    if purcell_factor.is_infinite() {
        return Ok(1.0);
    }
    Ok(purcell_factor / (purcell_factor + 1.0))
}

/// Rate set of one emitter–mode system; all values x/(2π) in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CqedParams {
    pub g: f64,
    pub kappa_total: f64,
    pub kappa_top: f64,
    pub kappa_bottom: f64,
    pub gamma: f64,
    pub mode_splitting: f64,
}

impl CqedParams {
    /// A one-sided cavity: all of κ leaves through the top mirror.
    pub fn one_sided(g: f64, kappa: f64, gamma: f64) -> Self {
        Self { g, kappa_total: kappa, kappa_top: kappa, kappa_bottom: 0.0, gamma, mode_splitting: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("g", self.g),
            ("kappa_total", self.kappa_total),
            ("kappa_top", self.kappa_top),
            ("kappa_bottom", self.kappa_bottom),
            ("gamma", self.gamma),
            ("mode_splitting", self.mode_splitting),
        ];
        for (name, v) in all {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite and ≥ 0, got {v}")));
            }
        }
        if self.kappa_top + self.kappa_bottom > self.kappa_total + 1e-9 {
            return Err(Error::invalid("kappa_top + kappa_bottom exceeds kappa_total"));
        }
        Ok(())
    }
}

/// `η = β·κ/(κ+γ)`, or with `top_only` the share leaving through the top
/// mirror, `β·κ_top/(κ_total+γ)`.
pub fn conversion_efficiency(p: &CqedParams, top_only: bool) -> Result<f64> {
    p.validate()?;
    let b = beta(purcell(p.g, p.kappa_total, p.gamma)?)?;
    let out = if top_only { p.kappa_top } else { p.kappa_total };
    Ok(b * out / (p.kappa_total + p.gamma))
}

/// One-sided efficiency as a function of κ.
pub fn efficiency_vs_kappa(g: f64, gamma: f64, kappa: f64) -> Result<f64> {
    conversion_efficiency(&CqedParams::one_sided(g, kappa, gamma), false)
}

/// `κ* = 2g` and `η(κ*)`.
///
/// With `η = 4g²κ/((4g²+κγ)(κ+γ))` the stationary condition reduces to
/// `γ(4g² − κ²) = 0`, so `2g` is the exact maximiser for any γ.
pub fn optimal_kappa(g: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(g > 0.0 && gamma > 0.0) {
        return Err(Error::invalid("g and γ must be positive"));
    }
    let k = 2.0 * g;
    Ok((k, efficiency_vs_kappa(g, gamma, k)?))
}

/// Golden-section maximisation of `η(κ)` over `[lo, hi]`.
pub fn optimal_kappa_numeric(g: f64, gamma: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    if !(g > 0.0 && gamma > 0.0 && hi > lo && lo > 0.0) {
        return Err(Error::invalid("need g, γ > 0 and 0 < lo < hi"));
    }
    Ok(golden_section_max(
        |k| efficiency_vs_kappa(g, gamma, k).unwrap_or(f64::NEG_INFINITY),
        lo,
        hi,
        1e-9 * hi,
    ))
}

/// Emitter dipole and the vacuum field it sees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipoleParams {
    /// Dipole length µ/e (nm).
    pub dipole_nm: f64,
    /// Vacuum field amplitude at the emitter (V/m).
    pub vacuum_field: f64,
    pub wavelength_nm: f64,
    pub medium_index: f64,
}

impl DipoleParams {
    pub const DEFAULT_MEDIUM_INDEX: f64 = 3.67;

    pub fn validate(&self) -> Result<()> {
        if !(self.dipole_nm > 0.0 && self.wavelength_nm > 0.0 && self.medium_index > 0.0) {
            return Err(Error::invalid("dipole, wavelength and index must be positive"));
        }
        if !(self.vacuum_field >= 0.0) {
            return Err(Error::invalid("vacuum field must be ≥ 0"));
        }
        Ok(())
    }
}

/// `ħg = µ·E_vac/√2`; returns g/(2π) in GHz.
pub fn coupling_from_field(d: &DipoleParams) -> Result<f64> {
    d.validate()?;
    let mu = d.dipole_nm * 1e-9 * ELEMENTARY_CHARGE;
    Ok(mu * d.vacuum_field / (2f64.sqrt() * HBAR) / (2.0 * PI) * 1e-9)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeSpaceRate {
    /// γ in ns⁻¹.
    pub per_ns: f64,
    /// γ/(2π) in GHz.
    pub ghz: f64,
}

/// Spontaneous emission rate of a dipole in a homogeneous medium,
/// `γ = n ω³ µ² / (3π ε₀ ħ c³)`.
pub fn free_space_gamma(d: &DipoleParams) -> Result<FreeSpaceRate> {
    d.validate()?;
    let mu = d.dipole_nm * 1e-9 * ELEMENTARY_CHARGE;
    let omega = 2.0 * PI * SPEED_OF_LIGHT / (d.wavelength_nm * 1e-9);
    let rate = d.medium_index * omega.powi(3) * mu * mu / (3.0 * PI * VACUUM_PERMITTIVITY * HBAR * SPEED_OF_LIGHT.powi(3));
    Ok(FreeSpaceRate { per_ns: rate * 1e-9, ghz: rate / (2.0 * PI) * 1e-9 })
}

/// `F_P = τ_off/τ_on − 1` from lifetimes on and off resonance.
pub fn purcell_from_lifetimes(tau_on_ps: f64, tau_off_ps: f64) -> Result<f64> {
    if !(tau_on_ps > 0.0 && tau_off_ps > 0.0) {
        return Err(Error::invalid("lifetimes must be positive"));
    }
    if tau_off_ps <= tau_on_ps {
        return Err(Error::invalid("off-resonance lifetime must exceed the on-resonance one"));
    }
    Ok(tau_off_ps / tau_on_ps - 1.0)
}

/// One Lorentzian contribution to the decay rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeContribution {
    /// Peak added rate (GHz).
    pub peak_rate: f64,
    /// Cavity detuning of the peak (GHz).
    pub center: f64,
    /// Full width (GHz).
    pub linewidth: f64,
}

impl ModeContribution {
    pub fn rate_at(&self, detuning: f64) -> f64 {
        self.peak_rate / (1.0 + (2.0 * (detuning - self.center) / self.linewidth).powi(2))
    }
}

/// `γ_tot(δ) = γ₀ + Σ γ_i / (1 + (2(δ − δ_i)/κ_i)²)` over the H and V modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayVsDetuningModel {
    pub gamma0: f64,
    pub h: ModeContribution,
    pub v: ModeContribution,
}

impl DecayVsDetuningModel {
    pub fn rate(&self, detuning: f64) -> f64 {
        self.gamma0 + self.h.rate_at(detuning) + self.v.rate_at(detuning)
    }

    /// β_H with every contribution evaluated at the H resonance.
    pub fn beta_h(&self) -> f64 {
        let at = self.h.center;
        let h = self.h.rate_at(at);
        h / (h + self.gamma0 + self.v.rate_at(at))
    }

    /// `γ_H/γ₀`.
    pub fn purcell_h(&self) -> f64 {
        self.h.peak_rate / self.gamma0
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [self.gamma0, self.h.peak_rate, self.v.peak_rate];
        if rates.iter().any(|r| !(*r >= 0.0)) || !(self.h.linewidth > 0.0 && self.v.linewidth > 0.0) {
            return Err(Error::Fit("fitted rates negative or linewidths non-positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub model: DecayVsDetuningModel,
    pub beta_h: f64,
    pub purcell_h: f64,
    pub rms_residual: f64,
}

/// Seeds of the multi-start fit; fixed so fits are reproducible.
pub const DECAY_FIT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

/// Two-Lorentzian least-squares fit of decay rate versus cavity detuning.
///
/// The starting point comes from the data (baseline from the lowest rate,
/// mode centres from the two largest well-separated local maxima); four more
/// starts perturb it with seeded random factors. The lowest residual wins.
/// The mode whose centre lies closest to zero detuning is labelled H.
pub fn fit_decay_vs_detuning(samples: &[(f64, f64)]) -> Result<DecayFit> {
    if samples.len() < 7 {
        return Err(Error::Fit(format!("need at least 7 samples, got {}", samples.len())));
    }
    if samples.iter().any(|(d, r)| !(d.is_finite() && r.is_finite())) {
        return Err(Error::Fit("samples must be finite".into()));
    }
    let mut pts = samples.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let span = pts[pts.len() - 1].0 - pts[0].0;
    let base = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);

    let mut peaks: Vec<usize> = (1..pts.len() - 1)
        .filter(|&k| pts[k].1 >= pts[k - 1].1 && pts[k].1 >= pts[k + 1].1 && pts[k].1 > base)
        .collect();
    peaks.sort_by(|&a, &b| pts[b].1.total_cmp(&pts[a].1));
    let first = *peaks.first().ok_or_else(|| Error::Fit("no resonance in the data".into()))?;
    let second = peaks
        .iter()
        .copied()
        .find(|&k| (pts[k].0 - pts[first].0).abs() > 0.05 * span)
        .ok_or_else(|| Error::Fit("data do not span two resonances".into()))?;

    let half_width = |k: usize| -> f64 {
        let half = base + 0.5 * (pts[k].1 - base);
        let mut j = k;
        while j + 1 < pts.len() && pts[j].1 > half {
            j += 1;
        }
        (2.0 * (pts[j].0 - pts[k].0).abs()).max(span / pts.len() as f64)
    };
    let guess = [
        base,
        pts[first].1 - base,
        pts[first].0,
        half_width(first),
        pts[second].1 - base,
        pts[second].0,
        half_width(second),
    ];

    let model_of = |p: &[f64]| DecayVsDetuningModel {
        gamma0: p[0],
        h: ModeContribution { peak_rate: p[1], center: p[2], linewidth: p[3] },
        v: ModeContribution { peak_rate: p[4], center: p[5], linewidth: p[6] },
    };
    let residuals = |p: &[f64], out: &mut [f64]| {
        let m = model_of(p);
        for (o, (d, r)) in out.iter_mut().zip(&pts) {
            *o = m.rate(*d) - r;
        }
    };
    let opts = LmOptions { max_iterations: 2000, ..Default::default() };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (i, seed) in DECAY_FIT_SEEDS.iter().enumerate() {
        let mut start = guess.to_vec();
        if i > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for (k, v) in start.iter_mut().enumerate() {
                let f = rng.random_range(0.7..1.3);
                // Centres are shifted by a fraction of the width instead.
                if k == 2 || k == 5 {
                    *v += (f - 1.0) * guess[k + 1];
                } else {
                    *v *= f;
                }
            }
        }
        let Ok(sol) = levenberg_marquardt(residuals, &start, pts.len(), &opts) else { continue };
        if sol.cost.is_finite() && model_of(&sol.params).validate().is_ok() && best.as_ref().is_none_or(|b| sol.cost < b.0) {
            best = Some((sol.cost, sol.params));
        }
    }
    let (cost, p) = best.ok_or_else(|| Error::Fit("no start converged to a physical model".into()))?;
    let mut model = model_of(&p);
    model.h.linewidth = model.h.linewidth.abs();
    model.v.linewidth = model.v.linewidth.abs();
    if model.v.center.abs() < model.h.center.abs() {
        std::mem::swap(&mut model.h, &mut model.v);
    }
    Ok(DecayFit {
        beta_h: model.beta_h(),
        purcell_h: model.purcell_h(),
        model,
        rms_residual: (cost / pts.len() as f64).sqrt(),
    })
}

/// Reads `detuning_ghz,rate_ghz` rows (header optional).
pub fn read_decay_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match cols.as_slice() {
            [d, r] => d.parse::<f64>().ok().zip(r.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some(p) => out.push(p),
            None if i == 0 => continue,
            None => return Err(Error::Parse { line: i + 1, msg: format!("expected detuning_ghz,rate_ghz: {line}") }),
        }
    }
    Ok(out)
}

/// Factor names in the order they enter the product.
pub const BUDGET_FACTORS: [&str; 4] = ["pi_prep", "beta_h", "extraction", "eta_optics"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyBudget {
    pub pi_prep: f64,
    pub beta_h: f64,
    pub extraction: f64,
    pub eta_optics: f64,
    pub sigma: f64,
    /// ∂Σ/∂factor, i.e. the product of the other three, in factor order.
    pub sensitivities: [f64; 4],
}

/// `Σ = π · β_H · κ_top/(γ+κ_total) · η_optics`.
pub fn efficiency_budget(pi_prep: f64, beta_h: f64, extraction: f64, eta_optics: f64) -> Result<EfficiencyBudget> {
    let f = [pi_prep, beta_h, extraction, eta_optics];
    for (name, v) in BUDGET_FACTORS.iter().zip(f) {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")));
        }
    }
    let sensitivities = std::array::from_fn(|i| (0..4).filter(|&j| j != i).map(|j| f[j]).product());
    Ok(EfficiencyBudget {
        pi_prep,
        beta_h,
        extraction,
        eta_optics,
        sigma: f.iter().product(),
        sensitivities,
    })
}
