//! Reference mirror and microcavity structures.

use serde::{Deserialize, Serialize};

use super::transfer::{spectrum, Layer, LayerStack, Side};
use crate::optimize::golden_section_max;
use crate::parallel::Execution;
use crate::Result;

/// GaAs index implied by a 67.9 nm quarter-wave layer at 940 nm.
pub const N_GAAS: f64 = 940.0 / (4.0 * 67.9);
/// AlAs index implied by an 80.6 nm quarter-wave layer at 940 nm.
pub const N_ALAS: f64 = 940.0 / (4.0 * 80.6);
/// Ta₂O₅ coating at 920 nm.
pub const N_TA2O5: f64 = 2.09;
/// SiO₂ coating at 920 nm.
pub const N_SIO2_COATING: f64 = 1.48;
/// Fused-silica substrate of the top mirror.
pub const N_FUSED_SILICA: f64 = 1.4761;

/// Dielectric top mirror: silica | (HL)^pairs H | air.
pub fn top_mirror(center_nm: f64, pairs: usize) -> LayerStack {
    let mut s = LayerStack::new(N_FUSED_SILICA, 1.0);
    s.extend(dielectric_layers(center_nm, pairs));
    s
}

fn dielectric_layers(center_nm: f64, pairs: usize) -> Vec<Layer> {
    let mut v = Vec::with_capacity(2 * pairs + 1);
    for _ in 0..pairs {
        v.push(Layer::quarter_wave(N_TA2O5, center_nm));
        v.push(Layer::quarter_wave(N_SIO2_COATING, center_nm));
    }
    v.push(Layer::quarter_wave(N_TA2O5, center_nm));
    v
}

/// Open microcavity: top mirror, air gap, GaAs active layer and the
/// AlAs/GaAs bottom mirror on a GaAs substrate. Light enters from the silica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicrocavityDesign {
    pub top_center_nm: f64,
    pub top_pairs: usize,
    /// Wavelength the semiconductor quarter-wave layers were designed for.
    pub bottom_design_nm: f64,
    /// Stopband centre of the as-grown semiconductor; all semiconductor
    /// thicknesses are scaled by `bottom_grown_nm / bottom_design_nm`.
    pub bottom_grown_nm: f64,
    pub bottom_pairs: usize,
    /// Active-layer thickness in design quarter waves.
    pub active_quarter_waves: f64,
    pub air_gap_nm: f64,
    /// Fractional thinning of the last-grown semiconductor layer relative to
    /// the first, applied linearly across the semiconductor layers.
    pub growth_gradient: f64,
    /// Extinction coefficient of the active layer (absorption).
    pub active_extinction: f64,
}

impl MicrocavityDesign {
    /// Reference structure with the nominal 4-quarter-wave air gap (not yet
    /// tuned onto resonance; see [`Self::tune_air_gap`]).
    pub fn reference() -> Self {
        Self {
            top_center_nm: 920.0,
            top_pairs: 7,
            bottom_design_nm: 940.0,
            bottom_grown_nm: 917.0,
            bottom_pairs: 46,
            active_quarter_waves: 6.0,
            air_gap_nm: 4.0 * 920.0 / 4.0,
            growth_gradient: 0.0,
            active_extinction: 0.0,
        }
    }

    pub fn stack(&self) -> LayerStack {
        let mut s = LayerStack::new(N_FUSED_SILICA, N_GAAS);
        s.extend(dielectric_layers(self.top_center_nm, self.top_pairs));
        s.push(Layer::new(1.0, self.air_gap_nm));

        let scale = self.bottom_grown_nm / self.bottom_design_nm;
        let qw = |n: f64| self.bottom_design_nm / (4.0 * n) * scale;
        // Semiconductor listed top-down, i.e. last grown first.
        let mut semi = Vec::with_capacity(2 * self.bottom_pairs + 1);
        semi.push(Layer {
            index: N_GAAS,
            extinction: self.active_extinction,
            thickness_nm: self.active_quarter_waves * qw(N_GAAS),
        });
        for _ in 0..self.bottom_pairs {
            semi.push(Layer::new(N_ALAS, qw(N_ALAS)));
            semi.push(Layer::new(N_GAAS, qw(N_GAAS)));
        }
        let m = semi.len();
        if self.growth_gradient != 0.0 && m > 1 {
            for (k, l) in semi.iter_mut().enumerate() {
                let grown_order = (m - 1 - k) as f64 / (m - 1) as f64;
                l.thickness_nm *= 1.0 - self.growth_gradient * grown_order;
            }
        }
        s.extend(semi);
        s
    }

    /// Sets the air gap to the transmission maximum at `target_nm` within
    /// half a wavelength around the current gap, and returns it.
    pub fn tune_air_gap(&mut self, target_nm: f64, exec: Execution) -> Result<f64> {
        let center = self.air_gap_nm;
        let half = target_nm / 4.0;
        let n = 400;
        let gaps: Vec<f64> = (0..=n).map(|k| center - half + 2.0 * half * k as f64 / n as f64).collect();
        let t_of = |gap: f64| -> f64 {
            let d = MicrocavityDesign { air_gap_nm: gap, ..self.clone() };
            spectrum(&d.stack(), &[target_nm], Side::Ambient, Execution::Sequential)
                .map(|r| r[0].transmittance)
                .unwrap_or(f64::NEG_INFINITY)
        };
        let scan = crate::parallel::map_indexed(gaps.len(), exec, |k| t_of(gaps[k]));
        let kbest = scan
            .iter()
            .enumerate()
            .fold(0, |b, (k, t)| if *t > scan[b] { k } else { b });
        let lo = gaps[kbest.saturating_sub(1)];
        let hi = gaps[(kbest + 1).min(n)];
        let (gap, _) = golden_section_max(t_of, lo, hi, 1e-9);
        self.air_gap_nm = gap;
        Ok(gap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cavity::transfer::stack_reflectivity;

    #[test]
    fn indices_from_layer_thicknesses() {
        assert!((N_GAAS - 3.461).abs() < 5e-4);
        assert!((N_ALAS - 2.916).abs() < 5e-4);
    }

    #[test]
    fn top_mirror_layer_count() {
        let s = top_mirror(920.0, 7);
        assert_eq!(s.layers.len(), 15);
        assert_eq!(s.layers[0].index, N_TA2O5);
        assert_eq!(s.layers[14].index, N_TA2O5);
    }

    #[test]
    fn top_mirror_transmission_order_of_magnitude() {
        let r = stack_reflectivity(&top_mirror(920.0, 7), 920.0, Side::Ambient).unwrap();
        assert!(r.transmittance > 5e-3 && r.transmittance < 2e-2);
    }

    #[test]
    fn gradient_thins_top_layers_only() {
        let mut d = MicrocavityDesign::reference();
        let flat = d.stack();
        d.growth_gradient = 0.02;
        let graded = d.stack();
        let last = flat.layers.len() - 1;
        assert_eq!(flat.layers[last], graded.layers[last]);
        // Active layer is grown last and thinned by the full gradient.
        let k = 2 * d.top_pairs + 2;
        assert!((graded.layers[k].thickness_nm / flat.layers[k].thickness_nm - 0.98).abs() < 1e-12);
        assert_eq!(flat.layers[0], graded.layers[0]);
    }
}
