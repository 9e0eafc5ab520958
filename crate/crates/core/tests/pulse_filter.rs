use std::f64::consts::PI;

use sps_core::pulse::{
    filter_in_frequency_domain, filter_through_cavity, gaussian_envelope, power_spectrum, CavityFilter, DriveEnvelope,
    FilterKernel, LaserPulse, TimeGrid,
};
use sps_core::C64;

fn reference_pulse() -> LaserPulse {
    LaserPulse::new(5.2, 32.0, 1.0, 0.0).unwrap()
}

fn reference_filter() -> CavityFilter {
    CavityFilter::new(-50.0, 25.0).unwrap()
}

/// Half-maximum width of a sampled curve by linear interpolation.
fn fwhm(x: &[f64], y: &[f64]) -> f64 {
    let (imax, ymax) = y.iter().enumerate().fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
    let half = ymax / 2.0;
    let mut lo = imax;
    while y[lo] > half {
        lo -= 1;
    }
    let mut hi = imax;
    while y[hi] > half {
        hi += 1;
    }
    let left = x[lo] + (half - y[lo]) / (y[lo + 1] - y[lo]) * (x[lo + 1] - x[lo]);
    let right = x[hi - 1] + (y[hi - 1] - half) / (y[hi - 1] - y[hi]) * (x[hi] - x[hi - 1]);
    right - left
}

#[test]
fn spectral_width_from_direct_dft() {
    let pulse = LaserPulse::new(5.2, 0.0, 1.0, 0.0).unwrap();
    let env = gaussian_envelope(&pulse, &TimeGrid::covering(-30.0, 30.0, 0.02).unwrap()).unwrap();
    let times: Vec<f64> = env.times().collect();
    // Plain O(N·M) transform, independent of the FFT used by the library.
    let nus: Vec<f64> = (0..=3000).map(|k| -150.0 + 0.1 * k as f64).collect();
    let power: Vec<f64> = nus
        .iter()
        .map(|nu| {
            let w = 2.0 * PI * nu * 1e-3;
            times.iter().zip(&env.omega).map(|(t, o)| o * C64::from_polar(1.0, w * t)).sum::<C64>().norm_sqr()
        })
        .collect();
    let width = fwhm(&nus, &power);
    assert!((width - 84.8).abs() < 0.5, "{width}");

    let fft = power_spectrum(&env, 1 << 16);
    let (x, y): (Vec<f64>, Vec<f64>) = fft.into_iter().unzip();
    assert!((fwhm(&x, &y) - width).abs() < 0.1);
}

fn tone(nu_ghz: f64, step: f64, len: usize) -> DriveEnvelope {
    let omega = (0..len).map(|k| C64::from_polar(1.0, -2.0 * PI * nu_ghz * 1e-3 * k as f64 * step)).collect();
    DriveEnvelope::from_samples(0.0, step, omega).unwrap()
}

#[test]
fn lorentzian_amplitude_response() {
    let kappa = 25.0;
    let filter = CavityFilter::new(-50.0, kappa).unwrap();
    for delta in [0.0, kappa / 2.0, kappa] {
        let input = tone(-50.0 + delta, 0.02, 20_000);
        let out = filter_through_cavity(&input, &filter).unwrap();
        // Far from the switch-on transient, inside the input window.
        let ratio = out.omega[15_000].norm() / input.omega[15_000].norm();
        let expect = 1.0 / (1.0 + (2.0 * delta / kappa).powi(2)).sqrt();
        assert!((ratio - expect).abs() < 1e-6, "δ = {delta}: {ratio} vs {expect}");
    }
}

#[test]
fn very_fast_cavity_is_transparent() {
    let f = CavityFilter::new(-50.0, 1e4).unwrap();
    for detuning in [-50.0, 32.0] {
        let pulse = LaserPulse::new(5.2, detuning, 1.0, 0.0).unwrap();
        let env = gaussian_envelope(&pulse, &pulse.default_grid()).unwrap();
        let out = filter_through_cavity(&env, &f).unwrap();
        let peak = env.peak_magnitude();
        let worst = env.omega.iter().zip(&out.omega).map(|(a, b)| (a.norm() - b.norm()).abs()).fold(0.0, f64::max);
        assert!(worst < 0.01 * peak, "{}", worst / peak);
    }
    // Centred on the filter the complex field itself passes unchanged.
    let pulse = LaserPulse::new(5.2, -50.0, 1.0, 0.0).unwrap();
    let env = gaussian_envelope(&pulse, &pulse.default_grid()).unwrap();
    let out = filter_through_cavity(&env, &f).unwrap();
    let worst = env.omega.iter().zip(&out.omega).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(worst < 0.01 * env.peak_magnitude());
}

#[test]
fn ringdown_time_from_tail_fit() {
    let pulse = reference_pulse();
    let filter = reference_filter();
    let out = filter_through_cavity(&gaussian_envelope(&pulse, &pulse.default_grid()).unwrap(), &filter).unwrap();
    // Least-squares slope of ln|Ω| over the tail, well after the pulse. This is
    // the field (amplitude) 1/e time; |Ω|² falls twice as fast.
    let pts: Vec<(f64, f64)> = out
        .times()
        .zip(&out.omega)
        .filter(|(t, _)| *t > 30.0 && *t < 80.0)
        .map(|(t, o)| (t, o.norm().ln()))
        .collect();
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let amplitude_time = -1.0 / slope;
    let expect = 1.0 / (PI * 25.0 * 1e-3);
    assert!((amplitude_time / expect - 1.0).abs() < 0.05, "{amplitude_time} vs {expect}");
}

#[test]
fn envelope_vanishes_at_grid_ends() {
    let pulse = reference_pulse();
    let out = filter_through_cavity(&gaussian_envelope(&pulse, &pulse.default_grid()).unwrap(), &reference_filter()).unwrap();
    let peak = out.peak_magnitude();
    assert!(out.omega[0].norm() < 1e-6 * peak);
    assert!(out.omega[out.len() - 1].norm() < 1e-6 * peak);
}

#[test]
fn filter_is_linear() {
    let grid = reference_pulse().default_grid();
    let e1 = gaussian_envelope(&LaserPulse::new(5.2, 32.0, 1.0, 0.0).unwrap(), &grid).unwrap();
    let e2 = gaussian_envelope(&LaserPulse::new(5.2, -10.0, 0.7, 3.0).unwrap(), &grid).unwrap();
    let (a, b) = (C64::new(0.3, -1.2), C64::new(-2.0, 0.5));
    let mix: Vec<C64> = e1.omega.iter().zip(&e2.omega).map(|(x, y)| a * x + b * y).collect();
    let mixed = DriveEnvelope::from_samples(e1.start_ps, e1.step_ps, mix).unwrap();
    let f = reference_filter();
    let (o1, o2, om) = (
        filter_through_cavity(&e1, &f).unwrap(),
        filter_through_cavity(&e2, &f).unwrap(),
        filter_through_cavity(&mixed, &f).unwrap(),
    );
    let scale = om.peak_magnitude();
    for k in 0..om.len() {
        assert!((om.omega[k] - (a * o1.omega[k] + b * o2.omega[k])).norm() <= 1e-10 * scale);
    }
}

#[test]
fn energy_falls_with_detuning_from_filter() {
    let f = reference_filter();
    let mut last = f64::INFINITY;
    for offset in [0.0, 10.0, 25.0, 50.0, 82.0, 120.0] {
        let pulse = LaserPulse::new(5.2, f.detuning_ghz + offset, 1.0, 0.0).unwrap();
        let env = gaussian_envelope(&pulse, &pulse.default_grid()).unwrap();
        let e = filter_through_cavity(&env, &f).unwrap().energy();
        assert!(e <= env.energy());
        assert!(e < last, "offset {offset}");
        last = e;
    }
}

#[test]
fn time_and_frequency_routes_agree() {
    let pulse = reference_pulse();
    let env = gaussian_envelope(&pulse, &pulse.default_grid()).unwrap();
    let f = reference_filter();
    let td = filter_through_cavity(&env, &f).unwrap();
    let fd = filter_in_frequency_domain(&env, &f, FilterKernel::SinglePole).unwrap();
    assert_eq!(td.len(), fd.len());
    let peak = td.peak_magnitude();
    let worst = td.omega.iter().zip(&fd.omega).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(worst < 1e-6 * peak, "{}", worst / peak);
}

#[test]
fn full_cosine_kernel_differs_only_slightly() {
    let pulse = reference_pulse();
    let env = gaussian_envelope(&pulse, &pulse.default_grid()).unwrap();
    let f = reference_filter();
    let single = filter_in_frequency_domain(&env, &f, FilterKernel::SinglePole).unwrap();
    let full = filter_in_frequency_domain(&env, &f, FilterKernel::FullCosine { carrier_ghz: 325_857.0 }).unwrap();
    let peak = single.peak_magnitude();
    let worst = single.omega.iter().zip(&full.omega).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    // Counter-rotating partner sits ~650 THz away: suppressed by κ/(2·carrier).
    assert!(worst < 1e-3 * peak && worst > 0.0);
}
