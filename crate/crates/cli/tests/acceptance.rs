//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Every check compares against numbers computed here, independently of the
//! library where that is practical. A criterion fails if any of its checks
//! fail. Known failures are listed in `KNOWN_FAILURES` together with the value
//! they currently produce; the run still prints FAIL for them, and the
//! process exits non-zero if they drift or if anything else fails.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sps_core::cavity::{
    cavity_q, fiber_matching_focal_length, fit_gaussian_mode, gaussian_beam_magnitude, kappa_from_q,
    numerical_aperture, spectrum, stack_reflectivity, top_mirror, wavelength_grid, FieldSample, MicrocavityDesign,
    Side, N_FUSED_SILICA,
};
use sps_core::lindblad::{
    emission_probability, evolve, pi_pulse_search, rabi_map, DriveModel, ExcitationModel, RabiCurve, SolverOptions,
};
use sps_core::metrics::{
    beta, conversion_efficiency, coupling_from_field, efficiency_budget, fit_decay_vs_detuning,
    purcell, purcell_from_lifetimes, CqedParams, DecayVsDetuningModel, DipoleParams, ModeContribution,
};
use sps_core::pulse::{gaussian_envelope, LaserPulse};
use sps_core::quantum::{tensor, ComplexMatrix, DensityMatrix, HilbertSpace, Tls};
use sps_core::stats::{
    approx_visibility, corrected_visibility, detector_correction, visibility_band, DetectorModel, HomSetup,
    VisibilityFormula,
};
use sps_core::{Execution, C64};

struct Check {
    label: String,
    value: Option<f64>,
    ok: bool,
}

#[derive(Default)]
struct Criterion {
    checks: Vec<Check>,
}

impl Criterion {
    fn check(&mut self, label: impl Into<String>, ok: bool) {
        self.checks.push(Check { label: label.into(), value: None, ok });
    }

    fn within(&mut self, what: &str, value: f64, target: f64, tol: f64) {
        self.checks.push(Check {
            label: format!("{what}: {value:.6} (target {target} ± {tol})"),
            value: Some(value),
            ok: (value - target).abs() <= tol,
        });
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }
}

/// Criterion number, sub-check label prefix, and the value it is known to
/// produce (with tolerance) instead of the target.
const KNOWN_FAILURES: &[(usize, &str, f64, f64)] = &[(6, "first Rabi peak at Δ_L = +32 GHz", 0.898, 0.002)];

fn criterion_1() -> Criterion {
    let mut c = Criterion::default();
    let (g, gamma) = (4.4, 0.29);
    let kappa = 2.0 * g;
    let eta = conversion_efficiency(&CqedParams::one_sided(g, kappa, gamma), false).unwrap();
    // Closed form written out independently.
    let fp = 4.0 * g * g / (kappa * gamma);
    let by_hand = fp / (fp + 1.0) * kappa / (kappa + gamma);
    c.within("η(κ = 2g)", eta, 0.94, 0.005);
    c.check("matches F/(F+1)·κ/(κ+γ) to 1e-12", (eta - by_hand).abs() < 1e-12);
    c
}

fn criterion_2() -> Criterion {
    let mut c = Criterion::default();
    let d = DipoleParams { dipole_nm: 0.71, vacuum_field: 35_000.0, wavelength_nm: 920.0, medium_index: 3.67 };
    let g = coupling_from_field(&d).unwrap();
    // ħg = µE/√2  →  g/(2π) = e·d·E / (√2·h).
    let by_hand = 1.602_176_634e-19 * 0.71e-9 * 35_000.0 / (2f64.sqrt() * 6.626_070_15e-34) * 1e-9;
    c.within("g/(2π) from field (GHz)", g, 4.24, 0.02);
    c.check("matches e·d·E/(√2·h) to 1e-8", (g / by_hand - 1.0).abs() < 1e-8);
    let fp = purcell(g, 23.3, 0.27).unwrap();
    c.within("F_P (κ = 23.3, γ = 0.27)", fp, 11.4, 0.02 * 11.4);
    c
}

fn criterion_3() -> Criterion {
    let mut c = Criterion::default();
    c.within("F_P from lifetimes", purcell_from_lifetimes(47.5, 520.0).unwrap(), 9.95, 0.01);

    let truth = DecayVsDetuningModel {
        gamma0: 2.87 / 9.6,
        h: ModeContribution { peak_rate: 2.87, center: 0.0, linewidth: 23.3 },
        v: ModeContribution { peak_rate: 1.9, center: 34.6, linewidth: 23.3 },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise = Normal::new(0.0, 0.003).unwrap();
    let samples: Vec<(f64, f64)> = (0..41)
        .map(|k| {
            let d = -60.0 + 3.0 * k as f64;
            (d, truth.rate(d) * (1.0 + noise.sample(&mut rng)))
        })
        .collect();
    let fit = fit_decay_vs_detuning(&samples).unwrap();
    let gh = fit.model.h.peak_rate;
    c.check(format!("γ_H = {gh:.4} GHz (target 2.87 ± 1%)"), (gh / 2.87 - 1.0).abs() < 0.01);
    c.check(
        format!("F_P^H = {:.4} (target 9.6 ± 1%)", fit.purcell_h),
        (fit.purcell_h / 9.6 - 1.0).abs() < 0.01,
    );
    c.check(format!("β_H = {:.4} lies in (0, 1)", fit.beta_h), fit.beta_h > 0.0 && fit.beta_h < 1.0);
    c
}

fn criterion_4() -> Criterion {
    let mut c = Criterion::default();
    let t = stack_reflectivity(&top_mirror(920.0, 7), 920.0, Side::Ambient).unwrap().transmittance;
    c.within("top-mirror T (ppm)", t * 1e6, 10_300.0, 1_030.0);

    let mut design = MicrocavityDesign::reference();
    design.tune_air_gap(920.0, Execution::Auto).unwrap();
    let stack = design.stack();
    let res = cavity_q(&stack, 915.0, 925.0, 0.002, Execution::Auto).unwrap();
    c.within("full-structure Q", res.q, 14_000.0, 2_100.0);
    c.within("κ/(2π) at Q = 14,000 (GHz)", kappa_from_q(14_000.0, 920.0).unwrap(), 23.3, 0.1);

    let grid = wavelength_grid(840.0, 1000.0, 0.05).unwrap();
    let mut worst: f64 = 0.0;
    for s in [top_mirror(920.0, 7), stack] {
        for side in [Side::Ambient, Side::Substrate] {
            for r in spectrum(&s, &grid, side, Execution::Auto).unwrap() {
                worst = worst.max((r.reflectance + r.transmittance - 1.0).abs());
            }
        }
    }
    c.check(format!("lossless |R + T − 1| = {worst:.1e} ≤ 1e-9 over 840–1000 nm"), worst <= 1e-9);
    c
}

fn criterion_5() -> Criterion {
    let mut c = Criterion::default();
    let na = numerical_aperture(1.05, 920.0).unwrap();
    c.within("NA(w0 = 1.05 µm)", na, 0.279, 0.001);
    c.within("fibre-lens focal length (mm)", fiber_matching_focal_length(4.51, 2.71, 1.05).unwrap(), 11.6, 0.1);

    let mut samples = Vec::new();
    for iz in 0..7 {
        for ir in 0..25 {
            let (r, z) = (0.1 * ir as f64, -12.0 + 4.0 * iz as f64);
            samples.push(FieldSample { r_um: r, z_um: z, magnitude: gaussian_beam_magnitude(1.0, 1.05, N_FUSED_SILICA, 920.0, r, z) });
        }
    }
    let fit = fit_gaussian_mode(&samples, N_FUSED_SILICA, 920.0).unwrap();
    c.check(
        format!("fitted waist {:.6} µm (target 1.05 ± 0.1%)", fit.waist_um),
        (fit.waist_um / 1.05 - 1.0).abs() < 1e-3,
    );
    c
}

fn criterion_6() -> Criterion {
    let mut c = Criterion::default();
    let model = ExcitationModel::reference();

    let amplitudes: Vec<f64> = (1..=120).map(|k| 60.0 * k as f64).collect();
    let curve = RabiCurve::compute(&model, 32.0, &amplitudes, Execution::Auto).unwrap();
    let (_, p32) = curve.first_peak().unwrap();
    c.within("first Rabi peak at Δ_L = +32 GHz", p32, 0.963, 0.02);

    let start = Instant::now();
    let detunings: Vec<f64> = (0..40).map(|k| 78.0 * k as f64 / 39.0).collect();
    let amps: Vec<f64> = (0..40).map(|k| 4680.0 * k as f64 / 39.0).collect();
    let map = rabi_map(&model, &detunings, &amps, Execution::Parallel { workers: 8 }).unwrap();
    let elapsed = start.elapsed();
    c.check(format!("40×40 map in {:.1} s (< 300 s at 8 workers)", elapsed.as_secs_f64()), elapsed < Duration::from_secs(300));
    let pi = pi_pulse_search(&model, &map).unwrap();
    c.within(&format!("first Rabi peak at optimised Δ_L = {:+.2} GHz", pi.detuning_ghz), pi.probability, 0.963, 0.02);
    c.check("optimum is blue detuned", pi.detuning_ghz > 0.0);

    let free = RabiCurve::compute(&ExcitationModel { phonon_fs_per_k: 0.0, ..model }, 32.0, &amplitudes, Execution::Auto).unwrap();
    let (second_free, second_damped) = (free.maxima()[1].1, curve.maxima()[1].1);
    c.check(
        format!("second Rabi peak A = 0: {second_free:.3} > A = 32 fs/K: {second_damped:.3}"),
        second_free > second_damped,
    );
    c
}

fn transpose(m: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.cols(), m.rows(), |i, j| m[(j, i)])
}

/// Row-major vectorised Liouvillian of the undriven emitter–cavity system.
fn liouvillian(g: f64, kappa: f64, gamma: f64, space: HilbertSpace) -> ComplexMatrix {
    let ops = space.operators();
    let id = ComplexMatrix::identity(space.total_dim());
    let w = |ghz: f64| 2.0 * PI * ghz * 1e-3;
    let h = (&(&ops.a_dag * &ops.sigma_minus) + &(&ops.a * &ops.sigma_plus)).scale(C64::new(w(g), 0.0));
    let left = |m: &ComplexMatrix| tensor(m, &id).unwrap();
    let right = |m: &ComplexMatrix| tensor(&id, &transpose(m)).unwrap();
    let mut l = (&left(&h) - &right(&h)).scale(C64::new(0.0, -1.0));
    for (op, rate) in [(&ops.a, w(kappa)), (&ops.sigma_minus, w(gamma))] {
        let dd = &op.dagger() * op;
        let jump = tensor(op, &transpose(&op.dagger())).unwrap();
        let anti = (&left(&dd) + &right(&dd)).scale(C64::new(-0.5, 0.0));
        l = &l + &(&jump + &anti).scale(C64::new(rate, 0.0));
    }
    l
}

/// exp(M) by scaling and squaring a Taylor series.
fn expm(m: &ComplexMatrix) -> ComplexMatrix {
    let norm: f64 = m.as_slice().iter().map(|z| z.norm()).sum();
    let s = (norm / 0.25).log2().ceil().max(0.0) as i32;
    let a = m.scale(C64::new(0.5f64.powi(s), 0.0));
    let n = m.rows();
    let mut term = ComplexMatrix::identity(n);
    let mut sum = ComplexMatrix::identity(n);
    for k in 1..30 {
        term = (&term * &a).scale(C64::new(1.0 / k as f64, 0.0));
        sum = &sum + &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

fn criterion_7() -> Criterion {
    let mut c = Criterion::default();
    let space = HilbertSpace::new(2).unwrap();
    let excited = DensityMatrix::basis_state(space, Tls::Excited, 0).unwrap();

    // Driven run with phonon dephasing: trace.
    let mut driven = DriveModel::undriven(4.16, 25.0, space);
    driven.gamma_free_ghz = 0.3;
    driven.phonon_fs_per_k = 32.0;
    driven.temperature_k = 4.2;
    let pulse = LaserPulse::new(5.2, 40.0, 2500.0, 0.0).unwrap();
    driven.drive = Some(gaussian_envelope(&pulse, &pulse.default_grid()).unwrap());
    let traj = evolve(&driven, &DensityMatrix::ground(space), &SolverOptions::default()).unwrap();
    let err = traj.max_trace_error();
    c.check(format!("trace drift {err:.1e} ≤ 1e-7"), err <= 1e-7);

    // Exponential oracle on the 6-dimensional space.
    let (g, kappa, gamma) = (4.16, 25.0, 0.3);
    let mut model = DriveModel::undriven(g, kappa, space);
    model.gamma_free_ghz = gamma;
    let opts = SolverOptions { t_end_ps: Some(40.0), sample_step_ps: 10.0, keep_states: true, ..Default::default() };
    let traj = evolve(&model, &excited, &opts).unwrap();
    let l = liouvillian(g, kappa, gamma, space);
    let rho0 = excited.matrix().as_slice().to_vec();
    let mut worst: f64 = 0.0;
    for (t, state) in traj.times_ps.iter().zip(traj.states.as_ref().unwrap()) {
        let prop = expm(&l.scale(C64::new(*t, 0.0)));
        let d2 = rho0.len();
        for i in 0..d2 {
            let exact: C64 = (0..d2).map(|k| prop[(i, k)] * rho0[k]).sum();
            worst = worst.max((exact - state.as_slice()[i]).norm());
        }
    }
    c.check(format!("solver vs exp(Lt) max deviation {worst:.1e} ≤ 1e-6"), worst <= 1e-6);

    // Vacuum Rabi period from successive photon maxima.
    let lossless = DriveModel::undriven(g, 0.0, space);
    let opts = SolverOptions { t_end_ps: Some(400.0), sample_step_ps: 0.05, ..Default::default() };
    let traj = evolve(&lossless, &excited, &opts).unwrap();
    let n = &traj.photons;
    let peaks: Vec<f64> = (1..n.len() - 1)
        .filter(|&i| n[i] > n[i - 1] && n[i] >= n[i + 1])
        .map(|i| {
            let denom = n[i - 1] - 2.0 * n[i] + n[i + 1];
            traj.times_ps[i] + 0.5 * (n[i - 1] - n[i + 1]) / denom * opts.sample_step_ps
        })
        .collect();
    let period = (peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64;
    let expect = 1e3 / (2.0 * g);
    c.check(
        format!("vacuum Rabi period {period:.4} ps (target {expect:.4} ± 0.1%)"),
        (period / expect - 1.0).abs() < 1e-3,
    );

    let leaky = DriveModel::undriven(g, kappa, space);
    let opts = SolverOptions::default();
    let traj = evolve(&leaky, &excited, &opts).unwrap();
    let p = emission_probability(&traj, kappa, opts.decay_threshold).unwrap();
    c.within("emission from an excited emitter, γ = 0", p, 1.0, 1e-4);
    c
}

fn criterion_8() -> Criterion {
    let mut c = Criterion::default();
    let setup = HomSetup { reflectance: 0.495, transmittance: 0.505, epsilon: 0.005, g2_zero: 0.021 };
    let v1 = corrected_visibility(0.916, &setup, VisibilityFormula::Exact).unwrap();
    let v2 = corrected_visibility(0.916, &setup, VisibilityFormula::NearBalanced).unwrap();
    c.within("exact-beamsplitter corrected V", v1, 0.964, 0.001);
    let (lo, hi) = visibility_band(0.916, &setup, 0.0025).unwrap();
    c.check(format!("ε band [{lo:.4}, {hi:.4}] contains 0.967"), lo <= 0.967 && 0.967 <= hi);
    c.within("approximate V on (0.925, 0.021)", approx_visibility(0.925, 0.021).unwrap(), 0.964, 0.001);
    c.check(format!("|exact − near-balanced| = {:.1e} < 1e-4", (v1 - v2).abs()), (v1 - v2).abs() < 1e-4);
    c
}

fn criterion_9() -> Criterion {
    let mut c = Criterion::default();
    let m = DetectorModel::default();
    let low = detector_correction(0.2e6, &m).unwrap().factor;
    let high = detector_correction(25e6, &m).unwrap().factor;
    c.check(format!("correction at 0.2 MHz = {low}"), low == 1.0);
    c.check(format!("correction at 25 MHz = {high}"), high == 3.32);
    let b = efficiency_budget(0.963, 0.86, 0.96, 0.68).unwrap();
    c.within("Σ", b.sigma, 0.541, 0.001);
    c.check("Σ inside 0.53–0.57", (0.53..=0.57).contains(&b.sigma));
    c.check("β is F/(F+1)", (beta(9.0).unwrap() - 0.9).abs() < 1e-15);
    c
}

fn run_cli(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> bool {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sps"));
    cmd.args(args).current_dir(dir);
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("SPS_")) {
        cmd.env_remove(k);
    }
    cmd.envs(env.iter().copied());
    cmd.output().map(|o| o.status.success()).unwrap_or(false)
}

fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn criterion_10() -> Criterion {
    let mut c = Criterion::default();
    let config = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/reference.toml");
    let config = config.to_str().unwrap();
    let tmp = tempfile::TempDir::new().unwrap();
    // A coarser drive grid keeps the run short; the replay reads it from the manifest.
    let coarse = [("SPS_DRIVE__DETUNING_POINTS", "14"), ("SPS_DRIVE__AMPLITUDE_POINTS", "14")];
    for cmd in ["metrics", "drive", "stack", "mode-fit", "hom", "budget", "calibrate"] {
        let first = tmp.path().join(format!("{cmd}-first"));
        let replay = tmp.path().join(format!("{cmd}-replay"));
        let env: &[(&str, &str)] = if cmd == "drive" { &coarse } else { &[] };
        let ok = run_cli(tmp.path(), &[cmd, "--config", config, "--seed", "3", "--workers", "1", "--out", first.to_str().unwrap()], env)
            && run_cli(
                tmp.path(),
                &[cmd, "--config", first.join("manifest.json").to_str().unwrap(), "--workers", "4", "--out", replay.to_str().unwrap()],
                &[],
            );
        let same = ok && outputs(&first) == outputs(&replay);
        c.check(format!("{cmd}: manifest replay with 4 workers is byte-identical"), same);
    }
    c
}

type Entry = (&'static str, fn() -> Criterion, Duration);

fn main() {
    let criteria: [Entry; 10] = [
        ("optimal-κ efficiency", criterion_1, Duration::from_secs(1)),
        ("coupling from field", criterion_2, Duration::from_secs(1)),
        ("lifetime Purcell and decay fit", criterion_3, Duration::from_secs(5)),
        ("transfer matrix", criterion_4, Duration::from_secs(30)),
        ("mode geometry", criterion_5, Duration::from_secs(5)),
        ("excitation dynamics", criterion_6, Duration::from_secs(300)),
        ("solver correctness", criterion_7, Duration::from_secs(60)),
        ("HOM corrections", criterion_8, Duration::from_secs(1)),
        ("detector and budget", criterion_9, Duration::from_secs(1)),
        ("determinism", criterion_10, Duration::from_secs(600)),
    ];
    let mut unexpected = Vec::new();
    let mut passed = 0;
    for (k, (name, run, limit)) in criteria.into_iter().enumerate() {
        let n = k + 1;
        let start = Instant::now();
        let mut crit = run();
        let elapsed = start.elapsed();
        crit.check(format!("runtime {:.2} s < {} s", elapsed.as_secs_f64(), limit.as_secs()), elapsed < limit);
        let verdict = if crit.passed() { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {verdict}  {name}");
        for ch in &crit.checks {
            let known = KNOWN_FAILURES.iter().find(|(c, prefix, _, _)| *c == n && ch.label.starts_with(prefix));
            let mark = match (ch.ok, known) {
                (true, _) => "ok  ",
                (false, Some(_)) => "FAIL (known)",
                (false, None) => "FAIL",
            };
            println!("      {mark} {}", ch.label);
            if !ch.ok {
                match known {
                    // A known failure must still land on its documented value.
                    Some((_, prefix, value, tol)) => {
                        if !ch.value.is_some_and(|v| (v - value).abs() <= *tol) {
                            unexpected.push(format!("criterion {n}: {prefix} moved from {value}"));
                        }
                    }
                    None => unexpected.push(format!("criterion {n}: {}", ch.label)),
                }
            }
        }
        if crit.passed() {
            passed += 1;
        }
    }
    println!("{passed}/10 criteria pass");
    if !unexpected.is_empty() {
        for u in &unexpected {
            eprintln!("unexpected failure: {u}");
        }
        std::process::exit(1);
    }
}
