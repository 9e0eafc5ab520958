//! Master-equation dynamics of a pulsed emitter coupled to one cavity mode.
//!
//! In the frame rotating at the emitter frequency, with the cavity mode on
//! resonance, the Hamiltonian is
//!
//! ```text
//! H(t) = ½(Ω*(t) σ₊ + Ω(t) σ₋) + g (a† σ₋ + a σ₊)
//! ```
//!
//! and the dissipators are cavity leakage `√κ a`, drive-induced phonon
//! dephasing `√(AT/2)|Ω(t)| σ_z` and an optional free-space decay `√γ σ₋`.
//! The density matrix is integrated with an adaptive Dormand–Prince pair.

mod fit;
mod map;

pub use fit::{fit_power_axis, PowerAxisFit};
pub use map::{
    first_peak_at, pi_pulse_search, rabi_map, truncation_check, CellFailure, ExcitationModel,
    PiPulse, RabiCurve, RabiMap, TruncationCheck, TRUNCATION_TOLERANCE,
};

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::format::sig9;
use crate::ode::{Dopri5, Dopri5Options};
use crate::pulse::DriveEnvelope;
use crate::quantum::{ComplexMatrix, DensityMatrix, HilbertSpace};
use crate::{Error, Result, C64};

/// x/(2π) in GHz → angular rate per ps.
pub(crate) fn angular_per_ps(ghz: f64) -> f64 {
    2.0 * PI * ghz * 1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveModel {
    /// Emitter–cavity coupling g/(2π) (GHz).
    pub coupling_ghz: f64,
    /// Cavity energy decay κ/(2π) (GHz).
    pub kappa_ghz: f64,
    /// Decay into non-cavity modes γ/(2π) (GHz).
    pub gamma_free_ghz: f64,
    /// Phonon coupling A (fs/K).
    pub phonon_fs_per_k: f64,
    pub temperature_k: f64,
    pub drive: Option<DriveEnvelope>,
    pub space: HilbertSpace,
}

impl DriveModel {
    pub fn undriven(coupling_ghz: f64, kappa_ghz: f64, space: HilbertSpace) -> Self {
        Self {
            coupling_ghz,
            kappa_ghz,
            gamma_free_ghz: 0.0,
            phonon_fs_per_k: 0.0,
            temperature_k: 0.0,
            drive: None,
            space,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("coupling", self.coupling_ghz),
            ("kappa", self.kappa_ghz),
            ("gamma_free", self.gamma_free_ghz),
            ("phonon coupling", self.phonon_fs_per_k),
            ("temperature", self.temperature_k),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// Dephasing rate per ps for a drive magnitude in rad/ns.
    fn dephasing_per_ps(&self, omega_abs: f64) -> f64 {
        // A·T in fs → ns, |Ω|² in ns⁻², rate in ns⁻¹ → ps⁻¹.
        0.5 * self.phonon_fs_per_k * self.temperature_k * 1e-6 * omega_abs * omega_abs * 1e-3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Spacing of recorded samples (ps).
    pub sample_step_ps: f64,
    pub max_step_ps: f64,
    /// Populations below which the system counts as decayed.
    pub decay_threshold: f64,
    /// Start time when the model has no drive; otherwise the drive start is used.
    pub t_start_ps: f64,
    /// Integrate to exactly this time instead of until decay.
    pub t_end_ps: Option<f64>,
    /// Ring-down cap after the drive ends, in units of 1/κ (ns·GHz).
    pub cap_kappa_lifetimes: f64,
    pub keep_states: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            sample_step_ps: 0.1,
            max_step_ps: 0.5,
            decay_threshold: 1e-6,
            t_start_ps: 0.0,
            t_end_ps: None,
            cap_kappa_lifetimes: 50.0,
            keep_states: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times_ps: Vec<f64>,
    /// ⟨σ₊σ₋⟩
    pub excited: Vec<f64>,
    /// ⟨a†a⟩
    pub photons: Vec<f64>,
    pub trace: Vec<f64>,
    pub states: Option<Vec<ComplexMatrix>>,
    /// Both populations fell below the decay threshold before the run ended.
    pub decayed: bool,
    pub steps: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times_ps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_ps.is_empty()
    }

    pub fn max_trace_error(&self) -> f64 {
        self.trace.iter().map(|t| (t - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t_ps,excited,photons,trace")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{}",
                sig9(self.times_ps[i]),
                sig9(self.excited[i]),
                sig9(self.photons[i]),
                sig9(self.trace[i])
            )?;
        }
        Ok(())
    }
}

/// Row-sparse operator with at most one real entry per row.
struct Ladder(Vec<Option<(usize, f64)>>);

impl Ladder {
    fn from_dense(m: &ComplexMatrix) -> Self {
        let rows = (0..m.rows())
            .map(|i| {
                let mut hit = None;
                for j in 0..m.cols() {
                    let v = m[(i, j)];
                    if v.norm() > 0.0 {
                        debug_assert!(hit.is_none() && v.im == 0.0);
                        hit = Some((j, v.re));
                    }
                }
                hit
            })
            .collect();
        Self(rows)
    }

    /// `out += rate · L ρ L†` with ρ row-major.
    fn sandwich_add(&self, rate: f64, rho: &[C64], out: &mut [C64]) {
        let d = self.0.len();
        for (i, ri) in self.0.iter().enumerate() {
            let Some((ki, vi)) = *ri else { continue };
            for (j, rj) in self.0.iter().enumerate() {
                let Some((kj, vj)) = *rj else { continue };
                out[i * d + j] += rho[ki * d + kj] * (rate * vi * vj);
            }
        }
    }
}

/// Precomputed pieces of the right-hand side.
struct Generator<'a> {
    model: &'a DriveModel,
    d: usize,
    /// Coupling plus the anti-Hermitian part of κ and γ.
    h_static: Vec<C64>,
    sigma_plus: Vec<(usize, usize)>,
    sigma_z: Vec<f64>,
    a: Ladder,
    sigma_minus: Ladder,
    kappa: f64,
    gamma: f64,
    h: Vec<C64>,
    x: Vec<C64>,
}

impl<'a> Generator<'a> {
    fn new(model: &'a DriveModel) -> Self {
        let ops = model.space.operators();
        let d = model.space.total_dim();
        let g = angular_per_ps(model.coupling_ghz);
        let kappa = angular_per_ps(model.kappa_ghz);
        let gamma = angular_per_ps(model.gamma_free_ghz);
        let coupling = &(&ops.a_dag * &ops.sigma_minus) + &(&ops.a * &ops.sigma_plus);
        let mut h_static = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let loss = ops.number[(i, j)] * kappa + ops.excited[(i, j)] * gamma;
                h_static.push(coupling[(i, j)] * g - C64::new(0.0, 0.5) * loss);
            }
        }
        let sigma_plus = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .filter(|&(i, j)| ops.sigma_plus[(i, j)].norm() > 0.0)
            .collect();
        Self {
            model,
            d,
            h_static,
            sigma_plus,
            sigma_z: (0..d).map(|i| ops.sigma_z[(i, i)].re).collect(),
            a: Ladder::from_dense(&ops.a),
            sigma_minus: Ladder::from_dense(&ops.sigma_minus),
            kappa,
            gamma,
            h: vec![C64::new(0.0, 0.0); d * d],
            x: vec![C64::new(0.0, 0.0); d * d],
        }
    }

    fn rhs(&mut self, t: f64, rho: &[C64], out: &mut [C64]) {
        let d = self.d;
        self.h.copy_from_slice(&self.h_static);
        let mut dephasing = 0.0;
        if let Some(drive) = &self.model.drive {
            let omega = drive.value_at(t) * 1e-3;
            for &(i, j) in &self.sigma_plus {
                // ½Ω* σ₊ and its adjoint ½Ω σ₋.
                self.h[i * d + j] += omega.conj() * 0.5;
                self.h[j * d + i] += omega * 0.5;
            }
            dephasing = self.model.dephasing_per_ps(drive.magnitude_at(t));
            if dephasing > 0.0 {
                for i in 0..d {
                    self.h[i * d + i] -= C64::new(0.0, 0.5 * dephasing);
                }
            }
        }

        // X = H_eff ρ; for Hermitian ρ the commutator part is −i(X − X†).
        for i in 0..d {
            for j in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..d {
                    acc += self.h[i * d + k] * rho[k * d + j];
                }
                self.x[i * d + j] = acc;
            }
        }
        for i in 0..d {
            for j in 0..d {
                let v = self.x[i * d + j] - self.x[j * d + i].conj();
                out[i * d + j] = C64::new(v.im, -v.re);
            }
        }
        if self.kappa > 0.0 {
            self.a.sandwich_add(self.kappa, rho, out);
        }
        if self.gamma > 0.0 {
            self.sigma_minus.sandwich_add(self.gamma, rho, out);
        }
        if dephasing > 0.0 {
            for i in 0..d {
                for j in 0..d {
                    out[i * d + j] += rho[i * d + j] * (dephasing * self.sigma_z[i] * self.sigma_z[j]);
                }
            }
        }
    }
}

fn diag_sum(rho: &[C64], d: usize, weights: &[f64]) -> f64 {
    (0..d).map(|i| rho[i * d + i].re * weights[i]).sum()
}

/// Integrates the master equation from `initial`.
///
/// With a drive present the run starts at the first drive sample; otherwise
/// at `opts.t_start_ps`. Unless `opts.t_end_ps` is set, integration continues
/// past the end of the drive until both populations drop below
/// `opts.decay_threshold`, or the ring-down cap is reached.
pub fn evolve(model: &DriveModel, initial: &DensityMatrix, opts: &SolverOptions) -> Result<Trajectory> {
    model.validate()?;
    if initial.space() != model.space {
        return Err(Error::DimensionMismatch(format!(
            "initial state has cutoff {}, model has {}",
            initial.space().fock_cutoff(),
            model.space.fock_cutoff()
        )));
    }
    if !(opts.sample_step_ps > 0.0) {
        return Err(Error::invalid("sample step must be positive"));
    }
    let t0 = model.drive.as_ref().map_or(opts.t_start_ps, |d| d.start_ps);
    let drive_end = model.drive.as_ref().map_or(t0, |d| d.end_ps());

    let (t_limit, fixed_end) = match opts.t_end_ps {
        Some(t) => {
            if !(t > t0) {
                return Err(Error::invalid(format!("end time {t} ps must follow start {t0} ps")));
            }
            (t, true)
        }
        None => {
            if !(model.kappa_ghz > 0.0) {
                return Err(Error::invalid("without cavity decay an explicit end time is required"));
            }
            (drive_end + opts.cap_kappa_lifetimes / model.kappa_ghz * 1e3, false)
        }
    };
    let n_samples = ((t_limit - t0) / opts.sample_step_ps).ceil().max(1.0) as usize;
    let sample_step = (t_limit - t0) / n_samples as f64;

    let d = model.space.total_dim();
    let ops = model.space.operators();
    let w_exc: Vec<f64> = (0..d).map(|i| ops.excited[(i, i)].re).collect();
    let w_num: Vec<f64> = (0..d).map(|i| ops.number[(i, i)].re).collect();
    let w_one = vec![1.0; d];

    let mut gen = Generator::new(model);
    let ode_opts = Dopri5Options {
        rtol: opts.rtol,
        atol: opts.atol,
        max_step: opts.max_step_ps,
        initial_step: 1e-3,
        ..Default::default()
    };
    let y0 = initial.matrix().as_slice().to_vec();
    let mut ode = Dopri5::new(|t, y: &[C64], dy: &mut [C64]| gen.rhs(t, y, dy), t0, y0, ode_opts);

    let mut traj = Trajectory {
        times_ps: Vec::with_capacity(n_samples + 1),
        excited: Vec::with_capacity(n_samples + 1),
        photons: Vec::with_capacity(n_samples + 1),
        trace: Vec::with_capacity(n_samples + 1),
        states: opts.keep_states.then(Vec::new),
        decayed: false,
        steps: 0,
    };
    let mut buf = vec![C64::new(0.0, 0.0); d * d];
    let record = |traj: &mut Trajectory, t: f64, rho: &[C64]| -> (f64, f64) {
        let exc = diag_sum(rho, d, &w_exc);
        let num = diag_sum(rho, d, &w_num);
        traj.times_ps.push(t);
        traj.excited.push(exc);
        traj.photons.push(num);
        traj.trace.push(diag_sum(rho, d, &w_one));
        if let Some(states) = traj.states.as_mut() {
            states.push(ComplexMatrix::from_vec(d, d, rho.to_vec()).expect("d×d buffer"));
        }
        (exc, num)
    };
    record(&mut traj, t0, initial.matrix().as_slice());

    let mut k = 1;
    'outer: while k <= n_samples {
        ode.step(t_limit)?;
        while k <= n_samples {
            let ts = if k == n_samples { t_limit } else { t0 + sample_step * k as f64 };
            if ts > ode.t() {
                break;
            }
            ode.interpolate(ts, &mut buf);
            let (exc, num) = record(&mut traj, ts, &buf);
            k += 1;
            if !fixed_end
                && ts >= drive_end
                && exc < opts.decay_threshold
                && num < opts.decay_threshold
            {
                traj.decayed = true;
                break 'outer;
            }
        }
    }
    if fixed_end {
        let last = traj.len() - 1;
        traj.decayed = traj.excited[last] < opts.decay_threshold && traj.photons[last] < opts.decay_threshold;
    }
    traj.steps = ode.steps();
    Ok(traj)
}

/// `∫ κ ⟨a†a⟩ dt` by the trapezoidal rule on the recorded samples.
pub fn emission_probability(traj: &Trajectory, kappa_ghz: f64, decay_threshold: f64) -> Result<f64> {
    if traj.len() < 2 {
        return Err(Error::invalid("trajectory needs at least two samples"));
    }
    let last = traj.len() - 1;
    let residual = traj.excited[last].max(traj.photons[last]);
    if !(residual < decay_threshold) {
        return Err(Error::NotDecayed { residual });
    }
    let kappa = angular_per_ps(kappa_ghz);
    let mut acc = 0.0;
    for i in 0..last {
        let dt = traj.times_ps[i + 1] - traj.times_ps[i];
        acc += 0.5 * dt * (traj.photons[i] + traj.photons[i + 1]);
    }
    Ok(kappa * acc)
}

/// Evolves from the ground state and integrates the cavity output.
pub fn emission_from_ground(model: &DriveModel, opts: &SolverOptions) -> Result<f64> {
    let traj = evolve(model, &DensityMatrix::ground(model.space), opts)?;
    emission_probability(&traj, model.kappa_ghz, opts.decay_threshold)
}
