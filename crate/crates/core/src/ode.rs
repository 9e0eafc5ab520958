//! Dormand–Prince 5(4) integrator for complex state vectors, with the
//! classic fourth-order continuous extension for dense output.

use crate::{Error, Result, C64};

// Butcher tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Error weights: fifth- minus fourth-order solution.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense output.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone)]
pub struct Dopri5Options {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for Dopri5Options {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            initial_step: 1e-3,
            max_step: f64::INFINITY,
            min_step: 1e-12,
            max_steps: 5_000_000,
        }
    }
}

/// Adaptive integrator for `y' = f(t, y)`.
pub struct Dopri5<F> {
    f: F,
    opts: Dopri5Options,
    t: f64,
    t_prev: f64,
    h: f64,
    y: Vec<C64>,
    k: [Vec<C64>; 7],
    stage: Vec<C64>,
    y_new: Vec<C64>,
    err: Vec<C64>,
    rcont: [Vec<C64>; 5],
    steps: usize,
    rejected: usize,
}

impl<F> Dopri5<F>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    pub fn new(mut f: F, t0: f64, y0: Vec<C64>, opts: Dopri5Options) -> Self {
        let n = y0.len();
        let zeros = || vec![C64::new(0.0, 0.0); n];
        let mut k: [Vec<C64>; 7] = std::array::from_fn(|_| zeros());
        f(t0, &y0, &mut k[0]);
        Self {
            f,
            t: t0,
            t_prev: t0,
            h: opts.initial_step,
            opts,
            rcont: std::array::from_fn(|_| zeros()),
            y: y0,
            k,
            stage: zeros(),
            y_new: zeros(),
            err: zeros(),
            steps: 0,
            rejected: 0,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[C64] {
        &self.y
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn rejected(&self) -> usize {
        self.rejected
    }

    fn stage_sum(&mut self, h: f64, coeffs: &[(usize, f64)]) {
        for (i, s) in self.stage.iter_mut().enumerate() {
            let mut acc = self.y[i];
            for &(j, a) in coeffs {
                acc += self.k[j][i] * (h * a);
            }
            *s = acc;
        }
    }

    /// Takes one accepted step without passing `t_limit`. Afterwards
    /// [`Self::interpolate`] is valid on the step just taken.
    pub fn step(&mut self, t_limit: f64) -> Result<()> {
        if self.steps >= self.opts.max_steps {
            return Err(Error::Integration { t: self.t, reason: "step budget exhausted".into() });
        }
        loop {
            let remaining = t_limit - self.t;
            if remaining <= 0.0 {
                return Err(Error::Integration { t: self.t, reason: "already at the limit".into() });
            }
            let mut h = self.h.min(self.opts.max_step);
            let last = h >= remaining * (1.0 - 1e-12);
            if last {
                h = remaining;
            }
            let t = self.t;

            self.stage_sum(h, &[(0, A21)]);
            (self.f)(t + C2 * h, &self.stage, &mut self.k[1]);
            self.stage_sum(h, &[(0, A31), (1, A32)]);
            (self.f)(t + C3 * h, &self.stage, &mut self.k[2]);
            self.stage_sum(h, &[(0, A41), (1, A42), (2, A43)]);
            (self.f)(t + C4 * h, &self.stage, &mut self.k[3]);
            self.stage_sum(h, &[(0, A51), (1, A52), (2, A53), (3, A54)]);
            (self.f)(t + C5 * h, &self.stage, &mut self.k[4]);
            self.stage_sum(h, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
            (self.f)(t + h, &self.stage, &mut self.k[5]);
            self.stage_sum(h, &[(0, A71), (2, A73), (3, A74), (4, A75), (5, A76)]);
            std::mem::swap(&mut self.y_new, &mut self.stage);
            let t_new = if last { t_limit } else { t + h };
            (self.f)(t_new, &self.y_new, &mut self.k[6]);

            let mut acc = 0.0;
            for i in 0..self.y.len() {
                let e = (self.k[0][i] * E1
                    + self.k[2][i] * E3
                    + self.k[3][i] * E4
                    + self.k[4][i] * E5
                    + self.k[5][i] * E6
                    + self.k[6][i] * E7)
                    * h;
                self.err[i] = e;
                let sc = self.opts.atol + self.opts.rtol * self.y[i].norm().max(self.y_new[i].norm());
                let r = e.norm() / sc;
                acc += r * r;
            }
            let err_norm = (acc / self.y.len().max(1) as f64).sqrt();
            if !err_norm.is_finite() {
                return Err(Error::Integration { t, reason: "non-finite derivative".into() });
            }

            if err_norm <= 1.0 {
                // Dense-output coefficients for the accepted step.
                for i in 0..self.y.len() {
                    let y0 = self.y[i];
                    let y1 = self.y_new[i];
                    let dy = y1 - y0;
                    let bspl = self.k[0][i] * h - dy;
                    self.rcont[0][i] = y0;
                    self.rcont[1][i] = dy;
                    self.rcont[2][i] = bspl;
                    self.rcont[3][i] = dy - self.k[6][i] * h - bspl;
                    self.rcont[4][i] = (self.k[0][i] * D1
                        + self.k[2][i] * D3
                        + self.k[3][i] * D4
                        + self.k[4][i] * D5
                        + self.k[5][i] * D6
                        + self.k[6][i] * D7)
                        * h;
                }
                self.t_prev = t;
                self.t = t_new;
                std::mem::swap(&mut self.y, &mut self.y_new);
                self.k.swap(0, 6);
                self.steps += 1;
                let factor = if err_norm == 0.0 { 5.0 } else { (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0) };
                self.h = (h * factor).min(self.opts.max_step);
                return Ok(());
            }

            self.rejected += 1;
            let factor = (0.9 * err_norm.powf(-0.2)).clamp(0.1, 1.0);
            self.h = h * factor;
            if self.h < self.opts.min_step {
                return Err(Error::Integration {
                    t,
                    reason: format!("step size {:e} below minimum after rejection", self.h),
                });
            }
        }
    }

    /// State at `t` inside the last accepted step.
    pub fn interpolate(&self, t: f64, out: &mut [C64]) {
        let h = self.t - self.t_prev;
        let theta = if h > 0.0 { ((t - self.t_prev) / h).clamp(0.0, 1.0) } else { 1.0 };
        let theta1 = 1.0 - theta;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.rcont[0][i]
                + (self.rcont[1][i]
                    + (self.rcont[2][i] + (self.rcont[3][i] + self.rcont[4][i] * theta1) * theta) * theta1)
                    * theta;
        }
    }
}
