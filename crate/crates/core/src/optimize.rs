//! Small optimisers used by the fitting routines: golden-section line search
//! and a damped (Levenberg–Marquardt) least-squares solver.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Maximises a unimodal `f` on `[lo, hi]` until the bracket is narrower than
/// `tol`. Returns `(argmax, max)`.
pub fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Fallible variant of [`golden_section_max`]; the first error aborts the search.
pub fn try_golden_section_max<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut failure = None;
    let best = golden_section_max(
        |x| {
            if failure.is_some() {
                return f64::NEG_INFINITY;
            }
            match f(x) {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    f64::NEG_INFINITY
                }
            }
        },
        lo,
        hi,
        tol,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(best),
    }
}

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the relative cost decrease falls below this.
    pub ftol: f64,
    /// Stop when the relative parameter step falls below this.
    pub xtol: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            ftol: 1e-15,
            xtol: 1e-12,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmSolution {
    pub params: Vec<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
}

/// Minimises `Σ rᵢ(p)²` with a Levenberg–Marquardt iteration. The Jacobian is
/// taken by central differences. `residuals` fills its output slice; a
/// non-finite residual rejects the trial step.
pub fn levenberg_marquardt<F>(
    residuals: F,
    initial: &[f64],
    n_residuals: usize,
    opts: &LmOptions,
) -> Result<LmSolution>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = initial.len();
    if n == 0 || n_residuals < n {
        return Err(Error::Fit(format!(
            "{n_residuals} residuals cannot determine {n} parameters"
        )));
    }
    let eval = |p: &[f64]| -> DVector<f64> {
        let mut r = vec![0.0; n_residuals];
        residuals(p, &mut r);
        DVector::from_vec(r)
    };
    let cost_of = |r: &DVector<f64>| -> f64 {
        if r.iter().all(|v| v.is_finite()) {
            r.norm_squared()
        } else {
            f64::INFINITY
        }
    };

    let mut p = initial.to_vec();
    let mut r = eval(&p);
    let mut cost = cost_of(&r);
    if !cost.is_finite() {
        return Err(Error::Fit("residuals not finite at the starting point".into()));
    }
    let mut lambda = opts.initial_damping;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let mut jac = DMatrix::<f64>::zeros(n_residuals, n);
        for j in 0..n {
            let h = 1e-7 * p[j].abs().max(1e-7);
            let mut up = p.clone();
            let mut dn = p.clone();
            up[j] += h;
            dn[j] -= h;
            let col = (eval(&up) - eval(&dn)) / (2.0 * h);
            jac.set_column(j, &col);
        }
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        if grad.amax() < 1e-300 {
            break;
        }

        let mut improved = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-&grad)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(x, s)| x + s).collect();
            let r_trial = eval(&trial);
            let c_trial = cost_of(&r_trial);
            if c_trial < cost {
                let rel_step = step
                    .iter()
                    .zip(p.iter())
                    .map(|(s, x)| s.abs() / x.abs().max(1e-12))
                    .fold(0.0, f64::max);
                let rel_decrease = (cost - c_trial) / cost.max(1e-300);
                p = trial;
                r = r_trial;
                cost = c_trial;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if rel_step < opts.xtol || rel_decrease < opts.ftol {
                    return Ok(LmSolution { params: p, cost, iterations });
                }
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    Ok(LmSolution { params: p, cost, iterations })
}
