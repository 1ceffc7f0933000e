//! Projected gradient descent on a smoothed discrete functional.
//!
//! The double-well minimum becomes a soft-min and `|.|` in the interfacial
//! term becomes a Huber function, both of width `delta`. The discretization
//! matches [`crate::energy::evaluate_grid`], so the smoothed value tends to
//! the exact grid energy as `delta -> 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constructions::branching_profile;
use crate::energy::{evaluate_grid, EnergyBreakdown, EnergyParams, Form};
use crate::error::{Error, Result};
use crate::fields::{BoundaryCondition, GridField};
use crate::scalar::{compensated_sum, CompensatedSum, Real};

/// `-delta log((e^{-a/delta} + e^{-b/delta}) / 2)` and its weights on `a`, `b`.
#[inline]
pub fn soft_min<T: Real>(a: T, b: T, delta: T) -> (T, T, T) {
    let m = a.min(b);
    let ea = (-(a - m) / delta).exp();
    let eb = (-(b - m) / delta).exp();
    let s = ea + eb;
    (m - delta * (s / T::lit(2.0)).ln(), ea / s, eb / s)
}

/// Huber function of width `delta` and its derivative.
#[inline]
pub fn huber<T: Real>(t: T, delta: T) -> (T, T) {
    let a = t.abs();
    if a <= delta {
        (t * t / (T::lit(2.0) * delta), t / delta)
    } else {
        (a - delta / T::lit(2.0), t.signum())
    }
}

/// `|t|^p` and its derivative.
#[inline]
fn power<T: Real>(t: T, p: T) -> (T, T) {
    let a = t.abs();
    if a == T::zero() {
        return (T::zero(), T::zero());
    }
    let v = a.powf(p);
    (v, p * v / a * t.signum())
}

/// The two preferred slopes of the active form.
fn wells<T: Real>(params: &EnergyParams<T>) -> (T, T) {
    match params.form {
        Form::Unrescaled => (-params.theta, T::one() - params.theta),
        Form::Rescaled => (T::zero(), T::one() / params.theta),
    }
}

/// Smoothed energy and its gradient with respect to the node values.
pub fn smoothed_energy<T: Real>(f: &GridField<T>, params: &EnergyParams<T>, delta: T) -> Result<(T, GridField<T>)> {
    let mut grad = GridField::zeros(f.nx(), f.ny())?;
    let value = smoothed_energy_into(f, params, delta, grad.values_mut())?;
    Ok((value, grad))
}

/// As [`smoothed_energy`], writing the gradient into `grad` (row-major).
pub fn smoothed_energy_into<T: Real>(f: &GridField<T>, params: &EnergyParams<T>, delta: T, grad: &mut [T]) -> Result<T> {
    let (nx, ny) = (f.nx(), f.ny());
    if nx < 3 || ny < 3 {
        return Err(Error::GridTooSmall { nx, ny, min: 3 });
    }
    if !(delta > T::zero()) {
        return Err(Error::InvalidParameter("smoothing width must be positive".into()));
    }
    let (hx, hy) = f.spacing();
    let (sx, sy) = (T::one() / hx, T::one() / hy);
    let cell = hx * hy;
    let half = T::lit(0.5);
    let p = params.p;
    let (w1, w2) = wells(params);
    let u = f.values();
    let at = |i: usize, j: usize| u[j * nx + i];

    // Per cell: value, dE/dg1, dE/dg2.
    let cells: Vec<(T, T, T)> = (0..ny - 1)
        .into_par_iter()
        .flat_map_iter(|j| {
            (0..nx - 1).map(move |i| {
                let g1 = half * ((at(i + 1, j) - at(i, j)) + (at(i + 1, j + 1) - at(i, j + 1))) * sx;
                let g2 = half * ((at(i, j + 1) - at(i, j)) + (at(i + 1, j + 1) - at(i + 1, j))) * sy;
                let (e1, d1) = power(g1, p);
                let (a, da) = power(g2 - w1, p);
                let (b, db) = power(g2 - w2, p);
                let (e2, wa, wb) = soft_min(a, b, delta);
                (e1 + e2, d1, wa * da + wb * db)
            })
        })
        .collect();

    // Per interior node: Huber values and derivatives of d11, d12, d22.
    let weight = params.interfacial_weight();
    let two = T::lit(2.0);
    let nodes: Vec<(T, [T; 3])> = (1..ny - 1)
        .into_par_iter()
        .flat_map_iter(|j| {
            (1..nx - 1).map(move |i| {
                let [d11, d12, d22] = f.hessian_at(i, j);
                let (h11, g11) = huber(d11, delta);
                let (h12, g12) = huber(d12, delta);
                let (h22, g22) = huber(d22, delta);
                (h11 + two * h12 + h22, [g11, two * g12, g22])
            })
        })
        .collect();

    grad.iter_mut().for_each(|g| *g = T::zero());
    let mut elastic = CompensatedSum::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let (e, d1, d2) = cells[j * (nx - 1) + i];
            elastic.add(e);
            let a = half * d1 * sx * cell;
            let b = half * d2 * sy * cell;
            grad[j * nx + i] -= a + b;
            grad[j * nx + i + 1] += a - b;
            grad[(j + 1) * nx + i] += b - a;
            grad[(j + 1) * nx + i + 1] += a + b;
        }
    }
    let mut tv = CompensatedSum::new();
    let s = weight * cell;
    let (ixx, iyy, ixy) = (sx * sx, sy * sy, sx * sy);
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let (v, [g11, g12, g22]) = nodes[(j - 1) * (nx - 2) + (i - 1)];
            tv.add(v);
            let k = j * nx + i;
            let (a, b, c) = (s * g11 * ixx, s * g12 * ixy, s * g22 * iyy);
            grad[k - 1] += a;
            grad[k + 1] += a;
            grad[k] -= two * a;
            grad[k - nx] += c;
            grad[k + nx] += c;
            grad[k] -= two * c;
            grad[k + nx + 1] += b;
            grad[k + 1] -= b;
            grad[k + nx] -= b;
            grad[k] += b;
        }
    }
    Ok(elastic.value() * cell + weight * tv.value() * cell)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeOptions {
    pub nx: usize,
    pub ny: usize,
    /// Accepted steps allowed per smoothing stage.
    pub max_iters: usize,
    /// Smoothing widths, strictly decreasing.
    pub schedule: Vec<f64>,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Step shrink factor on rejection.
    pub shrink: f64,
    /// Step growth factor after acceptance.
    pub grow: f64,
    pub initial_step: f64,
    pub max_backtracks: usize,
    /// Stage stops when the relative smoothed-energy decrease falls below this.
    pub rel_tol: f64,
    pub seed: u64,
    /// Amplitude of the random perturbation for [`Init::Random`].
    pub noise: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            nx: 64,
            ny: 64,
            max_iters: 500,
            schedule: vec![1e-1, 1e-2, 1e-3],
            armijo: 1e-4,
            shrink: 0.5,
            grow: 1.5,
            initial_step: 1.0,
            max_backtracks: 60,
            rel_tol: 1e-10,
            seed: 0,
            noise: 0.1,
        }
    }
}

impl MinimizeOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("minimize options: {m}")));
        if self.nx < 3 || self.ny < 3 {
            return bad("grid needs at least 3 nodes per axis");
        }
        if self.schedule.is_empty() || self.schedule.iter().any(|d| !(*d > 0.0)) {
            return bad("smoothing widths must be positive");
        }
        if self.schedule.windows(2).any(|w| w[1] >= w[0]) {
            return bad("smoothing widths must decrease");
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return bad("armijo constant must lie in (0, 1)");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) || !(self.grow >= 1.0) {
            return bad("need 0 < shrink < 1 <= grow");
        }
        if !(self.initial_step > 0.0) || !(self.rel_tol > 0.0) || !(self.noise >= 0.0) {
            return bad("step, tolerance and noise must be positive");
        }
        Ok(())
    }
}

/// Starting field.
#[derive(Clone, Debug, PartialEq)]
pub enum Init<T> {
    /// The uniform state of the class.
    Constant,
    /// Sampled branching construction (constant state when `eps > theta^p`).
    Branching,
    /// Uniform state plus seeded noise vanishing on the Dirichlet column.
    Random,
    Given(GridField<T>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIterations,
    /// Backtracking exhausted without sufficient decrease.
    Stalled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub delta_s: f64,
    pub e_smooth: f64,
    pub e_exact: f64,
}

#[derive(Clone, Debug)]
pub struct MinimizeResult<T> {
    /// Iterate with the lowest exact energy seen.
    pub field: GridField<T>,
    pub energy: EnergyBreakdown<T>,
    pub trace: Vec<TraceRow>,
    pub status: Status,
}

/// Trace as CSV with header `iter,delta_s,E_smooth,E_exact`.
pub fn trace_csv(trace: &[TraceRow]) -> String {
    use std::fmt::Write;
    let mut s = String::from("iter,delta_s,E_smooth,E_exact\n");
    for r in trace {
        let _ = writeln!(s, "{},{:.16e},{:.16e},{:.16e}", r.iter, r.delta_s, r.e_smooth, r.e_exact);
    }
    s
}

fn initial_field<T: Real>(params: &EnergyParams<T>, opts: &MinimizeOptions, init: &Init<T>) -> Result<GridField<T>> {
    let bc = params.form.boundary_condition();
    let uniform = |x2: T| match params.form {
        Form::Unrescaled => T::zero(),
        Form::Rescaled => x2,
    };
    let mut f = match init {
        Init::Constant => GridField::from_fn(opts.nx, opts.ny, bc, |_, y| uniform(y))?,
        Init::Branching => {
            let v_params = params.with_form(Form::Unrescaled);
            if params.epsilon > params.theta_p() {
                GridField::from_fn(opts.nx, opts.ny, bc, |_, y| uniform(y))?
            } else {
                let (prof, _) = branching_profile(&v_params)?;
                let prof = match params.form {
                    Form::Unrescaled => prof,
                    Form::Rescaled => prof.rescale_v_to_u(params.theta)?,
                };
                prof.sample(opts.nx, opts.ny, bc)?
            }
        }
        Init::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let amp = T::lit(opts.noise);
            let mut f = GridField::from_fn(opts.nx, opts.ny, bc, |_, y| uniform(y))?;
            for j in 0..opts.ny {
                for i in 1..opts.nx {
                    let r: f64 = rng.random::<f64>() - 0.5;
                    let v = f.get(i, j) + amp * T::lit(r) * f.x1(i);
                    f.set(i, j, v);
                }
            }
            f
        }
        Init::Given(g) => {
            if g.nx() != opts.nx || g.ny() != opts.ny {
                return Err(Error::ShapeMismatch(g.nx(), g.ny(), opts.nx, opts.ny));
            }
            g.clone()
        }
    };
    f.set_bc_unchecked(bc);
    f.impose_bc();
    Ok(f)
}

/// Runs the continuation schedule from `init`.
pub fn minimize<T: Real>(params: &EnergyParams<T>, opts: &MinimizeOptions, init: &Init<T>) -> Result<MinimizeResult<T>> {
    params.validate()?;
    opts.validate()?;
    let mut u = initial_field(params, opts, init)?;
    let dirichlet = u.bc() != BoundaryCondition::None;
    let nx = u.nx();
    let (hx, hy) = u.spacing();
    let cell = hx * hy;
    let exact = |f: &GridField<T>| evaluate_grid(f, params);

    let mut best_energy = exact(&u)?;
    let mut best = u.clone();
    let mut trace = Vec::new();
    let mut iter = 0usize;
    let mut status = Status::Converged;
    let mut grad = vec![T::zero(); u.values().len()];
    let mut trial_grad = grad.clone();
    let mut step = T::lit(opts.initial_step);

    for &delta_f in &opts.schedule {
        let delta = T::lit(delta_f);
        let mut e = smoothed_energy_into(&u, params, delta, &mut grad)?;
        trace.push(TraceRow {
            iter,
            delta_s: delta_f,
            e_smooth: e.to_f64_lossy(),
            e_exact: best_energy.total.to_f64_lossy().min(exact(&u)?.total.to_f64_lossy()),
        });
        let mut stage_status = Status::MaxIterations;
        for _ in 0..opts.max_iters {
            if dirichlet {
                for j in 0..u.ny() {
                    grad[j * nx] = T::zero();
                }
            }
            // Descent direction in the L2 metric: -grad / cell.
            let gnorm2: T = compensated_sum(grad.iter().map(|g| *g * *g)) / cell;
            if gnorm2 == T::zero() {
                stage_status = Status::Converged;
                break;
            }
            let mut accepted = None;
            for _ in 0..opts.max_backtracks {
                let mut trial = u.clone();
                for (v, g) in trial.values_mut().iter_mut().zip(&grad) {
                    *v -= step * *g / cell;
                }
                trial.impose_bc();
                let et = smoothed_energy_into(&trial, params, delta, &mut trial_grad)?;
                if et.is_finite() && et <= e - T::lit(opts.armijo) * step * gnorm2 {
                    accepted = Some((trial, et));
                    break;
                }
                step *= T::lit(opts.shrink);
            }
            let Some((trial, et)) = accepted else {
                stage_status = Status::Stalled;
                break;
            };
            let rel = (e - et) / e.abs().max(T::tiny());
            u = trial;
            e = et;
            std::mem::swap(&mut grad, &mut trial_grad);
            step *= T::lit(opts.grow);
            iter += 1;
            let ex = exact(&u)?;
            if ex.total < best_energy.total {
                best_energy = ex;
                best = u.clone();
            }
            trace.push(TraceRow {
                iter,
                delta_s: delta_f,
                e_smooth: e.to_f64_lossy(),
                e_exact: ex.total.to_f64_lossy(),
            });
            if rel < T::lit(opts.rel_tol) {
                stage_status = Status::Converged;
                break;
            }
        }
        status = match (status, stage_status) {
            (Status::Converged, s) => s,
            (s, _) => s,
        };
    }
    Ok(MinimizeResult {
        field: best,
        energy: best_energy,
        trace,
        status,
    })
}
