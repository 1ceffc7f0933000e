//! Recovery sequence: every jump of a limit object is replaced by a strip of
//! height `theta h(x1)` with slope `1/theta` in `x2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{AnalyticProfile, BoundaryCondition, Rect};
use crate::poly::{Poly1, Poly2};
use crate::sbv_limit::PiecewiseSBV;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOptions {
    /// Return `u = x2` instead of an error when the strips do not fit.
    pub fallback_to_identity: bool,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            fallback_to_identity: true,
        }
    }
}

/// `u_theta = u + (x2 - y)/theta - h(x1)` on `y < x2 < y + theta h(x1)`.
pub fn recovery_sequence<T: Real>(u: &PiecewiseSBV<T>, theta: T) -> Result<AnalyticProfile<T>> {
    recovery_sequence_with(u, theta, RecoveryOptions::default())
}

pub fn recovery_sequence_with<T: Real>(
    u: &PiecewiseSBV<T>,
    theta: T,
    opts: RecoveryOptions,
) -> Result<AnalyticProfile<T>> {
    if !(theta > T::zero() && theta <= T::lit(0.5)) {
        return Err(Error::InvalidParameter(format!("theta must lie in (0, 1/2], got {theta}")));
    }
    let tol = T::lit(1e-10);
    for s in &u.jumps {
        if s.a <= tol && s.h.eval(s.a).abs() > tol {
            return Err(Error::InvalidLimit(format!(
                "jump segment at y = {} touches x1 = 0 with h(0) = {}",
                s.y,
                s.h.eval(s.a)
            )));
        }
    }
    let report = u.validate();
    if !report.passes() {
        return Err(Error::InvalidLimit(report.to_string()));
    }
    let rho = strip_guard(u);
    let fits = u.jumps.iter().all(|s| theta * s.max_jump() <= rho);
    match fits.then(|| insert_strips(u, theta)).transpose()? {
        Some(Some(p)) => Ok(p),
        _ if opts.fallback_to_identity => identity(),
        _ => Err(Error::InvalidParameter(format!("strips do not fit at theta = {theta}"))),
    }
}

/// Half the smallest vertical distance from a segment to another overlapping
/// segment or to the top edge, never below `gap_min / 2`.
pub fn strip_guard<T: Real>(u: &PiecewiseSBV<T>) -> T {
    let mut gap = T::infinity();
    for (i, s) in u.jumps.iter().enumerate() {
        gap = gap.min(T::one() - s.y);
        for t in &u.jumps[i + 1..] {
            if s.a.max(t.a) < s.b.min(t.b) {
                gap = gap.min((s.y - t.y).abs());
            }
        }
    }
    gap.max(u.gap_min) / T::lit(2.0)
}

fn identity<T: Real>() -> Result<AnalyticProfile<T>> {
    AnalyticProfile::single(
        Rect::unit(),
        Poly2::affine(T::zero(), T::zero(), T::one()),
        BoundaryCondition::DirichletLeftIdentity,
    )
}

/// `None` when a strip would leave the layer above its segment.
fn insert_strips<T: Real>(u: &PiecewiseSBV<T>, theta: T) -> Result<Option<AnalyticProfile<T>>> {
    let mut prof = u.smooth.clone();
    for s in &u.jumps {
        for &x in &s.h.breaks {
            prof.split_at(x);
        }
    }
    if prof.columns.iter().any(|c| c.copies != 1) && !u.jumps.is_empty() {
        return Err(Error::InvalidLimit("jumps are only supported on non-periodic columns".into()));
    }
    let tol = T::lit(1e-10);
    for s in &u.jumps {
        for col in prof.columns.iter_mut() {
            let mid = (col.x0 + col.x1) / T::lit(2.0);
            if mid < s.a || mid > s.b {
                continue;
            }
            let h = s.h.pieces[s.h.piece_index(mid)].clone();
            if h.max_abs_on(col.x0, col.x1) <= tol {
                continue;
            }
            let y = s.y - col.y0;
            let k = (1..col.layers())
                .find(|&k| col.curves[k].sub(&Poly1::constant(y)).max_abs_on(col.x0, col.x1) <= tol)
                .ok_or_else(|| {
                    Error::InvalidLimit(format!("no layer boundary at y = {} in column [{}, {}]", s.y, col.x0, col.x1))
                })?;
            let top = Poly1::constant(y).add(&h.scale(theta));
            if col.curves[k + 1].sub(&top).min_on(col.x0, col.x1) < T::zero() {
                return Ok(None);
            }
            let inv = T::one() / theta;
            let strip = col.maps[k]
                .add(&Poly2::affine(-y * inv, T::zero(), inv))
                .sub(&Poly2::from_x1(&h));
            col.curves.insert(k + 1, top);
            col.maps.insert(k, strip);
        }
    }
    prof.bc = BoundaryCondition::DirichletLeftIdentity;
    prof.check_structure()?;
    Ok(Some(prof))
}
