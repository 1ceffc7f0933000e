//! Piecewise-polynomial profiles with exact geometry.
//!
//! A profile is a sequence of vertical *columns* `x0 < x1 < x2 < ...` that
//! tile the domain. Inside a column the height `[y0, y0 + copies*period]` is
//! tiled by `copies` translated copies of one *pattern*. The pattern is a
//! stack of layers separated by graphs `x2 = c_l(x1)` (polynomials in
//! `x1`); layer `l` carries a bivariate polynomial value map in global `x1`
//! and pattern-local `x2`. Copy `k` adds `k * value_step` to the value.
//!
//! Gradient jumps live on the layer curves, on the seams between copies and
//! on the vertical lines between columns. All of them are integrated from
//! the geometry, so periodic patterns with millions of copies cost the same
//! as a single copy.

use serde::{Deserialize, Serialize};

use super::grid::{BoundaryCondition, GridField};
use crate::error::{Error, Result};
use crate::poly::{Poly1, Poly2};
use crate::quadrature::{integrate, integrate_region, integrate_with_breaks, QuadOptions};
use crate::scalar::{CompensatedSum, Real};

/// Relative tolerance for the tiling and continuity invariants.
pub const AREA_TOL: f64 = 1e-10;
pub const CONTINUITY_TOL: f64 = 1e-9;

/// Sample points per column edge used by the continuity check.
const CONTINUITY_SAMPLES: usize = 9;
/// Largest period ratio handled when two periodic columns meet.
const MAX_PERIOD_RATIO: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect<T> {
    pub x0: T,
    pub x1: T,
    pub y0: T,
    pub y1: T,
}

impl<T: Real> Rect<T> {
    pub fn new(x0: T, x1: T, y0: T, y1: T) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn unit() -> Self {
        Self::new(T::zero(), T::one(), T::zero(), T::one())
    }

    pub fn width(&self) -> T {
        self.x1 - self.x0
    }

    pub fn height(&self) -> T {
        self.y1 - self.y0
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }
}

/// One vertical strip of a profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column<T> {
    pub x0: T,
    pub x1: T,
    pub y0: T,
    pub period: T,
    pub copies: u64,
    pub value_step: T,
    /// Layer boundaries in pattern-local ordinates; `curves[0] = 0`,
    /// `curves[last] = period`.
    pub curves: Vec<Poly1<T>>,
    /// One value map per layer (global `x1`, pattern-local `x2`).
    pub maps: Vec<Poly2<T>>,
}

impl<T: Real> Column<T> {
    /// Non-periodic column over `[x0, x1] x [y0, y1]`; `inner` are the interior
    /// layer curves in global ordinates and `maps` use global coordinates.
    pub fn slab(x0: T, x1: T, y0: T, y1: T, inner: Vec<Poly1<T>>, maps: Vec<Poly2<T>>) -> Self {
        let mut curves = vec![Poly1::constant(T::zero())];
        curves.extend(inner.into_iter().map(|c| c.add(&Poly1::constant(-y0))));
        curves.push(Poly1::constant(y1 - y0));
        let maps = maps.into_iter().map(|m| m.shift_x2(-y0)).collect();
        Self {
            x0,
            x1,
            y0,
            period: y1 - y0,
            copies: 1,
            value_step: T::zero(),
            curves,
            maps,
        }
    }

    pub fn layers(&self) -> usize {
        self.maps.len()
    }

    pub fn height(&self) -> T {
        self.period * T::from_count(self.copies as usize)
    }

    pub fn copies_real(&self) -> T {
        T::lit(self.copies as f64)
    }

    /// Layer containing pattern-local ordinate `y` at abscissa `x`; ties go
    /// to the lower layer.
    pub fn layer_at(&self, x: T, y: T) -> usize {
        let n = self.layers();
        (0..n)
            .find(|&l| y <= self.curves[l + 1].eval(x))
            .unwrap_or(n - 1)
    }

    /// Copy index and pattern-local ordinate for global `x2`; seam points go
    /// to the lower copy.
    pub fn local(&self, x2: T) -> (u64, T) {
        let rel = (x2 - self.y0) / self.period;
        let mut k = rel.floor().max(T::zero()).to_f64_lossy() as u64;
        k = k.min(self.copies.saturating_sub(1));
        let mut y = x2 - self.y0 - T::lit(k as f64) * self.period;
        if y <= T::zero() && k > 0 {
            k -= 1;
            y += self.period;
        }
        (k, y)
    }

    pub fn eval(&self, x1: T, x2: T) -> T {
        let (k, y) = self.local(x2);
        let l = self.layer_at(x1, y);
        self.maps[l].eval(x1, y) + T::lit(k as f64) * self.value_step
    }

    pub fn gradient(&self, x1: T, x2: T) -> [T; 2] {
        let (_, y) = self.local(x2);
        let l = self.layer_at(x1, y);
        self.maps[l].gradient(x1, y)
    }

    /// Gradient in pattern coordinates, `y` within one period.
    fn pattern_gradient(&self, x: T, y: T) -> [T; 2] {
        let l = self.layer_at(x, y);
        self.maps[l].gradient(x, y)
    }

    fn check_structure(&self, idx: usize) -> Result<()> {
        let err = |m: String| Err(Error::InvalidProfile(format!("column {idx}: {m}")));
        if !(self.x1 > self.x0) {
            return err("empty x-range".into());
        }
        if !(self.period > T::zero()) || self.copies == 0 {
            return err("period and copies must be positive".into());
        }
        if self.maps.is_empty() || self.curves.len() != self.maps.len() + 1 {
            return err("need one more curve than layer maps".into());
        }
        let first = &self.curves[0];
        let last = &self.curves[self.curves.len() - 1];
        let tol = self.period * T::lit(AREA_TOL);
        if first.degree() != 0 || first.eval(T::zero()).abs() > tol {
            return err("first curve must be the constant 0".into());
        }
        if last.degree() != 0 || (last.eval(T::zero()) - self.period).abs() > tol {
            return err("last curve must be the constant period".into());
        }
        for (l, w) in self.curves.windows(2).enumerate() {
            let gap = w[1].sub(&w[0]).min_on(self.x0, self.x1);
            if gap < -tol {
                return err(format!("curves {l} and {} cross (min gap {gap})", l + 1));
            }
        }
        Ok(())
    }

    fn sample_xs(&self) -> Vec<T> {
        (0..CONTINUITY_SAMPLES)
            .map(|s| {
                let t = (T::from_count(s) + T::lit(0.5)) / T::from_count(CONTINUITY_SAMPLES);
                self.x0 + t * (self.x1 - self.x0)
            })
            .collect()
    }

    /// Breakpoints of the pattern at abscissa `x` (pattern-local).
    fn breaks_at(&self, x: T) -> Vec<T> {
        self.curves.iter().map(|c| c.eval(x)).collect()
    }
}

/// A value-level discontinuity found by [`AnalyticProfile::discontinuities`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Discontinuity<T> {
    pub x1: T,
    pub x2: T,
    pub below_or_left: T,
    pub above_or_right: T,
}

/// Where a gradient jump lives.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InterfaceKind<T> {
    /// Layer curve `curve` inside column `column`.
    Curve { column: usize, curve: usize, x0: T, x1: T, ordinate: Poly1<T> },
    /// Horizontal seam between consecutive copies of a column's pattern.
    Seam { column: usize, x0: T, x1: T },
    /// Vertical line between column `left` and `left + 1`.
    Vertical { left: usize, x: T },
}

/// One gradient-jump set together with its integrated magnitude.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Interface<T> {
    #[serde(flatten)]
    pub kind: InterfaceKind<T>,
    /// Number of translated copies.
    pub multiplicity: T,
    /// Length of one copy.
    pub length: T,
    /// `int |[grad v]| dH^1` over one copy.
    pub jump_integral: T,
    /// Gradients on the two sides at the midpoint of the first copy.
    pub gradient_minus: [T; 2],
    pub gradient_plus: [T; 2],
}

impl<T: Real> Interface<T> {
    pub fn total(&self) -> T {
        self.multiplicity * self.jump_integral
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticProfile<T> {
    pub domain: Rect<T>,
    pub columns: Vec<Column<T>>,
    pub bc: BoundaryCondition,
}

impl<T: Real> AnalyticProfile<T> {
    /// Builds a profile and checks the tiling invariants. Continuity is not
    /// enforced here (limit objects carry jumps); see [`Self::validate`].
    pub fn new(domain: Rect<T>, columns: Vec<Column<T>>, bc: BoundaryCondition) -> Result<Self> {
        let p = Self { domain, columns, bc };
        p.check_structure()?;
        Ok(p)
    }

    /// Single-layer profile with one value map.
    pub fn single(domain: Rect<T>, map: Poly2<T>, bc: BoundaryCondition) -> Result<Self> {
        let col = Column::slab(domain.x0, domain.x1, domain.y0, domain.y1, vec![], vec![map]);
        Self::new(domain, vec![col], bc)
    }

    /// Tiling checks: contiguous columns, full height, ordered curves, area.
    pub fn check_structure(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::InvalidProfile("no columns".into()));
        }
        let d = &self.domain;
        let scale = d.width().max(d.height());
        let tol = scale * T::lit(AREA_TOL);
        if (self.columns[0].x0 - d.x0).abs() > tol
            || (self.columns[self.columns.len() - 1].x1 - d.x1).abs() > tol
        {
            return Err(Error::InvalidProfile("columns do not span the domain width".into()));
        }
        for (idx, col) in self.columns.iter().enumerate() {
            col.check_structure(idx)?;
            if idx > 0 && (self.columns[idx - 1].x1 - col.x0).abs() > tol {
                return Err(Error::InvalidProfile(format!("gap before column {idx}")));
            }
            if (col.y0 - d.y0).abs() > tol || (col.y0 + col.height() - d.y1).abs() > d.height() * T::lit(AREA_TOL) {
                return Err(Error::InvalidProfile(format!(
                    "column {idx} does not span the domain height"
                )));
            }
        }
        let area: T = crate::scalar::compensated_sum(self.columns.iter().map(|c| {
            let a: T = crate::scalar::compensated_sum(
                c.curves
                    .windows(2)
                    .map(|w| w[1].sub(&w[0]).integrate(c.x0, c.x1)),
            );
            a * c.copies_real()
        }));
        if (area - d.area()).abs() > d.area() * T::lit(AREA_TOL) {
            return Err(Error::InvalidProfile(format!(
                "cells cover area {area}, domain has {}",
                d.area()
            )));
        }
        Ok(())
    }

    /// Structure plus continuity of the value map.
    pub fn validate(&self) -> Result<()> {
        self.check_structure()?;
        if let Some(d) = self.discontinuities(1).into_iter().next() {
            return Err(Error::InvalidProfile(format!(
                "value jumps at ({}, {}): {} vs {}",
                d.x1, d.x2, d.below_or_left, d.above_or_right
            )));
        }
        Ok(())
    }

    fn close(a: T, b: T) -> bool {
        (a - b).abs() <= T::lit(CONTINUITY_TOL) * T::one().max(a.abs()).max(b.abs())
    }

    /// Sampled value mismatches across layer curves, seams and column edges,
    /// at most `limit` of them.
    pub fn discontinuities(&self, limit: usize) -> Vec<Discontinuity<T>> {
        let mut out = Vec::new();
        for col in &self.columns {
            for x in col.sample_xs() {
                for l in 1..col.layers() {
                    let y = col.curves[l].eval(x);
                    let (a, b) = (col.maps[l - 1].eval(x, y), col.maps[l].eval(x, y));
                    if !Self::close(a, b) {
                        out.push(Discontinuity { x1: x, x2: col.y0 + y, below_or_left: a, above_or_right: b });
                    }
                }
                if col.copies > 1 {
                    let a = col.maps[col.layers() - 1].eval(x, col.period);
                    let b = col.maps[0].eval(x, T::zero()) + col.value_step;
                    if !Self::close(a, b) {
                        out.push(Discontinuity { x1: x, x2: col.y0 + col.period, below_or_left: a, above_or_right: b });
                    }
                }
            }
        }
        for w in self.columns.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let x = a.x1;
            for y in self.vertical_probe_ordinates(a, b) {
                let (va, vb) = (a.eval(x, y), b.eval(x, y));
                if !Self::close(va, vb) {
                    out.push(Discontinuity { x1: x, x2: y, below_or_left: va, above_or_right: vb });
                }
            }
        }
        out.truncate(limit);
        out
    }

    /// Probe ordinates along a column edge: midpoints between the breakpoints
    /// of both sides in the first, a middle and the last common period.
    fn vertical_probe_ordinates(&self, a: &Column<T>, b: &Column<T>) -> Vec<T> {
        let x = a.x1;
        let mut ys = Vec::new();
        let height = self.domain.height();
        let big = a.period.max(b.period);
        let n_big = (height / big).round().to_f64_lossy().max(1.0) as u64;
        for k in [0, n_big / 2, n_big.saturating_sub(1)] {
            let base = self.domain.y0 + T::lit(k as f64) * big;
            let mut knots = Vec::new();
            for col in [a, b] {
                let reps = (big / col.period).round().to_f64_lossy().clamp(1.0, 64.0) as u64;
                for r in 0..reps {
                    let off = base + T::lit(r as f64) * col.period;
                    knots.extend(col.breaks_at(x).into_iter().map(|c| off + c));
                }
            }
            knots.push(base);
            knots.push(base + big);
            knots.sort_by(|p, q| p.partial_cmp(q).expect("finite"));
            for w in knots.windows(2) {
                if w[1] > w[0] {
                    ys.push((w[0] + w[1]) / T::lit(2.0));
                }
            }
        }
        ys.retain(|&y| y > self.domain.y0 && y < self.domain.y1);
        ys
    }

    /// Column containing `x1`; boundary points go to the left column.
    pub fn column_index(&self, x1: T) -> usize {
        let n = self.columns.len();
        let idx = self.columns.partition_point(|c| c.x1 < x1);
        idx.min(n - 1)
    }

    pub fn eval(&self, x1: T, x2: T) -> T {
        self.columns[self.column_index(x1)].eval(x1, x2)
    }

    pub fn gradient(&self, x1: T, x2: T) -> [T; 2] {
        self.columns[self.column_index(x1)].gradient(x1, x2)
    }

    /// Node-centered sampling onto an `nx x ny` grid over the domain (which
    /// must be the unit square). The tag is attached only if the sampled
    /// column satisfies it.
    pub fn sample(&self, nx: usize, ny: usize, bc: BoundaryCondition) -> Result<GridField<T>> {
        if self.domain != Rect::unit() {
            return Err(Error::InvalidProfile("sampling requires the unit-square domain".into()));
        }
        GridField::from_fn(nx, ny, bc, |x, y| self.eval(x, y))
    }

    /// Whether the trace on `x1 = x0` matches `bc` at sampled ordinates.
    pub fn satisfies(&self, bc: BoundaryCondition) -> bool {
        let col = &self.columns[0];
        let n = 257;
        let tol = T::lit(1e-12) * T::one().max(self.domain.height());
        (0..n).all(|s| {
            let y = self.domain.y0 + self.domain.height() * T::from_count(s) / T::from_count(n - 1);
            match bc.trace(y) {
                Some(t) => (col.eval(col.x0, y) - t).abs() <= tol,
                None => true,
            }
        })
    }

    /// Applies `m -> scale * (m + offset_x2)` on every layer, where `offset_x2`
    /// is the global `x2` expressed in pattern coordinates. Used by rescaling.
    fn map_affine_in_x2(&self, scale: T, x2_coeff: T, bc: BoundaryCondition) -> Self {
        let columns = self
            .columns
            .iter()
            .map(|c| {
                let global_x2 = Poly2::affine(c.y0, T::zero(), T::one());
                Column {
                    maps: c
                        .maps
                        .iter()
                        .map(|m| m.add(&global_x2.scale(x2_coeff)).scale(scale))
                        .collect(),
                    value_step: (c.value_step + x2_coeff * c.period) * scale,
                    ..c.clone()
                }
            })
            .collect();
        Self { domain: self.domain, columns, bc }
    }

    /// `u = x2 + v / theta`.
    pub fn rescale_v_to_u(&self, theta: T) -> Result<Self> {
        if !(theta > T::zero()) {
            return Err(Error::InvalidParameter("theta must be positive".into()));
        }
        // u = (v + theta * x2) / theta
        Ok(self.map_affine_in_x2(T::one() / theta, theta, swap_bc(self.bc)))
    }

    /// `v = theta (u - x2)`.
    pub fn rescale_u_to_v(&self, theta: T) -> Result<Self> {
        if !(theta > T::zero()) {
            return Err(Error::InvalidParameter("theta must be positive".into()));
        }
        Ok(self.map_affine_in_x2(theta, -T::one(), swap_bc(self.bc)))
    }

    /// Splits columns so that `x` becomes a column boundary.
    pub fn split_at(&mut self, x: T) {
        let idx = self.column_index(x);
        let col = &self.columns[idx];
        if x <= col.x0 || x >= col.x1 {
            return;
        }
        let mut right = col.clone();
        right.x0 = x;
        self.columns[idx].x1 = x;
        self.columns.insert(idx + 1, right);
    }

    /// Pointwise sum of two profiles on the same domain with compatible
    /// periodic structure. Layer curves of the two operands must not cross.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.domain != other.domain {
            return Err(Error::InvalidProfile("domains differ".into()));
        }
        let mut a = self.clone();
        let mut b = other.clone();
        for c in &other.columns {
            a.split_at(c.x0);
        }
        for c in &self.columns {
            b.split_at(c.x0);
        }
        let mut columns = Vec::with_capacity(a.columns.len());
        for (ca, cb) in a.columns.iter().zip(&b.columns) {
            if ca.copies != cb.copies || !Self::close(ca.period, cb.period) {
                return Err(Error::InvalidProfile("periodic structures differ".into()));
            }
            columns.push(merge_columns(ca, cb)?);
        }
        let bc = if self.bc == other.bc { self.bc } else { BoundaryCondition::None };
        Self::new(self.domain, columns, bc)
    }

    /// Adds `a + b x1 + c x2` everywhere.
    pub fn add_affine(&self, a: T, b: T, c: T) -> Self {
        let columns = self
            .columns
            .iter()
            .map(|col| Column {
                maps: col
                    .maps
                    .iter()
                    .map(|m| m.add(&Poly2::affine(a + c * col.y0, b, c)))
                    .collect(),
                value_step: col.value_step + c * col.period,
                ..col.clone()
            })
            .collect();
        Self { domain: self.domain, columns, bc: BoundaryCondition::None }
    }

    /// `sum over layers of int f(grad v)`, exact on affine layers and adaptive
    /// otherwise.
    pub fn integrate_gradient(&self, f: impl Fn([T; 2]) -> T + Copy, what: &str) -> Result<T> {
        let opts = QuadOptions::default();
        let mut total = CompensatedSum::new();
        for (ci, col) in self.columns.iter().enumerate() {
            let mut per_copy = CompensatedSum::new();
            for l in 0..col.layers() {
                let (lo, hi, m) = (&col.curves[l], &col.curves[l + 1], &col.maps[l]);
                let area = hi.sub(lo).integrate(col.x0, col.x1);
                if !(area > T::zero()) {
                    continue;
                }
                if m.is_affine() {
                    per_copy.add(f(m.gradient(T::zero(), T::zero())) * area);
                } else {
                    let (m1, m2) = (m.d1(), m.d2());
                    let r = integrate_region(
                        |x, y| f([m1.eval(x, y), m2.eval(x, y)]),
                        col.x0,
                        col.x1,
                        |x| lo.eval(x),
                        |x| hi.eval(x),
                        opts,
                    );
                    if !r.converged {
                        return Err(Error::Quadrature {
                            context: format!("{what}, column {ci} layer {l}"),
                            error: r.error.to_f64_lossy(),
                        });
                    }
                    per_copy.add(r.value);
                }
            }
            total.add(per_copy.value() * col.copies_real());
        }
        Ok(total.value())
    }

    /// `int |D^2 v|` over the smooth layers (Frobenius norm of the Hessian).
    pub fn smooth_hessian_variation(&self) -> Result<T> {
        let opts = QuadOptions::default();
        let two = T::lit(2.0);
        let mut total = CompensatedSum::new();
        for (ci, col) in self.columns.iter().enumerate() {
            for l in 0..col.layers() {
                let m = &col.maps[l];
                if m.is_affine() {
                    continue;
                }
                let (h11, h12, h22) = (m.d1().d1(), m.d1().d2(), m.d2().d2());
                let (lo, hi) = (&col.curves[l], &col.curves[l + 1]);
                let r = integrate_region(
                    |x, y| {
                        let (a, b, c) = (h11.eval(x, y), h12.eval(x, y), h22.eval(x, y));
                        (a * a + two * b * b + c * c).sqrt()
                    },
                    col.x0,
                    col.x1,
                    |x| lo.eval(x),
                    |x| hi.eval(x),
                    opts,
                );
                if !r.converged {
                    return Err(Error::Quadrature {
                        context: format!("hessian, column {ci} layer {l}"),
                        error: r.error.to_f64_lossy(),
                    });
                }
                total.add(r.value * col.copies_real());
            }
        }
        Ok(total.value())
    }

    /// Every gradient-jump set with a non-zero jump integral.
    pub fn interfaces(&self) -> Result<Vec<Interface<T>>> {
        let opts = QuadOptions::default();
        let half = T::lit(0.5);
        let mut out = Vec::new();
        let quad_err = |context: String, e: T| Error::Quadrature {
            context,
            error: e.to_f64_lossy(),
        };
        for (ci, col) in self.columns.iter().enumerate() {
            let xm = (col.x0 + col.x1) * half;
            for l in 1..col.layers() {
                let c = &col.curves[l];
                let dc = c.derivative();
                let (below, above) = (&col.maps[l - 1], &col.maps[l]);
                let jump = |x: T| {
                    let y = c.eval(x);
                    let (g0, g1) = (below.gradient(x, y), above.gradient(x, y));
                    let s = dc.eval(x);
                    norm2(g1[0] - g0[0], g1[1] - g0[1]) * (T::one() + s * s).sqrt()
                };
                let r = integrate(jump, col.x0, col.x1, opts);
                if !r.converged {
                    return Err(quad_err(format!("interface curve {l} of column {ci}"), r.error));
                }
                if r.value <= T::zero() {
                    continue;
                }
                let len = integrate(|x| (T::one() + dc.eval(x).powi(2)).sqrt(), col.x0, col.x1, opts);
                let ym = c.eval(xm);
                out.push(Interface {
                    kind: InterfaceKind::Curve { column: ci, curve: l, x0: col.x0, x1: col.x1, ordinate: c.clone() },
                    multiplicity: col.copies_real(),
                    length: len.value,
                    jump_integral: r.value,
                    gradient_minus: below.gradient(xm, ym),
                    gradient_plus: above.gradient(xm, ym),
                });
            }
            if col.copies > 1 {
                let (top, bottom) = (&col.maps[col.layers() - 1], &col.maps[0]);
                let jump = |x: T| {
                    let (g0, g1) = (top.gradient(x, col.period), bottom.gradient(x, T::zero()));
                    norm2(g1[0] - g0[0], g1[1] - g0[1])
                };
                let r = integrate(jump, col.x0, col.x1, opts);
                if !r.converged {
                    return Err(quad_err(format!("seam of column {ci}"), r.error));
                }
                if r.value > T::zero() {
                    out.push(Interface {
                        kind: InterfaceKind::Seam { column: ci, x0: col.x0, x1: col.x1 },
                        multiplicity: T::lit((col.copies - 1) as f64),
                        length: col.x1 - col.x0,
                        jump_integral: r.value,
                        gradient_minus: top.gradient(xm, col.period),
                        gradient_plus: bottom.gradient(xm, T::zero()),
                    });
                }
            }
        }
        for (li, w) in self.columns.windows(2).enumerate() {
            if let Some(iface) = self.vertical_interface(li, &w[0], &w[1])? {
                out.push(iface);
            }
        }
        Ok(out)
    }

    fn vertical_interface(&self, li: usize, a: &Column<T>, b: &Column<T>) -> Result<Option<Interface<T>>> {
        let x = a.x1;
        let (small, big) = if a.period <= b.period { (a, b) } else { (b, a) };
        let ratio = big.period / small.period;
        let reps = ratio.round();
        if (ratio - reps).abs() > ratio * T::lit(1e-9) || reps.to_f64_lossy() > MAX_PERIOD_RATIO {
            return Err(Error::InvalidProfile(format!(
                "columns {li} and {} have incommensurate periods",
                li + 1
            )));
        }
        let reps = reps.to_f64_lossy() as u64;
        let mut knots = Vec::new();
        for r in 0..reps {
            let off = T::lit(r as f64) * small.period;
            knots.extend(small.breaks_at(x).into_iter().map(|c| off + c));
        }
        knots.extend(big.breaks_at(x));
        let pattern_y = |col: &Column<T>, y: T| {
            let k = (y / col.period).floor().max(T::zero());
            y - k * col.period
        };
        let jump = |y: T| {
            let ga = a.pattern_gradient(x, pattern_y(a, y));
            let gb = b.pattern_gradient(x, pattern_y(b, y));
            norm2(gb[0] - ga[0], gb[1] - ga[1])
        };
        let r = integrate_with_breaks(jump, T::zero(), big.period, &knots, QuadOptions::default());
        if !r.converged {
            return Err(Error::Quadrature {
                context: format!("vertical interface after column {li}"),
                error: r.error.to_f64_lossy(),
            });
        }
        if r.value <= T::zero() {
            return Ok(None);
        }
        // Report gradients at the midpoint of the first sub-interval with a jump.
        let mut probe = big.period * T::lit(0.5);
        knots.push(T::zero());
        knots.push(big.period);
        knots.sort_by(|p, q| p.partial_cmp(q).expect("finite"));
        for w in knots.windows(2) {
            let m = (w[0] + w[1]) * T::lit(0.5);
            if w[1] > w[0] && jump(m) > T::zero() {
                probe = m;
                break;
            }
        }
        Ok(Some(Interface {
            kind: InterfaceKind::Vertical { left: li, x },
            multiplicity: big.copies_real(),
            length: big.period,
            jump_integral: r.value,
            gradient_minus: a.pattern_gradient(x, pattern_y(a, probe)),
            gradient_plus: b.pattern_gradient(x, pattern_y(b, probe)),
        }))
    }

    /// Total `int |[grad v]|` over all interfaces.
    pub fn interface_variation(&self) -> Result<T> {
        Ok(crate::scalar::compensated_sum(
            self.interfaces()?.iter().map(Interface::total),
        ))
    }

    /// Exact `|D^2 v|` of the profile: smooth part plus interfaces.
    pub fn second_total_variation(&self) -> Result<T> {
        Ok(self.smooth_hessian_variation()? + self.interface_variation()?)
    }

    /// Number of individual cells, counting periodic copies.
    pub fn cell_count(&self) -> f64 {
        self.columns
            .iter()
            .map(|c| c.layers() as f64 * c.copies as f64)
            .sum()
    }
}

fn swap_bc(bc: BoundaryCondition) -> BoundaryCondition {
    match bc {
        BoundaryCondition::DirichletLeftZero => BoundaryCondition::DirichletLeftIdentity,
        BoundaryCondition::DirichletLeftIdentity => BoundaryCondition::DirichletLeftZero,
        BoundaryCondition::None => BoundaryCondition::None,
    }
}

#[inline]
fn norm2<T: Real>(a: T, b: T) -> T {
    a.hypot(b)
}

/// Common refinement of two columns with identical x-range and periodicity.
fn merge_columns<T: Real>(a: &Column<T>, b: &Column<T>) -> Result<Column<T>> {
    let xm = (a.x0 + a.x1) / T::lit(2.0);
    let mut curves: Vec<Poly1<T>> = a.curves.clone();
    for c in &b.curves[1..b.curves.len() - 1] {
        curves.push(c.clone());
    }
    curves.sort_by(|p, q| p.eval(xm).partial_cmp(&q.eval(xm)).expect("finite"));
    for w in curves.windows(2) {
        if w[1].sub(&w[0]).min_on(a.x0, a.x1) < -a.period * T::lit(AREA_TOL) {
            return Err(Error::InvalidProfile("layer curves cross; no common refinement".into()));
        }
    }
    curves.dedup_by(|p, q| p == q);
    let mut maps = Vec::with_capacity(curves.len() - 1);
    for w in curves.windows(2) {
        let ym = (w[0].eval(xm) + w[1].eval(xm)) / T::lit(2.0);
        let ma = &a.maps[a.layer_at(xm, ym)];
        let mb = &b.maps[b.layer_at(xm, ym)];
        maps.push(ma.add(mb));
    }
    Ok(Column {
        value_step: a.value_step + b.value_step,
        curves,
        maps,
        ..a.clone()
    })
}

/// Node-centered sampling of a profile (see [`AnalyticProfile::sample`]).
pub fn sample_profile<T: Real>(
    p: &AnalyticProfile<T>,
    nx: usize,
    ny: usize,
    bc: BoundaryCondition,
) -> Result<GridField<T>> {
    p.sample(nx, ny, bc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use BoundaryCondition::*;

    fn two_slabs(theta: f64) -> AnalyticProfile<f64> {
        // v = -theta x2 below 1/2, (1 - theta) x2 - 1/2 above.
        let col = Column::slab(
            0.0,
            1.0,
            0.0,
            1.0,
            vec![Poly1::constant(0.5)],
            vec![
                Poly2::affine(0.0, 0.0, -theta),
                Poly2::affine(-0.5, 0.0, 1.0 - theta),
            ],
        );
        AnalyticProfile::new(Rect::unit(), vec![col], None).unwrap()
    }

    #[test]
    fn single_zero_cell_samples_to_zero() {
        let p = AnalyticProfile::<f64>::single(Rect::unit(), Poly2::zero(), DirichletLeftZero).unwrap();
        let f = p.sample(9, 9, DirichletLeftZero).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
        assert_eq!(f.bc(), DirichletLeftZero);
    }

    #[test]
    fn identity_profile_samples_ordinates() {
        let p = AnalyticProfile::single(Rect::unit(), Poly2::affine(0.0, 0.0, 1.0), DirichletLeftIdentity).unwrap();
        let f = p.sample(5, 11, DirichletLeftIdentity).unwrap();
        for j in 0..11 {
            assert_eq!(f.get(2, j), f.x2(j));
        }
        assert_eq!(f.bc(), DirichletLeftIdentity);
    }

    #[test]
    fn two_slab_slopes_survive_sampling() {
        let theta = 0.25;
        let p = two_slabs(theta);
        p.validate().unwrap();
        let f = p.sample(9, 33, None).unwrap();
        let d = f.d2().unwrap();
        for j in 0..32 {
            let expected = if j < 16 { -theta } else { 1.0 - theta };
            assert!((d.get(4, j) - expected).abs() < 1e-12, "row {j}: {}", d.get(4, j));
        }
        let tv = p.second_total_variation().unwrap();
        assert_relative_eq!(tv, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn boundary_ties_resolve_to_lower_left_cell() {
        let p = two_slabs(0.25);
        // On the interface both maps agree; gradient comes from the lower cell.
        assert_eq!(p.gradient(0.3, 0.5), [0.0, -0.25]);
    }

    #[test]
    fn structure_errors_are_reported() {
        let bad = Column::slab(0.0, 0.5, 0.0, 1.0, vec![], vec![Poly2::zero()]);
        assert!(AnalyticProfile::new(Rect::unit(), vec![bad], None).is_err());
        let crossing = Column::slab(
            0.0,
            1.0,
            0.0,
            1.0,
            vec![Poly1::linear(0.2, 0.6), Poly1::linear(0.6, -0.6)],
            vec![Poly2::zero(), Poly2::zero(), Poly2::zero()],
        );
        assert!(AnalyticProfile::new(Rect::unit(), vec![crossing], None).is_err());
    }

    #[test]
    fn discontinuity_detected() {
        let col = Column::slab(
            0.0,
            1.0,
            0.0,
            1.0,
            vec![Poly1::constant(0.5)],
            vec![Poly2::zero(), Poly2::constant(1.0)],
        );
        let p = AnalyticProfile::new(Rect::unit(), vec![col], None).unwrap();
        assert!(p.validate().is_err());
        assert!(!p.discontinuities(10).is_empty());
    }

    #[test]
    fn periodic_column_matches_explicit_copies() {
        // Sawtooth-like continuous pattern: slope -1 then +1 on each period 1/4.
        let period = 0.25;
        let pattern = Column {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            period,
            copies: 4,
            value_step: 0.0,
            curves: vec![Poly1::constant(0.0), Poly1::constant(0.125), Poly1::constant(period)],
            maps: vec![Poly2::affine(0.0, 0.0, -1.0), Poly2::affine(-0.25, 0.0, 1.0)],
        };
        let p = AnalyticProfile::new(Rect::unit(), vec![pattern], None).unwrap();
        p.validate().unwrap();
        assert_relative_eq!(p.eval(0.5, 0.25 + 0.0625), -0.0625, epsilon = 1e-15);
        // 4 internal kinks + 3 seams, each with jump 2 over length 1.
        assert_relative_eq!(p.second_total_variation().unwrap(), 14.0, epsilon = 1e-12);
    }

    #[test]
    fn vertical_interface_between_columns() {
        // v = 0 for x1 < 1/2, 2 (x1 - 1/2) after: jump 2 along a unit vertical line.
        let left = Column::slab(0.0, 0.5, 0.0, 1.0, vec![], vec![Poly2::zero()]);
        let right = Column::slab(0.5, 1.0, 0.0, 1.0, vec![], vec![Poly2::affine(-1.0, 2.0, 0.0)]);
        let p = AnalyticProfile::new(Rect::unit(), vec![left, right], DirichletLeftZero).unwrap();
        p.validate().unwrap();
        let ifs = p.interfaces().unwrap();
        assert_eq!(ifs.len(), 1);
        assert_relative_eq!(ifs[0].total(), 2.0, epsilon = 1e-14);
        assert!(p.satisfies(DirichletLeftZero));
    }

    #[test]
    fn rescaling_round_trip() {
        let theta = 0.1;
        let v = two_slabs(theta);
        let u = v.rescale_v_to_u(theta).unwrap();
        let back = u.rescale_u_to_v(theta).unwrap();
        for (x, y) in [(0.1, 0.2), (0.7, 0.9), (0.5, 0.5)] {
            assert_relative_eq!(u.eval(x, y), y + v.eval(x, y) / theta, epsilon = 1e-14);
            assert!((back.eval(x, y) - v.eval(x, y)).abs() < 1e-14);
        }
    }

    #[test]
    fn addition_commutes_with_sampling() {
        let a = two_slabs(0.25);
        let col = Column::slab(
            0.0,
            1.0,
            0.0,
            1.0,
            vec![Poly1::linear(0.1, 0.3)],
            vec![Poly2::affine(0.0, 0.3, 0.0), Poly2::affine(-0.05, 0.15, 0.5)],
        );
        let b = AnalyticProfile::new(Rect::unit(), vec![col], None).unwrap();
        b.validate().unwrap();
        let s = a.add(&b).unwrap();
        s.validate().unwrap();
        let (fa, fb, fs) = (
            a.sample(17, 17, None).unwrap(),
            b.sample(17, 17, None).unwrap(),
            s.sample(17, 17, None).unwrap(),
        );
        for k in 0..fa.values().len() {
            assert!((fa.values()[k] + fb.values()[k] - fs.values()[k]).abs() < 1e-14);
        }
    }
}
