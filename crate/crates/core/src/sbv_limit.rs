//! Limit objects with horizontal, nonnegative jumps and the limit energy
//! `int |d1 u|^p + |d2 u|^p + 2 sigma H^1(J_u)`.

use serde::{Deserialize, Serialize};

use crate::energy::{EnergyBreakdown, EnergyParams, Form};
use crate::error::{Error, Result};
use crate::fields::{AnalyticProfile, BoundaryCondition, Rect};
use crate::poly::PiecewisePoly;
use crate::scalar::{compensated_sum, Real};

pub const DEFAULT_GAP_MIN: f64 = 1e-3;
const TOL: f64 = 1e-10;

/// `[u](x1, y) = h(x1)` for `a <= x1 <= b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpSegment<T> {
    pub y: T,
    pub a: T,
    pub b: T,
    pub h: PiecewisePoly<T>,
}

impl<T: Real> JumpSegment<T> {
    /// Measure of `{h > 0}`.
    pub fn active_length(&self) -> T {
        self.h.positive_measure()
    }

    pub fn max_jump(&self) -> T {
        self.h.max_abs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct PiecewiseSBV<T> {
    /// Bulk part; its value maps jump across the segments by `h`.
    pub smooth: AnalyticProfile<T>,
    #[serde(default)]
    pub jumps: Vec<JumpSegment<T>>,
    pub p: T,
    pub sigma: T,
    #[serde(default = "default_gap")]
    pub gap_min: T,
}

fn default_gap<T: Real>() -> T {
    T::lit(DEFAULT_GAP_MIN)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Structure,
    Trace,
    NegativeJump,
    SegmentRange,
    Gap,
    JumpMismatch,
    Parameter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub location: Option<[f64; 2]>,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, location: Option<[f64; 2]>, message: impl Into<String>) {
        self.violations.push(Violation {
            kind,
            location,
            message: message.into(),
        });
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.passes() {
            return write!(f, "valid");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            match v.location {
                Some([x, y]) => write!(f, "{:?} at ({x}, {y}): {}", v.kind, v.message)?,
                None => write!(f, "{:?}: {}", v.kind, v.message)?,
            }
        }
        Ok(())
    }
}

impl<T: Real> PiecewiseSBV<T> {
    pub fn new(smooth: AnalyticProfile<T>, jumps: Vec<JumpSegment<T>>, p: T, sigma: T) -> Self {
        Self {
            smooth,
            jumps,
            p,
            sigma,
            gap_min: T::lit(DEFAULT_GAP_MIN),
        }
    }

    fn on_segment(&self, x1: T, x2: T) -> bool {
        let tol = T::lit(TOL);
        self.jumps
            .iter()
            .any(|s| (x2 - s.y).abs() <= tol && x1 >= s.a - tol && x1 <= s.b + tol)
    }

    /// Checks every invariant and lists each violation.
    pub fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::default();
        let f = |t: T| t.to_f64_lossy();
        if !(self.p >= T::one()) || !self.p.is_finite() {
            r.push(ViolationKind::Parameter, None, format!("p = {} must be >= 1", self.p));
        }
        if !(self.sigma > T::zero()) || !self.sigma.is_finite() {
            r.push(ViolationKind::Parameter, None, format!("sigma = {} must be positive", self.sigma));
        }
        if !(self.gap_min > T::zero()) {
            r.push(ViolationKind::Parameter, None, "gap_min must be positive");
        }
        if self.smooth.domain != Rect::unit() {
            r.push(ViolationKind::Structure, None, "domain must be the unit square");
        }
        if let Err(e) = self.smooth.check_structure() {
            r.push(ViolationKind::Structure, None, e.to_string());
            return r;
        }
        let tol = T::lit(TOL);
        for (k, s) in self.jumps.iter().enumerate() {
            let loc = Some([f(s.a), f(s.y)]);
            if !(s.y > T::zero() && s.y < T::one()) {
                r.push(ViolationKind::SegmentRange, loc, format!("segment {k}: y outside (0, 1)"));
            }
            if !(s.a >= T::zero() && s.a < s.b && s.b <= T::one()) {
                r.push(ViolationKind::SegmentRange, loc, format!("segment {k}: need 0 <= a < b <= 1"));
                continue;
            }
            if let Err(m) = s.h.validate() {
                r.push(ViolationKind::SegmentRange, loc, format!("segment {k}: {m}"));
                continue;
            }
            if (s.h.start() - s.a).abs() > tol || (s.h.end() - s.b).abs() > tol {
                r.push(ViolationKind::SegmentRange, loc, format!("segment {k}: h must span [a, b]"));
            }
            let min = s.h.min_value();
            if min < -tol {
                r.push(
                    ViolationKind::NegativeJump,
                    loc,
                    format!("segment {k}: negative jump, min h = {min}"),
                );
            }
            if s.a <= tol && s.h.eval(s.a).abs() > tol {
                r.push(
                    ViolationKind::Trace,
                    Some([0.0, f(s.y)]),
                    format!("segment {k}: trace broken, h(0) = {}", s.h.eval(s.a)),
                );
            }
            for n in 0..32 {
                let x = s.a + (s.b - s.a) * (T::from_count(n) + T::lit(0.5)) / T::lit(32.0);
                let (below, above) = self.one_sided(x, s.y);
                let want = s.h.eval(x);
                if ((above - below) - want).abs() > T::lit(1e-8) * T::one().max(want.abs()) {
                    r.push(
                        ViolationKind::JumpMismatch,
                        Some([f(x), f(s.y)]),
                        format!("segment {k}: profile jumps by {} but h = {want}", above - below),
                    );
                    break;
                }
            }
        }
        for i in 0..self.jumps.len() {
            for j in i + 1..self.jumps.len() {
                let (s, t) = (&self.jumps[i], &self.jumps[j]);
                let overlap = s.a.max(t.a) < s.b.min(t.b);
                if overlap && (s.y - t.y).abs() < self.gap_min {
                    r.push(
                        ViolationKind::Gap,
                        Some([f(s.a.max(t.a)), f(s.y)]),
                        format!("segments {i} and {j} are closer than gap_min"),
                    );
                }
            }
        }
        if !self.smooth.satisfies(BoundaryCondition::DirichletLeftIdentity) {
            r.push(ViolationKind::Trace, Some([0.0, 0.0]), "trace u(0, x2) = x2 violated");
        }
        for d in self.smooth.discontinuities(64) {
            if !self.on_segment(d.x1, d.x2) {
                r.push(
                    ViolationKind::JumpMismatch,
                    Some([f(d.x1), f(d.x2)]),
                    format!("undeclared jump {} -> {}", d.below_or_left, d.above_or_right),
                );
                break;
            }
        }
        r
    }

    /// Values of the bulk part just below and just above `(x1, y)`.
    fn one_sided(&self, x1: T, y: T) -> (T, T) {
        let col = &self.smooth.columns[self.smooth.column_index(x1)];
        let (_, loc) = col.local(y);
        let l = col.layer_at(x1, loc);
        let below = col.maps[l].eval(x1, loc);
        let above = if l + 1 < col.layers() && (col.curves[l + 1].eval(x1) - loc).abs() <= T::lit(TOL) {
            col.maps[l + 1].eval(x1, loc)
        } else {
            below
        };
        (below, above)
    }

    fn ensure_valid(&self) -> Result<()> {
        let r = self.validate();
        if r.passes() {
            Ok(())
        } else {
            Err(Error::InvalidLimit(r.to_string()))
        }
    }
}

/// `H^1(J_u)`: total length where the jump is positive.
pub fn jump_length<T: Real>(u: &PiecewiseSBV<T>) -> T {
    compensated_sum(u.jumps.iter().map(JumpSegment::active_length))
}

/// Parameters recorded on a limit breakdown (`theta = epsilon = 0`).
pub fn limit_params<T: Real>(p: T, sigma: T) -> EnergyParams<T> {
    EnergyParams {
        p,
        theta: T::zero(),
        epsilon: T::zero(),
        sigma,
        form: Form::Rescaled,
    }
}

pub fn limit_energy<T: Real>(u: &PiecewiseSBV<T>) -> Result<EnergyBreakdown<T>> {
    u.ensure_valid()?;
    let p = u.p;
    let e1 = u.smooth.integrate_gradient(|g| g[0].abs().powf(p), "limit d1")?;
    let e2 = u.smooth.integrate_gradient(|g| g[1].abs().powf(p), "limit d2")?;
    let surf = T::lit(2.0) * u.sigma * jump_length(u);
    Ok(EnergyBreakdown::new(e1, e2, surf, limit_params(p, u.sigma)))
}

/// `u = x2 + delta x1 1_{x2 > y}` with jump profile `delta x1`.
pub fn single_jump_example<T: Real>(y: T, delta: T, p: T, sigma: T) -> Result<PiecewiseSBV<T>> {
    use crate::fields::Column;
    use crate::poly::{Poly1, Poly2};
    let col = Column::slab(
        T::zero(),
        T::one(),
        T::zero(),
        T::one(),
        vec![Poly1::constant(y)],
        vec![
            Poly2::affine(T::zero(), T::zero(), T::one()),
            Poly2::affine(T::zero(), delta, T::one()),
        ],
    );
    let smooth = AnalyticProfile::new(Rect::unit(), vec![col], BoundaryCondition::DirichletLeftIdentity)?;
    let seg = JumpSegment {
        y,
        a: T::zero(),
        b: T::one(),
        h: PiecewisePoly::single(T::zero(), T::one(), Poly1::linear(T::zero(), delta)),
    };
    Ok(PiecewiseSBV::new(smooth, vec![seg], p, sigma))
}
