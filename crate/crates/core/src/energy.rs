//! The martensite energy in unrescaled (`v`, parameters `p, theta, eps`) and
//! rescaled (`u = x2 + v/theta`, parameters `p, theta, sigma`) form.
//!
//! ```text
//! I(v) = int |d1 v|^p + min{|d2 v + theta|^p, |d2 v - (1 - theta)|^p} + eps |D^2 v|
//! E(u) = int |d1 u|^p + min{|d2 u|^p, |d2 u - 1/theta|^p} + sigma theta |D^2 u|
//! ```
//!
//! with `eps = sigma theta^p` and `I(v) = theta^p E(u)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{AnalyticProfile, BoundaryCondition, GridField};
use crate::scalar::{CompensatedSum, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Form {
    Unrescaled,
    Rescaled,
}

impl Form {
    /// Boundary condition of the admissible class.
    pub fn boundary_condition(self) -> BoundaryCondition {
        match self {
            Form::Unrescaled => BoundaryCondition::DirichletLeftZero,
            Form::Rescaled => BoundaryCondition::DirichletLeftIdentity,
        }
    }
}

/// `(p, theta, eps, sigma)` with `eps = sigma * theta^p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams<T> {
    pub p: T,
    pub theta: T,
    pub epsilon: T,
    pub sigma: T,
    pub form: Form,
}

impl<T: Real> EnergyParams<T> {
    pub fn unrescaled(p: T, theta: T, epsilon: T) -> Result<Self> {
        Self::check_common(p, theta)?;
        if !(epsilon > T::zero()) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self {
            p,
            theta,
            epsilon,
            sigma: epsilon / theta.powf(p),
            form: Form::Unrescaled,
        })
    }

    pub fn rescaled(p: T, theta: T, sigma: T) -> Result<Self> {
        Self::check_common(p, theta)?;
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self {
            p,
            theta,
            epsilon: sigma * theta.powf(p),
            sigma,
            form: Form::Rescaled,
        })
    }

    fn check_common(p: T, theta: T) -> Result<()> {
        if !(p > T::one()) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("p must exceed 1, got {p}")));
        }
        if !(theta > T::zero() && theta <= T::lit(0.5)) {
            return Err(Error::InvalidParameter(format!("theta must lie in (0, 1/2], got {theta}")));
        }
        Ok(())
    }

    /// Re-checks the invariants, including `eps = sigma theta^p`.
    pub fn validate(&self) -> Result<()> {
        match self.form {
            Form::Unrescaled => Self::unrescaled(self.p, self.theta, self.epsilon)?,
            Form::Rescaled => Self::rescaled(self.p, self.theta, self.sigma)?,
        };
        let expected = self.sigma * self.theta.powf(self.p);
        if (self.epsilon - expected).abs() > T::lit(1e-12) * expected {
            return Err(Error::InvalidParameter("epsilon != sigma * theta^p".into()));
        }
        Ok(())
    }

    /// Same physical parameters in the other form.
    pub fn with_form(&self, form: Form) -> Self {
        Self { form, ..*self }
    }

    /// Coefficient of `|D^2 .|`: `eps` or `sigma theta`.
    pub fn interfacial_weight(&self) -> T {
        match self.form {
            Form::Unrescaled => self.epsilon,
            Form::Rescaled => self.sigma * self.theta,
        }
    }

    /// The double-well density of the active form.
    #[inline]
    pub fn double_well(&self, t: T) -> T {
        match self.form {
            Form::Unrescaled => double_well_unrescaled(t, self),
            Form::Rescaled => double_well_rescaled(t, self),
        }
    }

    /// `|t|^p`.
    #[inline]
    pub fn power(&self, t: T) -> T {
        t.abs().powf(self.p)
    }

    /// `theta^p`, the energy of the uniform state.
    pub fn theta_p(&self) -> T {
        self.theta.powf(self.p)
    }
}

/// `min{|t + theta|^p, |t - (1 - theta)|^p}`.
#[inline]
pub fn double_well_unrescaled<T: Real>(t: T, params: &EnergyParams<T>) -> T {
    let a = (t + params.theta).abs();
    let b = (t - (T::one() - params.theta)).abs();
    a.min(b).powf(params.p)
}

/// `min{|t|^p, |t - 1/theta|^p}`.
#[inline]
pub fn double_well_rescaled<T: Real>(t: T, params: &EnergyParams<T>) -> T {
    let a = t.abs();
    let b = (t - params.theta.recip()).abs();
    a.min(b).powf(params.p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown<T> {
    pub elastic_d1: T,
    pub elastic_d2: T,
    pub interfacial: T,
    pub total: T,
    pub params: EnergyParams<T>,
}

impl<T: Real> EnergyBreakdown<T> {
    pub fn new(elastic_d1: T, elastic_d2: T, interfacial: T, params: EnergyParams<T>) -> Self {
        let total = crate::scalar::compensated_sum([elastic_d1, elastic_d2, interfacial]);
        Self {
            elastic_d1,
            elastic_d2,
            interfacial,
            total,
            params,
        }
    }

    /// Multiplies every part (used to convert between forms).
    pub fn scaled(&self, s: T, params: EnergyParams<T>) -> Self {
        Self::new(self.elastic_d1 * s, self.elastic_d2 * s, self.interfacial * s, params)
    }
}

/// Grid energy of an admissible field: the tag must match the form's class.
pub fn energy_grid<T: Real>(f: &GridField<T>, params: &EnergyParams<T>) -> Result<EnergyBreakdown<T>> {
    let expected = params.form.boundary_condition();
    if f.bc() != expected {
        return Err(Error::BoundaryMismatch {
            expected: expected.to_string(),
            found: f.bc().to_string(),
        });
    }
    evaluate_grid(f, params)
}

/// The discrete functional without the admissibility check.
///
/// Elastic terms use the midpoint rule per cell with the cell gradient
/// obtained by averaging forward differences on opposite cell edges; the
/// interfacial term is the weight times [`GridField::second_total_variation`].
pub fn evaluate_grid<T: Real>(f: &GridField<T>, params: &EnergyParams<T>) -> Result<EnergyBreakdown<T>> {
    let (nx, ny) = (f.nx(), f.ny());
    if nx < 3 || ny < 3 {
        return Err(Error::GridTooSmall { nx, ny, min: 3 });
    }
    let (hx, hy) = f.spacing();
    let (sx, sy) = (T::from_count(nx - 1), T::from_count(ny - 1));
    let half = T::lit(0.5);
    let mut e1 = CompensatedSum::new();
    let mut e2 = CompensatedSum::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let g1 = half * ((f.get(i + 1, j) - f.get(i, j)) + (f.get(i + 1, j + 1) - f.get(i, j + 1))) * sx;
            let g2 = half * ((f.get(i, j + 1) - f.get(i, j)) + (f.get(i + 1, j + 1) - f.get(i + 1, j))) * sy;
            e1.add(params.power(g1));
            e2.add(params.double_well(g2));
        }
    }
    let cell = hx * hy;
    let tv = f.second_total_variation()?;
    Ok(EnergyBreakdown::new(
        e1.value() * cell,
        e2.value() * cell,
        params.interfacial_weight() * tv,
        *params,
    ))
}

/// Exact energy of a piecewise-polynomial profile.
///
/// Affine layers are integrated in closed form, curved or polynomial layers
/// by adaptive quadrature; the interfacial part is the weight times the
/// Hessian variation of the smooth layers plus the integrated gradient jumps.
pub fn energy_analytic<T: Real>(prof: &AnalyticProfile<T>, params: &EnergyParams<T>) -> Result<EnergyBreakdown<T>> {
    let e1 = prof.integrate_gradient(|g| params.power(g[0]), "elastic d1")?;
    let e2 = prof.integrate_gradient(|g| params.double_well(g[1]), "elastic d2")?;
    let tv = prof.second_total_variation()?;
    Ok(EnergyBreakdown::new(e1, e2, params.interfacial_weight() * tv, *params))
}

/// `u = x2 + v / theta` on a grid; the Dirichlet tag is carried over.
pub fn rescale_grid_v_to_u<T: Real>(v: &GridField<T>, theta: T) -> Result<GridField<T>> {
    if !(theta > T::zero()) {
        return Err(Error::InvalidParameter("theta must be positive".into()));
    }
    let u = v.map(|_, x2, val| x2 + val / theta)?;
    let bc = match v.bc() {
        BoundaryCondition::DirichletLeftZero => BoundaryCondition::DirichletLeftIdentity,
        _ => BoundaryCondition::None,
    };
    retag(u, bc)
}

/// `v = theta (u - x2)` on a grid.
pub fn rescale_grid_u_to_v<T: Real>(u: &GridField<T>, theta: T) -> Result<GridField<T>> {
    if !(theta > T::zero()) {
        return Err(Error::InvalidParameter("theta must be positive".into()));
    }
    let v = u.map(|_, x2, val| theta * (val - x2))?;
    let bc = match u.bc() {
        BoundaryCondition::DirichletLeftIdentity => BoundaryCondition::DirichletLeftZero,
        _ => BoundaryCondition::None,
    };
    retag(v, bc)
}

fn retag<T: Real>(f: GridField<T>, bc: BoundaryCondition) -> Result<GridField<T>> {
    if f.satisfies(bc) {
        f.with_bc(bc)
    } else {
        Ok(f)
    }
}

/// Either representation accepted by [`rescale_v_to_u`].
#[derive(Clone, Debug)]
pub enum Field<T> {
    Grid(GridField<T>),
    Profile(AnalyticProfile<T>),
}

/// `u = x2 + v / theta` for grids or profiles.
pub fn rescale_v_to_u<T: Real>(v: &Field<T>, theta: T) -> Result<Field<T>> {
    Ok(match v {
        Field::Grid(g) => Field::Grid(rescale_grid_v_to_u(g, theta)?),
        Field::Profile(p) => Field::Profile(p.rescale_v_to_u(theta)?),
    })
}

/// `v = theta (u - x2)` for grids or profiles.
pub fn rescale_u_to_v<T: Real>(u: &Field<T>, theta: T) -> Result<Field<T>> {
    Ok(match u {
        Field::Grid(g) => Field::Grid(rescale_grid_u_to_v(g, theta)?),
        Field::Profile(p) => Field::Profile(p.rescale_u_to_v(theta)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Column, Rect};
    use crate::poly::{Poly1, Poly2};
    use approx::assert_relative_eq;
    use BoundaryCondition::*;

    fn unres(p: f64, theta: f64, eps: f64) -> EnergyParams<f64> {
        EnergyParams::unrescaled(p, theta, eps).unwrap()
    }

    #[test]
    fn params_reject_bad_values() {
        assert!(EnergyParams::unrescaled(1.0, 0.25, 1e-3).is_err());
        assert!(EnergyParams::unrescaled(2.0, 0.6, 1e-3).is_err());
        assert!(EnergyParams::unrescaled(2.0, 0.0, 1e-3).is_err());
        assert!(EnergyParams::rescaled(2.0, 0.25, 0.0).is_err());
        let p = EnergyParams::rescaled(3.0, 0.1, 2.0).unwrap();
        assert_relative_eq!(p.epsilon, 2e-3, max_relative = 1e-12);
        p.validate().unwrap();
    }

    #[test]
    fn unrescaled_well_values() {
        let p = unres(2.0, 0.25, 1e-3);
        assert_eq!(double_well_unrescaled(-0.25, &p), 0.0);
        assert_eq!(double_well_unrescaled(0.75, &p), 0.0);
        assert_eq!(double_well_unrescaled(0.0, &p), 0.0625);
    }

    #[test]
    fn rescaled_well_values() {
        let p = EnergyParams::rescaled(2.5, 0.2, 1.0).unwrap();
        assert_eq!(double_well_rescaled(0.0, &p), 0.0);
        assert_eq!(double_well_rescaled(5.0, &p), 0.0);
        assert_relative_eq!(double_well_rescaled(2.5, &p), 2.5f64.powf(2.5), max_relative = 1e-15);
    }

    #[test]
    fn well_is_monotone_between_and_outside_wells() {
        let p = unres(1.5, 0.3, 1.0);
        let xs: Vec<f64> = (0..=400).map(|k| -1.0 + 2.5 * k as f64 / 400.0).collect();
        let mid = 0.5 - p.theta;
        for w in xs.windows(2) {
            let (a, b) = (double_well_unrescaled(w[0], &p), double_well_unrescaled(w[1], &p));
            let x = 0.5 * (w[0] + w[1]);
            if x < -p.theta || (x > mid && x < 1.0 - p.theta) {
                assert!(b < a, "should decrease at {x}");
            } else if (x > -p.theta && x < mid) || x > 1.0 - p.theta {
                assert!(b > a, "should increase at {x}");
            }
        }
    }

    #[test]
    fn zero_field_has_uniform_energy() {
        let p = unres(2.0, 0.25, 0.01);
        let v = GridField::from_fn(17, 17, DirichletLeftZero, |_, _| 0.0).unwrap();
        let e = energy_grid(&v, &p).unwrap();
        assert_eq!(e.elastic_d1, 0.0);
        assert_eq!(e.interfacial, 0.0);
        assert_relative_eq!(e.total, 0.0625, max_relative = 1e-14);
    }

    #[test]
    fn identity_field_has_unit_rescaled_energy() {
        let p = EnergyParams::rescaled(2.0, 0.5, 1.0).unwrap();
        let u = GridField::from_fn(33, 33, DirichletLeftIdentity, |_, y| y).unwrap();
        let e = energy_grid(&u, &p).unwrap();
        assert_relative_eq!(e.elastic_d2, 1.0, max_relative = 1e-12);
        assert!(e.total - 1.0 < 1e-10);
    }

    #[test]
    fn bc_mismatch_is_an_error() {
        let p = unres(2.0, 0.25, 0.01);
        let u = GridField::from_fn(9, 9, DirichletLeftIdentity, |_, y| y).unwrap();
        assert!(matches!(energy_grid(&u, &p), Err(Error::BoundaryMismatch { .. })));
    }

    #[test]
    fn analytic_affine_cell_in_a_well() {
        let theta = 0.25;
        let p = unres(2.0, theta, 0.01);
        let prof = AnalyticProfile::single(Rect::unit(), Poly2::affine(0.0, 0.0, -theta), None).unwrap();
        let e = energy_analytic(&prof, &p).unwrap();
        assert_eq!((e.elastic_d1, e.elastic_d2, e.interfacial), (0.0, 0.0, 0.0));
    }

    #[test]
    fn analytic_two_slabs_interfacial_is_eps() {
        let theta = 0.25;
        let eps = 0.0123;
        let col = Column::slab(
            0.0,
            1.0,
            0.0,
            1.0,
            vec![Poly1::constant(0.5)],
            vec![Poly2::affine(0.0, 0.0, -theta), Poly2::affine(-0.5, 0.0, 1.0 - theta)],
        );
        let prof = AnalyticProfile::new(Rect::unit(), vec![col], None).unwrap();
        let e = energy_analytic(&prof, &unres(2.0, theta, eps)).unwrap();
        assert_relative_eq!(e.interfacial, eps, max_relative = 1e-14);
        assert_eq!(e.elastic_d2, 0.0);
    }

    #[test]
    fn breakdown_total_is_sum() {
        let p = unres(2.0, 0.25, 0.01);
        let b = EnergyBreakdown::new(0.1, 0.2, 0.3, p);
        assert_relative_eq!(b.total, 0.6, max_relative = 1e-15);
        let json = serde_json::to_value(b).unwrap();
        for key in ["elastic_d1", "elastic_d2", "interfacial", "total", "params"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn grid_rescaling_round_trip() {
        let theta = 0.1;
        let v = GridField::<f64>::from_fn(11, 11, DirichletLeftZero, |x, y| x * (y - 0.5).sin()).unwrap();
        let u = rescale_grid_v_to_u(&v, theta).unwrap();
        assert_eq!(u.bc(), DirichletLeftIdentity);
        let back = rescale_grid_u_to_v(&u, theta).unwrap();
        assert_eq!(back.bc(), DirichletLeftZero);
        for (a, b) in v.values().iter().zip(back.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(rescale_grid_v_to_u(&v, 0.0).is_err());
        let zero = GridField::from_fn(5, 5, DirichletLeftZero, |_, _| 0.0).unwrap();
        let ident = rescale_grid_v_to_u(&zero, 0.3).unwrap();
        for j in 0..5 {
            assert_eq!(ident.get(2, j), ident.x2(j));
        }
    }
}
