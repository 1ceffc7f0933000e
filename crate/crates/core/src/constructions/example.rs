//! Bounded energy with unbounded `||d2 u||_{L^1}`: a thin wedge near the top
//! edge where `d2 u = 1/theta`.

use crate::error::{Error, Result};
use crate::fields::{AnalyticProfile, BoundaryCondition, Column, Rect};
use crate::poly::{Poly1, Poly2};
use crate::scalar::Real;

/// `u = x2/theta + (1 - 1/theta)(1 - theta^alpha x1)` above the line
/// `x2 = 1 - theta^alpha x1`, `u = x2` below; needs `p/(p+1) < alpha < 1`.
pub fn example_sequence<T: Real>(theta: T, alpha: T, p: T) -> Result<AnalyticProfile<T>> {
    if !(theta > T::zero() && theta <= T::lit(0.5)) {
        return Err(Error::InvalidParameter(format!("theta must lie in (0, 1/2], got {theta}")));
    }
    let lo = p / (p + T::one());
    if !(alpha > lo && alpha < T::one()) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside ({lo}, 1)")));
    }
    let slope = theta.powf(alpha);
    let inv = T::one() / theta;
    let c = T::one() - inv;
    let line = Poly1::linear(T::one(), -slope);
    let upper = Poly2::affine(c, -c * slope, inv);
    let col = Column::slab(
        T::zero(),
        T::one(),
        T::zero(),
        T::one(),
        vec![line],
        vec![Poly2::affine(T::zero(), T::zero(), T::one()), upper],
    );
    AnalyticProfile::new(Rect::unit(), vec![col], BoundaryCondition::DirichletLeftIdentity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{energy_analytic, EnergyParams};

    #[test]
    fn bounded_energy_growing_norm() {
        let (p, alpha) = (2.0, 0.9);
        let mut energies = vec![];
        let mut norms = vec![];
        for k in 1..=12 {
            let theta = 0.5f64.powi(k);
            let u = example_sequence(theta, alpha, p).unwrap();
            u.validate().unwrap();
            assert!(u.satisfies(BoundaryCondition::DirichletLeftIdentity));
            let params = EnergyParams::rescaled(p, theta, 1.0).unwrap();
            energies.push(energy_analytic(&u, &params).unwrap().total);
            let n = u.integrate_gradient(|g| g[1].abs(), "d2 L1").unwrap();
            let bound = 0.25 * theta.powf(alpha - 1.0);
            assert!(n >= bound);
            norms.push((n, bound));
        }
        let max = energies.iter().cloned().fold(f64::MIN, f64::max);
        let min = energies.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min <= 50.0, "{energies:?}");
        assert!(norms.windows(2).all(|w| w[1].0 > w[0].0));
        assert!(norms[11].1 >= 2.0 * norms[0].1);
    }

    #[test]
    fn alpha_range_enforced() {
        assert!(example_sequence(0.25, 0.5, 2.0).is_err());
        assert!(example_sequence(0.25, 1.0, 2.0).is_err());
    }
}
