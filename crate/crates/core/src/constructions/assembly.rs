//! Self-similar branching assembly on the unit square.

use serde::{Deserialize, Serialize};

use super::branch::BranchCellSpec;
use crate::energy::{EnergyParams, Form};
use crate::error::{Error, Result};
use crate::fields::{AnalyticProfile, BoundaryCondition, Column, Rect};
use crate::poly::{Poly1, Poly2};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchingAssemblySpec<T> {
    pub alpha: T,
    pub n: u64,
    pub generations: u32,
    pub params: EnergyParams<T>,
}

/// Tuning knobs for [`branching_profile_with`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchingOptions<T> {
    /// Refinement ratio; `None` picks the midpoint of the admissible range.
    pub alpha: Option<T>,
    /// Multiplier on the base period count before rounding.
    pub n_scale: T,
    /// Added to the generation count, clamped at zero.
    pub generation_shift: i32,
}

impl<T: Real> Default for BranchingOptions<T> {
    fn default() -> Self {
        Self {
            alpha: None,
            n_scale: T::one(),
            generation_shift: 0,
        }
    }
}

/// Open interval of admissible refinement ratios for exponent `p`.
pub fn alpha_range<T: Real>(p: T) -> (T, T) {
    let two = T::lit(2.0);
    (two.powf(-p / (p - T::one())), T::lit(0.5))
}

pub fn default_alpha<T: Real>(p: T) -> T {
    let (lo, hi) = alpha_range(p);
    (lo + hi) / T::lit(2.0)
}

impl<T: Real> BranchingAssemblySpec<T> {
    /// Period count and generation count from the unrescaled parameters.
    pub fn from_params(params: &EnergyParams<T>, opts: &BranchingOptions<T>) -> Result<Self> {
        params.validate()?;
        let params = params.with_form(Form::Unrescaled);
        let (p, theta, eps) = (params.p, params.theta, params.epsilon);
        let tp = params.theta_p();
        if eps > tp * (T::one() + T::lit(1e-12)) {
            return Err(Error::InvalidParameter(format!(
                "epsilon {eps} exceeds theta^p {tp}; use the constant profile"
            )));
        }
        let alpha = opts.alpha.unwrap_or_else(|| default_alpha(p));
        let (lo, hi) = alpha_range(p);
        if !(alpha > lo && alpha < hi) {
            return Err(Error::InvalidParameter(format!("alpha {alpha} outside ({lo}, {hi})")));
        }
        if !(opts.n_scale > T::zero()) {
            return Err(Error::InvalidParameter("n_scale must be positive".into()));
        }
        let n_real = (opts.n_scale * (tp / eps).powf(T::one() / (p + T::one()))).round();
        let n_f = n_real.to_f64_lossy().max(1.0);
        if !n_f.is_finite() || n_f >= 2f64.powi(62) {
            return Err(Error::Overflow(format!("period count {n_f}")));
        }
        let n = n_f as u64;
        let ratio = ((theta / T::lit(n_f)).ln() / (T::lit(2.0) * alpha).ln()).floor();
        let gens = (ratio.to_f64_lossy() + f64::from(opts.generation_shift)).max(0.0);
        let max_gens = 62.0 - n_f.log2().ceil();
        if !gens.is_finite() || gens > max_gens {
            return Err(Error::Overflow(format!(
                "{gens} generations with N = {n} overflow the copy counter"
            )));
        }
        let spec = Self {
            alpha,
            n,
            generations: gens as u32,
            params,
        };
        if !(spec.alpha.powi(spec.generations as i32 + 1) > T::zero()) {
            return Err(Error::Overflow("innermost column width underflows".into()));
        }
        Ok(spec)
    }

    pub fn copies(&self, gen: u32) -> u64 {
        self.n << gen
    }

    pub fn period(&self, gen: u32) -> T {
        T::one() / T::lit(self.copies(gen) as f64)
    }

    pub fn length(&self, gen: u32) -> T {
        (T::one() - self.alpha) * self.alpha.powi(gen as i32)
    }

    /// Width of the interpolation layer next to `x1 = 0`.
    pub fn interpolation_width(&self) -> T {
        self.alpha.powi(self.generations as i32 + 1)
    }

    /// Builds the profile.
    pub fn assemble(&self) -> Result<AnalyticProfile<T>> {
        let theta = self.params.theta;
        let mut columns = Vec::new();
        let width = self.interpolation_width();
        let inner = BranchCellSpec::symmetric(self.length(self.generations), self.period(self.generations), theta)?;
        columns.push(interpolation_column(&inner, width, self.copies(self.generations)));
        for gen in (0..=self.generations).rev() {
            let cell = BranchCellSpec::symmetric(self.length(gen), self.period(gen), theta)?;
            let offset = self.alpha.powi(gen as i32 + 1);
            for mut col in cell.pattern_columns(offset) {
                col.copies = self.copies(gen);
                columns.push(col);
            }
        }
        // Pin the outer edges to the exact domain.
        columns[0].x0 = T::zero();
        let last = columns.len() - 1;
        columns[last].x1 = T::one();
        AnalyticProfile::new(Rect::unit(), columns, BoundaryCondition::DirichletLeftZero)
    }
}

/// `v = (x1 / L) g(x2)` on `[0, L]`, `g` the left trace of `cell`.
fn interpolation_column<T: Real>(cell: &BranchCellSpec<T>, width: T, copies: u64) -> Column<T> {
    let mut col = cell
        .pattern_columns(width)
        .into_iter()
        .next()
        .expect("cell has at least one column");
    let ramp = Poly2::affine(T::zero(), T::one() / width, T::zero());
    col.curves = col.curves.iter().map(|c| Poly1::constant(c.eval(width))).collect();
    col.maps = col
        .maps
        .iter()
        .map(|m| Poly2::from_x2(&m.at_x1(width)).mul(&ramp))
        .collect();
    col.x0 = T::zero();
    col.x1 = width;
    col.copies = copies;
    col
}

/// Branching profile with default options.
pub fn branching_profile<T: Real>(params: &EnergyParams<T>) -> Result<(AnalyticProfile<T>, BranchingAssemblySpec<T>)> {
    branching_profile_with(params, &BranchingOptions::default())
}

pub fn branching_profile_with<T: Real>(
    params: &EnergyParams<T>,
    opts: &BranchingOptions<T>,
) -> Result<(AnalyticProfile<T>, BranchingAssemblySpec<T>)> {
    let spec = BranchingAssemblySpec::from_params(params, opts)?;
    Ok((spec.assemble()?, spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::constant_profile;
    use crate::energy::energy_analytic;

    fn energy(p: f64, theta: f64, eps: f64) -> (f64, BranchingAssemblySpec<f64>) {
        let params = EnergyParams::unrescaled(p, theta, eps).unwrap();
        let (prof, spec) = branching_profile(&params).unwrap();
        (energy_analytic(&prof, &params).unwrap().total, spec)
    }

    #[test]
    fn assembled_profile_is_continuous_with_zero_trace() {
        let params = EnergyParams::unrescaled(2.0, 0.25, 0.25f64.powi(2) * 1e-3).unwrap();
        let (prof, spec) = branching_profile(&params).unwrap();
        assert!(spec.generations >= 1);
        prof.validate().unwrap();
        assert!(prof.satisfies(BoundaryCondition::DirichletLeftZero));
        for k in 0..=100 {
            assert_eq!(prof.eval(0.0, k as f64 / 100.0), 0.0);
        }
    }

    #[test]
    fn parameters_follow_rounding_rules() {
        let (_, spec) = energy(2.0, 0.25, 0.0625 * 1e-4);
        assert_eq!(spec.n, 22);
        assert_eq!(spec.alpha, 0.375);
        let expect = ((0.25f64 / 22.0).ln() / 0.75f64.ln()).floor() as u32;
        assert_eq!(spec.generations, expect);
    }

    #[test]
    fn scaling_constant_bounded() {
        let (e, _) = energy(2.0, 0.25, 6.25e-6);
        let bound = 0.0625 * 1e-4f64.powf(2.0 / 3.0);
        assert!(e <= 50.0 * bound, "ratio {}", e / bound);
    }

    #[test]
    fn degenerate_regime_uses_one_period() {
        // Stripe boundaries of all generations cost about 12 theta^p here.
        let (e, spec) = energy(2.0, 0.25, 0.0625);
        assert_eq!(spec.n, 1);
        assert!(e <= 15.0 * 0.0625, "{e}");
    }

    #[test]
    fn beats_constant_well_inside_branching_regime() {
        for &p in &[2.0, 3.0] {
            for &theta in &[0.1, 0.25] {
                let tp = f64::powf(theta, p);
                for &f in &[1e-3, 1e-4, 1e-6] {
                    let (e, _) = energy(p, theta, tp * f);
                    let params = EnergyParams::unrescaled(p, theta, tp * f).unwrap();
                    let c = energy_analytic(&constant_profile(), &params).unwrap().total;
                    assert!(e <= c, "p={p} theta={theta} f={f}: {e} > {c}");
                }
            }
        }
    }

    #[test]
    fn rejects_large_epsilon() {
        let params = EnergyParams::unrescaled(2.0, 0.25, 0.1).unwrap();
        assert!(branching_profile(&params).is_err());
    }
}
