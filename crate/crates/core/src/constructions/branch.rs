//! The branching building block `b = b^(l,h)` on `(0,l) x (0,h)`.
//!
//! The minority set `S(x1)`, where `d2 b = 1 - theta`, is a union of stripes
//! bounded by graphs over `x1`. The value map is fixed by the stripes:
//! `b(x1, x2) = -theta x2 + |S(x1) ∩ (0, x2)|`, which makes `b(x1, 0) = 0`,
//! `h`-periodicity and the two-slope property hold by construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{AnalyticProfile, BoundaryCondition, Column, Rect};
use crate::poly::{PiecewisePoly, Poly1, Poly2};
use crate::scalar::Real;

/// One minority stripe `lower(x1) < x2 < upper(x1)`, cell-local abscissa.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stripe<T> {
    pub lower: PiecewisePoly<T>,
    pub upper: PiecewisePoly<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchCellSpec<T> {
    pub ell: T,
    pub h: T,
    pub theta: T,
    /// Stripes ordered bottom to top.
    pub stripes: Vec<Stripe<T>>,
}

impl<T: Real> BranchCellSpec<T> {
    /// Symmetric split: two children of width `theta h / 2` whose centres move
    /// affinely from `h/4, 3h/4` at `x1 = 0` to `h/2 -+ theta h / 4` at
    /// `x1 = l`, where they merge into one stripe of width `theta h`.
    pub fn symmetric(ell: T, h: T, theta: T) -> Result<Self> {
        if !(ell > T::zero() && h > T::zero()) {
            return Err(Error::InvalidParameter("cell sides must be positive".into()));
        }
        if !(theta > T::zero() && theta <= T::lit(0.5)) {
            return Err(Error::InvalidParameter(format!("theta must lie in (0, 1/2], got {theta}")));
        }
        let q = h / T::lit(4.0);
        let half_w = theta * h / T::lit(4.0);
        let drift = (q - half_w) / ell;
        let line = |c0: T, slope: T| PiecewisePoly::single(T::zero(), ell, Poly1::linear(c0, slope));
        let lower_child = Stripe {
            lower: line(q - half_w, drift),
            upper: line(q + half_w, drift),
        };
        let three_q = T::lit(3.0) * q;
        let upper_child = Stripe {
            lower: line(three_q - half_w, -drift),
            upper: line(three_q + half_w, -drift),
        };
        let spec = Self {
            ell,
            h,
            theta,
            stripes: vec![lower_child, upper_child],
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Union of all abscissae where some stripe boundary changes formula.
    fn breakpoints(&self) -> Vec<T> {
        let mut xs: Vec<T> = self
            .stripes
            .iter()
            .flat_map(|s| s.lower.breaks.iter().chain(&s.upper.breaks).copied())
            .collect();
        xs.push(T::zero());
        xs.push(self.ell);
        xs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let tol = self.ell * T::lit(1e-12);
        xs.dedup_by(|a, b| (*a - *b).abs() <= tol);
        xs
    }

    /// Stripe boundaries ordered bottom to top on `[a, b]`, as polynomials.
    fn boundaries_on(&self, a: T, b: T) -> Vec<(Poly1<T>, Poly1<T>)> {
        let mid = (a + b) / T::lit(2.0);
        self.stripes
            .iter()
            .map(|s| {
                (
                    s.lower.pieces[s.lower.piece_index(mid)].clone(),
                    s.upper.pieces[s.upper.piece_index(mid)].clone(),
                )
            })
            .collect()
    }

    /// Sorted, merged intervals of `S(x)`.
    pub fn minority_set(&self, x: T) -> Vec<(T, T)> {
        let mut iv: Vec<(T, T)> = self
            .stripes
            .iter()
            .map(|s| (s.lower.eval(x), s.upper.eval(x)))
            .collect();
        iv.sort_by(|p, q| p.0.partial_cmp(&q.0).expect("finite"));
        let tol = self.h * T::lit(1e-12);
        let mut merged: Vec<(T, T)> = Vec::new();
        for (lo, hi) in iv {
            match merged.last_mut() {
                Some(last) if lo <= last.1 + tol => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        merged
    }

    /// Checks volume fraction, end configurations and ordering of stripes.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(format!("branch cell: {m}")));
        if self.stripes.is_empty() {
            return bad("no stripes".into());
        }
        for s in &self.stripes {
            s.lower.validate().map_err(Error::InvalidParameter)?;
            s.upper.validate().map_err(Error::InvalidParameter)?;
            let tol = self.ell * T::lit(1e-12);
            for pp in [&s.lower, &s.upper] {
                if (pp.start()).abs() > tol || (pp.end() - self.ell).abs() > tol {
                    return bad("stripe curves must span [0, l]".into());
                }
            }
        }
        let tol = self.h * T::lit(1e-12);
        let xs = self.breakpoints();
        for w in xs.windows(2) {
            let (a, b) = (w[0], w[1]);
            let bounds = self.boundaries_on(a, b);
            let mut prev = Poly1::constant(T::zero());
            let mut width = Poly1::zero();
            for (k, (lo, hi)) in bounds.iter().enumerate() {
                if lo.sub(&prev).min_on(a, b) < -tol {
                    return bad(format!("stripe {k} crosses the one below"));
                }
                if hi.sub(lo).min_on(a, b) < -tol {
                    return bad(format!("stripe {k} has negative width"));
                }
                width = width.add(&hi.sub(lo));
                prev = hi.clone();
            }
            if Poly1::constant(self.h).sub(&prev).min_on(a, b) < -tol {
                return bad("top stripe leaves the period".into());
            }
            let excess = width.sub(&Poly1::constant(self.theta * self.h)).max_abs_on(a, b);
            if excess > tol {
                return bad(format!("|S(x1)| differs from theta h by {excess}"));
            }
        }
        let (h, th) = (self.h, self.theta);
        let two = T::lit(2.0);
        let four = T::lit(4.0);
        let expect_end = [((h * (T::one() - th)) / two, (h * (T::one() + th)) / two)];
        let expect_start = [
            (h / four - th * h / four, h / four + th * h / four),
            (T::lit(3.0) * h / four - th * h / four, T::lit(3.0) * h / four + th * h / four),
        ];
        let same = |got: &[(T, T)], want: &[(T, T)]| {
            got.len() == want.len()
                && got
                    .iter()
                    .zip(want)
                    .all(|(g, w)| (g.0 - w.0).abs() <= tol && (g.1 - w.1).abs() <= tol)
        };
        if !same(&self.minority_set(self.ell), &expect_end) {
            return bad("S(l) must be (h(1-theta)/2, h(1+theta)/2)".into());
        }
        if !same(&self.minority_set(T::zero()), &expect_start) {
            return bad("S(0) must be the halved copy of S(l)".into());
        }
        Ok(())
    }

    /// Pattern columns on `[offset, offset + l]` with period `h`, one per
    /// polyline segment.
    pub(crate) fn pattern_columns(&self, offset: T) -> Vec<Column<T>> {
        let xs = self.breakpoints();
        let theta = self.theta;
        let mut cols = Vec::with_capacity(xs.len() - 1);
        for w in xs.windows(2) {
            let bounds = self.boundaries_on(w[0], w[1]);
            let mut curves = vec![Poly1::constant(T::zero())];
            let mut maps = Vec::with_capacity(2 * bounds.len() + 1);
            let base = Poly2::affine(T::zero(), T::zero(), -theta);
            let mut below = Poly1::zero();
            maps.push(base.clone());
            for (lo, hi) in &bounds {
                curves.push(lo.shift(offset));
                // Inside the stripe: -theta x2 + |S below| + (x2 - lo).
                let inside = base
                    .add(&Poly2::from_x1(&below.sub(lo)))
                    .add(&Poly2::affine(T::zero(), T::zero(), T::one()));
                maps.push(inside.shift_x1(offset));
                curves.push(hi.shift(offset));
                below = below.add(&hi.sub(lo));
                maps.push(base.add(&Poly2::from_x1(&below)).shift_x1(offset));
            }
            curves.push(Poly1::constant(self.h));
            cols.push(Column {
                x0: offset + w[0],
                x1: offset + w[1],
                y0: T::zero(),
                period: self.h,
                copies: 1,
                value_step: T::zero(),
                curves,
                maps,
            });
        }
        cols
    }
}

/// `b^(l,h)` as a profile on `(0,l) x (0,h)`.
pub fn branch_cell<T: Real>(spec: &BranchCellSpec<T>) -> Result<AnalyticProfile<T>> {
    spec.validate()?;
    let domain = Rect::new(T::zero(), spec.ell, T::zero(), spec.h);
    AnalyticProfile::new(domain, spec.pattern_columns(T::zero()), BoundaryCondition::None)
}

/// Trace of `b(l, .)` on one period.
pub fn end_trace<T: Real>(theta: T, h: T, x2: T) -> T {
    let two = T::lit(2.0);
    if x2 <= h * (T::one() - theta) / two {
        -theta * x2
    } else if x2 <= h * (T::one() + theta) / two {
        (T::one() - theta) * (x2 - h / two)
    } else {
        -theta * x2 + theta * h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{energy_analytic, EnergyParams};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn end_trace_value_from_formula() {
        let spec = BranchCellSpec::symmetric(1.0, 1.0, 0.25).unwrap();
        let b = branch_cell(&spec).unwrap();
        assert_relative_eq!(b.eval(1.0, 0.375), -0.09375, epsilon = 1e-15);
    }

    #[test]
    fn properties_hold_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(ell, h, theta) in &[(1.0, 1.0, 0.25), (0.3, 0.05, 0.1), (2.0, 0.7, 0.5)] {
            let spec = BranchCellSpec::symmetric(ell, h, theta).unwrap();
            let b = branch_cell(&spec).unwrap();
            b.validate().unwrap();
            let periodic = |x2: f64| {
                let y = x2.rem_euclid(h);
                end_trace(theta, h, y)
            };
            for _ in 0..10_000 {
                let x1: f64 = rng.random::<f64>() * ell;
                let x2: f64 = rng.random::<f64>() * h;
                // (i) b(x1, 0) = 0 and periodicity b(x1, h) = 0
                assert!(b.eval(x1, 0.0).abs() < 1e-12);
                assert!(b.eval(x1, h).abs() < 1e-12);
                // (i) trace at x1 = l
                assert!((b.eval(ell, x2) - end_trace(theta, h, x2)).abs() < 1e-12);
                // (ii) b(0, x2) = b(l, 2 x2) / 2
                assert!((b.eval(0.0, x2) - 0.5 * periodic(2.0 * x2)).abs() < 1e-12);
                // (v) two slopes
                let g = b.gradient(x1, x2)[1];
                assert!((g + theta).abs() < 1e-12 || (g - (1.0 - theta)).abs() < 1e-12, "{g}");
            }
        }
    }

    #[test]
    fn interfacial_bound_constant_is_moderate() {
        let mut worst: f64 = 0.0;
        for &ell in &[0.5, 1.0] {
            for &h in &[0.5, 1.0] {
                for &theta in &[0.1, 0.25] {
                    let b = branch_cell(&BranchCellSpec::symmetric(ell, h, theta).unwrap()).unwrap();
                    let tv = b.second_total_variation().unwrap();
                    worst = worst.max(tv / (ell + theta * h));
                }
            }
        }
        assert!(worst <= 20.0, "C = {worst}");
    }

    #[test]
    fn d1_norm_scales_like_h_and_ell() {
        // Fit log ||d1 b||_p^p = a + s_h log h + s_l log l.
        let p = 2.5;
        let theta = 0.2;
        let params = EnergyParams::unrescaled(p, theta, 1.0).unwrap();
        let norm = |ell: f64, h: f64| {
            let b = branch_cell(&BranchCellSpec::symmetric(ell, h, theta).unwrap()).unwrap();
            energy_analytic(&b, &params).unwrap().elastic_d1
        };
        let hs = [0.1, 0.2, 0.4, 0.8];
        let slope_h = {
            let ys: Vec<f64> = hs.iter().map(|&h| norm(1.0, h).ln()).collect();
            least_squares(&hs.map(f64::ln), &ys)
        };
        let ls = [0.25, 0.5, 1.0, 2.0];
        let slope_l = {
            let ys: Vec<f64> = ls.iter().map(|&l| norm(l, 0.5).ln()).collect();
            least_squares(&ls.map(f64::ln), &ys)
        };
        assert!((slope_h - (p + 1.0)).abs() < 0.1, "{slope_h}");
        assert!((slope_l + (p - 1.0)).abs() < 0.1, "{slope_l}");
    }

    fn least_squares(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        sxy / sxx
    }

    #[test]
    fn crossing_stripes_rejected() {
        let mut spec = BranchCellSpec::symmetric(1.0, 1.0, 0.25).unwrap();
        spec.stripes.swap(0, 1);
        assert!(spec.validate().is_err());
        let mut wide = BranchCellSpec::symmetric(1.0, 1.0, 0.25).unwrap();
        wide.stripes[0].upper = PiecewisePoly::single(0.0, 1.0, Poly1::linear(0.5, 0.0));
        assert!(branch_cell(&wide).is_err());
    }
}
