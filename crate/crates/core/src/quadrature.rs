#![allow(clippy::excessive_precision)]

//! Adaptive Gauss–Kronrod (7/15) quadrature in one dimension, and nested
//! quadrature over regions `{a < x < b, lo(x) < y < hi(x)}`.

use std::collections::BinaryHeap;

use crate::scalar::{CompensatedSum, Real};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 1e-15,
            max_intervals: 4000,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: T,
    pub converged: bool,
}

fn kronrod<T: Real>(f: &mut impl FnMut(T) -> T, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let center = (a + b) * half;
    let radius = (b - a) * half;
    let fc = f(center);
    let mut k = fc * T::lit(WGK[7]);
    let mut g = fc * T::lit(WG[3]);
    for (idx, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = radius * T::lit(x);
        let s = f(center - dx) + f(center + dx);
        k += s * T::lit(w);
        if idx % 2 == 1 {
            g += s * T::lit(WG[idx / 2]);
        }
    }
    (k * radius, ((k - g) * radius).abs())
}

struct Piece<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

impl<T: Real> PartialEq for Piece<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T: Real> Eq for Piece<T> {}
impl<T: Real> PartialOrd for Piece<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Piece<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(std::cmp::Ordering::Equal)
    }
}

/// Globally adaptive integration of `f` over `[a, b]`.
pub fn integrate<T: Real>(mut f: impl FnMut(T) -> T, a: T, b: T, opts: QuadOptions) -> QuadResult<T> {
    if !(b > a) {
        return QuadResult {
            value: T::zero(),
            error: T::zero(),
            converged: true,
        };
    }
    let (value, error) = kronrod(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value, error });
    let mut total_value = value;
    let mut total_error = error;
    let rel = T::lit(opts.rel_tol);
    let abs = T::lit(opts.abs_tol);
    let half = T::lit(0.5);
    while total_error > abs.max(rel * total_value.abs()) {
        if heap.len() >= opts.max_intervals {
            break;
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = (worst.a + worst.b) * half;
        if !(mid > worst.a && mid < worst.b) {
            heap.push(worst);
            break;
        }
        let (v1, e1) = kronrod(&mut f, worst.a, mid);
        let (v2, e2) = kronrod(&mut f, mid, worst.b);
        total_value = total_value - worst.value + v1 + v2;
        total_error = total_error - worst.error + e1 + e2;
        heap.push(Piece { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // Re-sum to shed the drift of the running totals.
    let mut v = CompensatedSum::new();
    let mut e = CompensatedSum::new();
    for p in heap.iter() {
        v.add(p.value);
        e.add(p.error);
    }
    let value = v.value();
    let error = e.value();
    let converged = error <= abs.max(rel * value.abs()) * T::lit(10.0);
    QuadResult { value, error, converged }
}

/// Integrates `f` over `[a, b]` split at the given interior breakpoints.
pub fn integrate_with_breaks<T: Real>(
    mut f: impl FnMut(T) -> T,
    a: T,
    b: T,
    breaks: &[T],
    opts: QuadOptions,
) -> QuadResult<T> {
    let mut knots = vec![a];
    knots.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    knots.push(b);
    knots.sort_by(|x, y| x.partial_cmp(y).expect("finite breaks"));
    let mut value = CompensatedSum::new();
    let mut error = T::zero();
    let mut converged = true;
    for w in knots.windows(2) {
        let r = integrate(&mut f, w[0], w[1], opts);
        value.add(r.value);
        error += r.error;
        converged &= r.converged;
    }
    QuadResult {
        value: value.value(),
        error,
        converged,
    }
}

/// Nested integration of `f(x, y)` over `a < x < b`, `lo(x) < y < hi(x)`.
pub fn integrate_region<T: Real>(
    f: impl Fn(T, T) -> T,
    a: T,
    b: T,
    lo: impl Fn(T) -> T,
    hi: impl Fn(T) -> T,
    opts: QuadOptions,
) -> QuadResult<T> {
    let mut inner_ok = true;
    let mut inner_err = T::zero();
    let inner_opts = QuadOptions {
        rel_tol: opts.rel_tol * 0.1,
        ..opts
    };
    let outer = integrate(
        |x| {
            let r = integrate(|y| f(x, y), lo(x), hi(x), inner_opts);
            inner_ok &= r.converged;
            inner_err = inner_err.max(r.error);
            r.value
        },
        a,
        b,
        opts,
    );
    QuadResult {
        value: outer.value,
        error: outer.error + inner_err * (b - a),
        converged: outer.converged && inner_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomials_are_exact() {
        let r = integrate(|x: f64| x.powi(9) - 3.0 * x * x, -1.0, 2.0, QuadOptions::default());
        assert!(r.converged);
        assert_relative_eq!(r.value, (1024.0 - 1.0) / 10.0 - 9.0, epsilon = 1e-12);
    }

    #[test]
    fn kinked_power_converges() {
        let r = integrate(|x: f64| (x - 0.3).abs().powf(1.5), 0.0, 1.0, QuadOptions::default());
        let exact = (0.3f64.powf(2.5) + 0.7f64.powf(2.5)) / 2.5;
        assert!(r.converged);
        assert_relative_eq!(r.value, exact, max_relative = 1e-10);
    }

    #[test]
    fn triangle_area() {
        let r = integrate_region(|_, _| 1.0f64, 0.0, 1.0, |_| 0.0, |x| x, QuadOptions::default());
        assert_relative_eq!(r.value, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn breaks_are_respected() {
        let r = integrate_with_breaks(
            |x: f64| if x < 0.5 { 0.0 } else { 1.0 },
            0.0,
            1.0,
            &[0.5],
            QuadOptions::default(),
        );
        assert_relative_eq!(r.value, 0.5, epsilon = 1e-15);
    }
}
