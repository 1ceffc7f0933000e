//! Dense univariate and bivariate polynomials.
//!
//! Every curve and value map of an analytic profile is a polynomial, so
//! partial derivatives are exact and roots can be isolated reliably.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// `c[0] + c[1] x + c[2] x^2 + ...`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly1<T> {
    pub coeffs: Vec<T>,
}

impl<T: Real> Poly1<T> {
    pub fn new(coeffs: Vec<T>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    pub fn constant(c: T) -> Self {
        Self::new(vec![c])
    }

    pub fn linear(c0: T, c1: T) -> Self {
        Self::new(vec![c0, c1])
    }

    pub fn zero() -> Self {
        Self::new(Vec::new())
    }

    fn trim(&mut self) {
        while matches!(self.coeffs.last(), Some(c) if *c == T::zero()) {
            self.coeffs.pop();
        }
    }

    /// Degree, with the zero polynomial reported as 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn eval(&self, x: T) -> T {
        self.coeffs
            .iter()
            .rev()
            .fold(T::zero(), |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * T::from_count(k))
                .collect(),
        )
    }

    /// Antiderivative vanishing at 0.
    pub fn antiderivative(&self) -> Self {
        let mut c = Vec::with_capacity(self.coeffs.len() + 1);
        c.push(T::zero());
        for (k, &a) in self.coeffs.iter().enumerate() {
            c.push(a / T::from_count(k + 1));
        }
        Self::new(c)
    }

    pub fn integrate(&self, a: T, b: T) -> T {
        let anti = self.antiderivative();
        anti.eval(b) - anti.eval(a)
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new(
            (0..n)
                .map(|k| {
                    self.coeffs.get(k).copied().unwrap_or_else(T::zero)
                        + other.coeffs.get(k).copied().unwrap_or_else(T::zero)
                })
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut c = vec![T::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Self::new(c)
    }

    /// `q(x) = p(x - s)`.
    pub fn shift(&self, s: T) -> Self {
        // Horner in the shifted variable: p(x - s) = sum c_k (x - s)^k.
        let step = Poly1::linear(-s, T::one());
        self.coeffs
            .iter()
            .rev()
            .fold(Self::zero(), |acc, &c| acc.mul(&step).add(&Self::constant(c)))
    }

    /// Real roots in the closed interval `[a, b]`, sorted and deduplicated.
    ///
    /// Roots of the derivative split the interval into monotone pieces, each
    /// of which holds at most one root found by bisection.
    pub fn roots_in(&self, a: T, b: T) -> Vec<T> {
        if self.is_zero() || a > b {
            return Vec::new();
        }
        if self.degree() == 0 {
            return Vec::new();
        }
        if self.degree() == 1 {
            let r = -self.coeffs[0] / self.coeffs[1];
            return if r >= a && r <= b { vec![r] } else { Vec::new() };
        }
        let mut knots = vec![a];
        knots.extend(self.derivative().roots_in(a, b));
        knots.push(b);
        let scale = self
            .coeffs
            .iter()
            .fold(T::zero(), |m, c| m.max(c.abs()))
            .max(T::min_positive_value());
        let zero_tol = scale * T::tiny();
        let mut roots: Vec<T> = Vec::new();
        for w in knots.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let (flo, fhi) = (self.eval(lo), self.eval(hi));
            if flo.abs() <= zero_tol {
                roots.push(lo);
            }
            if fhi.abs() <= zero_tol {
                roots.push(hi);
            }
            if flo.abs() > zero_tol && fhi.abs() > zero_tol && (flo < T::zero()) != (fhi < T::zero())
            {
                roots.push(bisect(|x| self.eval(x), lo, hi, flo));
            }
        }
        roots.sort_by(|x, y| x.partial_cmp(y).expect("finite roots"));
        let width = (b - a).abs().max(T::one());
        roots.dedup_by(|x, y| (*x - *y).abs() <= width * T::tiny());
        roots
    }

    /// Maximum of `|p|` on `[a, b]`, attained at an endpoint or critical point.
    pub fn max_abs_on(&self, a: T, b: T) -> T {
        let mut m = self.eval(a).abs().max(self.eval(b).abs());
        for r in self.derivative().roots_in(a, b) {
            m = m.max(self.eval(r).abs());
        }
        m
    }

    /// Minimum of `p` on `[a, b]`.
    pub fn min_on(&self, a: T, b: T) -> T {
        let mut m = self.eval(a).min(self.eval(b));
        for r in self.derivative().roots_in(a, b) {
            m = m.min(self.eval(r));
        }
        m
    }

    pub fn cast<U: Real>(&self) -> Poly1<U> {
        Poly1::new(self.coeffs.iter().map(|c| U::lit(c.to_f64_lossy())).collect())
    }
}

fn bisect<T: Real>(f: impl Fn(T) -> T, mut lo: T, mut hi: T, mut flo: T) -> T {
    let two = T::lit(2.0);
    for _ in 0..200 {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == T::zero() {
            return mid;
        }
        if (fm < T::zero()) == (flo < T::zero()) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / two
}

/// `sum_{i,j} c[i][j] x1^i x2^j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly2<T> {
    pub coeffs: Vec<Vec<T>>,
}

impl<T: Real> Poly2<T> {
    pub fn new(coeffs: Vec<Vec<T>>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    fn trim(&mut self) {
        for row in &mut self.coeffs {
            while matches!(row.last(), Some(c) if *c == T::zero()) {
                row.pop();
            }
        }
        while matches!(self.coeffs.last(), Some(r) if r.is_empty()) {
            self.coeffs.pop();
        }
    }

    pub fn zero() -> Self {
        Self::new(Vec::new())
    }

    /// `a + b x1 + c x2`.
    pub fn affine(a: T, b: T, c: T) -> Self {
        Self::new(vec![vec![a, c], vec![b]])
    }

    pub fn constant(a: T) -> Self {
        Self::new(vec![vec![a]])
    }

    fn get(&self, i: usize, j: usize) -> T {
        self.coeffs
            .get(i)
            .and_then(|r| r.get(j))
            .copied()
            .unwrap_or_else(T::zero)
    }

    /// Total degree.
    pub fn degree(&self) -> usize {
        let mut d = 0;
        for (i, row) in self.coeffs.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                if *c != T::zero() {
                    d = d.max(i + j);
                }
            }
        }
        d
    }

    /// True when the gradient is constant.
    pub fn is_affine(&self) -> bool {
        self.degree() <= 1
    }

    pub fn eval(&self, x1: T, x2: T) -> T {
        self.coeffs.iter().rev().fold(T::zero(), |acc, row| {
            acc * x1 + row.iter().rev().fold(T::zero(), |a, &c| a * x2 + c)
        })
    }

    pub fn d1(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, row)| row.iter().map(|&c| c * T::from_count(i)).collect())
                .collect(),
        )
    }

    pub fn d2(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .skip(1)
                        .map(|(j, &c)| c * T::from_count(j))
                        .collect()
                })
                .collect(),
        )
    }

    pub fn gradient(&self, x1: T, x2: T) -> [T; 2] {
        [self.d1().eval(x1, x2), self.d2().eval(x1, x2)]
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .map(|r| r.iter().map(|&c| c * s).collect())
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        let ni = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(ni);
        for i in 0..ni {
            let nj = self
                .coeffs
                .get(i)
                .map_or(0, Vec::len)
                .max(other.coeffs.get(i).map_or(0, Vec::len));
            out.push((0..nj).map(|j| self.get(i, j) + other.get(i, j)).collect());
        }
        Self::new(out)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out: Vec<Vec<T>> = Vec::new();
        for (i, ra) in self.coeffs.iter().enumerate() {
            for (j, &a) in ra.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (k, rb) in other.coeffs.iter().enumerate() {
                    for (l, &b) in rb.iter().enumerate() {
                        if out.len() <= i + k {
                            out.resize(i + k + 1, Vec::new());
                        }
                        let row = &mut out[i + k];
                        if row.len() <= j + l {
                            row.resize(j + l + 1, T::zero());
                        }
                        row[j + l] += a * b;
                    }
                }
            }
        }
        Self::new(out)
    }

    /// Embeds a polynomial in `x1`.
    pub fn from_x1(p: &Poly1<T>) -> Self {
        Self::new(p.coeffs.iter().map(|&c| vec![c]).collect())
    }

    /// Embeds a polynomial in `x2`.
    pub fn from_x2(p: &Poly1<T>) -> Self {
        Self::new(vec![p.coeffs.clone()])
    }

    /// `q(x1, x2) = p(x1 - s, x2)`.
    pub fn shift_x1(&self, s: T) -> Self {
        let step = Self::affine(-s, T::one(), T::zero());
        self.coeffs.iter().rev().fold(Self::zero(), |acc, row| {
            acc.mul(&step).add(&Self::new(vec![row.clone()]))
        })
    }

    /// `q(x1, x2) = p(x1, x2 - s)`.
    pub fn shift_x2(&self, s: T) -> Self {
        let step = Poly1::linear(-s, T::one());
        let mut out = Self::zero();
        for (i, row) in self.coeffs.iter().enumerate() {
            let inner = Poly1::new(row.clone()).compose(&step);
            let mut coeffs = vec![Vec::new(); i];
            coeffs.push(inner.coeffs);
            out = out.add(&Self::new(coeffs));
        }
        out
    }

    /// Restriction to the curve `x2 = c(x1)`, as a polynomial in `x1`.
    pub fn on_curve(&self, c: &Poly1<T>) -> Poly1<T> {
        let x1 = Poly1::linear(T::zero(), T::one());
        self.coeffs.iter().rev().fold(Poly1::zero(), |acc, row| {
            acc.mul(&x1).add(&Poly1::new(row.clone()).compose(c))
        })
    }

    /// Restriction to the vertical line `x1 = a`, as a polynomial in `x2`.
    pub fn at_x1(&self, a: T) -> Poly1<T> {
        self.coeffs
            .iter()
            .rev()
            .fold(Poly1::zero(), |acc, row| acc.scale(a).add(&Poly1::new(row.clone())))
    }

    pub fn cast<U: Real>(&self) -> Poly2<U> {
        Poly2::new(
            self.coeffs
                .iter()
                .map(|r| r.iter().map(|c| U::lit(c.to_f64_lossy())).collect())
                .collect(),
        )
    }
}

impl<T: Real> Poly1<T> {
    /// `p(q(x))`.
    pub fn compose(&self, q: &Poly1<T>) -> Poly1<T> {
        self.coeffs
            .iter()
            .rev()
            .fold(Poly1::zero(), |acc, &c| acc.mul(q).add(&Poly1::constant(c)))
    }
}

/// Continuous piecewise polynomial on `[breaks[0], breaks[n]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePoly<T> {
    pub breaks: Vec<T>,
    pub pieces: Vec<Poly1<T>>,
}

impl<T: Real> PiecewisePoly<T> {
    pub fn single(a: T, b: T, p: Poly1<T>) -> Self {
        Self {
            breaks: vec![a, b],
            pieces: vec![p],
        }
    }

    pub fn start(&self) -> T {
        self.breaks[0]
    }

    pub fn end(&self) -> T {
        *self.breaks.last().expect("non-empty breaks")
    }

    /// Index of the piece containing `x` (left-closed; the last piece is closed).
    pub fn piece_index(&self, x: T) -> usize {
        let n = self.pieces.len();
        (0..n)
            .find(|&k| x < self.breaks[k + 1])
            .unwrap_or(n - 1)
    }

    pub fn eval(&self, x: T) -> T {
        self.pieces[self.piece_index(x)].eval(x)
    }

    pub fn pieces_with_bounds(&self) -> impl Iterator<Item = (T, T, &Poly1<T>)> {
        self.breaks
            .windows(2)
            .zip(&self.pieces)
            .map(|(w, p)| (w[0], w[1], p))
    }

    pub fn max_abs(&self) -> T {
        self.pieces_with_bounds()
            .map(|(a, b, p)| p.max_abs_on(a, b))
            .fold(T::zero(), T::max)
    }

    pub fn min_value(&self) -> T {
        self.pieces_with_bounds()
            .map(|(a, b, p)| p.min_on(a, b))
            .fold(T::infinity(), T::min)
    }

    /// Lebesgue measure of `{x : p(x) > 0}`.
    pub fn positive_measure(&self) -> T {
        let mut total = T::zero();
        for (a, b, p) in self.pieces_with_bounds() {
            let mut knots = vec![a];
            knots.extend(p.roots_in(a, b));
            knots.push(b);
            for w in knots.windows(2) {
                let mid = (w[0] + w[1]) / T::lit(2.0);
                if w[1] > w[0] && p.eval(mid) > T::zero() {
                    total += w[1] - w[0];
                }
            }
        }
        total
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.breaks.len() != self.pieces.len() + 1 || self.pieces.is_empty() {
            return Err("breaks must have one more entry than pieces".into());
        }
        if self.breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err("breaks must be strictly increasing".into());
        }
        for k in 1..self.pieces.len() {
            let x = self.breaks[k];
            let (l, r) = (self.pieces[k - 1].eval(x), self.pieces[k].eval(x));
            if (l - r).abs() > T::lit(1e-9) * T::one().max(l.abs()) {
                return Err(format!("discontinuous at x = {x}"));
            }
        }
        Ok(())
    }
}
