use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{CompensatedSum, Real};

/// Tolerance for the Dirichlet-column check.
pub const TRACE_TOL: f64 = 1e-12;

/// Boundary condition carried by a field on the austenite edge `x1 = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryCondition {
    /// `v(0, x2) = 0` (unrescaled admissible class).
    DirichletLeftZero,
    /// `u(0, x2) = x2` (rescaled admissible class).
    DirichletLeftIdentity,
    None,
}

impl BoundaryCondition {
    /// Prescribed trace value at ordinate `x2`, if any.
    pub fn trace<T: Real>(self, x2: T) -> Option<T> {
        match self {
            Self::DirichletLeftZero => Some(T::zero()),
            Self::DirichletLeftIdentity => Some(x2),
            Self::None => None,
        }
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::DirichletLeftZero => "DirichletLeftZero",
            Self::DirichletLeftIdentity => "DirichletLeftIdentity",
            Self::None => "None",
        })
    }
}

impl FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "DirichletLeftZero" => Ok(Self::DirichletLeftZero),
            "DirichletLeftIdentity" => Ok(Self::DirichletLeftIdentity),
            "None" => Ok(Self::None),
            other => Err(Error::InvalidParameter(format!("unknown boundary condition `{other}`"))),
        }
    }
}

/// Node-centered scalar field on `[0,1]^2`.
///
/// Node `(i, j)` sits at `(i/(nx-1), j/(ny-1))`; values are stored row-major
/// with rows of constant `x2`, row `j = 0` first.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField<T> {
    nx: usize,
    ny: usize,
    values: Vec<T>,
    bc: BoundaryCondition,
}

impl<T: Real> GridField<T> {
    /// Builds a field, checking finiteness and the declared boundary condition.
    pub fn new(nx: usize, ny: usize, values: Vec<T>, bc: BoundaryCondition) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::GridTooSmall { nx, ny, min: 1 });
        }
        if values.len() != nx * ny {
            return Err(Error::ShapeMismatch(nx, ny, values.len(), 1));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { i: k % nx, j: k / nx });
        }
        let field = Self { nx, ny, values, bc };
        if !field.satisfies(bc) {
            return Err(Error::BoundaryMismatch {
                expected: bc.to_string(),
                found: "column x1 = 0 violating it".into(),
            });
        }
        Ok(field)
    }

    /// Samples `f(x1, x2)` at the nodes. The tag is attached only if the
    /// sampled column satisfies it; otherwise the field carries `None`.
    pub fn from_fn(nx: usize, ny: usize, bc: BoundaryCondition, f: impl Fn(T, T) -> T) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::GridTooSmall { nx, ny, min: 2 });
        }
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            let x2 = Self::coord(j, ny);
            for i in 0..nx {
                values.push(f(Self::coord(i, nx), x2));
            }
        }
        let mut field = Self::new(nx, ny, values, BoundaryCondition::None)?;
        if field.satisfies(bc) {
            field.bc = bc;
        }
        Ok(field)
    }

    pub fn zeros(nx: usize, ny: usize) -> Result<Self> {
        Self::new(nx, ny, vec![T::zero(); nx * ny], BoundaryCondition::None)
    }

    #[inline]
    fn coord(i: usize, n: usize) -> T {
        if n < 2 {
            T::zero()
        } else {
            T::from_count(i) / T::from_count(n - 1)
        }
    }

    pub fn x1(&self, i: usize) -> T {
        Self::coord(i, self.nx)
    }

    pub fn x2(&self, j: usize) -> T {
        Self::coord(j, self.ny)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[j * self.nx + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.values[j * self.nx + i] = v;
    }

    pub fn spacing(&self) -> (T, T) {
        (
            T::one() / T::from_count(self.nx.max(2) - 1),
            T::one() / T::from_count(self.ny.max(2) - 1),
        )
    }

    /// Whether column `i = 0` meets `bc` within [`TRACE_TOL`].
    pub fn satisfies(&self, bc: BoundaryCondition) -> bool {
        let tol = T::lit(TRACE_TOL);
        (0..self.ny).all(|j| match bc.trace(self.x2(j)) {
            Some(t) => (self.get(0, j) - t).abs() <= tol,
            None => true,
        })
    }

    /// Re-tags the field, failing if the column does not satisfy `bc`.
    pub fn with_bc(mut self, bc: BoundaryCondition) -> Result<Self> {
        if !self.satisfies(bc) {
            return Err(Error::BoundaryMismatch {
                expected: bc.to_string(),
                found: self.bc.to_string(),
            });
        }
        self.bc = bc;
        Ok(self)
    }

    /// Overwrites column `i = 0` with the trace prescribed by the tag.
    pub fn impose_bc(&mut self) {
        for j in 0..self.ny {
            if let Some(t) = self.bc.trace(self.x2(j)) {
                self.set(0, j, t);
            }
        }
    }

    /// Node-wise map producing an untagged field.
    pub fn map(&self, f: impl Fn(T, T, T) -> T) -> Result<Self> {
        let mut values = Vec::with_capacity(self.values.len());
        for j in 0..self.ny {
            for i in 0..self.nx {
                values.push(f(self.x1(i), self.x2(j), self.get(i, j)));
            }
        }
        Self::new(self.nx, self.ny, values, BoundaryCondition::None)
    }

    /// Forward difference along `x1`, last column copied.
    pub fn d1(&self) -> Result<Self> {
        if self.nx < 2 {
            return Err(Error::GridTooSmall { nx: self.nx, ny: self.ny, min: 2 });
        }
        let scale = T::from_count(self.nx - 1);
        let mut out = vec![T::zero(); self.values.len()];
        for j in 0..self.ny {
            for i in 0..self.nx - 1 {
                out[j * self.nx + i] = (self.get(i + 1, j) - self.get(i, j)) * scale;
            }
            out[j * self.nx + self.nx - 1] = out[j * self.nx + self.nx - 2];
        }
        Self::new(self.nx, self.ny, out, BoundaryCondition::None)
    }

    /// Forward difference along `x2`, last row copied.
    pub fn d2(&self) -> Result<Self> {
        if self.ny < 2 {
            return Err(Error::GridTooSmall { nx: self.nx, ny: self.ny, min: 2 });
        }
        let scale = T::from_count(self.ny - 1);
        let mut out = vec![T::zero(); self.values.len()];
        for j in 0..self.ny - 1 {
            for i in 0..self.nx {
                out[j * self.nx + i] = (self.get(i, j + 1) - self.get(i, j)) * scale;
            }
        }
        let last = (self.ny - 1) * self.nx;
        let prev = (self.ny - 2) * self.nx;
        out.copy_within(prev..prev + self.nx, last);
        Self::new(self.nx, self.ny, out, BoundaryCondition::None)
    }

    /// Second differences at interior node `(i, j)`, in derivative units:
    /// `[d11, d12, d22]` with `d12` the forward mixed difference.
    #[inline]
    pub fn hessian_at(&self, i: usize, j: usize) -> [T; 3] {
        let (hx, hy) = self.spacing();
        let two = T::lit(2.0);
        let c = self.get(i, j);
        let d11 = (self.get(i + 1, j) - two * c + self.get(i - 1, j)) / (hx * hx);
        let d22 = (self.get(i, j + 1) - two * c + self.get(i, j - 1)) / (hy * hy);
        let d12 = (self.get(i + 1, j + 1) - self.get(i + 1, j) - self.get(i, j + 1) + c) / (hx * hy);
        [d11, d12, d22]
    }

    /// Discrete `|D^2 f|((0,1)^2)`: anisotropic total variation of the gradient,
    /// summed over interior nodes with weight `hx*hy`. The mixed difference
    /// counts twice, once for each off-diagonal Hessian entry.
    pub fn second_total_variation(&self) -> Result<T> {
        if self.nx < 3 || self.ny < 3 {
            return Err(Error::GridTooSmall { nx: self.nx, ny: self.ny, min: 3 });
        }
        let (hx, hy) = self.spacing();
        let two = T::lit(2.0);
        let mut acc = CompensatedSum::new();
        for j in 1..self.ny - 1 {
            for i in 1..self.nx - 1 {
                let [d11, d12, d22] = self.hessian_at(i, j);
                acc.add(d11.abs() + two * d12.abs() + d22.abs());
            }
        }
        Ok(acc.value() * hx * hy)
    }

    /// Discrete L1 distance by the cell trapezoid rule.
    pub fn l1_distance(&self, other: &Self) -> Result<T> {
        if self.nx != other.nx || self.ny != other.ny {
            return Err(Error::ShapeMismatch(self.nx, self.ny, other.nx, other.ny));
        }
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::GridTooSmall { nx: self.nx, ny: self.ny, min: 2 });
        }
        let (hx, hy) = self.spacing();
        let diff = |i: usize, j: usize| (self.get(i, j) - other.get(i, j)).abs();
        let mut acc = CompensatedSum::new();
        for j in 0..self.ny - 1 {
            for i in 0..self.nx - 1 {
                acc.add(diff(i, j) + diff(i + 1, j) + diff(i, j + 1) + diff(i + 1, j + 1));
            }
        }
        Ok(acc.value() * hx * hy / T::lit(4.0))
    }

    /// Largest absolute node value.
    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub(crate) fn set_bc_unchecked(&mut self, bc: BoundaryCondition) {
        self.bc = bc;
    }
}

/// Forward difference along `x1`.
pub fn d1<T: Real>(f: &GridField<T>) -> Result<GridField<T>> {
    f.d1()
}

/// Forward difference along `x2`.
pub fn d2<T: Real>(f: &GridField<T>) -> Result<GridField<T>> {
    f.d2()
}

pub fn second_total_variation<T: Real>(f: &GridField<T>) -> Result<T> {
    f.second_total_variation()
}

pub fn l1_distance<T: Real>(f: &GridField<T>, g: &GridField<T>) -> Result<T> {
    f.l1_distance(g)
}
