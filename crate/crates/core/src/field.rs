use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::oracle::CountingField;
use crate::point::Point;

type EvalFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Per-coordinate bounds `lower_i ≤ z_i ≤ upper_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lower: Point,
    pub upper: Point,
}

impl BoxBounds {
    pub fn new(lower: Point, upper: Point) -> Result<Self> {
        lower.ensure_dim(upper.dim())?;
        if lower
            .coords()
            .iter()
            .zip(upper.coords())
            .any(|(l, u)| !(l <= u))
        {
            return Err(Error::param("box lower bound exceeds upper bound"));
        }
        Ok(BoxBounds { lower, upper })
    }

    /// The box `[-r, r]^dim`.
    pub fn symmetric(dim: usize, radius: f64) -> Self {
        BoxBounds {
            lower: Point::new(vec![-radius; dim]),
            upper: Point::new(vec![radius; dim]),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    pub fn contains(&self, z: &Point) -> bool {
        z.coords()
            .iter()
            .zip(self.lower.coords().iter().zip(self.upper.coords()))
            .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn clamp(&self, z: &Point) -> Point {
        Point::new(
            z.coords()
                .iter()
                .zip(self.lower.coords().iter().zip(self.upper.coords()))
                .map(|(v, (l, u))| v.clamp(*l, *u))
                .collect(),
        )
    }
}

/// Deterministic single-valued operator `F: ℝᵈ → ℝᵈ` with optional metadata.
///
/// `lipschitz` and `rho` are the Lipschitz and comonotonicity constants when
/// they are known in closed form; `linear` is set for fields of the form
/// `F(z) = Mz`, which enables the closed-form resolvent of `F`.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    eval: Arc<EvalFn>,
    pub lipschitz: Option<f64>,
    pub rho: Option<f64>,
    pub zeros: Vec<Point>,
    pub domain_box: Option<BoxBounds>,
    pub linear: Option<Matrix>,
}

impl VectorField {
    pub fn new<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        VectorField {
            dim,
            eval: Arc::new(eval),
            lipschitz: None,
            rho: None,
            zeros: Vec::new(),
            domain_box: None,
            linear: None,
        }
    }

    /// `F(z) = Mz`, with `L = ‖M‖₂` and the origin as a known zero.
    pub fn linear(matrix: Matrix) -> Self {
        let dim = matrix.dim();
        let m = matrix.clone();
        let mut field = VectorField::new(dim, move |z, out| m.mul_slice(z, out));
        field.lipschitz = Some(matrix.spectral_norm());
        field.zeros = vec![Point::zeros(dim)];
        field.linear = Some(matrix);
        field
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, z: &Point) -> Point {
        debug_assert_eq!(z.dim(), self.dim);
        let mut out = vec![0.0; self.dim];
        (self.eval)(z.coords(), &mut out);
        Point::new(out)
    }

    pub fn try_eval(&self, z: &Point) -> Result<Point> {
        z.ensure_dim(self.dim)?;
        Ok(self.eval(z))
    }

    pub fn eval_into(&self, z: &[f64], out: &mut [f64]) {
        (self.eval)(z, out)
    }

    /// Wraps the field as an [`Oracle`](crate::Oracle) that counts evaluations.
    pub fn counting(&self) -> CountingField<'_> {
        CountingField::new(self)
    }

    /// Exact resolvent `(I + γM)⁻¹ z` of a linear field.
    pub fn linear_resolvent(&self, gamma: f64, z: &Point) -> Result<Point> {
        let m = self
            .linear
            .as_ref()
            .ok_or_else(|| Error::Unsupported("closed-form resolvent needs a linear field".into()))?;
        m.shifted_identity(gamma).solve(z)
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("dim", &self.dim)
            .field("lipschitz", &self.lipschitz)
            .field("rho", &self.rho)
            .field("zeros", &self.zeros)
            .field("domain_box", &self.domain_box)
            .field("linear", &self.linear.is_some())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_field_metadata() {
        let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let f = VectorField::linear(m);
        assert_eq!(f.eval(&Point::from([1.0, 0.0])), Point::from([0.0, -1.0]));
        assert!((f.lipschitz.unwrap() - 1.0).abs() < 1e-15);
        assert!(f.try_eval(&Point::zeros(3)).is_err());
    }

    #[test]
    fn box_rejects_inverted_bounds() {
        assert!(BoxBounds::new(Point::from([1.0]), Point::from([0.0])).is_err());
        let b = BoxBounds::symmetric(2, 1.5);
        assert_eq!(b.clamp(&Point::from([2.0, -3.0])), Point::from([1.5, -1.5]));
        assert!(b.contains(&Point::from([1.5, 0.0])));
    }
}
