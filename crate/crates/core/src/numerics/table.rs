use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::numerics::matrix::DenseMatrix;
use crate::scalar::Scalar;

/// Matrices indexed by a strictly increasing scheduling grid, interpolated
/// piecewise-linearly and clamped outside the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable<T>", bound = "T: Scalar")]
pub struct MatrixTable<T: Scalar> {
    knots: Vec<T>,
    values: Vec<DenseMatrix<T>>,
}

#[derive(Deserialize)]
#[serde(bound = "T: Scalar")]
struct RawTable<T: Scalar> {
    knots: Vec<T>,
    values: Vec<DenseMatrix<T>>,
}

impl<T: Scalar> TryFrom<RawTable<T>> for MatrixTable<T> {
    type Error = Error;
    fn try_from(r: RawTable<T>) -> Result<Self> {
        MatrixTable::new(r.knots, r.values)
    }
}

impl<T: Scalar> MatrixTable<T> {
    pub fn new(knots: Vec<T>, values: Vec<DenseMatrix<T>>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Data("matrix table needs at least one knot".into()));
        }
        if knots.len() != values.len() {
            return Err(dim_err("MatrixTable::new", knots.len(), values.len()));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::NonFinite { op: "MatrixTable::new" });
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Data("matrix table knots must be strictly increasing".into()));
        }
        let shape = values[0].shape();
        if let Some(bad) = values.iter().find(|v| v.shape() != shape) {
            return Err(dim_err(
                "MatrixTable::new",
                format!("{shape:?}"),
                format!("{:?}", bad.shape()),
            ));
        }
        for v in &values {
            v.ensure_finite("MatrixTable::new")?;
        }
        Ok(Self { knots, values })
    }

    /// Single constant matrix.
    pub fn constant(value: DenseMatrix<T>) -> Self {
        Self {
            knots: vec![T::zero()],
            values: vec![value],
        }
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn values(&self) -> &[DenseMatrix<T>] {
        &self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values[0].shape()
    }

    /// Segment index `i` and blend weight `w` so that the value at `alpha` is
    /// `(1-w)·values[i] + w·values[i+1]`. Returns `w = 0` on knots and when clamped.
    pub fn locate(&self, alpha: T) -> (usize, T) {
        locate(&self.knots, alpha)
    }

    pub fn interp(&self, alpha: T) -> DenseMatrix<T> {
        let (i, w) = self.locate(alpha);
        if w == T::zero() {
            self.values[i].clone()
        } else {
            self.values[i]
                .lerp(&self.values[i + 1], w)
                .expect("uniform table shapes")
        }
    }
}

/// Clamped piecewise-linear lookup on a strictly increasing grid.
pub fn locate<T: Scalar>(knots: &[T], alpha: T) -> (usize, T) {
    let last = knots.len() - 1;
    if alpha.is_nan() || alpha <= knots[0] {
        return (0, T::zero());
    }
    if alpha >= knots[last] {
        return (last, T::zero());
    }
    let i = knots.partition_point(|&k| k <= alpha) - 1;
    if alpha == knots[i] {
        return (i, T::zero());
    }
    (i, (alpha - knots[i]) / (knots[i + 1] - knots[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> MatrixTable<f64> {
        MatrixTable::new(
            vec![0.0, 1.0],
            vec![DenseMatrix::identity(2), DenseMatrix::scaled_identity(2, 2.0)],
        )
        .unwrap()
    }

    #[test]
    fn knots_blend_and_clamp() {
        let t = table();
        assert_eq!(t.interp(0.0), DenseMatrix::identity(2));
        assert_eq!(t.interp(0.5), DenseMatrix::scaled_identity(2, 1.5));
        assert_eq!(t.interp(2.0), DenseMatrix::scaled_identity(2, 2.0));
        assert_eq!(t.interp(-3.0), DenseMatrix::identity(2));
        assert_eq!(t.interp(1.0), DenseMatrix::scaled_identity(2, 2.0));
    }

    #[test]
    fn rejects_bad_tables() {
        let i = DenseMatrix::<f64>::identity(2);
        assert!(MatrixTable::<f64>::new(vec![], vec![]).is_err());
        assert!(MatrixTable::new(vec![1.0, 1.0], vec![i.clone(), i.clone()]).is_err());
        assert!(MatrixTable::new(vec![0.0, 1.0], vec![i.clone(), DenseMatrix::identity(3)]).is_err());
        let json = r#"{"knots":[1.0,0.0],"values":[[[1.0]],[[2.0]]]}"#;
        assert!(serde_json::from_str::<MatrixTable<f64>>(json).is_err());
    }
}
