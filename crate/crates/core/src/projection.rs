//! Projection operators keeping adaptive parameters inside norm balls.
//!
//! With `f(θ) = (θᵀθ − θ_max²)/(ε_θ θ_max²)` the sets `Ω_c = {f ≤ c}` are
//! nested balls; `Ω_0` has radius `θ_max` and `Ω_1` radius `θ_max·sqrt(1+ε_θ)`.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::numerics::{dot, ensure_positive_definite, DenseMatrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBound<T>", bound = "T: Scalar")]
pub struct ConvexBound<T: Scalar> {
    theta_max: T,
    eps: T,
}

#[derive(Deserialize)]
struct RawBound<T> {
    theta_max: T,
    eps: T,
}

impl<T: Scalar> TryFrom<RawBound<T>> for ConvexBound<T> {
    type Error = Error;
    fn try_from(r: RawBound<T>) -> Result<Self> {
        ConvexBound::new(r.theta_max, r.eps)
    }
}

impl<T: Scalar> ConvexBound<T> {
    pub fn new(theta_max: T, eps: T) -> Result<Self> {
        if !(theta_max > T::zero() && eps > T::zero() && theta_max.is_finite() && eps.is_finite()) {
            return Err(Error::Domain(format!(
                "convex bound needs theta_max > 0 and eps > 0, got ({theta_max}, {eps})"
            )));
        }
        Ok(Self { theta_max, eps })
    }

    pub fn theta_max(&self) -> T {
        self.theta_max
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    /// Radius of `Ω_c`.
    pub fn radius(&self, level: T) -> T {
        self.theta_max * (T::one() + level * self.eps).max(T::zero()).sqrt()
    }
}

/// One bound per parameter column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent, bound = "T: Scalar")]
pub struct ColumnBounds<T: Scalar>(Vec<ConvexBound<T>>);

impl<T: Scalar> ColumnBounds<T> {
    pub fn new(bounds: Vec<ConvexBound<T>>) -> Self {
        Self(bounds)
    }

    pub fn uniform(b: ConvexBound<T>, m: usize) -> Self {
        Self(vec![b; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ConvexBound<T>> {
        self.0.iter()
    }

    pub fn get(&self, j: usize) -> &ConvexBound<T> {
        &self.0[j]
    }
}

/// Symmetric positive-definite learning-rate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningRate<T: Scalar> {
    gamma: DenseMatrix<T>,
    lambda_min: T,
}

impl<T: Scalar> LearningRate<T> {
    pub fn new(gamma: DenseMatrix<T>) -> Result<Self> {
        gamma.ensure_square("LearningRate::new")?;
        if gamma.asymmetry() > T::lit(1e-9) * gamma.max_abs().max(T::one()) {
            return Err(Error::Domain("learning-rate matrix must be symmetric".into()));
        }
        let gamma = gamma.symmetrize();
        let lambda_min = ensure_positive_definite(&gamma).map_err(|e| match e {
            Error::NotPositiveDefinite { lambda_min } => {
                Error::Domain(format!("learning-rate matrix not positive definite (lambda_min = {lambda_min:e})"))
            }
            other => other,
        })?;
        Ok(Self { gamma, lambda_min })
    }

    pub fn diag(d: &[T]) -> Result<Self> {
        Self::new(DenseMatrix::diag(d))
    }

    pub fn scalar(g: T, n: usize) -> Result<Self> {
        Self::new(DenseMatrix::scaled_identity(n, g))
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.gamma
    }

    pub fn dim(&self) -> usize {
        self.gamma.rows()
    }

    /// `‖Γ⁻¹‖ = 1/λ_min(Γ)`.
    pub fn inv_norm(&self) -> T {
        T::one() / self.lambda_min
    }

    pub fn lambda_min(&self) -> T {
        self.lambda_min
    }

    fn apply(&self, y: &[T]) -> Vec<T> {
        self.gamma.matvec(y).expect("learning-rate dimension checked by caller")
    }
}

pub fn boundary_fn<T: Scalar>(theta: &[T], b: &ConvexBound<T>) -> T {
    let tm2 = b.theta_max * b.theta_max;
    (dot(theta, theta) - tm2) / (b.eps * tm2)
}

pub fn boundary_grad<T: Scalar>(theta: &[T], b: &ConvexBound<T>) -> Vec<T> {
    let c = T::lit(2.0) / (b.eps * b.theta_max * b.theta_max);
    theta.iter().map(|&t| c * t).collect()
}

pub fn proj_vec<T: Scalar>(theta: &[T], y: &[T], b: &ConvexBound<T>) -> Result<Vec<T>> {
    if theta.len() != y.len() {
        return Err(dim_err("proj_vec", theta.len(), y.len()));
    }
    let f = boundary_fn(theta, b);
    if f <= T::zero() {
        return Ok(y.to_vec());
    }
    let g = boundary_grad(theta, b);
    let gy = dot(&g, y);
    if gy <= T::zero() {
        return Ok(y.to_vec());
    }
    let gg = dot(&g, &g);
    assert!(gg > T::zero(), "gradient vanishes outside the ball");
    let c = gy * f / gg;
    Ok(y.iter().zip(&g).map(|(&yi, &gi)| yi - c * gi).collect())
}

pub fn proj_gamma_vec<T: Scalar>(theta: &[T], y: &[T], gamma: &LearningRate<T>, b: &ConvexBound<T>) -> Result<Vec<T>> {
    if theta.len() != y.len() {
        return Err(dim_err("proj_gamma_vec", theta.len(), y.len()));
    }
    if gamma.dim() != y.len() {
        return Err(dim_err("proj_gamma_vec", format!("Γ of order {}", y.len()), gamma.dim()));
    }
    let gy = gamma.apply(y);
    let f = boundary_fn(theta, b);
    if f <= T::zero() {
        return Ok(gy);
    }
    let g = boundary_grad(theta, b);
    let g_gy = dot(&g, &gy);
    if g_gy <= T::zero() {
        return Ok(gy);
    }
    let gg = gamma.apply(&g);
    let denom = dot(&g, &gg);
    assert!(denom > T::zero(), "gradient vanishes outside the ball");
    let c = g_gy * f / denom;
    Ok(gy.iter().zip(&gg).map(|(&a, &b)| a - c * b).collect())
}

fn check_cols<T: Scalar>(op: &'static str, theta: &DenseMatrix<T>, y: &DenseMatrix<T>, b: &ColumnBounds<T>) -> Result<()> {
    if theta.shape() != y.shape() {
        return Err(dim_err(op, format!("{:?}", theta.shape()), format!("{:?}", y.shape())));
    }
    if b.len() != theta.cols() {
        return Err(dim_err(op, format!("{} column bounds", theta.cols()), b.len()));
    }
    Ok(())
}

pub fn proj_mat<T: Scalar>(theta: &DenseMatrix<T>, y: &DenseMatrix<T>, b: &ColumnBounds<T>) -> Result<DenseMatrix<T>> {
    check_cols("proj_mat", theta, y, b)?;
    let mut out = DenseMatrix::zeros(y.rows(), y.cols());
    for (j, bj) in b.iter().enumerate() {
        out.set_column(j, &proj_vec(&theta.column(j), &y.column(j), bj)?);
    }
    Ok(out)
}

pub fn proj_gamma_mat<T: Scalar>(
    theta: &DenseMatrix<T>,
    y: &DenseMatrix<T>,
    gamma: &LearningRate<T>,
    b: &ColumnBounds<T>,
) -> Result<DenseMatrix<T>> {
    check_cols("proj_gamma_mat", theta, y, b)?;
    let mut out = DenseMatrix::zeros(y.rows(), y.cols());
    for (j, bj) in b.iter().enumerate() {
        out.set_column(j, &proj_gamma_vec(&theta.column(j), &y.column(j), gamma, bj)?);
    }
    Ok(out)
}

/// Radially pulls `θ` back onto `Ω_level` if it lies outside. Returns whether
/// it moved.
pub fn clamp_to_level<T: Scalar>(theta: &mut [T], b: &ConvexBound<T>, level: T) -> bool {
    let r = b.radius(level);
    let n = dot(theta, theta).sqrt();
    if n > r {
        let s = r / n;
        theta.iter_mut().for_each(|t| *t *= s);
        true
    } else {
        false
    }
}

/// Largest `f_j` over the columns of `theta`.
pub fn max_boundary_fn<T: Scalar>(theta: &DenseMatrix<T>, b: &ColumnBounds<T>) -> T {
    b.iter()
        .enumerate()
        .map(|(j, bj)| boundary_fn(&theta.column(j), bj))
        .fold(T::neg_infinity(), T::max)
}
