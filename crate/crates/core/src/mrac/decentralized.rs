use crate::error::{dim_err, Result};
use crate::mrac::basic::{adapt_basic, control_basic, AdaptiveState};
use crate::numerics::DenseMatrix;
use crate::scalar::Scalar;

/// Scalar control `v_k = K̂_kᵀ δx_k` of one single-input subsystem.
pub fn control_decentralized<T: Scalar>(s: &AdaptiveState<T>, dx: &[T]) -> Result<T> {
    if s.k_hat.cols() != 1 {
        return Err(dim_err("control_decentralized", "single-input gain", s.k_hat.cols()));
    }
    Ok(control_basic(s, dx)?[0])
}

/// `Proj_Γ(K̂_k, −δx_k e_kᵀ P_k b_k)`.
pub fn adapt_decentralized<T: Scalar>(s: &AdaptiveState<T>, dx: &[T], e: &[T], p: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if b.cols() != 1 {
        return Err(dim_err("adapt_decentralized", "single input column", b.cols()));
    }
    adapt_basic(s, dx, e, p, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::p_co;
    use crate::projection::{boundary_fn, boundary_grad, ColumnBounds, ConvexBound, LearningRate};

    fn state(k: [f64; 3], g: f64) -> AdaptiveState<f64> {
        let b = ConvexBound::new(2.0 * 3f64.sqrt(), 0.1).unwrap();
        AdaptiveState::new(DenseMatrix::column_vector(&k), ColumnBounds::uniform(b, 1), LearningRate::scalar(g, 3).unwrap()).unwrap()
    }

    fn b() -> DenseMatrix<f64> {
        DenseMatrix::column_vector(&[0.0, 3.0, 0.0])
    }

    #[test]
    fn scalar_control() {
        let s = state([0.0, 0.0, -0.49], 40.0);
        assert_eq!(control_decentralized(&s, &[0.0; 3]).unwrap(), 0.0);
        assert_eq!(control_decentralized(&s, &[0.0, 0.0, 1.0]).unwrap(), -0.49);
        let nominal = state([0.0, 0.0, -0.3], 40.0);
        assert!((control_decentralized(&nominal, &[0.2, 0.1, 0.5]).unwrap() + 0.15).abs() < 1e-15);
    }

    #[test]
    fn scalar_adaptation() {
        let p = p_co();
        let s = state([0.0, 0.0, -0.49], 1.0);
        assert_eq!(adapt_decentralized(&s, &[0.3, 0.1, 0.2], &[0.0; 3], &p, &b()).unwrap().max_abs(), 0.0);
        let x = [0.3, 0.1, 0.2];
        let e = [0.01, 0.02, -0.01];
        let w = p.matmul(&b()).unwrap().tr_matvec(&e).unwrap()[0];
        let d = adapt_decentralized(&s, &x, &e, &p, &b()).unwrap();
        for i in 0..3 {
            assert!((d[(i, 0)] + x[i] * w).abs() < 1e-15);
        }
        let bound = s.bounds.get(0);
        let r = bound.radius(1.0);
        let edge = state([0.0, 0.0, -r], 30.0);
        let d = adapt_decentralized(&edge, &[0.0, 0.0, 1.0], &[0.0, 1.0, 0.0], &p, &b()).unwrap();
        let rate: f64 = boundary_grad(&[0.0, 0.0, -r], bound).iter().zip(d.column(0)).map(|(g, v)| g * v).sum();
        assert!((boundary_fn(&[0.0, 0.0, -r], bound) - 1.0).abs() < 1e-12);
        assert!(rate <= 1e-12, "{rate}");
    }
}
