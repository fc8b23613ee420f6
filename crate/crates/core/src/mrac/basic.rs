use crate::error::{dim_err, Result};
use crate::numerics::DenseMatrix;
use crate::projection::{proj_gamma_mat, ColumnBounds, LearningRate};
use crate::scalar::Scalar;

/// Adaptive gain `K̂` with its parameter set and learning rate.
#[derive(Debug, Clone)]
pub struct AdaptiveState<T: Scalar> {
    pub k_hat: DenseMatrix<T>,
    pub bounds: ColumnBounds<T>,
    pub gamma: LearningRate<T>,
}

impl<T: Scalar> AdaptiveState<T> {
    pub fn new(k_hat: DenseMatrix<T>, bounds: ColumnBounds<T>, gamma: LearningRate<T>) -> Result<Self> {
        if bounds.len() != k_hat.cols() {
            return Err(dim_err("AdaptiveState::new", format!("{} column bounds", k_hat.cols()), bounds.len()));
        }
        if gamma.dim() != k_hat.rows() {
            return Err(dim_err("AdaptiveState::new", format!("Γ of order {}", k_hat.rows()), gamma.dim()));
        }
        k_hat.ensure_finite("AdaptiveState::new")?;
        Ok(Self { k_hat, bounds, gamma })
    }
}

/// `v = K̂ᵀ x`.
pub fn control_basic<T: Scalar>(s: &AdaptiveState<T>, x: &[T]) -> Result<Vec<T>> {
    if x.len() != s.k_hat.rows() {
        return Err(dim_err("control_basic", s.k_hat.rows(), x.len()));
    }
    s.k_hat.tr_matvec(x)
}

/// `Proj_Γ(K̂, −x eᵀ P B)` given the product `P B`.
pub fn adapt_with_pb<T: Scalar>(s: &AdaptiveState<T>, x: &[T], e: &[T], pb: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if x.len() != s.k_hat.rows() || e.len() != pb.rows() || pb.cols() != s.k_hat.cols() {
        return Err(dim_err(
            "adapt_basic",
            format!("x {}, e {}, PB {}x{}", s.k_hat.rows(), pb.rows(), pb.rows(), s.k_hat.cols()),
            format!("x {}, e {}, PB {}x{}", x.len(), e.len(), pb.rows(), pb.cols()),
        ));
    }
    let w = pb.tr_matvec(e)?;
    let y = DenseMatrix::outer(x, &w).scale(-T::one());
    proj_gamma_mat(&s.k_hat, &y, &s.gamma, &s.bounds)
}

pub fn adapt_basic<T: Scalar>(s: &AdaptiveState<T>, x: &[T], e: &[T], p: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    adapt_with_pb(s, x, e, &p.matmul(b)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{engine_family, published_p};
    use crate::projection::{boundary_fn, boundary_grad, ConvexBound};

    fn state(k: DenseMatrix<f64>, g: f64) -> AdaptiveState<f64> {
        let b = ConvexBound::new(2.0 * 2f64.sqrt(), 0.1).unwrap();
        AdaptiveState::new(k, ColumnBounds::uniform(b, 2), LearningRate::scalar(g, 6).unwrap()).unwrap()
    }

    fn k0() -> DenseMatrix<f64> {
        let mut k = DenseMatrix::zeros(6, 2);
        k.set_block(4, 0, &DenseMatrix::from_rows(&[[-0.195, -0.195], [-0.197, -0.197]]).unwrap());
        k
    }

    #[test]
    fn control_cases() {
        let s = state(k0(), 100.0);
        assert_eq!(control_basic(&s, &[0.0; 6]).unwrap(), vec![0.0, 0.0]);
        let mut x = [0.0; 6];
        x[4] = 2.0;
        assert_eq!(control_basic(&s, &x).unwrap(), vec![2.0 * -0.195, 2.0 * -0.195]);
        let fam = engine_family();
        let s = state(fam.gain_schedule(0.5), 1.0);
        let x = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let nominal = fam.gain_schedule(0.5).transpose().matvec(&x).unwrap();
        assert_eq!(control_basic(&s, &x).unwrap(), nominal);
        assert!(control_basic(&s, &[0.0; 5]).is_err());
    }

    #[test]
    fn adaptation_cases() {
        let fam = engine_family();
        let p = published_p();
        let b = fam.input_matrix();
        let s = state(k0(), 1.0);
        let x = [0.3, 0.2, 0.05, 0.0, -0.1, 0.2];
        assert_eq!(adapt_basic(&s, &x, &[0.0; 6], &p, &b).unwrap().max_abs(), 0.0);
        let e = [0.01, -0.02, 0.0, 0.03, 0.0, 0.01];
        let raw = DenseMatrix::outer(&x, &(p.matmul(&b).unwrap().tr_matvec(&e).unwrap())).scale(-1.0);
        assert!((&adapt_basic(&s, &x, &e, &p, &b).unwrap() - &raw).max_abs() < 1e-15);

        // boundary gain, outward drive: tangential update
        let bound = s.bounds.get(0);
        let mut kb = DenseMatrix::zeros(6, 2);
        kb[(4, 0)] = -bound.radius(1.0);
        kb[(5, 1)] = -bound.radius(1.0);
        let sb = state(kb.clone(), 100.0);
        let x = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0];
        let e = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0];
        let mut pb = DenseMatrix::zeros(6, 2);
        pb[(4, 0)] = 1.0;
        pb[(5, 1)] = 1.0;
        let y = DenseMatrix::outer(&x, &pb.tr_matvec(&e).unwrap()).scale(-1.0);
        let d = adapt_with_pb(&sb, &x, &e, &pb).unwrap();
        assert!((&d - &y.scale(100.0)).max_abs() > 1.0);
        for j in 0..2 {
            assert!((boundary_fn(&kb.column(j), bound) - 1.0).abs() < 1e-12);
            let rate: f64 = boundary_grad(&kb.column(j), bound).iter().zip(d.column(j)).map(|(g, v)| g * v).sum();
            assert!(rate <= 1e-12, "{rate}");
        }
    }
}
