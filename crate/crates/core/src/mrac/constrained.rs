use crate::error::{dim_err, Result};
use crate::mrac::basic::{adapt_with_pb, control_basic, AdaptiveState};
use crate::numerics::{sub_vec, DenseMatrix};
use crate::projection::{proj_gamma_vec, ColumnBounds, LearningRate};
use crate::saturation::{deficiency, sat, SatLimits};
use crate::scalar::Scalar;

/// Adaptive state of the input-constrained controller.
///
/// `k_delta` is `(n+2m)×m`; its rows are the parameter vectors bounded by
/// `bounds_delta` and updated with `gamma_delta`. Entries where `free` is
/// false are pinned at their initial value.
#[derive(Debug, Clone)]
pub struct ConstrainedAdaptiveState<T: Scalar> {
    pub base: AdaptiveState<T>,
    pub k_delta: DenseMatrix<T>,
    pub bounds_delta: ColumnBounds<T>,
    pub gamma_delta: LearningRate<T>,
    pub free: Vec<bool>,
    pub e_delta: Vec<T>,
}

impl<T: Scalar> ConstrainedAdaptiveState<T> {
    pub fn new(
        base: AdaptiveState<T>,
        k_delta: DenseMatrix<T>,
        bounds_delta: ColumnBounds<T>,
        gamma_delta: LearningRate<T>,
        free: Option<Vec<bool>>,
    ) -> Result<Self> {
        let (n, m) = base.k_hat.shape();
        if k_delta.shape() != (n, m) {
            return Err(dim_err("ConstrainedAdaptiveState::new", format!("K_Δ {n}x{m}"), format!("{:?}", k_delta.shape())));
        }
        if bounds_delta.len() != n {
            return Err(dim_err("ConstrainedAdaptiveState::new", format!("{n} row bounds"), bounds_delta.len()));
        }
        if gamma_delta.dim() != m {
            return Err(dim_err("ConstrainedAdaptiveState::new", format!("Γ_Δ of order {m}"), gamma_delta.dim()));
        }
        let free = free.unwrap_or_else(|| vec![true; n * m]);
        if free.len() != n * m {
            return Err(dim_err("ConstrainedAdaptiveState::new", n * m, free.len()));
        }
        Ok(Self {
            base,
            k_delta,
            bounds_delta,
            gamma_delta,
            free,
            e_delta: vec![T::zero(); n],
        })
    }

    pub fn row_is_free(&self, i: usize) -> bool {
        let m = self.k_delta.cols();
        self.free[i * m..(i + 1) * m].iter().any(|&f| f)
    }
}

#[derive(Debug, Clone)]
pub struct ConstrainedStep<T: Scalar> {
    pub v_raw: Vec<T>,
    pub v_applied: Vec<T>,
    pub dv: Vec<T>,
    pub e: Vec<T>,
    pub e_v: Vec<T>,
    pub d_e_delta: Vec<T>,
    pub d_k_hat: DenseMatrix<T>,
    pub d_k_delta: DenseMatrix<T>,
}

/// One evaluation of the constrained control and adaptation laws at the
/// current reference matrix `a_m`.
pub fn step_constrained<T: Scalar>(
    s: &ConstrainedAdaptiveState<T>,
    x: &[T],
    x_m: &[T],
    lim: &SatLimits<T>,
    p: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    a_m: &DenseMatrix<T>,
) -> Result<ConstrainedStep<T>> {
    let (n, m) = s.k_delta.shape();
    if x.len() != n || x_m.len() != n || a_m.shape() != (n, n) || p.shape() != (n, n) {
        return Err(dim_err("step_constrained", n, format!("x {}, x_m {}", x.len(), x_m.len())));
    }
    let v_raw = control_basic(&s.base, x)?;
    let v_applied = sat(&v_raw, lim)?;
    let dv = deficiency(&v_raw, lim)?;
    let e = sub_vec(x, x_m);
    let e_v = sub_vec(&e, &s.e_delta);

    let mut d_e_delta = a_m.matvec(&s.e_delta)?;
    let kdv = s.k_delta.matvec(&dv)?;
    d_e_delta.iter_mut().zip(&kdv).for_each(|(d, k)| *d -= *k);

    let pb = p.matmul(b)?;
    let d_k_hat = adapt_with_pb(&s.base, x, &e_v, &pb)?;

    let pe = p.matvec(&e_v)?;
    let mut d_k_delta = DenseMatrix::zeros(n, m);
    for i in 0..n {
        if !s.row_is_free(i) {
            continue;
        }
        let y: Vec<T> = dv.iter().map(|&d| d * pe[i]).collect();
        let row = s.k_delta.row(i).to_vec();
        let d = proj_gamma_vec(&row, &y, &s.gamma_delta, s.bounds_delta.get(i))?;
        for j in 0..m {
            if s.free[i * m + j] {
                d_k_delta[(i, j)] = d[j];
            }
        }
    }
    Ok(ConstrainedStep {
        v_raw,
        v_applied,
        dv,
        e,
        e_v,
        d_e_delta,
        d_k_hat,
        d_k_delta,
    })
}
