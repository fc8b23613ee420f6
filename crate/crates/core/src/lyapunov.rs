//! Common quadratic Lyapunov certificates for finite vertex sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::lpv_model::{hurwitz_margin, PlantFamily};
use crate::numerics::{sym_eig, sym_max_eig, DenseMatrix};
use crate::scalar::Scalar;

pub use crate::lpv_model::norm_bound_ka;

/// Absolute slack on margins when verifying decimal-text inputs.
pub const VERIFY_SLACK: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct VertexSet<T: Scalar> {
    matrices: Vec<DenseMatrix<T>>,
}

/// Random non-equilibrium surrogates `A_m(α) + δ·E`, `‖E‖_F = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub count: usize,
    pub delta: f64,
    pub seed: u64,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            count: 10,
            delta: 0.05,
            seed: 0,
        }
    }
}

impl<T: Scalar> VertexSet<T> {
    pub fn new(matrices: Vec<DenseMatrix<T>>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::Data("vertex set must be nonempty".into()))?;
        first.ensure_square("VertexSet::new")?;
        let shape = first.shape();
        for m in &matrices {
            if m.shape() != shape {
                return Err(dim_err("VertexSet::new", format!("{shape:?}"), format!("{:?}", m.shape())));
            }
            m.ensure_finite("VertexSet::new")?;
        }
        Ok(Self { matrices })
    }

    /// `A_m` at the family's own equilibrium points, then at each grid value.
    pub fn from_family(fam: &PlantFamily<T>, grid: &[T], include_equilibria: bool, perturb: Option<Perturbation>) -> Result<Self> {
        let mut alphas: Vec<T> = Vec::new();
        if include_equilibria {
            alphas.extend(fam.points().iter().map(|p| p.alpha));
        }
        alphas.extend_from_slice(grid);
        let mut matrices: Vec<DenseMatrix<T>> = alphas.iter().map(|&a| fam.reference_matrix(a)).collect();
        if let Some(p) = perturb {
            let (lo, hi) = fam.alpha_range();
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
            let dim = fam.state_dim();
            for _ in 0..p.count {
                let w: f64 = rng.gen();
                let a = lo + (hi - lo) * T::lit(w);
                let mut e = DenseMatrix::zeros(dim, dim);
                for i in 0..dim {
                    for j in 0..dim {
                        e[(i, j)] = T::lit(rng.gen::<f64>() * 2.0 - 1.0);
                    }
                }
                let scale = T::lit(p.delta) / e.frobenius_norm();
                matrices.push(&fam.reference_matrix(a) + &e.scale(scale));
            }
        }
        Self::new(matrices)
    }

    pub fn matrices(&self) -> &[DenseMatrix<T>] {
        &self.matrices
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].rows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Certificate<T: Scalar> {
    #[serde(rename = "P")]
    pub p: DenseMatrix<T>,
    #[serde(rename = "Q")]
    pub q: DenseMatrix<T>,
    /// `λ_max(P Aᵢ + Aᵢᵀ P + Q)` per vertex.
    pub margins: Vec<T>,
    /// `None` when `P` is not positive definite.
    pub kappa: Option<T>,
    pub lambda_min_p: T,
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl<T: Scalar> Certificate<T> {
    pub fn worst_margin(&self) -> T {
        self.margins.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

/// `λ_max(sym(P A + Aᵀ P + Q))` and its top eigenvector.
fn residual_top<T: Scalar>(p: &DenseMatrix<T>, a: &DenseMatrix<T>, q: &DenseMatrix<T>) -> Result<(T, Vec<T>)> {
    let pa = p.matmul(a)?;
    let mut r = pa.try_add(&pa.transpose())?;
    r = r.try_add(q)?;
    sym_max_eig(&r)
}

pub fn vertex_margins<T: Scalar>(p: &DenseMatrix<T>, q: &DenseMatrix<T>, v: &VertexSet<T>) -> Result<Vec<T>> {
    v.matrices.iter().map(|a| residual_top(p, a, q).map(|(l, _)| l)).collect()
}

/// Largest `q` with `P Aᵢ + Aᵢᵀ P ≤ −q I` at every vertex; nonpositive when
/// `P` certifies nothing.
pub fn certified_level<T: Scalar>(p: &DenseMatrix<T>, v: &VertexSet<T>) -> Result<T> {
    let z = DenseMatrix::zeros(v.dim(), v.dim());
    Ok(-vertex_margins(&p.symmetrize(), &z, v)?.into_iter().fold(T::neg_infinity(), T::max))
}

fn check_pq<T: Scalar>(p: &DenseMatrix<T>, q: &DenseMatrix<T>, dim: usize) -> Result<()> {
    for (name, m) in [("P", p), ("Q", q)] {
        if m.shape() != (dim, dim) {
            return Err(dim_err("lyapunov", format!("{name} {dim}x{dim}"), format!("{}x{}", m.rows(), m.cols())));
        }
        m.ensure_finite("lyapunov")?;
        if m.asymmetry() > T::lit(1e-9) {
            return Err(Error::Domain(format!(
                "{name} is not symmetric (max asymmetry {:e})",
                m.asymmetry().as_f64()
            )));
        }
    }
    Ok(())
}

fn certificate<T: Scalar>(p: DenseMatrix<T>, q: DenseMatrix<T>, margins: Vec<T>, threshold: T, lambda_floor: T) -> Result<Certificate<T>> {
    let e = sym_eig(&p)?;
    let lmin = e.min();
    let kappa = (lmin > T::zero()).then(|| e.max() / lmin);
    let ok_margins = margins.iter().all(|&m| m <= threshold);
    let valid = ok_margins && lmin > lambda_floor;
    let reason = if valid {
        None
    } else if lmin <= lambda_floor {
        Some(format!("P is not positive definite (lambda_min = {:e})", lmin.as_f64()))
    } else {
        let (i, w) = margins
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |acc, (i, &m)| if m > acc.1 { (i, m) } else { acc });
        Some(format!("vertex {i} has margin {:e} above {:e}", w.as_f64(), threshold.as_f64()))
    };
    Ok(Certificate {
        p,
        q,
        margins,
        kappa,
        lambda_min_p: lmin,
        valid,
        reason,
    })
}

pub fn verify_common_p<T: Scalar>(p: &DenseMatrix<T>, q: &DenseMatrix<T>, v: &VertexSet<T>) -> Result<Certificate<T>> {
    check_pq(p, q, v.dim())?;
    let p = p.symmetrize();
    let q = q.symmetrize();
    let margins = vertex_margins(&p, &q, v)?;
    certificate(p, q, margins, T::lit(VERIFY_SLACK), T::zero())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub eps_pd: f64,
    /// `None` means `10 × dimension`.
    pub trace_cap: Option<f64>,
    pub max_iter: usize,
    pub target_margin: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            eps_pd: 1e-3,
            trace_cap: None,
            max_iter: 50_000,
            target_margin: 1e-8,
        }
    }
}

/// Euclidean projection of a symmetric matrix onto
/// `{P : λ_min(P) ≥ eps, trace(P) ≤ cap}`.
pub fn project_feasible<T: Scalar>(s: &DenseMatrix<T>, eps: T, cap: T) -> Result<DenseMatrix<T>> {
    let e = sym_eig(&s.symmetrize())?;
    let lam = &e.eigenvalues;
    let clipped_sum: T = lam.iter().map(|&l| l.max(eps)).sum();
    let tau = if clipped_sum <= cap {
        T::zero()
    } else {
        // Σ max(λ - τ, eps) is nonincreasing in τ; bisect for equality with cap.
        let mut lo = T::zero();
        let mut hi = lam.iter().copied().fold(T::zero(), T::max) - eps + T::one();
        for _ in 0..200 {
            let mid = (lo + hi) * T::lit(0.5);
            let s: T = lam.iter().map(|&l| (l - mid).max(eps)).sum();
            if s > cap {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    Ok(e.reconstruct_with(|l| (l - tau).max(eps)).symmetrize())
}

/// Searches for one `P` with `P Aᵢ + Aᵢᵀ P + Q ⪯ -target·I` on every vertex,
/// minimizing the worst vertex margin by projected subgradient steps.
pub fn solve_common_p<T: Scalar>(v: &VertexSet<T>, q: &DenseMatrix<T>, opts: &SolverOptions) -> Result<Certificate<T>> {
    let dim = v.dim();
    check_pq(&DenseMatrix::identity(dim), q, dim)?;
    let q = q.symmetrize();
    let q_min = sym_eig(&q)?.min();
    if q_min <= T::zero() {
        return Err(Error::NotPositiveDefinite {
            lambda_min: q_min.as_f64(),
        });
    }
    for (i, a) in v.matrices.iter().enumerate() {
        let h = hurwitz_margin(a)?;
        if h >= T::zero() {
            return Err(Error::NotHurwitz {
                index: i,
                margin: h.as_f64(),
            });
        }
    }
    let eps = T::lit(opts.eps_pd);
    let cap = T::lit(opts.trace_cap.unwrap_or(10.0 * dim as f64));
    let target = T::lit(opts.target_margin);
    if eps * T::from_usize_lossy(dim) > cap {
        return Err(Error::Domain("trace cap is below dim × eps_pd".into()));
    }
    let level = -(target * T::lit(10.0)).max(q_min * T::lit(1e-2));

    let mut p = project_feasible(&DenseMatrix::identity(dim), eps, cap)?;
    let mut best = p.clone();
    let mut best_phi = T::infinity();
    for _ in 0..=opts.max_iter {
        let mut phi = T::neg_infinity();
        let mut arg = (0, Vec::new());
        for (i, a) in v.matrices.iter().enumerate() {
            let (l, vec) = residual_top(&p, a, &q)?;
            if l > phi {
                phi = l;
                arg = (i, vec);
            }
        }
        if phi < best_phi {
            best_phi = phi;
            best = p.clone();
        }
        if phi <= -target {
            break;
        }
        let a = &v.matrices[arg.0];
        let av = a.matvec(&arg.1)?;
        let g = &DenseMatrix::outer(&av, &arg.1) + &DenseMatrix::outer(&arg.1, &av);
        let gn = g.inner(&g);
        if gn <= T::zero() {
            break;
        }
        let step = (phi - level) / gn;
        p = project_feasible(&(&p - &g.scale(step)), eps, cap)?;
    }
    let margins = vertex_margins(&best, &q, v)?;
    let mut cert = certificate(best, q, margins, -target, eps * (T::one() - T::lit(1e-9)))?;
    if !cert.valid && cert.reason.is_some() {
        cert.reason = Some(format!(
            "no certificate after {} iterations: {}",
            opts.max_iter,
            cert.reason.take().unwrap_or_default()
        ));
    }
    Ok(cert)
}
