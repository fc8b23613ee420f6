//! Closed-form bounds on tracking error and state for the three controllers.

use serde::Serialize;

use crate::error::{dim_err, Result};
use crate::lpv_model::{solve, PlantFamily};
use crate::mrac::constrained::ConstrainedAdaptiveState;
use crate::numerics::{dot, norm, spectral_norm, sym_eig, DenseMatrix};
use crate::projection::{ColumnBounds, LearningRate};
use crate::saturation::SatLimits;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct Theorem2Bounds<T: Scalar> {
    pub k_m: T,
    pub e_bound: T,
    pub lambda_min_p: T,
    pub lambda_max_p: T,
    pub lambda_min_q: T,
    pub gamma_inv_norm: T,
    pub theta_max: Vec<T>,
    pub d_k: Vec<T>,
}

/// `k_m = 4Σθ_j² + 4(λ_max(P)/λ_min(Q))‖Γ⁻¹‖Σθ_j d_kj` and
/// `‖e‖ ≤ sqrt(k_m‖Γ⁻¹‖/λ_min(P))`.
pub fn theorem2_bounds<T: Scalar>(
    bounds: &ColumnBounds<T>,
    gamma: &LearningRate<T>,
    p: &DenseMatrix<T>,
    q: &DenseMatrix<T>,
    d_k: &[T],
) -> Result<Theorem2Bounds<T>> {
    if d_k.len() != bounds.len() {
        return Err(dim_err("theorem2_bounds", bounds.len(), d_k.len()));
    }
    let ep = sym_eig(p)?;
    let lq = sym_eig(q)?.min();
    let (lmin_p, lmax_p) = (ep.min(), ep.max());
    if lmin_p <= T::zero() || lq <= T::zero() {
        return Err(crate::Error::NotPositiveDefinite {
            lambda_min: lmin_p.min(lq).as_f64(),
        });
    }
    let g = gamma.inv_norm();
    let theta: Vec<T> = bounds.iter().map(|b| b.theta_max()).collect();
    let four = T::lit(4.0);
    let sq: T = theta.iter().map(|&t| t * t).sum();
    let cross: T = theta.iter().zip(d_k).map(|(&t, &d)| t * d).sum();
    let k_m = four * sq + four * (lmax_p / lq) * g * cross;
    let e_bound = (k_m * g / lmin_p).sqrt();
    Ok(Theorem2Bounds {
        k_m,
        e_bound,
        lambda_min_p: lmin_p,
        lambda_max_p: lmax_p,
        lambda_min_q: lq,
        gamma_inv_norm: g,
        theta_max: theta,
        d_k: d_k.to_vec(),
    })
}

/// Same form as [`theorem2_bounds`], bounding the augmented error `e_v`;
/// `λ_min(Q)` plays the role of the unnamed constant in the rate term.
pub fn theorem3_bounds<T: Scalar>(
    bounds: &ColumnBounds<T>,
    gamma: &LearningRate<T>,
    p: &DenseMatrix<T>,
    q: &DenseMatrix<T>,
    d_k: &[T],
) -> Result<Theorem2Bounds<T>> {
    theorem2_bounds(bounds, gamma, p, q, d_k)
}

/// Column-wise bound on `‖d/dt K*(α(t))‖` from a sampled scheduling trace,
/// inflated by `safety`.
pub fn gain_rate_bound<T: Scalar>(fam: &PlantFamily<T>, alphas: &[T], dt: T, safety: T) -> Vec<T> {
    let m = fam.m();
    let mut out = vec![T::zero(); m];
    let mut prev = match alphas.first() {
        Some(&a) => fam.gain_schedule(a),
        None => return out,
    };
    for &a in &alphas[1..] {
        let k = fam.gain_schedule(a);
        for (j, o) in out.iter_mut().enumerate() {
            let d: Vec<T> = k.column(j).iter().zip(prev.column(j)).map(|(x, y)| *x - y).collect();
            *o = o.max(norm(&d) / dt);
        }
        prev = k;
    }
    out.iter().map(|&d| d * safety).collect()
}

fn inv_quad<T: Scalar>(gamma: &LearningRate<T>, v: &[T]) -> Result<T> {
    Ok(dot(v, &solve(gamma.matrix(), v)?))
}

pub struct Theorem4Inputs<'a, T: Scalar> {
    /// Initial controller state.
    pub state: &'a ConstrainedAdaptiveState<T>,
    /// Ideal gain at the initial scheduling value.
    pub k_star0: &'a DenseMatrix<T>,
    /// Ideal saturation-compensation gain.
    pub k_delta_star: &'a DenseMatrix<T>,
    pub p: &'a DenseMatrix<T>,
    pub q: &'a DenseMatrix<T>,
    pub lim: &'a SatLimits<T>,
    pub r_max: T,
    pub b: &'a DenseMatrix<T>,
    pub b_r: &'a DenseMatrix<T>,
    pub x0: &'a [T],
    pub e0: &'a [T],
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct Theorem4Bounds<T: Scalar> {
    pub gamma_max: T,
    pub v_min: T,
    pub v_max: T,
    pub v0: T,
    pub rho: T,
    pub z_b: T,
    pub theta_star_max: T,
    pub theta_max: T,
    pub n_int: usize,
    pub x_min: T,
    pub x_max: T,
    pub z_max: T,
    pub lyapunov0: T,
    pub x0_norm: T,
    /// `‖x(0)‖ < x_max/ρ`.
    pub cond_i: bool,
    /// `sqrt(V(0)) < Z_max/sqrt(γ_max)`.
    pub cond_ii: bool,
    /// `λ_min(Q) − (3n+2) Z_B Θ_max > 0`.
    pub applicable: bool,
    pub region_nonempty: bool,
    /// `λ_min(Q) < 2 Z_B Θ*_max`, where the state ceiling uses an absolute value.
    pub sign_flag: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl<T: Scalar> Theorem4Bounds<T> {
    /// Whether the state ceiling `x_max` is guaranteed for this run.
    pub fn guarantees_state_bound(&self) -> bool {
        self.applicable && self.cond_i && self.cond_ii
    }
}

pub fn theorem4_bounds<T: Scalar>(inp: &Theorem4Inputs<'_, T>) -> Result<Theorem4Bounds<T>> {
    let s = inp.state;
    let ep = sym_eig(inp.p)?;
    let lq = sym_eig(inp.q)?.min();
    let (lmin_p, lmax_p) = (ep.min(), ep.max());
    if lmin_p <= T::zero() || lq <= T::zero() {
        return Err(crate::Error::NotPositiveDefinite {
            lambda_min: lmin_p.min(lq).as_f64(),
        });
    }
    let gamma_max = s.base.gamma.inv_norm().max(s.gamma_delta.inv_norm());
    let rho = (lmax_p / lmin_p).sqrt();
    let z_b = spectral_norm(&inp.p.matmul(&inp.b.hcat(inp.b_r)?)?)?;

    let theta_star_max = s.base.bounds.iter().map(|b| b.theta_max() * b.theta_max()).sum::<T>().sqrt();
    let one = T::one();
    let k_tilde_sup = s
        .base
        .bounds
        .iter()
        .map(|b| {
            let r = b.radius(one) + b.theta_max();
            r * r
        })
        .sum::<T>()
        .sqrt();
    let kd_sup = (0..s.k_delta.rows())
        .filter(|&i| s.row_is_free(i))
        .map(|i| {
            let r = s.bounds_delta.get(i).radius(one);
            r * r
        })
        .sum::<T>()
        .sqrt();
    let kd_tilde_sup = kd_sup + spectral_norm(inp.k_delta_star)?.max(inp.k_delta_star.frobenius_norm());
    let theta_max = k_tilde_sup.max(kd_tilde_sup);
    let ratio = (theta_star_max / theta_max).ceil();
    let n_int = ratio.to_usize().unwrap_or(1).max(1);
    let nn = T::from_usize_lossy(n_int);
    let two = T::lit(2.0);
    let three = T::lit(3.0);

    let v0 = inp.lim.v0();
    let v_min = inp.lim.v_min();
    let denom_min = lq - (three * nn + two) * z_b * theta_max;
    let applicable = denom_min > T::zero();
    let x_min = if applicable {
        z_b * (two * v0 + two * inp.r_max) / denom_min
    } else {
        T::infinity()
    };
    let sign_gap = lq - two * z_b * theta_star_max;
    let sign_flag = sign_gap < T::zero();
    let x_max = if sign_gap == T::zero() {
        T::infinity()
    } else {
        z_b * v_min / sign_gap.abs()
    };
    let z_max = (lq - z_b * (rho / x_max) * (two * v0 + two * inp.r_max)) / (z_b * (three * rho / x_max + three * nn + two));

    let k_tilde = inp.state.base.k_hat.try_sub(inp.k_star0)?;
    let mut lyap0 = dot(inp.e0, &inp.p.matvec(inp.e0)?);
    for j in 0..k_tilde.cols() {
        lyap0 += inv_quad(&s.base.gamma, &k_tilde.column(j))?;
    }
    let kd_tilde = s.k_delta.try_sub(inp.k_delta_star)?;
    for i in 0..kd_tilde.rows() {
        lyap0 += inv_quad(&s.gamma_delta, kd_tilde.row(i))?;
    }
    let x0_norm = norm(inp.x0);
    let cond_i = x0_norm < x_max / rho;
    let cond_ii = z_max > T::zero() && lyap0.sqrt() < z_max / gamma_max.sqrt();

    let mut notes = Vec::new();
    if !applicable {
        notes.push(format!(
            "inapplicable at this configuration: lambda_min(Q) - (3n+2) Z_B Theta_max = {:e} <= 0",
            denom_min.as_f64()
        ));
    }
    if sign_flag {
        notes.push("lambda_min(Q) < 2 Z_B Theta*_max; x_max uses the absolute value".into());
    }
    Ok(Theorem4Bounds {
        gamma_max,
        v_min,
        v_max: inp.lim.v_bar_max(),
        v0,
        rho,
        z_b,
        theta_star_max,
        theta_max,
        n_int,
        x_min,
        x_max,
        z_max,
        lyapunov0: lyap0,
        x0_norm,
        cond_i,
        cond_ii,
        applicable,
        region_nonempty: x_min < x_max,
        sign_flag,
        notes,
    })
}

#[derive(Debug, Clone)]
pub struct Theorem5Subsystem<'a, T: Scalar> {
    pub p: &'a DenseMatrix<T>,
    pub q: &'a DenseMatrix<T>,
    pub gamma: &'a LearningRate<T>,
    pub bounds: &'a ColumnBounds<T>,
    /// Ideal-gain rate bound.
    pub d_bar: T,
    /// Ceiling on the reference state norm.
    pub x_m_bar: T,
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct Theorem5Bounds<T: Scalar> {
    pub lambda_bar: Vec<T>,
    pub rho_bar: Vec<T>,
    pub xi: Vec<T>,
    pub psi_k: Vec<T>,
    pub psi: T,
    #[serde(rename = "Pi")]
    pub pi: DenseMatrix<T>,
    pub lambda_min_pi: T,
    /// `None` when `λ_min(Π) ≤ 0`.
    pub ubb_radius: Option<T>,
    pub applicable: bool,
}

/// Assembles `Π = Λ − Φ` with `Φ_kq = ρ̄_k c_kq` and the ultimate-bound radius
/// `(‖ξ‖ + sqrt(‖ξ‖² + 4λ_min(Π)ψ))/(2λ_min(Π))`. `Π` need not be symmetric;
/// its quadratic form is governed by the symmetric part.
pub fn ubb_from_parts<T: Scalar>(lambda_bar: &[T], rho_bar: &[T], c: &DenseMatrix<T>, xi: &[T], psi_k: &[T]) -> Result<Theorem5Bounds<T>> {
    let n = lambda_bar.len();
    if rho_bar.len() != n || xi.len() != n || psi_k.len() != n || c.shape() != (n, n) {
        return Err(dim_err("theorem5_bounds", n, format!("{}/{}/{}/{:?}", rho_bar.len(), xi.len(), psi_k.len(), c.shape())));
    }
    let mut pi = DenseMatrix::zeros(n, n);
    for k in 0..n {
        for q in 0..n {
            pi[(k, q)] = if k == q { lambda_bar[k] } else { -rho_bar[k] * c[(k, q)] };
        }
    }
    let lmin = sym_eig(&pi.symmetrize())?.min();
    let psi: T = psi_k.iter().copied().sum();
    let applicable = lmin > T::zero();
    let ubb_radius = applicable.then(|| {
        let nx = norm(xi);
        (nx + (nx * nx + T::lit(4.0) * lmin * psi).sqrt()) / (T::lit(2.0) * lmin)
    });
    Ok(Theorem5Bounds {
        lambda_bar: lambda_bar.to_vec(),
        rho_bar: rho_bar.to_vec(),
        xi: xi.to_vec(),
        psi_k: psi_k.to_vec(),
        psi,
        pi,
        lambda_min_pi: lmin,
        ubb_radius,
        applicable,
    })
}

pub fn theorem5_bounds<T: Scalar>(subs: &[Theorem5Subsystem<'_, T>], c: &DenseMatrix<T>) -> Result<Theorem5Bounds<T>> {
    let mut lambda_bar = Vec::new();
    let mut rho_bar = Vec::new();
    let mut xi = Vec::new();
    let mut psi_k = Vec::new();
    let two = T::lit(2.0);
    for s in subs {
        let ep = sym_eig(s.p)?;
        let lq = sym_eig(s.q)?.min();
        lambda_bar.push(lq);
        rho_bar.push(two * ep.max());
        xi.push(two * ep.max() * s.x_m_bar);
        let k_star_max = s.bounds.iter().map(|b| b.theta_max() * b.theta_max()).sum::<T>().sqrt();
        psi_k.push(two * s.gamma.inv_norm() * k_star_max * s.d_bar);
    }
    ubb_from_parts(&lambda_bar, &rho_bar, c, &xi, &psi_k)
}
