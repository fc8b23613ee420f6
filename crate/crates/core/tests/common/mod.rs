//! Helpers shared by the integration suites.
#![allow(dead_code)]

use gsmrac::lpv_model::solve;
use gsmrac::numerics::{dot, norm, DenseMatrix};
use gsmrac::projection::{boundary_fn, proj_gamma_mat, proj_gamma_vec, proj_mat, proj_vec, ColumnBounds, ConvexBound, LearningRate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn vec_in(r: &mut impl Rng, n: usize, mag: f64) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-mag..mag)).collect()
}

/// Uniform direction, radius uniform in `[0, radius]`.
pub fn in_ball(r: &mut impl Rng, n: usize, radius: f64) -> Vec<f64> {
    let mut v = vec_in(r, n, 1.0);
    let k = norm(&v).max(1e-12);
    let s = r.gen_range(0.0..=radius) / k;
    v.iter_mut().for_each(|x| *x *= s);
    v
}

pub fn random_bound(r: &mut impl Rng) -> ConvexBound<f64> {
    ConvexBound::new(r.gen_range(0.2..4.0), r.gen_range(0.01..1.0)).unwrap()
}

/// `L Lᵀ + c I` with `c ∈ [0.2, 2]`.
pub fn random_pd(r: &mut impl Rng, n: usize) -> DenseMatrix<f64> {
    let l = DenseMatrix::from_row_major(n, n, vec_in(r, n * n, 1.0)).unwrap();
    let mut g = l.matmul(&l.transpose()).unwrap();
    let c = r.gen_range(0.2..2.0);
    for i in 0..n {
        g[(i, i)] += c;
    }
    g.symmetrize()
}

/// `(θ - θ*)ᵀ (Proj(θ, y) - y)`.
pub fn lemma_vec(theta: &[f64], y: &[f64], star: &[f64], b: &ConvexBound<f64>) -> f64 {
    let p = proj_vec(theta, y, b).unwrap();
    let d: Vec<f64> = theta.iter().zip(star).map(|(a, s)| a - s).collect();
    let q: Vec<f64> = p.iter().zip(y).map(|(a, s)| a - s).collect();
    dot(&d, &q)
}

/// `trace((Θ - Θ*)ᵀ (Proj(Θ, Y) - Y))`.
pub fn lemma_mat(theta: &DenseMatrix<f64>, y: &DenseMatrix<f64>, star: &DenseMatrix<f64>, b: &ColumnBounds<f64>) -> f64 {
    let p = proj_mat(theta, y, b).unwrap();
    theta.try_sub(star).unwrap().inner(&p.try_sub(y).unwrap())
}

/// `(θ - θ*)ᵀ (Γ⁻¹ Proj_Γ(θ, y) - y)`.
pub fn lemma_gamma_vec(theta: &[f64], y: &[f64], star: &[f64], g: &LearningRate<f64>, b: &ConvexBound<f64>) -> f64 {
    let p = proj_gamma_vec(theta, y, g, b).unwrap();
    let gi = solve(g.matrix(), &p).unwrap();
    let d: Vec<f64> = theta.iter().zip(star).map(|(a, s)| a - s).collect();
    let q: Vec<f64> = gi.iter().zip(y).map(|(a, s)| a - s).collect();
    dot(&d, &q)
}

/// `trace((Θ - Θ*)ᵀ (Γ⁻¹ Proj_Γ(Θ, Y) - Y))`.
pub fn lemma_gamma_mat(
    theta: &DenseMatrix<f64>,
    y: &DenseMatrix<f64>,
    star: &DenseMatrix<f64>,
    g: &LearningRate<f64>,
    b: &ColumnBounds<f64>,
) -> f64 {
    let p = proj_gamma_mat(theta, y, g, b).unwrap();
    let mut gi = DenseMatrix::zeros(p.rows(), p.cols());
    for j in 0..p.cols() {
        gi.set_column(j, &solve(g.matrix(), &p.column(j)).unwrap());
    }
    theta.try_sub(star).unwrap().inner(&gi.try_sub(y).unwrap())
}

/// Explicit Euler on `θ̇ = Proj(θ, c(t) θ/‖θ‖)` with an always-outward
/// magnitude `c(t) = c0 (1 + 0.8 sin(ω t))`. Returns the largest `f` seen.
pub fn euler_outward(theta0: &[f64], b: &ConvexBound<f64>, c0: f64, omega: f64, dt: f64, steps: usize) -> f64 {
    let mut th = theta0.to_vec();
    let mut worst = boundary_fn(&th, b);
    for i in 0..steps {
        let t = i as f64 * dt;
        let n = norm(&th).max(1e-12);
        let c = c0 * (1.0 + 0.8 * (omega * t).sin());
        let y: Vec<f64> = th.iter().map(|x| c * x / n).collect();
        let p = proj_vec(&th, &y, b).unwrap();
        th.iter_mut().zip(&p).for_each(|(x, d)| *x += dt * d);
        worst = worst.max(boundary_fn(&th, b));
    }
    worst
}

pub fn matrix_in(r: &mut impl Rng, rows: usize, cols: usize, mag: f64) -> DenseMatrix<f64> {
    DenseMatrix::from_row_major(rows, cols, vec_in(r, rows * cols, mag)).unwrap()
}

/// Matrix whose columns lie in `Ω₀` of the matching bound.
pub fn matrix_in_balls(r: &mut impl Rng, rows: usize, b: &ColumnBounds<f64>) -> DenseMatrix<f64> {
    let mut m = DenseMatrix::zeros(rows, b.len());
    for (j, bj) in b.iter().enumerate() {
        m.set_column(j, &in_ball(r, rows, bj.theta_max()));
    }
    m
}

pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["gsmrac"];
    full.extend_from_slice(args);
    let st = gsmrac::cli::run_cli(full, &mut out, &mut err);
    (st.code(), String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

pub fn scenario(name: &str) -> String {
    gsmrac::fixtures::scenario_path(name).display().to_string()
}
