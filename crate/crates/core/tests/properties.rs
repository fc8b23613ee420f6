mod common;

use common::*;
use gsmrac::numerics::{norm, psd_project, sym_eig, DenseMatrix};
use gsmrac::projection::{boundary_fn, boundary_grad, proj_vec, ColumnBounds, ConvexBound, LearningRate};
use gsmrac::saturation::{decompose, deficiency, sat, SatLimits};
use proptest::prelude::*;
use rand::Rng;

const TOL: f64 = 1e-12;

fn bound() -> impl Strategy<Value = ConvexBound<f64>> {
    (0.2f64..4.0, 0.01f64..1.0).prop_map(|(m, e)| ConvexBound::new(m, e).unwrap())
}

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x5eed),
        ..ProptestConfig::default()
    }
}

fn seed() -> impl Strategy<Value = u64> {
    any::<u64>()
}

proptest! {
    #![proptest_config(cfg(2_000))]

    #[test]
    fn vector_projection_never_helps_the_error(n in 1usize..7, s in seed(), b in bound(), spread in 0.5f64..3.0) {
        let mut r = rng(s);
        let theta = vec_in(&mut r, n, spread * b.theta_max());
        let y = vec_in(&mut r, n, 10.0);
        let star = in_ball(&mut r, n, b.theta_max());
        prop_assert!(lemma_vec(&theta, &y, &star, &b) <= TOL);
    }

    #[test]
    fn matrix_projection_never_helps_the_error(n in 1usize..6, m in 1usize..4, s in seed()) {
        let mut r = rng(s);
        let bs = ColumnBounds::new((0..m).map(|_| random_bound(&mut r)).collect());
        let theta = matrix_in(&mut r, n, m, 5.0);
        let y = matrix_in(&mut r, n, m, 10.0);
        let star = matrix_in_balls(&mut r, n, &bs);
        prop_assert!(lemma_mat(&theta, &y, &star, &bs) <= TOL);
    }

    #[test]
    fn weighted_projection_never_helps_the_error(n in 1usize..5, s in seed(), b in bound()) {
        let mut r = rng(s);
        let g = LearningRate::new(random_pd(&mut r, n)).unwrap();
        let theta = vec_in(&mut r, n, 2.0 * b.theta_max());
        let y = vec_in(&mut r, n, 10.0);
        let star = in_ball(&mut r, n, b.theta_max());
        prop_assert!(lemma_gamma_vec(&theta, &y, &star, &g, &b) <= TOL);
    }

    #[test]
    fn weighted_matrix_projection_never_helps_the_error(n in 1usize..5, m in 1usize..4, s in seed()) {
        let mut r = rng(s);
        let g = LearningRate::new(random_pd(&mut r, n)).unwrap();
        let bs = ColumnBounds::new((0..m).map(|_| random_bound(&mut r)).collect());
        let theta = matrix_in(&mut r, n, m, 5.0);
        let y = matrix_in(&mut r, n, m, 10.0);
        let star = matrix_in_balls(&mut r, n, &bs);
        prop_assert!(lemma_gamma_mat(&theta, &y, &star, &g, &bs) <= TOL);
    }

    #[test]
    fn scalar_gain_matches_scaled_projection(n in 1usize..6, s in seed(), b in bound(), gain in 0.1f64..100.0) {
        let mut r = rng(s);
        let theta = vec_in(&mut r, n, 2.0 * b.theta_max());
        let y = vec_in(&mut r, n, 10.0);
        let g = LearningRate::scalar(gain, n).unwrap();
        let lhs = gsmrac::projection::proj_gamma_vec(&theta, &y, &g, &b).unwrap();
        let rhs = proj_vec(&theta, &y, &b).unwrap();
        let scale = gain * norm(&y) * (1.0 + boundary_fn(&theta, &b).abs());
        for (a, c) in lhs.iter().zip(&rhs) {
            prop_assert!((a - gain * c).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn gradient_matches_central_difference(n in 1usize..6, s in seed(), b in bound()) {
        let mut r = rng(s);
        let theta = vec_in(&mut r, n, 2.0 * b.theta_max());
        let g = boundary_grad(&theta, &b);
        let h = 1e-6;
        for i in 0..n {
            let mut p = theta.clone();
            let mut m = theta.clone();
            p[i] += h;
            m[i] -= h;
            let fd = (boundary_fn(&p, &b) - boundary_fn(&m, &b)) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + g[i].abs()));
        }
    }

    #[test]
    fn projection_is_continuous_at_the_boundary(n in 1usize..6, s in seed(), b in bound()) {
        let mut r = rng(s);
        let dir = in_ball(&mut r, n, 1.0);
        prop_assume!(norm(&dir) > 1e-3);
        let k = b.theta_max() * (1.0 + 1e-10) / norm(&dir);
        let theta: Vec<f64> = dir.iter().map(|d| d * k).collect();
        let y = vec_in(&mut r, n, 10.0);
        let f = boundary_fn(&theta, &b);
        prop_assert!(f > 0.0 && f < 1e-7);
        let p = proj_vec(&theta, &y, &b).unwrap();
        let gap: Vec<f64> = p.iter().zip(&y).map(|(a, c)| a - c).collect();
        prop_assert!(norm(&gap) <= f * norm(&y) * (1.0 + 1e-9) + 1e-15);
    }

    #[test]
    fn sym_eig_reconstructs(n in 1usize..8, s in seed()) {
        let mut r = rng(s);
        let a = matrix_in(&mut r, n, n, 3.0).symmetrize();
        let e = sym_eig(&a).unwrap();
        let back = e.reconstruct_with(|l| l);
        prop_assert!(back.try_sub(&a).unwrap().max_abs() <= 1e-11);
        prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let vtv = e.eigenvectors.transpose().matmul(&e.eigenvectors).unwrap();
        prop_assert!(vtv.try_sub(&DenseMatrix::identity(n)).unwrap().max_abs() <= 1e-11);
    }

    #[test]
    fn psd_projection_is_psd_and_idempotent(n in 1usize..7, s in seed()) {
        let mut r = rng(s);
        let a = matrix_in(&mut r, n, n, 3.0).symmetrize();
        let p = psd_project(&a).unwrap();
        prop_assert!(sym_eig(&p).unwrap().min() >= -1e-11);
        let pp = psd_project(&p).unwrap();
        prop_assert!(pp.try_sub(&p).unwrap().max_abs() <= 1e-10);
        let b = random_pd(&mut r, n);
        let q = psd_project(&b).unwrap();
        prop_assert!(q.try_sub(&b).unwrap().max_abs() <= 1e-10);
    }

    #[test]
    fn saturation_properties(m in 1usize..5, s in seed()) {
        let mut r = rng(s);
        let lim = SatLimits::new((0..m).map(|_| r.gen_range(0.05..0.6)).collect()).unwrap();
        let v = vec_in(&mut r, m, 2.0);
        let sv = sat(&v, &lim).unwrap();
        prop_assert_eq!(sat(&sv, &lim).unwrap(), sv.clone());
        for (x, l) in sv.iter().zip(lim.limits()) {
            prop_assert!(x.abs() <= *l);
        }
        let dv = deficiency(&v, &lim).unwrap();
        for i in 0..m {
            prop_assert_eq!(dv[i], v[i] - sv[i]);
        }
        let (vd, vt) = decompose(&v, &lim).unwrap();
        for i in 0..m {
            prop_assert!((vd[i] + vt[i] - sv[i]).abs() <= 1e-12);
            prop_assert!(vd[i].abs() <= lim.limits()[i] * (1.0 + 1e-12));
        }
        let (nv, nd) = (norm(&v), norm(&vd));
        prop_assume!(nv > 1e-9);
        let k = nd / nv;
        prop_assert!(k > 0.0 && k <= 1.0 + 1e-12);
        for i in 0..m {
            prop_assert!((vd[i] - k * v[i]).abs() <= 1e-12);
        }
        prop_assert!(norm(&vt) <= lim.v0() + 1e-12);
    }
}

proptest! {
    #![proptest_config(cfg(24))]

    #[test]
    fn euler_flow_stays_in_the_level_set(n in 1usize..5, s in seed(), m in 0.3f64..3.0, eps in 0.05f64..1.0, c0 in 0.5f64..5.0, omega in 0.1f64..10.0) {
        let b = ConvexBound::new(m, eps).unwrap();
        let mut r = rng(s);
        let theta0 = in_ball(&mut r, n, b.radius(1.0));
        prop_assume!(norm(&theta0) > 1e-6);
        let worst = euler_outward(&theta0, &b, c0, omega, 1e-3, 100_000);
        prop_assert!(worst <= 1.0 + 1e-6, "f reached {worst}");
    }
}
