use crate::error::{Error, Result};
use crate::numerics::matrix::DenseMatrix;
use crate::scalar::Scalar;

/// Symmetric eigen-decomposition, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEig<T: Scalar> {
    pub eigenvalues: Vec<T>,
    /// Column `k` pairs with `eigenvalues[k]`.
    pub eigenvectors: DenseMatrix<T>,
}

impl<T: Scalar> SymEig<T> {
    pub fn min(&self) -> T {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> T {
        *self.eigenvalues.last().expect("nonempty spectrum")
    }

    /// `V diag(g(λ)) Vᵀ`.
    pub fn reconstruct_with(&self, g: impl Fn(T) -> T) -> DenseMatrix<T> {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mut out = DenseMatrix::zeros(n, n);
        for k in 0..n {
            let lk = g(self.eigenvalues[k]);
            if lk == T::zero() {
                continue;
            }
            for i in 0..n {
                let a = lk * v[(i, k)];
                for j in 0..n {
                    out[(i, j)] += a * v[(j, k)];
                }
            }
        }
        out
    }
}

const SYM_TOL: f64 = 1e-12;

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
///
/// Inputs whose asymmetry exceeds `1e-12` relative to their magnitude are
/// rejected; callers holding nearly-symmetric data should `symmetrize` first.
pub fn sym_eig<T: Scalar>(s: &DenseMatrix<T>) -> Result<SymEig<T>> {
    s.ensure_square("sym_eig")?;
    s.ensure_finite("sym_eig")?;
    let n = s.rows();
    let scale = s.max_abs().max(T::one());
    let asym_tol = if T::epsilon().as_f64() > 1e-10 {
        T::lit(1e-5)
    } else {
        T::lit(SYM_TOL)
    };
    if s.asymmetry() > asym_tol * scale {
        return Err(Error::Domain(format!(
            "sym_eig: input not symmetric (max asymmetry {:e})",
            s.asymmetry().as_f64()
        )));
    }
    let mut a = s.symmetrize();
    let mut v = DenseMatrix::identity(n);
    let eps = T::epsilon();

    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        let total = a.frobenius_norm();
        if off.sqrt() <= eps * total || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).expect("finite eigenvalues"));
    let eigenvalues = order.iter().map(|&i| a[(i, i)]).collect();
    let mut eigenvectors = DenseMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        eigenvectors.set_column(k, &v.column(i));
    }
    Ok(SymEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Largest eigenvalue of `(S + Sᵀ)/2` together with a unit eigenvector.
pub fn sym_max_eig<T: Scalar>(s: &DenseMatrix<T>) -> Result<(T, Vec<T>)> {
    let e = sym_eig(&s.symmetrize())?;
    let k = e.eigenvalues.len() - 1;
    Ok((e.eigenvalues[k], e.eigenvectors.column(k)))
}

/// Largest singular value.
pub fn spectral_norm<T: Scalar>(m: &DenseMatrix<T>) -> Result<T> {
    m.ensure_finite("spectral_norm")?;
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(T::zero());
    }
    let g = if m.cols() <= m.rows() {
        m.transpose().matmul(m)?
    } else {
        m.matmul(&m.transpose())?
    };
    let e = sym_eig(&g.symmetrize())?;
    Ok(e.max().max(T::zero()).sqrt())
}

/// `λ_max / λ_min` of a symmetric positive-definite matrix.
pub fn condition_number<T: Scalar>(s: &DenseMatrix<T>) -> Result<T> {
    let e = sym_eig(s)?;
    if e.min() <= T::zero() {
        return Err(Error::NotPositiveDefinite {
            lambda_min: e.min().as_f64(),
        });
    }
    Ok(e.max() / e.min())
}

/// Nearest positive-semidefinite matrix in Frobenius norm.
pub fn psd_project<T: Scalar>(s: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    let e = sym_eig(s)?;
    Ok(e.reconstruct_with(|l| l.max(T::zero())).symmetrize())
}

/// `λ_min` of a symmetric matrix, rejecting it as non-PD when `λ_min ≤ 0`.
pub fn ensure_positive_definite<T: Scalar>(s: &DenseMatrix<T>) -> Result<T> {
    let l = sym_eig(s)?.min();
    if l <= T::zero() {
        Err(Error::NotPositiveDefinite {
            lambda_min: l.as_f64(),
        })
    } else {
        Ok(l)
    }
}

/// Reduction to upper Hessenberg form by stabilized elementary similarity
/// transforms.
fn hessenberg<T: Scalar>(a: &mut DenseMatrix<T>) {
    let n = a.rows();
    if n < 3 {
        return;
    }
    for m in 1..n - 1 {
        let mut x = T::zero();
        let mut piv = m;
        for j in m..n {
            if a[(j, m - 1)].abs() > x.abs() {
                x = a[(j, m - 1)];
                piv = j;
            }
        }
        if piv != m {
            for j in (m - 1)..n {
                let t = a[(piv, j)];
                a[(piv, j)] = a[(m, j)];
                a[(m, j)] = t;
            }
            for j in 0..n {
                let t = a[(j, piv)];
                a[(j, piv)] = a[(j, m)];
                a[(j, m)] = t;
            }
        }
        if x != T::zero() {
            for i in (m + 1)..n {
                let mut y = a[(i, m - 1)];
                if y != T::zero() {
                    y /= x;
                    a[(i, m - 1)] = T::zero();
                    for j in m..n {
                        let amj = a[(m, j)];
                        a[(i, j)] -= y * amj;
                    }
                    for j in 0..n {
                        let aji = a[(j, i)];
                        a[(j, m)] += y * aji;
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..i.saturating_sub(1) {
            a[(i, j)] = T::zero();
        }
    }
}

fn sign<T: Scalar>(a: T, b: T) -> T {
    if b >= T::zero() {
        a.abs()
    } else {
        -a.abs()
    }
}

/// All eigenvalues `(re, im)` of a general real square matrix, via Hessenberg
/// reduction and the shifted double-step Francis QR iteration.
pub fn eigenvalues<T: Scalar>(m: &DenseMatrix<T>) -> Result<Vec<(T, T)>> {
    m.ensure_square("eigenvalues")?;
    m.ensure_finite("eigenvalues")?;
    let n = m.rows();
    let mut a = m.clone();
    hessenberg(&mut a);
    let mut w = vec![(T::zero(), T::zero()); n];
    let eps = T::epsilon();
    let mut anorm = T::zero();
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }
    let half = T::lit(0.5);
    let mut nn = n as isize - 1;
    let mut t = T::zero();
    let (mut p, mut q, mut r);
    let (mut x, mut y, mut z);
    while nn >= 0 {
        let mut its = 0;
        loop {
            let nu = nn as usize;
            let mut l = nu;
            while l > 0 {
                let mut s = a[(l - 1, l - 1)].abs() + a[(l, l)].abs();
                if s == T::zero() {
                    s = anorm;
                }
                if a[(l, l - 1)].abs() <= eps * s {
                    a[(l, l - 1)] = T::zero();
                    break;
                }
                l -= 1;
            }
            x = a[(nu, nu)];
            if l == nu {
                w[nu] = (x + t, T::zero());
                nn -= 1;
            } else {
                y = a[(nu - 1, nu - 1)];
                let ww = a[(nu, nu - 1)] * a[(nu - 1, nu)];
                if l == nu - 1 {
                    p = half * (y - x);
                    q = p * p + ww;
                    z = q.abs().sqrt();
                    x += t;
                    if q >= T::zero() {
                        z = p + sign(z, p);
                        w[nu - 1] = (x + z, T::zero());
                        w[nu] = (x + z, T::zero());
                        if z != T::zero() {
                            w[nu] = (x - ww / z, T::zero());
                        }
                    } else {
                        w[nu] = (x + p, -z);
                        w[nu - 1] = (x + p, z);
                    }
                    nn -= 2;
                } else {
                    if its == 60 {
                        return Err(Error::Domain(
                            "eigenvalues: QR iteration failed to converge".into(),
                        ));
                    }
                    let mut ww = ww;
                    if its == 10 || its == 20 {
                        t += x;
                        for i in 0..=nu {
                            a[(i, i)] -= x;
                        }
                        let s = a[(nu, nu - 1)].abs() + a[(nu - 1, nu - 2)].abs();
                        x = T::lit(0.75) * s;
                        y = x;
                        ww = T::lit(-0.4375) * s * s;
                    }
                    its += 1;
                    let mut mm = nu - 2;
                    loop {
                        z = a[(mm, mm)];
                        r = x - z;
                        let s = y - z;
                        p = (r * s - ww) / a[(mm + 1, mm)] + a[(mm, mm + 1)];
                        q = a[(mm + 1, mm + 1)] - z - r - s;
                        r = a[(mm + 2, mm + 1)];
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if mm == l {
                            break;
                        }
                        let u = a[(mm, mm - 1)].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[(mm - 1, mm - 1)].abs() + z.abs() + a[(mm + 1, mm + 1)].abs());
                        if u <= eps * v {
                            break;
                        }
                        mm -= 1;
                    }
                    for i in mm..nu - 1 {
                        a[(i + 2, i)] = T::zero();
                        if i != mm {
                            a[(i + 2, i - 1)] = T::zero();
                        }
                    }
                    let mut k = mm;
                    while k < nu {
                        if k != mm {
                            p = a[(k, k - 1)];
                            q = a[(k + 1, k - 1)];
                            r = T::zero();
                            if k + 1 != nu {
                                r = a[(k + 2, k - 1)];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != T::zero() {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = sign((p * p + q * q + r * r).sqrt(), p);
                        if s != T::zero() {
                            if k == mm {
                                if l != mm {
                                    a[(k, k - 1)] = -a[(k, k - 1)];
                                }
                            } else {
                                a[(k, k - 1)] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nu {
                                p = a[(k, j)] + q * a[(k + 1, j)];
                                if k + 1 != nu {
                                    p += r * a[(k + 2, j)];
                                    a[(k + 2, j)] -= p * z;
                                }
                                a[(k + 1, j)] -= p * y;
                                a[(k, j)] -= p * x;
                            }
                            let mmin = if nu < k + 3 { nu } else { k + 3 };
                            for i in l..=mmin {
                                p = x * a[(i, k)] + y * a[(i, k + 1)];
                                if k + 1 != nu {
                                    p += z * a[(i, k + 2)];
                                    a[(i, k + 2)] -= p * r;
                                }
                                a[(i, k + 1)] -= p * q;
                                a[(i, k)] -= p;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if nn < 1 || l + 1 >= nn as usize {
                break;
            }
        }
    }
    Ok(w)
}

/// Largest real part over the spectrum; negative iff the matrix is Hurwitz.
pub fn max_real_part<T: Scalar>(m: &DenseMatrix<T>) -> Result<T> {
    Ok(eigenvalues(m)?
        .into_iter()
        .fold(T::neg_infinity(), |acc, (re, _)| acc.max(re)))
}


#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix<f64> {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn sym_eig_small_cases() {
        let e = sym_eig(&DenseMatrix::diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 2.0, 3.0]);
        assert_eq!(e.eigenvectors.column(0), vec![0.0, 1.0, 0.0]);
        let e = sym_eig(&DenseMatrix::<f64>::identity(4)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0; 4]);
        let e = sym_eig(&m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-15);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-15);
        assert!(sym_eig(&DenseMatrix::<f64>::zeros(2, 3)).is_err());
        assert!(sym_eig(&m(&[&[0.0, 1.0], &[0.0, 0.0]])).is_err());
    }

    #[test]
    fn norms_and_conditioning() {
        assert!((spectral_norm(&DenseMatrix::<f64>::identity(3)).unwrap() - 1.0).abs() < 1e-15);
        assert!((spectral_norm(&DenseMatrix::<f64>::diag(&[2.0, -5.0])).unwrap() - 5.0).abs() < 1e-14);
        assert!((spectral_norm(&DenseMatrix::<f64>::column_vector(&[3.0, 4.0])).unwrap() - 5.0).abs() < 1e-14);
        assert!((condition_number(&DenseMatrix::<f64>::diag(&[2.0, 1.0])).unwrap() - 2.0).abs() < 1e-15);
        assert!((condition_number(&DenseMatrix::<f64>::identity(6)).unwrap() - 1.0).abs() < 1e-15);
        match condition_number(&DenseMatrix::diag(&[1.0, -0.5])) {
            Err(Error::NotPositiveDefinite { lambda_min }) => assert_eq!(lambda_min, -0.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn psd_projection_cases() {
        let p = psd_project(&DenseMatrix::diag(&[1.0, -1.0])).unwrap();
        assert!((&p - &DenseMatrix::diag(&[1.0, 0.0])).max_abs() < 1e-15);
        let p = psd_project(&m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!((&p - &m(&[&[0.5, 0.5], &[0.5, 0.5]])).max_abs() < 1e-15);
        let s = m(&[&[2.0, 0.5], &[0.5, 1.0]]);
        assert!((&psd_project(&s).unwrap() - &s).max_abs() < 1e-14);
    }

    #[test]
    fn general_eigenvalues() {
        let a = m(&[&[-1.7, 0.1], &[0.6, -1.1]]);
        let mut w = eigenvalues(&a).unwrap();
        w.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        assert!((w[0].0 + 1.787_298_334_620_741_7).abs() < 1e-12);
        assert!((w[1].0 + 1.012_701_665_379_258_3).abs() < 1e-12);
        assert!((max_real_part(&(-&DenseMatrix::<f64>::identity(3))).unwrap() + 1.0).abs() < 1e-14);
        let rot = m(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let w = eigenvalues(&rot).unwrap();
        assert!(w.iter().all(|&(re, im)| re.abs() < 1e-14 && (im.abs() - 1.0).abs() < 1e-14));

        // companion matrix of (x-1)(x-2)(x-3)(x+4)(x^2+1)
        let c = m(&[
            &[2.0, 12.0, -36.0, 37.0, -38.0, 24.0],
            &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        ]);
        let mut w = eigenvalues(&c).unwrap();
        w.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.partial_cmp(&y.1).unwrap()));
        let expect = [(-4.0, 0.0), (0.0, -1.0), (0.0, 1.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)];
        for (got, want) in w.iter().zip(expect) {
            assert!((got.0 - want.0).abs() < 1e-8 && (got.1 - want.1).abs() < 1e-8, "{w:?}");
        }
    }

    #[test]
    fn f32_path() {
        let e = sym_eig(&DenseMatrix::<f32>::diag(&[2.0, 1.0])).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0f32, 2.0]);
        let w = max_real_part(&DenseMatrix::<f32>::from_rows(&[[-1.7f32, 0.1], [0.6, -1.1]]).unwrap()).unwrap();
        assert!((w + 1.0127).abs() < 1e-4);
    }
}
