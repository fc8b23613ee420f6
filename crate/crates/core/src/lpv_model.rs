//! Linear parameter-varying plant families with filtered inputs and leaky
//! integral control.
//!
//! The augmented state is `x = [x_p (n); u (m); x_c (m)]` with
//!
//! ```text
//! A(α) = [[A_p, B_p, 0], [0, -η_c I, 0], [I, 0, -ε_c I]]   B = [0; η_c I; 0]   B_r = [0; 0; -I]
//! ```
//!
//! and the nominal gain `Kᵀ(α) = [0, 0, K_iᵀ(α)]`, so that
//! `A_m(α) = A(α) + B Kᵀ(α)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::numerics::{max_real_part, norm, spectral_norm, DenseMatrix, MatrixTable};
use crate::scalar::Scalar;

/// Tolerance on `α_e = ‖x_e‖` for loaded points; published data is rounded to
/// four decimals.
pub const ALPHA_CONSISTENCY_TOL: f64 = 5e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EquilibriumPoint<T: Scalar> {
    pub alpha: T,
    pub x_e: Vec<T>,
    pub u_e: Vec<T>,
    #[serde(rename = "A_p")]
    pub a_p: DenseMatrix<T>,
    #[serde(rename = "B_p")]
    pub b_p: DenseMatrix<T>,
    #[serde(rename = "K_i")]
    pub k_i: DenseMatrix<T>,
    /// Steady thrust, carried for reference only.
    #[serde(rename = "T_e", default, skip_serializing_if = "Option::is_none")]
    pub thrust: Option<T>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct FamilyDoc<T: Scalar> {
    eta_c: T,
    eps_c: T,
    points: Vec<EquilibriumPoint<T>>,
}

pub fn scheduling<T: Scalar>(x_p: &[T]) -> T {
    norm(x_p)
}

/// Largest real part of the spectrum; negative iff `a` is Hurwitz.
pub fn hurwitz_margin<T: Scalar>(a: &DenseMatrix<T>) -> Result<T> {
    max_real_part(a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantFamily<T: Scalar> {
    points: Vec<EquilibriumPoint<T>>,
    eta_c: T,
    eps_c: T,
    n: usize,
    m: usize,
    a_p: MatrixTable<T>,
    b_p: MatrixTable<T>,
    k_i: MatrixTable<T>,
    x_e: MatrixTable<T>,
}

impl<T: Scalar> PlantFamily<T> {
    pub fn new(points: Vec<EquilibriumPoint<T>>, eta_c: T, eps_c: T) -> Result<Self> {
        Self::build(points, eta_c, eps_c, true)
    }

    /// Sub-channel families keep the global scheduling value, which is not
    /// the norm of the channel's own steady state, so the check is skipped.
    fn build(mut points: Vec<EquilibriumPoint<T>>, eta_c: T, eps_c: T, check_alpha: bool) -> Result<Self> {
        if !(eta_c > T::zero() && eps_c > T::zero()) {
            return Err(Error::Domain("eta_c and eps_c must be positive".into()));
        }
        if points.is_empty() {
            return Err(Error::Data("plant family needs at least one equilibrium point".into()));
        }
        points.sort_by(|a, b| a.alpha.partial_cmp(&b.alpha).unwrap_or(std::cmp::Ordering::Equal));
        if points.windows(2).any(|w| w[1].alpha <= w[0].alpha) {
            return Err(Error::Data("equilibrium alphas must be distinct".into()));
        }
        let n = points[0].a_p.rows();
        let m = points[0].b_p.cols();
        if n != m {
            return Err(dim_err("PlantFamily::new", "as many inputs as plant states", format!("n={n}, m={m}")));
        }
        for (i, p) in points.iter().enumerate() {
            let shape_ok = p.a_p.shape() == (n, n)
                && p.b_p.shape() == (n, m)
                && p.k_i.shape() == (m, m)
                && p.x_e.len() == n
                && p.u_e.len() == m;
            if !shape_ok {
                return Err(dim_err(
                    "PlantFamily::new",
                    format!("A_p {n}x{n}, B_p {n}x{m}, K_i {m}x{m}, x_e {n}, u_e {m}"),
                    format!("point {i} inconsistent"),
                ));
            }
            if !p.alpha.is_finite() || p.x_e.iter().chain(&p.u_e).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { op: "PlantFamily::new" });
            }
            let gap = (scheduling(&p.x_e) - p.alpha).abs();
            if check_alpha && gap > T::lit(ALPHA_CONSISTENCY_TOL) {
                return Err(Error::Data(format!(
                    "point {i}: alpha {} differs from |x_e| = {} by {:e}",
                    p.alpha,
                    scheduling(&p.x_e),
                    gap.as_f64()
                )));
            }
            let h = hurwitz_margin(&p.a_p)?;
            if h >= T::zero() {
                return Err(Error::Data(format!(
                    "point {i}: plant matrix A_p is not Hurwitz (max real part {h})"
                )));
            }
        }
        let knots: Vec<T> = points.iter().map(|p| p.alpha).collect();
        let a_p = MatrixTable::new(knots.clone(), points.iter().map(|p| p.a_p.clone()).collect())?;
        let b_p = MatrixTable::new(knots.clone(), points.iter().map(|p| p.b_p.clone()).collect())?;
        let k_i = MatrixTable::new(knots.clone(), points.iter().map(|p| p.k_i.clone()).collect())?;
        let x_e = MatrixTable::new(
            knots,
            points.iter().map(|p| DenseMatrix::column_vector(&p.x_e)).collect(),
        )?;
        Ok(Self {
            points,
            eta_c,
            eps_c,
            n,
            m,
            a_p,
            b_p,
            k_i,
            x_e,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: FamilyDoc<T> = serde_json::from_str(s).map_err(|e| Error::Json {
            context: "plant family".into(),
            source: e,
        })?;
        Self::new(doc.points, doc.eta_c, doc.eps_c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json_str(&s)
    }

    pub fn to_json(&self) -> String {
        let doc = FamilyDoc {
            eta_c: self.eta_c,
            eps_c: self.eps_c,
            points: self.points.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("family serializes")
    }

    pub fn points(&self) -> &[EquilibriumPoint<T>] {
        &self.points
    }

    pub fn eta_c(&self) -> T {
        self.eta_c
    }

    pub fn eps_c(&self) -> T {
        self.eps_c
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn state_dim(&self) -> usize {
        self.n + 2 * self.m
    }

    pub fn alpha_range(&self) -> (T, T) {
        (self.points[0].alpha, self.points[self.points.len() - 1].alpha)
    }

    /// `n` uniform samples spanning the equilibrium range.
    pub fn alpha_grid(&self, count: usize) -> Vec<T> {
        let (lo, hi) = self.alpha_range();
        uniform_grid(lo, hi, count)
    }

    pub fn interp_plant(&self, alpha: T) -> (DenseMatrix<T>, DenseMatrix<T>) {
        (self.a_p.interp(alpha), self.b_p.interp(alpha))
    }

    pub fn interp_ki(&self, alpha: T) -> DenseMatrix<T> {
        self.k_i.interp(alpha)
    }

    /// Plant steady state `x_e(α)` on the equilibrium manifold.
    pub fn equilibrium_output(&self, alpha: T) -> Vec<T> {
        self.x_e.interp(alpha).column(0)
    }

    pub fn input_matrix(&self) -> DenseMatrix<T> {
        let mut b = DenseMatrix::zeros(self.state_dim(), self.m);
        for i in 0..self.m {
            b[(self.n + i, i)] = self.eta_c;
        }
        b
    }

    pub fn command_matrix(&self) -> DenseMatrix<T> {
        let mut br = DenseMatrix::zeros(self.state_dim(), self.m);
        for i in 0..self.m {
            br[(self.n + self.m + i, i)] = -T::one();
        }
        br
    }

    fn assemble(&self, a_p: &DenseMatrix<T>, b_p: &DenseMatrix<T>, k_i: Option<&DenseMatrix<T>>) -> DenseMatrix<T> {
        let (n, m) = (self.n, self.m);
        let mut a = DenseMatrix::zeros(n + 2 * m, n + 2 * m);
        a.set_block(0, 0, a_p);
        a.set_block(0, n, b_p);
        for i in 0..m {
            a[(n + i, n + i)] = -self.eta_c;
            a[(n + m + i, n + m + i)] = -self.eps_c;
        }
        for i in 0..m {
            a[(n + m + i, i)] = T::one();
        }
        if let Some(k) = k_i {
            a.set_block(n, n + m, &k.transpose().scale(self.eta_c));
        }
        a
    }

    /// `(A(α), B, B_r)`.
    pub fn plant_matrices(&self, alpha: T) -> (DenseMatrix<T>, DenseMatrix<T>, DenseMatrix<T>) {
        let (a_p, b_p) = self.interp_plant(alpha);
        (self.assemble(&a_p, &b_p, None), self.input_matrix(), self.command_matrix())
    }

    /// `A(α)` with the off-diagonal entries of `A_p` scaled by `1 + δ_A` and
    /// `B_p` scaled by `1 − δ_B`.
    pub fn degraded_plant_matrix(&self, alpha: T, delta_a: T, delta_b: T) -> DenseMatrix<T> {
        let (mut a_p, b_p) = self.interp_plant(alpha);
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    a_p[(i, j)] *= T::one() + delta_a;
                }
            }
        }
        self.assemble(&a_p, &b_p.scale(T::one() - delta_b), None)
    }

    /// Nominal gain `K(α)`, `(n+2m)×m`, nonzero only in the last `m` rows.
    pub fn gain_schedule(&self, alpha: T) -> DenseMatrix<T> {
        let mut k = DenseMatrix::zeros(self.state_dim(), self.m);
        k.set_block(self.n + self.m, 0, &self.interp_ki(alpha));
        k
    }

    /// Closed-loop reference matrix `A_m(α)`.
    pub fn reference_matrix(&self, alpha: T) -> DenseMatrix<T> {
        let (a_p, b_p) = self.interp_plant(alpha);
        let k_i = self.interp_ki(alpha);
        self.assemble(&a_p, &b_p, Some(&k_i))
    }

    /// Steady state of `ẋ = A_m(‖x_p‖)x + B_r r`, found by fixed-point iteration
    /// on the scheduling value.
    pub fn reference_equilibrium(&self, r: &[T]) -> Result<Vec<T>> {
        let br = self.command_matrix();
        let rhs: Vec<T> = br.matvec(r)?.into_iter().map(|v| -v).collect();
        let mut alpha = scheduling(r);
        let mut x = vec![T::zero(); self.state_dim()];
        for _ in 0..200 {
            x = solve(&self.reference_matrix(alpha), &rhs)?;
            let next = scheduling(&x[..self.n]);
            if (next - alpha).abs() <= T::epsilon() * T::lit(16.0) * (T::one() + alpha.abs()) {
                break;
            }
            alpha = next;
        }
        Ok(x)
    }
}

pub fn uniform_grid<T: Scalar>(lo: T, hi: T, count: usize) -> Vec<T> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / T::from_usize_lossy(count - 1);
            (0..count)
                .map(|i| if i == count - 1 { hi } else { lo + step * T::from_usize_lossy(i) })
                .collect()
        }
    }
}

/// Gaussian elimination with partial pivoting.
pub fn solve<T: Scalar>(a: &DenseMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    a.ensure_square("solve")?;
    let n = a.rows();
    if b.len() != n {
        return Err(dim_err("solve", n, b.len()));
    }
    let mut m = a.clone();
    let mut x = b.to_vec();
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&i, &j| m[(i, c)].abs().partial_cmp(&m[(j, c)].abs()).expect("finite"))
            .expect("nonempty");
        if m[(piv, c)].abs() <= T::epsilon() * m.max_abs() {
            return Err(Error::Domain("solve: singular matrix".into()));
        }
        if piv != c {
            for j in 0..n {
                let t = m[(c, j)];
                m[(c, j)] = m[(piv, j)];
                m[(piv, j)] = t;
            }
            x.swap(c, piv);
        }
        for i in (c + 1)..n {
            let f = m[(i, c)] / m[(c, c)];
            if f == T::zero() {
                continue;
            }
            for j in c..n {
                let v = m[(c, j)];
                m[(i, j)] -= f * v;
            }
            let xc = x[c];
            x[i] -= f * xc;
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in (i + 1)..n {
            s -= m[(i, j)] * x[j];
        }
        x[i] = s / m[(i, i)];
    }
    Ok(x)
}

/// Max of `‖A_m(α)‖₂` over the grid.
pub fn norm_bound_ka<T: Scalar>(fam: &PlantFamily<T>, grid: &[T]) -> Result<T> {
    if grid.is_empty() {
        return Err(Error::Domain("norm bound needs a nonempty alpha grid".into()));
    }
    let mut best = T::zero();
    for &a in grid {
        best = best.max(spectral_norm(&fam.reference_matrix(a))?);
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Coupling<T: Scalar> {
    /// Receiving subsystem.
    pub to: usize,
    /// Source subsystem.
    pub from: usize,
    /// Interconnection gain `c_kq`.
    pub c: T,
    /// Explicit `A_kq(α)` on augmented states; defaults to `c` on the
    /// first plant-state entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixTable<T>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct SubsystemDoc<T: Scalar> {
    names: Vec<String>,
    eta_c: T,
    eps_c: T,
    subsystems: Vec<Vec<EquilibriumPoint<T>>>,
    #[serde(default)]
    couplings: Vec<Coupling<T>>,
}

/// Interconnected single-input subsystems sharing one scheduling variable.
#[derive(Debug, Clone)]
pub struct SubsystemFamily<T: Scalar> {
    names: Vec<String>,
    families: Vec<PlantFamily<T>>,
    couplings: Vec<Coupling<T>>,
    coupling_tables: Vec<MatrixTable<T>>,
}

impl<T: Scalar> SubsystemFamily<T> {
    pub fn new(names: Vec<String>, families: Vec<PlantFamily<T>>, couplings: Vec<Coupling<T>>) -> Result<Self> {
        if families.is_empty() || names.len() != families.len() {
            return Err(Error::Data("subsystem family needs one name per subsystem".into()));
        }
        let mut tables = Vec::with_capacity(couplings.len());
        for c in &couplings {
            if c.to >= families.len() || c.from >= families.len() || c.to == c.from {
                return Err(Error::Data(format!("bad coupling {} <- {}", c.to, c.from)));
            }
            if !(c.c >= T::zero()) {
                return Err(Error::Domain("coupling gains must be nonnegative".into()));
            }
            let shape = (families[c.to].state_dim(), families[c.from].state_dim());
            let table = match &c.matrix {
                Some(t) => {
                    if t.shape() != shape {
                        return Err(dim_err("coupling", format!("{shape:?}"), format!("{:?}", t.shape())));
                    }
                    t.clone()
                }
                None => {
                    let mut e = DenseMatrix::zeros(shape.0, shape.1);
                    e[(0, 0)] = c.c;
                    MatrixTable::constant(e)
                }
            };
            tables.push(table);
        }
        Ok(Self {
            names,
            families,
            couplings,
            coupling_tables: tables,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: SubsystemDoc<T> = serde_json::from_str(s).map_err(|e| Error::Json {
            context: "subsystem family".into(),
            source: e,
        })?;
        let families = doc
            .subsystems
            .into_iter()
            .map(|pts| PlantFamily::build(pts, doc.eta_c, doc.eps_c, false))
            .collect::<Result<Vec<_>>>()?;
        Self::new(doc.names, families, doc.couplings)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json_str(&s)
    }

    /// Splits a square MIMO family into SISO loops on its diagonal channels,
    /// coupled symmetrically with gain `c`.
    pub fn diagonal_from(fam: &PlantFamily<T>, names: Vec<String>, c: T) -> Result<Self> {
        if fam.n() != fam.m() || names.len() != fam.n() {
            return Err(Error::Data("diagonal split needs n == m and one name per channel".into()));
        }
        let mut families = Vec::new();
        for k in 0..fam.n() {
            let pts = fam
                .points()
                .iter()
                .map(|p| EquilibriumPoint {
                    alpha: p.alpha,
                    x_e: vec![p.x_e[k]],
                    u_e: vec![p.u_e[k]],
                    a_p: DenseMatrix::diag(&[p.a_p[(k, k)]]),
                    b_p: DenseMatrix::diag(&[p.b_p[(k, k)]]),
                    k_i: DenseMatrix::diag(&[p.k_i[(k, k)]]),
                    thrust: None,
                })
                .collect::<Vec<_>>();
            families.push(PlantFamily::build(pts, fam.eta_c(), fam.eps_c(), false)?);
        }
        let mut couplings = Vec::new();
        for k in 0..fam.n() {
            for q in 0..fam.n() {
                if k != q {
                    couplings.push(Coupling {
                        to: k,
                        from: q,
                        c,
                        matrix: None,
                    });
                }
            }
        }
        Self::new(names, families, couplings)
    }

    pub fn len(&self) -> usize {
        self.families.len()
    }

    pub fn is_empty(&self) -> bool {
        self.families.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn family(&self, k: usize) -> Result<&PlantFamily<T>> {
        self.families
            .get(k)
            .ok_or_else(|| Error::Domain(format!("subsystem index {k} out of range (have {})", self.families.len())))
    }

    pub fn couplings(&self) -> &[Coupling<T>] {
        &self.couplings
    }

    /// `A_kq(α)` for each declared coupling, in declaration order.
    pub fn coupling_matrices(&self, alpha: T) -> Vec<(usize, usize, DenseMatrix<T>)> {
        self.couplings
            .iter()
            .zip(&self.coupling_tables)
            .map(|(c, t)| (c.to, c.from, t.interp(alpha)))
            .collect()
    }

    /// `c_kq` matrix, zero where no coupling is declared.
    pub fn coupling_gains(&self) -> DenseMatrix<T> {
        let n = self.len();
        let mut c = DenseMatrix::zeros(n, n);
        for cp in &self.couplings {
            c[(cp.to, cp.from)] += cp.c;
        }
        c
    }

    /// Worst ratio `max_α ‖A_kq(α)‖ / c_kq` over declared couplings; `≤ 1`
    /// means every declared gain bounds its coupling matrix.
    pub fn coupling_bound_ratio(&self, grid: &[T]) -> Result<T> {
        let mut worst = T::zero();
        for (c, t) in self.couplings.iter().zip(&self.coupling_tables) {
            for &a in grid {
                let nrm = spectral_norm(&t.interp(a))?;
                let ratio = if c.c > T::zero() {
                    nrm / c.c
                } else if nrm > T::zero() {
                    T::infinity()
                } else {
                    T::zero()
                };
                worst = worst.max(ratio);
            }
        }
        Ok(worst)
    }

    pub fn subsystem_reference(&self, k: usize, alpha: T) -> Result<DenseMatrix<T>> {
        Ok(self.family(k)?.reference_matrix(alpha))
    }

    pub fn alpha_range(&self) -> (T, T) {
        self.families[0].alpha_range()
    }
}
