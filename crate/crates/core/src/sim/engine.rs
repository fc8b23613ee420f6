use crate::error::{dim_err, Error, Result};
use crate::lpv_model::{scheduling, solve, PlantFamily, SubsystemFamily};
use crate::lyapunov::{certified_level, VertexSet};
use crate::mrac::{adapt_decentralized, adapt_with_pb, control_basic, control_decentralized, step_constrained, AdaptiveState, ConstrainedAdaptiveState};
use crate::numerics::{ensure_positive_definite, norm, sub_vec, DenseMatrix};
use crate::projection::{boundary_fn, clamp_to_level, ColumnBounds, LearningRate};
use crate::saturation::{sat, SatLimits};
use crate::scalar::Scalar;
use crate::sim::integrate::rk4_step;
use crate::sim::scenario::{CommandProfile, ControllerConfig, Scenario, Variant};
use crate::sim::trace::{SimTrace, TraceLayout};

/// States whose norm exceeds this are treated as divergent.
pub const DIVERGENCE_NORM: f64 = 1e6;
/// Level enforced on every adaptive column after each step.
pub const CLAMP_LEVEL: f64 = 1.0 + 1e-9;
const CERT_GRID: usize = 33;

/// Controller data shared by every variant for one loop.
#[derive(Debug, Clone)]
pub struct LoopSetup<T: Scalar> {
    pub p: DenseMatrix<T>,
    pub q: DenseMatrix<T>,
    /// Largest isotropic decay level `P` certifies on the reference family.
    pub q_certified: T,
    pub pb: DenseMatrix<T>,
    pub b: DenseMatrix<T>,
    pub b_r: DenseMatrix<T>,
    pub initial: AdaptiveState<T>,
    pub rate_safety: T,
}

#[derive(Debug, Clone)]
pub struct MimoSetup<T: Scalar> {
    pub family: PlantFamily<T>,
    pub ctl: LoopSetup<T>,
    /// Present for the constrained variant.
    pub constrained: Option<ConstrainedAdaptiveState<T>>,
    pub lim: SatLimits<T>,
}

#[derive(Debug, Clone)]
pub struct DecentralizedSetup<T: Scalar> {
    pub family: SubsystemFamily<T>,
    pub loops: Vec<LoopSetup<T>>,
}

#[derive(Debug, Clone)]
pub enum Setup<T: Scalar> {
    Mimo(MimoSetup<T>),
    Decentralized(DecentralizedSetup<T>),
}

/// A scenario with every file and default resolved.
#[derive(Debug, Clone)]
pub struct Prepared<T: Scalar> {
    pub scenario: Scenario<T>,
    pub setup: Setup<T>,
    pub profile: CommandProfile<T>,
    pub x0: Vec<T>,
}

fn check_alpha<T: Scalar>(s: &Scenario<T>, range: (T, T)) -> Result<()> {
    let tol = T::lit(1e-12);
    for k in &s.profile {
        if !(k.alpha >= range.0 - tol && k.alpha <= range.1 + tol) {
            return Err(Error::Domain(format!(
                "profile target alpha = {} outside the family range [{}, {}]",
                k.alpha, range.0, range.1
            )));
        }
    }
    Ok(())
}

fn loop_setup<T: Scalar>(c: &ControllerConfig<T>, fam: &PlantFamily<T>, alpha0: T, s: &Scenario<T>) -> Result<LoopSetup<T>> {
    let nx = fam.state_dim();
    let base = &s.base_dir;
    let p = c.p.resolve(nx, base)?;
    if p.asymmetry() > T::lit(1e-9) * p.max_abs().max(T::one()) {
        return Err(Error::Domain("P must be symmetric".into()));
    }
    let p = p.symmetrize();
    ensure_positive_definite(&p)?;
    let verts = VertexSet::from_family(fam, &fam.alpha_grid(CERT_GRID), true, None)?;
    let q_certified = certified_level(&p, &verts)?;
    let q = match &c.q {
        Some(q) => q.resolve(nx, base)?.symmetrize(),
        None if q_certified > T::zero() => DenseMatrix::scaled_identity(nx, q_certified),
        None => {
            return Err(Error::Domain(format!(
                "P does not certify the reference family (best level {:e}) and no Q was given",
                q_certified.as_f64()
            )))
        }
    };
    ensure_positive_definite(&q)?;
    let bounds = c.theta.resolve(fam.m())?;
    let k_hat = c.k_hat0.clone().unwrap_or_else(|| fam.gain_schedule(alpha0));
    let initial = AdaptiveState::new(k_hat, bounds, c.learning_rate(nx, base)?)?;
    check_inside(&initial.k_hat, &initial.bounds, "initial adaptive gain")?;
    let b = fam.input_matrix();
    Ok(LoopSetup {
        pb: p.matmul(&b)?,
        p,
        q,
        q_certified,
        b,
        b_r: fam.command_matrix(),
        initial,
        rate_safety: c.rate_safety,
    })
}

fn check_inside<T: Scalar>(k: &DenseMatrix<T>, b: &ColumnBounds<T>, what: &str) -> Result<()> {
    for (j, bj) in b.iter().enumerate() {
        let f = boundary_fn(&k.column(j), bj);
        if f > T::one() {
            return Err(Error::Domain(format!("{what}: column {j} lies outside its parameter set (f = {f})")));
        }
    }
    Ok(())
}

fn prepare_mimo<T: Scalar>(s: Scenario<T>) -> Result<Prepared<T>> {
    let family = PlantFamily::load(&s.family_path())?;
    check_alpha(&s, family.alpha_range())?;
    let profile = CommandProfile::new(&s.profile, s.duration, s.dt, |a| family.equilibrium_output(a))?;
    let nx = family.state_dim();
    let m = family.m();
    let x0 = match &s.x0 {
        Some(x) => x.clone(),
        None => family.reference_equilibrium(&profile.eval(T::zero())?)?,
    };
    if x0.len() != nx {
        return Err(dim_err("x0", nx, x0.len()));
    }
    let alpha0 = scheduling(&x0[..family.n()]);
    let c = s.controller.as_ref().expect("validated");
    let ctl = loop_setup(c, &family, alpha0, &s)?;
    let (constrained, lim) = match s.variant {
        Variant::Constrained => {
            let lim = s.sat_limits.clone().expect("validated");
            if lim.dim() != m {
                return Err(dim_err("sat_limits", m, lim.dim()));
            }
            let gd = LearningRate::new(c.gamma_delta.as_ref().expect("validated").resolve(m, &s.base_dir)?)?;
            let bd = c.theta_delta.as_ref().expect("validated").resolve(nx)?;
            let kd = c.k_delta0.clone().unwrap_or_else(|| DenseMatrix::zeros(nx, m));
            let free = match &c.k_delta_free {
                Some(rows) => {
                    if rows.len() != nx || rows.iter().any(|r| r.len() != m) {
                        return Err(dim_err("k_delta_free", format!("{nx}x{m}"), rows.len()));
                    }
                    Some(rows.concat())
                }
                None => None,
            };
            let st = ConstrainedAdaptiveState::new(ctl.initial.clone(), kd, bd, gd, free)?;
            check_inside(&st.k_delta.transpose(), &st.bounds_delta, "initial K_delta")?;
            (Some(st), lim)
        }
        _ => {
            if s.sat_limits.is_some() {
                return Err(Error::Domain("sat_limits apply only to the constrained variant".into()));
            }
            (None, SatLimits::unbounded(m))
        }
    };
    Ok(Prepared {
        setup: Setup::Mimo(MimoSetup {
            family,
            ctl,
            constrained,
            lim,
        }),
        scenario: s,
        profile,
        x0,
    })
}

/// Joint steady state of all reference loops under the shared scheduling value.
fn joint_reference_equilibrium<T: Scalar>(fam: &SubsystemFamily<T>, r: &[T]) -> Result<Vec<T>> {
    let fams: Vec<&PlantFamily<T>> = (0..fam.len()).map(|k| fam.family(k)).collect::<Result<_>>()?;
    let mut alpha = norm(r);
    let mut x = Vec::new();
    for _ in 0..200 {
        x.clear();
        let mut off = 0;
        for f in &fams {
            let rk = &r[off..off + f.m()];
            off += f.m();
            let rhs: Vec<T> = f.command_matrix().matvec(rk)?.into_iter().map(|v| -v).collect();
            x.extend(solve(&f.reference_matrix(alpha), &rhs)?);
        }
        let next = stacked_alpha(&fams, &x);
        if (next - alpha).abs() <= T::epsilon() * T::lit(16.0) * (T::one() + alpha.abs()) {
            break;
        }
        alpha = next;
    }
    Ok(x)
}

fn stacked_alpha<T: Scalar>(fams: &[&PlantFamily<T>], x: &[T]) -> T {
    let mut off = 0;
    let mut sq = T::zero();
    for f in fams {
        sq += x[off..off + f.n()].iter().map(|&v| v * v).sum::<T>();
        off += f.state_dim();
    }
    sq.sqrt()
}

fn prepare_decentralized<T: Scalar>(s: Scenario<T>) -> Result<Prepared<T>> {
    let family = SubsystemFamily::<T>::load(&s.family_path())?;
    let cfgs = s.subsystems.as_ref().expect("validated");
    if cfgs.len() != family.len() {
        return Err(dim_err("subsystems", family.len(), cfgs.len()));
    }
    let fams: Vec<&PlantFamily<T>> = (0..family.len()).map(|k| family.family(k)).collect::<Result<_>>()?;
    let dim0 = fams[0].state_dim();
    if fams.iter().any(|f| f.m() != 1 || f.state_dim() != dim0) {
        return Err(Error::Data("decentralized subsystems must be single-input with equal state size".into()));
    }
    for f in &fams {
        check_alpha(&s, f.alpha_range())?;
    }
    let profile = CommandProfile::new(&s.profile, s.duration, s.dt, |a| {
        fams.iter().flat_map(|f| f.equilibrium_output(a)).collect()
    })?;
    let total: usize = fams.iter().map(|f| f.state_dim()).sum();
    let x0 = match &s.x0 {
        Some(x) => x.clone(),
        None => joint_reference_equilibrium(&family, &profile.eval(T::zero())?)?,
    };
    if x0.len() != total {
        return Err(dim_err("x0", total, x0.len()));
    }
    let alpha0 = stacked_alpha(&fams, &x0);
    let loops = fams
        .iter()
        .zip(cfgs)
        .map(|(f, c)| loop_setup(c, f, alpha0, &s))
        .collect::<Result<Vec<_>>>()?;
    if s.sat_limits.is_some() {
        return Err(Error::Domain("sat_limits apply only to the constrained variant".into()));
    }
    Ok(Prepared {
        setup: Setup::Decentralized(DecentralizedSetup { family, loops }),
        scenario: s,
        profile,
        x0,
    })
}

pub fn prepare<T: Scalar>(s: Scenario<T>) -> Result<Prepared<T>> {
    match s.variant {
        Variant::Basic | Variant::Constrained => prepare_mimo(s),
        Variant::Decentralized => prepare_decentralized(s),
    }
}

fn axpy_mat<T: Scalar>(a: &DenseMatrix<T>, x: &[T], acc: &mut [T]) -> Result<()> {
    let ax = a.matvec(x)?;
    acc.iter_mut().zip(&ax).for_each(|(o, v)| *o += *v);
    Ok(())
}

/// `A x + B v + B_r r`.
fn plant_rhs<T: Scalar>(a: &DenseMatrix<T>, x: &[T], b: &DenseMatrix<T>, v: &[T], b_r_r: &[T]) -> Result<Vec<T>> {
    let mut d = a.matvec(x)?;
    axpy_mat(b, v, &mut d)?;
    d.iter_mut().zip(b_r_r).for_each(|(o, v)| *o += *v);
    Ok(d)
}

struct MimoSystem<'a, T: Scalar> {
    st: &'a MimoSetup<T>,
    profile: &'a CommandProfile<T>,
    delta: (T, T),
    nx: usize,
    m: usize,
    scratch: AdaptiveState<T>,
    cscratch: Option<ConstrainedAdaptiveState<T>>,
}

impl<T: Scalar> MimoSystem<'_, T> {
    fn layout(&self) -> TraceLayout {
        TraceLayout {
            state: self.nx,
            inputs: self.m,
            gain_rows: self.nx,
            gain_cols: self.m,
            with_delta: self.cscratch.is_some(),
        }
    }

    fn pack(&self, x0: &[T]) -> Vec<T> {
        let mut y = x0.to_vec();
        y.extend_from_slice(x0);
        y.extend_from_slice(self.st.ctl.initial.k_hat.as_slice());
        if let Some(c) = &self.st.constrained {
            y.extend_from_slice(&c.e_delta);
            y.extend_from_slice(c.k_delta.as_slice());
        }
        y
    }

    fn load(&mut self, y: &[T]) -> Result<()> {
        let (nx, m) = (self.nx, self.m);
        let kh = DenseMatrix::from_row_major(nx, m, y[2 * nx..2 * nx + nx * m].to_vec())?;
        match &mut self.cscratch {
            Some(c) => {
                let o = 2 * nx + nx * m;
                c.base.k_hat = kh;
                c.e_delta.copy_from_slice(&y[o..o + nx]);
                c.k_delta = DenseMatrix::from_row_major(nx, m, y[o + nx..o + nx + nx * m].to_vec())?;
            }
            None => self.scratch.k_hat = kh,
        }
        Ok(())
    }

    fn deriv(&mut self, t: T, y: &[T]) -> Result<Vec<T>> {
        self.load(y)?;
        let nx = self.nx;
        let (x, xm) = (&y[..nx], &y[nx..2 * nx]);
        let fam = &self.st.family;
        let alpha = scheduling(&x[..fam.n()]);
        let r = self.profile.eval(t)?;
        let brr = self.st.ctl.b_r.matvec(&r)?;
        let a = fam.degraded_plant_matrix(alpha, self.delta.0, self.delta.1);
        let a_m = fam.reference_matrix(alpha);
        let ctl = &self.st.ctl;
        let mut out = Vec::with_capacity(y.len());
        match &self.cscratch {
            Some(c) => {
                let s = step_constrained(c, x, xm, &self.st.lim, &ctl.p, &ctl.b, &a_m)?;
                out.extend(plant_rhs(&a, x, &ctl.b, &s.v_applied, &brr)?);
                out.extend(reference_rhs(&a_m, xm, &brr)?);
                out.extend_from_slice(s.d_k_hat.as_slice());
                out.extend(s.d_e_delta);
                out.extend_from_slice(s.d_k_delta.as_slice());
            }
            None => {
                let v = control_basic(&self.scratch, x)?;
                let e = sub_vec(x, xm);
                let dk = adapt_with_pb(&self.scratch, x, &e, &ctl.pb)?;
                out.extend(plant_rhs(&a, x, &ctl.b, &v, &brr)?);
                out.extend(reference_rhs(&a_m, xm, &brr)?);
                out.extend_from_slice(dk.as_slice());
            }
        }
        Ok(out)
    }

    fn post_step(&self, y: &mut [T]) {
        let (nx, m) = (self.nx, self.m);
        let level = T::lit(CLAMP_LEVEL);
        let o = 2 * nx;
        for (j, b) in self.st.ctl.initial.bounds.iter().enumerate() {
            let mut col: Vec<T> = (0..nx).map(|i| y[o + i * m + j]).collect();
            if clamp_to_level(&mut col, b, level) {
                (0..nx).for_each(|i| y[o + i * m + j] = col[i]);
            }
        }
        if let Some(c) = &self.st.constrained {
            let o = 2 * nx + nx * m + nx;
            for i in 0..nx {
                if c.row_is_free(i) {
                    clamp_to_level(&mut y[o + i * m..o + (i + 1) * m], c.bounds_delta.get(i), level);
                }
            }
        }
    }

    fn row(&mut self, t: T, y: &[T]) -> Result<Vec<T>> {
        self.load(y)?;
        let (nx, m) = (self.nx, self.m);
        let n = self.st.family.n();
        let (x, xm) = (&y[..nx], &y[nx..2 * nx]);
        let e = sub_vec(x, xm);
        let kh = &y[2 * nx..2 * nx + nx * m];
        let mut row = Vec::with_capacity(self.layout().width());
        row.push(t);
        row.extend_from_slice(x);
        row.extend_from_slice(xm);
        row.push(norm(&e));
        let (v_raw, v_app, ev, kd) = match &self.cscratch {
            Some(c) => {
                let v = control_basic(&c.base, x)?;
                let va = sat(&v, &self.st.lim)?;
                let ev = norm(&sub_vec(&e, &c.e_delta));
                (v, va, ev, Some(c.k_delta.as_slice().to_vec()))
            }
            None => {
                let v = control_basic(&self.scratch, x)?;
                (v.clone(), v, norm(&e), None)
            }
        };
        row.push(ev);
        row.extend(v_raw);
        row.extend(v_app);
        row.extend_from_slice(&x[n..n + m]);
        row.push(scheduling(&x[..n]));
        row.extend_from_slice(kh);
        if let Some(kd) = kd {
            row.extend(kd);
        }
        Ok(row)
    }
}

/// `A_m x_m + B_r r`.
fn reference_rhs<T: Scalar>(a_m: &DenseMatrix<T>, xm: &[T], b_r_r: &[T]) -> Result<Vec<T>> {
    let mut d = a_m.matvec(xm)?;
    d.iter_mut().zip(b_r_r).for_each(|(o, v)| *o += *v);
    Ok(d)
}

struct DecSystem<'a, T: Scalar> {
    st: &'a DecentralizedSetup<T>,
    profile: &'a CommandProfile<T>,
    delta: (T, T),
    fams: Vec<&'a PlantFamily<T>>,
    nk: usize,
    scratch: Vec<AdaptiveState<T>>,
}

impl<'a, T: Scalar> DecSystem<'a, T> {
    fn new(st: &'a DecentralizedSetup<T>, profile: &'a CommandProfile<T>, delta: (T, T)) -> Result<Self> {
        let fams: Vec<&PlantFamily<T>> = (0..st.family.len()).map(|k| st.family.family(k)).collect::<Result<_>>()?;
        Ok(Self {
            nk: fams[0].state_dim(),
            fams,
            st,
            profile,
            delta,
            scratch: st.loops.iter().map(|l| l.initial.clone()).collect(),
        })
    }

    fn count(&self) -> usize {
        self.fams.len()
    }

    fn layout(&self) -> TraceLayout {
        TraceLayout {
            state: self.nk * self.count(),
            inputs: self.count(),
            gain_rows: self.nk,
            gain_cols: self.count(),
            with_delta: false,
        }
    }

    fn pack(&self, x0: &[T]) -> Vec<T> {
        let mut y = x0.to_vec();
        y.extend_from_slice(x0);
        for l in &self.st.loops {
            y.extend_from_slice(l.initial.k_hat.as_slice());
        }
        y
    }

    fn load(&mut self, y: &[T]) {
        let (nk, total) = (self.nk, self.nk * self.count());
        for (k, s) in self.scratch.iter_mut().enumerate() {
            let o = 2 * total + k * nk;
            s.k_hat = DenseMatrix::column_vector(&y[o..o + nk]);
        }
    }

    fn deriv(&mut self, t: T, y: &[T]) -> Result<Vec<T>> {
        self.load(y);
        let (nk, total) = (self.nk, self.nk * self.count());
        let alpha = stacked_alpha(&self.fams, &y[..total]);
        let r = self.profile.eval(t)?;
        let mut dx = Vec::with_capacity(total);
        let mut dxm = Vec::with_capacity(total);
        let mut dk = Vec::with_capacity(total);
        for (k, f) in self.fams.iter().enumerate() {
            let l = &self.st.loops[k];
            let x = &y[k * nk..(k + 1) * nk];
            let xm = &y[total + k * nk..total + (k + 1) * nk];
            let brr = l.b_r.matvec(&r[k..k + 1])?;
            let a = f.degraded_plant_matrix(alpha, self.delta.0, self.delta.1);
            let a_m = f.reference_matrix(alpha);
            let v = control_decentralized(&self.scratch[k], x)?;
            dx.extend(plant_rhs(&a, x, &l.b, &[v], &brr)?);
            dxm.extend(reference_rhs(&a_m, xm, &brr)?);
            let e = sub_vec(x, xm);
            dk.extend_from_slice(adapt_decentralized(&self.scratch[k], x, &e, &l.p, &l.b)?.as_slice());
        }
        for (to, from, a_kq) in self.st.family.coupling_matrices(alpha) {
            axpy_mat(&a_kq, &y[from * nk..(from + 1) * nk], &mut dx[to * nk..(to + 1) * nk])?;
        }
        dx.extend(dxm);
        dx.extend(dk);
        Ok(dx)
    }

    fn post_step(&self, y: &mut [T]) {
        let (nk, total) = (self.nk, self.nk * self.count());
        for (k, l) in self.st.loops.iter().enumerate() {
            let o = 2 * total + k * nk;
            clamp_to_level(&mut y[o..o + nk], l.initial.bounds.get(0), T::lit(CLAMP_LEVEL));
        }
    }

    fn row(&mut self, t: T, y: &[T]) -> Result<Vec<T>> {
        self.load(y);
        let (nk, total) = (self.nk, self.nk * self.count());
        let (x, xm) = (&y[..total], &y[total..2 * total]);
        let mut row = Vec::with_capacity(self.layout().width());
        row.push(t);
        row.extend_from_slice(x);
        row.extend_from_slice(xm);
        let en = norm(&sub_vec(x, xm));
        row.push(en);
        row.push(en);
        let v: Vec<T> = (0..self.count())
            .map(|k| control_decentralized(&self.scratch[k], &x[k * nk..(k + 1) * nk]))
            .collect::<Result<_>>()?;
        row.extend_from_slice(&v);
        row.extend_from_slice(&v);
        for (k, f) in self.fams.iter().enumerate() {
            row.push(x[k * nk + f.n()]);
        }
        row.push(stacked_alpha(&self.fams, x));
        for i in 0..nk {
            for k in 0..self.count() {
                row.push(y[2 * total + k * nk + i]);
            }
        }
        Ok(row)
    }
}

enum System<'a, T: Scalar> {
    Mimo(MimoSystem<'a, T>),
    Dec(DecSystem<'a, T>),
}

impl<T: Scalar> System<'_, T> {
    fn deriv(&mut self, t: T, y: &[T]) -> Result<Vec<T>> {
        match self {
            System::Mimo(s) => s.deriv(t, y),
            System::Dec(s) => s.deriv(t, y),
        }
    }

    fn post_step(&self, y: &mut [T]) {
        match self {
            System::Mimo(s) => s.post_step(y),
            System::Dec(s) => s.post_step(y),
        }
    }

    fn row(&mut self, t: T, y: &[T]) -> Result<Vec<T>> {
        match self {
            System::Mimo(s) => s.row(t, y),
            System::Dec(s) => s.row(t, y),
        }
    }
}

/// Integrates the prepared scenario with fixed-step RK4, logging every step.
pub fn run<T: Scalar>(prep: &Prepared<T>) -> Result<SimTrace<T>> {
    let sc = &prep.scenario;
    let delta = (sc.degradation.delta_a, sc.degradation.delta_b);
    let (mut sys, layout, mut y) = match &prep.setup {
        Setup::Mimo(st) => {
            let s = MimoSystem {
                st,
                profile: &prep.profile,
                delta,
                nx: st.family.state_dim(),
                m: st.family.m(),
                scratch: st.ctl.initial.clone(),
                cscratch: st.constrained.clone(),
            };
            let (l, y) = (s.layout(), s.pack(&prep.x0));
            (System::Mimo(s), l, y)
        }
        Setup::Decentralized(st) => {
            let s = DecSystem::new(st, &prep.profile, delta)?;
            let (l, y) = (s.layout(), s.pack(&prep.x0));
            (System::Dec(s), l, y)
        }
    };
    let steps = sc.steps();
    let dt = sc.dt;
    let mut trace = SimTrace::with_capacity(layout.header(), steps + 1);
    trace.push(sys.row(T::zero(), &y)?)?;
    let limit = T::lit(DIVERGENCE_NORM);
    for i in 0..steps {
        let t = T::from_usize_lossy(i) * dt;
        let mut next = rk4_step(|tt, yy: &[T]| sys.deriv(tt, yy), t, &y, dt)?;
        sys.post_step(&mut next);
        let t1 = T::from_usize_lossy(i + 1) * dt;
        let nrm = norm(&next);
        if !(nrm <= limit) {
            return Err(Error::Diverged {
                t: t1.as_f64(),
                norm: nrm.as_f64(),
                last_row: trace.rows().last().map(|r| r.iter().map(|v| v.as_f64()).collect()).unwrap_or_default(),
            });
        }
        y = next;
        trace.push(sys.row(t1, &y)?)?;
    }
    Ok(trace)
}

/// Loads, prepares and runs a scenario file.
pub fn run_file<T: Scalar>(path: &std::path::Path) -> Result<(Prepared<T>, SimTrace<T>)> {
    let prep = prepare(Scenario::load(path)?)?;
    let trace = run(&prep)?;
    Ok((prep, trace))
}
