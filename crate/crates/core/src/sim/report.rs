use serde::Serialize;

use crate::error::{Error, Result};
use crate::mrac::{
    gain_rate_bound, theorem2_bounds, theorem3_bounds, theorem4_bounds, theorem5_bounds, Theorem2Bounds, Theorem4Bounds, Theorem4Inputs,
    Theorem5Bounds, Theorem5Subsystem,
};
use crate::projection::{boundary_fn, ColumnBounds};
use crate::scalar::Scalar;
use crate::sim::engine::{Prepared, Setup};
use crate::sim::scenario::Variant;
use crate::sim::trace::SimTrace;

/// Additive slack on error-bound checks.
pub const BOUND_SLACK: f64 = 1e-6;
/// Slack on `f ≤ 1` for logged adaptive parameters.
pub const CONTAINMENT_SLACK: f64 = 1e-6;
/// Inflation of the ultimate-bound radius used for the entry test.
pub const UBB_FACTOR: f64 = 1.05;

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub applicable: bool,
    pub passed: bool,
    pub observed: f64,
    pub limit: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_violation_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl BoundCheck {
    fn skipped(name: &str, note: String) -> Self {
        Self {
            name: name.into(),
            applicable: false,
            passed: true,
            observed: f64::NAN,
            limit: f64::NAN,
            first_violation_t: None,
            note: Some(note),
        }
    }

    /// `series[i] ≤ limit` at every logged time.
    fn upper<T: Scalar>(name: &str, t: &[T], series: &[T], limit: T, strict: bool) -> Self {
        let bad = |v: T| if strict { !(v < limit) } else { !(v <= limit) };
        let first = series.iter().position(|&v| bad(v));
        let observed = series.iter().copied().fold(T::neg_infinity(), T::max);
        Self {
            name: name.into(),
            applicable: true,
            passed: first.is_none(),
            observed: observed.as_f64(),
            limit: limit.as_f64(),
            first_violation_t: first.map(|i| t[i].as_f64()),
            note: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct Observed<T: Scalar> {
    pub max_e_norm: T,
    pub max_ev_norm: T,
    pub final_e_norm: T,
    pub max_x_norm: T,
    /// Largest `f_j` over logged adaptive gain columns.
    pub max_f: T,
    pub alpha_min: T,
    pub alpha_max: T,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub max_abs_v_applied: Vec<T>,
    /// `max_t ‖x_m,k(t)‖` per loop.
    pub x_m_bar: Vec<T>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct BoundsReport<T: Scalar> {
    pub variant: Variant,
    pub rows: usize,
    pub dt: T,
    pub r_max: T,
    /// Per-column ideal-gain rate bounds, inflated by the safety factor.
    pub d_k: Vec<T>,
    pub q_certified: Vec<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem2: Option<Theorem2Bounds<T>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem3: Option<Theorem2Bounds<T>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem4: Option<Theorem4Bounds<T>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem5: Option<Theorem5Bounds<T>>,
    /// First logged time after which `‖ē‖` stays inside the inflated ball.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ubb_entry_time: Option<T>,
    pub observed: Observed<T>,
    pub checks: Vec<BoundCheck>,
    pub passed: bool,
}

impl<T: Scalar> BoundsReport<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn check(&self, name: &str) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn col<T: Scalar>(tr: &SimTrace<T>, name: &str) -> Result<Vec<T>> {
    tr.column(name).ok_or_else(|| Error::Data(format!("trace lacks column {name}")))
}

/// Row-wise norm over a block of columns.
fn block_norm<T: Scalar>(tr: &SimTrace<T>, cols: &[usize]) -> Vec<T> {
    tr.rows().iter().map(|r| cols.iter().map(|&j| r[j] * r[j]).sum::<T>().sqrt()).collect()
}

fn max_of<T: Scalar>(v: &[T]) -> T {
    v.iter().copied().fold(T::neg_infinity(), T::max)
}

/// Row-wise `max_j f_j` of the logged gain matrix `prefix_r_c`.
fn gain_f<T: Scalar>(tr: &SimTrace<T>, prefix: &str, rows: usize, cols: usize, bounds: &ColumnBounds<T>) -> Result<Vec<T>> {
    let mut idx = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let name = format!("{prefix}_{r}_{c}");
            idx.push(tr.index(&name).ok_or_else(|| Error::Data(format!("trace lacks column {name}")))?);
        }
    }
    Ok(tr
        .rows()
        .iter()
        .map(|row| {
            (0..cols)
                .map(|c| {
                    let v: Vec<T> = (0..rows).map(|r| row[idx[r * cols + c]]).collect();
                    boundary_fn(&v, bounds.get(c))
                })
                .fold(T::neg_infinity(), T::max)
        })
        .collect())
}

fn state_cols(tr: &SimTrace<impl Scalar>, prefix: &str, count: usize) -> Result<Vec<usize>> {
    (1..=count)
        .map(|i| {
            let name = format!("{prefix}{i}");
            tr.index(&name).ok_or_else(|| Error::Data(format!("trace lacks column {name}")))
        })
        .collect()
}

/// Evaluates the applicable bounds for a finished run and checks the trace
/// against each.
pub fn bounds_report<T: Scalar>(prep: &Prepared<T>, tr: &SimTrace<T>) -> Result<BoundsReport<T>> {
    if tr.is_empty() {
        return Err(Error::Data("empty trace".into()));
    }
    let sc = &prep.scenario;
    let t = col(tr, "t")?;
    let alpha = col(tr, "alpha")?;
    let e_norm = col(tr, "e_norm")?;
    let ev_norm = col(tr, "ev_norm")?;
    let slack = T::lit(BOUND_SLACK);
    let one_plus = T::one() + T::lit(CONTAINMENT_SLACK);
    let mut checks = Vec::new();
    let (mut th2, mut th3, mut th4, mut th5, mut entry) = (None, None, None, None, None);
    let r_max = prep.profile.r_max();

    let (d_k, q_certified, nx, x_m_bar, max_f, max_v) = match &prep.setup {
        Setup::Mimo(st) => {
            let nx = st.family.state_dim();
            let m = st.family.m();
            let ctl = &st.ctl;
            let d_k = gain_rate_bound(&st.family, &alpha, sc.dt, ctl.rate_safety);
            let f = gain_f(tr, "Khat", nx, m, &ctl.initial.bounds)?;
            checks.push(BoundCheck::upper("khat_containment", &t, &f, one_plus, false));
            let xm_norm = block_norm(tr, &state_cols(tr, "xm", nx)?);
            let mut max_v = Vec::new();
            match sc.variant {
                Variant::Basic => {
                    let b = theorem2_bounds(&ctl.initial.bounds, &ctl.initial.gamma, &ctl.p, &ctl.q, &d_k)?;
                    checks.push(BoundCheck::upper("theorem2_e_norm", &t, &e_norm, b.e_bound + slack, false));
                    th2 = Some(b);
                }
                _ => {
                    let c = st.constrained.as_ref().expect("constrained setup");
                    let b = theorem3_bounds(&ctl.initial.bounds, &ctl.initial.gamma, &ctl.p, &ctl.q, &d_k)?;
                    checks.push(BoundCheck::upper("theorem3_ev_norm", &t, &ev_norm, b.e_bound + slack, false));
                    th3 = Some(b);
                    let fd = delta_rows_f(tr, nx, m, c)?;
                    checks.push(BoundCheck::upper("kdelta_containment", &t, &fd, one_plus, false));
                    for (i, &lim) in st.lim.limits().iter().enumerate() {
                        let v: Vec<T> = col(tr, &format!("v{}_app", i + 1))?.iter().map(|x| x.abs()).collect();
                        max_v.push(max_of(&v));
                        checks.push(BoundCheck::upper(&format!("saturation_v{}", i + 1), &t, &v, lim, false));
                    }
                    let x0 = &prep.x0;
                    let e0: Vec<T> = vec![T::zero(); nx];
                    let k_star0 = st.family.gain_schedule(alpha[0]);
                    let inp = Theorem4Inputs {
                        state: c,
                        k_star0: &k_star0,
                        k_delta_star: &ctl.b,
                        p: &ctl.p,
                        q: &ctl.q,
                        lim: &st.lim,
                        r_max,
                        b: &ctl.b,
                        b_r: &ctl.b_r,
                        x0,
                        e0: &e0,
                    };
                    let b4 = theorem4_bounds(&inp)?;
                    let xn = block_norm(tr, &state_cols(tr, "x", nx)?);
                    if b4.guarantees_state_bound() {
                        checks.push(BoundCheck::upper("theorem4_x_norm", &t, &xn, b4.x_max, true));
                    } else {
                        let why = if !b4.applicable {
                            "inapplicable at this configuration".to_string()
                        } else {
                            format!("initial conditions outside the region (i: {}, ii: {})", b4.cond_i, b4.cond_ii)
                        };
                        checks.push(BoundCheck::skipped("theorem4_x_norm", why));
                    }
                    th4 = Some(b4);
                }
            }
            (d_k, vec![ctl.q_certified], nx, vec![max_of(&xm_norm)], max_of(&f), max_v)
        }
        Setup::Decentralized(st) => {
            let nk = st.loops[0].initial.k_hat.rows();
            let count = st.loops.len();
            let xm_cols = state_cols(tr, "xm", nk * count)?;
            let mut d_k = Vec::new();
            let mut xbar = Vec::new();
            let mut fmax = T::neg_infinity();
            for (k, l) in st.loops.iter().enumerate() {
                let fam = st.family.family(k)?;
                d_k.push(gain_rate_bound(fam, &alpha, sc.dt, l.rate_safety)[0]);
                xbar.push(max_of(&block_norm(tr, &xm_cols[k * nk..(k + 1) * nk])));
                let idx: Vec<usize> = (0..nk)
                    .map(|r| tr.index(&format!("Khat_{r}_{k}")).ok_or_else(|| Error::Data("trace lacks gain columns".into())))
                    .collect::<Result<_>>()?;
                let f: Vec<T> = tr
                    .rows()
                    .iter()
                    .map(|row| boundary_fn(&idx.iter().map(|&j| row[j]).collect::<Vec<_>>(), l.initial.bounds.get(0)))
                    .collect();
                checks.push(BoundCheck::upper(&format!("khat_containment_{k}"), &t, &f, one_plus, false));
                fmax = fmax.max(max_of(&f));
            }
            let subs: Vec<Theorem5Subsystem<'_, T>> = st
                .loops
                .iter()
                .zip(d_k.iter().zip(&xbar))
                .map(|(l, (&d, &x))| Theorem5Subsystem {
                    p: &l.p,
                    q: &l.q,
                    gamma: &l.initial.gamma,
                    bounds: &l.initial.bounds,
                    d_bar: d,
                    x_m_bar: x,
                })
                .collect();
            let b5 = theorem5_bounds(&subs, &st.family.coupling_gains())?;
            match b5.ubb_radius {
                Some(rad) => {
                    let thr = rad * T::lit(UBB_FACTOR);
                    let last_out = e_norm.iter().rposition(|&v| !(v <= thr));
                    let ent = match last_out {
                        None => Some(t[0]),
                        Some(i) if i + 1 < t.len() => Some(t[i + 1]),
                        Some(_) => None,
                    };
                    let half = sc.duration / T::lit(2.0);
                    checks.push(BoundCheck {
                        name: "theorem5_ubb_entry".into(),
                        applicable: true,
                        passed: ent.is_some_and(|v| v < half),
                        observed: ent.map_or(f64::INFINITY, |v| v.as_f64()),
                        limit: half.as_f64(),
                        first_violation_t: None,
                        note: Some(format!("entry into {} x radius {:e}", UBB_FACTOR, rad.as_f64())),
                    });
                    entry = ent;
                }
                None => checks.push(BoundCheck::skipped(
                    "theorem5_ubb_entry",
                    format!("lambda_min(Pi) = {:e} <= 0; no ultimate bound", b5.lambda_min_pi.as_f64()),
                )),
            }
            th5 = Some(b5);
            (d_k, st.loops.iter().map(|l| l.q_certified).collect(), nk * count, xbar, fmax, Vec::new())
        }
    };

    let x_norm = block_norm(tr, &state_cols(tr, "x", nx)?);
    let observed = Observed {
        max_e_norm: max_of(&e_norm),
        max_ev_norm: max_of(&ev_norm),
        final_e_norm: *e_norm.last().expect("nonempty"),
        max_x_norm: max_of(&x_norm),
        max_f,
        alpha_min: alpha.iter().copied().fold(T::infinity(), T::min),
        alpha_max: max_of(&alpha),
        max_abs_v_applied: max_v,
        x_m_bar,
    };
    let passed = checks.iter().all(|c| c.passed);
    Ok(BoundsReport {
        variant: sc.variant,
        rows: tr.len(),
        dt: sc.dt,
        r_max,
        d_k,
        q_certified,
        theorem2: th2,
        theorem3: th3,
        theorem4: th4,
        theorem5: th5,
        ubb_entry_time: entry,
        observed,
        checks,
        passed,
    })
}

/// Row-wise largest `f` over the free rows of the logged `K_Δ`.
fn delta_rows_f<T: Scalar>(tr: &SimTrace<T>, nx: usize, m: usize, c: &crate::mrac::ConstrainedAdaptiveState<T>) -> Result<Vec<T>> {
    let mut idx = Vec::new();
    for r in (0..nx).filter(|&r| c.row_is_free(r)) {
        let cols: Vec<usize> = (0..m)
            .map(|j| tr.index(&format!("Kdelta_{r}_{j}")).ok_or_else(|| Error::Data("trace lacks K_delta columns".into())))
            .collect::<Result<_>>()?;
        idx.push((r, cols));
    }
    Ok(tr
        .rows()
        .iter()
        .map(|row| {
            idx.iter()
                .map(|(r, cols)| boundary_fn(&cols.iter().map(|&j| row[j]).collect::<Vec<_>>(), c.bounds_delta.get(*r)))
                .fold(T::neg_infinity(), T::max)
        })
        .collect())
}
