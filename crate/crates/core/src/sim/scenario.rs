use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::numerics::DenseMatrix;
use crate::projection::{ColumnBounds, ConvexBound, LearningRate};
use crate::saturation::SatLimits;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Basic,
    Constrained,
    Decentralized,
}

/// Command knot: at time `t` the command sits on the equilibrium output of `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct Knot<T: Scalar> {
    pub t: T,
    pub alpha: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct Degradation<T: Scalar> {
    #[serde(default)]
    pub delta_a: T,
    #[serde(default)]
    pub delta_b: T,
}

impl<T: Scalar> Default for Degradation<T> {
    fn default() -> Self {
        Self {
            delta_a: T::zero(),
            delta_b: T::zero(),
        }
    }
}

/// A square matrix given as `c` (meaning `c·I`), a diagonal, a full matrix,
/// or a path to a JSON matrix relative to the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, bound = "T: Scalar")]
pub enum MatrixSpec<T: Scalar> {
    Scalar(T),
    Diag(Vec<T>),
    Full(DenseMatrix<T>),
    File(PathBuf),
}

impl<T: Scalar> MatrixSpec<T> {
    pub fn resolve(&self, n: usize, base: &Path) -> Result<DenseMatrix<T>> {
        let m = match self {
            MatrixSpec::Scalar(c) => DenseMatrix::scaled_identity(n, *c),
            MatrixSpec::Diag(d) => DenseMatrix::diag(d),
            MatrixSpec::Full(m) => m.clone(),
            MatrixSpec::File(p) => {
                let path = base.join(p);
                let s = std::fs::read_to_string(&path).map_err(|e| Error::Io {
                    path: path.display().to_string(),
                    source: e,
                })?;
                serde_json::from_str(&s).map_err(|e| Error::Json {
                    context: path.display().to_string(),
                    source: e,
                })?
            }
        };
        if m.shape() != (n, n) {
            return Err(dim_err("matrix spec", format!("{n}x{n}"), format!("{}x{}", m.rows(), m.cols())));
        }
        Ok(m)
    }
}

/// One bound for every column, or one per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, bound = "T: Scalar")]
pub enum BoundSpec<T: Scalar> {
    Uniform(ConvexBound<T>),
    PerColumn(ColumnBounds<T>),
}

impl<T: Scalar> BoundSpec<T> {
    pub fn resolve(&self, count: usize) -> Result<ColumnBounds<T>> {
        match self {
            BoundSpec::Uniform(b) => Ok(ColumnBounds::uniform(*b, count)),
            BoundSpec::PerColumn(c) if c.len() == count => Ok(c.clone()),
            BoundSpec::PerColumn(c) => Err(dim_err("bounds", count, c.len())),
        }
    }
}

fn default_safety<T: Scalar>() -> T {
    T::lit(1.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct ControllerConfig<T: Scalar> {
    #[serde(rename = "P")]
    pub p: MatrixSpec<T>,
    /// Defaults to the largest isotropic level `P` certifies over the family.
    #[serde(rename = "Q", default)]
    pub q: Option<MatrixSpec<T>>,
    pub gamma: MatrixSpec<T>,
    /// Defaults to the nominal gain at the initial scheduling value.
    #[serde(default)]
    pub k_hat0: Option<DenseMatrix<T>>,
    pub theta: BoundSpec<T>,
    #[serde(default)]
    pub gamma_delta: Option<MatrixSpec<T>>,
    #[serde(default)]
    pub k_delta0: Option<DenseMatrix<T>>,
    /// One bound per row of `K_Δ`.
    #[serde(default)]
    pub theta_delta: Option<BoundSpec<T>>,
    /// Entries of `K_Δ` allowed to adapt; all by default.
    #[serde(default)]
    pub k_delta_free: Option<Vec<Vec<bool>>>,
    /// Safety factor on the finite-differenced ideal-gain rate.
    #[serde(default = "default_safety")]
    pub rate_safety: T,
}

impl<T: Scalar> ControllerConfig<T> {
    pub fn learning_rate(&self, n: usize, base: &Path) -> Result<LearningRate<T>> {
        LearningRate::new(self.gamma.resolve(n, base)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct Scenario<T: Scalar> {
    pub variant: Variant,
    pub duration: T,
    pub dt: T,
    pub profile: Vec<Knot<T>>,
    #[serde(default)]
    pub degradation: Degradation<T>,
    #[serde(default)]
    pub sat_limits: Option<SatLimits<T>>,
    #[serde(default)]
    pub seed: u64,
    /// Plant family file (a subsystem family for the decentralized variant).
    pub family: PathBuf,
    #[serde(default)]
    pub controller: Option<ControllerConfig<T>>,
    #[serde(default)]
    pub subsystems: Option<Vec<ControllerConfig<T>>>,
    /// Initial augmented state, stacked across subsystems; defaults to the
    /// reference steady state of the initial command.
    #[serde(default)]
    pub x0: Option<Vec<T>>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl<T: Scalar> Scenario<T> {
    pub fn from_json_str(s: &str, base_dir: &Path) -> Result<Self> {
        let mut sc: Scenario<T> = serde_json::from_str(s).map_err(|e| Error::Json {
            context: "scenario".into(),
            source: e,
        })?;
        sc.base_dir = base_dir.to_path_buf();
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_json_str(&s, base)
    }

    pub fn family_path(&self) -> PathBuf {
        self.base_dir.join(&self.family)
    }

    /// Number of integration steps; the trace has one more row.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round().to_usize().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        if !(self.dt > T::zero() && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.duration >= self.dt && self.duration.is_finite()) {
            return bad(format!("duration {} must be at least dt {}", self.duration, self.dt));
        }
        let steps = T::from_usize_lossy(self.steps());
        if (steps * self.dt - self.duration).abs() > multiple_tol(self.dt, self.duration) {
            return bad("duration must be an integer multiple of dt".into());
        }
        let band = T::lit(0.3);
        for (name, d) in [("delta_a", self.degradation.delta_a), ("delta_b", self.degradation.delta_b)] {
            if !(d >= T::zero() && d <= band) {
                return bad(format!("{name} = {d} outside [0, 0.3]"));
            }
        }
        let first = self.profile.first().ok_or_else(|| Error::Domain("profile needs at least one knot".into()))?;
        if first.t != T::zero() {
            return bad("profile must start at t = 0".into());
        }
        if self.profile.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return bad("profile times must be strictly increasing".into());
        }
        match self.variant {
            Variant::Basic | Variant::Constrained => {
                let c = self
                    .controller
                    .as_ref()
                    .ok_or_else(|| Error::Domain("scenario needs a controller block".into()))?;
                if self.variant == Variant::Constrained && (c.gamma_delta.is_none() || c.theta_delta.is_none()) {
                    return bad("constrained variant needs gamma_delta and theta_delta".into());
                }
                if self.variant == Variant::Constrained && self.sat_limits.is_none() {
                    return bad("constrained variant needs sat_limits".into());
                }
            }
            Variant::Decentralized => {
                if self.subsystems.as_ref().map_or(true, |s| s.is_empty()) {
                    return bad("decentralized variant needs a subsystems block".into());
                }
            }
        }
        Ok(())
    }
}

/// Piecewise-linear command between the equilibrium outputs of consecutive
/// knots, held after the last knot.
/// Rounding slack for `i·dt` against `duration`.
fn multiple_tol<T: Scalar>(dt: T, duration: T) -> T {
    (T::lit(1e-6) * dt).max(T::lit(8.0) * T::epsilon() * duration)
}

#[derive(Debug, Clone)]
pub struct CommandProfile<T: Scalar> {
    times: Vec<T>,
    outputs: Vec<Vec<T>>,
    duration: T,
    slack: T,
}

impl<T: Scalar> CommandProfile<T> {
    pub fn new(knots: &[Knot<T>], duration: T, dt: T, mut output: impl FnMut(T) -> Vec<T>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Domain("profile needs at least one knot".into()));
        }
        Ok(Self {
            times: knots.iter().map(|k| k.t).collect(),
            outputs: knots.iter().map(|k| output(k.alpha)).collect(),
            duration,
            slack: multiple_tol(dt, duration),
        })
    }

    pub fn eval(&self, t: T) -> Result<Vec<T>> {
        if !(t >= -self.slack && t <= self.duration + self.slack) {
            return Err(Error::Domain(format!("t = {t} outside [0, {}]", self.duration)));
        }
        let i = self.times.partition_point(|&k| k <= t);
        if i == 0 {
            return Ok(self.outputs[0].clone());
        }
        if i == self.times.len() {
            return Ok(self.outputs[i - 1].clone());
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        Ok(self.outputs[i - 1]
            .iter()
            .zip(&self.outputs[i])
            .map(|(&a, &b)| a + w * (b - a))
            .collect())
    }

    /// `max_t ‖r(t)‖`, attained at a knot.
    pub fn r_max(&self) -> T {
        self.outputs.iter().map(|o| crate::numerics::norm(o)).fold(T::zero(), T::max)
    }
}

/// `r(t)` for a single MIMO family.
pub fn command_profile<T: Scalar>(s: &Scenario<T>, fam: &crate::lpv_model::PlantFamily<T>, t: T) -> Result<Vec<T>> {
    CommandProfile::new(&s.profile, s.duration, s.dt, |a| fam.equilibrium_output(a))?.eval(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::engine_family;

    fn scen(extra: &str) -> Result<Scenario<f64>> {
        let s = format!(
            r#"{{"variant":"basic","duration":60,"dt":0.001,
               "profile":[{{"t":0,"alpha":0.3361}},{{"t":10,"alpha":0.3361}},{{"t":20,"alpha":0.8818}}],
               "family":"engine_family.json",
               "controller":{{"P":1.0,"Q":0.1,"gamma":100,"theta":{{"theta_max":2.0,"eps":0.1}}}}{extra}}}"#
        );
        Scenario::from_json_str(&s, Path::new("."))
    }

    #[test]
    fn profile_values() {
        let s = scen("").unwrap();
        let fam = engine_family();
        let idle = command_profile(&s, &fam, 5.0).unwrap();
        assert_eq!(idle, command_profile(&s, &fam, 0.0).unwrap());
        let cruise = command_profile(&s, &fam, 20.0).unwrap();
        assert!((cruise[0] - 0.7264).abs() < 1e-15 && (cruise[1] - 0.5).abs() < 1e-15);
        assert_eq!(cruise, command_profile(&s, &fam, 45.0).unwrap());
        let mid = command_profile(&s, &fam, 15.0).unwrap();
        for i in 0..2 {
            assert!((mid[i] - 0.5 * (idle[i] + cruise[i])).abs() < 1e-15);
        }
        assert!(command_profile(&s, &fam, 61.0).is_err());
        assert!(command_profile(&s, &fam, -1.0).is_err());
        assert_eq!(s.steps(), 60000);
    }

    #[test]
    fn rejects_bad_scenarios() {
        assert!(scen(r#","degradation":{"delta_b":0.4}"#).is_err());
        assert!(scen(r#","degradation":{"delta_b":0.1}"#).is_ok());
        assert!(scen(r#","bogus":1"#).is_err());
        let bad_dt = r#"{"variant":"basic","duration":1,"dt":0,"profile":[{"t":0,"alpha":0.4}],"family":"f","controller":{"P":1,"gamma":1,"theta":{"theta_max":1,"eps":0.1}}}"#;
        assert!(Scenario::<f64>::from_json_str(bad_dt, Path::new(".")).is_err());
        let constrained = r#"{"variant":"constrained","duration":1,"dt":0.1,"profile":[{"t":0,"alpha":0.4}],"family":"f","controller":{"P":1,"gamma":1,"theta":{"theta_max":1,"eps":0.1}}}"#;
        assert!(Scenario::<f64>::from_json_str(constrained, Path::new(".")).is_err());
    }

    #[test]
    fn matrix_specs() {
        let base = Path::new(".");
        let s: MatrixSpec<f64> = serde_json::from_str("2.5").unwrap();
        assert_eq!(s.resolve(2, base).unwrap(), DenseMatrix::scaled_identity(2, 2.5));
        let s: MatrixSpec<f64> = serde_json::from_str("[1, 2]").unwrap();
        assert_eq!(s.resolve(2, base).unwrap(), DenseMatrix::diag(&[1.0, 2.0]));
        let s: MatrixSpec<f64> = serde_json::from_str("[[1, 0], [0, 3]]").unwrap();
        assert_eq!(s.resolve(2, base).unwrap(), DenseMatrix::diag(&[1.0, 3.0]));
        assert!(s.resolve(3, base).is_err());
        let s: MatrixSpec<f64> = serde_json::from_str(r#""missing.json""#).unwrap();
        assert!(matches!(s.resolve(2, base), Err(Error::Io { .. })));
    }
}
