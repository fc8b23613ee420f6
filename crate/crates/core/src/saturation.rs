//! Rectangular actuator saturation.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>", bound = "T: Scalar")]
pub struct SatLimits<T: Scalar> {
    v_max: Vec<T>,
}

impl<T: Scalar> TryFrom<Vec<T>> for SatLimits<T> {
    type Error = Error;
    fn try_from(v: Vec<T>) -> Result<Self> {
        SatLimits::new(v)
    }
}

impl<T: Scalar> From<SatLimits<T>> for Vec<T> {
    fn from(s: SatLimits<T>) -> Vec<T> {
        s.v_max
    }
}

impl<T: Scalar> SatLimits<T> {
    /// Limits may be `+∞` to disable a channel's clamp.
    pub fn new(v_max: Vec<T>) -> Result<Self> {
        if v_max.is_empty() || v_max.iter().any(|&v| v.is_nan() || v <= T::zero()) {
            return Err(Error::Domain("saturation limits must be strictly positive".into()));
        }
        Ok(Self { v_max })
    }

    pub fn unbounded(m: usize) -> Self {
        Self {
            v_max: vec![T::infinity(); m],
        }
    }

    pub fn limits(&self) -> &[T] {
        &self.v_max
    }

    pub fn dim(&self) -> usize {
        self.v_max.len()
    }

    pub fn v_min(&self) -> T {
        self.v_max.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn v_bar_max(&self) -> T {
        self.v_max.iter().copied().fold(T::zero(), T::max)
    }

    /// `sqrt(Σ v_i,max²)`.
    pub fn v0(&self) -> T {
        self.v_max.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    fn check(&self, v: &[T], op: &'static str) -> Result<()> {
        if v.len() != self.v_max.len() {
            return Err(dim_err(op, self.v_max.len(), v.len()));
        }
        Ok(())
    }
}

pub fn sat<T: Scalar>(v: &[T], lim: &SatLimits<T>) -> Result<Vec<T>> {
    lim.check(v, "sat")?;
    Ok(v.iter()
        .zip(&lim.v_max)
        .map(|(&vi, &m)| if vi.abs() <= m { vi } else { m.copysign(vi) })
        .collect())
}

/// `v − sat(v)`.
pub fn deficiency<T: Scalar>(v: &[T], lim: &SatLimits<T>) -> Result<Vec<T>> {
    let s = sat(v, lim)?;
    Ok(v.iter().zip(&s).map(|(&a, &b)| a - b).collect())
}

/// Splits `sat(v)` into the boundary point along `v`'s ray, `v_d = s·v`, and
/// the remainder `ṽ = sat(v) − v_d`. Interior `v` gives `(v, 0)`.
pub fn decompose<T: Scalar>(v: &[T], lim: &SatLimits<T>) -> Result<(Vec<T>, Vec<T>)> {
    let s_v = sat(v, lim)?;
    let s = v
        .iter()
        .zip(&lim.v_max)
        .filter(|(vi, _)| **vi != T::zero())
        .map(|(&vi, &m)| m / vi.abs())
        .fold(T::infinity(), T::min);
    if s >= T::one() {
        return Ok((v.to_vec(), vec![T::zero(); v.len()]));
    }
    let vd: Vec<T> = v.iter().map(|&vi| s * vi).collect();
    let vt = s_v.iter().zip(&vd).map(|(&a, &b)| a - b).collect();
    Ok((vd, vt))
}
