use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn checked<T: Scalar>(d: Vec<T>, t: T, n: usize) -> Result<Vec<T>> {
    if d.len() != n {
        return Err(crate::error::dim_err("rk4_step", n, d.len()));
    }
    match d.iter().position(|v| !v.is_finite()) {
        Some(component) => Err(Error::Integration { t: t.as_f64(), component }),
        None => Ok(d),
    }
}

/// Classical four-stage Runge-Kutta step of `ẏ = f(t, y)`.
pub fn rk4_step<T, F>(mut f: F, t: T, y: &[T], dt: T) -> Result<Vec<T>>
where
    T: Scalar,
    F: FnMut(T, &[T]) -> Result<Vec<T>>,
{
    if !(dt > T::zero()) {
        return Err(Error::Domain(format!("step size must be positive, got {dt}")));
    }
    let n = y.len();
    let half = dt / T::lit(2.0);
    let shift = |k: &[T], h: T| -> Vec<T> { y.iter().zip(k).map(|(&a, &b)| a + h * b).collect() };
    let k1 = checked(f(t, y)?, t, n)?;
    let k2 = checked(f(t + half, &shift(&k1, half))?, t + half, n)?;
    let k3 = checked(f(t + half, &shift(&k2, half))?, t + half, n)?;
    let k4 = checked(f(t + dt, &shift(&k3, dt))?, t + dt, n)?;
    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    Ok((0..n)
        .map(|i| y[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
        .collect())
}
