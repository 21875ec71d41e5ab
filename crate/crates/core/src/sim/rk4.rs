use crate::error::{Error, Result};

/// One classic four-stage Runge-Kutta step of `x' = f(t, x)`.
///
/// `field(t, x, dx)` writes the derivative into `dx`. A non-finite derivative
/// aborts the step with the offending state in the error message.
pub fn rk4_step<F>(mut field: F, x: &[f64], t: f64, dt: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    let check = |k: &[f64], at: &[f64], stage: usize| -> Result<()> {
        if k.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Divergence {
                t,
                message: format!("non-finite derivative in RK4 stage {stage} at state {at:?}"),
            })
        }
    };

    field(t, x, &mut k1);
    check(&k1, x, 1)?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k1[i];
    }
    field(t + 0.5 * dt, &tmp, &mut k2);
    check(&k2, &tmp, 2)?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k2[i];
    }
    field(t + 0.5 * dt, &tmp, &mut k3);
    check(&k3, &tmp, 3)?;
    for i in 0..n {
        tmp[i] = x[i] + dt * k3[i];
    }
    field(t + dt, &tmp, &mut k4);
    check(&k4, &tmp, 4)?;

    Ok((0..n)
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}
