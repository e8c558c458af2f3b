use super::DynamicsError;

/// One classical fourth-order Runge-Kutta step of `x' = deriv(x)`.
///
/// Angle wrapping is left to the typed wrappers since only they know which
/// components are angles.
pub fn rk4_step<const N: usize, F>(
    mut deriv: F,
    x: &[f64; N],
    dt: f64,
) -> Result<[f64; N], DynamicsError>
where
    F: FnMut(&[f64; N]) -> Result<[f64; N], DynamicsError>,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    let offset = |base: &[f64; N], k: &[f64; N], h: f64| {
        let mut out = *base;
        for (o, ki) in out.iter_mut().zip(k) {
            *o += h * ki;
        }
        out
    };
    let check = |v: &[f64; N], stage: usize| {
        if v.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(DynamicsError::NonFinite { stage })
        }
    };

    let k1 = deriv(x)?;
    check(&k1, 1)?;
    let k2 = deriv(&offset(x, &k1, 0.5 * dt))?;
    check(&k2, 2)?;
    let k3 = deriv(&offset(x, &k2, 0.5 * dt))?;
    check(&k3, 3)?;
    let k4 = deriv(&offset(x, &k3, dt))?;
    check(&k4, 4)?;

    let mut next = *x;
    for i in 0..N {
        next[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    check(&next, 5)?;
    Ok(next)
}
