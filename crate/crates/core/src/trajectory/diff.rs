use crate::error::{Error, Result};

/// Finite-difference derivative: central at interior points, second-order
/// one-sided at both ends. Output length equals input length.
pub fn differentiate(series: &[f64], dt: f64) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 3 {
        return Err(Error::invalid(format!("differentiate needs at least 3 samples, got {n}")));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let mut out = Vec::with_capacity(n);
    out.push((-3.0 * series[0] + 4.0 * series[1] - series[2]) / (2.0 * dt));
    out.extend(series.windows(3).map(|w| (w[2] - w[0]) / (2.0 * dt)));
    out.push((3.0 * series[n - 1] - 4.0 * series[n - 2] + series[n - 3]) / (2.0 * dt));
    Ok(out)
}

/// Trapezoidal running integral starting at `initial`.
pub fn cumulative_integrate(series: &[f64], dt: f64, initial: f64) -> Vec<f64> {
    let mut acc = initial;
    let mut out = Vec::with_capacity(series.len());
    for (i, &v) in series.iter().enumerate() {
        if i > 0 {
            acc += 0.5 * (series[i - 1] + v) * dt;
        }
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linear_ramp_gives_unit_accel() {
        let v: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let a = differentiate(&v, 0.1).unwrap();
        assert_eq!(a.len(), v.len());
        assert!(a.iter().all(|x| (x - 1.0).abs() < 1e-9));
    }

    #[test]
    fn constant_gives_zero() {
        let a = differentiate(&[3.5; 12], 0.1).unwrap();
        assert!(a.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn quadratic_interior_is_exact() {
        // d/dt t^2 = 2t; central differences are exact for quadratics
        let dt = 0.1;
        let v: Vec<f64> = (0..50).map(|i| (i as f64 * dt).powi(2)).collect();
        let a = differentiate(&v, dt).unwrap();
        for i in 1..49 {
            let t = i as f64 * dt;
            assert!((a[i] - 2.0 * t).abs() < 1e-9, "i={i}: {} vs {}", a[i], 2.0 * t);
        }
        // second-order one-sided ends are exact for quadratics too
        assert!(a[0].abs() < 1e-9);
        assert!((a[49] - 2.0 * 4.9).abs() < 1e-9);
    }

    #[test]
    fn too_short_is_error() {
        assert!(differentiate(&[1.0, 2.0], 0.1).is_err());
        assert!(differentiate(&[1.0, 2.0, 3.0], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn derivative_of_integral_recovers_signal(
            a in -3.0f64..3.0, w in 0.2f64..2.0, phase in 0.0f64..6.0,
        ) {
            let dt = 0.01;
            let f: Vec<f64> = (0..400).map(|i| a * (w * i as f64 * dt + phase).sin()).collect();
            let integ = cumulative_integrate(&f, dt, 0.0);
            let back = differentiate(&integ, dt).unwrap();
            // O(dt^2) with the bound scaled by the third derivative magnitude
            let bound = 2.0 * a.abs() * w * w * dt * dt + 1e-9;
            for i in 1..f.len() - 1 {
                prop_assert!((back[i] - f[i]).abs() <= bound,
                    "i={} err={} bound={}", i, (back[i] - f[i]).abs(), bound);
            }
        }
    }
}
