use super::{Fix, TrajectorySegment};
use crate::error::{Error, Result};

/// 1 s window at 10 Hz.
pub const DEFAULT_WINDOW_SAMPLES: usize = 10;

/// Window length in samples for a window of `window_s` seconds.
pub fn window_samples_for(window_s: f64, dt: f64) -> usize {
    ((window_s / dt).round() as usize).max(1)
}

/// Centered moving average over indices `i - N/2 ..= i + N/2`.
///
/// Near the ends the half-width shrinks symmetrically to what is available,
/// so the first and last samples pass through unchanged and a linear series
/// is reproduced exactly. Each output is the arithmetic mean of its window.
pub fn moving_average(series: &[f64], window_samples: usize) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::invalid("moving_average on an empty series"));
    }
    if window_samples == 0 {
        return Err(Error::invalid("window_samples must be at least 1"));
    }
    let n = series.len();
    let half = window_samples / 2;

    // prefix sums keep this O(n)
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &z in series {
        acc += z;
        prefix.push(acc);
    }

    Ok((0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            if h == 0 {
                return series[i];
            }
            let (lo, hi) = (i - h, i + h);
            (prefix[hi + 1] - prefix[lo]) / (2 * h + 1) as f64
        })
        .collect())
}

/// Fills the smoothed follower (and, when every sample has one, leader)
/// columns from the raw columns.
pub fn smooth_segment(seg: &TrajectorySegment, window_samples: usize) -> Result<TrajectorySegment> {
    let mut out = seg.clone();
    let follower = smooth_fixes(seg.points.iter().map(|p| p.raw).collect(), window_samples)?;
    for (p, f) in out.points.iter_mut().zip(follower) {
        p.smoothed = Some(f);
    }
    if seg.has_lead() {
        let lead = seg.points.iter().map(|p| p.lead.expect("has_lead")).collect();
        for (p, f) in out.points.iter_mut().zip(smooth_fixes(lead, window_samples)?) {
            p.lead_smoothed = Some(f);
        }
    }
    Ok(out)
}

fn smooth_fixes(fixes: Vec<Fix>, window: usize) -> Result<Vec<Fix>> {
    let lat = moving_average(&fixes.iter().map(|f| f.lat).collect::<Vec<_>>(), window)?;
    let lon = moving_average(&fixes.iter().map(|f| f.lon).collect::<Vec<_>>(), window)?;
    let speed = moving_average(&fixes.iter().map(|f| f.speed).collect::<Vec<_>>(), window)?;
    Ok((0..fixes.len()).map(|i| Fix { lat: lat[i], lon: lon[i], speed: speed[i] }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent windowed mean with the same symmetric edge rule.
    fn brute_force(z: &[f64], i: usize, window: usize) -> f64 {
        let n = z.len() as isize;
        let mut h = (window / 2) as isize;
        let i = i as isize;
        while i - h < 0 || i + h >= n {
            h -= 1;
        }
        let vals: Vec<f64> = ((i - h)..=(i + h)).map(|k| z[k as usize]).collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    #[test]
    fn constant_unchanged() {
        let out = moving_average(&[5.0; 25], 10).unwrap();
        assert!(out.iter().all(|&x| (x - 5.0).abs() < 1e-12));
    }

    #[test]
    fn linear_ramp_unchanged() {
        let z: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let out = moving_average(&z, 10).unwrap();
        for (a, b) in out.iter().zip(&z) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_matches_eleven_point_interior_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = moving_average(&z, 10).unwrap();
        assert_eq!(out.len(), 30);
        for t in 5..25 {
            let expected: f64 = z[t - 5..=t + 5].iter().sum::<f64>() / 11.0;
            assert!((out[t] - expected).abs() < 1e-12, "t={t}");
        }
        for t in 0..30 {
            assert!((out[t] - brute_force(&z, t, 10)).abs() < 1e-12);
        }
        assert_eq!(out[0], z[0]);
        assert_eq!(out[29], z[29]);
    }

    #[test]
    fn window_one_is_identity_and_empty_is_error() {
        let z = [1.0, 4.0, 2.0];
        assert_eq!(moving_average(&z, 1).unwrap(), z.to_vec());
        assert!(moving_average(&[], 10).is_err());
        assert!(moving_average(&z, 0).is_err());
    }

    #[test]
    fn window_seconds_to_samples() {
        assert_eq!(window_samples_for(1.0, 0.1), 10);
        assert_eq!(window_samples_for(0.01, 0.1), 1);
    }

    proptest! {
        #[test]
        fn matches_brute_force(z in prop::collection::vec(-100.0f64..100.0, 1..80), w in 1usize..16) {
            let out = moving_average(&z, w).unwrap();
            prop_assert_eq!(out.len(), z.len());
            for i in 0..z.len() {
                prop_assert!((out[i] - brute_force(&z, i, w)).abs() < 1e-9);
            }
        }

        #[test]
        fn idempotent_on_constants(c in -50.0f64..50.0, n in 1usize..60) {
            let z = vec![c; n];
            let once = moving_average(&z, 10).unwrap();
            let twice = moving_average(&once, 10).unwrap();
            for x in twice {
                prop_assert!((x - c).abs() < 1e-9);
            }
        }
    }
}
