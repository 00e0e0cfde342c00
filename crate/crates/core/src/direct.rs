//! DIRECT (DIviding RECTangles) global minimization over a box.
//!
//! The search runs on the unit cube. Every rectangle is sampled at its center
//! and has sides `3^-level`. Each iteration picks the potentially optimal
//! rectangles (lower-right convex hull of `(diameter, f)` with the
//! epsilon-improvement test) and trisects them along their longest sides,
//! best-valued dimension first. Deterministic: no randomness, ties broken by
//! creation index.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value substituted for NaN or infinite objective values.
pub const NON_FINITE_PENALTY: f64 = 1e100;

/// Absolute floor of the improvement slack when epsilon is positive.
pub const EPSILON_FLOOR: f64 = 1e-8;

/// Rectangles this deep are below f64 resolution and are not split again.
const MAX_LEVEL: u32 = 33;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_evals: usize,
    /// Relative slack of the potential-optimality test.
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { max_evals: 2000, epsilon: 1e-4 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_evals < 1 {
            return Err(Error::invalid("max_evals must be at least 1"));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// A rectangle of the unit-cube partition.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperRect {
    pub center: Vec<f64>,
    /// Side along dimension `i` is `3^-levels[i]`.
    pub levels: Vec<u32>,
    pub f_center: f64,
    /// Euclidean norm of the half sides.
    pub diameter: f64,
    /// Creation order; breaks ties.
    pub index: usize,
}

impl HyperRect {
    pub fn new(center: Vec<f64>, levels: Vec<u32>, f_center: f64, index: usize) -> Self {
        let diameter = diameter_of(&levels);
        HyperRect { center, levels, f_center, diameter, index }
    }

    pub fn half_sides(&self) -> Vec<f64> {
        self.levels.iter().map(|&l| 0.5 * side(l)).collect()
    }

    pub fn volume(&self) -> f64 {
        self.levels.iter().map(|&l| side(l)).product()
    }

    fn min_level(&self) -> u32 {
        self.levels.iter().copied().min().unwrap_or(0)
    }

    fn divisible(&self) -> bool {
        self.min_level() < MAX_LEVEL
    }
}

fn side(level: u32) -> f64 {
    3f64.powi(-(level as i32))
}

/// Computed from sorted levels so equal level multisets give bit-identical
/// diameters.
fn diameter_of(levels: &[u32]) -> f64 {
    let mut sorted = levels.to_vec();
    sorted.sort_unstable();
    sorted.iter().map(|&l| (0.5 * side(l)).powi(2)).sum::<f64>().sqrt()
}

/// Improvement slack `epsilon * |f_min|`, floored at [`EPSILON_FLOOR`].
pub fn improvement_slack(f_min: f64, epsilon: f64) -> f64 {
    if epsilon == 0.0 {
        0.0
    } else {
        (epsilon * f_min.abs()).max(EPSILON_FLOOR)
    }
}

/// Positions (into `rects`) of the potentially optimal rectangles.
///
/// A rectangle qualifies when some `K >= 0` makes `f - K d` minimal over all
/// rectangles and `f - K d <= f_min - slack`. Among rectangles sharing a
/// diameter only the lowest `f` (then lowest creation index) can qualify.
/// The result is ordered by increasing diameter.
pub fn select_potentially_optimal(rects: &[HyperRect], f_min: f64, epsilon: f64) -> Vec<usize> {
    if rects.is_empty() {
        return Vec::new();
    }
    // best representative per distinct diameter
    let mut order: Vec<usize> = (0..rects.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&rects[a], &rects[b]);
        ra.diameter
            .total_cmp(&rb.diameter)
            .then(ra.f_center.total_cmp(&rb.f_center))
            .then(ra.index.cmp(&rb.index))
    });
    let mut reps: Vec<usize> = Vec::new();
    for &i in &order {
        match reps.last() {
            Some(&j) if rects[j].diameter == rects[i].diameter => {}
            _ => reps.push(i),
        }
    }

    // start at the smallest-diameter representative holding the lowest f
    let lowest = reps.iter().map(|&i| rects[i].f_center).fold(f64::INFINITY, f64::min);
    let start = reps.iter().position(|&i| rects[i].f_center == lowest).expect("nonempty");

    // lower convex hull from there to the largest diameter, keeping collinear points
    let pt = |i: usize| (rects[i].diameter, rects[i].f_center);
    let mut hull: Vec<usize> = Vec::new();
    for &i in &reps[start..] {
        while hull.len() >= 2 {
            let (o, a, b) = (pt(hull[hull.len() - 2]), pt(hull[hull.len() - 1]), pt(i));
            let cross = (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
            if cross < 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }

    let threshold = f_min - improvement_slack(f_min, epsilon);
    let mut out = Vec::with_capacity(hull.len());
    for (k, &i) in hull.iter().enumerate() {
        let (d, f) = pt(i);
        let ok = match hull.get(k + 1) {
            None => true,
            Some(&next) => {
                let (dn, fn_) = pt(next);
                let k_hi = (fn_ - f) / (dn - d);
                f - k_hi * d <= threshold
            }
        };
        if ok {
            out.push(i);
        }
    }
    out
}

/// Splits `rect` along all its longest sides.
///
/// Samples `center ± side/3` along each longest dimension, then divides in
/// order of the better of the two samples (ties by dimension). Returns the
/// shrunken parent (same index) followed by the `2k` new rectangles.
pub fn trisect<F: FnMut(&[f64]) -> f64>(
    rect: &HyperRect,
    objective: &mut F,
    next_index: &mut usize,
) -> Vec<HyperRect> {
    let lmin = rect.min_level();
    let long: Vec<usize> = (0..rect.levels.len()).filter(|&i| rect.levels[i] == lmin).collect();
    let delta = side(lmin + 1);

    let mut samples = Vec::with_capacity(long.len());
    for &dim in &long {
        let mut lo = rect.center.clone();
        lo[dim] -= delta;
        let mut hi = rect.center.clone();
        hi[dim] += delta;
        let f_lo = objective(&lo);
        let f_hi = objective(&hi);
        samples.push((dim, lo, f_lo, hi, f_hi));
    }
    samples.sort_by(|a, b| {
        let wa = a.2.min(a.4);
        let wb = b.2.min(b.4);
        wa.partial_cmp(&wb).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0))
    });

    let mut levels = rect.levels.clone();
    let mut children = Vec::with_capacity(2 * long.len() + 1);
    children.push(HyperRect::new(rect.center.clone(), Vec::new(), rect.f_center, rect.index));
    for (dim, lo, f_lo, hi, f_hi) in samples {
        levels[dim] += 1;
        for (c, f) in [(lo, f_lo), (hi, f_hi)] {
            children.push(HyperRect::new(c, levels.clone(), f, *next_index));
            *next_index += 1;
        }
    }
    children[0] = HyperRect::new(rect.center.clone(), levels, rect.f_center, rect.index);
    children
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    /// Best point in the original coordinates.
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub iterations: usize,
}

/// Minimizes `objective` over the box `bounds` (`(lo, hi)` per dimension).
///
/// The first evaluation is the box center. Non-finite objective values count
/// as [`NON_FINITE_PENALTY`]. Stops once `max_evals` is reached (a started
/// trisection may overshoot by at most `2 * dim` evaluations) or when no
/// rectangle can be divided further.
pub fn minimize<F: FnMut(&[f64]) -> f64>(
    mut objective: F,
    bounds: &[(f64, f64)],
    config: &OptimizerConfig,
) -> Result<Minimum> {
    config.validate()?;
    if bounds.is_empty() {
        return Err(Error::invalid("minimize needs at least one dimension"));
    }
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("invalid bounds [{lo}, {hi}] in dimension {i}")));
        }
    }
    let n = bounds.len();
    let denorm = |u: &[f64]| -> Vec<f64> {
        u.iter().zip(bounds).map(|(u, &(lo, hi))| lo + u * (hi - lo)).collect()
    };

    let mut evals = 0usize;
    let mut best_f = f64::INFINITY;
    let mut best_u: Vec<f64> = vec![0.5; n];
    let mut eval = |u: &[f64]| -> f64 {
        let f = objective(&denorm(u));
        let f = if f.is_finite() { f } else { NON_FINITE_PENALTY };
        evals += 1;
        if f < best_f {
            best_f = f;
            best_u = u.to_vec();
        }
        f
    };

    let center = vec![0.5; n];
    let f0 = eval(&center);
    let mut next_index = 1;
    let mut rects = vec![HyperRect::new(center, vec![0; n], f0, 0)];
    let mut iterations = 0;

    // `eval` borrows the counters mutably, so track the count alongside it
    let mut used = 1usize;
    while used < config.max_evals {
        let f_min = rects.iter().map(|r| r.f_center).fold(f64::INFINITY, f64::min);
        let selected = select_potentially_optimal(&rects, f_min, config.epsilon);
        let mut divided = false;
        for pos in selected {
            if used >= config.max_evals {
                break;
            }
            if !rects[pos].divisible() {
                continue;
            }
            let parent = rects[pos].clone();
            let mut children = trisect(&parent, &mut eval, &mut next_index);
            used += children.len() - 1;
            let rest = children.split_off(1);
            rects[pos] = children.pop().expect("parent");
            rects.extend(rest);
            divided = true;
        }
        iterations += 1;
        if !divided {
            break;
        }
    }

    Ok(Minimum { x: denorm(&best_u), f: best_f, evals, iterations })
}

/// Reference test problems and a dense-grid search, used by the self-test.
pub mod benchmarks {
    /// `sum (x_i - 0.3)^2`.
    pub fn shifted_sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| (v - 0.3).powi(2)).sum()
    }

    /// `sum sin(5 x_i) + (x_i - 0.5)^2`, separable and multimodal.
    pub fn sine_bowl(x: &[f64]) -> f64 {
        x.iter().map(|&v| (5.0 * v).sin() + (v - 0.5).powi(2)).sum()
    }

    /// Minimum of `f` over a regular grid with `points` nodes per dimension
    /// (endpoints included).
    pub fn grid_minimum(f: impl Fn(&[f64]) -> f64, bounds: &[(f64, f64)], points: usize) -> f64 {
        let n = bounds.len();
        let mut idx = vec![0usize; n];
        let mut x = vec![0.0; n];
        let mut best = f64::INFINITY;
        loop {
            for d in 0..n {
                let (lo, hi) = bounds[d];
                x[d] = lo + (hi - lo) * idx[d] as f64 / (points - 1) as f64;
            }
            best = best.min(f(&x));
            let mut d = 0;
            loop {
                if d == n {
                    return best;
                }
                idx[d] += 1;
                if idx[d] < points {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rect(d_level: u32, f: f64, index: usize) -> HyperRect {
        HyperRect::new(vec![0.5, 0.5], vec![d_level, d_level], f, index)
    }

    /// O(n^2) scan: for each rectangle, intersect the K-intervals implied by
    /// every other rectangle and the improvement condition.
    fn brute_force(rects: &[HyperRect], f_min: f64, eps: f64) -> Vec<usize> {
        let slack = improvement_slack(f_min, eps);
        let mut out = Vec::new();
        for (j, r) in rects.iter().enumerate() {
            let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
            let mut ok = true;
            for (i, q) in rects.iter().enumerate() {
                if i == j {
                    continue;
                }
                if q.diameter < r.diameter {
                    lo = lo.max((r.f_center - q.f_center) / (r.diameter - q.diameter));
                } else if q.diameter > r.diameter {
                    hi = hi.min((q.f_center - r.f_center) / (q.diameter - r.diameter));
                } else if q.f_center < r.f_center
                    || (q.f_center == r.f_center && q.index < r.index)
                {
                    ok = false;
                }
            }
            if !ok || lo > hi {
                continue;
            }
            // the improvement test is easiest at the largest admissible K
            let passes = hi.is_infinite() || r.f_center - hi * r.diameter <= f_min - slack;
            if passes {
                out.push(j);
            }
        }
        out
    }

    #[test]
    fn single_rectangle_selects_itself() {
        let rs = vec![rect(0, 3.0, 0)];
        assert_eq!(select_potentially_optimal(&rs, 3.0, 1e-4), vec![0]);
    }

    #[test]
    fn equal_diameter_keeps_lower_f() {
        let rs = vec![rect(1, 2.0, 0), rect(1, 1.0, 1)];
        assert_eq!(select_potentially_optimal(&rs, 1.0, 1e-4), vec![1]);
        // tie on f: lower creation index
        let rs = vec![rect(1, 1.0, 4), rect(1, 1.0, 2)];
        assert_eq!(select_potentially_optimal(&rs, 1.0, 1e-4), vec![1]);
    }

    #[test]
    fn random_clouds_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..200 {
            let n = 50;
            let rs: Vec<HyperRect> = (0..n)
                .map(|i| {
                    let levels = vec![rng.random_range(0..5), rng.random_range(0..5)];
                    let f = rng.random_range(-2.0..2.0);
                    HyperRect::new(vec![0.5, 0.5], levels, f, i)
                })
                .collect();
            let f_min = rs.iter().map(|r| r.f_center).fold(f64::INFINITY, f64::min);
            for eps in [0.0, 1e-4, 1e-2] {
                let mut fast = select_potentially_optimal(&rs, f_min, eps);
                fast.sort_unstable();
                assert_eq!(fast, brute_force(&rs, f_min, eps), "trial {trial} eps {eps}");
            }
        }
    }

    #[test]
    fn largest_diameter_minimum_always_selected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let rs: Vec<HyperRect> = (0..30)
                .map(|i| {
                    let l = rng.random_range(0..4);
                    HyperRect::new(vec![0.5], vec![l], rng.random_range(0.0..1.0), i)
                })
                .collect();
            let f_min = rs.iter().map(|r| r.f_center).fold(f64::INFINITY, f64::min);
            let dmax = rs.iter().map(|r| r.diameter).fold(0.0, f64::max);
            let top = (0..rs.len())
                .filter(|&i| rs[i].diameter == dmax)
                .min_by(|&a, &b| rs[a].f_center.total_cmp(&rs[b].f_center))
                .unwrap();
            assert!(select_potentially_optimal(&rs, f_min, 1e-4).contains(&top));
        }
    }

    #[test]
    fn trisect_unit_square() {
        let r = HyperRect::new(vec![0.5, 0.5], vec![0, 0], 1.0, 0);
        let mut next = 1;
        let kids = trisect(&r, &mut |x: &[f64]| x[0] + 10.0 * x[1], &mut next);
        assert_eq!(kids.len(), 5);
        let area: f64 = kids.iter().map(HyperRect::volume).sum();
        assert!((area - 1.0).abs() < 1e-15);
        // dimension 1 holds the better sample, so it is split first
        assert_eq!(kids[1].levels, vec![0, 1]);
        assert_eq!(kids[3].levels, vec![1, 1]);
        assert_eq!(kids[0].levels, vec![1, 1]);
        assert_eq!(kids[0].index, 0);
        assert_eq!(next, 5);
    }

    #[test]
    fn trisect_interval_and_asymmetric() {
        let r = HyperRect::new(vec![0.5], vec![0], 0.0, 0);
        let kids = trisect(&r, &mut |x: &[f64]| x[0], &mut 1);
        assert_eq!(kids.len(), 3);
        assert!(kids.iter().all(|k| (k.volume() - 1.0 / 3.0).abs() < 1e-15));

        let r = HyperRect::new(vec![0.5, 0.5, 0.5], vec![1, 0, 1], 0.0, 0);
        let kids = trisect(&r, &mut |x: &[f64]| x.iter().sum(), &mut 1);
        assert_eq!(kids.len(), 3);
        for k in &kids {
            assert_eq!(k.levels, vec![1, 1, 1]);
        }
    }

    #[test]
    fn quadratic_2d() {
        let cfg = OptimizerConfig { max_evals: 500, epsilon: 1e-4 };
        let mut first = None;
        let m = minimize(
            |x| {
                first.get_or_insert_with(|| x.to_vec());
                benchmarks::shifted_sphere(x)
            },
            &[(0.0, 1.0), (0.0, 1.0)],
            &cfg,
        )
        .unwrap();
        assert_eq!(first.unwrap(), vec![0.5, 0.5]);
        assert!(m.f <= 1e-4, "{m:?}");
        assert!(m.evals <= 500 + 4);
        // dense-grid oracle: exact minimum 0 at (0.3, 0.3)
        let grid = benchmarks::grid_minimum(benchmarks::shifted_sphere, &[(0.0, 1.0); 2], 101);
        assert!(grid.abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs() {
        let cfg = OptimizerConfig::default();
        assert!(minimize(|_| 0.0, &[(1.0, 0.0)], &cfg).is_err());
        assert!(minimize(|_| 0.0, &[], &cfg).is_err());
        let bad = OptimizerConfig { max_evals: 0, epsilon: 0.0 };
        assert!(minimize(|_| 0.0, &[(0.0, 1.0)], &bad).is_err());
        let bad = OptimizerConfig { max_evals: 10, epsilon: -1.0 };
        assert!(minimize(|_| 0.0, &[(0.0, 1.0)], &bad).is_err());
    }

    #[test]
    fn non_finite_values_are_penalized() {
        let cfg = OptimizerConfig { max_evals: 200, epsilon: 1e-4 };
        let mut count = 0;
        let m = minimize(
            |x| {
                count += 1;
                if x[0] > 0.5 { f64::NAN } else { (x[0] - 0.2).powi(2) }
            },
            &[(0.0, 1.0)],
            &cfg,
        )
        .unwrap();
        assert_eq!(m.evals, count);
        assert!(m.f < 1e-4);
    }

    #[test]
    fn single_eval_budget_returns_center() {
        let cfg = OptimizerConfig { max_evals: 1, epsilon: 1e-4 };
        let m = minimize(|x| x[0] + x[1], &[(0.0, 2.0), (-1.0, 1.0)], &cfg).unwrap();
        assert_eq!(m.x, vec![1.0, 0.0]);
        assert_eq!(m.evals, 1);
    }

    /// Re-runs the main loop by hand to observe the partition after every
    /// iteration.
    fn partitions(f: impl Fn(&[f64]) -> f64, n: usize, iters: usize) -> Vec<Vec<HyperRect>> {
        let mut eval = |u: &[f64]| f(u);
        let mut rects = vec![HyperRect::new(vec![0.5; n], vec![0; n], f(&vec![0.5; n]), 0)];
        let mut next = 1;
        let mut out = Vec::new();
        for _ in 0..iters {
            let f_min = rects.iter().map(|r| r.f_center).fold(f64::INFINITY, f64::min);
            for pos in select_potentially_optimal(&rects, f_min, 1e-4) {
                let parent = rects[pos].clone();
                let mut kids = trisect(&parent, &mut eval, &mut next);
                let rest = kids.split_off(1);
                rects[pos] = kids.pop().unwrap();
                rects.extend(rest);
            }
            out.push(rects.clone());
        }
        out
    }

    #[test]
    fn partition_tiles_the_cube() {
        for parts in partitions(benchmarks::sine_bowl, 3, 15) {
            let vol: f64 = parts.iter().map(HyperRect::volume).sum();
            assert!((vol - 1.0).abs() < 1e-12, "{vol}");
            for r in &parts {
                for (h, &l) in r.half_sides().iter().zip(&r.levels) {
                    assert_eq!(*h, 0.5 * 3f64.powi(-(l as i32)));
                }
                for (c, h) in r.center.iter().zip(r.half_sides()) {
                    assert!(c - h >= -1e-12 && c + h <= 1.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn best_value_never_increases_with_budget() {
        let mut prev = f64::INFINITY;
        for budget in [1, 10, 50, 100, 300, 600] {
            let cfg = OptimizerConfig { max_evals: budget, epsilon: 1e-4 };
            let m = minimize(benchmarks::sine_bowl, &[(0.0, 5.0), (0.0, 10.0)], &cfg).unwrap();
            assert!(m.f <= prev);
            prev = m.f;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn deterministic_sequences(a in -1.0f64..1.0, b in 0.1f64..3.0, budget in 20usize..300) {
            let run = || {
                let mut seq = Vec::new();
                let m = minimize(
                    |x| {
                        seq.push(x.to_vec());
                        (x[0] - a).powi(2) + (b * x[1]).sin()
                    },
                    &[(-2.0, 2.0), (0.0, 4.0)],
                    &OptimizerConfig { max_evals: budget, epsilon: 1e-4 },
                )
                .unwrap();
                (seq, m)
            };
            let (s1, m1) = run();
            let (s2, m2) = run();
            prop_assert_eq!(s1, s2);
            prop_assert!(m1.evals <= budget + 4);
            prop_assert_eq!(m1, m2);
        }
    }
}
