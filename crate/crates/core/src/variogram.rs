//! Experimental semi-variograms of gridded data.
//!
//! For a target distance `r` and tolerance `ε`, the estimate averages
//! `½ (z(xᵢ) − z(xⱼ))²` over all ordered pairs `(i, j)` whose separation lies
//! in `[r − ε, r + ε]`. On a regular grid every pair is an offset vector
//! applied to a node, so pairs are enumerated offset by offset.

use std::fmt::Write as _;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::mesh::Grid;
use crate::scalar::Scalar;
use crate::spectral::SpectralModel;

pub const DEFAULT_MAX_PAIRS: usize = 1_000_000;
pub const DEFAULT_HALF_WIDTH_DEG: f64 = 22.5;
const SUBSAMPLE_SEED: u64 = 0x005e_ed0f_9a17;

/// Angular sector: offsets whose orientation (modulo π) is within
/// `half_width` of `angle`. Both in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub angle: f64,
    pub half_width: f64,
}

impl Direction {
    pub fn new(angle: f64, half_width: f64) -> Result<Self> {
        if !angle.is_finite() || !(half_width > 0.0) || !half_width.is_finite() {
            return Err(invalid(format!("invalid direction {angle} ± {half_width}")));
        }
        Ok(Self { angle, half_width })
    }

    /// Direction with the default half-width of 22.5°.
    pub fn along(angle: f64) -> Self {
        Self { angle, half_width: DEFAULT_HALF_WIDTH_DEG.to_radians() }
    }

    fn contains(&self, vx: f64, vy: f64) -> bool {
        if vx == 0.0 && vy == 0.0 {
            return false;
        }
        let pi = std::f64::consts::PI;
        let d = (vy.atan2(vx) - self.angle).rem_euclid(pi);
        d.min(pi - d) <= self.half_width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariogramEstimate {
    pub lags: Vec<f64>,
    pub tolerance: f64,
    /// `None` where no pair fell in the lag band.
    pub values: Vec<Option<f64>>,
    pub pair_counts: Vec<usize>,
}

impl VariogramEstimate {
    /// `lag,gamma,npairs` rows; empty lags are written as `nan`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lag,gamma,npairs\n");
        for ((lag, v), n) in self.lags.iter().zip(&self.values).zip(&self.pair_counts) {
            match v {
                Some(g) => writeln!(s, "{lag},{g},{n}").unwrap(),
                None => writeln!(s, "{lag},nan,{n}").unwrap(),
            }
        }
        s
    }
}

/// Semi-variogram estimate of `data` on `grid` at each lag.
pub fn experimental_variogram<T: Scalar>(
    data: &[T],
    grid: &Grid<T>,
    lags: &[f64],
    eps: f64,
    direction: Option<Direction>,
    max_pairs: Option<usize>,
) -> Result<VariogramEstimate> {
    if lags.is_empty() {
        return Err(invalid("no lags given"));
    }
    if lags.iter().any(|l| !(l.is_finite() && *l >= 0.0)) || lags.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("lags must be finite, non-negative and strictly increasing"));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(invalid(format!("tolerance must be positive, got {eps}")));
    }
    if data.len() != grid.len() {
        return Err(invalid(format!("data has {} values, grid has {} nodes", data.len(), grid.len())));
    }
    if max_pairs == Some(0) {
        return Err(invalid("max_pairs must be at least 1"));
    }
    let cap = max_pairs.unwrap_or(DEFAULT_MAX_PAIRS);
    let z: Vec<f64> = data.iter().map(|v| v.as_f64()).collect();
    let results: Vec<(Option<f64>, usize)> = lags
        .par_iter()
        .enumerate()
        .map(|(k, &r)| lag_estimate(&z, grid, r, eps, direction, cap, k as u64))
        .collect();
    Ok(VariogramEstimate {
        lags: lags.to_vec(),
        tolerance: eps,
        values: results.iter().map(|r| r.0).collect(),
        pair_counts: results.iter().map(|r| r.1).collect(),
    })
}

fn lag_estimate<T: Scalar>(
    z: &[f64],
    grid: &Grid<T>,
    r: f64,
    eps: f64,
    direction: Option<Direction>,
    cap: usize,
    lag_index: u64,
) -> (Option<f64>, usize) {
    let (nx, ny) = (grid.nx as i64, grid.ny as i64);
    let (dx, dy) = (grid.dx.as_f64(), grid.dy.as_f64());
    let (lo, hi) = (r - eps, r + eps);
    let mut offsets: Vec<(i64, i64, usize)> = Vec::new();
    let max_di = ((hi / dx).floor() as i64).min(nx - 1);
    let max_dj = ((hi / dy).floor() as i64).min(ny - 1);
    for dj in -max_dj..=max_dj {
        for di in -max_di..=max_di {
            let (vx, vy) = (di as f64 * dx, dj as f64 * dy);
            let d = vx.hypot(vy);
            if d < lo || d > hi {
                continue;
            }
            if let Some(dir) = direction {
                if !dir.contains(vx, vy) {
                    continue;
                }
            }
            let count = ((nx - di.abs()) * (ny - dj.abs())) as usize;
            offsets.push((di, dj, count));
        }
    }
    let total: usize = offsets.iter().map(|o| o.2).sum();
    if total == 0 {
        return (None, 0);
    }
    let stride = total.div_ceil(cap);
    if stride > 1 {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(SUBSAMPLE_SEED ^ lag_index);
        offsets.shuffle(&mut rng);
    }
    let mut sum = 0.0;
    let mut taken = 0usize;
    // Global index of the first pair of the current offset.
    let mut base = 0usize;
    for &(di, dj, count) in &offsets {
        let w = (nx - di.abs()) as usize;
        let i0 = (-di).max(0);
        let j0 = (-dj).max(0);
        let mut local = (stride - base % stride) % stride;
        while local < count {
            let i = i0 + (local % w) as i64;
            let j = j0 + (local / w) as i64;
            let a = (j * nx + i) as usize;
            let b = ((j + dj) * nx + i + di) as usize;
            let diff = z[a] - z[b];
            sum += diff * diff;
            taken += 1;
            local += stride;
        }
        base += count;
    }
    (Some(sum / (2.0 * taken as f64)), taken)
}

/// `γ(r) = C₀(0) − C₀(r)` of a catalog model.
pub fn model_semivariogram(model: &SpectralModel, r: f64) -> Result<f64> {
    model.semivariogram(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krige::standard_normals;
    use proptest::prelude::*;

    #[test]
    fn two_point_hand_example() {
        let g = Grid::new(2, 1, 1.0, 1.0).unwrap();
        let v = experimental_variogram(&[0.0, 2.0], &g, &[1.0], 0.1, None, None).unwrap();
        assert_eq!(v.values, vec![Some(2.0)]);
        assert_eq!(v.pair_counts, vec![2]);
    }

    #[test]
    fn constant_data_and_missing_lags() {
        let g = Grid::new(5, 4, 1.0, 1.0).unwrap();
        let v = experimental_variogram(&[3.5; 20], &g, &[1.0, 2.0, 50.0], 0.25, None, None).unwrap();
        assert_eq!(v.values, vec![Some(0.0), Some(0.0), None]);
        assert_eq!(v.pair_counts[2], 0);
        assert!(v.to_csv().ends_with("50,nan,0\n"));
    }

    #[test]
    fn ordered_pair_count() {
        let g = Grid::new(4, 3, 1.0, 1.0).unwrap();
        let v = experimental_variogram(&[0.0; 12], &g, &[1.0], 0.1, None, None).unwrap();
        // horizontal 3·3 + vertical 4·2 unordered neighbours, counted twice
        assert_eq!(v.pair_counts, vec![2 * (9 + 8)]);
        let v = experimental_variogram(&[0.0; 12], &g, &[1.0], 0.1, Some(Direction::along(0.0)), None).unwrap();
        assert_eq!(v.pair_counts, vec![18]);
    }

    #[test]
    fn rejects_bad_arguments() {
        let g = Grid::new(3, 3, 1.0, 1.0).unwrap();
        let d = [0.0; 9];
        assert!(experimental_variogram(&d, &g, &[], 0.5, None, None).is_err());
        assert!(experimental_variogram(&d, &g, &[1.0], 0.0, None, None).is_err());
        assert!(experimental_variogram(&d, &g, &[2.0, 1.0], 0.5, None, None).is_err());
        assert!(experimental_variogram(&d[..4], &g, &[1.0], 0.5, None, None).is_err());
    }

    #[test]
    fn nugget_plateau() {
        let g = Grid::new(50, 50, 1.0, 1.0).unwrap();
        let z: Vec<f64> = standard_normals(2500, 77, 0);
        let lags: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        let v = experimental_variogram(&z, &g, &lags, 0.5, None, None).unwrap();
        for val in v.values {
            let val = val.unwrap();
            assert!((val - 1.0).abs() <= 0.05, "{val}");
        }
    }

    #[test]
    fn subsampling_is_deterministic_and_capped() {
        let g = Grid::new(30, 30, 1.0, 1.0).unwrap();
        let z: Vec<f64> = standard_normals(900, 1, 0);
        let a = experimental_variogram(&z, &g, &[5.0, 10.0], 1.0, None, Some(1000)).unwrap();
        let b = experimental_variogram(&z, &g, &[5.0, 10.0], 1.0, None, Some(1000)).unwrap();
        assert_eq!(a, b);
        assert!(a.pair_counts.iter().all(|&n| n <= 1000 && n > 500));
        let full = experimental_variogram(&z, &g, &[5.0, 10.0], 1.0, None, None).unwrap();
        for (s, f) in a.values.iter().zip(&full.values) {
            assert!((s.unwrap() - f.unwrap()).abs() < 0.2);
        }
    }

    #[test]
    fn direction_wraps_modulo_pi() {
        let d = Direction::along(std::f64::consts::FRAC_PI_2);
        assert!(d.contains(0.0, 1.0));
        assert!(d.contains(0.0, -1.0));
        assert!(!d.contains(1.0, 0.0));
        assert!(Direction::along(0.1).contains(-1.0, 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn shift_invariance_and_scaling(seed in 0u64..500, shift in -100.0f64..100.0, alpha in 0.1f64..10.0) {
            let g = Grid::new(9, 7, 1.0, 0.5).unwrap();
            let z: Vec<f64> = standard_normals(63, seed, 0);
            let lags = [0.5, 1.0, 2.0, 3.0];
            let base = experimental_variogram(&z, &g, &lags, 0.25, None, None).unwrap();
            let shifted: Vec<f64> = z.iter().map(|v| v + shift).collect();
            let scaled: Vec<f64> = z.iter().map(|v| alpha * v).collect();
            let s = experimental_variogram(&shifted, &g, &lags, 0.25, None, None).unwrap();
            let a = experimental_variogram(&scaled, &g, &lags, 0.25, None, None).unwrap();
            for k in 0..lags.len() {
                let b = base.values[k].unwrap();
                prop_assert!(b >= 0.0);
                prop_assert!((s.values[k].unwrap() - b).abs() <= 1e-10 * b.max(1.0));
                prop_assert!((a.values[k].unwrap() - alpha * alpha * b).abs() <= 1e-10 * alpha * alpha * b.max(1e-300));
            }
        }
    }
}
