//! Special functions and quadrature used by the covariance catalog.
//!
//! Everything here works in `f64`.

use crate::error::{Error, Result};

/// `ln K_ν(x)` for `x > 0`, `ν ≥ 0`, from `K_ν(x) = ∫₀^∞ e^{−x cosh t} cosh(νt) dt`.
///
/// The integrand is analytic in a strip around the real axis, so the
/// trapezoidal rule converges geometrically; it is summed in log space to
/// survive large orders and tiny arguments.
pub fn ln_bessel_k(nu: f64, x: f64) -> f64 {
    debug_assert!(x > 0.0 && nu >= 0.0);
    const STEP: f64 = 0.02;
    let ln_f = |t: f64| -> f64 {
        // ln cosh(νt) = νt + ln((1 + e^{−2νt}) / 2)
        -x * t.cosh() + nu * t + (0.5 * (1.0 + (-2.0 * nu * t).exp())).ln()
    };
    let mut samples = Vec::with_capacity(256);
    let mut peak = f64::NEG_INFINITY;
    let mut k = 0usize;
    loop {
        let t = k as f64 * STEP;
        let v = ln_f(t);
        peak = peak.max(v);
        samples.push(v);
        // Past the maximum and 45 e-folds below it: the tail is negligible.
        if v < peak - 45.0 && k > 0 && v < samples[k - 1] {
            break;
        }
        k += 1;
    }
    let mut sum = 0.5 * (samples[0] - peak).exp();
    for &v in &samples[1..] {
        sum += (v - peak).exp();
    }
    peak + (sum * STEP).ln()
}

/// `K_ν(x)` for `x > 0`.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    ln_bessel_k(nu.abs(), x).exp()
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn bessel_j0(x: f64) -> f64 {
    libm::j0(x)
}

/// Matérn correlation `r^ν K_ν(r) / (2^{ν−1} Γ(ν))`, equal to 1 at `r = 0`.
pub fn matern_correlation(nu: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return 1.0;
    }
    let ln = nu * r.ln() + ln_bessel_k(nu, r) - (nu - 1.0) * std::f64::consts::LN_2 - ln_gamma(nu);
    ln.exp().min(1.0)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel: (estimate, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive Gauss–Kronrod quadrature on a finite interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    const MAX_PANELS: usize = 4000;
    let mut panels = vec![{
        let (v, e) = gk15(&f, a, b);
        (a, b, v, e)
    }];
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::NumericalFailure {
                message: "non-finite integrand".into(),
                diagnostics: format!("interval [{a}, {b}]"),
            });
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::NumericalFailure {
                message: "adaptive quadrature did not converge".into(),
                diagnostics: format!("interval [{a}, {b}], estimate {total:e}, error {err:e}, {} panels", panels.len()),
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(k, _)| k)
            .unwrap();
        let (pa, pb, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (pa + pb);
        let (v1, e1) = gk15(&f, pa, mid);
        let (v2, e2) = gk15(&f, mid, pb);
        panels.push((pa, mid, v1, e1));
        panels.push((mid, pb, v2, e2));
    }
}

/// Wynn's ε-algorithm: best extrapolated limit of a sequence of partial sums.
pub fn wynn_epsilon(partial_sums: &[f64]) -> f64 {
    let n = partial_sums.len();
    if n < 3 {
        return *partial_sums.last().unwrap_or(&0.0);
    }
    // prev = ε_{k−1} column, cur = ε_k column.
    let mut prev = vec![0.0; n + 1];
    let mut cur: Vec<f64> = partial_sums.to_vec();
    let mut best = *partial_sums.last().unwrap();
    let mut k = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let diff = cur[i + 1] - cur[i];
            let inv = if diff == 0.0 { f64::INFINITY } else { 1.0 / diff };
            next.push(prev[i + 1] + inv);
        }
        k += 1;
        // Even columns hold the extrapolants.
        if k % 2 == 0 {
            if let Some(&v) = next.last() {
                if v.is_finite() {
                    best = v;
                }
            }
        }
        prev = cur;
        cur = next;
    }
    best
}

/// `∫₀^∞ f(s) J₀(r s) ds` by integration between consecutive zeros of
/// `J₀(r·)` and ε-extrapolation of the alternating partial sums.
pub fn oscillatory_j0_integral<F: Fn(f64) -> f64>(f: F, r: f64, tol: f64) -> Result<f64> {
    debug_assert!(r > 0.0);
    const MAX_PANELS: usize = 400;
    const MIN_PANELS: usize = 12;
    let g = |s: f64| f(s) * bessel_j0(r * s);
    let mut partial = Vec::with_capacity(MAX_PANELS);
    let mut left = 0.0;
    let mut acc = 0.0;
    let mut last_extrapolated = f64::NAN;
    let mut stable = 0;
    for k in 1..=MAX_PANELS {
        let right = j0_zero(k) / r;
        acc += integrate(&g, left, right, tol * 1e-3, 1e-13)?;
        partial.push(acc);
        left = right;
        if k >= MIN_PANELS {
            let window = &partial[partial.len().saturating_sub(30)..];
            let est = wynn_epsilon(window);
            if (est - last_extrapolated).abs() <= tol.max(1e-14 * est.abs()) {
                stable += 1;
                if stable >= 3 {
                    return Ok(est);
                }
            } else {
                stable = 0;
            }
            last_extrapolated = est;
        }
    }
    Err(Error::NumericalFailure {
        message: "oscillatory Hankel integral did not converge".into(),
        diagnostics: format!("r = {r}, last estimate {last_extrapolated:e}, partial sum {acc:e}"),
    })
}

/// k-th positive zero of J₀ (k ≥ 1): McMahon start refined by Newton steps.
pub fn j0_zero(k: usize) -> f64 {
    let beta = (k as f64 - 0.25) * std::f64::consts::PI;
    let mut x = beta + 1.0 / (8.0 * beta) - 31.0 / (384.0 * beta.powi(3));
    for _ in 0..3 {
        // J₀' = −J₁
        let d = libm::j1(x);
        if d == 0.0 {
            break;
        }
        x += libm::j0(x) / d;
    }
    x
}
