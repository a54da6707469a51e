//! Chebyshev approximation of spectral weight functions and matrix-free
//! application of `Σ = C̃^{-1/2} g(S̃) C̃^{-1/2}`.
//!
//! A polynomial on `[0, l]` is stored in the shifted Chebyshev basis
//! `p(x) = c₀/2 + Σ_{k≥1} c_k T_k(2x/l − 1)`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::fem::FemOperator;
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

/// Degree at which coefficient computation switches to the FFT.
const FFT_MIN_DEGREE: usize = 64;
const VALIDATION_POINTS: usize = 500;

pub const AUTO_START_DEGREE: usize = 256;
pub const AUTO_MAX_DEGREE: usize = 2048;
/// Auto policy target: uniform error at most this fraction of `max g`.
pub const AUTO_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevApprox {
    interval_end: f64,
    coeffs: Vec<f64>,
    fit_error: f64,
}

/// How the polynomial degree of a component is chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub enum DegreePolicy {
    Fixed(usize),
    /// Doubling from [`AUTO_START_DEGREE`] until the uniform error is at most
    /// [`AUTO_REL_TOL`] of the function's maximum, capped at [`AUTO_MAX_DEGREE`].
    #[default]
    Auto,
}


impl ChebyshevApprox {
    pub fn from_coeffs(interval_end: f64, coeffs: Vec<f64>) -> Result<Self> {
        if !(interval_end > 0.0) || !interval_end.is_finite() {
            return Err(invalid(format!("interval end must be positive, got {interval_end}")));
        }
        if coeffs.is_empty() {
            return Err(invalid("at least one coefficient is required"));
        }
        Ok(Self { interval_end, coeffs, fit_error: 0.0 })
    }

    pub fn interval_end(&self) -> f64 {
        self.interval_end
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Largest deviation from the target measured on the validation grid.
    pub fn fit_error(&self) -> f64 {
        self.fit_error
    }

    /// Clenshaw evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        let t = 2.0 * x / self.interval_end - 1.0;
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs[1..].iter().rev() {
            let b0 = c + 2.0 * t * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        0.5 * self.coeffs[0] + t * b1 - b2
    }
}

/// Second-kind Chebyshev points of `[0, l]`, endpoints included.
pub fn validation_points(l: f64, count: usize) -> Vec<f64> {
    let m = count.max(2);
    (0..m)
        .map(|j| 0.5 * l * (1.0 + (PI * j as f64 / (m - 1) as f64).cos()))
        .collect()
}

/// Interpolates `g` at the `K + 1` first-kind Chebyshev nodes of `[0, l]`.
pub fn chebyshev_fit<F: Fn(f64) -> f64>(g: F, l: f64, degree: usize) -> Result<ChebyshevApprox> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(invalid(format!("interval end must be positive and finite, got {l}")));
    }
    let n = degree + 1;
    let mut samples = Vec::with_capacity(n);
    for j in 0..n {
        let t = (PI * (j as f64 + 0.5) / n as f64).cos();
        let x = 0.5 * l * (t + 1.0);
        let v = g(x);
        if !v.is_finite() {
            return Err(invalid(format!("target is not finite at node {j} (x = {x})")));
        }
        samples.push(v);
    }
    let coeffs = if degree >= FFT_MIN_DEGREE {
        dct_coeffs_fft(&samples)
    } else {
        dct_coeffs_direct(&samples)
    };
    let mut approx = ChebyshevApprox { interval_end: l, coeffs, fit_error: 0.0 };
    let mut err = 0.0f64;
    let mut check = |x: f64| {
        let d = (approx.eval(x) - g(x)).abs();
        err = err.max(d);
    };
    for x in validation_points(l, VALIDATION_POINTS) {
        check(x);
    }
    for x in validation_points(l, 4 * n) {
        check(x);
    }
    approx.fit_error = err;
    Ok(approx)
}

/// Fits with the given degree policy; `scale` is the reference magnitude of
/// `g` for the automatic tolerance.
pub fn fit_with_policy<F: Fn(f64) -> f64>(g: F, l: f64, policy: DegreePolicy, scale: f64) -> Result<ChebyshevApprox> {
    match policy {
        DegreePolicy::Fixed(k) => chebyshev_fit(&g, l, k),
        DegreePolicy::Auto => {
            let target = AUTO_REL_TOL * scale.abs();
            let mut k = AUTO_START_DEGREE;
            loop {
                let fit = chebyshev_fit(&g, l, k)?;
                if fit.fit_error <= target || k >= AUTO_MAX_DEGREE {
                    return Ok(fit);
                }
                k *= 2;
            }
        }
    }
}

fn dct_coeffs_direct(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|k| {
            let s: f64 = f
                .iter()
                .enumerate()
                .map(|(j, &v)| v * (PI * k as f64 * (j as f64 + 0.5) / n as f64).cos())
                .sum();
            2.0 * s / n as f64
        })
        .collect()
}

/// Same coefficients through a length-`2N` FFT of the evenly extended samples.
fn dct_coeffs_fft(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut buf: Vec<Complex<f64>> = f
        .iter()
        .chain(f.iter().rev())
        .map(|&v| Complex::new(v, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(2 * n).process(&mut buf);
    (0..n)
        .map(|k| {
            let phase = Complex::from_polar(1.0, -PI * k as f64 / (2 * n) as f64);
            (phase * buf[k]).re / n as f64
        })
        .collect()
}

/// `p(S) x` by the three-term recurrence on `T_k(2S/l − I) x`.
///
/// Uses exactly `degree` sparse products and four work vectors.
pub fn chebyshev_matvec<T: Scalar>(s: &CsrMatrix<T>, approx: &ChebyshevApprox, x: &[T]) -> Vec<T> {
    let c: Vec<T> = approx.coeffs.iter().map(|&v| T::lit(v)).collect();
    let half_c0 = c[0] * T::lit(0.5);
    let mut y: Vec<T> = x.iter().map(|&v| half_c0 * v).collect();
    if c.len() == 1 {
        return y;
    }
    let two_over_l = T::lit(2.0 / approx.interval_end);
    let a = T::lit(4.0 / approx.interval_end);
    let two = T::lit(2.0);

    // T₁ x = (2/l) S x − x
    let mut u_cur = s.matvec(x);
    for ((u, &xi), yi) in u_cur.iter_mut().zip(x).zip(y.iter_mut()) {
        *u = two_over_l * *u - xi;
        *yi += c[1] * *u;
    }
    let mut u_prev = x.to_vec();
    for &ck in &c[2..] {
        // T_k = (4/l) S T_{k−1} − 2 T_{k−1} − T_{k−2}, written over T_{k−2}.
        let cur = &u_cur;
        s.for_each_row_product(cur, &mut u_prev, &mut y, |i, sx, prev, yi| {
            let next = a * sx - two * cur[i] - *prev;
            *prev = next;
            *yi += ck * next;
        });
        std::mem::swap(&mut u_prev, &mut u_cur);
    }
    y
}

fn check_interval<T: Scalar>(op: &FemOperator<T>, approx: &ChebyshevApprox) -> Result<()> {
    if approx.interval_end < op.eig_upper.as_f64() {
        return Err(Error::Precondition(format!(
            "approximation interval [0, {}] does not cover the spectral bound {}",
            approx.interval_end, op.eig_upper
        )));
    }
    Ok(())
}

fn check_len<T: Scalar>(op: &FemOperator<T>, v: &[T]) -> Result<()> {
    if v.len() != op.len() {
        return Err(invalid(format!("vector has length {}, operator has {}", v.len(), op.len())));
    }
    Ok(())
}

/// `C̃^{-1/2} p(S̃) C̃^{-1/2} v`.
pub fn apply_matrix_function<T: Scalar>(op: &FemOperator<T>, approx: &ChebyshevApprox, v: &[T]) -> Result<Vec<T>> {
    check_interval(op, approx)?;
    check_len(op, v)?;
    let x: Vec<T> = v.iter().zip(&op.c_inv_sqrt).map(|(&a, &c)| a * c).collect();
    let mut y = chebyshev_matvec(&op.stiffness, approx, &x);
    for (yi, &c) in y.iter_mut().zip(&op.c_inv_sqrt) {
        *yi *= c;
    }
    Ok(y)
}

/// `C̃^{-1/2} p(S̃) w`, the one-sided product used for simulation.
pub fn apply_half<T: Scalar>(op: &FemOperator<T>, approx: &ChebyshevApprox, w: &[T]) -> Result<Vec<T>> {
    check_interval(op, approx)?;
    check_len(op, w)?;
    let mut y = chebyshev_matvec(&op.stiffness, approx, w);
    for (yi, &c) in y.iter_mut().zip(&op.c_inv_sqrt) {
        *yi *= c;
    }
    Ok(y)
}

/// Horner evaluation of a polynomial given by monomial coefficients.
pub fn eval_monomial(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn check_positive_on(p0: &[f64], l: f64) -> Result<()> {
    if p0.is_empty() || p0.iter().any(|c| !c.is_finite()) {
        return Err(invalid("polynomial must have finite coefficients"));
    }
    let pts = validation_points(l, 4001);
    if let Some(x) = pts.iter().find(|&&x| !(eval_monomial(p0, x) > 0.0)) {
        return Err(invalid(format!("polynomial is not positive on [0, {l}]: P0({x}) <= 0")));
    }
    Ok(())
}

/// `Q v = C̃^{1/2} P₀(S̃) C̃^{1/2} v`, the sparse precision of a Markov model.
pub fn precision_apply<T: Scalar>(op: &FemOperator<T>, p0: &[f64], v: &[T]) -> Result<Vec<T>> {
    check_len(op, v)?;
    let l = op.eig_upper.as_f64();
    check_positive_on(p0, l)?;
    // Interpolation at deg + 1 nodes reproduces the polynomial exactly.
    let exact = chebyshev_fit(|x| eval_monomial(p0, x), l, p0.len() - 1)?;
    let c_sqrt = op.c_sqrt();
    let x: Vec<T> = v.iter().zip(&c_sqrt).map(|(&a, &c)| a * c).collect();
    let mut y = chebyshev_matvec(&op.stiffness, &exact, &x);
    for (yi, &c) in y.iter_mut().zip(&c_sqrt) {
        *yi *= c;
    }
    Ok(y)
}

/// `(Σ v, Q Σ v)` with `Σ` built from `g = 1/P₀` (degree `K`) and `Q` from
/// `P₀`; the second entry should reproduce `v`.
pub fn matrix_polynomial_consistency<T: Scalar>(
    op: &FemOperator<T>,
    p0: &[f64],
    v: &[T],
    degree: usize,
) -> Result<(Vec<T>, Vec<T>)> {
    let l = op.eig_upper.as_f64();
    check_positive_on(p0, l)?;
    let inv = chebyshev_fit(|x| 1.0 / eval_monomial(p0, x), l, degree)?;
    let sigma_v = apply_matrix_function(op, &inv, v)?;
    let q_sigma_v = precision_apply(op, p0, &sigma_v)?;
    Ok((sigma_v, q_sigma_v))
}
