//! Dense reference computations for small problems.
//!
//! Everything here is `O(n³)` and guarded by [`ORACLE_MAX_N`]. Matrix
//! functions use a full symmetric eigendecomposition of `S̃`, and kriging
//! uses a dense Cholesky factorization, so they share no code path with the
//! matrix-free solvers they check.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::fem::FemOperator;
use crate::krige::{ComponentKind, ComponentModel, FilterProblem};
use crate::scalar::Scalar;
use crate::spectral::SpectralModel;

pub const ORACLE_MAX_N: usize = 2000;

#[derive(Debug, Clone)]
pub struct DenseCovariance {
    pub matrix: DMatrix<f64>,
    /// Spectrum of `S̃`, ascending.
    pub eigenvalues: Vec<f64>,
}

impl DenseCovariance {
    pub fn matvec<T: Scalar>(&self, v: &[T]) -> Vec<T> {
        let x = DVector::from_iterator(v.len(), v.iter().map(|x| x.as_f64()));
        (&self.matrix * x).iter().map(|&y| T::lit(y)).collect()
    }

    /// Column `j`, i.e. the covariance between node `j` and every node.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.matrix.column(j).iter().copied().collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (&self.matrix + self.matrix.transpose()) * 0.5;
        SymmetricEigen::new(sym).eigenvalues.min()
    }
}

fn guard(n: usize) -> Result<()> {
    if n > ORACLE_MAX_N {
        return Err(Error::Size { n, limit: ORACLE_MAX_N });
    }
    Ok(())
}

pub fn dense_stiffness<T: Scalar>(op: &FemOperator<T>) -> Result<DMatrix<f64>> {
    let n = op.len();
    guard(n)?;
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        let (cols, vals) = op.stiffness.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            s[(i, j)] = v.as_f64();
        }
    }
    Ok(s)
}

/// Eigenvalues of `S̃` in ascending order.
pub fn stiffness_spectrum<T: Scalar>(op: &FemOperator<T>) -> Result<Vec<f64>> {
    let s = dense_stiffness(op)?;
    let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// `C̃^{-1/2} V diag(g(μ)) Vᵀ C̃^{-1/2}` for an arbitrary weight `g`.
///
/// Eigenvalues of `S̃` that round to slightly negative values are clamped
/// to zero before `g` is applied.
pub fn dense_matrix_function<T: Scalar, G: Fn(f64) -> f64>(op: &FemOperator<T>, g: G) -> Result<DenseCovariance> {
    let s = dense_stiffness(op)?;
    let n = s.nrows();
    let eig = SymmetricEigen::new(s);
    let v = eig.eigenvectors;
    let weights: Vec<f64> = eig.eigenvalues.iter().map(|&mu| g(mu.max(0.0))).collect();
    let mut scaled = v.clone();
    for (k, w) in weights.iter().enumerate() {
        scaled.column_mut(k).scale_mut(*w);
    }
    let mut m = scaled * v.transpose();
    let c: Vec<f64> = op.c_inv_sqrt.iter().map(|x| x.as_f64()).collect();
    for j in 0..n {
        for i in 0..n {
            m[(i, j)] *= c[i] * c[j];
        }
    }
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(DenseCovariance { matrix: m, eigenvalues })
}

/// Dense covariance of a spectral model on the operator's mesh.
pub fn dense_covariance<T: Scalar>(op: &FemOperator<T>, model: &SpectralModel) -> Result<DenseCovariance> {
    if model.is_nugget() {
        return Err(Error::UnsupportedFamily("nugget"));
    }
    dense_matrix_function(op, |x| model.g(x))
}

/// `Q = C̃^{1/2} P₀(S̃) C̃^{1/2}`, with `P₀` evaluated by Horner's rule on the
/// dense matrix.
pub fn dense_precision<T: Scalar>(op: &FemOperator<T>, p0: &[f64]) -> Result<DMatrix<f64>> {
    if p0.is_empty() {
        return Err(invalid("empty polynomial"));
    }
    let s = dense_stiffness(op)?;
    let n = s.nrows();
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for &c in p0.iter().rev() {
        acc = &acc * &s + DMatrix::identity(n, n) * c;
    }
    let c: Vec<f64> = op.c_inv_sqrt.iter().map(|x| 1.0 / x.as_f64()).collect();
    for j in 0..n {
        for i in 0..n {
            acc[(i, j)] *= c[i] * c[j];
        }
    }
    Ok(acc)
}

fn dense_component<T: Scalar>(c: &ComponentModel<T>, n: usize) -> Result<DMatrix<f64>> {
    match c.kind() {
        ComponentKind::Nugget => Ok(DMatrix::identity(n, n) * c.sill()),
        ComponentKind::FemSpectral => {
            let op = c
                .operator()
                .ok_or_else(|| Error::State("component operator has not been assembled".into()))?;
            Ok(dense_covariance(op, c.spectral())?.matrix)
        }
    }
}

/// Solves the kriging system with a dense Cholesky factorization and returns
/// `Σ_S y`. Component covariances use the exact weight function, not the
/// Chebyshev fits.
pub fn dense_filter<T: Scalar>(problem: &FilterProblem<'_, T>) -> Result<Vec<T>> {
    let n = problem.data.len();
    guard(n)?;
    if problem.is_identity() {
        return Ok(problem.data.to_vec());
    }
    let sigma_s = dense_component(problem.signal, n)?;
    let mut a = sigma_s.clone();
    for c in problem.noises {
        a += dense_component(c, n)?;
    }
    let j = problem.jitter();
    for i in 0..n {
        a[(i, i)] += j;
    }
    let z = DVector::from_iterator(n, problem.data.iter().map(|x| x.as_f64()));
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Model("summed covariance is not positive definite; add a nugget component or a positive jitter".into()))?;
    let y = chol.solve(&z);
    Ok((sigma_s * y).iter().map(|&v| T::lit(v)).collect())
}
