//! P1 finite-element matrices of the anisotropic Laplace–Beltrami operator.
//!
//! For a mesh and an anisotropy field this assembles
//!
//! * the lumped mass `mᵢ = ⟨ψᵢ, h⟩`, stored as `c_inv_sqrt[i] = 1/√mᵢ`,
//! * the weak stiffness `Kᵢⱼ = ⟨∇ψᵢ, h·H ∇ψⱼ⟩`,
//! * the normalized matrix `S̃ = M^{-1/2} K M^{-1/2}` used by every matrix
//!   function downstream.
//!
//! Both integrals use one-point centroid quadrature for `h` and `h·H`; P1
//! gradients are constant per element so the stiffness integral is otherwise
//! exact. No boundary terms are assembled, which is the natural (Neumann)
//! condition.

use crate::anisotropy::AnisotropyField;
use crate::error::{invalid, Error, Result};
use crate::mesh::{triangle_geometry, TriMesh};
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

/// Unnormalized weak forms: lumped mass vector and stiffness matrix.
#[derive(Debug, Clone)]
pub struct WeakForms<T> {
    pub lumped_mass: Vec<T>,
    pub stiffness: CsrMatrix<T>,
}

/// Diagonal factor, normalized stiffness and its spectral upper bound.
#[derive(Debug, Clone)]
pub struct FemOperator<T> {
    pub c_inv_sqrt: Vec<T>,
    pub stiffness: CsrMatrix<T>,
    pub eig_upper: T,
}

impl<T: Scalar> FemOperator<T> {
    pub fn len(&self) -> usize {
        self.c_inv_sqrt.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c_inv_sqrt.is_empty()
    }

    /// `√mᵢ`, the diagonal of `C̃^{1/2}`; spans the null space of `S̃`.
    pub fn c_sqrt(&self) -> Vec<T> {
        self.c_inv_sqrt.iter().map(|&c| T::one() / c).collect()
    }

    /// Builds an operator directly from a diagonal and a symmetric matrix.
    pub fn from_parts(c_inv_sqrt: Vec<T>, stiffness: CsrMatrix<T>) -> Result<Self> {
        if stiffness.nrows() != c_inv_sqrt.len() {
            return Err(invalid("diagonal and matrix sizes differ"));
        }
        if c_inv_sqrt.iter().any(|&c| !(c > T::zero()) || !c.is_finite()) {
            return Err(invalid("diagonal factor must be positive and finite"));
        }
        let eig_upper = eig_upper_bound(&stiffness)?;
        Ok(Self { c_inv_sqrt, stiffness, eig_upper })
    }
}

fn sparsity_pattern<T: Scalar>(mesh: &TriMesh<T>) -> Vec<Vec<usize>> {
    let mut rows: Vec<Vec<usize>> = (0..mesh.node_count()).map(|i| vec![i]).collect();
    for tri in mesh.triangles() {
        for &a in tri {
            for &b in tri {
                if a != b {
                    rows[a].push(b);
                }
            }
        }
    }
    for r in &mut rows {
        r.sort_unstable();
        r.dedup();
    }
    rows
}

/// Lumped mass and unnormalized stiffness, accumulated in element order.
pub fn assemble_weak_forms<T: Scalar>(mesh: &TriMesh<T>, aniso: &AnisotropyField<T>) -> Result<WeakForms<T>> {
    let n = mesh.node_count();
    if n == 0 || mesh.triangle_count() == 0 {
        return Err(Error::Assembly("empty mesh".into()));
    }
    if aniso.len() != n {
        return Err(invalid(format!(
            "anisotropy field has {} nodes, mesh has {n}",
            aniso.len()
        )));
    }
    let mut stiffness = CsrMatrix::with_pattern(n, &sparsity_pattern(mesh));
    let mut mass = vec![T::zero(); n];
    let third = T::lit(1.0 / 3.0);
    let nodes = mesh.nodes();
    for tri in mesh.triangles() {
        let geo = triangle_geometry(tri.map(|k| nodes[k]));
        let metric = aniso.metric_at_centroid(*tri)?;
        let h = metric.density;
        let [[hxx, hxy], [_, hyy]] = metric.tensor;
        let w = geo.area * h;
        let mut local = [[T::zero(); 3]; 3];
        for a in 0..3 {
            let ga = geo.gradients[a];
            // H ∇ψ_a
            let hg = [hxx * ga[0] + hxy * ga[1], hxy * ga[0] + hyy * ga[1]];
            for b in a..3 {
                let gb = geo.gradients[b];
                local[a][b] = w * (hg[0] * gb[0] + hg[1] * gb[1]);
                local[b][a] = local[a][b];
            }
        }
        for a in 0..3 {
            mass[tri[a]] += w * third;
            for b in 0..3 {
                let pos = stiffness
                    .position(tri[a], tri[b])
                    .expect("pattern covers every element pair");
                stiffness.values_mut()[pos] += local[a][b];
            }
        }
    }
    Ok(WeakForms { lumped_mass: mass, stiffness })
}

/// Assembles `C̃^{-1/2}`, `S̃` and the bound on the spectrum of `S̃`.
pub fn assemble<T: Scalar>(mesh: &TriMesh<T>, aniso: &AnisotropyField<T>) -> Result<FemOperator<T>> {
    let WeakForms { lumped_mass, mut stiffness } = assemble_weak_forms(mesh, aniso)?;
    if let Some(k) = lumped_mass.iter().position(|&m| !(m > T::zero()) || !m.is_finite()) {
        return Err(Error::Assembly(format!(
            "non-positive lumped mass {} at node {k}",
            lumped_mass[k]
        )));
    }
    let c_inv_sqrt: Vec<T> = lumped_mass.iter().map(|&m| T::one() / m.sqrt()).collect();
    for i in 0..stiffness.nrows() {
        let (a, b) = (stiffness.row_offsets()[i], stiffness.row_offsets()[i + 1]);
        for k in a..b {
            let j = stiffness.col_indices()[k];
            // c_i c_j is commutative, so (i, j) and (j, i) stay bit-identical.
            let scale = c_inv_sqrt[i] * c_inv_sqrt[j];
            stiffness.values_mut()[k] *= scale;
        }
    }
    let eig_upper = eig_upper_bound(&stiffness)?;
    Ok(FemOperator { c_inv_sqrt, stiffness, eig_upper })
}

/// Upper bound on the largest eigenvalue of a symmetric positive
/// semi-definite matrix: the smaller of the Gershgorin row bound and the
/// Frobenius norm.
pub fn eig_upper_bound<T: Scalar>(m: &CsrMatrix<T>) -> Result<T> {
    if m.nrows() != m.ncols() {
        return Err(invalid(format!(
            "spectral bound needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut gershgorin = T::zero();
    for i in 0..m.nrows() {
        let s: T = m.row(i).1.iter().map(|v| v.abs()).sum();
        gershgorin = gershgorin.max(s);
    }
    let frobenius = m.values().iter().map(|&v| v * v).sum::<T>().sqrt();
    Ok(gershgorin.min(frobenius))
}
