//! Local anisotropy parameters and the metric they induce.
//!
//! Angles are measured counter-clockwise from the +x axis to the axis of the
//! first range `rho1`. The metric tensor is `H = R(θ) diag(ρ₁², ρ₂²) R(θ)ᵀ`
//! and its volume density is `h = 1 / (ρ₁ ρ₂) = sqrt(det H⁻¹)`.

use crate::error::{invalid, Result};
use crate::mesh::TriMesh;
use crate::scalar::Scalar;

/// Anisotropy angle and ranges at one location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnisotropyParams<T> {
    pub theta: T,
    pub rho1: T,
    pub rho2: T,
}

/// Metric tensor and volume density at one location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSample<T> {
    /// Symmetric positive-definite 2x2 tensor, row-major.
    pub tensor: [[T; 2]; 2],
    pub density: T,
}

impl<T: Scalar> AnisotropyParams<T> {
    pub fn new(theta: T, rho1: T, rho2: T) -> Result<Self> {
        check_range(rho1, "rho1")?;
        check_range(rho2, "rho2")?;
        if !theta.is_finite() {
            return Err(invalid("anisotropy angle must be finite"));
        }
        Ok(Self { theta, rho1, rho2 })
    }

    pub fn metric(&self) -> Result<MetricSample<T>> {
        metric(self.theta, self.rho1, self.rho2)
    }
}

fn check_range<T: Scalar>(rho: T, name: &str) -> Result<()> {
    if rho > T::zero() && rho.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("anisotropy range {name} must be positive and finite, got {rho}")))
    }
}

/// `H = R(θ) diag(ρ₁², ρ₂²) R(θ)ᵀ` and `h = 1/(ρ₁ρ₂)`.
pub fn metric<T: Scalar>(theta: T, rho1: T, rho2: T) -> Result<MetricSample<T>> {
    check_range(rho1, "rho1")?;
    check_range(rho2, "rho2")?;
    let (s, c) = theta.sin_cos();
    let a = rho1 * rho1;
    let b = rho2 * rho2;
    let hxx = a * c * c + b * s * s;
    let hyy = a * s * s + b * c * c;
    let hxy = (a - b) * s * c;
    Ok(MetricSample {
        tensor: [[hxx, hxy], [hxy, hyy]],
        density: T::one() / (rho1 * rho2),
    })
}

/// Weighted average of parameters; angles are averaged on the doubled-angle
/// circle so that θ and θ + π are treated as the same orientation.
pub fn interpolate<T: Scalar>(samples: &[AnisotropyParams<T>], weights: &[T]) -> AnisotropyParams<T> {
    debug_assert_eq!(samples.len(), weights.len());
    let two = T::lit(2.0);
    let (mut c2, mut s2, mut r1, mut r2, mut wsum) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for (p, &w) in samples.iter().zip(weights) {
        let (s, c) = (two * p.theta).sin_cos();
        c2 += w * c;
        s2 += w * s;
        r1 += w * p.rho1;
        r2 += w * p.rho2;
        wsum += w;
    }
    AnisotropyParams {
        theta: s2.atan2(c2) / two,
        rho1: r1 / wsum,
        rho2: r2 / wsum,
    }
}

/// Per-node anisotropy parameters over a mesh.
#[derive(Debug, Clone)]
pub struct AnisotropyField<T> {
    theta: Vec<T>,
    rho1: Vec<T>,
    rho2: Vec<T>,
}

impl<T: Scalar> AnisotropyField<T> {
    pub fn new(theta: Vec<T>, rho1: Vec<T>, rho2: Vec<T>) -> Result<Self> {
        if theta.len() != rho1.len() || theta.len() != rho2.len() {
            return Err(invalid(format!(
                "anisotropy arrays differ in length: {}, {}, {}",
                theta.len(),
                rho1.len(),
                rho2.len()
            )));
        }
        for k in 0..theta.len() {
            AnisotropyParams::new(theta[k], rho1[k], rho2[k])
                .map_err(|e| invalid(format!("node {k}: {e}")))?;
        }
        Ok(Self { theta, rho1, rho2 })
    }

    /// The same parameters at every node of `mesh`.
    pub fn constant(mesh: &TriMesh<T>, theta: T, rho1: T, rho2: T) -> Result<Self> {
        AnisotropyParams::new(theta, rho1, rho2)?;
        let n = mesh.node_count();
        Ok(Self {
            theta: vec![theta; n],
            rho1: vec![rho1; n],
            rho2: vec![rho2; n],
        })
    }

    /// Angles tangent to circles around the domain centre (vortex pattern).
    pub fn vortex(mesh: &TriMesh<T>, rho1: T, rho2: T) -> Result<Self> {
        let c = domain_center(mesh);
        let half_pi = T::FRAC_PI_2();
        Self::from_fn(mesh, |p| AnisotropyParams {
            theta: (p[1] - c[1]).atan2(p[0] - c[0]) + half_pi,
            rho1,
            rho2,
        })
    }

    /// Angles following the two domain diagonals (an "X" pattern), with a
    /// smooth switch across the coordinate axes through the centre.
    pub fn cross(mesh: &TriMesh<T>, rho1: T, rho2: T) -> Result<Self> {
        let c = domain_center(mesh);
        let g = mesh.grid();
        let extent = (T::lit((g.nx - 1) as f64) * g.dx).max(T::lit((g.ny - 1) as f64) * g.dy);
        let width = extent / T::lit(10.0);
        let quarter_pi = T::FRAC_PI_4();
        Self::from_fn(mesh, |p| {
            let u = p[0] - c[0];
            let v = p[1] - c[1];
            AnisotropyParams {
                theta: quarter_pi * (u * v / (width * width)).tanh(),
                rho1,
                rho2,
            }
        })
    }

    pub fn from_fn<F>(mesh: &TriMesh<T>, mut f: F) -> Result<Self>
    where
        F: FnMut([T; 2]) -> AnisotropyParams<T>,
    {
        let n = mesh.node_count();
        let mut theta = Vec::with_capacity(n);
        let mut rho1 = Vec::with_capacity(n);
        let mut rho2 = Vec::with_capacity(n);
        for p in mesh.nodes() {
            let a = f(*p);
            theta.push(a.theta);
            rho1.push(a.rho1);
            rho2.push(a.rho2);
        }
        Self::new(theta, rho1, rho2)
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn theta(&self) -> &[T] {
        &self.theta
    }

    pub fn rho1(&self) -> &[T] {
        &self.rho1
    }

    pub fn rho2(&self) -> &[T] {
        &self.rho2
    }

    pub fn params(&self, node: usize) -> AnisotropyParams<T> {
        AnisotropyParams {
            theta: self.theta[node],
            rho1: self.rho1[node],
            rho2: self.rho2[node],
        }
    }

    pub fn metric_at_node(&self, node: usize) -> Result<MetricSample<T>> {
        self.params(node).metric()
    }

    /// Parameters at the centroid of a triangle (equal-weight vertex average).
    pub fn centroid_params(&self, tri: [usize; 3]) -> AnisotropyParams<T> {
        let w = T::one();
        interpolate(&tri.map(|k| self.params(k)), &[w, w, w])
    }

    pub fn metric_at_centroid(&self, tri: [usize; 3]) -> Result<MetricSample<T>> {
        self.centroid_params(tri).metric()
    }

    /// Nearest-node resampling onto another mesh covering the same extent.
    pub fn resample(&self, from: &TriMesh<T>, to: &TriMesh<T>) -> Result<Self> {
        let (fg, tg) = (from.grid(), to.grid());
        let pick = |k: usize, nt: usize, nf: usize| -> usize {
            if nt <= 1 {
                0
            } else {
                ((k as f64) * (nf - 1) as f64 / (nt - 1) as f64).round() as usize
            }
        };
        Self::from_fn(to, |p| {
            let i = (p[0] / tg.dx).round().to_usize().unwrap_or(0);
            let j = (p[1] / tg.dy).round().to_usize().unwrap_or(0);
            self.params(fg.index(pick(i, tg.nx, fg.nx), pick(j, tg.ny, fg.ny)))
        })
    }
}

fn domain_center<T: Scalar>(mesh: &TriMesh<T>) -> [T; 2] {
    let g = mesh.grid();
    let half = T::lit(0.5);
    [
        T::lit((g.nx - 1) as f64) * g.dx * half,
        T::lit((g.ny - 1) as f64) * g.dy * half,
    ]
}
