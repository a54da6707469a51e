//! Factorial kriging by matrix-free conjugate gradients, and simulation of
//! component fields.
//!
//! The observed field is `Z = S + N⁽¹⁾ + … + N⁽ᵖ⁾`. The estimate of the
//! signal at the observation nodes is `Σ_S (Σ_S + Σ_N + jitter·I)⁻¹ z`, where
//! every covariance is only ever applied to vectors.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::anisotropy::AnisotropyField;
use crate::chebfilter::{apply_half, apply_matrix_function, fit_with_policy, ChebyshevApprox, DegreePolicy};
use crate::error::{invalid, Error, Result};
use crate::fem::{assemble, FemOperator};
use crate::mesh::{triangulate_grid, TriMesh};
use crate::scalar::{dot, norm2, Scalar};
use crate::spectral::SpectralModel;

/// Relative ridge added when no nugget component is present.
pub const DEFAULT_JITTER_FACTOR: f64 = 1e-6;
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentKind {
    FemSpectral,
    Nugget,
}

/// How the Chebyshev approximations of a component are built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxSettings {
    pub degree: DegreePolicy,
    /// Overrides the fitted interval `[0, l]`; values below the spectral bound
    /// are kept and make every later application fail its precondition.
    pub interval_end: Option<f64>,
    /// Also fit `√g`, needed only for simulation.
    pub with_sqrt: bool,
}

impl Default for ApproxSettings {
    fn default() -> Self {
        Self { degree: DegreePolicy::Auto, interval_end: None, with_sqrt: true }
    }
}

/// One independent component of the observed field.
#[derive(Debug, Clone)]
pub struct ComponentModel<T> {
    spectral: SpectralModel,
    aniso: Option<AnisotropyField<T>>,
    operator: Option<FemOperator<T>>,
    g_approx: Option<ChebyshevApprox>,
    sqrt_g_approx: Option<ChebyshevApprox>,
}

impl<T: Scalar> ComponentModel<T> {
    /// White noise with covariance `sill·I`.
    pub fn nugget(sill: f64) -> Result<Self> {
        Ok(Self {
            spectral: SpectralModel::nugget(sill)?,
            aniso: None,
            operator: None,
            g_approx: None,
            sqrt_g_approx: None,
        })
    }

    /// A finite-element component that still has to be [`prepare`](Self::prepare)d.
    pub fn fem_spectral(spectral: SpectralModel, aniso: AnisotropyField<T>) -> Result<Self> {
        if spectral.is_nugget() {
            return Err(invalid("a nugget model has no finite-element representation"));
        }
        Ok(Self { spectral, aniso: Some(aniso), operator: None, g_approx: None, sqrt_g_approx: None })
    }

    /// Nugget models become [`nugget`](Self::nugget) components; the others are
    /// assembled and fitted on `mesh`.
    pub fn build(
        mesh: &TriMesh<T>,
        spectral: SpectralModel,
        aniso: AnisotropyField<T>,
        settings: &ApproxSettings,
    ) -> Result<Self> {
        if spectral.is_nugget() {
            return Self::nugget(spectral.sill());
        }
        let mut c = Self::fem_spectral(spectral, aniso)?;
        c.prepare(mesh, settings)?;
        Ok(c)
    }

    /// Assembles the operator and fits `g` (and `√g`).
    pub fn prepare(&mut self, mesh: &TriMesh<T>, settings: &ApproxSettings) -> Result<()> {
        let aniso = match &self.aniso {
            Some(a) => a,
            None => return Ok(()),
        };
        let op = assemble(mesh, aniso)?;
        self.install(op, settings)
    }

    /// Uses an already assembled operator.
    pub fn with_operator(spectral: SpectralModel, operator: FemOperator<T>, settings: &ApproxSettings) -> Result<Self> {
        if spectral.is_nugget() {
            return Err(invalid("a nugget model has no finite-element representation"));
        }
        let mut c = Self { spectral, aniso: None, operator: None, g_approx: None, sqrt_g_approx: None };
        c.install(operator, settings)?;
        Ok(c)
    }

    fn install(&mut self, op: FemOperator<T>, settings: &ApproxSettings) -> Result<()> {
        let l = settings.interval_end.unwrap_or_else(|| op.eig_upper.as_f64());
        let model = self.spectral;
        let gmax = model.g_max();
        self.g_approx = Some(fit_with_policy(|x| model.g(x), l, settings.degree, gmax)?);
        self.sqrt_g_approx = if settings.with_sqrt {
            Some(fit_with_policy(|x| model.g(x).sqrt(), l, settings.degree, gmax.sqrt())?)
        } else {
            None
        };
        self.operator = Some(op);
        Ok(())
    }

    pub fn kind(&self) -> ComponentKind {
        if self.spectral.is_nugget() {
            ComponentKind::Nugget
        } else {
            ComponentKind::FemSpectral
        }
    }

    pub fn spectral(&self) -> &SpectralModel {
        &self.spectral
    }

    pub fn sill(&self) -> f64 {
        self.spectral.sill()
    }

    pub fn anisotropy(&self) -> Option<&AnisotropyField<T>> {
        self.aniso.as_ref()
    }

    pub fn operator(&self) -> Option<&FemOperator<T>> {
        self.operator.as_ref()
    }

    pub fn g_approx(&self) -> Option<&ChebyshevApprox> {
        self.g_approx.as_ref()
    }

    pub fn sqrt_g_approx(&self) -> Option<&ChebyshevApprox> {
        self.sqrt_g_approx.as_ref()
    }

    /// Node count of the operator; `None` for nuggets, which fit any size.
    pub fn len(&self) -> Option<usize> {
        self.operator.as_ref().map(FemOperator::len)
    }

    fn ready(&self) -> Result<(&FemOperator<T>, &ChebyshevApprox)> {
        match (&self.operator, &self.g_approx) {
            (Some(op), Some(g)) => Ok((op, g)),
            _ => Err(Error::State("component operator has not been assembled".into())),
        }
    }

    /// `Σ v` for this component.
    pub fn apply(&self, v: &[T]) -> Result<Vec<T>> {
        match self.kind() {
            ComponentKind::Nugget => {
                let s = T::lit(self.sill());
                Ok(v.iter().map(|&x| s * x).collect())
            }
            ComponentKind::FemSpectral => {
                let (op, g) = self.ready()?;
                apply_matrix_function(op, g, v)
            }
        }
    }

    /// One realization, drawn from random stream 0.
    pub fn simulate(&self, seed: u64, n: usize) -> Result<Vec<T>> {
        self.simulate_stream(seed, 0, n)
    }

    /// `C̃^{-1/2} P_{√g}(S̃) w` with `w` from the given seed and stream;
    /// `√sill · w` for nuggets. `n` is only used by nuggets.
    pub fn simulate_stream(&self, seed: u64, stream: u64, n: usize) -> Result<Vec<T>> {
        match self.kind() {
            ComponentKind::Nugget => {
                let s = T::lit(self.sill().sqrt());
                Ok(standard_normals::<T>(n, seed, stream).into_iter().map(|x| s * x).collect())
            }
            ComponentKind::FemSpectral => {
                let op = self
                    .operator
                    .as_ref()
                    .ok_or_else(|| Error::State("component operator has not been assembled".into()))?;
                let sqrt_g = self
                    .sqrt_g_approx
                    .as_ref()
                    .ok_or_else(|| Error::State("no square-root approximation fitted for simulation".into()))?;
                let w = standard_normals::<T>(op.len(), seed, stream);
                apply_half(op, sqrt_g, &w)
            }
        }
    }
}

/// Independent standard normals from ChaCha8 with the given seed and stream.
///
/// Value `i` is built from keystream words `4i..4i+4` (two `u64`s through the
/// Box–Muller map), so it depends only on `(seed, stream, i)`.
pub fn standard_normals<T: Scalar>(n: usize, seed: u64, stream: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let scale = 1.0 / (1u64 << 53) as f64;
    (0..n)
        .map(|_| {
            let a = rng.next_u64();
            let b = rng.next_u64();
            // u1 in (0, 1], u2 in [0, 1)
            let u1 = ((a >> 11) + 1) as f64 * scale;
            let u2 = (b >> 11) as f64 * scale;
            T::lit((-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Relative residual target `‖r‖ ≤ tol·‖z‖`.
    pub tol: f64,
    /// Defaults to `10·√n`.
    pub max_iter: Option<usize>,
    /// Defaults to `1e−6·Σ sills` without a nugget component, 0 with a
    /// nugget or with no noise at all.
    pub jitter: Option<f64>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: None, jitter: None }
    }
}

/// Observations, components and solver settings.
#[derive(Debug, Clone)]
pub struct FilterProblem<'a, T> {
    pub data: &'a [T],
    pub signal: &'a ComponentModel<T>,
    pub noises: &'a [ComponentModel<T>],
    pub settings: SolverSettings,
}

impl<'a, T: Scalar> FilterProblem<'a, T> {
    pub fn new(
        data: &'a [T],
        signal: &'a ComponentModel<T>,
        noises: &'a [ComponentModel<T>],
        settings: SolverSettings,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(invalid("no observations"));
        }
        for c in std::iter::once(signal).chain(noises) {
            if let Some(n) = c.len() {
                if n != data.len() {
                    return Err(invalid(format!("component has {n} nodes, data has {}", data.len())));
                }
            }
        }
        if !(settings.tol > 0.0) {
            return Err(invalid(format!("tolerance must be positive, got {}", settings.tol)));
        }
        if settings.max_iter == Some(0) {
            return Err(invalid("max_iter must be at least 1"));
        }
        if let Some(j) = settings.jitter {
            if !(j >= 0.0) || !j.is_finite() {
                return Err(invalid(format!("jitter must be non-negative, got {j}")));
            }
        }
        Ok(Self { data, signal, noises, settings })
    }

    pub fn components(&self) -> impl Iterator<Item = &ComponentModel<T>> {
        std::iter::once(self.signal).chain(self.noises.iter())
    }

    pub fn jitter(&self) -> f64 {
        self.settings.jitter.unwrap_or_else(|| {
            if self.noises.is_empty() || self.components().any(|c| c.kind() == ComponentKind::Nugget) {
                0.0
            } else {
                DEFAULT_JITTER_FACTOR * self.components().map(ComponentModel::sill).sum::<f64>()
            }
        })
    }

    /// No noise and no jitter: the estimate is the data itself.
    pub fn is_identity(&self) -> bool {
        self.noises.is_empty() && self.jitter() == 0.0
    }

    pub fn max_iter(&self) -> usize {
        self.settings
            .max_iter
            .unwrap_or_else(|| ((10.0 * (self.data.len() as f64).sqrt()).ceil() as usize).max(1))
    }

    /// `(Σ_S + Σ_N⁽¹⁾ + … + jitter·I) v`.
    pub fn apply_system(&self, v: &[T]) -> Result<Vec<T>> {
        let mut acc = self.signal.apply(v)?;
        for c in self.noises {
            let y = c.apply(v)?;
            for (a, b) in acc.iter_mut().zip(y) {
                *a += b;
            }
        }
        let j = self.jitter();
        if j > 0.0 {
            let j = T::lit(j);
            for (a, &x) in acc.iter_mut().zip(v) {
                *a += j * x;
            }
        }
        Ok(acc)
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome<T> {
    pub solution: Vec<T>,
    pub iterations: usize,
    pub relative_residual: f64,
    /// `‖r⁽ᵏ⁾‖ / ‖b‖` for `k = 0, 1, …`.
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

/// Plain conjugate gradients from `y⁽⁰⁾ = 0`, stopping at `‖r‖ ≤ tol·‖b‖`.
///
/// `observer` sees every iterate, starting with the zero vector.
pub fn conjugate_gradient<T, A, O>(mut apply: A, b: &[T], tol: f64, max_iter: usize, mut observer: O) -> Result<CgOutcome<T>>
where
    T: Scalar,
    A: FnMut(&[T]) -> Result<Vec<T>>,
    O: FnMut(usize, &[T]),
{
    let n = b.len();
    let mut y = vec![T::zero(); n];
    observer(0, &y);
    let b_norm = norm2(b).as_f64();
    if b_norm == 0.0 {
        return Ok(CgOutcome { solution: y, iterations: 0, relative_residual: 0.0, residual_history: vec![0.0], converged: true });
    }
    let mut r = b.to_vec();
    let mut d = r.clone();
    let mut rr = dot(&r, &r);
    let mut history = vec![1.0];
    let mut k = 0;
    while rr.as_f64().sqrt() > tol * b_norm && k < max_iter {
        let p = apply(&d)?;
        let curvature = dot(&d, &p);
        if !(curvature > T::zero()) {
            return Err(Error::Model(format!(
                "system operator is not positive definite (⟨d, Ad⟩ = {curvature} at iteration {k}); add a nugget component or a positive jitter"
            )));
        }
        let alpha = rr / curvature;
        for i in 0..n {
            y[i] += alpha * d[i];
            r[i] -= alpha * p[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            d[i] = r[i] + beta * d[i];
        }
        rr = rr_new;
        k += 1;
        history.push(rr.as_f64().sqrt() / b_norm);
        observer(k, &y);
    }
    let relative_residual = *history.last().unwrap();
    Ok(CgOutcome { solution: y, iterations: k, relative_residual, residual_history: history, converged: relative_residual <= tol })
}

#[derive(Debug, Clone)]
pub struct FilterOutcome<T> {
    pub estimate: Vec<T>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub jitter: f64,
}

/// Runs the solver and returns `Σ_S y` whether or not it converged.
pub fn solve<T: Scalar>(problem: &FilterProblem<'_, T>) -> Result<FilterOutcome<T>> {
    if problem.is_identity() {
        return Ok(FilterOutcome {
            estimate: problem.data.to_vec(),
            iterations: 0,
            relative_residual: 0.0,
            residual_history: vec![0.0],
            converged: true,
            jitter: 0.0,
        });
    }
    let cg = conjugate_gradient(
        |v| problem.apply_system(v),
        problem.data,
        problem.settings.tol,
        problem.max_iter(),
        |_, _| {},
    )?;
    let estimate = problem.signal.apply(&cg.solution)?;
    Ok(FilterOutcome {
        estimate,
        iterations: cg.iterations,
        relative_residual: cg.relative_residual,
        residual_history: cg.residual_history,
        converged: cg.converged,
        jitter: problem.jitter(),
    })
}

/// Factorial kriging estimate of the signal; non-convergence is an error.
pub fn filter<T: Scalar>(problem: &FilterProblem<'_, T>) -> Result<FilterOutcome<T>> {
    let out = solve(problem)?;
    if !out.converged {
        return Err(Error::NotConverged {
            iterations: out.iterations,
            final_residual: out.relative_residual,
            residual_history: out.residual_history,
        });
    }
    Ok(out)
}

/// Simulated components and their sum.
#[derive(Debug, Clone)]
pub struct Synthetic<T> {
    pub truth: Vec<T>,
    pub noises: Vec<Vec<T>>,
    pub noisy: Vec<T>,
}

impl<T: Scalar> Synthetic<T> {
    /// Sum of all noise components.
    pub fn noise(&self) -> Vec<T> {
        let mut acc = vec![T::zero(); self.truth.len()];
        for nz in &self.noises {
            for (a, &b) in acc.iter_mut().zip(nz) {
                *a += b;
            }
        }
        acc
    }
}

/// Simulates the signal on stream 0 and noise `k` on stream `k + 1`.
pub fn synthesize<T: Scalar>(signal: &ComponentModel<T>, noises: &[ComponentModel<T>], n: usize, seed: u64) -> Result<Synthetic<T>> {
    let truth = signal.simulate_stream(seed, 0, n)?;
    if truth.len() != n {
        return Err(invalid(format!("signal has {} nodes, expected {n}", truth.len())));
    }
    let mut noisy = truth.clone();
    let mut fields = Vec::with_capacity(noises.len());
    for (k, c) in noises.iter().enumerate() {
        let f = c.simulate_stream(seed, k as u64 + 1, n)?;
        if f.len() != n {
            return Err(invalid(format!("noise {k} has {} nodes, expected {n}", f.len())));
        }
        for (a, &b) in noisy.iter_mut().zip(&f) {
            *a += b;
        }
        fields.push(f);
    }
    Ok(Synthetic { truth, noises: fields, noisy })
}

/// Mesh, signal and noise components of a synthetic scene.
pub type SceneParts<T> = (TriMesh<T>, ComponentModel<T>, Vec<ComponentModel<T>>);

/// Two-component scene: a smooth Matérn signal whose anisotropy turns around
/// the domain centre, plus exponential noise with an X-shaped pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub signal_sill: f64,
    pub signal_nu: f64,
    pub signal_ranges: (f64, f64),
    pub noise_sill: f64,
    pub noise_ranges: (f64, f64),
}

impl SyntheticScene {
    /// 400×400 scene with signal ranges 100/20 and noise ranges 25/8.
    pub fn paper_default() -> Self {
        Self {
            nx: 400,
            ny: 400,
            dx: 1.0,
            dy: 1.0,
            signal_sill: 1.0,
            signal_nu: 3.0,
            signal_ranges: (100.0, 20.0),
            noise_sill: 0.4,
            noise_ranges: (25.0, 8.0),
        }
    }

    /// The default scene on an `n×n` grid with all ranges multiplied by `range_scale`.
    pub fn scaled(n: usize, range_scale: f64) -> Self {
        let d = Self::paper_default();
        Self {
            nx: n,
            ny: n,
            signal_ranges: (d.signal_ranges.0 * range_scale, d.signal_ranges.1 * range_scale),
            noise_ranges: (d.noise_ranges.0 * range_scale, d.noise_ranges.1 * range_scale),
            ..d
        }
    }

    /// Mesh, signal component and noise components.
    pub fn build<T: Scalar>(&self, settings: &ApproxSettings) -> Result<SceneParts<T>> {
        let mesh = triangulate_grid(self.nx, self.ny, T::lit(self.dx), T::lit(self.dy))?;
        let signal_aniso = AnisotropyField::vortex(&mesh, T::lit(self.signal_ranges.0), T::lit(self.signal_ranges.1))?;
        let noise_aniso = AnisotropyField::cross(&mesh, T::lit(self.noise_ranges.0), T::lit(self.noise_ranges.1))?;
        let signal = ComponentModel::build(&mesh, SpectralModel::matern(self.signal_sill, self.signal_nu)?, signal_aniso, settings)?;
        let noise = ComponentModel::build(&mesh, SpectralModel::exponential(self.noise_sill)?, noise_aniso, settings)?;
        Ok((mesh, signal, vec![noise]))
    }
}

/// Builds the scene and simulates it.
pub fn make_synthetic<T: Scalar>(scene: &SyntheticScene, seed: u64, settings: &ApproxSettings) -> Result<Synthetic<T>> {
    let (mesh, signal, noises) = scene.build::<T>(settings)?;
    synthesize(&signal, &noises, mesh.node_count(), seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::relative_error;

    fn matern_component(nx: usize, ny: usize, nu: f64, rho: (f64, f64)) -> (TriMesh<f64>, ComponentModel<f64>) {
        let mesh = triangulate_grid(nx, ny, 1.0, 1.0).unwrap();
        let aniso = AnisotropyField::constant(&mesh, 0.3, rho.0, rho.1).unwrap();
        let c = ComponentModel::build(&mesh, SpectralModel::matern(1.0, nu).unwrap(), aniso, &ApproxSettings::default()).unwrap();
        (mesh, c)
    }

    #[test]
    fn nugget_scales_exactly() {
        let c = ComponentModel::<f64>::nugget(0.4).unwrap();
        let v = vec![1.0, -2.5, 3.25];
        assert_eq!(c.apply(&v).unwrap(), vec![0.4 * 1.0, 0.4 * -2.5, 0.4 * 3.25]);
    }

    #[test]
    fn unprepared_component_is_a_state_error() {
        let mesh = triangulate_grid(3, 3, 1.0, 1.0).unwrap();
        let aniso = AnisotropyField::constant(&mesh, 0.0, 1.0, 1.0).unwrap();
        let c = ComponentModel::fem_spectral(SpectralModel::matern(1.0, 1.0).unwrap(), aniso).unwrap();
        assert!(matches!(c.apply(&[0.0; 9]), Err(Error::State(_))));
        assert!(matches!(c.simulate(1, 9), Err(Error::State(_))));
    }

    #[test]
    fn missing_sqrt_is_a_state_error() {
        let mesh = triangulate_grid(3, 3, 1.0, 1.0).unwrap();
        let aniso = AnisotropyField::constant(&mesh, 0.0, 1.0, 1.0).unwrap();
        let settings = ApproxSettings { with_sqrt: false, ..Default::default() };
        let c = ComponentModel::build(&mesh, SpectralModel::matern(1.0, 1.0).unwrap(), aniso, &settings).unwrap();
        assert!(c.apply(&[1.0; 9]).is_ok());
        assert!(matches!(c.simulate(1, 9), Err(Error::State(_))));
    }

    #[test]
    fn noise_free_problem_returns_data() {
        let (mesh, signal) = matern_component(6, 5, 1.0, (1.5, 1.0));
        let data: Vec<f64> = (0..mesh.node_count()).map(|i| (0.4 * i as f64).sin()).collect();
        let settings = SolverSettings { tol: 1e-12, max_iter: Some(2000), jitter: Some(0.0) };
        let p = FilterProblem::new(&data, &signal, &[], settings).unwrap();
        let out = filter(&p).unwrap();
        assert!(relative_error(&out.estimate, &data) < 1e-9);
        assert!(out.relative_residual <= 1e-12);
    }

    #[test]
    fn nugget_pair_is_scalar_shrinkage() {
        let s = ComponentModel::<f64>::nugget(1.5).unwrap();
        let nz = vec![ComponentModel::nugget(0.5).unwrap()];
        let data = vec![1.0, -2.0, 4.0, 0.5];
        let p = FilterProblem::new(&data, &s, &nz, SolverSettings::default()).unwrap();
        assert_eq!(p.jitter(), 0.0);
        let out = filter(&p).unwrap();
        for (e, d) in out.estimate.iter().zip(&data) {
            assert!((e - 0.75 * d).abs() < 1e-10);
        }
    }

    #[test]
    fn default_jitter_only_without_nugget() {
        let (mesh, signal) = matern_component(4, 4, 1.0, (1.0, 1.0));
        let data = vec![1.0; mesh.node_count()];
        let noise = vec![ComponentModel::build(
            &mesh,
            SpectralModel::exponential(0.5).unwrap(),
            AnisotropyField::constant(&mesh, 0.0, 2.0, 1.0).unwrap(),
            &ApproxSettings::default(),
        )
        .unwrap()];
        let p = FilterProblem::new(&data, &signal, &noise, SolverSettings::default()).unwrap();
        assert!((p.jitter() - 1.5e-6).abs() < 1e-18);
        let explicit = SolverSettings { jitter: Some(0.25), ..Default::default() };
        assert_eq!(FilterProblem::new(&data, &signal, &noise, explicit).unwrap().jitter(), 0.25);
    }

    #[test]
    fn rejects_inconsistent_problems() {
        let (_, signal) = matern_component(4, 4, 1.0, (1.0, 1.0));
        let short = vec![1.0; 5];
        assert!(FilterProblem::new(&short, &signal, &[], SolverSettings::default()).is_err());
        let data = vec![1.0; 16];
        let bad = SolverSettings { tol: 0.0, ..Default::default() };
        assert!(FilterProblem::new(&data, &signal, &[], bad).is_err());
        let bad = SolverSettings { max_iter: Some(0), ..Default::default() };
        assert!(FilterProblem::new(&data, &signal, &[], bad).is_err());
    }

    #[test]
    fn non_convergence_carries_history() {
        let (mesh, signal) = matern_component(8, 8, 1.0, (2.0, 1.0));
        let data: Vec<f64> = (0..mesh.node_count()).map(|i| ((i * 7) % 5) as f64).collect();
        let nz = vec![ComponentModel::nugget(0.01).unwrap()];
        let settings = SolverSettings { tol: 1e-14, max_iter: Some(2), jitter: None };
        let p = FilterProblem::new(&data, &signal, &nz, settings).unwrap();
        match filter(&p) {
            Err(Error::NotConverged { iterations, residual_history, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(residual_history.len(), 3);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
        assert!(!solve(&p).unwrap().converged);
    }

    #[test]
    fn indefinite_operator_is_a_model_error() {
        let b = vec![1.0, 1.0];
        let err = conjugate_gradient(|v: &[f64]| Ok(vec![v[0], -v[1]]), &b, 1e-10, 10, |_, _| {}).unwrap_err();
        assert!(matches!(err, Error::Model(_)));
    }

    #[test]
    fn zero_data_gives_zero_estimate() {
        let s = ComponentModel::<f64>::nugget(1.0).unwrap();
        let data = vec![0.0; 3];
        let out = filter(&FilterProblem::new(&data, &s, &[], SolverSettings::default()).unwrap()).unwrap();
        assert_eq!(out.estimate, vec![0.0; 3]);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn simulation_is_deterministic_and_stream_separated() {
        let (mesh, c) = matern_component(7, 6, 1.0, (1.5, 1.0));
        let n = mesh.node_count();
        let a = c.simulate(42, n).unwrap();
        assert_eq!(a, c.simulate(42, n).unwrap());
        assert_ne!(a, c.simulate(43, n).unwrap());
        assert_ne!(a, c.simulate_stream(42, 1, n).unwrap());
    }

    #[test]
    fn normals_are_keyed_by_index() {
        let long: Vec<f64> = standard_normals(100, 9, 3);
        let short: Vec<f64> = standard_normals(10, 9, 3);
        assert_eq!(&long[..10], &short[..]);
    }

    #[test]
    fn nugget_simulation_variance() {
        let c = ComponentModel::<f64>::nugget(1.0).unwrap();
        let draws = c.simulate(2024, 100_000).unwrap();
        let mean: f64 = draws.iter().sum::<f64>() / draws.len() as f64;
        let var: f64 = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn synthetic_sum_is_bitwise() {
        let scene = SyntheticScene { nx: 12, ny: 10, ..SyntheticScene::scaled(12, 0.05) };
        let s = make_synthetic::<f64>(&scene, 5, &ApproxSettings::default()).unwrap();
        for i in 0..s.truth.len() {
            assert_eq!(s.noisy[i], s.truth[i] + s.noises[0][i]);
            assert!(s.noisy[i].is_finite());
        }
    }

    #[test]
    fn single_precision_filter_runs() {
        let mesh = triangulate_grid(6, 6, 1.0f32, 1.0).unwrap();
        let aniso = AnisotropyField::constant(&mesh, 0.0, 2.0, 1.0).unwrap();
        let s = ComponentModel::build(&mesh, SpectralModel::matern(1.0, 1.0).unwrap(), aniso, &ApproxSettings::default()).unwrap();
        let nz = vec![ComponentModel::<f32>::nugget(0.5).unwrap()];
        let data: Vec<f32> = (0..36).map(|i| (i as f32 * 0.3).cos()).collect();
        let settings = SolverSettings { tol: 1e-5, ..Default::default() };
        let out = filter(&FilterProblem::new(&data, &s, &nz, settings).unwrap()).unwrap();
        assert!(out.estimate.iter().all(|x| x.is_finite()));
    }
}
