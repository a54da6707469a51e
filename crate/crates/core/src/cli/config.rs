//! JSON job configuration.
//!
//! ```json
//! {
//!   "grid": {"nx": 100, "ny": 100, "dx": 1.0, "dy": 1.0},
//!   "signal": {"model": {"family": "matern", "sill": 1.0, "nu": 3.0},
//!              "anisotropy": {"mode": "vortex", "rho1": 25.0, "rho2": 5.0}},
//!   "noises": [
//!     {"model": {"family": "exponential", "sill": 0.4},
//!      "anisotropy": {"mode": "constant", "theta": 0.785, "rho1": 6.25, "rho2": 2.0}},
//!     {"family": "nugget", "sill": 0.05}
//!   ],
//!   "solver": {"tol": 1e-6, "max_iter": 500, "degree": 256, "jitter": 0.0},
//!   "seed": 7
//! }
//! ```
//!
//! Angles are in radians. Raster paths are relative to the config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::anisotropy::AnisotropyField;
use crate::cli::grid::read_grid;
use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::spectral::{Family, SpectralModel};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub grid: GridConfig,
    pub signal: ComponentConfig,
    #[serde(default)]
    pub noises: Vec<NoiseConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: Family,
    pub sill: f64,
    #[serde(default)]
    pub nu: Option<f64>,
}

impl ModelConfig {
    pub fn to_model(&self) -> Result<SpectralModel> {
        if self.family != Family::Matern && self.nu.is_some() {
            return Err(Error::Config(format!("'nu' is only valid for the matern family, not {}", self.family.name())));
        }
        SpectralModel::new(self.family, self.sill, self.nu).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum AnisotropyConfig {
    Constant { theta: f64, rho1: f64, rho2: f64 },
    /// Three GRIDF64 rasters with per-node angle and ranges.
    Rasters { theta: PathBuf, rho1: PathBuf, rho2: PathBuf },
    /// Major axis tangent to circles around the grid centre.
    Vortex { rho1: f64, rho2: f64 },
    /// Major axis turning by ±45° across the grid diagonals.
    Cross { rho1: f64, rho2: f64 },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub anisotropy: Option<AnisotropyConfig>,
}

/// A noise entry: a full component, or the `{"family": "nugget", "sill": s}`
/// shorthand.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(try_from = "serde_json::Value")]
pub struct NoiseConfig(pub ComponentConfig);

impl TryFrom<serde_json::Value> for NoiseConfig {
    type Error = String;

    fn try_from(v: serde_json::Value) -> std::result::Result<Self, String> {
        let is_component = v.get("model").is_some();
        if is_component {
            serde_json::from_value::<ComponentConfig>(v).map(NoiseConfig).map_err(|e| e.to_string())
        } else {
            let m: ModelConfig = serde_json::from_value(v).map_err(|e| e.to_string())?;
            if m.family != Family::Nugget {
                return Err(format!("noise shorthand is only valid for the nugget family, got {}", m.family.name()));
            }
            Ok(NoiseConfig(ComponentConfig { model: m, anisotropy: None }))
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    /// Fixed Chebyshev degree; the automatic doubling policy when absent.
    #[serde(default)]
    pub degree: Option<usize>,
    #[serde(default)]
    pub jitter: Option<f64>,
    /// Overrides the Chebyshev interval end `l`.
    #[serde(default)]
    pub interval_end: Option<f64>,
}

impl JobConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: JobConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads a config file; the returned directory anchors relative raster paths.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PathBuf)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::parse(&text)?, base))
    }

    pub fn components(&self) -> impl Iterator<Item = (String, &ComponentConfig)> {
        std::iter::once(("signal".to_string(), &self.signal))
            .chain(self.noises.iter().enumerate().map(|(k, n)| (format!("noise-{}", k + 1), &n.0)))
    }

    fn check(&self) -> Result<()> {
        let g = self.grid;
        crate::mesh::Grid::new(g.nx, g.ny, g.dx, g.dy).map_err(|e| Error::Config(e.to_string()))?;
        for (name, c) in self.components() {
            let model = c.model.to_model().map_err(|e| Error::Config(format!("{name}: {e}")))?;
            match (&c.anisotropy, model.is_nugget()) {
                (None, false) => {
                    return Err(Error::Config(format!("{name}: a {} model needs an anisotropy", model.family().name())))
                }
                (Some(_), true) => return Err(Error::Config(format!("{name}: a nugget takes no anisotropy"))),
                _ => {}
            }
            if !model.is_nugget() && (g.nx < 2 || g.ny < 2) {
                return Err(Error::Config(format!("{name}: finite-element components need at least 2x2 nodes")));
            }
        }
        if let Some(t) = self.solver.tol {
            if !(t > 0.0) {
                return Err(Error::Config(format!("solver.tol must be positive, got {t}")));
            }
        }
        if self.solver.max_iter == Some(0) {
            return Err(Error::Config("solver.max_iter must be at least 1".into()));
        }
        if let Some(j) = self.solver.jitter {
            if !(j >= 0.0) {
                return Err(Error::Config(format!("solver.jitter must be non-negative, got {j}")));
            }
        }
        if let Some(l) = self.solver.interval_end {
            if !(l > 0.0) {
                return Err(Error::Config(format!("solver.interval_end must be positive, got {l}")));
            }
        }
        Ok(())
    }
}

impl AnisotropyConfig {
    /// The field on `mesh`. Rasters must have the dimensions of `source`; when
    /// `source` differs from the mesh grid they are resampled to the nearest node.
    pub fn to_field(&self, mesh: &TriMesh<f64>, source: &GridConfig, base: &Path) -> Result<AnisotropyField<f64>> {
        match self {
            AnisotropyConfig::Constant { theta, rho1, rho2 } => AnisotropyField::constant(mesh, *theta, *rho1, *rho2),
            AnisotropyConfig::Vortex { rho1, rho2 } => AnisotropyField::vortex(mesh, *rho1, *rho2),
            AnisotropyConfig::Cross { rho1, rho2 } => AnisotropyField::cross(mesh, *rho1, *rho2),
            AnisotropyConfig::Rasters { theta, rho1, rho2 } => {
                let load = |p: &PathBuf| -> Result<Vec<f64>> {
                    let full = base.join(p);
                    let (h, v) = read_grid(&full)?;
                    if h.nx != source.nx || h.ny != source.ny {
                        return Err(Error::Config(format!(
                            "raster {} is {}x{}, grid is {}x{}",
                            full.display(),
                            h.nx,
                            h.ny,
                            source.nx,
                            source.ny
                        )));
                    }
                    Ok(v)
                };
                let field = AnisotropyField::new(load(theta)?, load(rho1)?, load(rho2)?)?;
                let g = mesh.grid();
                if g.nx == source.nx && g.ny == source.ny {
                    Ok(field)
                } else {
                    let from = crate::mesh::triangulate_grid(source.nx, source.ny, source.dx, source.dy)?;
                    field.resample(&from, mesh)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "grid": {"nx": 10, "ny": 8, "dx": 1.0, "dy": 0.5},
        "signal": {"model": {"family": "matern", "sill": 1.0, "nu": 3.0},
                   "anisotropy": {"mode": "constant", "theta": 0.0, "rho1": 2.0, "rho2": 1.0}},
        "noises": [
            {"model": {"family": "exponential", "sill": 0.4},
             "anisotropy": {"mode": "cross", "rho1": 3.0, "rho2": 1.0}},
            {"family": "nugget", "sill": 0.1}
        ],
        "solver": {"tol": 1e-8, "degree": 128},
        "seed": 3
    }"#;

    #[test]
    fn parses_full_config() {
        let c = JobConfig::parse(BASE).unwrap();
        assert_eq!(c.grid.nx, 10);
        assert_eq!(c.noises.len(), 2);
        assert_eq!(c.noises[1].0.model.family, Family::Nugget);
        assert_eq!(c.solver.degree, Some(128));
        assert_eq!(c.seed, Some(3));
        let names: Vec<String> = c.components().map(|(n, _)| n).collect();
        assert_eq!(names, ["signal", "noise-1", "noise-2"]);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = BASE.replace("\"seed\": 3", "\"seed\": 3, \"extra\": 1");
        assert!(matches!(JobConfig::parse(&bad), Err(Error::Config(_))));
        let bad = BASE.replace("\"tol\": 1e-8", "\"tolerance\": 1e-8");
        assert!(JobConfig::parse(&bad).is_err());
        let bad = BASE.replace("\"mode\": \"cross\"", "\"mode\": \"cross\", \"theta\": 1.0");
        assert!(JobConfig::parse(&bad).is_err());
        let bad = BASE.replace("{\"family\": \"nugget\", \"sill\": 0.1}", "{\"family\": \"nugget\", \"sill\": 0.1, \"x\": 2}");
        assert!(JobConfig::parse(&bad).is_err());
    }

    #[test]
    fn rejects_inconsistent_components() {
        let bad = BASE.replace("{\"family\": \"nugget\", \"sill\": 0.1}", "{\"family\": \"matern\", \"sill\": 0.1}");
        assert!(JobConfig::parse(&bad).is_err());
        let no_aniso = r#"{"grid": {"nx": 4, "ny": 4, "dx": 1, "dy": 1},
            "signal": {"model": {"family": "exponential", "sill": 1}}}"#;
        assert!(JobConfig::parse(no_aniso).is_err());
        let nu_on_exp = BASE.replace("\"family\": \"exponential\", \"sill\": 0.4", "\"family\": \"exponential\", \"sill\": 0.4, \"nu\": 2");
        assert!(JobConfig::parse(&nu_on_exp).is_err());
        let neg = BASE.replace("\"sill\": 0.1", "\"sill\": -0.1");
        assert!(JobConfig::parse(&neg).is_err());
    }

    #[test]
    fn raster_anisotropy_is_loaded_and_checked() {
        use crate::cli::grid::{write_grid, GridHeader};
        let dir = tempfile::tempdir().unwrap();
        let h = GridHeader { nx: 4, ny: 3, dx: 1.0, dy: 1.0 };
        write_grid(dir.path().join("t.grd"), &h, &[0.3; 12]).unwrap();
        write_grid(dir.path().join("r1.grd"), &h, &[2.0; 12]).unwrap();
        write_grid(dir.path().join("r2.grd"), &h, &[1.0; 12]).unwrap();
        let cfg = AnisotropyConfig::Rasters { theta: "t.grd".into(), rho1: "r1.grd".into(), rho2: "r2.grd".into() };
        let mesh = crate::mesh::triangulate_grid(4, 3, 1.0, 1.0).unwrap();
        let src = GridConfig { nx: 4, ny: 3, dx: 1.0, dy: 1.0 };
        let f = cfg.to_field(&mesh, &src, dir.path()).unwrap();
        assert_eq!(f.rho1()[5], 2.0);
        let wrong = GridConfig { nx: 5, ny: 3, dx: 1.0, dy: 1.0 };
        assert!(cfg.to_field(&mesh, &wrong, dir.path()).is_err());
        let small = crate::mesh::triangulate_grid(2, 2, 1.0, 1.0).unwrap();
        assert_eq!(cfg.to_field(&small, &src, dir.path()).unwrap().len(), 4);
    }
}
