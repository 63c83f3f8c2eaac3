//! Experiment configuration: a TOML file with `grid`, `medium`, `source`,
//! `solver`, `run`, `reconstruct` and `gauge` sections.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rte_inverse::grid::{DirectionGrid, PolarGrid, ScalarField, VectorField};
use rte_inverse::io::read_scalar_field;
use rte_inverse::primitives::{Primitive, Profile};
use rte_inverse::transport::{ForwardParams, MediumSpec, SourceSpec};
use serde::Deserialize;
use sha2::{Digest, Sha256};

/// Configuration problems; the message names the offending field.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn cfg_err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PrimitiveSpec {
    Gaussian {
        center: [f64; 2],
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Constant {
        value: f64,
    },
    Polynomial {
        coeffs: Vec<f64>,
    },
    Bump {
        center: [f64; 2],
        radius: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl PrimitiveSpec {
    fn to_primitive(&self) -> Primitive {
        match self {
            PrimitiveSpec::Gaussian {
                center,
                width,
                amplitude,
            } => Primitive::Gaussian {
                center: Complex64::new(center[0], center[1]),
                width: *width,
                amplitude: *amplitude,
            },
            PrimitiveSpec::Constant { value } => Primitive::Constant(*value),
            PrimitiveSpec::Polynomial { coeffs } => Primitive::RadialPolynomial(coeffs.clone()),
            PrimitiveSpec::Bump {
                center,
                radius,
                amplitude,
            } => Primitive::Bump {
                center: Complex64::new(center[0], center[1]),
                radius: *radius,
                amplitude: *amplitude,
            },
        }
    }
}

fn profile(terms: &[PrimitiveSpec], field: &str) -> Result<Profile, ConfigError> {
    let mut out = Vec::with_capacity(terms.len());
    for (i, t) in terms.iter().enumerate() {
        let p = t.to_primitive();
        if let Err(e) = p.validate() {
            let msg = e
                .to_string()
                .trim_start_matches("parse error: ")
                .to_string();
            return cfg_err(format!("{field}[{i}]: {msg}"));
        }
        out.push(p);
    }
    Ok(Profile(out))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nr: usize,
    pub nbeta: usize,
    pub ntheta: usize,
    pub n: Option<usize>,
    pub h_ray: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSection {
    #[serde(default)]
    pub a: Vec<PrimitiveSpec>,
    pub a_file: Option<PathBuf>,
    /// `k[n]` is the profile of `k_{-n}`.
    #[serde(default)]
    pub k: Vec<Vec<PrimitiveSpec>>,
    /// Declared kernel degree `M`.
    pub m: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorSection {
    #[serde(default)]
    pub gradient: Vec<PrimitiveSpec>,
    #[serde(default)]
    pub perp_gradient: Vec<PrimitiveSpec>,
    #[serde(default)]
    pub x: Vec<PrimitiveSpec>,
    #[serde(default)]
    pub y: Vec<PrimitiveSpec>,
    pub x_file: Option<PathBuf>,
    pub y_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    #[serde(default)]
    pub f0: Vec<PrimitiveSpec>,
    pub f0_file: Option<PathBuf>,
    #[serde(rename = "F", default)]
    pub f: VectorSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub noise_std: f64,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    200
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iter: default_max_iter(),
            noise_std: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub command: Option<String>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSpec {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructSection {
    pub variant: Option<String>,
    /// Disk where `f0` is known to vanish, for the `remark` variant.
    pub mask: Option<MaskSpec>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeSection {
    /// Isotropic part of the partner source; the `source` section is the other pair.
    #[serde(default)]
    pub f0: Vec<PrimitiveSpec>,
    #[serde(default = "default_boundary_tol")]
    pub boundary_tol: f64,
}

fn default_boundary_tol() -> f64 {
    rte_inverse::gauge::BOUNDARY_TOL
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub grid: GridSection,
    #[serde(default)]
    pub medium: MediumSection,
    pub source: Option<SourceSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub reconstruct: ReconstructSection,
    pub gauge: Option<GaugeSection>,
}

/// A parsed configuration with the directory relative file paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: Config,
    pub hash: String,
    pub base: PathBuf,
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str(&text, base)
    }

    pub fn from_str(text: &str, base: PathBuf) -> Result<Self, ConfigError> {
        let config: Config =
            toml::from_str(text).map_err(|e| ConfigError(e.to_string().trim_end().to_string()))?;
        let hash = hex::encode(Sha256::digest(text.as_bytes()));
        let loaded = Self { config, hash, base };
        loaded.validate()?;
        Ok(loaded)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let c = &self.config;
        self.polar_grid()?;
        self.directions()?;
        if let Some(h) = c.grid.h_ray {
            if !(h.is_finite() && h > 0.0) {
                return cfg_err("grid.h_ray must be positive");
            }
        }
        if !(c.solver.tol.is_finite() && c.solver.tol > 0.0) {
            return cfg_err("solver.tol must be positive");
        }
        if c.solver.max_iter == 0 {
            return cfg_err("solver.max_iter must be at least 1");
        }
        if !(c.solver.noise_std.is_finite() && c.solver.noise_std >= 0.0) {
            return cfg_err("solver.noise_std must be non-negative");
        }
        profile(&c.medium.a, "medium.a")?;
        for (n, k) in c.medium.k.iter().enumerate() {
            profile(k, &format!("medium.k[{n}]"))?;
        }
        if let Some(m) = c.medium.m {
            if c.medium.k.len() > m + 1 {
                return cfg_err(format!(
                    "medium.k has {} harmonics but medium.m = {m}",
                    c.medium.k.len()
                ));
            }
        }
        if let Some(s) = &c.source {
            profile(&s.f0, "source.f0")?;
            profile(&s.f.gradient, "source.F.gradient")?;
            profile(&s.f.perp_gradient, "source.F.perp_gradient")?;
            profile(&s.f.x, "source.F.x")?;
            profile(&s.f.y, "source.F.y")?;
        }
        if let Some(g) = &c.gauge {
            profile(&g.f0, "gauge.f0")?;
            if !(g.boundary_tol.is_finite() && g.boundary_tol > 0.0) {
                return cfg_err("gauge.boundary_tol must be positive");
            }
        }
        if let Some(m) = &c.reconstruct.mask {
            if !(m.radius.is_finite() && m.radius >= 0.0) {
                return cfg_err("reconstruct.mask.radius must be non-negative");
            }
        }
        Ok(())
    }

    pub fn polar_grid(&self) -> Result<PolarGrid, ConfigError> {
        PolarGrid::new(self.config.grid.nr, self.config.grid.nbeta)
            .map_err(|e| ConfigError(format!("grid: {e}")))
    }

    pub fn directions(&self) -> Result<DirectionGrid, ConfigError> {
        DirectionGrid::new(self.config.grid.ntheta)
            .map_err(|e| ConfigError(format!("grid.ntheta: {e}")))
    }

    /// The same experiment on a grid refined `2^level` times in `r` and `beta`.
    pub fn refined(&self, level: u32) -> Self {
        let mut out = self.clone();
        out.config.grid.nr <<= level;
        out.config.grid.nbeta <<= level;
        out.config.grid.h_ray = out.config.grid.h_ray.map(|h| h / f64::from(1u32 << level));
        out
    }

    pub fn forward_params(&self) -> ForwardParams {
        ForwardParams {
            tol: self.config.solver.tol,
            max_iter: self.config.solver.max_iter,
            h_ray: self.config.grid.h_ray,
        }
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn scalar(
        &self,
        terms: &[PrimitiveSpec],
        file: Option<&PathBuf>,
        name: &str,
        grid: PolarGrid,
    ) -> anyhow::Result<ScalarField> {
        let mut f = profile(terms, name)?.field(grid);
        if let Some(path) = file {
            let path = self.resolve(path);
            let file = std::fs::File::open(&path).map_err(|e| {
                ConfigError(format!("{name}_file: cannot open {}: {e}", path.display()))
            })?;
            let extra = read_scalar_field(file, grid)
                .map_err(|e| ConfigError(format!("{name}_file: {e}")))?;
            f = f.add(&extra);
        }
        Ok(f)
    }

    pub fn medium(&self) -> anyhow::Result<MediumSpec> {
        let grid = self.polar_grid()?;
        let m = &self.config.medium;
        let a = self.scalar(&m.a, m.a_file.as_ref(), "medium.a", grid)?;
        let mut k = Vec::with_capacity(m.k.len().max(1));
        for (n, terms) in m.k.iter().enumerate() {
            k.push(profile(terms, &format!("medium.k[{n}]"))?.field(grid));
        }
        if let Some(deg) = m.m {
            while k.len() < deg + 1 {
                k.push(ScalarField::zeros(grid));
            }
        }
        if k.is_empty() {
            k.push(ScalarField::zeros(grid));
        }
        Ok(MediumSpec::new(a, k)?)
    }

    fn source_section(&self) -> Result<&SourceSection, ConfigError> {
        self.config
            .source
            .as_ref()
            .ok_or_else(|| ConfigError("missing [source] section".into()))
    }

    pub fn has_source(&self) -> bool {
        self.config.source.is_some()
    }

    pub fn source(&self) -> anyhow::Result<SourceSpec> {
        let grid = self.polar_grid()?;
        let s = self.source_section()?;
        let f0 = self.scalar(&s.f0, s.f0_file.as_ref(), "source.f0", grid)?;
        let v = &s.f;
        let mut f = profile(&v.gradient, "source.F.gradient")?
            .gradient_field(grid)
            .add(&profile(&v.perp_gradient, "source.F.perp_gradient")?.perp_gradient_field(grid));
        let x = self.scalar(&v.x, v.x_file.as_ref(), "source.F.x", grid)?;
        let y = self.scalar(&v.y, v.y_file.as_ref(), "source.F.y", grid)?;
        f = f.add(&VectorField::new(x, y)?);
        Ok(SourceSpec::new(f0, f)?)
    }

    /// Whether the configured vector part is divergence free by construction.
    pub fn source_is_divergence_free(&self) -> bool {
        self.config.source.as_ref().is_some_and(|s| {
            s.f.gradient.is_empty()
                && s.f.x.is_empty()
                && s.f.y.is_empty()
                && s.f.x_file.is_none()
                && s.f.y_file.is_none()
        })
    }

    /// Mask of nodes inside the configured disk; the whole grid if none is given.
    pub fn mask(&self) -> anyhow::Result<Vec<bool>> {
        let grid = self.polar_grid()?;
        Ok(match &self.config.reconstruct.mask {
            None => vec![true; grid.len()],
            Some(m) => {
                let c = Complex64::new(m.center[0], m.center[1]);
                grid.points().map(|z| (z - c).norm() < m.radius).collect()
            }
        })
    }

    pub fn gauge_f0(&self) -> anyhow::Result<Option<ScalarField>> {
        let grid = self.polar_grid()?;
        match &self.config.gauge {
            Some(g) if !g.f0.is_empty() => Ok(Some(profile(&g.f0, "gauge.f0")?.field(grid))),
            _ => Ok(None),
        }
    }

    /// Comment lines placed at the top of every output file.
    pub fn manifest(&self, command: &str) -> Vec<String> {
        let g = &self.config.grid;
        vec![
            format!(
                "rte-inverse {} config_sha256={}",
                env!("CARGO_PKG_VERSION"),
                self.hash
            ),
            format!(
                "command={command} nr={} nbeta={} ntheta={}",
                g.nr, g.nbeta, g.ntheta
            ),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[grid]
nr = 16
nbeta = 32
ntheta = 16

[medium]
a = [{ type = "constant", value = 0.5 }]
k = [[{ type = "constant", value = 0.1 }], []]

[source]
f0 = [{ type = "gaussian", center = [0.1, 0.0], width = 0.3 }]
F.perp_gradient = [{ type = "gaussian", center = [0.0, 0.1], width = 0.2, amplitude = 0.5 }]
"#;

    #[test]
    fn parses_and_builds_fields() {
        let c = LoadedConfig::from_str(MINIMAL, PathBuf::new()).unwrap();
        let med = c.medium().unwrap();
        assert_eq!(med.degree(), 1);
        let src = c.source().unwrap();
        assert!(src.f0.max_abs() > 0.9);
        assert!(c.source_is_divergence_free());
        assert_eq!(c.hash.len(), 64);
        assert!(c.manifest("forward")[0].starts_with("rte-inverse 0.1.0 config_sha256="));
    }

    #[test]
    fn negative_width_names_the_field() {
        let bad = MINIMAL.replace("width = 0.3", "width = -0.3");
        let err = LoadedConfig::from_str(&bad, PathBuf::new()).unwrap_err();
        assert!(
            err.0.contains("source.f0[0]") && err.0.contains("width"),
            "{err}"
        );
    }

    #[test]
    fn syntax_errors_carry_the_line() {
        let bad = MINIMAL.replace("ntheta = 16", "ntheta = sixteen");
        let err = LoadedConfig::from_str(&bad, PathBuf::new()).unwrap_err();
        assert!(err.0.contains("line 5"), "{err}");
        let bad = MINIMAL.replace("[source]", "[source]\nbogus = 1");
        assert!(LoadedConfig::from_str(&bad, PathBuf::new())
            .unwrap_err()
            .0
            .contains("bogus"));
    }

    #[test]
    fn declared_degree_is_enforced() {
        let bad = MINIMAL.replace("[medium]", "[medium]\nm = 0");
        assert!(LoadedConfig::from_str(&bad, PathBuf::new())
            .unwrap_err()
            .0
            .contains("medium.m"));
    }

    #[test]
    fn shipped_configs_load() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut n = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "toml") {
                let cfg = LoadedConfig::from_path(&path)
                    .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
                let medium = cfg.medium().unwrap();
                if cfg.has_source() {
                    cfg.source().unwrap();
                }
                medium.check_subcritical(1e-8).unwrap();
                n += 1;
            }
        }
        assert!(n >= 9);
    }
}
