//! Pipeline configuration read from TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{make_grid, Axis, Grid};
use crate::io::{read_json, FieldRecord};
use crate::pde::{build_phi_family, Dirichlet, PhiFamily, Seed};
use crate::registry::{self, expression, Resolution, EXAMPLES};
use crate::surface::Kind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Built-in example supplying the family or hypersurface.
    #[serde(default)]
    pub example: Option<String>,
    #[serde(default = "default_kind")]
    pub kind: Kind,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub m: MSource,
    /// One seed per component `phi_0 .. phi_{n+1}`.
    #[serde(default)]
    pub seeds: Vec<SeedSpec>,
    #[serde(default)]
    pub fiber: FiberConfig,
    #[serde(default)]
    pub gates: GateConfig,
    /// Base node `(i, j)`; the rigidity probe is centred on it.
    #[serde(default)]
    pub base: Option<[usize; 2]>,
    #[serde(default)]
    pub bending: BendingConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_kind() -> Kind {
    Kind::Real
}

fn default_n() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub u: Option<[f64; 2]>,
    #[serde(default)]
    pub v: Option<[f64; 2]>,
    #[serde(default = "default_count")]
    pub nu: usize,
    #[serde(default = "default_count")]
    pub nv: usize,
}

fn default_count() -> usize {
    65
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { u: None, v: None, nu: 65, nv: 65 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberConfig {
    #[serde(default)]
    pub range: Option<[f64; 2]>,
    #[serde(default = "default_fiber_count")]
    pub count: usize,
}

fn default_fiber_count() -> usize {
    9
}

impl Default for FiberConfig {
    fn default() -> Self {
        FiberConfig { range: None, count: 9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateConfig {
    /// Multiplies every library gate.
    #[serde(default = "default_scale")]
    pub scale: f64,
    /// Absolute gates by residual name, replacing the scaled library value.
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
}

fn default_scale() -> f64 {
    1.0
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig { scale: 1.0, overrides: BTreeMap::new() }
    }
}

impl GateConfig {
    pub fn apply(&self, name: &str, library: f64) -> f64 {
        let base = name.split('@').next().unwrap_or(name);
        self.overrides.get(base).copied().unwrap_or(library * self.scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BendingConfig {
    /// Deformation parameters checked by `verify`.
    #[serde(default = "default_t")]
    pub t: Vec<f64>,
    /// Probe node counts of the rigidity analysis.
    #[serde(default = "default_probe")]
    pub probe: [usize; 3],
    /// Constant seed of theta on the seed curve (ruled case).
    #[serde(default = "default_theta0")]
    pub theta0: f64,
    /// Points sampled for the pointwise kernel.
    #[serde(default = "default_kernel_points")]
    pub kernel_points: usize,
}

fn default_t() -> Vec<f64> {
    vec![0.1, 0.5, 1.0]
}

fn default_probe() -> [usize; 3] {
    [9, 9, 3]
}

fn default_theta0() -> f64 {
    1.0
}

fn default_kernel_points() -> usize {
    100
}

impl Default for BendingConfig {
    fn default() -> Self {
        BendingConfig { t: default_t(), probe: default_probe(), theta0: 1.0, kernel_points: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    /// Ambient coordinates written to OBJ vertices.
    #[serde(default = "default_coords")]
    pub mesh_coords: [usize; 3],
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_coords() -> [usize; 3] {
    [0, 1, 2]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_out(), mesh_coords: default_coords() }
    }
}

/// Source of the potential `M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum MSource {
    Constant(f64),
    File(PathBuf),
    Expr(String),
}

impl Default for MSource {
    fn default() -> Self {
        MSource::Constant(0.0)
    }
}

/// Seed data of one component: a named closed form or a field file whose
/// boundary trace is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum SeedSpec {
    Expr(String),
    File(PathBuf),
}

impl PipelineConfig {
    /// Reads a TOML file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = crate::io::read_text(path)?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(dir);
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<PipelineConfig> {
        toml::from_str(text).map_err(|e| Error::Input(e.to_string()))
    }

    /// Config naming only a built-in example.
    pub fn for_example(name: &str) -> PipelineConfig {
        PipelineConfig {
            example: Some(name.to_string()),
            kind: default_kind(),
            n: 3,
            grid: GridConfig::default(),
            m: MSource::default(),
            seeds: Vec::new(),
            fiber: FiberConfig::default(),
            gates: GateConfig::default(),
            base: None,
            bending: BendingConfig::default(),
            output: OutputConfig::default(),
        }
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let MSource::File(p) = &mut self.m {
            join(p);
        }
        for s in &mut self.seeds {
            if let SeedSpec::File(p) = s {
                join(p);
            }
        }
        join(&mut self.output.dir);
    }

    /// Applies a `NUxNV[xNS]` grid override.
    pub fn set_grid(&mut self, spec: &str) -> Result<()> {
        let parts: Vec<usize> = spec
            .split('x')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Input(format!("grid spec '{spec}' is not of the form NUxNV or NUxNVxNS")))?;
        match parts.as_slice() {
            [nu, nv] => {
                self.grid.nu = *nu;
                self.grid.nv = *nv;
            }
            [nu, nv, ns] => {
                self.grid.nu = *nu;
                self.grid.nv = *nv;
                self.fiber.count = *ns;
            }
            _ => return Err(Error::Input(format!("grid spec '{spec}' is not of the form NUxNV or NUxNVxNS"))),
        }
        Ok(())
    }

    /// Checks gate overrides, file references and the example name.
    pub fn validate(&self) -> Result<()> {
        if !(self.gates.scale > 0.0 && self.gates.scale.is_finite()) {
            return Err(Error::Input(format!("gate scale must be positive, got {}", self.gates.scale)));
        }
        for (name, g) in &self.gates.overrides {
            if !(*g > 0.0 && g.is_finite()) {
                return Err(Error::Input(format!("gate override for '{name}' must be positive, got {g}")));
            }
        }
        if let Some(ex) = &self.example {
            if !EXAMPLES.contains(&ex.as_str()) {
                return Err(Error::Input(format!("unknown example '{ex}' (known: {})", EXAMPLES.join(", "))));
            }
        }
        let mut files: Vec<&Path> = Vec::new();
        if let MSource::File(p) = &self.m {
            files.push(p);
        }
        for s in &self.seeds {
            if let SeedSpec::File(p) = s {
                files.push(p);
            }
        }
        for p in files {
            if !p.is_file() {
                return Err(Error::Input(format!("referenced file {} does not exist", p.display())));
            }
        }
        if self.bending.t.is_empty() {
            return Err(Error::Input("verify needs at least one t".into()));
        }
        Ok(())
    }

    pub fn resolution(&self) -> Resolution {
        Resolution { nu: self.grid.nu, nv: self.grid.nv, ns: self.fiber.count }
    }

    /// Hex SHA-256 of the canonical JSON form of the configuration.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canon.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Base grid of a family built from explicit seeds.
    pub fn base_grid(&self) -> Result<Grid> {
        let (u, v) = match (self.grid.u, self.grid.v) {
            (Some(u), Some(v)) => (u, v),
            _ => return Err(Error::Input("grid.u and grid.v are required without an example".into())),
        };
        make_grid((u[0], u[1]), (v[0], v[1]), self.grid.nu, self.grid.nv)
    }

    pub fn fiber_axis(&self, default: (f64, f64)) -> Result<Axis> {
        let r = self.fiber.range.map_or(default, |r| (r[0], r[1]));
        Axis::new(r.0, r.1, self.fiber.count)
    }

    /// Builds the family from explicit seeds or from the example.
    pub fn family(&self) -> Result<PhiFamily> {
        if self.seeds.is_empty() {
            let name = self
                .example
                .as_deref()
                .ok_or_else(|| Error::Input("config needs seeds or an example".into()))?;
            return match name {
                "clifford" => registry::clifford_family(self.grid.nu, self.grid.nv, registry::clifford_phi0),
                "cone" => registry::clifford_family(self.grid.nu, self.grid.nv, |_, _| 0.0),
                "elliptic-demo" => registry::elliptic_family(self.grid.nu, self.grid.nv),
                other => Err(Error::Input(format!("example '{other}' is not generated from a family"))),
            };
        }
        let grid = self.base_grid()?;
        let m = match &self.m {
            MSource::Constant(c) => crate::field::ScalarField::constant(&grid, *c),
            MSource::Expr(id) => {
                let f = expression(id)?;
                crate::field::ScalarField::sample(&grid, |u, v, _| f(u, v))
            }
            MSource::File(p) => {
                let f = read_json::<FieldRecord>(p)?.to_scalar()?;
                if f.grid() != &grid {
                    return Err(Error::Input(format!("{}: field grid differs from the configured grid", p.display())));
                }
                f
            }
        };
        let seeds = self.seeds.iter().map(|s| self.seed(s, &grid)).collect::<Result<Vec<_>>>()?;
        build_phi_family(&m, self.kind, &seeds, self.n)
    }

    fn seed(&self, spec: &SeedSpec, grid: &Grid) -> Result<Seed> {
        match spec {
            SeedSpec::Expr(id) => {
                let f = expression(id)?;
                match self.kind {
                    Kind::Real => Ok(registry::characteristic_seed(grid, f)),
                    Kind::Complex => registry::dirichlet_seed(grid, f),
                }
            }
            SeedSpec::File(p) => {
                let field = read_json::<FieldRecord>(p)?.to_scalar()?;
                if field.grid() != grid {
                    return Err(Error::Input(format!("{}: seed grid differs from the configured grid", p.display())));
                }
                Ok(match self.kind {
                    Kind::Real => {
                        let (nu, nv) = (grid.axes()[0].n, grid.axes()[1].n);
                        Seed::Characteristic {
                            a: (0..nu).map(|i| field.at(i, 0, 0)).collect(),
                            b: (0..nv).map(|j| field.at(0, j, 0)).collect(),
                        }
                    }
                    Kind::Complex => Seed::Dirichlet(Dirichlet::from_field(&field)),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg = PipelineConfig::from_toml(
            r#"
            kind = "complex"
            n = 3
            seeds = [{ expr = "sin-u" }, { expr = "one" }, { expr = "u" }, { expr = "v" }, { expr = "uv" }]
            m = { constant = 0.25 }
            [grid]
            u = [-0.3, 0.3]
            v = [-0.3, 0.3]
            nu = 17
            nv = 17
            [gates.overrides]
            iif = 0.5
            "#,
        )
        .unwrap();
        assert_eq!(cfg.kind, Kind::Complex);
        assert_eq!(cfg.seeds.len(), 5);
        assert_eq!(cfg.m, MSource::Constant(0.25));
        assert_eq!(cfg.gates.apply("iif@t=0.5", 1.0), 0.5);
        assert_eq!(cfg.gates.apply("var", 2.0), 2.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_keys_and_bad_gates() {
        assert!(PipelineConfig::from_toml("colour = 1").is_err());
        let mut cfg = PipelineConfig::for_example("clifford");
        cfg.gates.overrides.insert("iif".into(), -1.0);
        assert!(matches!(cfg.validate(), Err(Error::Input(_))));
    }

    #[test]
    fn hash_tracks_content() {
        let a = PipelineConfig::for_example("clifford");
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.set_grid("33x33x5").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(b.resolution(), Resolution { nu: 33, nv: 33, ns: 5 });
        assert!(b.set_grid("33by33").is_err());
    }
}
