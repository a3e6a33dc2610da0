//! Scenario files.
//!
//! A scenario is TOML (or JSON with the same schema):
//!
//! ```toml
//! name = "pinched_ellipsoid"
//! seed = 42
//! output_dir = "runs/pinched"   # optional, defaults to <out>/<name>
//!
//! [surface]
//! kind = "ellipsoid_plus_bump"  # icosphere | ellipsoid_plus_bump | product_torus | off_file
//! a1 = 1.2
//! a2 = 1.0
//! a3 = 0.9
//! eps4 = 0.1
//! subdivisions = 3
//!
//! [flow]                        # any FlowConfig field; omitted fields take defaults
//! k = 0.725
//!
//! [certifier]                   # optional; when present `flow` also writes a certificate
//! k = 0.725
//! grid = 256
//! random_samples = 1000000
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::certifier::CertifyOptions;
use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::flow::io::read_off4;
use crate::flow::mesh::{SurfaceMesh, ellipsoid_plus_bump, icosphere, product_torus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceSpec {
    Icosphere {
        radius: f64,
        subdivisions: u32,
    },
    EllipsoidPlusBump {
        a1: f64,
        a2: f64,
        a3: f64,
        eps4: f64,
        subdivisions: u32,
    },
    ProductTorus {
        r1: f64,
        r2: f64,
        n1: usize,
        n2: usize,
    },
    /// OFF4 mesh; relative paths resolve against the scenario file's directory.
    OffFile {
        path: PathBuf,
    },
}

impl SurfaceSpec {
    pub fn build(&self, base: &Path) -> Result<SurfaceMesh> {
        match self {
            Self::Icosphere { radius, subdivisions } => icosphere(*radius, *subdivisions),
            Self::EllipsoidPlusBump { a1, a2, a3, eps4, subdivisions } => {
                ellipsoid_plus_bump(*a1, *a2, *a3, *eps4, *subdivisions)
            }
            Self::ProductTorus { r1, r2, n1, n2 } => product_torus(*r1, *r2, *n1, *n2),
            Self::OffFile { path } => read_off4(&base.join(path)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifierParams {
    pub k: f64,
    pub delta: f64,
    pub gamma: Option<f64>,
    pub grid: usize,
    pub random_samples: usize,
}

impl Default for CertifierParams {
    fn default() -> Self {
        let d = CertifyOptions::new(29.0 / 40.0);
        Self {
            k: d.k,
            delta: d.delta,
            gamma: d.gamma_override,
            grid: d.grid,
            random_samples: d.random_samples,
        }
    }
}

impl CertifierParams {
    pub fn options(&self, seed: u64) -> CertifyOptions {
        CertifyOptions {
            k: self.k,
            delta: self.delta,
            grid: self.grid,
            random_samples: self.random_samples,
            seed,
            gamma_override: self.gamma,
        }
    }
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub surface: SurfaceSpec,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub certifier: Option<CertifierParams>,
    /// Directory that relative paths in the file resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl Scenario {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut scenario: Scenario = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: e.line(),
                message: e.to_string(),
            })?
        } else {
            toml::from_str(text).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: e.span().map_or(0, |s| line_of(text, s.start)),
                message: e.message().to_string(),
            })?
        };
        scenario.flow.validate().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("[flow] {e}"),
        })?;
        scenario.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario fields are TOML-representable")
    }

    pub fn build_mesh(&self) -> Result<SurfaceMesh> {
        self.surface.build(&self.base_dir)
    }

    pub fn output_dir(&self, out: &Path) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| out.join(&self.name))
    }

    /// Looks up a built-in scenario by name.
    pub fn builtin(name: &str) -> Option<Self> {
        let base = |surface, flow| Scenario {
            name: name.to_string(),
            seed: default_seed(),
            output_dir: None,
            surface,
            flow,
            certifier: None,
            base_dir: PathBuf::new(),
        };
        match name {
            "sphere_r1" => Some(base(
                SurfaceSpec::Icosphere { radius: 1.0, subdivisions: 4 },
                FlowConfig {
                    stop_factor: 26.0,
                    output_every: 10,
                    ..FlowConfig::default()
                },
            )),
            "clifford_r1" => Some(base(
                SurfaceSpec::ProductTorus { r1: 1.0, r2: 1.0, n1: 64, n2: 64 },
                FlowConfig {
                    stop_factor: 11.5,
                    output_every: 5,
                    ..FlowConfig::default()
                },
            )),
            "pinched_ellipsoid" => Some(base(
                SurfaceSpec::EllipsoidPlusBump {
                    a1: 1.2,
                    a2: 1.0,
                    a3: 0.9,
                    eps4: 0.1,
                    subdivisions: 3,
                },
                FlowConfig::default(),
            )),
            _ => None,
        }
    }

    pub const BUILTIN: [&'static str; 3] = ["sphere_r1", "clifford_r1", "pinched_ellipsoid"];

    /// A built-in name, or else a path to a scenario file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if let Some(s) = Self::builtin(name_or_path) {
            return Ok(s);
        }
        let path = Path::new(name_or_path);
        if !path.is_file() {
            return Err(Error::InvalidParameter(format!(
                "{name_or_path:?} is neither a built-in scenario ({}) nor a file",
                Self::BUILTIN.join(", ")
            )));
        }
        Self::load(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_round_trip_through_toml_and_json() {
        for name in Scenario::BUILTIN {
            let s = Scenario::builtin(name).unwrap();
            let back = Scenario::parse(&s.to_toml(), Path::new("x.toml")).unwrap();
            assert_eq!(back, s);
            let json = serde_json::to_string(&s).unwrap();
            let back = Scenario::parse(&json, Path::new("x.json")).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn shipped_scenario_files_match_builtins() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
        for name in Scenario::BUILTIN {
            let s = Scenario::load(&dir.join(format!("{name}.toml"))).unwrap();
            let b = Scenario::builtin(name).unwrap();
            assert_eq!(Scenario { base_dir: PathBuf::new(), ..s }, b);
        }
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let text = "name = \"s\"\n[surface]\nkind = \"icosphere\"\nradius = 2.0\nsubdivisions = 1\n";
        let s = Scenario::parse(text, Path::new("s.toml")).unwrap();
        assert_eq!(s.seed, 42);
        assert_eq!(s.flow, FlowConfig::default());
        assert_eq!(s.build_mesh().unwrap().vertices.len(), 42);
    }

    #[test]
    fn unknown_key_reports_line_and_key() {
        let text = "name = \"s\"\n[surface]\nkind = \"icosphere\"\nradius = 1.0\nsubdivisions = 1\n[flow]\ncfl = 0.1\nstep_size = 3\n";
        match Scenario::parse(text, Path::new("s.toml")) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 8);
                assert!(message.contains("step_size"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_flow_values_are_config_errors() {
        let text = "name = \"s\"\n[surface]\nkind = \"icosphere\"\nradius = 1.0\nsubdivisions = 1\n[flow]\ncfl = 0.9\n";
        let err = Scenario::parse(text, Path::new("s.toml")).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }) && err.to_string().contains("cfl"));
        let err = Scenario::parse("{\"name\": 3}", Path::new("s.json")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn off_file_resolves_relative_to_scenario() {
        let dir = tempfile::tempdir().unwrap();
        let m = icosphere(1.0, 1).unwrap();
        std::fs::write(dir.path().join("m.off"), crate::flow::io::write_off4(&m)).unwrap();
        let text = "name = \"f\"\n[surface]\nkind = \"off_file\"\npath = \"m.off\"\n";
        let path = dir.path().join("f.toml");
        std::fs::write(&path, text).unwrap();
        let s = Scenario::load(&path).unwrap();
        assert_eq!(s.build_mesh().unwrap().vertices, m.vertices);
    }
}
