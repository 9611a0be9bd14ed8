//! TOML run configuration shared by the CLI subcommands.
//!
//! ```toml
//! seed = 7
//!
//! [model]
//! name = "quartic_translational"
//! params = { omega0 = 1.4142135623730951, beta0 = 1.0, a = 1.0 }
//!
//! [initial]
//! coords = "z"
//! q = [0.0, 1.0]
//! v = [1.0, 0.0]
//!
//! [simulate]
//! t_end = 100.0
//!
//! [integrator]
//! rtol = 1e-10
//!
//! [output]
//! trajectory = "trajectory.csv"
//! summary = "summary.json"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::closed_forms::{CaseTag, ClosedFormModel};
use crate::dynamics::{self, Coords, PhaseState};
use crate::models::{
    bateman, calogero_unidirectional, CalogeroParams, QuarticTranslationalParams, RotationalParams,
    SexticQesParams,
};
use crate::ode::IntegratorConfig;
use crate::rep::{RadialGain, SystemSpec};
use crate::{Error, Result};

pub const MODEL_NAMES: [&str; 6] = [
    "quartic_translational",
    "rotational_constant_g",
    "rotational_linear_g",
    "calogero_unidirectional",
    "sextic_qes",
    "bateman",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub params: toml::Table,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            name: "quartic_translational".into(),
            params: toml::Table::new(),
        }
    }
}

fn parse<T: serde::de::DeserializeOwned>(name: &str, table: toml::Table) -> Result<T> {
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| Error::Config(format!("parameters of {name}: {e}")))
}

fn take_f64(table: &mut toml::Table, key: &str, default: f64) -> Result<f64> {
    match table.remove(key) {
        None => Ok(default),
        Some(toml::Value::Float(x)) => Ok(x),
        Some(toml::Value::Integer(i)) => Ok(i as f64),
        Some(v) => Err(Error::Config(format!("{key} must be a number, got {v}"))),
    }
}

/// A catalog model plus, where one exists, its closed-form parameter set.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub spec: SystemSpec,
    pub closed_form: Option<ClosedFormModel>,
}

impl ModelConfig {
    pub fn closed_form(&self) -> Result<Option<ClosedFormModel>> {
        let mut params = self.params.clone();
        Ok(match self.name.as_str() {
            "quartic_translational" => Some(ClosedFormModel::Translational(parse::<
                QuarticTranslationalParams,
            >(
                &self.name, params
            )?)),
            "rotational_constant_g" | "rotational_linear_g" => {
                let c = take_f64(&mut params, "c", 1.0)?;
                let gain = if self.name == "rotational_constant_g" {
                    RadialGain::Constant(c)
                } else {
                    RadialGain::Linear(c)
                };
                let d = RotationalParams::default();
                let p = RotationalParams {
                    gain,
                    omega0: take_f64(&mut params, "omega0", d.omega0)?,
                    alpha0: take_f64(&mut params, "alpha0", d.alpha0)?,
                    gamma: take_f64(&mut params, "gamma", d.gamma)?,
                    pairs: match params.remove("pairs") {
                        None => 1,
                        Some(toml::Value::Integer(n)) if n > 0 => n as usize,
                        Some(v) => {
                            return Err(Error::Config(format!(
                                "pairs must be a positive integer, got {v}"
                            )))
                        }
                    },
                    coupling: take_f64(&mut params, "coupling", 0.0)?,
                };
                if let Some(k) = params.keys().next() {
                    return Err(Error::Config(format!(
                        "unknown parameter {k:?} for {}",
                        self.name
                    )));
                }
                Some(ClosedFormModel::Rotational(p))
            }
            _ => None,
        })
    }

    pub fn build(&self) -> Result<BuiltModel> {
        if let Some(cf) = self.closed_form()? {
            return Ok(BuiltModel {
                spec: cf.system_spec()?,
                closed_form: Some(cf),
            });
        }
        let mut params = self.params.clone();
        let spec = match self.name.as_str() {
            "calogero_unidirectional" => {
                calogero_unidirectional(&parse::<CalogeroParams>(&self.name, params)?)?
            }
            "sextic_qes" => {
                let gamma = take_f64(&mut params, "gamma", 1.0)?;
                parse::<SexticQesParams>(&self.name, params)?.system_spec(gamma)?
            }
            "bateman" => {
                let omega = take_f64(&mut params, "omega", 1.0)?;
                let gamma = take_f64(&mut params, "gamma", 0.1)?;
                let s = take_f64(&mut params, "s", 1.0)?;
                if let Some(k) = params.keys().next() {
                    return Err(Error::Config(format!(
                        "unknown parameter {k:?} for bateman"
                    )));
                }
                bateman(omega, gamma, s)?
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown model {other:?}; expected one of {}",
                    MODEL_NAMES.join(", ")
                )))
            }
        };
        Ok(BuiltModel {
            spec,
            closed_form: None,
        })
    }
}

/// Initial data; velocities `v` or canonical momenta `p`, zero velocities if neither.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub coords: Coords,
    #[serde(default)]
    pub t: f64,
    pub q: Vec<f64>,
    #[serde(default)]
    pub v: Option<Vec<f64>>,
    #[serde(default)]
    pub p: Option<Vec<f64>>,
}

impl InitialConfig {
    pub fn state(&self, spec: &SystemSpec) -> Result<PhaseState> {
        let state = match (&self.v, &self.p) {
            (Some(_), Some(_)) => return Err(Error::Config("give either v or p, not both".into())),
            (Some(v), None) => PhaseState::new(self.t, self.q.clone(), v.clone(), self.coords),
            (None, Some(p)) => {
                dynamics::velocities_from_momenta(spec, self.t, &self.q, p, self.coords)?
            }
            (None, None) => {
                PhaseState::new(self.t, self.q.clone(), vec![0.0; self.q.len()], self.coords)
            }
        };
        state.validate(spec)?;
        Ok(state)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub t_end: f64,
    /// Record H and the symmetry charges alongside the trajectory.
    pub invariants: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            t_end: 100.0,
            invariants: true,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub trajectory: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub scan: Option<PathBuf>,
    pub wavefunction: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: String,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self.steps {
            0 => Vec::new(),
            1 => vec![self.min],
            n => (0..n)
                .map(|k| self.min + (self.max - self.min) * k as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub case: CaseTag,
    pub amplitude: f64,
    #[serde(default)]
    pub pi: f64,
    /// Re-derive `α₀` at every point so the reduced cubic term vanishes.
    #[serde(default = "yes")]
    pub cubic_free: bool,
    pub axes: Vec<Axis>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub case: Option<CaseTag>,
    pub amplitude: Option<f64>,
    pub samples: usize,
    pub pairs: Vec<usize>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            case: None,
            amplitude: None,
            samples: 100,
            pairs: vec![1, 2, 3],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QesConfig {
    pub n: usize,
    pub p: u8,
    pub atilde: f64,
    pub btilde: f64,
    pub half_width: Option<f64>,
    pub step: f64,
}

impl Default for QesConfig {
    fn default() -> Self {
        Self {
            n: 1,
            p: 0,
            atilde: 1.0,
            btilde: 0.0,
            half_width: None,
            step: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Catalog model; commands with a natural default fall back to it.
    pub model: Option<ModelConfig>,
    pub initial: Option<InitialConfig>,
    pub integrator: IntegratorConfig,
    pub simulate: SimulateConfig,
    pub output: OutputConfig,
    pub scan: Option<ScanConfig>,
    pub verify: VerifyConfig,
    pub qes: QesConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            model: None,
            initial: None,
            integrator: IntegratorConfig::default(),
            simulate: SimulateConfig::default(),
            output: OutputConfig::default(),
            scan: None,
            verify: VerifyConfig::default(),
            qes: QesConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.integrator.validate()?;
        Ok(cfg)
    }

    pub fn model(&self) -> ModelConfig {
        self.model.clone().unwrap_or_default()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doc_example_parses() {
        let text = r#"
seed = 7
[model]
name = "quartic_translational"
params = { omega0 = 1.4142135623730951, beta0 = 1.0, a = 1.0 }
[initial]
coords = "z"
q = [0.0, 1.0]
v = [1.0, 0.0]
[simulate]
t_end = 100.0
[integrator]
rtol = 1e-10
[output]
trajectory = "trajectory.csv"
"#;
        let cfg = RunConfig::from_toml(text).unwrap();
        let built = cfg.model().build().unwrap();
        assert!(built.closed_form.is_some());
        let s = cfg.initial.unwrap().state(&built.spec).unwrap();
        assert_eq!(s.coords, Coords::Z);
    }

    #[test]
    fn every_catalog_name_builds() {
        for name in MODEL_NAMES {
            let params = if name == "sextic_qes" {
                toml::from_str("atilde = 1.0\nbtilde = 0.5\nn = 1\np = 0").unwrap()
            } else {
                toml::Table::new()
            };
            let m = ModelConfig {
                name: name.into(),
                params,
            };
            m.build().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn rotational_gain_follows_the_name() {
        let m: ModelConfig =
            toml::from_str("name = \"rotational_constant_g\"\nparams = { c = 0.3 }").unwrap();
        match m.closed_form().unwrap() {
            Some(ClosedFormModel::Rotational(p)) => assert_eq!(p.gain, RadialGain::Constant(0.3)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_names_and_keys() {
        assert!(ModelConfig {
            name: "nope".into(),
            params: toml::Table::new()
        }
        .build()
        .is_err());
        let m: ModelConfig =
            toml::from_str("name = \"quartic_translational\"\nparams = { omega = 1.0 }").unwrap();
        assert!(m.build().is_err());
        assert!(RunConfig::from_toml("bogus = 1").is_err());
        assert!(RunConfig::from_toml("[integrator]\nrtol = -1.0").is_err());
    }

    #[test]
    fn axis_values() {
        let a = Axis {
            param: "gamma".into(),
            min: -1.0,
            max: 1.0,
            steps: 5,
        };
        assert_eq!(a.values(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(Axis { steps: 1, ..a }.values(), vec![-1.0]);
    }
}
