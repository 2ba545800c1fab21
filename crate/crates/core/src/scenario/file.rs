//! JSON scenario documents.
//!
//! ```json
//! {
//!   "gain": { "atoms": [ { "eta": 1.0, "p": 1.0 } ] },
//!   "interference": { "kind": "gaussian", "mean": 0.0, "variance": 1.0 },
//!   "noise": {
//!     "c_x": 0.0,
//!     "c_z": 0.0,
//!     "innovation": { "kind": "laplace", "mean": 0.0, "scale": 0.5 }
//!   },
//!   "power": 1.0,
//!   "domain": "real"
//! }
//! ```
//!
//! `noise` may instead give target statistics, from which the loadings are
//! derived (see [`NoiseModel::from_target`]):
//!
//! ```json
//! "noise": { "target": { "sigma_n2": 1.0, "rho_xn": 0.2, "rho_zn": 0.5 },
//!            "family": "uniform" }
//! ```

use super::{
    ChannelScenario, Domain, FamilyKind, GainDistribution, MarginalFamily, NoiseModel,
    ValidationError, Violation,
};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetStats {
    pub sigma_n2: f64,
    pub rho_xn: f64,
    pub rho_zn: f64,
}

/// Either explicit loadings (`c_x`, `c_z`, `innovation`) or `target` + `family`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_z: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub innovation: Option<MarginalFamily>,
    #[serde(default)]
    pub degenerate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub gain: GainDistribution,
    pub interference: MarginalFamily,
    pub noise: NoiseSpec,
    pub power: f64,
    #[serde(default)]
    pub domain: Domain,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioError {
    /// Syntax or schema error at `path` (dotted field path), `line:column`.
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    Invalid(ValidationError),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Parse {
                path,
                line,
                column,
                message,
            } => write!(f, "line {line}, column {column}: {path}: {message}"),
            ScenarioError::Invalid(e) => write!(f, "invalid scenario: {e}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

impl From<ValidationError> for ScenarioError {
    fn from(e: ValidationError) -> Self {
        ScenarioError::Invalid(e)
    }
}

fn invalid(v: Violation) -> ScenarioError {
    ScenarioError::Invalid(ValidationError {
        violations: vec![v],
    })
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            ScenarioError::Parse {
                path,
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        })
    }

    /// Builds the scenario, deriving loadings when `noise.target` is used,
    /// and validates it.
    pub fn resolve(self) -> Result<ChannelScenario, ScenarioError> {
        let noise = match (&self.noise.target, &self.noise.innovation) {
            (Some(_), Some(_)) => {
                return Err(invalid(Violation::BadFamily {
                    field: "noise".into(),
                    reason: "give either `target` or `innovation`, not both".into(),
                }))
            }
            (Some(target), None) => {
                if self.noise.c_x.is_some() || self.noise.c_z.is_some() {
                    return Err(invalid(Violation::BadFamily {
                        field: "noise".into(),
                        reason: "`c_x`/`c_z` are derived from `target` and must be omitted".into(),
                    }));
                }
                let family = self.noise.family.unwrap_or(FamilyKind::Gaussian);
                if !self.power.is_finite() || self.power <= 0.0 {
                    return Err(invalid(Violation::NonPositivePower { value: self.power }));
                }
                NoiseModel::from_target(self.power, self.interference.variance(), *target, family)
                    .map_err(|v| match v {
                        Violation::NonPositivePower { .. }
                        | Violation::NonFinite { .. }
                        | Violation::CorrelationOverflow { .. } => v,
                        other => Violation::BadFamily {
                            field: "noise.target".into(),
                            reason: other.to_string(),
                        },
                    })
                    .map_err(invalid)?
            }
            (None, Some(innovation)) => {
                if self.noise.family.is_some() {
                    return Err(invalid(Violation::BadFamily {
                        field: "noise.family".into(),
                        reason: "`family` is only used together with `target`".into(),
                    }));
                }
                NoiseModel {
                    c_x: self.noise.c_x.unwrap_or(0.0),
                    c_z: self.noise.c_z.unwrap_or(0.0),
                    innovation: innovation.clone(),
                    degenerate: self.noise.degenerate,
                }
            }
            (None, None) => {
                return Err(invalid(Violation::BadFamily {
                    field: "noise".into(),
                    reason: "missing `innovation` (or `target`)".into(),
                }))
            }
        };
        let scenario = ChannelScenario {
            gain: self.gain,
            interference: self.interference,
            noise,
            power: self.power,
            domain: self.domain,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

impl From<&ChannelScenario> for ScenarioFile {
    fn from(s: &ChannelScenario) -> Self {
        ScenarioFile {
            gain: s.gain.clone(),
            interference: s.interference.clone(),
            noise: NoiseSpec {
                c_x: Some(s.noise.c_x),
                c_z: Some(s.noise.c_z),
                innovation: Some(s.noise.innovation.clone()),
                degenerate: s.noise.degenerate,
                target: None,
                family: None,
            },
            power: s.power,
            domain: s.domain,
        }
    }
}
