//! JSON run configuration. Every section except `metric` is optional and
//! falls back to the defaults below; unknown keys are rejected everywhere.

use serde::Deserialize;
use subfinsler::{ConstantICase, IndicatrixProfile};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub metric: Metric,
    /// Seed for every random choice; `--seed` overrides it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub invariants: InvariantsConfig,
    #[serde(default)]
    pub geodesic: GeodesicConfig,
    #[serde(default)]
    pub conjugate: ConjugateConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub dido: DidoConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Metric {
    // Empty braces so that stray keys are rejected; serde ignores them on
    // unit variants of internally tagged enums.
    Flat {},
    Randers {
        #[serde(rename = "B")]
        b: f64,
    },
    Limacon {},
    Fourier {
        a: Vec<f64>,
        #[serde(default)]
        b: Vec<f64>,
    },
    /// Abstract structure with constant invariant `I`; only the `structure`
    /// verification suite accepts it.
    ConstantI {
        #[serde(rename = "I")]
        i: f64,
        #[serde(default)]
        case: Option<String>,
    },
}

impl Metric {
    /// The Heisenberg profile, or a usage error for `constant_i`.
    pub fn profile(&self) -> Result<IndicatrixProfile, CliError> {
        Ok(match self {
            Metric::Flat {} => IndicatrixProfile::Flat,
            Metric::Randers { b } if *b == 0.0 => IndicatrixProfile::Flat,
            Metric::Randers { b } => IndicatrixProfile::randers(*b)?,
            Metric::Limacon {} => IndicatrixProfile::Limacon,
            Metric::Fourier { a, b } => IndicatrixProfile::fourier(a.clone(), b.clone())?,
            Metric::ConstantI { .. } => {
                return Err(CliError::Usage("metric kind constant_i is only supported by `verify` with suite structure".into()))
            }
        })
    }

    /// `I` and its case for `constant_i`; the case is inferred from `I` when
    /// absent.
    pub fn constant_i(&self) -> Result<Option<(f64, ConstantICase)>, CliError> {
        let Metric::ConstantI { i, case } = self else { return Ok(None) };
        let case = match case {
            None => ConstantICase::classify(*i),
            Some(name) => ConstantICase::parse(name)
                .ok_or_else(|| CliError::Usage(format!("unknown constant_i case {name:?}")))?,
        };
        Ok(Some((*i, case)))
    }

    /// Randers parameter for the closed-form oracle (`0` for flat).
    pub fn randers_b(&self) -> Option<f64> {
        match self {
            Metric::Flat {} => Some(0.0),
            Metric::Randers { b } => Some(*b),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvariantsConfig {
    /// Number of equally spaced angles in `[0, 2π)`.
    pub grid: usize,
}

impl Default for InvariantsConfig {
    fn default() -> Self {
        InvariantsConfig { grid: 360 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub y: f64,
    #[serde(default)]
    pub z: f64,
    pub theta: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeodesicConfig {
    pub initial: Vec<InitialCondition>,
    /// Arc length of each trace; one turn of `θ` when absent.
    pub length: Option<f64>,
    /// Fixed RK4 step.
    pub step: f64,
    /// Switches to the adaptive integrator with this tolerance.
    pub tolerance: Option<f64>,
}

impl Default for GeodesicConfig {
    fn default() -> Self {
        GeodesicConfig {
            initial: vec![InitialCondition { x: 0.0, y: 0.0, z: 0.0, theta: 0.0, lambda: 1.0 }],
            length: None,
            step: 1e-3,
            tolerance: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConjugateConfig {
    pub theta: f64,
    pub lambda: f64,
    pub length: f64,
    /// Step of the geodesic trace feeding the coefficients.
    pub step: f64,
}

impl Default for ConjugateConfig {
    fn default() -> Self {
        ConjugateConfig { theta: 0.0, lambda: 1.0, length: 10.0, step: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Structure,
    Conserved,
    Oracle,
    Dido,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub suite: Suite,
    /// Sample count: points for `structure`, initial data for `conserved`,
    /// perturbations for `dido`.
    pub samples: Option<usize>,
    /// Overrides the suite's tolerance.
    pub tolerance: Option<f64>,
    /// Multiplier of the reference geodesic for `oracle` and `dido`.
    pub lambda: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { suite: Suite::Structure, samples: None, tolerance: None, lambda: 1.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DidoConfig {
    /// Enclosed area; when absent, the area of the projection of the
    /// geodesic with `theta`, `lambda` and that projection is the reference.
    pub area: Option<f64>,
    pub nodes: usize,
    pub theta: f64,
    pub lambda: f64,
    pub perturbations: usize,
    pub epsilon: f64,
}

impl Default for DidoConfig {
    fn default() -> Self {
        DidoConfig { area: None, nodes: 128, theta: 0.0, lambda: 1.0, perturbations: 20, epsilon: 1e-3 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = RunConfig::from_json(r#"{"metric": {"kind": "randers", "B": 0.5}}"#).unwrap();
        assert_eq!(c.metric, Metric::Randers { b: 0.5 });
        assert_eq!(c.invariants.grid, 360);
        assert_eq!(c.geodesic.initial.len(), 1);
        assert_eq!(c.verify.suite, Suite::Structure);
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in [
            r#"{"metric": {"kind": "flat"}, "extra": 1}"#,
            r#"{"metric": {"kind": "flat", "B": 0.5}}"#,
            r#"{"metric": {"kind": "flat"}, "geodesic": {"steps": 1}}"#,
            r#"{"metric": {"kind": "flat"}, "geodesic": {"initial": [{"theta": 0, "lambda": 1, "w": 0}]}}"#,
        ] {
            assert!(matches!(RunConfig::from_json(text), Err(CliError::Usage(_))), "{text}");
        }
    }

    #[test]
    fn constant_i_case() {
        let c = RunConfig::from_json(r#"{"metric": {"kind": "constant_i", "I": 3}}"#).unwrap();
        assert_eq!(c.metric.constant_i().unwrap(), Some((3.0, ConstantICase::Hyperbolic)));
        assert!(matches!(c.metric.profile(), Err(CliError::Usage(_))));
        let c = RunConfig::from_json(r#"{"metric": {"kind": "constant_i", "I": 1, "case": "nope"}}"#).unwrap();
        assert!(c.metric.constant_i().is_err());
    }

    #[test]
    fn invalid_profile_is_domain_error() {
        let c = RunConfig::from_json(r#"{"metric": {"kind": "randers", "B": 1.5}}"#).unwrap();
        assert!(matches!(c.metric.profile(), Err(CliError::Domain(_))));
    }
}
