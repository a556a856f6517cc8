//! JSON configuration files and their validation.

use crate::CliError;
use gensmooth::experiments::{
    check_convergence_regime, AdaGradDivergenceConfig, ConvergenceStudyConfig,
    SimpleDivergenceConfig,
};
use gensmooth::objectives::{Objective, ObjectiveSpec, PolyBoundCert, SmoothnessCert};
use gensmooth::oracles::AffineOracle;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Version of every configuration and output schema written by this crate.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable consulted when neither `--seed` nor the config sets one.
pub const SEED_ENV: &str = "GENSMOOTH_SEED";

/// Output formats understood by `run`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

/// The study run by `gensmooth run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Study {
    Convergence(ConvergenceStudyConfig),
    SimpleDivergence(SimpleDivergenceConfig),
    AdagradDivergence(AdaGradDivergenceConfig),
}

/// Configuration accepted by `gensmooth run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub formats: Option<Vec<Format>>,
    pub study: Study,
}

impl RunConfig {
    /// Check every parameter precondition without running anything.
    pub fn validate(&self) -> Result<(), CliError> {
        check_schema(self.schema_version)?;
        match &self.study {
            Study::Convergence(c) => {
                c.validate().map_err(CliError::config)?;
                let obj = Objective::from_spec(&c.objective).map_err(CliError::config)?;
                let oracle = AffineOracle::from_config(&c.oracle).map_err(CliError::config)?;
                check_convergence_regime(&obj, &oracle).map_err(CliError::config)?;
                if c.w1.len() != obj.dim() {
                    return Err(CliError::Config(format!(
                        "w1 has dimension {}, objective has {}",
                        c.w1.len(),
                        obj.dim()
                    )));
                }
                Ok(())
            }
            Study::SimpleDivergence(c) => c.validate().map_err(CliError::config),
            Study::AdagradDivergence(c) => c.constants().map(|_| ()).map_err(CliError::config),
        }
    }
}

/// Whether a certification claim is expected to hold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expect {
    #[default]
    Pass,
    Fail,
}

/// One certification claim. With no explicit certificate and no grid, the
/// objective's shipped certificates are checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Claim {
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub smoothness: Option<SmoothnessCert>,
    #[serde(default)]
    pub poly: Option<PolyBoundCert>,
    /// Run the poly-boundedness falsification grid instead.
    #[serde(default)]
    pub falsify_grid: bool,
    #[serde(default)]
    pub expect: Expect,
}

fn default_pairs() -> usize {
    10_000
}

/// Configuration accepted by `gensmooth certify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default = "default_pairs")]
    pub n_pairs: usize,
    pub claims: Vec<Claim>,
}

impl Default for CertifyConfig {
    /// The shipped zoo: every member's own certificates, plus the expected
    /// failure of poly-boundedness for the exponential.
    fn default() -> Self {
        let shipped = |objective| Claim {
            objective,
            smoothness: None,
            poly: None,
            falsify_grid: false,
            expect: Expect::Pass,
        };
        let mut claims = vec![
            shipped(ObjectiveSpec::Quadratic {
                l0: 1.0,
                minimizer: vec![0.0, 0.0],
            }),
            shipped(ObjectiveSpec::Quadratic {
                l0: 2.5,
                minimizer: vec![1.0],
            }),
            shipped(ObjectiveSpec::ScaledQuadratic {
                curvatures: vec![1.0, 0.1, 0.01],
                minimizer: vec![0.0; 3],
            }),
            shipped(ObjectiveSpec::Monomial {
                k: 3,
                l1: 1.0,
                minimizer: vec![0.0],
            }),
            shipped(ObjectiveSpec::Monomial {
                k: 4,
                l1: 1.0,
                minimizer: vec![0.0],
            }),
            shipped(ObjectiveSpec::Monomial {
                k: 4,
                l1: 2.0,
                minimizer: vec![0.5, -0.5],
            }),
            shipped(ObjectiveSpec::CompositeGrowth { l0: 1.0, l1: 1.0 }),
            shipped(ObjectiveSpec::Exponential { l1: 1.0 }),
        ];
        claims.push(Claim {
            objective: ObjectiveSpec::Exponential { l1: 1.0 },
            smoothness: None,
            poly: None,
            falsify_grid: true,
            expect: Expect::Fail,
        });
        CertifyConfig {
            schema_version: SCHEMA_VERSION,
            master_seed: None,
            n_pairs: default_pairs(),
            claims,
        }
    }
}

impl CertifyConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        check_schema(self.schema_version)?;
        if self.n_pairs == 0 {
            return Err(CliError::Config("n_pairs must be positive".into()));
        }
        for c in &self.claims {
            let obj = Objective::from_spec(&c.objective).map_err(CliError::config)?;
            if c.falsify_grid && obj.dim() != 1 {
                return Err(CliError::Config(format!(
                    "falsify_grid needs a one-dimensional objective, {} has d = {}",
                    obj.name(),
                    obj.dim()
                )));
            }
        }
        Ok(())
    }
}

fn check_schema(v: u32) -> Result<(), CliError> {
    if v == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "unsupported schema_version {v}, expected {SCHEMA_VERSION}"
        )))
    }
}

/// Parse a JSON document, mapping any syntax or schema error to a config error.
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("malformed configuration: {e}")))
}

/// Read and parse a JSON configuration file.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

/// Seed precedence: command line, then config, then the environment, then 0.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Config(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))
        }),
        Err(_) => Ok(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn presets_round_trip_through_json() {
        for name in presets::NAMES {
            let cfg = presets::preset(name).unwrap();
            let text = serde_json::to_string(&cfg).unwrap();
            let back: RunConfig = parse(&text).unwrap();
            assert_eq!(back, cfg);
            back.validate().unwrap();
        }
    }

    #[test]
    fn default_certify_config_round_trips() {
        let cfg = CertifyConfig::default();
        let back: CertifyConfig = parse(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        back.validate().unwrap();
    }

    #[test]
    fn rejects_wrong_schema_and_unknown_fields() {
        let mut cfg = presets::preset("appD-normsgd").unwrap();
        cfg.schema_version = 2;
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
        let text = r#"{"schema_version":1,"name":"x","study":{"kind":"nope"}}"#;
        assert!(parse::<RunConfig>(text).is_err());
        let text = r#"{"schema_version":1,"claims":[],"extra":true}"#;
        assert!(parse::<CertifyConfig>(text).is_err());
    }

    #[test]
    fn explicit_seed_wins() {
        assert_eq!(resolve_seed(Some(3), Some(4)).unwrap(), 3);
        assert_eq!(resolve_seed(None, Some(4)).unwrap(), 4);
    }
}
