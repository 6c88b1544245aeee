//! Experiment configuration: a single JSON document, schema-validated before
//! any computation runs. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use membrane_core::error::{Error, Result};
use membrane_core::potential::Potential;
use membrane_core::sampler::{Preconditioner, SamplerConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub subcommand: String,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_sweep: Option<Vec<i64>>,
    pub potential: PotentialConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sampler: SamplerSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub params: CheckParams,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub name: String,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSettings {
    pub step: f64,
    pub chains: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub keep: usize,
    pub nodes: usize,
    pub precondition: String,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        SamplerSettings {
            step: 0.4,
            chains: 2,
            burn_in: 600,
            thin: 3,
            keep: 2000,
            nodes: 8,
            precondition: "auto".into(),
        }
    }
}

/// Check-specific parameters; each subcommand reads the fields it needs.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckParams {
    /// Interior site, e.g. for `profile` and `marginal`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<i64>>,
    /// Distances to the boundary for the marginal sweep.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhos: Option<Vec<i64>>,
    /// Support and weights of the compact direction a'.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_prime_sites: Option<Vec<Vec<i64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_prime_values: Option<Vec<f64>>,
    /// Clamped test-function tag (`product-quartic`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_function: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    /// Points of [-1,1]^d and coefficients for the scaling-limit check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
    /// Direction of the c.g.f. check, as interior point masses on Box_L.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction_sites: Option<Vec<Vec<i64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction_values: Option<Vec<f64>>,
    /// Layer widths for the boundary-mass rows of `continuum`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layer_ells: Option<Vec<i64>>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Format(format!("config schema violation: {e}")))
    }

    pub fn potential(&self) -> Result<Potential> {
        Potential::builtin(&self.potential.name, &self.potential.params)
    }

    pub fn ls(&self) -> Result<Vec<i64>> {
        match (&self.l, &self.l_sweep) {
            (Some(l), None) => Ok(vec![*l]),
            (None, Some(v)) if !v.is_empty() => Ok(v.clone()),
            _ => Err(Error::Parameter(
                "config needs exactly one of `l` or a nonempty `l_sweep`".into(),
            )),
        }
    }

    pub fn sampler_config(&self, seed: u64) -> Result<SamplerConfig> {
        let precondition = match self.sampler.precondition.as_str() {
            "auto" => Preconditioner::Auto,
            "gaussian" => Preconditioner::Gaussian,
            "identity" => Preconditioner::Identity,
            other => {
                return Err(Error::Parameter(format!(
                    "unknown preconditioner {other:?} (use auto|gaussian|identity)"
                )))
            }
        };
        Ok(SamplerConfig {
            step: self.sampler.step,
            chains: self.sampler.chains,
            burn_in: self.sampler.burn_in,
            thin: self.sampler.thin,
            keep: self.sampler.keep,
            seed,
            precondition,
            ..Default::default()
        })
    }
}
