//! Declarative experiment configuration: one TOML file per experiment, with
//! flag overrides for seed and output directory. Unknown and duplicate keys
//! are rejected with the offending key named; kernels are validated at parse
//! time so inadmissible parameter sets never reach a sampler.

use pathgibbs::gibbs::McmcParams;
use pathgibbs::interactions::{InteractionKernel, KernelConfig};
use pathgibbs::paths::PathGrid;
use pathgibbs::she::InitialCondition;
use serde::Deserialize;
use std::path::PathBuf;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub mcmc: Option<McmcSection>,
    #[serde(default)]
    pub spectrum: Option<SpectrumSection>,
    #[serde(default)]
    pub she: Option<SheSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub horizon: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcSection {
    pub block_len: usize,
    pub proposals_per_sweep: usize,
    pub sweeps: usize,
    pub burn_in: usize,
    pub thinning: usize,
}

impl McmcSection {
    pub fn params(&self) -> McmcParams {
        McmcParams {
            block_len: self.block_len,
            proposals_per_sweep: self.proposals_per_sweep,
            sweeps: self.sweeps,
            burn_in: self.burn_in,
            thinning: self.thinning,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub block_time: f64,
    pub dt: f64,
    pub n_blocks: usize,
    /// `prior` (importance weights) or `mcmc`.
    #[serde(default)]
    pub mode: Option<String>,
    #[serde(default)]
    pub free_energy_steps: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SheSection {
    pub t: f64,
    pub dt: f64,
    pub eps: Vec<f64>,
    pub x: Vec<f64>,
    /// `constant`, `cosine`, `gaussian` or `quadratic`.
    pub u0: String,
    #[serde(default)]
    pub k: Option<Vec<f64>>,
    #[serde(default)]
    pub sigma2: Option<f64>,
    #[serde(default)]
    pub beta_nodes: Option<usize>,
}

impl SheSection {
    pub fn initial_condition(&self, d: usize) -> Result<InitialCondition, String> {
        match self.u0.as_str() {
            "constant" => Ok(InitialCondition::Constant { value: 1.0 }),
            "cosine" => {
                let k = self.k.clone().ok_or("u0 = \"cosine\" requires the key `k`")?;
                if k.len() != d {
                    return Err(format!("k must have {d} components"));
                }
                Ok(InitialCondition::Cosine { k })
            }
            "gaussian" => Ok(InitialCondition::GaussianBump { width: 1.0 }),
            "quadratic" => Ok(InitialCondition::QuadraticTruncated { radius: 40.0 }),
            other => Err(format!("unknown initial condition `{other}`")),
        }
    }
}

/// Validated configuration: parses the TOML text, applies overrides, builds
/// the kernel (admissibility enforced), and requires an explicit seed.
#[derive(Debug)]
pub struct ValidatedConfig {
    pub raw_text: String,
    pub seed: u64,
    pub out: PathBuf,
    pub kernel: InteractionKernel,
    pub config: ExperimentConfig,
}

pub fn parse_config(
    text: &str,
    seed_override: Option<u64>,
    out_override: Option<PathBuf>,
) -> Result<ValidatedConfig, String> {
    let config: ExperimentConfig =
        toml::from_str(text).map_err(|e| format!("config error: {e}"))?;
    let kernel = config.kernel.build().map_err(|e| format!("config error: {e}"))?;
    let seed = seed_override
        .or(config.seed)
        .ok_or("config error: no seed given (set `seed` or pass --seed; runs never default to wall-clock)")?;
    let out = out_override
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("pathgibbs-out"));
    if let Some(she) = &config.she {
        if she.eps.is_empty() {
            return Err("config error: she.eps sweep must be nonempty".into());
        }
        if she.x.len() != kernel.dim() {
            return Err(format!(
                "config error: she.x must have {} components",
                kernel.dim()
            ));
        }
        she.initial_condition(kernel.dim()).map_err(|e| format!("config error: {e}"))?;
    }
    Ok(ValidatedConfig { raw_text: text.to_string(), seed, out, kernel, config })
}

impl ValidatedConfig {
    pub fn grid(&self) -> Result<PathGrid, String> {
        let g = self
            .config
            .grid
            .as_ref()
            .ok_or("config error: missing [grid] section (keys horizon, dt)")?;
        PathGrid::from_horizon(g.horizon, g.dt, self.kernel.dim()).map_err(|e| e.to_string())
    }

    pub fn mcmc(&self) -> McmcParams {
        self.config.mcmc.as_ref().map(|m| m.params()).unwrap_or(McmcParams {
            block_len: 8,
            proposals_per_sweep: 16,
            sweeps: 2000,
            burn_in: 200,
            thinning: 2,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses() {
        let cfg = parse_config(
            "seed = 1\n[kernel]\npreset = \"mollifier_product\"\nbeta = 1.0\n",
            None,
            None,
        )
        .unwrap();
        assert_eq!(cfg.seed, 1);
    }

    #[test]
    fn inadmissible_kernel_surfaces_inequality() {
        let err = parse_config(
            "seed = 1\n[kernel]\npreset = \"poly_bounded\"\nbeta = 1.0\ntheta = 1.5\n",
            None,
            None,
        )
        .unwrap_err();
        assert!(err.contains("theta > 2"), "{err}");
    }

    #[test]
    fn unknown_and_duplicate_keys_are_named() {
        let err = parse_config(
            "seed = 1\nbogus_key = 3\n[kernel]\npreset = \"polaron\"\nbeta = 1.0\n",
            None,
            None,
        )
        .unwrap_err();
        assert!(err.contains("bogus_key"), "{err}");
        let err = parse_config(
            "seed = 1\nseed = 2\n[kernel]\npreset = \"polaron\"\nbeta = 1.0\n",
            None,
            None,
        )
        .unwrap_err();
        assert!(err.contains("seed"), "{err}");
    }

    #[test]
    fn seed_is_mandatory() {
        let err =
            parse_config("[kernel]\npreset = \"polaron\"\nbeta = 1.0\n", None, None).unwrap_err();
        assert!(err.contains("seed"), "{err}");
        // flag override satisfies the requirement
        assert!(parse_config("[kernel]\npreset = \"polaron\"\nbeta = 1.0\n", Some(7), None).is_ok());
    }
}
