use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Distribution, MaCoefficients, ParamVector};
use crate::selector::xi_threshold;

/// Smallest field side accepted in an experiment.
pub const MIN_SIDE: usize = 16;

/// How the penalty weight is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiMode {
    /// `c A (1 + margin)` from the configured noise coefficients.
    AutoThreshold {
        margin: f64,
    },
    Fixed(f64),
}

/// Per-trial measurements to perform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// Order selection over `k = 0..q_max-1`.
    Selection,
    /// Fit at order `k < P` and compare with the `k` dominant components.
    UnderEst(usize),
    /// Fit at order `P + 1` and compare the extra component with the noise periodogram.
    OverEst,
    /// Sup statistic of the noise field.
    SupDecay,
    /// Record `L_k` for `k = 0..=P` next to its large-sample limit.
    LossLimits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnovationConfig {
    pub distribution: Distribution,
    pub master_seed: u64,
}

/// A Monte Carlo study. The innovation variance is `ma.sigma2`, unless `snr_db` is set,
/// in which case it is chosen so that the strongest truth component has that SNR,
/// `10 log10((rho^2 / 2) / (sigma^2 sum a^2))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub truth: ParamVector,
    pub ma: MaCoefficients,
    pub innovation: InnovationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    pub sizes: Vec<(usize, usize)>,
    pub trials: usize,
    pub q_max: usize,
    pub xi: XiMode,
    pub checks: Vec<Check>,
    #[serde(default = "default_pad")]
    pub pad_factor: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_pad() -> usize {
    crate::spectrum::DEFAULT_PAD_FACTOR
}

/// Innovation variance giving the strongest component `rho_max` the requested SNR.
pub fn sigma2_for_snr(rho_max: f64, ma: &MaCoefficients, snr_db: f64) -> f64 {
    (rho_max * rho_max / 2.0) / (10f64.powf(snr_db / 10.0) * ma.sum_sq())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.sizes.is_empty() {
            return bad("sizes must be non-empty".into());
        }
        if let Some(&(n, m)) = self
            .sizes
            .iter()
            .find(|&&(n, m)| n < MIN_SIDE || m < MIN_SIDE)
        {
            return bad(format!(
                "size {n}x{m} below the {MIN_SIDE}x{MIN_SIDE} minimum"
            ));
        }
        if self.q_max == 0 {
            return bad("q_max must be >= 1".into());
        }
        if self.pad_factor == 0 {
            return bad("pad_factor must be >= 1".into());
        }
        match self.xi {
            XiMode::Fixed(x) if !(x > 0.0 && x.is_finite()) => {
                return bad(format!("fixed xi {x} must be positive"))
            }
            XiMode::AutoThreshold { margin } if margin.is_nan() || margin < 0.0 => {
                return bad(format!("xi margin {margin} must be >= 0"))
            }
            _ => {}
        }
        if let Some(snr) = self.snr_db {
            if self.truth.is_empty() || !snr.is_finite() {
                return bad("snr_db needs a non-empty truth and a finite value".into());
            }
        }
        let p = self.truth.len();
        for c in &self.checks {
            match *c {
                Check::UnderEst(k) if k == 0 || k >= p => {
                    return bad(format!("under_est({k}) needs 0 < k < P = {p}"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Noise coefficients with the variance actually used for synthesis.
    pub fn noise_model(&self) -> Result<MaCoefficients> {
        match self.snr_db {
            Some(snr) => {
                let rho_max = self
                    .truth
                    .components()
                    .iter()
                    .map(|c| c.rho)
                    .fold(0.0, f64::max);
                self.ma.with_sigma2(sigma2_for_snr(rho_max, &self.ma, snr))
            }
            None => Ok(self.ma.clone()),
        }
    }

    pub fn xi_value(&self) -> Result<f64> {
        match self.xi {
            XiMode::Fixed(x) => Ok(x),
            XiMode::AutoThreshold { margin } => xi_threshold(&self.ma, margin),
        }
    }

    pub fn has(&self, check: Check) -> bool {
        self.checks.contains(&check)
    }

    pub fn under_orders(&self) -> Vec<usize> {
        self.checks
            .iter()
            .filter_map(|c| match c {
                Check::UnderEst(k) => Some(*k),
                _ => None,
            })
            .collect()
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "truth": {"components": [[2.0, 2.827, 1.257, 0.7]]},
        "ma": {"support_kind": "quarter_plane", "extent_k": 0, "extent_l": 0,
               "coeffs": [[0, 0, 1.0]], "sigma2": 1.0},
        "innovation": {"distribution": "gaussian", "master_seed": 1},
        "sizes": [[32, 32]],
        "trials": 2,
        "q_max": 3,
        "xi": {"auto_threshold": {"margin": 0.01}},
        "checks": ["selection", "over_est", "sup_decay"]
    }"#;

    #[test]
    fn parses_and_defaults() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.pad_factor, 4);
        assert!((c.xi_value().unwrap() - 8.08).abs() < 1e-12);
        assert!(c.has(Check::OverEst));
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn invalid_configs_rejected() {
        let small = MINIMAL.replace("[[32, 32]]", "[[8, 32]]");
        assert!(matches!(
            ExperimentConfig::from_json(&small),
            Err(Error::Config(_))
        ));
        let zero = MINIMAL.replace("\"trials\": 2", "\"trials\": 0");
        assert!(ExperimentConfig::from_json(&zero).is_err());
        let under = MINIMAL.replace("\"selection\",", "{\"under_est\": 1},");
        assert!(ExperimentConfig::from_json(&under).is_err());
        assert!(ExperimentConfig::from_json("{").is_err());
    }

    #[test]
    fn snr_sets_variance() {
        let c = ExperimentConfig::from_json(
            &MINIMAL.replace("\"trials\": 2", "\"trials\": 2, \"snr_db\": 10.0"),
        )
        .unwrap();
        let ma = c.noise_model().unwrap();
        let snr = 10.0 * ((2.0f64 * 2.0 / 2.0) / ma.noise_variance()).log10();
        assert!((snr - 10.0).abs() < 1e-12);
    }
}
