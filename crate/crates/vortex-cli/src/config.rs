//! Run configuration: perturbation, integrator, strip probes and solver
//! settings, loaded from a single JSON file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vortex_core::mather::OrbitOpts;
use vortex_core::model::{C1ScanSpec, TimeCoefficient};
use vortex_core::poincare::StripOpts;
use vortex_core::{Error, Perturbation, Tolerances};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub perturbation: Perturbation,
    #[serde(default)]
    pub integrator: IntegratorCfg,
    #[serde(default)]
    pub strip: StripCfg,
    #[serde(default)]
    pub solver: SolverCfg,
    #[serde(default)]
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorCfg {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
}

impl Default for IntegratorCfg {
    fn default() -> Self {
        let t = Tolerances::default();
        Self {
            rtol: t.rtol,
            atol: t.atol,
            max_step: t.max_step,
        }
    }
}

impl IntegratorCfg {
    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            rtol: self.rtol,
            atol: self.atol,
            max_step: self.max_step,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct StripCfg {
    /// Override for the computed strip edge.
    pub r_bar: Option<f64>,
    pub theta_probes: usize,
    pub r_probes: usize,
}

impl Default for StripCfg {
    fn default() -> Self {
        Self {
            r_bar: None,
            theta_probes: 16,
            r_probes: 12,
        }
    }
}

impl StripCfg {
    pub fn strip_opts(&self) -> StripOpts {
        StripOpts {
            theta_probes: self.theta_probes,
            r_probes: self.r_probes,
            k_span: 20.0,
            c1_scan: C1ScanSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverCfg {
    pub newton_tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for SolverCfg {
    fn default() -> Self {
        let o = OrbitOpts::default();
        Self {
            newton_tol: o.tol,
            max_iter: o.max_iter,
            damping: o.damping,
        }
    }
}

impl SolverCfg {
    pub fn orbit_opts(&self) -> OrbitOpts {
        OrbitOpts {
            tol: self.newton_tol,
            max_iter: self.max_iter,
            damping: self.damping,
            ..OrbitOpts::default()
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let i = &self.integrator;
        if !(i.rtol > 0.0 && i.atol > 0.0 && i.max_step > 0.0) {
            return Err(Error::Invalid(
                "integrator tolerances must be positive".into(),
            ));
        }
        if !(self.solver.newton_tol > 0.0) {
            return Err(Error::Invalid("newton_tol must be positive".into()));
        }
        if !(self.solver.damping > 0.0 && self.solver.damping < 1.0) {
            return Err(Error::Invalid("damping must lie in (0, 1)".into()));
        }
        if let Some(r_bar) = self.strip.r_bar {
            if !(r_bar > self.perturbation.r_star()) {
                return Err(Error::Invalid(format!(
                    "strip r_bar override {r_bar} does not exceed r* = {}",
                    self.perturbation.r_star()
                )));
            }
        }
        Ok(())
    }
}

/// Load and validate a configuration; returns it with the SHA-256 hash of
/// the raw file bytes (embedded into every summary for reproducibility).
pub fn load(path: &Path) -> Result<(RunConfig, String), Error> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Invalid(format!("config file {} not readable: {e}", path.display())))?;
    let cfg: RunConfig = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Invalid(format!("config file {}: {e}", path.display())))?;
    cfg.validate()?;
    let hash = format!("{:x}", Sha256::digest(&bytes));
    Ok((cfg, hash))
}

/// The standard test perturbation: `p = γ cos(2πt) x⁴` with `γ = 0.01` on
/// the unit disk.  Shared by the verification battery, the test suites and
/// the benchmarks.
pub fn standard_test_config() -> RunConfig {
    RunConfig {
        perturbation: Perturbation::monomial(4, 0, TimeCoefficient::cosine(0.01, 1), 1.0)
            .expect("valid monomial"),
        integrator: IntegratorCfg::default(),
        strip: StripCfg::default(),
        solver: SolverCfg::default(),
        output_dir: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_config_round_trips() {
        let cfg = standard_test_config();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        back.validate().unwrap();
        assert_eq!(serde_json::to_string_pretty(&back).unwrap(), text);
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let text = r#"{"perturbation": {"degree": 4, "epsilon": 1.0, "terms": []}}"#;
        let cfg: RunConfig = serde_json::from_str(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.integrator.rtol, 1e-10);
        assert_eq!(cfg.solver.max_iter, 60);
    }

    #[test]
    fn bad_values_rejected() {
        let mut cfg = standard_test_config();
        cfg.integrator.rtol = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = standard_test_config();
        cfg.solver.damping = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = standard_test_config();
        cfg.strip.r_bar = Some(0.1);
        assert!(cfg.validate().is_err());
    }
}
