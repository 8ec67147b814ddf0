//! Experiment configuration: one JSON document wiring the driving system,
//! the fiber family, the operator potential and the geometry/effort knobs.
//! Cross-constraints are enforced at load time so pipelines can assume a
//! coherent parameter set.

use serde::{Deserialize, Serialize};

use crate::driving::{DrivingSystem, ParameterRule};
use crate::maps::{Family, FiberMap, GrowthProfile};
use crate::transfer::PotentialConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrivingBlock {
    /// "rotation" or "shift".
    pub kind: String,
    /// Rotation angle; golden ratio when omitted.
    #[serde(default)]
    pub angle: Option<f64>,
    /// Parameter box `[lo, hi]` for the rotation rule.
    #[serde(default)]
    pub parameter_box: Option<[f64; 2]>,
    /// Per-symbol parameter table for the shift rule.
    #[serde(default)]
    pub parameter_values: Option<Vec<f64>>,
    #[serde(default = "default_shift_seed")]
    pub shift_seed: u64,
    #[serde(default = "default_max_orbit")]
    pub max_orbit_len: i64,
}

fn default_shift_seed() -> u64 {
    7
}

fn default_max_orbit() -> i64 {
    100_000_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyBlock {
    /// "random_exp", "random_tangent", "square" or "identity".
    pub name: String,
    /// Base-point normalization radius (the Condition on bounded anchors).
    #[serde(default = "default_t_norm")]
    pub t_norm: f64,
    /// Declared growth profile; family defaults when omitted.
    #[serde(default)]
    pub growth: Option<GrowthProfile>,
}

fn default_t_norm() -> f64 {
    10.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    /// Truncation radius for Julia clouds.
    pub r_max: f64,
    /// Core radius R₀ (tightness, references, ball constants).
    pub r0: f64,
    /// Pullback depth of the Julia approximation.
    pub julia_depth: usize,
    /// Cloud points shallower than this are dropped from grids.
    #[serde(default = "default_min_depth")]
    pub grid_min_depth: u32,
    /// Grid size cap per fiber.
    #[serde(default = "default_grid_points")]
    pub grid_max_points: usize,
    /// Deduplication lattice spacing (defaults to `r_max / 2000`).
    #[serde(default)]
    pub h_dedup: Option<f64>,
    /// Shrinking-branch threshold.
    #[serde(default = "default_eta_shrink")]
    pub eta_shrink: f64,
    /// Pullback depth for conformal measures.
    #[serde(default = "default_pullback")]
    pub pullback_depth: usize,
    /// Number of fibers carried by the standard laboratory window.
    #[serde(default = "default_window")]
    pub window: usize,
}

fn default_min_depth() -> u32 {
    3
}
fn default_grid_points() -> usize {
    900
}
fn default_eta_shrink() -> f64 {
    1.05
}
fn default_pullback() -> usize {
    25
}
fn default_window() -> usize {
    40
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsBlock {
    #[serde(default = "default_clt_n")]
    pub clt_n: usize,
    #[serde(default = "default_clt_samples")]
    pub clt_samples: usize,
    /// Correlation-sum truncation for the Green–Kubo variance.
    #[serde(default = "default_k_cap")]
    pub corr_k_cap: usize,
    /// Fibers averaged in correlation estimates.
    #[serde(default = "default_corr_fibers")]
    pub corr_fibers: usize,
    #[serde(default = "default_mc")]
    pub mc_trajectories: usize,
    /// Branch cutoff used by the long CLT sweeps (lighter than the main
    ///[`PotentialConfig::k_max`] to keep the orbit-length scaling linear).
    #[serde(default = "default_clt_kmax")]
    pub clt_k_max: i64,
}

fn default_clt_n() -> usize {
    2000
}
fn default_clt_samples() -> usize {
    5000
}
fn default_k_cap() -> usize {
    15
}
fn default_corr_fibers() -> usize {
    6
}
fn default_mc() -> usize {
    100_000
}
fn default_clt_kmax() -> i64 {
    150
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub driving: DrivingBlock,
    pub family: FamilyBlock,
    pub potential: PotentialConfig,
    pub geometry: GeometryBlock,
    #[serde(default = "default_stats")]
    pub stats: StatsBlock,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub output_dir: String,
}

fn default_stats() -> StatsBlock {
    StatsBlock {
        clt_n: default_clt_n(),
        clt_samples: default_clt_samples(),
        corr_k_cap: default_k_cap(),
        corr_fibers: default_corr_fibers(),
        mc_trajectories: default_mc(),
        clt_k_max: default_clt_kmax(),
    }
}

fn default_out() -> String {
    "out".into()
}

impl ExperimentConfig {
    /// The desk-scale exponential-family configuration.
    pub fn default_random_exp() -> Self {
        ExperimentConfig {
            driving: DrivingBlock {
                kind: "rotation".into(),
                angle: None,
                parameter_box: Some([0.1, 0.3]),
                parameter_values: None,
                shift_seed: default_shift_seed(),
                max_orbit_len: default_max_orbit(),
            },
            family: FamilyBlock {
                name: "random_exp".into(),
                t_norm: 10.0,
                growth: None,
            },
            potential: PotentialConfig::default_random_exp(),
            geometry: GeometryBlock {
                r_max: 30.0,
                r0: 10.0,
                julia_depth: 10,
                grid_min_depth: 3,
                grid_max_points: 900,
                h_dedup: None,
                eta_shrink: 1.05,
                pullback_depth: 25,
                window: 40,
            },
            stats: default_stats(),
            seed: 1,
            output_dir: "out".into(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// The driving system described by the config.
    pub fn driving_system(&self) -> Result<DrivingSystem> {
        match self.driving.kind.as_str() {
            "rotation" => {
                let [lo, hi] = self.driving.parameter_box.ok_or_else(|| {
                    Error::InvalidConfig("rotation driving needs parameter_box".into())
                })?;
                let mut sys = DrivingSystem::rotation(lo, hi);
                if let Some(angle) = self.driving.angle {
                    sys.kind = crate::driving::BaseKind::CircleRotation { angle };
                }
                sys.max_orbit_len = self.driving.max_orbit_len;
                Ok(sys)
            }
            "shift" => {
                let values = self.driving.parameter_values.clone().ok_or_else(|| {
                    Error::InvalidConfig("shift driving needs parameter_values".into())
                })?;
                let mut sys = DrivingSystem::shift(self.driving.shift_seed, values);
                sys.max_orbit_len = self.driving.max_orbit_len;
                Ok(sys)
            }
            other => Err(Error::InvalidConfig(format!(
                "unknown driving kind {other:?} (expected \"rotation\" or \"shift\")"
            ))),
        }
    }

    /// Instantiate the fiber map for a parameter value.
    pub fn fiber_map(&self, parameter: f64) -> Result<FiberMap> {
        match self.family.name.as_str() {
            "random_exp" => Ok(FiberMap::random_exp(parameter)),
            "random_tangent" => Ok(FiberMap::random_tangent(parameter)),
            "square" => Ok(FiberMap::square()),
            "identity" => Ok(FiberMap::identity()),
            other => Err(Error::InvalidConfig(format!(
                "unknown family {other:?}"
            ))),
        }
    }

    pub fn growth_profile(&self) -> Result<GrowthProfile> {
        if let Some(g) = self.family.growth {
            return Ok(g);
        }
        Ok(self.fiber_map(0.2)?.default_growth_profile())
    }

    pub fn h_dedup(&self) -> f64 {
        self.geometry.h_dedup.unwrap_or(self.geometry.r_max / 2000.0)
    }

    /// Schema-level and cross-constraint validation.
    pub fn validate(&self) -> Result<()> {
        let probe = self.fiber_map(0.2)?;
        let profile = self.growth_profile()?;
        match probe.family {
            Family::RandomExp { .. } | Family::RandomTangent { .. } => {
                let exps = probe.growth_exponents().unwrap();
                self.potential.validate(&exps, &profile)?;
            }
            // fixtures run with fixture potentials; only basic sanity applies
            Family::Square | Family::Identity => {
                if self.potential.k_max < 1 {
                    return Err(Error::InvalidConfig("k_max must be ≥ 1".into()));
                }
            }
        }
        match (&self.driving.kind[..], &self.driving.parameter_box) {
            ("rotation", Some([lo, hi])) if lo >= hi => {
                return Err(Error::InvalidConfig(format!(
                    "parameter box [{lo}, {hi}] is empty"
                )));
            }
            ("rotation", None) => {
                return Err(Error::InvalidConfig(
                    "rotation driving needs parameter_box".into(),
                ));
            }
            _ => {}
        }
        if matches!(self.driving.kind.as_str(), "shift")
            && self
                .driving
                .parameter_values
                .as_ref()
                .map_or(true, |v| v.len() < 2)
        {
            return Err(Error::InvalidConfig(
                "shift driving needs at least two parameter values".into(),
            ));
        }
        if !(self.geometry.r0 > 0.0 && self.geometry.r_max > self.geometry.r0) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < r0 < r_max, got r0 = {}, r_max = {}",
                self.geometry.r0, self.geometry.r_max
            )));
        }
        if self.geometry.julia_depth == 0 || self.geometry.window == 0 {
            return Err(Error::InvalidConfig(
                "julia_depth and window must be positive".into(),
            ));
        }
        if self.geometry.eta_shrink <= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "eta_shrink must exceed 1, got {}",
                self.geometry.eta_shrink
            )));
        }
        if let Some(rule) = match &self.driving.parameter_box {
            Some([lo, hi]) => Some(ParameterRule::Box { lo: *lo, hi: *hi }),
            None => None,
        } {
            let _ = rule; // box validity covered above
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = ExperimentConfig::default_random_exp();
        cfg.validate().unwrap();
        let text = cfg.to_json();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn potential_constraint_violations_are_rejected() {
        let mut cfg = ExperimentConfig::default_random_exp();
        cfg.potential.t = 0.5; // below ρ/α = 1
        assert!(matches!(
            cfg.validate(),
            Err(Error::InvalidConfig(_))
        ));
        let mut cfg = ExperimentConfig::default_random_exp();
        cfg.potential.tau = 2.0; // above α₂
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_fields_and_families_are_rejected() {
        let text = r#"{"driving": {"kind": "rotation", "parameter_box": [0.1, 0.3]},
            "family": {"name": "lemniscate"},
            "potential": {"t": 3.0, "tau": 0.5, "beta": 0.5, "delta": 0.25, "k_max": 400, "eps_tail": 0.25},
            "geometry": {"r_max": 30.0, "r0": 10.0, "julia_depth": 10}}"#;
        assert!(ExperimentConfig::from_json(text).is_err());
        let bogus = r#"{"nonsense": 1}"#;
        assert!(ExperimentConfig::from_json(bogus).is_err());
    }

    #[test]
    fn geometry_sanity() {
        let mut cfg = ExperimentConfig::default_random_exp();
        cfg.geometry.r0 = 50.0; // beyond r_max
        assert!(cfg.validate().is_err());
    }
}
