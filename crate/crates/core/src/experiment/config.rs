//! Experiment configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::centralized::CentralizedOptions;
use crate::channel::ChannelConfig;
use crate::decentralized::{DecentralizedOptions, TopologyKind};
use crate::geometry::GeometryConfig;
use crate::scheduling::SchedulerKind;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Centralized,
    Decentralized,
    Mrt,
    Zf,
    Sss,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Centralized => "centralized",
            SolverKind::Decentralized => "decentralized",
            SolverKind::Mrt => "mrt",
            SolverKind::Zf => "zf",
            SolverKind::Sss => "sss",
        }
    }

    pub fn all() -> [SolverKind; 5] {
        [
            SolverKind::Centralized,
            SolverKind::Decentralized,
            SolverKind::Mrt,
            SolverKind::Zf,
            SolverKind::Sss,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerConfig {
    pub kind: SchedulerKind,
    pub u_max: usize,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            kind: SchedulerKind::Cs,
            u_max: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    PowerDbm,
    NAntennas,
    NSats,
    NUts,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::PowerDbm => "power_dbm",
            SweepAxis::NAntennas => "n_antennas",
            SweepAxis::NSats => "n_sats",
            SweepAxis::NUts => "n_uts",
        }
    }

    /// Stable index mixed into the per-drop RNG stream.
    pub fn index(&self) -> u64 {
        match self {
            SweepAxis::PowerDbm => 1,
            SweepAxis::NAntennas => 2,
            SweepAxis::NSats => 3,
            SweepAxis::NUts => 4,
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power_dbm" => Ok(SweepAxis::PowerDbm),
            "n_antennas" => Ok(SweepAxis::NAntennas),
            "n_sats" => Ok(SweepAxis::NSats),
            "n_uts" => Ok(SweepAxis::NUts),
            other => Err(Error::config(
                "sweep.axis",
                format!("unknown axis {other:?}; expected power_dbm, n_antennas, n_sats or n_uts"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub centralized: CentralizedOptions,
    pub decentralized: DecentralizedOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    pub channel: ChannelConfig,
    pub scheduler: SchedulerConfig,
    pub solvers: Vec<SolverKind>,
    pub topology: TopologyKind,
    pub power_budget_dbm: f64,
    pub sweep: Option<SweepConfig>,
    pub n_drops: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub tolerances: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryConfig::default(),
            channel: ChannelConfig::default(),
            scheduler: SchedulerConfig::default(),
            solvers: vec![SolverKind::Centralized],
            topology: TopologyKind::Mesh,
            power_budget_dbm: 50.0,
            sweep: None,
            n_drops: 1,
            seed: 0,
            output_dir: PathBuf::from("out"),
            tolerances: Tolerances::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.channel.validate()?;
        if self.n_drops < 1 {
            return Err(Error::config("n_drops", "must be at least 1"));
        }
        if self.solvers.is_empty() {
            return Err(Error::config("solvers", "must not be empty"));
        }
        if self.scheduler.u_max < 1 {
            return Err(Error::config("scheduler.u_max", "must be at least 1"));
        }
        if !self.power_budget_dbm.is_finite() {
            return Err(Error::config("power_budget_dbm", "must be finite"));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::config("sweep.values", "must not be empty"));
            }
            for &v in &sweep.values {
                self.with_axis(sweep.axis, v)?;
            }
        }
        Ok(())
    }

    /// Copy of the configuration with one axis set to `value`.
    pub fn with_axis(&self, axis: SweepAxis, value: f64) -> Result<Self> {
        let mut cfg = self.clone();
        let count = |field: &'static str| -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(Error::config(field, format!("{value} is not a positive integer")))
            }
        };
        match axis {
            SweepAxis::PowerDbm => {
                if !value.is_finite() {
                    return Err(Error::config("power_dbm", "must be finite"));
                }
                cfg.power_budget_dbm = value;
            }
            SweepAxis::NAntennas => {
                let n = count("n_antennas")?;
                let side = (n as f64).sqrt().round() as usize;
                if side * side != n {
                    return Err(Error::config(
                        "n_antennas",
                        format!("{n} is not a square; the array is n_h = n_v = sqrt(N)"),
                    ));
                }
                cfg.channel.arrays.n_h = side;
                cfg.channel.arrays.n_v = side;
            }
            SweepAxis::NSats => cfg.geometry.serving_count = count("n_sats")?,
            SweepAxis::NUts => cfg.geometry.ut_count = count("n_uts")?,
        }
        cfg.geometry.validate()?;
        cfg.channel.validate()?;
        Ok(cfg)
    }

    /// Hex SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.geometry.serving_count, 5);
        assert_eq!(cfg.geometry.ut_count, 32);
        assert_eq!(cfg.scheduler.u_max, 8);
        assert_eq!(cfg.channel.arrays.n_antennas(), 16);
        assert_eq!(cfg.power_budget_dbm, 50.0);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"n_drop": 3}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"geometry": {"altitude": 3}}"#).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"n_drops": 0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"solvers": []}"#).is_err());
        let empty = r#"{"sweep": {"axis": "power_dbm", "values": []}}"#;
        assert!(ExperimentConfig::from_json(empty).is_err());
        let non_square = r#"{"sweep": {"axis": "n_antennas", "values": [10]}}"#;
        assert!(ExperimentConfig::from_json(non_square).is_err());
    }

    #[test]
    fn axis_overrides() {
        let base = ExperimentConfig::default();
        assert_eq!(
            base.with_axis(SweepAxis::NAntennas, 64.0).unwrap().channel.arrays.n_h,
            8
        );
        assert_eq!(base.with_axis(SweepAxis::NSats, 3.0).unwrap().geometry.serving_count, 3);
        assert_eq!(base.with_axis(SweepAxis::NUts, 12.0).unwrap().geometry.ut_count, 12);
        assert_eq!(
            base.with_axis(SweepAxis::PowerDbm, 40.0).unwrap().power_budget_dbm,
            40.0
        );
        assert!(base.with_axis(SweepAxis::NUts, 2.5).is_err());
        assert_eq!("n_uts".parse::<SweepAxis>().unwrap(), SweepAxis::NUts);
        assert!("users".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
