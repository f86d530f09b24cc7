//! Teacher descriptors such as `mlp:20,20`, `knn` or `external:<command>`,
//! and how to build the oracle each one names.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use rulematrix_core::knn::NearestNeighbor;
use rulematrix_core::mlp::{train_mlp, MlpConfig};
use rulematrix_core::{DataTable, Oracle};

use crate::error::{Error, Result};
use crate::external::ExternalOracle;

#[derive(Debug, Clone, PartialEq)]
pub enum TeacherSpec {
    /// `mlp:<widths>[;l2=..][;epochs=..][;lr=..][;seed=..]`
    Mlp(MlpConfig),
    Knn,
    /// `external:<shell command>`
    External(String),
}

impl FromStr for TeacherSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::BadTeacher(s.to_string());
        if s == "knn" {
            return Ok(TeacherSpec::Knn);
        }
        if let Some(cmd) = s.strip_prefix("external:") {
            if cmd.trim().is_empty() {
                return Err(bad());
            }
            return Ok(TeacherSpec::External(cmd.to_string()));
        }
        let body = s.strip_prefix("mlp:").ok_or_else(bad)?;
        let mut parts = body.split(';');
        let widths = parts.next().unwrap_or_default();
        let mut config = MlpConfig {
            hidden: widths.split(',').map(|w| w.trim().parse::<usize>()).collect::<Result<_, _>>().map_err(|_| bad())?,
            ..MlpConfig::default()
        };
        if config.hidden.contains(&0) {
            return Err(bad());
        }
        for kv in parts {
            let (k, v) = kv.split_once('=').ok_or_else(bad)?;
            match k.trim() {
                "l2" => config.l2_penalty = v.parse().map_err(|_| bad())?,
                "epochs" => config.epochs = v.parse().map_err(|_| bad())?,
                "lr" => config.learning_rate = v.parse().map_err(|_| bad())?,
                "seed" => config.seed = v.parse().map_err(|_| bad())?,
                _ => return Err(bad()),
            }
        }
        Ok(TeacherSpec::Mlp(config))
    }
}

impl fmt::Display for TeacherSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TeacherSpec::Knn => f.write_str("knn"),
            TeacherSpec::External(cmd) => write!(f, "external:{cmd}"),
            TeacherSpec::Mlp(c) => {
                let widths: Vec<String> = c.hidden.iter().map(usize::to_string).collect();
                write!(f, "mlp:{}", widths.join(","))?;
                let d = MlpConfig::default();
                if c.l2_penalty != d.l2_penalty {
                    write!(f, ";l2={}", c.l2_penalty)?;
                }
                if c.epochs != d.epochs {
                    write!(f, ";epochs={}", c.epochs)?;
                }
                if c.learning_rate != d.learning_rate {
                    write!(f, ";lr={}", c.learning_rate)?;
                }
                if c.seed != d.seed {
                    write!(f, ";seed={}", c.seed)?;
                }
                Ok(())
            }
        }
    }
}

impl TeacherSpec {
    /// The same spec with its training seed replaced (no-op for non-MLP).
    pub fn with_seed(&self, seed: u64) -> TeacherSpec {
        match self {
            TeacherSpec::Mlp(c) => TeacherSpec::Mlp(MlpConfig { seed, ..c.clone() }),
            other => other.clone(),
        }
    }

    /// Trains (or connects to) the teacher. Built-in teachers are a pure
    /// function of the spec and `train`.
    pub fn build(&self, train: &DataTable, timeout: Duration) -> Result<Box<dyn Oracle>> {
        Ok(match self {
            TeacherSpec::Mlp(config) => Box::new(train_mlp(train, config)?),
            TeacherSpec::Knn => Box::new(NearestNeighbor::fit(train)?),
            TeacherSpec::External(cmd) => Box::new(ExternalOracle::spawn(cmd, &train.schema, timeout)?),
        })
    }
}
