use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::manipulate::DEFAULT_DM_GAMMA;
use crate::scoring::{DEFAULT_GAMMA, DEFAULT_POOL_SIZE};

/// How each monolingual sentence is back-translated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BtStrategy {
    /// Bitext only, no synthetic data.
    None,
    Beam,
    Sampling,
    /// Beam for a `gamma` share of the corpus, sampling for the rest. The
    /// split seed defaults to the run seed.
    DataManipulation {
        gamma: f64,
        seed: Option<u64>,
    },
    GammaSelect {
        gamma: f64,
        n: usize,
    },
    GammaSample {
        gamma: f64,
        n: usize,
    },
    /// Beam search with a backward model fit on a small bitext subsample.
    BeamWeak,
}

impl BtStrategy {
    pub fn validate(&self) -> Result<()> {
        let check_gamma = |g: f64| {
            if (0.0..=1.0).contains(&g) {
                Ok(())
            } else {
                Err(Error::Config(format!("strategy {self}: gamma must lie in [0, 1]")))
            }
        };
        match *self {
            BtStrategy::DataManipulation { gamma, .. } => check_gamma(gamma),
            BtStrategy::GammaSelect { gamma, n } | BtStrategy::GammaSample { gamma, n } => {
                check_gamma(gamma)?;
                if n < 2 {
                    return Err(Error::Config(format!("strategy {self}: candidate pool needs N >= 2")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// The strategies compared in a full experiment, with default parameters.
    pub fn standard_set() -> Vec<BtStrategy> {
        vec![
            BtStrategy::None,
            BtStrategy::Beam,
            BtStrategy::Sampling,
            BtStrategy::DataManipulation { gamma: DEFAULT_DM_GAMMA, seed: None },
            BtStrategy::GammaSelect { gamma: DEFAULT_GAMMA, n: DEFAULT_POOL_SIZE },
            BtStrategy::GammaSample { gamma: DEFAULT_GAMMA, n: DEFAULT_POOL_SIZE },
            BtStrategy::BeamWeak,
        ]
    }
}

impl fmt::Display for BtStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BtStrategy::None => write!(f, "none"),
            BtStrategy::Beam => write!(f, "beam"),
            BtStrategy::Sampling => write!(f, "sampling"),
            BtStrategy::DataManipulation { gamma, seed: None } => write!(f, "dm:{gamma}"),
            BtStrategy::DataManipulation { gamma, seed: Some(s) } => write!(f, "dm:{gamma}:{s}"),
            BtStrategy::GammaSelect { gamma, n } => write!(f, "gamma-select:{gamma}:{n}"),
            BtStrategy::GammaSample { gamma, n } => write!(f, "gamma-sample:{gamma}:{n}"),
            BtStrategy::BeamWeak => write!(f, "beam-weak"),
        }
    }
}

impl FromStr for BtStrategy {
    type Err = Error;

    /// Accepts `none`, `beam`, `sampling`, `beam-weak`, `dm[:gamma[:seed]]`,
    /// `gamma-select[:gamma[:n]]` and `gamma-sample[:gamma[:n]]`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let name = parts.next().unwrap_or_default();
        let args: Vec<&str> = parts.collect();
        let bad = || Error::Config(format!("cannot parse strategy '{s}'"));
        let float = |i: usize, default: f64| -> Result<f64> {
            args.get(i).map_or(Ok(default), |a| a.parse().map_err(|_| bad()))
        };
        let int = |i: usize| -> Result<Option<u64>> { args.get(i).map(|a| a.parse().map_err(|_| bad())).transpose() };
        let max_args = match name {
            "none" | "beam" | "sampling" | "beam-weak" => 0,
            _ => 2,
        };
        if args.len() > max_args {
            return Err(bad());
        }
        let strategy = match name {
            "none" => BtStrategy::None,
            "beam" => BtStrategy::Beam,
            "sampling" => BtStrategy::Sampling,
            "beam-weak" => BtStrategy::BeamWeak,
            "dm" | "data-manipulation" => {
                BtStrategy::DataManipulation { gamma: float(0, DEFAULT_DM_GAMMA)?, seed: int(1)? }
            }
            "gamma-select" => BtStrategy::GammaSelect {
                gamma: float(0, DEFAULT_GAMMA)?,
                n: int(1)?.map_or(DEFAULT_POOL_SIZE, |n| n as usize),
            },
            "gamma-sample" => BtStrategy::GammaSample {
                gamma: float(0, DEFAULT_GAMMA)?,
                n: int(1)?.map_or(DEFAULT_POOL_SIZE, |n| n as usize),
            },
            _ => return Err(bad()),
        };
        strategy.validate()?;
        Ok(strategy)
    }
}
