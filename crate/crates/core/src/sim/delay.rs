// SPDX-License-Identifier: Apache-2.0

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Time;
use crate::error::{Error, Result};

/// Per-gate propagation delays, sampled once per run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum DelayModel {
    #[default]
    Unit,
    FixedPerGate { delays: Vec<Time> },
    SeededRandom { d_min: Time, d_max: Time, seed: u64 },
}

impl DelayModel {
    pub fn random(d_min: Time, d_max: Time, seed: u64) -> Self {
        DelayModel::SeededRandom { d_min, d_max, seed }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DelayModel::Unit => Ok(()),
            DelayModel::FixedPerGate { delays } => {
                if delays.contains(&0) {
                    Err(Error::InvalidParameter("gate delays must be >= 1".into()))
                } else {
                    Ok(())
                }
            }
            DelayModel::SeededRandom { d_min, d_max, .. } => {
                if *d_min < 1 || d_min > d_max {
                    Err(Error::InvalidParameter(format!(
                        "delay bounds need 1 <= d_min <= d_max, got [{d_min}, {d_max}]"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn d_max(&self) -> Time {
        match self {
            DelayModel::Unit => 1,
            DelayModel::FixedPerGate { delays } => delays.iter().copied().max().unwrap_or(1),
            DelayModel::SeededRandom { d_max, .. } => *d_max,
        }
    }

    pub fn assign(&self, gates: usize) -> Result<Vec<Time>> {
        self.validate()?;
        Ok(match self {
            DelayModel::Unit => vec![1; gates],
            DelayModel::FixedPerGate { delays } => {
                if delays.len() != gates {
                    return Err(Error::InvalidParameter(format!(
                        "{} fixed delays for {gates} gates",
                        delays.len()
                    )));
                }
                delays.clone()
            }
            DelayModel::SeededRandom { d_min, d_max, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..gates).map(|_| rng.gen_range(*d_min..=*d_max)).collect()
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_assigns_one() {
        assert_eq!(DelayModel::Unit.assign(3).unwrap(), vec![1, 1, 1]);
    }

    #[test]
    fn random_is_seeded_and_bounded() {
        let m = DelayModel::random(2, 5, 9);
        let a = m.assign(200).unwrap();
        assert_eq!(a, m.assign(200).unwrap());
        assert!(a.iter().all(|&d| (2..=5).contains(&d)));
        assert_ne!(a, DelayModel::random(2, 5, 10).assign(200).unwrap());
    }

    #[test]
    fn bad_bounds() {
        assert!(DelayModel::random(0, 3, 1).validate().is_err());
        assert!(DelayModel::random(4, 3, 1).validate().is_err());
        assert!(DelayModel::FixedPerGate { delays: vec![1, 0] }.validate().is_err());
        assert!(DelayModel::FixedPerGate { delays: vec![1] }.assign(2).is_err());
    }
}
