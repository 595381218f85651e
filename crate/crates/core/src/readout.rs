//! Single-shot readout of the nuclear spin.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{DiscreteCDF, Poisson as PoissonDist};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ReadoutError {
    #[error("fidelity must lie in (0.5, 1], got {0}")]
    Fidelity(f64),
    #[error("invalid photon-counting parameters: {0}")]
    Photon(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ReadoutMode {
    /// The reported bit equals the true bit with probability `F`.
    Bernoulli,
    /// Summed counts over `n_repetitions` QND cycles are Poisson with mean
    /// `n·mean_counts_b` for true bit `b`; the bit reads 1 above `threshold`.
    PhotonCounting {
        n_repetitions: u32,
        mean_counts_0: f64,
        mean_counts_1: f64,
        threshold: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    /// Initialization and (Bernoulli) readout fidelity. Ignored in
    /// photon-counting mode, where the implied fidelity takes its place.
    #[serde(default = "unit_fidelity")]
    pub fidelity: f64,
    #[serde(flatten)]
    pub mode: ReadoutMode,
}

fn unit_fidelity() -> f64 {
    1.0
}

impl ReadoutModel {
    pub fn bernoulli(fidelity: f64) -> Result<Self, ReadoutError> {
        let m = Self { fidelity, mode: ReadoutMode::Bernoulli };
        m.validate()?;
        Ok(m)
    }

    /// Photon-counting readout; initialization uses the implied fidelity.
    pub fn photon_counting(n_repetitions: u32, mean_counts_0: f64, mean_counts_1: f64, threshold: u64) -> Result<Self, ReadoutError> {
        let mode = ReadoutMode::PhotonCounting { n_repetitions, mean_counts_0, mean_counts_1, threshold };
        let mut m = Self { fidelity: 1.0, mode };
        m.fidelity = m.implied_fidelity()?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ReadoutError> {
        if let ReadoutMode::PhotonCounting { .. } = self.mode {
            self.implied_fidelity()?;
        }
        let f = self.effective_fidelity()?;
        if !(f > 0.5 && f <= 1.0) {
            return Err(ReadoutError::Fidelity(f));
        }
        Ok(())
    }

    /// Fidelity used for initialization and for the contrast algebra.
    pub fn effective_fidelity(&self) -> Result<f64, ReadoutError> {
        match self.mode {
            ReadoutMode::Bernoulli => Ok(self.fidelity),
            ReadoutMode::PhotonCounting { .. } => self.implied_fidelity(),
        }
    }

    /// Mean probability of reading the true bit, `½[P(N₀ ≤ thr) + P(N₁ > thr)]`.
    /// For Bernoulli mode this is `F` itself.
    pub fn implied_fidelity(&self) -> Result<f64, ReadoutError> {
        match self.mode {
            ReadoutMode::Bernoulli => Ok(self.fidelity),
            ReadoutMode::PhotonCounting { n_repetitions, mean_counts_0, mean_counts_1, threshold } => {
                if n_repetitions == 0 {
                    return Err(ReadoutError::Photon("n_repetitions must be ≥ 1".into()));
                }
                if !(mean_counts_0 > 0.0 && mean_counts_1 > mean_counts_0 && mean_counts_1.is_finite()) {
                    return Err(ReadoutError::Photon(format!(
                        "need 0 < mean_counts_0 < mean_counts_1, got {mean_counts_0} and {mean_counts_1}"
                    )));
                }
                let n = f64::from(n_repetitions);
                let d0 = PoissonDist::new(n * mean_counts_0).map_err(|e| ReadoutError::Photon(e.to_string()))?;
                let d1 = PoissonDist::new(n * mean_counts_1).map_err(|e| ReadoutError::Photon(e.to_string()))?;
                let f = 0.5 * (d0.cdf(threshold) + (1.0 - d1.cdf(threshold)));
                if !(f > 0.5 && f <= 1.0) {
                    return Err(ReadoutError::Fidelity(f));
                }
                Ok(f)
            }
        }
    }

    /// Samples the bit the readout reports for the physical bit `truth`.
    pub fn sample<R: Rng + ?Sized>(&self, truth: bool, rng: &mut R) -> bool {
        match self.mode {
            ReadoutMode::Bernoulli => truth ^ !rng.random_bool(self.fidelity),
            ReadoutMode::PhotonCounting { n_repetitions, mean_counts_0, mean_counts_1, threshold } => {
                let mean = f64::from(n_repetitions) * if truth { mean_counts_1 } else { mean_counts_0 };
                let counts = Poisson::new(mean).expect("validated mean").sample(rng);
                counts > threshold as f64
            }
        }
    }
}
