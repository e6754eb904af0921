//! Execution-error distributions and the freehand / guided presets.

use rand::Rng;
use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Gaussian,
    TruncatedGaussian,
}

/// Truncation interval, given either as `[lo, hi]` or as a half-width `t`
/// meaning `[-t, t]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Truncation {
    Symmetric(f64),
    Bounds([f64; 2]),
}

impl Truncation {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Truncation::Symmetric(t) => (-t, t),
            Truncation::Bounds([lo, hi]) => (lo, hi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub mean: f64,
    pub sd: f64,
    /// Only honoured by the truncated family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trunc: Option<Truncation>,
}

impl Distribution {
    pub fn gaussian(mean: f64, sd: f64) -> Self {
        Self { mean, sd, trunc: None }
    }

    pub fn truncated(mean: f64, sd: f64, half_width: f64) -> Self {
        Self {
            mean,
            sd,
            trunc: Some(Truncation::Symmetric(half_width)),
        }
    }

    fn validate(&self, name: &str, family: Family) -> Result<()> {
        if !(self.sd >= 0.0 && self.sd.is_finite() && self.mean.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name}: sd must be finite and ≥ 0")));
        }
        if let (Family::TruncatedGaussian, Some(t)) = (family, self.trunc) {
            let (lo, hi) = t.bounds();
            if !(lo < hi) {
                return Err(Error::InvalidParameter(format!(
                    "{name}: truncation bounds [{lo}, {hi}] not ordered"
                )));
            }
            if self.sd == 0.0 && !(lo..=hi).contains(&self.mean) {
                return Err(Error::InvalidParameter(format!(
                    "{name}: degenerate mean outside truncation"
                )));
            }
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, family: Family, rng: &mut R) -> f64 {
        if self.sd == 0.0 {
            return self.mean;
        }
        match (family, self.trunc) {
            (Family::TruncatedGaussian, Some(t)) => {
                let (lo, hi) = t.bounds();
                let unit = StatNormal::new(0.0, 1.0).expect("standard normal");
                let a = unit.cdf((lo - self.mean) / self.sd);
                let b = unit.cdf((hi - self.mean) / self.sd);
                let u = a + (b - a) * rng.random::<f64>();
                let x = self.mean + self.sd * unit.inverse_cdf(u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON));
                x.clamp(lo, hi)
            }
            _ => Normal::new(self.mean, self.sd).expect("validated sd").sample(rng),
        }
    }
}

/// Error applied to one cut: translation along the planned normal (mm,
/// positive away from the tumor) and rotations about the pelvic X (roll)
/// and Y (pitch) axes in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExecutionError {
    pub dt_mm: f64,
    pub roll_deg: f64,
    pub pitch_deg: f64,
}

impl ExecutionError {
    pub fn new(dt_mm: f64, roll_deg: f64, pitch_deg: f64) -> Self {
        Self {
            dt_mm,
            roll_deg,
            pitch_deg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub family: Family,
    pub dt: Distribution,
    pub roll: Distribution,
    pub pitch: Distribution,
    #[serde(default)]
    pub seed: u64,
}

impl ErrorModel {
    /// Freehand resection: Gaussian errors with the measured freehand
    /// means and SDs (2.07 ± 1.71 mm, 15.36 ± 17.57°, 6.17 ± 4.58°).
    pub fn freehand() -> Self {
        Self {
            name: Some("freehand".into()),
            family: Family::Gaussian,
            dt: Distribution::gaussian(2.07, 1.71),
            roll: Distribution::gaussian(15.36, 17.57),
            pitch: Distribution::gaussian(6.17, 4.58),
            seed: 0,
        }
    }

    /// Vision-guided resection: translation truncated at ±3 mm.
    pub fn guided() -> Self {
        Self {
            name: Some("guided".into()),
            family: Family::TruncatedGaussian,
            dt: Distribution::truncated(1.01, 0.78, 3.0),
            roll: Distribution::gaussian(4.21, 3.46),
            pitch: Distribution::gaussian(1.84, 1.48),
            seed: 0,
        }
    }

    pub fn zero() -> Self {
        Self {
            name: Some("zero".into()),
            family: Family::Gaussian,
            dt: Distribution::gaussian(0.0, 0.0),
            roll: Distribution::gaussian(0.0, 0.0),
            pitch: Distribution::gaussian(0.0, 0.0),
            seed: 0,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "freehand" => Some(Self::freehand()),
            "guided" | "vision-guided" => Some(Self::guided()),
            "zero" => Some(Self::zero()),
            _ => None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.dt.validate("dt", self.family)?;
        self.roll.validate("roll", self.family)?;
        self.pitch.validate("pitch", self.family)
    }
}

/// Draws `dt`, roll and pitch in that order.
pub fn sample_execution_error<R: Rng + ?Sized>(model: &ErrorModel, rng: &mut R) -> ExecutionError {
    ExecutionError {
        dt_mm: model.dt.sample(model.family, rng),
        roll_deg: model.roll.sample(model.family, rng),
        pitch_deg: model.pitch.sample(model.family, rng),
    }
}
