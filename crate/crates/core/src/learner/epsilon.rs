use serde::{Deserialize, Serialize};

use super::LearnError;

/// Exponentially decaying exploration rate with a floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub eps0: f64,
    pub decay: f64,
    pub eps_min: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule {
            eps0: 1.0,
            decay: 0.995,
            eps_min: 0.01,
        }
    }
}

impl EpsilonSchedule {
    pub fn new(eps0: f64, decay: f64, eps_min: f64) -> Result<Self, LearnError> {
        let schedule = EpsilonSchedule {
            eps0,
            decay,
            eps_min,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        if !(0.0..=1.0).contains(&self.eps0) {
            return Err(LearnError::InvalidParameter("eps0 must lie in [0, 1]"));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(LearnError::InvalidParameter("eps decay must lie in (0, 1]"));
        }
        if !(self.eps_min >= 0.0 && self.eps_min <= self.eps0) {
            return Err(LearnError::InvalidParameter(
                "eps_min must lie in [0, eps0]",
            ));
        }
        Ok(())
    }

    pub fn at(&self, episode: u64) -> f64 {
        let exp = i32::try_from(episode).unwrap_or(i32::MAX);
        (self.eps0 * self.decay.powi(exp)).max(self.eps_min)
    }
}

pub fn epsilon_at(schedule: &EpsilonSchedule, episode: u64) -> f64 {
    schedule.at(episode)
}
