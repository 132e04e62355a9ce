use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    /// Exponent weighting of the heart-rate reserve fraction.
    pub fn trimp_exponent(&self) -> f64 {
        match self {
            Sex::Male => 1.92,
            Sex::Female => 1.67,
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sex::Male => "M",
            Sex::Female => "F",
        })
    }
}

impl FromStr for Sex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "m" | "male" => Ok(Sex::Male),
            "f" | "female" => Ok(Sex::Female),
            other => Err(Error::domain(format!("unknown sex {other:?}; expected M or F"))),
        }
    }
}

/// One heart-rate-monitored training session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub duration_min: f64,
    pub avg_hr: f64,
    pub rest_hr: f64,
    pub max_hr: f64,
    pub sex: Sex,
}

/// Banister training impulse of a session:
/// `duration * x * 0.64 * exp(k x)` with `x` the heart-rate reserve fraction.
pub fn trimp(s: &Session) -> Result<f64> {
    let all = [s.duration_min, s.avg_hr, s.rest_hr, s.max_hr];
    if all.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(format!("non-finite session field in {s:?}")));
    }
    if s.duration_min <= 0.0 {
        return Err(Error::domain(format!("session duration {} min must be > 0", s.duration_min)));
    }
    if !(s.rest_hr < s.avg_hr && s.avg_hr <= s.max_hr) {
        return Err(Error::domain(format!(
            "heart rates must satisfy rest < avg <= max, got rest {} avg {} max {}",
            s.rest_hr, s.avg_hr, s.max_hr
        )));
    }
    let x = (s.avg_hr - s.rest_hr) / (s.max_hr - s.rest_hr);
    Ok(s.duration_min * x * 0.64 * (s.sex.trimp_exponent() * x).exp())
}
