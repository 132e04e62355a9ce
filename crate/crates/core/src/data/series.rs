use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntensityUnit {
    Steps,
    Srpe,
    Trimp,
}

impl fmt::Display for IntensityUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IntensityUnit::Steps => "steps",
            IntensityUnit::Srpe => "sRPE",
            IntensityUnit::Trimp => "TRIMP",
        })
    }
}

/// Min and max of the raw values, kept to undo a normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: f64,
    pub max: f64,
}

impl Normalization {
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    pub fn invert(&self, y: f64) -> f64 {
        self.min + y * (self.max - self.min)
    }
}

/// Dated exercise-intensity measurements for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensitySeries {
    pub user_id: String,
    pub unit: IntensityUnit,
    pub samples: Vec<(NaiveDate, f64)>,
    /// Values mapped to `[0, 1]`, aligned with `samples`.
    pub normalized: Option<Vec<f64>>,
    pub normalization: Option<Normalization>,
}

impl IntensitySeries {
    pub fn new(user_id: impl Into<String>, unit: IntensityUnit, samples: Vec<(NaiveDate, f64)>) -> Result<Self> {
        let s = Self {
            user_id: user_id.into(),
            unit,
            samples,
            normalized: None,
            normalization: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_dates(self.samples.iter().map(|s| s.0))?;
        if let Some((d, v)) = self.samples.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::domain(format!("intensity on {d} is {v}, expected a finite value >= 0")));
        }
        if let Some(n) = &self.normalized {
            if n.len() != self.samples.len() || n.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::domain("normalized values must align with samples and lie in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.1)
    }

    /// Normalized values expanded to one per calendar day from the first
    /// sample to `through` (inclusive); days without a sample count as rest.
    pub fn daily_normalized(&self, through: NaiveDate) -> Result<Vec<(NaiveDate, f64)>> {
        let norm = self
            .normalized
            .as_ref()
            .ok_or_else(|| Error::Data(format!("series {} is not normalized", self.user_id)))?;
        let Some(&(start, _)) = self.samples.first() else {
            return Ok(Vec::new());
        };
        let mut out = Vec::new();
        let mut next = 0;
        let mut day = start;
        while day <= through {
            let v = if next < self.samples.len() && self.samples[next].0 == day {
                next += 1;
                norm[next - 1]
            } else {
                0.0
            };
            out.push((day, v));
            day = day.succ_opt().ok_or_else(|| Error::domain("date overflow"))?;
        }
        Ok(out)
    }
}

/// Observed performance (VO2max, ml/kg/min) for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceSeries {
    pub user_id: String,
    pub samples: Vec<(NaiveDate, f64)>,
}

impl PerformanceSeries {
    pub fn new(user_id: impl Into<String>, samples: Vec<(NaiveDate, f64)>) -> Result<Self> {
        check_dates(samples.iter().map(|s| s.0))?;
        if let Some((d, v)) = samples.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::domain(format!("VO2max on {d} is {v}, expected > 0")));
        }
        Ok(Self {
            user_id: user_id.into(),
            samples,
        })
    }
}

fn check_dates(dates: impl Iterator<Item = NaiveDate>) -> Result<()> {
    let mut prev: Option<NaiveDate> = None;
    for d in dates {
        if let Some(p) = prev {
            if d == p {
                return Err(Error::domain(format!("duplicate date {d}")));
            }
            if d < p {
                return Err(Error::domain(format!("date {d} follows {p}; dates must be increasing")));
            }
        }
        prev = Some(d);
    }
    Ok(())
}

/// Min-max scales the series into `[0, 1]`, recording the range.
pub fn normalize(series: &IntensitySeries) -> Result<IntensitySeries> {
    let (min, max) = series
        .values()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !(max > min) {
        return Err(Error::domain(format!(
            "series {} has a degenerate range; normalization needs two distinct values",
            series.user_id
        )));
    }
    let n = Normalization { min, max };
    let normalized = series.values().map(|v| n.apply(v).clamp(0.0, 1.0)).collect();
    Ok(IntensitySeries {
        normalized: Some(normalized),
        normalization: Some(n),
        ..series.clone()
    })
}

/// Undoes [`normalize`], returning the raw values.
pub fn denormalize(series: &IntensitySeries) -> Result<Vec<f64>> {
    match (&series.normalized, &series.normalization) {
        (Some(values), Some(n)) => Ok(values.iter().map(|&y| n.invert(y)).collect()),
        _ => Err(Error::Data(format!("series {} is not normalized", series.user_id))),
    }
}
