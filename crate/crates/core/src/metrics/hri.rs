//! Robot attention demand, fan-out and the trust-adjusted variant.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::MetricsError;

/// Five ordinal trust states and their numeric values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TrustLevel {
    VeryLow,
    Low,
    #[default]
    Medium,
    High,
    VeryHigh,
}

impl TrustLevel {
    pub const ALL: [TrustLevel; 5] = [
        TrustLevel::VeryLow,
        TrustLevel::Low,
        TrustLevel::Medium,
        TrustLevel::High,
        TrustLevel::VeryHigh,
    ];

    pub fn value(self) -> f64 {
        match self {
            TrustLevel::VeryLow => 0.1,
            TrustLevel::Low => 0.3,
            TrustLevel::Medium => 0.5,
            TrustLevel::High => 0.7,
            TrustLevel::VeryHigh => 0.9,
        }
    }

    pub fn from_value(value: f64) -> Option<TrustLevel> {
        Self::ALL.into_iter().find(|t| t.value() == value)
    }

    pub fn label(self) -> &'static str {
        match self {
            TrustLevel::VeryLow => "VeryLow",
            TrustLevel::Low => "Low",
            TrustLevel::Medium => "Medium",
            TrustLevel::High => "High",
            TrustLevel::VeryHigh => "VeryHigh",
        }
    }

    /// Buckets a 0–100 % questionnaire score into fifths.
    pub fn from_percent(percent: f64) -> TrustLevel {
        match percent {
            p if p < 20.0 => TrustLevel::VeryLow,
            p if p < 40.0 => TrustLevel::Low,
            p if p < 60.0 => TrustLevel::Medium,
            p if p < 80.0 => TrustLevel::High,
            _ => TrustLevel::VeryHigh,
        }
    }
}

impl fmt::Display for TrustLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for TrustLevel {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| MetricsError::UnknownTrustLevel(s.to_string()))
    }
}

/// `ie / (ie + nt)`.
pub fn compute_rad(ie_s: f64, nt_s: f64) -> Result<f64, MetricsError> {
    let span = ie_s + nt_s;
    if span.is_nan() || span <= 0.0 || ie_s < 0.0 || nt_s < 0.0 {
        return Err(MetricsError::DegenerateRun);
    }
    Ok(ie_s / span)
}

/// Total task time divided by RAD, in seconds.
pub fn compute_fo(total_task_time_s: f64, rad: f64) -> Result<f64, MetricsError> {
    if rad.is_nan() || rad <= 0.0 {
        return Err(MetricsError::ZeroRad);
    }
    Ok(total_task_time_s / rad)
}

/// Direct plus indirect interaction time: `dit + nt·(1 − trust) / (ie + nt)`.
///
/// The indirect term is normalized by the episode span so the result stays a
/// fraction: full trust reduces to `dit`, zero trust gives 1.
pub fn trust_adjusted_rad_with_value(
    dit: f64,
    nt_s: f64,
    ie_s: f64,
    trust_value: f64,
) -> Result<f64, MetricsError> {
    let span = ie_s + nt_s;
    if span.is_nan() || span <= 0.0 {
        return Err(MetricsError::DegenerateRun);
    }
    Ok(dit + nt_s * (1.0 - trust_value) / span)
}

pub fn trust_adjusted_rad(
    dit: f64,
    nt_s: f64,
    ie_s: f64,
    trust: TrustLevel,
) -> Result<f64, MetricsError> {
    trust_adjusted_rad_with_value(dit, nt_s, ie_s, trust.value())
}

/// Indirect interaction time fraction for a trust value.
pub fn indirect_interaction(nt_s: f64, ie_s: f64, trust_value: f64) -> Result<f64, MetricsError> {
    trust_adjusted_rad_with_value(0.0, nt_s, ie_s, trust_value)
}
