//! NASA-TLX questionnaire scoring (21-level scale plus two extra items).

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::{MetricsError, TrustLevel};

pub const TLX_MIN_LEVEL: u8 = 1;
pub const TLX_MAX_LEVEL: u8 = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlxResponse {
    pub mental: u8,
    pub physical: u8,
    pub temporal: u8,
    pub performance: u8,
    pub effort: u8,
    pub frustration: u8,
    pub confidence: u8,
    pub trust: u8,
}

impl TlxResponse {
    pub fn items(&self) -> [(&'static str, u8); 8] {
        [
            ("mental", self.mental),
            ("physical", self.physical),
            ("temporal", self.temporal),
            ("performance", self.performance),
            ("effort", self.effort),
            ("frustration", self.frustration),
            ("confidence", self.confidence),
            ("trust", self.trust),
        ]
    }

    /// Trust state implied by the appended trust item.
    pub fn trust_level(&self) -> Result<TrustLevel, MetricsError> {
        Ok(TrustLevel::from_percent(level_percent("trust", self.trust)?))
    }
}

/// Maps level 1..=21 linearly onto 0..=100 %.
pub fn level_percent(item: &str, level: u8) -> Result<f64, MetricsError> {
    if !(TLX_MIN_LEVEL..=TLX_MAX_LEVEL).contains(&level) {
        return Err(MetricsError::OutOfRange {
            item: item.to_string(),
            level,
        });
    }
    Ok(f64::from(level - 1) * 5.0)
}

pub fn tlx_score(resp: &TlxResponse) -> Result<BTreeMap<String, f64>, MetricsError> {
    resp.items()
        .into_iter()
        .map(|(name, level)| Ok((name.to_string(), level_percent(name, level)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(level: u8) -> TlxResponse {
        TlxResponse {
            mental: level,
            physical: level,
            temporal: level,
            performance: level,
            effort: level,
            frustration: level,
            confidence: level,
            trust: level,
        }
    }

    #[test]
    fn conversion_endpoints_and_midpoint() {
        for (level, pct) in [(1, 0.0), (11, 50.0), (21, 100.0)] {
            let scores = tlx_score(&uniform(level)).unwrap();
            assert_eq!(scores.len(), 8);
            assert!(scores.values().all(|v| *v == pct));
        }
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(matches!(tlx_score(&uniform(0)), Err(MetricsError::OutOfRange { level: 0, .. })));
        assert!(tlx_score(&uniform(22)).is_err());
    }

    #[test]
    fn trust_item_buckets() {
        assert_eq!(uniform(1).trust_level().unwrap(), TrustLevel::VeryLow);
        assert_eq!(uniform(11).trust_level().unwrap(), TrustLevel::Medium);
        assert_eq!(uniform(21).trust_level().unwrap(), TrustLevel::VeryHigh);
    }

    #[test]
    fn parses_json_array() {
        let json = r#"[{"mental":3,"physical":4,"temporal":5,"performance":6,"effort":7,"frustration":8,"confidence":9,"trust":10}]"#;
        let parsed: Vec<TlxResponse> = serde_json::from_str(json).unwrap();
        assert_eq!(parsed[0].trust, 10);
    }
}
