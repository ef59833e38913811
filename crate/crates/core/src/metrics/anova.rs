//! One-way ANOVA with F-distribution tail probabilities.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::MetricsError;

/// Upper tail `P(F > f)` for an F distribution with `(d1, d2)` degrees of freedom.
pub fn f_survival(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    match FisherSnedecor::new(d1, d2) {
        Ok(dist) => dist.sf(f),
        Err(_) => f64::NAN,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f_stat: f64,
    pub p_value: f64,
    pub df_between: u32,
    pub df_within: u32,
    /// Zero within-group variance and equal means; reported as F = 0, p = 1.
    pub degenerate: bool,
}

pub fn anova_one_way_groups(groups: &[&[f64]]) -> Result<AnovaResult, MetricsError> {
    if groups.len() < 2 {
        return Err(MetricsError::InvalidGroups("need at least two groups".into()));
    }
    for (i, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(MetricsError::InvalidGroups(format!(
                "group {i} has {} observations, need at least 2",
                g.len()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(MetricsError::InvalidGroups(format!("group {i} has non-finite values")));
        }
    }
    let n: usize = groups.iter().map(|g| g.len()).sum();
    let grand = groups.iter().flat_map(|g| g.iter()).sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (mean - grand).powi(2);
        ss_within += g.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    }
    let df_between = (groups.len() - 1) as u32;
    let df_within = (n - groups.len()) as u32;
    // relative tolerance for "equal means" on exactly constant groups
    let scale = groups
        .iter()
        .flat_map(|g| g.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let negligible = |ss: f64| ss <= (scale * 1e-12).powi(2) * n as f64;
    if negligible(ss_within) {
        let degenerate = negligible(ss_between);
        return Ok(AnovaResult {
            f_stat: if degenerate { 0.0 } else { f64::INFINITY },
            p_value: if degenerate { 1.0 } else { 0.0 },
            df_between,
            df_within,
            degenerate,
        });
    }
    let f_stat = (ss_between / f64::from(df_between)) / (ss_within / f64::from(df_within));
    Ok(AnovaResult {
        f_stat,
        p_value: f_survival(f_stat, f64::from(df_between), f64::from(df_within)),
        df_between,
        df_within,
        degenerate: false,
    })
}

/// Two-group one-way ANOVA.
pub fn anova_one_way(group_a: &[f64], group_b: &[f64]) -> Result<AnovaResult, MetricsError> {
    anova_one_way_groups(&[group_a, group_b])
}
