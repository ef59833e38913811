//! Interaction logs and the HRI metrics computed from them.

pub mod anova;
pub mod hri;
pub mod log;
pub mod rates;
pub mod report;
pub mod segment;
pub mod tlx;

pub use anova::{anova_one_way, anova_one_way_groups, f_survival, AnovaResult};
pub use hri::{
    compute_fo, compute_rad, indirect_interaction, trust_adjusted_rad, trust_adjusted_rad_with_value,
    TrustLevel,
};
pub use log::{
    read_jsonl, to_jsonl, write_jsonl, At, InteractionEvent, InteractionKind, LogRecord, RunHeader,
    TaskExpectation, TaskId,
};
pub use rates::{success_rates, Rate, SuccessRates};
pub use report::{MetricsReport, RobotMetrics};
pub use segment::{segment, EffortTotals, Segmentation, UnpairedEvent};
pub use tlx::{level_percent, tlx_score, TlxResponse};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("degenerate run: no interaction or neglect time")]
    DegenerateRun,
    #[error("robot attention demand is zero; fan-out undefined")]
    ZeroRad,
    #[error("questionnaire item {item} level {level} outside 1..=21")]
    OutOfRange { item: String, level: u8 },
    #[error("unknown trust level {0:?}")]
    UnknownTrustLevel(String),
    #[error("invalid ANOVA input: {0}")]
    InvalidGroups(String),
    #[error("log has no run_start header")]
    MissingHeader,
    #[error("malformed log: {0}")]
    Log(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for MetricsError {
    fn from(e: std::io::Error) -> Self {
        MetricsError::Io(e.to_string())
    }
}
