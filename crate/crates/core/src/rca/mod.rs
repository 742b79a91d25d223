//! Root-cause analysis: tolerance deviations, causal ranking, the correlation
//! baseline and the evaluation metrics.

mod kappa;
mod metrics;
mod ranking;
mod rouge;
mod tolerance;

pub use kappa::weighted_kappa;
pub use metrics::{jaccard, map_at_k, mrr, precision_at_k, MetricScore};
pub use ranking::{
    correlation_baseline, most_deviant_variable, rank_root_causes, BaselineTarget, RcaCandidate,
    RcaMethod, RcaReport,
};
pub use rouge::{rouge1, tokenize, RougeScore};
pub use tolerance::{
    detect_deviations, fit_tolerances, Deviation, DeviationReport, Direction, ToleranceEntry,
    ToleranceSource, ToleranceSpec, WILDCARD_STATE,
};
