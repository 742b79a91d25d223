//! Row-by-row replay of a dataset as a timed event sequence.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::rca::{detect_deviations, DeviationReport, ToleranceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Completed,
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReplayEvent {
    Row {
        seq: u64,
        row_index: usize,
        /// Source timestamp when the dataset has one.
        timestamp: Option<f64>,
        values: BTreeMap<String, f64>,
        cycle_state: Option<String>,
        deviations: Option<DeviationReport>,
        /// Why `deviations` is missing when tolerances were supplied.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        deviation_error: Option<String>,
    },
    End {
        seq: u64,
        reason: EndReason,
    },
}

impl ReplayEvent {
    pub fn seq(&self) -> u64 {
        match self {
            ReplayEvent::Row { seq, .. } | ReplayEvent::End { seq, .. } => *seq,
        }
    }

    pub fn is_end(&self) -> bool {
        matches!(self, ReplayEvent::End { .. })
    }
}

/// Replays `dataset` at `rate` rows per second, row `k` due at `k / rate`.
#[derive(Debug, Clone)]
pub struct ReplayPlan {
    dataset: Dataset,
    tolerances: Option<ToleranceSpec>,
    rate: f64,
    looping: bool,
}

impl ReplayPlan {
    pub fn new(dataset: Dataset, tolerances: Option<ToleranceSpec>, rate: f64, looping: bool) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidArgument(format!("replay rate must be positive, got {rate}")));
        }
        Ok(Self { dataset, tolerances, rate, looping })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn looping(&self) -> bool {
        self.looping
    }

    pub fn rows(&self) -> usize {
        self.dataset.rows()
    }

    /// Offset from stream start at which event `seq` is due.
    pub fn due(&self, seq: u64) -> Duration {
        Duration::from_secs_f64(seq as f64 / self.rate)
    }

    /// Event `seq`, or `None` past the terminal event.
    pub fn event(&self, seq: u64) -> Option<ReplayEvent> {
        let n = self.dataset.rows() as u64;
        if (!self.looping || n == 0) && seq >= n {
            return (seq == n).then_some(ReplayEvent::End { seq, reason: EndReason::Completed });
        }
        let row_index = (seq % n) as usize;
        Some(self.row_event(seq, row_index))
    }

    fn row_event(&self, seq: u64, row_index: usize) -> ReplayEvent {
        let d = &self.dataset;
        let row = d.row(row_index);
        let values = d.variables().iter().cloned().zip(row.iter().copied()).collect();
        let cycle_state = d.cycle_state().map(|s| s[row_index].clone());
        let (deviations, deviation_error) = match &self.tolerances {
            None => (None, None),
            Some(t) => match detect_deviations(d.variables(), &row, t, cycle_state.as_deref()) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            },
        };
        ReplayEvent::Row {
            seq,
            row_index,
            timestamp: d.timestamps().map(|t| t[row_index]),
            values,
            cycle_state,
            deviations,
            deviation_error,
        }
    }

    /// All events of a non-looping replay, terminal event included.
    pub fn events(&self) -> Result<Vec<ReplayEvent>> {
        if self.looping {
            return Err(Error::InvalidArgument("a looping replay has no finite event list".into()));
        }
        Ok((0..=self.dataset.rows() as u64).filter_map(|s| self.event(s)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> Dataset {
        Dataset::new(vec!["x".into(), "y".into()], vec![vec![1.0, 2.0, 30.0], vec![0.0, 0.0, 0.0]]).unwrap()
    }

    #[test]
    fn three_rows_then_end() {
        let p = ReplayPlan::new(data(), None, 2.0, false).unwrap();
        let ev = p.events().unwrap();
        assert_eq!(ev.len(), 4);
        assert!(ev[3].is_end());
        assert!(ev.windows(2).all(|w| w[0].seq() < w[1].seq()));
        assert_eq!(p.due(3), Duration::from_millis(1500));
        assert!(p.event(5).is_none());
    }

    #[test]
    fn deviations_attached() {
        let tol = ToleranceSpec::new().with_band("x", "*", 0.0, 10.0).unwrap().with_band("y", "*", -1.0, 1.0).unwrap();
        let p = ReplayPlan::new(data(), Some(tol), 1.0, false).unwrap();
        match p.event(2).unwrap() {
            ReplayEvent::Row { deviations: Some(r), .. } => assert_eq!(r.dev("x"), 2.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn looping_wraps() {
        let p = ReplayPlan::new(data(), None, 1.0, true).unwrap();
        match p.event(4).unwrap() {
            ReplayEvent::Row { row_index, .. } => assert_eq!(row_index, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(ReplayPlan::new(data(), None, 0.0, false).is_err());
    }
}
