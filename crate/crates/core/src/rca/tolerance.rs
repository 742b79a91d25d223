use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::stats;

/// Key matching any cycle state.
pub const WILDCARD_STATE: &str = "*";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceSource {
    #[default]
    Expert,
    Fitted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceEntry {
    pub min: f64,
    pub max: f64,
    #[serde(default)]
    pub source: ToleranceSource,
}

/// Tolerance bands keyed by variable, then by cycle state (or `*`).
///
/// JSON form: `{"variable": {"state": {"min": .., "max": ..}}}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, BTreeMap<String, ToleranceEntry>>")]
#[serde(into = "BTreeMap<String, BTreeMap<String, ToleranceEntry>>")]
pub struct ToleranceSpec {
    entries: BTreeMap<String, BTreeMap<String, ToleranceEntry>>,
}

impl TryFrom<BTreeMap<String, BTreeMap<String, ToleranceEntry>>> for ToleranceSpec {
    type Error = Error;

    fn try_from(entries: BTreeMap<String, BTreeMap<String, ToleranceEntry>>) -> Result<Self> {
        let mut spec = ToleranceSpec::default();
        for (var, states) in entries {
            for (state, e) in states {
                spec.insert(&var, &state, e)?;
            }
        }
        Ok(spec)
    }
}

impl From<ToleranceSpec> for BTreeMap<String, BTreeMap<String, ToleranceEntry>> {
    fn from(s: ToleranceSpec) -> Self {
        s.entries
    }
}

impl ToleranceSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, variable: &str, state: &str, entry: ToleranceEntry) -> Result<()> {
        if !(entry.min < entry.max) {
            return Err(Error::InvalidArgument(format!(
                "tolerance for `{variable}` in `{state}` needs min < max, got [{}, {}]",
                entry.min, entry.max
            )));
        }
        let states = self.entries.entry(variable.to_string()).or_default();
        if states.contains_key(state) {
            return Err(Error::InvalidArgument(format!("duplicate tolerance for `{variable}` in `{state}`")));
        }
        states.insert(state.to_string(), entry);
        Ok(())
    }

    /// Builder-style expert band.
    pub fn with_band(mut self, variable: &str, state: &str, min: f64, max: f64) -> Result<Self> {
        self.insert(variable, state, ToleranceEntry { min, max, source: ToleranceSource::Expert })?;
        Ok(self)
    }

    /// The state-specific band if present, else the wildcard band.
    pub fn band(&self, variable: &str, state: &str) -> Option<&ToleranceEntry> {
        let states = self.entries.get(variable)?;
        states.get(state).or_else(|| states.get(WILDCARD_STATE))
    }

    pub fn variables(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tolerances serialize")
    }
}

/// Fits `mean +/- k_sigma * std` bands; per cycle state as well when `per_state` is set.
pub fn fit_tolerances(d: &Dataset, k_sigma: f64, per_state: bool) -> Result<ToleranceSpec> {
    let mut spec = ToleranceSpec::new();
    let fitted = |col: &[f64]| {
        let m = stats::mean(col);
        let s = stats::population_std(col);
        ToleranceEntry { min: m - k_sigma * s, max: m + k_sigma * s, source: ToleranceSource::Fitted }
    };
    for (name, col) in d.variables().iter().zip(d.columns()) {
        let e = fitted(col);
        if !(e.min < e.max) {
            return Err(Error::ConstantColumn(name.clone()));
        }
        spec.insert(name, WILDCARD_STATE, e)?;
    }
    if per_state {
        let states = d.cycle_state().ok_or_else(|| Error::MissingState("dataset has no cycle_state column".into()))?;
        let mut distinct: Vec<&String> = states.iter().collect();
        distinct.sort();
        distinct.dedup();
        for state in distinct {
            let sub = d.filter_cycle_state(state)?;
            for (name, col) in sub.variables().iter().zip(sub.columns()) {
                let e = fitted(col);
                // a state where the sensor never moves falls back to the wildcard band
                if e.min < e.max {
                    spec.insert(name, state, e)?;
                }
            }
        }
    }
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Above,
    Below,
    Inside,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub variable: String,
    pub value: f64,
    pub min: f64,
    pub max: f64,
    /// Zero inside the band; otherwise distance to the nearest bound over band width.
    pub dev: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub cycle_state: String,
    pub deviations: Vec<Deviation>,
}

impl DeviationReport {
    pub fn get(&self, variable: &str) -> Option<&Deviation> {
        self.deviations.iter().find(|d| d.variable == variable)
    }

    pub fn dev(&self, variable: &str) -> f64 {
        self.get(variable).map_or(0.0, |d| d.dev)
    }

    /// Copy with every deviation multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for d in &mut out.deviations {
            d.dev *= factor;
        }
        out
    }
}

/// Scores one observation against the bands for `cycle_state` (wildcard when `None`).
pub fn detect_deviations(
    variables: &[String],
    values: &[f64],
    tol: &ToleranceSpec,
    cycle_state: Option<&str>,
) -> Result<DeviationReport> {
    if variables.len() != values.len() {
        return Err(Error::InvalidArgument(format!("{} names for {} values", variables.len(), values.len())));
    }
    let state = cycle_state.unwrap_or(WILDCARD_STATE);
    let mut deviations = Vec::with_capacity(variables.len());
    for (name, &value) in variables.iter().zip(values) {
        let band = tol
            .band(name, state)
            .ok_or_else(|| Error::MissingTolerance { variable: name.clone(), state: state.to_string() })?;
        let width = band.max - band.min;
        let (dev, direction) = if value > band.max {
            ((value - band.max) / width, Direction::Above)
        } else if value < band.min {
            ((band.min - value) / width, Direction::Below)
        } else {
            (0.0, Direction::Inside)
        };
        deviations.push(Deviation { variable: name.clone(), value, min: band.min, max: band.max, dev, direction });
    }
    Ok(DeviationReport { cycle_state: state.to_string(), deviations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(name: &str) -> Vec<String> {
        vec![name.to_string()]
    }

    #[test]
    fn inside_and_above() {
        let tol = ToleranceSpec::new().with_band("x", "*", 0.0, 10.0).unwrap();
        let r = detect_deviations(&v("x"), &[5.0], &tol, None).unwrap();
        assert_eq!(r.deviations[0].dev, 0.0);
        assert_eq!(r.deviations[0].direction, Direction::Inside);
        let r = detect_deviations(&v("x"), &[12.0], &tol, None).unwrap();
        assert_eq!(r.deviations[0].dev, 0.2);
        assert_eq!(r.deviations[0].direction, Direction::Above);
        let r = detect_deviations(&v("x"), &[-1.0], &tol, None).unwrap();
        assert_eq!(r.deviations[0].dev, 0.1);
        assert_eq!(r.deviations[0].direction, Direction::Below);
    }

    #[test]
    fn cycle_band_overrides_wildcard() {
        let tol = ToleranceSpec::new()
            .with_band("x", "*", 0.0, 10.0)
            .unwrap()
            .with_band("x", "Pick", 0.0, 4.0)
            .unwrap();
        let r = detect_deviations(&v("x"), &[5.0], &tol, Some("Pick")).unwrap();
        assert_eq!(r.deviations[0].dev, 0.25);
        assert_eq!(r.deviations[0].direction, Direction::Above);
        let r = detect_deviations(&v("x"), &[5.0], &tol, Some("Place")).unwrap();
        assert_eq!(r.deviations[0].dev, 0.0);
    }

    #[test]
    fn missing_entry() {
        let tol = ToleranceSpec::new().with_band("x", "Pick", 0.0, 4.0).unwrap();
        assert!(matches!(
            detect_deviations(&v("x"), &[1.0], &tol, Some("Place")),
            Err(Error::MissingTolerance { .. })
        ));
    }

    #[test]
    fn json_shape_and_validation() {
        let tol = ToleranceSpec::from_json(r#"{"x": {"*": {"min": 0, "max": 10}, "S1": {"min": 1, "max": 2, "source": "fitted"}}}"#).unwrap();
        assert_eq!(tol.band("x", "S1").unwrap().source, ToleranceSource::Fitted);
        assert_eq!(tol.band("x", "S9").unwrap().max, 10.0);
        assert_eq!(ToleranceSpec::from_json(&tol.to_json()).unwrap(), tol);
        assert!(ToleranceSpec::from_json(r#"{"x": {"*": {"min": 3, "max": 3}}}"#).is_err());
    }

    #[test]
    fn fitted_bands() {
        let d = Dataset::new(vec!["x".into()], vec![vec![1.0, 3.0, 1.0, 3.0]])
            .unwrap()
            .with_cycle_state(vec!["A".into(), "A".into(), "B".into(), "B".into()])
            .unwrap();
        let tol = fit_tolerances(&d, 3.0, true).unwrap();
        let w = tol.band("x", "*").unwrap();
        assert_eq!((w.min, w.max), (-1.0, 5.0));
        assert_eq!(tol.band("x", "A").unwrap().source, ToleranceSource::Fitted);
    }
}
