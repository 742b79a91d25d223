use std::collections::HashSet;
use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Column-major observation matrix with named variables and optional row labels.
///
/// Column order fixes node indices everywhere downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    variables: Vec<String>,
    columns: Vec<Vec<f64>>,
    cycle_state: Option<Vec<String>>,
    anomaly_label: Option<Vec<String>>,
    timestamps: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub delimiter: u8,
    pub cycle_state_column: String,
    pub anomaly_label_column: String,
    pub timestamp_column: String,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            cycle_state_column: "cycle_state".into(),
            anomaly_label_column: "anomaly_label".into(),
            timestamp_column: "timestamp".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    /// Rows dropped for containing unparseable or non-finite values.
    pub dropped: usize,
}

impl Dataset {
    pub fn new(variables: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::EmptyInput);
        }
        if variables.len() != columns.len() {
            return Err(Error::InvalidArgument(format!(
                "{} variable names for {} columns",
                variables.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for (i, name) in variables.iter().enumerate() {
            if name.trim().is_empty() {
                return Err(Error::InvalidVariableName(i));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateVariable(name.clone()));
            }
        }
        let rows = columns[0].len();
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::InvalidArgument("columns differ in length".into()));
        }
        if let Some((row, _)) = columns
            .iter()
            .flat_map(|c| c.iter().enumerate())
            .find(|(_, v)| !v.is_finite())
        {
            return Err(Error::InvalidArgument(format!("non-finite value in row {row}")));
        }
        Ok(Self { variables, columns, cycle_state: None, anomaly_label: None, timestamps: None })
    }

    /// Builds a dataset from row-major values.
    pub fn from_rows(variables: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = variables.len();
        let mut columns = vec![Vec::with_capacity(rows.len()); p];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::InvalidArgument(format!("row {i} has {} values", row.len())));
            }
            for (c, v) in columns.iter_mut().zip(row) {
                c.push(*v);
            }
        }
        Self::new(variables, columns)
    }

    pub fn with_cycle_state(mut self, states: Vec<String>) -> Result<Self> {
        self.check_len(states.len())?;
        self.cycle_state = Some(states);
        Ok(self)
    }

    pub fn with_anomaly_labels(mut self, labels: Vec<String>) -> Result<Self> {
        self.check_len(labels.len())?;
        self.anomaly_label = Some(labels);
        Ok(self)
    }

    pub fn with_timestamps(mut self, timestamps: Vec<f64>) -> Result<Self> {
        self.check_len(timestamps.len())?;
        if let Some(row) = timestamps.windows(2).position(|w| !(w[1] >= w[0])) {
            return Err(Error::UnsortedTimestamps { row: row + 1 });
        }
        self.timestamps = Some(timestamps);
        Ok(self)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.rows() {
            return Err(Error::InvalidArgument(format!(
                "label column has {len} entries for {} rows",
                self.rows()
            )));
        }
        Ok(())
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.index_of(name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn column_at(&self, index: usize) -> &[f64] {
        &self.columns[index]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn row(&self, index: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[index]).collect()
    }

    pub fn cycle_state(&self) -> Option<&[String]> {
        self.cycle_state.as_deref()
    }

    pub fn anomaly_labels(&self) -> Option<&[String]> {
        self.anomaly_label.as_deref()
    }

    pub fn timestamps(&self) -> Option<&[f64]> {
        self.timestamps.as_deref()
    }

    /// Binary anomaly indicator: 1 for any label other than empty or "normal".
    pub fn anomaly_indicator(&self) -> Option<Vec<f64>> {
        self.anomaly_label.as_ref().map(|labels| {
            labels.iter().map(|l| if is_normal_label(l) { 0.0 } else { 1.0 }).collect()
        })
    }

    /// Restricts the dataset to the named variables, in the given order.
    pub fn select(&self, names: &[String]) -> Result<Dataset> {
        let mut columns = Vec::with_capacity(names.len());
        for n in names {
            columns.push(self.column(n)?.to_vec());
        }
        let mut out = Dataset::new(names.to_vec(), columns)?;
        out.cycle_state = self.cycle_state.clone();
        out.anomaly_label = self.anomaly_label.clone();
        out.timestamps = self.timestamps.clone();
        Ok(out)
    }

    /// Rows at the given indices, repeats allowed (used for resampling).
    pub fn take_rows(&self, indices: &[usize]) -> Dataset {
        let pick = |v: &Vec<f64>| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let pick_s = |v: &Vec<String>| indices.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
        Dataset {
            variables: self.variables.clone(),
            columns: self.columns.iter().map(pick).collect(),
            cycle_state: self.cycle_state.as_ref().map(pick_s),
            anomaly_label: self.anomaly_label.as_ref().map(pick_s),
            // a resample is no longer a time series
            timestamps: None,
        }
    }

    /// Rows belonging to one cycle state.
    pub fn filter_cycle_state(&self, state: &str) -> Result<Dataset> {
        let states = self
            .cycle_state
            .as_ref()
            .ok_or_else(|| Error::MissingState("dataset has no cycle_state column".into()))?;
        let idx: Vec<usize> = (0..self.rows()).filter(|&i| states[i] == state).collect();
        if idx.is_empty() {
            return Err(Error::NoUsableRows { dropped: self.rows() });
        }
        let mut out = self.take_rows(&idx);
        out.timestamps = self.timestamps.as_ref().map(|t| idx.iter().map(|&i| t[i]).collect());
        Ok(out)
    }

    /// Contiguous row range `[start, end)`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Dataset {
        let idx: Vec<usize> = (start..end.min(self.rows())).collect();
        let mut out = self.take_rows(&idx);
        out.timestamps = self.timestamps.as_ref().map(|t| idx.iter().map(|&i| t[i]).collect());
        out
    }

    /// Writes the dataset as CSV using the shortest exact decimal form of every value.
    pub fn write_csv<W: Write>(&self, writer: W, opts: &LoadOptions) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(opts.delimiter).from_writer(writer);
        let mut header: Vec<&str> = self.variables.iter().map(String::as_str).collect();
        if self.timestamps.is_some() {
            header.push(&opts.timestamp_column);
        }
        if self.cycle_state.is_some() {
            header.push(&opts.cycle_state_column);
        }
        if self.anomaly_label.is_some() {
            header.push(&opts.anomaly_label_column);
        }
        w.write_record(&header)?;
        for r in 0..self.rows() {
            let mut rec: Vec<String> = self.columns.iter().map(|c| c[r].to_string()).collect();
            if let Some(t) = &self.timestamps {
                rec.push(t[r].to_string());
            }
            if let Some(s) = &self.cycle_state {
                rec.push(s[r].clone());
            }
            if let Some(a) = &self.anomaly_label {
                rec.push(a[r].clone());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, &LoadOptions::default()).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

pub(crate) fn is_normal_label(label: &str) -> bool {
    let l = label.trim();
    l.is_empty() || l.eq_ignore_ascii_case("normal")
}

/// Parses CSV text into a [`Dataset`], dropping rows with unparseable or non-finite numbers.
pub fn load_dataset<R: Read>(source: R, opts: &LoadOptions) -> Result<LoadedDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::EmptyInput);
    }

    let mut seen = HashSet::new();
    for (i, h) in header.iter().enumerate() {
        if h.is_empty() {
            return Err(Error::InvalidVariableName(i));
        }
        if !seen.insert(h) {
            return Err(Error::DuplicateVariable(h.to_string()));
        }
    }

    let pos = |name: &str| header.iter().position(|h| h == name);
    let state_col = pos(&opts.cycle_state_column);
    let label_col = pos(&opts.anomaly_label_column);
    let time_col = pos(&opts.timestamp_column);
    let value_cols: Vec<usize> = (0..header.len())
        .filter(|&i| Some(i) != state_col && Some(i) != label_col && Some(i) != time_col)
        .collect();
    if value_cols.is_empty() {
        return Err(Error::EmptyInput);
    }
    let variables: Vec<String> = value_cols.iter().map(|&i| header[i].to_string()).collect();

    let mut columns = vec![Vec::new(); value_cols.len()];
    let mut states = Vec::new();
    let mut labels = Vec::new();
    let mut times = Vec::new();
    let mut dropped = 0;

    'rows: for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                dropped += 1;
                continue;
            }
        };
        if record.len() != header.len() {
            dropped += 1;
            continue;
        }
        let mut values = Vec::with_capacity(value_cols.len());
        for &c in &value_cols {
            match record[c].parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    dropped += 1;
                    continue 'rows;
                }
            }
        }
        let time = match time_col {
            Some(c) => match record[c].parse::<f64>() {
                Ok(t) if t.is_finite() => Some(t),
                _ => {
                    dropped += 1;
                    continue 'rows;
                }
            },
            None => None,
        };
        for (col, v) in columns.iter_mut().zip(values) {
            col.push(v);
        }
        if let Some(t) = time {
            times.push(t);
        }
        if let Some(c) = state_col {
            states.push(record[c].to_string());
        }
        if let Some(c) = label_col {
            labels.push(record[c].to_string());
        }
    }

    if columns[0].is_empty() {
        return Err(Error::NoUsableRows { dropped });
    }

    let mut dataset = Dataset::new(variables, columns)?;
    if time_col.is_some() {
        dataset = dataset.with_timestamps(times)?;
    }
    if state_col.is_some() {
        dataset = dataset.with_cycle_state(states)?;
    }
    if label_col.is_some() {
        dataset = dataset.with_anomaly_labels(labels)?;
    }
    Ok(LoadedDataset { dataset, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<LoadedDataset> {
        load_dataset(text.as_bytes(), &LoadOptions::default())
    }

    #[test]
    fn clean_csv() {
        let l = load("a,b,c\n1,2,3\n4,5,6\n7,8,9\n10,11,12\n").unwrap();
        assert_eq!(l.dataset.n_vars(), 3);
        assert_eq!(l.dataset.rows(), 4);
        assert_eq!(l.dropped, 0);
        assert_eq!(l.dataset.column("b").unwrap(), &[2.0, 5.0, 8.0, 11.0]);
    }

    #[test]
    fn nan_row_is_dropped() {
        let l = load("a,b,c\n1,2,3\n4,NaN,6\n7,8,9\n10,11,12\n").unwrap();
        assert_eq!(l.dataset.rows(), 3);
        assert_eq!(l.dropped, 1);
    }

    #[test]
    fn unparseable_and_short_rows_are_dropped() {
        let l = load("a,b\n1,2\nx,3\n4\n5,inf\n6,7\n").unwrap();
        assert_eq!(l.dataset.rows(), 2);
        assert_eq!(l.dropped, 3);
    }

    #[test]
    fn duplicate_header() {
        assert!(matches!(load("a,a,b\n1,2,3\n"), Err(Error::DuplicateVariable(n)) if n == "a"));
    }

    #[test]
    fn empty_file() {
        assert!(matches!(load(""), Err(Error::EmptyInput)));
    }

    #[test]
    fn zero_usable_rows() {
        assert!(matches!(load("a,b\nx,y\n"), Err(Error::NoUsableRows { dropped: 1 })));
        assert!(matches!(load("a,b\n"), Err(Error::NoUsableRows { dropped: 0 })));
    }

    #[test]
    fn reserved_columns() {
        let text = "timestamp,x,cycle_state,anomaly_label\n0,1.5,S1,normal\n0.5,2.5,S2,NoNose\n1.0,3.5,S2,\"NoBody2,NoBody1\"\n";
        let l = load(text).unwrap();
        let d = &l.dataset;
        assert_eq!(d.variables(), &["x".to_string()]);
        assert_eq!(d.timestamps().unwrap(), &[0.0, 0.5, 1.0]);
        assert_eq!(d.cycle_state().unwrap()[1], "S2");
        assert_eq!(d.anomaly_labels().unwrap()[2], "NoBody2,NoBody1");
        assert_eq!(d.anomaly_indicator().unwrap(), vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn decreasing_timestamps_rejected() {
        assert!(matches!(
            load("timestamp,x\n1,1\n0,2\n"),
            Err(Error::UnsortedTimestamps { row: 1 })
        ));
    }

    #[test]
    fn semicolon_delimiter() {
        let opts = LoadOptions { delimiter: b';', ..Default::default() };
        let l = load_dataset("a;b\n1;2\n".as_bytes(), &opts).unwrap();
        assert_eq!(l.dataset.row(0), vec![1.0, 2.0]);
    }

    #[test]
    fn cycle_state_filter() {
        let l = load("x,cycle_state\n1,A\n2,B\n3,A\n").unwrap();
        let a = l.dataset.filter_cycle_state("A").unwrap();
        assert_eq!(a.column("x").unwrap(), &[1.0, 3.0]);
    }
}
