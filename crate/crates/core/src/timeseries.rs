//! Uniformly sampled voltage/current records, CSV I/O and chronological splits.
//!
//! Current follows the discharge-positive convention: a discharge pulse has
//! `i > 0` and pulls the terminal voltage down through the series resistance.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance on the sampling step.
pub const DT_REL_TOL: f64 = 1e-9;

/// Significant digits used when writing CSV values.
pub const CSV_SIG_DIGITS: usize = 9;

pub const CSV_HEADER: &str = "time_s,current_a,voltage_v";

#[derive(Debug, Error)]
pub enum TimeSeriesError {
    #[error("series needs at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("column lengths differ: t={t}, i={i}, v={v}")]
    LengthMismatch { t: usize, i: usize, v: usize },
    #[error("non-monotone time at row {row}")]
    NonMonotone { row: usize },
    #[error("non-uniform sampling at row {row}")]
    NonUniform { row: usize },
    #[error("voltage {value} at row {row} outside plausibility window [{lo}, {hi}]")]
    Implausible {
        row: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("non-finite value at row {row}")]
    NonFinite { row: usize },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: cannot parse `{cell}` as a number")]
    Parse { row: usize, cell: String },
    #[error("row {row}: {source}")]
    Csv {
        row: usize,
        #[source]
        source: csv::Error,
    },
    #[error("train fraction must lie in (0, 1], got {0}")]
    BadFraction(f64),
    #[error("split would leave {0} training samples (need at least 2)")]
    SplitTooSmall(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

type Result<T> = std::result::Result<T, TimeSeriesError>;

/// Column names looked up in the CSV header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub time: String,
    pub current: String,
    pub voltage: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            time: "time_s".into(),
            current: "current_a".into(),
            voltage: "voltage_v".into(),
        }
    }
}

/// Accepted voltage range in volts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageWindow {
    pub lo: f64,
    pub hi: f64,
}

impl VoltageWindow {
    /// Window that only rejects non-finite values; used for model forecasts.
    pub const UNBOUNDED: Self = Self {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
}

impl Default for VoltageWindow {
    fn default() -> Self {
        Self { lo: 0.0, hi: 10.0 }
    }
}

/// A uniformly sampled `(t, i, v)` record.
///
/// Every series built through [`TimeSeries::new`] or [`load_csv`] has at least
/// two samples. The evaluation half returned by [`split`] is the one exception:
/// it may hold zero or one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    t: Vec<f64>,
    i: Vec<f64>,
    v: Vec<f64>,
    dt: f64,
    window: VoltageWindow,
    pub meta: BTreeMap<String, String>,
}

impl TimeSeries {
    pub fn new(t: Vec<f64>, i: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        Self::with_window(t, i, v, VoltageWindow::default())
    }

    pub fn with_window(
        t: Vec<f64>,
        i: Vec<f64>,
        v: Vec<f64>,
        window: VoltageWindow,
    ) -> Result<Self> {
        if t.len() != i.len() || t.len() != v.len() {
            return Err(TimeSeriesError::LengthMismatch {
                t: t.len(),
                i: i.len(),
                v: v.len(),
            });
        }
        if t.len() < 2 {
            return Err(TimeSeriesError::TooShort(t.len()));
        }
        let dt = t[1] - t[0];
        validate(&t, &i, &v, dt, window)?;
        Ok(Self {
            t,
            i,
            v,
            dt,
            window,
            meta: BTreeMap::new(),
        })
    }

    /// Builds a record on the grid `t0 + k*dt`.
    pub fn from_uniform(t0: f64, dt: f64, i: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let t = (0..v.len()).map(|k| t0 + k as f64 * dt).collect();
        Self::new(t, i, v)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self) -> &[f64] {
        &self.t
    }

    pub fn current(&self) -> &[f64] {
        &self.i
    }

    pub fn voltage(&self) -> &[f64] {
        &self.v
    }

    pub fn window(&self) -> VoltageWindow {
        self.window
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    /// Samples `range` as a new series, keeping absolute time stamps.
    /// The result is not re-validated for length.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            t: self.t[range.clone()].to_vec(),
            i: self.i[range.clone()].to_vec(),
            v: self.v[range].to_vec(),
            dt: self.dt,
            window: self.window,
            meta: self.meta.clone(),
        }
    }

    /// Appends `other` after `self`.
    pub fn concat(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.t.extend_from_slice(&other.t);
        out.i.extend_from_slice(&other.i);
        out.v.extend_from_slice(&other.v);
        out
    }
}

fn validate(t: &[f64], i: &[f64], v: &[f64], dt: f64, window: VoltageWindow) -> Result<()> {
    for k in 0..t.len() {
        // rows are reported 1-based
        let row = k + 1;
        if !(t[k].is_finite() && i[k].is_finite() && v[k].is_finite()) {
            return Err(TimeSeriesError::NonFinite { row });
        }
        if v[k] < window.lo || v[k] > window.hi {
            return Err(TimeSeriesError::Implausible {
                row,
                value: v[k],
                lo: window.lo,
                hi: window.hi,
            });
        }
        if k > 0 {
            let step = t[k] - t[k - 1];
            if step <= 0.0 {
                return Err(TimeSeriesError::NonMonotone { row });
            }
            if (step - dt).abs() > DT_REL_TOL * dt {
                return Err(TimeSeriesError::NonUniform { row });
            }
        }
    }
    Ok(())
}

/// Fraction of the record used for training; the rest is held out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    train_fraction: f64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction <= 1.0) {
            return Err(TimeSeriesError::BadFraction(train_fraction));
        }
        Ok(Self { train_fraction })
    }

    pub fn train_fraction(&self) -> f64 {
        self.train_fraction
    }

    /// Number of training samples for a record of `len` samples.
    pub fn train_len(&self, len: usize) -> usize {
        (self.train_fraction * len as f64).floor() as usize
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.6,
        }
    }
}

/// Chronological split into `(train, eval)`.
pub fn split(series: &TimeSeries, spec: SplitSpec) -> Result<(TimeSeries, TimeSeries)> {
    let cut = spec.train_len(series.len());
    if cut < 2 {
        return Err(TimeSeriesError::SplitTooSmall(cut));
    }
    Ok((series.slice(0..cut), series.slice(cut..series.len())))
}

/// Formats `x` rounded to `digits` significant digits, using the shortest
/// decimal that reproduces the rounded value.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .expect("scientific notation parses");
    format!("{rounded}")
}

pub fn load_csv(path: impl AsRef<Path>, schema: &ColumnMap) -> Result<TimeSeries> {
    let text = fs::read_to_string(path)?;
    parse_csv(&text, schema)
}

pub fn parse_csv(text: &str, schema: &ColumnMap) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|source| TimeSeriesError::Csv { row: 0, source })?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| TimeSeriesError::MissingColumn(name.to_string()))
    };
    let (ct, ci, cv) = (
        column(&schema.time)?,
        column(&schema.current)?,
        column(&schema.voltage)?,
    );

    let (mut t, mut i, mut v) = (Vec::new(), Vec::new(), Vec::new());
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|source| TimeSeriesError::Csv { row, source })?;
        let cell = |c: usize| -> Result<f64> {
            let raw = record.get(c).unwrap_or("");
            raw.parse().map_err(|_| TimeSeriesError::Parse {
                row,
                cell: raw.to_string(),
            })
        };
        t.push(cell(ct)?);
        i.push(cell(ci)?);
        v.push(cell(cv)?);
    }
    TimeSeries::new(t, i, v)
}

/// Serializes to the canonical CSV text (LF line endings, 9 significant digits).
pub fn to_csv_string(series: &TimeSeries) -> Result<String> {
    if series.len() < 2 {
        return Err(TimeSeriesError::TooShort(series.len()));
    }
    let mut out = String::with_capacity(series.len() * 32);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for k in 0..series.len() {
        out.push_str(&format_sig(series.t[k], CSV_SIG_DIGITS));
        out.push(',');
        out.push_str(&format_sig(series.i[k], CSV_SIG_DIGITS));
        out.push(',');
        out.push_str(&format_sig(series.v[k], CSV_SIG_DIGITS));
        out.push('\n');
    }
    Ok(out)
}

pub fn save_csv(series: &TimeSeries, path: impl AsRef<Path>) -> Result<()> {
    let text = to_csv_string(series)?;
    let mut file = fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(len: usize) -> TimeSeries {
        let t: Vec<f64> = (0..len).map(|k| k as f64).collect();
        let i = vec![1.5; len];
        let v = (0..len).map(|k| 3.0 + 0.01 * k as f64).collect();
        TimeSeries::new(t, i, v).unwrap()
    }

    #[test]
    fn three_row_file_reads_back() {
        let s = parse_csv(
            "time_s,current_a,voltage_v\n0,0,4.0\n1,0,4.0\n2,0,4.0\n",
            &ColumnMap::default(),
        )
        .unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.dt(), 1.0);
        assert_eq!(s.voltage(), &[4.0, 4.0, 4.0]);
    }

    #[test]
    fn non_uniform_reports_row() {
        let err = parse_csv(
            "time_s,current_a,voltage_v\n0,0,4\n1,0,4\n2.5,0,4\n",
            &ColumnMap::default(),
        )
        .unwrap_err();
        assert_eq!(err.to_string(), "non-uniform sampling at row 3");
    }

    #[test]
    fn columns_found_by_name_in_any_order() {
        let s = parse_csv(
            "voltage_v,extra,time_s,current_a\n4.1,x,10,2\n4.0,y,11,2\n",
            &ColumnMap::default(),
        )
        .unwrap();
        assert_eq!(s.time(), &[10.0, 11.0]);
        assert_eq!(s.current(), &[2.0, 2.0]);
    }

    #[test]
    fn load_errors() {
        let cm = ColumnMap::default();
        assert!(matches!(
            parse_csv("time_s,voltage_v\n0,4\n1,4\n", &cm),
            Err(TimeSeriesError::MissingColumn(c)) if c == "current_a"
        ));
        assert!(matches!(
            parse_csv("time_s,current_a,voltage_v\n0,0,4\n1,0,abc\n", &cm),
            Err(TimeSeriesError::Parse { row: 2, .. })
        ));
        assert!(matches!(
            parse_csv("time_s,current_a,voltage_v\n0,0,4\n1,0,4\n0.5,0,4\n", &cm),
            Err(TimeSeriesError::NonMonotone { row: 3 })
        ));
        assert!(matches!(
            parse_csv("time_s,current_a,voltage_v\n0,0,4\n1,0,40\n", &cm),
            Err(TimeSeriesError::Implausible { row: 2, .. })
        ));
    }

    #[test]
    fn split_lengths() {
        let (a, b) = split(&ramp(10), SplitSpec::new(0.6).unwrap()).unwrap();
        assert_eq!((a.len(), b.len()), (6, 4));

        let (a, b) = split(&ramp(100), SplitSpec::default()).unwrap();
        assert_eq!(a.time().last(), Some(&59.0));
        assert_eq!(b.time().first(), Some(&60.0));
        assert_eq!(b.time().last(), Some(&99.0));

        let (a, b) = split(&ramp(7), SplitSpec::new(1.0).unwrap()).unwrap();
        assert_eq!(a.len(), 7);
        assert!(b.is_empty());
    }

    #[test]
    fn split_rejects_tiny_train() {
        assert!(matches!(
            split(&ramp(3), SplitSpec::new(0.5).unwrap()),
            Err(TimeSeriesError::SplitTooSmall(1))
        ));
        assert!(SplitSpec::new(0.0).is_err());
        assert!(SplitSpec::new(1.2).is_err());
    }

    #[test]
    fn save_shapes() {
        let s = ramp(2);
        let text = to_csv_string(&s).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(text, "time_s,current_a,voltage_v\n0,1.5,3\n1,1.5,3.01\n");

        let (_, single) = split(&ramp(3), SplitSpec::new(0.7).unwrap()).unwrap();
        assert_eq!(single.len(), 1);
        assert!(matches!(
            to_csv_string(&single),
            Err(TimeSeriesError::TooShort(1))
        ));
    }

    #[test]
    fn file_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let text = "time_s,current_a,voltage_v\n0,-5,4.12345679\n0.5,10,3.9\n1,0,4.07\n";
        fs::write(&path, text).unwrap();
        let s = load_csv(&path, &ColumnMap::default()).unwrap();
        let out = dir.path().join("b.csv");
        save_csv(&s, &out).unwrap();
        assert_eq!(fs::read_to_string(out).unwrap(), text);
    }

    #[test]
    fn sig_formatting() {
        assert_eq!(format_sig(4.0, 9), "4");
        assert_eq!(format_sig(0.1, 9), "0.1");
        assert_eq!(format_sig(1234.567891234, 9), "1234.56789");
        assert_eq!(format_sig(-2.5e-7, 9), "-0.00000025");
        assert_eq!(format_sig(0.0, 9), "0");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn split_reconcatenates(len in 2usize..200, frac in 0.01f64..=1.0) {
                let s = ramp(len);
                let spec = SplitSpec::new(frac).unwrap();
                if let Ok((a, b)) = split(&s, spec) {
                    prop_assert_eq!(a.concat(&b), s);
                }
            }

            #[test]
            fn csv_round_trip_to_nine_digits(
                vals in proptest::collection::vec((-50.0f64..50.0, 0.0f64..10.0), 2..40),
                dt in prop_oneof![Just(0.5), Just(1.0), Just(2.0), Just(0.25)],
            ) {
                let (i, v): (Vec<f64>, Vec<f64>) = vals.into_iter().unzip();
                let s = TimeSeries::from_uniform(0.0, dt, i, v).unwrap();
                let back = parse_csv(&to_csv_string(&s).unwrap(), &ColumnMap::default()).unwrap();
                prop_assert_eq!(back.time(), s.time());
                for (a, b) in back.voltage().iter().zip(s.voltage()).chain(back.current().iter().zip(s.current())) {
                    prop_assert!((a - b).abs() <= 5e-9 * b.abs().max(1e-300));
                }
            }

            #[test]
            fn jittered_time_rejected(len in 3usize..50, at in 1usize..49, jitter in 1e-6f64..0.4) {
                let at = at.min(len - 1);
                let mut t: Vec<f64> = (0..len).map(|k| k as f64).collect();
                t[at] += jitter;
                let r = TimeSeries::new(t, vec![0.0; len], vec![4.0; len]);
                prop_assert!(matches!(r, Err(TimeSeriesError::NonUniform { .. })), "{:?}", r);
            }
        }
    }
}
