//! Panel ingestion and preparation.
//!
//! A `TimeSeriesPanel` is the date-indexed T x n observation matrix every
//! downstream estimator consumes. Loading validates hard: strictly increasing
//! dates, fully populated numeric cells, and nonconstant columns. Missing data
//! are rejected rather than imputed, and calendar filtering is left to the
//! data supplier.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Date-indexed multivariate observation matrix.
///
/// Rows are dates in strictly increasing order, columns are named series.
/// All cells are finite and every column has positive sample variance.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    dates: Vec<NaiveDate>,
    names: Vec<String>,
    values: DMatrix<f64>,
}

impl TimeSeriesPanel {
    /// Builds a panel, enforcing all type invariants.
    pub fn new(dates: Vec<NaiveDate>, names: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != dates.len() {
            return Err(Error::InvalidPanel(format!(
                "{} dates but {} value rows",
                dates.len(),
                values.nrows()
            )));
        }
        if values.ncols() != names.len() {
            return Err(Error::InvalidPanel(format!(
                "{} names but {} value columns",
                names.len(),
                values.ncols()
            )));
        }
        if dates.len() < 2 {
            return Err(Error::InvalidPanel(
                "panel needs at least 2 rows".to_string(),
            ));
        }
        for i in 1..dates.len() {
            if dates[i] <= dates[i - 1] {
                let what = if dates[i] == dates[i - 1] {
                    "duplicate"
                } else {
                    "out-of-order"
                };
                return Err(Error::InvalidPanel(format!(
                    "{what} date {} at row {}",
                    dates[i],
                    i + 1
                )));
            }
        }
        for (j, name) in names.iter().enumerate() {
            for i in 0..values.nrows() {
                if !values[(i, j)].is_finite() {
                    return Err(Error::InvalidPanel(format!(
                        "non-finite value in column '{name}' at row {}",
                        i + 1
                    )));
                }
            }
            if column_variance(&values, j) <= 0.0 {
                return Err(Error::InvalidPanel(format!(
                    "column '{name}' is constant (zero sample variance)"
                )));
            }
        }
        Ok(Self {
            dates,
            names,
            values,
        })
    }

    /// Wraps a bare value matrix with synthetic consecutive dates, for
    /// simulated data that has no calendar of its own.
    pub fn from_values(names: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        let start = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
        let dates = (0..values.nrows())
            .map(|i| start + chrono::Days::new(i as u64))
            .collect();
        Self::new(dates, names, values)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Number of rows T.
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Number of series n.
    pub fn width(&self) -> usize {
        self.names.len()
    }

    /// Contiguous sub-panel of `length` rows starting at `start_index`.
    ///
    /// Column metadata is preserved. Date monotonicity and finiteness are
    /// inherited from the parent, so only bounds are checked; a window may
    /// legitimately contain a locally constant column, which estimation
    /// reports as a singular design.
    pub fn window(&self, start_index: usize, length: usize) -> Result<TimeSeriesPanel> {
        let end = start_index
            .checked_add(length)
            .filter(|&e| e <= self.len());
        let Some(end) = end else {
            return Err(Error::WindowOutOfRange {
                start: start_index,
                length,
                len: self.len(),
            });
        };
        Ok(TimeSeriesPanel {
            dates: self.dates[start_index..end].to_vec(),
            names: self.names.clone(),
            values: self.values.rows(start_index, length).into_owned(),
        })
    }
}

fn column_variance(values: &DMatrix<f64>, j: usize) -> f64 {
    let t = values.nrows();
    if t < 2 {
        return 0.0;
    }
    let col = values.column(j);
    let mean = col.sum() / t as f64;
    col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1) as f64
}

/// Loads a panel from CSV: header row, one date column (ISO-8601), remaining
/// columns numeric series. `series_filter` selects and orders columns; when
/// absent, file order is kept.
pub fn load_panel(
    path: &Path,
    date_column: &str,
    series_filter: Option<&[String]>,
) -> Result<TimeSeriesPanel> {
    let display = path.display().to_string();
    let csv_err = |source| Error::Csv {
        path: display.clone(),
        source,
    };

    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: display.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    {
        let mut seen = std::collections::HashSet::new();
        for h in &headers {
            if !seen.insert(h.as_str()) {
                return Err(Error::InvalidPanel(format!(
                    "duplicate column name '{h}' in header"
                )));
            }
        }
    }
    let date_pos = headers
        .iter()
        .position(|h| h == date_column)
        .ok_or_else(|| {
            Error::InvalidPanel(format!("date column '{date_column}' not found in header"))
        })?;

    let series_pos: Vec<(usize, String)> = match series_filter {
        Some(filter) => filter
            .iter()
            .map(|name| {
                let pos = headers.iter().position(|h| h == name).ok_or_else(|| {
                    Error::InvalidPanel(format!("series '{name}' not found in header"))
                })?;
                if pos == date_pos {
                    return Err(Error::InvalidPanel(format!(
                        "series filter selects the date column '{name}'"
                    )));
                }
                Ok((pos, name.clone()))
            })
            .collect::<Result<_>>()?,
        None => headers
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != date_pos)
            .map(|(j, h)| (j, h.clone()))
            .collect(),
    };
    if series_pos.is_empty() {
        return Err(Error::InvalidPanel(
            "no series columns besides the date column".to_string(),
        ));
    }

    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut cells: Vec<f64> = Vec::new();
    for (rec_idx, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        // Header occupies line 1, so data record i sits on file line i + 2.
        let line = rec_idx + 2;
        let raw_date = record.get(date_pos).unwrap_or("");
        let date: NaiveDate = raw_date.parse().map_err(|e| Error::BadCell {
            row: line,
            column: date_column.to_string(),
            detail: format!("'{raw_date}' is not an ISO-8601 date ({e})"),
        })?;
        if let Some(prev) = dates.last() {
            if date <= *prev {
                let what = if date == *prev {
                    "duplicate date"
                } else {
                    "date not in ascending order"
                };
                return Err(Error::BadCell {
                    row: line,
                    column: date_column.to_string(),
                    detail: format!("{what}: {date}"),
                });
            }
        }
        dates.push(date);
        for (pos, name) in &series_pos {
            let raw = record.get(*pos).unwrap_or("");
            if raw.is_empty() {
                return Err(Error::BadCell {
                    row: line,
                    column: name.clone(),
                    detail: "empty cell".to_string(),
                });
            }
            let v: f64 = raw.parse().map_err(|e| Error::BadCell {
                row: line,
                column: name.clone(),
                detail: format!("'{raw}' is not a number ({e})"),
            })?;
            if !v.is_finite() {
                return Err(Error::BadCell {
                    row: line,
                    column: name.clone(),
                    detail: format!("non-finite value {v}"),
                });
            }
            cells.push(v);
        }
    }

    let t = dates.len();
    let n = series_pos.len();
    let values = DMatrix::from_row_iterator(t, n, cells);
    let names = series_pos.into_iter().map(|(_, name)| name).collect();
    TimeSeriesPanel::new(dates, names, values)
}

/// Writes a panel as CSV in the loader's format (`date` as the date column).
/// Values print in shortest round-trip form, so `load_panel` recovers the
/// panel bit-exactly.
pub fn save_panel(panel: &TimeSeriesPanel, path: &Path) -> Result<()> {
    let display = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: display.clone(),
        source,
    })?;
    let mut w = std::io::BufWriter::new(file);
    let write_err = |source| Error::Io {
        path: display.clone(),
        source,
    };
    write!(w, "date").map_err(write_err)?;
    for name in panel.names() {
        write!(w, ",{name}").map_err(write_err)?;
    }
    writeln!(w).map_err(write_err)?;
    for (i, date) in panel.dates().iter().enumerate() {
        write!(w, "{date}").map_err(write_err)?;
        for j in 0..panel.width() {
            write!(w, ",{}", panel.values()[(i, j)]).map_err(write_err)?;
        }
        writeln!(w).map_err(write_err)?;
    }
    w.flush().map_err(write_err)
}

/// Intraday log returns grouped by (date, series), plus a sampling tag.
#[derive(Debug, Clone)]
pub struct IntradayReturnSet {
    interval: String,
    names: Vec<String>,
    days: BTreeMap<NaiveDate, Vec<Vec<f64>>>,
}

impl IntradayReturnSet {
    /// `interval` is a free-form sampling tag, e.g. "5min".
    pub fn new(interval: impl Into<String>) -> Self {
        Self {
            interval: interval.into(),
            names: Vec::new(),
            days: BTreeMap::new(),
        }
    }

    /// Appends one intraday return. Series are indexed by first appearance.
    pub fn push(&mut self, date: NaiveDate, series: &str, value: f64) {
        let j = match self.names.iter().position(|n| n == series) {
            Some(j) => j,
            None => {
                self.names.push(series.to_string());
                self.names.len() - 1
            }
        };
        let day = self.days.entry(date).or_default();
        if day.len() <= j {
            day.resize(j + 1, Vec::new());
        }
        day[j].push(value);
    }

    pub fn interval(&self) -> &str {
        &self.interval
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn num_days(&self) -> usize {
        self.days.len()
    }
}

/// Aggregates intraday returns into a daily log realized volatility panel.
///
/// Cell value is `power * ln(sum of squared returns)`, i.e. the log of the
/// realized variance raised to `power`. Power 1 gives log variance, 0.5 gives
/// log standard deviation; the measures downstream are invariant to the
/// choice, which only rescales the series.
pub fn realized_log_volatility(returns: &IntradayReturnSet, power: f64) -> Result<TimeSeriesPanel> {
    if !(power.is_finite() && power > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "rv power must be positive and finite, got {power}"
        )));
    }
    let n = returns.names.len();
    if n == 0 || returns.days.is_empty() {
        return Err(Error::InvalidPanel(
            "intraday return set is empty".to_string(),
        ));
    }
    let t = returns.days.len();
    let mut values = DMatrix::zeros(t, n);
    let mut dates = Vec::with_capacity(t);
    for (i, (date, day)) in returns.days.iter().enumerate() {
        dates.push(*date);
        for (j, name) in returns.names.iter().enumerate() {
            let group = day.get(j).map(Vec::as_slice).unwrap_or(&[]);
            if group.is_empty() {
                return Err(Error::InvalidPanel(format!(
                    "no intraday returns on {date} for series '{name}'"
                )));
            }
            let rv: f64 = group.iter().map(|r| r * r).sum();
            if rv <= 0.0 {
                return Err(Error::InvalidPanel(format!(
                    "realized variance is zero on {date} for series '{name}' (log undefined)"
                )));
            }
            values[(i, j)] = power * rv.ln();
        }
    }
    TimeSeriesPanel::new(dates, returns.names.clone(), values)
}

/// Loads an intraday return file: CSV with columns (date, time, series,
/// return). The time column orders rows within a day and is otherwise unused.
pub fn load_intraday(path: &Path, interval: &str) -> Result<IntradayReturnSet> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: display.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut set = IntradayReturnSet::new(interval);
    for (rec_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|source| Error::Csv {
            path: display.clone(),
            source,
        })?;
        let line = rec_idx + 2;
        if record.len() < 4 {
            return Err(Error::BadCell {
                row: line,
                column: "return".to_string(),
                detail: format!("expected 4 columns (date,time,series,return), got {}", record.len()),
            });
        }
        let date: NaiveDate = record[0].parse().map_err(|e| Error::BadCell {
            row: line,
            column: "date".to_string(),
            detail: format!("'{}' is not an ISO-8601 date ({e})", &record[0]),
        })?;
        let series = record[2].to_string();
        let value: f64 = record[3].parse().map_err(|e| Error::BadCell {
            row: line,
            column: "return".to_string(),
            detail: format!("'{}' is not a number ({e})", &record[3]),
        })?;
        if !value.is_finite() {
            return Err(Error::BadCell {
                row: line,
                column: "return".to_string(),
                detail: format!("non-finite value {value}"),
            });
        }
        set.push(date, &series, value);
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn write_csv(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn loads_small_panel() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(
            &dir,
            "p.csv",
            "date,a,b\n2020-01-01,1.0,4.0\n2020-01-02,2.0,6.0\n2020-01-03,3.0,5.0\n",
        );
        let panel = load_panel(&path, "date", None).unwrap();
        assert_eq!(panel.len(), 3);
        assert_eq!(panel.width(), 2);
        assert_eq!(panel.names(), ["a", "b"]);
        assert_eq!(panel.values()[(0, 0)], 1.0);
        assert_eq!(panel.values()[(2, 1)], 5.0);
    }

    #[test]
    fn series_filter_reorders_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(
            &dir,
            "p.csv",
            "date,a,b\n2020-01-01,1.0,4.0\n2020-01-02,2.0,6.0\n",
        );
        let filter = vec!["b".to_string(), "a".to_string()];
        let panel = load_panel(&path, "date", Some(&filter)).unwrap();
        assert_eq!(panel.names(), ["b", "a"]);
        assert_eq!(panel.values()[(0, 0)], 4.0);
        assert_eq!(panel.values()[(0, 1)], 1.0);
    }

    #[test]
    fn empty_cell_names_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(
            &dir,
            "p.csv",
            "date,a,b\n2020-01-01,1.0,4.0\n2020-01-02,,6.0\n",
        );
        match load_panel(&path, "date", None) {
            Err(Error::BadCell { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "a");
            }
            other => panic!("expected BadCell, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_date_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(
            &dir,
            "p.csv",
            "date,a\n2020-01-01,1.0\n2020-01-01,2.0\n2020-01-02,0.5\n",
        );
        match load_panel(&path, "date", None) {
            Err(Error::BadCell { row, detail, .. }) => {
                assert_eq!(row, 3);
                assert!(detail.contains("duplicate date"), "{detail}");
            }
            other => panic!("expected BadCell, got {other:?}"),
        }
    }

    #[test]
    fn constant_column_rejected_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(
            &dir,
            "p.csv",
            "date,a,b\n2020-01-01,1.0,7.0\n2020-01-02,2.0,7.0\n",
        );
        match load_panel(&path, "date", None) {
            Err(Error::InvalidPanel(msg)) => assert!(msg.contains("'b'"), "{msg}"),
            other => panic!("expected InvalidPanel, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_panel(Path::new("/nonexistent/nope.csv"), "date", None).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn rv_two_term_sum() {
        let mut set = IntradayReturnSet::new("5min");
        set.push(date("2020-01-01"), "x", 0.1);
        set.push(date("2020-01-01"), "x", -0.1);
        set.push(date("2020-01-02"), "x", 0.2);
        let panel = realized_log_volatility(&set, 1.0).unwrap();
        assert_relative_eq!(panel.values()[(0, 0)], 0.02_f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(panel.values()[(0, 0)], -3.912023, epsilon = 5e-7);
    }

    #[test]
    fn rv_all_zero_day_errors() {
        let mut set = IntradayReturnSet::new("5min");
        set.push(date("2020-01-01"), "x", 0.0);
        set.push(date("2020-01-01"), "x", 0.0);
        set.push(date("2020-01-02"), "x", 0.1);
        assert!(matches!(
            realized_log_volatility(&set, 1.0),
            Err(Error::InvalidPanel(_))
        ));
    }

    #[test]
    fn rv_full_session_of_constant_bars() {
        let mut set = IntradayReturnSet::new("5min");
        for _ in 0..78 {
            set.push(date("2020-01-01"), "x", 0.01);
        }
        set.push(date("2020-01-02"), "x", 0.02);
        let panel = realized_log_volatility(&set, 1.0).unwrap();
        assert_relative_eq!(panel.values()[(0, 0)], 0.0078_f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(panel.values()[(0, 0)], -4.853632, epsilon = 5e-7);
        let half = realized_log_volatility(&set, 0.5).unwrap();
        assert_relative_eq!(
            half.values()[(0, 0)],
            0.5 * 0.0078_f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn rv_length_equals_distinct_dates() {
        let mut set = IntradayReturnSet::new("5min");
        for (i, d) in ["2020-01-01", "2020-01-02", "2020-01-05"].iter().enumerate() {
            set.push(date(d), "x", 0.1);
            set.push(date(d), "y", -0.2 - 0.1 * i as f64);
        }
        set.push(date("2020-01-05"), "x", 0.3);
        let panel = realized_log_volatility(&set, 1.0).unwrap();
        assert_eq!(panel.len(), 3);
        assert_eq!(panel.width(), 2);
    }

    #[test]
    fn rv_missing_group_errors() {
        let mut set = IntradayReturnSet::new("5min");
        set.push(date("2020-01-01"), "x", 0.1);
        set.push(date("2020-01-01"), "y", 0.2);
        set.push(date("2020-01-02"), "x", 0.1);
        match realized_log_volatility(&set, 1.0) {
            Err(Error::InvalidPanel(msg)) => assert!(msg.contains("'y'"), "{msg}"),
            other => panic!("expected InvalidPanel, got {other:?}"),
        }
    }

    #[test]
    fn intraday_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(
            &dir,
            "i.csv",
            "date,time,series,return\n\
             2020-01-01,09:30,spx,0.1\n\
             2020-01-01,09:35,spx,-0.1\n\
             2020-01-01,09:30,ndx,0.05\n\
             2020-01-02,09:30,spx,0.2\n\
             2020-01-02,09:30,ndx,-0.02\n",
        );
        let set = load_intraday(&path, "5min").unwrap();
        assert_eq!(set.names(), ["spx", "ndx"]);
        assert_eq!(set.num_days(), 2);
        let panel = realized_log_volatility(&set, 1.0).unwrap();
        assert_relative_eq!(panel.values()[(0, 0)], 0.02_f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(panel.values()[(0, 1)], 0.0025_f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn window_identity_and_contents() {
        let values = DMatrix::from_row_slice(4, 2, &[1.0, 5.0, 2.0, 6.0, 3.0, 7.5, 4.0, 7.0]);
        let panel = TimeSeriesPanel::from_values(vec!["a".into(), "b".into()], values).unwrap();
        let full = panel.window(0, 4).unwrap();
        assert_eq!(full, panel);
        let mid = panel.window(1, 2).unwrap();
        assert_eq!(mid.len(), 2);
        assert_eq!(mid.dates(), &panel.dates()[1..3]);
        assert_eq!(mid.values()[(0, 0)], 2.0);
        assert_eq!(mid.values()[(1, 1)], 7.5);
        assert_eq!(mid.names(), panel.names());
    }

    #[test]
    fn window_out_of_range() {
        let values = DMatrix::from_row_slice(10, 1, &[1., 2., 3., 4., 5., 6., 7., 8., 9., 10.]);
        let panel = TimeSeriesPanel::from_values(vec!["a".into()], values).unwrap();
        match panel.window(8, 5) {
            Err(Error::WindowOutOfRange { start, length, len }) => {
                assert_eq!((start, length, len), (8, 5, 10));
            }
            other => panic!("expected WindowOutOfRange, got {other:?}"),
        }
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let values = DMatrix::from_row_slice(
            3,
            2,
            &[
                1.0 / 3.0,
                std::f64::consts::PI,
                -7.25e-15,
                2.0_f64.sqrt(),
                6.02214076e23,
                -0.1,
            ],
        );
        let panel = TimeSeriesPanel::from_values(vec!["u".into(), "v".into()], values).unwrap();
        let path = dir.path().join("round.csv");
        save_panel(&panel, &path).unwrap();
        let back = load_panel(&path, "date", None).unwrap();
        assert_eq!(back, panel);
    }

    #[test]
    fn loads_full_size_volatility_panel() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let start = NaiveDate::from_ymd_opt(2004, 1, 2).unwrap();
        let mut body = String::from("date");
        for j in 0..11 {
            body.push_str(&format!(",s{j}"));
        }
        body.push('\n');
        for i in 0..4216u64 {
            body.push_str(&format!("{}", start + chrono::Days::new(i)));
            for _ in 0..11 {
                body.push_str(&format!(",{:.6}", rng.gen_range(-12.0..-6.0)));
            }
            body.push('\n');
        }
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(&dir, "vol.csv", &body);
        let panel = load_panel(&path, "date", None).unwrap();
        assert_eq!(panel.len(), 4216);
        assert_eq!(panel.width(), 11);
    }
}
