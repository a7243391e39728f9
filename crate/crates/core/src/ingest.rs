//! Loading price files and turning them into return series.
//!
//! Input files are delimited text (comma or tab) with a header row. Lines
//! starting with `#` are comments and are skipped. All lag arithmetic
//! downstream is in row units; date labels are carried through untouched.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Result, SmcError};

/// Header names recognised as a date/timestamp label column.
const DATE_COLUMNS: [&str; 3] = ["date", "timestamp", "time"];

/// Selects the price column either by header name or zero-based index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSelector {
    Name(String),
    Index(usize),
}

impl FromStr for ColumnSelector {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => ColumnSelector::Index(i),
            Err(_) => ColumnSelector::Name(s.to_string()),
        })
    }
}

impl std::fmt::Display for ColumnSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ColumnSelector::Name(n) => write!(f, "{n}"),
            ColumnSelector::Index(i) => write!(f, "{i}"),
        }
    }
}

/// Strictly positive observations with optional ISO-8601 date labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    timestamps: Option<Vec<String>>,
    prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(prices: Vec<f64>, timestamps: Option<Vec<String>>) -> Result<Self> {
        if prices.len() < 2 {
            return Err(SmcError::TooShort {
                needed: 2,
                got: prices.len(),
            });
        }
        for (k, &p) in prices.iter().enumerate() {
            if !p.is_finite() {
                return Err(SmcError::NonFinite(k));
            }
            if p <= 0.0 {
                return Err(SmcError::NonPositivePrice { row: k + 1, value: p });
            }
        }
        if let Some(ts) = &timestamps {
            if ts.len() != prices.len() {
                return Err(SmcError::invalid(format!(
                    "{} timestamps for {} prices",
                    ts.len(),
                    prices.len()
                )));
            }
            if let Some(k) = ts.windows(2).position(|w| !timestamp_before(&w[0], &w[1])) {
                return Err(SmcError::UnorderedTimestamps(k + 2));
            }
        }
        Ok(PriceSeries { timestamps, prices })
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn timestamps(&self) -> Option<&[String]> {
        self.timestamps.as_deref()
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// Ordered real-valued observations with a cached arithmetic mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    values: Vec<f64>,
    mean: f64,
}

impl ReturnSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(SmcError::TooShort { needed: 1, got: 0 });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(SmcError::NonFinite(k));
        }
        let mean = mean(&values);
        Ok(ReturnSeries { values, mean })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    order_free_sum(values.to_vec()) / values.len() as f64
}

/// Sum in ascending order, so any permutation of the input gives the same
/// bits.
pub(crate) fn order_free_sum(mut values: Vec<f64>) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.iter().sum()
}

/// Reads delimited text, returning the header and the data records.
fn read_delimited(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    let text = fs::read_to_string(path).map_err(|e| SmcError::io(path, e))?;
    let body: String = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n");
    let body = body.trim_end();
    if let Some(k) = body.lines().skip(1).position(|l| l.trim().is_empty()) {
        return Err(SmcError::MissingValue(k + 1));
    }
    let header_line = body.lines().next().unwrap_or("");
    let delimiter = if header_line.contains('\t') { b'\t' } else { b',' };

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let header = reader.headers()?.iter().map(|h| h.to_string()).collect::<Vec<_>>();
    let records = reader.records().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((header, records))
}

fn resolve_column(header: &[String], column: &ColumnSelector) -> Result<usize> {
    match column {
        ColumnSelector::Index(i) if *i < header.len() => Ok(*i),
        ColumnSelector::Index(i) => Err(SmcError::MissingColumn(i.to_string())),
        ColumnSelector::Name(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SmcError::MissingColumn(name.clone())),
    }
}

fn parse_cell(record: &csv::StringRecord, col: usize, row: usize) -> Result<f64> {
    let cell = record.get(col).unwrap_or("");
    if cell.is_empty() {
        return Err(SmcError::MissingValue(row));
    }
    cell.parse::<f64>().map_err(|_| SmcError::NonNumeric {
        row,
        value: cell.to_string(),
    })
}

/// Parses a price column from a delimited file with a header row.
///
/// Rows are numbered from 1 (the first data row after the header). A date
/// column named `date`, `timestamp` or `time` is picked up as labels when
/// present.
pub fn parse_price_csv(path: impl AsRef<Path>, column: &ColumnSelector) -> Result<PriceSeries> {
    let (header, records) = read_delimited(path.as_ref())?;
    let col = resolve_column(&header, column)?;
    let date_col = header
        .iter()
        .position(|h| DATE_COLUMNS.contains(&h.to_ascii_lowercase().as_str()))
        .filter(|&d| d != col);

    let mut prices = Vec::with_capacity(records.len());
    let mut dates = date_col.map(|_| Vec::with_capacity(records.len()));
    for (k, record) in records.iter().enumerate() {
        let row = k + 1;
        let p = parse_cell(record, col, row)?;
        if !p.is_finite() || p <= 0.0 {
            return Err(SmcError::NonPositivePrice { row, value: p });
        }
        prices.push(p);
        if let (Some(d), Some(dates)) = (date_col, dates.as_mut()) {
            dates.push(record.get(d).unwrap_or("").to_string());
        }
    }
    PriceSeries::new(prices, dates)
}

/// Reads a column of already-computed returns (no positivity requirement).
pub fn parse_return_csv(path: impl AsRef<Path>, column: &ColumnSelector) -> Result<ReturnSeries> {
    let (header, records) = read_delimited(path.as_ref())?;
    let col = resolve_column(&header, column)?;
    let values = records
        .iter()
        .enumerate()
        .map(|(k, r)| parse_cell(r, col, k + 1))
        .collect::<Result<Vec<_>>>()?;
    ReturnSeries::new(values)
}

/// Reads a one-value-per-line series file. `#` comment lines are skipped,
/// and a leading non-numeric line is treated as a header.
pub fn read_series_file(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| SmcError::io(path, e))?;
    let mut values = Vec::new();
    let mut seen_first = false;
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let first_field = line.split(['\t', ',']).next().unwrap_or("").trim();
        match first_field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if !seen_first => {}
            Err(_) => {
                return Err(SmcError::NonNumeric {
                    row: k + 1,
                    value: first_field.to_string(),
                })
            }
        }
        seen_first = true;
    }
    if values.is_empty() {
        return Err(SmcError::TooShort { needed: 1, got: 0 });
    }
    Ok(values)
}

/// Numeric labels compare as numbers, anything else (ISO dates) as text.
fn timestamp_before(a: &str, b: &str) -> bool {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x < y,
        _ => a < b,
    }
}

/// Log returns over `interval` rows: `values[k] = ln p[k+interval] - ln p[k]`.
pub fn log_returns(p: &PriceSeries, interval: usize) -> Result<ReturnSeries> {
    if interval == 0 {
        return Err(SmcError::invalid("return interval must be at least 1"));
    }
    if interval >= p.len() {
        return Err(SmcError::invalid(format!(
            "return interval {interval} must be shorter than the series ({} prices)",
            p.len()
        )));
    }
    let prices = p.prices();
    let values = prices
        .iter()
        .zip(&prices[interval..])
        .map(|(a, b)| b.ln() - a.ln())
        .collect();
    ReturnSeries::new(values)
}

/// Removes the arithmetic mean. The result's cached mean is exactly zero.
pub fn demean(r: &ReturnSeries) -> ReturnSeries {
    let m = r.mean;
    let values = if m == 0.0 {
        r.values.clone()
    } else {
        r.values.iter().map(|v| v - m).collect()
    };
    ReturnSeries { values, mean: 0.0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn two_row_file() {
        let f = write_tmp("date,close\n2020-01-01,100\n2020-01-02,110\n");
        let p = parse_price_csv(f.path(), &"close".parse().unwrap()).unwrap();
        assert_eq!(p.prices(), &[100.0, 110.0]);
        assert_eq!(p.timestamps().unwrap()[1], "2020-01-02");
    }

    #[test]
    fn tab_delimited_by_index() {
        let f = write_tmp("# comment\ndate\tclose\n2020-01-01\t1.5\n2020-01-02\t2.5\n");
        let p = parse_price_csv(f.path(), &ColumnSelector::Index(1)).unwrap();
        assert_eq!(p.prices(), &[1.5, 2.5]);
    }

    #[test]
    fn zero_price_is_rejected_with_row() {
        let f = write_tmp("close\n100\n0\n101\n");
        let err = parse_price_csv(f.path(), &"close".parse().unwrap()).unwrap_err();
        assert_eq!(err.to_string(), "non-positive price at row 2: 0");
    }

    #[test]
    fn bad_inputs() {
        let blank = write_tmp("close\n100\n\n101\n");
        assert!(matches!(
            parse_price_csv(blank.path(), &"close".parse().unwrap()),
            Err(SmcError::MissingValue(2))
        ));
        let gap = write_tmp("date,close\n2020-01-01,100\n2020-01-02,\n2020-01-03,101\n");
        assert!(matches!(
            parse_price_csv(gap.path(), &"close".parse().unwrap()),
            Err(SmcError::MissingValue(2))
        ));
        let text = write_tmp("close\n100\nabc\n");
        assert!(matches!(
            parse_price_csv(text.path(), &"close".parse().unwrap()),
            Err(SmcError::NonNumeric { row: 2, .. })
        ));
        let one = write_tmp("close\n100\n");
        assert!(matches!(
            parse_price_csv(one.path(), &"close".parse().unwrap()),
            Err(SmcError::TooShort { .. })
        ));
        assert!(matches!(
            parse_price_csv(one.path(), &"open".parse().unwrap()),
            Err(SmcError::MissingColumn(_))
        ));
        assert!(matches!(
            parse_price_csv("/nonexistent/prices.csv", &ColumnSelector::Index(0)),
            Err(SmcError::Io { .. })
        ));
        let numeric = write_tmp("time,close\n9,100\n10,101\n");
        assert_eq!(
            parse_price_csv(numeric.path(), &"close".parse().unwrap())
                .unwrap()
                .len(),
            2
        );
        let unordered = write_tmp("date,close\n2020-01-02,100\n2020-01-01,101\n");
        assert!(matches!(
            parse_price_csv(unordered.path(), &"close".parse().unwrap()),
            Err(SmcError::UnorderedTimestamps(2))
        ));
    }

    #[test]
    fn log_return_examples() {
        let e = std::f64::consts::E;
        let p = PriceSeries::new(vec![1.0, e, e * e], None).unwrap();
        let r = log_returns(&p, 1).unwrap();
        assert!((r.values()[0] - 1.0).abs() < 1e-15);
        assert!((r.values()[1] - 1.0).abs() < 1e-15);

        let flat = PriceSeries::new(vec![100.0; 3], None).unwrap();
        assert_eq!(log_returns(&flat, 1).unwrap().values(), &[0.0, 0.0]);

        let p = PriceSeries::new(vec![100.0, 110.0], None).unwrap();
        let r = log_returns(&p, 1).unwrap();
        assert!((r.values()[0] - 0.0953102).abs() < 1e-7);

        assert!(log_returns(&p, 2).is_err());
        assert!(log_returns(&p, 0).is_err());
    }

    #[test]
    fn demean_examples() {
        let r = ReturnSeries::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(demean(&r).values(), &[-1.0, 0.0, 1.0]);
        let z = ReturnSeries::new(vec![-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(demean(&z), z);
        let r = ReturnSeries::new(vec![0.1, 0.3]).unwrap();
        let d = demean(&r);
        assert!((d.values()[0] + 0.1).abs() < 1e-15 && (d.values()[1] - 0.1).abs() < 1e-15);
        assert_eq!(d.mean(), 0.0);
    }

    #[test]
    fn series_file_with_header_and_comments() {
        let f = write_tmp("# seed 1\nvalue\n0.5\n-1.25\n");
        assert_eq!(read_series_file(f.path()).unwrap(), vec![0.5, -1.25]);
        let bad = write_tmp("1.0\nfoo\n");
        assert!(read_series_file(bad.path()).is_err());
    }
}
