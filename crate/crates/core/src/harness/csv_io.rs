//! CSV files.
//!
//! Series files have the columns of [`SERIES_COLUMNS`]. Floats are written
//! with 9 significant digits in `%g` style, so output bytes depend only on
//! the values.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::{MetricRecord, MetricsSeries};

use super::runner::SweepTable;
use super::summary::ComparisonSummary;

pub const SERIES_COLUMNS: [&str; 8] = [
    "policy",
    "round",
    "time",
    "train_loss",
    "test_loss",
    "test_accuracy",
    "update_count",
    "current_k",
];

/// `%.9g`: 9 significant digits, fixed notation for exponents in
/// `[-5, 9)`, trailing zeros dropped.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn emit_series_csv(series: &[MetricsSeries]) -> String {
    let mut out = SERIES_COLUMNS.join(",");
    out.push('\n');
    for s in series {
        let policy = csv_field(&s.policy);
        for r in &s.records {
            out.push_str(&format!(
                "{policy},{},{},{},{},{},{},{}\n",
                s.round,
                format_sig9(r.time),
                format_sig9(r.train_loss),
                format_sig9(r.test_loss),
                format_sig9(r.test_accuracy),
                r.update_count,
                r.current_k
            ));
        }
    }
    out
}

pub fn emit_summary_csv(summaries: &[ComparisonSummary]) -> String {
    let mut out = String::from("ours,baseline,d_accuracy,d_test_loss,d_train_loss,points\n");
    for s in summaries {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            csv_field(&s.ours),
            csv_field(&s.baseline),
            format_sig9(s.d_accuracy),
            format_sig9(s.d_test_loss),
            format_sig9(s.d_train_loss),
            s.points
        ));
    }
    out
}

/// Metric rows by swept-value columns against one baseline.
pub fn emit_sweep_csv(table: &SweepTable, baseline: &str) -> Result<String> {
    let mut header = vec![format!("{}/metric", table.axis.name())];
    let mut rows = [
        vec!["test_accuracy".to_string()],
        vec!["test_loss".to_string()],
        vec!["train_loss".to_string()],
    ];
    for cell in &table.cells {
        header.push(format_sig9(cell.value));
        let s = cell
            .summaries
            .iter()
            .find(|s| s.baseline == baseline)
            .ok_or_else(|| Error::Internal(format!("no comparison against {baseline}")))?;
        rows[0].push(format_sig9(s.d_accuracy));
        rows[1].push(format_sig9(s.d_test_loss));
        rows[2].push(format_sig9(s.d_train_loss));
    }
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn write_series_csv(series: &[MetricsSeries], path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &emit_series_csv(series))
}

pub fn write_summary_csv(summaries: &[ComparisonSummary], path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &emit_summary_csv(summaries))
}

pub fn write_sweep_csv(table: &SweepTable, baseline: &str, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &emit_sweep_csv(table, baseline)?)
}

/// Parses series CSV text; consecutive rows with the same policy and round
/// form one series.
pub fn parse_series_csv(text: &str) -> Result<Vec<MetricsSeries>> {
    let bad = |line: u64, msg: String| Error::data(format!("series csv line {line}: {msg}"));
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| bad(1, e.to_string()))?
        .clone();
    if headers.iter().ne(SERIES_COLUMNS.iter().copied()) {
        return Err(bad(1, format!("expected header {}", SERIES_COLUMNS.join(","))));
    }
    let mut out: Vec<MetricsSeries> = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::data(format!("series csv: {e}")))?;
        let line = row.position().map_or(0, |p| p.line());
        let float = |i: usize| -> Result<f64> {
            row[i].parse::<f64>().map_err(|_| bad(line, format!("bad number '{}' in {}", &row[i], SERIES_COLUMNS[i])))
        };
        let int = |i: usize| -> Result<u64> {
            row[i].parse::<u64>().map_err(|_| bad(line, format!("bad integer '{}' in {}", &row[i], SERIES_COLUMNS[i])))
        };
        let policy = &row[0];
        let round = int(1)? as usize;
        let record = MetricRecord {
            time: float(2)?,
            train_loss: float(3)?,
            test_loss: float(4)?,
            test_accuracy: float(5)?,
            update_count: int(6)?,
            current_k: int(7)? as usize,
        };
        match out.last_mut() {
            Some(s) if s.policy == policy && s.round == round => s.records.push(record),
            _ => {
                let mut s = MetricsSeries::new(policy, round);
                s.records.push(record);
                out.push(s);
            }
        }
    }
    Ok(out)
}

pub fn read_series_csv(path: impl AsRef<Path>) -> Result<Vec<MetricsSeries>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_series_csv(&text).map_err(|e| e.at(path.display().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(100.0), "100");
        assert_eq!(format_sig9(std::f64::consts::LN_10), "2.30258509");
        assert_eq!(format_sig9(0.1), "0.1");
        assert_eq!(format_sig9(-0.000123456789123), "-0.000123456789");
        assert_eq!(format_sig9(1.5e-7), "1.5e-7");
        assert_eq!(format_sig9(123456789012.0), "1.23456789e11");
        assert_eq!(format_sig9(999999999.6), "1e9");
    }

    #[test]
    fn empty_series_is_header_only() {
        assert_eq!(emit_series_csv(&[]), format!("{}\n", SERIES_COLUMNS.join(",")));
        assert!(parse_series_csv(&emit_series_csv(&[])).unwrap().is_empty());
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(parse_series_csv("a,b\n1,2\n").is_err());
    }

    fn record() -> impl Strategy<Value = MetricRecord> {
        (0.0..1e3f64, 0.0..10.0f64, 0.0..10.0f64, 0.0..=1.0f64, 0u64..1_000_000, 1usize..64).prop_map(
            |(time, train_loss, test_loss, test_accuracy, update_count, current_k)| MetricRecord {
                time,
                train_loss,
                test_loss,
                test_accuracy,
                update_count,
                current_k,
            },
        )
    }

    proptest! {
        // Values survive to 9 significant digits, and re-emitting the parsed
        // series reproduces the original bytes.
        #[test]
        fn emit_parse_round_trip(records in proptest::collection::vec(record(), 0..20), round in 0usize..5) {
            let mut s = MetricsSeries::new("hybrid:300", round);
            s.records = records;
            let text = emit_series_csv(std::slice::from_ref(&s));
            let parsed = parse_series_csv(&text).unwrap();
            prop_assert_eq!(emit_series_csv(&parsed), text);
            if !s.records.is_empty() {
                prop_assert_eq!(parsed.len(), 1);
                for (a, b) in s.records.iter().zip(&parsed[0].records) {
                    prop_assert!((a.train_loss - b.train_loss).abs() <= 5e-9 * a.train_loss.abs().max(1e-300));
                    prop_assert_eq!(a.update_count, b.update_count);
                }
                let again = parse_series_csv(&emit_series_csv(&parsed)).unwrap();
                prop_assert_eq!(again, parsed);
            }
        }
    }
}
