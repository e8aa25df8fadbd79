//! CSV and JSON reading and writing.
//!
//! Floats are written in the shortest form that parses back to the same
//! `f64`, so every emitted CSV round-trips exactly. Non-finite values are
//! written as `inf`, `-inf` or `NaN`, which `f64::from_str` also accepts.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::error::{Result, RunError};

pub fn fmt_f64(v: f64) -> String {
    ryu::Buffer::new().format(v).to_owned()
}

/// Empty field for `None`.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// JSON number for finite values, otherwise the string form used in CSVs.
pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or_else(|| Value::String(fmt_f64(v)), Value::Number)
}

pub fn num_opt(v: Option<f64>) -> Value {
    v.map_or(Value::Null, num)
}

pub fn nums(vs: &[f64]) -> Value {
    Value::Array(vs.iter().copied().map(num).collect())
}

/// Builds a JSON object. Keys come out sorted.
pub fn object<const N: usize>(pairs: [(&str, Value); N]) -> Value {
    Value::Object(
        pairs
            .into_iter()
            .map(|(k, v)| (k.to_owned(), v))
            .collect::<Map<String, Value>>(),
    )
}

/// Writes files into one output directory and remembers their names.
#[derive(Debug)]
pub struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.path(name);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .map_err(|e| csv_error(&path, e))?;
        w.write_record(header).map_err(|e| csv_error(&path, e))?;
        for row in rows {
            w.write_record(&row).map_err(|e| csv_error(&path, e))?;
        }
        w.flush().map_err(|e| RunError::io(&path, e))?;
        self.written.push(name.to_owned());
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &Value) -> Result<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| RunError::Format {
            path: path.clone(),
            message: e.to_string(),
        })?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| RunError::io(&path, e))?;
        self.written.push(name.to_owned());
        Ok(())
    }
}

fn csv_error(path: &Path, e: csv::Error) -> RunError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => RunError::io(path, io),
            _ => unreachable!("is_io_error checked"),
        }
    } else {
        RunError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

fn format_error(path: &Path, message: impl Into<String>) -> RunError {
    RunError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Reads a headed CSV of numbers, checking the header names. Empty fields
/// become `None`.
pub fn read_table(path: &Path, header: &[&str]) -> Result<Vec<Vec<Option<f64>>>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let found = r.headers().map_err(|e| csv_error(path, e))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(format_error(
            path,
            format!("expected header '{}'", header.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        rows.push(parse_record(path, i + 2, &record)?);
    }
    Ok(rows)
}

fn parse_record(path: &Path, line: usize, record: &csv::StringRecord) -> Result<Vec<Option<f64>>> {
    record
        .iter()
        .map(|field| {
            if field.is_empty() {
                Ok(None)
            } else {
                field
                    .parse()
                    .map(Some)
                    .map_err(|_| format_error(path, format!("line {line}: bad number '{field}'")))
            }
        })
        .collect()
}

/// `v_in_V,t_on_s` rows. Every row needs both values.
pub fn read_dataset(path: &Path) -> Result<Vec<(f64, f64)>> {
    read_table(path, &["v_in_V", "t_on_s"])?
        .into_iter()
        .enumerate()
        .map(|(i, row)| match row[..] {
            [Some(v), Some(t)] => Ok((v, t)),
            _ => Err(format_error(path, format!("line {}: missing value", i + 2))),
        })
        .collect()
}

/// Headerless matrix of numbers, one CSV row per matrix row.
pub fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = parse_record(path, i + 1, &record)?
            .into_iter()
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| format_error(path, format!("row {}: empty field", i + 1)))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(format_error(path, "matrix has no rows"));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_text_round_trips() {
        for v in [
            0.0,
            -0.0,
            1e-15,
            3.162_277_660_168_379e-15,
            0.1 + 0.2,
            f64::MAX,
            f64::MIN_POSITIVE,
            5e-324,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ] {
            let back: f64 = fmt_f64(v).parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v}");
        }
        assert!(fmt_f64(f64::NAN).parse::<f64>().unwrap().is_nan());
    }

    #[test]
    fn json_numbers() {
        assert_eq!(num(1.5), serde_json::json!(1.5));
        assert_eq!(num(f64::INFINITY), serde_json::json!("inf"));
        assert_eq!(num_opt(None), Value::Null);
    }

    #[test]
    fn csv_round_trip_and_header_check() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutDir::create(dir.path()).unwrap();
        let rows = [(0.1 + 0.2, Some(1e-4 / 3.0)), (2.0, None)];
        out.csv(
            "t.csv",
            &["v_in_V", "t_on_s"],
            rows.iter().map(|&(v, t)| vec![fmt_f64(v), fmt_opt(t)]),
        )
        .unwrap();
        let back = read_table(&out.path("t.csv"), &["v_in_V", "t_on_s"]).unwrap();
        assert_eq!(
            back,
            vec![
                vec![Some(0.1 + 0.2), Some(1e-4 / 3.0)],
                vec![Some(2.0), None]
            ]
        );
        assert!(read_table(&out.path("t.csv"), &["a", "b"]).is_err());
        assert!(read_dataset(&out.path("t.csv")).is_err());
    }

    #[test]
    fn matrix_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        fs::write(&path, "# conductances\n1e-6, 2e-6\n3e-6,4e-6\n").unwrap();
        assert_eq!(
            read_matrix(&path).unwrap(),
            vec![vec![1e-6, 2e-6], vec![3e-6, 4e-6]]
        );
        fs::write(&path, "1e-6,x\n").unwrap();
        assert_eq!(read_matrix(&path).unwrap_err().exit_code(), 3);
        let missing = read_matrix(&dir.path().join("nope.csv")).unwrap_err();
        assert!(matches!(missing, RunError::Io { .. }));
    }
}
