//! Readers for device tables, calibration data, datasets and AER event
//! files, plus the CSV writer shared by all commands.
//!
//! Numeric tables accept `#` comment lines and, where noted, one optional
//! header row. Errors carry the 1-based line of the offending record.

use std::fs::File;
use std::path::{Path, PathBuf};

use spikeforge_core::encoding::{AerEvent, Polarity, Sample, SampleInput};
use spikeforge_core::synapse::FamilyTable;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}{}: {message}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
pub struct DataError {
    pub path: PathBuf,
    pub line: Option<u64>,
    pub message: String,
}

impl DataError {
    fn new(path: &Path, line: Option<u64>, message: impl Into<String>) -> Self {
        Self {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

/// How the rows of a dataset file describe their samples.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetFormat {
    /// `label,f1,f2,...` with intensities in `[0, 1]`.
    Features,
    /// `label,file` naming an AER event file, relative to `dir`.
    Events { dir: PathBuf },
}

fn reader(path: &Path) -> Result<csv::Reader<File>, DataError> {
    let file = File::open(path).map_err(|e| DataError::new(path, None, e.to_string()))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file))
}

/// Records of `path` with their line numbers.
fn records(path: &Path) -> Result<Vec<(u64, Vec<String>)>, DataError> {
    let mut out = Vec::new();
    for rec in reader(path)?.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line());
            DataError::new(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push((line, rec.iter().map(str::to_owned).collect()));
    }
    Ok(out)
}

fn parse_finite(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn numeric_rows(path: &Path, header: bool) -> Result<Vec<(u64, Vec<f64>)>, DataError> {
    let mut rows = Vec::new();
    for (n, (line, fields)) in records(path)?.into_iter().enumerate() {
        match fields
            .iter()
            .map(|f| parse_finite(f))
            .collect::<Option<Vec<f64>>>()
        {
            Some(values) => rows.push((line, values)),
            None if n == 0 && header => {}
            None => {
                return Err(DataError::new(
                    path,
                    Some(line),
                    format!("expected finite numbers, found `{}`", fields.join(",")),
                ))
            }
        }
    }
    Ok(rows)
}

/// One conductance per line, in siemens.
pub fn read_levels(path: &Path) -> Result<Vec<f64>, DataError> {
    numeric_rows(path, true)?
        .into_iter()
        .map(|(line, row)| match row[..] {
            [g] => Ok(g),
            _ => Err(DataError::new(
                path,
                Some(line),
                "expected one value per line",
            )),
        })
        .collect()
}

/// A line of row keys followed by one conductance row per key.
pub fn read_family(path: &Path) -> Result<FamilyTable, DataError> {
    let mut rows = numeric_rows(path, false)?.into_iter().map(|(_, r)| r);
    let keys = rows
        .next()
        .ok_or_else(|| DataError::new(path, None, "table is empty"))?;
    Ok(FamilyTable {
        keys,
        rows: rows.collect(),
    })
}

/// Two-column numeric table, such as `width_seconds,frequency_hz` or `in,out`.
pub fn read_pairs(path: &Path) -> Result<Vec<(f64, f64)>, DataError> {
    numeric_rows(path, true)?
        .into_iter()
        .map(|(line, row)| match row[..] {
            [a, b] => Ok((a, b)),
            _ => Err(DataError::new(
                path,
                Some(line),
                "expected two values per line",
            )),
        })
        .collect()
}

/// Events `time_seconds,address,polarity`, sorted by time.
pub fn read_aer(path: &Path) -> Result<Vec<AerEvent>, DataError> {
    let mut events = Vec::new();
    for (line, fields) in records(path)? {
        let bad = |what: &str| DataError::new(path, Some(line), what.to_string());
        let [t, address, polarity] = &fields[..] else {
            return Err(bad("expected `time_seconds,address,polarity`"));
        };
        let t = parse_finite(t)
            .filter(|t| *t >= 0.0)
            .ok_or_else(|| bad("bad event time"))?;
        let address = address.parse().map_err(|_| bad("bad address"))?;
        let polarity = match polarity.as_str() {
            "1" | "+1" => Polarity::On,
            "-1" => Polarity::Off,
            _ => return Err(bad("polarity must be 1 or -1")),
        };
        events.push(AerEvent {
            t,
            address,
            polarity,
        });
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(events)
}

fn parse_label(s: &str) -> Option<Option<usize>> {
    match s {
        "" | "none" => Some(None),
        s => s.parse().ok().map(Some),
    }
}

pub fn read_dataset(path: &Path, format: &DatasetFormat) -> Result<Vec<Sample>, DataError> {
    let mut samples = Vec::new();
    let mut width = None;
    for (n, (line, fields)) in records(path)?.into_iter().enumerate() {
        if n == 0
            && fields
                .first()
                .is_some_and(|f| f.eq_ignore_ascii_case("label"))
        {
            continue;
        }
        let bad = |what: String| DataError::new(path, Some(line), what);
        let (label, rest) = fields
            .split_first()
            .ok_or_else(|| bad("empty row".into()))?;
        let label = parse_label(label).ok_or_else(|| bad(format!("bad label `{label}`")))?;
        let input = match format {
            DatasetFormat::Features => {
                let features = rest
                    .iter()
                    .map(|f| parse_finite(f).filter(|x| (0.0..=1.0).contains(x)))
                    .collect::<Option<Vec<f64>>>()
                    .ok_or_else(|| bad("features must be numbers in [0, 1]".into()))?;
                if *width.get_or_insert(features.len()) != features.len() {
                    return Err(bad(format!(
                        "row has {} features, earlier rows have {}",
                        features.len(),
                        width.unwrap_or(0)
                    )));
                }
                SampleInput::Features(features)
            }
            DatasetFormat::Events { dir } => {
                let [file] = rest else {
                    return Err(bad("expected `label,event_file`".into()));
                };
                SampleInput::Events(read_aer(&dir.join(file))?)
            }
        };
        samples.push(Sample { input, label });
    }
    Ok(samples)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_csv<I>(path: &Path, header: &[String], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let io_err = |e: csv::Error| CliError::io(path, std::io::Error::other(e.to_string()));
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn aer_lines() {
        let f = file("# t,addr,pol\n0.002,1,-1\n0.001,3,1\n");
        let ev = read_aer(f.path()).unwrap();
        assert_eq!(
            ev[0],
            AerEvent {
                t: 0.001,
                address: 3,
                polarity: Polarity::On
            }
        );
        assert_eq!(ev[1].polarity, Polarity::Off);
        assert!(read_aer(file("").path()).unwrap().is_empty());
        let err = read_aer(file("abc\n").path()).unwrap_err();
        assert_eq!(err.line, Some(1));
    }

    #[test]
    fn numeric_header_is_optional() {
        assert_eq!(
            read_pairs(file("in,out\n0,1\n2,3\n").path()).unwrap(),
            vec![(0.0, 1.0), (2.0, 3.0)]
        );
        assert_eq!(read_pairs(file("0,1\n").path()).unwrap(), vec![(0.0, 1.0)]);
        let err = read_pairs(file("0,1\nx,2\n").path()).unwrap_err();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn dataset_rows() {
        let f = file("label,a,b\n1,0.5,1\n,0,0\n");
        let s = read_dataset(f.path(), &DatasetFormat::Features).unwrap();
        assert_eq!(s[0].label, Some(1));
        assert_eq!(s[1].label, None);
        assert!(read_dataset(file("0,1.5\n").path(), &DatasetFormat::Features).is_err());
        assert!(read_dataset(file("0,1\n0,1,1\n").path(), &DatasetFormat::Features).is_err());
    }

    #[test]
    fn family_table() {
        let t = read_family(file("0.8,1.0\n1e-6,2e-6\n1e-6,4e-6\n").path()).unwrap();
        assert_eq!(t.keys, vec![0.8, 1.0]);
        assert_eq!(t.rows.len(), 2);
    }
}
