//! Dataset CSV files and the oracle sidecar.
//!
//! A dataset file has the header `y,x1,...,xd` followed by one numeric row
//! per observation. Values are written with 17 significant digits so a
//! save/load round trip is exact.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rhuber_core::dataset::{contaminate, generate};
use rhuber_core::{ContaminationSpec, Dataset, GeneratorSpec, Matrix, OracleInstance};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("empty input: expected a `y,x1,...,xd` header")]
    Empty,
    #[error("line 1: malformed header: {reason}")]
    Header { reason: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    Ragged {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column} ({name}): {value:?} is not a finite number")]
    NotNumeric {
        line: u64,
        column: usize,
        name: String,
        value: String,
    },
    #[error("line {line}: {source}")]
    Csv { line: u64, source: csv::Error },
    #[error("need at least 2 data rows, found {0}")]
    TooFewRows(usize),
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Model(#[from] rhuber_core::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn check_header(fields: &csv::StringRecord) -> Result<usize, FormatError> {
    let names: Vec<&str> = fields.iter().map(str::trim).collect();
    if names.first() != Some(&"y") {
        return Err(FormatError::Header {
            reason: format!(
                "first column must be `y`, found {:?}",
                names.first().unwrap_or(&"")
            ),
        });
    }
    if names.len() < 2 {
        return Err(FormatError::Header {
            reason: "no covariate columns".into(),
        });
    }
    for (j, name) in names.iter().enumerate().skip(1) {
        let expected = format!("x{j}");
        if *name != expected {
            return Err(FormatError::Header {
                reason: format!("column {} must be `{expected}`, found {name:?}", j + 1),
            });
        }
    }
    Ok(names.len() - 1)
}

/// Parses dataset CSV text.
pub fn parse_csv<R: Read>(input: R) -> Result<Dataset, FormatError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(FormatError::Empty),
        Some(r) => r.map_err(|source| FormatError::Csv { line: 1, source })?,
    };
    if header.len() == 1 && header.get(0) == Some("") {
        return Err(FormatError::Empty);
    }
    let d = check_header(&header)?;
    let names: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();

    let mut y = Vec::new();
    let mut x = Vec::new();
    for record in records {
        let record = record.map_err(|source| {
            let line = source.position().map_or(0, |p| p.line());
            FormatError::Csv { line, source }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.len() != d + 1 {
            return Err(FormatError::Ragged {
                line,
                expected: d + 1,
                found: record.len(),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let value = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| FormatError::NotNumeric {
                    line,
                    column: j + 1,
                    name: names[j].clone(),
                    value: cell.to_string(),
                })?;
            if j == 0 {
                y.push(value);
            } else {
                x.push(value);
            }
        }
    }
    if y.len() < 2 {
        return Err(FormatError::TooFewRows(y.len()));
    }
    let n = y.len();
    Ok(Dataset::new(y, Matrix::from_vec(n, d, x)?)?)
}

pub fn load_csv(path: &Path) -> Result<Dataset, FormatError> {
    let file = File::open(path).map_err(io_err(path))?;
    parse_csv(file)
}

/// 17 significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(ds: &Dataset, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["y".to_string()];
    header.extend((1..=ds.d()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for (i, row) in ds.x().row_iter().enumerate() {
        let mut fields = Vec::with_capacity(row.len() + 1);
        fields.push(format_value(ds.y()[i]));
        fields.extend(row.iter().map(|&v| format_value(v)));
        w.write_record(&fields)?;
    }
    w.flush()
}

pub fn save_csv(ds: &Dataset, path: &Path) -> Result<(), FormatError> {
    let file = File::create(path).map_err(io_err(path))?;
    write_csv(ds, BufWriter::new(file)).map_err(io_err(path))
}

/// Everything needed to regenerate an oracle instance bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub generator: GeneratorSpec,
    pub n: usize,
    pub d: usize,
    pub contamination: ContaminationSpec,
}

/// JSON sidecar written next to a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSidecar {
    pub beta_star: Vec<f64>,
    pub outlier_idx: Vec<usize>,
    pub seed: u64,
    pub spec: InstanceSpec,
}

impl OracleSidecar {
    pub fn from_instance(inst: &OracleInstance) -> Self {
        Self {
            beta_star: inst.beta_star.clone(),
            outlier_idx: inst.outlier_idx.clone(),
            seed: inst.seed,
            spec: InstanceSpec {
                generator: inst.generator.clone(),
                n: inst.n(),
                d: inst.d(),
                contamination: inst
                    .contamination
                    .clone()
                    .unwrap_or_else(ContaminationSpec::clean),
            },
        }
    }

    /// Regenerates the instance the sidecar describes.
    pub fn replay(&self) -> Result<OracleInstance, FormatError> {
        let s = &self.spec;
        let clean = generate(&s.generator, s.n, s.d, &self.beta_star, self.seed)?;
        Ok(contaminate(&clean, &s.contamination)?)
    }
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<(), FormatError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| FormatError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FormatError> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|source| FormatError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// `data.csv` → `data.oracle.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("oracle.json")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_errors() {
        let err = parse_csv("x,x1\n1,2\n3,4\n".as_bytes()).unwrap_err();
        assert!(matches!(err, FormatError::Header { .. }));
        let err = parse_csv("y,x2\n1,2\n3,4\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("column 2"));
        assert!(matches!(
            parse_csv("y\n1\n2\n".as_bytes()),
            Err(FormatError::Header { .. })
        ));
        assert!(matches!(parse_csv("".as_bytes()), Err(FormatError::Empty)));
    }

    #[test]
    fn cell_errors_carry_locations() {
        let err = parse_csv("y,x1,x2\n1,2,3\n4,oops,6\n".as_bytes()).unwrap_err();
        match err {
            FormatError::NotNumeric {
                line, column, name, ..
            } => {
                assert_eq!((line, column, name.as_str()), (3, 2, "x1"));
            }
            other => panic!("{other}"),
        }
        let err = parse_csv("y,x1\n1,2\n3\n".as_bytes()).unwrap_err();
        assert!(matches!(
            err,
            FormatError::Ragged {
                line: 3,
                expected: 2,
                found: 1
            }
        ));
        let err = parse_csv("y,x1\n1,inf\n3,4\n".as_bytes()).unwrap_err();
        assert!(matches!(err, FormatError::NotNumeric { column: 2, .. }));
    }

    #[test]
    fn round_trip_is_exact() {
        let x = Matrix::from_rows(&[[0.1, 1e-300], [-2.5e10, 1.0 / 3.0]]).unwrap();
        let ds = Dataset::new(vec![std::f64::consts::PI, -0.0], x).unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let back = parse_csv(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
    }
}
