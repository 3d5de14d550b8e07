//! Dataset CSV and prior JSON formats.
//!
//! Datasets have a header `x1,…,xp,y` and one observation per row with
//! `y ∈ {0, 1}`. Priors are JSON objects
//! `{"Q": <matrix> | "zero" | {"scaled_identity": q}, "v": <vector> | "zero"}`;
//! a missing key means `"zero"`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{Dataset, GaussianPrior};
use crate::symmat::SymMatrix;

pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let cols = header.len();
    if cols < 2 {
        return Err(Error::invalid(
            "dataset needs at least one covariate column and y",
        ));
    }
    for (j, name) in header.iter().take(cols - 1).enumerate() {
        if name != format!("x{}", j + 1) {
            return Err(Error::invalid(format!(
                "column {} must be named x{}, found '{name}'",
                j + 1,
                j + 1
            )));
        }
    }
    if &header[cols - 1] != "y" {
        return Err(Error::invalid(format!(
            "last column must be named y, found '{}'",
            &header[cols - 1]
        )));
    }
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |j: usize| -> Result<f64> {
            rec[j].parse::<f64>().map_err(|_| {
                Error::invalid(format!(
                    "row {}: cannot parse '{}' as a number",
                    line + 1,
                    &rec[j]
                ))
            })
        };
        let row = (0..cols - 1).map(parse).collect::<Result<Vec<f64>>>()?;
        let y = match &rec[cols - 1] {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(Error::invalid(format!(
                    "row {}: response must be 0 or 1, found '{other}'",
                    line + 1
                )))
            }
        };
        rows.push(row);
        ys.push(y);
    }
    if rows.is_empty() {
        return Err(Error::invalid("dataset has no rows"));
    }
    Dataset::from_rows(&rows, &ys)
}

pub fn read_dataset_file(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset(File::open(path)?)
}

pub fn write_dataset<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=data.p()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec: Vec<String> = data.x().row(i).iter().map(|v| v.to_string()).collect();
        rec.push(if data.y()[i] { "1" } else { "0" }.into());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum QSpec {
    Keyword(String),
    Scaled { scaled_identity: f64 },
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum VSpec {
    Keyword(String),
    Vector(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorSpec {
    #[serde(rename = "Q")]
    q: Option<QSpec>,
    v: Option<VSpec>,
}

fn keyword_zero(k: &str, what: &str) -> Result<()> {
    if k == "zero" {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{what}: expected \"zero\", found \"{k}\""
        )))
    }
}

/// Parses a prior for a model with `p` coefficients.
pub fn read_prior<R: Read>(reader: R, p: usize) -> Result<GaussianPrior> {
    let spec: PriorSpec = serde_json::from_reader(reader)?;
    let q = match spec.q {
        None => SymMatrix::zeros(p),
        Some(QSpec::Keyword(k)) => {
            keyword_zero(&k, "Q")?;
            SymMatrix::zeros(p)
        }
        Some(QSpec::Scaled { scaled_identity }) => {
            if !(scaled_identity >= 0.0) || !scaled_identity.is_finite() {
                return Err(Error::invalid("scaled_identity must be finite and >= 0"));
            }
            SymMatrix::scaled_identity(p, scaled_identity)
        }
        Some(QSpec::Matrix(rows)) => {
            if rows.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: rows.len(),
                });
            }
            let m = SymMatrix::from_rows(&rows)?;
            let asym = DMatrix::from_fn(p, p, |i, j| (rows[i][j] - rows[j][i]).abs()).max();
            if asym > 1e-12 * (1.0 + m.as_matrix().abs().max()) {
                return Err(Error::invalid("Q must be symmetric"));
            }
            m
        }
    };
    let v = match spec.v {
        None => DVector::zeros(p),
        Some(VSpec::Keyword(k)) => {
            keyword_zero(&k, "v")?;
            DVector::zeros(p)
        }
        Some(VSpec::Vector(v)) => DVector::from_vec(v),
    };
    GaussianPrior::new(q, v)
}

pub fn read_prior_file(path: impl AsRef<Path>, p: usize) -> Result<GaussianPrior> {
    read_prior(File::open(path)?, p)
}
