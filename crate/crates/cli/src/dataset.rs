//! Dataset CSV files.
//!
//! ```text
//! # manifold=spd m=2
//! id,x1,x2,x3,y11,y21,y22
//! 1,0.1,0.5,0.3,1.2,0.1,0.9
//! ```
//!
//! SPD responses store the lower triangle of `Y` row by row; sphere
//! responses store `y1,y2,y3`.

use std::path::Path;

use imave::manifold::{tri_index, tri_len, SpdMatrix, SpherePoint};
use imave::Responses;
use nalgebra::{DMatrix, SymmetricEigen, Vector3};

use crate::error::{CliError, CliResult};

/// Unit-norm tolerance for sphere responses read from text.
const UNIT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldTag {
    Spd { m: usize },
    Sphere,
}

impl ManifoldTag {
    fn header_line(self) -> String {
        match self {
            ManifoldTag::Spd { m } => format!("# manifold=spd m={m}"),
            ManifoldTag::Sphere => "# manifold=sphere".to_string(),
        }
    }

    fn response_columns(self) -> Vec<String> {
        match self {
            ManifoldTag::Spd { m } => (0..m)
                .flat_map(|k| (0..=k).map(move |l| format!("y{}{}", k + 1, l + 1)))
                .collect(),
            ManifoldTag::Sphere => (1..=3).map(|k| format!("y{k}")).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: Responses,
}

impl Dataset {
    pub fn manifold(&self) -> ManifoldTag {
        match &self.y {
            Responses::Spd(ys) => ManifoldTag::Spd {
                m: ys.first().map_or(0, |s| s.dim()),
            },
            Responses::Sphere(_) => ManifoldTag::Sphere,
        }
    }
}

fn data_err(msg: String) -> CliError {
    CliError::Data(msg)
}

fn parse_tag(line: &str) -> CliResult<ManifoldTag> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| data_err(format!("line 1: expected '# manifold=...' metadata, got '{line}'")))?;
    let mut manifold = None;
    let mut m = None;
    for part in body.split_whitespace() {
        match part.split_once('=') {
            Some(("manifold", v)) => manifold = Some(v.to_string()),
            Some(("m", v)) => {
                m = Some(v.parse::<usize>().ok().filter(|&v| v > 0).ok_or_else(|| {
                    data_err(format!("line 1: invalid matrix size m={v}"))
                })?)
            }
            _ => return Err(data_err(format!("line 1: unrecognized metadata '{part}'"))),
        }
    }
    match manifold.as_deref() {
        Some("spd") => Ok(ManifoldTag::Spd {
            m: m.ok_or_else(|| data_err("line 1: spd manifold needs m=<size>".into()))?,
        }),
        Some("sphere") => Ok(ManifoldTag::Sphere),
        Some(other) => Err(data_err(format!("line 1: unknown manifold tag '{other}'"))),
        None => Err(data_err("line 1: missing manifold=<spd|sphere>".into())),
    }
}

/// Parses dataset text.
pub fn parse_dataset(text: &str) -> CliResult<Dataset> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let tag = parse_tag(first.trim())?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(rest.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| data_err(format!("line 2: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();

    let ycols = tag.response_columns();
    if header.first().map(String::as_str) != Some("id") {
        return Err(data_err(format!(
            "line 2: column 1 must be 'id', got '{}'",
            header.first().map_or("", String::as_str)
        )));
    }
    if header.len() < 2 + ycols.len() {
        return Err(data_err(format!(
            "line 2: expected id, x1..xp and {} response columns, found {} columns",
            ycols.len(),
            header.len()
        )));
    }
    let p = header.len() - 1 - ycols.len();
    let expected: Vec<String> = std::iter::once("id".to_string())
        .chain((1..=p).map(|k| format!("x{k}")))
        .chain(ycols.iter().cloned())
        .collect();
    for (pos, (got, want)) in header.iter().zip(&expected).enumerate() {
        if got != want {
            return Err(data_err(format!("line 2: column {} is '{got}', expected '{want}'", pos + 1)));
        }
    }

    let mut ids = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    let mut spd = Vec::new();
    let mut sphere = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let line = r + 3;
        let record = record.map_err(|e| data_err(format!("line {line}: {e}")))?;
        if record.len() != expected.len() {
            return Err(data_err(format!(
                "row {row} (line {line}): expected {} columns, found {}",
                expected.len(),
                record.len()
            )));
        }
        let mut vals = Vec::with_capacity(record.len() - 1);
        for (c, field) in record.iter().enumerate().skip(1) {
            let v = field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                data_err(format!("row {row} (line {line}): column '{}' is not a number: '{field}'", expected[c]))
            })?;
            vals.push(v);
        }
        ids.push(record[0].to_string());
        xs.extend_from_slice(&vals[..p]);
        let yv = &vals[p..];
        match tag {
            ManifoldTag::Spd { m } => {
                let mat = DMatrix::from_fn(m, m, |a, b| {
                    let (k, l) = if a >= b { (a, b) } else { (b, a) };
                    yv[tri_index(k, l)]
                });
                let min_eig = SymmetricEigen::new(mat.clone()).eigenvalues.min();
                let s = SpdMatrix::new(mat).map_err(|_| {
                    data_err(format!(
                        "row {row} (line {line}): response is not positive definite (smallest eigenvalue {min_eig:e})"
                    ))
                })?;
                spd.push(s);
            }
            ManifoldTag::Sphere => {
                let v = Vector3::new(yv[0], yv[1], yv[2]);
                if (v.norm() - 1.0).abs() > UNIT_TOL {
                    return Err(data_err(format!(
                        "row {row} (line {line}): response norm {} is not 1",
                        v.norm()
                    )));
                }
                sphere.push(SpherePoint::normalize(v).map_err(|e| data_err(format!("row {row}: {e}")))?);
            }
        }
    }
    if ids.is_empty() {
        return Err(data_err("dataset has no rows".into()));
    }
    debug_assert_eq!(ycols.len(), match tag { ManifoldTag::Spd { m } => tri_len(m), ManifoldTag::Sphere => 3 });
    let x = DMatrix::from_row_slice(ids.len(), p, &xs);
    let y = match tag {
        ManifoldTag::Spd { .. } => Responses::Spd(spd),
        ManifoldTag::Sphere => Responses::Sphere(sphere),
    };
    Ok(Dataset { ids, x, y })
}

pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_dataset(&text).map_err(|e| match e {
        CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Renders a dataset; floats use the shortest exact representation.
pub fn format_dataset(data: &Dataset) -> CliResult<String> {
    let tag = data.manifold();
    let mut w = csv::Writer::from_writer(Vec::new());
    let p = data.x.ncols();
    let header: Vec<String> = std::iter::once("id".to_string())
        .chain((1..=p).map(|k| format!("x{k}")))
        .chain(tag.response_columns())
        .collect();
    let csv_err = |e: csv::Error| data_err(format!("writing dataset: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..data.x.nrows() {
        let mut rec: Vec<String> = vec![data.ids[i].clone()];
        rec.extend(data.x.row(i).iter().map(|v| v.to_string()));
        match &data.y {
            Responses::Spd(ys) => {
                let s = ys[i].matrix();
                for k in 0..s.nrows() {
                    for l in 0..=k {
                        rec.push(s[(k, l)].to_string());
                    }
                }
            }
            Responses::Sphere(ys) => rec.extend(ys[i].to_array().iter().map(|v| v.to_string())),
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| data_err(e.to_string()))?).expect("utf-8 csv");
    Ok(format!("{}\n{body}", tag.header_line()))
}

pub fn write_dataset(path: &Path, data: &Dataset) -> CliResult<()> {
    std::fs::write(path, format_dataset(data)?).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_response_parses() {
        let text = "# manifold=spd m=3\nid,x1,y11,y21,y22,y31,y32,y33\n1,0.5,1,0,1,0,0,1\n";
        let d = parse_dataset(text).unwrap();
        let Responses::Spd(ys) = &d.y else { panic!() };
        assert_eq!(ys[0].matrix(), &DMatrix::<f64>::identity(3, 3));
        assert_eq!(d.x.shape(), (1, 1));
    }

    #[test]
    fn lower_triangle_order() {
        let text = "# manifold=spd m=2\nid,x1,x2,y11,y21,y22\na,1,2,2,0.5,3\n";
        let d = parse_dataset(text).unwrap();
        let Responses::Spd(ys) = &d.y else { panic!() };
        assert_eq!(ys[0].matrix()[(1, 0)], 0.5);
        assert_eq!(ys[0].matrix()[(0, 1)], 0.5);
        assert_eq!(ys[0].matrix()[(1, 1)], 3.0);
    }

    #[test]
    fn malformed_header_names_column() {
        let text = "# manifold=spd m=2\nid,x1,z2,y11,y21,y22\n1,0,0,1,0,1\n";
        let err = parse_dataset(text).unwrap_err().to_string();
        assert!(err.contains("'z2'") && err.contains("'x2'"), "{err}");
    }

    #[test]
    fn non_spd_row_reports_row_and_eigenvalue() {
        let text = "# manifold=spd m=2\nid,x1,y11,y21,y22\n1,0,1,0,1\n2,0,1,2,1\n";
        let err = parse_dataset(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2") && msg.contains("smallest eigenvalue -1e0"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn wrong_column_count_and_unknown_tag() {
        let text = "# manifold=sphere\nid,x1,y1,y2,y3\n1,0,0,0\n";
        assert!(parse_dataset(text).unwrap_err().to_string().contains("expected 5 columns, found 4"));
        let text = "# manifold=torus\nid,x1,y1\n";
        assert!(parse_dataset(text).unwrap_err().to_string().contains("unknown manifold tag 'torus'"));
        let text = "# manifold=sphere\nid,x1,y1,y2,y3\n1,0,0,0,2\n";
        assert!(parse_dataset(text).unwrap_err().to_string().contains("not 1"));
    }
}
