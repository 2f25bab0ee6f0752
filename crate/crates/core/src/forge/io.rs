//! JSON instance files:
//! `{n, L, pieces: [{A: [[row, col, value], ...], b}], U, a, meta}` with
//! 0-based indices. Floats are written in shortest round-trip form, so a
//! save/load cycle reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linear::{InstanceMeta, LinearGlbProblem, PieceData, ProblemError};

#[derive(Debug, Error)]
pub enum InstanceIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed instance: {0}")]
    Json(#[from] serde_json::Error),
    #[error("L = {declared} but {found} pieces are listed")]
    PieceCount { declared: usize, found: usize },
    #[error("invalid instance: {0}")]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Serialize, Deserialize)]
struct PieceFile {
    #[serde(rename = "A")]
    a: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    n: usize,
    #[serde(rename = "L")]
    l: usize,
    pieces: Vec<PieceFile>,
    #[serde(rename = "U")]
    u: Vec<f64>,
    #[serde(default)]
    a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<InstanceMeta>,
}

pub fn instance_to_json(p: &LinearGlbProblem) -> String {
    let file = InstanceFile {
        n: p.dim(),
        l: p.piece_count(),
        pieces: p
            .pieces()
            .iter()
            .map(|piece| PieceFile {
                a: piece.matrix().triplets().collect(),
                b: piece.offsets().to_vec(),
            })
            .collect(),
        u: p.cap().to_vec(),
        a: Some(p.lower().to_vec()),
        meta: p.meta.clone(),
    };
    serde_json::to_string_pretty(&file).expect("instance serializes")
}

pub fn instance_from_json(text: &str) -> Result<LinearGlbProblem, InstanceIoError> {
    read_instance(text.as_bytes())
}

pub fn read_instance<R: Read>(reader: R) -> Result<LinearGlbProblem, InstanceIoError> {
    let file: InstanceFile = serde_json::from_reader(reader)?;
    if file.l != file.pieces.len() {
        return Err(InstanceIoError::PieceCount {
            declared: file.l,
            found: file.pieces.len(),
        });
    }
    let n = file.n;
    let pieces = file
        .pieces
        .into_iter()
        .map(|p| PieceData::new(p.a, p.b))
        .collect();
    let lower = file.a.unwrap_or_else(|| vec![0.0; n]);
    let mut problem = LinearGlbProblem::with_lower(n, pieces, file.u, lower)?;
    problem.meta = file.meta;
    Ok(problem)
}

pub fn write_instance<W: Write>(p: &LinearGlbProblem, mut w: W) -> std::io::Result<()> {
    w.write_all(instance_to_json(p).as_bytes())?;
    w.write_all(b"\n")
}

/// Reads and validates; construction warnings are available on the result.
pub fn load_instance(path: impl AsRef<Path>) -> Result<LinearGlbProblem, InstanceIoError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| InstanceIoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_instance(BufReader::new(file))
}

pub fn save_instance(p: &LinearGlbProblem, path: impl AsRef<Path>) -> Result<(), InstanceIoError> {
    let path = path.as_ref();
    let io_err = |source| InstanceIoError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    write_instance(p, &mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::ConstructionWarning;

    fn two_var() -> LinearGlbProblem {
        LinearGlbProblem::new(
            2,
            vec![PieceData::new(
                vec![(0, 1, 0.5), (1, 0, 0.5)],
                vec![1.0, 1.0],
            )],
            vec![10.0, 10.0],
        )
        .unwrap()
    }

    #[test]
    fn round_trip() {
        let p = two_var();
        let back = instance_from_json(&instance_to_json(&p)).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn round_trip_awkward_floats_through_file() {
        let p = LinearGlbProblem::new(
            3,
            vec![PieceData::new(
                vec![(0, 1, 0.1 + 0.2), (2, 0, 1.0 / 3.0), (1, 2, 5e-324)],
                vec![std::f64::consts::PI, 1e-300, 0.7],
            )],
            vec![1e5, 2.0f64.sqrt(), 0.0],
        )
        .unwrap()
        .with_meta(InstanceMeta {
            generator: "test".into(),
            seed: Some(u64::MAX),
            params: serde_json::json!({"x": 1}),
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        save_instance(&p, &path).unwrap();
        let back = load_instance(&path).unwrap();
        assert_eq!(back, p);
        for (x, y) in back.pieces()[0]
            .matrix()
            .triplets()
            .zip(p.pieces()[0].matrix().triplets())
        {
            assert_eq!(x.2.to_bits(), y.2.to_bits());
        }
    }

    #[test]
    fn negative_entry_is_located() {
        let text = r#"{"n":2,"L":1,"pieces":[{"A":[[0,1,-0.1]],"b":[0,0]}],"U":[1,1],"a":[0,0]}"#;
        match instance_from_json(text) {
            Err(InstanceIoError::Problem(ProblemError::NegativeEntry {
                piece, row, col, ..
            })) => {
                assert_eq!((piece, row, col), (0, 0, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn redundant_row_warns() {
        let text =
            r#"{"n":2,"L":1,"pieces":[{"A":[[0,0,1.2],[1,0,0.5]],"b":[0.3,0.1]}],"U":[4,5]}"#;
        let p = instance_from_json(text).unwrap();
        assert!(matches!(
            p.warnings(),
            [ConstructionWarning::RedundantRow {
                piece: 0,
                row: 0,
                ..
            }]
        ));
        assert_eq!(p.pieces()[0].offsets(), &[4.0, 0.1]);
    }

    #[test]
    fn malformed_documents() {
        assert!(matches!(
            instance_from_json("{"),
            Err(InstanceIoError::Json(_))
        ));
        assert!(matches!(
            instance_from_json(r#"{"n":1,"L":2,"pieces":[],"U":[1]}"#),
            Err(InstanceIoError::PieceCount { .. })
        ));
        assert!(matches!(
            instance_from_json(r#"{"n":2,"L":0,"pieces":[],"U":[1]}"#),
            Err(InstanceIoError::Problem(ProblemError::Shape { .. }))
        ));
        assert!(load_instance("/nonexistent/instance.json").is_err());
    }
}
