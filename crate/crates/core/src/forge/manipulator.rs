//! Robotic-manipulator speed planning with `p` joint constraints per step:
//! `w_i <= f_ji w_{i+1} + c_ji` and `w_{i+1} <= b_ki w_i + d_ki`.

use thiserror::Error;

use crate::linear::{InstanceMeta, LinearGlbProblem, PieceData, ProblemError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManipulatorError {
    #[error("{what} has shape {found:?}, expected {expected:?}")]
    Shape {
        what: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("{what}[{row}][{col}] = {value} is negative")]
    Negative {
        what: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Coefficient arrays of shape `(p, n − 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipulatorCoefficients {
    pub f: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
}

/// `p` forward pieces followed by `p` backward pieces; `U = u`. Rows a
/// piece leaves unconstrained get `b_i = u_i`.
pub fn manipulator_problem(
    coeffs: &ManipulatorCoefficients,
    u: &[f64],
) -> Result<LinearGlbProblem, ManipulatorError> {
    let n = u.len();
    let p = coeffs.f.len();
    let expected = (p, n.saturating_sub(1));
    for (what, arr) in [
        ("f", &coeffs.f),
        ("c", &coeffs.c),
        ("b", &coeffs.b),
        ("d", &coeffs.d),
    ] {
        let found = (arr.len(), arr.first().map_or(expected.1, Vec::len));
        if found != expected || arr.iter().any(|row| row.len() != expected.1) {
            return Err(ManipulatorError::Shape {
                what,
                expected,
                found,
            });
        }
        for (row, values) in arr.iter().enumerate() {
            if let Some((col, &value)) = values.iter().enumerate().find(|(_, &v)| v < 0.0) {
                return Err(ManipulatorError::Negative {
                    what,
                    row,
                    col,
                    value,
                });
            }
        }
    }
    let mut pieces = Vec::with_capacity(2 * p);
    for j in 0..p {
        let mut piece = PieceData::new(Vec::with_capacity(n), u.to_vec());
        for i in 0..n.saturating_sub(1) {
            piece.triplets.push((i, i + 1, coeffs.f[j][i]));
            piece.b[i] = coeffs.c[j][i];
        }
        pieces.push(piece);
    }
    for k in 0..p {
        let mut piece = PieceData::new(Vec::with_capacity(n), u.to_vec());
        for i in 0..n.saturating_sub(1) {
            piece.triplets.push((i + 1, i, coeffs.b[k][i]));
            piece.b[i + 1] = coeffs.d[k][i];
        }
        pieces.push(piece);
    }
    let problem = LinearGlbProblem::new(n, pieces, u.to_vec())?;
    Ok(problem.with_meta(InstanceMeta {
        generator: "manipulator".into(),
        seed: None,
        params: serde_json::json!({ "n": n, "p": p }),
    }))
}
