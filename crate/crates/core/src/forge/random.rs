//! Random instances of the linear class built on random graphs.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::graph::{gen_graph, GraphFamily, GraphParamError, RandomGraph};
use super::rng::{derive_seed, substream};
use crate::linear::{InstanceMeta, LinearGlbProblem, PieceData, ProblemError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RandomProblemError {
    #[error("graph {piece} has {found} nodes, expected {expected}")]
    Shape {
        piece: usize,
        expected: usize,
        found: usize,
    },
    #[error("{0} must be finite and nonnegative")]
    Parameter(&'static str),
    #[error(transparent)]
    Graph(#[from] GraphParamError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Bounds for the uniform draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomScales {
    pub m_a: f64,
    pub m_b: f64,
    pub u: f64,
}

impl Default for RandomScales {
    fn default() -> Self {
        Self {
            m_a: 0.5,
            m_b: 1.0,
            u: 1e5,
        }
    }
}

/// `A_ℓ` takes the sparsity of graph `ℓ` with both orientations of every
/// edge drawn independently from `[0, M_A)`; `b_ℓ` is drawn from `[0, M_b)`.
/// Piece `ℓ` draws from stream `ℓ` of `seed`.
pub fn random_linear_problem(
    graphs: &[RandomGraph],
    scales: RandomScales,
    seed: u64,
) -> Result<LinearGlbProblem, RandomProblemError> {
    for (name, v) in [("M_A", scales.m_a), ("M_b", scales.m_b), ("U", scales.u)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(RandomProblemError::Parameter(name));
        }
    }
    let n = graphs.first().map_or(0, |g| g.n);
    let mut pieces = Vec::with_capacity(graphs.len());
    for (piece, g) in graphs.iter().enumerate() {
        if g.n != n {
            return Err(RandomProblemError::Shape {
                piece,
                expected: n,
                found: g.n,
            });
        }
        let mut rng = substream(seed, piece as u64);
        let mut triplets = Vec::with_capacity(2 * g.edge_count());
        for &(u, v) in &g.edges {
            triplets.push((u, v, rng.random::<f64>() * scales.m_a));
            triplets.push((v, u, rng.random::<f64>() * scales.m_a));
        }
        let b = (0..n).map(|_| rng.random::<f64>() * scales.m_b).collect();
        pieces.push(PieceData::new(triplets, b));
    }
    Ok(LinearGlbProblem::new(n, pieces, vec![scales.u; n])?)
}

/// `L` graphs of one family (graph `ℓ` seeded by `derive_seed(seed, ℓ)`)
/// turned into a problem with [`random_linear_problem`].
pub fn family_instance(
    family: GraphFamily,
    n: usize,
    pieces: usize,
    scales: RandomScales,
    seed: u64,
) -> Result<LinearGlbProblem, RandomProblemError> {
    let params = family.default_params(n);
    let graphs = (0..pieces)
        .map(|l| gen_graph(params, n, derive_seed(seed, l as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let p = random_linear_problem(&graphs, scales, seed)?;
    Ok(p.with_meta(InstanceMeta {
        generator: family.as_str().to_string(),
        seed: Some(seed),
        params: serde_json::json!({
            "n": n,
            "L": pieces,
            "graph": params,
            "M_A": scales.m_a,
            "M_b": scales.m_b,
            "U": scales.u,
        }),
    }))
}
