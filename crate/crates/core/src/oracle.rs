//! Reference answers computed independently of the solvers: a long full
//! iteration of the preconditioned map, an ε-solution check that rebuilds
//! `ḡ` from the stored triplets, and exhaustive grid search for `n <= 3`.

use thiserror::Error;

use crate::linear::LinearGlbProblem;

pub const ORACLE_TOLERANCE: f64 = 1e-12;
pub const ORACLE_MAX_ITER: u64 = 200_000;
pub const BRUTE_FORCE_MAX_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub x_star: Vec<f64>,
    /// `‖x − ĝ(x)‖∞` at `x_star`.
    pub residual: f64,
    pub iterations: u64,
    /// `residual <= 1e-12` and `γ̂ < 1`.
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("brute force is limited to n <= {BRUTE_FORCE_MAX_DIM}, got n = {0}")]
    TooLarge(usize),
    #[error("grid step must be positive and finite, got {0}")]
    Step(f64),
    #[error("brute force needs a finite box, U[{0}] is not finite")]
    Unbounded(usize),
}

/// `glb_ℓ {A_ℓ x + b_ℓ} ∧ U`, accumulated triplet by triplet.
pub fn glb_from_scratch(p: &LinearGlbProblem, x: &[f64]) -> Vec<f64> {
    let mut out = p.cap().to_vec();
    for piece in p.pieces() {
        let mut eta = piece.offsets().to_vec();
        for (r, c, v) in piece.matrix().triplets() {
            eta[r] += v * x[c];
        }
        for (o, e) in out.iter_mut().zip(eta) {
            *o = o.min(e);
        }
    }
    out
}

/// Iterates from `U` until the residual reaches `tol`, then keeps going
/// while it still shrinks so the result sits at floating-point stationarity.
fn iterate(p: &LinearGlbProblem, tol: f64, max_iter: u64) -> (Vec<f64>, f64, u64) {
    let mut x = p.cap().to_vec();
    let mut iterations = 0;
    let mut next = glb_from_scratch(p, &x);
    let mut residual = inf_dist(&x, &next);
    while iterations < max_iter && residual > 0.0 {
        let after = glb_from_scratch(p, &next);
        let r = inf_dist(&next, &after);
        if residual <= tol && r >= residual {
            break;
        }
        x = std::mem::replace(&mut next, after);
        residual = r;
        iterations += 1;
    }
    (x, residual, iterations)
}

fn inf_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Full `ĝ` iteration from `U` until `‖x − ĝ(x)‖∞ <= 1e-12`.
pub fn reference_solve(p: &LinearGlbProblem) -> OracleResult {
    let pre = p.precondition();
    let (x_star, residual, iterations) = iterate(&pre.problem, ORACLE_TOLERANCE, ORACLE_MAX_ITER);
    OracleResult {
        certified: residual <= ORACLE_TOLERANCE && pre.gamma_hat < 1.0,
        x_star,
        residual,
        iterations,
    }
}

/// Same as [`reference_solve`] on `ḡ` itself.
pub fn reference_solve_plain(p: &LinearGlbProblem) -> OracleResult {
    let gamma = p.contraction_rates().gamma;
    let (x_star, residual, iterations) = iterate(p, ORACLE_TOLERANCE, ORACLE_MAX_ITER);
    OracleResult {
        certified: residual <= ORACLE_TOLERANCE && gamma < 1.0,
        x_star,
        residual,
        iterations,
    }
}

/// `a <= x <= ḡ(x)` with no tolerance.
pub fn is_feasible(p: &LinearGlbProblem, x: &[f64]) -> bool {
    let g = glb_from_scratch(p, x);
    x.iter()
        .zip(p.lower())
        .zip(&g)
        .all(|((xi, ai), gi)| ai <= xi && xi <= gi)
}

/// `x >= a` and `‖x − ḡ(x)‖∞ <= eps`.
pub fn verify_epsilon_solution(p: &LinearGlbProblem, x: &[f64], eps: f64) -> bool {
    x.len() == p.dim()
        && x.iter().zip(p.lower()).all(|(xi, ai)| xi >= ai)
        && inf_dist(x, &glb_from_scratch(p, x)) <= eps
}

/// Join of all feasible points of the grid `{a + k·step} ∩ [a, U]ⁿ`, or
/// `None` if none is feasible.
pub fn brute_force_max(p: &LinearGlbProblem, step: f64) -> Result<Option<Vec<f64>>, OracleError> {
    let n = p.dim();
    if n > BRUTE_FORCE_MAX_DIM {
        return Err(OracleError::TooLarge(n));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(OracleError::Step(step));
    }
    if let Some(i) = p.cap().iter().position(|u| !u.is_finite()) {
        return Err(OracleError::Unbounded(i));
    }
    let lower = p.lower();
    let counts: Vec<usize> = (0..n)
        .map(|i| {
            let span = p.cap()[i] - lower[i];
            if span < 0.0 {
                0
            } else {
                (span / step + 1e-9).floor() as usize + 1
            }
        })
        .collect();
    if counts.contains(&0) {
        return Ok(None);
    }
    // dense copies: (matrix, offsets) per piece
    let dense: Vec<(Vec<f64>, Vec<f64>)> = p
        .pieces()
        .iter()
        .map(|piece| {
            let mut a = vec![0.0; n * n];
            for (r, c, v) in piece.matrix().triplets() {
                a[r * n + c] += v;
            }
            (a, piece.offsets().to_vec())
        })
        .collect();
    let cap = p.cap();
    let feasible = |x: &[f64]| {
        (0..n).all(|i| {
            x[i] <= cap[i]
                && dense.iter().all(|(a, b)| {
                    let mut e = b[i];
                    for (c, xc) in x.iter().enumerate() {
                        e += a[i * n + c] * xc;
                    }
                    x[i] <= e
                })
        })
    };
    let mut join: Option<Vec<f64>> = None;
    let mut k = vec![0usize; n];
    let mut x = lower.to_vec();
    loop {
        for i in 0..n {
            x[i] = lower[i] + k[i] as f64 * step;
        }
        if feasible(&x) {
            match join.as_mut() {
                Some(j) => j.iter_mut().zip(&x).for_each(|(a, b)| *a = a.max(*b)),
                None => join = Some(x.clone()),
            }
        }
        // odometer over the grid
        let mut axis = 0;
        loop {
            if axis == n {
                return Ok(join);
            }
            k[axis] += 1;
            if k[axis] < counts[axis] {
                break;
            }
            k[axis] = 0;
            axis += 1;
        }
    }
}
