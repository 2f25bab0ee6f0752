//! The linear subclass: `0 <= x <= glb_ℓ {A_ℓ x + b_ℓ}`, `x <= U`, with
//! nonnegative `A_ℓ` and `b_ℓ`.
//!
//! `ḡ(x) = glb_ℓ {A_ℓ x + b_ℓ} ∧ U` is the plain map. Moving the diagonal
//! to the left-hand side gives the preconditioned map
//! `ĝ(x) = glb_ℓ {Â_ℓ x + b̂_ℓ} ∧ U` with `Â_ℓ = (I − D_ℓ)⁻¹(A_ℓ − D_ℓ)` and
//! `b̂_ℓ = (I − D_ℓ)⁻¹ b_ℓ`. Both share the same greatest fixed point, and
//! `ĝ` contracts at least as fast as `ḡ`.

use std::io::{self, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{
    check_start, check_tolerance, deadline_passed, default_max_iter, dominates, fixed_point_run,
    inf_norm_diff, LoopObserver, Method, MonotoneMap, OpCounts, SolveError, SolveOptions,
    SolveReport, FALLBACK_MAX_ITER,
};
use crate::queue::{Frontier, PolicyTag};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("{what} has length {found}, expected {expected}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("piece {piece}: entry ({row}, {col}) lies outside the {n}x{n} matrix")]
    IndexOutOfBounds {
        piece: usize,
        row: usize,
        col: usize,
        n: usize,
    },
    #[error("piece {piece}: negative entry {value} at (row {row}, col {col})")]
    NegativeEntry {
        piece: usize,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("piece {piece}: negative offset {value} at row {row}")]
    NegativeOffset {
        piece: usize,
        row: usize,
        value: f64,
    },
    #[error("negative cap {value} at index {index}")]
    NegativeCap { index: usize, value: f64 },
    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: String, index: usize },
}

/// Something the constructor changed in the input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ConstructionWarning {
    /// A row with diagonal `>= 1` is implied by `x >= 0` and was replaced
    /// by the row `x_i <= U_i`.
    RedundantRow {
        piece: usize,
        row: usize,
        diagonal: f64,
    },
}

impl std::fmt::Display for ConstructionWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConstructionWarning::RedundantRow {
                piece,
                row,
                diagonal,
            } => write!(
                f,
                "piece {piece}, row {row}: diagonal {diagonal} >= 1, row replaced by the cap"
            ),
        }
    }
}

/// Provenance recorded with generated instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct InstanceMeta {
    pub generator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: serde_json::Value,
}

/// Input for one affine piece: `(row, col, value)` triplets and offsets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PieceData {
    pub triplets: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
}

impl PieceData {
    pub fn new(triplets: Vec<(usize, usize, f64)>, b: Vec<f64>) -> Self {
        Self { triplets, b }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    a: CsrMatrix,
    /// Column view of `a`, for enumerating `{j : a_ji ≠ 0}`.
    a_t: CsrMatrix,
    b: Vec<f64>,
}

impl Piece {
    fn new(a: CsrMatrix, b: Vec<f64>) -> Self {
        let a_t = a.transpose();
        Self { a, a_t, b }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn columns(&self) -> &CsrMatrix {
        &self.a_t
    }

    pub fn offsets(&self) -> &[f64] {
        &self.b
    }

    #[inline]
    fn affine(&self, i: usize, x: &[f64]) -> f64 {
        self.a.row_dot(i, x) + self.b[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionRates {
    /// `max_ℓ ‖A_ℓ‖∞`.
    pub gamma: f64,
    /// `max_{ℓ,i} (γ − [A_ℓ]_ii) / (1 − [A_ℓ]_ii)`.
    pub gamma_hat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGlbProblem {
    n: usize,
    pieces: Vec<Piece>,
    cap: Vec<f64>,
    lower: Vec<f64>,
    warnings: Vec<ConstructionWarning>,
    pub meta: Option<InstanceMeta>,
}

impl LinearGlbProblem {
    /// Validates and assembles a problem with lower bound `a = 0`.
    pub fn new(n: usize, pieces: Vec<PieceData>, cap: Vec<f64>) -> Result<Self, ProblemError> {
        Self::with_lower(n, pieces, cap, vec![0.0; n])
    }

    pub fn with_lower(
        n: usize,
        pieces: Vec<PieceData>,
        cap: Vec<f64>,
        lower: Vec<f64>,
    ) -> Result<Self, ProblemError> {
        check_len("U", n, cap.len())?;
        check_len("a", n, lower.len())?;
        check_finite("U", &cap)?;
        check_finite("a", &lower)?;
        if let Some((index, &value)) = cap.iter().enumerate().find(|(_, &u)| u < 0.0) {
            return Err(ProblemError::NegativeCap { index, value });
        }
        let mut warnings = Vec::new();
        let mut built = Vec::with_capacity(pieces.len());
        for (piece, data) in pieces.into_iter().enumerate() {
            check_len("b", n, data.b.len())?;
            check_finite(&format!("b of piece {piece}"), &data.b)?;
            for &(row, col, value) in &data.triplets {
                if row >= n || col >= n {
                    return Err(ProblemError::IndexOutOfBounds { piece, row, col, n });
                }
                if !value.is_finite() {
                    return Err(ProblemError::NonFinite {
                        what: format!("A of piece {piece}"),
                        index: row * n + col,
                    });
                }
                if value < 0.0 {
                    return Err(ProblemError::NegativeEntry {
                        piece,
                        row,
                        col,
                        value,
                    });
                }
            }
            if let Some((row, &value)) = data.b.iter().enumerate().find(|(_, &v)| v < 0.0) {
                return Err(ProblemError::NegativeOffset { piece, row, value });
            }
            let mut a = CsrMatrix::from_triplets(n, &data.triplets);
            let mut b = data.b;
            let redundant: Vec<usize> = (0..n).filter(|&i| a.diagonal(i) >= 1.0).collect();
            if !redundant.is_empty() {
                for &row in &redundant {
                    warnings.push(ConstructionWarning::RedundantRow {
                        piece,
                        row,
                        diagonal: a.diagonal(row),
                    });
                    b[row] = cap[row];
                }
                a = a.filter(|r, _, _| !redundant.contains(&r));
            }
            built.push(Piece::new(a, b));
        }
        Ok(Self {
            n,
            pieces: built,
            cap,
            lower,
            warnings,
            meta: None,
        })
    }

    pub fn with_meta(mut self, meta: InstanceMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn piece_count(&self) -> usize {
        self.pieces.len()
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn cap(&self) -> &[f64] {
        &self.cap
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn warnings(&self) -> &[ConstructionWarning] {
        &self.warnings
    }

    pub fn nnz(&self) -> usize {
        self.pieces.iter().map(|p| p.a.nnz()).sum()
    }

    /// Multiplications needed to evaluate component `i` of the map.
    pub fn row_cost(&self, i: usize) -> u64 {
        self.pieces.iter().map(|p| p.a.row_nnz(i) as u64).sum()
    }

    pub fn has_zero_diagonal(&self) -> bool {
        self.pieces
            .iter()
            .all(|p| (0..self.n).all(|i| p.a.diagonal(i) == 0.0))
    }

    /// `ḡ_i(x)`.
    pub fn glb_component(&self, i: usize, x: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.affine(i, x))
            .fold(self.cap[i], f64::min)
    }

    /// `ḡ(x) = glb_ℓ {A_ℓ x + b_ℓ} ∧ U`.
    pub fn glb_eval(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.glb_component(i, x)).collect()
    }

    /// [`glb_eval`](Self::glb_eval), adding the multiplications to `mults`.
    pub fn glb_eval_counted(&self, x: &[f64], mults: &mut u64) -> Vec<f64> {
        *mults += self.nnz() as u64;
        self.glb_eval(x)
    }

    pub fn contraction_rates(&self) -> ContractionRates {
        let gamma = self
            .pieces
            .iter()
            .flat_map(|p| (0..self.n).map(move |i| p.a.row_sum(i)))
            .fold(0.0, f64::max);
        let gamma_hat = self
            .pieces
            .iter()
            .flat_map(|p| (0..self.n).map(move |i| p.a.diagonal(i)))
            .map(|d| (gamma - d) / (1.0 - d))
            .fold(0.0, f64::max);
        ContractionRates { gamma, gamma_hat }
    }

    /// Moves each diagonal to the left-hand side and rescales its row.
    pub fn precondition(&self) -> PreconditionedProblem {
        let rates = self.contraction_rates();
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let scale: Vec<f64> = (0..self.n).map(|i| 1.0 / (1.0 - p.a.diagonal(i))).collect();
                let a =
                    p.a.filter(|r, c, _| r != c)
                        .map_values(|r, _, v| v * scale[r]);
                let b = p.b.iter().zip(&scale).map(|(b, s)| b * s).collect();
                Piece::new(a, b)
            })
            .collect();
        PreconditionedProblem {
            problem: Self {
                n: self.n,
                pieces,
                cap: self.cap.clone(),
                lower: self.lower.clone(),
                warnings: Vec::new(),
                meta: self.meta.clone(),
            },
            gamma: rates.gamma,
            gamma_hat: rates.gamma_hat,
        }
    }

    /// `N(i)`: rows of any piece with a nonzero in column `i`, ascending.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); self.n];
        for (i, list) in out.iter_mut().enumerate() {
            for p in &self.pieces {
                list.extend_from_slice(p.a_t.row_cols(i));
            }
            list.sort_unstable();
            list.dedup();
        }
        out
    }

    pub fn map(&self) -> GlbMap<'_> {
        GlbMap::new(self)
    }

    /// One row `x_i − Σ_j a_ij x_j − b_i <= 0` per `(ℓ, i)`, then `x_i − U_i <= 0`.
    pub fn to_lp_form(&self) -> LpForm {
        let mut rows = Vec::with_capacity(self.n * (self.pieces.len() + 1));
        for (l, p) in self.pieces.iter().enumerate() {
            for i in 0..self.n {
                let mut coeffs = vec![(i, 1.0 - p.a.diagonal(i))];
                coeffs.extend(p.a.row(i).filter(|&(c, _)| c != i).map(|(c, v)| (c, -v)));
                coeffs.sort_by_key(|&(c, _)| c);
                rows.push(LpRow {
                    name: format!("c_{}_{}", l + 1, i + 1),
                    coeffs,
                    d: -p.b[i],
                });
            }
        }
        for i in 0..self.n {
            rows.push(LpRow {
                name: format!("u_{}", i + 1),
                coeffs: vec![(i, 1.0)],
                d: -self.cap[i],
            });
        }
        LpForm {
            n: self.n,
            rows,
            cap: self.cap.clone(),
            lower: self.lower.clone(),
        }
    }

    /// Smallest `Δ` with `[A_ℓ]_ii >= (1 − Δ)γ` and off-diagonal row sums
    /// `<= Δγ` for every row and piece, where `γ = max_ℓ ‖A_ℓ‖∞`.
    pub fn dominance(&self) -> Option<Dominance> {
        let gamma = self.contraction_rates().gamma;
        if gamma <= 0.0 || self.pieces.is_empty() {
            return None;
        }
        let delta = self
            .pieces
            .iter()
            .flat_map(|p| {
                (0..self.n).map(move |i| {
                    let d = p.a.diagonal(i);
                    let off = p.a.row_sum(i) - d;
                    (1.0 - d / gamma).max(off / gamma)
                })
            })
            .fold(0.0, f64::max);
        Some(Dominance { gamma, delta })
    }
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), ProblemError> {
    if expected == found {
        Ok(())
    } else {
        Err(ProblemError::Shape {
            what,
            expected,
            found,
        })
    }
}

fn check_finite(what: &str, v: &[f64]) -> Result<(), ProblemError> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(ProblemError::NonFinite {
            what: what.to_string(),
            index,
        }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dominance {
    pub gamma: f64,
    pub delta: f64,
}

impl Dominance {
    /// Upper end of the `Δ` range on which the preconditioned map is
    /// strictly closer to `x+` after one step than the plain map.
    pub fn delta_limit(gamma: f64) -> f64 {
        ((1.0 - gamma).sqrt() - (1.0 - gamma)) / gamma
    }

    pub fn guarantees_faster_preconditioning(&self) -> bool {
        self.gamma < 1.0 && self.delta < 0.5 && self.delta < Self::delta_limit(self.gamma)
    }
}

/// `ḡ` after preconditioning, together with the source's rates.
#[derive(Debug, Clone, PartialEq)]
pub struct PreconditionedProblem {
    /// Same cap and lower bound; every diagonal is zero.
    pub problem: LinearGlbProblem,
    pub gamma: f64,
    pub gamma_hat: f64,
}

/// [`MonotoneMap`] view of `ḡ`.
#[derive(Debug, Clone)]
pub struct GlbMap<'a> {
    problem: &'a LinearGlbProblem,
    deps: Vec<Vec<usize>>,
}

impl<'a> GlbMap<'a> {
    pub fn new(problem: &'a LinearGlbProblem) -> Self {
        let deps = (0..problem.n)
            .map(|i| {
                let mut d: Vec<usize> = problem
                    .pieces
                    .iter()
                    .flat_map(|p| p.a.row_cols(i).iter().copied())
                    .collect();
                d.sort_unstable();
                d.dedup();
                d
            })
            .collect();
        Self { problem, deps }
    }
}

impl MonotoneMap for GlbMap<'_> {
    fn dim(&self) -> usize {
        self.problem.n
    }

    fn eval_component(&self, i: usize, x: &[f64]) -> f64 {
        self.problem.glb_component(i, x)
    }

    fn dependencies(&self, i: usize) -> &[usize] {
        &self.deps[i]
    }

    fn cap(&self) -> &[f64] {
        &self.problem.cap
    }

    fn component_cost(&self, i: usize) -> u64 {
        self.problem.row_cost(i)
    }
}

/// Selective update on `ḡ` with the affine values `η_ℓ = A_ℓ x + b_ℓ`
/// maintained incrementally. `x0` defaults to `U`.
pub fn selective_update_linear(
    p: &LinearGlbProblem,
    x0: Option<&[f64]>,
    eps: f64,
    policy: PolicyTag,
) -> Result<SolveReport, SolveError> {
    let opts = SolveOptions::new(eps, policy);
    selective_linear_with(p, x0, &opts, &mut ())
}

/// [`selective_update_linear`] on the preconditioned map `ĝ`.
pub fn selective_update_preconditioned(
    p: &LinearGlbProblem,
    x0: Option<&[f64]>,
    eps: f64,
    policy: PolicyTag,
) -> Result<SolveReport, SolveError> {
    let opts = SolveOptions::new(eps, policy);
    solve_linear(p, Method::SelectivePrecond, x0, &opts)
}

/// Runs any of the four methods on `p`.
pub fn solve_linear(
    p: &LinearGlbProblem,
    method: Method,
    x0: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<SolveReport, SolveError> {
    solve_linear_observed(p, method, x0, opts, &mut ())
}

/// [`solve_linear`] with a loop observer; fixed-point methods never call it.
pub fn solve_linear_observed<O: LoopObserver + ?Sized>(
    p: &LinearGlbProblem,
    method: Method,
    x0: Option<&[f64]>,
    opts: &SolveOptions,
    observer: &mut O,
) -> Result<SolveReport, SolveError> {
    let start = Instant::now();
    let pre;
    let (target, rate) = if method.is_preconditioned() {
        pre = p.precondition();
        (&pre.problem, pre.gamma_hat)
    } else {
        (p, p.contraction_rates().gamma)
    };
    let x0 = x0.unwrap_or(&p.cap);
    let mut report = match method {
        Method::FixedPlain | Method::FixedPrecond => {
            check_start(x0, p.n)?;
            let max_iter = opts
                .max_iter
                .or_else(|| default_max_iter(x0, &p.lower, opts.eps, rate))
                .unwrap_or(FALLBACK_MAX_ITER);
            fixed_point_run(
                &target.map(),
                &target.lower,
                x0,
                opts.eps,
                max_iter,
                opts.deadline,
                method,
            )?
        }
        Method::SelectivePlain | Method::SelectivePrecond => {
            selective_linear_with(target, Some(x0), opts, observer)?
        }
    };
    report.method = method;
    report.contraction_rate = Some(rate);
    report.wall_time = start.elapsed();
    Ok(report)
}

const ETA_REFRESH: u64 = 1_000_000;

/// Selective update for the linear class on the map defined by `p` as given
/// (no preconditioning). Rows with a nonzero diagonal make `i ∈ N(i)`, in
/// which case `ξ_i` is recomputed after the update instead of zeroed.
pub fn selective_linear_with<O: LoopObserver + ?Sized>(
    p: &LinearGlbProblem,
    x0: Option<&[f64]>,
    opts: &SolveOptions,
    observer: &mut O,
) -> Result<SolveReport, SolveError> {
    let eps = opts.eps;
    check_tolerance(eps)?;
    let n = p.n;
    let x0 = x0.unwrap_or(&p.cap);
    check_start(x0, n)?;
    let start = Instant::now();
    let mut counts = OpCounts::default();
    let mut x = x0.to_vec();

    // η is stored row-major as eta[j * L + ℓ]
    let pieces = p.pieces.len();
    let mut eta = vec![0.0; n * pieces];
    for (l, piece) in p.pieces.iter().enumerate() {
        for j in 0..n {
            eta[j * pieces + l] = piece.affine(j, &x);
        }
    }
    counts.scalar_multiplications += p.nnz() as u64;
    let cap = &p.cap;
    let lowest = |eta: &[f64], j: usize| {
        eta[j * pieces..(j + 1) * pieces]
            .iter()
            .fold(cap[j], |m, &e| m.min(e))
    };
    let columns = FlatColumns::new(p);

    let mut xi = vec![0.0; n];
    for i in 0..n {
        xi[i] = x[i] - lowest(&eta, i);
        if xi[i] < -eps {
            return Err(SolveError::Precondition {
                index: i,
                residual: xi[i],
            });
        }
    }
    let mut frontier = Frontier::new(opts.policy, n, opts.queue);
    for i in 0..n {
        if xi[i] > eps {
            frontier.push(i, x[i], xi[i]);
        }
    }

    let mut max_drift: Option<f64> = opts.eta_check_interval.map(|_| 0.0);
    loop {
        observer.loop_head(&x, &xi);
        let Some(i) = frontier.pop() else { break };
        counts.dequeues += 1;
        if deadline_passed(opts.deadline, counts.dequeues) {
            return Err(SolveError::TimedOut(start.elapsed()));
        }
        // x_i − ξ_i, taken from η directly so that η and x stay ordered
        let updated = lowest(&eta, i);
        let delta = x[i] - updated;
        x[i] = updated;
        xi[i] = 0.0;
        counts.component_updates += 1;
        let entries = columns.entries(i);
        for &(slot, a) in entries {
            eta[slot] -= a * delta;
        }
        counts.scalar_multiplications += entries.len() as u64;
        for &j in columns.neighbors(i) {
            xi[j] = x[j] - lowest(&eta, j);
            if xi[j] > eps {
                frontier.push(j, x[j], xi[j]);
            }
        }
        // debug builds rebuild η from scratch now and then; the refresh is
        // bookkeeping and stays out of the counters
        if cfg!(debug_assertions) && counts.component_updates.is_multiple_of(ETA_REFRESH) {
            for (l, piece) in p.pieces.iter().enumerate() {
                for j in 0..n {
                    eta[j * pieces + l] = piece.affine(j, &x);
                }
            }
            for j in 0..n {
                xi[j] = x[j] - lowest(&eta, j);
                if xi[j] > eps {
                    frontier.push(j, x[j], xi[j]);
                }
            }
        }
        if let (Some(k), Some(drift)) = (opts.eta_check_interval, max_drift.as_mut()) {
            if k > 0 && counts.component_updates % k == 0 {
                for (l, piece) in p.pieces.iter().enumerate() {
                    for j in 0..n {
                        let stored = eta[j * pieces + l];
                        *drift = drift.max((stored - piece.affine(j, &x)).abs());
                    }
                }
            }
        }
    }
    let wall_time = start.elapsed();
    let residual_inf = inf_norm_diff(&x, &p.glb_eval(&x));
    Ok(SolveReport {
        feasible: dominates(&x, &p.lower),
        x,
        residual_inf,
        counts,
        sweeps: 0,
        wall_time,
        method: Method::SelectivePlain,
        policy: Some(opts.policy),
        epsilon: eps,
        contraction_rate: Some(p.contraction_rates().gamma),
        max_eta_drift: max_drift,
    })
}

/// Column `i` of every piece as `(j * L + ℓ, [A_ℓ]_{ji})` pairs, plus the
/// neighbor lists, both in flat CSR form.
struct FlatColumns {
    entry_ptr: Vec<usize>,
    entries: Vec<(usize, f64)>,
    neighbor_ptr: Vec<usize>,
    neighbors: Vec<usize>,
}

impl FlatColumns {
    fn new(p: &LinearGlbProblem) -> Self {
        let pieces = p.pieces.len();
        let mut entry_ptr = vec![0];
        let mut entries = Vec::with_capacity(p.nnz());
        for i in 0..p.n {
            for (l, piece) in p.pieces.iter().enumerate() {
                entries.extend(piece.a_t.row(i).map(|(j, a)| (j * pieces + l, a)));
            }
            entry_ptr.push(entries.len());
        }
        let mut neighbor_ptr = vec![0];
        let mut neighbors = Vec::new();
        for list in p.neighbors() {
            neighbors.extend(list);
            neighbor_ptr.push(neighbors.len());
        }
        Self {
            entry_ptr,
            entries,
            neighbor_ptr,
            neighbors,
        }
    }

    fn entries(&self, i: usize) -> &[(usize, f64)] {
        &self.entries[self.entry_ptr[i]..self.entry_ptr[i + 1]]
    }

    fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.neighbor_ptr[i]..self.neighbor_ptr[i + 1]]
    }
}

/// One inequality `Σ coeffs·x + d <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub d: f64,
}

impl LpRow {
    pub fn positive_entries(&self) -> usize {
        self.coeffs.iter().filter(|(_, v)| *v > 0.0).count()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(c, v)| v * x[c]).sum::<f64>() + self.d
    }
}

/// `max Σ x_i` s.t. `C x + d <= 0`, `a <= x <= U`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpForm {
    pub n: usize,
    pub rows: Vec<LpRow>,
    pub cap: Vec<f64>,
    pub lower: Vec<f64>,
}

impl LpForm {
    /// `a <= x`, `x <= U` and every row satisfied, without tolerance.
    pub fn contains(&self, x: &[f64]) -> bool {
        dominates(x, &self.lower)
            && x.iter().zip(&self.cap).all(|(v, u)| v <= u)
            && self.rows.iter().all(|r| r.eval(x) <= 0.0)
    }

    /// CPLEX LP text. Coefficients use 17 significant digits.
    pub fn write_cplex<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "\\ glb-of-affine problem, {} variables", self.n)?;
        writeln!(w, "Maximize")?;
        let objective: Vec<String> = (1..=self.n).map(|i| format!("x{i}")).collect();
        if objective.is_empty() {
            writeln!(w, " obj: 0 x1")?;
        } else {
            writeln!(w, " obj: {}", objective.join(" + "))?;
        }
        writeln!(w, "Subject To")?;
        for row in &self.rows {
            write!(w, " {}:", row.name)?;
            for (k, &(c, v)) in row.coeffs.iter().enumerate() {
                let sign = if v < 0.0 {
                    "-"
                } else if k == 0 {
                    ""
                } else {
                    "+"
                };
                let sep = if k == 0 && sign.is_empty() { "" } else { " " };
                write!(w, " {sign}{sep}{} x{}", lp_number(v.abs()), c + 1)?;
            }
            writeln!(w, " <= {}", lp_number(-row.d))?;
        }
        writeln!(w, "Bounds")?;
        for i in 0..self.n {
            writeln!(
                w,
                " {} <= x{} <= {}",
                lp_number(self.lower[i]),
                i + 1,
                lp_number(self.cap[i])
            )?;
        }
        writeln!(w, "End")
    }

    pub fn to_cplex_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_cplex(&mut buf).expect("write to Vec");
        String::from_utf8(buf).expect("ascii output")
    }
}

fn lp_number(v: f64) -> String {
    // -0 prints as 0 so rows read naturally
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swap_problem() -> LinearGlbProblem {
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

    fn diag_problem() -> LinearGlbProblem {
        LinearGlbProblem::new(
            2,
            vec![PieceData::new(
                vec![(0, 0, 0.5), (0, 1, 0.25), (1, 1, 0.5)],
                vec![1.0, 2.0],
            )],
            vec![100.0, 100.0],
        )
        .unwrap()
    }

    #[test]
    fn glb_eval_examples() {
        let p = swap_problem();
        assert_eq!(p.glb_eval(&[0.0, 0.0]), vec![1.0, 1.0]);
        assert_eq!(p.glb_eval(&[2.0, 2.0]), vec![2.0, 2.0]);
        assert_eq!(p.glb_eval(&[100.0, 100.0]), vec![10.0, 10.0]);
        let mut mults = 0;
        p.glb_eval_counted(&[1.0, 1.0], &mut mults);
        assert_eq!(mults, 2);
    }

    #[test]
    fn glb_at_origin_is_min_offset() {
        let p = LinearGlbProblem::new(
            3,
            vec![
                PieceData::new(vec![(0, 1, 0.3)], vec![1.0, 5.0, 0.5]),
                PieceData::new(vec![(2, 0, 0.3)], vec![2.0, 4.0, 9.0]),
            ],
            vec![10.0, 3.0, 10.0],
        )
        .unwrap();
        assert_eq!(p.glb_eval(&[0.0; 3]), vec![1.0, 3.0, 0.5]);
    }

    #[test]
    fn precondition_scales_rows() {
        let pre = diag_problem().precondition();
        let piece = &pre.problem.pieces()[0];
        assert_eq!(piece.matrix().get(0, 0), 0.0);
        assert_eq!(piece.matrix().get(0, 1), 0.5);
        assert_eq!(piece.matrix().get(1, 1), 0.0);
        assert_eq!(piece.matrix().nnz(), 1);
        assert_eq!(piece.offsets(), &[2.0, 4.0]);
        assert_eq!(pre.gamma, 0.75);
        assert_eq!(pre.gamma_hat, 0.5);
        assert!(pre.problem.has_zero_diagonal());
    }

    #[test]
    fn precondition_of_zero_diagonal_is_identity() {
        let p = swap_problem();
        let pre = p.precondition();
        assert_eq!(pre.problem.pieces(), p.pieces());
        assert_eq!(pre.gamma, pre.gamma_hat);
    }

    #[test]
    fn contraction_rate_examples() {
        let r = swap_problem().contraction_rates();
        assert_eq!((r.gamma, r.gamma_hat), (0.5, 0.5));
        let r = diag_problem().contraction_rates();
        assert_eq!((r.gamma, r.gamma_hat), (0.75, 0.5));
        let zero = LinearGlbProblem::new(
            2,
            vec![PieceData::new(vec![], vec![1.0, 1.0])],
            vec![1.0; 2],
        )
        .unwrap();
        let r = zero.contraction_rates();
        assert_eq!((r.gamma, r.gamma_hat), (0.0, 0.0));
        // γ = 0.75 with every diagonal 0.5
        let p = LinearGlbProblem::new(
            2,
            vec![PieceData::new(
                vec![(0, 0, 0.5), (0, 1, 0.25), (1, 1, 0.5), (1, 0, 0.1)],
                vec![0.0; 2],
            )],
            vec![1.0; 2],
        )
        .unwrap();
        assert_eq!(p.contraction_rates().gamma_hat, 0.5);
    }

    #[test]
    fn validation_errors() {
        let err = LinearGlbProblem::new(
            2,
            vec![PieceData::new(vec![(0, 1, -0.1)], vec![0.0; 2])],
            vec![1.0; 2],
        )
        .unwrap_err();
        assert_eq!(
            err,
            ProblemError::NegativeEntry {
                piece: 0,
                row: 0,
                col: 1,
                value: -0.1
            }
        );
        assert!(matches!(
            LinearGlbProblem::new(
                2,
                vec![PieceData::new(vec![], vec![0.0, -1.0])],
                vec![1.0; 2]
            ),
            Err(ProblemError::NegativeOffset { row: 1, .. })
        ));
        assert!(matches!(
            LinearGlbProblem::new(
                2,
                vec![PieceData::new(vec![(2, 0, 1.0)], vec![0.0; 2])],
                vec![1.0; 2]
            ),
            Err(ProblemError::IndexOutOfBounds { .. })
        ));
        assert!(matches!(
            LinearGlbProblem::new(2, vec![], vec![1.0]),
            Err(ProblemError::Shape { what: "U", .. })
        ));
        assert!(matches!(
            LinearGlbProblem::new(1, vec![], vec![-1.0]),
            Err(ProblemError::NegativeCap { .. })
        ));
    }

    #[test]
    fn redundant_rows_become_caps() {
        let p = LinearGlbProblem::new(
            2,
            vec![PieceData::new(
                vec![(0, 0, 1.2), (0, 1, 0.3), (1, 0, 0.5)],
                vec![0.1, 0.2],
            )],
            vec![7.0, 8.0],
        )
        .unwrap();
        assert_eq!(p.warnings().len(), 1);
        assert_eq!(p.pieces()[0].matrix().row_nnz(0), 0);
        assert_eq!(p.pieces()[0].offsets(), &[7.0, 0.2]);
        assert_eq!(p.pieces()[0].matrix().get(1, 0), 0.5);
    }

    #[test]
    fn selective_linear_two_variable() {
        let p = swap_problem();
        let fixed = solve_linear(
            &p,
            Method::FixedPlain,
            None,
            &SolveOptions::new(1e-9, PolicyTag::Fifo),
        )
        .unwrap();
        for policy in PolicyTag::ALL {
            let r = selective_update_linear(&p, None, 1e-9, policy).unwrap();
            assert!((r.x[0] - 2.0).abs() < 2e-9 && (r.x[1] - 2.0).abs() < 2e-9);
            assert!(r.feasible);
            assert!(
                r.counts.scalar_multiplications < fixed.counts.scalar_multiplications,
                "{policy}: {} vs {}",
                r.counts.scalar_multiplications,
                fixed.counts.scalar_multiplications
            );
        }
    }

    #[test]
    fn hand_counted_multiplications() {
        // init: 2 (η), each update touches one column entry: 1 per update
        let p = swap_problem();
        let r = selective_update_linear(&p, None, 1e-9, PolicyTag::Fifo).unwrap();
        assert_eq!(
            r.counts.scalar_multiplications,
            2 + r.counts.component_updates
        );
        assert_eq!(r.counts.dequeues, r.counts.component_updates);
        // fixed point: 2 per sweep
        let f = solve_linear(
            &p,
            Method::FixedPlain,
            None,
            &SolveOptions::new(1e-9, PolicyTag::Fifo),
        )
        .unwrap();
        assert_eq!(f.counts.scalar_multiplications, 2 * f.sweeps);
    }

    #[test]
    fn zero_offsets_give_zero() {
        let p = LinearGlbProblem::new(
            3,
            vec![
                PieceData::new(vec![(0, 1, 0.4), (1, 2, 0.3), (2, 0, 0.2)], vec![0.0; 3]),
                PieceData::new(vec![(0, 2, 0.5), (1, 0, 0.5)], vec![0.0; 3]),
            ],
            vec![5.0; 3],
        )
        .unwrap();
        let r = selective_update_linear(&p, None, 1e-12, PolicyTag::Variation).unwrap();
        assert!(r.x.iter().all(|&v| v.abs() < 1e-11), "{:?}", r.x);
    }

    #[test]
    fn scalar_min_of_offsets() {
        let p = LinearGlbProblem::new(
            1,
            vec![
                PieceData::new(vec![], vec![3.0]),
                PieceData::new(vec![], vec![5.0]),
            ],
            vec![4.0],
        )
        .unwrap();
        let r = selective_update_linear(&p, None, 1e-9, PolicyTag::Value).unwrap();
        assert_eq!(r.x, vec![3.0]);
    }

    #[test]
    fn preconditioned_matches_plain_with_self_loops() {
        let p = diag_problem();
        // x+ : x2 = 0.5 x2 + 2 -> 4;  x1 = 0.5 x1 + 0.25·4 + 1 -> 4
        for policy in PolicyTag::ALL {
            let plain = selective_update_linear(&p, None, 1e-10, policy).unwrap();
            let pre = selective_update_preconditioned(&p, None, 1e-10, policy).unwrap();
            for r in [&plain, &pre] {
                assert!(
                    (r.x[0] - 4.0).abs() < 1e-9 && (r.x[1] - 4.0).abs() < 1e-9,
                    "{:?}",
                    r.x
                );
            }
            assert!(pre.counts.component_updates < plain.counts.component_updates);
        }
    }

    #[test]
    fn zero_diagonal_trajectories_coincide() {
        let p = swap_problem();
        for policy in PolicyTag::ALL {
            let mut a = Vec::new();
            let mut b = Vec::new();
            let opts = SolveOptions::new(1e-9, policy);
            solve_linear_observed(
                &p,
                Method::SelectivePlain,
                None,
                &opts,
                &mut |x: &[f64], _: &[f64]| a.push(x.to_vec()),
            )
            .unwrap();
            solve_linear_observed(
                &p,
                Method::SelectivePrecond,
                None,
                &opts,
                &mut |x: &[f64], _: &[f64]| b.push(x.to_vec()),
            )
            .unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn generic_and_incremental_agree() {
        use crate::lattice::{selective_update_solve, GenericProblem};
        let p = diag_problem().precondition().problem;
        let generic = GenericProblem::new(p.map(), p.lower().to_vec());
        for policy in PolicyTag::ALL {
            let a = selective_update_solve(&generic, p.cap(), 1e-10, policy).unwrap();
            let b = selective_update_linear(&p, None, 1e-10, policy).unwrap();
            assert_eq!(a.counts.component_updates, b.counts.component_updates);
            assert!(inf_norm_diff(&a.x, &b.x) < 1e-12);
        }
    }

    #[test]
    fn eta_drift_is_tracked() {
        let p = swap_problem();
        let mut opts = SolveOptions::new(1e-12, PolicyTag::Fifo);
        opts.eta_check_interval = Some(1);
        let r = selective_linear_with(&p, None, &opts, &mut ()).unwrap();
        let drift = r.max_eta_drift.unwrap();
        assert!(drift <= 4.0 * 2.0 * f64::EPSILON * 10.0, "{drift}");
    }

    #[test]
    fn lp_form_rows() {
        let lp = swap_problem().to_lp_form();
        assert_eq!(lp.rows.len(), 4);
        assert!(lp.rows.iter().all(|r| r.positive_entries() == 1));
        assert!(lp.rows.iter().all(|r| r.d <= 0.0));
        assert_eq!(lp.rows[0].coeffs, vec![(0, 1.0), (1, -0.5)]);
        assert_eq!(lp.rows[0].d, -1.0);

        let cap_only = LinearGlbProblem::new(2, vec![], vec![3.0, 4.0])
            .unwrap()
            .to_lp_form();
        assert_eq!(cap_only.rows.len(), 2);
        assert_eq!(cap_only.rows[1].coeffs, vec![(1, 1.0)]);

        let lp = diag_problem().to_lp_form();
        assert_eq!(lp.rows[0].coeffs, vec![(0, 0.5), (1, -0.25)]);
        assert_eq!(lp.rows[1].coeffs, vec![(1, 0.5)]);
    }

    #[test]
    fn cplex_text() {
        let text = swap_problem().to_lp_form().to_cplex_string();
        assert!(text.contains("Maximize\n obj: x1 + x2\n"));
        assert!(text.contains(
            " c_1_1: 1.0000000000000000e0 x1 - 5.0000000000000000e-1 x2 <= 1.0000000000000000e0\n"
        ));
        assert!(text.contains(" u_2: 1.0000000000000000e0 x2 <= 1.0000000000000000e1\n"));
        assert!(text.contains(" 0.0000000000000000e0 <= x1 <= 1.0000000000000000e1\n"));
        assert!(text.ends_with("End\n"));
        assert_eq!(text.matches(" c_").count() + text.matches(" u_").count(), 4);
    }

    #[test]
    fn dominance_and_limit() {
        let d = diag_problem().dominance().unwrap();
        assert_eq!(d.gamma, 0.75);
        // row 0: diag 0.5 → 1 − 0.5/0.75 = 1/3; off 0.25/0.75 = 1/3; row 1: 1/3
        assert!((d.delta - 1.0 / 3.0).abs() < 1e-15);
        let lim = Dominance::delta_limit(0.75);
        assert!((lim - (0.5 - 0.25) / 0.75).abs() < 1e-15);
    }
}
