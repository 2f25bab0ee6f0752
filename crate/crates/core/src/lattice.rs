//! Problems of the form `max f(x)` subject to `a <= x <= g(x)`, where every
//! `g_i` is monotone non-decreasing and does not read `x_i`.
//!
//! The feasible set is a complete lattice whose top element `x+` is the
//! greatest fixed point of `g` below the cap, so `f` never influences the
//! answer. Two solvers are provided: full fixed-point sweeps, and the
//! selective update that only re-evaluates the constraints touched by the
//! last changed variable.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::queue::{Frontier, PolicyTag, QueueImpl};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("vector has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("initial point is not finite at component {index}")]
    NonFiniteStart { index: usize },
    #[error("initial point violates x0 >= g(x0) at component {index} (residual {residual:e})")]
    Precondition { index: usize, residual: f64 },
    #[error("no convergence after {iterations} sweeps (residual {residual:e})")]
    NotConverged {
        iterations: u64,
        residual: f64,
        x: Vec<f64>,
    },
    #[error("time budget exhausted after {0:?}")]
    TimedOut(Duration),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("component {index} depends on itself")]
    SelfDependency { index: usize },
    #[error("component {index} depends on out-of-range variable {dependency}")]
    OutOfRange { index: usize, dependency: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("gap constant must be positive, got {0}")]
pub struct DomainError(pub f64);

/// A monotone constraint map `g: R^n -> R^n`.
pub trait MonotoneMap {
    fn dim(&self) -> usize;

    /// `g_i(x)`.
    fn eval_component(&self, i: usize, x: &[f64]) -> f64;

    /// Variables read by `g_i`.
    fn dependencies(&self, i: usize) -> &[usize];

    /// Upper bound `U` with `g(x) <= U` on the feasible set.
    fn cap(&self) -> &[f64];

    /// Scalar multiplications performed by one call of `eval_component(i, _)`.
    fn component_cost(&self, _i: usize) -> u64 {
        0
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|i| self.eval_component(i, x)).collect()
    }
}

type ComponentFn = Box<dyn Fn(usize, &[f64]) -> f64 + Send + Sync>;

/// A [`MonotoneMap`] backed by a closure and explicit dependency lists.
pub struct FnMap {
    deps: Vec<Vec<usize>>,
    cap: Vec<f64>,
    f: ComponentFn,
}

impl FnMap {
    pub fn new(
        deps: Vec<Vec<usize>>,
        cap: Vec<f64>,
        f: impl Fn(usize, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        assert_eq!(deps.len(), cap.len(), "one dependency list per component");
        Self {
            deps,
            cap,
            f: Box::new(f),
        }
    }

    /// The map `g ≡ c`.
    pub fn constant(c: Vec<f64>) -> Self {
        let n = c.len();
        let values = c.clone();
        Self::new(vec![Vec::new(); n], c, move |i, _| values[i])
    }
}

impl std::fmt::Debug for FnMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnMap")
            .field("deps", &self.deps)
            .field("cap", &self.cap)
            .finish_non_exhaustive()
    }
}

impl MonotoneMap for FnMap {
    fn dim(&self) -> usize {
        self.cap.len()
    }

    fn eval_component(&self, i: usize, x: &[f64]) -> f64 {
        (self.f)(i, x)
    }

    fn dependencies(&self, i: usize) -> &[usize] {
        &self.deps[i]
    }

    fn cap(&self) -> &[f64] {
        &self.cap
    }
}

/// Objective label. The optimum does not depend on it; it is carried for
/// reporting only.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Objective {
    #[default]
    Sum,
    /// Traversal time of a squared-speed profile sampled with spacing `h`.
    ManeuverTime {
        h: f64,
    },
    Named(String),
}

#[derive(Debug)]
pub struct GenericProblem<M: ?Sized> {
    pub lower: Vec<f64>,
    pub objective: Objective,
    pub map: M,
}

impl<M: MonotoneMap> GenericProblem<M> {
    pub fn new(map: M, lower: Vec<f64>) -> Self {
        assert_eq!(map.dim(), lower.len(), "lower bound length");
        Self {
            map,
            lower,
            objective: Objective::Sum,
        }
    }

    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    /// `g(a) >= a`, which guarantees a nonempty feasible set.
    pub fn lower_is_feasible(&self) -> bool {
        let ga = self.map.eval(&self.lower);
        ga.iter().zip(&self.lower).all(|(g, a)| g >= a)
    }
}

/// Variable-to-variable adjacency: `j ∈ N(i)` iff `g_j` reads `x_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyGraph {
    out: Vec<Vec<usize>>,
}

impl DependencyGraph {
    pub fn build<M: MonotoneMap + ?Sized>(g: &M) -> Result<Self, GraphError> {
        let n = g.dim();
        let mut out = vec![Vec::new(); n];
        for j in 0..n {
            for &i in g.dependencies(j) {
                if i == j {
                    return Err(GraphError::SelfDependency { index: j });
                }
                if i >= n {
                    return Err(GraphError::OutOfRange {
                        index: j,
                        dependency: i,
                    });
                }
                out[i].push(j);
            }
        }
        // j is visited in ascending order, so lists are already sorted
        for list in &mut out {
            list.dedup();
        }
        Ok(Self { out })
    }

    pub fn len(&self) -> usize {
        self.out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.out[i]
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn max_in_degree(&self) -> usize {
        let mut deg = vec![0usize; self.out.len()];
        for list in &self.out {
            for &j in list {
                deg[j] += 1;
            }
        }
        deg.into_iter().max().unwrap_or(0)
    }
}

/// Solver family used to produce a [`SolveReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    FixedPlain,
    FixedPrecond,
    SelectivePlain,
    SelectivePrecond,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::FixedPlain,
        Method::FixedPrecond,
        Method::SelectivePlain,
        Method::SelectivePrecond,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::FixedPlain => "fixed-plain",
            Method::FixedPrecond => "fixed-precond",
            Method::SelectivePlain => "selective-plain",
            Method::SelectivePrecond => "selective-precond",
        }
    }

    pub fn uses_policy(self) -> bool {
        matches!(self, Method::SelectivePlain | Method::SelectivePrecond)
    }

    pub fn is_preconditioned(self) -> bool {
        matches!(self, Method::FixedPrecond | Method::SelectivePrecond)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "fixed-plain" => Ok(Method::FixedPlain),
            "fixed-precond" => Ok(Method::FixedPrecond),
            "selective-plain" => Ok(Method::SelectivePlain),
            "selective-precond" => Ok(Method::SelectivePrecond),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

/// Arithmetic and queue counters accumulated by one solver run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub scalar_multiplications: u64,
    pub component_updates: u64,
    pub dequeues: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x: Vec<f64>,
    /// `x >= a` component-wise.
    pub feasible: bool,
    /// `‖x − g(x)‖∞` at exit, evaluated without touching the counters.
    pub residual_inf: f64,
    pub counts: OpCounts,
    /// Full sweeps for fixed-point runs, zero for selective runs.
    pub sweeps: u64,
    pub wall_time: Duration,
    pub method: Method,
    pub policy: Option<PolicyTag>,
    pub epsilon: f64,
    /// Lipschitz constant of the iterated map, when known.
    pub contraction_rate: Option<f64>,
    /// Largest observed `|η − (Ax + b)|` when drift checks were enabled.
    pub max_eta_drift: Option<f64>,
}

impl SolveReport {
    /// Guaranteed `‖x − x+‖∞` bound, available only for contractions.
    pub fn error_bound(&self) -> Option<f64> {
        match self.contraction_rate {
            Some(rate) if rate < 1.0 => error_bound(1.0 - rate, self.epsilon).ok(),
            _ => None,
        }
    }

    fn empty(method: Method, policy: Option<PolicyTag>, epsilon: f64) -> Self {
        Self {
            x: Vec::new(),
            feasible: true,
            residual_inf: 0.0,
            counts: OpCounts::default(),
            sweeps: 0,
            wall_time: Duration::ZERO,
            method,
            policy,
            epsilon,
            contraction_rate: None,
            max_eta_drift: None,
        }
    }
}

/// Run-level knobs shared by the solvers.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub eps: f64,
    pub policy: PolicyTag,
    pub queue: QueueImpl,
    /// Sweep cap for fixed-point iteration; `None` derives one from the
    /// contraction rate when it is known.
    pub max_iter: Option<u64>,
    pub deadline: Option<Instant>,
    /// Recompute `Ax + b` from scratch every this many updates and record
    /// the drift of the incrementally maintained copy.
    pub eta_check_interval: Option<u64>,
}

impl SolveOptions {
    pub fn new(eps: f64, policy: PolicyTag) -> Self {
        Self {
            eps,
            policy,
            queue: QueueImpl::Auto,
            max_iter: None,
            deadline: None,
            eta_check_interval: None,
        }
    }
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self::new(1e-9, PolicyTag::Fifo)
    }
}

/// Hook called at the head of every selective-update main-loop iteration
/// with the current iterate and residual vector.
pub trait LoopObserver {
    fn loop_head(&mut self, x: &[f64], xi: &[f64]);
}

impl LoopObserver for () {
    #[inline]
    fn loop_head(&mut self, _x: &[f64], _xi: &[f64]) {}
}

impl<F: FnMut(&[f64], &[f64])> LoopObserver for F {
    fn loop_head(&mut self, x: &[f64], xi: &[f64]) {
        self(x, xi)
    }
}

const DEADLINE_POLL: u64 = 4096;

pub(crate) fn check_tolerance(eps: f64) -> Result<(), SolveError> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(SolveError::InvalidTolerance(eps))
    }
}

pub(crate) fn check_start(x0: &[f64], n: usize) -> Result<(), SolveError> {
    if x0.len() != n {
        return Err(SolveError::DimensionMismatch {
            expected: n,
            found: x0.len(),
        });
    }
    match x0.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(SolveError::NonFiniteStart { index }),
        None => Ok(()),
    }
}

pub(crate) fn deadline_passed(deadline: Option<Instant>, step: u64) -> bool {
    step.is_multiple_of(DEADLINE_POLL) && deadline.is_some_and(|d| Instant::now() > d)
}

pub(crate) fn inf_norm_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn dominates(x: &[f64], lower: &[f64]) -> bool {
    x.iter().zip(lower).all(|(v, a)| v >= a)
}

/// `ξ = x − g(x)`.
pub fn residual<M: MonotoneMap + ?Sized>(g: &M, x: &[f64]) -> Vec<f64> {
    (0..g.dim())
        .map(|i| x[i] - g.eval_component(i, x))
        .collect()
}

/// `δ⁻¹·eps`: distance bound to `x+` for any eps-solution when the map's
/// Lipschitz ratios stay outside `[1 − δ, 1 + δ]`.
pub fn error_bound(delta: f64, eps: f64) -> Result<f64, DomainError> {
    if delta > 0.0 {
        Ok(eps / delta)
    } else {
        Err(DomainError(delta))
    }
}

/// Sweep cap used when the caller gives none:
/// `10·⌈log(‖x0 − a‖∞ / eps) / log(1/γ)⌉`, at least 2.
pub fn default_max_iter(x0: &[f64], lower: &[f64], eps: f64, rate: f64) -> Option<u64> {
    if rate.is_nan() || rate >= 1.0 {
        return None;
    }
    let spread = inf_norm_diff(x0, lower);
    if rate <= 0.0 || spread <= eps {
        return Some(2);
    }
    let sweeps = ((spread / eps).ln() / (1.0 / rate).ln()).ceil();
    Some((10.0 * sweeps).max(2.0) as u64)
}

/// Sweep cap for maps with no known contraction rate.
pub const FALLBACK_MAX_ITER: u64 = 1_000_000;

/// Full fixed-point iteration `x ← g(x)` until `‖x_old − g(x_old)‖∞ <= eps`.
pub fn fixed_point_solve<M: MonotoneMap + ?Sized>(
    problem: &GenericProblem<M>,
    x0: &[f64],
    eps: f64,
    max_iter: u64,
) -> Result<SolveReport, SolveError> {
    fixed_point_run(
        &problem.map,
        &problem.lower,
        x0,
        eps,
        max_iter,
        None,
        Method::FixedPlain,
    )
}

pub(crate) fn fixed_point_run<M: MonotoneMap + ?Sized>(
    g: &M,
    lower: &[f64],
    x0: &[f64],
    eps: f64,
    max_iter: u64,
    deadline: Option<Instant>,
    method: Method,
) -> Result<SolveReport, SolveError> {
    check_tolerance(eps)?;
    let n = g.dim();
    check_start(x0, n)?;
    if n == 0 {
        return Ok(SolveReport::empty(method, None, eps));
    }
    let start = Instant::now();
    let sweep_cost: u64 = (0..n).map(|i| g.component_cost(i)).sum();
    let mut counts = OpCounts::default();
    let mut x = x0.to_vec();
    let mut next = vec![0.0; n];
    let mut sweeps = 0u64;
    loop {
        if sweeps >= max_iter {
            let residual = inf_norm_diff(&x, &g.eval(&x));
            return Err(SolveError::NotConverged {
                iterations: sweeps,
                residual,
                x,
            });
        }
        if deadline.is_some_and(|d| Instant::now() > d) {
            return Err(SolveError::TimedOut(start.elapsed()));
        }
        for (i, slot) in next.iter_mut().enumerate() {
            *slot = g.eval_component(i, &x);
        }
        sweeps += 1;
        counts.scalar_multiplications += sweep_cost;
        counts.component_updates += n as u64;
        let step = inf_norm_diff(&x, &next);
        std::mem::swap(&mut x, &mut next);
        if step <= eps {
            break;
        }
    }
    let wall_time = start.elapsed();
    let residual_inf = inf_norm_diff(&x, &g.eval(&x));
    Ok(SolveReport {
        feasible: dominates(&x, lower),
        x,
        residual_inf,
        counts,
        sweeps,
        wall_time,
        method,
        policy: None,
        epsilon: eps,
        contraction_rate: None,
        max_eta_drift: None,
    })
}

/// Selective update: only constraints reading a changed variable are
/// re-evaluated, in the order chosen by `policy`.
///
/// Requires `x0 >= g(x0)` (up to `eps`) and `x0 >= x+`; the cap `U` always
/// qualifies.
pub fn selective_update_solve<M: MonotoneMap + ?Sized>(
    problem: &GenericProblem<M>,
    x0: &[f64],
    eps: f64,
    policy: PolicyTag,
) -> Result<SolveReport, SelectiveError> {
    let graph = DependencyGraph::build(&problem.map)?;
    selective_update_with(
        problem,
        &graph,
        x0,
        &SolveOptions::new(eps, policy),
        &mut (),
    )
    .map_err(SelectiveError::from)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectiveError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// [`selective_update_solve`] with a prebuilt graph, explicit options and
/// a loop observer.
pub fn selective_update_with<M, O>(
    problem: &GenericProblem<M>,
    graph: &DependencyGraph,
    x0: &[f64],
    opts: &SolveOptions,
    observer: &mut O,
) -> Result<SolveReport, SolveError>
where
    M: MonotoneMap + ?Sized,
    O: LoopObserver + ?Sized,
{
    let eps = opts.eps;
    check_tolerance(eps)?;
    let g = &problem.map;
    let n = g.dim();
    check_start(x0, n)?;
    if n == 0 {
        return Ok(SolveReport::empty(
            Method::SelectivePlain,
            Some(opts.policy),
            eps,
        ));
    }
    let start = Instant::now();
    let mut counts = OpCounts::default();
    let mut x = x0.to_vec();
    // Latest g_i(x); x_i is set from it directly so the descent is exact.
    let mut gval = vec![0.0; n];
    let mut xi = vec![0.0; n];
    for i in 0..n {
        gval[i] = g.eval_component(i, &x);
        counts.scalar_multiplications += g.component_cost(i);
        xi[i] = x[i] - gval[i];
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
    loop {
        observer.loop_head(&x, &xi);
        let Some(i) = frontier.pop() else { break };
        counts.dequeues += 1;
        if deadline_passed(opts.deadline, counts.dequeues) {
            return Err(SolveError::TimedOut(start.elapsed()));
        }
        x[i] = gval[i];
        counts.component_updates += 1;
        xi[i] = 0.0;
        for &j in graph.neighbors(i) {
            gval[j] = g.eval_component(j, &x);
            counts.scalar_multiplications += g.component_cost(j);
            xi[j] = x[j] - gval[j];
            if xi[j] > eps {
                frontier.push(j, x[j], xi[j]);
            }
        }
    }
    let wall_time = start.elapsed();
    let residual_inf = inf_norm_diff(&x, &g.eval(&x));
    Ok(SolveReport {
        feasible: dominates(&x, &problem.lower),
        x,
        residual_inf,
        counts,
        sweeps: 0,
        wall_time,
        method: Method::SelectivePlain,
        policy: Some(opts.policy),
        epsilon: eps,
        contraction_rate: None,
        max_eta_drift: None,
    })
}
