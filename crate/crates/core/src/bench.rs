//! Sweep harness: solve generated instances with several methods, policies
//! and tolerances, and collect counters as CSV rows.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng as _;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::forge::graph::GraphFamily;
use crate::forge::hjb::{hjb_grid_problem, GridAxis, HjbGridSpec};
use crate::forge::io::load_instance;
use crate::forge::random::{family_instance, RandomScales};
use crate::forge::rng::substream;
use crate::forge::speed::{speed_planning_problem, SpeedPlanSpec};
use crate::lattice::{Method, SolveOptions};
use crate::linear::{solve_linear, LinearGlbProblem};
use crate::queue::PolicyTag;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid sweep configuration: {0}")]
    Config(String),
    #[error("instance generation failed for n = {n}, seed = {seed}: {message}")]
    Instance {
        n: usize,
        seed: u64,
        message: String,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Graph(GraphFamily),
    /// Random curvature, `h = 1`, `v̄ = 10`, `A_T = A_N = 1`.
    SpeedPlan,
    /// 2-D grid with about `n` nodes, four unit controls, unit cost.
    Hjb,
    File(PathBuf),
}

impl Family {
    pub fn name(&self) -> String {
        match self {
            Family::Graph(g) => g.as_str().to_string(),
            Family::SpeedPlan => "speedplan".into(),
            Family::Hjb => "hjb".into(),
            Family::File(p) => format!("file:{}", p.display()),
        }
    }

    /// Builds the instance for size `n` and seed `seed`.
    pub fn instance(
        &self,
        n: usize,
        pieces: usize,
        scales: RandomScales,
        seed: u64,
    ) -> Result<LinearGlbProblem, BenchError> {
        let fail = |message: String| BenchError::Instance { n, seed, message };
        match self {
            Family::Graph(g) => {
                family_instance(*g, n, pieces, scales, seed).map_err(|e| fail(e.to_string()))
            }
            Family::SpeedPlan => {
                let mut rng = substream(seed, 0);
                let mut spec = SpeedPlanSpec::flat((n.max(2) - 1) as f64, n, 10.0, 1.0, 1.0);
                spec.curvature = (0..n).map(|_| rng.random::<f64>() * 0.5).collect();
                speed_planning_problem(&spec).map_err(|e| fail(e.to_string()))
            }
            Family::Hjb => {
                let side = ((n as f64).sqrt().ceil() as usize).max(2);
                let axis = GridAxis::new(-1.0, 1.0, side);
                let speed = axis.spacing();
                let controls = vec![
                    vec![speed, 0.0],
                    vec![-speed, 0.0],
                    vec![0.0, speed],
                    vec![0.0, -speed],
                ];
                let spec = HjbGridSpec::control_as_velocity(
                    vec![axis, axis],
                    controls,
                    |x, _| 0.5 * (x[0].abs() + x[1].abs()),
                    1.0,
                    0.5,
                );
                hjb_grid_problem(&spec).map_err(|e| fail(e.to_string()))
            }
            Family::File(path) => load_instance(path).map_err(|e| fail(e.to_string())),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "speedplan" => Ok(Family::SpeedPlan),
            "hjb" => Ok(Family::Hjb),
            _ => {
                if let Some(path) = s.strip_prefix("file:") {
                    Ok(Family::File(PathBuf::from(path)))
                } else {
                    s.parse().map(Family::Graph).map_err(|e| e.to_string())
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub family: Family,
    pub sizes: Vec<usize>,
    pub tolerances: Vec<f64>,
    /// Number of affine pieces `L` for graph families.
    pub pieces: usize,
    pub scales: RandomScales,
    pub policies: Vec<PolicyTag>,
    pub methods: Vec<Method>,
    pub reps: usize,
    /// Repetition `r` uses seed `seed_base + r`.
    pub seed_base: u64,
    /// Per-run limit; a (method, policy) pair that exceeds it is dropped
    /// for all larger sizes.
    pub time_budget: Option<Duration>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            family: Family::Graph(GraphFamily::BarabasiAlbert),
            sizes: vec![100],
            tolerances: vec![1e-6],
            pieces: 4,
            scales: RandomScales::default(),
            policies: PolicyTag::ALL.to_vec(),
            methods: Method::ALL.to_vec(),
            reps: 5,
            seed_base: 1,
            time_budget: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.reps == 0 {
            return Err(BenchError::Config("repetitions must be at least 1".into()));
        }
        if self.sizes.is_empty() || self.tolerances.is_empty() || self.methods.is_empty() {
            return Err(BenchError::Config(
                "sizes, tolerances and methods must be nonempty".into(),
            ));
        }
        if let Some(t) = self
            .tolerances
            .iter()
            .find(|t| !(t.is_finite() && **t > 0.0))
        {
            return Err(BenchError::Config(format!("tolerance {t} is not positive")));
        }
        if self.methods.iter().any(|m| m.uses_policy()) && self.policies.is_empty() {
            return Err(BenchError::Config(
                "selective methods need at least one policy".into(),
            ));
        }
        Ok(())
    }

    /// `(method, policy)` pairs; fixed-point methods ignore the policy.
    pub fn combinations(&self) -> Vec<(Method, Option<PolicyTag>)> {
        let mut out = Vec::new();
        for &m in &self.methods {
            if m.uses_policy() {
                out.extend(self.policies.iter().map(|&p| (m, Some(p))));
            } else {
                out.push((m, None));
            }
        }
        out
    }
}

/// `count` values spaced logarithmically from `hi` down to `lo`.
pub fn log_spaced(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![hi],
        _ => {
            let (a, b) = (hi.log10(), lo.log10());
            (0..count)
                .map(|k| 10f64.powf(a + (b - a) * k as f64 / (count - 1) as f64))
                .collect()
        }
    }
}

/// Logarithmically spaced integer sizes between `lo` and `hi`, deduplicated.
pub fn log_sizes(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = log_spaced(hi as f64, lo as f64, count)
        .into_iter()
        .rev()
        .map(|v| v.round() as usize)
        .collect();
    sizes.dedup();
    sizes
}

/// One CSV row. Run rows carry the numeric seed; aggregate rows carry
/// `mean` and average the successful runs of the group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub family: String,
    pub n: usize,
    #[serde(rename = "L")]
    pub pieces: usize,
    pub seed: String,
    pub method: String,
    pub policy: String,
    pub eps: f64,
    pub wall_time: f64,
    #[serde(serialize_with = "count_cell")]
    pub scalar_multiplications: f64,
    #[serde(serialize_with = "count_cell")]
    pub component_updates: f64,
    #[serde(serialize_with = "count_cell")]
    pub dequeues: f64,
    pub residual: f64,
    /// `true`, `false`, or `error` when the run failed.
    pub feasible: String,
}

impl SweepRow {
    pub fn is_aggregate(&self) -> bool {
        self.seed == "mean"
    }
}

fn count_cell<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.fract() == 0.0 && v.abs() < 2f64.powi(53) {
        s.serialize_u64(*v as u64)
    } else {
        s.serialize_f64(*v)
    }
}

/// Runs the sweep and returns run rows, each size followed by its
/// aggregate rows. Failures are recorded in the row and the sweep goes on.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>, BenchError> {
    run_sweep_with(config, |_| {})
}

/// [`run_sweep`] with a callback invoked as each row is produced.
pub fn run_sweep_with(
    config: &SweepConfig,
    mut on_row: impl FnMut(&SweepRow),
) -> Result<Vec<SweepRow>, BenchError> {
    config.validate()?;
    let combos = config.combinations();
    let mut active = vec![true; combos.len()];
    let mut rows = Vec::new();
    let family = config.family.name();
    for &n in &config.sizes {
        let mut group: Vec<SweepRow> = Vec::new();
        let mut exceeded = vec![false; combos.len()];
        for rep in 0..config.reps {
            let seed = config.seed_base + rep as u64;
            let problem = config
                .family
                .instance(n, config.pieces, config.scales, seed)?;
            for &eps in &config.tolerances {
                for (c, &(method, policy)) in combos.iter().enumerate() {
                    if !active[c] {
                        continue;
                    }
                    let mut opts = SolveOptions::new(eps, policy.unwrap_or(PolicyTag::Fifo));
                    opts.deadline = config.time_budget.map(|b| Instant::now() + b);
                    let started = Instant::now();
                    let outcome = solve_linear(&problem, method, None, &opts);
                    let elapsed = started.elapsed();
                    let mut row = SweepRow {
                        family: family.clone(),
                        n: problem.dim(),
                        pieces: problem.piece_count(),
                        seed: seed.to_string(),
                        method: method.as_str().to_string(),
                        policy: policy.map_or("-", PolicyTag::as_str).to_string(),
                        eps,
                        wall_time: elapsed.as_secs_f64(),
                        scalar_multiplications: 0.0,
                        component_updates: 0.0,
                        dequeues: 0.0,
                        residual: f64::NAN,
                        feasible: "error".into(),
                    };
                    if let Ok(r) = outcome {
                        row.wall_time = r.wall_time.as_secs_f64();
                        row.scalar_multiplications = r.counts.scalar_multiplications as f64;
                        row.component_updates = r.counts.component_updates as f64;
                        row.dequeues = r.counts.dequeues as f64;
                        row.residual = r.residual_inf;
                        row.feasible = r.feasible.to_string();
                    }
                    if config.time_budget.is_some_and(|b| elapsed > b) {
                        exceeded[c] = true;
                    }
                    on_row(&row);
                    group.push(row);
                }
            }
        }
        let aggregates = aggregate(&group, &combos, &config.tolerances);
        for row in &aggregates {
            on_row(row);
        }
        rows.extend(group);
        rows.extend(aggregates);
        for (a, e) in active.iter_mut().zip(exceeded) {
            *a &= !e;
        }
    }
    Ok(rows)
}

fn aggregate(
    group: &[SweepRow],
    combos: &[(Method, Option<PolicyTag>)],
    tolerances: &[f64],
) -> Vec<SweepRow> {
    let mut out = Vec::new();
    for &eps in tolerances {
        for &(method, policy) in combos {
            let method = method.as_str();
            let policy = policy.map_or("-", PolicyTag::as_str);
            let runs: Vec<&SweepRow> = group
                .iter()
                .filter(|r| r.method == method && r.policy == policy && r.eps == eps)
                .collect();
            let Some(first) = runs.first() else { continue };
            let ok: Vec<&&SweepRow> = runs.iter().filter(|r| r.feasible != "error").collect();
            let mean = |f: fn(&SweepRow) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
                }
            };
            let feasible = if ok.len() < runs.len() {
                "error"
            } else if ok.iter().all(|r| r.feasible == "true") {
                "true"
            } else {
                "false"
            };
            out.push(SweepRow {
                family: first.family.clone(),
                n: first.n,
                pieces: first.pieces,
                seed: "mean".into(),
                method: method.to_string(),
                policy: policy.to_string(),
                eps,
                wall_time: mean(|r| r.wall_time),
                scalar_multiplications: mean(|r| r.scalar_multiplications),
                component_updates: mean(|r| r.component_updates),
                dequeues: mean(|r| r.dequeues),
                residual: mean(|r| r.residual),
                feasible: feasible.into(),
            });
        }
    }
    out
}

/// RFC 4180 writer; the header row is emitted with the first record.
pub fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::Writer::from_writer(w)
}

/// RFC 4180 output with a header row.
pub fn write_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<(), BenchError> {
    let mut wtr = csv_writer(w);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}
