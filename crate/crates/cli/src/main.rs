use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use monolattice::bench::{log_sizes, log_spaced, run_sweep_with, Family, SweepConfig, SweepRow};
use monolattice::forge::hjb::{hjb_grid_problem, GridAxis, HjbGridSpec};
use monolattice::forge::io::{load_instance, save_instance};
use monolattice::forge::random::RandomScales;
use monolattice::forge::speed::{
    read_curvature_csv, resample_curvature, speed_planning_problem, SpeedPlanSpec,
};
use monolattice::linear::solve_linear;
use monolattice::{LinearGlbProblem, Method, PolicyTag, SolveOptions};

const EXIT_INFEASIBLE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "monolattice",
    version,
    about = "Monotone fixed-point solvers for max f(x) s.t. a <= x <= g(x)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance file.
    Gen {
        #[command(flatten)]
        source: GenArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve an instance and print a summary.
    Solve(SolveArgs),
    /// Run a benchmark sweep and write CSV.
    Sweep(SweepArgs),
    /// Write the equivalent linear program in CPLEX LP format.
    ExportLp {
        #[command(flatten)]
        source: GenArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Where an instance comes from: a file or a generator.
#[derive(Args, Clone)]
struct GenArgs {
    /// Instance file to read instead of generating.
    #[arg(long, conflicts_with = "family")]
    instance: Option<PathBuf>,
    /// ba, nws, hk, speedplan or hjb.
    #[arg(long)]
    family: Option<String>,
    /// Number of variables; grid points per axis for hjb.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Number of affine pieces L.
    #[arg(long = "pieces", default_value_t = 4)]
    pieces: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long = "m-a", default_value_t = 0.5)]
    m_a: f64,
    #[arg(long = "m-b", default_value_t = 1.0)]
    m_b: f64,
    /// Scalar cap U.
    #[arg(long = "cap", default_value_t = 1e5)]
    cap: f64,
    /// Speed planning: two-column (s, k) curvature CSV; flat if omitted.
    #[arg(long)]
    curvature: Option<PathBuf>,
    /// Speed planning: path length; defaults to the last CSV arc length or n − 1.
    #[arg(long = "s-f")]
    s_f: Option<f64>,
    #[arg(long = "v-bar", default_value_t = 10.0)]
    v_bar: f64,
    #[arg(long = "a-t", default_value_t = 1.0)]
    a_t: f64,
    #[arg(long = "a-n", default_value_t = 1.0)]
    a_n: f64,
    /// HJB: grid dimension (1 or 2); the grid spans [-1, 1] per axis with n points.
    #[arg(long = "hjb-dim", default_value_t = 1)]
    hjb_dim: usize,
    /// HJB: `still` (f = 0, one control) or `shift` (move one cell along each axis direction).
    #[arg(long = "hjb-model", default_value = "still")]
    hjb_model: String,
    /// HJB: running cost g, constant.
    #[arg(long = "hjb-cost", default_value_t = 1.0)]
    hjb_cost: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    h: f64,
}

impl GenArgs {
    fn load(&self) -> Result<LinearGlbProblem> {
        if let Some(path) = &self.instance {
            return load_instance(path).with_context(|| format!("loading {}", path.display()));
        }
        let Some(family) = &self.family else {
            bail!("pass --instance or --family");
        };
        match family.as_str() {
            "speedplan" => self.speed_plan(),
            "hjb" => self.hjb(),
            other => {
                let family: Family = other.parse().map_err(anyhow::Error::msg)?;
                let scales = RandomScales {
                    m_a: self.m_a,
                    m_b: self.m_b,
                    u: self.cap,
                };
                Ok(family.instance(self.n, self.pieces, scales, self.seed)?)
            }
        }
    }

    fn speed_plan(&self) -> Result<LinearGlbProblem> {
        let (s_f, curvature) = match &self.curvature {
            Some(path) => {
                let file =
                    File::open(path).with_context(|| format!("opening {}", path.display()))?;
                let samples = read_curvature_csv(file)?;
                let s_f = self.s_f.unwrap_or(samples[samples.len() - 1].0);
                (s_f, resample_curvature(&samples, s_f, self.n))
            }
            None => (self.s_f.unwrap_or(self.n as f64 - 1.0), vec![0.0; self.n]),
        };
        let spec = SpeedPlanSpec {
            s_f,
            n: self.n,
            curvature,
            v_bar: self.v_bar,
            a_t: self.a_t,
            a_n: self.a_n,
        };
        Ok(speed_planning_problem(&spec)?)
    }

    fn hjb(&self) -> Result<LinearGlbProblem> {
        let axis = GridAxis::new(-1.0, 1.0, self.n);
        let axes = vec![axis; self.hjb_dim];
        let cost = self.hjb_cost;
        let spec = match self.hjb_model.as_str() {
            "still" => HjbGridSpec::still(axes, cost, self.lambda, self.h),
            "shift" => {
                let speed = axis.spacing() / self.h;
                let controls = (0..self.hjb_dim)
                    .flat_map(|d| {
                        [speed, -speed].map(|s| {
                            let mut u = vec![0.0; self.hjb_dim];
                            u[d] = s;
                            u
                        })
                    })
                    .collect();
                HjbGridSpec::control_as_velocity(
                    axes,
                    controls,
                    move |_, _| cost,
                    self.lambda,
                    self.h,
                )
            }
            other => bail!("unknown HJB model `{other}` (expected still or shift)"),
        };
        Ok(hjb_grid_problem(&spec)?)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    source: GenArgs,
    #[arg(long, default_value = "selective-precond")]
    method: Method,
    #[arg(long, default_value = "fifo")]
    policy: PolicyTag,
    #[arg(long, default_value_t = 1e-9)]
    eps: f64,
    /// Sweep cap for fixed-point methods.
    #[arg(long = "max-iter")]
    max_iter: Option<u64>,
    /// Write x, one value per line.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// ba, nws, hk, speedplan, hjb or file:<path>.
    #[arg(long, default_value = "ba")]
    family: Family,
    /// Comma list, or log:<lo>:<hi>:<count>.
    #[arg(long, default_value = "log:10:11000:10")]
    sizes: String,
    /// Comma list, or log:<hi>:<lo>:<count>.
    #[arg(long, default_value = "1e-6")]
    tolerances: String,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Seconds per run; slower (method, policy) pairs are dropped for larger sizes.
    #[arg(long = "time-budget")]
    time_budget: Option<f64>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "fixed-plain,fixed-precond,selective-plain,selective-precond"
    )]
    methods: Vec<Method>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "variation,value,fifo,lifo"
    )]
    policies: Vec<PolicyTag>,
    #[arg(long = "pieces", default_value_t = 4)]
    pieces: usize,
    #[arg(long = "m-a", default_value_t = 0.5)]
    m_a: f64,
    #[arg(long = "m-b", default_value_t = 1.0)]
    m_b: f64,
    #[arg(long = "cap", default_value_t = 1e5)]
    cap: f64,
    /// Seed of the first repetition.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// CSV destination; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_sizes(spec: &str) -> Result<Vec<usize>> {
    if let Some(rest) = spec.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [lo, hi, count] = parts.as_slice() else {
            bail!("expected log:<lo>:<hi>:<count>, got `{spec}`");
        };
        return Ok(log_sizes(lo.parse()?, hi.parse()?, count.parse()?));
    }
    spec.split(',')
        .map(|s| s.trim().parse().with_context(|| format!("bad size `{s}`")))
        .collect()
}

fn parse_tolerances(spec: &str) -> Result<Vec<f64>> {
    if let Some(rest) = spec.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [hi, lo, count] = parts.as_slice() else {
            bail!("expected log:<hi>:<lo>:<count>, got `{spec}`");
        };
        return Ok(log_spaced(hi.parse()?, lo.parse()?, count.parse()?));
    }
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .with_context(|| format!("bad tolerance `{s}`"))
        })
        .collect()
}

fn cmd_solve(args: &SolveArgs) -> Result<ExitCode> {
    let problem = args.source.load()?;
    for w in problem.warnings() {
        eprintln!("warning: {w}");
    }
    let mut opts = SolveOptions::new(args.eps, args.policy);
    opts.max_iter = args.max_iter;
    let report = solve_linear(&problem, args.method, None, &opts)?;
    let mut out = io::stdout().lock();
    writeln!(out, "method: {}", report.method)?;
    if args.method.uses_policy() {
        writeln!(out, "policy: {}", args.policy)?;
    }
    writeln!(out, "n: {}", problem.dim())?;
    writeln!(out, "L: {}", problem.piece_count())?;
    writeln!(out, "eps: {:e}", report.epsilon)?;
    writeln!(out, "residual: {:e}", report.residual_inf)?;
    writeln!(out, "feasible: {}", report.feasible)?;
    if let Some(rate) = report.contraction_rate {
        writeln!(out, "contraction_rate: {rate}")?;
    }
    if let Some(bound) = report.error_bound() {
        writeln!(out, "error_bound: {bound:e}")?;
    }
    writeln!(
        out,
        "scalar_multiplications: {}",
        report.counts.scalar_multiplications
    )?;
    writeln!(
        out,
        "component_updates: {}",
        report.counts.component_updates
    )?;
    writeln!(out, "dequeues: {}", report.counts.dequeues)?;
    writeln!(out, "sweeps: {}", report.sweeps)?;
    writeln!(out, "wall_time_s: {}", report.wall_time.as_secs_f64())?;
    writeln!(out, "objective_sum: {}", report.x.iter().sum::<f64>())?;
    if problem.dim() <= 10 {
        let xs: Vec<String> = report.x.iter().map(|v| v.to_string()).collect();
        writeln!(out, "x: {}", xs.join(" "))?;
    }
    if let Some(path) = &args.out {
        let mut w = BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        );
        for v in &report.x {
            writeln!(w, "{v:e}")?;
        }
        w.flush()?;
    }
    Ok(if report.feasible {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_INFEASIBLE)
    })
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let config = SweepConfig {
        family: args.family.clone(),
        sizes: parse_sizes(&args.sizes)?,
        tolerances: parse_tolerances(&args.tolerances)?,
        pieces: args.pieces,
        scales: RandomScales {
            m_a: args.m_a,
            m_b: args.m_b,
            u: args.cap,
        },
        policies: args.policies.clone(),
        methods: args.methods.clone(),
        reps: args.reps,
        seed_base: args.seed,
        time_budget: args.time_budget.map(Duration::from_secs_f64),
    };
    let sink: Box<dyn Write> = match &args.out {
        Some(path) => {
            Box::new(File::create(path).with_context(|| format!("creating {}", path.display()))?)
        }
        None => Box::new(io::stdout().lock()),
    };
    // rows are streamed so long sweeps show progress
    let mut wtr = monolattice::bench::csv_writer(sink);
    let mut failure = None;
    run_sweep_with(&config, |row: &SweepRow| {
        if failure.is_none() {
            if let Err(e) = wtr
                .serialize(row)
                .and_then(|_| wtr.flush().map_err(Into::into))
            {
                failure = Some(e);
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(())
}

fn cmd_export_lp(source: &GenArgs, out: &PathBuf) -> Result<()> {
    let problem = source.load()?;
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(file);
    problem.to_lp_form().write_cplex(&mut w)?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen { source, out } => {
            let problem = source.load()?;
            for w in problem.warnings() {
                eprintln!("warning: {w}");
            }
            save_instance(&problem, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve(args) => cmd_solve(&args),
        Command::Sweep(args) => cmd_sweep(&args).map(|_| ExitCode::SUCCESS),
        Command::ExportLp { source, out } => {
            cmd_export_lp(&source, &out).map(|_| ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
