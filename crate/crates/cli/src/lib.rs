//! `maxcut solve <file>`: load an instance, solve it serially or with
//! in-process workers, and print a report.
//!
//! Exit codes: 0 when optimality is proved, 2 when a budget stopped the
//! run early, 1 on any input or usage error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use maxcut::bnb::SolveStats;
use maxcut::{
    read_instance, solve_parallel, solve_serial, Branching, Graph, Solution, SolverConfig,
};
use serde::Serialize;
use serde_json::Value;

pub const EXIT_OPTIMAL: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "maxcut", version, about = "Exact Max-Cut solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one instance to proven optimality.
    Solve(SolveArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BranchingArg {
    Most,
    Least,
}

#[derive(Debug, clap::Args)]
struct SolveArgs {
    /// Instance file: `n m` header, then one `i j w` line per edge (1-based).
    file: PathBuf,
    /// Initial ADMM penalty.
    #[arg(long, default_value_t = 1.6)]
    rho: f64,
    /// ADMM stopping tolerance on the relative residuals.
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = BranchingArg::Most)]
    branching: BranchingArg,
    /// Worker count; 1 runs the serial solver.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cutting-plane rounds per non-root node.
    #[arg(long, default_value_t = 25)]
    max_rounds: usize,
    /// Stop after evaluating this many nodes (per worker when parallel).
    #[arg(long)]
    node_limit: Option<u64>,
    /// Stop after this many seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Also write the report as JSON to this path.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Suppress the text report.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub rho: f64,
    pub eps: f64,
    pub branching: Branching,
    pub workers: usize,
    pub seed: u64,
    pub max_rounds: usize,
    pub node_limit: Option<u64>,
    pub time_limit_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CutCounts {
    pub triangle: u64,
    pub pentagonal: u64,
    pub heptagonal: u64,
}

/// Everything the CLI reports about one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub instance: String,
    pub n: usize,
    pub m: usize,
    #[serde(serialize_with = "cut_number")]
    pub optimum: f64,
    #[serde(serialize_with = "cut_number")]
    pub upper_bound: f64,
    pub proof: bool,
    /// 1-based vertices on the side opposite vertex `n`.
    pub side: Vec<usize>,
    pub nodes: u64,
    pub wall_time_s: f64,
    pub admm_iterations: u64,
    pub cutting_rounds: u64,
    pub cuts_separated: CutCounts,
    pub config: ConfigEcho,
}

/// Integral values print without a fractional part.
fn cut_number<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.fract() == 0.0 && v.abs() < 2f64.powi(53) {
        s.serialize_i64(*v as i64)
    } else {
        s.serialize_f64(*v)
    }
}

fn format_number(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{v}")
}

impl RunReport {
    pub fn new(instance: String, g: &Graph, sol: &Solution, config: ConfigEcho) -> Self {
        let SolveStats {
            admm_iterations,
            cutting_rounds,
            cuts_separated,
            ..
        } = sol.stats;
        RunReport {
            schema: 1,
            instance,
            n: g.n(),
            m: g.edges().len(),
            optimum: sol.optimum,
            upper_bound: sol.upper_bound,
            proof: sol.proof,
            side: sol.best_cut.side_one(),
            nodes: sol.nodes_evaluated,
            wall_time_s: sol.wall_time.as_secs_f64(),
            admm_iterations,
            cutting_rounds,
            cuts_separated: CutCounts {
                triangle: cuts_separated[0],
                pentagonal: cuts_separated[1],
                heptagonal: cuts_separated[2],
            },
            config,
        }
    }

    pub fn to_json(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        // JSON has no infinity; an unbounded gap is reported as null
        if !self.upper_bound.is_finite() {
            v["upper_bound"] = Value::Null;
        }
        v
    }

    pub fn render_text(&self) -> String {
        let side: Vec<String> = self.side.iter().map(usize::to_string).collect();
        let c = &self.cuts_separated;
        let mut out = String::new();
        out += &format!("instance {}\n", self.instance);
        out += &format!("vertices {} edges {}\n", self.n, self.m);
        out += &format!("optimum {}\n", format_number(self.optimum));
        out += &format!("upper_bound {}\n", format_number(self.upper_bound));
        out += &format!("proof {}\n", if self.proof { "yes" } else { "no" });
        out += &format!("nodes {}\n", self.nodes);
        out += &format!("time {:.3}s\n", self.wall_time_s);
        out += &format!("admm_iterations {}\n", self.admm_iterations);
        out += &format!("cuts {} {} {}\n", c.triangle, c.pentagonal, c.heptagonal);
        out += &format!("side {}\n", side.join(" "));
        out
    }
}

fn solve(args: &SolveArgs) -> Result<RunReport, String> {
    let file =
        File::open(&args.file).map_err(|e| format!("cannot open {}: {e}", args.file.display()))?;
    let g =
        read_instance(BufReader::new(file)).map_err(|e| format!("{}: {e}", args.file.display()))?;
    let time_limit = match args.time_limit {
        Some(t) if !(t >= 0.0 && t.is_finite()) => return Err(format!("invalid --time-limit {t}")),
        t => t.map(Duration::from_secs_f64),
    };
    let cfg = SolverConfig {
        rho0: args.rho,
        eps: args.eps,
        branching: match args.branching {
            BranchingArg::Most => Branching::MostFractional,
            BranchingArg::Least => Branching::LeastFractional,
        },
        workers: args.workers,
        seed: args.seed,
        max_rounds: args.max_rounds,
        node_limit: args.node_limit,
        time_limit,
        ..SolverConfig::default()
    };
    let sol = if cfg.workers > 1 {
        solve_parallel(&g, &cfg)
    } else {
        solve_serial(&g, &cfg)
    };
    let sol = sol.map_err(|e| e.to_string())?;
    let echo = ConfigEcho {
        rho: cfg.rho0,
        eps: cfg.eps,
        branching: cfg.branching,
        workers: cfg.workers,
        seed: cfg.seed,
        max_rounds: cfg.max_rounds,
        node_limit: cfg.node_limit,
        time_limit_s: args.time_limit,
    };
    Ok(RunReport::new(
        args.file.display().to_string(),
        &g,
        &sol,
        echo,
    ))
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_ERROR
            } else {
                EXIT_OPTIMAL
            };
        }
    };
    let Command::Solve(args) = cli.command;
    let report = match solve(&args) {
        Ok(r) => r,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_ERROR;
        }
    };
    if let Some(path) = &args.json {
        let text = serde_json::to_string_pretty(&report.to_json()).expect("json renders");
        if let Err(e) = std::fs::write(path, text + "\n") {
            eprintln!("error: cannot write {}: {e}", path.display());
            return EXIT_ERROR;
        }
    }
    if !args.quiet {
        let _ = io::stdout().write_all(report.render_text().as_bytes());
    }
    if report.proof {
        EXIT_OPTIMAL
    } else {
        EXIT_BUDGET
    }
}
