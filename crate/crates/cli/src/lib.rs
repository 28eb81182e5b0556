//! Command-line front end for the `brs` library.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod model;
pub mod output;
pub mod reproduce;

use std::ffi::OsString;
use std::path::PathBuf;

use brs::bound::brs_bound;
use brs::dp::{self, DpConfig, Problem};
use brs::oracle::{self, Scenario};
use brs::point_process::{self, max_density_bound, poisson_threshold};
use brs::rng::{Moments, DEFAULT_SEED};
use brs::tiling::{self, TilingModel};
use brs::{BrsError, DistributionSpec, MixtureModel};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::output::{csv_string, emit, fmt_num, json_string};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(BrsError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<BrsError> for CliError {
    fn from(e: BrsError) -> Self {
        use BrsError::*;
        match e {
            InvalidBudget(_)
            | InvalidParameter(_)
            | InvalidProbability(_)
            | InvalidFraction(_)
            | OutOfRange { .. }
            | TooLarge { .. }
            | Empty(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemArg {
    Knapsack,
    Subsequence,
}

#[derive(Debug, Parser)]
#[command(
    name = "brs",
    version,
    about = "Bounds on how many random variables fit under a sum budget"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output format (each command has its own default).
    #[arg(long, global = true)]
    pub format: Option<Format>,
    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, env = "BRS_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Cap on Monte Carlo worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the threshold equation for a mixture model.
    Solve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        budget: f64,
    },
    /// Expected-count bound, refined by Monte Carlo when --reps is given.
    Bound {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        budget: f64,
        #[arg(long)]
        reps: Option<u64>,
    },
    /// Monte Carlo estimate of the maximal count for a scenario.
    Mc {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        budget: f64,
        #[arg(long, default_value_t = 10_000)]
        reps: u64,
    },
    /// Value iteration for the sequential selection problems.
    Dp {
        #[arg(long, value_enum, default_value_t = ProblemArg::Subsequence)]
        problem: ProblemArg,
        /// Distribution file; standard uniform when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        n_max: usize,
        #[arg(long, default_value_t = 1024)]
        grid: usize,
        #[arg(long, default_value_t = 1.0)]
        x_sup: f64,
        /// Fail when halving the grid moves the final value by more.
        #[arg(long)]
        refine_tol: Option<f64>,
        /// Simulate the policy this many times (JSON output only).
        #[arg(long)]
        reps: Option<u64>,
    },
    /// Density inflation from choosing the shortest inter-arrival intervals.
    PoissonBias {
        /// Budget as a fraction of n, for rate-1 Poisson arrivals.
        #[arg(long = "fraction", default_values_t = vec![0.5, 0.05])]
        fractions: Vec<f64>,
        /// General gap model instead of Poisson.
        #[arg(long, requires = "budget")]
        model: Option<PathBuf>,
        #[arg(long)]
        budget: Option<f64>,
        /// Also simulate the realized density with this many arrivals.
        #[arg(long)]
        simulate: Option<usize>,
        /// Emit the e^{-t}(t+1) curve with one level column per fraction.
        #[arg(long)]
        curve: bool,
        #[arg(long, default_value_t = 4.0)]
        t_max: f64,
        #[arg(long, default_value_t = 400)]
        steps: usize,
    },
    /// Rectangle/ellipse area threshold and bound.
    Tiling {
        /// Tiling model file; overrides the count and area flags.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 300)]
        n_rect: u64,
        #[arg(long, default_value_t = 150)]
        n_ellipse: u64,
        #[arg(long, default_value_t = 1.0)]
        area: f64,
        /// Simulate selections; CSV output lists each replication.
        #[arg(long)]
        reps: Option<u64>,
    },
    /// N(n, fn) / (n F(t)) on single sample paths.
    Ratio {
        /// Distribution file; standard uniform when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        fraction: f64,
        #[arg(long = "n", default_values_t = vec![1000, 10_000, 100_000])]
        n_grid: Vec<usize>,
    },
    /// Recompute every published value and compare.
    Reproduce,
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let c = &cli.common;
    let content = match &cli.command {
        Command::Solve { model, budget } => solve(&model::load_mixture(model)?, *budget, c)?,
        Command::Bound {
            model,
            budget,
            reps,
        } => bound(&model::load_mixture(model)?, *budget, *reps, c)?,
        Command::Mc {
            model,
            budget,
            reps,
        } => mc(&model::load_scenario(model)?, *budget, *reps, c)?,
        Command::Dp {
            problem,
            model,
            n_max,
            grid,
            x_sup,
            refine_tol,
            reps,
        } => {
            let dist = optional_distribution(model.as_ref())?;
            let mut config = DpConfig::new(*n_max, *grid).x_sup(*x_sup);
            if let Some(tol) = refine_tol {
                config = config.refinement_tolerance(*tol);
            }
            let problem = match problem {
                ProblemArg::Knapsack => Problem::Knapsack,
                ProblemArg::Subsequence => Problem::Subsequence,
            };
            dp_command(problem, &dist, config, *reps, c)?
        }
        Command::PoissonBias {
            fractions,
            model,
            budget,
            simulate,
            curve,
            t_max,
            steps,
        } => {
            if *curve {
                poisson_curve(fractions, *t_max, *steps)?
            } else if let Some(path) = model {
                let report =
                    max_density_bound(&model::load_mixture(path)?, budget.expect("required"))?;
                match format(c, Format::Json) {
                    Format::Json => json_string(&report)?,
                    Format::Csv => density_csv(&[(None, report, None)])?,
                }
            } else {
                poisson_bias(fractions, *simulate, c)?
            }
        }
        Command::Tiling {
            model,
            n_rect,
            n_ellipse,
            area,
            reps,
        } => {
            let m = match model {
                Some(path) => model::load_tiling(path)?,
                None => TilingModel::new(*n_rect, *n_ellipse, *area)?,
            };
            tiling_command(&m, *reps, c)?
        }
        Command::Ratio {
            model,
            fraction,
            n_grid,
        } => {
            let dist = optional_distribution(model.as_ref())?;
            let rows = oracle::asymptotic_ratio(&dist, *fraction, n_grid, c.seed)?;
            match format(c, Format::Csv) {
                Format::Csv => csv_string(
                    &["n", "ratio"],
                    &rows
                        .iter()
                        .map(|(n, r)| vec![n.to_string(), fmt_num(*r)])
                        .collect::<Vec<_>>(),
                )?,
                Format::Json => json_string(
                    &rows
                        .iter()
                        .map(|(n, r)| json!({"n": n, "ratio": r}))
                        .collect::<Vec<_>>(),
                )?,
            }
        }
        Command::Reproduce => {
            let rows = reproduce::reproduce(c.seed, c.workers)?;
            match format(c, Format::Csv) {
                Format::Csv => csv_string(
                    &["label", "published", "computed", "tolerance", "pass"],
                    &rows
                        .iter()
                        .map(|r| {
                            vec![
                                r.label.clone(),
                                fmt_num(r.published),
                                fmt_num(r.computed),
                                r.check.describe(),
                                if r.pass { "pass" } else { "FAIL" }.to_string(),
                            ]
                        })
                        .collect::<Vec<_>>(),
                )?,
                Format::Json => json_string(&rows)?,
            }
        }
    };
    emit(c.out.as_deref(), &content)
}

fn format(c: &Common, default: Format) -> Format {
    c.format.unwrap_or(default)
}

fn optional_distribution(path: Option<&PathBuf>) -> Result<DistributionSpec, CliError> {
    match path {
        Some(p) => model::load_distribution(p),
        None => Ok(DistributionSpec::standard_uniform()),
    }
}

fn solve(model: &MixtureModel, budget: f64, c: &Common) -> Result<String, CliError> {
    let r = brs_bound(model, budget)?;
    let s = &r.solution;
    match format(c, Format::Json) {
        Format::Json => json_string(&json!({
            "t": s.t,
            "bound": r.bound,
            "trivial": s.trivial,
            "n": r.n,
            "equation_residual": s.equation_residual,
            "iterations": s.iterations,
        })),
        Format::Csv => csv_string(
            &[
                "t",
                "bound",
                "trivial",
                "n",
                "equation_residual",
                "iterations",
            ],
            &[vec![
                fmt_num(s.t),
                fmt_num(r.bound),
                s.trivial.to_string(),
                r.n.to_string(),
                fmt_num(s.equation_residual),
                s.iterations.to_string(),
            ]],
        ),
    }
}

fn bound(
    model: &MixtureModel,
    budget: f64,
    reps: Option<u64>,
    c: &Common,
) -> Result<String, CliError> {
    let r = brs_bound(model, budget)?;
    let mc = match reps {
        Some(reps) => Some(oracle::mc_estimate_with_workers(
            &Scenario::Mixture(model.clone()),
            budget,
            reps,
            c.seed,
            c.workers,
        )?),
        None => None,
    };
    let refined = mc
        .as_ref()
        .map(|m| r.refined(budget, m.mean_selected_sum))
        .transpose()?;
    let corollary = mc
        .as_ref()
        .map(|m| r.corollary(budget, m.p_below_n, m.mean_selected_sum))
        .transpose()?;
    match format(c, Format::Json) {
        Format::Json => json_string(&json!({
            "t": r.solution.t,
            "trivial": r.solution.trivial,
            "n": r.n,
            "bound": r.bound,
            "per_component": r.per_component,
            "refined": refined,
            "corollary": corollary,
            "monte_carlo": mc,
        })),
        Format::Csv => {
            let opt = |x: Option<f64>| x.map(fmt_num).unwrap_or_default();
            csv_string(
                &[
                    "t",
                    "trivial",
                    "n",
                    "bound",
                    "refined",
                    "corollary",
                    "mean_count",
                    "count_stderr",
                ],
                &[vec![
                    fmt_num(r.solution.t),
                    r.solution.trivial.to_string(),
                    r.n.to_string(),
                    fmt_num(r.bound),
                    opt(refined),
                    opt(corollary),
                    opt(mc.as_ref().map(|m| m.mean_count)),
                    opt(mc.as_ref().map(|m| m.count_stderr)),
                ]],
            )
        }
    }
}

fn mc(scenario: &Scenario, budget: f64, reps: u64, c: &Common) -> Result<String, CliError> {
    let r = oracle::mc_estimate_with_workers(scenario, budget, reps, c.seed, c.workers)?;
    match format(c, Format::Json) {
        Format::Json => json_string(&r),
        Format::Csv => csv_string(
            &[
                "scenario",
                "n",
                "s",
                "reps",
                "seed",
                "mean_count",
                "count_stderr",
                "mean_selected_sum",
                "selected_sum_stderr",
                "p_below_n",
                "bound_used",
            ],
            &[vec![
                r.scenario.clone(),
                r.n.to_string(),
                fmt_num(r.s),
                r.reps.to_string(),
                r.seed.to_string(),
                fmt_num(r.mean_count),
                fmt_num(r.count_stderr),
                fmt_num(r.mean_selected_sum),
                fmt_num(r.selected_sum_stderr),
                fmt_num(r.p_below_n),
                fmt_num(r.bound_used),
            ]],
        ),
    }
}

fn dp_command(
    problem: Problem,
    dist: &DistributionSpec,
    config: DpConfig,
    reps: Option<u64>,
    c: &Common,
) -> Result<String, CliError> {
    let table = dp::solve(problem, dist, config)?;
    match format(c, Format::Csv) {
        Format::Csv => csv_string(
            &["n", "x", "value", "alpha"],
            &table
                .rows()
                .map(|(n, x, v, a)| vec![n.to_string(), fmt_num(x), fmt_num(v), fmt_num(a)])
                .collect::<Vec<_>>(),
        ),
        Format::Json => {
            let at_sup: Vec<f64> = table
                .values
                .iter()
                .map(|row| *row.last().expect("nonempty"))
                .collect();
            let sim = match reps {
                Some(reps) => Some(dp::simulate_policy_with_workers(
                    &table,
                    table.n_max,
                    reps,
                    c.seed,
                    c.workers,
                )?),
                None => None,
            };
            json_string(&json!({
                "problem": match problem { Problem::Knapsack => "knapsack", Problem::Subsequence => "subsequence" },
                "n_max": table.n_max,
                "grid_size": table.x_grid.len(),
                "x_sup": table.x_sup,
                "final_value": table.final_value(),
                "values_at_x_sup": at_sup,
                "simulation": sim.map(|s| json!({
                    "horizon": s.horizon,
                    "reps": s.samples.len(),
                    "mean": s.mean,
                    "variance": s.variance,
                    "stderr": s.stderr,
                    "seed": s.seed,
                })),
            }))
        }
    }
}

type DensityRow = (Option<f64>, point_process::DensityBiasReport, Option<f64>);

fn density_csv(rows: &[DensityRow]) -> Result<String, CliError> {
    let opt = |x: Option<f64>| x.map(fmt_num).unwrap_or_default();
    csv_string(
        &[
            "fraction",
            "n",
            "s",
            "t",
            "trivial",
            "d_max_bound",
            "true_rate",
            "inflation_factor",
            "complement_min_density",
            "simulated_density",
        ],
        &rows
            .iter()
            .map(|(f, r, sim)| {
                vec![
                    opt(*f),
                    r.n.to_string(),
                    fmt_num(r.s),
                    fmt_num(r.t),
                    r.trivial.to_string(),
                    fmt_num(r.d_max_bound),
                    fmt_num(r.true_rate),
                    fmt_num(r.inflation_factor),
                    opt(r.complement_min_density),
                    opt(*sim),
                ]
            })
            .collect::<Vec<_>>(),
    )
}

fn poisson_bias(
    fractions: &[f64],
    simulate: Option<usize>,
    c: &Common,
) -> Result<String, CliError> {
    const N: u64 = 1000;
    let poisson = MixtureModel::iid(N, DistributionSpec::exponential(1.0))?;
    let mut rows = Vec::with_capacity(fractions.len());
    for (i, &f) in fractions.iter().enumerate() {
        poisson_threshold(f)?;
        let report = max_density_bound(&poisson, f * N as f64)?;
        let sim = match simulate {
            Some(n) => Some(point_process::simulate_condensed_density(
                &DistributionSpec::exponential(1.0),
                n,
                f,
                c.seed.wrapping_add(i as u64),
            )?),
            None => None,
        };
        rows.push((Some(f), report, sim));
    }
    match format(c, Format::Json) {
        Format::Json => json_string(
            &rows
                .iter()
                .map(|(f, r, sim)| json!({"fraction": f, "report": r, "simulated_density": sim}))
                .collect::<Vec<_>>(),
        ),
        Format::Csv => density_csv(&rows),
    }
}

fn poisson_curve(fractions: &[f64], t_max: f64, steps: usize) -> Result<String, CliError> {
    if !(t_max > 0.0) || steps == 0 {
        return Err(CliError::Usage(
            "curve needs t_max > 0 and steps >= 1".into(),
        ));
    }
    for &f in fractions {
        poisson_threshold(f)?;
    }
    let mut header = vec!["t".to_string(), "lhs".to_string()];
    header.extend(fractions.iter().map(|f| format!("level_{}", fmt_num(*f))));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = point_process::poisson_curve(t_max, steps)
        .into_iter()
        .map(|(t, lhs)| {
            let mut row = vec![fmt_num(t), fmt_num(lhs)];
            row.extend(fractions.iter().map(|f| fmt_num(1.0 - f)));
            row
        })
        .collect();
    csv_string(&header, &rows)
}

fn tiling_command(m: &TilingModel, reps: Option<u64>, c: &Common) -> Result<String, CliError> {
    let sol = tiling::tiling_threshold(m)?;
    let bound = tiling::tiling_bound(m)?;
    let runs = match reps {
        Some(reps) => Some(tiling::simulate_shape_selections(
            m, reps, c.seed, c.workers,
        )?),
        None => None,
    };
    match format(c, Format::Json) {
        Format::Json => {
            let summary = runs.as_ref().map(|runs| {
                let counts: Vec<f64> = runs.iter().map(|r| r.greedy_count as f64).collect();
                let areas: Vec<f64> = runs.iter().map(|r| r.threshold_area).collect();
                let (mc, ma) = (Moments::of(&counts), Moments::of(&areas));
                json!({
                    "reps": runs.len(),
                    "mean_greedy_count": mc.mean,
                    "greedy_count_stderr": mc.stderr(),
                    "mean_threshold_area": ma.mean,
                    "threshold_area_stderr": ma.stderr(),
                })
            });
            json_string(&json!({
                "model": m,
                "t": sol.t,
                "trivial": sol.trivial,
                "bound": bound,
                "simulation": summary,
            }))
        }
        Format::Csv => match runs {
            None => csv_string(
                &[
                    "n_rect",
                    "n_ellipse",
                    "target_area",
                    "t",
                    "trivial",
                    "bound",
                ],
                &[vec![
                    m.n_rect.to_string(),
                    m.n_ellipse.to_string(),
                    fmt_num(m.target_area),
                    fmt_num(sol.t),
                    sol.trivial.to_string(),
                    fmt_num(bound),
                ]],
            ),
            Some(runs) => csv_string(
                &[
                    "rep",
                    "greedy_count",
                    "greedy_area",
                    "threshold_count",
                    "threshold_area",
                ],
                &runs
                    .iter()
                    .enumerate()
                    .map(|(i, r)| {
                        vec![
                            i.to_string(),
                            r.greedy_count.to_string(),
                            fmt_num(r.greedy_area),
                            r.threshold_count.to_string(),
                            fmt_num(r.threshold_area),
                        ]
                    })
                    .collect::<Vec<_>>(),
            ),
        },
    }
}
