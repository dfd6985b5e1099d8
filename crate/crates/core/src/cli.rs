//! `entswitch` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 validation error, 3 failed
//! cross-check (only when `--check` is given).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analytic::{self, AreaBreakdown, BoundingLines, Extremes};
use crate::ctmc::{build_chain, capacities, solve_stationary, ChainState};
use crate::error::Error;
use crate::model::{validate_config, PolicyParams, SwitchConfig};
use crate::region::{self, Engine, RegionResult};
use crate::sim::{self, SimulationEstimate};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest relative gap tolerated between closed forms and the chain solve.
const CHECK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Model(_) => 2,
            CliError::Io { .. } | CliError::Manifest(_) => 1,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "entswitch", version, about = "Capacity regions of a bipartite/tripartite entanglement switch")]
pub struct Cli {
    /// Emit machine-readable JSON instead of a table.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct SystemArgs {
    /// Number of links.
    #[arg(long)]
    pub k: u32,
    /// Link-entanglement generation rate per link.
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    /// Per-qubit decoherence rate.
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Per-link buffer size (1 or 2).
    #[arg(long = "B", visible_alias = "buffer", default_value_t = 1)]
    pub buffer: u8,
}

impl SystemArgs {
    pub fn config(&self) -> SwitchConfig {
        SwitchConfig::new(self.k, self.mu, self.alpha, self.buffer)
    }
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize, PartialEq)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Closed-form capacities, extremes, bounding lines and areas (B=1).
    Analytic {
        #[command(flatten)]
        #[serde(flatten)]
        system: SystemArgs,
        /// Policy as r1,r2,r3.
        #[arg(long, default_value = "0,1,1")]
        r: PolicyParams,
        /// Cross-check against the chain solver.
        #[arg(long)]
        check: bool,
        /// Directory for result.json and manifest.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stationary distribution and capacities of the chain.
    Solve {
        #[command(flatten)]
        #[serde(flatten)]
        system: SystemArgs,
        #[arg(long, default_value = "0,1,1")]
        r: PolicyParams,
        /// Also print the transition table.
        #[arg(long)]
        dump: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo estimates next to the chain values.
    Simulate {
        #[command(flatten)]
        #[serde(flatten)]
        system: SystemArgs,
        #[arg(long, default_value = "0,1,1")]
        r: PolicyParams,
        /// Simulated seconds per replication.
        #[arg(long, default_value_t = 1e5)]
        duration: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Independent replications (at least 2).
        #[arg(long, default_value_t = 10)]
        reps: u32,
        /// Write a per-event CSV trace of the first replication.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Exit with code 3 when an estimate misses its chain value.
        #[arg(long)]
        check: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Policy-grid sweep written as CSV and JSON files.
    Region {
        #[command(flatten)]
        #[serde(flatten)]
        system: SystemArgs,
        #[arg(long, default_value_t = region::DEFAULT_STEP)]
        step: f64,
        /// analytic (B=1 only) or ctmc.
        #[arg(long, default_value = "ctmc")]
        engine: Engine,
        /// Also sweep the same system with B=1 and compare.
        #[arg(long)]
        compare_b1: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run a command from its manifest.json.
    Rerun {
        manifest: PathBuf,
        /// Override the output directory recorded in the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Analytic { .. } => "analytic",
            Command::Solve { .. } => "solve",
            Command::Simulate { .. } => "simulate",
            Command::Region { .. } => "region",
            Command::Rerun { .. } => "rerun",
        }
    }

    fn out_dir(&self) -> Option<&Path> {
        match self {
            Command::Analytic { out, .. }
            | Command::Solve { out, .. }
            | Command::Simulate { out, .. }
            | Command::Rerun { out, .. } => out.as_deref(),
            Command::Region { out, .. } => Some(out),
        }
    }

    fn set_out_dir(&mut self, dir: PathBuf) {
        match self {
            Command::Analytic { out, .. }
            | Command::Solve { out, .. }
            | Command::Simulate { out, .. }
            | Command::Rerun { out, .. } => *out = Some(dir),
            Command::Region { out, .. } => *out = dir,
        }
    }
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub parameters: Command,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub cross_check_passed: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        if self.cross_check_passed {
            0
        } else {
            3
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CrossCheck {
    pub reference_c2: f64,
    pub reference_c3: f64,
    pub max_relative_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AnalyticReport {
    pub config: SwitchConfig,
    pub policy: PolicyParams,
    pub c2: f64,
    pub c3: f64,
    pub extremes: Extremes,
    pub bounding_lines: BoundingLines,
    pub areas: AreaBreakdown,
    pub check: Option<CrossCheck>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StateProbability {
    pub state: ChainState,
    pub pi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolveReport {
    pub config: SwitchConfig,
    pub policy: PolicyParams,
    pub stationary: Vec<StateProbability>,
    pub residual: f64,
    pub c2: f64,
    pub c3: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SimulateReport {
    pub config: SwitchConfig,
    pub policy: PolicyParams,
    pub estimate: SimulationEstimate,
    pub chain: SolveReport,
    pub c2_within_ci: bool,
    pub c3_within_ci: bool,
    pub agrees: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ComparisonSummary {
    pub delta_c2_max: f64,
    pub delta_c3_max: f64,
    pub area_gain: f64,
    pub dominates_b1: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RegionSummary {
    pub config: SwitchConfig,
    pub engine: Engine,
    pub grid_step: f64,
    pub c2_max: f64,
    pub c3_max: f64,
    pub farthest_point: crate::model::CapacityPoint,
    pub areas: AreaBreakdown,
    pub frontier_area: f64,
    pub n_points: usize,
    pub n_frontier: usize,
    pub comparison: Option<ComparisonSummary>,
}

impl RegionSummary {
    fn new(r: &RegionResult, comparison: Option<ComparisonSummary>) -> Self {
        Self {
            config: r.config,
            engine: r.engine,
            grid_step: r.grid_step,
            c2_max: r.max_c2(),
            c3_max: r.max_c3(),
            farthest_point: r.farthest_point,
            areas: r.areas,
            frontier_area: r.frontier_area(),
            n_points: r.points.len(),
            n_frontier: r.upper_boundary.len(),
            comparison,
        }
    }
}

/// Runs a parsed command line, writing human or JSON output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<Outcome, CliError> {
    execute(&cli.command, cli.json, out)
}

fn execute(cmd: &Command, json: bool, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let mut files = Vec::new();
    let outcome = match cmd {
        Command::Analytic {
            system, r, check, ..
        } => {
            let report = analytic_report(system.config(), *r, *check)?;
            emit(out, json, &report, || format_analytic(&report))?;
            save_json(cmd.out_dir(), "result.json", &report, &mut files)?;
            Outcome {
                cross_check_passed: report.check.as_ref().is_none_or(|c| c.passed),
            }
        }
        Command::Solve {
            system, r, dump, ..
        } => {
            let (cfg, pol) = validate_config(system.config(), *r)?;
            let report = solve_report(cfg, pol)?;
            let table = if *dump {
                Some(build_chain(cfg, pol)?.to_string())
            } else {
                None
            };
            emit(out, json, &report, || {
                let mut s = format_solve(&report);
                if let Some(t) = &table {
                    s.push_str(t);
                }
                s
            })?;
            save_json(cmd.out_dir(), "result.json", &report, &mut files)?;
            Outcome {
                cross_check_passed: true,
            }
        }
        Command::Simulate {
            system,
            r,
            duration,
            seed,
            reps,
            trace,
            check,
            ..
        } => {
            let (cfg, pol) = validate_config(system.config(), *r)?;
            let estimate = sim::replicate(cfg, pol, *duration, *reps, *seed)?;
            if let Some(path) = trace {
                let file = fs::File::create(path).map_err(io_err(path.display().to_string()))?;
                let mut w = io::BufWriter::new(file);
                sim::simulate_traced(cfg, pol, *duration, *seed, &mut w)?;
                w.flush().map_err(io_err(path.display().to_string()))?;
                files.push(path.display().to_string());
            }
            let chain = solve_report(cfg, pol)?;
            let c2_within_ci = (estimate.c2_hat - chain.c2).abs() <= estimate.ci2;
            let c3_within_ci = (estimate.c3_hat - chain.c3).abs() <= estimate.ci3;
            let report = SimulateReport {
                config: cfg,
                policy: pol,
                estimate,
                chain,
                c2_within_ci,
                c3_within_ci,
                agrees: c2_within_ci && c3_within_ci,
            };
            emit(out, json, &report, || format_simulate(&report))?;
            save_json(cmd.out_dir(), "result.json", &report, &mut files)?;
            Outcome {
                cross_check_passed: !*check || report.agrees,
            }
        }
        Command::Region {
            system,
            step,
            engine,
            compare_b1,
            out: dir,
        } => {
            let cfg = system.config();
            fs::create_dir_all(dir).map_err(io_err(dir.display().to_string()))?;
            let (main, comparison) = if *compare_b1 {
                let cmp = region::compare_buffers(cfg.with_buffer(1), cfg, *step)?;
                write_region_files(dir, "b1_", &cmp.b1, &mut files)?;
                let summary = ComparisonSummary {
                    delta_c2_max: cmp.delta_c2_max,
                    delta_c3_max: cmp.delta_c3_max,
                    area_gain: cmp.area_gain(),
                    dominates_b1: cmp.b2.dominates(&cmp.b1, 1e-9),
                };
                (cmp.b2, Some(summary))
            } else {
                (region::sweep(cfg, *step, *engine)?, None)
            };
            write_region_files(dir, "", &main, &mut files)?;
            let summary = RegionSummary::new(&main, comparison);
            save_json(Some(dir), "summary.json", &summary, &mut files)?;
            emit(out, json, &summary, || format_region(&summary))?;
            Outcome {
                cross_check_passed: true,
            }
        }
        Command::Rerun {
            manifest,
            out: override_dir,
        } => {
            let text =
                fs::read_to_string(manifest).map_err(io_err(manifest.display().to_string()))?;
            let manifest: RunManifest = serde_json::from_str(&text)?;
            let mut cmd = manifest.parameters;
            if let Some(dir) = override_dir {
                cmd.set_out_dir(dir.clone());
            }
            return execute(&cmd, json, out);
        }
    };

    if let Some(dir) = cmd.out_dir() {
        let manifest = RunManifest {
            command: cmd.name().to_string(),
            tool_version: VERSION.to_string(),
            parameters: cmd.clone(),
            outputs: files,
        };
        let mut sink = Vec::new();
        save_json(Some(dir), "manifest.json", &manifest, &mut sink)?;
    }
    Ok(outcome)
}

fn emit<T: Serialize>(
    out: &mut dyn Write,
    json: bool,
    value: &T,
    human: impl FnOnce() -> String,
) -> Result<(), CliError> {
    let text = if json {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        s
    } else {
        human()
    };
    out.write_all(text.as_bytes()).map_err(io_err("stdout"))
}

fn save_json<T: Serialize>(
    dir: Option<&Path>,
    name: &str,
    value: &T,
    files: &mut Vec<String>,
) -> Result<(), CliError> {
    let Some(dir) = dir else { return Ok(()) };
    fs::create_dir_all(dir).map_err(io_err(dir.display().to_string()))?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).map_err(io_err(path.display().to_string()))?;
    files.push(path.display().to_string());
    Ok(())
}

fn write_file(path: PathBuf, text: String, files: &mut Vec<String>) -> Result<(), CliError> {
    fs::write(&path, text).map_err(io_err(path.display().to_string()))?;
    files.push(path.display().to_string());
    Ok(())
}

/// `points.csv` (`r1,r2,r3,c3,c2,on_frontier`), `frontier.csv` and `tdm.csv`.
fn write_region_files(
    dir: &Path,
    prefix: &str,
    r: &RegionResult,
    files: &mut Vec<String>,
) -> Result<(), CliError> {
    let mut points = String::from("r1,r2,r3,c3,c2,on_frontier\n");
    for (p, on) in r.points.iter().zip(&r.on_frontier) {
        let pol = p.policy;
        points.push_str(&format!(
            "{},{},{},{},{},{}\n",
            pol.r1, pol.r2, pol.r3, p.c3, p.c2, on
        ));
    }
    write_file(dir.join(format!("{prefix}points.csv")), points, files)?;

    let mut frontier = String::from("r1,r2,r3,c3,c2\n");
    for p in &r.upper_boundary {
        let pol = p.policy;
        frontier.push_str(&format!("{},{},{},{},{}\n", pol.r1, pol.r2, pol.r3, p.c3, p.c2));
    }
    write_file(dir.join(format!("{prefix}frontier.csv")), frontier, files)?;

    let t = r.tdm_segment;
    let tdm = format!("c3,c2\n0,{}\n{},0\n", t.c2_max, t.c3_max);
    write_file(dir.join(format!("{prefix}tdm.csv")), tdm, files)
}

pub fn analytic_report(
    cfg: SwitchConfig,
    pol: PolicyParams,
    check: bool,
) -> Result<AnalyticReport, CliError> {
    let (cfg, pol) = validate_config(cfg, pol)?;
    if cfg.buffer_size != 1 {
        return Err(Error::Unsupported("no closed form for B=2; use solve".into()).into());
    }
    let (point, extremes, areas) = if cfg.alpha == 0.0 {
        (
            analytic::capacities_b1(cfg, pol)?,
            analytic::extremes_b1(cfg)?,
            analytic::area_ratio_b1(cfg)?,
        )
    } else {
        let e = analytic::extremes_b1_decoherence(cfg)?;
        let f = analytic::tdm_offset(e.c2_max, e.c3_max, e.c3_hat, e.c2_hat).abs();
        (
            analytic::capacities_b1_decoherence(cfg, pol)?,
            e,
            AreaBreakdown::new(f * e.c3_max / 2.0, AreaBreakdown::tdm_term(e.c2_max, e.c3_max)),
        )
    };
    let check = if check {
        let reference = solve_report(cfg, pol)?;
        let rel = |a: f64, b: f64| {
            let scale = a.abs().max(b.abs());
            if scale == 0.0 {
                0.0
            } else {
                (a - b).abs() / scale
            }
        };
        let err = rel(point.c2, reference.c2).max(rel(point.c3, reference.c3));
        Some(CrossCheck {
            reference_c2: reference.c2,
            reference_c3: reference.c3,
            max_relative_error: err,
            passed: err <= CHECK_TOLERANCE,
        })
    } else {
        None
    };
    Ok(AnalyticReport {
        config: cfg,
        policy: pol,
        c2: point.c2,
        c3: point.c3,
        extremes,
        bounding_lines: analytic::bounding_lines_b1(cfg)?,
        areas,
        check,
    })
}

pub fn solve_report(cfg: SwitchConfig, pol: PolicyParams) -> Result<SolveReport, CliError> {
    let chain = build_chain(cfg, pol)?;
    let pi = solve_stationary(&chain)?;
    let point = capacities(&chain, &pi);
    Ok(SolveReport {
        config: chain.config,
        policy: chain.policy,
        stationary: pi
            .states
            .iter()
            .zip(&pi.pi)
            .map(|(&state, &pi)| StateProbability { state, pi })
            .collect(),
        residual: pi.residual,
        c2: point.c2,
        c3: point.c3,
    })
}

fn header(cfg: &SwitchConfig) -> String {
    format!(
        "k={} mu={} alpha={} B={}\n",
        cfg.k, cfg.mu, cfg.alpha, cfg.buffer_size
    )
}

fn format_analytic(r: &AnalyticReport) -> String {
    let mut s = header(&r.config);
    s += &format!("policy r=({})\n", r.policy);
    s += &format!("c2={:.6}\nc3={:.6}\n", r.c2, r.c3);
    let e = &r.extremes;
    s += &format!("C2*={:.6}  C3*={:.6}  farthest=({:.6}, {:.6})\n", e.c2_max, e.c3_max, e.c3_hat, e.c2_hat);
    let (l1, l2) = (r.bounding_lines.line1, r.bounding_lines.line2);
    s += &format!("line1: c2 = {:.6} c3 + {:.6}\n", l1.slope, l1.intercept);
    s += &format!("line2: c2 = {:.6} c3 + {:.6}\n", l2.slope, l2.intercept);
    s += &format!(
        "area above TDM={:.6}  TDM term={:.6}  ratio={:.6}\n",
        r.areas.a_triangle, r.areas.a_tdm, r.areas.ratio
    );
    if let Some(c) = &r.check {
        s += &format!(
            "chain check: c2={:.6} c3={:.6} max rel err={:.3e} {}\n",
            c.reference_c2,
            c.reference_c3,
            c.max_relative_error,
            if c.passed { "PASS" } else { "FAIL" }
        );
    }
    s
}

fn format_solve(r: &SolveReport) -> String {
    let mut s = header(&r.config);
    s += &format!("policy r=({})\n", r.policy);
    for sp in &r.stationary {
        s += &format!("pi{} = {:.10}\n", sp.state, sp.pi);
    }
    s += &format!("residual |pi Q|_inf = {:.3e}\n", r.residual);
    s += &format!("c2={:.6}\nc3={:.6}\n", r.c2, r.c3);
    s
}

fn format_simulate(r: &SimulateReport) -> String {
    let e = &r.estimate;
    let mut s = header(&r.config);
    s += &format!(
        "policy r=({})  duration={} reps={} seed={} events={}\n",
        r.policy, e.duration, e.replications, e.seed, e.total_events
    );
    s += "         simulated              chain\n";
    s += &format!("c2  {:.6} +/- {:.6}   {:.6}\n", e.c2_hat, e.ci2, r.chain.c2);
    s += &format!("c3  {:.6} +/- {:.6}   {:.6}\n", e.c3_hat, e.ci3, r.chain.c3);
    for (o, sp) in e.occupancy.iter().zip(&r.chain.stationary) {
        s += &format!(
            "pi{}  {:.6} +/- {:.6}   {:.6}\n",
            o.state, o.fraction, o.half_width, sp.pi
        );
    }
    s += &format!("agreement: {}\n", if r.agrees { "yes" } else { "no" });
    s
}

fn format_region(r: &RegionSummary) -> String {
    let mut s = header(&r.config);
    s += &format!(
        "grid step={} points={} frontier={}\n",
        r.grid_step, r.n_points, r.n_frontier
    );
    s += &format!("C2*={:.6}  C3*={:.6}\n", r.c2_max, r.c3_max);
    let f = &r.farthest_point;
    s += &format!(
        "farthest above TDM: r=({}) c3={:.6} c2={:.6}\n",
        f.policy, f.c3, f.c2
    );
    s += &format!(
        "area above TDM={:.6}  ratio={:.6}  area under frontier={:.6}\n",
        r.areas.a_triangle, r.areas.ratio, r.frontier_area
    );
    if let Some(c) = &r.comparison {
        s += &format!(
            "vs B=1: dC2*={:.6} dC3*={:.6} area gain={:.4} dominates={}\n",
            c.delta_c2_max, c.delta_c3_max, c.area_gain, c.dominates_b1
        );
    }
    s
}
