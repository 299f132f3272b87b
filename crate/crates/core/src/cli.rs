//! The `inferplan` command line: JSON in, JSON out.
//!
//! Exit status is 0 on success, 1 on domain errors (with `{error, detail}`
//! JSON on stderr) and 2 on usage errors.

use std::collections::BTreeMap;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::bench::{compare_strategies, run_suite, Suite};
use crate::dispatch::{
    compute_grid, preset_work_group, select_work_group_with, simulate_cache, thread_order, CacheModel, ConvConfig,
    ConvKind, CsvCost, SearchMode, SyntheticBowl, TensorLayout, WorkGroupConfig,
};
use crate::executor::{run_graph_with, ExecOptions};
use crate::graph::{liveness, peak_live_bytes, validate_graph, GraphModel, TensorId, TensorShape};
use crate::layout::{phwc4_dims, phwc4_pack, DenseTensor};
use crate::memplan::{plan, plan_mincostflow_with, FlowOptions, Strategy};
use crate::passes::{optimize, parse_pass_list, partition_delegate, Pass, DEFAULT_PIPELINE};

#[derive(Debug, Parser)]
#[command(name = "inferplan", version, about = "Inference planning and simulation toolkit")]
struct Cli {
    /// Pretty-print JSON output.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Summarize a graph: op, tensor and intermediate counts and peak live bytes.
    Inspect { graph: PathBuf },
    /// Apply rewrite passes and print the resulting graph.
    Optimize {
        graph: PathBuf,
        /// Comma-separated passes (remove_identity_ops, merge_pad, fuse_elementwise).
        #[arg(long)]
        passes: Option<String>,
        /// Print `{graph, log}` including the rewrite log.
        #[arg(long)]
        log: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split a graph into delegate and CPU fallback segments.
    Partition { graph: PathBuf },
    /// Pack a dense `{shape, data}` tensor into PHWC4.
    Pack {
        tensor: Option<PathBuf>,
        /// Shape `H,W,C` or `B,H,W,C`, for use with --dims-only instead of a file.
        #[arg(long, value_parser = parse_shape)]
        shape: Option<TensorShape>,
        /// Print only the (rows, cols) of the 2D view.
        #[arg(long)]
        dims_only: bool,
    },
    /// Plan intermediate-tensor memory.
    PlanMem {
        graph: PathBuf,
        #[arg(long, default_value = "greedy")]
        strategy: Strategy,
        /// Compare naive, greedy and min-cost-flow totals instead.
        #[arg(long)]
        compare: bool,
        /// Prune transitive reuse edges in the flow network.
        #[arg(long)]
        sparse_reuse: bool,
    },
    /// Choose a work group for a convolution.
    TuneWg {
        #[arg(long, value_enum, default_value = "synthetic")]
        cost: CostSource,
        /// CSV table with columns x,y,z,latency_ms (for --cost csv).
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Multiplicative noise of the synthetic cost.
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        /// Search all 27 lattice points instead of descending.
        #[arg(long)]
        exhaustive: bool,
        /// Output shape `H,W,C` of the convolution.
        #[arg(long, value_parser = parse_shape, default_value = "32,32,32")]
        shape: TensorShape,
        #[arg(long, default_value = "conv_2d")]
        op: ConvKind,
        /// Return the published preset for this GPU model instead of tuning.
        #[arg(long)]
        gpu: Option<String>,
    },
    /// Simulate first-load cache behavior of a 1×1 convolution.
    SimulateCache {
        #[arg(long, default_value = "phwc4")]
        layout: TensorLayout,
        #[arg(long, default_value_t = 64)]
        line_bytes: usize,
        /// Cache capacity in lines; unbounded when omitted.
        #[arg(long)]
        capacity_lines: Option<usize>,
        #[arg(long, default_value_t = 16)]
        load_bytes: usize,
        /// Input shape `H,W,C`.
        #[arg(long, value_parser = parse_shape)]
        shape: TensorShape,
        /// Work group `x,y,z`.
        #[arg(long, value_parser = parse_triple, default_value = "4,4,4")]
        wg: (usize, usize, usize),
    },
    /// Execute a graph with the reference executor.
    Run {
        #[arg(long)]
        graph: PathBuf,
        /// JSON object mapping input tensor ids to `{shape, data}`.
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long, default_value = "greedy")]
        plan: Strategy,
        #[arg(long)]
        check_pads: bool,
    },
    /// Compare planners over a graph suite.
    Bench {
        #[arg(long, default_value = "random")]
        suite: Suite,
        /// Half-open seed range `a..b`, or a single seed.
        #[arg(long, value_parser = parse_seeds, default_value = "0..100")]
        seeds: Range<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum CostSource {
    Synthetic,
    Csv,
}

fn parse_list(s: &str) -> Result<Vec<usize>, String> {
    s.split(',').map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}"))).collect()
}

fn parse_shape(s: &str) -> Result<TensorShape, String> {
    let shape = match *parse_list(s)?.as_slice() {
        [h, w, c] => TensorShape::hwc(h, w, c),
        [b, h, w, c] => TensorShape::new(b, h, w, c),
        _ => return Err("expected H,W,C or B,H,W,C".into()),
    };
    if !shape.is_valid() {
        return Err("dimensions must be positive".into());
    }
    Ok(shape)
}

fn parse_triple(s: &str) -> Result<(usize, usize, usize), String> {
    match parse_list(s)?.as_slice() {
        &[x, y, z] if x > 0 && y > 0 && z > 0 => Ok((x, y, z)),
        _ => Err("expected three positive integers x,y,z".into()),
    }
}

fn parse_seeds(s: &str) -> Result<Range<u64>, String> {
    let num = |p: &str| p.trim().parse::<u64>().map_err(|e| format!("{p:?}: {e}"));
    match s.split_once("..") {
        Some((a, b)) => Ok(num(a)?..num(b)?),
        None => {
            let a = num(s)?;
            Ok(a..a + 1)
        }
    }
}

/// Captured result of one command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutcome {
    pub status: i32,
    pub stdout: String,
    pub stderr: String,
}

struct Failure {
    error: &'static str,
    detail: String,
}

fn fail(error: &'static str, detail: impl ToString) -> Failure {
    Failure { error, detail: detail.to_string() }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn dispatch_command<I, T>(argv: I) -> CommandOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    CommandOutcome { status: 0, stdout: text, stderr: String::new() }
                }
                _ => CommandOutcome { status: 2, stdout: String::new(), stderr: text },
            };
        }
    };
    match execute(cli.command) {
        Ok(value) => {
            let mut stdout =
                if cli.pretty { serde_json::to_string_pretty(&value) } else { serde_json::to_string(&value) }
                    .expect("JSON values serialize");
            stdout.push('\n');
            CommandOutcome { status: 0, stdout, stderr: String::new() }
        }
        Err(f) => {
            let mut stderr = json!({ "error": f.error, "detail": f.detail }).to_string();
            stderr.push('\n');
            CommandOutcome { status: 1, stdout: String::new(), stderr }
        }
    }
}

fn to_value(v: impl Serialize) -> serde_json::Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| fail("io", format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| fail("io", format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<GraphModel, Failure> {
    let g = GraphModel::from_json(&read(path)?).map_err(|e| fail("parse", e))?;
    let violations = validate_graph(&g);
    if !violations.is_empty() {
        let detail: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(fail("invalid-graph", detail.join(", ")));
    }
    Ok(g)
}

fn execute(command: Command) -> Result<serde_json::Value, Failure> {
    match command {
        Command::Inspect { graph } => {
            let g = load_graph(&graph)?;
            Ok(json!({
                "ops": g.ops().len(),
                "tensors": g.tensors().len(),
                "intermediates": liveness(&g).len(),
                "peak_live_bytes": peak_live_bytes(&g),
            }))
        }
        Command::Optimize { graph, passes, log, out } => {
            let g = load_graph(&graph)?;
            let passes: Vec<Pass> = match passes {
                Some(list) => parse_pass_list(&list).map_err(|e| fail("usage", e))?,
                None => DEFAULT_PIPELINE.to_vec(),
            };
            let (optimized, rewrite_log) = optimize(&g, &passes);
            if let Some(out) = out {
                write(&out, &optimized.to_json())?;
            }
            Ok(if log { json!({ "graph": optimized, "log": rewrite_log }) } else { to_value(&optimized) })
        }
        Command::Partition { graph } => Ok(to_value(partition_delegate(&load_graph(&graph)?))),
        Command::Pack { tensor, shape, dims_only } => {
            let dense = match &tensor {
                Some(path) => Some(
                    serde_json::from_str::<DenseTensor>(&read(path)?)
                        .map_err(|e| fail("parse", e))
                        .and_then(|t| DenseTensor::new(t.shape, t.data).map_err(|e| fail("layout", e)))?,
                ),
                None => None,
            };
            let shape = match (&dense, shape) {
                (Some(t), _) => t.shape,
                (None, Some(s)) if dims_only => s,
                _ => return Err(fail("usage", "pack needs a tensor file, or --shape with --dims-only")),
            };
            let (rows, cols) = phwc4_dims(shape);
            if dims_only {
                return Ok(json!({ "rows": rows, "cols": cols }));
            }
            let buf = phwc4_pack(dense.as_ref().expect("file given"));
            Ok(json!({ "shape": shape, "rows": rows, "cols": cols, "data": buf.data() }))
        }
        Command::PlanMem { graph, strategy, compare, sparse_reuse } => {
            let g = load_graph(&graph)?;
            if compare {
                return Ok(to_value(compare_strategies(&g).map_err(|e| fail("plan", e))?));
            }
            let p = match strategy {
                Strategy::MinCostFlow => plan_mincostflow_with(&g, FlowOptions { sparse_reuse }),
                s => plan(&g, s),
            }
            .map_err(|e| fail("plan", e))?;
            Ok(to_value(p))
        }
        Command::TuneWg { cost, table, trials, seed, noise, exhaustive, shape, op, gpu } => {
            if let Some(model) = gpu {
                let wg = preset_work_group(&model, op).map_err(|e| fail("unknown-model", e))?;
                return Ok(json!({ "gpu": model, "op_kind": op, "config": wg }));
            }
            let cfg = ConvConfig { op_kind: op, ..ConvConfig::pointwise(shape.h, shape.w, shape.c, shape.c) };
            let mode = if exhaustive { SearchMode::Exhaustive } else { SearchMode::Descent };
            let outcome = match cost {
                CostSource::Synthetic => {
                    let mut bowl = SyntheticBowl::new(seed, noise);
                    select_work_group_with(bowl.measure(), &cfg, trials, mode).map_err(|e| fail("tune", e))?
                }
                CostSource::Csv => {
                    let path = table.ok_or_else(|| fail("usage", "--cost csv needs --table"))?;
                    let file = fs::File::open(&path).map_err(|e| fail("io", format!("{}: {e}", path.display())))?;
                    let mut t = CsvCost::from_reader(file).map_err(|e| fail("cost-table", e))?;
                    select_work_group_with(t.measure(), &cfg, trials, mode).map_err(|e| fail("tune", e))?
                }
            };
            Ok(to_value(outcome))
        }
        Command::SimulateCache { layout, line_bytes, capacity_lines, load_bytes, shape, wg } => {
            let model = CacheModel { line_bytes, capacity_lines, load_bytes };
            let wg = WorkGroupConfig::new(wg.0, wg.1, wg.2).map_err(|e| fail("usage", e))?;
            let conv = ConvConfig {
                in_shape: shape,
                out_shape: shape,
                ..ConvConfig::pointwise(shape.h, shape.w, shape.c, shape.c)
            };
            let grid = compute_grid(conv.out_shape, wg);
            let report =
                simulate_cache(layout, &conv, &model, thread_order(&grid)).map_err(|e| fail("cache-model", e))?;
            Ok(to_value(report))
        }
        Command::Run { graph, inputs, plan: strategy, check_pads } => {
            let g = load_graph(&graph)?;
            let inputs: BTreeMap<TensorId, DenseTensor> =
                serde_json::from_str(&read(&inputs)?).map_err(|e| fail("parse", e))?;
            let p = plan(&g, strategy).map_err(|e| fail("plan", e))?;
            let options = ExecOptions { check_pads, check_liveness: check_pads };
            let outputs = run_graph_with(&g, &p, &inputs, options).map_err(|e| fail("execution", e))?;
            Ok(to_value(outputs))
        }
        Command::Bench { suite, seeds, out } => {
            let report = run_suite(suite, seeds).map_err(|e| fail("plan", e))?;
            if let Some(out) = out {
                let text = serde_json::to_string(&report).expect("report serializes");
                write(&out, &text)?;
            }
            Ok(to_value(report))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seeds("3..7").unwrap(), 3..7);
        assert_eq!(parse_seeds("5").unwrap(), 5..6);
        assert!(parse_seeds("a..b").is_err());
    }

    #[test]
    fn shapes() {
        assert_eq!(parse_shape("8,6,12").unwrap(), TensorShape::hwc(8, 6, 12));
        assert!(parse_shape("8,0,12").is_err());
        assert!(parse_shape("8,6").is_err());
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        assert_eq!(dispatch_command(["inferplan", "frobnicate"]).status, 2);
        assert_eq!(dispatch_command(["inferplan", "inspect", "--bogus", "x"]).status, 2);
    }

    #[test]
    fn version_prints() {
        let out = dispatch_command(["inferplan", "--version"]);
        assert_eq!(out.status, 0);
        assert!(out.stdout.contains(env!("CARGO_PKG_VERSION")));
    }

    #[test]
    fn dims_only_pack() {
        let out = dispatch_command(["inferplan", "pack", "--shape", "8,6,12", "--dims-only"]);
        assert_eq!(out.stdout.trim(), r#"{"cols":24,"rows":24}"#);
    }
}
