//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage/parse/validation error, 2 infeasible or
//! unsupported assignment, 3 exhaustive search-space limit exceeded.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::casegen::{
    gen_biometric, gen_chain, gen_matmul, gen_random, BiometricSpec, MatMulSpec, OpWeights,
};
use crate::circuit::{load_circuit, Circuit, NodeId, OpKind, DEFAULT_BITWIDTH};
use crate::cost_model::{
    derive_profile, load_profile, shipped_profile, CostProfile, PriceSpec, RawMeasurement, Scheme,
    SHIPPED,
};
use crate::optimizer::{
    best_of, bottom_up, exhaustive_optimal, fixed_sharing, format_space, hill_climbing_with,
    top_down, HillObjective, HillOptions, OptimizeError, OptimizeResult, SolverLimits, SweepOrder,
    DEFAULT_MAX_SPACE,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_SPACE_LIMIT: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "mixcost",
    version,
    about = "Cost-minimizing sharing-scheme assignment for mixed-protocol circuits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Assign schemes with one heuristic and report the cost.
    Optimize(OptimizeArgs),
    /// Compare all heuristics against pure-yao sharing.
    Compare(CompareArgs),
    /// Generate a circuit.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Evaluate a circuit in the clear.
    Eval {
        circuit: PathBuf,
        /// JSON object mapping In-node ids or names to integers.
        inputs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a cost profile from measurements and a price sheet.
    DeriveProfile {
        measurements: PathBuf,
        prices: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "derived")]
        name: String,
        /// Unit of stored values in cents.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
    /// Inspect the shipped cost profiles.
    #[command(subcommand)]
    Profiles(ProfilesCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Heuristic {
    Pure,
    BottomUp,
    TopDown,
    Hill,
    Exhaustive,
    Best,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Unit {
    Cent,
    MilliCent,
}

impl Unit {
    fn label(self) -> &'static str {
        match self {
            Unit::Cent => "cents",
            Unit::MilliCent => "1e-3 cents",
        }
    }

    fn format(self, cents: f64) -> String {
        match self {
            Unit::Cent => scientific(cents),
            Unit::MilliCent => format!("{:.4}", cents * 1e3),
        }
    }
}

/// `1.234500e-06` style: two-digit signed exponent.
fn scientific(x: f64) -> String {
    let s = format!("{x:.6e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Objective {
    TotalDelta,
    NodeCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Order {
    Forward,
    Reverse,
}

#[derive(Debug, Args)]
struct CommonArgs {
    circuit: PathBuf,
    /// Profile file, or the name of a shipped profile.
    profile: String,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "cent")]
    unit: Unit,
    #[arg(long, default_value_t = DEFAULT_MAX_SPACE)]
    max_space: u64,
    #[arg(long)]
    max_passes: Option<usize>,
    /// Local objective for hill climbing.
    #[arg(long, value_enum, default_value = "total-delta")]
    objective: Objective,
    /// Node visiting order for hill climbing.
    #[arg(long, value_enum, default_value = "forward")]
    order: Order,
}

impl CommonArgs {
    fn limits(&self) -> SolverLimits {
        SolverLimits {
            max_space: self.max_space,
            max_passes: self.max_passes,
        }
    }

    fn hill_options(&self) -> HillOptions {
        HillOptions {
            objective: match self.objective {
                Objective::TotalDelta => HillObjective::TotalDelta,
                Objective::NodeCost => HillObjective::NodeCost,
            },
            order: match self.order {
                Order::Forward => SweepOrder::Forward,
                Order::Reverse => SweepOrder::Reverse,
            },
        }
    }
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum, default_value = "best")]
    heuristic: Heuristic,
    /// Scheme for pure sharing and the hill-climbing start.
    #[arg(long, default_value = Scheme::YAO)]
    scheme: String,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Hill-climbing start scheme.
    #[arg(long, default_value = Scheme::YAO)]
    scheme: String,
}

#[derive(Debug, Subcommand)]
enum GenCommand {
    Biometric {
        #[arg(long, default_value_t = 30)]
        rows: usize,
        #[arg(long, default_value_t = 5)]
        attrs: usize,
        #[arg(long, default_value_t = DEFAULT_BITWIDTH)]
        bitwidth: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Matmul {
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_BITWIDTH)]
        bitwidth: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Chain {
        #[arg(long)]
        op: OpKind,
        #[arg(long)]
        len: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Random {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        ops: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum ProfilesCommand {
    List {
        #[arg(long)]
        json: bool,
    },
    Show {
        name: String,
    },
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl ToString) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.to_string(),
        }
    }
}

impl From<OptimizeError> for Failure {
    fn from(e: OptimizeError) -> Self {
        let code = match e {
            OptimizeError::SearchSpaceTooLarge { .. } => EXIT_SPACE_LIMIT,
            OptimizeError::UnsupportedScheme { .. } | OptimizeError::UnknownScheme(_) => {
                EXIT_INFEASIBLE
            }
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                if !text.contains("Usage:") {
                    let _ = writeln!(stderr, "\n{}", usage_for(&args));
                }
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{text}");
                EXIT_OK
            };
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

/// Usage line of the deepest subcommand named in `args`.
fn usage_for(args: &[OsString]) -> String {
    let mut cmd = Cli::command();
    let mut names = Vec::new();
    for arg in args.iter().skip(1).filter_map(|a| a.to_str()) {
        let mut current = &cmd;
        for n in &names {
            current = current.find_subcommand(n).expect("visited subcommand");
        }
        if current.find_subcommand(arg).is_some() {
            names.push(arg.to_string());
        } else if !arg.starts_with('-') {
            break;
        }
    }
    let mut current = &mut cmd;
    current.build();
    for n in &names {
        current = current.find_subcommand_mut(n).expect("visited subcommand");
    }
    current.render_usage().to_string()
}

fn dispatch(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    match command {
        Command::Optimize(args) => cmd_optimize(&args, stdout),
        Command::Compare(args) => cmd_compare(&args, stdout),
        Command::Gen(g) => cmd_gen(g, stdout, stderr),
        Command::Eval {
            circuit,
            inputs,
            out,
        } => cmd_eval(&circuit, &inputs, out.as_deref(), stdout),
        Command::DeriveProfile {
            measurements,
            prices,
            out,
            name,
            scale,
        } => cmd_derive_profile(&measurements, &prices, out.as_deref(), &name, scale, stdout),
        Command::Profiles(ProfilesCommand::List { json }) => {
            let names: Vec<&str> = SHIPPED.iter().map(|(name, _)| *name).collect();
            let text = if json {
                format!(
                    "{}\n",
                    serde_json::to_string(&names).expect("names serialize")
                )
            } else {
                names.iter().map(|n| format!("{n}\n")).collect()
            };
            emit(stdout, None, &text)
        }
        Command::Profiles(ProfilesCommand::Show { name }) => {
            let profile = shipped_profile(&name).map_err(Failure::usage)?;
            emit(stdout, None, &profile.to_json())
        }
    }
}

fn emit(stdout: &mut dyn Write, out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::usage(e.to_string())),
    }
}

fn read_circuit(path: &Path) -> Result<Circuit, Failure> {
    load_circuit(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// A path to a profile file, otherwise a shipped profile name.
fn read_profile(arg: &str) -> Result<CostProfile, Failure> {
    let path = Path::new(arg);
    if path.is_file() {
        load_profile(path).map_err(|e| Failure::usage(format!("{arg}: {e}")))
    } else {
        shipped_profile(arg).map_err(|e| Failure::usage(format!("{arg}: {e}")))
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn run_heuristic(
    args: &OptimizeArgs,
    circuit: &Circuit,
    profile: &CostProfile,
) -> Result<OptimizeResult, Failure> {
    let common = &args.common;
    let scheme = Scheme::new(args.scheme.as_str());
    Ok(match args.heuristic {
        Heuristic::Pure => fixed_sharing(circuit, profile, &scheme)?,
        Heuristic::BottomUp => bottom_up(circuit, profile),
        Heuristic::TopDown => top_down(circuit, profile),
        Heuristic::Hill => hill_climbing_with(
            circuit,
            profile,
            &scheme,
            &common.limits(),
            common.hill_options(),
        )?,
        Heuristic::Exhaustive => exhaustive_optimal(circuit, profile, &common.limits())?,
        Heuristic::Best => best_of(circuit, profile, &common.limits()),
    })
}

fn cmd_optimize(args: &OptimizeArgs, stdout: &mut dyn Write) -> CmdResult {
    let common = &args.common;
    let circuit = read_circuit(&common.circuit)?;
    let profile = read_profile(&common.profile)?;
    let result = run_heuristic(args, &circuit, &profile)?;
    let text = if common.json {
        format!(
            "{}\n",
            serde_json::to_string_pretty(&result).expect("result serializes")
        )
    } else {
        optimize_table(&circuit, &profile, &result, common.unit)
    };
    emit(stdout, common.out.as_deref(), &text)
}

fn optimize_table(
    circuit: &Circuit,
    profile: &CostProfile,
    r: &OptimizeResult,
    unit: Unit,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "heuristic: {}", r.heuristic);
    let _ = writeln!(s, "profile: {}", profile.name());
    let _ = writeln!(s, "assignment: {}", r.assignment.to_json());
    if r.heuristic == "hill-climbing" {
        let _ = writeln!(
            s,
            "sweeps: {}{}",
            r.iterations,
            if r.limit_exceeded {
                " (limit reached)"
            } else {
                ""
            }
        );
    }
    let _ = writeln!(s, "costs in {}", unit.label());
    let rows: Vec<[String; 5]> = r
        .report
        .per_node
        .iter()
        .map(|n| {
            let node = &circuit.nodes()[n.id.0];
            [
                n.id.to_string(),
                node.op.to_string(),
                r.assignment
                    .get(n.id)
                    .map(|s| s.to_string())
                    .unwrap_or_default(),
                unit.format(n.op_compute + n.op_network),
                unit.format(n.total()),
            ]
        })
        .collect();
    s.push_str(&table(
        &["node", "op", "scheme", "op cost", "total"],
        &rows,
        3,
    ));
    let _ = writeln!(s, "total compute: {}", unit.format(r.report.total_compute));
    let _ = writeln!(s, "total network: {}", unit.format(r.report.total_network));
    let _ = writeln!(s, "total: {}", unit.format(r.report.total));
    s
}

/// The first `left` columns are left-aligned, the rest right-aligned.
fn table<const N: usize>(header: &[&str; N], rows: &[[String; N]], left: usize) -> String {
    let mut widths = header.map(str::len);
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: [&str; N]| {
        let mut l = String::new();
        for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
            if i > 0 {
                l.push_str("  ");
            }
            if i < left {
                let _ = write!(l, "{cell:<w$}");
            } else {
                let _ = write!(l, "{cell:>w$}");
            }
        }
        l.truncate(l.trim_end().len());
        l.push('\n');
        l
    };
    let mut s = line(*header);
    for row in rows {
        s.push_str(&line(std::array::from_fn(|i| row[i].as_str())));
    }
    s
}

#[derive(Debug, Serialize)]
struct CompareRow {
    heuristic: String,
    compute: f64,
    network: f64,
    total: f64,
    /// `100 * (1 - total / pure-yao total)`.
    reduction_pct: f64,
    winner: bool,
}

fn cmd_compare(args: &CompareArgs, stdout: &mut dyn Write) -> CmdResult {
    let common = &args.common;
    let circuit = read_circuit(&common.circuit)?;
    let profile = read_profile(&common.profile)?;
    let limits = common.limits();
    let start = Scheme::new(args.scheme.as_str());

    let pure = fixed_sharing(&circuit, &profile, &Scheme::yao())?;
    let mut results = vec![
        pure.clone(),
        hill_climbing_with(&circuit, &profile, &start, &limits, common.hill_options())?,
        top_down(&circuit, &profile),
        bottom_up(&circuit, &profile),
    ];
    let mut notice = None;
    match exhaustive_optimal(&circuit, &profile, &limits) {
        Ok(r) => results.push(r),
        Err(OptimizeError::SearchSpaceTooLarge { space, limit }) => {
            notice = Some(format!(
                "exhaustive skipped: search space {} exceeds --max-space {limit}",
                format_space(space)
            ))
        }
        Err(e) => return Err(e.into()),
    }

    let best = results
        .iter()
        .map(|r| r.report.total)
        .fold(f64::INFINITY, f64::min);
    let baseline = pure.report.total;
    let rows: Vec<CompareRow> = results
        .iter()
        .map(|r| CompareRow {
            heuristic: r.heuristic.clone(),
            compute: r.report.total_compute,
            network: r.report.total_network,
            total: r.report.total,
            reduction_pct: if baseline > 0.0 {
                100.0 * (1.0 - r.report.total / baseline)
            } else {
                0.0
            },
            winner: r.report.total == best,
        })
        .collect();

    let text = if common.json {
        let doc = json!({
            "profile": profile.name(),
            "unit": "cent",
            "rows": rows,
            "notice": notice,
        });
        format!(
            "{}\n",
            serde_json::to_string_pretty(&doc).expect("rows serialize")
        )
    } else {
        let mut s = format!(
            "profile: {}\ncosts in {}\n",
            profile.name(),
            common.unit.label()
        );
        let cells: Vec<[String; 6]> = rows
            .iter()
            .map(|r| {
                [
                    if r.winner { "*".into() } else { String::new() },
                    r.heuristic.clone(),
                    common.unit.format(r.compute),
                    common.unit.format(r.network),
                    common.unit.format(r.total),
                    format!("{:.2}%", r.reduction_pct),
                ]
            })
            .collect();
        s.push_str(&table(
            &[
                "",
                "technique",
                "compute",
                "network",
                "total",
                "vs pure-yao",
            ],
            &cells,
            2,
        ));
        if let Some(n) = &notice {
            let _ = writeln!(s, "{n}");
        }
        s
    };
    emit(stdout, common.out.as_deref(), &text)
}

fn cmd_gen(command: GenCommand, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let (result, out) = match command {
        GenCommand::Biometric {
            rows,
            attrs,
            bitwidth,
            out,
        } => (
            gen_biometric(&BiometricSpec {
                rows,
                attrs,
                bitwidth,
            }),
            out,
        ),
        GenCommand::Matmul { n, bitwidth, out } => (gen_matmul(&MatMulSpec { n, bitwidth }), out),
        GenCommand::Chain { op, len, out } => (gen_chain(op, len), out),
        GenCommand::Random { seed, ops, out } => {
            (gen_random(seed, ops, &OpWeights::default()), out)
        }
    };
    let circuit = result.map_err(Failure::usage)?;
    let counts: Vec<String> = OpKind::ALL
        .iter()
        .filter(|&&op| circuit.count(op) > 0)
        .map(|&op| format!("{} {op}", circuit.count(op)))
        .collect();
    let summary = format!("{} nodes ({})\n", circuit.len(), counts.join(", "));
    match out {
        Some(path) => {
            emit(stdout, Some(&path), &circuit.to_json())?;
            emit(
                stdout,
                None,
                &format!("wrote {}: {summary}", path.display()),
            )
        }
        None => {
            emit(stdout, None, &circuit.to_json())?;
            emit(stderr, None, &summary)
        }
    }
}

fn cmd_eval(
    circuit: &Path,
    inputs: &Path,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> CmdResult {
    let circuit = read_circuit(circuit)?;
    let raw: BTreeMap<String, Value> = read_json(inputs)?;
    let mut values = BTreeMap::new();
    for (key, value) in &raw {
        let id = match key.parse::<usize>() {
            Ok(i) if circuit.node(NodeId(i)).is_some_and(|n| n.op == OpKind::In) => NodeId(i),
            _ => circuit
                .input_by_name(key)
                .ok_or_else(|| Failure::usage(format!("no input node {key:?}")))?,
        };
        let v = value.as_u64().ok_or_else(|| {
            Failure::usage(format!("input {key:?} is not a non-negative integer"))
        })?;
        values.insert(id, v);
    }
    let outputs = circuit
        .evaluate_plaintext(&values)
        .map_err(Failure::usage)?;
    let doc: serde_json::Map<String, Value> = outputs
        .into_iter()
        .map(|(id, v)| (id.to_string(), Value::from(v)))
        .collect();
    emit(stdout, out, &format!("{}\n", Value::Object(doc)))
}

fn cmd_derive_profile(
    measurements: &Path,
    prices: &Path,
    out: Option<&Path>,
    name: &str,
    scale: f64,
    stdout: &mut dyn Write,
) -> CmdResult {
    let measurements: Vec<RawMeasurement> = read_json(measurements)?;
    let prices: PriceSpec = read_json(prices)?;
    let profile = derive_profile(&measurements, &prices, name, scale).map_err(Failure::usage)?;
    emit(stdout, out, &profile.to_json())
}
