//! `packlay`: analyze, optimize, simulate and benchmark field layouts of
//! packed algebraic datatypes.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use packlay_core::bench::{self, BenchError, BenchName, BenchSpec};
use packlay_core::lang::{load, pretty, LoadError, Program};
use packlay_core::pipeline::{analyze_program, layout_problems, layout_report, lp_listing, optimize, PipelineError, Scope};
use packlay_core::rewrite::{permute_value, reorder_datatype, RewriteError};
use packlay_core::runtime::{OffsetMode, TraversalMetrics, DEFAULT_DEREF_WEIGHT};
use packlay_core::solver::{CostConfigError, CostParams, LayoutAssignment, Mode, SolveError};

#[derive(Parser)]
#[command(name = "packlay", version, about = "Field layout optimizer for packed datatypes")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Solver,
    Greedy,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Solver => Mode::Solver,
            ModeArg::Greedy => Mode::Greedy,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutMode {
    Packed,
    PackedOffsets,
}

impl From<LayoutMode> for OffsetMode {
    fn from(m: LayoutMode) -> OffsetMode {
        match m {
            LayoutMode::Packed => OffsetMode::None,
            LayoutMode::PackedOffsets => OffsetMode::ShortcutOffsets,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Print control-flow and field access analyses of a program.
    Analyze {
        file: PathBuf,
        /// Write one DOT file per CFG and per field access graph here.
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Write the layout problems as an integer-program listing.
        #[arg(long)]
        lp: Option<PathBuf>,
        /// Write field attributes and access graphs as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Cost model JSON.
        #[arg(long)]
        costs: Option<PathBuf>,
        /// `global` or `local=<function>`.
        #[arg(long, default_value = "global", value_parser = parse_scope)]
        scope: Scope,
    },
    /// Choose field layouts and rewrite the program.
    Optimize {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "solver")]
        mode: ModeArg,
        #[arg(long, default_value = "global", value_parser = parse_scope)]
        scope: Scope,
        /// Rewritten program; stdout when absent.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Layout report; stderr when absent.
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        costs: Option<PathBuf>,
    },
    /// Run a benchmark's traversal on one program and report metrics.
    Simulate {
        /// Program to run; the benchmark's own program when absent. It must
        /// declare the benchmark's constructors, fields in any order.
        file: Option<PathBuf>,
        #[arg(long)]
        bench: String,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        content_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Reorder a constructor first, e.g. `Cons=1,0`. Repeatable.
        #[arg(long = "layout", value_parser = parse_layout)]
        layouts: Vec<LayoutAssignment>,
        #[arg(long, value_enum, default_value = "packed")]
        layout_mode: LayoutMode,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Measure every layout of a benchmark, plus the optimizer's choices.
    Bench {
        name: String,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        content_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "packed")]
        layout_mode: LayoutMode,
        /// Skip the optimizer rows.
        #[arg(long)]
        no_optimized: bool,
        #[arg(long)]
        costs: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn parse_scope(s: &str) -> Result<Scope, String> {
    match s {
        "global" => Ok(Scope::Global),
        _ => match s.strip_prefix("local=") {
            Some(f) if !f.is_empty() => Ok(Scope::Local(f.into())),
            _ => Err(format!("expected `global` or `local=<function>`, got `{s}`")),
        },
    }
}

fn parse_layout(s: &str) -> Result<LayoutAssignment, String> {
    let (dcon, order) = s.split_once('=').ok_or_else(|| format!("expected DCON=i,j,.., got `{s}`"))?;
    let order = order
        .split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|e| format!("bad index `{x}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LayoutAssignment { dcon: dcon.trim().into(), order })
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{path}: {err}")]
    Io { path: PathBuf, err: std::io::Error },
    #[error("{path}: {err}")]
    Load { path: PathBuf, err: LoadError },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Costs(#[from] CostConfigError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Load { .. } | CliError::Usage(_) | CliError::Costs(_) => 2,
            CliError::Rewrite(_) => 2,
            CliError::Pipeline(PipelineError::UnknownFunction(_) | PipelineError::Rewrite(_)) => 2,
            CliError::Pipeline(PipelineError::Solve(SolveError::Overflow(_))) => 1,
            CliError::Pipeline(PipelineError::Solve(_)) => 3,
            CliError::Bench(BenchError::Spec(_)) => 2,
            CliError::Pipeline(_) | CliError::Bench(_) | CliError::Internal(_) => 1,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|err| CliError::Io { path: path.into(), err })
}

fn load_file(path: &Path) -> Result<Program, CliError> {
    load(&read(path)?).map_err(|err| CliError::Load { path: path.into(), err })
}

fn load_costs(path: Option<&Path>) -> Result<CostParams, CliError> {
    match path {
        Some(p) => Ok(CostParams::from_json(&read(p)?)?),
        None => Ok(CostParams::default()),
    }
}

/// Write through a temporary file in the target directory, then rename.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |err| CliError::Io { path: path.into(), err };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn field_labels(p: &Program, dcon: &str) -> Vec<String> {
    p.find_ctor(dcon).map(|(_, c)| c.fields.iter().map(|t| t.to_string()).collect()).unwrap_or_default()
}

#[derive(Serialize)]
struct AnalysisJson {
    attrs: Vec<packlay_core::attrs::FieldAttrRow>,
    graphs: Vec<serde_json::Value>,
}

fn analyze(
    file: &Path,
    dot: Option<&Path>,
    lp: Option<&Path>,
    json: Option<&Path>,
    costs: Option<&Path>,
    scope: &Scope,
) -> Result<(), CliError> {
    let p = load_file(file)?;
    let params = load_costs(costs)?;
    let a = analyze_program(&p)?;
    let problems = layout_problems(&p, &a, scope)?;
    let mut out = String::new();
    for (f, g) in p.funs.iter().zip(&a.cfgs) {
        out.push_str(&format!("fn {}: {} cfg nodes\n", f.name, g.nodes.len()));
    }
    for r in a.attrs.to_rows() {
        let attrs: Vec<String> = r.attrs.iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&format!("attr {} {}.{}: {}\n", r.func, r.dcon, r.field, attrs.join(" ")));
    }
    for pr in &problems {
        let g = &pr.graph;
        out.push_str(&format!("graph {}: {} fields, preference {:?}\n", g.dcon, g.n, g.preference));
        for e in &g.edges {
            out.push_str(&format!("  {} -> {} {} {:?}\n", e.src, e.dst, e.weight, e.kind));
        }
    }
    print!("{out}");
    if let Some(dir) = dot {
        fs::create_dir_all(dir).map_err(|err| CliError::Io { path: dir.into(), err })?;
        for (f, g) in p.funs.iter().zip(&a.cfgs) {
            write_atomic(&dir.join(format!("cfg_{}.dot", f.name)), &g.emit_dot())?;
        }
        for pr in &problems {
            let labels = field_labels(&p, &pr.graph.dcon);
            write_atomic(&dir.join(format!("fag_{}.dot", pr.graph.dcon)), &pr.graph.emit_dot(&labels))?;
        }
    }
    if let Some(path) = lp {
        write_atomic(path, &lp_listing(&problems, &params))?;
    }
    if let Some(path) = json {
        let graphs = problems
            .iter()
            .map(|pr| {
                let s = pr.graph.to_json().map_err(|e| CliError::Internal(e.to_string()))?;
                serde_json::from_str(&s).map_err(|e| CliError::Internal(e.to_string()))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let j = AnalysisJson { attrs: a.attrs.to_rows(), graphs };
        write_atomic(path, &(serde_json::to_string_pretty(&j).expect("analysis serializes") + "\n"))?;
    }
    Ok(())
}

fn run_optimize(
    file: &Path,
    mode: Mode,
    scope: &Scope,
    out: Option<&Path>,
    json: Option<&Path>,
    costs: Option<&Path>,
) -> Result<(), CliError> {
    let p = load_file(file)?;
    let params = load_costs(costs)?;
    let o = optimize(&p, mode, scope, &params)?;
    let report = layout_report(&o.solutions, mode);
    let src = pretty(&o.program);
    match out {
        Some(path) => write_atomic(path, &src)?,
        None => print!("{src}"),
    }
    match json {
        Some(path) => write_atomic(path, &report)?,
        None => eprint!("{report}"),
    }
    Ok(())
}

fn bench_spec(name: &str, size: Option<usize>, content_size: Option<usize>, seed: Option<u64>) -> Result<BenchSpec, CliError> {
    let name = BenchName::parse(name).ok_or_else(|| CliError::Usage(format!("unknown benchmark `{name}`")))?;
    let mut spec = BenchSpec::new(name);
    if let Some(s) = size {
        spec.size = s;
    }
    if let Some(c) = content_size {
        spec.content_size = c;
    }
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate()?;
    Ok(spec)
}

/// Field order of each of `target`'s constructors relative to the same
/// constructor in `source`: target field `k` takes the first unused source
/// field of the same type.
fn align(source: &Program, target: &Program) -> Result<Vec<LayoutAssignment>, CliError> {
    let mut out = Vec::new();
    for (_, sc) in source.ctor_refs() {
        let (_, tc) = target
            .find_ctor(&sc.name)
            .ok_or_else(|| CliError::Usage(format!("program lacks constructor `{}`", sc.name)))?;
        let mismatch = || CliError::Usage(format!("fields of `{}` do not match the benchmark's", sc.name));
        if tc.fields.len() != sc.fields.len() {
            return Err(mismatch());
        }
        let mut used = vec![false; sc.fields.len()];
        let mut order = Vec::with_capacity(sc.fields.len());
        for t in &tc.fields {
            let j = (0..sc.fields.len()).find(|&j| !used[j] && sc.fields[j] == *t).ok_or_else(mismatch)?;
            used[j] = true;
            order.push(j);
        }
        out.push(LayoutAssignment { dcon: sc.name.to_string(), order });
    }
    Ok(out)
}

#[derive(Serialize)]
struct SimulateJson<'a> {
    bench: &'a str,
    layout_mode: OffsetMode,
    metrics: TraversalMetrics,
    deref_weight: u64,
    composite: u64,
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    file: Option<&Path>,
    bench_name: &str,
    size: Option<usize>,
    content_size: Option<usize>,
    seed: Option<u64>,
    layouts: &[LayoutAssignment],
    mode: OffsetMode,
    json: Option<&Path>,
) -> Result<(), CliError> {
    let spec = bench_spec(bench_name, size, content_size, seed)?;
    let source = bench::corpus_program(bench::entries(spec.name).0);
    let target = match file {
        Some(f) => load_file(f)?,
        None => source.clone(),
    };
    let alignment = align(&source, &target)?;
    let mut program = target.clone();
    for a in layouts {
        program = reorder_datatype(&program, a)?;
    }
    let args = bench::inputs(&spec, &source)
        .iter()
        .map(|v| permute_value(&target, &permute_value(&source, v, &alignment), layouts))
        .collect();
    let metrics = bench::run_stages(spec.name, &program, args, mode, "simulate")?;
    let j = SimulateJson {
        bench: spec.name.as_str(),
        layout_mode: mode,
        metrics,
        deref_weight: DEFAULT_DEREF_WEIGHT,
        composite: metrics.composite(DEFAULT_DEREF_WEIGHT),
    };
    let s = serde_json::to_string_pretty(&j).expect("metrics serialize") + "\n";
    match json {
        Some(path) => write_atomic(path, &s)?,
        None => print!("{s}"),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_bench(
    name: &str,
    size: Option<usize>,
    content_size: Option<usize>,
    seed: Option<u64>,
    mode: OffsetMode,
    no_optimized: bool,
    costs: Option<&Path>,
    json: Option<&Path>,
) -> Result<(), CliError> {
    let spec = bench_spec(name, size, content_size, seed)?;
    let params = load_costs(costs)?;
    let report = bench::run_bench(&spec, mode, (!no_optimized).then_some(&params))?;
    print!("{}", report.to_text());
    if let Some(path) = json {
        write_atomic(path, &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Analyze { file, dot, lp, json, costs, scope } => {
            analyze(&file, dot.as_deref(), lp.as_deref(), json.as_deref(), costs.as_deref(), &scope)
        }
        Cmd::Optimize { file, mode, scope, out, json, costs } => {
            run_optimize(&file, mode.into(), &scope, out.as_deref(), json.as_deref(), costs.as_deref())
        }
        Cmd::Simulate { file, bench, size, content_size, seed, layouts, layout_mode, json } => simulate(
            file.as_deref(),
            &bench,
            size,
            content_size,
            seed,
            &layouts,
            layout_mode.into(),
            json.as_deref(),
        ),
        Cmd::Bench { name, size, content_size, seed, layout_mode, no_optimized, costs, json } => run_bench(
            &name,
            size,
            content_size,
            seed,
            layout_mode.into(),
            no_optimized,
            costs.as_deref(),
            json.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("packlay: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
