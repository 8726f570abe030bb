//! Benchmark corpus: traversal programs, seeded input generators and layout
//! comparisons measured with the packed interpreter.

use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::gen::{rng, Rng64};
use crate::lang::{load, Program};
use crate::pipeline::{optimize, PipelineError, Scope};
use crate::rewrite::{permute_value, reorder_datatype, RewriteError};
use crate::runtime::{interp_boxed_with, run_packed, EvalError, Limits, OffsetMode, TraversalMetrics, Value, DEFAULT_DEREF_WEIGHT};
use crate::solver::{CostParams, LayoutAssignment, Mode};

/// Corpus programs by name.
pub const CORPUS: &[(&str, &str)] = &[
    ("running-example", include_str!("../corpus/running_example.lay")),
    ("list-length", include_str!("../corpus/list_length.lay")),
    ("foo", include_str!("../corpus/foo.lay")),
    ("logic-eval", include_str!("../corpus/logic_eval.lay")),
    ("rightmost", include_str!("../corpus/rightmost.lay")),
    ("add1-pre", include_str!("../corpus/add1_pre.lay")),
    ("add1-in", include_str!("../corpus/add1_in.lay")),
    ("add1-post", include_str!("../corpus/add1_post.lay")),
    ("exp-pre", include_str!("../corpus/exp_pre.lay")),
    ("exp-in", include_str!("../corpus/exp_in.lay")),
    ("exp-post", include_str!("../corpus/exp_post.lay")),
    ("copy-pre", include_str!("../corpus/copy_pre.lay")),
    ("copy-in", include_str!("../corpus/copy_in.lay")),
    ("copy-post", include_str!("../corpus/copy_post.lay")),
    ("blog-filter", include_str!("../corpus/blog_filter.lay")),
    ("blog-emph", include_str!("../corpus/blog_emph.lay")),
    ("blog-tag-search", include_str!("../corpus/blog_tag_search.lay")),
    ("blog-pipeline", include_str!("../corpus/blog_pipeline.lay")),
];

pub fn corpus_source(name: &str) -> Option<&'static str> {
    CORPUS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Load a corpus program; panics on an unknown name.
pub fn corpus_program(name: &str) -> Program {
    load(corpus_source(name).expect("corpus entry")).expect("corpus programs load")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchName {
    ListLength,
    LogicEval,
    Add1Tree,
    ExpTree,
    CopyTree,
    Rightmost,
    FilterBlogs,
    EmphContent,
    TagSearch,
    BlogPipeline,
}

impl BenchName {
    pub const ALL: [BenchName; 10] = [
        BenchName::ListLength,
        BenchName::LogicEval,
        BenchName::Add1Tree,
        BenchName::ExpTree,
        BenchName::CopyTree,
        BenchName::Rightmost,
        BenchName::FilterBlogs,
        BenchName::EmphContent,
        BenchName::TagSearch,
        BenchName::BlogPipeline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchName::ListLength => "list-length",
            BenchName::LogicEval => "logic-eval",
            BenchName::Add1Tree => "add1-tree",
            BenchName::ExpTree => "exp-tree",
            BenchName::CopyTree => "copy-tree",
            BenchName::Rightmost => "rightmost",
            BenchName::FilterBlogs => "filter-blogs",
            BenchName::EmphContent => "emph-content",
            BenchName::TagSearch => "tag-search",
            BenchName::BlogPipeline => "blog-pipeline",
        }
    }

    pub fn parse(s: &str) -> Option<BenchName> {
        BenchName::ALL.into_iter().find(|b| b.as_str() == s)
    }
}

/// Bench inputs. `size` is the list length, tree depth, expression height
/// or blog count; `content_size` is bytes per list element (at least 4, the
/// string length prefix) or words per blog content.
#[derive(Clone, Debug, Serialize)]
pub struct BenchSpec {
    pub name: BenchName,
    pub size: usize,
    pub content_size: usize,
    pub seed: u64,
}

/// Largest accepted `size` per benchmark, keeping runs short.
fn max_size(name: BenchName) -> usize {
    match name {
        BenchName::ListLength => 1_000_000,
        BenchName::LogicEval => 20,
        BenchName::Add1Tree | BenchName::ExpTree | BenchName::CopyTree | BenchName::Rightmost => 20,
        _ => 100_000,
    }
}

impl BenchSpec {
    /// Desk-scale defaults.
    pub fn new(name: BenchName) -> BenchSpec {
        let (size, content_size) = match name {
            BenchName::ListLength => (10_000, 5),
            BenchName::LogicEval => (12, 0),
            BenchName::Add1Tree | BenchName::ExpTree | BenchName::CopyTree | BenchName::Rightmost => (14, 0),
            _ => (1_000, 8),
        };
        BenchSpec { name, size, content_size, seed: 1 }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.size > max_size(self.name) {
            return Err(BenchError::Spec(format!("size {} exceeds {} for {}", self.size, max_size(self.name), self.name.as_str())));
        }
        if self.name == BenchName::ListLength && self.content_size < 4 {
            return Err(BenchError::Spec("list-length content size must be at least 4 bytes".into()));
        }
        if self.content_size > 1 << 20 {
            return Err(BenchError::Spec("content size exceeds 1 MiB".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid bench spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("layout `{0}` disagrees with the boxed interpreter")]
    Disagree(String),
}

fn con(p: &Program, name: &str, fields: Vec<Value>) -> Value {
    let (r, _) = p.find_ctor(name).expect("corpus constructor");
    Value::con(r, fields)
}

/// Build a right-nested list iteratively.
fn list_of(p: &Program, nil: &str, cons: &str, items: Vec<Value>) -> Value {
    let mut acc = con(p, nil, vec![]);
    for it in items.into_iter().rev() {
        acc = con(p, cons, vec![it, acc]);
    }
    acc
}

const VOCAB: [&str; 8] = ["lorem", "ipsum", "dolor", "sit", "amet", "key", "data", "layout"];
const KEYWORD: &str = "key";

fn words(rng: &mut Rng64, n: usize) -> Vec<Value> {
    (0..n).map(|_| Value::Str((*VOCAB.choose(rng).expect("non-empty")).into())).collect()
}

/// `Leaf | Node Int Tree Tree` of the given depth, values in pre-order.
fn int_tree(p: &Program, depth: usize, next: &mut i64) -> Value {
    if depth == 0 {
        return con(p, "Leaf", vec![]);
    }
    let v = *next;
    *next += 1;
    let l = int_tree(p, depth - 1, next);
    let r = int_tree(p, depth - 1, next);
    con(p, "Node", vec![Value::Int(v), l, r])
}

/// `Leaf Int | Node Tree Tree` of the given depth.
fn leaf_tree(p: &Program, depth: usize, next: &mut i64) -> Value {
    if depth == 0 {
        *next += 1;
        return con(p, "Leaf", vec![Value::Int(*next)]);
    }
    let l = leaf_tree(p, depth - 1, next);
    let r = leaf_tree(p, depth - 1, next);
    con(p, "Node", vec![l, r])
}

fn exp_tree(p: &Program, rng: &mut Rng64, height: usize) -> Value {
    if height == 0 {
        return con(p, "Val", vec![Value::Bool(rng.gen())]);
    }
    match rng.gen_range(0..5) {
        0 => con(p, "Not", vec![exp_tree(p, rng, height - 1)]),
        1 | 2 => {
            let l = exp_tree(p, rng, height - 1);
            con(p, "Or", vec![l, exp_tree(p, rng, height - 1)])
        }
        _ => {
            let l = exp_tree(p, rng, height - 1);
            con(p, "And", vec![l, exp_tree(p, rng, height - 1)])
        }
    }
}

fn blogs(p: &Program, rng: &mut Rng64, n: usize, content_words: usize) -> Value {
    let items: Vec<Vec<Value>> = (0..n)
        .map(|i| {
            let ntags = rng.gen_range(1..=4);
            let tags = list_of(p, "TNil", "TCons", words(rng, ntags));
            let content = list_of(p, "CNil", "CCons", words(rng, content_words));
            vec![
                Value::Str(format!("post {i}").into()),
                Value::Int(i as i64),
                Value::Str("someone".into()),
                Value::Str("2021-06-01".into()),
                content,
                tags,
            ]
        })
        .collect();
    let mut acc = con(p, "Empty", vec![]);
    for mut f in items.into_iter().rev() {
        f.push(acc);
        acc = con(p, "Blog", f);
    }
    acc
}

/// Inputs for `spec`, in the representation of the corpus program `p`.
pub fn inputs(spec: &BenchSpec, p: &Program) -> Vec<Value> {
    let mut r = rng(spec.seed);
    match spec.name {
        BenchName::ListLength => {
            let payload = "x".repeat(spec.content_size - 4);
            let items = (0..spec.size).map(|_| Value::Str(payload.as_str().into())).collect();
            vec![list_of(p, "Nil", "Cons", items)]
        }
        BenchName::LogicEval => vec![exp_tree(p, &mut r, spec.size)],
        BenchName::Add1Tree | BenchName::ExpTree | BenchName::CopyTree => vec![int_tree(p, spec.size, &mut 0)],
        BenchName::Rightmost => vec![leaf_tree(p, spec.size, &mut 0)],
        _ => vec![Value::Str(KEYWORD.into()), blogs(p, &mut r, spec.size, spec.content_size)],
    }
}

/// One program and field order to measure.
#[derive(Clone, Debug)]
pub struct Variant {
    pub label: String,
    /// Source program before any layout change.
    pub source: Program,
    /// Program with the variant's field orders.
    pub program: Program,
    pub layouts: Vec<LayoutAssignment>,
    /// Rows from the optimizer; excluded from the baseline argmin.
    pub optimized: bool,
}

fn layout(dcon: &str, order: &[usize]) -> LayoutAssignment {
    LayoutAssignment { dcon: dcon.into(), order: order.to_vec() }
}

fn variant(label: &str, source: &str, layouts: Vec<LayoutAssignment>) -> Result<Variant, BenchError> {
    let src = corpus_program(source);
    let mut program = src.clone();
    for a in &layouts {
        program = reorder_datatype(&program, a)?;
    }
    Ok(Variant { label: label.into(), source: src, program, layouts, optimized: false })
}

/// Labels of the 7-field blog constructor's fields, in declaration order.
const BLOG_FIELDS: [char; 7] = ['h', 'i', 'a', 'd', 'c', 't', 'b'];

fn blog_label(order: &[usize]) -> String {
    order.iter().map(|&i| BLOG_FIELDS[i]).collect()
}

/// Corpus program and entry functions of a benchmark; later entries consume
/// the previous entry's result as their last argument.
pub fn entries(name: BenchName) -> (&'static str, Vec<&'static str>) {
    match name {
        BenchName::ListLength => ("list-length", vec!["length"]),
        BenchName::LogicEval => ("logic-eval", vec!["eval"]),
        BenchName::Add1Tree => ("add1-pre", vec!["add1Tree"]),
        BenchName::ExpTree => ("exp-pre", vec!["expTree"]),
        BenchName::CopyTree => ("copy-pre", vec!["copyTree"]),
        BenchName::Rightmost => ("rightmost", vec!["rightmost"]),
        BenchName::FilterBlogs => ("blog-filter", vec!["filterBlogs"]),
        BenchName::EmphContent => ("blog-emph", vec!["emphBlogs"]),
        BenchName::TagSearch => ("blog-tag-search", vec!["tagSearch"]),
        BenchName::BlogPipeline => ("blog-pipeline", vec!["filterBlogs", "emphBlogs", "tagSearch"]),
    }
}

/// The fixed layout set of a benchmark. Rows keep the source code and only
/// change field orders.
pub fn baseline_variants(name: BenchName) -> Result<Vec<Variant>, BenchError> {
    let (src, _) = entries(name);
    match name {
        BenchName::ListLength => Ok(vec![
            variant("original", src, vec![])?,
            variant("flipped", src, vec![layout("Cons", &[1, 0])])?,
        ]),
        BenchName::LogicEval => Ok(vec![
            variant("lr", src, vec![])?,
            variant("rl", src, vec![layout("Or", &[1, 0]), layout("And", &[1, 0])])?,
        ]),
        BenchName::Rightmost => {
            Ok(vec![variant("lr", src, vec![])?, variant("rl", src, vec![layout("Node", &[1, 0])])?])
        }
        BenchName::Add1Tree | BenchName::ExpTree | BenchName::CopyTree => {
            let op = &src[..src.len() - 4];
            let (pre, inn, post) = (format!("{op}-pre"), format!("{op}-in"), format!("{op}-post"));
            Ok(vec![
                variant("Misaligned_pre", &post, vec![])?,
                variant("Aligned_pre", &pre, vec![])?,
                variant("Aligned_in", &inn, vec![layout("Node", &[1, 0, 2])])?,
                variant("Aligned_post", &post, vec![layout("Node", &[1, 2, 0])])?,
            ])
        }
        _ => {
            let mut out = vec![variant("hiadctb", src, vec![])?];
            let (c, t, b) = (4, 5, 6);
            for prefix in [[t, b, c], [t, c, b], [b, t, c], [b, c, t], [c, t, b], [c, b, t]] {
                let mut order = prefix.to_vec();
                order.extend([0, 1, 2, 3]);
                out.push(variant(&blog_label(&order), src, vec![layout("Blog", &order)])?);
            }
            Ok(out)
        }
    }
}

/// Rows produced by the optimizer in both modes (global scope, with code
/// motion).
pub fn optimized_variants(name: BenchName, params: &CostParams) -> Result<Vec<Variant>, BenchError> {
    let (src, _) = entries(name);
    let source = corpus_program(src);
    [Mode::Solver, Mode::Greedy]
        .into_iter()
        .map(|mode| {
            let o = optimize(&source, mode, &Scope::Global, params)?;
            let layouts = o.solutions.iter().map(|s| s.layout.clone()).collect();
            let label = format!("M_{}", mode.as_str());
            Ok(Variant { label, source: source.clone(), program: o.program, layouts, optimized: true })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub label: String,
    pub optimized: bool,
    pub metrics: TraversalMetrics,
    pub composite: u64,
    pub argmin: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub spec: BenchSpec,
    pub mode: OffsetMode,
    pub deref_weight: u64,
    pub rows: Vec<BenchRow>,
    /// Cheapest baseline row.
    pub argmin: Option<String>,
}

fn bench_limits() -> Limits {
    Limits { max_depth: 1_000_000, max_steps: 2_000_000_000 }
}

/// Run one variant: every entry function in turn, each stage consuming the
/// previous stage's result freshly serialized. Also checks the packed
/// results against the boxed interpreter.
pub fn run_variant(spec: &BenchSpec, v: &Variant, mode: OffsetMode) -> Result<TraversalMetrics, BenchError> {
    let args: Vec<Value> = inputs(spec, &v.source).iter().map(|a| permute_value(&v.source, a, &v.layouts)).collect();
    run_stages(spec.name, &v.program, args, mode, &v.label)
}

/// Run the entry functions of `name` on `program` with `args` already in
/// its representation, chaining stages as in [`run_variant`].
pub fn run_stages(
    name: BenchName,
    program: &Program,
    mut args: Vec<Value>,
    mode: OffsetMode,
    label: &str,
) -> Result<TraversalMetrics, BenchError> {
    let (_, fns) = entries(name);
    let mut total = TraversalMetrics::default();
    for f in fns {
        let (res, m) = run_packed(program, f, &args, mode, bench_limits())?;
        let boxed = interp_boxed_with(program, f, &args, bench_limits())?;
        if res != boxed {
            return Err(BenchError::Disagree(label.into()));
        }
        total.add(&m);
        if let Some(last) = args.last_mut() {
            *last = res;
        }
    }
    Ok(total)
}

/// Measure every variant of `spec`; optimized rows are added when `params`
/// is given.
pub fn run_bench(spec: &BenchSpec, mode: OffsetMode, params: Option<&CostParams>) -> Result<BenchReport, BenchError> {
    spec.validate()?;
    let mut vs = baseline_variants(spec.name)?;
    if let Some(params) = params {
        vs.extend(optimized_variants(spec.name, params)?);
    }
    run_variants(spec, mode, &vs)
}

pub fn run_variants(spec: &BenchSpec, mode: OffsetMode, vs: &[Variant]) -> Result<BenchReport, BenchError> {
    let mut rows = Vec::new();
    for v in vs {
        let metrics = run_variant(spec, v, mode)?;
        rows.push(BenchRow {
            label: v.label.clone(),
            optimized: v.optimized,
            metrics,
            composite: metrics.composite(DEFAULT_DEREF_WEIGHT),
            argmin: false,
        });
    }
    let best = (0..rows.len()).filter(|&i| !rows[i].optimized).min_by_key(|&i| (rows[i].composite, i));
    if let Some(i) = best {
        rows[i].argmin = true;
    }
    Ok(BenchReport {
        spec: spec.clone(),
        mode,
        deref_weight: DEFAULT_DEREF_WEIGHT,
        argmin: best.map(|i| rows[i].label.clone()),
        rows,
    })
}

impl BenchReport {
    pub fn row(&self, label: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Aligned text table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} (size {}, content {}, seed {}, {:?})",
            self.spec.name.as_str(),
            self.spec.size,
            self.spec.content_size,
            self.spec.seed,
            self.mode
        );
        let _ = writeln!(
            s,
            "  {:<16} {:>14} {:>10} {:>14} {:>10} {:>10} {:>15} {:>10}",
            "layout", "composite", "tags", "skip_bytes", "skips", "backtracks", "backtrack_bytes", "derefs"
        );
        for r in &self.rows {
            let m = &r.metrics;
            let mark = if r.argmin { "*" } else if r.optimized { "+" } else { " " };
            let _ = writeln!(
                s,
                "{mark} {:<16} {:>14} {:>10} {:>14} {:>10} {:>10} {:>15} {:>10}",
                r.label,
                r.composite,
                m.tags_read,
                m.skip_bytes,
                m.skip_events,
                m.backtrack_events,
                m.backtrack_bytes,
                m.offset_derefs
            );
        }
        s
    }
}
