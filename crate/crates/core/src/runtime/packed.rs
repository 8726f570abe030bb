//! Interpreter that reads its datatype inputs directly from packed buffers
//! and counts how a single forward-moving reader would have to move.
//!
//! Each input buffer has one cursor, starting at its root. Reading a tag or a
//! scalar at the cursor is sequential. Reading ahead of the cursor is a skip
//! (the intervening bytes would have to be scanned) or, in offset mode, one
//! offset dereference. Reading behind the cursor is a backtrack. After a read
//! the cursor sits just past the bytes read.
//!
//! Scalar fields are read on first use and cached. Packed fields are read
//! when matched on. A constructor application stores references to its
//! arguments, so rebuilding a value from input fields reads nothing, and
//! values built during evaluation live outside the input buffers and cost
//! nothing to inspect.

use std::cell::OnceCell;
use std::collections::HashMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::layout::{read_scalar, read_u32, read_u64, read_value, FieldKind, FormatError, LayoutDescriptor, OffsetMode, PackedBuffer};
use super::value::{apply_prim, Value};
use super::{EvalError, Limits};
use crate::lang::{Arg, CtorRef, Expr, Name, Program, ProgramIndex, Rhs};

/// Weight of one offset dereference in [`TraversalMetrics::composite`].
pub const DEFAULT_DEREF_WEIGHT: u64 = 64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraversalMetrics {
    pub tags_read: u64,
    pub payload_bytes_read: u64,
    pub skip_bytes: u64,
    pub skip_events: u64,
    pub backtrack_events: u64,
    pub backtrack_bytes: u64,
    pub offset_derefs: u64,
    /// Largest distance between the cursor and a read position.
    pub max_cursor_excursion: u64,
}

impl TraversalMetrics {
    /// `skip_bytes + backtrack_bytes + k * offset_derefs`.
    pub fn composite(&self, k: u64) -> u64 {
        self.skip_bytes + self.backtrack_bytes + k * self.offset_derefs
    }

    pub fn add(&mut self, o: &TraversalMetrics) {
        self.tags_read += o.tags_read;
        self.payload_bytes_read += o.payload_bytes_read;
        self.skip_bytes += o.skip_bytes;
        self.skip_events += o.skip_events;
        self.backtrack_events += o.backtrack_events;
        self.backtrack_bytes += o.backtrack_bytes;
        self.offset_derefs += o.offset_derefs;
        self.max_cursor_excursion = self.max_cursor_excursion.max(o.max_cursor_excursion);
    }
}

/// An argument to [`interp_packed`].
#[derive(Clone, Debug)]
pub enum PackedArg {
    Scalar(Value),
    Buffer(PackedBuffer),
}

#[derive(Clone)]
enum PV {
    Int(i64),
    Bool(bool),
    Str(std::sync::Arc<str>),
    Ref { buf: usize, pos: usize, data: usize },
    Lazy(Rc<Lazy>),
    Node(Rc<PNode>),
}

struct Lazy {
    buf: usize,
    pos: usize,
    kind: FieldKind,
    cell: OnceCell<Value>,
}

struct PNode {
    ctor: CtorRef,
    fields: Vec<PV>,
}

impl Drop for PNode {
    fn drop(&mut self) {
        let mut stack = std::mem::take(&mut self.fields);
        while let Some(v) = stack.pop() {
            if let PV::Node(rc) = v {
                if let Ok(mut inner) = Rc::try_unwrap(rc) {
                    stack.append(&mut inner.fields);
                }
            }
        }
    }
}

impl PV {
    fn from_value(v: Value) -> PV {
        match v {
            Value::Int(i) => PV::Int(i),
            Value::Bool(b) => PV::Bool(b),
            Value::Str(s) => PV::Str(s),
            Value::Con(c) => PV::Node(Rc::new(PNode {
                ctor: c.ctor,
                fields: c.fields.iter().cloned().map(PV::from_value).collect(),
            })),
        }
    }
}

struct Input {
    bytes: Vec<u8>,
    /// End position of every packed value, indexed by its start.
    ends: Vec<u32>,
}

struct Machine<'a> {
    p: &'a Program,
    ix: ProgramIndex,
    desc: LayoutDescriptor,
    inputs: Vec<Input>,
    cursors: Vec<usize>,
    m: TraversalMetrics,
    limits: Limits,
    steps: u64,
    depth: usize,
}

/// Run `entry` on packed inputs. Returns the boxed result and the reader
/// metrics. All buffers must use the same offset mode and the field order of
/// `p`'s declarations.
pub fn interp_packed(
    p: &Program,
    entry: &str,
    args: &[PackedArg],
    limits: Limits,
) -> Result<(Value, TraversalMetrics), EvalError> {
    let mut mode = None;
    for a in args {
        if let PackedArg::Buffer(b) = a {
            if mode.is_some_and(|m| m != b.mode) {
                return Err(EvalError::Internal("input buffers use different offset modes".into()));
            }
            mode = Some(b.mode);
        }
    }
    let desc = LayoutDescriptor::from_program(p, mode.unwrap_or(OffsetMode::None));
    let ix = ProgramIndex::new(p);
    let fi = *ix.funs.get(entry).ok_or_else(|| EvalError::UnknownFunction(entry.into()))?;
    let f = &p.funs[fi];
    if f.params.len() != args.len() {
        return Err(EvalError::Arity { func: entry.into(), expected: f.params.len(), found: args.len() });
    }
    let mut mach = Machine {
        p,
        ix,
        desc,
        inputs: Vec::new(),
        cursors: Vec::new(),
        m: TraversalMetrics::default(),
        limits,
        steps: 0,
        depth: 0,
    };
    let mut vals = Vec::with_capacity(args.len());
    for (a, t) in args.iter().zip(&f.param_tys) {
        vals.push(match a {
            PackedArg::Scalar(v) => PV::from_value(v.clone()),
            PackedArg::Buffer(b) => {
                let want = t.data_name().and_then(|n| mach.desc.data_index(n));
                if want != Some(b.data) {
                    return Err(EvalError::Internal(format!("buffer datatype does not match parameter type {t}")));
                }
                let mut ends = vec![0u32; b.bytes.len() + 1];
                scan(&b.bytes, b.root, b.data, &mach.desc, &mut ends)?;
                mach.inputs.push(Input { bytes: b.bytes.clone(), ends });
                mach.cursors.push(b.root);
                PV::Ref { buf: mach.inputs.len() - 1, pos: b.root, data: b.data }
            }
        });
    }
    let r = mach.call(fi, vals)?;
    let v = mach.materialize(&r)?;
    Ok((v, mach.m))
}

/// Record the end of every packed value in `ends` and validate the buffer.
fn scan(bytes: &[u8], at: usize, data: usize, desc: &LayoutDescriptor, ends: &mut [u32]) -> Result<usize, FormatError> {
    let tag = *bytes.get(at).ok_or(FormatError::Truncated(at))? as usize;
    let dl = &desc.datas[data];
    let cl = dl.ctors.get(tag).ok_or_else(|| FormatError::BadTag { at, tag: tag as u8, data: dl.name.clone() })?;
    let table = desc.table_bytes(data, tag);
    let table_end = at + 1 + table;
    let mut pos = table_end;
    for (k, fk) in cl.fields.iter().enumerate() {
        if k >= 1 && table > 0 && table_end as u64 + read_u64(bytes, at + 1 + 8 * (k - 1))? != pos as u64 {
            return Err(FormatError::BadOffset { at, field: k });
        }
        pos = match fk {
            FieldKind::Packed(d) => stacker::maybe_grow(64 * 1024, 2 * 1024 * 1024, || scan(bytes, pos, *d, desc, ends))?,
            k => pos + read_scalar(bytes, pos, *k)?.1,
        };
    }
    ends[at] = u32::try_from(pos).map_err(|_| FormatError::Limit("buffer larger than 4 GiB".into()))?;
    Ok(pos)
}

impl Machine<'_> {
    fn access(&mut self, buf: usize, pos: usize, len: usize) {
        let cur = self.cursors[buf];
        if pos > cur {
            if self.desc.mode == OffsetMode::ShortcutOffsets {
                self.m.offset_derefs += 1;
            } else {
                self.m.skip_bytes += (pos - cur) as u64;
                self.m.skip_events += 1;
            }
        } else if pos < cur {
            self.m.backtrack_events += 1;
            self.m.backtrack_bytes += (cur - pos) as u64;
        }
        self.m.max_cursor_excursion = self.m.max_cursor_excursion.max(pos.abs_diff(cur) as u64);
        self.cursors[buf] = pos + len;
    }

    fn field_size(&self, buf: usize, pos: usize, kind: FieldKind) -> Result<usize, EvalError> {
        let bytes = &self.inputs[buf].bytes;
        Ok(match kind {
            FieldKind::Int => 8,
            FieldKind::Bool => 1,
            FieldKind::Str => 4 + read_u32(bytes, pos)? as usize,
            FieldKind::Packed(_) => self.inputs[buf].ends[pos] as usize - pos,
        })
    }

    fn force(&mut self, v: &PV) -> Result<Value, EvalError> {
        Ok(match v {
            PV::Int(i) => Value::Int(*i),
            PV::Bool(b) => Value::Bool(*b),
            PV::Str(s) => Value::Str(s.clone()),
            PV::Lazy(l) => {
                if let Some(v) = l.cell.get() {
                    return Ok(v.clone());
                }
                let (v, n) = read_scalar(&self.inputs[l.buf].bytes, l.pos, l.kind)?;
                self.access(l.buf, l.pos, n);
                self.m.payload_bytes_read += n as u64;
                let _ = l.cell.set(v.clone());
                v
            }
            PV::Ref { .. } | PV::Node(_) => return Err(EvalError::Internal("packed value used as a scalar".into())),
        })
    }

    fn materialize(&self, v: &PV) -> Result<Value, EvalError> {
        Ok(match v {
            PV::Int(i) => Value::Int(*i),
            PV::Bool(b) => Value::Bool(*b),
            PV::Str(s) => Value::Str(s.clone()),
            PV::Lazy(l) => match l.cell.get() {
                Some(v) => v.clone(),
                None => read_scalar(&self.inputs[l.buf].bytes, l.pos, l.kind)?.0,
            },
            PV::Ref { buf, pos, data } => read_value(&self.inputs[*buf].bytes, *pos, FieldKind::Packed(*data), &self.desc)?.0,
            PV::Node(n) => {
                let mut fields = Vec::with_capacity(n.fields.len());
                for f in &n.fields {
                    fields.push(stacker::maybe_grow(64 * 1024, 2 * 1024 * 1024, || self.materialize(f))?);
                }
                Value::con(n.ctor, fields)
            }
        })
    }

    fn call(&mut self, fi: usize, args: Vec<PV>) -> Result<PV, EvalError> {
        if self.depth >= self.limits.max_depth {
            return Err(EvalError::DepthExceeded(self.limits.max_depth));
        }
        let f = &self.p.funs[fi];
        let env: HashMap<Name, PV> = f.params.iter().cloned().zip(args).collect();
        self.depth += 1;
        let r = stacker::maybe_grow(128 * 1024, 4 * 1024 * 1024, || self.eval(&f.body, env));
        self.depth -= 1;
        r
    }

    fn lookup(env: &HashMap<Name, PV>, v: &Name) -> Result<PV, EvalError> {
        env.get(v).cloned().ok_or_else(|| EvalError::Unbound(v.clone()))
    }

    fn arg(&mut self, env: &HashMap<Name, PV>, a: &Arg) -> Result<PV, EvalError> {
        match a {
            Arg::Var(v) => Self::lookup(env, v),
            Arg::Lit(l) => Ok(PV::from_value(Value::from_literal(l))),
            Arg::Nested(r) => self.rhs(env, r),
        }
    }

    fn rhs(&mut self, env: &HashMap<Name, PV>, r: &Rhs) -> Result<PV, EvalError> {
        self.steps += 1;
        if self.steps > self.limits.max_steps {
            return Err(EvalError::StepsExceeded(self.limits.max_steps));
        }
        match r {
            Rhs::Lit(l) => Ok(PV::from_value(Value::from_literal(l))),
            Rhs::Prim(op, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    let pv = self.arg(env, a)?;
                    vals.push(self.force(&pv)?);
                }
                let v = apply_prim(*op, &vals).ok_or_else(|| EvalError::Internal(format!("ill-typed `{}`", op.name())))?;
                Ok(PV::from_value(v))
            }
            Rhs::ConApp(c, args) => {
                let fields = args.iter().map(|a| self.arg(env, a)).collect::<Result<Vec<_>, _>>()?;
                let ctor = *self.ix.ctors.get(c).ok_or_else(|| EvalError::Internal(format!("unknown constructor `{c}`")))?;
                Ok(PV::Node(Rc::new(PNode { ctor, fields })))
            }
            Rhs::FunApp(f, args) => {
                let vals = args.iter().map(|a| self.arg(env, a)).collect::<Result<Vec<_>, _>>()?;
                let fi = *self.ix.funs.get(f).ok_or_else(|| EvalError::UnknownFunction(f.clone()))?;
                self.call(fi, vals)
            }
        }
    }

    /// Read the tag of a packed value and bind lazy views of its fields.
    fn open(&mut self, buf: usize, pos: usize, data: usize) -> Result<(CtorRef, Vec<PV>), EvalError> {
        let tag = *self.inputs[buf].bytes.get(pos).ok_or(FormatError::Truncated(pos))? as usize;
        let table = self.desc.table_bytes(data, tag);
        self.access(buf, pos, 1 + table);
        self.m.tags_read += 1;
        self.m.payload_bytes_read += table as u64;
        let kinds = self.desc.ctor(data, tag).fields.clone();
        let table_end = pos + 1 + table;
        let mut start = table_end;
        let mut fields = Vec::with_capacity(kinds.len());
        for (k, kind) in kinds.iter().enumerate() {
            if k >= 1 {
                start = if table > 0 {
                    table_end + read_u64(&self.inputs[buf].bytes, pos + 1 + 8 * (k - 1))? as usize
                } else {
                    start + self.field_size(buf, start, kinds[k - 1])?
                };
            }
            fields.push(match kind {
                FieldKind::Packed(d) => PV::Ref { buf, pos: start, data: *d },
                k => PV::Lazy(Rc::new(Lazy { buf, pos: start, kind: *k, cell: OnceCell::new() })),
            });
        }
        Ok((CtorRef { data, tag }, fields))
    }

    fn eval(&mut self, e: &Expr, mut env: HashMap<Name, PV>) -> Result<PV, EvalError> {
        let mut e = e;
        loop {
            match e {
                Expr::Var(v) => return Self::lookup(&env, v),
                Expr::Ret(r) => return self.rhs(&env, r),
                Expr::Let(l) => {
                    let v = self.rhs(&env, &l.rhs)?;
                    env.insert(l.var.clone(), v);
                    e = &l.body;
                }
                Expr::Case(c) => {
                    let s = self.arg(&env, &c.scrut)?;
                    let (name, fields): (Name, Vec<PV>) = match &s {
                        PV::Ref { buf, pos, data } => {
                            let (cr, fields) = self.open(*buf, *pos, *data)?;
                            (self.p.ctor(cr).name.clone(), fields)
                        }
                        PV::Node(n) => (self.p.ctor(n.ctor).name.clone(), n.fields.clone()),
                        other => match self.force(other)? {
                            Value::Bool(true) => ("True".into(), vec![]),
                            Value::Bool(false) => ("False".into(), vec![]),
                            _ => return Err(EvalError::Internal("case on a non-matchable value".into())),
                        },
                    };
                    let arm = c
                        .arms
                        .iter()
                        .find(|a| a.ctor == name)
                        .ok_or_else(|| EvalError::Internal(format!("no arm for `{name}`")))?;
                    for (b, v) in arm.binders.iter().zip(fields) {
                        env.insert(b.clone(), v);
                    }
                    e = &arm.body;
                }
            }
        }
    }
}
