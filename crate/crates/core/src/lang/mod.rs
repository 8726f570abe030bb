//! The source language: a first-order, monomorphic, strict language over
//! algebraic datatypes, plus its parser, pretty-printer, type checker and
//! A-normal-form pass.
//!
//! A program is *normalized* when every argument of a function or
//! constructor application is a variable, literals appear only as primitive
//! arguments or as a whole right-hand side, every case scrutinee is a
//! variable, and every expression ends in a variable reference. Everything
//! downstream of [`load`] assumes a typed, normalized program.

mod anf;
mod lexer;
mod parser;
mod printer;
mod typeck;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

pub use anf::{is_anf, normalize_anf};
pub use parser::{parse, ParseError};
pub use printer::{literal as pretty_literal, pretty, rhs as pretty_rhs};
pub use typeck::{typecheck, TypeError, TypeErrorKind};

/// Identifier. Cheap to clone.
pub type Name = Arc<str>;

/// Maximum constructor ordinal representable in a one-byte tag.
pub const MAX_CTORS: usize = 256;
/// Maximum number of fields per constructor.
pub const MAX_FIELDS: usize = 64;

/// Source position used for diagnostics. Compares equal to every other
/// position so that structural equality of programs ignores layout.
#[derive(Clone, Copy, Debug, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl PartialEq for Pos {
    fn eq(&self, _: &Pos) -> bool {
        true
    }
}
impl Eq for Pos {}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    Int,
    Bool,
    Str,
    Data(Name),
}

impl Type {
    pub fn is_scalar(&self) -> bool {
        !matches!(self, Type::Data(_))
    }

    pub fn data_name(&self) -> Option<&Name> {
        match self {
            Type::Data(n) => Some(n),
            _ => None,
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => f.write_str("Int"),
            Type::Bool => f.write_str("Bool"),
            Type::Str => f.write_str("Str"),
            Type::Data(n) => f.write_str(n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CtorDef {
    pub name: Name,
    pub fields: Vec<Type>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataDef {
    pub name: Name,
    pub ctors: Vec<CtorDef>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Literal {
    Int(i64),
    Bool(bool),
    Str(Arc<str>),
}

impl Literal {
    pub fn ty(&self) -> Type {
        match self {
            Literal::Int(_) => Type::Int,
            Literal::Bool(_) => Type::Bool,
            Literal::Str(_) => Type::Str,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PrimOp {
    Add,
    Sub,
    Mul,
    Pow,
    Eq,
    Lt,
    And,
    Or,
    Not,
    StrEq,
    StrContains,
    StrConcat,
}

impl PrimOp {
    pub const ALL: [PrimOp; 12] = [
        PrimOp::Add,
        PrimOp::Sub,
        PrimOp::Mul,
        PrimOp::Pow,
        PrimOp::Eq,
        PrimOp::Lt,
        PrimOp::And,
        PrimOp::Or,
        PrimOp::Not,
        PrimOp::StrEq,
        PrimOp::StrContains,
        PrimOp::StrConcat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PrimOp::Add => "add",
            PrimOp::Sub => "sub",
            PrimOp::Mul => "mul",
            PrimOp::Pow => "pow",
            PrimOp::Eq => "eq",
            PrimOp::Lt => "lt",
            PrimOp::And => "and",
            PrimOp::Or => "or",
            PrimOp::Not => "not",
            PrimOp::StrEq => "strEq",
            PrimOp::StrContains => "strContains",
            PrimOp::StrConcat => "strConcat",
        }
    }

    pub fn from_name(s: &str) -> Option<PrimOp> {
        PrimOp::ALL.into_iter().find(|p| p.name() == s)
    }

    /// Argument types and result type.
    pub fn signature(self) -> (&'static [Type], Type) {
        use Type::*;
        const II: &[Type] = &[Int, Int];
        const BB: &[Type] = &[Bool, Bool];
        const B: &[Type] = &[Bool];
        const SS: &[Type] = &[Str, Str];
        match self {
            PrimOp::Add | PrimOp::Sub | PrimOp::Mul | PrimOp::Pow => (II, Int),
            PrimOp::Eq | PrimOp::Lt => (II, Bool),
            PrimOp::And | PrimOp::Or => (BB, Bool),
            PrimOp::Not => (B, Bool),
            PrimOp::StrEq | PrimOp::StrContains => (SS, Bool),
            PrimOp::StrConcat => (SS, Str),
        }
    }
}

/// Argument of an application. `Nested` and non-primitive `Lit` arguments
/// only occur before normalization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Arg {
    Var(Name),
    Lit(Literal),
    Nested(Box<Rhs>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rhs {
    FunApp(Name, Vec<Arg>),
    ConApp(Name, Vec<Arg>),
    Prim(PrimOp, Vec<Arg>),
    Lit(Literal),
}

impl Rhs {
    pub fn args(&self) -> &[Arg] {
        match self {
            Rhs::FunApp(_, a) | Rhs::ConApp(_, a) | Rhs::Prim(_, a) => a,
            Rhs::Lit(_) => &[],
        }
    }

    /// Variables referenced by this right-hand side, in argument order,
    /// including those of nested applications.
    pub fn vars(&self) -> Vec<&Name> {
        let mut out = Vec::new();
        fn go<'a>(r: &'a Rhs, out: &mut Vec<&'a Name>) {
            for a in r.args() {
                match a {
                    Arg::Var(v) => out.push(v),
                    Arg::Lit(_) => {}
                    Arg::Nested(n) => go(n, out),
                }
            }
        }
        go(self, &mut out);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Let {
    pub var: Name,
    /// Always `Some` after type checking.
    pub ty: Option<Type>,
    pub rhs: Rhs,
    pub body: Box<Expr>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Arm {
    /// Constructor name, or `True`/`False` for a Bool scrutinee.
    pub ctor: Name,
    pub binders: Vec<Name>,
    pub body: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Case {
    /// `Arg::Var` once normalized.
    pub scrut: Arg,
    pub arms: Vec<Arm>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Let(Let),
    Case(Case),
    Var(Name),
    /// A trailing application; removed by normalization.
    Ret(Rhs),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunDef {
    pub name: Name,
    pub params: Vec<Name>,
    pub param_tys: Vec<Type>,
    pub ret: Type,
    pub body: Expr,
    pub pos: Pos,
}

/// Reference to a constructor field in a layout annotation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FieldRef {
    Index(usize),
    /// Resolved to an index by the type checker; must be unambiguous.
    Type(Name),
}

impl FieldRef {
    pub fn index(&self) -> Option<usize> {
        match self {
            FieldRef::Index(i) => Some(*i),
            FieldRef::Type(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnnKind {
    /// `field` is placed after `before`; immediately after when `adjacent`.
    After {
        field: FieldRef,
        before: FieldRef,
        adjacent: bool,
    },
    /// `field` is placed at position `at`.
    At { field: FieldRef, at: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Annotation {
    pub ctor: Name,
    pub kind: AnnKind,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Program {
    pub datas: Vec<DataDef>,
    pub funs: Vec<FunDef>,
    pub main: Option<Expr>,
    pub anns: Vec<Annotation>,
}

/// A program that passed [`typecheck`] and [`normalize_anf`].
pub type TypedProgram = Program;

/// Location of a constructor: datatype index and ordinal within it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CtorRef {
    pub data: usize,
    pub tag: usize,
}

/// Name lookup tables for a program.
#[derive(Clone, Debug, Default)]
pub struct ProgramIndex {
    pub datas: HashMap<Name, usize>,
    pub ctors: HashMap<Name, CtorRef>,
    pub funs: HashMap<Name, usize>,
}

impl ProgramIndex {
    pub fn new(p: &Program) -> ProgramIndex {
        let mut ix = ProgramIndex::default();
        for (d, dd) in p.datas.iter().enumerate() {
            ix.datas.entry(dd.name.clone()).or_insert(d);
            for (t, c) in dd.ctors.iter().enumerate() {
                ix.ctors.entry(c.name.clone()).or_insert(CtorRef { data: d, tag: t });
            }
        }
        for (i, f) in p.funs.iter().enumerate() {
            ix.funs.entry(f.name.clone()).or_insert(i);
        }
        ix
    }
}

impl Program {
    pub fn ctor(&self, r: CtorRef) -> &CtorDef {
        &self.datas[r.data].ctors[r.tag]
    }

    pub fn find_ctor(&self, name: &str) -> Option<(CtorRef, &CtorDef)> {
        self.datas.iter().enumerate().find_map(|(d, dd)| {
            dd.ctors
                .iter()
                .enumerate()
                .find(|(_, c)| &*c.name == name)
                .map(|(t, c)| (CtorRef { data: d, tag: t }, c))
        })
    }

    pub fn find_data(&self, name: &str) -> Option<&DataDef> {
        self.datas.iter().find(|d| &*d.name == name)
    }

    pub fn find_fun(&self, name: &str) -> Option<&FunDef> {
        self.funs.iter().find(|f| &*f.name == name)
    }

    /// All constructors in declaration order.
    pub fn ctor_refs(&self) -> impl Iterator<Item = (CtorRef, &CtorDef)> {
        self.datas.iter().enumerate().flat_map(|(d, dd)| {
            dd.ctors
                .iter()
                .enumerate()
                .map(move |(t, c)| (CtorRef { data: d, tag: t }, c))
        })
    }
}

/// Errors from [`load`].
#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("type error: {0}")]
    Type(#[from] TypeError),
}

/// Parse, type check and normalize a source text.
pub fn load(src: &str) -> Result<TypedProgram, LoadError> {
    let p = parse(src)?;
    let p = typecheck(&p)?;
    let p = normalize_anf(&p);
    debug_assert!(is_anf(&p));
    Ok(p)
}

/// Build a name for `fresh_in` that does not collide with `used`.
pub(crate) fn fresh_name(base: &str, used: &mut std::collections::HashSet<Name>) -> Name {
    let mut i = 0usize;
    loop {
        let cand: Name = format!("{base}{i}").into();
        if !used.contains(&cand) {
            used.insert(cand.clone());
            return cand;
        }
        i += 1;
    }
}

impl Expr {
    /// Every name bound or referenced in the expression.
    pub fn collect_names(&self, out: &mut std::collections::HashSet<Name>) {
        match self {
            Expr::Let(l) => {
                out.insert(l.var.clone());
                for v in l.rhs.vars() {
                    out.insert(v.clone());
                }
                l.body.collect_names(out);
            }
            Expr::Case(c) => {
                match &c.scrut {
                    Arg::Var(v) => {
                        out.insert(v.clone());
                    }
                    Arg::Nested(r) => {
                        for v in r.vars() {
                            out.insert(v.clone());
                        }
                    }
                    Arg::Lit(_) => {}
                }
                for a in &c.arms {
                    out.extend(a.binders.iter().cloned());
                    a.body.collect_names(out);
                }
            }
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Ret(r) => {
                for v in r.vars() {
                    out.insert(v.clone());
                }
            }
        }
    }
}
