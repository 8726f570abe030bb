use std::collections::{HashMap, HashSet};
use std::fmt;

use super::*;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TypeErrorKind {
    UnboundVariable(Name),
    UnknownFunction(Name),
    UnknownConstructor(Name),
    UnknownType(Name),
    Arity { what: String, expected: usize, found: usize },
    Mismatch { expected: Type, found: Type, context: String },
    NonExhaustive { missing: Vec<Name> },
    DuplicateArm(Name),
    DuplicateDefinition(Name),
    DuplicateBinder(Name),
    NotMatchable(Type),
    ReservedName(Name),
    Limit(String),
    BadAnnotation(String),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub func: Option<Name>,
    pub pos: Pos,
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pos.line > 0 {
            write!(f, "{}: ", self.pos)?;
        }
        if let Some(func) = &self.func {
            write!(f, "in `{func}`: ")?;
        }
        match &self.kind {
            TypeErrorKind::UnboundVariable(v) => write!(f, "unbound variable `{v}`"),
            TypeErrorKind::UnknownFunction(v) => write!(f, "unknown function `{v}`"),
            TypeErrorKind::UnknownConstructor(v) => write!(f, "unknown constructor `{v}`"),
            TypeErrorKind::UnknownType(v) => write!(f, "unknown type `{v}`"),
            TypeErrorKind::Arity { what, expected, found } => {
                write!(f, "arity mismatch: {what} expects {expected} argument(s), found {found}")
            }
            TypeErrorKind::Mismatch { expected, found, context } => {
                write!(f, "type mismatch in {context}: expected {expected}, found {found}")
            }
            TypeErrorKind::NonExhaustive { missing } => {
                let m: Vec<&str> = missing.iter().map(|n| &**n).collect();
                write!(f, "non-exhaustive match, missing {}", m.join(", "))
            }
            TypeErrorKind::DuplicateArm(c) => write!(f, "duplicate arm for `{c}`"),
            TypeErrorKind::DuplicateDefinition(n) => write!(f, "duplicate definition of `{n}`"),
            TypeErrorKind::DuplicateBinder(n) => write!(f, "`{n}` is already bound in this scope"),
            TypeErrorKind::NotMatchable(t) => write!(f, "cannot match on a value of type {t}"),
            TypeErrorKind::ReservedName(n) => write!(f, "`{n}` is a reserved name"),
            TypeErrorKind::Limit(m) => write!(f, "limit exceeded: {m}"),
            TypeErrorKind::BadAnnotation(m) => write!(f, "bad layout annotation: {m}"),
        }
    }
}

struct Checker<'a> {
    p: &'a Program,
    ix: ProgramIndex,
    func: Option<Name>,
    pos: Pos,
}

type Env = HashMap<Name, Type>;

/// Type check a program. Returns the same program with every `let` type
/// filled in and every annotation field resolved to an index.
pub fn typecheck(p: &Program) -> Result<TypedProgram, TypeError> {
    let mut ck = Checker { p, ix: ProgramIndex::new(p), func: None, pos: Pos::default() };
    ck.check_decls()?;
    let mut out = p.clone();
    out.anns = p.anns.iter().map(|a| ck.annotation(a)).collect::<Result<_, _>>()?;
    for f in out.funs.iter_mut() {
        ck.func = Some(f.name.clone());
        ck.pos = f.pos;
        let mut env = Env::new();
        for (x, t) in f.params.iter().zip(&f.param_tys) {
            if env.insert(x.clone(), t.clone()).is_some() {
                return Err(ck.error(TypeErrorKind::DuplicateBinder(x.clone())));
            }
        }
        let t = ck.expr(&mut f.body, &mut env)?;
        if t != f.ret {
            return Err(ck.error(TypeErrorKind::Mismatch {
                expected: f.ret.clone(),
                found: t,
                context: "function result".into(),
            }));
        }
    }
    if let Some(m) = out.main.as_mut() {
        ck.func = Some("main".into());
        ck.pos = Pos::default();
        ck.expr(m, &mut Env::new())?;
    }
    Ok(out)
}

fn is_reserved(n: &str) -> bool {
    PrimOp::from_name(n).is_some() || matches!(n, "main" | "data" | "let" | "in" | "case" | "of")
}

impl Checker<'_> {
    fn error(&self, kind: TypeErrorKind) -> TypeError {
        TypeError { kind, func: self.func.clone(), pos: self.pos }
    }

    fn known_type(&self, t: &Type) -> Result<(), TypeError> {
        match t {
            Type::Data(n) if !self.ix.datas.contains_key(n) => Err(self.error(TypeErrorKind::UnknownType(n.clone()))),
            _ => Ok(()),
        }
    }

    fn check_decls(&mut self) -> Result<(), TypeError> {
        let mut datas = HashSet::new();
        let mut ctors = HashSet::new();
        for d in &self.p.datas {
            self.pos = d.pos;
            if matches!(&*d.name, "Int" | "Bool" | "Str") || !datas.insert(d.name.clone()) {
                return Err(self.error(TypeErrorKind::DuplicateDefinition(d.name.clone())));
            }
            if d.ctors.len() > MAX_CTORS {
                return Err(self.error(TypeErrorKind::Limit(format!(
                    "`{}` has {} constructors (max {MAX_CTORS})",
                    d.name,
                    d.ctors.len()
                ))));
            }
            for c in &d.ctors {
                if matches!(&*c.name, "True" | "False") {
                    return Err(self.error(TypeErrorKind::ReservedName(c.name.clone())));
                }
                if !ctors.insert(c.name.clone()) {
                    return Err(self.error(TypeErrorKind::DuplicateDefinition(c.name.clone())));
                }
                if c.fields.len() > MAX_FIELDS {
                    return Err(self.error(TypeErrorKind::Limit(format!(
                        "`{}` has {} fields (max {MAX_FIELDS})",
                        c.name,
                        c.fields.len()
                    ))));
                }
                for t in &c.fields {
                    self.known_type(t)?;
                }
            }
        }
        let mut funs = HashSet::new();
        for f in &self.p.funs {
            self.pos = f.pos;
            if is_reserved(&f.name) {
                return Err(self.error(TypeErrorKind::ReservedName(f.name.clone())));
            }
            if !funs.insert(f.name.clone()) {
                return Err(self.error(TypeErrorKind::DuplicateDefinition(f.name.clone())));
            }
            if f.params.len() != f.param_tys.len() {
                return Err(self.error(TypeErrorKind::Arity {
                    what: format!("definition of `{}`", f.name),
                    expected: f.param_tys.len(),
                    found: f.params.len(),
                }));
            }
            if f.params.is_empty() {
                return Err(self.error(TypeErrorKind::Arity {
                    what: format!("function `{}` (at least one parameter)", f.name),
                    expected: 1,
                    found: 0,
                }));
            }
            for t in f.param_tys.iter().chain([&f.ret]) {
                self.known_type(t)?;
            }
        }
        Ok(())
    }

    fn resolve_field(&self, ctor: &CtorDef, r: &FieldRef) -> Result<usize, TypeError> {
        match r {
            FieldRef::Index(i) if *i < ctor.fields.len() => Ok(*i),
            FieldRef::Index(i) => Err(self.error(TypeErrorKind::BadAnnotation(format!(
                "`{}` has no field {i}",
                ctor.name
            )))),
            FieldRef::Type(t) => {
                let hits: Vec<usize> = ctor
                    .fields
                    .iter()
                    .enumerate()
                    .filter(|(_, f)| f.to_string() == **t)
                    .map(|(i, _)| i)
                    .collect();
                match hits.as_slice() {
                    [i] => Ok(*i),
                    [] => Err(self.error(TypeErrorKind::BadAnnotation(format!(
                        "`{}` has no field of type {t}",
                        ctor.name
                    )))),
                    _ => Err(self.error(TypeErrorKind::BadAnnotation(format!(
                        "`{}` has several fields of type {t}; use an index",
                        ctor.name
                    )))),
                }
            }
        }
    }

    fn annotation(&mut self, a: &Annotation) -> Result<Annotation, TypeError> {
        self.pos = a.pos;
        let Some(&r) = self.ix.ctors.get(&a.ctor) else {
            return Err(self.error(TypeErrorKind::UnknownConstructor(a.ctor.clone())));
        };
        let c = self.p.ctor(r);
        let kind = match &a.kind {
            AnnKind::After { field, before, adjacent } => {
                let (f, b) = (self.resolve_field(c, field)?, self.resolve_field(c, before)?);
                if f == b {
                    return Err(self.error(TypeErrorKind::BadAnnotation("a field cannot follow itself".into())));
                }
                AnnKind::After { field: FieldRef::Index(f), before: FieldRef::Index(b), adjacent: *adjacent }
            }
            AnnKind::At { field, at } => {
                if *at >= c.fields.len() {
                    return Err(self.error(TypeErrorKind::BadAnnotation(format!(
                        "position {at} out of range for `{}`",
                        c.name
                    ))));
                }
                AnnKind::At { field: FieldRef::Index(self.resolve_field(c, field)?), at: *at }
            }
        };
        Ok(Annotation { ctor: a.ctor.clone(), kind, pos: a.pos })
    }

    fn var(&self, env: &Env, v: &Name) -> Result<Type, TypeError> {
        env.get(v).cloned().ok_or_else(|| self.error(TypeErrorKind::UnboundVariable(v.clone())))
    }

    fn arg(&self, env: &Env, a: &Arg) -> Result<Type, TypeError> {
        match a {
            Arg::Var(v) => self.var(env, v),
            Arg::Lit(l) => Ok(l.ty()),
            Arg::Nested(r) => self.rhs(env, r),
        }
    }

    fn args(&self, env: &Env, what: String, args: &[Arg], want: &[Type]) -> Result<(), TypeError> {
        if args.len() != want.len() {
            return Err(self.error(TypeErrorKind::Arity { what, expected: want.len(), found: args.len() }));
        }
        for (i, (a, t)) in args.iter().zip(want).enumerate() {
            let got = self.arg(env, a)?;
            if &got != t {
                return Err(self.error(TypeErrorKind::Mismatch {
                    expected: t.clone(),
                    found: got,
                    context: format!("argument {} of {what}", i + 1),
                }));
            }
        }
        Ok(())
    }

    fn rhs(&self, env: &Env, r: &Rhs) -> Result<Type, TypeError> {
        match r {
            Rhs::Lit(l) => Ok(l.ty()),
            Rhs::Prim(op, args) => {
                let (want, ret) = op.signature();
                self.args(env, format!("`{}`", op.name()), args, want)?;
                Ok(ret)
            }
            Rhs::ConApp(c, args) => {
                let Some(&cr) = self.ix.ctors.get(c) else {
                    return Err(self.error(TypeErrorKind::UnknownConstructor(c.clone())));
                };
                self.args(env, format!("constructor `{c}`"), args, &self.p.ctor(cr).fields)?;
                Ok(Type::Data(self.p.datas[cr.data].name.clone()))
            }
            Rhs::FunApp(f, args) => {
                let Some(&fi) = self.ix.funs.get(f) else {
                    return Err(self.error(TypeErrorKind::UnknownFunction(f.clone())));
                };
                let fd = &self.p.funs[fi];
                self.args(env, format!("function `{f}`"), args, &fd.param_tys)?;
                Ok(fd.ret.clone())
            }
        }
    }

    fn bind(&self, env: &mut Env, v: &Name, t: Type) -> Result<(), TypeError> {
        if env.contains_key(v) {
            return Err(self.error(TypeErrorKind::DuplicateBinder(v.clone())));
        }
        env.insert(v.clone(), t);
        Ok(())
    }

    fn expr(&mut self, e: &mut Expr, env: &mut Env) -> Result<Type, TypeError> {
        stacker::maybe_grow(64 * 1024, 1024 * 1024, || self.expr_inner(e, env))
    }

    fn expr_inner(&mut self, e: &mut Expr, env: &mut Env) -> Result<Type, TypeError> {
        match e {
            Expr::Var(v) => self.var(env, v),
            Expr::Ret(r) => self.rhs(env, r),
            Expr::Let(l) => {
                self.pos = l.pos;
                let t = self.rhs(env, &l.rhs)?;
                if let Some(ann) = &l.ty {
                    self.known_type(ann)?;
                    if *ann != t {
                        return Err(self.error(TypeErrorKind::Mismatch {
                            expected: ann.clone(),
                            found: t,
                            context: format!("binding of `{}`", l.var),
                        }));
                    }
                }
                l.ty = Some(t.clone());
                self.bind(env, &l.var, t)?;
                let r = self.expr(&mut l.body, env);
                env.remove(&l.var);
                r
            }
            Expr::Case(c) => {
                self.pos = c.pos;
                let st = self.arg(env, &c.scrut)?;
                let ctors: Vec<(Name, Vec<Type>)> = match &st {
                    Type::Bool => vec![("True".into(), vec![]), ("False".into(), vec![])],
                    Type::Data(d) => {
                        let di = self.ix.datas[d];
                        self.p.datas[di].ctors.iter().map(|c| (c.name.clone(), c.fields.clone())).collect()
                    }
                    t => return Err(self.error(TypeErrorKind::NotMatchable(t.clone()))),
                };
                let mut seen = HashSet::new();
                let mut result: Option<Type> = None;
                for arm in c.arms.iter_mut() {
                    let Some((_, fields)) = ctors.iter().find(|(n, _)| *n == arm.ctor) else {
                        return Err(if self.ix.ctors.contains_key(&arm.ctor) || matches!(&*arm.ctor, "True" | "False") {
                            self.error(TypeErrorKind::Mismatch {
                                expected: st.clone(),
                                found: match self.ix.ctors.get(&arm.ctor) {
                                    Some(r) => Type::Data(self.p.datas[r.data].name.clone()),
                                    None => Type::Bool,
                                },
                                context: format!("pattern `{}`", arm.ctor),
                            })
                        } else {
                            self.error(TypeErrorKind::UnknownConstructor(arm.ctor.clone()))
                        });
                    };
                    if !seen.insert(arm.ctor.clone()) {
                        return Err(self.error(TypeErrorKind::DuplicateArm(arm.ctor.clone())));
                    }
                    if arm.binders.len() != fields.len() {
                        return Err(self.error(TypeErrorKind::Arity {
                            what: format!("pattern `{}`", arm.ctor),
                            expected: fields.len(),
                            found: arm.binders.len(),
                        }));
                    }
                    for (b, t) in arm.binders.iter().zip(fields) {
                        self.bind(env, b, t.clone())?;
                    }
                    let t = self.expr(&mut arm.body, env);
                    for b in &arm.binders {
                        env.remove(b);
                    }
                    let t = t?;
                    match &result {
                        None => result = Some(t),
                        Some(r) if *r != t => {
                            return Err(self.error(TypeErrorKind::Mismatch {
                                expected: r.clone(),
                                found: t,
                                context: format!("arm `{}`", arm.ctor),
                            }))
                        }
                        _ => {}
                    }
                }
                let missing: Vec<Name> = ctors.iter().filter(|(n, _)| !seen.contains(n)).map(|(n, _)| n.clone()).collect();
                if !missing.is_empty() {
                    self.pos = c.pos;
                    return Err(self.error(TypeErrorKind::NonExhaustive { missing }));
                }
                Ok(result.expect("a datatype has at least one constructor"))
            }
        }
    }
}
