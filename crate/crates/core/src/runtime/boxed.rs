//! Reference interpreter over boxed values.

use std::collections::HashMap;

use super::value::{apply_prim, Value};
use super::{EvalError, Limits};
use crate::lang::{Arg, Expr, Name, Program, ProgramIndex, Rhs};

struct Machine<'a> {
    p: &'a Program,
    ix: ProgramIndex,
    limits: Limits,
    steps: u64,
    depth: usize,
}

/// Call `entry` with `args` and return its result.
pub fn interp_boxed(p: &Program, entry: &str, args: &[Value]) -> Result<Value, EvalError> {
    interp_boxed_with(p, entry, args, Limits::default())
}

pub fn interp_boxed_with(p: &Program, entry: &str, args: &[Value], limits: Limits) -> Result<Value, EvalError> {
    let mut m = Machine { p, ix: ProgramIndex::new(p), limits, steps: 0, depth: 0 };
    let fi = *m.ix.funs.get(entry).ok_or_else(|| EvalError::UnknownFunction(entry.into()))?;
    if p.funs[fi].params.len() != args.len() {
        return Err(EvalError::Arity { func: entry.into(), expected: p.funs[fi].params.len(), found: args.len() });
    }
    m.call(fi, args.to_vec())
}

/// Evaluate the program's `main` expression.
pub fn eval_main(p: &Program) -> Result<Value, EvalError> {
    let main = p.main.as_ref().ok_or_else(|| EvalError::UnknownFunction("main".into()))?;
    let mut m = Machine { p, ix: ProgramIndex::new(p), limits: Limits::default(), steps: 0, depth: 0 };
    m.eval(main, HashMap::new())
}

impl Machine<'_> {
    fn call(&mut self, fi: usize, args: Vec<Value>) -> Result<Value, EvalError> {
        if self.depth >= self.limits.max_depth {
            return Err(EvalError::DepthExceeded(self.limits.max_depth));
        }
        let f = &self.p.funs[fi];
        let env: HashMap<Name, Value> = f.params.iter().cloned().zip(args).collect();
        self.depth += 1;
        let r = stacker::maybe_grow(128 * 1024, 4 * 1024 * 1024, || self.eval(&f.body, env));
        self.depth -= 1;
        r
    }

    fn lookup(env: &HashMap<Name, Value>, v: &Name) -> Result<Value, EvalError> {
        env.get(v).cloned().ok_or_else(|| EvalError::Unbound(v.clone()))
    }

    fn arg(&mut self, env: &HashMap<Name, Value>, a: &Arg) -> Result<Value, EvalError> {
        match a {
            Arg::Var(v) => Self::lookup(env, v),
            Arg::Lit(l) => Ok(Value::from_literal(l)),
            Arg::Nested(r) => self.rhs(env, r),
        }
    }

    fn rhs(&mut self, env: &HashMap<Name, Value>, r: &Rhs) -> Result<Value, EvalError> {
        self.steps += 1;
        if self.steps > self.limits.max_steps {
            return Err(EvalError::StepsExceeded(self.limits.max_steps));
        }
        match r {
            Rhs::Lit(l) => Ok(Value::from_literal(l)),
            Rhs::Prim(op, args) => {
                let vals = args.iter().map(|a| self.arg(env, a)).collect::<Result<Vec<_>, _>>()?;
                apply_prim(*op, &vals).ok_or_else(|| EvalError::Internal(format!("ill-typed `{}`", op.name())))
            }
            Rhs::ConApp(c, args) => {
                let vals = args.iter().map(|a| self.arg(env, a)).collect::<Result<Vec<_>, _>>()?;
                let cr = *self.ix.ctors.get(c).ok_or_else(|| EvalError::Internal(format!("unknown constructor `{c}`")))?;
                Ok(Value::con(cr, vals))
            }
            Rhs::FunApp(f, args) => {
                let vals = args.iter().map(|a| self.arg(env, a)).collect::<Result<Vec<_>, _>>()?;
                let fi = *self.ix.funs.get(f).ok_or_else(|| EvalError::UnknownFunction(f.clone()))?;
                self.call(fi, vals)
            }
        }
    }

    fn eval(&mut self, e: &Expr, mut env: HashMap<Name, Value>) -> Result<Value, EvalError> {
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
                    let (name, fields): (&str, Vec<Value>) = match &s {
                        Value::Bool(true) => ("True", vec![]),
                        Value::Bool(false) => ("False", vec![]),
                        Value::Con(cv) => (&self.p.ctor(cv.ctor).name, cv.fields.clone()),
                        _ => return Err(EvalError::Internal("case on a non-matchable value".into())),
                    };
                    let arm = c
                        .arms
                        .iter()
                        .find(|a| &*a.ctor == name)
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
