use std::collections::HashSet;

use super::*;

/// Bind every nested application, every non-primitive literal argument,
/// every non-variable scrutinee and every trailing application to a fresh
/// variable. Evaluation order is preserved: arguments are bound left to right
/// before the enclosing application. Idempotent.
///
/// Expects a type-checked program (all `let` types present).
pub fn normalize_anf(p: &TypedProgram) -> TypedProgram {
    let ix = ProgramIndex::new(p);
    let mut out = p.clone();
    for f in out.funs.iter_mut() {
        let mut used = HashSet::new();
        used.extend(f.params.iter().cloned());
        f.body.collect_names(&mut used);
        let mut n = Normalizer { p, ix: &ix, used };
        f.body = n.expr(&f.body);
    }
    if let Some(m) = out.main.as_mut() {
        let mut used = HashSet::new();
        m.collect_names(&mut used);
        let mut n = Normalizer { p, ix: &ix, used };
        *m = n.expr(m);
    }
    out
}

/// True when the program is in A-normal form.
pub fn is_anf(p: &Program) -> bool {
    fn rhs_ok(r: &Rhs) -> bool {
        match r {
            Rhs::Lit(_) => true,
            Rhs::Prim(_, a) => a.iter().all(|a| matches!(a, Arg::Var(_) | Arg::Lit(_))),
            Rhs::FunApp(_, a) | Rhs::ConApp(_, a) => a.iter().all(|a| matches!(a, Arg::Var(_))),
        }
    }
    fn go(e: &Expr) -> bool {
        match e {
            Expr::Var(_) => true,
            Expr::Ret(_) => false,
            Expr::Let(l) => l.ty.is_some() && rhs_ok(&l.rhs) && go(&l.body),
            Expr::Case(c) => matches!(c.scrut, Arg::Var(_)) && c.arms.iter().all(|a| go(&a.body)),
        }
    }
    p.funs.iter().all(|f| go(&f.body)) && p.main.as_ref().is_none_or(go)
}

struct Normalizer<'a> {
    p: &'a Program,
    ix: &'a ProgramIndex,
    used: HashSet<Name>,
}

struct Binding {
    var: Name,
    ty: Type,
    rhs: Rhs,
}

impl Normalizer<'_> {
    fn rhs_type(&self, r: &Rhs) -> Type {
        match r {
            Rhs::Lit(l) => l.ty(),
            Rhs::Prim(op, _) => op.signature().1,
            Rhs::ConApp(c, _) => Type::Data(self.p.datas[self.ix.ctors[c].data].name.clone()),
            Rhs::FunApp(f, _) => self.p.funs[self.ix.funs[f]].ret.clone(),
        }
    }

    fn bind(&mut self, pre: &mut Vec<Binding>, rhs: Rhs) -> Name {
        let var = fresh_name("tmp", &mut self.used);
        let ty = self.rhs_type(&rhs);
        pre.push(Binding { var: var.clone(), ty, rhs });
        var
    }

    fn rhs(&mut self, r: &Rhs, pre: &mut Vec<Binding>) -> Rhs {
        let lits_ok = matches!(r, Rhs::Prim(..));
        let mut args = Vec::with_capacity(r.args().len());
        for a in r.args() {
            args.push(match a {
                Arg::Var(v) => Arg::Var(v.clone()),
                Arg::Lit(l) if lits_ok => Arg::Lit(l.clone()),
                Arg::Lit(l) => Arg::Var(self.bind(pre, Rhs::Lit(l.clone()))),
                Arg::Nested(n) => {
                    let inner = self.rhs(n, pre);
                    Arg::Var(self.bind(pre, inner))
                }
            });
        }
        match r {
            Rhs::FunApp(f, _) => Rhs::FunApp(f.clone(), args),
            Rhs::ConApp(c, _) => Rhs::ConApp(c.clone(), args),
            Rhs::Prim(o, _) => Rhs::Prim(*o, args),
            Rhs::Lit(l) => Rhs::Lit(l.clone()),
        }
    }

    fn wrap(pre: Vec<Binding>, body: Expr) -> Expr {
        pre.into_iter().rev().fold(body, |body, b| {
            Expr::Let(Let { var: b.var, ty: Some(b.ty), rhs: b.rhs, body: Box::new(body), pos: Pos::default() })
        })
    }

    fn expr(&mut self, e: &Expr) -> Expr {
        stacker::maybe_grow(64 * 1024, 1024 * 1024, || self.expr_inner(e))
    }

    fn expr_inner(&mut self, e: &Expr) -> Expr {
        let mut pre = Vec::new();
        let core = match e {
            Expr::Var(v) => Expr::Var(v.clone()),
            Expr::Ret(r) => {
                let r = self.rhs(r, &mut pre);
                Expr::Var(self.bind(&mut pre, r))
            }
            Expr::Let(l) => {
                let rhs = self.rhs(&l.rhs, &mut pre);
                let ty = l.ty.clone().or_else(|| Some(self.rhs_type(&rhs)));
                Expr::Let(Let { var: l.var.clone(), ty, rhs, body: Box::new(self.expr(&l.body)), pos: l.pos })
            }
            Expr::Case(c) => {
                let scrut = match &c.scrut {
                    Arg::Var(v) => Arg::Var(v.clone()),
                    Arg::Lit(l) => Arg::Var(self.bind(&mut pre, Rhs::Lit(l.clone()))),
                    Arg::Nested(r) => {
                        let r = self.rhs(r, &mut pre);
                        Arg::Var(self.bind(&mut pre, r))
                    }
                };
                let arms = c
                    .arms
                    .iter()
                    .map(|a| Arm { ctor: a.ctor.clone(), binders: a.binders.clone(), body: self.expr(&a.body) })
                    .collect();
                Expr::Case(Case { scrut, arms, pos: c.pos })
            }
        };
        Self::wrap(pre, core)
    }
}
