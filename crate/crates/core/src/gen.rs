//! Seeded generators of well-typed programs and of input values.
//!
//! Generated programs terminate on every input: each function matches on its
//! first parameter and only recurses on pattern binders of that match.

use std::collections::HashSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::lang::{
    normalize_anf, typecheck, Arg, Arm, Case, CtorDef, CtorRef, DataDef, Expr, FunDef, Let, Literal, Name, Pos, PrimOp,
    Program, Rhs, Type,
};
use crate::runtime::Value;

pub use rand::SeedableRng;
pub type Rng64 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Bounds for [`random_program`].
#[derive(Clone, Copy, Debug)]
pub struct ProgramShape {
    pub max_datas: usize,
    pub max_ctors: usize,
    pub max_fields: usize,
}

impl Default for ProgramShape {
    fn default() -> ProgramShape {
        ProgramShape { max_datas: 2, max_ctors: 3, max_fields: 5 }
    }
}

const WORDS: [&str; 6] = ["a", "b", "ab", "ba", "key", "x"];

/// A random value of type `ty`. Nesting below `depth` levels uses each
/// datatype's first constructor, which never has datatype fields.
pub fn random_value(p: &Program, ty: &Type, rng: &mut Rng64, depth: usize) -> Value {
    match ty {
        Type::Int => Value::Int(rng.gen_range(-4..=20)),
        Type::Bool => Value::Bool(rng.gen()),
        Type::Str => Value::Str(WORDS.choose(rng).copied().unwrap_or("").into()),
        Type::Data(n) => {
            let d = p.datas.iter().position(|d| &d.name == n).expect("known datatype");
            let dd = &p.datas[d];
            let base: Vec<usize> =
                (0..dd.ctors.len()).filter(|&t| dd.ctors[t].fields.iter().all(Type::is_scalar)).collect();
            let tag = if depth == 0 && !base.is_empty() {
                *base.choose(rng).expect("non-empty")
            } else {
                rng.gen_range(0..dd.ctors.len())
            };
            let fields = dd.ctors[tag]
                .fields
                .iter()
                .map(|t| stacker::maybe_grow(32 * 1024, 1024 * 1024, || random_value(p, t, rng, depth.saturating_sub(1))))
                .collect();
            Value::con(CtorRef { data: d, tag }, fields)
        }
    }
}

/// Random arguments for function `f`.
pub fn random_args(p: &Program, f: &FunDef, rng: &mut Rng64, depth: usize) -> Vec<Value> {
    f.param_tys.iter().map(|t| random_value(p, t, rng, depth)).collect()
}

fn name(s: String) -> Name {
    Arc::from(s)
}

fn random_datas(rng: &mut Rng64, shape: ProgramShape) -> Vec<DataDef> {
    let nd = rng.gen_range(1..=shape.max_datas.max(1));
    let dnames: Vec<Name> = (0..nd).map(|i| name(format!("D{i}"))).collect();
    let mut datas = Vec::new();
    for (i, dn) in dnames.iter().enumerate() {
        let nc = rng.gen_range(2..=shape.max_ctors.max(2));
        let mut ctors = Vec::new();
        for c in 0..nc {
            let nf = if c == 0 { rng.gen_range(0..=1) } else { rng.gen_range(1..=shape.max_fields.max(1)) };
            let fields = (0..nf)
                .map(|_| {
                    let r = rng.gen_range(0..10);
                    match r {
                        0..=2 => Type::Int,
                        3 => Type::Bool,
                        4 => Type::Str,
                        _ if c == 0 => Type::Int,
                        5..=7 => Type::Data(dn.clone()),
                        _ => Type::Data(dnames.choose(rng).expect("non-empty").clone()),
                    }
                })
                .collect();
            ctors.push(CtorDef { name: name(format!("K{i}x{c}")), fields });
        }
        datas.push(DataDef { name: dn.clone(), ctors, pos: Pos::default() });
    }
    datas
}

struct FnGen<'a> {
    datas: &'a [DataDef],
    rng: &'a mut Rng64,
    used: HashSet<Name>,
}

fn let_(var: Name, ty: Type, rhs: Rhs, body: Expr) -> Expr {
    Expr::Let(Let { var, ty: Some(ty), rhs, body: Box::new(body), pos: Pos::default() })
}

fn var(v: &Name) -> Arg {
    Arg::Var(v.clone())
}

impl FnGen<'_> {
    fn fresh(&mut self, base: &str) -> Name {
        crate::lang::fresh_name(base, &mut self.used)
    }

    /// Body of `sumD` (returns Int) or `mapD` (returns D) for datatype `d`.
    fn body(&mut self, d: usize, rebuild: bool, x: &Name, k: &Name) -> Expr {
        let dd = &self.datas[d];
        let arms = dd
            .ctors
            .iter()
            .map(|c| {
                let binders: Vec<Name> = (0..c.fields.len()).map(|_| self.fresh("v")).collect();
                let body = self.arm_body(c, &binders, rebuild, k);
                Arm { ctor: c.name.clone(), binders, body }
            })
            .collect();
        Expr::Case(Case { scrut: var(x), arms, pos: Pos::default() })
    }

    fn arm_body(&mut self, c: &CtorDef, binders: &[Name], rebuild: bool, k: &Name) -> Expr {
        // One binding per field, in random order.
        let mut steps: Vec<usize> = (0..binders.len()).collect();
        steps.shuffle(self.rng);
        let mut out: Vec<Option<Name>> = vec![None; binders.len()];
        let mut lets: Vec<(Name, Type, Rhs)> = Vec::new();
        let mut ints: Vec<Name> = vec![k.clone()];
        for &i in &steps {
            let b = &binders[i];
            match &c.fields[i] {
                Type::Int => {
                    let v = self.fresh("n");
                    let op = *[PrimOp::Add, PrimOp::Sub, PrimOp::Mul].choose(self.rng).expect("non-empty");
                    let other = ints.choose(self.rng).expect("non-empty").clone();
                    lets.push((v.clone(), Type::Int, Rhs::Prim(op, vec![var(b), var(&other)])));
                    if self.rng.gen_bool(0.3) {
                        let w = self.fresh("n");
                        lets.push((w.clone(), Type::Int, Rhs::Prim(PrimOp::Pow, vec![var(&v), Arg::Lit(Literal::Int(3))])));
                        ints.push(w.clone());
                        out[i] = Some(w);
                    } else {
                        ints.push(v.clone());
                        out[i] = Some(v);
                    }
                }
                Type::Bool => {
                    out[i] = Some(b.clone());
                }
                Type::Str => {
                    let v = self.fresh("s");
                    let w = *WORDS.choose(self.rng).expect("non-empty");
                    lets.push((v.clone(), Type::Str, Rhs::Prim(PrimOp::StrConcat, vec![var(b), Arg::Lit(Literal::Str(w.into()))])));
                    out[i] = Some(v);
                }
                Type::Data(dn) => {
                    let callee_rebuild = rebuild && self.rng.gen_bool(0.8);
                    let callee = if callee_rebuild { format!("map{dn}") } else { format!("sum{dn}") };
                    let v = self.fresh("r");
                    let ty = if callee_rebuild { Type::Data(dn.clone()) } else { Type::Int };
                    lets.push((v.clone(), ty, Rhs::FunApp(name(callee), vec![var(b), var(k)])));
                    if callee_rebuild {
                        out[i] = Some(v);
                    } else {
                        ints.push(v.clone());
                        out[i] = Some(b.clone());
                    }
                }
            }
        }
        let tail = if rebuild {
            let r = self.fresh("res");
            let args = out.iter().map(|o| var(o.as_ref().expect("every field handled"))).collect();
            let ty = Type::Data(self.datas.iter().find(|d| d.ctors.iter().any(|x| x.name == c.name)).expect("owner").name.clone());
            let_(r.clone(), ty, Rhs::ConApp(c.name.clone(), args), Expr::Var(r))
        } else {
            self.sum_tail(&ints)
        };
        // Branch on a Bool field, when there is one.
        let bools: Vec<&Name> = binders.iter().zip(&c.fields).filter(|(_, t)| **t == Type::Bool).map(|(b, _)| b).collect();
        let mut body = if let Some(b) = bools.first() {
            let other = if rebuild {
                tail.clone()
            } else {
                let alt = self.fresh("alt");
                let_(alt.clone(), Type::Int, Rhs::Lit(Literal::Int(self.rng.gen_range(0..9))), Expr::Var(alt))
            };
            let (t, f) = if self.rng.gen() { (tail, other) } else { (other, tail) };
            Expr::Case(Case {
                scrut: var(b),
                arms: vec![
                    Arm { ctor: "True".into(), binders: vec![], body: t },
                    Arm { ctor: "False".into(), binders: vec![], body: f },
                ],
                pos: Pos::default(),
            })
        } else {
            tail
        };
        for (v, ty, rhs) in lets.into_iter().rev() {
            body = let_(v, ty, rhs, body);
        }
        body
    }

    fn sum_tail(&mut self, ints: &[Name]) -> Expr {
        let mut acc = ints[0].clone();
        let mut lets = Vec::new();
        for v in &ints[1..] {
            let t = self.fresh("t");
            lets.push((t.clone(), Rhs::Prim(PrimOp::Add, vec![var(&acc), var(v)])));
            acc = t;
        }
        let mut body = Expr::Var(acc);
        for (v, rhs) in lets.into_iter().rev() {
            body = let_(v, Type::Int, rhs, body);
        }
        body
    }
}

/// A random well-typed, normalized program. Each datatype `D` gets
/// `sumD : (D, Int) -> Int` and `mapD : (D, Int) -> D`.
pub fn random_program(rng: &mut Rng64, shape: ProgramShape) -> Program {
    let datas = random_datas(rng, shape);
    let mut funs = Vec::new();
    let mut g = FnGen { datas: &datas, rng, used: HashSet::new() };
    for (d, dd) in datas.iter().enumerate() {
        for rebuild in [false, true] {
            g.used.clear();
            let x = g.fresh("x");
            let k = g.fresh("k");
            let body = g.body(d, rebuild, &x, &k);
            let prefix = if rebuild { "map" } else { "sum" };
            funs.push(FunDef {
                name: name(format!("{prefix}{}", dd.name)),
                params: vec![x, k],
                param_tys: vec![Type::Data(dd.name.clone()), Type::Int],
                ret: if rebuild { Type::Data(dd.name.clone()) } else { Type::Int },
                body,
                pos: Pos::default(),
            });
        }
    }
    let p = Program { datas, funs, main: None, anns: vec![] };
    let p = typecheck(&p).unwrap_or_else(|e| panic!("generated program is ill-typed: {e}\n{}", crate::lang::pretty(&p)));
    normalize_anf(&p)
}

/// A uniformly random permutation of `0..n`.
pub fn random_permutation(rng: &mut Rng64, n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(rng);
    v
}
