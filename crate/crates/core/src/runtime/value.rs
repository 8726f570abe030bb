use std::fmt::Write;
use std::sync::Arc;

use crate::lang::{CtorRef, Literal, PrimOp, Program};

/// A boxed runtime value.
#[derive(Clone, Debug)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Str(Arc<str>),
    Con(Arc<ConValue>),
}

#[derive(Debug)]
pub struct ConValue {
    pub ctor: CtorRef,
    pub fields: Vec<Value>,
}

impl Drop for ConValue {
    // Long spines would otherwise be dropped recursively.
    fn drop(&mut self) {
        let mut stack = std::mem::take(&mut self.fields);
        while let Some(v) = stack.pop() {
            if let Value::Con(rc) = v {
                if let Ok(mut inner) = Arc::try_unwrap(rc) {
                    stack.append(&mut inner.fields);
                }
            }
        }
    }
}

impl Value {
    pub fn con(ctor: CtorRef, fields: Vec<Value>) -> Value {
        Value::Con(Arc::new(ConValue { ctor, fields }))
    }

    pub fn from_literal(l: &Literal) -> Value {
        match l {
            Literal::Int(i) => Value::Int(*i),
            Literal::Bool(b) => Value::Bool(*b),
            Literal::Str(s) => Value::Str(s.clone()),
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_con(&self) -> Option<&ConValue> {
        match self {
            Value::Con(c) => Some(c),
            _ => None,
        }
    }

    /// Number of constructor nodes.
    pub fn node_count(&self) -> usize {
        let mut n = 0;
        let mut stack = vec![self];
        while let Some(v) = stack.pop() {
            if let Value::Con(c) = v {
                n += 1;
                stack.extend(c.fields.iter());
            }
        }
        n
    }

    /// Render with constructor names, e.g. `(Cons 1 Nil)`.
    pub fn display(&self, p: &Program) -> String {
        let mut s = String::new();
        self.render(p, &mut s);
        s
    }

    fn render(&self, p: &Program, s: &mut String) {
        match self {
            Value::Int(i) => {
                let _ = write!(s, "{i}");
            }
            Value::Bool(b) => s.push_str(if *b { "True" } else { "False" }),
            Value::Str(x) => s.push_str(&crate::lang::pretty_literal(&Literal::Str(x.clone()))),
            Value::Con(c) => {
                let name = &p.ctor(c.ctor).name;
                if c.fields.is_empty() {
                    s.push_str(name);
                } else {
                    let _ = write!(s, "({name}");
                    for f in &c.fields {
                        s.push(' ');
                        stacker::maybe_grow(32 * 1024, 1024 * 1024, || f.render(p, s));
                    }
                    s.push(')');
                }
            }
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Value) -> bool {
        let mut stack = vec![(self, other)];
        while let Some((a, b)) = stack.pop() {
            match (a, b) {
                (Value::Int(x), Value::Int(y)) if x == y => {}
                (Value::Bool(x), Value::Bool(y)) if x == y => {}
                (Value::Str(x), Value::Str(y)) if x == y => {}
                (Value::Con(x), Value::Con(y)) => {
                    if Arc::ptr_eq(x, y) {
                        continue;
                    }
                    if x.ctor != y.ctor || x.fields.len() != y.fields.len() {
                        return false;
                    }
                    stack.extend(x.fields.iter().zip(y.fields.iter()));
                }
                _ => return false,
            }
        }
        true
    }
}
impl Eq for Value {}

fn wrapping_pow(base: i64, exp: i64) -> i64 {
    if exp < 0 {
        return 0;
    }
    let (mut b, mut e, mut acc) = (base, exp as u64, 1i64);
    while e > 0 {
        if e & 1 == 1 {
            acc = acc.wrapping_mul(b);
        }
        b = b.wrapping_mul(b);
        e >>= 1;
    }
    acc
}

/// Apply a primitive to already-evaluated scalar arguments. Integer
/// arithmetic wraps; `pow` with a negative exponent yields 0.
/// `strContains h n` tests whether `n` occurs in `h`.
pub fn apply_prim(op: PrimOp, args: &[Value]) -> Option<Value> {
    use Value::*;
    Some(match (op, args) {
        (PrimOp::Add, [Int(a), Int(b)]) => Int(a.wrapping_add(*b)),
        (PrimOp::Sub, [Int(a), Int(b)]) => Int(a.wrapping_sub(*b)),
        (PrimOp::Mul, [Int(a), Int(b)]) => Int(a.wrapping_mul(*b)),
        (PrimOp::Pow, [Int(a), Int(b)]) => Int(wrapping_pow(*a, *b)),
        (PrimOp::Eq, [Int(a), Int(b)]) => Bool(a == b),
        (PrimOp::Lt, [Int(a), Int(b)]) => Bool(a < b),
        (PrimOp::And, [Bool(a), Bool(b)]) => Bool(*a && *b),
        (PrimOp::Or, [Bool(a), Bool(b)]) => Bool(*a || *b),
        (PrimOp::Not, [Bool(a)]) => Bool(!a),
        (PrimOp::StrEq, [Str(a), Str(b)]) => Bool(a == b),
        (PrimOp::StrContains, [Str(a), Str(b)]) => Bool(a.contains(&**b)),
        (PrimOp::StrConcat, [Str(a), Str(b)]) => Str(format!("{a}{b}").into()),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow_wraps_and_clamps_negative_exponents() {
        assert_eq!(wrapping_pow(2, 10), 1024);
        assert_eq!(wrapping_pow(3, 0), 1);
        assert_eq!(wrapping_pow(2, 64), 0);
        assert_eq!(wrapping_pow(-1, 3), -1);
        assert_eq!(wrapping_pow(5, -1), 0);
        assert_eq!(wrapping_pow(3, 100), 3i64.wrapping_pow(100));
    }

    #[test]
    fn long_spines_drop_and_compare_without_recursion() {
        let cons = CtorRef { data: 0, tag: 1 };
        let nil = CtorRef { data: 0, tag: 0 };
        let build = || {
            let mut v = Value::con(nil, vec![]);
            for i in 0..200_000 {
                v = Value::con(cons, vec![Value::Int(i), v]);
            }
            v
        };
        let (a, b) = (build(), build());
        assert_eq!(a, b);
        assert_eq!(a.node_count(), 200_001);
    }
}
