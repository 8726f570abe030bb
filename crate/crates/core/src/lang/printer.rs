use std::fmt::Write;

use super::*;

/// Deterministic pretty-printer: 2-space indentation, one binding per line,
/// blank line between top-level items. The output parses back to an equal
/// program.
pub fn pretty(p: &Program) -> String {
    let mut out = String::new();
    let mut items: Vec<String> = Vec::new();
    for d in &p.datas {
        let ctors: Vec<String> = d
            .ctors
            .iter()
            .map(|c| {
                let mut s = c.name.to_string();
                for f in &c.fields {
                    let _ = write!(s, " {f}");
                }
                s
            })
            .collect();
        items.push(format!("data {} = {}\n", d.name, ctors.join(" | ")));
    }
    for a in &p.anns {
        items.push(format!("{}\n", annotation(a)));
    }
    for f in &p.funs {
        let mut s = String::new();
        let tys: Vec<String> = f.param_tys.iter().map(|t| t.to_string()).collect();
        let _ = writeln!(s, "{} : ({}) -> {}", f.name, tys.join(", "), f.ret);
        let _ = write!(s, "{}", f.name);
        for x in &f.params {
            let _ = write!(s, " {x}");
        }
        s.push_str(" =\n");
        expr(&mut s, &f.body, 1);
        items.push(s);
    }
    if let Some(m) = &p.main {
        let mut s = String::from("main =\n");
        expr(&mut s, m, 1);
        items.push(s);
    }
    for (i, it) in items.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(it);
    }
    out
}

fn field_ref(f: &FieldRef) -> String {
    match f {
        FieldRef::Index(i) => i.to_string(),
        FieldRef::Type(t) => t.to_string(),
    }
}

fn annotation(a: &Annotation) -> String {
    match &a.kind {
        AnnKind::After { field, before, adjacent } => format!(
            "{{-# ANN {} {} {}AFTER {} #-}}",
            a.ctor,
            field_ref(field),
            if *adjacent { "IMMEDIATELY " } else { "" },
            field_ref(before)
        ),
        AnnKind::At { field, at } => format!("{{-# ANN {} {} AT {} #-}}", a.ctor, field_ref(field), at),
    }
}

fn indent(s: &mut String, depth: usize) {
    for _ in 0..depth {
        s.push_str("  ");
    }
}

pub fn literal(l: &Literal) -> String {
    match l {
        Literal::Int(i) => i.to_string(),
        Literal::Bool(true) => "True".into(),
        Literal::Bool(false) => "False".into(),
        Literal::Str(s) => {
            let mut o = String::with_capacity(s.len() + 2);
            o.push('"');
            for c in s.chars() {
                if c == '"' || c == '\\' {
                    o.push('\\');
                }
                o.push(c);
            }
            o.push('"');
            o
        }
    }
}

fn arg(a: &Arg) -> String {
    match a {
        Arg::Var(v) => v.to_string(),
        Arg::Lit(l) => literal(l),
        Arg::Nested(r) => match &**r {
            Rhs::ConApp(c, args) if args.is_empty() => c.to_string(),
            r => format!("({})", rhs(r)),
        },
    }
}

pub fn rhs(r: &Rhs) -> String {
    let (head, args) = match r {
        Rhs::FunApp(f, a) => (f.to_string(), a),
        Rhs::ConApp(c, a) => (c.to_string(), a),
        Rhs::Prim(p, a) => (p.name().to_string(), a),
        Rhs::Lit(l) => return literal(l),
    };
    let mut s = head;
    for a in args {
        s.push(' ');
        s.push_str(&arg(a));
    }
    s
}

fn expr(s: &mut String, e: &Expr, depth: usize) {
    let mut e = e;
    loop {
        match e {
            Expr::Let(l) => {
                indent(s, depth);
                let _ = write!(s, "let {}", l.var);
                if let Some(t) = &l.ty {
                    let _ = write!(s, " : {t}");
                }
                let _ = writeln!(s, " = {} in", rhs(&l.rhs));
                e = &l.body;
            }
            Expr::Case(c) => {
                indent(s, depth);
                let scrut = match &c.scrut {
                    Arg::Var(v) => v.to_string(),
                    Arg::Lit(l) => literal(l),
                    Arg::Nested(r) => rhs(r),
                };
                let _ = writeln!(s, "case {scrut} of");
                for a in &c.arms {
                    indent(s, depth + 1);
                    s.push_str(&a.ctor);
                    for b in &a.binders {
                        let _ = write!(s, " {b}");
                    }
                    s.push_str(" ->\n");
                    stacker::maybe_grow(64 * 1024, 1024 * 1024, || expr(s, &a.body, depth + 2));
                }
                return;
            }
            Expr::Var(v) => {
                indent(s, depth);
                let _ = writeln!(s, "{v}");
                return;
            }
            Expr::Ret(r) => {
                indent(s, depth);
                let _ = writeln!(s, "{}", rhs(r));
                return;
            }
        }
    }
}
