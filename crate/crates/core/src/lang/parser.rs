//! Recursive-descent parser with a small layout rule: a token that starts a
//! line at or left of the column of the innermost enclosing case-arm block
//! ends that block, and top-level items start in column 1.

use super::lexer::{lex, Tok, Token};
use super::*;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub msg: String,
}

const KEYWORDS: &[&str] = &["data", "let", "in", "case", "of"];

struct Parser {
    toks: Vec<Token>,
    i: usize,
    /// Columns of enclosing layout blocks; the bottom entry is column 1.
    blocks: Vec<u32>,
}

/// Parse source text into an untyped program.
pub fn parse(src: &str) -> Result<Program, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, i: 0, blocks: vec![1] };
    p.program()
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.i]
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn pos(&self) -> Pos {
        let t = self.peek();
        Pos { line: t.line, col: t.col }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let t = self.peek();
        Err(ParseError { line: t.line, col: t.col, msg: msg.into() })
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, ParseError> {
        self.err(format!("expected {wanted}, found {}", self.peek().tok.describe()))
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if self.peek().tok == tok {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&tok.describe())
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Lower(s) if s == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.at_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    /// True when the current token closes the innermost layout block.
    fn at_block_end(&self) -> bool {
        let t = self.peek();
        t.tok == Tok::Eof || (t.bol && t.col <= *self.blocks.last().unwrap())
    }

    fn lower(&mut self, what: &str) -> Result<Name, ParseError> {
        match &self.peek().tok {
            Tok::Lower(s) if !KEYWORDS.contains(&s.as_str()) => {
                let n: Name = s.as_str().into();
                self.bump();
                Ok(n)
            }
            _ => self.unexpected(what),
        }
    }

    fn upper(&mut self, what: &str) -> Result<Name, ParseError> {
        match &self.peek().tok {
            Tok::Upper(s) => {
                let n: Name = s.as_str().into();
                self.bump();
                Ok(n)
            }
            _ => self.unexpected(what),
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut prog = Program::default();
        let mut sigs: Vec<(Name, Vec<Type>, Type, Pos)> = Vec::new();
        let mut defs: Vec<(Name, Vec<Name>, Expr, Pos)> = Vec::new();
        while self.peek().tok != Tok::Eof {
            if self.peek().col != 1 {
                return self.err("top-level items must start in column 1");
            }
            let pos = self.pos();
            match self.peek().tok.clone() {
                Tok::Lower(s) if s == "data" => prog.datas.push(self.data_decl()?),
                Tok::PragmaOpen => prog.anns.push(self.pragma()?),
                Tok::Lower(s) if s == "main" && *self.peek_at(1) == Tok::Eq => {
                    self.bump();
                    self.bump();
                    if prog.main.is_some() {
                        return Err(ParseError { line: pos.line, col: pos.col, msg: "duplicate `main`".into() });
                    }
                    prog.main = Some(self.expr()?);
                }
                Tok::Lower(_) if *self.peek_at(1) == Tok::Colon => {
                    let name = self.lower("function name")?;
                    self.bump();
                    let (args, ret) = self.signature()?;
                    sigs.push((name, args, ret, pos));
                }
                Tok::Lower(_) => {
                    let name = self.lower("function name")?;
                    let mut params = Vec::new();
                    while self.peek().tok != Tok::Eq {
                        params.push(self.lower("parameter name or `=`")?);
                    }
                    self.bump();
                    let body = self.expr()?;
                    defs.push((name, params, body, pos));
                }
                _ => return self.unexpected("`data`, a signature, a definition or a pragma"),
            }
            if !self.at_block_end() {
                return self.unexpected("end of item");
            }
        }
        for (name, params, body, pos) in defs {
            let Some(sig) = sigs.iter().position(|s| s.0 == name) else {
                return Err(ParseError {
                    line: pos.line,
                    col: pos.col,
                    msg: format!("definition of `{name}` has no type signature"),
                });
            };
            let (_, param_tys, ret, _) = sigs.remove(sig);
            prog.funs.push(FunDef { name, params, param_tys, ret, body, pos });
        }
        if let Some((name, _, _, pos)) = sigs.first() {
            return Err(ParseError { line: pos.line, col: pos.col, msg: format!("signature for `{name}` has no definition") });
        }
        Ok(prog)
    }

    fn ty(&mut self) -> Result<Type, ParseError> {
        let n = self.upper("a type")?;
        Ok(match &*n {
            "Int" => Type::Int,
            "Bool" => Type::Bool,
            "Str" => Type::Str,
            _ => Type::Data(n),
        })
    }

    fn data_decl(&mut self) -> Result<DataDef, ParseError> {
        let pos = self.pos();
        self.expect_keyword("data")?;
        let name = self.upper("datatype name")?;
        self.expect(Tok::Eq)?;
        let mut ctors = Vec::new();
        loop {
            let cname = self.upper("constructor name")?;
            let mut fields = Vec::new();
            while !self.at_block_end() && matches!(self.peek().tok, Tok::Upper(_)) {
                fields.push(self.ty()?);
            }
            ctors.push(CtorDef { name: cname, fields });
            if self.peek().tok == Tok::Bar && !self.at_block_end() {
                self.bump();
            } else {
                break;
            }
        }
        Ok(DataDef { name, ctors, pos })
    }

    fn signature(&mut self) -> Result<(Vec<Type>, Type), ParseError> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if self.peek().tok != Tok::RParen {
            args.push(self.ty()?);
            while self.peek().tok == Tok::Comma {
                self.bump();
                args.push(self.ty()?);
            }
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::Arrow)?;
        Ok((args, self.ty()?))
    }

    fn field_ref(&mut self) -> Result<FieldRef, ParseError> {
        match self.peek().tok.clone() {
            Tok::Int(i) if i >= 0 => {
                self.bump();
                Ok(FieldRef::Index(i as usize))
            }
            Tok::Upper(_) => Ok(FieldRef::Type(self.upper("field")?)),
            _ => self.unexpected("a field index or field type name"),
        }
    }

    fn pragma(&mut self) -> Result<Annotation, ParseError> {
        let pos = self.pos();
        self.expect(Tok::PragmaOpen)?;
        match &self.peek().tok {
            Tok::Upper(s) if s == "ANN" => {
                self.bump();
            }
            _ => return self.unexpected("`ANN`"),
        }
        let ctor = self.upper("constructor name")?;
        let field = self.field_ref()?;
        let word = self.upper("`AFTER`, `IMMEDIATELY AFTER` or `AT`")?;
        let kind = match &*word {
            "AT" => match self.peek().tok.clone() {
                Tok::Int(k) if k >= 0 => {
                    self.bump();
                    AnnKind::At { field, at: k as usize }
                }
                _ => return self.unexpected("a position"),
            },
            "AFTER" => AnnKind::After { field, before: self.field_ref()?, adjacent: false },
            "IMMEDIATELY" => {
                match &self.peek().tok {
                    Tok::Upper(s) if s == "AFTER" => {
                        self.bump();
                    }
                    _ => return self.unexpected("`AFTER`"),
                }
                AnnKind::After { field, before: self.field_ref()?, adjacent: true }
            }
            _ => {
                return Err(ParseError {
                    line: pos.line,
                    col: pos.col,
                    msg: format!("unknown annotation keyword `{word}`"),
                })
            }
        };
        self.expect(Tok::PragmaClose)?;
        Ok(Annotation { ctor, kind, pos })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        stacker::maybe_grow(64 * 1024, 1024 * 1024, || self.expr_inner())
    }

    fn expr_inner(&mut self) -> Result<Expr, ParseError> {
        if self.at_block_end() {
            return self.unexpected("an expression");
        }
        let pos = self.pos();
        if self.at_keyword("let") {
            self.bump();
            let var = self.lower("a variable")?;
            let ty = if self.peek().tok == Tok::Colon {
                self.bump();
                Some(self.ty()?)
            } else {
                None
            };
            self.expect(Tok::Eq)?;
            let rhs = self.rhs(true)?;
            self.expect_keyword("in")?;
            let body = self.expr()?;
            return Ok(Expr::Let(Let { var, ty, rhs, body: Box::new(body), pos }));
        }
        if self.at_keyword("case") {
            self.bump();
            let scrut = match (&self.peek().tok, self.peek_at(1)) {
                (Tok::Lower(_), Tok::Lower(of)) if of == "of" => Arg::Var(self.lower("a variable")?),
                _ => Arg::Nested(Box::new(self.rhs(false)?)),
            };
            self.expect_keyword("of")?;
            let col = self.peek().col;
            if col <= *self.blocks.last().unwrap() && self.peek().bol {
                return self.err("case arms must be indented past the enclosing block");
            }
            self.blocks.push(col);
            let mut arms = Vec::new();
            loop {
                let ctor = self.upper("a constructor pattern")?;
                let mut binders = Vec::new();
                while self.peek().tok != Tok::Arrow {
                    binders.push(self.lower("a pattern variable or `->`")?);
                }
                self.bump();
                let body = self.expr()?;
                arms.push(Arm { ctor, binders, body });
                let t = self.peek();
                if t.tok != Tok::Eof && t.bol && t.col == col && matches!(t.tok, Tok::Upper(_)) {
                    continue;
                }
                break;
            }
            self.blocks.pop();
            return Ok(Expr::Case(Case { scrut, arms, pos }));
        }
        if let Tok::Lower(s) = &self.peek().tok {
            if !KEYWORDS.contains(&s.as_str()) && PrimOp::from_name(s).is_none() {
                let after = self.toks[self.i + 1].clone();
                let ends = after.tok == Tok::Eof
                    || (after.bol && after.col <= *self.blocks.last().unwrap())
                    || matches!(&after.tok, Tok::Lower(k) if k == "in" || k == "of")
                    || after.tok == Tok::RParen;
                if ends {
                    return Ok(Expr::Var(self.lower("a variable")?));
                }
            }
        }
        Ok(Expr::Ret(self.rhs(false)?))
    }

    fn at_arg_start(&self) -> bool {
        if self.at_block_end() {
            return false;
        }
        match &self.peek().tok {
            Tok::Lower(s) => !KEYWORDS.contains(&s.as_str()),
            Tok::Upper(_) | Tok::Int(_) | Tok::Str(_) | Tok::LParen => true,
            _ => false,
        }
    }

    fn literal(&mut self) -> Option<Literal> {
        let lit = match &self.peek().tok {
            Tok::Int(i) => Literal::Int(*i),
            Tok::Str(s) => Literal::Str(s.as_str().into()),
            Tok::Upper(s) if s == "True" => Literal::Bool(true),
            Tok::Upper(s) if s == "False" => Literal::Bool(false),
            _ => return None,
        };
        self.bump();
        Some(lit)
    }

    fn arg(&mut self) -> Result<Arg, ParseError> {
        if let Some(l) = self.literal() {
            return Ok(Arg::Lit(l));
        }
        match self.peek().tok.clone() {
            Tok::LParen => {
                self.bump();
                let r = self.rhs(false)?;
                self.expect(Tok::RParen)?;
                Ok(match r {
                    Rhs::Lit(l) => Arg::Lit(l),
                    r => Arg::Nested(Box::new(r)),
                })
            }
            Tok::Upper(_) => {
                let c = self.upper("a constructor")?;
                Ok(Arg::Nested(Box::new(Rhs::ConApp(c, Vec::new()))))
            }
            Tok::Lower(_) => Ok(Arg::Var(self.lower("a variable")?)),
            _ => self.unexpected("an argument"),
        }
    }

    fn args(&mut self) -> Result<Vec<Arg>, ParseError> {
        let mut v = Vec::new();
        while self.at_arg_start() {
            v.push(self.arg()?);
        }
        Ok(v)
    }

    /// Right-hand side of a binding. `in_let` forbids a bare variable.
    fn rhs(&mut self, in_let: bool) -> Result<Rhs, ParseError> {
        if let Some(l) = self.literal() {
            return Ok(Rhs::Lit(l));
        }
        match self.peek().tok.clone() {
            Tok::Upper(_) => {
                let c = self.upper("a constructor")?;
                Ok(Rhs::ConApp(c, self.args()?))
            }
            Tok::LParen => {
                self.bump();
                let r = self.rhs(false)?;
                self.expect(Tok::RParen)?;
                Ok(r)
            }
            Tok::Lower(s) if !KEYWORDS.contains(&s.as_str()) => {
                if let Some(op) = PrimOp::from_name(&s) {
                    self.bump();
                    return Ok(Rhs::Prim(op, self.args()?));
                }
                let f = self.lower("a function name")?;
                let args = self.args()?;
                if args.is_empty() {
                    let what = if in_let { "a variable alias is not a valid right-hand side" } else { "expected an application" };
                    return self.err(format!("{what} (`{f}` applied to nothing)"));
                }
                Ok(Rhs::FunApp(f, args))
            }
            _ => self.unexpected("a right-hand side"),
        }
    }
}
