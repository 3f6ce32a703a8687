use super::ast::{BernExpr, BernProgram, BernStmt, Param};
use crate::error::{Error, Result, SyntaxError};
use crate::rational;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    /// `{...}` variable name, braces included.
    Braced(String),
    Num(String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: [&str; 15] = ["<=>", "=>", "&&", "||", "!", "(", ")", "{", "}", ",", ";", "=", "*", "/", "-"];

/// Length of a braced variable starting at `src[i] == '{'`, if any.
fn braced_len(src: &str, i: usize) -> Option<usize> {
    let rest = &src[i + 1..];
    let end = rest.find('}')?;
    let body = &rest[..end];
    if body.is_empty() || body.contains(|c: char| c.is_whitespace() || c == '{' || c == ';') {
        return None;
    }
    // a lone `=` means this is a block holding an assignment
    let b = body.as_bytes();
    for (k, &c) in b.iter().enumerate() {
        if c == b'=' {
            let prev = if k > 0 { b[k - 1] } else { b' ' };
            let next = b.get(k + 1).copied().unwrap_or(b' ');
            if !matches!(prev, b'<' | b'>' | b'!' | b'=') && next != b'=' {
                return None;
            }
        }
    }
    Some(end + 2)
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let src = raw.split('#').next().unwrap_or("");
        let bytes = src.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i] as char;
            let col = i + 1;
            if c.is_whitespace() {
                i += 1;
            } else if c == '{' && braced_len(src, i).is_some() {
                let len = braced_len(src, i).unwrap();
                out.push(Token { tok: Tok::Braced(src[i..i + len].to_string()), line, col });
                i += len;
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token { tok: Tok::Ident(src[start..i].to_string()), line, col });
            } else if c.is_ascii_digit() {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                out.push(Token { tok: Tok::Num(src[start..i].to_string()), line, col });
            } else if let Some(sym) = SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
                out.push(Token { tok: Tok::Sym(sym), line, col });
                i += sym.len();
            } else {
                return Err(SyntaxError::new(line, col, format!("unexpected character `{c}`")).into());
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line: text.lines().count().max(1), col: 1 });
    Ok(out)
}

const KEYWORDS: [&str; 12] = ["if", "else", "observe", "assume", "flip", "choose", "skip", "bool", "T", "F", "true", "false"];
const LOOP_KEYWORDS: [&str; 5] = ["while", "for", "goto", "do", "loop"];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    vars: Vec<String>,
    implicit: bool,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn bump(&mut self) {
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T> {
        let (l, c) = self.here();
        Err(SyntaxError::new(l, c, msg).into())
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) | Tok::Braced(s) | Tok::Num(s) => format!("`{s}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        let hit = self.is_sym(s);
        if hit {
            self.bump();
        }
        hit
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(format!("expected `{s}`, found {}", self.describe()))
        }
    }

    fn var_name(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Braced(s) => {
                self.bump();
                Ok(s)
            }
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => self.error(format!("expected variable, found {}", self.describe())),
        }
    }

    fn resolve(&mut self, name: &str) -> Result<usize> {
        if let Some(i) = self.vars.iter().position(|v| v == name) {
            return Ok(i);
        }
        if self.implicit {
            self.vars.push(name.to_string());
            return Ok(self.vars.len() - 1);
        }
        Err(Error::UndeclaredVariable(name.to_string()))
    }

    fn declarations(&mut self) -> Result<()> {
        while self.is_kw("bool") {
            self.bump();
            loop {
                let name = self.var_name()?;
                if self.vars.contains(&name) {
                    return Err(Error::DuplicateVariable(name));
                }
                self.vars.push(name);
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.eat_sym(";");
        }
        self.implicit = self.vars.is_empty();
        Ok(())
    }

    fn block(&mut self, braced: bool) -> Result<Vec<BernStmt>> {
        let mut out = Vec::new();
        loop {
            while self.eat_sym(";") {}
            if braced && self.is_sym("}") {
                return Ok(out);
            }
            if *self.peek() == Tok::Eof {
                return if braced { self.error("unexpected end of input, expected `}`") } else { Ok(out) };
            }
            out.push(self.stmt()?);
        }
    }

    fn braced_block(&mut self) -> Result<Vec<BernStmt>> {
        self.expect_sym("{")?;
        let b = self.block(true)?;
        self.expect_sym("}")?;
        Ok(b)
    }

    fn stmt(&mut self) -> Result<BernStmt> {
        let s = match self.peek().clone() {
            Tok::Ident(k) if LOOP_KEYWORDS.contains(&k.as_str()) => {
                let (line, _) = self.here();
                return Err(Error::Unsupported(format!("`{k}` at line {line}: loops and jumps are not supported")));
            }
            Tok::Ident(k) if k == "bool" => return self.error("declarations must precede statements"),
            Tok::Ident(k) if k == "skip" => {
                self.bump();
                BernStmt::Assign(Vec::new())
            }
            Tok::Ident(k) if k == "observe" || k == "assume" => {
                self.bump();
                self.expect_sym("(")?;
                let e = self.expr()?;
                self.expect_sym(")")?;
                if k == "observe" {
                    BernStmt::Observe(e)
                } else {
                    BernStmt::Assume(e)
                }
            }
            Tok::Ident(k) if k == "if" => {
                self.bump();
                self.expect_sym("(")?;
                let g = self.expr()?;
                self.expect_sym(")")?;
                let then = self.braced_block()?;
                let els = if self.is_kw("else") {
                    self.bump();
                    if self.is_kw("if") {
                        vec![self.stmt()?]
                    } else {
                        self.braced_block()?
                    }
                } else {
                    Vec::new()
                };
                BernStmt::If(g, then, els)
            }
            _ => {
                let (line, col) = self.here();
                let mut targets = vec![self.var_name()?];
                while self.eat_sym(",") {
                    targets.push(self.var_name()?);
                }
                self.expect_sym("=")?;
                let mut exprs = vec![self.expr()?];
                while self.eat_sym(",") {
                    exprs.push(self.expr()?);
                }
                if exprs.len() != targets.len() {
                    return Err(SyntaxError::new(
                        line,
                        col,
                        format!("{} targets but {} expressions", targets.len(), exprs.len()),
                    )
                    .into());
                }
                let mut items = Vec::new();
                for (t, e) in targets.into_iter().zip(exprs) {
                    let v = self.resolve(&t)?;
                    if items.iter().any(|(w, _)| *w == v) {
                        return Err(Error::DuplicateTarget(t));
                    }
                    items.push((v, e));
                }
                BernStmt::Assign(items)
            }
        };
        self.eat_sym(";");
        Ok(s)
    }

    fn expr(&mut self) -> Result<BernExpr> {
        let mut left = self.implication()?;
        while self.eat_sym("<=>") {
            let right = self.implication()?;
            left = BernExpr::Iff(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn implication(&mut self) -> Result<BernExpr> {
        let left = self.disjunction()?;
        if self.eat_sym("=>") {
            let right = self.implication()?;
            return Ok(BernExpr::Implies(Box::new(left), Box::new(right)));
        }
        Ok(left)
    }

    fn disjunction(&mut self) -> Result<BernExpr> {
        let mut left = self.conjunction()?;
        while self.eat_sym("||") {
            let right = self.conjunction()?;
            left = BernExpr::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn conjunction(&mut self) -> Result<BernExpr> {
        let mut left = self.unary()?;
        while self.eat_sym("&&") {
            let right = self.unary()?;
            left = BernExpr::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<BernExpr> {
        if self.eat_sym("!") {
            return Ok(BernExpr::Not(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<BernExpr> {
        match self.peek().clone() {
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Sym("*") => {
                self.bump();
                Ok(BernExpr::Star)
            }
            Tok::Ident(k) if k == "T" || k == "true" => {
                self.bump();
                Ok(BernExpr::T)
            }
            Tok::Ident(k) if k == "F" || k == "false" => {
                self.bump();
                Ok(BernExpr::F)
            }
            Tok::Ident(k) if k == "flip" => {
                self.bump();
                self.expect_sym("(")?;
                let param = self.param()?;
                self.expect_sym(")")?;
                Ok(BernExpr::Flip { site: 0, param })
            }
            Tok::Ident(k) if k == "choose" => {
                self.bump();
                self.expect_sym("(")?;
                let a = self.expr()?;
                self.expect_sym(",")?;
                let b = self.expr()?;
                self.expect_sym(")")?;
                Ok(BernExpr::choose(a, b))
            }
            Tok::Ident(_) | Tok::Braced(_) => {
                let name = self.var_name()?;
                Ok(BernExpr::Var(self.resolve(&name)?))
            }
            _ => self.error(format!("expected expression, found {}", self.describe())),
        }
    }

    fn param(&mut self) -> Result<Param> {
        if let Tok::Ident(name) = self.peek().clone() {
            if !KEYWORDS.contains(&name.as_str()) {
                self.bump();
                return Ok(Param::Symbol(name));
            }
        }
        let negative = self.eat_sym("-");
        let Tok::Num(num) = self.peek().clone() else {
            return self.error(format!("expected flip parameter, found {}", self.describe()));
        };
        self.bump();
        let mut text = num;
        if self.eat_sym("/") {
            let Tok::Num(den) = self.peek().clone() else {
                return self.error(format!("expected denominator, found {}", self.describe()));
            };
            self.bump();
            text = format!("{text}/{den}");
        }
        let Some(mut value) = rational::parse(&text) else {
            return self.error(format!("bad flip parameter `{text}`"));
        };
        if negative {
            value = -value;
        }
        if !rational::is_probability(&value) {
            return Err(Error::ParameterRange(rational::format(&value)));
        }
        Ok(Param::Value(value))
    }
}

pub fn parse_bern(text: &str) -> Result<BernProgram> {
    let mut p = Parser { toks: lex(text)?, pos: 0, vars: Vec::new(), implicit: true };
    p.declarations()?;
    let body = p.block(false)?;
    BernProgram::new(p.vars, body)
}

/// Parses a standalone expression over the variables of `program`.
pub fn parse_bern_expr(text: &str, program: &BernProgram) -> Result<BernExpr> {
    let mut p = Parser { toks: lex(text)?, pos: 0, vars: program.vars.clone(), implicit: false };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return p.error(format!("unexpected {} after expression", p.describe()));
    }
    Ok(e)
}
