use super::ast::{CmpOp, ConcreteProgram, Cond, IntExpr, Stmt, StmtKind, VarDecl};
use crate::error::{Error, Result, SyntaxError};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: [&str; 21] = [
    "==", "!=", "<=", ">=", "&&", "||", "<", ">", "=", "+", "-", "*", "(", ")", "[", "]", "{", "}", ",", ";", "!",
];

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
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token { tok: Tok::Ident(src[start..i].to_string()), line, col });
            } else if c.is_ascii_digit() {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let value = src[start..i]
                    .parse()
                    .map_err(|_| SyntaxError::new(line, col, "integer literal too large"))?;
                out.push(Token { tok: Tok::Int(value), line, col });
            } else if let Some(sym) = SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
                out.push(Token { tok: Tok::Sym(sym), line, col });
                i += sym.len();
            } else {
                return Err(SyntaxError::new(line, col, format!("unexpected character `{c}`")).into());
            }
        }
    }
    let (line, col) = (text.lines().count().max(1), 1);
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

const LOOP_KEYWORDS: [&str; 5] = ["while", "for", "goto", "do", "loop"];
const RESERVED: [&str; 8] = ["var", "in", "unif", "observe", "if", "else", "true", "false"];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    decls: Vec<VarDecl>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T> {
        let (l, c) = self.here();
        Err(SyntaxError::new(l, c, msg).into())
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(format!("expected `{s}`, found {}", self.describe()))
        }
    }

    fn expect_kw(&mut self, s: &str) -> Result<()> {
        if self.is_kw(s) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{s}`, found {}", self.describe()))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => self.error(format!("expected identifier, found {}", self.describe())),
        }
    }

    fn signed_int(&mut self) -> Result<i64> {
        let negative = self.eat_sym("-");
        match *self.peek() {
            Tok::Int(n) => {
                self.bump();
                Ok(if negative { -n } else { n })
            }
            _ => self.error(format!("expected integer, found {}", self.describe())),
        }
    }

    /// `[lo, hi)`
    fn range(&mut self) -> Result<(i64, i64)> {
        self.expect_sym("[")?;
        let lo = self.signed_int()?;
        self.expect_sym(",")?;
        let hi = self.signed_int()?;
        self.expect_sym(")")?;
        Ok((lo, hi))
    }

    fn resolve(&self, name: &str) -> Result<usize> {
        self.decls
            .iter()
            .position(|d| d.name == name)
            .ok_or_else(|| Error::UndeclaredVariable(name.to_string()))
    }

    fn decl(&mut self) -> Result<()> {
        self.expect_kw("var")?;
        let name = self.ident()?;
        self.expect_kw("in")?;
        let (lo, hi) = self.range()?;
        if lo >= hi {
            return Err(Error::InvalidDeclaration(format!("`{name}` has empty range [{lo}, {hi})")));
        }
        if self.decls.iter().any(|d| d.name == name) {
            return Err(Error::DuplicateVariable(name));
        }
        self.decls.push(VarDecl { name, lo, hi });
        self.eat_sym(";");
        Ok(())
    }

    fn block_until(&mut self, close: Option<&str>) -> Result<Vec<Stmt>> {
        let mut out = Vec::new();
        loop {
            while self.eat_sym(";") {}
            match (close, self.peek()) {
                (Some(c), _) if self.is_sym(c) => return Ok(out),
                (None, Tok::Eof) => return Ok(out),
                (Some(_), Tok::Eof) => return self.error("unexpected end of input, expected `}`"),
                _ => out.push(self.stmt()?),
            }
        }
    }

    fn stmt(&mut self) -> Result<Stmt> {
        let (line, _) = self.here();
        let kind = match self.peek().clone() {
            Tok::Ident(k) if LOOP_KEYWORDS.contains(&k.as_str()) => {
                return Err(Error::Unsupported(format!("`{k}` at line {line}: loops and jumps are not supported")));
            }
            Tok::Ident(k) if k == "var" => {
                return self.error("declarations must precede statements");
            }
            Tok::Ident(k) if k == "observe" => {
                self.bump();
                self.expect_sym("(")?;
                let c = self.cond()?;
                self.expect_sym(")")?;
                StmtKind::Observe(c)
            }
            Tok::Ident(k) if k == "if" => {
                self.bump();
                self.expect_sym("(")?;
                let c = self.cond()?;
                self.expect_sym(")")?;
                self.expect_sym("{")?;
                let then = self.block_until(Some("}"))?;
                self.expect_sym("}")?;
                let els = if self.is_kw("else") {
                    self.bump();
                    if self.is_kw("if") {
                        vec![self.stmt()?]
                    } else {
                        self.expect_sym("{")?;
                        let b = self.block_until(Some("}"))?;
                        self.expect_sym("}")?;
                        b
                    }
                } else {
                    Vec::new()
                };
                StmtKind::If(c, then, els)
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                let var = self.resolve(&name)?;
                self.expect_sym("=")?;
                if self.is_kw("unif") {
                    self.bump();
                    let (lo, hi) = self.range()?;
                    let d = &self.decls[var];
                    if lo >= hi || lo < d.lo || hi > d.hi {
                        return Err(Error::InvalidDeclaration(format!(
                            "draw range [{lo}, {hi}) for `{name}` must be nonempty and within [{}, {})",
                            d.lo, d.hi
                        )));
                    }
                    StmtKind::Uniform(var, lo, hi)
                } else {
                    StmtKind::Assign(var, self.expr()?)
                }
            }
            _ => return self.error(format!("expected a statement, found {}", self.describe())),
        };
        self.eat_sym(";");
        Ok(Stmt { id: 0, line, kind })
    }

    fn cond(&mut self) -> Result<Cond> {
        let mut left = self.cond_and()?;
        while self.eat_sym("||") {
            let right = self.cond_and()?;
            left = Cond::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn cond_and(&mut self) -> Result<Cond> {
        let mut left = self.cond_unary()?;
        while self.eat_sym("&&") {
            let right = self.cond_unary()?;
            left = Cond::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn cond_unary(&mut self) -> Result<Cond> {
        if self.eat_sym("!") {
            return Ok(Cond::Not(Box::new(self.cond_unary()?)));
        }
        if self.is_kw("true") {
            self.bump();
            return Ok(Cond::Const(true));
        }
        if self.is_kw("false") {
            self.bump();
            return Ok(Cond::Const(false));
        }
        if self.is_sym("(") {
            // Either a parenthesized condition or a comparison whose left side
            // starts with a parenthesized expression.
            let save = self.pos;
            self.bump();
            if let Ok(c) = self.cond() {
                if self.eat_sym(")") && !self.at_cmp_or_arith() {
                    return Ok(c);
                }
            }
            self.pos = save;
        }
        self.comparison()
    }

    fn at_cmp_or_arith(&self) -> bool {
        matches!(self.peek(), Tok::Sym(s) if ["<", "<=", "==", "!=", ">", ">=", "+", "-", "*"].contains(s))
    }

    fn comparison(&mut self) -> Result<Cond> {
        let a = self.expr()?;
        let op = match self.peek() {
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym("==") => CmpOp::Eq,
            Tok::Sym("!=") => CmpOp::Ne,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym(">=") => CmpOp::Ge,
            _ => return self.error(format!("expected comparison operator, found {}", self.describe())),
        };
        self.bump();
        let b = self.expr()?;
        Ok(Cond::Cmp(op, a, b))
    }

    fn expr(&mut self) -> Result<IntExpr> {
        let mut left = self.term()?;
        loop {
            if self.eat_sym("+") {
                left = IntExpr::Add(Box::new(left), Box::new(self.term()?));
            } else if self.eat_sym("-") {
                left = IntExpr::Sub(Box::new(left), Box::new(self.term()?));
            } else {
                return Ok(left);
            }
        }
    }

    fn term(&mut self) -> Result<IntExpr> {
        let mut left = self.factor()?;
        while self.is_sym("*") {
            let (line, col) = self.here();
            self.bump();
            let right = self.factor()?;
            left = match (left, right) {
                (IntExpr::Const(a), IntExpr::Const(b)) => IntExpr::Const(a * b),
                (IntExpr::Const(k), e) | (e, IntExpr::Const(k)) => IntExpr::Scale(k, Box::new(e)),
                _ => {
                    return Err(Error::Unsupported(format!(
                        "nonlinear multiplication at {line}:{col}"
                    )))
                }
            };
        }
        Ok(left)
    }

    fn factor(&mut self) -> Result<IntExpr> {
        match self.peek().clone() {
            Tok::Sym("-") => {
                self.bump();
                match self.factor()? {
                    IntExpr::Const(n) => Ok(IntExpr::Const(-n)),
                    e => Ok(IntExpr::Scale(-1, Box::new(e))),
                }
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Int(n) => {
                self.bump();
                Ok(IntExpr::Const(n))
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                Ok(IntExpr::Var(self.resolve(&name)?))
            }
            _ => self.error(format!("expected expression, found {}", self.describe())),
        }
    }
}

pub fn parse_concrete(text: &str) -> Result<ConcreteProgram> {
    let mut p = Parser { toks: lex(text)?, pos: 0, decls: Vec::new() };
    while p.is_kw("var") {
        p.decl()?;
    }
    let body = p.block_until(None)?;
    Ok(ConcreteProgram::new(p.decls, body))
}

/// Parses a standalone condition against existing declarations.
pub fn parse_cond(text: &str, decls: &[VarDecl]) -> Result<Cond> {
    let mut p = Parser { toks: lex(text)?, pos: 0, decls: decls.to_vec() };
    let c = p.cond()?;
    if *p.peek() != Tok::Eof {
        return p.error(format!("unexpected {} after condition", p.describe()));
    }
    Ok(c)
}

/// Parses a standalone integer expression against existing declarations.
pub fn parse_expr(text: &str, decls: &[VarDecl]) -> Result<IntExpr> {
    let mut p = Parser { toks: lex(text)?, pos: 0, decls: decls.to_vec() };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return p.error(format!("unexpected {} after expression", p.describe()));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const STEP: &str = "var x in [-2, 3)\nif (x < 0) {\n  x = 0\n} else {\n  x = x + 1\n}\n";

    #[test]
    fn parses_branching_program() {
        let p = parse_concrete(STEP).unwrap();
        assert_eq!(p.decls, vec![VarDecl { name: "x".into(), lo: -2, hi: 3 }]);
        assert_eq!(p.body.len(), 1);
        let StmtKind::If(c, a, b) = &p.body[0].kind else { panic!() };
        assert_eq!(*c, Cond::Cmp(CmpOp::Lt, IntExpr::Var(0), IntExpr::Const(0)));
        assert_eq!(a[0].kind, StmtKind::Assign(0, IntExpr::Const(0)));
        assert_eq!(a[0].id, 1);
        assert_eq!(b[0].id, 2);
        assert_eq!(p.stmt_count(), 3);
    }

    #[test]
    fn empty_program() {
        let p = parse_concrete("").unwrap();
        assert!(p.body.is_empty() && p.decls.is_empty());
        let p = parse_concrete("var x in [0, 2)\n# nothing\n").unwrap();
        assert!(p.body.is_empty());
    }

    #[test]
    fn undeclared_variable() {
        let e = parse_concrete("var x in [0, 4)\nx = y").unwrap_err();
        assert_eq!(e, Error::UndeclaredVariable("y".into()));
    }

    #[test]
    fn loops_are_rejected() {
        let e = parse_concrete("var x in [0, 4)\nwhile (x < 3) { x = x + 1 }").unwrap_err();
        assert!(matches!(e, Error::Unsupported(_)));
    }

    #[test]
    fn syntax_error_has_position() {
        let e = parse_concrete("var x in [0, 4)\nx = = 1").unwrap_err();
        let Error::Syntax(s) = e else { panic!("{e:?}") };
        assert_eq!((s.location.line, s.location.column), (2, 5));
    }

    #[test]
    fn parenthesized_conditions() {
        let decls = vec![VarDecl { name: "x".into(), lo: 0, hi: 9 }];
        let c = parse_cond("(x + 1) * 2 < 5", &decls).unwrap();
        assert!(matches!(c, Cond::Cmp(CmpOp::Lt, IntExpr::Scale(2, _), _)));
        let c = parse_cond("!(x < 1 || x > 3) && true", &decls).unwrap();
        assert!(matches!(c, Cond::And(..)));
        assert!(matches!(parse_cond("x * x < 1", &decls), Err(Error::Unsupported(_))));
    }

    #[test]
    fn printer_round_trips() {
        let src = "var a in [0, 10)\nvar b in [-3, 20)\na = unif [0, 10)\nif (a < 5 && !(b == 2)) {\n b = 2 * (a - 1) + -3\n}\nobserve(b >= a || false)\n";
        let p = parse_concrete(src).unwrap();
        let again = parse_concrete(&p.to_string()).unwrap();
        assert_eq!(p, again);
    }
}
