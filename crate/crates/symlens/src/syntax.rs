//! Concrete syntax: expressions, lenses, and definition files.
//!
//! Expression syntax: string literals in double quotes (escapes `\"`,
//! `\\`, `\n`, `\t`); juxtaposition or `.` for concatenation; `|` for
//! union; postfix `*` for iteration; parentheses; bare identifiers for
//! references. Precedence: star > concat > union. Stochastic annotations
//! extend this with `*{p}` and `|{p}` (p a rational `a/b` or a decimal)
//! and `skip(...)` / `require(...)`; unannotated operators receive the
//! default probability assignment.
//!
//! Definition files are sequences of `let` and `test` statements; `#`
//! starts a line comment. A `let` with a `S <=> T` annotation defines a
//! lens (either an expression or a `synth using (...)` directive); without
//! one it defines an expression.

use crate::error::{Error, Result};
use crate::lens::Lens;
use crate::rational::{parse_rat, Prob};
use crate::regex::Regex;
use crate::sre::Sre;
use std::fmt;

/// Quotes a string literal with the escapes the concrete syntax supports.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    ProbText(String),
    LParen,
    RParen,
    Comma,
    Semi,
    Colon,
    Eq,
    Pipe,
    Star,
    Dot,
    Arrow,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err_at(line: usize, col: usize, msg: impl fmt::Display) -> Error {
    Error::Other(format!("{line}:{col}: {msg}"))
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1usize;
    let mut col = 1usize;
    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        }};
    }
    loop {
        let (l0, c0) = (line, col);
        let c = match chars.peek() {
            None => break,
            Some(c) => *c,
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump!();
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump!();
                }
            }
            '"' => {
                bump!();
                let mut s = String::new();
                loop {
                    match bump!() {
                        None => return Err(err_at(l0, c0, "unterminated string literal")),
                        Some('"') => break,
                        Some('\\') => match bump!() {
                            Some('"') => s.push('"'),
                            Some('\\') => s.push('\\'),
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            other => {
                                return Err(err_at(line, col, format!("bad escape {other:?}")))
                            }
                        },
                        Some(c) => s.push(c),
                    }
                }
                out.push(Spanned {
                    tok: Tok::Str(s),
                    line: l0,
                    col: c0,
                });
            }
            '{' => {
                // Braces always enclose a probability or cost annotation.
                bump!();
                let mut s = String::new();
                loop {
                    match chars.peek() {
                        None => return Err(err_at(l0, c0, "unterminated annotation")),
                        Some('}') => {
                            bump!();
                            break;
                        }
                        Some(_) => s.push(bump!().unwrap()),
                    }
                }
                out.push(Spanned {
                    tok: Tok::ProbText(s.trim().to_string()),
                    line: l0,
                    col: c0,
                });
            }
            '<' => {
                bump!();
                if bump!() == Some('=') && bump!() == Some('>') {
                    out.push(Spanned {
                        tok: Tok::Arrow,
                        line: l0,
                        col: c0,
                    });
                } else {
                    return Err(err_at(l0, c0, "expected `<=>`"));
                }
            }
            '(' | ')' | ',' | ';' | ':' | '=' | '|' | '*' | '.' => {
                bump!();
                let tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    ';' => Tok::Semi,
                    ':' => Tok::Colon,
                    '=' => Tok::Eq,
                    '|' => Tok::Pipe,
                    '*' => Tok::Star,
                    '.' => Tok::Dot,
                    _ => unreachable!(),
                };
                out.push(Spanned {
                    tok,
                    line: l0,
                    col: c0,
                });
            }
            c if c.is_alphanumeric() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        s.push(c);
                        bump!();
                    } else {
                        break;
                    }
                }
                out.push(Spanned {
                    tok: Tok::Ident(s),
                    line: l0,
                    col: c0,
                });
            }
            other => return Err(err_at(l0, c0, format!("unexpected character {other:?}"))),
        }
    }
    Ok(out)
}

/// Expression AST before default probabilities are filled in.
#[derive(Clone, Debug)]
enum RawRx {
    Const(String),
    Ref(String),
    Concat(Box<RawRx>, Box<RawRx>),
    Or(Box<RawRx>, Box<RawRx>, Option<Prob>),
    Star(Box<RawRx>, Option<Prob>),
    Skip(Box<RawRx>),
    Require(Box<RawRx>),
}

impl RawRx {
    fn strip(&self) -> Regex {
        match self {
            RawRx::Const(s) => Regex::Const(s.clone()),
            RawRx::Ref(n) => Regex::Ref(n.clone()),
            RawRx::Concat(a, b) => Regex::concat(a.strip(), b.strip()),
            RawRx::Or(a, b, _) => Regex::or(a.strip(), b.strip()),
            RawRx::Star(a, _) => Regex::star(a.strip()),
            RawRx::Skip(a) | RawRx::Require(a) => a.strip(),
        }
    }

    /// Fills unannotated operators with the default assignment: stars
    /// continue with 4/5, unions split by normal-form sequence counts.
    fn resolve(&self) -> Sre {
        match self {
            RawRx::Const(s) => Sre::Const(s.clone()),
            RawRx::Ref(n) => Sre::Ref(n.clone()),
            RawRx::Concat(a, b) => Sre::concat(a.resolve(), b.resolve()),
            RawRx::Star(a, p) => Sre::star(
                a.resolve(),
                p.clone().unwrap_or_else(|| Prob::from_ratio(4, 5)),
            ),
            RawRx::Or(a, b, p) => {
                let p = p.clone().unwrap_or_else(|| {
                    let ca = crate::sre::sequence_count(&a.strip());
                    let cb = crate::sre::sequence_count(&b.strip());
                    Prob::new(crate::rational::Rat::new(
                        (ca as i128).into(),
                        ((ca + cb) as i128).into(),
                    ))
                    .expect("positive counts")
                });
                Sre::or(a.resolve(), b.resolve(), p)
            }
            RawRx::Skip(a) => Sre::skip(a.resolve()),
            RawRx::Require(a) => Sre::require(a.resolve()),
        }
    }
}

/// One statement of a definition file.
#[derive(Clone, Debug)]
pub enum Statement {
    ExprDef {
        name: String,
        sre: Sre,
    },
    LensDef {
        name: String,
        src: Sre,
        tgt: Sre,
        body: LensBody,
        annotation: Option<CostAnnotation>,
    },
    Test {
        op: LensOp,
        lens: String,
        inputs: Vec<String>,
        expected: String,
        line: usize,
    },
}

#[derive(Clone, Debug)]
pub enum LensBody {
    Expr(Lens),
    Synth { examples: Vec<(String, String)> },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CostAnnotation {
    Bijective,
    Cost(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LensOp {
    CreateR,
    CreateL,
    PutR,
    PutL,
}

impl LensOp {
    pub fn arity(self) -> usize {
        match self {
            LensOp::CreateR | LensOp::CreateL => 1,
            LensOp::PutR | LensOp::PutL => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LensOp::CreateR => "createR",
            LensOp::CreateL => "createL",
            LensOp::PutR => "putR",
            LensOp::PutL => "putL",
        }
    }

    pub fn from_name(s: &str) -> Option<LensOp> {
        match s {
            "createR" => Some(LensOp::CreateR),
            "createL" => Some(LensOp::CreateL),
            "putR" => Some(LensOp::PutR),
            "putL" => Some(LensOp::PutL),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SpecFile {
    pub statements: Vec<Statement>,
}

const LENS_KEYWORDS: [&str; 12] = [
    "id",
    "disconnect",
    "ins",
    "del",
    "concat",
    "swap",
    "or",
    "merge_right",
    "merge_left",
    "compose",
    "iterate",
    "invert",
];

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    in_parens: usize,
}

impl Parser {
    fn new(toks: Vec<Spanned>) -> Parser {
        Parser {
            toks,
            pos: 0,
            in_parens: 0,
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|s| (s.line, s.col))
            .unwrap_or((1, 1))
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let (l, c) = self.here();
        match self.bump() {
            Some(t) if t == want => Ok(()),
            got => Err(err_at(l, c, format!("expected {what}, got {got:?}"))),
        }
    }

    fn expect_str(&mut self, what: &str) -> Result<String> {
        let (l, c) = self.here();
        match self.bump() {
            Some(Tok::Str(s)) => Ok(s),
            got => Err(err_at(l, c, format!("expected {what}, got {got:?}"))),
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<String> {
        let (l, c) = self.here();
        match self.bump() {
            Some(Tok::Ident(s)) => Ok(s),
            got => Err(err_at(l, c, format!("expected {what}, got {got:?}"))),
        }
    }

    fn parse_prob(&mut self) -> Result<Option<Prob>> {
        if let Some(Tok::ProbText(_)) = self.peek() {
            let (l, c) = self.here();
            if let Some(Tok::ProbText(s)) = self.bump() {
                let r =
                    parse_rat(&s).ok_or_else(|| err_at(l, c, format!("bad probability {s:?}")))?;
                let p = Prob::new(r).map_err(|m| err_at(l, c, m))?;
                if p.is_one() {
                    return Err(err_at(l, c, "probability must be strictly below 1"));
                }
                return Ok(Some(p));
            }
            unreachable!()
        }
        Ok(None)
    }

    // Expressions: union < concat < star.
    fn parse_rx(&mut self) -> Result<RawRx> {
        let mut left = self.parse_rx_concat()?;
        while self.peek() == Some(&Tok::Pipe) {
            self.bump();
            let p = self.parse_prob()?;
            let right = self.parse_rx_concat()?;
            left = RawRx::Or(Box::new(left), Box::new(right), p);
        }
        Ok(left)
    }

    fn starts_rx_atom(&self) -> bool {
        matches!(
            self.peek(),
            Some(Tok::Str(_)) | Some(Tok::LParen) | Some(Tok::Ident(_))
        )
    }

    fn parse_rx_concat(&mut self) -> Result<RawRx> {
        let mut left = self.parse_rx_post()?;
        loop {
            if self.peek() == Some(&Tok::Dot) {
                self.bump();
                let right = self.parse_rx_post()?;
                left = RawRx::Concat(Box::new(left), Box::new(right));
            } else if self.starts_rx_atom() {
                let right = self.parse_rx_post()?;
                left = RawRx::Concat(Box::new(left), Box::new(right));
            } else {
                break;
            }
        }
        Ok(left)
    }

    fn parse_rx_post(&mut self) -> Result<RawRx> {
        let mut inner = self.parse_rx_prim()?;
        while self.peek() == Some(&Tok::Star) {
            self.bump();
            let p = self.parse_prob()?;
            inner = RawRx::Star(Box::new(inner), p);
        }
        Ok(inner)
    }

    fn parse_rx_prim(&mut self) -> Result<RawRx> {
        let (l, c) = self.here();
        match self.bump() {
            Some(Tok::Str(s)) => Ok(RawRx::Const(s)),
            Some(Tok::LParen) => {
                let inner = self.parse_rx()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) if name == "skip" || name == "require" => {
                self.expect(Tok::LParen, "`(`")?;
                let inner = self.parse_rx()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(if name == "skip" {
                    RawRx::Skip(Box::new(inner))
                } else {
                    RawRx::Require(Box::new(inner))
                })
            }
            Some(Tok::Ident(name)) => Ok(RawRx::Ref(name)),
            got => Err(err_at(l, c, format!("expected an expression, got {got:?}"))),
        }
    }

    // Lenses. Infix `;` (compose) binds only inside parentheses so the
    // statement terminator stays unambiguous; infix `.` is concatenation.
    fn parse_lens(&mut self) -> Result<Lens> {
        let mut left = self.parse_lens_concat()?;
        while self.in_parens > 0 && self.peek() == Some(&Tok::Semi) {
            self.bump();
            let right = self.parse_lens_concat()?;
            left = Lens::compose(left, right);
        }
        Ok(left)
    }

    fn parse_lens_concat(&mut self) -> Result<Lens> {
        let mut left = self.parse_lens_atom()?;
        while self.peek() == Some(&Tok::Dot) {
            self.bump();
            let right = self.parse_lens_atom()?;
            left = Lens::concat(left, right);
        }
        Ok(left)
    }

    fn parse_lens_atom(&mut self) -> Result<Lens> {
        let (l, c) = self.here();
        match self.bump() {
            Some(Tok::LParen) => {
                self.in_parens += 1;
                let inner = self.parse_lens()?;
                self.in_parens -= 1;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) if LENS_KEYWORDS.contains(&name.as_str()) => {
                self.expect(Tok::LParen, "`(`")?;
                let lens = match name.as_str() {
                    "id" => {
                        let r = self.parse_rx()?;
                        Lens::Identity(r.resolve().strip())
                    }
                    "disconnect" => {
                        let rs = self.parse_rx()?;
                        self.expect(Tok::Comma, "`,`")?;
                        let rt = self.parse_rx()?;
                        self.expect(Tok::Comma, "`,`")?;
                        let ds = self.expect_str("a default string")?;
                        self.expect(Tok::Comma, "`,`")?;
                        let dt = self.expect_str("a default string")?;
                        Lens::Disconnect(rs.resolve().strip(), rt.resolve().strip(), ds, dt)
                    }
                    "ins" => Lens::ins(&self.expect_str("a string")?),
                    "del" => Lens::del(&self.expect_str("a string")?),
                    "iterate" => {
                        self.in_parens += 1;
                        let inner = self.parse_lens()?;
                        self.in_parens -= 1;
                        Lens::iterate(inner)
                    }
                    "invert" => {
                        self.in_parens += 1;
                        let inner = self.parse_lens()?;
                        self.in_parens -= 1;
                        Lens::invert(inner)
                    }
                    two => {
                        self.in_parens += 1;
                        let a = self.parse_lens()?;
                        self.expect(Tok::Comma, "`,`")?;
                        let b = self.parse_lens()?;
                        self.in_parens -= 1;
                        match two {
                            "concat" => Lens::concat(a, b),
                            "swap" => Lens::swap(a, b),
                            "or" => Lens::or(a, b),
                            "merge_right" => Lens::merge_right(a, b),
                            "merge_left" => Lens::merge_left(a, b),
                            "compose" => Lens::compose(a, b),
                            other => return Err(err_at(l, c, format!("unknown lens `{other}`"))),
                        }
                    }
                };
                self.expect(Tok::RParen, "`)`")?;
                Ok(lens)
            }
            Some(Tok::Ident(name)) => Ok(Lens::LibRef(name)),
            got => Err(err_at(l, c, format!("expected a lens, got {got:?}"))),
        }
    }

    fn parse_statement(&mut self) -> Result<Statement> {
        let (l, c) = self.here();
        let kw = self.expect_ident("`let` or `test`")?;
        match kw.as_str() {
            "let" => {
                let name = self.expect_ident("a name")?;
                if self.peek() == Some(&Tok::Colon) {
                    self.bump();
                    let src = self.parse_rx()?;
                    self.expect(Tok::Arrow, "`<=>`")?;
                    let tgt = self.parse_rx()?;
                    self.expect(Tok::Eq, "`=`")?;
                    let (body, annotation) = self.parse_lens_body()?;
                    self.expect(Tok::Semi, "`;`")?;
                    Ok(Statement::LensDef {
                        name,
                        src: src.resolve(),
                        tgt: tgt.resolve(),
                        body,
                        annotation,
                    })
                } else {
                    self.expect(Tok::Eq, "`=`")?;
                    let rx = self.parse_rx()?;
                    self.expect(Tok::Semi, "`;`")?;
                    Ok(Statement::ExprDef {
                        name,
                        sre: rx.resolve(),
                    })
                }
            }
            "test" => {
                let opname = self.expect_ident("an operation")?;
                let op = LensOp::from_name(&opname)
                    .ok_or_else(|| err_at(l, c, format!("unknown operation `{opname}`")))?;
                let lens = self.expect_ident("a lens name")?;
                let mut inputs = Vec::new();
                for _ in 0..op.arity() {
                    inputs.push(self.expect_str("an input string")?);
                }
                self.expect(Tok::Eq, "`=`")?;
                let expected = self.expect_str("the expected string")?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(Statement::Test {
                    op,
                    lens,
                    inputs,
                    expected,
                    line: l,
                })
            }
            other => Err(err_at(
                l,
                c,
                format!("expected `let` or `test`, got `{other}`"),
            )),
        }
    }

    fn parse_lens_body(&mut self) -> Result<(LensBody, Option<CostAnnotation>)> {
        if self.peek() == Some(&Tok::Ident("synth".into())) {
            self.bump();
            let mut examples = Vec::new();
            if self.peek() == Some(&Tok::Ident("using".into())) {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                loop {
                    match self.peek() {
                        Some(Tok::RParen) => {
                            self.bump();
                            break;
                        }
                        Some(Tok::LParen) => {
                            self.bump();
                            let left = self.expect_str("an example string")?;
                            self.expect(Tok::Comma, "`,`")?;
                            let right = self.expect_str("an example string")?;
                            self.expect(Tok::RParen, "`)`")?;
                            examples.push((left, right));
                            if self.peek() == Some(&Tok::Comma) {
                                self.bump();
                            }
                        }
                        _ => {
                            let (l, c) = self.here();
                            return Err(err_at(l, c, "expected `(\"left\", \"right\")`"));
                        }
                    }
                }
            }
            return Ok((LensBody::Synth { examples }, None));
        }
        let lens = self.parse_lens()?;
        let annotation = match self.peek() {
            Some(Tok::Ident(n)) if n == "bijective" => {
                self.bump();
                Some(CostAnnotation::Bijective)
            }
            Some(Tok::Ident(n)) if n == "cost" => {
                self.bump();
                let (l, c) = self.here();
                match self.bump() {
                    Some(Tok::ProbText(s)) | Some(Tok::Str(s)) => {
                        let v: f64 = s
                            .parse()
                            .map_err(|_| err_at(l, c, format!("bad cost {s:?}")))?;
                        Some(CostAnnotation::Cost(v))
                    }
                    got => return Err(err_at(l, c, format!("expected a cost, got {got:?}"))),
                }
            }
            _ => None,
        };
        Ok((LensBody::Expr(lens), annotation))
    }
}

/// Parses a whole definition file.
pub fn parse_spec_file(text: &str) -> Result<SpecFile> {
    let toks = lex(text)?;
    let mut p = Parser::new(toks);
    let mut statements = Vec::new();
    while p.peek().is_some() {
        statements.push(p.parse_statement()?);
    }
    Ok(SpecFile { statements })
}

/// Parses a single expression (with optional stochastic annotations).
pub fn parse_sre(text: &str) -> Result<Sre> {
    let toks = lex(text)?;
    let mut p = Parser::new(toks);
    let rx = p.parse_rx()?;
    if p.peek().is_some() {
        let (l, c) = p.here();
        return Err(err_at(l, c, "trailing input after expression"));
    }
    Ok(rx.resolve())
}

/// Parses a single plain regular expression.
pub fn parse_regex(text: &str) -> Result<Regex> {
    Ok(parse_sre(text)?.strip())
}

/// Parses a single lens expression.
pub fn parse_lens(text: &str) -> Result<Lens> {
    let toks = lex(text)?;
    let mut p = Parser::new(toks);
    let l = p.parse_lens()?;
    if p.peek().is_some() {
        let (l0, c0) = p.here();
        return Err(err_at(l0, c0, "trailing input after lens"));
    }
    Ok(l)
}

/// Prints a lens in the concrete syntax; parses back to the same lens.
pub fn print_lens(l: &Lens) -> String {
    match l {
        Lens::Identity(r) => format!("id({r})"),
        Lens::Disconnect(rs, rt, ds, dt) => {
            if *rs == Regex::lit("") && rt == &Regex::Const(dt.clone()) && ds.is_empty() {
                format!("ins({})", quote(dt))
            } else if *rt == Regex::lit("") && rs == &Regex::Const(ds.clone()) && dt.is_empty() {
                format!("del({})", quote(ds))
            } else {
                format!("disconnect({rs}, {rt}, {}, {})", quote(ds), quote(dt))
            }
        }
        Lens::Concat(a, b) => format!("({} . {})", print_lens(a), print_lens(b)),
        Lens::Swap(a, b) => format!("swap({}, {})", print_lens(a), print_lens(b)),
        Lens::Or(a, b) => format!("or({}, {})", print_lens(a), print_lens(b)),
        Lens::MergeRight(a, b) => format!("merge_right({}, {})", print_lens(a), print_lens(b)),
        Lens::MergeLeft(a, b) => format!("merge_left({}, {})", print_lens(a), print_lens(b)),
        Lens::Compose(a, b) => format!("compose({}, {})", print_lens(a), print_lens(b)),
        Lens::Iterate(a) => format!("iterate({})", print_lens(a)),
        Lens::Invert(a) => format!("invert({})", print_lens(a)),
        Lens::LibRef(n) => n.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_plain_regex() {
        let r = parse_regex(r#""a" | "b" "c""#).unwrap();
        assert_eq!(
            r,
            Regex::or(
                Regex::lit("a"),
                Regex::concat(Regex::lit("b"), Regex::lit("c"))
            )
        );
        let star = parse_regex(r#"("x")*"#).unwrap();
        assert_eq!(star, Regex::star(Regex::lit("x")));
    }

    #[test]
    fn parse_annotated_sre() {
        let s = parse_sre(r#""a" |{1/3} "b""#).unwrap();
        assert_eq!(
            s,
            Sre::or(Sre::lit("a"), Sre::lit("b"), Prob::from_ratio(1, 3))
        );
        let star = parse_sre(r#""a"*{0.8}"#).unwrap();
        assert_eq!(star, Sre::star(Sre::lit("a"), Prob::from_ratio(4, 5)));
        // Defaults: stars get 4/5, unions get sequence-count splits.
        let d = parse_sre(r#"("a" | "b") | "c""#).unwrap();
        match d {
            Sre::Or(_, _, p) => assert_eq!(p, Prob::from_ratio(2, 3)),
            _ => panic!(),
        }
        let sk = parse_sre(r#"skip("a" | "b")"#).unwrap();
        assert!(matches!(sk, Sre::Skip(_)));
    }

    #[test]
    fn parse_escapes() {
        let s = parse_sre(r#""line\n\ttab\"q\\""#).unwrap();
        assert_eq!(s, Sre::lit("line\n\ttab\"q\\"));
    }

    #[test]
    fn lens_round_trip() {
        let texts = [
            r#"id("a")"#,
            r#"disconnect("a" | "b", "x", "a", "x")"#,
            r#"ins("t")"#,
            r#"del("s")"#,
            r#"(id("a") . ins(","))"#,
            r#"or(id("a"), id("b"))"#,
            r#"merge_right(id("a"), del("b"))"#,
            r#"iterate(id("x"))"#,
            r#"invert(ins("q"))"#,
            r#"compose(id("a"), id("a"))"#,
        ];
        for t in texts {
            let l = parse_lens(t).unwrap();
            let printed = print_lens(&l);
            let l2 = parse_lens(&printed).unwrap();
            assert_eq!(l, l2, "round trip through {printed}");
        }
        // Infix compose inside parentheses.
        let c = parse_lens(r#"(id("a") ; id("a"))"#).unwrap();
        assert!(matches!(c, Lens::Compose(..)));
    }

    #[test]
    fn parse_file() {
        let text = r#"
            # definitions
            let name = "A" ("a" | "b")* ;
            let d : name <=> name = id(name) ;
            let s : name <=> name = synth using ( ("Aa", "Aa") ) ;
            test putR d "Aa" "Ab" = "Aa" ;
        "#;
        let f = parse_spec_file(text).unwrap();
        assert_eq!(f.statements.len(), 4);
        match &f.statements[2] {
            Statement::LensDef {
                body: LensBody::Synth { examples },
                ..
            } => assert_eq!(examples.len(), 1),
            other => panic!("{other:?}"),
        }
        match &f.statements[3] {
            Statement::Test { op, inputs, .. } => {
                assert_eq!(*op, LensOp::PutR);
                assert_eq!(inputs.len(), 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn error_positions() {
        let err = parse_spec_file("let x = \"a\" ").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("1:"), "{msg}");
    }
}
