//! Reader for Prolog-style clause text.
//!
//! Supports `:-`, comma conjunction, `;` disjunction, `[ ]` lists with `|`
//! tails, quoted atoms, the usual comparison and arithmetic operators, and
//! `%` / `#` line comments plus `/* */` block comments.

use std::sync::Arc;

use crate::error::LogicError;
use crate::term::{Number, Term, Var, HOST_FUNCTOR};
use crate::Clause;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Atom(String),
    /// Quoted atoms never act as operators.
    Quoted(String),
    Var(String),
    Int(i64),
    Float(f64),
    Open,
    /// `(` directly after an atom: functional notation.
    OpenCall,
    Close,
    OpenList,
    CloseList,
    Bar,
    Comma,
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOL_CHARS: &str = "+-*/\\^<>=~:.?@&$";

fn lex(src: &str) -> Result<Vec<Token>, LogicError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    let err = |line, col, msg: &str| LogicError::Parse { line, col, message: msg.to_string() };

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '%' || c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(err(tl, tc, "unterminated block comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: tl, col: tc });
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            let mut is_float = false;
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                is_float = true;
                bump!();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump!();
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    is_float = true;
                    while i < j {
                        bump!();
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        bump!();
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            if is_float {
                let x: f64 = text.parse().map_err(|_| err(tl, tc, "bad float"))?;
                push(&mut out, Tok::Float(x));
            } else {
                let n: i64 = text.parse().map_err(|_| err(tl, tc, "integer out of range"))?;
                push(&mut out, Tok::Int(n));
            }
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let text: String = chars[start..i].iter().collect();
            if c.is_uppercase() || c == '_' {
                push(&mut out, Tok::Var(text));
            } else {
                push(&mut out, Tok::Atom(text));
            }
            if i < chars.len() && chars[i] == '(' && !(c.is_uppercase() || c == '_') {
                let (l, cc) = (line, col);
                bump!();
                out.push(Token { tok: Tok::OpenCall, line: l, col: cc });
            }
            continue;
        }
        if c == '\'' || c == '"' {
            let quote = c;
            bump!();
            let mut text = String::new();
            loop {
                if i >= chars.len() {
                    return Err(err(tl, tc, "unterminated quoted atom"));
                }
                let d = chars[i];
                if d == quote {
                    if chars.get(i + 1) == Some(&quote) {
                        text.push(quote);
                        bump!();
                        bump!();
                        continue;
                    }
                    bump!();
                    break;
                }
                if d == '\\' {
                    bump!();
                    let e = *chars.get(i).ok_or_else(|| err(tl, tc, "dangling escape"))?;
                    text.push(match e {
                        'n' => '\n',
                        't' => '\t',
                        other => other,
                    });
                    bump!();
                    continue;
                }
                text.push(d);
                bump!();
            }
            push(&mut out, Tok::Quoted(text));
            if i < chars.len() && chars[i] == '(' {
                let (l, cc) = (line, col);
                bump!();
                out.push(Token { tok: Tok::OpenCall, line: l, col: cc });
            }
            continue;
        }
        match c {
            '(' => {
                bump!();
                push(&mut out, Tok::Open);
                continue;
            }
            ')' => {
                bump!();
                push(&mut out, Tok::Close);
                continue;
            }
            '[' => {
                bump!();
                if i < chars.len() && chars[i] == ']' {
                    bump!();
                    push(&mut out, Tok::Atom("[]".into()));
                    if i < chars.len() && chars[i] == '(' {
                        let (l, cc) = (line, col);
                        bump!();
                        out.push(Token { tok: Tok::OpenCall, line: l, col: cc });
                    }
                } else {
                    push(&mut out, Tok::OpenList);
                }
                continue;
            }
            ']' => {
                bump!();
                push(&mut out, Tok::CloseList);
                continue;
            }
            '|' => {
                bump!();
                push(&mut out, Tok::Bar);
                continue;
            }
            ',' => {
                bump!();
                push(&mut out, Tok::Comma);
                continue;
            }
            ';' | '!' => {
                bump!();
                push(&mut out, Tok::Atom(c.to_string()));
                if i < chars.len() && chars[i] == '(' {
                    let (l, cc) = (line, col);
                    bump!();
                    out.push(Token { tok: Tok::OpenCall, line: l, col: cc });
                }
                continue;
            }
            _ => {}
        }
        if c == '.' {
            let next = chars.get(i + 1).copied();
            if next.is_none() || next.map(|n| n.is_whitespace() || n == '%' || n == '#').unwrap_or(false) {
                bump!();
                push(&mut out, Tok::End);
                continue;
            }
        }
        if SYMBOL_CHARS.contains(c) {
            let start = i;
            while i < chars.len() && SYMBOL_CHARS.contains(chars[i]) {
                // a '.' followed by layout terminates the clause
                if chars[i] == '.' {
                    let next = chars.get(i + 1).copied();
                    if next.is_none() || next.map(|n| n.is_whitespace() || n == '%').unwrap_or(false) {
                        break;
                    }
                }
                bump!();
            }
            let text: String = chars[start..i].iter().collect();
            push(&mut out, Tok::Atom(text));
            if i < chars.len() && chars[i] == '(' {
                let (l, cc) = (line, col);
                bump!();
                out.push(Token { tok: Tok::OpenCall, line: l, col: cc });
            }
            continue;
        }
        return Err(err(tl, tc, &format!("unexpected character {c:?}")));
    }
    Ok(out)
}

#[derive(Clone, Copy)]
enum Assoc {
    Xfx,
    Xfy,
    Yfx,
}

fn infix_op(name: &str) -> Option<(u32, Assoc)> {
    Some(match name {
        ":-" => (1200, Assoc::Xfx),
        ";" => (1100, Assoc::Xfy),
        "->" => (1050, Assoc::Xfy),
        "," => (1000, Assoc::Xfy),
        "=" | "\\=" | "==" | "\\==" | "<" | ">" | "=<" | ">=" | "=:=" | "=\\=" | "is" | "@<" | "@>" | "@=<" | "@>=" => (700, Assoc::Xfx),
        "+" | "-" => (500, Assoc::Yfx),
        "*" | "/" | "//" | "mod" => (400, Assoc::Yfx),
        _ => return None,
    })
}

fn prefix_op(name: &str) -> Option<u32> {
    match name {
        "\\+" => Some(900),
        "-" => Some(200),
        _ => None,
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    anon: usize,
    eof_line: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn error(&self, message: impl Into<String>) -> LogicError {
        let (line, col) = self.toks.get(self.pos).map(|t| (t.line, t.col)).unwrap_or((self.eof_line, 0));
        LogicError::Parse { line, col, message: message.into() }
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), LogicError> {
        match self.peek() {
            Some(t) if *t == want => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    fn starts_term(&self) -> bool {
        match self.peek() {
            Some(Tok::Atom(a)) => infix_op(a).is_none() || prefix_op(a).is_some(),
            Some(Tok::Quoted(_) | Tok::Var(_) | Tok::Int(_) | Tok::Float(_)) => true,
            Some(Tok::Open | Tok::OpenList) => true,
            _ => false,
        }
    }

    fn parse(&mut self, max: u32) -> Result<Term, LogicError> {
        let (mut left, mut left_prec) = self.primary(max)?;
        loop {
            let name = match self.peek() {
                Some(Tok::Atom(a)) => a.clone(),
                Some(Tok::Comma) => ",".to_string(),
                _ => break,
            };
            let Some((prec, assoc)) = infix_op(&name) else { break };
            if prec > max {
                break;
            }
            let (left_max, right_max) = match assoc {
                Assoc::Xfx => (prec - 1, prec - 1),
                Assoc::Xfy => (prec - 1, prec),
                Assoc::Yfx => (prec, prec - 1),
            };
            if left_prec > left_max {
                break;
            }
            self.pos += 1;
            let right = self.parse(right_max)?;
            left = Term::compound(name.as_str(), vec![left, right]);
            left_prec = prec;
        }
        Ok(left)
    }

    fn arg_list(&mut self) -> Result<Vec<Term>, LogicError> {
        let mut args = vec![self.parse(999)?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            args.push(self.parse(999)?);
        }
        self.expect(Tok::Close, "')'")?;
        Ok(args)
    }

    fn primary(&mut self, max: u32) -> Result<(Term, u32), LogicError> {
        let tok = self.next().ok_or_else(|| self.error("unexpected end of input"))?;
        match tok {
            Tok::Int(n) => Ok((Term::int(n), 0)),
            Tok::Float(x) => Ok((Term::float(x), 0)),
            Tok::Var(name) => {
                if name == "_" {
                    self.anon += 1;
                    Ok((Term::Var(Var::new(format!("_{}", self.anon))), 0))
                } else {
                    Ok((Term::Var(Var::new(name)), 0))
                }
            }
            Tok::Open => {
                let t = self.parse(1200)?;
                self.expect(Tok::Close, "')'")?;
                Ok((t, 0))
            }
            Tok::OpenList => {
                let mut items = vec![self.parse(999)?];
                while self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                    items.push(self.parse(999)?);
                }
                let tail = if self.peek() == Some(&Tok::Bar) {
                    self.pos += 1;
                    self.parse(999)?
                } else {
                    Term::nil()
                };
                self.expect(Tok::CloseList, "']'")?;
                Ok((Term::list_with_tail(items, tail), 0))
            }
            Tok::Quoted(name) => {
                if self.peek() == Some(&Tok::OpenCall) {
                    self.pos += 1;
                    let args = self.arg_list()?;
                    return Ok((make_compound(&name, args), 0));
                }
                Ok((Term::atom(name), 0))
            }
            Tok::Atom(name) => {
                if self.peek() == Some(&Tok::OpenCall) {
                    self.pos += 1;
                    let args = self.arg_list()?;
                    return Ok((make_compound(&name, args), 0));
                }
                if name == "-" {
                    match self.peek() {
                        Some(Tok::Int(n)) => {
                            let n = *n;
                            self.pos += 1;
                            return Ok((Term::int(-n), 0));
                        }
                        Some(Tok::Float(x)) => {
                            let x = *x;
                            self.pos += 1;
                            return Ok((Term::float(-x), 0));
                        }
                        _ => {}
                    }
                }
                if let Some(prec) = prefix_op(&name) {
                    if self.starts_term() {
                        let prec = prec.min(max);
                        let arg = self.parse(prec)?;
                        return Ok((Term::compound(name.as_str(), vec![arg]), prec));
                    }
                }
                let prec = if infix_op(&name).is_some() || prefix_op(&name).is_some() { 1201.min(max) } else { 0 };
                Ok((Term::atom(name), prec))
            }
            Tok::OpenCall => Err(self.error("unexpected '('")),
            Tok::Close => Err(self.error("unexpected ')'")),
            Tok::CloseList => Err(self.error("unexpected ']'")),
            Tok::Bar => Err(self.error("unexpected '|'")),
            Tok::Comma => Err(self.error("unexpected ','")),
            Tok::End => Err(self.error("unexpected end of clause")),
        }
    }
}

fn make_compound(name: &str, args: Vec<Term>) -> Term {
    if name == HOST_FUNCTOR && args.len() == 2 {
        if let (Term::Number(Number::Int(id)), Term::Atom(tag)) = (&args[0], &args[1]) {
            if *id >= 0 {
                return Term::Host(crate::HostValue { id: *id as u64, tag: Arc::clone(tag) });
            }
        }
    }
    Term::compound(name, args)
}

fn parser(src: &str) -> Result<Parser, LogicError> {
    Ok(Parser { toks: lex(src)?, pos: 0, anon: 0, eof_line: src.lines().count().max(1) })
}

/// Parses a single term. A trailing `.` is optional.
pub fn parse_term(src: &str) -> Result<Term, LogicError> {
    let mut p = parser(src)?;
    let t = p.parse(1200)?;
    if p.peek() == Some(&Tok::End) {
        p.pos += 1;
    }
    if p.pos < p.toks.len() {
        return Err(p.error("trailing input after term"));
    }
    Ok(t)
}

/// Parses a conjunctive query such as `a(X), b(X)` into its goal list.
pub fn parse_query(src: &str) -> Result<Vec<Term>, LogicError> {
    Ok(flatten_conjunction(parse_term(src)?))
}

pub(crate) fn flatten_conjunction(t: Term) -> Vec<Term> {
    let mut out = Vec::new();
    let mut cur = t;
    loop {
        match cur {
            Term::Compound(f, mut args) if &*f == "," && args.len() == 2 => {
                let right = args.pop().unwrap();
                let left = args.pop().unwrap();
                out.extend(flatten_conjunction(left));
                cur = right;
            }
            other => {
                out.push(other);
                return out;
            }
        }
    }
}

/// Parses a sequence of clauses terminated by `.`.
pub fn parse_clauses(src: &str) -> Result<Vec<Clause>, LogicError> {
    let mut p = parser(src)?;
    let mut out = Vec::new();
    while p.pos < p.toks.len() {
        p.anon = 0;
        let t = p.parse(1200)?;
        p.expect(Tok::End, "'.' at end of clause")?;
        let clause = match t {
            Term::Compound(f, mut args) if &*f == ":-" && args.len() == 2 => {
                let body = args.pop().unwrap();
                let head = args.pop().unwrap();
                Clause::new(head, flatten_conjunction(body))
            }
            Term::Compound(f, _) if &*f == ":-" => {
                return Err(p.error("directives are not supported"));
            }
            head => Clause::new(head, Vec::new()),
        };
        out.push(clause.map_err(|e| match e {
            LogicError::InvalidClause(m) => p.error(m),
            other => other,
        })?);
    }
    Ok(out)
}

/// Parses a single clause.
pub fn parse_clause(src: &str) -> Result<Clause, LogicError> {
    let trimmed = src.trim_end();
    let text = if trimmed.ends_with('.') { trimmed.to_string() } else { format!("{trimmed}.") };
    let mut clauses = parse_clauses(&text)?;
    if clauses.len() != 1 {
        return Err(LogicError::Parse { line: 1, col: 1, message: "expected exactly one clause".into() });
    }
    Ok(clauses.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operators_and_lists() {
        let t = parse_term("X is Y + 2 * 3").unwrap();
        assert_eq!(t.to_string(), "is(X,'+'(Y,'*'(2,3)))");
        let t = parse_term("A - B - C").unwrap();
        assert_eq!(t.to_string(), "'-'('-'(A,B),C)");
        let t = parse_term("[1,2|T]").unwrap();
        assert_eq!(t.to_string(), "[1,2|T]");
        let t = parse_term("f(-3, - X)").unwrap();
        assert_eq!(t.to_string(), "f(-3,'-'(X))");
        let t = parse_term("\\+ a, b").unwrap();
        assert_eq!(t.to_string(), "','('\\\\+'(a),b)");
    }

    #[test]
    fn situation_clause_with_hash_comments() {
        let src = "situation(boxInFront,Box) :-\n  location(box(Box),X,Y), #Box is at X, Y\n  newInstance('java.awt.Point',[X,Y],Front), #Front=(X,Y)\n  baseObject(Base), #Base is the base object(Forklift)\n  send(Base,nextLocation,[],Front).\n";
        let cs = parse_clauses(src).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].body.len(), 4);
        assert_eq!(cs[0].head.to_string(), "situation(boxInFront,Box)");
        assert_eq!(cs[0].body[1].to_string(), "newInstance('java.awt.Point',[X,Y],Front)");
    }

    #[test]
    fn anonymous_variables_are_distinct() {
        let t = parse_term("f(_, _)").unwrap();
        assert_eq!(t.variables().len(), 2);
    }

    #[test]
    fn quoted_atoms_round_trip() {
        for src in ["'hello world'", "'it\\'s'", "'$host'(3,robot)", "'='(a,b)", "[]", "'[]'(x)"] {
            let t = parse_term(src).unwrap();
            assert_eq!(parse_term(&t.to_string()).unwrap(), t, "{src}");
        }
    }

    #[test]
    fn floats_and_exponents() {
        assert_eq!(parse_term("2.5").unwrap(), Term::float(2.5));
        assert_eq!(parse_term("1e-7").unwrap(), Term::float(1e-7));
        assert_eq!(parse_term("-0.5").unwrap(), Term::float(-0.5));
    }

    #[test]
    fn errors_carry_positions() {
        match parse_clauses("foo(a,\n  ]).") {
            Err(LogicError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(parse_clauses("foo(a)").is_err());
        assert!(parse_term("f(").is_err());
        assert!(parse_clauses("X :- a.").is_err());
    }

    #[test]
    fn block_and_percent_comments() {
        let cs = parse_clauses("% a comment\n/* block\n comment */ a. b :- a.").unwrap();
        assert_eq!(cs.len(), 2);
    }
}
