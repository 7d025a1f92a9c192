//! Terms of the embedded logic language.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

/// Functor used for list cells, `'.'(Head, Tail)`.
pub const LIST_CONS: &str = ".";
/// The empty list atom.
pub const LIST_NIL: &str = "[]";
/// Atom bound by calls that produce no value.
pub const VOID: &str = "void";
/// Reserved functor used to print host handles in re-parseable form.
pub const HOST_FUNCTOR: &str = "$host";

/// A logic variable. Stored clauses use generation 0; each clause
/// activation during resolution renames its variables to a fresh generation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub name: Arc<str>,
    pub generation: u32,
}

impl Var {
    pub fn new(name: impl Into<Arc<str>>) -> Self {
        Var { name: name.into(), generation: 0 }
    }

    pub fn with_generation(&self, generation: u32) -> Self {
        Var { name: self.name.clone(), generation }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.generation == 0 {
            write!(f, "{}", self.name)
        } else {
            write!(f, "_G{}_{}", self.generation, self.name.trim_start_matches('_'))
        }
    }
}

/// Integer or floating point number. Floats compare by bit pattern so that
/// terms have total structural equality.
#[derive(Clone, Copy, Debug)]
pub enum Number {
    Int(i64),
    Float(f64),
}

impl Number {
    pub fn as_f64(self) -> f64 {
        match self {
            Number::Int(i) => i as f64,
            Number::Float(x) => x,
        }
    }
}

impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Number::Int(a), Number::Int(b)) => a == b,
            (Number::Float(a), Number::Float(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

impl Eq for Number {}

impl Hash for Number {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Number::Int(i) => {
                0u8.hash(state);
                i.hash(state)
            }
            Number::Float(x) => {
                1u8.hash(state);
                x.to_bits().hash(state)
            }
        }
    }
}

impl Ord for Number {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Number::Int(a), Number::Int(b)) => a.cmp(b),
            (Number::Float(a), Number::Float(b)) => a.total_cmp(b),
            (Number::Int(_), Number::Float(_)) => Ordering::Less,
            (Number::Float(_), Number::Int(_)) => Ordering::Greater,
        }
    }
}

impl PartialOrd for Number {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Int(i) => write!(f, "{i}"),
            Number::Float(x) => {
                let s = format!("{x:?}");
                f.write_str(&s)
            }
        }
    }
}

/// Opaque handle to a host-side object (a skill holder). Unifies only with
/// a handle of the same identity.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HostValue {
    pub id: u64,
    pub tag: Arc<str>,
}

impl HostValue {
    pub fn new(id: u64, tag: impl Into<Arc<str>>) -> Self {
        HostValue { id, tag: tag.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Var),
    Atom(Arc<str>),
    Number(Number),
    /// Functor and a non-empty argument list.
    Compound(Arc<str>, Vec<Term>),
    Host(HostValue),
}

impl Term {
    pub fn atom(name: impl Into<Arc<str>>) -> Term {
        Term::Atom(name.into())
    }

    pub fn var(name: impl Into<Arc<str>>) -> Term {
        Term::Var(Var::new(name))
    }

    pub fn int(i: i64) -> Term {
        Term::Number(Number::Int(i))
    }

    pub fn float(x: f64) -> Term {
        Term::Number(Number::Float(x))
    }

    /// Builds a compound; an empty argument list yields the atom.
    pub fn compound(functor: impl Into<Arc<str>>, args: Vec<Term>) -> Term {
        let functor = functor.into();
        if args.is_empty() {
            Term::Atom(functor)
        } else {
            Term::Compound(functor, args)
        }
    }

    pub fn void() -> Term {
        Term::atom(VOID)
    }

    pub fn nil() -> Term {
        Term::atom(LIST_NIL)
    }

    pub fn list(items: impl IntoIterator<Item = Term>) -> Term {
        Self::list_with_tail(items, Term::nil())
    }

    pub fn list_with_tail(items: impl IntoIterator<Item = Term>, tail: Term) -> Term {
        let items: Vec<Term> = items.into_iter().collect();
        items.into_iter().rev().fold(tail, |acc, item| Term::Compound(LIST_CONS.into(), vec![item, acc]))
    }

    /// Elements of a proper list, or `None` if the term is not one.
    pub fn as_list(&self) -> Option<Vec<Term>> {
        let mut out = Vec::new();
        let mut cur = self;
        loop {
            match cur {
                Term::Atom(a) if &**a == LIST_NIL => return Some(out),
                Term::Compound(f, args) if &**f == LIST_CONS && args.len() == 2 => {
                    out.push(args[0].clone());
                    cur = &args[1];
                }
                _ => return None,
            }
        }
    }

    /// Name and arity of a callable term.
    pub fn indicator(&self) -> Option<(&str, usize)> {
        match self {
            Term::Atom(a) => Some((a, 0)),
            Term::Compound(f, args) => Some((f, args.len())),
            _ => None,
        }
    }

    pub fn functor(&self) -> Option<&str> {
        self.indicator().map(|(f, _)| f)
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Compound(_, args) => args,
            _ => &[],
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Term::Atom(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Term::Number(Number::Int(i)) => Some(*i),
            _ => None,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn is_callable(&self) -> bool {
        matches!(self, Term::Atom(_) | Term::Compound(..))
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
            _ => true,
        }
    }

    /// Variables in order of first occurrence.
    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    pub(crate) fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::Compound(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            _ => {}
        }
    }

    pub fn contains_var(&self, var: &Var) -> bool {
        match self {
            Term::Var(v) => v == var,
            Term::Compound(_, args) => args.iter().any(|a| a.contains_var(var)),
            _ => false,
        }
    }

    /// Copy with every variable moved to `generation`.
    pub fn rename(&self, generation: u32) -> Term {
        match self {
            Term::Var(v) => Term::Var(v.with_generation(generation)),
            Term::Compound(f, args) => Term::Compound(f.clone(), args.iter().map(|a| a.rename(generation)).collect()),
            other => other.clone(),
        }
    }
}

impl From<HostValue> for Term {
    fn from(h: HostValue) -> Self {
        Term::Host(h)
    }
}

impl From<i64> for Term {
    fn from(i: i64) -> Self {
        Term::int(i)
    }
}

/// True when `name` can be printed without quotes.
pub fn atom_is_plain(name: &str) -> bool {
    if name == LIST_NIL {
        return true;
    }
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub(crate) fn write_atom(f: &mut fmt::Formatter<'_>, name: &str) -> fmt::Result {
    if atom_is_plain(name) {
        return f.write_str(name);
    }
    f.write_str("'")?;
    for c in name.chars() {
        match c {
            '\'' => f.write_str("\\'")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("'")
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Atom(a) => write_atom(f, a),
            Term::Number(n) => write!(f, "{n}"),
            Term::Host(h) => {
                write_atom(f, HOST_FUNCTOR)?;
                write!(f, "({},", h.id)?;
                write_atom(f, &h.tag)?;
                f.write_str(")")
            }
            Term::Compound(functor, args) if &**functor == LIST_CONS && args.len() == 2 => {
                f.write_str("[")?;
                write!(f, "{}", args[0])?;
                let mut tail = &args[1];
                loop {
                    match tail {
                        Term::Compound(g, rest) if &**g == LIST_CONS && rest.len() == 2 => {
                            write!(f, ",{}", rest[0])?;
                            tail = &rest[1];
                        }
                        Term::Atom(a) if &**a == LIST_NIL => break,
                        other => {
                            write!(f, "|{other}")?;
                            break;
                        }
                    }
                }
                f.write_str("]")
            }
            Term::Compound(functor, args) => {
                write_atom(f, functor)?;
                f.write_str("(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compound_with_no_args_is_atom() {
        assert_eq!(Term::compound("a", vec![]), Term::atom("a"));
    }

    #[test]
    fn list_display_and_decompose() {
        let l = Term::list([Term::int(1), Term::int(2), Term::int(3)]);
        assert_eq!(l.to_string(), "[1,2,3]");
        assert_eq!(l.as_list().unwrap().len(), 3);
        let partial = Term::list_with_tail([Term::int(1)], Term::var("T"));
        assert_eq!(partial.to_string(), "[1|T]");
        assert!(partial.as_list().is_none());
    }

    #[test]
    fn quoting() {
        assert_eq!(Term::atom("java.awt.Point").to_string(), "'java.awt.Point'");
        assert_eq!(Term::atom("boxInFront").to_string(), "boxInFront");
        assert_eq!(Term::atom("it's").to_string(), "'it\\'s'");
        assert_eq!(Term::compound("=", vec![Term::var("X"), Term::int(1)]).to_string(), "'='(X,1)");
    }

    #[test]
    fn floats_keep_a_decimal_point() {
        assert_eq!(Term::float(2.0).to_string(), "2.0");
        assert_eq!(Term::int(-3).to_string(), "-3");
    }

    #[test]
    fn host_values_compare_by_identity() {
        let a = Term::Host(HostValue::new(7, "forklift"));
        let b = Term::Host(HostValue::new(7, "forklift"));
        let c = Term::Host(HostValue::new(8, "forklift"));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.to_string(), "'$host'(7,forklift)");
    }
}
