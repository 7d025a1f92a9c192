//! Deterministic built-in predicates, arithmetic, and the host bridge.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::LogicError;
use crate::subst::{unify, Substitution};
use crate::term::{Number, Term};

/// Connects the engine to host-side skill holders. Implemented by the agent
/// kernel; the engine itself never touches skills directly.
pub trait HostBridge {
    /// Invokes `selector` on `target` (a host handle or a registered name)
    /// and returns its result lifted to a term (`void` when it has none).
    fn send(&self, target: &Term, selector: &str, args: &[Term]) -> Result<Term, LogicError>;

    /// Handle of the owning agent's base object.
    fn base_object(&self) -> Option<Term>;
}

pub type ConstructorFn = Arc<dyn Fn(&[Term]) -> Result<Term, LogicError> + Send + Sync>;

/// Value-constructor registry used by `newInstance/3`.
#[derive(Clone)]
pub struct Constructors {
    table: BTreeMap<String, ConstructorFn>,
}

impl Default for Constructors {
    fn default() -> Self {
        let mut c = Constructors { table: BTreeMap::new() };
        let point: ConstructorFn = Arc::new(|args: &[Term]| match args {
            [x @ Term::Number(_), y @ Term::Number(_)] => Ok(Term::compound("point", vec![x.clone(), y.clone()])),
            [a, b] if a.is_var() || b.is_var() => Err(LogicError::Instantiation("point/2".into())),
            _ => Err(LogicError::Type { expected: "two numbers", found: format!("{}", Term::list(args.iter().cloned())) }),
        });
        c.table.insert("point".into(), point.clone());
        c.table.insert("java.awt.Point".into(), point);
        c
    }
}

impl Constructors {
    pub fn empty() -> Self {
        Constructors { table: BTreeMap::new() }
    }

    pub fn register(&mut self, tag: impl Into<String>, f: ConstructorFn) {
        self.table.insert(tag.into(), f);
    }

    pub fn construct(&self, tag: &str, args: &[Term]) -> Result<Term, LogicError> {
        let f = self.table.get(tag).ok_or_else(|| LogicError::UnknownConstructor(tag.to_string()))?;
        f(args)
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.table.contains_key(tag)
    }
}

impl std::fmt::Debug for Constructors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.table.keys()).finish()
    }
}

/// What a built-in sees besides its arguments.
pub struct CallContext<'a> {
    pub bridge: Option<&'a dyn HostBridge>,
    pub constructors: &'a Constructors,
}

/// A deterministic built-in: extends `subst` in place, returning whether
/// the call succeeded.
pub type BuiltinFn = Arc<dyn Fn(&[Term], &mut Substitution, &CallContext<'_>) -> Result<bool, LogicError> + Send + Sync>;

pub(crate) fn standard() -> BTreeMap<(String, usize), BuiltinFn> {
    let mut t: BTreeMap<(String, usize), BuiltinFn> = BTreeMap::new();
    let mut add = |name: &str, arity: usize, f: BuiltinFn| {
        t.insert((name.to_string(), arity), f);
    };

    add("=", 2, Arc::new(|a, s, _| Ok(s.unify_in_place(&a[0], &a[1]))));
    add("\\=", 2, Arc::new(|a, s, _| Ok(unify(&a[0], &a[1], s).is_none())));
    add("==", 2, Arc::new(|a, s, _| Ok(s.apply(&a[0]) == s.apply(&a[1]))));
    add("\\==", 2, Arc::new(|a, s, _| Ok(s.apply(&a[0]) != s.apply(&a[1]))));
    add(
        "is",
        2,
        Arc::new(|a, s, _| {
            let v = Term::Number(eval(&a[1], s)?);
            Ok(s.unify_in_place(&a[0], &v))
        }),
    );
    for op in ["<", ">", "=<", ">=", "=:=", "=\\="] {
        let op_name = op.to_string();
        add(
            op,
            2,
            Arc::new(move |a, s, _| {
                let x = eval(&a[0], s)?;
                let y = eval(&a[1], s)?;
                Ok(compare(&op_name, x, y))
            }),
        );
    }
    add("var", 1, Arc::new(|a, s, _| Ok(s.walk(&a[0]).is_var())));
    add("nonvar", 1, Arc::new(|a, s, _| Ok(!s.walk(&a[0]).is_var())));
    add("atom", 1, Arc::new(|a, s, _| Ok(matches!(s.walk(&a[0]), Term::Atom(_)))));
    add("number", 1, Arc::new(|a, s, _| Ok(matches!(s.walk(&a[0]), Term::Number(_)))));
    add("integer", 1, Arc::new(|a, s, _| Ok(matches!(s.walk(&a[0]), Term::Number(Number::Int(_))))));
    add("ground", 1, Arc::new(|a, s, _| Ok(s.apply(&a[0]).is_ground())));

    add(
        "send",
        4,
        Arc::new(|a, s, cx| {
            let bridge = cx.bridge.ok_or(LogicError::NoAgentContext)?;
            let target = s.apply(&a[0]);
            if target.is_var() {
                return Err(LogicError::Instantiation("send/4 target".into()));
            }
            let selector = atom_arg(&s.walk(&a[1]), "send/4 selector")?;
            let args = list_arg(&s.apply(&a[2]), "send/4 arguments")?;
            let result = bridge.send(&target, &selector, &args)?;
            Ok(s.unify_in_place(&a[3], &result))
        }),
    );
    add(
        "newInstance",
        3,
        Arc::new(|a, s, cx| {
            let tag = atom_arg(&s.walk(&a[0]), "newInstance/3 type")?;
            let args = list_arg(&s.apply(&a[1]), "newInstance/3 arguments")?;
            let value = cx.constructors.construct(&tag, &args)?;
            Ok(s.unify_in_place(&a[2], &value))
        }),
    );
    add(
        "baseObject",
        1,
        Arc::new(|a, s, cx| {
            let base = cx.bridge.and_then(|b| b.base_object()).ok_or(LogicError::NoAgentContext)?;
            Ok(s.unify_in_place(&a[0], &base))
        }),
    );
    t
}

fn atom_arg(t: &Term, what: &str) -> Result<String, LogicError> {
    match t {
        Term::Atom(a) => Ok(a.to_string()),
        Term::Var(_) => Err(LogicError::Instantiation(what.into())),
        other => Err(LogicError::Type { expected: "atom", found: other.to_string() }),
    }
}

fn list_arg(t: &Term, what: &str) -> Result<Vec<Term>, LogicError> {
    if t.is_var() {
        return Err(LogicError::Instantiation(what.into()));
    }
    t.as_list().ok_or_else(|| LogicError::Type { expected: "list", found: t.to_string() })
}

fn compare(op: &str, x: Number, y: Number) -> bool {
    use std::cmp::Ordering::*;
    let ord = match (x, y) {
        (Number::Int(a), Number::Int(b)) => a.cmp(&b),
        _ => x.as_f64().partial_cmp(&y.as_f64()).unwrap_or(Equal),
    };
    match op {
        "<" => ord == Less,
        ">" => ord == Greater,
        "=<" => ord != Greater,
        ">=" => ord != Less,
        "=:=" => ord == Equal,
        _ => ord != Equal,
    }
}

/// Evaluates an arithmetic expression under `s`.
pub fn eval(t: &Term, s: &Substitution) -> Result<Number, LogicError> {
    let t = s.walk(t);
    match &t {
        Term::Number(n) => Ok(*n),
        Term::Var(_) => Err(LogicError::Instantiation("arithmetic".into())),
        Term::Compound(f, args) if args.len() == 1 => {
            let x = eval(&args[0], s)?;
            match &**f {
                "-" => Ok(match x {
                    Number::Int(i) => Number::Int(i.checked_neg().ok_or_else(overflow)?),
                    Number::Float(v) => Number::Float(-v),
                }),
                "+" => Ok(x),
                "abs" => Ok(match x {
                    Number::Int(i) => Number::Int(i.checked_abs().ok_or_else(overflow)?),
                    Number::Float(v) => Number::Float(v.abs()),
                }),
                "sqrt" => Ok(Number::Float(x.as_f64().sqrt())),
                _ => Err(LogicError::Type { expected: "evaluable", found: t.to_string() }),
            }
        }
        Term::Compound(f, args) if args.len() == 2 => {
            let x = eval(&args[0], s)?;
            let y = eval(&args[1], s)?;
            binary(f, x, y).unwrap_or_else(|| Err(LogicError::Type { expected: "evaluable", found: t.to_string() }))
        }
        other => Err(LogicError::Type { expected: "evaluable", found: other.to_string() }),
    }
}

fn overflow() -> LogicError {
    LogicError::Arithmetic("integer overflow".into())
}

fn binary(op: &str, x: Number, y: Number) -> Option<Result<Number, LogicError>> {
    use Number::*;
    let int_op = |f: fn(i64, i64) -> Option<i64>| match (x, y) {
        (Int(a), Int(b)) => Some(f(a, b).map(Int).ok_or_else(overflow)),
        _ => None,
    };
    Some(match op {
        "+" => int_op(i64::checked_add).unwrap_or_else(|| Ok(Float(x.as_f64() + y.as_f64()))),
        "-" => int_op(i64::checked_sub).unwrap_or_else(|| Ok(Float(x.as_f64() - y.as_f64()))),
        "*" => int_op(i64::checked_mul).unwrap_or_else(|| Ok(Float(x.as_f64() * y.as_f64()))),
        "/" => match (x, y) {
            (_, Int(0)) => Err(LogicError::Arithmetic("division by zero".into())),
            (Int(a), Int(b)) if a % b == 0 => Ok(Int(a / b)),
            _ => Ok(Float(x.as_f64() / y.as_f64())),
        },
        "//" => match (x, y) {
            (Int(_), Int(0)) => Err(LogicError::Arithmetic("division by zero".into())),
            (Int(a), Int(b)) => a.checked_div(b).map(Int).ok_or_else(overflow),
            _ => Err(LogicError::Type { expected: "integer", found: format!("{x}, {y}") }),
        },
        "mod" => match (x, y) {
            (Int(_), Int(0)) => Err(LogicError::Arithmetic("division by zero".into())),
            (Int(a), Int(b)) => Ok(Int(a.rem_euclid(b))),
            _ => Err(LogicError::Type { expected: "integer", found: format!("{x}, {y}") }),
        },
        "min" => Ok(if compare("=<", x, y) { x } else { y }),
        "max" => Ok(if compare(">=", x, y) { x } else { y }),
        _ => return None,
    })
}
