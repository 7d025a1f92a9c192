//! Substitutions and unification (occurs-check on).

use std::collections::BTreeMap;
use std::fmt;

use crate::term::{Term, Var};

/// Variable bindings in triangular form. [`Substitution::apply`] resolves
/// chains completely, so applying twice equals applying once.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Substitution {
    bindings: BTreeMap<Var, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Term)> {
        self.bindings.iter()
    }

    pub fn lookup(&self, var: &Var) -> Option<&Term> {
        self.bindings.get(var)
    }

    /// Fully resolved value of the generation-0 variable `name`.
    pub fn get(&self, name: &str) -> Option<Term> {
        let var = Var::new(name);
        self.bindings.get(&var).map(|t| self.apply(t))
    }

    /// Follows variable chains at the top level only.
    pub fn walk(&self, term: &Term) -> Term {
        let mut cur = term;
        while let Term::Var(v) = cur {
            match self.bindings.get(v) {
                Some(next) => cur = next,
                None => break,
            }
        }
        cur.clone()
    }

    /// Deep application.
    pub fn apply(&self, term: &Term) -> Term {
        match term {
            Term::Var(v) => match self.bindings.get(v) {
                Some(t) => self.apply(t),
                None => term.clone(),
            },
            Term::Compound(f, args) => Term::Compound(f.clone(), args.iter().map(|a| self.apply(a)).collect()),
            other => other.clone(),
        }
    }

    /// Binds `var` to `term`, refusing cyclic bindings.
    pub fn bind(&mut self, var: Var, term: Term) -> bool {
        let resolved = self.apply(&term);
        if resolved.contains_var(&var) {
            return match resolved {
                Term::Var(ref v) => v == &var,
                _ => false,
            };
        }
        self.bindings.insert(var, term);
        true
    }

    /// Unifies in place. On failure the substitution may hold partial
    /// bindings; callers unify into a clone.
    pub fn unify_in_place(&mut self, a: &Term, b: &Term) -> bool {
        let a = self.walk(a);
        let b = self.walk(b);
        match (&a, &b) {
            (Term::Var(x), Term::Var(y)) => {
                if x == y {
                    return true;
                }
                // orient var-var bindings so the result does not depend on argument order
                if x > y {
                    self.bind(x.clone(), b.clone())
                } else {
                    self.bind(y.clone(), a.clone())
                }
            }
            (Term::Var(x), _) => self.bind(x.clone(), b.clone()),
            (_, Term::Var(y)) => self.bind(y.clone(), a.clone()),
            (Term::Atom(x), Term::Atom(y)) => x == y,
            (Term::Number(x), Term::Number(y)) => x == y,
            (Term::Host(x), Term::Host(y)) => x.id == y.id,
            (Term::Compound(f, xs), Term::Compound(g, ys)) => {
                f == g && xs.len() == ys.len() && xs.iter().zip(ys.iter()).all(|(x, y)| self.unify_in_place(x, y))
            }
            _ => false,
        }
    }

    /// Keeps only `vars`, each bound to its fully resolved value.
    pub fn restrict(&self, vars: &[Var]) -> Substitution {
        let mut out = Substitution::new();
        for v in vars {
            let value = self.apply(&Term::Var(v.clone()));
            if value != Term::Var(v.clone()) {
                out.bindings.insert(v.clone(), value);
            }
        }
        out
    }

    /// Extends with the bindings of `other` (which must not conflict).
    pub fn merged(&self, other: &Substitution) -> Option<Substitution> {
        let mut out = self.clone();
        for (v, t) in other.iter() {
            if !out.unify_in_place(&Term::Var(v.clone()), t) {
                return None;
            }
        }
        Some(out)
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, t)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}={}", self.apply(t))?;
        }
        f.write_str("}")
    }
}

impl FromIterator<(Var, Term)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (Var, Term)>>(iter: I) -> Self {
        Substitution { bindings: iter.into_iter().collect() }
    }
}

/// Most general unifier of `a` and `b` extending `s`, if one exists.
pub fn unify(a: &Term, b: &Term, s: &Substitution) -> Option<Substitution> {
    let mut out = s.clone();
    if out.unify_in_place(a, b) {
        Some(out)
    } else {
        None
    }
}
