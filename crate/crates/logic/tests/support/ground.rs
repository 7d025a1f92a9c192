//! Random ground, built-in-free programs and a bottom-up enumeration oracle
//! that shares no code with the resolver.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Arg {
    Const(usize),
    Var(usize),
}

#[derive(Clone, Debug)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Arg>,
}

#[derive(Clone, Debug)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Atom>,
}

#[derive(Clone, Debug)]
pub struct Program {
    pub constants: usize,
    pub facts: Vec<(String, Vec<usize>)>,
    pub rules: Vec<Rule>,
    pub query: Atom,
}

const VARS: [&str; 4] = ["X", "Y", "Z", "W"];

fn arity(pred: &str) -> usize {
    match pred {
        "e0" | "d0" | "d3" => 1,
        _ => 2,
    }
}

fn render_arg(a: &Arg) -> String {
    match a {
        Arg::Const(c) => format!("c{c}"),
        Arg::Var(v) => VARS[*v].to_string(),
    }
}

fn render_atom(a: &Atom) -> String {
    let args: Vec<String> = a.args.iter().map(render_arg).collect();
    format!("{}({})", a.pred, args.join(","))
}

impl Program {
    pub fn text(&self) -> String {
        let mut out = String::new();
        for (p, args) in &self.facts {
            let args: Vec<String> = args.iter().map(|c| format!("c{c}")).collect();
            out.push_str(&format!("{p}({}).\n", args.join(",")));
        }
        for r in &self.rules {
            let body: Vec<String> = r.body.iter().map(render_atom).collect();
            out.push_str(&format!("{} :- {}.\n", render_atom(&r.head), body.join(", ")));
        }
        out
    }

    pub fn query_text(&self) -> String {
        render_atom(&self.query)
    }

    pub fn query_vars(&self) -> Vec<usize> {
        let mut vs = Vec::new();
        for a in &self.query.args {
            if let Arg::Var(v) = a {
                if !vs.contains(v) {
                    vs.push(*v);
                }
            }
        }
        vs
    }

    pub fn query_var_names(&self) -> Vec<&'static str> {
        self.query_vars().into_iter().map(|v| VARS[v]).collect()
    }

    /// Every derivable ground atom, by naive bottom-up evaluation over all
    /// ground instantiations of each rule.
    pub fn derived(&self) -> BTreeSet<(String, Vec<usize>)> {
        let mut known: BTreeSet<(String, Vec<usize>)> = self.facts.iter().cloned().collect();
        loop {
            let mut added = false;
            for r in &self.rules {
                let nvars = VARS.len();
                for assignment in assignments(nvars, self.constants) {
                    let ground = |a: &Atom| -> (String, Vec<usize>) {
                        let args = a
                            .args
                            .iter()
                            .map(|x| match x {
                                Arg::Const(c) => *c,
                                Arg::Var(v) => assignment[*v],
                            })
                            .collect();
                        (a.pred.clone(), args)
                    };
                    if r.body.iter().all(|b| known.contains(&ground(b))) {
                        added |= known.insert(ground(&r.head));
                    }
                }
            }
            if !added {
                return known;
            }
        }
    }

    /// Ground answers to the query: one tuple of constants per query variable.
    pub fn answers(&self) -> BTreeSet<Vec<usize>> {
        let derived = self.derived();
        let qvars = self.query_vars();
        let mut out = BTreeSet::new();
        for values in assignments(qvars.len(), self.constants) {
            let args: Vec<usize> = self
                .query
                .args
                .iter()
                .map(|a| match a {
                    Arg::Const(c) => *c,
                    Arg::Var(v) => values[qvars.iter().position(|q| q == v).unwrap()],
                })
                .collect();
            if derived.contains(&(self.query.pred.clone(), args)) {
                out.insert(values);
            }
        }
        out
    }
}

fn assignments(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for prefix in &out {
            for c in 0..k {
                let mut p = prefix.clone();
                p.push(c);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

fn random_args<R: Rng>(rng: &mut R, n: usize, constants: usize, var_pool: usize, const_bias: f64) -> Vec<Arg> {
    (0..n)
        .map(|_| if rng.gen_bool(const_bias) { Arg::Const(rng.gen_range(0..constants)) } else { Arg::Var(rng.gen_range(0..var_pool)) })
        .collect()
}

/// A program with at most 50 facts and 5 non-recursive, range-restricted rules.
pub fn random_program<R: Rng>(rng: &mut R) -> Program {
    let constants = rng.gen_range(2..=5);
    let base = ["e0", "e1", "e2"];
    let nfacts = rng.gen_range(0..=50);
    let facts = (0..nfacts)
        .map(|_| {
            let p = *base.choose(rng).unwrap();
            (p.to_string(), (0..arity(p)).map(|_| rng.gen_range(0..constants)).collect())
        })
        .collect();

    let derived = ["d0", "d1", "d2", "d3", "d4"];
    let nrules = rng.gen_range(0..=5);
    let mut rules = Vec::new();
    let mut head_idx = 0usize;
    for i in 0..nrules {
        if i > 0 && rng.gen_bool(0.6) {
            head_idx += 1;
        }
        let head_pred = derived[head_idx];
        let mut available: Vec<&str> = base.to_vec();
        available.extend_from_slice(&derived[..head_idx]);
        let body_len = rng.gen_range(1..=3);
        let body: Vec<Atom> = (0..body_len)
            .map(|_| {
                let p = *available.choose(rng).unwrap();
                Atom { pred: p.to_string(), args: random_args(rng, arity(p), constants, 3, 0.2) }
            })
            .collect();
        let mut body_vars: Vec<usize> = Vec::new();
        for a in &body {
            for x in &a.args {
                if let Arg::Var(v) = x {
                    if !body_vars.contains(v) {
                        body_vars.push(*v);
                    }
                }
            }
        }
        let head_args = (0..arity(head_pred))
            .map(|_| {
                if body_vars.is_empty() || rng.gen_bool(0.15) {
                    Arg::Const(rng.gen_range(0..constants))
                } else {
                    Arg::Var(*body_vars.choose(rng).unwrap())
                }
            })
            .collect();
        rules.push(Rule { head: Atom { pred: head_pred.to_string(), args: head_args }, body });
    }

    let mut candidates: Vec<&str> = base.to_vec();
    candidates.extend_from_slice(&derived[..=head_idx.min(4)]);
    let qp = *candidates.choose(rng).unwrap();
    let query = Atom { pred: qp.to_string(), args: random_args(rng, arity(qp), constants, 4, 0.3) };
    Program { constants, facts, rules, query }
}
