//! Substitutions and syntactic unification.
//!
//! Internally a substitution is kept in triangular form (a binding may
//! mention other bound variables) so the solver can bind and undo in O(1).
//! [`unify`] returns the resolved, idempotent form.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::term::{Term, Var};

/// Cap on variable expansions along one path when applying a substitution.
/// Without the occurs check a unifier may be cyclic; this turns an endless
/// expansion into an error.
pub const MAX_EXPANSION_DEPTH: usize = 1000;

/// Cap on term pairs visited by a single unification. Only reachable when
/// cyclic bindings are compared against each other.
const MAX_UNIFY_WORK: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("cyclic binding for {0} exceeds expansion depth {MAX_EXPANSION_DEPTH}")]
    CyclicBinding(Var),
}

#[derive(Clone, Default, PartialEq, Eq)]
pub struct Substitution {
    map: HashMap<Var, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Var, Term)>) -> Self {
        Substitution { map: pairs.into_iter().collect() }
    }

    pub fn get(&self, var: &Var) -> Option<&Term> {
        self.map.get(var)
    }

    pub fn contains(&self, var: &Var) -> bool {
        self.map.contains_key(var)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Term)> {
        self.map.iter()
    }

    /// Bindings ordered by variable, for stable output.
    pub fn sorted(&self) -> Vec<(&Var, &Term)> {
        let mut pairs: Vec<_> = self.map.iter().collect();
        pairs.sort_by(|a, b| a.0.cmp(b.0));
        pairs
    }

    /// Follows variable-to-variable and variable-to-term links at the top
    /// level only.
    pub fn walk<'a>(&'a self, mut term: &'a Term) -> &'a Term {
        while let Term::Var(v) = term {
            match self.map.get(v) {
                Some(bound) => term = bound,
                None => break,
            }
        }
        term
    }

    pub(crate) fn bind(&mut self, var: Var, term: Term) {
        self.map.insert(var, term);
    }

    pub(crate) fn undo_to(&mut self, trail: &mut Vec<Var>, mark: usize) {
        for var in trail.drain(mark..) {
            self.map.remove(&var);
        }
    }

    /// True when no bound variable occurs in any fully applied binding.
    pub fn is_idempotent(&self) -> bool {
        self.map.values().all(|t| t.variables().iter().all(|v| !self.map.contains_key(v)))
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, t)) in self.sorted().into_iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v} -> {t}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Replaces every bound variable in `term`, recursively.
pub fn apply(subst: &Substitution, term: &Term) -> Result<Term, TermError> {
    apply_at(subst, term, 0)
}

fn apply_at(subst: &Substitution, term: &Term, expansions: usize) -> Result<Term, TermError> {
    match term {
        Term::Var(v) => match subst.get(v) {
            None => Ok(term.clone()),
            Some(bound) => {
                if expansions >= MAX_EXPANSION_DEPTH {
                    return Err(TermError::CyclicBinding(v.clone()));
                }
                apply_at(subst, bound, expansions + 1)
            }
        },
        Term::Compound(c) if !c.is_ground() => {
            let args = c
                .args()
                .iter()
                .map(|a| apply_at(subst, a, expansions))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Term::compound(c.functor_arc().clone(), args))
        }
        _ => Ok(term.clone()),
    }
}

/// Most general unifier of `a` and `b` extending `subst`, in resolved form.
/// Returns `None` when the terms do not unify.
pub fn unify(a: &Term, b: &Term, subst: &Substitution, occurs_check: bool) -> Option<Substitution> {
    let mut out = subst.clone();
    let mut trail = Vec::new();
    if !unify_in_place(a, b, &mut out, occurs_check, &mut trail) {
        return None;
    }
    Some(resolve(out))
}

/// Rewrites every binding to its fully applied form. Cyclic bindings (only
/// possible without the occurs check) are left in triangular form.
pub fn resolve(subst: Substitution) -> Substitution {
    let map = subst
        .map
        .iter()
        .map(|(v, t)| (v.clone(), apply(&subst, t).unwrap_or_else(|_| t.clone())))
        .collect();
    Substitution { map }
}

/// Unifies in place, recording new bindings on `trail`. On failure every
/// binding made by this call is undone.
pub(crate) fn unify_in_place(
    a: &Term,
    b: &Term,
    subst: &mut Substitution,
    occurs_check: bool,
    trail: &mut Vec<Var>,
) -> bool {
    let mark = trail.len();
    let mut pending = vec![(a.clone(), b.clone())];
    let mut work = 0usize;
    while let Some((x, y)) = pending.pop() {
        work += 1;
        if work > MAX_UNIFY_WORK {
            subst.undo_to(trail, mark);
            return false;
        }
        let x = subst.walk(&x).clone();
        let y = subst.walk(&y).clone();
        let ok = match (&x, &y) {
            (Term::Var(v1), Term::Var(v2)) => {
                if v1 != v2 {
                    // Newer variables point at older ones so chains stay short.
                    let (from, to) = if v1.generation() >= v2.generation() { (v1, &y) } else { (v2, &x) };
                    subst.bind(from.clone(), to.clone());
                    trail.push(from.clone());
                }
                true
            }
            (Term::Var(v), t) | (t, Term::Var(v)) => {
                if occurs_check && occurs(v, t, subst) {
                    false
                } else {
                    subst.bind(v.clone(), t.clone());
                    trail.push(v.clone());
                    true
                }
            }
            (Term::Number(n1), Term::Number(n2)) => n1 == n2,
            (Term::Atom(a1), Term::Atom(a2)) => a1 == a2,
            (Term::Compound(c1), Term::Compound(c2)) => {
                if std::sync::Arc::ptr_eq(c1, c2) {
                    true
                } else if c1.functor() != c2.functor() || c1.arity() != c2.arity() {
                    false
                } else if c1.is_ground() && c2.is_ground() {
                    c1 == c2
                } else {
                    for pair in c1.args().iter().cloned().zip(c2.args().iter().cloned()).rev() {
                        pending.push(pair);
                    }
                    true
                }
            }
            _ => false,
        };
        if !ok {
            subst.undo_to(trail, mark);
            return false;
        }
    }
    true
}

fn occurs(var: &Var, term: &Term, subst: &Substitution) -> bool {
    let mut stack = vec![term];
    while let Some(t) = stack.pop() {
        match subst.walk(t) {
            Term::Var(v) if v == var => return true,
            Term::Compound(c) if !c.is_ground() => stack.extend(c.args()),
            _ => {}
        }
    }
    false
}

/// One-way matching: binds variables of `pattern` only, treating every
/// variable in `subject` as an opaque constant.
pub(crate) fn match_pattern(pattern: &Term, subject: &Term, subst: &mut Substitution) -> bool {
    match pattern {
        Term::Var(v) => match subst.get(v) {
            Some(bound) => bound == subject,
            None => {
                subst.bind(v.clone(), subject.clone());
                true
            }
        },
        Term::Compound(p) => match subject {
            Term::Compound(s) => {
                p.functor() == s.functor()
                    && p.arity() == s.arity()
                    && p.args().iter().zip(s.args()).all(|(pa, sa)| match_pattern(pa, sa, subst))
            }
            _ => false,
        },
        _ => pattern == subject,
    }
}
