//! Goals, clauses and the indexed knowledge base.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::term::{Term, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClauseError {
    #[error("clause head must be an atom or compound term, found {0}")]
    InvalidHead(Term),
    #[error("cannot redefine built-in predicate {0}/2")]
    BuiltinRedefinition(String),
    #[error("{0} cannot be used as a goal")]
    InvalidGoal(Term),
    #[error("negation may only wrap a predicate call or a built-in")]
    NestedNegation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BuiltinOp {
    Is,
    Unify,
    Identical,
    NotIdentical,
    Less,
    Greater,
    LessEq,
    GreaterEq,
    ArithEq,
    ArithNe,
}

impl BuiltinOp {
    pub const ALL: [BuiltinOp; 10] = [
        BuiltinOp::Is,
        BuiltinOp::Unify,
        BuiltinOp::Identical,
        BuiltinOp::NotIdentical,
        BuiltinOp::Less,
        BuiltinOp::Greater,
        BuiltinOp::LessEq,
        BuiltinOp::GreaterEq,
        BuiltinOp::ArithEq,
        BuiltinOp::ArithNe,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BuiltinOp::Is => "is",
            BuiltinOp::Unify => "=",
            BuiltinOp::Identical => "==",
            BuiltinOp::NotIdentical => "\\==",
            BuiltinOp::Less => "<",
            BuiltinOp::Greater => ">",
            BuiltinOp::LessEq => "=<",
            BuiltinOp::GreaterEq => ">=",
            BuiltinOp::ArithEq => "=:=",
            BuiltinOp::ArithNe => "=\\=",
        }
    }

    pub fn from_symbol(symbol: &str) -> Option<BuiltinOp> {
        BuiltinOp::ALL.into_iter().find(|op| op.symbol() == symbol)
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Builtin {
    pub op: BuiltinOp,
    pub lhs: Term,
    pub rhs: Term,
}

impl Builtin {
    pub fn new(op: BuiltinOp, lhs: Term, rhs: Term) -> Self {
        Builtin { op, lhs, rhs }
    }

    pub fn to_term(&self) -> Term {
        Term::compound(self.op.symbol(), vec![self.lhs.clone(), self.rhs.clone()])
    }

    pub fn from_term(term: &Term) -> Option<Builtin> {
        match term {
            Term::Compound(c) if c.arity() == 2 => {
                let op = BuiltinOp::from_symbol(c.functor())?;
                Some(Builtin::new(op, c.args()[0].clone(), c.args()[1].clone()))
            }
            _ => None,
        }
    }
}

/// One conjunct of a clause body or query.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Goal {
    Call(Term),
    Not(Box<Goal>),
    Builtin(Builtin),
}

impl Goal {
    /// `\+ inner`; only calls and built-ins may be negated.
    pub fn negation(inner: Goal) -> Result<Goal, ClauseError> {
        match inner {
            Goal::Not(_) => Err(ClauseError::NestedNegation),
            other => Ok(Goal::Not(Box::new(other))),
        }
    }

    /// Classifies a term as a goal: `\+ G`, a built-in, or a predicate call.
    pub fn from_term(term: &Term) -> Result<Goal, ClauseError> {
        if let Term::Compound(c) = term {
            if c.arity() == 1 && c.functor() == "\\+" {
                return Goal::negation(Goal::from_term(&c.args()[0])?);
            }
        }
        if let Some(b) = Builtin::from_term(term) {
            return Ok(Goal::Builtin(b));
        }
        match term {
            Term::Atom(_) | Term::Compound(_) => Ok(Goal::Call(term.clone())),
            _ => Err(ClauseError::InvalidGoal(term.clone())),
        }
    }

    pub fn to_term(&self) -> Term {
        match self {
            Goal::Call(t) => t.clone(),
            Goal::Not(inner) => Term::compound("\\+", vec![inner.to_term()]),
            Goal::Builtin(b) => b.to_term(),
        }
    }

    pub fn renamed(&self, generation: u32) -> Goal {
        match self {
            Goal::Call(t) => Goal::Call(t.renamed(generation)),
            Goal::Not(inner) => Goal::Not(Box::new(inner.renamed(generation))),
            Goal::Builtin(b) => Goal::Builtin(Builtin::new(b.op, b.lhs.renamed(generation), b.rhs.renamed(generation))),
        }
    }

    pub(crate) fn collect_variables(&self, out: &mut Vec<Var>) {
        match self {
            Goal::Call(t) => t.collect_variables(out),
            Goal::Not(inner) => inner.collect_variables(out),
            Goal::Builtin(b) => {
                b.lhs.collect_variables(out);
                b.rhs.collect_variables(out);
            }
        }
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_term())
    }
}

impl fmt::Debug for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Distinct variables of a goal list in order of first occurrence.
pub fn goal_variables(goals: &[Goal]) -> Vec<Var> {
    let mut out = Vec::new();
    for g in goals {
        g.collect_variables(&mut out);
    }
    out
}

#[derive(Clone, PartialEq, Eq)]
pub struct Clause {
    head: Term,
    body: Vec<Goal>,
    provenance: Option<String>,
}

impl Clause {
    pub fn new(head: Term, body: Vec<Goal>, provenance: Option<String>) -> Result<Clause, ClauseError> {
        match &head {
            Term::Atom(_) | Term::Compound(_) => {}
            _ => return Err(ClauseError::InvalidHead(head)),
        }
        if Builtin::from_term(&head).is_some() || head.functor() == Some(("\\+", 1)) {
            let (name, _) = head.functor().unwrap_or_default();
            return Err(ClauseError::BuiltinRedefinition(name.to_string()));
        }
        Ok(Clause { head, body, provenance })
    }

    pub fn fact(head: Term) -> Result<Clause, ClauseError> {
        Clause::new(head, Vec::new(), None)
    }

    pub fn with_provenance(mut self, id: impl Into<String>) -> Clause {
        self.provenance = Some(id.into());
        self
    }

    pub fn head(&self) -> &Term {
        &self.head
    }

    pub fn body(&self) -> &[Goal] {
        &self.body
    }

    pub fn provenance(&self) -> Option<&str> {
        self.provenance.as_deref()
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    /// Same clause with every variable moved to `generation`. A variable
    /// bijection by construction; ground clauses come back unchanged.
    pub fn rename_apart(&self, generation: u32) -> Clause {
        Clause {
            head: self.head.renamed(generation),
            body: self.body.iter().map(|g| g.renamed(generation)).collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn variables(&self) -> Vec<Var> {
        let mut out = self.head.variables();
        for g in &self.body {
            g.collect_variables(&mut out);
        }
        out
    }
}

/// `head.` or `head :- g1, g2.`, preceded by an `% id:` line when the
/// clause carries provenance.
impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(id) = &self.provenance {
            writeln!(f, "% id: {id}")?;
        }
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            f.write_str(" :- ")?;
            for (i, g) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                // Body goals sit below the conjunction operator.
                let t = g.to_term();
                if t.functor().is_some_and(|(name, arity)| arity == 2 && matches!(name, "," | ":-")) {
                    write!(f, "({t})")?;
                } else {
                    write!(f, "{t}")?;
                }
            }
        }
        f.write_str(".")
    }
}

impl fmt::Debug for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredicateKey {
    pub name: Arc<str>,
    pub arity: usize,
}

impl fmt::Display for PredicateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

/// Clauses in source order plus a functor/arity index.
#[derive(Clone, Default)]
pub struct KnowledgeBase {
    clauses: Vec<Clause>,
    index: HashMap<Arc<str>, Vec<(usize, Vec<usize>)>>,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_clauses(clauses: impl IntoIterator<Item = Clause>) -> Self {
        let mut kb = KnowledgeBase::new();
        for c in clauses {
            kb.push(c);
        }
        kb
    }

    pub fn push(&mut self, clause: Clause) {
        let position = self.clauses.len();
        let (name, arity) = match clause.head() {
            Term::Atom(name) => (Arc::clone(name), 0),
            Term::Compound(c) => (Arc::clone(c.functor_arc()), c.arity()),
            _ => unreachable!("clause heads are atoms or compounds"),
        };
        let by_arity = self.index.entry(name).or_default();
        match by_arity.iter_mut().find(|(a, _)| *a == arity) {
            Some((_, positions)) => positions.push(position),
            None => by_arity.push((arity, vec![position])),
        }
        self.clauses.push(clause);
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn clause(&self, position: usize) -> &Clause {
        &self.clauses[position]
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    /// Positions of clauses whose head has this name and arity, in source order.
    pub fn lookup(&self, name: &str, arity: usize) -> &[usize] {
        self.index
            .get(name)
            .and_then(|by_arity| by_arity.iter().find(|(a, _)| *a == arity))
            .map_or(&[], |(_, positions)| positions.as_slice())
    }

    pub fn provenance_map(&self) -> BTreeMap<usize, &str> {
        self.clauses
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.provenance().map(|p| (i, p)))
            .collect()
    }

    pub fn predicates(&self) -> Vec<PredicateKey> {
        let mut keys: Vec<PredicateKey> = self
            .index
            .iter()
            .flat_map(|(name, by_arity)| {
                by_arity.iter().map(|(arity, _)| PredicateKey { name: Arc::clone(name), arity: *arity })
            })
            .collect();
        keys.sort();
        keys
    }
}

impl fmt::Display for KnowledgeBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.clauses {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for KnowledgeBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(name: &str, args: Vec<Term>) -> Term {
        Term::compound(name, args)
    }

    #[test]
    fn rename_apart_preserves_structure() {
        let c = Clause::new(p("p", vec![Term::var("X")]), vec![Goal::Call(p("q", vec![Term::var("X")]))], None).unwrap();
        let r3 = c.rename_apart(3);
        assert_eq!(r3.to_string(), "p(X_3) :- q(X_3).");
        let r1 = c.rename_apart(1);
        let r2 = c.rename_apart(2);
        let v1 = r1.variables();
        assert!(r2.variables().iter().all(|v| !v1.contains(v)));
        let fact = Clause::fact(p("green", vec![Term::atom("fiona")])).unwrap();
        assert_eq!(fact.rename_apart(9), fact);
    }

    #[test]
    fn rejects_bad_heads() {
        assert!(matches!(Clause::fact(Term::var("X")), Err(ClauseError::InvalidHead(_))));
        assert!(matches!(Clause::fact(Term::int(3)), Err(ClauseError::InvalidHead(_))));
        let is = p("is", vec![Term::var("X"), Term::int(1)]);
        assert!(matches!(Clause::fact(is), Err(ClauseError::BuiltinRedefinition(_))));
    }

    #[test]
    fn index_follows_source_order() {
        let kb = KnowledgeBase::from_clauses([
            Clause::fact(p("p", vec![Term::atom("a")])).unwrap(),
            Clause::fact(p("q", vec![Term::atom("a")])).unwrap(),
            Clause::fact(p("p", vec![Term::atom("b")])).unwrap(),
            Clause::fact(Term::atom("p")).unwrap(),
        ]);
        assert_eq!(kb.lookup("p", 1), &[0, 2]);
        assert_eq!(kb.lookup("p", 0), &[3]);
        assert!(kb.lookup("r", 1).is_empty());
        for (i, c) in kb.clauses().iter().enumerate() {
            let (name, arity) = c.head().functor().unwrap();
            assert!(kb.lookup(name, arity).contains(&i));
        }
    }

    #[test]
    fn goals_classify_terms() {
        let is = p("is", vec![Term::var("W"), Term::int(3)]);
        assert!(matches!(Goal::from_term(&is), Ok(Goal::Builtin(_))));
        let naf = p("\\+", vec![p("red", vec![Term::atom("fiona")])]);
        assert!(matches!(Goal::from_term(&naf), Ok(Goal::Not(_))));
        let double = p("\\+", vec![naf]);
        assert_eq!(Goal::from_term(&double), Err(ClauseError::NestedNegation));
        assert!(Goal::from_term(&Term::var("G")).is_err());
    }
}
