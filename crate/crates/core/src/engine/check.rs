//! Replays a recorded proof against the knowledge base. Shares no search
//! code with the solver beyond negation sub-queries.

use std::fmt;

use super::builtins::{call_builtin, evaluate};
use super::machine::{Budget, Machine};
use super::proof::ProofTree;
use super::SearchConfig;
use crate::clause::{Builtin, BuiltinOp, Goal, KnowledgeBase};
use crate::subst::{match_pattern, Substitution};
use crate::term::{Number, Term};

/// Clause variables are renamed into a generation the solver never uses, so
/// they cannot collide with variables left in the proof.
const CHECK_GENERATION: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RejectReason {
    /// No fact with this provenance has the node's head as an instance.
    NoMatchingFact,
    /// No single clause covers the head and children simultaneously.
    NoMatchingClause,
    BuiltinFailed(String),
    ResultMismatch { expected: Option<String>, recorded: Option<String> },
    NafProvable,
    NafNotGround,
    NafUndecided,
    MisplacedConjunction,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::NoMatchingFact => f.write_str("not an instance of any fact"),
            RejectReason::NoMatchingClause => f.write_str("head and children match no single clause"),
            RejectReason::BuiltinFailed(m) => write!(f, "built-in does not hold: {m}"),
            RejectReason::ResultMismatch { expected, recorded } => write!(
                f,
                "recorded result {} but evaluation gives {}",
                recorded.as_deref().unwrap_or("none"),
                expected.as_deref().unwrap_or("none")
            ),
            RejectReason::NafProvable => f.write_str("negated goal is provable within the recorded depth"),
            RejectReason::NafNotGround => f.write_str("negated goal is not ground"),
            RejectReason::NafUndecided => f.write_str("step budget ran out while re-checking the negated goal"),
            RejectReason::MisplacedConjunction => f.write_str("conjunction node below the root"),
        }
    }
}

/// The first failing node in pre-order, addressed by child indices from the
/// root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofRejection {
    pub path: Vec<usize>,
    pub label: String,
    pub reason: RejectReason,
}

impl fmt::Display for ProofRejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path: Vec<String> = self.path.iter().map(usize::to_string).collect();
        write!(f, "node /{} `{}`: {}", path.join("/"), self.label, self.reason)
    }
}

impl std::error::Error for ProofRejection {}

pub fn check_proof(kb: &KnowledgeBase, proof: &ProofTree, cfg: &SearchConfig) -> Result<(), ProofRejection> {
    let mut path = Vec::new();
    if let ProofTree::Conjunction { children } = proof {
        for (i, child) in children.iter().enumerate() {
            path.push(i);
            check_node(kb, child, cfg, &mut path)?;
            path.pop();
        }
        return Ok(());
    }
    check_node(kb, proof, cfg, &mut path)
}

fn check_node(
    kb: &KnowledgeBase,
    node: &ProofTree,
    cfg: &SearchConfig,
    path: &mut Vec<usize>,
) -> Result<(), ProofRejection> {
    let reject = |path: &[usize], reason| ProofRejection { path: path.to_vec(), label: node.label(), reason };
    match node {
        ProofTree::Fact { head, provenance } => {
            let found = candidates(kb, head, provenance.as_deref()).any(|(clause_head, body)| {
                body.is_empty() && match_pattern(&clause_head, head, &mut Substitution::new())
            });
            if !found {
                return Err(reject(path, RejectReason::NoMatchingFact));
            }
        }
        ProofTree::Rule { head, provenance, children } => {
            let found = candidates(kb, head, provenance.as_deref()).any(|(clause_head, body)| {
                !body.is_empty() && body.len() == children.len() && {
                    let mut s = Substitution::new();
                    match_pattern(&clause_head, head, &mut s)
                        && body.iter().zip(children).all(|(goal, child)| covers(goal, child, &mut s))
                }
            });
            if !found {
                return Err(reject(path, RejectReason::NoMatchingClause));
            }
            for (i, child) in children.iter().enumerate() {
                path.push(i);
                check_node(kb, child, cfg, path)?;
                path.pop();
            }
        }
        ProofTree::Builtin { goal, result } => {
            if let Err(reason) = check_builtin(goal, result.as_ref(), cfg) {
                return Err(reject(path, reason));
            }
        }
        ProofTree::Naf { goal, depth_limit } => {
            if !goal.is_ground() {
                return Err(reject(path, RejectReason::NafNotGround));
            }
            let Ok(inner) = Goal::from_term(goal) else {
                return Err(reject(path, RejectReason::NafProvable));
            };
            let budget = Budget::new(cfg.step_budget);
            let query = [inner];
            let mut machine = Machine::new(kb, cfg, Some(*depth_limit), &budget, 1, &query);
            if machine.next_solution().is_some() {
                return Err(reject(path, RejectReason::NafProvable));
            }
            if budget.exhausted() {
                return Err(reject(path, RejectReason::NafUndecided));
            }
        }
        ProofTree::Conjunction { .. } => return Err(reject(path, RejectReason::MisplacedConjunction)),
    }
    Ok(())
}

/// Renamed clauses for the node's predicate that carry its provenance.
fn candidates<'a>(
    kb: &'a KnowledgeBase,
    head: &Term,
    provenance: Option<&'a str>,
) -> impl Iterator<Item = (Term, Vec<Goal>)> + 'a {
    let positions = match head.functor() {
        Some((name, arity)) => kb.lookup(name, arity),
        None => &[],
    };
    positions.iter().filter_map(move |&p| {
        let clause = kb.clause(p);
        (clause.provenance() == provenance).then(|| {
            let renamed = clause.rename_apart(CHECK_GENERATION);
            (renamed.head().clone(), renamed.body().to_vec())
        })
    })
}

/// Whether a body goal accounts for a child node, extending `s`.
fn covers(goal: &Goal, child: &ProofTree, s: &mut Substitution) -> bool {
    match (goal, child) {
        (Goal::Call(t), ProofTree::Fact { head, .. } | ProofTree::Rule { head, .. }) => match_pattern(t, head, s),
        (Goal::Builtin(b), ProofTree::Builtin { goal, .. }) => match_pattern(&b.to_term(), goal, s),
        (Goal::Not(inner), ProofTree::Naf { goal, .. }) => match_pattern(&inner.to_term(), goal, s),
        _ => false,
    }
}

fn check_builtin(goal: &Term, result: Option<&Term>, cfg: &SearchConfig) -> Result<(), RejectReason> {
    let builtin = Builtin::from_term(goal).ok_or_else(|| RejectReason::BuiltinFailed("not a built-in".into()))?;
    let expected = match builtin.op {
        BuiltinOp::Is => {
            let value = evaluate(&builtin.rhs, &Substitution::new())
                .map_err(|e| RejectReason::BuiltinFailed(e.to_string()))?;
            Some(Term::Number(Number::new(value)))
        }
        _ => None,
    };
    if expected.as_ref() != result {
        return Err(RejectReason::ResultMismatch {
            expected: expected.as_ref().map(Term::render),
            recorded: result.map(Term::render),
        });
    }
    match call_builtin(&builtin, &Substitution::new(), cfg.occurs_check) {
        Ok(Some(_)) => Ok(()),
        Ok(None) => Err(RejectReason::BuiltinFailed("evaluates to false".into())),
        Err(e) => Err(RejectReason::BuiltinFailed(e.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::solve;
    use crate::parser::{parse_program, parse_query, parse_term, SourceProgram};

    fn kb(text: &str) -> KnowledgeBase {
        parse_program(&SourceProgram::new(text, "test")).unwrap().kb
    }

    const QUIET: &str = "% id: s1\nred(fiona).\n% id: s2\nrough(fiona).\n% id: s3\nquiet(X) :- red(X), rough(X).";

    fn quiet_proof(kb: &KnowledgeBase) -> ProofTree {
        let r = solve(kb, &parse_query("quiet(fiona)").unwrap(), &SearchConfig::default()).unwrap();
        r.solutions[0].proof.clone()
    }

    #[test]
    fn accepts_solver_output() {
        let kb = kb(QUIET);
        assert_eq!(check_proof(&kb, &quiet_proof(&kb), &SearchConfig::default()), Ok(()));
        let wage = self::kb("wage(18.00).\novertime_wage(W) :- wage(W1), W is 1.5 * W1, \\+ capped(W).");
        let r = solve(&wage, &parse_query("overtime_wage(W)").unwrap(), &SearchConfig::default()).unwrap();
        assert_eq!(check_proof(&wage, &r.solutions[0].proof, &SearchConfig::default()), Ok(()));
    }

    #[test]
    fn rejects_reordered_children() {
        let kb = kb(QUIET);
        let mut proof = quiet_proof(&kb);
        proof.children_mut().unwrap().swap(0, 1);
        let err = check_proof(&kb, &proof, &SearchConfig::default()).unwrap_err();
        assert_eq!(err.path, Vec::<usize>::new());
        assert_eq!(err.reason, RejectReason::NoMatchingClause);
    }

    #[test]
    fn rejects_fabricated_fact() {
        let kb = kb(QUIET);
        let mut proof = quiet_proof(&kb);
        proof.children_mut().unwrap()[1] =
            ProofTree::Fact { head: parse_term("rough(fiona)").unwrap(), provenance: Some("s9".into()) };
        let err = check_proof(&kb, &proof, &SearchConfig::default()).unwrap_err();
        assert_eq!(err.path, vec![1]);
        assert_eq!(err.reason, RejectReason::NoMatchingFact);
        let fake = ProofTree::Fact { head: parse_term("green(fiona)").unwrap(), provenance: None };
        assert!(check_proof(&kb, &fake, &SearchConfig::default()).is_err());
    }

    #[test]
    fn rejects_wrong_builtin_result_and_provable_negation() {
        let kb = kb("green(fiona).");
        let cfg = SearchConfig::default();
        let bad = ProofTree::Builtin { goal: parse_term("26 is 1.5 * 18").unwrap(), result: Some(Term::int(26)) };
        assert!(check_proof(&kb, &bad, &cfg).is_err());
        let naf = ProofTree::Naf { goal: parse_term("green(fiona)").unwrap(), depth_limit: 20 };
        assert_eq!(check_proof(&kb, &naf, &cfg).unwrap_err().reason, RejectReason::NafProvable);
        let naf = ProofTree::Naf { goal: parse_term("blue(fiona)").unwrap(), depth_limit: 20 };
        assert_eq!(check_proof(&kb, &naf, &cfg), Ok(()));
    }
}
