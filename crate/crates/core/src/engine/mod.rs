//! The solver: depth-first and iterative-deepening SLD resolution with proof
//! recording, plus an independent proof checker.

mod builtins;
mod check;
mod classify;
mod machine;
mod proof;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builtins::{call_builtin, evaluate, BuiltinError};
pub use check::{check_proof, ProofRejection, RejectReason};
pub use classify::{classify_answer, counterpart, AnswerLabel, Classification};
pub use proof::{ProofDecodeError, ProofKind, ProofRecord, ProofTree};

use crate::clause::{Goal, KnowledgeBase};
use crate::subst::Substitution;
use crate::term::{Term, Var};
use machine::{Budget, Machine};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Dfs,
    #[default]
    Ids,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dfs" => Ok(Strategy::Dfs),
            "ids" => Ok(Strategy::Ids),
            other => Err(format!("unknown strategy `{other}` (expected dfs or ids)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SearchConfig {
    pub strategy: Strategy,
    pub max_depth: u32,
    pub max_solutions: usize,
    pub step_budget: u64,
    pub occurs_check: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            strategy: Strategy::Ids,
            max_depth: 20,
            max_solutions: 20,
            step_budget: 1_000_000,
            occurs_check: false,
        }
    }
}

impl SearchConfig {
    pub fn dfs() -> Self {
        SearchConfig { strategy: Strategy::Dfs, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |msg: &str| Err(EngineError::InvalidConfig(msg.to_string()));
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1");
        }
        if self.max_solutions == 0 {
            return bad("max_solutions must be at least 1");
        }
        if self.step_budget == 0 {
            return bad("step_budget must be at least 1");
        }
        // Each step allocates one renaming generation; u32::MAX is reserved
        // for the proof checker.
        if self.step_budget >= u64::from(u32::MAX) {
            return bad("step_budget must be below 2^32 - 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("empty query")]
    EmptyQuery,
    #[error("statement `{0}` is not a callable literal")]
    InvalidStatement(String),
    #[error("negation-as-failure goal `{0}` is not ground")]
    Floundering(String),
}

/// A problem confined to one branch of the search. The branch fails and the
/// search carries on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum EngineDiagnostic {
    Arithmetic(String),
    Instantiation(String),
    Floundering(String),
    NegationNesting(String),
    CyclicTerm(String),
}

impl fmt::Display for EngineDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineDiagnostic::Arithmetic(m) => write!(f, "arithmetic error: {m}"),
            EngineDiagnostic::Instantiation(m) => write!(f, "instantiation error: {m}"),
            EngineDiagnostic::Floundering(g) => write!(f, "floundering: \\+ {g} is not ground"),
            EngineDiagnostic::NegationNesting(g) => write!(f, "negation nested too deeply at \\+ {g}"),
            EngineDiagnostic::CyclicTerm(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    /// The search space (within any depth limit) was fully explored.
    Exhausted,
    /// Stopped after `max_solutions` answers.
    SolutionLimit,
    /// Ran out of resolution steps; the returned solutions are partial.
    BudgetExhausted,
    /// Iterative deepening reached `max_depth` without a solution while some
    /// branches were still cut off by the limit.
    DepthExhausted,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    /// Query variables in order of first occurrence, with their values.
    pub bindings: Vec<(Var, Term)>,
    pub proof: ProofTree,
    pub depth_found: u32,
    /// Resolution steps spent by the search up to this answer.
    pub steps_used: u64,
}

impl Solution {
    pub fn answer_bindings(&self) -> Substitution {
        Substitution::from_pairs(self.bindings.iter().cloned())
    }

    pub fn binding(&self, name: &str) -> Option<&Term> {
        self.bindings.iter().find(|(v, _)| v.name() == name && v.generation() == 0).map(|(_, t)| t)
    }

    /// Stable JSON: bindings as rendered strings, then the proof record.
    pub fn to_json(&self) -> serde_json::Value {
        let bindings: serde_json::Map<String, serde_json::Value> =
            self.bindings.iter().map(|(v, t)| (v.to_string(), t.render().into())).collect();
        serde_json::json!({
            "bindings": bindings,
            "depth": self.depth_found,
            "steps": self.steps_used,
            "proof": self.proof.to_record(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveResult {
    pub solutions: Vec<Solution>,
    pub status: SearchStatus,
    pub steps_used: u64,
    /// Some branch was pruned by a depth limit.
    pub depth_cut: bool,
    pub diagnostics: Vec<EngineDiagnostic>,
}

impl SolveResult {
    pub fn first(&self) -> Option<&Solution> {
        self.solutions.first()
    }

    pub fn budget_exhausted(&self) -> bool {
        self.status == SearchStatus::BudgetExhausted
    }
}

/// Runs `query` against `kb` with the configured strategy.
pub fn solve(kb: &KnowledgeBase, query: &[Goal], cfg: &SearchConfig) -> Result<SolveResult, EngineError> {
    match cfg.strategy {
        Strategy::Ids => ids_solve(kb, query, cfg),
        Strategy::Dfs => {
            prepare(query, cfg)?;
            let budget = Budget::new(cfg.step_budget);
            Ok(run_limited(kb, query, cfg, None, &budget))
        }
    }
}

/// Depth-first search restricted to proofs of depth at most `limit`.
pub fn depth_limited_solve(
    kb: &KnowledgeBase,
    query: &[Goal],
    limit: u32,
    cfg: &SearchConfig,
) -> Result<SolveResult, EngineError> {
    prepare(query, cfg)?;
    if limit == 0 {
        return Err(EngineError::InvalidConfig("depth limit must be at least 1".into()));
    }
    let budget = Budget::new(cfg.step_budget);
    Ok(run_limited(kb, query, cfg, Some(limit), &budget))
}

/// Iterative deepening: limits 1, 2, ... up to `cfg.max_depth`, stopping at
/// the first limit that yields a solution. That limit is explored to the
/// end, so every returned proof has the minimal depth.
pub fn ids_solve(kb: &KnowledgeBase, query: &[Goal], cfg: &SearchConfig) -> Result<SolveResult, EngineError> {
    prepare(query, cfg)?;
    let budget = Budget::new(cfg.step_budget);
    let mut diagnostics = Vec::new();
    for limit in 1..=cfg.max_depth {
        let mut result = run_limited(kb, query, cfg, Some(limit), &budget);
        for d in result.diagnostics.drain(..) {
            if !diagnostics.contains(&d) {
                diagnostics.push(d);
            }
        }
        if !result.solutions.is_empty() || result.status == SearchStatus::BudgetExhausted || !result.depth_cut {
            result.diagnostics = diagnostics;
            return Ok(result);
        }
    }
    Ok(SolveResult {
        solutions: Vec::new(),
        status: SearchStatus::DepthExhausted,
        steps_used: budget.used(),
        depth_cut: true,
        diagnostics,
    })
}

/// Negation as failure for a ground goal: `Ok(Some(node))` when `goal` has
/// no proof of depth at most `depth_limit`, `Ok(None)` when it has one.
pub fn solve_naf(
    kb: &KnowledgeBase,
    goal: &Goal,
    depth_limit: u32,
    cfg: &SearchConfig,
) -> Result<Option<ProofTree>, EngineError> {
    cfg.validate()?;
    let term = goal.to_term();
    if !term.is_ground() {
        return Err(EngineError::Floundering(term.render()));
    }
    let budget = Budget::new(cfg.step_budget);
    let query = [goal.clone()];
    let mut machine = Machine::new(kb, cfg, Some(depth_limit), &budget, 1, &query);
    if machine.next_solution().is_some() {
        return Ok(None);
    }
    Ok(Some(ProofTree::Naf { goal: term, depth_limit }))
}

fn prepare(query: &[Goal], cfg: &SearchConfig) -> Result<(), EngineError> {
    cfg.validate()?;
    if query.is_empty() {
        return Err(EngineError::EmptyQuery);
    }
    Ok(())
}

fn run_limited(
    kb: &KnowledgeBase,
    query: &[Goal],
    cfg: &SearchConfig,
    limit: Option<u32>,
    budget: &Budget,
) -> SolveResult {
    let mut machine = Machine::new(kb, cfg, limit, budget, 0, query);
    let mut solutions = Vec::new();
    while solutions.len() < cfg.max_solutions {
        match machine.next_solution() {
            Some(s) => solutions.push(s),
            None => break,
        }
    }
    let status = if budget.exhausted() {
        SearchStatus::BudgetExhausted
    } else if solutions.len() >= cfg.max_solutions {
        SearchStatus::SolutionLimit
    } else {
        SearchStatus::Exhausted
    };
    SolveResult {
        solutions,
        status,
        steps_used: budget.used(),
        depth_cut: machine.depth_cut,
        diagnostics: machine.diagnostics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_program, parse_query, SourceProgram};

    fn kb(text: &str) -> KnowledgeBase {
        parse_program(&SourceProgram::new(text, "test")).unwrap().kb
    }

    fn q(text: &str) -> Vec<Goal> {
        parse_query(text).unwrap()
    }

    #[test]
    fn fact_query() {
        let r = solve(&kb("green(fiona)."), &q("green(fiona)"), &SearchConfig::default()).unwrap();
        assert_eq!(r.solutions.len(), 1);
        assert!(matches!(r.solutions[0].proof, ProofTree::Fact { .. }));
        assert_eq!(r.status, SearchStatus::Exhausted);
    }

    #[test]
    fn rule_proof_has_one_child_per_body_goal() {
        let kb = kb("red(fiona).\nrough(fiona).\nquiet(X) :- red(X), rough(X).");
        let r = solve(&kb, &q("quiet(fiona)"), &SearchConfig::dfs()).unwrap();
        let proof = &r.solutions[0].proof;
        assert_eq!(proof.label(), "quiet(fiona)");
        let labels: Vec<_> = proof.children().iter().map(ProofTree::label).collect();
        assert_eq!(labels, ["red(fiona)", "rough(fiona)"]);
        assert_eq!(r.solutions[0].depth_found, 2);
    }

    #[test]
    fn overtime_wage_is_exact() {
        let kb = kb("wage(18.00).\novertime_wage(W) :- wage(W1), W is 1.5 * W1.");
        let r = solve(&kb, &q("overtime_wage(W)"), &SearchConfig::default()).unwrap();
        assert_eq!(r.solutions[0].binding("W"), Some(&Term::int(27)));
    }

    #[test]
    fn left_recursion_dfs_vs_ids() {
        let kb = kb("p(X) :- p(X).\np(a).");
        let dfs = solve(&kb, &q("p(X)"), &SearchConfig::dfs()).unwrap();
        assert_eq!(dfs.status, SearchStatus::BudgetExhausted);
        assert!(dfs.solutions.is_empty());
        let ids = solve(&kb, &q("p(X)"), &SearchConfig::default()).unwrap();
        assert_eq!(ids.solutions[0].binding("X"), Some(&Term::atom("a")));
        assert_eq!(ids.solutions[0].depth_found, 1);
    }

    #[test]
    fn long_continuation_chains_drop_cleanly() {
        let kb = kb("path(X, Y) :- path(X, Z), edge(Z, Y).\nedge(a, b).");
        let dfs = solve(&kb, &q("path(a, b)"), &SearchConfig::dfs()).unwrap();
        assert_eq!(dfs.status, SearchStatus::BudgetExhausted);
    }

    #[test]
    fn depth_limit_counts_resolution_nodes() {
        let kb = kb("natural(0).\nnatural(s(X)) :- natural(X).");
        let cfg = SearchConfig::dfs();
        assert!(depth_limited_solve(&kb, &q("natural(s(s(0)))"), 2, &cfg).unwrap().solutions.is_empty());
        assert_eq!(depth_limited_solve(&kb, &q("natural(s(s(0)))"), 3, &cfg).unwrap().solutions.len(), 1);
        let rules_only = self::kb("p :- q.\nq :- p.");
        assert!(depth_limited_solve(&rules_only, &q("p"), 1, &cfg).unwrap().solutions.is_empty());
    }

    #[test]
    fn ids_reports_depth_exhaustion() {
        let mut text = String::from("p0.\n");
        for i in 1..=21 {
            text.push_str(&format!("p{i} :- p{}.\n", i - 1));
        }
        let kb = kb(&text);
        let r = ids_solve(&kb, &q("p19"), &SearchConfig::default()).unwrap();
        assert_eq!(r.solutions[0].depth_found, 20);
        let r = ids_solve(&kb, &q("p20"), &SearchConfig::default()).unwrap();
        assert!(r.solutions.is_empty());
        assert_eq!(r.status, SearchStatus::DepthExhausted);
    }

    #[test]
    fn ids_stops_early_on_finite_failure() {
        let r = ids_solve(&kb("green(fiona)."), &q("blue(fiona)"), &SearchConfig::default()).unwrap();
        assert_eq!(r.status, SearchStatus::Exhausted);
    }

    #[test]
    fn solutions_respect_limit_and_order() {
        let kb = kb("n(1).\nn(2).\nn(3).");
        let cfg = SearchConfig { max_solutions: 2, ..SearchConfig::dfs() };
        let r = solve(&kb, &q("n(X)"), &cfg).unwrap();
        let xs: Vec<_> = r.solutions.iter().map(|s| s.binding("X").unwrap().render()).collect();
        assert_eq!(xs, ["1", "2"]);
        assert_eq!(r.status, SearchStatus::SolutionLimit);
    }

    #[test]
    fn conjunctive_query_gets_synthetic_root() {
        let kb = kb("n(1).\nn(2).");
        let r = solve(&kb, &q("n(X), X > 1"), &SearchConfig::dfs()).unwrap();
        assert_eq!(r.solutions.len(), 1);
        match &r.solutions[0].proof {
            ProofTree::Conjunction { children } => {
                assert_eq!(children[0].label(), "n(2)");
                assert_eq!(children[1].label(), "2 > 1");
            }
            other => panic!("unexpected root {other:?}"),
        }
    }

    #[test]
    fn negation_as_failure() {
        let kb = kb("green(fiona).");
        let cfg = SearchConfig::default();
        assert!(solve(&kb, &q("\\+ green(fiona)"), &cfg).unwrap().solutions.is_empty());
        let r = solve(&kb, &q("\\+ blue(fiona)"), &cfg).unwrap();
        assert_eq!(r.solutions[0].proof, ProofTree::Naf { goal: Term::compound("blue", vec![Term::atom("fiona")]), depth_limit: 20 });
        let r = solve(&kb, &q("\\+ green(X)"), &cfg).unwrap();
        assert!(r.solutions.is_empty());
        assert!(matches!(r.diagnostics[0], EngineDiagnostic::Floundering(_)));
        let goal = Goal::Call(Term::compound("green", vec![Term::var("X")]));
        assert!(matches!(solve_naf(&kb, &goal, 20, &cfg), Err(EngineError::Floundering(_))));
    }

    #[test]
    fn arithmetic_errors_only_fail_the_branch() {
        let kb = kb("v(0).\nv(2).\nr(Y) :- v(X), Y is 4 / X.");
        let r = solve(&kb, &q("r(Y)"), &SearchConfig::dfs()).unwrap();
        assert_eq!(r.solutions.len(), 1);
        assert_eq!(r.solutions[0].binding("Y"), Some(&Term::int(2)));
        assert!(matches!(r.diagnostics[0], EngineDiagnostic::Arithmetic(_)));
    }

    #[test]
    fn unknown_predicates_fail() {
        let r = solve(&kb("a."), &q("b(1)"), &SearchConfig::dfs()).unwrap();
        assert!(r.solutions.is_empty());
        assert_eq!(r.status, SearchStatus::Exhausted);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SearchConfig { max_depth: 0, ..SearchConfig::default() };
        assert!(matches!(solve(&kb("a."), &q("a"), &cfg), Err(EngineError::InvalidConfig(_))));
        assert!(matches!(solve(&kb("a."), &[], &SearchConfig::default()), Err(EngineError::EmptyQuery)));
    }
}
