//! Three-way answers under the open-world reading: a statement is False only
//! when its `neg_` counterpart is provable.

use serde::{Deserialize, Serialize};

use super::proof::ProofTree;
use super::{solve, EngineDiagnostic, EngineError, SearchConfig};
use crate::clause::Goal;
use crate::term::Term;

pub const NEGATION_PREFIX: &str = "neg_";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnswerLabel {
    True,
    False,
    Unknown,
}

impl AnswerLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            AnswerLabel::True => "True",
            AnswerLabel::False => "False",
            AnswerLabel::Unknown => "Unknown",
        }
    }
}

impl std::fmt::Display for AnswerLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AnswerLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "true" | "yes" => Ok(AnswerLabel::True),
            "false" | "no" => Ok(AnswerLabel::False),
            "unknown" => Ok(AnswerLabel::Unknown),
            other => Err(format!("unrecognized answer label `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub label: AnswerLabel,
    pub proof: Option<ProofTree>,
    /// Both the statement and its counterpart are provable.
    pub inconsistent: bool,
    /// One of the two searches ran out of steps, so Unknown may be premature.
    pub budget_exhausted: bool,
    pub diagnostics: Vec<EngineDiagnostic>,
}

/// The literal with the `neg_` prefix toggled: `green(bob)` and
/// `neg_green(bob)` are each other's counterparts.
pub fn counterpart(statement: &Term) -> Option<Term> {
    let (name, _) = statement.functor()?;
    let flipped = match name.strip_prefix(NEGATION_PREFIX) {
        Some(positive) if !positive.is_empty() => positive.to_string(),
        _ => format!("{NEGATION_PREFIX}{name}"),
    };
    Some(Term::compound(flipped, statement.args().to_vec()))
}

pub fn classify_answer(
    kb: &crate::clause::KnowledgeBase,
    statement: &Term,
    cfg: &SearchConfig,
) -> Result<Classification, EngineError> {
    let other = counterpart(statement).ok_or_else(|| EngineError::InvalidStatement(statement.render()))?;
    let cfg = SearchConfig { max_solutions: 1, ..cfg.clone() };
    let positive = solve(kb, &[Goal::Call(statement.clone())], &cfg)?;
    let negative = solve(kb, &[Goal::Call(other)], &cfg)?;
    let budget_exhausted = positive.budget_exhausted() || negative.budget_exhausted();
    let mut diagnostics = positive.diagnostics;
    for d in negative.diagnostics {
        if !diagnostics.contains(&d) {
            diagnostics.push(d);
        }
    }
    let pos = positive.solutions.into_iter().next().map(|s| s.proof);
    let neg = negative.solutions.into_iter().next().map(|s| s.proof);
    let (label, proof, inconsistent) = match (pos, neg) {
        (Some(p), neg) => (AnswerLabel::True, Some(p), neg.is_some()),
        (None, Some(n)) => (AnswerLabel::False, Some(n), false),
        (None, None) => (AnswerLabel::Unknown, None, false),
    };
    Ok(Classification { label, proof, inconsistent, budget_exhausted, diagnostics })
}
