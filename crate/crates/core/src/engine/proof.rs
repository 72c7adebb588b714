//! Proof trees recorded by the solver and their serialized form.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parser::parse_term;
use crate::term::Term;

/// The derivation behind one answer. Every term is fully instantiated under
/// the answer's final substitution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProofTree {
    Fact {
        head: Term,
        provenance: Option<String>,
    },
    /// One child per body goal of the clause, in body order.
    Rule {
        head: Term,
        provenance: Option<String>,
        children: Vec<ProofTree>,
    },
    /// `result` holds the value computed by `is`; other built-ins carry none.
    Builtin {
        goal: Term,
        result: Option<Term>,
    },
    /// `goal` had no proof within `depth_limit` resolution levels.
    Naf {
        goal: Term,
        depth_limit: u32,
    },
    /// Synthetic root of a multi-goal query.
    Conjunction {
        children: Vec<ProofTree>,
    },
}

impl ProofTree {
    /// Resolution levels on the deepest root-to-leaf path. Built-in and
    /// negation nodes cost nothing.
    pub fn depth(&self) -> u32 {
        match self {
            ProofTree::Fact { .. } => 1,
            ProofTree::Rule { children, .. } => 1 + children.iter().map(ProofTree::depth).max().unwrap_or(0),
            ProofTree::Builtin { .. } | ProofTree::Naf { .. } => 0,
            ProofTree::Conjunction { children } => children.iter().map(ProofTree::depth).max().unwrap_or(0),
        }
    }

    pub fn children(&self) -> &[ProofTree] {
        match self {
            ProofTree::Rule { children, .. } | ProofTree::Conjunction { children } => children,
            _ => &[],
        }
    }

    pub fn children_mut(&mut self) -> Option<&mut Vec<ProofTree>> {
        match self {
            ProofTree::Rule { children, .. } | ProofTree::Conjunction { children } => Some(children),
            _ => None,
        }
    }

    /// The instantiated head or goal this node establishes.
    pub fn conclusion(&self) -> Option<&Term> {
        match self {
            ProofTree::Fact { head, .. } | ProofTree::Rule { head, .. } => Some(head),
            ProofTree::Builtin { goal, .. } | ProofTree::Naf { goal, .. } => Some(goal),
            ProofTree::Conjunction { .. } => None,
        }
    }

    pub fn provenance(&self) -> Option<&str> {
        match self {
            ProofTree::Fact { provenance, .. } | ProofTree::Rule { provenance, .. } => provenance.as_deref(),
            _ => None,
        }
    }

    /// Canonical label: the rendered conclusion, `\+ goal` for negation.
    pub fn label(&self) -> String {
        match self {
            ProofTree::Fact { head, .. } | ProofTree::Rule { head, .. } => head.render(),
            ProofTree::Builtin { goal, .. } => goal.render(),
            ProofTree::Naf { goal, .. } => Term::compound("\\+", vec![goal.clone()]).render(),
            ProofTree::Conjunction { children } => {
                children.iter().map(ProofTree::label).collect::<Vec<_>>().join(", ")
            }
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(ProofTree::size).sum::<usize>()
    }

    pub fn to_record(&self) -> ProofRecord {
        let (kind, result, depth_limit) = match self {
            ProofTree::Fact { .. } => (ProofKind::Fact, None, None),
            ProofTree::Rule { .. } => (ProofKind::Rule, None, None),
            ProofTree::Builtin { result, .. } => (ProofKind::Builtin, result.as_ref().map(Term::render), None),
            ProofTree::Naf { depth_limit, .. } => (ProofKind::Naf, None, Some(*depth_limit)),
            ProofTree::Conjunction { .. } => (ProofKind::Conjunction, None, None),
        };
        let label = match self {
            ProofTree::Naf { goal, .. } => goal.render(),
            other => other.label(),
        };
        ProofRecord {
            kind,
            label,
            provenance: self.provenance().map(str::to_string),
            result,
            depth_limit,
            children: self.children().iter().map(ProofTree::to_record).collect(),
        }
    }

    pub fn from_record(record: &ProofRecord) -> Result<ProofTree, ProofDecodeError> {
        let term = |text: &str| {
            parse_term(text).map_err(|d| ProofDecodeError::Label { label: text.to_string(), message: d.message })
        };
        let children = || record.children.iter().map(ProofTree::from_record).collect::<Result<Vec<_>, _>>();
        let leaf = |kind: &str| {
            if record.children.is_empty() {
                Ok(())
            } else {
                Err(ProofDecodeError::UnexpectedChildren(kind.to_string()))
            }
        };
        Ok(match record.kind {
            ProofKind::Fact => {
                leaf("fact")?;
                ProofTree::Fact { head: term(&record.label)?, provenance: record.provenance.clone() }
            }
            ProofKind::Rule => ProofTree::Rule {
                head: term(&record.label)?,
                provenance: record.provenance.clone(),
                children: children()?,
            },
            ProofKind::Builtin => {
                leaf("builtin")?;
                let result = record.result.as_deref().map(term).transpose()?;
                ProofTree::Builtin { goal: term(&record.label)?, result }
            }
            ProofKind::Naf => {
                leaf("naf")?;
                let depth_limit = record.depth_limit.ok_or(ProofDecodeError::MissingDepthLimit)?;
                ProofTree::Naf { goal: term(&record.label)?, depth_limit }
            }
            ProofKind::Conjunction => ProofTree::Conjunction { children: children()? },
        })
    }

    /// Compact JSON with stable field order.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("proof records always serialize")
    }

    pub fn from_json(text: &str) -> Result<ProofTree, ProofDecodeError> {
        let record: ProofRecord = serde_json::from_str(text).map_err(|e| ProofDecodeError::Json(e.to_string()))?;
        ProofTree::from_record(&record)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProofKind {
    Fact,
    Rule,
    Builtin,
    Naf,
    Conjunction,
}

/// Serialized proof node: `{kind, label, provenance, result, depth_limit,
/// children}`, optional fields omitted when empty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofRecord {
    pub kind: ProofKind,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_limit: Option<u32>,
    #[serde(default)]
    pub children: Vec<ProofRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProofDecodeError {
    #[error("malformed proof JSON: {0}")]
    Json(String),
    #[error("cannot parse label `{label}`: {message}")]
    Label { label: String, message: String },
    #[error("{0} node cannot have children")]
    UnexpectedChildren(String),
    #[error("naf node is missing its depth limit")]
    MissingDepthLimit,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(text: &str) -> Term {
        parse_term(text).unwrap()
    }

    #[test]
    fn depth_counts_resolution_levels() {
        let proof = ProofTree::Rule {
            head: t("quiet(fiona)"),
            provenance: Some("rule1".into()),
            children: vec![
                ProofTree::Fact { head: t("red(fiona)"), provenance: Some("triple1".into()) },
                ProofTree::Naf { goal: t("blue(fiona)"), depth_limit: 20 },
                ProofTree::Builtin { goal: t("2 < 3"), result: None },
            ],
        };
        assert_eq!(proof.depth(), 2);
        assert_eq!(proof.size(), 4);
    }

    #[test]
    fn record_round_trip() {
        let proof = ProofTree::Conjunction {
            children: vec![
                ProofTree::Rule {
                    head: t("overtime_wage(27)"),
                    provenance: None,
                    children: vec![
                        ProofTree::Fact { head: t("wage(18)"), provenance: Some("s1".into()) },
                        ProofTree::Builtin { goal: t("27 is 1.5 * 18"), result: Some(Term::int(27)) },
                    ],
                },
                ProofTree::Naf { goal: t("red(bob)"), depth_limit: 20 },
            ],
        };
        let json = proof.to_json();
        assert!(json.starts_with(r#"{"kind":"conjunction","label":"#));
        assert_eq!(ProofTree::from_json(&json).unwrap(), proof);
    }

    #[test]
    fn decode_rejects_bad_records() {
        assert!(ProofTree::from_json(r#"{"kind":"fact","label":"p(","children":[]}"#).is_err());
        assert!(matches!(
            ProofTree::from_json(r#"{"kind":"naf","label":"p"}"#),
            Err(ProofDecodeError::MissingDepthLimit)
        ));
    }
}
