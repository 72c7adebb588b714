//! Proof-graph scoring: normalized edit-distance similarity and exact match.

mod ged;
mod graph;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

pub use ged::{ged, EditCosts, GedResult, DEFAULT_GED_BUDGET};
pub use graph::{canonical_label, tree_to_dag, GraphNode, Labeling, ProofGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("proof node `{0}` has no provenance id")]
    MissingProvenance(String),
    #[error("invalid proof graph: {0}")]
    InvalidGraph(String),
    #[error("no gold proofs to compare against")]
    EmptyGolds,
}

/// `1 - distance / max(|N_p| + |E_p|, |N_g| + |E_g|)`, clamped to [0, 1].
pub fn similarity_from_distance(distance: u64, pred: &ProofGraph, gold: &ProofGraph) -> BigRational {
    let denominator = pred.size().max(gold.size());
    if denominator == 0 {
        return BigRational::one();
    }
    let ratio = BigRational::new(BigInt::from(distance), BigInt::from(denominator));
    let value = BigRational::one() - ratio;
    if value < BigRational::zero() {
        BigRational::zero()
    } else {
        value
    }
}

/// Similarity between predicted and gold proof graphs; zero when the
/// predicted answer is wrong.
pub fn proof_similarity(pred: &ProofGraph, gold: &ProofGraph, answer_correct: bool, costs: &EditCosts) -> BigRational {
    score_proof(pred, gold, answer_correct, costs, DEFAULT_GED_BUDGET).similarity
}

/// 1 iff the answer is right and some label-preserving bijection maps the
/// predicted edges exactly onto the gold edges.
pub fn proof_exact_match(pred: &ProofGraph, gold: &ProofGraph, answer_correct: bool) -> bool {
    answer_correct && isomorphic(pred, gold)
}

fn isomorphic(a: &ProofGraph, b: &ProofGraph) -> bool {
    if a.nodes.len() != b.nodes.len() || a.edges.len() != b.edges.len() {
        return false;
    }
    let mut la = a.labels();
    let mut lb = b.labels();
    la.sort_unstable();
    lb.sort_unstable();
    if la != lb {
        return false;
    }
    // With distinct labels the bijection is forced.
    if la.windows(2).all(|w| w[0] != w[1]) {
        return a.labeled_edges() == b.labeled_edges();
    }
    let r = ged(a, b, &EditCosts::default(), u64::MAX);
    r.distance == 0
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProofScore {
    #[serde(serialize_with = "serialize_ratio")]
    pub similarity: BigRational,
    pub exact_match: bool,
    /// Edit distance, present whenever the answer was right.
    pub distance: Option<u64>,
    /// False when the distance is only an upper bound.
    pub distance_exact: bool,
}

/// Similarity and exact match in one pass.
pub fn score_proof(
    pred: &ProofGraph,
    gold: &ProofGraph,
    answer_correct: bool,
    costs: &EditCosts,
    budget: u64,
) -> ProofScore {
    if !answer_correct {
        return ProofScore { similarity: BigRational::zero(), exact_match: false, distance: None, distance_exact: true };
    }
    let r = ged(pred, gold, costs, budget);
    let exact_match = r.distance == 0 || (!r.exact && isomorphic(pred, gold));
    let similarity = if exact_match { BigRational::one() } else { similarity_from_distance(r.distance, pred, gold) };
    ProofScore { similarity, exact_match, distance: Some(if exact_match { 0 } else { r.distance }), distance_exact: r.exact || exact_match }
}

/// The most favorable score over several valid gold proofs, first wins on ties.
pub fn best_gold_score(
    pred: &ProofGraph,
    golds: &[ProofGraph],
    answer_correct: bool,
    costs: &EditCosts,
    budget: u64,
) -> Result<ProofScore, MetricsError> {
    let mut best: Option<ProofScore> = None;
    for gold in golds {
        let s = score_proof(pred, gold, answer_correct, costs, budget);
        if best.as_ref().is_none_or(|b| (s.similarity.clone(), s.exact_match) > (b.similarity.clone(), b.exact_match)) {
            best = Some(s);
        }
    }
    best.ok_or(MetricsError::EmptyGolds)
}

/// Max over golds of `proof_similarity`.
pub fn best_gold_similarity(
    pred: &ProofGraph,
    golds: &[ProofGraph],
    answer_correct: bool,
    costs: &EditCosts,
) -> Result<BigRational, MetricsError> {
    best_gold_score(pred, golds, answer_correct, costs, DEFAULT_GED_BUDGET).map(|s| s.similarity)
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

pub(crate) fn serialize_ratio<S: serde::Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(ratio_to_f64(r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(labels: &[&str], edges: &[(usize, usize)]) -> ProofGraph {
        let mut g = ProofGraph::new();
        for l in labels {
            g.add_node(*l, None);
        }
        for &(a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn similarity_examples() {
        let full = graph(&["red", "rough", "quiet"], &[(0, 2), (1, 2)]);
        let small = graph(&["red", "quiet"], &[(0, 1)]);
        let costs = EditCosts::default();
        assert_eq!(proof_similarity(&full, &full, true, &costs), BigRational::one());
        assert_eq!(proof_similarity(&full, &full, false, &costs), BigRational::zero());
        assert_eq!(proof_similarity(&small, &full, true, &costs), r(3, 5));
        let empty = ProofGraph::new();
        assert_eq!(proof_similarity(&empty, &empty, true, &costs), BigRational::one());
    }

    #[test]
    fn similarity_is_clamped() {
        let a = graph(&["a"], &[]);
        let b = graph(&["b"], &[]);
        assert_eq!(similarity_from_distance(5, &a, &b), BigRational::zero());
    }

    #[test]
    fn exact_match_cases() {
        let g = graph(&["a", "b", "c"], &[(0, 2), (1, 2)]);
        assert!(proof_exact_match(&g, &g, true));
        assert!(!proof_exact_match(&g, &g, false));
        assert!(!proof_exact_match(&g, &graph(&["a", "b", "c"], &[(0, 2)]), true));
        assert!(!proof_exact_match(&g, &graph(&["a", "b", "d"], &[(0, 2), (1, 2)]), true));
        let permuted = graph(&["c", "a", "b"], &[(1, 0), (2, 0)]);
        assert!(proof_exact_match(&g, &permuted, true));
    }

    #[test]
    fn best_gold() {
        let a = graph(&["a"], &[]);
        let b = graph(&["b"], &[]);
        let costs = EditCosts::default();
        assert_eq!(best_gold_similarity(&a, &[b.clone(), a.clone()], true, &costs).unwrap(), BigRational::one());
        assert_eq!(best_gold_similarity(&a, &[a.clone()], false, &costs).unwrap(), BigRational::zero());
        assert_eq!(best_gold_similarity(&a, &[], true, &costs), Err(MetricsError::EmptyGolds));
    }
}
