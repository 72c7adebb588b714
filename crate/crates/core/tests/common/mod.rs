//! Generators and brute-force oracles shared by the integration tests. The
//! oracles never call into the engine or the metrics code.

#![allow(dead_code)]

use std::collections::BTreeSet;

use prooflog::engine::{AnswerLabel, ProofTree};
use prooflog::metrics::ProofGraph;
use prooflog::Term;
use rand::seq::SliceRandom;
use rand::Rng;

pub const CONSTANTS: [&str; 4] = ["anne", "bob", "carl", "dave"];
pub const BASE_PREDICATES: [&str; 6] = ["big", "red", "cold", "kind", "round", "young"];

#[derive(Clone, Debug)]
pub struct Rule {
    pub id: String,
    pub head: String,
    pub body: Vec<String>,
}

/// A function-free Horn rulebase over unary predicates. Every clause has a
/// provenance id and rules are stratified, so no proof is deeper than
/// `MAX_LEVEL + 1`.
#[derive(Clone, Debug)]
pub struct Rulebase {
    pub constants: Vec<&'static str>,
    pub facts: Vec<(String, String, String)>,
    pub rules: Vec<Rule>,
}

pub const MAX_LEVEL: usize = 4;

/// Positive and `neg_` literals of every base predicate.
pub fn predicate_names() -> Vec<String> {
    BASE_PREDICATES.iter().flat_map(|p| [p.to_string(), format!("neg_{p}")]).collect()
}

pub fn random_rulebase(rng: &mut impl Rng) -> Rulebase {
    let constants: Vec<&str> = CONSTANTS[..rng.gen_range(2..=CONSTANTS.len())].to_vec();
    let names = predicate_names();
    let levels: Vec<usize> = names.iter().map(|_| rng.gen_range(0..=MAX_LEVEL)).collect();

    let mut seen = BTreeSet::new();
    let mut facts = Vec::new();
    for _ in 0..rng.gen_range(1..=12) {
        let p = names.choose(rng).unwrap().clone();
        let c = constants.choose(rng).unwrap().to_string();
        if seen.insert((p.clone(), c.clone())) {
            facts.push((format!("f{}", facts.len() + 1), p, c));
        }
    }

    let mut rules = Vec::new();
    let mut attempts = 0;
    let target = rng.gen_range(0..=8);
    while rules.len() < target && attempts < 100 {
        attempts += 1;
        let h = rng.gen_range(0..names.len());
        if levels[h] == 0 {
            continue;
        }
        let lower: Vec<usize> = (0..names.len()).filter(|&i| levels[i] < levels[h]).collect();
        if lower.is_empty() {
            continue;
        }
        let n = rng.gen_range(1..=2).min(lower.len());
        let body: Vec<String> = lower.choose_multiple(rng, n).map(|&i| names[i].clone()).collect();
        rules.push(Rule { id: format!("r{}", rules.len() + 1), head: names[h].clone(), body });
    }
    Rulebase { constants, facts, rules }
}

impl Rulebase {
    pub fn program_text(&self) -> String {
        let mut out = String::new();
        for (id, p, c) in &self.facts {
            out.push_str(&format!("% id: {id}\n{p}({c}).\n"));
        }
        for r in &self.rules {
            let body: Vec<String> = r.body.iter().map(|b| format!("{b}(X)")).collect();
            out.push_str(&format!("% id: {}\n{}(X) :- {}.\n", r.id, r.head, body.join(", ")));
        }
        out
    }

    /// Every ground atom derivable by forward chaining to a fixpoint.
    pub fn fixpoint(&self) -> BTreeSet<(String, String)> {
        let mut known: BTreeSet<(String, String)> =
            self.facts.iter().map(|(_, p, c)| (p.clone(), c.clone())).collect();
        loop {
            let mut added = false;
            for r in &self.rules {
                for c in &self.constants {
                    let c = c.to_string();
                    if r.body.iter().all(|b| known.contains(&(b.clone(), c.clone())))
                        && known.insert((r.head.clone(), c.clone()))
                    {
                        added = true;
                    }
                }
            }
            if !added {
                return known;
            }
        }
    }

    /// Three-way label of `pred(constant)` from the fixpoint.
    pub fn oracle_label(&self, known: &BTreeSet<(String, String)>, pred: &str, constant: &str) -> AnswerLabel {
        let flipped = match pred.strip_prefix("neg_") {
            Some(p) => p.to_string(),
            None => format!("neg_{pred}"),
        };
        if known.contains(&(pred.to_string(), constant.to_string())) {
            AnswerLabel::True
        } else if known.contains(&(flipped, constant.to_string())) {
            AnswerLabel::False
        } else {
            AnswerLabel::Unknown
        }
    }

    /// Every literal the corpus asks about: each predicate on each constant.
    pub fn queries(&self) -> Vec<(String, &'static str)> {
        let mut out = Vec::new();
        for p in predicate_names() {
            for &c in &self.constants {
                out.push((p.clone(), c));
            }
        }
        out
    }
}

pub fn statement(pred: &str, constant: &str) -> Term {
    Term::compound(pred, vec![Term::atom(constant)])
}

/// A random graph with labels drawn from a small alphabet, so repeated
/// labels are common. Edges only go forward, so it is acyclic.
pub fn random_graph(rng: &mut impl Rng, max_nodes: usize) -> ProofGraph {
    let mut g = ProofGraph::new();
    let n = rng.gen_range(0..=max_nodes);
    for _ in 0..n {
        let label = ["a", "b", "c", "d"].choose(rng).unwrap().to_string();
        g.add_node(label, None);
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.3) {
                g.add_edge(i, j);
            }
        }
    }
    g
}

/// Exhaustive graph edit distance with unit costs: tries every partial
/// injective node mapping from `a` into `b`.
pub fn brute_force_ged(a: &ProofGraph, b: &ProofGraph) -> u64 {
    let edges_a: BTreeSet<(usize, usize)> = a.edges.iter().copied().collect();
    let edges_b: BTreeSet<(usize, usize)> = b.edges.iter().copied().collect();
    let mut mapping: Vec<Option<usize>> = vec![None; a.nodes.len()];
    let mut used = vec![false; b.nodes.len()];
    let mut best = u64::MAX;
    enumerate(a, b, &edges_a, &edges_b, 0, &mut mapping, &mut used, &mut best);
    best
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    a: &ProofGraph,
    b: &ProofGraph,
    edges_a: &BTreeSet<(usize, usize)>,
    edges_b: &BTreeSet<(usize, usize)>,
    i: usize,
    mapping: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
    best: &mut u64,
) {
    if i == a.nodes.len() {
        *best = (*best).min(mapping_cost(a, b, edges_a, edges_b, mapping, used));
        return;
    }
    mapping[i] = None;
    enumerate(a, b, edges_a, edges_b, i + 1, mapping, used, best);
    for j in 0..b.nodes.len() {
        if !used[j] {
            used[j] = true;
            mapping[i] = Some(j);
            enumerate(a, b, edges_a, edges_b, i + 1, mapping, used, best);
            used[j] = false;
            mapping[i] = None;
        }
    }
}

fn mapping_cost(
    a: &ProofGraph,
    b: &ProofGraph,
    edges_a: &BTreeSet<(usize, usize)>,
    edges_b: &BTreeSet<(usize, usize)>,
    mapping: &[Option<usize>],
    used: &[bool],
) -> u64 {
    let mut cost = 0;
    for (i, m) in mapping.iter().enumerate() {
        match m {
            None => cost += 1,
            Some(j) if a.nodes[i].label != b.nodes[*j].label => cost += 1,
            _ => {}
        }
    }
    cost += used.iter().filter(|u| !**u).count() as u64;
    let mut covered = BTreeSet::new();
    for &(u, v) in edges_a {
        match (mapping[u], mapping[v]) {
            (Some(x), Some(y)) if edges_b.contains(&(x, y)) => {
                covered.insert((x, y));
            }
            _ => cost += 1,
        }
    }
    cost + (edges_b.len() - covered.len()) as u64
}

/// The proof in ProofWriter's annotation syntax, e.g.
/// `[(((f1 f2) -> r1))]`.
pub fn proofwriter_string(tree: &ProofTree) -> String {
    fn element(t: &ProofTree) -> String {
        let id = t.provenance().expect("corpus clauses carry ids");
        match t {
            ProofTree::Rule { children, .. } => {
                let premises: Vec<String> = children.iter().map(element).collect();
                format!("(({}) -> {id})", premises.join(" "))
            }
            _ => id.to_string(),
        }
    }
    format!("[({})]", element(tree))
}
