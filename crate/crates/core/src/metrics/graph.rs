//! Proof graphs: proof trees with identical conclusions merged.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::engine::ProofTree;
use crate::parser::parse_term;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: usize,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

/// Nodes plus premise-to-conclusion edges.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProofGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Labeling {
    /// Nodes are named by the source-statement id of their clause.
    #[default]
    ByProvenance,
    /// Nodes are named by the rendered conclusion.
    ByRender,
}

impl std::str::FromStr for Labeling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "by_provenance" | "provenance" => Ok(Labeling::ByProvenance),
            "by_render" | "render" => Ok(Labeling::ByRender),
            other => Err(format!("unknown labeling `{other}`")),
        }
    }
}

impl ProofGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a node with the next free id.
    pub fn add_node(&mut self, label: impl Into<String>, provenance: Option<String>) -> usize {
        let id = self.nodes.iter().map(|n| n.id + 1).max().unwrap_or(0);
        self.nodes.push(GraphNode { id, label: label.into(), provenance });
        id
    }

    /// Adds `from -> to` unless it is already present.
    pub fn add_edge(&mut self, from: usize, to: usize) {
        if !self.edges.contains(&(from, to)) {
            self.edges.push((from, to));
        }
    }

    /// |N| + |E|, the normalizer in the similarity score.
    pub fn size(&self) -> usize {
        self.nodes.len() + self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.nodes.iter().map(|n| n.label.as_str()).collect()
    }

    /// Edges as (premise label, conclusion label) pairs.
    pub fn labeled_edges(&self) -> BTreeSet<(&str, &str)> {
        let labels: HashMap<usize, &str> = self.nodes.iter().map(|n| (n.id, n.label.as_str())).collect();
        self.edges.iter().filter_map(|(a, b)| Some((*labels.get(a)?, *labels.get(b)?))).collect()
    }

    /// Nodes indexed 0..n with edges rewritten to those positions.
    pub(crate) fn dense(&self) -> (Vec<&str>, Vec<(usize, usize)>) {
        let position: HashMap<usize, usize> = self.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let labels = self.nodes.iter().map(|n| n.label.as_str()).collect();
        let edges = self.edges.iter().filter_map(|(a, b)| Some((*position.get(a)?, *position.get(b)?))).collect();
        (labels, edges)
    }

    /// Checks unique ids, dangling or duplicate edges, and cycles.
    pub fn validate(&self) -> Result<(), MetricsError> {
        let mut ids = BTreeSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id) {
                return Err(MetricsError::InvalidGraph(format!("duplicate node id {}", n.id)));
            }
        }
        let mut seen = BTreeSet::new();
        for &(a, b) in &self.edges {
            if !ids.contains(&a) || !ids.contains(&b) {
                return Err(MetricsError::InvalidGraph(format!("edge {a} -> {b} references a missing node")));
            }
            if !seen.insert((a, b)) {
                return Err(MetricsError::InvalidGraph(format!("duplicate edge {a} -> {b}")));
            }
        }
        if !self.is_acyclic() {
            return Err(MetricsError::InvalidGraph("graph has a cycle".into()));
        }
        Ok(())
    }

    pub fn is_acyclic(&self) -> bool {
        let (labels, edges) = self.dense();
        let n = labels.len();
        let mut indegree = vec![0usize; n];
        let mut out = vec![Vec::new(); n];
        for &(a, b) in &edges {
            out[a].push(b);
            indegree[b] += 1;
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut visited = 0;
        while let Some(i) = ready.pop() {
            visited += 1;
            for &j in &out[i] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.push(j);
                }
            }
        }
        visited == n
    }

    /// Rewrites every label with `canonical_label`.
    pub fn canonicalized(&self) -> ProofGraph {
        let mut g = self.clone();
        for n in &mut g.nodes {
            n.label = canonical_label(&n.label);
        }
        g
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graphs always serialize")
    }

    pub fn from_json(text: &str) -> Result<ProofGraph, MetricsError> {
        let g: ProofGraph = serde_json::from_str(text).map_err(|e| MetricsError::InvalidGraph(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }
}

/// Canonical text for a node label: a term label is re-rendered, anything
/// else has its whitespace collapsed.
pub fn canonical_label(text: &str) -> String {
    let trimmed = text.trim().trim_end_matches('.');
    match parse_term(trimmed) {
        Ok(t) => t.render(),
        Err(_) => text.split_whitespace().collect::<Vec<_>>().join(" "),
    }
}

/// Converts a proof tree into a DAG. Nodes with the same label merge unless
/// the merge would close a cycle, in which case the repeat stays a separate
/// node. Conjunction roots are dropped; built-in and negation nodes are
/// dropped under provenance labeling.
pub fn tree_to_dag(proof: &ProofTree, labeling: Labeling) -> Result<ProofGraph, MetricsError> {
    let mut builder = Builder { graph: ProofGraph::new(), by_label: HashMap::new(), reach: Vec::new() };
    builder.visit(proof, labeling)?;
    Ok(builder.graph)
}

struct Builder {
    graph: ProofGraph,
    by_label: HashMap<String, Vec<usize>>,
    /// reach[i]: nodes reachable from i along edges (i excluded).
    reach: Vec<BTreeSet<usize>>,
}

impl Builder {
    fn visit(&mut self, node: &ProofTree, labeling: Labeling) -> Result<Option<usize>, MetricsError> {
        let mut premises = Vec::new();
        for child in node.children() {
            if let Some(id) = self.visit(child, labeling)? {
                premises.push(id);
            }
        }
        let (label, provenance) = match (node, labeling) {
            (ProofTree::Conjunction { .. }, _) => return Ok(None),
            (ProofTree::Builtin { .. } | ProofTree::Naf { .. }, Labeling::ByProvenance) => return Ok(None),
            (ProofTree::Fact { provenance, .. } | ProofTree::Rule { provenance, .. }, Labeling::ByProvenance) => {
                match provenance {
                    Some(p) => (p.clone(), Some(p.clone())),
                    None => return Err(MetricsError::MissingProvenance(node.label())),
                }
            }
            (_, Labeling::ByRender) => (node.label(), node.provenance().map(str::to_string)),
        };
        // A premise must not be reachable from its conclusion.
        let reusable = self.by_label.get(&label).and_then(|ids| {
            ids.iter().copied().find(|&id| premises.iter().all(|&p| p != id && !self.reach[id].contains(&p)))
        });
        let id = match reusable {
            Some(id) => id,
            None => {
                let id = self.graph.add_node(label.clone(), provenance);
                self.by_label.entry(label).or_default().push(id);
                self.reach.push(BTreeSet::new());
                id
            }
        };
        for p in premises {
            self.graph.add_edge(p, id);
            let mut downstream = self.reach[id].clone();
            downstream.insert(id);
            // Everything that reaches p now also reaches id and beyond.
            for i in 0..self.reach.len() {
                if i == p || self.reach[i].contains(&p) {
                    self.reach[i].extend(downstream.iter().copied());
                }
            }
        }
        Ok(Some(id))
    }
}
