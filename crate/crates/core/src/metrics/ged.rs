//! Exact graph edit distance by branch and bound over node mappings.
//!
//! A mapping sends each node of the first graph to a distinct node of the
//! second or deletes it; unmapped nodes of the second graph are inserted.
//! Given the mapping, edge costs follow: a first-graph edge survives when its
//! image is an edge of the second graph, every other edge is deleted or
//! inserted.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::graph::ProofGraph;

/// Per-operation costs. The default is unit cost everywhere, with free
/// substitution between identical labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EditCosts {
    pub node_insert: u64,
    pub node_delete: u64,
    pub node_substitute: u64,
    pub edge_insert: u64,
    pub edge_delete: u64,
}

impl Default for EditCosts {
    fn default() -> Self {
        EditCosts { node_insert: 1, node_delete: 1, node_substitute: 1, edge_insert: 1, edge_delete: 1 }
    }
}

/// Search nodes expanded before settling for the best mapping found so far.
pub const DEFAULT_GED_BUDGET: u64 = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GedResult {
    pub distance: u64,
    /// The distance is the true minimum. Otherwise it is the cost of a
    /// concrete edit path, hence an upper bound.
    pub exact: bool,
    pub expansions: u64,
}

const DELETED: usize = usize::MAX;

struct Problem {
    costs: EditCosts,
    n1: usize,
    n2: usize,
    labels1: Vec<usize>,
    labels2: Vec<usize>,
    label_count: usize,
    adj1: Vec<Vec<bool>>,
    adj2: Vec<Vec<bool>>,
    /// Order in which first-graph nodes are assigned.
    order: Vec<usize>,
    edges1: usize,
    edges2: usize,
}

impl Problem {
    fn new<'g>(g1: &'g ProofGraph, g2: &'g ProofGraph, costs: EditCosts) -> Problem {
        let (l1, e1) = g1.dense();
        let (l2, e2) = g2.dense();
        let mut interned: HashMap<&str, usize> = HashMap::new();
        let mut intern = |l: &'g str| {
            let next = interned.len();
            *interned.entry(l).or_insert(next)
        };
        let labels1: Vec<usize> = l1.iter().map(|&l| intern(l)).collect();
        let labels2: Vec<usize> = l2.iter().map(|&l| intern(l)).collect();
        let (n1, n2) = (labels1.len(), labels2.len());
        let matrix = |n: usize, edges: &[(usize, usize)]| {
            let mut m = vec![vec![false; n]; n];
            for &(a, b) in edges {
                m[a][b] = true;
            }
            m
        };
        let adj1 = matrix(n1, &e1);
        let adj2 = matrix(n2, &e2);
        let edges1 = adj1.iter().flatten().filter(|&&e| e).count();
        let edges2 = adj2.iter().flatten().filter(|&&e| e).count();
        let degree = |i: usize| (0..n1).filter(|&j| adj1[i][j] || adj1[j][i]).count();
        let mut order: Vec<usize> = (0..n1).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(degree(i)), i));
        Problem {
            costs,
            n1,
            n2,
            labels1,
            labels2,
            label_count: interned.len(),
            adj1,
            adj2,
            order,
            edges1,
            edges2,
        }
    }

    fn node_cost(&self, u: usize, v: usize) -> u64 {
        if v == DELETED {
            self.costs.node_delete
        } else if self.labels1[u] == self.labels2[v] {
            0
        } else {
            self.costs.node_substitute
        }
    }

    /// Cost of a complete mapping (indexed by first-graph node).
    fn total_cost(&self, mapping: &[usize]) -> u64 {
        let mut cost = 0;
        let mut used = vec![false; self.n2];
        for (u, &v) in mapping.iter().enumerate() {
            cost += self.node_cost(u, v);
            if v != DELETED {
                used[v] = true;
            }
        }
        cost += used.iter().filter(|&&x| !x).count() as u64 * self.costs.node_insert;
        let mut kept = 0u64;
        for a in 0..self.n1 {
            for b in 0..self.n1 {
                if self.adj1[a][b] {
                    let (x, y) = (mapping[a], mapping[b]);
                    if x != DELETED && y != DELETED && self.adj2[x][y] {
                        kept += 1;
                    }
                }
            }
        }
        cost + (self.edges1 as u64 - kept) * self.costs.edge_delete
            + (self.edges2 as u64 - kept) * self.costs.edge_insert
    }

    /// Label-matching mapping: equal labels first, leftovers paired in order.
    fn greedy(&self) -> Vec<usize> {
        let mut mapping = vec![DELETED; self.n1];
        let mut used = vec![false; self.n2];
        for &u in &self.order {
            if let Some(v) = (0..self.n2).find(|&v| !used[v] && self.labels2[v] == self.labels1[u]) {
                mapping[u] = v;
                used[v] = true;
            }
        }
        if self.costs.node_substitute <= self.costs.node_insert + self.costs.node_delete {
            let mut free = (0..self.n2).filter(|&v| !used[v]);
            for &u in &self.order {
                if mapping[u] == DELETED {
                    match free.next() {
                        Some(v) => mapping[u] = v,
                        None => break,
                    }
                }
            }
        }
        mapping
    }
}

struct Search<'p> {
    p: &'p Problem,
    mapping: Vec<usize>,
    used: Vec<bool>,
    /// Remaining label counts among unassigned first-graph nodes and unused
    /// second-graph nodes.
    remaining1: Vec<usize>,
    remaining2: Vec<usize>,
    /// Edges whose fate is settled on each side.
    decided1: usize,
    decided2: usize,
    best: u64,
    best_mapping: Vec<usize>,
    expansions: u64,
    budget: u64,
    out_of_budget: bool,
}

impl Search<'_> {
    fn lower_bound(&self, depth: usize) -> u64 {
        let c = &self.p.costs;
        let left1 = self.p.n1 - depth;
        let left2 = self.remaining2.iter().sum::<usize>();
        let common: usize = self.remaining1.iter().zip(&self.remaining2).map(|(a, b)| a.min(b)).sum();
        let node_ops = left1.max(left2) - common;
        let node_min = c.node_insert.min(c.node_delete).min(c.node_substitute);
        let open1 = self.p.edges1 - self.decided1;
        let open2 = self.p.edges2 - self.decided2;
        let edge_min = c.edge_insert.min(c.edge_delete);
        node_ops as u64 * node_min + open1.abs_diff(open2) as u64 * edge_min
    }

    /// Edge cost incurred by assigning `u -> v` given the earlier assignments,
    /// plus the number of newly settled edges on each side.
    fn edge_delta(&self, depth: usize, u: usize, v: usize) -> (u64, usize, usize) {
        let p = self.p;
        let mut cost = 0;
        let mut settled1 = 0;
        let mut settled2 = 0;
        let pairs = std::iter::once(u).chain(p.order[..depth].iter().copied());
        for w in pairs {
            let x = if w == u { v } else { self.mapping[w] };
            let directions: &[(usize, usize, usize, usize)] =
                if w == u { &[(u, u, v, v)] } else { &[(u, w, v, x), (w, u, x, v)] };
            for &(a, b, ia, ib) in directions {
                if p.adj1[a][b] {
                    settled1 += 1;
                    if ia == DELETED || ib == DELETED || !p.adj2[ia][ib] {
                        cost += p.costs.edge_delete;
                    }
                }
                if ia != DELETED && ib != DELETED && p.adj2[ia][ib] {
                    settled2 += 1;
                    if !p.adj1[a][b] {
                        cost += p.costs.edge_insert;
                    }
                }
            }
        }
        (cost, settled1, settled2)
    }

    fn run(&mut self, depth: usize, cost: u64) {
        if self.out_of_budget {
            return;
        }
        if depth == self.p.n1 {
            let inserted: usize = self.remaining2.iter().sum();
            let total = cost
                + inserted as u64 * self.p.costs.node_insert
                + (self.p.edges2 - self.decided2) as u64 * self.p.costs.edge_insert;
            if total < self.best {
                self.best = total;
                self.best_mapping = self.mapping.clone();
            }
            return;
        }
        self.expansions += 1;
        if self.expansions > self.budget {
            self.out_of_budget = true;
            return;
        }
        let u = self.p.order[depth];
        let label = self.p.labels1[u];
        let mut candidates: Vec<usize> = (0..self.p.n2).filter(|&v| !self.used[v]).collect();
        candidates.sort_by_key(|&v| (self.p.labels2[v] != label, v));
        candidates.push(DELETED);
        self.remaining1[label] -= 1;
        for v in candidates {
            let (edge_cost, s1, s2) = self.edge_delta(depth, u, v);
            let next = cost + self.p.node_cost(u, v) + edge_cost;
            self.mapping[u] = v;
            if v != DELETED {
                self.used[v] = true;
                self.remaining2[self.p.labels2[v]] -= 1;
            }
            self.decided1 += s1;
            self.decided2 += s2;
            if next + self.lower_bound(depth + 1) < self.best {
                self.run(depth + 1, next);
            }
            self.decided1 -= s1;
            self.decided2 -= s2;
            if v != DELETED {
                self.used[v] = false;
                self.remaining2[self.p.labels2[v]] += 1;
            }
            self.mapping[u] = DELETED;
            if self.best == 0 || self.out_of_budget {
                break;
            }
        }
        self.remaining1[label] += 1;
    }
}

/// Edit distance from `g1` to `g2`, exhaustive within `budget` expansions.
pub fn ged(g1: &ProofGraph, g2: &ProofGraph, costs: &EditCosts, budget: u64) -> GedResult {
    let problem = Problem::new(g1, g2, *costs);
    let greedy = problem.greedy();
    let upper = problem.total_cost(&greedy);
    let mut remaining1 = vec![0; problem.label_count];
    let mut remaining2 = vec![0; problem.label_count];
    for &l in &problem.labels1 {
        remaining1[l] += 1;
    }
    for &l in &problem.labels2 {
        remaining2[l] += 1;
    }
    let mut search = Search {
        p: &problem,
        mapping: vec![DELETED; problem.n1],
        used: vec![false; problem.n2],
        remaining1,
        remaining2,
        decided1: 0,
        decided2: 0,
        best: upper,
        best_mapping: greedy,
        expansions: 0,
        budget,
        out_of_budget: false,
    };
    if upper > 0 && search.lower_bound(0) < upper {
        search.run(0, 0);
    }
    debug_assert_eq!(problem.total_cost(&search.best_mapping), search.best);
    GedResult { distance: search.best, exact: !search.out_of_budget, expansions: search.expansions }
}
