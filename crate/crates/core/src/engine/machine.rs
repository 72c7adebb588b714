//! SLD resolution with an explicit goal continuation, a choice-point stack
//! and a trail. Proof nodes are kept in an arena that is truncated on
//! backtracking, so at any solution the arena holds exactly the nodes of
//! the current derivation.

use std::cell::Cell;
use std::rc::Rc;

use super::builtins::run_builtin;
use super::proof::ProofTree;
use super::{EngineDiagnostic, SearchConfig, Solution};
use crate::clause::{Goal, KnowledgeBase};
use crate::subst::{apply, unify_in_place, Substitution, TermError};
use crate::term::{Term, Var};

const MAX_DIAGNOSTICS: usize = 64;

/// Resolution-step counter shared by a search and its negation sub-searches.
pub(crate) struct Budget {
    used: Cell<u64>,
    limit: u64,
    exhausted: Cell<bool>,
}

impl Budget {
    pub fn new(limit: u64) -> Self {
        Budget { used: Cell::new(0), limit, exhausted: Cell::new(false) }
    }

    fn tick(&self) -> bool {
        if self.used.get() >= self.limit {
            self.exhausted.set(true);
            return false;
        }
        self.used.set(self.used.get() + 1);
        true
    }

    pub fn used(&self) -> u64 {
        self.used.get()
    }

    pub fn exhausted(&self) -> bool {
        self.exhausted.get()
    }
}

struct Frame {
    goal: Goal,
    depth: u32,
    parent: Option<u32>,
    position: u32,
    next: Cont,
}

type Cont = Option<Rc<Frame>>;

// Left recursion under DFS can grow a continuation chain to millions of
// frames; unlink it iteratively so dropping it cannot overflow the stack.
impl Drop for Frame {
    fn drop(&mut self) {
        let mut next = self.next.take();
        while let Some(rc) = next {
            match Rc::try_unwrap(rc) {
                Ok(mut frame) => next = frame.next.take(),
                Err(_) => break,
            }
        }
    }
}

enum NodeKind {
    Clause { clause: usize },
    Builtin { result: Option<Term> },
    Naf { depth_limit: u32 },
    Conjunction,
}

struct Node {
    kind: NodeKind,
    term: Term,
    parent: Option<u32>,
    position: u32,
}

struct ChoicePoint<'a> {
    goal: Term,
    depth: u32,
    parent: Option<u32>,
    position: u32,
    next: Cont,
    alternatives: &'a [usize],
    next_alternative: usize,
    trail_mark: usize,
    arena_mark: usize,
}

pub(crate) struct Machine<'a> {
    kb: &'a KnowledgeBase,
    cfg: &'a SearchConfig,
    limit: Option<u32>,
    budget: &'a Budget,
    negation_nesting: u32,
    bindings: Substitution,
    trail: Vec<Var>,
    arena: Vec<Node>,
    choices: Vec<ChoicePoint<'a>>,
    cont: Cont,
    generation: u32,
    query_vars: Vec<Var>,
    started: bool,
    pub depth_cut: bool,
    pub diagnostics: Vec<EngineDiagnostic>,
}

impl<'a> Machine<'a> {
    pub fn new(
        kb: &'a KnowledgeBase,
        cfg: &'a SearchConfig,
        limit: Option<u32>,
        budget: &'a Budget,
        negation_nesting: u32,
        query: &[Goal],
    ) -> Self {
        let mut machine = Machine {
            kb,
            cfg,
            limit,
            budget,
            negation_nesting,
            bindings: Substitution::new(),
            trail: Vec::new(),
            arena: Vec::new(),
            choices: Vec::new(),
            cont: None,
            generation: 0,
            query_vars: crate::clause::goal_variables(query)
                .into_iter()
                .filter(|v| !v.name().starts_with('_'))
                .collect(),
            started: false,
            depth_cut: false,
            diagnostics: Vec::new(),
        };
        let parent = if query.len() > 1 {
            machine.arena.push(Node { kind: NodeKind::Conjunction, term: Term::atom("true"), parent: None, position: 0 });
            Some(0)
        } else {
            None
        };
        let mut cont = None;
        for (i, goal) in query.iter().enumerate().rev() {
            cont = Some(Rc::new(Frame { goal: goal.clone(), depth: 1, parent, position: i as u32, next: cont }));
        }
        machine.cont = cont;
        machine
    }

    /// Next solution in depth-first order, or `None` when the space (within
    /// the depth limit) is exhausted or the budget ran out.
    pub fn next_solution(&mut self) -> Option<Solution> {
        loop {
            if self.started {
                if !self.backtrack() {
                    return None;
                }
            }
            self.started = true;
            if !self.run() {
                return None;
            }
            match self.extract() {
                Ok(solution) => return Some(solution),
                Err(e) => self.diagnose(EngineDiagnostic::CyclicTerm(e.to_string())),
            }
        }
    }

    fn run(&mut self) -> bool {
        loop {
            if self.budget.exhausted() {
                return false;
            }
            let Some(frame) = self.cont.take() else {
                return true;
            };
            if !self.step(&frame) && !self.backtrack() {
                return false;
            }
        }
    }

    fn step(&mut self, frame: &Frame) -> bool {
        match &frame.goal {
            Goal::Call(term) => {
                if let Some(limit) = self.limit {
                    if frame.depth > limit {
                        self.depth_cut = true;
                        return false;
                    }
                }
                let (name, arity) = match self.bindings.walk(term).functor() {
                    Some(key) => key,
                    None => {
                        let message = format!("goal {} is not callable", self.render(term));
                        self.diagnose(EngineDiagnostic::Instantiation(message));
                        return false;
                    }
                };
                let alternatives = self.kb.lookup(name, arity);
                let choice = ChoicePoint {
                    goal: term.clone(),
                    depth: frame.depth,
                    parent: frame.parent,
                    position: frame.position,
                    next: frame.next.clone(),
                    alternatives,
                    next_alternative: 0,
                    trail_mark: 0,
                    arena_mark: 0,
                };
                self.resolve(choice)
            }
            Goal::Builtin(b) => {
                match run_builtin(b, &mut self.bindings, &mut self.trail, self.cfg.occurs_check) {
                    Ok(Some(result)) => {
                        self.arena.push(Node {
                            kind: NodeKind::Builtin { result },
                            term: b.to_term(),
                            parent: frame.parent,
                            position: frame.position,
                        });
                        self.cont = frame.next.clone();
                        true
                    }
                    Ok(None) => false,
                    Err(e) => {
                        self.diagnose(EngineDiagnostic::Arithmetic(e.to_string()));
                        false
                    }
                }
            }
            Goal::Not(inner) => self.negate(inner, frame),
        }
    }

    /// Tries the remaining clause alternatives of `choice`. On success a
    /// choice point for the rest is left behind.
    fn resolve(&mut self, mut choice: ChoicePoint<'a>) -> bool {
        choice.trail_mark = self.trail.len();
        choice.arena_mark = self.arena.len();
        while choice.next_alternative < choice.alternatives.len() {
            if !self.budget.tick() {
                return false;
            }
            let position = choice.alternatives[choice.next_alternative];
            choice.next_alternative += 1;
            let clause = self.kb.clause(position);
            self.generation += 1;
            let generation = self.generation;
            let head = clause.head().renamed(generation);
            if !unify_in_place(&choice.goal, &head, &mut self.bindings, self.cfg.occurs_check, &mut self.trail) {
                continue;
            }
            let index = self.arena.len() as u32;
            self.arena.push(Node {
                kind: NodeKind::Clause { clause: position },
                term: choice.goal.clone(),
                parent: choice.parent,
                position: choice.position,
            });
            let mut cont = choice.next.clone();
            for (i, goal) in clause.body().iter().enumerate().rev() {
                cont = Some(Rc::new(Frame {
                    goal: goal.renamed(generation),
                    depth: choice.depth + 1,
                    parent: Some(index),
                    position: i as u32,
                    next: cont,
                }));
            }
            self.cont = cont;
            if choice.next_alternative < choice.alternatives.len() {
                self.choices.push(choice);
            }
            return true;
        }
        false
    }

    fn backtrack(&mut self) -> bool {
        while let Some(choice) = self.choices.pop() {
            if self.budget.exhausted() {
                return false;
            }
            self.bindings.undo_to(&mut self.trail, choice.trail_mark);
            self.arena.truncate(choice.arena_mark);
            if self.resolve(choice) {
                return true;
            }
        }
        false
    }

    fn negate(&mut self, inner: &Goal, frame: &Frame) -> bool {
        let goal = match apply(&self.bindings, &inner.to_term()) {
            Ok(t) => t,
            Err(e) => {
                self.diagnose(EngineDiagnostic::CyclicTerm(e.to_string()));
                return false;
            }
        };
        if !goal.is_ground() {
            self.diagnose(EngineDiagnostic::Floundering(goal.render()));
            return false;
        }
        if self.negation_nesting >= self.cfg.max_depth {
            self.diagnose(EngineDiagnostic::NegationNesting(goal.render()));
            return false;
        }
        let depth_limit = self.cfg.max_depth;
        let inner_goal = match Goal::from_term(&goal) {
            Ok(g) => g,
            Err(e) => {
                self.diagnose(EngineDiagnostic::Instantiation(e.to_string()));
                return false;
            }
        };
        let found = {
            let query = [inner_goal];
            let mut sub = Machine::new(
                self.kb,
                self.cfg,
                Some(depth_limit),
                self.budget,
                self.negation_nesting + 1,
                &query,
            );
            let found = sub.next_solution().is_some();
            for d in sub.diagnostics {
                self.diagnose(d);
            }
            found
        };
        if found || self.budget.exhausted() {
            return false;
        }
        self.arena.push(Node {
            kind: NodeKind::Naf { depth_limit },
            term: goal,
            parent: frame.parent,
            position: frame.position,
        });
        self.cont = frame.next.clone();
        true
    }

    fn diagnose(&mut self, diagnostic: EngineDiagnostic) {
        if self.diagnostics.len() < MAX_DIAGNOSTICS && !self.diagnostics.contains(&diagnostic) {
            self.diagnostics.push(diagnostic);
        }
    }

    fn render(&self, term: &Term) -> String {
        apply(&self.bindings, term).unwrap_or_else(|_| term.clone()).render()
    }

    fn extract(&self) -> Result<Solution, TermError> {
        let mut children: Vec<Vec<(u32, usize)>> = vec![Vec::new(); self.arena.len()];
        let mut root = None;
        for (i, node) in self.arena.iter().enumerate() {
            match node.parent {
                Some(p) => children[p as usize].push((node.position, i)),
                None => root = Some(i),
            }
        }
        for list in &mut children {
            list.sort_unstable();
        }
        let root = root.expect("a solved query has a root proof node");
        let proof = self.build(root, &children)?;
        let bindings = self
            .query_vars
            .iter()
            .map(|v| Ok((v.clone(), apply(&self.bindings, &Term::Var(v.clone()))?)))
            .collect::<Result<Vec<_>, TermError>>()?;
        Ok(Solution { bindings, depth_found: proof.depth(), proof, steps_used: self.budget.used() })
    }

    fn build(&self, index: usize, children: &[Vec<(u32, usize)>]) -> Result<ProofTree, TermError> {
        let node = &self.arena[index];
        let kids = || {
            children[index].iter().map(|&(_, c)| self.build(c, children)).collect::<Result<Vec<_>, _>>()
        };
        Ok(match &node.kind {
            NodeKind::Clause { clause } => {
                let clause = self.kb.clause(*clause);
                let head = apply(&self.bindings, &node.term)?;
                let provenance = clause.provenance().map(str::to_string);
                if clause.is_fact() {
                    ProofTree::Fact { head, provenance }
                } else {
                    ProofTree::Rule { head, provenance, children: kids()? }
                }
            }
            NodeKind::Builtin { result } => ProofTree::Builtin {
                goal: apply(&self.bindings, &node.term)?,
                result: result.as_ref().map(|r| apply(&self.bindings, r)).transpose()?,
            },
            NodeKind::Naf { depth_limit } => ProofTree::Naf { goal: node.term.clone(), depth_limit: *depth_limit },
            NodeKind::Conjunction => ProofTree::Conjunction { children: kids()? },
        })
    }
}
