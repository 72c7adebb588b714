//! Gold proof graphs from dataset annotations: ProofWriter proof strings and
//! PrOntoQA chains of thought.

use std::collections::HashMap;

use crate::metrics::ProofGraph;

/// Parses a ProofWriter proof string such as
/// `[(((triple2 triple6) -> rule4))] OR [(triple1)]` into one graph per
/// alternative. Leaves are statement ids; `(premises) -> rule` adds edges
/// from each premise to the rule node, which then stands for the derived
/// fact. `NAF` markers carry no statement and are skipped.
pub fn parse_proofwriter_proofs(text: &str) -> Result<Vec<ProofGraph>, String> {
    let trimmed = text.trim();
    if trimmed.is_empty() || trimmed == "[]" || trimmed.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    let tokens = lex(trimmed)?;
    let mut graphs = Vec::new();
    for alternative in split_alternatives(&tokens) {
        let mut p = ProofParser { tokens: alternative, pos: 0, builder: GraphBuilder::default() };
        while p.pos < p.tokens.len() {
            p.element()?;
        }
        graphs.push(p.builder.graph);
    }
    Ok(graphs)
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Open,
    Close,
    Arrow,
    Or,
    Ident(String),
}

fn lex(text: &str) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '(' => out.push(Tok::Open),
            ')' => out.push(Tok::Close),
            // Brackets only wrap the whole list of alternatives.
            '[' | ']' => {}
            '-' if chars.get(i + 1) == Some(&'>') => {
                out.push(Tok::Arrow);
                i += 1;
            }
            c if c.is_whitespace() || c == ',' => {}
            c if c.is_alphanumeric() || c == '_' || c == '@' || c == ':' => {
                let start = i;
                while i + 1 < chars.len() && (chars[i + 1].is_alphanumeric() || matches!(chars[i + 1], '_' | '@' | ':' | '-'))
                    && !(chars[i + 1] == '-' && chars.get(i + 2) == Some(&'>'))
                {
                    i += 1;
                }
                let word: String = chars[start..=i].iter().collect();
                out.push(if word == "OR" { Tok::Or } else { Tok::Ident(word) });
            }
            other => return Err(format!("unexpected `{other}` in proof string")),
        }
        i += 1;
    }
    Ok(out)
}

fn split_alternatives(tokens: &[Tok]) -> Vec<&[Tok]> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        match t {
            Tok::Open => depth += 1,
            Tok::Close => depth -= 1,
            Tok::Or if depth == 0 => {
                out.push(&tokens[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&tokens[start..]);
    out.retain(|alt| alt.iter().any(|t| matches!(t, Tok::Ident(w) if w != "NAF")));
    out
}

struct ProofParser<'a> {
    tokens: &'a [Tok],
    pos: usize,
    builder: GraphBuilder,
}

impl ProofParser<'_> {
    /// One element; returns the nodes it contributes as premises.
    fn element(&mut self) -> Result<Vec<usize>, String> {
        match self.tokens.get(self.pos).cloned() {
            Some(Tok::Ident(word)) => {
                self.pos += 1;
                // `@0:`-style prefixes and NAF carry no statement.
                if word == "NAF" || word == "CWA" || word.starts_with('@') {
                    return Ok(Vec::new());
                }
                Ok(vec![self.builder.node(&word)])
            }
            Some(Tok::Open) => {
                self.pos += 1;
                let mut premises = Vec::new();
                loop {
                    match self.tokens.get(self.pos) {
                        None => return Err("unbalanced parentheses in proof string".into()),
                        Some(Tok::Close) => {
                            self.pos += 1;
                            return Ok(premises);
                        }
                        Some(Tok::Arrow) => {
                            self.pos += 1;
                            let Some(Tok::Ident(rule)) = self.tokens.get(self.pos).cloned() else {
                                return Err("`->` must be followed by a rule id".into());
                            };
                            self.pos += 1;
                            let conclusion = self.builder.node(&rule);
                            for p in premises.drain(..) {
                                self.builder.edge(p, conclusion);
                            }
                            premises.push(conclusion);
                        }
                        Some(Tok::Or) => return Err("`OR` inside a proof".into()),
                        Some(_) => premises.extend(self.element()?),
                    }
                }
            }
            Some(t) => Err(format!("unexpected {t:?} in proof string")),
            None => Err("truncated proof string".into()),
        }
    }
}

#[derive(Default)]
struct GraphBuilder {
    graph: ProofGraph,
    ids: HashMap<String, usize>,
}

impl GraphBuilder {
    fn node(&mut self, label: &str) -> usize {
        if let Some(&id) = self.ids.get(label) {
            return id;
        }
        let id = self.graph.add_node(label, Some(label.to_string()));
        self.ids.insert(label.to_string(), id);
        id
    }

    fn edge(&mut self, from: usize, to: usize) {
        if from != to {
            self.graph.add_edge(from, to);
        }
    }
}

fn normalize_sentence(s: &str) -> String {
    s.trim().trim_end_matches(['.', '!', '?']).split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Splits text into sentences at `.`, `?` or `!` followed by whitespace or
/// the end, so decimals such as `18.00` stay whole.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        current.push(c);
        if matches!(c, '.' | '?' | '!') && chars.peek().is_none_or(|n| n.is_whitespace()) {
            let s = current.trim();
            if !s.is_empty() {
                out.push(s.to_string());
            }
            current.clear();
        }
    }
    let rest = current.trim();
    if !rest.is_empty() {
        out.push(rest.to_string());
    }
    out
}

/// Converts a chain of thought into a proof graph over context ids. Each
/// derived sentence (one not in the context) is attributed to the context
/// sentence right before it, taken to be the rule applied; every other
/// sentence since the previous derivation, and the previous derivation
/// itself, becomes a premise of that rule.
pub fn chain_of_thought_graph(steps: &[String], context: &[(String, String)]) -> ProofGraph {
    let lookup: HashMap<String, &str> =
        context.iter().map(|(id, text)| (normalize_sentence(text), id.as_str())).collect();
    let mut builder = GraphBuilder::default();
    let mut pending: Vec<usize> = Vec::new();
    for step in steps.iter().flat_map(|s| split_sentences(s)) {
        match lookup.get(&normalize_sentence(&step)) {
            Some(id) => {
                let node = builder.node(id);
                if !pending.contains(&node) {
                    pending.push(node);
                }
            }
            None => {
                let Some(rule) = pending.pop() else { continue };
                for p in pending.drain(..) {
                    builder.edge(p, rule);
                }
                pending.push(rule);
            }
        }
    }
    builder.graph
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edges(g: &ProofGraph) -> Vec<(String, String)> {
        let mut e: Vec<_> = g.labeled_edges().into_iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        e.sort();
        e
    }

    #[test]
    fn single_rule_application() {
        let gs = parse_proofwriter_proofs("[(((triple2 triple6) -> rule4))]").unwrap();
        assert_eq!(gs.len(), 1);
        assert_eq!(gs[0].nodes.len(), 3);
        assert_eq!(edges(&gs[0]), [("triple2".into(), "rule4".into()), ("triple6".into(), "rule4".into())]);
    }

    #[test]
    fn nested_and_alternatives() {
        let gs = parse_proofwriter_proofs("[(triple1) OR ((((triple2) -> rule1) triple3) -> rule2)]").unwrap();
        assert_eq!(gs.len(), 2);
        assert_eq!(gs[0].nodes.len(), 1);
        assert_eq!(
            edges(&gs[1]),
            [("rule1".into(), "rule2".into()), ("triple2".into(), "rule1".into()), ("triple3".into(), "rule2".into())]
        );
    }

    #[test]
    fn naf_and_empty() {
        let gs = parse_proofwriter_proofs("[((triple1 NAF) -> rule2)]").unwrap();
        assert_eq!(gs[0].nodes.len(), 2);
        assert!(parse_proofwriter_proofs("").unwrap().is_empty());
        assert!(parse_proofwriter_proofs("[(triple1 -> ]").is_err());
    }

    #[test]
    fn sentences() {
        assert_eq!(split_sentences("Tina makes $18.00 an hour. Is it? Yes"), ["Tina makes $18.00 an hour.", "Is it?", "Yes"]);
    }

    #[test]
    fn chain_of_thought() {
        let context: Vec<(String, String)> = [
            ("s1", "Every wumpus is a tumpus."),
            ("s2", "Each tumpus is not bright."),
            ("s3", "Max is a wumpus."),
        ]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        let steps: Vec<String> = [
            "Max is a wumpus.",
            "Every wumpus is a tumpus.",
            "Max is a tumpus.",
            "Each tumpus is not bright.",
            "Max is not bright.",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let g = chain_of_thought_graph(&steps, &context);
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(edges(&g), [("s1".into(), "s2".into()), ("s3".into(), "s1".into())]);
    }
}
