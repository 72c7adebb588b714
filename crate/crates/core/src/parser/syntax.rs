use std::collections::HashMap;
use std::sync::Arc;

use super::lexer::{Lexer, Token, TokenKind};
use super::{ParseDiagnostic, Program, SourceProgram};
use crate::clause::{Builtin, BuiltinOp, Clause, ClauseError, Goal, KnowledgeBase};
use crate::ops::{self, ARG_PRIORITY, MAX_PRIORITY};
use crate::term::{Number, Term, Var};

/// Goals rejected outright so the failure is explained instead of the call
/// silently failing at run time.
const UNSUPPORTED_GOALS: &[&str] = &[
    "assert", "asserta", "assertz", "retract", "retractall", "findall", "bagof", "setof", "forall", "call",
];

#[derive(Debug, Clone)]
struct Ast {
    kind: AstKind,
    line: usize,
    column: usize,
}

#[derive(Debug, Clone)]
enum AstKind {
    Var(String),
    Number(Number),
    Atom(String),
    Compound(String, Vec<Ast>),
}

impl Ast {
    fn name(&self) -> Option<(&str, usize)> {
        match &self.kind {
            AstKind::Atom(n) => Some((n, 0)),
            AstKind::Compound(n, args) => Some((n, args.len())),
            _ => None,
        }
    }

    fn error(&self, message: impl Into<String>) -> ParseDiagnostic {
        ParseDiagnostic::error(self.line, self.column, message)
    }
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
    /// Where to report "unexpected end" errors.
    eof: (usize, usize),
}

type Parsed = Result<(Ast, u32), ParseDiagnostic>;

impl<'t> Parser<'t> {
    fn new(tokens: &'t [Token], eof: (usize, usize)) -> Self {
        Parser { tokens, pos: 0, eof }
    }

    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, offset: usize) -> Option<&'t Token> {
        self.tokens.get(self.pos + offset)
    }

    fn next(&mut self) -> Option<&'t Token> {
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn error_at_eof(&self, message: impl Into<String>) -> ParseDiagnostic {
        ParseDiagnostic::error(self.eof.0, self.eof.1, message)
    }

    fn parse(&mut self, max: u32) -> Parsed {
        let (mut left, mut left_priority) = self.parse_primary(max)?;
        while let Some(tok) = self.peek() {
            let name = match &tok.kind {
                TokenKind::Name(n) => n.as_str(),
                TokenKind::Comma => ",",
                _ => break,
            };
            if let Some(message) = unsupported_infix(name) {
                return Err(ParseDiagnostic::error(tok.line, tok.column, message));
            }
            let Some(op) = ops::infix(name) else { break };
            let (left_max, right_max) = op.operand_limits();
            if op.priority > max || left_priority > left_max {
                break;
            }
            self.next();
            let (right, _) = self.parse(right_max)?;
            let (line, column) = (left.line, left.column);
            left = Ast { kind: AstKind::Compound(name.to_string(), vec![left, right]), line, column };
            left_priority = op.priority;
        }
        Ok((left, left_priority))
    }

    fn parse_primary(&mut self, max: u32) -> Parsed {
        let Some(tok) = self.next() else {
            return Err(self.error_at_eof("unexpected end of clause"));
        };
        let at = |kind| Ast { kind, line: tok.line, column: tok.column };
        match &tok.kind {
            TokenKind::Number(n) => Ok((at(AstKind::Number(n.clone())), 0)),
            TokenKind::Var(name) => Ok((at(AstKind::Var(name.clone())), 0)),
            TokenKind::Open => {
                let (inner, _) = self.parse(MAX_PRIORITY)?;
                self.expect_close()?;
                Ok((inner, 0))
            }
            TokenKind::Name(name) => {
                if let Some(next) = self.peek() {
                    if next.kind == TokenKind::Open && !next.layout_before {
                        self.next();
                        let args = self.parse_args()?;
                        return Ok((at(AstKind::Compound(name.clone(), args)), 0));
                    }
                    if name == "-" && !next.layout_before {
                        if let TokenKind::Number(n) = &next.kind {
                            self.next();
                            let negated = Number::new(-n.value().clone());
                            return Ok((at(AstKind::Number(negated)), 0));
                        }
                    }
                }
                if let Some(priority) = ops::prefix(name) {
                    if self.peek().is_some_and(can_start_term) {
                        if priority > max {
                            return Err(ParseDiagnostic::error(
                                tok.line,
                                tok.column,
                                format!("operator `{name}` needs parentheses here"),
                            ));
                        }
                        let (arg, _) = self.parse(priority)?;
                        return Ok((at(AstKind::Compound(name.clone(), vec![arg])), priority));
                    }
                }
                Ok((at(AstKind::Atom(name.clone())), 0))
            }
            TokenKind::OpenList | TokenKind::CloseList => {
                Err(ParseDiagnostic::error(tok.line, tok.column, "lists are not supported"))
            }
            TokenKind::Bar => Err(ParseDiagnostic::error(tok.line, tok.column, "`|` is not supported")),
            other => Err(ParseDiagnostic::error(tok.line, tok.column, format!("unexpected {}", describe(other)))),
        }
    }

    fn parse_args(&mut self) -> Result<Vec<Ast>, ParseDiagnostic> {
        let mut args = Vec::new();
        loop {
            let (arg, _) = self.parse(ARG_PRIORITY)?;
            args.push(arg);
            match self.next() {
                Some(Token { kind: TokenKind::Comma, .. }) => continue,
                Some(Token { kind: TokenKind::Close, .. }) => return Ok(args),
                Some(t) => return Err(unexpected(t, "`,` or `)`")),
                None => return Err(self.error_at_eof("unexpected end of clause, expected `)`")),
            }
        }
    }

    fn expect_close(&mut self) -> Result<(), ParseDiagnostic> {
        match self.next() {
            Some(Token { kind: TokenKind::Close, .. }) => Ok(()),
            Some(t) => Err(unexpected(t, "`)`")),
            None => Err(self.error_at_eof("unexpected end of clause, expected `)`")),
        }
    }

    /// Parses a whole statement, allowing the `?-` and `:-` prefixes.
    fn parse_statement(&mut self) -> Result<Ast, ParseDiagnostic> {
        let ast = match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Name(n)) if (n == "?-" || n == ":-") && self.peek_at(1).is_some() => {
                let tok = self.next().expect("peeked");
                let (arg, _) = self.parse(MAX_PRIORITY - 1)?;
                Ast { kind: AstKind::Compound(n.clone(), vec![arg]), line: tok.line, column: tok.column }
            }
            _ => self.parse(MAX_PRIORITY)?.0,
        };
        if let Some(t) = self.peek() {
            return Err(unexpected(t, "an operator or `.`"));
        }
        Ok(ast)
    }
}

fn can_start_term(tok: &Token) -> bool {
    match &tok.kind {
        TokenKind::Name(n) => ops::infix(n).is_none() || ops::prefix(n).is_some(),
        TokenKind::Var(_) | TokenKind::Number(_) | TokenKind::Open | TokenKind::OpenList => true,
        _ => false,
    }
}

fn unsupported_infix(name: &str) -> Option<&'static str> {
    match name {
        ";" => Some("disjunction `;` is not supported"),
        "->" => Some("if-then-else `->` is not supported"),
        "\\=" => Some("`\\=` is not supported; use `\\+ A = B`"),
        _ => None,
    }
}

fn describe(kind: &TokenKind) -> String {
    match kind {
        TokenKind::Name(n) => format!("`{n}`"),
        TokenKind::Var(v) => format!("variable `{v}`"),
        TokenKind::Number(n) => format!("number `{n}`"),
        TokenKind::Open => "`(`".into(),
        TokenKind::Close => "`)`".into(),
        TokenKind::Comma => "`,`".into(),
        TokenKind::Bar => "`|`".into(),
        TokenKind::OpenList => "`[`".into(),
        TokenKind::CloseList => "`]`".into(),
        TokenKind::End => "end of clause".into(),
        TokenKind::Provenance(_) => "provenance comment".into(),
    }
}

fn unexpected(tok: &Token, expected: &str) -> ParseDiagnostic {
    let message = match &tok.kind {
        TokenKind::Name(n) if unsupported_infix(n).is_some() => unsupported_infix(n).unwrap_or_default().to_string(),
        TokenKind::OpenList => "lists are not supported".to_string(),
        TokenKind::Bar => "`|` is not supported".to_string(),
        other => format!("unexpected {}, expected {expected}", describe(other)),
    };
    ParseDiagnostic::error(tok.line, tok.column, message)
}

/// Variable interning for one clause; each `_` becomes a distinct variable.
#[derive(Default)]
struct VarScope {
    names: HashMap<String, Arc<str>>,
    anonymous: usize,
}

impl VarScope {
    fn var(&mut self, name: &str) -> Term {
        if name == "_" {
            self.anonymous += 1;
            return Term::Var(Var::new(format!("_G{}", self.anonymous)));
        }
        let interned = self.names.entry(name.to_string()).or_insert_with(|| Arc::from(name));
        Term::Var(Var::new(Arc::clone(interned)))
    }
}

fn to_term(ast: &Ast, scope: &mut VarScope) -> Term {
    match &ast.kind {
        AstKind::Var(name) => scope.var(name),
        AstKind::Number(n) => Term::Number(n.clone()),
        AstKind::Atom(name) => Term::atom(name.as_str()),
        AstKind::Compound(name, args) => {
            Term::compound(name.as_str(), args.iter().map(|a| to_term(a, scope)).collect())
        }
    }
}

fn flatten_conjunction<'a>(ast: &'a Ast, out: &mut Vec<&'a Ast>) {
    match &ast.kind {
        AstKind::Compound(name, args) if name == "," && args.len() == 2 => {
            flatten_conjunction(&args[0], out);
            flatten_conjunction(&args[1], out);
        }
        _ => out.push(ast),
    }
}

fn to_goal(ast: &Ast, scope: &mut VarScope) -> Result<Goal, ParseDiagnostic> {
    match &ast.kind {
        AstKind::Var(_) => Err(ast.error("variable goals are not supported")),
        AstKind::Number(_) => Err(ast.error("a number cannot be used as a goal")),
        AstKind::Compound(name, args) if name == "\\+" && args.len() == 1 => {
            let inner = &args[0];
            match inner.name() {
                Some(("\\+", 1)) => return Err(inner.error("double negation is not supported")),
                Some((",", 2)) => return Err(inner.error("negation of a conjunction is not supported")),
                _ => {}
            }
            let inner = to_goal(inner, scope)?;
            Goal::negation(inner).map_err(|e| ast.error(e.to_string()))
        }
        AstKind::Compound(name, args) if args.len() == 2 && BuiltinOp::from_symbol(name).is_some() => {
            let op = BuiltinOp::from_symbol(name).expect("checked");
            Ok(Goal::Builtin(Builtin::new(op, to_term(&args[0], scope), to_term(&args[1], scope))))
        }
        _ => {
            let (name, arity) = ast.name().expect("atom or compound");
            if name == "!" {
                return Err(ast.error("cut `!` is not supported"));
            }
            if matches!(name, ";" | "->" | "|") && arity == 2 {
                return Err(ast.error(format!("`{name}` is not supported")));
            }
            if UNSUPPORTED_GOALS.contains(&name) {
                return Err(ast.error(format!("{name}/{arity} is not supported")));
            }
            Ok(Goal::Call(to_term(ast, scope)))
        }
    }
}

fn to_goals(ast: &Ast, scope: &mut VarScope) -> Result<Vec<Goal>, ParseDiagnostic> {
    let mut conjuncts = Vec::new();
    flatten_conjunction(ast, &mut conjuncts);
    conjuncts.into_iter().map(|g| to_goal(g, scope)).collect()
}

fn to_clause(head: &Ast, body: Option<&Ast>, provenance: Option<String>) -> Result<Clause, ParseDiagnostic> {
    let mut scope = VarScope::default();
    match &head.kind {
        AstKind::Var(_) => return Err(head.error("clause head cannot be a variable")),
        AstKind::Number(_) => return Err(head.error("clause head cannot be a number")),
        _ => {}
    }
    if let Some((name, 2)) = head.name() {
        if name == "," {
            return Err(head.error("clause head cannot be a conjunction"));
        }
    }
    let head_term = to_term(head, &mut scope);
    let goals = match body {
        Some(b) => to_goals(b, &mut scope)?,
        None => Vec::new(),
    };
    Clause::new(head_term, goals, provenance).map_err(|e| match e {
        ClauseError::BuiltinRedefinition(_) | ClauseError::InvalidHead(_) => head.error(e.to_string()),
        other => head.error(other.to_string()),
    })
}

struct Statement {
    tokens: Vec<Token>,
    provenance: Option<String>,
    /// Position of the terminating `.`, or of the last token when missing.
    end: (usize, usize),
}

/// Parses program text into clauses (in source order) and embedded queries.
/// Every clause that fails to parse contributes a diagnostic; any error
/// makes the whole result an error.
pub fn parse_program(src: &SourceProgram) -> Result<Program, Vec<ParseDiagnostic>> {
    let mut diagnostics = Vec::new();
    let mut statements = Vec::new();
    let mut lexer = Lexer::new(&src.text);
    let mut pending: Option<(String, usize, usize)> = None;
    let mut current: Vec<Token> = Vec::new();
    let mut current_provenance = None;
    let mut broken = false;

    while let Some(next) = lexer.next_token() {
        let tok = match next {
            Ok(t) => t,
            Err(d) => {
                diagnostics.push(d);
                broken = true;
                continue;
            }
        };
        match &tok.kind {
            TokenKind::Provenance(id) => {
                if let Some((old, line, column)) = pending.replace((id.clone(), tok.line, tok.column)) {
                    diagnostics.push(ParseDiagnostic::warning(
                        line,
                        column,
                        format!("provenance `{old}` is not followed by a clause and is ignored"),
                    ));
                }
            }
            TokenKind::End => {
                if current.is_empty() && !broken {
                    diagnostics.push(ParseDiagnostic::error(tok.line, tok.column, "empty clause"));
                } else if !broken {
                    statements.push(Statement {
                        tokens: std::mem::take(&mut current),
                        provenance: current_provenance.take(),
                        end: (tok.line, tok.column),
                    });
                }
                current.clear();
                current_provenance = None;
                broken = false;
            }
            _ => {
                if current.is_empty() {
                    current_provenance = pending.take().map(|(id, _, _)| id);
                }
                current.push(tok);
            }
        }
    }
    if let Some(last) = current.last() {
        if !broken {
            diagnostics.push(ParseDiagnostic::error(last.line, last.column, "clause is missing its terminating `.`"));
        }
    }
    if let Some((id, line, column)) = pending {
        diagnostics.push(ParseDiagnostic::warning(
            line,
            column,
            format!("provenance `{id}` is not followed by a clause and is ignored"),
        ));
    }

    let mut kb = KnowledgeBase::new();
    let mut queries = Vec::new();
    for stmt in statements {
        let mut parser = Parser::new(&stmt.tokens, stmt.end);
        let ast = match parser.parse_statement() {
            Ok(a) => a,
            Err(d) => {
                diagnostics.push(d);
                continue;
            }
        };
        let result = match &ast.kind {
            AstKind::Compound(name, args) if name == "?-" && args.len() == 1 => {
                match to_goals(&args[0], &mut VarScope::default()) {
                    Ok(goals) => {
                        queries.push(goals);
                        Ok(())
                    }
                    Err(d) => Err(d),
                }
            }
            AstKind::Compound(name, args) if name == ":-" && args.len() == 1 => {
                diagnostics.push(ast.error("directive ignored").into_warning());
                Ok(())
            }
            AstKind::Compound(name, args) if name == ":-" && args.len() == 2 => {
                to_clause(&args[0], Some(&args[1]), stmt.provenance).map(|c| kb.push(c))
            }
            _ => to_clause(&ast, None, stmt.provenance).map(|c| kb.push(c)),
        };
        if let Err(d) = result {
            diagnostics.push(d);
        }
    }

    if diagnostics.iter().any(ParseDiagnostic::is_error) {
        diagnostics.sort_by_key(|d| (d.line, d.column));
        return Err(diagnostics);
    }
    Ok(Program { kb, queries, warnings: diagnostics })
}

impl ParseDiagnostic {
    fn into_warning(mut self) -> Self {
        self.kind = super::DiagnosticKind::Warning;
        self
    }
}

fn statement_tokens(text: &str) -> Result<(Vec<Token>, (usize, usize)), Vec<ParseDiagnostic>> {
    let mut lexer = Lexer::new(text);
    let mut tokens = Vec::new();
    let mut errors = Vec::new();
    while let Some(next) = lexer.next_token() {
        match next {
            Ok(t) if matches!(t.kind, TokenKind::Provenance(_)) => {}
            Ok(t) => tokens.push(t),
            Err(d) => errors.push(d),
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    let mut end = tokens.last().map_or((1, 1), |t| (t.line, t.column));
    if let Some(pos) = tokens.iter().position(|t| t.kind == TokenKind::End) {
        if pos + 1 != tokens.len() {
            let t = &tokens[pos + 1];
            return Err(vec![ParseDiagnostic::error(t.line, t.column, "unexpected text after `.`")]);
        }
        end = (tokens[pos].line, tokens[pos].column);
        tokens.pop();
    }
    Ok((tokens, end))
}

/// Parses `?- g1, g2.`; both the `?-` prefix and the final `.` are optional.
pub fn parse_query(text: &str) -> Result<Vec<Goal>, Vec<ParseDiagnostic>> {
    let (mut tokens, end) = statement_tokens(text)?;
    if matches!(tokens.first(), Some(Token { kind: TokenKind::Name(n), .. }) if n == "?-") {
        tokens.remove(0);
    }
    if tokens.is_empty() {
        return Err(vec![ParseDiagnostic::error(end.0, end.1, "empty query")]);
    }
    let mut parser = Parser::new(&tokens, end);
    let (ast, _) = parser.parse(MAX_PRIORITY).map_err(|d| vec![d])?;
    if let Some(t) = parser.peek() {
        return Err(vec![unexpected(t, "an operator or `.`")]);
    }
    to_goals(&ast, &mut VarScope::default()).map_err(|d| vec![d])
}

/// Parses a single term, with an optional trailing `.`.
pub fn parse_term(text: &str) -> Result<Term, ParseDiagnostic> {
    let (tokens, end) = statement_tokens(text).map_err(|mut d| d.remove(0))?;
    if tokens.is_empty() {
        return Err(ParseDiagnostic::error(end.0, end.1, "empty term"));
    }
    let mut parser = Parser::new(&tokens, end);
    let (ast, _) = parser.parse(MAX_PRIORITY)?;
    if let Some(t) = parser.peek() {
        return Err(unexpected(t, "an operator or end of term"));
    }
    Ok(to_term(&ast, &mut VarScope::default()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn program(text: &str) -> Program {
        parse_program(&SourceProgram::new(text, "test")).unwrap_or_else(|d| panic!("{d:?}"))
    }

    fn errors(text: &str) -> Vec<ParseDiagnostic> {
        parse_program(&SourceProgram::new(text, "test")).unwrap_err()
    }

    #[test]
    fn parses_table_rule() {
        let p = program("quiet(X) :- red(X), rough(X).");
        let c = p.kb.clause(0);
        assert_eq!(c.head().render(), "quiet(X)");
        let body: Vec<String> = c.body().iter().map(|g| g.to_string()).collect();
        assert_eq!(body, ["red(X)", "rough(X)"]);
    }

    #[test]
    fn parses_arithmetic_rule() {
        let p = program("overtime_wage(W) :-\n    wage(W1),\n    W is 1.5 * W1.");
        let c = p.kb.clause(0);
        assert!(matches!(&c.body()[1], Goal::Builtin(b) if b.op == BuiltinOp::Is));
        assert_eq!(c.to_string(), "overtime_wage(W) :- wage(W1), W is 1.5 * W1.");
    }

    #[test]
    fn decimal_literal_is_exact() {
        let p = program("wage(18.00).");
        assert_eq!(p.kb.clause(0).head().args()[0], Term::int(18));
    }

    #[test]
    fn provenance_attaches_to_next_clause() {
        let p = program("% id: triple1\ngreen(fiona).\nred(bob).\n% id: rule1\nquiet(X) :- red(X).");
        assert_eq!(p.kb.clause(0).provenance(), Some("triple1"));
        assert_eq!(p.kb.clause(1).provenance(), None);
        assert_eq!(p.kb.clause(2).provenance(), Some("rule1"));
    }

    #[test]
    fn operator_precedence() {
        let t = parse_term("X is 1 + 2 * 3 - -4").unwrap();
        assert_eq!(t.render(), "X is 1 + 2 * 3 - -4");
        let sum = &t.args()[1];
        assert_eq!(sum.functor(), Some(("-", 2)));
        let t = parse_term("(1 + 2) * 3").unwrap();
        assert_eq!(t.functor(), Some(("*", 2)));
        let t = parse_term("- X").unwrap();
        assert_eq!(t.render(), "-(X)");
        let t = parse_term("-(3)").unwrap();
        assert_eq!(t.functor(), Some(("-", 1)));
        assert_eq!(parse_term("-3").unwrap(), Term::int(-3));
        assert_eq!(parse_term("3-2").unwrap().functor(), Some(("-", 2)));
    }

    #[test]
    fn queries() {
        let q = parse_query("?- green(fiona).").unwrap();
        assert_eq!(q, vec![Goal::Call(parse_term("green(fiona)").unwrap())]);
        let q = parse_query("?- overtime_wage(W).").unwrap();
        assert_eq!(crate::clause::goal_variables(&q), vec![Var::new("W")]);
        let q = parse_query("?- \\+ red(fiona).").unwrap();
        assert!(matches!(&q[0], Goal::Not(inner) if matches!(**inner, Goal::Call(_))));
        let q = parse_query("p(X), X > 2").unwrap();
        assert_eq!(q.len(), 2);
    }

    #[test]
    fn embedded_queries_and_directives() {
        let p = program(":- initialization(main).\np(a).\n?- p(X).");
        assert_eq!(p.queries.len(), 1);
        assert_eq!(p.kb.len(), 1);
        assert_eq!(p.warnings.len(), 1);
    }

    #[test]
    fn rejects_unsupported_constructs() {
        for (text, needle) in [
            ("p :- q ; r.", "disjunction"),
            ("p :- q, !.", "cut"),
            ("p([a]).", "lists"),
            ("p :- assert(q).", "assert/1"),
            ("p :- findall(X, q(X), L).", "findall/3"),
            ("p :- \\+ \\+ q.", "double negation"),
            ("p :- X.", "variable goals"),
            ("X is 3.", "built-in"),
            ("p(\"s\").", "double-quoted"),
        ] {
            let errs = errors(text);
            assert!(errs.iter().any(|d| d.message.contains(needle)), "{text}: {errs:?}");
        }
    }

    #[test]
    fn reports_every_broken_clause() {
        let errs = errors("p(a).\nq(b.\nr(c).\ns :- a ; b.\nt(d)");
        let lines: Vec<usize> = errs.iter().map(|d| d.line).collect();
        assert_eq!(lines, vec![2, 4, 5]);
    }

    #[test]
    fn diagnostic_points_at_offending_token() {
        let errs = errors("p(a).\nfoo :- bar, !.");
        assert_eq!((errs[0].line, errs[0].column), (2, 13));
    }

    #[test]
    fn anonymous_variables_are_distinct() {
        let p = program("p(_, _).");
        assert_eq!(p.kb.clause(0).variables().len(), 2);
    }
}
