use std::iter::Peekable;
use std::str::Chars;

use super::{DiagnosticKind, ParseDiagnostic};
use crate::ops::is_symbol_char;
use crate::term::Number;

#[derive(Clone, Debug, PartialEq)]
pub enum TokenKind {
    /// Atom or functor name, including symbolic (`:-`, `=<`) and quoted names.
    Name(String),
    Var(String),
    Number(Number),
    Open,
    Close,
    Comma,
    Bar,
    OpenList,
    CloseList,
    /// Clause-terminating `.`.
    End,
    /// `% id: <identifier>` comment.
    Provenance(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub column: usize,
    /// Whitespace or a comment precedes this token.
    pub layout_before: bool,
}

pub(crate) struct Lexer<'a> {
    chars: Peekable<Chars<'a>>,
    line: usize,
    column: usize,
    layout: bool,
}

impl<'a> Lexer<'a> {
    pub fn new(text: &'a str) -> Self {
        Lexer { chars: text.chars().peekable(), line: 1, column: 1, layout: true }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next()
    }

    fn error(&self, line: usize, column: usize, message: impl Into<String>) -> ParseDiagnostic {
        ParseDiagnostic { line, column, message: message.into(), kind: DiagnosticKind::Error }
    }

    fn take_while(&mut self, mut pred: impl FnMut(char) -> bool) -> String {
        let mut out = String::new();
        while let Some(c) = self.peek() {
            if !pred(c) {
                break;
            }
            out.push(c);
            self.bump();
        }
        out
    }

    /// Next token, or a diagnostic for input that cannot start one. After an
    /// error the lexer has moved past the offending text, so callers may keep
    /// going.
    pub fn next_token(&mut self) -> Option<Result<Token, ParseDiagnostic>> {
        loop {
            let c = self.peek()?;
            if c.is_whitespace() {
                self.bump();
                self.layout = true;
                continue;
            }
            let (line, column) = (self.line, self.column);
            if c == '%' {
                let comment = self.take_while(|c| c != '\n');
                self.layout = true;
                if let Some(id) = provenance_id(&comment) {
                    return Some(Ok(self.token(TokenKind::Provenance(id), line, column)));
                }
                continue;
            }
            if c == '/' && self.peek2() == Some('*') {
                self.bump();
                self.bump();
                let mut prev = ' ';
                loop {
                    match self.bump() {
                        Some('/') if prev == '*' => break,
                        Some(ch) => prev = ch,
                        None => return Some(Err(self.error(line, column, "unterminated block comment"))),
                    }
                }
                self.layout = true;
                continue;
            }
            return Some(self.lex_token(c, line, column));
        }
    }

    fn token(&mut self, kind: TokenKind, line: usize, column: usize) -> Token {
        let layout_before = std::mem::replace(&mut self.layout, false);
        Token { kind, line, column, layout_before }
    }

    fn lex_token(&mut self, c: char, line: usize, column: usize) -> Result<Token, ParseDiagnostic> {
        let kind = if c.is_ascii_digit() {
            let mut text = self.take_while(|c| c.is_ascii_digit());
            if self.peek() == Some('.') && self.peek2().is_some_and(|d| d.is_ascii_digit()) {
                self.bump();
                text.push('.');
                text.push_str(&self.take_while(|c| c.is_ascii_digit()));
            }
            match Number::parse_decimal(&text) {
                Some(n) => TokenKind::Number(n),
                None => return Err(self.error(line, column, format!("malformed number `{text}`"))),
            }
        } else if c.is_alphabetic() || c == '_' {
            let word = self.take_while(|c| c.is_alphanumeric() || c == '_');
            if c.is_uppercase() || c == '_' {
                TokenKind::Var(word)
            } else {
                TokenKind::Name(word)
            }
        } else if c == '\'' {
            self.bump();
            TokenKind::Name(self.quoted(line, column)?)
        } else if c == '"' {
            self.bump();
            // Consume the literal so lexing can resume after it.
            let _ = self.quoted_until('"');
            return Err(self.error(line, column, "double-quoted strings are not supported"));
        } else if is_symbol_char(c) {
            let run = self.take_while(is_symbol_char);
            if run == "." && self.peek().map_or(true, |n| n.is_whitespace() || n == '%') {
                TokenKind::End
            } else {
                TokenKind::Name(run)
            }
        } else {
            self.bump();
            match c {
                '(' => TokenKind::Open,
                ')' => TokenKind::Close,
                ',' => TokenKind::Comma,
                '|' => TokenKind::Bar,
                '[' => TokenKind::OpenList,
                ']' => TokenKind::CloseList,
                '!' | ';' => TokenKind::Name(c.to_string()),
                other => return Err(self.error(line, column, format!("illegal character `{other}`"))),
            }
        };
        Ok(self.token(kind, line, column))
    }

    fn quoted(&mut self, line: usize, column: usize) -> Result<String, ParseDiagnostic> {
        self.quoted_until('\'').ok_or_else(|| self.error(line, column, "unterminated quoted atom"))
    }

    fn quoted_until(&mut self, quote: char) -> Option<String> {
        let mut out = String::new();
        loop {
            match self.bump()? {
                c if c == quote => {
                    if self.peek() == Some(quote) {
                        self.bump();
                        out.push(quote);
                    } else {
                        return Some(out);
                    }
                }
                '\\' => match self.bump()? {
                    'n' => out.push('\n'),
                    't' => out.push('\t'),
                    other => out.push(other),
                },
                c => out.push(c),
            }
        }
    }
}

fn provenance_id(comment: &str) -> Option<String> {
    let rest = comment.trim_start_matches('%').trim_start();
    let id = rest.strip_prefix("id:")?.trim();
    if id.is_empty() || id.contains(char::is_whitespace) {
        return None;
    }
    Some(id.to_string())
}

/// Tokens of `text`, stopping at the first lexical error.
pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseDiagnostic> {
    let mut lexer = Lexer::new(text);
    let mut out = Vec::new();
    while let Some(tok) = lexer.next_token() {
        out.push(tok?);
    }
    Ok(out)
}
