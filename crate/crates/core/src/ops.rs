//! Operator table shared by the parser and the canonical renderer.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Assoc {
    Xfx,
    Xfy,
    Yfx,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct InfixOp {
    pub priority: u32,
    pub assoc: Assoc,
}

impl InfixOp {
    /// Maximum priorities admitted for the left and right operands.
    pub fn operand_limits(self) -> (u32, u32) {
        let p = self.priority;
        match self.assoc {
            Assoc::Xfx => (p - 1, p - 1),
            Assoc::Xfy => (p - 1, p),
            Assoc::Yfx => (p, p - 1),
        }
    }
}

pub(crate) const MAX_PRIORITY: u32 = 1200;
pub(crate) const ARG_PRIORITY: u32 = 999;

pub(crate) fn infix(name: &str) -> Option<InfixOp> {
    let (priority, assoc) = match name {
        ":-" => (1200, Assoc::Xfx),
        "," => (1000, Assoc::Xfy),
        "=" | "==" | "\\==" | "<" | ">" | "=<" | ">=" | "=:=" | "=\\=" | "is" => (700, Assoc::Xfx),
        "+" | "-" => (500, Assoc::Yfx),
        "*" | "/" => (400, Assoc::Yfx),
        _ => return None,
    };
    Some(InfixOp { priority, assoc })
}

/// Prefix operators, all `fy`.
pub(crate) fn prefix(name: &str) -> Option<u32> {
    match name {
        "\\+" => Some(900),
        "-" => Some(200),
        _ => None,
    }
}

pub(crate) fn is_symbol_char(c: char) -> bool {
    matches!(
        c,
        '+' | '-' | '*' | '/' | '\\' | '^' | '<' | '>' | '=' | '~' | ':' | '.' | '?' | '@' | '#' | '&' | '$'
    )
}
