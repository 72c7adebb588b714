//! Terms: variables, exact rational numbers, atoms and compound terms.

use std::fmt::{self, Write as _};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::ops::{self, ARG_PRIORITY, MAX_PRIORITY};

/// A logic variable. Renaming apart keeps the name and bumps the generation.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    name: Arc<str>,
    generation: u32,
}

impl Var {
    pub fn new(name: impl Into<Arc<str>>) -> Self {
        Var { name: name.into(), generation: 0 }
    }

    pub fn with_generation(name: impl Into<Arc<str>>, generation: u32) -> Self {
        Var { name: name.into(), generation }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub(crate) fn renamed(&self, generation: u32) -> Var {
        Var { name: Arc::clone(&self.name), generation }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.generation == 0 {
            f.write_str(&self.name)
        } else {
            write!(f, "{}_{}", self.name, self.generation)
        }
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// An exact rational number.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Number(Arc<BigRational>);

impl Number {
    pub fn new(value: BigRational) -> Self {
        Number(Arc::new(value))
    }

    pub fn from_integer(value: i64) -> Self {
        Number::new(BigRational::from_integer(BigInt::from(value)))
    }

    pub fn ratio(numer: i64, denom: i64) -> Self {
        Number::new(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    /// Parses an unsigned decimal literal such as `18`, `18.00` or `1.5`.
    pub fn parse_decimal(text: &str) -> Option<Number> {
        let (int_part, frac_part) = match text.split_once('.') {
            Some((i, f)) => (i, f),
            None => (text, ""),
        };
        if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if !frac_part.bytes().all(|b| b.is_ascii_digit()) || (text.contains('.') && frac_part.is_empty()) {
            return None;
        }
        let digits = format!("{int_part}{frac_part}");
        let numer: BigInt = digits.parse().ok()?;
        let denom = num_traits::pow(BigInt::from(10), frac_part.len());
        Some(Number::new(BigRational::new(numer, denom)))
    }

    pub fn value(&self) -> &BigRational {
        &self.0
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn to_f64(&self) -> Option<f64> {
        self.0.to_f64()
    }
}

impl From<BigRational> for Number {
    fn from(value: BigRational) -> Self {
        Number::new(value)
    }
}

/// Integers print without a decimal point, terminating fractions print as
/// minimal decimals, anything else prints as `n/d`.
impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let value = &*self.0;
        if value.is_integer() {
            return write!(f, "{}", value.numer());
        }
        let denom = value.denom();
        let two = BigInt::from(2);
        let five = BigInt::from(5);
        let mut rest = denom.clone();
        let (mut twos, mut fives) = (0usize, 0usize);
        while rest.is_even() {
            rest /= &two;
            twos += 1;
        }
        while (&rest % &five).is_zero() {
            rest /= &five;
            fives += 1;
        }
        if !rest.is_one() {
            return write!(f, "{}/{}", value.numer(), denom);
        }
        let places = twos.max(fives);
        let scaled = value.numer() * num_traits::pow(BigInt::from(10), places) / denom;
        let mut digits = scaled.abs().to_string();
        while digits.len() <= places {
            digits.insert(0, '0');
        }
        let split = digits.len() - places;
        if scaled.is_negative() {
            f.write_char('-')?;
        }
        write!(f, "{}.{}", &digits[..split], &digits[split..])
    }
}

impl fmt::Debug for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(PartialEq, Eq, Hash)]
pub struct Compound {
    functor: Arc<str>,
    args: Vec<Term>,
    ground: bool,
}

impl Compound {
    pub fn functor(&self) -> &str {
        &self.functor
    }

    pub fn functor_arc(&self) -> &Arc<str> {
        &self.functor
    }

    pub fn args(&self) -> &[Term] {
        &self.args
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.ground
    }
}

/// The universal value of the engine. Cloning is cheap: names and compound
/// bodies are reference counted and immutable.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(Var),
    Number(Number),
    Atom(Arc<str>),
    Compound(Arc<Compound>),
}

impl Term {
    pub fn var(name: impl Into<Arc<str>>) -> Term {
        Term::Var(Var::new(name))
    }

    pub fn atom(name: impl Into<Arc<str>>) -> Term {
        Term::Atom(name.into())
    }

    pub fn int(value: i64) -> Term {
        Term::Number(Number::from_integer(value))
    }

    pub fn number(value: Number) -> Term {
        Term::Number(value)
    }

    /// Builds `functor(args..)`; with no arguments this is the atom `functor`.
    pub fn compound(functor: impl Into<Arc<str>>, args: Vec<Term>) -> Term {
        let functor = functor.into();
        if args.is_empty() {
            return Term::Atom(functor);
        }
        let ground = args.iter().all(Term::is_ground);
        Term::Compound(Arc::new(Compound { functor, args, ground }))
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Number(_) | Term::Atom(_) => true,
            Term::Compound(c) => c.ground,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn as_number(&self) -> Option<&Number> {
        match self {
            Term::Number(n) => Some(n),
            _ => None,
        }
    }

    /// Name and arity for atoms and compounds.
    pub fn functor(&self) -> Option<(&str, usize)> {
        match self {
            Term::Atom(name) => Some((name, 0)),
            Term::Compound(c) => Some((&c.functor, c.args.len())),
            _ => None,
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Compound(c) => &c.args,
            _ => &[],
        }
    }

    /// Distinct variables in order of first occurrence.
    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_variables(&mut out);
        out
    }

    pub(crate) fn collect_variables(&self, out: &mut Vec<Var>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::Compound(c) if !c.ground => {
                for arg in &c.args {
                    arg.collect_variables(out);
                }
            }
            _ => {}
        }
    }

    /// Replaces the generation of every variable.
    pub fn renamed(&self, generation: u32) -> Term {
        match self {
            Term::Var(v) => Term::Var(v.renamed(generation)),
            Term::Compound(c) if !c.ground => Term::Compound(Arc::new(Compound {
                functor: Arc::clone(&c.functor),
                args: c.args.iter().map(|a| a.renamed(generation)).collect(),
                ground: false,
            })),
            _ => self.clone(),
        }
    }

    /// Canonical textual form. Parsing the result yields an equal term for
    /// generation-0 variables and numbers with terminating decimal expansions.
    pub fn render(&self) -> String {
        self.to_string()
    }

    fn priority(&self) -> u32 {
        match self {
            Term::Compound(c) => match c.args.len() {
                2 => ops::infix(&c.functor).map_or(0, |op| op.priority),
                1 if &*c.functor == "\\+" => ops::prefix("\\+").unwrap_or(0),
                _ => 0,
            },
            _ => 0,
        }
    }

    fn write_at(&self, out: &mut impl fmt::Write, max_priority: u32) -> fmt::Result {
        let priority = self.priority();
        if priority > max_priority {
            out.write_char('(')?;
            self.write_at(out, MAX_PRIORITY)?;
            return out.write_char(')');
        }
        match self {
            Term::Var(v) => write!(out, "{v}"),
            Term::Number(n) => write!(out, "{n}"),
            Term::Atom(name) => write_atom(out, name),
            Term::Compound(c) => {
                if c.args.len() == 2 {
                    if let Some(op) = ops::infix(&c.functor) {
                        let (left, right) = op.operand_limits();
                        c.args[0].write_at(out, left)?;
                        if &*c.functor == "," {
                            out.write_str(", ")?;
                        } else {
                            write!(out, " {} ", c.functor)?;
                        }
                        return c.args[1].write_at(out, right);
                    }
                }
                if c.args.len() == 1 && &*c.functor == "\\+" {
                    out.write_str("\\+ ")?;
                    return c.args[0].write_at(out, priority);
                }
                write_atom(out, &c.functor)?;
                out.write_char('(')?;
                for (i, arg) in c.args.iter().enumerate() {
                    if i > 0 {
                        out.write_str(", ")?;
                    }
                    arg.write_at(out, ARG_PRIORITY)?;
                }
                out.write_char(')')
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, MAX_PRIORITY)
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

pub(crate) fn atom_needs_quotes(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        None => true,
        Some(c) if c.is_ascii_lowercase() => !chars.all(|c| c.is_ascii_alphanumeric() || c == '_'),
        Some(_) => !(name != "." && name.chars().all(ops::is_symbol_char)),
    }
}

fn write_atom(out: &mut impl fmt::Write, name: &str) -> fmt::Result {
    if !atom_needs_quotes(name) {
        return out.write_str(name);
    }
    out.write_char('\'')?;
    for c in name.chars() {
        match c {
            '\'' => out.write_str("\\'")?,
            '\\' => out.write_str("\\\\")?,
            '\n' => out.write_str("\\n")?,
            c => out.write_char(c)?,
        }
    }
    out.write_char('\'')
}
