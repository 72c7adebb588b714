//! Arithmetic evaluation and the built-in predicates.

use std::cmp::Ordering;

use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::clause::{Builtin, BuiltinOp};
use crate::subst::{apply, resolve, unify_in_place, Substitution};
use crate::term::{Number, Term, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuiltinError {
    #[error("instantiation error: {0} is not sufficiently instantiated")]
    Instantiation(String),
    #[error("division by zero in {0}")]
    DivisionByZero(String),
    #[error("type error: {0} is not an arithmetic expression")]
    NotEvaluable(String),
    #[error("cyclic term in {0}")]
    Cyclic(String),
}

/// Evaluates an arithmetic expression over exact rationals.
pub fn evaluate(expr: &Term, subst: &Substitution) -> Result<BigRational, BuiltinError> {
    match subst.walk(expr) {
        Term::Number(n) => Ok(n.value().clone()),
        Term::Var(_) => Err(BuiltinError::Instantiation(render(expr, subst))),
        Term::Atom(name) => Err(BuiltinError::NotEvaluable(name.to_string())),
        Term::Compound(c) => {
            let args = c.args();
            match (c.functor(), args.len()) {
                ("-", 1) => Ok(-evaluate(&args[0], subst)?),
                (op @ ("+" | "-" | "*" | "/"), 2) => {
                    let lhs = evaluate(&args[0], subst)?;
                    let rhs = evaluate(&args[1], subst)?;
                    Ok(match op {
                        "+" => lhs + rhs,
                        "-" => lhs - rhs,
                        "*" => lhs * rhs,
                        _ => {
                            if rhs.is_zero() {
                                return Err(BuiltinError::DivisionByZero(render(expr, subst)));
                            }
                            lhs / rhs
                        }
                    })
                }
                (name, arity) => Err(BuiltinError::NotEvaluable(format!("{name}/{arity}"))),
            }
        }
    }
}

fn render(term: &Term, subst: &Substitution) -> String {
    apply(subst, term).unwrap_or_else(|_| term.clone()).render()
}

/// Runs a built-in against a mutable substitution. `Ok(None)` is plain
/// failure; on success the value computed by `is` is returned alongside.
pub(crate) fn run_builtin(
    goal: &Builtin,
    subst: &mut Substitution,
    trail: &mut Vec<Var>,
    occurs_check: bool,
) -> Result<Option<Option<Term>>, BuiltinError> {
    let compare = |subst: &Substitution| -> Result<Ordering, BuiltinError> {
        let lhs = evaluate(&goal.lhs, subst)?;
        let rhs = evaluate(&goal.rhs, subst)?;
        Ok(lhs.cmp(&rhs))
    };
    let identical = |subst: &Substitution| -> Result<bool, BuiltinError> {
        let cyclic = |_| BuiltinError::Cyclic(goal.to_term().render());
        Ok(apply(subst, &goal.lhs).map_err(cyclic)? == apply(subst, &goal.rhs).map_err(cyclic)?)
    };
    let holds = match goal.op {
        BuiltinOp::Is => {
            let value = Term::Number(Number::new(evaluate(&goal.rhs, subst)?));
            if unify_in_place(&goal.lhs, &value, subst, occurs_check, trail) {
                return Ok(Some(Some(value)));
            }
            false
        }
        BuiltinOp::Unify => unify_in_place(&goal.lhs, &goal.rhs, subst, occurs_check, trail),
        BuiltinOp::Identical => identical(subst)?,
        BuiltinOp::NotIdentical => !identical(subst)?,
        BuiltinOp::Less => compare(subst)? == Ordering::Less,
        BuiltinOp::Greater => compare(subst)? == Ordering::Greater,
        BuiltinOp::LessEq => compare(subst)? != Ordering::Greater,
        BuiltinOp::GreaterEq => compare(subst)? != Ordering::Less,
        BuiltinOp::ArithEq => compare(subst)? == Ordering::Equal,
        BuiltinOp::ArithNe => compare(subst)? != Ordering::Equal,
    };
    Ok(holds.then_some(None))
}

/// Evaluates a built-in goal under `subst`. Returns the extended
/// substitution on success and `None` on failure.
pub fn call_builtin(
    goal: &Builtin,
    subst: &Substitution,
    occurs_check: bool,
) -> Result<Option<Substitution>, BuiltinError> {
    let mut out = subst.clone();
    let mut trail = Vec::new();
    match run_builtin(goal, &mut out, &mut trail, occurs_check)? {
        Some(_) => Ok(Some(resolve(out))),
        None => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_query;
    use crate::clause::Goal;

    fn builtin(text: &str) -> Builtin {
        match parse_query(text).unwrap().remove(0) {
            Goal::Builtin(b) => b,
            other => panic!("not a builtin: {other}"),
        }
    }

    #[test]
    fn is_binds_exact_product() {
        let s = call_builtin(&builtin("W is 1.5 * 18"), &Substitution::new(), false).unwrap().unwrap();
        assert_eq!(s.get(&Var::new("W")), Some(&Term::int(27)));
    }

    #[test]
    fn is_checks_bound_left_side() {
        assert!(call_builtin(&builtin("27 is 1.5 * 18"), &Substitution::new(), false).unwrap().is_some());
        assert!(call_builtin(&builtin("26 is 1.5 * 18"), &Substitution::new(), false).unwrap().is_none());
    }

    #[test]
    fn arithmetic_comparisons() {
        let s = Substitution::new();
        assert!(call_builtin(&builtin("3 =:= 6/2"), &s, false).unwrap().is_some());
        assert!(call_builtin(&builtin("3 =\\= 6/2"), &s, false).unwrap().is_none());
        assert!(call_builtin(&builtin("0.1 + 0.2 =:= 0.3"), &s, false).unwrap().is_some());
        assert!(call_builtin(&builtin("2 < 3"), &s, false).unwrap().is_some());
        assert!(call_builtin(&builtin("3 =< 3"), &s, false).unwrap().is_some());
        assert!(call_builtin(&builtin("-(2) >= -1"), &s, false).unwrap().is_none());
    }

    #[test]
    fn unbound_comparison_is_instantiation_error() {
        let err = call_builtin(&builtin("X < 3"), &Substitution::new(), false).unwrap_err();
        assert!(matches!(err, BuiltinError::Instantiation(_)));
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let err = call_builtin(&builtin("X is 1 / (2 - 2)"), &Substitution::new(), false).unwrap_err();
        assert!(matches!(err, BuiltinError::DivisionByZero(_)));
    }

    #[test]
    fn identity_does_not_bind() {
        let s = Substitution::new();
        assert!(call_builtin(&builtin("X == Y"), &s, false).unwrap().is_none());
        assert!(call_builtin(&builtin("X \\== Y"), &s, false).unwrap().is_some());
        let s = call_builtin(&builtin("X = f(Y)"), &s, false).unwrap().unwrap();
        assert!(call_builtin(&builtin("X == f(Y)"), &s, false).unwrap().is_some());
    }

    #[test]
    fn repeated_evaluation_is_stable() {
        let b = builtin("X is 1/3 + 1/6");
        let first = call_builtin(&b, &Substitution::new(), false).unwrap();
        let second = call_builtin(&b, &Substitution::new(), false).unwrap();
        assert_eq!(first, second);
        assert_eq!(first.unwrap().get(&Var::new("X")), Some(&Term::number(Number::ratio(1, 2))));
    }
}
