//! Shipped demonstrations. These are reconstructions in the style of the
//! benchmark data, not the original prompts.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    /// Two demonstrations for true/false/unknown rule reasoning.
    Logical,
    /// Five demonstrations for word problems answered by `Answer`.
    Arithmetic,
}

impl TemplateKind {
    pub fn demonstrations(self) -> &'static [(&'static str, &'static str)] {
        match self {
            TemplateKind::Logical => LOGICAL,
            TemplateKind::Arithmetic => ARITHMETIC,
        }
    }
}

const LOGICAL: &[(&str, &str)] = &[
    (
        "Context:
[triple1] Fiona is red.
[triple2] Fiona is rough.
[triple3] Bob is not green.
[rule1] If something is red and rough then it is quiet.
[rule2] Quiet things are not big.
Question: Fiona is not big.",
        "% id: triple1
red(fiona).
% id: triple2
rough(fiona).
% id: triple3
neg_green(bob).
% id: rule1
quiet(X) :- red(X), rough(X).
% id: rule2
neg_big(X) :- quiet(X).
?- neg_big(fiona).",
    ),
    (
        "Context:
[s1] Every wumpus is a tumpus.
[s2] Each tumpus is not bright.
[s3] Tumpuses are vumpuses.
[s4] Max is a wumpus.
Question: True or false: Max is not bright.",
        "% id: s1
tumpus(X) :- wumpus(X).
% id: s2
neg_bright(X) :- tumpus(X).
% id: s3
vumpus(X) :- tumpus(X).
% id: s4
wumpus(max).
?- neg_bright(max).",
    ),
];

const ARITHMETIC: &[(&str, &str)] = &[
    (
        "Question: Tina makes $18.00 an hour. If she works more than 8 hours per shift, she is eligible for overtime, which is paid by her hourly wage + 1/2 her hourly wage. If she works 10 hours every day for 5 days, how much money does she make?",
        "wage(18.00).
overtime_wage(W) :- wage(W1), W is 1.5 * W1.
regular_hours(8).
daily_hours(10).
days(5).
daily_pay(P) :- wage(W), overtime_wage(O), regular_hours(R), daily_hours(H), P is W * R + O * (H - R).
total(T) :- daily_pay(P), days(D), T is P * D.
?- total(Answer).",
    ),
    (
        "Question: Natalia sold clips to 48 of her friends in April, and then she sold half as many clips in May. How many clips did Natalia sell altogether in April and May?",
        "april(48).
may(M) :- april(A), M is A / 2.
total(T) :- april(A), may(M), T is A + M.
?- total(Answer).",
    ),
    (
        "Question: Weng earns $12 an hour for babysitting. Yesterday, she just did 50 minutes of babysitting. How much did she earn?",
        "hourly_rate(12).
minutes(50).
earned(E) :- hourly_rate(R), minutes(M), E is R * M / 60.
?- earned(Answer).",
    ),
    (
        "Question: Betty is saving money for a new wallet which costs $100. Betty has only half of the money she needs. Her parents decided to give her $15 for that purpose, and her grandparents twice as much as her parents. How much more money does Betty need to buy the wallet?",
        "price(100).
saved(S) :- price(P), S is P / 2.
parents(15).
grandparents(G) :- parents(P), G is 2 * P.
missing(M) :- price(P), saved(S), parents(A), grandparents(G), M is P - S - A - G.
?- missing(Answer).",
    ),
    (
        "Question: James writes a 3-page letter to 2 different friends twice a week. How many pages does he write a year?",
        "pages_per_letter(3).
friends(2).
times_per_week(2).
weeks_per_year(52).
pages_per_year(Y) :- pages_per_letter(L), friends(F), times_per_week(T), weeks_per_year(W), Y is L * F * T * W.
?- pages_per_year(Answer).",
    ),
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{classify_answer, solve, AnswerLabel, SearchConfig};
    use crate::parser::{parse_program, SourceProgram};
    use crate::term::Term;

    #[test]
    fn arithmetic_demos_compute_their_answers() {
        for ((_, program), expected) in ARITHMETIC.iter().zip([990, 72, 10, 5, 624]) {
            let p = parse_program(&SourceProgram::new(*program, "demo")).unwrap();
            let r = solve(&p.kb, &p.queries[0], &SearchConfig::default()).unwrap();
            assert_eq!(r.solutions[0].binding("Answer"), Some(&Term::int(expected)), "{program}");
        }
    }

    #[test]
    fn logical_demos_prove_their_questions() {
        for (_, program) in LOGICAL {
            let p = parse_program(&SourceProgram::new(*program, "demo")).unwrap();
            let crate::clause::Goal::Call(statement) = &p.queries[0][0] else { panic!() };
            let c = classify_answer(&p.kb, statement, &SearchConfig::default()).unwrap();
            assert_eq!(c.label, AnswerLabel::True);
        }
    }
}
