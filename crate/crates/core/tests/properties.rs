mod common;

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use prooflog::engine::{check_proof, classify_answer, SearchConfig};
use prooflog::metrics::{ged, proof_similarity, tree_to_dag, EditCosts, Labeling};
use prooflog::{apply, parse_program, parse_term, unify, Number, SourceProgram, Substitution, Term, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn leaf() -> impl Strategy<Value = Term> {
    prop_oneof![
        prop::sample::select(vec!["X", "Y", "Z", "W"]).prop_map(Term::var),
        prop::sample::select(vec!["a", "b", "fiona", "Hello", "it's", "[]"]).prop_map(Term::atom),
        (0i64..1000).prop_map(Term::int),
        (0i64..100, prop::sample::select(vec![2i64, 4, 5, 10])).prop_map(|(n, d)| Term::number(Number::ratio(n, d))),
    ]
}

fn term() -> impl Strategy<Value = Term> {
    leaf().prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            (prop::sample::select(vec!["f", "g", "likes"]), prop::collection::vec(inner.clone(), 1..=3))
                .prop_map(|(f, args)| Term::compound(f, args)),
            (prop::sample::select(vec!["+", "-", "*", "/", "="]), inner.clone(), inner)
                .prop_map(|(op, l, r)| Term::compound(op, vec![l, r])),
        ]
    })
}

fn ground_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        prop::sample::select(vec!["a", "b", "c"]).prop_map(Term::atom),
        (0i64..5).prop_map(Term::int),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        (prop::sample::select(vec!["f", "g"]), prop::collection::vec(inner, 1..=2))
            .prop_map(|(f, args)| Term::compound(f, args))
    })
}

/// Replaces every variable in `t` by its image under `theta`.
fn ground(t: &Term, theta: &BTreeMap<String, Term>) -> Term {
    match t {
        Term::Var(v) => theta[v.name()].clone(),
        Term::Compound(c) => Term::compound(c.functor(), c.args().iter().map(|a| ground(a, theta)).collect()),
        other => other.clone(),
    }
}

/// Cuts random subterms out of a ground term, putting a fresh variable in
/// their place and recording what was cut.
fn generalize(t: &Term, choices: &mut impl Iterator<Item = bool>, cut: &mut BTreeMap<String, Term>) -> Term {
    if choices.next().unwrap_or(false) {
        let name = format!("G{}", cut.len());
        cut.insert(name.clone(), t.clone());
        return Term::var(name);
    }
    match t {
        Term::Compound(c) => {
            Term::compound(c.functor(), c.args().iter().map(|a| generalize(a, choices, cut)).collect())
        }
        other => other.clone(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn render_parse_round_trip(t in term()) {
        let text = t.render();
        let back = parse_term(&text).map_err(|d| TestCaseError::fail(format!("{text}: {d}")))?;
        prop_assert_eq!(back, t, "{}", text);
    }

    #[test]
    fn unifiers_make_terms_equal(a in term(), b in term()) {
        if let Some(s) = unify(&a, &b, &Substitution::new(), true) {
            prop_assert_eq!(apply(&s, &a).unwrap(), apply(&s, &b).unwrap());
        }
    }

    #[test]
    fn unification_is_symmetric(a in term(), b in term()) {
        let ab = unify(&a, &b, &Substitution::new(), true);
        let ba = unify(&b, &a, &Substitution::new(), true);
        prop_assert_eq!(ab.is_some(), ba.is_some());
        if let (Some(s1), Some(s2)) = (ab, ba) {
            // Both unifiers produce the same common instance up to renaming.
            let i1 = apply(&s1, &a).unwrap();
            let i2 = apply(&s2, &a).unwrap();
            prop_assert!(unify(&i1, &i2, &Substitution::new(), true).is_some());
            prop_assert_eq!(i1.variables().len(), i2.variables().len());
        }
    }

    #[test]
    fn unifiers_are_most_general(
        t in term(),
        images in prop::collection::vec(ground_term(), 4),
        choices in prop::collection::vec(any::<bool>(), 64),
    ) {
        let theta: BTreeMap<String, Term> =
            ["X", "Y", "Z", "W"].iter().map(|v| v.to_string()).zip(images).collect();
        let instance = ground(&t, &theta);
        let mut cut = BTreeMap::new();
        let other = generalize(&instance, &mut choices.into_iter(), &mut cut);
        let mut unifier = theta.clone();
        unifier.extend(cut);
        // `unifier` unifies `t` and `other`, so an mgu must exist and
        // `unifier` must factor through it.
        let sigma = unify(&t, &other, &Substitution::new(), true);
        prop_assert!(sigma.is_some(), "{} vs {}", t, other);
        let sigma = sigma.unwrap();
        for name in unifier.keys() {
            let v = Term::Var(Var::new(name.as_str()));
            prop_assert_eq!(ground(&apply(&sigma, &v).unwrap(), &unifier), ground(&v, &unifier));
        }
    }

    #[test]
    fn occurs_check_rejects_cycles(t in term()) {
        let x = Term::var("X");
        let wrapped = Term::compound("f", vec![t.clone(), x.clone()]);
        prop_assert!(unify(&x, &wrapped, &Substitution::new(), true).is_none());
    }

    #[test]
    fn emitted_proofs_replay_and_form_dags(seed in any::<u64>()) {
        let base = common::random_rulebase(&mut ChaCha8Rng::seed_from_u64(seed));
        let program = parse_program(&SourceProgram::new(base.program_text(), "p")).unwrap();
        prop_assert_eq!(program.kb.len(), base.facts.len() + base.rules.len());
        let cfg = SearchConfig::default();
        for (p, c) in base.queries() {
            let r = classify_answer(&program.kb, &common::statement(&p, c), &cfg).unwrap();
            if let Some(proof) = r.proof {
                prop_assert!(check_proof(&program.kb, &proof, &cfg).is_ok());
                for labeling in [Labeling::ByProvenance, Labeling::ByRender] {
                    let g = tree_to_dag(&proof, labeling).unwrap();
                    prop_assert!(g.is_acyclic());
                    prop_assert!(g.validate().is_ok());
                }
            }
        }
    }

    #[test]
    fn edit_distance_is_a_symmetric_premetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = common::random_graph(&mut rng, 6);
        let b = common::random_graph(&mut rng, 6);
        let costs = EditCosts::default();
        prop_assert_eq!(ged(&a, &a, &costs, u64::MAX).distance, 0);
        let ab = ged(&a, &b, &costs, u64::MAX);
        let ba = ged(&b, &a, &costs, u64::MAX);
        prop_assert_eq!(ab.distance, ba.distance);
        let s = proof_similarity(&a, &b, true, &costs);
        prop_assert!(s >= BigRational::zero() && s <= BigRational::one());
        prop_assert_eq!(proof_similarity(&a, &b, false, &costs), BigRational::zero());
    }

    #[test]
    fn small_budgets_give_upper_bounds(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = common::random_graph(&mut rng, 6);
        let b = common::random_graph(&mut rng, 6);
        let exact = ged(&a, &b, &EditCosts::default(), u64::MAX);
        let rough = ged(&a, &b, &EditCosts::default(), 3);
        prop_assert!(rough.distance >= exact.distance);
        if !rough.exact {
            prop_assert!(rough.distance <= (a.size() + b.size()) as u64);
        }
    }
}
