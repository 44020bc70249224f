//! Property tests: random patterns and words against the independent
//! recursive language definition, the evaluator's determinism, and the
//! compiled engine.

use proptest::prelude::*;

use hypermatch::automata::{
    self, concat, difference, equivalent, intersect, inverse_project, project, thompson, union,
    Limits, MarkedWord, Nfa,
};
use hypermatch::hyper::{compile, count_accepting_runs};
use hypermatch::oracle::{self, MatchOutcome};
use hypermatch::pattern::{Alphabet, Pattern, Word};
use hypermatch::runtime::Matcher;

fn ab() -> Alphabet {
    Alphabet::new(['a', 'b']).unwrap()
}

fn lim() -> Limits {
    Limits::default()
}

fn pattern_strategy() -> impl Strategy<Value = Pattern> {
    let leaf = prop_oneof![
        1 => Just(Pattern::Epsilon),
        3 => Just(Pattern::sym('a')),
        3 => Just(Pattern::sym('b')),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Pattern::alt(l, r)),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Pattern::cat(l, r)),
            inner.prop_map(Pattern::star),
        ]
    })
}

fn word_strategy(max_len: usize) -> impl Strategy<Value = Word> {
    proptest::collection::vec(prop_oneof![Just('a'), Just('b')], 0..=max_len)
        .prop_map(|cs| Word::parse(&cs.into_iter().collect::<String>(), &ab()).unwrap())
}

/// Language membership by plain recursion on the pattern, the reference
/// all automata constructions are held to.
fn lang_contains(p: &Pattern, s: &[char]) -> bool {
    match p {
        Pattern::Epsilon => s.is_empty(),
        Pattern::Sym(sym) => s.len() == 1 && s[0] == sym.as_char(),
        Pattern::Alt(l, r) => lang_contains(l, s) || lang_contains(r, s),
        Pattern::Cat(l, r) => {
            (0..=s.len()).any(|k| lang_contains(l, &s[..k]) && lang_contains(r, &s[k..]))
        }
        Pattern::Star(c) => {
            s.is_empty()
                || (1..=s.len()).any(|k| lang_contains(c, &s[..k]) && lang_contains(p, &s[k..]))
        }
    }
}

fn chars_of(w: &Word) -> Vec<char> {
    w.symbols().iter().map(|s| s.as_char()).collect()
}

proptest! {
    #[test]
    fn print_then_parse_is_identity(p in pattern_strategy()) {
        let text = p.to_string();
        let back = Pattern::parse(&text, &ab()).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn thompson_matches_recursive_language(p in pattern_strategy(), w in word_strategy(5)) {
        let a = thompson(&p, &ab());
        prop_assert_eq!(a.accepts_word(&w), lang_contains(&p, &chars_of(&w)));
    }

    #[test]
    fn evaluator_is_semantically_correct(p in pattern_strategy(), w in word_strategy(4)) {
        let matched = oracle::oracle_match(&p, &w).is_match();
        prop_assert_eq!(matched, lang_contains(&p, &chars_of(&w)));
    }

    #[test]
    fn evaluator_is_deterministic(p in pattern_strategy(), w in word_strategy(4)) {
        let all = oracle::oracle_match_all(&p, &w);
        prop_assert!(all.len() <= 1);
        match (oracle::oracle_match(&p, &w), all.first()) {
            (MatchOutcome::Match(v), Some(u)) => prop_assert_eq!(&v, u),
            (MatchOutcome::NoMatch, None) => {}
            other => prop_assert!(false, "evaluator and enumeration disagree: {:?}", other),
        }
    }

    #[test]
    fn match_root_binds_the_whole_word(p in pattern_strategy(), w in word_strategy(4)) {
        if let MatchOutcome::Match(v) = oracle::oracle_match(&p, &w) {
            prop_assert_eq!(v.root(), Some(&w));
        }
    }

    #[test]
    fn projection_of_inverse_projection_is_identity(p in pattern_strategy()) {
        let a = thompson(&p, &ab());
        let round = project(&inverse_project(&a));
        prop_assert!(equivalent(&a, &round, &lim()).unwrap());
    }

    #[test]
    fn algebra_agrees_with_set_semantics(
        p1 in pattern_strategy(),
        p2 in pattern_strategy(),
        w in word_strategy(5),
    ) {
        let a1 = thompson(&p1, &ab());
        let a2 = thompson(&p2, &ab());
        let s = chars_of(&w);
        let mw = MarkedWord::from_word(&w);
        let in1 = lang_contains(&p1, &s);
        let in2 = lang_contains(&p2, &s);
        prop_assert_eq!(union(&a1, &a2).unwrap().nfa.accepts(&mw), in1 || in2);
        prop_assert_eq!(intersect(&a1, &a2, &lim()).unwrap().nfa.accepts(&mw), in1 && in2);
        prop_assert_eq!(difference(&a1, &a2, &lim()).unwrap().accepts(&mw), in1 && !in2);
        let cat_member = (0..=s.len())
            .any(|k| lang_contains(&p1, &s[..k]) && lang_contains(&p2, &s[k..]));
        prop_assert_eq!(concat(&a1, &a2).unwrap().nfa.accepts(&mw), cat_member);
    }

    #[test]
    fn quotients_agree_with_definitions(
        p1 in pattern_strategy(),
        p2 in pattern_strategy(),
        w in word_strategy(4),
    ) {
        let k = thompson(&p1, &ab());
        let l = thompson(&p2, &ab());
        let s = chars_of(&w);
        let mut all_short: Vec<Vec<char>> = vec![vec![]];
        let mut layer: Vec<Vec<char>> = vec![vec![]];
        for _ in 0..4 {
            let mut next = Vec::new();
            for x in &layer {
                for c in ['a', 'b'] {
                    let mut y = x.clone();
                    y.push(c);
                    next.push(y);
                }
            }
            all_short.extend(next.iter().cloned());
            layer = next;
        }
        let lq = automata::left_quotient(&k, &l, &lim()).unwrap();
        let expect_lq = all_short.iter().any(|prefix| {
            let mut full = prefix.clone();
            full.extend(&s);
            lang_contains(&p1, prefix) && lang_contains(&p2, &full)
        });
        prop_assert_eq!(lq.accepts(&MarkedWord::from_word(&w)), expect_lq);
        let rq = automata::right_quotient(&l, &k, &lim()).unwrap();
        let expect_rq = all_short.iter().any(|suffix| {
            let mut full = s.clone();
            full.extend(suffix);
            lang_contains(&p1, suffix) && lang_contains(&p2, &full)
        });
        prop_assert_eq!(rq.accepts(&MarkedWord::from_word(&w)), expect_rq);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compiled_engine_agrees_with_evaluator(
        p in pattern_strategy(),
        w in word_strategy(4),
        ctx_choice in 0usize..3,
    ) {
        let contexts = ["(a+b)*", "a*b*", "(ab)*"];
        let c = thompson(&Pattern::parse(contexts[ctx_choice], &ab()).unwrap(), &ab());
        let h = compile(&p, &c, contexts[ctx_choice], &lim()).unwrap();
        let engine = Matcher::new(&h).match_word(&w);
        let truth = if c.accepts_word(&w) {
            oracle::oracle_match(&p, &w)
        } else {
            MatchOutcome::NoMatch
        };
        prop_assert_eq!(engine, truth);
        prop_assert!(count_accepting_runs(&h, &w) <= 1);
    }

    #[test]
    fn hyperautomaton_roundtrips_through_json(p in pattern_strategy()) {
        let c = Nfa::universal(ab(), false);
        let h = compile(&p, &c, "<all words>", &lim()).unwrap();
        let back = hypermatch::hyper::Hyperautomaton::from_json_str(&h.to_json_string()).unwrap();
        prop_assert_eq!(&back.pattern, &h.pattern);
        prop_assert_eq!(&back.triples, &h.triples);
        prop_assert!(equivalent(&back.automaton, &h.automaton, &lim()).unwrap());
    }
}
