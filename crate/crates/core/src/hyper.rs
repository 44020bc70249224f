//! Compilation of a pattern and context into a *hyperautomaton*: one
//! unambiguous automaton recognizing `L(P) ∩ C` together with, for every
//! bindable node, a triple of state sets whose sub-automaton recognizes
//! exactly that node's type.  One object is both the type container and
//! the matching engine; the runtime extracts captures from it in a single
//! forward/backward scan because every word has at most one accepting run.
//!
//! The compiler mirrors the inference recursion.  Base shapes determinize
//! directly; alternation unions two disjoint compilations; a letter or
//! empty head concatenates; a star head builds the product of the chained
//! automaton `T1 · {#} · A2` with a deterministic automaton for the break
//! set and then erases the marker; the two remaining shapes reassociate or
//! distribute and recover their triples by address surgery.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::automata::{
    box_dfa, concat, determinize, difference, intersect, left_quotient, project, right_quotient,
    thompson, union, AutomataError, Label, Limits, Nfa,
};
use crate::infer::{kleene_triple, InferError};
use crate::pattern::{NodeAddress, Pattern, Word};

type Result<T> = std::result::Result<T, InferError>;

/// A set of host-automaton states with designated entry and exit subsets;
/// `(states, initials, finals)` under the host's transitions recognizes
/// one node's type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateTriple {
    pub states: BTreeSet<usize>,
    pub initials: BTreeSet<usize>,
    pub finals: BTreeSet<usize>,
}

impl StateTriple {
    fn full(nfa: &Nfa) -> StateTriple {
        StateTriple {
            states: (0..nfa.num_states()).collect(),
            initials: nfa.initials().clone(),
            finals: nfa.finals().clone(),
        }
    }

    fn mapped(&self, f: impl Fn(usize) -> usize) -> StateTriple {
        StateTriple {
            states: self.states.iter().map(|&q| f(q)).collect(),
            initials: self.initials.iter().map(|&q| f(q)).collect(),
            finals: self.finals.iter().map(|&q| f(q)).collect(),
        }
    }

    fn union_with(&self, other: &StateTriple) -> StateTriple {
        StateTriple {
            states: self.states.union(&other.states).copied().collect(),
            initials: self.initials.union(&other.initials).copied().collect(),
            finals: self.finals.union(&other.finals).copied().collect(),
        }
    }

    /// Componentwise pairing with every state of a right factor of size
    /// `right_count`, under the product numbering.
    fn crossed(&self, right_count: usize, pair: impl Fn(usize, usize) -> usize) -> StateTriple {
        let cross = |set: &BTreeSet<usize>| -> BTreeSet<usize> {
            let mut out = BTreeSet::new();
            for &q in set {
                for s in 0..right_count {
                    out.insert(pair(q, s));
                }
            }
            out
        };
        StateTriple {
            states: cross(&self.states),
            initials: cross(&self.initials),
            finals: cross(&self.finals),
        }
    }
}

/// The compiled artifact: automaton, per-node triples, and the inputs it
/// was compiled from.
#[derive(Debug, Clone)]
pub struct Hyperautomaton {
    pub automaton: Nfa,
    pub triples: BTreeMap<NodeAddress, StateTriple>,
    pub pattern: Pattern,
    pub context_text: String,
}

impl Hyperautomaton {
    pub fn triple(&self, n: &NodeAddress) -> Option<&StateTriple> {
        self.triples.get(n)
    }

    /// The sub-automaton induced by a node's triple: the host automaton
    /// with the triple's entries and exits as initial and final states.
    /// The full transition relation stays available — a path between two
    /// triple states may pass through glue states outside the triple, and
    /// only the endpoints matter for the recognized type.  The state set
    /// itself is what bound extraction intersects against.
    pub fn sub_automaton(&self, n: &NodeAddress) -> Option<Nfa> {
        let t = self.triples.get(n)?;
        let all: BTreeSet<usize> = (0..self.automaton.num_states()).collect();
        Some(self.automaton.restricted(&all, &t.initials, &t.finals))
    }
}

/// Compiles the hyperautomaton for `p` under `context`.
pub fn compile(
    p: &Pattern,
    context: &Nfa,
    context_text: &str,
    limits: &Limits,
) -> Result<Hyperautomaton> {
    let (automaton, triples) = build(p, context, limits)?;
    debug_assert!(p.bindable_nodes().iter().all(|n| triples.contains_key(n)));
    Ok(Hyperautomaton {
        automaton,
        triples,
        pattern: p.clone(),
        context_text: context_text.to_string(),
    })
}

fn build(
    p: &Pattern,
    context: &Nfa,
    limits: &Limits,
) -> Result<(Nfa, BTreeMap<NodeAddress, StateTriple>)> {
    let alphabet = context.alphabet().clone();
    let mut triples: BTreeMap<NodeAddress, StateTriple> = BTreeMap::new();

    match p {
        Pattern::Epsilon | Pattern::Sym(_) | Pattern::Star(_) => {
            let d = determinize(&intersect(&thompson(p, &alphabet), context, limits)?.nfa, limits)?;
            let a = d.into_nfa();
            triples.insert(NodeAddress::root(), StateTriple::full(&a));
            Ok((a, triples))
        }

        Pattern::Alt(l, r) => {
            let (a1, t1) = build(l, context, limits)?;
            let second_context = difference(context, &thompson(l, &alphabet), limits)?.trimmed();
            let (a2, t2) = build(r, &second_context, limits)?;
            let u = union(&a1, &a2)?;
            triples.insert(NodeAddress::root(), StateTriple::full(&u.nfa));
            for (n, t) in t1 {
                triples.insert(
                    n.prefixed_by(&NodeAddress::root().child(1)),
                    t.mapped(|q| u.left.map(q)),
                );
            }
            for (n, t) in t2 {
                triples.insert(
                    n.prefixed_by(&NodeAddress::root().child(2)),
                    t.mapped(|q| u.right.map(q)),
                );
            }
            Ok((u.nfa, triples))
        }

        Pattern::Cat(head, tail) => match head.as_ref() {
            Pattern::Epsilon | Pattern::Sym(_) => {
                let head_context = right_quotient(context, &thompson(tail, &alphabet), limits)?;
                let tail_context = match head.as_ref() {
                    Pattern::Epsilon => context.clone(),
                    _ => left_quotient(&thompson(head, &alphabet), context, limits)?.trimmed(),
                };
                let (a1, t1) = build(head, &head_context, limits)?;
                let (a2, t2) = build(tail, &tail_context, limits)?;
                let c = concat(&a1, &a2)?;
                triples.insert(NodeAddress::root(), StateTriple::full(&c.nfa));
                for (n, t) in t1 {
                    triples.insert(
                        n.prefixed_by(&NodeAddress::root().child(1)),
                        t.mapped(|q| c.left.map(q)),
                    );
                }
                for (n, t) in t2 {
                    triples.insert(
                        n.prefixed_by(&NodeAddress::root().child(2)),
                        t.mapped(|q| c.right.map(q)),
                    );
                }
                Ok((c.nfa, triples))
            }

            Pattern::Star(body) => {
                let kt = kleene_triple(body, tail, context, limits)?;
                let a_break = determinize(&kt.break_set, limits)?;
                let a_star = determinize(&kt.star_type.lift_marked(), limits)?;
                let (a2, t2) = build(tail, &kt.tail_context, limits)?;
                let a2m = a2.lift_marked();
                let marker = box_dfa(alphabet.clone());
                let c1 = concat(a_star.as_nfa(), marker.as_nfa())?;
                let c2 = concat(&c1.nfa, &a2m)?;
                let prod = intersect(&c2.nfa, a_break.as_nfa(), limits)?;
                let a = project(&prod.nfa);

                let star_states = a_star.as_nfa().num_states();
                let break_states = a_break.num_states();
                let star_triple = StateTriple::full(a_star.as_nfa())
                    .mapped(|q| c2.left.map(c1.left.map(q)))
                    .crossed(break_states, |q, s| prod.pair_id(q, s));
                debug_assert_eq!(star_triple.states.len(), star_states * break_states);
                triples.insert(NodeAddress::root(), StateTriple::full(&a));
                triples.insert(NodeAddress::root().child(1), star_triple);
                for (n, t) in t2 {
                    triples.insert(
                        n.prefixed_by(&NodeAddress::root().child(2)),
                        t.mapped(|q| c2.right.map(q))
                            .crossed(break_states, |q, s| prod.pair_id(q, s)),
                    );
                }
                Ok((a, triples))
            }

            Pattern::Cat(h1, h2) => {
                let reassoc = Pattern::cat(
                    (**h1).clone(),
                    Pattern::cat((**h2).clone(), (**tail).clone()),
                );
                let (a, inner) = build(&reassoc, context, limits)?;

                let addr = |digits: &[u8]| {
                    let mut a = NodeAddress::root();
                    for &d in digits {
                        a = a.child(d);
                    }
                    a
                };
                let head_triple = {
                    let left = &inner[&addr(&[1])];
                    let mid = &inner[&addr(&[2, 1])];
                    let states: BTreeSet<usize> =
                        left.states.union(&mid.states).copied().collect();
                    let initials: BTreeSet<usize> = states
                        .intersection(a.initials())
                        .copied()
                        .collect();
                    // Exits of the head: exits of its second part that can
                    // hand over to the tail along empty-word steps and
                    // still complete a match.
                    let can_finish = co_reachable(&a, a.finals());
                    let targets: BTreeSet<usize> = inner[&addr(&[2, 2])]
                        .initials
                        .iter()
                        .copied()
                        .filter(|q| can_finish[*q])
                        .collect();
                    let finals: BTreeSet<usize> = mid
                        .finals
                        .iter()
                        .copied()
                        .filter(|&q| eps_forward(&a, q).iter().any(|x| targets.contains(x)))
                        .collect();
                    StateTriple {
                        states,
                        initials,
                        finals,
                    }
                };

                triples.insert(NodeAddress::root(), inner[&NodeAddress::root()].clone());
                triples.insert(NodeAddress::root().child(1), head_triple);
                for (n, t) in inner {
                    if let Some(rest) = n.strip_prefix(&[1]) {
                        triples.insert(rest.prefixed_by(&addr(&[1, 1])), t);
                    } else if let Some(rest) = n.strip_prefix(&[2, 1]) {
                        triples.insert(rest.prefixed_by(&addr(&[1, 2])), t);
                    } else if let Some(rest) = n.strip_prefix(&[2, 2]) {
                        triples.insert(rest.prefixed_by(&addr(&[2])), t);
                    }
                }
                Ok((a, triples))
            }

            Pattern::Alt(h1, h2) => {
                let distributed = Pattern::alt(
                    Pattern::cat((**h1).clone(), (**tail).clone()),
                    Pattern::cat((**h2).clone(), (**tail).clone()),
                );
                let (a, inner) = build(&distributed, context, limits)?;
                let addr = |digits: &[u8]| {
                    let mut a = NodeAddress::root();
                    for &d in digits {
                        a = a.child(d);
                    }
                    a
                };
                triples.insert(NodeAddress::root(), inner[&NodeAddress::root()].clone());
                triples.insert(
                    NodeAddress::root().child(1),
                    inner[&addr(&[1, 1])].union_with(&inner[&addr(&[2, 1])]),
                );
                // The shared tail appears in both alternatives; its triples
                // are the componentwise unions of the two copies.
                let mut tail_entries: BTreeMap<NodeAddress, StateTriple> = BTreeMap::new();
                for (n, t) in &inner {
                    if let Some(rest) = n.strip_prefix(&[1, 2]) {
                        tail_entries.insert(rest, t.clone());
                    }
                }
                for (n, t) in &inner {
                    if let Some(rest) = n.strip_prefix(&[2, 2]) {
                        let merged = tail_entries[&rest].union_with(t);
                        tail_entries.insert(rest, merged);
                    }
                }
                for (rest, t) in tail_entries {
                    triples.insert(rest.prefixed_by(&addr(&[2])), t);
                }
                for (n, t) in inner {
                    if let Some(rest) = n.strip_prefix(&[1, 1]) {
                        triples.insert(rest.prefixed_by(&addr(&[1, 1])), t);
                    } else if let Some(rest) = n.strip_prefix(&[2, 1]) {
                        triples.insert(rest.prefixed_by(&addr(&[1, 2])), t);
                    }
                }
                Ok((a, triples))
            }
        },
    }
}

/// States from which some state of `targets` is reachable.
fn co_reachable(a: &Nfa, targets: &BTreeSet<usize>) -> Vec<bool> {
    let n = a.num_states();
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (f, _, t) in a.edges() {
        rev[t].push(f);
    }
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = targets.iter().copied().collect();
    for &q in targets {
        seen[q] = true;
    }
    while let Some(q) = stack.pop() {
        for &from in &rev[q] {
            if !seen[from] {
                seen[from] = true;
                stack.push(from);
            }
        }
    }
    seen
}

/// States reachable from `q` along empty-word transitions (including `q`).
fn eps_forward(a: &Nfa, q: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([q]);
    let mut stack = vec![q];
    while let Some(x) = stack.pop() {
        for &(l, to) in a.edges_from(x) {
            if l == Label::Eps && seen.insert(to) {
                stack.push(to);
            }
        }
    }
    seen
}

/// Number of distinct accepting runs of the hyperautomaton on the word,
/// saturating at `u64::MAX`.  Empty-word transitions never cycle, so the
/// count is finite; unambiguity says it is at most one.
pub fn count_accepting_runs(h: &Hyperautomaton, w: &Word) -> u64 {
    let a = &h.automaton;
    let topo = a.eps_topo_order().expect("empty-word transitions are acyclic");
    let n = a.num_states();
    let propagate = |counts: &mut Vec<u64>| {
        for &q in &topo {
            if counts[q] > 0 {
                for &(l, to) in a.edges_from(q) {
                    if l == Label::Eps {
                        counts[to] = counts[to].saturating_add(counts[q]);
                    }
                }
            }
        }
    };
    let mut counts = vec![0u64; n];
    for &q in a.initials() {
        counts[q] = 1;
    }
    propagate(&mut counts);
    for sym in w.symbols() {
        let mut next = vec![0u64; n];
        for (q, &count) in counts.iter().enumerate() {
            if count > 0 {
                for &(l, to) in a.edges_from(q) {
                    if l == Label::Sym(*sym) {
                        next[to] = next[to].saturating_add(count);
                    }
                }
            }
        }
        propagate(&mut next);
        counts = next;
    }
    a.finals()
        .iter()
        .fold(0u64, |acc, &q| acc.saturating_add(counts[q]))
}

// ---- serialization ----------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TripleDto {
    states: Vec<usize>,
    initials: Vec<usize>,
    finals: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct HyperDto {
    #[serde(flatten)]
    automaton: crate::automata::NfaDto,
    triples: BTreeMap<String, TripleDto>,
    pattern: String,
    context: String,
}

impl Hyperautomaton {
    pub fn to_json(&self) -> serde_json::Value {
        let dto = HyperDto {
            automaton: self.automaton.to_dto(),
            triples: self
                .triples
                .iter()
                .map(|(n, t)| {
                    (
                        n.to_string(),
                        TripleDto {
                            states: t.states.iter().copied().collect(),
                            initials: t.initials.iter().copied().collect(),
                            finals: t.finals.iter().copied().collect(),
                        },
                    )
                })
                .collect(),
            pattern: self.pattern.to_string(),
            context: self.context_text.clone(),
        };
        serde_json::to_value(&dto).expect("hyperautomaton serializes")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("hyperautomaton serializes")
    }

    pub fn from_json_str(s: &str) -> std::result::Result<Hyperautomaton, AutomataError> {
        let bad = |msg: String| AutomataError::BadSerialization(msg);
        let dto: HyperDto =
            serde_json::from_str(s).map_err(|e| bad(format!("not a hyperautomaton: {e}")))?;
        let automaton = Nfa::from_dto(&dto.automaton)?;
        let pattern = Pattern::parse(&dto.pattern, automaton.alphabet())
            .map_err(|e| bad(format!("bad pattern: {e}")))?;
        let mut triples = BTreeMap::new();
        for (key, t) in &dto.triples {
            let n = NodeAddress::parse(key).map_err(|e| bad(format!("bad node key: {e}")))?;
            for &q in t.states.iter().chain(&t.initials).chain(&t.finals) {
                if q >= automaton.num_states() {
                    return Err(bad(format!("triple state {q} out of range")));
                }
            }
            triples.insert(
                n,
                StateTriple {
                    states: t.states.iter().copied().collect(),
                    initials: t.initials.iter().copied().collect(),
                    finals: t.finals.iter().copied().collect(),
                },
            );
        }
        for n in pattern.bindable_nodes() {
            if !triples.contains_key(&n) {
                return Err(bad(format!("missing triple for bindable node {n}")));
            }
        }
        Ok(Hyperautomaton {
            automaton,
            triples,
            pattern,
            context_text: dto.context,
        })
    }

    /// GraphViz rendering with triple membership as state annotations.
    pub fn to_dot(&self) -> String {
        self.automaton.to_dot("hyperautomaton", |q| {
            let mut tags = Vec::new();
            for (n, t) in &self.triples {
                if t.states.contains(&q) {
                    let mut tag = n.to_string();
                    if t.initials.contains(&q) {
                        tag.push('^');
                    }
                    if t.finals.contains(&q) {
                        tag.push('$');
                    }
                    tags.push(tag);
                }
            }
            if tags.is_empty() {
                None
            } else {
                Some(tags.join(","))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::equivalent;
    use crate::infer;
    use crate::pattern::Alphabet;

    fn ab() -> Alphabet {
        Alphabet::new(['a', 'b']).unwrap()
    }

    fn lim() -> Limits {
        Limits::default()
    }

    fn pat(s: &str) -> Pattern {
        Pattern::parse(s, &ab()).unwrap()
    }

    fn ctx(s: &str) -> Nfa {
        thompson(&pat(s), &ab())
    }

    fn sigma_star() -> Nfa {
        Nfa::universal(ab(), false)
    }

    fn word(s: &str) -> Word {
        Word::parse(s, &ab()).unwrap()
    }

    fn addr(s: &str) -> NodeAddress {
        NodeAddress::parse(s).unwrap()
    }

    #[test]
    fn single_letter_compiles_to_its_language() {
        let h = compile(&pat("a"), &sigma_star(), "(a+b)*", &lim()).unwrap();
        assert!(h.automaton.accepts_word(&word("a")));
        assert!(!h.automaton.accepts_word(&word("b")));
        assert!(!h.automaton.accepts_word(&word("aa")));
        assert_eq!(
            h.triples[&NodeAddress::root()],
            StateTriple::full(&h.automaton)
        );
    }

    #[test]
    fn counterexample_pattern_under_exact_context() {
        let h = compile(&pat("(a+ab)*(b+_)"), &ctx("ab"), "ab", &lim()).unwrap();
        let lang = h.automaton.enumerate(4);
        assert_eq!(
            lang.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
            vec!["ab"]
        );
        let star = h.sub_automaton(&addr("1")).unwrap();
        assert_eq!(
            star.enumerate(4).iter().map(|w| w.to_string()).collect::<Vec<_>>(),
            vec!["ab"]
        );
        let tail = h.sub_automaton(&addr("2")).unwrap();
        assert_eq!(
            tail.enumerate(4).iter().map(|w| w.to_string()).collect::<Vec<_>>(),
            vec![""]
        );
    }

    fn corpus() -> Vec<(&'static str, &'static str)> {
        let patterns = [
            "(a+ab)*(b+_)",
            "(a+a*)a*(a+_)",
            "a*(b+_)",
            "((ab)a)(b+_)",
            "((a+b)a)b",
            "(_+a)(a+_)",
            "(a*b)(a+_)",
            "(ab)*",
            "b+a*",
        ];
        let contexts = ["(a+b)*", "a*b*", "(ab)*", "ab"];
        patterns
            .iter()
            .flat_map(|&p| contexts.iter().map(move |&c| (p, c)))
            .collect()
    }

    #[test]
    fn type_correspondence_on_corpus() {
        for (ps, cs) in corpus() {
            let p = pat(ps);
            let c = ctx(cs);
            let h = compile(&p, &c, cs, &lim()).unwrap();
            let inf = infer::infer(&p, &c, &lim()).unwrap();
            for n in p.bindable_nodes() {
                let sub = h.sub_automaton(&n).unwrap();
                assert!(
                    equivalent(&sub, &inf.types[&n], &lim()).unwrap(),
                    "triple language at {n} of {ps} under {cs}"
                );
            }
        }
    }

    fn all_words(max_len: usize) -> Vec<Word> {
        let mut out = vec![String::new()];
        let mut layer = vec![String::new()];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for s in &layer {
                for ch in ['a', 'b'] {
                    next.push(format!("{s}{ch}"));
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out.iter().map(|s| word(s)).collect()
    }

    #[test]
    fn unambiguity_on_corpus() {
        for (ps, cs) in corpus() {
            let h = compile(&pat(ps), &ctx(cs), cs, &lim()).unwrap();
            for w in all_words(4) {
                let runs = count_accepting_runs(&h, &w);
                assert!(runs <= 1, "{ps} under {cs} has {runs} runs on {w}");
            }
        }
    }

    #[test]
    fn run_counts_match_acceptance() {
        let h = compile(&pat("a+a"), &sigma_star(), "(a+b)*", &lim()).unwrap();
        assert_eq!(count_accepting_runs(&h, &word("a")), 1);
        assert_eq!(count_accepting_runs(&h, &word("b")), 0);
        let h = compile(&pat("(a+ab)*(b+_)"), &sigma_star(), "(a+b)*", &lim()).unwrap();
        assert_eq!(count_accepting_runs(&h, &word("ab")), 1);
    }

    #[test]
    fn serialization_roundtrip() {
        let h = compile(&pat("(a+ab)*(b+_)"), &ctx("a*b*"), "a*b*", &lim()).unwrap();
        let json = h.to_json_string();
        let back = Hyperautomaton::from_json_str(&json).unwrap();
        assert_eq!(back.pattern, h.pattern);
        assert_eq!(back.context_text, h.context_text);
        assert_eq!(back.triples, h.triples);
        assert!(equivalent(&back.automaton, &h.automaton, &lim()).unwrap());
        for w in all_words(4) {
            assert_eq!(
                count_accepting_runs(&h, &w),
                count_accepting_runs(&back, &w)
            );
        }
        assert!(Hyperautomaton::from_json_str("{\"garbage\":true}").is_err());
        assert!(Hyperautomaton::from_json_str("not json").is_err());
    }

    #[test]
    fn dot_annotations_mention_nodes() {
        let h = compile(&pat("ab"), &sigma_star(), "(a+b)*", &lim()).unwrap();
        let dot = h.to_dot();
        assert!(dot.contains("root"));
        assert!(dot.starts_with("digraph"));
    }

    #[test]
    fn state_limit_propagates() {
        let tight = Limits::new(1);
        assert!(matches!(
            compile(&pat("(a+ab)*(b+_)"), &sigma_star(), "(a+b)*", &tight),
            Err(InferError::Automata(AutomataError::StateLimit { .. }))
        ));
    }
}
