//! The type-inference engine: computes, for every bindable node of a
//! pattern under a regular context, the regular language of subwords that
//! node can bind (its *type*), and for every bindable concatenation node
//! the marked language recording how its subword splits (its *break set*).
//!
//! The computation is structural recursion over patterns, rewriting the
//! two non-structural shapes — a concatenation headed by a concatenation
//! reassociates to the right, one headed by an alternation distributes —
//! and otherwise threading adjusted contexts through quotients and
//! differences.  Everything is plain language algebra on automata.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::automata::{
    concat, difference, erase_first_mark, intersect, inverse_project, join_breaks, left_quotient,
    project, right_quotient, thompson, union, AutomataError, Limits, Nfa,
};
use crate::pattern::{NodeAddress, Pattern, PatternError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InferError {
    #[error(transparent)]
    Automata(#[from] AutomataError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error("node `{0}` is not a bindable node of the pattern")]
    NodeNotBindable(String),
    #[error("node `{0}` is not labeled with a concatenation")]
    NodeNotConcat(String),
}

type Result<T> = std::result::Result<T, InferError>;

/// The three languages of the star-headed concatenation case: the star's
/// type `T1`, the context `C2` the tail is matched under, and the break
/// set `I` marking where the star hands over to the tail.
#[derive(Debug, Clone)]
pub struct KleeneTriple {
    /// `T1`: subwords the star can bind (over the plain alphabet).
    pub star_type: Nfa,
    /// `C2`: the tail's context (over the plain alphabet).
    pub tail_context: Nfa,
    /// `I`: the break set, one marker per word.
    pub break_set: Nfa,
    /// The star's language, kept for the quotient identities.
    pub star_lang: Nfa,
    /// The tail's language, kept for the quotient identities.
    pub tail_lang: Nfa,
}

/// Full result of inference: a type automaton per bindable node, a break
/// automaton per bindable concatenation node, and every Kleene triple the
/// recursion computed on the way.
#[derive(Debug, Clone)]
pub struct Inference {
    pub types: BTreeMap<NodeAddress, Nfa>,
    pub breaks: BTreeMap<NodeAddress, Nfa>,
    pub kleene_triples: Vec<KleeneTriple>,
}

/// Computes the triple for `body* · tail` under `context` by the language
/// equalities: with `L1 = L(body*)`, `L2 = L(tail)` and
/// `A = π⁻¹(L1) − L1·{#}`,
///
/// ```text
/// I  = π⁻¹(C) ∩ ((L1·{#}·L2) − A·L2)
/// T1 = I / ({#}·L2)
/// C2 = (L1·{#}) \ I
/// ```
///
/// The subtraction of `A·L2` is what enforces longest match: a marked word
/// `w1#w2` survives only when no nonempty prefix of `w2` can still be
/// absorbed into the star while the rest matches the tail.
pub fn kleene_triple(
    body: &Pattern,
    tail: &Pattern,
    context: &Nfa,
    limits: &Limits,
) -> Result<KleeneTriple> {
    let alphabet = context.alphabet().clone();
    let star = Pattern::star(body.clone());
    let l1 = thompson(&star, &alphabet);
    let l2 = thompson(tail, &alphabet);
    let l1m = l1.lift_marked();
    let l2m = l2.lift_marked();
    let mark = Nfa::mark_lang(alphabet);

    let l1_mark = concat(&l1m, &mark)?.nfa;
    let a_marked = difference(&inverse_project(&l1), &l1_mark, limits)?.trimmed();
    let all_splits = concat(&l1_mark, &l2m)?.nfa;
    let absorbing = concat(&a_marked, &l2m)?.nfa;
    let longest_splits = difference(&all_splits, &absorbing, limits)?.trimmed();
    let break_set = intersect(&inverse_project(context), &longest_splits, limits)?
        .nfa
        .trimmed();

    let star_type = right_quotient(&break_set, &concat(&mark, &l2m)?.nfa, limits)?
        .strip_marks()
        .trimmed();
    let tail_context = left_quotient(&l1_mark, &break_set, limits)?
        .strip_marks()
        .trimmed();
    Ok(KleeneTriple {
        star_type,
        tail_context,
        break_set,
        star_lang: l1,
        tail_lang: l2,
    })
}

/// Runs inference for every bindable node of `p` under `context`.
pub fn infer(p: &Pattern, context: &Nfa, limits: &Limits) -> Result<Inference> {
    let alphabet = context.alphabet().clone();
    let mut types = BTreeMap::new();
    let mut breaks = BTreeMap::new();
    let mut triples = Vec::new();

    match p {
        // Shapes whose only bindable node is the root: the type is just
        // the pattern's language cut down to the context.
        Pattern::Epsilon | Pattern::Sym(_) | Pattern::Star(_) => {
            types.insert(
                NodeAddress::root(),
                intersect(&thompson(p, &alphabet), context, limits)?.nfa.trimmed(),
            );
        }

        Pattern::Alt(l, r) => {
            let left = infer(l, context, limits)?;
            let right_context = difference(context, &thompson(l, &alphabet), limits)?.trimmed();
            let right = infer(r, &right_context, limits)?;
            let root = union(&left.types[&NodeAddress::root()], &right.types[&NodeAddress::root()])?.nfa;
            types.insert(NodeAddress::root(), root);
            graft(&mut types, left.types, 1);
            graft(&mut types, right.types, 2);
            graft(&mut breaks, left.breaks, 1);
            graft(&mut breaks, right.breaks, 2);
            triples.extend(left.kleene_triples);
            triples.extend(right.kleene_triples);
        }

        Pattern::Cat(head, tail) => match head.as_ref() {
            Pattern::Epsilon | Pattern::Sym(_) => {
                // The head's type is its language restricted to prefixes
                // the context can complete through the tail; the tail sees
                // the context with the head's letter consumed.
                let head_type = intersect(
                    &thompson(head, &alphabet),
                    &right_quotient(context, &thompson(tail, &alphabet), limits)?,
                    limits,
                )?
                .nfa
                .trimmed();
                let tail_context = match head.as_ref() {
                    Pattern::Epsilon => context.clone(),
                    _ => left_quotient(&thompson(head, &alphabet), context, limits)?.trimmed(),
                };
                let rest = infer(tail, &tail_context, limits)?;
                let tail_type = rest.types[&NodeAddress::root()].clone();
                let mark = Nfa::mark_lang(alphabet.clone());
                let root_break =
                    concat(&concat(&head_type.lift_marked(), &mark)?.nfa, &tail_type.lift_marked())?
                        .nfa;
                types.insert(
                    NodeAddress::root(),
                    intersect(&thompson(p, &alphabet), context, limits)?.nfa.trimmed(),
                );
                types.insert(NodeAddress::root().child(1), head_type);
                graft(&mut types, rest.types, 2);
                breaks.insert(NodeAddress::root(), root_break.trimmed());
                graft(&mut breaks, rest.breaks, 2);
                triples.extend(rest.kleene_triples);
            }

            Pattern::Star(body) => {
                let kt = kleene_triple(body, tail, context, limits)?;
                let rest = infer(tail, &kt.tail_context, limits)?;
                types.insert(
                    NodeAddress::root(),
                    intersect(&thompson(p, &alphabet), context, limits)?.nfa.trimmed(),
                );
                types.insert(NodeAddress::root().child(1), kt.star_type.clone());
                graft(&mut types, rest.types, 2);
                breaks.insert(NodeAddress::root(), kt.break_set.clone());
                graft(&mut breaks, rest.breaks, 2);
                triples.extend(rest.kleene_triples);
                triples.push(kt);
            }

            Pattern::Cat(h1, h2) => {
                // Reassociate to the right and pull the node-1 languages
                // out of the chained break sets.
                let reassoc = Pattern::cat(
                    (**h1).clone(),
                    Pattern::cat((**h2).clone(), (**tail).clone()),
                );
                let inner = infer(&reassoc, context, limits)?;
                let outer_breaks = &inner.breaks[&NodeAddress::root()];
                let inner_breaks = &inner.breaks[&NodeAddress::root().child(2)];
                let chained = join_breaks(outer_breaks, inner_breaks, limits)?.trimmed();
                let root_break = erase_first_mark(&chained, limits)?.trimmed();
                let mark_suffix = concat(
                    &Nfa::mark_lang(alphabet.clone()),
                    &Nfa::universal(alphabet.clone(), false).lift_marked(),
                )?
                .nfa;
                let head_break = right_quotient(&chained, &mark_suffix, limits)?.trimmed();
                let head_type = project(&head_break).trimmed();

                types.insert(NodeAddress::root(), inner.types[&NodeAddress::root()].clone());
                types.insert(NodeAddress::root().child(1), head_type);
                breaks.insert(NodeAddress::root(), root_break);
                breaks.insert(NodeAddress::root().child(1), head_break);
                let moves = [
                    (vec![1], vec![1, 1]),
                    (vec![2, 1], vec![1, 2]),
                    (vec![2, 2], vec![2]),
                ];
                relocate(&mut types, inner.types, &moves);
                relocate(&mut breaks, inner.breaks, &moves);
                triples.extend(inner.kleene_triples);
            }

            Pattern::Alt(h1, h2) => {
                // Distribute over the tail; the second alternative sees the
                // context minus everything the first one lets through.
                let first = Pattern::cat((**h1).clone(), (**tail).clone());
                let second = Pattern::cat((**h2).clone(), (**tail).clone());
                let via_first = infer(&first, context, limits)?;
                let second_context =
                    difference(context, &thompson(&first, &alphabet), limits)?.trimmed();
                let via_second = infer(&second, &second_context, limits)?;

                let root = NodeAddress::root();
                types.insert(
                    root.clone(),
                    union(&via_first.types[&root], &via_second.types[&root])?.nfa,
                );
                types.insert(
                    root.child(1),
                    union(
                        &via_first.types[&root.child(1)],
                        &via_second.types[&root.child(1)],
                    )?
                    .nfa,
                );
                breaks.insert(
                    root.clone(),
                    union(&via_first.breaks[&root], &via_second.breaks[&root])?.nfa,
                );
                merge_union(&mut types, &via_first.types, &via_second.types, 2)?;
                merge_union(&mut breaks, &via_first.breaks, &via_second.breaks, 2)?;
                let moves_first = [(vec![1u8], vec![1u8, 1])];
                let moves_second = [(vec![1u8], vec![1u8, 2])];
                relocate(&mut types, via_first.types, &moves_first);
                relocate(&mut types, via_second.types, &moves_second);
                relocate(&mut breaks, via_first.breaks, &moves_first);
                relocate(&mut breaks, via_second.breaks, &moves_second);
                triples.extend(via_first.kleene_triples);
                triples.extend(via_second.kleene_triples);
            }
        },
    }

    debug_assert!(p
        .bindable_nodes()
        .iter()
        .all(|n| types.contains_key(n)));
    Ok(Inference {
        types,
        breaks,
        kleene_triples: triples,
    })
}

/// Moves every `node → automaton` entry one level down under `digit`.
fn graft(target: &mut BTreeMap<NodeAddress, Nfa>, entries: BTreeMap<NodeAddress, Nfa>, digit: u8) {
    let prefix = NodeAddress::root().child(digit);
    for (addr, nfa) in entries {
        target.insert(addr.prefixed_by(&prefix), nfa);
    }
}

/// Moves entries under old prefixes to new prefixes: for each `(old_path,
/// new_path)`, an entry at `old_path · rest` lands at `new_path · rest`.
/// Entries matching no move are dropped (they have no counterpart).
fn relocate(
    target: &mut BTreeMap<NodeAddress, Nfa>,
    entries: BTreeMap<NodeAddress, Nfa>,
    moves: &[(Vec<u8>, Vec<u8>)],
) {
    for (addr, nfa) in entries {
        for (old_path, new_path) in moves {
            if let Some(rest) = addr.strip_prefix(old_path) {
                let mut full = NodeAddress::root();
                for &d in new_path {
                    full = full.child(d);
                }
                target.insert(rest.prefixed_by(&full), nfa.clone());
                break;
            }
        }
    }
}

/// For every node under digit 2 of the distributed alternatives (the
/// shared tail), the result is the union of the two copies.
fn merge_union(
    target: &mut BTreeMap<NodeAddress, Nfa>,
    first: &BTreeMap<NodeAddress, Nfa>,
    second: &BTreeMap<NodeAddress, Nfa>,
    digit: u8,
) -> Result<()> {
    for (addr, a) in first {
        if let Some(rest) = addr.strip_digit(digit) {
            let b = &second[addr];
            let merged = union(a, b)?.nfa;
            target.insert(rest.prefixed_by(&NodeAddress::root().child(2)), merged);
        }
    }
    Ok(())
}

/// The type automaton of a single bindable node.
pub fn type_of(p: &Pattern, context: &Nfa, n: &NodeAddress, limits: &Limits) -> Result<Nfa> {
    if !p.bindable_nodes().contains(n) {
        return Err(InferError::NodeNotBindable(n.to_string()));
    }
    let inference = infer(p, context, limits)?;
    Ok(inference.types[n].clone())
}

/// The break automaton of a single bindable concatenation node.
pub fn break_of(p: &Pattern, context: &Nfa, n: &NodeAddress, limits: &Limits) -> Result<Nfa> {
    if !p.bindable_nodes().contains(n) {
        return Err(InferError::NodeNotBindable(n.to_string()));
    }
    if !matches!(p.subpattern_at(n), Ok(Pattern::Cat(..))) {
        return Err(InferError::NodeNotConcat(n.to_string()));
    }
    let inference = infer(p, context, limits)?;
    Ok(inference.breaks[n].clone())
}
