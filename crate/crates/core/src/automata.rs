//! Finite automata over the alphabet and its marked extension, and the
//! language algebra used by the inference engine: union, concatenation,
//! product intersection, complement and difference, both quotients, the
//! marker projection and its inverse, plus the decision procedures.
//!
//! Automata may carry transitions labeled with the break marker `#` in
//! addition to plain letters; the `marked` flag on an automaton says whether
//! the marker is part of its alphabet.  No construction in this module ever
//! creates a cycle of empty-word transitions, so the set of runs on a given
//! word is always finite.  A debug assertion enforces this after every
//! construction.
//!
//! Combining operations return handles that expose where the states of the
//! operands ended up in the result (`Combined`, `Product`); the compiler
//! depends on this to thread its per-node state triples through unions,
//! concatenations and products.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pattern::{Alphabet, Pattern, Symbol, Word};

/// One position of a possibly-marked word: a letter or the marker `#`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    Mark,
    Sym(Symbol),
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Letter::Mark => write!(f, "#"),
            Letter::Sym(s) => write!(f, "{s}"),
        }
    }
}

/// A word over the alphabet extended with the marker.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MarkedWord(pub Vec<Letter>);

impl MarkedWord {
    pub fn from_word(w: &Word) -> MarkedWord {
        MarkedWord(w.symbols().iter().map(|&s| Letter::Sym(s)).collect())
    }

    /// `left # right`, the marked word recording one break.
    pub fn with_break(left: &Word, right: &Word) -> MarkedWord {
        let mut v: Vec<Letter> = left.symbols().iter().map(|&s| Letter::Sym(s)).collect();
        v.push(Letter::Mark);
        v.extend(right.symbols().iter().map(|&s| Letter::Sym(s)));
        MarkedWord(v)
    }

    pub fn mark_count(&self) -> usize {
        self.0.iter().filter(|l| matches!(l, Letter::Mark)).count()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Drops all markers.
    pub fn project(&self) -> Word {
        self.0
            .iter()
            .filter_map(|l| match l {
                Letter::Sym(s) => Some(*s),
                Letter::Mark => None,
            })
            .collect()
    }
}

impl fmt::Display for MarkedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.0 {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// Transition label: a letter, the marker, or the empty word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Eps,
    Mark,
    Sym(Symbol),
}

impl From<Letter> for Label {
    fn from(l: Letter) -> Label {
        match l {
            Letter::Mark => Label::Mark,
            Letter::Sym(s) => Label::Sym(s),
        }
    }
}

impl Label {
    pub fn as_letter(&self) -> Option<Letter> {
        match self {
            Label::Eps => None,
            Label::Mark => Some(Letter::Mark),
            Label::Sym(s) => Some(Letter::Sym(*s)),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Eps => write!(f, "<eps>"),
            Label::Mark => write!(f, "#"),
            Label::Sym(s) => write!(f, "{s}"),
        }
    }
}

/// Cap on the number of states any single construction may allocate.
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_states: usize,
}

impl Default for Limits {
    fn default() -> Limits {
        Limits { max_states: 100_000 }
    }
}

impl Limits {
    pub fn new(max_states: usize) -> Limits {
        Limits { max_states }
    }

    fn check(&self, requested: usize) -> Result<()> {
        if requested > self.max_states {
            Err(AutomataError::StateLimit {
                requested,
                limit: self.max_states,
            })
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutomataError {
    #[error("construction needs {requested} states, over the limit of {limit}")]
    StateLimit { requested: usize, limit: usize },
    #[error("operands have different alphabets")]
    AlphabetMismatch,
    #[error("operand is {0} but the operation needs the opposite")]
    Markedness(&'static str),
    #[error("{side} operand accepts a word without exactly one marker")]
    NotSingleMark { side: &'static str },
    #[error("malformed automaton serialization: {0}")]
    BadSerialization(String),
}

type Result<T> = std::result::Result<T, AutomataError>;

/// A nondeterministic finite automaton.  Empty-word transitions never form
/// a cycle and never loop on a single state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Nfa {
    alphabet: Alphabet,
    marked: bool,
    out: Vec<Vec<(Label, usize)>>,
    initials: BTreeSet<usize>,
    finals: BTreeSet<usize>,
}

impl Nfa {
    fn build(
        alphabet: Alphabet,
        marked: bool,
        num_states: usize,
        initials: BTreeSet<usize>,
        finals: BTreeSet<usize>,
        edges: impl IntoIterator<Item = (usize, Label, usize)>,
    ) -> Nfa {
        let mut out = vec![Vec::new(); num_states];
        let mut seen = BTreeSet::new();
        for (from, label, to) in edges {
            debug_assert!(from < num_states && to < num_states);
            debug_assert!(label != Label::Mark || marked);
            debug_assert!(!(label == Label::Eps && from == to), "empty-word self-loop");
            if seen.insert((from, label, to)) {
                out[from].push((label, to));
            }
        }
        debug_assert!(initials.iter().all(|&q| q < num_states));
        debug_assert!(finals.iter().all(|&q| q < num_states));
        let nfa = Nfa {
            alphabet,
            marked,
            out,
            initials,
            finals,
        };
        debug_assert!(nfa.eps_topo_order().is_some(), "empty-word cycle");
        nfa
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn is_marked(&self) -> bool {
        self.marked
    }

    pub fn num_states(&self) -> usize {
        self.out.len()
    }

    pub fn initials(&self) -> &BTreeSet<usize> {
        &self.initials
    }

    pub fn finals(&self) -> &BTreeSet<usize> {
        &self.finals
    }

    pub fn edges_from(&self, q: usize) -> &[(Label, usize)] {
        &self.out[q]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, Label, usize)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(q, es)| es.iter().map(move |&(l, to)| (q, l, to)))
    }

    pub fn num_edges(&self) -> usize {
        self.out.iter().map(|es| es.len()).sum()
    }

    /// The letters this automaton can step on: the alphabet, plus the
    /// marker when marked.
    pub fn step_letters(&self) -> Vec<Letter> {
        let mut v: Vec<Letter> = Vec::with_capacity(self.alphabet.len() + 1);
        if self.marked {
            v.push(Letter::Mark);
        }
        v.extend(self.alphabet.symbols().map(Letter::Sym));
        v
    }

    // ---- elementary languages -------------------------------------------

    /// The empty language.
    pub fn empty_lang(alphabet: Alphabet, marked: bool) -> Nfa {
        Nfa::build(alphabet, marked, 1, BTreeSet::from([0]), BTreeSet::new(), [])
    }

    /// The language containing only the empty word.
    pub fn epsilon_lang(alphabet: Alphabet, marked: bool) -> Nfa {
        Nfa::build(alphabet, marked, 1, BTreeSet::from([0]), BTreeSet::from([0]), [])
    }

    /// All words over the (possibly marked) alphabet.
    pub fn universal(alphabet: Alphabet, marked: bool) -> Nfa {
        let mut edges = Vec::new();
        for s in alphabet.symbols() {
            edges.push((0, Label::Sym(s), 0));
        }
        if marked {
            edges.push((0, Label::Mark, 0));
        }
        Nfa::build(alphabet, marked, 1, BTreeSet::from([0]), BTreeSet::from([0]), edges)
    }

    /// The single-word language `{w}`.
    pub fn word_lang(alphabet: Alphabet, marked: bool, w: &MarkedWord) -> Nfa {
        let n = w.len() + 1;
        let edges = w
            .0
            .iter()
            .enumerate()
            .map(|(i, &l)| (i, Label::from(l), i + 1));
        Nfa::build(
            alphabet,
            marked,
            n,
            BTreeSet::from([0]),
            BTreeSet::from([n - 1]),
            edges,
        )
    }

    /// The two-state automaton accepting exactly the marker.
    pub fn mark_lang(alphabet: Alphabet) -> Nfa {
        Nfa::build(
            alphabet,
            true,
            2,
            BTreeSet::from([0]),
            BTreeSet::from([1]),
            [(0, Label::Mark, 1)],
        )
    }

    /// All words of length at most `max_len`.
    pub fn words_up_to(alphabet: Alphabet, marked: bool, max_len: usize) -> Nfa {
        let n = max_len + 1;
        let mut edges = Vec::new();
        for i in 0..max_len {
            for s in alphabet.symbols() {
                edges.push((i, Label::Sym(s), i + 1));
            }
            if marked {
                edges.push((i, Label::Mark, i + 1));
            }
        }
        Nfa::build(
            alphabet,
            marked,
            n,
            BTreeSet::from([0]),
            (0..n).collect(),
            edges,
        )
    }

    /// Words containing exactly one marker.
    pub fn single_mark_lang(alphabet: Alphabet) -> Nfa {
        let mut edges = vec![(0, Label::Mark, 1)];
        for s in alphabet.symbols() {
            edges.push((0, Label::Sym(s), 0));
            edges.push((1, Label::Sym(s), 1));
        }
        Nfa::build(alphabet, true, 2, BTreeSet::from([0]), BTreeSet::from([1]), edges)
    }

    // ---- alphabet adjustments -------------------------------------------

    /// Reinterprets an automaton over the plain alphabet as one over the
    /// marked alphabet.  States and transitions are unchanged.
    pub fn lift_marked(&self) -> Nfa {
        debug_assert!(!self.marked);
        let mut n = self.clone();
        n.marked = true;
        n
    }

    /// Restricts to the plain alphabet by dropping marker transitions,
    /// recognizing exactly the marker-free part of the language.
    pub fn strip_marks(&self) -> Nfa {
        debug_assert!(self.marked);
        Nfa::build(
            self.alphabet.clone(),
            false,
            self.num_states(),
            self.initials.clone(),
            self.finals.clone(),
            self.edges().filter(|&(_, l, _)| l != Label::Mark),
        )
    }

    /// The automaton with the given entry and exit sets and transitions
    /// restricted to `states`.  State numbering is unchanged; everything
    /// outside `states` becomes unreachable.
    pub fn restricted(
        &self,
        states: &BTreeSet<usize>,
        initials: &BTreeSet<usize>,
        finals: &BTreeSet<usize>,
    ) -> Nfa {
        Nfa::build(
            self.alphabet.clone(),
            self.marked,
            self.num_states(),
            initials.intersection(states).copied().collect(),
            finals.intersection(states).copied().collect(),
            self.edges()
                .filter(|(f, _, t)| states.contains(f) && states.contains(t)),
        )
    }

    /// Restriction to useful states (reachable from an initial state and
    /// able to reach a final one).  Only the language is preserved; state
    /// identities are renumbered, so this is for language-level work, not
    /// for automata whose states something else still refers to.
    pub fn trimmed(&self) -> Nfa {
        let n = self.num_states();
        let mut reach = vec![false; n];
        let mut stack: Vec<usize> = self.initials.iter().copied().collect();
        for &q in &self.initials {
            reach[q] = true;
        }
        while let Some(q) = stack.pop() {
            for &(_, to) in &self.out[q] {
                if !reach[to] {
                    reach[to] = true;
                    stack.push(to);
                }
            }
        }
        let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (f, _, t) in self.edges() {
            rev[t].push(f);
        }
        let mut coreach = vec![false; n];
        let mut stack: Vec<usize> = self.finals.iter().copied().collect();
        for &q in &self.finals {
            coreach[q] = true;
        }
        while let Some(q) = stack.pop() {
            for &from in &rev[q] {
                if !coreach[from] {
                    coreach[from] = true;
                    stack.push(from);
                }
            }
        }
        let mut renumber = vec![usize::MAX; n];
        let mut kept = 0;
        for q in 0..n {
            if reach[q] && coreach[q] {
                renumber[q] = kept;
                kept += 1;
            }
        }
        if kept == 0 {
            return Nfa::empty_lang(self.alphabet.clone(), self.marked);
        }
        Nfa::build(
            self.alphabet.clone(),
            self.marked,
            kept,
            self.initials
                .iter()
                .filter(|&&q| renumber[q] != usize::MAX)
                .map(|&q| renumber[q])
                .collect(),
            self.finals
                .iter()
                .filter(|&&q| renumber[q] != usize::MAX)
                .map(|&q| renumber[q])
                .collect(),
            self.edges().filter_map(|(f, l, t)| {
                if renumber[f] != usize::MAX && renumber[t] != usize::MAX {
                    Some((renumber[f], l, renumber[t]))
                } else {
                    None
                }
            }),
        )
    }

    // ---- reachability plumbing ------------------------------------------

    /// Topological order of the empty-word transition graph, or `None` when
    /// that graph has a cycle.
    pub fn eps_topo_order(&self) -> Option<Vec<usize>> {
        let n = self.num_states();
        let mut indeg = vec![0usize; n];
        for (_, l, to) in self.edges() {
            if l == Label::Eps {
                indeg[to] += 1;
            }
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&q| indeg[q] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(q) = queue.pop_front() {
            order.push(q);
            for &(l, to) in &self.out[q] {
                if l == Label::Eps {
                    indeg[to] -= 1;
                    if indeg[to] == 0 {
                        queue.push_back(to);
                    }
                }
            }
        }
        if order.len() == n {
            Some(order)
        } else {
            None
        }
    }

    fn close(&self, set: &mut [bool]) {
        let mut stack: Vec<usize> = (0..self.num_states()).filter(|&q| set[q]).collect();
        while let Some(q) = stack.pop() {
            for &(l, to) in &self.out[q] {
                if l == Label::Eps && !set[to] {
                    set[to] = true;
                    stack.push(to);
                }
            }
        }
    }

    fn closed_initials(&self) -> Vec<bool> {
        let mut set = vec![false; self.num_states()];
        for &q in &self.initials {
            set[q] = true;
        }
        self.close(&mut set);
        set
    }

    fn step_closed(&self, set: &[bool], letter: Letter) -> Vec<bool> {
        let want = Label::from(letter);
        let mut next = vec![false; self.num_states()];
        for (q, &active) in set.iter().enumerate() {
            if active {
                for &(l, to) in &self.out[q] {
                    if l == want {
                        next[to] = true;
                    }
                }
            }
        }
        self.close(&mut next);
        next
    }

    // ---- decision procedures --------------------------------------------

    pub fn accepts(&self, word: &MarkedWord) -> bool {
        let mut set = self.closed_initials();
        for &l in &word.0 {
            if l == Letter::Mark && !self.marked {
                return false;
            }
            if let Letter::Sym(s) = l {
                if !self.alphabet.contains(s.as_char()) {
                    return false;
                }
            }
            set = self.step_closed(&set, l);
        }
        self.finals.iter().any(|&q| set[q])
    }

    pub fn accepts_word(&self, word: &Word) -> bool {
        self.accepts(&MarkedWord::from_word(word))
    }

    pub fn is_empty_lang(&self) -> bool {
        let mut seen = vec![false; self.num_states()];
        let mut stack: Vec<usize> = self.initials.iter().copied().collect();
        for &q in &self.initials {
            seen[q] = true;
        }
        while let Some(q) = stack.pop() {
            if self.finals.contains(&q) {
                return false;
            }
            for &(_, to) in &self.out[q] {
                if !seen[to] {
                    seen[to] = true;
                    stack.push(to);
                }
            }
        }
        true
    }

    /// All accepted words of length at most `max_len`, in length-then-
    /// lexicographic order.
    pub fn enumerate(&self, max_len: usize) -> Vec<MarkedWord> {
        let letters = self.step_letters();
        let mut out = Vec::new();
        let start = self.closed_initials();
        let mut layer = vec![(MarkedWord::default(), start)];
        for len in 0..=max_len {
            let mut next_layer = Vec::new();
            for (w, set) in &layer {
                if self.finals.iter().any(|&q| set[q]) {
                    out.push(w.clone());
                }
                if len < max_len {
                    for &l in &letters {
                        let next = self.step_closed(set, l);
                        if next.iter().any(|&b| b) {
                            let mut w2 = w.clone();
                            w2.0.push(l);
                            next_layer.push((w2, next));
                        }
                    }
                }
            }
            layer = next_layer;
        }
        out
    }
}

// ---- glued constructions --------------------------------------------------

/// Where a section of an operand landed inside a combined automaton.
#[derive(Debug, Clone, Copy)]
pub struct Section {
    offset: usize,
    len: usize,
}

impl Section {
    pub fn map(&self, state: usize) -> usize {
        debug_assert!(state < self.len);
        self.offset + state
    }

    pub fn states(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }

    pub fn contains(&self, state: usize) -> bool {
        self.states().contains(&state)
    }
}

/// Result of a union or concatenation: the automaton plus the placement of
/// both operands' states.
#[derive(Debug, Clone)]
pub struct Combined {
    pub nfa: Nfa,
    pub left: Section,
    pub right: Section,
}

/// Union by tuple-wise disjoint union of the operands.
pub fn union(a: &Nfa, b: &Nfa) -> Result<Combined> {
    check_same_alphabet(a, b)?;
    let na = a.num_states();
    let nb = b.num_states();
    let initials: BTreeSet<usize> = a
        .initials
        .iter()
        .copied()
        .chain(b.initials.iter().map(|&q| q + na))
        .collect();
    let finals: BTreeSet<usize> = a
        .finals
        .iter()
        .copied()
        .chain(b.finals.iter().map(|&q| q + na))
        .collect();
    let edges = a
        .edges()
        .chain(b.edges().map(|(f, l, t)| (f + na, l, t + na)));
    let nfa = Nfa::build(a.alphabet.clone(), a.marked, na + nb, initials, finals, edges);
    Ok(Combined {
        nfa,
        left: Section { offset: 0, len: na },
        right: Section { offset: na, len: nb },
    })
}

/// Concatenation: empty-word transitions from the finals of the left
/// operand to the initials of the right one.
pub fn concat(a: &Nfa, b: &Nfa) -> Result<Combined> {
    check_same_alphabet(a, b)?;
    let na = a.num_states();
    let nb = b.num_states();
    let mut edges: Vec<(usize, Label, usize)> = a.edges().collect();
    edges.extend(b.edges().map(|(f, l, t)| (f + na, l, t + na)));
    for &f in &a.finals {
        for &i in &b.initials {
            edges.push((f, Label::Eps, i + na));
        }
    }
    let initials: BTreeSet<usize> = a.initials.clone();
    let finals: BTreeSet<usize> = b.finals.iter().map(|&q| q + na).collect();
    let nfa = Nfa::build(a.alphabet.clone(), a.marked, na + nb, initials, finals, edges);
    Ok(Combined {
        nfa,
        left: Section { offset: 0, len: na },
        right: Section { offset: na, len: nb },
    })
}

/// Result of a product construction; states of the result are all pairs of
/// operand states.
#[derive(Debug, Clone)]
pub struct Product {
    pub nfa: Nfa,
    left_count: usize,
    right_count: usize,
}

impl Product {
    pub fn pair_id(&self, left: usize, right: usize) -> usize {
        debug_assert!(left < self.left_count && right < self.right_count);
        left * self.right_count + right
    }

    pub fn components(&self, id: usize) -> (usize, usize) {
        (id / self.right_count, id % self.right_count)
    }

    pub fn left_count(&self) -> usize {
        self.left_count
    }

    pub fn right_count(&self) -> usize {
        self.right_count
    }
}

/// Intersection by the product construction.  Letter transitions move both
/// components in lockstep; empty-word transitions move one at a time.
pub fn intersect(a: &Nfa, b: &Nfa, limits: &Limits) -> Result<Product> {
    check_same_alphabet(a, b)?;
    let na = a.num_states();
    let nb = b.num_states();
    limits.check(na.saturating_mul(nb))?;
    let id = |i: usize, j: usize| i * nb + j;
    let mut edges = Vec::new();
    // Index the right operand's letter transitions once.
    let mut b_by_label: HashMap<Label, Vec<(usize, usize)>> = HashMap::new();
    for (f, l, t) in b.edges() {
        b_by_label.entry(l).or_default().push((f, t));
    }
    for (f, l, t) in a.edges() {
        match l {
            Label::Eps => {
                for j in 0..nb {
                    edges.push((id(f, j), Label::Eps, id(t, j)));
                }
            }
            _ => {
                if let Some(bs) = b_by_label.get(&l) {
                    for &(bf, bt) in bs {
                        edges.push((id(f, bf), l, id(t, bt)));
                    }
                }
            }
        }
    }
    if let Some(bs) = b_by_label.get(&Label::Eps) {
        for &(bf, bt) in bs {
            for i in 0..na {
                edges.push((id(i, bf), Label::Eps, id(i, bt)));
            }
        }
    }
    let initials: BTreeSet<usize> = a
        .initials
        .iter()
        .flat_map(|&i| b.initials.iter().map(move |&j| id(i, j)))
        .collect();
    let finals: BTreeSet<usize> = a
        .finals
        .iter()
        .flat_map(|&i| b.finals.iter().map(move |&j| id(i, j)))
        .collect();
    let nfa = Nfa::build(a.alphabet.clone(), a.marked, na * nb, initials, finals, edges);
    Ok(Product {
        nfa,
        left_count: na,
        right_count: nb,
    })
}

fn check_same_alphabet(a: &Nfa, b: &Nfa) -> Result<()> {
    if a.alphabet != b.alphabet {
        return Err(AutomataError::AlphabetMismatch);
    }
    if a.marked != b.marked {
        return Err(AutomataError::Markedness(if a.marked {
            "marked"
        } else {
            "unmarked"
        }));
    }
    Ok(())
}

// ---- determinization --------------------------------------------------------

/// A complete deterministic automaton.  Every state has exactly one
/// successor per letter; `sink` is the absorbing non-accepting state when
/// one exists.  All other states can reach a final state.
#[derive(Debug, Clone)]
pub struct Dfa {
    nfa: Nfa,
    initial: usize,
    sink: Option<usize>,
    letters: Vec<Letter>,
    table: Vec<Vec<usize>>,
}

impl Dfa {
    pub fn as_nfa(&self) -> &Nfa {
        &self.nfa
    }

    pub fn into_nfa(self) -> Nfa {
        self.nfa
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn sink(&self) -> Option<usize> {
        self.sink
    }

    pub fn num_states(&self) -> usize {
        self.nfa.num_states()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn step(&self, state: usize, letter: Letter) -> usize {
        let idx = self
            .letters
            .iter()
            .position(|&l| l == letter)
            .expect("letter outside the automaton's alphabet");
        self.table[state][idx]
    }

    pub fn is_final(&self, state: usize) -> bool {
        self.nfa.finals.contains(&state)
    }

    pub fn accepts(&self, w: &MarkedWord) -> bool {
        self.nfa.accepts(w)
    }
}

/// Subset construction with closure, made complete with an explicit sink.
/// States that cannot reach a final state are merged into the sink, so
/// every non-sink state of the result is both reachable and useful.
pub fn determinize(a: &Nfa, limits: &Limits) -> Result<Dfa> {
    let letters = a.step_letters();
    let mut subset_ids: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut subsets: Vec<Vec<usize>> = Vec::new();
    let mut table: Vec<Vec<usize>> = Vec::new();
    let mut finals: Vec<bool> = Vec::new();

    let start: Vec<usize> = {
        let closed = a.closed_initials();
        (0..a.num_states()).filter(|&q| closed[q]).collect()
    };
    subset_ids.insert(start.clone(), 0);
    subsets.push(start);
    let mut queue = VecDeque::from([0usize]);
    while let Some(id) = queue.pop_front() {
        let mut set = vec![false; a.num_states()];
        for &q in &subsets[id] {
            set[q] = true;
        }
        finals.resize(subsets.len(), false);
        finals[id] = a.finals.iter().any(|&q| set[q]);
        let mut row = Vec::with_capacity(letters.len());
        for &l in &letters {
            let next = a.step_closed(&set, l);
            let key: Vec<usize> = (0..a.num_states()).filter(|&q| next[q]).collect();
            let nid = match subset_ids.get(&key) {
                Some(&nid) => nid,
                None => {
                    let nid = subsets.len();
                    limits.check(nid + 1)?;
                    subset_ids.insert(key.clone(), nid);
                    subsets.push(key);
                    queue.push_back(nid);
                    nid
                }
            };
            row.push(nid);
        }
        table.resize(subsets.len(), Vec::new());
        table[id] = row;
    }
    finals.resize(subsets.len(), false);

    // Merge every state that cannot reach a final state into one sink.
    let n = subsets.len();
    let mut coreach = finals.clone();
    loop {
        let mut changed = false;
        for q in 0..n {
            if !coreach[q] && table[q].iter().any(|&t| coreach[t]) {
                coreach[q] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let live: Vec<usize> = (0..n).filter(|&q| coreach[q]).collect();
    let any_dead = live.len() < n;
    let total = live.len() + usize::from(any_dead);
    limits.check(total.max(1))?;

    let mut renumber = vec![usize::MAX; n];
    for (new, &old) in live.iter().enumerate() {
        renumber[old] = new;
    }
    let sink = if any_dead || live.is_empty() {
        Some(live.len())
    } else {
        None
    };
    let sink_id = sink.unwrap_or(usize::MAX);
    let map = |q: usize| -> usize {
        if renumber[q] == usize::MAX {
            sink_id
        } else {
            renumber[q]
        }
    };

    let num_states = total.max(1);
    let mut new_table: Vec<Vec<usize>> = vec![vec![0; letters.len()]; num_states];
    for (new, &old) in live.iter().enumerate() {
        for (k, &t) in table[old].iter().enumerate() {
            new_table[new][k] = map(t);
        }
    }
    if let Some(s) = sink {
        new_table[s] = vec![s; letters.len()];
    }
    let initial = if live.is_empty() { sink_id } else { map(0) };
    let new_finals: BTreeSet<usize> = (0..n).filter(|&q| finals[q]).map(map).collect();
    let letters_ref = &letters;
    let edges = new_table.iter().enumerate().flat_map(|(q, row)| {
        row.iter()
            .enumerate()
            .map(move |(k, &t)| (q, Label::from(letters_ref[k]), t))
    });
    let nfa = Nfa::build(
        a.alphabet.clone(),
        a.marked,
        num_states,
        BTreeSet::from([initial]),
        new_finals,
        edges,
    );
    Ok(Dfa {
        nfa,
        initial,
        sink,
        letters,
        table: new_table,
    })
}

/// Complement over the full (marked) word set, via a complete DFA with its
/// final states swapped.
pub fn complement(a: &Nfa, limits: &Limits) -> Result<Nfa> {
    let d = determinize(a, limits)?;
    let all: BTreeSet<usize> = (0..d.num_states()).collect();
    let finals: BTreeSet<usize> = all.difference(&d.nfa.finals).copied().collect();
    let mut nfa = d.nfa;
    nfa.finals = finals;
    Ok(nfa)
}

/// Set difference `L(a) − L(b)`.
pub fn difference(a: &Nfa, b: &Nfa, limits: &Limits) -> Result<Nfa> {
    let comp = complement(b, limits)?;
    Ok(intersect(a, &comp, limits)?.nfa)
}

/// Left quotient `K \ L = { s | ∃p ∈ K: ps ∈ L }`: determinize `L` and make
/// initial every state reachable from its start by some word of `K`.
pub fn left_quotient(k: &Nfa, l: &Nfa, limits: &Limits) -> Result<Nfa> {
    check_same_alphabet(k, l)?;
    let d = determinize(l, limits)?;
    limits.check(d.num_states().saturating_mul(k.num_states()))?;
    // Walk the product of d with k; wherever k accepts, d's state becomes
    // initial.
    let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut stack: Vec<(usize, usize)> = k
        .initials
        .iter()
        .map(|&q| (d.initial(), q))
        .collect();
    seen.extend(stack.iter().copied());
    let mut new_initials: BTreeSet<usize> = BTreeSet::new();
    while let Some((ds, ks)) = stack.pop() {
        if k.finals.contains(&ks) {
            new_initials.insert(ds);
        }
        for &(label, kt) in k.edges_from(ks) {
            let next = match label {
                Label::Eps => (ds, kt),
                Label::Mark => (d.step(ds, Letter::Mark), kt),
                Label::Sym(s) => (d.step(ds, Letter::Sym(s)), kt),
            };
            if seen.insert(next) {
                stack.push(next);
            }
        }
    }
    let mut nfa = d.into_nfa();
    nfa.initials = new_initials;
    if nfa.initials.is_empty() {
        // K ∩ prefixes(L) empty; normalize to a canonical empty automaton.
        return Ok(Nfa::empty_lang(nfa.alphabet, nfa.marked));
    }
    Ok(nfa)
}

/// Right quotient `L / K = { p | ∃s ∈ K: ps ∈ L }`: determinize `L` and make
/// final every state from which some word of `K` reaches a final state.
pub fn right_quotient(l: &Nfa, k: &Nfa, limits: &Limits) -> Result<Nfa> {
    check_same_alphabet(l, k)?;
    let d = determinize(l, limits)?;
    let nd = d.num_states();
    let nk = k.num_states();
    limits.check(nd.saturating_mul(nk))?;
    // Backward reachability from accepting pairs in the product of d and k.
    let id = |i: usize, j: usize| i * nk + j;
    let mut rev_edges: Vec<Vec<usize>> = vec![Vec::new(); nd * nk];
    for ks in 0..nk {
        for &(label, kt) in k.edges_from(ks) {
            match label {
                Label::Eps => {
                    for ds in 0..nd {
                        rev_edges[id(ds, kt)].push(id(ds, ks));
                    }
                }
                Label::Mark | Label::Sym(_) => {
                    let letter = label.as_letter().expect("letter label");
                    for ds in 0..nd {
                        let dt = d.step(ds, letter);
                        rev_edges[id(dt, kt)].push(id(ds, ks));
                    }
                }
            }
        }
    }
    let mut coreach = vec![false; nd * nk];
    let mut stack = Vec::new();
    for &df in &d.nfa.finals {
        for &kf in &k.finals {
            let p = id(df, kf);
            if !coreach[p] {
                coreach[p] = true;
                stack.push(p);
            }
        }
    }
    while let Some(p) = stack.pop() {
        for &q in &rev_edges[p] {
            if !coreach[q] {
                coreach[q] = true;
                stack.push(q);
            }
        }
    }
    let new_finals: BTreeSet<usize> = (0..nd)
        .filter(|&ds| k.initials.iter().any(|&ki| coreach[id(ds, ki)]))
        .collect();
    let mut nfa = d.into_nfa();
    nfa.finals = new_finals;
    Ok(nfa)
}

/// The marker projection: every marker transition becomes an empty-word
/// transition (self-loops are dropped).  States are preserved identically.
pub fn project(a: &Nfa) -> Nfa {
    debug_assert!(a.marked);
    let edges = a.edges().filter_map(|(f, l, t)| match l {
        Label::Mark if f == t => None,
        Label::Mark => Some((f, Label::Eps, t)),
        other => Some((f, other, t)),
    });
    Nfa::build(
        a.alphabet.clone(),
        false,
        a.num_states(),
        a.initials.clone(),
        a.finals.clone(),
        edges,
    )
}

/// The inverse projection: a marker self-loop on every state, admitting
/// arbitrarily many markers anywhere.
pub fn inverse_project(a: &Nfa) -> Nfa {
    debug_assert!(!a.marked);
    let edges = a
        .edges()
        .chain((0..a.num_states()).map(|q| (q, Label::Mark, q)));
    Nfa::build(
        a.alphabet.clone(),
        true,
        a.num_states(),
        a.initials.clone(),
        a.finals.clone(),
        edges,
    )
}

/// The minimal complete DFA recognizing exactly the marker: two live states
/// plus a sink.
pub fn box_dfa(alphabet: Alphabet) -> Dfa {
    let letters: Vec<Letter> = {
        let mut v = vec![Letter::Mark];
        v.extend(alphabet.symbols().map(Letter::Sym));
        v
    };
    let n = 3;
    let (start, accept, sink) = (0usize, 1usize, 2usize);
    let mut table = vec![vec![sink; letters.len()]; n];
    table[start][0] = accept;
    let letters_ref = &letters;
    let edges = table.iter().enumerate().flat_map(|(q, row)| {
        row.iter()
            .enumerate()
            .map(move |(k, &t)| (q, Label::from(letters_ref[k]), t))
    });
    let nfa = Nfa::build(
        alphabet,
        true,
        n,
        BTreeSet::from([start]),
        BTreeSet::from([accept]),
        edges,
    );
    Dfa {
        nfa,
        initial: start,
        sink: Some(sink),
        letters,
        table,
    }
}

/// Language equivalence via synchronized walk of the two determinizations.
pub fn equivalent(a: &Nfa, b: &Nfa, limits: &Limits) -> Result<bool> {
    Ok(first_difference(a, b, limits)?.is_none())
}

/// A shortest word accepted by exactly one of the two automata, if any.
pub fn first_difference(a: &Nfa, b: &Nfa, limits: &Limits) -> Result<Option<MarkedWord>> {
    check_same_alphabet(a, b)?;
    let da = determinize(a, limits)?;
    let db = determinize(b, limits)?;
    let letters = da.letters.clone();
    let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut queue: VecDeque<((usize, usize), MarkedWord)> = VecDeque::new();
    let start = (da.initial(), db.initial());
    seen.insert(start);
    queue.push_back((start, MarkedWord::default()));
    while let Some(((qa, qb), w)) = queue.pop_front() {
        if da.is_final(qa) != db.is_final(qb) {
            return Ok(Some(w));
        }
        for &l in &letters {
            let next = (da.step(qa, l), db.step(qb, l));
            if seen.insert(next) {
                let mut w2 = w.clone();
                w2.0.push(l);
                queue.push_back((next, w2));
            }
        }
    }
    Ok(None)
}

// ---- break-set machinery ----------------------------------------------------

/// Recognizer for the chained break language: accepts `w1#w2#w3` exactly
/// when the outer automaton accepts `w1#w2w3` (the second marker is skipped
/// by the outer copy) and the inner automaton accepts `w2#w3`.  The inner
/// copy starts on the first marker; both must accept at the end.
pub fn join_breaks(outer: &Nfa, inner: &Nfa, limits: &Limits) -> Result<Nfa> {
    check_same_alphabet(outer, inner)?;
    if !outer.marked {
        return Err(AutomataError::Markedness("unmarked"));
    }
    require_single_mark(outer, "left", limits)?;
    require_single_mark(inner, "right", limits)?;

    let no = outer.num_states();
    let ni = inner.num_states();
    let total = no + 2 * no * ni;
    limits.check(total)?;
    // Phase 0: only the outer automaton runs (before the first marker).
    // Phase 1: both run (between the markers); phase 2: both (after).
    let solo = |p: usize| p;
    let pair = |phase: usize, p: usize, q: usize| no + (phase - 1) * no * ni + p * ni + q;

    let mut edges: Vec<(usize, Label, usize)> = Vec::new();
    for (f, l, t) in outer.edges() {
        match l {
            Label::Mark => {
                for &qi in inner.initials() {
                    edges.push((solo(f), Label::Mark, pair(1, t, qi)));
                }
            }
            other => edges.push((solo(f), other, solo(t))),
        }
    }
    for phase in [1usize, 2] {
        for (f, l, t) in outer.edges() {
            match l {
                Label::Eps => {
                    for q in 0..ni {
                        edges.push((pair(phase, f, q), Label::Eps, pair(phase, t, q)));
                    }
                }
                Label::Sym(s) => {
                    for (qf, ql, qt) in inner.edges() {
                        if ql == Label::Sym(s) {
                            edges.push((pair(phase, f, qf), Label::Sym(s), pair(phase, t, qt)));
                        }
                    }
                }
                Label::Mark => {
                    // Only the second marker, and only between the phases:
                    // the outer copy skips it while the inner consumes it.
                }
            }
        }
        for (qf, ql, qt) in inner.edges() {
            match ql {
                Label::Eps => {
                    for p in 0..no {
                        edges.push((pair(phase, p, qf), Label::Eps, pair(phase, p, qt)));
                    }
                }
                Label::Mark if phase == 1 => {
                    for p in 0..no {
                        edges.push((pair(1, p, qf), Label::Mark, pair(2, p, qt)));
                    }
                }
                _ => {}
            }
        }
    }
    let initials: BTreeSet<usize> = outer.initials().iter().map(|&p| solo(p)).collect();
    let finals: BTreeSet<usize> = outer
        .finals()
        .iter()
        .flat_map(|&p| inner.finals().iter().map(move |&q| pair(2, p, q)))
        .collect();
    Ok(Nfa::build(
        outer.alphabet.clone(),
        true,
        total,
        initials,
        finals,
        edges,
    ))
}

fn require_single_mark(a: &Nfa, side: &'static str, limits: &Limits) -> Result<()> {
    let single = Nfa::single_mark_lang(a.alphabet.clone());
    if difference(a, &single, limits)?.is_empty_lang() {
        Ok(())
    } else {
        Err(AutomataError::NotSingleMark { side })
    }
}

/// For a language of exactly-two-marker words, the language with the first
/// marker erased and the second kept.
pub fn erase_first_mark(a: &Nfa, limits: &Limits) -> Result<Nfa> {
    debug_assert!(a.marked);
    let n = a.num_states();
    limits.check(3 * n)?;
    let at = |layer: usize, q: usize| layer * n + q;
    let mut edges = Vec::new();
    for (f, l, t) in a.edges() {
        match l {
            Label::Mark => {
                // First marker becomes an empty-word step, second stays.
                if at(0, f) != at(1, t) {
                    edges.push((at(0, f), Label::Eps, at(1, t)));
                }
                edges.push((at(1, f), Label::Mark, at(2, t)));
            }
            other => {
                for layer in 0..3 {
                    edges.push((at(layer, f), other, at(layer, t)));
                }
            }
        }
    }
    let initials: BTreeSet<usize> = a.initials().iter().map(|&q| at(0, q)).collect();
    let finals: BTreeSet<usize> = a.finals().iter().map(|&q| at(2, q)).collect();
    Ok(Nfa::build(
        a.alphabet.clone(),
        true,
        3 * n,
        initials,
        finals,
        edges,
    ))
}

// ---- pattern compilation ----------------------------------------------------

/// An automaton for the language of a pattern.  The construction goes
/// through the classic inductive one with empty-word gluing, then removes
/// every empty-word transition, so the result is plain-letter only.
pub fn thompson(p: &Pattern, alphabet: &Alphabet) -> Nfa {
    struct Builder {
        edges: Vec<(usize, Label, usize)>,
        count: usize,
    }
    impl Builder {
        fn fresh(&mut self) -> usize {
            self.count += 1;
            self.count - 1
        }
        fn go(&mut self, p: &Pattern) -> (usize, usize) {
            match p {
                Pattern::Epsilon => {
                    let s = self.fresh();
                    let e = self.fresh();
                    self.edges.push((s, Label::Eps, e));
                    (s, e)
                }
                Pattern::Sym(sym) => {
                    let s = self.fresh();
                    let e = self.fresh();
                    self.edges.push((s, Label::Sym(*sym), e));
                    (s, e)
                }
                Pattern::Alt(l, r) => {
                    let (ls, le) = self.go(l);
                    let (rs, re) = self.go(r);
                    let s = self.fresh();
                    let e = self.fresh();
                    self.edges.push((s, Label::Eps, ls));
                    self.edges.push((s, Label::Eps, rs));
                    self.edges.push((le, Label::Eps, e));
                    self.edges.push((re, Label::Eps, e));
                    (s, e)
                }
                Pattern::Cat(l, r) => {
                    let (ls, le) = self.go(l);
                    let (rs, re) = self.go(r);
                    self.edges.push((le, Label::Eps, rs));
                    (ls, re)
                }
                Pattern::Star(c) => {
                    let (cs, ce) = self.go(c);
                    let s = self.fresh();
                    let e = self.fresh();
                    self.edges.push((s, Label::Eps, e));
                    self.edges.push((s, Label::Eps, cs));
                    self.edges.push((ce, Label::Eps, e));
                    self.edges.push((ce, Label::Eps, cs));
                    (s, e)
                }
            }
        }
    }
    let mut b = Builder {
        edges: Vec::new(),
        count: 0,
    };
    let (start, end) = b.go(p);
    let n = b.count;

    // Eliminate the empty-word transitions (the star loop makes them
    // potentially cyclic, which the rest of the crate must never see).
    let mut eps_adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut sym_edges: Vec<(usize, Label, usize)> = Vec::new();
    for &(f, l, t) in &b.edges {
        if l == Label::Eps {
            eps_adj[f].push(t);
        } else {
            sym_edges.push((f, l, t));
        }
    }
    let closure_of = |q: usize| -> Vec<bool> {
        let mut seen = vec![false; n];
        seen[q] = true;
        let mut stack = vec![q];
        while let Some(x) = stack.pop() {
            for &t in &eps_adj[x] {
                if !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        seen
    };
    let mut edges: BTreeSet<(usize, Label, usize)> = BTreeSet::new();
    let mut finals: BTreeSet<usize> = BTreeSet::new();
    for q in 0..n {
        let cl = closure_of(q);
        if cl[end] {
            finals.insert(q);
        }
        for (p2, &in_closure) in cl.iter().enumerate() {
            if in_closure {
                for &(f, l, t) in &sym_edges {
                    if f == p2 {
                        edges.insert((q, l, t));
                    }
                }
            }
        }
    }
    Nfa::build(
        alphabet.clone(),
        false,
        n,
        BTreeSet::from([start]),
        finals,
        edges,
    )
}

// ---- serialization ----------------------------------------------------------

#[derive(Serialize, Deserialize)]
pub(crate) struct NfaDto {
    pub alphabet: String,
    pub marked: bool,
    pub states: usize,
    pub initials: Vec<usize>,
    pub finals: Vec<usize>,
    pub transitions: Vec<TransitionDto>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct TransitionDto {
    pub from: usize,
    pub label: String,
    pub to: usize,
}

impl Nfa {
    pub(crate) fn to_dto(&self) -> NfaDto {
        NfaDto {
            alphabet: self.alphabet.to_string(),
            marked: self.marked,
            states: self.num_states(),
            initials: self.initials.iter().copied().collect(),
            finals: self.finals.iter().copied().collect(),
            transitions: self
                .edges()
                .map(|(f, l, t)| TransitionDto {
                    from: f,
                    label: l.to_string(),
                    to: t,
                })
                .collect(),
        }
    }

    pub(crate) fn from_dto(dto: &NfaDto) -> Result<Nfa> {
        let alphabet = Alphabet::new(dto.alphabet.chars())
            .map_err(|e| AutomataError::BadSerialization(e.to_string()))?;
        let bad = |msg: &str| AutomataError::BadSerialization(msg.to_string());
        let mut edges = Vec::with_capacity(dto.transitions.len());
        for t in &dto.transitions {
            if t.from >= dto.states || t.to >= dto.states {
                return Err(bad("transition endpoint out of range"));
            }
            let label = match t.label.as_str() {
                "<eps>" => Label::Eps,
                "#" => {
                    if !dto.marked {
                        return Err(bad("marker transition in unmarked automaton"));
                    }
                    Label::Mark
                }
                s => {
                    let mut chars = s.chars();
                    let (c, rest) = (chars.next(), chars.next());
                    match (c, rest) {
                        (Some(c), None) if alphabet.contains(c) => {
                            Label::Sym(Symbol::new(c).expect("alphabet letter"))
                        }
                        _ => return Err(bad(&format!("unknown label `{s}`"))),
                    }
                }
            };
            edges.push((t.from, label, t.to));
        }
        for &q in dto.initials.iter().chain(dto.finals.iter()) {
            if q >= dto.states {
                return Err(bad("state out of range"));
            }
        }
        if dto.states == 0 {
            return Err(bad("automaton must have at least one state"));
        }
        Ok(Nfa::build(
            alphabet,
            dto.marked,
            dto.states,
            dto.initials.iter().copied().collect(),
            dto.finals.iter().copied().collect(),
            edges,
        ))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.to_dto()).expect("automaton serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Nfa> {
        let dto: NfaDto = serde_json::from_value(v.clone())
            .map_err(|e| AutomataError::BadSerialization(e.to_string()))?;
        Nfa::from_dto(&dto)
    }

    /// GraphViz rendering; `annotate` may add extra per-state label text.
    pub fn to_dot(&self, name: &str, annotate: impl Fn(usize) -> Option<String>) -> String {
        let mut s = String::new();
        s.push_str(&format!("digraph {name} {{\n"));
        s.push_str("  rankdir=LR;\n  node [shape=circle];\n");
        for q in 0..self.num_states() {
            let shape = if self.finals.contains(&q) {
                "doublecircle"
            } else {
                "circle"
            };
            let extra = annotate(q).map(|a| format!("\\n{a}")).unwrap_or_default();
            s.push_str(&format!("  q{q} [shape={shape}, label=\"{q}{extra}\"];\n"));
        }
        for &q in &self.initials {
            s.push_str(&format!("  start{q} [shape=point];\n  start{q} -> q{q};\n"));
        }
        for (f, l, t) in self.edges() {
            let label = match l {
                Label::Eps => "ε".to_string(),
                other => other.to_string(),
            };
            s.push_str(&format!("  q{f} -> q{t} [label=\"{label}\"];\n"));
        }
        s.push_str("}\n");
        s
    }
}
