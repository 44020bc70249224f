//! Direct, slow evaluator of the matching relation: the ground truth the
//! rest of the crate is tested against.
//!
//! Matching is disambiguated by two policies.  Alternation takes the first
//! branch that matches (the second binds only when the whole word cannot go
//! through the first).  A star heading a concatenation takes the longest
//! prefix that still lets the remainder match.  Stars are atomic: nodes
//! below a star receive no associations.
//!
//! The module also carries the *first-match simulation* of the longest
//! match policy (rewriting `P1*·P2` to `((P1·P1*)+ε)·P2` at every
//! expansion).  That simulation is provably wrong; it exists here so its
//! divergences can be exhibited and tested, not used.
//!
//! Everything works by structural recursion over word spans with
//! memoization; language membership is decided by an independent recursive
//! descent, never by the automata modules this oracle is meant to check.

use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

use thiserror::Error;

use crate::automata::MarkedWord;
use crate::pattern::{AssociationMap, NodeAddress, Pattern, Symbol, Word};

/// Result of matching a word against a pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatchOutcome {
    Match(AssociationMap),
    NoMatch,
}

impl MatchOutcome {
    pub fn as_match(&self) -> Option<&AssociationMap> {
        match self {
            MatchOutcome::Match(v) => Some(v),
            MatchOutcome::NoMatch => None,
        }
    }

    pub fn is_match(&self) -> bool {
        self.as_match().is_some()
    }
}

/// Result of the auxiliary split relation for a concatenation head at a
/// given cut: the two component association maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitOutcome {
    Match {
        left: AssociationMap,
        right: AssociationMap,
        cut: usize,
    },
    NoMatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("first-match engine cannot handle `{0}`: a star whose body accepts the empty word heads a concatenation")]
    UnsupportedPattern(String),
    #[error("node `{0}` is not a bindable node of the pattern")]
    NodeNotBindable(String),
    #[error("node `{0}` is not labeled with a concatenation")]
    NodeNotConcat(String),
}

// ---- interned pattern store ---------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Node {
    Epsilon,
    Sym(Symbol),
    Alt(u32, u32),
    Cat(u32, u32),
    Star(u32),
}

/// Reusable evaluation context: interns every subpattern (including the
/// concatenations and star expansions materialized during evaluation) so
/// memo tables can be keyed by small ids.
pub struct Session {
    ids: HashMap<Rc<Pattern>, u32>,
    pats: Vec<Rc<Pattern>>,
    nodes: Vec<Node>,
    cats: HashMap<(u32, u32), u32>,
    star_rewrites: HashMap<u32, u32>,
}

impl Session {
    pub fn new() -> Session {
        Session {
            ids: HashMap::new(),
            pats: Vec::new(),
            nodes: Vec::new(),
            cats: HashMap::new(),
            star_rewrites: HashMap::new(),
        }
    }

    fn intern(&mut self, p: &Pattern) -> u32 {
        if let Some(&id) = self.ids.get(p) {
            return id;
        }
        let node = match p {
            Pattern::Epsilon => Node::Epsilon,
            Pattern::Sym(s) => Node::Sym(*s),
            Pattern::Alt(l, r) => Node::Alt(self.intern(l), self.intern(r)),
            Pattern::Cat(l, r) => Node::Cat(self.intern(l), self.intern(r)),
            Pattern::Star(c) => Node::Star(self.intern(c)),
        };
        let id = self.pats.len() as u32;
        let rc = Rc::new(p.clone());
        self.ids.insert(rc.clone(), id);
        self.pats.push(rc);
        self.nodes.push(node);
        id
    }

    fn pat(&self, id: u32) -> &Rc<Pattern> {
        &self.pats[id as usize]
    }

    fn node(&self, id: u32) -> Node {
        self.nodes[id as usize]
    }

    fn cat_of(&mut self, a: u32, b: u32) -> u32 {
        if let Some(&id) = self.cats.get(&(a, b)) {
            return id;
        }
        let p = Pattern::cat(Pattern::clone(self.pat(a)), Pattern::clone(self.pat(b)));
        let id = self.intern(&p);
        self.cats.insert((a, b), id);
        id
    }

    /// `((body · star) + ε)`, the first-match expansion of a star head.
    fn star_rewrite(&mut self, star: u32) -> u32 {
        if let Some(&id) = self.star_rewrites.get(&star) {
            return id;
        }
        let body = match self.node(star) {
            Node::Star(c) => c,
            _ => unreachable!("rewrite of a non-star"),
        };
        let unrolled = self.cat_of(body, star);
        let p = Pattern::alt(Pattern::clone(self.pat(unrolled)), Pattern::Epsilon);
        let id = self.intern(&p);
        self.star_rewrites.insert(star, id);
        id
    }

    /// Matches one word with the longest-match rules.
    pub fn match_word(&mut self, p: &Pattern, w: &Word) -> MatchOutcome {
        let id = self.intern(p);
        let mut eval = Eval::new(self, w, false);
        match eval.match_span(id, 0, w.len()) {
            Some(v) => MatchOutcome::Match((*v).clone()),
            None => MatchOutcome::NoMatch,
        }
    }

    /// Matches one word with the first-match simulation.
    pub fn match_word_firstmatch(
        &mut self,
        p: &Pattern,
        w: &Word,
    ) -> Result<MatchOutcome, OracleError> {
        fm_supported(p)?;
        let id = self.intern(p);
        let mut eval = Eval::new(self, w, true);
        Ok(match eval.match_span(id, 0, w.len()) {
            Some(v) => MatchOutcome::Match((*v).clone()),
            None => MatchOutcome::NoMatch,
        })
    }

    /// Every association map derivable for the word, across all rule and
    /// split choices.  Uniqueness of matching says this has at most one
    /// element.
    pub fn match_all(&mut self, p: &Pattern, w: &Word) -> Vec<AssociationMap> {
        let id = self.intern(p);
        let mut eval = Eval::new(self, w, false);
        let all = eval.all_match(id, 0, w.len());
        let set: BTreeSet<AssociationMap> = all.iter().map(|v| (**v).clone()).collect();
        set.into_iter().collect()
    }
}

impl Default for Session {
    fn default() -> Session {
        Session::new()
    }
}

// ---- the evaluator --------------------------------------------------------

type AuxPair = (Rc<AssociationMap>, Rc<AssociationMap>);
type Span = (u32, usize, usize);
type SplitSpan = (u32, u32, usize, usize, usize);

struct Eval<'s> {
    s: &'s mut Session,
    w: Vec<Symbol>,
    first_match: bool,
    member: HashMap<Span, bool>,
    matches: HashMap<Span, Option<Rc<AssociationMap>>>,
    aux_memo: HashMap<SplitSpan, Option<Rc<AuxPair>>>,
    all_matches: HashMap<Span, Rc<Vec<Rc<AssociationMap>>>>,
    all_aux_memo: HashMap<SplitSpan, Rc<Vec<AuxPair>>>,
}

impl<'s> Eval<'s> {
    fn new(s: &'s mut Session, w: &Word, first_match: bool) -> Eval<'s> {
        Eval {
            s,
            w: w.symbols().to_vec(),
            first_match,
            member: HashMap::new(),
            matches: HashMap::new(),
            aux_memo: HashMap::new(),
            all_matches: HashMap::new(),
            all_aux_memo: HashMap::new(),
        }
    }

    fn sub(&self, i: usize, j: usize) -> Word {
        self.w[i..j].iter().copied().collect()
    }

    /// Language membership of a span, by recursive descent on the pattern.
    fn member(&mut self, p: u32, i: usize, j: usize) -> bool {
        if let Some(&b) = self.member.get(&(p, i, j)) {
            return b;
        }
        let b = match self.s.node(p) {
            Node::Epsilon => i == j,
            Node::Sym(sym) => j == i + 1 && self.w[i] == sym,
            Node::Alt(l, r) => self.member(l, i, j) || self.member(r, i, j),
            Node::Cat(l, r) => (i..=j).any(|k| self.member(l, i, k) && self.member(r, k, j)),
            Node::Star(c) => {
                i == j || (i + 1..=j).any(|m| self.member(c, i, m) && self.member(p, m, j))
            }
        };
        self.member.insert((p, i, j), b);
        b
    }

    fn match_span(&mut self, p: u32, i: usize, j: usize) -> Option<Rc<AssociationMap>> {
        if let Some(v) = self.matches.get(&(p, i, j)) {
            return v.clone();
        }
        let out: Option<Rc<AssociationMap>> = match self.s.node(p) {
            Node::Epsilon => (i == j).then(|| Rc::new(AssociationMap::atomic(Word::empty()))),
            Node::Sym(sym) => (j == i + 1 && self.w[i] == sym)
                .then(|| Rc::new(AssociationMap::atomic(self.sub(i, j)))),
            // Stars are atomic: any way of chopping the span into body
            // iterations yields the same association, so membership decides.
            Node::Star(_) => self
                .member(p, i, j)
                .then(|| Rc::new(AssociationMap::atomic(self.sub(i, j)))),
            Node::Alt(l, r) => {
                if let Some(v) = self.match_span(l, i, j) {
                    let rp = self.s.pat(r).clone();
                    Some(Rc::new(AssociationMap::alt_left(&v, &rp)))
                } else if !self.member(l, i, j) {
                    let v = self.match_span(r, i, j);
                    v.map(|v| {
                        let lp = self.s.pat(l).clone();
                        Rc::new(AssociationMap::alt_right(&lp, &v))
                    })
                } else {
                    None
                }
            }
            Node::Cat(l, r) => {
                let mut found = None;
                for cut in i..=j {
                    if let Some(pair) = self.aux(l, r, i, cut, j) {
                        found = Some(Rc::new(AssociationMap::cat_join(&pair.0, &pair.1)));
                        break;
                    }
                }
                found
            }
        };
        self.matches.insert((p, i, j), out.clone());
        out
    }

    /// The auxiliary relation for a concatenation whose head is `p1`: the
    /// word is already divided at `k` into `w[i..k]` for the head and
    /// `w[k..j]` for the rest.
    fn aux(&mut self, p1: u32, p2: u32, i: usize, k: usize, j: usize) -> Option<Rc<AuxPair>> {
        if let Some(v) = self.aux_memo.get(&(p1, p2, i, k, j)) {
            return v.clone();
        }
        let out: Option<Rc<AuxPair>> = match self.s.node(p1) {
            Node::Epsilon => {
                if k == i {
                    self.match_span(p2, k, j)
                        .map(|v2| Rc::new((Rc::new(AssociationMap::atomic(Word::empty())), v2)))
                } else {
                    None
                }
            }
            Node::Sym(sym) => {
                if k == i + 1 && self.w[i] == sym {
                    self.match_span(p2, k, j)
                        .map(|v2| Rc::new((Rc::new(AssociationMap::atomic(self.sub(i, k))), v2)))
                } else {
                    None
                }
            }
            Node::Alt(q1, q2) => {
                if let Some(pair) = self.aux(q1, p2, i, k, j) {
                    let q2p = self.s.pat(q2).clone();
                    Some(Rc::new((
                        Rc::new(AssociationMap::alt_left(&pair.0, &q2p)),
                        pair.1.clone(),
                    )))
                } else {
                    // The second branch binds only when the whole word is
                    // not matchable through the first.
                    let through_first = self.s.cat_of(q1, p2);
                    if self.member(through_first, i, j) {
                        None
                    } else {
                        self.aux(q2, p2, i, k, j).map(|pair| {
                            let q1p = self.s.pat(q1).clone();
                            Rc::new((
                                Rc::new(AssociationMap::alt_right(&q1p, &pair.0)),
                                pair.1.clone(),
                            ))
                        })
                    }
                }
            }
            Node::Cat(q1, q2) => {
                let rest = self.s.cat_of(q2, p2);
                let mut found = None;
                for cut in i..=k {
                    if self.aux(q1, rest, i, cut, j).is_some() {
                        if let Some(pair2) = self.aux(q2, p2, cut, k, j) {
                            let pair1 = self.aux(q1, rest, i, cut, j).expect("just derived");
                            found = Some(Rc::new((
                                Rc::new(AssociationMap::cat_join(&pair1.0, &pair2.0)),
                                pair2.1.clone(),
                            )));
                            break;
                        }
                    }
                }
                found
            }
            Node::Star(_) => {
                if self.first_match {
                    self.aux_star_firstmatch(p1, p2, i, k, j)
                } else {
                    self.aux_star_longest(p1, p2, i, k, j)
                }
            }
        };
        self.aux_memo.insert((p1, p2, i, k, j), out.clone());
        out
    }

    /// Longest match: the star takes `w[i..k]` only if no nonempty chunk of
    /// the remainder could still be absorbed into it with the rest matching.
    fn aux_star_longest(
        &mut self,
        star: u32,
        p2: u32,
        i: usize,
        k: usize,
        j: usize,
    ) -> Option<Rc<AuxPair>> {
        if !self.member(star, i, k) {
            return None;
        }
        let v2 = self.match_span(p2, k, j)?;
        // Scan longer absorptions first; the accepted split is determined
        // by the rule, not by this order.
        for m in (k + 1..=j).rev() {
            if self.member(star, i, m) && self.member(p2, m, j) {
                return None;
            }
        }
        Some(Rc::new((
            Rc::new(AssociationMap::atomic(self.sub(i, k))),
            v2,
        )))
    }

    /// The first-match simulation: expand the star once and let the
    /// alternation rules decide.  Inner associations of the expansion are
    /// discarded; the star stays atomic.
    fn aux_star_firstmatch(
        &mut self,
        star: u32,
        p2: u32,
        i: usize,
        k: usize,
        j: usize,
    ) -> Option<Rc<AuxPair>> {
        let rewrite = self.s.star_rewrite(star);
        let pair = self.aux(rewrite, p2, i, k, j)?;
        Some(Rc::new((
            Rc::new(AssociationMap::atomic(self.sub(i, k))),
            pair.1.clone(),
        )))
    }

    // ---- exhaustive derivation enumeration (longest-match rules only) ----

    fn all_match(&mut self, p: u32, i: usize, j: usize) -> Rc<Vec<Rc<AssociationMap>>> {
        if let Some(v) = self.all_matches.get(&(p, i, j)) {
            return v.clone();
        }
        let mut out: Vec<Rc<AssociationMap>> = Vec::new();
        match self.s.node(p) {
            Node::Epsilon | Node::Sym(_) | Node::Star(_) => {
                if let Some(v) = self.match_span(p, i, j) {
                    out.push(v);
                }
            }
            Node::Alt(l, r) => {
                let lp = self.s.pat(r).clone();
                for v in self.all_match(l, i, j).iter() {
                    out.push(Rc::new(AssociationMap::alt_left(v, &lp)));
                }
                if !self.member(l, i, j) {
                    let q1p = self.s.pat(l).clone();
                    for v in self.all_match(r, i, j).iter() {
                        out.push(Rc::new(AssociationMap::alt_right(&q1p, v)));
                    }
                }
            }
            Node::Cat(l, r) => {
                for cut in i..=j {
                    for (v1, v2) in self.all_aux(l, r, i, cut, j).iter() {
                        out.push(Rc::new(AssociationMap::cat_join(v1, v2)));
                    }
                }
            }
        }
        let rc = Rc::new(out);
        self.all_matches.insert((p, i, j), rc.clone());
        rc
    }

    fn all_aux(&mut self, p1: u32, p2: u32, i: usize, k: usize, j: usize) -> Rc<Vec<AuxPair>> {
        if let Some(v) = self.all_aux_memo.get(&(p1, p2, i, k, j)) {
            return v.clone();
        }
        let mut out: Vec<AuxPair> = Vec::new();
        match self.s.node(p1) {
            Node::Epsilon => {
                if k == i {
                    for v2 in self.all_match(p2, k, j).iter() {
                        out.push((Rc::new(AssociationMap::atomic(Word::empty())), v2.clone()));
                    }
                }
            }
            Node::Sym(sym) => {
                if k == i + 1 && self.w[i] == sym {
                    for v2 in self.all_match(p2, k, j).iter() {
                        out.push((
                            Rc::new(AssociationMap::atomic(self.sub(i, k))),
                            v2.clone(),
                        ));
                    }
                }
            }
            Node::Alt(q1, q2) => {
                let q2p = self.s.pat(q2).clone();
                for (v1, v2) in self.all_aux(q1, p2, i, k, j).iter() {
                    out.push((Rc::new(AssociationMap::alt_left(v1, &q2p)), v2.clone()));
                }
                let through_first = self.s.cat_of(q1, p2);
                if !self.member(through_first, i, j) {
                    let q1p = self.s.pat(q1).clone();
                    for (v1, v2) in self.all_aux(q2, p2, i, k, j).iter() {
                        out.push((Rc::new(AssociationMap::alt_right(&q1p, v1)), v2.clone()));
                    }
                }
            }
            Node::Cat(q1, q2) => {
                let rest = self.s.cat_of(q2, p2);
                for cut in i..=k {
                    let firsts = self.all_aux(q1, rest, i, cut, j);
                    if firsts.is_empty() {
                        continue;
                    }
                    let seconds = self.all_aux(q2, p2, cut, k, j);
                    for (v1, _w) in firsts.iter() {
                        for (v2, v3) in seconds.iter() {
                            out.push((Rc::new(AssociationMap::cat_join(v1, v2)), v3.clone()));
                        }
                    }
                }
            }
            Node::Star(_) => {
                if self.member(p1, i, k) {
                    let premise_holds = {
                        let mut ok = true;
                        for m in k + 1..=j {
                            if self.member(p1, i, m) && self.member(p2, m, j) {
                                ok = false;
                                break;
                            }
                        }
                        ok
                    };
                    if premise_holds {
                        for v2 in self.all_match(p2, k, j).iter() {
                            out.push((
                                Rc::new(AssociationMap::atomic(self.sub(i, k))),
                                v2.clone(),
                            ));
                        }
                    }
                }
            }
        }
        let rc = Rc::new(out);
        self.all_aux_memo.insert((p1, p2, i, k, j), rc.clone());
        rc
    }
}

// ---- public entry points ----------------------------------------------------

/// Evaluates the matching relation on one word.
pub fn oracle_match(p: &Pattern, w: &Word) -> MatchOutcome {
    Session::new().match_word(p, w)
}

/// Every derivable association map for the word (at most one when the
/// rules are deterministic, which is exactly what tests assert).
pub fn oracle_match_all(p: &Pattern, w: &Word) -> Vec<AssociationMap> {
    Session::new().match_all(p, w)
}

/// The first-match simulation of longest match.  Requires every star that
/// heads a concatenation (also after reassociation) to have a body that
/// cannot match the empty word.
pub fn oracle_match_firstmatch(p: &Pattern, w: &Word) -> Result<MatchOutcome, OracleError> {
    Session::new().match_word_firstmatch(p, w)
}

/// Checks the first-match engine's precondition.
pub fn fm_supported(p: &Pattern) -> Result<(), OracleError> {
    fn heads_ok(p: &Pattern) -> Result<(), OracleError> {
        match p {
            Pattern::Epsilon | Pattern::Sym(_) => Ok(()),
            Pattern::Alt(l, r) | Pattern::Cat(l, r) => {
                heads_ok(l)?;
                heads_ok(r)
            }
            Pattern::Star(c) => {
                if c.accepts_empty() {
                    Err(OracleError::UnsupportedPattern(p.to_string()))
                } else {
                    heads_ok(c)
                }
            }
        }
    }
    fn walk(p: &Pattern) -> Result<(), OracleError> {
        match p {
            Pattern::Epsilon | Pattern::Sym(_) => Ok(()),
            Pattern::Alt(l, r) => {
                walk(l)?;
                walk(r)
            }
            Pattern::Cat(l, r) => {
                // Every star reachable as the head of this concatenation
                // must have a non-nullable body; heads are closed under
                // unfolding alternation, reassociation and star expansion.
                heads_ok(l)?;
                walk(l)?;
                walk(r)
            }
            Pattern::Star(c) => walk(c),
        }
    }
    walk(p)
}

/// Language membership by recursive descent, independent of the automata.
pub fn lang_member(p: &Pattern, w: &Word) -> bool {
    let mut s = Session::new();
    let id = s.intern(p);
    let mut eval = Eval::new(&mut s, w, false);
    eval.member(id, 0, w.len())
}

/// Evaluates the auxiliary split relation for `left · right` on the word
/// divided at `cut`.
pub fn split_match(left: &Pattern, right: &Pattern, w: &Word, cut: usize) -> SplitOutcome {
    assert!(cut <= w.len());
    let mut s = Session::new();
    let l = s.intern(left);
    let r = s.intern(right);
    let mut eval = Eval::new(&mut s, w, false);
    match eval.aux(l, r, 0, cut, w.len()) {
        Some(pair) => SplitOutcome::Match {
            left: (*pair.0).clone(),
            right: (*pair.1).clone(),
            cut,
        },
        None => SplitOutcome::NoMatch,
    }
}

fn node_value(v: &AssociationMap, n: &NodeAddress) -> Option<Word> {
    v.get(n).and_then(|o| o.clone())
}

/// The set of subwords a node binds across all words of the given context,
/// by running the oracle on each word.
pub fn brute_force_type(
    n: &NodeAddress,
    p: &Pattern,
    context_words: &[Word],
) -> Result<BTreeSet<Word>, OracleError> {
    if !p.bindable_nodes().contains(n) {
        return Err(OracleError::NodeNotBindable(n.to_string()));
    }
    let mut session = Session::new();
    let mut out = BTreeSet::new();
    for w in context_words {
        if let MatchOutcome::Match(v) = session.match_word(p, w) {
            if let Some(word) = node_value(&v, n) {
                out.insert(word);
            }
        }
    }
    Ok(out)
}

/// Same as [`brute_force_type`] but with the first-match engine.
pub fn brute_force_type_firstmatch(
    n: &NodeAddress,
    p: &Pattern,
    context_words: &[Word],
) -> Result<BTreeSet<Word>, OracleError> {
    if !p.bindable_nodes().contains(n) {
        return Err(OracleError::NodeNotBindable(n.to_string()));
    }
    let mut session = Session::new();
    let mut out = BTreeSet::new();
    for w in context_words {
        if let MatchOutcome::Match(v) = session.match_word_firstmatch(p, w)? {
            if let Some(word) = node_value(&v, n) {
                out.insert(word);
            }
        }
    }
    Ok(out)
}

/// The break set of a concatenation node: how its matched subword divides
/// between its children, one marker per word.
pub fn brute_force_break(
    n: &NodeAddress,
    p: &Pattern,
    context_words: &[Word],
) -> Result<BTreeSet<MarkedWord>, OracleError> {
    if !p.bindable_nodes().contains(n) {
        return Err(OracleError::NodeNotBindable(n.to_string()));
    }
    if !matches!(p.subpattern_at(n), Ok(Pattern::Cat(..))) {
        return Err(OracleError::NodeNotConcat(n.to_string()));
    }
    let mut session = Session::new();
    let mut out = BTreeSet::new();
    for w in context_words {
        if let MatchOutcome::Match(v) = session.match_word(p, w) {
            let left = node_value(&v, &n.child(1));
            let right = node_value(&v, &n.child(2));
            if let (Some(l), Some(r)) = (left, right) {
                out.insert(MarkedWord::with_break(&l, &r));
            }
        }
    }
    Ok(out)
}
