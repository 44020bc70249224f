//! Pattern syntax trees, node addressing, and association maps.
//!
//! A pattern is a regular expression over a finite alphabet, viewed as a
//! binary syntax tree.  Tree nodes are addressed by digit strings over
//! `{1, 2}` (the root is the empty string, printed as `root`).  A node is
//! *bindable* when no ancestor is a star; bindable nodes are the positions
//! that receive a subword (or no value at all) when a word is matched.
//!
//! Concrete syntax: letters stand for themselves, `_` is the empty-word
//! pattern, `+` is alternation, juxtaposition (or `.`) is concatenation and
//! postfix `*` is iteration.  `+` and concatenation associate to the right;
//! precedence is `*` over concatenation over `+`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A single letter of the alphabet.  Letters are ASCII alphanumerics; all
/// other characters are reserved for the concrete syntax and for the
/// serialization markers (`#` for the break marker, `<none>` for no value).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Symbol(char);

impl Symbol {
    pub fn new(c: char) -> Result<Symbol, PatternError> {
        if c.is_ascii_alphanumeric() {
            Ok(Symbol(c))
        } else {
            Err(PatternError::BadLetter(c))
        }
    }

    pub fn as_char(&self) -> char {
        self.0
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A finite, nonempty alphabet of [`Symbol`]s.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    letters: BTreeSet<char>,
}

impl Alphabet {
    pub fn new(letters: impl IntoIterator<Item = char>) -> Result<Alphabet, PatternError> {
        let mut set = BTreeSet::new();
        for c in letters {
            Symbol::new(c)?;
            set.insert(c);
        }
        if set.is_empty() {
            return Err(PatternError::EmptyAlphabet);
        }
        Ok(Alphabet { letters: set })
    }

    /// Alphabet made of every letter occurring in the given texts, falling
    /// back to `{a}` when no letter occurs at all.
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Alphabet {
        let mut set: BTreeSet<char> = BTreeSet::new();
        for t in texts {
            set.extend(t.chars().filter(|c| c.is_ascii_alphanumeric()));
        }
        if set.is_empty() {
            set.insert('a');
        }
        Alphabet { letters: set }
    }

    pub fn contains(&self, c: char) -> bool {
        self.letters.contains(&c)
    }

    pub fn symbols(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.letters.iter().map(|&c| Symbol(c))
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.letters {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// A finite word over the alphabet.  The empty word prints as `<eps>` in
/// tabular output; `Display` renders it as the empty string.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word(Vec<Symbol>);

impl Word {
    pub fn empty() -> Word {
        Word(Vec::new())
    }

    pub fn new(symbols: Vec<Symbol>) -> Word {
        Word(symbols)
    }

    /// Parses a word, requiring every letter to be in the alphabet.
    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Word, PatternError> {
        let mut symbols = Vec::with_capacity(text.len());
        for c in text.chars() {
            let sym = Symbol::new(c)?;
            if !alphabet.contains(c) {
                return Err(PatternError::ForeignLetter(c));
            }
            symbols.push(sym);
        }
        Ok(Word(symbols))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// The subword spanning positions `i..j` (0-based gaps, as in bounds).
    pub fn slice(&self, i: usize, j: usize) -> Word {
        Word(self.0[i..j].to_vec())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromIterator<Symbol> for Word {
    fn from_iter<T: IntoIterator<Item = Symbol>>(iter: T) -> Word {
        Word(iter.into_iter().collect())
    }
}

/// Address of a node in a pattern tree: a string of digits over `{1, 2}`.
/// The empty address is the root and serializes as the literal `root`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeAddress(Vec<u8>);

impl NodeAddress {
    pub fn root() -> NodeAddress {
        NodeAddress(Vec::new())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn digits(&self) -> &[u8] {
        &self.0
    }

    /// The address extended by one child step (digit must be 1 or 2).
    pub fn child(&self, digit: u8) -> NodeAddress {
        debug_assert!(digit == 1 || digit == 2);
        let mut v = self.0.clone();
        v.push(digit);
        NodeAddress(v)
    }

    /// `prefix` followed by `self`.
    pub fn prefixed_by(&self, prefix: &NodeAddress) -> NodeAddress {
        let mut v = prefix.0.clone();
        v.extend_from_slice(&self.0);
        NodeAddress(v)
    }

    /// Strips a leading digit, returning the remainder if it matches.
    pub fn strip_digit(&self, digit: u8) -> Option<NodeAddress> {
        match self.0.split_first() {
            Some((&d, rest)) if d == digit => Some(NodeAddress(rest.to_vec())),
            _ => None,
        }
    }

    /// Strips a leading digit sequence, returning the remainder if it
    /// matches.
    pub fn strip_prefix(&self, prefix: &[u8]) -> Option<NodeAddress> {
        self.0
            .strip_prefix(prefix)
            .map(|rest| NodeAddress(rest.to_vec()))
    }

    pub fn parse(text: &str) -> Result<NodeAddress, PatternError> {
        if text == "root" {
            return Ok(NodeAddress::root());
        }
        let mut v = Vec::with_capacity(text.len());
        for c in text.chars() {
            match c {
                '1' => v.push(1),
                '2' => v.push(2),
                _ => return Err(PatternError::BadAddress(text.to_string())),
            }
        }
        if v.is_empty() {
            return Err(PatternError::BadAddress(text.to_string()));
        }
        Ok(NodeAddress(v))
    }
}

impl fmt::Display for NodeAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "root");
        }
        for d in &self.0 {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// The pattern syntax tree.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pattern {
    /// The empty-word pattern, written `_`.
    Epsilon,
    /// A single letter.
    Sym(Symbol),
    /// Alternation `P1 + P2`, disambiguated by first match.
    Alt(Box<Pattern>, Box<Pattern>),
    /// Concatenation `P1 . P2`.
    Cat(Box<Pattern>, Box<Pattern>),
    /// Iteration `P1*`, disambiguated by longest match and treated as
    /// atomic: subexpressions of a star receive no association.
    Star(Box<Pattern>),
}

impl Pattern {
    pub fn sym(c: char) -> Pattern {
        Pattern::Sym(Symbol::new(c).expect("letter"))
    }

    pub fn alt(l: Pattern, r: Pattern) -> Pattern {
        Pattern::Alt(Box::new(l), Box::new(r))
    }

    pub fn cat(l: Pattern, r: Pattern) -> Pattern {
        Pattern::Cat(Box::new(l), Box::new(r))
    }

    pub fn star(p: Pattern) -> Pattern {
        Pattern::Star(Box::new(p))
    }

    /// Parses the concrete syntax; every letter must be in the alphabet.
    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Pattern, PatternError> {
        parse::parse(text, alphabet)
    }

    /// Number of nodes of the tree, i.e. the cardinality of its address
    /// domain.
    pub fn size(&self) -> usize {
        match self {
            Pattern::Epsilon | Pattern::Sym(_) => 1,
            Pattern::Alt(l, r) | Pattern::Cat(l, r) => 1 + l.size() + r.size(),
            Pattern::Star(c) => 1 + c.size(),
        }
    }

    /// The subtree rooted at the given address.
    pub fn subpattern_at(&self, addr: &NodeAddress) -> Result<&Pattern, PatternError> {
        let mut cur = self;
        for (idx, d) in addr.digits().iter().enumerate() {
            cur = match (cur, d) {
                (Pattern::Alt(l, _), 1) | (Pattern::Cat(l, _), 1) | (Pattern::Star(l), 1) => l,
                (Pattern::Alt(_, r), 2) | (Pattern::Cat(_, r), 2) => r,
                _ => {
                    return Err(PatternError::AddressNotInPattern(
                        NodeAddress(addr.digits()[..=idx].to_vec()).to_string(),
                    ))
                }
            };
        }
        Ok(cur)
    }

    /// All node addresses of the tree, i.e. `dom(P)`.
    pub fn addresses(&self) -> BTreeSet<NodeAddress> {
        let mut out = BTreeSet::new();
        self.collect_addresses(NodeAddress::root(), false, &mut out, &mut BTreeSet::new());
        out
    }

    /// The addresses with no star ancestor.
    pub fn bindable_nodes(&self) -> BTreeSet<NodeAddress> {
        let mut bindable = BTreeSet::new();
        self.collect_addresses(NodeAddress::root(), false, &mut BTreeSet::new(), &mut bindable);
        bindable
    }

    fn collect_addresses(
        &self,
        at: NodeAddress,
        under_star: bool,
        all: &mut BTreeSet<NodeAddress>,
        bindable: &mut BTreeSet<NodeAddress>,
    ) {
        if !under_star {
            bindable.insert(at.clone());
        }
        all.insert(at.clone());
        match self {
            Pattern::Epsilon | Pattern::Sym(_) => {}
            Pattern::Alt(l, r) | Pattern::Cat(l, r) => {
                l.collect_addresses(at.child(1), under_star, all, bindable);
                r.collect_addresses(at.child(2), under_star, all, bindable);
            }
            Pattern::Star(c) => {
                c.collect_addresses(at.child(1), true, all, bindable);
            }
        }
    }

    /// Whether the empty word belongs to the language of the pattern.
    pub fn accepts_empty(&self) -> bool {
        match self {
            Pattern::Epsilon | Pattern::Star(_) => true,
            Pattern::Sym(_) => false,
            Pattern::Alt(l, r) => l.accepts_empty() || r.accepts_empty(),
            Pattern::Cat(l, r) => l.accepts_empty() && r.accepts_empty(),
        }
    }

    /// All letters occurring in the pattern.
    pub fn letters(&self) -> BTreeSet<char> {
        let mut out = BTreeSet::new();
        self.collect_letters(&mut out);
        out
    }

    fn collect_letters(&self, out: &mut BTreeSet<char>) {
        match self {
            Pattern::Epsilon => {}
            Pattern::Sym(s) => {
                out.insert(s.as_char());
            }
            Pattern::Alt(l, r) | Pattern::Cat(l, r) => {
                l.collect_letters(out);
                r.collect_letters(out);
            }
            Pattern::Star(c) => c.collect_letters(out),
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        // Precedence levels: alternation 0, concatenation 1, star 2.
        let prec = match self {
            Pattern::Alt(..) => 0,
            Pattern::Cat(..) => 1,
            Pattern::Star(..) => 2,
            Pattern::Epsilon | Pattern::Sym(_) => 3,
        };
        let parens = prec < min_prec;
        if parens {
            write!(f, "(")?;
        }
        match self {
            Pattern::Epsilon => write!(f, "_")?,
            Pattern::Sym(s) => write!(f, "{s}")?,
            Pattern::Alt(l, r) => {
                // Right-associative: a left-nested alternation needs parens.
                l.fmt_prec(f, 1)?;
                write!(f, "+")?;
                r.fmt_prec(f, 0)?;
            }
            Pattern::Cat(l, r) => {
                l.fmt_prec(f, 2)?;
                r.fmt_prec(f, 1)?;
            }
            Pattern::Star(c) => {
                c.fmt_prec(f, 2)?;
                write!(f, "*")?;
            }
        }
        if parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

mod parse {
    use super::{Alphabet, Pattern, PatternError, Symbol};

    struct Parser<'a> {
        chars: Vec<(usize, char)>,
        pos: usize,
        alphabet: &'a Alphabet,
    }

    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Pattern, PatternError> {
        let mut p = Parser {
            chars: text.char_indices().collect(),
            pos: 0,
            alphabet,
        };
        p.skip_ws();
        let e = p.expr()?;
        p.skip_ws();
        if let Some(&(at, c)) = p.chars.get(p.pos) {
            return Err(PatternError::Syntax {
                pos: at,
                msg: format!("unexpected `{c}`"),
            });
        }
        Ok(e)
    }

    impl Parser<'_> {
        fn peek(&self) -> Option<char> {
            self.chars.get(self.pos).map(|&(_, c)| c)
        }

        fn offset(&self) -> usize {
            self.chars.get(self.pos).map(|&(at, _)| at).unwrap_or_else(|| {
                self.chars.last().map(|&(at, c)| at + c.len_utf8()).unwrap_or(0)
            })
        }

        fn bump(&mut self) {
            self.pos += 1;
        }

        fn skip_ws(&mut self) {
            while matches!(self.peek(), Some(c) if c.is_whitespace()) {
                self.bump();
            }
        }

        // expr := term ("+" expr)?
        fn expr(&mut self) -> Result<Pattern, PatternError> {
            let left = self.term()?;
            self.skip_ws();
            if self.peek() == Some('+') {
                self.bump();
                self.skip_ws();
                let right = self.expr()?;
                return Ok(Pattern::alt(left, right));
            }
            Ok(left)
        }

        // term := factor ("."? term)?
        fn term(&mut self) -> Result<Pattern, PatternError> {
            let left = self.factor()?;
            self.skip_ws();
            match self.peek() {
                Some('.') => {
                    self.bump();
                    self.skip_ws();
                    let right = self.term()?;
                    Ok(Pattern::cat(left, right))
                }
                Some(c) if c == '_' || c == '(' || c.is_ascii_alphanumeric() => {
                    let right = self.term()?;
                    Ok(Pattern::cat(left, right))
                }
                _ => Ok(left),
            }
        }

        // factor := base "*"*
        fn factor(&mut self) -> Result<Pattern, PatternError> {
            let mut p = self.base()?;
            loop {
                self.skip_ws();
                if self.peek() == Some('*') {
                    self.bump();
                    p = Pattern::star(p);
                } else {
                    return Ok(p);
                }
            }
        }

        // base := LETTER | "_" | "(" expr ")"
        fn base(&mut self) -> Result<Pattern, PatternError> {
            let at = self.offset();
            match self.peek() {
                Some('_') => {
                    self.bump();
                    Ok(Pattern::Epsilon)
                }
                Some('(') => {
                    self.bump();
                    self.skip_ws();
                    let e = self.expr()?;
                    self.skip_ws();
                    if self.peek() == Some(')') {
                        self.bump();
                        Ok(e)
                    } else {
                        Err(PatternError::Syntax {
                            pos: self.offset(),
                            msg: "expected `)`".to_string(),
                        })
                    }
                }
                Some(c) if c.is_ascii_alphanumeric() => {
                    if !self.alphabet.contains(c) {
                        return Err(PatternError::ForeignLetter(c));
                    }
                    self.bump();
                    Ok(Pattern::Sym(Symbol::new(c).expect("checked")))
                }
                Some(c) => Err(PatternError::Syntax {
                    pos: at,
                    msg: format!("unexpected `{c}`"),
                }),
                None => Err(PatternError::Syntax {
                    pos: at,
                    msg: "unexpected end of pattern".to_string(),
                }),
            }
        }
    }
}

/// Association of every bindable node with a matched subword, or with no
/// value when the node did not take part in the match.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AssociationMap {
    entries: std::collections::BTreeMap<NodeAddress, Option<Word>>,
}

impl AssociationMap {
    /// A map for a pattern whose only bindable node is the root.
    pub fn atomic(word: Word) -> AssociationMap {
        let mut entries = std::collections::BTreeMap::new();
        entries.insert(NodeAddress::root(), Some(word));
        AssociationMap { entries }
    }

    /// `V1 + P2`: the left branch matched, all right-branch nodes get no
    /// value, and the root takes the left root's value.
    pub fn alt_left(left: &AssociationMap, right_pattern: &Pattern) -> AssociationMap {
        let mut entries = std::collections::BTreeMap::new();
        entries.insert(NodeAddress::root(), left.root().cloned());
        for (addr, v) in &left.entries {
            entries.insert(addr.prefixed_by(&NodeAddress::root().child(1)), v.clone());
        }
        for addr in right_pattern.bindable_nodes() {
            entries.insert(addr.prefixed_by(&NodeAddress::root().child(2)), None);
        }
        AssociationMap { entries }
    }

    /// `P1 + V2`, symmetric to [`AssociationMap::alt_left`].
    pub fn alt_right(left_pattern: &Pattern, right: &AssociationMap) -> AssociationMap {
        let mut entries = std::collections::BTreeMap::new();
        entries.insert(NodeAddress::root(), right.root().cloned());
        for addr in left_pattern.bindable_nodes() {
            entries.insert(addr.prefixed_by(&NodeAddress::root().child(1)), None);
        }
        for (addr, v) in &right.entries {
            entries.insert(addr.prefixed_by(&NodeAddress::root().child(2)), v.clone());
        }
        AssociationMap { entries }
    }

    /// `V1 . V2`: the root concatenates the two roots when both have a
    /// value and has no value otherwise.
    pub fn cat_join(left: &AssociationMap, right: &AssociationMap) -> AssociationMap {
        let mut entries = std::collections::BTreeMap::new();
        let root = match (left.root(), right.root()) {
            (Some(a), Some(b)) => Some(a.concat(b)),
            _ => None,
        };
        entries.insert(NodeAddress::root(), root);
        for (addr, v) in &left.entries {
            entries.insert(addr.prefixed_by(&NodeAddress::root().child(1)), v.clone());
        }
        for (addr, v) in &right.entries {
            entries.insert(addr.prefixed_by(&NodeAddress::root().child(2)), v.clone());
        }
        AssociationMap { entries }
    }

    pub fn from_entries(
        entries: std::collections::BTreeMap<NodeAddress, Option<Word>>,
    ) -> AssociationMap {
        AssociationMap { entries }
    }

    /// The value of the root node; `None` only on malformed maps.
    pub fn root(&self) -> Option<&Word> {
        self.entries.get(&NodeAddress::root()).and_then(|v| v.as_ref())
    }

    pub fn get(&self, addr: &NodeAddress) -> Option<&Option<Word>> {
        self.entries.get(addr)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&NodeAddress, &Option<Word>)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One line per bindable node: `ADDRESS<TAB>VALUE`, addresses in
    /// lexicographic order with `root` first; the empty word prints as
    /// `<eps>` and a missing value as `<none>`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (addr, value) in &self.entries {
            out.push_str(&addr.to_string());
            out.push('\t');
            match value {
                None => out.push_str("<none>"),
                Some(w) if w.is_empty() => out.push_str("<eps>"),
                Some(w) => out.push_str(&w.to_string()),
            }
            out.push('\n');
        }
        out
    }

    /// JSON rendering: a list of `{node, value}` objects, with `null` for a
    /// missing value and `""` for the empty word.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.entries
                .iter()
                .map(|(addr, value)| {
                    serde_json::json!({
                        "node": addr.to_string(),
                        "value": value.as_ref().map(|w| w.to_string()),
                    })
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("letter `{0}` is not in the alphabet")]
    ForeignLetter(char),
    #[error("`{0}` is not a letter (letters are ASCII alphanumerics)")]
    BadLetter(char),
    #[error("the alphabet must not be empty")]
    EmptyAlphabet,
    #[error("`{0}` is not a node address (expected `root` or digits over 1,2)")]
    BadAddress(String),
    #[error("address `{0}` does not denote a node of the pattern")]
    AddressNotInPattern(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> Alphabet {
        Alphabet::new(['a', 'b']).unwrap()
    }

    fn parse(s: &str) -> Pattern {
        Pattern::parse(s, &ab()).unwrap()
    }

    fn addr(s: &str) -> NodeAddress {
        NodeAddress::parse(s).unwrap()
    }

    /// The running example `(a+a*)a*(a+_)`.
    fn fig_pattern() -> Pattern {
        Pattern::cat(
            Pattern::alt(Pattern::sym('a'), Pattern::star(Pattern::sym('a'))),
            Pattern::cat(
                Pattern::star(Pattern::sym('a')),
                Pattern::alt(Pattern::sym('a'), Pattern::Epsilon),
            ),
        )
    }

    #[test]
    fn parses_the_running_example() {
        assert_eq!(parse("(a+a*)a*(a+_)"), fig_pattern());
    }

    #[test]
    fn single_letter() {
        assert_eq!(parse("a"), Pattern::sym('a'));
    }

    #[test]
    fn alternation_groups_to_the_right() {
        assert_eq!(
            Pattern::parse("a+b+a", &ab()).unwrap(),
            Pattern::alt(
                Pattern::sym('a'),
                Pattern::alt(Pattern::sym('b'), Pattern::sym('a'))
            )
        );
    }

    #[test]
    fn concatenation_groups_to_the_right() {
        assert_eq!(
            parse("aba"),
            Pattern::cat(
                Pattern::sym('a'),
                Pattern::cat(Pattern::sym('b'), Pattern::sym('a'))
            )
        );
        assert_eq!(parse("a.b.a"), parse("aba"));
    }

    #[test]
    fn explicit_grouping_overrides_associativity() {
        let left_nested = Pattern::cat(
            Pattern::cat(Pattern::sym('a'), Pattern::sym('b')),
            Pattern::sym('a'),
        );
        assert_eq!(parse("(ab)a"), left_nested);
        assert_eq!(parse(&left_nested.to_string()), left_nested);
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match Pattern::parse("a+)", &ab()) {
            Err(PatternError::Syntax { pos, .. }) => assert_eq!(pos, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
        assert!(matches!(
            Pattern::parse("a+c", &ab()),
            Err(PatternError::ForeignLetter('c'))
        ));
        assert!(Pattern::parse("", &ab()).is_err());
        assert!(Pattern::parse("*a", &ab()).is_err());
    }

    #[test]
    fn bindable_nodes_of_the_running_example() {
        let expected: BTreeSet<NodeAddress> =
            ["root", "1", "11", "12", "2", "21", "22", "221", "222"]
                .iter()
                .map(|s| addr(s))
                .collect();
        assert_eq!(fig_pattern().bindable_nodes(), expected);
    }

    #[test]
    fn star_binds_only_its_root() {
        let p = Pattern::star(Pattern::sym('a'));
        let expected: BTreeSet<NodeAddress> = [NodeAddress::root()].into_iter().collect();
        assert_eq!(p.bindable_nodes(), expected);
    }

    #[test]
    fn alternation_binds_every_node() {
        let p = Pattern::alt(Pattern::sym('a'), Pattern::sym('b'));
        let expected: BTreeSet<NodeAddress> = ["root", "1", "2"].iter().map(|s| addr(s)).collect();
        assert_eq!(p.bindable_nodes(), expected);
    }

    #[test]
    fn subpattern_lookup() {
        let p = fig_pattern();
        assert_eq!(
            p.subpattern_at(&addr("21")).unwrap(),
            &Pattern::star(Pattern::sym('a'))
        );
        assert_eq!(p.subpattern_at(&NodeAddress::root()).unwrap(), &p);
        let alt = Pattern::alt(Pattern::sym('a'), Pattern::sym('b'));
        assert_eq!(alt.subpattern_at(&addr("2")).unwrap(), &Pattern::sym('b'));
        assert!(alt.subpattern_at(&addr("21")).is_err());
    }

    #[test]
    fn sizes() {
        assert_eq!(Pattern::sym('a').size(), 1);
        assert_eq!(Pattern::alt(Pattern::sym('a'), Pattern::sym('b')).size(), 3);
        // Counted off the printed tree: ·,+,a,*,a on the left spine and
        // ·,*,a,+,a,_ on the right.
        assert_eq!(fig_pattern().size(), 11);
    }

    #[test]
    fn address_domain_decomposes_by_children() {
        let p = fig_pattern();
        let dom = p.addresses();
        // dom(P) = {root} ∪ 1·dom(P1) ∪ 2·dom(P2) for binary nodes.
        if let Pattern::Cat(l, r) = &p {
            let mut rebuilt = BTreeSet::new();
            rebuilt.insert(NodeAddress::root());
            for a in l.addresses() {
                rebuilt.insert(a.prefixed_by(&NodeAddress::root().child(1)));
            }
            for a in r.addresses() {
                rebuilt.insert(a.prefixed_by(&NodeAddress::root().child(2)));
            }
            assert_eq!(dom, rebuilt);
        } else {
            panic!("expected concatenation");
        }
        // Bindable nodes are a subset of the domain, closed under ancestors.
        let bn = p.bindable_nodes();
        assert!(bn.is_subset(&dom));
        for a in &bn {
            for k in 0..a.digits().len() {
                let anc = NodeAddress(a.digits()[..k].to_vec());
                assert!(bn.contains(&anc), "ancestor {anc} of {a} not bindable");
            }
        }
    }

    #[test]
    fn addresses_sort_with_root_first() {
        let mut v = vec![addr("2"), addr("11"), NodeAddress::root(), addr("1")];
        v.sort();
        assert_eq!(
            v,
            vec![NodeAddress::root(), addr("1"), addr("11"), addr("2")]
        );
    }

    #[test]
    fn tsv_rendering_uses_reserved_tokens() {
        let alphabet = ab();
        let mut entries = std::collections::BTreeMap::new();
        entries.insert(NodeAddress::root(), Some(Word::parse("ab", &alphabet).unwrap()));
        entries.insert(addr("1"), Some(Word::empty()));
        entries.insert(addr("2"), None);
        let v = AssociationMap::from_entries(entries);
        assert_eq!(v.to_tsv(), "root\tab\n1\t<eps>\n2\t<none>\n");
        let json = v.to_json();
        assert_eq!(
            json,
            serde_json::json!([
                {"node": "root", "value": "ab"},
                {"node": "1", "value": ""},
                {"node": "2", "value": null},
            ])
        );
    }

    #[test]
    fn words_reject_foreign_letters() {
        assert!(Word::parse("ab", &ab()).is_ok());
        assert!(matches!(
            Word::parse("ac", &ab()),
            Err(PatternError::ForeignLetter('c'))
        ));
    }

    #[test]
    fn alphabet_rejects_reserved_characters() {
        assert!(Alphabet::new(['a', '#']).is_err());
        assert!(Alphabet::new(['_']).is_err());
        assert!(Alphabet::new([]).is_err());
    }
}
