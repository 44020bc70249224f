//! Differential-testing harness: enumerate (or sample) patterns, compile
//! each against a set of contexts, and compare the automaton engine with
//! the direct evaluator word by word — plus unambiguity counting, type
//! inference against brute force, and the structural laws.
//!
//! Disagreements between the automaton engine and the evaluator are
//! failures.  Disagreements between the evaluator and the first-match
//! simulation are the expected result that motivates this whole exercise;
//! they are collected and reported, never failed.

use std::collections::BTreeSet;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::automata::{
    concat, equivalent, intersect, left_quotient, right_quotient, thompson, Limits, MarkedWord,
    Nfa,
};
use crate::hyper::{compile, count_accepting_runs};
use crate::infer;
use crate::oracle::{self, MatchOutcome};
use crate::pattern::{Alphabet, AssociationMap, NodeAddress, Pattern, Word};
use crate::runtime::{Bound, Matcher};

/// A context language for the corpus.
#[derive(Debug, Clone)]
pub enum ContextSpec {
    /// All words over the alphabet.
    AllWords,
    /// The language of a pattern, given in concrete syntax.
    Pattern(String),
}

impl ContextSpec {
    pub fn label(&self) -> String {
        match self {
            ContextSpec::AllWords => "<all words>".to_string(),
            ContextSpec::Pattern(s) => s.clone(),
        }
    }

    pub fn to_nfa(&self, alphabet: &Alphabet) -> Result<Nfa, crate::pattern::PatternError> {
        Ok(match self {
            ContextSpec::AllWords => Nfa::universal(alphabet.clone(), false),
            ContextSpec::Pattern(s) => thompson(&Pattern::parse(s, alphabet)?, alphabet),
        })
    }
}

#[derive(Debug, Clone)]
pub struct DiffConfig {
    pub alphabet: Alphabet,
    pub max_pattern_size: usize,
    pub max_word_len: usize,
    pub contexts: Vec<ContextSpec>,
    /// When set, draw this many random patterns (with the given seed)
    /// instead of exhausting the whole size bound.
    pub sample: Option<(usize, u64)>,
    pub limits: Limits,
}

impl DiffConfig {
    pub fn with_defaults(alphabet: Alphabet) -> DiffConfig {
        DiffConfig {
            alphabet,
            max_pattern_size: 5,
            max_word_len: 4,
            contexts: default_contexts(),
            sample: None,
            limits: Limits::default(),
        }
    }
}

pub fn default_contexts() -> Vec<ContextSpec> {
    vec![
        ContextSpec::AllWords,
        ContextSpec::Pattern("a*b*".to_string()),
        ContextSpec::Pattern("(ab)*".to_string()),
        ContextSpec::Pattern("ab".to_string()),
    ]
}

/// One disagreement between two engines on one case.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseDiff {
    pub pattern: String,
    pub context: String,
    pub word: String,
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, Default)]
pub struct DiffReport {
    pub patterns: usize,
    pub cases_run: u64,
    /// Automaton engine vs the evaluator: must be empty.
    pub engine_mismatches: Vec<CaseDiff>,
    /// Evaluator vs the first-match simulation: expected, informational.
    pub fm_divergences: Vec<CaseDiff>,
    pub fm_divergence_count: u64,
    pub fm_unsupported_patterns: usize,
    pub unambiguity_violations: Vec<String>,
    pub inference_mismatches: Vec<String>,
    pub structure_violations: Vec<String>,
    pub errors: Vec<String>,
}

impl DiffReport {
    pub fn is_clean(&self) -> bool {
        self.engine_mismatches.is_empty()
            && self.unambiguity_violations.is_empty()
            && self.inference_mismatches.is_empty()
            && self.structure_violations.is_empty()
            && self.errors.is_empty()
    }

    fn absorb(&mut self, other: DiffReport) {
        self.patterns += other.patterns;
        self.cases_run += other.cases_run;
        self.engine_mismatches.extend(other.engine_mismatches);
        self.fm_divergence_count += other.fm_divergence_count;
        let room = 200usize.saturating_sub(self.fm_divergences.len());
        self.fm_divergences
            .extend(other.fm_divergences.into_iter().take(room));
        self.fm_unsupported_patterns += other.fm_unsupported_patterns;
        self.unambiguity_violations.extend(other.unambiguity_violations);
        self.inference_mismatches.extend(other.inference_mismatches);
        self.structure_violations.extend(other.structure_violations);
        self.errors.extend(other.errors);
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "patterns: {}\ncases: {}\n",
            self.patterns, self.cases_run
        ));
        s.push_str(&format!(
            "automaton-vs-evaluator mismatches: {}\n",
            self.engine_mismatches.len()
        ));
        for m in self.engine_mismatches.iter().take(50) {
            s.push_str(&format!(
                "  MISMATCH p={} c={} w={:?}: automaton [{}] evaluator [{}]\n",
                m.pattern, m.context, m.word, m.left, m.right
            ));
        }
        s.push_str(&format!(
            "evaluator-vs-first-match divergences: {} (expected; first {} shown)\n",
            self.fm_divergence_count,
            self.fm_divergences.len().min(20)
        ));
        for d in self.fm_divergences.iter().take(20) {
            s.push_str(&format!(
                "  diverges p={} c={} w={:?}: evaluator [{}] first-match [{}]\n",
                d.pattern, d.context, d.word, d.left, d.right
            ));
        }
        s.push_str(&format!(
            "first-match unsupported patterns: {}\n",
            self.fm_unsupported_patterns
        ));
        s.push_str(&format!(
            "unambiguity violations: {}\n",
            self.unambiguity_violations.len()
        ));
        for v in self.unambiguity_violations.iter().take(20) {
            s.push_str(&format!("  {v}\n"));
        }
        s.push_str(&format!(
            "inference mismatches: {}\n",
            self.inference_mismatches.len()
        ));
        for v in self.inference_mismatches.iter().take(20) {
            s.push_str(&format!("  {v}\n"));
        }
        s.push_str(&format!(
            "structural violations: {}\n",
            self.structure_violations.len()
        ));
        for v in self.structure_violations.iter().take(20) {
            s.push_str(&format!("  {v}\n"));
        }
        s.push_str(&format!("errors: {}\n", self.errors.len()));
        for v in self.errors.iter().take(20) {
            s.push_str(&format!("  {v}\n"));
        }
        s
    }
}

/// All patterns with at most `max_size` nodes, by size then constructor
/// order.
pub fn enumerate_patterns(alphabet: &Alphabet, max_size: usize) -> Vec<Pattern> {
    let mut by_size: Vec<Vec<Pattern>> = vec![Vec::new(); max_size + 1];
    if max_size >= 1 {
        by_size[1].push(Pattern::Epsilon);
        for s in alphabet.symbols() {
            by_size[1].push(Pattern::Sym(s));
        }
    }
    for size in 2..=max_size {
        let mut bucket = Vec::new();
        for left_size in 1..size - 1 {
            let right_size = size - 1 - left_size;
            for l in &by_size[left_size] {
                for r in &by_size[right_size] {
                    bucket.push(Pattern::alt(l.clone(), r.clone()));
                    bucket.push(Pattern::cat(l.clone(), r.clone()));
                }
            }
        }
        for c in &by_size[size - 1] {
            bucket.push(Pattern::star(c.clone()));
        }
        bucket.sort();
        by_size[size] = bucket;
    }
    by_size.into_iter().flatten().collect()
}

/// A reproducible random sample of distinct patterns within the size
/// bound.
pub fn sample_patterns(
    alphabet: &Alphabet,
    max_size: usize,
    count: usize,
    seed: u64,
) -> Vec<Pattern> {
    fn gen(rng: &mut StdRng, alphabet: &Alphabet, budget: usize) -> Pattern {
        let letters: Vec<char> = alphabet.symbols().map(|s| s.as_char()).collect();
        if budget <= 1 {
            return if rng.random_range(0..4) == 0 {
                Pattern::Epsilon
            } else {
                Pattern::sym(letters[rng.random_range(0..letters.len())])
            };
        }
        match rng.random_range(0..4) {
            0 => {
                let inner = gen(rng, alphabet, budget - 1);
                Pattern::star(inner)
            }
            1 => gen(rng, alphabet, 1),
            k => {
                let left_budget = rng.random_range(1..budget.max(2) - 1 + 1).min(budget - 2).max(1);
                let right_budget = budget - 1 - left_budget;
                let l = gen(rng, alphabet, left_budget);
                let r = gen(rng, alphabet, right_budget.max(1));
                if k == 2 {
                    Pattern::alt(l, r)
                } else {
                    Pattern::cat(l, r)
                }
            }
        }
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut attempts = 0usize;
    while out.len() < count && attempts < count * 50 {
        attempts += 1;
        let p = gen(&mut rng, alphabet, max_size);
        if p.size() <= max_size && seen.insert(p.clone()) {
            out.push(p);
        }
    }
    out
}

fn all_words(alphabet: &Alphabet, max_len: usize) -> Vec<Word> {
    let mut out = vec![Word::empty()];
    let mut layer = vec![Word::empty()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &layer {
            for s in alphabet.symbols() {
                let mut v: Vec<_> = w.symbols().to_vec();
                v.push(s);
                next.push(Word::new(v));
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

fn show(outcome: &MatchOutcome) -> String {
    match outcome {
        MatchOutcome::NoMatch => "no-match".to_string(),
        MatchOutcome::Match(v) => v
            .entries()
            .map(|(addr, value)| {
                let val = match value {
                    None => "<none>".to_string(),
                    Some(w) if w.is_empty() => "<eps>".to_string(),
                    Some(w) => w.to_string(),
                };
                format!("{addr}={val}")
            })
            .collect::<Vec<_>>()
            .join(" "),
    }
}

/// Patterns exercised in every run regardless of the enumeration bound:
/// the divergence witness and the deep running example.
pub fn landmark_patterns(alphabet: &Alphabet) -> Vec<Pattern> {
    ["(a+ab)*(b+_)", "(a+a*)a*(a+_)"]
        .iter()
        .filter_map(|s| Pattern::parse(s, alphabet).ok())
        .collect()
}

pub fn run(config: &DiffConfig) -> DiffReport {
    let mut patterns = match config.sample {
        Some((count, seed)) => {
            sample_patterns(&config.alphabet, config.max_pattern_size, count, seed)
        }
        None => enumerate_patterns(&config.alphabet, config.max_pattern_size),
    };
    for landmark in landmark_patterns(&config.alphabet) {
        if !patterns.contains(&landmark) {
            patterns.push(landmark);
        }
    }
    let words = all_words(&config.alphabet, config.max_word_len);
    let contexts: Vec<(String, Nfa)> = config
        .contexts
        .iter()
        .filter_map(|c| {
            c.to_nfa(&config.alphabet)
                .ok()
                .map(|nfa| (c.label(), nfa))
        })
        .collect();

    let partials: Vec<DiffReport> = patterns
        .par_iter()
        .map(|p| run_one_pattern(p, &contexts, &words, config))
        .collect();
    let mut report = DiffReport::default();
    for partial in partials {
        report.absorb(partial);
    }
    report
}

fn run_one_pattern(
    p: &Pattern,
    contexts: &[(String, Nfa)],
    words: &[Word],
    config: &DiffConfig,
) -> DiffReport {
    let mut r = DiffReport {
        patterns: 1,
        ..DiffReport::default()
    };
    let ptext = p.to_string();
    let fm_ok = oracle::fm_supported(p).is_ok();
    if !fm_ok {
        r.fm_unsupported_patterns = 1;
    }
    let mut session = oracle::Session::new();

    for (ctext, cnfa) in contexts {
        let h = match compile(p, cnfa, ctext, &config.limits) {
            Ok(h) => h,
            Err(e) => {
                r.errors.push(format!("compile p={ptext} c={ctext}: {e}"));
                continue;
            }
        };
        let matcher = Matcher::new(&h);
        let mut oracle_results: Vec<(Word, Option<AssociationMap>)> = Vec::new();

        for w in words {
            r.cases_run += 1;
            let engine_run = matcher.match_with_bounds(w);
            let engine = match &engine_run {
                Some((v, _)) => MatchOutcome::Match(v.clone()),
                None => MatchOutcome::NoMatch,
            };
            let truth = if cnfa.accepts_word(w) {
                let out = session.match_word(p, w);
                oracle_results.push((w.clone(), out.as_match().cloned()));
                out
            } else {
                MatchOutcome::NoMatch
            };
            if engine != truth {
                r.engine_mismatches.push(CaseDiff {
                    pattern: ptext.clone(),
                    context: ctext.clone(),
                    word: w.to_string(),
                    left: show(&engine),
                    right: show(&truth),
                });
            }

            let runs = count_accepting_runs(&h, w);
            if runs > 1 {
                r.unambiguity_violations
                    .push(format!("p={ptext} c={ctext} w={w:?}: {runs} accepting runs"));
            }

            if let Some((_, bounds)) = &engine_run {
                check_boundary_adjacency(p, &ptext, ctext, w, bounds, &mut r);
            }

            if fm_ok {
                let fm = session
                    .match_word_firstmatch(p, w)
                    .expect("support checked");
                let fm_in_context = if cnfa.accepts_word(w) {
                    fm
                } else {
                    MatchOutcome::NoMatch
                };
                if fm_in_context != truth {
                    r.fm_divergence_count += 1;
                    if r.fm_divergences.len() < 200 {
                        r.fm_divergences.push(CaseDiff {
                            pattern: ptext.clone(),
                            context: ctext.clone(),
                            word: w.to_string(),
                            left: show(&truth),
                            right: show(&fm_in_context),
                        });
                    }
                }
            }
        }

        check_inference(p, &ptext, ctext, cnfa, &oracle_results, config, &mut r);
    }
    r
}

/// At every bindable concatenation node whose children both have bounds,
/// the left child's right end must equal the right child's left end.
fn check_boundary_adjacency(
    p: &Pattern,
    ptext: &str,
    ctext: &str,
    w: &Word,
    bounds: &std::collections::BTreeMap<NodeAddress, Bound>,
    r: &mut DiffReport,
) {
    for n in p.bindable_nodes() {
        if !matches!(p.subpattern_at(&n), Ok(Pattern::Cat(..))) {
            continue;
        }
        let left = bounds.get(&n.child(1));
        let right = bounds.get(&n.child(2));
        if let (Some(Bound::Span { end: j1, .. }), Some(Bound::Span { start: i2, .. })) =
            (left, right)
        {
            if j1 != i2 {
                r.structure_violations.push(format!(
                    "boundary p={ptext} c={ctext} w={w:?} node {n}: left ends {j1}, right starts {i2}"
                ));
            }
        }
    }
}

/// Type and break inference versus brute force over the truncated
/// context, plus the root law and the Kleene-triple quotient identities.
fn check_inference(
    p: &Pattern,
    ptext: &str,
    ctext: &str,
    cnfa: &Nfa,
    oracle_results: &[(Word, Option<AssociationMap>)],
    config: &DiffConfig,
    r: &mut DiffReport,
) {
    let alphabet = config.alphabet.clone();
    let capped = Nfa::words_up_to(alphabet.clone(), false, config.max_word_len);
    let truncated = match intersect(cnfa, &capped, &config.limits) {
        Ok(i) => i.nfa.trimmed(),
        Err(e) => {
            r.errors.push(format!("context cap p={ptext} c={ctext}: {e}"));
            return;
        }
    };
    let inference = match infer::infer(p, &truncated, &config.limits) {
        Ok(i) => i,
        Err(e) => {
            r.errors.push(format!("infer p={ptext} c={ctext}: {e}"));
            return;
        }
    };

    for n in p.bindable_nodes() {
        let mut brute: BTreeSet<Word> = BTreeSet::new();
        let mut brute_breaks: BTreeSet<MarkedWord> = BTreeSet::new();
        for (_, v) in oracle_results {
            if let Some(v) = v {
                if let Some(Some(word)) = v.get(&n) {
                    brute.insert(word.clone());
                }
                if matches!(p.subpattern_at(&n), Ok(Pattern::Cat(..))) {
                    if let (Some(Some(l)), Some(Some(rt))) =
                        (v.get(&n.child(1)), v.get(&n.child(2)))
                    {
                        brute_breaks.insert(MarkedWord::with_break(l, rt));
                    }
                }
            }
        }
        let inferred: BTreeSet<Word> = inference.types[&n]
            .enumerate(config.max_word_len)
            .iter()
            .map(|m| m.project())
            .collect();
        if inferred != brute {
            r.inference_mismatches.push(format!(
                "type p={ptext} c={ctext} node {n}: inferred {:?} brute {:?}",
                inferred.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
                brute.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
            ));
        }
        if matches!(p.subpattern_at(&n), Ok(Pattern::Cat(..))) {
            let inferred_breaks: BTreeSet<MarkedWord> = inference.breaks[&n]
                .enumerate(config.max_word_len + 1)
                .into_iter()
                .collect();
            if inferred_breaks != brute_breaks {
                r.inference_mismatches.push(format!(
                    "break p={ptext} c={ctext} node {n}: inferred {:?} brute {:?}",
                    inferred_breaks
                        .iter()
                        .map(|w| w.to_string())
                        .collect::<Vec<_>>(),
                    brute_breaks
                        .iter()
                        .map(|w| w.to_string())
                        .collect::<Vec<_>>(),
                ));
            }
        }
    }

    // Root law: the root's type is the pattern's language cut to the
    // context, as an exact automata equivalence.
    let root_lang = match intersect(&thompson(p, &alphabet), &truncated, &config.limits) {
        Ok(i) => i.nfa,
        Err(e) => {
            r.errors.push(format!("root law p={ptext} c={ctext}: {e}"));
            return;
        }
    };
    match equivalent(
        &inference.types[&NodeAddress::root()],
        &root_lang,
        &config.limits,
    ) {
        Ok(true) => {}
        Ok(false) => r.structure_violations.push(format!(
            "root law p={ptext} c={ctext}: root type differs from language ∩ context"
        )),
        Err(e) => r.errors.push(format!("root law p={ptext} c={ctext}: {e}")),
    }

    // Quotient identities of every computed Kleene triple.
    let mark = Nfa::mark_lang(alphabet);
    for (idx, kt) in inference.kleene_triples.iter().enumerate() {
        let t1_again = concat(&mark, &kt.tail_lang.lift_marked())
            .map_err(infer::InferError::from)
            .and_then(|k| {
                right_quotient(&kt.break_set, &k.nfa, &config.limits).map_err(Into::into)
            })
            .map(|n| n.strip_marks());
        let c2_again = concat(&kt.star_lang.lift_marked(), &mark)
            .map_err(infer::InferError::from)
            .and_then(|k| {
                left_quotient(&k.nfa, &kt.break_set, &config.limits).map_err(Into::into)
            })
            .map(|n| n.strip_marks());
        match (t1_again, c2_again) {
            (Ok(t1), Ok(c2)) => {
                let t1_ok = equivalent(&t1, &kt.star_type, &config.limits).unwrap_or(false);
                let c2_ok = equivalent(&c2, &kt.tail_context, &config.limits).unwrap_or(false);
                if !t1_ok || !c2_ok {
                    r.structure_violations.push(format!(
                        "kleene triple {idx} p={ptext} c={ctext}: quotient identities fail"
                    ));
                }
            }
            _ => r.errors.push(format!(
                "kleene triple {idx} p={ptext} c={ctext}: recomputation failed"
            )),
        }
    }
}
