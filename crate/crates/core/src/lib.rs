//! A regular-expression pattern-matching engine with deterministic
//! disambiguation (first match for alternation, longest match for
//! iteration), exact regular type inference for every bindable
//! subexpression under a regular context, and compilation to an
//! unambiguous automaton that matches and extracts captures in time
//! linear in the input word.

pub mod automata;
pub mod difftest;
pub mod hyper;
pub mod infer;
pub mod oracle;
pub mod runtime;
pub mod pattern;
