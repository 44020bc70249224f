//! Command-line surface: match words, infer node types, compile
//! hyperautomata to JSON/DOT, and run the differential-testing harness.
//!
//! Exit codes: 0 match / success, 1 no-match (or mismatches found by
//! difftest), 2 usage or parse error, 3 resource limit exceeded.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hypermatch::automata::{thompson, AutomataError, Limits, Nfa};
use hypermatch::difftest::{self, DiffConfig};
use hypermatch::hyper::{compile, Hyperautomaton};
use hypermatch::infer::{infer, InferError};
use hypermatch::oracle::{self, MatchOutcome, OracleError};
use hypermatch::pattern::{Alphabet, AssociationMap, NodeAddress, Pattern, Word};
use hypermatch::runtime::Matcher;

#[derive(Parser)]
#[command(
    name = "hypermatch",
    about = "Regular expression matching with unique (longest/first match) semantics, \
             regular type inference, and unambiguous-automaton compilation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Engine {
    /// The compiled hyperautomaton (default).
    Automaton,
    /// The direct evaluator of the matching rules.
    Oracle,
    /// The first-match simulation of longest match (provably divergent).
    CkleenePrime,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Tsv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Match a word (or words from stdin) against a pattern.
    Match {
        #[arg(short, long)]
        pattern: String,
        /// The word to match; read one word per line from stdin if absent.
        #[arg(short, long)]
        word: Option<String>,
        /// Context pattern restricting considered inputs (all words if absent).
        #[arg(short, long)]
        context: Option<String>,
        #[arg(long, value_enum, default_value_t = Engine::Automaton)]
        engine: Engine,
        #[arg(long, value_enum, default_value_t = Format::Tsv)]
        format: Format,
        /// Alphabet letters; defaults to the letters of pattern and context.
        #[arg(long)]
        alphabet: Option<String>,
        #[arg(long, default_value_t = 100_000)]
        state_limit: usize,
    },
    /// Infer the type of a bindable node under a context.
    Infer {
        #[arg(short, long)]
        pattern: String,
        #[arg(short, long)]
        context: Option<String>,
        /// Node address (`root` or a string of 1s and 2s).
        #[arg(short, long, default_value = "root")]
        node: String,
        /// List accepted words up to this length instead of the automaton.
        #[arg(long)]
        enumerate: Option<usize>,
        /// Emit the break set of a concatenation node instead of its type.
        #[arg(long, default_value_t = false)]
        breaks: bool,
        #[arg(long)]
        alphabet: Option<String>,
        #[arg(long, default_value_t = 100_000)]
        state_limit: usize,
    },
    /// Compile a hyperautomaton and write it as JSON (and optionally DOT).
    Compile {
        #[arg(short, long)]
        pattern: String,
        #[arg(short, long)]
        context: Option<String>,
        /// Output path for the JSON artifact; stdout if absent.
        #[arg(long)]
        out: Option<std::path::PathBuf>,
        /// Also write a GraphViz rendering here.
        #[arg(long)]
        dot: Option<std::path::PathBuf>,
        #[arg(long)]
        alphabet: Option<String>,
        #[arg(long, default_value_t = 100_000)]
        state_limit: usize,
    },
    /// Compare the engines over an enumerated corpus.
    Difftest {
        #[arg(long, default_value_t = 5)]
        max_pattern_size: usize,
        #[arg(long, default_value_t = 4)]
        max_word_len: usize,
        /// Sample this many random patterns instead of exhausting the bound.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "ab")]
        alphabet: String,
        #[arg(long, default_value_t = 100_000)]
        state_limit: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

enum CliError {
    Usage(String),
    Limit(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Limit(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Limit(m) => write!(f, "{m}"),
        }
    }
}

impl From<InferError> for CliError {
    fn from(e: InferError) -> CliError {
        match e {
            InferError::Automata(AutomataError::StateLimit { .. }) => {
                CliError::Limit(e.to_string())
            }
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<AutomataError> for CliError {
    fn from(e: AutomataError) -> CliError {
        match e {
            AutomataError::StateLimit { .. } => CliError::Limit(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> CliError {
        CliError::Usage(e.to_string())
    }
}

fn build_alphabet(
    explicit: &Option<String>,
    pattern: &str,
    context: &Option<String>,
) -> Result<Alphabet, CliError> {
    match explicit {
        // An explicit alphabet replaces the default; letters of the
        // pattern or context outside it are reported as parse errors.
        Some(s) => {
            let letters: BTreeSet<char> = s.chars().collect();
            Alphabet::new(letters).map_err(|e| CliError::Usage(e.to_string()))
        }
        None => {
            let mut texts = vec![pattern];
            if let Some(c) = context {
                texts.push(c);
            }
            Ok(Alphabet::from_texts(texts))
        }
    }
}

fn parse_pattern(text: &str, alphabet: &Alphabet) -> Result<Pattern, CliError> {
    Pattern::parse(text, alphabet).map_err(|e| CliError::Usage(format!("pattern: {e}")))
}

fn context_nfa(context: &Option<String>, alphabet: &Alphabet) -> Result<(String, Nfa), CliError> {
    match context {
        None => Ok((
            "<all words>".to_string(),
            Nfa::universal(alphabet.clone(), false),
        )),
        Some(text) => {
            let p = Pattern::parse(text, alphabet)
                .map_err(|e| CliError::Usage(format!("context: {e}")))?;
            Ok((text.clone(), thompson(&p, alphabet)))
        }
    }
}

fn render(v: &AssociationMap, format: Format) -> String {
    match format {
        Format::Tsv => v.to_tsv(),
        Format::Json => format!("{}\n", v.to_json()),
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Match {
            pattern,
            word,
            context,
            engine,
            format,
            alphabet,
            state_limit,
        } => {
            let alphabet = build_alphabet(&alphabet, &pattern, &context)?;
            let p = parse_pattern(&pattern, &alphabet)?;
            let (ctext, cnfa) = context_nfa(&context, &alphabet)?;
            let limits = Limits::new(state_limit);
            if engine == Engine::CkleenePrime {
                oracle::fm_supported(&p)?;
            }

            let compiled: Option<Hyperautomaton> = match engine {
                Engine::Automaton => Some(compile(&p, &cnfa, &ctext, &limits)?),
                _ => None,
            };
            let matcher = compiled.as_ref().map(Matcher::new);
            let mut session = oracle::Session::new();
            // Words with letters outside the alphabet simply do not match.
            let mut run_word = |text: &str| -> Result<MatchOutcome, CliError> {
                let Ok(w) = Word::parse(text, &alphabet) else {
                    return Ok(MatchOutcome::NoMatch);
                };
                Ok(match engine {
                    Engine::Automaton => matcher.as_ref().expect("compiled").match_word(&w),
                    Engine::Oracle => {
                        if cnfa.accepts_word(&w) {
                            session.match_word(&p, &w)
                        } else {
                            MatchOutcome::NoMatch
                        }
                    }
                    Engine::CkleenePrime => {
                        if cnfa.accepts_word(&w) {
                            session.match_word_firstmatch(&p, &w)?
                        } else {
                            MatchOutcome::NoMatch
                        }
                    }
                })
            };

            let stdout = std::io::stdout();
            match word {
                Some(text) => match run_word(&text)? {
                    MatchOutcome::Match(v) => {
                        let mut out = stdout.lock();
                        let _ = out.write_all(render(&v, format).as_bytes());
                        Ok(ExitCode::SUCCESS)
                    }
                    MatchOutcome::NoMatch => {
                        eprintln!("no match");
                        Ok(ExitCode::from(1))
                    }
                },
                None => {
                    // Batch mode: one word per line; exit 0 only if every
                    // word matched.
                    let stdin = std::io::stdin();
                    let mut all_matched = true;
                    let mut out = stdout.lock();
                    for line in stdin.lock().lines() {
                        let line = line.map_err(|e| CliError::Usage(e.to_string()))?;
                        let text = line.trim();
                        match run_word(text)? {
                            MatchOutcome::Match(v) => {
                                let _ = writeln!(out, "{text}: match");
                                let _ = out.write_all(render(&v, format).as_bytes());
                            }
                            MatchOutcome::NoMatch => {
                                all_matched = false;
                                let _ = writeln!(out, "{text}: no match");
                            }
                        }
                    }
                    Ok(if all_matched {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    })
                }
            }
        }

        Command::Infer {
            pattern,
            context,
            node,
            enumerate,
            breaks,
            alphabet,
            state_limit,
        } => {
            let alphabet = build_alphabet(&alphabet, &pattern, &context)?;
            let p = parse_pattern(&pattern, &alphabet)?;
            let (_, cnfa) = context_nfa(&context, &alphabet)?;
            let limits = Limits::new(state_limit);
            let addr = NodeAddress::parse(&node).map_err(|e| CliError::Usage(e.to_string()))?;
            if !p.bindable_nodes().contains(&addr) {
                return Err(CliError::Usage(format!(
                    "node `{addr}` is not a bindable node of the pattern"
                )));
            }
            let inference = infer(&p, &cnfa, &limits)?;
            let automaton = if breaks {
                inference.breaks.get(&addr).ok_or_else(|| {
                    CliError::Usage(format!("node `{addr}` is not a concatenation"))
                })?
            } else {
                &inference.types[&addr]
            };
            match enumerate {
                Some(k) => {
                    for w in automaton.enumerate(k) {
                        if w.is_empty() {
                            println!("<eps>");
                        } else {
                            println!("{w}");
                        }
                    }
                }
                None => println!(
                    "{}",
                    serde_json::to_string_pretty(&automaton.to_json())
                        .expect("automaton serializes")
                ),
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Compile {
            pattern,
            context,
            out,
            dot,
            alphabet,
            state_limit,
        } => {
            let alphabet = build_alphabet(&alphabet, &pattern, &context)?;
            let p = parse_pattern(&pattern, &alphabet)?;
            let (ctext, cnfa) = context_nfa(&context, &alphabet)?;
            let limits = Limits::new(state_limit);
            let h = compile(&p, &cnfa, &ctext, &limits)?;
            let json = h.to_json_string();
            match out {
                Some(path) => std::fs::write(&path, json)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
                None => println!("{json}"),
            }
            if let Some(path) = dot {
                std::fs::write(&path, h.to_dot())
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Difftest {
            max_pattern_size,
            max_word_len,
            sample,
            seed,
            alphabet,
            state_limit,
        } => {
            let alphabet =
                Alphabet::new(alphabet.chars()).map_err(|e| CliError::Usage(e.to_string()))?;
            let config = DiffConfig {
                alphabet,
                max_pattern_size,
                max_word_len,
                contexts: difftest::default_contexts(),
                sample: sample.map(|count| (count, seed)),
                limits: Limits::new(state_limit),
            };
            let report = difftest::run(&config);
            print!("{}", report.render());
            Ok(if report.is_clean() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}
