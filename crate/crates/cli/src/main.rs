//! `subseg`: file-based front end for the segmentation pipeline.
//!
//! Each subcommand reads its inputs, runs one library operation and writes
//! its output atomically (or to stdout). Exit codes: 2 usage or argument
//! error, 3 invalid input, 4 numerical failure, 5 I/O failure.

mod io;

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use subseg::bigram::{self, BigramModel, DEFAULT_BEAM};
use subseg::cooccur::{count_cooccurrences, CooccurrenceCounts, DEFAULT_WINDOW};
use subseg::lexseg::{self, OovPolicy, DEFAULT_ALPHA, DEFAULT_MAX_ITERS};
use subseg::metrics::{boundary_prf, renyi_efficiency, token_frequencies, DEFAULT_RENYI_ALPHA};
use subseg::subspace::{
    build_segmentation_matrix, compute_subword_embeddings, Ridge, SubwordSource, DEFAULT_LAMBDA,
};
use subseg::textio::{
    bpe_segment, bpe_train_counts, build_vocabulary, MergeList, SegmentedLexicon, SegmentedText,
    Vocabulary, DEFAULT_SEPARATOR,
};
use subseg::{Embeddings, Error, ErrorKind, RefineOptions, Result};

use crate::io::{emit, read_corpus};

const FORMATS: &str = "\
File formats (UTF-8, LF line endings):
  corpus      line := token (' ' token)*
  vocabulary  line := token '\\t' frequency            (descending frequency, ties by token)
  counts      header '#COOC v1 |V|=<n> window=<w>', then line := id '\\t' id '\\t' count   (id1 <= id2)
  vectors     header '<rows> <dim>', then line := token (' ' value){dim}
  merges      line := left ' ' right                    (application order)
  lexicon     line := word '\\t' subword (' ' subword)*  (subwords concatenate to word)
  segmented   line := word (' ▁ ' word)*, word := subword (' ' subword)*
  model       'LEGROS-BIGRAM v1', '|S|=<n> total=<t> maxlen=<m>', '#UNIGRAMS',
              subword '\\t' count ..., '#BIGRAMS', prev '\\t' next '\\t' count ...   (prev may be '###')
A path of '-' or an omitted input path reads stdin; an omitted output path writes stdout.";

#[derive(Parser)]
#[command(name = "subseg", version, about = "Subword segmentation grounded in word embeddings", after_help = FORMATS)]
struct Cli {
    /// Worker threads; 0 uses one per core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count token types of a corpus into a vocabulary file.
    Vocab {
        /// Corpus file (`token token ...` per line).
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 200_000)]
        max_size: usize,
        #[arg(long, default_value_t = 1)]
        min_freq: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Count symmetric within-line co-occurrences of vocabulary words.
    Cooc {
        corpus: Option<PathBuf>,
        /// Vocabulary whose ids index the counts.
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Initialize a lexicon with byte-pair encoding over vocabulary words.
    InitBpe {
        /// Words to segment, with the frequencies merges are learned from.
        #[arg(long)]
        vocab: PathBuf,
        /// Target subword inventory size when learning merges.
        #[arg(long, required_unless_present = "merges")]
        size: Option<usize>,
        /// Apply an existing merge list instead of learning one.
        #[arg(long, conflicts_with = "size")]
        merges: Option<PathBuf>,
        /// Where to save learned merges.
        #[arg(long)]
        merges_out: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Place subwords in the embedding space: E_s = log(norm(AC)) W^-1.
    SubwordEmbed {
        #[command(flatten)]
        space: Space,
        /// Subwords and incidences from a segmented lexicon.
        #[arg(long, required_unless_present = "substrings")]
        lexicon: Option<PathBuf>,
        /// Use every substring of up to this many characters instead.
        #[arg(long, conflicts_with = "lexicon")]
        substrings: Option<usize>,
        #[command(flatten)]
        solve: Solve,
        #[command(flatten)]
        out: Output,
    },
    /// Alternate subword embedding and re-segmentation until stable.
    ///
    /// Prints `iteration<TAB>changed_words<TAB>|S|` per iteration on stderr.
    Refine {
        #[command(flatten)]
        space: Space,
        /// Initial segmented lexicon.
        #[arg(long)]
        lexicon: PathBuf,
        /// Input (word) vectors E.
        #[arg(long)]
        input_vectors: PathBuf,
        /// Per-subword penalty of the similarity score.
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
        max_iters: usize,
        #[command(flatten)]
        solve: Solve,
        /// Where to save the final subword vectors.
        #[arg(long)]
        subwords_out: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Segment words by similarity to subword vectors.
    ///
    /// Writes a lexicon for the selected words, or segmented text with
    /// `--text`.
    SegmentEmbed {
        /// Input (word) vectors E.
        #[arg(long)]
        input_vectors: PathBuf,
        /// Subword vectors E_s.
        #[arg(long)]
        subwords: PathBuf,
        /// Per-subword penalty of the similarity score.
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        /// Restrict the lexicon to the words of this vocabulary file.
        #[arg(long, conflicts_with = "text")]
        words: Option<PathBuf>,
        /// Segment this corpus ('-' for stdin) into segmented text.
        #[arg(long)]
        text: Option<PathBuf>,
        /// Handling of corpus words without a vector: error, whole or char.
        #[arg(long, default_value = "whole", requires = "text")]
        oov: OovPolicy,
        #[command(flatten)]
        sep: Separator,
        #[command(flatten)]
        out: Output,
    },
    /// Distill a segmentation into a smoothed subword bigram model.
    Distill {
        /// Segmented text to count.
        #[arg(long, required_unless_present = "lexicon")]
        segmented: Option<PathBuf>,
        /// Segmented lexicon to count, one occurrence per word unless
        /// weighted by `--vocab`.
        #[arg(long, conflicts_with = "segmented")]
        lexicon: Option<PathBuf>,
        /// Word frequencies used as lexicon weights.
        #[arg(long, requires = "lexicon")]
        vocab: Option<PathBuf>,
        #[command(flatten)]
        sep: Separator,
        #[command(flatten)]
        out: Output,
    },
    /// Segment a corpus with a bigram model.
    Segment {
        corpus: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        /// Hypotheses kept per end position.
        #[arg(long, default_value_t = DEFAULT_BEAM, conflicts_with = "exact")]
        beam: usize,
        /// Exact dynamic program instead of beam search.
        #[arg(long)]
        exact: bool,
        #[command(flatten)]
        sep: Separator,
        #[command(flatten)]
        out: Output,
    },
    /// Morpheme-boundary precision, recall and F1 of two lexicons.
    EvalBoundaries {
        /// Reference lexicon.
        #[arg(long)]
        gold: PathBuf,
        /// Predicted lexicon over the same words.
        #[arg(long)]
        pred: PathBuf,
    },
    /// Rényi efficiency of the token distribution of segmented text.
    EvalRenyi {
        /// Segmented text.
        tokens: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_RENYI_ALPHA)]
        alpha: f64,
        /// Size of the subword vocabulary the text was produced with.
        #[arg(long)]
        vocab_size: usize,
        /// Count word-separator tokens as part of the distribution.
        #[arg(long)]
        include_separator: bool,
        #[command(flatten)]
        sep: Separator,
    },
}

#[derive(Args)]
struct Output {
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct Separator {
    /// Word-separator token in segmented text.
    #[arg(long, default_value = DEFAULT_SEPARATOR)]
    separator: String,
}

/// The word space: vocabulary, co-occurrence counts and output vectors.
#[derive(Args)]
struct Space {
    /// Vocabulary whose ids index the counts.
    #[arg(long)]
    vocab: PathBuf,
    /// Co-occurrence counts.
    #[arg(long)]
    counts: PathBuf,
    /// Output vectors W, one row per word.
    #[arg(long)]
    output_vectors: PathBuf,
}

#[derive(Args)]
struct Solve {
    /// Additive smoothing of the co-occurrence rows.
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    /// Ridge for the right inverse: `auto` or a nonnegative number.
    #[arg(long, default_value = "auto")]
    ridge: Ridge<f64>,
}

struct LoadedSpace {
    vocab: Vocabulary,
    counts: CooccurrenceCounts,
    output: Embeddings,
}

impl Space {
    fn load(&self) -> Result<LoadedSpace> {
        let vocab = Vocabulary::load(&self.vocab)?;
        let counts = CooccurrenceCounts::load(&self.counts)?;
        if counts.vocab_size() != vocab.len() {
            return Err(Error::Validation(format!(
                "{} covers {} words but {} has {}",
                self.counts.display(),
                counts.vocab_size(),
                self.vocab.display(),
                vocab.len()
            )));
        }
        let output = Embeddings::load(&self.output_vectors)?.aligned_to(vocab.tokens())?;
        Ok(LoadedSpace {
            vocab,
            counts,
            output,
        })
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Vocab {
            corpus,
            max_size,
            min_freq,
            out,
        } => {
            let corpus = read_corpus(corpus.as_deref())?;
            let vocab = build_vocabulary(&corpus, max_size, min_freq)?;
            emit(out.output.as_deref(), |w| vocab.write_to(w))
        }
        Command::Cooc {
            corpus,
            vocab,
            window,
            out,
        } => {
            let vocab = Vocabulary::load(&vocab)?;
            let corpus = read_corpus(corpus.as_deref())?;
            let counts = count_cooccurrences(&corpus, &vocab, window)?;
            emit(out.output.as_deref(), |w| counts.write_to(w))
        }
        Command::InitBpe {
            vocab,
            size,
            merges,
            merges_out,
            out,
        } => {
            let vocab = Vocabulary::load(&vocab)?;
            let merges = match (merges, size) {
                (Some(path), _) => MergeList::load(&path)?,
                (None, Some(size)) => {
                    let counts: HashMap<String, u64> =
                        vocab.iter().map(|(_, t, f)| (t.to_string(), f)).collect();
                    bpe_train_counts(&counts, size)?
                }
                (None, None) => unreachable!("clap requires --size or --merges"),
            };
            if let Some(path) = merges_out {
                merges.save(&path)?;
            }
            let lexicon: SegmentedLexicon = vocab
                .tokens()
                .iter()
                .map(|t| (t.clone(), bpe_segment(t, &merges)))
                .collect();
            emit(out.output.as_deref(), |w| lexicon.write_to(w))
        }
        Command::SubwordEmbed {
            space,
            lexicon,
            substrings,
            solve,
            out,
        } => {
            let space = space.load()?;
            let lexicon = lexicon.map(|p| SegmentedLexicon::load(&p)).transpose()?;
            let source = match (&lexicon, substrings) {
                (Some(lex), _) => SubwordSource::Lexicon(lex),
                (None, Some(max_len)) => SubwordSource::Substrings { max_len },
                (None, None) => unreachable!("clap requires --lexicon or --substrings"),
            };
            let matrix = build_segmentation_matrix(source, space.vocab.tokens())?;
            let es = compute_subword_embeddings(
                &matrix,
                &space.counts,
                &space.output,
                solve.lambda,
                solve.ridge,
            )?;
            emit(out.output.as_deref(), |w| es.write_text(w))
        }
        Command::Refine {
            space,
            lexicon,
            input_vectors,
            alpha,
            max_iters,
            solve,
            subwords_out,
            out,
        } => {
            let space = space.load()?;
            let lexicon = SegmentedLexicon::load(&lexicon)?;
            let words = Embeddings::load(&input_vectors)?.aligned_to(space.vocab.tokens())?;
            let config = RefineOptions {
                alpha,
                lambda: solve.lambda,
                ridge: solve.ridge,
                max_iters,
            };
            let state = lexseg::refine_observed(
                &lexicon,
                &words,
                &space.counts,
                &space.output,
                &config,
                |s| {
                    eprintln!("{}\t{}\t{}", s.iteration, s.changed_words, s.subword_count);
                },
            )?;
            if let Some(path) = subwords_out {
                state.subword_embeddings.save(&path)?;
            }
            emit(out.output.as_deref(), |w| state.lexicon.write_to(w))
        }
        Command::SegmentEmbed {
            input_vectors,
            subwords,
            alpha,
            words,
            text,
            oov,
            sep,
            out,
        } => {
            let vectors = Embeddings::load(&input_vectors)?;
            let subwords = Embeddings::load(&subwords)?;
            match text {
                Some(path) => {
                    let corpus = read_corpus(Some(&path))?;
                    let lexicon =
                        lexseg::embedding_lexicon(corpus.tokens(), &vectors, &subwords, alpha)?;
                    let segmented = lexseg::segment_corpus(&corpus, &lexicon, oov)?;
                    emit(out.output.as_deref(), |w| {
                        segmented.write_to(w, &sep.separator)
                    })
                }
                None => {
                    let lexicon = match words {
                        Some(path) => {
                            let vocab = Vocabulary::load(&path)?;
                            if let Some(t) = vocab.tokens().iter().find(|t| !vectors.contains(t)) {
                                return Err(Error::Validation(format!(
                                    "word {:?} of {} has no vector in {}",
                                    t.as_str(),
                                    path.display(),
                                    input_vectors.display()
                                )));
                            }
                            lexseg::embedding_lexicon(
                                vocab.tokens().iter().map(|t| t.as_str()),
                                &vectors,
                                &subwords,
                                alpha,
                            )?
                        }
                        None => lexseg::embedding_lexicon(
                            vectors.tokens().iter().map(|t| t.as_str()),
                            &vectors,
                            &subwords,
                            alpha,
                        )?,
                    };
                    emit(out.output.as_deref(), |w| lexicon.write_to(w))
                }
            }
        }
        Command::Distill {
            segmented,
            lexicon,
            vocab,
            sep,
            out,
        } => {
            let model = match (segmented, lexicon) {
                (Some(path), _) => {
                    let text = match path.as_os_str() == "-" {
                        true => SegmentedText::read_from(
                            std::io::stdin().lock(),
                            "<stdin>",
                            &sep.separator,
                        )?,
                        false => SegmentedText::load(&path, &sep.separator)?,
                    };
                    bigram::distill_text(&text)?
                }
                (None, Some(path)) => {
                    let lexicon = SegmentedLexicon::load(&path)?;
                    let vocab = vocab.map(|p| Vocabulary::load(&p)).transpose()?;
                    let weight = |word: &str| match &vocab {
                        None => 1,
                        Some(v) => v.id(word).map_or(0, |id| v.freq(id)),
                    };
                    bigram::distill_weighted(
                        lexicon.iter().map(|(w, seg)| (seg.as_slice(), weight(w))),
                    )?
                }
                (None, None) => unreachable!("clap requires --segmented or --lexicon"),
            };
            emit(out.output.as_deref(), |w| model.write_to(w))
        }
        Command::Segment {
            corpus,
            model,
            beam,
            exact,
            sep,
            out,
        } => {
            let model = BigramModel::load(&model)?;
            let corpus = read_corpus(corpus.as_deref())?;
            let segmented = bigram::segment_text(&corpus, &model, (!exact).then_some(beam))?;
            emit(out.output.as_deref(), |w| {
                segmented.write_to(w, &sep.separator)
            })
        }
        Command::EvalBoundaries { gold, pred } => {
            let gold = SegmentedLexicon::load(&gold)?;
            let pred = SegmentedLexicon::load(&pred)?;
            let report = boundary_prf(&pred, &gold)?;
            emit(None, |w| {
                writeln!(w, "{report}")?;
                writeln!(w, "{}", report.machine_line())
            })
        }
        Command::EvalRenyi {
            tokens,
            alpha,
            vocab_size,
            include_separator,
            sep,
        } => {
            let text = match tokens.as_deref() {
                Some(p) if p.as_os_str() != "-" => SegmentedText::load(p, &sep.separator)?,
                _ => SegmentedText::read_from(std::io::stdin().lock(), "<stdin>", &sep.separator)?,
            };
            let freqs = token_frequencies(text.tokens(&sep.separator, include_separator));
            let report = renyi_efficiency(freqs.into_values(), vocab_size, alpha)?;
            emit(None, |w| {
                writeln!(w, "{report}")?;
                writeln!(w, "{}", report.machine_line())
            })
        }
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Argument => 2,
        ErrorKind::Validation => 3,
        ErrorKind::Numerical => 4,
        ErrorKind::Io => 5,
    }
}

fn main() -> ExitCode {
    // every subcommand's help carries the format grammars too
    let matches = Cli::command()
        .mut_subcommands(|c| c.after_help(FORMATS))
        .get_matches();
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
    {
        eprintln!("error: cannot start worker threads: {e}");
        return ExitCode::from(5);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
