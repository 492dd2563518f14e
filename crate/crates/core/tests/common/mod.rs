//! Synthetic agglutinative corpus and the full training pipeline over it.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use subseg::bigram::{self, BigramModel};
use subseg::cooccur::{count_cooccurrences, CooccurrenceCounts, DEFAULT_WINDOW};
use subseg::lexseg::{self, OovPolicy, RefineConfig, RefinementState};
use subseg::subspace::{compute_subword_embeddings, EmbeddingTable, Ridge, SegmentationMatrix};
use subseg::textio::{
    bpe_segment, bpe_train_counts, build_vocabulary, Corpus, MergeList, SegmentedLexicon,
    SegmentedText, Vocabulary,
};
use subseg::{Embeddings, Token};

pub const STEMS: usize = 20;
pub const SUFFIXES: usize = 8;
const TOPICS: usize = 5;
const TOPIC_WORDS: usize = 6;
const MARKER_WORDS: usize = 4;
const SENTENCES: usize = 3000;
pub const DIM: usize = 48;

pub fn tok(s: &str) -> Token {
    Token::new(s).unwrap()
}

fn syllable(rng: &mut ChaCha8Rng) -> String {
    const C: &[u8] = b"bdgklmnprst";
    const V: &[u8] = b"aeiou";
    format!(
        "{}{}",
        C[rng.gen_range(0..C.len())] as char,
        V[rng.gen_range(0..V.len())] as char
    )
}

pub struct Synthetic {
    pub corpus: Corpus,
    /// Compound word to its `[stem, suffix]` split.
    pub gold: SegmentedLexicon,
}

/// Sentences `topic topic stem+suffix marker marker`: the topic words depend
/// on the stem and the marker words on the suffix, so both halves of a
/// compound carry their own distributional signal.
pub fn synthetic(seed: u64) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stems = BTreeSet::new();
    while stems.len() < STEMS {
        stems.insert(format!("{}{}", syllable(&mut rng), syllable(&mut rng)));
    }
    let mut suffixes = BTreeSet::new();
    while suffixes.len() < SUFFIXES {
        let mut s = syllable(&mut rng);
        if rng.gen_bool(0.5) {
            s.push(b"nrs"[rng.gen_range(0..3)] as char);
        }
        suffixes.insert(s);
    }
    let stems: Vec<String> = stems.into_iter().collect();
    let suffixes: Vec<String> = suffixes.into_iter().collect();

    let mut gold = SegmentedLexicon::new();
    let mut words = Vec::new();
    for (i, stem) in stems.iter().enumerate() {
        for (j, suffix) in suffixes.iter().enumerate() {
            let word = format!("{stem}{suffix}");
            // a collision would make the gold split ambiguous
            assert!(!gold.contains(&word), "duplicate compound {word}");
            gold.insert(tok(&word), vec![tok(stem), tok(suffix)])
                .unwrap();
            words.push((word, i % TOPICS, j));
        }
    }

    let mut lines = Vec::with_capacity(SENTENCES);
    for n in 0..SENTENCES {
        // every compound appears, then the rest is drawn uniformly
        let (word, topic, suffix) = if n < words.len() {
            &words[n]
        } else {
            words.choose(&mut rng).unwrap()
        };
        let mut ctx = |prefix: &str, group: usize, size: usize| {
            format!("{prefix}{group}x{}", rng.gen_range(0..size))
        };
        let t1 = ctx("T", *topic, TOPIC_WORDS);
        let t2 = ctx("T", *topic, TOPIC_WORDS);
        let m1 = ctx("M", *suffix, MARKER_WORDS);
        let m2 = ctx("M", *suffix, MARKER_WORDS);
        lines.push(format!("{t1} {t2} {word} {m1} {m2}"));
    }
    Synthetic {
        corpus: Corpus::from_lines(lines),
        gold,
    }
}

/// Random Gaussian-ish output matrix, one row per vocabulary word.
pub fn random_output(words: &[Token], dim: usize, seed: u64) -> Embeddings {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..words.len() * dim)
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    EmbeddingTable::new(
        words.to_vec(),
        Array2::from_shape_vec((words.len(), dim), data).unwrap(),
    )
    .unwrap()
}

pub struct Pipeline {
    pub vocab: Vocabulary,
    pub counts: CooccurrenceCounts,
    pub output: Embeddings,
    pub words: Embeddings,
    pub merges: MergeList,
    pub initial: SegmentedLexicon,
    pub refined: RefinementState<f64>,
    pub model: BigramModel,
    pub bigram_lexicon: SegmentedLexicon,
    pub segmented: SegmentedText,
}

/// Vocabulary, counts, word vectors from a word-level solve, BPE
/// initialization, refinement, and distillation into a bigram model.
pub fn run_pipeline(syn: &Synthetic, seed: u64) -> Pipeline {
    let vocab = build_vocabulary(&syn.corpus, usize::MAX, 1).unwrap();
    let counts = count_cooccurrences(&syn.corpus, &vocab, DEFAULT_WINDOW).unwrap();
    let output = random_output(vocab.tokens(), DIM, seed);
    let identity = SegmentationMatrix::identity(vocab.tokens()).unwrap();
    let words = compute_subword_embeddings(&identity, &counts, &output, 0.1, Ridge::Auto)
        .unwrap()
        .aligned_to(vocab.tokens())
        .unwrap();

    let compound_counts: HashMap<String, u64> = syn
        .gold
        .words()
        .map(|w| (w.to_string(), vocab.freq(vocab.id(w).unwrap())))
        .collect();
    let charset: BTreeSet<char> = compound_counts.keys().flat_map(|w| w.chars()).collect();
    let merges = bpe_train_counts(&compound_counts, charset.len() + 60).unwrap();
    let initial: SegmentedLexicon = syn
        .gold
        .words()
        .map(|w| (w.clone(), bpe_segment(w, &merges)))
        .collect();

    let refined =
        lexseg::refine(&initial, &words, &counts, &output, &RefineConfig::default()).unwrap();
    let weighted: Vec<(&[Token], u64)> = refined
        .lexicon
        .iter()
        .map(|(w, seg)| (seg.as_slice(), vocab.freq(vocab.id(w).unwrap())))
        .collect();
    let model = bigram::distill_weighted(weighted).unwrap();
    let bigram_lexicon: SegmentedLexicon = refined
        .lexicon
        .words()
        .map(|w| {
            (
                w.clone(),
                bigram::beam_segment(w, &model, bigram::DEFAULT_BEAM)
                    .unwrap()
                    .subwords,
            )
        })
        .collect();
    let segmented =
        lexseg::segment_corpus(&syn.corpus, &refined.lexicon, OovPolicy::Whole).unwrap();
    Pipeline {
        vocab,
        counts,
        output,
        words,
        merges,
        initial,
        refined,
        model,
        bigram_lexicon,
        segmented,
    }
}

impl Pipeline {
    /// Writes every artifact into `dir` and returns file name to bytes.
    pub fn save_all(&self, dir: &Path) -> BTreeMap<&'static str, Vec<u8>> {
        let sep = subseg::textio::DEFAULT_SEPARATOR;
        self.vocab.save(&dir.join("vocab.tsv")).unwrap();
        self.counts.save(&dir.join("counts.cooc")).unwrap();
        self.output.save(&dir.join("output.vec")).unwrap();
        self.words.save(&dir.join("words.vec")).unwrap();
        self.merges.save(&dir.join("merges.txt")).unwrap();
        self.initial.save(&dir.join("initial.tsv")).unwrap();
        self.refined.lexicon.save(&dir.join("refined.tsv")).unwrap();
        self.refined
            .subword_embeddings
            .save(&dir.join("subwords.vec"))
            .unwrap();
        self.model.save(&dir.join("model.bigram")).unwrap();
        self.bigram_lexicon.save(&dir.join("bigram.tsv")).unwrap();
        self.segmented.save(&dir.join("corpus.seg"), sep).unwrap();
        [
            "vocab.tsv",
            "counts.cooc",
            "output.vec",
            "words.vec",
            "merges.txt",
            "initial.tsv",
            "refined.tsv",
            "subwords.vec",
            "model.bigram",
            "bigram.tsv",
            "corpus.seg",
        ]
        .into_iter()
        .map(|name| (name, std::fs::read(dir.join(name)).unwrap()))
        .collect()
    }
}

/// Cut positions, in characters, of a segmentation.
pub fn cut_set(pieces: &[Token]) -> BTreeSet<usize> {
    let mut marked = String::new();
    for (i, p) in pieces.iter().enumerate() {
        if i > 0 {
            marked.push('|');
        }
        marked.push_str(p);
    }
    let mut cuts = BTreeSet::new();
    let mut chars = 0;
    for c in marked.chars() {
        if c == '|' {
            cuts.insert(chars);
        } else {
            chars += 1;
        }
    }
    cuts
}

/// Fraction of predicted cuts that are gold cuts; 1 when nothing is cut.
pub fn boundary_precision(pred: &SegmentedLexicon, gold: &SegmentedLexicon) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for (w, seg) in pred.iter() {
        let g = cut_set(gold.get(w).unwrap());
        let p = cut_set(seg);
        hit += p.intersection(&g).count();
        total += p.len();
    }
    if total == 0 {
        1.0
    } else {
        hit as f64 / total as f64
    }
}
