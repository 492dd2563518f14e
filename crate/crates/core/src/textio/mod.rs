//! Corpus, vocabulary, lexicon and merge-list ingestion, plus a minimal
//! word-internal BPE used to bootstrap an initial segmentation.
//!
//! All text formats are UTF-8 with LF line endings. Tokens never contain
//! whitespace, so every format splits fields on single spaces or tabs.

mod bpe;
mod lexicon;
mod segmented;
mod vocab;

use std::borrow::Borrow;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::ops::Deref;
use std::path::Path;

use crate::error::{Error, Result};

pub use bpe::{bpe_segment, bpe_train, bpe_train_counts, MergeList};
pub use lexicon::{concat_matches, SegmentedLexicon};
pub use segmented::{SegmentedText, DEFAULT_SEPARATOR};
pub use vocab::{build_vocabulary, Vocabulary};

/// Lines per shard when corpus scans run in parallel.
pub(crate) const SHARD_LINES: usize = 4096;

/// A nonempty whitespace-free unit of text.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Token(String);

impl Token {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.is_empty() {
            return Err(Error::Validation("empty token".into()));
        }
        if text.chars().any(char::is_whitespace) {
            return Err(Error::Validation(format!(
                "token {text:?} contains whitespace"
            )));
        }
        Ok(Token(text))
    }

    /// Wraps text already known to satisfy the token invariants, such as a
    /// substring of an existing token.
    pub(crate) fn from_valid(text: impl Into<String>) -> Self {
        let text = text.into();
        debug_assert!(!text.is_empty() && !text.chars().any(char::is_whitespace));
        Token(text)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn char_len(&self) -> usize {
        self.0.chars().count()
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl Deref for Token {
    type Target = str;

    fn deref(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for Token {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl TryFrom<&str> for Token {
    type Error = Error;

    fn try_from(value: &str) -> Result<Self> {
        Token::new(value)
    }
}

/// Pre-tokenized text held in memory: one sentence per line, tokens separated
/// by whitespace.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    lines: Vec<String>,
}

impl Corpus {
    pub fn from_lines<I, L>(lines: I) -> Self
    where
        I: IntoIterator<Item = L>,
        L: Into<String>,
    {
        Corpus {
            lines: lines.into_iter().map(Into::into).collect(),
        }
    }

    pub fn from_text(text: &str) -> Self {
        Corpus::from_lines(text.lines())
    }

    /// Reads a corpus, reporting unreadable or non-UTF-8 input with its line
    /// number.
    pub fn read<R: BufRead>(mut reader: R, source_name: &str) -> Result<Self> {
        let mut lines = Vec::new();
        let mut buf = String::new();
        loop {
            buf.clear();
            let read = reader
                .read_line(&mut buf)
                .map_err(|e| Error::io(format!("{source_name}: line {}", lines.len() + 1), e))?;
            if read == 0 {
                break;
            }
            let line = buf.strip_suffix('\n').unwrap_or(&buf);
            lines.push(line.to_owned());
        }
        Ok(Corpus { lines })
    }

    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Corpus::read(BufReader::new(file), &path.display().to_string())
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// Iterates the tokens of every line, in order.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.lines.iter().flat_map(|l| l.split_whitespace())
    }
}

pub(crate) fn open_reader(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Writes `path` through a temporary file in the same directory and renames
/// it into place once `body` succeeds.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let ctx = || path.display().to_string();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(ctx(), e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w).map_err(|e| Error::io(ctx(), e))?;
        w.flush().map_err(|e| Error::io(ctx(), e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(ctx(), e.error))?;
    Ok(())
}
