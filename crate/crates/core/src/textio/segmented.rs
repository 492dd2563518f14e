use std::io::{BufRead, Write};
use std::path::Path;

use super::{open_reader, write_atomic, Token};
use crate::error::{Error, Result};

/// Word-separator token used in segmented text.
pub const DEFAULT_SEPARATOR: &str = "\u{2581}";

/// Segmented running text: lines of words, each word a nonempty subword
/// sequence.
///
/// On disk, subwords are separated by single spaces and consecutive words by
/// a separator token, e.g. `un do ing ▁ it`. A line without separators holds
/// one word.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SegmentedText {
    lines: Vec<Vec<Vec<Token>>>,
}

impl SegmentedText {
    pub fn new(lines: Vec<Vec<Vec<Token>>>) -> Self {
        debug_assert!(lines.iter().flatten().all(|w| !w.is_empty()));
        SegmentedText { lines }
    }

    pub fn lines(&self) -> &[Vec<Vec<Token>>] {
        &self.lines
    }

    /// Every word in reading order.
    pub fn words(&self) -> impl Iterator<Item = &[Token]> {
        self.lines.iter().flatten().map(Vec::as_slice)
    }

    pub fn word_count(&self) -> usize {
        self.lines.iter().map(Vec::len).sum()
    }

    /// Token stream as written to disk, optionally including separators.
    pub fn tokens<'a>(
        &'a self,
        separator: &'a str,
        include_separator: bool,
    ) -> impl Iterator<Item = &'a str> + 'a {
        self.lines.iter().flat_map(move |line| {
            line.iter().enumerate().flat_map(move |(i, word)| {
                let sep = (include_separator && i > 0).then_some(separator);
                sep.into_iter().chain(word.iter().map(Token::as_str))
            })
        })
    }

    pub fn write_to<W: Write + ?Sized>(&self, w: &mut W, separator: &str) -> std::io::Result<()> {
        for line in &self.lines {
            for (i, word) in line.iter().enumerate() {
                if i > 0 {
                    write!(w, " {separator} ")?;
                }
                for (j, piece) in word.iter().enumerate() {
                    if j > 0 {
                        w.write_all(b" ")?;
                    }
                    w.write_all(piece.as_bytes())?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(reader: R, source_name: &str, separator: &str) -> Result<Self> {
        let mut lines = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(format!("{source_name}: line {}", i + 1), e))?;
            let mut words = Vec::new();
            let mut current = Vec::new();
            for tok in line.split_whitespace() {
                if tok == separator {
                    if !current.is_empty() {
                        words.push(std::mem::take(&mut current));
                    }
                } else {
                    current.push(Token::from_valid(tok));
                }
            }
            if !current.is_empty() {
                words.push(current);
            }
            lines.push(words);
        }
        Ok(SegmentedText { lines })
    }

    pub fn save(&self, path: &Path, separator: &str) -> Result<()> {
        write_atomic(path, |w| self.write_to(w, separator))
    }

    pub fn load(path: &Path, separator: &str) -> Result<Self> {
        Self::read_from(open_reader(path)?, &path.display().to_string(), separator)
    }
}
