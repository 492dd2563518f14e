use std::collections::btree_map::{self, BTreeMap};
use std::io::{BufRead, Write};
use std::path::Path;

use super::{open_reader, write_atomic, Token};
use crate::error::{Error, Result};

/// Returns true when the pieces concatenate to exactly `word`.
pub fn concat_matches<T: AsRef<str>>(word: &str, pieces: &[T]) -> bool {
    let mut rest = word;
    for p in pieces {
        match rest.strip_prefix(p.as_ref()) {
            Some(r) => rest = r,
            None => return false,
        }
    }
    rest.is_empty()
}

/// Word-type to surface segmentation map.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SegmentedLexicon {
    entries: BTreeMap<Token, Vec<Token>>,
}

impl SegmentedLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces an entry, rejecting segmentations that do not
    /// spell the word.
    pub fn insert(&mut self, word: Token, segmentation: Vec<Token>) -> Result<Option<Vec<Token>>> {
        if segmentation.is_empty() || !concat_matches(&word, &segmentation) {
            return Err(Error::Validation(format!(
                "segmentation {} does not spell word {:?}",
                join(&segmentation),
                word.as_str()
            )));
        }
        Ok(self.entries.insert(word, segmentation))
    }

    pub fn get(&self, word: &str) -> Option<&[Token]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in lexicographic word order.
    pub fn iter(&self) -> btree_map::Iter<'_, Token, Vec<Token>> {
        self.entries.iter()
    }

    pub fn words(&self) -> impl Iterator<Item = &Token> {
        self.entries.keys()
    }

    pub fn write_to<W: Write + ?Sized>(&self, w: &mut W) -> std::io::Result<()> {
        for (word, seg) in &self.entries {
            writeln!(w, "{word}\t{}", join(seg))?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let mut lex = SegmentedLexicon::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(format!("{source_name}: line {lineno}"), e))?;
            let (word, seg) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(source_name, lineno, "expected word<TAB>subwords"))?;
            let word =
                Token::new(word).map_err(|e| Error::parse(source_name, lineno, e.to_string()))?;
            let pieces = seg
                .split(' ')
                .map(Token::new)
                .collect::<Result<Vec<_>>>()
                .map_err(|_| {
                    Error::parse(
                        source_name,
                        lineno,
                        format!("malformed segmentation {seg:?}"),
                    )
                })?;
            if lex.contains(&word) {
                return Err(Error::parse(
                    source_name,
                    lineno,
                    format!("duplicate word {:?}", word.as_str()),
                ));
            }
            lex.insert(word, pieces).map_err(|e| match e {
                Error::Validation(m) => Error::parse(source_name, lineno, m),
                other => other,
            })?;
        }
        Ok(lex)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| self.write_to(w))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(open_reader(path)?, &path.display().to_string())
    }
}

impl FromIterator<(Token, Vec<Token>)> for SegmentedLexicon {
    /// Panics if an entry violates the concatenation invariant.
    fn from_iter<I: IntoIterator<Item = (Token, Vec<Token>)>>(iter: I) -> Self {
        let mut lex = SegmentedLexicon::new();
        for (w, s) in iter {
            lex.insert(w, s).expect("invalid lexicon entry");
        }
        lex
    }
}

fn join(pieces: &[Token]) -> String {
    pieces
        .iter()
        .map(Token::as_str)
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_row() {
        let lex = SegmentedLexicon::read_from("undoing\tun do ing\n".as_bytes(), "lex").unwrap();
        assert_eq!(lex.get("undoing").unwrap().len(), 3);
    }

    #[test]
    fn rejects_row_that_does_not_spell_word() {
        let err = SegmentedLexicon::read_from("undoing\tun do in\n".as_bytes(), "lex").unwrap_err();
        assert_eq!(err.kind(), crate::ErrorKind::Validation);
        assert!(err.to_string().contains("undoing"));
    }

    #[test]
    fn malformed_rows_name_their_line() {
        for bad in [
            "ok\tok\nnotab\n",
            "ok\tok\nx\t\n",
            "ok\tok\nab\ta  b\n",
            "ok\tok\nok\tok\n",
        ] {
            let err = SegmentedLexicon::read_from(bad.as_bytes(), "lex").unwrap_err();
            assert!(err.to_string().contains("line 2"), "{bad:?}: {err}");
        }
    }

    #[test]
    fn concat_check() {
        assert!(concat_matches("aba", &["ab", "a"]));
        assert!(!concat_matches("aba", &["ab"]));
        assert!(!concat_matches("aba", &["ab", "a", "a"]));
    }

    proptest! {
        #[test]
        fn save_load_round_trip(words in prop::collection::btree_map("[a-zé]{1,8}", prop::collection::vec(1usize..4, 1..4), 0..20)) {
            let mut lex = SegmentedLexicon::new();
            for (w, cuts) in words {
                let chars: Vec<char> = w.chars().collect();
                let mut pieces = Vec::new();
                let mut start = 0;
                for c in cuts {
                    if start >= chars.len() { break; }
                    let end = (start + c).min(chars.len());
                    pieces.push(Token::new(chars[start..end].iter().collect::<String>()).unwrap());
                    start = end;
                }
                if start < chars.len() {
                    pieces.push(Token::new(chars[start..].iter().collect::<String>()).unwrap());
                }
                lex.insert(Token::new(w).unwrap(), pieces).unwrap();
            }
            let mut buf = Vec::new();
            lex.write_to(&mut buf).unwrap();
            let back = SegmentedLexicon::read_from(buf.as_slice(), "mem").unwrap();
            prop_assert_eq!(lex, back);
        }
    }
}
