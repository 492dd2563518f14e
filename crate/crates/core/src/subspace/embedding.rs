use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::textio::{open_reader, write_atomic, Token};

/// Dense table with one finite vector per token.
///
/// Used for word input vectors, output vectors stored one row per word, and
/// subword vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable<S> {
    tokens: Vec<Token>,
    index: HashMap<Token, usize>,
    vectors: Array2<S>,
    max_token_chars: usize,
}

impl<S: Scalar> EmbeddingTable<S> {
    pub fn new(tokens: Vec<Token>, vectors: Array2<S>) -> Result<Self> {
        if vectors.nrows() != tokens.len() {
            return Err(Error::Validation(format!(
                "{} tokens but {} vectors",
                tokens.len(),
                vectors.nrows()
            )));
        }
        if vectors.ncols() == 0 {
            return Err(Error::Validation(
                "embedding dimension must be positive".into(),
            ));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate token {t:?} in embedding table"
                )));
            }
            if let Some(v) = vectors.row(i).iter().find(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "non-finite value {v} for token {t:?}"
                )));
            }
        }
        let max_token_chars = tokens.iter().map(Token::char_len).max().unwrap_or(0);
        let vectors = vectors.as_standard_layout().into_owned();
        Ok(EmbeddingTable {
            tokens,
            index,
            vectors,
            max_token_chars,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn vectors(&self) -> &Array2<S> {
        &self.vectors
    }

    pub fn max_token_chars(&self) -> usize {
        self.max_token_chars
    }

    pub fn position(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn row(&self, i: usize) -> &[S] {
        self.vectors
            .row(i)
            .to_slice()
            .expect("rows are stored contiguously")
    }

    pub fn get(&self, token: &str) -> Option<&[S]> {
        self.position(token).map(|i| self.row(i))
    }

    pub fn view(&self, token: &str) -> Option<ArrayView1<'_, S>> {
        self.position(token).map(|i| self.vectors.row(i))
    }

    /// Reorders rows to follow `order`; every token in `order` must be present.
    pub fn aligned_to(&self, order: &[Token]) -> Result<Self> {
        let mut vectors = Array2::zeros((order.len(), self.dim()));
        for (i, t) in order.iter().enumerate() {
            let src = self.position(t).ok_or_else(|| {
                Error::Validation(format!("token {t:?} has no row in the embedding table"))
            })?;
            vectors.row_mut(i).assign(&self.vectors.row(src));
        }
        Self::new(order.to_vec(), vectors)
    }

    /// Text format: a `<rows> <dim>` header, then `token v1 ... v<dim>` per row.
    pub fn write_text<W: Write + ?Sized>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim())?;
        for (i, t) in self.tokens.iter().enumerate() {
            write!(w, "{t}")?;
            for v in self.row(i) {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = match lines.next() {
            Some((_, l)) => l.map_err(|e| Error::io(format!("{source_name}: line 1"), e))?,
            None => {
                return Err(Error::parse(
                    source_name,
                    1,
                    "missing `<rows> <dim>` header",
                ))
            }
        };
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(source_name, 1, format!("bad header {header:?}")))?;
        let [rows, dim] = dims[..] else {
            return Err(Error::parse(
                source_name,
                1,
                format!("bad header {header:?}"),
            ));
        };
        if dim == 0 {
            return Err(Error::parse(source_name, 1, "dimension must be positive"));
        }

        let mut tokens = Vec::with_capacity(rows);
        let mut data = Vec::with_capacity(rows * dim);
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(format!("{source_name}: line {lineno}"), e))?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let tok = fields
                .next()
                .and_then(|t| Token::new(t).ok())
                .ok_or_else(|| Error::parse(source_name, lineno, "missing token"))?;
            let before = data.len();
            for f in fields {
                let v: S = f
                    .parse()
                    .map_err(|_| Error::parse(source_name, lineno, format!("bad value {f:?}")))?;
                if !v.is_finite() {
                    return Err(Error::parse(
                        source_name,
                        lineno,
                        format!("non-finite value {f:?}"),
                    ));
                }
                data.push(v);
            }
            if data.len() - before != dim {
                return Err(Error::parse(
                    source_name,
                    lineno,
                    format!("expected {dim} values, found {}", data.len() - before),
                ));
            }
            tokens.push(tok);
        }
        if tokens.len() != rows {
            return Err(Error::Validation(format!(
                "{source_name}: header declares {rows} rows, found {}",
                tokens.len()
            )));
        }
        let vectors = Array2::from_shape_vec((rows, dim), data)
            .map_err(|e| Error::Invariant(e.to_string()))?;
        Self::new(tokens, vectors)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| self.write_text(w))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_text(open_reader(path)?, &path.display().to_string())
    }
}
