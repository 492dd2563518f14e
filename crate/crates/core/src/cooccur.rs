//! Symmetric word co-occurrence counts within a fixed context window.
//!
//! A count `C[x, y]` is the number of ordered position pairs `(i, j)`, `i != j`,
//! `|i - j| <= window`, inside one line, with token `x` at `i` and `y` at `j`.
//! Out-of-vocabulary tokens keep their positions but contribute nothing.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::textio::{open_reader, write_atomic, Corpus, Vocabulary, SHARD_LINES};

pub const DEFAULT_WINDOW: usize = 5;

const HEADER_PREFIX: &str = "#COOC v1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CooccurrenceCounts {
    window: usize,
    vocab_size: usize,
    /// Row-major sparse storage: `rows[x]` holds `(y, count)` sorted by `y`.
    rows: Vec<Vec<(u32, u64)>>,
}

pub fn count_cooccurrences(
    corpus: &Corpus,
    vocab: &Vocabulary,
    window: usize,
) -> Result<CooccurrenceCounts> {
    if window == 0 {
        return Err(Error::Argument("window must be at least 1".into()));
    }
    let pairs = corpus
        .lines()
        .par_chunks(SHARD_LINES)
        .map(|shard| {
            let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
            let mut ids = Vec::new();
            for line in shard {
                ids.clear();
                ids.extend(line.split_whitespace().map(|t| vocab.id(t)));
                for (i, &x) in ids.iter().enumerate() {
                    let Some(x) = x else { continue };
                    let hi = (i + window).min(ids.len() - 1);
                    for &y in ids[i + 1..=hi].iter().flatten() {
                        // both orders at once keeps the matrix symmetric
                        *counts.entry((x, y)).or_default() += 1;
                        *counts.entry((y, x)).or_default() += 1;
                    }
                }
            }
            counts
        })
        .reduce(HashMap::new, |a, b| {
            let (mut big, small) = if a.len() >= b.len() { (a, b) } else { (b, a) };
            for (k, v) in small {
                *big.entry(k).or_default() += v;
            }
            big
        });
    Ok(CooccurrenceCounts::from_pairs(window, vocab.len(), pairs))
}

impl CooccurrenceCounts {
    fn from_pairs(window: usize, vocab_size: usize, pairs: HashMap<(u32, u32), u64>) -> Self {
        let mut rows = vec![Vec::new(); vocab_size];
        for ((x, y), c) in pairs {
            rows[x as usize].push((y, c));
        }
        for row in &mut rows {
            row.sort_unstable();
        }
        CooccurrenceCounts {
            window,
            vocab_size,
            rows,
        }
    }

    /// Builds counts from the upper triangle (plus diagonal); entries with
    /// `x > y` are mirrored, and zero counts are dropped.
    pub fn from_upper_triangle(
        window: usize,
        vocab_size: usize,
        entries: impl IntoIterator<Item = (u32, u32, u64)>,
    ) -> Result<Self> {
        let mut pairs = HashMap::new();
        for (x, y, c) in entries {
            if x > y {
                return Err(Error::Validation(format!(
                    "entry ({x}, {y}) is below the diagonal"
                )));
            }
            if y as usize >= vocab_size {
                return Err(Error::Validation(format!(
                    "id {y} out of range for |V|={vocab_size}"
                )));
            }
            if c == 0 {
                continue;
            }
            if pairs.insert((x, y), c).is_some() {
                return Err(Error::Validation(format!("duplicate entry ({x}, {y})")));
            }
            if x != y {
                pairs.insert((y, x), c);
            }
        }
        Ok(Self::from_pairs(window, vocab_size, pairs))
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn get(&self, x: u32, y: u32) -> u64 {
        let row = &self.rows[x as usize];
        row.binary_search_by_key(&y, |&(id, _)| id)
            .map(|i| row[i].1)
            .unwrap_or(0)
    }

    /// Nonzero entries of row `x`, sorted by column.
    pub fn row(&self, x: u32) -> &[(u32, u64)] {
        &self.rows[x as usize]
    }

    pub fn row_sum(&self, x: u32) -> u64 {
        self.rows[x as usize].iter().map(|&(_, c)| c).sum()
    }

    /// Number of stored (nonzero) entries, counting both triangles.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Upper-triangle entries `(x, y, count)` with `x <= y`, in row-major order.
    pub fn upper_triangle(&self) -> impl Iterator<Item = (u32, u32, u64)> + '_ {
        self.rows.iter().enumerate().flat_map(|(x, row)| {
            let x = x as u32;
            row.iter()
                .filter(move |&&(y, _)| y >= x)
                .map(move |&(y, c)| (x, y, c))
        })
    }

    pub fn write_to<W: Write + ?Sized>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(
            w,
            "{HEADER_PREFIX} |V|={} window={}",
            self.vocab_size, self.window
        )?;
        for (x, y, c) in self.upper_triangle() {
            writeln!(w, "{x}\t{y}\t{c}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(l) => l.map_err(|e| Error::io(format!("{source_name}: line 1"), e))?,
            None => return Err(Error::parse(source_name, 1, "missing header")),
        };
        let (vocab_size, window) = parse_header(&header)
            .ok_or_else(|| Error::parse(source_name, 1, format!("bad header {header:?}")))?;

        let mut pairs = HashMap::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line.map_err(|e| Error::io(format!("{source_name}: line {lineno}"), e))?;
            let fields: Vec<&str> = line.split('\t').collect();
            let [x, y, c] = fields[..] else {
                return Err(Error::parse(
                    source_name,
                    lineno,
                    "expected id1<TAB>id2<TAB>count",
                ));
            };
            let bad = |what: &str| Error::parse(source_name, lineno, what.to_owned());
            let x: u32 = x.parse().map_err(|_| bad("bad id"))?;
            let y: u32 = y.parse().map_err(|_| bad("bad id"))?;
            let c: i128 = c.parse().map_err(|_| bad("bad count"))?;
            if x > y {
                return Err(bad("id1 must not exceed id2"));
            }
            if y as usize >= vocab_size {
                return Err(bad("id out of range"));
            }
            if c <= 0 || c > u64::MAX as i128 {
                return Err(bad("count must be positive"));
            }
            if pairs.insert((x, y), c as u64).is_some() {
                return Err(bad("duplicate entry"));
            }
            if x != y {
                pairs.insert((y, x), c as u64);
            }
        }
        Ok(Self::from_pairs(window, vocab_size, pairs))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| self.write_to(w))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(open_reader(path)?, &path.display().to_string())
    }

    /// Dense copy, for small matrices and tests.
    pub fn to_dense(&self) -> Vec<Vec<u64>> {
        let mut dense = vec![vec![0; self.vocab_size]; self.vocab_size];
        for (x, row) in self.rows.iter().enumerate() {
            for &(y, c) in row {
                dense[x][y as usize] = c;
            }
        }
        dense
    }
}

fn parse_header(header: &str) -> Option<(usize, usize)> {
    let rest = header.strip_prefix(HEADER_PREFIX)?.strip_prefix(' ')?;
    let fields: BTreeMap<&str, &str> = rest.split(' ').filter_map(|f| f.split_once('=')).collect();
    if fields.len() != 2 {
        return None;
    }
    let n = fields.get("|V|")?.parse().ok()?;
    let w = fields.get("window")?.parse().ok()?;
    (w > 0).then_some((n, w))
}
