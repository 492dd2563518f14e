use std::io::{self, BufWriter, Write};
use std::path::Path;

use subseg::textio::{write_atomic, Corpus};
use subseg::{Error, Result};

/// Reads a corpus from `path`, or stdin for `None` and `-`.
pub fn read_corpus(path: Option<&Path>) -> Result<Corpus> {
    match path {
        Some(p) if p.as_os_str() != "-" => Corpus::open(p),
        _ => Corpus::read(io::stdin().lock(), "<stdin>"),
    }
}

/// Writes to `path` atomically, or to stdout for `None`.
pub fn emit<F>(path: Option<&Path>, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match path {
        Some(p) => write_atomic(p, body),
        None => {
            let mut out = BufWriter::new(io::stdout().lock());
            body(&mut out)
                .and_then(|()| out.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}
