//! Classic word2vec text format: a `<count> <dim>` header followed by one
//! `<word> <v1> ... <vdim>` line per entry.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{io_err, EmbeddingError};

#[derive(Debug, Clone, PartialEq)]
pub struct TextVectors {
    pub dim: usize,
    pub rows: Vec<(String, Vec<f32>)>,
}

fn format_err(line: usize, message: impl Into<String>) -> EmbeddingError {
    EmbeddingError::Format {
        line,
        message: message.into(),
    }
}

pub fn read_text_vectors(path: &Path) -> Result<TextVectors, EmbeddingError> {
    let file = File::open(path).map_err(io_err(path))?;
    parse_text_vectors(BufReader::new(file))
}

pub(crate) fn parse_text_vectors(reader: impl BufRead) -> Result<TextVectors, EmbeddingError> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or(EmbeddingError::EmptyInput)?;
    let header = header.map_err(|e| format_err(1, e.to_string()))?;
    let mut parts = header.split_whitespace();
    let count: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format_err(1, "header must be `<vocab_size> <dim>`"))?;
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .filter(|&d| d > 0)
        .ok_or_else(|| format_err(1, "header must be `<vocab_size> <dim>`"))?;

    let mut rows = Vec::with_capacity(count);
    for (idx, line) in lines {
        let no = idx + 1;
        let line = line.map_err(|e| format_err(no, e.to_string()))?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(' ').filter(|f| !f.is_empty());
        let word = fields.next().expect("non-empty line").to_string();
        let vector = fields
            .map(|f| {
                f.parse::<f32>()
                    .map_err(|_| format_err(no, format!("bad number `{f}`")))
            })
            .collect::<Result<Vec<f32>, _>>()?;
        if vector.len() != dim {
            return Err(EmbeddingError::Dimension {
                expected: dim,
                found: vector.len(),
                context: format!("line {no} (`{word}`)"),
            });
        }
        rows.push((word, vector));
    }
    if rows.len() != count {
        log::warn!("vector header announced {count} rows, found {}", rows.len());
    }
    Ok(TextVectors { dim, rows })
}

/// Writes vectors in text format. With `precision = None` values use the
/// shortest representation that reads back to the same `f32`.
pub fn write_text_vectors(
    path: &Path,
    dim: usize,
    rows: &[(&str, &[f32])],
    precision: Option<usize>,
) -> Result<(), EmbeddingError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(out, "{} {}", rows.len(), dim)?;
        for (word, vector) in rows {
            out.write_all(word.as_bytes())?;
            for v in vector.iter() {
                match precision {
                    Some(p) => write!(out, " {v:.p$}")?,
                    None => write!(out, " {v}")?,
                }
            }
            out.write_all(b"\n")?;
        }
        out.flush()
    };
    write(&mut out).map_err(io_err(path))
}
