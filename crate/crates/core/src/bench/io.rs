//! Edge files.
//!
//! Text: one edge per line, `src dst [weight]`, `#` starts a comment, the
//! weight defaults to 1. Binary (`.bin`): little-endian `u64 u64 i64`
//! triples.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::Edge;
use crate::error::{Error, Result};

pub fn read_edge_file(path: &Path) -> Result<Vec<Edge>> {
    if path.extension().is_some_and(|e| e == "bin") {
        let bytes = fs::read(path)?;
        if bytes.len() % 24 != 0 {
            return Err(Error::Io(format!(
                "{}: binary edge file length {} is not a multiple of 24",
                path.display(),
                bytes.len()
            )));
        }
        return Ok(bytes
            .chunks_exact(24)
            .map(|c| {
                let f = |i: usize| u64::from_le_bytes(c[i..i + 8].try_into().unwrap());
                (f(0), f(8), f(16) as i64)
            })
            .collect());
    }
    let file = fs::File::open(path)?;
    parse_edge_text(BufReader::new(file)).map_err(|e| match e {
        Error::Io(m) => Error::Io(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_edge_text(r: impl BufRead) -> Result<Vec<Edge>> {
    let mut edges = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut it = body.split_whitespace();
        let bad = || Error::Io(format!("line {}: expected `src dst [weight]`", n + 1));
        let src = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
        let dst = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
        let w = match it.next() {
            None => 1,
            Some(t) => t.parse().map_err(|_| bad())?,
        };
        if it.next().is_some() {
            return Err(bad());
        }
        edges.push((src, dst, w));
    }
    Ok(edges)
}

pub fn write_edge_file(path: &Path, edges: &[Edge]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    if path.extension().is_some_and(|e| e == "bin") {
        for &(s, d, w) in edges {
            out.write_all(&s.to_le_bytes())?;
            out.write_all(&d.to_le_bytes())?;
            out.write_all(&w.to_le_bytes())?;
        }
    } else {
        for &(s, d, w) in edges {
            writeln!(out, "{s} {d} {w}")?;
        }
    }
    out.flush()?;
    Ok(())
}

/// One past the largest endpoint.
pub fn vertex_count(edges: &[Edge]) -> usize {
    edges
        .iter()
        .map(|&(s, d, _)| s.max(d) as usize + 1)
        .max()
        .unwrap_or(0)
}
