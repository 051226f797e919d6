//! EMB1 dense-embedding files.
//!
//! Layout: one UTF-8 JSON header line
//! `{"format":"EMB1","dim":D,"count":N,"ids":[...]}` terminated by `\n`,
//! followed by exactly `N * D` little-endian f32 values in row-major order.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EMB1_FORMAT: &str = "EMB1";

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    dim: usize,
    count: usize,
    ids: Vec<String>,
}

/// Row-major matrix of imported embeddings, one row per review id.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    ids: Vec<String>,
    dim: usize,
    values: Vec<f32>,
    row_of: HashMap<String, usize>,
}

impl DenseMatrix {
    pub fn new(ids: Vec<String>, dim: usize, values: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmbeddingFormat("dim must be positive".into()));
        }
        if values.len() != ids.len() * dim {
            return Err(Error::EmbeddingFormat(format!(
                "{} values for {} rows of dim {}",
                values.len(),
                ids.len(),
                dim
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::EmbeddingFormat(format!(
                "non-finite value in row {} ({})",
                pos / dim,
                ids[pos / dim]
            )));
        }
        let mut row_of = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if row_of.insert(id.clone(), i).is_some() {
                return Err(Error::EmbeddingFormat(format!("duplicate id {id:?}")));
            }
        }
        Ok(DenseMatrix {
            ids,
            dim,
            values,
            row_of,
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.ids.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_by_id(&self, id: &str) -> Option<&[f32]> {
        self.row_of.get(id).map(|&i| self.row(i))
    }
}

pub fn load_embeddings(path: &Path) -> Result<DenseMatrix> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file))
}

pub fn read_embeddings<R: BufRead>(mut reader: R) -> Result<DenseMatrix> {
    let mut line = Vec::new();
    reader
        .read_until(b'\n', &mut line)
        .map_err(|e| Error::EmbeddingFormat(format!("reading header: {e}")))?;
    if line.last() != Some(&b'\n') {
        return Err(Error::EmbeddingFormat("header is not newline-terminated".into()));
    }
    line.pop();
    let header: Header = serde_json::from_slice(&line)
        .map_err(|e| Error::EmbeddingFormat(format!("bad header: {e}")))?;
    if header.format != EMB1_FORMAT {
        return Err(Error::EmbeddingFormat(format!(
            "format tag {:?}, expected {EMB1_FORMAT:?}",
            header.format
        )));
    }
    if header.ids.len() != header.count {
        return Err(Error::EmbeddingFormat(format!(
            "header declares count {} but lists {} ids",
            header.count,
            header.ids.len()
        )));
    }
    let expected = header
        .count
        .checked_mul(header.dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::EmbeddingFormat("count * dim overflows".into()))?;
    let mut payload = Vec::with_capacity(expected);
    reader
        .read_to_end(&mut payload)
        .map_err(|e| Error::EmbeddingFormat(format!("reading payload: {e}")))?;
    if payload.len() != expected {
        return Err(Error::EmbeddingFormat(format!(
            "payload is {} bytes, header requires {expected}",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    DenseMatrix::new(header.ids, header.dim, values)
}

pub fn write_embeddings<W: Write>(m: &DenseMatrix, mut writer: W) -> std::io::Result<()> {
    let header = Header {
        format: EMB1_FORMAT.to_string(),
        dim: m.dim,
        count: m.count(),
        ids: m.ids.clone(),
    };
    serde_json::to_writer(&mut writer, &header)?;
    writer.write_all(b"\n")?;
    for v in &m.values {
        writer.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}
