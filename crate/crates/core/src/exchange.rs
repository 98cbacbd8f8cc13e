//! Text exchange format for entity embeddings.
//!
//! Layout: UTF-8, first line `dim=<d>`, then one line per entity:
//! `<entity_id>\t<v1> <v2> ... <vd>` with full-precision decimal floats.
//! In 64-bit mode `read(write(x))` is bit-exact.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ExchangeError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("missing or malformed `dim=` header")]
    BadHeader,

    #[error("row `{id}` (line {line}) has {got} values, expected {want}")]
    RowWidth {
        id: String,
        line: usize,
        got: usize,
        want: usize,
    },

    #[error("row `{id}` (line {line}) is malformed: {detail}")]
    BadRow {
        id: String,
        line: usize,
        detail: String,
    },

    #[error("duplicate entity id `{id}`")]
    DuplicateId { id: String },

    #[error("no embedding stored for `{id}`")]
    MissingVector { id: String },

    #[error("vector for `{id}` has length {got}, expected {want}")]
    DimMismatch { id: String, got: usize, want: usize },
}

/// Entity-id keyed embedding collection with a fixed dimension.
#[derive(Debug, Clone)]
pub struct EmbeddingSet<S: Scalar> {
    dim: usize,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<Vec<S>>,
}

impl<S: Scalar> EmbeddingSet<S> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ids: Vec::new(),
            index: HashMap::new(),
            vectors: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Ids in insertion order (which is file order after a read).
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn insert(&mut self, id: &str, vector: Vec<S>) -> Result<(), ExchangeError> {
        if vector.len() != self.dim {
            return Err(ExchangeError::DimMismatch {
                id: id.to_string(),
                got: vector.len(),
                want: self.dim,
            });
        }
        if self.index.contains_key(id) {
            return Err(ExchangeError::DuplicateId { id: id.to_string() });
        }
        self.index.insert(id.to_string(), self.ids.len());
        self.ids.push(id.to_string());
        self.vectors.push(vector);
        Ok(())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&[S]> {
        self.index.get(id).map(|&i| self.vectors[i].as_slice())
    }

    pub fn require(&self, id: &str) -> Result<&[S], ExchangeError> {
        self.get(id).ok_or_else(|| ExchangeError::MissingVector {
            id: id.to_string(),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[S])> {
        self.ids
            .iter()
            .zip(&self.vectors)
            .map(|(id, v)| (id.as_str(), v.as_slice()))
    }

    /// Elementwise scalar conversion, keeping order.
    pub fn cast<T: Scalar>(&self) -> EmbeddingSet<T> {
        EmbeddingSet {
            dim: self.dim,
            ids: self.ids.clone(),
            index: self.index.clone(),
            vectors: self
                .vectors
                .iter()
                .map(|v| v.iter().map(|x| T::from_double(x.to_double())).collect())
                .collect(),
        }
    }
}

pub fn write_embeddings<S: Scalar>(
    set: &EmbeddingSet<S>,
    path: &Path,
) -> Result<(), ExchangeError> {
    let io_err = |source| ExchangeError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(w, "dim={}", set.dim).map_err(io_err)?;
    for (id, vector) in set.iter() {
        let values: Vec<String> = vector.iter().map(|v| v.format_full()).collect();
        writeln!(w, "{id}\t{}", values.join(" ")).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_embeddings<S: Scalar>(path: &Path) -> Result<EmbeddingSet<S>, ExchangeError> {
    let io_err = |source| ExchangeError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let header = match lines.next() {
        Some((_, line)) => line.map_err(io_err)?,
        None => return Err(ExchangeError::BadHeader),
    };
    let dim: usize = header
        .strip_prefix("dim=")
        .and_then(|v| v.trim().parse().ok())
        .ok_or(ExchangeError::BadHeader)?;

    let mut set = EmbeddingSet::new(dim);
    for (i, line) in lines {
        let line = line.map_err(io_err)?;
        if line.is_empty() {
            continue;
        }
        let line_no = i + 1;
        let (id, rest) = line.split_once('\t').ok_or_else(|| ExchangeError::BadRow {
            id: line.chars().take(40).collect(),
            line: line_no,
            detail: "no tab separator".into(),
        })?;
        let mut vector = Vec::with_capacity(dim);
        for tok in rest.split_whitespace() {
            let v = S::parse_str(tok).ok_or_else(|| ExchangeError::BadRow {
                id: id.to_string(),
                line: line_no,
                detail: format!("bad float `{tok}`"),
            })?;
            vector.push(v);
        }
        if vector.len() != dim {
            return Err(ExchangeError::RowWidth {
                id: id.to_string(),
                line: line_no,
                got: vector.len(),
                want: dim,
            });
        }
        set.insert(id, vector)?;
    }
    Ok(set)
}
