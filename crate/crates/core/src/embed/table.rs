use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::Rng;

pub const DEFAULT_DIM: usize = 200;

/// Fixed-dimension vectors keyed by string id, stored as one row-major block.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    trainable: bool,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            ids: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            trainable: false,
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

    pub fn trainable(&self) -> bool {
        self.trainable
    }

    pub fn set_trainable(&mut self, trainable: bool) {
        self.trainable = trainable;
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Inserts or overwrites the vector for `id`.
    pub fn insert(&mut self, id: impl Into<String>, vector: &[f64]) -> Result<usize> {
        if vector.len() != self.dim {
            return Err(Error::Shape {
                op: "embedding insert",
                left: vec![self.dim],
                right: vec![vector.len()],
            });
        }
        let id = id.into();
        if let Some(&i) = self.index.get(&id) {
            self.row_mut(i).copy_from_slice(vector);
            return Ok(i);
        }
        let i = self.ids.len();
        self.index.insert(id.clone(), i);
        self.ids.push(id);
        self.data.extend_from_slice(vector);
        Ok(i)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.index_of(id).map(|i| self.row(i))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// All vectors as one row-major block, in insertion order.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Arithmetic mean of all stored vectors.
    pub fn centroid(&self) -> Result<Vec<f64>> {
        if self.ids.is_empty() {
            return Err(Error::Empty("centroid of an empty embedding table".into()));
        }
        let mut c = vec![0.0; self.dim];
        for i in 0..self.len() {
            for (acc, v) in c.iter_mut().zip(self.row(i)) {
                *acc += v;
            }
        }
        let n = self.len() as f64;
        c.iter_mut().for_each(|x| *x /= n);
        Ok(c)
    }

    /// The stored vector, or the centroid when `id` is unknown.
    pub fn lookup_or_centroid(&self, id: &str) -> Result<Vec<f64>> {
        match self.get(id) {
            Some(v) => Ok(v.to_vec()),
            None => self.centroid(),
        }
    }

    /// Writes `id v1 ... vd` lines. Floats use Rust's shortest round-trip
    /// formatting, so loading reproduces every value exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut line = String::new();
        for (i, id) in self.ids.iter().enumerate() {
            line.clear();
            write_row(&mut line, id, self.row(i));
            out.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        load_word_vectors(path)
    }
}

pub(crate) fn write_row(line: &mut String, id: &str, values: &[f64]) {
    use std::fmt::Write as _;
    line.push_str(id);
    for v in values {
        let _ = write!(line, " {v}");
    }
    line.push('\n');
}

/// Parses a whitespace-separated `token v1 ... vd` file. The dimension is
/// taken from the first line; later lines must agree.
pub fn load_word_vectors(path: &Path) -> Result<EmbeddingTable> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut table: Option<EmbeddingTable> = None;
    let mut values = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().expect("nonempty line");
        values.clear();
        for p in parts {
            let v: f64 = p
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, format!("bad number `{p}`")))?;
            values.push(v);
        }
        let t = table.get_or_insert_with(|| EmbeddingTable::new(values.len()));
        if values.len() != t.dim() || values.is_empty() {
            return Err(Error::parse(
                path,
                lineno + 1,
                format!("expected {} values, found {}", t.dim(), values.len()),
            ));
        }
        t.insert(token, &values)?;
    }
    table.ok_or_else(|| Error::Empty(format!("no vectors in {}", path.display())))
}

/// Independent vectors with entries uniform in `[-0.5/dim, 0.5/dim]`, flagged
/// trainable.
pub fn random_author_embeddings<I, S>(ids: I, dim: usize, rng: &mut Rng) -> EmbeddingTable
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let mut table = EmbeddingTable::new(dim);
    let bound = 0.5 / dim as f64;
    let mut v = vec![0.0; dim];
    for id in ids {
        v.iter_mut().for_each(|x| *x = rng.uniform_in(-bound, bound));
        table.insert(id, &v).expect("dimension fixed above");
    }
    table.set_trainable(true);
    table
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
