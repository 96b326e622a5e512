//! Single-file model checkpoints.
//!
//! Line 1 is a magic string, line 2 a JSON header (configuration, parameter
//! shapes, SHA-256 of the body). The body holds one `key v1 … vk` line per
//! tensor row, word vector and author vector, followed by the graph as
//! `graph-node id` and `graph-edge u v` lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::graph::{NodeMeta, SocialGraph};
use crate::model::{AuthorInput, AuthorSource, Model, ModelConfig, Variant};
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::text::{Vocab, WordEmbeddings};
use crate::train::TrainConfig;

const MAGIC: &str = "socgat-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub schema_version: u32,
    pub model: ModelConfig,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub frequency: Option<Vec<f64>>,
    /// Trainable author ids, in parameter-row order.
    #[serde(default)]
    pub author_ids: Vec<String>,
    pub word_dim: usize,
    pub author_dim: usize,
    pub manifest: BTreeMap<String, Vec<usize>>,
    pub content_sha256: String,
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || id.chars().any(char::is_whitespace) {
        return Err(Error::Invalid(format!("id `{id}` cannot be stored: empty or contains whitespace")));
    }
    Ok(())
}

fn row_line(out: &mut String, key: &str, values: &[f64]) {
    out.push_str(key);
    for v in values {
        let _ = write!(out, " {v}");
    }
    out.push('\n');
}

fn table_lines(out: &mut String, prefix: &str, t: &EmbeddingTable) -> Result<()> {
    for (i, id) in t.ids().iter().enumerate() {
        check_id(id)?;
        row_line(out, &format!("{prefix}:{id}"), t.row(i));
    }
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `model` (and the training configuration that produced it).
pub fn save_checkpoint(model: &Model, train: Option<&TrainConfig>, path: &Path) -> Result<String> {
    if !model.is_trained() {
        return Err(Error::State("refusing to checkpoint an untrained model".into()));
    }
    let mut body = String::new();
    for id in model.store.ids() {
        let t = model.store.get(id);
        let name = model.store.name(id);
        if t.rank() == 2 {
            for r in 0..t.rows() {
                row_line(&mut body, &format!("param:{name}:{r}"), t.row(r));
            }
        } else {
            row_line(&mut body, &format!("param:{name}:0"), t.data());
        }
    }
    if model.config.variant != Variant::Frequency {
        for (i, tok) in model.words.vocab.tokens().iter().enumerate() {
            check_id(tok)?;
            row_line(&mut body, &format!("word:{tok}"), model.words.matrix.row(i));
        }
    }
    let mut author_ids = Vec::new();
    let mut author_dim = 0;
    match &model.authors {
        AuthorSource::None => {}
        AuthorSource::Trainable { ids, param, .. } => {
            for id in ids {
                check_id(id)?;
            }
            author_ids = ids.clone();
            author_dim = model.store.get(*param).cols();
        }
        AuthorSource::Frozen(t) => {
            table_lines(&mut body, "author", t)?;
            author_dim = t.dim();
        }
        AuthorSource::Gat { table, graph, .. } => {
            table_lines(&mut body, "author", table)?;
            author_dim = table.dim();
            for id in graph.ids() {
                check_id(id)?;
                let _ = writeln!(body, "graph-node {id}");
            }
            for (u, v) in graph.edges() {
                let _ = writeln!(body, "graph-edge {} {}", graph.id(u), graph.id(v));
            }
        }
    }
    let hash = sha256_hex(body.as_bytes());
    let header = CheckpointHeader {
        schema_version: CHECKPOINT_VERSION,
        model: model.config.clone(),
        train: train.cloned(),
        frequency: model.frequency.as_ref().map(|f| f.probabilities().to_vec()),
        author_ids,
        word_dim: model.words.dim(),
        author_dim,
        manifest: model.store.shapes(),
        content_sha256: hash.clone(),
    };
    let mut text = format!("{MAGIC} v{CHECKPOINT_VERSION}\n");
    text.push_str(&serde_json::to_string(&header)?);
    text.push('\n');
    text.push_str(&body);
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(hash)
}

fn parse_values(path: &Path, line: usize, parts: std::str::SplitWhitespace<'_>) -> Result<Vec<f64>> {
    parts
        .map(|p| p.parse::<f64>().map_err(|_| Error::parse(path, line, format!("bad number `{p}`"))))
        .collect()
}

/// Reads a checkpoint, verifying the content hash and every parameter shape.
pub fn load_checkpoint(path: &Path) -> Result<(Model, CheckpointHeader)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.splitn(3, '\n');
    let magic = lines.next().unwrap_or_default();
    if magic != format!("{MAGIC} v{CHECKPOINT_VERSION}") {
        return Err(Error::parse(path, 1, format!("not a version {CHECKPOINT_VERSION} checkpoint")));
    }
    let header: CheckpointHeader = serde_json::from_str(lines.next().unwrap_or_default())
        .map_err(|e| Error::parse(path, 2, e.to_string()))?;
    let body = lines.next().unwrap_or_default();
    if sha256_hex(body.as_bytes()) != header.content_sha256 {
        return Err(Error::Invalid(format!("{}: content hash mismatch", path.display())));
    }
    if header.model.variant == Variant::Frequency {
        let probs = header
            .frequency
            .clone()
            .ok_or_else(|| Error::Invalid("FREQUENCY checkpoint without frequencies".into()))?;
        let mut model = Model::frequency(header.model.task, &[0])?;
        model.frequency = Some(crate::model::FrequencySampler::from_probabilities(probs)?);
        return Ok((model, header));
    }

    let mut params: BTreeMap<String, Vec<(usize, Vec<f64>)>> = BTreeMap::new();
    let mut vocab_tokens: Vec<String> = Vec::new();
    let mut word_rows: Vec<f64> = Vec::new();
    let mut authors = EmbeddingTable::new(header.author_dim.max(1));
    let mut nodes: BTreeMap<String, NodeMeta> = BTreeMap::new();
    let mut edges: Vec<(String, String)> = Vec::new();
    for (k, line) in body.lines().enumerate() {
        let lineno = k + 3;
        let mut parts = line.split_whitespace();
        let Some(key) = parts.next() else { continue };
        if key == "graph-node" {
            let id = parts.next().ok_or_else(|| Error::parse(path, lineno, "missing node id"))?;
            nodes.insert(id.to_string(), NodeMeta::default());
        } else if key == "graph-edge" {
            let (Some(u), Some(v)) = (parts.next(), parts.next()) else {
                return Err(Error::parse(path, lineno, "edge needs two ids"));
            };
            edges.push((u.to_string(), v.to_string()));
        } else if let Some(rest) = key.strip_prefix("param:") {
            let (name, row) = rest
                .rsplit_once(':')
                .ok_or_else(|| Error::parse(path, lineno, "parameter row without index"))?;
            let row: usize = row.parse().map_err(|_| Error::parse(path, lineno, "bad row index"))?;
            params
                .entry(name.to_string())
                .or_default()
                .push((row, parse_values(path, lineno, parts)?));
        } else if let Some(tok) = key.strip_prefix("word:") {
            let v = parse_values(path, lineno, parts)?;
            if v.len() != header.word_dim {
                return Err(Error::parse(path, lineno, "word vector dimension differs from header"));
            }
            vocab_tokens.push(tok.to_string());
            word_rows.extend(v);
        } else if let Some(id) = key.strip_prefix("author:") {
            let v = parse_values(path, lineno, parts)?;
            authors.insert(id, &v).map_err(|_| Error::parse(path, lineno, "author vector dimension differs"))?;
        } else {
            return Err(Error::parse(path, lineno, format!("unknown record `{key}`")));
        }
    }

    let mut vocab = Vocab::new();
    for (i, tok) in vocab_tokens.iter().enumerate() {
        if vocab.add(tok) != i {
            return Err(Error::Invalid("checkpoint vocabulary is out of order".into()));
        }
    }
    let words = WordEmbeddings {
        matrix: Tensor::matrix(vocab.len(), header.word_dim, word_rows)?,
        vocab,
    };
    let input = match header.model.variant {
        Variant::Ling => AuthorInput::None,
        Variant::LingRandom => AuthorInput::Random {
            ids: header.author_ids.clone(),
            dim: header.author_dim,
        },
        Variant::LingPv | Variant::LingN2v => AuthorInput::Table(authors),
        Variant::LingGat => AuthorInput::Graph {
            table: authors,
            graph: SocialGraph::from_parts(nodes, &edges)?,
        },
        Variant::Frequency => unreachable!("handled above"),
    };
    let mut model = Model::new(header.model.clone(), words, input, &mut Rng::new(0))?;
    if model.store.shapes() != header.manifest {
        return Err(Error::Invalid("checkpoint manifest does not match the configured architecture".into()));
    }
    for id in model.store.ids().collect::<Vec<_>>() {
        let name = model.store.name(id).to_string();
        let shape = model.store.get(id).shape().to_vec();
        let mut rows = params
            .remove(&name)
            .ok_or_else(|| Error::Invalid(format!("checkpoint lacks parameter `{name}`")))?;
        rows.sort_by_key(|r| r.0);
        let data: Vec<f64> = rows.into_iter().flat_map(|r| r.1).collect();
        let t = Tensor::new(shape, data).map_err(|_| Error::Invalid(format!("parameter `{name}` has the wrong size")))?;
        model.store.set(id, t)?;
    }
    if let Some(extra) = params.keys().next() {
        return Err(Error::Invalid(format!("checkpoint has unknown parameter `{extra}`")));
    }
    model.mark_trained();
    Ok((model, header))
}
