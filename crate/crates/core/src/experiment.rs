//! End-to-end runs of one variant on an in-memory dataset.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::embed::{node2vec, train_pv_dbow, EmbeddingTable, SkipgramConfig, WalkConfig};
use crate::error::{Error, Result};
use crate::graph::SocialGraph;
use crate::model::{AuthorInput, Model, ModelConfig, Variant};
use crate::rng::Rng;
use crate::synth::{PlantedDataset, SynthDataset};
use crate::text::{preprocess, LabeledCorpus, WordEmbeddings, DEFAULT_HIDDEN};
use crate::train::{train_model, RunResult, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub text_hidden: usize,
    pub classifier_hidden: usize,
    pub gat_hidden: usize,
    pub gat_heads: usize,
    /// Dimension of LING_RANDOM author vectors.
    pub random_dim: usize,
    pub train: TrainConfig,
    pub walk: WalkConfig,
    pub n2v: SkipgramConfig,
    pub pv: SkipgramConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            text_hidden: DEFAULT_HIDDEN,
            classifier_hidden: 50,
            gat_hidden: 50,
            gat_heads: 1,
            random_dim: 200,
            train: TrainConfig::default(),
            walk: WalkConfig::default(),
            n2v: SkipgramConfig::node2vec(),
            pv: SkipgramConfig::paragraph_vector(),
        }
    }
}

impl ExperimentConfig {
    /// Smaller embeddings, walks and epoch budgets for single-core runs on
    /// synthetic data.
    pub fn desk() -> Self {
        ExperimentConfig {
            text_hidden: 16,
            classifier_hidden: 32,
            gat_hidden: 16,
            gat_heads: 1,
            random_dim: 32,
            train: TrainConfig {
                batch_size: 32,
                max_epochs: 12,
                patience: 3,
                ..TrainConfig::default()
            },
            walk: WalkConfig {
                walk_length: 20,
                walks_per_node: 10,
                ..WalkConfig::default()
            },
            n2v: SkipgramConfig {
                dim: 32,
                window: 5,
                epochs: 3,
                ..SkipgramConfig::node2vec()
            },
            pv: SkipgramConfig {
                dim: 32,
                epochs: 10,
                min_count: 1,
                ..SkipgramConfig::paragraph_vector()
            },
        }
    }

    pub fn model_config(&self, variant: Variant, task: crate::text::Task) -> ModelConfig {
        ModelConfig {
            text_hidden: self.text_hidden,
            classifier_hidden: self.classifier_hidden,
            gat_hidden: self.gat_hidden,
            gat_heads: self.gat_heads,
            ..ModelConfig::new(variant, task)
        }
    }
}

/// Everything a run needs. Author tables are computed once and shared by
/// every seed.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub corpus: LabeledCorpus,
    pub words: WordEmbeddings,
    pub graph: Option<SocialGraph>,
    pub n2v: Option<EmbeddingTable>,
    pub pv: Option<EmbeddingTable>,
}

impl Dataset {
    pub fn new(corpus: LabeledCorpus, words: &EmbeddingTable) -> Result<Self> {
        Ok(Dataset {
            corpus,
            words: WordEmbeddings::from_table(words)?,
            graph: None,
            n2v: None,
            pv: None,
        })
    }

    /// Builds the dataset and pretrains node embeddings (and paragraph
    /// vectors when `with_pv`).
    pub fn from_synth(d: &SynthDataset, cfg: &ExperimentConfig, seed: u64, with_pv: bool) -> Result<Self> {
        let mut out = Dataset::new(d.corpus.clone(), &d.words)?;
        out.n2v = Some(node2vec(&d.graph, &cfg.walk, &cfg.n2v, &mut Rng::derive(seed, 11))?);
        out.graph = Some(d.graph.clone());
        if with_pv {
            let docs: BTreeMap<String, Vec<String>> = d
                .timelines
                .iter()
                .map(|(a, posts)| (a.clone(), posts.iter().flat_map(|p| preprocess(p)).collect()))
                .collect();
            out.pv = Some(train_pv_dbow(&docs, &cfg.pv, &mut Rng::derive(seed, 12))?.table);
        }
        Ok(out)
    }

    /// The planted fixture ships its own author table, used in place of
    /// node embeddings.
    pub fn from_planted(d: &PlantedDataset) -> Result<Self> {
        let mut out = Dataset::new(d.corpus.clone(), &d.words)?;
        out.graph = Some(d.graph.clone());
        out.n2v = Some(d.authors.clone());
        Ok(out)
    }

    pub fn author_input(&self, variant: Variant, cfg: &ExperimentConfig) -> Result<AuthorInput> {
        let need = |t: &Option<EmbeddingTable>, what: &str| {
            t.clone()
                .ok_or_else(|| Error::Invalid(format!("{variant} needs {what} embeddings")))
        };
        Ok(match variant {
            Variant::Frequency | Variant::Ling => AuthorInput::None,
            Variant::LingRandom => AuthorInput::Random {
                ids: self.corpus.authors(),
                dim: cfg.random_dim,
            },
            Variant::LingPv => AuthorInput::Table(need(&self.pv, "paragraph-vector")?),
            Variant::LingN2v => AuthorInput::Table(need(&self.n2v, "node")?),
            Variant::LingGat => AuthorInput::Graph {
                table: need(&self.n2v, "node")?,
                graph: self
                    .graph
                    .clone()
                    .ok_or_else(|| Error::Invalid("LING_GAT needs a social graph".into()))?,
            },
        })
    }

    /// Initializes and trains one model. Initialization draws from stream 0
    /// of `seed`; training uses `seed` as its own seed.
    pub fn run(&self, variant: Variant, cfg: &ExperimentConfig, seed: u64) -> Result<(Model, RunResult)> {
        let train_cfg = TrainConfig {
            seed,
            ..cfg.train.clone()
        };
        let mut model = if variant == Variant::Frequency {
            Model::frequency(self.corpus.task, &[0])?
        } else {
            let input = self.author_input(variant, cfg)?;
            Model::new(
                cfg.model_config(variant, self.corpus.task),
                self.words.clone(),
                input,
                &mut Rng::derive(seed, 0),
            )?
        };
        let result = train_model(&mut model, &self.corpus, &train_cfg)?;
        Ok((model, result))
    }
}

/// Fraction of distinct test-split targets whose informant receives a
/// strictly larger head-averaged attention weight than every other entry.
pub fn planted_recovery(model: &Model, data: &PlantedDataset) -> Result<f64> {
    let targets: std::collections::BTreeSet<&str> = data.corpus.test.iter().map(|e| e.author.as_str()).collect();
    if targets.is_empty() {
        return Err(Error::Empty("no test targets".into()));
    }
    let mut hits = 0usize;
    for t in &targets {
        let record = model.attention(t)?;
        let mut mean: BTreeMap<&str, f64> = BTreeMap::new();
        for head in &record.heads {
            for e in head {
                *mean.entry(e.neighbor.as_str()).or_default() += e.weight / record.heads.len() as f64;
            }
        }
        let informant = data.informant[*t].as_str();
        let w = mean.get(informant).copied().unwrap_or(0.0);
        if mean.iter().all(|(n, &x)| *n == informant || x < w) {
            hits += 1;
        }
    }
    Ok(hits as f64 / targets.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthSpec};

    #[test]
    fn every_variant_runs_on_a_small_synthetic_set() {
        let spec = SynthSpec {
            n_users: 120,
            mean_degree: 4.0,
            seed: 5,
            ..SynthSpec::default()
        };
        let d = generate(&spec).unwrap();
        let mut cfg = ExperimentConfig::desk();
        cfg.train.max_epochs = 1;
        cfg.n2v.epochs = 1;
        cfg.pv.epochs = 1;
        let data = Dataset::from_synth(&d, &cfg, 1, true).unwrap();
        for v in Variant::ALL {
            let (model, r) = data.run(v, &cfg, 3).unwrap();
            assert!(model.is_trained());
            assert!((0.0..=1.0).contains(&r.test_metric), "{v}");
        }
        let (_, a) = data.run(Variant::LingGat, &cfg, 3).unwrap();
        let (_, b) = data.run(Variant::LingGat, &cfg, 3).unwrap();
        assert_eq!(a.test_metric.to_bits(), b.test_metric.to_bits());
        assert_eq!(a.train_loss, b.train_loss);
    }

    #[test]
    fn missing_embeddings_are_reported() {
        let d = generate(&SynthSpec {
            n_users: 60,
            mean_degree: 2.0,
            ..SynthSpec::default()
        })
        .unwrap();
        let data = Dataset::new(d.corpus.clone(), &d.words).unwrap();
        let cfg = ExperimentConfig::desk();
        assert!(data.run(Variant::LingPv, &cfg, 0).is_err());
        assert!(data.run(Variant::LingGat, &cfg, 0).is_err());
    }
}
