//! The six model variants and the two-layer fusion classifier.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::embed::{random_author_embeddings, EmbeddingTable};
use crate::error::{Error, Result};
use crate::gat::{attention_record, AttentionRecord, GatLayer, Neighborhood};
use crate::graph::SocialGraph;
use crate::params::{Binding, ParamId, ParamKind, ParamStore};
use crate::rng::Rng;
use crate::tape::{softmax_values, Tape, Var};
use crate::tensor::Tensor;
use crate::text::{LabeledExample, LstmParams, Task, WordEmbeddings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Variant {
    Frequency,
    Ling,
    LingRandom,
    LingPv,
    LingN2v,
    LingGat,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Frequency,
        Variant::Ling,
        Variant::LingRandom,
        Variant::LingPv,
        Variant::LingN2v,
        Variant::LingGat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Frequency => "FREQUENCY",
            Variant::Ling => "LING",
            Variant::LingRandom => "LING_RANDOM",
            Variant::LingPv => "LING_PV",
            Variant::LingN2v => "LING_N2V",
            Variant::LingGat => "LING_GAT",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    /// Accepts `LING_GAT`, `ling+gat`, `ling-gat` and similar spellings.
    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .map(|c| if c == '+' || c == '-' { '_' } else { c.to_ascii_uppercase() })
            .collect();
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == norm)
            .ok_or_else(|| Error::Invalid(format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub task: Task,
    pub text_hidden: usize,
    pub classifier_hidden: usize,
    /// Per-head GAT output size d'.
    pub gat_hidden: usize,
    pub gat_heads: usize,
}

impl ModelConfig {
    pub fn new(variant: Variant, task: Task) -> Self {
        ModelConfig {
            variant,
            task,
            text_hidden: 50,
            classifier_hidden: 50,
            gat_hidden: 50,
            gat_heads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: usize,
    pub probabilities: Vec<f64>,
}

impl Prediction {
    /// Argmax with ties going to the lowest class index.
    pub fn from_probabilities(probabilities: Vec<f64>) -> Self {
        let mut class = 0;
        for (i, p) in probabilities.iter().enumerate() {
            if *p > probabilities[class] {
                class = i;
            }
        }
        Prediction { class, probabilities }
    }
}

/// Classifier weights of `softmax(W2 · relu(W1 · (l ‖ s)))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classifier {
    pub w1: ParamId,
    pub w2: ParamId,
}

impl Classifier {
    /// Uniform in `±1/sqrt(fan_in)` per layer.
    pub fn new(store: &mut ParamStore, input: usize, hidden: usize, classes: usize, rng: &mut Rng) -> Result<Self> {
        let w1 = store.add_uniform("clf.w1", &[input, hidden], 1.0 / (input as f64).sqrt(), ParamKind::Weight, rng)?;
        let w2 = store.add_uniform("clf.w2", &[hidden, classes], 1.0 / (hidden as f64).sqrt(), ParamKind::Weight, rng)?;
        Ok(Classifier { w1, w2 })
    }

    /// Logits for input `x`; dropout at rate `dropout` is applied to `x` and
    /// to the hidden activation when `training`.
    pub fn logits(
        &self,
        tape: &mut Tape,
        bind: &mut Binding,
        store: &ParamStore,
        x: Var,
        dropout: f64,
        training: bool,
        rng: &mut Rng,
    ) -> Result<Var> {
        let w1 = bind.var(tape, store, self.w1);
        let w2 = bind.var(tape, store, self.w2);
        let x = tape.dropout(x, dropout, training, rng)?;
        let h = tape.matmul(x, w1)?;
        let h = tape.relu(h)?;
        let h = tape.dropout(h, dropout, training, rng)?;
        tape.matmul(h, w2)
    }
}

/// Inference-time fusion: `softmax(W2 · relu(W1 · (l ‖ s)))`, or `l` alone
/// when `s` is absent.
pub fn fuse_and_classify(l: &Tensor, s: Option<&Tensor>, w1: &Tensor, w2: &Tensor) -> Result<Prediction> {
    let mut tape = Tape::new();
    let mut x = tape.constant(l.clone());
    if let Some(s) = s {
        let sv = tape.constant(s.clone());
        x = tape.concat(x, sv)?;
    }
    let w1 = tape.constant(w1.clone());
    let w2 = tape.constant(w2.clone());
    let h = tape.matmul(x, w1)?;
    let h = tape.relu(h)?;
    let logits = tape.matmul(h, w2)?;
    Ok(Prediction::from_probabilities(softmax_values(tape.value(logits).data())))
}

/// Draws classes i.i.d. from the empirical training label distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySampler {
    probabilities: Vec<f64>,
}

impl FrequencySampler {
    pub fn from_probabilities(probabilities: Vec<f64>) -> Result<Self> {
        let total: f64 = probabilities.iter().sum();
        if probabilities.is_empty() || probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("not a probability vector: {probabilities:?}")));
        }
        Ok(FrequencySampler { probabilities })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn sample(&self, rng: &mut Rng) -> usize {
        rng.weighted_index(&self.probabilities)
    }
}

pub fn frequency_baseline(train_labels: &[usize], classes: usize) -> Result<FrequencySampler> {
    if train_labels.is_empty() {
        return Err(Error::Empty("frequency baseline needs training labels".into()));
    }
    let mut counts = vec![0.0; classes];
    for &l in train_labels {
        if l >= classes {
            return Err(Error::Index {
                what: "label",
                index: l,
                size: classes,
            });
        }
        counts[l] += 1.0;
    }
    let n = train_labels.len() as f64;
    Ok(FrequencySampler {
        probabilities: counts.into_iter().map(|c| c / n).collect(),
    })
}

/// Where the author vector `s` comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum AuthorSource {
    None,
    /// Random vectors updated during training; rows of a parameter matrix.
    Trainable { ids: Vec<String>, index: HashMap<String, usize>, param: ParamId },
    /// Pretrained, never updated (paragraph vectors or node embeddings).
    Frozen(EmbeddingTable),
    Gat { table: EmbeddingTable, graph: SocialGraph, layer: GatLayer },
}

/// Author data supplied when building a model.
pub enum AuthorInput {
    None,
    Random { ids: Vec<String>, dim: usize },
    Table(EmbeddingTable),
    Graph { table: EmbeddingTable, graph: SocialGraph },
}

/// An example reduced to what the forward pass needs.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub token_ids: Vec<usize>,
    pub label: usize,
    pub author: AuthorSlot,
}

#[derive(Debug, Clone)]
pub enum AuthorSlot {
    None,
    Row(usize),
    Vector(Arc<Tensor>),
    Neighborhood(Arc<Neighborhood>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub words: WordEmbeddings,
    pub lstm: Option<LstmParams>,
    pub classifier: Option<Classifier>,
    pub authors: AuthorSource,
    pub frequency: Option<FrequencySampler>,
    trained: bool,
}

impl Model {
    /// A freshly initialized model. FREQUENCY models are built with
    /// [`Model::frequency`] instead.
    pub fn new(config: ModelConfig, words: WordEmbeddings, authors: AuthorInput, rng: &mut Rng) -> Result<Self> {
        let v = config.variant;
        if v == Variant::Frequency {
            return Err(Error::Invalid("FREQUENCY models are fitted with Model::frequency".into()));
        }
        let mut store = ParamStore::new();
        let lstm = LstmParams::new(&mut store, "lstm", &words, config.text_hidden, rng)?;
        let authors = match (v, authors) {
            (Variant::Ling, _) => AuthorSource::None,
            (Variant::LingRandom, AuthorInput::Random { ids, dim }) => {
                let table = random_author_embeddings(ids.iter().cloned(), dim, rng);
                let rows = table.len();
                if rows == 0 {
                    return Err(Error::Empty("no authors for random embeddings".into()));
                }
                let param = store.add("authors", Tensor::matrix(rows, dim, table.data().to_vec())?, ParamKind::Embedding)?;
                let index = table.ids().iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
                AuthorSource::Trainable {
                    ids: table.ids().to_vec(),
                    index,
                    param,
                }
            }
            (Variant::LingPv | Variant::LingN2v, AuthorInput::Table(t)) => {
                if t.is_empty() {
                    return Err(Error::Empty("author embedding table is empty".into()));
                }
                AuthorSource::Frozen(t)
            }
            (Variant::LingGat, AuthorInput::Graph { table, graph }) => {
                if table.is_empty() {
                    return Err(Error::Empty("author embedding table is empty".into()));
                }
                let layer = GatLayer::new(&mut store, "gat", table.dim(), config.gat_hidden, config.gat_heads, rng)?;
                AuthorSource::Gat { table, graph, layer }
            }
            (v, _) => return Err(Error::Invalid(format!("author input does not match variant {v}"))),
        };
        let author_dim = match &authors {
            AuthorSource::None => 0,
            AuthorSource::Trainable { param, .. } => store.get(*param).cols(),
            AuthorSource::Frozen(t) => t.dim(),
            AuthorSource::Gat { layer, .. } => layer.output_dim(),
        };
        let classifier = Classifier::new(
            &mut store,
            lstm.output_dim() + author_dim,
            config.classifier_hidden,
            config.task.num_classes(),
            rng,
        )?;
        Ok(Model {
            config,
            store,
            words,
            lstm: Some(lstm),
            classifier: Some(classifier),
            authors,
            frequency: None,
            trained: false,
        })
    }

    pub fn frequency(task: Task, train_labels: &[usize]) -> Result<Self> {
        Ok(Model {
            config: ModelConfig::new(Variant::Frequency, task),
            store: ParamStore::new(),
            words: WordEmbeddings {
                vocab: crate::text::Vocab::new(),
                matrix: Tensor::zeros(&[crate::text::Vocab::new().len(), 1]),
            },
            lstm: None,
            classifier: None,
            authors: AuthorSource::None,
            frequency: Some(frequency_baseline(train_labels, task.num_classes())?),
            trained: true,
        })
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn mark_trained(&mut self) {
        self.trained = true;
    }

    /// Classifier input size: text vector plus author vector.
    pub fn classifier_input_dim(&self) -> usize {
        self.classifier.map_or(0, |c| self.store.get(c.w1).rows())
    }

    pub fn prepare(&self, examples: &[LabeledExample]) -> Result<Vec<Prepared>> {
        let mut cache: HashMap<&str, AuthorSlot> = HashMap::new();
        let mut centroid: Option<Arc<Tensor>> = None;
        let mut out = Vec::with_capacity(examples.len());
        for ex in examples {
            if ex.label >= self.config.task.num_classes() {
                return Err(Error::Index {
                    what: "label",
                    index: ex.label,
                    size: self.config.task.num_classes(),
                });
            }
            let author = match cache.get(ex.author.as_str()) {
                Some(slot) => slot.clone(),
                None => {
                    let slot = self.author_slot(&ex.author, &mut centroid)?;
                    cache.insert(&ex.author, slot.clone());
                    slot
                }
            };
            out.push(Prepared {
                token_ids: self.words.vocab.encode(&ex.tokens),
                label: ex.label,
                author,
            });
        }
        Ok(out)
    }

    fn author_slot(&self, author: &str, centroid: &mut Option<Arc<Tensor>>) -> Result<AuthorSlot> {
        Ok(match &self.authors {
            AuthorSource::None => AuthorSlot::None,
            AuthorSource::Trainable { index, param, .. } => match index.get(author) {
                Some(&r) => AuthorSlot::Row(r),
                None => {
                    let c = centroid.get_or_insert_with(|| Arc::new(column_mean(self.store.get(*param))));
                    AuthorSlot::Vector(c.clone())
                }
            },
            AuthorSource::Frozen(t) => match t.get(author) {
                Some(v) => AuthorSlot::Vector(Arc::new(Tensor::vector(v.to_vec()))),
                None => {
                    if centroid.is_none() {
                        *centroid = Some(Arc::new(Tensor::vector(t.centroid()?)));
                    }
                    AuthorSlot::Vector(centroid.clone().expect("set above"))
                }
            },
            AuthorSource::Gat { table, graph, .. } => {
                AuthorSlot::Neighborhood(Arc::new(Neighborhood::from_graph(graph, table, author)?))
            }
        })
    }

    /// Class logits for one prepared example, plus GAT attention variables.
    pub fn forward(
        &self,
        tape: &mut Tape,
        bind: &mut Binding,
        ex: &Prepared,
        dropout: f64,
        training: bool,
        rng: &mut Rng,
    ) -> Result<(Var, Vec<Var>)> {
        let (lstm, clf) = match (&self.lstm, &self.classifier) {
            (Some(l), Some(c)) => (l, c),
            _ => return Err(Error::State(format!("{} has no neural forward pass", self.config.variant))),
        };
        let l = lstm.encode(tape, bind, &self.store, &self.words, &ex.token_ids)?;
        let mut alphas = Vec::new();
        let s = match (&ex.author, &self.authors) {
            (AuthorSlot::None, AuthorSource::None) => None,
            (AuthorSlot::Row(r), AuthorSource::Trainable { param, .. }) => Some(bind.row(tape, &self.store, *param, *r)?),
            (AuthorSlot::Vector(v), _) => Some(tape.constant((**v).clone())),
            (AuthorSlot::Neighborhood(nb), AuthorSource::Gat { layer, .. }) => {
                let h = tape.constant(nb.vectors.clone());
                let (out, a) = layer.forward(tape, bind, &self.store, h)?;
                alphas = a;
                Some(out)
            }
            _ => return Err(Error::State("prepared example does not match the model's author source".into())),
        };
        let x = match s {
            Some(s) => tape.concat(l, s)?,
            None => l,
        };
        let logits = clf.logits(tape, bind, &self.store, x, dropout, training, rng)?;
        Ok((logits, alphas))
    }

    fn predict_prepared(&self, ex: &Prepared, rng: &mut Rng) -> Result<Prediction> {
        if let Some(f) = &self.frequency {
            let class = f.sample(rng);
            let mut probabilities = vec![0.0; f.probabilities().len()];
            probabilities[class] = 1.0;
            return Ok(Prediction { class, probabilities });
        }
        let mut tape = Tape::new();
        let mut bind = Binding::frozen(&self.store);
        let (logits, _) = self.forward(&mut tape, &mut bind, ex, 0.0, false, rng)?;
        Ok(Prediction::from_probabilities(softmax_values(tape.value(logits).data())))
    }

    /// Predictions for prepared examples. Only the FREQUENCY baseline draws
    /// from `rng`; it reports the sampled class with probability one.
    pub fn predict_batch(&self, examples: &[Prepared], rng: &mut Rng) -> Result<Vec<Prediction>> {
        if !self.trained {
            return Err(Error::State("model has not been trained".into()));
        }
        examples.iter().map(|e| self.predict_prepared(e, rng)).collect()
    }

    pub fn predict(&self, example: &LabeledExample, rng: &mut Rng) -> Result<Prediction> {
        let prepared = self.prepare(std::slice::from_ref(example))?;
        Ok(self.predict_batch(&prepared, rng)?.remove(0))
    }

    /// The attention record for `author` under the current parameters.
    pub fn attention(&self, author: &str) -> Result<AttentionRecord> {
        let AuthorSource::Gat { table, graph, layer } = &self.authors else {
            return Err(Error::Invalid(format!(
                "attention is only defined for LING_GAT, not {}",
                self.config.variant
            )));
        };
        let nb = Neighborhood::from_graph(graph, table, author)?;
        let mut tape = Tape::new();
        let mut bind = Binding::frozen(&self.store);
        let h = tape.constant(nb.vectors.clone());
        let (_, alphas) = layer.forward(&mut tape, &mut bind, &self.store, h)?;
        let weights: Vec<Vec<f64>> = alphas.iter().map(|a| tape.value(*a).data().to_vec()).collect();
        Ok(attention_record(&nb, &weights))
    }

    /// Current author vectors of a trainable table, keyed by id.
    pub fn author_vectors(&self) -> Option<BTreeMap<String, Vec<f64>>> {
        match &self.authors {
            AuthorSource::Trainable { ids, param, .. } => {
                let m = self.store.get(*param);
                Some(ids.iter().enumerate().map(|(i, id)| (id.clone(), m.row(i).to_vec())).collect())
            }
            AuthorSource::Frozen(t) | AuthorSource::Gat { table: t, .. } => {
                Some(t.ids().iter().enumerate().map(|(i, id)| (id.clone(), t.row(i).to_vec())).collect())
            }
            AuthorSource::None => None,
        }
    }
}

fn column_mean(m: &Tensor) -> Tensor {
    let mut c = vec![0.0; m.cols()];
    for r in 0..m.rows() {
        for (a, v) in c.iter_mut().zip(m.row(r)) {
            *a += v;
        }
    }
    let n = m.rows() as f64;
    Tensor::vector(c.into_iter().map(|x| x / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::check_gradients;
    use crate::graph::NodeMeta;

    fn words(rng: &mut Rng) -> WordEmbeddings {
        let mut t = EmbeddingTable::new(4);
        for i in 0..6 {
            let v: Vec<f64> = (0..4).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
            t.insert(format!("w{i}"), &v).unwrap();
        }
        WordEmbeddings::from_table(&t).unwrap()
    }

    fn small(variant: Variant) -> ModelConfig {
        ModelConfig {
            text_hidden: 3,
            classifier_hidden: 4,
            gat_hidden: 2,
            gat_heads: 2,
            ..ModelConfig::new(variant, Task::Sentiment)
        }
    }

    fn graph_input(rng: &mut Rng) -> AuthorInput {
        let ids = ["a", "b", "c", "d"];
        let nodes: BTreeMap<String, NodeMeta> = ids.iter().map(|i| (i.to_string(), NodeMeta::default())).collect();
        let edges = vec![("a".to_string(), "b".to_string()), ("a".to_string(), "c".to_string())];
        let graph = SocialGraph::from_parts(nodes, &edges).unwrap();
        let mut table = EmbeddingTable::new(5);
        for id in ids {
            let v: Vec<f64> = (0..5).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
            table.insert(id, &v).unwrap();
        }
        AuthorInput::Graph { table, graph }
    }

    #[test]
    fn zero_weights_give_uniform_probabilities() {
        let p = fuse_and_classify(
            &Tensor::vector(vec![0.3, -1.0]),
            Some(&Tensor::vector(vec![2.0])),
            &Tensor::zeros(&[3, 4]),
            &Tensor::zeros(&[4, 3]),
        )
        .unwrap();
        assert!(p.probabilities.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(p.class, 0);
    }

    #[test]
    fn hand_set_two_by_two() {
        let w1 = Tensor::from_rows(&[&[2.0, -1.0]]).unwrap();
        let w2 = Tensor::from_rows(&[&[1.0, -1.0], &[0.5, 3.0]]).unwrap();
        let p = fuse_and_classify(&Tensor::vector(vec![0.7]), None, &w1, &w2).unwrap();
        // hidden = relu([1.4, -0.7]) = [1.4, 0]; logits = [1.4, -1.4].
        let z = 1.4f64.exp() + (-1.4f64).exp();
        assert!((p.probabilities[0] - 1.4f64.exp() / z).abs() < 1e-12);
        assert!((p.probabilities[1] - (-1.4f64).exp() / z).abs() < 1e-12);
        assert!(fuse_and_classify(&Tensor::vector(vec![0.7, 1.0]), None, &w1, &w2).is_err());
    }

    #[test]
    fn ties_go_to_lowest_class() {
        assert_eq!(Prediction::from_probabilities(vec![0.2, 0.4, 0.4]).class, 1);
    }

    #[test]
    fn classifier_shapes_follow_input_dims() {
        let mut rng = Rng::new(1);
        let w = words(&mut rng);
        let mut table = EmbeddingTable::new(200);
        table.insert("a", &[0.0; 200]).unwrap();
        let cfg = ModelConfig::new(Variant::LingN2v, Task::Sentiment);
        let m = Model::new(cfg, w.clone(), AuthorInput::Table(table), &mut rng).unwrap();
        let c = m.classifier.unwrap();
        assert_eq!(m.store.get(c.w1).shape(), &[300, 50]);
        assert_eq!(m.store.get(c.w2).shape(), &[50, 3]);
        let ling = Model::new(ModelConfig::new(Variant::Ling, Task::Hate), w, AuthorInput::None, &mut rng).unwrap();
        assert_eq!(ling.classifier_input_dim(), 100);
        assert_eq!(ling.store.get(ling.classifier.unwrap().w2).shape(), &[50, 2]);
    }

    #[test]
    fn untrained_model_refuses_to_predict() {
        let mut rng = Rng::new(2);
        let m = Model::new(small(Variant::Ling), words(&mut rng), AuthorInput::None, &mut rng).unwrap();
        let ex = LabeledExample::new("1", "a", 0, "w1 w2");
        assert!(matches!(m.predict(&ex, &mut rng), Err(Error::State(_))));
    }

    #[test]
    fn gat_unknown_author_prediction_is_well_defined() {
        let mut rng = Rng::new(3);
        let input = graph_input(&mut rng);
        let mut m = Model::new(small(Variant::LingGat), words(&mut rng), input, &mut rng).unwrap();
        m.mark_trained();
        let p = m.predict(&LabeledExample::new("1", "nobody", 1, "w0 w5"), &mut rng).unwrap();
        assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let rec = m.attention("a").unwrap();
        assert_eq!(rec.heads.len(), 2);
        assert_eq!(rec.heads[0].len(), 3);
    }

    #[test]
    fn frequency_sampler_matches_targets() {
        let labels: Vec<usize> = (0..1000).map(|i| if i < 356 { 0 } else if i < 544 { 1 } else { 2 }).collect();
        let f = frequency_baseline(&labels, 3).unwrap();
        let mut rng = Rng::new(4);
        let mut counts = [0usize; 3];
        for _ in 0..100_000 {
            counts[f.sample(&mut rng)] += 1;
        }
        for (c, t) in counts.iter().zip([0.356, 0.188, 0.456]) {
            assert!((*c as f64 / 1e5 - t).abs() < 0.01);
        }
        let single = frequency_baseline(&[2, 2, 2], 3).unwrap();
        assert!((0..50).all(|_| single.sample(&mut rng) == 2));
        assert!(frequency_baseline(&[], 3).is_err());
    }

    #[test]
    fn variant_spellings() {
        assert_eq!("LING+GAT".parse::<Variant>().unwrap(), Variant::LingGat);
        assert_eq!("ling_n2v".parse::<Variant>().unwrap(), Variant::LingN2v);
        assert!("GAT".parse::<Variant>().is_err());
    }

    /// Every parameter of every neural variant against finite differences.
    #[test]
    fn end_to_end_gradients() {
        for variant in [Variant::Ling, Variant::LingRandom, Variant::LingN2v, Variant::LingGat] {
            let mut rng = Rng::new(10);
            let w = words(&mut rng);
            let input = match variant {
                Variant::Ling => AuthorInput::None,
                Variant::LingRandom => AuthorInput::Random {
                    ids: vec!["a".into(), "b".into()],
                    dim: 5,
                },
                Variant::LingN2v => {
                    let AuthorInput::Graph { table, .. } = graph_input(&mut rng) else { unreachable!() };
                    AuthorInput::Table(table)
                }
                _ => graph_input(&mut rng),
            };
            let m = Model::new(small(variant), w, input, &mut rng).unwrap();
            let ex = m.prepare(&[LabeledExample::new("1", "a", 2, "w0 #tag w3")]).unwrap().remove(0);
            for id in m.store.ids().collect::<Vec<_>>() {
                let err = check_gradients(
                    |tape, x| {
                        let mut bind = Binding::new(&m.store);
                        bind.set(id, x);
                        let (logits, _) = m.forward(tape, &mut bind, &ex, 0.0, true, &mut Rng::new(0))?;
                        tape.cross_entropy(logits, ex.label)
                    },
                    m.store.get(id),
                    1e-5,
                )
                .unwrap();
                assert!(err < 1e-4, "{variant} {}: {err}", m.store.name(id));
            }
        }
    }
}
