//! Synthetic datasets with controlled homophily, plus a planted-attention
//! fixture.
//!
//! Users belong to communities; each community is tied to one class. A
//! user's tweets take the community class with probability `author_signal`
//! and a uniformly chosen other class otherwise. A tweet is informative with
//! probability `text_signal` (it then mixes class-vocabulary tokens into
//! filler) and pure filler otherwise. Users of withheld communities always
//! write filler, so only social information can classify them.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::graph::{self, NodeMeta, RetweetEvent, SocialGraph};
use crate::rng::Rng;
use crate::text::{LabeledCorpus, LabeledExample, Task};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_users: usize,
    pub n_classes: usize,
    pub homophily: f64,
    pub text_signal: f64,
    pub author_signal: f64,
    /// Expected number of retweet edges per user.
    pub mean_degree: f64,
    pub communities_per_class: usize,
    pub withheld_communities: usize,
    pub tweets_per_user: usize,
    pub timeline_posts: usize,
    pub tweet_length: usize,
    pub class_vocab: usize,
    pub filler_vocab: usize,
    pub word_dim: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_users: 2000,
            n_classes: 3,
            homophily: 0.9,
            text_signal: 0.6,
            author_signal: 0.9,
            mean_degree: 8.0,
            communities_per_class: 2,
            withheld_communities: 1,
            tweets_per_user: 2,
            timeline_posts: 4,
            tweet_length: 8,
            class_vocab: 20,
            filler_vocab: 200,
            word_dim: 25,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn task(&self) -> Result<Task> {
        match self.n_classes {
            2 => Ok(Task::Hate),
            3 => Ok(Task::Sentiment),
            k => Err(Error::Invalid(format!("n_classes must be 2 or 3, got {k}"))),
        }
    }

    pub fn communities(&self) -> usize {
        self.n_classes * self.communities_per_class
    }

    pub fn validate(&self) -> Result<()> {
        self.task()?;
        for (name, p) in [
            ("homophily", self.homophily),
            ("text_signal", self.text_signal),
            ("author_signal", self.author_signal),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Invalid(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        for (name, n) in [
            ("communities_per_class", self.communities_per_class),
            ("tweets_per_user", self.tweets_per_user),
            ("tweet_length", self.tweet_length),
            ("class_vocab", self.class_vocab),
            ("filler_vocab", self.filler_vocab),
            ("word_dim", self.word_dim),
        ] {
            if n == 0 {
                return Err(Error::Invalid(format!("{name} must be positive")));
            }
        }
        if self.n_users < 2 * self.communities() {
            return Err(Error::Invalid(format!(
                "n_users must be at least {} (two per community)",
                2 * self.communities()
            )));
        }
        if self.withheld_communities >= self.communities() {
            return Err(Error::Invalid("at least one community must keep its text signal".into()));
        }
        if !(self.mean_degree > 0.0 && self.mean_degree.is_finite()) {
            return Err(Error::Invalid("mean_degree must be positive".into()));
        }
        let max_degree = (self.n_users / self.communities() - 1) as f64;
        if self.mean_degree > max_degree / 2.0 {
            return Err(Error::Invalid(format!(
                "mean_degree {} is too dense for communities of {} users",
                self.mean_degree,
                self.n_users / self.communities()
            )));
        }
        Ok(())
    }

    /// Probability that the tweet-label sets of two users overlap, for users
    /// whose communities have the same class and for users whose communities
    /// have different classes.
    pub fn overlap_probabilities(&self) -> (f64, f64) {
        let k = self.n_classes;
        let q0 = class_distribution(k, 0, self.author_signal);
        let q1 = class_distribution(k, 1, self.author_signal);
        let p0 = label_set_distribution(&q0, self.tweets_per_user);
        let p1 = label_set_distribution(&q1, self.tweets_per_user);
        let overlap = |a: &[f64], b: &[f64]| {
            let mut s = 0.0;
            for (sa, pa) in a.iter().enumerate() {
                for (sb, pb) in b.iter().enumerate() {
                    if sa & sb != 0 {
                        s += pa * pb;
                    }
                }
            }
            s
        };
        (overlap(&p0, &p0), overlap(&p0, &p1))
    }

    /// Expected homophily when a fraction `intra` of edges stays inside a
    /// community and the rest join a uniformly chosen outside user.
    pub fn expected_homophily(&self, intra: f64) -> f64 {
        let (p_same, p_diff) = self.overlap_probabilities();
        let m = self.communities() as f64;
        let rho = (self.communities_per_class as f64 - 1.0) / (m - 1.0);
        intra * p_same + (1.0 - intra) * (rho * p_same + (1.0 - rho) * p_diff)
    }

    /// The intra-community edge fraction whose expected homophily equals the
    /// target. Errors with the feasible range when no fraction in [0, 1]
    /// reaches it.
    pub fn intra_fraction(&self) -> Result<f64> {
        let lo = self.expected_homophily(0.0);
        let hi = self.expected_homophily(1.0);
        let h = self.homophily;
        if h < lo - 1e-12 || h > hi + 1e-12 {
            return Err(Error::Infeasible(format!(
                "homophily {h} is outside the feasible range [{lo:.4}, {hi:.4}] for author_signal {} and {} tweets per user",
                self.author_signal, self.tweets_per_user
            )));
        }
        if hi - lo < 1e-12 {
            return Ok(1.0);
        }
        Ok(((h - lo) / (hi - lo)).clamp(0.0, 1.0))
    }
}

fn class_distribution(k: usize, class: usize, author_signal: f64) -> Vec<f64> {
    (0..k)
        .map(|c| {
            if c == class {
                author_signal
            } else {
                (1.0 - author_signal) / (k - 1) as f64
            }
        })
        .collect()
}

/// Distribution of the set of distinct labels among `t` independent draws,
/// indexed by bitmask, via inclusion-exclusion over subsets.
fn label_set_distribution(q: &[f64], t: usize) -> Vec<f64> {
    let k = q.len();
    let full = 1usize << k;
    let mass = |mask: usize| -> f64 { (0..k).filter(|i| mask >> i & 1 == 1).map(|i| q[i]).sum() };
    let mut out = vec![0.0; full];
    for (s, slot) in out.iter_mut().enumerate().skip(1) {
        let mut a = s;
        let mut total = 0.0;
        loop {
            let sign = if (s.count_ones() - a.count_ones()) % 2 == 0 { 1.0 } else { -1.0 };
            total += sign * mass(a).powi(t as i32);
            if a == 0 {
                break;
            }
            a = (a - 1) & s;
        }
        *slot = total.max(0.0);
    }
    out
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub spec: SynthSpec,
    pub corpus: LabeledCorpus,
    pub events: Vec<RetweetEvent>,
    pub graph: SocialGraph,
    pub words: EmbeddingTable,
    /// Raw past posts per user.
    pub timelines: BTreeMap<String, Vec<String>>,
    pub communities: BTreeMap<String, usize>,
    pub withheld: Vec<usize>,
    pub intra_fraction: f64,
    pub expected_homophily: f64,
    pub measured_homophily: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct GroundTruth {
    schema_version: u32,
    spec: SynthSpec,
    task: Task,
    intra_fraction: f64,
    expected_homophily: f64,
    measured_homophily: f64,
    community_class: Vec<usize>,
    withheld: Vec<usize>,
    communities: BTreeMap<String, usize>,
}

fn class_token(spec: &SynthSpec, class: usize, rng: &mut Rng) -> String {
    (class * spec.class_vocab + rng.below(spec.class_vocab)).to_string()
}

fn filler_token(spec: &SynthSpec, rng: &mut Rng) -> String {
    (spec.n_classes * spec.class_vocab + rng.below(spec.filler_vocab)).to_string()
}

fn tweet_text(spec: &SynthSpec, class: usize, informative: bool, rng: &mut Rng) -> String {
    let mut tokens: Vec<String> = (0..spec.tweet_length)
        .map(|_| {
            if informative && rng.bernoulli(0.5) {
                class_token(spec, class, rng)
            } else {
                filler_token(spec, rng)
            }
        })
        .collect();
    if informative && !tokens.iter().any(|t| t.parse::<usize>().unwrap() < spec.n_classes * spec.class_vocab) {
        let pos = rng.below(tokens.len());
        tokens[pos] = class_token(spec, class, rng);
    }
    tokens.join(" ")
}

fn draw_label(spec: &SynthSpec, class: usize, rng: &mut Rng) -> usize {
    if spec.n_classes == 1 || rng.bernoulli(spec.author_signal) {
        class
    } else {
        let other = rng.below(spec.n_classes - 1);
        if other >= class {
            other + 1
        } else {
            other
        }
    }
}

pub fn user_id(i: usize) -> String {
    format!("u{i:05}")
}

/// Generates a dataset. Deterministic in `spec.seed`.
pub fn generate(spec: &SynthSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let task = spec.task()?;
    let intra = spec.intra_fraction()?;
    let n = spec.n_users;
    let m = spec.communities();
    let community_class: Vec<usize> = (0..m).map(|c| c % spec.n_classes).collect();
    let withheld: Vec<usize> = (m - spec.withheld_communities..m).collect();

    let mut rng_comm = Rng::derive(spec.seed, 1);
    let mut community: Vec<usize> = (0..n).map(|i| i % m).collect();
    rng_comm.shuffle(&mut community);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (u, &c) in community.iter().enumerate() {
        members[c].push(u);
    }

    let mut rng_edges = Rng::derive(spec.seed, 2);
    let target_edges = (n as f64 * spec.mean_degree / 2.0).round() as usize;
    let mut edge_set = std::collections::BTreeSet::new();
    let mut attempts = 0usize;
    while edge_set.len() < target_edges {
        attempts += 1;
        if attempts > 50 * target_edges + 1000 {
            return Err(Error::Infeasible("could not place the requested number of edges".into()));
        }
        let u = rng_edges.below(n);
        let cu = community[u];
        let v = if rng_edges.bernoulli(intra) {
            let own = &members[cu];
            own[rng_edges.below(own.len())]
        } else {
            let outside = n - members[cu].len();
            let mut r = rng_edges.below(outside);
            let mut pick = None;
            for (c, list) in members.iter().enumerate() {
                if c == cu {
                    continue;
                }
                if r < list.len() {
                    pick = Some(list[r]);
                    break;
                }
                r -= list.len();
            }
            pick.expect("index within outside members")
        };
        if u != v {
            edge_set.insert((u.min(v), u.max(v)));
        }
    }
    let mut events: Vec<RetweetEvent> = edge_set
        .iter()
        .map(|&(a, b)| RetweetEvent {
            retweeter: user_id(a),
            retweeted: user_id(b),
        })
        .collect();
    // Retweet direction carries no meaning in the graph; randomize it.
    for ev in &mut events {
        if rng_edges.bernoulli(0.5) {
            std::mem::swap(&mut ev.retweeter, &mut ev.retweeted);
        }
    }

    let mut rng_text = Rng::derive(spec.seed, 3);
    let mut examples = Vec::with_capacity(n * spec.tweets_per_user);
    let mut timelines = BTreeMap::new();
    for u in 0..n {
        let class = community_class[community[u]];
        let signal = if withheld.contains(&community[u]) { 0.0 } else { spec.text_signal };
        for j in 0..spec.tweets_per_user {
            let label = draw_label(spec, class, &mut rng_text);
            let informative = rng_text.bernoulli(signal);
            let text = tweet_text(spec, label, informative, &mut rng_text);
            examples.push(LabeledExample::new(format!("{}_{j}", user_id(u)), user_id(u), label, text));
        }
        let posts: Vec<String> = (0..spec.timeline_posts)
            .map(|_| {
                let label = draw_label(spec, class, &mut rng_text);
                let informative = rng_text.bernoulli(signal);
                tweet_text(spec, label, informative, &mut rng_text)
            })
            .collect();
        if !posts.is_empty() {
            timelines.insert(user_id(u), posts);
        }
    }
    let corpus = LabeledCorpus::from_examples(task, examples, &mut Rng::derive(spec.seed, 4));

    let mut rng_words = Rng::derive(spec.seed, 5);
    let mut words = EmbeddingTable::new(spec.word_dim);
    let mut v = vec![0.0; spec.word_dim];
    for tok in 0..spec.n_classes * spec.class_vocab + spec.filler_vocab {
        v.iter_mut().for_each(|x| *x = rng_words.uniform_in(-1.0, 1.0));
        words.insert(tok.to_string(), &v)?;
    }

    let graph = graph::build_social_graph(&corpus.author_labels(), events.iter().cloned(), graph::DEFAULT_EXTERNAL_THRESHOLD)?;
    let measured = graph::homophily(&graph).unwrap_or(0.0);
    let communities = (0..n).map(|u| (user_id(u), community[u])).collect();
    Ok(SynthDataset {
        spec: spec.clone(),
        corpus,
        events,
        graph,
        words,
        timelines,
        communities,
        withheld,
        intra_fraction: intra,
        expected_homophily: spec.expected_homophily(intra),
        measured_homophily: measured,
    })
}

fn write_lines<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, &item)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

impl SynthDataset {
    pub fn task(&self) -> Task {
        self.corpus.task
    }

    /// Writes `corpus.jsonl`, `retweets.jsonl`, `timelines.jsonl`,
    /// `words.txt` and `communities.json` into `dir`. Returns the paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let corpus = dir.join("corpus.jsonl");
        self.corpus.save(&corpus)?;
        let retweets = dir.join("retweets.jsonl");
        graph::write_retweet_events(&retweets, &self.events)?;
        let timelines = dir.join("timelines.jsonl");
        #[derive(Serialize)]
        struct Post<'a> {
            author: &'a str,
            text: &'a str,
        }
        write_lines(
            &timelines,
            self.timelines
                .iter()
                .flat_map(|(a, posts)| posts.iter().map(move |t| Post { author: a, text: t })),
        )?;
        let words = dir.join("words.txt");
        self.words.save(&words)?;
        let truth = dir.join("communities.json");
        let gt = GroundTruth {
            schema_version: 1,
            spec: self.spec.clone(),
            task: self.task(),
            intra_fraction: self.intra_fraction,
            expected_homophily: self.expected_homophily,
            measured_homophily: self.measured_homophily,
            community_class: (0..self.spec.communities()).map(|c| c % self.spec.n_classes).collect(),
            withheld: self.withheld.clone(),
            communities: self.communities.clone(),
        };
        let text = serde_json::to_string_pretty(&gt)?;
        fs::write(&truth, text).map_err(|e| Error::io(&truth, e))?;
        Ok(vec![corpus, retweets, timelines, words, truth])
    }
}

/// Planted-attention fixture: each target is linked to one informant, whose
/// vector carries the target's class and a shared marker, and to several
/// distractors, whose vectors carry a random class and no marker. Targets
/// write filler only and their own vectors are noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedSpec {
    pub n_targets: usize,
    pub n_classes: usize,
    pub distractors_per_target: usize,
    pub distractor_pool: usize,
    pub dim: usize,
    pub noise: f64,
    pub tweets_per_target: usize,
    pub tweet_length: usize,
    pub filler_vocab: usize,
    pub word_dim: usize,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            n_targets: 400,
            n_classes: 3,
            distractors_per_target: 6,
            distractor_pool: 400,
            dim: 16,
            noise: 0.3,
            tweets_per_target: 2,
            tweet_length: 6,
            filler_vocab: 50,
            word_dim: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedDataset {
    pub spec: PlantedSpec,
    pub corpus: LabeledCorpus,
    pub graph: SocialGraph,
    pub authors: EmbeddingTable,
    pub words: EmbeddingTable,
    /// Target id to its predictive neighbor.
    pub informant: BTreeMap<String, String>,
}

pub fn generate_planted(spec: &PlantedSpec) -> Result<PlantedDataset> {
    let task = match spec.n_classes {
        2 => Task::Hate,
        3 => Task::Sentiment,
        k => return Err(Error::Invalid(format!("n_classes must be 2 or 3, got {k}"))),
    };
    if spec.distractors_per_target < 5 {
        return Err(Error::Invalid("the fixture needs at least five distractors per target".into()));
    }
    if spec.distractor_pool < spec.distractors_per_target || spec.n_targets == 0 {
        return Err(Error::Invalid("distractor pool smaller than distractors per target".into()));
    }
    if spec.dim < spec.n_classes + 1 {
        return Err(Error::Invalid(format!("dim must exceed n_classes, got {}", spec.dim)));
    }
    let mut rng = Rng::new(spec.seed);
    let target = |i: usize| format!("t{i:05}");
    let informant_id = |i: usize| format!("i{i:05}");
    let distractor = |j: usize| format!("d{j:05}");

    // Dimension 0 is the informant marker; dimensions 1..=k hold classes.
    let vector = |class: Option<usize>, marker: bool, rng: &mut Rng| -> Vec<f64> {
        let mut v: Vec<f64> = (0..spec.dim).map(|_| rng.uniform_in(-spec.noise, spec.noise)).collect();
        if marker {
            v[0] += 1.0;
        }
        if let Some(c) = class {
            v[1 + c] += 1.0;
        }
        v
    };

    let mut authors = EmbeddingTable::new(spec.dim);
    let mut nodes = BTreeMap::new();
    let mut edges = Vec::new();
    let mut informant = BTreeMap::new();
    let mut examples = Vec::new();
    for j in 0..spec.distractor_pool {
        let c = rng.below(spec.n_classes);
        authors.insert(distractor(j), &vector(Some(c), false, &mut rng))?;
        nodes.insert(distractor(j), NodeMeta::default());
    }
    for i in 0..spec.n_targets {
        let class = rng.below(spec.n_classes);
        authors.insert(target(i), &vector(None, false, &mut rng))?;
        authors.insert(informant_id(i), &vector(Some(class), true, &mut rng))?;
        nodes.insert(
            target(i),
            NodeMeta {
                is_external: false,
                tweet_labels: vec![task.labels()[class].to_string(); spec.tweets_per_target],
            },
        );
        nodes.insert(informant_id(i), NodeMeta::default());
        edges.push((target(i), informant_id(i)));
        let mut pool: Vec<usize> = (0..spec.distractor_pool).collect();
        for k in 0..spec.distractors_per_target {
            let r = k + rng.below(pool.len() - k);
            pool.swap(k, r);
            edges.push((target(i), distractor(pool[k])));
        }
        informant.insert(target(i), informant_id(i));
        for t in 0..spec.tweets_per_target {
            let text: Vec<String> = (0..spec.tweet_length)
                .map(|_| rng.below(spec.filler_vocab).to_string())
                .collect();
            examples.push(LabeledExample::new(format!("{}_{t}", target(i)), target(i), class, text.join(" ")));
        }
    }
    let mut words = EmbeddingTable::new(spec.word_dim);
    for tok in 0..spec.filler_vocab {
        let v: Vec<f64> = (0..spec.word_dim).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        words.insert(tok.to_string(), &v)?;
    }
    let corpus = LabeledCorpus::from_examples(task, examples, &mut Rng::derive(spec.seed, 1));
    Ok(PlantedDataset {
        spec: spec.clone(),
        corpus,
        graph: SocialGraph::from_parts(nodes, &edges)?,
        authors,
        words,
        informant,
    })
}

impl PlantedDataset {
    /// Writes `corpus.jsonl`, `graph.edges`, `graph.meta.json`,
    /// `authors.txt`, `words.txt` and `informants.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let corpus = dir.join("corpus.jsonl");
        self.corpus.save(&corpus)?;
        let edges = dir.join("graph.edges");
        let meta = dir.join("graph.meta.json");
        self.graph.save(&edges, &meta)?;
        let authors = dir.join("authors.txt");
        self.authors.save(&authors)?;
        let words = dir.join("words.txt");
        self.words.save(&words)?;
        let truth = dir.join("informants.json");
        let text = serde_json::to_string_pretty(&self.informant)?;
        fs::write(&truth, text).map_err(|e| Error::io(&truth, e))?;
        Ok(vec![corpus, edges, meta, authors, words, truth])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(h: f64, seed: u64) -> SynthSpec {
        SynthSpec {
            n_users: 600,
            homophily: h,
            seed,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn label_set_distribution_sums_to_one() {
        let q = class_distribution(3, 0, 0.9);
        for t in 1..5 {
            let p = label_set_distribution(&q, t);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // Two draws: {0} with 0.81, {0,1} with 2 * 0.9 * 0.05.
        let p = label_set_distribution(&q, 2);
        assert!((p[0b001] - 0.81).abs() < 1e-12);
        assert!((p[0b011] - 0.09).abs() < 1e-12);
        assert!((p[0b110] - 0.005).abs() < 1e-12);
    }

    #[test]
    fn overlap_probabilities_match_enumeration() {
        let spec = SynthSpec {
            author_signal: 0.7,
            ..SynthSpec::default()
        };
        let (same, diff) = spec.overlap_probabilities();
        // Enumerate both users' two tweets directly.
        let q0 = class_distribution(3, 0, 0.7);
        let q1 = class_distribution(3, 1, 0.7);
        let mut e_same = 0.0;
        let mut e_diff = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    for d in 0..3 {
                        let hit = a == c || a == d || b == c || b == d;
                        if hit {
                            e_same += q0[a] * q0[b] * q0[c] * q0[d];
                            e_diff += q0[a] * q0[b] * q1[c] * q1[d];
                        }
                    }
                }
            }
        }
        assert!((same - e_same).abs() < 1e-12);
        assert!((diff - e_diff).abs() < 1e-12);
    }

    #[test]
    fn perfect_homophily_with_consistent_authors() {
        let spec = SynthSpec {
            n_classes: 2,
            homophily: 1.0,
            author_signal: 1.0,
            communities_per_class: 1,
            n_users: 300,
            ..SynthSpec::default()
        };
        let d = generate(&spec).unwrap();
        assert_eq!(d.intra_fraction, 1.0);
        assert_eq!(d.measured_homophily, 1.0);
        for (u, v) in d.graph.edges() {
            assert_eq!(d.communities[d.graph.id(u)], d.communities[d.graph.id(v)]);
        }
    }

    #[test]
    fn infeasible_homophily_reports_range() {
        let spec = small(0.05, 0);
        match generate(&spec) {
            Err(Error::Infeasible(msg)) => assert!(msg.contains("feasible range"), "{msg}"),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn measured_homophily_tracks_target() {
        for seed in 0..5 {
            let d = generate(&small(0.9, seed)).unwrap();
            assert!((d.measured_homophily - 0.9).abs() <= 0.05, "seed {seed}: {}", d.measured_homophily);
        }
        let d = generate(&small(0.36, 0)).unwrap();
        assert!((d.measured_homophily - 0.36).abs() <= 0.05, "{}", d.measured_homophily);
    }

    #[test]
    fn sizes_and_determinism() {
        let spec = small(0.9, 3);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.corpus, b.corpus);
        assert_eq!(a.events, b.events);
        assert_eq!(a.corpus.len(), 1200);
        assert_eq!(a.graph.node_count(), 600);
        assert_eq!(a.graph.edge_count(), 2400);
        assert_eq!(a.words.len(), 3 * 20 + 200);
    }

    #[test]
    fn withheld_community_writes_filler_only() {
        let d = generate(&small(0.9, 1)).unwrap();
        let class_limit = 3 * 20;
        for e in d.corpus.all() {
            let withheld = d.withheld.contains(&d.communities[&e.author]);
            let has_class_token = e.tokens.iter().any(|t| t.parse::<usize>().unwrap() < class_limit);
            if withheld {
                assert!(!has_class_token);
            }
        }
        assert!(d.corpus.test.iter().any(|e| d.withheld.contains(&d.communities[&e.author])));
    }

    #[test]
    fn informative_tweets_carry_their_label() {
        let d = generate(&small(0.9, 2)).unwrap();
        for e in d.corpus.all() {
            for t in &e.tokens {
                let id: usize = t.parse().unwrap();
                if id < 60 {
                    assert_eq!(id / 20, e.label);
                }
            }
        }
    }

    #[test]
    fn written_files_reload() {
        let dir = tempfile::tempdir().unwrap();
        let d = generate(&small(0.9, 4)).unwrap();
        d.write(dir.path()).unwrap();
        let c = crate::text::load_corpus(&dir.path().join("corpus.jsonl"), d.task(), 0).unwrap();
        assert_eq!(c, d.corpus);
        let (events, errors) = graph::read_retweet_events(&dir.path().join("retweets.jsonl")).unwrap();
        assert!(errors.is_empty());
        let g = graph::build_social_graph(&c.author_labels(), events, graph::DEFAULT_EXTERNAL_THRESHOLD).unwrap();
        assert_eq!(g, d.graph);
        let w = EmbeddingTable::load(&dir.path().join("words.txt")).unwrap();
        assert_eq!(w, d.words);
        let tl = crate::text::load_timelines(&dir.path().join("timelines.jsonl")).unwrap();
        assert_eq!(tl.len(), 600);
    }

    #[test]
    fn planted_fixture_structure() {
        let d = generate_planted(&PlantedSpec::default()).unwrap();
        for (t, inf) in &d.informant {
            let ti = d.graph.index_of(t).unwrap();
            let ii = d.graph.index_of(inf).unwrap();
            assert!(d.graph.has_edge(ti, ii));
            assert_eq!(d.graph.degree(ti), 7);
            assert_eq!(d.authors.get(inf).unwrap()[0].round(), 1.0);
        }
        assert!(generate_planted(&PlantedSpec {
            distractors_per_target: 4,
            ..PlantedSpec::default()
        })
        .is_err());
    }
}
