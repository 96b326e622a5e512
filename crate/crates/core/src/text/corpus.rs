//! Labeled tweet corpora and their train/validation/test splits.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::preprocess::preprocess;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Sentiment,
    Stance,
    Hate,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Sentiment, Task::Stance, Task::Hate];

    pub fn labels(self) -> &'static [&'static str] {
        match self {
            Task::Sentiment => &["POSITIVE", "NEGATIVE", "NEUTRAL"],
            Task::Stance => &["FAVOR", "AGAINST", "NEUTRAL"],
            Task::Hate => &["NORMAL", "HATEFUL"],
        }
    }

    pub fn num_classes(self) -> usize {
        self.labels().len()
    }

    pub fn label_index(self, label: &str) -> Option<usize> {
        self.labels().iter().position(|l| *l == label)
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Sentiment => "sentiment",
            Task::Stance => "stance",
            Task::Hate => "hate",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Invalid(format!("unknown task `{s}` (expected sentiment, stance or hate)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub id: String,
    pub author: String,
    pub label: usize,
    pub raw_text: String,
    pub tokens: Vec<String>,
}

impl LabeledExample {
    pub fn new(id: impl Into<String>, author: impl Into<String>, label: usize, raw_text: impl Into<String>) -> Self {
        let raw_text = raw_text.into();
        LabeledExample {
            id: id.into(),
            author: author.into(),
            label,
            tokens: preprocess(&raw_text),
            raw_text,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCorpus {
    pub task: Task,
    pub train: Vec<LabeledExample>,
    pub val: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
}

impl LabeledCorpus {
    pub fn split(&self, s: Split) -> &[LabeledExample] {
        match s {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn all(&self) -> impl Iterator<Item = &LabeledExample> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sorted, deduplicated author ids over all splits.
    pub fn authors(&self) -> Vec<String> {
        let set: std::collections::BTreeSet<&str> = self.all().map(|e| e.author.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    /// Label names of every tweet per author, over all splits.
    pub fn author_labels(&self) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for e in self.all() {
            out.entry(e.author.clone())
                .or_default()
                .push(self.task.labels()[e.label].to_string());
        }
        out
    }

    /// Seeded 80/10/10 partition: validation and test each receive
    /// `floor(n/10)` examples, training the rest.
    pub fn from_examples(task: Task, mut examples: Vec<LabeledExample>, rng: &mut Rng) -> Self {
        rng.shuffle(&mut examples);
        let n = examples.len();
        let n_held = n / 10;
        let test = examples.split_off(n - n_held);
        let val = examples.split_off(n - 2 * n_held);
        LabeledCorpus {
            task,
            train: examples,
            val,
            test,
        }
    }

    /// Writes JSON Lines with explicit split fields.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for (split, examples) in [(Split::Train, &self.train), (Split::Val, &self.val), (Split::Test, &self.test)] {
            for e in examples {
                let rec = CorpusRecord {
                    id: e.id.clone(),
                    author: e.author.clone(),
                    label: self.task.labels()[e.label].to_string(),
                    text: e.raw_text.clone(),
                    split: Some(split),
                };
                serde_json::to_writer(&mut out, &rec)?;
                out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
            }
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusRecord {
    id: String,
    author: String,
    label: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
}

/// Reads a JSON Lines corpus. Records carrying a `split` field keep it; if no
/// record has one, the examples are shuffled with `seed` into 80/10/10.
/// Mixing the two styles is an error.
pub fn load_corpus(path: &Path, task: Task, seed: u64) -> Result<LabeledCorpus> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut seen = HashSet::new();
    let mut with_split = Vec::new();
    let mut without = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
        let label = task.label_index(&rec.label).ok_or_else(|| {
            Error::parse(
                path,
                lineno + 1,
                format!(
                    "record `{}`: label `{}` is not one of {} for task {task}",
                    rec.id,
                    rec.label,
                    task.labels().join(", ")
                ),
            )
        })?;
        if !seen.insert(rec.id.clone()) {
            return Err(Error::parse(path, lineno + 1, format!("duplicate id `{}`", rec.id)));
        }
        let ex = LabeledExample::new(rec.id, rec.author, label, rec.text);
        match rec.split {
            Some(s) => with_split.push((s, ex)),
            None => without.push(ex),
        }
    }
    if !with_split.is_empty() && !without.is_empty() {
        return Err(Error::Invalid(format!(
            "{}: either every record or no record may carry a split field",
            path.display()
        )));
    }
    if with_split.is_empty() {
        return Ok(LabeledCorpus::from_examples(task, without, &mut Rng::new(seed)));
    }
    let mut corpus = LabeledCorpus {
        task,
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (s, ex) in with_split {
        match s {
            Split::Train => corpus.train.push(ex),
            Split::Val => corpus.val.push(ex),
            Split::Test => corpus.test.push(ex),
        }
    }
    Ok(corpus)
}

/// Past posts per author from a `{"author", "text"}` JSON Lines file,
/// preprocessed and concatenated in file order.
pub fn load_timelines(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    #[derive(Deserialize)]
    struct Post {
        author: String,
        text: String,
    }
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let post: Post = serde_json::from_str(&line).map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
        out.entry(post.author).or_default().extend(preprocess(&post.text));
    }
    Ok(out)
}
