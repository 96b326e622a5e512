use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use socgat::checkpoint::{load_checkpoint, save_checkpoint};
use socgat::embed::{
    node2vec, random_author_embeddings, train_pv_dbow, EmbeddingTable, SkipgramConfig, WalkConfig,
};
use socgat::eval::{mean_std, metric_name, significance_matrix, MetricReport, PairVerdict};
use socgat::experiment::{Dataset, ExperimentConfig};
use socgat::graph::{self, SocialGraph, DEFAULT_EXTERNAL_THRESHOLD};
use socgat::model::{AuthorSource, Model, Variant};
use socgat::pca::pca2d_table;
use socgat::synth::{generate, generate_planted, PlantedSpec, SynthSpec};
use socgat::text::{load_corpus, load_timelines, LabeledCorpus, Split, Task};
use socgat::train::{grid_search as run_grid, multi_run, run_seeds, train_model, Grid, RunResult, TrainConfig};
use socgat::Rng;

use crate::config::Settings;
use crate::error::CliError;
use crate::manifest::{manifest_path, write_atomic, Recorder};
use crate::{Common, TrainInputs};

pub const SCHEMA_VERSION: u32 = 1;

fn parse_task(s: &str) -> Result<Task, CliError> {
    s.parse::<Task>().map_err(|e| CliError::usage(e.to_string()))
}

fn parse_variant(s: &str) -> Result<Variant, CliError> {
    s.parse::<Variant>().map_err(|e| CliError::usage(e.to_string()))
}

fn graph_files(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join("graph.edges"), dir.join("graph.meta.json"))
}

fn load_graph(dir: &Path) -> Result<SocialGraph, CliError> {
    let (edges, meta) = graph_files(dir);
    Ok(SocialGraph::load(&edges, &meta)?)
}

/// A recorder echoing the resolved settings, with the config file as an input.
fn recorder(command: &str, s: &Settings, seed: Option<u64>, common: &Common) -> Result<Recorder, CliError> {
    let mut rec = Recorder::new(command, s.resolved(), seed);
    if let Some(c) = &common.config {
        rec.input(c)?;
    }
    Ok(rec)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    write_atomic(path, text.as_bytes())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn build_graph(corpus: &Path, task: &str, retweets: &Path, out: &Path, common: &Common) -> Result<(), CliError> {
    let settings = Settings::default()
        .with("external_threshold", DEFAULT_EXTERNAL_THRESHOLD)
        .with("split_seed", 0)
        .resolve(common.config.as_deref(), &common.set)?;
    let task = parse_task(task)?;
    let mut rec = recorder("build-graph", &settings, None, common)?;
    rec.config("task", task);
    rec.input(corpus)?;
    rec.input(retweets)?;
    let corpus = load_corpus(corpus, task, settings.get("split_seed")?)?;
    let (events, skipped) = graph::read_retweet_events(retweets)?;
    for e in &skipped {
        eprintln!("warning: skipped {e}");
    }
    let g = graph::build_social_graph(&corpus.author_labels(), events, settings.get("external_threshold")?)?;
    create_dir(out)?;
    let (edges, meta) = graph_files(out);
    g.save(&edges, &meta)?;
    let stats = graph::stats(&g);
    let stats_path = out.join("stats.json");
    write_json(&stats_path, &stats)?;
    println!("{stats}");
    for p in [&edges, &meta, &stats_path] {
        rec.output(p);
    }
    rec.finish(&manifest_path(out))?;
    Ok(())
}

pub struct EmbedInputs<'a> {
    pub graph: Option<&'a Path>,
    pub timelines: Option<&'a Path>,
    pub corpus: Option<&'a Path>,
    pub task: Option<&'a str>,
}

fn mismatch(method: &str, need: &str) -> CliError {
    CliError::new("E_INVALID", format!("embed method `{method}` needs {need}"))
}

pub fn embed(method: &str, inputs: EmbedInputs, out: &Path, seed: u64, common: &Common) -> Result<(), CliError> {
    let start = Instant::now();
    let mut rng = Rng::new(seed);
    let (table, settings, sources): (EmbeddingTable, Settings, Vec<&Path>) = match method {
        "n2v" => {
            let (Some(gdir), None) = (inputs.graph, inputs.timelines) else {
                return Err(mismatch(method, "--graph and no --timelines"));
            };
            let s = Settings::default()
                .with_struct("", &WalkConfig::default())
                .with_struct("", &SkipgramConfig::node2vec())
                .resolve(common.config.as_deref(), &common.set)?;
            let wc: WalkConfig = s.to_struct("", &WalkConfig::default())?;
            let sc: SkipgramConfig = s.to_struct("", &SkipgramConfig::node2vec())?;
            let g = load_graph(gdir)?;
            (node2vec(&g, &wc, &sc, &mut rng)?, s, vec![gdir])
        }
        "pv" => {
            let (Some(tl), None) = (inputs.timelines, inputs.graph) else {
                return Err(mismatch(method, "--timelines and no --graph"));
            };
            let s = Settings::default()
                .with_struct("", &SkipgramConfig::paragraph_vector())
                .resolve(common.config.as_deref(), &common.set)?;
            let sc: SkipgramConfig = s.to_struct("", &SkipgramConfig::paragraph_vector())?;
            let docs = load_timelines(tl)?;
            (train_pv_dbow(&docs, &sc, &mut rng)?.table, s, vec![tl])
        }
        "random" => {
            let s = Settings::default()
                .with("dim", socgat::embed::DEFAULT_DIM)
                .with("split_seed", 0)
                .resolve(common.config.as_deref(), &common.set)?;
            let (ids, src): (Vec<String>, &Path) = match (inputs.corpus, inputs.task, inputs.graph) {
                (Some(c), Some(t), None) => (load_corpus(c, parse_task(t)?, s.get("split_seed")?)?.authors(), c),
                (None, None, Some(g)) => (load_graph(g)?.ids().to_vec(), g),
                _ => return Err(mismatch(method, "either --corpus with --task, or --graph")),
            };
            (random_author_embeddings(ids, s.get("dim")?, &mut rng), s, vec![src])
        }
        other => {
            return Err(CliError::usage(format!("unknown embed method `{other}` (expected n2v, pv or random)")));
        }
    };
    let mut rec = recorder("embed", &settings, Some(seed), common)?.since(start);
    rec.config("method", method);
    for p in sources {
        rec.input(p)?;
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    table.save(out)?;
    rec.output(out);
    println!("wrote {} vectors of dimension {} to {}", table.len(), table.dim(), out.display());
    rec.finish(&manifest_path(out))?;
    Ok(())
}

fn train_settings(common: &Common, grid: bool) -> Result<Settings, CliError> {
    let e = ExperimentConfig::default();
    let mut s = Settings::default()
        .with_struct("", &e.train)
        .with("text_hidden", e.text_hidden)
        .with("classifier_hidden", e.classifier_hidden)
        .with("gat_hidden", e.gat_hidden)
        .with("gat_heads", e.gat_heads)
        .with("random_dim", e.random_dim)
        .with("split_seed", 0);
    if grid {
        s = s.with_struct("grid.", &Grid::default());
    }
    s.resolve(common.config.as_deref(), &common.set)
}

fn experiment_config(s: &Settings) -> Result<ExperimentConfig, CliError> {
    let d = ExperimentConfig::default();
    Ok(ExperimentConfig {
        text_hidden: s.get("text_hidden")?,
        classifier_hidden: s.get("classifier_hidden")?,
        gat_hidden: s.get("gat_hidden")?,
        gat_heads: s.get("gat_heads")?,
        random_dim: s.get("random_dim")?,
        train: s.to_struct("", &d.train)?,
        ..d
    })
}

/// Corpus plus whatever the variant needs.
struct TrainData {
    corpus: LabeledCorpus,
    dataset: Option<Dataset>,
}

fn load_train_data(inputs: &TrainInputs, variant: Variant, s: &Settings, rec: &mut Recorder) -> Result<TrainData, CliError> {
    let task = parse_task(&inputs.task)?;
    rec.input(&inputs.corpus)?;
    let corpus = load_corpus(&inputs.corpus, task, s.get("split_seed")?)?;
    if variant == Variant::Frequency {
        return Ok(TrainData { corpus, dataset: None });
    }
    let words_path = inputs
        .words
        .as_deref()
        .ok_or_else(|| CliError::usage(format!("{variant} needs --words")))?;
    rec.input(words_path)?;
    let words = EmbeddingTable::load(words_path)?;
    let mut data = Dataset::new(corpus.clone(), &words)?;
    if let Some(a) = &inputs.authors {
        rec.input(a)?;
        let table = EmbeddingTable::load(a)?;
        data.n2v = Some(table.clone());
        data.pv = Some(table);
    }
    if let Some(g) = &inputs.graph {
        rec.input(g)?;
        data.graph = Some(load_graph(g)?);
    }
    match variant {
        Variant::LingPv | Variant::LingN2v if data.n2v.is_none() => {
            return Err(CliError::usage(format!("{variant} needs --authors")));
        }
        Variant::LingGat if data.n2v.is_none() || data.graph.is_none() => {
            return Err(CliError::usage("LING_GAT needs --authors and --graph"));
        }
        _ => {}
    }
    Ok(TrainData {
        corpus,
        dataset: Some(data),
    })
}

fn train_once(data: &TrainData, variant: Variant, cfg: &ExperimentConfig, seed: u64) -> Result<(Model, RunResult), CliError> {
    match &data.dataset {
        Some(d) => Ok(d.run(variant, cfg, seed)?),
        None => {
            let mut model = Model::frequency(data.corpus.task, &[0])?;
            let tc = TrainConfig {
                seed,
                ..cfg.train.clone()
            };
            let r = train_model(&mut model, &data.corpus, &tc)?;
            Ok((model, r))
        }
    }
}

/// Writes `model.ckpt` and `result.json` into `dir`. With `final_dir`, the
/// outputs are recorded under the name `dir` will be renamed to.
fn save_run(
    dir: &Path,
    final_dir: Option<&Path>,
    model: &Model,
    cfg: &ExperimentConfig,
    result: &RunResult,
    rec: &mut Recorder,
) -> Result<(), CliError> {
    create_dir(dir)?;
    let tc = TrainConfig {
        seed: result.seed,
        ..cfg.train.clone()
    };
    let ckpt = dir.join("model.ckpt");
    save_checkpoint(model, Some(&tc), &ckpt)?;
    let res = dir.join("result.json");
    write_json(&res, result)?;
    let shown = final_dir.unwrap_or(dir);
    rec.output_as(&shown.join("model.ckpt"), &ckpt);
    rec.output_as(&shown.join("result.json"), &res);
    Ok(())
}

fn record_result(rec: &mut Recorder, prefix: &str, r: &RunResult) {
    rec.result(&format!("{prefix}seed"), r.seed);
    rec.result(&format!("{prefix}best_epoch"), r.best_epoch);
    rec.result(&format!("{prefix}best_val"), r.best_val);
    rec.result(&format!("{prefix}test_metric"), r.test_metric);
    rec.result(&format!("{prefix}val_trajectory"), &r.val_trajectory);
    rec.timing(&format!("{prefix}train_seconds"), r.seconds);
}

pub fn train(inputs: &TrainInputs, runs: usize, seed: u64, common: &Common) -> Result<(), CliError> {
    if runs == 0 {
        return Err(CliError::usage("--runs must be at least 1"));
    }
    let s = train_settings(common, false)?;
    let variant = parse_variant(&inputs.variant)?;
    let cfg = experiment_config(&s)?;
    let mut rec = recorder("train", &s, Some(seed), common)?;
    rec.config("variant", variant);
    rec.config("task", &inputs.task);
    rec.config("runs", runs);
    let data = load_train_data(inputs, variant, &s, &mut rec)?;
    create_dir(&inputs.out)?;
    if runs == 1 {
        let (model, result) = train_once(&data, variant, &cfg, seed)?;
        save_run(&inputs.out, None, &model, &cfg, &result, &mut rec)?;
        record_result(&mut rec, "", &result);
        println!("{variant} seed {seed}: val {:.4} test {:.4}", result.best_val, result.test_metric);
    } else {
        let mut failure: Option<CliError> = None;
        let summary = multi_run(&run_seeds(seed, runs), |s| {
            let mut one = || -> Result<RunResult, CliError> {
                let (model, result) = train_once(&data, variant, &cfg, s)?;
                let name = format!("run-{:02}", s.wrapping_sub(seed));
                save_run(&inputs.out.join(&name), None, &model, &cfg, &result, &mut rec)?;
                record_result(&mut rec, &format!("{name}."), &result);
                println!("{variant} seed {s}: val {:.4} test {:.4}", result.best_val, result.test_metric);
                Ok(result)
            };
            one().map_err(|e| {
                let msg = e.to_string();
                failure = Some(e);
                socgat::Error::Invalid(msg)
            })
        });
        if let Some(e) = failure {
            return Err(e);
        }
        let summary = summary?;
        let path = inputs.out.join("runs.json");
        write_json(&path, &summary)?;
        rec.output(&path);
        println!("{variant} over {runs} seeds: {:.4} ± {:.4}", summary.mean, summary.std);
    }
    rec.finish(&manifest_path(&inputs.out))?;
    Ok(())
}

pub fn grid_search(inputs: &TrainInputs, seed: u64, common: &Common) -> Result<(), CliError> {
    let s = train_settings(common, true)?;
    let variant = parse_variant(&inputs.variant)?;
    let base = experiment_config(&s)?;
    let grid: Grid = s.to_struct("grid.", &Grid::default())?;
    let mut rec = recorder("grid-search", &s, Some(seed), common)?;
    rec.config("variant", variant);
    rec.config("task", &inputs.task);
    let data = load_train_data(inputs, variant, &s, &mut rec)?;
    let jobs = inputs.out.join("jobs");
    create_dir(&jobs)?;
    let mut index = 0usize;
    let mut outputs = Vec::new();
    // The grid driver speaks the core error type; the command's own error is
    // parked here and reported in its place.
    let mut failure: Option<CliError> = None;
    let result = run_grid(&grid, variant, seed, |point, job_seed| {
        let mut job = || -> Result<RunResult, CliError> {
            let mut cfg = base.clone();
            cfg.train.batch_size = point.batch_size;
            cfg.train.dropout = point.dropout;
            cfg.train.l2 = point.l2;
            if let (Some(d), Some(h)) = (point.gat_hidden, point.gat_heads) {
                cfg.gat_hidden = d;
                cfg.gat_heads = h;
            }
            let (model, r) = train_once(&data, variant, &cfg, job_seed)?;
            // Each job writes into a scratch directory renamed on completion.
            let name = format!("job-{index:04}");
            let tmp = jobs.join(format!("{name}.tmp"));
            let done = jobs.join(&name);
            let mut job_rec = Recorder::new("grid-job", &BTreeMap::new(), Some(job_seed));
            job_rec.config("variant", variant);
            job_rec.config("point", serde_json::to_string(point)?);
            save_run(&tmp, Some(&done), &model, &cfg, &r, &mut job_rec)?;
            write_json(&tmp.join("point.json"), point)?;
            job_rec.output_as(&done.join("point.json"), &tmp.join("point.json"));
            record_result(&mut job_rec, "", &r);
            job_rec.finish(&tmp.join("manifest.json"))?;
            if done.exists() {
                fs::remove_dir_all(&done).map_err(|e| CliError::io(&done, e))?;
            }
            fs::rename(&tmp, &done).map_err(|e| CliError::io(&done, e))?;
            outputs.push(done);
            index += 1;
            Ok(r)
        };
        job().map_err(|e| {
            let msg = e.to_string();
            failure = Some(e);
            socgat::Error::Invalid(msg)
        })
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let result = result?;
    for o in &outputs {
        rec.output(o);
    }
    let board = inputs.out.join("leaderboard.json");
    write_json(&board, &result)?;
    rec.output(&board);
    println!(
        "best of {} points: {} (val {:.4})",
        result.leaderboard.len(),
        serde_json::to_string(&result.best)?,
        result.leaderboard[0].val_metric
    );
    rec.finish(&manifest_path(&inputs.out))?;
    Ok(())
}

#[derive(Serialize)]
struct CheckpointScore {
    path: String,
    variant: Variant,
    value: f64,
    report: MetricReport,
}

#[derive(Serialize)]
struct RunSetScore {
    name: String,
    checkpoints: Vec<CheckpointScore>,
    values: Vec<f64>,
    mean: f64,
    std: Option<f64>,
    /// Names of the sets this one significantly improves over.
    improves_over: Vec<String>,
    markers: String,
}

fn checkpoints_below(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| CliError::io(dir, err)))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            checkpoints_below(&p, out)?;
        } else if p.extension().is_some_and(|x| x == "ckpt") {
            out.push(p);
        }
    }
    Ok(())
}

type Loaded = (PathBuf, Model, Variant);

/// Loads a checkpoint, refusing one trained for a different task.
fn load_for(path: &Path, task: Task) -> Result<Loaded, CliError> {
    let (model, header) = load_checkpoint(path)?;
    if header.model.task != task {
        return Err(CliError::new(
            "E_MISMATCH",
            format!("{} was trained for task {} but evaluation is for {task}", path.display(), header.model.task),
        ));
    }
    Ok((path.to_path_buf(), model, header.model.variant))
}

fn score((path, model, variant): &Loaded, corpus: &LabeledCorpus, split: Split, seed: u64) -> Result<CheckpointScore, CliError> {
    let report = socgat::train::evaluate(model, corpus.split(split), &mut Rng::new(seed))?;
    Ok(CheckpointScore {
        path: path.display().to_string(),
        variant: *variant,
        value: report.value,
        report,
    })
}

/// Significance markers: `*` over every LING and LING_RANDOM set present,
/// `◇` over LING_PV, `†` over LING_N2V.
fn markers(improves: &[String], all: &[String]) -> String {
    let variant_of = |n: &str| n.parse::<Variant>().ok();
    let beats = |v: Variant| {
        all.iter()
            .filter(|n| variant_of(n) == Some(v))
            .any(|n| improves.contains(n))
    };
    let present = |v: Variant| all.iter().any(|n| variant_of(n) == Some(v));
    let base: Vec<Variant> = [Variant::Ling, Variant::LingRandom].into_iter().filter(|v| present(*v)).collect();
    let mut m = String::new();
    if !base.is_empty() && base.iter().all(|v| beats(*v)) {
        m.push('*');
    }
    if beats(Variant::LingPv) {
        m.push('◇');
    }
    if beats(Variant::LingN2v) {
        m.push('†');
    }
    m
}

#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    checkpoints: &[PathBuf],
    run_sets: &[String],
    corpus_path: &Path,
    task: &str,
    split: &str,
    out: &Path,
    seed: u64,
    common: &Common,
) -> Result<(), CliError> {
    let s = Settings::default()
        .with("split_seed", 0)
        .with("alpha", 0.05)
        .resolve(common.config.as_deref(), &common.set)?;
    let task = parse_task(task)?;
    let split = match split {
        "train" => Split::Train,
        "val" => Split::Val,
        "test" => Split::Test,
        other => return Err(CliError::usage(format!("unknown split `{other}`"))),
    };
    if checkpoints.is_empty() && run_sets.is_empty() {
        return Err(CliError::usage("give at least one --checkpoint or --run-set"));
    }
    let mut rec = recorder("evaluate", &s, Some(seed), common)?;
    let mut single_models = Vec::new();
    for c in checkpoints {
        rec.input(c)?;
        single_models.push(load_for(c, task)?);
    }
    let mut set_models = Vec::new();
    for spec in run_sets {
        let (name, dir) = spec
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--run-set `{spec}`: expected NAME=DIR")))?;
        let mut paths = Vec::new();
        checkpoints_below(Path::new(dir), &mut paths)?;
        if paths.is_empty() {
            return Err(CliError::new("E_EMPTY", format!("run set `{name}`: no checkpoints below {dir}")));
        }
        rec.input(Path::new(dir))?;
        let models = paths.iter().map(|p| load_for(p, task)).collect::<Result<Vec<_>, _>>()?;
        set_models.push((name.to_string(), models));
    }
    rec.input(corpus_path)?;
    let corpus = load_corpus(corpus_path, task, s.get("split_seed")?)?;
    let singles = single_models
        .iter()
        .map(|m| score(m, &corpus, split, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let mut sets = Vec::new();
    for (name, models) in &set_models {
        let scores = models
            .iter()
            .map(|m| score(m, &corpus, split, seed))
            .collect::<Result<Vec<_>, _>>()?;
        let values: Vec<f64> = scores.iter().map(|c| c.value).collect();
        let (mean, std) = match mean_std(&values) {
            Ok((m, sd)) => (m, Some(sd)),
            Err(_) => (values[0], None),
        };
        sets.push(RunSetScore {
            name: name.to_string(),
            checkpoints: scores,
            values,
            mean,
            std,
            improves_over: Vec::new(),
            markers: String::new(),
        });
    }
    let alpha: f64 = s.get("alpha")?;
    let testable: Vec<(String, Vec<f64>)> = sets
        .iter()
        .filter(|r| r.values.len() >= 2)
        .map(|r| (r.name.clone(), r.values.clone()))
        .collect();
    let verdicts: Vec<PairVerdict> = if testable.len() >= 2 {
        significance_matrix(&testable, alpha)?
    } else {
        Vec::new()
    };
    let names: Vec<String> = sets.iter().map(|r| r.name.clone()).collect();
    for set in &mut sets {
        set.improves_over = verdicts
            .iter()
            .filter(|v| v.row == set.name && v.improves)
            .map(|v| v.column.clone())
            .collect();
        set.markers = markers(&set.improves_over, &names);
    }
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "task": task,
        "metric": metric_name(task),
        "split": split,
        "alpha": alpha,
        "checkpoints": singles,
        "run_sets": sets,
        "significance": verdicts,
    });
    write_json(out, &report)?;
    rec.output(out);
    for c in &singles {
        println!("{} {}: {:.4}", c.path, metric_name(task), c.value);
    }
    for r in &sets {
        match r.std {
            Some(sd) => println!("{}{}: {:.4} ± {:.4} over {} runs", r.name, r.markers, r.mean, sd, r.values.len()),
            None => println!("{}: {:.4} (single run)", r.name, r.mean),
        }
    }
    rec.finish(&manifest_path(out))?;
    Ok(())
}

pub fn inspect_attention(checkpoint: &Path, graph: Option<&Path>, authors: &[String], out: &Path) -> Result<(), CliError> {
    let mut rec = Recorder::new("inspect-attention", &BTreeMap::new(), None);
    rec.config("authors", authors.join(","));
    rec.input(checkpoint)?;
    let (mut model, header) = load_checkpoint(checkpoint)?;
    if header.model.variant != Variant::LingGat {
        return Err(CliError::new(
            "E_VARIANT",
            format!("attention needs a LING_GAT checkpoint, {} is {}", checkpoint.display(), header.model.variant),
        ));
    }
    if let Some(g) = graph {
        rec.input(g)?;
        let replacement = load_graph(g)?;
        if let AuthorSource::Gat { graph, .. } = &mut model.authors {
            *graph = replacement;
        }
    }
    if authors.is_empty() {
        return Err(CliError::usage("give at least one author id with --authors"));
    }
    if let AuthorSource::Gat { table, graph, .. } = &model.authors {
        // Unseen authors would silently fall back to the centroid vector.
        if let Some(a) = authors.iter().find(|a| graph.index_of(a).is_none() && table.get(a).is_none()) {
            return Err(socgat::Error::UnknownId(format!("author `{a}` is neither in the graph nor in the embedding table")).into());
        }
    }
    let records = authors
        .iter()
        .map(|a| model.attention(a))
        .collect::<socgat::Result<Vec<_>>>()?;
    write_json(
        out,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "variant": header.model.variant,
            "records": records,
        }),
    )?;
    rec.output(out);
    for r in &records {
        for (k, head) in r.heads.iter().enumerate() {
            let top: Vec<String> = head.iter().take(5).map(|e| format!("{}={:.3}", e.neighbor, e.weight)).collect();
            println!("{} head {k}: {}", r.target, top.join(" "));
        }
    }
    rec.finish(&manifest_path(out))?;
    Ok(())
}

pub fn export_embeddings(table: &Path, out: &Path, pca: Option<&Path>) -> Result<(), CliError> {
    let mut rec = Recorder::new("export-embeddings", &BTreeMap::new(), None);
    rec.input(table)?;
    let t = EmbeddingTable::load(table)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    t.save(out)?;
    rec.output(out);
    if let Some(p) = pca {
        let coords = pca2d_table(&t)?;
        let mut body = String::new();
        for (id, [x, y]) in coords {
            body.push_str(&format!("{id} {x} {y}\n"));
        }
        write_atomic(p, body.as_bytes())?;
        rec.output(p);
    }
    rec.finish(&manifest_path(out))?;
    Ok(())
}

pub fn synthesize(out: &Path, seed: u64, planted: bool, common: &Common) -> Result<(), CliError> {
    let mut rec;
    create_dir(out)?;
    if planted {
        let s = Settings::default()
            .with_struct("", &PlantedSpec::default())
            .resolve(common.config.as_deref(), &common.set)?;
        let spec = PlantedSpec {
            seed,
            ..s.to_struct("", &PlantedSpec::default())?
        };
        rec = recorder("synthesize", &s, Some(seed), common)?;
        rec.config("planted", true);
        let d = generate_planted(&spec)?;
        for p in d.write(out)? {
            rec.output(&p);
        }
        println!(
            "planted fixture: {} targets, {} distractors each, {} nodes, {} edges",
            spec.n_targets,
            spec.distractors_per_target,
            d.graph.node_count(),
            d.graph.edge_count()
        );
    } else {
        let s = Settings::default()
            .with_struct("", &SynthSpec::default())
            .resolve(common.config.as_deref(), &common.set)?;
        let spec = SynthSpec {
            seed,
            ..s.to_struct("", &SynthSpec::default())?
        };
        rec = recorder("synthesize", &s, Some(seed), common)?;
        let d = generate(&spec)?;
        for p in d.write(out)? {
            rec.output(&p);
        }
        println!(
            "{} users, {} tweets, {} edges; intra-community edge fraction {:.4}; homophily expected {:.4}, measured {:.4}",
            spec.n_users,
            d.corpus.len(),
            d.graph.edge_count(),
            d.intra_fraction,
            d.expected_homophily,
            d.measured_homophily
        );
    }
    rec.finish(&manifest_path(out))?;
    Ok(())
}

pub fn stats(graph_dir: &Path, out: &Path) -> Result<(), CliError> {
    let mut rec = Recorder::new("stats", &BTreeMap::new(), None);
    rec.input(graph_dir)?;
    let g = load_graph(graph_dir)?;
    let st = graph::stats(&g);
    println!("{st}");
    write_json(out, &st)?;
    rec.output(out);
    rec.finish(&manifest_path(out))?;
    Ok(())
}
