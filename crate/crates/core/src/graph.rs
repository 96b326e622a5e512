//! The undirected, unweighted retweet graph and its summary statistics.
//!
//! Nodes are dataset authors plus "external" users that dataset authors
//! retweeted often enough. Node ids are opaque strings; dense indices follow
//! the sorted order of the ids, so two builds from the same inputs agree on
//! every index.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EXTERNAL_THRESHOLD: usize = 100;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeMeta {
    pub is_external: bool,
    /// Labels of the tweets this user authored, sorted (a multiset).
    pub tweet_labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocialGraph {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    meta: Vec<NodeMeta>,
    adj: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub node_count: usize,
    pub edge_count: usize,
    pub density: Option<f64>,
    pub component_count: usize,
    pub homophily: Option<f64>,
}

/// One retweet: `retweeter` shared a post by `retweeted`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetweetEvent {
    pub retweeter: String,
    pub retweeted: String,
}

impl SocialGraph {
    /// Builds a graph from node metadata and an undirected edge list.
    ///
    /// Duplicate edges collapse; self-loops and edges naming unknown nodes
    /// are rejected.
    pub fn from_parts(nodes: BTreeMap<String, NodeMeta>, edges: &[(String, String)]) -> Result<Self> {
        let ids: Vec<String> = nodes.keys().cloned().collect();
        let index: HashMap<String, usize> = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        let mut meta: Vec<NodeMeta> = nodes.into_values().collect();
        for m in &mut meta {
            if m.is_external && !m.tweet_labels.is_empty() {
                return Err(Error::Invalid("external users cannot author labeled tweets".into()));
            }
            m.tweet_labels.sort();
        }
        let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); ids.len()];
        for (u, v) in edges {
            let iu = *index.get(u).ok_or_else(|| Error::UnknownId(u.clone()))?;
            let iv = *index.get(v).ok_or_else(|| Error::UnknownId(v.clone()))?;
            if iu == iv {
                return Err(Error::Invalid(format!("self-loop on `{u}` cannot be stored")));
            }
            sets[iu].insert(iv);
            sets[iv].insert(iu);
        }
        Ok(SocialGraph {
            ids,
            index,
            meta,
            adj: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn meta(&self, i: usize) -> &NodeMeta {
        &self.meta[i]
    }

    /// Sorted neighbor indices of node `i` (self-loops are never stored).
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// Undirected edges `(u, v)` with `u < v` in index order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, ns)| ns.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    /// Checks symmetry, simplicity and endpoint validity by full scan.
    pub fn validate(&self) -> Result<()> {
        for (u, ns) in self.adj.iter().enumerate() {
            for w in ns.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::Invalid(format!("adjacency of {} not strictly sorted", self.ids[u])));
                }
            }
            for &v in ns {
                if v >= self.ids.len() {
                    return Err(Error::Invalid(format!("dangling neighbor index {v}")));
                }
                if v == u {
                    return Err(Error::Invalid(format!("stored self-loop on {}", self.ids[u])));
                }
                if !self.has_edge(v, u) {
                    return Err(Error::Invalid(format!("asymmetric edge {} -> {}", self.ids[u], self.ids[v])));
                }
            }
        }
        Ok(())
    }

    /// Writes the sorted `u v` edge list and the node-metadata sidecar.
    pub fn save(&self, edges_path: &Path, meta_path: &Path) -> Result<()> {
        let mut lines: Vec<String> = self
            .edges()
            .map(|(u, v)| {
                let (a, b) = (&self.ids[u], &self.ids[v]);
                if a <= b {
                    format!("{a} {b}")
                } else {
                    format!("{b} {a}")
                }
            })
            .collect();
        lines.sort();
        let mut body = String::new();
        for l in lines {
            body.push_str(&l);
            body.push('\n');
        }
        fs::write(edges_path, body).map_err(|e| Error::io(edges_path, e))?;

        let sidecar = MetaFile {
            schema_version: 1,
            nodes: self.ids.iter().cloned().zip(self.meta.iter().cloned()).collect(),
        };
        let json = serde_json::to_string_pretty(&sidecar)?;
        fs::write(meta_path, json + "\n").map_err(|e| Error::io(meta_path, e))?;
        Ok(())
    }

    pub fn load(edges_path: &Path, meta_path: &Path) -> Result<Self> {
        let meta_text = fs::read_to_string(meta_path).map_err(|e| Error::io(meta_path, e))?;
        let sidecar: MetaFile = serde_json::from_str(&meta_text)?;
        let file = fs::File::open(edges_path).map_err(|e| Error::io(edges_path, e))?;
        let mut edges = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(edges_path, e))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some(u), Some(v), None) => edges.push((u.to_string(), v.to_string())),
                _ => return Err(Error::parse(edges_path, lineno + 1, "expected `u v`")),
            }
        }
        SocialGraph::from_parts(sidecar.nodes, &edges)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MetaFile {
    schema_version: u32,
    nodes: BTreeMap<String, NodeMeta>,
}

/// Builds the retweet graph.
///
/// `authors` maps each dataset author to the labels of the tweets they wrote.
/// Only events whose retweeter is a dataset author are counted. A
/// non-author becomes an external node once authors have retweeted them at
/// least `external_threshold` times in total. Any retweet between two retained
/// nodes yields one undirected edge.
pub fn build_social_graph<I>(
    authors: &BTreeMap<String, Vec<String>>,
    events: I,
    external_threshold: usize,
) -> Result<SocialGraph>
where
    I: IntoIterator<Item = RetweetEvent>,
{
    if authors.is_empty() {
        return Err(Error::Empty("author set".into()));
    }
    let mut external_counts: HashMap<String, usize> = HashMap::new();
    let mut pairs: BTreeSet<(String, String)> = BTreeSet::new();
    for ev in events {
        if !authors.contains_key(&ev.retweeter) || ev.retweeter == ev.retweeted {
            continue;
        }
        if !authors.contains_key(&ev.retweeted) {
            *external_counts.entry(ev.retweeted.clone()).or_default() += 1;
        }
        let pair = if ev.retweeter < ev.retweeted {
            (ev.retweeter, ev.retweeted)
        } else {
            (ev.retweeted, ev.retweeter)
        };
        pairs.insert(pair);
    }

    let mut nodes: BTreeMap<String, NodeMeta> = authors
        .iter()
        .map(|(id, labels)| {
            (
                id.clone(),
                NodeMeta {
                    is_external: false,
                    tweet_labels: labels.clone(),
                },
            )
        })
        .collect();
    for (id, count) in external_counts {
        if count >= external_threshold {
            nodes.insert(
                id,
                NodeMeta {
                    is_external: true,
                    tweet_labels: Vec::new(),
                },
            );
        }
    }
    let edges: Vec<(String, String)> = pairs
        .into_iter()
        .filter(|(u, v)| nodes.contains_key(u) && nodes.contains_key(v))
        .collect();
    SocialGraph::from_parts(nodes, &edges)
}

/// Reads a JSON Lines retweet file. Malformed lines are reported with their
/// line numbers and skipped.
pub fn read_retweet_events(path: &Path) -> Result<(Vec<RetweetEvent>, Vec<Error>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut events = Vec::new();
    let mut errors = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RetweetEvent>(&line) {
            Ok(ev) => events.push(ev),
            Err(e) => errors.push(Error::parse(path, lineno + 1, e.to_string())),
        }
    }
    Ok((events, errors))
}

pub fn write_retweet_events(path: &Path, events: &[RetweetEvent]) -> Result<()> {
    let mut out = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for ev in events {
        let line = serde_json::to_string(ev)?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// `2|E| / (|V| (|V| - 1))`.
pub fn density_from_counts(nodes: f64, edges: f64) -> Result<f64> {
    if nodes < 2.0 {
        return Err(Error::Undefined(format!("density needs at least 2 nodes, got {nodes}")));
    }
    Ok(2.0 * edges / (nodes * (nodes - 1.0)))
}

pub fn density(g: &SocialGraph) -> Result<f64> {
    density_from_counts(g.node_count() as f64, g.edge_count() as f64)
}

pub fn connected_components(g: &SocialGraph) -> usize {
    let n = g.node_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = n;
    for (u, v) in g.edges() {
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru != rv {
            parent[ru.max(rv)] = ru.min(rv);
            components -= 1;
        }
    }
    components
}

/// Component membership by breadth-first search, in index order.
pub fn component_labels(g: &SocialGraph) -> Vec<usize> {
    let mut label = vec![usize::MAX; g.node_count()];
    let mut next = 0;
    for start in 0..g.node_count() {
        if label[start] != usize::MAX {
            continue;
        }
        let mut queue = VecDeque::from([start]);
        label[start] = next;
        while let Some(u) = queue.pop_front() {
            for &v in g.neighbors(u) {
                if label[v] == usize::MAX {
                    label[v] = next;
                    queue.push_back(v);
                }
            }
        }
        next += 1;
    }
    label
}

/// Fraction of edges between labeled users whose tweet labels overlap.
///
/// Only edges with labeled tweets on both ends are eligible; `None` when no
/// edge is eligible. Label multisets overlap when they share any label.
pub fn homophily(g: &SocialGraph) -> Option<f64> {
    let mut eligible = 0usize;
    let mut same = 0usize;
    for (u, v) in g.edges() {
        let (a, b) = (&g.meta(u).tweet_labels, &g.meta(v).tweet_labels);
        if a.is_empty() || b.is_empty() {
            continue;
        }
        eligible += 1;
        if sorted_intersect(a, b) {
            same += 1;
        }
    }
    (eligible > 0).then(|| same as f64 / eligible as f64)
}

fn sorted_intersect(a: &[String], b: &[String]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Equal => return true,
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
        }
    }
    false
}

pub fn stats(g: &SocialGraph) -> GraphStats {
    GraphStats {
        node_count: g.node_count(),
        edge_count: g.edge_count(),
        density: density(g).ok(),
        component_count: connected_components(g),
        homophily: homophily(g),
    }
}

impl std::fmt::Display for GraphStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let opt = |v: Option<f64>, digits: usize| match v {
            Some(x) => format!("{x:.digits$}"),
            None => "undefined".to_string(),
        };
        writeln!(f, "# nodes        {}", self.node_count)?;
        writeln!(f, "# edges        {}", self.edge_count)?;
        writeln!(f, "density        {}", opt(self.density, 4))?;
        writeln!(f, "# components   {}", self.component_count)?;
        write!(
            f,
            "homophily      {}",
            match self.homophily {
                Some(h) => format!("{:.1}%", 100.0 * h),
                None => "undefined".to_string(),
            }
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn authors(list: &[(&str, &[&str])]) -> BTreeMap<String, Vec<String>> {
        list.iter()
            .map(|(id, labels)| (id.to_string(), labels.iter().map(|s| s.to_string()).collect()))
            .collect()
    }

    fn ev(a: &str, b: &str) -> RetweetEvent {
        RetweetEvent {
            retweeter: a.into(),
            retweeted: b.into(),
        }
    }

    fn graph(labels: &[(&str, &[&str])], edges: &[(&str, &str)]) -> SocialGraph {
        let nodes = labels
            .iter()
            .map(|(id, ls)| {
                (
                    id.to_string(),
                    NodeMeta {
                        is_external: ls.is_empty(),
                        tweet_labels: ls.iter().map(|s| s.to_string()).collect(),
                    },
                )
            })
            .collect();
        let edges: Vec<(String, String)> = edges.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        SocialGraph::from_parts(nodes, &edges).unwrap()
    }

    #[test]
    fn repeated_events_collapse_to_one_undirected_edge() {
        let a = authors(&[("a", &["X"]), ("b", &["X"])]);
        let g = build_social_graph(&a, vec![ev("a", "b"), ev("b", "a"), ev("a", "b")], 100).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
        g.validate().unwrap();
    }

    #[test]
    fn external_threshold_is_inclusive() {
        let a = authors(&[("a", &["X"]), ("b", &["Y"])]);
        let events = |n: usize| (0..n).map(|i| ev(if i % 2 == 0 { "a" } else { "b" }, "x")).collect::<Vec<_>>();
        let g = build_social_graph(&a, events(99), 100).unwrap();
        assert!(!g.contains("x"));
        let g = build_social_graph(&a, events(100), 100).unwrap();
        assert!(g.contains("x"));
        let x = g.index_of("x").unwrap();
        assert!(g.meta(x).is_external);
        assert_eq!(g.degree(x), 2);
    }

    #[test]
    fn events_from_non_authors_are_ignored() {
        let a = authors(&[("a", &["X"])]);
        let mut events: Vec<RetweetEvent> = (0..150).map(|_| ev("x", "y")).collect();
        events.extend((0..150).map(|_| ev("y", "a")));
        let g = build_social_graph(&a, events, 100).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn no_events_means_isolated_authors() {
        let a = authors(&[("a", &["X"]), ("b", &["X"]), ("c", &["Y"])]);
        let g = build_social_graph(&a, Vec::new(), 100).unwrap();
        let s = stats(&g);
        assert_eq!((s.node_count, s.edge_count, s.component_count), (3, 0, 3));
    }

    #[test]
    fn empty_author_set_is_an_error() {
        assert!(matches!(
            build_social_graph(&BTreeMap::new(), Vec::new(), 100),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn shuffled_events_build_identical_graph() {
        let a = authors(&[("a", &["X"]), ("b", &["X"]), ("c", &["Y"]), ("d", &["Y"])]);
        let mut events = vec![ev("a", "b"), ev("b", "c"), ev("c", "d"), ev("d", "a"), ev("a", "c")];
        let g1 = build_social_graph(&a, events.clone(), 100).unwrap();
        Rng::new(4).shuffle(&mut events);
        let g2 = build_social_graph(&a, events, 100).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn density_cases() {
        let k4 = graph(
            &[("a", &["X"]), ("b", &["X"]), ("c", &["X"]), ("d", &["X"])],
            &[("a", "b"), ("a", "c"), ("a", "d"), ("b", "c"), ("b", "d"), ("c", "d")],
        );
        assert_eq!(density(&k4).unwrap(), 1.0);
        // Published counts for the stance and sentiment graphs.
        assert!((density_from_counts(6_900.0, 258_000.0).unwrap() - 0.0108).abs() < 1e-4);
        assert!((density_from_counts(50_000.0, 4_100_000.0).unwrap() - 0.0033).abs() < 1e-4);
        let single = graph(&[("a", &["X"])], &[]);
        assert!(matches!(density(&single), Err(Error::Undefined(_))));
    }

    #[test]
    fn components_small_cases() {
        let path = graph(&[("a", &["X"]), ("b", &["X"]), ("c", &["X"])], &[("a", "b"), ("b", "c")]);
        assert_eq!(connected_components(&path), 1);
        let two = graph(
            &[("a", &["X"]), ("b", &["X"]), ("c", &["X"]), ("d", &["X"])],
            &[("a", "b"), ("c", "d")],
        );
        assert_eq!(connected_components(&two), 2);
    }

    #[test]
    fn homophily_hand_enumeration() {
        let g = graph(
            &[("1", &["A"]), ("2", &["A"]), ("3", &["B"]), ("4", &[])],
            &[("1", "2"), ("2", "3"), ("3", "4")],
        );
        assert_eq!(homophily(&g), Some(0.5));

        let all_same = graph(&[("1", &["A"]), ("2", &["A"])], &[("1", "2")]);
        assert_eq!(homophily(&all_same), Some(1.0));

        let externals = graph(&[("x", &[]), ("y", &[])], &[("x", "y")]);
        assert_eq!(homophily(&externals), None);
    }

    #[test]
    fn homophily_uses_label_set_overlap() {
        let g = graph(&[("1", &["A", "B"]), ("2", &["B", "C"]), ("3", &["C"])], &[("1", "2"), ("1", "3")]);
        assert_eq!(homophily(&g), Some(0.5));
    }

    #[test]
    fn triangle_stats() {
        let g = graph(
            &[("1", &["A"]), ("2", &["A"]), ("3", &["B"])],
            &[("1", "2"), ("2", "3"), ("1", "3")],
        );
        let s = stats(&g);
        assert_eq!(s.node_count, 3);
        assert_eq!(s.edge_count, 3);
        assert_eq!(s.density, Some(1.0));
        assert_eq!(s.component_count, 1);
        assert!((s.homophily.unwrap() - 1.0 / 3.0).abs() < 1e-15);

        let single = stats(&graph(&[("a", &["X"])], &[]));
        assert_eq!(single.component_count, 1);
        assert_eq!(single.density, None);
    }

    #[test]
    fn save_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = graph(
            &[("b", &["A"]), ("a", &["A", "B"]), ("z", &[])],
            &[("b", "a"), ("z", "a")],
        );
        let (e, m) = (dir.path().join("g.edges"), dir.path().join("g.meta.json"));
        g.save(&e, &m).unwrap();
        assert_eq!(fs::read_to_string(&e).unwrap(), "a b\na z\n");
        assert_eq!(SocialGraph::load(&e, &m).unwrap(), g);
    }

    #[test]
    fn malformed_event_lines_are_reported_and_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rt.jsonl");
        fs::write(
            &p,
            "{\"retweeter\":\"a\",\"retweeted\":\"b\"}\nnot json\n{\"retweeter\":\"b\",\"retweeted\":\"c\"}\n",
        )
        .unwrap();
        let (events, errors) = read_retweet_events(&p).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(errors.len(), 1);
        assert!(matches!(errors[0], Error::Parse { line: 2, .. }));
    }
}
