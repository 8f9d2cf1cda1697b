//! Attributed graphs: ingestion, synthetic generation, splits, homophily and
//! choice of nodes to unlearn.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use unlearnprobe_autodiff::Tensor;

use crate::error::{io_err, Error, Result};

/// Undirected attributed graph with canonical `u < v` edges.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    features: Tensor,
    labels: Vec<usize>,
    num_classes: usize,
    train_mask: Vec<bool>,
    val_mask: Vec<bool>,
    test_mask: Vec<bool>,
}

impl Graph {
    /// Validates and canonicalizes. Masks start empty. Isolated nodes are
    /// allowed here; see [`Graph::require_no_isolated`].
    pub fn new(
        features: Tensor,
        labels: Vec<usize>,
        num_classes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let n = features.rows();
        if labels.len() != n {
            return Err(Error::Graph(format!("{} labels for {n} nodes", labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::Graph(format!("label {bad} outside {num_classes} classes")));
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Graph(format!("edge ({u}, {v}) references a node outside 0..{n}")));
            }
            if u == v {
                return Err(Error::Graph(format!("self-loop on node {u}")));
            }
            if !set.insert((u.min(v), u.max(v))) {
                return Err(Error::Graph(format!("duplicate edge ({u}, {v})")));
            }
        }
        Ok(Self {
            n,
            edges: set.into_iter().collect(),
            features,
            labels,
            num_classes,
            train_mask: vec![false; n],
            val_mask: vec![false; n],
            test_mask: vec![false; n],
        })
    }

    pub fn require_no_isolated(&self) -> Result<()> {
        match self.degrees().iter().position(|&d| d == 0) {
            Some(v) => Err(Error::Graph(format!("node {v} is isolated"))),
            None => Ok(()),
        }
    }

    /// Replaces the masks. They must be disjoint.
    pub fn with_masks(mut self, train: Vec<bool>, val: Vec<bool>, test: Vec<bool>) -> Result<Self> {
        if train.len() != self.n || val.len() != self.n || test.len() != self.n {
            return Err(Error::Graph("mask length differs from node count".into()));
        }
        for i in 0..self.n {
            if u8::from(train[i]) + u8::from(val[i]) + u8::from(test[i]) > 1 {
                return Err(Error::Graph(format!("node {i} is in more than one mask")));
            }
        }
        self.train_mask = train;
        self.val_mask = val;
        self.test_mask = test;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn train_mask(&self) -> &[bool] {
        &self.train_mask
    }

    pub fn val_mask(&self) -> &[bool] {
        &self.val_mask
    }

    pub fn test_mask(&self) -> &[bool] {
        &self.test_mask
    }

    pub fn train_nodes(&self) -> Vec<usize> {
        mask_indices(&self.train_mask)
    }

    pub fn test_nodes(&self) -> Vec<usize> {
        mask_indices(&self.test_mask)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(u, v) in &self.edges {
            d[u] += 1;
            d[v] += 1;
        }
        d
    }

    /// Sorted neighbor lists.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Writes the node and edge CSV files read by [`load_graph`].
    pub fn save(&self, node_file: &Path, edge_file: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(node_file).map_err(io_err(node_file))?);
        let mut header = String::from("id,label");
        for j in 0..self.feature_dim() {
            header.push_str(&format!(",f{j}"));
        }
        writeln!(w, "{header}").map_err(io_err(node_file))?;
        for i in 0..self.n {
            let mut line = format!("{i},{}", self.labels[i]);
            for v in self.features.row(i) {
                line.push_str(&format!(",{v}"));
            }
            writeln!(w, "{line}").map_err(io_err(node_file))?;
        }
        w.flush().map_err(io_err(node_file))?;

        let mut w = BufWriter::new(File::create(edge_file).map_err(io_err(edge_file))?);
        writeln!(w, "src,dst").map_err(io_err(edge_file))?;
        for (u, v) in &self.edges {
            writeln!(w, "{u},{v}").map_err(io_err(edge_file))?;
        }
        w.flush().map_err(io_err(edge_file))
    }
}

pub(crate) fn mask_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(i, &m)| m.then_some(i))
        .collect()
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn read_records(path: &Path) -> Result<(csv::StringRecord, Vec<(usize, csv::StringRecord)>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            other => parse_err(path, 1, format!("{other:?}")),
        })?;
    let header = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        // Line 1 is the header.
        let line = k + 2;
        let rec = rec.map_err(|e| parse_err(path, line, e.to_string()))?;
        rows.push((line, rec));
    }
    Ok((header, rows))
}

/// Loads `id,label,f0..f{D-1}` nodes and `src,dst` undirected edges.
///
/// Ids must be the contiguous range `0..n`. Self-loops, duplicate edges
/// (in either orientation), dangling ids and isolated nodes are rejected.
pub fn load_graph(node_file: &Path, edge_file: &Path) -> Result<Graph> {
    let g = load_region_graph(node_file, edge_file)?;
    g.require_no_isolated()?;
    Ok(g)
}

/// [`load_graph`] without the isolated-node check, for recovered regions.
pub fn load_region_graph(node_file: &Path, edge_file: &Path) -> Result<Graph> {
    let (header, rows) = read_records(node_file)?;
    if header.len() < 3 || &header[0] != "id" || &header[1] != "label" {
        return Err(parse_err(node_file, 1, "expected header id,label,f0,..."));
    }
    for (j, name) in header.iter().skip(2).enumerate() {
        if name != format!("f{j}") {
            return Err(parse_err(node_file, 1, format!("expected column f{j}, found {name}")));
        }
    }
    let dim = header.len() - 2;
    let n = rows.len();
    let mut seen = vec![false; n];
    let mut labels = vec![0usize; n];
    let mut feats = vec![0.0; n * dim];
    for (line, rec) in &rows {
        if rec.len() != dim + 2 {
            return Err(parse_err(node_file, *line, format!("expected {} fields, found {}", dim + 2, rec.len())));
        }
        let id: usize = rec[0]
            .parse()
            .map_err(|_| parse_err(node_file, *line, format!("bad node id {:?}", &rec[0])))?;
        if id >= n {
            return Err(parse_err(node_file, *line, format!("node id {id} outside 0..{n}")));
        }
        if seen[id] {
            return Err(parse_err(node_file, *line, format!("duplicate node id {id}")));
        }
        seen[id] = true;
        labels[id] = rec[1]
            .parse()
            .map_err(|_| parse_err(node_file, *line, format!("bad label {:?}", &rec[1])))?;
        for j in 0..dim {
            let v: f64 = rec[j + 2]
                .parse()
                .map_err(|_| parse_err(node_file, *line, format!("non-numeric feature {:?}", &rec[j + 2])))?;
            if !v.is_finite() {
                return Err(parse_err(node_file, *line, "non-finite feature"));
            }
            feats[id * dim + j] = v;
        }
    }
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);

    let (header, rows) = read_records(edge_file)?;
    if header.len() != 2 || &header[0] != "src" || &header[1] != "dst" {
        return Err(parse_err(edge_file, 1, "expected header src,dst"));
    }
    let mut set = BTreeSet::new();
    for (line, rec) in &rows {
        if rec.len() != 2 {
            return Err(parse_err(edge_file, *line, "expected 2 fields"));
        }
        let mut ends = [0usize; 2];
        for (k, end) in ends.iter_mut().enumerate() {
            *end = rec[k]
                .parse()
                .map_err(|_| parse_err(edge_file, *line, format!("bad node id {:?}", &rec[k])))?;
            if *end >= n {
                return Err(parse_err(edge_file, *line, format!("dangling node id {end} (graph has {n} nodes)")));
            }
        }
        let [u, v] = ends;
        if u == v {
            return Err(parse_err(edge_file, *line, format!("self-loop on node {u}")));
        }
        if !set.insert((u.min(v), u.max(v))) {
            return Err(parse_err(edge_file, *line, format!("duplicate edge ({u}, {v})")));
        }
    }
    Graph::new(Tensor::new(n, dim, feats)?, labels, num_classes, set)
}

/// Parameters of the planted-partition generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub classes: usize,
    pub dim: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub seed: u64,
}

/// Planted-partition graph with class-conditional Gaussian features.
///
/// Labels are balanced. Class `c` has mean `2 * e_{c mod D}` and unit
/// variance. Nodes left isolated are attached to a random node of their own
/// class.
pub fn synth_graph(spec: &SynthSpec) -> Result<Graph> {
    let SynthSpec {
        n,
        classes,
        dim,
        p_in,
        p_out,
        seed,
    } = *spec;
    if classes < 2 || dim == 0 {
        return Err(Error::Config("need at least 2 classes and 1 feature".into()));
    }
    if n < 2 * classes {
        return Err(Error::Config(format!("n = {n} is below 2 * classes = {}", 2 * classes)));
    }
    let valid = |p: f64| (0.0..=1.0).contains(&p);
    if !valid(p_in) || !valid(p_out) || p_in <= p_out {
        return Err(Error::Config(format!("need 0 <= p_out < p_in <= 1, got p_in={p_in} p_out={p_out}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    labels.shuffle(&mut rng);

    let mut edges = BTreeSet::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] { p_in } else { p_out };
            if rng.random_bool(p) {
                edges.insert((u, v));
            }
        }
    }
    let mut degree = vec![0usize; n];
    for &(u, v) in &edges {
        degree[u] += 1;
        degree[v] += 1;
    }
    for u in 0..n {
        if degree[u] > 0 {
            continue;
        }
        let peers: Vec<usize> = (0..n).filter(|&v| v != u && labels[v] == labels[u]).collect();
        let v = peers[rng.random_range(0..peers.len())];
        edges.insert((u.min(v), u.max(v)));
        degree[u] += 1;
        degree[v] += 1;
    }

    let mut feats = Vec::with_capacity(n * dim);
    for &y in &labels {
        for j in 0..dim {
            let mean = if j == y % dim { 2.0 } else { 0.0 };
            feats.push(mean + rng.sample::<f64, _>(StandardNormal));
        }
    }
    let g = Graph::new(Tensor::new(n, dim, feats)?, labels, classes, edges)?;
    g.require_no_isolated()?;
    Ok(g)
}

/// Per-class random split; whatever is left over becomes the test set.
pub fn split(g: Graph, per_class_train: usize, per_class_val: usize, seed: u64) -> Result<Graph> {
    if per_class_train == 0 {
        return Err(Error::Config("per_class_train must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.n();
    let (mut train, mut val, mut test) = (vec![false; n], vec![false; n], vec![true; n]);
    for c in 0..g.num_classes() {
        let mut members: Vec<usize> = (0..n).filter(|&i| g.labels()[i] == c).collect();
        if members.len() < per_class_train + per_class_val {
            return Err(Error::Config(format!(
                "class {c} has {} nodes, fewer than {} + {}",
                members.len(),
                per_class_train,
                per_class_val
            )));
        }
        members.shuffle(&mut rng);
        for (k, &i) in members.iter().enumerate() {
            if k < per_class_train {
                train[i] = true;
                test[i] = false;
            } else if k < per_class_train + per_class_val {
                val[i] = true;
                test[i] = false;
            }
        }
    }
    g.with_masks(train, val, test)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Random,
    Worst,
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Policy::Random => "random",
            Policy::Worst => "worst",
        })
    }
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Policy::Random),
            "worst" => Ok(Policy::Worst),
            other => Err(Error::Config(format!("unknown policy {other:?}"))),
        }
    }
}

/// A set of training nodes to unlearn.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeletionRequest {
    deleted: Vec<usize>,
    pub policy: Policy,
}

impl DeletionRequest {
    /// Sorts and deduplicates `nodes`. Membership in the training set is
    /// checked by [`DeletionRequest::validate`].
    pub fn new(nodes: impl IntoIterator<Item = usize>, policy: Policy) -> Result<Self> {
        let set: BTreeSet<usize> = nodes.into_iter().collect();
        if set.is_empty() {
            return Err(Error::Request("no nodes to delete".into()));
        }
        Ok(Self {
            deleted: set.into_iter().collect(),
            policy,
        })
    }

    pub fn deleted(&self) -> &[usize] {
        &self.deleted
    }

    pub fn len(&self) -> usize {
        self.deleted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deleted.is_empty()
    }

    pub fn validate(&self, g: &Graph) -> Result<()> {
        for &v in &self.deleted {
            if v >= g.n() {
                return Err(Error::Request(format!("node {v} outside 0..{}", g.n())));
            }
            if !g.train_mask()[v] {
                return Err(Error::Request(format!("node {v} is not a training node")));
            }
        }
        Ok(())
    }
}

/// Training nodes by descending degree, ties by ascending id.
pub fn degree_ranking(g: &Graph) -> Vec<usize> {
    let deg = g.degrees();
    let mut nodes = g.train_nodes();
    nodes.sort_by(|&a, &b| deg[b].cmp(&deg[a]).then(a.cmp(&b)));
    nodes
}

/// One single-node request per selected training node; the count is
/// `round(k_fraction * |train|)`.
pub fn select_targets(g: &Graph, k_fraction: f64, policy: Policy, seed: u64) -> Result<Vec<DeletionRequest>> {
    if !(k_fraction > 0.0 && k_fraction <= 1.0) {
        return Err(Error::Config(format!("k_fraction must be in (0, 1], got {k_fraction}")));
    }
    let train = g.train_nodes();
    let count = (k_fraction * train.len() as f64).round() as usize;
    if count == 0 {
        return Err(Error::Request(format!(
            "k_fraction {k_fraction} selects no node out of {} training nodes",
            train.len()
        )));
    }
    let chosen = match policy {
        Policy::Worst => degree_ranking(g)[..count].to_vec(),
        Policy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rand::seq::index::sample(&mut rng, train.len(), count)
                .into_iter()
                .map(|i| train[i])
                .collect()
        }
    };
    chosen
        .into_iter()
        .map(|v| DeletionRequest::new([v], policy))
        .collect()
}

/// `groups` disjoint requests of `size` nodes each.
///
/// The worst policy takes the top `groups * size` training nodes by degree
/// and cuts the ranking into consecutive chunks; the random policy samples
/// the same number of distinct training nodes.
pub fn select_groups(g: &Graph, size: usize, groups: usize, policy: Policy, seed: u64) -> Result<Vec<DeletionRequest>> {
    if size == 0 || groups == 0 {
        return Err(Error::Config("group size and count must be positive".into()));
    }
    let train = g.train_nodes();
    let total = size * groups;
    if total > train.len() {
        return Err(Error::Request(format!(
            "{groups} groups of {size} need {total} training nodes, only {} exist",
            train.len()
        )));
    }
    let pool: Vec<usize> = match policy {
        Policy::Worst => degree_ranking(g)[..total].to_vec(),
        Policy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rand::seq::index::sample(&mut rng, train.len(), total)
                .into_iter()
                .map(|i| train[i])
                .collect()
        }
    };
    pool.chunks(size)
        .map(|c| DeletionRequest::new(c.iter().copied(), policy))
        .collect()
}

/// Which edges among the recovery nodes belong to the region.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionEdges {
    /// Edges with at least one endpoint in the deleted set.
    #[default]
    Incident,
    /// Every edge of the subgraph induced by the recovery nodes.
    Induced,
}

/// Ground truth for one deletion: the deleted nodes, their one-hop
/// neighbors, and the edges and features among them.
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryTarget {
    /// Deleted nodes first, then the affected neighbors, each part sorted.
    pub rec_nodes: Vec<usize>,
    pub num_deleted: usize,
    /// Edges in original node ids.
    pub rec_edges: Vec<(usize, usize)>,
    pub rec_x: Tensor,
    pub rec_y: Vec<usize>,
}

impl RecoveryTarget {
    pub fn len(&self) -> usize {
        self.rec_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rec_nodes.is_empty()
    }

    /// Edges re-indexed into positions of `rec_nodes`.
    pub fn local_edges(&self) -> Vec<(usize, usize)> {
        let pos = |v: usize| self.rec_nodes.iter().position(|&r| r == v).expect("edge endpoint in region");
        let mut out: Vec<(usize, usize)> = self
            .rec_edges
            .iter()
            .map(|&(u, v)| {
                let (a, b) = (pos(u), pos(v));
                (a.min(b), a.max(b))
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// The region as a standalone graph, local ids.
    pub fn to_graph(&self, num_classes: usize) -> Result<Graph> {
        Graph::new(self.rec_x.clone(), self.rec_y.clone(), num_classes, self.local_edges())
    }
}

pub fn recovery_target(g: &Graph, req: &DeletionRequest, scope: RegionEdges) -> Result<RecoveryTarget> {
    req.validate(g)?;
    let deleted: BTreeSet<usize> = req.deleted().iter().copied().collect();
    let adj = g.neighbors();
    let mut nbrs = BTreeSet::new();
    for &v in &deleted {
        for &u in &adj[v] {
            if !deleted.contains(&u) {
                nbrs.insert(u);
            }
        }
    }
    if nbrs.is_empty() {
        return Err(Error::Request(
            "deleted nodes have no neighbor outside the request".into(),
        ));
    }
    let mut rec_nodes: Vec<usize> = deleted.iter().copied().collect();
    rec_nodes.extend(nbrs.iter().copied());
    let in_region = |v: usize| deleted.contains(&v) || nbrs.contains(&v);
    let rec_edges: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .copied()
        .filter(|&(u, v)| match scope {
            RegionEdges::Incident => deleted.contains(&u) || deleted.contains(&v),
            RegionEdges::Induced => in_region(u) && in_region(v),
        })
        .collect();
    Ok(RecoveryTarget {
        rec_x: g.features().select_rows(&rec_nodes),
        rec_y: rec_nodes.iter().map(|&v| g.labels()[v]).collect(),
        num_deleted: deleted.len(),
        rec_nodes,
        rec_edges,
    })
}

/// Mean over nodes of the fraction of neighbors sharing the node's label.
pub fn node_homophily(g: &Graph) -> Result<f64> {
    g.require_no_isolated()?;
    let adj = g.neighbors();
    let y = g.labels();
    let total: f64 = adj
        .iter()
        .enumerate()
        .map(|(v, list)| list.iter().filter(|&&u| y[u] == y[v]).count() as f64 / list.len() as f64)
        .sum();
    Ok(total / g.n() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn star(leaves: usize) -> Graph {
        let n = leaves + 1;
        let x = Tensor::new(n, 2, (0..2 * n).map(|i| i as f64).collect()).unwrap();
        let labels = (0..n).map(|i| i % 2).collect();
        let g = Graph::new(x, labels, 2, (1..n).map(|v| (0, v))).unwrap();
        g.with_masks(vec![true; n], vec![false; n], vec![false; n]).unwrap()
    }

    fn spec(p_out: f64, seed: u64) -> SynthSpec {
        SynthSpec {
            n: 200,
            classes: 4,
            dim: 16,
            p_in: 0.05,
            p_out,
            seed,
        }
    }

    #[test]
    fn constructor_rejects_bad_edges() {
        let x = Tensor::zeros(3, 1);
        assert!(Graph::new(x.clone(), vec![0; 3], 1, [(0, 0)]).is_err());
        assert!(Graph::new(x.clone(), vec![0; 3], 1, [(0, 1), (1, 0)]).is_err());
        assert!(Graph::new(x, vec![0; 3], 1, [(0, 9)]).is_err());
    }

    #[test]
    fn synth_homophily_in_range() {
        let g = synth_graph(&spec(0.005, 1)).unwrap();
        let h = node_homophily(&g).unwrap();
        assert!((0.7..=0.95).contains(&h), "homophily {h}");
    }

    #[test]
    fn synth_without_cross_edges_is_fully_homophilous() {
        let g = synth_graph(&spec(0.0, 2)).unwrap();
        assert_eq!(node_homophily(&g).unwrap(), 1.0);
    }

    #[test]
    fn synth_is_deterministic() {
        assert_eq!(synth_graph(&spec(0.005, 3)).unwrap(), synth_graph(&spec(0.005, 3)).unwrap());
        assert_ne!(synth_graph(&spec(0.005, 3)).unwrap(), synth_graph(&spec(0.005, 4)).unwrap());
    }

    #[test]
    fn synth_rejects_infeasible() {
        let mut s = spec(0.06, 1);
        assert!(synth_graph(&s).is_err());
        s = spec(0.005, 1);
        s.n = 7;
        assert!(synth_graph(&s).is_err());
    }

    #[test]
    fn synth_has_no_isolated_nodes() {
        let mut s = spec(0.0, 5);
        s.p_in = 0.001;
        synth_graph(&s).unwrap().require_no_isolated().unwrap();
    }

    #[test]
    fn split_sizes_and_determinism() {
        let s = SynthSpec {
            n: 7 * 60,
            classes: 7,
            dim: 8,
            p_in: 0.05,
            p_out: 0.002,
            seed: 1,
        };
        let g = synth_graph(&s).unwrap();
        let a = split(g.clone(), 20, 30, 9).unwrap();
        assert_eq!(a.train_nodes().len(), 140);
        assert_eq!(mask_indices(a.val_mask()).len(), 210);
        assert_eq!(a.test_nodes().len(), 420 - 350);
        assert_eq!(a, split(g.clone(), 20, 30, 9).unwrap());
        assert!(split(g.clone(), 0, 30, 9).is_err());
        assert!(split(g, 50, 30, 9).is_err());
    }

    #[test]
    fn worst_on_star_is_hub() {
        let g = star(4);
        let reqs = select_targets(&g, 0.2, Policy::Worst, 0).unwrap();
        assert_eq!(reqs.len(), 1);
        assert_eq!(reqs[0].deleted(), &[0]);
    }

    #[test]
    fn ten_percent_of_140() {
        let s = SynthSpec {
            n: 7 * 60,
            classes: 7,
            dim: 8,
            p_in: 0.05,
            p_out: 0.002,
            seed: 1,
        };
        let g = split(synth_graph(&s).unwrap(), 20, 30, 9).unwrap();
        for policy in [Policy::Random, Policy::Worst] {
            assert_eq!(select_targets(&g, 0.1, policy, 4).unwrap().len(), 14);
        }
    }

    #[test]
    fn empty_selection_is_an_error() {
        let g = star(4);
        assert!(select_targets(&g, 0.01, Policy::Random, 0).is_err());
        assert!(select_targets(&g, 0.0, Policy::Random, 0).is_err());
    }

    #[test]
    fn star_recovery_target() {
        let g = star(4);
        let t = recovery_target(&g, &DeletionRequest::new([0], Policy::Worst).unwrap(), RegionEdges::Incident).unwrap();
        assert_eq!(t.rec_nodes, vec![0, 1, 2, 3, 4]);
        assert_eq!(t.rec_edges.len(), 4);
        assert_eq!(t.local_edges(), vec![(0, 1), (0, 2), (0, 3), (0, 4)]);
    }

    #[test]
    fn adjacent_deleted_pair_keeps_shared_edge_once() {
        // path 0-1-2-3
        let x = Tensor::zeros(4, 1);
        let g = Graph::new(x, vec![0; 4], 1, [(0, 1), (1, 2), (2, 3)])
            .unwrap()
            .with_masks(vec![true; 4], vec![false; 4], vec![false; 4])
            .unwrap();
        let t = recovery_target(&g, &DeletionRequest::new([1, 2], Policy::Random).unwrap(), RegionEdges::Incident).unwrap();
        assert_eq!(t.rec_nodes, vec![1, 2, 0, 3]);
        assert_eq!(t.rec_edges, vec![(0, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn homophily_two_nodes() {
        let same = Graph::new(Tensor::zeros(2, 1), vec![1, 1], 2, [(0, 1)]).unwrap();
        let cross = Graph::new(Tensor::zeros(2, 1), vec![0, 1], 2, [(0, 1)]).unwrap();
        assert_eq!(node_homophily(&same).unwrap(), 1.0);
        assert_eq!(node_homophily(&cross).unwrap(), 0.0);
    }

    #[test]
    fn request_must_be_training_nodes() {
        let g = star(3).with_masks(vec![true, false, false, false], vec![false; 4], vec![false, true, true, true]).unwrap();
        let req = DeletionRequest::new([2], Policy::Random).unwrap();
        assert!(req.validate(&g).is_err());
        assert!(DeletionRequest::new(std::iter::empty(), Policy::Random).is_err());
    }

    #[test]
    fn groups_are_disjoint_chunks_of_ranking() {
        let s = spec(0.005, 8);
        let g = split(synth_graph(&s).unwrap(), 20, 10, 1).unwrap();
        let groups = select_groups(&g, 5, 5, Policy::Worst, 0).unwrap();
        let ranking = degree_ranking(&g);
        let flat: Vec<usize> = groups.iter().flat_map(|r| r.deleted().to_vec()).collect();
        let mut sorted_chunks: Vec<usize> = ranking[..25].chunks(5).flat_map(|c| {
            let mut c = c.to_vec();
            c.sort_unstable();
            c
        }).collect();
        assert_eq!(flat, std::mem::take(&mut sorted_chunks));
    }
}
