//! Two-layer GCN, SGC and mean-aggregator SAGE node classifiers.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use unlearnprobe_autodiff::{AutodiffError, Csr, GradientVector, SparseConst, Tape, Tensor, Var};

use crate::error::{io_err, Error, Result};
use crate::graphdata::Graph;
use crate::optim::AdamW;

/// Floor applied to row sums of a relaxed adjacency before normalizing.
pub const DEGREE_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backbone {
    Gcn,
    Sgc,
    Sage,
}

impl std::fmt::Display for Backbone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backbone::Gcn => "gcn",
            Backbone::Sgc => "sgc",
            Backbone::Sage => "sage",
        })
    }
}

impl std::str::FromStr for Backbone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(Backbone::Gcn),
            "sgc" => Ok(Backbone::Sgc),
            "sage" => Ok(Backbone::Sage),
            other => Err(Error::Config(format!("unknown backbone {other:?}"))),
        }
    }
}

impl Backbone {
    /// Parameter names and shapes in canonical order.
    pub fn layout(self, in_dim: usize, hidden: usize, classes: usize) -> Vec<(&'static str, [usize; 2])> {
        match self {
            Backbone::Gcn => vec![
                ("w1", [in_dim, hidden]),
                ("b1", [1, hidden]),
                ("w2", [hidden, classes]),
            ],
            Backbone::Sgc => vec![("w1", [in_dim, hidden]), ("w2", [hidden, classes])],
            Backbone::Sage => vec![
                ("w1_self", [in_dim, hidden]),
                ("w1_neigh", [in_dim, hidden]),
                ("b1", [1, hidden]),
                ("w2_self", [hidden, classes]),
                ("w2_neigh", [hidden, classes]),
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.005,
            weight_decay: 5e-4,
            epochs: 200,
            hidden: 256,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.hidden == 0 {
            return Err(Error::Config("hidden must be at least 1".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub backbone: Backbone,
    pub in_dim: usize,
    pub hidden: usize,
    pub classes: usize,
    pub seed: u64,
    params: Vec<Tensor>,
}

impl ModelState {
    /// Glorot-uniform weights and zero biases.
    pub fn init(backbone: Backbone, in_dim: usize, hidden: usize, classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = backbone
            .layout(in_dim, hidden, classes)
            .into_iter()
            .map(|(name, [r, c])| {
                if name.starts_with('b') {
                    return Tensor::zeros(r, c);
                }
                let a = (6.0 / (r + c) as f64).sqrt();
                let data = (0..r * c).map(|_| rng.random_range(-a..a)).collect();
                Tensor::new(r, c, data).expect("finite init")
            })
            .collect();
        Self {
            backbone,
            in_dim,
            hidden,
            classes,
            seed,
            params,
        }
    }

    /// Builds a model from explicit tensors, checking them against the layout.
    pub fn from_params(backbone: Backbone, in_dim: usize, hidden: usize, classes: usize, seed: u64, params: Vec<Tensor>) -> Result<Self> {
        let model = Self {
            backbone,
            in_dim,
            hidden,
            classes,
            seed,
            params,
        };
        model.check_layout()?;
        Ok(model)
    }

    fn check_layout(&self) -> Result<()> {
        let layout = self.layout();
        if layout.len() != self.params.len() || layout.iter().zip(&self.params).any(|(s, p)| *s != p.shape()) {
            return Err(Error::Config(format!("parameters do not match the {} layout", self.backbone)));
        }
        if self.params.iter().any(|p| p.data().iter().any(|v| !v.is_finite())) {
            return Err(Error::Config("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn layout(&self) -> Vec<[usize; 2]> {
        self.backbone
            .layout(self.in_dim, self.hidden, self.classes)
            .into_iter()
            .map(|(_, s)| s)
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.params.iter().flat_map(|p| p.data().iter().copied()).collect()
    }

    /// Puts every parameter on `tape` as a differentiable leaf.
    pub fn bind<'t>(&self, tape: &'t Tape) -> Vec<Var<'t>> {
        self.params.iter().map(|p| tape.param(p.clone())).collect()
    }

    /// Logits and hidden embeddings on `g`.
    pub fn forward(&self, g: &Graph) -> Result<(Tensor, Tensor)> {
        self.forward_raw(g.n(), g.edges(), g.features())
    }

    pub fn forward_raw(&self, n: usize, edges: &[(usize, usize)], x: &Tensor) -> Result<(Tensor, Tensor)> {
        let tape = Tape::new();
        let prop = Propagator::sparse(n, edges)?;
        let params: Vec<Var> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
        let out = forward(self.backbone, &params, &prop, tape.constant(x.clone()))?;
        Ok(((*out.logits.value()).clone(), (*out.hidden.value()).clone()))
    }

    /// Logits and hidden embeddings on a relaxed dense adjacency.
    pub fn forward_dense(&self, x: &Tensor, adj: &Tensor) -> Result<(Tensor, Tensor)> {
        let tape = Tape::new();
        let prop = Propagator::dense_for(self.backbone, tape.constant(adj.clone()))?;
        let params: Vec<Var> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
        let out = forward(self.backbone, &params, &prop, tape.constant(x.clone()))?;
        Ok(((*out.logits.value()).clone(), (*out.hidden.value()).clone()))
    }

    /// Row-stochastic class posteriors on `g`.
    pub fn posteriors(&self, g: &Graph) -> Result<Tensor> {
        Ok(softmax_rows(&self.forward(g)?.0))
    }

    pub fn predict(&self, g: &Graph) -> Result<Vec<usize>> {
        Ok(self.forward(g)?.0.argmax_rows())
    }

    pub fn accuracy(&self, g: &Graph, mask: &[bool]) -> Result<f64> {
        let pred = self.predict(g)?;
        let idx = crate::graphdata::mask_indices(mask);
        if idx.is_empty() {
            return Err(Error::Config("accuracy over an empty mask".into()));
        }
        let hits = idx.iter().filter(|&&i| pred[i] == g.labels()[i]).count();
        Ok(hits as f64 / idx.len() as f64)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let model: Self = serde_json::from_str(&text)?;
        model.check_layout()?;
        Ok(model)
    }
}

pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let mut rows = Vec::with_capacity(logits.rows());
    for r in 0..logits.rows() {
        let row = logits.row(r);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        rows.push(e.into_iter().map(|v| v / s).collect());
    }
    Tensor::from_rows(&rows).unwrap_or_else(|_| Tensor::zeros(0, logits.cols()))
}

/// `D^{-1/2}(A+I)D^{-1/2}` with `D` the degrees of `A+I`, as triplets.
pub fn gcn_norm_triplets(n: usize, edges: &[(usize, usize)]) -> Vec<(usize, usize, f64)> {
    let mut deg = vec![1.0f64; n];
    for &(u, v) in edges {
        deg[u] += 1.0;
        deg[v] += 1.0;
    }
    let mut trip: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0 / deg[i])).collect();
    for &(u, v) in edges {
        let w = 1.0 / (deg[u] * deg[v]).sqrt();
        trip.push((u, v, w));
        trip.push((v, u, w));
    }
    trip
}

/// Row-mean over neighbors; isolated rows are zero.
pub fn mean_triplets(n: usize, edges: &[(usize, usize)]) -> Vec<(usize, usize, f64)> {
    let mut deg = vec![0.0f64; n];
    for &(u, v) in edges {
        deg[u] += 1.0;
        deg[v] += 1.0;
    }
    let mut trip = Vec::with_capacity(2 * edges.len());
    for &(u, v) in edges {
        trip.push((u, v, 1.0 / deg[u]));
        trip.push((v, u, 1.0 / deg[v]));
    }
    trip
}

/// The two propagation operators a forward pass needs.
#[derive(Clone, Debug)]
pub enum Propagator<'t> {
    /// Fixed topology.
    Sparse { gcn: SparseConst, mean: SparseConst },
    /// Relaxed `n x n` adjacency with entries in `[0, 1]`, possibly trainable.
    /// Operators the backbone does not use are left out.
    Dense { gcn: Option<Var<'t>>, mean: Option<Var<'t>> },
}

impl<'t> Propagator<'t> {
    pub fn sparse(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Ok(Propagator::Sparse {
            gcn: SparseConst::new(Csr::from_triplets(n, n, &gcn_norm_triplets(n, edges))?),
            mean: SparseConst::new(Csr::from_triplets(n, n, &mean_triplets(n, edges))?),
        })
    }

    /// Both operators. Degrees are row sums plus one for the self-loop.
    pub fn dense(adj: Var<'t>) -> Result<Self> {
        Self::dense_parts(adj, true, true)
    }

    /// Only the operators `backbone` propagates with.
    pub fn dense_for(backbone: Backbone, adj: Var<'t>) -> Result<Self> {
        let sage = backbone == Backbone::Sage;
        Self::dense_parts(adj, !sage, sage)
    }

    fn dense_parts(adj: Var<'t>, with_gcn: bool, with_mean: bool) -> Result<Self> {
        let [n, m] = adj.shape();
        if n != m {
            return Err(AutodiffError::ShapeMismatch {
                op: "dense propagator",
                lhs: [n, m],
                rhs: [m, n],
            }
            .into());
        }
        let gcn = if with_gcn {
            let dinv = adj.sum_cols().add_scalar(1.0).pow(-0.5)?;
            Some(adj.add(adj.tape().constant(Tensor::eye(n)))?.mul(dinv)?.mul(dinv.t())?)
        } else {
            None
        };
        let mean = if with_mean { Some(adj.row_normalize(DEGREE_FLOOR)?) } else { None };
        Ok(Propagator::Dense { gcn, mean })
    }

    pub fn gcn(&self, x: Var<'t>) -> Result<Var<'t>> {
        Ok(match self {
            Propagator::Sparse { gcn, .. } => x.tape().spmm(gcn, x)?,
            Propagator::Dense { gcn, .. } => gcn.ok_or_else(|| missing_op("normalized adjacency"))?.matmul(x)?,
        })
    }

    pub fn mean(&self, x: Var<'t>) -> Result<Var<'t>> {
        Ok(match self {
            Propagator::Sparse { mean, .. } => x.tape().spmm(mean, x)?,
            Propagator::Dense { mean, .. } => mean.ok_or_else(|| missing_op("mean aggregator"))?.matmul(x)?,
        })
    }

    /// `P·X·W`, multiplying in whichever order is cheaper.
    fn gcn_linear(&self, x: Var<'t>, w: Var<'t>) -> Result<Var<'t>> {
        let [k, m] = w.shape();
        if k <= m {
            self.gcn(x)?.matmul(w).map_err(Into::into)
        } else {
            self.gcn(x.matmul(w)?)
        }
    }
}

pub struct Forward<'t> {
    pub logits: Var<'t>,
    /// Last hidden layer, used as the node embedding.
    pub hidden: Var<'t>,
}

pub fn forward<'t>(backbone: Backbone, params: &[Var<'t>], prop: &Propagator<'t>, x: Var<'t>) -> Result<Forward<'t>> {
    match backbone {
        Backbone::Gcn => {
            let [w1, b1, w2] = params else { return Err(layout_err(backbone)) };
            let hidden = prop.gcn_linear(x, *w1)?.add(*b1)?.relu();
            let logits = prop.gcn_linear(hidden, *w2)?;
            Ok(Forward { logits, hidden })
        }
        Backbone::Sgc => {
            let [w1, w2] = params else { return Err(layout_err(backbone)) };
            let hidden = prop.gcn_linear(prop.gcn(x)?, *w1)?;
            let logits = hidden.matmul(*w2)?;
            Ok(Forward { logits, hidden })
        }
        Backbone::Sage => {
            let [w1s, w1n, b1, w2s, w2n] = params else { return Err(layout_err(backbone)) };
            let hidden = x
                .matmul(*w1s)?
                .add(prop.mean(x)?.matmul(*w1n)?)?
                .add(*b1)?
                .relu();
            let logits = hidden.matmul(*w2s)?.add(prop.mean(hidden)?.matmul(*w2n)?)?;
            Ok(Forward { logits, hidden })
        }
    }
}

fn missing_op(what: &str) -> Error {
    Error::Config(format!("dense propagator built without the {what}"))
}

fn layout_err(backbone: Backbone) -> Error {
    Error::Config(format!("wrong number of parameters for {backbone}"))
}

/// Mean cross-entropy over `rows`.
pub fn cross_entropy<'t>(logits: Var<'t>, labels: &[usize], rows: &[usize]) -> Result<Var<'t>> {
    let [n, c] = logits.shape();
    if rows.is_empty() {
        return Err(Error::Config("cross-entropy over no rows".into()));
    }
    let mut w = Tensor::zeros(n, c);
    let scale = 1.0 / rows.len() as f64;
    for &r in rows {
        w.set(r, labels[r], w.get(r, labels[r]) - scale);
    }
    Ok(logits.log_softmax().dot(logits.tape().constant(w))?)
}

/// Gradient of the mean training loss over `mask`, weight decay excluded.
pub fn loss_gradient(model: &ModelState, g: &Graph, mask: &[bool]) -> Result<GradientVector> {
    let rows = crate::graphdata::mask_indices(mask);
    let tape = Tape::new();
    let params = model.bind(&tape);
    let prop = Propagator::sparse(g.n(), g.edges())?;
    let out = forward(model.backbone, &params, &prop, tape.constant(g.features().clone()))?;
    let loss = cross_entropy(out.logits, g.labels(), &rows)?;
    let grads = tape.grad(loss, &params, false)?;
    Ok(GradientVector::new(
        grads.values.iter().map(|v| (*v.value()).clone()).collect(),
    ))
}

/// Full-batch AdamW on mean cross-entropy over the training mask.
pub fn train(g: &Graph, backbone: Backbone, cfg: &TrainConfig) -> Result<ModelState> {
    cfg.validate()?;
    let rows = g.train_nodes();
    if rows.is_empty() {
        return Err(Error::Config("graph has no training nodes".into()));
    }
    let mut model = ModelState::init(backbone, g.feature_dim(), cfg.hidden, g.num_classes(), cfg.seed);
    let prop = Propagator::sparse(g.n(), g.edges())?;
    let mut opt = AdamW::new(&model.params, cfg.lr, cfg.weight_decay);
    for epoch in 0..cfg.epochs {
        let tape = Tape::new();
        let params = model.bind(&tape);
        let step = forward(backbone, &params, &prop, tape.constant(g.features().clone()))
            .and_then(|out| cross_entropy(out.logits, g.labels(), &rows))
            .and_then(|loss| Ok(tape.grad(loss, &params, false)?));
        let grads = match step {
            Ok(gr) => gr,
            Err(Error::Autodiff(AutodiffError::NonFinite(_))) => return Err(Error::Diverged { epoch }),
            Err(e) => return Err(e),
        };
        let grads: Vec<Tensor> = grads.values.iter().map(|v| (*v.value()).clone()).collect();
        opt.step(&mut model.params, &grads)
            .map_err(|_| Error::Diverged { epoch })?;
    }
    Ok(model)
}
