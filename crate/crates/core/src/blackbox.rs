//! Query-only variant of the attack. Surrogates of both victims are
//! extracted from posterior queries on generated graphs, then attacked as
//! if they were white-box models.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use unlearnprobe_autodiff::{GradientVector, Tape, Tensor, Var};

use crate::attack::{run_attack, AttackConfig, AttackInputs, AttackMode, AttackResult};
use crate::error::{Error, Result};
use crate::gnn::{forward, Backbone, ModelState, Propagator};
use crate::optim::AdamW;
use crate::unlearn::TargetCounts;

/// Answers posterior queries on graphs given as features plus a relaxed
/// adjacency. This is the only access the black-box attack has to a victim.
pub trait PosteriorOracle: Sync {
    fn num_classes(&self) -> usize;
    fn feature_dim(&self) -> usize;
    fn query(&self, x: &Tensor, adj: &Tensor) -> Result<Tensor>;
}

/// An in-process victim that counts the queries it answers.
pub struct ModelOracle {
    model: ModelState,
    queries: AtomicUsize,
}

impl ModelOracle {
    pub fn new(model: ModelState) -> Self {
        Self {
            model,
            queries: AtomicUsize::new(0),
        }
    }

    pub fn queries(&self) -> usize {
        self.queries.load(Ordering::Relaxed)
    }
}

impl PosteriorOracle for ModelOracle {
    fn num_classes(&self) -> usize {
        self.model.classes
    }

    fn feature_dim(&self) -> usize {
        self.model.in_dim
    }

    fn query(&self, x: &Tensor, adj: &Tensor) -> Result<Tensor> {
        self.queries.fetch_add(1, Ordering::Relaxed);
        let (logits, _) = self
            .model
            .forward_dense(x, adj)
            .map_err(|e| Error::Oracle(e.to_string()))?;
        Ok(crate::gnn::softmax_rows(&logits))
    }
}

fn query_with_retry(oracle: &dyn PosteriorOracle, x: &Tensor, adj: &Tensor) -> Result<Tensor> {
    match oracle.query(x, adj) {
        Ok(p) => Ok(p),
        Err(first) => {
            log::warn!("oracle query failed ({first}); retrying once");
            oracle.query(x, adj)
        }
    }
}

/// Averaged two-point estimate of the gradient of `loss` at `point` from
/// `m` random unit directions: `(d/ε)(L(x + εu) − L(x))u`.
pub fn zo_gradient(
    mut loss: impl FnMut(&[f64]) -> Result<f64>,
    point: &[f64],
    m: usize,
    eps: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if m == 0 || !(eps > 0.0) {
        return Err(Error::Config("zeroth-order estimate needs m >= 1 and eps > 0".into()));
    }
    let d = point.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = loss(point)?;
    let mut est = vec![0.0; d];
    let mut probe = vec![0.0; d];
    for _ in 0..m {
        let mut u: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        u.iter_mut().for_each(|v| *v /= norm);
        for ((p, x), ui) in probe.iter_mut().zip(point).zip(&u) {
            *p = x + eps * ui;
        }
        let delta = loss(&probe)? - base;
        let scale = d as f64 * delta / eps / m as f64;
        for (e, ui) in est.iter_mut().zip(&u) {
            *e += scale * ui;
        }
    }
    Ok(est)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    pub query_nodes: usize,
    pub query_dim: usize,
    pub latent_dim: usize,
    pub queries: usize,
    pub gen_steps: usize,
    pub sur_steps: usize,
    pub gen_lr: f64,
    pub sur_lr: f64,
    pub m: usize,
    pub eps: f64,
    pub surrogate_hidden: usize,
    /// Initial logit of every generated edge.
    pub edge_logit: f64,
    /// Multiplier on the generator's feature output.
    pub feature_scale: f64,
    pub seed: u64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            query_nodes: 250,
            query_dim: 32,
            latent_dim: 32,
            queries: 100,
            gen_steps: 2,
            sur_steps: 5,
            gen_lr: 1e-6,
            sur_lr: 1e-3,
            m: 64,
            eps: 1e-4,
            surrogate_hidden: 256,
            feature_scale: 1.0,
            edge_logit: -4.5,
            seed: 0,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            self.query_nodes,
            self.query_dim,
            self.latent_dim,
            self.queries,
            self.sur_steps,
            self.m,
            self.surrogate_hidden,
        ];
        if counts.contains(&0) {
            return Err(Error::Config("extraction sizes and counts must be positive".into()));
        }
        if !(self.gen_lr > 0.0 && self.sur_lr > 0.0 && self.eps > 0.0 && self.feature_scale > 0.0) {
            return Err(Error::Config("extraction rates, eps and feature scale must be positive".into()));
        }
        Ok(())
    }
}

/// Three-layer perceptron from per-node latents to features, plus free
/// edge logits.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorState {
    params: Vec<Tensor>,
    nodes: usize,
    latent_dim: usize,
    feature_scale: f64,
}

impl GeneratorState {
    pub fn init(cfg: &ExtractionConfig, rng: &mut ChaCha8Rng) -> Self {
        let dims = [cfg.latent_dim, 128, 256, cfg.query_dim];
        let mut params = Vec::new();
        for w in dims.windows(2) {
            let a = (6.0 / (w[0] + w[1]) as f64).sqrt();
            let data = (0..w[0] * w[1]).map(|_| rng.random_range(-a..a)).collect();
            params.push(Tensor::new(w[0], w[1], data).expect("finite init"));
            params.push(Tensor::zeros(1, w[1]));
        }
        let n = cfg.query_nodes;
        let logits = (0..n * n)
            .map(|_| cfg.edge_logit + rng.sample::<f64, _>(StandardNormal))
            .collect();
        params.push(Tensor::new(n, n, logits).expect("finite init"));
        Self {
            params,
            nodes: n,
            latent_dim: cfg.latent_dim,
            feature_scale: cfg.feature_scale,
        }
    }

    fn build<'t>(&self, tape: &'t Tape, params: &[Var<'t>], z: &Tensor) -> Result<(Var<'t>, Var<'t>)> {
        let mut h = tape.constant(z.clone());
        for layer in 0..3 {
            h = h.matmul(params[2 * layer])?.add(params[2 * layer + 1])?;
            if layer < 2 {
                h = h.relu();
            }
        }
        // Per-feature normalization across the query nodes.
        let rows = z.rows() as f64;
        let centered = h.sub(h.sum_rows().scale(1.0 / rows))?;
        let std = centered.mul(centered)?.sum_rows().scale(1.0 / rows).add_scalar(1e-5).sqrt()?;
        let h = centered.div(std)?.scale(self.feature_scale);
        let n = self.nodes;
        let s = params[6].sigmoid();
        let mut half = Tensor::full(n, n, 0.5);
        for i in 0..n {
            half.set(i, i, 0.0);
        }
        let adj = s.add(s.t())?.mul(tape.constant(half))?;
        Ok((h, adj))
    }

    /// A query graph for latent `z`.
    pub fn generate(&self, z: &Tensor) -> Result<(Tensor, Tensor)> {
        let tape = Tape::new();
        let params: Vec<Var> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
        let (x, a) = self.build(&tape, &params, z)?;
        Ok(((*x.value()).clone(), (*a.value()).clone()))
    }

    pub fn sample_latent(&self, rng: &mut ChaCha8Rng) -> Tensor {
        let data = (0..self.nodes * self.latent_dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        Tensor::new(self.nodes, self.latent_dim, data).expect("finite samples")
    }
}

/// Checks the generated adjacency: symmetric, zero diagonal, in `[0, 1]`.
pub fn check_adjacency(a: &Tensor) -> Result<()> {
    let n = a.rows();
    for u in 0..n {
        if a.get(u, u) != 0.0 {
            return Err(Error::Config(format!("nonzero diagonal at {u}")));
        }
        for v in 0..n {
            let x = a.get(u, v);
            if !(0.0..=1.0).contains(&x) || x != a.get(v, u) {
                return Err(Error::Config(format!("adjacency entry ({u}, {v}) = {x} is invalid")));
            }
        }
    }
    Ok(())
}

/// Mean over rows of the L1 distance between two posterior matrices.
pub fn disagreement(p: &Tensor, q: &Tensor) -> f64 {
    let diff: f64 = p.data().iter().zip(q.data()).map(|(a, b)| (a - b).abs()).sum();
    diff / p.rows().max(1) as f64
}

/// Mean soft cross-entropy of a model's posteriors against `targets`.
fn distill_loss<'t>(model: &ModelState, params: &[Var<'t>], x: &Tensor, adj: &Tensor, targets: &Tensor, tape: &'t Tape) -> Result<Var<'t>> {
    let prop = Propagator::dense_for(model.backbone, tape.constant(adj.clone()))?;
    let out = forward(model.backbone, params, &prop, tape.constant(x.clone()))?;
    let w = targets.map(|p| -p / targets.rows() as f64);
    Ok(out.logits.log_softmax().dot(tape.constant(w))?)
}

/// Gradient of the distillation loss at the surrogate's parameters.
pub fn distill_gradient(model: &ModelState, x: &Tensor, adj: &Tensor, targets: &Tensor) -> Result<GradientVector> {
    let tape = Tape::new();
    let params = model.bind(&tape);
    let loss = distill_loss(model, &params, x, adj, targets, &tape)?;
    let g = tape.grad(loss, &params, false)?;
    Ok(GradientVector::new(g.values.iter().map(|v| (*v.value()).clone()).collect()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Extraction {
    pub surrogate: ModelState,
    pub generator: GeneratorState,
    /// Mean disagreement on the query of each round.
    pub disagreement_trace: Vec<f64>,
}

/// Data-free extraction of a GCN surrogate from posterior queries.
pub fn extract(oracle: &dyn PosteriorOracle, cfg: &ExtractionConfig) -> Result<Extraction> {
    cfg.validate()?;
    if cfg.query_dim != oracle.feature_dim() {
        return Err(Error::Config(format!(
            "query_dim {} differs from the victim's input width {}",
            cfg.query_dim,
            oracle.feature_dim()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut generator = GeneratorState::init(cfg, &mut rng);
    let mut surrogate = ModelState::init(
        Backbone::Gcn,
        cfg.query_dim,
        cfg.surrogate_hidden,
        oracle.num_classes(),
        rng.random(),
    );
    let mut gen_opt = AdamW::new(&generator.params, cfg.gen_lr, 0.0);
    let mut sur_params = surrogate.params().to_vec();
    let mut sur_opt = AdamW::new(&sur_params, cfg.sur_lr, 0.0);
    let n = cfg.query_nodes;
    let feat_len = n * cfg.query_dim;
    let mut trace = Vec::with_capacity(cfg.queries);

    for _ in 0..cfg.queries {
        let z = generator.sample_latent(&mut rng);

        for _ in 0..cfg.gen_steps {
            let (x, a) = generator.generate(&z)?;
            check_adjacency(&a)?;
            let point = pack(&x, &a);
            let current = surrogate.clone();
            let loss = |p: &[f64]| -> Result<f64> {
                let (x, a) = unpack(p, n, cfg.query_dim);
                let pv = query_with_retry(oracle, &x, &a)?;
                let ps = crate::gnn::softmax_rows(&current.forward_dense(&x, &a)?.0);
                Ok(disagreement(&pv, &ps))
            };
            let est = zo_gradient(loss, &point, cfg.m, cfg.eps, rng.random())?;
            // Ascent: chain the estimate through the generator.
            let (gx, ga) = unpack_signed(&est, n, cfg.query_dim, feat_len);
            let tape = Tape::new();
            let params: Vec<Var> = generator.params.iter().map(|p| tape.param(p.clone())).collect();
            let (xv, av) = generator.build(&tape, &params, &z)?;
            let surrogate_obj = xv.dot(tape.constant(gx))?.add(av.dot(tape.constant(ga))?)?.neg();
            let grads = tape.grad(surrogate_obj, &params, false)?;
            let grads: Vec<Tensor> = grads.values.iter().map(|v| (*v.value()).clone()).collect();
            gen_opt.step(&mut generator.params, &grads)?;
        }

        let (x, a) = generator.generate(&z)?;
        check_adjacency(&a)?;
        let pv = query_with_retry(oracle, &x, &a)?;
        for _ in 0..cfg.sur_steps {
            let tape = Tape::new();
            let params: Vec<Var> = sur_params.iter().map(|p| tape.param(p.clone())).collect();
            let loss = distill_loss(&surrogate, &params, &x, &a, &pv, &tape)?;
            let grads = tape.grad(loss, &params, false)?;
            let grads: Vec<Tensor> = grads.values.iter().map(|v| (*v.value()).clone()).collect();
            sur_opt.step(&mut sur_params, &grads)?;
            surrogate = ModelState::from_params(
                Backbone::Gcn,
                cfg.query_dim,
                cfg.surrogate_hidden,
                oracle.num_classes(),
                surrogate.seed,
                sur_params.clone(),
            )?;
        }
        let ps = crate::gnn::softmax_rows(&surrogate.forward_dense(&x, &a)?.0);
        trace.push(disagreement(&pv, &ps));
    }
    Ok(Extraction {
        surrogate,
        generator,
        disagreement_trace: trace,
    })
}

/// Features followed by the strict upper triangle of the adjacency.
fn pack(x: &Tensor, a: &Tensor) -> Vec<f64> {
    let n = a.rows();
    let mut out = x.data().to_vec();
    for u in 0..n {
        for v in u + 1..n {
            out.push(a.get(u, v));
        }
    }
    out
}

fn unpack(p: &[f64], n: usize, dim: usize) -> (Tensor, Tensor) {
    let x = Tensor::new(n, dim, p[..n * dim].to_vec()).expect("finite probe");
    let mut a = Tensor::zeros(n, n);
    let mut k = n * dim;
    for u in 0..n {
        for v in u + 1..n {
            let w = p[k].clamp(0.0, 1.0);
            a.set(u, v, w);
            a.set(v, u, w);
            k += 1;
        }
    }
    (x, a)
}

/// Splits a packed gradient into feature and symmetric adjacency parts.
/// Each off-diagonal entry receives half of its pair's gradient, because
/// the pair appears twice in the full matrix.
fn unpack_signed(g: &[f64], n: usize, dim: usize, feat_len: usize) -> (Tensor, Tensor) {
    let gx = Tensor::new(n, dim, g[..feat_len].to_vec()).expect("finite estimate");
    let mut ga = Tensor::zeros(n, n);
    let mut k = feat_len;
    for u in 0..n {
        for v in u + 1..n {
            ga.set(u, v, 0.5 * g[k]);
            ga.set(v, u, 0.5 * g[k]);
            k += 1;
        }
    }
    (gx, ga)
}

/// Cross-entropy of `model`'s posteriors on a region against its labels.
pub fn semantic_loss(model: &ModelState, x: &Tensor, edges: &[(usize, usize)], labels: &[usize]) -> Result<f64> {
    let (logits, _) = model.forward_raw(x.rows(), edges, x)?;
    let p = crate::gnn::softmax_rows(&logits);
    let total: f64 = labels.iter().enumerate().map(|(i, &y)| -p.get(i, y).ln()).sum();
    Ok(total / labels.len() as f64)
}

/// Extracted surrogates and the gradient stand-ins the attack consumes.
#[derive(Clone, Debug)]
pub struct BlackboxKnowledge {
    pub surrogate_ori: ModelState,
    pub surrogate_un: ModelState,
    pub grad_ori: GradientVector,
    pub grad_un: GradientVector,
}

/// Extracts both surrogates and derives released-gradient stand-ins from
/// one fresh probe graph answered by each victim.
pub fn acquire(ori: &dyn PosteriorOracle, un: &dyn PosteriorOracle, cfg: &ExtractionConfig) -> Result<BlackboxKnowledge> {
    acquire_with(&extract(ori, cfg)?, ori, un, cfg)
}

/// [`acquire`] reusing an extraction of the original victim made with `cfg`.
pub fn acquire_with(
    e_ori: &Extraction,
    ori: &dyn PosteriorOracle,
    un: &dyn PosteriorOracle,
    cfg: &ExtractionConfig,
) -> Result<BlackboxKnowledge> {
    let e_un = extract(
        un,
        &ExtractionConfig {
            seed: cfg.seed.wrapping_add(1),
            ..cfg.clone()
        },
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    let z = e_ori.generator.sample_latent(&mut rng);
    let (x, a) = e_ori.generator.generate(&z)?;
    let grad_ori = distill_gradient(&e_ori.surrogate, &x, &a, &query_with_retry(ori, &x, &a)?)?;
    let grad_un = distill_gradient(&e_un.surrogate, &x, &a, &query_with_retry(un, &x, &a)?)?;
    Ok(BlackboxKnowledge {
        surrogate_ori: e_ori.surrogate.clone(),
        surrogate_un: e_un.surrogate,
        grad_ori,
        grad_un,
    })
}

/// Default semantic coefficient for a removal of `num_deleted` nodes.
pub fn default_alpha3(num_deleted: usize) -> f64 {
    if num_deleted == 1 {
        50.0
    } else {
        5000.0
    }
}

/// Runs the white-box optimizer against the surrogates.
pub fn attack_surrogates(
    knowledge: &BlackboxKnowledge,
    counts: &TargetCounts,
    mode: AttackMode,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    let observed = knowledge.grad_ori.sub(&knowledge.grad_un)?;
    let inputs = AttackInputs {
        model: &knowledge.surrogate_ori,
        grad_un: &knowledge.grad_un,
        observed: &observed,
        counts,
    };
    run_attack(&inputs, mode, cfg)
}

pub fn run_blackbox_attack(
    ori: &dyn PosteriorOracle,
    un: &dyn PosteriorOracle,
    counts: &TargetCounts,
    extraction: &ExtractionConfig,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    let knowledge = acquire(ori, un, extraction)?;
    attack_surrogates(&knowledge, counts, AttackMode::for_counts(counts), cfg)
}
