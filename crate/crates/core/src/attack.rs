//! White-box reconstruction of an unlearned region from the gradient
//! difference of the original and unlearned models.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use unlearnprobe_autodiff::{AutodiffError, Csr, GradientVector, SparseConst, Tape, Tensor, Var};

use crate::error::{io_err, Error, Result};
use crate::gnn::{cross_entropy, forward, Backbone, ModelState, Propagator};
use crate::optim::AdamW;
use crate::unlearn::TargetCounts;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackMode {
    /// One deleted node; its star topology is known and fixed.
    Single,
    /// Several deleted nodes; topology is learned as a relaxed adjacency.
    Multi,
}

impl AttackMode {
    pub fn for_counts(counts: &TargetCounts) -> Self {
        if counts.num_deleted == 1 {
            AttackMode::Single
        } else {
            AttackMode::Multi
        }
    }
}

impl std::fmt::Display for AttackMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AttackMode::Single => "single",
            AttackMode::Multi => "multi",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Topology {
    Fixed(Vec<(usize, usize)>),
    /// Symmetric, zero diagonal, entries in `[0, 1]`.
    Relaxed(Tensor),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DummyGraph {
    pub x: Tensor,
    pub topology: Topology,
    pub labels: Vec<usize>,
}

/// Expected density of the initial relaxed adjacency.
pub fn edge_probability(num_edges: usize, num_nodes: usize) -> f64 {
    let pairs = num_nodes * num_nodes.saturating_sub(1) / 2;
    if pairs == 0 {
        0.0
    } else {
        (num_edges as f64 / pairs as f64).min(1.0)
    }
}

pub fn init_dummy(counts: &TargetCounts, dim: usize, mode: AttackMode, seed: u64) -> Result<DummyGraph> {
    let n = counts.num_nodes();
    if n <= counts.num_deleted {
        return Err(Error::Request("recovery region has no neighbor".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian(n, dim, &mut rng);
    let topology = match mode {
        AttackMode::Single => {
            if counts.num_deleted != 1 {
                return Err(Error::Config(format!(
                    "single mode needs one deleted node, got {}",
                    counts.num_deleted
                )));
            }
            Topology::Fixed((1..n).map(|v| (0, v)).collect())
        }
        AttackMode::Multi => {
            let p = edge_probability(counts.num_edges, n);
            let mut a = Tensor::zeros(n, n);
            for u in 0..n {
                for v in u + 1..n {
                    if rng.random_bool(p) {
                        a.set(u, v, 1.0);
                        a.set(v, u, 1.0);
                    }
                }
            }
            Topology::Relaxed(a)
        }
    };
    Ok(DummyGraph {
        x,
        topology,
        labels: counts.rec_labels.clone(),
    })
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Tensor::new(rows, cols, data).expect("finite samples")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    /// Curvature coefficient.
    pub alpha1: f64,
    /// Smoothness coefficient.
    pub alpha2: f64,
    /// Semantic calibration coefficient; only the black-box attack sets it.
    pub alpha3: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub max_iters: usize,
    /// Fractions of `max_iters` at which the step size is decayed.
    pub decay_points: Vec<f64>,
    pub decay_factor: f64,
    pub fisher_damping: f64,
    pub fisher_every: usize,
    /// Iterations without improvement before stopping early.
    pub patience: usize,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            alpha1: 1.0,
            alpha2: 1e-5,
            alpha3: 0.0,
            lr: 0.01,
            weight_decay: 0.0,
            max_iters: 10_000,
            decay_points: vec![3.0 / 8.0, 5.0 / 8.0, 7.0 / 8.0],
            decay_factor: 0.5,
            fisher_damping: 1e-4,
            fisher_every: 50,
            patience: 1000,
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.alpha1 >= 0.0 && self.alpha2 >= 0.0 && self.alpha3 >= 0.0) {
            return bad("attack coefficients must be non-negative");
        }
        if !(self.decay_factor > 0.0 && self.decay_factor < 1.0) {
            return bad("decay_factor must lie in (0, 1)");
        }
        if !(self.lr > 0.0) {
            return bad("attack lr must be positive");
        }
        if !(self.fisher_damping > 0.0) {
            return bad("fisher_damping must be positive");
        }
        if self.fisher_every == 0 || self.patience == 0 {
            return bad("fisher_every and patience must be positive");
        }
        if self.decay_points.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("decay points must be fractions of max_iters");
        }
        Ok(())
    }

    fn lr_at(&self, iter: usize) -> f64 {
        let done = self
            .decay_points
            .iter()
            .filter(|&&p| iter >= (p * self.max_iters as f64).round() as usize)
            .count();
        self.lr * self.decay_factor.powi(done as i32)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackResult {
    pub x: Tensor,
    /// Recovered edges in local ids.
    pub edges: Vec<(usize, usize)>,
    /// Learned edge probabilities, multi mode only.
    pub probabilities: Option<Tensor>,
    pub loss_trace: Vec<f64>,
    pub iterations: usize,
    pub early_stopped: bool,
}

impl AttackResult {
    /// Writes `features.csv`, `edges.csv`, `loss.csv` and `config.json`.
    pub fn save(&self, dir: &Path, labels: &[usize], cfg: &AttackConfig) -> Result<()> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let x = &self.x;
        let g = crate::graphdata::Graph::new(x.clone(), labels.to_vec(), labels.iter().max().map_or(1, |m| m + 1), self.edges.iter().copied())?;
        g.save(&dir.join("features.csv"), &dir.join("edges.csv"))?;
        let p = dir.join("loss.csv");
        let mut w = BufWriter::new(File::create(&p).map_err(io_err(&p))?);
        writeln!(w, "iteration,loss").map_err(io_err(&p))?;
        for (i, l) in self.loss_trace.iter().enumerate() {
            writeln!(w, "{i},{l}").map_err(io_err(&p))?;
        }
        w.flush().map_err(io_err(&p))?;
        let p = dir.join("config.json");
        fs::write(&p, serde_json::to_string_pretty(cfg)?).map_err(io_err(&p))
    }
}

/// Everything the attacker holds.
#[derive(Clone, Copy, Debug)]
pub struct AttackInputs<'a> {
    /// Parameters `θ` of the original model.
    pub model: &'a ModelState,
    /// Released gradient of the unlearned model.
    pub grad_un: &'a GradientVector,
    /// Observed difference `∇_ori − ∇_un`.
    pub observed: &'a GradientVector,
    pub counts: &'a TargetCounts,
}

/// Trainable handles of a dummy on one tape.
struct Bound<'t> {
    x: Var<'t>,
    adj: Option<Var<'t>>,
    prop: Propagator<'t>,
    edges: Option<SparseConst>,
}

fn bind<'t>(tape: &'t Tape, dummy: &DummyGraph, backbone: Backbone) -> Result<Bound<'t>> {
    let x = tape.param(dummy.x.clone());
    let n = dummy.x.rows();
    Ok(match &dummy.topology {
        Topology::Fixed(edges) => Bound {
            x,
            adj: None,
            prop: Propagator::sparse(n, edges)?,
            edges: Some(incidence(n, edges)?),
        },
        Topology::Relaxed(a) => {
            let adj = tape.param(a.clone());
            Bound {
                x,
                adj: Some(adj),
                prop: Propagator::dense_for(backbone, adj)?,
                edges: None,
            }
        }
    })
}

/// Signed edge-node incidence matrix, one row per edge.
fn incidence(n: usize, edges: &[(usize, usize)]) -> Result<SparseConst> {
    let trip: Vec<(usize, usize, f64)> = edges
        .iter()
        .enumerate()
        .flat_map(|(k, &(u, v))| [(k, u, 1.0), (k, v, -1.0)])
        .collect();
    Ok(SparseConst::new(Csr::from_triplets(edges.len(), n, &trip)?))
}

/// The synthetic gradient difference for a dummy, differentiable with
/// respect to the dummy, plus the dummy's mean loss.
pub fn dummy_grad_diff<'t>(
    tape: &'t Tape,
    model: &ModelState,
    prop: &Propagator<'t>,
    x: Var<'t>,
    labels: &[usize],
    grad_un: &GradientVector,
) -> Result<(Vec<Var<'t>>, Var<'t>)> {
    let params = model.bind(tape);
    let out = forward(model.backbone, &params, prop, x)?;
    let rows: Vec<usize> = (0..labels.len()).collect();
    let loss = cross_entropy(out.logits, labels, &rows)?;
    let grads = tape.grad(loss, &params, true)?;
    let diff = grads
        .values
        .into_iter()
        .zip(grad_un.segments())
        .map(|(g, u)| Ok(g.sub(tape.constant(u.clone()))?))
        .collect::<Result<Vec<_>>>()?;
    Ok((diff, loss))
}

/// `(1 − cos) + MSE` between synthetic and observed differences. A zero
/// vector makes the cosine term 1.
pub fn grad_match_loss<'t>(syn: &[Var<'t>], obs: &GradientVector) -> Result<Var<'t>> {
    let tape = syn.first().ok_or_else(|| Error::Config("empty gradient".into()))?.tape();
    if syn.len() != obs.segments().len() {
        return Err(Error::Config("gradient layouts differ".into()));
    }
    let m = obs.len() as f64;
    let mut dot = tape.scalar(0.0);
    let mut syn_sq = tape.scalar(0.0);
    let mut sq_err = tape.scalar(0.0);
    for (s, o) in syn.iter().zip(obs.segments()) {
        let o = tape.constant(o.clone());
        dot = dot.add(s.dot(o)?)?;
        syn_sq = syn_sq.add(s.dot(*s)?)?;
        let d = s.sub(o)?;
        sq_err = sq_err.add(d.dot(d)?)?;
    }
    let obs_norm = obs.norm();
    let cos_term = if syn_sq.item() == 0.0 || obs_norm == 0.0 {
        tape.scalar(1.0)
    } else {
        dot.div(syn_sq.sqrt()?)?.scale(1.0 / obs_norm).neg().add_scalar(1.0)
    };
    Ok(cos_term.add(sq_err.scale(1.0 / m))?)
}

/// Diagonal empirical Fisher of the per-node log-likelihoods on a dummy,
/// plus `damping`.
pub fn empirical_fisher_diag(model: &ModelState, dummy: &DummyGraph, damping: f64) -> Result<GradientVector> {
    let tape = Tape::new();
    let x = tape.constant(dummy.x.clone());
    let prop = match &dummy.topology {
        Topology::Fixed(edges) => Propagator::sparse(dummy.x.rows(), edges)?,
        Topology::Relaxed(a) => Propagator::dense_for(model.backbone, tape.constant(a.clone()))?,
    };
    fisher_on(&tape, model, &prop, x, &dummy.labels, damping)
}

fn fisher_on<'t>(
    tape: &'t Tape,
    model: &ModelState,
    prop: &Propagator<'t>,
    x: Var<'t>,
    labels: &[usize],
    damping: f64,
) -> Result<GradientVector> {
    let params = model.bind(tape);
    let out = forward(model.backbone, &params, prop, x)?;
    let logp = out.logits.log_softmax();
    let n = labels.len();
    let mut acc: Vec<Vec<f64>> = model.params().iter().map(|p| vec![0.0; p.len()]).collect();
    for (i, &y) in labels.iter().enumerate() {
        let mut pick = Tensor::zeros(n, model.classes);
        pick.set(i, y, 1.0);
        let ll = logp.dot(tape.constant(pick))?;
        let grads = tape.grad(ll, &params, false)?;
        for (a, g) in acc.iter_mut().zip(&grads.values) {
            for (s, v) in a.iter_mut().zip(g.value().data()) {
                *s += v * v;
            }
        }
    }
    let layout = model.layout();
    let segments = acc
        .into_iter()
        .zip(layout)
        .map(|(a, [r, c])| Tensor::new(r, c, a.into_iter().map(|s| s / n as f64 + damping).collect()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(GradientVector::new(segments))
}

/// `Σ_j (syn_j − obs_j)² / fisher_j`.
pub fn curvature_loss<'t>(syn: &[Var<'t>], obs: &GradientVector, fisher: &GradientVector) -> Result<Var<'t>> {
    let tape = syn.first().ok_or_else(|| Error::Config("empty gradient".into()))?.tape();
    let mut total = tape.scalar(0.0);
    for ((s, o), f) in syn.iter().zip(obs.segments()).zip(fisher.segments()) {
        let d = s.sub(tape.constant(o.clone()))?;
        let inv = tape.constant(f.map(|v| 1.0 / v));
        total = total.add(d.mul(d)?.dot(inv)?)?;
    }
    Ok(total)
}

/// Dirichlet energy `tr(Xᵀ L X)`: the sum over edges of weighted squared
/// feature differences.
pub fn smooth_loss<'t>(x: Var<'t>, edges: Option<&SparseConst>, adj: Option<Var<'t>>) -> Result<Var<'t>> {
    let tape = x.tape();
    if let Some(b) = edges {
        let d = tape.spmm(b, x)?;
        return Ok(d.dot(d)?);
    }
    let a = adj.ok_or_else(|| Error::Config("smoothness needs a topology".into()))?;
    let deg_term = a.sum_cols().dot(x.mul(x)?.sum_cols())?;
    let cross = x.dot(a.matmul(x)?)?;
    Ok(deg_term.sub(cross)?)
}

/// Clamps to `[0, 1]`, symmetrizes and zeroes the diagonal.
pub fn project(a: &Tensor) -> Tensor {
    let n = a.rows();
    let mut out = Tensor::zeros(n, n);
    for u in 0..n {
        for v in 0..n {
            if u != v {
                let s = 0.5 * (a.get(u, v).clamp(0.0, 1.0) + a.get(v, u).clamp(0.0, 1.0));
                out.set(u, v, s);
            }
        }
    }
    out
}

/// Samples each pair with its probability, then adds the likeliest missing
/// or drops the least likely present pairs until exactly `budget` remain.
pub fn finalize(prob: &Tensor, budget: usize, seed: u64) -> Vec<(usize, usize)> {
    let n = prob.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<((usize, usize), f64, bool)> = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = prob.get(u, v).clamp(0.0, 1.0);
            pairs.push(((u, v), p, rng.random_bool(p)));
        }
    }
    let budget = budget.min(pairs.len());
    let mut chosen = pairs.iter().filter(|t| t.2).count();
    if chosen < budget {
        let mut missing: Vec<usize> = (0..pairs.len()).filter(|&k| !pairs[k].2).collect();
        missing.sort_by(|&a, &b| pairs[b].1.total_cmp(&pairs[a].1).then(a.cmp(&b)));
        for k in missing.into_iter().take(budget - chosen) {
            pairs[k].2 = true;
        }
    } else if chosen > budget {
        let mut present: Vec<usize> = (0..pairs.len()).filter(|&k| pairs[k].2).collect();
        present.sort_by(|&a, &b| pairs[a].1.total_cmp(&pairs[b].1).then(a.cmp(&b)));
        for k in present.into_iter().take(chosen - budget) {
            pairs[k].2 = false;
        }
    }
    chosen = 0;
    let out: Vec<(usize, usize)> = pairs
        .into_iter()
        .filter(|t| t.2)
        .map(|t| {
            chosen += 1;
            t.0
        })
        .collect();
    debug_assert_eq!(chosen, budget);
    out
}

/// Parts of the objective at one point, for inspection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossParts {
    pub grad: f64,
    pub curv: f64,
    pub smooth: f64,
    pub seman: f64,
    pub total: f64,
}

/// Builds the full objective on `tape` for the current dummy.
fn objective<'t>(
    tape: &'t Tape,
    inputs: &AttackInputs,
    dummy: &DummyGraph,
    fisher: &GradientVector,
    cfg: &AttackConfig,
) -> Result<(Var<'t>, Bound<'t>, LossParts)> {
    let bound = bind(tape, dummy, inputs.model.backbone)?;
    let (syn, seman) = dummy_grad_diff(tape, inputs.model, &bound.prop, bound.x, &dummy.labels, inputs.grad_un)?;
    let l_grad = grad_match_loss(&syn, inputs.observed)?;
    let mut total = l_grad;
    let mut parts = LossParts {
        grad: l_grad.item(),
        curv: 0.0,
        smooth: 0.0,
        seman: 0.0,
        total: 0.0,
    };
    if cfg.alpha1 > 0.0 {
        let c = curvature_loss(&syn, inputs.observed, fisher)?;
        parts.curv = c.item();
        total = total.add(c.scale(cfg.alpha1))?;
    }
    if cfg.alpha2 > 0.0 {
        let s = smooth_loss(bound.x, bound.edges.as_ref(), bound.adj)?;
        parts.smooth = s.item();
        total = total.add(s.scale(cfg.alpha2))?;
    }
    if cfg.alpha3 > 0.0 {
        parts.seman = seman.item();
        total = total.add(seman.scale(cfg.alpha3))?;
    }
    parts.total = total.item();
    Ok((total, bound, parts))
}

/// Objective value and its parts at `dummy`.
pub fn evaluate_objective(inputs: &AttackInputs, dummy: &DummyGraph, cfg: &AttackConfig) -> Result<LossParts> {
    let fisher = empirical_fisher_diag(inputs.model, dummy, cfg.fisher_damping)?;
    let tape = Tape::new();
    Ok(objective(&tape, inputs, dummy, &fisher, cfg)?.2)
}

fn check_inputs(inputs: &AttackInputs, dummy: &DummyGraph) -> Result<()> {
    let layout = inputs.model.layout();
    if inputs.grad_un.layout() != layout || inputs.observed.layout() != layout {
        return Err(Error::Config("released gradients do not match the model layout".into()));
    }
    if dummy.x.cols() != inputs.model.in_dim {
        return Err(Error::Config(format!(
            "dummy has {} features, model expects {}",
            dummy.x.cols(),
            inputs.model.in_dim
        )));
    }
    if dummy.labels.len() != inputs.counts.num_nodes() || dummy.x.rows() != dummy.labels.len() {
        return Err(Error::Config("dummy size disagrees with the counts".into()));
    }
    Ok(())
}

/// Optimizes `dummy` in place of the random initialization.
pub fn run_attack_from(inputs: &AttackInputs, mut dummy: DummyGraph, cfg: &AttackConfig) -> Result<AttackResult> {
    cfg.validate()?;
    check_inputs(inputs, &dummy)?;
    let mut params = vec![dummy.x.clone()];
    if let Topology::Relaxed(a) = &dummy.topology {
        params.push(project(a));
    }
    let mut opt = AdamW::new(&params, cfg.lr, cfg.weight_decay);
    let mut trace = Vec::with_capacity(cfg.max_iters + 1);
    let mut best = (f64::INFINITY, params.clone());
    let mut since_best = 0;
    let mut early_stopped = false;
    let mut fisher = GradientVector::zeros_like(&inputs.model.layout());
    let diverged = |iteration: usize, trace: &[f64]| Error::AttackDiverged {
        iteration,
        trace: trace.to_vec(),
    };

    let mut iterations = 0;
    for it in 0..cfg.max_iters {
        dummy.x = params[0].clone();
        if let Some(a) = params.get(1) {
            dummy.topology = Topology::Relaxed(a.clone());
        }
        if it % cfg.fisher_every == 0 && cfg.alpha1 > 0.0 {
            fisher = empirical_fisher_diag(inputs.model, &dummy, cfg.fisher_damping)
                .map_err(|e| nonfinite_to(e, || diverged(it, &trace)))?;
        }
        let tape = Tape::new();
        let (loss, bound, _) = objective(&tape, inputs, &dummy, &fisher, cfg).map_err(|e| nonfinite_to(e, || diverged(it, &trace)))?;
        let value = loss.item();
        if !value.is_finite() {
            return Err(diverged(it, &trace));
        }
        trace.push(value);
        if value < best.0 {
            best = (value, params.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                early_stopped = true;
                break;
            }
        }
        let mut wrt = vec![bound.x];
        wrt.extend(bound.adj);
        let grads = tape.grad(loss, &wrt, false).map_err(|e| nonfinite_to(e.into(), || diverged(it, &trace)))?;
        let grads: Vec<Tensor> = grads.values.iter().map(|g| (*g.value()).clone()).collect();
        opt.lr = cfg.lr_at(it);
        opt.step(&mut params, &grads).map_err(|_| diverged(it, &trace))?;
        if params.len() > 1 {
            params[1] = project(&params[1]);
        }
        iterations = it + 1;
    }

    // The final iterate has not been scored yet; keep it only if it is best.
    let params = if iterations == cfg.max_iters && !early_stopped {
        dummy.x = params[0].clone();
        if let Some(a) = params.get(1) {
            dummy.topology = Topology::Relaxed(a.clone());
        }
        let last = evaluate_objective(inputs, &dummy, cfg)?.total;
        if last < best.0 { params } else { best.1 }
    } else {
        best.1
    };
    let x = params[0].clone();
    let (edges, probabilities) = match (&dummy.topology, params.get(1)) {
        (Topology::Fixed(e), _) => (e.clone(), None),
        (Topology::Relaxed(_), Some(a)) => (finalize(a, inputs.counts.num_edges, cfg.seed), Some(a.clone())),
        (Topology::Relaxed(_), None) => unreachable!("relaxed dummy always carries its adjacency"),
    };
    Ok(AttackResult {
        x,
        edges,
        probabilities,
        loss_trace: trace,
        iterations,
        early_stopped,
    })
}

fn nonfinite_to(e: Error, f: impl FnOnce() -> Error) -> Error {
    match e {
        Error::Autodiff(AutodiffError::NonFinite(_)) => f(),
        other => other,
    }
}

/// The full attack from a seeded random dummy.
pub fn run_attack(inputs: &AttackInputs, mode: AttackMode, cfg: &AttackConfig) -> Result<AttackResult> {
    let dummy = init_dummy(inputs.counts, inputs.model.in_dim, mode, cfg.seed)?;
    run_attack_from(inputs, dummy, cfg)
}

/// Random Gaussian reconstruction without optimization.
pub fn baseline_rand(inputs: &AttackInputs, mode: AttackMode, cfg: &AttackConfig) -> Result<AttackResult> {
    let dummy = init_dummy(inputs.counts, inputs.model.in_dim, mode, cfg.seed)?;
    check_inputs(inputs, &dummy)?;
    let loss = evaluate_objective(inputs, &dummy, cfg)?.total;
    let (edges, probabilities) = match dummy.topology {
        Topology::Fixed(e) => (e, None),
        Topology::Relaxed(a) => (finalize(&a, inputs.counts.num_edges, cfg.seed), Some(a)),
    };
    Ok(AttackResult {
        x: dummy.x,
        edges,
        probabilities,
        loss_trace: vec![loss],
        iterations: 0,
        early_stopped: false,
    })
}

/// The attack with one percent of the iteration budget.
pub fn baseline_fewe(inputs: &AttackInputs, mode: AttackMode, cfg: &AttackConfig) -> Result<AttackResult> {
    let short = AttackConfig {
        max_iters: fewe_iters(cfg.max_iters),
        ..cfg.clone()
    };
    run_attack(inputs, mode, &short)
}

pub fn fewe_iters(max_iters: usize) -> usize {
    max_iters.div_ceil(100)
}
