//! Feature-, structure- and prediction-level similarity between a
//! recovered region and the ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use unlearnprobe_autodiff::Tensor;

use crate::error::{Error, Result};
use crate::gnn::{softmax_rows, ModelState};
use crate::graphdata::Graph;

/// Mean per-row relative error `‖x̂ − x‖ / ‖x‖`. Rows whose truth is zero
/// are skipped and returned.
pub fn rnmse(x_hat: &Tensor, x_true: &Tensor) -> Result<(f64, Vec<usize>)> {
    same_shape(x_hat, x_true)?;
    let mut total = 0.0;
    let mut used = 0usize;
    let mut skipped = Vec::new();
    for r in 0..x_true.rows() {
        let norm = l2(x_true.row(r));
        if norm == 0.0 {
            skipped.push(r);
            continue;
        }
        let diff: Vec<f64> = x_hat.row(r).iter().zip(x_true.row(r)).map(|(a, b)| a - b).collect();
        total += l2(&diff) / norm;
        used += 1;
    }
    if used == 0 {
        return Err(Error::Config("every ground-truth row is zero".into()));
    }
    Ok((total / used as f64, skipped))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn same_shape(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Config(format!("shapes differ: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// Minimum-cost perfect matching on a square cost matrix. Returns the column
/// assigned to each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // Potentials formulation with 1-based sentinel column 0.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    assign
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared 2-Wasserstein distance between two equal-size point clouds
/// with uniform weights.
pub fn w2(a: &Tensor, b: &Tensor) -> Result<f64> {
    same_shape(a, b)?;
    let n = a.rows();
    if n == 0 {
        return Ok(0.0);
    }
    let cost: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| sq_dist(a.row(i), b.row(j))).collect())
        .collect();
    let assign = hungarian(&cost);
    Ok(assign.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>() / n as f64)
}

pub fn embedding_w2(h_rec: &Tensor, h_true: &Tensor) -> Result<f64> {
    w2(h_rec, h_true)
}

pub fn posterior_w2(p_rec: &Tensor, p_true: &Tensor) -> Result<f64> {
    w2(p_rec, p_true)
}

/// Lloyd's k-means with farthest-point seeding from a random first center.
/// Returns per-point labels and the number of non-empty clusters.
pub fn kmeans(points: &Tensor, k: usize, iters: usize, seed: u64) -> (Vec<usize>, usize) {
    let n = points.rows();
    if n == 0 || k == 0 {
        return (vec![0; n], 0);
    }
    let k = k.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = vec![points.row(rng.random_range(0..n)).to_vec()];
    while centers.len() < k {
        let far = (0..n)
            .map(|i| {
                let d = centers.iter().map(|c| sq_dist(points.row(i), c)).fold(f64::INFINITY, f64::min);
                (i, d)
            })
            .fold((0, -1.0), |best, (i, d)| if d > best.1 { (i, d) } else { best });
        centers.push(points.row(far.0).to_vec());
    }
    let mut labels = vec![0usize; n];
    for _ in 0..iters {
        for (i, l) in labels.iter_mut().enumerate() {
            *l = nearest(points.row(i), &centers);
        }
        let dim = points.cols();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    for (i, l) in labels.iter_mut().enumerate() {
        *l = nearest(points.row(i), &centers);
    }
    let mut seen = vec![false; k];
    for &l in &labels {
        seen[l] = true;
    }
    (labels, seen.iter().filter(|&&s| s).count())
}

fn nearest(x: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(x, center);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn intersection(a: &[usize], b: &[usize], bins: usize, shift: u32) -> f64 {
    let mut ha = vec![0usize; bins];
    let mut hb = vec![0usize; bins];
    for &l in a {
        ha[l >> shift] += 1;
    }
    for &l in b {
        hb[l >> shift] += 1;
    }
    ha.iter().zip(&hb).map(|(x, y)| *x.min(y)).sum::<usize>() as f64
}

/// Unnormalized pyramid match between two label multisets over `k` labels.
/// Level `j` merges labels into bins of width `2^j`; matches first found at
/// level `j` are weighted `1 / 2^j`.
pub fn pyramid_match(a: &[usize], b: &[usize], k: usize, levels: usize) -> f64 {
    let mut total = 0.0;
    let mut prev = 0.0;
    for j in 0..=levels {
        let shift = j as u32;
        let bins = k.div_ceil(1 << j).max(1);
        let cur = intersection(a, b, bins, shift);
        total += (cur - prev) / (1u64 << j) as f64;
        prev = cur;
    }
    total
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmgkConfig {
    pub k: usize,
    pub levels: usize,
    pub iters: usize,
    pub seed: u64,
}

/// Normalized pyramid match graph kernel over k-means labels of both
/// embedding sets. Returns the value and the number of clusters used.
pub fn pmgk(h_rec: &Tensor, h_true: &Tensor, cfg: &PmgkConfig) -> Result<(f64, usize)> {
    if cfg.k < 2 || cfg.levels < 1 {
        return Err(Error::Config("pmgk needs k >= 2 and levels >= 1".into()));
    }
    if h_rec.cols() != h_true.cols() {
        return Err(Error::Config("embedding widths differ".into()));
    }
    let mut rows: Vec<Vec<f64>> = (0..h_rec.rows()).map(|r| h_rec.row(r).to_vec()).collect();
    rows.extend((0..h_true.rows()).map(|r| h_true.row(r).to_vec()));
    let union = Tensor::from_rows(&rows)?;
    let mut fit = kmeans(&union, cfg.k, cfg.iters, cfg.seed);
    if fit.1 < cfg.k.min(union.rows()) {
        log::warn!("k-means left empty clusters; re-seeding once");
        fit = kmeans(&union, cfg.k, cfg.iters, cfg.seed.wrapping_add(1));
    }
    let (labels, used) = fit;
    let (a, b) = labels.split_at(h_rec.rows());
    let kab = pyramid_match(a, b, cfg.k, cfg.levels);
    let kaa = pyramid_match(a, a, cfg.k, cfg.levels);
    let kbb = pyramid_match(b, b, cfg.k, cfg.levels);
    if kaa == 0.0 || kbb == 0.0 {
        return Ok((0.0, used));
    }
    Ok((kab / (kaa * kbb).sqrt(), used))
}

fn check_labels(n: usize, labels: &[usize]) -> Result<()> {
    if n != labels.len() || n == 0 {
        return Err(Error::Config("label count differs from region size".into()));
    }
    Ok(())
}

/// Fraction of nodes whose prediction on `recovered` equals `labels`.
pub fn att_accuracy(model: &ModelState, recovered: &Graph, labels: &[usize]) -> Result<f64> {
    check_labels(recovered.n(), labels)?;
    let pred = model.predict(recovered)?;
    Ok(pred.iter().zip(labels).filter(|(p, y)| p == y).count() as f64 / labels.len() as f64)
}

/// Fraction of nodes predicted identically on the two graphs.
pub fn att_fidelity(model: &ModelState, recovered: &Graph, truth: &Graph) -> Result<f64> {
    if recovered.n() != truth.n() || truth.n() == 0 {
        return Err(Error::Config("graphs differ in size".into()));
    }
    let a = model.predict(recovered)?;
    let b = model.predict(truth)?;
    Ok(a.iter().zip(&b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub nrmse: f64,
    pub ed: f64,
    pub pmgk: f64,
    pub att_acc: f64,
    pub att_fid: f64,
    pub pwd: f64,
}

impl MetricReport {
    pub fn as_array(&self) -> [f64; 6] {
        [self.nrmse, self.ed, self.pmgk, self.att_acc, self.att_fid, self.pwd]
    }
}

/// All six metrics of `recovered` against `truth` under `model`.
pub fn evaluate(model: &ModelState, recovered: &Graph, truth: &Graph, pmgk_seed: u64) -> Result<MetricReport> {
    let (nrmse, skipped) = rnmse(recovered.features(), truth.features())?;
    if !skipped.is_empty() {
        log::warn!("rnmse skipped {} all-zero rows", skipped.len());
    }
    let (logits_rec, h_rec) = model.forward(recovered)?;
    let (logits_true, h_true) = model.forward(truth)?;
    let cfg = PmgkConfig {
        k: truth.num_classes().max(2),
        levels: 4,
        iters: 50,
        seed: pmgk_seed,
    };
    Ok(MetricReport {
        nrmse,
        ed: embedding_w2(&h_rec, &h_true)?,
        pmgk: pmgk(&h_rec, &h_true, &cfg)?.0,
        att_acc: att_accuracy(model, recovered, truth.labels())?,
        att_fid: att_fidelity(model, recovered, truth)?,
        pwd: posterior_w2(&softmax_rows(&logits_rec), &softmax_rows(&logits_true))?,
    })
}
