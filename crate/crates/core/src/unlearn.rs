//! Exact unlearning by retraining, and the released gradient difference.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unlearnprobe_autodiff::{GradientVector, Tensor};

use crate::error::{io_err, Error, Result};
use crate::gnn::{loss_gradient, train, Backbone, ModelState, TrainConfig};
use crate::graphdata::{recovery_target, DeletionRequest, Graph, RegionEdges};

/// The graph left after a deletion, with new-to-old id mapping.
#[derive(Clone, Debug, PartialEq)]
pub struct Removal {
    pub graph: Graph,
    /// `old_ids[new] = old`.
    pub old_ids: Vec<usize>,
    /// Set when some class lost all of its training nodes.
    pub emptied_class: bool,
}

pub fn remove_nodes(g: &Graph, req: &DeletionRequest) -> Result<Removal> {
    req.validate(g)?;
    let deleted: BTreeSet<usize> = req.deleted().iter().copied().collect();
    let old_ids: Vec<usize> = (0..g.n()).filter(|v| !deleted.contains(v)).collect();
    let mut new_id = vec![usize::MAX; g.n()];
    for (new, &old) in old_ids.iter().enumerate() {
        new_id[old] = new;
    }
    let edges: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .filter(|(u, v)| !deleted.contains(u) && !deleted.contains(v))
        .map(|&(u, v)| (new_id[u], new_id[v]))
        .collect();
    let pick = |m: &[bool]| old_ids.iter().map(|&o| m[o]).collect::<Vec<bool>>();
    let graph = Graph::new(
        g.features().select_rows(&old_ids),
        old_ids.iter().map(|&o| g.labels()[o]).collect(),
        g.num_classes(),
        edges,
    )?
    .with_masks(pick(g.train_mask()), pick(g.val_mask()), pick(g.test_mask()))?;

    let had = |gr: &Graph, c: usize| gr.train_nodes().iter().any(|&v| gr.labels()[v] == c);
    let emptied_class = (0..g.num_classes()).any(|c| had(g, c) && !had(&graph, c));
    if emptied_class {
        log::warn!("deletion of {:?} empties a training class", req.deleted());
    }
    Ok(Removal {
        graph,
        old_ids,
        emptied_class,
    })
}

/// What the attacker is told about a deletion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetCounts {
    pub num_deleted: usize,
    pub num_edges: usize,
    /// Labels of the recovery nodes, deleted nodes first.
    pub rec_labels: Vec<usize>,
}

impl TargetCounts {
    pub fn num_nodes(&self) -> usize {
        self.rec_labels.len()
    }
}

/// Graphs on which the two released gradients are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientEval {
    /// Original model on the full graph, unlearned model on the remaining one.
    #[default]
    OwnGraphs,
    /// Both models on the remaining graph.
    Remaining,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnlearnResult {
    pub remaining: Removal,
    pub unlearned: ModelState,
    /// Released gradient of the original model.
    pub grad_ori: GradientVector,
    /// Released gradient of the unlearned model.
    pub grad_un: GradientVector,
    pub counts: TargetCounts,
}

impl UnlearnResult {
    pub fn grad_diff(&self) -> GradientVector {
        self.grad_ori.sub(&self.grad_un).expect("gradients share a layout")
    }

    /// Writes `unlearned.json`, `grad_diff.bin`, `grad_un.bin` and
    /// `counts.json` into `dir`. Gradients are little-endian f64.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        self.unlearned.save(&dir.join("unlearned.json"))?;
        save_gradient(&dir.join("grad_diff.bin"), &self.grad_diff())?;
        save_gradient(&dir.join("grad_un.bin"), &self.grad_un)?;
        let p = dir.join("counts.json");
        fs::write(&p, serde_json::to_string_pretty(&self.counts)?).map_err(io_err(&p))
    }
}

pub fn save_gradient(path: &Path, gv: &GradientVector) -> Result<()> {
    let bytes: Vec<u8> = gv.flat().iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(io_err(path))
}

/// Reads a gradient written by [`save_gradient`].
pub fn load_gradient(path: &Path, layout: &[[usize; 2]]) -> Result<GradientVector> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Config(format!("{}: length is not a multiple of 8", path.display())));
    }
    let flat: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(GradientVector::from_flat(layout, &flat)?)
}

pub fn load_counts(path: &Path) -> Result<TargetCounts> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

/// Retrains from scratch on the remaining graph with the same seed and
/// releases both gradients.
pub fn retrain_unlearn(
    g: &Graph,
    original: &ModelState,
    req: &DeletionRequest,
    cfg: &TrainConfig,
    eval: GradientEval,
    scope: RegionEdges,
) -> Result<UnlearnResult> {
    let backbone: Backbone = original.backbone;
    let target = recovery_target(g, req, scope)?;
    let remaining = remove_nodes(g, req)?;
    let unlearned = train(&remaining.graph, backbone, cfg)?;
    let rg = &remaining.graph;
    let grad_ori = match eval {
        GradientEval::OwnGraphs => loss_gradient(original, g, g.train_mask())?,
        GradientEval::Remaining => loss_gradient(original, rg, rg.train_mask())?,
    };
    let grad_un = loss_gradient(&unlearned, rg, rg.train_mask())?;
    Ok(UnlearnResult {
        counts: TargetCounts {
            num_deleted: target.num_deleted,
            num_edges: target.rec_edges.len(),
            rec_labels: target.rec_y.clone(),
        },
        remaining,
        unlearned,
        grad_ori,
        grad_un,
    })
}

/// Relative parameter change `‖θ* − θ‖ / ‖θ‖`.
pub fn relative_change(original: &ModelState, unlearned: &ModelState) -> f64 {
    let a = original.flat();
    let b = unlearned.flat();
    let diff: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    diff / Tensor::row_vector(a).expect("finite").norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphdata::Policy;

    fn star(leaves: usize) -> Graph {
        let n = leaves + 1;
        let x = Tensor::new(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        Graph::new(x, vec![0; n], 1, (1..n).map(|v| (0, v)))
            .unwrap()
            .with_masks(vec![true; n], vec![false; n], vec![false; n])
            .unwrap()
    }

    #[test]
    fn removing_hub_isolates_leaves() {
        let r = remove_nodes(&star(4), &DeletionRequest::new([0], Policy::Worst).unwrap()).unwrap();
        assert_eq!(r.graph.n(), 4);
        assert!(r.graph.edges().is_empty());
        assert_eq!(r.old_ids, vec![1, 2, 3, 4]);
        assert_eq!(r.graph.features().data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn removing_leaf_decrements_hub() {
        let r = remove_nodes(&star(4), &DeletionRequest::new([3], Policy::Random).unwrap()).unwrap();
        assert_eq!(r.graph.degrees()[0], 3);
        assert!(!r.emptied_class);
    }

    #[test]
    fn emptying_a_class_is_flagged() {
        let x = Tensor::zeros(3, 1);
        let g = Graph::new(x, vec![0, 1, 1], 2, [(0, 1), (1, 2)])
            .unwrap()
            .with_masks(vec![true; 3], vec![false; 3], vec![false; 3])
            .unwrap();
        let r = remove_nodes(&g, &DeletionRequest::new([0], Policy::Random).unwrap()).unwrap();
        assert!(r.emptied_class);
    }

    #[test]
    fn grad_diff_persists() {
        let g = star(3);
        let m = ModelState::init(Backbone::Gcn, 1, 2, 1, 0);
        let gv = loss_gradient(&m, &g, g.train_mask()).unwrap();
        let res = UnlearnResult {
            remaining: remove_nodes(&g, &DeletionRequest::new([1], Policy::Random).unwrap()).unwrap(),
            unlearned: m.clone(),
            grad_ori: gv.clone(),
            grad_un: gv.map_flat(|v| v.iter().map(|x| x * 0.5).collect()).unwrap(),
            counts: TargetCounts {
                num_deleted: 1,
                num_edges: 1,
                rec_labels: vec![0, 0],
            },
        };
        let dir = tempfile::tempdir().unwrap();
        res.save(dir.path()).unwrap();
        let back = load_gradient(&dir.path().join("grad_diff.bin"), &m.layout()).unwrap();
        assert_eq!(back, res.grad_diff());
        assert_eq!(load_gradient(&dir.path().join("grad_un.bin"), &m.layout()).unwrap(), res.grad_un);
        assert_eq!(load_counts(&dir.path().join("counts.json")).unwrap(), res.counts);
    }
}
