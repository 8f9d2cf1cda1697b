//! End-to-end acceptance criteria. Every test prints one `PASS`/`FAIL`
//! line with the measured values and the tolerance it was held to.
//!
//! Exactness criteria fail the test when unmet. Directional comparisons
//! against published effect sizes only report their outcome, since a
//! desk-scale graph may legitimately land on the other side of a margin.

#[path = "../../autodiff/tests/common/mod.rs"]
mod primitives;

use std::cell::Cell;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unlearnprobe_autodiff::{finite_diff_check, GradientVector, Tape, Tensor};
use unlearnprobe_core::attack::{
    baseline_rand, dummy_grad_diff, evaluate_objective, run_attack_from, AttackInputs, AttackMode, DummyGraph, Topology,
};
use unlearnprobe_core::defense::DefenseConfig;
use unlearnprobe_core::gnn::{softmax_rows, train, Backbone, Propagator, TrainConfig};
use unlearnprobe_core::graphdata::{load_graph, node_homophily, recovery_target, split, Policy, SynthSpec};
use unlearnprobe_core::harness::{
    attack_config, defended, metric_seed, prepare_graph, recovered_graph, requests_for, run_and_write, run_baselines,
    run_experiment, train_original, trial_seed, AccessMode, Baseline, DatasetSpec, ExperimentConfig, ResultTable,
};
use unlearnprobe_core::metrics::{embedding_w2, evaluate, pmgk, posterior_w2, rnmse, PmgkConfig};
use unlearnprobe_core::unlearn::retrain_unlearn;

thread_local! {
    static EXACT_FAILURES: Cell<usize> = const { Cell::new(0) };
}

#[derive(Clone, Copy, PartialEq)]
enum Gate {
    Exact,
    Directional,
}

fn verdict(name: &str, ok: bool, detail: &str, start: Instant, budget: Duration, gate: Gate) {
    let elapsed = start.elapsed();
    let pass = ok && elapsed < budget;
    println!(
        "{} {name}: {detail}; {:.1}s (budget {}s)",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    if gate == Gate::Exact && !pass {
        EXACT_FAILURES.with(|c| c.set(c.get() + 1));
    }
}

fn mins(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

/// Planted partition with node homophily near 0.8.
fn synth() -> SynthSpec {
    SynthSpec {
        n: 200,
        classes: 4,
        dim: 32,
        p_in: 0.05,
        p_out: 0.004,
        seed: 1,
    }
}

/// Defaults everywhere except the dataset and ten single-node targets out
/// of the 80 training nodes.
fn base() -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSpec::Synth(synth()),
        k_fraction: 0.125,
        seed: 17,
        ..ExperimentConfig::default()
    }
}

fn mean(table: &ResultTable, size: usize, b: Baseline) -> unlearnprobe_core::metrics::MetricReport {
    table
        .mean(size, b)
        .and_then(|r| r.report)
        .unwrap_or_else(|| panic!("no successful trial for size {size}, {b}"))
}

fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    primitives::randn(rng, r, c)
}

fn autodiff_oracles() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut first = 0.0f64;
    let mut families = 0;
    for (_, case) in primitives::primitive_cases() {
        families += 1;
        for _ in 0..100 {
            let (x, f) = case(&mut rng);
            first = first.max(finite_diff_check(|t, v| f(t, v), &x, 1e-5).unwrap());
        }
    }
    // Second order: the squared gradient norm of a cross-entropy loss,
    // differentiated with respect to the inputs.
    let mut second = 0.0f64;
    for _ in 0..20 {
        let w = randn(&mut rng, 5, 3);
        let x = randn(&mut rng, 4, 5);
        let mut onehot = Tensor::zeros(4, 3);
        for i in 0..4 {
            onehot.set(i, rng.random_range(0..3), 1.0);
        }
        let err = finite_diff_check(
            |t, xv| {
                let wv = t.param(w.clone());
                let loss = xv.matmul(wv)?.log_softmax().mul(t.constant(onehot.clone()))?.sum().scale(-0.25);
                let g = t.grad(loss, &[wv], true)?.values[0];
                let norm = g.mul(g)?.sum();
                Ok(if xv.requires_grad() { norm } else { norm.detach() })
            },
            &x,
            1e-5,
        )
        .unwrap();
        second = second.max(err);
    }
    verdict(
        "autodiff oracle suite",
        first < 1e-4 && second < 1e-3,
        &format!("{families} primitive families x 100 cases, first-order max rel {first:.2e} (< 1e-4), gradient-norm second-order max rel {second:.2e} (< 1e-3)"),
        start,
        Duration::from_secs(30),
        Gate::Exact,
    );
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn brute_w2(a: &Tensor, b: &Tensor, perms: &[Vec<usize>]) -> f64 {
    let n = a.rows();
    perms
        .iter()
        .map(|p| {
            (0..n)
                .map(|i| a.row(i).iter().zip(b.row(p[i])).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
                .sum::<f64>()
                / n as f64
        })
        .fold(f64::INFINITY, f64::min)
}

fn metric_oracles() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let perms = permutations(5);
    let mut w2_dev = 0.0f64;
    for _ in 0..50 {
        let (a, b) = (randn(&mut rng, 5, 6), randn(&mut rng, 5, 6));
        w2_dev = w2_dev.max((embedding_w2(&a, &b).unwrap() - brute_w2(&a, &b, &perms)).abs());
        let (p, q) = (softmax_rows(&randn(&mut rng, 5, 4)), softmax_rows(&randn(&mut rng, 5, 4)));
        w2_dev = w2_dev.max((posterior_w2(&p, &q).unwrap() - brute_w2(&p, &q, &perms)).abs());
    }
    let mut self_dev = 0.0f64;
    for s in 0..10 {
        let h = randn(&mut rng, 15, 8);
        let cfg = PmgkConfig {
            k: 4,
            levels: 4,
            iters: 50,
            seed: s,
        };
        self_dev = self_dev.max((pmgk(&h, &h, &cfg).unwrap().0 - 1.0).abs());
    }
    let mut scale_dev = 0.0f64;
    for _ in 0..100 {
        let x_hat = randn(&mut rng, 6, 5);
        let x_true = randn(&mut rng, 6, 5);
        let s = 10f64.powf(rng.random_range(-3.0..3.0)) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let (a, _) = rnmse(&x_hat, &x_true).unwrap();
        let (b, _) = rnmse(&x_hat.map(|v| v * s), &x_true.map(|v| v * s)).unwrap();
        scale_dev = scale_dev.max((a - b).abs() / a.abs().max(1e-12));
    }
    verdict(
        "metric oracle suite",
        w2_dev < 1e-10 && self_dev == 0.0 && scale_dev < 1e-9,
        &format!(
            "W2 vs 120 permutations over 50 embedding + 50 posterior cases max dev {w2_dev:.1e} (< 1e-10), pmgk self-kernel max dev {self_dev:.1e} (= 0), rnmse under 100 scalings max rel dev {scale_dev:.1e}"
        ),
        start,
        Duration::from_secs(60),
        Gate::Exact,
    );
}

fn planted_solution() {
    let start = Instant::now();
    let cfg = base();
    let g = prepare_graph(&cfg).unwrap();
    let seed = trial_seed(cfg.seed, 0);
    let model = train_original(&cfg, &g, seed).unwrap();
    let req = requests_for(&cfg, &g, 1, seed).unwrap().remove(0);
    let res = retrain_unlearn(&g, &model, &req, &cfg.train_for(seed), cfg.gradient_eval, cfg.region).unwrap();
    let truth = recovery_target(&g, &req, cfg.region).unwrap();
    let dummy = DummyGraph {
        x: truth.rec_x.clone(),
        topology: Topology::Fixed(truth.local_edges()),
        labels: truth.rec_y.clone(),
    };
    // The observation is exactly what the ground truth would produce.
    let planted = {
        let tape = Tape::new();
        let prop = Propagator::sparse(truth.len(), &truth.local_edges()).unwrap();
        let x = tape.constant(truth.rec_x.clone());
        let (diff, _) = dummy_grad_diff(&tape, &model, &prop, x, &truth.rec_y, &res.grad_un).unwrap();
        GradientVector::new(diff.iter().map(|d| d.value().as_ref().clone()).collect())
    };
    let inputs = AttackInputs {
        model: &model,
        grad_un: &res.grad_un,
        observed: &planted,
        counts: &res.counts,
    };
    let mut acfg = attack_config(&cfg, seed, 0, 1);
    let at_truth = evaluate_objective(&inputs, &dummy, &acfg).unwrap().total;
    let rand_loss = baseline_rand(&inputs, AttackMode::Single, &acfg).unwrap().loss_trace[0];
    acfg.max_iters = 200;
    acfg.patience = 1000;
    let run = run_attack_from(&inputs, dummy, &acfg).unwrap();
    let worst_rise = run.loss_trace.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let ratio = at_truth / rand_loss;
    verdict(
        "planted-solution sanity",
        ratio < 1e-3 && worst_rise <= 1e-6,
        &format!(
            "L at truth {at_truth:.3e} = {ratio:.2e} x Rand. loss {rand_loss:.3e} (< 1e-3); largest per-step increase over {} steps {worst_rise:.2e} (<= 1e-6)",
            run.loss_trace.len()
        ),
        start,
        mins(2),
        Gate::Exact,
    );
}

fn single_node_direction() {
    let start = Instant::now();
    let g = prepare_graph(&base()).unwrap();
    let homophily = node_homophily(&g).unwrap();
    let mut sums = [[0.0; 2]; 3];
    let mut targets = 0;
    for policy in [Policy::Random, Policy::Worst] {
        let cfg = ExperimentConfig { policy, ..base() };
        targets += requests_for(&cfg, &g, 1, trial_seed(cfg.seed, 0)).unwrap().len();
        let table = run_experiment(&cfg).unwrap();
        assert_eq!(table.failed_trials(), 0);
        for (b, s) in Baseline::ALL.iter().zip(sums.iter_mut()) {
            let m = mean(&table, 1, *b);
            s[0] += m.att_acc / 2.0;
            s[1] += m.nrmse / 2.0;
        }
    }
    let [rand, fewe, toxin] = sums;
    let ok = toxin[0] - rand[0] >= 0.30 && toxin[0] - fewe[0] >= 0.10 && toxin[1] < fewe[1] && fewe[1] < rand[1];
    verdict(
        "single-node direction",
        ok,
        &format!(
            "homophily {homophily:.3}, {targets} targets; att_acc Toxin {:.3} Rand. {:.3} FewE {:.3} (margins >= 0.30, >= 0.10); nrmse Toxin {:.4} < FewE {:.4} < Rand. {:.4}",
            toxin[0], rand[0], fewe[0], toxin[1], fewe[1], rand[1]
        ),
        start,
        mins(15),
        Gate::Directional,
    );
}

fn ablation_direction() {
    let start = Instant::now();
    let paired = |alpha1: Option<f64>, alpha2: Option<f64>| {
        let mut cfg = ExperimentConfig {
            trials: 5,
            max_requests: Some(2),
            ..base()
        };
        if let Some(a) = alpha1 {
            cfg.attack.alpha1 = a;
        }
        if let Some(a) = alpha2 {
            cfg.attack.alpha2 = a;
        }
        let table = run_experiment(&cfg).unwrap();
        assert_eq!(table.failed_trials(), 0);
        mean(&table, 1, Baseline::Toxin)
    };
    let full = paired(None, None);
    let no_curv = paired(Some(0.0), None);
    let no_smooth = paired(None, Some(0.0));
    let ok = no_curv.att_acc - full.att_acc <= 0.02 && no_smooth.nrmse >= full.nrmse;
    verdict(
        "ablation direction",
        ok,
        &format!(
            "5 paired trials; att_acc default {:.3} vs alpha1=0 {:.3} (gain <= 0.02); nrmse default {:.4} vs alpha2=0 {:.4} (no improvement)",
            full.att_acc, no_curv.att_acc, full.nrmse, no_smooth.nrmse
        ),
        start,
        mins(30),
        Gate::Directional,
    );
}

fn multi_node() {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        removal_sizes: vec![5, 10],
        ..base()
    };
    let g = prepare_graph(&cfg).unwrap();
    let trials = 3;
    let (mut runs, mut met) = (0, 0);
    let (mut acc_rand, mut acc_toxin) = (0.0, 0.0);
    for t in 0..trials {
        let seed = trial_seed(cfg.seed, t);
        let model = train_original(&cfg, &g, seed).unwrap();
        for &size in &cfg.removal_sizes {
            for (i, req) in requests_for(&cfg, &g, size, seed).unwrap().iter().enumerate() {
                let res = retrain_unlearn(&g, &model, req, &cfg.train_for(seed), cfg.gradient_eval, cfg.region).unwrap();
                let (grad_ori, grad_un) = defended(&cfg, &res, seed, i).unwrap();
                let observed = grad_ori.sub(&grad_un).unwrap();
                let inputs = AttackInputs {
                    model: &model,
                    grad_un: &grad_un,
                    observed: &observed,
                    counts: &res.counts,
                };
                let acfg = attack_config(&cfg, seed, i, res.counts.num_deleted);
                let [rand, _, toxin] = run_baselines(&inputs, &acfg).unwrap();
                let truth = recovery_target(&g, req, cfg.region).unwrap().to_graph(g.num_classes()).unwrap();
                for r in [&rand, &toxin] {
                    runs += 1;
                    met += usize::from(r.edges.len() == res.counts.num_edges);
                }
                let score = |r| {
                    let rec = recovered_graph(r, &res.counts.rec_labels, g.num_classes()).unwrap();
                    evaluate(&model, &rec, &truth, metric_seed(seed, i)).unwrap().att_acc
                };
                acc_rand += score(&rand);
                acc_toxin += score(&toxin);
            }
        }
    }
    // Meeting the edge budget is exact; only the accuracy margin is directional.
    if met != runs {
        EXACT_FAILURES.with(|c| c.set(c.get() + 1));
    }
    let attacks = (runs / 2) as f64;
    let (acc_rand, acc_toxin) = (acc_rand / attacks, acc_toxin / attacks);
    verdict(
        "multi-node",
        met == runs && acc_toxin - acc_rand >= 0.20,
        &format!(
            "sizes {{5, 10}}, {attacks} requests; edge budget met in {met}/{runs} finalized graphs (all); att_acc Toxin {acc_toxin:.3} vs Rand. {acc_rand:.3} (margin >= 0.20)"
        ),
        start,
        mins(30),
        Gate::Directional,
    );
}

fn black_box() {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        mode: AccessMode::Black,
        trials: 5,
        max_requests: Some(2),
        ..base()
    };
    let table = run_experiment(&cfg).unwrap();
    assert_eq!(table.failed_trials(), 0);
    let per_trial = |b: Baseline| -> Vec<f64> {
        table
            .rows
            .iter()
            .filter(|r| r.baseline == b && r.trial != "mean")
            .map(|r| r.report.unwrap().att_acc)
            .collect()
    };
    let (fewe, toxin) = (per_trial(Baseline::FewE), per_trial(Baseline::Toxin));
    let wins = toxin.iter().zip(&fewe).filter(|(t, f)| t > f).count();
    verdict(
        "black-box",
        wins >= 4,
        &format!("Toxin att_acc {toxin:.3?} vs FewE {fewe:.3?}; Toxin ahead in {wins}/5 trials (>= 4)"),
        start,
        mins(45),
        Gate::Directional,
    );
}

fn defense_resilience() {
    let start = Instant::now();
    let run = |defense| {
        let table = run_experiment(&ExperimentConfig { defense, ..base() }).unwrap();
        assert_eq!(table.failed_trials(), 0);
        mean(&table, 1, Baseline::Toxin).att_acc
    };
    let plain = run(DefenseConfig::None);
    let pruned = run(DefenseConfig::Prune { p: 0.9 });
    verdict(
        "defense resilience",
        (pruned - plain).abs() <= 0.15,
        &format!("Toxin att_acc undefended {plain:.3}, prune 0.9 {pruned:.3} (within 0.15)"),
        start,
        mins(20),
        Gate::Directional,
    );
}

/// Runs when `UNLEARNPROBE_CORA_DIR` holds `nodes.csv` and `edges.csv`.
fn cora_accuracy() {
    let Some(dir) = std::env::var_os("UNLEARNPROBE_CORA_DIR").map(PathBuf::from) else {
        println!("SKIP cora accuracy: UNLEARNPROBE_CORA_DIR is not set");
        return;
    };
    let start = Instant::now();
    let g = load_graph(&dir.join("nodes.csv"), &dir.join("edges.csv")).unwrap();
    let g = split(g, 20, 30, 0).unwrap();
    let model = train(&g, Backbone::Gcn, &TrainConfig::default()).unwrap();
    let acc = model.accuracy(&g, g.test_mask()).unwrap();
    verdict(
        "cora accuracy",
        (acc - 0.802).abs() <= 0.03,
        &format!("GCN test accuracy {acc:.4} (0.802 +/- 0.030)"),
        start,
        mins(5),
        Gate::Directional,
    );
}

fn determinism() {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        trials: 2,
        max_requests: Some(1),
        removal_sizes: vec![1, 3],
        ..base()
    };
    let dir = tempfile::tempdir().unwrap();
    run_and_write(&cfg, &dir.path().join("a")).unwrap();
    run_and_write(&cfg, &dir.path().join("b")).unwrap();
    let a = std::fs::read(dir.path().join("a/results.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/results.csv")).unwrap();
    verdict(
        "determinism",
        a == b,
        &format!("two runs wrote {} and {} bytes of results.csv, identical: {}", a.len(), b.len(), a == b),
        start,
        mins(30),
        Gate::Exact,
    );
}

/// Runs the criteria in order, one at a time, so their wall-clock budgets
/// are measured alone. Arguments filter by substring of the function name.
fn main() -> ExitCode {
    let criteria: [(&str, fn()); 10] = [
        ("autodiff_oracles", autodiff_oracles),
        ("metric_oracles", metric_oracles),
        ("planted_solution", planted_solution),
        ("single_node_direction", single_node_direction),
        ("ablation_direction", ablation_direction),
        ("multi_node", multi_node),
        ("black_box", black_box),
        ("defense_resilience", defense_resilience),
        ("cora_accuracy", cora_accuracy),
        ("determinism", determinism),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    for (name, run) in criteria {
        if filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str())) {
            run();
        }
    }
    let failed = EXACT_FAILURES.with(Cell::get);
    if failed > 0 {
        println!("{failed} exact criterion check(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
