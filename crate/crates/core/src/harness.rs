//! Experiment orchestration: configuration, seeded trial fan-out, the
//! train → unlearn → attack → evaluate pipeline and the results table.
//!
//! Seeds: trial `t` uses `derive_seed(master, t)`. Every stage inside a
//! trial draws from `derive_seed(trial_seed, stream)` with a fixed stream id,
//! and the data split uses `derive_seed(master, SPLIT_STREAM)` so that all
//! trials share one split.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use unlearnprobe_autodiff::GradientVector;

use crate::attack::{baseline_fewe, baseline_rand, run_attack, AttackConfig, AttackInputs, AttackMode, AttackResult};
use crate::blackbox::{acquire_with, default_alpha3, extract, BlackboxKnowledge, Extraction, ExtractionConfig, ModelOracle};
use crate::defense::DefenseConfig;
use crate::error::{io_err, Error, Result};
use crate::gnn::{train, Backbone, ModelState, TrainConfig};
use crate::graphdata::{
    load_graph, recovery_target, select_groups, select_targets, split, synth_graph, DeletionRequest, Graph, Policy,
    RegionEdges, SynthSpec,
};
use crate::metrics::{evaluate, MetricReport};
use crate::unlearn::{retrain_unlearn, GradientEval, UnlearnResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const WORKERS_ENV: &str = "UNLEARNPROBE_WORKERS";
pub const CSV_HEADER: &str = "dataset,backbone,policy,removal_size,mode,baseline,trial,nrmse,ed,pmgk,att_acc,att_fid,pwd,failed";

const SPLIT_STREAM: u64 = u64::MAX;
const TRAIN_STREAM: u64 = 1;
const SELECT_STREAM: u64 = 2;
const ATTACK_STREAM: u64 = 3;
const DEFENSE_STREAM: u64 = 4;
const EXTRACT_STREAM: u64 = 5;
const METRIC_STREAM: u64 = 6;

/// SplitMix64 mix of `a` and `b`.
pub fn derive_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_seed(master: u64, trial: usize) -> u64 {
    derive_seed(master, trial as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSpec {
    Synth(SynthSpec),
    /// `id,label,f0..` node CSV and `src,dst` edge CSV.
    Files { name: String, nodes: PathBuf, edges: PathBuf },
}

impl DatasetSpec {
    pub fn name(&self) -> &str {
        match self {
            DatasetSpec::Synth(_) => "synth",
            DatasetSpec::Files { name, .. } => name,
        }
    }

    pub fn load(&self) -> Result<Graph> {
        match self {
            DatasetSpec::Synth(spec) => synth_graph(spec),
            DatasetSpec::Files { nodes, edges, .. } => load_graph(nodes, edges),
        }
    }
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Synth(SynthSpec {
            n: 200,
            classes: 4,
            dim: 32,
            p_in: 0.05,
            p_out: 0.005,
            seed: 1,
        })
    }
}

/// Per-class train and validation counts; the rest is test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train_per_class: usize,
    pub val_per_class: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_per_class: 20,
            val_per_class: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessMode {
    #[default]
    White,
    Black,
}

impl fmt::Display for AccessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AccessMode::White => "white",
            AccessMode::Black => "black",
        })
    }
}

impl FromStr for AccessMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "white" => Ok(AccessMode::White),
            "black" => Ok(AccessMode::Black),
            _ => Err(Error::Config(format!("unknown mode {s:?}, expected white or black"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Baseline {
    #[serde(rename = "Rand.")]
    Rand,
    FewE,
    Toxin,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [Baseline::Rand, Baseline::FewE, Baseline::Toxin];
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Baseline::Rand => "Rand.",
            Baseline::FewE => "FewE",
            Baseline::Toxin => "Toxin",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub dataset: DatasetSpec,
    /// `None` keeps no masks, which only suits graphs built elsewhere.
    pub split: Option<SplitConfig>,
    pub backbone: Backbone,
    pub train: TrainConfig,
    pub policy: Policy,
    /// Fraction of training nodes turned into single-node requests.
    pub k_fraction: f64,
    /// Caps the requests per removal size.
    pub max_requests: Option<usize>,
    pub removal_sizes: Vec<usize>,
    /// Number of disjoint groups for multi-node removal.
    pub groups: usize,
    pub region: RegionEdges,
    pub gradient_eval: GradientEval,
    pub attack: AttackConfig,
    pub mode: AccessMode,
    pub extraction: ExtractionConfig,
    /// Semantic coefficient in black-box mode; the removal-size default
    /// applies when absent.
    pub black_alpha3: Option<f64>,
    pub defense: DefenseConfig,
    pub trials: usize,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            dataset: DatasetSpec::default(),
            split: Some(SplitConfig::default()),
            backbone: Backbone::Gcn,
            train: TrainConfig::default(),
            policy: Policy::Random,
            k_fraction: 0.1,
            max_requests: None,
            removal_sizes: vec![1],
            groups: 5,
            region: RegionEdges::default(),
            gradient_eval: GradientEval::default(),
            attack: AttackConfig::default(),
            mode: AccessMode::White,
            extraction: ExtractionConfig::default(),
            black_alpha3: None,
            defense: DefenseConfig::None,
            trials: 1,
            output_dir: None,
            seed: 0,
            workers: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.train.validate()?;
        self.attack.validate()?;
        self.extraction.validate()?;
        self.defense.validate()?;
        if self.removal_sizes.is_empty() || self.removal_sizes.contains(&0) {
            return Err(Error::Config("removal_sizes must be non-empty and at least 1".into()));
        }
        if !(self.k_fraction > 0.0 && self.k_fraction <= 1.0) {
            return Err(Error::Config(format!("k_fraction must be in (0, 1], got {}", self.k_fraction)));
        }
        if self.trials == 0 || self.groups == 0 || self.max_requests == Some(0) || self.workers == Some(0) {
            return Err(Error::Config("trials, groups, max_requests and workers must be positive".into()));
        }
        if let Some(a) = self.black_alpha3 {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::Config(format!("black_alpha3 must be non-negative, got {a}")));
            }
        }
        if let DatasetSpec::Synth(s) = &self.dataset {
            if self.mode == AccessMode::Black && s.dim != self.extraction.query_dim {
                return Err(Error::Config(format!(
                    "extraction.query_dim {} differs from the dataset dimension {}",
                    self.extraction.query_dim, s.dim
                )));
            }
        }
        Ok(())
    }

    /// Worker count after the environment override.
    pub fn worker_count(&self) -> Result<usize> {
        match std::env::var(WORKERS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(Error::Config(format!("{WORKERS_ENV}={v:?} is not a positive integer"))),
            },
            Err(_) => Ok(self.workers.unwrap_or_else(rayon::current_num_threads)),
        }
    }
}

/// The dataset with the shared split applied.
pub fn prepare_graph(cfg: &ExperimentConfig) -> Result<Graph> {
    let g = cfg.dataset.load()?;
    match cfg.split {
        Some(s) => split(g, s.train_per_class, s.val_per_class, derive_seed(cfg.seed, SPLIT_STREAM)),
        None => Ok(g),
    }
}

pub fn train_original(cfg: &ExperimentConfig, g: &Graph, seed: u64) -> Result<ModelState> {
    train(g, cfg.backbone, &cfg.train_for(seed))
}

/// Deletion requests of one removal size for a trial.
pub fn requests_for(cfg: &ExperimentConfig, g: &Graph, size: usize, seed: u64) -> Result<Vec<DeletionRequest>> {
    let seed = derive_seed(derive_seed(seed, SELECT_STREAM), size as u64);
    let mut reqs = if size == 1 {
        select_targets(g, cfg.k_fraction, cfg.policy, seed)?
    } else {
        select_groups(g, size, cfg.groups, cfg.policy, seed)?
    };
    if let Some(m) = cfg.max_requests {
        reqs.truncate(m);
    }
    Ok(reqs)
}

/// Released `(grad_ori, grad_un)` after the defense.
pub fn defended(cfg: &ExperimentConfig, res: &UnlearnResult, seed: u64, request: usize) -> Result<(GradientVector, GradientVector)> {
    let stream = derive_seed(derive_seed(seed, DEFENSE_STREAM), request as u64);
    Ok((
        cfg.defense.apply(&res.grad_ori, stream)?,
        cfg.defense.apply(&res.grad_un, stream.wrapping_add(1))?,
    ))
}

/// Attack settings of one request, with its derived seed.
pub fn attack_config(cfg: &ExperimentConfig, seed: u64, request: usize, num_deleted: usize) -> AttackConfig {
    let mut a = cfg.attack.clone();
    a.seed = derive_seed(derive_seed(seed, ATTACK_STREAM), request as u64);
    if cfg.mode == AccessMode::Black {
        a.alpha3 = cfg.black_alpha3.unwrap_or_else(|| default_alpha3(num_deleted));
    }
    a
}

/// Rand., FewE and Toxin, in that order.
pub fn run_baselines(inputs: &AttackInputs, cfg: &AttackConfig) -> Result<[AttackResult; 3]> {
    let mode = AttackMode::for_counts(inputs.counts);
    Ok([
        baseline_rand(inputs, mode, cfg)?,
        baseline_fewe(inputs, mode, cfg)?,
        run_attack(inputs, mode, cfg)?,
    ])
}

/// Recovered region as a graph carrying the known labels.
pub fn recovered_graph(result: &AttackResult, labels: &[usize], num_classes: usize) -> Result<Graph> {
    Graph::new(result.x.clone(), labels.to_vec(), num_classes, result.edges.iter().copied())
}

/// Per-baseline reports of one trial and removal size, averaged over its
/// requests.
fn run_size(cfg: &ExperimentConfig, g: &Graph, original: &ModelState, seed: u64, size: usize, extraction: Option<&Extraction>) -> Result<[MetricReport; 3]> {
    let reqs = requests_for(cfg, g, size, seed)?;
    let mut sums = [[0.0; 6]; 3];
    for (i, req) in reqs.iter().enumerate() {
        let res = retrain_unlearn(g, original, req, &cfg.train_for(seed), cfg.gradient_eval, cfg.region)?;
        let (grad_ori, grad_un) = defended(cfg, &res, seed, i)?;
        let truth = recovery_target(g, req, cfg.region)?.to_graph(g.num_classes())?;
        let acfg = attack_config(cfg, seed, i, res.counts.num_deleted);
        let results = match cfg.mode {
            AccessMode::White => {
                let observed = grad_ori.sub(&grad_un)?;
                let inputs = AttackInputs {
                    model: original,
                    grad_un: &grad_un,
                    observed: &observed,
                    counts: &res.counts,
                };
                run_baselines(&inputs, &acfg)?
            }
            AccessMode::Black => {
                let e_ori = extraction.ok_or_else(|| Error::Config("black-box run without an extraction".into()))?;
                let k = black_knowledge(cfg, e_ori, original, &res.unlearned, seed, i)?;
                let observed = k.grad_ori.sub(&k.grad_un)?;
                let inputs = AttackInputs {
                    model: &k.surrogate_ori,
                    grad_un: &k.grad_un,
                    observed: &observed,
                    counts: &res.counts,
                };
                run_baselines(&inputs, &acfg)?
            }
        };
        let metric_seed = metric_seed(seed, i);
        for (b, r) in results.iter().enumerate() {
            let rec = recovered_graph(r, &res.counts.rec_labels, g.num_classes())?;
            let m = evaluate(original, &rec, &truth, metric_seed)?;
            for (s, v) in sums[b].iter_mut().zip(m.as_array()) {
                *s += v;
            }
        }
    }
    let k = reqs.len() as f64;
    Ok(sums.map(|s| report_from(s.map(|v| v / k))))
}

/// Surrogates and gradient stand-ins for one request. The original
/// victim's extraction is shared across the requests of a trial.
fn black_knowledge(
    cfg: &ExperimentConfig,
    e_ori: &Extraction,
    original: &ModelState,
    unlearned: &ModelState,
    seed: u64,
    request: usize,
) -> Result<BlackboxKnowledge> {
    let base = extraction_config(cfg, seed);
    let per_request = ExtractionConfig {
        seed: derive_seed(base.seed, request as u64),
        ..base
    };
    acquire_with(
        e_ori,
        &ModelOracle::new(original.clone()),
        &ModelOracle::new(unlearned.clone()),
        &per_request,
    )
}

/// Extracts the original victim and acquires the knowledge for one request.
pub fn black_knowledge_for(
    cfg: &ExperimentConfig,
    original: &ModelState,
    unlearned: &ModelState,
    seed: u64,
    request: usize,
) -> Result<BlackboxKnowledge> {
    let e_ori = extract(&ModelOracle::new(original.clone()), &extraction_config(cfg, seed))?;
    black_knowledge(cfg, &e_ori, original, unlearned, seed, request)
}

fn extraction_config(cfg: &ExperimentConfig, seed: u64) -> ExtractionConfig {
    ExtractionConfig {
        seed: derive_seed(seed, EXTRACT_STREAM),
        ..cfg.extraction.clone()
    }
}

pub fn metric_seed(seed: u64, request: usize) -> u64 {
    derive_seed(derive_seed(seed, METRIC_STREAM), request as u64)
}

fn report_from(a: [f64; 6]) -> MetricReport {
    MetricReport {
        nrmse: a[0],
        ed: a[1],
        pmgk: a[2],
        att_acc: a[3],
        att_fid: a[4],
        pwd: a[5],
    }
}

impl ExperimentConfig {
    /// Training configuration of a trial's models.
    pub fn train_for(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed: derive_seed(seed, TRAIN_STREAM),
            ..self.train.clone()
        }
    }
}

/// One line of the results table. `trial` is the trial index, or `mean`
/// for the average over successful trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub backbone: Backbone,
    pub policy: Policy,
    pub removal_size: usize,
    pub mode: AccessMode,
    pub baseline: Baseline,
    pub trial: String,
    pub report: Option<MetricReport>,
    /// Failed trials behind this row.
    pub failed: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn failed_trials(&self) -> usize {
        self.rows.iter().filter(|r| r.trial != "mean").map(|r| r.failed).sum::<usize>() / Baseline::ALL.len()
    }

    /// The `mean` row for a removal size and baseline.
    pub fn mean(&self, removal_size: usize, baseline: Baseline) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.trial == "mean" && r.removal_size == removal_size && r.baseline == baseline)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let metrics = match &r.report {
                Some(m) => m.as_array().map(|v| format!("{v}")).join(","),
                None => vec!["NaN"; 6].join(","),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.dataset, r.backbone, r.policy, r.removal_size, r.mode, r.baseline, r.trial, metrics, r.failed
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(io_err(path))?;
        f.write_all(self.to_csv().as_bytes()).map_err(io_err(path))
    }
}

/// Outcome of one trial: per removal size, the three baseline reports or
/// the failure message.
type TrialOutcome = Vec<std::result::Result<[MetricReport; 3], String>>;

fn run_trial(cfg: &ExperimentConfig, g: &Graph, trial: usize) -> TrialOutcome {
    let seed = trial_seed(cfg.seed, trial);
    let setup = (|| -> Result<(ModelState, Option<Extraction>)> {
        let original = train_original(cfg, g, seed)?;
        let extraction = match cfg.mode {
            AccessMode::White => None,
            AccessMode::Black => Some(extract(&ModelOracle::new(original.clone()), &extraction_config(cfg, seed))?),
        };
        Ok((original, extraction))
    })();
    let (original, extraction) = match setup {
        Ok(s) => s,
        Err(e) => {
            log::error!("trial {trial} failed during setup: {e}");
            return cfg.removal_sizes.iter().map(|_| Err(e.to_string())).collect();
        }
    };
    cfg.removal_sizes
        .iter()
        .map(|&size| {
            run_size(cfg, g, &original, seed, size, extraction.as_ref()).map_err(|e| {
                log::error!("trial {trial}, removal size {size} failed: {e}");
                e.to_string()
            })
        })
        .collect()
}

/// Runs every trial, in parallel up to the configured worker count, and
/// assembles the table in trial order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let g = prepare_graph(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.worker_count()?)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<TrialOutcome> = pool.install(|| (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, &g, t)).collect());

    let mut table = ResultTable::default();
    for (si, &size) in cfg.removal_sizes.iter().enumerate() {
        for (b, &baseline) in Baseline::ALL.iter().enumerate() {
            let row = |trial: String, report: Option<MetricReport>, failed: usize| ResultRow {
                dataset: cfg.dataset.name().to_string(),
                backbone: cfg.backbone,
                policy: cfg.policy,
                removal_size: size,
                mode: cfg.mode,
                baseline,
                trial,
                report,
                failed,
            };
            let mut sum = [0.0; 6];
            let mut ok = 0usize;
            for (t, outcome) in outcomes.iter().enumerate() {
                match &outcome[si] {
                    Ok(reports) => {
                        ok += 1;
                        for (s, v) in sum.iter_mut().zip(reports[b].as_array()) {
                            *s += v;
                        }
                        table.rows.push(row(t.to_string(), Some(reports[b]), 0));
                    }
                    Err(_) => table.rows.push(row(t.to_string(), None, 1)),
                }
            }
            let mean = (ok > 0).then(|| report_from(sum.map(|v| v / ok as f64)));
            table.rows.push(row("mean".into(), mean, cfg.trials - ok));
        }
    }
    Ok(table)
}

/// Runs an experiment and writes `results.csv` and `config.json` into
/// `out`.
pub fn run_and_write(cfg: &ExperimentConfig, out: &Path) -> Result<ResultTable> {
    let table = run_experiment(cfg)?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    table.write_csv(&out.join("results.csv"))?;
    let p = out.join("config.json");
    fs::write(&p, cfg.to_json()).map_err(io_err(&p))?;
    Ok(table)
}

/// One named check of [`selfcheck`].
#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Finite-difference and oracle checks that run in a few seconds.
pub fn selfcheck() -> Vec<CheckOutcome> {
    let checks: [(&'static str, fn() -> Result<String>); 7] = [
        ("autodiff first order", checks::first_order),
        ("autodiff second order", checks::second_order),
        ("loss gradient, all backbones", checks::loss_gradients),
        ("w2 vs exhaustive permutations", checks::w2_oracle),
        ("pmgk self-kernel", checks::pmgk_self),
        ("prune hand example", checks::prune_example),
        ("finalized edge budget", checks::edge_budget),
    ];
    checks
        .into_iter()
        .map(|(name, f)| {
            let (passed, detail) = match f() {
                Ok(d) => (true, d),
                Err(e) => (false, e.to_string()),
            };
            CheckOutcome { name, passed, detail }
        })
        .collect()
}

mod checks {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use unlearnprobe_autodiff::{finite_diff_check, Tape, Tensor};

    use crate::attack::finalize;
    use crate::defense::prune_gradient;
    use crate::error::{Error, Result};
    use crate::gnn::{cross_entropy, forward, loss_gradient, Backbone, ModelState, Propagator};
    use crate::graphdata::Graph;
    use crate::metrics::{pmgk, w2, PmgkConfig};
    use unlearnprobe_autodiff::GradientVector;

    fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
        Tensor::new(r, c, (0..r * c).map(|_| rng.sample(StandardNormal)).collect()).expect("finite")
    }

    fn within(what: &str, err: f64, tol: f64) -> Result<String> {
        if err < tol {
            Ok(format!("max relative error {err:.2e}"))
        } else {
            Err(Error::Oracle(format!("{what}: relative error {err:.2e} exceeds {tol:.0e}")))
        }
    }

    pub fn first_order() -> Result<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst = 0.0f64;
        for _ in 0..10 {
            let w = randn(&mut rng, 4, 3);
            let x = randn(&mut rng, 5, 4);
            let err = finite_diff_check(
                |t, xv| {
                    let h = xv.matmul(t.constant(w.clone()))?;
                    let a = h.relu().add(h.sigmoid())?.row_softmax().log()?;
                    let b = h.mul(h)?.add_scalar(1.0).sqrt()?.exp()?;
                    Ok(a.add(b.scale(0.1))?.mean())
                },
                &x,
                1e-6,
            )?;
            worst = worst.max(err);
        }
        within("first order", worst, 1e-4)
    }

    pub fn second_order() -> Result<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = randn(&mut rng, 5, 3);
        let x = randn(&mut rng, 4, 5);
        let err = finite_diff_check(
            |t, xv| {
                let wv = t.param(w.clone());
                let loss = cross_entropy(xv.matmul(wv)?, &[0, 1, 2, 0], &[0, 1, 2, 3]).map_err(|e| match e {
                    Error::Autodiff(a) => a,
                    other => unlearnprobe_autodiff::AutodiffError::Invalid(other.to_string()),
                })?;
                let g = t.grad(loss, &[wv], true)?.values[0];
                Ok(g.mul(g)?.sum())
            },
            &x,
            1e-5,
        )?;
        within("second order", err, 1e-3)
    }

    fn tiny_graph() -> Result<Graph> {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = randn(&mut rng, 5, 3);
        Graph::new(x, vec![0, 1, 0, 1, 1], 2, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)])?.with_masks(
            vec![true, true, true, false, true],
            vec![false; 5],
            vec![false, false, false, true, false],
        )
    }

    pub fn loss_gradients() -> Result<String> {
        let g = tiny_graph()?;
        let rows: Vec<usize> = vec![0, 1, 2, 4];
        let mut worst = 0.0f64;
        for backbone in [Backbone::Gcn, Backbone::Sgc, Backbone::Sage] {
            let model = ModelState::init(backbone, 3, 4, 2, 7);
            let analytic = loss_gradient(&model, &g, g.train_mask())?.flat();
            let loss_at = |flat: &[f64]| -> Result<f64> {
                let params = GradientVector::from_flat(&model.layout(), flat)?;
                let tape = Tape::new();
                let vars: Vec<_> = params.segments().iter().map(|p| tape.constant(p.clone())).collect();
                let prop = Propagator::sparse(g.n(), g.edges())?;
                let out = forward(backbone, &vars, &prop, tape.constant(g.features().clone()))?;
                Ok(cross_entropy(out.logits, g.labels(), &rows)?.item())
            };
            let base = model.flat();
            let eps = 1e-6;
            for (i, a) in analytic.iter().enumerate() {
                let mut p = base.clone();
                p[i] += eps;
                let mut m = base.clone();
                m[i] -= eps;
                let numeric = (loss_at(&p)? - loss_at(&m)?) / (2.0 * eps);
                worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8));
            }
        }
        within("loss gradient", worst, 1e-4)
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

    pub fn w2_oracle() -> Result<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let perms = permutations(5);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let a = randn(&mut rng, 5, 3);
            let b = randn(&mut rng, 5, 3);
            let brute = perms
                .iter()
                .map(|p| {
                    (0..5)
                        .map(|i| a.row(i).iter().zip(b.row(p[i])).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
                        .sum::<f64>()
                        / 5.0
                })
                .fold(f64::INFINITY, f64::min);
            worst = worst.max((w2(&a, &b)? - brute).abs());
        }
        if worst < 1e-10 {
            Ok(format!("max deviation {worst:.1e}"))
        } else {
            Err(Error::Oracle(format!("w2 deviates from brute force by {worst:.2e}")))
        }
    }

    pub fn pmgk_self() -> Result<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = randn(&mut rng, 12, 4);
        let cfg = PmgkConfig {
            k: 3,
            levels: 4,
            iters: 50,
            seed: 0,
        };
        let (v, _) = pmgk(&h, &h, &cfg)?;
        if (v - 1.0).abs() < 1e-12 {
            Ok("1.0".into())
        } else {
            Err(Error::Oracle(format!("self-kernel is {v}")))
        }
    }

    pub fn prune_example() -> Result<String> {
        let gv = GradientVector::new(vec![Tensor::row_vector(vec![3.0, -1.0, 2.0, 0.5])?]);
        let out = prune_gradient(&gv, 0.5)?.flat();
        if out == [3.0, 0.0, 2.0, 0.0] {
            Ok("[3, 0, 2, 0]".into())
        } else {
            Err(Error::Oracle(format!("pruned to {out:?}")))
        }
    }

    pub fn edge_budget() -> Result<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for budget in [0, 1, 5, 20, 45] {
            let mut p = Tensor::zeros(10, 10);
            for u in 0..10 {
                for v in u + 1..10 {
                    let x: f64 = rng.random();
                    p.set(u, v, x);
                    p.set(v, u, x);
                }
            }
            let edges = finalize(&p, budget, budget as u64);
            if edges.len() != budget {
                return Err(Error::Oracle(format!("budget {budget} produced {} edges", edges.len())));
            }
        }
        Ok("5 budgets met".into())
    }
}
