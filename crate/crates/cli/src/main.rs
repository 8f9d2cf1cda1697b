use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use unlearnprobe_core::attack::{AttackInputs, AttackMode};
use unlearnprobe_core::error::io_err;
use unlearnprobe_core::gnn::ModelState;
use unlearnprobe_core::graphdata::{load_region_graph, recovery_target, DeletionRequest, Graph};
use unlearnprobe_core::harness::{
    attack_config, black_knowledge_for, defended, metric_seed, prepare_graph, requests_for, run_and_write, run_baselines,
    selfcheck, train_original, trial_seed, AccessMode, ExperimentConfig,
};
use unlearnprobe_core::metrics::evaluate;
use unlearnprobe_core::unlearn::{load_counts, load_gradient, retrain_unlearn, UnlearnResult};
use unlearnprobe_core::{Error, Result};

#[derive(Parser)]
#[command(name = "unlearnprobe", version, about = "Reconstruction attacks against graph unlearning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured synthetic dataset as nodes.csv and edges.csv.
    Gen(Common),
    /// Train the original model (model.json).
    Train(Common),
    /// Unlearn the first deletion request by retraining (unlearn/).
    Unlearn(Common),
    /// Attack the released gradients (attack/).
    Attack(Common),
    /// Score the recovered region against the truth (metrics.json).
    Eval(Common),
    /// End-to-end experiment (results.csv and config.json).
    Experiment(Common),
    /// Run the finite-difference and oracle checks.
    Selfcheck,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON); defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; stages read earlier stages' files from it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["white", "black"])]
    mode: Option<String>,
    #[arg(long, value_parser = ["random", "worst"])]
    policy: Option<String>,
}

/// Failures that map to exit status 2.
struct Usage(String);

enum Failure {
    Usage(Usage),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl Common {
    fn resolve(&self) -> std::result::Result<(ExperimentConfig, PathBuf), Failure> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p).map_err(|e| Failure::Usage(Usage(format!("cannot use config {}: {e}", p.display()))))?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = &self.mode {
            cfg.mode = m.parse().map_err(|e: Error| Failure::Usage(Usage(e.to_string())))?;
        }
        if let Some(p) = &self.policy {
            cfg.policy = p.parse().map_err(|e: Error| Failure::Usage(Usage(e.to_string())))?;
        }
        cfg.validate().map_err(|e| Failure::Usage(Usage(e.to_string())))?;
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&out).map_err(io_err(&out))?;
        Ok((cfg, out))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Gen(c) => c.resolve().and_then(|(cfg, out)| Ok(gen(&cfg, &out)?)),
        Command::Train(c) => c.resolve().and_then(|(cfg, out)| Ok(train_stage(&cfg, &out)?)),
        Command::Unlearn(c) => c.resolve().and_then(|(cfg, out)| Ok(unlearn_stage(&cfg, &out)?)),
        Command::Attack(c) => c.resolve().and_then(|(cfg, out)| Ok(attack_stage(&cfg, &out)?)),
        Command::Eval(c) => c.resolve().and_then(|(cfg, out)| Ok(eval_stage(&cfg, &out)?)),
        Command::Experiment(c) => c.resolve().and_then(|(cfg, out)| Ok(experiment(&cfg, &out)?)),
        Command::Selfcheck => Ok(run_selfcheck()),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Usage(Usage(msg))) => {
            eprintln!("error: {msg}");
            eprintln!("usage: unlearnprobe <gen|train|unlearn|attack|eval|experiment|selfcheck> [--config <path>] [--seed <n>] [--out <dir>] [--mode white|black] [--policy random|worst]");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn gen(cfg: &ExperimentConfig, out: &Path) -> Result<ExitCode> {
    let g = cfg.dataset.load()?;
    g.save(&out.join("nodes.csv"), &out.join("edges.csv"))?;
    println!("wrote {} nodes and {} edges to {}", g.n(), g.edges().len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn stage_seed(cfg: &ExperimentConfig) -> u64 {
    trial_seed(cfg.seed, 0)
}

fn train_stage(cfg: &ExperimentConfig, out: &Path) -> Result<ExitCode> {
    let g = prepare_graph(cfg)?;
    let model = train_original(cfg, &g, stage_seed(cfg))?;
    model.save(&out.join("model.json"))?;
    println!("test accuracy {:.4}", model.accuracy(&g, g.test_mask())?);
    Ok(ExitCode::SUCCESS)
}

fn first_request(cfg: &ExperimentConfig, g: &Graph) -> Result<DeletionRequest> {
    let size = cfg.removal_sizes[0];
    requests_for(cfg, g, size, stage_seed(cfg))?
        .into_iter()
        .next()
        .ok_or_else(|| Error::Request("no deletion request selected".into()))
}

fn unlearn_stage(cfg: &ExperimentConfig, out: &Path) -> Result<ExitCode> {
    let g = prepare_graph(cfg)?;
    let model = ModelState::load(&out.join("model.json"))?;
    let req = first_request(cfg, &g)?;
    let res = retrain_unlearn(&g, &model, &req, &cfg.train_for(stage_seed(cfg)), cfg.gradient_eval, cfg.region)?;
    let (grad_ori, grad_un) = defended(cfg, &res, stage_seed(cfg), 0)?;
    let released = UnlearnResult { grad_ori, grad_un, ..res };
    released.save(&out.join("unlearn"))?;
    let truth = recovery_target(&g, &req, cfg.region)?.to_graph(g.num_classes())?;
    truth.save(&out.join("truth_nodes.csv"), &out.join("truth_edges.csv"))?;
    let p = out.join("request.json");
    fs::write(&p, serde_json::to_string_pretty(&req)?).map_err(io_err(&p))?;
    println!("deleted {:?}; recovery region has {} nodes", req.deleted(), released.counts.num_nodes());
    Ok(ExitCode::SUCCESS)
}

fn attack_stage(cfg: &ExperimentConfig, out: &Path) -> Result<ExitCode> {
    let model = ModelState::load(&out.join("model.json"))?;
    let dir = out.join("unlearn");
    let counts = load_counts(&dir.join("counts.json"))?;
    let acfg = attack_config(cfg, stage_seed(cfg), 0, counts.num_deleted);
    let results = match cfg.mode {
        AccessMode::White => {
            let grad_un = load_gradient(&dir.join("grad_un.bin"), &model.layout())?;
            let observed = load_gradient(&dir.join("grad_diff.bin"), &model.layout())?;
            let inputs = AttackInputs {
                model: &model,
                grad_un: &grad_un,
                observed: &observed,
                counts: &counts,
            };
            run_baselines(&inputs, &acfg)?
        }
        AccessMode::Black => {
            let unlearned = ModelState::load(&dir.join("unlearned.json"))?;
            let k = black_knowledge_for(cfg, &model, &unlearned, stage_seed(cfg), 0)?;
            let observed = k.grad_ori.sub(&k.grad_un)?;
            let inputs = AttackInputs {
                model: &k.surrogate_ori,
                grad_un: &k.grad_un,
                observed: &observed,
                counts: &counts,
            };
            run_baselines(&inputs, &acfg)?
        }
    };
    for (name, r) in ["rand", "fewe", "toxin"].iter().zip(&results) {
        r.save(&out.join("attack").join(name), &counts.rec_labels, &acfg)?;
    }
    let toxin = &results[2];
    println!(
        "attack ({:?}) ran {} iterations, loss {:.4e} -> {:.4e}",
        AttackMode::for_counts(&counts),
        toxin.iterations,
        toxin.loss_trace[0],
        toxin.loss_trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok(ExitCode::SUCCESS)
}

fn eval_stage(cfg: &ExperimentConfig, out: &Path) -> Result<ExitCode> {
    let model = ModelState::load(&out.join("model.json"))?;
    let classes = prepare_graph(cfg)?.num_classes();
    let truth = load_region_graph(&out.join("truth_nodes.csv"), &out.join("truth_edges.csv"))?;
    let truth = Graph::new(truth.features().clone(), truth.labels().to_vec(), classes, truth.edges().iter().copied())?;
    let mut all = serde_json::Map::new();
    for name in ["rand", "fewe", "toxin"] {
        let dir = out.join("attack").join(name);
        let rec = load_region_graph(&dir.join("features.csv"), &dir.join("edges.csv"))?;
        let rec = Graph::new(rec.features().clone(), rec.labels().to_vec(), classes, rec.edges().iter().copied())?;
        let m = evaluate(&model, &rec, &truth, metric_seed(stage_seed(cfg), 0))?;
        println!(
            "{name:>5}: nrmse {:.4} ed {:.4} pmgk {:.4} att_acc {:.4} att_fid {:.4} pwd {:.4}",
            m.nrmse, m.ed, m.pmgk, m.att_acc, m.att_fid, m.pwd
        );
        all.insert(name.into(), serde_json::to_value(m)?);
    }
    let p = out.join("metrics.json");
    fs::write(&p, serde_json::to_string_pretty(&all)?).map_err(io_err(&p))?;
    Ok(ExitCode::SUCCESS)
}

fn experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExitCode> {
    let table = run_and_write(cfg, out)?;
    for row in table.rows.iter().filter(|r| r.trial == "mean") {
        match &row.report {
            Some(m) => println!(
                "size {} {:>5}: nrmse {:.4} att_acc {:.4} att_fid {:.4} (failed {})",
                row.removal_size, row.baseline, m.nrmse, m.att_acc, m.att_fid, row.failed
            ),
            None => println!("size {} {:>5}: every trial failed", row.removal_size, row.baseline),
        }
    }
    println!("wrote {}", out.join("results.csv").display());
    let failed = table.failed_trials();
    if failed > 0 {
        eprintln!("{failed} trial(s) failed");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn run_selfcheck() -> ExitCode {
    let outcomes = selfcheck();
    let passed = outcomes.iter().filter(|o| o.passed).count();
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    println!("{passed} passed, {} failed", outcomes.len() - passed);
    if passed == outcomes.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
