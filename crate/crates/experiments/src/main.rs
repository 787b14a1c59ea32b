use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use autoec_agents::{Checkpoint, Decode, ModelConfig};
use autoec_core::features::ela::problem_feature_vector;
use autoec_core::problem::{generate_set, GenOptions, Manifest, ProblemInstance};
use autoec_core::space::registry;
use autoec_experiments::importance::importance_from_eval;
use autoec_experiments::report::{read_json, write_json, write_report, write_runs};
use autoec_experiments::{
    ablation_run, baseline_method, evaluate, fresh_agents, AblationMode, Baseline, EvalOptions, EvalResult, ExpError,
    ImportanceMatrix, Method,
};
use autoec_training::{train_composer, train_controller, EpochLog, TrainConfig};

#[derive(Parser)]
#[command(name = "autoec", about = "Compose, train, evaluate and analyze modular evolutionary optimizers")]
struct Cli {
    /// Worker threads; 1 gives a single-threaded run.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 51)]
    runs: usize,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Copy, Clone, ValueEnum)]
enum DecodeArg {
    Greedy,
    Sample,
}

impl From<DecodeArg> for Decode {
    fn from(d: DecodeArg) -> Self {
        match d {
            DecodeArg::Greedy => Decode::Greedy,
            DecodeArg::Sample => Decode::Sample,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Split {
    Train,
    Test,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Stage {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

#[derive(Subcommand)]
enum RegistryCommand {
    /// Print every registered module as JSON.
    Dump,
}

#[derive(Subcommand)]
enum Command {
    /// Module registry utilities.
    Registry {
        #[command(subcommand)]
        command: RegistryCommand,
    },
    /// Generate a train/test problem manifest.
    GenProblems {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        /// Generator menus as JSON; defaults to the full suite.
        #[arg(long)]
        options: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print problem features of every instance in a manifest.
    Features {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the composer, the controller, or both in turn.
    Train {
        #[arg(long)]
        problems: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        stage: Stage,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Start from this checkpoint instead of fresh agents.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Evaluate a checkpoint on a problem set.
    Eval {
        #[arg(long)]
        problems: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: Split,
        #[arg(long, value_enum, default_value = "greedy")]
        decode: DecodeArg,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate one ablation of the trained agents.
    Ablate {
        #[arg(long)]
        problems: PathBuf,
        #[arg(long)]
        mode: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Checkpoint trained on zeroed features.
        #[arg(long)]
        sbs_checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: Split,
        #[arg(long, value_enum, default_value = "greedy")]
        decode: DecodeArg,
        #[command(flatten)]
        common: Common,
    },
    /// Run a canonical baseline.
    Baseline {
        #[arg(long)]
        problems: PathBuf,
        #[arg(long)]
        name: String,
        #[arg(long, value_enum, default_value = "test")]
        split: Split,
        #[command(flatten)]
        common: Common,
    },
    /// Module-importance matrix from the workflows of an evaluation.
    Analyze {
        #[arg(long)]
        problems: PathBuf,
        /// `eval_*.json` written by `eval` or `ablate`.
        #[arg(long)]
        eval: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Tables, heatmap and curves from earlier outputs.
    Report {
        /// Evaluation files; the first is the reference for the marks.
        #[arg(long, num_args = 1..)]
        results: Vec<PathBuf>,
        #[arg(long)]
        importance: Option<PathBuf>,
        /// JSON-lines training log.
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

type Res<T> = Result<T, ExpError>;

fn load_split(path: &Path, split: Split) -> Res<Vec<ProblemInstance>> {
    let manifest = Manifest::from_json(&fs::read_to_string(path)?)?;
    let (train, test) = manifest.instantiate()?;
    Ok(match split {
        Split::Train => train.instances,
        Split::Test => test.instances,
    })
}

fn load_all(path: &Path) -> Res<Vec<ProblemInstance>> {
    let manifest = Manifest::from_json(&fs::read_to_string(path)?)?;
    let (train, test) = manifest.instantiate()?;
    let mut all = train.instances;
    all.extend(test.instances);
    all.sort_by_key(|i| i.id);
    Ok(all)
}

fn save_eval(dir: &Path, result: &EvalResult) -> Res<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join(format!("eval_{}.json", result.method)), result)?;
    write_runs(dir, result)?;
    println!("{}: mean normalized objective {:.6e} ± {:.3e}", result.method, result.mean, result.std);
    Ok(())
}

fn registry_dump() -> serde_json::Value {
    let entries: Vec<_> = registry()
        .variants()
        .iter()
        .map(|v| {
            json!({
                "id": v.id.bit_string(),
                "name": v.name,
                "kind": v.kind.name(),
                "style": v.style.map(|s| format!("{s:?}")),
                "config": v.config.params.iter().map(|p| json!({
                    "name": p.name, "lower": p.lower, "upper": p.upper, "default": format!("{:?}", p.default),
                })).collect::<Vec<_>>(),
                "followers": v.rule.followers.iter().map(|f| format!("{f:?}")).collect::<Vec<_>>(),
                "conditional_followers": v.rule.conditional.iter().map(|(f, c)| format!("{f:?} if {c:?}")).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({ "schema_version": autoec_experiments::SCHEMA_VERSION, "modules": entries })
}

fn train(problems: &Path, stage: Stage, config: Option<&Path>, init: Option<&Path>, seed: u64, out: &Path) -> Res<()> {
    let mut cfg: TrainConfig = match config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    cfg.seed = seed;
    cfg.validate().map_err(ExpError::Invalid)?;
    let train_set = load_split(problems, Split::Train)?;
    fs::create_dir_all(out)?;
    let (mut composer, mut policy) = match init {
        Some(p) => {
            let ck = Checkpoint::load_expecting(p, &cfg.model)?;
            (ck.composer, ck.controller)
        }
        None => fresh_agents(cfg.model, seed),
    };
    let mut log = fs::File::create(out.join("train_log.jsonl"))?;
    let mut write_log = |l: &EpochLog| -> Res<()> {
        writeln!(log, "{}", serde_json::to_string(l)?)?;
        Ok(())
    };
    for _ in 0..cfg.cycles {
        if stage != Stage::Two {
            let mut logs = Vec::new();
            let mut saves = Vec::new();
            train_composer(&train_set, &mut composer, &policy, &cfg, &mut |l, c| {
                logs.push(l.clone());
                saves.push((l.epoch, c.clone()));
            })?;
            for (l, (epoch, c)) in logs.iter().zip(saves) {
                write_log(l)?;
                Checkpoint::new(c, policy.clone(), seed, "1", epoch as u64).save(&out.join(format!("ckpt_1_{epoch}.bin")))?;
            }
        }
        if stage != Stage::One {
            let mut logs = Vec::new();
            let mut saves = Vec::new();
            train_controller(&train_set, &composer, &mut policy, &cfg, None, &mut |l, p| {
                logs.push(l.clone());
                saves.push((l.epoch, p.clone()));
            })?;
            for (l, (epoch, p)) in logs.iter().zip(saves) {
                write_log(l)?;
                Checkpoint::new(composer.clone(), p, seed, "2", epoch as u64).save(&out.join(format!("ckpt_2_{epoch}.bin")))?;
            }
        }
    }
    Ok(())
}

fn read_log(path: &Path) -> Res<Vec<EpochLog>> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

fn run(cli: Cli) -> Res<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ExpError::Invalid(e.to_string()))?;
    }
    match cli.command {
        Command::Registry { command: RegistryCommand::Dump } => {
            println!("{}", serde_json::to_string_pretty(&registry_dump())?);
        }
        Command::GenProblems { n, seed, test_fraction, options, out } => {
            let opts: GenOptions = match options {
                Some(p) => read_json(&p)?,
                None => GenOptions::default(),
            };
            let (train, test) = generate_set(n, seed, test_fraction, &opts)?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(&out, Manifest::new(seed, test_fraction, opts, &train, &test).to_json())?;
        }
        Command::Features { instance, seed } => {
            let entries: Vec<_> = load_all(&instance)?
                .iter()
                .map(|inst| {
                    let f = problem_feature_vector(inst, seed);
                    let named: Vec<_> = f.named().into_iter().map(|(k, v)| json!({ "name": k, "value": v })).collect();
                    json!({ "instance": inst.id, "hash": inst.hash(), "sample_size": f.sample_size, "features": named })
                })
                .collect();
            let doc = json!({ "schema_version": autoec_experiments::SCHEMA_VERSION, "seed": seed, "instances": entries });
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
        Command::Train { problems, stage, config, init, seed, out_dir } => {
            train(&problems, stage, config.as_deref(), init.as_deref(), seed, &out_dir)?;
        }
        Command::Eval { problems, checkpoint, split, decode, common } => {
            let insts = load_split(&problems, split)?;
            let ck = Checkpoint::load(&checkpoint)?;
            let m = Method::Agents {
                composer: &ck.composer,
                controller: Some(&ck.controller),
                decode: decode.into(),
                zero_features: false,
            };
            let opts = EvalOptions { runs: common.runs, seed: common.seed, np_init: None };
            save_eval(&common.out_dir, &evaluate("checkpoint", &m, &insts, &opts)?)?;
        }
        Command::Ablate { problems, mode, checkpoint, sbs_checkpoint, split, decode, common } => {
            let mode: AblationMode = mode.parse()?;
            let insts = load_split(&problems, split)?;
            let trained = checkpoint.as_deref().map(Checkpoint::load).transpose()?;
            let sbs = sbs_checkpoint.as_deref().map(Checkpoint::load).transpose()?;
            let model = trained.as_ref().or(sbs.as_ref()).map(|c| c.header.model).unwrap_or_else(ModelConfig::default);
            for c in trained.iter().chain(sbs.iter()) {
                if c.header.model != model {
                    return Err(ExpError::Invalid("checkpoints disagree on the model shape".into()));
                }
            }
            let opts = EvalOptions { runs: common.runs, seed: common.seed, np_init: None };
            let r = ablation_run(mode, trained.as_ref(), sbs.as_ref(), model, &insts, &opts, decode.into())?;
            save_eval(&common.out_dir, &r)?;
        }
        Command::Baseline { problems, name, split, common } => {
            let b: Baseline = name.parse()?;
            let insts = load_split(&problems, split)?;
            let opts = EvalOptions { runs: common.runs, seed: common.seed, np_init: None };
            save_eval(&common.out_dir, &evaluate(b.name(), &baseline_method(b), &insts, &opts)?)?;
        }
        Command::Analyze { problems, eval, common } => {
            let result: EvalResult = read_json(&eval)?;
            let m = importance_from_eval(&result, &load_all(&problems)?)?;
            fs::create_dir_all(&common.out_dir)?;
            write_json(&common.out_dir.join("importance.json"), &m)?;
            write_report(&common.out_dir, &[], Some(&m), &[])?;
        }
        Command::Report { results, importance, log, common } => {
            let results = results.iter().map(|p| read_json(p)).collect::<Res<Vec<EvalResult>>>()?;
            let m: Option<ImportanceMatrix> = importance.as_deref().map(read_json).transpose()?;
            let curves = log.as_deref().map(read_log).transpose()?.unwrap_or_default();
            for p in write_report(&common.out_dir, &results, m.as_ref(), &curves)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
