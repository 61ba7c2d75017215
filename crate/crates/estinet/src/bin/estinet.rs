use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use estinet::experiment::{
    audit, generate, gradcheck_suite, reproduce, run_experiment, write_records, ExperimentConfig,
    GenTask, ModelChoice, Scale, TaskId,
};
use estinet::framework::{evaluate, load_checkpoint, EstiNetError, Mode};
use estinet::models::{ImageLookupModel, TextLogicModel, TllModel};
use estinet::tasks::{gen_text_logic, gen_tll};

#[derive(Parser)]
#[command(name = "estinet", about = "Estimate-and-replace experiment driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for run records and checkpoints.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a saved checkpoint on freshly generated test data.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Evaluation mode: train, test, or inference.
        #[arg(long, default_value = "inference")]
        mode: String,
    },
    /// Generate dataset files (line-delimited JSON, IDX images, tables).
    GenData {
        /// One of: text-logic, tll, digits, image-addition, image-lookup.
        #[arg(long)]
        task: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Sequence length / table dimension for image tasks.
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Re-verify every written label against the registry functions.
        #[arg(long)]
        audit: bool,
    },
    /// Finite-difference validation of every op and layer backward rule.
    Gradcheck {
        #[arg(long, default_value_t = 2)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Flip the named case's analytic gradient (mutation self-test).
        #[arg(long)]
        fault: Option<String>,
    },
    /// Re-run one of the published result tables and emit CSV.
    Reproduce {
        /// Table number 1-4.
        #[arg(long)]
        table: u8,
        /// desk or paper.
        #[arg(long, default_value = "desk")]
        scale: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), EstiNetError> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(seed) = seed {
                cfg.training.seed = seed;
            }
            if let Some(out) = out.clone() {
                cfg.out_dir = Some(out);
            }
            let records = run_experiment(&cfg)?;
            for r in &records {
                println!(
                    "seed {}: {}",
                    r.seed,
                    r.final_metrics
                        .iter()
                        .map(|(k, v)| format!("{k}={v:.4}"))
                        .collect::<Vec<_>>()
                        .join(" ")
                );
            }
            if let Some(dir) = cfg.out_dir.as_deref() {
                let path = write_records(&records, dir)?;
                println!("records written to {}", path.display());
            }
            Ok(())
        }
        Command::Eval { config, checkpoint, mode } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let mode = match mode.as_str() {
                "train" => Mode::Train,
                "test" => Mode::Test,
                "inference" => Mode::Inference,
                other => {
                    return Err(EstiNetError::Config(format!(
                        "mode {other:?} is not train/test/inference"
                    )))
                }
            };
            let ck = load_checkpoint(&checkpoint)?;
            match (cfg.task, cfg.model) {
                (TaskId::TextLogic, ModelChoice::EstiNet | ModelChoice::Baseline) => {
                    let (model, mut params) = TextLogicModel::build(cfg.training.seed);
                    ck.restore_into("extractor", &mut params.extractor)?;
                    ck.restore_into("estimator", &mut params.estimator)?;
                    let test = gen_text_logic(cfg.dataset.n_test, cfg.dataset.data_seed, "test")?;
                    let report = evaluate(&model, &params, &test, mode, 50)?;
                    println!(
                        "{} accuracy {:.4} over {} samples",
                        cfg.task.name(),
                        report.accuracy(),
                        report.n
                    );
                }
                (TaskId::Tll, ModelChoice::EstiNet | ModelChoice::Baseline) => {
                    let dims = cfg.tll_dims.clone().map(Into::into).unwrap_or_default();
                    let (model, mut params) = TllModel::build(dims, cfg.training.seed)?;
                    ck.restore_into("extractor", &mut params.extractor)?;
                    ck.restore_into("estimator", &mut params.estimator)?;
                    let ds = gen_tll(cfg.dataset.n_train, cfg.dataset.n_test, cfg.dataset.data_seed)?;
                    let report = evaluate(&model, &params, &ds.test, mode, 20)?;
                    println!(
                        "{} accuracy {:.4} over {} samples",
                        cfg.task.name(),
                        report.accuracy(),
                        report.n
                    );
                }
                (TaskId::ImageLookup, _) => {
                    let k = cfg.dataset.k.unwrap();
                    let corpus = std::sync::Arc::new(estinet::experiment::resolve_corpus(
                        "t10k",
                        cfg.dataset.corpus_test.unwrap_or(1000),
                        cfg.dataset.data_seed + 1,
                    ));
                    let table = estinet::blackbox::LookupTable::random(
                        k,
                        cfg.dataset.table_seed.unwrap(),
                    );
                    let (model, mut params) =
                        ImageLookupModel::build(corpus.clone(), table, cfg.training.seed);
                    ck.restore_into("extractor", &mut params.extractor)?;
                    ck.restore_into("estimator", &mut params.estimator)?;
                    let (test_ds, _) = estinet::tasks::gen_image_lookup(
                        &corpus,
                        k,
                        cfg.dataset.n_test,
                        cfg.dataset.data_seed + 2,
                        cfg.dataset.table_seed.unwrap(),
                    )?;
                    let report = evaluate(&model, &params, &test_ds.samples, mode, 50)?;
                    println!(
                        "{} accuracy {:.4} over {} samples",
                        cfg.task.name(),
                        report.accuracy(),
                        report.n
                    );
                }
                (task, model) => {
                    return Err(EstiNetError::Config(format!(
                        "eval does not support {} with model {}",
                        task.name(),
                        model.name()
                    )))
                }
            }
            Ok(())
        }
        Command::GenData { task, n, k, seed, out, audit: do_audit } => {
            let task = GenTask::parse(&task).ok_or_else(|| {
                EstiNetError::Config(format!(
                    "unknown task {task:?}; expected text-logic, tll, digits, image-addition, or image-lookup"
                ))
            })?;
            let written = generate(task, n, k, seed, &out)?;
            for p in &written {
                println!("wrote {}", p.display());
            }
            if do_audit {
                let checked = audit(task, &out)?;
                println!("audited {checked} labels against the registry");
            }
            Ok(())
        }
        Command::Gradcheck { trials, seed, fault } => {
            let report = gradcheck_suite(trials, seed, fault.as_deref())?;
            for case in &report.cases {
                println!(
                    "{:<28} max rel err {:>10.3e} over {:>4} elements  {}",
                    case.name,
                    case.max_relative_error,
                    case.elements_checked,
                    if case.passed { "ok" } else { "FAIL" }
                );
            }
            if report.passed() {
                println!("gradcheck: all {} cases passed", report.cases.len());
                Ok(())
            } else {
                Err(EstiNetError::Config(format!(
                    "gradcheck failures: {}",
                    report
                        .failures()
                        .iter()
                        .map(|c| c.name.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                )))
            }
        }
        Command::Reproduce { table, scale, seed, out } => {
            let scale = Scale::parse(&scale)
                .ok_or_else(|| EstiNetError::Config(format!("scale {scale:?} is not desk/paper")))?;
            let path = reproduce(table, scale, seed, &out)?;
            println!("table {table} written to {}", path.display());
            Ok(())
        }
    }
}
