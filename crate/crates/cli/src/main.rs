use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use condsel::analysis::{GapKind, GapMatrix};
use condsel::harness::gaps::{gap_study, write_gap_study};
use condsel::harness::report::{render_text, write_report_dir};
use condsel::harness::sweep::{sweep_eta_gamma, sweep_n_src, write_sweep_csv};
use condsel::harness::synth::{generate, SynthConfig, REFERENCE_COLUMN};
use condsel::harness::theory::run_theory_suite;
use condsel::harness::toy::{extract_toy, ToyExtraction};
use condsel::harness::{leave_one_out, load_accuracy_table, save_accuracy_table, save_network};
use condsel::taskrep::{ANALYSIS_ETA, DEFAULT_EPSILON, DEFAULT_ETA};
use condsel::{AccuracyTable, BundleSet, Method, RunConfig, TaskId};

#[derive(Parser)]
#[command(name = "condsel", version, about = "Conductance-based model selection toolkit")]
struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute conductance bundles from the built-in toy networks.
    ExtractToy(ExtractToyArgs),
    /// Leave-one-out model selection over a bundle directory.
    Select(SelectArgs),
    /// Hyperparameter or sampling-size sweep of the DCD method.
    Sweep(SweepArgs),
    /// Performance-gap and conductance-gap matrices with proxy reliability.
    Analyze(AnalyzeArgs),
    /// Write a seeded synthetic world (bundles and accuracy table).
    Synth(SynthArgs),
    /// Randomized checks of the tail-mass and decomposition bounds.
    VerifyTheory(TheoryArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Directory of bundle JSON files.
    #[arg(long)]
    bundles: PathBuf,
    /// Accuracy table CSV.
    #[arg(long)]
    accuracy: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = DEFAULT_ETA)]
    eta: f64,
    #[arg(long, default_value_t = 5.0)]
    gamma: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 25)]
    n_src: usize,
    #[arg(long, default_value_t = 1)]
    n_tgt: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    /// Comma-separated subset of dcd, avgrank, inb, cosine, jsd.
    #[arg(long, value_delimiter = ',', default_value = "dcd,avgrank")]
    methods: Vec<Method>,
    /// Reference accuracy column for inb. Defaults to `imagenet` when the
    /// table has it.
    #[arg(long)]
    inb_column: Option<String>,
}

impl RunArgs {
    fn config(&self, accuracy: &AccuracyTable, bundles: &BundleSet) -> Result<RunConfig> {
        let reference = match &self.inb_column {
            Some(c) => Some(TaskId::new(c.clone())),
            None => {
                let tasks = bundles.tasks();
                accuracy
                    .tasks()
                    .iter()
                    .find(|t| t.as_str() == REFERENCE_COLUMN && !tasks.contains(t))
                    .cloned()
            }
        };
        let cfg = RunConfig {
            eta: self.eta,
            gamma: self.gamma,
            epsilon: self.epsilon,
            k: self.k,
            n_src: self.n_src,
            n_tgt: self.n_tgt,
            seed: self.seed,
            runs: self.runs,
            imagenet_column_id: reference.filter(|_| self.methods.contains(&Method::Inb)),
            methods: self.methods.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,5,10")]
    etas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,5,10")]
    gammas: Vec<f64>,
    /// Sweep source sample sizes instead of (eta, gamma).
    #[arg(long, value_delimiter = ',')]
    n_srcs: Option<Vec<usize>>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = ANALYSIS_ETA)]
    eta: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Precomputed task-distance matrix CSV to compare against.
    #[arg(long)]
    imported: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    models: usize,
    #[arg(long, default_value_t = 6)]
    tasks: usize,
    #[arg(long, default_value_t = 6)]
    d: usize,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 100)]
    samples: usize,
}

#[derive(Args)]
struct ExtractToyArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    models: usize,
    #[arg(long, default_value_t = 3)]
    tasks: usize,
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value_t = 50)]
    steps: usize,
    /// Input width followed by each block's output width.
    #[arg(long, value_delimiter = ',', default_value = "4,8,8,6,4")]
    widths: Vec<usize>,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    /// Also write the summary as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_inputs(data: &DataArgs) -> Result<(BundleSet, AccuracyTable)> {
    let bundles = BundleSet::load_dir(&data.bundles)?;
    if bundles.is_empty() {
        bail!("no bundle files found in {}", data.bundles.display());
    }
    let accuracy = load_accuracy_table(&data.accuracy)?;
    log::info!(
        "loaded {} bundles and {} x {} accuracy table",
        bundles.len(),
        accuracy.models().len(),
        accuracy.tasks().len()
    );
    Ok((bundles, accuracy))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn select(args: &SelectArgs) -> Result<()> {
    let (bundles, accuracy) = load_inputs(&args.data)?;
    let cfg = args.run.config(&accuracy, &bundles)?;
    let report = leave_one_out(&bundles, &accuracy, &cfg)?;
    create_dir(&args.data.out)?;
    write_report_dir(&report, &args.data.out)?;
    print!("{}", render_text(&report));
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let (bundles, accuracy) = load_inputs(&args.data)?;
    let cfg = args.run.config(&accuracy, &bundles)?;
    let cells = match &args.n_srcs {
        Some(sizes) => sweep_n_src(&bundles, &accuracy, &cfg, sizes)?,
        None => sweep_eta_gamma(&bundles, &accuracy, &cfg, &args.etas, &args.gammas)?,
    };
    create_dir(&args.data.out)?;
    let path = args.data.out.join("sweep.csv");
    let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_sweep_csv(&cells, file)?;
    for c in &cells {
        println!(
            "eta={:<6} gamma={:<6} n_src={:<4} ndcg={:.4} tau={:.4}",
            c.eta, c.gamma, c.n_src, c.summary.ndcg.mean, c.summary.tau.mean
        );
    }
    Ok(())
}

fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let (bundles, accuracy) = load_inputs(&args.data)?;
    let imported = args
        .imported
        .as_ref()
        .map(|p| -> Result<GapMatrix> {
            let file = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Ok(GapMatrix::read_csv(file, GapKind::Imported)?)
        })
        .transpose()?;
    let study = gap_study(&bundles, &accuracy, args.eta, args.epsilon, imported.as_ref())?;
    create_dir(&args.data.out)?;
    write_gap_study(&study, &args.data.out)?;
    for m in &study.models {
        match m.imported_reliability {
            Some(r) => println!("{}\tconductance={:.4}\timported={:.4}", m.model, m.reliability, r),
            None => println!("{}\tconductance={:.4}", m.model, m.reliability),
        }
    }
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<()> {
    let world = generate(&SynthConfig {
        seed: args.seed,
        n_models: args.models,
        n_tasks: args.tasks,
        d: args.d,
        noise: args.noise,
        samples_per_bundle: args.samples,
        ..SynthConfig::default()
    })?;
    create_dir(&args.out)?;
    let bundle_dir = args.out.join("bundles");
    create_dir(&bundle_dir)?;
    world.bundles.save_dir(&bundle_dir)?;
    save_accuracy_table(&world.accuracy, args.out.join("accuracy.csv"))?;
    fs::write(args.out.join("world.json"), serde_json::to_string_pretty(&world.config)? + "\n")?;
    println!(
        "wrote {} bundles for {} models x {} tasks to {}",
        world.bundles.len(),
        world.models.len(),
        world.tasks.len(),
        args.out.display()
    );
    Ok(())
}

fn extract(args: &ExtractToyArgs) -> Result<()> {
    let out = extract_toy(&ToyExtraction {
        seed: args.seed,
        n_models: args.models,
        n_tasks: args.tasks,
        samples: args.samples,
        widths: args.widths.clone(),
        steps: args.steps,
    })?;
    let bundle_dir = args.out.join("bundles");
    let net_dir = args.out.join("networks");
    create_dir(&bundle_dir)?;
    create_dir(&net_dir)?;
    out.bundles.save_dir(&bundle_dir)?;
    for (id, net) in &out.networks {
        save_network(net, net_dir.join(format!("{id}.json")))?;
    }
    println!("wrote {} bundles to {}", out.bundles.len(), bundle_dir.display());
    Ok(())
}

fn verify_theory(args: &TheoryArgs) -> Result<bool> {
    let s = run_theory_suite(args.seed, args.instances)?;
    println!("instances:                {}", s.instances);
    println!("tail bound checked:       {}", s.lemma_checked);
    println!("tail bound skipped (tie): {}", s.lemma_skipped);
    println!("tail bound violations:    {}", s.lemma_violations);
    println!("decomposition violations: {}", s.decomposition_violations);
    println!("max decomposition error:  {:e}", s.max_decomposition_error);
    println!(
        "asymmetry at eta={}: forward {:.4}, backward {:.4}",
        s.asymmetry.eta, s.asymmetry.forward, s.asymmetry.backward
    );
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        fs::write(dir.join("theory.json"), serde_json::to_string_pretty(&s)? + "\n")?;
    }
    let ok = s.passed();
    println!("{}", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

/// Error chain on one line, skipping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::ExtractToy(a) => extract(a)?,
        Command::Select(a) => select(a)?,
        Command::Sweep(a) => sweep(a)?,
        Command::Analyze(a) => analyze(a)?,
        Command::Synth(a) => synth(a)?,
        Command::VerifyTheory(a) => return verify_theory(a),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}
