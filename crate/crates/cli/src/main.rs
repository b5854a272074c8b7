//! `d2lv` command line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "d2lv", version, about = "Image copy detection with local verification")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, env = "D2LV_JOBS")]
    jobs: Option<usize>,
    /// Pipeline config file (TOML). Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an augmented training corpus.
    #[command(after_help = "Config keys: seed, augment.* (all augmentation ranges and probabilities).")]
    Corpus(CorpusArgs),
    /// Print the patch boxes of one image as CSV.
    #[command(after_help = "Config keys: patches.query, patches.reference, patches.exact_ratio, \
patches.third_ratio, patches.proposals.*, tricks.min_patch_side.")]
    Patches(PatchesArgs),
    /// Describe every patch of a directory of images into a feature store.
    #[command(after_help = "Config keys: features.models, features.scales, features.pca, patches.*, \
tricks.min_patch_side.")]
    Extract(ExtractArgs),
    /// Fit PCA on the vectors of a feature store.
    #[command(name = "pca-fit", after_help = "Config keys: features.pca_dim, features.whiten.")]
    PcaFit(PcaFitArgs),
    /// Project a feature store through a PCA model.
    #[command(name = "pca-apply", after_help = "Config keys: features.pca.")]
    PcaApply(PcaApplyArgs),
    /// Score and rank (query, reference) pairs.
    #[command(after_help = "Config keys: matching.top_t, matching.modes.global_local, \
matching.modes.local_global, tricks.partial_penalty, tricks.top2_average, ensemble.")]
    Match(MatchArgs),
    /// Micro average precision and recall at a precision target.
    #[command(after_help = "Config keys: none.")]
    Eval(EvalArgs),
    /// Print the learning-rate ratio for every epoch as CSV.
    #[command(after_help = "Config keys: none.")]
    Schedule(ScheduleArgs),
    /// Generate the synthetic overlay/crop benchmark.
    #[command(name = "synth-bench", after_help = "Config keys: seed (when --seed is absent).")]
    SynthBench(SynthArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// Directory of source images (.ppm/.pnm/.pgm).
    #[arg(long)]
    sources: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Augmentation set name, e.g. basic, basic+super-blur, basic-bw.
    #[arg(long, default_value = "basic")]
    set: String,
    /// Face crops for super-face.
    #[arg(long)]
    faces: Option<PathBuf>,
    /// Images for underlay, image overlay and super-opaque.
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "side")]
struct PatchesArgs {
    /// Reference image.
    #[arg(long = "ref", group = "side")]
    reference: Option<PathBuf>,
    /// Query image.
    #[arg(long, group = "side")]
    query: Option<PathBuf>,
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Role {
    Query,
    Reference,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    images: PathBuf,
    #[arg(long, value_enum)]
    role: Role,
    #[arg(long)]
    out: PathBuf,
    /// PCA model; overrides features.pca.
    #[arg(long)]
    pca: Option<PathBuf>,
    /// Comma-separated scales; overrides features.scales.
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<u32>>,
}

#[derive(Args)]
struct PcaFitArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    whiten: bool,
}

#[derive(Args)]
struct PcaApplyArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    pca: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Global-global, global-local and local-global.
    Full,
    Global,
    GlobalLocal,
    LocalGlobal,
}

#[derive(Args)]
struct MatchArgs {
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    references: PathBuf,
    /// Pairs CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Ensemble spec file with [[ensemble]] tables; overrides the config.
    #[arg(long)]
    specs: Option<PathBuf>,
    /// References kept per query patch; 0 keeps all.
    #[arg(long)]
    top_t: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    top2: bool,
    #[arg(long)]
    penalty: Option<f64>,
    /// File of reference ids (one per line) that skip local-global matching.
    #[arg(long)]
    face_skip: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Total number of true pairs when it exceeds the ground-truth rows.
    #[arg(long)]
    total_positives: Option<usize>,
    #[arg(long, default_value_t = 0.9)]
    precision: f64,
    /// Write the precision-recall curve as CSV.
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long, default_value_t = 5.0)]
    warmup_end: f64,
    #[arg(long, default_value_t = 10.0)]
    hold_end: f64,
    #[arg(long, default_value_t = 25)]
    epochs: u32,
    #[arg(long, default_value_t = 0.01)]
    floor: f64,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    refs: usize,
    #[arg(long, default_value_t = 50)]
    overlay: usize,
    #[arg(long, default_value_t = 50)]
    crop: usize,
    #[arg(long, default_value_t = 100)]
    distractors: usize,
    #[arg(long)]
    seed: Option<u64>,
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: kind=usage message={}", one_line(first));
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: kind=usage message=--jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: kind=runtime message={}", one_line(&e.to_string()));
            return ExitCode::from(1);
        }
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = match &e {
                d2lv::Error::Config(_) | d2lv::Error::Invalid(_) => 2,
                d2lv::Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
                _ => 1,
            };
            eprintln!("error: kind={} message={}", e.kind(), one_line(&e.to_string()));
            ExitCode::from(code)
        }
    }
}
