use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use chainmatch::augment::{AugmentContext, ReconstructionCache, WeakAugmentKind};
use chainmatch::checkpoint::{load_asr, load_tts, save_asr, save_tts};
use chainmatch::corpus::{generate_corpus, read_corpus, write_corpus, CorpusSplit};
use chainmatch::harness::{
    emit_report, evaluate, read_results, run_matrix, seed_dir, ExperimentConfig, RESULTS_CSV,
};
use chainmatch::trainer::{train_base, train_consistency, MetricLog};
use chainmatch::tts::train_tts;

#[derive(Parser)]
#[command(name = "chainmatch", version, about = "Consistency training for sequence-to-sequence ASR on a synthetic corpus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Key-value config file; absent keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus seed for gen-data and run-matrix, training seed otherwise.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus under <output.dir>/corpus.
    GenData(Common),
    /// Train the supervised base model.
    TrainBase(Common),
    /// Train the TTS model on labeled data plus pseudo-transcribed unlabeled data.
    TrainTts(Common),
    /// Precompute speech-chain reconstructions of the unlabeled split.
    BuildCache(Common),
    /// Consistency-train the scenario given by the scenario.* keys.
    TrainConsistency(Common),
    /// Report the test CER of a checkpoint (the base model by default).
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run the whole scenario matrix and write the report.
    RunMatrix(Common),
    /// Re-render results.md from results.csv.
    Report(Common),
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    match &common.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn corpus_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join("corpus")
}

fn load_corpus(cfg: &ExperimentConfig) -> Result<CorpusSplit> {
    let dir = corpus_dir(cfg);
    read_corpus(&dir).with_context(|| format!("reading corpus from {} (run gen-data first)", dir.display()))
}

fn training_seed(cfg: &ExperimentConfig, common: &Common) -> u64 {
    common.seed.unwrap_or(cfg.seeds[0])
}

fn scenario_tag(cfg: &ExperimentConfig) -> String {
    let s = &cfg.scenario;
    format!("{}-{}-{}", s.block().name().replace('/', "-"), s.weak_kind.as_str(), s.tau)
}

fn open_cache(dir: &Path) -> Result<ReconstructionCache> {
    ReconstructionCache::open(&dir.join("cache")).with_context(|| "opening reconstruction cache (run build-cache first)")
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::GenData(c) => {
            let mut cfg = load_config(&c)?;
            if let Some(s) = c.seed {
                cfg.corpus_seed = s;
            }
            let corpus = generate_corpus(&cfg.corpus, cfg.corpus_seed)?;
            write_corpus(&corpus_dir(&cfg), &corpus)?;
            println!("wrote corpus to {}", corpus_dir(&cfg).display());
        }
        Command::TrainBase(c) => {
            let cfg = load_config(&c)?;
            let seed = training_seed(&cfg, &c);
            let corpus = load_corpus(&cfg)?;
            let dir = seed_dir(&cfg.output_dir, seed);
            std::fs::create_dir_all(&dir)?;
            let mut log = MetricLog::to_file(dir.join("base.log"));
            let model = train_base(&corpus.labeled, &corpus.dev, &cfg.asr, &cfg.base_train, seed, &mut log)?;
            save_asr(&dir.join("base.ckpt"), &model)?;
            println!("saved {}", dir.join("base.ckpt").display());
        }
        Command::TrainTts(c) => {
            let cfg = load_config(&c)?;
            let seed = training_seed(&cfg, &c);
            let corpus = load_corpus(&cfg)?;
            let dir = seed_dir(&cfg.output_dir, seed);
            let base = load_asr(&dir.join("base.ckpt")).context("loading base checkpoint (run train-base first)")?;
            let mut log = MetricLog::to_file(dir.join("tts.log"));
            let trained = train_tts(
                &corpus.labeled,
                &corpus.unlabeled,
                &corpus.dev,
                &base,
                &cfg.tts,
                &cfg.tts_train,
                seed,
                &mut log,
            )?;
            save_tts(&dir.join("tts.ckpt"), &trained.model)?;
            println!("saved {}", dir.join("tts.ckpt").display());
        }
        Command::BuildCache(c) => {
            let cfg = load_config(&c)?;
            let seed = training_seed(&cfg, &c);
            let corpus = load_corpus(&cfg)?;
            let dir = seed_dir(&cfg.output_dir, seed);
            let base = load_asr(&dir.join("base.ckpt")).context("loading base checkpoint")?;
            let tts = load_tts(&dir.join("tts.ckpt")).context("loading TTS checkpoint (run train-tts first)")?;
            let cache = ReconstructionCache::build(&dir.join("cache"), &corpus.unlabeled, &base, &tts)?;
            println!("cached {} reconstructions in {}", cache.len(), cache.dir().display());
        }
        Command::TrainConsistency(c) => {
            let cfg = load_config(&c)?;
            let seed = training_seed(&cfg, &c);
            let corpus = load_corpus(&cfg)?;
            let dir = seed_dir(&cfg.output_dir, seed);
            let base = load_asr(&dir.join("base.ckpt")).context("loading base checkpoint")?;
            let cache = match cfg.scenario.weak_kind {
                WeakAugmentKind::SpeechChain => Some(open_cache(&dir)?),
                WeakAugmentKind::WeakSpecAugment => None,
            };
            let ctx = AugmentContext {
                weak: cfg.weak,
                strong: cfg.strong,
                cache: cache.as_ref(),
            };
            let tag = scenario_tag(&cfg);
            let mut log = MetricLog::to_file(dir.join(format!("consistency-{tag}.log")));
            let model = train_consistency(
                &cfg.scenario,
                &corpus.labeled,
                &corpus.unlabeled,
                &corpus.dev,
                &base,
                &ctx,
                &cfg.consistency,
                seed,
                &mut log,
            )?;
            let path = dir.join(format!("consistency-{tag}.ckpt"));
            save_asr(&path, &model)?;
            println!("saved {}", path.display());
        }
        Command::Evaluate { common, checkpoint } => {
            let cfg = load_config(&common)?;
            let seed = training_seed(&cfg, &common);
            let corpus = load_corpus(&cfg)?;
            let path = checkpoint.unwrap_or_else(|| seed_dir(&cfg.output_dir, seed).join("base.ckpt"));
            let model = load_asr(&path).with_context(|| format!("loading {}", path.display()))?;
            let cer = evaluate(&model, &corpus.test)?;
            println!("test CER {:.4} ({})", cer, path.display());
        }
        Command::RunMatrix(c) => {
            let mut cfg = load_config(&c)?;
            if let Some(s) = c.seed {
                cfg.corpus_seed = s;
            }
            let corpus = match read_corpus(&corpus_dir(&cfg)) {
                Ok(corpus) => corpus,
                Err(_) => {
                    let corpus = generate_corpus(&cfg.corpus, cfg.corpus_seed)?;
                    write_corpus(&corpus_dir(&cfg), &corpus)?;
                    corpus
                }
            };
            let table = run_matrix(&cfg, &corpus, &cfg.output_dir)?;
            let (csv, md) = emit_report(&table, &cfg.output_dir)?;
            println!("wrote {} and {}", csv.display(), md.display());
            print!("{}", table.to_markdown());
        }
        Command::Report(c) => {
            let cfg = load_config(&c)?;
            let csv = cfg.output_dir.join(RESULTS_CSV);
            if !csv.exists() {
                bail!("{} not found (run run-matrix first)", csv.display());
            }
            let table = read_results(&csv)?;
            let (_, md) = emit_report(&table, &cfg.output_dir)?;
            println!("wrote {}", md.display());
            print!("{}", table.to_markdown());
        }
    }
    Ok(())
}
