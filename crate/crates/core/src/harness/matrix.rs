use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::metrics::evaluate;
use super::report::{BaselineResult, CellResult, ResultsTable};
use crate::asr::AsrModel;
use crate::augment::{AugmentContext, ReconstructionCache, WeakAugmentKind};
use crate::checkpoint::{save_asr, save_tts};
use crate::corpus::CorpusSplit;
use crate::error::Result;
use crate::trainer::{train_base, train_consistency, Block, MetricLog, Scenario};
use crate::tts::{train_tts, TtsModel};

/// One matrix cell, independent of seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellSpec {
    pub block: Block,
    pub weak_kind: WeakAugmentKind,
    pub tau: f64,
}

/// Per-seed frozen models shared by every cell of that seed.
pub struct SeedArtifacts {
    pub base: AsrModel,
    pub baseline_cer: f64,
    pub tts: Option<TtsModel>,
    pub cache: Option<ReconstructionCache>,
}

pub fn seed_dir(work_dir: &Path, seed: u64) -> PathBuf {
    work_dir.join(format!("seed-{seed}"))
}

fn cell_log_name(cell: &CellSpec) -> String {
    format!(
        "cell-{}-{}-{}.log",
        cell.block.name().replace('/', "-"),
        cell.weak_kind.as_str(),
        cell.tau
    )
}

/// Trains the base model and, when `need_chain`, the TTS model and the
/// reconstruction cache for the unlabeled split. Checkpoints, logs, and the
/// cache go under `work_dir/seed-<seed>/`.
pub fn prepare_seed(
    config: &ExperimentConfig,
    corpus: &CorpusSplit,
    seed: u64,
    work_dir: &Path,
    need_chain: bool,
) -> Result<SeedArtifacts> {
    let dir = seed_dir(work_dir, seed);
    std::fs::create_dir_all(&dir).map_err(|e| crate::Error::io(&dir, e))?;
    let mut log = MetricLog::to_file(dir.join("base.log"));
    let base = train_base(&corpus.labeled, &corpus.dev, &config.asr, &config.base_train, seed, &mut log)?;
    save_asr(&dir.join("base.ckpt"), &base)?;
    let baseline_cer = evaluate(&base, &corpus.test)?;
    log::info!("seed {seed}: baseline test CER {:.4}", baseline_cer);
    let (tts, cache) = if need_chain {
        let mut log = MetricLog::to_file(dir.join("tts.log"));
        let trained = train_tts(
            &corpus.labeled,
            &corpus.unlabeled,
            &corpus.dev,
            &base,
            &config.tts,
            &config.tts_train,
            seed,
            &mut log,
        )?;
        save_tts(&dir.join("tts.ckpt"), &trained.model)?;
        let cache = ReconstructionCache::build(&dir.join("cache"), &corpus.unlabeled, &base, &trained.model)?;
        (Some(trained.model), Some(cache))
    } else {
        (None, None)
    };
    Ok(SeedArtifacts {
        base,
        baseline_cer,
        tts,
        cache,
    })
}

/// Consistency-trains one cell from the seed's base model and returns its
/// test CER.
pub fn run_cell(
    config: &ExperimentConfig,
    corpus: &CorpusSplit,
    artifacts: &SeedArtifacts,
    cell: &CellSpec,
    seed: u64,
    log: &mut MetricLog,
) -> Result<f64> {
    let scenario = Scenario {
        lambda_con: config.scenario.lambda_con,
        ..Scenario::new(cell.block, cell.weak_kind, cell.tau)
    };
    let ctx = AugmentContext {
        weak: config.weak,
        strong: config.strong,
        cache: artifacts.cache.as_ref(),
    };
    let student = train_consistency(
        &scenario,
        &corpus.labeled,
        &corpus.unlabeled,
        &corpus.dev,
        &artifacts.base,
        &ctx,
        &config.consistency,
        seed,
        log,
    )?;
    evaluate(&student, &corpus.test)
}

/// Runs `cells` for every seed in the config. Failures are logged and
/// recorded as missing results.
pub fn run_cells(
    config: &ExperimentConfig,
    corpus: &CorpusSplit,
    cells: &[CellSpec],
    work_dir: &Path,
) -> Result<ResultsTable> {
    let need_chain = cells.iter().any(|c| c.weak_kind == WeakAugmentKind::SpeechChain);
    let mut table = ResultsTable::default();
    let mut grid: Vec<Vec<Option<f64>>> = vec![Vec::new(); cells.len()];
    for &seed in &config.seeds {
        let artifacts = match prepare_seed(config, corpus, seed, work_dir, need_chain) {
            Ok(a) => Some(a),
            Err(e) => {
                log::error!("seed {seed}: preparation failed: {e}");
                None
            }
        };
        table.baseline.push(BaselineResult {
            seed,
            cer: artifacts.as_ref().map(|a| a.baseline_cer),
        });
        for (k, cell) in cells.iter().enumerate() {
            let cer = artifacts.as_ref().and_then(|a| {
                let mut log = MetricLog::to_file(seed_dir(work_dir, seed).join(cell_log_name(cell)));
                match run_cell(config, corpus, a, cell, seed, &mut log) {
                    Ok(c) => {
                        log::info!(
                            "seed {seed}: {} {} tau {} test CER {c:.4}",
                            cell.block.name(),
                            cell.weak_kind.as_str(),
                            cell.tau
                        );
                        Some(c)
                    }
                    Err(e) => {
                        log::error!("seed {seed}: cell {cell:?} failed: {e}");
                        None
                    }
                }
            });
            grid[k].push(cer);
        }
    }
    for (cell, cers) in cells.iter().zip(grid) {
        for (&seed, cer) in config.seeds.iter().zip(cers) {
            table.cells.push(CellResult {
                block: cell.block,
                weak_kind: cell.weak_kind,
                tau: cell.tau,
                seed,
                cer,
            });
        }
    }
    Ok(table)
}

/// Every (block, weak kind, τ) combination of the config, block-major.
pub fn matrix_cells(config: &ExperimentConfig) -> Vec<CellSpec> {
    let mut cells = Vec::new();
    for &block in &config.blocks {
        for &weak_kind in &config.weak_kinds {
            for &tau in &config.taus {
                cells.push(CellSpec { block, weak_kind, tau });
            }
        }
    }
    cells
}

/// The full scenario matrix: baseline once per seed, then every cell.
pub fn run_matrix(config: &ExperimentConfig, corpus: &CorpusSplit, work_dir: &Path) -> Result<ResultsTable> {
    run_cells(config, corpus, &matrix_cells(config), work_dir)
}
