use std::collections::HashMap;

use chainmatch::asr::{AsrConfig, AsrModel};
use chainmatch::augment::WeakAugmentKind;
use chainmatch::checkpoint::{load_asr, load_tts, round_to_storage, save_asr, save_tts};
use chainmatch::corpus::{generate_corpus, CorpusSpec};
use chainmatch::harness::*;
use chainmatch::kv::KvMap;
use chainmatch::trainer::{Block, TranscriptMode};
use chainmatch::tts::{TtsConfig, TtsModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Memoized recursion over suffixes: a formulation independent of the
/// iterative two-row table.
fn oracle_distance(a: &[char], b: &[char], memo: &mut HashMap<(usize, usize), usize>) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    if let Some(&d) = memo.get(&(a.len(), b.len())) {
        return d;
    }
    let d = if a[0] == b[0] {
        oracle_distance(&a[1..], &b[1..], memo)
    } else {
        1 + oracle_distance(&a[1..], b, memo)
            .min(oracle_distance(a, &b[1..], memo))
            .min(oracle_distance(&a[1..], &b[1..], memo))
    };
    memo.insert((a.len(), b.len()), d);
    d
}

#[test]
fn cer_matches_recursive_oracle_on_1000_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let alphabet: Vec<char> = "ab c'".chars().collect();
    for _ in 0..1000 {
        let la = rng.gen_range(0..12);
        let lb = rng.gen_range(1..12);
        let a: Vec<char> = (0..la).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
        let b: Vec<char> = (0..lb).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
        let (sa, sb): (String, String) = (a.iter().collect(), b.iter().collect());
        let d = oracle_distance(&a, &b, &mut HashMap::new());
        assert_eq!(edit_distance(&sa, &sb), d);
        assert_eq!(cer(&sa, &sb).unwrap(), d as f64 / lb as f64);
    }
}

fn tiny_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.corpus = CorpusSpec {
        labeled: 20,
        unlabeled: 20,
        dev: 8,
        test: 8,
        feature_dim: 6,
        ..CorpusSpec::default()
    };
    cfg.asr = AsrConfig {
        feature_dim: 6,
        encoder_hidden: 4,
        decoder_hidden: 6,
        embedding: 4,
        attention: 4,
        ..AsrConfig::default()
    };
    cfg.tts = TtsConfig {
        feature_dim: 6,
        speaker_dim: 16,
        embedding: 4,
        encoder_hidden: 4,
        decoder_hidden: 6,
        attention: 4,
        ..TtsConfig::default()
    };
    cfg.base_train.batch_size = 10;
    cfg.base_train.schedule.max_epochs = 2;
    cfg.tts_train.batch_size = 10;
    cfg.tts_train.schedule.max_epochs = 1;
    cfg.consistency.train.batch_size = 10;
    cfg.consistency.train.schedule.max_epochs = 1;
    cfg.strong.max_freq_width = 5;
    cfg.strong.max_time_width = 4;
    cfg.seeds = vec![0, 1, 2];
    cfg.blocks = vec![Block::ALL[0], Block::ALL[3]];
    cfg.taus = vec![0.5, 0.9];
    cfg
}

#[test]
fn corpus_cer_is_length_weighted_mean() {
    let cfg = tiny_config();
    let corpus = generate_corpus(&cfg.corpus, 3).unwrap();
    let model = AsrModel::new(cfg.asr.clone(), 0).unwrap();
    let ev = evaluate_detailed(&model, &corpus.test).unwrap();
    let total: usize = ev.utterances.iter().map(|u| u.ref_len).sum();
    let weighted: f64 = ev
        .utterances
        .iter()
        .map(|u| cer(&u.hypothesis, &u.reference).unwrap() * u.ref_len as f64 / total as f64)
        .sum();
    assert!((ev.cer() - weighted).abs() < 1e-12);
    assert_eq!(evaluate(&model, &corpus.test).unwrap(), ev.cer());
    assert!(evaluate(&model, &corpus.unlabeled).is_err());
}

fn sample_table(rng: &mut ChaCha8Rng, missing: bool) -> ResultsTable {
    let seeds = [3u64, 7, 11];
    let mut t = ResultsTable::default();
    for &seed in &seeds {
        t.baseline.push(BaselineResult {
            seed,
            cer: Some(rng.gen_range(0.0..0.5)),
        });
    }
    for block in Block::ALL {
        for kind in WeakAugmentKind::ALL {
            for tau in [0.5, 0.7, 0.9] {
                for &seed in &seeds {
                    let cer = if missing && rng.gen_bool(0.1) { None } else { Some(rng.gen_range(0.0..0.5)) };
                    t.cells.push(CellResult {
                        block,
                        weak_kind: kind,
                        tau,
                        seed,
                        cer,
                    });
                }
            }
        }
    }
    t
}

#[test]
fn report_round_trips_and_marks_one_best_per_block() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..20 {
        let table = sample_table(&mut rng, trial % 2 == 1);
        let csv = table.to_csv();
        assert_eq!(csv.lines().count(), 1 + 4 * 2 * 3 * 3 + 3);
        let parsed = ResultsTable::from_csv(&csv).unwrap();
        assert_eq!(parsed, table);
        assert_eq!(parsed.to_csv(), csv);

        let md = table.to_markdown();
        for block in Block::ALL {
            let marks: usize = md
                .lines()
                .filter(|l| l.starts_with(&format!("| {} |", block.name())))
                .map(count_best_markers)
                .sum();
            assert_eq!(marks, 1, "{md}");
            let (kind, tau) = table.best_in_block(block).unwrap();
            let best = table.cell_median(block, kind, tau).unwrap();
            for k in WeakAugmentKind::ALL {
                for t in [0.5, 0.7, 0.9] {
                    if let Some(m) = table.cell_median(block, k, t) {
                        assert!(best <= m);
                    }
                }
            }
        }
        let base_row = md.lines().find(|l| l.starts_with("| supervised baseline")).unwrap();
        let cells: Vec<&str> = base_row.split('|').map(str::trim).filter(|s| !s.is_empty()).skip(2).collect();
        assert_eq!(cells.len(), 3);
        assert!(cells.iter().all(|c| *c == cells[0]));
    }
    let dir = tempfile::tempdir().unwrap();
    let table = sample_table(&mut rng, true);
    let (csv, md) = emit_report(&table, dir.path()).unwrap();
    assert_eq!(read_results(&csv).unwrap(), table);
    assert!(std::fs::read_to_string(md).unwrap().contains("<u>"));
    assert!(ResultsTable::from_csv("wrong header\n").is_err());
}

#[test]
fn medians_skip_missing_seeds() {
    let mut t = ResultsTable::default();
    for (seed, cer) in [(0, Some(0.3)), (1, None), (2, Some(0.1))] {
        t.cells.push(CellResult {
            block: Block::ALL[1],
            weak_kind: WeakAugmentKind::SpeechChain,
            tau: 0.7,
            seed,
            cer,
        });
    }
    assert!((t.cell_median(Block::ALL[1], WeakAugmentKind::SpeechChain, 0.7).unwrap() - 0.2).abs() < 1e-15);
    assert_eq!(t.cell_median(Block::ALL[0], WeakAugmentKind::SpeechChain, 0.7), None);
}

#[test]
fn config_round_trips_and_rejects_bad_input() {
    let cfg = tiny_config();
    let text = cfg.to_kv().render();
    let back = ExperimentConfig::from_kv(&KvMap::parse(&text).unwrap()).unwrap();
    assert_eq!(back, cfg);

    let cfg = ExperimentConfig::from_kv(
        &KvMap::parse("# desk run\nscenario.tau = 0.9\nscenario.block = static/weak_perturbed\nmatrix.taus = 0.5, 0.6\n")
            .unwrap(),
    )
    .unwrap();
    assert_eq!(cfg.scenario.tau, 0.9);
    assert_eq!(cfg.scenario.mode, TranscriptMode::Static);
    assert_eq!(cfg.taus, vec![0.5, 0.6]);
    assert_eq!(cfg.strong.max_freq_width, 19);
    for bad in [
        "scenario.tau = 1.5\n",
        "matrix.taus = 0.5, 2\n",
        "scenaro.tau = 0.5\n",
        "scenario.block = static\n",
        "matrix.weak_kinds = noise\n",
        "asr.encoder_layers = 1\n",
        "corpus.feature_dim = 8\nasr.feature_dim = 6\n",
    ] {
        assert!(ExperimentConfig::from_kv(&KvMap::parse(bad).unwrap()).is_err(), "{bad}");
    }
}

#[test]
fn checkpoints_round_trip_at_storage_precision() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config();
    let mut asr = AsrModel::new(cfg.asr.clone(), 4).unwrap();
    round_to_storage(&mut asr);
    save_asr(&dir.path().join("a.ckpt"), &asr).unwrap();
    assert_eq!(load_asr(&dir.path().join("a.ckpt")).unwrap(), asr);
    let mut tts = TtsModel::new(cfg.tts.clone(), 5).unwrap();
    round_to_storage(&mut tts);
    save_tts(&dir.path().join("t.ckpt"), &tts).unwrap();
    assert_eq!(load_tts(&dir.path().join("t.ckpt")).unwrap(), tts);
    assert!(load_asr(&dir.path().join("t.ckpt")).is_err());

    let bytes = std::fs::read(dir.path().join("a.ckpt")).unwrap();
    std::fs::write(dir.path().join("short.ckpt"), &bytes[..bytes.len() - 3]).unwrap();
    assert!(load_asr(&dir.path().join("short.ckpt")).is_err());
    std::fs::write(dir.path().join("junk.ckpt"), b"hello").unwrap();
    assert!(load_asr(&dir.path().join("junk.ckpt")).is_err());
}

#[test]
fn matrix_shape_and_determinism() {
    let cfg = tiny_config();
    let corpus = generate_corpus(&cfg.corpus, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = run_matrix(&cfg, &corpus, &dir.path().join("a")).unwrap();
    let b = run_matrix(&cfg, &corpus, &dir.path().join("b")).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.baseline.len(), 3);
    assert_eq!(a.cells.len(), 2 * 2 * 2 * 3);
    assert_eq!(a.blocks(), cfg.blocks);
    assert_eq!(a.weak_kinds(), WeakAugmentKind::ALL.to_vec());
    assert!(a.cells.iter().all(|c| c.cer.is_some()));
    assert!(dir.path().join("a/seed-0/cache/COMPLETE").exists());
    assert!(dir.path().join("a/seed-0/base.ckpt").exists());
}

#[test]
fn failed_cells_are_recorded_missing() {
    let mut cfg = tiny_config();
    cfg.seeds = vec![0];
    cfg.blocks = vec![Block::ALL[0]];
    cfg.taus = vec![0.5];
    let corpus = generate_corpus(&cfg.corpus, 6).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cells = vec![CellSpec {
        block: Block::ALL[0],
        weak_kind: WeakAugmentKind::WeakSpecAugment,
        tau: 1.5,
    }];
    let t = run_cells(&cfg, &corpus, &cells, dir.path()).unwrap();
    assert!(t.baseline[0].cer.is_some());
    assert_eq!(t.cells.len(), 1);
    assert!(t.cells[0].cer.is_none());
}
