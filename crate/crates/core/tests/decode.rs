use chainmatch::asr::*;
use chainmatch::corpus::{FeatureSequence, TokenSequence, SOS_EOS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Tokens allowed in the restricted exhaustive instances.
const EFFECTIVE: usize = 4;

fn config() -> AsrConfig {
    AsrConfig {
        feature_dim: 5,
        encoder_hidden: 4,
        decoder_hidden: 6,
        embedding: 3,
        attention: 4,
        init_range: 0.8,
        ..AsrConfig::default()
    }
}

fn random_features(rng: &mut ChaCha8Rng, frames: usize) -> FeatureSequence {
    let rows: Vec<Vec<f64>> = (0..frames)
        .map(|_| (0..5).map(|_| rng.gen_range(-1.5..1.5)).collect())
        .collect();
    FeatureSequence::from_rows(&rows).unwrap()
}

/// Score of `ids` as a sum of per-step log-probabilities from `decode_step`.
fn score(model: &AsrModel, x: &FeatureSequence, ids: &[usize]) -> f64 {
    let enc = encode(model, x);
    let mut prefix = vec![SOS_EOS];
    let mut total = 0.0;
    for &tok in ids {
        total += decode_step(model, &enc, &TokenSequence(prefix.clone())).unwrap()[tok].ln();
        prefix.push(tok);
    }
    total
}

/// Every complete sequence over the first `EFFECTIVE` tokens: ended by
/// sos/eos, or cut at `max_len`.
fn enumerate(max_len: usize) -> Vec<Vec<usize>> {
    let mut done = Vec::new();
    let mut frontier = vec![Vec::new()];
    for step in 0..max_len {
        let mut next = Vec::new();
        for p in &frontier {
            for tok in 0..EFFECTIVE {
                let mut s: Vec<usize> = p.clone();
                s.push(tok);
                if tok == SOS_EOS || step + 1 == max_len {
                    done.push(s);
                } else {
                    next.push(s);
                }
            }
        }
        frontier = next;
    }
    done
}

#[test]
fn unit_beam_is_greedy() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for seed in 0..100 {
        let model = AsrModel::new(config(), seed).unwrap();
        let n = rng.gen_range(1..30);
        let x = random_features(&mut rng, n);
        let max_len = rng.gen_range(1..12);
        let g = greedy_decode(&model, &x, max_len);
        let b = beam_decode(&model, &x, 1, max_len);
        assert_eq!(g.ids, b.ids);
        assert!((g.log_prob - b.log_prob).abs() < 1e-12);
    }
}

#[test]
fn wide_beam_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let candidates = enumerate(4);
    assert_eq!(candidates.len(), 1 + 3 + 9 + 27 + 81);
    for seed in 0..50 {
        let mut model = AsrModel::new(config(), 1000 + seed).unwrap();
        model.output.bias.value[EFFECTIVE..].iter_mut().for_each(|v| *v = -1e4);
        let n = rng.gen_range(1..20);
        let x = random_features(&mut rng, n);
        let (best, best_lp) = candidates
            .iter()
            .map(|c| (c, score(&model, &x, c)))
            .fold((&candidates[0], f64::NEG_INFINITY), |acc, (c, s)| {
                if s > acc.1 || (s == acc.1 && c < acc.0) {
                    (c, s)
                } else {
                    acc
                }
            });
        // With 3 continuing tokens a beam of 36 never drops a live prefix.
        let hyp = beam_decode(&model, &x, 36, 4);
        assert_eq!(hyp.ids.ids(), best.as_slice(), "seed {seed}");
        assert!((hyp.log_prob - best_lp).abs() < 1e-9);
    }
}

#[test]
fn beam_log_prob_reported_faithfully_and_not_below_greedy() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..40 {
        let model = AsrModel::new(config(), 500 + seed).unwrap();
        let n = rng.gen_range(4..30);
        let x = random_features(&mut rng, n);
        let max_len = model.default_max_len(&x);
        let g = greedy_decode(&model, &x, max_len);
        let b = beam_decode(&model, &x, PSEUDO_BEAM, max_len);
        assert!((b.log_prob - score(&model, &x, b.ids.ids())).abs() < 1e-9);
        assert!(b.log_prob >= g.log_prob - 1e-12);
        assert!(b.ids.len() <= max_len);
    }
}

#[test]
fn pseudo_transcripts_drop_the_end_token() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for seed in 0..20 {
        let model = AsrModel::new(config(), seed).unwrap();
        let x = random_features(&mut rng, 17);
        let full = beam_decode(&model, &x, PSEUDO_BEAM, model.default_max_len(&x));
        let t = transcribe(&model, &x);
        assert!(!t.ids().contains(&SOS_EOS));
        assert_eq!(t.ids(), full.ids.without_eos().ids());
    }
}
