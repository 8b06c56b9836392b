use chainmatch::asr::*;
use chainmatch::corpus::{FeatureSequence, TokenSequence, SOS_EOS, VOCAB_SIZE};
use chainmatch::nn::gradcheck::{check, sample_coordinates};
use chainmatch::nn::Parameterized;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_config() -> AsrConfig {
    AsrConfig {
        feature_dim: 5,
        encoder_layers: 2,
        encoder_hidden: 4,
        decoder_hidden: 6,
        embedding: 3,
        attention: 4,
        ..AsrConfig::default()
    }
}

fn random_features(rng: &mut ChaCha8Rng, frames: usize, dim: usize) -> FeatureSequence {
    let rows: Vec<Vec<f64>> = (0..frames)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect())
        .collect();
    FeatureSequence::from_rows(&rows).unwrap()
}

fn random_targets(rng: &mut ChaCha8Rng, len: usize) -> TokenSequence {
    let mut ids: Vec<usize> = (0..len).map(|_| rng.gen_range(1..VOCAB_SIZE)).collect();
    ids.push(SOS_EOS);
    TokenSequence(ids)
}

/// Larger-than-default weights so that gradients are not vanishingly small.
fn spiky_model(seed: u64) -> AsrModel {
    AsrModel::new(
        AsrConfig {
            init_range: 0.5,
            ..tiny_config()
        },
        seed,
    )
    .unwrap()
}

fn zero_output(model: &mut AsrModel) {
    model.output.weight.value.iter_mut().for_each(|v| *v = 0.0);
    model.output.bias.value.iter_mut().for_each(|v| *v = 0.0);
}

#[test]
fn encoder_length_law() {
    let model = AsrModel::new(tiny_config(), 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (s, expect) in [(16, 4), (1, 1), (17, 5), (2, 1), (3, 1), (5, 2)] {
        let x = random_features(&mut rng, s, 5);
        assert_eq!(encode(&model, &x).len(), expect, "S={s}");
    }
    for s in 1..60 {
        let expect = ((s as f64 / 2.0).ceil() / 2.0).ceil() as usize;
        assert_eq!(subsampled_len(s), expect);
    }
}

#[test]
fn three_layer_encoder_still_divides_by_four() {
    let model = AsrModel::new(
        AsrConfig {
            encoder_layers: 3,
            ..tiny_config()
        },
        0,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(encode(&model, &random_features(&mut rng, 17, 5)).len(), 5);
    assert!(AsrModel::new(
        AsrConfig {
            encoder_layers: 1,
            ..tiny_config()
        },
        0
    )
    .is_err());
}

#[test]
fn decode_step_is_a_distribution() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for seed in 0..20 {
        let model = spiky_model(seed);
        let x = { let n = rng.gen_range(1..20); random_features(&mut rng, n, 5) };
        let enc = encode(&model, &x);
        let mut prefix = vec![SOS_EOS];
        prefix.extend((0..rng.gen_range(0..4)).map(|_| rng.gen_range(0..VOCAB_SIZE)));
        let p = decode_step(&model, &enc, &TokenSequence(prefix.clone())).unwrap();
        assert_eq!(p.len(), VOCAB_SIZE);
        assert!(p.iter().all(|&v| v >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert_eq!(p, decode_step(&model, &enc, &TokenSequence(prefix)).unwrap());
    }
}

#[test]
fn attention_weights_are_normalized() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let model = spiky_model(4);
    for _ in 0..20 {
        let x = { let n = rng.gen_range(1..30); random_features(&mut rng, n, 5) };
        let mem = model.memory(&encode(&model, &x));
        let mut state = model.initial_state();
        for tok in [SOS_EOS, 5, 9] {
            let w = model.attention_weights(&mem, &state, tok);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            state = model.step(&mem, &state, tok).0;
        }
    }
}

#[test]
fn decode_step_rejects_bad_prefixes() {
    let model = spiky_model(0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let enc = encode(&model, &random_features(&mut rng, 4, 5));
    assert!(decode_step(&model, &enc, &TokenSequence(vec![])).is_err());
    assert!(decode_step(&model, &enc, &TokenSequence(vec![3])).is_err());
}

#[test]
fn zero_output_projection_is_uniform() {
    let mut model = spiky_model(5);
    zero_output(&mut model);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_features(&mut rng, 9, 5);
    let p = decode_step(&model, &encode(&model, &x), &TokenSequence(vec![SOS_EOS, 4])).unwrap();
    assert!(p.iter().all(|&v| (v - 1.0 / 29.0).abs() < 1e-12));

    let y = TokenSequence(vec![7, SOS_EOS]);
    let lp = sequence_log_prob(&model, &x, &y).unwrap();
    assert!((lp - 2.0 * (1.0f64 / 29.0).ln()).abs() < 1e-9);
    assert!((lp + 6.7346).abs() < 1e-4);

    let loss = supervised_loss(&mut model, &[(&x, &y)]).unwrap();
    assert!((loss - 29f64.ln()).abs() < 1e-6);

    let g = greedy_decode(&model, &x, 10);
    assert_eq!(g.ids.0, vec![SOS_EOS]);
}

#[test]
fn supervised_loss_matches_sequence_log_prob() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for seed in 0..10 {
        let mut model = spiky_model(seed);
        let x = { let n = rng.gen_range(1..25); random_features(&mut rng, n, 5) };
        let y = { let n = rng.gen_range(0..6); random_targets(&mut rng, n) };
        let lp = sequence_log_prob(&model, &x, &y).unwrap();
        assert!(lp.exp() > 0.0 && lp.exp() <= 1.0);
        let loss = supervised_loss(&mut model, &[(&x, &y)]).unwrap();
        assert!((loss + lp / y.len() as f64).abs() < 1e-9);

        // Stepwise oracle: one decode_step call per position.
        let enc = encode(&model, &x);
        let mut oracle = 0.0;
        for t in 0..y.len() {
            let mut prefix = vec![SOS_EOS];
            prefix.extend_from_slice(&y.ids()[..t]);
            oracle += decode_step(&model, &enc, &TokenSequence(prefix)).unwrap()[y.ids()[t]].ln();
        }
        assert!((oracle - lp).abs() < 1e-9);
    }
}

#[test]
fn supervised_loss_input_errors() {
    let mut model = spiky_model(0);
    assert!(matches!(supervised_loss(&mut model, &[]), Err(chainmatch::Error::EmptyBatch)));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = random_features(&mut rng, 4, 5);
    assert!(supervised_loss(&mut model, &[(&x, &TokenSequence(vec![3, 4]))]).is_err());
}

#[test]
fn supervised_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut model = spiky_model(8);
    let xs: Vec<FeatureSequence> = (0..2).map(|_| { let n = rng.gen_range(5..13); random_features(&mut rng, n, 5) }).collect();
    let ys: Vec<TokenSequence> = (0..2).map(|_| { let n = rng.gen_range(2..5); random_targets(&mut rng, n) }).collect();
    let batch: Vec<(&FeatureSequence, &TokenSequence)> = xs.iter().zip(&ys).collect();
    supervised_loss(&mut model, &batch).unwrap();
    let analytic = model.flat_grad();
    let coords = sample_coordinates(&model, 150, &mut rng);
    let report = check(&mut model, &analytic, &coords, 1e-4, |m| {
        let mut m = m.clone();
        supervised_loss(&mut m, &batch).unwrap()
    });
    assert_eq!(report.groups_covered, model.param_groups().len());
    assert!(report.max_rel_error <= 1e-3, "{report:?}");
}
