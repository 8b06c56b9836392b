use chainmatch::corpus::{extract_speaker_embedding, generate_corpus, CorpusSpec, Utterance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn same_speaker_pairs_are_more_similar_on_average() {
    let spec = CorpusSpec {
        labeled: 400,
        unlabeled: 0,
        dev: 1,
        test: 1,
        noise_std: 0.0,
        ..CorpusSpec::default()
    };
    let corpus = generate_corpus(&spec, 11).unwrap();
    let by_speaker: Vec<Vec<&Utterance>> = (0..spec.speakers)
        .map(|s| corpus.labeled.iter().filter(|u| u.speaker == s).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pick = |list: &[&Utterance], rng: &mut ChaCha8Rng| extract_speaker_embedding(&list[rng.gen_range(0..list.len())].features);
    let (mut same, mut diff) = (0.0, 0.0);
    for _ in 0..100 {
        let s = rng.gen_range(0..spec.speakers);
        let t = (s + rng.gen_range(1..spec.speakers)) % spec.speakers;
        let a = pick(&by_speaker[s], &mut rng);
        same += a.cosine(&pick(&by_speaker[s], &mut rng));
        diff += a.cosine(&pick(&by_speaker[t], &mut rng));
    }
    assert!(same > diff, "same {same} vs different {diff}");
}
