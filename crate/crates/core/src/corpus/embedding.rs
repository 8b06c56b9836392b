//! Deterministic statistics-pooling speaker embedder.
//!
//! Per-bin mean and standard deviation over frames (2F values) are projected
//! by a fixed random Gaussian matrix and normalized to unit length.

use rand_distr::StandardNormal;
use rand::Rng;

use super::features::FeatureSequence;
use super::generate::stream;
use crate::nn::ops::dot;

pub const DEFAULT_EMBEDDING_DIM: usize = 16;
const PROJECTION_SEED: u64 = 0x5eed_f00d;

#[derive(Clone, Debug, PartialEq)]
pub struct SpeakerEmbedding(pub Vec<f64>);

impl SpeakerEmbedding {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn cosine(&self, other: &SpeakerEmbedding) -> f64 {
        // Both sides are unit length.
        dot(&self.0, &other.0)
    }
}

/// Fixed projection for a given feature and embedding dimension.
#[derive(Clone, Debug)]
pub struct SpeakerEmbedder {
    dim: usize,
    stats_dim: usize,
    projection: Vec<f64>,
}

impl SpeakerEmbedder {
    pub fn new(feature_dim: usize, dim: usize) -> Self {
        let stats_dim = 2 * feature_dim;
        let mut rng = stream(PROJECTION_SEED, (feature_dim as u64) << 32 | dim as u64);
        let scale = 1.0 / (stats_dim as f64).sqrt();
        let projection = (0..dim * stats_dim)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self {
            dim,
            stats_dim,
            projection,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embed(&self, features: &FeatureSequence) -> SpeakerEmbedding {
        assert_eq!(2 * features.dim(), self.stats_dim, "feature dimension mismatch");
        let stats = pooled_stats(features);
        let mut v: Vec<f64> = self
            .projection
            .chunks_exact(self.stats_dim)
            .map(|row| dot(row, &stats))
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        } else {
            v.iter_mut().for_each(|x| *x = 0.0);
            v[0] = 1.0;
        }
        SpeakerEmbedding(v)
    }
}

/// `[mean_0..mean_F, std_0..std_F]` over frames.
fn pooled_stats(features: &FeatureSequence) -> Vec<f64> {
    let f = features.dim();
    let n = features.len() as f64;
    let mut mean = vec![0.0; f];
    for s in 0..features.len() {
        for (m, v) in mean.iter_mut().zip(features.frame(s)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; f];
    for s in 0..features.len() {
        for ((acc, v), m) in var.iter_mut().zip(features.frame(s)).zip(&mean) {
            *acc += (v - m) * (v - m);
        }
    }
    let mut out = mean;
    out.extend(var.into_iter().map(|v| (v / n).sqrt()));
    out
}

/// Embedding with the default dimension for these features.
pub fn extract_speaker_embedding(features: &FeatureSequence) -> SpeakerEmbedding {
    SpeakerEmbedder::new(features.dim(), DEFAULT_EMBEDDING_DIM).embed(features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_corpus, CorpusSpec};

    #[test]
    fn unit_norm_and_deterministic() {
        let c = generate_corpus(
            &CorpusSpec {
                labeled: 20,
                unlabeled: 0,
                dev: 1,
                test: 1,
                ..CorpusSpec::default()
            },
            2,
        )
        .unwrap();
        for u in &c.labeled {
            let e = extract_speaker_embedding(&u.features);
            assert_eq!(e.dim(), DEFAULT_EMBEDDING_DIM);
            let norm = e.0.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
            assert_eq!(e, extract_speaker_embedding(&u.features));
        }
    }

    #[test]
    fn frame_order_does_not_matter() {
        let rows: Vec<Vec<f64>> = (0..7).map(|s| (0..4).map(|b| ((s * 3 + b) as f64).sin()).collect()).collect();
        let mut reversed = rows.clone();
        reversed.reverse();
        let a = extract_speaker_embedding(&FeatureSequence::from_rows(&rows).unwrap());
        let b = extract_speaker_embedding(&FeatureSequence::from_rows(&reversed).unwrap());
        for (x, y) in a.0.iter().zip(&b.0) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn single_frame_is_fine() {
        let e = extract_speaker_embedding(&FeatureSequence::from_rows(&[vec![0.0; 5]]).unwrap());
        assert!((e.0.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
