use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::FeatureSequence;
use crate::error::{Error, Result};

/// Time–frequency masking parameters. Each round masks one band of
/// `0..=max_freq_width` bins across all frames and one band of
/// `0..=max_time_width` whole frames.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentPolicy {
    pub n_masks: usize,
    pub max_freq_width: usize,
    pub max_time_width: usize,
    pub fill_value: f64,
}

impl AugmentPolicy {
    pub fn identity() -> Self {
        Self {
            n_masks: 0,
            max_freq_width: 0,
            max_time_width: 0,
            fill_value: 0.0,
        }
    }

    /// One masking round; frequency width up to 5 bins.
    pub fn weak(max_time_width: usize) -> Self {
        Self {
            n_masks: 1,
            max_freq_width: 5,
            max_time_width,
            fill_value: 0.0,
        }
    }

    /// Two masking rounds; frequency width up to 20 bins, capped at
    /// `feature_dim − 1` so that one bin always survives.
    pub fn strong(feature_dim: usize, max_time_width: usize) -> Self {
        Self {
            n_masks: 2,
            max_freq_width: 20.min(feature_dim.saturating_sub(1)),
            max_time_width,
            fill_value: 0.0,
        }
    }

    /// Shrinks the widths to fit an `frames × bins` input.
    pub fn fitted(&self, frames: usize, bins: usize) -> Self {
        Self {
            max_freq_width: self.max_freq_width.min(bins),
            max_time_width: self.max_time_width.min(frames),
            ..*self
        }
    }
}

/// Applies `policy` with masks drawn from `seed`. Entries outside every mask
/// are copied bit for bit.
pub fn spec_augment(features: &FeatureSequence, policy: &AugmentPolicy, seed: u64) -> Result<FeatureSequence> {
    let (s, f) = (features.len(), features.dim());
    if policy.max_freq_width > f {
        return Err(Error::InvalidArgument(format!(
            "frequency mask width {} exceeds {f} bins",
            policy.max_freq_width
        )));
    }
    if policy.max_time_width > s {
        return Err(Error::InvalidArgument(format!(
            "time mask width {} exceeds {s} frames",
            policy.max_time_width
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = features.mat().clone();
    for _ in 0..policy.n_masks {
        let wf = rng.gen_range(0..=policy.max_freq_width);
        let f0 = rng.gen_range(0..=f - wf);
        for r in 0..s {
            m.row_mut(r)[f0..f0 + wf].fill(policy.fill_value);
        }
        let wt = rng.gen_range(0..=policy.max_time_width);
        let t0 = rng.gen_range(0..=s - wt);
        for r in t0..t0 + wt {
            m.row_mut(r).fill(policy.fill_value);
        }
    }
    FeatureSequence::new(m)
}

/// Derives an independent seed from a base seed and a tuple of indices.
pub fn mix_seed(base: u64, parts: &[u64]) -> u64 {
    let mut z = base;
    for &p in parts {
        z = splitmix(z ^ splitmix(p.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    z
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strong_caps_frequency_width() {
        assert_eq!(AugmentPolicy::strong(20, 10).max_freq_width, 19);
        assert_eq!(AugmentPolicy::strong(80, 10).max_freq_width, 20);
        assert_eq!(AugmentPolicy::strong(20, 10).n_masks, 2);
    }

    #[test]
    fn seeds_differ() {
        assert_ne!(mix_seed(1, &[0, 1]), mix_seed(1, &[1, 0]));
        assert_eq!(mix_seed(7, &[3]), mix_seed(7, &[3]));
    }
}
