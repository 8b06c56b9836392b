use crate::asr::{beam_decode, AsrModel};
use crate::corpus::{detokenize, Utterance, Vocabulary};
use crate::error::{Error, Result};

pub const EVAL_BEAM: usize = 4;

/// Levenshtein distance over characters with unit costs.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Character error rate of `hyp` against `ref_text`.
pub fn cer(hyp: &str, ref_text: &str) -> Result<f64> {
    let n = ref_text.chars().count();
    if n == 0 {
        return Err(Error::EmptyReference);
    }
    Ok(edit_distance(hyp, ref_text) as f64 / n as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct UtteranceScore {
    pub id: String,
    pub hypothesis: String,
    pub reference: String,
    pub edits: usize,
    pub ref_len: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub utterances: Vec<UtteranceScore>,
}

impl Evaluation {
    /// Total edits over total reference characters.
    pub fn cer(&self) -> f64 {
        let edits: usize = self.utterances.iter().map(|u| u.edits).sum();
        let chars: usize = self.utterances.iter().map(|u| u.ref_len).sum();
        edits as f64 / chars as f64
    }
}

/// Beam-decodes every utterance (beam 4) and scores it.
pub fn evaluate_detailed(model: &AsrModel, testset: &[Utterance]) -> Result<Evaluation> {
    let vocab = Vocabulary::default();
    let mut utterances = Vec::with_capacity(testset.len());
    for utt in testset {
        let reference = detokenize(utt.transcript()?, &vocab)?;
        if reference.is_empty() {
            return Err(Error::EmptyReference);
        }
        let hyp = beam_decode(model, &utt.features, EVAL_BEAM, model.default_max_len(&utt.features));
        let hypothesis = detokenize(&hyp.ids, &vocab)?;
        utterances.push(UtteranceScore {
            id: utt.id.clone(),
            edits: edit_distance(&hypothesis, &reference),
            ref_len: reference.chars().count(),
            hypothesis,
            reference,
        });
    }
    if utterances.is_empty() {
        return Err(Error::EmptyBatch);
    }
    Ok(Evaluation { utterances })
}

/// Corpus-level CER with beam-4 decoding.
pub fn evaluate(model: &AsrModel, testset: &[Utterance]) -> Result<f64> {
    Ok(evaluate_detailed(model, testset)?.cer())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cer_examples() {
        assert_eq!(cer("abc", "abc").unwrap(), 0.0);
        assert!((cer("axc", "abc").unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(cer("", "ab").unwrap(), 1.0);
        assert_eq!(cer("abcdef", "ab").unwrap(), 2.0);
        assert!(matches!(cer("a", ""), Err(Error::EmptyReference)));
    }

    #[test]
    fn edit_distance_basics() {
        assert_eq!(edit_distance("kitten", "sitting"), 3);
        assert_eq!(edit_distance("", ""), 0);
        assert_eq!(edit_distance("abc", ""), 3);
        assert_eq!(edit_distance("", "abc"), 3);
    }
}
