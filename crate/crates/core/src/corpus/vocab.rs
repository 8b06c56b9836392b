use std::collections::HashMap;

use crate::error::{Error, Result};

/// Id of the combined start/end-of-sequence token.
pub const SOS_EOS: usize = 0;
pub const SPACE: usize = 1;
pub const APOSTROPHE: usize = 2;
pub const VOCAB_SIZE: usize = 29;

/// The 29-token character vocabulary.
///
/// Ordering is fixed: `0` is sos/eos, `1` space, `2` apostrophe, then
/// `a..z` as `3..=28`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    id_of: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        build_vocabulary()
    }
}

pub fn build_vocabulary() -> Vocabulary {
    let mut tokens = vec!["<sos/eos>".to_string(), " ".to_string(), "'".to_string()];
    tokens.extend(('a'..='z').map(|c| c.to_string()));
    let id_of = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    Vocabulary { tokens, id_of }
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id_of(&self, token: &str) -> Option<usize> {
        self.id_of.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    fn char_id(&self, c: char) -> Option<usize> {
        match c {
            ' ' => Some(SPACE),
            '\'' => Some(APOSTROPHE),
            'a'..='z' => Some(3 + (c as usize - 'a' as usize)),
            _ => None,
        }
    }
}

/// A sequence of vocabulary ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenSequence(pub Vec<usize>);

impl TokenSequence {
    pub fn new(ids: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = ids.iter().find(|&&id| id >= VOCAB_SIZE) {
            return Err(Error::TokenOutOfRange(bad));
        }
        Ok(Self(ids))
    }

    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ends_with_eos(&self) -> bool {
        self.0.last() == Some(&SOS_EOS)
    }

    /// Copy with a trailing sos/eos appended, as used for decoder targets.
    pub fn with_eos(&self) -> Self {
        let mut ids = self.0.clone();
        ids.push(SOS_EOS);
        Self(ids)
    }

    /// Copy with every sos/eos id removed.
    pub fn without_eos(&self) -> Self {
        Self(self.0.iter().copied().filter(|&id| id != SOS_EOS).collect())
    }
}

/// Lowercases `text` and maps each character to its id. No sos/eos is added.
pub fn tokenize(text: &str, vocab: &Vocabulary) -> Result<TokenSequence> {
    let mut ids = Vec::with_capacity(text.len());
    for (position, ch) in text.chars().enumerate() {
        let mut lower = ch.to_lowercase();
        let (Some(l), None) = (lower.next(), lower.next()) else {
            return Err(Error::UnrepresentableChar { ch, position });
        };
        match vocab.char_id(l) {
            Some(id) => ids.push(id),
            None => return Err(Error::UnrepresentableChar { ch, position }),
        }
    }
    Ok(TokenSequence(ids))
}

/// Inverse of [`tokenize`]; sos/eos ids are dropped.
pub fn detokenize(ids: &TokenSequence, vocab: &Vocabulary) -> Result<String> {
    let mut out = String::with_capacity(ids.len());
    for &id in ids.ids() {
        if id == SOS_EOS {
            continue;
        }
        out.push_str(vocab.token(id).ok_or(Error::TokenOutOfRange(id))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_ordering() {
        let v = build_vocabulary();
        assert_eq!(v.len(), 29);
        assert_eq!(v.id_of("a"), Some(3));
        assert_eq!(v.id_of("z"), Some(28));
        assert_eq!(v.id_of("<sos/eos>"), Some(0));
        assert_eq!(v.id_of(" "), Some(1));
        assert_eq!(v.id_of("'"), Some(2));
    }

    #[test]
    fn id_of_is_a_bijection() {
        let v = build_vocabulary();
        let mut seen = vec![false; 29];
        for t in v.tokens() {
            let id = v.id_of(t).unwrap();
            assert!(!seen[id]);
            seen[id] = true;
            assert_eq!(v.token(id), Some(t.as_str()));
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn tokenize_examples() {
        let v = build_vocabulary();
        assert_eq!(tokenize("ab", &v).unwrap().0, vec![3, 4]);
        assert_eq!(tokenize("A b", &v).unwrap().0, vec![3, 1, 4]);
        assert!(tokenize("", &v).unwrap().is_empty());
        assert_eq!(tokenize("it's", &v).unwrap().0, vec![11, 22, 2, 21]);
    }

    #[test]
    fn tokenize_rejects_with_position() {
        let v = build_vocabulary();
        match tokenize("ab1c", &v) {
            Err(Error::UnrepresentableChar { ch, position }) => {
                assert_eq!(ch, '1');
                assert_eq!(position, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(tokenize("é", &v).is_err());
    }

    #[test]
    fn detokenize_examples() {
        let v = build_vocabulary();
        assert_eq!(detokenize(&TokenSequence(vec![3, 4]), &v).unwrap(), "ab");
        assert_eq!(detokenize(&TokenSequence(vec![0, 3, 0]), &v).unwrap(), "a");
        assert!(matches!(
            detokenize(&TokenSequence(vec![29]), &v),
            Err(Error::TokenOutOfRange(29))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn round_trip(text in "[a-z' ]{0,40}") {
            let v = build_vocabulary();
            let ids = tokenize(&text, &v).unwrap();
            prop_assert_eq!(ids.len(), text.chars().count());
            prop_assert_eq!(detokenize(&ids, &v).unwrap(), text);
        }
    }
}
