//! Vocabulary, tokenization, the synthetic corpus, and speaker embeddings.

mod embedding;
mod features;
mod generate;
mod io;
mod vocab;

pub use embedding::{extract_speaker_embedding, SpeakerEmbedder, SpeakerEmbedding, DEFAULT_EMBEDDING_DIM};
pub use features::{quantize, read_matrix, write_matrix, FeatureSequence};
pub use generate::{generate_corpus, CorpusSpec, CorpusSplit, Split, Synthesizer, Utterance};
pub use io::{feature_path, read_corpus, write_corpus, FEATS_DIR, MANIFEST};
pub use vocab::{
    build_vocabulary, detokenize, tokenize, TokenSequence, Vocabulary, APOSTROPHE, SOS_EOS, SPACE, VOCAB_SIZE,
};
