//! On-disk corpus: `manifest.tsv` (`id  speaker  split  text`, tab separated,
//! with a header line), one matrix file per utterance under `feats/`, and a
//! `corpus.meta` file recording the generation seed.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::features::{read_matrix, write_matrix};
use super::generate::{CorpusSplit, Split, Utterance};
use super::vocab::{detokenize, tokenize, Vocabulary};
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.tsv";
pub const FEATS_DIR: &str = "feats";
const META: &str = "corpus.meta";
const HEADER: &str = "id\tspeaker\tsplit\ttext";

pub fn feature_path(dir: &Path, id: &str) -> std::path::PathBuf {
    dir.join(FEATS_DIR).join(format!("{id}.f32"))
}

pub fn write_corpus(dir: &Path, corpus: &CorpusSplit) -> Result<()> {
    let vocab = Vocabulary::default();
    fs::create_dir_all(dir.join(FEATS_DIR)).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::new();
    manifest.push_str(HEADER);
    manifest.push('\n');
    for (split, utt) in corpus.iter() {
        let text = match &utt.transcript {
            Some(t) => detokenize(t, &vocab)?,
            None => String::new(),
        };
        writeln!(manifest, "{}\t{}\t{}\t{}", utt.id, utt.speaker, split.as_str(), text).unwrap();
        write_matrix(&feature_path(dir, &utt.id), &utt.features)?;
    }
    let path = dir.join(MANIFEST);
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    let path = dir.join(META);
    fs::write(&path, format!("seed = {}\n", corpus.seed)).map_err(|e| Error::io(&path, e))
}

pub fn read_corpus(dir: &Path) -> Result<CorpusSplit> {
    let vocab = Vocabulary::default();
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        return Err(Error::format(&path, "missing header line"));
    }
    let mut corpus = CorpusSplit {
        labeled: Vec::new(),
        unlabeled: Vec::new(),
        dev: Vec::new(),
        test: Vec::new(),
        seed: read_seed(dir)?,
    };
    for (n, line) in lines.enumerate() {
        let lineno = n + 2;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::format(&path, format!("line {lineno}: expected 4 columns")));
        }
        let speaker = cols[1]
            .parse()
            .map_err(|_| Error::format(&path, format!("line {lineno}: bad speaker {:?}", cols[1])))?;
        let split = Split::parse(cols[2])
            .ok_or_else(|| Error::format(&path, format!("line {lineno}: bad split {:?}", cols[2])))?;
        let transcript = if split.is_transcribed() {
            Some(tokenize(cols[3], &vocab)?)
        } else {
            None
        };
        let utt = Utterance {
            id: cols[0].to_string(),
            speaker,
            features: read_matrix(&feature_path(dir, cols[0]))?,
            transcript,
        };
        match split {
            Split::Labeled => corpus.labeled.push(utt),
            Split::Unlabeled => corpus.unlabeled.push(utt),
            Split::Dev => corpus.dev.push(utt),
            Split::Test => corpus.test.push(utt),
        }
    }
    Ok(corpus)
}

fn read_seed(dir: &Path) -> Result<u64> {
    let path = dir.join(META);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    text.lines()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == "seed")
        .and_then(|(_, v)| v.trim().parse().ok())
        .ok_or_else(|| Error::format(&path, "missing seed"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_corpus, CorpusSpec};

    #[test]
    fn disk_round_trip_is_exact() {
        let spec = CorpusSpec {
            labeled: 6,
            unlabeled: 4,
            dev: 3,
            test: 2,
            ..CorpusSpec::default()
        };
        let corpus = generate_corpus(&spec, 21).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path(), &corpus).unwrap();
        let manifest = fs::read_to_string(dir.path().join(MANIFEST)).unwrap();
        let first = manifest.lines().nth(1).unwrap();
        assert!(first.starts_with("labeled-00000\t"));
        assert_eq!(manifest.lines().count(), 16);
        assert_eq!(read_corpus(dir.path()).unwrap(), corpus);
    }
}
