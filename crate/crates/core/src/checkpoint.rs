//! Single-file model checkpoints: a text header of `key = value` lines ending
//! in a `---` line, then one section per parameter tensor in declaration
//! order. A section is `u32 name length, name bytes, u32 rows, u32 cols`
//! followed by `rows·cols` little-endian f32 values.

use std::fs;
use std::path::Path;

use crate::asr::{AsrConfig, AsrModel, Role};
use crate::error::{Error, Result};
use crate::harness::config::{read_asr, read_tts, write_asr, write_tts};
use crate::kv::KvMap;
use crate::nn::{Param, Parameterized};
use crate::tts::{TtsConfig, TtsModel};

const MAGIC: &str = "chainmatch-checkpoint 1";
const HEADER_END: &str = "---";

fn encode<M: Parameterized>(header: &KvMap, model: &M) -> Vec<u8> {
    let mut out = format!("{MAGIC}\n{}{HEADER_END}\n", header.render()).into_bytes();
    model.visit(&mut |p: &Param| {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.rows as u32).to_le_bytes());
        out.extend_from_slice(&(p.cols as u32).to_le_bytes());
        for &v in &p.value {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    });
    out
}

fn split_header<'a>(path: &Path, bytes: &'a [u8]) -> Result<(KvMap, &'a [u8])> {
    let marker = format!("\n{HEADER_END}\n");
    let pos = bytes
        .windows(marker.len())
        .position(|w| w == marker.as_bytes())
        .ok_or_else(|| Error::format(path, "missing header terminator"))?;
    let text = std::str::from_utf8(&bytes[..pos]).map_err(|_| Error::format(path, "header is not UTF-8"))?;
    let (magic, rest) = text.split_once('\n').unwrap_or((text, ""));
    if magic != MAGIC {
        return Err(Error::format(path, "not a checkpoint file"));
    }
    Ok((KvMap::parse(rest)?, &bytes[pos + marker.len()..]))
}

struct Reader<'a> {
    path: &'a Path,
    data: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() < n {
            return Err(Error::format(self.path, "truncated tensor section"));
        }
        let (head, tail) = self.data.split_at(n);
        self.data = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
}

fn fill<M: Parameterized>(path: &Path, body: &[u8], model: &mut M) -> Result<()> {
    let mut r = Reader { path, data: body };
    let mut failure = None;
    model.visit_mut(&mut |p: &mut Param| {
        if failure.is_some() {
            return;
        }
        let res = (|| -> Result<()> {
            let n = r.u32()?;
            let name = std::str::from_utf8(r.take(n)?)
                .map_err(|_| Error::format(path, "bad section name"))?
                .to_string();
            if name != p.name {
                return Err(Error::format(path, format!("expected section {}, found {name}", p.name)));
            }
            let (rows, cols) = (r.u32()?, r.u32()?);
            if (rows, cols) != (p.rows, p.cols) {
                return Err(Error::format(path, format!("section {name} has shape {rows}x{cols}")));
            }
            let raw = r.take(rows * cols * 4)?;
            for (v, c) in p.value.iter_mut().zip(raw.chunks_exact(4)) {
                *v = f32::from_le_bytes(c.try_into().unwrap()) as f64;
            }
            Ok(())
        })();
        if let Err(e) = res {
            failure = Some(e);
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    if !r.data.is_empty() {
        return Err(Error::format(path, "trailing bytes after last section"));
    }
    Ok(())
}

fn write(path: &Path, bytes: Vec<u8>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn expect_kind(path: &Path, header: &KvMap, kind: &str) -> Result<()> {
    match header.raw("kind") {
        Some(k) if k == kind => Ok(()),
        other => Err(Error::format(path, format!("expected a {kind} checkpoint, found {other:?}"))),
    }
}

pub fn save_asr(path: &Path, model: &AsrModel) -> Result<()> {
    let mut h = KvMap::default();
    h.set("kind", "asr");
    h.set("role", model.role.as_str());
    write_asr(&mut h, "asr", &model.config);
    write(path, encode(&h, model))
}

pub fn load_asr(path: &Path) -> Result<AsrModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (h, body) = split_header(path, &bytes)?;
    expect_kind(path, &h, "asr")?;
    let mut config = AsrConfig::default();
    read_asr(&h, "asr", &mut config)?;
    let role = h
        .raw("role")
        .and_then(Role::parse)
        .ok_or_else(|| Error::format(path, "missing or unknown role"))?;
    let mut model = AsrModel::new(config, 0)?.with_role(role);
    fill(path, body, &mut model)?;
    Ok(model)
}

pub fn save_tts(path: &Path, model: &TtsModel) -> Result<()> {
    let mut h = KvMap::default();
    h.set("kind", "tts");
    write_tts(&mut h, "tts", &model.config);
    write(path, encode(&h, model))
}

pub fn load_tts(path: &Path) -> Result<TtsModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (h, body) = split_header(path, &bytes)?;
    expect_kind(path, &h, "tts")?;
    let mut config = TtsConfig::default();
    read_tts(&h, "tts", &mut config)?;
    let mut model = TtsModel::new(config, 0)?;
    fill(path, body, &mut model)?;
    Ok(model)
}

/// Rounds every parameter to f32, the precision checkpoints store.
pub fn round_to_storage<M: Parameterized>(model: &mut M) {
    model.visit_mut(&mut |p: &mut Param| p.value.iter_mut().for_each(|v| *v = *v as f32 as f64));
}
