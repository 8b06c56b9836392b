use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Mat;

/// An `S × F` matrix of log-spectral frames. Always non-empty and finite.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    frames: Mat,
}

impl FeatureSequence {
    pub fn new(frames: Mat) -> Result<Self> {
        if frames.rows == 0 {
            return Err(Error::InvalidFeatures("no frames".into()));
        }
        if frames.cols == 0 {
            return Err(Error::InvalidFeatures("no feature bins".into()));
        }
        if let Some(pos) = frames.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidFeatures(format!(
                "non-finite value at frame {}, bin {}",
                pos / frames.cols,
                pos % frames.cols
            )));
        }
        Ok(Self { frames })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidFeatures("ragged rows".into()));
        }
        Self::new(Mat::from_rows(rows, cols))
    }

    /// Frame count `S`.
    pub fn len(&self) -> usize {
        self.frames.rows
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Feature bins `F`.
    pub fn dim(&self) -> usize {
        self.frames.cols
    }

    pub fn frame(&self, s: usize) -> &[f64] {
        self.frames.row(s)
    }

    pub fn mat(&self) -> &Mat {
        &self.frames
    }

    pub fn into_mat(self) -> Mat {
        self.frames
    }

    /// Squared error averaged over all entries; shapes must match.
    pub fn mse(&self, other: &FeatureSequence) -> f64 {
        assert_eq!(self.frames.rows, other.frames.rows);
        assert_eq!(self.frames.cols, other.frames.cols);
        let n = self.frames.data.len() as f64;
        self.frames
            .data
            .iter()
            .zip(&other.frames.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n
    }
}

/// Writes the matrix file format: `S` and `F` as little-endian `u32`, then
/// `S·F` little-endian `f32` values in row-major order.
pub fn write_matrix(path: &Path, features: &FeatureSequence) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut buf = Vec::with_capacity(8 + 4 * features.frames.data.len());
    buf.extend_from_slice(&(features.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(features.dim() as u32).to_le_bytes());
    for &v in &features.frames.data {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<FeatureSequence> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 {
        return Err(Error::format(path, "truncated header"));
    }
    let rows = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if bytes.len() != 8 + 4 * rows * cols {
        return Err(Error::format(
            path,
            format!("expected {} payload bytes for {rows}x{cols}, found {}", 4 * rows * cols, bytes.len() - 8),
        ));
    }
    let data = bytes[8..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    FeatureSequence::new(Mat { rows, cols, data }).map_err(|e| Error::format(path, e.to_string()))
}

/// Rounds every value through `f32`, matching what a round trip through
/// [`write_matrix`] produces.
pub fn quantize(features: &FeatureSequence) -> FeatureSequence {
    let mut m = features.frames.clone();
    m.data.iter_mut().for_each(|v| *v = *v as f32 as f64);
    FeatureSequence { frames: m }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(FeatureSequence::new(Mat::zeros(0, 3)).is_err());
        let mut m = Mat::zeros(2, 2);
        m.data[3] = f64::NAN;
        assert!(FeatureSequence::new(m).is_err());
    }

    #[test]
    fn matrix_file_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.f32");
        let f = FeatureSequence::from_rows(&[vec![1.0, 2.5], vec![-3.0, 0.125], vec![0.0, 7.0]]).unwrap();
        write_matrix(&path, &f).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 8 + 4 * 6);
        assert_eq!(&bytes[0..4], &3u32.to_le_bytes());
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1.0f32.to_le_bytes());
        assert_eq!(read_matrix(&path).unwrap(), f);
    }

    #[test]
    fn truncated_matrix_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.f32");
        fs::write(&path, [2, 0, 0, 0, 2, 0, 0, 0, 1]).unwrap();
        assert!(matches!(read_matrix(&path), Err(Error::Format { .. })));
    }
}
