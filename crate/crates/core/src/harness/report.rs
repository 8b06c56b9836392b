use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::augment::WeakAugmentKind;
use crate::error::{Error, Result};
use crate::trainer::Block;

pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_MD: &str = "results.md";
const CSV_HEADER: &str = "block,weak_kind,tau,seed,cer";
const BASELINE: &str = "baseline";
const MISSING: &str = "NA";
const BEST_OPEN: &str = "<u>";
const BEST_CLOSE: &str = "</u>";

/// Test CER of one (block, weak kind, τ) cell for one seed; `None` when the
/// run failed.
#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub block: Block,
    pub weak_kind: WeakAugmentKind,
    pub tau: f64,
    pub seed: u64,
    pub cer: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineResult {
    pub seed: u64,
    pub cer: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultsTable {
    pub baseline: Vec<BaselineResult>,
    pub cells: Vec<CellResult>,
}

/// Median of the present values; the mean of the two middle values for an
/// even count.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.to_vec();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

fn push_unique<T: PartialEq + Copy>(v: &mut Vec<T>, x: T) {
    if !v.contains(&x) {
        v.push(x);
    }
}

impl ResultsTable {
    pub fn blocks(&self) -> Vec<Block> {
        let mut out = Vec::new();
        self.cells.iter().for_each(|c| push_unique(&mut out, c.block));
        out
    }

    pub fn weak_kinds(&self) -> Vec<WeakAugmentKind> {
        let mut out = Vec::new();
        self.cells.iter().for_each(|c| push_unique(&mut out, c.weak_kind));
        out
    }

    pub fn taus(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.cells.iter().for_each(|c| push_unique(&mut out, c.tau));
        out
    }

    pub fn baseline_median(&self) -> Option<f64> {
        median(&self.baseline.iter().filter_map(|b| b.cer).collect::<Vec<_>>())
    }

    /// Median CER over seeds for one cell.
    pub fn cell_median(&self, block: Block, kind: WeakAugmentKind, tau: f64) -> Option<f64> {
        let v: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.block == block && c.weak_kind == kind && c.tau == tau)
            .filter_map(|c| c.cer)
            .collect();
        median(&v)
    }

    /// The (weak kind, τ) with the lowest median in `block`; the first in
    /// table order wins ties.
    pub fn best_in_block(&self, block: Block) -> Option<(WeakAugmentKind, f64)> {
        let mut best: Option<(WeakAugmentKind, f64, f64)> = None;
        for kind in self.weak_kinds() {
            for tau in self.taus() {
                if let Some(m) = self.cell_median(block, kind, tau) {
                    if best.map_or(true, |(_, _, b)| m < b) {
                        best = Some((kind, tau, m));
                    }
                }
            }
        }
        best.map(|(k, t, _)| (k, t))
    }

    pub fn to_csv(&self) -> String {
        let fmt = |c: Option<f64>| c.map_or_else(|| MISSING.to_string(), |v| v.to_string());
        let mut out = format!("{CSV_HEADER}\n");
        for b in &self.baseline {
            let _ = writeln!(out, "{BASELINE},,,{},{}", b.seed, fmt(b.cer));
        }
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                c.block.name(),
                c.weak_kind.as_str(),
                c.tau,
                c.seed,
                fmt(c.cer)
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |n: usize, m: &str| Error::Config(format!("results line {}: {m}", n + 1));
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == CSV_HEADER => {}
            _ => return Err(bad(0, "missing header")),
        }
        let mut table = Self::default();
        for (n, line) in lines {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(bad(n, "expected 5 columns"));
            }
            let seed: u64 = cols[3].parse().map_err(|_| bad(n, "bad seed"))?;
            let cer = match cols[4] {
                MISSING => None,
                v => Some(v.parse::<f64>().map_err(|_| bad(n, "bad cer"))?),
            };
            if cols[0] == BASELINE {
                table.baseline.push(BaselineResult { seed, cer });
                continue;
            }
            table.cells.push(CellResult {
                block: Block::parse(cols[0]).ok_or_else(|| bad(n, "unknown block"))?,
                weak_kind: WeakAugmentKind::parse(cols[1]).ok_or_else(|| bad(n, "unknown weak kind"))?,
                tau: cols[2].parse().map_err(|_| bad(n, "bad tau"))?,
                seed,
                cer,
            });
        }
        Ok(table)
    }

    /// Table of median CERs (percent) with one row per (block, weak kind),
    /// one column per τ, a baseline row, and the best cell of each block
    /// underlined.
    pub fn to_markdown(&self) -> String {
        let taus = self.taus();
        let pct = |v: Option<f64>| v.map_or_else(|| "–".to_string(), |c| format!("{:.2}", 100.0 * c));
        let mut out = String::from("# Test CER (%)\n\n");
        let seeds: Vec<String> = self.baseline.iter().map(|b| b.seed.to_string()).collect();
        let _ = writeln!(out, "Median over seeds {}. Underlined: best cell of each block.\n", seeds.join(", "));
        out.push_str("| Pseudo transcripts | Weak augmentation |");
        for t in &taus {
            let _ = write!(out, " τ={t} |");
        }
        out.push_str("\n|---|---|");
        out.push_str(&"---|".repeat(taus.len()));
        out.push('\n');
        let base = pct(self.baseline_median());
        let _ = writeln!(out, "| supervised baseline | – |{}", format!(" {base} |").repeat(taus.len()));
        for block in self.blocks() {
            let best = self.best_in_block(block);
            for kind in self.weak_kinds() {
                let _ = write!(out, "| {} | {} |", block.name(), kind.as_str());
                for &tau in &taus {
                    let v = pct(self.cell_median(block, kind, tau));
                    if best == Some((kind, tau)) {
                        let _ = write!(out, " {BEST_OPEN}{v}{BEST_CLOSE} |");
                    } else {
                        let _ = write!(out, " {v} |");
                    }
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Number of best markers in a rendered row.
pub fn count_best_markers(line: &str) -> usize {
    line.matches(BEST_OPEN).count()
}

/// Writes `results.csv` and `results.md` under `out_dir`.
pub fn emit_report(table: &ResultsTable, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let csv = out_dir.join(RESULTS_CSV);
    let md = out_dir.join(RESULTS_MD);
    fs::write(&csv, table.to_csv()).map_err(|e| Error::io(&csv, e))?;
    fs::write(&md, table.to_markdown()).map_err(|e| Error::io(&md, e))?;
    Ok((csv, md))
}

pub fn read_results(path: &Path) -> Result<ResultsTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ResultsTable::from_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_cases() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0]), Some(2.5));
    }
}
