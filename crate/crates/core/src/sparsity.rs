//! Block-diagonal sparsity patterns and partially known kernel matrices.
//!
//! A pattern is a list of square diagonal blocks given as inclusive index
//! ranges. Consecutive blocks may overlap; together they must cover the whole
//! diagonal. Blocks that sit inside another block add nothing to the known set
//! and are dropped from the clique chain used for completion.

use std::ops::Range;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{KernelMatrix, KernelMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub start: usize,
    /// Inclusive.
    pub end: usize,
}

impl Block {
    pub fn new(start: usize, end: usize) -> Self {
        Block { start, end }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i <= self.end
    }

    pub fn rows(&self) -> Range<usize> {
        self.start..self.end + 1
    }

    fn covers(&self, other: &Block) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PatternKind {
    Band { bandwidth: usize },
    TwoBlock { overlap: usize },
    General,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PatternFile {
    #[serde(rename = "N")]
    n: usize,
    blocks: Vec<Block>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PatternFile", into = "PatternFile")]
pub struct SparsityPattern {
    n: usize,
    blocks: Vec<Block>,
    /// Maximal blocks, strictly increasing in both start and end.
    chain: Vec<Block>,
}

impl TryFrom<PatternFile> for SparsityPattern {
    type Error = Error;

    fn try_from(f: PatternFile) -> Result<Self> {
        SparsityPattern::new(f.n, f.blocks)
    }
}

impl From<SparsityPattern> for PatternFile {
    fn from(p: SparsityPattern) -> Self {
        PatternFile {
            n: p.n,
            blocks: p.blocks,
        }
    }
}

impl SparsityPattern {
    pub fn new(n: usize, blocks: Vec<Block>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Pattern("matrix size must be at least 1".into()));
        }
        if blocks.is_empty() {
            return Err(Error::Pattern("pattern has no blocks".into()));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.start > b.end || b.end >= n {
                return Err(Error::Pattern(format!(
                    "block {i} [{}..{}] invalid for size {n}",
                    b.start, b.end
                )));
            }
        }
        if blocks[0].start != 0 {
            return Err(Error::Pattern("first block must start at 0".into()));
        }
        for (i, pair) in blocks.windows(2).enumerate() {
            let (a, b) = (pair[0], pair[1]);
            if b.start < a.start {
                return Err(Error::Pattern(format!(
                    "blocks {i} and {} not sorted by start",
                    i + 1
                )));
            }
            if b.start > a.end + 1 {
                return Err(Error::Pattern(format!(
                    "gap of uncovered diagonal entries between blocks {i} and {}",
                    i + 1
                )));
            }
        }
        let mut chain: Vec<Block> = Vec::with_capacity(blocks.len());
        let mut reach = 0usize;
        for b in &blocks {
            if !chain.is_empty() && b.start > reach + 1 {
                return Err(Error::Pattern(format!(
                    "diagonal index {} is not covered",
                    reach + 1
                )));
            }
            reach = reach.max(b.end);
            if chain.iter().any(|c| c.covers(b)) {
                continue;
            }
            chain.retain(|c| !b.covers(c));
            chain.push(*b);
        }
        if reach != n - 1 {
            return Err(Error::Pattern(format!(
                "blocks end at {reach}, expected {}",
                n - 1
            )));
        }
        Ok(SparsityPattern { n, blocks, chain })
    }

    /// Two blocks over `n_old + n_new` indices: the old `n_old x n_old` block
    /// and a trailing block that re-includes the last `overlap` old indices.
    pub fn two_block(n_old: usize, n_new: usize, overlap: usize) -> Result<Self> {
        if n_old == 0 || n_new == 0 {
            return Err(Error::validation(
                "two-block pattern needs N >= 1 and n >= 1",
            ));
        }
        if overlap > n_old {
            return Err(Error::validation(format!(
                "overlap {overlap} exceeds N = {n_old}"
            )));
        }
        let total = n_old + n_new;
        SparsityPattern::new(
            total,
            vec![
                Block::new(0, n_old - 1),
                Block::new(n_old - overlap, total - 1),
            ],
        )
    }

    /// Known set `{(l, m) : |l - m| <= bandwidth}` as `n - bandwidth` blocks.
    pub fn band(n: usize, bandwidth: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("band pattern needs N >= 1"));
        }
        if bandwidth > n - 1 {
            return Err(Error::validation(format!(
                "bandwidth {bandwidth} out of range for N = {n}"
            )));
        }
        let blocks = (0..n - bandwidth)
            .map(|b| Block::new(b, b + bandwidth))
            .collect();
        SparsityPattern::new(n, blocks)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Blocks as declared.
    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Maximal blocks in top-left to bottom-right order.
    pub fn clique_chain(&self) -> &[Block] {
        &self.chain
    }

    /// Shared row count `|rho[block_b ∩ block_{b+1}]|` for each consecutive pair.
    pub fn overlaps(&self) -> Vec<usize> {
        self.blocks
            .windows(2)
            .map(|w| (w[0].end.min(w[1].end) + 1).saturating_sub(w[1].start))
            .collect()
    }

    pub fn kind(&self) -> PatternKind {
        let size = self.chain[0].len();
        let is_band = self
            .chain
            .iter()
            .enumerate()
            .all(|(i, b)| b.start == i && b.len() == size);
        if is_band {
            PatternKind::Band {
                bandwidth: size - 1,
            }
        } else if self.chain.len() == 2 {
            PatternKind::TwoBlock {
                overlap: self.chain[0].end + 1 - self.chain[1].start,
            }
        } else {
            PatternKind::General
        }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n {
            return Err(Error::validation(format!(
                "index {i} out of range for N = {}",
                self.n
            )));
        }
        Ok(())
    }

    /// Whether `(l, m)` is a known entry.
    pub fn contains(&self, l: usize, m: usize) -> Result<bool> {
        self.check_index(l)?;
        self.check_index(m)?;
        Ok(self.is_known(l, m))
    }

    /// Unchecked variant of [`contains`](Self::contains); out-of-range indices
    /// are reported as unknown.
    pub fn is_known(&self, l: usize, m: usize) -> bool {
        let (lo, hi) = if l <= m { (l, m) } else { (m, l) };
        // the chain is sorted by start and end, so the last block starting at
        // or before `lo` reaches furthest
        let idx = self.chain.partition_point(|b| b.start <= lo);
        idx > 0 && hi <= self.chain[idx - 1].end
    }

    /// Leftmost known column in row `l` (at or below the diagonal).
    fn row_start(&self, l: usize) -> usize {
        let idx = self.chain.partition_point(|b| b.end < l);
        self.chain[idx].start
    }

    /// Supernodes in elimination order, bottom-right first: the rows of the
    /// last block, then for each block walking upward the rows it does not
    /// share with the block below it.
    pub fn supernodes(&self) -> Vec<Range<usize>> {
        let k = self.chain.len();
        let mut out = Vec::with_capacity(k);
        out.push(self.chain[k - 1].rows());
        for b in (0..k - 1).rev() {
            out.push(self.chain[b].start..self.chain[b + 1].start);
        }
        out
    }

    /// Number of known strictly-lower-triangular entries.
    pub fn known_lower_count(&self) -> usize {
        (0..self.n).map(|l| l - self.row_start(l)).sum()
    }

    /// Known share of the strictly lower triangle; 1 when `N = 1`.
    pub fn sampling_fraction(&self) -> f64 {
        if self.n == 1 {
            return 1.0;
        }
        let total = self.n * (self.n - 1) / 2;
        self.known_lower_count() as f64 / total as f64
    }

    /// Number of unknown entries, counting both triangles.
    pub fn unknown_count(&self) -> usize {
        self.n * (self.n - 1) - 2 * self.known_lower_count()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ViewFile {
    #[serde(flatten)]
    pattern: PatternFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<KernelMeta>,
    /// `(l, m, value)` with `l >= m`.
    entries: Vec<(usize, usize, f64)>,
}

/// Kernel values on the known set of a pattern; unknown entries hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseKernelView {
    pattern: SparsityPattern,
    values: DMatrix<f64>,
    meta: Option<KernelMeta>,
}

impl SparseKernelView {
    pub fn from_dense(
        full: &DMatrix<f64>,
        pattern: SparsityPattern,
        meta: Option<KernelMeta>,
    ) -> Result<Self> {
        let n = pattern.size();
        if full.nrows() != n || full.ncols() != n {
            return Err(Error::validation(format!(
                "matrix is {}x{}, pattern expects {n}x{n}",
                full.nrows(),
                full.ncols()
            )));
        }
        let mut values = DMatrix::<f64>::zeros(n, n);
        for l in 0..n {
            for m in pattern.row_start(l)..=l {
                let v = full[(l, m)];
                if v != full[(m, l)] {
                    return Err(Error::validation(format!(
                        "known entries not symmetric at ({l},{m})"
                    )));
                }
                values[(l, m)] = v;
                values[(m, l)] = v;
            }
        }
        Ok(SparseKernelView {
            pattern,
            values,
            meta,
        })
    }

    /// Restricts a kernel matrix to the known set of `pattern`.
    pub fn subsample(kernel: &KernelMatrix, pattern: SparsityPattern) -> Result<Self> {
        Self::from_dense(kernel.values(), pattern, Some(kernel.meta().clone()))
    }

    /// Builds a view from a coordinate list; every known lower-triangle entry
    /// must appear exactly once and no unknown entry may appear.
    pub fn from_entries(
        pattern: SparsityPattern,
        entries: &[(usize, usize, f64)],
        meta: Option<KernelMeta>,
    ) -> Result<Self> {
        let n = pattern.size();
        let mut values = DMatrix::<f64>::zeros(n, n);
        let mut seen = DMatrix::<bool>::from_element(n, n, false);
        for &(l, m, v) in entries {
            if l < m {
                return Err(Error::validation(format!(
                    "entry ({l},{m}) must have l >= m"
                )));
            }
            if !pattern.contains(l, m)? {
                return Err(Error::validation(format!(
                    "entry ({l},{m}) is outside the pattern"
                )));
            }
            if !v.is_finite() {
                return Err(Error::validation(format!("entry ({l},{m}) is not finite")));
            }
            if std::mem::replace(&mut seen[(l, m)], true) {
                return Err(Error::validation(format!("entry ({l},{m}) given twice")));
            }
            values[(l, m)] = v;
            values[(m, l)] = v;
        }
        let missing = entries.len() != pattern.known_lower_count() + n;
        if missing {
            return Err(Error::validation(format!(
                "expected {} entries, got {}",
                pattern.known_lower_count() + n,
                entries.len()
            )));
        }
        Ok(SparseKernelView {
            pattern,
            values,
            meta,
        })
    }

    pub fn pattern(&self) -> &SparsityPattern {
        &self.pattern
    }

    pub fn meta(&self) -> Option<&KernelMeta> {
        self.meta.as_ref()
    }

    /// Dense storage with zeros on unknown entries.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn size(&self) -> usize {
        self.pattern.size()
    }

    pub fn get(&self, l: usize, m: usize) -> Option<f64> {
        self.pattern.is_known(l, m).then(|| self.values[(l, m)])
    }

    /// Known entries `(l, m, value)` with `l >= m`, row-major.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        (0..self.size())
            .flat_map(|l| (self.pattern.row_start(l)..=l).map(move |m| (l, m)))
            .map(|(l, m)| (l, m, self.values[(l, m)]))
            .collect()
    }

    pub fn block(&self, b: &Block) -> DMatrix<f64> {
        self.values
            .view((b.start, b.start), (b.len(), b.len()))
            .into_owned()
    }

    /// Overwrites the entries of one block. Used by block repair.
    pub(crate) fn set_block(&mut self, b: &Block, data: &DMatrix<f64>) {
        self.values
            .view_mut((b.start, b.start), (b.len(), b.len()))
            .copy_from(data);
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ViewFile {
            pattern: self.pattern.clone().into(),
            meta: self.meta.clone(),
            entries: self.entries(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ViewFile = serde_json::from_str(text)?;
        let pattern = SparsityPattern::try_from(file.pattern)?;
        Self::from_entries(pattern, &file.entries, file.meta)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
