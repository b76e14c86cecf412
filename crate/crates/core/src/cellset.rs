//! Dense cell sets with per-line counters.
//!
//! Membership is stored twice, row-major and column-major, so that the
//! members of any row or column can be enumerated a word at a time.

use crate::grid::{CellIndex, LineId, LineKind};

#[derive(Clone, PartialEq, Eq)]
pub struct CellSet {
    n: usize,
    words_per_line: usize,
    by_row: Vec<u64>,
    by_col: Vec<u64>,
    row_counts: Vec<u16>,
    col_counts: Vec<u16>,
    len: usize,
}

impl std::fmt::Debug for CellSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CellSet").field("n", &self.n).field("len", &self.len).finish()
    }
}

impl CellSet {
    pub fn new(n: usize) -> Self {
        let words_per_line = n.div_ceil(64);
        Self {
            n,
            words_per_line,
            by_row: vec![0; n * words_per_line],
            by_col: vec![0; n * words_per_line],
            row_counts: vec![0; n],
            col_counts: vec![0; n],
            len: 0,
        }
    }

    pub fn from_cells(n: usize, cells: impl IntoIterator<Item = CellIndex>) -> Self {
        let mut s = Self::new(n);
        for c in cells {
            s.insert(c);
        }
        s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    fn bit(&self, major: usize, minor: usize) -> (usize, u64) {
        (major * self.words_per_line + minor / 64, 1u64 << (minor % 64))
    }

    #[inline]
    pub fn contains(&self, c: CellIndex) -> bool {
        let (w, m) = self.bit(c.row as usize, c.col as usize);
        self.by_row[w] & m != 0
    }

    /// Returns `true` if the cell was not yet present.
    pub fn insert(&mut self, c: CellIndex) -> bool {
        let (w, m) = self.bit(c.row as usize, c.col as usize);
        if self.by_row[w] & m != 0 {
            return false;
        }
        self.by_row[w] |= m;
        let (w, m) = self.bit(c.col as usize, c.row as usize);
        self.by_col[w] |= m;
        self.row_counts[c.row as usize] += 1;
        self.col_counts[c.col as usize] += 1;
        self.len += 1;
        true
    }

    /// Returns `true` if the cell was present.
    pub fn remove(&mut self, c: CellIndex) -> bool {
        let (w, m) = self.bit(c.row as usize, c.col as usize);
        if self.by_row[w] & m == 0 {
            return false;
        }
        self.by_row[w] &= !m;
        let (w, m) = self.bit(c.col as usize, c.row as usize);
        self.by_col[w] &= !m;
        self.row_counts[c.row as usize] -= 1;
        self.col_counts[c.col as usize] -= 1;
        self.len -= 1;
        true
    }

    pub fn clear(&mut self) {
        self.by_row.iter_mut().for_each(|w| *w = 0);
        self.by_col.iter_mut().for_each(|w| *w = 0);
        self.row_counts.iter_mut().for_each(|c| *c = 0);
        self.col_counts.iter_mut().for_each(|c| *c = 0);
        self.len = 0;
    }

    #[inline]
    pub fn row_count(&self, row: u16) -> usize {
        self.row_counts[row as usize] as usize
    }

    #[inline]
    pub fn col_count(&self, col: u16) -> usize {
        self.col_counts[col as usize] as usize
    }

    #[inline]
    pub fn line_count(&self, line: LineId) -> usize {
        match line.kind {
            LineKind::Row => self.row_count(line.index),
            LineKind::Column => self.col_count(line.index),
        }
    }

    fn line_words(&self, line: LineId) -> &[u64] {
        let start = line.index as usize * self.words_per_line;
        let bits = match line.kind {
            LineKind::Row => &self.by_row,
            LineKind::Column => &self.by_col,
        };
        &bits[start..start + self.words_per_line]
    }

    /// Members lying on `line`, ordered by position.
    pub fn line_members(&self, line: LineId) -> impl Iterator<Item = CellIndex> + '_ {
        BitIter::new(self.line_words(line), false, self.n).map(move |p| line.cell_at(p as u16))
    }

    /// Cells of `line` that are not members, ordered by position.
    pub fn line_gaps(&self, line: LineId) -> impl Iterator<Item = CellIndex> + '_ {
        BitIter::new(self.line_words(line), true, self.n).map(move |p| line.cell_at(p as u16))
    }

    /// All members in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.n as u16)
            .filter(|&r| self.row_counts[r as usize] > 0)
            .flat_map(move |r| self.line_members(LineId::row(r)))
    }
}

struct BitIter<'a> {
    words: &'a [u64],
    invert: bool,
    limit: usize,
    word: usize,
    current: u64,
}

impl<'a> BitIter<'a> {
    fn new(words: &'a [u64], invert: bool, limit: usize) -> Self {
        let current = words.first().map_or(0, |&w| if invert { !w } else { w });
        Self {
            words,
            invert,
            limit,
            word: 0,
            current,
        }
    }
}

impl Iterator for BitIter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        loop {
            if self.current != 0 {
                let bit = self.current.trailing_zeros() as usize;
                self.current &= self.current - 1;
                let pos = self.word * 64 + bit;
                return (pos < self.limit).then_some(pos);
            }
            self.word += 1;
            if self.word >= self.words.len() {
                return None;
            }
            let w = self.words[self.word];
            self.current = if self.invert { !w } else { w };
        }
    }
}
