//! Nodes of the `2^d`-ary dyadic tree and their cube geometry.
//!
//! A word of depth `j` over the alphabet `{0,1}^d` encodes the dyadic cube
//! `I_w = prod_i [x_i, x_i + 2^-j]` of side `2^-j` in `[0,1]^d`. Letter `k`
//! (1-based) carries one bit per axis: bit `i` of the letter is the `k`-th
//! binary digit of the anchor coordinate along axis `i`.

use crate::{LabError, Result};

/// A node of the `2^d`-ary tree: a finite word over `{0,1}^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DyadicWord {
    dimension: u8,
    letters: Vec<u8>,
}

impl DyadicWord {
    /// The empty word (the tree root) in dimension `d`.
    pub fn root(dimension: u8) -> Self {
        assert!(dimension >= 1 && dimension <= 8, "dimension must be in 1..=8");
        DyadicWord { dimension, letters: Vec::new() }
    }

    /// Builds a word from explicit letters, each in `0..2^d`.
    pub fn from_letters(dimension: u8, letters: &[u8]) -> Result<Self> {
        assert!(dimension >= 1 && dimension <= 8, "dimension must be in 1..=8");
        let alphabet = 1u16 << dimension;
        for (k, &l) in letters.iter().enumerate() {
            if (l as u16) >= alphabet {
                return Err(LabError::invalid(format!(
                    "letter {l} at position {} out of range for d={dimension}",
                    k + 1
                )));
            }
        }
        Ok(DyadicWord { dimension, letters: letters.to_vec() })
    }

    /// Decodes the depth-`depth` word with the given tree index
    /// (base-`2^d` digits, most significant digit first).
    pub fn from_tree_index(dimension: u8, depth: u32, index: u64) -> Self {
        assert!(
            (dimension as u32) * depth <= 64,
            "d*depth must fit in 64 bits for index decoding"
        );
        let mut letters = Vec::with_capacity(depth as usize);
        let mask = (1u64 << dimension) - 1;
        for k in 1..=depth {
            let shift = (dimension as u32) * (depth - k);
            letters.push(((index >> shift) & mask) as u8);
        }
        DyadicWord { dimension, letters }
    }

    /// Parses a word from its letter digits, e.g. `"0110"` (d=1) or `"0231"` (d=2).
    pub fn parse(dimension: u8, text: &str) -> Result<Self> {
        let mut letters = Vec::with_capacity(text.len());
        for c in text.chars() {
            let v = c
                .to_digit(16)
                .ok_or_else(|| LabError::invalid(format!("bad letter digit {c:?}")))?;
            letters.push(v as u8);
        }
        Self::from_letters(dimension, &letters)
    }

    pub fn dimension(&self) -> u8 {
        self.dimension
    }

    /// Depth (generation) `j = |w|`.
    pub fn depth(&self) -> u32 {
        self.letters.len() as u32
    }

    pub fn is_root(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[u8] {
        &self.letters
    }

    /// Tree index: base-`2^d` digits, most significant first. The ancestor at
    /// depth `J` of a depth-`j` word is `index >> d*(j-J)`.
    pub fn tree_index(&self) -> u64 {
        assert!((self.dimension as usize) * self.letters.len() <= 64);
        let mut idx = 0u64;
        for &l in &self.letters {
            idx = (idx << self.dimension) | l as u64;
        }
        idx
    }

    /// Appends one letter.
    pub fn push(&mut self, letter: u8) {
        debug_assert!((letter as u16) < (1u16 << self.dimension));
        self.letters.push(letter);
    }

    /// Concatenation `w v`.
    pub fn concat(&self, tail: &DyadicWord) -> Result<DyadicWord> {
        if tail.dimension != self.dimension {
            return Err(LabError::DimensionMismatch {
                word: tail.dimension,
                expected: self.dimension,
            });
        }
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&tail.letters);
        Ok(DyadicWord { dimension: self.dimension, letters })
    }

    /// Prefix of length `j` (must satisfy `j <= depth`).
    pub fn prefix(&self, j: u32) -> DyadicWord {
        assert!(j <= self.depth());
        DyadicWord {
            dimension: self.dimension,
            letters: self.letters[..j as usize].to_vec(),
        }
    }

    /// The shifted word `sigma^j w`: drops the first `j` letters.
    pub fn shift(&self, j: u32) -> DyadicWord {
        assert!(j <= self.depth());
        DyadicWord {
            dimension: self.dimension,
            letters: self.letters[j as usize..].to_vec(),
        }
    }

    /// Per-axis index: the binary digits of the anchor along axis `i`, most
    /// significant first, so the cube along that axis is
    /// `[index * 2^-j, (index+1) * 2^-j]`.
    pub fn axis_index(&self, axis: u8) -> u64 {
        assert!(axis < self.dimension);
        assert!(self.letters.len() <= 63);
        let mut idx = 0u64;
        for &l in &self.letters {
            idx = (idx << 1) | ((l >> axis) & 1) as u64;
        }
        idx
    }

    /// Per-axis little-endian packing (first letter = least significant bit);
    /// this is the survivor-dump CSV encoding.
    pub fn axis_index_le(&self, axis: u8) -> u64 {
        assert!(axis < self.dimension);
        assert!(self.letters.len() <= 63);
        let mut idx = 0u64;
        for (k, &l) in self.letters.iter().enumerate() {
            idx |= (((l >> axis) & 1) as u64) << k;
        }
        idx
    }

    /// Anchor point `x_w`, one coordinate per axis, each in `[0, 1-2^-j]`.
    pub fn anchor(&self) -> Vec<f64> {
        let j = self.depth();
        (0..self.dimension)
            .map(|axis| self.axis_index(axis) as f64 / (1u64 << j) as f64)
            .collect()
    }

    /// The neighbor set `N(w)`: words of the same depth whose cube touches
    /// `I_w`, excluding `w` itself. At most `3^d - 1` members; boundary cubes
    /// simply have fewer (no wraparound).
    pub fn neighbors(&self) -> Vec<DyadicWord> {
        let j = self.depth();
        if j == 0 {
            return Vec::new();
        }
        let d = self.dimension;
        let axes: Vec<u64> = (0..d).map(|a| self.axis_index(a)).collect();
        let side = 1u64 << j;
        let mut out = Vec::new();
        let mut offsets = vec![0i64; d as usize];
        loop {
            if offsets.iter().any(|&o| o != 0) {
                let mut ok = true;
                let mut nb_axes = Vec::with_capacity(d as usize);
                for (a, &off) in offsets.iter().enumerate() {
                    let v = axes[a] as i64 + off;
                    if v < 0 || v >= side as i64 {
                        ok = false;
                        break;
                    }
                    nb_axes.push(v as u64);
                }
                if ok {
                    out.push(Self::from_axis_indices(d, j, &nb_axes));
                }
            }
            // odometer over {-1,0,1}^d
            let mut carry = true;
            for o in offsets.iter_mut() {
                if carry {
                    *o += 1;
                    if *o > 1 {
                        *o = -1;
                    } else {
                        carry = false;
                    }
                }
            }
            if carry {
                break;
            }
        }
        out
    }

    /// Rebuilds a word from per-axis (most-significant-first) indices.
    pub fn from_axis_indices(dimension: u8, depth: u32, axes: &[u64]) -> DyadicWord {
        assert_eq!(axes.len(), dimension as usize);
        let mut letters = Vec::with_capacity(depth as usize);
        for k in 1..=depth {
            let shift = depth - k;
            let mut letter = 0u8;
            for (a, &idx) in axes.iter().enumerate() {
                letter |= (((idx >> shift) & 1) as u8) << a;
            }
            letters.push(letter);
        }
        DyadicWord { dimension, letters }
    }
}

impl std::fmt::Display for DyadicWord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "(root)");
        }
        for &l in &self.letters {
            write!(f, "{:x}", l)?;
        }
        Ok(())
    }
}

/// Writes the tree indices of `N(w) ∪ {w}` for the depth-`depth` word with
/// tree index `index` into `out`. Index-level twin of [`DyadicWord::neighbors`]
/// used on the hot path of the grid build.
pub fn neighborhood_indices(dimension: u8, depth: u32, index: u64, out: &mut Vec<u64>) {
    out.clear();
    if depth == 0 {
        out.push(0);
        return;
    }
    let side = 1u64 << depth;
    if dimension == 1 {
        if index > 0 {
            out.push(index - 1);
        }
        out.push(index);
        if index + 1 < side {
            out.push(index + 1);
        }
        return;
    }
    let d = dimension;
    // de-interleave into per-axis indices
    let mut axes = [0u64; 8];
    for k in 0..depth {
        let letter = (index >> ((d as u32) * k)) & ((1u64 << d) - 1);
        for a in 0..d as usize {
            axes[a] |= ((letter >> a) & 1) << k;
        }
    }
    let mut offsets = [-1i64; 8];
    offsets[..d as usize].iter_mut().for_each(|o| *o = -1);
    loop {
        let mut ok = true;
        let mut nb = 0u64;
        for k in (0..depth).rev() {
            let mut letter = 0u64;
            for a in 0..d as usize {
                let v = axes[a] as i64 + offsets[a];
                if v < 0 || v >= side as i64 {
                    ok = false;
                    break;
                }
                letter |= ((v as u64 >> k) & 1) << a;
            }
            if !ok {
                break;
            }
            nb = (nb << d) | letter;
        }
        if ok {
            out.push(nb);
        }
        let mut carry = true;
        for o in offsets[..d as usize].iter_mut() {
            if carry {
                *o += 1;
                if *o > 1 {
                    *o = -1;
                } else {
                    carry = false;
                }
            }
        }
        if carry {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchor_matches_binary_expansion() {
        // w = 011 in d=1: x_w = 0*1/2 + 1/4 + 1/8 = 0.375
        let w = DyadicWord::parse(1, "011").unwrap();
        assert_eq!(w.anchor(), vec![0.375]);
        assert_eq!(w.tree_index(), 0b011);
        assert_eq!(w.axis_index_le(0), 0b110);
    }

    #[test]
    fn anchor_in_unit_cube() {
        let w = DyadicWord::from_tree_index(2, 5, 0b10_11_00_01_11);
        for (x, _) in w.anchor().iter().zip(0..) {
            assert!(*x >= 0.0 && *x <= 1.0 - 2f64.powi(-5));
        }
    }

    #[test]
    fn neighbor_counts_and_symmetry() {
        // interior cube in d=2 has 3^2-1 = 8 neighbors, corner has 3
        let interior = DyadicWord::from_axis_indices(2, 3, &[3, 4]);
        assert_eq!(interior.neighbors().len(), 8);
        let corner = DyadicWord::from_axis_indices(2, 3, &[0, 0]);
        assert_eq!(corner.neighbors().len(), 3);
        // symmetry: u in N(w) iff w in N(u)
        for u in interior.neighbors() {
            assert!(u.neighbors().contains(&interior));
        }
    }

    #[test]
    fn neighborhood_indices_agree_with_words() {
        let mut out = Vec::new();
        for d in 1..=2u8 {
            for depth in 1..=4u32 {
                let cells = 1u64 << (d as u32 * depth);
                for idx in 0..cells {
                    let w = DyadicWord::from_tree_index(d, depth, idx);
                    let mut expect: Vec<u64> =
                        w.neighbors().iter().map(|n| n.tree_index()).collect();
                    expect.push(idx);
                    expect.sort_unstable();
                    neighborhood_indices(d, depth, idx, &mut out);
                    out.sort_unstable();
                    assert_eq!(out, expect, "d={d} depth={depth} idx={idx}");
                }
            }
        }
    }

    #[test]
    fn shift_and_prefix_recompose() {
        let w = DyadicWord::parse(1, "010011").unwrap();
        let p = w.prefix(2);
        let s = w.shift(2);
        assert_eq!(p.concat(&s).unwrap(), w);
    }

    #[test]
    fn tree_index_roundtrip() {
        for idx in 0..64u64 {
            let w = DyadicWord::from_tree_index(2, 3, idx);
            assert_eq!(w.tree_index(), idx);
        }
    }
}
