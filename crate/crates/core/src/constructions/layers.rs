//! Membership predicates for each construction step. Every layer wraps the
//! predicate of the partition it was built from.

use std::sync::Arc;

use crate::hypercube::{vertex_mask, Membership, VertexSet};

const EVEN_POSITIONS: u64 = 0x5555_5555_5555_5555;

/// Syndrome of `x`: XOR of `i + 1` over the set bits `i`.
#[inline]
pub fn syndrome(x: u64) -> u64 {
    let mut acc = 0u64;
    let mut rest = x;
    while rest != 0 {
        let i = rest.trailing_zeros() as u64;
        acc ^= i + 1;
        rest &= rest - 1;
    }
    acc
}

/// Gathers bits 0, 2, 4, ... of `x` into the low half.
#[inline]
fn gather_even_bits(x: u64) -> u64 {
    let mut x = x & EVEN_POSITIONS;
    x = (x | (x >> 1)) & 0x3333_3333_3333_3333;
    x = (x | (x >> 2)) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | (x >> 4)) & 0x00FF_00FF_00FF_00FF;
    x = (x | (x >> 8)) & 0x0000_FFFF_0000_FFFF;
    x = (x | (x >> 16)) & 0x0000_0000_FFFF_FFFF;
    x
}

/// Spreads the low 32 bits of `x` onto positions 0, 2, 4, ...
#[inline]
fn spread_to_even_bits(x: u64) -> u64 {
    let mut x = x & 0x0000_0000_FFFF_FFFF;
    x = (x | (x << 16)) & 0x0000_FFFF_0000_FFFF;
    x = (x | (x << 8)) & 0x00FF_00FF_00FF_00FF;
    x = (x | (x << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & EVEN_POSITIONS;
    x
}

/// Pairwise section sums of the first `2m` coordinates:
/// coordinate `j` of the result is `x_{2j} xor x_{2j+1}`.
#[inline]
pub fn section_sums(x: u64, m: u32) -> u64 {
    gather_even_bits((x ^ (x >> 1)) & vertex_mask(2 * m))
}

/// Parities of consecutive length-`width` blocks of the low `blocks * width` bits.
#[inline]
pub fn block_parities(x: u64, blocks: u32, width: u32) -> u64 {
    let block_mask = vertex_mask(width);
    let mut out = 0u64;
    for b in 0..blocks {
        let parity = ((x >> (b * width)) & block_mask).count_ones() as u64 & 1;
        out |= parity << b;
    }
    out
}

/// `V2 = { x in Q_{2^s-1} : syndrome(x) in A }`.
pub(crate) struct SyndromeLevel {
    pub n: u32,
    /// Bit `a` set iff syndrome value `a` is accepted.
    pub accept: u64,
}

impl Membership for SyndromeLevel {
    fn dim(&self) -> u32 {
        self.n
    }

    #[inline]
    fn contains(&self, x: u64) -> bool {
        (self.accept >> syndrome(x)) & 1 == 1
    }
}

/// Membership read from the low `inner.dim()` coordinates.
pub(crate) struct Extended {
    pub inner: Arc<dyn Membership>,
    pub n: u32,
}

impl Membership for Extended {
    fn dim(&self) -> u32 {
        self.n
    }

    #[inline]
    fn contains(&self, x: u64) -> bool {
        self.inner.contains(x & vertex_mask(self.inner.dim()))
    }
}

/// Membership of the block-parity image.
pub(crate) struct BlownUp {
    pub inner: Arc<dyn Membership>,
    pub factor: u32,
}

impl Membership for BlownUp {
    fn dim(&self) -> u32 {
        self.inner.dim() * self.factor
    }

    #[inline]
    fn contains(&self, x: u64) -> bool {
        self.inner.contains(block_parities(x, self.inner.dim(), self.factor))
    }
}

/// Neighbor choice `N(p)` of a doubling step, stored as a mask of the
/// odd output positions `2j + 1` for `j` in `N(p)`.
pub(crate) enum ChoiceTable {
    /// Indexed by `p`; entries for vertices outside `V2` are unused.
    Dense(Vec<u64>),
    /// Sorted by vertex.
    Sparse(Vec<(u64, u64)>),
    /// `N(p)` is every direction leading from `p` into `V2`.
    AllInnerNeighbors,
}

impl ChoiceTable {
    pub(crate) fn from_sections(m: u32, entries: &[(u64, u64)]) -> Self {
        let to_positions = |sections: u64| spread_to_even_bits(sections) << 1;
        if m <= 22 {
            let mut dense = vec![0u64; 1usize << m];
            for &(p, sections) in entries {
                dense[p as usize] = to_positions(sections);
            }
            ChoiceTable::Dense(dense)
        } else {
            let mut sparse: Vec<(u64, u64)> =
                entries.iter().map(|&(p, s)| (p, to_positions(s))).collect();
            sparse.sort_unstable();
            ChoiceTable::Sparse(sparse)
        }
    }
}

/// Output of the doubling construction on `Q_{2m+l}`: `x` is in `V2` iff
/// `p = section_sums(x)` is in the input `V2` and
/// `sum_j x_{2j} + sum_{j in N(p)} x_{2j+1} + sum_{i < l} x_{2m+i} = 0`.
pub(crate) struct Doubled {
    pub inner: Arc<dyn Membership>,
    pub m: u32,
    pub l: u32,
    pub choice: ChoiceTable,
}

impl Doubled {
    #[inline]
    fn choice_positions(&self, p: u64) -> u64 {
        match &self.choice {
            ChoiceTable::Dense(table) => table[p as usize],
            ChoiceTable::Sparse(table) => match table.binary_search_by_key(&p, |e| e.0) {
                Ok(i) => table[i].1,
                Err(_) => 0,
            },
            ChoiceTable::AllInnerNeighbors => {
                let mut sections = 0u64;
                for j in 0..self.m {
                    if self.inner.contains(p ^ (1u64 << j)) {
                        sections |= 1u64 << j;
                    }
                }
                spread_to_even_bits(sections) << 1
            }
        }
    }
}

impl Membership for Doubled {
    fn dim(&self) -> u32 {
        2 * self.m + self.l
    }

    #[inline]
    fn contains(&self, x: u64) -> bool {
        let p = section_sums(x, self.m);
        if !self.inner.contains(p) {
            return false;
        }
        let paired = vertex_mask(2 * self.m);
        let first_of_pairs = x & paired & EVEN_POSITIONS;
        let chosen = x & self.choice_positions(p);
        let tail = x >> (2 * self.m);
        (first_of_pairs.count_ones() + chosen.count_ones() + tail.count_ones()) % 2 == 0
    }
}

/// A certified base stored as an explicit table.
pub(crate) struct Tabled(pub VertexSet);

impl Membership for Tabled {
    fn dim(&self) -> u32 {
        self.0.dim()
    }

    #[inline]
    fn contains(&self, x: u64) -> bool {
        self.0.get(x)
    }

    fn as_vertex_set(&self) -> Option<&VertexSet> {
        Some(&self.0)
    }
}
