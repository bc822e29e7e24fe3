//! Hypercube primitives: vertices, dense vertex sets, membership predicates,
//! and the verification passes used by the rest of the crate.
//!
//! A vertex of `Q_n` is an integer below `2^n`. Bit `i` (least significant
//! first) holds the coordinate a 1-indexed bitstring would call `x_{i+1}`.

use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constructions::ConstructionPlan;
use crate::error::{Error, Result};

/// Largest dimension whose vertex set is ever held as a dense bit array
/// (`2^28` bits = 32 MiB).
pub const MATERIALIZE_LIMIT: u32 = 28;

/// Largest dimension a vertex can be encoded in.
pub const MAX_DIMENSION: u32 = 63;

/// Sample count used by sampled verification when the caller has no opinion.
pub const DEFAULT_SAMPLE_COUNT: u64 = 10_000;

/// Below this many vertices exhaustive passes stay on the calling thread.
const PARALLEL_THRESHOLD: u64 = 1 << 16;
const CHUNK: u64 = 1 << 14;

pub fn check_dimension(n: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::ZeroDimension);
    }
    if n > MAX_DIMENSION {
        return Err(Error::DimensionTooLarge { n, max: MAX_DIMENSION });
    }
    Ok(())
}

pub fn check_materializable(n: u32) -> Result<()> {
    check_dimension(n)?;
    if n > MATERIALIZE_LIMIT {
        return Err(Error::NotMaterializable { n, limit: MATERIALIZE_LIMIT });
    }
    Ok(())
}

#[inline]
pub(crate) fn vertex_mask(n: u32) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// A vertex of `Q_n`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vertex(pub u64);

impl Vertex {
    pub fn new(value: u64, n: u32) -> Result<Self> {
        check_dimension(n)?;
        if value & !vertex_mask(n) != 0 {
            return Err(Error::VertexOutOfRange { vertex: value, n });
        }
        Ok(Vertex(value))
    }

    #[inline]
    pub fn value(self) -> u64 {
        self.0
    }

    pub fn weight(self) -> u32 {
        self.0.count_ones()
    }
}

/// Toggles bit `i` of `x` in `Q_n`.
pub fn flip(x: Vertex, i: u32, n: u32) -> Result<Vertex> {
    check_dimension(n)?;
    if i >= n {
        return Err(Error::BitOutOfRange { index: i, n });
    }
    Vertex::new(x.0, n)?;
    Ok(Vertex(x.0 ^ (1u64 << i)))
}

/// A total membership predicate over the vertices of `Q_n`.
///
/// Implementations must be pure: the answer for a vertex never changes.
pub trait Membership: Send + Sync {
    fn dim(&self) -> u32;

    fn contains(&self, x: u64) -> bool;

    /// The dense form, when this predicate already is one.
    fn as_vertex_set(&self) -> Option<&VertexSet> {
        None
    }
}

impl<M: Membership + ?Sized> Membership for Arc<M> {
    fn dim(&self) -> u32 {
        (**self).dim()
    }

    fn contains(&self, x: u64) -> bool {
        (**self).contains(x)
    }

    fn as_vertex_set(&self) -> Option<&VertexSet> {
        (**self).as_vertex_set()
    }
}

/// Number of neighbors of `x` that lie in `set`. `x` itself is not queried.
pub fn cross_degree<M: Membership + ?Sized>(set: &M, x: u64) -> u32 {
    (0..set.dim()).filter(|&i| set.contains(x ^ (1u64 << i))).count() as u32
}

/// Which side of a two-part partition a vertex lies on.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    V1,
    V2,
}

/// Dense membership over all `2^n` vertices.
#[derive(Clone, PartialEq, Eq)]
pub struct VertexSet {
    n: u32,
    words: Vec<u64>,
    size: u64,
}

#[derive(Serialize)]
struct SetRecord {
    n: u32,
    size: u64,
    hex: String,
}

impl Serialize for VertexSet {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        SetRecord { n: self.n, size: self.size, hex: hex::encode(self.to_bytes()) }.serialize(ser)
    }
}

impl std::fmt::Debug for VertexSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VertexSet").field("n", &self.n).field("size", &self.size).finish()
    }
}

fn word_count(n: u32) -> usize {
    ((1u64 << n).div_ceil(64)) as usize
}

impl VertexSet {
    pub fn empty(n: u32) -> Result<Self> {
        check_materializable(n)?;
        Ok(VertexSet { n, words: vec![0; word_count(n)], size: 0 })
    }

    pub fn from_vertices<I: IntoIterator<Item = u64>>(n: u32, vertices: I) -> Result<Self> {
        let mut set = Self::empty(n)?;
        let mask = vertex_mask(n);
        for v in vertices {
            if v & !mask != 0 {
                return Err(Error::VertexOutOfRange { vertex: v, n });
            }
            set.words[(v >> 6) as usize] |= 1u64 << (v & 63);
        }
        set.size = set.words.iter().map(|w| w.count_ones() as u64).sum();
        Ok(set)
    }

    /// Evaluates `pred` on every vertex. Large dimensions are split across
    /// the rayon pool; the result does not depend on the worker count.
    pub fn from_predicate<F>(n: u32, pred: F) -> Result<Self>
    where
        F: Fn(u64) -> bool + Sync,
    {
        check_materializable(n)?;
        let total = 1u64 << n;
        let fill = |w: usize| -> u64 {
            let base = (w as u64) << 6;
            let top = (base + 64).min(total);
            let mut word = 0u64;
            for v in base..top {
                if pred(v) {
                    word |= 1u64 << (v - base);
                }
            }
            word
        };
        let count = word_count(n);
        let words: Vec<u64> = if total >= PARALLEL_THRESHOLD {
            (0..count).into_par_iter().map(fill).collect()
        } else {
            (0..count).map(fill).collect()
        };
        let size = words.iter().map(|w| w.count_ones() as u64).sum();
        Ok(VertexSet { n, words, size })
    }

    pub fn from_membership<M: Membership + ?Sized>(set: &M) -> Result<Self> {
        if let Some(dense) = set.as_vertex_set() {
            return Ok(dense.clone());
        }
        Self::from_predicate(set.dim(), |x| set.contains(x))
    }

    pub fn dim(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> u64 {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    #[inline]
    pub fn get(&self, x: u64) -> bool {
        (self.words[(x >> 6) as usize] >> (x & 63)) & 1 == 1
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            let base = (w as u64) << 6;
            BitIter(word).map(move |b| base + b as u64)
        })
    }

    pub fn complement(&self) -> VertexSet {
        let total = 1u64 << self.n;
        let mut words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        if total < 64 {
            words[0] &= (1u64 << total) - 1;
        }
        VertexSet { n: self.n, words, size: total - self.size }
    }

    /// Little-endian byte image: vertex `v` is bit `v % 8` of byte `v / 8`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let len = ((1u64 << self.n).div_ceil(8)) as usize;
        let mut out: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.truncate(len);
        out
    }

    pub fn from_bytes(n: u32, bytes: &[u8]) -> Result<Self> {
        let mut set = Self::empty(n)?;
        let len = ((1u64 << n).div_ceil(8)) as usize;
        if bytes.len() != len {
            return Err(Error::MalformedSet(format!(
                "expected {len} bytes for n = {n}, found {}",
                bytes.len()
            )));
        }
        for (i, chunk) in bytes.chunks(8).enumerate() {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            set.words[i] = u64::from_le_bytes(buf);
        }
        let total = 1u64 << n;
        if total < 64 && set.words[0] >> total != 0 {
            return Err(Error::MalformedSet("bits set beyond 2^n".into()));
        }
        set.size = set.words.iter().map(|w| w.count_ones() as u64).sum();
        Ok(set)
    }

    pub fn write_to<W: Write>(&self, mut out: W, role: SetRole) -> Result<()> {
        let header = SetHeader { n: self.n, size: self.size, role };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        out.write_all(hex::encode(self.to_bytes()).as_bytes())?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(mut input: R) -> Result<(Self, SetRole)> {
        let mut line = String::new();
        input.read_line(&mut line)?;
        let header: SetHeader = serde_json::from_str(line.trim_end())
            .map_err(|e| Error::MalformedSet(format!("bad header: {e}")))?;
        check_materializable(header.n)?;
        let mut body = String::new();
        input.read_line(&mut body)?;
        let body = body.trim_end();
        if body.chars().any(|c| c.is_ascii_uppercase()) {
            return Err(Error::MalformedSet("hex dump must be lowercase".into()));
        }
        let bytes = hex::decode(body).map_err(|e| Error::MalformedSet(format!("bad hex: {e}")))?;
        let set = Self::from_bytes(header.n, &bytes)?;
        if set.size != header.size {
            return Err(Error::MalformedSet(format!(
                "header claims {} members, dump holds {}",
                header.size, set.size
            )));
        }
        Ok((set, header.role))
    }
}

impl Membership for VertexSet {
    fn dim(&self) -> u32 {
        self.n
    }

    #[inline]
    fn contains(&self, x: u64) -> bool {
        self.get(x)
    }

    fn as_vertex_set(&self) -> Option<&VertexSet> {
        Some(self)
    }
}

struct BitIter(u64);

impl Iterator for BitIter {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        if self.0 == 0 {
            return None;
        }
        let b = self.0.trailing_zeros();
        self.0 &= self.0 - 1;
        Some(b)
    }
}

/// What a stored vertex set represents.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetRole {
    V2,
    D,
}

#[derive(Serialize, Deserialize)]
struct SetHeader {
    n: u32,
    size: u64,
    role: SetRole,
}

/// A lazily evaluated two-part partition of `Q_n`; `contains` answers
/// membership in `V2`.
#[derive(Clone)]
pub struct PartitionOracle {
    n: u32,
    d1: u32,
    d2: u32,
    membership: Arc<dyn Membership>,
    plan: ConstructionPlan,
}

impl std::fmt::Debug for PartitionOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PartitionOracle")
            .field("n", &self.n)
            .field("d1", &self.d1)
            .field("d2", &self.d2)
            .finish()
    }
}

impl PartitionOracle {
    pub(crate) fn new(
        membership: Arc<dyn Membership>,
        d1: u32,
        d2: u32,
        plan: ConstructionPlan,
    ) -> Result<Self> {
        let n = membership.dim();
        check_dimension(n)?;
        if crate::constructions::necessary_condition(d1, d2, n).is_err() {
            return Err(Error::NecessaryCondition { d1, d2, n });
        }
        Ok(PartitionOracle { n, d1, d2, membership, plan })
    }

    pub fn d1(&self) -> u32 {
        self.d1
    }

    pub fn d2(&self) -> u32 {
        self.d2
    }

    pub fn plan(&self) -> &ConstructionPlan {
        &self.plan
    }

    pub fn side(&self, x: u64) -> Side {
        if self.membership.contains(x) {
            Side::V2
        } else {
            Side::V1
        }
    }

    /// `|V2|` implied by the claimed degrees: `d1 * 2^n / (d1 + d2)`.
    pub fn expected_v2_size(&self) -> u64 {
        expected_v2_size(self.n, self.d1, self.d2)
    }

    /// Dense `V2`, cross-checked against the count law.
    pub fn materialize(&self) -> Result<VertexSet> {
        check_materializable(self.n)?;
        let set = VertexSet::from_membership(&*self.membership)?;
        let expected = self.expected_v2_size();
        if set.len() != expected {
            return Err(Error::SizeMismatch { expected, actual: set.len() });
        }
        Ok(set)
    }

    pub fn verify(&self, mode: VerifyMode) -> Result<VerificationReport> {
        verify_regular(&*self.membership, self.d1, self.d2, mode)
    }

    pub(crate) fn membership(&self) -> &Arc<dyn Membership> {
        &self.membership
    }
}

impl Membership for PartitionOracle {
    fn dim(&self) -> u32 {
        self.n
    }

    #[inline]
    fn contains(&self, x: u64) -> bool {
        self.membership.contains(x)
    }

    fn as_vertex_set(&self) -> Option<&VertexSet> {
        self.membership.as_vertex_set()
    }
}

pub(crate) fn expected_v2_size(n: u32, d1: u32, d2: u32) -> u64 {
    ((d1 as u128 * (1u128 << n)) / (d1 + d2) as u128) as u64
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    Exhaustive,
    Sampled { count: u64, seed: u64 },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Valid,
    Invalid,
}

/// Cross-degrees observed on one side of the partition.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservedDegree {
    /// No vertex of this side was checked.
    Absent,
    Uniform(u32),
    Mixed,
}

impl ObservedDegree {
    fn observe(self, d: u32) -> Self {
        match self {
            ObservedDegree::Absent => ObservedDegree::Uniform(d),
            ObservedDegree::Uniform(e) if e == d => self,
            _ => ObservedDegree::Mixed,
        }
    }

    fn merge(self, other: Self) -> Self {
        match other {
            ObservedDegree::Absent => self,
            ObservedDegree::Uniform(d) => self.observe(d),
            ObservedDegree::Mixed => ObservedDegree::Mixed,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub vertex: u64,
    pub side: Side,
    /// Neighbors on the opposite side.
    pub cross_degree: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub verdict: Verdict,
    pub observed_d1: ObservedDegree,
    pub observed_d2: ObservedDegree,
    pub first_violation: Option<Violation>,
    pub vertices_checked: u64,
    pub mode: VerifyMode,
}

#[derive(Clone, Copy)]
struct Tally {
    d1: ObservedDegree,
    d2: ObservedDegree,
    violation: Option<Violation>,
    checked: u64,
}

impl Tally {
    const EMPTY: Tally = Tally {
        d1: ObservedDegree::Absent,
        d2: ObservedDegree::Absent,
        violation: None,
        checked: 0,
    };

    fn record(&mut self, x: u64, in_v2: bool, to_v2: u32, n: u32, d1: u32, d2: u32) {
        self.checked += 1;
        let (side, cross, want) = if in_v2 {
            (Side::V2, n - to_v2, d2)
        } else {
            (Side::V1, to_v2, d1)
        };
        match side {
            Side::V1 => self.d1 = self.d1.observe(cross),
            Side::V2 => self.d2 = self.d2.observe(cross),
        }
        if cross != want && self.violation.is_none() {
            self.violation = Some(Violation { vertex: x, side, cross_degree: cross });
        }
    }

    /// `self` covers vertices that come before `later`'s.
    fn then(self, later: Tally) -> Tally {
        Tally {
            d1: self.d1.merge(later.d1),
            d2: self.d2.merge(later.d2),
            violation: self.violation.or(later.violation),
            checked: self.checked + later.checked,
        }
    }
}

/// Checks that every `V1` vertex has `d1` neighbors in `V2` and every `V2`
/// vertex has `d2` neighbors in `V1`, where `v2` is the membership of `V2`.
pub fn verify_regular<M: Membership + ?Sized>(
    v2: &M,
    d1: u32,
    d2: u32,
    mode: VerifyMode,
) -> Result<VerificationReport> {
    let n = v2.dim();
    check_dimension(n)?;
    let tally = match mode {
        VerifyMode::Exhaustive => {
            check_materializable(n)?;
            let owned;
            let dense = match v2.as_vertex_set() {
                Some(d) => d,
                None => {
                    owned = VertexSet::from_membership(v2)?;
                    &owned
                }
            };
            exhaustive_tally(dense, d1, d2)
        }
        VerifyMode::Sampled { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mask = vertex_mask(n);
            let sample: Vec<u64> = (0..count).map(|_| rng.gen::<u64>() & mask).collect();
            let degrees: Vec<(bool, u32)> = sample
                .par_iter()
                .map(|&x| (v2.contains(x), cross_degree(v2, x)))
                .collect();
            let mut tally = Tally::EMPTY;
            for (&x, &(in_v2, to_v2)) in sample.iter().zip(&degrees) {
                tally.record(x, in_v2, to_v2, n, d1, d2);
            }
            tally
        }
    };
    Ok(VerificationReport {
        verdict: if tally.violation.is_none() { Verdict::Valid } else { Verdict::Invalid },
        observed_d1: tally.d1,
        observed_d2: tally.d2,
        first_violation: tally.violation,
        vertices_checked: tally.checked,
        mode,
    })
}

fn exhaustive_tally(set: &VertexSet, d1: u32, d2: u32) -> Tally {
    let n = set.dim();
    let total = 1u64 << n;
    let run = |lo: u64, hi: u64| {
        let mut tally = Tally::EMPTY;
        for x in lo..hi {
            tally.record(x, set.get(x), cross_degree(set, x), n, d1, d2);
        }
        tally
    };
    if total < PARALLEL_THRESHOLD {
        return run(0, total);
    }
    let chunks: Vec<Tally> = (0..total / CHUNK)
        .into_par_iter()
        .map(|c| run(c * CHUNK, (c + 1) * CHUNK))
        .collect();
    chunks.into_iter().fold(Tally::EMPTY, Tally::then)
}

/// Outcome of a k-domination check.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Domination {
    Dominating,
    /// A vertex outside the set with fewer than `k` neighbors inside it.
    Violated { witness: Vertex, neighbors_in_set: u32 },
}

impl Domination {
    pub fn holds(&self) -> bool {
        matches!(self, Domination::Dominating)
    }
}

/// Whether every vertex outside `set` has at least `k` neighbors in it.
/// The reported witness is the smallest violating vertex.
pub fn is_k_dominating(set: &VertexSet, k: u32) -> Domination {
    let total = 1u64 << set.dim();
    for x in 0..total {
        if set.get(x) {
            continue;
        }
        let c = cross_degree(set, x);
        if c < k {
            return Domination::Violated { witness: Vertex(x), neighbors_in_set: c };
        }
    }
    Domination::Dominating
}
