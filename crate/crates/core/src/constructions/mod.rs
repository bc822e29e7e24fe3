//! Building regular partitions of the hypercube: the syndrome base, dimension
//! extension, blow-up, doubling, and a planner that chains them into a
//! `(k, n)`-regular partition of `Q_n`.
//!
//! A partition is built step by step; every step is recorded in a
//! [`ConstructionPlan`], and [`execute`] replays a plan to the identical oracle.

mod layers;

use std::fmt;
use std::sync::Arc;

use num_integer::Integer;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cover::{CoverOutcome, ExactCover};
use crate::error::{Error, Result};
use crate::hypercube::{
    check_dimension, verify_regular, Membership, PartitionOracle, Verdict, VerifyMode, VertexSet,
};
use layers::{BlownUp, ChoiceTable, Doubled, Extended, SyndromeLevel, Tabled};

pub use layers::{block_parities, section_sums, syndrome};

/// Largest doubling input for which the neighbor choice is found by exact cover.
pub const COVER_DIMENSION_LIMIT: u32 = 20;

/// Intermediates up to this dimension are materialized after each step to
/// check `|V2| = d1 * 2^n / (d1 + d2)`.
pub const COUNT_CHECK_LIMIT: u32 = 20;

const COVER_NODE_BUDGET: u64 = 50_000_000;

/// A `(5, 3)`-regular partition of `Q_7`, vertex `v` at bit `v`.
const CERTIFIED_Q7_T5: u128 = 0xd96b_3ee5_a77c_d69b_d96b_3ee5_a77c_d69b;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConditionFailure {
    DegreeOutOfRange { d1: u32, d2: u32, n: u32 },
    NotPowerOfTwo { ratio: u64 },
    ExponentTooLarge { s: u32, n: u32 },
}

impl fmt::Display for ConditionFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ConditionFailure::DegreeOutOfRange { d1, d2, n } => {
                write!(f, "degrees ({d1},{d2}) must lie in [1, {n}]")
            }
            ConditionFailure::NotPowerOfTwo { ratio } => {
                write!(f, "(d1+d2)/gcd(d1,d2) = {ratio} is not a power of two")
            }
            ConditionFailure::ExponentTooLarge { s, n } => {
                write!(f, "(d1+d2)/gcd(d1,d2) = 2^{s} exceeds 2^{n}")
            }
        }
    }
}

/// Divisibility condition every `(d1, d2)`-regular partition of `Q_n`
/// satisfies. Returns the exponent `s` with `(d1+d2)/gcd(d1,d2) = 2^s`.
pub fn necessary_condition(d1: u32, d2: u32, n: u32) -> Result<u32, ConditionFailure> {
    if d1 == 0 || d2 == 0 || d1 > n || d2 > n {
        return Err(ConditionFailure::DegreeOutOfRange { d1, d2, n });
    }
    let g = d1.gcd(&d2);
    let ratio = ((d1 + d2) / g) as u64;
    if !ratio.is_power_of_two() {
        return Err(ConditionFailure::NotPowerOfTwo { ratio });
    }
    let s = ratio.trailing_zeros();
    if s > n {
        return Err(ConditionFailure::ExponentTooLarge { s, n });
    }
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseRealization {
    /// Accepted syndrome values `A`.
    Syndrome(Vec<u64>),
    /// Explicit `V2`, hex of the little-endian bit array.
    Table(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiceRule {
    /// `N(p)` is the direction set of the subcube containing `p` in the first
    /// exact cover of the input `V2` by `(r - l)`-dimensional subcubes.
    ExactCover,
    /// `N(p)` is every direction from `p` into `V2`; used when `t - r = 1`,
    /// where the input `V2` induces a perfect matching.
    AllInnerNeighbors,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborChoice {
    pub rule: ChoiceRule,
    /// SHA-256 of the cached table, filled in by execution.
    pub digest: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum ConstructionStep {
    Base { s: u32, t: u32, realization: BaseRealization },
    Extend { extra_dims: u32 },
    BlowUp { factor: u32 },
    Double { t: u32, s: u32, r: u32, choice: NeighborChoice },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructionPlan {
    pub target_n: u32,
    pub target_d1: u32,
    pub target_d2: u32,
    pub steps: Vec<ConstructionStep>,
}

impl ConstructionPlan {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("plans serialize");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plan: ConstructionPlan = serde_json::from_str(text)?;
        if plan.steps.is_empty() {
            return Err(Error::MalformedPlan("plan has no steps".into()));
        }
        Ok(plan)
    }

    fn extended(&self, step: ConstructionStep, n: u32, d1: u32, d2: u32) -> Self {
        let mut steps = self.steps.clone();
        steps.push(step);
        ConstructionPlan { target_n: n, target_d1: d1, target_d2: d2, steps }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Infeasibility {
    /// `(n + k) / gcd(n, k)` is not a power of two.
    Divisibility { n: u32, k: u32 },
    /// `2k + 1 > n` with `k < n`.
    TooFewPlayers { n: u32, k: u32 },
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Infeasibility::Divisibility { n, k } => {
                write!(f, "(n+k)/gcd(n,k) is not a power of two for n={n}, k={k}")
            }
            Infeasibility::TooFewPlayers { .. } => write!(f, "2k+1 > n"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum PlanOutcome {
    Feasible { plan: ConstructionPlan },
    Infeasible { reason: Infeasibility },
    Unknown { reason: String },
}

fn check_game_parameters(n: u32, k: u32) -> Result<()> {
    check_dimension(n)?;
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= n, got n={n}, k={k}")));
    }
    Ok(())
}

/// The screens that rule out a `(k, n)`-regular partition of `Q_n`.
pub(crate) fn screen(n: u32, k: u32) -> Option<Infeasibility> {
    let g = n.gcd(&k);
    if !((n + k) / g).is_power_of_two() {
        return Some(Infeasibility::Divisibility { n, k });
    }
    if n >= 2 && k < n && 2 * k + 1 > n {
        return Some(Infeasibility::TooFewPlayers { n, k });
    }
    None
}

fn ceil_log2(x: u32) -> u32 {
    32 - (x - 1).leading_zeros()
}

fn choice_rule(t: u32, r: u32) -> ChoiceRule {
    if t - r == 1 {
        ChoiceRule::AllInnerNeighbors
    } else {
        ChoiceRule::ExactCover
    }
}

fn double_step(t: u32, s: u32, r: u32) -> ConstructionStep {
    ConstructionStep::Double {
        t,
        s,
        r,
        choice: NeighborChoice { rule: choice_rule(t, r), digest: None },
    }
}

fn default_base_step(s: u32, t: u32) -> ConstructionStep {
    let realization = match certified_base(s, t) {
        Some(table) => BaseRealization::Table(hex::encode(table.to_bytes())),
        None => BaseRealization::Syndrome((0..t as u64).collect()),
    };
    ConstructionStep::Base { s, t, realization }
}

/// Plans a `(k, n)`-regular partition of `Q_n`, which exists exactly when the
/// pair `(n, k)` is perfect.
pub fn plan(n: u32, k: u32) -> Result<PlanOutcome> {
    check_game_parameters(n, k)?;
    if let Some(reason) = screen(n, k) {
        return Ok(PlanOutcome::Infeasible { reason });
    }
    let g = n.gcd(&k);
    let (n0, k0) = (n / g, k / g);
    let s = (n0 + k0).trailing_zeros();
    let mut steps = Vec::new();
    if k0 == 1 {
        steps.push(default_base_step(s, 1));
    } else {
        let s0 = ceil_log2(k0);
        if s < 2 * s0 {
            return Ok(PlanOutcome::Unknown {
                reason: format!(
                    "exponent {s} lies in the unresolved range [{s0}, {}) for k0={k0}",
                    2 * s0
                ),
            });
        }
        steps.push(default_base_step(s0, k0));
        let mut current = s0;
        let mut deficit = 1;
        while deficit < k0 {
            steps.push(double_step(k0, current, deficit));
            deficit = k0.min(2 * deficit);
            current += 1;
        }
        while current < s {
            steps.push(ConstructionStep::Extend { extra_dims: 1 });
            steps.push(double_step(k0, current, k0 - 1));
            current += 1;
        }
    }
    if g > 1 {
        steps.push(ConstructionStep::BlowUp { factor: g });
    }
    Ok(PlanOutcome::Feasible {
        plan: ConstructionPlan { target_n: n, target_d1: k, target_d2: n, steps },
    })
}

fn certified_base(s: u32, t: u32) -> Option<VertexSet> {
    match (s, t) {
        (3, 5) => Some(
            VertexSet::from_bytes(7, &CERTIFIED_Q7_T5.to_le_bytes()).expect("table fits Q_7"),
        ),
        _ => None,
    }
}

fn check_base_parameters(s: u32, t: u32) -> Result<()> {
    if s == 0 || s > 6 {
        return Err(Error::InvalidParameter(format!("base exponent s={s} must be in [1, 6]")));
    }
    if t == 0 || t >= 1 << s {
        return Err(Error::InvalidParameter(format!("need 0 < t < 2^s, got s={s}, t={t}")));
    }
    Ok(())
}

fn with_count_check(oracle: PartitionOracle) -> Result<PartitionOracle> {
    if oracle.dim() <= COUNT_CHECK_LIMIT {
        oracle.materialize()?;
    }
    Ok(oracle)
}

/// The `(t, 2^s - t)`-regular partition of `Q_{2^s - 1}` whose `V2` is the
/// preimage of `A` under the syndrome map. `A` defaults to `{0, ..., t-1}`.
pub fn base_partition(s: u32, t: u32, a: Option<&[u64]>) -> Result<PartitionOracle> {
    check_base_parameters(s, t)?;
    let accepted: Vec<u64> = match a {
        Some(values) => values.to_vec(),
        None => (0..t as u64).collect(),
    };
    let mut accept = 0u64;
    for &v in &accepted {
        if v >= 1 << s || accept & (1 << v) != 0 {
            return Err(Error::InvalidParameter(format!(
                "syndrome set must hold distinct values below 2^{s}"
            )));
        }
        accept |= 1 << v;
    }
    if accepted.len() != t as usize {
        return Err(Error::InvalidParameter(format!("|A| = {} but t = {t}", accepted.len())));
    }
    let n = (1u32 << s) - 1;
    let step = ConstructionStep::Base { s, t, realization: BaseRealization::Syndrome(accepted) };
    let d2 = (1 << s) - t;
    let plan = ConstructionPlan { target_n: n, target_d1: t, target_d2: d2, steps: vec![step] };
    with_count_check(PartitionOracle::new(Arc::new(SyndromeLevel { n, accept }), t, d2, plan)?)
}

/// A base partition given by an explicit table, checked exhaustively.
fn table_partition(s: u32, t: u32, hex_table: &str) -> Result<PartitionOracle> {
    check_base_parameters(s, t)?;
    let n = (1u32 << s) - 1;
    let bytes = hex::decode(hex_table)
        .map_err(|e| Error::MalformedPlan(format!("base table is not hex: {e}")))?;
    let table = VertexSet::from_bytes(n, &bytes)?;
    let d2 = (1 << s) - t;
    let report = verify_regular(&table, t, d2, VerifyMode::Exhaustive)?;
    if report.verdict != Verdict::Valid {
        return Err(Error::MalformedPlan(format!(
            "base table is not a ({t},{d2})-regular partition of Q_{n}"
        )));
    }
    let step = ConstructionStep::Base {
        s,
        t,
        realization: BaseRealization::Table(hex_table.to_owned()),
    };
    let plan = ConstructionPlan { target_n: n, target_d1: t, target_d2: d2, steps: vec![step] };
    with_count_check(PartitionOracle::new(Arc::new(Tabled(table)), t, d2, plan)?)
}

/// Copies `p` across `m - n` new coordinates.
pub fn extend_dimension(p: &PartitionOracle, m: u32) -> Result<PartitionOracle> {
    let n = p.dim();
    if m < n {
        return Err(Error::InvalidParameter(format!("cannot extend Q_{n} down to Q_{m}")));
    }
    check_dimension(m)?;
    if m == n {
        return Ok(p.clone());
    }
    let step = ConstructionStep::Extend { extra_dims: m - n };
    let plan = p.plan().extended(step, m, p.d1(), p.d2());
    let layer = Extended { inner: p.membership().clone(), n: m };
    with_count_check(PartitionOracle::new(Arc::new(layer), p.d1(), p.d2(), plan)?)
}

/// Replaces each coordinate by `d` coordinates classified by their parity.
pub fn blow_up(p: &PartitionOracle, d: u32) -> Result<PartitionOracle> {
    if d == 0 {
        return Err(Error::InvalidParameter("blow-up factor must be at least 1".into()));
    }
    if d == 1 {
        return Ok(p.clone());
    }
    let n = p.dim().checked_mul(d).unwrap_or(u32::MAX);
    check_dimension(n)?;
    let (d1, d2) = (p.d1() * d, p.d2() * d);
    let plan = p.plan().extended(ConstructionStep::BlowUp { factor: d }, n, d1, d2);
    let layer = BlownUp { inner: p.membership().clone(), factor: d };
    with_count_check(PartitionOracle::new(Arc::new(layer), d1, d2, plan)?)
}

/// Doubles a `(t, 2^s - t)`-regular partition of `Q_{2^s - r}` into a
/// `(t, 2^{s+1} - t)`-regular partition of `Q_{2^{s+1} - min(t, 2r)}`.
pub fn double(p: &PartitionOracle, t: u32, s: u32, r: u32) -> Result<PartitionOracle> {
    if t <= r {
        return Err(Error::DoublingPrecondition { t, r });
    }
    double_with(p, t, s, r, &NeighborChoice { rule: choice_rule(t, r), digest: None })
}

fn double_with(
    p: &PartitionOracle,
    t: u32,
    s: u32,
    r: u32,
    requested: &NeighborChoice,
) -> Result<PartitionOracle> {
    if t <= r {
        return Err(Error::DoublingPrecondition { t, r });
    }
    if s == 0 || s >= 32 || r >= 1 << s || t >= 1 << s {
        return Err(Error::InvalidParameter(format!("bad doubling parameters s={s}, t={t}, r={r}")));
    }
    let m = (1u32 << s) - r;
    if p.dim() != m || p.d1() != t || p.d2() != (1 << s) - t {
        return Err(Error::InvalidParameter(format!(
            "doubling with t={t}, s={s}, r={r} needs a ({t},{})-regular partition of Q_{m}, got ({},{}) on Q_{}",
            (1u32 << s) - t,
            p.d1(),
            p.d2(),
            p.dim()
        )));
    }
    let reach = t.min(2 * r);
    let l = 2 * r - reach;
    let n = 2 * m + l;
    check_dimension(n)?;
    let d2 = (1u32 << (s + 1)) - t;

    let (inner, table, digest): (Arc<dyn Membership>, ChoiceTable, Option<String>) =
        match requested.rule {
            ChoiceRule::AllInnerNeighbors => {
                if t - r != 1 {
                    return Err(Error::MalformedPlan(format!(
                        "all-inner-neighbors choice needs t - r = 1, got t={t}, r={r}"
                    )));
                }
                (p.membership().clone(), ChoiceTable::AllInnerNeighbors, None)
            }
            ChoiceRule::ExactCover => {
                if m > COVER_DIMENSION_LIMIT {
                    return Err(Error::NotMaterializable { n: m, limit: COVER_DIMENSION_LIMIT });
                }
                let dense = p.materialize()?;
                let entries = subcube_cover(&dense, reach - r)?;
                let digest = table_digest(&entries);
                let table = ChoiceTable::from_sections(m, &entries);
                (Arc::new(Tabled(dense)), table, Some(digest))
            }
        };
    if let (Some(expected), Some(actual)) = (&requested.digest, &digest) {
        if expected != actual {
            return Err(Error::DigestMismatch { expected: expected.clone(), actual: actual.clone() });
        }
    }
    let step = ConstructionStep::Double {
        t,
        s,
        r,
        choice: NeighborChoice { rule: requested.rule, digest },
    };
    let plan = p.plan().extended(step, n, t, d2);
    let layer = Doubled { inner, m, l, choice: table };
    with_count_check(PartitionOracle::new(Arc::new(layer), t, d2, plan)?)
}

/// Splits `v2` into disjoint `dim`-dimensional subcubes. Returns, sorted by
/// vertex, each vertex with the direction mask of its subcube.
fn subcube_cover(v2: &VertexSet, dim: u32) -> Result<Vec<(u64, u64)>> {
    let m = v2.dim();
    let vertices: Vec<u64> = v2.iter().collect();
    let mut index = vec![u32::MAX; 1usize << m];
    for (i, &p) in vertices.iter().enumerate() {
        index[p as usize] = i as u32;
    }
    let mut candidates: Vec<(Vec<u32>, u64, u64, Vec<usize>)> = Vec::new();
    let mut members = Vec::with_capacity(1 << dim);
    for &p in &vertices {
        // Subcubes are listed once, from their lowest vertex.
        let up: u64 = (0..m)
            .filter(|&j| p >> j & 1 == 0 && v2.get(p | 1 << j))
            .fold(0, |acc, j| acc | 1 << j);
        let mut dirs = up;
        loop {
            if dirs.count_ones() == dim && cube_members(v2, &index, p, dirs, &mut members) {
                let key = (0..m).filter(|&j| dirs >> j & 1 == 1).collect();
                candidates.push((key, p, dirs, members.clone()));
            }
            if dirs == 0 {
                break;
            }
            dirs = (dirs - 1) & up;
        }
    }
    // Each item then sees its subcubes in lexicographic order of directions.
    candidates.sort_unstable_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
    let mut cover = ExactCover::new(vertices.len());
    let mut options: Vec<(u64, u64)> = Vec::with_capacity(candidates.len());
    for (_, p, dirs, cube) in candidates {
        cover.add_option(&cube);
        options.push((p, dirs));
    }
    match cover.solve(COVER_NODE_BUDGET) {
        CoverOutcome::Found(rows) => {
            let mut entries = Vec::with_capacity(vertices.len());
            for row in rows {
                let (p, dirs) = options[row];
                let mut sub = dirs;
                loop {
                    entries.push((p | sub, dirs));
                    if sub == 0 {
                        break;
                    }
                    sub = (sub - 1) & dirs;
                }
            }
            entries.sort_unstable();
            Ok(entries)
        }
        CoverOutcome::Impossible => Err(Error::NoSubcubeCover { n: m, dim }),
        CoverOutcome::GaveUp { nodes } => Err(Error::CoverBudget { n: m, nodes }),
    }
}

fn cube_members(v2: &VertexSet, index: &[u32], p: u64, dirs: u64, out: &mut Vec<usize>) -> bool {
    out.clear();
    let mut sub = dirs;
    loop {
        let q = p | sub;
        if !v2.get(q) {
            return false;
        }
        out.push(index[q as usize] as usize);
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & dirs;
    }
    true
}

fn table_digest(entries: &[(u64, u64)]) -> String {
    let mut hasher = Sha256::new();
    for &(p, dirs) in entries {
        hasher.update(p.to_le_bytes());
        hasher.update(dirs.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Replays a plan. The returned oracle records the plan with every
/// neighbor-choice digest filled in; digests already present must match.
pub fn execute(plan: &ConstructionPlan) -> Result<PartitionOracle> {
    let mut steps = plan.steps.iter();
    let mut oracle = match steps.next() {
        Some(ConstructionStep::Base { s, t, realization }) => match realization {
            BaseRealization::Syndrome(a) => base_partition(*s, *t, Some(a))?,
            BaseRealization::Table(hex_table) => table_partition(*s, *t, hex_table)?,
        },
        _ => return Err(Error::MalformedPlan("the first step must be a base".into())),
    };
    for step in steps {
        oracle = match step {
            ConstructionStep::Base { .. } => {
                return Err(Error::MalformedPlan("a base may only appear first".into()))
            }
            ConstructionStep::Extend { extra_dims } => {
                let m = oracle.dim().saturating_add(*extra_dims);
                extend_dimension(&oracle, m)?
            }
            ConstructionStep::BlowUp { factor } => blow_up(&oracle, *factor)?,
            ConstructionStep::Double { t, s, r, choice } => {
                double_with(&oracle, *t, *s, *r, choice)?
            }
        };
    }
    if (oracle.dim(), oracle.d1(), oracle.d2()) != (plan.target_n, plan.target_d1, plan.target_d2)
    {
        return Err(Error::MalformedPlan(format!(
            "steps produce ({},{}) on Q_{} but the plan targets ({},{}) on Q_{}",
            oracle.d1(),
            oracle.d2(),
            oracle.dim(),
            plan.target_d1,
            plan.target_d2,
            plan.target_n
        )));
    }
    Ok(oracle)
}

/// Plans and executes; `Ok(None)` when the planner gives no construction.
pub fn build(n: u32, k: u32) -> Result<Option<PartitionOracle>> {
    match plan(n, k)? {
        PlanOutcome::Feasible { plan } => execute(&plan).map(Some),
        _ => Ok(None),
    }
}
