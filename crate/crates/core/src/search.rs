//! Exact minimum k-dominating sets at small n, perfectness decisions, and
//! bounds on the optimal winning probability `P(n, k)`.

use std::time::{Duration, Instant};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::constructions::{execute, plan, screen, ConstructionPlan, Infeasibility, PlanOutcome};
use crate::error::{Error, Result};
use crate::hypercube::{
    check_dimension, expected_v2_size, Membership, Verdict, VerifyMode, VertexSet,
    DEFAULT_SAMPLE_COUNT,
};

/// Largest dimension the branch-and-bound will attempt.
pub const SEARCH_DIMENSION_LIMIT: u32 = 16;

/// Feasible plans up to this dimension are verified exhaustively before
/// being reported as certificates; larger ones are sampled.
pub const CERTIFY_EXHAUSTIVE_LIMIT: u32 = 20;

const CLOCK_CHECK_INTERVAL: u64 = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub max_nodes: u64,
    pub max_seconds: f64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { max_nodes: 500_000_000, max_seconds: 240.0 }
    }
}

impl SearchBudget {
    pub fn new(max_nodes: u64, max_seconds: f64) -> Result<Self> {
        if max_nodes == 0 || !(max_seconds > 0.0) {
            return Err(Error::InvalidParameter("search budget must be positive".into()));
        }
        Ok(SearchBudget { max_nodes, max_seconds })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "screen", rename_all = "snake_case")]
pub enum Screen {
    Passes,
    Fails { reason: Infeasibility },
}

fn check_game_parameters(n: u32, k: u32) -> Result<()> {
    check_dimension(n)?;
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= n, got n={n}, k={k}")));
    }
    Ok(())
}

/// Necessary conditions for `(n, k)` to be perfect.
pub fn analytic_screen(n: u32, k: u32) -> Result<Screen> {
    check_game_parameters(n, k)?;
    Ok(match screen(n, k) {
        Some(reason) => Screen::Fails { reason },
        None => Screen::Passes,
    })
}

/// `ceil(k * 2^n / (n + k))`, the counting bound on a k-dominating set.
pub fn counting_bound(n: u32, k: u32) -> u64 {
    let num = k as u128 * (1u128 << n);
    num.div_ceil((n + k) as u128) as u64
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum DominatingSearch {
    Exact { size: u64, witness: VertexSet },
    LowerBoundOnly { bound: u64, best_found: Option<u64>, nodes: u64 },
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Undecided,
    In,
    Out,
}

struct Search {
    n: u32,
    k: u32,
    status: Vec<Status>,
    /// Neighbors in D.
    dominators: Vec<u32>,
    /// Undecided neighbors.
    open: Vec<u32>,
    /// Sum over vertices not in D of the domination still missing.
    deficit: u64,
    size: u64,
}

impl Search {
    fn new(n: u32, k: u32) -> Self {
        let count = 1usize << n;
        Search {
            n,
            k,
            status: vec![Status::Undecided; count],
            dominators: vec![0; count],
            open: vec![n; count],
            deficit: k as u64 * count as u64,
            size: 0,
        }
    }

    fn lower_bound(&self) -> u64 {
        self.size + self.deficit.div_ceil((self.n + self.k) as u64)
    }

    fn viable(&self, u: usize) -> bool {
        self.dominators[u] + self.open[u] >= self.k
    }

    /// Decides `v`; returns whether every excluded vertex can still be dominated.
    fn apply(&mut self, v: usize, include: bool) -> bool {
        let k = self.k;
        let mut ok = true;
        if include {
            self.status[v] = Status::In;
            self.size += 1;
            self.deficit -= k.saturating_sub(self.dominators[v]) as u64;
        } else {
            self.status[v] = Status::Out;
            ok = self.viable(v);
        }
        for i in 0..self.n {
            let u = v ^ (1usize << i);
            self.open[u] -= 1;
            if include {
                if self.status[u] != Status::In && self.dominators[u] < k {
                    self.deficit -= 1;
                }
                self.dominators[u] += 1;
            } else if self.status[u] == Status::Out && !self.viable(u) {
                ok = false;
            }
        }
        ok
    }

    fn undo(&mut self, v: usize, include: bool) {
        let k = self.k;
        for i in 0..self.n {
            let u = v ^ (1usize << i);
            self.open[u] += 1;
            if include {
                self.dominators[u] -= 1;
                if self.status[u] != Status::In && self.dominators[u] < k {
                    self.deficit += 1;
                }
            }
        }
        if include {
            self.deficit += k.saturating_sub(self.dominators[v]) as u64;
            self.size -= 1;
        }
        self.status[v] = Status::Undecided;
    }

    /// Translation puts some member of D at vertex 0; a bit permutation then
    /// makes the members of weight one a prefix of 1, 2, 4, ...
    fn may_include(&self, v: usize) -> bool {
        !(v.is_power_of_two() && v > 1 && self.status[v >> 1] != Status::In)
    }

    fn may_exclude(&self, v: usize) -> bool {
        v != 0
    }
}

/// Finds a minimum k-dominating set of `Q_n` by branch and bound over vertices
/// in index order, trying inclusion first.
pub fn min_k_dominating(n: u32, k: u32, budget: SearchBudget) -> Result<DominatingSearch> {
    check_game_parameters(n, k)?;
    let floor = counting_bound(n, k);
    if n > SEARCH_DIMENSION_LIMIT {
        return Ok(DominatingSearch::LowerBoundOnly { bound: floor, best_found: None, nodes: 0 });
    }
    let count = 1usize << n;
    let deadline = Duration::from_secs_f64(budget.max_seconds);
    let start = Instant::now();
    let mut search = Search::new(n, k);
    let mut best = count as u64 + 1;
    let mut witness: Vec<bool> = vec![true; count];
    // choice[v]: 0 untried, 1 included, 2 excluded.
    let mut choice = vec![0u8; count];
    let mut nodes = 0u64;
    let mut v = 0usize;
    loop {
        if v == count {
            if search.size < best {
                best = search.size;
                for (slot, s) in witness.iter_mut().zip(&search.status) {
                    *slot = *s == Status::In;
                }
            }
        } else {
            nodes += 1;
            if nodes > budget.max_nodes
                || (nodes % CLOCK_CHECK_INTERVAL == 0 && start.elapsed() > deadline)
            {
                let best_found = (best <= count as u64).then_some(best);
                return Ok(DominatingSearch::LowerBoundOnly { bound: floor, best_found, nodes });
            }
            let mut descended = false;
            while choice[v] < 2 && !descended {
                choice[v] += 1;
                let include = choice[v] == 1;
                let allowed = if include { search.may_include(v) } else { search.may_exclude(v) };
                if !allowed {
                    continue;
                }
                if search.apply(v, include) && search.lower_bound() < best {
                    descended = true;
                } else {
                    search.undo(v, include);
                }
            }
            if descended {
                v += 1;
                continue;
            }
            choice[v] = 0;
        }
        // Backtrack to the most recent decision and let it try its next option.
        if v == 0 {
            break;
        }
        v -= 1;
        search.undo(v, choice[v] == 1);
    }
    let witness = VertexSet::from_vertices(n, (0..count as u64).filter(|&x| witness[x as usize]))?;
    Ok(DominatingSearch::Exact { size: best, witness })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum ProbabilityResult {
    Exact {
        #[serde(serialize_with = "ratio_string")]
        value: Ratio<u64>,
    },
    Bounds {
        #[serde(serialize_with = "ratio_string")]
        lower: Ratio<u64>,
        #[serde(serialize_with = "ratio_string")]
        upper: Ratio<u64>,
    },
}

fn ratio_string<S: serde::Serializer>(r: &Ratio<u64>, ser: S) -> std::result::Result<S::Ok, S::Error> {
    ser.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
}

/// `P(n, k) = 1 - |D| / 2^n` for a minimum k-dominating set `D`, or an
/// interval when the search does not finish.
pub fn p_exact(n: u32, k: u32, budget: SearchBudget) -> Result<ProbabilityResult> {
    let total = 1u64 << n.min(63);
    match min_k_dominating(n, k, budget)? {
        DominatingSearch::Exact { size, .. } => {
            Ok(ProbabilityResult::Exact { value: Ratio::new(total - size, total) })
        }
        DominatingSearch::LowerBoundOnly { bound, best_found, .. } => {
            let known = bounds(n, k)?;
            let mut lower = known.lower;
            if let Some(found) = best_found {
                lower = lower.max(Ratio::new(total - found, total));
            }
            let upper = known.upper.min(Ratio::new(total - bound, total));
            Ok(ProbabilityResult::Bounds { lower, upper })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    Plan { plan: ConstructionPlan },
    DominatingSet { set: VertexSet },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NotPerfectReason {
    ScreenFailed { reason: Infeasibility },
    SearchExhausted { min_size: u64 },
}

impl std::fmt::Display for NotPerfectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NotPerfectReason::ScreenFailed { reason } => write!(f, "{reason}"),
            NotPerfectReason::SearchExhausted { min_size } => {
                write!(f, "minimum dominating set has {min_size} vertices")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum PerfectnessVerdict {
    Perfect { certificate: Certificate },
    NotPerfect { reason: NotPerfectReason },
    Unknown { reason: String },
}

/// Decides whether `P(n, k)` reaches `n / (n + k)`: screens first, then the
/// planner with its output verified, then a budgeted search.
pub fn is_perfect(n: u32, k: u32, budget: SearchBudget) -> Result<PerfectnessVerdict> {
    check_game_parameters(n, k)?;
    if let Some(reason) = screen(n, k) {
        return Ok(PerfectnessVerdict::NotPerfect { reason: NotPerfectReason::ScreenFailed { reason } });
    }
    let mut unresolved = String::from("no construction is known");
    if let PlanOutcome::Feasible { plan } = plan(n, k)? {
        match certify_plan(&plan) {
            Ok(Some(executed)) => {
                return Ok(PerfectnessVerdict::Perfect { certificate: Certificate::Plan { plan: executed } })
            }
            Ok(None) => unresolved = "the planned partition failed verification".into(),
            Err(e) => unresolved = format!("the plan could not be executed: {e}"),
        }
    }
    let target = expected_v2_size(n, k, n);
    match min_k_dominating(n, k, budget)? {
        DominatingSearch::Exact { size, witness } if size == target => {
            Ok(PerfectnessVerdict::Perfect { certificate: Certificate::DominatingSet { set: witness } })
        }
        DominatingSearch::Exact { size, .. } => Ok(PerfectnessVerdict::NotPerfect {
            reason: NotPerfectReason::SearchExhausted { min_size: size },
        }),
        DominatingSearch::LowerBoundOnly { nodes, .. } => Ok(PerfectnessVerdict::Unknown {
            reason: if n > SEARCH_DIMENSION_LIMIT {
                format!("{unresolved}; exact search is limited to n <= {SEARCH_DIMENSION_LIMIT}")
            } else {
                format!("{unresolved}; search budget exhausted after {nodes} nodes")
            },
        }),
    }
}

fn certify_plan(plan: &ConstructionPlan) -> Result<Option<ConstructionPlan>> {
    let oracle = execute(plan)?;
    let mode = if oracle.dim() <= CERTIFY_EXHAUSTIVE_LIMIT {
        VerifyMode::Exhaustive
    } else {
        VerifyMode::Sampled { count: DEFAULT_SAMPLE_COUNT, seed: 0 }
    };
    let report = oracle.verify(mode)?;
    Ok((report.verdict == Verdict::Valid).then(|| oracle.plan().clone()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Bounds {
    #[serde(serialize_with = "ratio_string")]
    pub lower: Ratio<u64>,
    #[serde(serialize_with = "ratio_string")]
    pub upper: Ratio<u64>,
}

/// `upper = n / (n + k)`; `lower` is the best `n' / (n' + k)` over planned
/// perfect pairs with `n' <= n`, since adding players never hurts.
pub fn bounds(n: u32, k: u32) -> Result<Bounds> {
    check_game_parameters(n, k)?;
    let upper = Ratio::new(n as u64, (n + k) as u64);
    let mut lower = Ratio::from_integer(0);
    for m in (k..=n).rev() {
        if let PlanOutcome::Feasible { .. } = plan(m, k)? {
            lower = Ratio::new(m as u64, (m + k) as u64);
            break;
        }
    }
    Ok(Bounds { lower, upper })
}
