//! The k-correct-guess hat game: strategies compiled from dominating sets,
//! group lifting, and exact or sampled evaluation.

use std::sync::Arc;

use num_rational::Ratio;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::constructions::block_parities;
use crate::error::{Error, Result};
use crate::hypercube::{check_dimension, check_materializable, vertex_mask, Membership, VertexSet};

const EXACT_CHUNK: u64 = 1 << 12;

/// Monte Carlo samples per independently seeded stream.
pub const SAMPLES_PER_SHARD: u64 = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Guess(u8),
    Pass,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    DominatingSet { n: u32 },
    Lifted { base: Box<Provenance>, group: u32 },
    AlwaysPass { n: u32 },
}

#[derive(Clone)]
enum Rule {
    Dominating(Arc<dyn Membership>),
    Lifted { base: Arc<Strategy>, group: u32 },
    AlwaysPass,
}

/// One decision rule per player. A player sees every hat but their own.
#[derive(Clone)]
pub struct Strategy {
    n: u32,
    rule: Rule,
}

impl std::fmt::Debug for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Strategy").field("n", &self.n).field("provenance", &self.provenance()).finish()
    }
}

/// Inserts a zero at position `i` of the `(n-1)`-bit view.
#[inline]
fn with_own_bit_cleared(i: u32, view: u64) -> u64 {
    let low = view & ((1u64 << i) - 1);
    let high = (view >> i) << (i + 1);
    low | high
}

/// Removes position `i` from `h`.
#[inline]
pub fn view_of(h: u64, i: u32) -> u64 {
    let low = h & ((1u64 << i) - 1);
    let high = (h >> (i + 1)) << i;
    low | high
}

impl Strategy {
    pub fn always_pass(n: u32) -> Result<Self> {
        check_dimension(n)?;
        Ok(Strategy { n, rule: Rule::AlwaysPass })
    }

    /// Compiles the strategy of a dominating set given as a membership predicate.
    pub fn from_membership(d: Arc<dyn Membership>) -> Result<Self> {
        let n = d.dim();
        check_dimension(n)?;
        Ok(Strategy { n, rule: Rule::Dominating(d) })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn provenance(&self) -> Provenance {
        match &self.rule {
            Rule::Dominating(_) => Provenance::DominatingSet { n: self.n },
            Rule::Lifted { base, group } => {
                Provenance::Lifted { base: Box::new(base.provenance()), group: *group }
            }
            Rule::AlwaysPass => Provenance::AlwaysPass { n: self.n },
        }
    }

    /// Action of player `i` given the other `n - 1` hats, in order, as bits
    /// of `view`.
    pub fn decide(&self, i: u32, view: u64) -> Action {
        assert!(i < self.n, "player {i} out of range for {} players", self.n);
        self.decide_cleared(i, with_own_bit_cleared(i, view) & vertex_mask(self.n))
    }

    /// `h` has bit `i` cleared.
    fn decide_cleared(&self, i: u32, h: u64) -> Action {
        match &self.rule {
            Rule::AlwaysPass => Action::Pass,
            Rule::Dominating(d) => {
                let own = 1u64 << i;
                match (d.contains(h), d.contains(h | own)) {
                    (true, false) => Action::Guess(1),
                    (false, true) => Action::Guess(0),
                    _ => Action::Pass,
                }
            }
            Rule::Lifted { base, group } => {
                let g = i / group;
                let parities = block_parities(h, base.n, *group);
                let partial = (parities >> g) & 1;
                match base.decide_cleared(g, parities & !(1u64 << g)) {
                    Action::Guess(c) => Action::Guess(c ^ partial as u8),
                    Action::Pass => Action::Pass,
                }
            }
        }
    }

    /// Everyone's action on placement `h`.
    pub fn actions(&self, h: u64) -> Vec<Action> {
        (0..self.n).map(|i| self.decide_cleared(i, h & !(1u64 << i))).collect()
    }
}

/// Player `i` guesses the own bit that puts the placement outside `D` when
/// exactly one completion lies in `D`, and passes otherwise.
pub fn strategy_from_dominating(d: &VertexSet) -> Result<Strategy> {
    if d.is_empty() || d.len() == 1u64 << d.dim() {
        return Err(Error::InvalidParameter(
            "dominating set must be nonempty and proper".into(),
        ));
    }
    Strategy::from_membership(Arc::new(d.clone()))
}

/// Splits `t * n` players into `n` consecutive groups of `t`; each player
/// plays the base rule on group parities and converts the parity guess into
/// a guess for their own hat.
pub fn lift_strategy(base: &Strategy, t: u32) -> Result<Strategy> {
    if t == 0 {
        return Err(Error::InvalidParameter("group size must be at least 1".into()));
    }
    if t == 1 {
        return Ok(base.clone());
    }
    let n = base.n.checked_mul(t).unwrap_or(u32::MAX);
    check_dimension(n)?;
    Ok(Strategy { n, rule: Rule::Lifted { base: Arc::new(base.clone()), group: t } })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameOutcome {
    pub correct: u32,
    pub wrong: u32,
    pub passes: u32,
    pub win: bool,
}

impl GameOutcome {
    fn tally(correct: u32, wrong: u32, n: u32, k: u32) -> Self {
        GameOutcome { correct, wrong, passes: n - correct - wrong, win: wrong == 0 && correct >= k }
    }
}

pub fn play(s: &Strategy, h: u64, k: u32) -> GameOutcome {
    let h = h & vertex_mask(s.n);
    let (mut correct, mut wrong) = (0, 0);
    match &s.rule {
        // Both completions of player i are h and h with bit i flipped, so
        // membership of h is shared by every player.
        Rule::Dominating(d) => {
            let here = d.contains(h);
            for i in 0..s.n {
                if here != d.contains(h ^ (1u64 << i)) {
                    // Exactly one completion is in D; the guess names the other.
                    if here {
                        wrong += 1;
                    } else {
                        correct += 1;
                    }
                }
            }
        }
        _ => {
            for (i, action) in s.actions(h).into_iter().enumerate() {
                if let Action::Guess(c) = action {
                    if (h >> i) & 1 == c as u64 {
                        correct += 1;
                    } else {
                        wrong += 1;
                    }
                }
            }
        }
    }
    GameOutcome::tally(correct, wrong, s.n, k)
}

fn serialize_ratio<S: Serializer>(r: &Ratio<u64>, ser: S) -> std::result::Result<S::Ok, S::Error> {
    ser.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationMode {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExactEvaluation {
    pub n: u32,
    pub k: u32,
    pub wins: u64,
    pub total: u64,
    #[serde(serialize_with = "serialize_ratio")]
    pub probability: Ratio<u64>,
    pub mode: EvaluationMode,
}

fn check_threshold(n: u32, k: u32) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= n, got n={n}, k={k}")));
    }
    Ok(())
}

/// Plays every placement.
pub fn evaluate_exact(s: &Strategy, k: u32) -> Result<ExactEvaluation> {
    check_materializable(s.n)?;
    check_threshold(s.n, k)?;
    let total = 1u64 << s.n;
    let chunks = total.div_ceil(EXACT_CHUNK);
    let count_chunk = |c: u64| {
        let start = c * EXACT_CHUNK;
        let end = (start + EXACT_CHUNK).min(total);
        (start..end).filter(|&h| play(s, h, k).win).count() as u64
    };
    let wins: u64 = if chunks == 1 {
        count_chunk(0)
    } else {
        (0..chunks).into_par_iter().map(count_chunk).sum()
    };
    Ok(ExactEvaluation {
        n: s.n,
        k,
        wins,
        total,
        probability: Ratio::new(wins, total),
        mode: EvaluationMode::Exact,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub n: u32,
    pub k: u32,
    pub wins: u64,
    pub total: u64,
    #[serde(serialize_with = "serialize_ratio")]
    pub probability: Ratio<u64>,
    pub mode: EvaluationMode,
    pub seed: u64,
    pub estimate: f64,
    pub standard_error: f64,
}

/// Plays `samples` uniform placements. Shard `j` draws from stream `j` of a
/// ChaCha8 generator seeded with `seed`, so the result does not depend on the
/// number of worker threads.
pub fn evaluate_monte_carlo(s: &Strategy, k: u32, samples: u64, seed: u64) -> Result<MonteCarloEstimate> {
    if samples == 0 {
        return Err(Error::InvalidParameter("at least one sample is required".into()));
    }
    check_threshold(s.n, k)?;
    let mask = vertex_mask(s.n);
    let shards = samples.div_ceil(SAMPLES_PER_SHARD);
    let wins: u64 = (0..shards)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j);
            let count = SAMPLES_PER_SHARD.min(samples - j * SAMPLES_PER_SHARD);
            (0..count).filter(|_| play(s, rng.next_u64() & mask, k).win).count() as u64
        })
        .sum();
    let estimate = wins as f64 / samples as f64;
    let standard_error = (estimate * (1.0 - estimate) / samples as f64).sqrt();
    Ok(MonteCarloEstimate {
        n: s.n,
        k,
        wins,
        total: samples,
        probability: Ratio::new(wins, samples),
        mode: EvaluationMode::MonteCarlo,
        seed,
        estimate,
        standard_error,
    })
}
