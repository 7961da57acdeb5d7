//! Finite-memory (Markov) source descriptions and their exact analytics.
//!
//! A source over alphabet `0..alpha` with order `k` conditions each symbol on
//! the state formed by the previous `k` symbols; the run-up before time 1 is
//! fixed by the initial state `s0`. States are numbered in mixed radix with
//! the *most recent* symbol least significant:
//!
//! ```text
//! index(s_1 … s_k) = Σ_j s_{k-j} · alpha^j,   next(idx, a) = a + alpha · (idx mod alpha^{k-1})
//! ```
//!
//! Probabilities are kept in log2 domain so sequences up to ~2^20 symbols
//! stay representable. Sampling uses ChaCha12 ([`PRNG_ALGORITHM`]) so every
//! experiment is reproducible from a recorded integer seed.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Alphabet symbol. Alphabets are limited to 256 symbols.
pub type Symbol = u8;

/// Name of the pinned PRNG algorithm, recorded in experiment metadata.
pub const PRNG_ALGORITHM: &str = "chacha12";

/// Largest state count the dense analytics (stationary vector, marginal
/// entropy, …) will attempt.
const MAX_DENSE_STATES: u64 = 1 << 16;

/// Structural description of a finite-memory source: alphabet size, order,
/// and initial state (most recent symbol last). The all-zero initial state is
/// the conventional default.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    alpha: usize,
    order: usize,
    initial_state: Vec<Symbol>,
}

impl ModelSpec {
    /// Spec with an explicit initial state (`initial_state.len()` must equal
    /// `order`; symbols must be `< alpha`; `2 ≤ alpha ≤ 256`).
    pub fn new(alpha: usize, order: usize, initial_state: Vec<Symbol>) -> Result<Self> {
        if !(2..=256).contains(&alpha) {
            return Err(Error::InvalidModel(format!(
                "alphabet size must be in 2..=256, got {alpha}"
            )));
        }
        if initial_state.len() != order {
            return Err(Error::InvalidModel(format!(
                "initial state has {} symbols but the order is {order}",
                initial_state.len()
            )));
        }
        if let Some(&s) = initial_state.iter().find(|&&s| s as usize >= alpha) {
            return Err(Error::SymbolOutOfRange { symbol: s, alpha });
        }
        Ok(Self { alpha, order, initial_state })
    }

    /// Spec with the all-zero initial state.
    pub fn with_zero_state(alpha: usize, order: usize) -> Result<Self> {
        Self::new(alpha, order, vec![0; order])
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn initial_state(&self) -> &[Symbol] {
        &self.initial_state
    }

    /// `alpha^order`, guarded against overflow.
    pub fn num_states(&self) -> Result<u64> {
        let mut acc: u64 = 1;
        for _ in 0..self.order {
            acc = acc.checked_mul(self.alpha as u64).ok_or_else(|| {
                Error::ResourceLimit(format!(
                    "state space alpha^k = {}^{} exceeds u64",
                    self.alpha, self.order
                ))
            })?;
        }
        Ok(acc)
    }

    /// State count, additionally bounded so dense per-state tables stay small.
    pub fn num_states_dense(&self) -> Result<u64> {
        let n = self.num_states()?;
        if n > MAX_DENSE_STATES {
            return Err(Error::ResourceLimit(format!(
                "{n} states exceed the dense-analytics bound {MAX_DENSE_STATES}"
            )));
        }
        Ok(n)
    }

    /// Mixed-radix index of a state given as symbols, oldest first.
    pub fn state_index(&self, state: &[Symbol]) -> u64 {
        debug_assert_eq!(state.len(), self.order);
        state
            .iter()
            .fold(0u64, |acc, &s| acc * self.alpha as u64 + s as u64)
    }

    /// Symbols of a state (oldest first) from its index.
    pub fn state_symbols(&self, mut index: u64) -> Vec<Symbol> {
        let mut out = vec![0; self.order];
        for slot in out.iter_mut().rev() {
            *slot = (index % self.alpha as u64) as Symbol;
            index /= self.alpha as u64;
        }
        debug_assert_eq!(index, 0);
        out
    }

    pub fn initial_state_index(&self) -> u64 {
        self.state_index(&self.initial_state)
    }

    /// State reached from `index` after emitting `a`.
    pub fn next_state_index(&self, index: u64, a: Symbol) -> u64 {
        if self.order == 0 {
            return 0;
        }
        let tail_radix = (self.alpha as u64).pow(self.order as u32 - 1);
        a as u64 + self.alpha as u64 * (index % tail_radix)
    }

    /// Errors unless every symbol is `< alpha`.
    pub fn validate_sequence(&self, x: &[Symbol]) -> Result<()> {
        match x.iter().find(|&&s| s as usize >= self.alpha) {
            None => Ok(()),
            Some(&s) => Err(Error::SymbolOutOfRange { symbol: s, alpha: self.alpha }),
        }
    }

    /// The symbol at 1-indexed position `p` of `x`, where positions `≤ 0`
    /// read from the initial-state run-up. Positions beyond `x` are a bug.
    pub fn symbol_at(&self, x: &[Symbol], p: i64) -> Symbol {
        if p >= 1 {
            x[(p - 1) as usize]
        } else {
            // p in -(k-1)..=0 maps to initial_state[p + k - 1].
            self.initial_state[(p + self.order as i64 - 1) as usize]
        }
    }
}

/// On-disk model format.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    alpha: usize,
    k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s0: Option<Vec<Symbol>>,
    cond: Vec<Vec<f64>>,
}

/// A fully parameterized source: a [`ModelSpec`] plus one conditional
/// distribution per state (row `s` holds `p(a | s)` for `a = 0..alpha`).
#[derive(Debug, Clone)]
pub struct MarkovParams {
    spec: ModelSpec,
    cond: Vec<Vec<f64>>,
}

const ROW_SUM_TOLERANCE: f64 = 1e-9;

impl MarkovParams {
    pub fn new(spec: ModelSpec, cond: Vec<Vec<f64>>) -> Result<Self> {
        let states = spec.num_states_dense()?;
        if cond.len() as u64 != states {
            return Err(Error::InvalidModel(format!(
                "expected {} conditional rows, got {}",
                states,
                cond.len()
            )));
        }
        for (s, row) in cond.iter().enumerate() {
            if row.len() != spec.alpha() {
                return Err(Error::InvalidModel(format!(
                    "row {s} has {} entries, expected alpha = {}",
                    row.len(),
                    spec.alpha()
                )));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidModel(format!(
                    "row {s} contains a negative or non-finite probability"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidModel(format!(
                    "row {s} sums to {sum}, outside 1 ± {ROW_SUM_TOLERANCE}"
                )));
            }
        }
        Ok(Self { spec, cond })
    }

    /// Order-0 (i.i.d.) binary source with `P(1) = p`.
    pub fn iid_binary(p: f64) -> Result<Self> {
        Self::new(ModelSpec::with_zero_state(2, 0)?, vec![vec![1.0 - p, p]])
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn cond(&self) -> &[Vec<f64>] {
        &self.cond
    }

    pub fn prob(&self, state: u64, a: Symbol) -> f64 {
        self.cond[state as usize][a as usize]
    }

    /// Number of free parameters, `(alpha - 1) · alpha^k`.
    pub fn free_param_count(&self) -> u64 {
        (self.spec.alpha() as u64 - 1) * self.spec.num_states().unwrap_or(u64::MAX)
    }

    /// Parse the JSON model format (`alpha`, `k`, optional `s0`, `cond`).
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ModelFile = serde_json::from_str(text)?;
        let s0 = raw.s0.unwrap_or_else(|| vec![0; raw.k]);
        Self::new(ModelSpec::new(raw.alpha, raw.k, s0)?, raw.cond)
    }

    /// Canonical JSON rendering (fixed key order), suitable for hashing.
    pub fn to_canonical_json(&self) -> String {
        let file = ModelFile {
            alpha: self.spec.alpha(),
            k: self.spec.order(),
            s0: Some(self.spec.initial_state().to_vec()),
            cond: self.cond.clone(),
        };
        serde_json::to_string(&file).expect("serializable model")
    }

    /// `log2 P(x)` under this source (`-inf` if a forbidden transition occurs).
    pub fn log2_seq_probability(&self, x: &[Symbol]) -> Result<f64> {
        self.spec.validate_sequence(x)?;
        let mut state = self.spec.initial_state_index();
        let mut acc = 0.0f64;
        for &a in x {
            let p = self.prob(state, a);
            if p == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            acc += p.log2();
            state = self.spec.next_state_index(state, a);
        }
        Ok(acc)
    }

    /// Stationary distribution over states, by dense Gaussian elimination on
    /// the balance equations (one equation replaced by normalization). Errors
    /// if the chain has no unique stationary vector (singular system).
    pub fn stationary_distribution(&self) -> Result<Vec<f64>> {
        let s = self.spec.num_states_dense()? as usize;
        // Rows 0..s-1: sum_t pi_t (P[t->s'] - delta) = 0; last row: sum pi = 1.
        let mut m = vec![vec![0.0f64; s + 1]; s];
        for t in 0..s {
            for a in 0..self.spec.alpha() {
                let nxt = self.spec.next_state_index(t as u64, a as Symbol) as usize;
                m[nxt][t] += self.prob(t as u64, a as Symbol);
            }
        }
        for t in 0..s {
            m[t][t] -= 1.0;
        }
        // Replace the last balance row by normalization.
        for t in 0..s {
            m[s - 1][t] = 1.0;
        }
        m[s - 1][s] = 1.0;
        gaussian_solve(&mut m).ok_or_else(|| {
            Error::InvalidModel("chain has no unique stationary distribution".into())
        })
    }

    /// Entropy rate in bits/symbol: `Σ_s π(s) H(X|s)`.
    pub fn entropy_rate(&self) -> Result<f64> {
        let pi = self.stationary_distribution()?;
        Ok(pi
            .iter()
            .zip(&self.cond)
            .map(|(p, row)| p * entropy_bits(row))
            .sum())
    }

    /// Exact block entropy `H(X^n)` in bits, via the forward state
    /// distribution: `H(X^n) = Σ_{t<n} Σ_s d_t(s) H(X|s)` (the chain of
    /// conditional entropies given the evolving state).
    pub fn marginal_entropy(&self, n: usize) -> Result<f64> {
        let s = self.spec.num_states_dense()? as usize;
        let mut dist = vec![0.0f64; s];
        dist[self.spec.initial_state_index() as usize] = 1.0;
        let row_entropy: Vec<f64> = self.cond.iter().map(|r| entropy_bits(r)).collect();
        let mut acc = 0.0f64;
        for _ in 0..n {
            acc += dist
                .iter()
                .zip(&row_entropy)
                .map(|(d, h)| d * h)
                .sum::<f64>();
            let mut next = vec![0.0f64; s];
            for (t, &d) in dist.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for a in 0..self.spec.alpha() {
                    let nxt = self.spec.next_state_index(t as u64, a as Symbol) as usize;
                    next[nxt] += d * self.prob(t as u64, a as Symbol);
                }
            }
            dist = next;
        }
        Ok(acc)
    }

    /// Sample `n` symbols with a fresh ChaCha12 stream seeded by `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Symbol> {
        self.sampler(seed).take(n).collect()
    }

    /// Infinite sampling iterator (for variable-length consumers).
    pub fn sampler(&self, seed: u64) -> MarkovSampler<'_> {
        MarkovSampler {
            params: self,
            state: self.spec.initial_state_index(),
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }
}

/// Iterator emitting source symbols forever; state carries across calls.
pub struct MarkovSampler<'a> {
    params: &'a MarkovParams,
    state: u64,
    rng: ChaCha12Rng,
}

impl Iterator for MarkovSampler<'_> {
    type Item = Symbol;

    fn next(&mut self) -> Option<Symbol> {
        let row = &self.params.cond[self.state as usize];
        let u: f64 = self.rng.gen();
        let mut acc = 0.0f64;
        let mut drawn = None;
        for (a, &p) in row.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            acc += p;
            drawn = Some(a as Symbol);
            if u < acc {
                break;
            }
        }
        let a = drawn.expect("validated rows have a positive entry");
        self.state = self.params.spec.next_state_index(self.state, a);
        Some(a)
    }
}

/// Shannon entropy of a probability row, in bits (`0·log 0 = 0`).
pub fn entropy_bits(row: &[f64]) -> f64 {
    -row.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// Binary entropy function `h(p)` in bits.
pub fn binary_entropy(p: f64) -> f64 {
    entropy_bits(&[p, 1.0 - p])
}

/// Solve an augmented linear system (rows of `n+1` entries) in place by
/// partial-pivot Gaussian elimination; `None` when singular.
fn gaussian_solve(m: &mut [Vec<f64>]) -> Option<Vec<f64>> {
    let n = m.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| {
            m[a][col]
                .abs()
                .partial_cmp(&m[b][col].abs())
                .expect("finite entries")
        })?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = m[row][col] / m[col][col];
            if factor == 0.0 {
                continue;
            }
            for j in col..=n {
                let sub = factor * m[col][j];
                m[row][j] -= sub;
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}
