//! Variable-to-fixed generation: consume a stream until a stopping word is
//! hit, then emit one uniform draw from `0..M`.
//!
//! A dictionary `D ⊂ A*` is prefix-free and complete: every long enough
//! string has exactly one prefix in `D`. A variable-to-fixed generator
//! `(D, χ, M)` reads symbols until the prefix seen so far lands in `D` and
//! outputs that word's label `χ ∈ {0, …, M−1}`. The output is uniform for
//! *every* finite-memory source of order `k` — whatever its parameters —
//! exactly when each label is used equally often inside every type class,
//! which forces `|D ∩ T| ≡ 0 (mod M)` and leaves at least `|T| mod M`
//! members of each class `T` outside the dictionary.
//!
//! The greedy dictionary meets that floor with equality. Level by level, the
//! unresolved ("failed") words of length `n − 1` are extended by one symbol;
//! within each type class `T` of length `n`, the first `M·⌊c/M⌋` of the `c`
//! candidates in reverse-lexicographic order (last symbol most significant)
//! become stopping words, labelled round-robin `0, 1, …, M−1, 0, …`, and
//! exactly `|T| mod M` words per class survive to the next level. Hence
//! `|fail_n(T)| = |T| mod M` for every class and every `n`, and the failure
//! probability `P(fail_n) = Σ_T (|T| mod M)·P(member of T)` vanishes
//! exponentially. Truncating at depth `N` yields a generator that reads at
//! most `N` symbols and fails (emits nothing) with probability `P(fail_N)`;
//! its expected consumption is `Σ_{n<N} P(fail_n)`.
//!
//! The same generator runs sequentially without materializing any
//! dictionary. Because members of a class share their last `k` symbols,
//! reverse-lexicographic order among them is decided at position `n − k`,
//! and the candidate set of a class `T` splits by that symbol into the
//! unresolved words of the prefix classes `T⟨a⟩` (the one-symbol peels).
//! Tracking the index `I` of the running prefix inside its own unresolved
//! set costs one Whittle evaluation per alphabet symbol per step:
//!
//! ```text
//! f_a  = |T⟨a⟩| mod M               (a ∈ A)
//! I_D  = Σ_{a < x_{n−k}} f_a + I
//! j    = ⌊(Σ_a f_a) / M⌋
//! stop with value I_D mod M  if I_D < j·M,  else  I ← I_D − j·M
//! ```
//!
//! At `M = 2`, `k = 0`, `α = 2` the construction reduces to the classical
//! von Neumann trick: the level-two dictionary is `{10, 01}` and all longer
//! stopping words descend from the discarded pairs `00` and `11`.

use std::collections::{HashMap, VecDeque};

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::fvr::log2_member_probability;
use crate::model::{MarkovParams, ModelSpec, Symbol};
use crate::types::{all_types, reverse_lex_cmp, ClassSizeCache, TypeCounts};

/// Widest level an explicit dictionary construction may materialize.
pub const MAX_EXPLICIT_WORDS: usize = 1 << 20;

/// Result of one truncated variable-to-fixed run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VfrOutcome {
    /// A stopping word of length `len` was reached; `value < M` is uniform.
    Stopped { value: u64, len: u64 },
    /// No prefix stopped within the truncation depth; nothing is emitted.
    Failed { len: u64 },
}

/// Sequential generator: feed symbols one at a time, stop when a dictionary
/// word completes. Equivalent to looking the input up in the explicit greedy
/// dictionary, but runs in time polynomial in the consumed length.
pub struct SequentialGenerator<'a> {
    spec: ModelSpec,
    m: u64,
    cache: &'a ClassSizeCache,
    counts: TypeCounts,
    recent: VecDeque<Symbol>,
    unresolved_index: u64,
    consumed: u64,
    stopped: bool,
}

impl<'a> SequentialGenerator<'a> {
    pub fn new(spec: ModelSpec, m: u64, cache: &'a ClassSizeCache) -> Result<Self> {
        if m < 2 {
            return Err(Error::Config(format!(
                "output range must be at least 2, got {m}"
            )));
        }
        let counts = TypeCounts::empty(spec.clone())?;
        Ok(Self {
            spec,
            m,
            cache,
            counts,
            recent: VecDeque::new(),
            unresolved_index: 0,
            consumed: 0,
            stopped: false,
        })
    }

    /// Symbols fed so far.
    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    /// Feed one symbol; `Some(r)` means the generator stopped with output
    /// `r`. Feeding past a stop is a usage error.
    pub fn step(&mut self, a: Symbol) -> Result<Option<u64>> {
        if self.stopped {
            return Err(Error::Config(
                "generator already produced its output".into(),
            ));
        }
        if a as usize >= self.spec.alpha() {
            return Err(Error::SymbolOutOfRange {
                symbol: a,
                alpha: self.spec.alpha(),
            });
        }
        self.consumed += 1;
        self.counts.push_symbol(a);
        self.recent.push_back(a);
        if self.recent.len() > self.spec.order() + 1 {
            self.recent.pop_front();
        }

        // Reverse-lexicographic order within the class is decided by the
        // symbol at position n − k, pinned by the initial state while the
        // position is still in the run-up.
        let k = self.spec.order() as i64;
        let p = self.consumed as i64 - k;
        let pivot = if p <= 0 {
            self.spec.initial_state()[(p + k - 1) as usize]
        } else {
            self.recent[0]
        };

        let mut unresolved = vec![0u64; self.spec.alpha()];
        for (a2, slot) in unresolved.iter_mut().enumerate() {
            let peeled = self.cache.peeled_size(&self.counts, a2 as Symbol) % self.m;
            *slot = peeled.to_u64().expect("residue below M fits in u64");
        }
        let total: u128 = unresolved.iter().map(|&f| f as u128).sum();
        let stops = total / self.m as u128 * self.m as u128;
        let index: u128 = unresolved[..pivot as usize]
            .iter()
            .map(|&f| f as u128)
            .sum::<u128>()
            + self.unresolved_index as u128;

        if index < stops {
            self.stopped = true;
            Ok(Some((index % self.m as u128) as u64))
        } else {
            let rest = index - stops;
            debug_assert!(
                rest < self.m as u128,
                "unresolved index must stay below M"
            );
            self.unresolved_index = rest as u64;
            Ok(None)
        }
    }
}

/// Run the sequential generator over `input`, reading at most `max_len`
/// symbols when a depth is given. An exhausted iterator is an error; hitting
/// the depth without stopping is a reportable failure, not an error.
pub fn run_sequential(
    spec: &ModelSpec,
    m: u64,
    max_len: Option<u64>,
    input: impl IntoIterator<Item = Symbol>,
    cache: &ClassSizeCache,
) -> Result<VfrOutcome> {
    if max_len == Some(0) {
        return Err(Error::Config("truncation depth must be positive".into()));
    }
    let mut generator = SequentialGenerator::new(spec.clone(), m, cache)?;
    for a in input {
        if let Some(value) = generator.step(a)? {
            return Ok(VfrOutcome::Stopped {
                value,
                len: generator.consumed(),
            });
        }
        if max_len.is_some_and(|n| generator.consumed() >= n) {
            return Ok(VfrOutcome::Failed {
                len: generator.consumed(),
            });
        }
    }
    Err(Error::StreamExhausted)
}

/// Variant for sources whose initial state is unknown: the first `k` stream
/// symbols become the working initial state, then the generator proceeds as
/// usual. Reported lengths include those `k` priming symbols.
pub fn run_synchronized(
    alpha: usize,
    k: usize,
    m: u64,
    max_len: Option<u64>,
    input: impl IntoIterator<Item = Symbol>,
    cache: &ClassSizeCache,
) -> Result<VfrOutcome> {
    if max_len.is_some_and(|n| n <= k as u64) {
        return Err(Error::Config(format!(
            "truncation depth must exceed the {k} priming symbols"
        )));
    }
    let mut stream = input.into_iter();
    let mut state = Vec::with_capacity(k);
    for _ in 0..k {
        state.push(stream.next().ok_or(Error::StreamExhausted)?);
    }
    let spec = ModelSpec::new(alpha, k, state)?;
    let outcome = run_sequential(&spec, m, max_len.map(|n| n - k as u64), stream, cache)?;
    Ok(match outcome {
        VfrOutcome::Stopped { value, len } => VfrOutcome::Stopped {
            value,
            len: len + k as u64,
        },
        VfrOutcome::Failed { len } => VfrOutcome::Failed { len: len + k as u64 },
    })
}

/// One level of an explicitly built greedy dictionary.
#[derive(Clone, Debug)]
pub struct DictLevel {
    /// Word length at this level.
    pub n: u64,
    /// Stopping words admitted here with their labels, in
    /// reverse-lexicographic order.
    pub dict: Vec<(Vec<Symbol>, u64)>,
    /// Words still unresolved after this level, in reverse-lexicographic
    /// order.
    pub fail: Vec<Vec<Symbol>>,
}

/// Explicit greedy dictionary built breadth-first to a fixed depth. Meant
/// for desk-scale verification and table dumps; the sequential generator is
/// the production path and never materializes these sets.
pub struct GreedyDict {
    spec: ModelSpec,
    m: u64,
    levels: Vec<DictLevel>,
    index: HashMap<Vec<Symbol>, u64>,
}

impl GreedyDict {
    pub fn build(spec: &ModelSpec, m: u64, depth: u64) -> Result<Self> {
        if m < 2 {
            return Err(Error::Config(format!(
                "output range must be at least 2, got {m}"
            )));
        }
        let mut levels = vec![DictLevel {
            n: 0,
            dict: Vec::new(),
            fail: vec![Vec::new()],
        }];
        let mut index = HashMap::new();
        for n in 1..=depth {
            let prev = &levels[n as usize - 1].fail;
            if prev.len().saturating_mul(spec.alpha()) > MAX_EXPLICIT_WORDS {
                return Err(Error::ResourceLimit(format!(
                    "explicit dictionary level {n} exceeds {MAX_EXPLICIT_WORDS} words"
                )));
            }
            let mut groups: HashMap<TypeCounts, Vec<Vec<Symbol>>> = HashMap::new();
            for word in prev {
                for a in 0..spec.alpha() as Symbol {
                    let mut x = word.clone();
                    x.push(a);
                    groups
                        .entry(TypeCounts::counts_of(&x, spec)?)
                        .or_default()
                        .push(x);
                }
            }
            let mut dict = Vec::new();
            let mut fail = Vec::new();
            for (_, mut members) in groups {
                members.sort_by(|a, b| reverse_lex_cmp(a, b));
                let admitted = members.len() - members.len() % m as usize;
                for (i, word) in members.into_iter().enumerate() {
                    if i < admitted {
                        dict.push((word, i as u64 % m));
                    } else {
                        fail.push(word);
                    }
                }
            }
            dict.sort_by(|a, b| reverse_lex_cmp(&a.0, &b.0));
            fail.sort_by(|a, b| reverse_lex_cmp(a, b));
            for (word, label) in &dict {
                index.insert(word.clone(), *label);
            }
            levels.push(DictLevel { n, dict, fail });
        }
        Ok(Self {
            spec: spec.clone(),
            m,
            levels,
            index,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn output_range(&self) -> u64 {
        self.m
    }

    pub fn depth(&self) -> u64 {
        self.levels.len() as u64 - 1
    }

    pub fn level(&self, n: u64) -> &DictLevel {
        &self.levels[n as usize]
    }

    pub fn levels(&self) -> &[DictLevel] {
        &self.levels
    }

    /// Table-driven generator: label and stop length of the unique stopping
    /// prefix of `x`, or `None` when no prefix stops within the built depth.
    pub fn lookup(&self, x: &[Symbol]) -> Option<(u64, u64)> {
        let deepest = (self.depth() as usize).min(x.len());
        for len in 1..=deepest {
            if let Some(&label) = self.index.get(&x[..len]) {
                return Some((label, len as u64));
            }
        }
        None
    }
}

/// Analytic per-type profile of one greedy-dictionary level, derived without
/// materializing any words.
#[derive(Clone, Debug)]
pub struct TypeProfile {
    pub counts: TypeCounts,
    /// Words of this class that stop at this level: `Σ_a |T⟨a⟩| mod M`
    /// candidates minus the unresolved floor; always a multiple of `M`.
    pub dict: u64,
    /// Words still unresolved: `|T| mod M`.
    pub fail: u64,
}

/// Profile of level `n` over every nonempty class of that length.
pub fn analytic_profile(
    spec: &ModelSpec,
    m: u64,
    n: u64,
    cache: &ClassSizeCache,
) -> Result<Vec<TypeProfile>> {
    if m < 2 {
        return Err(Error::Config(format!(
            "output range must be at least 2, got {m}"
        )));
    }
    let mut out = Vec::new();
    for counts in all_types(spec, n)? {
        let fail = (cache.class_size(&counts) % m)
            .to_u64()
            .expect("residue below M fits in u64");
        let candidates: u128 = if n == 0 {
            1
        } else {
            (0..spec.alpha() as Symbol)
                .map(|a| {
                    (cache.peeled_size(&counts, a) % m)
                        .to_u64()
                        .expect("residue below M fits in u64") as u128
                })
                .sum()
        };
        let dict = u64::try_from(candidates - fail as u128).map_err(|_| {
            Error::ResourceLimit("per-level stop count exceeds u64".into())
        })?;
        debug_assert_eq!(dict % m, 0, "stop count must be a multiple of M");
        out.push(TypeProfile { counts, dict, fail });
    }
    Ok(out)
}

/// `P(fail_n)`: probability that the generator is still running after `n`
/// symbols, `Σ_T (|T| mod M)·P(member of T)`.
pub fn failure_probability(
    params: &MarkovParams,
    m: u64,
    n: u64,
    cache: &ClassSizeCache,
) -> Result<f64> {
    if m < 2 {
        return Err(Error::Config(format!(
            "output range must be at least 2, got {m}"
        )));
    }
    let mut acc = 0.0;
    for counts in all_types(params.spec(), n)? {
        let fail = (cache.class_size(&counts) % m)
            .to_u64()
            .expect("residue below M fits in u64");
        if fail > 0 {
            acc += fail as f64 * log2_member_probability(&counts, params).exp2();
        }
    }
    Ok(acc)
}

/// `P(fail_n)` for `n = 0..=n_max`.
pub fn failure_series(
    params: &MarkovParams,
    m: u64,
    n_max: u64,
    cache: &ClassSizeCache,
) -> Result<Vec<f64>> {
    (0..=n_max)
        .map(|n| failure_probability(params, m, n, cache))
        .collect()
}

/// Expected number of symbols the depth-`depth` truncated generator reads
/// (counting `depth` on failure): `Σ_{n<depth} P(fail_n)`, Kahan-compensated.
pub fn expected_input_length(
    params: &MarkovParams,
    m: u64,
    depth: u64,
    cache: &ClassSizeCache,
) -> Result<f64> {
    if depth == 0 {
        return Ok(0.0);
    }
    let series = failure_series(params, m, depth - 1, cache)?;
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for term in series {
        let y = term - compensation;
        let t = sum + y;
        compensation = (t - sum) - y;
        sum = t;
    }
    Ok(sum)
}

/// Exact rational `P(fail_n)` for conditional probabilities given as exact
/// rationals; `cond` uses the same row layout as [`MarkovParams::cond`] and
/// every row must sum to one exactly.
pub fn failure_probability_exact(
    spec: &ModelSpec,
    cond: &[Vec<BigRational>],
    m: u64,
    n: u64,
    cache: &ClassSizeCache,
) -> Result<BigRational> {
    if m < 2 {
        return Err(Error::Config(format!(
            "output range must be at least 2, got {m}"
        )));
    }
    if cond.len() as u64 != spec.num_states_dense()? {
        return Err(Error::InvalidModel(format!(
            "expected {} probability rows, got {}",
            spec.num_states_dense()?,
            cond.len()
        )));
    }
    for row in cond {
        if row.len() != spec.alpha() {
            return Err(Error::InvalidModel(format!(
                "expected {} probabilities per row, got {}",
                spec.alpha(),
                row.len()
            )));
        }
        if row.iter().any(|p| p.is_negative()) {
            return Err(Error::InvalidModel(
                "conditional probabilities must be nonnegative".into(),
            ));
        }
        if row.iter().sum::<BigRational>() != BigRational::one() {
            return Err(Error::InvalidModel(
                "conditional probability rows must sum to one".into(),
            ));
        }
    }
    let mut acc = BigRational::zero();
    for counts in all_types(spec, n)? {
        let fail = (cache.class_size(&counts) % m)
            .to_u64()
            .expect("residue below M fits in u64");
        if fail == 0 {
            continue;
        }
        let mut mass = BigRational::from_integer(fail.into());
        for ((state, a), count) in counts.iter() {
            let base = &cond[state as usize][a as usize];
            let exponent = i32::try_from(count)
                .map_err(|_| Error::ResourceLimit("transition count exceeds i32".into()))?;
            mass *= num_traits::Pow::pow(base.clone(), exponent);
        }
        acc += mass;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{class_size, unrank};
    use num_bigint::BigUint;

    fn w(s: &str) -> Vec<Symbol> {
        s.bytes().map(|b| b - b'0').collect()
    }

    fn words(list: &[&str]) -> Vec<Vec<Symbol>> {
        list.iter().map(|s| w(s)).collect()
    }

    #[test]
    fn binary_range_two_reduces_to_von_neumann() {
        let spec = ModelSpec::with_zero_state(2, 0).unwrap();
        let cache = ClassSizeCache::new();
        let run = |input: &[Symbol]| {
            run_sequential(&spec, 2, None, input.iter().copied(), &cache).unwrap()
        };
        assert_eq!(run(&[0, 1]), VfrOutcome::Stopped { value: 1, len: 2 });
        assert_eq!(run(&[1, 0]), VfrOutcome::Stopped { value: 0, len: 2 });
        assert_eq!(run(&[0, 0, 1, 0]), VfrOutcome::Stopped { value: 0, len: 4 });
        assert_eq!(run(&[1, 1, 0, 1]), VfrOutcome::Stopped { value: 1, len: 4 });

        let dict = GreedyDict::build(&spec, 2, 2).unwrap();
        assert!(dict.level(1).dict.is_empty());
        assert_eq!(dict.level(1).fail, words(&["0", "1"]));
        assert_eq!(dict.level(2).dict, vec![(w("10"), 0), (w("01"), 1)]);
        assert_eq!(dict.level(2).fail, words(&["00", "11"]));
    }

    #[test]
    fn ternary_range_dictionary_matches_hand_construction() {
        let spec = ModelSpec::with_zero_state(2, 0).unwrap();
        let cache = ClassSizeCache::new();
        let dict = GreedyDict::build(&spec, 3, 8).unwrap();

        assert!(dict.level(1).dict.is_empty());
        assert!(dict.level(2).dict.is_empty());
        assert_eq!(
            dict.level(3).dict,
            vec![
                (w("100"), 0),
                (w("010"), 1),
                (w("110"), 0),
                (w("001"), 2),
                (w("101"), 1),
                (w("011"), 2),
            ]
        );
        assert_eq!(dict.level(3).fail, words(&["000", "111"]));
        assert!(dict.level(4).dict.is_empty());
        assert!(dict.level(5).dict.is_empty());
        assert_eq!(
            dict.level(6).fail,
            words(&["000000", "111000", "000111", "111111"])
        );

        // The class of 000111 has twenty members; exactly two stay
        // unresolved at length six, the other eighteen stop strictly
        // earlier.
        let t = TypeCounts::counts_of(&w("000111"), &spec).unwrap();
        assert_eq!(class_size(&t), BigUint::from(20u32));
        let mut resolved = 0;
        for i in 0..20u32 {
            let member = unrank(&t, &BigUint::from(i), &cache).unwrap();
            match dict.lookup(&member) {
                Some((_, len)) => {
                    assert!(len < 6);
                    resolved += 1;
                }
                None => assert!(member == w("000111") || member == w("111000")),
            }
        }
        assert_eq!(resolved, 18);

        // Length seven admits nothing; length eight resolves three of the
        // four balanced extensions and C(8,4) mod 3 = 1 word survives.
        assert!(dict.level(7).dict.is_empty());
        for pair in [(w("11100010"), 0), (w("00011110"), 1), (w("11100001"), 2)] {
            assert!(dict.level(8).dict.contains(&pair), "missing {pair:?}");
        }
        assert!(dict.level(8).fail.contains(&w("00011101")));

        // Stop and failure masses complete the probability tree.
        let params = MarkovParams::iid_binary(0.3).unwrap();
        let seq_prob = |x: &[Symbol]| params.log2_seq_probability(x).unwrap().exp2();
        let mut mass: f64 = dict.level(8).fail.iter().map(|x| seq_prob(x)).sum();
        for level in dict.levels() {
            mass += level.dict.iter().map(|(x, _)| seq_prob(x)).sum::<f64>();
        }
        assert!((mass - 1.0).abs() < 1e-12, "tree mass {mass}");
    }

    #[test]
    fn sequential_and_explicit_constructions_agree() {
        for k in [0usize, 1] {
            let spec = ModelSpec::with_zero_state(2, k).unwrap();
            for m in [2u64, 3] {
                let cache = ClassSizeCache::new();
                let dict = GreedyDict::build(&spec, m, 7).unwrap();
                for bits in 0..(1u32 << 7) {
                    let x: Vec<Symbol> =
                        (0..7).map(|i| ((bits >> i) & 1) as Symbol).collect();
                    let expected = match dict.lookup(&x) {
                        Some((value, len)) => VfrOutcome::Stopped { value, len },
                        None => VfrOutcome::Failed { len: 7 },
                    };
                    let got =
                        run_sequential(&spec, m, Some(7), x.iter().copied(), &cache)
                            .unwrap();
                    assert_eq!(got, expected, "k={k} m={m} x={x:?}");
                }
            }
        }
    }

    #[test]
    fn stop_labels_are_balanced_within_every_type_class() {
        let spec = ModelSpec::with_zero_state(2, 1).unwrap();
        let m = 3u64;
        let dict = GreedyDict::build(&spec, m, 6).unwrap();
        let mut balanced_classes = 0;
        for level in dict.levels() {
            let mut per_class: HashMap<TypeCounts, Vec<u64>> = HashMap::new();
            for (word, label) in &level.dict {
                per_class
                    .entry(TypeCounts::counts_of(word, &spec).unwrap())
                    .or_insert_with(|| vec![0; m as usize])[*label as usize] += 1;
            }
            for (counts, histogram) in per_class {
                assert!(
                    histogram.iter().all(|&h| h == histogram[0]),
                    "labels unbalanced for {counts:?}: {histogram:?}"
                );
                balanced_classes += 1;
            }
        }
        assert!(balanced_classes > 0);
    }

    #[test]
    fn explicit_counts_match_the_analytic_profile() {
        for (k, m) in [(0usize, 3u64), (1, 2), (1, 5)] {
            let spec = ModelSpec::with_zero_state(2, k).unwrap();
            let cache = ClassSizeCache::new();
            let depth = 8u64;
            let dict = GreedyDict::build(&spec, m, depth).unwrap();
            for n in 0..=depth {
                let level = dict.level(n);
                let mut fail_by_class: HashMap<TypeCounts, u64> = HashMap::new();
                for word in &level.fail {
                    *fail_by_class
                        .entry(TypeCounts::counts_of(word, &spec).unwrap())
                        .or_default() += 1;
                }
                let mut dict_by_class: HashMap<TypeCounts, u64> = HashMap::new();
                for (word, _) in &level.dict {
                    *dict_by_class
                        .entry(TypeCounts::counts_of(word, &spec).unwrap())
                        .or_default() += 1;
                }
                let profile = analytic_profile(&spec, m, n, &cache).unwrap();
                for entry in &profile {
                    let fail = fail_by_class.remove(&entry.counts).unwrap_or(0);
                    let stops = dict_by_class.remove(&entry.counts).unwrap_or(0);
                    assert_eq!(fail, entry.fail, "k={k} m={m} n={n}");
                    assert_eq!(stops, entry.dict, "k={k} m={m} n={n}");
                    assert_eq!(
                        entry.fail,
                        (cache.class_size(&entry.counts) % m).to_u64().unwrap()
                    );
                    assert_eq!(entry.dict % m, 0);
                }
                assert!(fail_by_class.is_empty(), "unprofiled failing classes");
                assert!(dict_by_class.is_empty(), "unprofiled stopping classes");
            }
        }
    }

    #[test]
    fn failure_probabilities_match_closed_forms() {
        let spec = ModelSpec::with_zero_state(2, 0).unwrap();
        let cache = ClassSizeCache::new();
        let p = BigRational::new(3.into(), 10.into());
        let q = BigRational::new(7.into(), 10.into());
        let cond = vec![vec![p.clone(), q.clone()]];

        let cube = |r: &BigRational| r * r * r;
        let want3 = cube(&p) + cube(&q);
        assert_eq!(
            failure_probability_exact(&spec, &cond, 3, 3, &cache).unwrap(),
            want3
        );
        assert_eq!(
            failure_probability_exact(&spec, &cond, 3, 6, &cache).unwrap(),
            &want3 * &want3
        );

        let params = MarkovParams::iid_binary(0.3).unwrap();
        assert!((failure_probability(&params, 3, 3, &cache).unwrap() - 0.37).abs() < 1e-12);
        assert!(
            (failure_probability(&params, 3, 6, &cache).unwrap() - 0.1369).abs() < 1e-12
        );

        // The explicit failure words carry the same mass.
        let dict = GreedyDict::build(&spec, 3, 6).unwrap();
        let explicit: f64 = dict
            .level(6)
            .fail
            .iter()
            .map(|x| params.log2_seq_probability(x).unwrap().exp2())
            .sum();
        assert!((explicit - 0.1369).abs() < 1e-12);

        let bad = vec![vec![p.clone(), p.clone()]];
        assert!(matches!(
            failure_probability_exact(&spec, &bad, 3, 3, &cache),
            Err(Error::InvalidModel(_))
        ));
    }

    #[test]
    fn expected_length_lands_in_the_analytic_bracket() {
        let params = MarkovParams::iid_binary(0.3).unwrap();
        let cache = ClassSizeCache::new();
        assert_eq!(expected_input_length(&params, 3, 0, &cache).unwrap(), 0.0);
        assert_eq!(expected_input_length(&params, 3, 1, &cache).unwrap(), 1.0);

        let l60 = expected_input_length(&params, 3, 60, &cache).unwrap();
        let pq = 0.3 * 0.7;
        assert!(l60 > 1.0 / pq - 1.0 / 7.0, "L(60) = {l60}");
        assert!(l60 <= 1.0 / pq, "L(60) = {l60}");
        // The tail beyond the truncation is already negligible.
        assert!(failure_probability(&params, 3, 60, &cache).unwrap() < 1e-8);
    }

    #[test]
    fn stream_and_configuration_edges_are_reported() {
        let spec = ModelSpec::with_zero_state(2, 0).unwrap();
        let cache = ClassSizeCache::new();
        assert!(matches!(
            run_sequential(&spec, 1, None, [0].into_iter(), &cache),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            run_sequential(&spec, 3, Some(0), [0].into_iter(), &cache),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            run_sequential(&spec, 3, None, [0, 0].into_iter(), &cache),
            Err(Error::StreamExhausted)
        ));
        assert!(matches!(
            run_sequential(&spec, 3, None, [2, 0].into_iter(), &cache),
            Err(Error::SymbolOutOfRange { .. })
        ));
        assert_eq!(
            run_sequential(&spec, 3, Some(3), [0, 0, 0, 1].iter().copied(), &cache).unwrap(),
            VfrOutcome::Failed { len: 3 }
        );
        assert!(matches!(
            GreedyDict::build(&spec, 1, 3),
            Err(Error::Config(_))
        ));

        let mut generator = SequentialGenerator::new(spec, 2, &cache).unwrap();
        assert_eq!(generator.step(0).unwrap(), None);
        assert_eq!(generator.step(1).unwrap(), Some(1));
        assert_eq!(generator.consumed(), 2);
        assert!(generator.step(0).is_err());
    }

    #[test]
    fn synchronized_runs_prime_the_state_from_the_stream() {
        let cache = ClassSizeCache::new();
        let input = [1u8, 0, 0, 1, 0, 1, 1, 0];
        let synced = run_synchronized(2, 1, 3, Some(8), input.iter().copied(), &cache).unwrap();
        let spec = ModelSpec::new(2, 1, vec![1]).unwrap();
        let direct =
            run_sequential(&spec, 3, Some(7), input[1..].iter().copied(), &cache).unwrap();
        match (synced, direct) {
            (
                VfrOutcome::Stopped { value, len },
                VfrOutcome::Stopped { value: v2, len: l2 },
            ) => {
                assert_eq!(value, v2);
                assert_eq!(len, l2 + 1);
            }
            (VfrOutcome::Failed { len }, VfrOutcome::Failed { len: l2 }) => {
                assert_eq!(len, l2 + 1)
            }
            other => panic!("synchronized and direct runs disagree: {other:?}"),
        }
        assert!(matches!(
            run_synchronized(2, 2, 3, None, [0].into_iter(), &cache),
            Err(Error::StreamExhausted)
        ));
        assert!(matches!(
            run_synchronized(2, 2, 3, Some(2), [0, 1, 0].into_iter(), &cache),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn sampled_stop_lengths_match_the_analytic_expectation() {
        let spec = ModelSpec::with_zero_state(2, 1).unwrap();
        let params =
            MarkovParams::new(spec.clone(), vec![vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap();
        let cache = ClassSizeCache::new();
        let m = 4u64;
        let depth = 48u64;
        let exact = expected_input_length(&params, m, depth, &cache).unwrap();

        let trials = 4000u64;
        let mut lengths = Vec::with_capacity(trials as usize);
        let mut histogram = vec![0u64; m as usize];
        let mut failures = 0u64;
        for trial in 0..trials {
            let mut stream = params.sampler(9_000 + trial);
            match run_sequential(&spec, m, Some(depth), &mut stream, &cache).unwrap() {
                VfrOutcome::Stopped { value, len } => {
                    histogram[value as usize] += 1;
                    lengths.push(len as f64);
                }
                VfrOutcome::Failed { len } => {
                    failures += 1;
                    lengths.push(len as f64);
                }
            }
        }
        assert!(failures <= 1, "failures at depth 48 should be rare");
        let mean = lengths.iter().sum::<f64>() / trials as f64;
        let var = lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>()
            / (trials as f64 - 1.0);
        let se = (var / trials as f64).sqrt();
        assert!(
            (mean - exact).abs() < 3.0 * se + 1e-9,
            "mean {mean} vs exact {exact} (se {se})"
        );

        let produced: u64 = histogram.iter().sum();
        let cell = produced as f64 / m as f64;
        let sigma = (produced as f64 * (1.0 / m as f64) * (1.0 - 1.0 / m as f64)).sqrt();
        for (value, &count) in histogram.iter().enumerate() {
            assert!(
                (count as f64 - cell).abs() < 5.0 * sigma,
                "value {value} count {count} vs expected {cell}"
            );
        }
    }
}
