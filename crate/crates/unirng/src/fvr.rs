//! Fixed-to-variable generation: one input block, one uniform integer.
//!
//! The basic generator maps `x^n` to its rank inside its own type class — a
//! uniform draw from `0..|T|` whatever the source parameters, because class
//! members are equiprobable. When the consumer can only use ranges from a
//! restricted *target set* (say powers of two), the class is split greedily:
//! repeatedly carve off the largest admissible range `gtarg(remaining)` and
//! map the ranks falling in that slice to a uniform draw over it. Both
//! variants are exactly uniform conditioned on the emitted range.
//!
//! Targets must be `c`-dense (`m ≤ c·gtarg(m)` for every `m ≥ 1`) for the
//! expected length loss to stay bounded; explicit finite targets therefore
//! carry a verified bound and refuse classes beyond it.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::bigmath::log2_biguint;
use crate::error::{Error, Result};
use crate::model::{MarkovParams, ModelSpec, Symbol};
use crate::types::{all_types, rank, ClassSizeCache, TypeCounts};

/// A set of admissible output ranges, closed under the "largest element not
/// exceeding m" query.
#[derive(Debug, Clone)]
pub enum TargetSet {
    /// Every positive integer: the unrestricted (rank, class size) generator.
    AllIntegers,
    /// Powers `p^e`, `e ≥ 0`; output can be re-expressed as `e` base-`p`
    /// digits.
    PowersOf(u64),
    /// An explicit finite menu of ranges.
    Explicit(ExplicitTarget),
}

/// Sorted, deduplicated explicit target values; always contains 1 so greedy
/// decomposition terminates. Density is only verifiable up to the largest
/// value, so queries beyond it are configuration errors.
#[derive(Debug, Clone)]
pub struct ExplicitTarget {
    values: Vec<BigUint>,
    density: f64,
}

impl ExplicitTarget {
    pub fn new(mut values: Vec<BigUint>) -> Result<Self> {
        values.sort();
        values.dedup();
        if values.first() != Some(&BigUint::one()) {
            return Err(Error::Config(
                "explicit target must contain 1 (and no zero)".into(),
            ));
        }
        // Worst density ratio m / gtarg(m) occurs just below each next value.
        let mut density = 1.0f64;
        for w in values.windows(2) {
            let worst = &w[1] - 1u32;
            let ratio = worst.to_f64().unwrap_or(f64::INFINITY)
                / w[0].to_f64().unwrap_or(f64::INFINITY);
            density = density.max(ratio);
        }
        Ok(Self { values, density })
    }

    /// Largest value for which density was verified.
    pub fn verified_bound(&self) -> &BigUint {
        self.values.last().expect("nonempty")
    }

    /// The verified density constant `c`: `m ≤ c·gtarg(m)` for all
    /// `m ≤ verified_bound()`.
    pub fn density(&self) -> f64 {
        self.density
    }
}

impl TargetSet {
    /// Powers-of-two shorthand.
    pub fn pow2() -> Self {
        TargetSet::PowersOf(2)
    }

    /// Largest target value `≤ m` (`m ≥ 1`). Errors for non-positive `m`, a
    /// power base below 2, or an explicit query beyond the verified bound.
    pub fn gtarg(&self, m: &BigUint) -> Result<BigUint> {
        if m.is_zero() {
            return Err(Error::Config("gtarg needs a positive argument".into()));
        }
        match self {
            TargetSet::AllIntegers => Ok(m.clone()),
            TargetSet::PowersOf(p) => {
                if *p < 2 {
                    return Err(Error::Config(format!("power base {p} must be ≥ 2")));
                }
                let mut acc = BigUint::one();
                loop {
                    let next = &acc * *p;
                    if &next > m {
                        return Ok(acc);
                    }
                    acc = next;
                }
            }
            TargetSet::Explicit(t) => {
                if m > t.verified_bound() {
                    return Err(Error::Config(format!(
                        "explicit target density unverified beyond {} (queried {m})",
                        t.verified_bound()
                    )));
                }
                let pos = t.values.partition_point(|v| v <= m);
                Ok(t.values[pos - 1].clone())
            }
        }
    }

    /// Density constant `c` such that `m ≤ c·gtarg(m)` on the verified range:
    /// 1 for all integers, `p` for powers of `p`.
    pub fn density(&self) -> f64 {
        match self {
            TargetSet::AllIntegers => 1.0,
            TargetSet::PowersOf(p) => *p as f64,
            TargetSet::Explicit(t) => t.density(),
        }
    }
}

/// Greedy decomposition of `nu` into non-increasing target values summing to
/// `nu` (the multiset of subclass sizes used by the restricted generator).
pub fn decompose_greedy(nu: &BigUint, target: &TargetSet) -> Result<Vec<BigUint>> {
    let mut rem = nu.clone();
    let mut parts = Vec::new();
    while !rem.is_zero() {
        let m = target.gtarg(&rem)?;
        rem -= &m;
        parts.push(m);
    }
    Ok(parts)
}

/// A uniform draw: `value` is uniform over `0..range` conditioned on `range`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FvrOutput {
    pub value: BigUint,
    pub range: BigUint,
}

impl FvrOutput {
    /// Base-`p` digits of `value`, most significant first, when `range = p^e`
    /// — the natural form for powers targets. `None` if `range` is not a
    /// power of `p`.
    pub fn digits(&self, p: u64) -> Option<Vec<u64>> {
        if p < 2 {
            return None;
        }
        let mut e = 0u32;
        let mut acc = BigUint::one();
        while acc < self.range {
            acc *= p;
            e += 1;
        }
        if acc != self.range {
            return None;
        }
        let mut digits = vec![0u64; e as usize];
        let mut v = self.value.clone();
        for d in digits.iter_mut().rev() {
            *d = (&v % p).to_u64().expect("digit fits");
            v /= p;
        }
        Some(digits)
    }
}

/// Unrestricted generator: `(rank, class size)`.
pub fn generate_unrestricted(
    x: &[Symbol],
    spec: &ModelSpec,
    cache: &ClassSizeCache,
) -> Result<FvrOutput> {
    generate(x, spec, &TargetSet::AllIntegers, cache)
}

/// Restricted generator: walk the greedy decomposition of the class size and
/// emit the rank's offset inside the slice it falls in.
pub fn generate(
    x: &[Symbol],
    spec: &ModelSpec,
    target: &TargetSet,
    cache: &ClassSizeCache,
) -> Result<FvrOutput> {
    let t = TypeCounts::counts_of(x, spec)?;
    let mut remaining = cache.class_size(&t);
    let mut r = rank(x, spec, cache)?;
    debug_assert!(!remaining.is_zero());
    loop {
        let m = target.gtarg(&remaining)?;
        if r < m {
            return Ok(FvrOutput { value: r, range: m });
        }
        remaining -= &m;
        r -= &m;
    }
}

/// Self-synchronizing variant: the first `k` input symbols become the initial
/// state and generation runs on the remainder, so sender and receiver need no
/// prior state agreement.
pub fn generate_synchronized(
    x: &[Symbol],
    alpha: usize,
    k: usize,
    target: &TargetSet,
    cache: &ClassSizeCache,
) -> Result<FvrOutput> {
    if x.len() < k {
        return Err(Error::Config(format!(
            "synchronized generation needs at least k = {k} symbols, got {}",
            x.len()
        )));
    }
    let spec = ModelSpec::new(alpha, k, x[..k].to_vec())?;
    generate(&x[k..], &spec, target, cache)
}

/// Expected output length `Σ_i (M_i/|T|)·log2 M_i` of the restricted
/// generator conditioned on class `t`, in bits.
pub fn conditional_length(
    t: &TypeCounts,
    target: &TargetSet,
    cache: &ClassSizeCache,
) -> Result<f64> {
    let size = cache.class_size(t);
    if size.is_zero() {
        return Err(Error::Config("conditional length of an empty class".into()));
    }
    let log_size = log2_biguint(&size);
    let mut acc = 0.0f64;
    for m in decompose_greedy(&size, target)? {
        let log_m = log2_biguint(&m);
        acc += (log_m - log_size).exp2() * log_m;
    }
    Ok(acc)
}

/// `log2` of the probability that the source emits a *specific* member of
/// class `t` (all members are equiprobable): `Σ_{s,a} n_{s,a} log2 p(a|s)`.
pub fn log2_member_probability(t: &TypeCounts, params: &MarkovParams) -> f64 {
    let mut acc = 0.0f64;
    for ((s, a), c) in t.iter() {
        let p = params.prob(s, a);
        if p == 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += c as f64 * p.log2();
    }
    acc
}

/// Exact expected output length of the restricted generator at block length
/// `n`: `Σ_T P(T) · Λ(T)` over all nonempty classes.
pub fn expected_output_length(
    params: &MarkovParams,
    n: u64,
    target: &TargetSet,
    cache: &ClassSizeCache,
) -> Result<f64> {
    expected_over_types(params, n, cache, |t, _| conditional_length(t, target, cache))
}

/// Exact expected `log2 |T|` at block length `n` — the unrestricted
/// generator's output length, and the yardstick the block entropy is compared
/// against.
pub fn expected_log_class_size(
    params: &MarkovParams,
    n: u64,
    cache: &ClassSizeCache,
) -> Result<f64> {
    expected_over_types(params, n, cache, |_, size| Ok(log2_biguint(size)))
}

fn expected_over_types(
    params: &MarkovParams,
    n: u64,
    cache: &ClassSizeCache,
    mut quantity: impl FnMut(&TypeCounts, &BigUint) -> Result<f64>,
) -> Result<f64> {
    let mut acc = 0.0f64;
    for t in all_types(params.spec(), n)? {
        let size = cache.class_size(&t);
        let log_member = log2_member_probability(&t, params);
        if log_member == f64::NEG_INFINITY {
            continue;
        }
        let p_class = (log2_biguint(&size) + log_member).exp2();
        if p_class > 0.0 {
            acc += p_class * quantity(&t, &size)?;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::binary_entropy;
    use std::collections::HashMap;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn gtarg_hand_values() {
        let all = TargetSet::AllIntegers;
        assert_eq!(all.gtarg(&big(77)).unwrap(), big(77));
        let pow2 = TargetSet::pow2();
        assert_eq!(pow2.gtarg(&big(77)).unwrap(), big(64));
        assert_eq!(pow2.gtarg(&big(1)).unwrap(), big(1));
        let pow3 = TargetSet::PowersOf(3);
        assert_eq!(pow3.gtarg(&big(80)).unwrap(), big(27));
        assert_eq!(pow3.gtarg(&big(81)).unwrap(), big(81));
        assert!(all.gtarg(&BigUint::zero()).is_err());
        assert!(TargetSet::PowersOf(1).gtarg(&big(5)).is_err());
    }

    #[test]
    fn explicit_targets_validate_and_bound() {
        let t = ExplicitTarget::new(vec![big(6), big(1), big(2), big(3), big(6)]).unwrap();
        assert_eq!(t.verified_bound(), &big(6));
        // Worst ratio: m = 5 with gtarg 3.
        assert!((t.density() - 5.0 / 3.0).abs() < 1e-12);
        let target = TargetSet::Explicit(t);
        assert_eq!(target.gtarg(&big(5)).unwrap(), big(3));
        assert!(target.gtarg(&big(7)).is_err());
        assert_eq!(
            decompose_greedy(&big(5), &target).unwrap(),
            vec![big(3), big(2)]
        );
        assert!(ExplicitTarget::new(vec![big(2), big(4)]).is_err());
    }

    #[test]
    fn greedy_decomposition_is_the_radix_expansion_for_power_targets() {
        // 77 = 64 + 8 + 4 + 1 in binary.
        assert_eq!(
            decompose_greedy(&big(77), &TargetSet::pow2()).unwrap(),
            vec![big(64), big(8), big(4), big(1)]
        );
        // 20 = 202 in base 3: two nines, zero threes, two ones.
        assert_eq!(
            decompose_greedy(&big(20), &TargetSet::PowersOf(3)).unwrap(),
            vec![big(9), big(9), big(1), big(1)]
        );
        // In general the multiplicity of p^e is the e-th base-p digit.
        let parts = decompose_greedy(&big(1234), &TargetSet::PowersOf(5)).unwrap();
        let mut mult: HashMap<BigUint, u64> = HashMap::new();
        for p in parts {
            *mult.entry(p).or_insert(0) += 1;
        }
        // 1234 = 14414 in base 5.
        assert_eq!(mult[&big(625)], 1);
        assert_eq!(mult[&big(125)], 4);
        assert_eq!(mult[&big(25)], 4);
        assert_eq!(mult[&big(5)], 1);
        assert_eq!(mult[&big(1)], 4);
        assert_eq!(decompose_greedy(&BigUint::zero(), &TargetSet::pow2()).unwrap(), vec![]);
    }

    #[test]
    fn unrestricted_output_is_rank_and_class_size() {
        let spec = ModelSpec::with_zero_state(2, 1).unwrap();
        let cache = ClassSizeCache::new();
        let x = [0, 1, 1, 0];
        let out = generate_unrestricted(&x, &spec, &cache).unwrap();
        // Class {1100, 0110} in reverse-lex order puts 0110 at rank 1.
        assert_eq!(out, FvrOutput { value: big(1), range: big(2) });
        // Restricted to powers of two with |T| = 2 the answer is identical.
        let out2 = generate(&x, &spec, &TargetSet::pow2(), &cache).unwrap();
        assert_eq!(out, out2);
    }

    #[test]
    fn exact_uniformity_conditioned_on_range_exhaustively() {
        // For every type class, each output value of a given range must be
        // hit by the same number of members — the generator is a balanced
        // relabeling of the class. Checked for two orders and two targets.
        let cache = ClassSizeCache::new();
        for k in 0..=1usize {
            let spec = ModelSpec::with_zero_state(2, k).unwrap();
            for target in [TargetSet::pow2(), TargetSet::PowersOf(3)] {
                let n = 8u32;
                let mut per_type: HashMap<TypeCounts, HashMap<(BigUint, BigUint), u64>> =
                    HashMap::new();
                for bits in 0..(1u32 << n) {
                    let x: Vec<Symbol> =
                        (0..n).map(|i| ((bits >> i) & 1) as Symbol).collect();
                    let t = TypeCounts::counts_of(&x, &spec).unwrap();
                    let out = generate(&x, &spec, &target, &cache).unwrap();
                    *per_type
                        .entry(t)
                        .or_default()
                        .entry((out.range, out.value))
                        .or_insert(0) += 1;
                }
                for (t, hits) in per_type {
                    let size = cache.class_size(&t);
                    let parts = decompose_greedy(&size, &target).unwrap();
                    let mut expected: HashMap<BigUint, u64> = HashMap::new();
                    for p in &parts {
                        *expected.entry(p.clone()).or_insert(0) += 1;
                    }
                    // Every value 0..range occurs `multiplicity(range)` times.
                    for (range, mult) in expected {
                        let mut v = BigUint::zero();
                        while v < range {
                            assert_eq!(
                                hits.get(&(range.clone(), v.clone())),
                                Some(&mult),
                                "k={k} range={range}"
                            );
                            v += 1u32;
                        }
                    }
                    let total: u64 = hits.values().sum();
                    assert_eq!(BigUint::from(total), size);
                }
            }
        }
    }

    #[test]
    fn digit_expansion_matches_value() {
        let out = FvrOutput { value: big(11), range: big(16) };
        assert_eq!(out.digits(2).unwrap(), vec![1, 0, 1, 1]);
        let out = FvrOutput { value: big(20), range: big(27) };
        assert_eq!(out.digits(3).unwrap(), vec![2, 0, 2]);
        let out = FvrOutput { value: big(3), range: big(12) };
        assert_eq!(out.digits(2), None);
        // range = 1 → zero digits.
        let out = FvrOutput { value: BigUint::zero(), range: big(1) };
        assert_eq!(out.digits(2).unwrap(), Vec::<u64>::new());
    }

    #[test]
    fn conditional_length_hand_value() {
        // |T| = C(4,2) = 6 under the memoryless model; powers of two split it
        // as 4 + 2, so Λ = (4·2 + 2·1)/6 = 5/3 bits.
        let spec = ModelSpec::with_zero_state(2, 0).unwrap();
        let cache = ClassSizeCache::new();
        let t = TypeCounts::counts_of(&[0, 0, 1, 1], &spec).unwrap();
        let lambda = conditional_length(&t, &TargetSet::pow2(), &cache).unwrap();
        assert!((lambda - 5.0 / 3.0).abs() < 1e-12);
        // Unrestricted: Λ = log2 6 exactly.
        let lambda = conditional_length(&t, &TargetSet::AllIntegers, &cache).unwrap();
        assert!((lambda - 6f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn per_class_loss_is_bounded_by_density() {
        // log2 |T| - Λ(T) ∈ [0, p·log2 p - (p-1)·log2(p-1)] for powers of p.
        let cache = ClassSizeCache::new();
        for (p, bound) in [(2u64, 2.0f64), (3, 3.0 * 3f64.log2() - 2.0)] {
            let target = TargetSet::PowersOf(p);
            for k in 0..=1usize {
                let spec = ModelSpec::with_zero_state(2, k).unwrap();
                for t in all_types(&spec, 10).unwrap() {
                    let lambda = conditional_length(&t, &target, &cache).unwrap();
                    let log_size = log2_biguint(&cache.class_size(&t));
                    assert!(lambda <= log_size + 1e-9, "p={p} k={k}");
                    assert!(
                        log_size - lambda <= bound + 1e-9,
                        "p={p} k={k} loss={}",
                        log_size - lambda
                    );
                }
            }
        }
    }

    #[test]
    fn expected_lengths_nest_and_match_monte_carlo() {
        let params = MarkovParams::iid_binary(0.3).unwrap();
        let cache = ClassSizeCache::new();
        let n = 12u64;
        let e1 = expected_log_class_size(&params, n, &cache).unwrap();
        let e2 = expected_output_length(&params, n, &TargetSet::pow2(), &cache).unwrap();
        // Restriction can only shorten output, by at most 2 bits.
        assert!(e2 <= e1 + 1e-12);
        assert!(e1 - e2 <= 2.0);
        // Both sit below the block entropy n·h(p).
        assert!(e1 <= n as f64 * binary_entropy(0.3) + 1e-12);

        // Monte Carlo cross-check of E[log2 |T|]: 20k samples, 3-sigma band.
        let trials = 20_000usize;
        let mut sum = 0.0f64;
        let mut sumsq = 0.0f64;
        for trial in 0..trials {
            let x = params.sample(n as usize, 500 + trial as u64);
            let t = TypeCounts::counts_of(&x, params.spec()).unwrap();
            let v = log2_biguint(&cache.class_size(&t));
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / trials as f64;
        let se = ((sumsq / trials as f64 - mean * mean) / trials as f64).sqrt();
        assert!(
            (mean - e1).abs() <= 3.0 * se,
            "mean={mean} exact={e1} se={se}"
        );
    }

    #[test]
    fn synchronized_variant_uses_the_prefix_as_state() {
        let cache = ClassSizeCache::new();
        let x = [1, 0, 1, 1, 0, 0, 1];
        let manual_spec = ModelSpec::new(2, 1, vec![1]).unwrap();
        let expected = generate(&x[1..], &manual_spec, &TargetSet::pow2(), &cache).unwrap();
        let got = generate_synchronized(&x, 2, 1, &TargetSet::pow2(), &cache).unwrap();
        assert_eq!(got, expected);
        assert!(generate_synchronized(&x[..0], 2, 1, &TargetSet::pow2(), &cache).is_err());
    }
}
