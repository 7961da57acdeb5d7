//! Twice-universal generation: unknown source parameters *and* unknown order.
//!
//! A penalized empirical-entropy rule estimates the order first,
//!
//! ```text
//! k̂(x) = argmin_k  Ĥ_k(x) + alpha^k · φ(n),     0 ≤ k ≤ k_max,
//! ```
//!
//! with ties resolved toward smaller `k` and the all-zero initial state
//! convention for the empirical counts. The *exact* variant then draws the
//! uniform integer from `U(x) = {y ∈ T_k̂(x) : k̂(y) = k̂(x)}` — the subset of
//! the order-`k̂` class whose members would have produced the same estimate —
//! which keeps the output perfectly uniform whenever the order is not
//! underestimated. The *practical* variant skips the agreement filter and
//! runs the plain restricted generator at order `k̂`; it trades a small,
//! quantifiable bias for never having to enumerate the class.
//!
//! The uniformity audit is exact: sequence probabilities are converted to
//! big rationals, and the distance
//!
//! ```text
//! D(F) = Σ_M (1/M) Σ_{r,r'} |Q(r,M) − Q(r',M)|
//! ```
//!
//! (`Q(r,M)` the joint probability of emitting value `r` with range `M`) is
//! returned as a rational with no rounding anywhere.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::fvr::{generate, FvrOutput, TargetSet};
use crate::model::{MarkovParams, ModelSpec, Symbol};
use crate::types::{unrank, ClassSizeCache, TypeCounts, DEFAULT_BRUTE_FORCE_BOUND};

/// Penalty weight `φ(n)` in the order-estimation score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyFn {
    /// MDL-style `(alpha - 1) · log2(n) / (2n)` — vanishing, yet strong
    /// enough to suppress overfitting.
    Mdl,
    /// A constant value (0 disables the penalty).
    Const(f64),
}

impl PenaltyFn {
    pub fn value(&self, alpha: usize, n: u64) -> f64 {
        match self {
            PenaltyFn::Mdl => {
                if n == 0 {
                    0.0
                } else {
                    (alpha as f64 - 1.0) * (n as f64).log2() / (2.0 * n as f64)
                }
            }
            PenaltyFn::Const(c) => *c,
        }
    }
}

/// Order-estimation configuration. `k_max = None` uses
/// [`default_k_max`]`(alpha, n)`.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    pub alpha: usize,
    pub k_max: Option<usize>,
    pub penalty: PenaltyFn,
}

impl EstimatorConfig {
    pub fn mdl(alpha: usize) -> Self {
        Self { alpha, k_max: None, penalty: PenaltyFn::Mdl }
    }

    pub fn k_max_for(&self, n: u64) -> usize {
        self.k_max.unwrap_or_else(|| default_k_max(self.alpha, n))
    }
}

/// Default estimation ceiling `max(0, floor(log_alpha n) - 1)`: grows with
/// `n` slowly enough that the per-state statistics stay meaningful.
pub fn default_k_max(alpha: usize, n: u64) -> usize {
    if n < alpha as u64 {
        return 0;
    }
    let mut k = 0usize;
    let mut pow = alpha as u64;
    // Largest e with alpha^e ≤ n, minus one.
    while pow <= n / alpha as u64 {
        pow *= alpha as u64;
        k += 1;
    }
    k
}

fn zero_state_spec(alpha: usize, k: usize) -> ModelSpec {
    ModelSpec::with_zero_state(alpha, k).expect("alpha validated upstream")
}

/// Empirical conditional entropy of order `k` in bits/symbol, with the
/// all-zero initial-state convention:
/// `Ĥ_k = -(1/n) Σ_{s,a} n_{s,a} log2(n_{s,a}/n_s)`.
pub fn empirical_conditional_entropy(x: &[Symbol], alpha: usize, k: usize) -> Result<f64> {
    if x.is_empty() {
        return Ok(0.0);
    }
    let t = TypeCounts::counts_of(x, &zero_state_spec(alpha, k))?;
    let mut acc = 0.0f64;
    for (_, row) in t.rows() {
        let n_s: u64 = row.iter().sum();
        for &c in &row {
            if c > 0 {
                acc += c as f64 * ((n_s as f64).log2() - (c as f64).log2());
            }
        }
    }
    Ok(acc / x.len() as f64)
}

/// The estimate plus the full score vector (index = candidate order).
#[derive(Debug, Clone)]
pub struct OrderEstimate {
    pub k_hat: usize,
    pub scores: Vec<f64>,
}

/// Penalized-entropy order estimation; ties break toward smaller orders.
pub fn estimate_order(x: &[Symbol], cfg: &EstimatorConfig) -> Result<OrderEstimate> {
    let n = x.len() as u64;
    let k_max = cfg.k_max_for(n);
    let phi = cfg.penalty.value(cfg.alpha, n);
    let mut scores = Vec::with_capacity(k_max + 1);
    let mut best = 0usize;
    for k in 0..=k_max {
        let score =
            empirical_conditional_entropy(x, cfg.alpha, k)? + (cfg.alpha as f64).powi(k as i32) * phi;
        if score < scores.get(best).copied().unwrap_or(f64::INFINITY) {
            best = k;
        }
        scores.push(score);
    }
    Ok(OrderEstimate { k_hat: best, scores })
}

/// Output of a twice-universal generator: the uniform draw plus the order it
/// was drawn at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TuOutput {
    pub output: FvrOutput,
    pub k_hat: usize,
}

/// `U(x)`: members of the order-`k̂(x)` class of `x` (zero initial state)
/// whose own estimate agrees, in rank order. Enumerates the class by
/// unranking, so cost is `|T|` estimator runs, not `alpha^n`.
pub fn order_class(
    x: &[Symbol],
    cfg: &EstimatorConfig,
    cache: &ClassSizeCache,
) -> Result<Vec<Vec<Symbol>>> {
    let k_hat = estimate_order(x, cfg)?.k_hat;
    let t = TypeCounts::counts_of(x, &zero_state_spec(cfg.alpha, k_hat))?;
    let size = cache.class_size(&t);
    if BigUint::from(DEFAULT_BRUTE_FORCE_BOUND) < size {
        return Err(Error::ResourceLimit(format!(
            "order class of size {size} exceeds the enumeration bound"
        )));
    }
    let mut members = Vec::new();
    let mut i = BigUint::zero();
    while i < size {
        let y = unrank(&t, &i, cache)?;
        if estimate_order(&y, cfg)?.k_hat == k_hat {
            members.push(y);
        }
        i += 1u32;
    }
    Ok(members)
}

/// Exact twice-universal generator: rank within `U(x)`, split by the greedy
/// target decomposition of `|U(x)|`.
pub fn extract_exact(
    x: &[Symbol],
    cfg: &EstimatorConfig,
    target: &TargetSet,
    cache: &ClassSizeCache,
) -> Result<TuOutput> {
    let k_hat = estimate_order(x, cfg)?.k_hat;
    let members = order_class(x, cfg, cache)?;
    let idx = members
        .iter()
        .position(|m| m == x)
        .expect("x belongs to its own agreement class");
    let output = slice_output(&BigUint::from(members.len()), &BigUint::from(idx), target)?;
    Ok(TuOutput { output, k_hat })
}

/// Practical twice-universal generator: the plain restricted generator run at
/// the estimated order.
pub fn extract_practical(
    x: &[Symbol],
    cfg: &EstimatorConfig,
    target: &TargetSet,
    cache: &ClassSizeCache,
) -> Result<TuOutput> {
    let k_hat = estimate_order(x, cfg)?.k_hat;
    let output = generate(x, &zero_state_spec(cfg.alpha, k_hat), target, cache)?;
    Ok(TuOutput { output, k_hat })
}

/// Map a rank inside a set of `nu` equiprobable elements to (value, range)
/// through the greedy decomposition's contiguous slices.
fn slice_output(nu: &BigUint, index: &BigUint, target: &TargetSet) -> Result<FvrOutput> {
    debug_assert!(index < nu);
    let mut r = index.clone();
    let mut rem = nu.clone();
    loop {
        let m = target.gtarg(&rem)?;
        if r < m {
            return Ok(FvrOutput { value: r, range: m });
        }
        rem -= &m;
        r -= &m;
    }
}

/// Which generator a uniformity audit should evaluate.
#[derive(Debug, Clone)]
pub enum Scheme {
    /// Restricted generator at a fixed order (zero initial state).
    FixedOrder(usize),
    /// Exact twice-universal variant.
    TwiceUniversalExact,
    /// Practical twice-universal variant.
    TwiceUniversalPractical,
}

/// All length-`n` sequences in rank (reverse-lexicographic) order.
fn enumerate_sequences(alpha: usize, n: usize) -> Result<Vec<Vec<Symbol>>> {
    let total = (alpha as u128)
        .checked_pow(n as u32)
        .filter(|&t| t <= DEFAULT_BRUTE_FORCE_BOUND as u128)
        .ok_or_else(|| {
            Error::ResourceLimit(format!(
                "alpha^n = {alpha}^{n} exceeds the enumeration bound"
            ))
        })?;
    let mut out = Vec::with_capacity(total as usize);
    let mut y = vec![0 as Symbol; n];
    for mut c in 0..total {
        for slot in y.iter_mut() {
            *slot = (c % alpha as u128) as Symbol;
            c /= alpha as u128;
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// (value, range) for every length-`n` sequence under `scheme`, aligned with
/// [`enumerate_sequences`] order.
fn scheme_outputs(
    alpha: usize,
    n: usize,
    scheme: &Scheme,
    cfg: &EstimatorConfig,
    target: &TargetSet,
    cache: &ClassSizeCache,
) -> Result<Vec<FvrOutput>> {
    let seqs = enumerate_sequences(alpha, n)?;
    match scheme {
        Scheme::FixedOrder(k) => {
            let spec = zero_state_spec(alpha, *k);
            seqs.iter().map(|x| generate(x, &spec, target, cache)).collect()
        }
        Scheme::TwiceUniversalPractical => seqs
            .iter()
            .map(|x| Ok(extract_practical(x, cfg, target, cache)?.output))
            .collect(),
        Scheme::TwiceUniversalExact => {
            // Group the agreement classes once instead of re-enumerating the
            // class for every member: (k̂, type at k̂) keys them exactly.
            let mut groups: HashMap<(usize, TypeCounts), Vec<usize>> = HashMap::new();
            for (i, x) in seqs.iter().enumerate() {
                let k_hat = estimate_order(x, cfg)?.k_hat;
                let t = TypeCounts::counts_of(x, &zero_state_spec(alpha, k_hat))?;
                groups.entry((k_hat, t)).or_default().push(i);
            }
            let mut out = vec![None; seqs.len()];
            for (_, indices) in groups {
                // `indices` is ascending in enumeration order, which *is*
                // rank order restricted to the agreement class.
                let nu = BigUint::from(indices.len());
                for (pos, &i) in indices.iter().enumerate() {
                    let o = slice_output(&nu, &BigUint::from(pos), target)?;
                    out[i] = Some(o);
                }
            }
            Ok(out.into_iter().map(|o| o.expect("every sequence grouped")).collect())
        }
    }
}

/// Exact sequence probability as a big rational (the f64 entries convert
/// exactly; no rounding is introduced).
fn exact_seq_probability(params: &MarkovParams, x: &[Symbol]) -> BigRational {
    let mut state = params.spec().initial_state_index();
    let mut acc = BigRational::one();
    for &a in x {
        let p = params.prob(state, a);
        if p == 0.0 {
            return BigRational::zero();
        }
        acc *= BigRational::from_float(p).expect("finite probability");
        state = params.spec().next_state_index(state, a);
    }
    acc
}

/// Exact distance to uniformity of `scheme` on blocks of length `n` from
/// `params`: `Σ_M (1/M) Σ_{r,r'} |Q(r,M) − Q(r',M)|` over ordered pairs,
/// where `Q(r,M)` is the joint output distribution. Zero iff the output is
/// exactly uniform conditioned on every range.
pub fn distance_to_uniformity(
    params: &MarkovParams,
    n: usize,
    scheme: &Scheme,
    cfg: &EstimatorConfig,
    target: &TargetSet,
    cache: &ClassSizeCache,
) -> Result<BigRational> {
    let alpha = params.spec().alpha();
    if cfg.alpha != alpha {
        return Err(Error::Config(
            "estimator alphabet must match the source alphabet".into(),
        ));
    }
    let seqs = enumerate_sequences(alpha, n)?;
    let outputs = scheme_outputs(alpha, n, scheme, cfg, target, cache)?;
    // Q[M][r], exact.
    let mut q: HashMap<BigUint, HashMap<BigUint, BigRational>> = HashMap::new();
    for (x, o) in seqs.iter().zip(&outputs) {
        let p = exact_seq_probability(params, x);
        *q.entry(o.range.clone())
            .or_default()
            .entry(o.value.clone())
            .or_insert_with(BigRational::zero) += p;
    }
    let mut d = BigRational::zero();
    for (m, per_value) in q {
        let m_usize = m.to_usize().ok_or_else(|| {
            Error::ResourceLimit(format!("range {m} too large to audit exhaustively"))
        })?;
        let mut values = vec![BigRational::zero(); m_usize];
        for (r, p) in per_value {
            values[r.to_usize().expect("value < range")] = p;
        }
        let mut pair_sum = BigRational::zero();
        for a in &values {
            for b in &values {
                pair_sum += (a - b).abs();
            }
        }
        d += pair_sum / BigRational::from_integer(m_usize.into());
    }
    Ok(d)
}

/// Exact probability that the estimator returns an order below the true one.
pub fn underestimation_probability(
    params: &MarkovParams,
    n: usize,
    cfg: &EstimatorConfig,
) -> Result<BigRational> {
    estimate_mismatch_probability(params, n, cfg, |k_hat, k_true| k_hat < k_true)
}

/// Exact probability that the estimator returns an order above the true one.
pub fn overestimation_probability(
    params: &MarkovParams,
    n: usize,
    cfg: &EstimatorConfig,
) -> Result<BigRational> {
    estimate_mismatch_probability(params, n, cfg, |k_hat, k_true| k_hat > k_true)
}

fn estimate_mismatch_probability(
    params: &MarkovParams,
    n: usize,
    cfg: &EstimatorConfig,
    mismatch: impl Fn(usize, usize) -> bool,
) -> Result<BigRational> {
    let k_true = params.spec().order();
    let mut acc = BigRational::zero();
    for x in enumerate_sequences(params.spec().alpha(), n)? {
        let k_hat = estimate_order(&x, cfg)?.k_hat;
        if mismatch(k_hat, k_true) {
            acc += exact_seq_probability(params, &x);
        }
    }
    Ok(acc)
}
