//! Uniformity audits.
//!
//! The load-bearing check is exhaustive and exact: enumerate every input of a
//! given length, push each through the generator under test, and verify that
//! within every conditioning cell — a grouping key (typically the type class)
//! together with the realized output range `M` — each value `0..M` is hit by
//! *exactly* the same number of inputs. Since inputs in a cell are
//! equiprobable under every source the scheme is universal for, equal counts
//! are equivalent to perfect uniformity; no probabilities, tolerances, or
//! floating point enter the verdict.
//!
//! A seeded chi-square smoke test complements it for runs too long to
//! enumerate. That test can only catch gross bias; the exact audit is the
//! ground truth.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use num_traits::ToPrimitive;
use unirng::fvr::FvrOutput;
use unirng::vfr::{run_sequential, GreedyDict, VfrOutcome};
use unirng::{ClassSizeCache, Error, MarkovParams, ModelSpec, Result, Symbol, TypeCounts};

use crate::stats::{chi_square_uniform, ChiSquare};

/// All `alpha^n` sequences of length `n`, in counter order. `bound` caps the
/// enumeration size.
pub fn enumerate_sequences(alpha: usize, n: usize, bound: u64) -> Result<Vec<Vec<Symbol>>> {
    if alpha < 2 {
        return Err(Error::Config(format!(
            "alphabet size must be at least 2, got {alpha}"
        )));
    }
    let total = (alpha as u128)
        .checked_pow(n as u32)
        .filter(|&t| t <= bound as u128)
        .ok_or_else(|| {
            Error::ResourceLimit(format!(
                "alpha^n = {alpha}^{n} exceeds the enumeration bound {bound}"
            ))
        })?;
    let mut seqs = Vec::with_capacity(total as usize);
    let mut x = vec![0 as Symbol; n];
    for mut c in 0..total {
        for slot in x.iter_mut() {
            *slot = (c % alpha as u128) as Symbol;
            c /= alpha as u128;
        }
        seqs.push(x.clone());
    }
    Ok(seqs)
}

/// Result of an exhaustive fixed-to-variable audit.
#[derive(Debug, Clone)]
pub struct ExactReport {
    /// Number of inputs enumerated.
    pub inputs: u64,
    /// Number of (group, range) cells examined.
    pub cells: usize,
    /// Largest difference between the most- and least-hit value in any cell.
    /// Zero means perfect uniformity.
    pub worst_spread: u64,
}

impl ExactReport {
    pub fn pass(&self) -> bool {
        self.worst_spread == 0
    }
}

/// Exhaustive audit of a fixed-to-variable scheme: map every length-`n`
/// input through `scheme`, group by `group(x)` and the realized range, and
/// demand exactly equal counts per value inside every cell.
pub fn exact_fv_audit<K: Eq + Hash>(
    alpha: usize,
    n: usize,
    bound: u64,
    mut group: impl FnMut(&[Symbol]) -> Result<K>,
    mut scheme: impl FnMut(&[Symbol]) -> Result<FvrOutput>,
) -> Result<ExactReport> {
    let seqs = enumerate_sequences(alpha, n, bound)?;
    let mut cells: HashMap<(K, u64), Vec<u64>> = HashMap::new();
    for x in &seqs {
        let key = group(x)?;
        let out = scheme(x)?;
        let m = out
            .range
            .to_u64()
            .filter(|&m| m <= bound)
            .ok_or_else(|| {
                Error::ResourceLimit(format!(
                    "output range {} exceeds the audit bound {bound}",
                    out.range
                ))
            })?;
        let v = out
            .value
            .to_u64()
            .filter(|&v| v < m)
            .ok_or_else(|| Error::InvalidModel(format!("value {} outside 0..{m}", out.value)))?;
        let counts = cells.entry((key, m)).or_insert_with(|| vec![0; m as usize]);
        counts[v as usize] += 1;
    }
    let mut worst = 0u64;
    for counts in cells.values() {
        let hi = *counts.iter().max().expect("cell ranges are at least 1");
        let lo = *counts.iter().min().expect("cell ranges are at least 1");
        worst = worst.max(hi - lo);
    }
    Ok(ExactReport {
        inputs: seqs.len() as u64,
        cells: cells.len(),
        worst_spread: worst,
    })
}

/// Result of an exhaustive variable-to-fixed audit.
#[derive(Debug, Clone)]
pub struct VfExactReport {
    pub levels: u64,
    /// (level, type class) cells with at least one stopping word.
    pub cells: usize,
    pub worst_spread: u64,
    /// Levels whose dictionary size is not a multiple of `M` (must be zero:
    /// labels are assigned round-robin inside every class).
    pub ragged_levels: u64,
}

impl VfExactReport {
    pub fn pass(&self) -> bool {
        self.worst_spread == 0 && self.ragged_levels == 0
    }
}

/// Exhaustive audit of the explicit variable-to-fixed dictionary: at every
/// level, within every type class, each label `0..M` must be assigned to
/// exactly the same number of stopping words. Together with the class-wise
/// equiprobability of sequences this is exact uniformity of the emitted
/// value, whatever the source parameters.
pub fn exact_vf_audit(spec: &ModelSpec, m: u64, depth: u64) -> Result<VfExactReport> {
    let dict = GreedyDict::build(spec, m, depth)?;
    let mut cells = 0usize;
    let mut worst = 0u64;
    let mut ragged = 0u64;
    for level in dict.levels() {
        if level.dict.len() % m as usize != 0 {
            ragged += 1;
        }
        let mut per_type: HashMap<TypeCounts, Vec<u64>> = HashMap::new();
        for (word, label) in &level.dict {
            per_type
                .entry(TypeCounts::counts_of(word, spec)?)
                .or_insert_with(|| vec![0; m as usize])[*label as usize] += 1;
        }
        for counts in per_type.values() {
            let hi = *counts.iter().max().expect("m >= 2");
            let lo = *counts.iter().min().expect("m >= 2");
            worst = worst.max(hi - lo);
            cells += 1;
        }
    }
    Ok(VfExactReport {
        levels: dict.levels().len() as u64,
        cells,
        worst_spread: worst,
        ragged_levels: ragged,
    })
}

/// Result of a sampled variable-to-fixed run.
#[derive(Debug, Clone)]
pub struct SampledVfReport {
    pub trials: u64,
    pub produced: u64,
    pub failures: u64,
    pub histogram: Vec<u64>,
    pub chi: Option<ChiSquare>,
    pub warning: Option<String>,
}

/// Sampled smoke test of the sequential variable-to-fixed generator: run
/// `trials` independent streams (seeds `seed`, `seed+1`, ...) to truncation
/// depth `depth`, and chi-square the emitted values. If the requested trial
/// count would leave fewer than five expected observations per value, it is
/// raised and a warning recorded.
pub fn sampled_vf_uniformity(
    params: &MarkovParams,
    m: u64,
    depth: u64,
    trials: u64,
    seed: u64,
    cache: &ClassSizeCache,
) -> Result<SampledVfReport> {
    let floor = 5 * m;
    let (trials, warning) = if trials < floor {
        (
            floor,
            Some(format!(
                "raised trials from {trials} to {floor} to keep at least 5 expected counts per value"
            )),
        )
    } else {
        (trials, None)
    };
    let mut histogram = vec![0u64; m as usize];
    let mut failures = 0u64;
    for i in 0..trials {
        let mut stream = params.sampler(seed.wrapping_add(i));
        match run_sequential(params.spec(), m, Some(depth), &mut stream, cache)? {
            VfrOutcome::Stopped { value, .. } => histogram[value as usize] += 1,
            VfrOutcome::Failed { .. } => failures += 1,
        }
    }
    let produced = trials - failures;
    let chi = chi_square_uniform(&histogram);
    Ok(SampledVfReport {
        trials,
        produced,
        failures,
        histogram,
        chi,
        warning,
    })
}

/// Per-range chi-square results of a sampled fixed-to-variable run: draw
/// `trials` blocks of length `n` from the source and histogram the scheme's
/// outputs by realized range. Ranges whose expected per-value count falls
/// below five are reported without a test statistic.
pub struct SampledFvReport {
    pub trials: u64,
    /// (range, histogram, chi-square when well-populated)
    pub per_range: Vec<(u64, Vec<u64>, Option<ChiSquare>)>,
}

pub fn sampled_fv_uniformity(
    params: &MarkovParams,
    n: usize,
    trials: u64,
    seed: u64,
    mut scheme: impl FnMut(&[Symbol]) -> Result<FvrOutput>,
) -> Result<SampledFvReport> {
    let mut cells: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for i in 0..trials {
        let x = params.sample(n, seed.wrapping_add(i));
        let out = scheme(&x)?;
        let m = out.range.to_u64().ok_or_else(|| {
            Error::ResourceLimit(format!("output range {} too large to histogram", out.range))
        })?;
        let v = out.value.to_u64().expect("value below a u64 range");
        cells.entry(m).or_insert_with(|| vec![0; m as usize])[v as usize] += 1;
    }
    let per_range = cells
        .into_iter()
        .map(|(m, hist)| {
            let total: u64 = hist.iter().sum();
            let chi = if total >= 5 * m {
                chi_square_uniform(&hist)
            } else {
                None
            };
            (m, hist, chi)
        })
        .collect();
    Ok(SampledFvReport { trials, per_range })
}
