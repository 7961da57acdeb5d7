//! One-command health check: every family of exact invariants the generators
//! rest on, exercised at desk scale. Each check is deterministic (Monte Carlo
//! checks run under pinned seeds) and fast; the whole suite is meant to
//! finish in well under five minutes.

use std::collections::HashMap;
use std::time::Instant;

use num_bigint::BigUint;
use num_traits::Zero;
use unirng::bigmath::log2_biguint;
use unirng::fvr::{conditional_length, expected_log_class_size, generate, TargetSet};
use unirng::twice_universal::{distance_to_uniformity, extract_exact, EstimatorConfig, Scheme};
use unirng::types::{all_types, class_size, rank, unrank, DEFAULT_BRUTE_FORCE_BOUND};
use unirng::vfr::{expected_input_length, run_sequential, GreedyDict, VfrOutcome};
use unirng::{ClassSizeCache, MarkovParams, ModelSpec, Result, TypeCounts};

use crate::stats::mean_and_se;
use crate::uniformity::{enumerate_sequences, exact_fv_audit};

/// Soft runtime budget; exceeding it degrades the run to a warning, not a
/// failure.
pub const SOFT_TIME_LIMIT_SECS: u64 = 300;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
    pub elapsed_secs: f64,
    pub over_time_budget: bool,
}

impl SelftestReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Run the full suite.
pub fn run_selftest() -> Result<SelftestReport> {
    let start = Instant::now();
    let checks = vec![
        class_counting_check()?,
        rank_roundtrip_check()?,
        fv_uniformity_check()?,
        fv_length_window_check()?,
        vf_dictionary_check()?,
        vf_residue_check()?,
        vf_agreement_check()?,
        tu_uniformity_check()?,
        fv_expectation_check()?,
        vf_expectation_check()?,
    ];
    let elapsed_secs = start.elapsed().as_secs_f64();
    Ok(SelftestReport {
        checks,
        elapsed_secs,
        over_time_budget: elapsed_secs > SOFT_TIME_LIMIT_SECS as f64,
    })
}

fn group_by_type(
    alpha: usize,
    k: usize,
    n: usize,
) -> Result<HashMap<TypeCounts, u64>> {
    let spec = ModelSpec::with_zero_state(alpha, k)?;
    let mut groups: HashMap<TypeCounts, u64> = HashMap::new();
    for x in enumerate_sequences(alpha, n, DEFAULT_BRUTE_FORCE_BOUND)? {
        *groups.entry(TypeCounts::counts_of(&x, &spec)?).or_insert(0) += 1;
    }
    Ok(groups)
}

/// Closed-form class sizes against exhaustive enumeration.
fn class_counting_check() -> Result<Check> {
    let mut classes = 0u64;
    let mut bad = 0u64;
    for (alpha, ks, n_max) in [(2usize, &[0usize, 1, 2][..], 6usize), (3, &[1][..], 4)] {
        for &k in ks {
            for n in 0..=n_max {
                for (t, count) in group_by_type(alpha, k, n)? {
                    classes += 1;
                    if class_size(&t) != BigUint::from(count) {
                        bad += 1;
                    }
                }
            }
        }
    }
    Ok(Check {
        name: "class-counting",
        pass: bad == 0,
        detail: format!("{classes} classes vs enumeration, {bad} mismatches"),
    })
}

/// rank/unrank are mutually inverse and hit exactly 0..|T|.
fn rank_roundtrip_check() -> Result<Check> {
    let cache = ClassSizeCache::new();
    let spec = ModelSpec::with_zero_state(2, 1)?;
    let mut members = 0u64;
    let mut bad = 0u64;
    for t in all_types(&spec, 7)? {
        let size = cache.class_size(&t);
        let mut i = BigUint::zero();
        while i < size {
            let x = unrank(&t, &i, &cache)?;
            if rank(&x, &spec, &cache)? != i {
                bad += 1;
            }
            members += 1;
            i += 1u32;
        }
    }
    Ok(Check {
        name: "rank-roundtrip",
        pass: bad == 0,
        detail: format!("{members} members round-tripped, {bad} mismatches"),
    })
}

/// Exhaustive equal-counts audit of the restricted generator.
fn fv_uniformity_check() -> Result<Check> {
    let cache = ClassSizeCache::new();
    let spec = ModelSpec::with_zero_state(2, 1)?;
    let mut worst = 0u64;
    let mut cells = 0usize;
    for target in [TargetSet::AllIntegers, TargetSet::PowersOf(2)] {
        let report = exact_fv_audit(
            2,
            8,
            DEFAULT_BRUTE_FORCE_BOUND,
            |x| TypeCounts::counts_of(x, &spec),
            |x| generate(x, &spec, &target, &cache),
        )?;
        worst = worst.max(report.worst_spread);
        cells += report.cells;
    }
    Ok(Check {
        name: "fv-exact-uniformity",
        pass: worst == 0,
        detail: format!("{cells} cells audited, worst spread {worst}"),
    })
}

/// The restricted output length lies within p·h(1/p) bits of log2 |T|.
fn fv_length_window_check() -> Result<Check> {
    let cache = ClassSizeCache::new();
    let spec = ModelSpec::with_zero_state(2, 0)?;
    let target = TargetSet::PowersOf(2);
    // p·h(1/p) at p = 2 is exactly 2 bits.
    let window = 2.0 + 1e-9;
    let mut bad = 0u64;
    let mut types = 0u64;
    for t in all_types(&spec, 8)? {
        let size = cache.class_size(&t);
        if size.is_zero() {
            continue;
        }
        let gap = log2_biguint(&size) - conditional_length(&t, &target, &cache)?;
        if !(-1e-9..=window).contains(&gap) {
            bad += 1;
        }
        types += 1;
    }
    Ok(Check {
        name: "fv-length-window",
        pass: bad == 0,
        detail: format!("{types} classes, gap within [0, 2] bits, {bad} violations"),
    })
}

/// The ternary-range dictionary over a memoryless binary source matches its
/// hand-checked structure.
fn vf_dictionary_check() -> Result<Check> {
    let spec = ModelSpec::with_zero_state(2, 0)?;
    let dict = GreedyDict::build(&spec, 3, 6)?;
    let level3 = dict.level(3);
    let level6 = dict.level(6);
    let ok = level3.fail == vec![vec![0, 0, 0], vec![1, 1, 1]]
        && level3.dict.len() == 6
        && level3.dict[0] == (vec![1, 0, 0], 0)
        && level6.fail
            == vec![
                vec![0, 0, 0, 0, 0, 0],
                vec![1, 1, 1, 0, 0, 0],
                vec![0, 0, 0, 1, 1, 1],
                vec![1, 1, 1, 1, 1, 1],
            ];
    Ok(Check {
        name: "vf-dictionary",
        pass: ok,
        detail: format!(
            "level-3 stops {}, level-6 unresolved {}",
            level3.dict.len(),
            level6.fail.len()
        ),
    })
}

/// Unresolved words per type class number exactly |T| mod M at every level.
fn vf_residue_check() -> Result<Check> {
    let cache = ClassSizeCache::new();
    let mut levels = 0u64;
    let mut bad = 0u64;
    for k in [0usize, 1] {
        let spec = ModelSpec::with_zero_state(2, k)?;
        for m in [2u64, 3] {
            let dict = GreedyDict::build(&spec, m, 8)?;
            for level in dict.levels() {
                let mut per_type: HashMap<TypeCounts, u64> = HashMap::new();
                for w in &level.fail {
                    *per_type
                        .entry(TypeCounts::counts_of(w, &spec)?)
                        .or_insert(0) += 1;
                }
                for t in all_types(&spec, level.n)? {
                    let expected = cache.class_size(&t) % m;
                    let got = per_type.get(&t).copied().unwrap_or(0);
                    if BigUint::from(got) != expected {
                        bad += 1;
                    }
                }
                if level.dict.len() % m as usize != 0 {
                    bad += 1;
                }
                levels += 1;
            }
        }
    }
    Ok(Check {
        name: "vf-residues",
        pass: bad == 0,
        detail: format!("{levels} dictionary levels checked, {bad} violations"),
    })
}

/// The streaming generator reproduces the explicit dictionary on every input.
fn vf_agreement_check() -> Result<Check> {
    let cache = ClassSizeCache::new();
    let mut inputs = 0u64;
    let mut bad = 0u64;
    for k in [0usize, 1] {
        let spec = ModelSpec::with_zero_state(2, k)?;
        for m in [2u64, 3] {
            let dict = GreedyDict::build(&spec, m, 6)?;
            for x in enumerate_sequences(2, 6, DEFAULT_BRUTE_FORCE_BOUND)? {
                let explicit = dict.lookup(&x);
                let sequential =
                    match run_sequential(&spec, m, Some(6), x.iter().copied(), &cache)? {
                        VfrOutcome::Stopped { value, len } => Some((value, len)),
                        VfrOutcome::Failed { .. } => None,
                    };
                if explicit != sequential {
                    bad += 1;
                }
                inputs += 1;
            }
        }
    }
    Ok(Check {
        name: "vf-agreement",
        pass: bad == 0,
        detail: format!("{inputs} streams compared, {bad} disagreements"),
    })
}

/// Twice-universal outputs: exactly uniform per agreement class, and the
/// fixed-order scheme has exactly zero distance to uniformity.
fn tu_uniformity_check() -> Result<Check> {
    let cache = ClassSizeCache::new();
    let cfg = EstimatorConfig::mdl(2);
    let report = exact_fv_audit(
        2,
        8,
        DEFAULT_BRUTE_FORCE_BOUND,
        |x| {
            let out = extract_exact(x, &cfg, &TargetSet::AllIntegers, &cache)?;
            let spec = ModelSpec::with_zero_state(2, out.k_hat)?;
            Ok((out.k_hat, TypeCounts::counts_of(x, &spec)?))
        },
        |x| Ok(extract_exact(x, &cfg, &TargetSet::AllIntegers, &cache)?.output),
    )?;
    let params = MarkovParams::new(
        ModelSpec::with_zero_state(2, 1)?,
        vec![vec![0.8, 0.2], vec![0.3, 0.7]],
    )?;
    let d = distance_to_uniformity(
        &params,
        6,
        &Scheme::FixedOrder(1),
        &EstimatorConfig::mdl(2),
        &TargetSet::AllIntegers,
        &cache,
    )?;
    let pass = report.pass() && d.is_zero();
    Ok(Check {
        name: "tu-uniformity",
        pass,
        detail: format!(
            "agreement-class spread {}, fixed-order distance {}",
            report.worst_spread, d
        ),
    })
}

/// Monte Carlo mean of log2 |T| agrees with the exact expectation.
fn fv_expectation_check() -> Result<Check> {
    let params = MarkovParams::iid_binary(0.3)?;
    let cache = ClassSizeCache::new();
    let report = crate::asymptotics::run_fv_asymptotics(&params, &[10], 2000, 101)?;
    let exact = expected_log_class_size(&params, 10, &cache)?;
    let row = &report.rows[0];
    let pass = (row.mean_log_class - exact).abs() <= 5.0 * row.std_err;
    Ok(Check {
        name: "fv-expectation",
        pass,
        detail: format!(
            "mc {:.4} vs exact {:.4} (se {:.4})",
            row.mean_log_class, exact, row.std_err
        ),
    })
}

/// Monte Carlo mean input length agrees with the exact series.
fn vf_expectation_check() -> Result<Check> {
    let params = MarkovParams::iid_binary(0.3)?;
    let cache = ClassSizeCache::new();
    let trials = 2000u64;
    let mut lens = Vec::with_capacity(trials as usize);
    for i in 0..trials {
        let mut stream = params.sampler(202u64.wrapping_add(i));
        let len = match run_sequential(params.spec(), 4, Some(64), &mut stream, &cache)? {
            VfrOutcome::Stopped { len, .. } | VfrOutcome::Failed { len } => len,
        };
        lens.push(len as f64);
    }
    let (mean, se) = mean_and_se(&lens);
    let exact = expected_input_length(&params, 4, 64, &cache)?;
    let pass = (mean - exact).abs() <= 5.0 * se;
    Ok(Check {
        name: "vf-expectation",
        pass,
        detail: format!("mc {mean:.4} vs exact {exact:.4} (se {se:.4})"),
    })
}
