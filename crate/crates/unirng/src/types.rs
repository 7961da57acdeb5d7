//! Markov type classes: exact counting, prefix-class calculus, enumeration,
//! and ranking.
//!
//! The type class of `x^n` under a [`ModelSpec`] is the set of sequences with
//! the same transition counts `n_{s,a}` (state `s` emits `a`) when read from
//! the same initial state. All members share the final state and are
//! equiprobable under *every* source with that structure, which is what makes
//! the class a perfect reservoir of uniform randomness.
//!
//! The class size comes from Whittle's cofactor formula,
//!
//! ```text
//! |T| = (Π_s n_s! / Π_{s,a} n_{s,a}!) · cofactor_{final,start}(I - F*),
//! F*[s,t] = (Σ_{a : s →a t} n_{s,a}) / n_s ,
//! ```
//!
//! computed here entirely in integers: each retained row is scaled by `n_s`,
//! the (final, start) minor is evaluated by fraction-free elimination, and
//! one exact division restores the count. Inconsistent counts (flow
//! imbalance, bad totals, disconnected supports) yield size zero rather than
//! errors, which lets callers probe hypothetical classes freely.
//!
//! Sequences inside a class are ordered by *reverse-lexicographic* comparison
//! (the last symbol is most significant). [`rank`]/[`unrank`] convert between
//! a member and its index by peeling one symbol at a time with
//! [`TypeCounts::peel_one`]: the class of the length-`n-1` prefixes of members
//! whose departing symbol is fixed is again a type class, so sizes of peeled
//! classes give the digits of the rank.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use num_bigint::{BigInt, BigUint};
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};

use crate::bigmath::{bareiss_determinant, log2_ratio, multinomial, Log2Factorials};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, Symbol};

/// Dense count tables are used while `alpha^(k+1)` stays at or below this.
const DENSE_TABLE_LIMIT: u64 = 4096;

/// Default cap on `alpha^n` for brute-force enumeration.
pub const DEFAULT_BRUTE_FORCE_BOUND: u64 = 1 << 22;

/// Cap on the candidate count-vector space enumerated by [`all_types`].
const ALL_TYPES_CANDIDATE_LIMIT: f64 = 4e7;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum CountsTable {
    /// Indexed by `state * alpha + symbol`.
    Dense(Vec<u64>),
    /// Sorted by `(state, symbol)`; zero entries are absent.
    Sparse(BTreeMap<(u64, Symbol), u64>),
}

/// Transition counts of a sequence read from a fixed initial state: the
/// complete description of its type class.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TypeCounts {
    spec: ModelSpec,
    n: u64,
    /// Last `k` symbols of the (initial-state padded) sequence, oldest first.
    final_state: Vec<Symbol>,
    counts: CountsTable,
}

impl TypeCounts {
    /// Count the transitions of `x` under `spec`.
    pub fn counts_of(x: &[Symbol], spec: &ModelSpec) -> Result<Self> {
        spec.validate_sequence(x)?;
        let mut t = Self::empty(spec.clone())?;
        for &a in x {
            t.push_symbol(a);
        }
        Ok(t)
    }

    /// The type of the empty sequence (final state = initial state).
    pub fn empty(spec: ModelSpec) -> Result<Self> {
        let counts = if table_cells(&spec) <= DENSE_TABLE_LIMIT as u128 {
            CountsTable::Dense(vec![0; table_cells(&spec) as usize])
        } else {
            spec.num_states()?; // still require the state space to index in u64
            CountsTable::Sparse(BTreeMap::new())
        };
        Ok(Self {
            final_state: spec.initial_state().to_vec(),
            spec,
            n: 0,
            counts,
        })
    }

    /// Build counts from raw parts. Ranges are validated; *consistency is
    /// not* — flow-imbalanced or mislabeled inputs simply describe an empty
    /// class ([`class_size`] returns zero for them).
    pub fn from_parts(
        spec: ModelSpec,
        n: u64,
        final_state: Vec<Symbol>,
        entries: impl IntoIterator<Item = ((u64, Symbol), u64)>,
    ) -> Result<Self> {
        let states = spec.num_states()?;
        if final_state.len() != spec.order() {
            return Err(Error::Config(format!(
                "final state has {} symbols, expected the order {}",
                final_state.len(),
                spec.order()
            )));
        }
        spec.validate_sequence(&final_state)?;
        let mut t = Self::empty(spec)?;
        t.n = n;
        t.final_state = final_state;
        for ((s, a), c) in entries {
            if s >= states {
                return Err(Error::Config(format!("state index {s} out of range")));
            }
            if a as usize >= t.spec.alpha() {
                return Err(Error::SymbolOutOfRange { symbol: a, alpha: t.spec.alpha() });
            }
            if c > 0 {
                t.add_count(s, a, c);
            }
        }
        Ok(t)
    }

    /// Record one more emitted symbol (extends the underlying sequence).
    pub fn push_symbol(&mut self, a: Symbol) {
        debug_assert!((a as usize) < self.spec.alpha());
        let state = self.spec.state_index(&self.final_state);
        self.add_count(state, a, 1);
        self.n += 1;
        if self.spec.order() > 0 {
            self.final_state.remove(0);
            self.final_state.push(a);
        }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Final state, oldest symbol first.
    pub fn final_state(&self) -> &[Symbol] {
        &self.final_state
    }

    pub fn final_state_index(&self) -> u64 {
        self.spec.state_index(&self.final_state)
    }

    pub fn count(&self, state: u64, a: Symbol) -> u64 {
        match &self.counts {
            CountsTable::Dense(v) => v[state as usize * self.spec.alpha() + a as usize],
            CountsTable::Sparse(m) => m.get(&(state, a)).copied().unwrap_or(0),
        }
    }

    fn add_count(&mut self, state: u64, a: Symbol, by: u64) {
        match &mut self.counts {
            CountsTable::Dense(v) => v[state as usize * self.spec.alpha() + a as usize] += by,
            CountsTable::Sparse(m) => *m.entry((state, a)).or_insert(0) += by,
        }
    }

    /// Decrement; `false` if the entry is already zero.
    fn dec_count(&mut self, state: u64, a: Symbol) -> bool {
        match &mut self.counts {
            CountsTable::Dense(v) => {
                let slot = &mut v[state as usize * self.spec.alpha() + a as usize];
                if *slot == 0 {
                    return false;
                }
                *slot -= 1;
            }
            CountsTable::Sparse(m) => match m.get_mut(&(state, a)) {
                None => return false,
                Some(c) => {
                    *c -= 1;
                    if *c == 0 {
                        m.remove(&(state, a));
                    }
                }
            },
        }
        true
    }

    /// Nonzero entries in `(state, symbol)` ascending order.
    pub fn iter(&self) -> Box<dyn Iterator<Item = ((u64, Symbol), u64)> + '_> {
        match &self.counts {
            CountsTable::Dense(v) => {
                let alpha = self.spec.alpha();
                Box::new(v.iter().enumerate().filter(|(_, &c)| c > 0).map(move |(i, &c)| {
                    (((i / alpha) as u64, (i % alpha) as Symbol), c)
                }))
            }
            CountsTable::Sparse(m) => Box::new(m.iter().map(|(&k, &v)| (k, v))),
        }
    }

    /// Per-state symbol-count rows (`state -> [n_{s,0}, …, n_{s,alpha-1}]`),
    /// states ascending, only states with at least one transition.
    pub fn rows(&self) -> BTreeMap<u64, Vec<u64>> {
        let mut rows: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for ((s, a), c) in self.iter() {
            rows.entry(s).or_insert_with(|| vec![0; self.spec.alpha()])[a as usize] = c;
        }
        rows
    }

    /// Out-degree `n_s` per state (only positive entries).
    pub fn out_counts(&self) -> BTreeMap<u64, u64> {
        let mut out: BTreeMap<u64, u64> = BTreeMap::new();
        for ((s, _), c) in self.iter() {
            *out.entry(s).or_insert(0) += c;
        }
        out
    }

    /// Whether the counts can belong to an actual sequence: totals match and
    /// every state's in-flow minus out-flow equals `[s = final] - [s = start]`.
    pub fn flow_consistent(&self) -> bool {
        let mut total: u64 = 0;
        let mut excess: HashMap<u64, i128> = HashMap::new();
        for ((s, a), c) in self.iter() {
            total += c;
            *excess.entry(s).or_insert(0) -= c as i128;
            *excess.entry(self.spec.next_state_index(s, a)).or_insert(0) += c as i128;
        }
        if total != self.n {
            return false;
        }
        let start = self.spec.initial_state_index();
        let fin = self.final_state_index();
        *excess.entry(start).or_insert(0) += 1;
        *excess.entry(fin).or_insert(0) -= 1;
        excess.values().all(|&e| e == 0)
    }

    /// Class of the length-`n-ℓ` prefixes of members, where the `ℓ` symbols
    /// sliding out of the final-state window are fixed to `u` (oldest first).
    /// `None` when no member fits — equivalently, an empty class.
    pub fn prefix_class(&self, u: &[Symbol]) -> Option<Self> {
        let mut cur = self.clone();
        for &a in u.iter().rev() {
            cur = cur.peel_one(a)?;
        }
        Some(cur)
    }

    /// One-symbol prefix class: members whose symbol at position `n - k`
    /// equals `a`, shortened by their last symbol. For positions `≤ 0` the
    /// symbol is pinned by the initial state instead of `a` being free.
    pub fn peel_one(&self, a: Symbol) -> Option<Self> {
        if self.n == 0 || a as usize >= self.spec.alpha() {
            return None;
        }
        let k = self.spec.order();
        let mut next = self.clone();
        next.n -= 1;
        if k == 0 {
            if !next.dec_count(0, a) {
                return None;
            }
            return Some(next);
        }
        // The symbol leaving the window sits at 1-indexed position n - k; when
        // that position is in the run-up it must agree with the initial state.
        let p = self.n as i64 - k as i64;
        if p <= 0 && self.spec.initial_state()[(p + k as i64 - 1) as usize] != a {
            return None;
        }
        let consumed = self.final_state[k - 1];
        let mut prev_state = Vec::with_capacity(k);
        prev_state.push(a);
        prev_state.extend_from_slice(&self.final_state[..k - 1]);
        let prev_idx = self.spec.state_index(&prev_state);
        if !next.dec_count(prev_idx, consumed) {
            return None;
        }
        next.final_state = prev_state;
        Some(next)
    }
}

fn table_cells(spec: &ModelSpec) -> u128 {
    (spec.alpha() as u128).pow(spec.order() as u32 + 1)
}

/// Exact class size by Whittle's formula. Zero for inconsistent or
/// unrealizable counts; never errors.
pub fn class_size(t: &TypeCounts) -> BigUint {
    match whittle_parts(t) {
        None => BigUint::zero(),
        Some((mult, cof, den)) => {
            if !cof.is_positive() {
                return BigUint::zero();
            }
            let num = mult * cof.magnitude();
            let (q, r) = num_integer::Integer::div_rem(&num, &den);
            debug_assert!(r.is_zero(), "Whittle division must be exact");
            q
        }
    }
}

/// The cofactor factor `W` of Whittle's formula as an exact rational;
/// `None` for flow-inconsistent counts. Nonempty classes have `0 < W ≤ 1`,
/// and `W = 0` exactly when the support cannot be walked start → final.
pub fn whittle_cofactor(t: &TypeCounts) -> Option<Ratio<BigInt>> {
    let (_, cof, den) = whittle_parts(t)?;
    Some(Ratio::new(cof, BigInt::from(den)))
}

/// Common core: multinomial product, signed integer cofactor, and the
/// positive denominator `Π_{s ≠ final} n_s` over retained states.
fn whittle_parts(t: &TypeCounts) -> Option<(BigUint, BigInt, BigUint)> {
    let (cof, den) = cofactor_parts(t)?;
    let mut mult = BigUint::one();
    for row in t.rows().values() {
        mult *= multinomial(row);
    }
    Some((mult, cof, den))
}

/// Floating-point `log2 |T|` from the exact integer cofactor and
/// table-driven multinomial logarithms; `None` for empty classes. Intended
/// for block lengths where the exact integer count is needlessly expensive.
/// `lf` must cover the largest row total (`Log2Factorials::new(n + 1)` is
/// always enough).
pub fn log2_class_size(t: &TypeCounts, lf: &Log2Factorials) -> Option<f64> {
    let (cof, den) = cofactor_parts(t)?;
    if !cof.is_positive() {
        return None;
    }
    let mut acc = log2_ratio(&cof, &BigInt::from(den));
    for row in t.rows().values() {
        acc += lf.log2_multinomial(row);
    }
    Some(acc)
}

/// Signed integer cofactor and the positive denominator `Π_{s ≠ final} n_s`
/// over retained states — Whittle's formula minus the multinomial product.
fn cofactor_parts(t: &TypeCounts) -> Option<(BigInt, BigUint)> {
    if !t.flow_consistent() {
        return None;
    }
    let rows = t.rows();
    let fin = t.final_state_index();
    let start = t.spec().initial_state_index();

    // Retained states: positive out-degree, plus the final state.
    let mut retained: Vec<u64> = rows.keys().copied().collect();
    if let Err(pos) = retained.binary_search(&fin) {
        retained.insert(pos, fin);
    }
    // n = 0 leaves only the start=final state and an empty minor below; n ≥ 1
    // guarantees the start is retained via its out-flow.
    let pos_of = |s: u64| retained.binary_search(&s).ok();
    let (pos_fin, pos_start) = (pos_of(fin)?, pos_of(start)?);

    // Aggregate transition mass between retained states.
    let index_of: HashMap<u64, usize> =
        retained.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let m = retained.len();
    let mut mass = vec![vec![0i128; m]; m];
    for ((s, a), c) in t.iter() {
        let tgt = t.spec().next_state_index(s, a);
        // Flow consistency puts every transition endpoint in the retained set.
        mass[index_of[&s]][index_of[&tgt]] += c as i128;
    }
    let out: Vec<u64> = retained
        .iter()
        .map(|s| rows.get(s).map_or(0, |r| r.iter().sum()))
        .collect();

    // Integer minor of diag(n_s) - mass with the final row and start column
    // removed; every surviving row has n_s > 0.
    let minor: Vec<Vec<BigInt>> = (0..m)
        .filter(|&i| i != pos_fin)
        .map(|i| {
            (0..m)
                .filter(|&j| j != pos_start)
                .map(|j| {
                    let diag = if i == j { out[i] as i128 } else { 0 };
                    BigInt::from(diag - mass[i][j])
                })
                .collect()
        })
        .collect();
    let det = bareiss_determinant(minor);
    let sign_negative = (pos_fin + pos_start) % 2 == 1;
    let cof = if sign_negative { -det } else { det };

    let mut den = BigUint::one();
    for (i, &s) in retained.iter().enumerate() {
        if s != fin {
            den *= out[i];
        }
    }
    Some((cof, den))
}

/// Memoizing wrapper around [`class_size`]; shareable across threads.
#[derive(Default)]
pub struct ClassSizeCache {
    map: Mutex<HashMap<TypeCounts, BigUint>>,
}

impl ClassSizeCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn class_size(&self, t: &TypeCounts) -> BigUint {
        if let Some(hit) = self.map.lock().unwrap().get(t) {
            return hit.clone();
        }
        let size = class_size(t);
        self.map
            .lock()
            .unwrap()
            .insert(t.clone(), size.clone());
        size
    }

    /// Size of `t.peel_one(a)`, zero when the peel is empty.
    pub fn peeled_size(&self, t: &TypeCounts, a: Symbol) -> BigUint {
        match t.peel_one(a) {
            None => BigUint::zero(),
            Some(p) => self.class_size(&p),
        }
    }

    pub fn entries(&self) -> usize {
        self.map.lock().unwrap().len()
    }
}

/// Index of `x` inside its own type class under reverse-lexicographic order
/// (last symbol most significant).
pub fn rank(x: &[Symbol], spec: &ModelSpec, cache: &ClassSizeCache) -> Result<BigUint> {
    let mut cur = TypeCounts::counts_of(x, spec)?;
    let mut r = BigUint::zero();
    for m in (1..=x.len() as u64).rev() {
        let p = m as i64 - spec.order() as i64;
        let b = spec.symbol_at(x, p);
        for a in 0..b {
            r += cache.peeled_size(&cur, a);
        }
        cur = cur
            .peel_one(b)
            .expect("a sequence can always be peeled along itself");
    }
    Ok(r)
}

/// Inverse of [`rank`]: the member of class `t` with the given index.
pub fn unrank(t: &TypeCounts, index: &BigUint, cache: &ClassSizeCache) -> Result<Vec<Symbol>> {
    let size = cache.class_size(t);
    if index >= &size {
        return Err(Error::RankOutOfRange {
            index: index.to_string(),
            size: size.to_string(),
        });
    }
    let n = t.len() as usize;
    let k = t.spec().order();
    let mut x = vec![0 as Symbol; n];
    // Trailing window comes straight from the final state.
    for (i, &f) in t.final_state().iter().enumerate() {
        let p = n as i64 - k as i64 + 1 + i as i64;
        if p >= 1 {
            x[(p - 1) as usize] = f;
        }
    }
    let mut cur = t.clone();
    let mut rem = index.clone();
    for m in (1..=n as u64).rev() {
        let p = m as i64 - k as i64;
        if p >= 1 {
            let mut chosen = None;
            for a in 0..t.spec().alpha() as Symbol {
                if let Some(peeled) = cur.peel_one(a) {
                    let sz = cache.class_size(&peeled);
                    if rem < sz {
                        chosen = Some((a, peeled));
                        break;
                    }
                    rem -= sz;
                }
            }
            let (a, peeled) = chosen.expect("index < class size bounds the search");
            x[(p - 1) as usize] = a;
            cur = peeled;
        } else {
            let forced = t.spec().initial_state()[(p + k as i64 - 1) as usize];
            cur = cur
                .peel_one(forced)
                .expect("run-up symbols are forced by the initial state");
        }
    }
    debug_assert!(rem.is_zero());
    Ok(x)
}

/// Reverse-lexicographic comparison: the *last* symbol is most significant.
pub fn reverse_lex_cmp(a: &[Symbol], b: &[Symbol]) -> std::cmp::Ordering {
    debug_assert_eq!(a.len(), b.len());
    a.iter().rev().cmp(b.iter().rev())
}

/// Every nonempty type class of length-`n` sequences under `spec`, exactly
/// once, in a deterministic order (lexicographic in the dense count vector).
/// Errors when the candidate space `C(n + cells - 1, cells - 1)` is too big.
pub fn all_types(spec: &ModelSpec, n: u64) -> Result<Vec<TypeCounts>> {
    let cells_u128 = table_cells(spec);
    if cells_u128 > DENSE_TABLE_LIMIT as u128 {
        return Err(Error::ResourceLimit(format!(
            "type enumeration needs a dense table; alpha^(k+1) = {cells_u128} exceeds {DENSE_TABLE_LIMIT}"
        )));
    }
    let cells = cells_u128 as usize;
    // log2 C(n + cells - 1, cells - 1) estimate against the candidate budget.
    let mut log_candidates = 0.0f64;
    for i in 1..cells as u64 {
        log_candidates += ((n + i) as f64).log2() - (i as f64).log2();
    }
    if log_candidates > ALL_TYPES_CANDIDATE_LIMIT.log2() {
        return Err(Error::ResourceLimit(format!(
            "about 2^{log_candidates:.1} candidate count vectors exceed the enumeration budget"
        )));
    }

    let mut out = Vec::new();
    let mut counts = vec![0u64; cells];
    enumerate_counts(spec, n, 0, &mut counts, &mut out)?;
    Ok(out)
}

fn enumerate_counts(
    spec: &ModelSpec,
    remaining: u64,
    cell: usize,
    counts: &mut Vec<u64>,
    out: &mut Vec<TypeCounts>,
) -> Result<()> {
    if cell + 1 == counts.len() {
        counts[cell] = remaining;
        if let Some(t) = type_from_count_vector(spec, counts)? {
            out.push(t);
        }
        counts[cell] = 0;
        return Ok(());
    }
    for c in 0..=remaining {
        counts[cell] = c;
        enumerate_counts(spec, remaining - c, cell + 1, counts, out)?;
    }
    counts[cell] = 0;
    Ok(())
}

/// Determine the final state from the flow excess and keep the candidate only
/// if it describes a nonempty class.
fn type_from_count_vector(spec: &ModelSpec, counts: &[u64]) -> Result<Option<TypeCounts>> {
    let alpha = spec.alpha();
    let states = spec.num_states()?;
    let start = spec.initial_state_index();
    let mut excess: HashMap<u64, i128> = HashMap::new();
    let mut n: u64 = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let (s, a) = ((i / alpha) as u64, (i % alpha) as Symbol);
        n += c;
        *excess.entry(s).or_insert(0) -= c as i128;
        *excess.entry(spec.next_state_index(s, a)).or_insert(0) += c as i128;
    }
    *excess.entry(start).or_insert(0) += 1;
    let positives: Vec<u64> = excess
        .iter()
        .filter(|(_, &e)| e > 0)
        .map(|(&s, _)| s)
        .collect();
    let fin = match positives.as_slice() {
        [f] if excess[f] == 1 && excess.values().all(|&e| (0..=1).contains(&e)) => *f,
        _ => return Ok(None),
    };
    debug_assert!(fin < states);
    let entries = counts.iter().enumerate().filter_map(|(i, &c)| {
        (c > 0).then(|| (((i / alpha) as u64, (i % alpha) as Symbol), c))
    });
    let t = TypeCounts::from_parts(spec.clone(), n, spec.state_symbols(fin), entries)?;
    if class_size(&t).is_zero() {
        return Ok(None);
    }
    Ok(Some(t))
}

/// All members of the type class of `x`, by exhaustive enumeration of
/// `alpha^n` sequences, in reverse-lexicographic (= rank) order. The guard
/// `bound` caps `alpha^n`; `None` uses [`DEFAULT_BRUTE_FORCE_BOUND`].
pub fn brute_force_class(
    x: &[Symbol],
    spec: &ModelSpec,
    bound: Option<u64>,
) -> Result<Vec<Vec<Symbol>>> {
    let bound = bound.unwrap_or(DEFAULT_BRUTE_FORCE_BOUND);
    let n = x.len() as u32;
    let total = (spec.alpha() as u128).checked_pow(n).filter(|&t| t <= bound as u128)
        .ok_or_else(|| {
            Error::ResourceLimit(format!(
                "alpha^n = {}^{} exceeds the brute-force bound {bound}",
                spec.alpha(),
                n
            ))
        })?;
    let target = TypeCounts::counts_of(x, spec)?;
    let mut members = Vec::new();
    let mut y = vec![0 as Symbol; n as usize];
    for mut c in 0..total {
        for slot in y.iter_mut() {
            *slot = (c % spec.alpha() as u128) as Symbol;
            c /= spec.alpha() as u128;
        }
        if TypeCounts::counts_of(&y, spec)? == target {
            members.push(y.clone());
        }
    }
    Ok(members)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn binary_spec(k: usize) -> ModelSpec {
        ModelSpec::with_zero_state(2, k).unwrap()
    }

    fn size_of(x: &[Symbol], spec: &ModelSpec) -> BigUint {
        class_size(&TypeCounts::counts_of(x, spec).unwrap())
    }

    #[test]
    fn counts_of_hand_example() {
        // x = 0,1,1,0 at order 1 from state 0 uses each binary transition once.
        let t = TypeCounts::counts_of(&[0, 1, 1, 0], &binary_spec(1)).unwrap();
        let entries: Vec<_> = t.iter().collect();
        assert_eq!(
            entries,
            vec![((0, 0), 1), ((0, 1), 1), ((1, 0), 1), ((1, 1), 1)]
        );
        assert_eq!(t.final_state(), &[0]);
        assert_eq!(t.len(), 4);
        assert!(t.flow_consistent());
    }

    #[test]
    fn memoryless_class_sizes_are_multinomials() {
        // Order 0: the class is all rearrangements, C(10,3) = 120.
        let x = [1, 0, 0, 1, 0, 0, 0, 1, 0, 0];
        assert_eq!(size_of(&x, &binary_spec(0)), BigUint::from(120u32));
        // Ternary: 5!/(2!·2!·1!) = 30.
        let spec3 = ModelSpec::with_zero_state(3, 0).unwrap();
        assert_eq!(size_of(&[0, 1, 2, 1, 0], &spec3), BigUint::from(30u32));
    }

    #[test]
    fn first_order_class_sizes_hand_checked() {
        // {0110, 1100} share counts (one of each transition, ending at 0);
        // reverse-lex compares x_3 after the tied x_4, so 1100 comes first.
        assert_eq!(size_of(&[0, 1, 1, 0], &binary_spec(1)), BigUint::from(2u32));
        let members = brute_force_class(&[0, 1, 1, 0], &binary_spec(1), None).unwrap();
        assert_eq!(members, vec![vec![1, 1, 0, 0], vec![0, 1, 1, 0]]);
        // Runs of one symbol are alone in their class.
        assert_eq!(size_of(&[0, 0, 0, 0], &binary_spec(1)), BigUint::one());
        assert_eq!(size_of(&[1, 1, 1, 1], &binary_spec(1)), BigUint::one());
        // 000111 at order 1 has no 1→0 transition, so the class is {000111};
        // at order 0 it is all C(6,3) = 20 rearrangements.
        assert_eq!(size_of(&[0, 0, 0, 1, 1, 1], &binary_spec(1)), BigUint::one());
        assert_eq!(size_of(&[0, 0, 0, 1, 1, 1], &binary_spec(0)), BigUint::from(20u32));
    }

    #[test]
    fn whittle_matches_brute_force_exhaustively() {
        // Every binary sequence up to n = 7 at orders 0..=2, plus a ternary
        // sweep at order 1: Whittle's formula must equal the enumerated count.
        for k in 0..=2usize {
            let spec = binary_spec(k);
            for n in 0..=7u32 {
                for bits in 0..(1u32 << n) {
                    let x: Vec<Symbol> =
                        (0..n).map(|i| ((bits >> i) & 1) as Symbol).collect();
                    let brute = brute_force_class(&x, &spec, None).unwrap().len();
                    assert_eq!(
                        size_of(&x, &spec),
                        BigUint::from(brute),
                        "k={k} x={x:?}"
                    );
                }
            }
        }
        let spec3 = ModelSpec::with_zero_state(3, 1).unwrap();
        for n in 0..=5u32 {
            for mut c in 0..3u32.pow(n) {
                let mut x = vec![0 as Symbol; n as usize];
                for slot in x.iter_mut() {
                    *slot = (c % 3) as Symbol;
                    c /= 3;
                }
                let brute = brute_force_class(&x, &spec3, None).unwrap().len();
                assert_eq!(size_of(&x, &spec3), BigUint::from(brute), "x={x:?}");
            }
        }
    }

    #[test]
    fn float_log_size_tracks_the_exact_count() {
        use crate::bigmath::{log2_biguint, Log2Factorials};
        let lf = Log2Factorials::new(13);
        for k in 0..=2usize {
            let spec = binary_spec(k);
            for bits in 0..(1u32 << 12) {
                let x: Vec<Symbol> = (0..12).map(|i| ((bits >> i) & 1) as Symbol).collect();
                let t = TypeCounts::counts_of(&x, &spec).unwrap();
                let exact = class_size(&t);
                let float = log2_class_size(&t, &lf).expect("x's own class is nonempty");
                assert!(
                    (float - log2_biguint(&exact)).abs() < 1e-9,
                    "k={k} x={x:?}"
                );
            }
        }
        // Empty classes are `None` both ways.
        let spec = binary_spec(1);
        let t = TypeCounts::from_parts(spec, 2, vec![1], [((0u64, 1u8), 2u64)]).unwrap();
        assert!(class_size(&t).is_zero());
        assert!(log2_class_size(&t, &lf).is_none());
    }

    #[test]
    fn cofactor_is_a_probability_for_realizable_counts() {
        let spec = binary_spec(1);
        for t in all_types(&spec, 8).unwrap() {
            let w = whittle_cofactor(&t).unwrap();
            assert!(w > Ratio::zero(), "W must be positive, got {w}");
            assert!(w <= Ratio::one(), "W must be at most 1, got {w}");
        }
    }

    #[test]
    fn inconsistent_counts_have_empty_classes() {
        let spec = binary_spec(1);
        // Tampered total: say n = 5 while holding 4 transitions.
        let t = TypeCounts::from_parts(
            spec.clone(),
            5,
            vec![0],
            [((0u64, 0u8), 1u64), ((0, 1), 1), ((1, 0), 1), ((1, 1), 1)],
        )
        .unwrap();
        assert!(class_size(&t).is_zero());
        // Flow imbalance: two 0→1 transitions, none back, final says 0.
        let t = TypeCounts::from_parts(spec.clone(), 2, vec![0], [((0u64, 1u8), 2u64)]).unwrap();
        assert!(class_size(&t).is_zero());
        // Disconnected support: a 1-cycle not reachable from the start.
        let t = TypeCounts::from_parts(spec, 2, vec![0], [((1u64, 1u8), 2u64)]).unwrap();
        assert!(class_size(&t).is_zero());
    }

    #[test]
    fn peeling_partitions_the_class() {
        // Σ_a |peel(T, a)| = |T| for every type, at several orders.
        for k in 0..=2usize {
            let spec = binary_spec(k);
            for n in 1..=7u64 {
                for t in all_types(&spec, n).unwrap() {
                    let total: BigUint = (0..2u8)
                        .map(|a| t.peel_one(a).map(|p| class_size(&p)).unwrap_or_default())
                        .sum();
                    assert_eq!(total, class_size(&t), "k={k} n={n}");
                }
            }
        }
    }

    #[test]
    fn peeling_composes() {
        let spec = binary_spec(1);
        let t = TypeCounts::counts_of(&[0, 0, 1, 0, 1, 1, 0], &spec).unwrap();
        for u in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            let direct = t.prefix_class(&u);
            let chained = t
                .peel_one(u[1])
                .and_then(|mid| mid.peel_one(u[0]));
            assert_eq!(direct, chained, "u={u:?}");
        }
        // Two-symbol peels also partition: Σ_u |T⟨u⟩| = |T|.
        let total: BigUint = [[0, 0], [0, 1], [1, 0], [1, 1]]
            .iter()
            .map(|u| t.prefix_class(u).map(|p| class_size(&p)).unwrap_or_default())
            .sum();
        assert_eq!(total, class_size(&t));
    }

    #[test]
    fn rank_agrees_with_brute_force_order() {
        let cache = ClassSizeCache::new();
        for k in 0..=1usize {
            let spec = binary_spec(k);
            for bits in 0..(1u32 << 6) {
                let x: Vec<Symbol> = (0..6).map(|i| ((bits >> i) & 1) as Symbol).collect();
                let members = brute_force_class(&x, &spec, None).unwrap();
                let idx = members.iter().position(|m| m == &x).unwrap();
                assert_eq!(
                    rank(&x, &spec, &cache).unwrap(),
                    BigUint::from(idx),
                    "k={k} x={x:?}"
                );
            }
        }
    }

    #[test]
    fn unrank_inverts_rank_over_entire_classes() {
        let cache = ClassSizeCache::new();
        for k in 0..=2usize {
            let spec = binary_spec(k);
            for t in all_types(&spec, 6).unwrap() {
                let size = cache.class_size(&t);
                let mut seen = HashSet::new();
                let mut i = BigUint::zero();
                while i < size {
                    let x = unrank(&t, &i, &cache).unwrap();
                    assert_eq!(rank(&x, &spec, &cache).unwrap(), i);
                    assert_eq!(TypeCounts::counts_of(&x, &spec).unwrap(), t);
                    assert!(seen.insert(x));
                    i += 1u32;
                }
                assert!(unrank(&t, &size, &cache).is_err());
            }
        }
    }

    #[test]
    fn all_types_partition_the_sequence_space() {
        for (alpha, k, n) in [(2usize, 0usize, 6u64), (2, 1, 6), (2, 2, 5), (3, 1, 4)] {
            let spec = ModelSpec::with_zero_state(alpha, k).unwrap();
            let types = all_types(&spec, n).unwrap();
            let unique: HashSet<_> = types.iter().cloned().collect();
            assert_eq!(unique.len(), types.len(), "duplicates for alpha={alpha} k={k}");
            let total: BigUint = types.iter().map(class_size).sum();
            assert_eq!(
                total,
                BigUint::from(alpha as u64).pow(n as u32),
                "alpha={alpha} k={k} n={n}"
            );
            // Each type is the type of its own first member.
            let cache = ClassSizeCache::new();
            for t in &types {
                let member = unrank(t, &BigUint::zero(), &cache).unwrap();
                assert_eq!(&TypeCounts::counts_of(&member, &spec).unwrap(), t);
            }
        }
    }

    #[test]
    fn empty_sequence_type_is_trivial() {
        let spec = binary_spec(1);
        let t = TypeCounts::counts_of(&[], &spec).unwrap();
        assert_eq!(class_size(&t), BigUint::one());
        let types = all_types(&spec, 0).unwrap();
        assert_eq!(types.len(), 1);
        let cache = ClassSizeCache::new();
        assert_eq!(unrank(&t, &BigUint::zero(), &cache).unwrap(), Vec::<Symbol>::new());
        assert_eq!(rank(&[], &spec, &cache).unwrap(), BigUint::zero());
    }

    #[test]
    fn short_sequences_use_the_run_up() {
        // n < k: the final state mixes initial-state padding with x.
        let spec = ModelSpec::new(2, 3, vec![1, 0, 1]).unwrap();
        let t = TypeCounts::counts_of(&[0, 1], &spec).unwrap();
        // Padded sequence 1,0,1,0,1 — the window keeps the run-up's tail.
        assert_eq!(t.final_state(), &[1, 0, 1]);
        assert_eq!(class_size(&t), BigUint::one());
        let cache = ClassSizeCache::new();
        assert_eq!(unrank(&t, &BigUint::zero(), &cache).unwrap(), vec![0, 1]);
    }

    #[test]
    fn sparse_tables_behave_like_dense_ones() {
        // alpha = 2, k = 12 forces the sparse representation (2^13 > 4096).
        let spec = ModelSpec::with_zero_state(2, 12).unwrap();
        let x: Vec<Symbol> = (0..40).map(|i| ((i * 7 + 3) % 5 == 0) as Symbol).collect();
        let t = TypeCounts::counts_of(&x, &spec).unwrap();
        assert!(matches!(t.counts, CountsTable::Sparse(_)));
        assert!(t.flow_consistent());
        let total: BigUint = (0..2u8)
            .map(|a| t.peel_one(a).map(|p| class_size(&p)).unwrap_or_default())
            .sum();
        assert_eq!(total, class_size(&t));
        let cache = ClassSizeCache::new();
        let r = rank(&x, &spec, &cache).unwrap();
        assert_eq!(unrank(&t, &r, &cache).unwrap(), x);
    }

    #[test]
    fn cache_matches_direct_computation() {
        let spec = binary_spec(1);
        let cache = ClassSizeCache::new();
        let t = TypeCounts::counts_of(&[0, 0, 1, 1, 0, 1], &spec).unwrap();
        assert_eq!(cache.class_size(&t), class_size(&t));
        assert_eq!(cache.class_size(&t), class_size(&t));
        assert!(cache.entries() >= 1);
    }

    #[test]
    fn reverse_lex_orders_by_last_symbol_first() {
        assert_eq!(
            reverse_lex_cmp(&[1, 0], &[0, 1]),
            std::cmp::Ordering::Less
        );
        assert_eq!(reverse_lex_cmp(&[0, 1], &[1, 1]), std::cmp::Ordering::Less);
        assert_eq!(reverse_lex_cmp(&[1, 1], &[1, 1]), std::cmp::Ordering::Equal);
    }

    #[test]
    fn brute_force_guard_trips() {
        let spec = binary_spec(0);
        let x = vec![0 as Symbol; 30];
        assert!(matches!(
            brute_force_class(&x, &spec, Some(1 << 20)),
            Err(Error::ResourceLimit(_))
        ));
    }
}
