//! Exact big-integer kernels shared by the counting code: factorials,
//! multinomial coefficients, fraction-free determinants, and float logs of
//! big integers for the approximate analytics paths.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};

/// `n!` as an exact big integer.
pub fn factorial(n: u64) -> BigUint {
    let mut acc = BigUint::one();
    for i in 2..=n {
        acc *= i;
    }
    acc
}

/// Multinomial coefficient `(c_1 + … + c_m)! / (c_1! · … · c_m!)` computed as
/// a product of binomials so every intermediate value is an integer.
pub fn multinomial(counts: &[u64]) -> BigUint {
    let mut total: u64 = 0;
    let mut acc = BigUint::one();
    for &c in counts {
        total += c;
        acc *= num_integer::binomial(BigUint::from(total), BigUint::from(c));
    }
    acc
}

/// Determinant of a square integer matrix by fraction-free (Bareiss)
/// elimination: every division in the update is exact, so the computation
/// stays in `BigInt` with no rational blow-up. The empty matrix has
/// determinant one.
pub fn bareiss_determinant(mut a: Vec<Vec<BigInt>>) -> BigInt {
    let n = a.len();
    if n == 0 {
        return BigInt::one();
    }
    debug_assert!(a.iter().all(|row| row.len() == n));
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for p in 0..n - 1 {
        if a[p][p].is_zero() {
            match (p + 1..n).find(|&r| !a[r][p].is_zero()) {
                Some(r) => {
                    a.swap(p, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in p + 1..n {
            for j in p + 1..n {
                let num = &a[i][j] * &a[p][p] - &a[i][p] * &a[p][j];
                let (q, r) = num_integer::Integer::div_rem(&num, &prev);
                debug_assert!(r.is_zero(), "Bareiss division must be exact");
                a[i][j] = q;
            }
            a[i][p] = BigInt::zero();
        }
        prev = a[p][p].clone();
    }
    sign * std::mem::take(&mut a[n - 1][n - 1])
}

/// `log2` of a positive big integer as `f64` (relative error ~1e-16 from the
/// 64-bit truncation). Zero maps to `-inf`.
pub fn log2_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 64 {
        return (x.to_u64().expect("fits in u64") as f64).log2();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().expect("top 64 bits");
    (top as f64).log2() + shift as f64
}

/// `log2` of a signed ratio of big integers; both parts must be positive.
pub fn log2_ratio(num: &BigInt, den: &BigInt) -> f64 {
    debug_assert!(num.is_positive() && den.is_positive());
    log2_biguint(num.magnitude()) - log2_biguint(den.magnitude())
}

/// Cumulative `log2 i!` table for the floating-point analytics path, valid
/// for arguments up to the constructed bound.
pub struct Log2Factorials {
    table: Vec<f64>,
}

impl Log2Factorials {
    pub fn new(max_n: usize) -> Self {
        let mut table = Vec::with_capacity(max_n + 1);
        table.push(0.0);
        let mut acc = 0.0f64;
        for i in 1..=max_n {
            acc += (i as f64).log2();
            table.push(acc);
        }
        Self { table }
    }

    #[inline]
    pub fn log2_factorial(&self, n: u64) -> f64 {
        self.table[n as usize]
    }

    /// `log2` of the multinomial coefficient over `counts`.
    pub fn log2_multinomial(&self, counts: &[u64]) -> f64 {
        let total: u64 = counts.iter().sum();
        let mut acc = self.log2_factorial(total);
        for &c in counts {
            acc -= self.log2_factorial(c);
        }
        acc
    }
}
