//! Count-vector enumeration and the binomial/multinomial helpers behind the
//! exact product-distribution evaluators.

use num_bigint::BigUint;
use num_traits::One;

/// `C(n, k)` as an exact integer.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::ZERO;
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `C(n, k)` saturating at `u128::MAX`, for budget checks.
pub fn binomial_saturating(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        // acc * (n - i) / (i + 1) stays integral at every step.
        match acc.checked_mul(n as u128 - i) {
            Some(v) => acc = v / (i + 1),
            None => return u128::MAX,
        }
    }
    acc
}

/// Number of count vectors `(c_1, …, c_m)` with `Σ c_i = k`.
pub fn count_vector_total(k: usize, m: usize) -> u128 {
    if m == 0 {
        return u128::from(k == 0);
    }
    binomial_saturating((k + m - 1) as u64, (m - 1) as u64)
}

/// `Π sizes`, saturating.
pub fn product_size(sizes: impl IntoIterator<Item = usize>) -> u128 {
    sizes
        .into_iter()
        .try_fold(1u128, |acc, s| acc.checked_mul(s as u128))
        .unwrap_or(u128::MAX)
}

/// Visits every count vector of length `m` summing to `k` together with its
/// multinomial coefficient `k! / Π c_i!`. Vectors are visited in
/// lexicographically decreasing order of `c_1, c_2, …`.
pub fn for_each_count_vector(m: usize, k: usize, mut visit: impl FnMut(&[u32], &BigUint)) {
    if m == 0 {
        if k == 0 {
            visit(&[], &BigUint::one());
        }
        return;
    }
    let mut counts = vec![0u32; m];
    recurse(0, k, &BigUint::one(), &mut counts, &mut visit);
}

fn recurse(
    slot: usize,
    remaining: usize,
    coefficient: &BigUint,
    counts: &mut [u32],
    visit: &mut impl FnMut(&[u32], &BigUint),
) {
    let m = counts.len();
    if slot == m - 1 {
        counts[slot] = remaining as u32;
        visit(counts, coefficient);
        return;
    }
    for c in (0..=remaining).rev() {
        counts[slot] = c as u32;
        let next = coefficient * binomial(remaining as u64, c as u64);
        recurse(slot + 1, remaining - c, &next, counts, visit);
    }
}

/// Visits every tuple in `Π 0..radix_i` (first coordinate most significant).
pub fn for_each_tuple(radices: &[usize], mut visit: impl FnMut(&[usize])) {
    if radices.iter().any(|&r| r == 0) {
        return;
    }
    let mut tuple = vec![0usize; radices.len()];
    loop {
        visit(&tuple);
        let mut pos = radices.len();
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            tuple[pos] += 1;
            if tuple[pos] < radices[pos] {
                break;
            }
            tuple[pos] = 0;
        }
    }
}
