//! Halton sequence via radical inverses in the first prime bases.

pub const PRIMES: [u64; 40] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
];

pub const MAX_DIMENSION: usize = PRIMES.len();

pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut factor = inv_base;
    let mut value = 0.0;
    while index > 0 {
        value += (index % base) as f64 * factor;
        index /= base;
        factor *= inv_base;
    }
    value
}

/// The `index`-th Halton point in `[0, 1)^d`. Caller guarantees `d <= MAX_DIMENSION`.
pub fn point(index: u64, d: usize) -> Vec<f64> {
    PRIMES[..d].iter().map(|&b| radical_inverse(index, b)).collect()
}
