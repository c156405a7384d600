//! Sobol sequence (Gray-code ordering) with Joe–Kuo direction numbers.

/// `(s, a, m_1..m_s)` for dimensions 2..=21; dimension 1 uses the identity generator.
const JOE_KUO: [(u32, u32, &[u32]); 20] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 15, 13, 25]),
    (6, 25, &[1, 1, 5, 5, 19, 61]),
    (7, 1, &[1, 3, 7, 11, 23, 15, 103]),
    (7, 4, &[1, 3, 7, 13, 13, 15, 69]),
];

pub const MAX_DIMENSION: usize = JOE_KUO.len() + 1;
const BITS: usize = 32;

#[derive(Clone, Debug)]
pub struct Sobol {
    /// `directions[j][k]` is v_{k+1} of dimension j, scaled to 32 bits.
    directions: Vec<[u32; BITS]>,
}

impl Sobol {
    /// Caller guarantees `1 <= d <= MAX_DIMENSION`.
    pub fn new(d: usize) -> Self {
        let mut directions = Vec::with_capacity(d);
        let mut first = [0u32; BITS];
        for (k, v) in first.iter_mut().enumerate() {
            *v = 1 << (BITS - 1 - k);
        }
        directions.push(first);
        for &(s, a, m) in JOE_KUO.iter().take(d.saturating_sub(1)) {
            let s = s as usize;
            let mut v = [0u32; BITS];
            for k in 0..s.min(BITS) {
                v[k] = m[k] << (BITS - 1 - k);
            }
            for k in s..BITS {
                let mut x = v[k - s] ^ (v[k - s] >> s);
                for l in 1..s {
                    if (a >> (s - 1 - l)) & 1 == 1 {
                        x ^= v[k - l];
                    }
                }
                v[k] = x;
            }
            directions.push(v);
        }
        Sobol { directions }
    }

    pub fn dimension(&self) -> usize {
        self.directions.len()
    }

    /// The `index`-th point in Gray-code order, in `[0, 1)^d`.
    pub fn point(&self, index: u64) -> Vec<f64> {
        let gray = index ^ (index >> 1);
        let scale = 1.0 / (1u64 << BITS) as f64;
        self.directions
            .iter()
            .map(|dirs| {
                let mut x = 0u32;
                for (k, v) in dirs.iter().enumerate() {
                    if (gray >> k) & 1 == 1 {
                        x ^= v;
                    }
                }
                x as f64 * scale
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_dimension_is_van_der_corput_in_gray_order() {
        let s = Sobol::new(1);
        let xs: Vec<f64> = (0..4).map(|i| s.point(i)[0]).collect();
        assert_eq!(xs, vec![0.0, 0.5, 0.75, 0.25]);
    }

    #[test]
    fn every_projection_is_stratified() {
        // The first 2^k points put exactly one point in each dyadic cell of each axis.
        let s = Sobol::new(MAX_DIMENSION);
        let n = 1u64 << 8;
        let pts: Vec<Vec<f64>> = (0..n).map(|i| s.point(i)).collect();
        for j in 0..MAX_DIMENSION {
            let mut cells = vec![0; n as usize];
            for p in &pts {
                cells[(p[j] * n as f64) as usize] += 1;
            }
            assert!(cells.iter().all(|&c| c == 1), "dimension {j}");
        }
    }

    #[test]
    fn matches_reference_generator() {
        // Reference points from an independent unscrambled Joe-Kuo implementation.
        let s = Sobol::new(MAX_DIMENSION);
        let p777 = [
            0.6923828125, 0.9365234375, 0.1630859375, 0.2744140625, 0.6357421875, 0.3564453125,
            0.1904296875, 0.7626953125, 0.3486328125, 0.3232421875, 0.7451171875, 0.6962890625,
            0.3837890625, 0.4736328125, 0.5693359375, 0.5146484375, 0.4033203125, 0.8642578125,
            0.3701171875, 0.7529296875, 0.2373046875,
        ];
        let p1000 = [
            0.2197265625, 0.0966796875, 0.5185546875, 0.6767578125, 0.2802734375, 0.9072265625,
            0.0458984375, 0.8994140625, 0.5009765625, 0.0693359375, 0.0849609375, 0.2548828125,
            0.1611328125, 0.3837890625, 0.1435546875, 0.3701171875, 0.7197265625, 0.3447265625,
            0.9912109375, 0.7255859375, 0.5224609375,
        ];
        assert_eq!(s.point(777), p777.to_vec());
        assert_eq!(s.point(1000), p1000.to_vec());
    }
}
