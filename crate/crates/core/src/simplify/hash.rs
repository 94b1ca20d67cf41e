use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Packed SimHash bits, bit `i` in word `i / 64`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HashKey {
    words: Vec<u64>,
    bits: usize,
}

impl HashKey {
    pub fn zero(bits: usize) -> Self {
        Self {
            words: vec![0; bits.div_ceil(64)],
            bits,
        }
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn bit(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }
}

/// Random Gaussian projection plane, `bits` rows by `rows` columns.
#[derive(Debug, Clone)]
pub struct HashPlane {
    bits: usize,
    rows: usize,
    // bit-major so each projection is a contiguous dot product
    normals: Vec<f64>,
}

impl HashPlane {
    pub fn new(bits: usize, rows: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normals = (0..bits * rows).map(|_| rng.sample(StandardNormal)).collect();
        Self { bits, rows, normals }
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    /// Length of the vectors this plane hashes.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Bit `i` is set iff the `i`-th projection is strictly positive, so the
    /// zero vector hashes to all zeros.
    pub fn hash(&self, v: &[f64]) -> Result<HashKey> {
        if v.len() != self.rows {
            return Err(Error::data(format!(
                "hash input has length {}, plane expects {}",
                v.len(),
                self.rows
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::data("cannot hash a non-finite prediction vector"));
        }
        let mut key = HashKey::zero(self.bits);
        if self.rows == 0 {
            return Ok(key);
        }
        // four normals per pass so each load of `v` is reused
        let block = 4 * self.rows;
        let mut blocks = self.normals.chunks_exact(block);
        let mut i = 0;
        for quad in blocks.by_ref() {
            let (a, rest) = quad.split_at(self.rows);
            let (b, rest) = rest.split_at(self.rows);
            let (c, d) = rest.split_at(self.rows);
            for s in dot4([a, b, c, d], v) {
                if s > 0.0 {
                    key.words[i / 64] |= 1 << (i % 64);
                }
                i += 1;
            }
        }
        for normal in blocks.remainder().chunks_exact(self.rows) {
            if dot(normal, v) > 0.0 {
                key.words[i / 64] |= 1 << (i % 64);
            }
            i += 1;
        }
        Ok(key)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators let the compiler vectorise the loop
    let mut acc = [0.0; 4];
    let (ca, ra) = a.split_at(a.len() / 4 * 4);
    let (cb, rb) = b.split_at(ca.len());
    for (x, y) in ca.chunks_exact(4).zip(cb.chunks_exact(4)) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

fn dot4(n: [&[f64]; 4], v: &[f64]) -> [f64; 4] {
    let mut acc = [[0.0; 2]; 4];
    let pairs = v.len() / 2 * 2;
    let mut j = 0;
    while j < pairs {
        let (v0, v1) = (v[j], v[j + 1]);
        for k in 0..4 {
            acc[k][0] += n[k][j] * v0;
            acc[k][1] += n[k][j + 1] * v1;
        }
        j += 2;
    }
    let mut out = [0.0; 4];
    for k in 0..4 {
        out[k] = acc[k][0] + acc[k][1];
        if pairs < v.len() {
            out[k] += n[k][pairs] * v[pairs];
        }
    }
    out
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Angle in degrees between two vectors, `None` if either has zero norm.
pub fn prediction_angle(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(na > 0.0 && nb > 0.0) || !na.is_finite() || !nb.is_finite() {
        return None;
    }
    // 2 atan2(|u - v|, |u + v|) on unit vectors stays accurate near 0 and 180
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (u, v) = (x / na, y / nb);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    Some((2.0 * diff.sqrt().atan2(sum.sqrt())).to_degrees().clamp(0.0, 180.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_vectors_share_a_key() {
        let p = HashPlane::new(128, 5, 7);
        let v = [1.0, -2.0, 0.5, 3.0, 0.0];
        assert_eq!(p.hash(&v).unwrap(), p.hash(&v).unwrap());
        // positive scaling does not change the sign of any projection
        let w: Vec<f64> = v.iter().map(|x| x * 3.5).collect();
        assert_eq!(p.hash(&v).unwrap(), p.hash(&w).unwrap());
    }

    #[test]
    fn zero_vector_hashes_to_zero() {
        let p = HashPlane::new(256, 10, 1);
        let k = p.hash(&[0.0; 10]).unwrap();
        assert!(k.is_zero());
        assert_eq!(k.bits(), 256);
    }

    #[test]
    fn negation_flips_every_bit() {
        let p = HashPlane::new(100, 4, 3);
        let v = [0.3, -1.0, 2.0, 0.7];
        let a = p.hash(&v).unwrap();
        let b = p.hash(&v.map(|x| -x)).unwrap();
        assert!((0..100).all(|i| a.bit(i) != b.bit(i)));
    }

    #[test]
    fn rejects_bad_input() {
        let p = HashPlane::new(8, 3, 0);
        assert!(p.hash(&[1.0, f64::NAN, 0.0]).is_err());
        assert!(p.hash(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn seed_determines_plane() {
        let v = [1.0, 2.0, -3.0];
        assert_eq!(
            HashPlane::new(64, 3, 9).hash(&v).unwrap(),
            HashPlane::new(64, 3, 9).hash(&v).unwrap()
        );
    }

    #[test]
    fn collision_rate_tracks_angle() {
        // P[bit equal] = 1 - theta/pi; 90 degrees gives one half
        let p = HashPlane::new(4096, 2, 11);
        let a = p.hash(&[1.0, 0.0]).unwrap();
        let b = p.hash(&[0.0, 1.0]).unwrap();
        let same = (0..4096).filter(|&i| a.bit(i) == b.bit(i)).count() as f64 / 4096.0;
        assert!((same - 0.5).abs() < 0.05, "{same}");
    }

    #[test]
    fn angles() {
        assert_eq!(prediction_angle(&[1.0, 2.0], &[2.0, 4.0]), Some(0.0));
        assert!((prediction_angle(&[1.0, 0.0], &[0.0, 3.0]).unwrap() - 90.0).abs() < 1e-12);
        assert!((prediction_angle(&[1.0, 1.0], &[-1.0, -1.0]).unwrap() - 180.0).abs() < 1e-6);
        assert_eq!(prediction_angle(&[0.0, 0.0], &[1.0, 1.0]), None);
    }
}
