//! Cubic 3D FFT on lexicographically ordered data and linear convolution of
//! lattice arrays over {-N..N}³.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

/// Unnormalized forward/inverse transforms of an n³ cube.
#[derive(Clone)]
pub struct Fft3 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("n", &self.n).finish()
    }
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Σ_x a_x e^{-2πi k·x/n}, in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.fwd);
    }

    /// Σ_k a_k e^{+2πi k·x/n}, in place, without the 1/n³ factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inv);
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n, "cube length");
        let mut tmp = vec![Complex64::new(0.0, 0.0); data.len()];
        for _ in 0..3 {
            data.par_chunks_mut(n * n).for_each(|plane| plan.process(plane));
            rotate(n, data, &mut tmp);
            data.copy_from_slice(&tmp);
        }
    }
}

/// out[k][i][j] = a[i][j][k].
fn rotate(n: usize, a: &[Complex64], out: &mut [Complex64]) {
    out.par_chunks_mut(n * n).enumerate().for_each(|(k, plane)| {
        for i in 0..n {
            for j in 0..n {
                plane[i * n + j] = a[(i * n + j) * n + k];
            }
        }
    });
}

/// Smallest 2^a 3^b 5^c that is at least `min`.
pub fn fft_friendly(min: usize) -> usize {
    let mut p = min.max(1);
    loop {
        let mut r = p;
        for f in [2, 3, 5] {
            while r.is_multiple_of(f) {
                r /= f;
            }
        }
        if r == 1 {
            return p;
        }
        p += 1;
    }
}

/// Embeds and extracts {-N..N}³ arrays into a zero-padded cube with
/// wrap-around indexing, so that products of transforms give exact linear
/// convolutions on the lattice.
#[derive(Debug, Clone)]
pub struct Convolver {
    n: usize,
    fft: Fft3,
    map: Vec<usize>,
}

impl Convolver {
    /// Padding P ≥ 4N+2 per axis.
    pub fn new(n: usize) -> Self {
        let p = fft_friendly(4 * n + 2);
        let side = 2 * n + 1;
        let wrap = |c: usize| (c as i64 - n as i64).rem_euclid(p as i64) as usize;
        let map = (0..side * side * side)
            .map(|i| {
                let (a, b, c) = (i / (side * side), (i / side) % side, i % side);
                (wrap(a) * p + wrap(b)) * p + wrap(c)
            })
            .collect();
        Self { n, fft: Fft3::new(p), map }
    }

    pub fn padded_size(&self) -> usize {
        self.fft.size()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Forward transform of a lattice array.
    pub fn transform(&self, a: &[Complex64]) -> Vec<Complex64> {
        let p = self.fft.size();
        let mut cube = vec![Complex64::new(0.0, 0.0); p * p * p];
        for (v, &idx) in a.iter().zip(&self.map) {
            cube[idx] = *v;
        }
        self.fft.forward(&mut cube);
        cube
    }

    /// Lattice part of the inverse transform of the pointwise product.
    pub fn product_back(&self, a_hat: &[Complex64], b_hat: &[Complex64]) -> Vec<Complex64> {
        let p = self.fft.size();
        let scale = 1.0 / (p * p * p) as f64;
        let mut cube: Vec<Complex64> = a_hat.par_iter().zip(b_hat).map(|(x, y)| x * y * scale).collect();
        self.fft.inverse(&mut cube);
        self.map.iter().map(|&idx| cube[idx]).collect()
    }

    /// Transforms of two Hermitian lattice arrays, which are real, from a
    /// single complex transform of a + ib.
    pub fn transform_hermitian_pair(&self, a: &[Complex64], b: Option<&[Complex64]>) -> (Vec<f64>, Vec<f64>) {
        let packed: Vec<Complex64> = match b {
            Some(b) => a.iter().zip(b).map(|(x, y)| x + Complex64::i() * y).collect(),
            None => a.to_vec(),
        };
        let cube = self.transform(&packed);
        (cube.iter().map(|z| z.re).collect(), cube.iter().map(|z| z.im).collect())
    }

    /// Lattice parts of the normalized inverse transforms of two real cubes,
    /// which are Hermitian, from a single complex transform of y1 + iy2.
    pub fn inverse_real_pair(&self, y1: &[f64], y2: Option<&[f64]>) -> (Vec<Complex64>, Vec<Complex64>) {
        let p = self.fft.size();
        let scale = 1.0 / (p * p * p) as f64;
        let mut cube: Vec<Complex64> = match y2 {
            Some(y2) => y1.iter().zip(y2).map(|(a, b)| Complex64::new(a * scale, b * scale)).collect(),
            None => y1.iter().map(|a| Complex64::new(a * scale, 0.0)).collect(),
        };
        self.fft.inverse(&mut cube);
        let z: Vec<Complex64> = self.map.iter().map(|&idx| cube[idx]).collect();
        let last = z.len() - 1;
        let first = (0..z.len()).map(|i| 0.5 * (z[i] + z[last - i].conj())).collect();
        let second = (0..z.len()).map(|i| Complex64::new(0.0, -0.5) * (z[i] - z[last - i].conj())).collect();
        (first, second)
    }

    /// c_k = Σ_m a_{k−m} b_m for k ∈ {-N..N}³, zero extension outside.
    pub fn convolve(&self, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        self.product_back(&self.transform(a), &self.transform(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sub, GridConfig};

    #[test]
    fn hermitian_pairs_match_plain_convolution() {
        let g = GridConfig::new(2).unwrap();
        let c = Convolver::new(2);
        let herm = |seed: f64| {
            let mut v: Vec<Complex64> = (0..g.len()).map(|i| Complex64::new((i as f64 * seed).sin(), (i as f64 * seed * 0.7).cos())).collect();
            let last = v.len() - 1;
            let old = v.clone();
            for i in 0..v.len() {
                v[i] = 0.5 * (old[i] + old[last - i].conj());
            }
            v
        };
        let (a, b, d) = (herm(0.3), herm(1.1), herm(2.3));
        let (ta, tb) = c.transform_hermitian_pair(&a, Some(&b));
        let (td, _) = c.transform_hermitian_pair(&d, None);
        let y1: Vec<f64> = ta.iter().zip(&td).map(|(x, y)| x * y).collect();
        let y2: Vec<f64> = tb.iter().zip(&td).map(|(x, y)| x * y).collect();
        let (c1, c2) = c.inverse_real_pair(&y1, Some(&y2));
        let (r1, r2) = (c.convolve(&a, &d), c.convolve(&b, &d));
        for i in 0..g.len() {
            assert!((c1[i] - r1[i]).norm() < 1e-12 && (c2[i] - r2[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn friendly_sizes() {
        assert_eq!(fft_friendly(18), 18);
        assert_eq!(fft_friendly(34), 36);
        assert_eq!(fft_friendly(66), 72);
        assert_eq!(fft_friendly(7), 8);
    }

    #[test]
    fn round_trip_and_single_mode() {
        let n = 6;
        let f = Fft3::new(n);
        let orig: Vec<Complex64> = (0..n * n * n).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let mut a = orig.clone();
        f.forward(&mut a);
        f.inverse(&mut a);
        for (x, y) in a.iter().zip(&orig) {
            assert!((x / (n * n * n) as f64 - y).norm() < 1e-13);
        }
        let mut d = vec![Complex64::new(0.0, 0.0); n * n * n];
        d[(n + 2) * n + 3] = Complex64::new(1.0, 0.0);
        f.forward(&mut d);
        let (k0, k1, k2) = (1.0, 4.0, 5.0);
        let idx = (n + 4) * n + 5;
        let phase = -2.0 * std::f64::consts::PI * (k0 * 1.0 + k1 * 2.0 + k2 * 3.0) / n as f64;
        assert!((d[idx] - Complex64::from_polar(1.0, phase)).norm() < 1e-13);
    }

    #[test]
    fn convolution_matches_naive() {
        let g = GridConfig::new(2).unwrap();
        let c = Convolver::new(2);
        let a: Vec<Complex64> = (0..g.len()).map(|i| Complex64::new((i as f64 * 0.7).sin(), (i as f64).cos())).collect();
        let b: Vec<Complex64> = (0..g.len()).map(|i| Complex64::new((i as f64 * 1.3).cos(), 0.2 * i as f64)).collect();
        let fast = c.convolve(&a, &b);
        for (ki, k) in g.vectors().enumerate() {
            let mut s = Complex64::new(0.0, 0.0);
            for (mi, m) in g.vectors().enumerate() {
                if let Some(li) = g.index(sub(k, m)) {
                    s += a[li] * b[mi];
                }
            }
            assert!((s - fast[ki]).norm() < 1e-11, "{k:?}");
        }
    }
}
