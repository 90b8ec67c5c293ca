//! Fourier lattice {-N..N}³ on the period [-π, π)³ and the support geometry.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Integer lattice vector.
pub type Lattice = [i32; 3];

/// Support ratio λ = 2/(3+√2).
pub const LAMBDA: f64 = 2.0 / (3.0 + std::f64::consts::SQRT_2);

/// Lattice and periodization parameters: T = π, R = λπ, q_max = 2R.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridConfig {
    pub n: usize,
}

impl GridConfig {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("N must be at least 1".into()));
        }
        Ok(Self { n })
    }

    /// Grid with N = 0, holding only the zero mode.
    pub fn trivial() -> Self {
        Self { n: 0 }
    }

    pub fn period_half_width(&self) -> f64 {
        PI
    }

    pub fn lambda(&self) -> f64 {
        LAMBDA
    }

    /// Support radius R = λπ.
    pub fn radius(&self) -> f64 {
        LAMBDA * PI
    }

    /// Relative-velocity bound 2R.
    pub fn q_max(&self) -> f64 {
        2.0 * LAMBDA * PI
    }

    /// Modes per axis, 2N+1.
    pub fn side(&self) -> usize {
        2 * self.n + 1
    }

    /// Number of lattice points, (2N+1)³.
    pub fn len(&self) -> usize {
        self.side().pow(3)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, k: Lattice) -> bool {
        let n = self.n as i32;
        k.iter().all(|&c| c.abs() <= n)
    }

    /// Lexicographic index of `k`, or `None` outside the lattice.
    pub fn index(&self, k: Lattice) -> Option<usize> {
        if !self.contains(k) {
            return None;
        }
        let n = self.n as i32;
        let s = self.side();
        Some(((k[0] + n) as usize * s + (k[1] + n) as usize) * s + (k[2] + n) as usize)
    }

    /// Lattice vector at lexicographic index `i`.
    pub fn vector(&self, i: usize) -> Lattice {
        let s = self.side();
        let n = self.n as i32;
        [(i / (s * s)) as i32 - n, ((i / s) % s) as i32 - n, (i % s) as i32 - n]
    }

    /// All lattice vectors in lexicographic order.
    pub fn vectors(&self) -> impl Iterator<Item = Lattice> + '_ {
        (0..self.len()).map(move |i| self.vector(i))
    }
}

pub fn add(a: Lattice, b: Lattice) -> Lattice {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Lattice, b: Lattice) -> Lattice {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn neg(a: Lattice) -> Lattice {
    [-a[0], -a[1], -a[2]]
}

pub(crate) fn dot(a: Lattice, b: Lattice) -> i64 {
    a.iter().zip(&b).map(|(&x, &y)| x as i64 * y as i64).sum()
}

pub(crate) fn to_f64(a: Lattice) -> [f64; 3] {
    [a[0] as f64, a[1] as f64, a[2] as f64]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_constants() {
        let g = GridConfig::new(4).unwrap();
        assert!((g.lambda() - 2.0 / (3.0 + 2f64.sqrt())).abs() < 1e-16);
        assert_eq!(g.q_max(), 2.0 * g.radius());
        assert!(GridConfig::new(0).is_err());
    }

    #[test]
    fn index_roundtrip() {
        let g = GridConfig::new(3).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.index(g.vector(i)), Some(i));
        }
        assert_eq!(g.index([4, 0, 0]), None);
    }
}
