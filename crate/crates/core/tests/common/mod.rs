//! Test-side oracles, written from the defining formulas without touching
//! the library's kernel assembly.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cell centres of `n` equal cells on `(a, b)`.
pub fn centers(a: f64, b: f64, n: usize) -> (Vec<f64>, f64) {
    let h = (b - a) / n as f64;
    ((0..n).map(|i| a + (i as f64 + 0.5) * h).collect(), h)
}

/// `∫_{ℝ∖(a,b)} |x − y|^{−1−tp} dy`.
pub fn exterior_1d(x: f64, a: f64, b: f64, tp: f64) -> f64 {
    ((x - a).powf(-tp) + (b - x).powf(-tp)) / tp
}

/// Matrix of `w ↦ [w]_{t,2}^2` on the 1D cell-centred grid.
pub fn quadratic_form(a: f64, b: f64, n: usize, t: f64) -> DMatrix<f64> {
    let (x, h) = centers(a, b, n);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let k = (x[i] - x[j]).abs().powf(-(1.0 + 2.0 * t)) * h * h;
                m[(i, j)] -= 2.0 * k;
                m[(i, i)] += 2.0 * k;
            }
        }
        m[(i, i)] += 2.0 * exterior_1d(x[i], a, b, 2.0 * t) * h;
    }
    m
}

/// Smallest eigenvalue of the pencil `(A, h·I)`.
pub fn smallest_pencil_eigenvalue(a: f64, b: f64, n: usize, t: f64) -> f64 {
    let h = (b - a) / n as f64;
    let m = quadratic_form(a, b, n, t) / h;
    SymmetricEigen::new(m).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Rayleigh quotient of the system on `(0,1)` by direct summation.
pub struct DirectQuotient {
    x: Vec<f64>,
    h: f64,
    r: f64,
    s: f64,
    p: f64,
    gamma: f64,
    tail_r: Vec<f64>,
    tail_s: Vec<f64>,
}

impl DirectQuotient {
    pub fn new(n: usize, r: f64, s: f64, p: f64, gamma: f64) -> DirectQuotient {
        let (x, h) = centers(0.0, 1.0, n);
        let tail_r = x.iter().map(|&xi| exterior_1d(xi, 0.0, 1.0, r * p)).collect();
        let tail_s = x.iter().map(|&xi| exterior_1d(xi, 0.0, 1.0, s * p)).collect();
        DirectQuotient {
            x,
            h,
            r,
            s,
            p,
            gamma,
            tail_r,
            tail_s,
        }
    }

    fn energy(&self, w: &[f64], t: f64, tail: &[f64]) -> f64 {
        let n = w.len();
        let mut e = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    e += (w[i] - w[j]).abs().powf(self.p) * (self.x[i] - self.x[j]).abs().powf(-(1.0 + t * self.p))
                        * self.h
                        * self.h;
                }
            }
            e += 2.0 * w[i].abs().powf(self.p) * tail[i] * self.h;
        }
        e
    }

    pub fn quotient(&self, u: &[f64], v: &[f64]) -> f64 {
        let alpha = self.gamma * self.p;
        let beta = self.p - alpha;
        let c: f64 = u.iter().zip(v).map(|(a, b)| a.abs().powf(alpha) * b.abs().powf(beta) * self.h).sum();
        (self.energy(u, self.r, &self.tail_r) + self.energy(v, self.s, &self.tail_s)) / c
    }
}

/// Minimum of the quotient over `samples` random nonnegative pairs.
///
/// Points are drawn uniformly from the positive part of the unit sphere of
/// ℝ^{2n}; the quotient is scale invariant, so this covers the normalized
/// constraint set. Nonnegative pairs suffice because `|·|` lowers the energy
/// and leaves the coupling unchanged.
pub fn random_search(q: &DirectQuotient, n: usize, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    let mut z = vec![0.0; 2 * n];
    for _ in 0..samples {
        for zi in z.iter_mut() {
            // |N(0,1)| by Box-Muller
            let (a, b): (f64, f64) = (rng.gen_range(f64::EPSILON..1.0), rng.gen());
            *zi = ((-2.0 * a.ln()).sqrt() * (2.0 * std::f64::consts::PI * b).cos()).abs();
        }
        best = best.min(q.quotient(&z[..n], &z[n..]));
    }
    best
}
