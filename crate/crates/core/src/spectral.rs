//! Non-uniform discrete Fourier sums S_j = Σ_k c_k e^{−2πi j θ_k} on an
//! integer grid j = 0..n−1, by Gaussian gridding onto an oversampled FFT.
//!
//! With 12 spreading points per side and oversampling 2 the relative error
//! is below 1e−12 of Σ|c_k|.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

const SPREAD: i64 = 12;

pub struct GridSum {
    n: usize,
    /// Output band [−m/2, m/2) covers 0..n with m = 2n.
    m: usize,
    mr: usize,
    tau: f64,
    step: f64,
    e3: Vec<f64>,
    grid: Vec<Complex64>,
}

impl GridSum {
    pub fn new(n: usize) -> GridSum {
        let m = 2 * n.max(1);
        let mr = 2 * m;
        let tau = PI * SPREAD as f64 / (m as f64 * m as f64 * 2.0 * 1.5);
        let step = 2.0 * PI / mr as f64;
        let e3 = (0..=SPREAD)
            .map(|l| (-(l as f64 * step).powi(2) / (4.0 * tau)).exp())
            .collect();
        GridSum {
            n,
            m,
            mr,
            tau,
            step,
            e3,
            grid: vec![Complex64::new(0.0, 0.0); mr],
        }
    }

    /// Adds c·e^{−2πi j θ} to every output j; θ in [0, 1).
    #[inline]
    pub fn add(&mut self, theta: f64, c: Complex64) {
        let x = 2.0 * PI * theta;
        let m0 = (x / self.step).floor() as i64;
        let dx = x - m0 as f64 * self.step;
        let e1 = (-dx * dx / (4.0 * self.tau)).exp();
        let e2 = (dx * self.step / (2.0 * self.tau)).exp();
        let mr = self.mr as i64;
        // l ≥ 0 side
        let mut pw = 1.0;
        for l in 0..=SPREAD {
            let idx = (m0 + l).rem_euclid(mr) as usize;
            self.grid[idx] += c * (e1 * pw * self.e3[l as usize]);
            pw *= e2;
        }
        let inv = 1.0 / e2;
        let mut pw = inv;
        for l in 1..SPREAD {
            let idx = (m0 - l).rem_euclid(mr) as usize;
            self.grid[idx] += c * (e1 * pw * self.e3[l as usize]);
            pw *= inv;
        }
    }

    pub fn finish(mut self) -> Vec<Complex64> {
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(self.mr).process(&mut self.grid);
        let scale = (PI / self.tau).sqrt() / self.mr as f64;
        (0..self.n)
            .map(|j| {
                debug_assert!(j < self.m / 2);
                let k = j as f64;
                self.grid[j] * (scale * (k * k * self.tau).exp())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::cis_turns;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 301;
        let src: Vec<(f64, Complex64)> = (0..2000)
            .map(|_| (rng.gen::<f64>(), Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
            .collect();
        let mut g = GridSum::new(n);
        for &(t, c) in &src {
            g.add(t, c);
        }
        let fast = g.finish();
        let total: f64 = src.iter().map(|(_, c)| c.norm()).sum();
        for j in [0usize, 1, 17, 150, 300] {
            let direct: Complex64 = src.iter().map(|&(t, c)| c * cis_turns(-(j as f64) * t)).sum();
            assert!((fast[j] - direct).norm() < 1e-12 * total, "j={j}");
        }
    }
}
