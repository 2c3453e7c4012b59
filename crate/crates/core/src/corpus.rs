//! Seeded random test functions: even polynomials and Gaussians in `rho^2`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::Grid;
use crate::model::StatePair;

/// Reproducible generator of smooth even profiles.
#[derive(Debug, Clone)]
pub struct Corpus {
    rng: ChaCha8Rng,
}

impl Corpus {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    /// Random coefficients for `sum_k c_k T_{2k}(rho)`, `2k <= max_degree`.
    pub fn even_coefficients(&mut self, max_degree: usize) -> Vec<f64> {
        (0..=max_degree / 2).map(|_| self.rng.gen_range(-1.0..1.0)).collect()
    }

    /// `sum_k c_k T_{2k}(rho)` with `c_k ~ U(-1, 1)`.
    pub fn even_polynomial(&mut self, grid: &Grid, max_degree: usize) -> DVector<f64> {
        let c = self.even_coefficients(max_degree);
        grid.sample(|r| even_chebyshev(&c, r))
    }

    /// `exp(-a rho^2)` with `a ~ U(0.5, 3)`.
    pub fn gaussian(&mut self, grid: &Grid) -> DVector<f64> {
        let a = self.rng.gen_range(0.5..3.0);
        grid.sample(|r| (-a * r * r).exp())
    }

    /// Alternates even polynomials and Gaussians.
    pub fn smooth_even(&mut self, grid: &Grid, max_degree: usize, index: usize) -> DVector<f64> {
        if index % 4 == 3 {
            self.gaussian(grid)
        } else {
            self.even_polynomial(grid, max_degree)
        }
    }

    pub fn even_pair(&mut self, grid: &Grid, max_degree: usize) -> StatePair {
        StatePair {
            first: self.even_polynomial(grid, max_degree),
            second: self.even_polynomial(grid, max_degree),
        }
    }

    /// `rho^alpha p(rho)` with a random polynomial `p`, admissible for Hardy's inequality.
    pub fn vanishing(&mut self, grid: &Grid, alpha: u32, degree: usize) -> DVector<f64> {
        let c: Vec<f64> = (0..=degree).map(|_| self.rng.gen_range(-1.0..1.0)).collect();
        grid.sample(|r| {
            let p = c.iter().rev().fold(0.0, |acc, ck| acc * r + ck);
            r.powi(alpha as i32) * p
        })
    }
}

/// `sum_k c_k T_{2k}(x)` for `x` in `[0, 1]`.
pub fn even_chebyshev(c: &[f64], x: f64) -> f64 {
    let theta = x.clamp(-1.0, 1.0).acos();
    c.iter()
        .enumerate()
        .map(|(k, ck)| ck * (2.0 * k as f64 * theta).cos())
        .sum()
}
