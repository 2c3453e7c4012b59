//! Radial Sobolev, Sigma and `D`-norms, and the Hardy quotient.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{check_dimension, ReductionOps};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{ModelParams, StatePair};

/// Coefficients `c_n` with `nabla_rad^m u = sum_n c_n rho^{n-m} u^{(n)}`, `n = 0..=m`.
///
/// `nabla_rad^m` is `Delta^{m/2}` for even `m` and `d/drho Delta^{(m-1)/2}` for odd `m`.
pub fn nabla_rad_coefficients(d: u32, m: usize) -> Vec<f64> {
    // (c, order): operator sum_n c_n rho^{n-order} u^{(n)}
    fn derivative(c: &[f64], order: usize) -> Vec<f64> {
        (0..=c.len())
            .map(|n| {
                let own = c.get(n).map_or(0.0, |cn| (n as f64 - order as f64) * cn);
                let prev = if n > 0 { c[n - 1] } else { 0.0 };
                own + prev
            })
            .collect()
    }
    let df = d as f64;
    let mut c = vec![1.0];
    let mut order = 0;
    while order + 2 <= m {
        let first = derivative(&c, order);
        let mut second = derivative(&first, order + 1);
        for (s, f) in second.iter_mut().zip(&first) {
            *s += (df - 1.0) * f;
        }
        c = second;
        order += 2;
    }
    if order < m {
        c = derivative(&c, order);
    }
    c
}

/// Grid-dependent matrices shared by all norm evaluations in dimension `d`.
#[derive(Debug, Clone)]
pub struct NormOps {
    pub d: u32,
    pub m_d: usize,
    pub reduction: ReductionOps,
    /// `D1^n` for `n = 0..=m_d`.
    powers: Vec<DMatrix<f64>>,
    /// `nabla_rad^n` for `n = 0..=m_d`, center row zeroed.
    nabla: Vec<DMatrix<f64>>,
    weights: DVector<f64>,
    nodes: DVector<f64>,
    d1: DMatrix<f64>,
}

impl NormOps {
    pub fn new(d: u32, grid: &Grid) -> Result<Self> {
        check_dimension(d)?;
        let m_d = ((d + 1) / 2) as usize;
        let size = grid.size();
        let mut powers = vec![DMatrix::identity(size, size)];
        for n in 1..=m_d {
            powers.push(grid.diff_power(n));
        }
        let nodes = grid.nodes().clone();
        let nabla = (0..=m_d)
            .map(|n| {
                let c = nabla_rad_coefficients(d, n);
                let mut m = DMatrix::zeros(size, size);
                for i in 1..size {
                    for (j, cj) in c.iter().enumerate() {
                        if *cj == 0.0 {
                            continue;
                        }
                        let s = cj * nodes[i].powi(j as i32 - n as i32);
                        for k in 0..size {
                            m[(i, k)] += s * powers[j][(i, k)];
                        }
                    }
                }
                m
            })
            .collect();
        Ok(Self {
            d,
            m_d,
            reduction: ReductionOps::new(d, grid)?,
            powers,
            nabla,
            weights: grid.quad_weights().clone(),
            nodes,
            d1: grid.diff1().clone(),
        })
    }

    fn l2_sq(&self, v: &DVector<f64>) -> f64 {
        self.weights.iter().zip(v.iter()).map(|(w, x)| w * x * x).sum()
    }

    fn weighted_sq(&self, v: &DVector<f64>, exponent: i32) -> f64 {
        self.weights
            .iter()
            .zip(v.iter())
            .zip(self.nodes.iter())
            .map(|((w, x), r)| w * r.powi(exponent) * x * x)
            .sum()
    }

    /// `sum_{n <= m} int rho^{d-1} |nabla_rad^n u|^2`, squared.
    pub fn sobolev_sq(&self, u: &DVector<f64>, m: usize) -> f64 {
        (0..=m)
            .map(|n| self.weighted_sq(&(&self.nabla[n] * u), self.d as i32 - 1))
            .sum()
    }

    /// `int rho^{d-1} |nabla_rad^n u|^2`, the squared `H^n-dot(B^d)` seminorm.
    pub fn homogeneous_sq(&self, u: &DVector<f64>, n: usize) -> f64 {
        self.weighted_sq(&(&self.nabla[n] * u), self.d as i32 - 1)
    }

    /// `nabla_rad^n u` at the nodes; the center value is not computed (set to zero).
    pub fn nabla_rad(&self, u: &DVector<f64>, n: usize) -> DVector<f64> {
        &self.nabla[n] * u
    }

    pub fn sigma1_sq(&self, u: &DVector<f64>) -> f64 {
        self.l2_sq(u)
            + (1..=self.m_d)
                .map(|n| self.weighted_sq(&(&self.powers[n] * u), 2 * (n as i32 - 1)))
                .sum::<f64>()
    }

    pub fn sigma2_sq(&self, u: &DVector<f64>) -> f64 {
        (0..self.m_d)
            .map(|n| self.weighted_sq(&(&self.powers[n] * u), 2 * n as i32))
            .sum()
    }

    /// The pair `(w1, w2) = (D_d u1, D_d u2)`.
    pub fn reduce(&self, u: &StatePair) -> (DVector<f64>, DVector<f64>) {
        (self.reduction.apply_d(&u.first), self.reduction.apply_d(&u.second))
    }

    /// The boundary functional `[D_d u1]'(1) + D_d u2(1)`.
    pub fn boundary_term(&self, w1: &DVector<f64>, w2: &DVector<f64>) -> f64 {
        let last = w1.len() - 1;
        self.d1.row(last).transpose().dot(w1) + w2[last]
    }

    /// The real sesquilinear form `(u | v)_D`.
    pub fn d_inner(&self, u: &StatePair, v: &StatePair) -> f64 {
        let (u1, u2) = self.reduce(u);
        let (v1, v2) = self.reduce(v);
        let ip = |a: &DVector<f64>, b: &DVector<f64>| -> f64 {
            self.weights
                .iter()
                .zip(a.iter().zip(b.iter()))
                .map(|(w, (x, y))| w * x * y)
                .sum()
        };
        ip(&(&self.powers[2] * &u1), &(&self.powers[2] * &v1))
            + ip(&(&self.d1 * &u2), &(&self.d1 * &v2))
            + self.boundary_term(&u1, &u2) * self.boundary_term(&v1, &v2)
    }

    pub fn d_norm_sq(&self, u: &StatePair) -> f64 {
        let (w1, w2) = self.reduce(u);
        self.l2_sq(&(&self.powers[2] * &w1))
            + self.l2_sq(&(&self.d1 * &w2))
            + self.boundary_term(&w1, &w2).powi(2)
    }

    /// `||D_d u1||^2_{H^1-dot} + ||D_d u2||^2_{L^2}`.
    pub fn lower_norm_sq(&self, u: &StatePair) -> f64 {
        let (w1, w2) = self.reduce(u);
        self.l2_sq(&(&self.d1 * &w1)) + self.l2_sq(&w2)
    }

    /// Squared `H^{m_d} x H^{m_d - 1}` radial norm.
    pub fn sobolev_pair_sq(&self, u: &StatePair) -> f64 {
        self.sobolev_sq(&u.first, self.m_d) + self.sobolev_sq(&u.second, self.m_d - 1)
    }

    /// Squared `H^{m_d - 1} x H^{m_d - 2}` radial norm, the lower-regularity space.
    pub fn sobolev_lower_sq(&self, u: &StatePair) -> f64 {
        self.sobolev_sq(&u.first, self.m_d - 1) + self.sobolev_sq(&u.second, self.m_d - 2)
    }

    pub fn sigma_sq(&self, u: &StatePair) -> f64 {
        self.sigma1_sq(&u.first) + self.sigma2_sq(&u.second)
    }

    pub fn report(&self, u: &StatePair) -> Result<NormReport> {
        if !u.is_finite() {
            return Err(Error::NonFinite("norm input"));
        }
        let sobolev_m = self.sobolev_pair_sq(u).sqrt();
        let sigma = self.sigma_sq(u).sqrt();
        let d_norm = self.d_norm_sq(u).sqrt();
        let lower = self.lower_norm_sq(u).sqrt();
        let ratio = |a: f64| if sobolev_m > 0.0 { a / sobolev_m } else { 0.0 };
        let out = NormReport {
            sobolev_m,
            sigma,
            d_norm,
            lower,
            ratios: (ratio(d_norm), ratio(sigma)),
        };
        if ![sobolev_m, sigma, d_norm, lower].iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("norm value"));
        }
        Ok(out)
    }
}

/// Norms of one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormReport {
    /// `H^{m_d} x H^{m_d-1}` radial norm.
    pub sobolev_m: f64,
    /// `Sigma_1 x Sigma_2` norm.
    pub sigma: f64,
    /// `||.||_D`, including the boundary term.
    pub d_norm: f64,
    /// `||D_d u1||_{H^1-dot} + ||D_d u2||_{L^2}` (as a Hilbert norm).
    pub lower: f64,
    /// `(d_norm / sobolev_m, sigma / sobolev_m)`; zero for the zero state.
    pub ratios: (f64, f64),
}

pub fn norm_suite(params: &ModelParams, grid: &Grid, state: &StatePair) -> Result<NormReport> {
    grid.check_len(&state.first)?;
    grid.check_len(&state.second)?;
    NormOps::new(params.d, grid)?.report(state)
}

pub fn sigma1_norm(d: u32, grid: &Grid, u: &DVector<f64>) -> Result<f64> {
    Ok(NormOps::new(d, grid)?.sigma1_sq(u).sqrt())
}

pub fn sigma2_norm(d: u32, grid: &Grid, u: &DVector<f64>) -> Result<f64> {
    Ok(NormOps::new(d, grid)?.sigma2_sq(u).sqrt())
}

/// `||rho^{-alpha} f|| / ||rho^{1-alpha} f'||` in `L^2(0, 1)`.
///
/// `f` must vanish to order `alpha` at the center; the center values are the
/// limits `f^{(alpha)}(0)/alpha!` and `f^{(alpha)}(0)/(alpha-1)!`.
pub fn hardy_residual(alpha: u32, grid: &Grid, f: &DVector<f64>) -> Result<f64> {
    grid.check_len(f)?;
    if alpha == 0 {
        return Err(Error::Config("Hardy exponent must be positive".into()));
    }
    let a = alpha as i32;
    let df = grid.derivative(f, 1);
    let mut top = f.clone();
    for _ in 1..alpha {
        top = grid.diff1() * top;
    }
    let center = (grid.diff1().row(0) * &top)[0];
    let fact: f64 = (1..=alpha).map(|k| k as f64).product();
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, (&r, &w)) in grid.nodes().iter().zip(grid.quad_weights().iter()).enumerate() {
        let (x, y) = if i == 0 {
            (center / fact, center * alpha as f64 / fact)
        } else {
            (f[i] * r.powi(-a), df[i] * r.powi(1 - a))
        };
        num += w * x * x;
        den += w * y * y;
    }
    if num == 0.0 {
        return Ok(0.0);
    }
    if den == 0.0 {
        return Err(Error::DegenerateHardy);
    }
    let ratio = (num / den).sqrt();
    if !ratio.is_finite() {
        return Err(Error::NonFinite("Hardy quotient"));
    }
    Ok(ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;
    use crate::model::{make_params, symmetry_mode};
    use crate::reduction::{laplacian_matrix, d_coefficients};
    use approx::assert_abs_diff_eq;

    #[test]
    fn nabla_coefficients_match_direct_operators() {
        assert_eq!(nabla_rad_coefficients(5, 0), vec![1.0]);
        assert_eq!(nabla_rad_coefficients(5, 1), vec![0.0, 1.0]);
        assert_eq!(nabla_rad_coefficients(5, 2), vec![0.0, 4.0, 1.0]);
        let g = Grid::new(24).unwrap();
        let mut corpus = Corpus::new(3);
        for d in [5u32, 7, 9] {
            let ops = NormOps::new(d, &g).unwrap();
            let lap = laplacian_matrix(&g, d);
            let u = corpus.even_polynomial(&g, 10);
            // even and odd orders against repeated Laplacians
            let mut lap_pow = u.clone();
            for k in 0..=ops.m_d / 2 {
                let via = ops.nabla_rad(&u, 2 * k);
                for i in 1..g.size() {
                    assert_abs_diff_eq!(via[i], lap_pow[i], epsilon = 1e-6 * lap_pow.amax().max(1.0));
                }
                if 2 * k + 1 <= ops.m_d {
                    let via = ops.nabla_rad(&u, 2 * k + 1);
                    let exact = g.derivative(&lap_pow, 1);
                    for i in 1..g.size() {
                        assert_abs_diff_eq!(via[i], exact[i], epsilon = 1e-6 * exact.amax().max(1.0));
                    }
                }
                lap_pow = &lap * lap_pow;
            }
        }
    }

    #[test]
    fn zero_state_norms() {
        let p = make_params(5, 3.0, 0.05).unwrap();
        let g = Grid::new(16).unwrap();
        let r = norm_suite(&p, &g, &StatePair::zeros(g.size())).unwrap();
        assert_eq!(r.sobolev_m, 0.0);
        assert_eq!(r.sigma, 0.0);
        assert_eq!(r.d_norm, 0.0);
        assert_eq!(r.lower, 0.0);
        assert_eq!(r.ratios, (0.0, 0.0));
    }

    #[test]
    fn symmetry_mode_d_norm_closed_form() {
        for (d, p) in [(5u32, 3.0), (7, 5.0), (9, 3.0)] {
            let params = make_params(d as i64, p, 0.05).unwrap();
            let g = Grid::new(32).unwrap();
            let s = symmetry_mode(&params, &g);
            let r = norm_suite(&params, &g, &s).unwrap();
            // D_d g_j = alpha_j rho: w1'' = 0, ||w2'||^2 = alpha_2^2, boundary alpha_1 + alpha_2
            let a0 = d_coefficients(d).unwrap().coeffs[0];
            let (a1, a2) = (a0, a0 * params.weight2());
            let exact = (a2 * a2 + (a1 + a2) * (a1 + a2)).sqrt();
            assert_abs_diff_eq!(r.d_norm, exact, epsilon = 1e-7 * exact);
        }
    }

    #[test]
    fn sobolev_of_constant() {
        // only the n = 0 term survives: int rho^{d-1} = 1/d
        let g = Grid::new(16).unwrap();
        let ops = NormOps::new(7, &g).unwrap();
        let u = DVector::from_element(g.size(), 2.0);
        assert_abs_diff_eq!(ops.sobolev_sq(&u, 4), 4.0 / 7.0, epsilon = 1e-13);
        // Sigma_1 of a constant is its L^2 norm; Sigma_2 likewise
        assert_abs_diff_eq!(ops.sigma1_sq(&u), 4.0, epsilon = 1e-13);
        assert_abs_diff_eq!(ops.sigma2_sq(&u), 4.0, epsilon = 1e-13);
    }

    #[test]
    fn hardy_examples() {
        let g = Grid::new(32).unwrap();
        for alpha in 1..=4u32 {
            let f = g.sample(|r| r.powi(alpha as i32));
            let ratio = hardy_residual(alpha, &g, &f).unwrap();
            assert_abs_diff_eq!(ratio, 1.0 / alpha as f64, epsilon = 1e-10);
        }
        let zero = DVector::zeros(g.size());
        assert_eq!(hardy_residual(2, &g, &zero).unwrap(), 0.0);
    }

    #[test]
    fn non_finite_rejected() {
        let p = make_params(5, 3.0, 0.05).unwrap();
        let g = Grid::new(16).unwrap();
        let mut s = StatePair::zeros(g.size());
        s.first[3] = f64::NAN;
        assert_eq!(norm_suite(&p, &g, &s), Err(Error::NonFinite("norm input")));
    }
}
