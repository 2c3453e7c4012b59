//! The `D_d` / `K_d` reduction calculus between radial `d`-dimensional
//! functions and one-dimensional ones, plus the elementary radial operators.

mod extension;
mod norms;

pub use extension::{extend_profile, extension_bound, Extension, ExtensionReport};
pub use norms::{
    hardy_residual, nabla_rad_coefficients, norm_suite, sigma1_norm, sigma2_norm, NormOps,
    NormReport,
};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{gauss_legendre, Grid};

/// `Lambda u = -rho u'`.
pub fn dilation(grid: &Grid, u: &DVector<f64>) -> DVector<f64> {
    -(grid.diff1() * u).component_mul(grid.nodes())
}

pub fn dilation_matrix(grid: &Grid) -> DMatrix<f64> {
    let mut m = -grid.diff1().clone();
    for (i, r) in grid.nodes().iter().enumerate() {
        m.row_mut(i).scale_mut(*r);
    }
    m
}

/// Radial Laplacian `u'' + (d-1)/rho u'`, with the limit `d u''(0)` at the center.
pub fn radial_laplacian(grid: &Grid, d: u32, u: &DVector<f64>) -> DVector<f64> {
    laplacian_matrix(grid, d) * u
}

pub fn laplacian_matrix(grid: &Grid, d: u32) -> DMatrix<f64> {
    let mut m = grid.diff2().clone();
    let df = d as f64;
    m.row_mut(0).scale_mut(df);
    for i in 1..grid.size() {
        let s = (df - 1.0) / grid.nodes()[i];
        for j in 0..grid.size() {
            m[(i, j)] += s * grid.diff1()[(i, j)];
        }
    }
    m
}

pub(crate) fn check_dimension(d: u32) -> Result<()> {
    if d < 5 || d % 2 == 0 {
        return Err(Error::InvalidDimension(d as i64));
    }
    Ok(())
}

/// Coefficients `a_n` with `D_d u = sum_n a_n rho^{n+1} u^{(n)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DCoefficients {
    pub d: u32,
    pub coeffs: Vec<f64>,
}

pub fn d_coefficients(d: u32) -> Result<DCoefficients> {
    check_dimension(d)?;
    // D_3 u = rho u; D_{d+2} u = rho^{-1} (D_d[rho^2 u])'.
    let mut a = vec![1.0];
    let mut dim = 3;
    while dim < d {
        let len = a.len();
        let at = |k: usize| a.get(k).copied().unwrap_or(0.0);
        // D_d[rho^2 u] = sum_k b_k rho^{k+3} u^{(k)}
        let b: Vec<f64> = (0..len)
            .map(|k| {
                at(k) + 2.0 * (k + 1) as f64 * at(k + 1) + ((k + 2) * (k + 1)) as f64 * at(k + 2)
            })
            .collect();
        a = (0..=len)
            .map(|j| {
                let own = if j < len { (j + 3) as f64 * b[j] } else { 0.0 };
                let prev = if j > 0 { b[j - 1] } else { 0.0 };
                own + prev
            })
            .collect();
        dim += 2;
    }
    Ok(DCoefficients { d, coeffs: a })
}

/// Dense matrices of `D_d` and `K_d` on a fixed grid.
#[derive(Debug, Clone)]
pub struct ReductionOps {
    pub coeffs: DCoefficients,
    d_matrix: DMatrix<f64>,
    k_matrix: DMatrix<f64>,
}

impl ReductionOps {
    pub fn new(d: u32, grid: &Grid) -> Result<Self> {
        let coeffs = d_coefficients(d)?;
        let d_matrix = d_matrix(&coeffs, grid);
        let k_matrix = k_matrix(d, grid);
        Ok(Self {
            coeffs,
            d_matrix,
            k_matrix,
        })
    }

    pub fn d_matrix(&self) -> &DMatrix<f64> {
        &self.d_matrix
    }

    pub fn k_matrix(&self) -> &DMatrix<f64> {
        &self.k_matrix
    }

    pub fn apply_d(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.d_matrix * u
    }

    pub fn apply_k(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.k_matrix * w
    }
}

fn d_matrix(coeffs: &DCoefficients, grid: &Grid) -> DMatrix<f64> {
    let n = grid.size();
    let mut out = DMatrix::<f64>::zeros(n, n);
    for (k, a) in coeffs.coeffs.iter().enumerate() {
        let power = grid.diff_power(k);
        for i in 0..n {
            let s = a * grid.nodes()[i].powi(k as i32 + 1);
            for j in 0..n {
                out[(i, j)] += s * power[(i, j)];
            }
        }
    }
    out
}

/// `K_d w(rho) = int_0^1 G(t) q(rho t) dt`, `q = w / rho`,
/// `G(t) = t^2 (1 - t^2)^{k-1} / (2^{k-1} (k-1)!)`, `k = (d-3)/2`.
fn k_matrix(d: u32, grid: &Grid) -> DMatrix<f64> {
    let k = ((d - 3) / 2) as usize;
    let n = grid.size();
    let norm: f64 = 2f64.powi(k as i32 - 1) * (1..k).map(|j| j as f64).product::<f64>();
    let (tx, tw) = gauss_legendre(grid.degree() / 2 + k + 2);

    // q = Q w: division by rho away from the center, q(0) = w'(0)
    let mut q = DMatrix::<f64>::zeros(n, n);
    q.row_mut(0).copy_from(&grid.diff1().row(0));
    for i in 1..n {
        q[(i, i)] = 1.0 / grid.nodes()[i];
    }

    let mut eval = DMatrix::<f64>::zeros(n, n);
    for (i, &rho) in grid.nodes().iter().enumerate() {
        for (&t, &w) in tx.iter().zip(&tw) {
            let g = w * t * t * (1.0 - t * t).powi(k as i32 - 1) / norm;
            let row = grid.cardinal_row(rho * t);
            for (j, l) in row.into_iter().enumerate() {
                eval[(i, j)] += g * l;
            }
        }
    }
    eval * q
}

/// Free-function form of [`ReductionOps::apply_d`] for one-off use.
pub fn apply_d(coeffs: &DCoefficients, grid: &Grid, values: &DVector<f64>) -> Result<DVector<f64>> {
    grid.check_len(values)?;
    Ok(d_matrix(coeffs, grid) * values)
}

/// Free-function form of [`ReductionOps::apply_k`] for one-off use.
pub fn apply_k(d: u32, grid: &Grid, values: &DVector<f64>) -> Result<DVector<f64>> {
    check_dimension(d)?;
    grid.check_len(values)?;
    Ok(k_matrix(d, grid) * values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;
    use approx::assert_abs_diff_eq;

    #[test]
    fn coefficients_low_dimensions() {
        assert_eq!(d_coefficients(5).unwrap().coeffs, vec![3.0, 1.0]);
        assert_eq!(d_coefficients(7).unwrap().coeffs, vec![15.0, 9.0, 1.0]);
        // independent expansion of (rho^{-1} d/drho)^3 (rho^7 u)
        assert_eq!(d_coefficients(9).unwrap().coeffs, vec![105.0, 87.0, 18.0, 1.0]);
        assert!(d_coefficients(6).is_err());
        assert!(d_coefficients(3).is_err());
    }

    #[test]
    fn coefficient_invariants() {
        for d in (5..=15).step_by(2) {
            let c = d_coefficients(d).unwrap();
            assert_eq!(c.coeffs.len(), ((d + 1) / 2 - 1) as usize);
            assert_eq!(*c.coeffs.last().unwrap(), 1.0);
            assert!(c.coeffs.iter().all(|a| *a > 0.0));
            // a_0 = (d-2)!! via D_d 1 = (rho^{-1} d/drho)^k rho^{d-2}
            let dfact: f64 = (1..=d - 2).rev().step_by(2).map(|x| x as f64).product();
            assert_eq!(c.coeffs[0], dfact);
        }
    }

    #[test]
    fn d_of_constant_and_square() {
        let g = Grid::new(24).unwrap();
        let c = d_coefficients(5).unwrap();
        let ones = DVector::from_element(g.size(), 1.0);
        let w = apply_d(&c, &g, &ones).unwrap();
        for (r, v) in g.nodes().iter().zip(w.iter()) {
            assert_abs_diff_eq!(*v, 3.0 * r, epsilon = 1e-12);
        }
        // D_7(rho^2) = 15 rho^3 + 18 rho^3 + 2 rho^3 = 35 rho^3
        let c = d_coefficients(7).unwrap();
        let sq = g.sample(|r| r * r);
        let w = apply_d(&c, &g, &sq).unwrap();
        for (r, v) in g.nodes().iter().zip(w.iter()) {
            assert_abs_diff_eq!(*v, 35.0 * r.powi(3), epsilon = 1e-10);
        }
        assert!(matches!(
            apply_d(&c, &g, &DVector::zeros(3)),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn k_inverts_d_on_constants() {
        let g = Grid::new(16).unwrap();
        let w = g.sample(|r| 3.0 * r);
        let u = apply_k(5, &g, &w).unwrap();
        for v in u.iter() {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn laplacian_of_square() {
        let g = Grid::new(16).unwrap();
        for d in [5u32, 7, 9] {
            let u = g.sample(|r| r * r);
            let lap = radial_laplacian(&g, d, &u);
            for v in lap.iter() {
                assert_abs_diff_eq!(*v, 2.0 * d as f64, epsilon = 1e-10);
            }
        }
    }

    fn rel(a: &DVector<f64>, b: &DVector<f64>, g: &Grid) -> f64 {
        g.l2_norm(&(a - b)) / g.l2_norm(b).max(1e-300)
    }

    #[test]
    fn commutators_on_corpus() {
        let g = Grid::new(48).unwrap();
        let mut corpus = Corpus::new(11);
        for d in [5u32, 7, 9] {
            let ops = ReductionOps::new(d, &g).unwrap();
            let lap = laplacian_matrix(&g, d);
            for _ in 0..10 {
                let u = corpus.even_polynomial(&g, 16);
                let du = ops.apply_d(&u);
                let lhs = ops.apply_d(&dilation(&g, &u));
                let rhs = dilation(&g, &du) + &du;
                assert!(rel(&lhs, &rhs, &g) < 1e-9);
                let lhs = ops.apply_d(&(&lap * &u));
                let rhs = g.derivative(&du, 2);
                assert!(rel(&lhs, &rhs, &g) < 1e-8);
                assert!(rel(&ops.apply_k(&du), &u, &g) < 1e-8);
                // K_d acts on functions vanishing at the center
                let w = corpus.even_polynomial(&g, 16).component_mul(g.nodes());
                let kw = ops.apply_k(&w);
                let lhs = ops.apply_k(&dilation(&g, &w));
                let rhs = dilation(&g, &kw) - &kw;
                assert!(rel(&lhs, &rhs, &g) < 1e-9);
                let lhs = ops.apply_k(&g.derivative(&w, 2));
                let rhs = &lap * &kw;
                assert!(rel(&lhs, &rhs, &g) < 1e-8);
                assert!(du[0].abs() < 1e-14);
            }
        }
    }
}
