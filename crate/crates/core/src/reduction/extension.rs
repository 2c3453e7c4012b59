//! Reflection extension of a profile on `[0, 1]` to a compactly supported
//! `C^m` function on `[0, inf)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::norms::{nabla_rad_coefficients, NormOps};
use crate::error::{Error, Result};
use crate::grid::{barycentric_eval, Grid};

/// Lower end of the cutoff transition; the cutoff is 1 to the left of it.
pub const CUTOFF_START: f64 = 1.25;
/// Support radius of the extension.
pub const SUPPORT: f64 = 1.5;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Extension `E_m u` of grid samples `u`.
#[derive(Debug, Clone)]
pub struct Extension {
    pub m: usize,
    nodes: Vec<f64>,
    bary: Vec<f64>,
    values: Vec<f64>,
    /// `u^{(k)}(1)` for `k = 0..=m`.
    boundary: Vec<f64>,
    /// Polynomial smoothstep coefficients in `s^k`.
    step: Vec<f64>,
}

/// Builds `E_m u`; `m` must be `m_d - 1` or `m_d`.
pub fn extend_profile(d: u32, m: usize, grid: &Grid, u: &DVector<f64>) -> Result<Extension> {
    super::check_dimension(d)?;
    grid.check_len(u)?;
    let m_d = ((d + 1) / 2) as usize;
    if m + 1 != m_d && m != m_d {
        return Err(Error::InvalidExtensionOrder {
            m: m as u32,
            low: m_d as u32 - 1,
            high: m_d as u32,
        });
    }
    let last = grid.size() - 1;
    let mut deriv = u.clone();
    let mut boundary = vec![u[last]];
    for _ in 0..m {
        deriv = grid.diff1() * deriv;
        boundary.push(deriv[last]);
    }
    // S(s) = s^{m+1} sum_n C(m+n, n) C(2m+1, m-n) (-s)^n, flat to order m at 0 and 1
    let mut step = vec![0.0; 2 * m + 2];
    for n in 0..=m {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        step[m + 1 + n] = sign * binomial(m + n, n) * binomial(2 * m + 1, m - n);
    }
    Ok(Extension {
        m,
        nodes: grid.nodes().as_slice().to_vec(),
        bary: grid.barycentric().to_vec(),
        values: u.as_slice().to_vec(),
        boundary,
        step,
    })
}

impl Extension {
    fn interior(&self, x: f64) -> f64 {
        barycentric_eval(&self.nodes, &self.bary, &self.values, x)
    }

    /// Cutoff: 1 on `[0, 5/4]`, 0 on `[3/2, inf)`, `C^m` in between.
    pub fn cutoff(&self, rho: f64) -> f64 {
        if rho <= CUTOFF_START {
            return 1.0;
        }
        if rho >= SUPPORT {
            return 0.0;
        }
        let s = (rho - CUTOFF_START) / (SUPPORT - CUTOFF_START);
        let smooth = self.step.iter().rev().fold(0.0, |acc, c| acc * s + c);
        1.0 - smooth
    }

    /// The reflected profile `h_m` on `(1, 3/2)`.
    pub fn reflected(&self, rho: f64) -> f64 {
        let x = rho - 1.0;
        let mirror = self.interior(2.0 - rho);
        if self.m % 2 == 1 {
            let tail: f64 = (0..=(self.m - 1) / 2)
                .map(|n| 2.0 * x.powi(2 * n as i32) / factorial(2 * n) * self.boundary[2 * n])
                .sum();
            tail - mirror
        } else {
            let tail: f64 = (1..=self.m / 2)
                .map(|n| {
                    2.0 * x.powi(2 * n as i32 - 1) / factorial(2 * n - 1) * self.boundary[2 * n - 1]
                })
                .sum();
            mirror + tail
        }
    }

    pub fn eval(&self, rho: f64) -> f64 {
        if rho <= 1.0 {
            self.interior(rho.max(0.0))
        } else if rho < SUPPORT {
            self.cutoff(rho) * self.reflected(rho)
        } else {
            0.0
        }
    }

    /// `sum_{n <= m} int_1^{3/2} rho^{d-1} |nabla_rad^n E u|^2`, by spectral
    /// collocation on the two polynomial pieces `[1, 5/4]` and `[5/4, 3/2]`.
    pub fn outer_sobolev_sq(&self, d: u32) -> Result<f64> {
        let degree = self.nodes.len() - 1 + 2 * self.m + 2;
        let sub = Grid::new(degree)?;
        let mut total = 0.0;
        for (a, b) in [(1.0, CUTOFF_START), (CUTOFF_START, SUPPORT)] {
            let h = b - a;
            let rho: Vec<f64> = sub.nodes().iter().map(|t| a + h * t).collect();
            let d1: DMatrix<f64> = sub.diff1() / h;
            let samples = DVector::from_iterator(rho.len(), rho.iter().map(|&r| {
                // evaluate the piece's polynomial formula up to the endpoints
                self.cutoff(r) * self.reflected(r)
            }));
            let mut derivs = vec![samples];
            for k in 1..=self.m {
                derivs.push(&d1 * &derivs[k - 1]);
            }
            for n in 0..=self.m {
                let c = nabla_rad_coefficients(d, n);
                for (i, &r) in rho.iter().enumerate() {
                    let v: f64 = c
                        .iter()
                        .enumerate()
                        .map(|(j, cj)| cj * r.powi(j as i32 - n as i32) * derivs[j][i])
                        .sum();
                    total += h * sub.quad_weights()[i] * r.powi(d as i32 - 1) * v * v;
                }
            }
        }
        Ok(total)
    }
}

/// Norms entering the two-sided extension bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtensionReport {
    pub m: usize,
    /// `||u||_{H^m(B^d)}`.
    pub ball: f64,
    /// `||E_m u||_{H^m(R^d)}`.
    pub extended: f64,
    /// `Sigma_1` norm for `m = m_d`, `Sigma_2` norm for `m = m_d - 1`.
    pub sigma: f64,
}

impl ExtensionReport {
    /// Measured constant in `||E_m u|| <= C ||u||_Sigma`.
    pub fn ratio(&self) -> f64 {
        if self.sigma > 0.0 {
            self.extended / self.sigma
        } else {
            0.0
        }
    }
}

pub fn extension_bound(d: u32, m: usize, grid: &Grid, u: &DVector<f64>) -> Result<ExtensionReport> {
    let ext = extend_profile(d, m, grid, u)?;
    let ops = NormOps::new(d, grid)?;
    let ball_sq = ops.sobolev_sq(u, m);
    let outer = ext.outer_sobolev_sq(d)?;
    let sigma = if m == ops.m_d {
        ops.sigma1_sq(u)
    } else {
        ops.sigma2_sq(u)
    };
    Ok(ExtensionReport {
        m,
        ball: ball_sq.sqrt(),
        extended: (ball_sq + outer).sqrt(),
        sigma: sigma.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn profile(g: &Grid) -> DVector<f64> {
        g.sample(|r| (1.0 + r * r).recip() + 0.3 * (r * r).cos())
    }

    #[test]
    fn agrees_inside_and_vanishes_outside() {
        let g = Grid::new(32).unwrap();
        let u = profile(&g);
        for m in [2usize, 3] {
            let e = extend_profile(5, m, &g, &u).unwrap();
            let exact = (1.0f64 + 0.25).recip() + 0.3 * 0.25f64.cos();
            assert_abs_diff_eq!(e.eval(0.5), exact, epsilon = 1e-12);
            assert_eq!(e.eval(1.6), 0.0);
            assert_eq!(e.eval(1.5), 0.0);
        }
    }

    #[test]
    fn rejects_orders() {
        let g = Grid::new(16).unwrap();
        let u = profile(&g);
        assert_eq!(
            extend_profile(7, 2, &g, &u).unwrap_err(),
            Error::InvalidExtensionOrder { m: 2, low: 3, high: 4 }
        );
        assert!(extend_profile(7, 3, &g, &u).is_ok());
        assert!(extend_profile(7, 4, &g, &u).is_ok());
    }

    #[test]
    fn cutoff_shape() {
        let g = Grid::new(16).unwrap();
        let e = extend_profile(5, 3, &g, &profile(&g)).unwrap();
        assert_eq!(e.cutoff(1.2), 1.0);
        assert_abs_diff_eq!(e.cutoff(1.375), 0.5, epsilon = 1e-14);
        let mut prev = 1.0;
        for k in 0..=100 {
            let v = e.cutoff(1.25 + 0.0025 * k as f64);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn seam_is_c_m() {
        // one-sided m-th differences agree up to O(h)
        let g = Grid::new(40).unwrap();
        let u = profile(&g);
        for (d, m) in [(5u32, 3usize), (5, 2), (7, 4), (7, 3)] {
            let e = extend_profile(d, m, &g, &u).unwrap();
            let mut errs = Vec::new();
            for h in [2e-2, 1e-2] {
                let fd = |sign: f64| -> f64 {
                    (0..=m)
                        .map(|k| {
                            let c = binomial(m, k) * if (m - k) % 2 == 0 { 1.0 } else { -1.0 };
                            c * e.eval(1.0 + sign * k as f64 * h)
                        })
                        .sum::<f64>()
                        / h.powi(m as i32)
                        * sign.powi(m as i32)
                };
                errs.push((fd(1.0) - fd(-1.0)).abs());
            }
            // first-order convergence of the mismatch
            assert!(errs[1] < 0.6 * errs[0] + 1e-6, "{d} {m} {errs:?}");
        }
    }

    #[test]
    fn extension_bound_two_sided() {
        let g = Grid::new(32).unwrap();
        let u = profile(&g);
        for m in [2usize, 3] {
            let r = extension_bound(5, m, &g, &u).unwrap();
            assert!(r.extended >= r.ball);
            assert!(r.ratio().is_finite() && r.ratio() > 0.0);
        }
    }
}
