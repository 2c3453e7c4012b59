//! Spectrum of the linearized generator: hypergeometric connection
//! coefficients on one side, refined matrix eigenvalues on the other.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linop::{assemble_generator, GeneratorMatrix};
use crate::model::ModelParams;
use crate::special::{gamma, hyp2f1, nonpositive_integer, rgamma};

/// Parameters of the hypergeometric equation obeyed by `v(z) = w(sqrt z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypergeometricParams {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
}

impl HypergeometricParams {
    pub fn new(lambda: Complex64, p: f64) -> Self {
        Self {
            a: (lambda - 2.0) / 2.0,
            b: (lambda + (p + 3.0) / (p - 1.0)) / 2.0,
            c: Complex64::new(0.5, 0.0),
        }
    }
}

/// `c0 = Gamma(a+b+1-c) Gamma(1-c) / (Gamma(a+1-c) Gamma(b+1-c))`.
///
/// A pole of the numerator is reported as an infinite value.
pub fn connection_coeff(lambda: Complex64, params: &ModelParams) -> Complex64 {
    let h = HypergeometricParams::new(lambda, params.p);
    let one = Complex64::new(1.0, 0.0);
    let top = h.a + h.b + one - h.c;
    if nonpositive_integer(top).is_some() || nonpositive_integer(one - h.c).is_some() {
        return Complex64::new(f64::INFINITY, 0.0);
    }
    gamma(top) * gamma(one - h.c) * rgamma(h.a + one - h.c) * rgamma(h.b + one - h.c)
}

/// Newton iteration on `c0` from `start`, with a centered-difference derivative.
pub fn polish_root(start: Complex64, params: &ModelParams) -> Result<Complex64> {
    let mut z = start;
    let h = 1e-6;
    for _ in 0..100 {
        let f = connection_coeff(z, params);
        if !f.is_finite() {
            return Err(Error::NotARoot { re: z.re, im: z.im });
        }
        if f.norm() == 0.0 {
            return Ok(z);
        }
        let df = (connection_coeff(z + h, params) - connection_coeff(z - h, params)) / (2.0 * h);
        let step = f / df;
        z -= step;
        if step.norm() < 1e-15 * z.norm().max(1.0) {
            return Ok(z);
        }
    }
    Err(Error::NotARoot { re: z.re, im: z.im })
}

/// `1 - 2k`, `k = 0..count`.
pub fn first_family(count: usize) -> Vec<f64> {
    (0..count).map(|k| 1.0 - 2.0 * k as f64).collect()
}

/// `-2k - 2p/(p-1) - 2/(p-1)`, `k = 0..count`.
pub fn second_family(p: f64, count: usize) -> Vec<f64> {
    let head = -2.0 * (p + 1.0) / (p - 1.0);
    (0..count).map(|k| head - 2.0 * k as f64).collect()
}

/// A complex number in serializable form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for Point {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<Point> for Complex64 {
    fn from(p: Point) -> Self {
        Complex64::new(p.re, p.im)
    }
}

/// One refined eigenvalue of the discrete generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatrixEigenvalue {
    pub value: Point,
    /// Whether it moves by at most the persistence tolerance under refinement.
    pub persistent: bool,
    /// `||B v - lambda v|| / ||v||` of the refined eigenpair.
    pub residual: f64,
    /// Largest displacement observed across the refinements.
    pub drift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchedPair {
    pub matrix: Point,
    pub analytic: Point,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub d: u32,
    pub p: f64,
    /// `max{-2/(p-1), -1}`.
    pub threshold: f64,
    pub analytic_unstable: Vec<Point>,
    pub analytic_stable_heads: Vec<Point>,
    /// Refined eigenvalues with `Re > window`, sorted by decreasing real part.
    pub matrix_eigs: Vec<MatrixEigenvalue>,
    /// Unrefined eigenvalues to the left of the window, reported only.
    pub cloud: Vec<Point>,
    pub window: f64,
    pub matched: Vec<MatchedPair>,
    pub match_tolerance: f64,
    pub resolutions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumEntry {
    pub re: f64,
    pub im: f64,
    pub source: &'static str,
    pub persistent: bool,
    pub matched_to: Option<Point>,
}

impl SpectrumReport {
    /// Rightmost persistent matrix eigenvalue.
    pub fn rightmost(&self) -> Option<Point> {
        self.matrix_eigs.iter().find(|e| e.persistent).map(|e| e.value)
    }

    pub fn persistent(&self) -> impl Iterator<Item = &MatrixEigenvalue> {
        self.matrix_eigs.iter().filter(|e| e.persistent)
    }

    /// Flat list of analytic and matrix points for export.
    pub fn entries(&self) -> Vec<SpectrumEntry> {
        let analytic = self
            .analytic_unstable
            .iter()
            .chain(&self.analytic_stable_heads)
            .map(|p| SpectrumEntry {
                re: p.re,
                im: p.im,
                source: "analytic",
                persistent: true,
                matched_to: None,
            });
        let matrix = self.matrix_eigs.iter().map(|e| SpectrumEntry {
            re: e.value.re,
            im: e.value.im,
            source: "matrix",
            persistent: e.persistent,
            matched_to: self
                .matched
                .iter()
                .find(|m| m.matrix == e.value)
                .map(|m| m.analytic),
        });
        analytic.chain(matrix).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Export<'a> {
            d: u32,
            p: f64,
            threshold: f64,
            rightmost: Option<Point>,
            resolutions: &'a [usize],
            eigenvalues: Vec<SpectrumEntry>,
            cloud: &'a [Point],
        }
        serde_json::to_string_pretty(&Export {
            d: self.d,
            p: self.p,
            threshold: self.threshold,
            rightmost: self.rightmost(),
            resolutions: &self.resolutions,
            eigenvalues: self.entries(),
            cloud: &self.cloud,
        })
        .map_err(|e| Error::Io(e.to_string()))
    }
}

/// Both root families, classified against `max{-2/(p-1), -1}`.
pub fn analytic_spectrum(params: &ModelParams, count: usize) -> SpectrumReport {
    let threshold = params.spectral_threshold;
    let mut unstable = Vec::new();
    let mut heads = Vec::new();
    let mut all: Vec<f64> = first_family(count);
    all.extend(second_family(params.p, count));
    for l in all {
        let z = Point { re: l, im: 0.0 };
        if l > threshold {
            unstable.push(z);
        } else {
            heads.push(z);
        }
    }
    heads.sort_by(|a, b| b.re.total_cmp(&a.re));
    SpectrumReport {
        d: params.d,
        p: params.p,
        threshold,
        analytic_unstable: unstable,
        analytic_stable_heads: heads,
        matrix_eigs: Vec::new(),
        cloud: Vec::new(),
        window: threshold - 0.5,
        matched: Vec::new(),
        match_tolerance: MATCH_TOLERANCE,
        resolutions: Vec::new(),
    }
}

/// Whether `lambda` lies on one of the root families.
fn on_family(lambda: Complex64, p: f64) -> bool {
    if lambda.im.abs() > 1e-8 {
        return false;
    }
    let first = (1.0 - lambda.re) / 2.0;
    let second = (-2.0 * (p + 1.0) / (p - 1.0) - lambda.re) / 2.0;
    [first, second]
        .iter()
        .any(|k| *k > -1e-8 && (k - k.round()).abs() < 1e-8)
}

/// `w(rho) = rho 2F1(a+1-c, b+1-c; 2-c; rho^2)`, the branch regular at the center.
pub fn eigenfunction_profile(
    lambda: Complex64,
    params: &ModelParams,
    grid: &Grid,
) -> Result<DVector<f64>> {
    let c0 = connection_coeff(lambda, params);
    if !(on_family(lambda, params.p) || c0.norm() < 1e-8) {
        return Err(Error::NotARoot {
            re: lambda.re,
            im: lambda.im,
        });
    }
    let h = HypergeometricParams::new(lambda, params.p);
    let one = Complex64::new(1.0, 0.0);
    let mut out = DVector::zeros(grid.size());
    for (i, &r) in grid.nodes().iter().enumerate() {
        let f = hyp2f1(h.a + one - h.c, h.b + one - h.c, 2.0 * one - h.c, r * r)?;
        out[i] = r * f.re;
    }
    Ok(out)
}

/// Residual of `-(1-rho^2) w'' + 2 rho (lambda + 2/(p-1)) w' +
/// (lambda + 2/(p-1) - 1)(lambda + 2/(p-1)) w - p c_p^{p-1} w`.
pub fn eigenvalue_ode_residual(
    lambda: f64,
    params: &ModelParams,
    grid: &Grid,
    w: &DVector<f64>,
) -> DVector<f64> {
    let s = lambda + params.weight1();
    let dw = grid.derivative(w, 1);
    let ddw = grid.derivative(w, 2);
    DVector::from_fn(grid.size(), |i, _| {
        let r = grid.nodes()[i];
        -(1.0 - r * r) * ddw[i] + 2.0 * r * s * dw[i] + ((s - 1.0) * s - params.potential()) * w[i]
    })
}

/// Persistent eigenvalues move at most this much under refinement.
pub const PERSISTENCE_TOLERANCE: f64 = 1e-4;
/// Matrix and analytic values closer than this are matched.
pub const MATCH_TOLERANCE: f64 = 1e-4;

/// Inverse iteration from `start` with a right Rayleigh quotient; a shift is
/// accepted only while it lowers the eigenpair residual. Returns the
/// eigenvalue and the relative residual `||B v - lambda v|| / ||v||`.
pub fn refine_eigenvalue(b: &DMatrix<f64>, start: Complex64) -> (Complex64, f64) {
    let n = b.nrows();
    let bc: DMatrix<Complex64> = b.map(|x| Complex64::new(x, 0.0));
    let residual = |lambda: Complex64, v: &DVector<Complex64>| -> f64 {
        (&bc * v - v * lambda).norm() / v.norm()
    };
    let mut v = DVector::from_fn(n, |i, _| Complex64::new(1.0 + 0.1 * (i as f64).sin(), 0.0));
    let mut lambda = start;
    let mut best = f64::INFINITY;
    for _ in 0..8 {
        let lu = (&bc - DMatrix::from_diagonal_element(n, n, lambda)).lu();
        let mut w = v.clone();
        for _ in 0..3 {
            match lu.solve(&w) {
                Some(x) if x.iter().all(|z| z.is_finite()) && x.norm() > 0.0 => {
                    w = &x / Complex64::new(x.norm(), 0.0);
                }
                _ => break,
            }
        }
        let here = residual(lambda, &w);
        if here < best {
            best = here;
            v = w;
        } else {
            break;
        }
        let next = v.dotc(&(&bc * &v)) / v.dotc(&v);
        let there = residual(next, &v);
        if !(there < best) {
            break;
        }
        let moved = (next - lambda).norm();
        lambda = next;
        best = there;
        if moved <= 1e-15 * lambda.norm().max(1.0) {
            break;
        }
    }
    (lambda, best)
}

/// Raw eigenvalues of the reduced generator.
pub fn raw_eigenvalues(gen: &GeneratorMatrix) -> Result<Vec<Complex64>> {
    let ev = gen
        .reduced()
        .clone()
        .try_schur(1e-15, 100_000)
        .ok_or_else(|| Error::EigenSolver("Schur iteration did not converge".into()))?
        .complex_eigenvalues();
    let mut out: Vec<Complex64> = ev.iter().copied().collect();
    if out.iter().any(|z| !z.is_finite()) {
        return Err(Error::EigenSolver("non-finite eigenvalue".into()));
    }
    out.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(out)
}

/// Matrix spectrum of `gen` with persistence under the listed refinements
/// (default `[2N]`) and matching against the analytic families.
pub fn matrix_spectrum(gen: &GeneratorMatrix, refinements: &[usize]) -> Result<SpectrumReport> {
    let params = gen.params;
    let mut report = analytic_spectrum(&params, 8);
    let window = report.window;
    let base = gen.grid.degree();
    let refinements: Vec<usize> = if refinements.is_empty() {
        vec![2 * base]
    } else {
        refinements.to_vec()
    };
    let finer: Vec<GeneratorMatrix> = refinements
        .iter()
        .map(|&n| Grid::new(n).map(|g| assemble_generator(&params, &g, gen.include_perturbation)))
        .collect::<Result<_>>()?;

    let raw = raw_eigenvalues(gen)?;
    let mut eigs: Vec<MatrixEigenvalue> = Vec::new();
    for z in raw {
        if z.re <= window {
            report.cloud.push(z.into());
            continue;
        }
        let (lambda, residual) = refine_eigenvalue(gen.reduced(), z);
        if eigs
            .iter()
            .any(|e| (Complex64::from(e.value) - lambda).norm() < 1e-9 * lambda.norm().max(1.0))
        {
            continue;
        }
        let drift = finer
            .iter()
            .map(|f| (refine_eigenvalue(f.reduced(), lambda).0 - lambda).norm())
            .fold(0.0, f64::max);
        eigs.push(MatrixEigenvalue {
            value: lambda.into(),
            persistent: drift <= PERSISTENCE_TOLERANCE,
            residual,
            drift,
        });
    }
    eigs.sort_by(|a, b| b.value.re.total_cmp(&a.value.re).then(b.value.im.total_cmp(&a.value.im)));

    let analytic: Vec<Point> = report
        .analytic_unstable
        .iter()
        .chain(&report.analytic_stable_heads)
        .copied()
        .collect();
    for e in eigs.iter().filter(|e| e.persistent) {
        let z = Complex64::from(e.value);
        if let Some((a, dist)) = analytic
            .iter()
            .map(|a| (*a, (Complex64::from(*a) - z).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
        {
            if dist <= MATCH_TOLERANCE {
                report.matched.push(MatchedPair {
                    matrix: e.value,
                    analytic: a,
                    distance: dist,
                });
            }
        }
    }
    report.matrix_eigs = eigs;
    report.resolutions = std::iter::once(base).chain(refinements).collect();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_params;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn consistency_identity() {
        for (re, im, p) in [(0.3, 0.7, 3.0), (-2.1, 4.0, 5.0), (1.5, -0.2, 2.2)] {
            let lambda = Complex64::new(re, im);
            let h = HypergeometricParams::new(lambda, p);
            let lhs = h.a + h.b + 1.0 - h.c;
            let rhs = lambda + 2.0 / (p - 1.0);
            assert!((lhs - rhs).norm() < 1e-14);
        }
    }

    #[test]
    fn connection_coefficient_roots() {
        let p3 = make_params(5, 3.0, 0.05).unwrap();
        assert_eq!(connection_coeff(c(1.0), &p3), c(0.0));
        // numerator pole at lambda = -1 when p = 3
        assert!(connection_coeff(c(-1.0), &p3).re.is_infinite());
        let p5 = make_params(7, 5.0, 0.05).unwrap();
        assert_eq!(connection_coeff(c(-1.0), &p5), c(0.0));
        // mpmath reference at lambda = 0.5, p = 3
        let v = connection_coeff(c(0.5), &p3);
        assert_abs_diff_eq!(v.re, -0.28284271247461900976, epsilon = 1e-12);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn newton_lands_on_families() {
        let p5 = make_params(7, 5.0, 0.05).unwrap();
        for (start, root) in [(1.03, 1.0), (-0.97, -1.0), (-3.02, -3.0)] {
            let z = polish_root(c(start), &p5).unwrap();
            assert_abs_diff_eq!(z.re, root, epsilon = 1e-10);
        }
    }

    #[test]
    fn analytic_families() {
        let p3 = make_params(5, 3.0, 0.05).unwrap();
        assert_eq!(first_family(4), vec![1.0, -1.0, -3.0, -5.0]);
        assert_eq!(second_family(3.0, 3), vec![-4.0, -6.0, -8.0]);
        assert_eq!(second_family(5.0, 1), vec![-3.0]);
        let r = analytic_spectrum(&p3, 4);
        assert_eq!(r.analytic_unstable, vec![Point { re: 1.0, im: 0.0 }]);
        assert_eq!(r.threshold, -1.0);
        assert_eq!(analytic_spectrum(&make_params(7, 5.0, 0.05).unwrap(), 2).threshold, -0.5);
    }

    #[test]
    fn eigenfunctions() {
        let p3 = make_params(5, 3.0, 0.05).unwrap();
        let g = Grid::new(32).unwrap();
        let w = eigenfunction_profile(c(1.0), &p3, &g).unwrap();
        for (a, r) in w.iter().zip(g.nodes().iter()) {
            assert_abs_diff_eq!(*a, *r, epsilon = 1e-15);
        }
        let w = eigenfunction_profile(c(-1.0), &p3, &g).unwrap();
        assert_eq!(w[0], 0.0);
        assert!(eigenvalue_ode_residual(-1.0, &p3, &g, &w).amax() < 1e-8);
        assert!(matches!(
            eigenfunction_profile(c(0.3), &p3, &g),
            Err(Error::NotARoot { .. })
        ));
        let p5 = make_params(7, 5.0, 0.05).unwrap();
        for lambda in [1.0, -1.0, -3.0, -5.0] {
            let w = eigenfunction_profile(c(lambda), &p5, &g).unwrap();
            assert_eq!(w[0], 0.0);
            assert!(eigenvalue_ode_residual(lambda, &p5, &g, &w).amax() < 1e-8 * w.amax());
        }
    }

    #[test]
    fn symmetry_eigenvalue_refines_to_one() {
        let p3 = make_params(5, 3.0, 0.05).unwrap();
        let gen = assemble_generator(&p3, &Grid::new(32).unwrap(), true);
        let (l, res) = refine_eigenvalue(gen.reduced(), c(1.01));
        assert_abs_diff_eq!(l.re, 1.0, epsilon = 1e-10);
        assert!(res < 1e-8);
    }
}
