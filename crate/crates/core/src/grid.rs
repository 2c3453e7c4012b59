//! Chebyshev–Gauss–Lobatto collocation on the unit interval `[0, 1]`.
//!
//! Nodes are `rho_k = (1 - cos(pi k / N)) / 2 = sin^2(pi k / 2N)`, ordered from
//! the center `rho = 0` to the lightcone `rho = 1`. The grid carries first and
//! second spectral differentiation matrices, Clenshaw–Curtis weights, an
//! antiderivative matrix and barycentric interpolation weights.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Smallest admissible polynomial degree for a collocation grid.
pub const MIN_DEGREE: usize = 8;

/// Chebyshev–Lobatto nodes mapped to `[0, 1]`, without any size restriction.
pub fn chebyshev_nodes(n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![0.0];
    }
    (0..=n)
        .map(|k| {
            let s = (PI * k as f64 / (2.0 * n as f64)).sin();
            s * s
        })
        .collect()
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..(m + 1) / 2 {
        // Tricomi initial guess, then Newton on P_m.
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1, 1] -> [0, 1]
        nodes[i] = (1.0 - x) / 2.0;
        nodes[m - 1 - i] = (1.0 + x) / 2.0;
        weights[i] = w / 2.0;
        weights[m - 1 - i] = w / 2.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Barycentric evaluation of the interpolant through `(nodes, values)`.
///
/// Returns the node value exactly when `x` coincides with a node.
pub fn barycentric_eval(nodes: &[f64], weights: &[f64], values: &[f64], x: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&xj, &wj), &fj) in nodes.iter().zip(weights).zip(values) {
        let diff = x - xj;
        if diff == 0.0 {
            return fj;
        }
        let t = wj / diff;
        num += t * fj;
        den += t;
    }
    num / den
}

/// Barycentric weights for arbitrary distinct nodes, rescaled to unit maximum.
pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    // Accumulate log-magnitudes to stay clear of overflow for large node sets.
    let n = nodes.len();
    let mut logs = vec![0.0; n];
    let mut signs = vec![1.0; n];
    for j in 0..n {
        for k in 0..n {
            if k != j {
                let diff = nodes[j] - nodes[k];
                logs[j] -= diff.abs().ln();
                if diff < 0.0 {
                    signs[j] = -signs[j];
                }
            }
        }
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    logs.iter()
        .zip(&signs)
        .map(|(l, s)| s * (l - top).exp())
        .collect()
}

/// Floater-Hormann weights of blending degree `blend` for arbitrary distinct nodes.
///
/// The rational interpolant has no poles on the real line and stays well
/// conditioned on equispaced data; `blend = nodes.len() - 1` gives the
/// polynomial interpolant.
pub fn floater_hormann_weights(nodes: &[f64], blend: usize) -> Vec<f64> {
    let n = nodes.len().saturating_sub(1);
    let d = blend.min(n);
    let mut w = vec![0.0; n + 1];
    for (k, wk) in w.iter_mut().enumerate() {
        let lo = k.saturating_sub(d);
        let hi = k.min(n - d);
        let mut sum = 0.0;
        for i in lo..=hi {
            let prod: f64 = (i..=i + d)
                .filter(|&j| j != k)
                .map(|j| 1.0 / (nodes[k] - nodes[j]).abs())
                .product();
            sum += prod;
        }
        let sign = if (k + d) % 2 == 0 { 1.0 } else { -1.0 };
        *wk = sign * sum;
    }
    let top = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if top > 0.0 {
        w.iter_mut().for_each(|x| *x /= top);
    }
    w
}

/// Collocation grid on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Grid {
    nodes: DVector<f64>,
    diff1: DMatrix<f64>,
    diff2: DMatrix<f64>,
    quad_weights: DVector<f64>,
    bary: Vec<f64>,
    antiderivative: DMatrix<f64>,
}

/// Builds the degree-`n` grid (`n + 1` nodes).
pub fn build_grid(n: usize) -> Result<Grid> {
    Grid::new(n)
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_DEGREE {
            return Err(Error::GridTooSmall { n, min: MIN_DEGREE });
        }
        let nodes = chebyshev_nodes(n);
        let size = n + 1;
        let theta = |k: usize| PI * k as f64 / (2.0 * n as f64);

        let bary: Vec<f64> = (0..size)
            .map(|k| {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                if k == 0 || k == n {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();

        let mut diff1 = DMatrix::<f64>::zeros(size, size);
        for i in 0..size {
            let mut row_sum = 0.0;
            for j in 0..size {
                if i == j {
                    continue;
                }
                // rho_i - rho_j = sin(t_i + t_j) sin(t_i - t_j), t_k = pi k / 2N
                let diff = (theta(i) + theta(j)).sin() * (theta(i) - theta(j)).sin();
                let v = (bary[j] / bary[i]) / diff;
                diff1[(i, j)] = v;
                row_sum += v;
            }
            diff1[(i, i)] = -row_sum;
        }
        let mut diff2 = &diff1 * &diff1;
        annihilate_constants(&mut diff2);

        let quad_weights = DVector::from_vec(clenshaw_curtis(n));
        let antiderivative = antiderivative_matrix(&nodes, &bary);

        Ok(Self {
            nodes: DVector::from_vec(nodes),
            diff1,
            diff2,
            quad_weights,
            bary,
            antiderivative,
        })
    }

    /// Polynomial degree `N`.
    pub fn degree(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Number of nodes, `N + 1`.
    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &DVector<f64> {
        &self.nodes
    }

    pub fn diff1(&self) -> &DMatrix<f64> {
        &self.diff1
    }

    pub fn diff2(&self) -> &DMatrix<f64> {
        &self.diff2
    }

    pub fn quad_weights(&self) -> &DVector<f64> {
        &self.quad_weights
    }

    pub fn barycentric(&self) -> &[f64] {
        &self.bary
    }

    /// Matrix mapping samples of `f` to samples of `int_0^rho f`.
    pub fn antiderivative(&self) -> &DMatrix<f64> {
        &self.antiderivative
    }

    /// Smallest spacing between consecutive nodes.
    pub fn min_spacing(&self) -> f64 {
        self.nodes
            .as_slice()
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Samples a function at the nodes.
    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> DVector<f64> {
        self.nodes.map(f)
    }

    /// `order`-th spectral derivative of grid samples.
    pub fn derivative(&self, values: &DVector<f64>, order: usize) -> DVector<f64> {
        let mut out = values.clone();
        for _ in 0..order / 2 {
            out = &self.diff2 * out;
        }
        if order % 2 == 1 {
            out = &self.diff1 * out;
        }
        out
    }

    /// Matrix of the `order`-th derivative; rows sum to zero exactly for `order >= 1`.
    pub fn diff_power(&self, order: usize) -> DMatrix<f64> {
        match order {
            0 => DMatrix::identity(self.size(), self.size()),
            1 => self.diff1.clone(),
            2 => self.diff2.clone(),
            _ => {
                let mut m = &self.diff1 * self.diff_power(order - 1);
                annihilate_constants(&mut m);
                m
            }
        }
    }

    /// Clenshaw–Curtis integral over `[0, 1]`.
    pub fn integrate(&self, values: &DVector<f64>) -> f64 {
        self.quad_weights.dot(values)
    }

    /// Discrete `L^2(0, 1)` norm.
    pub fn l2_norm(&self, values: &DVector<f64>) -> f64 {
        self.quad_weights
            .iter()
            .zip(values.iter())
            .map(|(w, v)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn check_len(&self, values: &DVector<f64>) -> Result<()> {
        if values.len() != self.size() {
            return Err(Error::SizeMismatch {
                expected: self.size(),
                actual: values.len(),
            });
        }
        Ok(())
    }

    /// Barycentric interpolant of grid samples evaluated at `x` in `[0, 1]`.
    pub fn interpolate(&self, values: &DVector<f64>, x: f64) -> Result<f64> {
        self.check_len(values)?;
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfRange(x));
        }
        Ok(barycentric_eval(
            self.nodes.as_slice(),
            &self.bary,
            values.as_slice(),
            x,
        ))
    }

    /// Lagrange cardinal functions of the grid evaluated at `x`.
    pub fn cardinal_row(&self, x: f64) -> Vec<f64> {
        cardinal_row(self.nodes.as_slice(), &self.bary, x)
    }
}

/// Free-function form of [`Grid::interpolate`].
pub fn interpolate(grid: &Grid, values: &DVector<f64>, x: f64) -> Result<f64> {
    grid.interpolate(values, x)
}

fn cardinal_row(nodes: &[f64], bary: &[f64], x: f64) -> Vec<f64> {
    if let Some(hit) = nodes.iter().position(|&xj| xj == x) {
        let mut row = vec![0.0; nodes.len()];
        row[hit] = 1.0;
        return row;
    }
    let terms: Vec<f64> = nodes
        .iter()
        .zip(bary)
        .map(|(&xj, &wj)| wj / (x - xj))
        .collect();
    let den: f64 = terms.iter().sum();
    terms.into_iter().map(|t| t / den).collect()
}

fn clenshaw_curtis(n: usize) -> Vec<f64> {
    // Trefethen's clencurt on [-1, 1], halved for [0, 1]. Node order is
    // symmetric so the reversal x -> rho does not matter.
    let nf = n as f64;
    let mut w = vec![0.0; n + 1];
    let inner = n - 1;
    let mut v = vec![1.0; inner];
    if n % 2 == 0 {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[n] = w[0];
        for k in 1..n / 2 {
            for (idx, vi) in v.iter_mut().enumerate() {
                let th = PI * (idx + 1) as f64 / nf;
                *vi -= 2.0 * (2.0 * k as f64 * th).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
        }
        for (idx, vi) in v.iter_mut().enumerate() {
            let th = PI * (idx + 1) as f64 / nf;
            *vi -= (nf * th).cos() / (nf * nf - 1.0);
        }
    } else {
        w[0] = 1.0 / (nf * nf);
        w[n] = w[0];
        for k in 1..=(n - 1) / 2 {
            for (idx, vi) in v.iter_mut().enumerate() {
                let th = PI * (idx + 1) as f64 / nf;
                *vi -= 2.0 * (2.0 * k as f64 * th).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
        }
    }
    for (idx, vi) in v.iter().enumerate() {
        w[idx + 1] = 2.0 * vi / nf;
    }
    w.iter().map(|x| 0.5 * x).collect()
}

fn antiderivative_matrix(nodes: &[f64], bary: &[f64]) -> DMatrix<f64> {
    let size = nodes.len();
    let (gx, gw) = gauss_legendre(size / 2 + 2);
    let mut s = DMatrix::<f64>::zeros(size, size);
    for (i, &rho) in nodes.iter().enumerate() {
        if rho == 0.0 {
            continue;
        }
        for (&t, &w) in gx.iter().zip(&gw) {
            let row = cardinal_row(nodes, bary, rho * t);
            for (j, lj) in row.into_iter().enumerate() {
                s[(i, j)] += rho * w * lj;
            }
        }
    }
    s
}

/// Radial samples `(r, u, u_t)` ingested from an external source.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledProfile {
    pub radii: Vec<f64>,
    pub values1: Vec<f64>,
    pub values2: Vec<f64>,
    pub max_radius: f64,
}

impl SampledProfile {
    pub fn new(radii: Vec<f64>, values1: Vec<f64>, values2: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::EmptyProfile);
        }
        for (name, len) in [("u", values1.len()), ("ut", values2.len())] {
            if len != radii.len() {
                return Err(Error::Parse {
                    row: len.min(radii.len()),
                    message: format!("column {name} has {len} entries, r has {}", radii.len()),
                });
            }
        }
        if radii[0] < 0.0 {
            return Err(Error::Parse {
                row: 0,
                message: "negative radius".into(),
            });
        }
        if let Some(row) = radii.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotoneRadii { row: row + 1 });
        }
        let max_radius = *radii.last().unwrap();
        Ok(Self {
            radii,
            values1,
            values2,
            max_radius,
        })
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    /// Writes the profile as `r,u,ut` CSV with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,u,ut")?;
        for i in 0..self.len() {
            writeln!(out, "{},{},{}", self.radii[i], self.values1[i], self.values2[i])?;
        }
        Ok(())
    }

    pub fn write_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Parses `r,u,ut` CSV rows. A header line is optional.
pub fn ingest_profile<R: Read>(reader: R) -> Result<SampledProfile> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut radii = Vec::new();
    let mut u = Vec::new();
    let mut ut = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if record.len() != 3 {
            return Err(Error::Parse {
                row,
                message: format!("expected 3 columns, found {}", record.len()),
            });
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(vals) => {
                if vals.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Parse {
                        row,
                        message: "non-finite value".into(),
                    });
                }
                radii.push(vals[0]);
                u.push(vals[1]);
                ut.push(vals[2]);
            }
            Err(e) => {
                if row == 0 {
                    continue; // header
                }
                return Err(Error::Parse {
                    row,
                    message: e.to_string(),
                });
            }
        }
    }
    if radii.is_empty() {
        return Err(Error::EmptyProfile);
    }
    SampledProfile::new(radii, u, ut)
}

pub fn ingest_profile_path<P: AsRef<Path>>(path: P) -> Result<SampledProfile> {
    let file = std::fs::File::open(path)?;
    ingest_profile(std::io::BufReader::new(file))
}

/// Resets the diagonal so each row sums to zero.
fn annihilate_constants(m: &mut DMatrix<f64>) {
    for i in 0..m.nrows() {
        m[(i, i)] = 0.0;
        let off: f64 = m.row(i).sum();
        m[(i, i)] = -off;
    }
}
