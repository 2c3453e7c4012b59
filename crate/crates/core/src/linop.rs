//! The linearized similarity generator `L = L0 + L'`, its dissipativity and
//! resolvent, the rank-one projection onto the symmetry mode, and linear
//! propagation with decay-rate fitting.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{symmetry_mode, ModelParams, StatePair};
use crate::reduction::{dilation_matrix, laplacian_matrix, NormOps, ReductionOps};

/// Largest admissible `dt / min_spacing` for the explicit RK4 march.
pub const MAX_DT_FACTOR: f64 = 1.0;
/// Default `dt / min_spacing`.
pub const DEFAULT_DT_FACTOR: f64 = 0.5;
/// Spacing of recorded trace samples in `tau`.
pub const DEFAULT_SAMPLE_INTERVAL: f64 = 0.05;

/// Discretized generator on the collocation grid.
///
/// The state is `(u1, u2)` stacked. The center value of each component is
/// slaved to the interior ones by the regularity condition `u'(0) = 0`, so
/// the dynamics live on the `2N` interior values; there is no row at the
/// outflow boundary `rho = 1` to replace.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    pub params: ModelParams,
    pub grid: Grid,
    pub include_perturbation: bool,
    /// Rows of [`GeneratorMatrix::matrix`] given by the regularity constraint.
    pub boundary_rows: [usize; 2],
    matrix: DMatrix<f64>,
    reduced: DMatrix<f64>,
    /// `u(0) = sum_j center[j] u(rho_j)`, `j >= 1`.
    center: DVector<f64>,
}

pub fn assemble_generator(
    params: &ModelParams,
    grid: &Grid,
    include_perturbation: bool,
) -> GeneratorMatrix {
    let n = grid.size();
    let mut full = DMatrix::<f64>::zeros(2 * n, 2 * n);
    let lambda = dilation_matrix(grid);
    let lap = laplacian_matrix(grid, params.d);
    let id = DMatrix::<f64>::identity(n, n);
    full.view_mut((0, 0), (n, n))
        .copy_from(&(&lambda - &id * params.weight1()));
    full.view_mut((0, n), (n, n)).copy_from(&id);
    let mut lower_left = lap;
    if include_perturbation {
        lower_left += &id * params.potential();
    }
    full.view_mut((n, 0), (n, n)).copy_from(&lower_left);
    full.view_mut((n, n), (n, n))
        .copy_from(&(&lambda - &id * params.weight2()));

    let d1 = grid.diff1();
    let mut center = DVector::zeros(n);
    for j in 1..n {
        center[j] = -d1[(0, j)] / d1[(0, 0)];
    }
    let lift = lift_matrix(&center);
    let restrict = restrict_matrix(n);
    let reduced = &restrict * &full * &lift;
    let matrix = &lift * &reduced * &restrict;
    GeneratorMatrix {
        params: *params,
        grid: grid.clone(),
        include_perturbation,
        boundary_rows: [0, n],
        matrix,
        reduced,
        center,
    }
}

fn lift_matrix(center: &DVector<f64>) -> DMatrix<f64> {
    let n = center.len();
    let mut c = DMatrix::zeros(2 * n, 2 * (n - 1));
    for block in 0..2 {
        for j in 1..n {
            c[(block * n, block * (n - 1) + j - 1)] = center[j];
            c[(block * n + j, block * (n - 1) + j - 1)] = 1.0;
        }
    }
    c
}

fn restrict_matrix(n: usize) -> DMatrix<f64> {
    let mut r = DMatrix::zeros(2 * (n - 1), 2 * n);
    for block in 0..2 {
        for j in 1..n {
            r[(block * (n - 1) + j - 1, block * n + j)] = 1.0;
        }
    }
    r
}

impl GeneratorMatrix {
    /// Full `2(N+1) x 2(N+1)` matrix; the center rows follow the constraint.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// The `2N x 2N` matrix acting on interior values.
    pub fn reduced(&self) -> &DMatrix<f64> {
        &self.reduced
    }

    pub fn size(&self) -> usize {
        self.grid.size()
    }

    pub fn apply(&self, u: &StatePair) -> StatePair {
        StatePair::from_stacked(&(&self.matrix * u.stacked()))
    }

    /// Interior values `(u1(rho_1..), u2(rho_1..))`.
    pub fn restrict(&self, u: &StatePair) -> DVector<f64> {
        let n = self.size();
        DVector::from_iterator(
            2 * (n - 1),
            u.first.iter().skip(1).chain(u.second.iter().skip(1)).copied(),
        )
    }

    /// Rebuilds a full state from interior values.
    pub fn lift(&self, y: &DVector<f64>) -> StatePair {
        let m = self.size() - 1;
        let component = |offset: usize| {
            let inner = y.rows(offset, m);
            let c = self.center.rows(1, m).dot(&inner);
            DVector::from_iterator(m + 1, std::iter::once(c).chain(inner.iter().copied()))
        };
        StatePair {
            first: component(0),
            second: component(m),
        }
    }
}

/// `L0 u` by direct application of the differential operators, without constraint rows.
pub fn apply_free_operator(params: &ModelParams, grid: &Grid, u: &StatePair) -> StatePair {
    let lambda = dilation_matrix(grid);
    let lap = laplacian_matrix(grid, params.d);
    StatePair {
        first: &u.second + &lambda * &u.first - &u.first * params.weight1(),
        second: &lap * &u.first + &lambda * &u.second - &u.second * params.weight2(),
    }
}

/// Evaluates `Re(L0 u | u)_D + 2/(p-1) ||u||_D^2` for many states on one grid.
#[derive(Debug, Clone)]
pub struct Dissipativity {
    params: ModelParams,
    grid: Grid,
    norms: NormOps,
}

impl Dissipativity {
    pub fn new(params: &ModelParams, grid: &Grid) -> Result<Self> {
        Ok(Self {
            params: *params,
            grid: grid.clone(),
            norms: NormOps::new(params.d, grid)?,
        })
    }

    pub fn norms(&self) -> &NormOps {
        &self.norms
    }

    pub fn residual(&self, state: &StatePair) -> Result<f64> {
        self.grid.check_len(&state.first)?;
        self.grid.check_len(&state.second)?;
        let image = apply_free_operator(&self.params, &self.grid, state);
        let r = self.norms.d_inner(&image, state) + self.params.weight1() * self.norms.d_norm_sq(state);
        if !r.is_finite() {
            return Err(Error::NonFinite("dissipativity residual"));
        }
        Ok(r)
    }
}

pub fn dissipativity_residual(params: &ModelParams, grid: &Grid, state: &StatePair) -> Result<f64> {
    Dissipativity::new(params, grid)?.residual(state)
}

/// `mu = 1 - 2/(p-1)`, the spectral parameter of the explicit resolvent.
pub fn resolvent_mu(params: &ModelParams) -> f64 {
    1.0 - params.weight1()
}

/// `(mu - L0) u`; with `mu = 1 - 2/(p-1)` this is independent of `p`.
pub fn shifted_free_operator(d: u32, grid: &Grid, u: &StatePair) -> StatePair {
    let lambda = dilation_matrix(grid);
    let lap = laplacian_matrix(grid, d);
    StatePair {
        first: &u.first - &u.second - &lambda * &u.first,
        second: &u.second * 2.0 - &lap * &u.first - &lambda * &u.second,
    }
}

/// Solves `(mu - L0) u = f` at `mu = 1 - 2/(p-1)` through the reduced system.
pub fn resolvent_at_mu(d: u32, grid: &Grid, f: &StatePair) -> Result<StatePair> {
    grid.check_len(&f.first)?;
    grid.check_len(&f.second)?;
    if !f.is_finite() {
        return Err(Error::NonFinite("resolvent input"));
    }
    let ops = ReductionOps::new(d, grid)?;
    let df1 = ops.apply_d(&f.first);
    let df2 = ops.apply_d(&f.second);
    // F = D f2 + (rho D f1)', so its tail integral needs no derivative
    let prim = grid.antiderivative() * &df2;
    let last = grid.size() - 1;
    let f_end = df2[last] + df1[last] + (grid.diff1().row(last) * &df1)[0];
    let mut quotient = DVector::zeros(grid.size());
    for (i, &s) in grid.nodes().iter().enumerate() {
        quotient[i] = if i == last {
            f_end / 2.0
        } else {
            let tail = prim[last] - prim[i] + df1[last] - s * df1[i];
            tail / (1.0 - s * s)
        };
    }
    if !quotient.iter().all(|x| x.is_finite()) {
        return Err(Error::Quadrature("non-finite quotient".into()));
    }
    let w1 = grid.antiderivative() * &quotient;
    let w2 = quotient.component_mul(grid.nodes()) - &df1;
    Ok(StatePair {
        first: ops.apply_k(&w1),
        second: ops.apply_k(&w2),
    })
}

/// Rank-one projection onto the symmetry mode along the other eigenvectors.
#[derive(Debug, Clone)]
pub struct ProjectionData {
    pub right_mode: StatePair,
    /// Left eigenvector on full states (zero in the constraint rows).
    pub left_mode: DVector<f64>,
    /// `<left, right>`.
    pub normalization: f64,
    /// Rayleigh estimate of the eigenvalue, `<left, L g> / <left, g>`.
    pub eigenvalue: f64,
}

impl ProjectionData {
    /// Coefficient `c` of `P u = c g`.
    pub fn coefficient(&self, u: &StatePair) -> f64 {
        self.left_mode.dot(&u.stacked()) / self.normalization
    }

    pub fn project(&self, u: &StatePair) -> StatePair {
        self.right_mode.scaled(self.coefficient(u))
    }

    /// `(1 - P) u`.
    pub fn complement(&self, u: &StatePair) -> StatePair {
        u.sub(&self.project(u))
    }
}

/// Tolerance on `|lambda - 1|` for the discrete symmetry eigenvalue.
pub const EIGENVALUE_TOLERANCE: f64 = 1e-4;

pub fn spectral_projection(gen: &GeneratorMatrix) -> Result<ProjectionData> {
    let g = symmetry_mode(&gen.params, &gen.grid);
    let gr = gen.restrict(&g);
    let image = gen.reduced() * &gr;
    let found = image.dot(&gr) / gr.dot(&gr);
    let residual = (&image - &gr).norm() / gr.norm();
    if residual > EIGENVALUE_TOLERANCE {
        return Err(Error::EigenvalueNotFound {
            found,
            tolerance: EIGENVALUE_TOLERANCE,
        });
    }
    // bordered system [B^T - 1, g; g^T, 0] (l, s) = (0, 1)
    let m = gr.len();
    let mut bordered = DMatrix::<f64>::zeros(m + 1, m + 1);
    bordered
        .view_mut((0, 0), (m, m))
        .copy_from(&(gen.reduced().transpose() - DMatrix::<f64>::identity(m, m)));
    for i in 0..m {
        bordered[(i, m)] = gr[i];
        bordered[(m, i)] = gr[i];
    }
    let mut rhs = DVector::zeros(m + 1);
    rhs[m] = 1.0;
    let sol = bordered
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::EigenSolver("singular bordered system for the left mode".into()))?;
    let left_reduced = sol.rows(0, m).into_owned();
    let n = gen.size();
    let mut left_mode = DVector::zeros(2 * n);
    for j in 1..n {
        left_mode[j] = left_reduced[j - 1];
        left_mode[n + j] = left_reduced[n - 1 + j - 1];
    }
    let normalization = left_reduced.dot(&gr);
    let eigenvalue = left_reduced.dot(&image) / normalization;
    if !normalization.is_finite() || normalization == 0.0 {
        return Err(Error::NonFinite("projection normalization"));
    }
    Ok(ProjectionData {
        right_mode: g,
        left_mode,
        normalization,
        eigenvalue,
    })
}

/// Norm recorded along a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// `H^{m_d} x H^{m_d-1}`.
    #[default]
    Full,
    /// `H^{m_d-1} x H^{m_d-2}`.
    LowerRegularity,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceMeta {
    pub params: ModelParams,
    pub n: usize,
    pub dt: f64,
    /// Blowup time of a nonlinear run.
    pub blowup_time: Option<f64>,
    pub norm: NormKind,
    /// Set when the run stopped at the norm guard.
    pub aborted: bool,
}

/// Sampled norms and unstable coefficient of a propagated state.
#[derive(Debug, Clone, Serialize)]
pub struct EvolutionTrace {
    pub taus: Vec<f64>,
    pub full_norm: Vec<f64>,
    pub stable_norm: Vec<f64>,
    pub unstable_coeff: Vec<f64>,
    /// `||phi_1||` in `H^j-dot(B^d)` for `j = 0..=m_d`, one series per `j`.
    pub seminorms: Vec<Vec<f64>>,
    pub meta: TraceMeta,
    /// State at the last sample.
    #[serde(skip)]
    pub final_state: Option<StatePair>,
}

impl EvolutionTrace {
    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn max_norm(&self) -> f64 {
        self.full_norm.iter().fold(0.0, |a, &b| a.max(b))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "tau,full_norm,stable_norm,unstable_coeff")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.taus[i], self.full_norm[i], self.stable_norm[i], self.unstable_coeff[i]
            )?;
        }
        Ok(())
    }

    /// Writes `<stem>.csv` and the metadata sidecar `<stem>.json`.
    pub fn export<P: AsRef<Path>>(&self, dir: P, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        let file = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
        self.write_csv(std::io::BufWriter::new(file))?;
        let json = serde_json::to_string_pretty(&self.meta)
            .map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(dir.join(format!("{stem}.json")), json + "\n")?;
        Ok(())
    }
}

/// Settings of an RK4 march.
#[derive(Debug, Clone, Copy)]
pub struct MarchOptions {
    pub tau_end: f64,
    pub dt: f64,
    pub sample_interval: f64,
    pub norm: NormKind,
    /// Stop when the full norm exceeds this.
    pub guard: f64,
}

impl MarchOptions {
    pub fn new(tau_end: f64, dt: f64) -> Self {
        Self {
            tau_end,
            dt,
            sample_interval: DEFAULT_SAMPLE_INTERVAL,
            norm: NormKind::Full,
            guard: 1e8,
        }
    }
}

/// Default step `DEFAULT_DT_FACTOR * min_spacing`.
pub fn default_dt(grid: &Grid) -> f64 {
    DEFAULT_DT_FACTOR * grid.min_spacing()
}

pub(crate) fn check_step(grid: &Grid, dt: f64) -> Result<()> {
    let bound = MAX_DT_FACTOR * grid.min_spacing();
    if !(dt > 0.0 && dt <= bound) {
        return Err(Error::CflViolation { dt, bound });
    }
    Ok(())
}

/// RK4 march of `y' = rhs(y)` on interior values with sampling.
pub(crate) fn march<F>(
    gen: &GeneratorMatrix,
    proj: &ProjectionData,
    state0: &StatePair,
    opts: &MarchOptions,
    blowup_time: Option<f64>,
    mut rhs: F,
) -> Result<EvolutionTrace>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    check_step(&gen.grid, opts.dt)?;
    if !(opts.tau_end >= 0.0) || !(opts.sample_interval > 0.0) {
        return Err(Error::Config("tau_end and sample interval must be positive".into()));
    }
    let norms = NormOps::new(gen.params.d, &gen.grid)?;
    let measure = |u: &StatePair| -> f64 {
        match opts.norm {
            NormKind::Full => norms.sobolev_pair_sq(u).sqrt(),
            NormKind::LowerRegularity => norms.sobolev_lower_sq(u).sqrt(),
        }
    };
    let steps = (opts.tau_end / opts.dt).ceil() as usize;
    let dt = if steps > 0 { opts.tau_end / steps as f64 } else { opts.dt };
    let every = ((opts.sample_interval / dt).round() as usize).max(1);

    let mut trace = EvolutionTrace {
        taus: Vec::new(),
        full_norm: Vec::new(),
        stable_norm: Vec::new(),
        unstable_coeff: Vec::new(),
        seminorms: vec![Vec::new(); norms.m_d + 1],
        meta: TraceMeta {
            params: gen.params,
            n: gen.grid.degree(),
            dt,
            blowup_time,
            norm: opts.norm,
            aborted: false,
        },
        final_state: None,
    };
    let record = |tau: f64, y: &DVector<f64>, trace: &mut EvolutionTrace| -> f64 {
        let u = gen.lift(y);
        let full = measure(&u);
        trace.taus.push(tau);
        trace.full_norm.push(full);
        trace.stable_norm.push(measure(&proj.complement(&u)));
        trace.unstable_coeff.push(proj.coefficient(&u));
        for (j, series) in trace.seminorms.iter_mut().enumerate() {
            series.push(norms.homogeneous_sq(&u.first, j).sqrt());
        }
        trace.final_state = Some(u);
        full
    };

    let mut y = gen.restrict(state0);
    record(0.0, &y, &mut trace);
    for step in 1..=steps {
        let k1 = rhs(&y);
        let k2 = rhs(&(&y + &k1 * (dt / 2.0)));
        let k3 = rhs(&(&y + &k2 * (dt / 2.0)));
        let k4 = rhs(&(&y + &k3 * dt));
        y += (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0);
        if step % every == 0 || step == steps {
            let full = record(step as f64 * dt, &y, &mut trace);
            if !(full <= opts.guard) {
                trace.meta.aborted = true;
                break;
            }
        }
    }
    Ok(trace)
}

/// RK4 march of `d/dtau Phi = L Phi`.
pub fn linear_propagate(
    gen: &GeneratorMatrix,
    proj: &ProjectionData,
    state0: &StatePair,
    tau_end: f64,
    dt: f64,
) -> Result<EvolutionTrace> {
    linear_propagate_with(gen, proj, state0, &MarchOptions::new(tau_end, dt))
}

pub fn linear_propagate_with(
    gen: &GeneratorMatrix,
    proj: &ProjectionData,
    state0: &StatePair,
    opts: &MarchOptions,
) -> Result<EvolutionTrace> {
    gen.grid.check_len(&state0.first)?;
    gen.grid.check_len(&state0.second)?;
    let b = gen.reduced();
    march(gen, proj, state0, opts, None, |y| b * y)
}

/// `-slope` of the least-squares line through `(tau, log value)` in the window.
pub fn fit_rate(taus: &[f64], values: &[f64], window: (f64, f64)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = taus
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, v)| (*t, *v))
        .collect();
    if pts.len() < 10 {
        return Err(Error::DegenerateWindow(format!(
            "{} samples in [{}, {}], need 10",
            pts.len(),
            window.0,
            window.1
        )));
    }
    if pts.iter().any(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::DegenerateWindow("non-positive norm in window".into()));
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let ml = pts.iter().map(|p| p.1.ln()).sum::<f64>() / k;
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(sxy, sxx), (t, v)| {
        (sxy + (t - mt) * (v.ln() - ml), sxx + (t - mt) * (t - mt))
    });
    if sxx == 0.0 {
        return Err(Error::DegenerateWindow("window has zero width".into()));
    }
    Ok(-sxy / sxx)
}

/// Decay rate of the full norm over `window`.
pub fn fit_decay_rate(trace: &EvolutionTrace, window: (f64, f64)) -> Result<f64> {
    fit_rate(&trace.taus, &trace.full_norm, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;
    use crate::model::make_params;
    use approx::assert_abs_diff_eq;

    fn setup(d: i64, p: f64, n: usize) -> (ModelParams, Grid) {
        (make_params(d, p, 0.05).unwrap(), Grid::new(n).unwrap())
    }

    #[test]
    fn symmetry_mode_is_eigenvector() {
        let (params, g) = setup(5, 3.0, 64);
        let gen = assemble_generator(&params, &g, true);
        let s = symmetry_mode(&params, &g);
        let r = gen.apply(&s).sub(&s);
        assert!(r.max_abs() < 1e-8, "{}", r.max_abs());
        assert_eq!(gen.matrix().nrows(), 2 * 65);
        assert_eq!(gen.reduced().nrows(), 2 * 64);
    }

    #[test]
    fn free_generator_matches_pointwise_formula() {
        // u1 = 1 + 3 rho^2 - rho^4, u2 = 2 - rho^2 evaluated by hand
        let (params, g) = setup(5, 3.0, 16);
        let gen = assemble_generator(&params, &g, false);
        let u = StatePair {
            first: g.sample(|r| 1.0 + 3.0 * r * r - r.powi(4)),
            second: g.sample(|r| 2.0 - r * r),
        };
        let out = gen.apply(&u);
        let (w1, w2) = (params.weight1(), params.weight2());
        let d = params.d as f64;
        for (i, &r) in g.nodes().iter().enumerate() {
            let u1 = 1.0 + 3.0 * r * r - r.powi(4);
            let du1 = 6.0 * r - 4.0 * r.powi(3);
            let lap = (6.0 - 12.0 * r * r) + (d - 1.0) * (6.0 - 4.0 * r * r);
            let u2 = 2.0 - r * r;
            let du2 = -2.0 * r;
            // the center row goes through the regularity constraint
            let tol = if i == 0 { 1e-9 } else { 1e-10 };
            assert_abs_diff_eq!(out.first[i], u2 - r * du1 - w1 * u1, epsilon = tol);
            assert_abs_diff_eq!(out.second[i], lap - r * du2 - w2 * u2, epsilon = tol);
        }
        assert_eq!(gen.apply(&StatePair::zeros(g.size())).max_abs(), 0.0);
    }

    #[test]
    fn lift_inverts_restrict_on_even_states() {
        let (params, g) = setup(5, 3.0, 24);
        let gen = assemble_generator(&params, &g, true);
        let u = Corpus::new(2).even_pair(&g, 10);
        let back = gen.lift(&gen.restrict(&u));
        assert!(back.sub(&u).max_abs() < 1e-11);
    }

    #[test]
    fn dissipativity_matches_explicit_terms() {
        let (params, g) = setup(5, 3.0, 40);
        let diss = Dissipativity::new(&params, &g).unwrap();
        let mut corpus = Corpus::new(9);
        assert_eq!(diss.residual(&StatePair::zeros(g.size())).unwrap(), 0.0);
        for _ in 0..20 {
            let u = corpus.even_pair(&g, 14);
            let r = diss.residual(&u).unwrap();
            let norm = diss.norms().d_norm_sq(&u);
            assert!(r <= 1e-8 * norm);
            // -1/2 (||w1''||^2 + ||w2'||^2) - 1/2 |w1''(1) - w2'(1)|^2
            let ops = &diss.norms().reduction;
            let w1 = g.derivative(&ops.apply_d(&u.first), 2);
            let w2 = g.derivative(&ops.apply_d(&u.second), 1);
            let last = g.size() - 1;
            let sq = |v: &DVector<f64>| g.l2_norm(v).powi(2);
            let expected = -0.5 * (sq(&w1) + sq(&w2)) - 0.5 * (w1[last] - w2[last]).powi(2);
            assert_abs_diff_eq!(r, expected, epsilon = 1e-9 * norm);
        }
    }

    #[test]
    fn resolvent_solves_shifted_equation() {
        let g = Grid::new(64).unwrap();
        let mut corpus = Corpus::new(4);
        for d in [5u32, 7] {
            let zero = resolvent_at_mu(d, &g, &StatePair::zeros(g.size())).unwrap();
            assert_eq!(zero.max_abs(), 0.0);
            for _ in 0..4 {
                let f = StatePair {
                    first: corpus.gaussian(&g),
                    second: corpus.even_polynomial(&g, 12),
                };
                let u = resolvent_at_mu(d, &g, &f).unwrap();
                let res = shifted_free_operator(d, &g, &u).sub(&f);
                assert!(res.l2_norm(&g) <= 1e-6 * f.l2_norm(&g), "{}", res.l2_norm(&g));
            }
        }
    }

    #[test]
    fn projection_properties() {
        let (params, g) = setup(5, 3.0, 32);
        let gen = assemble_generator(&params, &g, true);
        let proj = spectral_projection(&gen).unwrap();
        assert_abs_diff_eq!(proj.eigenvalue, 1.0, epsilon = 1e-8);
        let s = symmetry_mode(&params, &g);
        assert!(proj.project(&s).sub(&s).max_abs() < 1e-10);
        let mut corpus = Corpus::new(1);
        for _ in 0..10 {
            let u = corpus.even_pair(&g, 12);
            let pu = proj.project(&u);
            let ppu = proj.project(&pu);
            assert!(ppu.sub(&pu).max_abs() <= 1e-10 * (1.0 + pu.max_abs()));
        }
        let free = assemble_generator(&params, &g, false);
        assert!(matches!(
            spectral_projection(&free),
            Err(Error::EigenvalueNotFound { .. })
        ));
    }

    #[test]
    fn fit_exact_exponential() {
        let taus: Vec<f64> = (0..100).map(|k| k as f64 * 0.1).collect();
        let vals: Vec<f64> = taus.iter().map(|t| (-0.7 * t).exp()).collect();
        assert_abs_diff_eq!(fit_rate(&taus, &vals, (0.0, 10.0)).unwrap(), 0.7, epsilon = 1e-10);
        let flat = vec![2.5; taus.len()];
        assert_abs_diff_eq!(fit_rate(&taus, &flat, (0.0, 10.0)).unwrap(), 0.0, epsilon = 1e-12);
        assert!(matches!(
            fit_rate(&taus, &vals, (20.0, 30.0)),
            Err(Error::DegenerateWindow(_))
        ));
        let taus: Vec<f64> = (0..=200).map(|k| 5.0 + k as f64 * 0.05).collect();
        let vals: Vec<f64> = taus.iter().map(|t| (-t).exp() * (2.0 + t.sin())).collect();
        assert_abs_diff_eq!(fit_rate(&taus, &vals, (5.0, 15.0)).unwrap(), 1.0, epsilon = 0.05);
    }

    #[test]
    fn propagation_of_symmetry_mode_and_zero() {
        let (params, g) = setup(5, 3.0, 24);
        let gen = assemble_generator(&params, &g, true);
        let proj = spectral_projection(&gen).unwrap();
        let dt = default_dt(&g);
        let zero = linear_propagate(&gen, &proj, &StatePair::zeros(g.size()), 1.0, dt).unwrap();
        assert!(zero.full_norm.iter().all(|&x| x == 0.0));
        let s = symmetry_mode(&params, &g);
        let tr = linear_propagate(&gen, &proj, &s, 2.0, dt).unwrap();
        let last = *tr.unstable_coeff.last().unwrap();
        assert_abs_diff_eq!(last / 2f64.exp(), 1.0, epsilon = 1e-6);
        assert!(matches!(
            linear_propagate(&gen, &proj, &s, 1.0, 10.0 * dt),
            Err(Error::CflViolation { .. })
        ));
    }

    #[test]
    fn trace_csv_layout() {
        let (params, g) = setup(5, 3.0, 16);
        let gen = assemble_generator(&params, &g, true);
        let proj = spectral_projection(&gen).unwrap();
        let s = symmetry_mode(&params, &g);
        let tr = linear_propagate(&gen, &proj, &s, 0.2, default_dt(&g)).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("tau,full_norm,stable_norm,unstable_coeff\n"));
        assert_eq!(text.lines().count(), tr.len() + 1);
        assert!(tr.taus.windows(2).all(|w| w[1] > w[0]));
    }
}
