//! Nonlinear evolution in similarity coordinates, shooting on the blowup
//! time, and decay rates of tuned runs.

use nalgebra::DVector;
use serde::Serialize;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linop::{
    assemble_generator, fit_rate, march, spectral_projection, EvolutionTrace, GeneratorMatrix,
    MarchOptions, NormKind, ProjectionData, DEFAULT_DT_FACTOR, DEFAULT_SAMPLE_INTERVAL,
};
use crate::model::{initial_data_u, ModelParams, RadialData, StatePair};
use crate::reduction::NormOps;

/// `N(x) = |c_p + x|^{p-1}(c_p + x) - c_p^p - p c_p^{p-1} x`, pointwise.
pub fn nonlinearity_n(params: &ModelParams, phi1: &DVector<f64>) -> DVector<f64> {
    phi1.map(|x| nonlinear_remainder(params, x))
}

fn nonlinear_remainder(params: &ModelParams, x: f64) -> f64 {
    let c = params.c_p;
    let p = params.p;
    if p == 3.0 {
        return x * x * (x + 3.0 * c);
    }
    let t = x / c;
    if t > -0.5 {
        // c^p [(1+t)^p - 1 - p t], cancellation-free for small t
        let grow = (p * t.ln_1p()).exp_m1();
        c.powf(p) * (grow - p * t)
    } else {
        let y = c + x;
        y.abs().powf(p - 1.0) * y - c.powf(p) - p * c.powf(p - 1.0) * x
    }
}

/// Linear fit `quotient ~ intercept + slope * size` along one amplitude sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Lipschitz quotients of the nonlinearity over scaled random pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzReport {
    /// `(||u|| + ||v||, ||N(u) - N(v)|| / ||u - v||)`, grouped by pair.
    pub samples: Vec<Vec<(f64, f64)>>,
    pub fits: Vec<LineFit>,
    /// Slope of `log quotient` against `log size` within pairs; one for linear scaling.
    pub log_slope: f64,
}

impl LipschitzReport {
    pub fn min_r_squared(&self) -> f64 {
        self.fits.iter().map(|f| f.r_squared).fold(f64::INFINITY, f64::min)
    }
}

/// Quotients `||N(u) - N(v)||_{H^{m_d-1}} / ||u - v||_{H^{m_d}}` against
/// `||u||_{H^{m_d}} + ||v||_{H^{m_d}}`, with each pair scaled through `amplitudes`.
pub fn lipschitz_scaling(
    params: &ModelParams,
    grid: &Grid,
    seed: u64,
    pairs: usize,
    amplitudes: &[f64],
) -> Result<LipschitzReport> {
    if amplitudes.len() < 3 || amplitudes.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::Config("need at least three positive amplitudes".into()));
    }
    let norms = NormOps::new(params.d, grid)?;
    let m = norms.m_d;
    let h = |u: &DVector<f64>, k: usize| norms.sobolev_sq(u, k).sqrt();
    let mut corpus = Corpus::new(seed);
    let mut samples = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let u0 = corpus.even_polynomial(grid, 8);
        let v0 = corpus.even_polynomial(grid, 8);
        let (nu, nv) = (h(&u0, m), h(&v0, m));
        let sweep: Vec<(f64, f64)> = amplitudes
            .iter()
            .map(|&a| {
                let u = &u0 * (a / nu);
                let v = &v0 * (a / nv);
                let diff = nonlinearity_n(params, &u) - nonlinearity_n(params, &v);
                (h(&u, m) + h(&v, m), h(&diff, m - 1) / h(&(&u - &v), m))
            })
            .collect();
        samples.push(sweep);
    }
    let fits = samples.iter().map(|s| line_fit(s)).collect::<Result<Vec<_>>>()?;
    // within-pair log fit: each sweep centered on its own mean
    let mut centered = Vec::new();
    for sweep in &samples {
        let logs: Vec<(f64, f64)> = sweep.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
        let k = logs.len() as f64;
        let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
        let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
        centered.extend(logs.iter().map(|&(x, y)| (x - mx, y - my)));
    }
    let sxy: f64 = centered.iter().map(|&(x, y)| x * y).sum();
    let sxx: f64 = centered.iter().map(|&(x, _)| x * x).sum();
    Ok(LipschitzReport {
        samples,
        fits,
        log_slope: sxy / sxx,
    })
}

fn line_fit(pts: &[(f64, f64)]) -> Result<LineFit> {
    if pts.iter().any(|&(x, y)| !(x.is_finite() && y.is_finite())) {
        return Err(Error::NonFinite("Lipschitz quotient"));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let (sxy, sxx, syy) = pts.iter().fold((0.0, 0.0, 0.0), |(a, b, c), &(x, y)| {
        (a + (x - mx) * (y - my), b + (x - mx).powi(2), c + (y - my).powi(2))
    });
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateWindow("constant samples".into()));
    }
    let slope = sxy / sxx;
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared: sxy * sxy / (sxx * syy),
    })
}

/// Settings shared by nonlinear runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvolveOptions {
    /// `dt / min_spacing`.
    pub dt_factor: f64,
    pub sample_interval: f64,
    pub norm: NormKind,
    /// Runs stop once the full norm of `Phi` exceeds this.
    pub guard: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt_factor: DEFAULT_DT_FACTOR,
            sample_interval: DEFAULT_SAMPLE_INTERVAL,
            norm: NormKind::Full,
            guard: 10.0,
        }
    }
}

/// Generator, projection and options for repeated runs on one grid.
#[derive(Debug, Clone)]
pub struct Evolver {
    pub gen: GeneratorMatrix,
    pub proj: ProjectionData,
    pub options: EvolveOptions,
}

impl Evolver {
    pub fn new(params: &ModelParams, grid: &Grid, options: EvolveOptions) -> Result<Self> {
        let gen = assemble_generator(params, grid, true);
        let proj = spectral_projection(&gen)?;
        Ok(Self { gen, proj, options })
    }

    pub fn grid(&self) -> &Grid {
        &self.gen.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.gen.params
    }

    pub fn dt(&self) -> f64 {
        self.options.dt_factor * self.grid().min_spacing()
    }

    /// Marches `d/dtau Phi = L Phi + (0, N(phi_1))` from `phi0`.
    pub fn run_from(
        &self,
        phi0: &StatePair,
        tau_end: f64,
        blowup_time: Option<f64>,
    ) -> Result<EvolutionTrace> {
        let opts = MarchOptions {
            tau_end,
            dt: self.dt(),
            sample_interval: self.options.sample_interval,
            norm: self.options.norm,
            guard: self.options.guard,
        };
        let b = self.gen.reduced();
        let m = self.grid().degree();
        let params = *self.params();
        march(&self.gen, &self.proj, phi0, &opts, blowup_time, |y| {
            let mut out = b * y;
            for i in 0..m {
                out[m + i] += nonlinear_remainder(&params, y[i]);
            }
            out
        })
    }

    /// Evolves the perturbation `Phi(0) = U(v, T)` of the static solution.
    pub fn run(&self, v: &dyn RadialData, t: f64, t0: f64, tau_end: f64) -> Result<EvolutionTrace> {
        let phi0 = initial_data_u(self.params(), self.grid(), v, t, t0)?;
        self.run_from(&phi0, tau_end, Some(t))
    }
}

pub fn run_evolution(
    params: &ModelParams,
    grid: &Grid,
    v: &dyn RadialData,
    t: f64,
    t0: f64,
    tau_end: f64,
) -> Result<EvolutionTrace> {
    Evolver::new(params, grid, EvolveOptions::default())?.run(v, t, t0, tau_end)
}

/// Outcome of the shooting on `T`.
#[derive(Debug, Clone, Serialize)]
pub struct ShootResult {
    pub t_star: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub final_unstable_coeff: f64,
    pub trace: EvolutionTrace,
}

/// Shooting settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootOptions {
    pub tau_probe: f64,
    /// Stop once the bracket is narrower than `tolerance * T0`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Largest admissible `H^{m_d} x H^{m_d-1}` norm of the data at `T = T0`.
    pub smallness: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self {
            tau_probe: 8.0,
            tolerance: 1e-13,
            max_iterations: 200,
            smallness: 1e-3,
        }
    }
}

/// `e^{-tau}` times the unstable coefficient, averaged over the last quarter
/// of the run; the last sample if the run stopped early.
pub fn late_coefficient(trace: &EvolutionTrace, tau_probe: f64) -> f64 {
    let scaled = |i: usize| trace.unstable_coeff[i] * (-trace.taus[i]).exp();
    let last = trace.len() - 1;
    if trace.meta.aborted || trace.taus[last] < tau_probe {
        return scaled(last);
    }
    let from = 0.75 * tau_probe;
    let idx: Vec<usize> = (0..trace.len()).filter(|&i| trace.taus[i] >= from).collect();
    idx.iter().map(|&i| scaled(i)).sum::<f64>() / idx.len() as f64
}

pub fn tune_blowup_time(
    params: &ModelParams,
    grid: &Grid,
    v: &dyn RadialData,
    t0: f64,
    delta: f64,
    tau_probe: f64,
) -> Result<ShootResult> {
    let evolver = Evolver::new(params, grid, EvolveOptions::default())?;
    let opts = ShootOptions {
        tau_probe,
        ..ShootOptions::default()
    };
    shoot(&evolver, v, t0, delta, &opts)
}

/// Bisection and Illinois steps on `T` against the sign of the late unstable coefficient.
pub fn shoot(
    evolver: &Evolver,
    v: &dyn RadialData,
    t0: f64,
    delta: f64,
    opts: &ShootOptions,
) -> Result<ShootResult> {
    if !(t0 > 0.0 && delta > 0.0 && delta < t0) {
        return Err(Error::Config(format!("need 0 < delta < T0, got T0 = {t0}, delta = {delta}")));
    }
    let data0 = initial_data_u(evolver.params(), evolver.grid(), v, t0, t0)?;
    let norms = NormOps::new(evolver.params().d, evolver.grid())?;
    let size = norms.sobolev_pair_sq(&data0).sqrt();
    if size > opts.smallness {
        return Err(Error::Config(format!(
            "data norm {size:.3e} exceeds smallness {:.3e}",
            opts.smallness
        )));
    }
    let probe = |t: f64| -> Result<(f64, EvolutionTrace)> {
        let trace = evolver.run(v, t, t0, opts.tau_probe)?;
        Ok((late_coefficient(&trace, opts.tau_probe), trace))
    };
    let finish = |t: f64, c: f64, trace: EvolutionTrace, iterations: usize| ShootResult {
        t_star: t,
        bracket: (t0 - delta, t0 + delta),
        iterations,
        final_unstable_coeff: c,
        trace,
    };

    let (c_mid, trace_mid) = probe(t0)?;
    if c_mid == 0.0 {
        return Ok(finish(t0, c_mid, trace_mid, 0));
    }
    let (mut lo, mut hi) = (t0 - delta, t0 + delta);
    let (mut c_lo, _) = probe(lo)?;
    let (mut c_hi, _) = probe(hi)?;
    if c_lo == 0.0 || c_hi == 0.0 {
        let t = if c_lo == 0.0 { lo } else { hi };
        let (c, tr) = probe(t)?;
        return Ok(finish(t, c, tr, 2));
    }
    if c_lo.signum() == c_hi.signum() {
        return Err(Error::NoSignChange { lo, hi, c_lo, c_hi });
    }
    // the midpoint already splits the bracket
    if c_mid.signum() == c_lo.signum() {
        lo = t0;
        c_lo = c_mid;
    } else {
        hi = t0;
        c_hi = c_mid;
    }
    let mut best = (t0, c_mid, trace_mid);
    let mut side = 0i32;
    for it in 1..=opts.max_iterations {
        // bisect while the endpoints are far in the nonlinear regime
        let t = if hi - lo > delta / 16.0 {
            0.5 * (lo + hi)
        } else {
            let s = (lo * c_hi - hi * c_lo) / (c_hi - c_lo);
            if s > lo && s < hi { s } else { 0.5 * (lo + hi) }
        };
        let (c, trace) = probe(t)?;
        if c.abs() <= best.1.abs() {
            best = (t, c, trace);
        }
        if c == 0.0 || hi - lo <= opts.tolerance * t0 {
            return Ok(finish(best.0, best.1, best.2, it + 3));
        }
        if c.signum() == c_lo.signum() {
            lo = t;
            c_lo = c;
            if side == -1 {
                c_hi /= 2.0;
            }
            side = -1;
        } else {
            hi = t;
            c_hi = c;
            if side == 1 {
                c_lo /= 2.0;
            }
            side = 1;
        }
    }
    Err(Error::ShootingNonConvergence {
        iterations: opts.max_iterations,
    })
}

/// Norm family used for rate measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    /// `H^{m_d} x H^{m_d-1}`, expected rate `mu_p`.
    Full,
    /// `H^{m_d-1} x H^{m_d-2}` for `p = 3`, expected rate `1/2 - epsilon`.
    LowerRegularity,
}

impl std::str::FromStr for RateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "lower_regularity" => Ok(Self::LowerRegularity),
            other => Err(Error::Config(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateStatus {
    Passed,
    Failed,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEntry {
    /// `"H^j"` for `||phi_1||_{H^j-dot}`, `"similarity"` for the pair norm.
    pub label: String,
    pub rate: Option<f64>,
    pub window: (f64, f64),
    pub status: RateStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub mode: RateMode,
    pub expected: f64,
    pub per_norm: Vec<RateEntry>,
}

impl RateReport {
    pub fn passed(&self) -> bool {
        self.per_norm.iter().all(|e| e.status != RateStatus::Failed)
    }

    /// Rate of the pair norm.
    pub fn similarity_rate(&self) -> Option<f64> {
        self.per_norm.iter().find(|e| e.label == "similarity").and_then(|e| e.rate)
    }
}

/// Norm series that never exceed this carry no rate information (roundoff only).
pub const NEGLIGIBLE_NORM: f64 = 1e-12;

/// Fit window for tuned runs: from `tau = 2` to the probe time.
pub fn default_window(trace: &EvolutionTrace) -> (f64, f64) {
    let end = trace.taus.last().copied().unwrap_or(0.0);
    (2.0f64.min(end / 4.0), end)
}

pub fn measure_convergence_rates(
    params: &ModelParams,
    grid: &Grid,
    shoot: &ShootResult,
    mode: RateMode,
) -> Result<RateReport> {
    let trace = &shoot.trace;
    let window = default_window(trace);
    rates_in_window(params, grid, trace, mode, window)
}

pub fn rates_in_window(
    params: &ModelParams,
    grid: &Grid,
    trace: &EvolutionTrace,
    mode: RateMode,
    window: (f64, f64),
) -> Result<RateReport> {
    let (expected, top, pair) = match mode {
        RateMode::Full => (params.mu_p, params.m_d as usize, NormKind::Full),
        RateMode::LowerRegularity => {
            if params.p != 3.0 {
                return Err(Error::Config("lower-regularity rates need p = 3".into()));
            }
            (0.5 - params.epsilon, params.m_d as usize - 1, NormKind::LowerRegularity)
        }
    };
    if trace.meta.norm != pair {
        // pair norm of another space: recompute from seminorms is not possible
        return Err(Error::Config(format!(
            "trace records {:?} norms, {mode:?} rates need {pair:?}",
            trace.meta.norm
        )));
    }
    grid.check_len(&DVector::zeros(grid.size()))?;
    let mut series: Vec<(String, &Vec<f64>)> = (0..=top)
        .map(|j| (format!("H^{j}"), &trace.seminorms[j]))
        .collect();
    series.push(("similarity".to_string(), &trace.full_norm));
    let per_norm = series
        .into_iter()
        .map(|(label, values)| {
            if values.iter().all(|&x| x <= NEGLIGIBLE_NORM) {
                return Ok(RateEntry {
                    label,
                    rate: None,
                    window,
                    status: RateStatus::NotApplicable,
                });
            }
            let rate = fit_rate(&trace.taus, values, window)?;
            Ok(RateEntry {
                label,
                rate: Some(rate),
                window,
                status: if rate >= expected - 0.05 {
                    RateStatus::Passed
                } else {
                    RateStatus::Failed
                },
            })
        })
        .collect::<Result<_>>()?;
    Ok(RateReport {
        mode,
        expected,
        per_norm,
    })
}
