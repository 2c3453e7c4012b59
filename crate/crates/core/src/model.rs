//! Model parameters, the ODE blowup profile and the initial-data operator.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{barycentric_eval, floater_hormann_weights, Grid, SampledProfile};
use crate::reduction::{dilation, radial_laplacian};

/// Default rate loss used when none is configured.
pub const DEFAULT_EPSILON: f64 = 0.05;

/// Dimension, exponent and everything derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub d: u32,
    pub p: f64,
    /// Amplitude of the ODE profile, `[2(p+1)/(p-1)^2]^{1/(p-1)}`.
    pub c_p: f64,
    /// Critical Sobolev index `d/2 - 2/(p-1)`.
    pub s_p: f64,
    /// Regularity index `(d+1)/2`.
    pub m_d: u32,
    /// Expected decay rate `min{2/(p-1), 1} - epsilon`.
    pub mu_p: f64,
    /// `-2/(p-1)`.
    pub diss_bound: f64,
    /// `max{-2/(p-1), -1}`.
    pub spectral_threshold: f64,
    pub epsilon: f64,
    pub superconformal: bool,
}

/// Validated parameters; subconformal exponents are rejected.
pub fn make_params(d: i64, p: f64, epsilon: f64) -> Result<ModelParams> {
    ModelParams::new(d, p, epsilon, false)
}

impl ModelParams {
    /// `allow_subconformal` admits `p <= (d+3)/(d-1)`, as needed for the
    /// `p = 3` lower-regularity framework.
    pub fn new(d: i64, p: f64, epsilon: f64, allow_subconformal: bool) -> Result<Self> {
        if d < 5 || d % 2 == 0 {
            return Err(Error::InvalidDimension(d));
        }
        if !p.is_finite() || p <= 1.0 {
            return Err(Error::InvalidExponent(p));
        }
        let d = d as u32;
        let threshold = superconformal_threshold(d);
        let superconformal = p > threshold;
        if !superconformal && !allow_subconformal {
            return Err(Error::Subconformal { d, p, threshold });
        }
        let two_over = 2.0 / (p - 1.0);
        let upper = two_over.min(1.0);
        if !(epsilon > 0.0 && epsilon < upper) {
            return Err(Error::InvalidEpsilon { epsilon, upper });
        }
        Ok(Self {
            d,
            p,
            c_p: (2.0 * (p + 1.0) / ((p - 1.0) * (p - 1.0))).powf(1.0 / (p - 1.0)),
            s_p: d as f64 / 2.0 - two_over,
            m_d: (d + 1) / 2,
            mu_p: upper - epsilon,
            diss_bound: -two_over,
            spectral_threshold: (-two_over).max(-1.0),
            epsilon,
            superconformal,
        })
    }

    /// `2/(p-1)`, the scaling weight of the first component.
    pub fn weight1(&self) -> f64 {
        2.0 / (self.p - 1.0)
    }

    /// `(p+1)/(p-1)`, the scaling weight of the second component.
    pub fn weight2(&self) -> f64 {
        (self.p + 1.0) / (self.p - 1.0)
    }

    /// Coefficient of the compact perturbation, `p c_p^{p-1}`.
    pub fn potential(&self) -> f64 {
        self.p * self.c_p.powf(self.p - 1.0)
    }

    /// The static pair `(c_p, 2 c_p / (p-1))`.
    pub fn static_pair(&self) -> (f64, f64) {
        (self.c_p, self.weight1() * self.c_p)
    }

    /// `u_T(t) = c_p (T - t)^{-2/(p-1)}`.
    pub fn ode_profile(&self, blowup: f64, t: f64) -> Result<f64> {
        if t >= blowup {
            return Err(Error::PastBlowup { t, blowup });
        }
        Ok(self.c_p * (blowup - t).powf(-self.weight1()))
    }

    /// `(u_T(0), d/dt u_T(0))`, the Cauchy data of the blowup solution at `t = 0`.
    pub fn blowup_data(&self, blowup: f64) -> (f64, f64) {
        (
            self.c_p * blowup.powf(-self.weight1()),
            self.weight1() * self.c_p * blowup.powf(-self.weight2()),
        )
    }

    /// `kappa(T)` from the initial-data operator.
    pub fn kappa(&self, t: f64, t0: f64) -> (f64, f64) {
        let s = t / t0;
        (
            s.powf(self.weight1()) * self.c_p,
            s.powf(self.weight2()) * self.weight1() * self.c_p,
        )
    }
}

/// Free-function form of [`ModelParams::ode_profile`].
pub fn ode_profile(params: &ModelParams, blowup: f64, t: f64) -> Result<f64> {
    params.ode_profile(blowup, t)
}

pub fn superconformal_threshold(d: u32) -> f64 {
    (d as f64 + 3.0) / (d as f64 - 1.0)
}

/// Pair of grid functions `(phi_1, phi_2)` sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePair {
    pub first: DVector<f64>,
    pub second: DVector<f64>,
}

impl StatePair {
    pub fn new(first: DVector<f64>, second: DVector<f64>) -> Result<Self> {
        if first.len() != second.len() {
            return Err(Error::SizeMismatch {
                expected: first.len(),
                actual: second.len(),
            });
        }
        Ok(Self { first, second })
    }

    pub fn zeros(size: usize) -> Self {
        Self {
            first: DVector::zeros(size),
            second: DVector::zeros(size),
        }
    }

    pub fn constant(size: usize, a: f64, b: f64) -> Self {
        Self {
            first: DVector::from_element(size, a),
            second: DVector::from_element(size, b),
        }
    }

    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.first.iter().chain(self.second.iter()).all(|x| x.is_finite())
    }

    /// Stacks both components into one vector of length `2(N+1)`.
    pub fn stacked(&self) -> DVector<f64> {
        let n = self.len();
        DVector::from_fn(2 * n, |i, _| if i < n { self.first[i] } else { self.second[i - n] })
    }

    pub fn from_stacked(v: &DVector<f64>) -> Self {
        let n = v.len() / 2;
        Self {
            first: v.rows(0, n).into_owned(),
            second: v.rows(n, n).into_owned(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            first: &self.first * s,
            second: &self.second * s,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            first: &self.first + &other.first,
            second: &self.second + &other.second,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            first: &self.first - &other.first,
            second: &self.second - &other.second,
        }
    }

    /// Largest absolute entry of either component.
    pub fn max_abs(&self) -> f64 {
        self.first.amax().max(self.second.amax())
    }

    /// Discrete `L^2 x L^2` norm with grid quadrature.
    pub fn l2_norm(&self, grid: &Grid) -> f64 {
        grid.l2_norm(&self.first).hypot(grid.l2_norm(&self.second))
    }
}

/// The symmetry mode `g = (1, (p+1)/(p-1))` sampled on a grid.
pub fn symmetry_mode(params: &ModelParams, grid: &Grid) -> StatePair {
    StatePair::constant(grid.size(), 1.0, params.weight2())
}

/// Radial Cauchy data `(f(r), g(r))` on `[0, max_radius]`.
pub trait RadialData {
    fn max_radius(&self) -> f64;
    fn eval(&self, r: f64) -> (f64, f64);
}

/// Data given by a closure, defined on all of `[0, inf)`.
pub struct FnData<F>(pub F);

impl<F: Fn(f64) -> (f64, f64)> RadialData for FnData<F> {
    fn max_radius(&self) -> f64 {
        f64::INFINITY
    }

    fn eval(&self, r: f64) -> (f64, f64) {
        (self.0)(r)
    }
}

/// Spatially constant data.
#[derive(Debug, Clone, Copy)]
pub struct ConstantData(pub f64, pub f64);

impl RadialData for ConstantData {
    fn max_radius(&self) -> f64 {
        f64::INFINITY
    }

    fn eval(&self, _r: f64) -> (f64, f64) {
        (self.0, self.1)
    }
}

/// Blending degree for ingested samples.
pub const INGEST_BLEND: usize = 8;

/// Ingested samples evaluated by Floater-Hormann barycentric interpolation on their own radii.
pub struct InterpolatedData<'a> {
    profile: &'a SampledProfile,
    weights: Vec<f64>,
}

impl<'a> InterpolatedData<'a> {
    pub fn new(profile: &'a SampledProfile) -> Self {
        Self {
            weights: floater_hormann_weights(&profile.radii, INGEST_BLEND),
            profile,
        }
    }
}

impl RadialData for InterpolatedData<'_> {
    fn max_radius(&self) -> f64 {
        self.profile.max_radius
    }

    fn eval(&self, r: f64) -> (f64, f64) {
        let p = self.profile;
        (
            barycentric_eval(&p.radii, &self.weights, &p.values1, r),
            barycentric_eval(&p.radii, &self.weights, &p.values2, r),
        )
    }
}

/// Difference `u_{T*}[0] - u_{T0}[0]` of two blowup solutions; spatially constant.
pub fn exact_family_data(params: &ModelParams, t_star: f64, t0: f64) -> ConstantData {
    let (a1, b1) = params.blowup_data(t_star);
    let (a0, b0) = params.blowup_data(t0);
    ConstantData(a1 - a0, b1 - b0)
}

/// `U(v, T) = V(v, T) + kappa(T) - kappa(T0)` sampled on the grid.
pub fn initial_data_u<D: RadialData + ?Sized>(
    params: &ModelParams,
    grid: &Grid,
    v: &D,
    t: f64,
    t0: f64,
) -> Result<StatePair> {
    if v.max_radius() < t {
        return Err(Error::DomainNotCovered {
            required: t,
            available: v.max_radius(),
        });
    }
    let s1 = t.powf(params.weight1());
    let s2 = t.powf(params.weight2());
    let (k1, k2) = params.kappa(t, t0);
    let (c1, c2) = params.static_pair();
    let n = grid.size();
    let mut first = DVector::zeros(n);
    let mut second = DVector::zeros(n);
    for (i, &rho) in grid.nodes().iter().enumerate() {
        let (f, g) = v.eval(t * rho);
        first[i] = s1 * f + (k1 - c1);
        second[i] = s2 * g + (k2 - c2);
    }
    let out = StatePair { first, second };
    if !out.is_finite() {
        return Err(Error::NonFinite("initial data"));
    }
    Ok(out)
}

/// Right-hand side of the nonlinear first-order similarity system for `Psi`.
pub fn similarity_rhs(params: &ModelParams, grid: &Grid, psi: &StatePair) -> StatePair {
    let w1 = params.weight1();
    let w2 = params.weight2();
    let p = params.p;
    let first = &psi.second + dilation(grid, &psi.first) - &psi.first * w1;
    let power = psi.first.map(|x| x.abs().powf(p - 1.0) * x);
    let second = radial_laplacian(grid, params.d, &psi.first) + dilation(grid, &psi.second)
        - &psi.second * w2
        + power;
    StatePair { first, second }
}
