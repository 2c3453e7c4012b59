//! Dispatch of the subcommands; each writes its artifacts under `out`.

use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde_json::{json, Value};

use odeblowup::corpus::Corpus;
use odeblowup::evolve::{
    measure_convergence_rates, shoot, EvolveOptions, Evolver, RateMode, ShootOptions,
};
use odeblowup::grid::ingest_profile_path;
use odeblowup::linop::{
    assemble_generator, resolvent_at_mu, shifted_free_operator, spectral_projection,
    Dissipativity, NormKind,
};
use odeblowup::model::{exact_family_data, ConstantData, FnData, InterpolatedData, RadialData};
use odeblowup::reduction::{dilation, laplacian_matrix, NormOps, ReductionOps};
use odeblowup::spectrum::matrix_spectrum;
use odeblowup::{make_params, symmetry_mode, Grid, ModelParams, StatePair};

use crate::config::{Command, ExperimentConfig, Perturbation};

/// Why a run did not succeed; each kind maps to its own exit code.
#[derive(Debug)]
pub enum Failure {
    /// A verification or rate check did not pass.
    Check(String),
    Usage(String),
    Numerical(odeblowup::Error),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Check(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    pub fn record(&self) -> Value {
        let (kind, message) = match self {
            Failure::Check(m) => ("check_failed", m.clone()),
            Failure::Usage(m) => ("usage", m.clone()),
            Failure::Numerical(e) => ("numerical", e.to_string()),
            Failure::Io(m) => ("io", m.clone()),
        };
        json!({ "status": "error", "kind": kind, "exit_code": self.exit_code(), "message": message })
    }
}

impl From<odeblowup::Error> for Failure {
    fn from(e: odeblowup::Error) -> Self {
        match e {
            odeblowup::Error::Io(m) => Failure::Io(m),
            odeblowup::Error::Config(m) => Failure::Usage(m),
            other => Failure::Numerical(other),
        }
    }
}

type Outcome = Result<(), Failure>;

fn write_json(dir: &Path, name: &str, value: &Value) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
    fs::write(dir.join(name), text + "\n").map_err(|e| Failure::Io(format!("{}: {e}", name)))
}

fn params_json(p: &ModelParams) -> Value {
    serde_json::to_value(p).unwrap_or(Value::Null)
}

pub fn run_command(cfg: &ExperimentConfig) -> Outcome {
    // parameter errors are configuration errors, not numerical ones
    let params = make_params(cfg.d, cfg.p, cfg.epsilon).map_err(|e| Failure::Usage(e.to_string()))?;
    let grid = Grid::new(cfg.n).map_err(|e| Failure::Usage(e.to_string()))?;
    fs::create_dir_all(&cfg.out).map_err(|e| Failure::Io(format!("{}: {e}", cfg.out.display())))?;
    match cfg.command {
        Command::Verify => verify(cfg, &params, &grid),
        Command::Spectrum => spectrum(cfg, &params, &grid),
        Command::Evolve => evolve(cfg, &params, &grid),
        Command::Rates => rates(cfg, &params, &grid),
        Command::Resolvent => resolvent(cfg, &grid),
    }
}

struct SuiteRow {
    name: &'static str,
    worst: f64,
    tolerance: f64,
}

impl SuiteRow {
    fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

fn rel(a: &DVector<f64>, b: &DVector<f64>, g: &Grid) -> f64 {
    g.l2_norm(&(a - b)) / g.l2_norm(b).max(1e-300)
}

fn random_pair(corpus: &mut Corpus, grid: &Grid, degree: usize, i: usize) -> StatePair {
    StatePair {
        first: corpus.smooth_even(grid, degree, i),
        second: corpus.smooth_even(grid, degree, i + 1),
    }
}

fn verify(cfg: &ExperimentConfig, params: &ModelParams, grid: &Grid) -> Outcome {
    let d = params.d;
    let mut corpus = Corpus::new(cfg.seed);
    let degree = (cfg.n / 2).min(32);
    let ops = ReductionOps::new(d, grid)?;
    let lap = laplacian_matrix(grid, d);
    let mut ident = 0.0f64;
    for _ in 0..20 {
        let u = corpus.even_polynomial(grid, degree);
        let du = ops.apply_d(&u);
        let w = corpus.even_polynomial(grid, degree).component_mul(grid.nodes());
        let kw = ops.apply_k(&w);
        for r in [
            rel(&ops.apply_d(&dilation(grid, &u)), &(dilation(grid, &du) + &du), grid),
            rel(&ops.apply_d(&(&lap * &u)), &grid.derivative(&du, 2), grid),
            rel(&ops.apply_k(&du), &u, grid),
            rel(&ops.apply_k(&dilation(grid, &w)), &(dilation(grid, &kw) - &kw), grid),
            rel(&ops.apply_k(&grid.derivative(&w, 2)), &(&lap * &kw), grid),
        ] {
            ident = ident.max(r);
        }
    }

    let norms = NormOps::new(d, grid)?;
    let diss = Dissipativity::new(params, grid)?;
    let (mut ratio_lo, mut ratio_hi, mut diss_worst) = (f64::INFINITY, 0.0f64, f64::NEG_INFINITY);
    for i in 0..20 {
        let u = random_pair(&mut corpus, grid, 12, i);
        let rep = norms.report(&u)?;
        for r in [rep.ratios.0, rep.ratios.1] {
            ratio_lo = ratio_lo.min(r);
            ratio_hi = ratio_hi.max(r);
        }
        diss_worst = diss_worst.max(diss.residual(&u)? / norms.d_norm_sq(&u));
    }
    // finite positive constants: report the spread, pass when bounded
    let spread = if ratio_lo > 0.0 { ratio_hi / ratio_lo } else { f64::INFINITY };

    let mut res_worst = 0.0f64;
    for i in 0..10 {
        let f = random_pair(&mut corpus, grid, 8, i);
        let u = resolvent_at_mu(d, grid, &f)?;
        res_worst = res_worst.max(shifted_free_operator(d, grid, &u).sub(&f).l2_norm(grid) / f.l2_norm(grid));
    }

    let gen = assemble_generator(params, grid, true);
    let proj = spectral_projection(&gen)?;
    let g = symmetry_mode(params, grid);
    let proj_err = (proj.eigenvalue - 1.0).abs().max(proj.project(&g).sub(&g).max_abs());

    let rows = [
        SuiteRow { name: "operator identities", worst: ident, tolerance: 1e-8 },
        SuiteRow { name: "norm equivalence spread", worst: spread, tolerance: 1e3 },
        SuiteRow { name: "dissipativity", worst: diss_worst, tolerance: 1e-8 },
        SuiteRow { name: "resolvent", worst: res_worst, tolerance: 1e-6 },
        SuiteRow { name: "symmetry-mode projection", worst: proj_err, tolerance: 1e-8 },
    ];
    println!("{:<26} {:>6} {:>12} {:>10}", "suite", "result", "worst", "tolerance");
    for r in &rows {
        let tag = if r.passed() { "PASS" } else { "FAIL" };
        println!("{:<26} {:>6} {:>12.3e} {:>10.0e}", r.name, tag, r.worst, r.tolerance);
    }
    let report = json!({
        "params": params_json(params),
        "n": cfg.n,
        "seed": cfg.seed,
        "suites": rows.iter().map(|r| json!({
            "name": r.name, "worst": r.worst, "tolerance": r.tolerance, "passed": r.passed()
        })).collect::<Vec<_>>(),
    });
    write_json(&cfg.out, &format!("{}.json", cfg.stem()), &report)?;
    let failed: Vec<&str> = rows.iter().filter(|r| !r.passed()).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("failed suites: {}", failed.join(", "))))
    }
}

fn spectrum(cfg: &ExperimentConfig, params: &ModelParams, grid: &Grid) -> Outcome {
    let gen = assemble_generator(params, grid, true);
    let report = matrix_spectrum(&gen, &[])?;
    let text = report.to_json()?;
    let path = cfg.out.join(format!("{}.json", cfg.stem()));
    fs::write(&path, text + "\n").map_err(|e| Failure::Io(e.to_string()))?;
    match report.rightmost() {
        Some(top) => println!("rightmost persistent eigenvalue {:.12} {:+.3e}i", top.re, top.im),
        None => println!("no persistent eigenvalue"),
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// Owns whatever the chosen perturbation borrows.
enum Data {
    Constant(ConstantData),
    Gaussian { amplitude: f64, width: f64 },
    Sampled(odeblowup::SampledProfile),
}

impl Data {
    fn build(cfg: &ExperimentConfig, params: &ModelParams) -> Result<Self, Failure> {
        Ok(match &cfg.perturb {
            Perturbation::None => Data::Constant(ConstantData(0.0, 0.0)),
            Perturbation::Family => Data::Constant(exact_family_data(params, cfg.t0 + cfg.amplitude, cfg.t0)),
            Perturbation::Gaussian => {
                let width = Corpus::new(cfg.seed).uniform(0.7, 1.4);
                Data::Gaussian { amplitude: cfg.amplitude, width }
            }
            Perturbation::Profile(path) => Data::Sampled(ingest_profile_path(path)?),
        })
    }

    fn with<R>(&self, f: impl FnOnce(&dyn RadialData) -> R) -> R {
        match self {
            Data::Constant(c) => f(c),
            Data::Gaussian { amplitude, width } => {
                let (a, w) = (*amplitude, *width);
                f(&FnData(move |r: f64| {
                    let e = (-(r / w).powi(2)).exp();
                    (a * e, a * r * r * e)
                }))
            }
            Data::Sampled(p) => f(&InterpolatedData::new(p)),
        }
    }
}

fn evolver(cfg: &ExperimentConfig, params: &ModelParams, grid: &Grid, norm: NormKind) -> Result<Evolver, Failure> {
    let options = EvolveOptions {
        dt_factor: cfg.dt_factor,
        norm,
        ..EvolveOptions::default()
    };
    Ok(Evolver::new(params, grid, options)?)
}

fn evolve(cfg: &ExperimentConfig, params: &ModelParams, grid: &Grid) -> Outcome {
    let data = Data::build(cfg, params)?;
    let ev = evolver(cfg, params, grid, NormKind::Full)?;
    let trace = data.with(|v| ev.run(v, cfg.t0 + cfg.t_offset, cfg.t0, cfg.tau_end))?;
    trace.export(&cfg.out, &cfg.stem())?;
    println!(
        "{} samples to tau = {:.3}, max norm {:.3e}{}",
        trace.len(),
        trace.taus.last().copied().unwrap_or(0.0),
        trace.max_norm(),
        if trace.meta.aborted { " (stopped by guard)" } else { "" }
    );
    Ok(())
}

fn rates(cfg: &ExperimentConfig, params: &ModelParams, grid: &Grid) -> Outcome {
    let data = Data::build(cfg, params)?;
    let norm = match cfg.mode {
        RateMode::Full => NormKind::Full,
        RateMode::LowerRegularity => NormKind::LowerRegularity,
    };
    let ev = evolver(cfg, params, grid, norm)?;
    let opts = ShootOptions {
        tau_probe: cfg.tau_probe,
        ..ShootOptions::default()
    };
    let result = data.with(|v| shoot(&ev, v, cfg.t0, cfg.delta, &opts))?;
    let report = measure_convergence_rates(params, grid, &result, cfg.mode)?;
    result.trace.export(&cfg.out, &cfg.stem())?;
    let record = json!({
        "params": params_json(params),
        "n": cfg.n,
        "t_star": result.t_star,
        "bracket": result.bracket,
        "iterations": result.iterations,
        "final_unstable_coeff": result.final_unstable_coeff,
        "report": serde_json::to_value(&report).map_err(|e| Failure::Io(e.to_string()))?,
        "passed": report.passed(),
    });
    write_json(&cfg.out, &format!("{}_report.json", cfg.stem()), &record)?;
    println!("T_star = {:.12} after {} iterations", result.t_star, result.iterations);
    for e in &report.per_norm {
        match e.rate {
            Some(r) => println!("{:<12} rate {r:.4} ({:?})", e.label, e.status),
            None => println!("{:<12} n/a", e.label),
        }
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Check(format!("rates below {:.3}", report.expected - 0.05)))
    }
}

fn resolvent(cfg: &ExperimentConfig, grid: &Grid) -> Outcome {
    let d = cfg.d as u32;
    let mut corpus = Corpus::new(cfg.seed);
    let mut residuals = Vec::new();
    for i in 0..20 {
        let f = random_pair(&mut corpus, grid, 8, i);
        let u = resolvent_at_mu(d, grid, &f)?;
        residuals.push(shifted_free_operator(d, grid, &u).sub(&f).l2_norm(grid) / f.l2_norm(grid));
    }
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    let passed = worst <= 1e-6;
    let record = json!({
        "d": d, "n": cfg.n, "seed": cfg.seed,
        "relative_residuals": residuals, "worst": worst, "tolerance": 1e-6, "passed": passed,
    });
    write_json(&cfg.out, &format!("{}.json", cfg.stem()), &record)?;
    println!("worst relative residual {worst:.3e} over {} inputs", residuals.len());
    if passed {
        Ok(())
    } else {
        Err(Failure::Check(format!("resolvent residual {worst:.3e} above 1e-6")))
    }
}
