//! Experiment configuration: flat `key = value` files merged with flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use odeblowup::evolve::RateMode;
use odeblowup::linop::{DEFAULT_DT_FACTOR, MAX_DT_FACTOR};
use odeblowup::model::DEFAULT_EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Verify,
    Spectrum,
    Evolve,
    Rates,
    Resolvent,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Spectrum => "spectrum",
            Command::Evolve => "evolve",
            Command::Rates => "rates",
            Command::Resolvent => "resolvent",
        }
    }

    fn default_n(self) -> usize {
        match self {
            Command::Evolve | Command::Rates => 32,
            _ => 64,
        }
    }
}

/// Perturbation `v` of the blowup data `u_{T0}[0]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation {
    None,
    /// `amplitude * e^{-(r/w)^2} (1, r^2)` with a seeded width `w`.
    Gaussian,
    /// `u_{T0 + amplitude}[0] - u_{T0}[0]`.
    Family,
    /// Samples read from a CSV file `r, f(r), g(r)`.
    Profile(PathBuf),
}

/// Raw values before validation; every field optional.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub d: Option<i64>,
    pub p: Option<f64>,
    pub epsilon: Option<f64>,
    pub n: Option<usize>,
    pub dt_factor: Option<f64>,
    pub tau_end: Option<f64>,
    pub tau_probe: Option<f64>,
    pub t0: Option<f64>,
    pub delta: Option<f64>,
    pub t_offset: Option<f64>,
    pub amplitude: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub mode: Option<String>,
    pub perturb: Option<String>,
    pub profile: Option<PathBuf>,
}

impl Overrides {
    /// Fields of `self`, falling back to `base`.
    pub fn over(self, base: Overrides) -> Overrides {
        Overrides {
            d: self.d.or(base.d),
            p: self.p.or(base.p),
            epsilon: self.epsilon.or(base.epsilon),
            n: self.n.or(base.n),
            dt_factor: self.dt_factor.or(base.dt_factor),
            tau_end: self.tau_end.or(base.tau_end),
            tau_probe: self.tau_probe.or(base.tau_probe),
            t0: self.t0.or(base.t0),
            delta: self.delta.or(base.delta),
            t_offset: self.t_offset.or(base.t_offset),
            amplitude: self.amplitude.or(base.amplitude),
            seed: self.seed.or(base.seed),
            out: self.out.or(base.out),
            mode: self.mode.or(base.mode),
            perturb: self.perturb.or(base.perturb),
            profile: self.profile.or(base.profile),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub d: i64,
    pub p: f64,
    pub epsilon: f64,
    pub n: usize,
    pub dt_factor: f64,
    pub tau_end: f64,
    pub tau_probe: f64,
    pub t0: f64,
    pub delta: f64,
    pub t_offset: f64,
    pub amplitude: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub mode: RateMode,
    pub perturb: Perturbation,
}

impl ExperimentConfig {
    pub fn resolve(command: Command, raw: Overrides) -> Result<Self, String> {
        let perturb = match raw.perturb.as_deref() {
            None if command == Command::Rates => Perturbation::Gaussian,
            None | Some("none") => Perturbation::None,
            Some("gaussian") => Perturbation::Gaussian,
            Some("family") => Perturbation::Family,
            Some("profile") => Perturbation::Profile(
                raw.profile
                    .clone()
                    .ok_or("perturb = profile needs a profile path")?,
            ),
            Some(other) => return Err(format!("unknown perturbation '{other}'")),
        };
        let mode = match raw.mode.as_deref() {
            None => RateMode::Full,
            Some(s) => s.parse::<RateMode>().map_err(|e| e.to_string())?,
        };
        let cfg = Self {
            command,
            d: raw.d.unwrap_or(5),
            p: raw.p.unwrap_or(3.0),
            epsilon: raw.epsilon.unwrap_or(DEFAULT_EPSILON),
            n: raw.n.unwrap_or(command.default_n()),
            dt_factor: raw.dt_factor.unwrap_or(DEFAULT_DT_FACTOR),
            tau_end: raw.tau_end.unwrap_or(8.0),
            tau_probe: raw.tau_probe.unwrap_or(8.0),
            t0: raw.t0.unwrap_or(1.0),
            delta: raw.delta.unwrap_or(1e-3),
            t_offset: raw.t_offset.unwrap_or(0.0),
            amplitude: raw.amplitude.unwrap_or(1e-5),
            seed: raw.seed.unwrap_or(7),
            out: raw.out.unwrap_or_else(|| PathBuf::from("out")),
            mode,
            perturb,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        let positive = [
            ("epsilon", self.epsilon),
            ("dt_factor", self.dt_factor),
            ("tau_end", self.tau_end),
            ("tau_probe", self.tau_probe),
            ("T0", self.t0),
            ("delta", self.delta),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.dt_factor > MAX_DT_FACTOR {
            return Err(format!("dt_factor must not exceed {MAX_DT_FACTOR}, got {}", self.dt_factor));
        }
        if self.delta >= self.t0 {
            return Err(format!("delta must be below T0, got {} >= {}", self.delta, self.t0));
        }
        if !self.t_offset.is_finite() || self.t0 + self.t_offset <= 0.0 {
            return Err(format!("T0 + T_offset must be positive, got {}", self.t0 + self.t_offset));
        }
        if !self.amplitude.is_finite() {
            return Err("amplitude must be finite".into());
        }
        if self.mode == RateMode::LowerRegularity && self.p != 3.0 {
            return Err("mode lower_regularity needs p = 3".into());
        }
        Ok(())
    }

    /// File stem shared by the outputs of this run.
    pub fn stem(&self) -> String {
        format!(
            "{}_d{}_p{}_n{}_s{}",
            self.command.name(),
            self.d,
            self.p,
            self.n,
            self.seed
        )
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("bad value '{value}' for key '{key}'"))
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Overrides, String> {
    let mut seen = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", lineno + 1))?;
        let key = key.trim().replace('-', "_");
        if seen.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(format!("line {}: duplicate key '{key}'", lineno + 1));
        }
    }
    let mut o = Overrides::default();
    for (key, v) in &seen {
        let v = v.as_str();
        match key.as_str() {
            "d" => o.d = Some(parse(key, v)?),
            "p" => o.p = Some(parse(key, v)?),
            "epsilon" => o.epsilon = Some(parse(key, v)?),
            "N" | "n" => o.n = Some(parse(key, v)?),
            "dt_factor" => o.dt_factor = Some(parse(key, v)?),
            "tau_end" => o.tau_end = Some(parse(key, v)?),
            "tau_probe" => o.tau_probe = Some(parse(key, v)?),
            "T0" | "t0" => o.t0 = Some(parse(key, v)?),
            "delta" => o.delta = Some(parse(key, v)?),
            "T_offset" | "t_offset" => o.t_offset = Some(parse(key, v)?),
            "amplitude" => o.amplitude = Some(parse(key, v)?),
            "seed" => o.seed = Some(parse(key, v)?),
            "out" => o.out = Some(PathBuf::from(v)),
            "mode" => o.mode = Some(v.to_string()),
            "perturb" => o.perturb = Some(v.to_string()),
            "profile" => o.profile = Some(PathBuf::from(v)),
            other => return Err(format!("unknown key '{other}'")),
        }
    }
    Ok(o)
}

pub fn read_config(path: &Path) -> Result<Overrides, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_merges() {
        let file = parse_config("# run\nd = 7\np=5\nN = 48\ndt-factor = 0.25 # half\nmode = full\n").unwrap();
        let flags = Overrides {
            n: Some(32),
            ..Overrides::default()
        };
        let cfg = ExperimentConfig::resolve(Command::Evolve, flags.over(file)).unwrap();
        assert_eq!((cfg.d, cfg.p, cfg.n, cfg.dt_factor), (7, 5.0, 32, 0.25));
        assert_eq!(cfg.perturb, Perturbation::None);
        assert_eq!(cfg.stem(), "evolve_d7_p5_n32_s7");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_config("d 5").is_err());
        assert!(parse_config("colour = red").is_err());
        assert!(parse_config("d = five").is_err());
        assert!(parse_config("d = 5\nd = 7").is_err());
        let bad = Overrides {
            delta: Some(2.0),
            ..Overrides::default()
        };
        assert!(ExperimentConfig::resolve(Command::Rates, bad).is_err());
        let bad = Overrides {
            dt_factor: Some(1.5),
            ..Overrides::default()
        };
        assert!(ExperimentConfig::resolve(Command::Evolve, bad).is_err());
        let bad = Overrides {
            p: Some(5.0),
            mode: Some("lower_regularity".into()),
            ..Overrides::default()
        };
        assert!(ExperimentConfig::resolve(Command::Rates, bad).is_err());
    }

    #[test]
    fn rates_default_to_gaussian_data() {
        let cfg = ExperimentConfig::resolve(Command::Rates, Overrides::default()).unwrap();
        assert_eq!(cfg.perturb, Perturbation::Gaussian);
        assert_eq!(cfg.n, 32);
    }
}
