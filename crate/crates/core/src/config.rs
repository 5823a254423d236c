//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Float,
    /// A float or the literal `auto`.
    FloatOrAuto,
    Count,
    Seed,
    Choice(&'static [&'static str]),
    /// Comma-separated floats.
    Floats,
    Text,
}

impl Kind {
    fn describe(self) -> String {
        match self {
            Kind::Float => "a finite number".into(),
            Kind::FloatOrAuto => "a finite number or `auto`".into(),
            Kind::Count => "a non-negative integer".into(),
            Kind::Seed => "an unsigned 64-bit integer".into(),
            Kind::Choice(opts) => format!("one of {}", opts.join(", ")),
            Kind::Floats => "a comma-separated list of numbers".into(),
            Kind::Text => "text".into(),
        }
    }

    fn accepts(self, v: &str) -> bool {
        let float = |s: &str| s.trim().parse::<f64>().is_ok_and(f64::is_finite);
        match self {
            Kind::Float => float(v),
            Kind::FloatOrAuto => v == "auto" || float(v),
            Kind::Count => v.parse::<usize>().is_ok(),
            Kind::Seed => v.parse::<u64>().is_ok(),
            Kind::Choice(opts) => opts.contains(&v),
            Kind::Floats => !v.is_empty() && v.split(',').all(float),
            Kind::Text => !v.is_empty(),
        }
    }
}

const KEYS: &[(&str, Kind)] = &[
    ("kernel.family", Kind::Choice(&["indicator", "gaussian", "fractional"])),
    ("kernel.n", Kind::Choice(&["1", "2"])),
    ("kernel.delta", Kind::Float),
    ("kernel.sigma", Kind::Float),
    ("kernel.s", Kind::Float),
    ("kernel.rmin", Kind::FloatOrAuto),
    ("kernel.rmax", Kind::FloatOrAuto),
    ("kernel.c", Kind::FloatOrAuto),
    ("grid.lower", Kind::Floats),
    ("grid.upper", Kind::Floats),
    ("grid.h", Kind::Float),
    ("grid.mode", Kind::Choice(&["full_space", "regional"])),
    ("initial.kind", Kind::Choice(&["tanh", "sin", "file"])),
    ("initial.amplitude", Kind::Float),
    ("initial.rate", Kind::Float),
    ("initial.file", Kind::Text),
    ("evolve.scheme", Kind::Choice(&["euler", "rk4"])),
    ("evolve.dt", Kind::FloatOrAuto),
    ("evolve.t_end", Kind::Float),
    ("evolve.stride", Kind::Count),
    ("nonlinear.family", Kind::Choice(&["none", "tanh_p", "tanh_p_times_w"])),
    ("nonlinear.kappa", Kind::Float),
    ("nonlinear.mu", Kind::Float),
    ("nonlinear.wmax", Kind::Float),
    ("nonlinear.c", Kind::Float),
    ("nonlinear.phi_equation", Kind::Choice(&["proof", "literal"])),
    ("modulus.eps_list", Kind::Floats),
    ("modulus.tol", Kind::FloatOrAuto),
    ("modulus.phi_domain", Kind::Choice(&["auto", "full_line", "regional"])),
    ("modulus.phi_spacing", Kind::FloatOrAuto),
    ("modulus.lambda_init", Kind::Float),
    ("modulus.lambda", Kind::FloatOrAuto),
    ("modulus.pair_limit", Kind::Seed),
    ("modulus.strata", Kind::Count),
    ("modulus.samples", Kind::Count),
    ("spectral.s", Kind::Float),
    ("spectral.cn", Kind::Float),
    ("spectral.domain", Kind::Choice(&["interval", "rectangle"])),
    ("spectral.a", Kind::Float),
    ("spectral.b", Kind::Float),
    ("spectral.cells", Kind::Count),
    ("spectral.length", Kind::Float),
    ("spectral.eps", Kind::Float),
    ("spectral.cells_x", Kind::Count),
    ("spectral.cells_y", Kind::Count),
    ("spectral.lambda_cells_x", Kind::Count),
    ("spectral.lambda_cells_y", Kind::Count),
    ("spectral.lengths", Kind::Floats),
    ("spectral.trial", Kind::Choice(&["x", "y", "cos"])),
    ("spectral.k", Kind::Count),
    ("spectral.trials", Kind::Count),
    ("coupling.frames", Kind::Count),
    ("coupling.resolution", Kind::Count),
    ("coupling.shift", Kind::Float),
    ("run.seed", Kind::Seed),
];

const DEFAULTS: &[(&str, &str)] = &[
    ("kernel.rmin", "auto"),
    ("kernel.rmax", "auto"),
    ("kernel.c", "auto"),
    ("initial.amplitude", "0.9"),
    ("initial.rate", "1"),
    ("evolve.scheme", "euler"),
    ("evolve.dt", "auto"),
    ("nonlinear.family", "none"),
    ("nonlinear.kappa", "0"),
    ("nonlinear.mu", "0"),
    ("nonlinear.wmax", "1"),
    ("nonlinear.c", "1"),
    ("nonlinear.phi_equation", "proof"),
    ("modulus.eps_list", "1e-3,1e-2"),
    ("modulus.tol", "auto"),
    ("modulus.phi_domain", "auto"),
    ("modulus.phi_spacing", "auto"),
    ("modulus.lambda_init", "1"),
    ("modulus.lambda", "auto"),
    ("modulus.pair_limit", "10000000"),
    ("modulus.strata", "32"),
    ("modulus.samples", "20000"),
    ("spectral.cn", "1"),
    ("spectral.k", "4"),
    ("spectral.trials", "20"),
    ("coupling.frames", "20"),
    ("coupling.resolution", "200"),
    ("coupling.shift", "0"),
    ("run.seed", "0"),
];

/// The seven subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Evolve,
    ModulusVerify,
    SpectralRayleigh,
    SpectralLambda2,
    SpectralCounterexample,
    CouplingCheck,
    ProbeRegional2d,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Evolve,
        Command::ModulusVerify,
        Command::SpectralRayleigh,
        Command::SpectralLambda2,
        Command::SpectralCounterexample,
        Command::CouplingCheck,
        Command::ProbeRegional2d,
    ];

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::ModulusVerify => "modulus-verify",
            Command::SpectralRayleigh => "spectral-rayleigh",
            Command::SpectralLambda2 => "spectral-lambda2",
            Command::SpectralCounterexample => "spectral-counterexample",
            Command::CouplingCheck => "coupling-check",
            Command::ProbeRegional2d => "probe-regional-2d",
        }
    }

    fn sections(self) -> &'static [&'static str] {
        match self {
            Command::Evolve => &["kernel", "grid", "initial", "evolve", "nonlinear", "run"],
            Command::ModulusVerify | Command::ProbeRegional2d => {
                &["kernel", "grid", "initial", "evolve", "nonlinear", "modulus", "run"]
            }
            Command::SpectralRayleigh | Command::SpectralLambda2 | Command::SpectralCounterexample => &["spectral", "run"],
            Command::CouplingCheck => &["kernel", "coupling", "run"],
        }
    }
}

/// Validated flat key-value map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentConfig {
    values: BTreeMap<String, String>,
}

fn kind_of(key: &str) -> Option<Kind> {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, kind)| *kind)
}

fn type_error(key: &str, value: &str, kind: Kind) -> Error {
    Error::Config(format!("key `{key}` = `{value}`: expected {}", kind.describe()))
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, path)
}

/// Parses config text; `path` is only used in error messages.
pub fn parse_config_str(text: &str, path: &Path) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { path: path.to_path_buf(), line: k + 1, message };
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(format!("expected `key = value`, got `{line}`")));
        };
        let (key, value) = (key.trim(), value.trim());
        if cfg.values.contains_key(key) {
            return Err(err(format!("duplicate key `{key}`")));
        }
        cfg.set(key, value).map_err(|e| err(e.to_string()))?;
    }
    Ok(cfg)
}

impl ExperimentConfig {
    /// Sets a key after checking it is known and well-typed.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let kind = kind_of(key).ok_or_else(|| Error::Config(format!("unknown key `{key}`")))?;
        if !kind.accepts(value) {
            return Err(type_error(key, value, kind));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn raw(&self, key: &str) -> Result<&str> {
        if let Some(v) = self.values.get(key) {
            return Ok(v);
        }
        DEFAULTS
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    pub fn text(&self, key: &str) -> Result<&str> {
        self.raw(key)
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let v = self.raw(key)?;
        v.parse::<f64>().map_err(|_| type_error(key, v, Kind::Float))
    }

    /// `None` for `auto`.
    pub fn f64_or_auto(&self, key: &str) -> Result<Option<f64>> {
        match self.raw(key)? {
            "auto" => Ok(None),
            v => v.parse::<f64>().map(Some).map_err(|_| type_error(key, v, Kind::FloatOrAuto)),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let v = self.raw(key)?;
        v.parse::<usize>().map_err(|_| type_error(key, v, Kind::Count))
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        let v = self.raw(key)?;
        v.parse::<u64>().map_err(|_| type_error(key, v, Kind::Seed))
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let v = self.raw(key)?;
        v.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| type_error(key, v, Kind::Floats))).collect()
    }

    pub fn seed(&self) -> u64 {
        self.u64("run.seed").unwrap_or(0)
    }

    /// Keys the command needs that are neither set nor defaulted, taking the
    /// chosen kernel family, initial condition and spectral domain into account.
    pub fn missing_keys(&self, command: Command) -> Vec<&'static str> {
        let mut need: Vec<&'static str> = Vec::new();
        let kernel = |need: &mut Vec<&'static str>| {
            need.extend(["kernel.family", "kernel.n"]);
            match self.values.get("kernel.family").map(String::as_str) {
                Some("indicator") => need.push("kernel.delta"),
                Some("gaussian") => need.push("kernel.sigma"),
                Some("fractional") => need.push("kernel.s"),
                _ => {}
            }
        };
        match command {
            Command::Evolve | Command::ModulusVerify | Command::ProbeRegional2d => {
                kernel(&mut need);
                need.extend(["grid.lower", "grid.upper", "grid.h", "grid.mode", "initial.kind", "evolve.t_end", "evolve.stride"]);
                if self.values.get("initial.kind").map(String::as_str) == Some("file") {
                    need.push("initial.file");
                }
            }
            Command::SpectralRayleigh | Command::SpectralLambda2 => {
                need.extend(["spectral.s", "spectral.domain"]);
                match self.values.get("spectral.domain").map(String::as_str) {
                    Some("interval") => need.extend(["spectral.a", "spectral.b", "spectral.cells"]),
                    Some("rectangle") => {
                        need.extend(["spectral.length", "spectral.eps", "spectral.cells_x", "spectral.cells_y"])
                    }
                    _ => {}
                }
                if command == Command::SpectralRayleigh {
                    need.push("spectral.trial");
                }
            }
            Command::SpectralCounterexample => {
                need.extend(["spectral.s", "spectral.eps", "spectral.lengths", "spectral.cells_x", "spectral.cells_y"])
            }
            Command::CouplingCheck => kernel(&mut need),
        }
        need.into_iter().filter(|k| self.raw(k).is_err()).collect()
    }

    pub fn check_command(&self, command: Command) -> Result<()> {
        let missing = self.missing_keys(command);
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("command `{}` is missing required keys: {}", command.name(), missing.join(", "))))
        }
    }

    /// Every set key plus the defaults of the command's sections, sorted.
    pub fn effective(&self, command: Command) -> BTreeMap<String, String> {
        let mut out = self.values.clone();
        for (k, v) in DEFAULTS {
            let section = k.split('.').next().unwrap_or("");
            if command.sections().contains(&section) {
                out.entry(k.to_string()).or_insert_with(|| v.to_string());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ExperimentConfig> {
        parse_config_str(s, Path::new("test.cfg"))
    }

    #[test]
    fn parse_examples() {
        let c = parse("# kernel\nkernel.family = indicator\nkernel.delta = 0.5  # half-width\n").unwrap();
        assert_eq!(c.text("kernel.family").unwrap(), "indicator");
        assert_eq!(c.f64("kernel.delta").unwrap(), 0.5);
        assert_eq!(c.seed(), 0);
        let err = parse("kernel.family = banana").unwrap_err().to_string();
        assert!(err.contains("kernel.family") && err.contains("indicator, gaussian, fractional"), "{err}");
        let err = parse("kernel.colour = red").unwrap_err().to_string();
        assert!(err.contains("kernel.colour"), "{err}");
        let err = parse("grid.h = fast").unwrap_err().to_string();
        assert!(err.contains("grid.h") && err.contains("number"), "{err}");
        assert!(parse("grid.h 0.1").is_err());
        assert!(parse("grid.h = 0.1\ngrid.h = 0.2").is_err());
    }

    #[test]
    fn missing_keys_listed() {
        let c = parse("").unwrap();
        let err = c.check_command(Command::Evolve).unwrap_err().to_string();
        for key in ["kernel.family", "grid.h", "evolve.t_end"] {
            assert!(err.contains(key), "{err}");
        }
        let c = parse("kernel.family = gaussian\nkernel.n = 2").unwrap();
        assert_eq!(c.missing_keys(Command::CouplingCheck), vec!["kernel.sigma"]);
    }

    #[test]
    fn effective_echo_includes_defaults() {
        let c = parse("spectral.s = 0.5").unwrap();
        let e = c.effective(Command::SpectralLambda2);
        assert_eq!(e.get("spectral.cn").map(String::as_str), Some("1"));
        assert!(!e.contains_key("evolve.scheme"));
        assert_eq!(c.effective(Command::SpectralLambda2), e);
    }
}
