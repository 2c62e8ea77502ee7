//! Flat key-value run configuration with named presets and field-level
//! error reporting. Every key can also be overridden from the command line.

use asbm::bath::{CouplingCase, ModelSpec};
use asbm::solver::SolverConfig;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug)]
pub struct ConfigError {
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(message: String) -> Result<T, ConfigError> {
    Err(ConfigError { message })
}

/// Model plus solver settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: ModelSpec,
    pub solver: SolverConfig,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            spec: ModelSpec::canonical(CouplingCase::Diagonal, 0.05, 0.02),
            solver: SolverConfig::default(),
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn fingerprint(&self) -> String {
        format!(
            "{}-{}",
            self.spec.fingerprint(),
            self.solver.fingerprint()
        )
    }

    /// Canonical flat rendering, also used for manifests.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "case = {}", self.spec.coupling.name());
        if let CouplingCase::General { w_lambda, w_gamma } = self.spec.coupling {
            let _ = writeln!(out, "w_lambda = {w_lambda}");
            let _ = writeln!(out, "w_gamma = {w_gamma}");
        }
        let _ = writeln!(out, "s = {}", self.spec.s);
        let _ = writeln!(out, "alpha = {}", self.spec.alpha);
        let _ = writeln!(out, "delta = {}", self.spec.delta);
        let _ = writeln!(out, "epsilon = {}", self.spec.epsilon);
        let _ = writeln!(out, "omega_c = {}", self.spec.omega_c);
        let _ = writeln!(out, "lambda = {}", self.spec.lambda_grid);
        let _ = writeln!(out, "modes = {}", self.spec.num_modes);
        let _ = writeln!(out, "multiplicity = {}", self.solver.multiplicity);
        let _ = writeln!(out, "restarts = {}", self.solver.restarts);
        let _ = writeln!(out, "max_sweeps = {}", self.solver.max_sweeps);
        let _ = writeln!(out, "relaxation_start = {}", self.solver.relaxation_start);
        let _ = writeln!(out, "relaxation_end = {}", self.solver.relaxation_end);
        let _ = writeln!(out, "anneal_factor = {}", self.solver.anneal_factor);
        let _ = writeln!(out, "energy_tolerance = {}", self.solver.energy_tolerance);
        let _ = writeln!(out, "stage_tolerance = {}", self.solver.stage_tolerance);
        let _ = writeln!(out, "parameter_tolerance = {}", self.solver.parameter_tolerance);
        let _ = writeln!(out, "window = {}", self.solver.window);
        let _ = writeln!(out, "seed = {}", self.solver.seed);
        let _ = writeln!(out, "init_scale = {}", self.solver.init_scale);
        let _ = writeln!(out, "real_restricted = {}", self.solver.real_restricted);
        let _ = writeln!(out, "threads = {}", self.threads);
        out
    }
}

/// Apply a named preset to an already-loaded configuration.
pub fn apply_named_preset(config: &mut RunConfig, name: &str) -> Result<(), ConfigError> {
    apply_preset(config, name, 0)
}

fn apply_preset(config: &mut RunConfig, name: &str, line: usize) -> Result<(), ConfigError> {
    match name {
        // Canonical bath settings used throughout: s = 0.3, Lambda = 1.05,
        // M = 430, zero bias, unit cutoff.
        "canonical" => {
            config.spec.s = 0.3;
            config.spec.lambda_grid = 1.05;
            config.spec.num_modes = 430;
            config.spec.epsilon = 0.0;
            config.spec.omega_c = 1.0;
            Ok(())
        }
        // Small bath for smoke tests.
        "quick" => {
            config.spec.s = 0.3;
            config.spec.lambda_grid = 1.5;
            config.spec.num_modes = 12;
            config.spec.epsilon = 0.0;
            config.spec.omega_c = 1.0;
            config.solver.multiplicity = 2;
            config.solver.restarts = 8;
            config.solver.energy_tolerance = 1e-9;
            Ok(())
        }
        other => err(format!("line {line}: unknown preset '{other}'")),
    }
}

pub fn parse_case(value: &str) -> Result<CouplingCase, String> {
    match value.to_ascii_lowercase().as_str() {
        "diagonal" => Ok(CouplingCase::Diagonal),
        "offdiagonal" | "off-diagonal" => Ok(CouplingCase::OffDiagonal),
        "rw" | "rotating_wave" | "rotating-wave" => Ok(CouplingCase::RotatingWave),
        "crw" | "counter_rotating_wave" | "counter-rotating-wave" => {
            Ok(CouplingCase::CounterRotatingWave)
        }
        "general" => Ok(CouplingCase::General { w_lambda: 0.5, w_gamma: 0.5 }),
        other => Err(format!(
            "expected one of diagonal|offdiagonal|rw|crw|general, got '{other}'"
        )),
    }
}

/// Parse flat `key = value` text into a run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut config = RunConfig::default();
    // General-case weights may arrive before or after `case = general`.
    let mut w_lambda: Option<f64> = None;
    let mut w_gamma: Option<f64> = None;

    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return err(format!("line {line}: expected 'key = value', got '{content}'"));
        };
        let key = key.trim();
        let value = value.trim();
        let bad = |what: &str| -> ConfigError {
            ConfigError {
                message: format!("line {line}: '{key}' expects {what}, got '{value}'"),
            }
        };
        let as_f64 = || -> Result<f64, ConfigError> {
            value.parse::<f64>().map_err(|_| bad("a number"))
        };
        let as_usize = || -> Result<usize, ConfigError> {
            value.parse::<usize>().map_err(|_| bad("a non-negative integer"))
        };
        match key {
            "preset" => apply_preset(&mut config, value, line)?,
            "case" => {
                config.spec.coupling = parse_case(value).map_err(|m| ConfigError {
                    message: format!("line {line}: {m}"),
                })?;
            }
            "w_lambda" => w_lambda = Some(as_f64()?),
            "w_gamma" => w_gamma = Some(as_f64()?),
            "s" => config.spec.s = as_f64()?,
            "alpha" => config.spec.alpha = as_f64()?,
            "delta" => config.spec.delta = as_f64()?,
            "epsilon" => config.spec.epsilon = as_f64()?,
            "omega_c" => config.spec.omega_c = as_f64()?,
            "lambda" => config.spec.lambda_grid = as_f64()?,
            "modes" => {
                let m = as_usize()?;
                if m == 0 {
                    return err(format!("line {line}: 'modes' must be a positive integer"));
                }
                config.spec.num_modes = m;
            }
            "multiplicity" => config.solver.multiplicity = as_usize()?,
            "restarts" => config.solver.restarts = as_usize()?,
            "max_sweeps" => config.solver.max_sweeps = as_usize()?,
            "relaxation_start" => config.solver.relaxation_start = as_f64()?,
            "relaxation_end" => config.solver.relaxation_end = as_f64()?,
            "anneal_factor" => config.solver.anneal_factor = as_f64()?,
            "energy_tolerance" => config.solver.energy_tolerance = as_f64()?,
            "stage_tolerance" => config.solver.stage_tolerance = as_f64()?,
            "parameter_tolerance" => config.solver.parameter_tolerance = as_f64()?,
            "window" => config.solver.window = as_usize()?,
            "seed" => {
                config.solver.seed = value.parse::<u64>().map_err(|_| bad("a 64-bit seed"))?
            }
            "init_scale" => config.solver.init_scale = as_f64()?,
            "real_restricted" => {
                config.solver.real_restricted =
                    value.parse::<bool>().map_err(|_| bad("true or false"))?
            }
            "threads" => config.threads = as_usize()?,
            other => return err(format!("line {line}: unknown key '{other}'")),
        }
    }

    if let (Some(wl), Some(wg)) = (w_lambda, w_gamma) {
        config.spec.coupling = CouplingCase::General { w_lambda: wl, w_gamma: wg };
    } else if w_lambda.is_some() || w_gamma.is_some() {
        return err("w_lambda and w_gamma must be given together".into());
    }
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config(&text)
}

/// Validate the final configuration, wrapping field-level messages.
pub fn validate(config: &RunConfig) -> Result<(), ConfigError> {
    config.spec.validate().map_err(|e| ConfigError { message: e.to_string() })?;
    config.solver.validate().map_err(|e| ConfigError { message: e.to_string() })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_keys_and_preset() {
        let text = "\
# comment
preset = canonical
case = rw
alpha = 0.01   # inline comment
delta = 0.1
multiplicity = 4
restarts = 16
seed = 99
";
        let config = parse_config(text).unwrap();
        assert_eq!(config.spec.num_modes, 430);
        assert_eq!(config.spec.lambda_grid, 1.05);
        assert_eq!(config.spec.coupling, CouplingCase::RotatingWave);
        assert_eq!(config.spec.alpha, 0.01);
        assert_eq!(config.solver.multiplicity, 4);
        assert_eq!(config.solver.seed, 99);
    }

    #[test]
    fn reports_field_level_errors() {
        let e = parse_config("modes = abc\n").unwrap_err();
        assert!(e.message.contains("line 1"), "{}", e.message);
        assert!(e.message.contains("modes"), "{}", e.message);
        let e = parse_config("case = banana\n").unwrap_err();
        assert!(e.message.contains("banana"));
        let e = parse_config("frobnicate = 1\n").unwrap_err();
        assert!(e.message.contains("unknown key"));
        let e = parse_config("w_lambda = 0.3\n").unwrap_err();
        assert!(e.message.contains("together"));
    }

    #[test]
    fn general_weights_build_general_case() {
        let config = parse_config("case = general\nw_lambda = 0.25\nw_gamma = -0.75\n").unwrap();
        assert_eq!(
            config.spec.coupling,
            CouplingCase::General { w_lambda: 0.25, w_gamma: -0.75 }
        );
    }

    #[test]
    fn render_roundtrips() {
        let mut config = RunConfig::default();
        config.spec.alpha = 0.0123;
        config.solver.restarts = 7;
        let text = config.render();
        let parsed = parse_config(&text).unwrap();
        assert_eq!(parsed, config);
    }
}
