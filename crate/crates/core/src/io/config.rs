//! Plain `key = value` run configuration.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::grid::Grid;
use crate::params::{Regime, SimParams};

use super::presets::Preset;
use super::{IoError, IoResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Mms,
    Stability,
    Fb,
    Check,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Run => "run",
            Mode::Mms => "mms",
            Mode::Stability => "stability",
            Mode::Fb => "fb",
            Mode::Check => "check",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "run" => Ok(Mode::Run),
            "mms" => Ok(Mode::Mms),
            "stability" => Ok(Mode::Stability),
            "fb" => Ok(Mode::Fb),
            "check" => Ok(Mode::Check),
            other => Err(format!("unknown mode '{other}'")),
        }
    }
}

/// Where the initial state comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    Preset(Preset),
    Snapshot(PathBuf),
}

impl fmt::Display for Initial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Initial::Preset(p) => write!(f, "{p}"),
            Initial::Snapshot(path) => write!(f, "snapshot:{}", path.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SimParams,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub mode: Mode,
    pub initial: Initial,
    /// Amplitude of the preset's perturbation.
    pub amplitude: f64,
    pub seed: u64,
    /// Scale of a seeded random surface perturbation added to the preset.
    pub perturbation: f64,
    /// Scale of the state-b perturbation in stability mode.
    pub stability_scale: f64,
    /// Step count; when absent, round(t_end / dt).
    pub steps: Option<usize>,
    /// Snapshot cadence in steps; 0 writes only the final state.
    pub snapshot_every: usize,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn defaults(regime: Regime) -> RunConfig {
        RunConfig {
            params: SimParams::new(regime),
            nx: 32,
            ny: 32,
            nz: 9,
            mode: if regime == Regime::FreeBoundary { Mode::Fb } else { Mode::Run },
            initial: Initial::Preset(Preset::for_regime(regime)),
            amplitude: 0.1,
            seed: 0,
            perturbation: 0.0,
            stability_scale: 1e-2,
            steps: None,
            snapshot_every: 0,
            output_dir: PathBuf::from("out"),
        }
    }

    pub fn grid(&self) -> crate::error::Result<Grid> {
        Grid::new(self.nx, self.ny, self.nz)
    }

    pub fn step_count(&self) -> usize {
        self.steps
            .unwrap_or_else(|| (self.params.t_end / self.params.dt).round() as usize)
    }
}

const KEYS: &[&str] = &[
    "regime",
    "mode",
    "nx",
    "ny",
    "nz",
    "mu",
    "lambda",
    "gamma",
    "g",
    "dt",
    "t_end",
    "picard_tol",
    "picard_max_iter",
    "iota",
    "rho_floor",
    "initial",
    "amplitude",
    "seed",
    "perturbation",
    "stability_scale",
    "steps",
    "snapshot_every",
    "output_dir",
];

fn value<T: FromStr>(line: usize, key: &str, raw: &str, what: &str) -> IoResult<T> {
    raw.parse().map_err(|_| IoError::ConfigLine {
        line,
        message: format!("{key} expects {what}, got '{raw}'"),
    })
}

/// Parses and validates a configuration; the first problem is reported with its line.
pub fn parse_config(text: &str) -> IoResult<RunConfig> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(IoError::ConfigLine {
                line,
                message: format!("expected 'key = value', got '{content}'"),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(IoError::ConfigLine {
                line,
                message: format!("unknown key '{k}'"),
            });
        }
        if let Some(first) = seen.insert(k.to_string(), line) {
            return Err(IoError::ConfigLine {
                line,
                message: format!("duplicate key '{k}' (first set on line {first})"),
            });
        }
        entries.push((line, k.to_string(), v.to_string()));
    }

    let Some((rline, _, rval)) = entries.iter().find(|(_, k, _)| k == "regime") else {
        return Err(IoError::Config("regime missing".into()));
    };
    let regime: Regime = rval.parse().map_err(|e: crate::error::Error| IoError::ConfigLine {
        line: *rline,
        message: e.to_string(),
    })?;
    let mut cfg = RunConfig::defaults(regime);
    for (line, key, raw) in &entries {
        let (line, raw) = (*line, raw.as_str());
        let p = &mut cfg.params;
        match key.as_str() {
            "regime" => {}
            "mode" => cfg.mode = raw.parse().map_err(|m| IoError::ConfigLine { line, message: m })?,
            "nx" => cfg.nx = value(line, key, raw, "an integer")?,
            "ny" => cfg.ny = value(line, key, raw, "an integer")?,
            "nz" => cfg.nz = value(line, key, raw, "an integer")?,
            "mu" => p.mu = value(line, key, raw, "a number")?,
            "lambda" => p.lambda = value(line, key, raw, "a number")?,
            "gamma" => p.gamma = value(line, key, raw, "a number")?,
            "g" => p.g = value(line, key, raw, "a number")?,
            "dt" => p.dt = value(line, key, raw, "a number")?,
            "t_end" => p.t_end = value(line, key, raw, "a number")?,
            "picard_tol" => p.picard_tol = value(line, key, raw, "a number")?,
            "picard_max_iter" => p.picard_max_iter = value(line, key, raw, "an integer")?,
            "iota" => p.iota = value(line, key, raw, "a number")?,
            "rho_floor" => p.rho_floor = value(line, key, raw, "a number")?,
            "initial" => {
                cfg.initial = match raw.strip_prefix("snapshot:") {
                    Some(path) if !path.trim().is_empty() => Initial::Snapshot(PathBuf::from(path.trim())),
                    Some(_) => {
                        return Err(IoError::ConfigLine {
                            line,
                            message: "initial = snapshot: needs a path".into(),
                        })
                    }
                    None => Initial::Preset(raw.parse().map_err(|e: crate::error::Error| {
                        IoError::ConfigLine {
                            line,
                            message: e.to_string(),
                        }
                    })?),
                }
            }
            "amplitude" => cfg.amplitude = value(line, key, raw, "a number")?,
            "seed" => cfg.seed = value(line, key, raw, "a non-negative integer")?,
            "perturbation" => cfg.perturbation = value(line, key, raw, "a number")?,
            "stability_scale" => cfg.stability_scale = value(line, key, raw, "a number")?,
            "steps" => cfg.steps = Some(value(line, key, raw, "a non-negative integer")?),
            "snapshot_every" => cfg.snapshot_every = value(line, key, raw, "a non-negative integer")?,
            "output_dir" => {
                if raw.is_empty() {
                    return Err(IoError::ConfigLine {
                        line,
                        message: "output_dir is empty".into(),
                    });
                }
                cfg.output_dir = PathBuf::from(raw)
            }
            _ => unreachable!("key list and match arms agree"),
        }
    }
    validate(&cfg, &seen)?;
    Ok(cfg)
}

/// Line of the first key named in a constraint message, preferring keys
/// other than the regime.
fn locate(message: &str, seen: &HashMap<String, usize>) -> Option<usize> {
    let words: Vec<&str> = message
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| KEYS.contains(w))
        .collect();
    words
        .iter()
        .filter(|w| **w != "regime")
        .chain(words.iter())
        .find_map(|w| seen.get(*w).copied())
}

fn validate(cfg: &RunConfig, seen: &HashMap<String, usize>) -> IoResult<()> {
    let fail = |message: String| match locate(&message, seen) {
        Some(line) => IoError::ConfigLine { line, message },
        None => IoError::Config(message),
    };
    if let Err(e) = cfg.params.validate() {
        return Err(fail(e.to_string()));
    }
    if let Err(e) = cfg.grid() {
        return Err(fail(format!("{e} (keys nx, ny, nz)")));
    }
    let regime = cfg.params.regime;
    if let Initial::Preset(p) = cfg.initial {
        if !p.supports(regime) {
            return Err(fail(format!("initial preset {p} does not apply to regime {regime}")));
        }
    }
    match (cfg.mode, regime) {
        (Mode::Fb, Regime::FreeBoundary) => {}
        (Mode::Fb, _) => return Err(fail("mode fb needs regime free_boundary".into())),
        (Mode::Run | Mode::Stability | Mode::Mms, Regime::FreeBoundary) => {
            return Err(fail(format!("mode {} needs a viscous regime", cfg.mode)))
        }
        _ => {}
    }
    for (name, v) in [
        ("amplitude", cfg.amplitude),
        ("perturbation", cfg.perturbation),
        ("stability_scale", cfg.stability_scale),
    ] {
        if !v.is_finite() {
            return Err(fail(format!("{name} must be finite")));
        }
    }
    Ok(())
}

/// Writes every key explicitly; `parse_config` of the output reproduces `cfg`.
pub fn emit_config(cfg: &RunConfig) -> String {
    let p = &cfg.params;
    let mut out = String::new();
    let mut put = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    put("regime", p.regime.to_string());
    put("mode", cfg.mode.to_string());
    put("nx", cfg.nx.to_string());
    put("ny", cfg.ny.to_string());
    put("nz", cfg.nz.to_string());
    put("mu", format!("{:?}", p.mu));
    put("lambda", format!("{:?}", p.lambda));
    put("gamma", format!("{:?}", p.gamma));
    put("g", format!("{:?}", p.g));
    put("dt", format!("{:?}", p.dt));
    put("t_end", format!("{:?}", p.t_end));
    put("picard_tol", format!("{:?}", p.picard_tol));
    put("picard_max_iter", p.picard_max_iter.to_string());
    put("iota", format!("{:?}", p.iota));
    put("rho_floor", format!("{:?}", p.rho_floor));
    put("initial", cfg.initial.to_string());
    put("amplitude", format!("{:?}", cfg.amplitude));
    put("seed", cfg.seed.to_string());
    put("perturbation", format!("{:?}", cfg.perturbation));
    put("stability_scale", format!("{:?}", cfg.stability_scale));
    if let Some(s) = cfg.steps {
        put("steps", s.to_string());
    }
    put("snapshot_every", cfg.snapshot_every.to_string());
    put("output_dir", cfg.output_dir.display().to_string());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_file_needs_regime() {
        let err = parse_config("").unwrap_err().to_string();
        assert!(err.contains("regime missing"), "{err}");
        let err = parse_config("# only a comment\n\n").unwrap_err().to_string();
        assert!(err.contains("regime missing"));
    }

    #[test]
    fn gravity_rejects_general_gamma_with_location() {
        let err = parse_config("regime = gravity_gamma2\n\ngamma = 1.4\n").unwrap_err();
        match err {
            IoError::ConfigLine { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("gamma = 2"), "{message}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_keys_and_type_errors_carry_lines() {
        let err = parse_config("regime = vacuum\nviscosity = 1\n").unwrap_err().to_string();
        assert!(err.starts_with("config line 2") && err.contains("viscosity"), "{err}");
        let err = parse_config("regime = vacuum\nnx = many\n").unwrap_err().to_string();
        assert!(err.starts_with("config line 2") && err.contains("integer"), "{err}");
        let err = parse_config("regime = vacuum\nmu = 1\nmu = 2\n").unwrap_err().to_string();
        assert!(err.contains("duplicate"), "{err}");
        let err = parse_config("regime = vacuum\nnx 3\n").unwrap_err().to_string();
        assert!(err.contains("key = value"), "{err}");
        let err = parse_config("regime = vacuum\nnx = 6\nny = 7\n").unwrap_err().to_string();
        assert!(err.starts_with("config line 2"), "{err}");
    }

    #[test]
    fn comments_and_defaults() {
        let cfg = parse_config("# run\nregime = gravity_gamma2   # trailing\nsteps = 5\n").unwrap();
        assert_eq!(cfg.params, SimParams::new(Regime::GravityGamma2));
        assert_eq!(cfg.step_count(), 5);
        assert_eq!(cfg.initial, Initial::Preset(Preset::ShearWave));
        let cfg = parse_config("regime = free_boundary\n").unwrap();
        assert_eq!(cfg.mode, Mode::Fb);
    }

    #[test]
    fn mode_and_preset_must_fit_regime() {
        assert!(parse_config("regime = gravity\nmode = fb\n").is_err());
        assert!(parse_config("regime = gravity\ninitial = fb_bump\n").is_err());
        assert!(parse_config("regime = fb\nmode = run\n").is_err());
        let cfg = parse_config("regime = gravity\ninitial = snapshot: runs/a b.bin\n").unwrap();
        assert_eq!(cfg.initial, Initial::Snapshot(PathBuf::from("runs/a b.bin")));
    }

    #[test]
    fn full_file_round_trips() {
        let text = "regime = vacuum_no_gravity\nmode = stability\nnx = 16\nny = 8\nnz = 5\nmu = 0.7\n\
                    lambda = -0.2\ngamma = 3\ndt = 0.00025\nt_end = 0.3\npicard_tol = 1e-11\n\
                    picard_max_iter = 12\niota = 0.01\nrho_floor = 0\ninitial = rest\namplitude = 0.05\n\
                    seed = 42\nperturbation = 0.001\nstability_scale = 0.003\nsteps = 17\n\
                    snapshot_every = 4\noutput_dir = /tmp/x\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(parse_config(&emit_config(&cfg)).unwrap(), cfg);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn emitted_configs_reparse_identically(
            mu in 1e-3..10.0f64, lam in -1e-3..5.0f64, dt in 1e-6..1e-2f64, tol in 1e-14..1e-6f64,
            amp in -1.0..1.0f64, seed in any::<u64>(), steps in proptest::option::of(0usize..10_000),
            g in 0.0..20.0f64,
        ) {
            let mut cfg = RunConfig::defaults(Regime::GravityGamma2);
            cfg.params.mu = mu;
            cfg.params.lambda = lam;
            cfg.params.dt = dt;
            cfg.params.picard_tol = tol;
            cfg.params.g = g;
            cfg.amplitude = amp;
            cfg.seed = seed;
            cfg.steps = steps;
            prop_assert_eq!(parse_config(&emit_config(&cfg)).unwrap(), cfg);
        }
    }
}
