//! Run configuration: a flat key=value file merged with command-line flag
//! overrides (flags win), validated into a [`RunConfig`].

use std::collections::BTreeMap;
use std::path::PathBuf;

use lpcoreset_core::generators::GeneratorSpec;
use lpcoreset_core::sampling::PlanMethod;

use crate::CliError;

/// Matrix source: exactly one of a generator family or an input CSV path.
#[derive(Debug, Clone)]
pub enum Source {
    Generator(GeneratorSpec),
    Input(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaChoice {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    Sensitivities,
    Uniform,
    SensLev,
}

impl std::str::FromStr for TransformKind {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "sens" | "sensitivities" => Ok(TransformKind::Sensitivities),
            "uniform" => Ok(TransformKind::Uniform),
            "senslev" => Ok(TransformKind::SensLev),
            other => Err(CliError::Usage(format!("unknown transform {other:?}"))),
        }
    }
}

/// Fully resolved parameters for one command invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: Source,
    pub p: f64,
    pub eps: f64,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    pub method: PlanMethod,
    pub alpha: AlphaChoice,
    pub c: f64,
    pub transform: TransformKind,
    pub m_target: Option<usize>,
    pub eps_grid: Vec<f64>,
    pub probes: usize,
    pub restarts: usize,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Deterministic key=value echo of the resolved configuration.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        match &self.source {
            Source::Generator(g) => {
                m.insert("gen".into(), format!("{g:?}"));
            }
            Source::Input(path) => {
                m.insert("input".into(), path.display().to_string());
            }
        }
        m.insert("p".into(), format!("{}", self.p));
        m.insert("eps".into(), format!("{}", self.eps));
        m.insert("delta".into(), format!("{}", self.delta));
        m.insert("trials".into(), format!("{}", self.trials));
        m.insert("seed".into(), format!("{}", self.seed));
        m.insert("method".into(), format!("{:?}", self.method));
        if !self.eps_grid.is_empty() {
            m.insert(
                "eps_grid".into(),
                self.eps_grid
                    .iter()
                    .map(|e| e.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
        m
    }
}

/// Raw option bag before validation: every field optional so a config file
/// and flag overrides can be merged.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub items: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn from_file(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut items = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "config line {} is not key=value: {line:?}",
                    lineno + 1
                )));
            };
            items.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { items })
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.items.insert(key.to_string(), value.into());
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.items.get(key).map(|s| s.as_str())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| CliError::Usage(format!("bad value for {key}: {raw:?} ({e})"))),
        }
    }

    /// Validates the merged options into a RunConfig.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let p: f64 = self.parse("p")?.unwrap_or(2.0);
        if !(1.0..f64::INFINITY).contains(&p) {
            return Err(CliError::Usage(format!("p must satisfy 1 <= p, got {p}")));
        }
        let eps: f64 = self.parse("eps")?.unwrap_or(0.5);
        if !(eps > 0.0 && eps < 1.0) {
            return Err(CliError::Usage(format!("eps must lie in (0,1), got {eps}")));
        }
        let delta: f64 = self.parse("delta")?.unwrap_or(0.1);
        let trials: usize = self.parse("trials")?.unwrap_or(1);
        if trials < 1 {
            return Err(CliError::Usage("trials must be at least 1".into()));
        }
        let seed: u64 = self.parse("seed")?.unwrap_or(0);

        let gen_family = self.get("gen");
        let input = self.get("input");
        let source = match (gen_family, input) {
            (Some(_), Some(_)) => {
                return Err(CliError::Usage(
                    "exactly one of --gen and --input must be given, got both".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Usage(
                    "exactly one of --gen and --input must be given, got neither".into(),
                ))
            }
            (None, Some(path)) => Source::Input(PathBuf::from(path)),
            (Some(family), None) => {
                let n: usize = self
                    .parse("n")?
                    .ok_or_else(|| CliError::Usage("--gen requires --n".into()))?;
                let d: Option<usize> = self.parse("d")?;
                let k: Option<usize> = self.parse("k")?;
                let q: Option<usize> = self.parse("q")?;
                let s: Option<usize> = self.parse("s")?;
                let need_d =
                    || d.ok_or_else(|| CliError::Usage(format!("family {family} requires --d")));
                let spec = match family {
                    "gaussian" => GeneratorSpec::Gaussian { n, d: need_d()?, seed },
                    "vandermonde" => GeneratorSpec::VandermondeFeatures {
                        n,
                        k: k.ok_or_else(|| {
                            CliError::Usage("family vandermonde requires --k".into())
                        })?,
                        q: q.ok_or_else(|| {
                            CliError::Usage("family vandermonde requires --q".into())
                        })?,
                        seed,
                    },
                    "lowranksparse" => GeneratorSpec::LowRankSparse {
                        n,
                        d: need_d()?,
                        k: k.ok_or_else(|| {
                            CliError::Usage("family lowranksparse requires --k".into())
                        })?,
                        s: s.ok_or_else(|| {
                            CliError::Usage("family lowranksparse requires --s".into())
                        })?,
                        seed,
                    },
                    "perturbed" => GeneratorSpec::Perturbed { n, d: need_d()?, p, seed },
                    other => {
                        return Err(CliError::Usage(format!("unknown generator family {other:?}")))
                    }
                };
                Source::Generator(spec)
            }
        };

        let method = match self.get("method") {
            None => PlanMethod::Sensitivity,
            Some(raw) => raw
                .parse::<PlanMethod>()
                .map_err(|e| CliError::Usage(e.to_string()))?,
        };
        let alpha = match self.get("alpha") {
            None | Some("auto") => AlphaChoice::Auto,
            Some(raw) => AlphaChoice::Fixed(raw.parse::<f64>().map_err(|e| {
                CliError::Usage(format!("bad value for alpha: {raw:?} ({e})"))
            })?),
        };
        let c: f64 = self.parse("c")?.unwrap_or(4.0);
        let transform = match self.get("transform") {
            None => TransformKind::Sensitivities,
            Some(raw) => raw.parse::<TransformKind>()?,
        };
        let m_target: Option<usize> = self.parse("m_target")?;
        let eps_grid = match self.get("eps_grid") {
            None => Vec::new(),
            Some(raw) => raw
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|e| {
                        CliError::Usage(format!("bad eps_grid entry {tok:?} ({e})"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?,
        };
        let probes: usize = self.parse("probes")?.unwrap_or(256);
        let restarts: usize = self.parse("restarts")?.unwrap_or(8);
        let out = self.get("out").map(PathBuf::from);

        Ok(RunConfig {
            source,
            p,
            eps,
            delta,
            trials,
            seed,
            method,
            alpha,
            c,
            transform,
            m_target,
            eps_grid,
            probes,
            restarts,
            out,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags_flags_win() {
        let dir = std::env::temp_dir().join("lpcoreset-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.conf");
        std::fs::write(&path, "gen=gaussian\nn=10\nd=3\np=2\nseed=7\n# comment\n").unwrap();
        let mut raw = RawConfig::from_file(&path).unwrap();
        raw.set("p", "3");
        let cfg = raw.resolve().unwrap();
        assert_eq!(cfg.p, 3.0);
        assert_eq!(cfg.seed, 7);
        match cfg.source {
            Source::Generator(GeneratorSpec::Gaussian { n: 10, d: 3, seed: 7 }) => {}
            other => panic!("unexpected source {other:?}"),
        }
    }

    #[test]
    fn source_exclusivity_enforced() {
        let mut raw = RawConfig::default();
        raw.set("gen", "gaussian");
        raw.set("input", "a.csv");
        raw.set("n", "5");
        raw.set("d", "2");
        assert!(raw.resolve().is_err());

        let raw = RawConfig::default();
        assert!(raw.resolve().is_err());
    }

    #[test]
    fn eps_and_trials_validated() {
        let mut raw = RawConfig::default();
        raw.set("input", "a.csv");
        raw.set("eps", "1.5");
        assert!(raw.resolve().is_err());

        let mut raw = RawConfig::default();
        raw.set("input", "a.csv");
        raw.set("trials", "0");
        assert!(raw.resolve().is_err());
    }
}
