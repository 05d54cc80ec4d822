//! Flat key=value experiment configuration.
//!
//! One `key = value` pair per line, `#` comments, section prefixes in the
//! key (e.g. `recon.inner_iters = 30`). Unknown keys are rejected so typos
//! cannot silently change an experiment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use ptycho_core::scan::ScanKind;
use ptycho_core::synth::ObjectKind;
use ptycho_core::{Boundary, Error, GridGeometry, Result, ScanPattern};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SourceSpec {
    /// Synthesized from a named family and a seed.
    Synthetic { kind: String, seed: u64 },
    /// Loaded from a PTYC file.
    File(PathBuf),
}

#[derive(Clone, Debug)]
pub enum DeltaSpec {
    /// i.i.d. uniform on `[-bound, bound]` with a seed.
    Uniform { bound: i64, seed: u64 },
    /// Explicit tables.
    Explicit {
        delta1: Vec<i64>,
        delta2: Vec<i64>,
    },
}

#[derive(Clone, Debug)]
pub struct PatternSpec {
    pub kind: ScanKind,
    pub tau: usize,
    pub delta: Option<DeltaSpec>,
}

#[derive(Clone, Debug)]
pub struct ReconSpec {
    pub max_epochs: usize,
    pub inner_iters: usize,
    pub tol_data: f64,
    pub enforce_boundary: bool,
    pub seed: u64,
    pub pinv_guard: f64,
    pub re_window: Option<i64>,
    pub init_margin: f64,
    /// Exit with a numeric-failure code when the tolerance is not reached.
    pub require_tol: bool,
}

#[derive(Clone, Debug)]
pub struct AmbiguitySpec {
    pub class: String,
    pub c: f64,
    pub a: f64,
    pub b: f64,
    /// Affine slope in integer multiples of 2*pi/n per axis.
    pub w_units: (i64, i64),
    pub theta00: f64,
    /// Block-phase slope in integer multiples of 2*pi/q per axis.
    pub r_units: (i64, i64),
    /// `zero`, `constant:<radians>`, or `random`.
    pub psi: String,
    pub psi_seed: u64,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub boundary: Boundary,
    pub pattern: PatternSpec,
    pub object: SourceSpec,
    pub probe: SourceSpec,
    pub os: usize,
    pub recon: ReconSpec,
    pub ambiguity: AmbiguitySpec,
    pub out_dir: PathBuf,
}

fn parse_map(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Parse(format!("line {}: expected key = value, got {raw:?}", lineno + 1))
        })?;
        let key = key.trim().to_string();
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Parse(format!("duplicate key {key:?}")));
        }
    }
    Ok(map)
}

struct Fields {
    map: BTreeMap<String, String>,
    used: std::cell::RefCell<std::collections::BTreeSet<String>>,
}

impl Fields {
    fn get(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_string());
        self.map.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Parse(format!("bad value for {key}: {s:?}"))),
        }
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.parsed(key)?
            .ok_or_else(|| Error::Parse(format!("missing required key {key}")))
    }

    fn or_default<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    fn unknown_keys(&self) -> Vec<String> {
        let used = self.used.borrow();
        self.map
            .keys()
            .filter(|k| !used.contains(*k))
            .cloned()
            .collect()
    }
}

fn parse_i64_list(s: &str) -> Result<Vec<i64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<i64>()
                .map_err(|_| Error::Parse(format!("bad integer list entry {v:?}")))
        })
        .collect()
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn from_str(text: &str) -> Result<Self> {
        let fields = Fields {
            map: parse_map(text)?,
            used: Default::default(),
        };

        let n: usize = fields.required("geom.n")?;
        let m: usize = fields.required("geom.m")?;
        let boundary = match fields.get("geom.boundary").unwrap_or("periodic") {
            "periodic" => Boundary::Periodic,
            "dark" => Boundary::Dark,
            "bright" => Boundary::Bright(Complex64::new(
                fields.or_default("geom.bright_re", 100.0)?,
                fields.or_default("geom.bright_im", 0.0)?,
            )),
            other => return Err(Error::Parse(format!("bad geom.boundary {other:?}"))),
        };
        // Touch the bright fields so they are not flagged when unused.
        let _ = fields.get("geom.bright_re");
        let _ = fields.get("geom.bright_im");

        let kind = match fields.get("pattern.kind").unwrap_or("raster") {
            "raster" => ScanKind::Raster,
            "perturbed_separable" => ScanKind::PerturbedSeparable,
            "perturbed_full" => ScanKind::PerturbedFull,
            other => return Err(Error::Parse(format!("bad pattern.kind {other:?}"))),
        };
        let tau: usize = fields.required("pattern.tau")?;
        let delta = if kind == ScanKind::Raster {
            None
        } else {
            match fields.get("pattern.delta").unwrap_or("uniform") {
                "uniform" => Some(DeltaSpec::Uniform {
                    bound: fields.or_default("pattern.delta_bound", 2)?,
                    seed: fields.or_default("pattern.delta_seed", 0)?,
                }),
                "explicit" => Some(DeltaSpec::Explicit {
                    delta1: parse_i64_list(&fields.required::<String>("pattern.delta1")?)?,
                    delta2: parse_i64_list(&fields.required::<String>("pattern.delta2")?)?,
                }),
                other => return Err(Error::Parse(format!("bad pattern.delta {other:?}"))),
            }
        };

        let source = |prefix: &str, default_kind: &str| -> Result<SourceSpec> {
            let kind = fields
                .get(&format!("{prefix}.kind"))
                .unwrap_or(default_kind)
                .to_string();
            if kind == "file" {
                let path: String = fields.required(&format!("{prefix}.path"))?;
                Ok(SourceSpec::File(PathBuf::from(path)))
            } else {
                Ok(SourceSpec::Synthetic {
                    kind,
                    seed: fields.or_default(&format!("{prefix}.seed"), 0)?,
                })
            }
        };
        let object = source("object", "cib_like")?;
        let probe = source("probe", "random_phase")?;
        let _ = fields.get("object.path");
        let _ = fields.get("probe.path");
        let _ = fields.get("object.seed");
        let _ = fields.get("probe.seed");

        if let SourceSpec::Synthetic { kind, .. } = &object {
            ObjectKind::parse(kind)?;
        }
        if let SourceSpec::Synthetic { kind, .. } = &probe {
            if kind != "random_phase" {
                return Err(Error::Parse(format!("bad probe.kind {kind:?}")));
            }
        }

        let recon = ReconSpec {
            max_epochs: fields.or_default("recon.max_epochs", 200)?,
            inner_iters: fields.or_default("recon.inner_iters", 30)?,
            tol_data: fields.or_default("recon.tol_data", 1e-10)?,
            enforce_boundary: fields.or_default("recon.enforce_boundary", true)?,
            seed: fields.or_default("recon.seed", 0)?,
            pinv_guard: fields.or_default("recon.pinv_guard", 1e-8)?,
            re_window: fields.parsed("recon.re_window")?,
            init_margin: fields.or_default("recon.init_margin", 0.05)?,
            require_tol: fields.or_default("recon.require_tol", false)?,
        };

        let ambiguity = AmbiguitySpec {
            class: fields.get("ambiguity.class").unwrap_or("scaling").to_string(),
            c: fields.or_default("ambiguity.c", 1.0)?,
            a: fields.or_default("ambiguity.a", 0.0)?,
            b: fields.or_default("ambiguity.b", 0.0)?,
            w_units: (
                fields.or_default("ambiguity.w1_units", 0)?,
                fields.or_default("ambiguity.w2_units", 0)?,
            ),
            theta00: fields.or_default("ambiguity.theta00", 0.0)?,
            r_units: (
                fields.or_default("ambiguity.r1_units", 0)?,
                fields.or_default("ambiguity.r2_units", 0)?,
            ),
            psi: fields.get("ambiguity.psi").unwrap_or("random").to_string(),
            psi_seed: fields.or_default("ambiguity.psi_seed", 0)?,
        };

        let out_dir = PathBuf::from(fields.get("out.dir").unwrap_or("out").to_string());
        let os: usize = fields.or_default("os", 2)?;

        let unknown = fields.unknown_keys();
        if !unknown.is_empty() {
            return Err(Error::Parse(format!("unknown config keys: {unknown:?}")));
        }

        let cfg = Self {
            n,
            m,
            boundary,
            pattern: PatternSpec { kind, tau, delta },
            object,
            probe,
            os,
            recon,
            ambiguity,
            out_dir,
        };
        cfg.geometry()?; // validate early
        Ok(cfg)
    }

    pub fn geometry(&self) -> Result<GridGeometry> {
        GridGeometry::new(self.n, self.m, self.boundary)
    }

    pub fn build_pattern(&self) -> Result<ScanPattern> {
        let (n, tau) = (self.n, self.pattern.tau);
        match (&self.pattern.kind, &self.pattern.delta) {
            (ScanKind::Raster, _) => ScanPattern::raster(n, tau),
            (ScanKind::PerturbedSeparable, Some(DeltaSpec::Uniform { bound, seed })) => {
                ScanPattern::uniform_separable(n, tau, *bound, *seed)
            }
            (ScanKind::PerturbedSeparable, Some(DeltaSpec::Explicit { delta1, delta2 })) => {
                ScanPattern::perturbed_separable(n, tau, delta1, delta2)
            }
            (ScanKind::PerturbedFull, Some(DeltaSpec::Uniform { bound, seed })) => {
                ScanPattern::uniform_full(n, tau, *bound, *seed)
            }
            (ScanKind::PerturbedFull, Some(DeltaSpec::Explicit { delta1, delta2 })) => {
                ScanPattern::perturbed_full(n, tau, delta1, delta2)
            }
            (_, None) => Err(Error::Parse("perturbed pattern needs pattern.delta".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "
        geom.n = 16
        geom.m = 8
        pattern.kind = perturbed_separable
        pattern.tau = 4
        pattern.delta = uniform
        pattern.delta_bound = 1
        pattern.delta_seed = 7
        object.kind = cib_like
        object.seed = 1
        probe.kind = random_phase
        probe.seed = 2
        os = 2
        out.dir = out
    ";

    #[test]
    fn parses_and_builds() {
        let cfg = ExperimentConfig::from_str(BASE).unwrap();
        assert_eq!(cfg.n, 16);
        assert_eq!(cfg.os, 2);
        let pat = cfg.build_pattern().unwrap();
        assert_eq!(pat.q(), 4);
        assert_eq!(cfg.recon.inner_iters, 30);
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = format!("{BASE}\nrecon.inner_itres = 10\n");
        let err = ExperimentConfig::from_str(&text).unwrap_err();
        assert!(err.to_string().contains("unknown config keys"));
    }

    #[test]
    fn explicit_tables() {
        let text = "
            geom.n = 8
            geom.m = 4
            pattern.kind = perturbed_separable
            pattern.tau = 2
            pattern.delta = explicit
            pattern.delta1 = 0,0,-1,0
            pattern.delta2 = 0,0,-1,0
        ";
        let cfg = ExperimentConfig::from_str(text).unwrap();
        let pat = cfg.build_pattern().unwrap();
        assert_eq!(pat.shift(2, 0), (3, 0));
    }

    #[test]
    fn bright_boundary_value() {
        let text = "
            geom.n = 8
            geom.m = 4
            geom.boundary = bright
            geom.bright_re = 50
            pattern.tau = 2
        ";
        let cfg = ExperimentConfig::from_str(text).unwrap();
        match cfg.boundary {
            Boundary::Bright(v) => assert_eq!(v, Complex64::new(50.0, 0.0)),
            other => panic!("expected bright, got {other:?}"),
        }
    }
}
