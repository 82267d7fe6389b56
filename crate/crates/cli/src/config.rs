//! Plain-text experiment configuration: `key = value` lines under `[section]`
//! headers. Keys before the first header belong to `[run]`. Lines starting with
//! `#` or `;` are comments.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use chaoskit::assumptions::{CheckOptions, ConfigSampler};
use chaoskit::kernels::KernelFamily;
use chaoskit::nondegen::{fit_covariance_floor, DensityOptions, Integrand};
use chaoskit::young::VectorFieldSet;
use nalgebra::DVector;

#[derive(Debug, Default)]
pub struct RawConfig {
    values: BTreeMap<(String, String), (usize, String)>,
    used: std::cell::RefCell<BTreeSet<(String, String)>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        let mut section = "run".to_string();
        for (i, line) in text.lines().enumerate() {
            let no = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| format!("config line {no}: unterminated section header"))?
                    .trim();
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(format!("config line {no}: bad section name `{name}`"));
                }
                section = name.to_ascii_lowercase();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {no}: expected `key = value`"))?;
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(format!("config line {no}: empty key"));
            }
            let k = (section.clone(), key);
            if values.contains_key(&k) {
                return Err(format!("config line {no}: duplicate key `{}.{}`", k.0, k.1));
            }
            values.insert(k, (no, value.trim().to_string()));
        }
        Ok(RawConfig {
            values,
            used: Default::default(),
        })
    }

    fn raw(&self, section: &str, key: &str) -> Option<&(usize, String)> {
        let k = (section.to_string(), key.to_string());
        self.used.borrow_mut().insert(k.clone());
        self.values.get(&k)
    }

    pub fn string(&self, section: &str, key: &str) -> Option<String> {
        self.raw(section, key).map(|v| v.1.clone())
    }

    pub fn get<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, String> {
        match self.raw(section, key) {
            None => Ok(None),
            Some((no, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| format!("config line {no}: cannot parse `{section}.{key} = {v}`")),
        }
    }

    pub fn or<T: std::str::FromStr>(&self, section: &str, key: &str, default: T) -> Result<T, String> {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn list<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>, String> {
        match self.raw(section, key) {
            None => Ok(None),
            Some((no, v)) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse()
                        .map_err(|_| format!("config line {no}: cannot parse `{s}` in `{section}.{key}`"))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    /// Keys that were never read, as `(line, "section.key")`.
    pub fn unused(&self) -> Vec<(usize, String)> {
        let used = self.used.borrow();
        self.values
            .iter()
            .filter(|(k, _)| !used.contains(*k))
            .map(|(k, v)| (v.0, format!("{}.{}", k.0, k.1)))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub enum FamilySpec {
    Fd { levels: u32, theta: f64 },
    Herm2 { levels: u32, theta: f64 },
    Rosen { hurst: f64, cells: usize },
    Blk2,
    Custom { file: PathBuf, theta: f64 },
}

#[derive(Clone, Debug)]
pub enum FloorSpec {
    None,
    Given { c: f64, eta: f64 },
    /// Largest `c` consistent with a grid of `points`, at exponent `eta`.
    Fit { eta: f64, points: usize },
}

#[derive(Clone, Debug)]
pub enum FieldSpec {
    EllipticSine(usize),
    Additive(usize),
    Affine(PathBuf),
}

pub const ALL_SUITES: [&str; 7] = [
    "energy",
    "interpolation",
    "corollary",
    "uniform",
    "nonvanishing",
    "dx_in_f",
    "norris",
];

/// `auto` or a fixed value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Auto {
    Auto,
    Value(f64),
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub family: FamilySpec,
    pub floor: FloorSpec,
    pub seed: u64,
    pub grid: usize,
    pub samples: usize,
    pub out: PathBuf,
    pub svg: bool,
    pub check: CheckSection,
    pub verify: VerifySection,
    pub sde: SdeSection,
}

#[derive(Clone, Debug)]
pub struct CheckSection {
    pub depth: u32,
    pub random: usize,
    pub regularity_points: usize,
    pub row_sum_points: usize,
    pub max_lag: f64,
    pub margin: f64,
    pub rank_tol: f64,
}

#[derive(Clone, Debug)]
pub struct VerifySection {
    pub suites: Vec<String>,
    pub integrands: Vec<Integrand>,
    pub alpha: Auto,
    pub beta: Auto,
    pub controls: usize,
    pub identity_points: usize,
    pub nu: f64,
    pub epsilons: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct SdeSection {
    pub fields: FieldSpec,
    pub y0: Option<Vec<f64>>,
    pub t: f64,
    pub ellipticity_floor: f64,
    pub spot_checks: usize,
    pub deltas: Vec<f64>,
    pub bandwidths: Vec<f64>,
    pub factor: f64,
}

fn positive(name: &str, v: f64) -> Result<f64, String> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{name} must be positive, got {v}"))
    }
}

fn parse_auto(raw: &RawConfig, section: &str, key: &str) -> Result<Auto, String> {
    match raw.string(section, key).as_deref() {
        None | Some("auto") => Ok(Auto::Auto),
        Some(_) => Ok(Auto::Value(raw.get(section, key)?.expect("present"))),
    }
}

fn relative(base: &Path, p: &str) -> PathBuf {
    let p = PathBuf::from(p);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl ExperimentConfig {
    /// Reads every known key with its default and rejects unknown ones.
    /// Relative paths in the file are taken relative to the file's directory.
    pub fn from_raw(raw: &RawConfig, base: &Path) -> Result<Self, String> {
        let name = raw
            .string("family", "name")
            .ok_or("config needs `[family] name`")?
            .to_ascii_uppercase();
        let theta = raw.get::<f64>("family", "theta")?;
        let levels = raw.or("family", "levels", 6u32)?;
        let hurst = raw.or("family", "hurst", 0.875)?;
        let cells = raw.or("family", "cells", 64usize)?;
        let file = raw.string("family", "file");
        let family = match name.as_str() {
            "FD" => FamilySpec::Fd {
                levels,
                theta: theta.unwrap_or(1.5),
            },
            "HERM2" => FamilySpec::Herm2 {
                levels,
                theta: theta.unwrap_or(1.5),
            },
            "ROSEN" => FamilySpec::Rosen { hurst, cells },
            "BLK2" => FamilySpec::Blk2,
            "CUSTOM" => FamilySpec::Custom {
                file: relative(base, &file.ok_or("CUSTOM family needs `[family] file`")?),
                theta: theta.ok_or("CUSTOM family needs `[family] theta`")?,
            },
            other => return Err(format!("unknown family `{other}`")),
        };
        let floor_eta = raw.get::<f64>("family", "floor_eta")?;
        let floor_points = raw.or("family", "floor_points", 33usize)?;
        let floor = match (raw.string("family", "floor_c").as_deref(), floor_eta) {
            (None, None) => FloorSpec::None,
            (Some(_), None) => return Err("`floor_c` needs `floor_eta`".into()),
            (None, Some(eta)) | (Some("fit"), Some(eta)) => FloorSpec::Fit {
                eta: positive("floor_eta", eta)?,
                points: floor_points,
            },
            (Some(_), Some(eta)) => FloorSpec::Given {
                c: positive("floor_c", raw.get("family", "floor_c")?.expect("present"))?,
                eta: positive("floor_eta", eta)?,
            },
        };

        let grid = raw.or("run", "grid", 64usize)?;
        if grid < 2 || !grid.is_power_of_two() {
            return Err(format!("grid must be a power of two >= 2, got {grid}"));
        }
        let samples = raw.or("run", "samples", 1000usize)?;
        if samples == 0 {
            return Err("samples must be at least 1".into());
        }
        let seed = raw.or("run", "seed", 0u64)?;
        let out = relative(base, &raw.or("run", "out", "chaoskit-out".to_string())?);
        let svg = raw.or("run", "svg", false)?;

        let check = CheckSection {
            depth: raw.or("check", "depth", 4u32)?,
            random: raw.or("check", "random", 200usize)?,
            regularity_points: raw.or("check", "regularity_points", 33usize)?,
            row_sum_points: raw.or("check", "row_sum_points", 33usize)?,
            max_lag: positive("max_lag", raw.or("check", "max_lag", 0.25)?)?,
            margin: raw.or("check", "margin", 0.05)?,
            rank_tol: positive("rank_tol", raw.or("check", "rank_tol", chaoskit::tensor::DEFAULT_RANK_TOL)?)?,
        };
        if check.depth == 0 || check.depth > 8 {
            return Err(format!("check depth must lie in 1..=8, got {}", check.depth));
        }

        let suites = match raw.list::<String>("verify", "suites")? {
            None => ALL_SUITES.iter().filter(|s| **s != "corollary").map(|s| s.to_string()).collect(),
            Some(v) if v == ["all"] => ALL_SUITES.iter().map(|s| s.to_string()).collect(),
            Some(v) => v,
        };
        if let Some(bad) = suites.iter().find(|s| !ALL_SUITES.contains(&s.as_str())) {
            return Err(format!("unknown suite `{bad}` (known: {})", ALL_SUITES.join(", ")));
        }
        let integrands = match raw.string("verify", "integrands").as_deref() {
            None | Some("standard") => Integrand::standard_set(),
            Some(s) => s
                .split(',')
                .map(|g| Integrand::parse(g).map_err(|e| e.to_string()))
                .collect::<Result<Vec<_>, _>>()?,
        };
        let epsilons = raw.list::<f64>("verify", "epsilons")?;
        let verify = VerifySection {
            suites,
            integrands,
            alpha: parse_auto(raw, "verify", "alpha")?,
            beta: parse_auto(raw, "verify", "beta")?,
            controls: raw.or("verify", "controls", 100usize)?,
            identity_points: raw.or("verify", "identity_points", 33usize)?,
            nu: raw.or("verify", "nu", 0.8)?,
            epsilons,
        };

        let dim = raw.or("sde", "dim", 2usize)?;
        let fields = match raw.or("sde", "fields", "elliptic_sine".to_string())?.as_str() {
            "elliptic_sine" => FieldSpec::EllipticSine(dim),
            "additive" => FieldSpec::Additive(dim),
            path => FieldSpec::Affine(relative(base, path)),
        };
        let sde = SdeSection {
            fields,
            y0: raw.list("sde", "y0")?,
            t: raw.or("sde", "t", 1.0)?,
            ellipticity_floor: positive("ellipticity_floor", raw.or("sde", "ellipticity_floor", 1e-3)?)?,
            spot_checks: raw.or("sde", "spot_checks", 256usize)?,
            deltas: raw.list("sde", "deltas")?.unwrap_or_default(),
            bandwidths: raw.list("sde", "bandwidths")?.unwrap_or_default(),
            factor: positive("factor", raw.or("sde", "factor", 4.0)?)?,
        };

        if let Some((line, key)) = raw.unused().into_iter().next() {
            return Err(format!("config line {line}: unknown key `{key}`"));
        }
        Ok(ExperimentConfig {
            family,
            floor,
            seed,
            grid,
            samples,
            out,
            svg,
            check,
            verify,
            sde,
        })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let raw = RawConfig::parse(&text)?;
        Self::from_raw(&raw, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn family(&self) -> Result<KernelFamily, String> {
        let err = |e: chaoskit::Error| e.to_string();
        let fam = match &self.family {
            FamilySpec::Fd { levels, theta } => KernelFamily::fd(*levels, *theta).map_err(err)?,
            FamilySpec::Herm2 { levels, theta } => KernelFamily::herm2(*levels, *theta).map_err(err)?,
            FamilySpec::Rosen { hurst, cells } => KernelFamily::rosen(*hurst, *cells).map_err(err)?,
            FamilySpec::Blk2 => KernelFamily::blk2(),
            FamilySpec::Custom { file, theta } => {
                let json = std::fs::read_to_string(file)
                    .map_err(|e| format!("cannot read {}: {e}", file.display()))?;
                let name = file.file_stem().and_then(|s| s.to_str()).unwrap_or("custom");
                KernelFamily::custom_from_json(&format!("CUSTOM({name})"), &json, *theta).map_err(err)?
            }
        };
        Ok(match self.floor {
            FloorSpec::None => fam,
            FloorSpec::Given { c, eta } => fam.with_covariance_floor(c, eta),
            FloorSpec::Fit { eta, points } => {
                let c = fit_covariance_floor(&fam, points, eta).map_err(err)?;
                fam.with_covariance_floor(c, eta)
            }
        })
    }

    pub fn check_options(&self, fam: &KernelFamily) -> CheckOptions {
        CheckOptions {
            regularity_points: self.check.regularity_points,
            max_lag: self.check.max_lag,
            row_sum_points: self.check.row_sum_points,
            margin: self.check.margin,
            rank_tol: self.check.rank_tol,
            sampler: ConfigSampler::for_family(fam, self.check.depth, self.check.random, self.seed),
        }
    }

    pub fn fields(&self) -> Result<VectorFieldSet, String> {
        let err = |e: chaoskit::Error| e.to_string();
        match &self.sde.fields {
            FieldSpec::EllipticSine(d) => VectorFieldSet::elliptic_sine(*d).map_err(err),
            FieldSpec::Additive(d) => VectorFieldSet::additive(*d).map_err(err),
            FieldSpec::Affine(path) => {
                let json = std::fs::read_to_string(path)
                    .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                VectorFieldSet::affine_from_json(&json).map_err(err)
            }
        }
    }

    pub fn y0(&self, dim: usize) -> Result<DVector<f64>, String> {
        match &self.sde.y0 {
            None => Ok(DVector::zeros(dim)),
            Some(v) if v.len() == dim => Ok(DVector::from_vec(v.clone())),
            Some(v) => Err(format!("y0 has {} entries, the fields act on R^{dim}", v.len())),
        }
    }

    pub fn density_options(&self) -> DensityOptions {
        DensityOptions {
            bandwidths: self.sde.bandwidths.clone(),
            deltas: self.sde.deltas.clone(),
            factor: self.sde.factor,
            ..DensityOptions::default()
        }
    }
}
