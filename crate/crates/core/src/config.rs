//! Run configuration: JSON ingestion with exact rational literals,
//! validation, CLI-style seed lists, and the deterministic auto-seed
//! search.

use crate::conditions::{refine_seed_set, ConditionError};
use crate::ifs::{AffineIfs, AffineMap, OpenSetSpec, Point, SpaceDescriptor};
use crate::region::BoxR;
use crate::scalar::{rat, rat_int, Rat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const DEFAULT_DEPTH: u32 = 3;
pub const DEFAULT_RESOLUTION: u32 = 6;
pub const AUTO_SEED_TARGET: usize = 3;
pub const AUTO_SEED_ATTEMPTS: usize = 64;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config validation error: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Text,
}

impl Format {
    pub fn label(&self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Text => "text",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "json" => Ok(Format::Json),
            "text" => Ok(Format::Text),
            other => Err(ConfigError::Validation(format!(
                "unknown format `{other}` (expected json or text)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeedSpec {
    Auto,
    Explicit(Vec<Point>),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub ifs: AffineIfs,
    pub seeds: SeedSpec,
    pub depth: u32,
    /// Suite names in canonical order, a subset of [`SUITE_NAMES`].
    ///
    /// [`SUITE_NAMES`]: crate::suites::SUITE_NAMES
    pub suites: Vec<String>,
    pub rng_seed: u64,
    pub resolution: u32,
    pub allow_non_contractive: bool,
    pub output_path: Option<PathBuf>,
    pub format: Format,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: RawSystem,
    #[serde(default)]
    seeds: Option<serde_json::Value>,
    #[serde(default)]
    depth: Option<u32>,
    #[serde(default)]
    suites: Option<Vec<String>>,
    #[serde(default)]
    rng_seed: Option<u64>,
    #[serde(default)]
    resolution: Option<u32>,
    #[serde(default)]
    allow_non_contractive: Option<bool>,
    #[serde(default)]
    output: Option<RawOutput>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    space: RawSpace,
    maps: Vec<RawMap>,
    #[serde(default)]
    open_set: Option<RawOpenSet>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpace {
    kind: String,
    #[serde(default)]
    lo: Option<String>,
    #[serde(default)]
    hi: Option<String>,
    #[serde(default)]
    bounds: Option<Vec<[String; 2]>>,
    #[serde(default)]
    hull: Option<Vec<[String; 2]>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    linear: Vec<Vec<String>>,
    offset: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOpenSet {
    pieces: Vec<Vec<[String; 2]>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(default)]
    path: Option<String>,
    #[serde(default)]
    format: Option<String>,
}

/// Parses a `p/q` literal, mapping malformed input (including zero
/// denominators) to a parse error.
pub fn parse_rational(s: &str) -> Result<Rat, ConfigError> {
    crate::scalar::parse_rat(s).map_err(|e| ConfigError::Parse(e.to_string()))
}

fn parse_interval(pair: &[String; 2]) -> Result<(Rat, Rat), ConfigError> {
    Ok((parse_rational(&pair[0])?, parse_rational(&pair[1])?))
}

fn parse_box(pairs: &[[String; 2]]) -> Result<BoxR, ConfigError> {
    pairs.iter().map(parse_interval).collect()
}

fn build_space(raw: &RawSpace) -> Result<SpaceDescriptor, ConfigError> {
    let need = |field: &str, kind: &str| {
        ConfigError::Validation(format!("space kind `{kind}` requires field `{field}`"))
    };
    match raw.kind.as_str() {
        "interval" => Ok(SpaceDescriptor::Interval {
            lo: parse_rational(raw.lo.as_ref().ok_or_else(|| need("lo", "interval"))?)?,
            hi: parse_rational(raw.hi.as_ref().ok_or_else(|| need("hi", "interval"))?)?,
        }),
        "box" => Ok(SpaceDescriptor::Box {
            bounds: parse_box(raw.bounds.as_ref().ok_or_else(|| need("bounds", "box"))?)?,
        }),
        "cantor_ternary" => Ok(SpaceDescriptor::CantorTernary),
        "attractor_generic" => Ok(SpaceDescriptor::AttractorGeneric {
            hull: parse_box(
                raw.hull
                    .as_ref()
                    .ok_or_else(|| need("hull", "attractor_generic"))?,
            )?,
        }),
        other => Err(ConfigError::Validation(format!(
            "unknown space kind `{other}`"
        ))),
    }
}

fn build_map(raw: &RawMap, index: usize) -> Result<AffineMap, ConfigError> {
    let linear: Vec<Vec<Rat>> = raw
        .linear
        .iter()
        .map(|row| row.iter().map(|s| parse_rational(s)).collect())
        .collect::<Result<_, _>>()?;
    let offset: Vec<Rat> = raw
        .offset
        .iter()
        .map(|s| parse_rational(s))
        .collect::<Result<_, _>>()?;
    let dim = offset.len();
    if linear.len() != dim || linear.iter().any(|r| r.len() != dim) {
        return Err(ConfigError::Validation(format!(
            "map {} has a {}x{} linear part but a {dim}-dimensional offset",
            index + 1,
            linear.len(),
            linear.first().map(|r| r.len()).unwrap_or(0),
        )));
    }
    Ok(AffineMap { linear, offset })
}

fn parse_point(value: &serde_json::Value, dim: usize) -> Result<Point, ConfigError> {
    let coords = value.as_array().ok_or_else(|| {
        ConfigError::Validation("each seed must be an array of rational strings".into())
    })?;
    if coords.len() != dim {
        return Err(ConfigError::Validation(format!(
            "seed has {} coordinates, system dimension is {dim}",
            coords.len()
        )));
    }
    coords
        .iter()
        .map(|c| {
            c.as_str()
                .ok_or_else(|| {
                    ConfigError::Validation("seed coordinates must be strings".into())
                })
                .and_then(parse_rational)
        })
        .collect()
}

fn build_seeds(value: Option<&serde_json::Value>, dim: usize) -> Result<SeedSpec, ConfigError> {
    match value {
        None => Ok(SeedSpec::Auto),
        Some(serde_json::Value::String(s)) if s == "auto" => Ok(SeedSpec::Auto),
        Some(serde_json::Value::Array(points)) => {
            if points.is_empty() {
                return Err(ConfigError::Validation("seed list is empty".into()));
            }
            Ok(SeedSpec::Explicit(
                points
                    .iter()
                    .map(|p| parse_point(p, dim))
                    .collect::<Result<_, _>>()?,
            ))
        }
        Some(other) => Err(ConfigError::Validation(format!(
            "seeds must be \"auto\" or an array of points, got {other}"
        ))),
    }
}

fn build_suites(names: Option<&Vec<String>>) -> Result<Vec<String>, ConfigError> {
    let canonical = crate::suites::SUITE_NAMES;
    match names {
        None => Ok(canonical.iter().map(|s| s.to_string()).collect()),
        Some(list) => {
            for name in list {
                if !canonical.contains(&name.as_str()) {
                    return Err(ConfigError::Validation(format!(
                        "unknown suite `{name}` (expected a subset of {canonical:?})"
                    )));
                }
            }
            Ok(canonical
                .iter()
                .filter(|c| list.iter().any(|n| n == *c))
                .map(|s| s.to_string())
                .collect())
        }
    }
}

pub fn parse_config_str(src: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig =
        serde_json::from_str(src).map_err(|e| ConfigError::Parse(e.to_string()))?;

    if raw.system.maps.is_empty() {
        return Err(ConfigError::Validation(
            "a system needs at least one map".into(),
        ));
    }
    let space = build_space(&raw.system.space)?;
    let maps: Vec<AffineMap> = raw
        .system
        .maps
        .iter()
        .enumerate()
        .map(|(i, m)| build_map(m, i))
        .collect::<Result<_, _>>()?;
    let open_set = match &raw.system.open_set {
        Some(u) => Some(OpenSetSpec {
            pieces: u
                .pieces
                .iter()
                .map(|p| parse_box(p))
                .collect::<Result<_, _>>()?,
        }),
        None => None,
    };
    let ifs = AffineIfs::new(space, maps, open_set)
        .map_err(|e| ConfigError::Validation(e.to_string()))?;

    let depth = raw.depth.unwrap_or(DEFAULT_DEPTH);
    if depth == 0 {
        return Err(ConfigError::Validation("depth must be at least 1".into()));
    }
    let resolution = raw.resolution.unwrap_or(DEFAULT_RESOLUTION);
    if resolution == 0 {
        return Err(ConfigError::Validation(
            "resolution must be at least 1".into(),
        ));
    }

    let allow_non_contractive = raw.allow_non_contractive.unwrap_or(false);
    if !allow_non_contractive && !ifs.all_proper_contractions_certified() {
        return Err(ConfigError::Validation(
            "not every map is certified contractive; set allow_non_contractive to proceed"
                .into(),
        ));
    }

    let seeds = build_seeds(raw.seeds.as_ref(), ifs.dim())?;
    let suites = build_suites(raw.suites.as_ref())?;

    let (output_path, format) = match &raw.output {
        Some(o) => (
            o.path.as_ref().map(PathBuf::from),
            match &o.format {
                Some(f) => Format::parse(f)?,
                None => Format::Json,
            },
        ),
        None => (None, Format::Json),
    };

    Ok(RunConfig {
        ifs,
        seeds,
        depth,
        suites,
        rng_seed: raw.rng_seed.unwrap_or(0),
        resolution,
        allow_non_contractive,
        output_path,
        format,
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&src)
}

/// Parses a CLI seed list: points split by `;`, coordinates by `,`.
/// In dimension one a plain comma-separated list is a list of points.
pub fn parse_seed_list(s: &str, dim: usize) -> Result<Vec<Point>, ConfigError> {
    let point_strs: Vec<&str> = if dim == 1 {
        s.split([';', ',']).collect()
    } else {
        s.split(';').collect()
    };
    let mut points = Vec::new();
    for ps in point_strs {
        let ps = ps.trim();
        if ps.is_empty() {
            continue;
        }
        let coords: Vec<&str> = ps.split(',').collect();
        if coords.len() != dim {
            return Err(ConfigError::Validation(format!(
                "seed `{ps}` has {} coordinates, system dimension is {dim}",
                coords.len()
            )));
        }
        points.push(
            coords
                .iter()
                .map(|c| parse_rational(c.trim()))
                .collect::<Result<Point, _>>()?,
        );
    }
    if points.is_empty() {
        return Err(ConfigError::Validation("seed list is empty".into()));
    }
    Ok(points)
}

/// One candidate point inside the sampling region, with every random
/// fraction of denominator at most 1000.
fn sample_candidate(ifs: &AffineIfs, rng: &mut ChaCha8Rng) -> Point {
    if matches!(ifs.space, SpaceDescriptor::CantorTernary) {
        // Finite ternary expansions over digits {0, 2} stay inside the
        // Cantor set, with denominator 3^6 = 729.
        loop {
            let mut x = rat_int(0);
            let mut scale = rat(1, 3);
            for _ in 0..6 {
                if rng.gen_bool(0.5) {
                    x += &scale * rat_int(2);
                }
                scale *= rat(1, 3);
            }
            if !x.is_integer() || x != rat_int(0) {
                return vec![x];
            }
        }
    }
    let region: BoxR = match &ifs.open_set {
        Some(u) if !u.pieces.is_empty() => {
            let i = rng.gen_range(0..u.pieces.len());
            u.pieces[i].clone()
        }
        _ => ifs.space.hull(),
    };
    region
        .iter()
        .map(|(lo, hi)| {
            let d = rng.gen_range(2u32..=1000);
            let k = rng.gen_range(1..d);
            lo + (hi - lo) * rat(k as i64, d as i64)
        })
        .collect()
}

/// Deterministic auto-seed search: candidates drawn inside the open set
/// (or the hull), kept only when `refine_seed_set` keeps the whole
/// accumulated list. Reproducible from `rng_seed`.
pub fn auto_seeds(ifs: &AffineIfs, depth: u32, rng_seed: u64) -> Result<Vec<Point>, ConfigError> {
    // Distinct stream from the suite fuzzers sharing the same seed.
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ 0x5eed_cafe_f00d_0001);
    let mut accepted: Vec<Point> = Vec::new();
    for _ in 0..AUTO_SEED_ATTEMPTS {
        if accepted.len() >= AUTO_SEED_TARGET {
            break;
        }
        let cand = sample_candidate(ifs, &mut rng);
        if ifs.space.contains(&cand) == Some(false) || accepted.contains(&cand) {
            continue;
        }
        let mut trial = accepted.clone();
        trial.push(cand);
        match refine_seed_set(ifs, &trial, depth) {
            Ok(out) if out.removed.is_empty() => accepted = out.kept,
            Ok(_) => continue,
            Err(ConditionError::OpenSetRequired) => unreachable!("refine needs no open set"),
            Err(e) => return Err(ConfigError::Validation(e.to_string())),
        }
    }
    if accepted.is_empty() {
        return Err(ConfigError::Validation(
            "auto seed search found no admissible seeds; supply seeds explicitly".into(),
        ));
    }
    Ok(accepted)
}

/// Resolves the configured seed spec into concrete points plus a label
/// for the report ("auto" or "explicit").
pub fn resolve_seeds(cfg: &RunConfig) -> Result<(Vec<Point>, &'static str), ConfigError> {
    match &cfg.seeds {
        SeedSpec::Auto => Ok((auto_seeds(&cfg.ifs, cfg.depth, cfg.rng_seed)?, "auto")),
        SeedSpec::Explicit(points) => Ok((points.clone(), "explicit")),
    }
}
