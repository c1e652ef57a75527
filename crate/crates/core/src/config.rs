//! Run configuration: a flat `key = value` file whose keys can each be
//! overridden on the command line.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::ascent::ThresholdGrid;
use crate::bandselect::RedundancyMode;
use crate::datacube::CubeFormat;
use crate::error::{Error, Location, Result};
use crate::infotheory::DEFAULT_LEVELS;
use crate::wrapper::{ClassifierKind, ClassifierSpec};

pub const KEYS: &[&str] = &[
    "cube",
    "cube_format",
    "gt",
    "levels",
    "split_fraction",
    "split_seed",
    "stratified",
    "classifier",
    "k",
    "normalize",
    "external_command",
    "redundancy_axis",
    "relevance_axis",
    "cache",
    "out",
    "restarts",
    "seed",
    "literal_d_matrix",
];

/// Raw settings, keyed by canonical (snake_case) name.
pub type Settings = BTreeMap<String, String>;

fn canonical(key: &str) -> String {
    key.trim().replace('-', "_")
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_settings(text: &str, path: &Path) -> Result<Settings> {
    let mut settings = Settings::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::format(path, Location::Line(i + 1), "expected `key = value`"))?;
        let key = canonical(key);
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::format(
                path,
                Location::Line(i + 1),
                format!("unknown key `{key}`"),
            ));
        }
        settings.insert(key, value.trim().to_string());
    }
    Ok(settings)
}

pub fn load_settings(path: &Path) -> Result<Settings> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_settings(&text, path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub cube: Option<PathBuf>,
    pub cube_format: CubeFormat,
    pub gt: Option<PathBuf>,
    pub levels: u32,
    pub split_fraction: f64,
    pub split_seed: u64,
    pub stratified: bool,
    pub classifier: ClassifierSpec,
    pub grid: ThresholdGrid,
    pub cache: Option<PathBuf>,
    pub out: PathBuf,
    pub restarts: usize,
    pub seed: u64,
    pub literal_d_matrix: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            cube: None,
            cube_format: CubeFormat::BinaryCube,
            gt: None,
            levels: DEFAULT_LEVELS,
            split_fraction: 0.5,
            split_seed: 0,
            stratified: false,
            classifier: ClassifierSpec::default(),
            grid: ThresholdGrid::default(),
            cache: None,
            out: PathBuf::from("."),
            restarts: 3,
            seed: 0,
            literal_d_matrix: false,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean `{value}` for `{key}`"))),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| parse_value(key, v.trim()))
        .collect()
}

impl RunConfig {
    pub fn from_settings(settings: &Settings) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let get = |key: &str| settings.get(key).map(String::as_str);

        cfg.cube = get("cube").map(PathBuf::from);
        cfg.gt = get("gt").map(PathBuf::from);
        cfg.cache = get("cache").map(PathBuf::from);
        if let Some(v) = get("out") {
            cfg.out = PathBuf::from(v);
        }
        if let Some(v) = get("cube_format") {
            cfg.cube_format = v.parse()?;
        }
        if let Some(v) = get("levels") {
            cfg.levels = parse_value("levels", v)?;
        }
        if let Some(v) = get("split_fraction") {
            cfg.split_fraction = parse_value("split_fraction", v)?;
        }
        if let Some(v) = get("seed") {
            cfg.seed = parse_value("seed", v)?;
        }
        cfg.split_seed = match get("split_seed") {
            Some(v) => parse_value("split_seed", v)?,
            None => cfg.seed,
        };
        if let Some(v) = get("stratified") {
            cfg.stratified = parse_bool("stratified", v)?;
        }
        if let Some(v) = get("normalize") {
            cfg.classifier.normalize = parse_bool("normalize", v)?;
        }
        if let Some(v) = get("literal_d_matrix") {
            cfg.literal_d_matrix = parse_bool("literal_d_matrix", v)?;
        }
        if let Some(v) = get("restarts") {
            cfg.restarts = parse_value("restarts", v)?;
        }

        let k: usize = match get("k") {
            Some(v) => parse_value("k", v)?,
            None => 1,
        };
        cfg.classifier.kind = match get("classifier").unwrap_or("knn") {
            "external" => {
                let command: Vec<String> = get("external_command")
                    .unwrap_or("")
                    .split_whitespace()
                    .map(String::from)
                    .collect();
                ClassifierKind::External { command }
            }
            "knn" => ClassifierKind::Knn { k },
            other => other.parse()?,
        };
        cfg.classifier.validate()?;

        let red = match get("redundancy_axis") {
            Some(v) => parse_list("redundancy_axis", v)?,
            None => cfg.grid.redundancy_axis().to_vec(),
        };
        let rel = match get("relevance_axis") {
            Some(v) => parse_list("relevance_axis", v)?,
            None => cfg.grid.relevance_axis().to_vec(),
        };
        cfg.grid = ThresholdGrid::new(red, rel)?;

        if !(cfg.split_fraction > 0.0 && cfg.split_fraction < 1.0) {
            return Err(Error::Config(format!(
                "split_fraction must lie in (0, 1), got {}",
                cfg.split_fraction
            )));
        }
        if cfg.levels == 0 {
            return Err(Error::Config("levels must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn mode(&self) -> RedundancyMode {
        if self.literal_d_matrix {
            RedundancyMode::Literal
        } else {
            RedundancyMode::Pristine
        }
    }

    pub fn cache_path(&self) -> PathBuf {
        self.cache
            .clone()
            .unwrap_or_else(|| self.out.join("eval_cache.csv"))
    }

    /// Protocol details beyond the classifier that change accuracies.
    pub fn protocol_tag(&self) -> String {
        let mut tag = format!("split{}", self.split_fraction);
        if self.stratified {
            tag.push_str("-stratified");
        }
        tag
    }

    /// Input paths, checked to exist.
    pub fn inputs(&self) -> Result<(&Path, &Path)> {
        let cube = self
            .cube
            .as_deref()
            .ok_or_else(|| Error::Config("no cube given (`cube`)".into()))?;
        let gt = self
            .gt
            .as_deref()
            .ok_or_else(|| Error::Config("no ground truth given (`gt`)".into()))?;
        for path in [cube, gt] {
            if !path.exists() {
                return Err(Error::Config(format!("{} does not exist", path.display())));
            }
        }
        Ok((cube, gt))
    }
}
