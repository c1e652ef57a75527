//! Persistent memo of wrapper evaluations, keyed by threshold couple and
//! evaluation protocol.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use crate::bandselect::SelectionThresholds;
use crate::error::{Error, Location, Result};
use crate::wrapper::EvaluationRecord;

pub const CACHE_HEADER: &str =
    "th_relevance,th_redundancy,split_seed,classifier_id,n_levels,n_bands,accuracy,defined,band_list";

/// Thresholds are compared by bit pattern, so only identical values hit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CacheKey {
    th_relevance: u64,
    th_redundancy: u64,
    pub split_seed: u64,
    pub classifier_id: String,
    pub n_levels: u32,
}

impl CacheKey {
    pub fn new(
        thresholds: SelectionThresholds,
        split_seed: u64,
        classifier_id: impl Into<String>,
        n_levels: u32,
    ) -> Self {
        CacheKey {
            th_relevance: thresholds.th_relevance.to_bits(),
            th_redundancy: thresholds.th_redundancy.to_bits(),
            split_seed,
            classifier_id: classifier_id.into(),
            n_levels,
        }
    }

    pub fn thresholds(&self) -> SelectionThresholds {
        SelectionThresholds {
            th_relevance: f64::from_bits(self.th_relevance),
            th_redundancy: f64::from_bits(self.th_redundancy),
        }
    }
}

#[derive(Debug, Default)]
pub struct EvaluationCache {
    path: Option<PathBuf>,
    entries: RwLock<BTreeMap<CacheKey, EvaluationRecord>>,
}

impl EvaluationCache {
    pub fn in_memory() -> Self {
        EvaluationCache::default()
    }

    /// Loads `path` if it exists; `save` writes back to it.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let entries = match fs::read_to_string(&path) {
            Ok(text) => parse(&text, &path)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(Error::io(&path, e)),
        };
        Ok(EvaluationCache {
            path: Some(path),
            entries: RwLock::new(entries),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, key: &CacheKey) -> Option<EvaluationRecord> {
        self.entries.read().unwrap().get(key).cloned()
    }

    /// Keeps the first record stored under a key; returns the stored record.
    pub fn insert(&self, key: CacheKey, record: EvaluationRecord) -> EvaluationRecord {
        self.entries
            .write()
            .unwrap()
            .entry(key)
            .or_insert(record)
            .clone()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> Vec<(CacheKey, EvaluationRecord)> {
        self.entries
            .read()
            .unwrap()
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{CACHE_HEADER}\n");
        for (key, record) in self.entries.read().unwrap().iter() {
            let t = key.thresholds();
            let accuracy = record.accuracy.map(|a| a.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                t.th_relevance,
                t.th_redundancy,
                key.split_seed,
                escape(&key.classifier_id),
                key.n_levels,
                record.n_bands(),
                accuracy,
                record.defined(),
                join_bands(&record.bands)
            )
            .unwrap();
        }
        out
    }

    /// Writes to the backing file, if any.
    pub fn save(&self) -> Result<()> {
        match &self.path {
            Some(path) => self.save_to(path),
            None => Ok(()),
        }
    }

    pub fn save_to(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("csv.tmp");
        fs::write(&tmp, self.to_csv()).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn join_bands(bands: &[usize]) -> String {
    let parts: Vec<String> = bands.iter().map(usize::to_string).collect();
    parts.join(";")
}

fn escape(id: &str) -> String {
    id.replace('%', "%25")
        .replace(',', "%2C")
        .replace('\n', "%0A")
}

fn unescape(id: &str) -> String {
    id.replace("%0A", "\n")
        .replace("%2C", ",")
        .replace("%25", "%")
}

fn parse(text: &str, path: &Path) -> Result<BTreeMap<CacheKey, EvaluationRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CACHE_HEADER => {}
        None => return Ok(BTreeMap::new()),
        Some(_) => {
            return Err(Error::format(
                path,
                Location::Line(1),
                "unexpected cache header",
            ));
        }
    }
    let mut entries = BTreeMap::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let line_no = i + 1;
        let bad = |what: &str| Error::format(path, Location::Line(line_no), format!("bad {what}"));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::format(
                path,
                Location::Line(line_no),
                format!("expected 9 fields, found {}", fields.len()),
            ));
        }
        let th_relevance: f64 = fields[0].parse().map_err(|_| bad("th_relevance"))?;
        let th_redundancy: f64 = fields[1].parse().map_err(|_| bad("th_redundancy"))?;
        let thresholds = SelectionThresholds::new(th_relevance, th_redundancy)
            .map_err(|_| bad("threshold couple"))?;
        let split_seed: u64 = fields[2].parse().map_err(|_| bad("split_seed"))?;
        let n_levels: u32 = fields[4].parse().map_err(|_| bad("n_levels"))?;
        let n_bands: usize = fields[5].parse().map_err(|_| bad("n_bands"))?;
        let defined: bool = fields[7].parse().map_err(|_| bad("defined"))?;
        let accuracy = match (defined, fields[6]) {
            (false, "") => None,
            (true, a) => Some(a.parse::<f64>().map_err(|_| bad("accuracy"))?),
            (false, _) => return Err(bad("accuracy for an undefined record")),
        };
        let bands: Vec<usize> = if fields[8].is_empty() {
            Vec::new()
        } else {
            fields[8]
                .split(';')
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("band_list"))?
        };
        if bands.len() != n_bands {
            return Err(bad("n_bands (does not match band_list)"));
        }
        let key = CacheKey::new(thresholds, split_seed, unescape(fields[3]), n_levels);
        entries.insert(
            key,
            EvaluationRecord {
                thresholds,
                bands,
                accuracy,
            },
        );
    }
    Ok(entries)
}
