//! Classifiers behind the wrapper: nearest centroid, k-NN, and an external
//! program speaking a two-file CSV protocol.

use std::fmt::Write as _;
use std::fs;
use std::process::Command;
use std::str::FromStr;

use rayon::prelude::*;

use crate::datacube::{GroundTruthMap, HyperCube, LabeledSplit};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClassifierKind {
    NearestCentroid,
    Knn {
        k: usize,
    },
    /// Program and leading arguments; `train.csv` and `test.csv` are appended.
    External {
        command: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    /// Min-max scale each band with training-split statistics.
    pub normalize: bool,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec {
            kind: ClassifierKind::Knn { k: 1 },
            normalize: true,
        }
    }
}

impl ClassifierSpec {
    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            ClassifierKind::Knn { k: 0 } => Err(Error::Config("knn needs k >= 1".into())),
            ClassifierKind::External { command } if command.is_empty() => {
                Err(Error::Config("external classifier needs a command".into()))
            }
            _ => Ok(()),
        }
    }

    /// Stable identity used in cache keys.
    pub fn id(&self) -> String {
        let kind = match &self.kind {
            ClassifierKind::NearestCentroid => "nearest-centroid".to_string(),
            ClassifierKind::Knn { k } => format!("knn-k{k}"),
            ClassifierKind::External { command } => format!("external[{}]", command.join(" ")),
        };
        let scaling = if self.normalize { "minmax" } else { "raw" };
        format!("{kind}/{scaling}")
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    /// Accepts `nearest-centroid`, `knn` and `knn:<k>`. External classifiers
    /// are configured through their command instead.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest-centroid" | "centroid" => Ok(ClassifierKind::NearestCentroid),
            "knn" => Ok(ClassifierKind::Knn { k: 1 }),
            other => match other.strip_prefix("knn:").map(str::parse) {
                Some(Ok(k)) => Ok(ClassifierKind::Knn { k }),
                _ => Err(Error::Config(format!("unknown classifier `{other}`"))),
            },
        }
    }
}

/// Row-major feature table over a pixel list.
struct Features {
    rows: usize,
    dim: usize,
    values: Vec<f64>,
}

impl Features {
    fn gather(cube: &HyperCube, pixels: &[(usize, usize)], bands: &[usize]) -> Self {
        let mut values = Vec::with_capacity(pixels.len() * bands.len());
        for &(r, c) in pixels {
            values.extend(bands.iter().map(|&b| cube.sample(b, r, c) as f64));
        }
        Features {
            rows: pixels.len(),
            dim: bands.len(),
            values,
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Per-column `(min, max)`.
    fn ranges(&self) -> Vec<(f64, f64)> {
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim];
        for i in 0..self.rows {
            for (range, &v) in ranges.iter_mut().zip(self.row(i)) {
                range.0 = range.0.min(v);
                range.1 = range.1.max(v);
            }
        }
        ranges
    }

    fn rescale(&mut self, ranges: &[(f64, f64)]) {
        for row in self.values.chunks_mut(self.dim) {
            for (v, &(lo, hi)) in row.iter_mut().zip(ranges) {
                *v = if hi > lo { (*v - lo) / (hi - lo) } else { 0.0 };
            }
        }
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Trains on the split's training pixels restricted to `bands` and predicts
/// a class for every test pixel, in split order.
pub fn train_predict(
    spec: &ClassifierSpec,
    cube: &HyperCube,
    gt: &GroundTruthMap,
    split: &LabeledSplit,
    bands: &[usize],
) -> Result<Vec<u32>> {
    spec.validate()?;
    gt.check_matches(cube)?;
    if bands.is_empty() {
        return Err(Error::InvalidInput(
            "cannot classify with zero bands".into(),
        ));
    }
    if split.train_pixels.is_empty() || split.test_pixels.is_empty() {
        return Err(Error::InvalidInput(
            "split needs train and test pixels".into(),
        ));
    }
    if let Some(&b) = bands.iter().find(|&&b| b >= cube.n_bands()) {
        return Err(Error::InvalidInput(format!("band {b} out of range")));
    }

    let mut train = Features::gather(cube, &split.train_pixels, bands);
    let mut test = Features::gather(cube, &split.test_pixels, bands);
    if spec.normalize {
        let ranges = train.ranges();
        train.rescale(&ranges);
        test.rescale(&ranges);
    }
    let labels: Vec<u32> = split
        .train_pixels
        .iter()
        .map(|&(r, c)| gt.label(r, c))
        .collect();

    match &spec.kind {
        ClassifierKind::NearestCentroid => {
            Ok(nearest_centroid(&train, &labels, &test, gt.num_classes()))
        }
        ClassifierKind::Knn { k } => Ok(knn(&train, &labels, &test, *k, gt.num_classes())),
        ClassifierKind::External { command } => {
            external(command, &train, &labels, &test, gt.num_classes())
        }
    }
}

fn nearest_centroid(
    train: &Features,
    labels: &[u32],
    test: &Features,
    num_classes: u32,
) -> Vec<u32> {
    let n_classes = num_classes as usize + 1;
    let mut sums = vec![0.0; n_classes * train.dim];
    let mut counts = vec![0usize; n_classes];
    for (i, &l) in labels.iter().enumerate() {
        counts[l as usize] += 1;
        for (acc, v) in sums[l as usize * train.dim..].iter_mut().zip(train.row(i)) {
            *acc += v;
        }
    }
    let centroids: Vec<(u32, Vec<f64>)> = (1..n_classes)
        .filter(|&c| counts[c] > 0)
        .map(|c| {
            let row = &sums[c * train.dim..(c + 1) * train.dim];
            (c as u32, row.iter().map(|s| s / counts[c] as f64).collect())
        })
        .collect();
    (0..test.rows)
        .into_par_iter()
        .map(|i| {
            let x = test.row(i);
            let mut best = (f64::INFINITY, 0u32);
            for (class, centroid) in &centroids {
                let d = squared_distance(x, centroid);
                if d < best.0 {
                    best = (d, *class);
                }
            }
            best.1
        })
        .collect()
}

/// Majority vote among the `k` nearest training rows. Equal distances keep the
/// earlier training row; tied votes go to the smallest class id.
fn knn(train: &Features, labels: &[u32], test: &Features, k: usize, num_classes: u32) -> Vec<u32> {
    let k = k.min(train.rows);
    (0..test.rows)
        .into_par_iter()
        .map_init(
            || {
                (
                    Vec::with_capacity(k + 1),
                    vec![0usize; num_classes as usize + 1],
                )
            },
            |(nearest, votes): &mut (Vec<(f64, usize)>, Vec<usize>), i| {
                let x = test.row(i);
                nearest.clear();
                for j in 0..train.rows {
                    let d = squared_distance(x, train.row(j));
                    if nearest.len() == k && d >= nearest[k - 1].0 {
                        continue;
                    }
                    let at = nearest.partition_point(|&(nd, _)| nd <= d);
                    nearest.insert(at, (d, j));
                    nearest.truncate(k);
                }
                votes.iter_mut().for_each(|v| *v = 0);
                for &(_, j) in nearest.iter() {
                    votes[labels[j] as usize] += 1;
                }
                let (mut best, mut best_votes) = (0, 0);
                for (class, &n) in votes.iter().enumerate().skip(1) {
                    if n > best_votes {
                        (best, best_votes) = (class, n);
                    }
                }
                best as u32
            },
        )
        .collect()
}

fn format_value(v: f64) -> String {
    format!("{v}")
}

fn external(
    command: &[String],
    train: &Features,
    labels: &[u32],
    test: &Features,
    num_classes: u32,
) -> Result<Vec<u32>> {
    let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
    let header: Vec<String> = (0..train.dim).map(|i| format!("f{i}")).collect();
    let header = header.join(",");

    let mut train_csv = format!("label,{header}\n");
    for (i, label) in labels.iter().enumerate() {
        write!(train_csv, "{label}").unwrap();
        for &v in train.row(i) {
            write!(train_csv, ",{}", format_value(v)).unwrap();
        }
        train_csv.push('\n');
    }
    let mut test_csv = format!("{header}\n");
    for i in 0..test.rows {
        let row: Vec<String> = test.row(i).iter().map(|&v| format_value(v)).collect();
        test_csv.push_str(&row.join(","));
        test_csv.push('\n');
    }
    let train_path = dir.path().join("train.csv");
    let test_path = dir.path().join("test.csv");
    fs::write(&train_path, train_csv).map_err(|e| Error::io(&train_path, e))?;
    fs::write(&test_path, test_csv).map_err(|e| Error::io(&test_path, e))?;

    let output = Command::new(&command[0])
        .args(&command[1..])
        .arg(&train_path)
        .arg(&test_path)
        .output()
        .map_err(|e| Error::Classifier(format!("cannot run `{}`: {e}", command[0])))?;
    if !output.status.success() {
        return Err(Error::Classifier(format!(
            "`{}` exited with {}: {}",
            command.join(" "),
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    parse_predictions(&output.stdout, test.rows, num_classes)
}

/// One ASCII decimal class id per LF-terminated line.
pub(crate) fn parse_predictions(
    stdout: &[u8],
    expected: usize,
    num_classes: u32,
) -> Result<Vec<u32>> {
    let text =
        std::str::from_utf8(stdout).map_err(|_| Error::Classifier("output is not ASCII".into()))?;
    let body = text.strip_suffix('\n').unwrap_or(text);
    let lines: Vec<&str> = if body.is_empty() {
        Vec::new()
    } else {
        body.split('\n').collect()
    };
    if lines.len() != expected {
        return Err(Error::Classifier(format!(
            "expected {expected} predictions, got {}",
            lines.len()
        )));
    }
    lines
        .iter()
        .enumerate()
        .map(|(i, line)| {
            let class: u32 = line
                .parse()
                .ok()
                .filter(|_| line.bytes().all(|b| b.is_ascii_digit()))
                .ok_or_else(|| {
                    Error::Classifier(format!("line {}: malformed prediction `{line}`", i + 1))
                })?;
            if class == 0 || class > num_classes {
                return Err(Error::Classifier(format!(
                    "line {}: class {class} outside [1, {num_classes}]",
                    i + 1
                )));
            }
            Ok(class)
        })
        .collect()
}

/// Percentage of positions where the two label lists agree.
pub fn overall_accuracy(predicted: &[u32], actual: &[u32]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} labels",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::InvalidInput(
            "accuracy of an empty prediction list".into(),
        ));
    }
    let hits = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    Ok(100.0 * hits as f64 / predicted.len() as f64)
}
