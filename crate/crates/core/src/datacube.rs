//! Hyperspectral cubes, ground-truth maps, train/test splits and the
//! synthetic cube generator.
//!
//! Samples are raw unsigned 16-bit sensor counts. Pixels are addressed
//! row-major: the flat index of `(row, col)` is `row * width + col`.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Location, Result};

pub const CUBE_MAGIC: &[u8; 4] = b"HSIC";
const CUBE_HEADER_LEN: usize = 16;

/// Upper end of the synthetic signal range; leaves headroom below `u16::MAX`.
const SYNTH_RANGE: f64 = 60000.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HyperCube {
    width: usize,
    height: usize,
    bands: Vec<Vec<u16>>,
}

impl HyperCube {
    pub fn new(width: usize, height: usize, bands: Vec<Vec<u16>>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "cube dimensions must be positive, got {width}x{height}"
            )));
        }
        if bands.is_empty() {
            return Err(Error::InvalidInput(
                "cube must have at least one band".into(),
            ));
        }
        let n_pixels = width * height;
        if let Some((i, b)) = bands.iter().enumerate().find(|(_, b)| b.len() != n_pixels) {
            return Err(Error::InvalidInput(format!(
                "band {i} has {} samples, expected {n_pixels}",
                b.len()
            )));
        }
        Ok(HyperCube {
            width,
            height,
            bands,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    /// Row-major samples of one band.
    pub fn band(&self, index: usize) -> &[u16] {
        &self.bands[index]
    }

    pub fn bands(&self) -> &[Vec<u16>] {
        &self.bands
    }

    pub fn sample(&self, band: usize, row: usize, col: usize) -> u16 {
        self.bands[band][row * self.width + col]
    }

    /// Serializes to the binary-cube format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(CUBE_HEADER_LEN + 2 * self.n_pixels() * self.n_bands());
        out.extend_from_slice(CUBE_MAGIC);
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_bands() as u32).to_le_bytes());
        for band in &self.bands {
            for &s in band {
                out.extend_from_slice(&s.to_le_bytes());
            }
        }
        out
    }

    /// Parses the binary-cube format. `path` is only used in error messages.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < CUBE_HEADER_LEN {
            return Err(Error::format(
                path,
                Location::Byte(bytes.len() as u64),
                format!(
                    "header needs {CUBE_HEADER_LEN} bytes, file has {}",
                    bytes.len()
                ),
            ));
        }
        if &bytes[..4] != CUBE_MAGIC {
            return Err(Error::format(
                path,
                Location::Byte(0),
                "bad magic, expected \"HSIC\"",
            ));
        }
        let field = |offset: usize| {
            u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap()) as u64
        };
        let (width, height, n_bands) = (field(4), field(8), field(12));
        for (name, value, offset) in [
            ("width", width, 4),
            ("height", height, 8),
            ("n_bands", n_bands, 12),
        ] {
            if value == 0 {
                return Err(Error::format(
                    path,
                    Location::Byte(offset),
                    format!("{name} must be positive"),
                ));
            }
        }
        let payload = width
            .checked_mul(height)
            .and_then(|p| p.checked_mul(n_bands))
            .and_then(|s| s.checked_mul(2))
            .filter(|&len| usize::try_from(len).is_ok())
            .ok_or_else(|| {
                Error::format(
                    path,
                    Location::Byte(4),
                    format!("dimensions {width}x{height}x{n_bands} overflow"),
                )
            })?;
        let expected = CUBE_HEADER_LEN as u64 + payload;
        let actual = bytes.len() as u64;
        if actual < expected {
            return Err(Error::format(
                path,
                Location::Byte(actual),
                format!("truncated payload: expected {expected} bytes in total, file ends at byte {actual}"),
            ));
        }
        if actual > expected {
            return Err(Error::format(
                path,
                Location::Byte(expected),
                format!("{} trailing bytes after payload", actual - expected),
            ));
        }
        let n_pixels = (width * height) as usize;
        let bands = bytes[CUBE_HEADER_LEN..]
            .chunks_exact(2 * n_pixels)
            .map(|chunk| {
                chunk
                    .chunks_exact(2)
                    .map(|s| u16::from_le_bytes([s[0], s[1]]))
                    .collect()
            })
            .collect();
        HyperCube::new(width as usize, height as usize, bands)
    }

    /// Parses the pixel-csv format: header `row,col,b0,b1,...`, one line per
    /// pixel in any order. Dimensions are `max(row)+1` by `max(col)+1` and
    /// every pixel must appear exactly once.
    pub fn from_pixel_csv(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::format(path, Location::Line(1), "empty file"))?;
        let columns: Vec<&str> = header.split(',').map(str::trim).collect();
        if columns.len() < 3 || columns[0] != "row" || columns[1] != "col" {
            return Err(Error::format(
                path,
                Location::Line(1),
                "header must be `row,col,b0,b1,...`",
            ));
        }
        let n_bands = columns.len() - 2;

        let mut rows: Vec<(usize, usize, Vec<u16>, usize)> = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != n_bands + 2 {
                return Err(Error::format(
                    path,
                    Location::Line(line_no),
                    format!("expected {} fields, found {}", n_bands + 2, fields.len()),
                ));
            }
            let coord = |s: &str, name: &str| {
                s.parse::<usize>().map_err(|_| {
                    Error::format(path, Location::Line(line_no), format!("bad {name} `{s}`"))
                })
            };
            let row = coord(fields[0], "row")?;
            let col = coord(fields[1], "col")?;
            let mut samples = Vec::with_capacity(n_bands);
            for s in &fields[2..] {
                let v: i64 = s.parse().map_err(|_| {
                    Error::format(
                        path,
                        Location::Line(line_no),
                        format!("non-integer sample `{s}`"),
                    )
                })?;
                let v = u16::try_from(v).map_err(|_| {
                    Error::format(
                        path,
                        Location::Line(line_no),
                        format!("sample {v} outside the 16-bit range [0, 65535]"),
                    )
                })?;
                samples.push(v);
            }
            rows.push((row, col, samples, line_no));
        }
        if rows.is_empty() {
            return Err(Error::format(path, Location::Line(2), "no pixel lines"));
        }
        let height = rows.iter().map(|r| r.0).max().unwrap() + 1;
        let width = rows.iter().map(|r| r.1).max().unwrap() + 1;
        let n_pixels = width
            .checked_mul(height)
            .ok_or_else(|| Error::format(path, Location::Line(1), "pixel coordinates overflow"))?;
        if rows.len() != n_pixels {
            return Err(Error::format(
                path,
                Location::Line(rows.len() + 1),
                format!("{} pixel lines for a {width}x{height} image", rows.len()),
            ));
        }
        let mut bands = vec![vec![0u16; n_pixels]; n_bands];
        let mut seen = vec![false; n_pixels];
        for (row, col, samples, line_no) in rows {
            let idx = row * width + col;
            if std::mem::replace(&mut seen[idx], true) {
                return Err(Error::format(
                    path,
                    Location::Line(line_no),
                    format!("duplicate pixel ({row}, {col})"),
                ));
            }
            for (band, v) in bands.iter_mut().zip(samples) {
                band[idx] = v;
            }
        }
        HyperCube::new(width, height, bands)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubeFormat {
    BinaryCube,
    PixelCsv,
}

impl FromStr for CubeFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary-cube" | "binary" | "hsic" => Ok(CubeFormat::BinaryCube),
            "pixel-csv" | "csv" => Ok(CubeFormat::PixelCsv),
            other => Err(Error::Config(format!(
                "unknown cube format `{other}` (expected binary-cube or pixel-csv)"
            ))),
        }
    }
}

pub fn load_cube(path: &Path, format: CubeFormat) -> Result<HyperCube> {
    match format {
        CubeFormat::BinaryCube => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            HyperCube::from_bytes(&bytes, path)
        }
        CubeFormat::PixelCsv => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            HyperCube::from_pixel_csv(&text, path)
        }
    }
}

pub fn write_cube(cube: &HyperCube, path: &Path) -> Result<()> {
    cube.write(path)
}

/// Per-pixel class labels; 0 marks an unlabeled pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    num_classes: u32,
}

impl GroundTruthMap {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 || labels.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "ground truth needs {width}x{height} labels, got {}",
                labels.len()
            )));
        }
        let num_classes = labels.iter().copied().max().unwrap_or(0);
        if num_classes == 0 {
            return Err(Error::InvalidInput(
                "ground truth has no labeled pixels".into(),
            ));
        }
        Ok(GroundTruthMap {
            width,
            height,
            labels,
            num_classes,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_classes(&self) -> u32 {
        self.num_classes
    }

    /// Row-major labels.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    /// Flat indices of the labeled pixels, ascending.
    pub fn labeled_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l != 0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }

    pub fn check_matches(&self, cube: &HyperCube) -> Result<()> {
        if self.width != cube.width() || self.height != cube.height() {
            return Err(Error::DimensionMismatch(format!(
                "cube is {}x{}, ground truth is {}x{}",
                cube.width(),
                cube.height(),
                self.width,
                self.height
            )));
        }
        Ok(())
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut labels = Vec::new();
        let mut width = None;
        let mut height = 0;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let start = labels.len();
            for token in line.split_whitespace() {
                let value: i64 = token.parse().map_err(|_| {
                    Error::format(
                        path,
                        Location::Line(line_no),
                        format!("non-integer token `{token}`"),
                    )
                })?;
                if value < 0 {
                    return Err(Error::format(
                        path,
                        Location::Line(line_no),
                        format!("negative label {value}"),
                    ));
                }
                let value = u32::try_from(value).map_err(|_| {
                    Error::format(
                        path,
                        Location::Line(line_no),
                        format!("label {value} too large"),
                    )
                })?;
                labels.push(value);
            }
            let row_len = labels.len() - start;
            match width {
                None => width = Some(row_len),
                Some(w) if w != row_len => {
                    return Err(Error::format(
                        path,
                        Location::Line(line_no),
                        format!("ragged row: {row_len} labels, previous rows have {w}"),
                    ))
                }
                Some(_) => {}
            }
            height += 1;
        }
        let width = width.ok_or_else(|| Error::format(path, Location::Line(1), "empty file"))?;
        GroundTruthMap::new(width, height, labels).map_err(|e| match e {
            Error::InvalidInput(msg) => Error::format(path, Location::Line(1), msg),
            other => other,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.labels.len() * 3);
        for row in self.labels.chunks(self.width) {
            for (j, l) in row.iter().enumerate() {
                if j > 0 {
                    out.push(' ');
                }
                write!(out, "{l}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

pub fn load_ground_truth(path: &Path) -> Result<GroundTruthMap> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    for line in BufReader::new(file).lines() {
        text.push_str(&line.map_err(|e| Error::io(path, e))?);
        text.push('\n');
    }
    GroundTruthMap::parse(&text, path)
}

/// Disjoint train/test partition of the labeled pixels, as `(row, col)` pairs
/// in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSplit {
    pub train_pixels: Vec<(usize, usize)>,
    pub test_pixels: Vec<(usize, usize)>,
    pub seed: u64,
}

/// Random train/test split of the labeled pixels with
/// `|train| = round(fraction * labeled)`, clamped so both sides are non-empty.
/// A stratified split allocates the same total across classes by largest
/// remainder.
pub fn random_split(
    gt: &GroundTruthMap,
    fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<LabeledSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let labeled = gt.labeled_indices();
    let n = labeled.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "a split needs at least 2 labeled pixels, found {n}"
        )));
    }
    let n_train = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut train: Vec<usize> = if stratified {
        let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); gt.num_classes() as usize + 1];
        for &i in &labeled {
            per_class[gt.labels()[i] as usize].push(i);
        }
        let mut quotas: Vec<usize> = per_class
            .iter()
            .map(|c| (fraction * c.len() as f64).floor() as usize)
            .collect();
        let mut order: Vec<usize> = (0..per_class.len()).collect();
        let remainder = |c: usize| fraction * per_class[c].len() as f64 - quotas[c] as f64;
        order.sort_by(|&a, &b| remainder(b).total_cmp(&remainder(a)).then(a.cmp(&b)));
        let mut missing = n_train - quotas.iter().sum::<usize>();
        for c in order.into_iter().cycle() {
            if missing == 0 {
                break;
            }
            if quotas[c] < per_class[c].len() {
                quotas[c] += 1;
                missing -= 1;
            }
        }
        per_class
            .iter_mut()
            .zip(&quotas)
            .flat_map(|(pixels, &q)| {
                pixels.shuffle(&mut rng);
                pixels[..q].to_vec()
            })
            .collect()
    } else {
        let mut shuffled = labeled.clone();
        shuffled.shuffle(&mut rng);
        shuffled.truncate(n_train);
        shuffled
    };
    train.sort_unstable();

    let mut in_train = vec![false; gt.labels().len()];
    for &i in &train {
        in_train[i] = true;
    }
    let to_coord = |i: usize| (i / gt.width(), i % gt.width());
    let test_pixels = labeled
        .iter()
        .copied()
        .filter(|&i| !in_train[i])
        .map(to_coord)
        .collect();
    Ok(LabeledSplit {
        train_pixels: train.into_iter().map(to_coord).collect(),
        test_pixels,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    pub n_classes: u32,
    pub relevant_bands: usize,
    pub redundant_copies_per_relevant: usize,
    pub noise_bands: usize,
    /// Noise level as a fraction of the dynamic range.
    pub noise_amplitude: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            width: 64,
            height: 64,
            n_classes: 4,
            relevant_bands: 4,
            redundant_copies_per_relevant: 2,
            noise_bands: 8,
            noise_amplitude: 0.5,
        }
    }
}

impl SyntheticSpec {
    pub fn total_bands(&self) -> usize {
        self.relevant_bands * (1 + self.redundant_copies_per_relevant) + self.noise_bands
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidInput(
                "synthetic cube needs positive dimensions".into(),
            ));
        }
        if self.n_classes == 0 || (self.n_classes as usize) > self.width * self.height {
            return Err(Error::InvalidInput(format!(
                "{} classes cannot all be present in a {}x{} image",
                self.n_classes, self.width, self.height
            )));
        }
        if self.total_bands() < 2 {
            return Err(Error::InvalidInput(format!(
                "synthetic cube needs at least 2 bands, got {}",
                self.total_bands()
            )));
        }
        if !(0.0..=1.0).contains(&self.noise_amplitude) {
            return Err(Error::InvalidInput(format!(
                "noise amplitude must lie in [0, 1], got {}",
                self.noise_amplitude
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandRole {
    Relevant,
    Redundant { parent: usize },
    Noise,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub cube: HyperCube,
    pub gt: GroundTruthMap,
    /// Role of each band, indexed like the cube.
    pub roles: Vec<BandRole>,
}

impl SyntheticData {
    /// Provenance sidecar: `band_index,role,parent_index`.
    pub fn provenance_csv(&self) -> String {
        let mut out = String::from("band_index,role,parent_index\n");
        for (i, role) in self.roles.iter().enumerate() {
            match role {
                BandRole::Relevant => writeln!(out, "{i},relevant,").unwrap(),
                BandRole::Redundant { parent } => writeln!(out, "{i},redundant,{parent}").unwrap(),
                BandRole::Noise => writeln!(out, "{i},noise,").unwrap(),
            }
        }
        out
    }
}

/// Plants class signal in a random cube.
///
/// Band layout: each relevant band is followed by its redundant copies, then
/// all noise bands. A relevant band holds `k * 60000 / n_classes` for class
/// `k` plus uniform noise of half-width `noise_amplitude * 30000`. A copy is
/// its parent plus fresh noise of the same width. Noise bands are uniform over
/// a window of width `noise_amplitude * 60000` centered at 30000 and do not
/// depend on the labels.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_pixels = spec.width * spec.height;

    let mut labels: Vec<u32> = (0..n_pixels)
        .map(|i| (i % spec.n_classes as usize) as u32 + 1)
        .collect();
    labels.shuffle(&mut rng);

    let half_width = spec.noise_amplitude * SYNTH_RANGE / 2.0;
    let jitter = |rng: &mut ChaCha8Rng| {
        if half_width > 0.0 {
            rng.random_range(-half_width..=half_width)
        } else {
            0.0
        }
    };
    let to_sample = |v: f64| v.round().clamp(0.0, u16::MAX as f64) as u16;
    let level = SYNTH_RANGE / spec.n_classes as f64;

    let mut bands = Vec::with_capacity(spec.total_bands());
    let mut roles = Vec::with_capacity(spec.total_bands());
    for _ in 0..spec.relevant_bands {
        let parent: Vec<u16> = labels
            .iter()
            .map(|&k| to_sample(k as f64 * level + jitter(&mut rng)))
            .collect();
        let parent_index = bands.len();
        for _ in 0..spec.redundant_copies_per_relevant {
            let copy: Vec<u16> = parent
                .iter()
                .map(|&p| to_sample(p as f64 + jitter(&mut rng)))
                .collect();
            bands.push(copy);
            roles.push(BandRole::Redundant {
                parent: parent_index,
            });
        }
        bands.insert(parent_index, parent);
        roles.insert(parent_index, BandRole::Relevant);
    }
    for _ in 0..spec.noise_bands {
        let center = SYNTH_RANGE / 2.0;
        bands.push(
            (0..n_pixels)
                .map(|_| to_sample(center + jitter(&mut rng)))
                .collect(),
        );
        roles.push(BandRole::Noise);
    }

    Ok(SyntheticData {
        cube: HyperCube::new(spec.width, spec.height, bands)?,
        gt: GroundTruthMap::new(spec.width, spec.height, labels)?,
        roles,
    })
}
