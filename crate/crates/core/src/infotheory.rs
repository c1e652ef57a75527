//! Histogram estimators for entropy, mutual information and symmetric
//! uncertainty over quantized bands. All quantities are in bits.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::datacube::{GroundTruthMap, HyperCube};
use crate::error::{Error, Result};

pub const DEFAULT_LEVELS: u32 = 256;

/// Slack allowed when checking `I(C;X) <= H(C)`.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-9;

/// Joint tables larger than this are counted sparsely.
const DENSE_JOINT_LIMIT: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscretizedBand {
    values: Vec<u32>,
    n_levels: u32,
}

impl DiscretizedBand {
    pub fn new(values: Vec<u32>, n_levels: u32) -> Result<Self> {
        if n_levels == 0 {
            return Err(Error::InvalidInput("n_levels must be at least 1".into()));
        }
        if let Some(v) = values.iter().find(|&&v| v >= n_levels) {
            return Err(Error::InvalidInput(format!(
                "bin {v} outside [0, {n_levels})"
            )));
        }
        Ok(DiscretizedBand { values, n_levels })
    }

    /// Class labels as a variable with `num_classes + 1` levels (0 included).
    pub fn from_labels(gt: &GroundTruthMap) -> Self {
        DiscretizedBand {
            values: gt.labels().to_vec(),
            n_levels: gt.num_classes() + 1,
        }
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn n_levels(&self) -> u32 {
        self.n_levels
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn histogram(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_levels as usize];
        for &v in &self.values {
            counts[v as usize] += 1;
        }
        counts
    }
}

/// Uniform-width binning of the 16-bit range: `bin = floor(value * n_levels / 65536)`.
pub fn quantize_band(band: &[u16], n_levels: u32) -> Result<DiscretizedBand> {
    if n_levels == 0 {
        return Err(Error::InvalidInput("n_levels must be at least 1".into()));
    }
    let levels = n_levels as u64;
    let values = band
        .iter()
        .map(|&v| ((v as u64 * levels) >> 16) as u32)
        .collect();
    Ok(DiscretizedBand { values, n_levels })
}

/// Shannon entropy of a count vector, with `0 log 0 = 0`.
pub fn entropy(counts: &[u64]) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidInput("entropy of an empty histogram".into()));
    }
    Ok(entropy_of_total(counts.iter().copied(), total))
}

fn entropy_of_total(counts: impl Iterator<Item = u64>, total: u64) -> f64 {
    let n = total as f64;
    let h: f64 = counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointHistogram {
    n_a: usize,
    n_b: usize,
    counts: Vec<u64>,
    total: u64,
}

impl JointHistogram {
    /// Builds from a row-per-`a`-value grid of counts.
    pub fn from_counts(rows: &[Vec<u64>]) -> Result<Self> {
        let n_a = rows.len();
        let n_b = rows.first().map_or(0, Vec::len);
        if n_a == 0 || n_b == 0 || rows.iter().any(|r| r.len() != n_b) {
            return Err(Error::InvalidInput(
                "joint histogram must be a non-empty rectangle".into(),
            ));
        }
        let counts: Vec<u64> = rows.iter().flatten().copied().collect();
        let total = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidInput(
                "joint histogram has zero total count".into(),
            ));
        }
        Ok(JointHistogram {
            n_a,
            n_b,
            counts,
            total,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_a, self.n_b)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.n_b + j]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.n_b).map(<[u64]>::to_vec).collect()
    }

    pub fn transpose(&self) -> JointHistogram {
        let mut counts = vec![0; self.counts.len()];
        for i in 0..self.n_a {
            for j in 0..self.n_b {
                counts[j * self.n_a + i] = self.get(i, j);
            }
        }
        JointHistogram {
            n_a: self.n_b,
            n_b: self.n_a,
            counts,
            total: self.total,
        }
    }

    pub fn marginal_a(&self) -> Vec<u64> {
        self.counts
            .chunks(self.n_b)
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn marginal_b(&self) -> Vec<u64> {
        let mut m = vec![0; self.n_b];
        for row in self.counts.chunks(self.n_b) {
            for (acc, c) in m.iter_mut().zip(row) {
                *acc += c;
            }
        }
        m
    }
}

/// Counts co-occurrences of `a` and `b` at every position, or at the masked
/// positions only.
pub fn joint_histogram(
    a: &DiscretizedBand,
    b: &DiscretizedBand,
    mask: Option<&[usize]>,
) -> Result<JointHistogram> {
    check_lengths(a, b, mask)?;
    let n_a = a.n_levels as usize;
    let n_b = b.n_levels as usize;
    let mut counts = vec![0u64; n_a * n_b];
    let mut bump = |k: usize| counts[a.values[k] as usize * n_b + b.values[k] as usize] += 1;
    match mask {
        Some(m) => m.iter().for_each(|&k| bump(k)),
        None => (0..a.len()).for_each(bump),
    }
    let total = counts.iter().sum();
    Ok(JointHistogram {
        n_a,
        n_b,
        counts,
        total,
    })
}

fn check_lengths(a: &DiscretizedBand, b: &DiscretizedBand, mask: Option<&[usize]>) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "variables have {} and {} samples",
            a.len(),
            b.len()
        )));
    }
    match mask {
        Some([]) => Err(Error::InvalidInput("empty mask".into())),
        Some(m) => match m.iter().find(|&&k| k >= a.len()) {
            Some(k) => Err(Error::InvalidInput(format!(
                "mask position {k} out of range for {} samples",
                a.len()
            ))),
            None => Ok(()),
        },
        None if a.is_empty() => Err(Error::InvalidInput("variables have no samples".into())),
        None => Ok(()),
    }
}

/// `I(A;B) = sum p(a,b) log2(p(a,b) / (p(a) p(b)))` over the non-empty cells.
pub fn mutual_information(j: &JointHistogram) -> f64 {
    let row = j.marginal_a();
    let col = j.marginal_b();
    let n = j.total as f64;
    let mut mi = 0.0;
    for (i, &ri) in row.iter().enumerate() {
        for (k, &ck) in col.iter().enumerate() {
            let c = j.get(i, k);
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (ri as f64 * ck as f64)).log2();
            }
        }
    }
    mi
}

/// `H(C|X) = H(C) - I(C;X)`, clamped at zero.
pub fn conditional_entropy(h_c: f64, mi: f64) -> Result<f64> {
    if mi > h_c + CONSISTENCY_TOLERANCE || mi < -CONSISTENCY_TOLERANCE {
        return Err(Error::Inconsistent { mi, entropy: h_c });
    }
    Ok((h_c - mi).max(0.0))
}

/// `U(A,B) = 2 I(A;B) / (H(A) + H(B))` over all positions.
///
/// Two constant variables have `U = 1`. When the joint support is a bijection
/// between the two marginal supports the result is exactly 1.
pub fn symmetric_uncertainty(a: &DiscretizedBand, b: &DiscretizedBand) -> Result<f64> {
    check_lengths(a, b, None)?;
    Ok(PairCounter::new(a.n_levels, b.n_levels)
        .stats(a, b, None)
        .symmetric_uncertainty())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PairStats {
    pub mi: f64,
    pub h_a: f64,
    pub h_b: f64,
    /// Every occupied value of `a` pairs with exactly one value of `b` and
    /// vice versa.
    pub bijective: bool,
}

impl PairStats {
    pub fn symmetric_uncertainty(&self) -> f64 {
        if self.bijective {
            return 1.0;
        }
        let denom = self.h_a + self.h_b;
        if denom <= 0.0 {
            return 1.0;
        }
        (2.0 * self.mi / denom).clamp(0.0, 1.0)
    }
}

/// Reusable counting buffers for pairwise statistics; only touched cells are
/// visited and reset, so one pass costs O(samples).
pub(crate) struct PairCounter {
    n_b: usize,
    dense: Option<Vec<u64>>,
    sparse: HashMap<u64, u64>,
    touched: Vec<usize>,
    marg_a: Vec<u64>,
    marg_b: Vec<u64>,
}

impl PairCounter {
    pub fn new(n_a: u32, n_b: u32) -> Self {
        let cells = n_a as usize * n_b as usize;
        PairCounter {
            n_b: n_b as usize,
            dense: (cells <= DENSE_JOINT_LIMIT).then(|| vec![0; cells]),
            sparse: HashMap::new(),
            touched: Vec::new(),
            marg_a: vec![0; n_a as usize],
            marg_b: vec![0; n_b as usize],
        }
    }

    /// Caller guarantees matching lengths, level counts and in-range mask.
    pub fn stats(
        &mut self,
        a: &DiscretizedBand,
        b: &DiscretizedBand,
        mask: Option<&[usize]>,
    ) -> PairStats {
        debug_assert_eq!(a.n_levels as usize, self.marg_a.len());
        debug_assert_eq!(b.n_levels as usize, self.marg_b.len());
        let mut total = 0u64;
        let mut visit = |k: usize| {
            let (va, vb) = (a.values[k] as usize, b.values[k] as usize);
            self.marg_a[va] += 1;
            self.marg_b[vb] += 1;
            let cell = va * self.n_b + vb;
            match &mut self.dense {
                Some(d) => {
                    if d[cell] == 0 {
                        self.touched.push(cell);
                    }
                    d[cell] += 1;
                }
                None => {
                    let slot = self.sparse.entry(cell as u64).or_insert(0);
                    if *slot == 0 {
                        self.touched.push(cell);
                    }
                    *slot += 1;
                }
            }
            total += 1;
        };
        match mask {
            Some(m) => m.iter().for_each(|&k| visit(k)),
            None => (0..a.len()).for_each(visit),
        }

        let n = total as f64;
        let mut mi = 0.0;
        let mut occupied_a = 0usize;
        let mut occupied_b = 0usize;
        for &cell in &self.touched {
            let (va, vb) = (cell / self.n_b, cell % self.n_b);
            let c = match &self.dense {
                Some(d) => d[cell],
                None => self.sparse[&(cell as u64)],
            } as f64;
            mi += c / n * (c * n / (self.marg_a[va] as f64 * self.marg_b[vb] as f64)).log2();
        }
        let mut h_a = 0.0;
        let mut h_b = 0.0;
        for &cell in &self.touched {
            let (va, vb) = (cell / self.n_b, cell % self.n_b);
            for (marg, v, h, occupied) in [
                (&mut self.marg_a, va, &mut h_a, &mut occupied_a),
                (&mut self.marg_b, vb, &mut h_b, &mut occupied_b),
            ] {
                let c = std::mem::take(&mut marg[v]);
                if c > 0 {
                    let p = c as f64 / n;
                    *h -= p * p.log2();
                    *occupied += 1;
                }
            }
        }
        let occupied_cells = self.touched.len();
        for cell in self.touched.drain(..) {
            match &mut self.dense {
                Some(d) => d[cell] = 0,
                None => {
                    self.sparse.remove(&(cell as u64));
                }
            }
        }
        PairStats {
            mi,
            h_a: h_a.max(0.0),
            h_b: h_b.max(0.0),
            bijective: occupied_cells == occupied_a && occupied_cells == occupied_b,
        }
    }
}

/// Mutual information of every band with the ground truth. With
/// `labeled_only`, unlabeled pixels (class 0) are excluded.
pub fn mi_profile(
    cube: &HyperCube,
    gt: &GroundTruthMap,
    n_levels: u32,
    labeled_only: bool,
) -> Result<Vec<f64>> {
    gt.check_matches(cube)?;
    if n_levels == 0 {
        return Err(Error::InvalidInput("n_levels must be at least 1".into()));
    }
    let labels = DiscretizedBand::from_labels(gt);
    let mask = labeled_only.then(|| gt.labeled_indices());
    let mask = mask.as_deref();
    Ok((0..cube.n_bands())
        .into_par_iter()
        .map_init(
            || PairCounter::new(n_levels, labels.n_levels),
            |counter, i| {
                let band = quantize_band(cube.band(i), n_levels).expect("n_levels checked");
                counter.stats(&band, &labels, mask).mi
            },
        )
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanoBounds {
    pub conditional_entropy: f64,
    pub lower_bound_pe: f64,
    pub num_classes: u32,
}

/// Lower bound on the classification error probability:
/// `Pe >= (H(C|X) - 1) / log2(Nc)`, clamped to `[0, 1]`.
pub fn fano_lower_bound(h_c_given_x: f64, num_classes: u32) -> Result<FanoBounds> {
    if num_classes < 2 {
        return Err(Error::InvalidInput(format!(
            "Fano bound needs at least 2 classes, got {num_classes}"
        )));
    }
    if h_c_given_x.is_nan() || h_c_given_x < 0.0 {
        return Err(Error::InvalidInput(format!(
            "conditional entropy must be non-negative, got {h_c_given_x}"
        )));
    }
    let bound = (h_c_given_x - 1.0) / (num_classes as f64).log2();
    Ok(FanoBounds {
        conditional_entropy: h_c_given_x,
        lower_bound_pe: bound.clamp(0.0, 1.0),
        num_classes,
    })
}
