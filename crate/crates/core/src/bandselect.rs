//! Two-stage band selection: keep the bands whose mutual information with the
//! ground truth exceeds a relevance threshold, then greedily admit bands from
//! the least-redundant pairs while their symmetric uncertainty with every
//! already admitted band stays below a redundancy threshold.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::datacube::{GroundTruthMap, HyperCube};
use crate::error::{Error, Result};
use crate::infotheory::{mi_profile, quantize_band, DiscretizedBand, PairCounter};

/// Working-matrix fill value for cells that are not (or no longer) candidates.
pub const SENTINEL: f64 = 1.0;

/// The couple `(th_relevance, th_redundancy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionThresholds {
    /// Mutual-information threshold in bits; bands must exceed it strictly.
    pub th_relevance: f64,
    /// Symmetric-uncertainty threshold in `[0, 1]`.
    pub th_redundancy: f64,
}

impl SelectionThresholds {
    pub fn new(th_relevance: f64, th_redundancy: f64) -> Result<Self> {
        if !th_relevance.is_finite() || th_relevance < 0.0 {
            return Err(Error::InvalidInput(format!(
                "relevance threshold must be a non-negative number, got {th_relevance}"
            )));
        }
        if !(0.0..=1.0).contains(&th_redundancy) {
            return Err(Error::InvalidInput(format!(
                "redundancy threshold must lie in [0, 1], got {th_redundancy}"
            )));
        }
        Ok(SelectionThresholds {
            th_relevance,
            th_redundancy,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandSubset {
    /// Original band indices in admission order.
    pub bands: Vec<usize>,
    pub thresholds: SelectionThresholds,
}

impl BandSubset {
    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }
}

/// Which matrix the admission test reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RedundancyMode {
    /// Admission compares against the untouched SU values.
    #[default]
    Pristine,
    /// Admission reads the working matrix, where consumed cells already hold
    /// the sentinel.
    Literal,
}

/// Bands whose MI exceeds `th_relevance`, ascending by MI (ties by index).
pub fn relevance_filter(profile: &[f64], th_relevance: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = (0..profile.len())
        .filter(|&i| profile[i] > th_relevance)
        .collect();
    kept.sort_by(|&a, &b| profile[a].total_cmp(&profile[b]).then(a.cmp(&b)));
    kept
}

/// Pairwise symmetric uncertainty among the relevance-ordered bands.
#[derive(Debug, Clone, PartialEq)]
pub struct RedundancyMatrix {
    order: Vec<usize>,
    pristine: Vec<f64>,
    cells: Vec<f64>,
}

impl RedundancyMatrix {
    /// `pristine` is a row-major `n x n` symmetric SU table over `order`.
    pub fn from_pristine(order: Vec<usize>, pristine: Vec<f64>) -> Result<Self> {
        let n = order.len();
        if pristine.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "{} SU values for {n} bands",
                pristine.len()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let v = pristine[i * n + j];
                if !(0.0..=1.0).contains(&v) || v != pristine[j * n + i] {
                    return Err(Error::InvalidInput(format!(
                        "SU table entry ({i}, {j}) = {v} is not a symmetric value in [0, 1]"
                    )));
                }
            }
        }
        let mut cells = vec![SENTINEL; n * n];
        for i in 0..n {
            for j in i + 1..n {
                cells[i * n + j] = pristine[i * n + j];
            }
        }
        Ok(RedundancyMatrix {
            order,
            pristine,
            cells,
        })
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    /// Original band indices, ascending by MI.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn pristine(&self, i: usize, j: usize) -> f64 {
        self.pristine[i * self.n() + j]
    }

    /// Initial working matrix: SU above the diagonal, the sentinel elsewhere.
    pub fn cell(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.n() + j]
    }

    /// Upper-triangle cells in the order the argmin loop consumes them:
    /// ascending value, then lexicographic `(i, j)`.
    fn consumption_order(&self) -> Vec<(f64, usize, usize)> {
        let n = self.n();
        let mut cells: Vec<(f64, usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| (self.cell(i, j), i, j))
            .collect();
        cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        cells
    }
}

/// Computes SU for every pair of `order` (original band indices).
pub fn build_redundancy_matrix(
    cube: &HyperCube,
    order: &[usize],
    n_levels: u32,
) -> Result<RedundancyMatrix> {
    if let Some(&b) = order.iter().find(|&&b| b >= cube.n_bands()) {
        return Err(Error::InvalidInput(format!(
            "band {b} out of range for a {}-band cube",
            cube.n_bands()
        )));
    }
    let bands = order
        .iter()
        .map(|&b| quantize_band(cube.band(b), n_levels))
        .collect::<Result<Vec<_>>>()?;
    let pristine = pairwise_su(&bands, n_levels);
    RedundancyMatrix::from_pristine(order.to_vec(), pristine)
}

fn pairwise_su(bands: &[DiscretizedBand], n_levels: u32) -> Vec<f64> {
    let n = bands.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map_init(
            || PairCounter::new(n_levels, n_levels),
            |counter, &(i, j)| {
                counter
                    .stats(&bands[i], &bands[j], None)
                    .symmetric_uncertainty()
            },
        )
        .collect();
    let mut table = vec![1.0; n * n];
    for (&(i, j), v) in pairs.iter().zip(values) {
        table[i * n + j] = v;
        table[j * n + i] = v;
    }
    table
}

/// Greedy redundancy control over the working matrix. While the smallest
/// remaining cell is below `th_redundancy`, both bands of that pair are
/// offered (first `x`, then `y`) and admitted when their SU with every band
/// already admitted is below the threshold; the cell is then consumed.
///
/// Consumed cells are never smaller than the cells still pending, so the
/// successive minima are the upper-triangle cells in sorted order.
pub fn redundancy_filter(
    matrix: &RedundancyMatrix,
    th_redundancy: f64,
    mode: RedundancyMode,
) -> Vec<usize> {
    let n = matrix.n();
    let mut consumed = vec![false; n * n];
    let mut selected: Vec<usize> = Vec::new();
    let mut in_selected = vec![false; n];

    let working = |consumed: &[bool], a: usize, b: usize| {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        if consumed[i * n + j] {
            SENTINEL
        } else {
            matrix.cell(i, j)
        }
    };

    for (value, x, y) in matrix.consumption_order() {
        if value.partial_cmp(&th_redundancy) != Some(Ordering::Less) {
            break;
        }
        for candidate in [x, y] {
            if in_selected[candidate] {
                continue;
            }
            let admissible = selected.iter().all(|&l| {
                let su = match mode {
                    RedundancyMode::Pristine => matrix.pristine(candidate, l),
                    RedundancyMode::Literal => working(&consumed, candidate, l),
                };
                su < th_redundancy
            });
            if admissible {
                selected.push(candidate);
                in_selected[candidate] = true;
            }
        }
        consumed[x * n + y] = true;
    }
    selected.into_iter().map(|i| matrix.order[i]).collect()
}

/// Full two-stage selection for one threshold couple.
pub fn select_bands(
    cube: &HyperCube,
    gt: &GroundTruthMap,
    thresholds: SelectionThresholds,
    n_levels: u32,
    mode: RedundancyMode,
) -> Result<BandSubset> {
    let profile = mi_profile(cube, gt, n_levels, true)?;
    let order = relevance_filter(&profile, thresholds.th_relevance);
    let matrix = build_redundancy_matrix(cube, &order, n_levels)?;
    Ok(BandSubset {
        bands: redundancy_filter(&matrix, thresholds.th_redundancy, mode),
        thresholds,
    })
}

/// Precomputes the MI profile and the full band-by-band SU table once, so
/// that many threshold couples can be selected cheaply.
#[derive(Debug, Clone)]
pub struct BandSelector {
    profile: Vec<f64>,
    su: Vec<f64>,
    n_bands: usize,
    mode: RedundancyMode,
}

impl BandSelector {
    pub fn new(
        cube: &HyperCube,
        gt: &GroundTruthMap,
        n_levels: u32,
        labeled_only: bool,
        mode: RedundancyMode,
    ) -> Result<Self> {
        let profile = mi_profile(cube, gt, n_levels, labeled_only)?;
        let bands = cube
            .bands()
            .iter()
            .map(|b| quantize_band(b, n_levels))
            .collect::<Result<Vec<_>>>()?;
        Ok(BandSelector {
            profile,
            su: pairwise_su(&bands, n_levels),
            n_bands: cube.n_bands(),
            mode,
        })
    }

    pub fn profile(&self) -> &[f64] {
        &self.profile
    }

    pub fn su(&self, a: usize, b: usize) -> f64 {
        self.su[a * self.n_bands + b]
    }

    pub fn mode(&self) -> RedundancyMode {
        self.mode
    }

    pub fn matrix(&self, th_relevance: f64) -> RedundancyMatrix {
        let order = relevance_filter(&self.profile, th_relevance);
        let pristine = order
            .iter()
            .flat_map(|&a| order.iter().map(move |&b| (a, b)))
            .map(|(a, b)| self.su(a, b))
            .collect();
        RedundancyMatrix::from_pristine(order, pristine).expect("SU table is symmetric")
    }

    pub fn select(&self, thresholds: SelectionThresholds) -> BandSubset {
        let matrix = self.matrix(thresholds.th_relevance);
        BandSubset {
            bands: redundancy_filter(&matrix, thresholds.th_redundancy, self.mode),
            thresholds,
        }
    }
}
