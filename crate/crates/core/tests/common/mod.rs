#![allow(dead_code)]

use std::cell::RefCell;
use std::collections::HashMap;

use hsiselect::ascent::{CoupleEvaluator, GridPoint, ThresholdGrid};
use hsiselect::bandselect::SelectionThresholds;
use hsiselect::datacube::{generate_synthetic, SyntheticData, SyntheticSpec};
use hsiselect::wrapper::EvaluationRecord;
use hsiselect::Result;

/// Landscape given as `(accuracy, n_bands)` per point, `None` for an
/// undefined couple. Counts every `evaluate` call per point.
#[derive(Debug)]
pub struct Landscape {
    pub grid: ThresholdGrid,
    cells: Vec<Option<(f64, usize)>>,
    pub calls: RefCell<HashMap<GridPoint, usize>>,
}

impl Landscape {
    /// `cells[ri][mi]`.
    pub fn new(cells: Vec<Vec<Option<(f64, usize)>>>) -> Self {
        let n_red = cells.len();
        let n_rel = cells[0].len();
        let grid = ThresholdGrid::new(
            (0..n_red)
                .map(|i| (i + 1) as f64 / (n_red + 1) as f64)
                .collect(),
            (0..n_rel).map(|i| i as f64 / 10.0).collect(),
        )
        .unwrap();
        Landscape {
            grid,
            cells: cells.into_iter().flatten().collect(),
            calls: RefCell::new(HashMap::new()),
        }
    }

    pub fn point_of(&self, t: SelectionThresholds) -> GridPoint {
        GridPoint {
            ri: self
                .grid
                .redundancy_axis()
                .iter()
                .position(|&v| v == t.th_redundancy)
                .unwrap(),
            mi: self
                .grid
                .relevance_axis()
                .iter()
                .position(|&v| v == t.th_relevance)
                .unwrap(),
        }
    }

    pub fn cell(&self, p: GridPoint) -> Option<(f64, usize)> {
        self.cells[p.ri * self.grid.relevance_axis().len() + p.mi]
    }

    pub fn total_calls(&self) -> usize {
        self.calls.borrow().values().sum()
    }

    /// Points with no strictly more accurate neighbor, by brute force.
    pub fn exhaustive_maxima(&self) -> Vec<GridPoint> {
        let acc = |p: GridPoint| self.cell(p).map(|c| c.0);
        self.grid
            .points()
            .filter(|&p| {
                let Some(a) = acc(p) else { return false };
                let (ri, mi) = (p.ri as isize, p.mi as isize);
                [(ri - 1, mi), (ri + 1, mi), (ri, mi - 1), (ri, mi + 1)]
                    .into_iter()
                    .filter(|&(r, m)| r >= 0 && m >= 0)
                    .map(|(r, m)| GridPoint {
                        ri: r as usize,
                        mi: m as usize,
                    })
                    .filter(|q| self.grid.contains(*q))
                    .all(|q| acc(q).is_none_or(|b| b < a))
            })
            .collect()
    }

    pub fn exhaustive_argmax(&self) -> GridPoint {
        self.grid
            .points()
            .filter(|&p| self.cell(p).is_some())
            .max_by(|&a, &b| {
                let (a, b) = (self.cell(a).unwrap(), self.cell(b).unwrap());
                a.0.total_cmp(&b.0).then(b.1.cmp(&a.1))
            })
            .unwrap()
    }
}

impl CoupleEvaluator for Landscape {
    fn evaluate(&self, t: SelectionThresholds) -> Result<EvaluationRecord> {
        let p = self.point_of(t);
        *self.calls.borrow_mut().entry(p).or_default() += 1;
        Ok(match self.cell(p) {
            Some((accuracy, n)) => EvaluationRecord {
                thresholds: t,
                bands: (0..n).collect(),
                accuracy: Some(accuracy),
            },
            None => EvaluationRecord::undefined(t),
        })
    }

    fn is_defined(&self, t: SelectionThresholds) -> Result<bool> {
        Ok(self.cell(self.point_of(t)).is_some())
    }
}

/// 5x5 landscape with two cones: the global peak at (4,4) (95%, 10 bands)
/// and an inferior one at (0,0) (80%, 10 bands). Accuracy falls by 5 and the
/// band count rises by 3 per step away from a cell's peak; each cell follows
/// whichever cone gives it the higher accuracy.
pub fn two_peaks() -> Landscape {
    let peaks: [((usize, usize), f64); 2] = [((4, 4), 95.0), ((0, 0), 80.0)];
    let cells = (0..5)
        .map(|ri: usize| {
            (0..5)
                .map(|mi: usize| {
                    let (a, b) = peaks
                        .iter()
                        .map(|&((pr, pm), top)| {
                            let d = ri.abs_diff(pr) + mi.abs_diff(pm);
                            (top - 5.0 * d as f64, 10 + 3 * d)
                        })
                        .max_by(|x, y| x.0.total_cmp(&y.0))
                        .unwrap();
                    Some((a, b))
                })
                .collect()
        })
        .collect();
    Landscape::new(cells)
}

pub fn synthetic(spec: SyntheticSpec, seed: u64) -> SyntheticData {
    generate_synthetic(&spec, seed).unwrap()
}

pub fn small_spec(relevant: usize, copies: usize, noise: usize) -> SyntheticSpec {
    SyntheticSpec {
        width: 12,
        height: 12,
        n_classes: 3,
        relevant_bands: relevant,
        redundant_copies_per_relevant: copies,
        noise_bands: noise,
        noise_amplitude: 0.3,
    }
}

/// Step-by-step transcription of the selection procedure on a working matrix
/// `D`: sort by relevance, cut, then repeatedly take the minimum cell of `D`,
/// offer both of its bands, and overwrite the cell with 1.
pub fn literal_selection(
    profile: &[f64],
    su: impl Fn(usize, usize) -> f64,
    th_relevance: f64,
    th_redundancy: f64,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..profile.len())
        .filter(|&b| profile[b] > th_relevance)
        .collect();
    order.sort_by(|&a, &b| profile[a].total_cmp(&profile[b]).then(a.cmp(&b)));
    let n = order.len();
    let mut d = vec![vec![1.0f64; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            d[i][j] = su(order[i], order[j]);
        }
    }
    let mut ss: Vec<usize> = Vec::new();
    loop {
        let mut min = f64::INFINITY;
        let mut arg = (0, 0);
        for (i, row) in d.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v < min {
                    min = v;
                    arg = (i, j);
                }
            }
        }
        if min >= th_redundancy {
            break;
        }
        let (x, y) = arg;
        for band in [order[x], order[y]] {
            if !ss.contains(&band) && ss.iter().all(|&l| su(band, l) < th_redundancy) {
                ss.push(band);
            }
        }
        d[x][y] = 1.0;
    }
    ss
}
