//! Steepest ascent over the two-dimensional grid of threshold couples.
//!
//! From the current couple, each of the four axis neighbors is assessed by
//! comparing accuracy and band count:
//!
//! | Δaccuracy | Δbands | operator | R |
//! |-----------|--------|----------|---|
//! | < 0 | > 0 | J-not | |
//! | < 0 | = 0 | J-lost | +∞ |
//! | ≤ 0 | < 0 | J-lost | \|Δa\|/\|Δb\| |
//! | = 0 | > 0 | J-lost | 0 |
//! | = 0 | = 0 | J-not | |
//! | > 0 | ≤ 0 | J-best | \|Δa\|/\|Δb\| (+∞ when Δb = 0) |
//! | > 0 | > 0 | J-great | Δa/Δb |
//!
//! Undefined or off-grid neighbors are J-not and the neighbor just left is
//! marked Int. The move goes to the J-best with the highest R, else the
//! J-great with the highest R, else the J-lost with the lowest R. The search
//! stops when nothing is admissible or the chosen neighbor was already
//! visited.
//!
//! Directions: LEFT/RIGHT step the redundancy axis down/up, TOP/DOWN step the
//! relevance axis down/up.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bandselect::SelectionThresholds;
use crate::error::{Error, Result};
use crate::wrapper::{EvaluationRecord, WrapperEvaluator};

/// Redundancy thresholds of the default grid.
pub const DEFAULT_REDUNDANCY_AXIS: [f64; 23] = [
    0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.43, 0.45, 0.46, 0.47, 0.48, 0.49, 0.50, 0.51, 0.52,
    0.53, 0.54, 0.55, 0.56, 0.70, 0.90, 1.00,
];

/// Relevance thresholds of the default grid, in bits.
pub const DEFAULT_RELEVANCE_AXIS: [f64; 8] = [0.0, 0.4, 0.45, 0.57, 0.6, 0.9, 0.91, 0.93];

/// Anything that scores a threshold couple.
pub trait CoupleEvaluator {
    fn evaluate(&self, thresholds: SelectionThresholds) -> Result<EvaluationRecord>;

    /// Whether the couple selects anything; may be cheaper than `evaluate`.
    fn is_defined(&self, thresholds: SelectionThresholds) -> Result<bool> {
        Ok(self.evaluate(thresholds)?.defined())
    }
}

impl CoupleEvaluator for WrapperEvaluator<'_> {
    fn evaluate(&self, thresholds: SelectionThresholds) -> Result<EvaluationRecord> {
        WrapperEvaluator::evaluate(self, thresholds)
    }

    fn is_defined(&self, thresholds: SelectionThresholds) -> Result<bool> {
        Ok(!self.selection(thresholds).is_empty())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGrid {
    redundancy_axis: Vec<f64>,
    relevance_axis: Vec<f64>,
}

impl Default for ThresholdGrid {
    fn default() -> Self {
        ThresholdGrid {
            redundancy_axis: DEFAULT_REDUNDANCY_AXIS.to_vec(),
            relevance_axis: DEFAULT_RELEVANCE_AXIS.to_vec(),
        }
    }
}

impl ThresholdGrid {
    pub fn new(redundancy_axis: Vec<f64>, relevance_axis: Vec<f64>) -> Result<Self> {
        for (name, axis) in [
            ("redundancy", &redundancy_axis),
            ("relevance", &relevance_axis),
        ] {
            if axis.is_empty() {
                return Err(Error::Config(format!("{name} axis is empty")));
            }
            if axis
                .windows(2)
                .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
            {
                return Err(Error::Config(format!(
                    "{name} axis must be strictly increasing"
                )));
            }
        }
        if redundancy_axis.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Config(
                "redundancy thresholds must lie in [0, 1]".into(),
            ));
        }
        if relevance_axis.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config(
                "relevance thresholds must be non-negative".into(),
            ));
        }
        Ok(ThresholdGrid {
            redundancy_axis,
            relevance_axis,
        })
    }

    pub fn redundancy_axis(&self) -> &[f64] {
        &self.redundancy_axis
    }

    pub fn relevance_axis(&self) -> &[f64] {
        &self.relevance_axis
    }

    pub fn len(&self) -> usize {
        self.redundancy_axis.len() * self.relevance_axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, p: GridPoint) -> bool {
        p.ri < self.redundancy_axis.len() && p.mi < self.relevance_axis.len()
    }

    /// All points, redundancy-major.
    pub fn points(&self) -> impl Iterator<Item = GridPoint> + '_ {
        (0..self.redundancy_axis.len())
            .flat_map(move |ri| (0..self.relevance_axis.len()).map(move |mi| GridPoint { ri, mi }))
    }

    pub fn thresholds(&self, p: GridPoint) -> SelectionThresholds {
        SelectionThresholds {
            th_relevance: self.relevance_axis[p.mi],
            th_redundancy: self.redundancy_axis[p.ri],
        }
    }

    pub fn neighbor(&self, p: GridPoint, direction: Direction) -> Option<GridPoint> {
        let (ri, mi) = match direction {
            Direction::Left => (p.ri.checked_sub(1)?, p.mi),
            Direction::Right => (p.ri + 1, p.mi),
            Direction::Top => (p.ri, p.mi.checked_sub(1)?),
            Direction::Down => (p.ri, p.mi + 1),
        };
        let q = GridPoint { ri, mi };
        self.contains(q).then_some(q)
    }

    /// `th_redundancy-th_relevance`, the way couples are written in trajectories.
    pub fn label(&self, p: GridPoint) -> String {
        let t = self.thresholds(p);
        format!("{}-{}", t.th_redundancy, t.th_relevance)
    }
}

/// Index pair into the redundancy (`ri`) and relevance (`mi`) axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridPoint {
    pub ri: usize,
    pub mi: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Left,
    Down,
    Top,
    Right,
}

impl Direction {
    /// Assessment order, which is also the tie-breaking priority.
    pub const ALL: [Direction; 4] = [
        Direction::Left,
        Direction::Down,
        Direction::Top,
        Direction::Right,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Direction::Left => "left",
            Direction::Down => "down",
            Direction::Top => "top",
            Direction::Right => "right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operator {
    JNot,
    JBest,
    JLost,
    JGreat,
    /// Retreat to the previous point; never chosen.
    Int,
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Operator::JNot => "J-not",
            Operator::JBest => "J-best",
            Operator::JLost => "J-lost",
            Operator::JGreat => "J-great",
            Operator::Int => "Int",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionAssessment {
    pub direction: Direction,
    /// `None` when the neighbor is off-grid.
    pub target: Option<GridPoint>,
    pub operator: Operator,
    /// Accuracy change per band, present for J-best, J-great and J-lost.
    pub ratio: Option<f64>,
}

impl DirectionAssessment {
    fn blocked(direction: Direction, target: Option<GridPoint>) -> Self {
        DirectionAssessment {
            direction,
            target,
            operator: Operator::JNot,
            ratio: None,
        }
    }
}

/// Operator and ratio for moving from `from` to `to`; `to = None` is an
/// off-grid neighbor.
pub fn classify_direction(
    from: &EvaluationRecord,
    to: Option<&EvaluationRecord>,
) -> (Operator, Option<f64>) {
    let (Some(a0), Some(to)) = (from.accuracy, to) else {
        return (Operator::JNot, None);
    };
    let Some(a1) = to.accuracy else {
        return (Operator::JNot, None);
    };
    let da = a1 - a0;
    let db = to.n_bands() as f64 - from.n_bands() as f64;
    let ratio = |da: f64, db: f64| {
        if db == 0.0 {
            f64::INFINITY
        } else {
            da.abs() / db.abs()
        }
    };
    if da > 0.0 {
        if db <= 0.0 {
            (Operator::JBest, Some(ratio(da, db)))
        } else {
            (Operator::JGreat, Some(da / db))
        }
    } else if da < 0.0 {
        if db > 0.0 {
            (Operator::JNot, None)
        } else {
            (Operator::JLost, Some(ratio(da, db)))
        }
    } else if db == 0.0 {
        (Operator::JNot, None)
    } else {
        (
            Operator::JLost,
            Some(if db > 0.0 { 0.0 } else { ratio(da, db) }),
        )
    }
}

/// Marks the retreat as Int, then picks the move. `assessments` must be in
/// [`Direction::ALL`] order; `None` means no admissible move.
pub fn choose_move(
    assessments: &mut [DirectionAssessment; 4],
    predecessor: Option<GridPoint>,
) -> Option<(Direction, Operator)> {
    if let Some(prev) = predecessor {
        for a in assessments.iter_mut() {
            if a.target == Some(prev) {
                a.operator = Operator::Int;
                a.ratio = None;
            }
        }
    }
    let pick = |op: Operator, prefer_high: bool| {
        let mut best: Option<(&DirectionAssessment, f64)> = None;
        for a in assessments.iter().filter(|a| a.operator == op) {
            let r = a.ratio.unwrap_or(0.0);
            let better = match best {
                None => true,
                Some((_, br)) if prefer_high => r > br,
                Some((_, br)) => r < br,
            };
            if better {
                best = Some((a, r));
            }
        }
        best.map(|(a, _)| (a.direction, op))
    };
    pick(Operator::JBest, true)
        .or_else(|| pick(Operator::JGreat, true))
        .or_else(|| pick(Operator::JLost, false))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepReason {
    Moved,
    AllJNot,
    TargetAlreadyVisited,
    /// The starting couple itself selects no band.
    UndefinedStart,
}

impl fmt::Display for StepReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepReason::Moved => "moved",
            StepReason::AllJNot => "all-J-not",
            StepReason::TargetAlreadyVisited => "target-already-visited",
            StepReason::UndefinedStart => "undefined-start",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub point: GridPoint,
    pub record: EvaluationRecord,
    pub assessments: [DirectionAssessment; 4],
    /// `None` terminates the search.
    pub chosen: Option<Direction>,
    pub reason: StepReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub trajectory: Vec<TrajectoryStep>,
    pub start_point: GridPoint,
    pub final_point: GridPoint,
    pub final_record: EvaluationRecord,
    pub restart_seed: u64,
}

impl SearchResult {
    pub fn degenerate(&self) -> bool {
        self.trajectory.last().map(|s| s.reason) == Some(StepReason::UndefinedStart)
    }
}

type Memo = HashMap<GridPoint, EvaluationRecord>;

fn evaluate_at<E: CoupleEvaluator + ?Sized>(
    grid: &ThresholdGrid,
    evaluator: &E,
    memo: &mut Memo,
    p: GridPoint,
) -> Result<EvaluationRecord> {
    if let Some(r) = memo.get(&p) {
        return Ok(r.clone());
    }
    let t = grid.thresholds(p);
    let record = evaluator.evaluate(t).map_err(|e| match e {
        e @ Error::AtCouple { .. } => e,
        e => Error::AtCouple {
            th_relevance: t.th_relevance,
            th_redundancy: t.th_redundancy,
            source: Box::new(e),
        },
    })?;
    memo.insert(p, record.clone());
    Ok(record)
}

fn assess<E: CoupleEvaluator + ?Sized>(
    grid: &ThresholdGrid,
    evaluator: &E,
    memo: &mut Memo,
    p: GridPoint,
    record: &EvaluationRecord,
) -> Result<[DirectionAssessment; 4]> {
    let mut out = Direction::ALL.map(|d| DirectionAssessment::blocked(d, None));
    for (slot, d) in out.iter_mut().zip(Direction::ALL) {
        let target = grid.neighbor(p, d);
        let neighbor = match target {
            Some(q) => Some(evaluate_at(grid, evaluator, memo, q)?),
            None => None,
        };
        let (operator, ratio) = classify_direction(record, neighbor.as_ref());
        *slot = DirectionAssessment {
            direction: d,
            target,
            operator,
            ratio,
        };
    }
    Ok(out)
}

/// Single ascent from `start`. Each couple is evaluated at most once.
pub fn steepest_ascent<E: CoupleEvaluator + ?Sized>(
    grid: &ThresholdGrid,
    start: GridPoint,
    evaluator: &E,
) -> Result<SearchResult> {
    run_ascent(grid, start, evaluator, &mut Memo::new(), 0)
}

fn run_ascent<E: CoupleEvaluator + ?Sized>(
    grid: &ThresholdGrid,
    start: GridPoint,
    evaluator: &E,
    memo: &mut Memo,
    restart_seed: u64,
) -> Result<SearchResult> {
    if !grid.contains(start) {
        return Err(Error::InvalidInput(format!(
            "start {start:?} is off the grid"
        )));
    }
    let mut trajectory = Vec::new();
    let mut visited = HashSet::from([start]);
    let mut current = start;
    let mut predecessor = None;
    loop {
        let record = evaluate_at(grid, evaluator, memo, current)?;
        if !record.defined() {
            trajectory.push(TrajectoryStep {
                point: current,
                record: record.clone(),
                assessments: Direction::ALL
                    .map(|d| DirectionAssessment::blocked(d, grid.neighbor(current, d))),
                chosen: None,
                reason: StepReason::UndefinedStart,
            });
            return Ok(SearchResult {
                trajectory,
                start_point: start,
                final_point: current,
                final_record: record,
                restart_seed,
            });
        }
        let mut assessments = assess(grid, evaluator, memo, current, &record)?;
        let choice = choose_move(&mut assessments, predecessor);
        let next = choice.and_then(|(d, _)| grid.neighbor(current, d));
        let (chosen, reason) = match next {
            None => (None, StepReason::AllJNot),
            Some(q) if visited.contains(&q) => (None, StepReason::TargetAlreadyVisited),
            Some(_) => (choice.map(|(d, _)| d), StepReason::Moved),
        };
        trajectory.push(TrajectoryStep {
            point: current,
            record: record.clone(),
            assessments,
            chosen,
            reason,
        });
        match (reason, next) {
            (StepReason::Moved, Some(q)) => {
                visited.insert(q);
                predecessor = Some(current);
                current = q;
            }
            _ => {
                return Ok(SearchResult {
                    trajectory,
                    start_point: start,
                    final_point: current,
                    final_record: record,
                    restart_seed,
                })
            }
        }
    }
}

/// True when no neighbor is admissible or the preferred move leads back into
/// `visited`.
pub fn is_local_maximum<E: CoupleEvaluator + ?Sized>(
    point: GridPoint,
    grid: &ThresholdGrid,
    evaluator: &E,
    visited: &HashSet<GridPoint>,
) -> Result<bool> {
    let mut memo = Memo::new();
    let record = evaluate_at(grid, evaluator, &mut memo, point)?;
    if !record.defined() {
        return Ok(false);
    }
    let mut assessments = assess(grid, evaluator, &mut memo, point, &record)?;
    Ok(match choose_move(&mut assessments, None) {
        None => true,
        Some((d, _)) => grid.neighbor(point, d).is_none_or(|q| visited.contains(&q)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiStart {
    /// Index into `runs`.
    pub best: usize,
    pub runs: Vec<SearchResult>,
}

impl MultiStart {
    pub fn best(&self) -> &SearchResult {
        &self.runs[self.best]
    }
}

/// Runs the ascent from `n_restarts` seeded random starts. Starts are drawn
/// without replacement among defined couples, then with replacement once
/// those are exhausted. The best run has the highest final accuracy, then
/// fewer bands, then the earlier index.
pub fn multistart<E: CoupleEvaluator + ?Sized>(
    grid: &ThresholdGrid,
    n_restarts: usize,
    seed: u64,
    evaluator: &E,
) -> Result<MultiStart> {
    if n_restarts == 0 {
        return Err(Error::Config("at least one restart is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates: Vec<GridPoint> = grid.points().collect();
    candidates.shuffle(&mut rng);
    let mut candidates = candidates.into_iter();
    let mut defined: Vec<GridPoint> = Vec::new();

    let mut memo = Memo::new();
    let mut runs = Vec::with_capacity(n_restarts);
    for _ in 0..n_restarts {
        let mut start = None;
        for p in candidates.by_ref() {
            if evaluator.is_defined(grid.thresholds(p))? {
                defined.push(p);
                start = Some(p);
                break;
            }
        }
        let start = match start {
            Some(p) => p,
            None if defined.is_empty() => {
                return Err(Error::InvalidInput(
                    "no couple on the grid selects any band".into(),
                ))
            }
            None => defined[rng.random_range(0..defined.len())],
        };
        runs.push(run_ascent(grid, start, evaluator, &mut memo, seed)?);
    }

    let mut best = 0;
    for (i, run) in runs.iter().enumerate().skip(1) {
        let (a, b) = (&run.final_record, &runs[best].final_record);
        let acc = |r: &EvaluationRecord| r.accuracy.unwrap_or(f64::NEG_INFINITY);
        if acc(a) > acc(b) || (acc(a) == acc(b) && a.n_bands() < b.n_bands()) {
            best = i;
        }
    }
    Ok(MultiStart { best, runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    fn rec(accuracy: Option<f64>, n_bands: usize) -> EvaluationRecord {
        EvaluationRecord {
            thresholds: SelectionThresholds {
                th_relevance: 0.0,
                th_redundancy: 0.5,
            },
            bands: (0..n_bands).collect(),
            accuracy,
        }
    }

    fn classify(da: f64, db: i64) -> (Operator, Option<f64>) {
        let from = rec(Some(50.0), 10);
        let to = rec(Some(50.0 + da), (10 + db) as usize);
        classify_direction(&from, Some(&to))
    }

    #[test]
    fn rule_examples() {
        assert_eq!(classify(-1.0, 5), (Operator::JNot, None));
        assert_eq!(classify(2.0, -4), (Operator::JBest, Some(0.5)));
        assert_eq!(classify(0.0, 3), (Operator::JLost, Some(0.0)));
        let (op, r) = classify(1.2, 6);
        assert_eq!(op, Operator::JGreat);
        assert!((r.unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(classify(-0.5, 0), (Operator::JLost, Some(f64::INFINITY)));
        let from = rec(Some(50.0), 10);
        assert_eq!(
            classify_direction(&from, Some(&rec(None, 0))),
            (Operator::JNot, None)
        );
        assert_eq!(classify_direction(&from, None), (Operator::JNot, None));
    }

    fn a(d: Direction, op: Operator, r: Option<f64>) -> DirectionAssessment {
        DirectionAssessment {
            direction: d,
            target: Some(GridPoint {
                ri: d as usize,
                mi: 9,
            }),
            operator: op,
            ratio: r,
        }
    }

    #[test]
    fn choose_examples() {
        use Direction::*;
        use Operator::*;
        let mut set = [
            a(Left, JGreat, Some(5.0)),
            a(Down, JBest, Some(0.2)),
            a(Top, JNot, None),
            a(Right, JNot, None),
        ];
        assert_eq!(choose_move(&mut set, None), Some((Down, JBest)));

        let mut set = [
            a(Left, JLost, Some(0.3)),
            a(Down, JNot, None),
            a(Top, JLost, Some(0.1)),
            a(Right, JNot, None),
        ];
        assert_eq!(choose_move(&mut set, None), Some((Top, JLost)));

        let mut set = [
            a(Left, JNot, None),
            a(Down, JNot, None),
            a(Top, JNot, None),
            a(Right, JNot, None),
        ];
        assert_eq!(choose_move(&mut set, None), None);

        // ties keep the earlier direction
        let mut set = [
            a(Left, JNot, None),
            a(Down, JGreat, Some(1.0)),
            a(Top, JNot, None),
            a(Right, JGreat, Some(1.0)),
        ];
        assert_eq!(choose_move(&mut set, None), Some((Down, JGreat)));
    }

    #[test]
    fn retreat_is_interdicted() {
        use Direction::*;
        use Operator::*;
        let mut set = [
            a(Left, JBest, Some(3.0)),
            a(Down, JLost, Some(0.1)),
            a(Top, JNot, None),
            a(Right, JNot, None),
        ];
        let prev = set[0].target;
        assert_eq!(choose_move(&mut set, prev), Some((Down, JLost)));
        assert_eq!(set[0].operator, Int);
        assert_eq!(set[0].ratio, None);
    }

    /// Landscape given as `(accuracy, n_bands)` per point, redundancy-major.
    struct Table {
        grid: ThresholdGrid,
        cells: Vec<Option<(f64, usize)>>,
        calls: Cell<usize>,
    }

    impl Table {
        fn new(n_red: usize, n_rel: usize, cells: Vec<Option<(f64, usize)>>) -> Self {
            let grid = ThresholdGrid::new(
                (0..n_red)
                    .map(|i| (i + 1) as f64 / (n_red + 1) as f64)
                    .collect(),
                (0..n_rel).map(|i| i as f64 / 10.0).collect(),
            )
            .unwrap();
            Table {
                grid,
                cells,
                calls: Cell::new(0),
            }
        }
    }

    impl CoupleEvaluator for Table {
        fn evaluate(&self, t: SelectionThresholds) -> Result<EvaluationRecord> {
            self.calls.set(self.calls.get() + 1);
            let ri = self
                .grid
                .redundancy_axis()
                .iter()
                .position(|&v| v == t.th_redundancy)
                .unwrap();
            let mi = self
                .grid
                .relevance_axis()
                .iter()
                .position(|&v| v == t.th_relevance)
                .unwrap();
            let cell = self.cells[ri * self.grid.relevance_axis().len() + mi];
            Ok(match cell {
                Some((acc, n)) => EvaluationRecord {
                    thresholds: t,
                    bands: (0..n).collect(),
                    accuracy: Some(acc),
                },
                None => EvaluationRecord::undefined(t),
            })
        }
    }

    #[test]
    fn single_cell_grid() {
        let t = Table::new(1, 1, vec![Some((50.0, 3))]);
        let r = steepest_ascent(&t.grid, GridPoint { ri: 0, mi: 0 }, &t).unwrap();
        assert_eq!(r.trajectory.len(), 1);
        assert_eq!(r.trajectory[0].reason, StepReason::AllJNot);
        assert!(is_local_maximum(r.final_point, &t.grid, &t, &HashSet::new()).unwrap());
    }

    #[test]
    fn rising_line() {
        let t = Table::new(
            3,
            1,
            vec![Some((10.0, 4)), Some((20.0, 4)), Some((30.0, 4))],
        );
        let mid = GridPoint { ri: 1, mi: 0 };
        assert!(!is_local_maximum(mid, &t.grid, &t, &HashSet::new()).unwrap());
        let r = steepest_ascent(&t.grid, mid, &t).unwrap();
        assert_eq!(r.trajectory.len(), 2);
        assert_eq!(r.trajectory[0].chosen, Some(Direction::Right));
        assert_eq!(r.trajectory[0].assessments[3].operator, Operator::JBest);
        assert_eq!(r.trajectory[0].assessments[3].ratio, Some(f64::INFINITY));
        assert_eq!(r.final_point, GridPoint { ri: 2, mi: 0 });
        assert_eq!(r.trajectory[1].reason, StepReason::AllJNot);
        assert_eq!(r.trajectory[1].assessments[0].operator, Operator::Int);
    }

    #[test]
    fn revisit_terminates() {
        // 2x2, redundancy-major: (0,0) (0,1) / (1,0) (1,1).
        // (0,0) 60%/10: Down is J-lost R=0, Right is J-lost R=0.4 -> Down.
        // (0,1) 60%/8: Top is Int, Right is J-lost R=4/3 -> Right.
        // (1,1) 56%/5: Left is Int, Top is J-best R=+inf -> Top.
        // (1,0) 58%/5: Down is Int, Left is J-great R=0.4 -> (0,0), visited.
        let t = Table::new(
            2,
            2,
            vec![
                Some((60.0, 10)),
                Some((60.0, 8)),
                Some((58.0, 5)),
                Some((56.0, 5)),
            ],
        );
        let r = steepest_ascent(&t.grid, GridPoint { ri: 0, mi: 0 }, &t).unwrap();
        let points: Vec<GridPoint> = r.trajectory.iter().map(|s| s.point).collect();
        assert_eq!(
            points,
            vec![
                GridPoint { ri: 0, mi: 0 },
                GridPoint { ri: 0, mi: 1 },
                GridPoint { ri: 1, mi: 1 },
                GridPoint { ri: 1, mi: 0 },
            ]
        );
        assert_eq!(
            r.trajectory.last().unwrap().reason,
            StepReason::TargetAlreadyVisited
        );
        // four distinct points, each evaluated once
        assert_eq!(t.calls.get(), 4);
        let visited: HashSet<GridPoint> = points.into_iter().collect();
        assert!(is_local_maximum(r.final_point, &t.grid, &t, &visited).unwrap());
    }

    #[test]
    fn undefined_start_is_flagged() {
        let t = Table::new(2, 1, vec![None, Some((40.0, 2))]);
        let r = steepest_ascent(&t.grid, GridPoint { ri: 0, mi: 0 }, &t).unwrap();
        assert!(r.degenerate());
        assert_eq!(r.trajectory.len(), 1);
        // multistart never starts there
        let m = multistart(&t.grid, 3, 1, &t).unwrap();
        assert!(m
            .runs
            .iter()
            .all(|run| run.start_point == GridPoint { ri: 1, mi: 0 }));
    }

    #[test]
    fn multistart_errors() {
        let t = Table::new(2, 1, vec![None, None]);
        assert!(multistart(&t.grid, 2, 1, &t).is_err());
        let t = Table::new(1, 1, vec![Some((1.0, 1))]);
        assert!(multistart(&t.grid, 0, 1, &t).is_err());
    }

    #[test]
    fn multistart_single_restart_matches_ascent() {
        let t = Table::new(
            3,
            2,
            vec![
                Some((10.0, 4)),
                Some((15.0, 3)),
                Some((20.0, 6)),
                Some((12.0, 2)),
                Some((25.0, 8)),
                Some((9.0, 1)),
            ],
        );
        let m = multistart(&t.grid, 1, 77, &t).unwrap();
        let single = steepest_ascent(&t.grid, m.runs[0].start_point, &t).unwrap();
        assert_eq!(m.runs[0].trajectory, single.trajectory);
        assert_eq!(m.best, 0);
    }

    #[test]
    fn grid_validation_and_geometry() {
        assert!(ThresholdGrid::new(vec![], vec![0.1]).is_err());
        assert!(ThresholdGrid::new(vec![0.2, 0.1], vec![0.1]).is_err());
        assert!(ThresholdGrid::new(vec![0.5, 1.5], vec![0.1]).is_err());
        let g = ThresholdGrid::default();
        assert_eq!(g.len(), 23 * 8);
        let p = GridPoint { ri: 0, mi: 0 };
        assert_eq!(g.neighbor(p, Direction::Left), None);
        assert_eq!(g.neighbor(p, Direction::Top), None);
        assert_eq!(
            g.neighbor(p, Direction::Right),
            Some(GridPoint { ri: 1, mi: 0 })
        );
        assert_eq!(
            g.neighbor(p, Direction::Down),
            Some(GridPoint { ri: 0, mi: 1 })
        );
        assert_eq!(g.label(GridPoint { ri: 21, mi: 1 }), "0.9-0.4");
    }
}
