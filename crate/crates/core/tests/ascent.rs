mod common;

use std::collections::HashSet;

use proptest::prelude::*;

use common::{two_peaks, Landscape};
use hsiselect::ascent::{
    choose_move, is_local_maximum, multistart, steepest_ascent, Direction, DirectionAssessment,
    GridPoint, Operator, StepReason,
};
use hsiselect::commands::summary_csv;

fn landscape() -> impl Strategy<Value = Landscape> {
    (1usize..=5, 1usize..=5).prop_flat_map(|(nr, nm)| {
        let cell = prop_oneof![
            1 => Just(None),
            6 => (0u8..=8, 1usize..=6).prop_map(|(a, b)| Some((50.0 + a as f64 * 5.0, b))),
        ];
        prop::collection::vec(prop::collection::vec(cell, nm), nr).prop_map(Landscape::new)
    })
}

fn neighbors(l: &Landscape, p: GridPoint) -> Vec<GridPoint> {
    Direction::ALL
        .iter()
        .filter_map(|&d| l.grid.neighbor(p, d))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn trajectory_invariants(l in landscape(), start_ri in 0usize..5, start_mi in 0usize..5) {
        let start = GridPoint {
            ri: start_ri % l.grid.redundancy_axis().len(),
            mi: start_mi % l.grid.relevance_axis().len(),
        };
        let r = steepest_ascent(&l.grid, start, &l).unwrap();
        let points: Vec<GridPoint> = r.trajectory.iter().map(|s| s.point).collect();

        // no revisits, bounded length
        let visited: HashSet<GridPoint> = points.iter().copied().collect();
        prop_assert_eq!(visited.len(), points.len());
        prop_assert!(points.len() <= l.grid.len());

        // chosen is empty exactly on the last step
        for (i, step) in r.trajectory.iter().enumerate() {
            let last = i + 1 == r.trajectory.len();
            prop_assert_eq!(step.chosen.is_none(), last);
            prop_assert_eq!(step.reason == StepReason::Moved, !last);
        }

        // no retreat: the predecessor's direction is always Int
        for w in r.trajectory.windows(2) {
            let back = w[1].assessments.iter().find(|a| a.target == Some(w[0].point)).unwrap();
            prop_assert_eq!(back.operator, Operator::Int);
            prop_assert_ne!(w[1].chosen.and_then(|d| l.grid.neighbor(w[1].point, d)), Some(w[0].point));
        }

        if r.degenerate() {
            prop_assert_eq!(points.len(), 1);
            prop_assert!(l.cell(start).is_none());
        } else {
            prop_assert!(is_local_maximum(r.final_point, &l.grid, &l, &visited).unwrap());
        }
    }

    #[test]
    fn evaluator_economy(l in landscape(), seed in any::<u64>()) {
        let start = l.grid.points().nth((seed as usize) % l.grid.len()).unwrap();
        let r = steepest_ascent(&l.grid, start, &l).unwrap();
        let mut expected: HashSet<GridPoint> = HashSet::new();
        for step in &r.trajectory {
            expected.insert(step.point);
            if step.record.defined() {
                expected.extend(neighbors(&l, step.point));
            }
        }
        let calls = l.calls.borrow();
        prop_assert_eq!(calls.keys().copied().collect::<HashSet<_>>(), expected);
        prop_assert!(calls.values().all(|&c| c == 1));
    }

    #[test]
    fn multistart_never_evaluates_twice(l in landscape(), seed in any::<u64>(), n in 1usize..6) {
        match multistart(&l.grid, n, seed, &l) {
            Ok(m) => {
                prop_assert_eq!(m.runs.len(), n);
                prop_assert!(l.calls.borrow().values().all(|&c| c == 1));
                for run in &m.runs {
                    prop_assert!(!run.degenerate());
                }
                let best = m.best();
                for run in &m.runs {
                    prop_assert!(run.final_record.accuracy <= best.final_record.accuracy);
                }
            }
            Err(_) => prop_assert!(l.grid.points().all(|p| l.cell(p).is_none())),
        }
    }

    #[test]
    fn precedence(ops in prop::collection::vec((0u8..5, 0u8..20), 4), prev in prop::option::of(0usize..4)) {
        let targets: Vec<GridPoint> = (0..4).map(|i| GridPoint { ri: i, mi: 0 }).collect();
        let mut set: [DirectionAssessment; 4] = std::array::from_fn(|i| {
            let (op, r) = ops[i];
            let operator = [Operator::JNot, Operator::JBest, Operator::JLost, Operator::JGreat, Operator::Int][op as usize];
            let ratio = matches!(operator, Operator::JBest | Operator::JLost | Operator::JGreat)
                .then_some(if r == 19 { f64::INFINITY } else { r as f64 / 4.0 });
            DirectionAssessment { direction: Direction::ALL[i], target: Some(targets[i]), operator, ratio }
        });
        let before = set;
        let chosen = choose_move(&mut set, prev.map(|i| targets[i]));
        let live = |op: Operator| -> Vec<&DirectionAssessment> {
            before.iter().enumerate()
                .filter(|(i, a)| a.operator == op && Some(*i) != prev)
                .map(|(_, a)| a)
                .collect()
        };
        let (best, great, lost) = (live(Operator::JBest), live(Operator::JGreat), live(Operator::JLost));
        match chosen {
            None => prop_assert!(best.is_empty() && great.is_empty() && lost.is_empty()),
            Some((d, op)) => {
                let expected = if !best.is_empty() { Operator::JBest }
                    else if !great.is_empty() { Operator::JGreat }
                    else { Operator::JLost };
                prop_assert_eq!(op, expected);
                prop_assert_ne!(Some(d as usize), prev.map(|i| Direction::ALL[i] as usize));
            }
        }
    }
}

#[test]
fn two_peaks_oracle_and_restarts() {
    let l = two_peaks();
    let mut maxima = l.exhaustive_maxima();
    maxima.sort_by_key(|p| (p.ri, p.mi));
    assert_eq!(
        maxima,
        vec![GridPoint { ri: 0, mi: 0 }, GridPoint { ri: 4, mi: 4 }]
    );
    let global = l.exhaustive_argmax();
    assert_eq!(global, GridPoint { ri: 4, mi: 4 });

    let m = multistart(&l.grid, 20, 11, &l).unwrap();
    for run in &m.runs {
        assert!(run.trajectory.len() <= 25);
        assert!(maxima.contains(&run.final_point), "{:?}", run.final_point);
    }
    assert_eq!(m.best().final_point, global);

    // from inside the inferior basin the search stays there
    let r = steepest_ascent(&l.grid, GridPoint { ri: 1, mi: 0 }, &l).unwrap();
    assert_eq!(r.final_point, GridPoint { ri: 0, mi: 0 });
    assert_eq!(r.trajectory.last().unwrap().reason, StepReason::AllJNot);
}

#[test]
fn summary_best_matches_exhaustive_argmax() {
    let l = two_peaks();
    let m = multistart(&l.grid, 3, 5, &l).unwrap();
    let csv = summary_csv(&l.grid, &m);
    let best_row = csv.lines().nth(1 + m.best).unwrap();
    assert!(best_row.contains(&l.grid.label(l.exhaustive_argmax())));
    assert!(best_row.ends_with(&format!(",10,95,{}", m.best().trajectory.len())));
}

#[test]
fn multistart_is_deterministic() {
    let a = multistart(&two_peaks().grid, 4, 99, &two_peaks()).unwrap();
    let b = multistart(&two_peaks().grid, 4, 99, &two_peaks()).unwrap();
    assert_eq!(a, b);
    let single = multistart(&two_peaks().grid, 1, 99, &two_peaks()).unwrap();
    let l = two_peaks();
    assert_eq!(single.runs[0], {
        let mut r = steepest_ascent(&l.grid, single.runs[0].start_point, &l).unwrap();
        r.restart_seed = 99;
        r
    });
}
