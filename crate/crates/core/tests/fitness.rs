use proptest::prelude::*;

use evorest::driver::{CoverageReport, CoveredTarget};
use evorest::fitness::{branch_heuristic, merge, normalize_distance, FitnessValue};
use evorest::{TargetId, TargetKind};

#[test]
fn normalization_oracles() {
    assert_eq!(normalize_distance(0.0).unwrap(), 0.0);
    assert_eq!(normalize_distance(1.0).unwrap(), 0.5);
    assert!((normalize_distance(9.0).unwrap() - 0.9).abs() < 1e-12);
    assert!(normalize_distance(-1.0).is_err());
    assert!(normalize_distance(f64::NAN).is_err());
    assert!(normalize_distance(f64::INFINITY).is_err());
}

#[test]
fn rounding_near_2_pow_53_stays_monotone() {
    let (a, b) = (9011605319777950.0f64, 9011605319777951.0f64);
    assert!(normalize_distance(a).unwrap() <= normalize_distance(b).unwrap());
}

#[test]
fn heuristic_oracles() {
    assert_eq!(branch_heuristic(0.0).unwrap(), 1.0);
    assert!((branch_heuristic(42.0).unwrap() - 0.02326).abs() < 1e-5);
    assert!(branch_heuristic(1e9).unwrap() < 1e-8);
}

#[test]
fn merge_grades_branches_and_keeps_statements_binary() {
    let report = CoverageReport {
        targets: vec![
            CoveredTarget::statement("Stmt_7", true),
            CoveredTarget::branch("Branch_3_true", false, Some(5.0)),
        ],
    };
    let f = merge(&report, FitnessValue::new()).unwrap();
    assert_eq!(f.get(&TargetId::new(TargetKind::Statement, "Stmt_7")), 1.0);
    let h = f.get(&TargetId::new(TargetKind::Branch, "Branch_3_true"));
    assert!((h - (1.0 - 5.0 / 6.0)).abs() < 1e-12);
    assert_eq!(f.get(&TargetId::new(TargetKind::Branch, "absent")), 0.0);
}

fn target() -> impl Strategy<Value = CoveredTarget> {
    (0usize..20, any::<bool>(), any::<bool>(), 0.0f64..1e12).prop_map(|(i, is_branch, covered, d)| {
        if is_branch {
            CoveredTarget::branch(format!("B{i}"), covered, (!covered).then_some(d))
        } else {
            CoveredTarget::statement(format!("S{i}"), covered)
        }
    })
}

proptest! {
    #[test]
    fn normalization_never_decreases_even_past_integer_precision(a in 0.0f64..1e300, b in 0.0f64..1e300) {
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(normalize_distance(lo).unwrap() <= normalize_distance(hi).unwrap());
        prop_assert!(normalize_distance(hi).unwrap() <= 1.0);
    }

    #[test]
    fn normalization_is_strictly_increasing(a in 0u32..10_000_000, b in 0u32..10_000_000) {
        prop_assume!(a != b);
        let (lo, hi) = (f64::from(a.min(b)), f64::from(a.max(b)));
        let (nl, nh) = (normalize_distance(lo).unwrap(), normalize_distance(hi).unwrap());
        prop_assert!(nl < nh);
        prop_assert!((0.0..1.0).contains(&nl) && (0.0..1.0).contains(&nh));
        prop_assert!(branch_heuristic(lo).unwrap() > branch_heuristic(hi).unwrap());
    }

    #[test]
    fn merged_scores_stay_in_unit_interval(targets in proptest::collection::vec(target(), 0..40)) {
        let report = CoverageReport { targets };
        let f = merge(&report, FitnessValue::new()).unwrap();
        for (_, h) in f.iter() {
            prop_assert!((0.0..=1.0).contains(&h));
        }
    }
}
