use evorest_web::{curve, demo, walk, MAX_DEMO_EVALUATIONS};
use serde_json::Value;

#[test]
fn demo_run_reports_a_suite() {
    let v: Value = serde_json::from_str(&demo("crud-chain", 1, 500, "MIO").unwrap()).unwrap();
    assert_eq!(v["stats"]["evaluations"], 500);
    assert!(!v["neutral"].as_array().unwrap().is_empty());
    assert!(v["java"]
        .as_str()
        .unwrap()
        .contains("public class DemoTest"));
    assert!(v["covered"]
        .as_array()
        .unwrap()
        .iter()
        .any(|t| t == "create_activity_store"));
}

#[test]
fn demo_is_deterministic_per_seed() {
    assert_eq!(
        demo("needle", 4, 300, "RANDOM").unwrap(),
        demo("needle", 4, 300, "RANDOM").unwrap()
    );
}

#[test]
fn demo_rejects_bad_input() {
    assert!(demo("nope", 1, 10, "MIO").is_err());
    assert!(demo("needle", 1, 10, "HILL").is_err());
    assert!(demo("needle", 1, MAX_DEMO_EVALUATIONS + 1, "MIO").is_err());
}

#[test]
fn curve_rows_match_the_heuristic() {
    let rows: Vec<[f64; 3]> = serde_json::from_str(&curve(10.0, 11).unwrap()).unwrap();
    assert_eq!(rows.len(), 11);
    assert_eq!(rows[0], [0.0, 0.0, 1.0]);
    assert_eq!(rows[1], [1.0, 0.5, 0.5]);
    assert!(rows.windows(2).all(|w| w[0][2] > w[1][2]));
    assert!(curve(0.0, 5).is_err());
    assert!(curve(5.0, 1).is_err());
}

#[test]
fn walk_has_one_generation_per_step() {
    let steps: Vec<Value> = serde_json::from_str(&walk("faulty", 2, 25).unwrap()).unwrap();
    assert_eq!(steps.len(), 26);
    for (i, s) in steps.iter().enumerate() {
        assert_eq!(s["step"], i);
        let calls = s["calls"].as_array().unwrap();
        assert!((1..=10).contains(&calls.len()));
        assert!(calls.iter().all(|c| c.as_str().unwrap().contains(" /api/")));
    }
}
