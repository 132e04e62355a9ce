use fitgoal_web::{compare_json, simulate_json, trimp_json};
use serde_json::Value;

#[test]
fn simulate_returns_a_full_trajectory() {
    let v: Value = serde_json::from_str(&simulate_json("E2", "acquisition", "weak", 0.3, 0.1, 7).unwrap()).unwrap();
    assert_eq!(v["day"].as_array().unwrap().len(), 84);
    let total: f64 = v["reward"].as_array().unwrap().iter().map(|r| r.as_f64().unwrap()).sum();
    assert!((total - v["total"].as_f64().unwrap()).abs() < 1e-9);
    assert_eq!(
        simulate_json("E2", "acquisition", "weak", 0.3, 0.1, 7).unwrap(),
        simulate_json("E2", "acquisition", "weak", 0.3, 0.1, 7).unwrap()
    );
}

#[test]
fn bad_inputs_are_reported() {
    assert!(simulate_json("E9", "acquisition", "weak", 0.3, 0.1, 1).is_err());
    assert!(simulate_json("E1", "acquisition", "adaptive", 0.3, 0.1, 1).is_err());
    assert!(simulate_json("E1", "acquisition", "weak", 1.5, 0.1, 1).is_err());
    assert!(trimp_json(30.0, 50.0, 60.0, 190.0, "M").is_err());
}

#[test]
fn compare_lists_every_fixed_strategy() {
    let v: Value = serde_json::from_str(&compare_json("E1", "retention", 0.3, 0.1, 5, 3).unwrap()).unwrap();
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|r| r["strategy"].as_str().unwrap()).collect();
    assert_eq!(names, ["weak", "slightly-weak", "slightly-strong", "strong", "no-service"]);
}

#[test]
fn trimp_matches_core() {
    let v: Value = serde_json::from_str(&trimp_json(30.0, 150.0, 60.0, 190.0, "M").unwrap()).unwrap();
    assert!((v["trimp"].as_f64().unwrap() - 50.2).abs() < 0.05);
}
