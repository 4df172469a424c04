use cascade_structure_demo::{cascade_metrics_json, cluster_profiles_json, fit_law_json};

#[test]
fn star_edges_give_closed_form_metrics() {
    let text: String = (1..10).map(|i| format!("root u{i}\n")).collect();
    let v = cascade_metrics_json(&text).unwrap();
    let m = &v["metrics"];
    assert_eq!(m["mass"], 10);
    assert!((m["trend"].as_f64().unwrap() - 1.8).abs() < 1e-12);
    assert!((m["branch_deviation"].as_f64().unwrap() - 10f64.sqrt()).abs() < 1e-12);
    assert_eq!(v["silhouette"], serde_json::json!([1, 9]));
    assert_eq!(v["nodes"][0]["id"], "root");
    assert_eq!(v["edges"].as_array().unwrap().len(), 9);
}

#[test]
fn malformed_edges_are_reported_by_line() {
    assert_eq!(
        cascade_metrics_json("a b\nlonely\n").unwrap_err(),
        "line 2: expected 'source actor'"
    );
    assert_eq!(cascade_metrics_json("# nothing\n").unwrap_err(), "no edges");
}

#[test]
fn law_fit_recovers_the_exponent() {
    let v = fit_law_json("self_loop_count", 200_000, 3, true).unwrap();
    let alpha = v["fit"]["alpha"].as_f64().unwrap();
    assert!((alpha - 2.47).abs() < 0.1, "{alpha}");
    assert!(!v["points"].as_array().unwrap().is_empty());
    assert!(fit_law_json("girth", 1000, 1, false).is_err());
    assert!(fit_law_json("mass", 10, 1, false).is_err());
}

#[test]
fn timing_families_separate() {
    let v = cluster_profiles_json(60, 3, 1).unwrap();
    assert!(v["ari"].as_f64().unwrap() > 0.9);
    assert_eq!(v["centroids"].as_array().unwrap().len(), 3);
    let total: u64 = v["sizes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s.as_u64().unwrap())
        .sum();
    assert_eq!(total, 180);
    assert!(cluster_profiles_json(0, 3, 1).is_err());
}
