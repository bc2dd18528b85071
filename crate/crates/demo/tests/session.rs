use tsunami_demo::Session;

fn session() -> Session {
    Session::new(42, 40, 200).unwrap()
}

#[test]
fn holds_out_every_fifth_scenario() {
    assert_eq!(session().test_ids(), vec![4, 9, 14, 19, 24, 29, 34, 39]);
}

#[test]
fn contribution_rank_follows_theta() {
    let s = session();
    let low = s.contribution(0.5);
    let high = s.contribution(0.99);
    assert!(low.rank <= high.rank);
    assert!(low.curve[low.rank - 1] >= 0.5);
    assert_eq!(*low.curve.last().unwrap(), 1.0);
    assert_eq!(s.contribution(0.9).rank, low.model_rank);
}

#[test]
fn forecast_is_consistent() {
    let s = session();
    let f = s.forecast(2, 300.0, 0.05, 7).unwrap();
    assert_eq!(f.scenario_id, 14);
    assert_eq!(f.steps, 60);
    assert_eq!(f.observed.len(), 60);
    assert_eq!(f.truth_series.len(), 200);
    assert_eq!(f.methods.len(), 3);
    for m in &f.methods {
        assert_eq!(m.depths.len(), f.nx * f.ny);
        assert!((0.0..=1.0).contains(&m.tpr) && (0.0..=1.0).contains(&m.fpr));
    }
    assert_eq!(f.trace.len(), 5);
    for t in &f.trace {
        assert_eq!(t.probs.len(), 60);
    }
    let last: f64 = f.trace.iter().map(|t| *t.probs.last().unwrap()).sum();
    assert!(last <= 1.0 + 1e-12);

    let again = s.forecast(2, 300.0, 0.05, 7).unwrap();
    assert_eq!(again.observed, f.observed);
    assert!(serde_json::to_string(&f).unwrap().contains("\"most-probable\""));
}

#[test]
fn bad_arguments_are_errors() {
    let s = session();
    assert!(s.forecast(99, 300.0, 0.0, 0).is_err());
    assert!(s.forecast(0, 1e6, 0.0, 0).is_err());
    assert!(s.forecast(0, 300.0, -1.0, 0).is_err());
    assert!(Session::new(1, 3, 50).is_err());
}
