use bohmfield_core::sim::{ensemble, run, LeafRecord, OutputRecord, RunConfig, RunOptions, Simulation};
use bohmfield_core::Error;

fn config(foliation: &str, state: &str, steps: usize) -> RunConfig {
    let field = if state == VACUUM { ROUGH } else { SMOOTH };
    RunConfig::from_toml_str(&format!(
        r#"
        sites = 12
        dx = 0.5
        mass = 1.0
        d_epsilon = 0.01
        steps = {steps}
        seed = 3
        [foliation]
        {foliation}
        [field]
        {field}
        {state}
        "#
    ))
    .unwrap()
}

const ROUGH: &str = "sites = [0.3, 0.1, -0.2, 0.4, 0.0, -0.1, 0.2, 0.3, -0.3, 0.1, 0.05, -0.05]";
// the stress-energy flow of a rough moving field turns null within a few steps
const SMOOTH: &str = "mode = 1\ncoord = 0.3";
const VACUUM: &str = "[[state]]\namplitude = [1.0, 0.0]";
const SUPERPOSITION: &str = r#"
    [[state]]
    amplitude = [0.8, 0.0]
    [[state]]
    amplitude = [0.6, 0.0]
    labels = [{ mode = 1, coeff = [1.0, 0.0] }]
"#;

fn as_lines(records: &[LeafRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(&OutputRecord::Leaf(Box::new(r.clone()))).unwrap() + "\n")
        .collect()
}

#[test]
fn vacuum_is_static_on_every_stationary_and_dynamic_foliation() {
    for foliation in ["kind = \"equal_time\"", "kind = \"boosted\"\nvelocity = 0.6", "kind = \"dynamic\""] {
        let records = run(&config(foliation, VACUUM, 100)).unwrap();
        assert_eq!(records.len(), 101);
        for r in &records {
            assert!(r.velocity.iter().all(|v| *v == 0.0), "{foliation}");
            for (a, b) in r.phi.iter().zip(&records[0].phi) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn dynamic_vacuum_follows_the_rest_frame() {
    let records = run(&config("kind = \"dynamic\"", VACUUM, 30)).unwrap();
    for r in &records {
        for (wt, wx) in r.w_t.iter().zip(&r.w_x) {
            assert!((wt - 1.0).abs() < 1e-12 && wx.abs() < 1e-12);
        }
        assert!(r.leaf.t.iter().all(|t| (t - r.t).abs() < 1e-12));
    }
}

#[test]
fn output_is_byte_identical_across_runs() {
    let c = config("kind = \"dynamic\"", SUPERPOSITION, 40);
    assert_eq!(as_lines(&run(&c).unwrap()), as_lines(&run(&c).unwrap()));
}

#[test]
fn resume_from_serialized_record() {
    for foliation in ["kind = \"boosted\"\nvelocity = 0.3", "kind = \"dynamic\""] {
        let c = config(foliation, SUPERPOSITION, 40);
        let full = run(&c).unwrap();
        let line = serde_json::to_string(&full[15]).unwrap();
        let record: LeafRecord = serde_json::from_str(&line).unwrap();
        let resumed = Simulation::resume(&c, RunOptions::default(), &record)
            .unwrap()
            .collect::<Result<Vec<_>, _>>()
            .unwrap();
        assert_eq!(resumed.len(), 26);
        for (a, b) in full[15..].iter().zip(&resumed) {
            let worst = a
                .phi
                .iter()
                .zip(&b.phi)
                .chain(a.leaf.t.iter().zip(&b.leaf.t))
                .chain(a.leaf.x.iter().zip(&b.leaf.x))
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(worst < 1e-12, "{foliation}: step {} off by {worst:e}", a.step);
        }
    }
}

#[test]
fn steps_override() {
    let c = config("kind = \"equal_time\"", VACUUM, 100);
    let records: Vec<_> = Simulation::new(&c, RunOptions { steps: Some(5), wall_clock: true })
        .unwrap()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(records.len(), 6);
    assert!(records.iter().all(|r| r.wall_clock_s.is_some()));
}

#[test]
fn dynamic_superposition_logs_projection() {
    let records = run(&config("kind = \"dynamic\"", SUPERPOSITION, 20)).unwrap();
    let logged: Vec<_> = records.iter().filter_map(|r| r.projection).collect();
    assert!(!logged.is_empty());
    assert!(logged.iter().all(|p| p.residual < 1e-10));
    // labels move with the leaf's proper time, so steps are at least d_epsilon in label
    for pair in records.windows(2) {
        assert!((pair[1].t - pair[0].t - 0.01).abs() < 1e-15);
    }
}

#[test]
fn ensemble_rejects_dynamic_foliation() {
    let c = config("kind = \"dynamic\"", VACUUM, 10);
    assert!(matches!(ensemble(&c), Err(Error::Unsupported(_))));
}

#[test]
fn vacuum_ensemble_is_static() {
    let mut c = config("kind = \"equal_time\"", VACUUM, 10);
    c.ensemble_size = 10_000;
    c.d_epsilon = 0.5;
    let report = ensemble(&c).unwrap();
    assert!(report.warning.is_none());
    assert_eq!(report.failed, 0);
    for e in &report.entries {
        assert!(e.ks < 0.02, "t = {} ks = {}", e.t, e.ks);
    }
}
