use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cascade_structure::fit::BimodalParams;
use cascade_structure::io::{read_metrics, write_metrics, MetricRow};
use cascade_structure::metrics::DirectionFlags;
use cascade_structure::synth::BimodalSampler;
use cascade_structure::MetricVector;

fn cascade(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cascade"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let o = cascade(dir, args);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SHAPES_SPEC: &str = r#"{
  "cascades": 120,
  "seed": 4,
  "components": [
    {"weight": 1, "spec": {"shape": {"kind": "star"}, "n": {"min": 3, "max": 60}}},
    {"weight": 1, "spec": {"shape": {"kind": "chain"}, "n": {"min": 3, "max": 60}}},
    {"weight": 1, "spec": {"shape": {"kind": "star_with_chain", "k": 2}, "n": {"min": 10, "max": 60}}}
  ]
}"#;

fn metric_table(path: &Path) -> Vec<MetricRow> {
    read_metrics(BufReader::new(fs::File::open(path).unwrap())).unwrap()
}

#[test]
fn synth_build_metrics_round_trip_matches_ground_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("spec.json"), SHAPES_SPEC).unwrap();
    ok(d, &["--output-dir", "s", "synth", "spec.json"]);
    ok(d, &["--output-dir", "b", "build", "s/events.tsv"]);
    ok(d, &["--output-dir", "m", "metrics", "b"]);

    let rows = metric_table(&d.join("m/metrics.tsv"));
    let truth = fs::read_to_string(d.join("s/truth.tsv")).unwrap();
    let mut checked = 0;
    for line in truth.lines().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        let row = rows.iter().find(|r| r.cascade_id == f[0]).unwrap();
        let m = &row.metrics;
        for (col, got) in [(2, m.trend), (3, m.fluctuation), (4, m.branch_deviation)] {
            if f[col] != "NA" {
                let want: f64 = f[col].parse().unwrap();
                assert!(
                    (got - want).abs() < 1e-9,
                    "{}: column {col}: {got} vs {want}",
                    f[0]
                );
                checked += 1;
            }
        }
    }
    assert!(checked >= 240);
    assert_eq!(rows.len(), 120);
    let venn: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("m/venn.json")).unwrap()).unwrap();
    assert_eq!(venn.as_object().unwrap().len(), 8);
}

#[test]
fn empty_input_exits_with_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("events.tsv"), "").unwrap();
    let o = cascade(d, &["--output-dir", "out", "build", "events.tsv"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("no events"));
    let left: Vec<_> = fs::read_dir(d.join("out")).unwrap().collect();
    assert!(left.is_empty(), "partial outputs left behind");
}

#[test]
fn garbled_input_reports_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("events.tsv"), "c\tp0\ta\t\t0\nc\tp1\tb\ta\tsoon\n").unwrap();
    let o = cascade(d, &["--output-dir", "out", "build", "events.tsv"]);
    assert_eq!(o.status.code(), Some(3));
    let msg = stderr(&o);
    assert!(
        msg.contains("events.tsv: line 2: invalid timestamp"),
        "{msg}"
    );
    assert!(!d.join("out/cascades.bin").exists());

    let o = cascade(d, &["--output-dir", "out", "build", "missing.tsv"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("missing.tsv"));
}

#[test]
fn locked_output_directory_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("spec.json"), SHAPES_SPEC).unwrap();
    fs::create_dir(d.join("s")).unwrap();
    fs::write(d.join("s/.cascade.lock"), "1").unwrap();
    let o = cascade(d, &["--output-dir", "s", "synth", "spec.json"]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).contains("locked"));
    assert!(d.join("s/.cascade.lock").exists());
    assert!(!d.join("s/events.tsv").exists());
}

#[test]
fn unknown_metric_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cascade(tmp.path(), &["dist", "m.tsv", "--metric", "girth"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown metric 'girth'"));
}

fn run_pipeline(d: &Path) {
    fs::write(d.join("spec.json"), SHAPES_SPEC).unwrap();
    ok(
        d,
        &["--output-dir", "s", "--threads", "2", "synth", "spec.json"],
    );
    ok(
        d,
        &[
            "--output-dir",
            "b",
            "--threads",
            "2",
            "build",
            "s/events.tsv",
        ],
    );
    ok(
        d,
        &[
            "--output-dir",
            "m",
            "--threads",
            "2",
            "--seed",
            "7",
            "metrics",
            "b",
            "--exact-threshold",
            "20",
            "--sample-sources",
            "5",
        ],
    );
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for sub in ["s", "b", "m"] {
        let mut v: Vec<PathBuf> = fs::read_dir(dir.join(sub))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        v.sort();
        out.extend(v);
    }
    out
}

#[test]
fn runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_pipeline(a.path());
    run_pipeline(b.path());
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert_eq!(fa.len(), fb.len());
    assert!(fa.len() >= 10);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.file_name(), y.file_name());
        assert!(
            fs::read(x).unwrap() == fs::read(y).unwrap(),
            "{x:?} differs"
        );
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("m/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["knobs"]["exact_threshold"], 20);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

fn mass_row(id: usize, mass: u64) -> MetricRow {
    MetricRow {
        cascade_id: id.to_string(),
        metrics: MetricVector {
            mass,
            length: 1,
            breadth: mass.saturating_sub(1).max(1),
            trend: 2.0 - 2.0 / mass as f64,
            fluctuation: 0.0,
            branch_deviation: 0.0,
            converge_deviation: 0.0,
            reciprocity: 0.0,
            self_loop_ratio: 0.0,
            avg_activity: 1.0,
            reciprocal_edge_count: 0,
            self_loop_count: 0,
            post_count: 1,
            flags: DirectionFlags::default(),
        },
    }
}

#[test]
fn dist_recovers_the_mass_exponent() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let law = BimodalParams::preset("mass").unwrap();
    let sampler = BimodalSampler::new(law, 1.0).unwrap();
    let rows: Vec<MetricRow> = sampler
        .sample_n(300_000, 1)
        .into_iter()
        .enumerate()
        .map(|(i, x)| mass_row(i, x.floor() as u64))
        .collect();
    let mut f = fs::File::create(d.join("metrics.tsv")).unwrap();
    write_metrics(&mut f, &rows).unwrap();
    ok(
        d,
        &[
            "--output-dir",
            "d",
            "dist",
            "metrics.tsv",
            "--metric",
            "mass",
        ],
    );
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("d/fit.json")).unwrap()).unwrap();
    let alpha = fit["params"]["alpha"].as_f64().unwrap();
    assert!((alpha - 1.99).abs() <= 0.1, "alpha {alpha}");
    assert_eq!(fit["metric_name"], "mass");
    let pdf = fs::read_to_string(d.join("d/pdf.tsv")).unwrap();
    assert!(pdf.starts_with("bin_center\tdensity\n"));
}

#[test]
fn dynamics_feeds_stats_and_joint_exports_boundaries() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let spec = r#"{
      "cascades": 240,
      "seed": 2,
      "components": [
        {"weight": 1, "spec": {"shape": {"kind": "star"}, "n": {"min": 100, "max": 200},
          "timing": {"kind": "profile", "profile": "early_spike", "lifetime": 36000}}},
        {"weight": 1, "spec": {"shape": {"kind": "chain"}, "n": {"min": 100, "max": 200},
          "timing": {"kind": "profile", "profile": "late_spike", "lifetime": 36000}}}
      ]
    }"#;
    fs::write(d.join("spec.json"), spec).unwrap();
    ok(d, &["--output-dir", "s", "synth", "spec.json"]);
    ok(d, &["--output-dir", "b", "build", "s/events.tsv"]);
    ok(d, &["--output-dir", "m", "metrics", "b"]);
    ok(
        d,
        &[
            "--output-dir",
            "y",
            "dynamics",
            "b",
            "--k",
            "2",
            "--n-init",
            "3",
        ],
    );
    ok(
        d,
        &[
            "--output-dir",
            "st",
            "stats",
            "m/metrics.tsv",
            "--labels",
            "y/assignments.tsv",
            "--group-source",
            "dynamics",
        ],
    );
    ok(
        d,
        &[
            "--output-dir",
            "j",
            "joint",
            "m/metrics.tsv",
            "--x",
            "mass",
            "--y",
            "trend",
        ],
    );

    let clusters: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("y/clusters.json")).unwrap()).unwrap();
    assert_eq!(clusters["sizes"].as_array().unwrap().len(), 2);
    let kw = fs::read_to_string(d.join("st/kw.tsv")).unwrap();
    assert!(kw.starts_with("metric\tgroup_source\tH\tp\n"));
    assert!(kw.lines().any(|l| l.starts_with("trend\tdynamics\t")));
    let disting = fs::read_to_string(d.join("st/disting.tsv")).unwrap();
    assert_eq!(disting.lines().count(), 3);
    let bounds = fs::read_to_string(d.join("j/boundaries.tsv")).unwrap();
    assert!(bounds.lines().any(|l| l.starts_with("floor\t")));
    assert!(bounds.lines().any(|l| l.starts_with("ceiling\t")));
}
