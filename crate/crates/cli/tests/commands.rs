use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lesionseg::io::save_mask;
use lesionseg::BinaryMask;

fn lesionseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lesionseg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn corpus(root: &Path, count: usize) -> PathBuf {
    let dir = root.join("corpus");
    let o = lesionseg(&[
        "phantom",
        "--count",
        &count.to_string(),
        "--seed",
        "11",
        "--out-dir",
        p(&dir),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    dir
}

fn mask_file(
    dir: &Path,
    name: &str,
    w: usize,
    h: usize,
    f: impl Fn(usize, usize) -> bool,
) -> PathBuf {
    let path = dir.join(name);
    save_mask(&BinaryMask::from_fn(w, h, f).unwrap(), &path).unwrap();
    path
}

#[test]
fn segment_writes_mask_overlay_and_manifest() {
    let t = tempfile::tempdir().unwrap();
    let c = corpus(t.path(), 1).join("case_000");
    let out = t.path().join("seg");
    let o = lesionseg(&[
        "segment",
        "--image",
        p(&c.join("image.png")),
        "--roi",
        p(&c.join("roi.json")),
        "--method",
        "mcwt",
        "--out-dir",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["mask.png", "overlay.png", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "segment");
    assert_eq!(manifest["version"], lesionseg::VERSION);
    assert_eq!(manifest["pipelines"][0]["method"]["markers"], 45);

    // replaying the manifest gives the same bytes
    let again = t.path().join("again");
    let o = lesionseg(&[
        "segment",
        "--manifest",
        p(&out.join("manifest.json")),
        "--out-dir",
        p(&again),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["mask.png", "overlay.png"] {
        assert_eq!(
            fs::read(out.join(f)).unwrap(),
            fs::read(again.join(f)).unwrap()
        );
    }
}

#[test]
fn missing_input_names_the_path() {
    let t = tempfile::tempdir().unwrap();
    let missing = t.path().join("no_such_image.png");
    let o = lesionseg(&[
        "segment",
        "--image",
        p(&missing),
        "--out-dir",
        p(&t.path().join("o")),
    ]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains(p(&missing)), "{err}");
}

#[test]
fn zero_clusters_fail_before_any_work() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("never");
    let o = lesionseg(&[
        "segment",
        "--image",
        "/does/not/matter.png",
        "--method",
        "gmm",
        "--k",
        "0",
        "--out-dir",
        p(&out),
    ]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("invalid configuration"), "{err}");
    assert!(
        !err.contains("matter.png"),
        "config must be checked before reading: {err}"
    );
    assert!(!out.exists());
}

#[test]
fn evaluate_identical_masks() {
    let t = tempfile::tempdir().unwrap();
    let m = mask_file(t.path(), "m.png", 6, 5, |i, j| i > 1 && j < 3);
    let o = lesionseg(&[
        "evaluate",
        "--pred",
        p(&m),
        "--truth",
        p(&m),
        "--case",
        "same",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "case,method,dsc,ji,hd_mm,pr,re\nsame,,1.000000,1.000000,0.000000,1.000000,1.000000\n"
    );
}

#[test]
fn evaluate_half_overlap() {
    let t = tempfile::tempdir().unwrap();
    // two shared pixels, two only predicted, two only in the reference
    let pred = mask_file(t.path(), "pred.png", 6, 1, |i, _| i < 4);
    let truth = mask_file(t.path(), "truth.png", 6, 1, |i, _| i >= 2);
    let out = t.path().join("o");
    let o = lesionseg(&[
        "evaluate",
        "--pred",
        p(&pred),
        "--truth",
        p(&truth),
        "--method",
        "km",
        "--spacing",
        "0.5x1",
        "--out-dir",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    // in a one-row mask every pixel is on the edge, so the widest gap is 2 columns of 0.5 mm
    assert_eq!(row, "pred,km,0.500000,0.333333,1.000000,0.500000,0.500000");
    assert_eq!(
        fs::read_to_string(out.join("metrics.csv")).unwrap(),
        stdout(&o)
    );
}

#[test]
fn evaluate_empty_prediction_warns() {
    let t = tempfile::tempdir().unwrap();
    let pred = mask_file(t.path(), "pred.png", 4, 4, |_, _| false);
    let truth = mask_file(t.path(), "truth.png", 4, 4, |i, j| i == j);
    let o = lesionseg(&["evaluate", "--pred", p(&pred), "--truth", p(&truth)]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o).lines().nth(1).unwrap(),
        "pred,,0.000000,0.000000,,,0.000000"
    );
    assert!(stderr(&o).contains("warning: pr"), "{}", stderr(&o));
}

#[test]
fn evaluate_shape_mismatch_fails() {
    let t = tempfile::tempdir().unwrap();
    let a = mask_file(t.path(), "a.png", 4, 4, |_, _| true);
    let b = mask_file(t.path(), "b.png", 5, 4, |_, _| true);
    let o = lesionseg(&["evaluate", "--pred", p(&a), "--truth", p(&b)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("shape mismatch"));
}

#[test]
fn benchmark_row_counts_and_sweep() {
    let t = tempfile::tempdir().unwrap();
    let c = corpus(t.path(), 2);
    let out = t.path().join("bench");
    let o = lesionseg(&[
        "benchmark",
        "--corpus",
        p(&c),
        "--marker-sweep",
        "1:5",
        "--out-dir",
        p(&out),
        "--jobs",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "case,method,dsc,ji,hd_mm,pr,re,error");
    assert_eq!(lines.iter().filter(|l| l.starts_with("case_")).count(), 6);
    let summaries: Vec<&str> = lines
        .iter()
        .copied()
        .filter(|l| l.starts_with("SUMMARY,"))
        .collect();
    assert_eq!(summaries.len(), 3);
    assert!(summaries[0].starts_with("SUMMARY,kmeans,") && summaries[0].contains('±'));

    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().next(), Some("case,n_markers,dsc"));
    for case in ["case_000", "case_001"] {
        let ns: Vec<&str> = sweep
            .lines()
            .filter(|l| l.starts_with(case))
            .map(|l| l.split(',').nth(1).unwrap())
            .collect();
        assert_eq!(ns, ["1", "2", "3", "4", "5"]);
    }
    assert!(out.join("overlays/case_001_gmm.png").is_file());
    assert!(stdout(&o).starts_with("Method"));
}

#[test]
fn summary_agrees_with_its_rows() {
    let t = tempfile::tempdir().unwrap();
    let c = corpus(t.path(), 4);
    let out = t.path().join("bench");
    let o = lesionseg(&[
        "benchmark",
        "--corpus",
        p(&c),
        "--methods",
        "gmm",
        "--out-dir",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let dsc: Vec<f64> = csv
        .lines()
        .filter(|l| l.starts_with("case_"))
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    let mean = dsc.iter().sum::<f64>() / dsc.len() as f64;
    let std = (dsc.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / dsc.len() as f64).sqrt();
    let summary = csv.lines().find(|l| l.starts_with("SUMMARY,gmm,")).unwrap();
    let (m, s) = summary.split(',').nth(2).unwrap().split_once('±').unwrap();
    assert!((m.parse::<f64>().unwrap() - mean).abs() <= 5e-4 + 1e-6);
    assert!((s.parse::<f64>().unwrap() - std).abs() <= 5e-4 + 1e-6);
}

#[test]
fn broken_case_is_recorded_not_fatal() {
    let t = tempfile::tempdir().unwrap();
    let c = corpus(t.path(), 2);
    fs::remove_file(c.join("case_000/truth.png")).unwrap();
    let out = t.path().join("bench");
    let o = lesionseg(&[
        "benchmark",
        "--corpus",
        p(&c),
        "--methods",
        "kmeans,mcwt",
        "--out-dir",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let broken: Vec<&str> = csv.lines().filter(|l| l.starts_with("case_000")).collect();
    assert_eq!(broken.len(), 2);
    assert!(broken
        .iter()
        .all(|l| l.ends_with("missing case file") && l.contains(",,,,,,")));
    assert!(csv.lines().any(|l| l.starts_with("case_001,kmeans,0.")));
}

#[test]
fn phantom_from_spec_and_replay() {
    let t = tempfile::tempdir().unwrap();
    let spec = t.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"width":40,"height":32,"lesions":[{"cx":20,"cy":15,"r":7}],
            "lesion_intensity":0.8,"background_intensity":0.3,"noise_sigma":0.05,"seed":3}"#,
    )
    .unwrap();
    let a = t.path().join("a");
    let o = lesionseg(&["phantom", "--spec", p(&spec), "--out-dir", p(&a)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = fs::read_to_string(a.join("manifest.json")).unwrap();
    assert!(manifest.contains("ChaCha20"));
    let b = t.path().join("b");
    let o = lesionseg(&[
        "phantom",
        "--manifest",
        p(&a.join("manifest.json")),
        "--out-dir",
        p(&b),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["image.png", "truth.png", "roi.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn invalid_phantom_spec_is_rejected() {
    let t = tempfile::tempdir().unwrap();
    let spec = t.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"width":20,"height":20,"lesions":[{"cx":2,"cy":2,"r":5}],"lesion_intensity":0.8,"background_intensity":0.3}"#,
    )
    .unwrap();
    let o = lesionseg(&[
        "phantom",
        "--spec",
        p(&spec),
        "--out-dir",
        p(&t.path().join("x")),
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("does not fit"));
}

#[test]
fn zero_jobs_rejected() {
    let t = tempfile::tempdir().unwrap();
    let o = lesionseg(&[
        "phantom",
        "--count",
        "1",
        "--jobs",
        "0",
        "--out-dir",
        p(t.path()),
    ]);
    assert!(!o.status.success());
}
