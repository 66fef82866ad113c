use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bforest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bforest"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn sample_forest_is_deterministic() {
    let args = [
        "sample", "forest", "--lambda", "0", "--mu", "1", "--trees", "5", "--seed", "7",
    ];
    let a = bforest(&args);
    let b = bforest(&args);
    assert!(a.status.success());
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
    let c = bforest(&[
        "sample", "forest", "--lambda", "0", "--mu", "1", "--trees", "5", "--seed", "8",
    ]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn sample_walk_has_two_rows_per_pair_plus_two() {
    let o = bforest(&[
        "sample", "walk", "--lambda", "1", "--theta", "2", "--pairs", "100",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,H");
    assert_eq!(lines.len(), 203);
    assert_eq!(lines[1], "0,0.0");
}

#[test]
fn misordered_rates_are_a_usage_error() {
    let o = bforest(&["sample", "forest", "--mu", "1", "--lambda", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lambda < mu"));
}

#[test]
fn sample_brownian_rows() {
    let o = bforest(&[
        "sample",
        "brownian",
        "--lambda",
        "1",
        "--kappa",
        "2",
        "--samples",
        "10",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("k,time,level,min"));
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn compose_then_split_recovers_the_red_forest() {
    let dir = tempfile::tempdir().unwrap();
    let (b, r, c) = (
        path(dir.path(), "b.ftf"),
        path(dir.path(), "r.ftf"),
        path(dir.path(), "c.ftf"),
    );
    let prov = path(dir.path(), "p.csv");
    assert!(bforest(&[
        "sample", "forest", "--mu", "1", "--trees", "3", "--seed", "1", "--out", &b
    ])
    .status
    .success());
    assert!(bforest(&[
        "sample", "forest", "--lambda", "1", "--mu", "2", "--trees", "6", "--seed", "2", "--out",
        &r
    ])
    .status
    .success());
    let o = bforest(&[
        "compose",
        "--black",
        &b,
        "--red",
        &r,
        "--out",
        &c,
        "--provenance",
        &prov,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(&prov)
        .unwrap()
        .starts_with("branch,origin,side\n"));

    let (b2, r2) = (path(dir.path(), "b2.ftf"), path(dir.path(), "r2.ftf"));
    assert!(
        bforest(&["split", &c, "--black-out", &b2, "--red-out", &r2])
            .status
            .success()
    );
    let (x, y) = (
        numbers(&fs::read_to_string(&r).unwrap()),
        numbers(&fs::read_to_string(&r2).unwrap()),
    );
    assert_eq!(x.len(), y.len());
    assert!(close(&x, &y));
    // the black floor end is not recorded in the composite, so only the tail is lost
    let (x, y) = (
        numbers(&fs::read_to_string(&b).unwrap()),
        numbers(&fs::read_to_string(&b2).unwrap()),
    );
    assert_eq!(x.len(), y.len() + 1);
    assert!(close(&x[..y.len()], &y));
}

fn numbers(text: &str) -> Vec<f64> {
    text.split(|c: char| !(c.is_ascii_digit() || c == '.' || c == 'e' || c == '-'))
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().unwrap())
        .collect()
}

fn close(x: &[f64], y: &[f64]) -> bool {
    x.len() == y.len()
        && x.iter()
            .zip(y)
            .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))
}

#[test]
fn compose_with_empty_red_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let (b, r) = (path(dir.path(), "b.ftf"), path(dir.path(), "r.ftf"));
    assert!(bforest(&[
        "sample", "forest", "--mu", "1", "--trees", "2", "--seed", "3", "--out", &b
    ])
    .status
    .success());
    assert!(
        bforest(&["sample", "forest", "--mu", "1", "--trees", "0", "--out", &r])
            .status
            .success()
    );
    let o = bforest(&["compose", "--black", &b, "--red", &r]);
    assert!(o.status.success());
    let black = numbers(&fs::read_to_string(&b).unwrap());
    let composed = stdout(&o);
    // same roots and lengths, every branch black, no red to colour
    assert!(!composed.contains('r'));
    let c = numbers(&composed);
    assert!(close(&black[..c.len()], &c));
}

#[test]
fn malformed_forest_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = path(dir.path(), "bad.ftf");
    fs::write(&bad, "1.0 (oops\n").unwrap();
    let o = bforest(&["compose", "--black", &bad, "--red", &bad]);
    assert_eq!(o.status.code(), Some(2));
    let o = bforest(&[
        "compose",
        "--black",
        &path(dir.path(), "missing.ftf"),
        "--red",
        &bad,
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn decompose_modes() {
    let dir = tempfile::tempdir().unwrap();
    let w = path(dir.path(), "w.csv");
    assert!(bforest(&[
        "sample", "walk", "--theta", "1", "--pairs", "50", "--seed", "4", "--out", &w
    ])
    .status
    .success());

    let o = bforest(&["decompose", &w, "--n", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("part,k,H"));
    // with n = 1 the minimum is H_1, so the pre part is H_0, H_1
    assert_eq!(text.lines().filter(|l| l.starts_with("pre,")).count(), 2);

    let o = bforest(&["decompose", &w, "--marks", "3,10,20"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 4);

    let o = bforest(&["decompose", &w, "--q", "0.5", "--seed", "1"]);
    assert!(o.status.success());
    let a = bforest(&["decompose", &w, "--geometric-q", "0.5", "--seed", "9"]);
    let b = bforest(&["decompose", &w, "--geometric-q", "0.5", "--seed", "9"]);
    assert_eq!(a.stdout, b.stdout);

    for q in ["0", "1", "1.5"] {
        assert_eq!(
            bforest(&["decompose", &w, "--geometric-q", q])
                .status
                .code(),
            Some(2)
        );
    }
    assert_eq!(
        bforest(&["decompose", &w, "--marks", "4,2"]).status.code(),
        Some(2)
    );
    assert_eq!(bforest(&["decompose", &w]).status.code(), Some(2));
}

#[test]
fn envelope_of_a_composite_decodes_the_red_forest() {
    let dir = tempfile::tempdir().unwrap();
    let (b, r, c) = (
        path(dir.path(), "b.ftf"),
        path(dir.path(), "r.ftf"),
        path(dir.path(), "c.ftf"),
    );
    let (e, z) = (path(dir.path(), "e.csv"), path(dir.path(), "z.ftf"));
    assert!(bforest(&[
        "sample", "forest", "--lambda", "1", "--mu", "2", "--trees", "1", "--seed", "5", "--out",
        &b
    ])
    .status
    .success());
    assert!(bforest(&[
        "sample",
        "forest",
        "--lambda",
        "2",
        "--mu",
        "3",
        "--floor-length",
        "40",
        "--seed",
        "6",
        "--out",
        &r
    ])
    .status
    .success());
    assert!(
        bforest(&["compose", "--black", &b, "--red", &r, "--out", &c])
            .status
            .success()
    );
    let o = bforest(&["envelope", &c, "--red-out", &z, "--out", &e]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&e).unwrap();
    assert_eq!(csv.lines().next(), Some("index,time,B,A,Z,J,sigma"));
    // J never decreases
    let js: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(5).unwrap().parse().unwrap())
        .collect();
    assert!(js.windows(2).all(|w| w[1] >= w[0]));
    assert!(fs::metadata(&z).unwrap().len() > 0);
}

#[test]
fn verify_exit_codes() {
    let o = bforest(&["verify", "prop2", "--samples", "200"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("PASS prop2/round-trip"));

    // negative control: passes by rejecting
    let o = bforest(&["verify", "cor1", "--samples", "20000"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("expected rejection"));

    assert_eq!(bforest(&["verify", "thm9"]).status.code(), Some(2));
    assert_eq!(
        bforest(&["verify", "thm1", "--kappa", "1"]).status.code(),
        Some(2)
    );
    assert!(bforest(&["verify", "list"]).status.success());
}

#[test]
fn verify_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = path(dir.path(), "r.csv");
    let o = bforest(&[
        "verify",
        "thm3",
        "--samples",
        "20000",
        "--seed",
        "3",
        "--csv",
        &csv,
    ]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("name,statistic,p,verdict,seed,n"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn plots_are_deterministic_svg() {
    let dir = tempfile::tempdir().unwrap();
    let (f, w) = (path(dir.path(), "f.ftf"), path(dir.path(), "w.csv"));
    assert!(bforest(&[
        "sample", "forest", "--mu", "1", "--trees", "3", "--seed", "2", "--out", &f
    ])
    .status
    .success());
    assert!(
        bforest(&["sample", "walk", "--theta", "1", "--pairs", "20", "--out", &w])
            .status
            .success()
    );
    let (s1, s2, s3) = (
        path(dir.path(), "1.svg"),
        path(dir.path(), "2.svg"),
        path(dir.path(), "3.svg"),
    );
    assert!(bforest(&["plot", &f, "--svg", &s1, "--harris"])
        .status
        .success());
    assert!(bforest(&["plot", &f, "--svg", &s2, "--harris"])
        .status
        .success());
    assert!(bforest(&["plot", &w, "--svg", &s3]).status.success());
    let a = fs::read_to_string(&s1).unwrap();
    assert_eq!(a, fs::read_to_string(&s2).unwrap());
    assert!(a.starts_with("<?xml") && a.trim_end().ends_with("</svg>"));
    assert!(fs::read_to_string(&s3).unwrap().contains("<polyline"));
}
