use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pqrlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pqrlab"))
        .args(args)
        .output()
        .expect("spawn pqrlab")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn help_documents_every_flag() {
    let cases: &[(&str, &[&str])] = &[
        (
            "sample",
            &[
                "--config",
                "--output-dir",
                "--jobs",
                "--density",
                "--geometry",
                "--epsilon",
                "--omega",
                "--n-vertices",
                "--seed",
            ],
        ),
        ("graph", &["--points", "--profile", "--delta", "--q", "--n-vertices"]),
        ("spectrum", &["--p", "--q", "--r", "--k-eigen", "--tol", "--no-scale"]),
        (
            "continuum",
            &["--n-cells", "--k-eigen", "--p", "--density", "--geometry"],
        ),
        (
            "sweep",
            &[
                "--mode",
                "--values",
                "--trials",
                "--n-cells",
                "--n-vertices",
                "--clusters",
                "--seed",
                "--jobs",
            ],
        ),
        ("cheeger", &["--profile", "--epsilon", "--p", "--q", "--r", "--n-grid"]),
        (
            "invariance",
            &["--p1", "--r1", "--p2", "--r2", "--q", "--n-vertices", "--k-eigen"],
        ),
        ("report", &["--n-cells", "--output-dir", "--jobs"]),
    ];
    for (sub, flags) in cases {
        let o = pqrlab(&[sub, "--help"]);
        assert_eq!(code(&o), 0, "{sub} --help");
        let text = stdout(&o);
        for f in *flags {
            assert!(text.contains(f), "{sub} --help lacks {f}");
        }
    }
    assert_eq!(code(&pqrlab(&["--help"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&pqrlab(&["frobnicate"])), 1);
    assert_eq!(code(&pqrlab(&["sample", "--no-such-flag"])), 1);
    assert_eq!(code(&pqrlab(&["cheeger", "--p", "nan"])), 1);
    assert_eq!(code(&pqrlab(&[])), 1);
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    assert_eq!(
        code(&pqrlab(&["sample", "--geometry", "paper-4", "--output-dir", out])),
        1
    );
    assert_eq!(code(&pqrlab(&["cheeger", "--profile", "triangle"])), 1);
    assert_eq!(code(&pqrlab(&["report", "tab99", "--output-dir", out])), 1);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"n_vertices\": ").unwrap();
    assert_eq!(
        code(&pqrlab(&[
            "sample",
            "--config",
            bad.to_str().unwrap(),
            "--output-dir",
            out
        ])),
        1
    );
    fs::write(&bad, "{\"unknown_key\": 1}").unwrap();
    assert_eq!(
        code(&pqrlab(&[
            "sample",
            "--config",
            bad.to_str().unwrap(),
            "--output-dir",
            out
        ])),
        1
    );
}

#[test]
fn numerical_failures_exit_two() {
    // three points can never form a connected graph at the default bandwidth
    let dir = tempfile::tempdir().unwrap();
    let o = pqrlab(&[
        "sweep",
        "--mode",
        "epsilon_discrete",
        "--values",
        "0.2,0.1",
        "--n-vertices",
        "3",
        "--trials",
        "1",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn io_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&pqrlab(&["sample", "--config", missing.to_str().unwrap()])), 3);
    // an output directory below a regular file cannot be created
    let file = dir.path().join("plain");
    fs::write(&file, "x").unwrap();
    let out = file.join("sub");
    assert_eq!(
        code(&pqrlab(&[
            "sample",
            "--n-vertices",
            "10",
            "--output-dir",
            out.to_str().unwrap()
        ])),
        3
    );
}

#[test]
fn cheeger_uniform() {
    let o = pqrlab(&[
        "cheeger",
        "--profile",
        "uniform",
        "--p",
        "0.5",
        "--q",
        "1",
        "--r",
        "0.5",
    ]);
    assert_eq!(code(&o), 0);
    let line = stdout(&o);
    assert!(line.starts_with("h=2.000000 bound=1.000000 sigma2="), "{line}");
    let sigma2: f64 = line.split_whitespace().nth(2).unwrap()["sigma2=".len()..]
        .parse()
        .unwrap();
    assert!((sigma2 - std::f64::consts::PI.powi(2)).abs() < 1e-3, "{line}");
    assert!(line.trim_end().ends_with("PASS"));
}

#[test]
fn invariance_matching_pairs() {
    let o = pqrlab(&[
        "invariance",
        "--p1",
        "1",
        "--q",
        "2",
        "--r1",
        "0",
        "--p2",
        "0.5",
        "--r2",
        "0.5",
        "--n",
        "512",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let line = stdout(&o);
    let d: f64 = line.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!(d <= 1e-10, "{line}");

    let o = pqrlab(&[
        "invariance",
        "--p1",
        "1",
        "--q",
        "2",
        "--r1",
        "0",
        "--p2",
        "1.5",
        "--r2",
        "0.5",
        "--n",
        "512",
    ]);
    assert_eq!(code(&o), 1);
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn flags_override_file_override_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"n_vertices": 300, "seed": 9}"#).unwrap();
    let a = dir.path().join("a");
    let o = pqrlab(&[
        "sample",
        "--config",
        cfg.to_str().unwrap(),
        "--output-dir",
        a.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(data_rows(&a.join("samples.csv")), 300);

    let b = dir.path().join("b");
    let o = pqrlab(&[
        "sample",
        "--config",
        cfg.to_str().unwrap(),
        "--n-vertices",
        "120",
        "--output-dir",
        b.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(data_rows(&b.join("samples.csv")), 120);
    let resolved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(b.join("config.json")).unwrap()).unwrap();
    assert_eq!(resolved["seed"], 9);
    assert_eq!(resolved["n_vertices"], 120);
    assert_eq!(resolved["density"]["variant"], "erf_clusters");
}

#[test]
fn sweep_writes_report_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    fs::write(
        &cfg,
        r#"{"mode": "epsilon_continuum", "params": {"p": 0.5, "q": 1.0, "r": 0.5},
            "density": {"variant": "erf", "epsilon": 0.1,
                        "clusters": [{"center": [-0.5, 0.0], "radius": 0.25}, {"center": [0.5, 0.3], "radius": 0.25}]},
            "sweep_values": [0.1, 0.05, 0.025], "n_cells": 24, "fit_max": 1.0}"#,
    )
    .unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = pqrlab(&[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--jobs",
            "1",
            "--output-dir",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        for f in ["results.csv", "summary.json", "plot.svg"] {
            assert!(out.join(f).exists(), "{f}");
        }
        fs::read_to_string(out.join("results.csv")).unwrap()
    };
    assert_eq!(run("one"), run("two"));
}

#[test]
fn graph_and_spectrum_from_points() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s");
    assert_eq!(
        code(&pqrlab(&[
            "sample",
            "--n-vertices",
            "1500",
            "--output-dir",
            s.to_str().unwrap()
        ])),
        0
    );
    let pts = s.join("samples.csv");
    let g = dir.path().join("g");
    let o = pqrlab(&[
        "graph",
        "--points",
        pts.to_str().unwrap(),
        "--delta",
        "0.3",
        "--output-dir",
        g.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let w = pqr_lab::mm::read_matrix_market(std::io::BufReader::new(fs::File::open(g.join("weights.mtx")).unwrap()))
        .unwrap()
        .to_adjacency()
        .unwrap();
    assert_eq!(w.n(), 1500);

    let sp = dir.path().join("sp");
    let o = pqrlab(&[
        "spectrum",
        "--points",
        pts.to_str().unwrap(),
        "--delta",
        "0.3",
        "--k-eigen",
        "4",
        "--output-dir",
        sp.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_rows(&sp.join("spectrum.csv")), 4);
    assert_eq!(data_rows(&sp.join("eigenvectors.csv")), 1500);
}
