use std::path::Path;
use std::process::Command;

use imave::manifold::{SpdMatrix, SpherePoint};
use imave::Responses;
use imave_cli::dataset::{format_dataset, parse_dataset, read_dataset, write_dataset, Dataset};
use nalgebra::{DMatrix, Vector3};

fn imave(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_imave")).args(args).output().unwrap();
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    (out.status.code().unwrap(), stderr)
}

fn read_basis(path: &Path) -> DMatrix<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let rows: Vec<Vec<f64>> = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

fn awkward_x(n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |i, j| ((i * 7 + j * 13) as f64 * 0.731).sin() * 10f64.powi(j as i32 - 2) + 1.0 / 3.0)
}

#[test]
fn spd_dataset_round_trip() {
    let n = 6;
    let ys: Vec<SpdMatrix> = (0..n)
        .map(|i| {
            let a = DMatrix::from_fn(3, 3, |r, c| ((i + r * 3 + c) as f64 * 1.37).cos() / 7.0);
            SpdMatrix::new(&a * a.transpose() + DMatrix::identity(3, 3) * 0.1).unwrap()
        })
        .collect();
    let data = Dataset {
        ids: (0..n).map(|i| format!("s{i}")).collect(),
        x: awkward_x(n, 4),
        y: Responses::Spd(ys.clone()),
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write_dataset(&path, &data).unwrap();
    let back = read_dataset(&path).unwrap();
    assert_eq!(back.ids, data.ids);
    assert!((&back.x - &data.x).amax() <= 1e-12);
    let Responses::Spd(got) = &back.y else { panic!("wrong manifold") };
    for (a, b) in got.iter().zip(&ys) {
        assert!((a.matrix() - b.matrix()).amax() <= 1e-12);
    }
}

#[test]
fn sphere_dataset_round_trip() {
    let ys: Vec<SpherePoint> = (0..5)
        .map(|i| SpherePoint::normalize(Vector3::new(1.0, i as f64 / 3.0, -0.7 + i as f64)).unwrap())
        .collect();
    let data = Dataset {
        ids: (1..=5).map(|i| i.to_string()).collect(),
        x: awkward_x(5, 2),
        y: Responses::Sphere(ys.clone()),
    };
    let back = parse_dataset(&format_dataset(&data).unwrap()).unwrap();
    let Responses::Sphere(got) = &back.y else { panic!("wrong manifold") };
    for (a, b) in got.iter().zip(&ys) {
        let (a, b) = (a.to_array(), b.to_array());
        assert!((0..3).all(|k| (a[k] - b[k]).abs() <= 1e-12));
    }
}

#[test]
fn generate_then_fit_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    let fit = dir.path().join("fit");
    let (code, err) = imave(&["generate", "--model", "II-1", "--p", "4", "--n", "60", "--seed", "3", "--output", gen.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(gen.join("b0.csv").exists());

    let (code, err) = imave(&[
        "fit",
        "--dataset",
        gen.join("data.csv").to_str().unwrap(),
        "--d",
        "1",
        "--method",
        "iopg",
        "--output",
        fit.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    for name in ["basis.csv", "basis_original.csv"] {
        let b = read_basis(&fit.join(name));
        assert_eq!(b.shape(), (4, 1));
        let gap = (b.transpose() * &b - DMatrix::identity(1, 1)).norm();
        assert!(gap < 1e-8, "{name}: {gap}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fit.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["estimator"], "eu-iopg");
    assert_eq!(report["d"], 1);
    assert!(fit.join("effective.conf").exists());
}

#[test]
fn fit_from_model_reports_error_against_truth() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = imave(&["fit", "--model", "III", "--p", "3", "--n", "60", "--max-iters", "3", "--output", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let e = report["subspace_error"].as_f64().unwrap();
    assert!((0.0..=2f64.sqrt() * 2.0).contains(&e));
}

#[test]
fn select_dim_writes_curve() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = imave(&[
        "select-dim",
        "--model",
        "II-1",
        "--p",
        "3",
        "--n",
        "60",
        "--method",
        "iopg",
        "--output",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(dir.path().join("cv.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "l,cv,bandwidth,selected");
    assert_eq!(lines.len(), 4);
    assert_eq!(lines.iter().filter(|l| l.ends_with(",1")).count(), 1);
}

#[test]
fn replicate_writes_results_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# small run\nmodel = II-2\np = 3\nn = 50\nreplications = 3\nmethod = both\nmax_iters = 2\n").unwrap();
    let (code, err) = imave(&["replicate", "--config", cfg.to_str().unwrap(), "--seed", "9", "--output", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let results = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 3 * 2);
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    let effective = std::fs::read_to_string(dir.path().join("effective.conf")).unwrap();
    assert!(effective.contains("seed = 9"));
}

#[test]
fn exit_codes_classify_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let (code, err) = imave(&["fit", "--model", "I-1", "--dataset", "x.csv", "--output", out]);
    assert_eq!(code, 1, "{err}");
    let (code, _) = imave(&["fit", "--bogus-flag", "1"]);
    assert_eq!(code, 1);

    let cfg = dir.path().join("bad.conf");
    std::fs::write(&cfg, "model = I-1\n\nkernal = quartic\n").unwrap();
    let (code, err) = imave(&["fit", "--config", cfg.to_str().unwrap(), "--output", out]);
    assert_eq!(code, 1);
    assert!(err.contains("line 3") && err.contains("kernal"), "{err}");

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "# manifold=spd m=2\nid,x1,x2,y11,y21,y22\n1,0,0,1,0,1\n2,0,1,1,3,1\n").unwrap();
    let (code, err) = imave(&["fit", "--dataset", bad.to_str().unwrap(), "--d", "1", "--output", out]);
    assert_eq!(code, 2);
    assert!(err.contains("row 2") && err.contains("smallest eigenvalue"), "{err}");

    let (code, _) = imave(&["fit", "--dataset", dir.path().join("missing.csv").to_str().unwrap(), "--output", out]);
    assert_eq!(code, 2);
}
