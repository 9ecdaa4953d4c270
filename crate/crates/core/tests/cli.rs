use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn setdyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_setdyn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().display().to_string(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn analyze_reports_the_fixed_point_and_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let args = [
        "analyze",
        "--params",
        "k=0",
        "--resolution",
        "128",
        "--recurrence",
        "--out",
        path(&out),
    ];
    let first = setdyn(&args);
    ok(&first);
    let text = stdout(&first);
    assert_eq!(text.matches(", attracting").count(), 1, "{text}");
    for f in [
        "manifest.json",
        "sets.csv",
        "morse_sets.csv",
        "summary.json",
        "graphs/morse.txt",
        "images/morse.ppm",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let before = snapshot(&out);
    let again = setdyn(&args);
    ok(&again);
    assert_eq!(stdout(&again), text);
    assert_eq!(snapshot(&out), before);

    // a different run over the same directory is refused
    let other = setdyn(&["analyze", "--params", "k=0", "--resolution", "64", "--out", path(&out)]);
    assert_eq!(other.status.code(), Some(1));
}

#[test]
fn henon_defaults_find_the_attractor_region() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("h");
    let o = setdyn(&["analyze", "--map", "henon", "--resolution", "96", "--out", path(&out)]);
    ok(&o);
    let csv = fs::read_to_string(out.join("morse_sets.csv")).unwrap();
    let largest = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .max_by_key(|r| r[1].parse::<usize>().unwrap())
        .unwrap();
    // spans most of the attractor's x-range
    let (lo, hi): (f64, f64) = (largest[4].parse().unwrap(), largest[5].parse().unwrap());
    assert!(lo < -1.0 && hi > 1.0, "{largest:?}");
}

#[test]
fn usage_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    for args in [
        vec!["analyze", "--resolution", "0", "--out", path(&out)],
        vec!["analyze", "--params", "q=1", "--out", path(&out)],
        vec!["analyze", "--map", "lorenz", "--out", path(&out)],
        vec!["analyze", "--phase-box", "1:0,0:1", "--out", path(&out)],
        vec!["analyze", "--bogus"],
        vec!["analyze", "--workers", "0", "--out", path(&out)],
    ] {
        assert_eq!(setdyn(&args).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn missing_upstream_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let none = tmp.path().join("none");
    let o = setdyn(&["cluster", "--sweep-dir", path(&none)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("manifest"));
    assert_eq!(setdyn(&["render", "--input", path(&none)]).status.code(), Some(2));
    assert_eq!(setdyn(&["recurrence", "--run-dir", path(&none)]).status.code(), Some(2));
}

#[test]
fn non_recurrent_cell_file_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cells = tmp.path().join("cells.csv");
    fs::write(&cells, "c0,c1\n0,0\n40,40\n").unwrap();
    let o = setdyn(&[
        "recurrence",
        "--morse-set-file",
        path(&cells),
        "--params",
        "k=0",
        "--resolution",
        "64",
        "--out",
        path(&tmp.path().join("r")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("strongly connected"));
}

#[test]
fn single_box_sweep_matches_analyze() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let s = tmp.path().join("s");
    ok(&setdyn(&[
        "analyze",
        "--params",
        "b=[0.25,0.5],k=0.02",
        "--resolution",
        "64",
        "--out",
        path(&a),
    ]));
    ok(&setdyn(&[
        "sweep",
        "--params",
        "k=0.02",
        "--param-box",
        "b=0.25:0.5",
        "--param-grid",
        "1",
        "--resolution",
        "64",
        "--out",
        path(&s),
    ]));
    let sets_a = fs::read_to_string(a.join("sets.csv")).unwrap();
    let sets_s = fs::read_to_string(s.join("boxes/0.csv")).unwrap();
    assert_eq!(sets_a, sets_s);
}

#[test]
fn sweep_recurrence_cluster_render_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let s = tmp.path().join("sweep");
    let sweep_args = [
        "sweep",
        "--param-box",
        "b=0:1,k=0:0.2",
        "--param-grid",
        "4x4",
        "--resolution",
        "64",
        "--recurrence",
        "--threshold",
        "20",
        "--out",
        path(&s),
    ];
    let o = setdyn(&sweep_args);
    ok(&o);
    assert!(stdout(&o).contains("16 boxes"));
    for f in [
        "sweep.csv",
        "continuation.csv",
        "images/continuation.ppm",
        "boxes/0_0.json",
        "boxes/3_3.csv",
    ] {
        assert!(s.join(f).exists(), "missing {f}");
    }
    assert_eq!(fs::read_to_string(s.join("sweep.csv")).unwrap().lines().count(), 17);

    // deleting one box and rerunning recomputes only that box
    fs::remove_file(s.join("boxes/2_1.json")).unwrap();
    let mut m: serde_json::Value = serde_json::from_slice(&fs::read(s.join("manifest.json")).unwrap()).unwrap();
    m["stages"] = serde_json::json!({});
    fs::write(s.join("manifest.json"), serde_json::to_vec(&m).unwrap()).unwrap();
    let before = fs::read(s.join("continuation.csv")).unwrap();
    ok(&setdyn(&sweep_args));
    assert!(s.join("boxes/2_1.json").exists());
    assert_eq!(fs::read(s.join("continuation.csv")).unwrap(), before);

    let o = setdyn(&["cluster", "--sweep-dir", path(&s), "--features", "frr", "--minpts", "2"]);
    ok(&o);
    let cdir = s.join("cluster-frr");
    assert!(cdir.join("features/frr.csv").exists());
    assert!(cdir.join("labels/frr_eps0.8_minpts2.csv").exists());
    assert!(cdir.join("images/frr_eps0.8_minpts2.ppm").exists());

    let o = setdyn(&[
        "cluster",
        "--sweep-dir",
        path(&s),
        "--batch",
        "--out",
        path(&tmp.path().join("batch")),
    ]);
    ok(&o);
    let batch = fs::read_to_string(tmp.path().join("batch/labels/hist_batch.csv")).unwrap();
    assert_eq!(batch.lines().count(), 85);

    // recurrence of a stored box with a computed set
    let csv = fs::read_to_string(s.join("sweep.csv")).unwrap();
    let row = csv
        .lines()
        .skip(1)
        .find(|l| !l.ends_with(",,,,"))
        .expect("some box has recurrence");
    let f: Vec<&str> = row.split(',').collect();
    let name = format!("{}_{}", f[0], f[1]);
    let o = setdyn(&["recurrence", "--run-dir", path(&s), "--box", &name]);
    ok(&o);
    assert!(stdout(&o).contains("NFRRV"));
    assert!(s.join("recurrence").join(&name).join("manifest.json").exists());

    // render reproduces the stored images byte for byte
    let img = fs::read(s.join("images/continuation.ppm")).unwrap();
    let redraw = tmp.path().join("redraw");
    ok(&setdyn(&["render", "--input", path(&s), "--out", path(&redraw)]));
    assert_eq!(fs::read(redraw.join("images/continuation.ppm")).unwrap(), img);
}

#[test]
fn simulate_bounds_and_cover() {
    let tmp = tempfile::tempdir().unwrap();
    let b = tmp.path().join("b");
    let o = setdyn(&[
        "simulate",
        "--ics",
        "4x4@0:100,-100:100",
        "--burn",
        "2000",
        "--sample",
        "50",
        "--param-box",
        "a=0.89:0.9,k=0:0.03",
        "--param-lattice",
        "3x3",
        "--out",
        path(&b),
    ]);
    ok(&o);
    assert!(stdout(&o).contains("tail bounds"));
    assert_eq!(
        fs::read_to_string(b.join("simulation.csv")).unwrap().lines().count(),
        10
    );

    let c = tmp.path().join("c");
    let o = setdyn(&[
        "simulate",
        "--mode",
        "cover",
        "--params",
        "b=0.18,k=0.03,a=0.9",
        "--ics",
        "0.01,0.01;1,1",
        "--burn",
        "1000",
        "--sample",
        "2000",
        "--cover-resolution",
        "128",
        "--out",
        path(&c),
    ]);
    ok(&o);
    assert!(stdout(&o).contains("visited cells"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        "version = 1\nworkers = 2\n[analyze]\nparams = \"k=0\"\nresolution = \"64\"\n",
    )
    .unwrap();
    let out = tmp.path().join("o");
    ok(&setdyn(&[
        "--config",
        path(&cfg),
        "analyze",
        "--resolution",
        "32",
        "--out",
        path(&out),
    ]));
    let m: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["spec"]["phase_grid"]["resolution"], serde_json::json!([32, 32]));
    assert_eq!(m["spec"]["params"][3], serde_json::json!([0.0, 0.0]));

    // required flags may come from the config, on either side of the command
    fs::write(
        &cfg,
        "version = 1\n[sweep]\nparam-grid = \"2x2\"\nresolution = \"32\"\n",
    )
    .unwrap();
    let s = tmp.path().join("s");
    ok(&setdyn(&[
        "sweep",
        "--param-box",
        "b=0:1,k=0:0.2",
        "--config",
        path(&cfg),
        "--out",
        path(&s),
    ]));
    assert_eq!(fs::read_to_string(s.join("sweep.csv")).unwrap().lines().count(), 5);

    fs::write(&cfg, "version = 7\n").unwrap();
    let o = setdyn(&["--config", path(&cfg), "analyze", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn worker_count_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dirs: Vec<_> = ["1", "3"].iter().map(|w| tmp.path().join(format!("w{w}"))).collect();
    for (w, d) in ["1", "3"].iter().zip(&dirs) {
        ok(&setdyn(&[
            "--workers",
            w,
            "sweep",
            "--param-box",
            "b=0.2:0.4,k=0:0.04",
            "--param-grid",
            "2x3",
            "--resolution",
            "48",
            "--recurrence",
            "--threshold",
            "5",
            "--out",
            path(d),
        ]));
    }
    for f in [
        "sweep.csv",
        "continuation.csv",
        "images/continuation.ppm",
        "boxes/1_2.csv",
    ] {
        assert_eq!(
            fs::read(dirs[0].join(f)).unwrap(),
            fs::read(dirs[1].join(f)).unwrap(),
            "{f}"
        );
    }
    ok(&setdyn(&[
        "--deterministic",
        "analyze",
        "--resolution",
        "48",
        "--out",
        path(&tmp.path().join("d")),
    ]));
}
