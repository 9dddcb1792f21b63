use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ppcalib(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppcalib"))
        .args(args)
        .current_dir(dir)
        .env_remove("PPCALIB_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> Output {
    let out = ppcalib(args, dir);
    assert!(
        out.status.success(),
        "ppcalib {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_pattern(dir: &Path, name: &str, points: &[(f64, f64)]) {
    let mut csv = String::from("x,y\n");
    for (x, y) in points {
        csv.push_str(&format!("{x},{y}\n"));
    }
    fs::write(dir.join(name), csv).unwrap();
}

#[test]
fn simulate_writes_header_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = |out: &'static str| {
        vec!["simulate", "--family", "poisson", "--theta", "log(300),-3", "--basis", "1,u1",
             "--window", "0,1,0,1", "--seed", "7", "--out", out]
    };
    ok(&args("a.csv"), d);
    ok(&args("b.csv"), d);
    let a = fs::read_to_string(d.join("a.csv")).unwrap();
    assert!(a.starts_with("x,y\n"));
    assert!(a.lines().count() > 50);
    assert_eq!(a, fs::read_to_string(d.join("b.csv")).unwrap());
    assert_eq!(json(&d.join("a.window.json"))["x_max"], 1.0);

    // the environment seed is the default
    let env = Command::new(env!("CARGO_BIN_EXE_ppcalib"))
        .args(["simulate", "--family", "poisson", "--theta", "log(300),-3", "--basis", "1,u1"])
        .env("PPCALIB_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(env.stdout).unwrap(), a);
}

#[test]
fn simulate_geyer_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = |out: &'static str| {
        vec!["simulate", "--family", "geyer", "--beta", "54.598", "--gamma", "1.4918", "--r", "0.05",
             "--alpha", "4.5", "--iterations", "20000", "--seed", "3", "--out", out]
    };
    ok(&args("g1.csv"), d);
    ok(&args("g2.csv"), d);
    let g = fs::read_to_string(d.join("g1.csv")).unwrap();
    assert!(g.lines().count() > 100);
    assert_eq!(g, fs::read_to_string(d.join("g2.csv")).unwrap());
}

#[test]
fn invalid_inputs_fail_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.json"), r#"{"family": "strauss", "theta": [5.0], "r": 0.05}"#).unwrap();
    let out = ppcalib(&["simulate", "--model", "bad.json"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma"));

    let out = ppcalib(&["simulate", "--family", "poisson", "--theta", "log(x)"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("theta"));

    write_pattern(d, "p.csv", &[(0.5, 0.5)]);
    let out = ppcalib(&["fit", "--pattern", "p.csv", "--window", "0,1,0,1", "--family", "matern"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("matern"));

    let out = ppcalib(&["fit", "--pattern", "missing.csv", "--window", "0,1,0,1", "--family", "poisson"], d);
    assert!(!out.status.success());

    fs::write(d.join("q.csv"), "a,b\n0.1,0.2\n").unwrap();
    let out = ppcalib(&["fit", "--pattern", "q.csv", "--window", "0,1,0,1", "--family", "poisson"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("header"));
}

#[test]
fn intercept_fit_recovers_point_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let points: Vec<(f64, f64)> = (0..376)
        .map(|i| (((i * 37) % 376) as f64 / 376.0 + 0.001, (i as f64 + 0.5) / 376.0))
        .collect();
    write_pattern(d, "p.csv", &points);
    let out = ok(&["fit", "--pattern", "p.csv", "--window", "0,1,0,1", "--family", "poisson", "--out", "fit.json"], d);
    assert!(String::from_utf8_lossy(&out.stdout).contains("theta[1]"));
    let fit = json(&d.join("fit.json"));
    let theta0 = fit["theta"][0].as_f64().unwrap();
    assert!((theta0.exp() - 376.0).abs() < 1e-6, "{}", theta0.exp());
    assert_eq!(fit["converged"], true);
}

#[test]
fn strauss_fit_reports_gamma_and_empty_fit_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--family", "strauss", "--theta", "log(150)", "--gamma", "0.3", "--r", "0.05",
         "--iterations", "20000", "--seed", "1", "--out", "s.csv"], d);
    ok(&["fit", "--pattern", "s.csv", "--family", "strauss", "--fixed", "r=0.05", "--out", "s.fit.json"], d);
    let fit = json(&d.join("s.fit.json"));
    let gamma = fit["gamma"].as_f64().unwrap();
    assert!(gamma > 0.0 && gamma < 1.0, "{gamma}");
    assert_eq!(fit["r"], 0.05);

    write_pattern(d, "empty.csv", &[]);
    ok(&["fit", "--pattern", "empty.csv", "--window", "0,1,0,1", "--family", "poisson", "--out", "e.json"], d);
    assert_eq!(json(&d.join("e.json"))["converged"], false);
}

#[test]
fn calibrate_exact_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--family", "poisson", "--theta", "log(300),-3", "--basis", "1,u1", "--seed", "2",
         "--out", "obs.csv"], d);
    ok(&["fit", "--pattern", "obs.csv", "--family", "poisson", "--basis", "1,u1", "--out", "fit.json"], d);
    ok(&["calibrate", "--pattern", "obs.csv", "--model", "fit.json", "--seed", "5", "--out", "rep"], d);
    let rep = d.join("rep");

    let summary = json(&rep.join("model.summary.json"));
    assert_eq!(summary["pit_kind"], "exact_randomized");
    assert_eq!(summary["band_kind"], "binomial_null");
    assert_eq!(summary["lower_band"][0], 67.0);
    assert_eq!(summary["upper_band"][4], 93.0);
    let bins: u64 = summary["bin_counts"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(bins, 400);

    let summary_typed: ppcalib::io::Summary =
        ppcalib::io::read_json(&rep.join("model.summary.json")).unwrap();
    assert_eq!(serde_json::to_value(&summary_typed).unwrap(), summary);

    let pixels = ppcalib::io::read_pixel_csv(fs::File::open(rep.join("model.pixels.csv")).unwrap()).unwrap();
    assert_eq!(pixels.len(), 400);
    assert!(pixels.iter().all(|p| p.rank.is_none() && p.pit > 0.0 && p.pit < 1.0));
    let header = fs::read_to_string(rep.join("model.pixels.csv")).unwrap();
    assert!(header.starts_with("s,x_index,y_index,count,pit,rank\n"));

    let n_points = fs::read_to_string(d.join("obs.csv")).unwrap().lines().count() - 1;
    let map = fs::read_to_string(rep.join("model.map.svg")).unwrap();
    let doc = roxmltree::Document::parse(&map).expect("map is XML");
    let rects = doc.descendants().filter(|n| n.has_tag_name("rect")).count();
    let circles = doc.descendants().filter(|n| n.has_tag_name("circle")).count();
    assert_eq!(rects, 400);
    assert_eq!(circles, n_points);

    let hist = fs::read_to_string(rep.join("model.histogram.svg")).unwrap();
    let doc = roxmltree::Document::parse(&hist).expect("histogram is XML");
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("rect")).count(), 5);

    // same seed, same report
    ok(&["calibrate", "--pattern", "obs.csv", "--model", "fit.json", "--seed", "5", "--out", "rep2"], d);
    for f in ["model.summary.json", "model.pixels.csv", "model.map.svg", "model.histogram.svg"] {
        assert_eq!(fs::read(rep.join(f)).unwrap(), fs::read(d.join("rep2").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn calibrate_ranks_lie_in_range() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--family", "strauss", "--theta", "log(150)", "--gamma", "0.3", "--r", "0.05",
         "--iterations", "10000", "--seed", "4", "--out", "s.csv"], d);
    ok(&["calibrate", "--pattern", "s.csv", "--family", "strauss", "--theta", "log(150)", "--gamma", "0.3",
         "--r", "0.05", "--iterations", "10000", "--k", "499", "--band", "binomial", "--grid", "10x10",
         "--out", "rep"], d);
    let pixels = ppcalib::io::read_pixel_csv(fs::File::open(d.join("rep/model.pixels.csv")).unwrap()).unwrap();
    assert_eq!(pixels.len(), 100);
    assert!(pixels.iter().all(|p| matches!(p.rank, Some(1..=500))));
    assert!(pixels.iter().all(|p| (p.pit - p.rank.unwrap() as f64 / 500.0).abs() < 1e-12));
    let summary = json(&d.join("rep/model.summary.json"));
    assert_eq!(summary["pit_kind"], "empirical_rank");
    assert_eq!(summary["replicates"], 499);
    assert_eq!(summary["dependence_caveat"], true);

    let out = ppcalib(&["calibrate", "--pattern", "s.csv", "--family", "strauss", "--theta", "log(150)",
                        "--gamma", "0.3", "--r", "0.05", "--k", "100", "--out", "bad"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("divide"));
}

#[test]
fn ntest_prints_delta() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_pattern(d, "p.csv", &[(0.2, 0.2)]);
    let out = ok(&["ntest", "--pattern", "p.csv", "--window", "0,1,0,1", "--family", "poisson",
                   "--theta", "log(100)", "--k", "99"], d);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["observed"], 1);
    assert_eq!(v["delta"], 0.0);
    assert_eq!(v["inconsistent"], true);
}

#[test]
fn inhom_poisson_experiment_writes_three_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = ok(&["experiment", "inhom_poisson", "--seed", "3", "--out", "exp"], d);
    let table = String::from_utf8(out.stdout).unwrap();
    for label in ["true", "fitted", "homogeneous"] {
        assert!(table.contains(label));
        let svg = fs::read_to_string(d.join(format!("exp/{label}.map.svg"))).unwrap();
        roxmltree::Document::parse(&svg).unwrap();
        assert!(d.join(format!("exp/{label}.histogram.svg")).exists());
        assert!(d.join(format!("exp/{label}.summary.json")).exists());
    }
    assert_eq!(fs::read_dir(d.join("exp")).unwrap().filter(|e| {
        e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".map.svg")
    }).count(), 3);

    // the stored config reproduces the run, with flags taking precedence
    ok(&["experiment", "--config", "exp/experiment.json", "--out", "again"], d);
    assert_eq!(
        fs::read(d.join("exp/fitted.pixels.csv")).unwrap(),
        fs::read(d.join("again/fitted.pixels.csv")).unwrap()
    );
    ok(&["experiment", "--config", "exp/experiment.json", "--seed", "4", "--out", "other"], d);
    assert_eq!(json(&d.join("other/experiment.json"))["seed"], 4);
    assert_ne!(
        fs::read(d.join("exp/observed.csv")).unwrap(),
        fs::read(d.join("other/observed.csv")).unwrap()
    );
}

#[test]
fn gibbs_experiments_list_the_competitors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let fast = ["--k", "19", "--bins", "5", "--n-boot", "5", "--iterations", "5000", "--grid", "10x10"];
    let mut args = vec!["experiment", "strauss", "--out", "s"];
    args.extend(fast);
    ok(&args, d);
    for label in ["true", "refit", "homogeneous_strauss", "homogeneous_poisson"] {
        assert!(d.join(format!("s/{label}.summary.json")).exists(), "{label}");
    }
    let mut args = vec!["experiment", "geyer", "--out", "g"];
    args.extend(fast);
    ok(&args, d);
    let summaries = fs::read_dir(d.join("g")).unwrap().filter(|e| {
        e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".summary.json")
    }).count();
    assert_eq!(summaries, 3);
}
