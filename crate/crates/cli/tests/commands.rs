use std::collections::HashMap;
use std::fs;
use std::path::Path;

use calr_cli::run_command;

fn run(dir: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["calr".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    argv.push("--out".into());
    argv.push(dir.to_string_lossy().into_owned());
    run_command(argv)
}

fn table(path: &Path) -> HashMap<String, String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .filter_map(|l| l.split_once(','))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn num(t: &HashMap<String, String>, k: &str) -> f64 {
    t[k].parse().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn classify_desk_configuration() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(
        d.path(),
        "# desk\nlambda = 1\nmu = 1\nr_i = 1\nr_e = 2\nresonance = +\nsource_z = 3, 0\n",
    );
    assert_eq!(run(d.path(), &["classify", "--config", &cfg]), 0);
    let t = table(&d.path().join("classify.csv"));
    assert_eq!(t["class"], "resonant_blowup");
    assert!((num(&t, "r_star") - 4.0).abs() < 1e-12);
    assert!((num(&t, "boundedness_radius") - 8.0).abs() < 1e-12);
    let m = fs::read_to_string(d.path().join("manifest.txt")).unwrap();
    assert!(m.contains("command = classify"));
}

#[test]
fn params_report_resonant_contrasts() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(d.path(), &["params"]), 0);
    let t = table(&d.path().join("params.csv"));
    assert!((num(&t, "k0") - 1.0 / 6.0).abs() < 1e-15);
    assert!((num(&t, "c_plus") + 0.5).abs() < 1e-14);
    assert!((num(&t, "c_minus") + 2.0).abs() < 1e-14);
}

#[test]
fn spectrum_deviation_shrinks_per_branch() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(d.path(), &["spectrum", "--n-max", "20"]), 0);
    let text = fs::read_to_string(d.path().join("spectrum.csv")).unwrap();
    let mut series: HashMap<(String, String), Vec<(usize, f64)>> = HashMap::new();
    for line in text.lines().skip(1) {
        let c: Vec<&str> = line.split(',').collect();
        series
            .entry((c[1].to_string(), c[2].to_string()))
            .or_default()
            .push((c[0].parse().unwrap(), c[6].parse().unwrap()));
    }
    assert_eq!(series.len(), 8);
    for (k, v) in &series {
        let tail: Vec<f64> = v.iter().filter(|(n, _)| *n >= 5).map(|p| p.1).collect();
        assert_eq!(tail.len(), 16);
        assert!(tail.windows(2).all(|w| w[1] < w[0]), "{k:?}: {tail:?}");
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        assert_eq!(
            run(
                dir,
                &["sweep", "--delta-grid", "1e-3", "1e-6", "7", "--seed", "7"]
            ),
            0
        );
    }
    for name in ["sweep.csv", "manifest.txt"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap()
        );
    }
    let m = fs::read_to_string(a.path().join("manifest.txt")).unwrap();
    assert!(m.contains("fitted_exponent = "));
    assert!(m.contains("predicted_exponent = "));
}

#[test]
fn solve_and_field_write_results() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(d.path(), &["solve", "--delta", "1e-4"]), 0);
    let m = fs::read_to_string(d.path().join("manifest.txt")).unwrap();
    assert!(m.contains("N_max = "));
    let cfg = write_config(d.path(), "field_points = 5\nfield_extent = 2\n");
    assert_eq!(
        run(d.path(), &["field", "--config", &cfg, "--n-max", "30"]),
        0
    );
    let rows = fs::read_to_string(d.path().join("field.csv")).unwrap();
    assert_eq!(rows.lines().count(), 26);
    assert!(rows.lines().any(|l| l.ends_with("NaN")));
}

#[test]
fn validate_passes_on_desk_configuration() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(d.path(), &["validate", "--n-max", "6"]), 0);
    let text = fs::read_to_string(d.path().join("validation.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    for bad in [
        "lambda 1\n",
        "bogus = 2\n",
        "mu = 1\nmu = 2\n",
        "r_i = 3\n",
        "source_z = 1.5, 0\n",
    ] {
        let cfg = write_config(d.path(), bad);
        assert_eq!(run(d.path(), &["params", "--config", &cfg]), 1, "{bad:?}");
    }
    assert_eq!(run(d.path(), &["solve", "--delta", "0"]), 1);
    assert_eq!(run(d.path(), &["sweep"]), 1);
    assert_eq!(run(d.path(), &["nonsense"]), 1);
    assert_eq!(
        run(
            d.path(),
            &[
                "solve",
                "--delta",
                "1e-3",
                "--delta-grid",
                "1e-3",
                "1e-4",
                "3"
            ]
        ),
        1
    );
    assert_eq!(
        run(d.path(), &["params", "--config", "/nonexistent/x.cfg"]),
        1
    );
    assert_eq!(run_command(["calr", "--help"]), 0);
}
