use kawahara::diagnostics::CSV_HEADER;
use kawahara::output::read_series;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kawahara(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kawahara"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn kawahara_env(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kawahara"))
        .args(args)
        .env("KAWAHARA_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing in\n{text}"))
        .to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

// ── End-to-end ──────────────────────────────────────────────────────

#[test]
fn preset_then_fit_reports_exponential_decay() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    let o = kawahara(&["preset", "--name", "expo", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["series.csv", "summary.txt", "config.resolved"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let series = out.join("series.csv");
    let o = kawahara(&["fit", "--series", series.to_str().unwrap(), "--model", "exp"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(value(&text, "fit.c").parse::<f64>().unwrap() > 0.0);
    assert!(value(&text, "fit.r_squared").parse::<f64>().unwrap() >= 0.99);

    // The xi model finds ξ through config.resolved beside the series.
    let o = kawahara(&["fit", "--series", series.to_str().unwrap(), "--model", "xi", "--window", "5,20"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(value(&stdout(&o), "fit.model"), "xi");
}

#[test]
fn csv_header_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.cfg", "sim.a0 = 1\nsim.T = 0.05\nspace.N = 32\n");
    let out = tmp.path().join("o");
    let o = kawahara(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(out.join("series.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "t,E,F,u_norm,eta_norm_Lg,boundary_diss,memory_diss,nonlinear_leak,uxx0"
    );
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
}

#[test]
fn zero_initial_data_gives_zero_energy() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "z.cfg",
        "sim.a0 = 1\nkernel.family = polynomial\nkernel.q1 = 2\ninit.u0 = zero\nsim.T = 0.5\nspace.N = 48\n",
    );
    let out = tmp.path().join("z");
    let o = kawahara(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let records = read_series(&out.join("series.csv")).unwrap();
    assert!(records.len() > 2);
    assert!(records.iter().all(|r| r.e == 0.0));

    // Fitting an identically zero series is reported, not an error.
    let o = kawahara(&["fit", "--series", out.join("series.csv").to_str().unwrap(), "--model", "exp"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(value(&stdout(&o), "fit.all_zero"), "true");
}

#[test]
fn resolved_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let o = kawahara(&["preset", "--name", "stretched", "--out", a.to_str().unwrap(), "--set", "sim.T=1"]);
    assert_eq!(o.status.code(), Some(0));
    let resolved = a.join("config.resolved");
    let o = kawahara(&["simulate", "--config", resolved.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        fs::read(a.join("series.csv")).unwrap(),
        fs::read(b.join("series.csv")).unwrap()
    );
}

// ── Subcommand verdicts ─────────────────────────────────────────────

#[test]
fn check_condition_passes_for_presets_and_fails_for_large_data() {
    let tmp = tempfile::tempdir().unwrap();
    let small = write(tmp.path(), "s.cfg", "sim.a0 = 1\n");
    let o = kawahara(&["check-condition", "--config", &small]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(value(&text, "holds"), "true");
    assert!(value(&text, "margin").parse::<f64>().unwrap() > 0.5);

    let large = write(tmp.path(), "l.cfg", "sim.a0 = 1\ninit.amplitude = 1\n");
    let o = kawahara(&["check-condition", "--config", &large]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(value(&stdout(&o), "holds"), "false");
}

#[test]
fn condition_violation_warns_but_simulates() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "l.cfg", "sim.a0 = 1\ninit.amplitude = 0.3\nsim.T = 0.05\nspace.N = 32\n");
    let o = kawahara(&["simulate", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn validate_kernel_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write(tmp.path(), "g.cfg", "sim.a0 = 1\nkernel.family = stretched\n");
    let o = kawahara(&["validate-kernel", "--config", &good]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!stdout(&o).contains("FAIL"));

    let s: Vec<String> = (0..=50).map(|i| format!("{}", 0.2 * i as f64)).collect();
    let g: Vec<String> = (0..=50)
        .map(|i| {
            let s = 0.2 * i as f64;
            if (2.0..=3.0).contains(&s) { "-0.1".to_string() } else { format!("{}", (-s).exp()) }
        })
        .collect();
    let bad = write(
        tmp.path(),
        "b.cfg",
        &format!(
            "sim.a0 = 1\nkernel.family = tabulated\nkernel.table_s = {}\nkernel.table_g = {}\n",
            s.join(" "),
            g.join(" ")
        ),
    );
    let o = kawahara(&["validate-kernel", "--config", &bad, "--s-max", "10"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("[FAIL] f' < 0"));
}

#[test]
fn error_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(kawahara(&[]).status.code(), Some(1));
    assert_eq!(kawahara(&["preset", "--name", "cubic", "--out", "x"]).status.code(), Some(1));
    let missing = tmp.path().join("nope.cfg");
    assert_eq!(
        kawahara(&["check-condition", "--config", missing.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let bad = write(tmp.path(), "bad.cfg", "sim.a0 = 1\nkernel.family = polynomial\nkernel.q1 = 0.5\n");
    let o = kawahara(&["check-condition", "--config", &bad]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kernel.q1"));
    let unknown = write(tmp.path(), "u.cfg", "sim.a0 = 1\nsim.speed = 2\n");
    assert_eq!(kawahara(&["check-condition", "--config", &unknown]).status.code(), Some(3));
}

// ── Sweeps ──────────────────────────────────────────────────────────

#[test]
fn sweep_is_independent_of_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.cfg", "sim.a0 = 1\nsim.T = 0.2\nspace.N = 40\n");
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(format!("t{threads}"));
        let o = kawahara_env(
            &[
                "sweep",
                "--config",
                &cfg,
                "--vary",
                "sim.a0=1,2",
                "--vary",
                "init.amplitude=0.01,0.02",
                "--out",
                out.to_str().unwrap(),
            ],
            threads,
        );
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let mut dirs: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        dirs.sort();
        assert_eq!(dirs.len(), 4);
        outputs.push(
            dirs.iter()
                .map(|d| fs::read(d.join("series.csv")).unwrap())
                .collect::<Vec<_>>(),
        );
    }
    assert_eq!(outputs[0], outputs[1]);
}
