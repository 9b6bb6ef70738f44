use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn leadopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leadopt"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn verify_filter_prints_header_and_matching_checks() {
    let out = leadopt(&["verify", "--filter", "easgd_counterexample"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "name,lhs,rhs,slack,std_error,trials,status");
    assert_eq!(lines.len(), 6, "{text}");
    assert!(lines[1..]
        .iter()
        .all(|l| l.starts_with("easgd_counterexample/") && l.ends_with(",pass")));
}

#[test]
fn verify_is_reproducible() {
    let a = leadopt(&["verify", "--filter", "stochastic_leader"]);
    let b = leadopt(&["verify", "--filter", "stochastic_leader"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(leadopt(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(
        leadopt(&["mc-bench", "--trials", "many"]).status.code(),
        Some(2)
    );
    let dir = tempfile::tempdir().unwrap();
    let out = leadopt(&[
        "sinc-demo",
        "--iterations",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn malformed_spec_reports_line_and_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.spec");
    fs::write(&spec, "name = bad\ncluster.tau = zero\n").unwrap();
    let out = leadopt(&["run", "--spec", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(
        err.contains("line 2") && err.contains("cluster.tau"),
        "{err}"
    );

    fs::write(&spec, "cluster.n = 0\n").unwrap();
    assert_eq!(
        leadopt(&["run", "--spec", spec.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn missing_spec_is_a_runtime_error() {
    let out = leadopt(&["run", "--spec", "/nonexistent/leadopt.spec"]);
    assert_eq!(out.status.code(), Some(3));
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e != "spec"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn spec_runs_replay_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("lsgd.spec");
    let out_prefix = dir.path().join("lsgd");
    fs::write(
        &spec,
        format!(
            "# two groups of three\n\
             out = {}\n\
             trials = 2\n\
             cluster.n = 2\n\
             cluster.l = 3\n\
             cluster.tau = 2\n\
             cluster.tau_g = 4\n\
             cluster.selection = stochastic\n\
             cluster.speeds = 1.0,2.0,0.5,1.0,1.5,3.0\n\
             cluster.max_total_steps = 2000\n\
             noise.sigma2 = 0.5\n\
             noise.sigma_f = 0.2\n\
             step.lambda_g = 0.1\n",
            out_prefix.display()
        ),
    )
    .unwrap();
    let first = leadopt(&["run", "--spec", spec.to_str().unwrap()]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let a = snapshot(dir.path());
    let second = leadopt(&["run", "--spec", spec.to_str().unwrap()]);
    assert_eq!(second.status.code(), Some(0));
    let b = snapshot(dir.path());
    assert_eq!(
        a.len(),
        4,
        "{:?}",
        a.iter().map(|f| &f.0).collect::<Vec<_>>()
    );
    assert_eq!(a, b);
    assert_eq!(first.stdout, second.stdout);
    assert!(stdout(&first).contains("local_pulls="));
}

#[test]
fn sinc_demo_and_small_benchmark_replay() {
    let dir = tempfile::tempdir().unwrap();
    let sinc = dir.path().join("sinc");
    let mc = dir.path().join("mc");
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let s = leadopt(&["sinc-demo", "--out", sinc.to_str().unwrap()]);
        assert_eq!(s.status.code(), Some(0), "{}", stderr(&s));
        let m = leadopt(&[
            "mc-bench",
            "--d",
            "20",
            "--ranks",
            "1,2",
            "--trials",
            "2",
            "--steps",
            "500",
            "--stride",
            "50",
            "--out",
            mc.to_str().unwrap(),
        ]);
        assert_eq!(m.status.code(), Some(0), "{}", stderr(&m));
        outputs.push((snapshot(&sinc), snapshot(&mc), s.stdout));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0].1.len(), 2);
    let table = String::from_utf8_lossy(&outputs[0].2).into_owned();
    assert!(
        table
            .lines()
            .any(|l| l.starts_with("lgd ") && l.contains(" true ")),
        "{table}"
    );
}
