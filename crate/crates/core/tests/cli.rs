//! Black-box checks of the command-line interface: exit codes, CSV shape,
//! and byte-level determinism (modulo the runtime_ms column).

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_modelheat"))
}

/// Drop the trailing runtime_ms column from every CSV line.
fn strip_runtime(stdout: &str) -> String {
    stdout
        .lines()
        .map(|l| match l.rsplit_once(',') {
            Some((head, _)) if l.starts_with(char::is_numeric) => head.to_string(),
            _ => l.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn classify_succeeds() {
    let out = bin()
        .args(["classify", "--set", "density.theta=3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("NonUnique"), "{text}");
}

#[test]
fn config_errors_exit_2() {
    for args in [
        vec!["classify", "--set", "density.theta=-1"],
        vec!["classify", "--set", "bogus.key=1"],
        vec!["classify", "--set", "run.dt=fast"],
        vec!["classify", "--config", "/nonexistent/path.cfg"],
    ] {
        let out = bin().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "args {args:?}");
    }
}

#[test]
fn missing_witness_exits_3() {
    let out = bin()
        .args(["supersolution", "--set", "density.theta=1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn supersolution_csv_has_header() {
    let out = bin()
        .args(["supersolution", "--set", "density.theta=3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("r,h,h1,h2,residual\n"), "{text}");
    // Five fields per row, all parseable with '.' decimal separators.
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 5, "{line}");
        for f in fields {
            f.parse::<f64>().unwrap();
        }
    }
}

#[test]
fn exhaust_output_is_deterministic() {
    let run = || {
        let out = bin()
            .args([
                "exhaust",
                "--set",
                "density.theta=3",
                "--set",
                "run.R_levels=2",
            ])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        strip_runtime(&String::from_utf8(out.stdout).unwrap())
    };
    let first = run();
    assert!(first.starts_with(
        "level,R,probe_r,u_probe_T,v_probe,v_over_gammaT,monotone_ok,runtime_ms"
    ));
    assert_eq!(first, run(), "identical configs must give identical bytes");
}
