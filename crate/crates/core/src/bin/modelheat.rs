//! Batch front end: classify instances, evaluate integral criteria, build
//! and verify supersolutions, and run exhaustion experiments, all driven by
//! a flat-text config plus `--set` overrides.
//!
//! Exit codes: 0 success, 2 config error, 3 numerical non-result,
//! 4 invariant violation.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use modelheat::config::{parse_config, RunConfig, WeightFamily};
use modelheat::conformal::ConformalChange;
use modelheat::criteria::{
    self, criterion_general, criterion_log, criterion_power, classify, CutoffParams, WeightPsi,
};
use modelheat::geometry::{check_delta_r_condition, log_grid};
use modelheat::numerics::{DivergenceVerdict, VerdictKind};
use modelheat::solver::{
    exhaustion_run_with_thresholds, solve_ball, BallProblem, VerdictThresholds,
};
use modelheat::witness::{build_supersolution_with_tol, verify_supersolution, Supersolution};

#[derive(Parser)]
#[command(name = "modelheat", version, about = "heat equation with density on model manifolds")]
struct Cli {
    /// Config file of `section.key = value` lines; omit for all defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set density.theta=3` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output file for commands that emit CSV.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the uniqueness/non-uniqueness verdict for the configured instance.
    Classify,
    /// Evaluate the applicable integral criteria and print their verdicts.
    Criterion,
    /// Build the decaying supersolution and emit r,h,h1,h2,residual CSV.
    Supersolution,
    /// Run the exhaustion experiment over the R schedule and emit level CSV.
    Exhaust,
    /// Solve a single Dirichlet ball problem and emit the final profile.
    Solve,
    /// Run the invariant suites (geometry, completeness, cutoff, round trip).
    Verify,
}

fn verdict_name(v: &DivergenceVerdict) -> &'static str {
    match v.kind {
        VerdictKind::Divergent => "Divergent",
        VerdictKind::Convergent { .. } => "Convergent",
        VerdictKind::Indeterminate => "Indeterminate",
    }
}

fn write_out(out: Option<&PathBuf>, content: &str) -> Result<(), std::io::Error> {
    match out {
        Some(p) => std::fs::write(p, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides: Vec<(String, String)> = match cli
        .set
        .iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| format!("--set `{kv}`: expected KEY=VALUE"))
        })
        .collect()
    {
        Ok(o) => o,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cfg = match parse_config(cli.config.as_deref(), &overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    let result = match cli.cmd {
        Cmd::Classify => cmd_classify(&cfg),
        Cmd::Criterion => cmd_criterion(&cfg),
        Cmd::Supersolution => cmd_supersolution(&cfg, cli.out.as_ref()),
        Cmd::Exhaust => cmd_exhaust(&cfg, cli.out.as_ref()),
        Cmd::Solve => cmd_solve(&cfg, cli.out.as_ref()),
        Cmd::Verify => cmd_verify(&cfg),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(4)
        }
    }
}

type CmdResult = Result<u8, String>;

fn err_str<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn cmd_classify(cfg: &RunConfig) -> CmdResult {
    let kind = cfg.warping_kind();
    let cls = classify(&kind, cfg.theta);
    println!("family    : {:?}", cfg.family);
    println!("beta      : {}", cfg.beta);
    println!("theta     : {}", cfg.theta);
    println!("verdict   : {}", cls.verdict);
    println!("reason    : {}", cls.reason);

    let change = ConformalChange::new(cfg.manifold(), cfg.density());
    let completeness = change.check_completeness().map_err(err_str)?;
    println!(
        "conformal completeness probe: {} (doublings {})",
        verdict_name(&completeness),
        completeness.doublings_used
    );
    let psi = cfg.weight();
    if cfg.theta < 2.0 {
        let v = criterion_power(&psi, cfg.theta, 1.0).map_err(err_str)?;
        println!("power criterion (θ < 2)     : {}", verdict_name(&v));
    } else if cfg.theta == 2.0 {
        let psi = match cfg.weight_family {
            WeightFamily::LogSquare => psi,
            WeightFamily::Power => WeightPsi::LogSquare {
                gamma: cfg.weight_gamma,
            },
        };
        let v = criterion_log(&psi, 2.0).map_err(err_str)?;
        println!("log criterion (θ = 2)       : {}", verdict_name(&v));
    }
    Ok(0)
}

fn cmd_criterion(cfg: &RunConfig) -> CmdResult {
    let psi = cfg.weight();
    if cfg.theta < 2.0 {
        let v = criterion_power(&psi, cfg.theta, 1.0).map_err(err_str)?;
        println!(
            "power criterion   : {} after {} doublings",
            verdict_name(&v),
            v.doublings_used
        );
    }
    if cfg.theta >= 2.0 || matches!(cfg.weight_family, WeightFamily::LogSquare) {
        let psi = WeightPsi::LogSquare {
            gamma: cfg.weight_gamma,
        };
        let v = criterion_log(&psi, 2.0).map_err(err_str)?;
        println!(
            "log criterion     : {} after {} doublings",
            verdict_name(&v),
            v.doublings_used
        );
    }
    let change = ConformalChange::new(cfg.manifold(), cfg.density());
    match criterion_general(&psi, &change, 1.0) {
        Ok(rep) => println!(
            "general criterion : {} (weight monotone: {})",
            verdict_name(&rep.integral),
            rep.monotone_ok
        ),
        Err(e) => println!("general criterion : not applicable ({e})"),
    }
    Ok(0)
}

fn build_witness(cfg: &RunConfig) -> Result<Supersolution, String> {
    build_supersolution_with_tol(cfg.manifold(), cfg.density(), cfg.quad_tol).map_err(err_str)
}

fn cmd_supersolution(cfg: &RunConfig, out: Option<&PathBuf>) -> CmdResult {
    let s = build_witness(cfg)?;
    if !s.finite {
        println!("no finite supersolution — uniqueness regime expected");
        return Ok(3);
    }
    let r_hi = cfg.r_schedule().last().copied().unwrap_or(32.0);
    let grid = log_grid(0.05, r_hi, 300);
    let mut csv = String::from("r,h,h1,h2,residual\n");
    for &r in &grid {
        let h = s.h(r).map_err(err_str)?;
        let h1 = s.h1(r).map_err(err_str)?;
        let h2 = s.h2(r).map_err(err_str)?;
        let m = s.manifold.drift_coefficient(r).map_err(err_str)?;
        let residual = h2 + m * h1 + s.density.value(r);
        csv.push_str(&format!("{r:.8e},{h:.8e},{h1:.8e},{h2:.8e},{residual:.8e}\n"));
    }
    write_out(out, &csv).map_err(err_str)?;
    let rep = verify_supersolution(&s, &grid, 1e-6).map_err(err_str)?;
    eprintln!(
        "supersolution: worst residual {:.3e} at r = {:.3} (ok: {}), decay check: {}",
        rep.worst_residual, rep.worst_r, rep.ok, rep.limit_ok
    );
    if rep.ok && rep.limit_ok {
        Ok(0)
    } else {
        Ok(4)
    }
}

fn cmd_exhaust(cfg: &RunConfig, out: Option<&PathBuf>) -> CmdResult {
    let witness = build_witness(cfg)?;
    let witness_ref = if witness.finite { Some(&witness) } else { None };
    let th = VerdictThresholds {
        plateau_rel: cfg.plateau_rel,
        plateau_floor: cfg.plateau_floor,
        collapse_ceil: cfg.collapse_ceil,
        collapse_ratio: cfg.collapse_ratio,
    };
    let rep = exhaustion_run_with_thresholds(
        cfg.manifold(),
        cfg.density(),
        cfg.gamma,
        cfg.t_final,
        &cfg.r_schedule(),
        cfg.probe_r,
        cfg.dr,
        cfg.dt,
        witness_ref,
        th,
    )
    .map_err(err_str)?;

    let gt = cfg.gamma * cfg.t_final;
    let mut csv =
        String::from("level,R,probe_r,u_probe_T,v_probe,v_over_gammaT,monotone_ok,runtime_ms\n");
    let mut prev_v = f64::INFINITY;
    for (i, l) in rep.levels.iter().enumerate() {
        let mono = l.v_probe <= prev_v + 1e-6;
        prev_v = l.v_probe;
        csv.push_str(&format!(
            "{},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{},{:.3}\n",
            i + 1,
            l.r_ball,
            l.probe_r,
            l.u_probe_at_t,
            l.v_probe,
            l.v_probe / gt,
            mono,
            l.runtime_ms
        ));
    }
    write_out(out, &csv).map_err(err_str)?;
    eprintln!("verdict: {:?} (levels monotone: {})", rep.verdict, rep.monotone_ok);
    if let Some(bc) = &rep.bound_check {
        eprintln!(
            "sandwich: v_probe ∈ [{:.4}, {:.4}] expected, passed: {}",
            bc.lower, bc.upper, bc.passed
        );
    }
    if !rep.monotone_ok {
        return Ok(4);
    }
    Ok(0)
}

fn cmd_solve(cfg: &RunConfig, out: Option<&PathBuf>) -> CmdResult {
    let p = BallProblem::new(
        cfg.manifold(),
        cfg.density(),
        cfg.r_min,
        cfg.gamma,
        cfg.t_final,
        cfg.dr,
        cfg.dt,
    );
    let traj = solve_ball(&p, &[cfg.t_final]).map_err(err_str)?;
    let last = traj.values.last().unwrap();
    let mut csv = String::from("r,u_T,v\n");
    for (i, &r) in traj.radii.iter().enumerate() {
        csv.push_str(&format!("{r:.8e},{:.8e},{:.8e}\n", last[i], traj.v[i]));
    }
    write_out(out, &csv).map_err(err_str)?;
    eprintln!(
        "solved R = {} with {} nodes to T = {}; v(0) = {:.6}",
        cfg.r_min,
        traj.radii.len(),
        cfg.t_final,
        traj.v[0]
    );
    Ok(0)
}

fn cmd_verify(cfg: &RunConfig) -> CmdResult {
    let manifold = cfg.manifold();
    let density = cfg.density();
    let change = Arc::new(ConformalChange::new(manifold.clone(), density.clone()));
    let grid = log_grid(0.05, 64.0, 200);
    let mut failed = false;

    let drift = check_delta_r_condition(&manifold, &density, &grid).map_err(err_str)?;
    println!(
        "geometry drift bound   : {} (worst margin {:.3e} at r = {:.3})",
        if drift.holds { "pass" } else { "FAIL" },
        drift.worst_margin,
        drift.worst_r
    );
    failed |= !drift.holds;

    // Conformal round trip r → r̃ → r.
    let mut worst = 0.0f64;
    for &r in &[0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0] {
        let rt = change.tilde_radius(r).map_err(err_str)?;
        let back = change.radius_from_tilde(rt).map_err(err_str)?;
        worst = worst.max(((back - r) / r).abs());
    }
    let round_ok = worst <= 1e-8;
    println!(
        "conformal round trip   : {} (worst relative error {:.3e})",
        if round_ok { "pass" } else { "FAIL" },
        worst
    );
    failed |= !round_ok;

    // Assumption on the conformal drift; informational for non-uniqueness
    // scenarios, where it is expected to fail.
    let h_rep = modelheat::conformal::check_assumption_h(&change, &grid).map_err(err_str)?;
    println!(
        "conformal drift checks : delta_ok = {}, omega growth ok = {} (informational)",
        h_rep.delta_ok, h_rep.omega_growth_ok
    );

    // Cutoff inequality with the guaranteed parameter choice.
    let (lambda, delta) = (6.0f64, 0.1f64);
    let params = CutoffParams {
        r: 2.0,
        tau: cfg.t_final.min(1.0),
        delta: delta.min(0.24_f64.min(cfg.t_final / 2.0)),
        lambda,
        alpha: lambda / (1.0 - 4.0 * delta),
    };
    let rt_grid: Vec<f64> = (0..200).map(|i| 6.0 * i as f64 / 199.0).collect();
    let t_grid: Vec<f64> = (0..50)
        .map(|i| params.tau - params.delta + params.delta * (i + 1) as f64 / 50.0)
        .collect();
    let cut = criteria::verify_cutoff_inequality(&change, &params, &rt_grid, &t_grid)
        .map_err(err_str)?;
    println!(
        "cutoff inequality      : {} (worst value {:.3e} at (r̃, t) = ({:.3}, {:.3}))",
        if cut.holds { "pass" } else { "FAIL" },
        cut.worst_value,
        cut.worst_point.0,
        cut.worst_point.1
    );
    failed |= !cut.holds;

    if failed {
        Ok(4)
    } else {
        Ok(0)
    }
}
