//! Implicit finite-difference solver for the ball problems
//!
//! ```text
//!     ρ(r) ∂ₜu = u_rr + m(r) u_r   on B_R × (0, T],  u = γ on ∂B_R,
//! ```
//!
//! with m = (N−1)f'/f and Δu(0) = N·u''(0) at the pole, plus the
//! exhaustion experiment: solving on balls of doubling radius with u0 ≡ 0
//! and watching whether the time-average v_R = ∫_0^T u dt at a fixed probe
//! radius stabilizes near γT (non-uniqueness: the limit solution with
//! vanishing initial data carries the boundary datum to infinity) or
//! collapses toward 0 (uniqueness).
//!
//! Time stepping is a θ-scheme: a few backward-Euler startup steps to damp
//! the incompatible corner data, Crank–Nicolson afterwards.

use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::geometry::{Density, GeometryError, ModelManifold};
use crate::numerics::{self, NumericsError};
use crate::witness::Supersolution;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("max principle violated: u = {value} at r = {r}, t = {t}")]
    MaxPrincipleViolated { value: f64, r: f64, t: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Witness(#[from] crate::witness::WitnessError),
}

/// One Dirichlet problem on a ball of radius `r_ball`.
pub struct BallProblem {
    pub manifold: Arc<ModelManifold>,
    pub density: Density,
    pub r_ball: f64,
    pub gamma: f64,
    pub u0: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub t_final: f64,
    pub dr: f64,
    pub dt: f64,
    pub startup_steps: usize,
}

impl BallProblem {
    /// The canonical experiment: u0 ≡ 0, boundary datum γ.
    pub fn new(
        manifold: Arc<ModelManifold>,
        density: Density,
        r_ball: f64,
        gamma: f64,
        t_final: f64,
        dr: f64,
        dt: f64,
    ) -> Self {
        assert!(r_ball > 0.0 && gamma >= 0.0 && t_final > 0.0 && dr > 0.0 && dt > 0.0);
        BallProblem {
            manifold,
            density,
            r_ball,
            gamma,
            u0: Box::new(|_| 0.0),
            t_final,
            dr,
            dt,
            startup_steps: 4,
        }
    }

    pub fn with_initial(mut self, u0: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.u0 = Box::new(u0);
        self
    }

    fn nodes(&self) -> usize {
        (self.r_ball / self.dr).round() as usize
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..=self.nodes()).map(|i| i as f64 * self.dr).collect()
    }

    fn drift(&self) -> Result<Vec<f64>, SolverError> {
        let n = self.nodes();
        let mut m = vec![0.0; n + 1];
        for (i, v) in m.iter_mut().enumerate().take(n + 1).skip(1) {
            *v = self.manifold.drift_coefficient(i as f64 * self.dr)?;
        }
        Ok(m)
    }
}

/// The full evolution record of one ball solve.
pub struct FieldTrajectory {
    pub radii: Vec<f64>,
    pub times: Vec<f64>,
    /// One radial slice per entry of `times`.
    pub values: Vec<Vec<f64>>,
    /// v(r_i) = ∫_0^T u(r_i, t) dt, trapezoid over every step.
    pub v: Vec<f64>,
}

fn apply_operator(p: &BallProblem, m: &[f64], u: &[f64]) -> Vec<f64> {
    let n = p.nodes();
    let dr2 = p.dr * p.dr;
    let dim = p.manifold.dim as f64;
    let mut l = vec![0.0; n];
    l[0] = 2.0 * dim * (u[1] - u[0]) / dr2;
    for i in 1..n {
        l[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / dr2
            + m[i] * (u[i + 1] - u[i - 1]) / (2.0 * p.dr);
    }
    l
}

fn theta_step(
    p: &BallProblem,
    m: &[f64],
    state: &[f64],
    w: f64,
) -> Result<Vec<f64>, SolverError> {
    let n = p.nodes();
    let dr2 = p.dr * p.dr;
    let dim = p.manifold.dim as f64;
    let l = apply_operator(p, m, state);

    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];

    let rho0 = p.density.value(0.0);
    diag[0] = 1.0 + w * p.dt * 2.0 * dim / (rho0 * dr2);
    sup[0] = -w * p.dt * 2.0 * dim / (rho0 * dr2);
    rhs[0] = state[0] + (1.0 - w) * p.dt * l[0] / rho0;
    for i in 1..n {
        let rho = p.density.value(i as f64 * p.dr);
        let a = (1.0 / dr2 - m[i] / (2.0 * p.dr)) / rho;
        let b = (1.0 / dr2 + m[i] / (2.0 * p.dr)) / rho;
        sub[i] = -w * p.dt * a;
        diag[i] = 1.0 + w * p.dt * (a + b);
        sup[i] = -w * p.dt * b;
        rhs[i] = state[i] + (1.0 - w) * p.dt * l[i] / rho;
        if i == n - 1 {
            rhs[i] += w * p.dt * b * p.gamma;
            sup[i] = 0.0;
        }
    }

    let mut next = numerics::solve_tridiagonal(&sub[1..], &diag, &sup[..n - 1], &rhs)?;
    next.push(p.gamma);
    Ok(next)
}

/// Advance one time step from time `t`; backward Euler during the startup
/// phase, Crank–Nicolson afterwards.
pub fn step(p: &BallProblem, state: &[f64], t: f64) -> Result<Vec<f64>, SolverError> {
    let m = p.drift()?;
    let w = if t < (p.startup_steps as f64 - 0.5) * p.dt {
        1.0
    } else {
        0.5
    };
    theta_step(p, &m, state, w)
}

/// March the full evolution, recording snapshots at (the nearest steps to)
/// the requested times and the time-average v.
pub fn solve_ball(p: &BallProblem, snapshot_times: &[f64]) -> Result<FieldTrajectory, SolverError> {
    let n = p.nodes();
    let radii = p.radii();
    let m = p.drift()?;
    let peclet = m
        .iter()
        .zip(radii.iter())
        .filter(|(_, &r)| r >= 1.0)
        .map(|(mi, _)| mi.abs() * p.dr)
        .fold(0.0f64, f64::max);
    if peclet > 1.0 {
        eprintln!("warning: drift cell Peclet number {peclet:.2} > 1; consider a finer dr");
    }

    let steps = (p.t_final / p.dt).round() as usize;
    let mut state: Vec<f64> = radii.iter().map(|&r| (p.u0)(r)).collect();
    // Crank–Nicolson is not monotone, so allow a small relative overshoot.
    let lo_raw = state.iter().cloned().fold(0.0f64, f64::min);
    let hi_raw = state.iter().cloned().fold(p.gamma, f64::max);
    let slack = 1e-5 * (hi_raw - lo_raw).abs().max(1.0);
    let lo_bound = lo_raw - slack;
    let hi_bound = hi_raw + slack;

    let mut v = vec![0.0; n + 1];
    let mut snapshots: Vec<(usize, f64)> = snapshot_times
        .iter()
        .map(|&t| (((t / p.dt).round() as usize).min(steps), t))
        .collect();
    snapshots.sort_by_key(|s| s.0);
    let mut times = Vec::new();
    let mut values = Vec::new();
    let record = |k: usize, state: &[f64], times: &mut Vec<f64>, values: &mut Vec<Vec<f64>>| {
        for (sk, _) in snapshots.iter().filter(|(sk, _)| *sk == k) {
            times.push(*sk as f64 * p.dt);
            values.push(state.to_vec());
        }
    };
    record(0, &state, &mut times, &mut values);

    for k in 0..steps {
        let t = k as f64 * p.dt;
        let w = if k < p.startup_steps { 1.0 } else { 0.5 };
        let next = theta_step(p, &m, &state, w)?;
        for (i, acc) in v.iter_mut().enumerate() {
            *acc += 0.5 * p.dt * (state[i] + next[i]);
        }
        for (i, &u) in next.iter().enumerate() {
            if !(lo_bound..=hi_bound).contains(&u) {
                return Err(SolverError::MaxPrincipleViolated {
                    value: u,
                    r: radii[i],
                    t: t + p.dt,
                });
            }
        }
        state = next;
        record(k + 1, &state, &mut times, &mut values);
    }
    // Dirichlet datum integrated exactly at the boundary node.
    v[n] = p.gamma * p.t_final;
    Ok(FieldTrajectory {
        radii,
        times,
        values,
        v,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExhaustionVerdict {
    UniqueConsistent,
    NonUniqueConsistent,
    Undecided,
}

impl std::fmt::Display for ExhaustionVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExhaustionVerdict::UniqueConsistent => "UniqueConsistent",
            ExhaustionVerdict::NonUniqueConsistent => "NonUniqueConsistent",
            ExhaustionVerdict::Undecided => "Undecided",
        })
    }
}

#[derive(Debug, Clone)]
pub struct LevelRecord {
    pub r_ball: f64,
    pub probe_r: f64,
    pub u_probe_at_t: f64,
    pub v_probe: f64,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone)]
pub struct BoundCheck {
    pub h_probe: f64,
    pub lower: f64,
    pub upper: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct ExhaustionReport {
    pub levels: Vec<LevelRecord>,
    pub monotone_ok: bool,
    pub verdict: ExhaustionVerdict,
    pub bound_check: Option<BoundCheck>,
}

/// Default verdict thresholds, reported with the raw level data.
pub const PLATEAU_REL: f64 = 0.05;
pub const PLATEAU_FLOOR: f64 = 0.4;
pub const COLLAPSE_CEIL: f64 = 0.1;
pub const COLLAPSE_RATIO: f64 = 0.7;

/// The verdict cutoffs; a configuration concern, reported with the data.
#[derive(Debug, Clone, Copy)]
pub struct VerdictThresholds {
    pub plateau_rel: f64,
    pub plateau_floor: f64,
    pub collapse_ceil: f64,
    pub collapse_ratio: f64,
}

impl Default for VerdictThresholds {
    fn default() -> Self {
        VerdictThresholds {
            plateau_rel: PLATEAU_REL,
            plateau_floor: PLATEAU_FLOOR,
            collapse_ceil: COLLAPSE_CEIL,
            collapse_ratio: COLLAPSE_RATIO,
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn exhaustion_run(
    manifold: Arc<ModelManifold>,
    density: Density,
    gamma: f64,
    t_final: f64,
    r_schedule: &[f64],
    probe_r: Option<f64>,
    dr: f64,
    dt: f64,
    supersolution: Option<&Supersolution>,
) -> Result<ExhaustionReport, SolverError> {
    exhaustion_run_with_thresholds(
        manifold,
        density,
        gamma,
        t_final,
        r_schedule,
        probe_r,
        dr,
        dt,
        supersolution,
        VerdictThresholds::default(),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn exhaustion_run_with_thresholds(
    manifold: Arc<ModelManifold>,
    density: Density,
    gamma: f64,
    t_final: f64,
    r_schedule: &[f64],
    probe_r: Option<f64>,
    dr: f64,
    dt: f64,
    supersolution: Option<&Supersolution>,
    th: VerdictThresholds,
) -> Result<ExhaustionReport, SolverError> {
    assert!(!r_schedule.is_empty());
    assert!(r_schedule.windows(2).all(|w| w[0] < w[1]));
    let r_min = r_schedule[0];
    let probe = match probe_r {
        Some(r) => {
            assert!(r < r_min, "probe radius must sit inside the smallest ball");
            r
        }
        None => match supersolution {
            // Smallest r with 2γh(r) ≤ γT/2, so the sandwich window around
            // γT is at most γT wide; clamped inside the smallest ball.
            Some(s) if s.finite => {
                let target = t_final / 4.0;
                let mut pick = r_min / 2.0;
                let mut r = r_min / 2.0;
                while r > 1e-3 {
                    if s.h(r)? <= target {
                        pick = r;
                    } else {
                        break;
                    }
                    r *= 0.5;
                }
                // walk upward if even r_min/2 has h too large: stay clamped
                let _ = &mut pick;
                pick
            }
            _ => r_min / 2.0,
        },
    };

    let mut levels = Vec::new();
    for &rj in r_schedule {
        let started = Instant::now();
        let p = BallProblem::new(
            manifold.clone(),
            density.clone(),
            rj,
            gamma,
            t_final,
            dr,
            dt,
        );
        let traj = solve_ball(&p, &[t_final])?;
        let idx = (probe / dr).round() as usize;
        levels.push(LevelRecord {
            r_ball: rj,
            probe_r: traj.radii[idx],
            u_probe_at_t: traj.values.last().unwrap()[idx],
            v_probe: traj.v[idx],
            runtime_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }

    let vs: Vec<f64> = levels.iter().map(|l| l.v_probe).collect();
    let monotone_ok = vs.windows(2).all(|w| w[1] <= w[0] + 1e-6);
    let v_last = *vs.last().unwrap();
    let gt = gamma * t_final;
    let verdict = if vs.len() >= 2 {
        let prev = vs[vs.len() - 2];
        // Plateau change is measured on the γT scale, the same unit as the
        // floor and ceiling cutoffs.
        let plateau = (v_last - prev).abs() < th.plateau_rel * gt.abs().max(1e-300)
            && v_last >= th.plateau_floor * gt;
        let collapse = v_last <= th.collapse_ceil * gt
            && vs
                .windows(2)
                .all(|w| w[1] <= th.collapse_ratio * w[0].max(1e-300));
        if plateau {
            ExhaustionVerdict::NonUniqueConsistent
        } else if collapse {
            ExhaustionVerdict::UniqueConsistent
        } else {
            ExhaustionVerdict::Undecided
        }
    } else {
        ExhaustionVerdict::Undecided
    };

    let bound_check = match supersolution {
        Some(s) if s.finite => {
            let h_probe = s.h(probe)?;
            let lower = gt - 2.0 * gamma * h_probe;
            let upper = gt + 2.0 * gamma * h_probe;
            Some(BoundCheck {
                h_probe,
                lower,
                upper,
                passed: lower <= v_last && v_last <= upper,
            })
        }
        _ => None,
    };

    Ok(ExhaustionReport {
        levels,
        monotone_ok,
        verdict,
        bound_check,
    })
}
