//! Shared numerical kernels: adaptive Gauss–Kronrod quadrature,
//! improper-integral divergence probing, bracketed monotone inversion and
//! tridiagonal (Thomas) solves.
//!
//! Everything here is a pure function of its inputs and safe to call
//! concurrently.

use thiserror::Error;

/// Recursion depth cap for the adaptive quadrature.
const MAX_DEPTH: u32 = 50;

/// Accumulated value beyond which a divergence probe declares Divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Number of trailing non-decreasing panels that force a Divergent verdict.
const NONDECREASE_WINDOW: usize = 5;

/// Default geometric decay ratio accepted as evidence of convergence.
///
/// Panels over [R·2^k, R·2^(k+1)] of r^(-q) shrink with ratio 2^(1-q), so
/// 0.92 resolves tails down to q ≈ 1.12 while keeping the borderline q = 1
/// (constant panels) firmly out of reach.
pub const DEFAULT_DECAY_RATIO: f64 = 0.92;

/// Default doubling budget for divergence probes.
pub const DEFAULT_MAX_DOUBLINGS: u32 = 60;

/// Panel count from which the harmonic-domination divergence test engages.
const HARMONIC_WINDOW_START: usize = 15;

/// Default relative tail tolerance for divergence probes.
/// Loose enough that a r^(−1.2) tail certifies within the doubling cap.
pub const DEFAULT_PROBE_TOL: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("integrand returned a non-finite value at r = {at}")]
    NonFinite { at: f64 },
    #[error("adaptive subdivision budget exhausted on [{a}, {b}]")]
    NoConvergence { a: f64, b: f64 },
    #[error("target {y} outside bracket values [{g_lo}, {g_hi}]")]
    BracketInvalid { y: f64, g_lo: f64, g_hi: f64 },
    #[error("vanishing pivot at row {row} of tridiagonal elimination")]
    ZeroPivot { row: usize },
}

/// Outcome of a finite divergence-probing protocol for ∫_{R0}^∞ f.
#[derive(Debug, Clone, PartialEq)]
pub enum VerdictKind {
    Divergent,
    Convergent { tail_estimate: f64 },
    Indeterminate,
}

#[derive(Debug, Clone)]
pub struct DivergenceVerdict {
    pub kind: VerdictKind,
    /// (R_k, accumulated integral up to R_k) per doubling.
    pub partials: Vec<(f64, f64)>,
    pub doublings_used: u32,
}

impl DivergenceVerdict {
    pub fn is_divergent(&self) -> bool {
        matches!(self.kind, VerdictKind::Divergent)
    }
    pub fn is_convergent(&self) -> bool {
        matches!(self.kind, VerdictKind::Convergent { .. })
    }
}

// 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// One Gauss–Kronrod 7/15 panel; returns (kronrod value, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64), NumericsError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| -> Result<f64, NumericsError> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(NumericsError::NonFinite { at: x })
        }
    };

    let fc = eval(center)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (i, &xi) in XGK.iter().take(7).enumerate() {
        let x = half * xi;
        let flo = eval(center - x)?;
        let fhi = eval(center + x)?;
        kronrod += WGK[i] * (flo + fhi);
        if i % 2 == 1 {
            gauss += WG[i / 2] * (flo + fhi);
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    Ok((value, err))
}

fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    depth: u32,
) -> Result<(f64, f64), NumericsError> {
    let (value, err) = gk15(f, a, b)?;
    // The 1e-14·|value| floor stops subdivision once the estimate is at
    // machine precision; below that, halving the panel no longer helps.
    if err <= tol.max(1e-14 * value.abs()) || b - a < 1e-14 * (a.abs() + b.abs() + 1.0) {
        return Ok((value, err));
    }
    if depth >= MAX_DEPTH {
        return Err(NumericsError::NoConvergence { a, b });
    }
    let mid = 0.5 * (a + b);
    let (v1, e1) = adaptive(f, a, mid, 0.5 * tol, depth + 1)?;
    let (v2, e2) = adaptive(f, mid, b, 0.5 * tol, depth + 1)?;
    Ok((v1 + v2, e1 + e2))
}

/// Adaptive quadrature of `f` over [a, b] with absolute tolerance `tol`.
///
/// Returns the integral value together with an error estimate.
pub fn integrate<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<(f64, f64), NumericsError> {
    assert!(a <= b, "integrate: a must not exceed b");
    assert!(tol > 0.0, "integrate: tol must be positive");
    if a == b {
        return Ok((0.0, 0.0));
    }
    adaptive(f, a, b, tol, 0)
}

/// Decide whether ∫_{R0}^∞ f diverges for a nonnegative integrand.
///
/// Panel integrals over [R0·2^k, R0·2^(k+1)] are accumulated for
/// k = 0..max_doublings. The verdict is Divergent when the running total
/// exceeds [`DIVERGENCE_THRESHOLD`] or the last few panels fail to decrease;
/// Convergent when panels shrink geometrically (successive ratio at most
/// `decay_ratio`) and the geometric tail bound drops below `tol` times the
/// accumulated value; Indeterminate otherwise.
pub fn probe_divergence<F: Fn(f64) -> f64>(
    f: &F,
    r0: f64,
    max_doublings: u32,
    decay_ratio: f64,
    tol: f64,
) -> Result<DivergenceVerdict, NumericsError> {
    assert!(r0 > 0.0, "probe_divergence: R0 must be positive");
    assert!(
        decay_ratio > 0.0 && decay_ratio < 1.0,
        "probe_divergence: decay_ratio must lie in (0, 1)"
    );

    let mut partials = Vec::new();
    let mut acc = 0.0f64;
    let mut panels: Vec<f64> = Vec::new();
    let mut lo = r0;

    for k in 0..max_doublings {
        let hi = lo * 2.0;
        let panel_tol = 1e-10 * acc.abs().max(1.0);
        let (panel, _) = integrate(f, lo, hi, panel_tol)?;
        acc += panel;
        panels.push(panel);
        partials.push((hi, acc));

        if acc > DIVERGENCE_THRESHOLD {
            return Ok(DivergenceVerdict {
                kind: VerdictKind::Divergent,
                partials,
                doublings_used: k + 1,
            });
        }

        // Panels that stopped decreasing signal a divergent tail.
        if panels.len() > NONDECREASE_WINDOW {
            let tail = &panels[panels.len() - NONDECREASE_WINDOW - 1..];
            let nondecreasing = tail
                .windows(2)
                .all(|w| w[1] >= w[0] * (1.0 - 1e-9) && w[0] > 0.0);
            if nondecreasing {
                return Ok(DivergenceVerdict {
                    kind: VerdictKind::Divergent,
                    partials,
                    doublings_used: k + 1,
                });
            }
        }

        // Harmonic domination: if every recent ratio panel_{j+1}/panel_j
        // beats (j+1)/(j+2), the panels decay no faster than Σ 1/j, whose
        // doubled-panel sum diverges. Panels like log-integrals 1/(r·log r)
        // shrink yet diverge, and only this comparison catches them. The
        // late start keeps cleanly geometric tails (ratio ≤ 14/15) out.
        if panels.len() >= HARMONIC_WINDOW_START {
            let base = panels.len() - NONDECREASE_WINDOW - 1;
            let tail = &panels[base..];
            let dominated = tail.windows(2).enumerate().all(|(i, w)| {
                let j = (base + i) as f64;
                w[0] > 0.0 && w[1] >= w[0] * ((j + 1.0) / (j + 2.0)) * (1.0 - 1e-9)
            });
            if dominated {
                return Ok(DivergenceVerdict {
                    kind: VerdictKind::Divergent,
                    partials,
                    doublings_used: k + 1,
                });
            }
        }

        // Geometric decay over the recent window allows a tail bound.
        if panels.len() >= 4 && acc > 0.0 {
            let recent = &panels[panels.len() - 3..];
            let prev = &panels[panels.len() - 4..panels.len() - 1];
            let mut worst = 0.0f64;
            let mut ok = true;
            for (p, q) in prev.iter().zip(recent.iter()) {
                if *p <= 0.0 {
                    // Identically-zero tail: already converged.
                    continue;
                }
                let ratio = q / p;
                if ratio > decay_ratio {
                    ok = false;
                    break;
                }
                worst = worst.max(ratio);
            }
            if ok {
                let last = *panels.last().unwrap();
                let tail = if worst > 0.0 {
                    last * worst / (1.0 - worst)
                } else {
                    0.0
                };
                if tail < tol * acc {
                    return Ok(DivergenceVerdict {
                        kind: VerdictKind::Convergent {
                            tail_estimate: tail,
                        },
                        partials,
                        doublings_used: k + 1,
                    });
                }
            }
        }

        lo = hi;
    }

    Ok(DivergenceVerdict {
        kind: VerdictKind::Indeterminate,
        partials,
        doublings_used: max_doublings,
    })
}

/// Probe with the default protocol parameters.
pub fn probe_divergence_default<F: Fn(f64) -> f64>(
    f: &F,
    r0: f64,
) -> Result<DivergenceVerdict, NumericsError> {
    probe_divergence(
        f,
        r0,
        DEFAULT_MAX_DOUBLINGS,
        DEFAULT_DECAY_RATIO,
        DEFAULT_PROBE_TOL,
    )
}

/// Solve g(r) = y for a strictly increasing g via bracketed bisection with
/// secant acceleration. Deterministic; the result satisfies |g(r) − y| ≤ tol.
pub fn invert_monotone<F: Fn(f64) -> f64>(
    g: &F,
    y: f64,
    bracket: (f64, f64),
    tol: f64,
) -> Result<f64, NumericsError> {
    let (mut lo, mut hi) = bracket;
    let mut g_lo = g(lo);
    let mut g_hi = g(hi);
    if y < g_lo - tol || y > g_hi + tol {
        return Err(NumericsError::BracketInvalid { y, g_lo, g_hi });
    }
    if (g_lo - y).abs() <= tol {
        return Ok(lo);
    }
    if (g_hi - y).abs() <= tol {
        return Ok(hi);
    }
    for _ in 0..200 {
        // Secant proposal, clipped into the bracket interior.
        let mut mid = if g_hi > g_lo {
            lo + (hi - lo) * (y - g_lo) / (g_hi - g_lo)
        } else {
            0.5 * (lo + hi)
        };
        let guard = 0.01 * (hi - lo);
        if !(mid > lo + guard && mid < hi - guard) {
            mid = 0.5 * (lo + hi);
        }
        let g_mid = g(mid);
        if (g_mid - y).abs() <= tol {
            return Ok(mid);
        }
        if g_mid < y {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
            g_hi = g_mid;
        }
        if hi - lo < 1e-15 * (lo.abs() + hi.abs() + 1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Thomas forward/backward sweep for a tridiagonal system.
///
/// `sub` and `sup` have length n−1, `diag` and `rhs` length n.
pub fn solve_tridiagonal(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>, NumericsError> {
    let n = diag.len();
    assert!(n >= 1, "solve_tridiagonal: empty system");
    assert_eq!(sub.len(), n - 1);
    assert_eq!(sup.len(), n - 1);
    assert_eq!(rhs.len(), n);

    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    if diag[0] == 0.0 {
        return Err(NumericsError::ZeroPivot { row: 0 });
    }
    c[0] = if n > 1 { sup[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let pivot = diag[i] - sub[i - 1] * c[i - 1];
        if pivot == 0.0 {
            return Err(NumericsError::ZeroPivot { row: i });
        }
        if i < n - 1 {
            c[i] = sup[i] / pivot;
        }
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrate_constant() {
        let (v, _) = integrate(&|_| 1.0, 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn integrate_log_antiderivative() {
        let (v, _) = integrate(&|r| 1.0 / r, 1.0, std::f64::consts::E, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn integrate_arctan_oracle() {
        let (v, _) = integrate(&|s| 1.0 / (1.0 + s * s), 0.0, 10.0, 1e-12).unwrap();
        assert!((v - 10.0f64.atan()).abs() < 1e-10);
    }

    #[test]
    fn integrate_rejects_non_finite() {
        let err = integrate(&|r| 1.0 / (r - 0.5), 0.4, 0.6, 1e-10);
        assert!(err.is_err());
    }

    #[test]
    fn probe_harmonic_tail_diverges() {
        let v = probe_divergence_default(&|r| 1.0 / r, 1.0).unwrap();
        assert!(v.is_divergent(), "got {:?}", v.kind);
        // Panels of 1/r are each exactly ln 2.
        let first = v.partials[0].1;
        assert!((first - std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn probe_p_integral_converges() {
        let v = probe_divergence_default(&|r| 1.0 / (r * r), 1.0).unwrap();
        match v.kind {
            VerdictKind::Convergent { tail_estimate } => assert!(tail_estimate <= 1.0),
            other => panic!("expected Convergent, got {other:?}"),
        }
    }

    #[test]
    fn probe_log_over_r_diverges() {
        // Closed form: ∫ log r / r = ½ log² r, so panel sums grow linearly in k.
        let v = probe_divergence_default(&|r| r.ln() / r, 2.0).unwrap();
        assert!(v.is_divergent());
    }

    #[test]
    fn probe_power_lattice() {
        for q in [0.5, 0.8, 1.0] {
            let v = probe_divergence_default(&|r: f64| r.powf(-q), 1.0).unwrap();
            assert!(v.is_divergent(), "q = {q} should diverge, got {:?}", v.kind);
        }
        for q in [1.2, 2.0, 3.0] {
            let v = probe_divergence_default(&|r: f64| r.powf(-q), 1.0).unwrap();
            assert!(v.is_convergent(), "q = {q} should converge, got {:?}", v.kind);
        }
    }

    #[test]
    fn probe_partials_nondecreasing() {
        let v = probe_divergence_default(&|r: f64| r.powf(-1.5), 1.0).unwrap();
        for w in v.partials.windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn invert_identity_and_square() {
        let r = invert_monotone(&|r| r, 3.5, (0.0, 10.0), 1e-12).unwrap();
        assert!((r - 3.5).abs() < 1e-10);
        let r = invert_monotone(&|r| r * r, 4.0, (0.0, 10.0), 1e-12).unwrap();
        assert!((r - 2.0).abs() < 1e-9);
    }

    #[test]
    fn invert_asinh_oracle() {
        let r = invert_monotone(&|r: f64| r.asinh(), 1.0, (0.0, 10.0), 1e-12).unwrap();
        assert!((r - 1.0f64.sinh()).abs() < 1e-9);
    }

    #[test]
    fn invert_rejects_bad_bracket() {
        assert!(invert_monotone(&|r| r, 20.0, (0.0, 10.0), 1e-12).is_err());
    }

    #[test]
    fn tridiagonal_identity() {
        let x = solve_tridiagonal(&[0.0, 0.0], &[1.0, 1.0, 1.0], &[0.0, 0.0], &[1.0, 2.0, 3.0])
            .unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn tridiagonal_two_by_two() {
        // [2 1; 1 2] x = (3, 3) has solution (1, 1).
        let x = solve_tridiagonal(&[1.0], &[2.0, 2.0], &[1.0], &[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tridiagonal_large_dd_residual() {
        // Deterministic pseudo-random diagonally dominant 100×100 system;
        // verify by multiplying back.
        let n = 100;
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 1000) as f64 / 1000.0 - 0.5
        };
        let sub: Vec<f64> = (0..n - 1).map(|_| next()).collect();
        let sup: Vec<f64> = (0..n - 1).map(|_| next()).collect();
        let diag: Vec<f64> = (0..n).map(|_| 3.0 + next()).collect();
        let rhs: Vec<f64> = (0..n).map(|_| next() * 10.0).collect();
        let x = solve_tridiagonal(&sub, &diag, &sup, &rhs).unwrap();
        let norm_rhs = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        for i in 0..n {
            let mut ax = diag[i] * x[i];
            if i > 0 {
                ax += sub[i - 1] * x[i - 1];
            }
            if i < n - 1 {
                ax += sup[i] * x[i + 1];
            }
            assert!((ax - rhs[i]).abs() <= 1e-12 * norm_rhs.max(1.0));
        }
    }

    #[test]
    fn tridiagonal_zero_pivot_detected() {
        assert!(solve_tridiagonal(&[1.0], &[0.0, 1.0], &[1.0], &[1.0, 1.0]).is_err());
    }
}
