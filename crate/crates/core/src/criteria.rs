//! Integral uniqueness criteria, the comparison weight φ, the analytic
//! dichotomy classifier, weighted-norm membership, and the parabolic
//! cutoff inequality.
//!
//! For ρ(r) = c(1+r²)^{−θ/2} the operative conditions are
//!
//! ```text
//!     ∫ r^{1−θ}/ψ(r) dr = ∞          (θ < 2)
//!     ∫ log r/(r ψ(r)) dr = ∞        (θ = 2)
//!     ∫ r̃(r)·√ρ(r)/(ψ(r)+log ρ(r)) dr = ∞   (general radial form)
//! ```
//!
//! together with the monotonicity ψ' + ρ'/ρ ≥ 0. When they hold, the
//! weight φ(r̃) = ψ(r(r̃)) + log ρ(r(r̃)) (held constant below its switch
//! radius) satisfies ∫ r̃/φ(r̃) dr̃ = ∞, which drives the uniqueness
//! argument; when they fail, explicit supersolutions provide
//! non-uniqueness witnesses.

use std::sync::Arc;

use thiserror::Error;

use crate::conformal::{ConformalChange, ConformalError};
use crate::geometry::{log_grid, ModelManifold, RadialProfile, WarpingKind};
use crate::numerics::{self, DivergenceVerdict, NumericsError};
use crate::solver::FieldTrajectory;

#[derive(Debug, Error)]
pub enum CriteriaError {
    #[error("psi + log rho is negative at r = {at}; first nonnegative at r = {needed}")]
    SwitchRadiusNotReached { at: f64, needed: f64 },
    #[error("no switch radius with psi + log rho >= 0 below r = {limit}")]
    R2NotFound { limit: f64 },
    #[error("comparison weight not nondecreasing near r tilde = {at}")]
    PhiNotMonotone { at: f64 },
    #[error("{0}")]
    ParamViolation(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Conformal(#[from] ConformalError),
}

/// The increasing weight ψ entering the uniqueness criteria.
#[derive(Clone)]
pub enum WeightPsi {
    /// ψ(r) = r^exponent; the criteria pair it with exponent = 2−θ.
    PowerWeight { exponent: f64 },
    /// ψ(r) = γ·log²r (= log²(r^√γ)), γ > 1.
    LogSquare { gamma: f64 },
    Custom(Arc<dyn RadialProfile>),
}

impl WeightPsi {
    /// The power weight matched to a density exponent θ < 2.
    pub fn for_theta(theta: f64) -> Self {
        WeightPsi::PowerWeight {
            exponent: 2.0 - theta,
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        match self {
            WeightPsi::PowerWeight { exponent } => r.powf(*exponent),
            WeightPsi::LogSquare { gamma } => {
                let l = r.ln();
                gamma * l * l
            }
            WeightPsi::Custom(p) => p.value(r),
        }
    }

    pub fn d1(&self, r: f64) -> f64 {
        match self {
            WeightPsi::PowerWeight { exponent } => exponent * r.powf(exponent - 1.0),
            WeightPsi::LogSquare { gamma } => 2.0 * gamma * r.ln() / r,
            WeightPsi::Custom(p) => p.d1(r),
        }
    }
}

/// ∫_{R0}^∞ r^{1−θ}/ψ(r) dr, the θ < 2 criterion.
pub fn criterion_power(
    psi: &WeightPsi,
    theta: f64,
    r0: f64,
) -> Result<DivergenceVerdict, CriteriaError> {
    assert!((0.0..2.0).contains(&theta), "criterion_power needs θ ∈ [0,2)");
    assert!(r0 > 0.0);
    Ok(numerics::probe_divergence_default(
        &|r: f64| r.powf(1.0 - theta) / psi.value(r),
        r0,
    )?)
}

/// ∫_{R0}^∞ log r/(r ψ(r)) dr, the θ = 2 criterion.
///
/// Log-family tails converge so slowly that the default certificate can
/// never fire inside the doubling budget; this probe runs with a looser
/// ratio/tail pair tuned to integrands like 1/(r log²r).
pub fn criterion_log(psi: &WeightPsi, r0: f64) -> Result<DivergenceVerdict, CriteriaError> {
    assert!(r0 > 1.0, "criterion_log needs R0 > 1");
    Ok(numerics::probe_divergence(
        &|r: f64| r.ln() / (r * psi.value(r)),
        r0,
        numerics::DEFAULT_MAX_DOUBLINGS,
        0.97,
        0.05,
    )?)
}

#[derive(Debug)]
pub struct GeneralCriterionReport {
    pub integral: DivergenceVerdict,
    /// ψ' + ρ'/ρ ≥ 0 sampled on a logarithmic grid.
    pub monotone_ok: bool,
}

/// The general radial criterion ∫ r̃(r)·√ρ(r)/(ψ(r)+log ρ(r)) dr plus the
/// monotonicity condition ψ' + ρ'/ρ ≥ 0.
pub fn criterion_general(
    psi: &WeightPsi,
    c: &ConformalChange,
    r0: f64,
) -> Result<GeneralCriterionReport, CriteriaError> {
    assert!(r0 > 0.0);
    let denom = |r: f64| psi.value(r) + c.density.log_value(r);
    if denom(r0) < 0.0 {
        let needed = find_switch_radius(psi, c, r0)?;
        return Err(CriteriaError::SwitchRadiusNotReached { at: r0, needed });
    }
    let integrand = |r: f64| {
        let t = c.tilde_radius(r).unwrap_or(f64::NAN);
        t * c.density.sqrt_value(r) / denom(r)
    };
    let integral = numerics::probe_divergence_default(&integrand, r0)?;
    let monotone_ok = log_grid(r0, 1e4, 400)
        .iter()
        .all(|&r| psi.d1(r) + c.density.log_deriv(r) >= -1e-12);
    Ok(GeneralCriterionReport {
        integral,
        monotone_ok,
    })
}

fn refine_crossing<G: Fn(f64) -> f64>(g: &G, mut lo: f64, mut hi: f64) -> f64 {
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Smallest r ≥ R0 with ψ(r) + log ρ(r) ≥ 0: unit-step scan to 1e4, then
/// geometric extension to 1e6, refined by bisection.
fn find_switch_radius(
    psi: &WeightPsi,
    c: &ConformalChange,
    r0: f64,
) -> Result<f64, CriteriaError> {
    let g = |r: f64| psi.value(r) + c.density.log_value(r);
    if g(r0) >= 0.0 {
        return Ok(r0);
    }
    let mut prev = r0;
    let mut r = r0 + 1.0;
    while r <= 1e4 {
        if g(r) >= 0.0 {
            return Ok(refine_crossing(&g, prev, r));
        }
        prev = r;
        r += 1.0;
    }
    let mut b = 2e4;
    while b <= 1e6 {
        if g(b) >= 0.0 {
            return Ok(refine_crossing(&g, prev, b));
        }
        prev = b;
        b *= 2.0;
    }
    Err(CriteriaError::R2NotFound { limit: 1e6 })
}

enum PhiBacking {
    Conformal {
        c: Arc<ConformalChange>,
        psi: WeightPsi,
        floor: f64,
    },
    Fn(Box<dyn Fn(f64) -> f64 + Send + Sync>),
}

/// The comparison weight φ as a function of the conformal distance r̃:
/// constant up to the switch radius, ψ(r(r̃)) + log ρ(r(r̃)) beyond it.
pub struct PhiFunction {
    pub r0: f64,
    /// Switch radius in the original radial variable.
    pub r2: f64,
    /// Conformal distance of the switch radius.
    pub tilde_r2: f64,
    backing: PhiBacking,
}

impl PhiFunction {
    /// Wrap an arbitrary function of r̃ (testing and ad-hoc weights).
    pub fn from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        PhiFunction {
            r0: 0.0,
            r2: 0.0,
            tilde_r2: 0.0,
            backing: PhiBacking::Fn(Box::new(f)),
        }
    }

    pub fn eval(&self, tilde: f64) -> f64 {
        match &self.backing {
            PhiBacking::Fn(f) => f(tilde),
            PhiBacking::Conformal { c, psi, floor } => {
                if tilde <= self.tilde_r2 {
                    *floor
                } else {
                    match c.radius_from_tilde(tilde) {
                        Ok(r) => psi.value(r) + c.density.log_value(r),
                        Err(_) => f64::NAN,
                    }
                }
            }
        }
    }
}

/// Assemble φ for a given weight and conformal change; the construction
/// asserts nonnegativity and monotonicity on a 1000-point sample.
pub fn build_phi(
    psi: &WeightPsi,
    c: Arc<ConformalChange>,
    r0: f64,
) -> Result<PhiFunction, CriteriaError> {
    let r2 = find_switch_radius(psi, &c, r0)?;
    let tilde_r2 = c.tilde_radius(r2)?;
    let floor = (psi.value(r2) + c.density.log_value(r2)).max(0.0);
    let phi = PhiFunction {
        r0,
        r2,
        tilde_r2,
        backing: PhiBacking::Conformal {
            c: c.clone(),
            psi: psi.clone(),
            floor,
        },
    };
    let hi = c.tilde_radius(c.r_max.min(1e4))?;
    let mut prev = -f64::INFINITY;
    for i in 0..1000 {
        let t = hi * i as f64 / 999.0;
        let v = phi.eval(t);
        if v.is_nan() || v < -1e-12 || v < prev - 1e-9 * prev.abs().max(1.0) {
            return Err(CriteriaError::PhiNotMonotone { at: t });
        }
        prev = v;
    }
    Ok(phi)
}

/// ∫_{R0}^∞ r̃/φ(r̃) dr̃ — the condition the iteration argument feeds on.
/// Probing starts past the switch distance, where φ is strictly positive.
pub fn check_phi_condition(
    phi: &PhiFunction,
    r0: f64,
) -> Result<DivergenceVerdict, CriteriaError> {
    let start = r0.max(phi.tilde_r2 + 0.5);
    Ok(numerics::probe_divergence_default(
        &|t: f64| t / phi.eval(t),
        start,
    )?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Unique,
    NonUnique,
    Indeterminate,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::Unique => "Unique",
            Verdict::NonUnique => "NonUnique",
            Verdict::Indeterminate => "Indeterminate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct Classification {
    pub verdict: Verdict,
    pub reason: String,
}

/// The analytic dichotomy for the two scenario families:
///
/// - exponential growth (exponent β): Unique for θ ∈ [0, 2−β),
///   NonUnique for θ > 2−β, open exactly at θ = 2−β;
/// - polynomial growth: Unique for θ ∈ [0, 2], NonUnique for θ > 2.
///
/// θ = 0 (no density) is Unique for every admissible β: the volume growth
/// test for conservativeness covers exp(r^β) up to β = 2, so the β = 2
/// boundary point θ = 2−β = 0 is not left open.
pub fn classify(kind: &WarpingKind, theta: f64) -> Classification {
    assert!(theta >= 0.0, "classify needs θ ≥ 0");
    match kind {
        // Euclidean space is the β=1 polynomial profile; the hyperbolic
        // profile grows like e^{√c·r}, i.e. exponentially with exponent 1.
        WarpingKind::Euclidean => classify(
            &WarpingKind::PolynomialGrowth { beta: 1.0, dim: 2 },
            theta,
        ),
        WarpingKind::Hyperbolic { .. } => classify(
            &WarpingKind::ExponentialGrowth { beta: 1.0, dim: 2 },
            theta,
        ),
        WarpingKind::ExponentialGrowth { beta, .. } => {
            let boundary = 2.0 - beta;
            if theta == 0.0 {
                Classification {
                    verdict: Verdict::Unique,
                    reason: format!(
                        "no density; volume growth exp(r^{beta}) with β ≤ 2 is conservative"
                    ),
                }
            } else if theta < boundary {
                Classification {
                    verdict: Verdict::Unique,
                    reason: format!("θ = {theta} < 2 − β = {boundary}"),
                }
            } else if theta > boundary {
                Classification {
                    verdict: Verdict::NonUnique,
                    reason: format!("θ = {theta} > 2 − β = {boundary}"),
                }
            } else {
                Classification {
                    verdict: Verdict::Indeterminate,
                    reason: format!("θ = 2 − β = {boundary} is not covered by either branch"),
                }
            }
        }
        WarpingKind::PolynomialGrowth { .. } => {
            if theta <= 2.0 {
                Classification {
                    verdict: Verdict::Unique,
                    reason: format!("θ = {theta} ≤ 2 (log-weight criterion at θ = 2)"),
                }
            } else {
                Classification {
                    verdict: Verdict::NonUnique,
                    reason: format!("θ = {theta} > 2"),
                }
            }
        }
        _ => Classification {
            verdict: Verdict::Indeterminate,
            reason: "dichotomy table covers exponential and polynomial growth only".into(),
        },
    }
}

/// ∥u∥ in the e^{−ψ}dμ dt norm, truncated at R_trunc:
/// c_N ∫_0^T ∫_0^{R} |u|^p e^{−ψ(r)} f(r)^{N−1} dr dt (trapezoid in both).
pub fn weighted_norm(
    u: &FieldTrajectory,
    psi: &WeightPsi,
    p: f64,
    m: &ModelManifold,
    r_trunc: f64,
) -> f64 {
    assert!(p >= 1.0);
    let n = u.radii.iter().take_while(|&&r| r <= r_trunc + 1e-12).count();
    if n < 2 || u.times.len() < 2 {
        return 0.0;
    }
    let radii = &u.radii[..n];
    let nm1 = (m.dim - 1) as i32;
    let density: Vec<f64> = radii
        .iter()
        .map(|&r| (-psi.value(r)).exp() * m.f.value(r).powi(nm1))
        .collect();
    let slice_integral = |slice: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n - 1 {
            let a = slice[i].abs().powf(p) * density[i];
            let b = slice[i + 1].abs().powf(p) * density[i + 1];
            s += 0.5 * (a + b) * (radii[i + 1] - radii[i]);
        }
        s
    };
    let per_time: Vec<f64> = u.values.iter().map(|s| slice_integral(s)).collect();
    let mut total = 0.0;
    for i in 0..per_time.len() - 1 {
        total += 0.5 * (per_time[i] + per_time[i + 1]) * (u.times[i + 1] - u.times[i]);
    }
    m.sphere_area * total
}

/// Parameters of the cutoff ξ(x, t) = −[r̃−R]₊²/(2α(τ+δ−t)).
#[derive(Debug, Clone, Copy)]
pub struct CutoffParams {
    pub r: f64,
    pub tau: f64,
    pub delta: f64,
    pub lambda: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct CutoffReport {
    pub holds: bool,
    pub worst_value: f64,
    pub worst_point: (f64, f64),
}

/// Evaluate ∂ₜξ + (λ/2)|∇ξ|² + Δ_ωξ on the conformal manifold over the
/// sample grid; the inequality ≤ 0 is what the energy estimate needs, and
/// it is guaranteed when α ≥ λ/(1−4δ). All derivatives are analytic:
///
/// ```text
///     ∂ₜξ = −s²/(2αT²),  ξ_r = −s/(αT),  ξ_rr = −1/(αT)  (s = [r̃−R]₊)
///     Δ_ωξ = ξ_rr + (Δ̃r̃ − ω'(r)/√ρ)·ξ_r,  T = τ+δ−t.
/// ```
pub fn verify_cutoff_inequality(
    c: &ConformalChange,
    params: &CutoffParams,
    r_tilde_grid: &[f64],
    t_grid: &[f64],
) -> Result<CutoffReport, CriteriaError> {
    let CutoffParams {
        r: big_r,
        tau,
        delta,
        lambda,
        alpha,
    } = *params;
    if !(delta > 0.0 && delta < 0.25 && delta < tau) {
        return Err(CriteriaError::ParamViolation(format!(
            "δ = {delta} must lie in (0, min{{τ = {tau}, 1/4}})"
        )));
    }
    let mut worst = f64::NEG_INFINITY;
    let mut worst_point = (f64::NAN, f64::NAN);
    for &rt in r_tilde_grid {
        let s = (rt - big_r).max(0.0);
        let drift = if s > 0.0 {
            let r = c.radius_from_tilde(rt)?;
            c.tilde_laplacian_of_tilde_r(r)? - c.omega_d1(r) / c.density.sqrt_value(r)
        } else {
            0.0
        };
        for &t in t_grid {
            if t <= tau - delta || t > tau {
                continue;
            }
            let horizon = tau + delta - t;
            let e = if s == 0.0 {
                0.0
            } else {
                let xi_t = -s * s / (2.0 * alpha * horizon * horizon);
                let xi_r = -s / (alpha * horizon);
                let xi_rr = -1.0 / (alpha * horizon);
                xi_t + 0.5 * lambda * xi_r * xi_r + xi_rr + drift * xi_r
            };
            if e > worst {
                worst = e;
                worst_point = (rt, t);
            }
        }
    }
    Ok(CutoffReport {
        holds: worst <= 1e-9,
        worst_value: worst,
        worst_point,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Density, FnProfile, WarpingFamily};

    fn euclid3() -> Arc<ModelManifold> {
        Arc::new(ModelManifold::new(
            3,
            &WarpingFamily::new(WarpingKind::Euclidean),
        ))
    }

    fn change(theta: f64) -> Arc<ConformalChange> {
        Arc::new(ConformalChange::new(euclid3(), Density::power(1.0, theta)))
    }

    fn custom(
        v: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> WeightPsi {
        WeightPsi::Custom(Arc::new(FnProfile {
            value: v,
            d1,
            d2: |_: f64| 0.0,
        }))
    }

    #[test]
    fn psi_shapes() {
        let p = WeightPsi::for_theta(0.5);
        assert!((p.value(4.0) - 4.0f64.powf(1.5)).abs() < 1e-12);
        assert!((p.d1(4.0) - 1.5 * 2.0).abs() < 1e-12);
        let l = WeightPsi::LogSquare { gamma: 4.0 };
        assert!((l.value(std::f64::consts::E) - 4.0).abs() < 1e-12);
        // positive and increasing past r = 1
        let grid = log_grid(1.001, 1e4, 200);
        for w in grid.windows(2) {
            assert!(l.value(w[0]) < l.value(w[1]));
            assert!(l.value(w[1]) > 0.0);
        }
    }

    #[test]
    fn power_criterion_examples() {
        let v = criterion_power(&WeightPsi::for_theta(1.0), 1.0, 1.0).unwrap();
        assert!(v.is_divergent());
        let psi = custom(|r| r.powf(1.5), |r| 1.5 * r.powf(0.5));
        let v = criterion_power(&psi, 1.0, 1.0).unwrap();
        assert!(v.is_convergent(), "{:?}", v.kind);
        let psi = WeightPsi::PowerWeight { exponent: 2.0 };
        assert!(criterion_power(&psi, 0.0, 1.0).unwrap().is_divergent());
    }

    #[test]
    fn log_criterion_examples() {
        let v = criterion_log(&WeightPsi::LogSquare { gamma: 2.0 }, 2.0).unwrap();
        assert!(v.is_divergent(), "{:?}", v.kind);
        let cube = custom(|r: f64| r.ln().powi(3), |r: f64| 3.0 * r.ln().powi(2) / r);
        let v = criterion_log(&cube, 2.0).unwrap();
        assert!(v.is_convergent(), "{:?}", v.kind);
        let lin = custom(|r: f64| r.ln(), |r: f64| 1.0 / r);
        assert!(criterion_log(&lin, 2.0).unwrap().is_divergent());
    }

    #[test]
    fn general_criterion_examples() {
        let c = change(1.0);
        let rep = criterion_general(&WeightPsi::for_theta(1.0), &c, 1.0).unwrap();
        assert!(rep.integral.is_divergent());
        assert!(rep.monotone_ok);
        // matches the power-shape criterion verdict
        assert!(criterion_power(&WeightPsi::for_theta(1.0), 1.0, 1.0)
            .unwrap()
            .is_divergent());

        let c0 = change(0.0);
        let rep = criterion_general(&WeightPsi::PowerWeight { exponent: 2.0 }, &c0, 1.0).unwrap();
        assert!(rep.integral.is_divergent());

        let slow = custom(|r: f64| (1.0 + r).ln(), |r: f64| 1.0 / (1.0 + r));
        let rep = criterion_general(&slow, &c, 2.0).unwrap();
        assert!(!rep.monotone_ok);
    }

    #[test]
    fn phi_identity_density() {
        let phi = build_phi(&WeightPsi::PowerWeight { exponent: 2.0 }, change(0.0), 0.5).unwrap();
        for &t in &[1.0, 2.5, 7.0] {
            assert!((phi.eval(t) - t * t).abs() < 1e-6 * t * t, "t = {t}");
        }
        assert!((phi.r2 - 0.5).abs() < 1e-9);
    }

    #[test]
    fn phi_log_square_composition() {
        let c = change(2.0);
        let phi = build_phi(&WeightPsi::LogSquare { gamma: 4.0 }, c, 1.2).unwrap();
        // beyond the switch, φ(r̃) = 4 log²(sinh r̃) − log(1 + sinh²r̃)
        let rt: f64 = 3.0;
        let r = rt.sinh();
        let expect = 4.0 * r.ln().powi(2) - (1.0 + r * r).ln();
        assert!((phi.eval(rt) - expect).abs() < 1e-6, "{}", phi.eval(rt));
        assert!(phi.r2 > 1.2 && phi.r2 < 2.2);
    }

    #[test]
    fn phi_nonnegative_and_monotone_sampled() {
        for theta in [0.0, 1.0, 2.0] {
            let psi = if theta < 2.0 {
                WeightPsi::for_theta(theta)
            } else {
                WeightPsi::LogSquare { gamma: 2.0 }
            };
            let phi = build_phi(&psi, change(theta), 1.1).unwrap();
            let mut prev = -1.0;
            for i in 0..1000 {
                let t = 40.0 * i as f64 / 999.0;
                let v = phi.eval(t);
                assert!(v >= -1e-12, "phi({t}) = {v} for theta {theta}");
                assert!(v >= prev - 1e-9, "dip at {t} for theta {theta}");
                prev = v;
            }
        }
    }

    #[test]
    fn phi_condition_examples() {
        let sq = PhiFunction::from_fn(|t: f64| t * t);
        assert!(check_phi_condition(&sq, 1.0).unwrap().is_divergent());
        let steep = PhiFunction::from_fn(|t: f64| t.powf(2.5));
        assert!(check_phi_condition(&steep, 1.0).unwrap().is_convergent());
        // end-to-end chain for θ = 1
        let phi = build_phi(&WeightPsi::for_theta(1.0), change(1.0), 1.0).unwrap();
        assert!(check_phi_condition(&phi, 1.0).unwrap().is_divergent());
    }

    #[test]
    fn classify_table() {
        let exp1 = WarpingKind::ExponentialGrowth { beta: 1.0, dim: 3 };
        assert_eq!(classify(&exp1, 0.5).verdict, Verdict::Unique);
        assert_eq!(classify(&exp1, 1.5).verdict, Verdict::NonUnique);
        assert_eq!(classify(&exp1, 1.0).verdict, Verdict::Indeterminate);
        let poly = WarpingKind::PolynomialGrowth { beta: 1.0, dim: 3 };
        assert_eq!(classify(&poly, 2.0).verdict, Verdict::Unique);
        assert_eq!(classify(&poly, 2.5).verdict, Verdict::NonUnique);
        let exp2 = WarpingKind::ExponentialGrowth { beta: 2.0, dim: 3 };
        assert_eq!(classify(&exp2, 0.0).verdict, Verdict::Unique);
    }

    #[test]
    fn classify_consistent_with_criteria() {
        for beta in [0.5, 1.0, 2.0] {
            let kind = WarpingKind::ExponentialGrowth { beta, dim: 3 };
            for theta in [0.0, 0.4, 0.9, 1.4] {
                if classify(&kind, theta).verdict == Verdict::Unique && theta < 2.0 {
                    let v = criterion_power(&WeightPsi::for_theta(theta), theta, 1.0).unwrap();
                    assert!(v.is_divergent(), "β={beta} θ={theta}");
                }
            }
        }
        let poly = WarpingKind::PolynomialGrowth { beta: 1.0, dim: 3 };
        for theta in [0.0, 1.0] {
            assert_eq!(classify(&poly, theta).verdict, Verdict::Unique);
            assert!(criterion_power(&WeightPsi::for_theta(theta), theta, 1.0)
                .unwrap()
                .is_divergent());
        }
        assert_eq!(classify(&poly, 2.0).verdict, Verdict::Unique);
        assert!(criterion_log(&WeightPsi::LogSquare { gamma: 2.0 }, 2.0)
            .unwrap()
            .is_divergent());
    }

    #[test]
    fn verdicts_stable_under_tiny_scaling() {
        let cases: Vec<(WeightPsi, f64)> = vec![
            (WeightPsi::for_theta(1.0), 1.0),
            (custom(|r| r.powf(1.5), |r| 1.5 * r.powf(0.5)), 1.0),
        ];
        for (psi, theta) in cases {
            let base = criterion_power(&psi, theta, 1.0).unwrap();
            let psi2 = psi.clone();
            let scaled = custom(
                move |r| psi2.value(r) * (1.0 + 1e-9),
                {
                    let psi3 = psi.clone();
                    move |r| psi3.d1(r) * (1.0 + 1e-9)
                },
            );
            let v = criterion_power(&scaled, theta, 1.0).unwrap();
            assert_eq!(
                std::mem::discriminant(&base.kind),
                std::mem::discriminant(&v.kind)
            );
        }
    }

    fn ones_trajectory(r_max: f64, dr: f64) -> FieldTrajectory {
        let n = (r_max / dr).round() as usize + 1;
        let radii: Vec<f64> = (0..n).map(|i| i as f64 * dr).collect();
        let times = vec![0.0, 0.5, 1.0];
        let values = vec![vec![1.0; n]; 3];
        let v = vec![1.0; n];
        FieldTrajectory {
            radii,
            times,
            values,
            v,
        }
    }

    #[test]
    fn weighted_norm_gaussian_oracle() {
        let m = ModelManifold::new(2, &WarpingFamily::new(WarpingKind::Euclidean));
        let u = ones_trajectory(8.0, 0.005);
        let psi = WeightPsi::PowerWeight { exponent: 2.0 };
        let norm = weighted_norm(&u, &psi, 1.0, &m, 8.0);
        assert!(
            (norm - std::f64::consts::PI).abs() < 1e-3,
            "norm = {norm}"
        );
        let zero = FieldTrajectory {
            values: u.values.iter().map(|s| vec![0.0; s.len()]).collect(),
            ..u
        };
        assert_eq!(weighted_norm(&zero, &psi, 1.0, &m, 8.0), 0.0);
    }

    #[test]
    fn weighted_norm_truncation_dichotomy() {
        let fam = WarpingFamily::new(WarpingKind::ExponentialGrowth { beta: 1.0, dim: 3 });
        let m = ModelManifold::new(3, &fam);
        let u = ones_trajectory(32.0, 0.01);
        let grow = WeightPsi::for_theta(1.5);
        let g: Vec<f64> = [8.0, 16.0, 32.0]
            .iter()
            .map(|&rt| weighted_norm(&u, &grow, 1.0, &m, rt))
            .collect();
        assert!(g[1] > 10.0 * g[0] && g[2] > 10.0 * g[1], "{g:?}");
        let shrink = WeightPsi::for_theta(0.5);
        let s: Vec<f64> = [8.0, 16.0, 32.0]
            .iter()
            .map(|&rt| weighted_norm(&u, &shrink, 1.0, &m, rt))
            .collect();
        assert!((s[2] - s[1]).abs() < 1e-3 * s[1], "{s:?}");
        // monotone in the truncation radius
        assert!(s[0] <= s[1] && s[1] <= s[2]);
    }

    fn cutoff_grids(big_r: f64, tau: f64, delta: f64) -> (Vec<f64>, Vec<f64>) {
        let rts: Vec<f64> = (0..90).map(|i| 3.0 * big_r * (i + 1) as f64 / 90.0).collect();
        let ts: Vec<f64> = (0..12)
            .map(|i| tau - delta + delta * (i + 1) as f64 / 12.0)
            .collect();
        (rts, ts)
    }

    #[test]
    fn cutoff_holds_with_admissible_alpha() {
        let c = ConformalChange::new(
            Arc::new(ModelManifold::new(
                3,
                &WarpingFamily::new(WarpingKind::Hyperbolic { c: 1.0 }),
            )),
            Density::power(1.0, 2.0),
        );
        let p = CutoffParams {
            r: 2.0,
            tau: 0.5,
            delta: 0.1,
            lambda: 6.0,
            alpha: 10.0,
        };
        let (rts, ts) = cutoff_grids(p.r, p.tau, p.delta);
        let rep = verify_cutoff_inequality(&c, &p, &rts, &ts).unwrap();
        assert!(rep.holds, "worst {} at {:?}", rep.worst_value, rep.worst_point);

        let bad = CutoffParams { alpha: 1.0, ..p };
        let rep = verify_cutoff_inequality(&c, &bad, &rts, &ts).unwrap();
        assert!(!rep.holds);
        assert!(rep.worst_value > 0.0);
    }

    #[test]
    fn cutoff_parameter_lattice() {
        let manifolds = [
            WarpingKind::Euclidean,
            WarpingKind::Hyperbolic { c: 1.0 },
        ];
        for kind in manifolds {
            let m = Arc::new(ModelManifold::new(3, &WarpingFamily::new(kind)));
            for theta in [0.0, 1.0, 2.0] {
                let c = ConformalChange::new(m.clone(), Density::power(1.0, theta));
                for lambda in [2.0, 6.0, 10.0] {
                    for delta in [0.05, 0.1, 0.2] {
                        let p = CutoffParams {
                            r: 2.0,
                            tau: 0.5,
                            delta,
                            lambda,
                            alpha: lambda / (1.0 - 4.0 * delta),
                        };
                        let (rts, ts) = cutoff_grids(p.r, p.tau, p.delta);
                        let rep = verify_cutoff_inequality(&c, &p, &rts, &ts).unwrap();
                        assert!(
                            rep.holds,
                            "θ={theta} λ={lambda} δ={delta}: worst {} at {:?}",
                            rep.worst_value, rep.worst_point
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn cutoff_rejects_bad_delta() {
        let c = change(1.0);
        let p = CutoffParams {
            r: 2.0,
            tau: 0.5,
            delta: 0.3,
            lambda: 6.0,
            alpha: 100.0,
        };
        let err = verify_cutoff_inequality(&c, &p, &[1.0], &[0.45]);
        assert!(matches!(err, Err(CriteriaError::ParamViolation(_))));
    }
}
