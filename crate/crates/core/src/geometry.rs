//! Model manifolds M_f^N with metric g = dr² + f²(r)dθ², radial densities,
//! and the radial Laplace–Beltrami operator
//!
//! ```text
//!     Δ = ∂²/∂r² + (N−1) f'/f ∂/∂r
//! ```
//!
//! together with volume, curvature and the pointwise geometric hypothesis
//! checks (Laplacian comparison, drift lower bounds).

use std::f64::consts::PI;
use std::sync::Arc;

use thiserror::Error;

use crate::numerics::{self, NumericsError};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("radial argument must be positive, got r = {0}")]
    DomainError(f64),
    #[error("grid needs at least 3 nodes, got {0}")]
    GridTooSmall(usize),
    #[error("comparison function leaves class A: {0}")]
    ClassAViolation(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// A smooth radial function with first and second derivatives.
///
/// `log_value` and `log_slope` (= f'/f) exist so that fast-growing profiles
/// such as e^(r^β) stay usable far beyond the overflow range of `value`.
pub trait RadialProfile: Send + Sync {
    fn value(&self, r: f64) -> f64;
    fn d1(&self, r: f64) -> f64;
    fn d2(&self, r: f64) -> f64;

    fn log_value(&self, r: f64) -> f64 {
        self.value(r).ln()
    }

    fn log_slope(&self, r: f64) -> f64 {
        self.d1(r) / self.value(r)
    }

    /// log f(b+delta) − log f(b). The default subtracts; implementations
    /// should override it when the two logs are huge but close, where direct
    /// subtraction loses all significant digits (the offset form also keeps
    /// `b+delta` meaningful once |delta| drops below one ulp of `b`).
    fn log_value_diff(&self, b: f64, delta: f64) -> f64 {
        self.log_value(b + delta) - self.log_value(b)
    }
}

/// Radial profile backed by closures; handy for custom fields and tests.
pub struct FnProfile<V, D1, D2> {
    pub value: V,
    pub d1: D1,
    pub d2: D2,
}

impl<V, D1, D2> RadialProfile for FnProfile<V, D1, D2>
where
    V: Fn(f64) -> f64 + Send + Sync,
    D1: Fn(f64) -> f64 + Send + Sync,
    D2: Fn(f64) -> f64 + Send + Sync,
{
    fn value(&self, r: f64) -> f64 {
        (self.value)(r)
    }
    fn d1(&self, r: f64) -> f64 {
        (self.d1)(r)
    }
    fn d2(&self, r: f64) -> f64 {
        (self.d2)(r)
    }
}

/// The named warping families, each given by its large-r formula.
#[derive(Clone)]
pub enum WarpingKind {
    /// f(r) = r.
    Euclidean,
    /// f(r) = sinh(√c r)/√c, constant curvature −c.
    Hyperbolic { c: f64 },
    /// f(r) = e^(r^β/(N−1)), exponential volume growth, β ∈ (0, 2].
    ExponentialGrowth { beta: f64, dim: u32 },
    /// f(r) = r^(β/(N−1)), polynomial volume growth, β > 0.
    PolynomialGrowth { beta: f64, dim: u32 },
    Custom(Arc<dyn RadialProfile>),
}

/// A warping family plus the C¹ blend that restores the pole conditions
/// f(0) = 0, f'(0) = 1 violated by the raw large-r formulas.
///
/// The produced profile equals r on [0, blend_inner], the family formula for
/// r ≥ blend_outer, and a monotone cubic switch in between. Setting
/// blend_outer = 0 disables the blend (raw family everywhere), which is what
/// the closed-form oracles in the tests use.
#[derive(Clone)]
pub struct WarpingFamily {
    pub kind: WarpingKind,
    pub blend_inner: f64,
    pub blend_outer: f64,
}

impl WarpingFamily {
    pub fn new(kind: WarpingKind) -> Self {
        WarpingFamily {
            kind,
            blend_inner: 0.5,
            blend_outer: 1.0,
        }
    }

    pub fn unblended(kind: WarpingKind) -> Self {
        WarpingFamily {
            kind,
            blend_inner: 0.0,
            blend_outer: 0.0,
        }
    }

    pub fn profile(&self) -> Arc<dyn RadialProfile> {
        match &self.kind {
            WarpingKind::Custom(p) => p.clone(),
            _ => Arc::new(BlendedWarping {
                kind: self.kind.clone(),
                a: self.blend_inner,
                b: self.blend_outer,
            }),
        }
    }
}

struct BlendedWarping {
    kind: WarpingKind,
    a: f64,
    b: f64,
}

impl BlendedWarping {
    fn base(&self, r: f64) -> (f64, f64, f64) {
        match self.kind {
            WarpingKind::Euclidean => (r, 1.0, 0.0),
            WarpingKind::Hyperbolic { c } => {
                let s = c.sqrt();
                ((s * r).sinh() / s, (s * r).cosh(), s * (s * r).sinh())
            }
            WarpingKind::ExponentialGrowth { beta, dim } => {
                let m = (dim - 1) as f64;
                let u = r.powf(beta) / m;
                let u1 = beta * r.powf(beta - 1.0) / m;
                let u2 = beta * (beta - 1.0) * r.powf(beta - 2.0) / m;
                let v = u.exp();
                (v, u1 * v, (u2 + u1 * u1) * v)
            }
            WarpingKind::PolynomialGrowth { beta, dim } => {
                let p = beta / (dim - 1) as f64;
                (
                    r.powf(p),
                    p * r.powf(p - 1.0),
                    p * (p - 1.0) * r.powf(p - 2.0),
                )
            }
            WarpingKind::Custom(_) => unreachable!(),
        }
    }

    fn all(&self, r: f64) -> (f64, f64, f64) {
        if r >= self.b {
            return self.base(r);
        }
        if r <= self.a {
            return (r, 1.0, 0.0);
        }
        let w = self.b - self.a;
        let t = (r - self.a) / w;
        let s = t * t * (3.0 - 2.0 * t);
        let s1 = 6.0 * t * (1.0 - t) / w;
        let s2 = (6.0 - 12.0 * t) / (w * w);
        let (g, g1, g2) = self.base(r);
        let f = (1.0 - s) * r + s * g;
        let f1 = (1.0 - s) + s * g1 + s1 * (g - r);
        let f2 = s * g2 + 2.0 * s1 * (g1 - 1.0) + s2 * (g - r);
        (f, f1, f2)
    }
}

impl RadialProfile for BlendedWarping {
    fn value(&self, r: f64) -> f64 {
        self.all(r).0
    }
    fn d1(&self, r: f64) -> f64 {
        self.all(r).1
    }
    fn d2(&self, r: f64) -> f64 {
        self.all(r).2
    }

    fn log_value(&self, r: f64) -> f64 {
        if r >= self.b {
            match self.kind {
                WarpingKind::ExponentialGrowth { beta, dim } => {
                    r.powf(beta) / (dim - 1) as f64
                }
                WarpingKind::PolynomialGrowth { beta, dim } => {
                    beta / (dim - 1) as f64 * r.ln()
                }
                WarpingKind::Hyperbolic { c } => {
                    // log(sinh(x)/√c) = x − log 2 + log1p(−e^{−2x}) − log √c,
                    // usable far past the overflow range of sinh.
                    let s = c.sqrt();
                    let x = s * r;
                    x - std::f64::consts::LN_2 + (-(-2.0 * x).exp()).ln_1p() - s.ln()
                }
                _ => self.value(r).ln(),
            }
        } else {
            self.value(r).ln()
        }
    }

    fn log_value_diff(&self, b: f64, delta: f64) -> f64 {
        if b >= self.b && b + delta >= self.b && b > 0.0 {
            match self.kind {
                WarpingKind::ExponentialGrowth { beta, dim } => {
                    // ((b+δ)ᵝ − bᵝ)/(N−1) without cancellation.
                    let nm1 = (dim - 1) as f64;
                    b.powf(beta) * (beta * (delta / b).ln_1p()).exp_m1() / nm1
                }
                WarpingKind::PolynomialGrowth { beta, dim } => {
                    beta / (dim - 1) as f64 * (delta / b).ln_1p()
                }
                WarpingKind::Hyperbolic { c } => {
                    let s = c.sqrt();
                    s * delta + (-(-2.0 * s * (b + delta)).exp()).ln_1p()
                        - (-(-2.0 * s * b).exp()).ln_1p()
                }
                _ => self.log_value(b + delta) - self.log_value(b),
            }
        } else {
            self.log_value(b + delta) - self.log_value(b)
        }
    }

    fn log_slope(&self, r: f64) -> f64 {
        if r >= self.b {
            match self.kind {
                WarpingKind::ExponentialGrowth { beta, dim } => {
                    beta * r.powf(beta - 1.0) / (dim - 1) as f64
                }
                WarpingKind::PolynomialGrowth { beta, dim } => {
                    beta / (dim - 1) as f64 / r
                }
                WarpingKind::Hyperbolic { c } => {
                    let s = c.sqrt();
                    s / (s * r).tanh()
                }
                _ => self.d1(r) / self.value(r),
            }
        } else {
            self.d1(r) / self.value(r)
        }
    }
}

/// Γ(n/2) for positive integer n, built up from Γ(1) = 1 and Γ(1/2) = √π.
fn gamma_half(n: u32) -> f64 {
    let mut x = if n.is_multiple_of(2) { 1.0 } else { 0.5 };
    let mut g = if n.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    while x + 0.5 < n as f64 / 2.0 + 0.01 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Rotationally symmetric model manifold of dimension N ≥ 2.
pub struct ModelManifold {
    pub dim: u32,
    pub f: Arc<dyn RadialProfile>,
    /// Area of the unit (N−1)-sphere: 2π^(N/2)/Γ(N/2).
    pub sphere_area: f64,
}

impl ModelManifold {
    pub fn new(dim: u32, family: &WarpingFamily) -> Self {
        assert!(dim >= 2, "model manifolds require dimension N >= 2");
        let sphere_area = 2.0 * PI.powf(dim as f64 / 2.0) / gamma_half(dim);
        ModelManifold {
            dim,
            f: family.profile(),
            sphere_area,
        }
    }

    /// Δr = (N−1) f'/f, the radial drift coefficient.
    pub fn drift_coefficient(&self, r: f64) -> Result<f64, GeometryError> {
        if r <= 0.0 {
            return Err(GeometryError::DomainError(r));
        }
        Ok((self.dim - 1) as f64 * self.f.log_slope(r))
    }

    /// Volume of the geodesic ball of radius r around the pole.
    pub fn volume(&self, r: f64) -> Result<f64, GeometryError> {
        if r < 0.0 {
            return Err(GeometryError::DomainError(r));
        }
        let m = (self.dim - 1) as i32;
        let f = &self.f;
        let (v, _) = numerics::integrate(&|t: f64| f.value(t).powi(m), 0.0, r, 1e-10)?;
        Ok(self.sphere_area * v)
    }

    /// Radial sectional curvature −f''/f.
    pub fn radial_sectional(&self, r: f64) -> Result<f64, GeometryError> {
        if r <= 0.0 {
            return Err(GeometryError::DomainError(r));
        }
        Ok(-self.f.d2(r) / self.f.value(r))
    }

    /// Radial Laplacian of a grid function on the uniform grid r_i = i·dr.
    ///
    /// Interior nodes use second-order centered differences; the pole node
    /// uses the regularity limit Δu(0) = N·u''(0) with the one-sided second
    /// difference that encodes u'(0) = 0. The final node is filled with
    /// one-sided formulas.
    pub fn apply_laplacian(&self, u: &[f64], dr: f64) -> Result<Vec<f64>, GeometryError> {
        let n = u.len();
        if n < 3 {
            return Err(GeometryError::GridTooSmall(n));
        }
        let mut out = vec![0.0; n];
        let dim = self.dim as f64;
        out[0] = dim * 2.0 * (u[1] - u[0]) / (dr * dr);
        for i in 1..n - 1 {
            let r = i as f64 * dr;
            let m = self.drift_coefficient(r)?;
            out[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dr * dr)
                + m * (u[i + 1] - u[i - 1]) / (2.0 * dr);
        }
        let r = (n - 1) as f64 * dr;
        let m = self.drift_coefficient(r)?;
        out[n - 1] = (u[n - 1] - 2.0 * u[n - 2] + u[n - 3]) / (dr * dr)
            + m * (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * dr);
        Ok(out)
    }
}

/// Positive radial density ρ multiplying the time derivative.
#[derive(Clone)]
pub enum Density {
    /// ρ(r) = c (1+r²)^(−θ/2).
    Power { c: f64, theta: f64 },
    Custom(Arc<dyn RadialProfile>),
}

impl Density {
    pub fn power(c: f64, theta: f64) -> Self {
        assert!(c > 0.0 && theta >= 0.0);
        Density::Power { c, theta }
    }

    pub fn value(&self, r: f64) -> f64 {
        match self {
            Density::Power { c, theta } => c * (1.0 + r * r).powf(-theta / 2.0),
            Density::Custom(p) => p.value(r),
        }
    }

    /// ln ρ(r), exact for the power family.
    pub fn log_value(&self, r: f64) -> f64 {
        match self {
            Density::Power { c, theta } => c.ln() - theta / 2.0 * (1.0 + r * r).ln(),
            Density::Custom(p) => p.value(r).ln(),
        }
    }

    /// ρ'(r)/ρ(r), exact for the power family.
    pub fn log_deriv(&self, r: f64) -> f64 {
        match self {
            Density::Power { theta, .. } => -theta * r / (1.0 + r * r),
            Density::Custom(p) => p.d1(r) / p.value(r),
        }
    }

    pub fn d1(&self, r: f64) -> f64 {
        match self {
            Density::Power { .. } => self.log_deriv(r) * self.value(r),
            Density::Custom(p) => p.d1(r),
        }
    }

    pub fn d2(&self, r: f64) -> f64 {
        match self {
            Density::Power { theta, .. } => {
                let l1 = self.log_deriv(r);
                let q = 1.0 + r * r;
                let l2 = -theta * (1.0 - r * r) / (q * q);
                (l2 + l1 * l1) * self.value(r)
            }
            Density::Custom(p) => p.d2(r),
        }
    }

    pub fn sqrt_value(&self, r: f64) -> f64 {
        match self {
            Density::Power { c, theta } => c.sqrt() * (1.0 + r * r).powf(-theta / 4.0),
            Density::Custom(p) => p.value(r).sqrt(),
        }
    }
}

/// Pointwise report of a two-sided inequality sweep.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub holds: bool,
    /// False when the curvature hypothesis itself fails somewhere.
    pub hypothesis_ok: bool,
    pub worst_margin: f64,
    pub worst_r: f64,
}

/// Check Laplacian comparison: under sec_rad ≤ −h''/h the conclusion
/// Δr ≥ (N−1) h'/h must hold. Both sides are swept pointwise on the grid.
///
/// `h` must lie in class A: h(0) = 0, h'(0) = 1, h > 0 on (0, ∞).
pub fn check_laplacian_comparison(
    m: &ModelManifold,
    h: &dyn RadialProfile,
    grid: &[f64],
) -> Result<ComparisonReport, GeometryError> {
    if h.value(0.0).abs() > 1e-10 {
        return Err(GeometryError::ClassAViolation(format!(
            "h(0) = {} != 0",
            h.value(0.0)
        )));
    }
    if (h.d1(0.0) - 1.0).abs() > 1e-8 {
        return Err(GeometryError::ClassAViolation(format!(
            "h'(0) = {} != 1",
            h.d1(0.0)
        )));
    }
    let mut report = ComparisonReport {
        holds: true,
        hypothesis_ok: true,
        worst_margin: f64::INFINITY,
        worst_r: f64::NAN,
    };
    for &r in grid {
        if r <= 0.0 {
            continue;
        }
        let hv = h.value(r);
        if hv <= 0.0 {
            return Err(GeometryError::ClassAViolation(format!("h({r}) = {hv} <= 0")));
        }
        let hyp_margin = -h.d2(r) / hv - m.radial_sectional(r)?;
        if hyp_margin < -1e-12 {
            report.hypothesis_ok = false;
        }
        let concl_margin = m.drift_coefficient(r)? - (m.dim - 1) as f64 * h.d1(r) / hv;
        let margin = hyp_margin.min(concl_margin);
        if margin < report.worst_margin {
            report.worst_margin = margin;
            report.worst_r = r;
        }
    }
    report.holds = report.worst_margin >= -1e-12;
    Ok(report)
}

/// Check the drift lower bound Δr ≥ −(N−1)/2 · ρ'/ρ pointwise on the grid.
pub fn check_delta_r_condition(
    m: &ModelManifold,
    d: &Density,
    grid: &[f64],
) -> Result<ComparisonReport, GeometryError> {
    let mut report = ComparisonReport {
        holds: true,
        hypothesis_ok: true,
        worst_margin: f64::INFINITY,
        worst_r: f64::NAN,
    };
    for &r in grid {
        if r <= 0.0 {
            continue;
        }
        let lhs = m.drift_coefficient(r)?;
        let rhs = -((m.dim - 1) as f64) / 2.0 * d.log_deriv(r);
        let margin = lhs - rhs;
        if margin < report.worst_margin {
            report.worst_margin = margin;
            report.worst_r = r;
        }
    }
    report.holds = report.worst_margin >= -1e-12;
    Ok(report)
}

/// Log-spaced sample grid, endpoints inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
