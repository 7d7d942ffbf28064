//! The conformal change g̃ = ρg with measure dμ̃ = ρdμ and weighted
//! Laplacian Δ̃ = (1/ρ)Δ, plus the distance reparametrization
//!
//! ```text
//!     r̃(r) = ∫₀ʳ √ρ(s) ds
//! ```
//!
//! its inverse, the conformal completeness probe and the assumption-(H)
//! checks used by the p = 1 uniqueness machinery.

use std::sync::Arc;

use thiserror::Error;

use crate::geometry::{Density, GeometryError, ModelManifold};
use crate::numerics::{self, DivergenceVerdict, NumericsError};

#[derive(Debug, Error)]
pub enum ConformalError {
    #[error("tilde radius {0} beyond the invertible range")]
    OutOfRange(f64),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

const TABLE_NODES: usize = 4096;
const TABLE_R_MIN: f64 = 1e-4;
/// Hard cap for inverting r̃ beyond the cached table.
const INVERT_R_CAP: f64 = 1e30;

/// Immutable conformal-change context: manifold, radial density, the cached
/// monotone table of r̃(r) on a log-spaced grid, and ω = log(1/ρ).
pub struct ConformalChange {
    pub manifold: Arc<ModelManifold>,
    pub density: Density,
    pub r_max: f64,
    table_r: Vec<f64>,
    table_tilde: Vec<f64>,
}

impl ConformalChange {
    pub fn new(manifold: Arc<ModelManifold>, density: Density) -> Self {
        Self::with_r_max(manifold, density, 1e6)
    }

    pub fn with_r_max(manifold: Arc<ModelManifold>, density: Density, r_max: f64) -> Self {
        assert!(r_max > 1.0);
        let mut table_r = Vec::with_capacity(TABLE_NODES + 1);
        table_r.push(0.0);
        let (llo, lhi) = (TABLE_R_MIN.ln(), r_max.ln());
        for i in 0..TABLE_NODES {
            table_r.push((llo + (lhi - llo) * i as f64 / (TABLE_NODES - 1) as f64).exp());
        }
        let d = density.clone();
        let mut table_tilde = Vec::with_capacity(table_r.len());
        let mut acc = 0.0;
        table_tilde.push(0.0);
        for w in table_r.windows(2) {
            let (seg, _) = numerics::integrate(&|s| d.sqrt_value(s), w[0], w[1], 1e-13)
                .expect("density must be finite");
            acc += seg;
            table_tilde.push(acc);
        }
        ConformalChange {
            manifold,
            density,
            r_max,
            table_r,
            table_tilde,
        }
    }

    /// ω(r) = log(1/ρ(r)).
    pub fn omega(&self, r: f64) -> f64 {
        -self.density.log_value(r)
    }

    /// ω'(r) = −ρ'(r)/ρ(r).
    pub fn omega_d1(&self, r: f64) -> f64 {
        -self.density.log_deriv(r)
    }

    /// Conformal distance r̃(r) = ∫₀ʳ √ρ, from the cached table refined by
    /// local quadrature; extends past the table by direct quadrature.
    pub fn tilde_radius(&self, r: f64) -> Result<f64, ConformalError> {
        if r <= 0.0 {
            return Ok(0.0);
        }
        let d = &self.density;
        if r > self.r_max {
            // Integrate the tail over dyadic segments: a single panel across
            // many decades lets the quadrature miss the left-endpoint mass.
            let mut acc = *self.table_tilde.last().unwrap();
            let mut a = self.r_max;
            while a < r {
                let b = (2.0 * a).min(r);
                let tol = 1e-11 * acc.abs().max(1.0);
                let (seg, _) = numerics::integrate(&|s| d.sqrt_value(s), a, b, tol)?;
                acc += seg;
                a = b;
            }
            return Ok(acc);
        }
        let idx = match self
            .table_r
            .binary_search_by(|probe| probe.partial_cmp(&r).unwrap())
        {
            Ok(i) => return Ok(self.table_tilde[i]),
            Err(i) => i - 1,
        };
        let (seg, _) = numerics::integrate(&|s| d.sqrt_value(s), self.table_r[idx], r, 1e-13)?;
        Ok(self.table_tilde[idx] + seg)
    }

    /// Inverse map r(r̃), by bracketed inversion of `tilde_radius`.
    pub fn radius_from_tilde(&self, tilde: f64) -> Result<f64, ConformalError> {
        if tilde <= 0.0 {
            return Ok(0.0);
        }
        let last = *self.table_tilde.last().unwrap();
        let (lo, hi) = if tilde <= last {
            let idx = match self
                .table_tilde
                .binary_search_by(|probe| probe.partial_cmp(&tilde).unwrap())
            {
                Ok(i) => return Ok(self.table_r[i]),
                Err(i) => i,
            };
            (self.table_r[idx - 1], self.table_r[idx])
        } else {
            // Expand past the table until the bracket closes.
            let mut lo = self.r_max;
            let mut hi = 2.0 * self.r_max;
            loop {
                if self.tilde_radius(hi)? >= tilde {
                    break;
                }
                lo = hi;
                hi *= 2.0;
                if hi > INVERT_R_CAP {
                    return Err(ConformalError::OutOfRange(tilde));
                }
            }
            (lo, hi)
        };
        let g = |r: f64| self.tilde_radius(r).unwrap_or(f64::NAN);
        // The inversion tolerance lives on the r̃ scale; dr/dr̃ = 1/√ρ can be
        // large where the density has decayed, so keep it near round-off.
        let tol = 1e-13 * tilde.max(1.0);
        Ok(numerics::invert_monotone(&g, tilde, (lo, hi), tol)?)
    }

    /// Conformal completeness: does ∫₁^∞ √ρ diverge?
    pub fn check_completeness(&self) -> Result<DivergenceVerdict, ConformalError> {
        let d = &self.density;
        Ok(numerics::probe_divergence_default(
            &|s| d.sqrt_value(s),
            1.0,
        )?)
    }

    /// Δ̃u = (1/ρ)Δu on the uniform radial grid r_i = i·dr.
    pub fn weighted_laplacian(&self, u: &[f64], dr: f64) -> Result<Vec<f64>, ConformalError> {
        let mut lap = self.manifold.apply_laplacian(u, dr)?;
        for (i, v) in lap.iter_mut().enumerate() {
            *v /= self.density.value(i as f64 * dr);
        }
        Ok(lap)
    }

    /// Δ̃r̃ = (Δr + (N−1)/2 · ρ'/ρ) / √ρ.
    pub fn tilde_laplacian_of_tilde_r(&self, r: f64) -> Result<f64, ConformalError> {
        if r <= 0.0 {
            return Err(GeometryError::DomainError(r).into());
        }
        let drift = self.manifold.drift_coefficient(r)?;
        let half = (self.manifold.dim - 1) as f64 / 2.0;
        Ok((drift + half * self.density.log_deriv(r)) / self.density.sqrt_value(r))
    }
}

/// Assumption-(H) report for the conformal weighted manifold.
#[derive(Debug, Clone)]
pub struct AssumptionHReport {
    /// Model manifolds have a pole by construction.
    pub pole_ok: bool,
    /// Δ̃r̃ ≥ 0 on the sample grid.
    pub delta_ok: bool,
    /// ω' grows at most linearly: |ω'(r)|/r stays below twice its
    /// maximum over r ∈ (1, 2].
    pub omega_growth_ok: bool,
    pub worst_margin: f64,
}

pub fn check_assumption_h(
    c: &ConformalChange,
    grid: &[f64],
) -> Result<AssumptionHReport, ConformalError> {
    let mut worst = f64::INFINITY;
    let mut delta_ok = true;
    for &r in grid {
        if r <= 0.0 {
            continue;
        }
        let v = c.tilde_laplacian_of_tilde_r(r)?;
        if v < worst {
            worst = v;
        }
        if v < -1e-12 {
            delta_ok = false;
        }
    }
    let mut bound = 0.0f64;
    for i in 1..=64 {
        let r = 1.0 + i as f64 / 64.0;
        bound = bound.max(c.omega_d1(r).abs() / r);
    }
    bound *= 2.0;
    let omega_growth_ok = grid
        .iter()
        .filter(|&&r| r > 1.0)
        .all(|&r| c.omega_d1(r).abs() / r <= bound + 1e-12);
    Ok(AssumptionHReport {
        pole_ok: true,
        delta_ok,
        omega_growth_ok,
        worst_margin: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{log_grid, WarpingFamily, WarpingKind};
    use crate::numerics::VerdictKind;

    fn euclidean(dim: u32) -> Arc<ModelManifold> {
        Arc::new(ModelManifold::new(
            dim,
            &WarpingFamily::new(WarpingKind::Euclidean),
        ))
    }

    fn hyperbolic() -> Arc<ModelManifold> {
        Arc::new(ModelManifold::new(
            3,
            &WarpingFamily::new(WarpingKind::Hyperbolic { c: 1.0 }),
        ))
    }

    #[test]
    fn identity_density_is_identity_map() {
        let c = ConformalChange::new(euclidean(3), Density::power(1.0, 0.0));
        for &r in &[0.1, 1.0, 7.5, 100.0] {
            assert!((c.tilde_radius(r).unwrap() - r).abs() < 1e-9);
        }
        assert!((c.radius_from_tilde(5.0).unwrap() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn theta2_gives_asinh() {
        let c = ConformalChange::new(euclidean(3), Density::power(1.0, 2.0));
        let mut r = 0.5;
        while r <= 64.0 {
            assert!(
                (c.tilde_radius(r).unwrap() - r.asinh()).abs() <= 1e-8,
                "r = {r}"
            );
            r *= 2.0;
        }
        assert!((c.radius_from_tilde(1.0).unwrap() - 1.0f64.sinh()).abs() < 1e-8);
    }

    #[test]
    fn constant_density_scales_length() {
        let c = ConformalChange::new(euclidean(3), Density::power(4.0, 0.0));
        assert!((c.tilde_radius(3.0).unwrap() - 6.0).abs() < 1e-9);
        assert!((c.radius_from_tilde(2.0).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn round_trip_within_table() {
        let c = ConformalChange::new(euclidean(3), Density::power(1.0, 1.0));
        for &r in &[1e-3, 0.3, 2.0, 55.0, 4000.0, 9e5] {
            let t = c.tilde_radius(r).unwrap();
            let back = c.radius_from_tilde(t).unwrap();
            assert!(
                (c.tilde_radius(back).unwrap() - t).abs() <= 1e-8 * t.max(1.0),
                "r = {r}"
            );
        }
    }

    #[test]
    fn round_trip_beyond_table() {
        let c = ConformalChange::new(euclidean(3), Density::power(1.0, 1.0));
        let t = c.tilde_radius(5e7).unwrap();
        let back = c.radius_from_tilde(t).unwrap();
        assert!((back - 5e7).abs() < 1e-2 * 5e7 * 1e-6 + 1.0);
    }

    #[test]
    fn quadrupled_density_doubles_tilde() {
        let c1 = ConformalChange::new(euclidean(3), Density::power(1.0, 1.5));
        let c4 = ConformalChange::new(euclidean(3), Density::power(4.0, 1.5));
        for &r in &[0.5, 3.0, 40.0] {
            let a = c1.tilde_radius(r).unwrap();
            let b = c4.tilde_radius(r).unwrap();
            assert!((b - 2.0 * a).abs() < 1e-9 * b.max(1.0));
        }
    }

    #[test]
    fn completeness_dichotomy_at_theta_2() {
        // √ρ ~ r^(−θ/2): divergent iff θ ≤ 2.
        for theta in [0.0, 1.0, 2.0] {
            let c = ConformalChange::new(euclidean(3), Density::power(1.0, theta));
            assert!(
                c.check_completeness().unwrap().is_divergent(),
                "theta {theta}"
            );
        }
        for theta in [2.5, 3.0, 6.0] {
            let c = ConformalChange::new(euclidean(3), Density::power(1.0, theta));
            let v = c.check_completeness().unwrap();
            assert!(
                matches!(v.kind, VerdictKind::Convergent { .. }),
                "theta {theta}: {:?}",
                v.kind
            );
        }
    }

    #[test]
    fn weighted_laplacian_identity() {
        let c = ConformalChange::new(euclidean(3), Density::power(1.0, 2.0));
        let dr = 0.001;
        let u: Vec<f64> = (0..3000).map(|i| (i as f64 * dr).powi(2)).collect();
        let wl = c.weighted_laplacian(&u, dr).unwrap();
        let plain = c.manifold.apply_laplacian(&u, dr).unwrap();
        // Pointwise algebraic identity ρ·Δ̃u = Δu.
        for i in 0..u.len() {
            let rho = c.density.value(i as f64 * dr);
            assert!((wl[i] * rho - plain[i]).abs() < 1e-9 * plain[i].abs().max(1.0));
        }
        // Δ(r²) = 6 in Euclidean N = 3, so Δ̃u(1) = 6·(1+1) = 12.
        let at_one = wl[1000];
        assert!((at_one - 12.0).abs() < 1e-4, "{at_one}");
    }

    #[test]
    fn tilde_laplacian_of_tilde_r_cases() {
        let c = ConformalChange::new(euclidean(3), Density::power(1.0, 0.0));
        for &r in &[0.5, 2.0, 9.0] {
            let v = c.tilde_laplacian_of_tilde_r(r).unwrap();
            assert!((v - 2.0 / r).abs() < 1e-12);
        }
        let c = ConformalChange::new(hyperbolic(), Density::power(1.0, 2.0));
        let r: f64 = 2.0;
        let expect = (1.0 + r * r).sqrt() * (2.0 / r.tanh() - 2.0 * r / (1.0 + r * r));
        let got = c.tilde_laplacian_of_tilde_r(r).unwrap();
        assert!((got - expect).abs() < 1e-10, "{got} vs {expect}");
        assert!((got - 2.850).abs() < 1e-2);
    }

    #[test]
    fn assumption_h_cases() {
        let grid = log_grid(0.05, 200.0, 500);
        let c = ConformalChange::new(euclidean(3), Density::power(1.0, 0.0));
        let rep = check_assumption_h(&c, &grid).unwrap();
        assert!(rep.pole_ok && rep.delta_ok && rep.omega_growth_ok);

        let c = ConformalChange::new(hyperbolic(), Density::power(1.0, 2.0));
        let rep = check_assumption_h(&c, &grid).unwrap();
        assert!(rep.delta_ok && rep.omega_growth_ok, "{rep:?}");

        // f = r with θ = 3 violates the drift bound at large r.
        let c = ConformalChange::new(euclidean(3), Density::power(1.0, 3.0));
        let rep = check_assumption_h(&c, &grid).unwrap();
        assert!(!rep.delta_ok);
    }
}
