//! Explicit non-uniqueness witnesses: radial supersolutions of Δh ≤ −ρ
//! that decay at infinity,
//!
//! ```text
//!     h(r) = ∫_r^∞ I(s)/(f(s)+1)^{N−1} ds,
//!     I(s) = ∫_0^s ρ(ξ)(f(ξ)+1)^{N−1} dξ,
//! ```
//!
//! with derivatives
//!
//! ```text
//!     h'(r)  = −I(r)/(f(r)+1)^{N−1}
//!     h''(r) = −ρ(r) + (N−1) f'(r) I(r)/(f(r)+1)^N
//! ```
//!
//! so that Δh + ρ = −(N−1) f' I /(f (f+1)^N) ≤ 0 identically. The outer
//! integral is finite exactly in the non-uniqueness regime; `finite=false`
//! is the expected outcome on the uniqueness side.
//!
//! All inner integrals are carried in logarithmic form: panels are
//! normalized by (f+1)^{N−1} at their top endpoint so every exponential
//! factor is ≤ 1, and cumulative values combine through log-sum-exp. For
//! fast-growing warpings the integrand concentrates in a layer of width
//! ≈ 1/((N−1)·(log(f+1))') below the endpoint, so panels are truncated to
//! a 50-e-folding window — the dropped mass is smaller by e^{−50}.

use std::sync::Arc;

use thiserror::Error;

use crate::geometry::{Density, GeometryError, ModelManifold, RadialProfile};
use crate::numerics::{self, NumericsError};

#[derive(Debug, Error)]
pub enum WitnessError {
    #[error("supersolution is not finite; the instance sits in the uniqueness regime")]
    NotFinite,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

const N_NODES: usize = 1024;
const GRID_MIN: f64 = 1e-4;
const R_TOP: f64 = 512.0;
/// Dyadic extension nodes past `R_TOP`, so probe evaluations far out never
/// integrate across more than one octave.
const EXT_OCTAVES: usize = 70;
/// e-foldings kept when truncating a normalized panel to its boundary layer.
const WINDOW_FOLDINGS: f64 = 50.0;
/// Radius at which verification checks that h has decayed. The slowest
/// admissible tails decay like r^(−1/2), so a fixed far-field radius is
/// needed for the 1% decay test; this sits well inside the tabulated range.
pub const DECAY_RADIUS: f64 = 1e8;

fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// ln(f(r)+1), stable for huge f.
fn lf1(p: &dyn RadialProfile, r: f64) -> f64 {
    let lv = p.log_value(r);
    if lv > 30.0 {
        lv + (-lv).exp().ln_1p()
    } else {
        p.value(r).ln_1p()
    }
}

/// ln(f(s+delta)+1) − ln(f(s)+1), routed through the profile's stable log
/// difference once both logs are large enough for subtraction to cancel.
fn lf1_diff(p: &dyn RadialProfile, s: f64, delta: f64) -> f64 {
    if p.log_value(s) > 30.0 && p.log_value(s + delta) > 30.0 {
        p.log_value_diff(s, delta)
    } else {
        lf1(p, s + delta) - lf1(p, s)
    }
}

/// d/dr ln(f(r)+1) = f'/(f+1).
fn lf1_deriv(p: &dyn RadialProfile, r: f64) -> f64 {
    let lv = p.log_value(r);
    if lv > 30.0 {
        p.log_slope(r)
    } else {
        p.d1(r) / (1.0 + p.value(r))
    }
}

/// A constructed supersolution candidate; `finite` records whether the
/// defining tail integral converges.
pub struct Supersolution {
    pub manifold: Arc<ModelManifold>,
    pub density: Density,
    pub finite: bool,
    pub r_top: f64,
    grid: Vec<f64>,
    /// ln I − (N−1)·ln(f+1) at the grid nodes; grid[0] = 0 carries −∞.
    /// Only this normalized combination is ever stored: the raw exponents
    /// reach ~r^β where a single ulp already swamps the O(1) payload.
    log_i_rel: Vec<f64>,
    /// h at the grid nodes (empty unless finite).
    h_tab: Vec<f64>,
    /// Accumulated quadrature error estimates for h, top down.
    err_tab: Vec<f64>,
    quad_tol: f64,
}

impl Supersolution {
    /// ln I(s), by table lookup plus a truncated normalized panel.
    pub fn log_inner(&self, s: f64) -> f64 {
        let p = self.manifold.f.as_ref();
        let nm1 = (self.manifold.dim - 1) as f64;
        self.log_inner_rel(s) + nm1 * lf1(p, s)
    }

    /// ln I(s) − (N−1)·ln(f(s)+1), the normalized inner integral.
    fn log_inner_rel(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let p = self.manifold.f.as_ref();
        let nm1 = (self.manifold.dim - 1) as f64;
        let j = match self
            .grid
            .binary_search_by(|g| g.partial_cmp(&s).unwrap())
        {
            Ok(j) => return self.log_i_rel[j],
            Err(j) => j - 1,
        };
        logaddexp(
            self.log_i_rel[j] + nm1 * lf1_diff(p, s, self.grid[j] - s),
            self.log_panel(self.grid[j], s),
        )
    }

    /// ln of ∫_a^s ρ(ξ)(f(ξ)+1)^{N−1} dξ normalized by (f(s)+1)^{N−1},
    /// truncated to the boundary-layer window.
    fn log_panel(&self, a: f64, s: f64) -> f64 {
        let p = self.manifold.f.as_ref();
        let nm1 = (self.manifold.dim - 1) as f64;
        let slope = nm1 * lf1_deriv(p, s);
        // Integrate in the offset u = s − ξ: for huge s the window is
        // narrower than one ulp of s, so ξ itself cannot carry it.
        let w = if slope > 0.0 {
            (s - a).min(WINDOW_FOLDINGS / slope)
        } else {
            s - a
        };
        let d = &self.density;
        let integrand = |u: f64| d.value(s - u) * (nm1 * lf1_diff(p, s, -u)).exp();
        // Tolerance relative to a local magnitude estimate ρ(s)·width, so the
        // panel value keeps small *relative* noise even where ρ is tiny; the
        // extra 1e-2 keeps that noise well below the outer integration tol.
        let width = if slope > 0.0 { w.min(1.0 / slope) } else { w };
        let tol = (1e-2 * self.quad_tol * d.value(s) * width).max(1e-300);
        match numerics::integrate(&integrand, 0.0, w, tol) {
            Ok((v, _)) if v > 0.0 => v.ln(),
            _ => f64::NEG_INFINITY,
        }
    }

    /// The outer integrand g(s) = I(s)/(f(s)+1)^{N−1}.
    pub fn outer(&self, s: f64) -> f64 {
        self.log_inner_rel(s).exp()
    }

    pub fn h(&self, r: f64) -> Result<f64, WitnessError> {
        if !self.finite {
            return Err(WitnessError::NotFinite);
        }
        if r >= *self.grid.last().unwrap() {
            return Ok(self.tail_integral(r)?.0);
        }
        let j = match self
            .grid
            .binary_search_by(|g| g.partial_cmp(&r.max(0.0)).unwrap())
        {
            Ok(j) => return Ok(self.h_tab[j]),
            Err(j) => j,
        };
        let gl = self.outer(r.max(0.0));
        let gr = self.outer(self.grid[j]);
        let tol = (self.quad_tol * gl.max(gr).max(1e-300) * (self.grid[j] - r)).max(1e-300);
        let (seg, _) = numerics::integrate(&|s| self.outer(s), r.max(0.0), self.grid[j], tol)?;
        Ok(self.h_tab[j] + seg)
    }

    pub fn h1(&self, r: f64) -> Result<f64, WitnessError> {
        if !self.finite {
            return Err(WitnessError::NotFinite);
        }
        Ok(-self.log_inner_rel(r).exp())
    }

    pub fn h2(&self, r: f64) -> Result<f64, WitnessError> {
        if !self.finite {
            return Err(WitnessError::NotFinite);
        }
        let p = self.manifold.f.as_ref();
        let nm1 = (self.manifold.dim - 1) as f64;
        // (N−1) f' I/(f+1)^N with f' = f·(log f)'; the f/(f+1) factor is
        // folded in as −log1p(1/f) to stay clear of huge exponents.
        let lcorr = -(-p.log_value(r)).exp().ln_1p()
            + p.log_slope(r).ln()
            + self.log_inner_rel(r);
        Ok(-self.density.value(r) + nm1 * lcorr.exp())
    }

    /// Accumulated quadrature-error estimate for h(r).
    pub fn error_estimate(&self, r: f64) -> f64 {
        if self.err_tab.is_empty() {
            return f64::NAN;
        }
        let j = self
            .grid
            .partition_point(|&g| g < r.clamp(0.0, self.r_top));
        self.err_tab[j.min(self.err_tab.len() - 1)]
    }

    /// ∫_r^∞ g by doubling panels, with the accumulated error estimate.
    fn tail_integral(&self, r: f64) -> Result<(f64, f64), WitnessError> {
        let mut acc = 0.0f64;
        let mut err = 0.0;
        let mut lo = r;
        for _ in 0..60 {
            let hi = 2.0 * lo;
            let tol = (self.quad_tol * acc.max(self.outer(lo) * lo)).max(1e-300);
            let (panel, e) = numerics::integrate(&|s| self.outer(s), lo, hi, tol)?;
            acc += panel;
            err += e;
            if panel < 1e-10 * acc.max(1e-300) {
                break;
            }
            lo = hi;
        }
        Ok((acc, err))
    }
}

/// Construct the witness for a manifold/density pair; `finite=false` (the
/// uniqueness regime) is a regular outcome, not an error.
pub fn build_supersolution(
    m: Arc<ModelManifold>,
    d: Density,
) -> Result<Supersolution, WitnessError> {
    build_supersolution_with_tol(m, d, 1e-10)
}

pub fn build_supersolution_with_tol(
    m: Arc<ModelManifold>,
    d: Density,
    quad_tol: f64,
) -> Result<Supersolution, WitnessError> {
    let mut grid = Vec::with_capacity(N_NODES + EXT_OCTAVES + 1);
    grid.push(0.0);
    let (llo, lhi) = (GRID_MIN.ln(), R_TOP.ln());
    for i in 0..N_NODES {
        grid.push((llo + (lhi - llo) * i as f64 / (N_NODES - 1) as f64).exp());
    }
    let mut g = R_TOP;
    for _ in 0..EXT_OCTAVES {
        g *= 2.0;
        grid.push(g);
    }
    let mut s = Supersolution {
        manifold: m,
        density: d,
        finite: false,
        r_top: R_TOP,
        grid,
        log_i_rel: Vec::new(),
        h_tab: Vec::new(),
        err_tab: Vec::new(),
        quad_tol,
    };
    let p = s.manifold.f.clone();
    let nm1 = (s.manifold.dim - 1) as f64;
    let mut log_i_rel = Vec::with_capacity(s.grid.len());
    log_i_rel.push(f64::NEG_INFINITY);
    for w in 0..s.grid.len() - 1 {
        let shifted =
            log_i_rel[w] + nm1 * lf1_diff(p.as_ref(), s.grid[w + 1], s.grid[w] - s.grid[w + 1]);
        let v = logaddexp(shifted, s.log_panel(s.grid[w], s.grid[w + 1]));
        log_i_rel.push(v);
    }
    s.log_i_rel = log_i_rel;

    let verdict = numerics::probe_divergence_default(&|r| s.outer(r), 1.0)?;
    s.finite = verdict.is_convergent();
    if !s.finite {
        return Ok(s);
    }

    // Beyond the last extension node (R_TOP·2^70) every certified-convergent
    // tail contributes below the quadrature tolerance; start the backward
    // accumulation from zero there.
    let n = s.grid.len();
    let mut h_tab = vec![0.0; n];
    let mut err_tab = vec![0.0; n];
    for j in (0..n - 1).rev() {
        let (a, b) = (s.grid[j], s.grid[j + 1]);
        let scale = s.outer(a).max(s.outer(b)).max(1e-300);
        let tol = (quad_tol * scale * (b - a)).max(1e-300);
        let (seg, e) = numerics::integrate(&|x| s.outer(x), a, b, tol)?;
        h_tab[j] = h_tab[j + 1] + seg;
        err_tab[j] = err_tab[j + 1] + e;
    }
    s.h_tab = h_tab;
    s.err_tab = err_tab;
    Ok(s)
}

/// (h', h'') at r, from the closed-form expressions.
pub fn supersolution_derivatives(s: &Supersolution, r: f64) -> Result<(f64, f64), WitnessError> {
    assert!(r > 0.0);
    Ok((s.h1(r)?, s.h2(r)?))
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub ok: bool,
    pub worst_residual: f64,
    pub worst_r: f64,
    pub limit_ok: bool,
}

/// Check Δh + ρ ≤ tol on the sample grid (restricted to [0.05, r_max])
/// and decay h(DECAY_RADIUS) < 0.01·h(1), for arbitrary radial evaluators.
#[allow(clippy::too_many_arguments)]
pub fn verify_radial(
    m: &ModelManifold,
    d: &Density,
    h: &dyn Fn(f64) -> f64,
    h1: &dyn Fn(f64) -> f64,
    h2: &dyn Fn(f64) -> f64,
    grid: &[f64],
    tol: f64,
    r_max: f64,
) -> Result<VerifyReport, WitnessError> {
    let mut worst = f64::NEG_INFINITY;
    let mut worst_r = f64::NAN;
    for &r in grid {
        if !(0.05..=r_max).contains(&r) {
            continue;
        }
        let res = h2(r) + m.drift_coefficient(r)? * h1(r) + d.value(r);
        if res > worst {
            worst = res;
            worst_r = r;
        }
    }
    Ok(VerifyReport {
        ok: worst <= tol,
        worst_residual: worst,
        worst_r,
        limit_ok: h(DECAY_RADIUS) < 0.01 * h(1.0),
    })
}

pub fn verify_supersolution(
    s: &Supersolution,
    grid: &[f64],
    tol: f64,
) -> Result<VerifyReport, WitnessError> {
    if !s.finite {
        return Err(WitnessError::NotFinite);
    }
    verify_radial(
        &s.manifold,
        &s.density,
        &|r| s.h(r).unwrap_or(f64::NAN),
        &|r| s.h1(r).unwrap_or(f64::NAN),
        &|r| s.h2(r).unwrap_or(f64::NAN),
        grid,
        tol,
        s.r_top,
    )
}
