//! Two-dimensional backward solver for the value-factor equation under a
//! square-root stochastic volatility model:
//!
//! ```text
//!     u_t + (nu/2) u_ss + (nu c^2/2) u_nunu + alpha (theta - nu) u_nu
//!         + c nu rho u_snu - vol(t,nu,s) |u|^p = 0.
//! ```
//!
//! This is the route through which non-quadratic cost exponents are
//! exercised; the quadratic case reduces to the 1D engine when the variance
//! process degenerates (`c, alpha -> 0`).
//!
//! Scheme: explicit Euler in time with CFL-limited sub-steps, central
//! differences for the second derivatives, upwind for the mean-reversion
//! drift, a 4-point stencil for the mixed term, and the same exact pointwise
//! flow for the `|u|^p` reaction as the 1D engine. The variance axis is open
//! at `nu = 0`: the drift points into the domain there (Feller), so the
//! bottom row takes a one-sided drift stencil and no boundary data.

use crate::error::{Error, Result};
use crate::model::{analytic_blowup_profile, SVParams};
use crate::pde1d::{linspace, TerminalSpec, TimeMesh, TruncStep};

pub use crate::pde1d::optimal_rate as optimal_rate_sv;

/// Resolution and truncation policy for the 2D solver.
#[derive(Debug, Clone)]
pub struct SolveSpecSv {
    /// Largest variance node; `None` picks `theta + 8 c sqrt(theta/(2 alpha))`.
    pub nu_max: Option<f64>,
    pub n_nu: usize,
    pub s_min: f64,
    pub s_max: f64,
    pub n_s: usize,
    pub nt: usize,
    pub t_cut: f64,
    pub tol: f64,
    pub trunc_schedule: Vec<f64>,
    pub horizon: f64,
}

impl Default for SolveSpecSv {
    fn default() -> Self {
        SolveSpecSv {
            nu_max: None,
            n_nu: 96,
            s_min: -6.0,
            s_max: 6.0,
            n_s: 96,
            nt: 400,
            t_cut: 0.05,
            tol: 2e-3,
            trunc_schedule: vec![1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8],
            horizon: 1.0,
        }
    }
}

/// Variance axis `(0, nu_max]`: nodes `j dnu` for `j = 1..=n` (no node at 0).
pub fn nu_axis(nu_max: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && nu_max > 0.0);
    let dnu = nu_max / n as f64;
    (1..=n).map(|j| j as f64 * dnu).collect()
}

/// Default far-field cap for the variance axis: stationary mean plus eight
/// stationary standard deviations.
pub fn default_nu_max(sv: &SVParams) -> f64 {
    sv.theta + 8.0 * sv.c * (sv.theta / (2.0 * sv.alpha)).sqrt()
}

/// Discretized value factor over `(nu, s)`.
#[derive(Debug, Clone)]
pub struct Grid2D {
    pub nu: Vec<f64>,
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    /// `values[j][i_nu * n_s + i_s]` at time `t[j]`.
    pub values: Vec<Vec<f64>>,
    pub trunc_level: f64,
    pub cert: Vec<TruncStep>,
}

impl Grid2D {
    pub fn n_s(&self) -> usize {
        self.s.len()
    }

    pub fn n_nu(&self) -> usize {
        self.nu.len()
    }

    pub fn at(&self, jt: usize, i_nu: usize, i_s: usize) -> f64 {
        self.values[jt][i_nu * self.n_s() + i_s]
    }

    /// Values along the price axis at one time level and one variance node.
    pub fn s_slice(&self, jt: usize, i_nu: usize) -> &[f64] {
        let ns = self.n_s();
        &self.values[jt][i_nu * ns..(i_nu + 1) * ns]
    }

    /// Index of the variance node equal to `nu` (tolerance 1e-9), if any.
    pub fn nu_index(&self, nu: f64) -> Option<usize> {
        self.nu.iter().position(|&v| (v - nu).abs() < 1e-9)
    }
}

fn flow(y: f64, a: f64, p: f64) -> Result<f64> {
    if a == 0.0 || y == 0.0 {
        return Ok(y);
    }
    if p == 2.0 {
        let denom = 1.0 + a * y;
        if denom <= 0.0 {
            return Err(Error::AssumptionViolated {
                which: format!("negative branch explodes within one step (1 + a y = {denom:.3e})"),
            });
        }
        return Ok(y / denom);
    }
    let pm1 = p - 1.0;
    if y > 0.0 {
        Ok(y * (1.0 + pm1 * a * y.powf(pm1)).powf(-1.0 / pm1))
    } else {
        let m = -y;
        let bracket = m.powf(1.0 - p) - pm1 * a;
        if bracket <= 0.0 {
            return Err(Error::AssumptionViolated {
                which: format!("negative branch explodes within one step (bracket = {bracket:.3e})"),
            });
        }
        Ok(-bracket.powf(-1.0 / pm1))
    }
}

/// One fixed-truncation backward solve.
pub fn solve_sv_truncated(
    spec: &SolveSpecSv,
    sv: &SVParams,
    terminal: &TerminalSpec,
    trunc_n: f64,
    p: f64,
    vol: &dyn Fn(f64, f64, f64) -> f64,
) -> Result<Grid2D> {
    if !sv.feller_ok() {
        return Err(Error::AssumptionViolated {
            which: format!(
                "feller: 2 alpha theta = {:.6e} <= c^2 = {:.6e}",
                2.0 * sv.alpha * sv.theta,
                sv.c * sv.c
            ),
        });
    }
    if spec.n_nu < 8 || spec.n_s < 8 || spec.nt < 8 {
        return Err(Error::DomainError("2d grid too coarse".into()));
    }
    let nu = nu_axis(spec.nu_max.unwrap_or_else(|| default_nu_max(sv)), spec.n_nu);
    let s = linspace(spec.s_min, spec.s_max, spec.n_s);
    let n_nu = nu.len();
    let n_s = s.len();
    let dnu = nu[1] - nu[0];
    let ds = s[1] - s[0];

    let mesh = if terminal.has_singular() {
        TimeMesh::terminal_refined(0.0, spec.horizon, spec.nt)
    } else {
        TimeMesh::uniform(0.0, spec.horizon, spec.nt)
    };

    // Stability bound for the explicit step, over the whole axis.
    let mut rate_bound = 0.0f64;
    for &nui in &nu {
        let r = nui / (ds * ds)
            + nui * sv.c * sv.c / (dnu * dnu)
            + (sv.c * nui * sv.rho).abs() / (dnu * ds)
            + (sv.alpha * (sv.theta - nui)).abs() / dnu;
        rate_bound = rate_bound.max(r);
    }
    let dt_cfl = 0.4 / rate_bound.max(1e-12);

    let row = terminal.sample(&s, trunc_n);
    let mut u: Vec<f64> = (0..n_nu).flat_map(|_| row.iter().cloned()).collect();
    let mut levels = vec![u.clone()];
    let mut vol_min = f64::INFINITY;
    let mut scratch = vec![0.0f64; u.len()];

    for j in (0..mesh.levels.len() - 1).rev() {
        let t_new = mesh.levels[j];
        let t_old = mesh.levels[j + 1];
        let dt_full = t_old - t_new;
        let n_sub = (dt_full / dt_cfl).ceil().max(1.0) as usize;
        let h = dt_full / n_sub as f64;
        for sub in 0..n_sub {
            let t_hi = t_old - sub as f64 * h;
            let t_mid = t_hi - 0.5 * h;
            // Reaction first (matching the 1D engine's split order): exact
            // pointwise flow of y' = vol |y|^p.
            for i in 0..n_nu {
                for k in 0..n_s {
                    let idx = i * n_s + k;
                    let v = vol(t_mid, nu[i], s[k]);
                    if !v.is_finite() || v < 0.0 {
                        return Err(Error::InstabilityDetected {
                            t: t_mid,
                            detail: format!("vol({t_mid}, {}, {}) = {v}", nu[i], s[k]),
                        });
                    }
                    vol_min = vol_min.min(v);
                    scratch[idx] = flow(u[idx], v * h, p)?;
                }
            }
            std::mem::swap(&mut u, &mut scratch);
            // Explicit diffusion/drift step.
            for i in 0..n_nu {
                let nui = nu[i];
                let drift = sv.alpha * (sv.theta - nui);
                for k in 0..n_s {
                    let idx = i * n_s + k;
                    let uc = u[idx];
                    let mut lu = 0.0;
                    if k > 0 && k + 1 < n_s {
                        lu += 0.5 * nui * (u[idx + 1] - 2.0 * uc + u[idx - 1]) / (ds * ds);
                    }
                    if i > 0 && i + 1 < n_nu {
                        lu += 0.5 * nui * sv.c * sv.c * (u[idx + n_s] - 2.0 * uc + u[idx - n_s]) / (dnu * dnu);
                        if k > 0 && k + 1 < n_s {
                            lu += sv.c * nui * sv.rho
                                * (u[idx + n_s + 1] - u[idx + n_s - 1] - u[idx - n_s + 1] + u[idx - n_s - 1])
                                / (4.0 * dnu * ds);
                        }
                    }
                    // Upwind drift; one-sided at the open nu = 0 boundary and
                    // at the far-field cap.
                    if drift > 0.0 {
                        if i + 1 < n_nu {
                            lu += drift * (u[idx + n_s] - uc) / dnu;
                        }
                    } else if i > 0 {
                        lu += drift * (uc - u[idx - n_s]) / dnu;
                    }
                    scratch[idx] = uc + h * lu;
                }
            }
            std::mem::swap(&mut u, &mut scratch);
        }
        // Guard: finite and below ten times the blow-up envelope.
        let mut cap = f64::INFINITY;
        if vol_min > 0.0 && t_new < spec.horizon {
            if let Ok(env) = analytic_blowup_profile(p, vol_min, t_new, spec.horizon) {
                cap = 10.0 * (env + trunc_n.max(0.0) + 1.0);
            }
        }
        for &ui in &u {
            if !ui.is_finite() {
                return Err(Error::InstabilityDetected { t: t_new, detail: "non-finite node value".into() });
            }
            if ui > cap {
                return Err(Error::InstabilityDetected {
                    t: t_new,
                    detail: format!("node value {ui:.3e} above 10x blow-up envelope"),
                });
            }
        }
        levels.push(u.clone());
    }
    levels.reverse();
    Ok(Grid2D { nu, s, t: mesh.levels, values: levels, trunc_level: trunc_n, cert: Vec::new() })
}

/// Truncation-schedule loop around [`solve_sv_truncated`], as in the 1D engine.
pub fn solve_sv(
    spec: &SolveSpecSv,
    sv: &SVParams,
    terminal: &TerminalSpec,
    p: f64,
    vol: &dyn Fn(f64, f64, f64) -> f64,
) -> Result<Grid2D> {
    if !terminal.has_singular() {
        return solve_sv_truncated(spec, sv, terminal, 0.0f64.max(terminal.floor()), p, vol);
    }
    let t_limit = spec.horizon - spec.t_cut;
    let mut prev: Option<Grid2D> = None;
    let mut cert: Vec<TruncStep> = Vec::new();
    let mut last_delta = f64::INFINITY;
    for &n in &spec.trunc_schedule {
        let mut grid = solve_sv_truncated(spec, sv, terminal, n, p, vol)?;
        if let Some(ref pg) = prev {
            let mut sup = 0.0f64;
            let mut min_inc = f64::INFINITY;
            for (j, t) in grid.t.iter().enumerate() {
                for (a, b) in grid.values[j].iter().zip(pg.values[j].iter()) {
                    let d = a - b;
                    min_inc = min_inc.min(d);
                    if *t <= t_limit {
                        sup = sup.max(d.abs() / (1.0 + a.abs()));
                    }
                }
            }
            cert.push(TruncStep { n, sup_delta: sup, min_increase: min_inc });
            last_delta = sup;
            if sup < spec.tol {
                grid.trunc_level = f64::INFINITY;
                grid.cert = cert;
                return Ok(grid);
            }
        }
        prev = Some(grid);
    }
    Err(Error::NoConvergence { last_delta, tol: spec.tol })
}
