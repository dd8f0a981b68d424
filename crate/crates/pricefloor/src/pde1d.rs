//! Backward grid solver for the scale-free value-factor equation
//!
//! ```text
//!     u_t + (1/2) u_xx - vol(t,x) |u|^p = 0,        t < T,
//! ```
//!
//! marched from a (possibly singular) terminal condition at `t = T` down to
//! `t = 0`. Singular terminal data are handled by truncation from below:
//! solve with terminal `min(Phi, n)` for an increasing schedule of levels
//! `n` until the solution stops moving away from the terminal layer. The
//! scheme splits each backward step into an exact pointwise solve of
//! `y' = vol |y|^p` (which keeps the blow-up layer and the negative branch
//! stable at any step size) and an implicit tridiagonal diffusion solve.
//! Both half-steps are monotone, so discrete comparison, the lower bound
//! `z_t`, and the blow-up envelope hold by construction.
//!
//! Time steps refine geometrically toward the terminal layer
//! (`dt ~ (T - t)`) until they reach the nominal uniform width.

use crate::error::{Error, Result};
use crate::model::analytic_blowup_profile;

/// Ascending time levels; `levels[0]` is the earliest time, the last entry
/// the terminal time of the marched window.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMesh {
    pub levels: Vec<f64>,
}

impl TimeMesh {
    pub fn uniform(t0: f64, t1: f64, n: usize) -> Self {
        assert!(t1 > t0 && n >= 1);
        let h = (t1 - t0) / n as f64;
        let mut levels: Vec<f64> = (0..n).map(|j| t0 + j as f64 * h).collect();
        levels.push(t1);
        TimeMesh { levels }
    }

    /// Uniform steps of nominal width `(t1-t0)/n` away from `t1`, shrinking
    /// geometrically into the terminal layer down to a first step of width
    /// `h^2/(t1-t0)`.
    pub fn terminal_refined(t0: f64, t1: f64, n: usize) -> Self {
        assert!(t1 > t0 && n >= 2);
        let span = t1 - t0;
        let h = span / n as f64;
        let mut taus = vec![0.0f64];
        let mut tau = 0.0;
        let mut step = (h * h / span).min(h);
        while tau + step < span * (1.0 - 1e-12) {
            tau += step;
            taus.push(tau);
            step = (step * 1.1).min(h);
        }
        taus.push(span);
        let mut levels: Vec<f64> = taus.iter().rev().map(|&tau| t1 - tau).collect();
        levels[0] = t0;
        TimeMesh { levels }
    }

    /// Concatenate two meshes sharing an endpoint (`main` ends where `end` starts).
    pub fn composite(main: &TimeMesh, end: &TimeMesh) -> Self {
        let last = *main.levels.last().unwrap();
        let first = end.levels[0];
        assert!((last - first).abs() < 1e-12, "meshes do not share an endpoint");
        let mut levels = main.levels.clone();
        levels.extend_from_slice(&end.levels[1..]);
        TimeMesh { levels }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Index of the level equal to `t` (within a strict tolerance).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.levels.iter().position(|&lv| (lv - t).abs() < 1e-10)
    }
}

/// Evenly spaced axis including both endpoints.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && b > a);
    let h = (b - a) / (n - 1) as f64;
    let mut x: Vec<f64> = (0..n - 1).map(|i| a + i as f64 * h).collect();
    x.push(b);
    x
}

/// Terminal data for the value factor. Singular parts stand for `+inf` and
/// are materialized as the truncation level when a grid is built.
#[derive(Debug, Clone)]
pub enum TerminalSpec {
    /// `+inf` on `[ell, inf)`, the constant `neg` (normally `-K_c`) below.
    ThresholdSingular { ell: f64, neg: f64 },
    /// Same threshold datum with the jump replaced by a linear ramp of width
    /// `ramp` just below `ell`; used for mollified-limit studies.
    ThresholdMollified { ell: f64, neg: f64, ramp: f64 },
    /// The constant `neg` everywhere (no singular part).
    ConstantNeg(f64),
    /// `+inf` everywhere: full liquidation is always forced.
    AllSingular,
    /// Explicit nodal values (must be bounded below by the terminal floor).
    Custom(Vec<f64>),
}

impl TerminalSpec {
    pub fn has_singular(&self) -> bool {
        match self {
            TerminalSpec::ThresholdSingular { .. } | TerminalSpec::ThresholdMollified { .. } => true,
            TerminalSpec::AllSingular => true,
            TerminalSpec::ConstantNeg(_) | TerminalSpec::Custom(_) => false,
        }
    }

    /// Most negative value the datum can take.
    pub fn floor(&self) -> f64 {
        match self {
            TerminalSpec::ThresholdSingular { neg, .. } | TerminalSpec::ThresholdMollified { neg, .. } => *neg,
            TerminalSpec::ConstantNeg(neg) => *neg,
            TerminalSpec::AllSingular => 0.0,
            TerminalSpec::Custom(v) => v.iter().cloned().fold(f64::INFINITY, f64::min),
        }
    }

    /// Nodal values with the singular part truncated at `trunc`.
    pub fn sample(&self, x: &[f64], trunc: f64) -> Vec<f64> {
        match self {
            TerminalSpec::ThresholdSingular { ell, neg } => {
                x.iter().map(|&xi| if xi >= *ell { trunc } else { *neg }).collect()
            }
            TerminalSpec::ThresholdMollified { ell, neg, ramp } => x
                .iter()
                .map(|&xi| {
                    if xi >= *ell {
                        trunc
                    } else if xi <= *ell - *ramp {
                        *neg
                    } else {
                        (trunc - *neg) * (xi - (*ell - *ramp)) / *ramp + *neg
                    }
                })
                .collect(),
            TerminalSpec::ConstantNeg(neg) => vec![*neg; x.len()],
            TerminalSpec::AllSingular => vec![trunc; x.len()],
            TerminalSpec::Custom(v) => {
                assert_eq!(v.len(), x.len(), "custom terminal data must match the axis");
                v.iter().map(|&vi| vi.min(trunc)).collect()
            }
        }
    }
}

/// Lateral boundary treatment for a march.
#[derive(Clone, Copy)]
pub enum BcSpec<'a> {
    /// `u_xx = 0` at the boundary node: the node evolves by the reaction
    /// alone, which matches the x-independent far-field solutions.
    ZeroCurvature,
    /// Pinned value, applied at every time level below the terminal one.
    Dirichlet(f64),
    /// Pinned to a precomputed trace, one value per mesh level.
    Trace(&'a [f64]),
}

/// Discretized value factor over one time window.
#[derive(Debug, Clone)]
pub struct Grid1D {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    /// `values[j][i]` at time `t[j]`, node `x[i]`; the last level stores the
    /// truncated terminal datum, never a raw infinity.
    pub values: Vec<Vec<f64>>,
    /// Truncation level the grid was solved at; `f64::INFINITY` marks a
    /// converged singular solve.
    pub trunc_level: f64,
    /// Whether the terminal datum had a singular part (drives the analytic
    /// close-out handling in the simulator).
    pub singular_terminal: bool,
    /// One entry per truncation step: certifies the monotone increase.
    pub cert: Vec<TruncStep>,
}

/// Record of one step of the truncation schedule.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TruncStep {
    pub n: f64,
    /// Largest nodal change against the previous level over `t <= T - t_cut`,
    /// relative to the local magnitude (`|du| / (1 + |u|)`).
    pub sup_delta: f64,
    /// Most negative nodal increase over the whole grid (certifies monotonicity
    /// when >= -1e-12).
    pub min_increase: f64,
}

impl Grid1D {
    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn nt(&self) -> usize {
        self.t.len()
    }

    /// Bilinear interpolation in `(t, x)`, clamped to the grid's span.
    pub fn interp(&self, t: f64, x: f64) -> f64 {
        let (jt, wt) = bracket(&self.t, t);
        let (ix, wx) = bracket(&self.x, x);
        let lo = &self.values[jt];
        let hi = &self.values[jt + 1];
        let v0 = lo[ix] * (1.0 - wx) + lo[ix + 1] * wx;
        let v1 = hi[ix] * (1.0 - wx) + hi[ix + 1] * wx;
        v0 * (1.0 - wt) + v1 * wt
    }

    /// Index of the node equal to `x` (tolerance 1e-9), if any.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        self.x.iter().position(|&xi| (xi - x).abs() < 1e-9)
    }

    /// Column of values at one spatial node across all time levels.
    pub fn trace_at(&self, ix: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[ix]).collect()
    }

    /// Largest absolute nodal difference against another grid on identical axes.
    pub fn sup_diff(&self, other: &Grid1D) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        let mut sup = 0.0f64;
        for (a, b) in self.values.iter().zip(other.values.iter()) {
            for (&ai, &bi) in a.iter().zip(b.iter()) {
                sup = sup.max((ai - bi).abs());
            }
        }
        sup
    }

    /// A constant-in-space-and-time grid; handy as a degenerate strategy input.
    pub fn constant(x: Vec<f64>, t: Vec<f64>, value: f64) -> Grid1D {
        let row = vec![value; x.len()];
        let values = vec![row; t.len()];
        Grid1D { x, t, values, trunc_level: f64::INFINITY, singular_terminal: false, cert: Vec::new() }
    }
}

/// Locate `v` in ascending `axis`: returns the left index and the convex
/// weight of the right node, clamped to the axis span.
fn bracket(axis: &[f64], v: f64) -> (usize, f64) {
    let n = axis.len();
    if v <= axis[0] {
        return (0, 0.0);
    }
    if v >= axis[n - 1] {
        return (n - 2, 1.0);
    }
    let mut lo = 0usize;
    let mut hi = n - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if axis[mid] <= v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = (v - axis[lo]) / (axis[lo + 1] - axis[lo]);
    (lo, w)
}

/// Exact flow of `y' = vol |y|^p` over a backward step, i.e. the solution at
/// distance `a = vol * dt` of `dy/dtau = -|y|^p` starting from `y`.
///
/// Monotone in `y` for every `p > 1`, exact on constants, and the negative
/// branch reports the blow-up that occurs when the liquidity-balance
/// condition is violated instead of overflowing.
fn nonlinear_flow(y: f64, a: f64, p: f64) -> Result<f64> {
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

/// Thomas solve of a tridiagonal system; `diag`/`rhs` are consumed as scratch.
fn solve_tridiag(lower: &[f64], diag: &mut [f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    for i in 1..n {
        let w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    }
}

struct Guard {
    p: f64,
    /// Smallest vol seen so far; the blow-up envelope uses it as a lower bound.
    vol_min: f64,
    /// Largest positive terminal value (truncation level or custom data max).
    terminal_max: f64,
    /// Time at which the singular layer sits (end of the global window).
    t_end: f64,
    reaction: bool,
}

impl Guard {
    fn check(&self, t: f64, u: &[f64]) -> Result<()> {
        let mut cap = f64::INFINITY;
        if self.reaction && self.vol_min > 0.0 && t < self.t_end {
            if let Ok(env) = analytic_blowup_profile(self.p, self.vol_min, t, self.t_end) {
                cap = 10.0 * (env + self.terminal_max.max(0.0) + 1.0);
            }
        }
        for &ui in u {
            if !ui.is_finite() {
                return Err(Error::InstabilityDetected { t, detail: "non-finite node value".into() });
            }
            if ui > cap {
                return Err(Error::InstabilityDetected {
                    t,
                    detail: format!("node value {ui:.3e} above 10x blow-up envelope"),
                });
            }
        }
        Ok(())
    }
}

/// One backward march over `mesh`. `mask`, when present, gives a per-node
/// weight in `[0, 1]` multiplying the reaction (the trading indicator of the
/// pause regime). `reaction = false` drops the nonlinearity entirely (the
/// waiting-state equation is pure diffusion).
#[allow(clippy::too_many_arguments)]
fn march(
    x: &[f64],
    mesh: &TimeMesh,
    terminal: Vec<f64>,
    p: f64,
    vol: &dyn Fn(f64, f64) -> f64,
    left: BcSpec,
    right: BcSpec,
    mask: Option<&[f64]>,
    reaction: bool,
    guard_terminal_max: f64,
    guard_t_end: f64,
) -> Result<Vec<Vec<f64>>> {
    let nx = x.len();
    let nt = mesh.levels.len();
    assert_eq!(terminal.len(), nx);
    if let Some(m) = mask {
        assert_eq!(m.len(), nx);
    }
    let dx = x[1] - x[0];
    let mut guard = Guard {
        p,
        vol_min: f64::INFINITY,
        terminal_max: guard_terminal_max,
        t_end: guard_t_end,
        reaction,
    };

    let mut levels = Vec::with_capacity(nt);
    levels.push(terminal);

    let mut diag = vec![0.0f64; nx];
    let mut lower = vec![0.0f64; nx];
    let mut upper = vec![0.0f64; nx];
    let mut work = vec![0.0f64; nx];

    for j in (0..nt - 1).rev() {
        let t_new = mesh.levels[j];
        let t_old = mesh.levels[j + 1];
        let dt = t_old - t_new;
        let t_mid = 0.5 * (t_old + t_new);
        let prev = levels.last().unwrap();

        // Reaction half-step: exact scalar flow node by node.
        if reaction {
            for i in 0..nx {
                let v = vol(t_mid, x[i]);
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InstabilityDetected {
                        t: t_mid,
                        detail: format!("vol({t_mid}, {}) = {v}", x[i]),
                    });
                }
                guard.vol_min = guard.vol_min.min(v);
                let w = mask.map_or(1.0, |m| m[i]);
                work[i] = nonlinear_flow(prev[i], v * w * dt, p)?;
            }
        } else {
            work.copy_from_slice(prev);
        }

        // Implicit diffusion: (I - dt/2 D2) u_new = work, with identity rows
        // at the two lateral nodes (zero curvature or pinned data).
        let r = 0.5 * dt / (dx * dx);
        for i in 1..nx - 1 {
            lower[i] = -r;
            diag[i] = 1.0 + 2.0 * r;
            upper[i] = -r;
        }
        lower[0] = 0.0;
        diag[0] = 1.0;
        upper[0] = 0.0;
        lower[nx - 1] = 0.0;
        diag[nx - 1] = 1.0;
        upper[nx - 1] = 0.0;
        match left {
            BcSpec::ZeroCurvature => {}
            BcSpec::Dirichlet(v) => work[0] = v,
            BcSpec::Trace(tr) => work[0] = tr[j],
        }
        match right {
            BcSpec::ZeroCurvature => {}
            BcSpec::Dirichlet(v) => work[nx - 1] = v,
            BcSpec::Trace(tr) => work[nx - 1] = tr[j],
        }
        solve_tridiag(&lower, &mut diag, &upper, &mut work);

        guard.check(t_new, &work)?;
        levels.push(work.clone());
    }

    levels.reverse();
    Ok(levels)
}

/// Spatial/temporal resolution and truncation policy for the solvers.
#[derive(Debug, Clone)]
pub struct SolveSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub nt: usize,
    /// Terminal-layer offset: truncation convergence is measured on `t <= T - t_cut`.
    pub t_cut: f64,
    /// Sup-norm tolerance for the truncation schedule.
    pub tol: f64,
    /// Increasing truncation levels to try.
    pub trunc_schedule: Vec<f64>,
    pub horizon: f64,
}

impl Default for SolveSpec {
    fn default() -> Self {
        SolveSpec {
            x_min: -6.0,
            x_max: 6.0,
            nx: 961,
            nt: 800,
            t_cut: 0.05,
            tol: 2e-3,
            trunc_schedule: vec![1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8],
            horizon: 1.0,
        }
    }
}

impl SolveSpec {
    fn check(&self) -> Result<()> {
        if self.nx < 50 || self.nt < 50 {
            return Err(Error::DomainError(format!(
                "grid too coarse: nx = {}, nt = {} (need >= 50 each)",
                self.nx, self.nt
            )));
        }
        if !(self.x_max > self.x_min) || !(self.horizon > 0.0) {
            return Err(Error::DomainError("empty solve domain".into()));
        }
        Ok(())
    }

    fn axis(&self) -> Vec<f64> {
        linspace(self.x_min, self.x_max, self.nx)
    }

    /// Axis anchored at `anchor` so that the anchor is an exact node; when
    /// `also_hit` is given, the spacing is adjusted so that `anchor + also_hit`
    /// lands on a node as well.
    fn anchored_axis(&self, anchor: f64, also_hit: Option<f64>) -> Vec<f64> {
        let dx0 = (self.x_max - self.x_min) / (self.nx - 1) as f64;
        let dx = match also_hit {
            Some(gap) => {
                let m = (gap / dx0).round().max(1.0);
                gap / m
            }
            None => dx0,
        };
        let below = ((anchor - self.x_min) / dx).ceil().max(0.0) as i64;
        let above = ((self.x_max - anchor) / dx).ceil().max(1.0) as i64;
        (-below..=above).map(|i| anchor + i as f64 * dx).collect()
    }
}

/// Solve with the terminal datum truncated at a fixed level `trunc_n`.
pub fn solve_truncated(
    spec: &SolveSpec,
    terminal: &TerminalSpec,
    trunc_n: f64,
    p: f64,
    vol: &dyn Fn(f64, f64) -> f64,
) -> Result<Grid1D> {
    spec.check()?;
    if trunc_n < terminal.floor() {
        return Err(Error::DomainError(format!(
            "truncation level {trunc_n} below the terminal floor {}",
            terminal.floor()
        )));
    }
    let x = spec.axis();
    let mesh = if terminal.has_singular() {
        TimeMesh::terminal_refined(0.0, spec.horizon, spec.nt)
    } else {
        TimeMesh::uniform(0.0, spec.horizon, spec.nt)
    };
    let data = terminal.sample(&x, trunc_n);
    let values = march(
        &x,
        &mesh,
        data,
        p,
        vol,
        BcSpec::ZeroCurvature,
        BcSpec::ZeroCurvature,
        None,
        true,
        trunc_n,
        spec.horizon,
    )?;
    let singular_terminal = terminal.has_singular();
    Ok(Grid1D { x, t: mesh.levels, values, trunc_level: trunc_n, singular_terminal, cert: Vec::new() })
}

/// Largest magnitude-relative nodal change between two solves restricted to
/// `t <= t_limit`, plus the most negative absolute nodal increase anywhere
/// (monotonicity certificate). The relative normalization keeps the stopping
/// rule meaningful next to the blow-up layer, where nodal values scale like
/// `1/(T - t_cut)`.
fn trunc_delta(prev: &Grid1D, next: &Grid1D, t_limit: f64) -> (f64, f64) {
    let mut sup = 0.0f64;
    let mut min_inc = f64::INFINITY;
    for (j, t) in next.t.iter().enumerate() {
        for i in 0..next.x.len() {
            let d = next.values[j][i] - prev.values[j][i];
            min_inc = min_inc.min(d);
            if *t <= t_limit {
                sup = sup.max(d.abs() / (1.0 + next.values[j][i].abs()));
            }
        }
    }
    (sup, min_inc)
}

/// Minimal solution with a genuinely singular terminal datum: run
/// [`solve_truncated`] over the increasing schedule until the solution stops
/// changing away from the terminal layer (largest nodal change relative to
/// the local magnitude below `tol`). The returned grid carries the
/// monotonicity certificate and is marked `trunc_level = +inf`.
pub fn solve_singular(
    spec: &SolveSpec,
    terminal: &TerminalSpec,
    p: f64,
    vol: &dyn Fn(f64, f64) -> f64,
) -> Result<Grid1D> {
    if !terminal.has_singular() {
        return Err(Error::DomainError("terminal datum has no singular part".into()));
    }
    let t_limit = spec.horizon - spec.t_cut;
    let mut prev: Option<Grid1D> = None;
    let mut cert: Vec<TruncStep> = Vec::new();
    let mut last_delta = f64::INFINITY;
    for &n in &spec.trunc_schedule {
        let mut grid = solve_truncated(spec, terminal, n, p, vol)?;
        if let Some(ref prev_grid) = prev {
            let (sup, min_inc) = trunc_delta(prev_grid, &grid, t_limit);
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

/// Stop-at-first-hit regime on an explicit axis and mesh: the floor node is
/// pinned at `floor_value` below the terminal level, the terminal datum is
/// singular on the whole axis. Runs the full truncation schedule.
pub fn solve_regime2_core(
    x: &[f64],
    mesh: &TimeMesh,
    spec: &SolveSpec,
    p: f64,
    vol: &dyn Fn(f64, f64) -> f64,
    floor_value: f64,
) -> Result<Grid1D> {
    let t_end = *mesh.levels.last().unwrap();
    let t_limit = t_end - spec.t_cut;
    let mut prev: Option<Grid1D> = None;
    let mut cert: Vec<TruncStep> = Vec::new();
    let mut last_delta = f64::INFINITY;
    for &n in &spec.trunc_schedule {
        let data = vec![n; x.len()];
        let values = march(
            x,
            mesh,
            data,
            p,
            vol,
            BcSpec::Dirichlet(floor_value),
            BcSpec::ZeroCurvature,
            None,
            true,
            n,
            t_end,
        )?;
        let mut grid =
            Grid1D { x: x.to_vec(), t: mesh.levels.clone(), values, trunc_level: n, singular_terminal: true, cert: Vec::new() };
        if let Some(ref prev_grid) = prev {
            let (sup, min_inc) = trunc_delta(prev_grid, &grid, t_limit);
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

/// Stop-at-first-hit regime over `[ell, x_max] x [0, T]`. `spec.x_min` is
/// taken as the floor `ell`.
pub fn solve_regime2(spec: &SolveSpec, p: f64, vol: &dyn Fn(f64, f64) -> f64, floor_value: f64) -> Result<Grid1D> {
    spec.check()?;
    let x = linspace(spec.x_min, spec.x_max, spec.nx);
    let mesh = TimeMesh::terminal_refined(0.0, spec.horizon, spec.nt);
    solve_regime2_core(&x, &mesh, spec, p, vol, floor_value)
}

/// Solution of the pause-below regime: the end-window factor on
/// `[T-delta, T] x [ell, x_max]` and the main-stage factor on
/// `[0, T-delta] x (full line)` with the trading indicator masking the
/// nonlinearity above the floor.
#[derive(Debug, Clone)]
pub struct Regime3Solution {
    /// Stop-at-hit factor on the end window `[T-delta, T]`.
    pub end: Grid1D,
    /// Full-line factor on `[0, T-delta]`.
    pub main: Grid1D,
    pub ell: f64,
    pub delta: f64,
}

/// `smooth_eps`: optional width of the linear indicator ramp just above the
/// floor (the sharp indicator is the default; the ramp exists for
/// sensitivity studies).
pub fn solve_regime3(
    spec: &SolveSpec,
    ell: f64,
    delta: f64,
    p: f64,
    vol: &dyn Fn(f64, f64) -> f64,
    floor_value: f64,
    smooth_eps: Option<f64>,
) -> Result<Regime3Solution> {
    spec.check()?;
    if !(delta > 0.0 && delta <= spec.horizon) {
        return Err(Error::DomainError(format!("delta = {delta} outside (0, T]")));
    }
    let t_split = spec.horizon - delta;

    // Stage 1: stop-at-hit on the end window.
    let x_end = linspace(ell, spec.x_max, spec.nx);
    let mesh_end = TimeMesh::terminal_refined(t_split, spec.horizon, spec.nt);
    let end = solve_regime2_core(&x_end, &mesh_end, spec, p, vol, floor_value)?;

    // Stage 2: full line, terminal from the end window, indicator-masked
    // nonlinearity above the floor.
    let x_main = spec.anchored_axis(ell, None);
    let g: Vec<f64> = x_main
        .iter()
        .map(|&s| if s > ell { end.interp(t_split, s) } else { floor_value })
        .collect();
    if t_split <= f64::EPSILON {
        let main = Grid1D {
            x: x_main,
            t: vec![0.0],
            values: vec![g],
            trunc_level: f64::INFINITY,
            singular_terminal: false,
            cert: Vec::new(),
        };
        return Ok(Regime3Solution { end, main, ell, delta });
    }
    let mask: Vec<f64> = x_main
        .iter()
        .map(|&s| match smooth_eps {
            None => {
                if s > ell {
                    1.0
                } else {
                    0.0
                }
            }
            Some(eps) => {
                if s > ell + eps {
                    1.0
                } else if s > ell {
                    (s - ell) / eps
                } else {
                    0.0
                }
            }
        })
        .collect();
    let mesh_main = TimeMesh::uniform(0.0, t_split, spec.nt);
    let g_max = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let values = march(
        &x_main,
        &mesh_main,
        g,
        p,
        vol,
        BcSpec::ZeroCurvature,
        BcSpec::ZeroCurvature,
        Some(&mask),
        true,
        g_max,
        spec.horizon,
    )?;
    let main = Grid1D {
        x: x_main,
        t: mesh_main.levels,
        values,
        trunc_level: f64::INFINITY,
        singular_terminal: false,
        cert: Vec::new(),
    };
    Ok(Regime3Solution { end, main, ell, delta })
}

/// Coupled trading/waiting recursion of the buffered pause regime.
///
/// The trading-state factors `u1(n)` live on `[0, T-delta] x [ell, x_max]`,
/// the waiting-state factors `u0(n)` on `[0, T-delta] x [x_min, ell+b]`, and
/// every trading factor continues across `[T-delta, T]` with the shared
/// end-window slab (the same values for every `n`).
#[derive(Debug, Clone)]
pub struct RecursionState {
    /// Shared end-window slab on `[T-delta, T] x [ell, x_max]`.
    pub u_inf: Grid1D,
    /// `u1s[n-1]` = trading factor with `n` trading intervals left, on `[0, T-delta]`.
    pub u1s: Vec<Grid1D>,
    /// `u0s[n-1]` = waiting factor with `n` trading intervals left.
    pub u0s: Vec<Grid1D>,
    pub ell: f64,
    pub b: f64,
    pub delta: f64,
    pub floor_value: f64,
    /// The composite mesh the first trading factor was solved on (main ++ end).
    pub mesh: TimeMesh,
}

impl RecursionState {
    pub fn budget(&self) -> usize {
        self.u1s.len()
    }

    /// Trading factor `u1(n)` glued with the shared end-window slab into a
    /// single grid over `[0, T]`; `n` is 1-based.
    pub fn u1_full(&self, n: usize) -> Grid1D {
        let main = &self.u1s[n - 1];
        let mut t = main.t.clone();
        t.extend_from_slice(&self.u_inf.t[1..]);
        let mut values = main.values.clone();
        values.extend(self.u_inf.values[1..].iter().cloned());
        Grid1D {
            x: main.x.clone(),
            t,
            values,
            trunc_level: f64::INFINITY,
            singular_terminal: true,
            cert: main.cert.clone(),
        }
    }

    /// Pointwise extrema of `u1(n+1) - u1(n)` over the main stage.
    pub fn u1_increment_range(&self, n: usize) -> (f64, f64) {
        let a = &self.u1s[n - 1];
        let b = &self.u1s[n];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (ra, rb) in a.values.iter().zip(b.values.iter()) {
            for (&va, &vb) in ra.iter().zip(rb.iter()) {
                let d = vb - va;
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
        (lo, hi)
    }
}

pub fn solve_regime4(
    spec: &SolveSpec,
    ell: f64,
    delta: f64,
    b: f64,
    n_switches: u32,
    p: f64,
    vol: &dyn Fn(f64, f64) -> f64,
    floor_value: f64,
) -> Result<RecursionState> {
    spec.check()?;
    if !(b > 0.0) {
        return Err(Error::DomainError(format!("re-entry buffer b = {b} must be > 0")));
    }
    if !(delta > 0.0 && delta < spec.horizon) {
        return Err(Error::DomainError(format!("delta = {delta} outside (0, T)")));
    }
    if n_switches < 1 {
        return Err(Error::DomainError("need at least one trading interval".into()));
    }
    let t_split = spec.horizon - delta;

    // One axis family with both ell and ell+b on nodes.
    let full_axis = spec.anchored_axis(ell, Some(b));
    let i_ell = full_axis.iter().position(|&v| (v - ell).abs() < 1e-12).unwrap();
    let i_ellb = full_axis.iter().position(|&v| (v - (ell + b)).abs() < 1e-9).unwrap();
    let x1: Vec<f64> = full_axis[i_ell..].to_vec();
    let x0: Vec<f64> = full_axis[..=i_ellb].to_vec();
    let i_ell_in_x0 = i_ell; // x0 starts at full_axis[0]
    let i_ellb_in_x1 = i_ellb - i_ell;

    let mesh_main = TimeMesh::uniform(0.0, t_split, spec.nt);
    let mesh_end = TimeMesh::terminal_refined(t_split, spec.horizon, spec.nt);
    let mesh = TimeMesh::composite(&mesh_main, &mesh_end);
    let split_idx = mesh.index_of(t_split).expect("composite mesh contains the split level");

    // First trading factor: identical to the stop-at-hit solve on the
    // composite mesh. Slice it into the shared end slab and the main stage.
    let r2 = solve_regime2_core(&x1, &mesh, spec, p, vol, floor_value)?;
    let u_inf = Grid1D {
        x: x1.clone(),
        t: r2.t[split_idx..].to_vec(),
        values: r2.values[split_idx..].to_vec(),
        trunc_level: f64::INFINITY,
        singular_terminal: true,
        cert: r2.cert.clone(),
    };
    let u11 = Grid1D {
        x: x1.clone(),
        t: r2.t[..=split_idx].to_vec(),
        values: r2.values[..=split_idx].to_vec(),
        trunc_level: f64::INFINITY,
        singular_terminal: false,
        cert: Vec::new(),
    };

    let mut u1s = vec![u11];
    let mut u0s: Vec<Grid1D> = Vec::new();
    let terminal_u1: Vec<f64> = u_inf.values[0].clone();
    let g_max = terminal_u1.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    for n in 1..=n_switches as usize {
        // Waiting factor with n intervals left: linear diffusion, terminal
        // floor value, pinned to the trading factor at the re-entry level.
        let trace_ellb = u1s[n - 1].trace_at(i_ellb_in_x1);
        let values = march(
            &x0,
            &mesh_main,
            vec![floor_value; x0.len()],
            p,
            vol,
            BcSpec::ZeroCurvature,
            BcSpec::Trace(&trace_ellb),
            None,
            false,
            g_max,
            spec.horizon,
        )?;
        u0s.push(Grid1D {
            x: x0.clone(),
            t: mesh_main.levels.clone(),
            values,
            trunc_level: f64::INFINITY,
            singular_terminal: false,
            cert: Vec::new(),
        });

        if n < n_switches as usize {
            // Next trading factor: floor boundary handed over from the
            // waiting factor with n intervals left.
            let trace_ell = u0s[n - 1].trace_at(i_ell_in_x0);
            let values = march(
                &x1,
                &mesh_main,
                terminal_u1.clone(),
                p,
                vol,
                BcSpec::Trace(&trace_ell),
                BcSpec::ZeroCurvature,
                None,
                true,
                g_max,
                spec.horizon,
            )?;
            u1s.push(Grid1D {
                x: x1.clone(),
                t: mesh_main.levels.clone(),
                values,
                trunc_level: f64::INFINITY,
                singular_terminal: false,
                cert: Vec::new(),
            });
        }
    }

    Ok(RecursionState { u_inf, u1s, u0s, ell, b, delta, floor_value, mesh })
}

/// Trading rate prescribed by the value factor: `-(p-1) vol |u|^{p-1} sgn(u) q`.
/// `sgn(0) = 0`, so the rate vanishes continuously at `u = 0`.
pub fn optimal_rate(u_value: f64, q: f64, p: f64, vol: f64) -> f64 {
    if u_value == 0.0 {
        return 0.0;
    }
    -(p - 1.0) * vol * u_value.abs().powf(p - 1.0) * u_value.signum() * q
}
