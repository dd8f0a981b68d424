//! Monte Carlo simulation of floor-conditioned liquidation strategies.
//!
//! Paths are driven by a unit-variance Brownian motion in the scale-free
//! coordinates (the threshold lives in sigma units). Each path gets its own
//! counter-based random stream keyed by `(seed, path_index)`, so batches can
//! run in parallel and still reproduce byte-for-byte. The position is
//! integrated against a solved value grid with midpoint quadrature and
//! bilinear interpolation; cash is accounted in original price units both by
//! a direct Riemann sum and through the integration-by-parts identity, which
//! serves as a per-path consistency check.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CanonicalParams, ModelParams, RegimeKind, RegimeSpec};
use crate::pde1d::{Grid1D, RecursionState, Regime3Solution};

/// One simulated driver path, `w[0] = 0`, increments `N(0, dt)`.
#[derive(Debug, Clone)]
pub struct BrownianPath {
    pub seed: u64,
    pub index: u64,
    pub n_steps: usize,
    pub dt: f64,
    pub w: Vec<f64>,
}

impl BrownianPath {
    pub fn horizon(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    /// Build a path from explicit samples (synthetic traces in tests).
    pub fn from_samples(w: Vec<f64>, horizon: f64) -> Self {
        assert!(w.len() >= 2);
        let n_steps = w.len() - 1;
        BrownianPath { seed: 0, index: 0, n_steps, dt: horizon / n_steps as f64, w }
    }
}

/// Deterministic path generation: stream `index` of the ChaCha generator
/// seeded with `seed`.
pub fn gen_path(seed: u64, index: u64, n_steps: usize, horizon: f64) -> Result<BrownianPath> {
    gen_path_signed(seed, index, index, n_steps, horizon, false)
}

/// As [`gen_path`] but drawing from an explicit `stream` and optionally
/// flipping the sign of the whole path (antithetic pairing).
pub fn gen_path_signed(
    seed: u64,
    index: u64,
    stream: u64,
    n_steps: usize,
    horizon: f64,
    flip: bool,
) -> Result<BrownianPath> {
    if n_steps < 100 {
        return Err(Error::DomainError(format!("n_steps = {n_steps} too small (need >= 100)")));
    }
    if !(horizon > 0.0) {
        return Err(Error::DomainError("horizon must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let dt = horizon / n_steps as f64;
    let sdt = dt.sqrt();
    let sign = if flip { -1.0 } else { 1.0 };
    let mut w = Vec::with_capacity(n_steps + 1);
    let mut acc = 0.0f64;
    w.push(0.0);
    for _ in 0..n_steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        acc += sign * sdt * z;
        w.push(acc);
    }
    Ok(BrownianPath { seed, index, n_steps, dt, w })
}

/// Trading-permission trace of one path under a regime.
#[derive(Debug, Clone)]
pub struct RegimeTrace {
    /// 1 when trading is allowed at the node.
    pub indicator: Vec<u8>,
    /// Ordinal of the trading interval at each node (0 = not trading).
    pub interval_id: Vec<u32>,
    /// First node strictly below the floor, if any.
    pub tau_ell: Option<usize>,
    /// (floor-hit node, re-entry node) pairs for the buffered regime.
    pub switch_pairs: Vec<(usize, Option<usize>)>,
    /// Number of completed trading intervals.
    pub n_trades: usize,
}

impl RegimeTrace {
    pub fn trading_at_end(&self) -> bool {
        *self.indicator.last().unwrap() == 1
    }
}

pub fn trace_regime(path: &BrownianPath, regime: &RegimeSpec) -> RegimeTrace {
    trace_regime_with(path, regime, false)
}

/// `bridge_correction` additionally registers floor hits that a Brownian
/// bridge would make strictly inside a step whose endpoints both stay above
/// the floor. Off by default: plain grid-point detection is the reference
/// behavior and the correction shifts the hitting statistics at O(sqrt(dt)).
pub fn trace_regime_with(path: &BrownianPath, regime: &RegimeSpec, bridge_correction: bool) -> RegimeTrace {
    let n = path.n_steps;
    let horizon = path.horizon();
    let ell = regime.ell;
    let mut indicator = vec![0u8; n + 1];
    let mut interval_id = vec![0u32; n + 1];
    let mut tau_ell: Option<usize> = None;
    let mut switch_pairs: Vec<(usize, Option<usize>)> = Vec::new();

    // Lazily sampled uniforms for the bridge correction; stream disjoint
    // from the increment stream.
    let mut bridge_rng = if bridge_correction {
        let mut rng = ChaCha8Rng::seed_from_u64(path.seed);
        rng.set_stream(path.index | 1 << 63);
        Some(rng)
    } else {
        None
    };
    let mut crossed_inside = |i: usize| -> bool {
        let Some(rng) = bridge_rng.as_mut() else { return false };
        let a = path.w[i] - ell;
        let b = path.w[i + 1] - ell;
        if a <= 0.0 || b <= 0.0 {
            return false;
        }
        let p = (-2.0 * a * b / path.dt).exp();
        let u: f64 = rand::Rng::gen(rng);
        u < p
    };

    match regime.kind {
        RegimeKind::FullLiquidation => {
            indicator.fill(1);
            interval_id.fill(1);
        }
        RegimeKind::TerminalThreshold => {
            indicator.fill(1);
            interval_id.fill(1);
            tau_ell = path.w.iter().position(|&w| w < ell);
        }
        RegimeKind::StopAtHit => {
            let mut hit: Option<usize> = None;
            for i in 0..=n {
                if hit.is_none() && path.w[i] < ell {
                    hit = Some(i);
                }
                if hit.is_none() {
                    indicator[i] = 1;
                    interval_id[i] = 1;
                    if i < n && crossed_inside(i) {
                        hit = Some(i + 1);
                    }
                }
            }
            tau_ell = hit;
            if let Some(h) = hit {
                switch_pairs.push((h, None));
            }
        }
        RegimeKind::PauseBelow => {
            let t_split = horizon - regime.delta;
            let mut stopped = false;
            for i in 0..=n {
                let t = i as f64 * path.dt;
                let below = path.w[i] < ell;
                if below && tau_ell.is_none() {
                    tau_ell = Some(i);
                }
                if t < t_split {
                    indicator[i] = u8::from(!below);
                } else {
                    if below {
                        stopped = true;
                    }
                    indicator[i] = u8::from(!stopped);
                    if !stopped && i < n && crossed_inside(i) {
                        stopped = true;
                    }
                }
            }
            // interval ids: consecutive runs of ones.
            let mut id = 0u32;
            let mut prev = 0u8;
            for i in 0..=n {
                if indicator[i] == 1 {
                    if prev == 0 {
                        id += 1;
                    }
                    interval_id[i] = id;
                }
                prev = indicator[i];
            }
        }
        RegimeKind::PauseWithBuffer => {
            let t_split = horizon - regime.delta;
            let entry = ell + regime.b;
            let mut trading = path.w[0] >= ell;
            let mut id: u32 = u32::from(trading);
            for i in 0..=n {
                let t = i as f64 * path.dt;
                if trading {
                    if path.w[i] < ell {
                        trading = false;
                        switch_pairs.push((i, None));
                        if tau_ell.is_none() {
                            tau_ell = Some(i);
                        }
                    } else if i < n && crossed_inside(i) {
                        indicator[i] = 1;
                        interval_id[i] = id;
                        trading = false;
                        switch_pairs.push((i + 1, None));
                        if tau_ell.is_none() {
                            tau_ell = Some(i + 1);
                        }
                        continue;
                    }
                } else if path.w[i] >= entry && t < t_split {
                    trading = true;
                    id += 1;
                    if let Some(last) = switch_pairs.last_mut() {
                        if last.1.is_none() {
                            last.1 = Some(i);
                        }
                    }
                }
                if trading {
                    indicator[i] = 1;
                    interval_id[i] = id;
                }
            }
        }
    }

    // Completed trading intervals.
    let mut n_trades = 0usize;
    let mut prev = 0u8;
    for &v in &indicator {
        if v == 1 && prev == 0 {
            n_trades += 1;
        }
        prev = v;
    }

    RegimeTrace { indicator, interval_id, tau_ell, switch_pairs, n_trades }
}

/// The solved value grids a simulation draws its trading rate from.
pub enum StrategyGrids<'a> {
    /// Full-window grid (always-on, terminal-threshold, stop-at-hit regimes).
    Single(&'a Grid1D),
    /// Main-stage plus end-window pair of the pause regime.
    Staged(&'a Regime3Solution),
    /// Trading/waiting recursion of the buffered regime.
    Switching(&'a RecursionState),
}

impl StrategyGrids<'_> {
    fn matches(&self, kind: RegimeKind) -> bool {
        matches!(
            (self, kind),
            (StrategyGrids::Single(_), RegimeKind::FullLiquidation)
                | (StrategyGrids::Single(_), RegimeKind::TerminalThreshold)
                | (StrategyGrids::Single(_), RegimeKind::StopAtHit)
                | (StrategyGrids::Staged(_), RegimeKind::PauseBelow)
                | (StrategyGrids::Switching(_), RegimeKind::PauseWithBuffer)
        )
    }

    /// Value factor governing the rate on a step, or `None` when outside
    /// every grid's mandate (budget exhausted).
    fn value_at(&self, t: f64, x: f64, interval: u32, budget: Option<u32>) -> Option<f64> {
        match self {
            StrategyGrids::Single(g) => Some(g.interp(t, x)),
            StrategyGrids::Staged(sol) => {
                let t_split = *sol.main.t.last().unwrap();
                if t < t_split {
                    Some(sol.main.interp(t, x))
                } else {
                    Some(sol.end.interp(t, x))
                }
            }
            StrategyGrids::Switching(state) => {
                let n = budget.map_or(state.budget() as u32, |b| b.min(state.budget() as u32));
                if interval == 0 || interval > n {
                    return None;
                }
                let t_split = state.u_inf.t[0];
                if t >= t_split {
                    Some(state.u_inf.interp(t, x))
                } else {
                    let remaining = (n - interval + 1) as usize;
                    Some(state.u1s[remaining - 1].interp(t, x))
                }
            }
        }
    }

    /// Truncation level of the grid active at the terminal time.
    fn terminal_trunc(&self) -> (f64, bool) {
        match self {
            StrategyGrids::Single(g) => (g.trunc_level, g.singular_terminal),
            StrategyGrids::Staged(sol) => (sol.end.trunc_level, sol.end.singular_terminal),
            StrategyGrids::Switching(state) => (state.u_inf.trunc_level, state.u_inf.singular_terminal),
        }
    }
}

/// Whether the discrete path lands in the forced-liquidation event of the
/// regime (evaluated on grid-point data, consistent with the trace).
fn forced_at_terminal(trace: &RegimeTrace, regime: &RegimeSpec, path: &BrownianPath, budget: Option<u32>) -> bool {
    match regime.kind {
        RegimeKind::FullLiquidation => true,
        RegimeKind::TerminalThreshold => *path.w.last().unwrap() >= regime.ell,
        RegimeKind::StopAtHit => trace.tau_ell.is_none(),
        RegimeKind::PauseBelow => trace.trading_at_end(),
        RegimeKind::PauseWithBuffer => {
            let id = *trace.interval_id.last().unwrap();
            id >= 1 && budget.map_or(true, |b| id <= b)
        }
    }
}

/// Integrate the position fraction `q_t / q0` along one path: midpoint
/// quadrature of the prescribed rate with bilinear grid interpolation. On
/// the last step of a forced-liquidation path the grid is replaced by the
/// analytic rate limit `1/(T-s)` capped at the grid's truncation envelope,
/// so closure completes instead of leaving truncation residue.
pub fn integrate_q(
    path: &BrownianPath,
    trace: &RegimeTrace,
    grids: &StrategyGrids,
    regime: &RegimeSpec,
    p: f64,
) -> Result<Vec<f64>> {
    if !grids.matches(regime.kind) {
        return Err(Error::GridMismatch(format!("grid family does not fit regime {:?}", regime.kind)));
    }
    let n = path.n_steps;
    let dt = path.dt;
    let budget = regime.n_switches;
    let forced = forced_at_terminal(trace, regime, path, budget);
    let (trunc, singular) = grids.terminal_trunc();

    let mut q = Vec::with_capacity(n + 1);
    q.push(1.0f64);
    for i in 0..n {
        let last_step = i == n - 1;
        if last_step && forced && singular {
            // Analytic closure: integral of min(1/(T-s), rate_cap) over the step.
            let tau = dt;
            let integral = if trunc.is_infinite() {
                f64::INFINITY
            } else {
                let rate_cap = (p - 1.0) * trunc.powf(p - 1.0);
                if tau <= 1.0 / rate_cap {
                    rate_cap * tau
                } else {
                    (rate_cap * tau).ln() + 1.0
                }
            };
            q.push(q[i] * (-integral).exp());
            continue;
        }
        if trace.indicator[i] == 0 {
            q.push(q[i]);
            continue;
        }
        let phi = |u: f64| if u == 0.0 { 0.0 } else { (p - 1.0) * u.abs().powf(p - 1.0) * u.signum() };
        let interval = trace.interval_id[i];
        let t0 = i as f64 * dt;
        let (x0, x1) = (path.w[i], path.w[i + 1]);
        let mid = grids.value_at(t0 + 0.5 * dt, 0.5 * (x0 + x1), interval, budget);
        // Simpson quadrature of the rate along the step; the last step keeps
        // the midpoint rule because its right endpoint sits on the truncated
        // terminal layer.
        let step_rate = if last_step {
            mid.map(phi)
        } else {
            let left = grids.value_at(t0, x0, interval, budget);
            let right = grids.value_at(t0 + dt, x1, interval, budget);
            match (left, mid, right) {
                (Some(a), Some(m), Some(b)) => Some((phi(a) + 4.0 * phi(m) + phi(b)) / 6.0),
                _ => None,
            }
        };
        match step_rate {
            None => q.push(q[i]), // switch budget exhausted
            Some(rate) => q.push(q[i] * (-rate * dt).exp()),
        }
    }
    Ok(q)
}

fn impact_level(q: f64, q0: f64, params: &ModelParams) -> f64 {
    // \int_0^t kappa(Q', Q) ds in closed form: k/(p_hat-1) (|Q|^{p_hat-2} Q - q0^{p_hat-1}).
    let ph = params.p_hat;
    params.k / (ph - 1.0) * (q.abs().powf(ph - 2.0) * q - q0.powf(ph - 1.0))
}

fn cash_direct(path: &BrownianPath, q_hat: &[f64], params: &ModelParams) -> f64 {
    let n = path.n_steps;
    let dt = path.dt;
    let q0 = params.q0;
    let mut acc = 0.0f64;
    let mut cost = 0.0f64;
    let vol_pow = params.volume.powf(params.p_hat - 1.0);
    for i in 0..n {
        let dq = (q_hat[i + 1] - q_hat[i]) * q0;
        let q_bar = 0.5 * (q_hat[i + 1] + q_hat[i]) * q0;
        let w_bar = 0.5 * (path.w[i + 1] + path.w[i]);
        let s_mid = params.s0 + params.sigma * w_bar + impact_level(q_bar, q0, params);
        acc += s_mid * dq;
        let rate = dq / dt;
        cost += params.eta * rate.abs().powf(params.p_hat) * dt / vol_pow;
    }
    -acc - cost
}

fn cash_by_parts(path: &BrownianPath, q_hat: &[f64], params: &ModelParams) -> f64 {
    let n = path.n_steps;
    let dt = path.dt;
    let q0 = params.q0;
    let q_t = q_hat[n] * q0;
    let s_t = params.s0 + params.sigma * path.w[n] + impact_level(q_t, q0, params);
    let mut ito = 0.0f64;
    let mut cost = 0.0f64;
    let vol_pow = params.volume.powf(params.p_hat - 1.0);
    for i in 0..n {
        ito += q_hat[i] * q0 * params.sigma * (path.w[i + 1] - path.w[i]);
        let rate = (q_hat[i + 1] - q_hat[i]) * q0 / dt;
        cost += params.eta * rate.abs().powf(params.p_hat) * dt / vol_pow;
    }
    q0 * params.s0 - q_t * s_t + params.k_term * (q_t.abs().powf(params.p_hat) - q0.powf(params.p_hat)) + ito - cost
}

/// Terminal cash by a direct Riemann sum of the execution prices, and by the
/// integration-by-parts identity with a left-point stochastic integral. The
/// two routes share no intermediate quantities; their gap shrinks at O(dt).
pub fn account_cash(path: &BrownianPath, q_hat: &[f64], params: &ModelParams) -> (f64, f64) {
    (cash_direct(path, q_hat, params), cash_by_parts(path, q_hat, params))
}

/// Slippage decomposition of one path: permanent-impact fraction `a1 = 1 - fq_T`,
/// noise term `a2`, cost term `a3`, and the recombined percentage deviation
/// `a = coef_a1 a1 - coef_a2 a2 - coef_a3 a3`.
pub fn decompose_a(path: &BrownianPath, q_hat: &[f64], canon: &CanonicalParams) -> Result<(f64, f64, f64, f64)> {
    let n = path.n_steps;
    let dt = path.dt;
    let fq = q_hat[n];
    let d = 1.0 - fq;
    if d == 0.0 {
        return Err(Error::NoTrades);
    }
    let mut noise = 0.0f64;
    let mut cost = 0.0f64;
    for i in 0..n {
        let dfq = q_hat[i + 1] - q_hat[i];
        let w_bar = 0.5 * (path.w[i + 1] + path.w[i]);
        noise += w_bar * dfq;
        cost += dfq * dfq / dt;
    }
    let a1 = d;
    let a2 = noise / d;
    let a3 = cost / d;
    let a = canon.coef_a1 * a1 - canon.coef_a2 * a2 - canon.coef_a3 * a3;
    Ok((a1, a2, a3, a))
}

/// One reduced simulation record.
#[derive(Debug, Clone, Serialize)]
pub struct PathRecord {
    pub index: u64,
    /// Terminal position fraction `Q_T / q0`.
    pub fq_t: f64,
    pub liquidated: bool,
    pub no_trades: bool,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a: f64,
    pub xt: f64,
    pub xt_closed_form: f64,
    pub n_trades: usize,
    pub tau_ell: Option<usize>,
    #[serde(skip)]
    pub q_dump: Option<Vec<f64>>,
}

/// Batch controls. All randomness flows from `seed`.
#[derive(Debug, Clone, Serialize)]
pub struct SimConfig {
    pub seed: u64,
    pub n_paths: u64,
    pub n_steps: usize,
    pub horizon: f64,
    pub antithetic: bool,
    pub bridge_correction: bool,
    /// Terminal fractions below this count as fully closed.
    pub liquidation_eps: f64,
    /// Paths whose full trajectory should be kept on the record.
    pub dump_indices: Vec<u64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 7,
            n_paths: 10_000,
            n_steps: 2_000,
            horizon: 1.0,
            antithetic: false,
            bridge_correction: false,
            liquidation_eps: 1e-6,
            dump_indices: Vec::new(),
        }
    }
}

/// Simulate `n_paths` independent paths and reduce them in path-index order.
/// Paths run in parallel; the output is bitwise reproducible for a fixed seed.
pub fn run_batch(
    cfg: &SimConfig,
    grids: &StrategyGrids,
    regime: &RegimeSpec,
    params: &ModelParams,
    canon: &CanonicalParams,
) -> Result<Vec<PathRecord>> {
    if !grids.matches(regime.kind) {
        return Err(Error::GridMismatch(format!("grid family does not fit regime {:?}", regime.kind)));
    }
    let sync_grids = grids;
    (0..cfg.n_paths)
        .into_par_iter()
        .map(|index| -> Result<PathRecord> {
            let (stream, flip) = if cfg.antithetic { (index / 2, index % 2 == 1) } else { (index, false) };
            let path = gen_path_signed(cfg.seed, index, stream, cfg.n_steps, cfg.horizon, flip)?;
            let trace = trace_regime_with(&path, regime, cfg.bridge_correction);
            let q = integrate_q(&path, &trace, sync_grids, regime, params.p)?;
            let fq_t = *q.last().unwrap();
            let (xt, xt_cf) = account_cash(&path, &q, params);
            let (a1, a2, a3, a, no_trades) = match decompose_a(&path, &q, canon) {
                Ok((a1, a2, a3, a)) => (a1, a2, a3, a, false),
                Err(Error::NoTrades) => (0.0, f64::NAN, f64::NAN, f64::NAN, true),
                Err(e) => return Err(e),
            };
            let q_dump = cfg.dump_indices.contains(&index).then(|| q.clone());
            Ok(PathRecord {
                index,
                fq_t,
                liquidated: fq_t < cfg.liquidation_eps,
                no_trades,
                a1,
                a2,
                a3,
                a,
                xt,
                xt_closed_form: xt_cf,
                n_trades: trace.n_trades,
                tau_ell: trace.tau_ell,
                q_dump,
            })
        })
        .collect()
}
