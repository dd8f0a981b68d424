//! Market model parameters, trading regimes, and closed-form reference curves.
//!
//! The trading model is an Almgren-Chriss style liquidation problem with
//! quadratic-or-power execution costs `L(rho) = eta |rho|^p_hat`, permanent
//! impact `kappa(q', q) = k |q|^{p_hat-2} q'`, and a binary trading-permission
//! process driven by a lower bound `ell` on the noise component of the price.
//! Everything downstream (grid solvers, path simulation) consumes the types
//! defined here.

use serde::Serialize;

use crate::error::{Error, Result};

/// Core market and cost parameters.
///
/// `p` and `k_term` are derived: `1/p + 1/p_hat = 1` and `k_term = k / p_hat`.
/// Construct through [`ModelParams::new`] so the derived fields stay in sync.
#[derive(Debug, Clone, Serialize)]
pub struct ModelParams {
    /// Execution-cost exponent, > 1. Quadratic costs are `p_hat = 2`.
    pub p_hat: f64,
    /// Hölder conjugate of `p_hat`; the exponent appearing in the HJB nonlinearity.
    pub p: f64,
    /// Permanent-impact coefficient (price units per share^{p_hat-1}), >= 0.
    pub k: f64,
    /// Terminal-penalty coefficient `k / p_hat`.
    pub k_term: f64,
    /// Instantaneous transaction-cost scale, > 0.
    pub eta: f64,
    /// Market volume rate (shares per unit time), > 0.
    pub volume: f64,
    /// Price volatility, > 0.
    pub sigma: f64,
    /// Initial (target) price, > 0.
    pub s0: f64,
    /// Trading horizon, > 0.
    pub horizon: f64,
    /// Initial position, > 0.
    pub q0: f64,
}

impl ModelParams {
    pub fn new(
        p_hat: f64,
        k: f64,
        eta: f64,
        volume: f64,
        sigma: f64,
        s0: f64,
        horizon: f64,
        q0: f64,
    ) -> Result<Self> {
        if !(p_hat.is_finite() && p_hat > 1.0) {
            return Err(Error::DomainError(format!("p_hat must be > 1, got {p_hat}")));
        }
        if !(k.is_finite() && k >= 0.0) {
            return Err(Error::DomainError(format!("k must be >= 0, got {k}")));
        }
        for (name, v) in [
            ("eta", eta),
            ("volume", volume),
            ("sigma", sigma),
            ("s0", s0),
            ("horizon", horizon),
            ("q0", q0),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::DomainError(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(Self {
            p_hat,
            p: p_hat / (p_hat - 1.0),
            k,
            k_term: k / p_hat,
            eta,
            volume,
            sigma,
            s0,
            horizon,
            q0,
        })
    }

    /// Reference quadratic setup used throughout the experiments.
    pub fn quadratic(k: f64, eta: f64, volume: f64, sigma: f64, s0: f64, horizon: f64, q0: f64) -> Result<Self> {
        Self::new(2.0, k, eta, volume, sigma, s0, horizon, q0)
    }

    /// Constant bound on the effective volume process after the cost
    /// normalization `Vol -> Vol / eta^{p-1}`:
    /// `vol_bar = (p_hat - 1) * V / eta^{p-1}`.
    pub fn vol_bar(&self) -> f64 {
        (self.p_hat - 1.0) * self.volume / self.eta.powf(self.p - 1.0)
    }
}

/// Square-root stochastic volatility parameters (variance process
/// `d nu = alpha (theta - nu) dt + c sqrt(nu) dW2`, correlation `rho`).
#[derive(Debug, Clone, Serialize)]
pub struct SVParams {
    pub alpha: f64,
    pub theta: f64,
    pub c: f64,
    pub rho: f64,
    pub nu0: f64,
}

impl SVParams {
    pub fn new(alpha: f64, theta: f64, c: f64, rho: f64, nu0: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("theta", theta), ("c", c), ("nu0", nu0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::DomainError(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::DomainError(format!("rho must lie in [-1, 1], got {rho}")));
        }
        Ok(Self { alpha, theta, c, rho, nu0 })
    }

    /// `2 alpha theta > c^2`, keeping the variance process strictly positive.
    pub fn feller_ok(&self) -> bool {
        2.0 * self.alpha * self.theta > self.c * self.c
    }
}

/// Which trading-permission / forced-liquidation construction is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegimeKind {
    /// Always trading, full liquidation always required (uniform-speed baseline).
    FullLiquidation,
    /// Always trading; liquidation forced only when the terminal noise price is >= ell.
    TerminalThreshold,
    /// Trading stops for good at the first hit of ell; liquidation forced if never hit.
    StopAtHit,
    /// Trading pauses below ell; a hit of ell inside the final window [T-delta, T] stops it for good.
    PauseBelow,
    /// As `PauseBelow` but re-entry requires climbing back to ell + b; finite switch budget.
    PauseWithBuffer,
}

/// A trading regime: the threshold `ell` (in sigma units), the end-window
/// width `delta` and re-entry buffer `b` where applicable, and the switch
/// budget for the buffered regime.
#[derive(Debug, Clone, Serialize)]
pub struct RegimeSpec {
    pub kind: RegimeKind,
    /// Threshold on the noise component, expressed as a multiple of sigma.
    pub ell: f64,
    /// End-window width (PauseBelow / PauseWithBuffer), >= 0.
    pub delta: f64,
    /// Re-entry buffer above ell (PauseWithBuffer only), > 0 there.
    pub b: f64,
    /// Trading-interval budget for PauseWithBuffer; `None` means effectively unbounded.
    pub n_switches: Option<u32>,
}

impl RegimeSpec {
    pub fn full_liquidation() -> Self {
        Self { kind: RegimeKind::FullLiquidation, ell: f64::NEG_INFINITY, delta: 0.0, b: 0.0, n_switches: None }
    }

    pub fn terminal_threshold(ell: f64) -> Self {
        Self { kind: RegimeKind::TerminalThreshold, ell, delta: 0.0, b: 0.0, n_switches: None }
    }

    pub fn stop_at_hit(ell: f64) -> Self {
        Self { kind: RegimeKind::StopAtHit, ell, delta: 0.0, b: 0.0, n_switches: None }
    }

    pub fn pause_below(ell: f64, delta: f64) -> Self {
        Self { kind: RegimeKind::PauseBelow, ell, delta, b: 0.0, n_switches: None }
    }

    pub fn pause_with_buffer(ell: f64, delta: f64, b: f64, n_switches: u32) -> Self {
        Self { kind: RegimeKind::PauseWithBuffer, ell, delta, b, n_switches: Some(n_switches) }
    }
}

/// Scale-free parameters of the quadratic problem after factoring out
/// `sigma`, `eta` and `V`. The rescaled value function solves
/// `v_t + v_xx/2 - I v^2 = 0` with terminal level `-K_c` below the threshold,
/// and the slippage decomposes with the three coefficients below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CanonicalParams {
    /// Scaled terminal penalty `k V / (2 eta)`.
    pub k_c: f64,
    /// Coefficient of the permanent-impact term: `-k q0 / (2 s0)`.
    pub coef_a1: f64,
    /// Coefficient of the price-noise term: `sigma / s0`.
    pub coef_a2: f64,
    /// Coefficient of the transaction-cost term: `eta q0 / (V s0)`.
    pub coef_a3: f64,
    /// Threshold in sigma units (already scale-free).
    pub ell_c: f64,
}

/// One named feasibility check with its margin.
#[derive(Debug, Clone, Serialize)]
pub struct CheckLine {
    pub name: String,
    /// Value that must stay strictly below 1 (or the stated bound) to pass.
    pub detail: String,
    pub pass: bool,
}

/// Outcome of [`validate`]: every condition with pass/fail and margin.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckLine>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn first_failure(&self) -> Option<&CheckLine> {
        self.checks.iter().find(|c| !c.pass)
    }

    /// Convert to a hard error naming the first violated inequality.
    pub fn into_result(self) -> Result<ValidationReport> {
        match self.first_failure() {
            None => Ok(self),
            Some(fail) => Err(Error::AssumptionViolated {
                which: format!("{}: {}", fail.name, fail.detail),
            }),
        }
    }
}

/// Check the model against the standing feasibility conditions:
///
/// (a) liquidity balance `k_term^{p-1} (p-1) T vol_bar < 1`: if this fails
///     the lower-bound curve explodes to `-inf` before time 0 and no finite
///     value function exists; callers must treat it as a hard error;
/// (b) positivity of the variance process (`2 alpha theta > c^2`) when a
///     stochastic-volatility block is present;
/// (c) regime sanity: `delta < T`, and `b > 0` for the buffered regime.
pub fn validate(params: &ModelParams, sv: Option<&SVParams>, regime: &RegimeSpec) -> ValidationReport {
    let mut checks = Vec::new();

    let vol_bar = params.vol_bar();
    let lhs = params.k_term.powf(params.p - 1.0) * (params.p - 1.0) * params.horizon * vol_bar;
    checks.push(CheckLine {
        name: "liquidity-balance".into(),
        detail: format!(
            "k_term^(p-1) (p-1) T vol_bar = {:.6} (must be < 1; vol_bar = {:.6e})",
            lhs, vol_bar
        ),
        pass: lhs < 1.0,
    });

    // Liquidity must be available near the terminal time for the singular
    // terminal value to be attainable at finite cost.
    checks.push(CheckLine {
        name: "terminal-liquidity".into(),
        detail: format!("vol_bar = {:.6e} (must be > 0)", vol_bar),
        pass: vol_bar > 0.0,
    });

    if let Some(sv) = sv {
        let lhs = sv.c * sv.c;
        let rhs = 2.0 * sv.alpha * sv.theta;
        checks.push(CheckLine {
            name: "feller".into(),
            detail: format!("c^2 = {:.6e} vs 2 alpha theta = {:.6e} (must be <)", lhs, rhs),
            pass: sv.feller_ok(),
        });
    }

    match regime.kind {
        RegimeKind::PauseBelow | RegimeKind::PauseWithBuffer => {
            checks.push(CheckLine {
                name: "regime-delta".into(),
                detail: format!("delta = {} (must satisfy 0 < delta <= T = {})", regime.delta, params.horizon),
                pass: regime.delta > 0.0 && regime.delta <= params.horizon,
            });
        }
        _ => {}
    }
    if regime.kind == RegimeKind::PauseWithBuffer {
        checks.push(CheckLine {
            name: "regime-buffer".into(),
            detail: format!("b = {} (must be > 0)", regime.b),
            pass: regime.b > 0.0,
        });
    }

    ValidationReport { checks }
}

/// [`validate`] and fail hard on the first violated condition.
pub fn ensure_valid(params: &ModelParams, sv: Option<&SVParams>, regime: &RegimeSpec) -> Result<ValidationReport> {
    validate(params, sv, regime).into_result()
}

/// Lower bound on the value factor under a constant volume bound:
///
/// `z_t = -( K^{1-p} - (p-1) vol_bar (T-t) )^{-1/(p-1)}`.
///
/// Solves `z' = vol_bar |z|^p` with `z_T = -K`; increasing in `t`, and finite
/// on `[0, T]` exactly when the liquidity-balance condition holds.
pub fn lower_bound_z(k_term: f64, p: f64, vol_bar: f64, t: f64, horizon: f64) -> Result<f64> {
    if k_term == 0.0 {
        return Ok(0.0);
    }
    let bracket = k_term.powf(1.0 - p) - (p - 1.0) * vol_bar * (horizon - t);
    if bracket <= 0.0 {
        return Err(Error::AssumptionViolated {
            which: format!(
                "liquidity-balance: K^(1-p) - (p-1) vol_bar (T-t) = {:.6e} <= 0 at t = {}",
                bracket, t
            ),
        });
    }
    Ok(-bracket.powf(-1.0 / (p - 1.0)))
}

/// Lower-bound curve for a time-dependent deterministic volume bound:
/// same formula with `vol_bar (T-t)` replaced by `\int_t^T vol(s) ds`,
/// evaluated by adaptive composite Simpson quadrature.
pub fn lower_bound_z_integrated<F>(k_term: f64, p: f64, vol: F, t: f64, horizon: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if k_term == 0.0 {
        return Ok(0.0);
    }
    let integral = simpson_adaptive(&vol, t, horizon, 1e-10)?;
    let bracket = k_term.powf(1.0 - p) - (p - 1.0) * integral;
    if bracket <= 0.0 {
        return Err(Error::AssumptionViolated {
            which: format!("liquidity-balance: integral form bracket = {:.6e} <= 0 at t = {}", bracket, t),
        });
    }
    Ok(-bracket.powf(-1.0 / (p - 1.0)))
}

/// Composite Simpson with interval doubling until the relative change is
/// below `rel_tol`.
fn simpson_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if b < a {
        return Err(Error::DomainError(format!("integration bounds reversed: [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let simpson = |n: usize| -> f64 {
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    };
    let mut n = 16;
    let mut prev = simpson(n);
    for _ in 0..24 {
        n *= 2;
        let cur = simpson(n);
        let scale = cur.abs().max(1e-300);
        if ((cur - prev) / scale).abs() < rel_tol {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::NoConvergence { last_delta: prev, tol: rel_tol })
}

/// Blow-up envelope of the value factor for constant volume `vol_const`:
/// the solution of `y' = vol y^p` with `y(T) = +inf`,
///
/// `y_t = ((p-1) vol (T-t))^{-1/(p-1)}`,
///
/// which is `1 / (vol (T-t))` in the quadratic case.
pub fn analytic_blowup_profile(p: f64, vol_const: f64, t: f64, horizon: f64) -> Result<f64> {
    if t >= horizon {
        return Err(Error::DomainError(format!("blow-up profile undefined at t = {t} >= T = {horizon}")));
    }
    if vol_const <= 0.0 {
        return Err(Error::DomainError(format!("vol_const must be > 0, got {vol_const}")));
    }
    Ok(((p - 1.0) * vol_const * (horizon - t)).powf(-1.0 / (p - 1.0)))
}

/// Factor the scale parameters out of the quadratic problem.
///
/// Only defined for `p_hat = 2`; the rescaled PDE has unit diffusion and
/// unit volume, the terminal level is `-K_c`, and the threshold keeps its
/// sigma-units value.
pub fn to_canonical(params: &ModelParams, regime: &RegimeSpec) -> Result<CanonicalParams> {
    if (params.p_hat - 2.0).abs() > 1e-12 {
        return Err(Error::UnsupportedExponent(params.p_hat));
    }
    Ok(CanonicalParams {
        k_c: params.k * params.volume / (2.0 * params.eta),
        coef_a1: -params.k * params.q0 / (2.0 * params.s0),
        coef_a2: params.sigma / params.s0,
        coef_a3: params.eta * params.q0 / (params.volume * params.s0),
        ell_c: regime.ell,
    })
}

/// Reference quantities of the uniform-speed full-liquidation strategy:
/// the transaction-cost term is exactly `1/T`, and the price-noise term
/// `-(1/T) \int_0^T W_t dt` is centered normal with variance `T/3`.
pub fn baseline_is_quantities(horizon: f64) -> (f64, f64) {
    (1.0 / horizon, horizon / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference_params() -> ModelParams {
        ModelParams::quadratic(1e-7, 0.3, 4e6, 0.6, 45.0, 1.0, 2e5).unwrap()
    }

    #[test]
    fn reference_parameters_pass_validation() {
        let params = reference_params();
        let regime = RegimeSpec::terminal_threshold(-1.4);
        let report = validate(&params, None, &regime);
        assert!(report.all_pass(), "{report:?}");
        // canonical margin: k V / (2 eta) = 2/3
        let canon = to_canonical(&params, &regime).unwrap();
        assert!((canon.k_c - 2.0 / 3.0).abs() < 1e-15);
        assert!(canon.k_c * params.horizon < 1.0);
    }

    #[test]
    fn infeasible_impact_fails_validation() {
        // k V / (2 eta) = 4 >= 1: the lower bound explodes before time 0.
        let params = ModelParams::quadratic(2e-7, 0.1, 4e6, 0.6, 45.0, 1.0, 2e5).unwrap();
        let regime = RegimeSpec::terminal_threshold(-1.4);
        let err = ensure_valid(&params, None, &regime).unwrap_err();
        match err {
            Error::AssumptionViolated { which } => assert!(which.contains("liquidity-balance"), "{which}"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn zero_permanent_impact_always_passes() {
        let params = ModelParams::quadratic(0.0, 0.3, 4e6, 0.6, 45.0, 50.0, 2e5).unwrap();
        let regime = RegimeSpec::terminal_threshold(-1.4);
        assert!(validate(&params, None, &regime).all_pass());
    }

    #[test]
    fn feller_check_fails_when_vol_of_vol_too_large() {
        let params = reference_params();
        let sv = SVParams::new(0.5, 0.04, 0.5, -0.3, 0.04).unwrap(); // c^2 = 0.25 > 2*0.5*0.04
        let regime = RegimeSpec::terminal_threshold(-1.4);
        let report = validate(&params, Some(&sv), &regime);
        assert!(!report.all_pass());
        assert_eq!(report.first_failure().unwrap().name, "feller");
    }

    #[test]
    fn lower_bound_matches_closed_form_points() {
        // Canonical quadratic case: K_c = 2/3, vol_bar = 1, T = 1.
        let z0 = lower_bound_z(2.0 / 3.0, 2.0, 1.0, 0.0, 1.0).unwrap();
        assert!((z0 - (-2.0)).abs() < 1e-14, "z0 = {z0}");
        let zh = lower_bound_z(2.0 / 3.0, 2.0, 1.0, 0.5, 1.0).unwrap();
        assert!((zh - (-1.0)).abs() < 1e-14, "z(1/2) = {zh}");
        let zt = lower_bound_z(2.0 / 3.0, 2.0, 1.0, 1.0, 1.0).unwrap();
        assert!((zt - (-2.0 / 3.0)).abs() < 1e-15, "z(T) = {zt}");
    }

    #[test]
    fn lower_bound_agrees_with_rk4_backward_integration() {
        // Independent check: integrate z' = |z|^2 from z(1) = -2/3 backward
        // with classic RK4 and compare at t = 0.
        let f = |z: f64| z * z; // |z|^p with p = 2
        let mut z = -2.0 / 3.0;
        let n = 20_000;
        let h = -1.0 / n as f64; // backward in time
        for _ in 0..n {
            let k1 = f(z);
            let k2 = f(z + 0.5 * h * k1);
            let k3 = f(z + 0.5 * h * k2);
            let k4 = f(z + h * k3);
            z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let closed = lower_bound_z(2.0 / 3.0, 2.0, 1.0, 0.0, 1.0).unwrap();
        assert!((z - closed).abs() < 1e-9, "rk4 {z} vs closed {closed}");
    }

    #[test]
    fn lower_bound_explodes_when_assumption_fails() {
        // K = 4 with vol_bar = 1, T = 1: bracket 1/4 - 1 < 0 at t = 0.
        assert!(lower_bound_z(4.0, 2.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn integrated_lower_bound_matches_constant_vol() {
        let z_const = lower_bound_z(2.0 / 3.0, 2.0, 1.0, 0.25, 1.0).unwrap();
        let z_int = lower_bound_z_integrated(2.0 / 3.0, 2.0, |_| 1.0, 0.25, 1.0).unwrap();
        assert!((z_const - z_int).abs() < 1e-12);
        // Non-constant vol: compare against RK4 on z' = vol(t) z^2, z(1) = -K.
        let vol = |t: f64| 0.5 + 0.5 * t;
        let z_int = lower_bound_z_integrated(2.0 / 3.0, 2.0, vol, 0.0, 1.0).unwrap();
        let mut z = -2.0 / 3.0;
        let n = 40_000;
        let h = -1.0 / n as f64;
        let mut t = 1.0;
        for _ in 0..n {
            let f = |t: f64, z: f64| vol(t) * z * z;
            let k1 = f(t, z);
            let k2 = f(t + 0.5 * h, z + 0.5 * h * k1);
            let k3 = f(t + 0.5 * h, z + 0.5 * h * k2);
            let k4 = f(t + h, z + h * k3);
            z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
        }
        assert!((z - z_int).abs() < 1e-9, "rk4 {z} vs quadrature {z_int}");
    }

    #[test]
    fn lower_bound_solves_its_ode_to_second_order() {
        // Central difference of z matches vol |z|^p with O(h^2) error.
        let k = 2.0 / 3.0;
        for &t in &[0.1, 0.4, 0.7, 0.9] {
            let h = 1e-4;
            let zp = lower_bound_z(k, 2.0, 1.0, t + h, 1.0).unwrap();
            let zm = lower_bound_z(k, 2.0, 1.0, t - h, 1.0).unwrap();
            let z = lower_bound_z(k, 2.0, 1.0, t, 1.0).unwrap();
            let dz = (zp - zm) / (2.0 * h);
            assert!((dz - z * z).abs() < 1e-5, "ode residual {} at t = {t}", dz - z * z);
        }
    }

    #[test]
    fn blowup_profile_points() {
        assert!((analytic_blowup_profile(2.0, 1.0, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((analytic_blowup_profile(2.0, 1.0, 0.95, 1.0).unwrap() - 20.0).abs() < 1e-11);
        let y = analytic_blowup_profile(3.0, 1.0, 0.0, 1.0).unwrap();
        assert!((y - 0.5f64.sqrt()).abs() < 1e-15, "p=3 profile {y}");
        assert!(analytic_blowup_profile(2.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn canonical_parameters_from_reference_setup() {
        let params = reference_params();
        let regime = RegimeSpec::terminal_threshold(-1.4);
        let canon = to_canonical(&params, &regime).unwrap();
        assert!((canon.k_c - 2.0 / 3.0).abs() < 1e-15);
        assert!((canon.coef_a1 - (-1e-7 * 2e5 / 90.0)).abs() < 1e-20);
        assert!((canon.coef_a2 - 0.6 / 45.0).abs() < 1e-18);
        assert!((canon.coef_a3 - 0.3 * 2e5 / (4e6 * 45.0)).abs() < 1e-18);
        assert_eq!(canon.ell_c, -1.4);
    }

    #[test]
    fn canonical_rejects_non_quadratic() {
        let params = ModelParams::new(3.0, 1e-7, 0.3, 4e6, 0.6, 45.0, 1.0, 2e5).unwrap();
        let regime = RegimeSpec::terminal_threshold(-1.4);
        assert!(matches!(to_canonical(&params, &regime), Err(Error::UnsupportedExponent(_))));
    }

    #[test]
    fn canonical_zero_impact() {
        let params = ModelParams::quadratic(0.0, 0.3, 4e6, 0.6, 45.0, 1.0, 2e5).unwrap();
        let canon = to_canonical(&params, &RegimeSpec::terminal_threshold(-1.4)).unwrap();
        assert_eq!(canon.k_c, 0.0);
        assert_eq!(canon.coef_a1, 0.0);
    }

    #[test]
    fn canonical_invariant_under_joint_rescaling() {
        // (s0, k, eta, ell, sigma) -> (c s0, c k, c eta, c ell, c sigma) leaves
        // every canonical coefficient bitwise unchanged for c a power of two.
        let c = 2.0;
        let base = reference_params();
        let scaled = ModelParams::quadratic(
            base.k * c,
            base.eta * c,
            base.volume,
            base.sigma * c,
            base.s0 * c,
            base.horizon,
            base.q0,
        )
        .unwrap();
        let r1 = RegimeSpec::terminal_threshold(-1.4);
        let a = to_canonical(&base, &r1).unwrap();
        let b = to_canonical(&scaled, &r1).unwrap();
        assert_eq!(a.k_c.to_bits(), b.k_c.to_bits());
        assert_eq!(a.coef_a1.to_bits(), b.coef_a1.to_bits());
        assert_eq!(a.coef_a2.to_bits(), b.coef_a2.to_bits());
        assert_eq!(a.coef_a3.to_bits(), b.coef_a3.to_bits());
        assert_eq!(a.ell_c.to_bits(), b.ell_c.to_bits());
    }

    #[test]
    fn baseline_quantities() {
        let (a3, var_a2) = baseline_is_quantities(1.0);
        assert_eq!(a3, 1.0);
        assert!((var_a2 - 1.0 / 3.0).abs() < 1e-15);
        let (a3, _) = baseline_is_quantities(4.0);
        assert_eq!(a3, 0.25);
        // Variance check by quadrature: Var(int_0^T W dt) = int_0^T (T-t)^2 dt = T^3/3,
        // so Var(-(1/T) int W dt) = T/3.
        let t_end = 1.0f64;
        let n = 10_000;
        let h = t_end / n as f64;
        let quad: f64 = (0..n).map(|i| (t_end - (i as f64 + 0.5) * h).powi(2) * h).sum();
        assert!((quad / (t_end * t_end) - 1.0 / 3.0).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn holder_conjugacy_holds(p_hat in 1.0001f64..10.0) {
            let params = ModelParams::new(p_hat, 1e-7, 0.3, 4e6, 0.6, 45.0, 1.0, 2e5).unwrap();
            prop_assert!((1.0 / params.p + 1.0 / params.p_hat - 1.0).abs() < 1e-12);
            prop_assert!((params.k_term - params.k / p_hat).abs() < 1e-22);
        }

        #[test]
        fn lower_bound_is_monotone_and_capped(
            k in 0.01f64..0.9,
            s in 0.0f64..0.98,
            t in 0.0f64..0.98,
        ) {
            // vol_bar = 1, T = 1; feasible because k < 1.
            let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
            let z_lo = lower_bound_z(k, 2.0, 1.0, lo, 1.0).unwrap();
            let z_hi = lower_bound_z(k, 2.0, 1.0, hi, 1.0).unwrap();
            prop_assert!(z_lo <= z_hi + 1e-15);
            prop_assert!(z_hi <= -k + 1e-15);
            prop_assert!(z_lo.is_finite());
        }
    }
}
