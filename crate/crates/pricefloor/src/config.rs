//! Run configuration: a flat, sectioned key-value file (TOML syntax) with
//! one block per concern. Thresholds and buffers are in sigma units, times
//! in the same abstract unit as the horizon. Defaults reproduce the standard
//! quadratic experiment setup.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{ModelParams, RegimeSpec, SVParams};
use crate::pde1d::SolveSpec;
use crate::pde_sv::SolveSpecSv;
use crate::sim::SimConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelBlock {
    /// Execution-cost exponent.
    pub p_hat: f64,
    /// Permanent-impact coefficient.
    pub k: f64,
    /// Transaction-cost scale.
    pub eta: f64,
    /// Market volume rate (shares/time).
    pub volume: f64,
    /// Price volatility.
    pub sigma: f64,
    /// Initial/target price.
    pub s0: f64,
    /// Horizon.
    pub horizon: f64,
    /// Initial position (shares).
    pub q0: f64,
}

impl Default for ModelBlock {
    fn default() -> Self {
        ModelBlock { p_hat: 2.0, k: 1e-7, eta: 0.3, volume: 4e6, sigma: 0.6, s0: 45.0, horizon: 1.0, q0: 2e5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvBlock {
    pub alpha: f64,
    pub theta: f64,
    pub c: f64,
    pub rho: f64,
    pub nu0: f64,
}

impl Default for SvBlock {
    fn default() -> Self {
        SvBlock { alpha: 2.0, theta: 0.36, c: 0.3, rho: -0.5, nu0: 0.36 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegimeBlock {
    /// One of: full-liquidation, terminal-threshold, stop-at-hit,
    /// pause-below, pause-with-buffer.
    pub kind: String,
    /// Floor on the noise component, in sigma units.
    pub ell: f64,
    /// End-window width for the pause regimes.
    pub delta: f64,
    /// Re-entry buffer above the floor (buffered regime).
    pub buffer: f64,
    /// Trading-interval budget (buffered regime).
    pub max_switches: u32,
}

impl Default for RegimeBlock {
    fn default() -> Self {
        RegimeBlock { kind: "terminal-threshold".into(), ell: -1.4, delta: 0.1, buffer: 0.2, max_switches: 3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverBlock {
    pub nx: usize,
    pub nt: usize,
    /// Half-width of the space domain in units of sigma * sqrt(T).
    pub x_pad: f64,
    /// Terminal-layer offset for truncation convergence checks.
    pub t_cut: f64,
    /// Sup-norm tolerance for the truncation schedule.
    pub tol: f64,
    pub trunc_schedule: Vec<f64>,
    /// Optional linear ramp width replacing the terminal jump.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mollify_ramp: Option<f64>,
    /// Optional smoothing width for the pause-regime trading indicator.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smooth_indicator_eps: Option<f64>,
    /// Variance-axis resolution (surface engine).
    pub n_nu: usize,
    /// Variance-axis cap; `None` uses the stationary-moments default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu_max: Option<f64>,
}

impl Default for SolverBlock {
    fn default() -> Self {
        SolverBlock {
            nx: 961,
            nt: 800,
            x_pad: 6.0,
            t_cut: 0.05,
            tol: 2e-3,
            trunc_schedule: vec![1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8],
            mollify_ramp: None,
            smooth_indicator_eps: None,
            n_nu: 96,
            nu_max: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimBlock {
    pub seed: u64,
    pub n_paths: u64,
    pub n_steps: usize,
    pub antithetic: bool,
    pub bridge_correction: bool,
    pub liquidation_eps: f64,
    /// Path indices whose full trajectory is dumped next to the records.
    pub dump_paths: Vec<u64>,
}

impl Default for SimBlock {
    fn default() -> Self {
        SimBlock {
            seed: 7,
            n_paths: 10_000,
            n_steps: 2_000,
            antithetic: false,
            bridge_correction: false,
            liquidation_eps: 1e-6,
            dump_paths: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: String,
    /// `csv` (default) or `bin` for grid dumps.
    pub grid_format: String,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { dir: "out".into(), grid_format: "csv".into() }
    }
}

/// Everything a run needs; see the block types for the individual keys.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sv: Option<SvBlock>,
    pub regime: RegimeBlock,
    pub solver: SolverBlock,
    pub sim: SimBlock,
    pub output: OutputBlock,
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let m = &self.model;
        ModelParams::new(m.p_hat, m.k, m.eta, m.volume, m.sigma, m.s0, m.horizon, m.q0)
    }

    pub fn sv_params(&self) -> Result<Option<SVParams>> {
        match &self.sv {
            None => Ok(None),
            Some(b) => Ok(Some(SVParams::new(b.alpha, b.theta, b.c, b.rho, b.nu0)?)),
        }
    }

    pub fn regime_spec(&self) -> Result<RegimeSpec> {
        let r = &self.regime;
        let spec = match r.kind.as_str() {
            "full-liquidation" => RegimeSpec::full_liquidation(),
            "terminal-threshold" => RegimeSpec::terminal_threshold(r.ell),
            "stop-at-hit" => RegimeSpec::stop_at_hit(r.ell),
            "pause-below" => RegimeSpec::pause_below(r.ell, r.delta),
            "pause-with-buffer" => RegimeSpec::pause_with_buffer(r.ell, r.delta, r.buffer, r.max_switches),
            other => return Err(Error::Config(format!("unknown regime kind '{other}'"))),
        };
        Ok(spec)
    }

    /// 1D solve window in sigma units: `[-x_pad sqrt(T), x_pad sqrt(T)]`.
    pub fn solve_spec(&self) -> SolveSpec {
        let half = self.solver.x_pad * self.model.horizon.sqrt();
        SolveSpec {
            x_min: -half,
            x_max: half,
            nx: self.solver.nx,
            nt: self.solver.nt,
            t_cut: self.solver.t_cut,
            tol: self.solver.tol,
            trunc_schedule: self.solver.trunc_schedule.clone(),
            horizon: self.model.horizon,
        }
    }

    pub fn solve_spec_sv(&self) -> SolveSpecSv {
        let half = self.solver.x_pad * self.model.horizon.sqrt();
        SolveSpecSv {
            nu_max: self.solver.nu_max,
            n_nu: self.solver.n_nu,
            s_min: -half,
            s_max: half,
            n_s: self.solver.nx.min(257), // explicit scheme: keep the surface tractable
            nt: self.solver.nt,
            t_cut: self.solver.t_cut,
            tol: self.solver.tol,
            trunc_schedule: self.solver.trunc_schedule.clone(),
            horizon: self.model.horizon,
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            seed: self.sim.seed,
            n_paths: self.sim.n_paths,
            n_steps: self.sim.n_steps,
            horizon: self.model.horizon,
            antithetic: self.sim.antithetic,
            bridge_correction: self.sim.bridge_correction,
            liquidation_eps: self.sim.liquidation_eps,
            dump_indices: self.sim.dump_paths.clone(),
        }
    }

    /// Hash of everything that determines a solve (model, sv, regime,
    /// solver); simulation and output settings do not enter.
    pub fn solve_hash(&self) -> String {
        #[derive(Serialize)]
        struct SolveView<'a> {
            model: &'a ModelBlock,
            #[serde(skip_serializing_if = "Option::is_none")]
            sv: &'a Option<SvBlock>,
            regime: &'a RegimeBlock,
            solver: &'a SolverBlock,
        }
        let view = SolveView { model: &self.model, sv: &self.sv, regime: &self.regime, solver: &self.solver };
        let text = toml::to_string(&view).expect("hash view serializes");
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        format!("{:x}", hasher.finalize())
    }

    /// Output directory, honoring the `PRICEFLOOR_OUT` override.
    pub fn output_dir(&self) -> std::path::PathBuf {
        match std::env::var("PRICEFLOOR_OUT") {
            Ok(dir) if !dir.is_empty() => dir.into(),
            _ => self.output.dir.clone().into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_roundtrip() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml();
        let back = RunConfig::from_str(&text).unwrap();
        assert_eq!(back.model.eta, 0.3);
        assert_eq!(back.regime.ell, -1.4);
        assert_eq!(cfg.solve_hash(), back.solve_hash());
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = RunConfig::from_str(
            "[model]\nk = 2e-7\neta = 0.1\n\n[sim]\nseed = 11\n",
        )
        .unwrap();
        assert_eq!(cfg.model.k, 2e-7);
        assert_eq!(cfg.model.volume, 4e6);
        assert_eq!(cfg.sim.seed, 11);
        assert_eq!(cfg.regime.kind, "terminal-threshold");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_str("[model]\nbogus = 1\n").is_err());
        assert!(RunConfig::from_str("[bogus]\nx = 1\n").is_err());
    }

    #[test]
    fn hash_tracks_solve_inputs_only() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        b.sim.seed = 999;
        assert_eq!(a.solve_hash(), b.solve_hash());
        b.model.k = 3e-7;
        assert_ne!(a.solve_hash(), b.solve_hash());
    }

    #[test]
    fn regime_kinds_parse() {
        for kind in ["full-liquidation", "terminal-threshold", "stop-at-hit", "pause-below", "pause-with-buffer"] {
            let cfg = RunConfig::from_str(&format!("[regime]\nkind = \"{kind}\"\n")).unwrap();
            assert!(cfg.regime_spec().is_ok(), "{kind}");
        }
        let cfg = RunConfig::from_str("[regime]\nkind = \"nope\"\n").unwrap();
        assert!(cfg.regime_spec().is_err());
    }
}
