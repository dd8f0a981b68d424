//! Run orchestration behind the command-line surface: feasibility checks,
//! solve dispatch and persistence, simulation against stored grids, record
//! analysis, and parameter sweeps.

use std::fs;
use std::path::Path;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{self, Manifest};
use crate::model::{self, RegimeKind, ValidationReport};
use crate::pde1d::{self, Grid1D, RecursionState, Regime3Solution, SolveSpec, TerminalSpec, TimeMesh};
use crate::pde_sv::{self, Grid2D};
use crate::sim::{self, PathRecord, StrategyGrids};
use crate::stats::{self, ComparisonTable, RunSummary};

/// The solved value function in whichever shape the regime calls for.
pub enum SolvedKind {
    Single(Grid1D),
    Staged(Regime3Solution),
    Switching(RecursionState),
    Surface(Grid2D),
}

impl SolvedKind {
    pub fn engine_name(&self) -> &'static str {
        match self {
            SolvedKind::Single(_) => "grid1d",
            SolvedKind::Staged(_) => "grid1d-staged",
            SolvedKind::Switching(_) => "grid1d-switching",
            SolvedKind::Surface(_) => "grid2d-sv",
        }
    }
}

/// Validate the configured model; the report carries one line per condition.
pub fn cmd_check(cfg: &RunConfig) -> Result<ValidationReport> {
    let params = cfg.model_params()?;
    let sv = cfg.sv_params()?;
    let regime = cfg.regime_spec()?;
    Ok(model::validate(&params, sv.as_ref(), &regime))
}

pub fn format_report(report: &ValidationReport) -> String {
    let mut out = String::new();
    for check in &report.checks {
        out.push_str(&format!("[{}] {:<18} {}\n", if check.pass { "pass" } else { "FAIL" }, check.name, check.detail));
    }
    out
}

fn terminal_for(cfg: &RunConfig, ell: f64, neg: f64) -> TerminalSpec {
    match cfg.solver.mollify_ramp {
        Some(ramp) => TerminalSpec::ThresholdMollified { ell, neg, ramp },
        None => TerminalSpec::ThresholdSingular { ell, neg },
    }
}

/// Solve the configured problem. Dispatches to the surface engine when a
/// stochastic-volatility block is present or the cost exponent is not 2,
/// and to the canonical 1D engine otherwise.
pub fn cmd_solve(cfg: &RunConfig) -> Result<SolvedKind> {
    let params = cfg.model_params()?;
    let sv = cfg.sv_params()?;
    let regime = cfg.regime_spec()?;
    model::ensure_valid(&params, sv.as_ref(), &regime)?;

    let quadratic = (params.p_hat - 2.0).abs() <= 1e-12;
    if sv.is_some() || !quadratic {
        let sv = sv.ok_or_else(|| {
            Error::Config("non-quadratic cost exponents run through the surface engine; add an [sv] block".into())
        })?;
        // Surface engine works in price units: scale the sigma-unit floor and
        // size the domain by the reference variance.
        let nu_ref = sv.theta.max(sv.nu0);
        let mut spec = cfg.solve_spec_sv();
        let half = cfg.solver.x_pad * (nu_ref * params.horizon).sqrt();
        spec.s_min = -half;
        spec.s_max = half;
        let vol_bar = params.vol_bar();
        let vol = move |_: f64, _: f64, _: f64| vol_bar;
        let terminal = match regime.kind {
            RegimeKind::FullLiquidation => TerminalSpec::AllSingular,
            RegimeKind::TerminalThreshold => {
                terminal_for(cfg, regime.ell * params.sigma, -params.k_term)
            }
            _ => {
                return Err(Error::Config(
                    "the surface engine covers the full-liquidation and terminal-threshold regimes".into(),
                ))
            }
        };
        let grid = pde_sv::solve_sv(&spec, &sv, &terminal, params.p, &vol)?;
        return Ok(SolvedKind::Surface(grid));
    }

    let canon = model::to_canonical(&params, &regime)?;
    let spec = cfg.solve_spec();
    let vol = |_: f64, _: f64| 1.0;
    let smooth = cfg.solver.smooth_indicator_eps;
    match regime.kind {
        RegimeKind::FullLiquidation => {
            let grid = pde1d::solve_singular(&spec, &TerminalSpec::AllSingular, 2.0, &vol)?;
            Ok(SolvedKind::Single(grid))
        }
        RegimeKind::TerminalThreshold => {
            let terminal = terminal_for(cfg, regime.ell, -canon.k_c);
            let grid = pde1d::solve_singular(&spec, &terminal, 2.0, &vol)?;
            Ok(SolvedKind::Single(grid))
        }
        RegimeKind::StopAtHit => {
            let spec = SolveSpec { x_min: regime.ell, ..spec };
            let grid = pde1d::solve_regime2(&spec, 2.0, &vol, -canon.k_c)?;
            Ok(SolvedKind::Single(grid))
        }
        RegimeKind::PauseBelow => {
            let sol = pde1d::solve_regime3(&spec, regime.ell, regime.delta, 2.0, &vol, -canon.k_c, smooth)?;
            Ok(SolvedKind::Staged(sol))
        }
        RegimeKind::PauseWithBuffer => {
            let state = pde1d::solve_regime4(
                &spec,
                regime.ell,
                regime.delta,
                regime.b,
                regime.n_switches.unwrap_or(3),
                2.0,
                &vol,
                -canon.k_c,
            )?;
            Ok(SolvedKind::Switching(state))
        }
    }
}

fn grid_file(dir: &Path, name: &str, fmt: &str) -> std::path::PathBuf {
    dir.join(format!("{name}.{}", if fmt == "bin" { "bin" } else { "csv" }))
}

fn write_grid(path: &Path, grid: &Grid1D, fmt: &str) -> Result<()> {
    if fmt == "bin" {
        io::write_grid1_bin(path, grid)
    } else {
        io::write_grid1(path, grid)
    }
}

fn read_grid(path: &Path, fmt: &str) -> Result<Grid1D> {
    if fmt == "bin" {
        io::read_grid1_bin(path)
    } else {
        io::read_grid1(path)
    }
}

/// Persist a solve with its manifest into `dir`.
pub fn persist_solve(dir: &Path, cfg: &RunConfig, solved: &SolvedKind) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let fmt = cfg.output.grid_format.as_str();
    let mut files = Vec::new();
    let (trunc_level, cert) = match solved {
        SolvedKind::Single(g) => {
            let p = grid_file(dir, "grid", fmt);
            write_grid(&p, g, fmt)?;
            files.push(p.file_name().unwrap().to_string_lossy().into_owned());
            ((!g.trunc_level.is_infinite()).then_some(g.trunc_level), g.cert.clone())
        }
        SolvedKind::Staged(sol) => {
            for (name, g) in [("grid_main", &sol.main), ("grid_end", &sol.end)] {
                let p = grid_file(dir, name, fmt);
                write_grid(&p, g, fmt)?;
                files.push(p.file_name().unwrap().to_string_lossy().into_owned());
            }
            (None, sol.end.cert.clone())
        }
        SolvedKind::Switching(state) => {
            let p = grid_file(dir, "grid_inf", fmt);
            write_grid(&p, &state.u_inf, fmt)?;
            files.push(p.file_name().unwrap().to_string_lossy().into_owned());
            for (n, g) in state.u1s.iter().enumerate() {
                let p = grid_file(dir, &format!("grid_u1_{}", n + 1), fmt);
                write_grid(&p, g, fmt)?;
                files.push(p.file_name().unwrap().to_string_lossy().into_owned());
            }
            for (n, g) in state.u0s.iter().enumerate() {
                let p = grid_file(dir, &format!("grid_u0_{}", n + 1), fmt);
                write_grid(&p, g, fmt)?;
                files.push(p.file_name().unwrap().to_string_lossy().into_owned());
            }
            (None, state.u_inf.cert.clone())
        }
        SolvedKind::Surface(g) => {
            let p = dir.join("surface.csv");
            io::write_grid2(&p, g)?;
            files.push("surface.csv".into());
            ((!g.trunc_level.is_infinite()).then_some(g.trunc_level), g.cert.clone())
        }
    };
    let manifest = Manifest {
        config_hash: cfg.solve_hash(),
        regime_kind: cfg.regime.kind.clone(),
        engine: solved.engine_name().into(),
        trunc_level,
        cert,
        files,
        n_switches: matches!(solved, SolvedKind::Switching(_)).then(|| cfg.regime.max_switches),
    };
    io::write_manifest(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Load a persisted solve back.
pub fn load_solved(dir: &Path, cfg: &RunConfig) -> Result<(SolvedKind, Manifest)> {
    let manifest = io::read_manifest(&dir.join("manifest.json"))?;
    let fmt = cfg.output.grid_format.as_str();
    let solved = match manifest.engine.as_str() {
        "grid1d" => SolvedKind::Single(read_grid(&grid_file(dir, "grid", fmt), fmt)?),
        "grid1d-staged" => {
            let main = read_grid(&grid_file(dir, "grid_main", fmt), fmt)?;
            let end = read_grid(&grid_file(dir, "grid_end", fmt), fmt)?;
            let ell = end.x[0];
            let delta = end.t.last().unwrap() - end.t[0];
            SolvedKind::Staged(Regime3Solution { end, main, ell, delta })
        }
        "grid1d-switching" => {
            let u_inf = read_grid(&grid_file(dir, "grid_inf", fmt), fmt)?;
            let budget = manifest.n_switches.unwrap_or(1) as usize;
            let mut u1s = Vec::with_capacity(budget);
            let mut u0s = Vec::with_capacity(budget);
            for n in 1..=budget {
                u1s.push(read_grid(&grid_file(dir, &format!("grid_u1_{n}"), fmt), fmt)?);
                u0s.push(read_grid(&grid_file(dir, &format!("grid_u0_{n}"), fmt), fmt)?);
            }
            let ell = u_inf.x[0];
            let b = u0s[0].x.last().unwrap() - ell;
            let delta = u_inf.t.last().unwrap() - u_inf.t[0];
            let floor_value = *u0s[0].values.last().unwrap().first().unwrap();
            let mesh = TimeMesh {
                levels: u1s[0].t.iter().chain(u_inf.t.iter().skip(1)).cloned().collect(),
            };
            SolvedKind::Switching(RecursionState { u_inf, u1s, u0s, ell, b, delta, floor_value, mesh })
        }
        "grid2d-sv" => SolvedKind::Surface(io::read_grid2(&dir.join("surface.csv"))?),
        other => return Err(Error::Config(format!("unknown engine '{other}' in manifest"))),
    };
    Ok((solved, manifest))
}

/// Simulate the configured batch against an in-memory solve.
pub fn simulate_with(cfg: &RunConfig, solved: &SolvedKind) -> Result<Vec<PathRecord>> {
    let params = cfg.model_params()?;
    let regime = cfg.regime_spec()?;
    let canon = model::to_canonical(&params, &regime)?;
    let grids = match solved {
        SolvedKind::Single(g) => StrategyGrids::Single(g),
        SolvedKind::Staged(sol) => StrategyGrids::Staged(sol),
        SolvedKind::Switching(state) => StrategyGrids::Switching(state),
        SolvedKind::Surface(_) => {
            return Err(Error::GridMismatch(
                "path simulation runs against the 1D engines; solve without an [sv] block".into(),
            ))
        }
    };
    sim::run_batch(&cfg.sim_config(), &grids, &regime, &params, &canon)
}

/// Simulate against a persisted solve, verifying the manifest hash first.
pub fn cmd_simulate(cfg: &RunConfig, solve_dir: &Path) -> Result<Vec<PathRecord>> {
    let (solved, manifest) = load_solved(solve_dir, cfg)?;
    if manifest.config_hash != cfg.solve_hash() {
        return Err(Error::GridMismatch(format!(
            "solve manifest hash {} does not match the configuration hash {}",
            manifest.config_hash,
            cfg.solve_hash()
        )));
    }
    simulate_with(cfg, &solved)
}

/// Write records plus full trajectories for the configured dump indices.
pub fn persist_records(dir: &Path, cfg: &RunConfig, records: &[PathRecord]) -> Result<()> {
    fs::create_dir_all(dir)?;
    io::write_records(&dir.join("records.csv"), records)?;
    let sim_cfg = cfg.sim_config();
    for rec in records {
        if let Some(q) = &rec.q_dump {
            let (stream, flip) = if sim_cfg.antithetic { (rec.index / 2, rec.index % 2 == 1) } else { (rec.index, false) };
            let path =
                sim::gen_path_signed(sim_cfg.seed, rec.index, stream, sim_cfg.n_steps, sim_cfg.horizon, flip)?;
            io::write_trajectory(&dir.join(format!("path_{}.csv", rec.index)), path.dt, &path.w, q)?;
        }
    }
    Ok(())
}

/// Summarize records (and optionally compare against a baseline batch).
pub fn cmd_analyze(
    records: &[PathRecord],
    baseline: Option<&[PathRecord]>,
) -> Result<(RunSummary, Option<ComparisonTable>)> {
    let summary = stats::summarize(records)?;
    let comparison = baseline.map(|b| stats::compare_baseline(records, b));
    Ok((summary, comparison))
}

/// Persist the summary plus per-figure tables.
pub fn persist_analysis(
    dir: &Path,
    summary: &RunSummary,
    comparison: Option<&ComparisonTable>,
    records: &[PathRecord],
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(summary).map_err(|e| Error::Config(format!("summary encode: {e}")))?;
    fs::write(dir.join("summary.json"), json)?;
    for (name, table) in &summary.cdf_tables {
        let rows: Vec<Vec<f64>> = table.iter().map(|&(x, f)| vec![x, f]).collect();
        io::write_table(&dir.join(format!("cdf_{name}.csv")), "x,cdf", &rows)?;
    }
    // Conditional moments by fq bucket, one row per bucket.
    {
        let mut out = String::from("bucket,count,a2_mean,a2_sd,a2_skew,a2_exkurt,a3_mean,a3_sd\n");
        for b in &summary.conditional {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                b.label, b.count, b.a2.mean, b.a2.sd, b.a2.skew, b.a2.excess_kurtosis, b.a3.mean, b.a3.sd
            ));
        }
        fs::write(dir.join("conditional_stats.csv"), out)?;
    }
    // Quantile-quantile data of the noise term per bucket, for external plotting.
    for (label, bucket) in stats::bucket_grid() {
        let sample: Vec<f64> = records
            .iter()
            .filter(|r| !r.no_trades)
            .filter(|r| match bucket {
                stats::FqBucket::Closed => r.liquidated,
                stats::FqBucket::Range { lo, hi } => !r.liquidated && r.fq_t >= lo && r.fq_t < hi,
            })
            .map(|r| r.a2)
            .collect();
        let table = stats::qq_table(&sample);
        if table.len() >= 50 {
            let rows: Vec<Vec<f64>> = table.iter().map(|&(a, b)| vec![a, b]).collect();
            io::write_table(&dir.join(format!("qq_a2_{label}.csv")), "normal_q,sample_q", &rows)?;
        }
    }
    if let Some(cmp) = comparison {
        let mut out = String::from("metric,main,baseline\n");
        for row in &cmp.rows {
            out.push_str(&format!("{},{},{}\n", row.metric, row.main, row.baseline));
        }
        if let Some(median) = cmp.a3_closed_median {
            out.push_str(&format!("a3_closed_median,{median},\n"));
        }
        fs::write(dir.join("baseline_comparison.csv"), out)?;
    }
    Ok(())
}

/// Sweep axis for [`cmd_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// The floor level, sigma units.
    Ell,
    /// The impact-to-cost ratio `k V / eta` (sets `k` from it).
    KvOverEta,
}

impl SweepAxis {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "ell" => Ok(SweepAxis::Ell),
            "kv-over-eta" | "kv_over_eta" => Ok(SweepAxis::KvOverEta),
            other => Err(Error::Config(format!("unknown sweep axis '{other}' (ell | kv-over-eta)"))),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub p_liquidated: f64,
    pub mean_fq_pos: f64,
    pub sd_fq_pos: f64,
}

/// Solve + simulate + summarize for each axis value.
pub fn cmd_sweep(cfg: &RunConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(values.len());
    for &v in values {
        let mut point = cfg.clone();
        match axis {
            SweepAxis::Ell => point.regime.ell = v,
            SweepAxis::KvOverEta => point.model.k = v * point.model.eta / point.model.volume,
        }
        let solved = cmd_solve(&point)?;
        let records = simulate_with(&point, &solved)?;
        let summary = stats::summarize(&records)?;
        rows.push(SweepRow {
            value: v,
            p_liquidated: summary.p_liquidated,
            mean_fq_pos: summary.mean_fq_pos.unwrap_or(f64::NAN),
            sd_fq_pos: summary.sd_fq_pos.unwrap_or(f64::NAN),
        });
    }
    Ok(rows)
}

pub fn persist_sweep(dir: &Path, axis: SweepAxis, rows: &[SweepRow]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let axis_name = match axis {
        SweepAxis::Ell => "ell",
        SweepAxis::KvOverEta => "kv_over_eta",
    };
    let mut out = format!("{axis_name},p_liquidated,mean_fq_pos,sd_fq_pos\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.value, r.p_liquidated, r.mean_fq_pos, r.sd_fq_pos));
    }
    fs::write(dir.join("sweep.csv"), out)?;
    Ok(())
}
