//! Command dispatch for the batch driver.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;

use crate::asymptotics::{compute_alpha_shift, zeta_for};
use crate::basis::{HermiteBasis, SpectralField};
use crate::bifurcation::{
    classify_stability, continue_branch, critical_epsilon, find_fixed_points, initial_condition,
    Backend, BifurcationBranch, SelfConsistencyMap, Stability,
};
use crate::config::{Command, RunConfig};
use crate::error::{Error, Result};
use crate::io::{atomic_write, fmt_f64, sha256_hex, write_csv, write_field_grid, CsvTable, Header};
use crate::mc::{derive_seed, simulate, McEstimate};
use crate::operators::{
    colored_operator, white_operator, ColoredModel, McKeanOperator, ProblemSpec,
};
use crate::solver::{integrate_mckean, steady_state_linear};

/// Process exit status for an error: 2 configuration, 3 solver, 4 I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) | Error::DimensionMismatch(_) => 2,
        Error::Io(_) => 4,
        _ => 3,
    }
}

/// Files written and lines meant for standard output.
#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub artifacts: Vec<PathBuf>,
    pub stdout: Vec<String>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    report: RunReport,
}

impl Ctx<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.cfg.output.dir.join(name)
    }

    fn header(&self) -> Header {
        let c = self.cfg;
        let mut h = Header::new();
        h.push(
            "generator",
            format!("hermite-fp {}", env!("CARGO_PKG_VERSION")),
        )
        .push("command", c.command)
        .push("config-hash", c.hash())
        .push("seed", c.mc.seed)
        .push("degrees", format!("{:?}", c.degrees()))
        .push("sigma", format!("{:?}", c.sigmas()));
        h
    }

    fn with_config(&self, mut h: Header) -> Header {
        h.block("config", &self.cfg.to_toml());
        h
    }

    fn csv(
        &mut self,
        name: &str,
        extra: Header,
        columns: &[&str],
        rows: &[Vec<String>],
    ) -> Result<()> {
        let path = self.path(name);
        write_csv(&path, &self.with_config(extra), columns, rows)?;
        self.report.artifacts.push(path);
        Ok(())
    }

    fn grids(&mut self, field: &SpectralField) -> Result<()> {
        let out = &self.cfg.output;
        let marginal = field.marginal(0)?;
        let path = self.path("marginal.grid");
        write_field_grid(&path, &self.with_config(self.header()), &marginal, &[out.x])?;
        self.report.artifacts.push(path);
        if field.basis.dims() == 2 {
            let path = self.path("density.grid");
            write_field_grid(
                &path,
                &self.with_config(self.header()),
                field,
                &[out.x, out.eta],
            )?;
            self.report.artifacts.push(path);
        }
        Ok(())
    }
}

fn stage<T>(name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t = Instant::now();
    let r = f();
    info!("{name}: {:.3?}", t.elapsed());
    r
}

/// Execute `cfg`, writing its artifacts under `cfg.output.dir`.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    let mut ctx = Ctx {
        cfg,
        report: RunReport::default(),
    };
    std::fs::create_dir_all(&cfg.output.dir)?;
    match cfg.command {
        Command::SolveLinear => solve_linear(&mut ctx)?,
        Command::SolveMckean => solve_mckean(&mut ctx)?,
        Command::SelfConsistency => self_consistency(&mut ctx)?,
        Command::Bifurcate => bifurcate(&mut ctx)?,
        Command::Mc => mc(&mut ctx)?,
        Command::Zeta => zeta(&mut ctx)?,
        Command::CriticalEpsilon => crit_eps(&mut ctx)?,
        Command::Compare => compare(&mut ctx)?,
    }
    Ok(ctx.report)
}

fn beta(cfg: &RunConfig) -> Result<f64> {
    cfg.problem
        .beta
        .ok_or_else(|| Error::Config("missing required keys: problem.beta".into()))
}

fn betas(cfg: &RunConfig) -> Vec<f64> {
    cfg.problem
        .betas
        .clone()
        .unwrap_or_else(|| cfg.problem.beta.into_iter().collect())
}

fn basis_for(cfg: &RunConfig, spec: &ProblemSpec) -> Result<Arc<HermiteBasis>> {
    Ok(Arc::new(cfg.setup().basis(spec)?))
}

/// The self-consistency map selected by the config.
pub fn build_map(cfg: &RunConfig) -> Result<SelfConsistencyMap> {
    let theta = cfg.problem.theta;
    match cfg.numerics.backend {
        Backend::WhiteExact => SelfConsistencyMap::white_exact(cfg.potential(), theta),
        Backend::AsymptoticOU => SelfConsistencyMap::asymptotic_ou(
            cfg.potential(),
            theta,
            cfg.problem.epsilon.unwrap_or(0.0),
        ),
        Backend::SpectralLinear => {
            SelfConsistencyMap::spectral(cfg.spec(any_beta(cfg))?, cfg.model(), cfg.setup())
        }
        Backend::SpectralMcKean => SelfConsistencyMap::spectral_mckean(
            cfg.spec(any_beta(cfg))?,
            cfg.model(),
            cfg.setup(),
            cfg.solver(),
        ),
    }
}

fn any_beta(cfg: &RunConfig) -> f64 {
    let p = &cfg.problem;
    p.beta
        .or(p.betas.as_ref().and_then(|b| b.first().copied()))
        .or(p.beta_range.map(|r| r[0]))
        .unwrap_or(1.0)
}

fn solve_linear(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let spec = cfg.spec(beta(cfg)?)?;
    let m = cfg.problem.m;
    let basis = stage("basis", || basis_for(cfg, &spec))?;
    let op = stage("assembly", || {
        if spec.noise.is_white() {
            white_operator(&spec, m, &basis)
        } else {
            colored_operator(&spec, m, &basis)
        }
    })?;
    if cfg.output.dump_matrix {
        let path = ctx.path("matrix.txt");
        let mut s = String::new();
        for (r, c, v) in op.triplets() {
            writeln!(s, "{r} {c} {v:e}").unwrap();
        }
        atomic_write(&path, s.as_bytes())?;
        ctx.report.artifacts.push(path);
    }
    let ss = stage("steady state", || steady_state_linear(&op, &basis, None))?;
    let mean = ss.field.first_moment()?;
    ctx.csv(
        "steady.csv",
        ctx.header(),
        &["mass", "mean", "residual", "iterations"],
        &[vec![
            fmt_f64(ss.field.mass()),
            fmt_f64(mean),
            fmt_f64(ss.residual),
            ss.iterations.to_string(),
        ]],
    )?;
    ctx.grids(&ss.field)?;
    ctx.report
        .stdout
        .push(format!("mean = {mean:.10}, residual = {:.3e}", ss.residual));
    Ok(())
}

fn solve_mckean(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let spec = cfg.spec(beta(cfg)?)?;
    let basis = stage("basis", || basis_for(cfg, &spec))?;
    let op = stage("assembly", || McKeanOperator::new(&spec, &basis))?;
    let rho0 = stage("initial condition", || {
        initial_condition(&spec, &basis, cfg.initial.0, cfg.initial.1)
    })?;
    let solver = cfg.solver();
    let k = cfg.numerics.samples.max(1);
    let samples: Vec<f64> = (0..=k)
        .map(|i| solver.t_final * i as f64 / k as f64)
        .collect();
    let traj = stage("time integration", || {
        integrate_mckean(&op, &rho0, &solver, &samples, None)
    })?;
    let rows: Vec<Vec<String>> = traj
        .times
        .iter()
        .zip(&traj.moments)
        .map(|(t, m)| vec![fmt_f64(*t), fmt_f64(*m)])
        .collect();
    let mut h = ctx.header();
    h.push("steady", traj.steady)
        .push("t_end", fmt_f64(traj.t_end))
        .push("steps", traj.steps);
    ctx.csv("moments.csv", h, &["t", "m"], &rows)?;
    ctx.grids(&traj.field)?;
    let m = traj.moments.last().copied().unwrap_or(f64::NAN);
    ctx.report
        .stdout
        .push(format!("m(t = {:.4}) = {m:.10}", traj.t_end));
    Ok(())
}

/// Fixed points at `beta` with their stability.
fn fixed_points(
    cfg: &RunConfig,
    map: &SelfConsistencyMap,
    beta: f64,
) -> Result<Vec<(f64, Stability)>> {
    let [lo, hi] = cfg.numerics.search;
    if map.backend() == Backend::SpectralMcKean {
        let (m0, v0) = cfg.initial;
        let mut out: Vec<(f64, Stability)> = Vec::new();
        for start in [m0, -m0] {
            let m = map.mckean_fixed_point(beta, start, v0)?;
            if out.iter().all(|(x, _)| (x - m).abs() > 1e-6) {
                out.push((m, Stability::Stable));
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        return Ok(out);
    }
    find_fixed_points(map, beta, lo, hi, cfg.numerics.n_grid)?
        .into_iter()
        .map(|m| Ok((m, classify_stability(map, m, beta)?)))
        .collect()
}

fn self_consistency(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let b = beta(cfg)?;
    let map = build_map(cfg)?;
    if map.backend() != Backend::SpectralMcKean {
        let [lo, hi] = cfg.numerics.search;
        let n = cfg.numerics.n_grid.max(2);
        let rows = stage("map scan", || {
            (0..n)
                .map(|i| {
                    let m = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                    Ok(vec![fmt_f64(m), fmt_f64(map.evaluate(m, b)?)])
                })
                .collect::<Result<Vec<_>>>()
        })?;
        ctx.csv("map.csv", ctx.header(), &["m", "r"], &rows)?;
    }
    let fps = stage("fixed points", || fixed_points(cfg, &map, b))?;
    let rows: Vec<Vec<String>> = fps
        .iter()
        .map(|(m, s)| vec![fmt_f64(b), fmt_f64(*m), s.name().to_string()])
        .collect();
    let mut h = ctx.header();
    h.push("backend", map.backend());
    ctx.csv("fixed_points.csv", h, &["beta", "m", "stability"], &rows)?;
    for (m, s) in &fps {
        ctx.report.stdout.push(format!("m = {m:.10} ({s})"));
    }
    Ok(())
}

fn on_branch(branches: &[BifurcationBranch], beta: f64, m: f64) -> bool {
    branches.iter().any(|b| {
        b.points
            .iter()
            .any(|p| (p.beta - beta).abs() < 0.02 && (p.m - m).abs() < 0.02)
    })
}

/// Branch CSV columns.
pub const BRANCH_COLUMNS: [&str; 6] = ["beta", "m", "stability", "backend", "epsilon", "model"];

fn bifurcate(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let [lo, hi] = cfg
        .problem
        .beta_range
        .ok_or_else(|| Error::Config("missing required keys: problem.beta_range".into()))?;
    let map = build_map(cfg)?;
    let opts = cfg.numerics.continuation;
    let mut branches: Vec<BifurcationBranch> = Vec::new();
    stage("continuation", || {
        for (from, to) in [(hi, lo), (lo, hi)] {
            let roots = find_fixed_points(
                &map,
                from,
                cfg.numerics.search[0],
                cfg.numerics.search[1],
                cfg.numerics.n_grid,
            )?;
            for m in roots {
                if on_branch(&branches, from, m) {
                    continue;
                }
                let b = continue_branch(&map, (from, m), to, &opts)?;
                if let Some(why) = &b.truncated {
                    warn!("branch from ({from}, {m:.6}) truncated: {why}");
                }
                branches.push(b);
            }
        }
        Ok(())
    })?;
    let eps = cfg.problem.epsilon.map(fmt_f64).unwrap_or_default();
    let model = cfg.problem.noise.name();
    let mut bif: Vec<f64> = branches
        .iter()
        .flat_map(|b| b.bifurcations.iter().copied())
        .collect();
    bif.sort_by(|a, b| a.total_cmp(b));
    bif.dedup_by(|a, b| (*a - *b).abs() < 1e-4);
    for (k, b) in branches.iter().enumerate() {
        let rows: Vec<Vec<String>> = b
            .points
            .iter()
            .map(|p| {
                vec![
                    fmt_f64(p.beta),
                    fmt_f64(p.m),
                    p.stability.name().to_string(),
                    map.backend().name().to_string(),
                    eps.clone(),
                    model.to_string(),
                ]
            })
            .collect();
        let steps: Vec<f64> = b.points.iter().skip(1).map(|p| p.step).collect();
        let mut h = ctx.header();
        h.push("branch", k)
            .push("points", b.points.len())
            .push(
                "step-min",
                fmt_f64(steps.iter().copied().fold(f64::INFINITY, f64::min)),
            )
            .push(
                "step-max",
                fmt_f64(steps.iter().copied().fold(0.0, f64::max)),
            )
            .push(
                "residual-max",
                fmt_f64(b.points.iter().map(|p| p.residual).fold(0.0, f64::max)),
            )
            .push("truncated", b.truncated.as_deref().unwrap_or("no"));
        ctx.csv(&format!("branch_{k}.csv"), h, &BRANCH_COLUMNS, &rows)?;
    }
    let rows: Vec<Vec<String>> = bif.iter().map(|b| vec![fmt_f64(*b)]).collect();
    ctx.csv("bifurcations.csv", ctx.header(), &["beta"], &rows)?;
    ctx.report.stdout.push(format!(
        "{} branches, bifurcations at beta = {bif:?}",
        branches.len()
    ));
    Ok(())
}

/// Maximum `|R(m, beta) - m|` over the points of a branch file.
pub fn verify_branch_file(path: &Path, map: &SelfConsistencyMap) -> Result<f64> {
    let t = CsvTable::read(path)?;
    let betas = t.floats("beta")?;
    let ms = t.floats("m")?;
    let mut worst: f64 = 0.0;
    for (b, m) in betas.iter().zip(&ms) {
        worst = worst.max(map.residual(*m, *b)?.abs());
    }
    Ok(worst)
}

/// MC estimates for a list of betas, reusing cached points whose hash matches.
fn mc_points(ctx: &mut Ctx, tag: &str, betas: &[f64]) -> Result<Vec<Result<McEstimate>>> {
    let cfg = ctx.cfg;
    let dir = ctx.path("points");
    std::fs::create_dir_all(&dir)?;
    let cfg_hash = cfg.hash();
    let key =
        |i: usize, b: f64| sha256_hex(format!("{cfg_hash}:{tag}:{i}:{}", b.to_bits()).as_bytes());
    let cached = |i: usize, b: f64| -> Option<McEstimate> {
        let t = CsvTable::read(&dir.join(format!("{tag}_{i}.csv"))).ok()?;
        if t.header.get("point-hash") != Some(key(i, b).as_str()) {
            return None;
        }
        let m = t.floats("m_hat").ok()?;
        let s = t.floats("std_error").ok()?;
        let v = t.floats("variance").ok()?;
        Some(McEstimate {
            m_hat: *m.first()?,
            std_error: *s.first()?,
            trajectory: Vec::new(),
            variance: *v.first()?,
            noise_variance: f64::NAN,
        })
    };
    let results: Vec<(Result<McEstimate>, bool)> = stage("particle simulation", || {
        Ok(betas
            .par_iter()
            .enumerate()
            .map(|(i, &b)| {
                if cfg.mc.trajectory_stride.is_none() {
                    if let Some(e) = cached(i, b) {
                        info!("reusing cached point beta = {b}");
                        return (Ok(e), true);
                    }
                }
                let spec = match cfg.spec(b) {
                    Ok(s) => s,
                    Err(e) => return (Err(e), false),
                };
                let mc = crate::mc::McConfig {
                    seed: derive_seed(cfg.mc.seed, i as u64),
                    ..cfg.mc.clone()
                };
                (simulate(&spec, &mc), false)
            })
            .collect())
    })?;
    let mut out = Vec::with_capacity(betas.len());
    for (i, ((r, reused), &b)) in results.into_iter().zip(betas).enumerate() {
        if let Ok(e) = &r {
            if !reused {
                let mut h = ctx.header();
                h.push("point-hash", key(i, b)).push("beta", fmt_f64(b));
                let path = dir.join(format!("{tag}_{i}.csv"));
                write_csv(
                    &path,
                    &h,
                    &["beta", "m_hat", "std_error", "variance"],
                    &[vec![
                        fmt_f64(b),
                        fmt_f64(e.m_hat),
                        fmt_f64(e.std_error),
                        fmt_f64(e.variance),
                    ]],
                )?;
            }
            if !e.trajectory.is_empty() {
                let rows: Vec<Vec<String>> = e
                    .trajectory
                    .iter()
                    .map(|(t, m)| vec![fmt_f64(*t), fmt_f64(*m)])
                    .collect();
                let mut h = ctx.header();
                h.push("beta", fmt_f64(b));
                ctx.csv(&format!("trajectory_{i}.csv"), h, &["t", "m_emp"], &rows)?;
            }
        }
        out.push(r);
    }
    Ok(out)
}

fn sorted_indices(betas: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..betas.len()).collect();
    idx.sort_by(|&a, &b| betas[a].total_cmp(&betas[b]).then(a.cmp(&b)));
    idx
}

fn mc(ctx: &mut Ctx) -> Result<()> {
    let bs = betas(ctx.cfg);
    let results = mc_points(ctx, "mc", &bs)?;
    let mut rows = Vec::new();
    let mut first_err = None;
    for i in sorted_indices(&bs) {
        match &results[i] {
            Ok(e) => {
                rows.push(vec![fmt_f64(bs[i]), fmt_f64(e.m_hat), fmt_f64(e.std_error)]);
                ctx.report.stdout.push(format!(
                    "beta = {}: m = {:.6} +- {:.6}",
                    bs[i], e.m_hat, e.std_error
                ));
            }
            Err(e) => {
                warn!("beta = {}: {e}", bs[i]);
                rows.push(vec![fmt_f64(bs[i]), "nan".into(), "nan".into()]);
                first_err.get_or_insert_with(|| format!("beta = {}: {e}", bs[i]));
            }
        }
    }
    ctx.csv(
        "mc.csv",
        ctx.header(),
        &["beta", "m_hat", "std_error"],
        &rows,
    )?;
    match first_err {
        Some(e) => Err(Error::NonConvergence(format!(
            "particle simulation failed at {e}"
        ))),
        None => Ok(()),
    }
}

/// Rows of the `zeta` table: model, formatted zeta, formatted alpha.
pub fn zeta_rows() -> Result<Vec<[String; 3]>> {
    let alpha = compute_alpha_shift();
    ColoredModel::ALL
        .iter()
        .map(|&m| {
            let z = zeta_for(m)?;
            // Gaussian noises are exact; the others are certified to three decimals
            let zs = if m.is_gaussian() {
                format!("{z:.5}")
            } else {
                format!("{z:.3}")
            };
            let a = if m == ColoredModel::NS {
                format!("{alpha:.3}")
            } else {
                "0".to_string()
            };
            Ok([m.name().to_string(), zs, a])
        })
        .collect()
}

fn zeta(ctx: &mut Ctx) -> Result<()> {
    let rows = stage("noise constants", zeta_rows)?;
    ctx.report.stdout.push("model,zeta,alpha".into());
    for r in &rows {
        ctx.report.stdout.push(r.join(","));
    }
    let rows: Vec<Vec<String>> = rows.into_iter().map(Vec::from).collect();
    ctx.csv("zeta.csv", ctx.header(), &["model", "zeta", "alpha"], &rows)
}

fn crit_eps(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let bs = betas(cfg);
    let mut rows = Vec::new();
    for i in sorted_indices(&bs) {
        let roots = critical_epsilon(&cfg.potential(), bs[i], cfg.problem.theta)?;
        if roots.is_empty() {
            rows.push(vec![fmt_f64(bs[i]), String::new()]);
        }
        for e in roots {
            rows.push(vec![fmt_f64(bs[i]), fmt_f64(e)]);
        }
    }
    for r in &rows {
        ctx.report.stdout.push(format!(
            "beta_c = {}: epsilon = {}",
            r[0],
            if r[1].is_empty() { "none" } else { &r[1] }
        ));
    }
    ctx.csv(
        "critical_epsilon.csv",
        ctx.header(),
        &["beta_c", "epsilon"],
        &rows,
    )
}

/// Tolerance of the three-way comparison.
pub fn agreement_tolerance(mc_std_error: f64) -> f64 {
    (3.0 * mc_std_error).max(0.02)
}

fn compare(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let bs = betas(cfg);
    let eps = cfg.problem.epsilon.unwrap_or(0.0);
    let theta = cfg.problem.theta;
    let [lo, hi] = cfg.numerics.search;
    let spectral = SelfConsistencyMap::spectral(cfg.spec(bs[0])?, cfg.model(), cfg.setup())?;
    let asymptotic = SelfConsistencyMap::asymptotic_ou(cfg.potential(), theta, eps)?;
    let top = |map: &SelfConsistencyMap, b: f64| -> Result<f64> {
        let r = find_fixed_points(map, b, lo, hi, cfg.numerics.n_grid)?;
        r.iter()
            .map(|m| m.abs())
            .fold(None, |a: Option<f64>, m| Some(a.map_or(m, |a| a.max(m))))
            .ok_or_else(|| Error::NonConvergence(format!("no fixed point at beta = {b}")))
    };
    let maps = stage("spectral and asymptotic maps", || {
        bs.iter()
            .map(|&b| Ok((top(&spectral, b)?, top(&asymptotic, b)?)))
            .collect::<Result<Vec<_>>>()
    })?;
    let mcs = mc_points(ctx, "compare", &bs)?;
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for i in sorted_indices(&bs) {
        let (s, a) = maps[i];
        let e = mcs[i]
            .as_ref()
            .map_err(|e| Error::NonConvergence(format!("beta = {}: {e}", bs[i])))?;
        let m = e.m_hat.abs();
        let dev = (s - a).abs().max((s - m).abs()).max((a - m).abs());
        let tol = agreement_tolerance(e.std_error);
        let ok = dev <= tol;
        if !ok {
            failed.push(bs[i]);
        }
        rows.push(vec![
            fmt_f64(bs[i]),
            fmt_f64(s),
            fmt_f64(a),
            fmt_f64(m),
            fmt_f64(e.std_error),
            fmt_f64(dev),
            fmt_f64(tol),
            ok.to_string(),
        ]);
        ctx.report.stdout.push(format!(
            "beta = {}: spectral {s:.5}, asymptotic {a:.5}, mc {m:.5} +- {:.5}, deviation {dev:.2e} (tol {tol:.2e})",
            bs[i], e.std_error
        ));
    }
    ctx.csv(
        "compare.csv",
        ctx.header(),
        &[
            "beta",
            "m_spectral",
            "m_asymptotic",
            "m_mc",
            "mc_std_error",
            "max_deviation",
            "tolerance",
            "agree",
        ],
        &rows,
    )?;
    if !failed.is_empty() {
        warn!("backends disagree at beta = {failed:?}");
    }
    Ok(())
}
