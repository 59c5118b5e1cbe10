//! Run configuration: TOML text in, fully resolved [`RunConfig`] out.
//!
//! Unknown keys are errors and all missing required keys are reported
//! together. [`RunConfig::to_toml`] echoes every resolved value, defaults
//! included, and is what artifact headers record and hash.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use toml::{Table, Value};

use crate::bifurcation::{Backend, ContinuationOptions, SpectralSetup, XWeight};
use crate::error::{Error, Result};
use crate::hermite::IndexShape;
use crate::io::{sha256_hex, Axis};
use crate::mc::McConfig;
use crate::operators::{ColoredModel, NoiseModel, ProblemSpec};
use crate::poly::Poly1;
use crate::solver::{Scheme, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Command {
    SolveLinear,
    SolveMckean,
    SelfConsistency,
    Bifurcate,
    Mc,
    Zeta,
    CriticalEpsilon,
    Compare,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::SolveLinear,
        Command::SolveMckean,
        Command::SelfConsistency,
        Command::Bifurcate,
        Command::Mc,
        Command::Zeta,
        Command::CriticalEpsilon,
        Command::Compare,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::SolveLinear => "solve-linear",
            Command::SolveMckean => "solve-mckean",
            Command::SelfConsistency => "self-consistency",
            Command::Bifurcate => "bifurcate",
            Command::Mc => "mc",
            Command::Zeta => "zeta",
            Command::CriticalEpsilon => "critical-epsilon",
            Command::Compare => "compare",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command '{s}'")))
    }
}

/// Noise driving the particle coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseChoice {
    White,
    Colored(ColoredModel),
}

impl NoiseChoice {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseChoice::White => "white",
            NoiseChoice::Colored(m) => m.name(),
        }
    }

    pub fn dims(&self) -> usize {
        match self {
            NoiseChoice::White => 1,
            NoiseChoice::Colored(ColoredModel::H) => 3,
            NoiseChoice::Colored(_) => 2,
        }
    }
}

impl FromStr for NoiseChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("white") {
            Ok(NoiseChoice::White)
        } else {
            s.parse::<ColoredModel>()
                .map(NoiseChoice::Colored)
                .map_err(|_| Error::Config(format!("unknown noise '{s}' (white, OU, H, B, NS)")))
        }
    }
}

/// How the scaling `sigma` depends on the degree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SigmaSchedule {
    /// `sigma` is used as given.
    Fixed,
    /// `sigma_k / sqrt(d_k)`.
    InverseSqrt,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemConfig {
    /// Ascending coefficients of `V`.
    pub potential: Vec<f64>,
    pub theta: f64,
    pub beta: Option<f64>,
    pub beta_range: Option<[f64; 2]>,
    pub betas: Option<Vec<f64>>,
    pub noise: NoiseChoice,
    pub epsilon: Option<f64>,
    pub corrective_drift: bool,
    /// Frozen mean for `solve-linear`.
    pub m: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NumericsConfig {
    pub shape: IndexShape,
    pub degrees: Vec<usize>,
    pub sigma: Vec<f64>,
    pub sigma_schedule: SigmaSchedule,
    pub x_weight: XWeight,
    pub quad_degree: Option<Vec<usize>>,
    pub scheme: Scheme,
    pub dt: f64,
    pub atol: f64,
    pub rtol: f64,
    pub t_final: f64,
    pub steady_tol: f64,
    pub renormalize: bool,
    /// Number of equally spaced output times for time-dependent solves.
    pub samples: usize,
    pub backend: Backend,
    pub search: [f64; 2],
    pub n_grid: usize,
    pub continuation: ContinuationOptions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub x: Axis,
    pub eta: Axis,
    pub dump_matrix: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub problem: ProblemConfig,
    pub numerics: NumericsConfig,
    /// Gaussian start `(mean, variance)` for time-dependent solves.
    pub initial: (f64, f64),
    pub mc: McConfig,
    pub output: OutputConfig,
}

/// Walks a TOML table, remembering which keys were read so leftovers can be
/// reported, and collecting type errors and missing keys.
struct Reader<'a> {
    path: String,
    table: Option<&'a Table>,
    seen: BTreeSet<String>,
    missing: &'a mut Vec<String>,
    errors: &'a mut Vec<String>,
}

impl<'a> Reader<'a> {
    fn new(
        path: &str,
        table: Option<&'a Table>,
        missing: &'a mut Vec<String>,
        errors: &'a mut Vec<String>,
    ) -> Self {
        Reader {
            path: path.to_string(),
            table,
            seen: BTreeSet::new(),
            missing,
            errors,
        }
    }

    fn key(&self, k: &str) -> String {
        if self.path.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.path)
        }
    }

    fn raw(&mut self, k: &str) -> Option<&'a Value> {
        self.seen.insert(k.to_string());
        self.table.and_then(|t| t.get(k))
    }

    fn require<T>(&mut self, k: &str, v: Option<T>) -> Option<T> {
        if v.is_none() && self.table.is_none_or(|t| !t.contains_key(k)) {
            self.missing.push(self.key(k));
        }
        v
    }

    fn bad(&mut self, k: &str, what: &str) {
        let key = self.key(k);
        self.errors.push(format!("'{key}' must be {what}"));
    }

    fn f64(&mut self, k: &str) -> Option<f64> {
        match self.raw(k)? {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.bad(k, "a number");
                None
            }
        }
    }

    fn usize(&mut self, k: &str) -> Option<usize> {
        match self.raw(k)? {
            Value::Integer(i) if *i >= 0 => Some(*i as usize),
            _ => {
                self.bad(k, "a non-negative integer");
                None
            }
        }
    }

    fn u64(&mut self, k: &str) -> Option<u64> {
        match self.raw(k)? {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            // seeds above i64::MAX are written as strings
            Value::String(s) => match s.parse() {
                Ok(v) => Some(v),
                Err(_) => {
                    self.bad(k, "a non-negative integer");
                    None
                }
            },
            _ => {
                self.bad(k, "a non-negative integer");
                None
            }
        }
    }

    fn bool(&mut self, k: &str) -> Option<bool> {
        match self.raw(k)? {
            Value::Boolean(b) => Some(*b),
            _ => {
                self.bad(k, "true or false");
                None
            }
        }
    }

    fn string(&mut self, k: &str) -> Option<String> {
        match self.raw(k)? {
            Value::String(s) => Some(s.clone()),
            _ => {
                self.bad(k, "a string");
                None
            }
        }
    }

    fn parsed<T: FromStr<Err = Error>>(&mut self, k: &str) -> Option<T> {
        let s = self.string(k)?;
        match s.parse() {
            Ok(v) => Some(v),
            Err(e) => {
                let key = self.key(k);
                self.errors.push(format!("'{key}': {e}"));
                None
            }
        }
    }

    fn f64s(&mut self, k: &str) -> Option<Vec<f64>> {
        let arr = match self.raw(k)? {
            Value::Array(a) => a,
            _ => {
                self.bad(k, "an array of numbers");
                return None;
            }
        };
        let mut out = Vec::with_capacity(arr.len());
        for v in arr {
            match v {
                Value::Float(f) => out.push(*f),
                Value::Integer(i) => out.push(*i as f64),
                _ => {
                    self.bad(k, "an array of numbers");
                    return None;
                }
            }
        }
        Some(out)
    }

    fn usizes(&mut self, k: &str) -> Option<Vec<usize>> {
        let arr = match self.raw(k)? {
            Value::Array(a) => a,
            _ => {
                self.bad(k, "an array of integers");
                return None;
            }
        };
        let mut out = Vec::with_capacity(arr.len());
        for v in arr {
            match v {
                Value::Integer(i) if *i >= 0 => out.push(*i as usize),
                _ => {
                    self.bad(k, "an array of non-negative integers");
                    return None;
                }
            }
        }
        Some(out)
    }

    fn pair(&mut self, k: &str) -> Option<[f64; 2]> {
        let v = self.f64s(k)?;
        if v.len() != 2 {
            self.bad(k, "a two-element array");
            return None;
        }
        Some([v[0], v[1]])
    }

    /// Report keys that were never read.
    fn finish(self) {
        if let Some(t) = self.table {
            for k in t.keys() {
                if !self.seen.contains(k) {
                    let key = self.key(k);
                    self.errors.push(format!("unknown key '{key}'"));
                }
            }
        }
    }
}

fn section<'a>(root: &'a Table, name: &str, errors: &mut Vec<String>) -> Option<&'a Table> {
    match root.get(name) {
        None => None,
        Some(Value::Table(t)) => Some(t),
        Some(_) => {
            errors.push(format!("'{name}' must be a table"));
            None
        }
    }
}

const SECTIONS: [&str; 5] = ["problem", "numerics", "initial", "mc", "output"];

/// Defaults that depend on the noise model.
fn default_degrees(noise: NoiseChoice) -> Vec<usize> {
    match noise.dims() {
        1 => vec![60],
        2 => vec![40, 16],
        _ => vec![24, 10, 10],
    }
}

fn default_sigma(noise: NoiseChoice) -> Vec<f64> {
    let mut s = vec![0.3];
    s.resize(noise.dims(), 1.0);
    s
}

fn default_shape(noise: NoiseChoice) -> IndexShape {
    if noise.dims() == 1 {
        IndexShape::Triangle
    } else {
        IndexShape::Rectangle
    }
}

fn parse_shape(s: &str) -> Result<IndexShape> {
    match s {
        "triangle" => Ok(IndexShape::Triangle),
        "square" => Ok(IndexShape::Square),
        "rectangle" => Ok(IndexShape::Rectangle),
        _ => Err(Error::Config(format!(
            "unknown index set shape '{s}' (triangle, square, rectangle)"
        ))),
    }
}

fn shape_name(s: IndexShape) -> &'static str {
    match s {
        IndexShape::Triangle => "triangle",
        IndexShape::Square => "square",
        IndexShape::Rectangle => "rectangle",
    }
}

fn parse_x_weight(s: &str) -> Result<XWeight> {
    match s {
        "zero" => Ok(XWeight::Zero),
        "beta-v" => Ok(XWeight::BetaV),
        "boltzmann" => Ok(XWeight::Boltzmann),
        _ => Err(Error::Config(format!(
            "unknown x_weight '{s}' (zero, beta-v, boltzmann)"
        ))),
    }
}

fn x_weight_name(w: &XWeight) -> &'static str {
    match w {
        XWeight::Zero => "zero",
        XWeight::BetaV => "beta-v",
        XWeight::Boltzmann => "boltzmann",
        XWeight::Fixed(_) => "fixed",
    }
}

fn parse_scheme(s: &str) -> Result<Scheme> {
    match s {
        "rk45" => Ok(Scheme::Rk45),
        "semi-implicit" => Ok(Scheme::SemiImplicit),
        _ => Err(Error::Config(format!(
            "unknown scheme '{s}' (rk45, semi-implicit)"
        ))),
    }
}

fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::Rk45 => "rk45",
        Scheme::SemiImplicit => "semi-implicit",
    }
}

fn with_parse<T>(r: &mut Reader, k: &str, f: fn(&str) -> Result<T>) -> Option<T> {
    let s = r.string(k)?;
    match f(&s) {
        Ok(v) => Some(v),
        Err(e) => {
            let key = r.key(k);
            r.errors.push(format!("'{key}': {e}"));
            None
        }
    }
}

/// Parse `text` for `command`. A `command` key in the text, if present,
/// must agree.
pub fn parse_config(text: &str, command: Command) -> Result<RunConfig> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(format!("invalid TOML: {e}")))?;
    let mut missing = Vec::new();
    let mut errors = Vec::new();

    let mut top_missing = Vec::new();
    let mut top = Reader::new("", Some(&root), &mut top_missing, &mut errors);
    for sec in SECTIONS {
        top.seen.insert(sec.to_string());
    }
    let declared: Option<Command> = top.parsed("command");
    top.finish();
    if let Some(c) = declared {
        if c != command {
            errors.push(format!(
                "config is for '{c}' but the command is '{command}'"
            ));
        }
    }

    let needs_problem = command != Command::Zeta;
    let sections: Vec<Option<&Table>> = SECTIONS
        .iter()
        .map(|s| section(&root, s, &mut errors))
        .collect();

    // problem
    let mut p = Reader::new("problem", sections[0], &mut missing, &mut errors);
    let potential = p.f64s("potential");
    let potential = if needs_problem {
        p.require("potential", potential)
    } else {
        potential
    };
    let theta = p.f64("theta").unwrap_or(0.0);
    let beta = p.f64("beta");
    let beta_range = p.pair("beta_range");
    let betas = p.f64s("betas");
    let noise =
        with_parse(&mut p, "noise", |s| s.parse::<NoiseChoice>()).unwrap_or(NoiseChoice::White);
    let epsilon = p.f64("epsilon");
    let corrective_drift = p.bool("corrective_drift");
    let m = p.f64("m").unwrap_or(0.0);
    match command {
        Command::SolveLinear | Command::SolveMckean | Command::SelfConsistency => {
            p.require("beta", beta);
        }
        Command::Bifurcate => {
            p.require("beta_range", beta_range);
        }
        Command::Mc | Command::Compare => {
            if beta.is_none() && betas.is_none() {
                p.require("betas", betas.as_ref());
            }
        }
        Command::CriticalEpsilon => {
            p.require("betas", betas.as_ref());
        }
        Command::Zeta => {}
    }
    if noise != NoiseChoice::White && needs_problem {
        p.require("epsilon", epsilon);
    }
    p.finish();

    // numerics
    let mut n = Reader::new("numerics", sections[1], &mut missing, &mut errors);
    let shape = with_parse(&mut n, "shape", parse_shape).unwrap_or(default_shape(noise));
    let degrees = n
        .usizes("degrees")
        .unwrap_or_else(|| default_degrees(noise));
    let sigma = n.f64s("sigma").unwrap_or_else(|| default_sigma(noise));
    let sigma_schedule = with_parse(&mut n, "sigma_schedule", |s| match s {
        "fixed" => Ok(SigmaSchedule::Fixed),
        "inverse-sqrt" => Ok(SigmaSchedule::InverseSqrt),
        _ => Err(Error::Config(format!(
            "unknown sigma_schedule '{s}' (fixed, inverse-sqrt)"
        ))),
    })
    .unwrap_or(SigmaSchedule::Fixed);
    let x_weight = with_parse(&mut n, "x_weight", parse_x_weight).unwrap_or(XWeight::BetaV);
    let quad_degree = n.usizes("quad_degree");
    let sd = SolverConfig::default();
    let scheme = with_parse(&mut n, "scheme", parse_scheme).unwrap_or(sd.scheme);
    let dt = n.f64("dt").unwrap_or(sd.dt);
    let atol = n.f64("atol").unwrap_or(sd.atol);
    let rtol = n.f64("rtol").unwrap_or(sd.rtol);
    let t_final = n.f64("t_final").unwrap_or(sd.t_final);
    let steady_tol = n.f64("steady_tol").unwrap_or(0.0);
    let renormalize = n.bool("renormalize").unwrap_or(true);
    let samples = n.usize("samples").unwrap_or(50);
    let backend = n.parsed::<Backend>("backend").unwrap_or(match noise {
        NoiseChoice::White => Backend::WhiteExact,
        _ => Backend::SpectralLinear,
    });
    let search = n.pair("search").unwrap_or([-2.0, 2.0]);
    let n_grid = n.usize("n_grid").unwrap_or(101);
    let cd = ContinuationOptions::default();
    let continuation = ContinuationOptions {
        h0: n.f64("h0").unwrap_or(cd.h0),
        h_min: n.f64("h_min").unwrap_or(cd.h_min),
        h_max: n.f64("h_max").unwrap_or(cd.h_max),
        tol: n.f64("corrector_tol").unwrap_or(cd.tol),
        max_points: n.usize("max_points").unwrap_or(cd.max_points),
        fd_step: n.f64("fd_step").unwrap_or(cd.fd_step),
    };
    n.finish();

    // initial
    let mut i = Reader::new("initial", sections[2], &mut missing, &mut errors);
    let initial = (
        i.f64("mean").unwrap_or(0.1),
        i.f64("variance").unwrap_or(0.1),
    );
    i.finish();

    // mc
    let md = McConfig::default();
    let mut r = Reader::new("mc", sections[3], &mut missing, &mut errors);
    let mc = McConfig {
        n_particles: r.usize("n_particles").unwrap_or(md.n_particles),
        dt: r.f64("dt"),
        burn_in: r.f64("burn_in").unwrap_or(md.burn_in),
        window: r.f64("window").unwrap_or(md.window),
        seed: r.u64("seed").unwrap_or(md.seed),
        init_mean: r.f64("init_mean").unwrap_or(md.init_mean),
        init_var: r.f64("init_var").unwrap_or(md.init_var),
        batches: r.usize("batches").unwrap_or(md.batches),
        trajectory_stride: r.usize("trajectory_stride"),
    };
    r.finish();

    // output
    let mut o = Reader::new("output", sections[4], &mut missing, &mut errors);
    let dir = o
        .string("dir")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"));
    let xr = o.pair("x_range").unwrap_or([-3.0, 3.0]);
    let nx = o.usize("nx").unwrap_or(241);
    let er = o.pair("eta_range").unwrap_or([-4.0, 4.0]);
    let neta = o.usize("neta").unwrap_or(161);
    let dump_matrix = o.bool("dump_matrix").unwrap_or(false);
    o.finish();

    if !missing.is_empty() {
        errors.insert(0, format!("missing required keys: {}", missing.join(", ")));
    }
    if !errors.is_empty() {
        return Err(Error::Config(errors.join("; ")));
    }

    let cfg = RunConfig {
        command,
        problem: ProblemConfig {
            potential: potential
                .unwrap_or_else(|| crate::operators::bistable_potential().coeffs().to_vec()),
            theta,
            beta,
            beta_range,
            betas,
            noise,
            epsilon,
            corrective_drift: corrective_drift
                .unwrap_or(noise == NoiseChoice::Colored(ColoredModel::NS)),
            m,
        },
        numerics: NumericsConfig {
            shape,
            degrees,
            sigma,
            sigma_schedule,
            x_weight,
            quad_degree,
            scheme,
            dt,
            atol,
            rtol,
            t_final,
            steady_tol,
            renormalize,
            samples,
            backend,
            search,
            n_grid,
            continuation,
        },
        initial,
        mc,
        output: OutputConfig {
            dir,
            x: Axis {
                min: xr[0],
                max: xr[1],
                n: nx,
            },
            eta: Axis {
                min: er[0],
                max: er[1],
                n: neta,
            },
            dump_matrix,
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Cross-field checks that need the whole config.
    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        let n = &self.numerics;
        let mut errors = Vec::new();
        let dims = p.noise.dims();
        if n.degrees.len() != dims && !(n.degrees.len() == 1 && n.shape != IndexShape::Rectangle) {
            errors.push(format!(
                "numerics.degrees has {} entries but a {} problem has {dims} dimensions",
                n.degrees.len(),
                p.noise.name()
            ));
        }
        if n.sigma.len() != dims && n.sigma.len() != 1 {
            errors.push(format!(
                "numerics.sigma has {} entries, expected {dims}",
                n.sigma.len()
            ));
        }
        if n.sigma.iter().any(|s| !(*s > 0.0)) {
            errors.push("numerics.sigma entries must be positive".into());
        }
        if let Some(q) = &n.quad_degree {
            if q.len() != dims {
                errors.push(format!(
                    "numerics.quad_degree has {} entries, expected {dims}",
                    q.len()
                ));
            }
        }
        if p.noise == NoiseChoice::White && p.epsilon.is_some() {
            errors.push("problem.epsilon is only meaningful for colored noise".into());
        }
        if let Some([a, b]) = p.beta_range {
            if !(a > 0.0 && b > a) {
                errors.push("problem.beta_range must be increasing and positive".into());
            }
        }
        if !(n.search[0] < n.search[1]) {
            errors.push("numerics.search must be increasing".into());
        }
        if self.output.x.n < 2 || self.output.eta.n < 2 || !(self.output.x.min < self.output.x.max)
        {
            errors.push("output grids need at least two points and an increasing range".into());
        }
        match (n.backend, p.noise) {
            (Backend::WhiteExact, NoiseChoice::Colored(_)) => {
                errors.push("the white-exact backend needs white noise".into())
            }
            (Backend::AsymptoticOU, n) if n != NoiseChoice::Colored(ColoredModel::OU) => {
                errors.push("the asymptotic-ou backend needs OU noise".into())
            }
            _ => {}
        }
        if self.command == Command::CriticalEpsilon
            && p.noise != NoiseChoice::Colored(ColoredModel::OU)
        {
            errors.push("critical-epsilon needs OU noise".into());
        }
        if self.command == Command::Bifurcate && n.backend == Backend::SpectralMcKean {
            errors.push(
                "bifurcate needs a map backend; spectral-mckean only yields fixed points".into(),
            );
        }
        if self.command == Command::Compare && p.noise != NoiseChoice::Colored(ColoredModel::OU) {
            errors.push("compare needs OU noise".into());
        }
        if let Err(e) = self.solver().validate() {
            errors.push(e.to_string());
        }
        if self.command != Command::Zeta {
            let beta = self.any_beta();
            match self.spec(beta) {
                Ok(_) => {}
                Err(e) => errors.push(e.to_string()),
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors.join("; ")))
        }
    }

    fn any_beta(&self) -> f64 {
        let p = &self.problem;
        p.beta
            .or(p.betas.as_ref().and_then(|b| b.first().copied()))
            .or(p.beta_range.map(|r| r[0]))
            .unwrap_or(1.0)
    }

    pub fn potential(&self) -> Poly1 {
        Poly1::new(self.problem.potential.clone())
    }

    /// Problem at inverse temperature `beta`.
    pub fn spec(&self, beta: f64) -> Result<ProblemSpec> {
        let p = &self.problem;
        let mut spec = match p.noise {
            NoiseChoice::White => ProblemSpec::white(self.potential(), p.theta, beta)?,
            NoiseChoice::Colored(m) => ProblemSpec::colored(
                m,
                self.potential(),
                p.theta,
                beta,
                p.epsilon.unwrap_or(f64::NAN),
            )?,
        };
        spec.corrective_drift =
            p.corrective_drift && matches!(spec.noise, NoiseModel::NonGaussian { .. });
        Ok(spec)
    }

    pub fn model(&self) -> Option<ColoredModel> {
        match self.problem.noise {
            NoiseChoice::White => None,
            NoiseChoice::Colored(m) => Some(m),
        }
    }

    /// Degrees per dimension.
    pub fn degrees(&self) -> Vec<usize> {
        let dims = self.problem.noise.dims();
        let d = &self.numerics.degrees;
        if d.len() == 1 {
            vec![d[0]; dims]
        } else {
            d.clone()
        }
    }

    /// Scalings per dimension after the schedule.
    pub fn sigmas(&self) -> Vec<f64> {
        let dims = self.problem.noise.dims();
        let s = &self.numerics.sigma;
        let s: Vec<f64> = if s.len() == 1 {
            vec![s[0]; dims]
        } else {
            s.clone()
        };
        match self.numerics.sigma_schedule {
            SigmaSchedule::Fixed => s,
            SigmaSchedule::InverseSqrt => s
                .iter()
                .zip(self.degrees())
                .map(|(s, d)| s / (d.max(1) as f64).sqrt())
                .collect(),
        }
    }

    pub fn setup(&self) -> SpectralSetup {
        SpectralSetup {
            shape: self.numerics.shape,
            degrees: self.degrees(),
            sigma: self.sigmas(),
            x_weight: self.numerics.x_weight.clone(),
            quad_degree: self.numerics.quad_degree.clone(),
        }
    }

    pub fn solver(&self) -> SolverConfig {
        let n = &self.numerics;
        SolverConfig {
            scheme: n.scheme,
            dt: n.dt,
            atol: n.atol,
            rtol: n.rtol,
            t_final: n.t_final,
            steady_tol: n.steady_tol,
            renormalize: n.renormalize,
            ..SolverConfig::default()
        }
    }

    /// Every resolved value as TOML.
    pub fn to_toml(&self) -> String {
        let p = &self.problem;
        let n = &self.numerics;
        let floats = |v: &[f64]| Value::Array(v.iter().map(|x| Value::Float(*x)).collect());
        let ints =
            |v: &[usize]| Value::Array(v.iter().map(|x| Value::Integer(*x as i64)).collect());
        let mut root = Table::new();
        root.insert("command".into(), Value::String(self.command.name().into()));

        let mut t = Table::new();
        t.insert("potential".into(), floats(&p.potential));
        t.insert("theta".into(), Value::Float(p.theta));
        if let Some(b) = p.beta {
            t.insert("beta".into(), Value::Float(b));
        }
        if let Some(r) = p.beta_range {
            t.insert("beta_range".into(), floats(&r));
        }
        if let Some(b) = &p.betas {
            t.insert("betas".into(), floats(b));
        }
        t.insert("noise".into(), Value::String(p.noise.name().into()));
        if let Some(e) = p.epsilon {
            t.insert("epsilon".into(), Value::Float(e));
        }
        t.insert(
            "corrective_drift".into(),
            Value::Boolean(p.corrective_drift),
        );
        t.insert("m".into(), Value::Float(p.m));
        root.insert("problem".into(), Value::Table(t));

        let mut t = Table::new();
        t.insert("shape".into(), Value::String(shape_name(n.shape).into()));
        t.insert("degrees".into(), ints(&n.degrees));
        t.insert("sigma".into(), floats(&n.sigma));
        let sched = match n.sigma_schedule {
            SigmaSchedule::Fixed => "fixed",
            SigmaSchedule::InverseSqrt => "inverse-sqrt",
        };
        t.insert("sigma_schedule".into(), Value::String(sched.into()));
        t.insert(
            "x_weight".into(),
            Value::String(x_weight_name(&n.x_weight).into()),
        );
        if let Some(q) = &n.quad_degree {
            t.insert("quad_degree".into(), ints(q));
        }
        t.insert("scheme".into(), Value::String(scheme_name(n.scheme).into()));
        t.insert("dt".into(), Value::Float(n.dt));
        t.insert("atol".into(), Value::Float(n.atol));
        t.insert("rtol".into(), Value::Float(n.rtol));
        t.insert("t_final".into(), Value::Float(n.t_final));
        t.insert("steady_tol".into(), Value::Float(n.steady_tol));
        t.insert("renormalize".into(), Value::Boolean(n.renormalize));
        t.insert("samples".into(), Value::Integer(n.samples as i64));
        t.insert("backend".into(), Value::String(n.backend.name().into()));
        t.insert("search".into(), floats(&n.search));
        t.insert("n_grid".into(), Value::Integer(n.n_grid as i64));
        let c = &n.continuation;
        t.insert("h0".into(), Value::Float(c.h0));
        t.insert("h_min".into(), Value::Float(c.h_min));
        t.insert("h_max".into(), Value::Float(c.h_max));
        t.insert("corrector_tol".into(), Value::Float(c.tol));
        t.insert("max_points".into(), Value::Integer(c.max_points as i64));
        t.insert("fd_step".into(), Value::Float(c.fd_step));
        root.insert("numerics".into(), Value::Table(t));

        let mut t = Table::new();
        t.insert("mean".into(), Value::Float(self.initial.0));
        t.insert("variance".into(), Value::Float(self.initial.1));
        root.insert("initial".into(), Value::Table(t));

        let m = &self.mc;
        let mut t = Table::new();
        t.insert("n_particles".into(), Value::Integer(m.n_particles as i64));
        if let Some(dt) = m.dt {
            t.insert("dt".into(), Value::Float(dt));
        }
        t.insert("burn_in".into(), Value::Float(m.burn_in));
        t.insert("window".into(), Value::Float(m.window));
        let seed = if m.seed <= i64::MAX as u64 {
            Value::Integer(m.seed as i64)
        } else {
            Value::String(m.seed.to_string())
        };
        t.insert("seed".into(), seed);
        t.insert("init_mean".into(), Value::Float(m.init_mean));
        t.insert("init_var".into(), Value::Float(m.init_var));
        t.insert("batches".into(), Value::Integer(m.batches as i64));
        if let Some(s) = m.trajectory_stride {
            t.insert("trajectory_stride".into(), Value::Integer(s as i64));
        }
        root.insert("mc".into(), Value::Table(t));

        let o = &self.output;
        let mut t = Table::new();
        t.insert(
            "dir".into(),
            Value::String(o.dir.to_string_lossy().into_owned()),
        );
        t.insert("x_range".into(), floats(&[o.x.min, o.x.max]));
        t.insert("nx".into(), Value::Integer(o.x.n as i64));
        t.insert("eta_range".into(), floats(&[o.eta.min, o.eta.max]));
        t.insert("neta".into(), Value::Integer(o.eta.n as i64));
        t.insert("dump_matrix".into(), Value::Boolean(o.dump_matrix));
        root.insert("output".into(), Value::Table(t));

        toml::to_string(&root).expect("a TOML table always serialises")
    }

    /// SHA-256 of the resolved config echo.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_toml().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_parses_back_to_same_config() {
        let c = parse_config(
            "[problem]\npotential = [0, 0, 0.5]\nbeta = 2\n",
            Command::SolveLinear,
        )
        .unwrap();
        let again = parse_config(&c.to_toml(), Command::SolveLinear).unwrap();
        assert_eq!(c, again);
    }
}
