//! Scenario registry, the RMSE-versus-reference protocol, CSV output and
//! cost tabulation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fem::{solve_poisson, MeshLevel};
use crate::galton_watson::TreeParams;
use crate::grid::DyadicGrid;
use crate::mlmc::{fit_slope, make_plan, mlmc_estimate, LevelStats, MlmcPlan, PdeSampler, RateParams, Regime};
use crate::prior::{cascade_depth, coefficient_on_midpoints, evaluate_field, sample_field, PriorParams};
use crate::rng::StreamKey;
use crate::wavelet::{cascade, WaveletFamily};

pub const CSV_COLUMNS: [&str; 12] = [
    "kind",
    "eps",
    "replicate",
    "estimate",
    "level",
    "truncation",
    "h",
    "samples",
    "mean_y",
    "var_y",
    "work_units",
    "rejected",
];

const H0: f64 = 0.5;
const REFINEMENT: f64 = 0.5;
const DIM: usize = 2;

/// Prior and rate parameters of one experiment family.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub s: f64,
    pub p: f64,
    pub kappa: f64,
    pub beta: f64,
    pub t: f64,
    pub r: f64,
    pub theta: f64,
}

impl Scenario {
    pub fn smooth_gaussian() -> Self {
        Self::builtin("smooth_gaussian", 2.0, 2.0, 0.5, 1.0)
    }

    pub fn rough_gaussian() -> Self {
        Self::builtin("rough_gaussian", 1.5, 2.0, 0.5, 0.5)
    }

    pub fn p_exponential() -> Self {
        Self::builtin("p_exponential", 2.0, 1.6, 0.75, 0.75)
    }

    fn builtin(name: &str, s: f64, p: f64, beta: f64, rate: f64) -> Self {
        Scenario {
            name: name.into(),
            s,
            p,
            kappa: 1.0,
            beta,
            t: rate,
            r: rate,
            theta: 1.0,
        }
    }

    pub fn builtins() -> Vec<Scenario> {
        vec![Self::smooth_gaussian(), Self::rough_gaussian(), Self::p_exponential()]
    }

    pub fn by_name(name: &str) -> Option<Scenario> {
        match name {
            "smooth_gaussian" | "smooth" => Some(Self::smooth_gaussian()),
            "rough_gaussian" | "rough" => Some(Self::rough_gaussian()),
            "p_exponential" | "pexp" => Some(Self::p_exponential()),
            _ => None,
        }
    }

    pub fn rates(&self) -> Result<RateParams> {
        RateParams::new(self.t, self.r, self.theta).map_err(config_error)
    }

    pub fn prior(&self, truncation: u32) -> Result<PriorParams> {
        let tree = TreeParams::new(DIM, self.beta).map_err(config_error)?;
        PriorParams::new(self.s, self.p, self.kappa, tree, truncation).map_err(config_error)
    }

    /// `ε = 2^{-r ξ}`.
    pub fn eps_for(&self, xi: f64) -> f64 {
        (-self.r * xi).exp2()
    }

    /// Predicted exponent of work against `ε` (the `log²` factor of the
    /// critical case is not part of the exponent).
    pub fn predicted_work_exponent(&self) -> f64 {
        let q = (2.0 - self.theta) * self.r;
        let d = DIM as f64;
        if 2.0 * q >= d - 1e-12 {
            -2.0
        } else {
            -2.0 - (d - 2.0 * q) / q
        }
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::InvalidInput(m) => Error::Config(m),
        other => other,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub eps_list: Vec<f64>,
    pub n_ml: usize,
    pub n_ref: usize,
    pub eps_ref: f64,
    pub seed: u64,
    pub wavelet: String,
}

impl ScenarioConfig {
    /// Desk-scale protocol: `ξ = 3..6`, 32 replicates, 8 reference runs at
    /// `ξ = 8`.
    pub fn desk(scenario: Scenario) -> Self {
        let eps_list = (3..=6).map(|xi| scenario.eps_for(xi as f64)).collect();
        let eps_ref = scenario.eps_for(8.0);
        ScenarioConfig {
            scenario,
            eps_list,
            n_ml: 32,
            n_ref: 8,
            eps_ref,
            seed: 0,
            wavelet: "db5".into(),
        }
    }

    /// Full protocol: `ξ = 3..9`, 256 replicates, 16 reference runs at
    /// `ξ = 11`.
    pub fn full(scenario: Scenario) -> Self {
        let eps_list = (3..=9).map(|xi| scenario.eps_for(xi as f64)).collect();
        let eps_ref = scenario.eps_for(11.0);
        ScenarioConfig {
            scenario,
            eps_list,
            n_ml: 256,
            n_ref: 16,
            eps_ref,
            seed: 0,
            wavelet: "db5".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.rates()?;
        self.scenario.prior(0)?;
        WaveletFamily::by_name(&self.wavelet).map_err(config_error)?;
        if self.n_ml == 0 || self.n_ref == 0 {
            return Err(Error::Config("replicate counts must be positive".into()));
        }
        if self.eps_list.is_empty() {
            return Err(Error::Config("the eps list is empty".into()));
        }
        if let Some(bad) = self.eps_list.iter().chain([&self.eps_ref]).find(|e| !(**e > 0.0)) {
            return Err(Error::Config(format!("eps = {bad} must be positive")));
        }
        Ok(())
    }

    /// Front matter echoing every input of the run.
    pub fn front_matter(&self) -> String {
        let s = &self.scenario;
        let mut out = String::from("---\n");
        let list = self.eps_list.iter().map(f64::to_string).collect::<Vec<_>>().join(", ");
        for (k, v) in [
            ("scenario", s.name.clone()),
            ("s", s.s.to_string()),
            ("p", s.p.to_string()),
            ("kappa", s.kappa.to_string()),
            ("beta", s.beta.to_string()),
            ("t", s.t.to_string()),
            ("r", s.r.to_string()),
            ("theta", s.theta.to_string()),
            ("dimension", DIM.to_string()),
            ("h0", H0.to_string()),
            ("refinement", REFINEMENT.to_string()),
            ("wavelet", self.wavelet.clone()),
            ("eps_list", format!("[{list}]")),
            ("eps_ref", self.eps_ref.to_string()),
            ("n_ml", self.n_ml.to_string()),
            ("n_ref", self.n_ref.to_string()),
            ("seed", self.seed.to_string()),
        ] {
            writeln!(out, "{k}: {v}").expect("write to string");
        }
        out.push_str("---\n");
        out
    }
}

/// Keys of a TOML scenario file. `scenario` names a built-in to start
/// from; every other key overrides one field.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    scenario: Option<String>,
    name: Option<String>,
    s: Option<f64>,
    p: Option<f64>,
    kappa: Option<f64>,
    beta: Option<f64>,
    t: Option<f64>,
    r: Option<f64>,
    theta: Option<f64>,
    eps_list: Option<Vec<f64>>,
    xi_list: Option<Vec<f64>>,
    n_ml: Option<usize>,
    n_ref: Option<usize>,
    eps_ref: Option<f64>,
    xi_ref: Option<f64>,
    seed: Option<u64>,
    wavelet: Option<String>,
    full: Option<bool>,
}

/// Parses a TOML scenario description.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let base = match &file.scenario {
        Some(name) => Scenario::by_name(name).ok_or_else(|| Error::Config(format!("unknown scenario '{name}'")))?,
        None => {
            let missing: Vec<&str> = [
                ("s", file.s.is_none()),
                ("p", file.p.is_none()),
                ("beta", file.beta.is_none()),
                ("t", file.t.is_none()),
                ("r", file.r.is_none()),
            ]
            .iter()
            .filter(|x| x.1)
            .map(|x| x.0)
            .collect();
            if !missing.is_empty() {
                return Err(Error::Config(format!(
                    "custom scenario needs {}",
                    missing.join(", ")
                )));
            }
            Scenario::builtin("custom", 0.0, 0.0, 0.0, 0.0)
        }
    };
    let scenario = Scenario {
        name: file.name.unwrap_or(base.name),
        s: file.s.unwrap_or(base.s),
        p: file.p.unwrap_or(base.p),
        kappa: file.kappa.unwrap_or(base.kappa),
        beta: file.beta.unwrap_or(base.beta),
        t: file.t.unwrap_or(base.t),
        r: file.r.unwrap_or(base.r),
        theta: file.theta.unwrap_or(base.theta),
    };
    let mut cfg = if file.full.unwrap_or(false) {
        ScenarioConfig::full(scenario)
    } else {
        ScenarioConfig::desk(scenario)
    };
    if let Some(list) = file.eps_list {
        cfg.eps_list = list;
    } else if let Some(xis) = file.xi_list {
        cfg.eps_list = xis.iter().map(|&x| cfg.scenario.eps_for(x)).collect();
    }
    if let Some(e) = file.eps_ref {
        cfg.eps_ref = e;
    } else if let Some(x) = file.xi_ref {
        cfg.eps_ref = cfg.scenario.eps_for(x);
    }
    cfg.n_ml = file.n_ml.unwrap_or(cfg.n_ml);
    cfg.n_ref = file.n_ref.unwrap_or(cfg.n_ref);
    cfg.seed = file.seed.unwrap_or(cfg.seed);
    cfg.wavelet = file.wavelet.unwrap_or(cfg.wavelet);
    cfg.validate()?;
    Ok(cfg)
}

/// A built-in scenario name, or the path of a TOML file.
pub fn load_scenario(spec: &str, full: bool) -> Result<ScenarioConfig> {
    if let Some(s) = Scenario::by_name(spec) {
        return Ok(if full { ScenarioConfig::full(s) } else { ScenarioConfig::desk(s) });
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(Error::Config(format!(
            "'{spec}' is neither a built-in scenario nor a readable file"
        )));
    }
    let mut cfg = parse_config(&fs::read_to_string(path)?)?;
    if full {
        let f = ScenarioConfig::full(cfg.scenario.clone());
        cfg.eps_list = f.eps_list;
        cfg.eps_ref = f.eps_ref;
        cfg.n_ml = f.n_ml;
        cfg.n_ref = f.n_ref;
    }
    Ok(cfg)
}

/// Parses `0.125`, `2^-3` or `2^-1.5`.
pub fn parse_eps(token: &str) -> Result<f64> {
    let t = token.trim();
    let v = if let Some(exp) = t.strip_prefix("2^") {
        exp.parse::<f64>().map(f64::exp2)
    } else {
        t.parse::<f64>()
    };
    v.map_err(|_| Error::Config(format!("cannot parse eps '{token}'")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum RecordKind {
    Reference,
    Estimate,
}

impl RecordKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Reference => "reference",
            RecordKind::Estimate => "estimate",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "reference" => Ok(RecordKind::Reference),
            "estimate" => Ok(RecordKind::Estimate),
            other => Err(Error::Parse(format!("unknown record kind '{other}'"))),
        }
    }
}

/// One replicate of one estimator run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub kind: RecordKind,
    pub eps: f64,
    pub replicate: u64,
    pub estimate: f64,
    pub levels: Vec<LevelStats>,
}

impl RunRecord {
    pub fn work_units(&self) -> u64 {
        self.levels.iter().map(|l| l.work_units).sum()
    }

    pub fn rejected(&self) -> u64 {
        self.levels.iter().map(|l| l.rejected).sum()
    }

    pub fn wall_seconds(&self) -> f64 {
        self.levels.iter().map(|l| l.wall_seconds).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RmseRow {
    pub eps: f64,
    pub replicates: usize,
    pub rmse: f64,
    pub mean_work: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub records: Vec<RunRecord>,
    pub reference: f64,
    pub rmse: Vec<RmseRow>,
    pub skipped: Vec<f64>,
}

/// Replicate id space: the reference runs use block 0, the `i`-th eps
/// value block `i + 1`.
fn replicate_id(block: usize, rep: usize) -> u64 {
    ((block as u64) << 32) | rep as u64
}

fn plan_for(cfg: &ScenarioConfig, eps: f64) -> Result<MlmcPlan> {
    make_plan(eps, cfg.scenario.rates()?, H0, REFINEMENT, DIM)
}

fn run_replicates(
    cfg: &ScenarioConfig,
    plan: &MlmcPlan,
    kind: RecordKind,
    block: usize,
    count: usize,
) -> Result<Vec<RunRecord>> {
    let family = WaveletFamily::by_name(&cfg.wavelet).map_err(config_error)?;
    let sampler = PdeSampler::new(cfg.scenario.prior(0)?, plan, &family)?;
    (0..count)
        .map(|rep| {
            let id = replicate_id(block, rep);
            let result = mlmc_estimate(plan, &sampler, StreamKey::new(cfg.seed).with_replicate(id))?;
            log::info!(
                "{} eps={} replicate={rep} estimate={} work={}",
                kind.as_str(),
                plan.eps,
                result.estimate,
                result.work_units()
            );
            Ok(RunRecord {
                kind,
                eps: plan.eps,
                replicate: id,
                estimate: result.estimate,
                levels: result.levels,
            })
        })
        .collect()
}

/// Realized RMSE of `estimates` around `reference`.
pub fn rmse(estimates: &[f64], reference: f64) -> f64 {
    let n = estimates.len() as f64;
    (estimates.iter().map(|e| (e - reference).powi(2)).sum::<f64>() / n).sqrt()
}

/// RMSE and mean work per eps, from the records of one run.
pub fn rmse_table(records: &[RunRecord]) -> Result<(f64, Vec<RmseRow>)> {
    let refs: Vec<f64> = records
        .iter()
        .filter(|r| r.kind == RecordKind::Reference)
        .map(|r| r.estimate)
        .collect();
    if refs.is_empty() {
        return Err(Error::InvalidInput("no reference records".into()));
    }
    let reference = refs.iter().sum::<f64>() / refs.len() as f64;
    let mut by_eps: BTreeMap<u64, (f64, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.kind == RecordKind::Estimate) {
        let e = by_eps.entry(r.eps.to_bits()).or_insert((r.eps, Vec::new(), Vec::new()));
        e.1.push(r.estimate);
        e.2.push(r.work_units() as f64);
    }
    let mut rows: Vec<RmseRow> = by_eps
        .into_values()
        .map(|(eps, est, work)| RmseRow {
            eps,
            replicates: est.len(),
            rmse: rmse(&est, reference),
            mean_work: work.iter().sum::<f64>() / work.len() as f64,
        })
        .collect();
    rows.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    Ok((reference, rows))
}

/// Reference runs followed by `n_ml` replicates per admissible eps.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let ref_plan = plan_for(cfg, cfg.eps_ref).map_err(config_error)?;
    let mut records = run_replicates(cfg, &ref_plan, RecordKind::Reference, 0, cfg.n_ref)?;
    let mut skipped = Vec::new();
    for (i, &eps) in cfg.eps_list.iter().enumerate() {
        match plan_for(cfg, eps) {
            Ok(plan) => records.extend(run_replicates(cfg, &plan, RecordKind::Estimate, i + 1, cfg.n_ml)?),
            Err(e) => {
                log::warn!("skipping eps = {eps}: {e}");
                skipped.push(eps);
            }
        }
    }
    let (reference, rmse) = rmse_table(&records)?;
    Ok(RunOutput {
        records,
        reference,
        rmse,
        skipped,
    })
}

/// Writes the front matter, the header and one row per record and level.
pub fn write_csv<W: Write>(mut out: W, cfg: &ScenarioConfig, records: &[RunRecord]) -> Result<()> {
    out.write_all(cfg.front_matter().as_bytes())?;
    writeln!(out, "{}", CSV_COLUMNS.join(","))?;
    for r in records {
        for l in &r.levels {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.kind.as_str(),
                r.eps,
                r.replicate,
                r.estimate,
                l.level,
                l.truncation,
                l.h,
                l.samples,
                l.mean,
                l.variance,
                l.work_units,
                l.rejected
            )?;
        }
    }
    Ok(())
}

/// Wall-clock times, kept apart from the CSV so that it stays
/// reproducible byte for byte.
pub fn write_timing<W: Write>(mut out: W, records: &[RunRecord]) -> Result<()> {
    writeln!(out, "kind,eps,replicate,level,wall_seconds")?;
    for r in records {
        for l in &r.levels {
            writeln!(out, "{},{},{},{},{}", r.kind.as_str(), r.eps, r.replicate, l.level, l.wall_seconds)?;
        }
    }
    Ok(())
}

/// Reads a CSV written by [`write_csv`]: the front matter as key/value
/// pairs and the records (wall times are not stored and read back as 0).
pub fn read_csv<R: BufRead>(input: R) -> Result<(BTreeMap<String, String>, Vec<RunRecord>)> {
    let mut lines = input.lines();
    let mut meta = BTreeMap::new();
    match lines.next() {
        Some(Ok(l)) if l == "---" => {}
        _ => return Err(Error::Parse("missing front matter".into())),
    }
    loop {
        let line = lines.next().ok_or_else(|| Error::Parse("unterminated front matter".into()))??;
        if line == "---" {
            break;
        }
        let (k, v) = line
            .split_once(": ")
            .ok_or_else(|| Error::Parse(format!("bad front matter line '{line}'")))?;
        meta.insert(k.to_string(), v.to_string());
    }
    let header = lines.next().ok_or_else(|| Error::Parse("missing header".into()))??;
    if header != CSV_COLUMNS.join(",") {
        return Err(Error::Parse(format!("unexpected header '{header}'")));
    }
    let mut records: Vec<RunRecord> = Vec::new();
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != CSV_COLUMNS.len() {
            return Err(Error::Parse(format!("row has {} fields: '{line}'", f.len())));
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{}'", f[i])));
        let int = |i: usize| f[i].parse::<u64>().map_err(|_| Error::Parse(format!("bad integer '{}'", f[i])));
        let kind = RecordKind::parse(f[0])?;
        let (eps, replicate, estimate) = (num(1)?, int(2)?, num(3)?);
        let level = LevelStats {
            level: int(4)? as u32,
            truncation: int(5)? as u32,
            h: num(6)?,
            samples: int(7)?,
            mean: num(8)?,
            variance: num(9)?,
            work_units: int(10)?,
            rejected: int(11)?,
            wall_seconds: 0.0,
        };
        match records.last_mut() {
            Some(r) if r.kind == kind && r.eps == eps && r.replicate == replicate => r.levels.push(level),
            _ => records.push(RunRecord {
                kind,
                eps,
                replicate,
                estimate,
                levels: vec![level],
            }),
        }
    }
    Ok((meta, records))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexityFit {
    /// `(eps, mean work units)`, coarsest eps first.
    pub points: Vec<(f64, f64)>,
    /// Slope of `log work` against `log eps`.
    pub slope: f64,
    /// Slope of `log(work / log(eps)²)` against `log eps`.
    pub slope_log_corrected: f64,
}

/// Fits work against accuracy over the estimate records.
pub fn complexity_report(records: &[RunRecord]) -> Result<ComplexityFit> {
    let mut by_eps: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.kind == RecordKind::Estimate) {
        let e = by_eps.entry(r.eps.to_bits()).or_insert((r.eps, 0.0, 0));
        e.1 += r.work_units() as f64;
        e.2 += 1;
    }
    let mut points: Vec<(f64, f64)> = by_eps.into_values().map(|(e, w, n)| (e, w / n as f64)).collect();
    points.sort_by(|a, b| b.0.total_cmp(&a.0));
    if points.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 eps values for a fit, got {}",
            points.len()
        )));
    }
    let raw: Vec<(f64, f64)> = points.iter().map(|&(e, w)| (e.ln(), w.ln())).collect();
    let corrected: Vec<(f64, f64)> = points
        .iter()
        .map(|&(e, w)| (e.ln(), (w / e.ln().powi(2)).ln()))
        .collect();
    Ok(ComplexityFit {
        slope: fit_slope(&raw).expect("three distinct eps"),
        slope_log_corrected: fit_slope(&corrected).expect("three distinct eps"),
        points,
    })
}

/// The slope to compare against a scenario's predicted exponent: the
/// `log²`-corrected one in the critical regime, the raw one otherwise.
pub fn comparable_slope(fit: &ComplexityFit, scenario: &Scenario) -> Result<f64> {
    let regime = plan_regime(scenario)?;
    Ok(if regime == Regime::Critical {
        fit.slope_log_corrected
    } else {
        fit.slope
    })
}

fn plan_regime(scenario: &Scenario) -> Result<Regime> {
    let q = scenario.rates()?.qoi_rate();
    Ok(if (2.0 * q - DIM as f64).abs() < 1e-12 {
        Regime::Critical
    } else if 2.0 * q > DIM as f64 {
        Regime::Above
    } else {
        Regime::Below
    })
}

/// Files written by [`dump_field_sample`].
#[derive(Clone, Debug, PartialEq)]
pub struct DumpPaths {
    pub field: PathBuf,
    pub solution: PathBuf,
    pub active: PathBuf,
}

/// Writes one realization of `b_{T,N}` on the `2^R` lattice, the FEM
/// solution on the mesh with `2^R` cells per side (coefficient at its
/// midpoints), and the active index list.
pub fn dump_field_sample(
    scenario: &Scenario,
    resolution: u32,
    truncation: u32,
    seed: u64,
    dir: &Path,
) -> Result<DumpPaths> {
    if !(1..=12).contains(&resolution) {
        return Err(Error::Config(format!("resolution {resolution} not in 1..=12")));
    }
    if truncation > 14 {
        return Err(Error::Config(format!("truncation {truncation} above 14")));
    }
    let prior = scenario.prior(truncation)?;
    let family = WaveletFamily::daubechies5();
    let table = cascade(&family, cascade_depth(truncation, scenario.t, family.hoelder_alpha(), resolution))?;
    let field = sample_field(&prior, &StreamKey::new(seed))?;
    let b = evaluate_field(&field, DyadicGrid::lattice(resolution), &table).field;
    let mesh = MeshLevel::new(resolution - 1);
    let a = coefficient_on_midpoints(&field, mesh.midpoint_resolution(), &table)?;
    let u = solve_poisson(&mesh, &a)?.to_lattice_field();

    fs::create_dir_all(dir)?;
    let params: Vec<(String, String)> = [
        ("scenario", scenario.name.clone()),
        ("s", scenario.s.to_string()),
        ("p", scenario.p.to_string()),
        ("kappa", scenario.kappa.to_string()),
        ("beta", scenario.beta.to_string()),
        ("truncation", truncation.to_string()),
        ("seed", seed.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let paths = DumpPaths {
        field: dir.join("field.txt"),
        solution: dir.join("solution.txt"),
        active: dir.join("active.csv"),
    };
    b.write_to(std::io::BufWriter::new(fs::File::create(&paths.field)?), &params)?;
    u.write_to(std::io::BufWriter::new(fs::File::create(&paths.solution)?), &params)?;
    let mut act = std::io::BufWriter::new(fs::File::create(&paths.active)?);
    writeln!(act, "j,k1,k2")?;
    for (j, k) in field.active().pairs() {
        writeln!(act, "{j},{},{}", k[0], k[1])?;
    }
    act.flush()?;
    Ok(paths)
}
