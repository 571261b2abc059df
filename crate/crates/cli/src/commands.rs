use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, ValueEnum};
use fogdrip::analysis::{monolayer_census, sweep_experiment, MonolayerReport, SweepConfig, SweepMode};
use fogdrip::oracle::{log_partition_reversed, EnumeratedEnsemble, GoldenRecord, OracleError};
use fogdrip::particles::{CanonicalWeights, WeightMethod};
use fogdrip::phase::{write_radii_csv, CaseConstants, PhaseError, PhaseProblem, SolverOptions};
use fogdrip::sampler::{run_chain, stream_rng, Ensemble, RunConfig};
use fogdrip::wulff::{restricted_wulff, MAX_RESTRICTED_AREA};
use fogdrip::{Execution, HeightField, LatticeGeometry};
use serde::Serialize;

use crate::config::{Overrides, Settings};
use crate::run::RunDir;

/// How a command failed, which decides the exit status.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
    /// A check ran to completion and found a mismatch.
    Check(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

pub struct Outcome {
    pub dir: PathBuf,
    pub partial: bool,
}

fn config<T>(r: anyhow::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Config)
}

/// Prints to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn run_dir(out: &Option<PathBuf>, default: String) -> anyhow::Result<RunDir> {
    RunDir::create(out.clone().unwrap_or_else(|| PathBuf::from("runs").join(default)))
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleChoice {
    Grand,
    Canonical,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightChoice {
    Auto,
    Exact,
    Llt,
}

impl From<WeightChoice> for WeightMethod {
    fn from(w: WeightChoice) -> Self {
        match w {
            WeightChoice::Auto => WeightMethod::Auto,
            WeightChoice::Exact => WeightMethod::Exact,
            WeightChoice::Llt => WeightMethod::Llt,
        }
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Overrides,
    /// Defaults to canonical when a delta is given, grand otherwise.
    #[arg(long, value_enum)]
    pub ensemble: Option<EnsembleChoice>,
    #[arg(long, value_enum, default_value = "auto")]
    pub weights: WeightChoice,
    /// Write the field every this many recorded samples; 0 writes none.
    #[arg(long, default_value_t = 0)]
    pub snapshot_every: u64,
    /// Recorded samples per integrated autocorrelation time below which a
    /// replicate is flagged as unconverged.
    #[arg(long, default_value_t = 50.0)]
    pub min_effective: f64,
}

#[derive(Serialize)]
struct ReplicateSummary {
    replicate: usize,
    acceptance_rate: f64,
    iat_alpha: Option<f64>,
    recorded: usize,
    converged: bool,
    final_alpha: i64,
    final_energy: i64,
    census: MonolayerReport,
}

#[derive(Serialize)]
struct SimulateSettings<'a> {
    #[serde(flatten)]
    settings: &'a Settings,
    ensemble: EnsembleChoice,
    weights: WeightChoice,
    snapshot_every: u64,
    min_effective: f64,
}

pub fn simulate(a: &SimulateArgs) -> Result<Outcome, Failure> {
    let s = config(Settings::resolve(&a.common))?;
    let g = config(s.geometry())?;
    let ensemble_choice = a.ensemble.unwrap_or(if s.delta.is_some() { EnsembleChoice::Canonical } else { EnsembleChoice::Grand });
    let mut dir = run_dir(&a.common.out, format!("simulate-{}", s.seed))?;
    let ensemble = match ensemble_choice {
        EnsembleChoice::Grand => Ensemble::Grand,
        EnsembleChoice::Canonical => {
            let delta = s.delta.ok_or_else(|| Failure::Config(anyhow!("the canonical ensemble needs a delta")))?;
            let params = config(s.params())?;
            let w = CanonicalWeights::for_reachable(&g, &params, delta, a.weights.into(), Execution::Parallel);
            w.write_csv(dir.file("weights.csv")?).context("writing weights.csv")?;
            Ensemble::Canonical(Arc::new(w))
        }
    };
    let rc = RunConfig { sweeps: s.sweeps, burnin: s.burnin, thinning: s.thinning, checkpoint_every: 1000, snapshot_every: a.snapshot_every };
    let jobs: Vec<usize> = (0..s.replicates).collect();
    let results = Execution::Parallel.map(jobs, |r| {
        run_chain(HeightField::flat(g), s.beta, ensemble.clone(), stream_rng(s.seed, r as u64), &rc)
    });
    let mut summaries = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        let res = res.map_err(|e| Failure::Run(anyhow!("replicate {r}: {e}")))?;
        let mut w = dir.file(&format!("series_{r}.csv"))?;
        writeln!(w, "sweep,energy,alpha").context("writing series")?;
        for p in &res.series {
            writeln!(w, "{},{},{}", p.sweep, p.energy, p.alpha).context("writing series")?;
        }
        w.flush().context("writing series")?;
        for (sweep, field) in &res.snapshots {
            field.write_csv(dir.file(&format!("snapshot_{r}_{sweep}.csv"))?).context("writing snapshot")?;
        }
        res.final_field.write_csv(dir.file(&format!("final_{r}.csv"))?).context("writing final field")?;
        let recorded = res.series.len();
        let converged = res.iat_alpha.is_some_and(|t| recorded as f64 >= a.min_effective * t);
        summaries.push(ReplicateSummary {
            replicate: r,
            acceptance_rate: res.acceptance_rate,
            iat_alpha: res.iat_alpha,
            recorded,
            converged,
            final_alpha: res.final_field.alpha(),
            final_energy: res.final_field.perimeter_sum(),
            census: monolayer_census(&res.final_field, s.epsilon, r as u64),
        });
    }
    let partial = summaries.iter().any(|x| !x.converged);
    dir.json("summary.json", &summaries)?;
    let settings = SimulateSettings {
        settings: &s,
        ensemble: ensemble_choice,
        weights: a.weights,
        snapshot_every: a.snapshot_every,
        min_effective: a.min_effective,
    };
    Ok(Outcome { dir: dir.finish("simulate", &settings, partial)?, partial })
}

#[derive(Args, Debug)]
pub struct PhaseArgs {
    #[command(flatten)]
    pub common: Overrides,
}

pub fn phase_diagram(a: &PhaseArgs) -> Result<Outcome, Failure> {
    let s = config(Settings::resolve(&a.common))?;
    let params = config(s.params())?;
    let shape = config(s.shape())?;
    let mut dir = run_dir(&a.common.out, format!("phase-diagram-{}", s.seed))?;
    let mut problem = PhaseProblem::new(params, s.r as f64, shape);
    let required = problem.required_r();
    let fits = problem.r >= required;
    if !fits {
        eprintln!("warning: R={} is below {required:.3}; the critical droplet does not fit and the solver continues regardless", s.r);
        problem = problem.with_options(SolverOptions { allow_unfit: true, ..SolverOptions::default() });
    }
    let crit = problem.critical_values().map_err(|e| match e {
        PhaseError::OutOfRange(_) | PhaseError::Wulff(_) => Failure::Config(e.into()),
        _ => Failure::Run(e.into()),
    })?;
    write_radii_csv(&crit.radii, dir.file("radii.csv")?).context("writing radii.csv")?;
    dir.json("critical.json", &crit)?;
    if let Some(delta) = s.delta {
        let consts = CaseConstants { eta: s.eta, ..CaseConstants::default() };
        let cases = problem.case_envelope(delta, s.n as f64, &consts).ok();
        dir.json("at_delta.json", &serde_json::json!({ "minimum": problem.minimize(delta), "cases": cases }))?;
    }
    dir.json("shape.json", &problem.shape)?;
    emit(&serde_json::to_string_pretty(&crit).context("serialising")?);
    let settings = serde_json::json!({ "settings": s, "fits": fits, "required_r": required });
    Ok(Outcome { dir: dir.finish("phase-diagram", &settings, false)?, partial: false })
}

#[derive(Args, Debug)]
pub struct WulffArgs {
    #[command(flatten)]
    pub common: Overrides,
    /// Spacing of the area grid of the restricted problem.
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
}

pub fn wulff(a: &WulffArgs) -> Result<Outcome, Failure> {
    let s = config(Settings::resolve(&a.common))?;
    if !(a.step > 0.0 && a.step <= 1.0) {
        return Err(Failure::Config(anyhow!("step must lie in (0, 1]")));
    }
    let shape = config(s.shape())?;
    let mut dir = run_dir(&a.common.out, format!("wulff-{}", s.seed))?;
    dir.json("shape.json", &shape)?;
    let mut w = dir.file("restricted.csv")?;
    writeln!(w, "S,value,regime,loops,corner_radius").context("writing restricted.csv")?;
    let steps = (MAX_RESTRICTED_AREA / a.step).round() as usize;
    for k in 0..=steps {
        let area = (k as f64 * a.step).min(MAX_RESTRICTED_AREA);
        let sol = restricted_wulff(&shape, area).map_err(|e| Failure::Run(e.into()))?;
        let regime = serde_json::to_value(sol.regime).context("serialising")?;
        writeln!(w, "{area},{},{},{},{}", sol.value, regime.as_str().unwrap_or(""), sol.loops, sol.corner_radius)
            .context("writing restricted.csv")?;
    }
    w.flush().context("writing restricted.csv")?;
    let summary = serde_json::json!({
        "tension": shape.tension.name(),
        "beta": shape.tension.beta(),
        "s1": shape.s1,
        "cost_unit": shape.cost_unit,
        "bounding_side": shape.bounding_side,
        "directions": shape.directions,
        "warnings": shape.warnings,
    });
    emit(&serde_json::to_string_pretty(&summary).context("serialising")?);
    let settings = serde_json::json!({ "settings": s, "step": a.step });
    Ok(Outcome { dir: dir.finish("wulff", &settings, false)?, partial: false })
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeChoice {
    Reweighted,
    Direct,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Overrides,
    /// Comma-separated supersaturations; overrides the single delta.
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    /// `lo,hi,count`: evenly spaced supersaturations.
    #[arg(long, value_delimiter = ',')]
    pub delta_grid: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "reweighted")]
    pub mode: ModeChoice,
    #[arg(long, value_enum, default_value = "auto")]
    pub weights: WeightChoice,
    /// Predict the phase diagram even when the critical droplet does not fit.
    #[arg(long)]
    pub allow_unfit: bool,
    /// Half-width of the volume window in reweighted mode; 0 means N.
    #[arg(long, default_value_t = 0)]
    pub window: i64,
    /// Final modification factor of the density-of-states estimate.
    #[arg(long, default_value_t = 1e-6)]
    pub ln_f_final: f64,
    /// Sweeps allowed per stage of the density-of-states estimate.
    #[arg(long, default_value_t = 200_000)]
    pub stage_budget: u64,
}

fn sweep_deltas(a: &SweepArgs, s: &Settings) -> anyhow::Result<Vec<f64>> {
    let deltas = if let Some(d) = &a.deltas {
        d.clone()
    } else if let Some(g) = &a.delta_grid {
        if g.len() != 3 {
            anyhow::bail!("delta grid takes lo,hi,count");
        }
        let (lo, hi, count) = (g[0], g[1], g[2]);
        if count < 1.0 || count.fract() != 0.0 || hi < lo {
            anyhow::bail!("delta grid needs lo <= hi and a positive integer count");
        }
        let m = count as usize;
        (0..m).map(|k| if m == 1 { lo } else { lo + (hi - lo) * k as f64 / (m - 1) as f64 }).collect()
    } else {
        s.delta.into_iter().collect()
    };
    if let Some(d) = deltas.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        anyhow::bail!("delta must be a non-negative number, got {d}");
    }
    Ok(deltas)
}

pub fn sweep(a: &SweepArgs) -> Result<Outcome, Failure> {
    let s = config(Settings::resolve(&a.common))?;
    let deltas = config(sweep_deltas(a, &s))?;
    let g: LatticeGeometry = config(s.geometry())?;
    let params = config(s.params())?;
    let mut cfg = SweepConfig::new(g, params, s.beta, deltas, s.seed);
    cfg.replicates = s.replicates;
    cfg.epsilon = s.epsilon;
    cfg.sweeps = s.sweeps;
    cfg.mode = match a.mode {
        ModeChoice::Reweighted => SweepMode::Reweighted,
        ModeChoice::Direct => SweepMode::Direct,
    };
    cfg.weight_method = a.weights.into();
    cfg.tension = config(s.tension())?;
    cfg.allow_unfit = a.allow_unfit;
    cfg.window = a.window;
    cfg.ln_f_final = a.ln_f_final;
    cfg.stage_budget = a.stage_budget;
    let mut dir = run_dir(&a.common.out, format!("sweep-{}", s.seed))?;
    let report = sweep_experiment(&cfg).map_err(|e| Failure::Config(e.into()))?;
    report.write_csv(dir.file("sweep.csv")?).context("writing sweep.csv")?;
    if let Some(dos) = &report.density_of_states {
        dos.write_csv(dir.file("dos.csv")?).context("writing dos.csv")?;
    }
    dir.json("samples.json", &report.samples)?;
    dir.json(
        "summary.json",
        &serde_json::json!({
            "large_threshold": report.large_threshold,
            "critical": report.critical,
            "rows": report.rows,
            "partial": report.partial,
        }),
    )?;
    let settings = serde_json::json!({ "settings": s, "sweep": cfg });
    Ok(Outcome { dir: dir.finish("sweep", &settings, report.partial)?, partial: report.partial })
}

const GOLDEN: [&str; 3] = [
    include_str!("../../core/tests/golden/oracle_L1_h1_b2.json"),
    include_str!("../../core/tests/golden/oracle_L2_h1_b2.json"),
    include_str!("../../core/tests/golden/oracle_L2_h2_b2.json"),
];

#[derive(Args, Debug)]
pub struct OracleArgs {
    /// Interior side of the box.
    #[arg(long = "L")]
    pub l: usize,
    #[arg(long, default_value_t = 1)]
    pub hmax: i32,
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub tolerance: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct OracleSummary {
    computed: GoldenRecord,
    reference_found: bool,
    differences: Vec<String>,
    log_z_reversed: f64,
    peierls_worst_ratio: f64,
    pass: bool,
}

pub fn oracle_check(a: &OracleArgs) -> Result<Outcome, Failure> {
    if !(a.beta > 0.0 && a.beta.is_finite()) {
        return Err(Failure::Config(anyhow!("beta must be positive")));
    }
    let g = config(LatticeGeometry::with_interior(a.l, a.hmax).map_err(|e| anyhow!("geometry: {e}")))?;
    let ens = EnumeratedEnsemble::enumerate(g, Execution::Parallel).map_err(|e| match e {
        OracleError::TooLarge { .. } => Failure::Config(e.into()),
        _ => Failure::Run(e.into()),
    })?;
    let computed = ens.golden(a.beta);
    let reference = GOLDEN
        .iter()
        .map(|t| serde_json::from_str::<GoldenRecord>(t).expect("embedded reference data parses"))
        .find(|r| r.interior_side == a.l && r.hmax == a.hmax && r.beta == a.beta);
    let mut differences = reference.as_ref().map(|r| computed.compare(r, a.tolerance)).unwrap_or_default();
    let reversed = log_partition_reversed(a.l, a.hmax, a.beta).map_err(|e| Failure::Run(e.into()))?;
    if (reversed - computed.log_z).abs() > a.tolerance * computed.log_z.abs().max(1.0) {
        differences.push(format!("log_z {} vs reversed enumeration {reversed}", computed.log_z));
    }
    let peierls = ens.peierls_check(a.beta);
    if peierls.worst_ratio > 1.0 + 1e-9 {
        differences.push(format!("contour probability exceeds its bound by {} at length {}", peierls.worst_ratio, peierls.worst_length));
    }
    let pass = differences.is_empty();
    let summary = OracleSummary {
        computed,
        reference_found: reference.is_some(),
        differences,
        log_z_reversed: reversed,
        peierls_worst_ratio: peierls.worst_ratio,
        pass,
    };
    let mut dir = run_dir(&a.out, format!("oracle-check-L{}-h{}", a.l, a.hmax))?;
    dir.json("oracle.json", &summary)?;
    let reference_note = if summary.reference_found { "against stored reference" } else { "no stored reference, enumeration cross-checks only" };
    let mut text = format!("{} L={} hmax={} beta={} ({reference_note})", if pass { "PASS" } else { "FAIL" }, a.l, a.hmax, a.beta);
    for d in &summary.differences {
        text.push_str(&format!("\n  {d}"));
    }
    emit(&text);
    let settings = serde_json::json!({ "L": a.l, "hmax": a.hmax, "beta": a.beta, "tolerance": a.tolerance });
    let dir = dir.finish("oracle-check", &settings, false)?;
    if !pass {
        return Err(Failure::Check(format!("oracle mismatch, see {}", dir.join("oracle.json").display())));
    }
    Ok(Outcome { dir, partial: false })
}
