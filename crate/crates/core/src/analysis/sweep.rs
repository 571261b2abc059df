use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::census::{monolayer_census, MonolayerReport, Verdict};
use crate::exec::Execution;
use crate::lattice::{HeightField, LatticeGeometry};
use crate::particles::{CanonicalWeights, PhaseParams, WeightMethod};
use crate::phase::{CriticalValues, PhaseProblem, SolverOptions};
use crate::sampler::{run_chain, stream_rng, wang_landau_alpha, DensityOfStates, Ensemble, RunConfig, SamplerError, WangLandauConfig};
use crate::wulff::{SurfaceTension, WulffShape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    /// Volume drawn from the density of states tilted by the particle-count
    /// weights, then a canonical chain confined to a window around it.
    Reweighted,
    /// Canonical chain from the flat field.
    Direct,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    pub geometry: LatticeGeometry,
    pub params: PhaseParams,
    pub beta: f64,
    pub deltas: Vec<f64>,
    pub replicates: usize,
    pub epsilon: f64,
    /// Sweeps per replicate chain.
    pub sweeps: u64,
    pub seed: u64,
    pub mode: SweepMode,
    pub weight_method: WeightMethod,
    /// Tension of the predicted phase diagram.
    pub tension: SurfaceTension,
    /// Factor applied to the lower bound on the largest droplet.
    pub bound_slack: f64,
    /// Half-width of the volume window in reweighted mode; 0 means `N`.
    pub window: i64,
    /// Volume range of the density of states; `None` means `[-N², hmax·L²]`.
    pub alpha_range: Option<(i64, i64)>,
    pub wang_landau_bins: usize,
    pub ln_f_final: f64,
    pub stage_budget: u64,
    pub allow_unfit: bool,
    pub exec: Execution,
}

impl SweepConfig {
    pub fn new(geometry: LatticeGeometry, params: PhaseParams, beta: f64, deltas: Vec<f64>, seed: u64) -> Self {
        Self {
            geometry,
            params,
            beta,
            deltas,
            replicates: 8,
            epsilon: 1.0,
            sweeps: 2000,
            seed,
            mode: SweepMode::Reweighted,
            weight_method: WeightMethod::Auto,
            tension: SurfaceTension::Isotropic { beta },
            bound_slack: 0.8,
            window: 0,
            alpha_range: None,
            wang_landau_bins: 100,
            ln_f_final: 1e-6,
            stage_budget: 200_000,
            allow_unfit: false,
            exec: Execution::Parallel,
        }
    }

    fn n(&self) -> f64 {
        self.geometry.n() as f64
    }

    fn alpha_range(&self) -> (i64, i64) {
        self.alpha_range.unwrap_or_else(|| {
            let n = self.geometry.n() as i64;
            let reach = self.geometry.hmax() as i64 * self.geometry.interior_sites() as i64;
            ((-n * n).max(-reach), reach)
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleRecord {
    pub delta_index: usize,
    pub replicate: usize,
    pub delta: f64,
    /// Volume the window was centred on (reweighted mode).
    pub drawn_alpha: Option<i64>,
    pub alpha: i64,
    pub energy: i64,
    pub gamma0_bound: Option<bool>,
    pub census: MonolayerReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub samples: usize,
    pub flat: f64,
    pub one_monolayer: f64,
    pub two_monolayer: f64,
    pub other: f64,
    pub mean_alpha: f64,
    /// Mean area of the largest contour over samples that have one.
    pub mean_gamma0_area: Option<f64>,
    /// Fraction of one-monolayer samples satisfying the droplet-size bound.
    pub gamma0_bound_fraction: Option<f64>,
    pub predicted_rho_star: f64,
    /// `ρ*·N²`.
    pub predicted_alpha: f64,
    pub predicted_verdict: Verdict,
    /// Most probable volume under the reweighted law.
    pub reweighted_mode: Option<i64>,
}

impl SweepRow {
    pub fn fraction(&self, v: Verdict) -> f64 {
        match v {
            Verdict::Flat => self.flat,
            Verdict::OneMonolayer => self.one_monolayer,
            Verdict::TwoMonolayer => self.two_monolayer,
            Verdict::Other => self.other,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub large_threshold: f64,
    pub critical: Option<CriticalValues>,
    pub rows: Vec<SweepRow>,
    pub samples: Vec<SampleRecord>,
    pub density_of_states: Option<DensityOfStates>,
    /// Some estimate stopped on its budget.
    pub partial: bool,
}

impl SweepReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "delta",
            "samples",
            "flat",
            "oneMonolayer",
            "twoMonolayer",
            "other",
            "meanAlpha",
            "meanGamma0Area",
            "gamma0BoundFraction",
            "predictedRhoStar",
            "predictedAlpha",
            "predictedVerdict",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            wtr.write_record([
                r.delta.to_string(),
                r.samples.to_string(),
                r.flat.to_string(),
                r.one_monolayer.to_string(),
                r.two_monolayer.to_string(),
                r.other.to_string(),
                r.mean_alpha.to_string(),
                opt(r.mean_gamma0_area),
                opt(r.gamma0_bound_fraction),
                r.predicted_rho_star.to_string(),
                r.predicted_alpha.to_string(),
                r.predicted_verdict.name().to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Volume law `log Pr(α = b) + log Q_δ(b)` normalised, over the range of `dos`.
pub fn reweighted_volume_law(dos: &DensityOfStates, weights: &CanonicalWeights) -> Vec<(i64, f64)> {
    let log_p: Vec<(i64, f64)> = (dos.b_min..=dos.b_max())
        .map(|b| (b, dos.log_g(b).map(|g| g + weights.log_q(b)).unwrap_or(f64::NEG_INFINITY)))
        .collect();
    let m = log_p.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = log_p.iter().map(|p| (p.1 - m).exp()).sum();
    log_p.into_iter().map(|(b, l)| (b, (l - m).exp() / z)).collect()
}

fn draw<R: Rng>(law: &[(i64, f64)], rng: &mut R) -> i64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(b, p) in law {
        acc += p;
        if u < acc {
            return b;
        }
    }
    law.last().map(|p| p.0).unwrap_or(0)
}

fn predicted_verdict(loops: usize) -> Verdict {
    match loops {
        0 => Verdict::Flat,
        1 => Verdict::OneMonolayer,
        _ => Verdict::TwoMonolayer,
    }
}

/// Runs `replicates` independent samples at each δ and compares the verdict
/// fractions with the predicted minimiser. Seeds depend only on
/// `(seed, δ index, replicate)`.
pub fn sweep_experiment(cfg: &SweepConfig) -> Result<SweepReport, SamplerError> {
    if cfg.replicates == 0 || !(cfg.epsilon > 0.0) {
        return Err(SamplerError::Config("replicates and epsilon must be positive".into()));
    }
    let shape = WulffShape::construct(&cfg.tension).map_err(|e| SamplerError::Config(e.to_string()))?;
    let problem = PhaseProblem::new(cfg.params, cfg.geometry.r() as f64, shape)
        .with_options(SolverOptions { allow_unfit: cfg.allow_unfit, exec: cfg.exec, ..SolverOptions::default() });
    let large_threshold = cfg.epsilon * cfg.n();
    if cfg.deltas.is_empty() {
        return Ok(SweepReport {
            config: cfg.clone(),
            large_threshold,
            critical: None,
            rows: Vec::new(),
            samples: Vec::new(),
            density_of_states: None,
            partial: false,
        });
    }
    let critical = problem.critical_values().ok();

    let dos = match cfg.mode {
        SweepMode::Reweighted => {
            let mut wl = WangLandauConfig::new(cfg.beta, cfg.alpha_range(), cfg.seed);
            wl.window_bins = cfg.wang_landau_bins;
            wl.ln_f_final = cfg.ln_f_final;
            wl.stage_budget = cfg.stage_budget;
            wl.exec = cfg.exec;
            Some(wang_landau_alpha(cfg.geometry, &wl)?)
        }
        SweepMode::Direct => None,
    };
    let (lo, hi) = cfg.alpha_range();
    let weights: Vec<Arc<CanonicalWeights>> = cfg
        .deltas
        .iter()
        .map(|&d| Arc::new(CanonicalWeights::build(&cfg.geometry, &cfg.params, d, (lo, hi), cfg.weight_method, cfg.exec)))
        .collect();
    let laws: Vec<Option<Vec<(i64, f64)>>> =
        weights.iter().map(|w| dos.as_ref().map(|d| reweighted_volume_law(d, w))).collect();

    let half = if cfg.window > 0 { cfg.window } else { cfg.geometry.n() as i64 };
    let jobs: Vec<(usize, usize)> =
        (0..cfg.deltas.len()).flat_map(|i| (0..cfg.replicates).map(move |r| (i, r))).collect();
    let chain_seed = cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let results = cfg.exec.map(jobs, |(i, r)| -> Result<SampleRecord, SamplerError> {
        let mut rng = stream_rng(chain_seed, (i * cfg.replicates + r) as u64);
        let (field, ensemble, drawn) = match &laws[i] {
            Some(law) => {
                let b = draw(law, &mut rng);
                let w = Arc::new(weights[i].restricted(b - half, b + half));
                (HeightField::droplet(cfg.geometry, b), Ensemble::Canonical(w), Some(b))
            }
            None => (HeightField::flat(cfg.geometry), Ensemble::Canonical(weights[i].clone()), None),
        };
        let run = RunConfig { sweeps: cfg.sweeps, burnin: cfg.sweeps, thinning: 1, checkpoint_every: 1000, snapshot_every: 0 };
        let res = run_chain(field, cfg.beta, ensemble, rng, &run)?;
        let census = monolayer_census(&res.final_field, cfg.epsilon, (i * cfg.replicates + r) as u64);
        let last = res.series.last().expect("final sweep recorded");
        Ok(SampleRecord {
            delta_index: i,
            replicate: r,
            delta: cfg.deltas[i],
            drawn_alpha: drawn,
            alpha: last.alpha,
            energy: last.energy,
            gamma0_bound: census.gamma0_bound(cfg.deltas[i], cfg.params.psv(), cfg.n(), cfg.bound_slack),
            census,
        })
    });
    let samples = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let n2 = cfg.n() * cfg.n();
    let rows = cfg
        .deltas
        .iter()
        .enumerate()
        .map(|(i, &delta)| {
            let s: Vec<&SampleRecord> = samples.iter().filter(|s| s.delta_index == i).collect();
            let k = s.len() as f64;
            let frac = |v: Verdict| s.iter().filter(|x| x.census.verdict == v).count() as f64 / k;
            let areas: Vec<f64> = s.iter().filter_map(|x| x.census.gamma0.as_ref().map(|g| g.area as f64)).collect();
            let ones: Vec<bool> = s
                .iter()
                .filter(|x| x.census.verdict == Verdict::OneMonolayer)
                .filter_map(|x| x.gamma0_bound)
                .collect();
            let min = problem.minimize(delta);
            SweepRow {
                delta,
                samples: s.len(),
                flat: frac(Verdict::Flat),
                one_monolayer: frac(Verdict::OneMonolayer),
                two_monolayer: frac(Verdict::TwoMonolayer),
                other: frac(Verdict::Other),
                mean_alpha: s.iter().map(|x| x.alpha as f64).sum::<f64>() / k,
                mean_gamma0_area: (!areas.is_empty()).then(|| areas.iter().sum::<f64>() / areas.len() as f64),
                gamma0_bound_fraction: (!ones.is_empty())
                    .then(|| ones.iter().filter(|&&b| b).count() as f64 / ones.len() as f64),
                predicted_rho_star: min.rho_star,
                predicted_alpha: min.rho_star * n2,
                predicted_verdict: predicted_verdict(min.loops),
                reweighted_mode: laws[i]
                    .as_ref()
                    .and_then(|l| l.iter().max_by(|a, b| a.1.total_cmp(&b.1)).map(|p| p.0)),
            }
        })
        .collect();
    let partial = dos.as_ref().is_some_and(|d| d.partial);
    Ok(SweepReport { config: cfg.clone(), large_threshold, critical, rows, samples, density_of_states: dos, partial })
}
