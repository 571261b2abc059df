use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::SamplerError;
use crate::lattice::HeightField;
use crate::particles::CanonicalWeights;

/// Target measure of a chain, on top of the interface weight `e^{−β·perimeter}`.
#[derive(Clone, Debug)]
pub enum Ensemble {
    Grand,
    /// Reweighted by `Q(α)`, the probability of the imposed particle count.
    Canonical(Arc<CanonicalWeights>),
    /// Restricted to `lo ≤ α ≤ hi`.
    Pinned { lo: i64, hi: i64 },
}

impl Ensemble {
    pub fn name(&self) -> &'static str {
        match self {
            Ensemble::Grand => "grand",
            Ensemble::Canonical(_) => "canonical",
            Ensemble::Pinned { .. } => "pinned",
        }
    }

    fn admits(&self, alpha: i64) -> bool {
        match self {
            Ensemble::Grand => true,
            Ensemble::Canonical(w) => w.log_q(alpha).is_finite(),
            Ensemble::Pinned { lo, hi } => *lo <= alpha && alpha <= *hi,
        }
    }
}

/// Independent generator for replicate `stream` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Metropolis probability of the single-site move `h(site) += dh` from `field`.
pub fn acceptance_probability(field: &HeightField, site: usize, dh: i32, beta: f64, ensemble: &Ensemble) -> f64 {
    let Some(mv) = field.propose_delta(site, dh) else {
        return 0.0;
    };
    let alpha = field.alpha();
    let mut log_ratio = -beta * mv.d_energy as f64;
    match ensemble {
        Ensemble::Grand => {}
        Ensemble::Canonical(w) => {
            let (a, b) = (w.log_q(alpha), w.log_q(alpha + mv.d_alpha));
            if !b.is_finite() {
                return 0.0;
            }
            log_ratio += b - a;
        }
        Ensemble::Pinned { lo, hi } => {
            let next = alpha + mv.d_alpha;
            if next < *lo || next > *hi {
                return 0.0;
            }
        }
    }
    log_ratio.min(0.0).exp()
}

#[derive(Clone, Debug)]
pub struct Chain {
    field: HeightField,
    energy: i64,
    alpha: i64,
    beta: f64,
    ensemble: Ensemble,
    /// `min(1, e^{−βΔE})` for `ΔE = −4..=4`.
    boltzmann: [f64; 9],
    rng: ChaCha8Rng,
    sweeps: u64,
    proposals: u64,
    accepted: u64,
}

impl Chain {
    pub fn new(field: HeightField, beta: f64, ensemble: Ensemble, rng: ChaCha8Rng) -> Result<Self, SamplerError> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(SamplerError::Config(format!("beta={beta}")));
        }
        if field.interior_side() == 0 {
            return Err(SamplerError::Config("box has no interior sites".into()));
        }
        let alpha = field.alpha();
        if !ensemble.admits(alpha) {
            return Err(SamplerError::Config(format!("initial alpha={alpha} has zero weight in the {} ensemble", ensemble.name())));
        }
        let mut boltzmann = [0.0; 9];
        for (k, b) in boltzmann.iter_mut().enumerate() {
            *b = (-beta * (k as f64 - 4.0)).exp().min(1.0);
        }
        let energy = field.perimeter_sum();
        Ok(Self { field, energy, alpha, beta, ensemble, boltzmann, rng, sweeps: 0, proposals: 0, accepted: 0 })
    }

    pub fn field(&self) -> &HeightField {
        &self.field
    }

    pub fn energy(&self) -> i64 {
        self.energy
    }

    pub fn alpha(&self) -> i64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// One proposal; returns whether it was accepted.
    #[inline]
    pub fn step(&mut self) -> bool {
        let n = self.field.geometry().interior_sites();
        let site = self.rng.random_range(0..n);
        let dh = if self.rng.random::<bool>() { 1 } else { -1 };
        self.proposals += 1;
        let Some(mv) = self.field.propose_delta(site, dh) else {
            return false;
        };
        let next = self.alpha + mv.d_alpha;
        let p = match &self.ensemble {
            Ensemble::Grand => self.boltzmann[(mv.d_energy + 4) as usize],
            Ensemble::Pinned { lo, hi } => {
                if next < *lo || next > *hi {
                    return false;
                }
                self.boltzmann[(mv.d_energy + 4) as usize]
            }
            Ensemble::Canonical(w) => {
                let lq = w.log_q(next);
                if !lq.is_finite() {
                    return false;
                }
                (-self.beta * mv.d_energy as f64 + lq - w.log_q(self.alpha)).min(0.0).exp()
            }
        };
        if p >= 1.0 || self.rng.random::<f64>() < p {
            self.field.apply(site, dh);
            self.energy += mv.d_energy;
            self.alpha = next;
            self.accepted += 1;
            true
        } else {
            false
        }
    }

    /// `L²` proposals.
    pub fn sweep(&mut self) {
        for _ in 0..self.field.geometry().interior_sites() {
            self.step();
        }
        self.sweeps += 1;
    }

    /// Compares the running energy and volume with a full recomputation.
    pub fn check_consistency(&self) -> Result<(), SamplerError> {
        let (e, a) = (self.field.perimeter_sum(), self.field.alpha());
        if e != self.energy || a != self.alpha {
            return Err(SamplerError::Inconsistent {
                sweep: self.sweeps,
                energy: (self.energy, e),
                alpha: (self.alpha, a),
            });
        }
        Ok(())
    }

    /// Runs `cfg.sweeps` sweeps, calling `observe` at every recorded sweep
    /// (after burn-in, every `thinning` sweeps, sweep 0 included when there is no burn-in).
    pub fn run<F: FnMut(&Chain)>(&mut self, cfg: &RunConfig, mut observe: F) -> Result<(), SamplerError> {
        let thin = cfg.thinning.max(1);
        let record = |t: u64| t >= cfg.burnin && (t - cfg.burnin) % thin == 0;
        if record(0) {
            observe(self);
        }
        for t in 1..=cfg.sweeps {
            self.sweep();
            if cfg.checkpoint_every > 0 && t % cfg.checkpoint_every == 0 {
                self.check_consistency()?;
            }
            if record(t) {
                observe(self);
            }
        }
        self.check_consistency()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub sweeps: u64,
    pub burnin: u64,
    pub thinning: u64,
    /// Full recomputation every this many sweeps; 0 disables intermediate checks.
    pub checkpoint_every: u64,
    /// Keep a copy of the field every this many recorded samples; 0 keeps none.
    pub snapshot_every: u64,
}

impl RunConfig {
    /// Burn-in of 10% of the sweeps, every sweep recorded.
    pub fn with_sweeps(sweeps: u64) -> Self {
        Self { sweeps, burnin: sweeps / 10, thinning: 1, checkpoint_every: 1000, snapshot_every: 0 }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct SeriesPoint {
    pub sweep: u64,
    pub energy: i64,
    pub alpha: i64,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub series: Vec<SeriesPoint>,
    pub snapshots: Vec<(u64, HeightField)>,
    pub iat_alpha: Option<f64>,
    pub acceptance_rate: f64,
    pub final_field: HeightField,
}

/// Runs a fresh chain and collects its time series and snapshots.
pub fn run_chain(
    field: HeightField,
    beta: f64,
    ensemble: Ensemble,
    rng: ChaCha8Rng,
    cfg: &RunConfig,
) -> Result<RunResult, SamplerError> {
    let mut chain = Chain::new(field, beta, ensemble, rng)?;
    let mut series = Vec::new();
    let mut snapshots = Vec::new();
    let mut recorded = 0u64;
    chain.run(cfg, |c| {
        series.push(SeriesPoint { sweep: c.sweeps(), energy: c.energy(), alpha: c.alpha() });
        if cfg.snapshot_every > 0 && recorded % cfg.snapshot_every == 0 {
            snapshots.push((c.sweeps(), c.field().clone()));
        }
        recorded += 1;
    })?;
    let alphas: Vec<f64> = series.iter().map(|p| p.alpha as f64).collect();
    Ok(RunResult {
        iat_alpha: integrated_autocorrelation(&alphas),
        acceptance_rate: chain.acceptance_rate(),
        final_field: chain.field().clone(),
        series,
        snapshots,
    })
}

/// Integrated autocorrelation time with Sokal's self-consistent window `M ≥ 6τ(M)`.
/// `None` for constant or too-short series, or when no window is self-consistent.
pub fn integrated_autocorrelation(x: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 32 {
        return None;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if var <= 0.0 {
        return None;
    }
    let mut tau = 1.0;
    for m in 1..n / 2 {
        let c: f64 = (0..n - m).map(|i| (x[i] - mean) * (x[i + m] - mean)).sum::<f64>() / ((n - m) as f64 * var);
        tau += 2.0 * c;
        if m as f64 >= 6.0 * tau {
            return Some(tau.max(1.0));
        }
    }
    None
}
