use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::chain::stream_rng;
use super::SamplerError;
use crate::exec::Execution;
use crate::lattice::{HeightField, LatticeGeometry};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WangLandauConfig {
    pub beta: f64,
    /// Inclusive volume range covered by the estimate.
    pub range: (i64, i64),
    /// Volume values per window.
    pub window_bins: usize,
    /// Fraction of each window shared with the next.
    pub overlap: f64,
    pub ln_f_initial: f64,
    pub ln_f_final: f64,
    /// A stage ends when every bin has at least this fraction of the mean count.
    pub flatness: f64,
    /// Sweeps allowed per stage before the factor is reduced anyway.
    pub stage_budget: u64,
    /// Sweeps of a final run with the estimate frozen as a bias, whose
    /// histogram corrects the estimate; 0 skips it.
    pub production_sweeps: u64,
    pub seed: u64,
    pub exec: Execution,
}

impl WangLandauConfig {
    pub fn new(beta: f64, range: (i64, i64), seed: u64) -> Self {
        Self {
            beta,
            range,
            window_bins: 100,
            overlap: 0.5,
            ln_f_initial: 1.0,
            ln_f_final: 1e-8,
            flatness: 0.8,
            stage_budget: 200_000,
            production_sweeps: 0,
            seed,
            exec: Execution::Parallel,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageRecord {
    pub ln_f: f64,
    pub sweeps: u64,
    pub flat: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WindowReport {
    pub lo: i64,
    pub hi: i64,
    pub stages: Vec<StageRecord>,
    pub partial: bool,
}

/// `log Pr(α = b)` up to an additive constant, normalised to 0 at `b = 0`
/// (or at the value closest to 0 when the range excludes it).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityOfStates {
    pub b_min: i64,
    pub log_g: Vec<f64>,
    pub windows: Vec<WindowReport>,
    /// Some stage hit its budget before the histogram became flat.
    pub partial: bool,
}

impl DensityOfStates {
    pub fn b_max(&self) -> i64 {
        self.b_min + self.log_g.len() as i64 - 1
    }

    pub fn log_g(&self, b: i64) -> Option<f64> {
        let i = b.checked_sub(self.b_min)?;
        if i < 0 {
            return None;
        }
        self.log_g.get(i as usize).copied().filter(|v| v.is_finite())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["b", "logG"])?;
        for (i, v) in self.log_g.iter().enumerate() {
            wtr.write_record([(self.b_min + i as i64).to_string(), v.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn window_layout(lo: i64, hi: i64, bins: usize, overlap: f64) -> Vec<(i64, i64)> {
    let width = (bins.max(2) as i64).min(hi - lo + 1);
    let step = ((width as f64 * (1.0 - overlap)).round() as i64).max(1);
    let mut out = Vec::new();
    let mut start = lo;
    loop {
        let end = start + width - 1;
        if end >= hi {
            out.push((hi - width + 1, hi));
            break;
        }
        out.push((start, end));
        start += step;
    }
    out
}

fn run_window(
    geometry: LatticeGeometry,
    cfg: &WangLandauConfig,
    lo: i64,
    hi: i64,
    stream: u64,
) -> (Vec<f64>, WindowReport) {
    let mut rng = stream_rng(cfg.seed, stream);
    let mut field = HeightField::droplet(geometry, (lo + hi) / 2);
    let mut alpha = field.alpha();
    let bins = (hi - lo + 1) as usize;
    let mut g = vec![0.0; bins];
    let mut hist = vec![0u64; bins];
    let sites = geometry.interior_sites();
    let mut ln_f = cfg.ln_f_initial;
    let mut stages = Vec::new();
    let mut partial = false;
    let mut sweep = |g: &mut [f64], hist: &mut [u64], ln_f: f64| {
        for _ in 0..sites {
            let site = rng.random_range(0..sites);
            let dh = if rng.random::<bool>() { 1 } else { -1 };
            if let Some(mv) = field.propose_delta(site, dh) {
                let next = alpha + mv.d_alpha;
                if next >= lo && next <= hi {
                    let log_acc = -cfg.beta * mv.d_energy as f64 + g[(alpha - lo) as usize] - g[(next - lo) as usize];
                    if log_acc >= 0.0 || rng.random::<f64>() < log_acc.exp() {
                        field.apply(site, dh);
                        alpha = next;
                    }
                }
            }
            let k = (alpha - lo) as usize;
            g[k] += ln_f;
            hist[k] += 1;
        }
    };
    while ln_f >= cfg.ln_f_final {
        hist.iter_mut().for_each(|h| *h = 0);
        let mut sweeps = 0u64;
        let flat = loop {
            sweep(&mut g, &mut hist, ln_f);
            sweeps += 1;
            let min = *hist.iter().min().unwrap_or(&0);
            let mean = hist.iter().sum::<u64>() as f64 / bins as f64;
            if min > 0 && min as f64 >= cfg.flatness * mean {
                break true;
            }
            if sweeps >= cfg.stage_budget {
                break false;
            }
        };
        partial |= !flat;
        stages.push(StageRecord { ln_f, sweeps, flat });
        ln_f /= 2.0;
    }
    if cfg.production_sweeps > 0 {
        hist.iter_mut().for_each(|h| *h = 0);
        for _ in 0..cfg.production_sweeps {
            sweep(&mut g, &mut hist, 0.0);
        }
        let flat = hist.iter().all(|&h| h > 0);
        partial |= !flat;
        for (v, &h) in g.iter_mut().zip(&hist) {
            if h > 0 {
                *v += (h as f64).ln();
            }
        }
        stages.push(StageRecord { ln_f: 0.0, sweeps: cfg.production_sweeps, flat });
    }
    (g, WindowReport { lo, hi, stages, partial })
}

/// Flat-histogram estimate of the volume distribution under the grand measure,
/// run as overlapping windows started from compact droplets and stitched on
/// their mean offset over each overlap.
pub fn wang_landau_alpha(geometry: LatticeGeometry, cfg: &WangLandauConfig) -> Result<DensityOfStates, SamplerError> {
    let (lo, hi) = cfg.range;
    let reach = geometry.hmax() as i64 * geometry.interior_sites() as i64;
    if lo >= hi || lo < -reach || hi > reach {
        return Err(SamplerError::Config(format!("range [{lo}, {hi}] outside reachable [-{reach}, {reach}]")));
    }
    if !(0.0..1.0).contains(&cfg.overlap) || !(cfg.flatness > 0.0 && cfg.flatness < 1.0) {
        return Err(SamplerError::Config("overlap must lie in [0, 1) and flatness in (0, 1)".into()));
    }
    if !(cfg.ln_f_initial > 0.0 && cfg.ln_f_final > 0.0) {
        return Err(SamplerError::Config("modification factors must be positive".into()));
    }
    let windows = window_layout(lo, hi, cfg.window_bins, cfg.overlap);
    let jobs: Vec<(usize, (i64, i64))> = windows.into_iter().enumerate().collect();
    let results = cfg.exec.map(jobs, |(k, (a, b))| run_window(geometry, cfg, a, b, k as u64));

    let total = (hi - lo + 1) as usize;
    let mut log_g = vec![f64::NAN; total];
    let mut covered_to = lo - 1;
    for (g, rep) in &results {
        let (a, b) = (rep.lo, rep.hi);
        let offset = if covered_to < a {
            0.0
        } else {
            let ov: Vec<f64> = (a..=covered_to).map(|x| log_g[(x - lo) as usize] - g[(x - a) as usize]).collect();
            ov.iter().sum::<f64>() / ov.len() as f64
        };
        let from = if covered_to < a { a } else { (a + covered_to + 1) / 2 };
        for x in from..=b {
            log_g[(x - lo) as usize] = g[(x - a) as usize] + offset;
        }
        covered_to = covered_to.max(b);
    }
    let anchor = if lo <= 0 && 0 <= hi { 0 } else if lo > 0 { lo } else { hi };
    let c = log_g[(anchor - lo) as usize];
    log_g.iter_mut().for_each(|v| *v -= c);
    let partial = results.iter().any(|(_, r)| r.partial);
    Ok(DensityOfStates { b_min: lo, log_g, windows: results.into_iter().map(|(_, r)| r).collect(), partial })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_covers_range_with_overlap() {
        let w = window_layout(-100, 100, 40, 0.5);
        assert_eq!(w.first().unwrap().0, -100);
        assert_eq!(w.last().unwrap().1, 100);
        for p in w.windows(2) {
            assert!(p[1].0 <= p[0].1 && p[1].0 > p[0].0);
            assert_eq!(p[0].1 - p[0].0, 39);
        }
        assert_eq!(window_layout(0, 5, 100, 0.5), vec![(0, 5)]);
    }

    #[test]
    fn rejects_unreachable_range() {
        let g = LatticeGeometry::with_interior(2, 1).unwrap();
        assert!(wang_landau_alpha(g, &WangLandauConfig::new(1.0, (-5, 5), 1)).is_err());
    }

    #[test]
    fn deterministic_and_normalised() {
        let g = LatticeGeometry::with_interior(3, 1).unwrap();
        let mut cfg = WangLandauConfig::new(1.0, (-9, 9), 7);
        cfg.window_bins = 8;
        cfg.ln_f_final = 1e-4;
        let a = wang_landau_alpha(g, &cfg).unwrap();
        let b = wang_landau_alpha(g, &WangLandauConfig { exec: Execution::Sequential, ..cfg.clone() }).unwrap();
        assert_eq!(a.log_g, b.log_g);
        assert_eq!(a.log_g(0), Some(0.0));
        assert!(a.log_g(10).is_none());
        assert!(!a.partial);
    }
}
