use std::collections::HashMap;
use std::sync::Arc;

use fogdrip::oracle::{total_variation, EnumeratedEnsemble, GoldenRecord};
use fogdrip::particles::{CanonicalWeights, PhaseParams, WeightMethod};
use fogdrip::sampler::{
    acceptance_probability, run_chain, stream_rng, wang_landau_alpha, Chain, Ensemble, RunConfig, WangLandauConfig,
};
use fogdrip::{extract_contours, Execution, HeightField, LatticeGeometry};

fn tiny(l: usize, hmax: i32) -> LatticeGeometry {
    LatticeGeometry::with_interior(l, hmax).unwrap()
}

fn visit_counts(g: LatticeGeometry, beta: f64, ensemble: Ensemble, sweeps: u64, seed: u64) -> (EnumeratedEnsemble, HashMap<usize, u64>) {
    let ens = EnumeratedEnsemble::enumerate(g, Execution::Sequential).unwrap();
    let mut chain = Chain::new(HeightField::flat(g), beta, ensemble, stream_rng(seed, 0)).unwrap();
    let mut counts = HashMap::new();
    let cfg = RunConfig { sweeps, burnin: sweeps / 100, thinning: 1, checkpoint_every: 10_000, snapshot_every: 0 };
    chain.run(&cfg, |c| *counts.entry(ens.index_of(c.field())).or_insert(0) += 1).unwrap();
    (ens, counts)
}

#[test]
fn zero_sweeps_returns_initial_state() {
    let g = tiny(4, 2);
    let f = HeightField::droplet(g, 5);
    let cfg = RunConfig { sweeps: 0, burnin: 0, thinning: 1, checkpoint_every: 1, snapshot_every: 1 };
    let r = run_chain(f.clone(), 1.0, Ensemble::Grand, stream_rng(3, 0), &cfg).unwrap();
    assert_eq!(r.series.len(), 1);
    assert_eq!((r.series[0].energy, r.series[0].alpha), (f.perimeter_sum(), 5));
    assert_eq!(r.final_field, f);
    assert_eq!(r.snapshots.len(), 1);
    assert!(r.iat_alpha.is_none());
}

#[test]
fn same_seed_same_trajectory() {
    let g = LatticeGeometry::new(10, 1, 3).unwrap();
    let cfg = RunConfig::with_sweeps(300);
    let a = run_chain(HeightField::flat(g), 1.2, Ensemble::Grand, stream_rng(11, 2), &cfg).unwrap();
    let b = run_chain(HeightField::flat(g), 1.2, Ensemble::Grand, stream_rng(11, 2), &cfg).unwrap();
    assert_eq!(a.series, b.series);
    assert_eq!(a.final_field, b.final_field);
    let c = run_chain(HeightField::flat(g), 1.2, Ensemble::Grand, stream_rng(11, 3), &cfg).unwrap();
    assert_ne!(a.series, c.series);
}

#[test]
fn raising_a_flat_site_costs_four_bonds() {
    let g = tiny(3, 1);
    let f = HeightField::flat(g);
    for beta in [0.5, 3.0, 8.0] {
        let p = acceptance_probability(&f, 4, 1, beta, &Ensemble::Grand);
        assert!((p - (-4.0 * beta).exp()).abs() < 1e-15 * p.max(1e-300));
    }
    assert_eq!(acceptance_probability(&f, 4, 1, 1.0, &Ensemble::Pinned { lo: -1, hi: 0 }), 0.0);
}

#[test]
fn grand_chain_matches_exact_law_on_two_by_two() {
    let (ens, counts) = visit_counts(tiny(2, 1), 1.0, Ensemble::Grand, 200_000, 1);
    let tv = total_variation(&counts, &ens.grand_law(1.0));
    assert!(tv < 0.02, "tv={tv}");
}

#[test]
fn pinned_chain_matches_conditional_law() {
    let (ens, counts) = visit_counts(tiny(2, 2), 0.8, Ensemble::Pinned { lo: -2, hi: 3 }, 200_000, 4);
    let tv = total_variation(&counts, &ens.pinned_law(0.8, -2, 3));
    assert!(tv < 0.02, "tv={tv}");
}

#[test]
fn detailed_balance_is_exact_for_every_ensemble() {
    let g = tiny(2, 1);
    let ens = EnumeratedEnsemble::enumerate(g, Execution::Sequential).unwrap();
    let params = PhaseParams::from_occupations(0.2, 0.8, 0.0).unwrap();
    let w = CanonicalWeights::for_reachable(&g, &params, 0.7, WeightMethod::Exact, Execution::Sequential);
    for e in [Ensemble::Grand, Ensemble::Pinned { lo: 0, hi: 2 }, Ensemble::Canonical(Arc::new(w))] {
        let r = ens.detailed_balance_check(1.7, &e);
        assert!(r.worst_pair < 1e-12 && r.worst_stationary < 1e-12, "{}: {r:?}", e.name());
    }
    let big = EnumeratedEnsemble::enumerate(tiny(3, 1), Execution::Sequential).unwrap();
    let r = big.detailed_balance_check(1.2, &Ensemble::Grand);
    assert!(r.worst_pair < 1e-12 && r.worst_stationary < 1e-12, "{r:?}");
}

#[test]
fn canonical_volume_law_symmetric_at_zero_supersaturation() {
    let g = LatticeGeometry::new(6, 1, 2).unwrap();
    let params = PhaseParams::from_occupations(0.3, 0.7, 0.0).unwrap();
    let w = Arc::new(CanonicalWeights::for_reachable(&g, &params, 0.0, WeightMethod::Exact, Execution::Sequential));
    let mut hist: HashMap<i64, f64> = HashMap::new();
    let mut n = 0.0;
    for k in 0..4 {
        let mut chain = Chain::new(HeightField::flat(g), 0.6, Ensemble::Canonical(w.clone()), stream_rng(8, k)).unwrap();
        chain
            .run(&RunConfig { sweeps: 100_000, burnin: 1000, thinning: 1, checkpoint_every: 10_000, snapshot_every: 0 }, |c| {
                *hist.entry(c.alpha()).or_insert(0.0) += 1.0;
                n += 1.0;
            })
            .unwrap();
    }
    let mut tv = 0.0;
    for (b, c) in &hist {
        tv += (c - hist.get(&-b).copied().unwrap_or(0.0)).abs() / n;
    }
    assert!(tv / 2.0 < 0.03, "mirror distance {}", tv / 2.0);
}

#[test]
fn contour_frequencies_respect_peierls_bound() {
    let g = LatticeGeometry::new(8, 1, 2).unwrap();
    let beta = 1.0;
    let mut freq: HashMap<_, (u64, usize)> = HashMap::new();
    let mut samples = 0u64;
    let mut chain = Chain::new(HeightField::flat(g), beta, Ensemble::Grand, stream_rng(21, 0)).unwrap();
    chain
        .run(&RunConfig { sweeps: 40_000, burnin: 500, thinning: 4, checkpoint_every: 5000, snapshot_every: 0 }, |c| {
            samples += 1;
            let mut seen = std::collections::HashSet::new();
            for k in extract_contours(c.field()).contours() {
                let key = k.canonical_key();
                if seen.insert(key.clone()) {
                    freq.entry(key).or_insert((0, k.length())).0 += 1;
                }
            }
        })
        .unwrap();
    for (key, (hits, len)) in freq {
        let p = hits as f64 / samples as f64;
        // thinned samples are correlated; widen the error by the thinning gap
        let se = (p * (1.0 - p) / samples as f64).sqrt() * 4.0;
        assert!(p <= (-beta * len as f64).exp() + 3.0 * se, "{key:?}: {p} vs bound {}", (-beta * len as f64).exp());
    }
}

#[test]
fn exact_peierls_bound() {
    for (l, hmax) in [(2, 1), (2, 2), (3, 1)] {
        let ens = EnumeratedEnsemble::enumerate(tiny(l, hmax), Execution::Sequential).unwrap();
        for beta in [0.4, 1.0, 2.0] {
            let r = ens.peierls_check(beta);
            assert!(r.contours > 0 && r.worst_ratio <= 1.0 + 1e-12, "L={l} hmax={hmax} beta={beta}: {r:?}");
        }
    }
}

#[test]
fn canonical_chain_stays_in_concentration_window() {
    // α ≤ N²·max(δ⁴/(ν²D²R⁴), b₀) with ν = b₀ = 1
    let g = LatticeGeometry::new(8, 2, 3).unwrap();
    let params = PhaseParams::from_occupations(0.2, 0.8, 0.0).unwrap();
    for delta in [0.25, 0.5, 1.0] {
        let w = Arc::new(CanonicalWeights::for_reachable(&g, &params, delta, WeightMethod::Exact, Execution::Sequential));
        let bound = 64.0 * (delta.powi(4) / (params.d().powi(2) * 16.0)).max(1.0);
        let r = run_chain(HeightField::flat(g), 1.5, Ensemble::Canonical(w), stream_rng(5, 0), &RunConfig::with_sweeps(20_000)).unwrap();
        let worst = r.series.iter().map(|p| p.alpha).max().unwrap();
        assert!((worst as f64) <= bound, "delta={delta}: alpha reached {worst} > {bound}");
    }
}

#[test]
fn golden_files_match_enumeration() {
    let files = [
        include_str!("golden/oracle_L1_h1_b2.json"),
        include_str!("golden/oracle_L2_h1_b2.json"),
        include_str!("golden/oracle_L2_h2_b2.json"),
    ];
    for text in files {
        let golden: GoldenRecord = serde_json::from_str(text).unwrap();
        let ens = EnumeratedEnsemble::enumerate(tiny(golden.interior_side, golden.hmax), Execution::Parallel).unwrap();
        let diffs = ens.golden(golden.beta).compare(&golden, 1e-12);
        assert!(diffs.is_empty(), "{diffs:?}");
    }
}

#[test]
fn wang_landau_recovers_exact_volume_law() {
    let g = tiny(3, 1);
    let beta = 0.7;
    let ens = EnumeratedEnsemble::enumerate(g, Execution::Sequential).unwrap();
    let exact = ens.volume_law(&ens.grand_law(beta));
    let mut cfg = WangLandauConfig::new(beta, (-9, 9), 17);
    cfg.window_bins = 8;
    cfg.ln_f_final = 1e-6;
    cfg.production_sweeps = 200_000;
    let dos = wang_landau_alpha(g, &cfg).unwrap();
    assert!(!dos.partial);
    for b in -9..=9 {
        let want = (exact[&b] / exact[&0]).ln();
        let got = dos.log_g(b).unwrap();
        assert!((got - want).abs() < 0.1, "b={b}: {got} vs {want}");
    }
}

#[test]
fn autocorrelation_of_known_process() {
    // AR(1) with coefficient 0.8 has τ = (1+φ)/(1−φ) = 9
    use rand::Rng;
    let mut rng = stream_rng(99, 0);
    let mut x = vec![0.0f64; 400_000];
    for i in 1..x.len() {
        let e: f64 = rng.random::<f64>() - 0.5;
        x[i] = 0.8 * x[i - 1] + e;
    }
    let tau = fogdrip::sampler::integrated_autocorrelation(&x).unwrap();
    assert!((tau - 9.0).abs() < 0.6, "tau={tau}");
    assert!(fogdrip::sampler::integrated_autocorrelation(&[1.0; 100]).is_none());
}
