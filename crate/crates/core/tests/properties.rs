use std::sync::Arc;

use fogdrip::particles::{sigma_exact, sigma_llt, CanonicalWeights, PhaseParams, SigmaLaw, WeightMethod};
use fogdrip::phase::{phi, phi_minimizers, stationary_root, PhaseProblem, SolverOptions};
use fogdrip::sampler::{acceptance_probability, Ensemble};
use fogdrip::wulff::{
    half_plane_intersection, plaquette, polygon_area, restricted_value, tension_cost, uniform_normals, SurfaceTension,
    WulffShape,
};
use fogdrip::{Execution, HeightField, LatticeGeometry};
use proptest::prelude::*;

fn field_strategy() -> impl Strategy<Value = HeightField> {
    (1usize..=8, 1i32..=4).prop_flat_map(|(l, h)| {
        let hmax = h.min(l as i32 + 2);
        prop::collection::vec(-hmax..=hmax, l * l).prop_map(move |v| {
            HeightField::from_values(LatticeGeometry::with_interior(l, hmax).unwrap(), &v).unwrap()
        })
    })
}

fn brute_perimeter(f: &HeightField) -> i64 {
    let l = f.interior_side() as i64;
    let mut e = 0;
    for y in -1..=l {
        for x in -1..=l {
            e += (f.get_or_zero(x, y) - f.get_or_zero(x + 1, y)).abs() as i64;
            e += (f.get_or_zero(x, y) - f.get_or_zero(x, y + 1)).abs() as i64;
        }
    }
    e
}

fn disc() -> WulffShape {
    WulffShape::construct(&SurfaceTension::Isotropic { beta: 2.0 }).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn alpha_and_perimeter_match_cellwise_sums(f in field_strategy()) {
        prop_assert_eq!(f.alpha(), f.values().iter().map(|&v| v as i64).sum::<i64>());
        prop_assert_eq!(f.perimeter_sum(), brute_perimeter(&f));
        let l = f.interior_side() as i64;
        prop_assert_eq!(f.get_or_zero(-1, 0), 0);
        prop_assert_eq!(f.get_or_zero(l, l - 1), 0);
    }

    #[test]
    fn propose_delta_matches_recompute(f in field_strategy(), site_seed in any::<usize>(), up in any::<bool>()) {
        let site = site_seed % f.geometry().interior_sites();
        let dh = if up { 1 } else { -1 };
        let after = f.site_height(site) + dh;
        match f.propose_delta(site, dh) {
            None => prop_assert!(after.abs() > f.geometry().hmax()),
            Some(mv) => {
                let mut g = f.clone();
                g.apply(site, dh);
                prop_assert_eq!(mv.d_energy, g.perimeter_sum() - f.perimeter_sum());
                prop_assert_eq!(mv.d_alpha, g.alpha() - f.alpha());
            }
        }
    }

    #[test]
    fn equilibrium_identity(pv in 0.01f64..0.49, gap in 0.01f64..0.5, f in -3.0f64..3.0) {
        let ps = (pv + gap).min(0.99);
        let p = PhaseParams::from_occupations(pv, ps, f).unwrap();
        let lhs = (-p.a).exp() + (-p.b).exp();
        let rhs = (-p.c).exp() + (-p.d).exp();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(rhs));
        prop_assert!(((-p.f).exp() - lhs).abs() <= 1e-12 * lhs);
        prop_assert!(p.d() > 0.0);
    }

    #[test]
    fn exact_law_moments(n in 2u32..=4, r in 1u32..=2, frac in -1.0f64..1.0, pv in 0.05f64..0.45, ps in 0.55f64..0.95) {
        let g = LatticeGeometry::new(n, r, n as i32).unwrap();
        let p = PhaseParams::from_occupations(pv, ps, 0.0).unwrap();
        let alpha = (frac * g.half_box() as f64).round() as i64;
        let law = SigmaLaw::exact(alpha, &g, &p).unwrap();
        let (s, v) = ((g.half_box() as i64 + alpha) as f64, (g.half_box() as i64 - alpha) as f64);
        prop_assert!((law.total_mass() - 1.0).abs() < 1e-10);
        prop_assert!((law.mean() - (s * ps + v * pv)).abs() < 1e-8 * (1.0 + s + v));
        prop_assert!((law.variance() - (s * p.ds() + v * p.dv())).abs() < 1e-7 * (1.0 + s + v));
    }

    #[test]
    fn llt_depends_on_the_exponent_only(a1 in -64i64..64, a2 in -64i64..64, delta in -2.0f64..2.0) {
        let g = LatticeGeometry::new(4, 2, 2).unwrap();
        let p = PhaseParams::from_occupations(0.2, 0.8, 0.0).unwrap();
        let n2 = 16.0;
        let var = p.d() * g.box_sites() as f64;
        let ex = |a: i64| -(a as f64 * p.psv() - delta * n2).powi(2) / var;
        let diff = sigma_llt(a1, &g, &p, delta) - sigma_llt(a2, &g, &p, delta);
        prop_assert!((diff - (ex(a1) - ex(a2))).abs() < 1e-9);
    }

    #[test]
    fn shifted_weights_give_same_acceptance(f in field_strategy(), site_seed in any::<usize>(), up in any::<bool>(), shift in -50.0f64..50.0, delta in -1.0f64..1.0) {
        let g = *f.geometry();
        let geom = LatticeGeometry::new(g.n(), g.r(), g.hmax()).unwrap_or(g);
        let p = PhaseParams::from_occupations(0.3, 0.7, 0.0).unwrap();
        let w = CanonicalWeights::for_reachable(&geom, &p, delta, WeightMethod::Exact, Execution::Sequential);
        let a = Ensemble::Canonical(Arc::new(w.shifted(shift)));
        let b = Ensemble::Canonical(Arc::new(w));
        let site = site_seed % g.interior_sites();
        let dh = if up { 1 } else { -1 };
        let (pa, pb) = (acceptance_probability(&f, site, dh, 1.3, &a), acceptance_probability(&f, site, dh, 1.3, &b));
        prop_assert!((pa - pb).abs() < 1e-12);
    }

    #[test]
    fn restricted_value_increasing_and_above_free(s in 0.0f64..1.999, ds in 1e-4f64..1e-2) {
        let w = disc();
        let (a, b) = (restricted_value(&w, s).unwrap(), restricted_value(&w, (s + ds).min(2.0)).unwrap());
        prop_assert!(b > a);
        prop_assert!(a >= w.cost(s) - 1e-12);
        if s > w.s1 + 1e-9 {
            prop_assert!(a > w.cost(s));
        }
    }

    #[test]
    fn plaquette_area_decreasing(r in 0.01f64..0.99, dr in 1e-4f64..1e-2) {
        let w = disc();
        prop_assert!(plaquette(&w, (r + dr).min(1.0)).unwrap().area < plaquette(&w, r).unwrap().area);
    }

    #[test]
    fn stationarity_residual(kappa in 0.75f64..5.0) {
        if let Some(l) = stationary_root(kappa) {
            prop_assert!((4.0 * kappa * l.sqrt() * (1.0 - l) - 1.0).abs() < 1e-10);
        }
        for m in phi_minimizers(kappa) {
            prop_assert!(phi(kappa, m) <= phi(kappa, 0.0) + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn wulff_shape_beats_convex_perturbations(eps in prop::collection::vec(-0.2f64..0.2, 24), beta in 0.5f64..3.0, anisotropic in any::<bool>()) {
        let t = if anisotropic { SurfaceTension::LatticeL1 { beta } } else { SurfaceTension::Isotropic { beta } };
        let w = WulffShape::with_directions(&t, 720).unwrap();
        let normals = uniform_normals(eps.len());
        let offsets: Vec<f64> = normals.iter().zip(&eps).map(|(&n, e)| t.tau(n) * (1.0 + e)).collect();
        let body = half_plane_intersection(&normals, &offsets).unwrap();
        let k = polygon_area(&body).sqrt();
        let unit: Vec<(f64, f64)> = body.iter().map(|p| (p.0 / k, p.1 / k)).collect();
        prop_assert!(tension_cost(&unit, &t) >= w.cost_unit * (1.0 - 1e-9));
    }
}

#[test]
fn excluded_neighbourhood_of_one_layer() {
    let p = PhaseParams::from_occupations(0.2, 0.8, 0.0).unwrap();
    let prob = PhaseProblem::new(p, 8.0, disc())
        .with_options(SolverOptions { grid_points: 4000, allow_unfit: true, ..SolverOptions::default() });
    let crit = prob.critical_values().unwrap();
    let r2 = 64.0;
    let mut closest = f64::INFINITY;
    for k in 0..=400 {
        let d = crit.delta1_numeric * 0.5 + k as f64 / 400.0 * (crit.delta2 * 1.5 - crit.delta1_numeric * 0.5);
        closest = closest.min((prob.minimize(d).rho_star - r2).abs());
    }
    assert!(closest > 0.01 * r2, "minimiser approaches R² within {closest}");
}

#[test]
fn exact_and_llt_weight_tables_share_argmax() {
    let g = LatticeGeometry::new(8, 2, 8).unwrap();
    let p = PhaseParams::from_occupations(0.2, 0.8, 0.0).unwrap();
    for delta in [-1.0, 0.0, 0.5, 1.5] {
        let e = CanonicalWeights::build(&g, &p, delta, (-600, 600), WeightMethod::Exact, Execution::Parallel);
        let l = CanonicalWeights::build(&g, &p, delta, (-600, 600), WeightMethod::Llt, Execution::Parallel);
        assert!((e.argmax() - l.argmax()).abs() <= 1, "delta {delta}: {} vs {}", e.argmax(), l.argmax());
        let _ = sigma_exact(0, &g, &p, e.target.sigma);
    }
}
