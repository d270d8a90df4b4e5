use abplab_core::abp::{abp_calibrate, abp_measure, paraboloid_closed_form, AbpConstants};
use abplab_core::fields::{BallQuadrature, GridField, GridSpec, RadialField, RadialProfile};
use abplab_core::flow::{exact_flow, flow_solve, FlowConfig, Source};
use abplab_core::ma_radial::{min_hessian_eigenvalue, monge_ampere_residual, solve_dirichlet_radial};
use abplab_core::weight::Weight;
use std::sync::Arc;

// det of the complex Hessian of r^4 - 1: 4 r^2 in one variable, 8 r^4 in two.
#[test]
fn dirichlet_solve_recovers_quartic() {
    for (n, density) in [(1usize, (|r: f64| 4.0 * r * r) as fn(f64) -> f64), (2, |r: f64| 8.0 * r.powi(4))] {
        let mut errs = Vec::new();
        for nodes in [257usize, 513] {
            let g = RadialProfile::from_fn(nodes, density).unwrap();
            let psi = solve_dirichlet_radial(&g, n).unwrap();
            let h = 1.0 / (nodes - 1) as f64;
            let err = psi.samples().iter().enumerate().map(|(k, v)| (v - ((k as f64 * h).powi(4) - 1.0)).abs()).fold(0.0, f64::max);
            errs.push(err);
            assert!(min_hessian_eigenvalue(&psi) >= -1e-9);
            assert!(monge_ampere_residual(&psi, &g, n) < 1e-2);
        }
        assert!(errs[1] < 1e-4, "n={n}: {errs:?}");
        assert!(errs[0] / errs[1] > 3.0, "n={n}: {errs:?}");
    }
}

#[test]
fn constant_density_gives_paraboloid() {
    for n in [1, 2] {
        let psi = solve_dirichlet_radial(&RadialProfile::from_fn(129, |_| 9.0).unwrap(), n).unwrap();
        let a = 9f64.powf(1.0 / n as f64);
        for (k, v) in psi.samples().iter().enumerate() {
            let r = k as f64 / 128.0;
            assert!((v - a * (r * r - 1.0)).abs() < 1e-12);
        }
    }
}

#[test]
fn grid_and_radial_measurements_agree() {
    let quad = Arc::new(BallQuadrature::new(GridSpec::new(1, 256).unwrap()));
    let w = Weight::default_for(1);
    for a in [1.0, 3.0, 10.0] {
        let g = GridField::from_fn_with(quad.clone(), |p| a * (1.0 - p[0] * p[0] - p[1] * p[1])).unwrap();
        let r = RadialField::new(RadialProfile::from_fn(1025, |r| a * (1.0 - r * r)).unwrap(), 1).unwrap();
        let (mg, mr) = (abp_measure(&g, &w).unwrap(), abp_measure(&r, &w).unwrap());
        let (sup, mass, ent) = paraboloid_closed_form(1, a);
        for (got, want) in [(mg.mass, mass), (mr.mass, mass), (mg.entropy, ent), (mr.entropy, ent)] {
            assert!((got - want).abs() <= 0.02 * want, "A={a}: {got} vs {want}");
        }
        assert!((mr.sup_interior - sup).abs() < 1e-12);
    }
}

#[test]
fn calibrated_constants_cover_the_fit_split() {
    let w = Weight::default_for(2);
    let family: Vec<_> = (1..=40)
        .map(|a| abp_measure(&RadialField::new(RadialProfile::from_fn(257, |r| a as f64 * (1.0 - r * r)).unwrap(), 2).unwrap(), &w).unwrap())
        .collect();
    let cal = abp_calibrate(&family, AbpConstants::default_delta(2)).unwrap();
    assert_eq!(cal.fit.len(), cal.split.fit.len());
    for (r, &i) in cal.fit.iter().zip(&cal.split.fit) {
        assert!(r.slack >= -1e-9 * family[i].sup_interior);
    }
    assert!(cal.constants.c_n > 0.0 && cal.constants.c2 >= 0.0);
}

#[test]
fn flow_matches_closed_form_and_its_dimension() {
    for n in [1, 2] {
        let mut cfg = FlowConfig::radial(n, 0.5, 129, Source::Constant { value: 2.0 });
        cfg.dt = 0.01;
        cfg.record_every = 10;
        let state = flow_solve(&cfg).unwrap();
        assert!(state.violations.is_empty());
        for (k, &t) in state.slice_times.iter().enumerate() {
            let u = state.slice_profile(k).unwrap();
            for (i, v) in u.samples().iter().enumerate() {
                let r = i as f64 / 128.0;
                let want = exact_flow(&cfg, r * r, t).unwrap();
                assert_eq!(want, r * r - 1.0 - 2.0 * t);
                assert!((v - want).abs() < 1e-9, "n={n} t={t} node {i}: {v} vs {want}");
            }
        }
    }
}
