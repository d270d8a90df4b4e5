//! One function per subcommand: run the computation, write its files
//! through an [`Emitter`] and record the declared checks as verdicts.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use abplab_core::abp::{
    abp_calibrate, abp_drift_check, abp_evaluate, abp_measure, concentrating_log_density, dirichlet_l_infinity_check,
    paraboloid_closed_form, trudinger_check, AbpConstants, AbpMeasurement, Mode,
};
use abplab_core::degiorgi::{chain_margin, default_levels, level_machinery, soundness_sweep};
use abplab_core::fields::{BallQuadrature, GridField, GridSpec, RadialField, RadialProfile};
use abplab_core::flow::{
    energy_monotonicity_check, flow_solve, frozen_state, monitor_bounds, oracle_error, parabolic_alpha_check,
};
use abplab_core::linalg::HermitianMatrix;
use abplab_core::ma_radial::{
    comparison_check, comparison_setup, energy, kolodziej_probe, log_threshold, min_hessian_eigenvalue,
    monge_ampere_residual, radial_mass, solve_dirichlet_radial, LogMember, RadialMember,
};
use abplab_core::math::{self, PI};
use abplab_core::parabolic::{parabolic_calibrate, parabolic_evaluate, MuMember, ParabolicMeasurement};
use abplab_core::torus::{gradient_report, make_pair, positivity_threshold, sweep, GradientParams, TorusFamily, TorusGrid};
use abplab_core::weight::Weight;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{self, AbpFixed, Calibrate, Constants, ExperimentConfig, ParabolicFixed, Representation};
use crate::error::{RunError, RunResult};
use crate::report::{config_hash, Emitter, RunManifest, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Experiment {
    AbpVerify,
    DriftVerify,
    Trudinger,
    DirichletLinf,
    MaSolve,
    KolodziejProbe,
    DeGiorgi,
    Flow,
    ParabolicAbp,
    Torus,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::AbpVerify,
        Experiment::DriftVerify,
        Experiment::Trudinger,
        Experiment::DirichletLinf,
        Experiment::MaSolve,
        Experiment::KolodziejProbe,
        Experiment::DeGiorgi,
        Experiment::Flow,
        Experiment::ParabolicAbp,
        Experiment::Torus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::AbpVerify => "abp-verify",
            Experiment::DriftVerify => "drift-verify",
            Experiment::Trudinger => "trudinger",
            Experiment::DirichletLinf => "dirichlet-linf",
            Experiment::MaSolve => "ma-solve",
            Experiment::KolodziejProbe => "kolodziej-probe",
            Experiment::DeGiorgi => "degiorgi",
            Experiment::Flow => "flow",
            Experiment::ParabolicAbp => "parabolic-abp",
            Experiment::Torus => "torus",
        }
    }

    pub fn module(self) -> &'static str {
        match self {
            Experiment::AbpVerify | Experiment::DriftVerify | Experiment::Trudinger | Experiment::DirichletLinf => "abp_elliptic",
            Experiment::MaSolve | Experiment::KolodziejProbe => "ma_radial",
            Experiment::DeGiorgi => "degiorgi",
            Experiment::Flow | Experiment::ParabolicAbp => "parabolic_flow",
            Experiment::Torus => "torus_gradient",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstantsFlag {
    Fixed,
    Calibrate,
}

/// Command-line values that override config keys.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub resolution: Option<usize>,
    pub constants: Option<ConstantsFlag>,
}

/// Writes the flag values into the config so the config hash covers them.
pub fn apply_overrides(cfg: &mut ExperimentConfig, exp: Experiment, ov: &Overrides) -> RunResult<()> {
    if let Some(seed) = ov.seed {
        cfg.seed = Some(seed);
    }
    if let Some(res) = ov.resolution {
        match exp {
            Experiment::AbpVerify => {
                cfg.abp_verify.grid_resolution = res;
                cfg.abp_verify.radial_nodes = res;
            }
            Experiment::DriftVerify => cfg.drift_verify.radial_nodes = res,
            Experiment::Trudinger => cfg.trudinger.radial_nodes = res,
            Experiment::DirichletLinf => cfg.dirichlet_linf.radial_nodes = res,
            Experiment::MaSolve => cfg.ma_solve.radial_nodes = res,
            Experiment::DeGiorgi => cfg.degiorgi.level_nodes = res,
            Experiment::Flow => cfg.flow.run.resolution = res,
            Experiment::ParabolicAbp => cfg.parabolic_abp.radial_nodes = res,
            Experiment::Torus => cfg.torus.resolution_1 = res,
            Experiment::KolodziejProbe => {
                return Err(RunError::Config("kolodziej-probe evaluates closed-form members and takes no --resolution".into()))
            }
        }
    }
    if let Some(flag) = ov.constants {
        let calibrate = flag == ConstantsFlag::Calibrate;
        match exp {
            Experiment::AbpVerify => {
                cfg.abp_verify.constants = match (calibrate, cfg.abp_verify.constants) {
                    (true, _) => Constants::Named(Calibrate::Calibrate),
                    (false, Constants::Fixed(k)) => Constants::Fixed(k),
                    (false, Constants::Named(_)) => Constants::Fixed(AbpFixed::default()),
                }
            }
            Experiment::ParabolicAbp => {
                cfg.parabolic_abp.constants = match (calibrate, cfg.parabolic_abp.constants) {
                    (true, _) => Constants::Named(Calibrate::Calibrate),
                    (false, Constants::Fixed(k)) => Constants::Fixed(k),
                    (false, Constants::Named(_)) => Constants::Fixed(ParabolicFixed::default()),
                }
            }
            Experiment::Trudinger => {
                if calibrate {
                    cfg.trudinger.c3 = None;
                } else if cfg.trudinger.c3.is_none() {
                    return Err(RunError::Config("--fixed-constants needs trudinger.c3 in the config".into()));
                }
            }
            other => {
                return Err(RunError::Config(format!("{} has no calibrated constants", other.name())));
            }
        }
    }
    cfg.validate()
}

/// Runs one experiment into `out` and writes its manifest.
pub fn run_experiment(exp: Experiment, cfg: &ExperimentConfig, out: &Path) -> RunResult<RunManifest> {
    if let Some(name) = &cfg.subcommand {
        if name != exp.name() {
            return Err(RunError::Config(format!("config is for `{name}`, not `{}`", exp.name())));
        }
    }
    let seed = cfg.seed.unwrap_or(0);
    let mut em = Emitter::new(out)?;
    match exp {
        Experiment::AbpVerify => abp_verify(&cfg.abp_verify, &mut em)?,
        Experiment::DriftVerify => drift_verify(&cfg.drift_verify, &mut em)?,
        Experiment::Trudinger => trudinger(&cfg.trudinger, &mut em)?,
        Experiment::DirichletLinf => dirichlet_linf(&cfg.dirichlet_linf, &mut em)?,
        Experiment::MaSolve => ma_solve(&cfg.ma_solve, &mut em)?,
        Experiment::KolodziejProbe => kolodziej(&cfg.kolodziej_probe, &mut em)?,
        Experiment::DeGiorgi => degiorgi(&cfg.degiorgi, seed, &mut em)?,
        Experiment::Flow => flow(&cfg.flow, &mut em)?,
        Experiment::ParabolicAbp => parabolic_abp(&cfg.parabolic_abp, &mut em)?,
        Experiment::Torus => torus(&cfg.torus, &mut em)?,
    }
    let mut inputs = BTreeMap::new();
    inputs.insert("seed".to_string(), seed.to_string());
    inputs.insert("subcommand".to_string(), exp.name().to_string());
    let id = cfg.id.clone().unwrap_or_else(|| exp.name().to_string());
    em.finish(&id, exp.module(), config_hash(cfg)?, inputs)
}

fn paraboloid_profile(a: f64, nodes: usize) -> RunResult<RadialProfile> {
    Ok(RadialProfile::from_fn(nodes, move |r| a * (1.0 - r * r))?)
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}

/// Measures the paraboloid family of one dimension.
pub fn paraboloid_family(n: usize, amplitudes: &[f64], grid: Option<usize>, nodes: usize, w: &Weight) -> RunResult<Vec<AbpMeasurement>> {
    match grid {
        Some(res) => {
            let quad = Arc::new(BallQuadrature::new(GridSpec::new(n, res)?));
            amplitudes
                .par_iter()
                .map(|&a| {
                    let u = GridField::from_fn_with(quad.clone(), |p| a * (1.0 - p.iter().map(|x| x * x).sum::<f64>()))?;
                    Ok(abp_measure(&u, w)?)
                })
                .collect()
        }
        None => amplitudes
            .par_iter()
            .map(|&a| Ok(abp_measure(&RadialField::new(paraboloid_profile(a, nodes)?, n)?, w)?))
            .collect(),
    }
}

fn abp_verify(s: &config::AbpVerify, em: &mut Emitter) -> RunResult<()> {
    em.tolerance("closed_form_relative", s.closed_form_tolerance);
    for &n in &s.dims {
        let w = s.weight.unwrap_or(Weight::default_for(n));
        let grid = match s.representation {
            Representation::Auto => n == 1,
            Representation::Grid => true,
            Representation::Radial => false,
        };
        let family = paraboloid_family(n, &s.amplitudes, grid.then_some(s.grid_resolution), s.radial_nodes, &w)?;
        let mut table = Table::new(&["A", "sup_int", "sup_bdy", "mass", "entropy"]);
        for (a, m) in s.amplitudes.iter().zip(&family) {
            table.push(vec![*a, m.sup_interior, m.sup_boundary, m.mass, m.entropy]);
        }
        em.csv(&format!("family_n{n}.csv"), &table)?;
        if w == Weight::default_for(n) {
            let mut worst: f64 = 0.0;
            for (a, m) in s.amplitudes.iter().zip(&family) {
                let (sup, mass, ent) = paraboloid_closed_form(n, *a);
                worst = worst.max(rel_err(m.sup_interior, sup)).max(rel_err(m.mass, mass)).max(rel_err(m.entropy, ent));
            }
            em.verdict(&format!("closed_form_n{n}"), worst <= s.closed_form_tolerance);
        }
        let tol = family.iter().map(|m| m.tolerance).fold(0.0, f64::max);
        em.tolerance(&format!("slack_n{n}"), tol);
        match s.constants {
            Constants::Named(_) => {
                let cal = abp_calibrate(&family, AbpConstants::default_delta(n))?;
                em.verdict(&format!("held_out_n{n}"), cal.passes());
                em.json(&format!("abp_n{n}.json"), &cal)?;
            }
            Constants::Fixed(k) => {
                let k = AbpConstants { c_n: k.c_n, delta: k.delta.unwrap_or(AbpConstants::default_delta(n)), c2: k.c2 };
                if k.delta.is_nan() || k.delta <= 0.0 {
                    return Err(RunError::Config("delta must be positive".into()));
                }
                let reports: Vec<_> = family.iter().map(|m| abp_evaluate(m, &k, Mode::Fixed)).collect();
                let ok = reports.iter().zip(&family).all(|(r, m)| r.slack >= -m.tolerance);
                em.verdict(&format!("slack_n{n}"), ok);
                em.json(&format!("abp_n{n}.json"), &reports)?;
            }
        }
    }
    Ok(())
}

fn drift_verify(s: &config::DriftVerify, em: &mut Emitter) -> RunResult<()> {
    let n = s.n;
    let w = s.weight.unwrap_or(Weight::default_for(n));
    let u = RadialField::new(paraboloid_profile(s.amplitude, s.radial_nodes)?, n)?;
    let a = HermitianMatrix::diagonal(&s.a_diag);
    let f = -s.amplitude * s.a_diag.iter().sum::<f64>();
    let k = AbpConstants { c_n: s.constants.c_n, delta: s.constants.delta.unwrap_or(AbpConstants::default_delta(n)), c2: s.constants.c2 };
    let d = abp_drift_check(&u, |_| a, |_| f, &w, &k)?;
    em.tolerance("drift", d.tolerance);
    em.verdict("slack", d.report.slack >= -d.tolerance);
    em.verdict("amgm", d.amgm_min_slack >= -d.tolerance);
    em.json("drift.json", &d)
}

fn trudinger(s: &config::Trudinger, em: &mut Emitter) -> RunResult<()> {
    let fam = s
        .amplitudes
        .iter()
        .map(|&a| Ok((a, RadialField::new(paraboloid_profile(a, s.radial_nodes)?, s.n)?)))
        .collect::<RunResult<Vec<_>>>()?;
    let rep = trudinger_check(&fam, s.p, s.c1, s.c2, s.c3)?;
    let mut table = Table::new(&["param", "n_p", "exp_integral", "sup"]);
    for r in &rep.rows {
        table.push(vec![r.param, r.n_p, r.exp_integral, r.sup]);
    }
    em.csv("trudinger.csv", &table)?;
    em.verdict("bounded", rep.passes());
    em.json("trudinger.json", &rep)
}

fn dirichlet_linf(s: &config::DirichletLinf, em: &mut Emitter) -> RunResult<()> {
    let n = s.n;
    let w = s.weight.unwrap_or(Weight::default_for(n));
    let target = s.target.unwrap_or(2.0 * math::ball_volume(n));
    let fam = s
        .radii
        .iter()
        .map(|&eps| Ok((eps, concentrating_log_density(n, &w, eps, target, s.radial_nodes)?)))
        .collect::<RunResult<Vec<_>>>()?;
    let rep = dirichlet_l_infinity_check(n, &w, &fam)?;
    let mut table = Table::new(&["param", "entropy", "sup_norm", "mass"]);
    for r in &rep.rows {
        table.push(vec![r.param, r.entropy, r.sup_norm, r.mass]);
    }
    em.csv("dirichlet_linf.csv", &table)?;
    em.verdict("bounded", rep.passes());
    em.json("dirichlet_linf.json", &rep)
}

#[derive(Serialize)]
struct MaSummary {
    n: usize,
    nodes: usize,
    residual: f64,
    min_hessian_eigenvalue: f64,
    mass: f64,
    energy: f64,
    exact_error: Option<f64>,
}

#[derive(Serialize)]
struct ComparisonRow {
    profile: config::RadialExpr,
    tolerance: f64,
    report: abplab_core::ma_radial::ComparisonReport,
}

fn ma_solve(s: &config::MaSolve, em: &mut Emitter) -> RunResult<()> {
    let n = s.n;
    let g = RadialProfile::from_fn(s.radial_nodes, |r| s.density.eval(r))?;
    let psi = solve_dirichlet_radial(&g, n)?;
    let residual = monge_ampere_residual(&psi, &g, n);
    let min_eig = min_hessian_eigenvalue(&psi);
    let exact_error = s.density.constant_value().map(|c| {
        let root = math::root(c, n);
        psi.samples().iter().enumerate().map(|(k, v)| (v - root * (psi.radius(k).powi(2) - 1.0)).abs()).fold(0.0, f64::max)
    });
    let summary = MaSummary { n, nodes: s.radial_nodes, residual, min_hessian_eigenvalue: min_eig, mass: radial_mass(&psi, n), energy: energy(&psi, n)?, exact_error };
    em.tolerance("residual", s.residual_tolerance);
    em.verdict("residual", residual <= s.residual_tolerance);
    em.verdict("plurisubharmonic", min_eig >= -1e-9);
    if let Some(e) = exact_error {
        em.tolerance("exact", s.exact_tolerance);
        em.verdict("exact", e <= s.exact_tolerance);
    }
    em.profile("solution", &psi)?;
    em.json("ma_solve.json", &summary)?;
    if let Some(c) = &s.comparison {
        let w = c.weight.unwrap_or(Weight::default_for(n));
        let mut rows = Vec::new();
        let mut ok = true;
        for expr in &c.profiles {
            let gp = RadialProfile::from_fn(s.radial_nodes, |r| expr.eval(r))?;
            let setup = comparison_setup(&gp, &w, n, c.q, c.alpha)?;
            let report = comparison_check(&gp, &setup.psi1, &setup.h, &w)?;
            let tolerance = 10.0 * gp.spacing() * gp.spacing();
            ok &= report.worst_margin >= -tolerance && report.worst_dichotomy >= -tolerance;
            rows.push(ComparisonRow { profile: expr.clone(), tolerance, report });
        }
        em.verdict("comparison", ok);
        em.json("comparison.json", &rows)?;
    }
    Ok(())
}

fn kolodziej(s: &config::KolodziejProbe, em: &mut Emitter) -> RunResult<()> {
    let n = s.n;
    let members: Vec<(f64, Box<dyn RadialMember>)> =
        s.epsilons.iter().map(|&e| (e, Box::new(LogMember::unit_mass(n, e)) as Box<dyn RadialMember>)).collect();
    let closed = log_threshold(n, LogMember::unit_mass(n, 0.1).scale);
    let alphas: Vec<f64> = s.alpha_fractions.iter().map(|f| f * closed).collect();
    let rep = kolodziej_probe(n, &members, &alphas, s.mass_cap)?;
    let mut table = Table::new(&["family_param", "alpha", "integral", "mass"]);
    for r in &rep.rows {
        table.push(vec![r.family_param, r.alpha, r.integral, r.mass]);
    }
    em.csv("probe.csv", &table)?;
    em.tolerance("threshold_relative", s.threshold_tolerance);
    let ok = rep.alpha_star.is_some_and(|a| (a - closed).abs() <= s.threshold_tolerance * closed);
    em.verdict("threshold", ok);
    #[derive(Serialize)]
    struct Out<'a> {
        closed_form_threshold: f64,
        report: &'a abplab_core::ma_radial::ProbeReport,
    }
    em.json("probe.json", &Out { closed_form_threshold: closed, report: &rep })
}

/// Level curves of `1 - |z|^2` on the disc and their largest deviation
/// from `phi = pi (1 - s)`, `A = pi (1 - s)^2 / 2`.
pub fn disc_level_curves(nodes: usize) -> RunResult<(abplab_core::degiorgi::LevelCurves, f64)> {
    let v = RadialField::new(RadialProfile::from_fn(nodes, |r| 1.0 - r * r)?, 1)?;
    let s = default_levels(&v, 0.0)?;
    let c = level_machinery(&v, |_| 1.0, &s)?;
    let mut err: f64 = 0.0;
    for (i, &x) in c.s.iter().enumerate() {
        err = err.max((c.phi[i] - PI * (1.0 - x)).abs()).max((c.a[i] - PI * (1.0 - x) * (1.0 - x) / 2.0).abs());
    }
    Ok((c, err))
}

fn degiorgi(s: &config::DeGiorgi, seed: u64, em: &mut Emitter) -> RunResult<()> {
    let rows = soundness_sweep(seed, s.families, s.samples)?;
    let mut table = Table::new(&["amplitude", "support", "gamma", "delta", "c0", "s_infinity", "vanishing", "margin"]);
    for r in &rows {
        table.push(vec![r.family.amplitude, r.family.support, r.family.gamma, r.delta, r.c0, r.s_infinity, r.vanishing, r.margin]);
    }
    em.csv("soundness.csv", &table)?;
    em.verdict("soundness", rows.iter().all(|r| r.passes()));
    let (c, err) = disc_level_curves(s.level_nodes)?;
    let mut curves = Table::new(&["s", "phi", "A"]);
    for i in 0..c.s.len() {
        curves.push(vec![c.s[i], c.phi[i], c.a[i]]);
    }
    em.csv("curves.csv", &curves)?;
    let margin = chain_margin(&c);
    em.tolerance("chain", s.chain_tolerance);
    em.verdict("chain", margin >= -s.chain_tolerance);
    em.verdict("closed_form_curves", err <= s.chain_tolerance);
    #[derive(Serialize)]
    struct Out {
        seed: u64,
        families: usize,
        passing: usize,
        chain_margin: f64,
        curve_error: f64,
    }
    em.json("degiorgi.json", &Out { seed, families: rows.len(), passing: rows.iter().filter(|r| r.passes()).count(), chain_margin: margin, curve_error: err })
}

fn flow(s: &config::Flow, em: &mut Emitter) -> RunResult<()> {
    let state = if s.frozen { frozen_state(&s.run)? } else { flow_solve(&s.run)? };
    em.flow_state("flow", &state)?;
    let monitors = monitor_bounds(&state)?;
    let energy = energy_monotonicity_check(&state);
    let alpha = parabolic_alpha_check(&state, s.alpha)?;
    let oracle = oracle_error(&state).ok();
    em.json("monitors.json", &monitors)?;
    em.json("energy.json", &energy)?;
    em.json("alpha.json", &alpha)?;
    if s.frozen || s.run.control {
        em.verdict("control_flagged", !monitors.passes());
        return Ok(());
    }
    em.tolerance("energy", energy.tolerance);
    em.verdict("monitors", monitors.passes());
    em.verdict("energy", energy.passes());
    em.tolerance("alpha_spread", s.alpha_spread);
    em.verdict("alpha_spread", alpha.spread() <= s.alpha_spread);
    if let Some(e) = oracle {
        em.tolerance("oracle", s.oracle_tolerance);
        em.verdict("oracle", e <= s.oracle_tolerance);
        em.json("oracle.json", &BTreeMap::from([("linf_error", e)]))?;
    }
    Ok(())
}

/// Measures the `mu(t)` family of one dimension.
pub fn mu_family(s: &config::ParabolicAbp, n: usize) -> RunResult<Vec<ParabolicMeasurement>> {
    let w = s.weight.unwrap_or(Weight::Power { exponent: (n + 2) as f64 });
    s.amplitudes
        .iter()
        .map(|&a| Ok(MuMember { amplitude: a, rate: s.rate }.measure(n, s.t_final, s.steps, s.radial_nodes, &w)?))
        .collect()
}

fn parabolic_abp(s: &config::ParabolicAbp, em: &mut Emitter) -> RunResult<()> {
    for &n in &s.dims {
        let fam = mu_family(s, n)?;
        em.verdict(&format!("amgm_n{n}"), fam.iter().all(|m| m.amgm_margin >= -m.tolerance));
        em.tolerance(&format!("amgm_n{n}"), fam.iter().map(|m| m.tolerance).fold(0.0, f64::max));
        match s.constants {
            Constants::Named(_) => {
                let cal = parabolic_calibrate(&fam)?;
                em.verdict(&format!("held_out_n{n}"), cal.passes());
                em.json(&format!("parabolic_n{n}.json"), &cal)?;
            }
            Constants::Fixed(k) => {
                let reports: Vec<_> = fam.iter().map(|m| parabolic_evaluate(m, k.c1, k.c2, Mode::Fixed)).collect();
                em.verdict(&format!("slack_n{n}"), reports.iter().zip(&fam).all(|(r, m)| r.slack >= -m.tolerance));
                em.json(&format!("parabolic_n{n}.json"), &reports)?;
            }
        }
    }
    Ok(())
}

pub fn family_name(f: &TorusFamily) -> String {
    match f {
        TorusFamily::SingleMode => "single-mode".into(),
        TorusFamily::TwoMode => "two-mode".into(),
        TorusFamily::Random { seed } => format!("random-{seed}"),
    }
}

pub const TORUS_HEADER: [&str; 6] = ["param", "H_max", "entropy_F", "eF_Lq", "ratio", "lemma_margin"];

/// `int H` of the `amplitude * shape` potential at two resolutions (n = 1).
pub fn torus_refinement(family: TorusFamily, resolutions: [usize; 2], amplitude: f64, params: &GradientParams) -> RunResult<[f64; 2]> {
    let mut out = [0.0; 2];
    for (slot, res) in out.iter_mut().zip(resolutions) {
        let g = TorusGrid::new(1, res)?;
        let psi = family.shape(&g);
        let threshold = positivity_threshold(&g, &psi);
        if amplitude.is_nan() || amplitude >= threshold {
            return Err(RunError::Config(format!(
                "refinement amplitude {amplitude} is not below the positivity threshold {threshold:.4} of {} at resolution {res}",
                family_name(&family)
            )));
        }
        let pair = make_pair(g, psi.iter().map(|v| amplitude * v).collect())?;
        *slot = gradient_report(&pair, &GradientParams { k_max: family.k_max(1), ..*params })?.h_l1;
    }
    Ok(out)
}

fn torus(s: &config::Torus, em: &mut Emitter) -> RunResult<()> {
    let mut sweeps = Vec::new();
    let (mut lemma, mut bounded, mut defect, mut budget) = (true, true, true, true);
    for &n in &s.dims {
        let res = if n == 1 { s.resolution_1 } else { s.resolution_2 };
        let grid = TorusGrid::new(n, res)?;
        let params = GradientParams { c2: s.c2, p: s.p.unwrap_or(n as f64 + 1.0), q: s.q, lambda: s.lambda, k_max: 1.0 };
        for fam in &s.families {
            let sw = sweep(*fam, grid, s.members, &params)?;
            let mut table = Table::new(&TORUS_HEADER);
            for m in &sw.members {
                let r = &m.report;
                table.push(vec![m.amplitude, r.h_max, r.entropy_f, r.ef_lq, r.ratio, r.lemma_margin]);
                defect &= r.ma_defect <= 1e-12;
                budget &= r.entropy_f <= s.budgets.entropy_f && r.ef_lq <= s.budgets.ef_lq;
            }
            lemma &= sw.lemma_holds();
            bounded &= sw.held_out_bounded();
            em.csv(&format!("torus_n{n}_{}.csv", family_name(fam)), &table)?;
            sweeps.push(sw);
        }
    }
    em.tolerance("ma_defect", 1e-12);
    em.tolerance("budget_entropy_F", s.budgets.entropy_f);
    em.tolerance("budget_eF_Lq", s.budgets.ef_lq);
    em.verdict("lemma", lemma);
    em.verdict("held_out_bounded", bounded);
    em.verdict("ma_defect", defect);
    em.verdict("budgets", budget);
    em.json("torus.json", &sweeps)?;
    if s.dims.contains(&1) {
        let params = GradientParams { c2: s.c2, p: s.p.unwrap_or(2.0), q: s.q, lambda: s.lambda, k_max: 1.0 };
        let mut rows = Vec::new();
        let mut ok = true;
        for fam in &s.families {
            let [a, b] = torus_refinement(*fam, s.refinement, s.refinement_amplitude, &params)?;
            ok &= (a - b).abs() <= s.refinement_tolerance * b.abs();
            rows.push((family_name(fam), a, b));
        }
        em.tolerance("refinement_relative", s.refinement_tolerance);
        em.verdict("refinement", ok);
        em.json("refinement.json", &rows)?;
    }
    Ok(())
}
