//! TOML experiment configuration. Every table rejects unknown keys, and
//! every section has defaults, so an empty file is a valid configuration.

use std::path::{Path, PathBuf};

use abplab_core::flow::{Boundary, FlowConfig, Source};
use abplab_core::math;
use abplab_core::torus::TorusFamily;
use abplab_core::weight::Weight;
use serde::{Deserialize, Serialize};

use crate::error::{RunError, RunResult};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    /// When set, must name the subcommand the file is run with.
    pub subcommand: Option<String>,
    pub id: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub abp_verify: AbpVerify,
    pub drift_verify: DriftVerify,
    pub trudinger: Trudinger,
    pub dirichlet_linf: DirichletLinf,
    pub ma_solve: MaSolve,
    pub kolodziej_probe: KolodziejProbe,
    pub degiorgi: DeGiorgi,
    pub flow: Flow,
    pub parabolic_abp: ParabolicAbp,
    pub torus: Torus,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> RunResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> RunResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            RunError::Config(msg) => RunError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Checks that do not need any computation.
    pub fn validate(&self) -> RunResult<()> {
        let bad = |msg: String| Err(RunError::Config(msg));
        let dims_ok = |dims: &[usize]| !dims.is_empty() && dims.iter().all(|&n| n == 1 || n == 2);
        if !dims_ok(&self.abp_verify.dims) || !dims_ok(&self.parabolic_abp.dims) || !dims_ok(&self.torus.dims) {
            return bad("dims must be a nonempty list drawn from {1, 2}".into());
        }
        for n in [self.drift_verify.n, self.trudinger.n, self.dirichlet_linf.n, self.ma_solve.n, self.kolodziej_probe.n] {
            if n != 1 && n != 2 {
                return bad(format!("complex dimension must be 1 or 2, got {n}"));
            }
        }
        if self.drift_verify.a_diag.len() != self.drift_verify.n {
            return bad(format!("drift-verify.a-diag needs {} entries", self.drift_verify.n));
        }
        if self.abp_verify.amplitudes.len() < 2 || self.trudinger.amplitudes.len() < 2 || self.parabolic_abp.amplitudes.len() < 2 {
            return bad("calibrated families need at least two amplitudes".into());
        }
        if self.degiorgi.samples < 2 || self.torus.members < 2 {
            return bad("degiorgi.samples and torus.members must be at least 2".into());
        }
        if let Some(0) = self.jobs {
            return bad("jobs must be positive".into());
        }
        let weights = [
            self.abp_verify.weight,
            self.drift_verify.weight,
            self.dirichlet_linf.weight,
            self.parabolic_abp.weight,
            self.ma_solve.comparison.as_ref().and_then(|c| c.weight),
        ];
        for w in weights.into_iter().flatten() {
            w.validate().map_err(RunError::from)?;
        }
        Ok(())
    }
}

/// `constants = "calibrate"` or an explicit table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Constants<T> {
    Named(Calibrate),
    Fixed(T),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Calibrate {
    Calibrate,
}

impl<T> Default for Constants<T> {
    fn default() -> Self {
        Constants::Named(Calibrate::Calibrate)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbpFixed {
    pub c_n: f64,
    /// Defaults to `1/(2n)`.
    pub delta: Option<f64>,
    pub c2: f64,
}

impl Default for AbpFixed {
    fn default() -> Self {
        AbpFixed { c_n: 1.0, delta: None, c2: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParabolicFixed {
    pub c1: f64,
    pub c2: f64,
}

impl Default for ParabolicFixed {
    fn default() -> Self {
        ParabolicFixed { c1: 1.0, c2: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    /// Grid for `n = 1`, radial profile for `n = 2`.
    #[default]
    Auto,
    Grid,
    Radial,
}

fn powers_of_two(count: u32) -> Vec<f64> {
    (0..count).map(|k| (1u64 << k) as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct AbpVerify {
    pub dims: Vec<usize>,
    pub representation: Representation,
    /// Grid points per axis (grid) or profile nodes (radial).
    pub grid_resolution: usize,
    pub radial_nodes: usize,
    /// Paraboloid amplitudes `A` in `u = A (1 - |z|^2)`.
    pub amplitudes: Vec<f64>,
    pub weight: Option<Weight>,
    pub constants: Constants<AbpFixed>,
    /// Relative tolerance of measured sup, mass and entropy against their closed forms.
    pub closed_form_tolerance: f64,
}

impl Default for AbpVerify {
    fn default() -> Self {
        AbpVerify {
            dims: vec![1, 2],
            representation: Representation::Auto,
            grid_resolution: 256,
            radial_nodes: 2049,
            amplitudes: (1..=1024).map(f64::from).collect(),
            weight: None,
            constants: Constants::default(),
            closed_form_tolerance: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct DriftVerify {
    pub n: usize,
    pub radial_nodes: usize,
    pub amplitude: f64,
    /// Diagonal of the constant coefficient matrix `a`.
    pub a_diag: Vec<f64>,
    pub weight: Option<Weight>,
    pub constants: AbpFixed,
}

impl Default for DriftVerify {
    fn default() -> Self {
        DriftVerify { n: 2, radial_nodes: 1025, amplitude: 1.0, a_diag: vec![1.0, 4.0], weight: None, constants: AbpFixed::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Trudinger {
    pub n: usize,
    pub radial_nodes: usize,
    pub amplitudes: Vec<f64>,
    pub p: f64,
    pub c1: f64,
    pub c2: f64,
    /// Bound on the exponential integral; omitted means calibrate it.
    pub c3: Option<f64>,
}

impl Default for Trudinger {
    fn default() -> Self {
        Trudinger { n: 2, radial_nodes: 2049, amplitudes: powers_of_two(11), p: 1.0, c1: 1.0, c2: 0.0, c3: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct DirichletLinf {
    pub n: usize,
    pub radial_nodes: usize,
    /// Common entropy of the family; defaults to twice the ball volume.
    pub target: Option<f64>,
    /// Radii of the balls the log-density concentrates on.
    pub radii: Vec<f64>,
    pub weight: Option<Weight>,
}

impl Default for DirichletLinf {
    fn default() -> Self {
        DirichletLinf {
            n: 1,
            radial_nodes: 8193,
            target: None,
            radii: (1..=11).map(|k| math::powi(0.75, k)).collect(),
            weight: None,
        }
    }
}

/// Radial expressions in `r = |z|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RadialExpr {
    Constant { value: f64 },
    /// `sum c_k r^{2k}`.
    Polynomial { coefficients: Vec<f64> },
    /// `offset + amplitude cos(frequency r)`.
    Cosine { offset: f64, amplitude: f64, frequency: f64 },
    /// `amplitude exp(rate r^2)`.
    Exp { amplitude: f64, rate: f64 },
    /// `amplitude ln(1 + scale (1 - r^2))`.
    Log { amplitude: f64, scale: f64 },
    Sum { terms: Vec<RadialExpr> },
}

impl RadialExpr {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            RadialExpr::Constant { value } => *value,
            RadialExpr::Polynomial { coefficients } => coefficients.iter().rev().fold(0.0, |acc, c| acc * r * r + c),
            RadialExpr::Cosine { offset, amplitude, frequency } => offset + amplitude * math::cos(frequency * r),
            RadialExpr::Exp { amplitude, rate } => amplitude * math::exp(rate * r * r),
            RadialExpr::Log { amplitude, scale } => amplitude * math::log(1.0 + scale * (1.0 - r * r)),
            RadialExpr::Sum { terms } => terms.iter().map(|t| t.eval(r)).sum(),
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            RadialExpr::Constant { value } => Some(*value),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct MaSolve {
    pub n: usize,
    pub radial_nodes: usize,
    pub density: RadialExpr,
    /// Bound on the relative Monge-Ampere residual.
    pub residual_tolerance: f64,
    /// Error bound against `c^{1/n} (|z|^2 - 1)` for constant densities.
    pub exact_tolerance: f64,
    pub comparison: Option<Comparison>,
}

impl Default for MaSolve {
    fn default() -> Self {
        MaSolve {
            n: 2,
            radial_nodes: 1025,
            density: RadialExpr::Constant { value: 1.0 },
            residual_tolerance: 5e-3,
            exact_tolerance: 1e-6,
            comparison: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Comparison {
    pub q: f64,
    pub alpha: f64,
    pub weight: Option<Weight>,
    pub profiles: Vec<RadialExpr>,
}

impl Default for Comparison {
    fn default() -> Self {
        Comparison { q: 2.0, alpha: 1.0, weight: None, profiles: default_comparison_profiles() }
    }
}

pub fn default_comparison_profiles() -> Vec<RadialExpr> {
    vec![
        RadialExpr::Polynomial { coefficients: vec![2.0, -2.0] },
        RadialExpr::Cosine { offset: 0.0, amplitude: 4.0, frequency: 1.5 },
        RadialExpr::Polynomial { coefficients: vec![-1.0, 3.0] },
        RadialExpr::Log { amplitude: 1.0, scale: 20.0 },
        RadialExpr::Exp { amplitude: 1.5, rate: -1.0 },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct KolodziejProbe {
    pub n: usize,
    /// Core radii of the regularized log family.
    pub epsilons: Vec<f64>,
    /// Probe exponents as multiples of the closed-form threshold.
    pub alpha_fractions: Vec<f64>,
    pub mass_cap: f64,
    pub threshold_tolerance: f64,
}

impl Default for KolodziejProbe {
    fn default() -> Self {
        KolodziejProbe {
            n: 1,
            epsilons: (1..=6).map(|k| math::powi(10.0, -2 * k)).collect(),
            alpha_fractions: (1..=80).map(|k| 0.025 * k as f64).collect(),
            mass_cap: 1e3,
            threshold_tolerance: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct DeGiorgi {
    pub families: usize,
    pub samples: usize,
    /// Profile nodes for the level curves of `1 - |z|^2` on the disc.
    pub level_nodes: usize,
    pub chain_tolerance: f64,
}

impl Default for DeGiorgi {
    fn default() -> Self {
        DeGiorgi { families: 100, samples: 256, level_nodes: 16385, chain_tolerance: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Flow {
    pub run: FlowConfig,
    /// Exponent of the exponential-integrability ratio along the run.
    pub alpha: f64,
    pub alpha_spread: f64,
    pub oracle_tolerance: f64,
    /// Evaluate the frozen-shape control instead of solving.
    pub frozen: bool,
}

impl Default for Flow {
    fn default() -> Self {
        Flow {
            run: FlowConfig { dt: 1e-3, record_every: 100, ..FlowConfig::radial(1, 1.0, 512, Source::Constant { value: 1.0 }) },
            alpha: 1.0,
            alpha_spread: 3.0,
            oracle_tolerance: 1e-4,
            frozen: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ParabolicAbp {
    pub dims: Vec<usize>,
    /// `mu(t) = A (1 + rate t)` for each amplitude `A`.
    pub amplitudes: Vec<f64>,
    pub rate: f64,
    pub t_final: f64,
    pub steps: usize,
    pub radial_nodes: usize,
    /// Defaults to `(1 + t+)^{n+2}`.
    pub weight: Option<Weight>,
    pub constants: Constants<ParabolicFixed>,
}

impl Default for ParabolicAbp {
    fn default() -> Self {
        ParabolicAbp {
            dims: vec![1, 2],
            amplitudes: powers_of_two(11),
            rate: 1.0,
            t_final: 1.0,
            steps: 32,
            radial_nodes: 257,
            weight: None,
            constants: Constants::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    pub entropy_f: f64,
    #[serde(rename = "eF_Lq")]
    pub ef_lq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Torus {
    pub dims: Vec<usize>,
    pub resolution_1: usize,
    pub resolution_2: usize,
    pub families: Vec<TorusFamily>,
    pub members: usize,
    pub c2: f64,
    /// Defaults to `n + 1`.
    pub p: Option<f64>,
    pub q: f64,
    pub lambda: f64,
    pub budgets: Budgets,
    /// Resolutions for the refinement check of `int H` (n = 1).
    pub refinement: [usize; 2],
    pub refinement_amplitude: f64,
    pub refinement_tolerance: f64,
}

impl Default for Torus {
    fn default() -> Self {
        Torus {
            dims: vec![1, 2],
            resolution_1: 64,
            resolution_2: 12,
            families: vec![TorusFamily::SingleMode, TorusFamily::TwoMode, TorusFamily::Random { seed: 3 }],
            members: 11,
            c2: 1.0,
            p: None,
            q: 2.0,
            lambda: 1.0,
            budgets: Budgets { entropy_f: 50.0, ef_lq: 2.0 },
            refinement: [64, 128],
            refinement_amplitude: 0.02,
            refinement_tolerance: 0.02,
        }
    }
}

/// Flow runs used by the controls and the acceptance suite.
pub fn stalled_control() -> FlowConfig {
    FlowConfig {
        boundary: Boundary::Stalled { rate: 1.0, stop: 0.1 },
        control: true,
        dt: 0.005,
        ..FlowConfig::radial(1, 0.3, 129, Source::Constant { value: 1.0 })
    }
}

pub fn frozen_control() -> FlowConfig {
    FlowConfig { boundary: Boundary::Linear { rate: 1.0 }, ..FlowConfig::radial(1, 0.2, 129, Source::Constant { value: 2.0 }) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(ExperimentConfig::parse("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::parse("sed = 3").is_err());
        assert!(ExperimentConfig::parse("[abp-verify]\ndimz = [1]").is_err());
        assert!(ExperimentConfig::parse("[flow.run]\nn = 1\nt_final = 1.0\ndt = 0.1\nresolution = 65\nextra = 1\n[flow.run.source]\nkind = \"constant\"\nvalue = 1.0\n[flow.run.boundary]\nkind = \"linear\"\nrate = 1.0").is_err());
    }

    #[test]
    fn constants_forms() {
        let c = ExperimentConfig::parse("[abp-verify]\nconstants = \"calibrate\"").unwrap();
        assert_eq!(c.abp_verify.constants, Constants::Named(Calibrate::Calibrate));
        let c = ExperimentConfig::parse("[abp-verify]\nconstants = { c_n = 2.0, c2 = 0.5 }").unwrap();
        assert_eq!(c.abp_verify.constants, Constants::Fixed(AbpFixed { c_n: 2.0, delta: None, c2: 0.5 }));
        assert!(ExperimentConfig::parse("[abp-verify]\nconstants = \"guess\"").is_err());
    }

    #[test]
    fn weight_presets_and_validation() {
        let c = ExperimentConfig::parse("[abp-verify]\nweight = { kind = \"log-power\", exponent = 3.0, log_exponent = 1.0 }").unwrap();
        assert!(matches!(c.abp_verify.weight, Some(Weight::LogPower { .. })));
        assert!(ExperimentConfig::parse("[abp-verify]\nweight = { kind = \"exp\", rate = -1.0 }").is_err());
        assert!(ExperimentConfig::parse("[abp-verify]\ndims = [3]").is_err());
    }

    #[test]
    fn radial_expressions() {
        let p = RadialExpr::Polynomial { coefficients: vec![-1.0, 3.0] };
        assert_eq!(p.eval(0.5), -1.0 + 0.75);
        let s = RadialExpr::Sum { terms: vec![p, RadialExpr::Constant { value: 1.0 }] };
        assert_eq!(s.eval(0.5), 0.75);
        assert_eq!(RadialExpr::Log { amplitude: 2.0, scale: 5.0 }.eval(1.0), 0.0);
    }
}
