//! De Giorgi iteration: the vanishing level implied by
//! `t phi(s + t) <= C0 phi(s)^{1 + delta}`, and the level-set curves it is applied to.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fields::{BallField, NodeClass};
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeGiorgiInput {
    pub c0: f64,
    pub delta: f64,
    pub s0: f64,
    pub phi_s0: f64,
}

/// `2 C0 phi(s0)^delta / (1 - 2^{-delta}) + s0`.
pub fn s_infinity(input: &DeGiorgiInput) -> Result<f64> {
    let DeGiorgiInput { c0, delta, s0, phi_s0 } = *input;
    if !(delta > 0.0) {
        return Err(invalid!("delta must be positive, got {delta}"));
    }
    if !(c0 > 0.0) || !(phi_s0 >= 0.0) || !s0.is_finite() || !phi_s0.is_finite() || !c0.is_finite() {
        return Err(invalid!("need C0 > 0, phi(s0) >= 0 and finite parameters"));
    }
    if phi_s0 == 0.0 {
        return Ok(s0);
    }
    Ok(2.0 * c0 * math::pow(phi_s0, delta) / (1.0 - math::pow(2.0, -delta)) + s0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub holds: bool,
    /// `min over pairs of C0 phi(s)^{1+delta} - t phi(s+t)`.
    pub worst_margin: f64,
    pub worst_s: f64,
    pub worst_t: f64,
}

fn check_samples(s: &[f64], phi: &[f64]) -> Result<()> {
    if s.len() != phi.len() || s.is_empty() {
        return Err(invalid!("s and phi must be nonempty and of equal length"));
    }
    if s.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid!("s grid must be strictly increasing"));
    }
    if phi.windows(2).any(|w| w[1] > w[0]) || phi.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(invalid!("phi must be finite, nonnegative and nonincreasing"));
    }
    Ok(())
}

/// Exhaustive check of the hypothesis over all sampled pairs `s_i < s_j`, `t = s_j - s_i`.
pub fn verify_hypothesis(s: &[f64], phi: &[f64], c0: f64, delta: f64) -> Result<HypothesisCheck> {
    check_samples(s, phi)?;
    let mut out = HypothesisCheck { holds: true, worst_margin: f64::INFINITY, worst_s: s[0], worst_t: 0.0 };
    for i in 0..s.len() {
        let cap = c0 * math::pow(phi[i], 1.0 + delta);
        for j in i + 1..s.len() {
            let t = s[j] - s[i];
            let margin = cap - t * phi[j];
            if margin < out.worst_margin {
                out.worst_margin = margin;
                out.worst_s = s[i];
                out.worst_t = t;
            }
        }
    }
    out.holds = out.worst_margin >= 0.0;
    Ok(out)
}

/// Smallest `C0` for which the sampled hypothesis holds.
pub fn minimal_c0(s: &[f64], phi: &[f64], delta: f64) -> Result<f64> {
    check_samples(s, phi)?;
    let mut c: f64 = 0.0;
    for i in 0..s.len() {
        if phi[i] == 0.0 {
            break;
        }
        let base = math::pow(phi[i], 1.0 + delta);
        for j in i + 1..s.len() {
            c = c.max((s[j] - s[i]) * phi[j] / base);
        }
    }
    Ok(c)
}

/// First sample where `phi` vanishes.
pub fn vanishing_point(s: &[f64], phi: &[f64]) -> Option<f64> {
    phi.iter().position(|&p| p == 0.0).map(|i| s[i])
}

/// `phi(s) = a max(0, 1 - s/S)^gamma` sampled at `count` points on `[0, 1.5 S]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerFamily {
    pub amplitude: f64,
    pub support: f64,
    pub gamma: f64,
}

impl PowerFamily {
    pub fn sample(&self, count: usize) -> (Vec<f64>, Vec<f64>) {
        let s: Vec<f64> = (0..count).map(|i| 1.5 * self.support * i as f64 / (count - 1) as f64).collect();
        let phi = s.iter().map(|&x| self.amplitude * math::pow((1.0 - x / self.support).max(0.0), self.gamma)).collect();
        (s, phi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoundnessRow {
    pub family: PowerFamily,
    pub delta: f64,
    pub c0: f64,
    pub s_infinity: f64,
    pub vanishing: f64,
    /// `s_infinity - vanishing`, pass iff `>= -ds` (one grid step).
    pub margin: f64,
    pub grid_step: f64,
}

impl SoundnessRow {
    pub fn passes(&self) -> bool {
        self.margin >= -self.grid_step
    }
}

/// Random power families with `gamma <= 1/delta` (the range where the
/// hypothesis holds with a finite constant), each checked against the lemma.
pub fn soundness_sweep(seed: u64, families: usize, count: usize) -> Result<Vec<SoundnessRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(families);
    for _ in 0..families {
        let delta = rng.random_range(0.1..2.0);
        let fam = PowerFamily {
            amplitude: rng.random_range(0.1..10.0),
            support: rng.random_range(0.2..5.0),
            gamma: rng.random_range(0.2..=1.0) / delta,
        };
        let (s, phi) = fam.sample(count);
        let c0 = minimal_c0(&s, &phi, delta)?;
        let check = verify_hypothesis(&s, &phi, c0 * (1.0 + 1e-12), delta)?;
        if !check.holds {
            return Err(crate::Error::Convergence { context: "minimal C0".into(), residual: check.worst_margin });
        }
        let s_inf = s_infinity(&DeGiorgiInput { c0, delta, s0: s[0], phi_s0: phi[0] })?;
        let vanishing = vanishing_point(&s, &phi).unwrap_or(f64::INFINITY);
        rows.push(SoundnessRow {
            family: fam,
            delta,
            c0,
            s_infinity: s_inf,
            vanishing,
            margin: s_inf - vanishing,
            grid_step: s[1] - s[0],
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelCurves {
    pub s: Vec<f64>,
    /// `int_{v > s} F`.
    pub phi: Vec<f64>,
    /// `int_{v > s} (v - s) F`.
    pub a: Vec<f64>,
}

pub const LEVEL_SAMPLES: usize = 256;

/// Level-set curves of `v` weighted by `F >= 0` on the given `s` grid.
pub fn level_machinery<V, G>(v: &V, f: G, s: &[f64]) -> Result<LevelCurves>
where
    V: BallField,
    G: Fn(usize) -> f64,
{
    if s.is_empty() || s.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid!("s grid must be nonempty and strictly increasing"));
    }
    let mut nodes = Vec::new();
    for k in 0..v.len() {
        if v.class(k) == NodeClass::Outside {
            continue;
        }
        let fk = f(k);
        if fk < 0.0 {
            return Err(invalid!("weight F is negative at node {k}"));
        }
        let w = v.weight(k) * fk;
        if w > 0.0 {
            nodes.push((v.value(k), w));
        }
    }
    let mut phi = Vec::with_capacity(s.len());
    let mut a = Vec::with_capacity(s.len());
    for &level in s {
        let (mut p, mut q) = (0.0, 0.0);
        for &(val, w) in &nodes {
            if val > level {
                p += w;
                q += (val - level) * w;
            }
        }
        phi.push(p);
        a.push(q);
    }
    Ok(LevelCurves { s: s.to_vec(), phi, a })
}

/// Uniform `LEVEL_SAMPLES` grid on `[s0, sup v]`.
pub fn default_levels<V: BallField>(v: &V, s0: f64) -> Result<Vec<f64>> {
    let top = v.sup_interior()?.max(v.sup_boundary()?);
    if !(top > s0) {
        return Err(invalid!("sup v = {top} must exceed s0 = {s0}"));
    }
    Ok((0..LEVEL_SAMPLES).map(|i| s0 + (top - s0) * i as f64 / (LEVEL_SAMPLES - 1) as f64).collect())
}

/// `min over i < j of A_{s_i} - (s_j - s_i) phi(s_j)`.
pub fn chain_margin(c: &LevelCurves) -> f64 {
    let mut worst = f64::INFINITY;
    for i in 0..c.s.len() {
        for j in i + 1..c.s.len() {
            worst = worst.min(c.a[i] - (c.s[j] - c.s[i]) * c.phi[j]);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{GridField, GridSpec, RadialField, RadialProfile};
    use crate::math::PI;

    #[test]
    fn s_infinity_examples() {
        let v = s_infinity(&DeGiorgiInput { c0: 1.0, delta: 1.0, s0: 0.0, phi_s0: 1.0 }).unwrap();
        assert_eq!(v, 4.0);
        let v = s_infinity(&DeGiorgiInput { c0: 1.0, delta: 1.0, s0: 3.0, phi_s0: 0.0 }).unwrap();
        assert_eq!(v, 3.0);
        let v = s_infinity(&DeGiorgiInput { c0: 2.0, delta: 0.5, s0: 1.0, phi_s0: 4.0 }).unwrap();
        assert_eq!(v, 8.0 / (1.0 - 1.0 / math::sqrt(2.0)) + 1.0);
        assert!(s_infinity(&DeGiorgiInput { c0: 1.0, delta: 0.0, s0: 0.0, phi_s0: 1.0 }).is_err());
        assert!(s_infinity(&DeGiorgiInput { c0: 1.0, delta: -1.0, s0: 0.0, phi_s0: 1.0 }).is_err());
    }

    #[test]
    fn hypothesis_trivial_cases() {
        let s: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let zero = alloc::vec![0.0; 100];
        assert!(verify_hypothesis(&s, &zero, 1e-9, 1.0).unwrap().holds);
        let one = alloc::vec![1.0; 100];
        let r = verify_hypothesis(&s, &one, 10.0, 1.0).unwrap();
        assert!(!r.holds && r.worst_margin < 0.0);
        assert_eq!(r.worst_t, 99.0);
        assert!(verify_hypothesis(&s, &[1.0, 2.0].repeat(50), 1.0, 1.0).is_err());
    }

    #[test]
    fn minimal_c0_is_tight() {
        let fam = PowerFamily { amplitude: 2.0, support: 1.0, gamma: 1.0 };
        let (s, phi) = fam.sample(256);
        let c = minimal_c0(&s, &phi, 1.0).unwrap();
        assert!(verify_hypothesis(&s, &phi, c * (1.0 + 1e-12), 1.0).unwrap().holds);
        assert!(!verify_hypothesis(&s, &phi, c * 0.999, 1.0).unwrap().holds);
    }

    #[test]
    fn over_steep_family_needs_unbounded_constant() {
        // gamma = 2/delta: the sampled minimal C0 grows with refinement.
        let fam = PowerFamily { amplitude: 1.0, support: 1.0, gamma: 2.0 };
        let c_coarse = minimal_c0(&fam.sample(64).0, &fam.sample(64).1, 1.0).unwrap();
        let c_fine = minimal_c0(&fam.sample(1024).0, &fam.sample(1024).1, 1.0).unwrap();
        assert!(c_fine > 4.0 * c_coarse);
        let fam = PowerFamily { gamma: 1.0, ..fam };
        let c_coarse = minimal_c0(&fam.sample(64).0, &fam.sample(64).1, 1.0).unwrap();
        let c_fine = minimal_c0(&fam.sample(1024).0, &fam.sample(1024).1, 1.0).unwrap();
        assert!(c_fine < 1.1 * c_coarse);
    }

    #[test]
    fn soundness_on_random_families() {
        let rows = soundness_sweep(7, 100, 256).unwrap();
        assert_eq!(rows.len(), 100);
        for r in &rows {
            assert!(r.passes(), "{r:?}");
        }
    }

    #[test]
    fn level_curves_closed_form_radial() {
        let v = RadialField::new(RadialProfile::from_fn(4097, |r| 1.0 - r * r).unwrap(), 1).unwrap();
        let s = default_levels(&v, 0.0).unwrap();
        let c = level_machinery(&v, |_| 1.0, &s).unwrap();
        for (i, &x) in c.s.iter().enumerate() {
            assert!((c.phi[i] - PI * (1.0 - x)).abs() < 2e-3, "{x} {}", c.phi[i]);
            assert!((c.a[i] - PI * (1.0 - x) * (1.0 - x) / 2.0).abs() < 2e-3);
        }
        assert!(chain_margin(&c) >= 0.0);
        let above = level_machinery(&v, |_| 1.0, &[1.5]).unwrap();
        assert_eq!((above.phi[0], above.a[0]), (0.0, 0.0));
        // t = 1/2 at s = 0: pi/4 <= pi/2.
        let half = level_machinery(&v, |_| 1.0, &[0.0, 0.5]).unwrap();
        assert!((half.phi[1] * 0.5 - PI / 4.0).abs() < 2e-3 && (half.a[0] - PI / 2.0).abs() < 2e-3);
    }

    #[test]
    fn level_curves_grid() {
        let spec = GridSpec::new(1, 128).unwrap();
        let v = GridField::from_fn(spec, |p| 1.0 - p[0] * p[0] - p[1] * p[1] + 0.3 * p[0]).unwrap();
        let f = GridField::from_fn(spec, |p| 1.0 + p[1] * p[1]).unwrap();
        let s = default_levels(&v, 0.0).unwrap();
        let c = level_machinery(&v, |k| f.values()[k], &s).unwrap();
        assert!(c.phi.windows(2).all(|w| w[1] <= w[0]));
        assert!(c.a.windows(2).all(|w| w[1] <= w[0]));
        assert!(chain_margin(&c) >= 0.0);
        let neg = level_machinery(&v, |_| -1.0, &s);
        assert!(neg.is_err());
    }

    proptest::proptest! {
        #[test]
        fn chain_holds_for_random_radial(c1 in -1.0f64..1.0, c2 in -1.0f64..1.0, w in 0.0f64..3.0) {
            let v = RadialField::new(RadialProfile::from_fn(257, |r| 1.0 + c1 * r * r + c2 * r * r * r * r).unwrap(), 2).unwrap();
            let s = match default_levels(&v, 0.0) { Ok(s) => s, Err(_) => return Ok(()) };
            let c = level_machinery(&v, |k| 1.0 + w * v.radius_of(k), &s).unwrap();
            proptest::prop_assert!(chain_margin(&c) >= 0.0);
        }

        #[test]
        fn s_infinity_monotone(c0 in 0.1f64..10.0, d in 0.1f64..3.0, p in 0.0f64..10.0, dc in 0.0f64..1.0) {
            let a = s_infinity(&DeGiorgiInput { c0, delta: d, s0: 0.0, phi_s0: p }).unwrap();
            let b = s_infinity(&DeGiorgiInput { c0: c0 + dc, delta: d, s0: 0.0, phi_s0: p }).unwrap();
            proptest::prop_assert!(b >= a);
        }
    }
}
