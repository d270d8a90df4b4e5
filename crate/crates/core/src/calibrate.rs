//! Fit/held-out splits and the constant-fitting rules shared by the checkers.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// Member indices of a 70/30 split. Held-out members are spread evenly
/// through the family so they cover its whole range.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub fit: Vec<usize>,
    pub held_out: Vec<usize>,
}

pub fn split_70_30(len: usize) -> Split {
    let m = if len < 2 { 0 } else { ((0.3 * len as f64).round() as usize).clamp(1, len - 1) };
    let mut held_out: Vec<usize> = (0..m).map(|k| ((k as f64 + 0.5) * len as f64 / m as f64) as usize).collect();
    held_out.dedup();
    let fit = (0..len).filter(|i| !held_out.contains(i)).collect();
    Split { fit, held_out }
}

/// Smallest `(c_n, c2)`, in that priority order reversed: `c2` is fixed first
/// as the least value for which `mass_term + c2 * entropy_term >= excess` on
/// every member, then `c_n` as the least value with
/// `c_n + c2 * entropy_term >= excess`.
pub fn lexicographic_fit(excess: &[f64], mass_term: &[f64], entropy_term: &[f64]) -> (f64, f64) {
    let mut c2: f64 = 0.0;
    for i in 0..excess.len() {
        let need = excess[i] - mass_term[i];
        if need > 0.0 && entropy_term[i] > 0.0 {
            c2 = c2.max(need / entropy_term[i]);
        }
    }
    let mut cn: f64 = 0.0;
    for i in 0..excess.len() {
        cn = cn.max(excess[i] - c2 * entropy_term[i]);
    }
    (cn, c2)
}

/// Minimizes `c1 + c2 * pivot` over `c1, c2 >= 0` subject to
/// `c1 + c2 * x_i >= e_i`, by enumerating the vertices of the feasible set.
/// Ties go to the smaller `c2`.
pub fn linear_fit(excess: &[f64], x: &[f64], pivot: f64) -> (f64, f64) {
    let c1_for = |c2: f64| excess.iter().zip(x).map(|(e, xi)| e - c2 * xi).fold(0.0, f64::max);
    let mut candidates = Vec::with_capacity(excess.len() * excess.len() + excess.len() + 1);
    candidates.push(0.0);
    for i in 0..excess.len() {
        if x[i] > 0.0 && excess[i] > 0.0 {
            candidates.push(excess[i] / x[i]);
        }
        for j in i + 1..excess.len() {
            let dx = x[i] - x[j];
            if dx != 0.0 {
                let c2 = (excess[i] - excess[j]) / dx;
                if c2 > 0.0 && c2.is_finite() {
                    candidates.push(c2);
                }
            }
        }
    }
    candidates.sort_by(|a, b| a.total_cmp(b));
    let mut best = (c1_for(0.0), 0.0);
    let mut best_obj = best.0;
    for c2 in candidates {
        let c1 = c1_for(c2);
        let obj = c1 + c2 * pivot;
        if obj < best_obj - 1e-15 * best_obj.abs() {
            best = (c1, c2);
            best_obj = obj;
        }
    }
    best
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eleven_member_split() {
        let s = split_70_30(11);
        assert_eq!(s.held_out, alloc::vec![1, 5, 9]);
        assert_eq!(s.fit.len(), 8);
    }

    #[test]
    fn lexicographic_fit_is_tight() {
        let excess = [1.0, 2.0, 3.0];
        let mass = [0.5, 0.5, 0.5];
        let ent = [1.0, 2.0, 5.0];
        let (cn, c2) = lexicographic_fit(&excess, &mass, &ent);
        assert!((c2 - 0.75).abs() < 1e-15);
        assert!((cn - 0.5).abs() < 1e-15);
    }

    #[test]
    fn linear_fit_simple() {
        let (c1, c2) = linear_fit(&[1.0, 2.0], &[0.0, 1.0], 1.0);
        assert!((c1 + c2 - 2.0).abs() < 1e-12 && c1 >= 1.0 - 1e-12);
    }

    proptest! {
        #[test]
        fn fits_are_feasible(e in proptest::collection::vec(-1.0f64..5.0, 1..12), x in proptest::collection::vec(0.0f64..5.0, 12), m in proptest::collection::vec(0.0f64..2.0, 12)) {
            let k = e.len();
            let (c1, c2) = linear_fit(&e, &x[..k], median(&x[..k]));
            prop_assert!(c1 >= 0.0 && c2 >= 0.0);
            for i in 0..k {
                prop_assert!(c1 + c2 * x[i] >= e[i] - 1e-9);
            }
            let (cn, d2) = lexicographic_fit(&e, &m[..k], &x[..k]);
            for i in 0..k {
                prop_assert!(cn.min(m[i]) + d2 * x[i] >= e[i] - 1e-9 || x[i] == 0.0);
            }
        }

        #[test]
        fn split_partitions(len in 2usize..200) {
            let s = split_70_30(len);
            let mut all: Vec<usize> = s.fit.iter().chain(&s.held_out).copied().collect();
            all.sort();
            prop_assert_eq!(all, (0..len).collect::<Vec<_>>());
            prop_assert!(!s.fit.is_empty() && !s.held_out.is_empty());
        }
    }
}
