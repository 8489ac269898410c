//! Seeded random generating functions that stay positive on `[0, 1]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expr::FuncExpr;
use crate::iterint::IntegrandSet;

/// One expression source, positive for all real `t` in the periodic shapes and
/// on `[0, 1]` for the polynomial and exponential ones.
pub fn random_phi_source(rng: &mut impl Rng) -> String {
    let a: f64 = rng.gen_range(0.8..1.6);
    let b: f64 = rng.gen_range(-0.4..0.4) * a;
    let c: f64 = rng.gen_range(0.5..3.0);
    let d: f64 = rng.gen_range(-1.0..1.0);
    match rng.gen_range(0..4) {
        0 => format!("{a:.4} + {b:.4}*sin({c:.4}*t + {d:.4})"),
        1 => format!("{a:.4} + {b:.4}*cos({c:.4}*t)"),
        2 => format!("{a:.4}*exp({:.4}*t)", 0.3 * d),
        _ => format!("{a:.4} + {:.4}*t + {:.4}*t^2", b.abs(), 0.5 * b.abs() * (d + 1.0)),
    }
}

/// `count` sources from a ChaCha8 stream seeded with `seed`.
pub fn random_phi_sources(count: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_phi_source(&mut rng)).collect()
}

pub fn random_integrands(count: usize, seed: u64, x_max: f64) -> IntegrandSet {
    let funcs = random_phi_sources(count, seed)
        .iter()
        .map(|s| s.parse::<FuncExpr>().expect("generated sources parse"))
        .collect();
    IntegrandSet::new(funcs, x_max)
}

/// `n` evenly spaced points on `[lo, hi]` (the midpoint when `n == 1`).
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_positive() {
        assert_eq!(random_phi_sources(5, 9), random_phi_sources(5, 9));
        assert_ne!(random_phi_sources(5, 9), random_phi_sources(5, 10));
        for seed in 0..50 {
            let set = random_integrands(4, seed, 1.0);
            for f in set.funcs() {
                for k in 0..=100 {
                    assert!(f.eval(k as f64 / 100.0).unwrap() > 0.0, "{f}");
                }
            }
        }
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(0.0, 1.0, 5), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(linspace(0.0, 1.0, 1), vec![0.5]);
        assert!(linspace(0.0, 1.0, 0).is_empty());
    }
}
