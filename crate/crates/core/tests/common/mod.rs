#![allow(dead_code, clippy::needless_range_loop)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sesim::units::mhz;
use sesim::{HardwareConstraints, TargetHamiltonian, UnitSystem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A smooth random target in laboratory units with its constraints. Slew
/// limits are finite for roughly half the draws.
pub fn random_problem(rng: &mut ChaCha8Rng) -> (TargetHamiltonian<f64>, HardwareConstraints<f64>) {
    let n = rng.random_range(2..=5);
    let duration: f64 = rng.random_range(50.0..400.0);
    let nodes = rng.random_range(12..60);
    let mut coeff = |lo: f64, hi: f64| -> (f64, f64, f64, f64) {
        (
            rng.random_range(lo..hi),
            rng.random_range(lo..hi),
            rng.random_range(0.2..3.0) * std::f64::consts::TAU / duration,
            rng.random_range(0.0..std::f64::consts::TAU),
        )
    };
    let mut terms = vec![vec![(0.0, 0.0, 0.0, 0.0); n]; n];
    for i in 0..n {
        for j in i..n {
            terms[i][j] = if i == j { coeff(-80.0, 80.0) } else { coeff(-15.0, 15.0) };
        }
    }
    let grid: Vec<f64> = (0..nodes).map(|k| duration * k as f64 / (nodes - 1) as f64).collect();
    let h = TargetHamiltonian::from_fn(UnitSystem::Laboratory, grid, |t| {
        DMatrix::from_fn(n, n, |i, j| {
            let (a, b, w, p) = terms[i.min(j)][i.max(j)];
            mhz::<f64>(a + b * (w * t + p).sin())
        })
    })
    .unwrap();
    let g_max = rng.random_range(0.5..5.0);
    let lo = rng.random_range(5000.0..6000.0);
    let width = rng.random_range(50.0..400.0);
    let (vg, ve) = if rng.random_bool(0.5) {
        (f64::INFINITY, f64::INFINITY)
    } else {
        // rad/ns per ns
        (rng.random_range(1e-4..1e-2), rng.random_range(1e-3..1e-1))
    };
    let c = HardwareConstraints::new(UnitSystem::Laboratory, mhz(g_max), mhz(lo), mhz(lo + width), vg, ve).unwrap();
    (h, c)
}
