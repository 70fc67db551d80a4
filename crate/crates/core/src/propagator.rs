//! Time-ordered propagators for Hermitian generators.
//!
//! Each step is the exact exponential `exp(−i H(t_mid) Δt)` of the generator
//! sampled at the step midpoint, built from a Hermitian eigendecomposition.
//! Generators are angular frequencies (`H/ħ`), so no ħ appears here.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{lit, to_f64, tol, Real};

pub type CMatrix<T> = DMatrix<Complex<T>>;

/// One generator sample.
#[derive(Debug, Clone)]
pub enum Generator<T: Real> {
    Real(DMatrix<T>),
    Complex(CMatrix<T>),
}

impl<T: Real> Generator<T> {
    pub fn dim(&self) -> usize {
        match self {
            Generator::Real(m) => m.nrows(),
            Generator::Complex(m) => m.nrows(),
        }
    }
}

impl<T: Real> From<DMatrix<T>> for Generator<T> {
    fn from(m: DMatrix<T>) -> Self {
        Generator::Real(m)
    }
}

impl<T: Real> From<CMatrix<T>> for Generator<T> {
    fn from(m: CMatrix<T>) -> Self {
        Generator::Complex(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorConfig<T: Real = f64> {
    /// Largest step, in the generator's own time variable.
    pub max_step: T,
    /// Minimum number of steps between consecutive checkpoints.
    pub min_steps: usize,
    /// Allowed `‖U†U − I‖_F` at any checkpoint.
    pub unitarity_tol: T,
    /// Allowed `max|H − H†| / max(1, max|H|)` for a generator sample.
    pub hermiticity_tol: T,
}

impl<T: Real> PropagatorConfig<T> {
    pub fn with_max_step(max_step: T) -> Self {
        PropagatorConfig {
            max_step,
            min_steps: 1,
            unitarity_tol: tol(1e-9, 1e4),
            hermiticity_tol: tol(1e-10, 1e2),
        }
    }

    pub fn with_min_steps(mut self, min_steps: usize) -> Self {
        self.min_steps = min_steps.max(1);
        self
    }
}

/// Unitaries at checkpoints with their unitarity defects.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionResult<T: Real = f64> {
    pub times: Vec<T>,
    pub unitaries: Vec<CMatrix<T>>,
    pub defects: Vec<T>,
}

impl<T: Real> EvolutionResult<T> {
    pub fn last(&self) -> &CMatrix<T> {
        &self.unitaries[self.unitaries.len() - 1]
    }

    pub fn max_defect(&self) -> T {
        self.defects
            .iter()
            .copied()
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    /// Row-major interleaved `re, im` flattening of every checkpoint.
    pub fn to_file(&self) -> EvolutionFile {
        EvolutionFile {
            dim: self.unitaries.first().map_or(0, |u| u.nrows()),
            checkpoints: self
                .times
                .iter()
                .zip(&self.unitaries)
                .map(|(&t, u)| Checkpoint {
                    t: to_f64(t),
                    u: (0..u.nrows())
                        .flat_map(|i| (0..u.ncols()).map(move |j| (i, j)))
                        .flat_map(|(i, j)| [to_f64(u[(i, j)].re), to_f64(u[(i, j)].im)])
                        .collect(),
                })
                .collect(),
            defects: self.defects.iter().map(|&d| to_f64(d)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: f64,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionFile {
    pub dim: usize,
    pub checkpoints: Vec<Checkpoint>,
    pub defects: Vec<f64>,
}

pub fn identity<T: Real>(dim: usize) -> CMatrix<T> {
    CMatrix::identity(dim, dim)
}

/// `‖U†U − I‖_F`.
pub fn unitarity_defect<T: Real>(u: &CMatrix<T>) -> T {
    let d = u.nrows();
    (u.adjoint() * u - identity::<T>(d)).norm()
}

fn phase_column<T: Real>(vals: impl Iterator<Item = T>, dt: T) -> Vec<Complex<T>> {
    // exp(−i λ Δt)
    vals.map(|l| {
        let a = -l * dt;
        Complex::new(a.cos(), a.sin())
    })
    .collect()
}

/// `exp(−i H Δt)` for a real symmetric `H`.
pub fn step_real<T: Real>(h: &DMatrix<T>, dt: T) -> CMatrix<T> {
    let eig = h.clone().symmetric_eigen();
    let phases = phase_column(eig.eigenvalues.iter().copied(), dt);
    let v = &eig.eigenvectors;
    let n = h.nrows();
    CMatrix::from_fn(n, n, |i, j| {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (k, p) in phases.iter().enumerate() {
            acc += *p * (v[(i, k)] * v[(j, k)]);
        }
        acc
    })
}

/// `exp(−i H Δt)` for a complex Hermitian `H`.
pub fn step_complex<T: Real>(h: &CMatrix<T>, dt: T) -> CMatrix<T> {
    let eig = h.clone().symmetric_eigen();
    let phases = phase_column(eig.eigenvalues.iter().copied(), dt);
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (k, p) in phases.iter().enumerate() {
        for i in 0..scaled.nrows() {
            scaled[(i, k)] *= *p;
        }
    }
    scaled * v.adjoint()
}

fn hermiticity_deviation<T: Real>(g: &Generator<T>) -> T {
    match g {
        Generator::Real(m) => {
            let scale = m.amax().max(T::one());
            (m - m.transpose()).amax() / scale
        }
        Generator::Complex(m) => {
            let scale = m.iter().map(|c| c.norm_sqr().sqrt()).fold(T::one(), |a, b| a.max(b));
            let d = m - m.adjoint();
            d.iter().map(|c| c.norm_sqr().sqrt()).fold(T::zero(), |a, b| a.max(b)) / scale
        }
    }
}

/// Evolve from `checkpoints[0]` (where `U = I`) through every later
/// checkpoint. Steps never straddle a checkpoint; the interval between two
/// checkpoints is cut into the fewest equal steps no larger than
/// `config.max_step`, and never fewer than `config.min_steps`. A zero-length
/// interval contributes the identity.
pub fn evolve<T, F>(mut generator: F, checkpoints: &[T], config: &PropagatorConfig<T>) -> Result<EvolutionResult<T>>
where
    T: Real,
    F: FnMut(T) -> Result<Generator<T>>,
{
    if checkpoints.is_empty() {
        return Err(Error::Config("no checkpoints".into()));
    }
    if !(config.max_step > T::zero()) {
        return Err(Error::Config("max step must be positive".into()));
    }
    let probe = generator(checkpoints[0])?;
    let dim = probe.dim();
    let mut u = identity::<T>(dim);
    let mut out = EvolutionResult {
        times: vec![checkpoints[0]],
        unitaries: vec![u.clone()],
        defects: vec![T::zero()],
    };
    let half = lit::<T>(0.5);
    for w in checkpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        let span = b - a;
        if span < T::zero() {
            return Err(Error::Config(format!("checkpoints decrease at t = {:e}", to_f64(a))));
        }
        if span > T::zero() {
            let steps = (span / config.max_step).ceil().to_usize().unwrap_or(usize::MAX).max(config.min_steps).max(1);
            let dt = span / lit::<T>(steps as f64);
            if !(dt > T::zero()) || a + dt == a {
                return Err(Error::Config(format!("step underflow at t = {:e}", to_f64(a))));
            }
            for s in 0..steps {
                let mid = a + dt * (lit::<T>(s as f64) + half);
                let h = generator(mid)?;
                if h.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: h.dim(),
                    });
                }
                let dev = hermiticity_deviation(&h);
                if dev > config.hermiticity_tol {
                    return Err(Error::NonHermitian {
                        t: to_f64(mid),
                        deviation: to_f64(dev),
                    });
                }
                let step = match &h {
                    Generator::Real(m) => step_real(m, dt),
                    Generator::Complex(m) => step_complex(m, dt),
                };
                u = step * u;
            }
        }
        let defect = unitarity_defect(&u);
        if defect > config.unitarity_tol {
            return Err(Error::NonUnitary {
                defect: to_f64(defect),
            });
        }
        out.times.push(b);
        out.unitaries.push(u.clone());
        out.defects.push(defect);
    }
    Ok(out)
}

/// Exact and simulated evolutions at matched checkpoints.
#[derive(Debug, Clone)]
pub struct PairedEvolution<T: Real = f64> {
    pub exact: EvolutionResult<T>,
    pub simulated: EvolutionResult<T>,
}

/// Evolve the target over simulated time and the hardware generator over
/// `t_qc(t)`, with checkpoint `k` of one matching checkpoint `k` of the other.
pub fn evolve_pair<T, F, G>(
    target: F,
    hardware: G,
    times: &[T],
    t_qc: &[T],
    exact_config: &PropagatorConfig<T>,
    sim_config: &PropagatorConfig<T>,
) -> Result<PairedEvolution<T>>
where
    T: Real,
    F: FnMut(T) -> Result<Generator<T>>,
    G: FnMut(T) -> Result<Generator<T>>,
{
    if times.len() != t_qc.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: t_qc.len(),
        });
    }
    if let Some(k) = (1..t_qc.len()).find(|&k| !(t_qc[k] > t_qc[k - 1]) && times[k] != times[k - 1]) {
        return Err(Error::Domain(format!("t_qc map is not increasing at node {k}")));
    }
    Ok(PairedEvolution {
        exact: evolve(target, times, exact_config)?,
        simulated: evolve(hardware, t_qc, sim_config)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn cfg(step: f64) -> PropagatorConfig<f64> {
        PropagatorConfig::with_max_step(step)
    }

    #[test]
    fn null_generator_is_identity() {
        let ts: Vec<f64> = (0..5).map(|k| k as f64).collect();
        let r = evolve(|_| Ok(DMatrix::<f64>::zeros(3, 3).into()), &ts, &cfg(0.3)).unwrap();
        for u in &r.unitaries {
            assert!((u - identity::<f64>(3)).norm() < 1e-15);
        }
    }

    #[test]
    fn diagonal_generator_gives_phases() {
        let e = [0.3, -1.2, 2.5];
        let h = DMatrix::from_diagonal(&nalgebra::dvector![e[0], e[1], e[2]]);
        let ts = [0.0, 1.0, 7.5];
        let r = evolve(|_| Ok(h.clone().into()), &ts, &cfg(0.1)).unwrap();
        for (t, u) in ts.iter().zip(&r.unitaries) {
            for k in 0..3 {
                let expect = Complex::new((-e[k] * t).cos(), (-e[k] * t).sin());
                assert!((u[(k, k)] - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rabi_matches_closed_form() {
        let g = 1.3;
        let h = dmatrix![0.0, g; g, 0.0];
        let ts: Vec<f64> = (0..=200).map(|k| k as f64 * 0.05).collect();
        let r = evolve(|_| Ok(h.clone().into()), &ts, &cfg(0.01)).unwrap();
        for (t, u) in ts.iter().zip(&r.unitaries) {
            assert!((u[(1, 0)].norm_sqr() - (g * t).sin().powi(2)).abs() < 1e-8);
        }
    }

    #[test]
    fn complex_step_matches_real_step() {
        let h = dmatrix![0.4, -0.2, 0.1; -0.2, 1.0, 0.7; 0.1, 0.7, -0.3];
        let hc = h.map(|x| Complex::new(x, 0.0));
        assert!((step_real(&h, 0.37) - step_complex(&hc, 0.37)).norm() < 1e-13);
    }

    #[test]
    fn non_hermitian_generator_is_rejected() {
        let h = dmatrix![0.0, 1.0; 0.5, 0.0];
        assert!(matches!(
            evolve(|_| Ok(h.clone().into()), &[0.0, 1.0], &cfg(0.1)),
            Err(Error::NonHermitian { .. })
        ));
    }

    #[test]
    fn zero_duration_is_identity() {
        let h = dmatrix![0.0, 1.0; 1.0, 0.0];
        let r = evolve(|_| Ok(h.clone().into()), &[2.0, 2.0], &cfg(0.1)).unwrap();
        assert_eq!(r.last(), &identity::<f64>(2));
    }

    #[test]
    fn decreasing_checkpoints_are_rejected() {
        let h = dmatrix![0.0, 1.0; 1.0, 0.0];
        assert!(matches!(
            evolve(|_| Ok(h.clone().into()), &[1.0, 0.0], &cfg(0.1)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn composition() {
        let gen = |t: f64| -> Result<Generator<f64>> {
            Ok(dmatrix![t.sin(), 0.5 + 0.1 * t; 0.5 + 0.1 * t, -t.cos()].into())
        };
        let full = evolve(gen, &[0.0, 3.0], &cfg(0.01)).unwrap();
        let first = evolve(gen, &[0.0, 1.2], &cfg(0.01)).unwrap();
        let second = evolve(gen, &[1.2, 3.0], &cfg(0.01)).unwrap();
        let composed = second.last() * first.last();
        assert!((&composed - full.last()).norm() < 1e-4);
        let split = evolve(gen, &[0.0, 1.2, 3.0], &cfg(0.01)).unwrap();
        assert!((split.last() - composed).norm() < 1e-12);
    }

    #[test]
    fn json_layout() {
        let h = dmatrix![0.0, 1.0; 1.0, 0.0];
        let r = evolve(|_| Ok(h.clone().into()), &[0.0, 0.5], &cfg(0.1)).unwrap();
        let f = r.to_file();
        assert_eq!(f.dim, 2);
        assert_eq!(f.checkpoints[1].u.len(), 8);
        // U[0][1] = −i sin(0.5)
        assert!((f.checkpoints[1].u[3] + 0.5f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn pair_rejects_non_monotone_map() {
        let h = || Ok(Generator::Real(dmatrix![0.0, 1.0; 1.0, 0.0]));
        let c = cfg(0.1);
        assert!(matches!(
            evolve_pair(|_| h(), |_| h(), &[0.0, 1.0, 2.0], &[0.0, 2.0, 1.0], &c, &c),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn pure_time_dilation_matches_exactly() {
        let lambda = 4.0;
        let hs = dmatrix![0.2, 0.9; 0.9, -0.4];
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.25).collect();
        let tq: Vec<f64> = times.iter().map(|t| lambda * t).collect();
        let c = cfg(1e-2);
        let sim_c = cfg(4e-2);
        let p = evolve_pair(|_| Ok(hs.clone().into()), |_| Ok((&hs / lambda).into()), &times, &tq, &c, &sim_c).unwrap();
        for (a, b) in p.exact.unitaries.iter().zip(&p.simulated.unitaries) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_shift_is_a_global_phase() {
        let shift = 0.7;
        let hs = dmatrix![0.2, 0.9, 0.0; 0.9, -0.4, 0.3; 0.0, 0.3, 1.0];
        let hn = &hs + DMatrix::identity(3, 3) * shift;
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.4).collect();
        let c = cfg(0.05);
        let p = evolve_pair(|_| Ok(hs.clone().into()), |_| Ok(hn.clone().into()), &times, &times, &c, &c).unwrap();
        for (t, (a, b)) in times.iter().zip(p.exact.unitaries.iter().zip(&p.simulated.unitaries)) {
            let ov = (a.adjoint() * b).trace() / Complex::new(3.0, 0.0);
            assert!((ov.norm() - 1.0).abs() < 1e-8);
            // analytic phase e^{−i c t}
            assert!((ov - Complex::new((-shift * t).cos(), (-shift * t).sin())).norm() < 1e-8);
        }
    }
}
