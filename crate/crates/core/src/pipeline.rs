//! End-to-end runs: compile, evolve target, ideal subspace and full circuit,
//! then score. Sweeps over `g_max` and impact parameter run on a rayon pool.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{build_hn, build_hqc, project, CouplingTensor, HardwareConstraints, DEFAULT_MAX_QUBITS};
use crate::collision::{build_collision_hamiltonian, cross_section_partial, Beyond, ChannelData, Trajectory};
use crate::error::{Error, Result};
use crate::hamiltonian::TargetHamiltonian;
use crate::metrics::{column_probabilities, fidelity, leakage, transition_probabilities, ReportSummary, SimulationReport};
use crate::num::{lit, to_f64, tol, Real};
use crate::propagator::{evolve, EvolutionResult, Generator, PropagatorConfig};
use crate::schedule::{compile_controls, CompileOptions, ControlSchedule};
use crate::units::{mhz, to_mhz};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulateOptions<T: Real = f64> {
    pub compile: CompileOptions<T>,
    /// Source channel (0-based).
    pub source: usize,
    /// Propagator steps per compiled segment, on every side.
    pub substeps: usize,
    pub max_qubits: usize,
    pub unitarity_tol: T,
}

impl<T: Real> Default for SimulateOptions<T> {
    fn default() -> Self {
        SimulateOptions {
            compile: CompileOptions::default(),
            source: 0,
            substeps: 2,
            max_qubits: DEFAULT_MAX_QUBITS,
            unitarity_tol: tol(1e-9, 1e4),
        }
    }
}

impl<T: Real> SimulateOptions<T> {
    fn propagator(&self) -> PropagatorConfig<T> {
        PropagatorConfig {
            unitarity_tol: self.unitarity_tol,
            ..PropagatorConfig::with_max_step(T::infinity()).with_min_steps(self.substeps)
        }
    }
}

/// Compiled schedule with its scored evolution.
#[derive(Debug, Clone)]
pub struct Simulation<T: Real = f64> {
    pub schedule: ControlSchedule<T>,
    pub report: SimulationReport<T>,
}

/// Evolve the target (canonical units) over `times`, one column of unitaries
/// per checkpoint.
pub fn evolve_target<T: Real>(
    h: &TargetHamiltonian<T>,
    times: &[T],
    cfg: &PropagatorConfig<T>,
) -> Result<EvolutionResult<T>> {
    let target = h.to_canonical();
    evolve(|t| target.sample(t).map(Generator::from), times, cfg)
}

fn evolve_ideal<T: Real>(s: &ControlSchedule<T>, cfg: &PropagatorConfig<T>) -> Result<EvolutionResult<T>> {
    let alpha = s.meta.alpha;
    evolve(
        |tq| {
            let (eps, g) = s.controls_at(tq)?;
            Ok(build_hn(&eps, &g, alpha).into())
        },
        &s.t_qc,
        cfg,
    )
}

fn evolve_circuit<T: Real>(
    s: &ControlSchedule<T>,
    tensor: &CouplingTensor<T>,
    max_qubits: usize,
    cfg: &PropagatorConfig<T>,
) -> Result<EvolutionResult<T>> {
    let real = tensor.entries().iter().enumerate().all(|(mu, row)| {
        row.iter().enumerate().all(|(nu, &v)| v == T::zero() || (mu == 2) == (nu == 2))
    });
    evolve(
        |tq| {
            let (eps, g) = s.controls_at(tq)?;
            let h = build_hqc(&eps, &g, tensor, max_qubits)?;
            // σ^y appears only in pairs here, so H_qc is real
            Ok(if real { h.map(|c| c.re).into() } else { h.into() })
        },
        &s.t_qc,
        cfg,
    )
}

/// Score a compiled schedule against the target it came from.
pub fn simulate_schedule<T: Real>(
    h: &TargetHamiltonian<T>,
    schedule: &ControlSchedule<T>,
    opts: &SimulateOptions<T>,
) -> Result<SimulationReport<T>> {
    let n = schedule.dim();
    if h.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: h.dim() });
    }
    if opts.source >= n {
        return Err(Error::InvalidInput(format!("source channel {} out of range for n = {n}", opts.source + 1)));
    }
    let tensor = schedule.tensor()?;
    let cfg = opts.propagator();
    let (exact, (ideal, circuit)) = rayon::join(
        || evolve_target(h, &schedule.times, &cfg),
        || {
            rayon::join(
                || evolve_ideal(schedule, &cfg),
                || evolve_circuit(schedule, &tensor, opts.max_qubits, &cfg),
            )
        },
    );
    let (exact, ideal, circuit) = (exact?, ideal?, circuit?);
    score(schedule, &exact, &ideal, &circuit, opts)
}

fn score<T: Real>(
    schedule: &ControlSchedule<T>,
    exact: &EvolutionResult<T>,
    ideal: &EvolutionResult<T>,
    circuit: &EvolutionResult<T>,
    opts: &SimulateOptions<T>,
) -> Result<SimulationReport<T>> {
    let n = schedule.dim();
    let s = opts.source;
    let len = schedule.len();
    let mut report = SimulationReport {
        source: s,
        times: schedule.times.clone(),
        t_qc: schedule.t_qc.clone(),
        exact: Vec::with_capacity(len),
        simulated: Vec::with_capacity(len),
        fidelity: Vec::with_capacity(len),
        ideal_fidelity: Vec::with_capacity(len),
        leakage: Vec::with_capacity(len),
        exact_defect: exact.defects.clone(),
        circuit_defect: circuit.defects.clone(),
        hardware_time: schedule.total_hardware_time(),
    };
    for k in 0..len {
        let u = &exact.unitaries[k];
        let full = &circuit.unitaries[k];
        let sub = project(full, n);
        report.exact.push(transition_probabilities(u, s, opts.unitarity_tol)?);
        report.simulated.push(column_probabilities(&sub, s));
        report.fidelity.push(fidelity(u, &sub, s)?);
        report.ideal_fidelity.push(fidelity(u, &ideal.unitaries[k], s)?);
        report.leakage.push(leakage(full, n, s));
    }
    Ok(report)
}

/// Compile and score.
pub fn simulate<T: Real>(
    h: &TargetHamiltonian<T>,
    tensor: &CouplingTensor<T>,
    constraints: &HardwareConstraints<T>,
    opts: &SimulateOptions<T>,
) -> Result<Simulation<T>> {
    let schedule = compile_controls(h, tensor, constraints, &opts.compile)?;
    let report = simulate_schedule(h, &schedule, opts)?;
    Ok(Simulation { schedule, report })
}

/// A rayon pool of `workers` threads; 0 means one per logical core.
pub fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// One `g_max` point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmaxPoint {
    pub g_max_mhz: f64,
    pub outcome: std::result::Result<ReportSummary, String>,
}

/// Run the full pipeline once per `g_max` (MHz, converted with the
/// constraints' units), in input order.
pub fn run_gmax<T: Real>(
    h: &TargetHamiltonian<T>,
    tensor: &CouplingTensor<T>,
    constraints: &HardwareConstraints<T>,
    g_max_mhz: &[f64],
    opts: &SimulateOptions<T>,
    workers: usize,
) -> Result<Vec<(f64, Result<Simulation<T>>)>> {
    if g_max_mhz.is_empty() {
        return Err(Error::Config("empty g_max list".into()));
    }
    let c = constraints.to_canonical();
    let pool = worker_pool(workers)?;
    Ok(pool.install(|| {
        g_max_mhz
            .par_iter()
            .map(|&g| (g, simulate(h, tensor, &c.with_g_max(mhz::<T>(g)), opts)))
            .collect()
    }))
}

/// [`run_gmax`] reduced to summaries; failures are kept per point.
pub fn sweep_gmax<T: Real>(
    h: &TargetHamiltonian<T>,
    tensor: &CouplingTensor<T>,
    constraints: &HardwareConstraints<T>,
    g_max_mhz: &[f64],
    opts: &SimulateOptions<T>,
    workers: usize,
) -> Result<Vec<GmaxPoint>> {
    Ok(run_gmax(h, tensor, constraints, g_max_mhz, opts, workers)?
        .into_iter()
        .map(|(g, r)| GmaxPoint {
            g_max_mhz: g,
            outcome: r.map(|sim| sim.report.summary()).map_err(|e| e.to_string()),
        })
        .collect())
}

/// Hardware time needed to move between two fidelity levels, from a power
/// law `1 − F ∝ T^p` fitted to sweep points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeFidelityTradeoff {
    pub exponent: f64,
    /// `T(f_hi) / T(f_lo)` from the fit.
    pub fitted_ratio: f64,
    /// The same ratio by log-log interpolation, when the sweep brackets both
    /// levels.
    pub interpolated_ratio: Option<f64>,
}

/// `points` are `(hardware time, final fidelity)`.
pub fn time_fidelity_tradeoff(points: &[(f64, f64)], f_lo: f64, f_hi: f64) -> Option<TimeFidelityTradeoff> {
    let mut xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, f)| *t > 0.0 && *f < 1.0)
        .map(|&(t, f)| (t.ln(), (1.0 - f).ln()))
        .collect();
    if xy.len() < 2 {
        return None;
    }
    xy.sort_by(|a, b| a.0.total_cmp(&b.0));
    let m = xy.len() as f64;
    let (sx, sy) = xy.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (sxy, sxx) = xy
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    if sxx == 0.0 {
        return None;
    }
    let p = sxy / sxx;
    if !(p < 0.0) {
        return None;
    }
    let (lo, hi) = ((1.0 - f_lo).ln(), (1.0 - f_hi).ln());
    let fitted_ratio = ((hi - lo) / p).exp();
    let time_at = |target: f64| {
        xy.windows(2).find_map(|w| {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            let inside = (y0 - target) * (y1 - target) <= 0.0 && y0 != y1;
            inside.then(|| x0 + (target - y0) * (x1 - x0) / (y1 - y0))
        })
    };
    let interpolated_ratio = match (time_at(lo), time_at(hi)) {
        (Some(a), Some(b)) => Some((b - a).exp()),
        _ => None,
    };
    Some(TimeFidelityTradeoff {
        exponent: p,
        fitted_ratio,
        interpolated_ratio,
    })
}

/// Final probabilities for one impact parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactPoint {
    pub b: f64,
    pub outcome: std::result::Result<ImpactFinal, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactFinal {
    pub exact: Vec<f64>,
    pub simulated: Vec<f64>,
    pub fidelity: f64,
    pub leakage: f64,
    pub hardware_time_ns: f64,
}

/// Impact-parameter sweep with running cross sections per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactSweep {
    pub points: Vec<ImpactPoint>,
    /// Impact parameters of the successful points, in order.
    pub b: Vec<f64>,
    /// `sigma_exact[i][k]`: running cross section for channel `i` up to `b[k]`.
    pub sigma_exact: Vec<Vec<f64>>,
    pub sigma_simulated: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactOptions<T: Real = f64> {
    pub simulate: SimulateOptions<T>,
    /// Time nodes per trajectory.
    pub nodes: usize,
    pub beyond: Beyond,
    /// Skip the hardware emulation and report only the exact side.
    pub exact_only: bool,
    /// Propagator step (source time units) for exact-only runs.
    pub exact_step: T,
}

impl<T: Real> Default for ImpactOptions<T> {
    fn default() -> Self {
        ImpactOptions {
            simulate: SimulateOptions::default(),
            nodes: 801,
            beyond: Beyond::Error,
            exact_only: false,
            exact_step: lit(0.01),
        }
    }
}

fn impact_point<T: Real>(
    ch: &ChannelData<T>,
    traj: &Trajectory<T>,
    tensor: &CouplingTensor<T>,
    constraints: &HardwareConstraints<T>,
    opts: &ImpactOptions<T>,
) -> Result<ImpactFinal> {
    let grid = traj.grid(opts.nodes);
    let target = build_collision_hamiltonian(ch, traj, &grid, opts.beyond)?.hamiltonian;
    let s = opts.simulate.source;
    if opts.exact_only {
        let cfg = PropagatorConfig {
            unitarity_tol: opts.simulate.unitarity_tol,
            ..PropagatorConfig::with_max_step(opts.exact_step)
        };
        let r = evolve(|t| target.sample(t).map(Generator::from), &[grid[0], grid[grid.len() - 1]], &cfg)?;
        let p = transition_probabilities(r.last(), s, opts.simulate.unitarity_tol)?;
        let p: Vec<f64> = p.into_iter().map(to_f64).collect();
        return Ok(ImpactFinal {
            exact: p,
            simulated: Vec::new(),
            fidelity: f64::NAN,
            leakage: f64::NAN,
            hardware_time_ns: f64::NAN,
        });
    }
    let sim = simulate(&target, tensor, constraints, &opts.simulate)?;
    let sum = sim.report.summary();
    Ok(ImpactFinal {
        exact: sum.final_exact,
        simulated: sum.final_simulated,
        fidelity: sum.final_fidelity,
        leakage: sum.final_leakage,
        hardware_time_ns: sum.hardware_time_ns,
    })
}

pub fn sweep_impact<T: Real>(
    ch: &ChannelData<T>,
    traj: &Trajectory<T>,
    b_grid: &[f64],
    tensor: &CouplingTensor<T>,
    constraints: &HardwareConstraints<T>,
    opts: &ImpactOptions<T>,
    workers: usize,
) -> Result<ImpactSweep> {
    if b_grid.is_empty() {
        return Err(Error::Config("empty impact-parameter grid".into()));
    }
    if let Some(k) = (1..b_grid.len()).find(|&k| !(b_grid[k] > b_grid[k - 1])) {
        return Err(Error::Config(format!("impact-parameter grid not increasing at entry {k}")));
    }
    let pool = worker_pool(workers)?;
    let points: Vec<ImpactPoint> = pool.install(|| {
        b_grid
            .par_iter()
            .map(|&b| {
                let outcome = Trajectory::new(lit(b), traj.v, traj.t_i, traj.t_f)
                    .and_then(|t| impact_point(ch, &t, tensor, constraints, opts))
                    .map_err(|e| e.to_string());
                ImpactPoint { b, outcome }
            })
            .collect()
    });
    let ok: Vec<(f64, &ImpactFinal)> = points
        .iter()
        .filter_map(|p| p.outcome.as_ref().ok().map(|f| (p.b, f)))
        .collect();
    let b: Vec<f64> = ok.iter().map(|(b, _)| *b).collect();
    let n = ch.dim();
    let running = |pick: &dyn Fn(&ImpactFinal) -> &Vec<f64>| -> Vec<Vec<f64>> {
        if ok.is_empty() || ok.iter().any(|(_, f)| pick(f).len() != n) {
            return Vec::new();
        }
        (0..n)
            .map(|i| {
                let p: Vec<f64> = ok.iter().map(|(_, f)| pick(f)[i].clamp(0.0, 1.0)).collect();
                cross_section_partial(&b, &p).unwrap_or_default()
            })
            .collect()
    };
    let sigma_exact = running(&|f| &f.exact);
    let sigma_simulated = running(&|f| &f.simulated);
    Ok(ImpactSweep {
        points,
        b,
        sigma_exact,
        sigma_simulated,
    })
}

/// `g_max` of `c` in MHz.
pub fn g_max_mhz<T: Real>(c: &HardwareConstraints<T>) -> f64 {
    to_f64(to_mhz(c.to_canonical().g_max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::UnitSystem;
    use nalgebra::dmatrix;

    fn lab_constraints() -> HardwareConstraints<f64> {
        HardwareConstraints::lab_defaults()
    }

    #[test]
    fn tradeoff_recovers_power_law() {
        // 1 − F = 10 T^-2 → ratio √10
        let pts: Vec<(f64, f64)> = [10.0, 20.0, 40.0, 80.0, 160.0, 320.0, 640.0].iter().map(|&t| (t, 1.0 - 10.0 / (t * t))).collect();
        let r = time_fidelity_tradeoff(&pts, 0.999, 0.9999).unwrap();
        assert!((r.exponent + 2.0).abs() < 1e-9);
        assert!((r.fitted_ratio - 10f64.sqrt()).abs() < 1e-9);
        assert!((r.interpolated_ratio.unwrap() - 10f64.sqrt()).abs() < 1e-9);
        assert!(time_fidelity_tradeoff(&pts[..1], 0.999, 0.9999).is_none());
    }

    #[test]
    fn flip_flop_two_level_is_exact() {
        let h = TargetHamiltonian::from_fn(
            UnitSystem::Laboratory,
            (0..=40).map(|k| k as f64 * 2.0).collect(),
            |t| dmatrix![0.0, mhz::<f64>(1.0) * (1.0 + 0.2 * (t / 20.0).sin()); mhz::<f64>(1.0) * (1.0 + 0.2 * (t / 20.0).sin()), mhz::<f64>(3.0)],
        )
        .unwrap();
        let mut opts = SimulateOptions::default();
        opts.compile.max_hw_step = 0.02;
        let sim = simulate(&h, &CouplingTensor::flip_flop(), &lab_constraints(), &opts).unwrap();
        let r = &sim.report;
        assert!(r.max_leakage() < 1e-12);
        assert!(r.min_fidelity() > 1.0 - 1e-8, "{}", r.min_fidelity());
        for (p, l) in r.simulated.iter().zip(&r.leakage) {
            assert!((1.0 - p.iter().sum::<f64>() - l).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_gmax_sweep_is_a_config_error() {
        let h = TargetHamiltonian::constant(UnitSystem::Laboratory, dmatrix![0.0, 0.01; 0.01, 0.0], 0.0, 10.0).unwrap();
        let err = sweep_gmax(&h, &CouplingTensor::flip_flop(), &lab_constraints(), &[], &SimulateOptions::default(), 1)
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn bad_source_is_rejected() {
        let h = TargetHamiltonian::constant(UnitSystem::Laboratory, dmatrix![0.0, 0.01; 0.01, 0.0], 0.0, 10.0).unwrap();
        let opts = SimulateOptions { source: 2, ..Default::default() };
        assert!(simulate(&h, &CouplingTensor::flip_flop(), &lab_constraints(), &opts).is_err());
    }
}
