use nalgebra::dmatrix;
use sesim::collision::{build_collision_hamiltonian, stand_in_channels, Beyond};
use sesim::pipeline::{simulate, SimulateOptions};
use sesim::schedule::compile_controls;
use sesim::units::mhz;
use sesim::*;

#[test]
fn stand_in_compiles_in_f32_like_f64() {
    let compile = |h: &TargetHamiltonian<f32>| {
        compile_controls(h, &CouplingTensor::phase_qubit_default(), &HardwareConstraints::lab_defaults(), &CompileOptions::default()).unwrap()
    };
    let ch = stand_in_channels::<f32>();
    let t = Trajectory::new(0.5f32, 1.0, -40.0, 40.0).unwrap();
    let h: TargetHamiltonianF32 = build_collision_hamiltonian(&ch, &t, &t.grid(801), Beyond::Error).unwrap().hamiltonian;
    let s32: ControlScheduleF32 = compile(&h);
    assert!(s32.audit_self().is_empty(), "{:?}", s32.audit_self().first());

    let ch = stand_in_channels::<f64>();
    let t = Trajectory::new(0.5, 1.0, -40.0, 40.0).unwrap();
    let h = build_collision_hamiltonian(&ch, &t, &t.grid(801), Beyond::Error).unwrap().hamiltonian;
    let s64 = compile_controls(&h, &CouplingTensor::phase_qubit_default(), &HardwareConstraints::lab_defaults(), &CompileOptions::default()).unwrap();
    let (a, b) = (s32.total_hardware_time() as f64, s64.total_hardware_time());
    assert!(((a - b) / b).abs() < 1e-4, "f32 {a} vs f64 {b}");
}

#[test]
fn f32_rabi_pair_through_the_pipeline() {
    let g = mhz::<f32>(1.5);
    let period = std::f32::consts::PI / g;
    let grid: Vec<f32> = (0..=100).map(|k| 2.0 * period * k as f32 / 100.0).collect();
    let h = TargetHamiltonian::from_fn(UnitSystem::Laboratory, grid, |_| dmatrix![0.0f32, g; g, 0.0]).unwrap();
    // rounding grows with the step count, so keep the hardware grid coarse
    let opts = SimulateOptions {
        compile: CompileOptions { max_hw_step: 2.0, ..CompileOptions::default() },
        ..SimulateOptions::default()
    };
    let sim = simulate(&h, &CouplingTensor::flip_flop(), &HardwareConstraints::lab_defaults(), &opts).unwrap();
    assert!(sim.report.min_fidelity() >= 1.0 - 1e-3);
    for (t, p) in sim.report.times.iter().zip(&sim.report.simulated) {
        assert!((p[1] - (g * t).sin().powi(2)).abs() < 1e-3);
    }
}
