//! Run configuration: JSON on disk, every field optional.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sesim::circuit::TensorFile;
use sesim::collision::{build_collision_hamiltonian, load_channels, stand_in_channels, Beyond};
use sesim::pipeline::{ImpactOptions, SimulateOptions};
use sesim::{ChannelData, CompileOptions, CouplingTensor, EnergySign, Error, HardwareConstraints, Result, TargetHamiltonian, Trajectory};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Channel potentials (CSV or JSON). `None` uses the built-in stand-in.
    pub channels: Option<PathBuf>,
    /// Preset name or path to a tensor JSON file.
    pub tensor: String,
    pub constraints: ConstraintConfig,
    pub trajectory: TrajectoryConfig,
    pub nodes: usize,
    /// Allow trajectories that leave the tabulated R range (constant extension).
    pub extend_potentials: bool,
    pub compile: CompileConfig,
    pub propagator: PropagatorSettings,
    /// Channel the system starts in (0-based).
    pub source: usize,
    pub out: PathBuf,
    pub sweep: SweepPlan,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            channels: None,
            tensor: "phase-qubit-default".into(),
            constraints: ConstraintConfig::default(),
            trajectory: TrajectoryConfig::default(),
            nodes: 801,
            extend_potentials: false,
            compile: CompileConfig::default(),
            propagator: PropagatorSettings::default(),
            source: 0,
            out: PathBuf::from("out"),
            sweep: SweepPlan::default(),
        }
    }
}

/// Hardware limits in MHz·h; slew limits in MHz·h per ns, `null` for none.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintConfig {
    pub g_max_mhz: f64,
    pub eps_min_mhz: f64,
    pub eps_max_mhz: f64,
    pub vg_max: Option<f64>,
    pub veps_max: Option<f64>,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        ConstraintConfig {
            g_max_mhz: 2.0,
            eps_min_mhz: 5810.0,
            eps_max_mhz: 6000.0,
            vg_max: None,
            veps_max: None,
        }
    }
}

/// Straight-line path in the units of the channel data.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub b: f64,
    pub v: f64,
    pub t_i: f64,
    pub t_f: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            b: 0.5,
            v: 1.0,
            t_i: -40.0,
            t_f: 40.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompileConfig {
    pub margin: f64,
    pub lambda_floor: Option<f64>,
    pub floor_budget_ns: f64,
    pub max_hw_step_ns: f64,
    pub sign_as_printed: bool,
}

impl Default for CompileConfig {
    fn default() -> Self {
        let d = CompileOptions::<f64>::default();
        CompileConfig {
            margin: d.margin,
            lambda_floor: d.lambda_floor,
            floor_budget_ns: d.floor_budget,
            max_hw_step_ns: d.max_hw_step,
            sign_as_printed: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagatorSettings {
    /// Propagator steps per compiled schedule segment.
    pub substeps: usize,
    pub unitarity_tol: f64,
    /// Step for exact-only impact sweeps, in source time units.
    pub exact_step: f64,
    /// Row stride of the report CSV.
    pub report_stride: usize,
}

impl Default for PropagatorSettings {
    fn default() -> Self {
        let d = SimulateOptions::<f64>::default();
        PropagatorSettings {
            substeps: d.substeps,
            unitarity_tol: d.unitarity_tol,
            exact_step: 0.01,
            report_stride: 1,
        }
    }
}

/// Points for `sweep`. Either list may be empty but not both.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepPlan {
    pub g_max_mhz: Vec<f64>,
    pub b: Vec<f64>,
    /// Impact sweeps skip the hardware emulation.
    pub exact_only: bool,
}

impl SweepPlan {
    pub fn is_empty(&self) -> bool {
        self.g_max_mhz.is_empty() && self.b.is_empty()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub g_max_mhz: Option<f64>,
    pub margin: Option<f64>,
    pub sign_as_printed: bool,
}

impl RunConfig {
    /// Read `path` (or defaults) and resolve relative paths against the
    /// config file's directory.
    pub fn load(path: Option<&Path>, o: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let mut cfg: RunConfig =
                    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                let base = p.parent().unwrap_or(Path::new(""));
                cfg.channels = cfg.channels.map(|c| base.join(c));
                if CouplingTensor::<f64>::preset(&cfg.tensor).is_none() {
                    cfg.tensor = base.join(&cfg.tensor).to_string_lossy().into_owned();
                }
                cfg.out = base.join(&cfg.out);
                cfg
            }
            None => RunConfig::default(),
        };
        if let Some(out) = &o.out {
            cfg.out = out.clone();
        }
        if let Some(g) = o.g_max_mhz {
            cfg.constraints.g_max_mhz = g;
        }
        if let Some(m) = o.margin {
            cfg.compile.margin = m;
        }
        cfg.compile.sign_as_printed |= o.sign_as_printed;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if self.nodes < 2 {
            return bad("nodes must be at least 2");
        }
        if self.propagator.substeps == 0 {
            return bad("substeps must be at least 1");
        }
        if self.propagator.report_stride == 0 {
            return bad("report_stride must be at least 1");
        }
        if !(self.propagator.unitarity_tol > 0.0) || !(self.propagator.exact_step > 0.0) {
            return bad("propagator tolerances and steps must be positive");
        }
        if !(self.compile.margin >= 1.0) {
            return bad("margin must be at least 1");
        }
        if !(self.compile.max_hw_step_ns > 0.0) || !(self.compile.floor_budget_ns > 0.0) {
            return bad("max_hw_step_ns and floor_budget_ns must be positive");
        }
        if self.sweep.g_max_mhz.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return bad("sweep g_max values must be positive");
        }
        Ok(())
    }

    pub fn channels(&self) -> Result<ChannelData<f64>> {
        let ch = match &self.channels {
            Some(p) => load_channels(p, None)?,
            None => stand_in_channels(),
        };
        if self.source >= ch.dim() {
            return Err(Error::Config(format!(
                "source channel {} out of range for {} channels",
                self.source,
                ch.dim()
            )));
        }
        Ok(ch)
    }

    pub fn tensor(&self) -> Result<CouplingTensor<f64>> {
        if let Some(t) = CouplingTensor::preset(&self.tensor) {
            return Ok(t);
        }
        let path = Path::new(&self.tensor);
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: TensorFile =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        CouplingTensor::from_file(&file)
    }

    pub fn constraints(&self) -> Result<HardwareConstraints<f64>> {
        let c = &self.constraints;
        HardwareConstraints::from_mhz(
            c.g_max_mhz,
            c.eps_min_mhz,
            c.eps_max_mhz,
            c.vg_max.unwrap_or(f64::INFINITY),
            c.veps_max.unwrap_or(f64::INFINITY),
        )
    }

    pub fn trajectory(&self) -> Result<Trajectory<f64>> {
        let t = &self.trajectory;
        Trajectory::new(t.b, t.v, t.t_i, t.t_f)
    }

    pub fn beyond(&self) -> Beyond {
        if self.extend_potentials {
            Beyond::Extend
        } else {
            Beyond::Error
        }
    }

    pub fn target(&self, ch: &ChannelData<f64>) -> Result<TargetHamiltonian<f64>> {
        let traj = self.trajectory()?;
        Ok(build_collision_hamiltonian(ch, &traj, &traj.grid(self.nodes), self.beyond())?.hamiltonian)
    }

    pub fn compile_options(&self) -> CompileOptions<f64> {
        let c = &self.compile;
        CompileOptions {
            margin: c.margin,
            lambda_floor: c.lambda_floor,
            floor_budget: c.floor_budget_ns,
            max_hw_step: c.max_hw_step_ns,
            sign: if c.sign_as_printed { EnergySign::AsPrinted } else { EnergySign::Consistent },
            ..CompileOptions::default()
        }
    }

    pub fn simulate_options(&self) -> SimulateOptions<f64> {
        SimulateOptions {
            compile: self.compile_options(),
            source: self.source,
            substeps: self.propagator.substeps,
            unitarity_tol: self.propagator.unitarity_tol,
            ..SimulateOptions::default()
        }
    }

    pub fn impact_options(&self, exact_only: bool) -> ImpactOptions<f64> {
        ImpactOptions {
            simulate: self.simulate_options(),
            nodes: self.nodes,
            beyond: self.beyond(),
            exact_only,
            exact_step: self.propagator.exact_step,
        }
    }
}
