//! Compiling a target Hamiltonian into hardware control schedules.
//!
//! The compiler picks the smallest energy/time scaling `λ(t) = dt_qc/dt`
//! that keeps every control inside its amplitude window, inflates it where
//! the emitted schedule would slew too fast, integrates hardware time and
//! maps the target's matrix elements onto `ε_i(t_qc)` and `g_ij(t_qc)`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::circuit::{build_hn, build_hqc, CouplingTensor, HardwareConstraints, TensorFile};
use crate::error::{Error, Result};
use crate::hamiltonian::{element_name, fmt_num, strict_upper_triangle, EnergyProfile, TargetHamiltonian};
use crate::num::{lit, to_f64, tol, Real};
use crate::units::UnitSystem;

/// Which constraint fixes λ at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Binding {
    /// `|H_ij| / g_max`
    Coupling(usize, usize),
    /// `ΔE_i / Δε`
    Energy(usize),
    /// Degenerate envelope; the floor value was used.
    Floor,
    /// Inflated to respect the `g_ij` slew limit.
    CouplingRate(usize, usize),
    /// Inflated to respect the `ε_i` slew limit.
    EnergyRate(usize),
}

impl Binding {
    pub fn is_rate(&self) -> bool {
        matches!(self, Binding::CouplingRate(..) | Binding::EnergyRate(_))
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Binding::Coupling(i, j) => write!(f, "g_{}_{}", i + 1, j + 1),
            Binding::Energy(i) => write!(f, "dE_{}", i + 1),
            Binding::Floor => write!(f, "floor"),
            Binding::CouplingRate(i, j) => write!(f, "vg_{}_{}", i + 1, j + 1),
            Binding::EnergyRate(i) => write!(f, "veps_{}", i + 1),
        }
    }
}

impl FromStr for Binding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("unknown binding tag '{s}'"));
        let idx = |x: &str| x.parse::<usize>().ok().filter(|&v| v > 0).map(|v| v - 1).ok_or_else(bad);
        let parts: Vec<&str> = s.split('_').collect();
        Ok(match parts.as_slice() {
            ["floor"] => Binding::Floor,
            ["g", i, j] => Binding::Coupling(idx(i)?, idx(j)?),
            ["dE", i] => Binding::Energy(idx(i)?),
            ["vg", i, j] => Binding::CouplingRate(idx(i)?, idx(j)?),
            ["veps", i] => Binding::EnergyRate(idx(i)?),
            _ => return Err(bad()),
        })
    }
}

impl Serialize for Binding {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Binding {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Sign of the `ΔE_i/λ` term in the energy mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergySign {
    /// `ε_i = ε_max − ΔE_i/λ`, which keeps `ε_i ≤ ε_max`.
    #[default]
    Consistent,
    /// `ε_i = ε_max + ΔE_i/λ`; kept for auditing, leaves the window.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompileOptions<T: Real = f64> {
    /// Multiplies the amplitude envelope; must be ≥ 1.
    pub margin: T,
    /// Explicit λ floor. When `None` the floor is `floor_budget / (t_K − t_0)`.
    pub lambda_floor: Option<T>,
    /// Hardware time (ns) a floor-bound schedule may take.
    pub floor_budget: T,
    /// Largest hardware-time extent of one schedule segment (ns).
    pub max_hw_step: T,
    pub sign: EnergySign,
    pub rate_growth: T,
    pub max_rate_passes: usize,
    pub max_refinements: usize,
    pub t_qc_start: T,
}

impl<T: Real> Default for CompileOptions<T> {
    fn default() -> Self {
        CompileOptions {
            margin: T::one(),
            lambda_floor: None,
            floor_budget: T::one(),
            max_hw_step: lit(0.05),
            sign: EnergySign::Consistent,
            rate_growth: lit(1.05),
            max_rate_passes: 200,
            max_refinements: 32,
            t_qc_start: T::zero(),
        }
    }
}

impl<T: Real> CompileOptions<T> {
    fn check(&self) -> Result<()> {
        if !(self.margin >= T::one()) {
            return Err(Error::Config("margin must be at least 1".into()));
        }
        if !(self.max_hw_step > T::zero()) {
            return Err(Error::Config("max hardware step must be positive".into()));
        }
        if !(self.rate_growth > T::one()) {
            return Err(Error::Config("rate growth factor must exceed 1".into()));
        }
        if let Some(f) = self.lambda_floor {
            if !(f > T::zero()) {
                return Err(Error::Config("lambda floor must be positive".into()));
            }
        }
        Ok(())
    }
}

/// λ on a simulated-time grid with the constraint active at each node.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaProfile<T: Real = f64> {
    pub times: Vec<T>,
    pub lambda: Vec<T>,
    pub binding: Vec<Binding>,
    pub margin: T,
}

/// All amplitude ratios at one node: `|H_ij|/g_max` for `i<j` and
/// `ΔE_i/Δε` for every `i`.
pub fn amplitude_ratios<T: Real>(
    h: &DMatrix<T>,
    c: &HardwareConstraints<T>,
    alpha: T,
) -> Vec<(Binding, T)> {
    let n = h.nrows();
    let mut out: Vec<(Binding, T)> = strict_upper_triangle(n)
        .map(|(i, j)| (Binding::Coupling(i, j), h[(i, j)].abs() / c.g_max))
        .collect();
    let de = c.delta_eps();
    let profile = EnergyProfile::of(h, alpha);
    out.extend(
        profile
            .gaps
            .iter()
            .enumerate()
            .map(|(i, &gap)| (Binding::Energy(i), gap / de)),
    );
    out
}

/// The largest amplitude ratio and which constraint it came from. Returns
/// `(0, Floor)` when every ratio vanishes.
pub fn envelope_at<T: Real>(h: &DMatrix<T>, c: &HardwareConstraints<T>, alpha: T) -> (T, Binding) {
    amplitude_ratios(h, c, alpha)
        .into_iter()
        .fold((T::zero(), Binding::Floor), |best, (b, r)| if r > best.0 { (r, b) } else { best })
}

fn check_units<T: Real>(h: &TargetHamiltonian<T>, c: &HardwareConstraints<T>) -> Result<()> {
    if h.units().compatible(c.units) {
        Ok(())
    } else {
        Err(Error::UnitMismatch {
            hamiltonian: h.units().name(),
            constraints: c.units.name(),
        })
    }
}

/// Smallest λ allowed by the amplitude windows at simulated time `t`.
pub fn lambda_envelope<T: Real>(
    h: &TargetHamiltonian<T>,
    c: &HardwareConstraints<T>,
    alpha: T,
    t: T,
) -> Result<T> {
    check_units(h, c)?;
    let m = h.sample(t)?;
    let m = m * h.units().energy_factor::<T>();
    Ok(envelope_at(&m, &c.to_canonical(), alpha).0)
}

/// Control values emitted for one node.
struct Node<T: Real> {
    eps: Vec<T>,
    g: DMatrix<T>,
    shift: T,
}

fn map_node<T: Real>(
    h: &DMatrix<T>,
    lambda: T,
    c: &HardwareConstraints<T>,
    alpha: T,
    sign: EnergySign,
) -> Node<T> {
    let n = h.nrows();
    let profile = EnergyProfile::of(h, alpha);
    let g = DMatrix::from_fn(n, n, |i, j| if i == j { T::zero() } else { h[(i, j)] / lambda });
    let eps = profile
        .gaps
        .iter()
        .map(|&gap| match sign {
            EnergySign::Consistent => c.eps_max - gap / lambda,
            EnergySign::AsPrinted => c.eps_max + gap / lambda,
        })
        .collect();
    Node {
        eps,
        g,
        shift: profile.max - lambda * c.eps_max,
    }
}

/// Trapezoidal cumulative integral of λ, starting at `t_qc_start`.
pub fn integrate_tqc<T: Real>(profile: &LambdaProfile<T>, t_qc_start: T) -> Result<Vec<T>> {
    cumulative_tqc(&profile.times, &profile.lambda, t_qc_start)
}

fn cumulative_tqc<T: Real>(times: &[T], lambda: &[T], start: T) -> Result<Vec<T>> {
    if let Some((k, &l)) = lambda
        .iter()
        .enumerate()
        .find(|(_, &l)| !(l > T::zero()) || !l.is_finite_value())
    {
        return Err(Error::Domain(format!("lambda[{k}] = {l} is not positive")));
    }
    let half = lit::<T>(0.5);
    let mut out = Vec::with_capacity(times.len());
    out.push(start);
    for k in 1..times.len() {
        let dt = times[k] - times[k - 1];
        let next = out[k - 1] + (lambda[k - 1] + lambda[k]) * half * dt;
        if !(next > out[k - 1]) {
            return Err(Error::Domain(format!(
                "hardware time does not increase on segment {}",
                k - 1
            )));
        }
        out.push(next);
    }
    Ok(out)
}

/// The first slew violation on segment `k`, if any.
fn segment_violation<T: Real>(
    a: &Node<T>,
    b: &Node<T>,
    dt_qc: T,
    c: &HardwareConstraints<T>,
) -> Option<Binding> {
    let n = a.eps.len();
    let gl = c.vg_max * dt_qc;
    for (i, j) in strict_upper_triangle(n) {
        if (b.g[(i, j)] - a.g[(i, j)]).abs() > gl {
            return Some(Binding::CouplingRate(i, j));
        }
    }
    let el = c.veps_max * dt_qc;
    (0..n)
        .find(|&i| (b.eps[i] - a.eps[i]).abs() > el)
        .map(Binding::EnergyRate)
}

/// Inflate λ until the discrete schedule respects both slew limits.
///
/// Every pass checks all segments against the cumulative hardware-time map.
/// If any violate, a forward then a backward sweep multiplies λ on each
/// violating segment by `opts.rate_growth` until that segment passes (the
/// lower end only, or both ends when equal),
/// so a bump propagates along the grid within one pass instead of one node
/// per pass. Stops with [`Error::Infeasible`] after `opts.max_rate_passes`
/// passes. Inputs must be in canonical units.
pub fn enforce_rate_limits<T: Real>(
    initial: &LambdaProfile<T>,
    h: &[DMatrix<T>],
    c: &HardwareConstraints<T>,
    alpha: T,
    opts: &CompileOptions<T>,
) -> Result<LambdaProfile<T>> {
    let mut out = initial.clone();
    if c.vg_max == T::infinity() && c.veps_max == T::infinity() {
        return Ok(out);
    }
    let k_max = out.times.len();
    let half = lit::<T>(0.5);
    let mut nodes: Vec<Node<T>> = (0..k_max)
        .map(|k| map_node(&h[k], out.lambda[k], c, alpha, opts.sign))
        .collect();
    for pass in 0..=opts.max_rate_passes {
        let tqc = cumulative_tqc(&out.times, &out.lambda, T::zero())?;
        let first = (0..k_max - 1).find_map(|k| {
            segment_violation(&nodes[k], &nodes[k + 1], tqc[k + 1] - tqc[k], c).map(|b| (k, b))
        });
        let Some((seg, b)) = first else {
            return Ok(out);
        };
        if pass == opts.max_rate_passes {
            return Err(Error::Infeasible {
                segment: seg,
                t: to_f64(out.times[seg]),
                quantity: b.to_string(),
                passes: pass,
            });
        }
        let fix = |k: usize, out: &mut LambdaProfile<T>, nodes: &mut Vec<Node<T>>| {
            for _ in 0..opts.max_rate_passes {
                let dt_qc = (out.lambda[k] + out.lambda[k + 1]) * half * (out.times[k + 1] - out.times[k]);
                let Some(tag) = segment_violation(&nodes[k], &nodes[k + 1], dt_qc, c) else {
                    return;
                };
                let (a, b) = (out.lambda[k], out.lambda[k + 1]);
                let ends: &[usize] = if a < b { &[k] } else if b < a { &[k + 1] } else { &[k, k + 1] };
                for &m in ends {
                    out.lambda[m] = (out.lambda[m] * opts.rate_growth).snap_up(T::SNAP_BITS);
                    out.binding[m] = tag;
                    nodes[m] = map_node(&h[m], out.lambda[m], c, alpha, opts.sign);
                }
            }
        };
        for k in 0..k_max - 1 {
            fix(k, &mut out, &mut nodes);
        }
        for k in (0..k_max - 1).rev() {
            fix(k, &mut out, &mut nodes);
        }
    }
    unreachable!("loop returns on its last pass")
}

/// Compiler metadata carried with every schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ScheduleMeta<T: Real = f64> {
    /// Canonical-unit constraints the schedule was compiled against.
    pub constraints: HardwareConstraints<T>,
    pub tensor: TensorFile,
    pub alpha: T,
    pub margin: T,
    pub sign: EnergySign,
    pub source_units: UnitSystem,
}

/// Compiled controls on the hardware-time grid, with the simulated-time grid,
/// λ and the energy shift `c(t) = E_max(t) − λ(t) ε_max` that produced them.
///
/// Times are in ns and energies in rad/ns (canonical units); dimensionless
/// sources stay dimensionless.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule<T: Real = f64> {
    pub times: Vec<T>,
    pub t_qc: Vec<T>,
    pub lambda: Vec<T>,
    pub shift: Vec<T>,
    pub eps: Vec<Vec<T>>,
    pub g: Vec<DMatrix<T>>,
    pub binding: Vec<Binding>,
    pub meta: ScheduleMeta<T>,
}

/// A failed schedule invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum AuditIssue {
    CouplingWindow { node: usize, i: usize, j: usize, value: f64 },
    EnergyWindow { node: usize, i: usize, value: f64 },
    CouplingSlew { segment: usize, i: usize, j: usize, rate: f64 },
    EnergySlew { segment: usize, i: usize, rate: f64 },
    NonMonotone { node: usize },
    NonPositiveLambda { node: usize },
}

impl fmt::Display for AuditIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            AuditIssue::CouplingWindow { node, i, j, value } => {
                write!(f, "g_{}_{} = {value:e} outside window at node {node}", i + 1, j + 1)
            }
            AuditIssue::EnergyWindow { node, i, value } => {
                write!(f, "eps_{} = {value:e} outside window at node {node}", i + 1)
            }
            AuditIssue::CouplingSlew { segment, i, j, rate } => {
                write!(f, "g_{}_{} slews at {rate:e} on segment {segment}", i + 1, j + 1)
            }
            AuditIssue::EnergySlew { segment, i, rate } => {
                write!(f, "eps_{} slews at {rate:e} on segment {segment}", i + 1)
            }
            AuditIssue::NonMonotone { node } => write!(f, "t_qc not increasing at node {node}"),
            AuditIssue::NonPositiveLambda { node } => write!(f, "lambda not positive at node {node}"),
        }
    }
}

/// Relative slack granted to window and slew checks, raised to a few ulps
/// for scalars coarser than `f64`.
pub const AUDIT_SLACK: f64 = 1e-12;

fn audit_slack<T: Real>() -> T {
    tol(AUDIT_SLACK, 8.0)
}

impl<T: Real> ControlSchedule<T> {
    pub fn dim(&self) -> usize {
        self.eps[0].len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn total_hardware_time(&self) -> T {
        self.t_qc[self.t_qc.len() - 1] - self.t_qc[0]
    }

    pub fn lambda_profile(&self) -> LambdaProfile<T> {
        LambdaProfile {
            times: self.times.clone(),
            lambda: self.lambda.clone(),
            binding: self.binding.clone(),
            margin: self.meta.margin,
        }
    }

    pub fn tensor(&self) -> Result<CouplingTensor<T>> {
        CouplingTensor::from_file(&self.meta.tensor)
    }

    /// `H_n` at node `k`.
    pub fn hn_at(&self, k: usize) -> DMatrix<T> {
        build_hn(&self.eps[k], &self.g[k], self.meta.alpha)
    }

    /// Full-circuit `H_qc` at node `k`.
    pub fn hqc_at(&self, k: usize, tensor: &CouplingTensor<T>, max_qubits: usize) -> Result<DMatrix<Complex<T>>> {
        build_hqc(&self.eps[k], &self.g[k], tensor, max_qubits)
    }

    /// Segment index and weight for hardware time `t` (linear in `t_qc`).
    pub fn locate(&self, t_qc: T) -> Result<(usize, T)> {
        let (lo, hi) = (self.t_qc[0], self.t_qc[self.t_qc.len() - 1]);
        if !(t_qc >= lo && t_qc <= hi) {
            return Err(Error::OutOfRange {
                t: to_f64(t_qc),
                lo: to_f64(lo),
                hi: to_f64(hi),
            });
        }
        let k = self
            .t_qc
            .partition_point(|&x| x <= t_qc)
            .saturating_sub(1)
            .min(self.t_qc.len() - 2);
        let w = (t_qc - self.t_qc[k]) / (self.t_qc[k + 1] - self.t_qc[k]);
        Ok((k, w))
    }

    /// Controls linearly interpolated in hardware time.
    pub fn controls_at(&self, t_qc: T) -> Result<(Vec<T>, DMatrix<T>)> {
        let (k, w) = self.locate(t_qc)?;
        let eps = self.eps[k]
            .iter()
            .zip(&self.eps[k + 1])
            .map(|(&a, &b)| a + (b - a) * w)
            .collect();
        let g = self.g[k].zip_map(&self.g[k + 1], |a, b| a + (b - a) * w);
        Ok((eps, g))
    }

    /// Check window, slew and monotonicity invariants against `c` (canonical
    /// units).
    pub fn audit(&self, c: &HardwareConstraints<T>) -> Vec<AuditIssue> {
        let slack = audit_slack::<T>();
        let one = T::one();
        let n = self.dim();
        let mut out = Vec::new();
        let e_tol = slack * c.eps_max.abs().max(c.eps_min.abs());
        for k in 0..self.len() {
            if !(self.lambda[k] > T::zero()) {
                out.push(AuditIssue::NonPositiveLambda { node: k });
            }
            if k > 0 && !(self.t_qc[k] > self.t_qc[k - 1]) {
                out.push(AuditIssue::NonMonotone { node: k });
            }
            for (i, j) in strict_upper_triangle(n) {
                let v = self.g[k][(i, j)];
                if v.abs() > c.g_max * (one + slack) {
                    out.push(AuditIssue::CouplingWindow { node: k, i, j, value: to_f64(v) });
                }
            }
            for (i, &e) in self.eps[k].iter().enumerate() {
                if e > c.eps_max + e_tol || e < c.eps_min - e_tol {
                    out.push(AuditIssue::EnergyWindow { node: k, i, value: to_f64(e) });
                }
            }
        }
        for k in 0..self.len().saturating_sub(1) {
            let dt = self.t_qc[k + 1] - self.t_qc[k];
            if !(dt > T::zero()) {
                continue;
            }
            for (i, j) in strict_upper_triangle(n) {
                let d = (self.g[k + 1][(i, j)] - self.g[k][(i, j)]).abs();
                if d > c.vg_max * dt * (one + slack) {
                    out.push(AuditIssue::CouplingSlew { segment: k, i, j, rate: to_f64(d / dt) });
                }
            }
            for i in 0..n {
                let d = (self.eps[k + 1][i] - self.eps[k][i]).abs();
                if d > c.veps_max * dt * (one + slack) {
                    out.push(AuditIssue::EnergySlew { segment: k, i, rate: to_f64(d / dt) });
                }
            }
        }
        out
    }

    pub fn audit_self(&self) -> Vec<AuditIssue> {
        self.audit(&self.meta.constraints)
    }

    /// CSV columns `t,t_qc,lambda,c,eps_1..eps_n,g_12,...,g_{n-1,n}`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.dim();
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["t", "t_qc", "lambda", "c"].iter().map(|s| s.to_string()).collect();
        header.extend((0..n).map(|i| format!("eps_{}", i + 1)));
        header.extend(strict_upper_triangle(n).map(|(i, j)| element_name("g_", n, i, j)));
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut rec = vec![
                fmt_num(self.times[k]),
                fmt_num(self.t_qc[k]),
                fmt_num(self.lambda[k]),
                fmt_num(self.shift[k]),
            ];
            rec.extend(self.eps[k].iter().map(|&e| fmt_num(e)));
            rec.extend(strict_upper_triangle(n).map(|(i, j)| fmt_num(self.g[k][(i, j)])));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Read the CSV form back; metadata is not stored in the CSV and must be
    /// supplied. Binding tags are not recoverable and are set to `Floor`.
    pub fn read_csv<R: std::io::Read>(input: R, meta: ScheduleMeta<T>) -> Result<Self> {
        let table = crate::hamiltonian::read_table(input)?;
        let cols = table.header.len();
        let n = (1..=64)
            .find(|&n| 4 + n + n * (n - 1) / 2 == cols)
            .ok_or_else(|| Error::Parse {
                line: table.header_line,
                message: format!("{cols} columns do not describe a schedule"),
            })?;
        let mut s = ControlSchedule {
            times: vec![],
            t_qc: vec![],
            lambda: vec![],
            shift: vec![],
            eps: vec![],
            g: vec![],
            binding: vec![],
            meta,
        };
        for (_, row) in &table.rows {
            s.times.push(lit(row[0]));
            s.t_qc.push(lit(row[1]));
            s.lambda.push(lit(row[2]));
            s.shift.push(lit(row[3]));
            s.eps.push(row[4..4 + n].iter().map(|&v| lit(v)).collect());
            let mut g = DMatrix::zeros(n, n);
            for ((i, j), &v) in strict_upper_triangle(n).zip(&row[4 + n..]) {
                g[(i, j)] = lit(v);
                g[(j, i)] = lit(v);
            }
            s.g.push(g);
            s.binding.push(Binding::Floor);
        }
        if s.times.len() < 2 {
            return Err(Error::InvalidInput("schedule needs at least two nodes".into()));
        }
        Ok(s)
    }

    pub fn to_file(&self) -> ScheduleFile {
        let n = self.dim();
        ScheduleFile {
            n,
            meta: ScheduleMeta {
                constraints: HardwareConstraints {
                    units: self.meta.constraints.units,
                    g_max: to_f64(self.meta.constraints.g_max),
                    eps_min: to_f64(self.meta.constraints.eps_min),
                    eps_max: to_f64(self.meta.constraints.eps_max),
                    vg_max: to_f64(self.meta.constraints.vg_max),
                    veps_max: to_f64(self.meta.constraints.veps_max),
                },
                tensor: self.meta.tensor.clone(),
                alpha: to_f64(self.meta.alpha),
                margin: to_f64(self.meta.margin),
                sign: self.meta.sign,
                source_units: self.meta.source_units,
            },
            t: self.times.iter().map(|&x| to_f64(x)).collect(),
            t_qc: self.t_qc.iter().map(|&x| to_f64(x)).collect(),
            lambda: self.lambda.iter().map(|&x| to_f64(x)).collect(),
            c: self.shift.iter().map(|&x| to_f64(x)).collect(),
            eps: self.eps.iter().map(|r| r.iter().map(|&x| to_f64(x)).collect()).collect(),
            g: self
                .g
                .iter()
                .map(|m| strict_upper_triangle(n).map(|(i, j)| to_f64(m[(i, j)])).collect())
                .collect(),
            binding: self.binding.clone(),
        }
    }

    pub fn from_file(f: &ScheduleFile) -> Result<Self> {
        let n = f.n;
        let k = f.t.len();
        let lens = [f.t_qc.len(), f.lambda.len(), f.c.len(), f.eps.len(), f.g.len(), f.binding.len()];
        if k < 2 || lens.iter().any(|&l| l != k) {
            return Err(Error::InvalidInput("schedule columns have inconsistent lengths".into()));
        }
        let pairs = n * (n - 1) / 2;
        if f.eps.iter().any(|r| r.len() != n) || f.g.iter().any(|r| r.len() != pairs) {
            return Err(Error::InvalidInput("schedule rows do not match n".into()));
        }
        let c = &f.meta.constraints;
        let v = |x: &[f64]| x.iter().map(|&y| lit::<T>(y)).collect::<Vec<T>>();
        Ok(ControlSchedule {
            times: v(&f.t),
            t_qc: v(&f.t_qc),
            lambda: v(&f.lambda),
            shift: v(&f.c),
            eps: f.eps.iter().map(|r| v(r)).collect(),
            g: f
                .g
                .iter()
                .map(|r| {
                    let mut m = DMatrix::zeros(n, n);
                    for ((i, j), &x) in strict_upper_triangle(n).zip(r) {
                        m[(i, j)] = lit(x);
                        m[(j, i)] = lit(x);
                    }
                    m
                })
                .collect(),
            binding: f.binding.clone(),
            meta: ScheduleMeta {
                constraints: HardwareConstraints {
                    units: c.units,
                    g_max: lit(c.g_max),
                    eps_min: lit(c.eps_min),
                    eps_max: lit(c.eps_max),
                    vg_max: lit(c.vg_max),
                    veps_max: lit(c.veps_max),
                },
                tensor: f.meta.tensor.clone(),
                alpha: lit(f.meta.alpha),
                margin: lit(f.meta.margin),
                sign: f.meta.sign,
                source_units: f.meta.source_units,
            },
        })
    }
}

/// Columnar JSON mirror of a schedule. Infinite slew limits serialize as
/// `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub n: usize,
    pub meta: ScheduleMeta<f64>,
    pub t: Vec<f64>,
    pub t_qc: Vec<f64>,
    pub lambda: Vec<f64>,
    pub c: Vec<f64>,
    pub eps: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub binding: Vec<Binding>,
}

/// Subdivide every segment whose hardware extent exceeds `max_step`.
/// Returns `None` when nothing needed splitting.
fn split_segments<T: Real>(times: &[T], lambda: &[T], max_step: T) -> Option<Vec<(T, bool)>> {
    let half = lit::<T>(0.5);
    let mut out = Vec::with_capacity(times.len());
    let mut split = false;
    for k in 0..times.len() - 1 {
        out.push((times[k], true));
        let dt = times[k + 1] - times[k];
        let extent = (lambda[k] + lambda[k + 1]) * half * dt;
        if extent > max_step {
            let m = (extent / max_step).ceil().to_usize().unwrap_or(1).max(2);
            let mf = lit::<T>(m as f64);
            for p in 1..m {
                out.push((times[k] + dt * lit::<T>(p as f64) / mf, false));
            }
            split = true;
        }
    }
    out.push((times[times.len() - 1], true));
    split.then_some(out)
}

struct Compiler<'a, T: Real> {
    target: &'a TargetHamiltonian<T>,
    c: HardwareConstraints<T>,
    alpha: T,
    floor: T,
    opts: &'a CompileOptions<T>,
}

impl<T: Real> Compiler<'_, T> {
    fn lambda_at(&self, h: &DMatrix<T>) -> (T, Binding) {
        let (e, b) = envelope_at(h, &self.c, self.alpha);
        let scaled = e * self.opts.margin;
        let (v, b) = if scaled < self.floor { (self.floor, Binding::Floor) } else { (scaled, b) };
        (v.snap_up(T::SNAP_BITS), b)
    }

    fn run(&self) -> Result<(LambdaProfile<T>, Vec<DMatrix<T>>)> {
        let mut times = self.target.times().to_vec();
        let mut mats = self.target.matrices().to_vec();
        let env: Vec<(T, Binding)> = mats.iter().map(|m| self.lambda_at(m)).collect();
        let mut lambda: Vec<T> = env.iter().map(|e| e.0).collect();
        let mut binding: Vec<Binding> = env.iter().map(|e| e.1).collect();

        // refine against the amplitude envelope
        for _ in 0..self.opts.max_refinements {
            let Some(grid) = split_segments(&times, &lambda, self.opts.max_hw_step) else {
                break;
            };
            let mut nt = Vec::with_capacity(grid.len());
            let mut nm = Vec::with_capacity(grid.len());
            let mut nl = Vec::with_capacity(grid.len());
            let mut nb = Vec::with_capacity(grid.len());
            let mut old = 0;
            for (t, kept) in grid {
                if kept {
                    while times[old] != t {
                        old += 1;
                    }
                    nm.push(mats[old].clone());
                    nl.push(lambda[old]);
                    nb.push(binding[old]);
                } else {
                    let m = self.target.sample(t)?;
                    let (l, b) = self.lambda_at(&m);
                    nm.push(m);
                    nl.push(l);
                    nb.push(b);
                }
                nt.push(t);
            }
            times = nt;
            mats = nm;
            lambda = nl;
            binding = nb;
        }

        let mut profile = LambdaProfile {
            times,
            lambda,
            binding,
            margin: self.opts.margin,
        };
        // rate limits, re-refining where inflation stretched a segment
        for _ in 0..self.opts.max_refinements {
            profile = enforce_rate_limits(&profile, &mats, &self.c, self.alpha, self.opts)?;
            let Some(grid) = split_segments(&profile.times, &profile.lambda, self.opts.max_hw_step) else {
                return Ok((profile, mats));
            };
            let mut next = LambdaProfile {
                times: Vec::with_capacity(grid.len()),
                lambda: Vec::with_capacity(grid.len()),
                binding: Vec::with_capacity(grid.len()),
                margin: profile.margin,
            };
            let mut nm = Vec::with_capacity(grid.len());
            let mut seg = 0;
            for (t, kept) in grid {
                if kept {
                    while profile.times[seg] != t {
                        seg += 1;
                    }
                    next.lambda.push(profile.lambda[seg]);
                    next.binding.push(profile.binding[seg]);
                    nm.push(mats[seg].clone());
                } else {
                    // chord of λ stays above the per-segment convex envelope
                    let (t0, t1) = (profile.times[seg], profile.times[seg + 1]);
                    let w = (t - t0) / (t1 - t0);
                    let (l0, l1) = (profile.lambda[seg], profile.lambda[seg + 1]);
                    let chord = (l0 + (l1 - l0) * w).snap_up(T::SNAP_BITS);
                    let m = self.target.sample(t)?;
                    let (env, b) = self.lambda_at(&m);
                    let (l, b) = if env > chord { (env, b) } else { (chord, profile.binding[seg]) };
                    next.lambda.push(l);
                    next.binding.push(b);
                    nm.push(m);
                }
                next.times.push(t);
            }
            profile = next;
            mats = nm;
        }
        Ok((profile, mats))
    }
}

/// Full compile: envelope × margin → rate enforcement → hardware-time
/// integration → control mapping.
pub fn compile_controls<T: Real>(
    h: &TargetHamiltonian<T>,
    tensor: &CouplingTensor<T>,
    constraints: &HardwareConstraints<T>,
    opts: &CompileOptions<T>,
) -> Result<ControlSchedule<T>> {
    h.ensure_valid()?;
    constraints.check()?;
    opts.check()?;
    check_units(h, constraints)?;
    let target = h.to_canonical();
    let c = constraints.to_canonical();
    let alpha = tensor.alpha();
    let floor = opts
        .lambda_floor
        .unwrap_or_else(|| opts.floor_budget / (target.t_end() - target.t_start()));
    let compiler = Compiler {
        target: &target,
        c,
        alpha,
        floor,
        opts,
    };
    let (profile, mats) = compiler.run()?;
    let t_qc = integrate_tqc(&profile, opts.t_qc_start)?;
    let mut eps = Vec::with_capacity(mats.len());
    let mut g = Vec::with_capacity(mats.len());
    let mut shift = Vec::with_capacity(mats.len());
    for (m, &l) in mats.iter().zip(&profile.lambda) {
        let node = map_node(m, l, &c, alpha, opts.sign);
        eps.push(node.eps);
        g.push(node.g);
        shift.push(node.shift);
    }
    Ok(ControlSchedule {
        times: profile.times,
        t_qc,
        lambda: profile.lambda,
        shift,
        eps,
        g,
        binding: profile.binding,
        meta: ScheduleMeta {
            constraints: c,
            tensor: tensor.to_file(),
            alpha,
            margin: opts.margin,
            sign: opts.sign,
            source_units: h.units(),
        },
    })
}
