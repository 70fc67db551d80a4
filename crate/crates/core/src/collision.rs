//! Semiclassical atom-atom collisions: channel potentials along straight-line
//! trajectories, and impact-parameter cross sections.
//!
//! Channel data is diabatic: a real symmetric potential matrix `V(R)` whose
//! off-diagonal elements are smooth couplings. That is exactly the real
//! symmetric `H_s(t) = V(R(t))` the compiler consumes. Adiabatic curves with
//! derivative couplings would need `d/dR` data and are not handled.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{element_name, fmt_num, read_table, strict_upper_triangle, TargetHamiltonian};
use crate::num::{lit, to_f64, Real};
use crate::units::UnitSystem;

/// Default absolute tolerance for couplings at the outermost `R` node.
pub const DECOUPLING_TOL: f64 = 1e-8;

/// Diabatic potential matrices on an `R` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelData<T: Real = f64> {
    units: UnitSystem,
    labels: Vec<String>,
    r: Vec<T>,
    v: Vec<DMatrix<T>>,
}

/// Behaviour for `R` beyond the last data node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Beyond {
    #[default]
    Error,
    /// Hold the outermost node's values.
    Extend,
}

impl<T: Real> ChannelData<T> {
    pub fn new(units: UnitSystem, labels: Vec<String>, r: Vec<T>, v: Vec<DMatrix<T>>) -> Result<Self> {
        if r.len() < 2 {
            return Err(Error::InvalidInput("channel data needs at least two R nodes".into()));
        }
        if r.len() != v.len() {
            return Err(Error::InvalidInput(format!("{} R nodes but {} matrices", r.len(), v.len())));
        }
        let n = v[0].nrows();
        if n < 2 {
            return Err(Error::InvalidInput("at least two channels are required".into()));
        }
        if labels.len() != n {
            return Err(Error::InvalidInput(format!("{} labels for {n} channels", labels.len())));
        }
        if !(r[0] >= T::zero()) {
            return Err(Error::InvalidInput("R grid must start at R ≥ 0".into()));
        }
        for (k, w) in r.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidInput(format!("R grid not increasing at node {}", k + 1)));
            }
        }
        for (k, m) in v.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, found: m.nrows() });
            }
            for (i, j) in strict_upper_triangle(n) {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::InvalidInput(format!(
                        "V not symmetric at ({}, {}) in node {k}",
                        i + 1,
                        j + 1
                    )));
                }
            }
            if m.iter().any(|x| !x.is_finite_value()) {
                return Err(Error::InvalidInput(format!("non-finite potential at node {k}")));
            }
        }
        Ok(ChannelData { units, labels, r, v })
    }

    /// Sample `f(R)` on `r`.
    pub fn from_fn<F>(units: UnitSystem, labels: Vec<String>, r: Vec<T>, f: F) -> Result<Self>
    where
        F: Fn(T) -> DMatrix<T>,
    {
        let v = r.iter().map(|&x| f(x)).collect();
        Self::new(units, labels, r, v)
    }

    pub fn dim(&self) -> usize {
        self.v[0].nrows()
    }

    pub fn units(&self) -> UnitSystem {
        self.units
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn r(&self) -> &[T] {
        &self.r
    }

    pub fn potentials(&self) -> &[DMatrix<T>] {
        &self.v
    }

    pub fn r_min(&self) -> T {
        self.r[0]
    }

    pub fn r_max(&self) -> T {
        self.r[self.r.len() - 1]
    }

    /// Largest `|V_ij|`, `i ≠ j`, at the outermost node.
    pub fn decoupling_residual(&self) -> T {
        let last = &self.v[self.v.len() - 1];
        strict_upper_triangle(self.dim()).fold(T::zero(), |a, (i, j)| a.max(last[(i, j)].abs()))
    }

    pub fn check_decoupling(&self, tol: T) -> Result<()> {
        let res = self.decoupling_residual();
        if res > tol {
            return Err(Error::InvalidInput(format!(
                "couplings do not vanish at R_max = {}: max |V_ij| = {:e} > {:e}",
                to_f64(self.r_max()),
                to_f64(res),
                to_f64(tol)
            )));
        }
        Ok(())
    }

    /// `V(R)` by piecewise-linear interpolation. `R` below the grid is always
    /// an error.
    pub fn at(&self, r: T, beyond: Beyond) -> Result<DMatrix<T>> {
        let (lo, hi) = (self.r_min(), self.r_max());
        let out_of_range = || Error::OutOfRange {
            t: to_f64(r),
            lo: to_f64(lo),
            hi: to_f64(hi),
        };
        if !(r >= lo) {
            return Err(out_of_range());
        }
        if r > hi {
            return match beyond {
                Beyond::Extend => Ok(self.v[self.v.len() - 1].clone()),
                Beyond::Error => Err(out_of_range()),
            };
        }
        let k = self.r.partition_point(|&x| x <= r).saturating_sub(1).min(self.r.len() - 2);
        let (r0, r1) = (self.r[k], self.r[k + 1]);
        if r == r0 {
            return Ok(self.v[k].clone());
        }
        let w = (r - r0) / (r1 - r0);
        Ok(self.v[k].zip_map(&self.v[k + 1], |a, b| a + (b - a) * w))
    }

    fn columns(&self) -> Vec<(usize, usize)> {
        let n = self.dim();
        (0..n).map(|i| (i, i)).chain(strict_upper_triangle(n)).collect()
    }

    fn header(&self) -> Vec<String> {
        let n = self.dim();
        std::iter::once("R".to_string())
            .chain(self.columns().into_iter().map(|(i, j)| element_name("V", n, i, j)))
            .collect()
    }

    /// CSV `R,V11,...,Vnn,V12,...` (diagonal then strict upper triangle), with
    /// `# units:` and `# labels:` (semicolon separated) metadata lines.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let head = format!("# units: {}\n# labels: {}\n", self.units.name(), self.labels.join("; "));
        out.write_all(head.as_bytes()).map_err(|e| Error::io("<csv>", e))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        let cols = self.columns();
        for (r, m) in self.r.iter().zip(&self.v) {
            let mut rec = vec![fmt_num(*r)];
            rec.extend(cols.iter().map(|&(i, j)| fmt_num(m[(i, j)])));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let table = read_table(input)?;
        let units = match table.meta("units").or(table.meta("unit")) {
            Some(u) => UnitSystem::parse(u).ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("unknown unit system '{u}'"),
            })?,
            None => {
                return Err(Error::Parse {
                    line: table.header_line,
                    message: "missing '# units:' metadata line".into(),
                })
            }
        };
        let m = table.header.len().saturating_sub(1);
        let n = (2..=64).find(|n| n * (n + 1) / 2 == m).ok_or_else(|| Error::Parse {
            line: table.header_line,
            message: format!("{m} potential columns do not form a symmetric matrix"),
        })?;
        let labels: Vec<String> = match table.meta("labels") {
            Some(l) => l.split(';').map(|s| s.trim().to_string()).collect(),
            None => (1..=n).map(|i| format!("channel {i}")).collect(),
        };
        let mut expected = vec!["R".to_string()];
        expected.extend((0..n).map(|i| element_name("V", n, i, i)));
        expected.extend(strict_upper_triangle(n).map(|(i, j)| element_name("V", n, i, j)));
        if table.header != expected {
            let missing: Vec<&String> = expected.iter().filter(|c| !table.header.contains(c)).collect();
            return Err(Error::Parse {
                line: table.header_line,
                message: if missing.is_empty() {
                    format!("expected header {}", expected.join(","))
                } else {
                    format!("missing columns {}", missing.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(","))
                },
            });
        }
        if table.rows.len() < 2 {
            return Err(Error::Parse {
                line: table.header_line,
                message: "at least two data rows are required".into(),
            });
        }
        let cols = (0..n).map(|i| (i, i)).chain(strict_upper_triangle(n)).collect::<Vec<_>>();
        let mut r = Vec::with_capacity(table.rows.len());
        let mut v = Vec::with_capacity(table.rows.len());
        for (row_idx, (line, row)) in table.rows.iter().enumerate() {
            let x: T = lit(row[0]);
            if let Some(&prev) = r.last() {
                if !(x > prev) {
                    return Err(Error::Parse {
                        line: *line,
                        message: format!("R not strictly increasing at data row {}", row_idx + 1),
                    });
                }
            }
            let mut mat = DMatrix::zeros(n, n);
            for (&(i, j), &val) in cols.iter().zip(&row[1..]) {
                mat[(i, j)] = lit::<T>(val);
                mat[(j, i)] = lit::<T>(val);
            }
            r.push(x);
            v.push(mat);
        }
        Self::new(units, labels, r, v)
    }

    pub fn to_file(&self) -> ChannelFile {
        ChannelFile {
            units: self.units,
            labels: self.labels.clone(),
            r: self.r.iter().map(|&x| to_f64(x)).collect(),
            v: self
                .v
                .iter()
                .map(|m| (0..m.nrows()).map(|i| m.row(i).iter().map(|&x| to_f64(x)).collect()).collect())
                .collect(),
        }
    }

    pub fn from_file(f: &ChannelFile) -> Result<Self> {
        let n = f.labels.len();
        let mut v = Vec::with_capacity(f.v.len());
        for (k, rows) in f.v.iter().enumerate() {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::InvalidInput(format!("matrix at node {k} is not {n}×{n}")));
            }
            v.push(DMatrix::from_fn(n, n, |i, j| lit::<T>(rows[i][j])));
        }
        Self::new(f.units, f.labels.clone(), f.r.iter().map(|&x| lit(x)).collect(), v)
    }
}

/// JSON encoding of [`ChannelData`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFile {
    pub units: UnitSystem,
    pub labels: Vec<String>,
    #[serde(rename = "R")]
    pub r: Vec<f64>,
    #[serde(rename = "V")]
    pub v: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelFormat {
    Csv,
    Json,
}

impl ChannelFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(ChannelFormat::Csv),
            "json" => Some(ChannelFormat::Json),
            _ => None,
        }
    }
}

/// Read and validate channel data; the format follows the extension unless
/// given.
pub fn load_channels<T: Real>(path: &Path, format: Option<ChannelFormat>) -> Result<ChannelData<T>> {
    let format = format
        .or_else(|| ChannelFormat::from_path(path))
        .ok_or_else(|| Error::Config(format!("{}: cannot infer channel format", path.display())))?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_channels(&text, format)
}

pub fn parse_channels<T: Real>(text: &str, format: ChannelFormat) -> Result<ChannelData<T>> {
    match format {
        ChannelFormat::Csv => ChannelData::read_csv(text.as_bytes()),
        ChannelFormat::Json => ChannelData::from_file(&serde_json::from_str(text)?),
    }
}

/// Straight-line classical path `R(t) = √(b² + v²t²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Trajectory<T: Real = f64> {
    pub b: T,
    pub v: T,
    pub t_i: T,
    pub t_f: T,
}

impl<T: Real> Trajectory<T> {
    pub fn new(b: T, v: T, t_i: T, t_f: T) -> Result<Self> {
        let t = Trajectory { b, v, t_i, t_f };
        t.check()?;
        Ok(t)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.b >= T::zero()) || !self.b.is_finite_value() {
            return Err(Error::InvalidInput("impact parameter must be finite and ≥ 0".into()));
        }
        if !(self.v > T::zero()) || !self.v.is_finite_value() {
            return Err(Error::InvalidInput("velocity must be finite and positive".into()));
        }
        if !(self.t_i < self.t_f) {
            return Err(Error::InvalidInput("trajectory needs t_i < t_f".into()));
        }
        Ok(())
    }

    pub fn distance(&self, t: T) -> T {
        (self.b * self.b + self.v * self.v * t * t).sqrt()
    }

    /// `nodes` equally spaced times on `[t_i, t_f]`, computed about the
    /// midpoint so a window symmetric about 0 yields an exactly symmetric grid.
    pub fn grid(&self, nodes: usize) -> Vec<T> {
        let nodes = nodes.max(2);
        let half = lit::<T>(0.5);
        let mid = (self.t_i + self.t_f) * half;
        let span = (self.t_f - self.t_i) * half;
        let d = lit::<T>((nodes - 1) as f64);
        (0..nodes)
            .map(|k| {
                if k == 0 {
                    self.t_i
                } else if k == nodes - 1 {
                    self.t_f
                } else {
                    mid + span * lit::<T>(2.0 * k as f64 - (nodes - 1) as f64) / d
                }
            })
            .collect()
    }

    pub fn with_b(&self, b: T) -> Self {
        Trajectory { b, ..*self }
    }
}

/// A collision target with the nodes where `R` exceeded the data range and
/// asymptotic values were substituted.
#[derive(Debug, Clone)]
pub struct CollisionTarget<T: Real = f64> {
    pub hamiltonian: TargetHamiltonian<T>,
    pub extended: Vec<usize>,
}

/// `H_s(t_k) = V(R(t_k))` on `grid`.
pub fn build_collision_hamiltonian<T: Real>(
    ch: &ChannelData<T>,
    traj: &Trajectory<T>,
    grid: &[T],
    beyond: Beyond,
) -> Result<CollisionTarget<T>> {
    traj.check()?;
    let mut extended = Vec::new();
    let mut mats = Vec::with_capacity(grid.len());
    for (k, &t) in grid.iter().enumerate() {
        let r = traj.distance(t);
        if r > ch.r_max() {
            extended.push(k);
        }
        mats.push(ch.at(r, beyond)?);
    }
    Ok(CollisionTarget {
        hamiltonian: TargetHamiltonian::new(ch.units(), grid.to_vec(), mats)?,
        extended,
    })
}

/// `σ = 2π ∫ P(b) b db` by the trapezoidal rule.
pub fn cross_section<T: Real>(b: &[T], p: &[T]) -> Result<T> {
    Ok(*cross_section_partial(b, p)?.last().expect("non-empty"))
}

/// Running trapezoidal sums of `2π P(b) b`; element `k` integrates up to
/// `b[k]`.
pub fn cross_section_partial<T: Real>(b: &[T], p: &[T]) -> Result<Vec<T>> {
    if b.is_empty() {
        return Err(Error::InvalidInput("empty impact-parameter grid".into()));
    }
    if b.len() != p.len() {
        return Err(Error::DimensionMismatch { expected: b.len(), found: p.len() });
    }
    if !(b[0] >= T::zero()) {
        return Err(Error::InvalidInput("impact parameters must be ≥ 0".into()));
    }
    if let Some(k) = (1..b.len()).find(|&k| !(b[k] > b[k - 1])) {
        return Err(Error::InvalidInput(format!("impact-parameter grid not increasing at node {k}")));
    }
    let tol = lit::<T>(1e-9);
    if let Some(k) = p.iter().position(|&x| !(x >= -tol && x <= T::one() + tol)) {
        return Err(Error::InvalidInput(format!("probability outside [0, 1] at node {k}")));
    }
    let pi = lit::<T>(std::f64::consts::PI);
    let mut acc = T::zero();
    let mut out = Vec::with_capacity(b.len());
    out.push(acc);
    for k in 1..b.len() {
        acc += pi * (b[k] - b[k - 1]) * (p[k] * b[k] + p[k - 1] * b[k - 1]);
        out.push(acc);
    }
    Ok(out)
}

/// `V_ij(R) = asymptote + a·exp(−β R)` for one element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    pub i: usize,
    pub j: usize,
    pub a: f64,
    pub beta: f64,
}

/// A model potential built from exponential terms on top of diagonal
/// asymptotes. Indices in `terms` are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPotential {
    pub note: String,
    pub units: UnitSystem,
    pub labels: Vec<String>,
    pub asymptotes: Vec<f64>,
    pub terms: Vec<ExpTerm>,
    pub r_min: f64,
    pub r_max: f64,
    pub r_nodes: usize,
}

pub const STAND_IN_PARAMETERS: &str = include_str!("../data/standin_nahe.json");
pub const STAND_IN_CSV: &str = include_str!("../data/standin_nahe.csv");

impl ModelPotential {
    pub fn stand_in() -> Self {
        serde_json::from_str(STAND_IN_PARAMETERS).expect("bundled parameters parse")
    }

    pub fn dim(&self) -> usize {
        self.asymptotes.len()
    }

    pub fn eval<T: Real>(&self, r: T) -> DMatrix<T> {
        let n = self.dim();
        let mut m = DMatrix::from_fn(n, n, |i, j| if i == j { lit::<T>(self.asymptotes[i]) } else { T::zero() });
        for t in &self.terms {
            let x = lit::<T>(t.a) * (-lit::<T>(t.beta) * r).exp();
            m[(t.i - 1, t.j - 1)] += x;
            if t.i != t.j {
                m[(t.j - 1, t.i - 1)] += x;
            }
        }
        m
    }

    pub fn r_grid<T: Real>(&self) -> Vec<T> {
        let d = (self.r_max - self.r_min) / (self.r_nodes - 1) as f64;
        (0..self.r_nodes)
            .map(|k| lit(if k == self.r_nodes - 1 { self.r_max } else { self.r_min + d * k as f64 }))
            .collect()
    }

    pub fn channels<T: Real>(&self) -> Result<ChannelData<T>> {
        for t in &self.terms {
            if t.i == 0 || t.j == 0 || t.i > self.dim() || t.j > self.dim() {
                return Err(Error::Config(format!("term index ({}, {}) out of range", t.i, t.j)));
            }
        }
        ChannelData::from_fn(self.units, self.labels.clone(), self.r_grid(), |r| self.eval(r))
    }
}

/// The bundled three-channel stand-in data (model potentials, not ab initio).
pub fn stand_in_channels<T: Real>() -> ChannelData<T> {
    ChannelData::read_csv(STAND_IN_CSV.as_bytes()).expect("bundled channel data is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn two_channel(extent: f64) -> ChannelData<f64> {
        let r: Vec<f64> = (0..=100).map(|k| k as f64 * extent / 100.0).collect();
        ChannelData::from_fn(UnitSystem::Atomic, vec!["a".into(), "b".into()], r, |x| {
            dmatrix![0.0, 0.1 * (-x).exp(); 0.1 * (-x).exp(), 0.05]
        })
        .unwrap()
    }

    #[test]
    fn distance_examples() {
        let t = Trajectory::new(0.5, 1.0, -40.0, 40.0).unwrap();
        assert_eq!(t.distance(0.0), 0.5);
        assert_eq!(Trajectory::new(0.0, 1.0, -1.0, 5.0).unwrap().distance(3.0), 3.0);
        for x in [0.1, 1.7, 12.3, 39.0] {
            assert_eq!(t.distance(-x), t.distance(x));
        }
    }

    #[test]
    fn trajectory_validation() {
        assert!(Trajectory::new(0.5, 0.0, -1.0, 1.0).is_err());
        assert!(Trajectory::new(-0.5, 1.0, -1.0, 1.0).is_err());
        assert!(Trajectory::new(0.5, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn symmetric_grid_gives_even_hamiltonian() {
        let ch = two_channel(50.0);
        let traj = Trajectory::new(0.5, 1.0, -40.0, 40.0).unwrap();
        let grid = traj.grid(801);
        let n = grid.len();
        for k in 0..n {
            assert_eq!(grid[k], -grid[n - 1 - k]);
        }
        let h = build_collision_hamiltonian(&ch, &traj, &grid, Beyond::Error).unwrap().hamiltonian;
        for k in 0..n {
            assert_eq!(h.matrices()[k], h.matrices()[n - 1 - k]);
        }
    }

    #[test]
    fn range_handling() {
        let ch = two_channel(10.0);
        let traj = Trajectory::new(0.5, 1.0, -40.0, 40.0).unwrap();
        let grid = traj.grid(81);
        assert!(matches!(
            build_collision_hamiltonian(&ch, &traj, &grid, Beyond::Error),
            Err(Error::OutOfRange { .. })
        ));
        let built = build_collision_hamiltonian(&ch, &traj, &grid, Beyond::Extend).unwrap();
        assert!(!built.extended.is_empty());
        let last = built.hamiltonian.matrices().last().unwrap();
        assert_eq!(last, ch.potentials().last().unwrap());

        let shifted = ChannelData::from_fn(UnitSystem::Atomic, vec!["a".into(), "b".into()], vec![1.0, 2.0, 60.0], |_| {
            DMatrix::zeros(2, 2)
        })
        .unwrap();
        assert!(build_collision_hamiltonian(&shifted, &traj, &grid, Beyond::Extend).is_err());
    }

    #[test]
    fn interpolation_is_exact_at_nodes_and_linear_between() {
        let ch = two_channel(10.0);
        let at = ch.at(0.2, Beyond::Error).unwrap();
        assert_eq!(at, ch.potentials()[2]);
        let mid = ch.at(0.25, Beyond::Error).unwrap();
        let expect = (&ch.potentials()[2] + &ch.potentials()[3]) * 0.5;
        assert!((mid - expect).norm() < 1e-16);
    }

    #[test]
    fn cross_section_oracles() {
        let b: Vec<f64> = (0..200).map(|k| 6.0 * k as f64 / 199.0).collect();
        assert_eq!(cross_section(&b, &vec![0.0; 200]).unwrap(), 0.0);
        let disk = cross_section(&b, &vec![1.0; 200]).unwrap();
        assert!((disk - std::f64::consts::PI * 36.0).abs() < 1e-3);
        let p: Vec<f64> = b.iter().map(|x| (-x * x).exp()).collect();
        let s = cross_section(&b, &p).unwrap();
        assert!((s - std::f64::consts::PI).abs() < 1e-3, "{s}");
        assert!(cross_section::<f64>(&[], &[]).is_err());
    }

    #[test]
    fn disk_is_exact_for_linear_integrand() {
        // 2π·b is linear, so the trapezoid rule is exact
        let b = [0.0, 0.3, 1.1, 2.0];
        let s = cross_section(&b, &[1.0; 4]).unwrap();
        assert!((s - std::f64::consts::PI * 4.0).abs() < 1e-14);
    }

    #[test]
    fn csv_json_round_trip() {
        let ch = stand_in_channels::<f64>();
        let mut buf = Vec::new();
        ch.write_csv(&mut buf).unwrap();
        assert_eq!(ChannelData::<f64>::read_csv(buf.as_slice()).unwrap(), ch);
        let json = serde_json::to_string(&ch.to_file()).unwrap();
        assert_eq!(parse_channels::<f64>(&json, ChannelFormat::Json).unwrap(), ch);
    }

    #[test]
    fn descending_r_names_the_row() {
        let text = "# units: atomic\nR,V11,V22,V12\n0.0,0,1,0.1\n1.0,0,1,0.1\n0.5,0,1,0.1\n";
        match ChannelData::<f64>::read_csv(text.as_bytes()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 5);
                assert!(message.contains("row 3"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_reported() {
        let text = "# units: atomic\nR,V11,V22,V33,V12,V13\n0.0,0,1,1,0.1,0.1\n";
        let err = ChannelData::<f64>::read_csv(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn stand_in_fixture_matches_its_parameters() {
        let model = ModelPotential::stand_in();
        let generated = model.channels::<f64>().unwrap();
        let bundled = stand_in_channels::<f64>();
        assert_eq!(bundled.dim(), 3);
        assert_eq!(generated, bundled);
        bundled.check_decoupling(DECOUPLING_TOL).unwrap();
    }

    #[test]
    fn stand_in_shape() {
        let ch = stand_in_channels::<f64>();
        let traj = Trajectory::new(0.5, 1.0, -40.0, 40.0).unwrap();
        let grid = traj.grid(801);
        let h = build_collision_hamiltonian(&ch, &traj, &grid, Beyond::Error).unwrap().hamiltonian;
        let mid = grid.len() / 2;
        assert_eq!(grid[mid], 0.0);
        let coupling = |k: usize| {
            let m = &h.matrices()[k];
            m[(0, 1)].abs() + m[(0, 2)].abs() + m[(1, 2)].abs()
        };
        let splitting = |k: usize| {
            let m = &h.matrices()[k];
            let d = [m[(0, 0)], m[(1, 1)], m[(2, 2)]];
            d.iter().cloned().fold(f64::MIN, f64::max) - d.iter().cloned().fold(f64::MAX, f64::min)
        };
        for k in 0..grid.len() {
            assert!(coupling(k) <= coupling(mid));
            assert!(splitting(k) <= splitting(mid));
        }
    }

    #[test]
    fn regenerate_fixture() {
        // SESIM_REGEN=1 cargo test -p sesim regenerate_fixture
        if std::env::var_os("SESIM_REGEN").is_none() {
            return;
        }
        let ch = ModelPotential::stand_in().channels::<f64>().unwrap();
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/standin_nahe.csv");
        let mut f = std::fs::File::create(path).unwrap();
        ch.write_csv(&mut f).unwrap();
    }
}
