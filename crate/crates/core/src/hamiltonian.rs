//! The simulated system's real, time-dependent Hamiltonian sampled on a grid.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{lit, to_f64, Real};
use crate::units::UnitSystem;

/// A content problem found by [`TargetHamiltonian::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NonMonotoneGrid { index: usize },
    NonFiniteTime { index: usize },
    Asymmetric { node: usize, row: usize, col: usize },
    NonFinite { node: usize, row: usize, col: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::NonMonotoneGrid { index } => {
                write!(f, "non-monotone grid at node {index}")
            }
            Violation::NonFiniteTime { index } => write!(f, "non-finite time at node {index}"),
            Violation::Asymmetric { node, row, col } => {
                write!(f, "asymmetric at ({row},{col}) in node {node}")
            }
            Violation::NonFinite { node, row, col } => {
                write!(f, "non-finite entry at ({row},{col}) in node {node}")
            }
        }
    }
}

/// Per-level energies `E_i = H_ii + α Σ_{j≠i} H_ij` with their maximum and
/// gaps `ΔE_i = E_max − E_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyProfile<T: Real = f64> {
    pub energies: Vec<T>,
    pub max: T,
    pub gaps: Vec<T>,
}

impl<T: Real> EnergyProfile<T> {
    pub fn of(h: &DMatrix<T>, alpha: T) -> Self {
        let n = h.nrows();
        let energies: Vec<T> = (0..n)
            .map(|i| {
                let off = (0..n)
                    .filter(|&j| j != i)
                    .fold(T::zero(), |acc, j| acc + h[(i, j)]);
                h[(i, i)] + alpha * off
            })
            .collect();
        let max = energies
            .iter()
            .copied()
            .fold(energies[0], |m, e| if e > m { e } else { m });
        let gaps = energies.iter().map(|&e| max - e).collect();
        EnergyProfile {
            energies,
            max,
            gaps,
        }
    }
}

/// Real symmetric `n×n` matrices on a strictly increasing time grid,
/// interpolated element-wise piecewise-linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetHamiltonian<T: Real = f64> {
    units: UnitSystem,
    times: Vec<T>,
    matrices: Vec<DMatrix<T>>,
}

impl<T: Real> TargetHamiltonian<T> {
    /// Build and fully validate.
    pub fn new(units: UnitSystem, times: Vec<T>, matrices: Vec<DMatrix<T>>) -> Result<Self> {
        let h = Self::from_parts(units, times, matrices)?;
        h.ensure_valid()?;
        Ok(h)
    }

    /// Structural checks only (shape, `n ≥ 2`, at least two nodes). Content is
    /// left to [`validate`](Self::validate).
    pub fn from_parts(
        units: UnitSystem,
        times: Vec<T>,
        matrices: Vec<DMatrix<T>>,
    ) -> Result<Self> {
        if times.len() != matrices.len() {
            return Err(Error::InvalidInput(format!(
                "{} time nodes but {} matrices",
                times.len(),
                matrices.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::InvalidInput(
                "at least two time nodes are required".into(),
            ));
        }
        let n = matrices[0].nrows();
        if n < 2 {
            return Err(Error::InvalidInput(
                "dimension must be at least 2; the protocol needs off-diagonal couplings".into(),
            ));
        }
        for m in &matrices {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: m.nrows().max(m.ncols()),
                });
            }
        }
        Ok(TargetHamiltonian {
            units,
            times,
            matrices,
        })
    }

    /// Sample `f` on `grid`.
    pub fn from_fn<F>(units: UnitSystem, grid: Vec<T>, mut f: F) -> Result<Self>
    where
        F: FnMut(T) -> DMatrix<T>,
    {
        let matrices = grid.iter().map(|&t| f(t)).collect();
        Self::new(units, grid, matrices)
    }

    /// A time-independent Hamiltonian on `[t0, t1]`.
    pub fn constant(units: UnitSystem, h: DMatrix<T>, t0: T, t1: T) -> Result<Self> {
        Self::new(units, vec![t0, t1], vec![h.clone(), h])
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn units(&self) -> UnitSystem {
        self.units
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn matrices(&self) -> &[DMatrix<T>] {
        &self.matrices
    }

    pub fn t_start(&self) -> T {
        self.times[0]
    }

    pub fn t_end(&self) -> T {
        self.times[self.times.len() - 1]
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (k, &t) in self.times.iter().enumerate() {
            if !t.is_finite_value() {
                out.push(Violation::NonFiniteTime { index: k });
            }
        }
        for k in 1..self.times.len() {
            if !(self.times[k] > self.times[k - 1]) {
                out.push(Violation::NonMonotoneGrid { index: k });
            }
        }
        let n = self.dim();
        for (node, m) in self.matrices.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    if !m[(i, j)].is_finite_value() {
                        out.push(Violation::NonFinite {
                            node,
                            row: i,
                            col: j,
                        });
                    } else if j > i && m[(i, j)] != m[(j, i)] {
                        out.push(Violation::Asymmetric {
                            node,
                            row: i,
                            col: j,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidHamiltonian(v))
        }
    }

    /// Index `k` of the segment `[t_k, t_{k+1}]` containing `t`.
    fn segment_of(&self, t: T) -> Result<usize> {
        let (lo, hi) = (self.t_start(), self.t_end());
        if !(t >= lo && t <= hi) {
            return Err(Error::OutOfRange {
                t: to_f64(t),
                lo: to_f64(lo),
                hi: to_f64(hi),
            });
        }
        let k = self.times.partition_point(|&x| x <= t);
        Ok(k.saturating_sub(1).min(self.times.len() - 2))
    }

    /// Element-wise linear interpolation; exact at grid nodes.
    pub fn sample(&self, t: T) -> Result<DMatrix<T>> {
        let k = self.segment_of(t)?;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        if t == t0 {
            return Ok(self.matrices[k].clone());
        }
        if t == t1 {
            return Ok(self.matrices[k + 1].clone());
        }
        let w = (t - t0) / (t1 - t0);
        let (a, b) = (&self.matrices[k], &self.matrices[k + 1]);
        Ok(a.zip_map(b, |x, y| x + (y - x) * w))
    }

    /// Finite-difference `dH/dt` on segment `k`. Coarse grids make this a weak
    /// proxy for the true derivative.
    pub fn segment_slope(&self, k: usize) -> DMatrix<T> {
        let dt = self.times[k + 1] - self.times[k];
        (&self.matrices[k + 1] - &self.matrices[k]) / dt
    }

    pub fn simulated_energies(&self, alpha: T, t: T) -> Result<EnergyProfile<T>> {
        Ok(EnergyProfile::of(&self.sample(t)?, alpha))
    }

    /// Interpolate onto a new grid inside the current range.
    pub fn resample(&self, grid: &[T]) -> Result<Self> {
        let matrices = grid
            .iter()
            .map(|&t| self.sample(t))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.units, grid.to_vec(), matrices)
    }

    /// Multiply every energy by `s`.
    pub fn scaled(&self, s: T) -> Self {
        TargetHamiltonian {
            units: self.units,
            times: self.times.clone(),
            matrices: self.matrices.iter().map(|m| m * s).collect(),
        }
    }

    /// Express in canonical units (rad/ns, ns). Dimensionless data is returned
    /// unchanged.
    pub fn to_canonical(&self) -> Self {
        match self.units {
            UnitSystem::Dimensionless | UnitSystem::Laboratory => self.clone(),
            u => {
                let ef: T = u.energy_factor();
                let tf: T = u.time_factor();
                TargetHamiltonian {
                    units: UnitSystem::Laboratory,
                    times: self.times.iter().map(|&t| t * tf).collect(),
                    matrices: self.matrices.iter().map(|m| m * ef).collect(),
                }
            }
        }
    }

    // ---- serialization ------------------------------------------------------

    pub fn to_json(&self) -> HamiltonianFile {
        HamiltonianFile {
            n: self.dim(),
            unit: self.units,
            times: self.times.iter().map(|&t| to_f64(t)).collect(),
            matrices: self
                .matrices
                .iter()
                .map(|m| {
                    (0..m.nrows())
                        .map(|i| (0..m.ncols()).map(|j| to_f64(m[(i, j)])).collect())
                        .collect()
                })
                .collect(),
        }
    }

    /// Structural checks only; call [`validate`](Self::validate) on the result.
    pub fn from_json(file: &HamiltonianFile) -> Result<Self> {
        let n = file.n;
        let mut matrices = Vec::with_capacity(file.matrices.len());
        for (k, rows) in file.matrices.iter().enumerate() {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::InvalidInput(format!(
                    "matrix {k} is not {n}x{n}"
                )));
            }
            matrices.push(DMatrix::from_fn(n, n, |i, j| lit::<T>(rows[i][j])));
        }
        let times = file.times.iter().map(|&t| lit(t)).collect();
        Self::from_parts(file.unit, times, matrices)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&serde_json::from_str(&text)?)
    }

    /// CSV with header `t,H11,H12,...,H1n,H22,...,Hnn` (upper triangle, row
    /// major). An optional `# unit: <system>` comment precedes the header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.dim();
        out.write_all(format!("# unit: {}\n", self.units.name()).as_bytes())
            .map_err(|e| Error::io("<csv>", e))?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(upper_triangle(n).map(|(i, j)| element_name("H", n, i, j)));
        w.write_record(&header)?;
        for (t, m) in self.times.iter().zip(&self.matrices) {
            let mut rec = vec![fmt_num(*t)];
            rec.extend(upper_triangle(n).map(|(i, j)| fmt_num(m[(i, j)])));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let table = read_table(input)?;
        let units = match table.meta("unit") {
            Some(u) => UnitSystem::parse(u)
                .ok_or_else(|| Error::Config(format!("unknown unit system '{u}'")))?,
            None => UnitSystem::Dimensionless,
        };
        let m = table.header.len().saturating_sub(1);
        let n = triangle_dim(m).ok_or_else(|| Error::Parse {
            line: table.header_line,
            message: format!("{m} matrix columns is not an upper triangle"),
        })?;
        let expected: Vec<String> = std::iter::once("t".to_string())
            .chain(upper_triangle(n).map(|(i, j)| element_name("H", n, i, j)))
            .collect();
        if table.header != expected {
            return Err(Error::Parse {
                line: table.header_line,
                message: format!("expected header {}", expected.join(",")),
            });
        }
        let mut times = Vec::new();
        let mut matrices = Vec::new();
        for (line, row) in &table.rows {
            times.push(lit(row[0]));
            let mut mat = DMatrix::zeros(n, n);
            for ((i, j), &v) in upper_triangle(n).zip(&row[1..]) {
                mat[(i, j)] = lit::<T>(v);
                mat[(j, i)] = lit::<T>(v);
            }
            matrices.push(mat);
            if times.len() >= 2 && !(times[times.len() - 1] > times[times.len() - 2]) {
                return Err(Error::Parse {
                    line: *line,
                    message: "time column is not strictly increasing".into(),
                });
            }
        }
        Self::new(units, times, matrices)
    }
}

/// JSON encoding `{n, unit, times, matrices}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianFile {
    pub n: usize,
    pub unit: UnitSystem,
    pub times: Vec<f64>,
    pub matrices: Vec<Vec<Vec<f64>>>,
}

pub(crate) fn upper_triangle(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i..n).map(move |j| (i, j)))
}

pub(crate) fn strict_upper_triangle(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

fn triangle_dim(m: usize) -> Option<usize> {
    (1..=64).find(|n| n * (n + 1) / 2 == m)
}

/// `H12` for `n < 10`, `H1_12` otherwise (1-based).
pub(crate) fn element_name(prefix: &str, n: usize, i: usize, j: usize) -> String {
    if n < 10 {
        format!("{prefix}{}{}", i + 1, j + 1)
    } else {
        format!("{prefix}{}_{}", i + 1, j + 1)
    }
}

pub(crate) fn fmt_num<T: Real>(x: T) -> String {
    // shortest round-trip representation
    format!("{}", to_f64(x))
}

/// A numeric CSV table with `# key: value` metadata comments.
pub(crate) struct Table {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub header_line: usize,
    pub rows: Vec<(usize, Vec<f64>)>,
}

impl Table {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

pub(crate) fn read_table<R: Read>(mut input: R) -> Result<Table> {
    let mut text = String::new();
    input
        .read_to_string(&mut text)
        .map_err(|e| Error::io("<csv>", e))?;
    let mut meta = Vec::new();
    let mut header: Option<(usize, Vec<String>)> = None;
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            if let Some((k, v)) = c.split_once(':') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match &header {
            None => header = Some((line_no, fields.iter().map(|s| s.to_string()).collect())),
            Some((_, h)) => {
                if fields.len() != h.len() {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("expected {} columns, found {}", h.len(), fields.len()),
                    });
                }
                let vals = fields
                    .iter()
                    .map(|f| {
                        f.parse::<f64>().map_err(|_| Error::Parse {
                            line: line_no,
                            message: format!("cannot parse '{f}' as a number"),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                rows.push((line_no, vals));
            }
        }
    }
    let (header_line, header) = header.ok_or(Error::Parse {
        line: 0,
        message: "missing header row".into(),
    })?;
    Ok(Table {
        meta,
        header,
        header_line,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn sym3(k: f64) -> DMatrix<f64> {
        dmatrix![1.0 + k, 0.5, -0.25; 0.5, 2.0, k; -0.25, k, 3.0 - k]
    }

    fn grid3() -> TargetHamiltonian {
        TargetHamiltonian::from_fn(UnitSystem::Dimensionless, vec![0.0, 1.0, 2.5, 4.0], sym3)
            .unwrap()
    }

    #[test]
    fn valid_grid_has_empty_report() {
        assert!(grid3().validate().is_empty());
    }

    #[test]
    fn repeated_time_is_reported() {
        let h = TargetHamiltonian::from_parts(
            UnitSystem::Dimensionless,
            vec![0.0, 0.0, 1.0],
            vec![sym3(0.0), sym3(1.0), sym3(2.0)],
        )
        .unwrap();
        let v = h.validate();
        assert_eq!(v, vec![Violation::NonMonotoneGrid { index: 1 }]);
        assert!(v[0].to_string().contains("non-monotone grid"));
    }

    #[test]
    fn asymmetry_is_reported() {
        let mut m = sym3(0.0);
        m[(0, 1)] = 0.75;
        let h = TargetHamiltonian::from_parts(
            UnitSystem::Dimensionless,
            vec![0.0, 1.0],
            vec![m, sym3(1.0)],
        )
        .unwrap();
        let v = h.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].to_string(), "asymmetric at (0,1) in node 0");
        assert!(matches!(
            TargetHamiltonian::new(h.units(), h.times().to_vec(), h.matrices().to_vec()),
            Err(Error::InvalidHamiltonian(_))
        ));
    }

    #[test]
    fn non_finite_is_reported() {
        let mut m = sym3(0.0);
        m[(2, 2)] = f64::NAN;
        let h = TargetHamiltonian::from_parts(UnitSystem::Dimensionless, vec![0.0, 1.0], vec![m.clone(), m])
            .unwrap();
        assert_eq!(h.validate().len(), 2);
    }

    #[test]
    fn single_level_is_rejected() {
        let m = DMatrix::from_element(1, 1, 1.0);
        assert!(TargetHamiltonian::new(UnitSystem::Dimensionless, vec![0.0, 1.0], vec![m.clone(), m]).is_err());
    }

    #[test]
    fn sample_is_exact_at_nodes() {
        let h = grid3();
        for (t, m) in h.times().iter().zip(h.matrices()) {
            assert_eq!(&h.sample(*t).unwrap(), m);
        }
    }

    #[test]
    fn sample_midpoint_is_linear() {
        let m = dmatrix![0.3, -1.0; -1.0, 2.0];
        let h = TargetHamiltonian::new(
            UnitSystem::Dimensionless,
            vec![0.0, 2.0],
            vec![DMatrix::zeros(2, 2), &m * 2.0],
        )
        .unwrap();
        assert_eq!(h.sample(1.0).unwrap(), m);
    }

    #[test]
    fn constant_field_is_constant() {
        let m = sym3(0.7);
        let h = TargetHamiltonian::constant(UnitSystem::Dimensionless, m.clone(), -1.0, 1.0).unwrap();
        for t in [-1.0, -0.3, 0.0, 0.9, 1.0] {
            assert_eq!(h.sample(t).unwrap(), m);
        }
    }

    #[test]
    fn sample_out_of_range() {
        let h = grid3();
        assert!(matches!(h.sample(-0.1), Err(Error::OutOfRange { .. })));
        assert!(matches!(h.sample(4.1), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn sample_is_continuous_across_nodes() {
        let h = grid3();
        let eps = 1e-9;
        let a = h.sample(1.0 - eps).unwrap();
        let b = h.sample(1.0 + eps).unwrap();
        assert!((a - b).amax() < 1e-8);
    }

    #[test]
    fn energies_alpha_zero_is_diagonal() {
        let h = TargetHamiltonian::constant(
            UnitSystem::Dimensionless,
            DMatrix::from_diagonal(&nalgebra::dvector![1.0, 2.0, 3.0]),
            0.0,
            1.0,
        )
        .unwrap();
        let e = h.simulated_energies(0.0, 0.5).unwrap();
        assert_eq!(e.energies, vec![1.0, 2.0, 3.0]);
        assert_eq!(e.gaps, vec![2.0, 1.0, 0.0]);
        assert_eq!(e.max, 3.0);
    }

    #[test]
    fn energies_two_level_alpha_one() {
        let e = EnergyProfile::of(&dmatrix![0.0, 1.0; 1.0, 0.0], 1.0);
        assert_eq!(e.energies, vec![1.0, 1.0]);
        assert_eq!(e.gaps, vec![0.0, 0.0]);
    }

    #[test]
    fn energies_alpha_zero_matches_sample_diagonal() {
        let h = grid3();
        for t in [0.0, 0.4, 1.7, 4.0] {
            let m = h.sample(t).unwrap();
            let e = h.simulated_energies(0.0, t).unwrap();
            for i in 0..3 {
                assert_eq!(e.energies[i], m[(i, i)]);
            }
            assert!(e.gaps.iter().all(|&g| g >= 0.0));
            assert!(e.gaps.contains(&0.0));
        }
    }

    #[test]
    fn canonical_conversion() {
        let h = grid3();
        let atomic = TargetHamiltonian::from_parts(UnitSystem::Atomic, h.times().to_vec(), h.matrices().to_vec()).unwrap();
        let lab = atomic.to_canonical();
        assert_eq!(lab.units(), UnitSystem::Laboratory);
        assert!((lab.t_end() - 4.0 * crate::units::AU_TIME_NS).abs() < 1e-20);
        assert_eq!(h.to_canonical(), h);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let h = TargetHamiltonian::from_parts(UnitSystem::Atomic, grid3().times().to_vec(), grid3().matrices().to_vec()).unwrap();
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("t,H11,H12,H13,H22,H23,H33"));
        let back = TargetHamiltonian::<f64>::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, h);

        let bad = "t,H11,H12,H22\n0,1,2,3\n0,1,2,3\n";
        match TargetHamiltonian::<f64>::read_csv(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let bad = "t,H11,H12\n0,1,2\n";
        assert!(TargetHamiltonian::<f64>::read_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn json_round_trip() {
        let h = grid3();
        let text = serde_json::to_string(&h.to_json()).unwrap();
        let back = TargetHamiltonian::<f64>::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, h);
    }
}
