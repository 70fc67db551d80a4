//! Transition probabilities, rescaled-time fidelity and leakage.

use std::io::Write;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::circuit::{excitation_index, excitation_weight};
use crate::error::{Error, Result};
use crate::hamiltonian::fmt_num;
use crate::num::{lit, to_f64, Real};
use crate::propagator::{unitarity_defect, CMatrix};

/// `P_si = |<i|U|s>|²` for every `i`. `U` must be unitary to `tol`.
pub fn transition_probabilities<T: Real>(u: &CMatrix<T>, source: usize, tol: T) -> Result<Vec<T>> {
    if source >= u.ncols() {
        return Err(Error::DimensionMismatch {
            expected: u.ncols(),
            found: source,
        });
    }
    let defect = unitarity_defect(u);
    if defect > tol {
        return Err(Error::NonUnitary {
            defect: to_f64(defect),
        });
    }
    Ok(column_probabilities(u, source))
}

/// Column probabilities without a unitarity audit (for projected blocks).
pub fn column_probabilities<T: Real>(u: &CMatrix<T>, source: usize) -> Vec<T> {
    u.column(source).iter().map(|c| c.norm_sqr()).collect()
}

/// `F = |<s|U_exact† U_sim|s>|²`. Phase-insensitive by construction.
pub fn fidelity<T: Real>(exact: &CMatrix<T>, sim: &CMatrix<T>, source: usize) -> Result<T> {
    if exact.nrows() != sim.nrows() || exact.ncols() != sim.ncols() {
        return Err(Error::DimensionMismatch {
            expected: exact.nrows(),
            found: sim.nrows(),
        });
    }
    if source >= exact.ncols() {
        return Err(Error::DimensionMismatch {
            expected: exact.ncols(),
            found: source,
        });
    }
    let overlap = exact
        .column(source)
        .iter()
        .zip(sim.column(source).iter())
        .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b);
    Ok(overlap.norm_sqr())
}

/// Population that left the single-excitation subspace, summed directly over
/// every computational state of weight ≠ 1. `u_qc` acts on `2^n` states.
pub fn leakage<T: Real>(u_qc: &CMatrix<T>, n: usize, source: usize) -> T {
    let col = u_qc.column(excitation_index(n, source));
    col.iter()
        .enumerate()
        .filter(|(b, _)| excitation_weight(*b) != 1)
        .fold(T::zero(), |acc, (_, c)| acc + c.norm_sqr())
}

/// `‖P U_qc |s>_n‖²`, the population remaining in the subspace.
pub fn retained<T: Real>(u_qc: &CMatrix<T>, n: usize, source: usize) -> T {
    let col = u_qc.column(excitation_index(n, source));
    (0..n).fold(T::zero(), |acc, i| acc + col[excitation_index(n, i)].norm_sqr())
}

/// Not part of the state-overlap protocol: mean of [`fidelity`] over every
/// source index, a crude process-level summary.
pub fn mean_source_fidelity<T: Real>(exact: &CMatrix<T>, sim: &CMatrix<T>) -> Result<T> {
    let n = exact.ncols();
    let mut acc = T::zero();
    for s in 0..n {
        acc += fidelity(exact, sim, s)?;
    }
    Ok(acc / lit::<T>(n as f64))
}

/// Time series and summary of one emulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport<T: Real = f64> {
    pub source: usize,
    pub times: Vec<T>,
    pub t_qc: Vec<T>,
    pub exact: Vec<Vec<T>>,
    pub simulated: Vec<Vec<T>>,
    pub fidelity: Vec<T>,
    /// Fidelity of the ideal `H_n` evolution (no circuit effects).
    pub ideal_fidelity: Vec<T>,
    pub leakage: Vec<T>,
    pub exact_defect: Vec<T>,
    pub circuit_defect: Vec<T>,
    pub hardware_time: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub final_fidelity: f64,
    pub final_leakage: f64,
    pub hardware_time_ns: f64,
    pub final_ideal_fidelity: f64,
    pub min_fidelity: f64,
    pub max_leakage: f64,
    pub final_exact: Vec<f64>,
    pub final_simulated: Vec<f64>,
}

impl<T: Real> SimulationReport<T> {
    pub fn final_fidelity(&self) -> T {
        self.fidelity[self.fidelity.len() - 1]
    }

    pub fn final_leakage(&self) -> T {
        self.leakage[self.leakage.len() - 1]
    }

    pub fn min_fidelity(&self) -> T {
        self.fidelity.iter().copied().fold(T::one(), |a, b| a.min(b))
    }

    pub fn max_leakage(&self) -> T {
        self.leakage.iter().copied().fold(T::zero(), |a, b| a.max(b))
    }

    pub fn summary(&self) -> ReportSummary {
        let last = |v: &Vec<Vec<T>>| v[v.len() - 1].iter().map(|&x| to_f64(x)).collect();
        ReportSummary {
            final_fidelity: to_f64(self.final_fidelity()),
            final_leakage: to_f64(self.final_leakage()),
            hardware_time_ns: to_f64(self.hardware_time),
            final_ideal_fidelity: to_f64(self.ideal_fidelity[self.ideal_fidelity.len() - 1]),
            min_fidelity: to_f64(self.min_fidelity()),
            max_leakage: to_f64(self.max_leakage()),
            final_exact: last(&self.exact),
            final_simulated: last(&self.simulated),
        }
    }

    /// CSV `t,t_qc,P_exact_1..n,P_sim_1..n,F,L`, keeping every `stride`-th row
    /// plus the last.
    pub fn write_csv<W: Write>(&self, out: W, stride: usize) -> Result<()> {
        let n = self.exact[0].len();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string(), "t_qc".to_string()];
        header.extend((1..=n).map(|i| format!("P_exact_{i}")));
        header.extend((1..=n).map(|i| format!("P_sim_{i}")));
        header.push("F".into());
        header.push("L".into());
        w.write_record(&header)?;
        let last = self.times.len() - 1;
        for k in (0..self.times.len()).filter(|&k| k % stride.max(1) == 0 || k == last) {
            let mut rec = vec![fmt_num(self.times[k]), fmt_num(self.t_qc[k])];
            rec.extend(self.exact[k].iter().map(|&p| fmt_num(p)));
            rec.extend(self.simulated[k].iter().map(|&p| fmt_num(p)));
            rec.push(fmt_num(self.fidelity[k]));
            rec.push(fmt_num(self.leakage[k]));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}
