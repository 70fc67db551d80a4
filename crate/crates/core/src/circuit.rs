//! The qubit circuit: coupling tensor, full `2^n` Hamiltonian, the
//! single-excitation projector and the projected `n×n` Hamiltonian.
//!
//! Conventions: Pauli index order is `(0, x, y, z)` with `σ^0 = I`. Qubit 1
//! is the most significant bit of a computational basis index. A qubit bit of
//! 1 is the excited state, the `σ^z = −1` eigenstate of `−(ε/2)σ^z`.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{lit, to_f64, Real};
use crate::units::{mhz, UnitSystem};

/// Default cap on the number of qubits for dense `2^n` matrices.
pub const DEFAULT_MAX_QUBITS: usize = 12;

const I0: usize = 0;
const X: usize = 1;
const Y: usize = 2;
const Z: usize = 3;

/// Coefficients of `Φ̂ = c_x σ^x + c_z σ^z + c_0 σ^0` with `c_x = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiCoefficients<T: Real = f64> {
    c_z: T,
    c_0: T,
}

impl<T: Real> PhiCoefficients<T> {
    /// From the phase-operator matrix elements `φ_jk = <j|φ̂|k>`.
    pub fn from_matrix_elements(phi00: T, phi11: T, phi01: T) -> Result<Self> {
        if phi01 == T::zero() {
            return Err(Error::Singular("phi_01 must be non-zero"));
        }
        let two = lit::<T>(2.0);
        Ok(PhiCoefficients {
            c_z: (phi00 - phi11) / (two * phi01),
            c_0: (phi00 + phi11) / (two * phi01),
        })
    }

    /// `Φ̂ ≈ σ^x + 11 σ^0`, the flux-biased phase qubit in its usual window.
    pub fn phase_qubit_default() -> Self {
        Self::from_matrix_elements(lit(11.0), lit(11.0), T::one()).expect("non-zero phi_01")
    }

    pub fn c_x(&self) -> T {
        T::one()
    }

    pub fn c_z(&self) -> T {
        self.c_z
    }

    pub fn c_0(&self) -> T {
        self.c_0
    }

    /// `(c_0, c_x, c_y, c_z)` in Pauli order.
    pub fn as_pauli_vector(&self) -> [T; 4] {
        [self.c_0, T::one(), T::zero(), self.c_z]
    }
}

/// The dimensionless `J_{μν}`, symmetrized and normalized so that
/// `J_xx + J_yy = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingTensor<T: Real = f64> {
    j: [[T; 4]; 4],
    scale: T,
}

impl<T: Real> CouplingTensor<T> {
    /// Symmetrize `raw` and divide by `J_xx + J_yy`.
    pub fn new(raw: [[T; 4]; 4]) -> Result<Self> {
        let half = lit::<T>(0.5);
        let mut sym = raw;
        for (mu, row) in sym.iter_mut().enumerate() {
            for (nu, v) in row.iter_mut().enumerate() {
                *v = (raw[mu][nu] + raw[nu][mu]) * half;
            }
        }
        let scale = sym[X][X] + sym[Y][Y];
        if scale == T::zero() || !scale.is_finite_value() {
            return Err(Error::NotNormalizable);
        }
        for row in sym.iter_mut() {
            for v in row.iter_mut() {
                *v /= scale;
            }
        }
        Ok(CouplingTensor { j: sym, scale })
    }

    /// Expand `Φ̂ ⊗ Φ̂` into `J_{μν} = p_μ p_ν`.
    pub fn from_phi(p: &PhiCoefficients<T>) -> Result<Self> {
        let v = p.as_pauli_vector();
        let mut raw = [[T::zero(); 4]; 4];
        for mu in 0..4 {
            for nu in 0..4 {
                raw[mu][nu] = v[mu] * v[nu];
            }
        }
        Self::new(raw)
    }

    pub fn phase_qubit_default() -> Self {
        Self::from_phi(&PhiCoefficients::phase_qubit_default()).expect("c_x = 1")
    }

    /// Bare `σ^x ⊗ σ^x`.
    pub fn pure_xx() -> Self {
        let mut raw = [[T::zero(); 4]; 4];
        raw[X][X] = T::one();
        Self::new(raw).expect("J_xx = 1")
    }

    /// `(σ^x σ^x + σ^y σ^y)/2`, which conserves excitation number exactly.
    pub fn flip_flop() -> Self {
        let mut raw = [[T::zero(); 4]; 4];
        raw[X][X] = lit(0.5);
        raw[Y][Y] = lit(0.5);
        Self::new(raw).expect("J_xx + J_yy = 1")
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "phase-qubit-default" => Some(Self::phase_qubit_default()),
            "pure-xx" => Some(Self::pure_xx()),
            "flip-flop" | "xx+yy" => Some(Self::flip_flop()),
            _ => None,
        }
    }

    /// Normalized entry `J_{μν}`.
    pub fn get(&self, mu: usize, nu: usize) -> T {
        self.j[mu][nu]
    }

    pub fn entries(&self) -> &[[T; 4]; 4] {
        &self.j
    }

    /// The divisor that was applied during normalization.
    pub fn scale(&self) -> T {
        self.scale
    }

    /// Normalizing an already normalized tensor is the identity.
    pub fn renormalized(&self) -> Self {
        Self::new(self.j).expect("normalized tensor stays normalizable")
    }

    /// `α = 2 (J_z0 + J_zz)`.
    pub fn alpha(&self) -> T {
        lit::<T>(2.0) * (self.j[Z][I0] + self.j[Z][Z])
    }

    /// True when every weight-changing component vanishes, so `H_qc` is block
    /// diagonal in excitation number.
    pub fn conserves_excitations(&self, tol: T) -> bool {
        let j = &self.j;
        let zero = |x: T| x.abs() <= tol;
        let mixing = [
            j[I0][X], j[I0][Y], j[X][I0], j[Y][I0], j[Z][X], j[Z][Y], j[X][Z], j[Y][Z],
        ];
        mixing.iter().all(|&x| zero(x)) && zero(j[X][X] - j[Y][Y]) && zero(j[X][Y] + j[Y][X])
    }

    pub fn to_file(&self) -> TensorFile {
        TensorFile {
            j: self
                .j
                .iter()
                .map(|r| [to_f64(r[0]), to_f64(r[1]), to_f64(r[2]), to_f64(r[3])])
                .collect::<Vec<_>>()
                .try_into()
                .expect("four rows"),
            normalized: true,
        }
    }

    pub fn from_file(file: &TensorFile) -> Result<Self> {
        let mut raw = [[T::zero(); 4]; 4];
        for mu in 0..4 {
            for nu in 0..4 {
                raw[mu][nu] = lit(file.j[mu][nu]);
            }
        }
        if file.normalized {
            let s = to_f64(raw[X][X] + raw[Y][Y]);
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "tensor marked normalized but J_xx + J_yy = {s}"
                )));
            }
        }
        Self::new(raw)
    }
}

/// JSON form `{"J": 4×4, "normalized": bool}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorFile {
    #[serde(rename = "J")]
    pub j: [[f64; 4]; 4],
    pub normalized: bool,
}

/// Amplitude windows and slew-rate limits of the hardware controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct HardwareConstraints<T: Real = f64> {
    pub units: UnitSystem,
    pub g_max: T,
    pub eps_min: T,
    pub eps_max: T,
    /// Largest `|dg/dt_qc|`; infinity disables the check.
    #[serde(with = "unbounded")]
    pub vg_max: T,
    /// Largest `|dε/dt_qc|`; infinity disables the check.
    #[serde(with = "unbounded")]
    pub veps_max: T,
}

/// Infinite limits are written as `null`.
mod unbounded {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::num::Real;

    pub fn serialize<T: Real, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite_value() {
            Some(*v).serialize(s)
        } else {
            None::<T>.serialize(s)
        }
    }

    pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
        Ok(Option::<T>::deserialize(d)?.unwrap_or_else(T::infinity))
    }
}

impl<T: Real> HardwareConstraints<T> {
    pub fn new(units: UnitSystem, g_max: T, eps_min: T, eps_max: T, vg_max: T, veps_max: T) -> Result<Self> {
        let c = HardwareConstraints {
            units,
            g_max,
            eps_min,
            eps_max,
            vg_max,
            veps_max,
        };
        c.check()?;
        Ok(c)
    }

    /// Laboratory constraints given in MHz·h (rates in MHz·h per ns).
    pub fn from_mhz(g_max: f64, eps_min: f64, eps_max: f64, vg_max: f64, veps_max: f64) -> Result<Self> {
        let conv = |x: f64| if x.is_infinite() { T::infinity() } else { mhz::<T>(x) };
        Self::new(
            UnitSystem::Laboratory,
            conv(g_max),
            conv(eps_min),
            conv(eps_max),
            conv(vg_max),
            conv(veps_max),
        )
    }

    /// `g_max/h = 2 MHz` and a 190 MHz window just below 6 GHz; no slew limits.
    pub fn lab_defaults() -> Self {
        Self::from_mhz(2.0, 5810.0, 6000.0, f64::INFINITY, f64::INFINITY).expect("valid defaults")
    }

    pub fn check(&self) -> Result<()> {
        let pos = |x: T| x > T::zero();
        if !(pos(self.g_max) && self.g_max.is_finite_value()) {
            return Err(Error::InvalidInput("g_max must be positive and finite".into()));
        }
        if !self.eps_min.is_finite_value() || !self.eps_max.is_finite_value() || !(self.eps_max > self.eps_min) {
            return Err(Error::InvalidInput("need finite eps_min < eps_max".into()));
        }
        if !(pos(self.vg_max) && pos(self.veps_max)) {
            return Err(Error::InvalidInput("slew limits must be positive".into()));
        }
        Ok(())
    }

    pub fn delta_eps(&self) -> T {
        self.eps_max - self.eps_min
    }

    pub fn to_canonical(&self) -> Self {
        let f: T = self.units.energy_factor();
        let tf: T = self.units.time_factor();
        HardwareConstraints {
            units: if self.units == UnitSystem::Dimensionless {
                UnitSystem::Dimensionless
            } else {
                UnitSystem::Laboratory
            },
            g_max: self.g_max * f,
            eps_min: self.eps_min * f,
            eps_max: self.eps_max * f,
            vg_max: self.vg_max * f / tf,
            veps_max: self.veps_max * f / tf,
        }
    }

    /// Every energy (and rate) multiplied by `s`.
    pub fn scaled(&self, s: T) -> Self {
        HardwareConstraints {
            g_max: self.g_max * s,
            eps_min: self.eps_min * s,
            eps_max: self.eps_max * s,
            vg_max: self.vg_max * s,
            veps_max: self.veps_max * s,
            ..*self
        }
    }

    pub fn with_g_max(&self, g_max: T) -> Self {
        HardwareConstraints { g_max, ..*self }
    }
}

/// Computational basis index of `|i>_n` (0-based qubit `i` excited).
pub fn excitation_index(n: usize, i: usize) -> usize {
    1 << (n - 1 - i)
}

/// The `n × 2^n` matrix whose row `i` selects `|i>_n`.
pub fn single_excitation_projector<T: Real>(n: usize) -> DMatrix<T> {
    let mut p = DMatrix::zeros(n, 1 << n);
    for i in 0..n {
        p[(i, excitation_index(n, i))] = T::one();
    }
    p
}

/// `P^i |b>` as `(b', phase)` for the Pauli `pauli` on bit position `shift`.
fn pauli_action<T: Real>(pauli: usize, b: usize, shift: usize) -> (usize, Complex<T>) {
    let bit = (b >> shift) & 1;
    let one = Complex::new(T::one(), T::zero());
    match pauli {
        I0 => (b, one),
        X => (b ^ (1 << shift), one),
        // σ^y|0> = i|1>, σ^y|1> = −i|0>
        Y => (
            b ^ (1 << shift),
            if bit == 0 {
                Complex::new(T::zero(), T::one())
            } else {
                Complex::new(T::zero(), -T::one())
            },
        ),
        _ => (b, if bit == 0 { one } else { -one }),
    }
}

/// Dense `H_qc = Σ −(ε_i/2)σ^z_i + ½ Σ_{i≠j} g_ij J_{μν} σ^μ_i σ^ν_j`.
///
/// With `J` symmetric the two orderings of a pair coincide, so each unordered
/// pair contributes `g_ij J_{μν} σ^μ_i σ^ν_j` once.
pub fn build_hqc<T: Real>(
    eps: &[T],
    g: &DMatrix<T>,
    tensor: &CouplingTensor<T>,
    max_qubits: usize,
) -> Result<DMatrix<Complex<T>>> {
    let n = eps.len();
    if n > max_qubits {
        return Err(Error::Capacity { n, max: max_qubits });
    }
    if g.nrows() != n || g.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: g.nrows(),
        });
    }
    let dim = 1usize << n;
    let half = lit::<T>(0.5);
    let mut h = DMatrix::from_element(dim, dim, Complex::new(T::zero(), T::zero()));
    for b in 0..dim {
        let mut diag = T::zero();
        for (q, &e) in eps.iter().enumerate() {
            let excited = (b >> (n - 1 - q)) & 1 == 1;
            diag += if excited { e * half } else { -e * half };
        }
        h[(b, b)] += Complex::new(diag, T::zero());
    }
    let terms: Vec<(usize, usize, T)> = (0..4)
        .flat_map(|mu| (0..4).map(move |nu| (mu, nu)))
        .map(|(mu, nu)| (mu, nu, tensor.get(mu, nu)))
        .filter(|&(_, _, v)| v != T::zero())
        .collect();
    for p in 0..n {
        for q in (p + 1)..n {
            let gpq = g[(p, q)];
            if gpq == T::zero() {
                continue;
            }
            let (sp, sq) = (n - 1 - p, n - 1 - q);
            for b in 0..dim {
                for &(mu, nu, jv) in &terms {
                    let (b1, ph1) = pauli_action::<T>(nu, b, sq);
                    let (b2, ph2) = pauli_action::<T>(mu, b1, sp);
                    h[(b2, b)] += ph1 * ph2 * Complex::new(gpq * jv, T::zero());
                }
            }
        }
    }
    Ok(h)
}

/// `H_n`: diagonal `ε_i − α Σ_{k≠i} g_ik`, off-diagonal `g_ij`.
pub fn build_hn<T: Real>(eps: &[T], g: &DMatrix<T>, alpha: T) -> DMatrix<T> {
    let n = eps.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let s = (0..n).filter(|&k| k != i).fold(T::zero(), |a, k| a + g[(i, k)]);
            eps[i] - alpha * s
        } else {
            g[(i, j)]
        }
    })
}

/// `P·H·P†` for a full-space operator.
pub fn project<T: Real>(full: &DMatrix<Complex<T>>, n: usize) -> DMatrix<Complex<T>> {
    DMatrix::from_fn(n, n, |i, j| full[(excitation_index(n, i), excitation_index(n, j))])
}

/// Subtract `tr(A)/dim · I`.
pub fn traceless<T: Real>(a: &DMatrix<Complex<T>>) -> DMatrix<Complex<T>> {
    let d = a.nrows();
    let shift = a.trace() / Complex::new(lit::<T>(d as f64), T::zero());
    let mut out = a.clone();
    for i in 0..d {
        out[(i, i)] -= shift;
    }
    out
}

pub fn excitation_weight(b: usize) -> u32 {
    b.count_ones()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    type C = Complex<f64>;

    fn pauli(p: usize) -> DMatrix<C> {
        let z = C::new(0.0, 0.0);
        let o = C::new(1.0, 0.0);
        let i = C::new(0.0, 1.0);
        match p {
            0 => dmatrix![o, z; z, o],
            1 => dmatrix![z, o; o, z],
            2 => dmatrix![z, -i; i, z],
            _ => dmatrix![o, z; z, -o],
        }
    }

    /// Independent oracle: decompose a 4×4 operator in the two-qubit Pauli
    /// basis via `J_{μν} = tr((σ^μ⊗σ^ν)† A)/4`.
    fn pauli_decompose(a: &DMatrix<C>) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for mu in 0..4 {
            for nu in 0..4 {
                let basis = pauli(mu).kronecker(&pauli(nu));
                let c = (basis.adjoint() * a).trace() / C::new(4.0, 0.0);
                assert!(c.im.abs() < 1e-12);
                out[mu][nu] = c.re;
            }
        }
        out
    }

    fn phi_operator(c0: f64, cz: f64) -> DMatrix<C> {
        pauli(1) + pauli(3) * C::new(cz, 0.0) + pauli(0) * C::new(c0, 0.0)
    }

    #[test]
    fn phi_coefficients_examples() {
        let p = PhiCoefficients::from_matrix_elements(5.0, 5.0, 2.0).unwrap();
        assert_eq!(p.c_z(), 0.0);
        let p = PhiCoefficients::from_matrix_elements(23.0, 21.0, 1.0).unwrap();
        assert_eq!((p.c_z(), p.c_0()), (1.0, 22.0));
        let p = PhiCoefficients::<f64>::phase_qubit_default();
        assert!(p.c_z().abs() < 1e-12 && (p.c_0() - 11.0).abs() < 1e-12);
        assert_eq!(p.c_x(), 1.0);
        assert!(matches!(
            PhiCoefficients::from_matrix_elements(1.0, 1.0, 0.0),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn tensor_bare_sigma_x() {
        let t = CouplingTensor::from_phi(&PhiCoefficients::from_matrix_elements(0.0, 0.0, 1.0).unwrap()).unwrap();
        for mu in 0..4 {
            for nu in 0..4 {
                let expect = if mu == 1 && nu == 1 { 1.0 } else { 0.0 };
                assert_eq!(t.get(mu, nu), expect);
            }
        }
    }

    #[test]
    fn tensor_from_phi_matches_pauli_decomposition() {
        for &(c0, cz) in &[(11.0, 0.0), (0.0, 1.0), (3.5, -0.7)] {
            let phi = phi_operator(c0, cz);
            let oracle = pauli_decompose(&phi.kronecker(&phi));
            let p = PhiCoefficients {
                c_z: cz,
                c_0: c0,
            };
            let t = CouplingTensor::from_phi(&p).unwrap();
            assert_eq!(t.scale(), 1.0);
            for mu in 0..4 {
                for nu in 0..4 {
                    assert!((t.get(mu, nu) - oracle[mu][nu]).abs() < 1e-12, "{mu}{nu}");
                }
            }
        }
        let t = CouplingTensor::<f64>::phase_qubit_default();
        assert_eq!(t.get(1, 1), 1.0);
        assert_eq!(t.get(1, 0), 11.0);
        assert_eq!(t.get(0, 1), 11.0);
        assert_eq!(t.get(0, 0), 121.0);
        for k in 0..4 {
            assert_eq!(t.get(3, k), 0.0);
            assert_eq!(t.get(k, 3), 0.0);
        }
        let t = CouplingTensor::from_phi(&PhiCoefficients { c_z: 1.0, c_0: 0.0 }).unwrap();
        assert_eq!([t.get(1, 1), t.get(3, 3), t.get(1, 3), t.get(3, 1)], [1.0; 4]);
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(CouplingTensor::<f64>::pure_xx().alpha(), 0.0);
        assert_eq!(CouplingTensor::<f64>::phase_qubit_default().alpha(), 0.0);
        let mut raw = [[0.0; 4]; 4];
        raw[1][1] = 1.0;
        raw[3][0] = 0.25;
        raw[0][3] = 0.25;
        raw[3][3] = 0.25;
        assert_eq!(CouplingTensor::new(raw).unwrap().alpha(), 1.0);
    }

    #[test]
    fn normalization() {
        let mut raw = [[0.0f64; 4]; 4];
        raw[1][1] = 3.0;
        raw[2][2] = 1.0;
        raw[3][3] = 2.0;
        let t = CouplingTensor::new(raw).unwrap();
        assert_eq!(t.scale(), 4.0);
        assert!((t.get(1, 1) + t.get(2, 2) - 1.0).abs() < 1e-12);
        assert_eq!(t.renormalized().entries(), t.entries());
        assert_eq!(t.renormalized().scale(), 1.0);
        assert!(matches!(CouplingTensor::new([[0.0; 4]; 4]), Err(Error::NotNormalizable)));
    }

    #[test]
    fn tensor_json() {
        let t = CouplingTensor::<f64>::phase_qubit_default();
        let s = serde_json::to_string(&t.to_file()).unwrap();
        assert!(s.contains("\"J\""));
        let back = CouplingTensor::from_file(&serde_json::from_str(&s).unwrap()).unwrap();
        assert_eq!(back, t);
        let bad = TensorFile {
            j: [[0.0, 0.0, 0.0, 0.0], [0.0, 2.0, 0.0, 0.0], [0.0; 4], [0.0; 4]],
            normalized: true,
        };
        assert!(CouplingTensor::<f64>::from_file(&bad).is_err());
    }

    #[test]
    fn projector_rows() {
        let p = single_excitation_projector::<f64>(2);
        assert_eq!(p[(0, 0b10)], 1.0);
        assert_eq!(p[(1, 0b01)], 1.0);
        assert_eq!(p.sum(), 2.0);
        let p = single_excitation_projector::<f64>(3);
        let cols: Vec<usize> = (0..3).map(|i| (0..8).find(|&c| p[(i, c)] == 1.0).unwrap()).collect();
        assert_eq!(cols, vec![0b100, 0b010, 0b001]);
        for n in 1..=6 {
            let p = single_excitation_projector::<f64>(n);
            assert_eq!(&p * p.transpose(), DMatrix::identity(n, n));
        }
    }

    #[test]
    fn single_qubit_spectrum() {
        let h = build_hqc(&[3.0], &DMatrix::zeros(1, 1), &CouplingTensor::pure_xx(), 12).unwrap();
        // ground |0> at −ε/2, excited |1> at +ε/2
        assert_eq!(h[(0, 0)].re, -1.5);
        assert_eq!(h[(1, 1)].re, 1.5);
    }

    #[test]
    fn decoupled_pair_is_diagonal() {
        let (e1, e2) = (5.0f64, 3.0f64);
        let h = build_hqc(&[e1, e2], &DMatrix::zeros(2, 2), &CouplingTensor::pure_xx(), 12).unwrap();
        let eb = (e1 + e2) / 2.0;
        let d = e1 - e2;
        let expect = [-eb, -d / 2.0, d / 2.0, eb];
        for (k, &v) in expect.iter().enumerate() {
            assert!((h[(k, k)].re - v).abs() < 1e-14);
        }
        assert_eq!(h.iter().filter(|c| c.norm() > 0.0).count(), 4);
    }

    #[test]
    fn resonant_pair_splits_by_g() {
        let g = 0.3;
        let gm = dmatrix![0.0, g; g, 0.0];
        let h = build_hqc(&[4.0, 4.0], &gm, &CouplingTensor::pure_xx(), 12).unwrap();
        // brute-force: diagonalize the 4×4 and pick eigenvalues of states whose
        // eigenvector lives in the weight-1 block
        let eig = h.clone().symmetric_eigen();
        let mut block: Vec<f64> = (0..4)
            .filter(|&k| {
                let v = eig.eigenvectors.column(k);
                v[1].norm_sqr() + v[2].norm_sqr() > 0.999
            })
            .map(|k| eig.eigenvalues[k])
            .collect();
        block.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(block.len(), 2);
        assert!((block[1] - block[0] - 2.0 * g).abs() < 1e-12);
        assert!((block[0] + g).abs() < 1e-12);
    }

    #[test]
    fn hqc_is_hermitian() {
        let t = CouplingTensor::new([
            [0.3, 0.1, -0.2, 0.4],
            [0.0, 0.7, 0.2, 0.1],
            [0.5, 0.0, 0.3, -0.6],
            [0.1, 0.0, 0.2, 0.9],
        ])
        .unwrap();
        let g = dmatrix![0.0, 0.2, -0.1; 0.2, 0.0, 0.35; -0.1, 0.35, 0.0];
        let h = build_hqc(&[5.0, 5.5, 6.0], &g, &t, 12).unwrap();
        assert!((&h - h.adjoint()).norm() < 1e-15);
    }

    #[test]
    fn capacity_limit() {
        let eps = vec![1.0; 4];
        assert!(matches!(
            build_hqc(&eps, &DMatrix::zeros(4, 4), &CouplingTensor::pure_xx(), 3),
            Err(Error::Capacity { n: 4, max: 3 })
        ));
    }

    #[test]
    fn hn_alpha_zero_and_decoupled() {
        let g = dmatrix![0.0, 0.2; 0.2, 0.0];
        let hn = build_hn(&[1.0, 2.0], &g, 0.0);
        assert_eq!(hn, dmatrix![1.0, 0.2; 0.2, 2.0]);
        let hn = build_hn(&[1.0, 2.0], &DMatrix::zeros(2, 2), 0.7);
        assert_eq!(hn, dmatrix![1.0, 0.0; 0.0, 2.0]);
    }

    fn assert_traceless_match(eps: &[f64], g: &DMatrix<f64>, t: &CouplingTensor<f64>) {
        let n = eps.len();
        let hn = build_hn(eps, g, t.alpha()).map(|x| C::new(x, 0.0));
        let full = build_hqc(eps, g, t, 12).unwrap();
        let lhs = traceless(&hn);
        let rhs = traceless(&project(&full, n));
        let scale = hn.norm().max(1.0);
        assert!((lhs - rhs).norm() <= 1e-10 * scale);
    }

    #[test]
    fn hn_matches_projected_hqc_two_qubits() {
        let g = dmatrix![0.0, 0.4; 0.4, 0.0];
        assert_traceless_match(&[5.0, 4.2], &g, &CouplingTensor::pure_xx());
        assert_traceless_match(&[5.0, 4.2], &DMatrix::zeros(2, 2), &CouplingTensor::phase_qubit_default());
    }

    #[test]
    fn flip_flop_is_block_diagonal() {
        let t = CouplingTensor::<f64>::flip_flop();
        assert!(t.conserves_excitations(0.0));
        let g = dmatrix![0.0, 0.2, -0.1; 0.2, 0.0, 0.35; -0.1, 0.35, 0.0];
        let h = build_hqc(&[5.0, 5.5, 6.0], &g, &t, 12).unwrap();
        for a in 0..8 {
            for b in 0..8 {
                if excitation_weight(a) != excitation_weight(b) {
                    assert_eq!(h[(a, b)].norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn bare_xx_leaves_the_subspace_for_three_qubits() {
        // σ^x_2 σ^x_3 |100> = |111>: J_0x = J_zx = 0 is not sufficient once n ≥ 3
        let t = CouplingTensor::<f64>::pure_xx();
        assert!(!t.conserves_excitations(0.0));
        let g = dmatrix![0.0, 0.0, 0.0; 0.0, 0.0, 0.3; 0.0, 0.3, 0.0];
        let h = build_hqc(&[5.0, 5.0, 5.0], &g, &t, 12).unwrap();
        assert!((h[(0b111, 0b100)].re - 0.3).abs() < 1e-15);
    }

    #[test]
    fn constraints_validation() {
        assert!(HardwareConstraints::<f64>::from_mhz(2.0, 10.0, 5.0, 1.0, 1.0).is_err());
        assert!(HardwareConstraints::<f64>::from_mhz(0.0, 1.0, 5.0, 1.0, 1.0).is_err());
        let c = HardwareConstraints::<f64>::lab_defaults();
        assert!((crate::units::to_mhz(c.delta_eps()) - 190.0).abs() < 1e-9);
        assert!((crate::units::to_mhz(c.g_max) - 2.0).abs() < 1e-12);
    }
}
