//! Unit systems and converters.
//!
//! Internally every energy is an angular frequency (rad/ns) and every time is
//! in ns, so `exp(-i H t)` needs no further constants and λ is a pure ratio.

use serde::{Deserialize, Serialize};

use crate::num::{lit, Real};

/// Hartree energy in eV.
pub const HARTREE_EV: f64 = 27.21;
/// Atomic unit of time in ns.
pub const AU_TIME_NS: f64 = 2.419e-8;
/// One MHz·h expressed as rad/ns.
pub const MHZ_RAD_PER_NS: f64 = 2.0 * std::f64::consts::PI * 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitSystem {
    /// Pure numbers; only compatible with other dimensionless data.
    Dimensionless,
    /// Hartree energies and atomic units of time.
    Atomic,
    /// rad/ns energies (E/ħ) and ns times.
    Laboratory,
}

impl UnitSystem {
    /// Multiplier taking an energy in this system to the canonical unit.
    pub fn energy_factor<T: Real>(self) -> T {
        match self {
            UnitSystem::Dimensionless | UnitSystem::Laboratory => T::one(),
            // E_h / ħ == 1 / (atomic time unit)
            UnitSystem::Atomic => lit::<T>(1.0) / lit::<T>(AU_TIME_NS),
        }
    }

    /// Multiplier taking a time in this system to the canonical unit.
    pub fn time_factor<T: Real>(self) -> T {
        match self {
            UnitSystem::Dimensionless | UnitSystem::Laboratory => T::one(),
            UnitSystem::Atomic => lit(AU_TIME_NS),
        }
    }

    /// Whether data tagged `self` may be compiled against data tagged `other`.
    pub fn compatible(self, other: UnitSystem) -> bool {
        (self == UnitSystem::Dimensionless) == (other == UnitSystem::Dimensionless)
    }

    pub fn name(self) -> &'static str {
        match self {
            UnitSystem::Dimensionless => "dimensionless",
            UnitSystem::Atomic => "atomic",
            UnitSystem::Laboratory => "laboratory",
        }
    }

    pub fn parse(s: &str) -> Option<UnitSystem> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dimensionless" | "none" => Some(UnitSystem::Dimensionless),
            "atomic" | "au" | "a.u." | "hartree" => Some(UnitSystem::Atomic),
            "laboratory" | "lab" | "si" | "rad/ns" => Some(UnitSystem::Laboratory),
            _ => None,
        }
    }
}

/// MHz·h → rad/ns.
pub fn mhz<T: Real>(x: f64) -> T {
    lit(x * MHZ_RAD_PER_NS)
}

/// rad/ns → MHz·h.
pub fn to_mhz<T: Real>(x: T) -> T {
    x / lit(MHZ_RAD_PER_NS)
}

/// Hartree → rad/ns.
pub fn hartree<T: Real>(x: f64) -> T {
    lit::<T>(x) * UnitSystem::Atomic.energy_factor::<T>()
}

/// eV → hartree.
pub fn ev_to_hartree(x: f64) -> f64 {
    x / HARTREE_EV
}
