//! Exact enumeration checks, in integer arithmetic, of two structural facts
//! the simulated experiments push against:
//!
//! 1. Any strategy that fixes all four outcomes in advance, independent of
//!    the distant setting, has CHSH combination |S| <= 2 — while the singlet
//!    runs reach 2 sqrt 2. The gap is what rules such strategies out.
//! 2. Assigning simultaneous definite values (+-1 in units of hbar/2) to the
//!    spin components along two perpendicular axes, and requiring the value
//!    along the bisector to be their rescaled sum, is unsatisfiable: the sum
//!    lands in {0, +-sqrt 2}, never at the required +-1. Value maps cannot
//!    respect additivity of noncommuting observables, so refuting them needs
//!    the contextual, configuration-dependent outcomes the trajectories
//!    exhibit rather than a per-particle lookup table.

use serde::Serialize;

/// One deterministic local strategy: pre-assigned outcomes for both settings
/// on both sides, and the CHSH value it produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ChshStrategy {
    pub a: i8,
    pub a_alt: i8,
    pub b: i8,
    pub b_alt: i8,
    /// S = a b + a b_alt + a_alt b - a_alt b_alt.
    pub s: i8,
}

impl ChshStrategy {
    fn new(a: i8, a_alt: i8, b: i8, b_alt: i8) -> Self {
        let s = a * b + a * b_alt + a_alt * b - a_alt * b_alt;
        Self { a, a_alt, b, b_alt, s }
    }
}

/// The complete table of deterministic local strategies and the exact bound
/// they obey.
#[derive(Clone, Debug, Serialize)]
pub struct ChshEnumeration {
    pub rows: Vec<ChshStrategy>,
    pub max_abs_s: i8,
}

/// Enumerate all 16 deterministic outcome assignments (a, a_alt, b, b_alt in
/// {+-1}) and compute S for each. Integer arithmetic throughout; the bound
/// max |S| = 2 is exact, not a numerical estimate.
pub fn local_deterministic_chsh_bound() -> ChshEnumeration {
    let signs = [1i8, -1];
    let mut rows = Vec::with_capacity(16);
    for a in signs {
        for a_alt in signs {
            for b in signs {
                for b_alt in signs {
                    rows.push(ChshStrategy::new(a, a_alt, b, b_alt));
                }
            }
        }
    }
    let max_abs_s = rows.iter().map(|r| r.s.abs()).max().expect("16 rows");
    ChshEnumeration { rows, max_abs_s }
}

/// The value additivity would force on the bisector component: the integer
/// sum of the two axis values, carried exactly; the physical value is
/// sum / sqrt 2 in units of hbar/2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BisectorValue {
    pub sum: i8,
}

impl BisectorValue {
    /// The forced bisector value in units of hbar/2.
    pub fn as_f64(self) -> f64 {
        f64::from(self.sum) / std::f64::consts::SQRT_2
    }

    /// A spin-1/2 component must measure +-1 in units of hbar/2, i.e. the
    /// integer sum must satisfy sum^2 = 2. No integer does.
    pub fn is_permissible(self) -> bool {
        self.sum * self.sum == 2
    }
}

/// One joint value assignment to the two perpendicular spin components and
/// the bisector value additivity forces from it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SpinAssignmentRow {
    pub sx: i8,
    pub sy: i8,
    pub bisector: BisectorValue,
}

/// Outcome of checking every assignment: how many were admissible (always
/// zero) and whether the constraint system is unsatisfiable (always true).
#[derive(Clone, Debug, Serialize)]
pub struct VonNeumannObstruction {
    pub rows: Vec<SpinAssignmentRow>,
    pub admissible_count: usize,
    pub unsat: bool,
}

/// Enumerate all four joint assignments of +-1 (units of hbar/2) to the spin
/// components along two perpendicular axes and check whether the additive
/// bisector value is ever an allowed spin value. It never is, so a
/// dispersion-free value map respecting additivity does not exist.
pub fn von_neumann_obstruction() -> VonNeumannObstruction {
    let signs = [1i8, -1];
    let mut rows = Vec::with_capacity(4);
    for sx in signs {
        for sy in signs {
            rows.push(SpinAssignmentRow { sx, sy, bisector: BisectorValue { sum: sx + sy } });
        }
    }
    let admissible_count = rows.iter().filter(|r| r.bisector.is_permissible()).count();
    VonNeumannObstruction { unsat: admissible_count == 0, rows, admissible_count }
}
