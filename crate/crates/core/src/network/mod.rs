//! Nodal admittance matrix and the polar power-injection equations built on it.

mod equations;

pub(crate) use equations::weighted_hessian;
pub use equations::{injections, InjectionJacobian};

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::case::{Branch, BusId, PowerCase};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("Line.con row {row}: zero reactance")]
    ZeroReactance { row: usize },
    #[error("{table} row {row}: unknown bus {bus}")]
    UnknownBus { table: &'static str, row: usize, bus: BusId },
}

/// Complex `N_B x N_B` admittance matrix on the system base, rows ordered as
/// the bus table.
#[derive(Clone, Debug)]
pub struct AdmittanceMatrix {
    buses: Vec<BusId>,
    index: HashMap<BusId, usize>,
    matrix: DMatrix<Complex64>,
}

impl AdmittanceMatrix {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn buses(&self) -> &[BusId] {
        &self.buses
    }

    pub fn position(&self, bus: BusId) -> Option<usize> {
        self.index.get(&bus).copied()
    }

    /// Entry by bus numbers.
    pub fn get(&self, from: BusId, to: BusId) -> Option<Complex64> {
        Some(self.matrix[(self.position(from)?, self.position(to)?)])
    }

    pub fn len(&self) -> usize {
        self.buses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buses.is_empty()
    }
}

/// The four entries a branch adds to `Y`, in `(ff, ft, tf, tt)` order, on the
/// system base.
pub fn branch_stamp(branch: &Branch, system_base: f64) -> [Complex64; 4] {
    let (r, x, b) = branch.lumped_parameters();
    // impedances scale inversely with the power base
    let base = if branch.s_base > 0.0 { system_base / branch.s_base } else { 1.0 };
    let y = Complex64::new(1.0, 0.0) / Complex64::new(r * base, x * base);
    let half_charging = Complex64::new(0.0, b / base / 2.0);
    let tap = Complex64::from_polar(branch.effective_tap(), branch.phase_shift.to_radians());
    let ff = (y + half_charging) / (tap * tap.conj());
    let ft = -y / tap.conj();
    let tf = -y / tap;
    let tt = y + half_charging;
    [ff, ft, tf, tt]
}

/// Assembles `Y` from in-service branches (π model, complex tap on the from
/// side) and shunts (`g + jb` on the diagonal).
pub fn build_admittance(case: &PowerCase) -> Result<AdmittanceMatrix, NetworkError> {
    let buses: Vec<BusId> = case.buses.iter().map(|b| b.number).collect();
    let index = case.bus_index();
    let n = buses.len();
    let mut matrix = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));

    for (row, br) in case.branches.iter().enumerate() {
        if !br.connected {
            continue;
        }
        let lookup = |bus| index.get(&bus).copied().ok_or(NetworkError::UnknownBus { table: "Line.con", row, bus });
        let f = lookup(br.from_bus)?;
        let t = lookup(br.to_bus)?;
        if br.x == 0.0 {
            return Err(NetworkError::ZeroReactance { row });
        }
        let [ff, ft, tf, tt] = branch_stamp(br, case.system_base);
        matrix[(f, f)] += ff;
        matrix[(f, t)] += ft;
        matrix[(t, f)] += tf;
        matrix[(t, t)] += tt;
    }

    for (row, sh) in case.shunts.iter().enumerate() {
        if !sh.connected {
            continue;
        }
        let i =
            index.get(&sh.bus).copied().ok_or(NetworkError::UnknownBus { table: "Shunts.con", row, bus: sh.bus })?;
        let scale = case.to_system_base(sh.s_base);
        matrix[(i, i)] += Complex64::new(sh.g * scale, sh.b * scale);
    }

    Ok(AdmittanceMatrix { buses, index, matrix })
}
