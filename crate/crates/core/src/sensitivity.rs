//! Ranking of wind farms by how much reactive support at each farm widens the
//! loadability margin.
//!
//! Each farm in turn is moved to a capacitive power factor, injecting
//! `Q = P tan(acos pf)`, and the continuation power flow is re-run. The
//! sensitivity index is the finite difference
//!
//! ```text
//! S_i = (dlambda_i - dlambda_base) / dq_i
//! ```
//!
//! with `dq_i` in p.u. on the system base.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::case::{BusId, PowerCase};
use crate::cpf::{trace_pv_curve, CpfError, CpfOptions, GrowthDirections};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensitivityError {
    #[error("power factor {0} is outside (0, 1]")]
    InvalidPowerFactor(f64),
    #[error("case has no in-service PQ generator")]
    NoWindFarms,
    #[error("base case continuation: {0}")]
    BaseCase(CpfError),
}

/// Margin measured at the applied power factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measured {
    pub sensitivity: f64,
    pub delta_lambda: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankEntry {
    pub bus: BusId,
    pub name: String,
    /// Row in `PQgen.con`.
    pub row: usize,
    /// Power factor after the reactive adjustment.
    pub power_factor: f64,
    /// Reactive injection added at the farm, p.u. on the system base.
    pub delta_q: f64,
    /// Sensitivity and re-run margin, or the failure of the re-run.
    pub outcome: Result<Measured, CpfError>,
}

impl RankEntry {
    pub fn sensitivity(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|m| m.sensitivity)
    }

    pub fn delta_lambda(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|m| m.delta_lambda)
    }
}

/// Farms by decreasing sensitivity, ties by bus number; failed re-runs last.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityRank {
    pub base_delta_lambda: f64,
    pub target_pf: f64,
    pub entries: Vec<RankEntry>,
}

pub const DEFAULT_TARGET_PF: f64 = 0.95;

pub fn rank_wind_farms(
    case: &PowerCase,
    target_pf: f64,
    options: &CpfOptions,
) -> Result<SensitivityRank, SensitivityError> {
    if !(target_pf > 0.0 && target_pf <= 1.0) {
        return Err(SensitivityError::InvalidPowerFactor(target_pf));
    }
    let farms: Vec<usize> = (0..case.pq_gens.len()).filter(|r| case.pq_gens[*r].connected).collect();
    if farms.is_empty() {
        return Err(SensitivityError::NoWindFarms);
    }
    let dirs = GrowthDirections::from_case(case);
    let base = trace_pv_curve(case, &dirs, options).map_err(SensitivityError::BaseCase)?.delta_lambda;
    let tan_phi = (1.0 - target_pf * target_pf).sqrt() / target_pf;

    let mut entries: Vec<RankEntry> = farms
        .par_iter()
        .map(|&row| {
            let farm = &case.pq_gens[row];
            let q_target = clamp_to_offer(case, farm.bus, farm.s_base, farm.p_gen * tan_phi);
            let delta_q = (q_target - farm.q_gen) * case.to_system_base(farm.s_base);
            let power_factor = match farm.p_gen.hypot(q_target) {
                s if s > 0.0 => farm.p_gen.abs() / s,
                _ => 1.0,
            };
            let outcome = if delta_q == 0.0 {
                Ok(Measured { sensitivity: 0.0, delta_lambda: base })
            } else {
                let mut perturbed = case.clone();
                perturbed.pq_gens[row].q_gen = q_target;
                trace_pv_curve(&perturbed, &dirs, options)
                    .map(|t| Measured { sensitivity: (t.delta_lambda - base) / delta_q, delta_lambda: t.delta_lambda })
            };
            RankEntry { bus: farm.bus, name: case.bus_label(farm.bus), row, power_factor, delta_q, outcome }
        })
        .collect();

    entries.sort_by(|a, b| match (a.sensitivity(), b.sensitivity()) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.bus.cmp(&b.bus)).then(a.row.cmp(&b.row)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.bus.cmp(&b.bus).then(a.row.cmp(&b.row)),
    });
    Ok(SensitivityRank { base_delta_lambda: base, target_pf, entries })
}

/// Keeps the injection inside the reactive band of a supply offer at the bus,
/// expressed on the farm record's base.
fn clamp_to_offer(case: &PowerCase, bus: BusId, farm_base: f64, q: f64) -> f64 {
    let Some(offer) = case.supplies.iter().find(|s| s.connected && s.bus == bus) else {
        return q;
    };
    let ratio = case.to_system_base(offer.s_base) / case.to_system_base(farm_base);
    let (lo, hi) = (offer.q_min * ratio, offer.q_max * ratio);
    if lo <= hi {
        q.clamp(lo, hi)
    } else {
        q
    }
}

/// Plain-text ranking table.
pub fn ranking_table(rank: &SensitivityRank) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "base delta lambda: {:.6}", rank.base_delta_lambda);
    let _ = writeln!(
        out,
        "{:>4}  {:>8}  {:<20}  {:>6}  {:>10}  {:>12}",
        "rank", "bus", "name", "PF", "S_i", "delta_lambda"
    );
    for (k, e) in rank.entries.iter().enumerate() {
        let tail = match &e.outcome {
            Ok(m) => format!("{:>10.4}  {:>12.6}", m.sensitivity, m.delta_lambda),
            Err(err) => format!("failed: {err}"),
        };
        let _ = writeln!(out, "{:>4}  {:>8}  {:<20}  {:>6.3}  {tail}", k + 1, e.bus, e.name, e.power_factor);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse_case;

    /// Slack at bus 1, load and farm at bus 2 over a lossless line.
    fn two_bus(p_gen: f64, q_gen: f64) -> PowerCase {
        let text = format!(
            "System.con\n100\n\
             Bus.con\n1 230 1 0 1 1\n2 230 1 0 1 1\n\
             Line.con\n1 2 100 230 60 0 0 0 0.1 0 0 0 0 0 0 1\n\
             SW.con\n1 100 230 1 0 99 -99 1.1 0.9 0 1 1 1\n\
             PQ.con\n2 100 230 1 0 1.1 0.9 0 1\n\
             PQgen.con\n2 100 230 {p_gen} {q_gen} 1.1 0.9 0 1\n"
        );
        parse_case(&text).unwrap()
    }

    #[test]
    fn farm_at_target_has_zero_sensitivity() {
        let q = 0.5 * (1.0f64 - 0.95 * 0.95).sqrt() / 0.95;
        let rank = rank_wind_farms(&two_bus(0.5, q), 0.95, &CpfOptions::default()).unwrap();
        assert_eq!(rank.entries[0].sensitivity(), Some(0.0));
        assert_eq!(rank.entries[0].delta_lambda(), Some(rank.base_delta_lambda));
    }

    #[test]
    fn capacitive_support_raises_the_nose() {
        let rank = rank_wind_farms(&two_bus(0.5, 0.0), 0.95, &CpfOptions::default()).unwrap();
        let e = &rank.entries[0];
        assert!((e.power_factor - 0.95).abs() < 1e-12);
        assert!(e.sensitivity().unwrap() > 0.0);
        assert!(e.delta_lambda().unwrap() > rank.base_delta_lambda);
    }

    #[test]
    fn two_bus_sensitivity_matches_closed_form() {
        // net demand P, injected Q at bus 2 behind X from a 1 p.u. source:
        // P^2 X^2 = u - (u - qX)^2 with u = V^2, maximal at u = qX + 1/2
        let x = 0.1;
        let p_max = |q: f64| (q * x + 0.25f64).sqrt() / x;
        let q = 0.5 * (1.0f64 - 0.95 * 0.95).sqrt() / 0.95;
        let rank = rank_wind_farms(&two_bus(0.5, 0.0), 0.95, &CpfOptions::default()).unwrap();
        // net demand is lambda - 0.5, so delta lambda = P_max - 0.5
        assert!((rank.base_delta_lambda - (p_max(0.0) - 0.5)).abs() < 1e-5);
        let e = &rank.entries[0];
        assert!((e.delta_q - q).abs() < 1e-12);
        assert!((e.delta_lambda().unwrap() - (p_max(q) - 0.5)).abs() < 1e-5);
        assert!((e.sensitivity().unwrap() - (p_max(q) - p_max(0.0)) / q).abs() < 1e-4);
    }

    #[test]
    fn no_farm_is_an_error() {
        let mut case = two_bus(0.5, 0.0);
        case.pq_gens.clear();
        assert_eq!(rank_wind_farms(&case, 0.95, &CpfOptions::default()).unwrap_err(), SensitivityError::NoWindFarms);
    }

    #[test]
    fn power_factor_is_checked() {
        let err = rank_wind_farms(&two_bus(0.5, 0.0), 1.2, &CpfOptions::default()).unwrap_err();
        assert_eq!(err, SensitivityError::InvalidPowerFactor(1.2));
    }
}
