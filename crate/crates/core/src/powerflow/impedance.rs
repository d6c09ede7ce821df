use crate::case::{PqGen, PqLoad};

use super::PowerFlowError;

/// A load frozen at the apparent power and power-factor angle it had when a
/// voltage limit was crossed. Its consumption then varies with `V^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantImpedanceLoad {
    /// Apparent power at conversion (p.u., consumption positive).
    pub s0: f64,
    /// Power-factor angle at conversion (rad).
    pub angle: f64,
    /// The violated voltage bound.
    pub v_lim: f64,
}

impl ConstantImpedanceLoad {
    pub fn new(s0: f64, angle: f64, v_lim: f64) -> Self {
        Self { s0, angle, v_lim }
    }

    fn from_consumption(p: f64, q: f64, v_lim: f64) -> Self {
        Self::new(p.hypot(q), q.atan2(p), v_lim)
    }

    pub fn from_load(load: &PqLoad, v_lim: f64) -> Result<Self, PowerFlowError> {
        if !load.z_convertible {
            return Err(PowerFlowError::NotConvertible { bus: load.bus });
        }
        Ok(Self::from_consumption(load.p_load, load.q_load, v_lim))
    }

    /// A PQ generator is a negative load, so its consumption is `-(p, q)`.
    pub fn from_generator(gen: &PqGen, v_lim: f64) -> Result<Self, PowerFlowError> {
        if !gen.z_convertible {
            return Err(PowerFlowError::NotConvertible { bus: gen.bus });
        }
        Ok(Self::from_consumption(-gen.p_gen, -gen.q_gen, v_lim))
    }

    /// Consumed `(P, Q)` at voltage magnitude `v`.
    pub fn power_at(&self, v: f64) -> (f64, f64) {
        let k = (v / self.v_lim).powi(2);
        (self.s0 * self.angle.cos() * k, self.s0 * self.angle.sin() * k)
    }

    /// Coefficients `(g, b)` such that the consumption is `(g V^2, b V^2)`.
    pub fn coefficients(&self) -> (f64, f64) {
        let (p, q) = self.power_at(1.0);
        (p, q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_base_power_at_the_limit() {
        let angle = 0.8f64.acos();
        let z = ConstantImpedanceLoad::new(1.0, angle, 0.95);
        let (p, q) = z.power_at(0.95);
        assert_eq!(p, 1.0 * angle.cos());
        assert_eq!(q, 1.0 * angle.sin());
        assert!((p - 0.8).abs() < 1e-15 && (q - 0.6).abs() < 1e-15);
    }

    #[test]
    fn scales_with_voltage_squared() {
        let z = ConstantImpedanceLoad::new(1.0, 0.8f64.acos(), 1.0);
        let (p, q) = z.power_at(0.9);
        assert!((p - 0.648).abs() < 1e-12);
        assert!((q - 0.486).abs() < 1e-12);
    }

    #[test]
    fn purely_reactive_load_draws_no_active_power() {
        let z = ConstantImpedanceLoad::new(0.4, std::f64::consts::FRAC_PI_2, 1.1);
        for v in [0.5, 1.0, 1.3] {
            assert!(z.power_at(v).0.abs() < 1e-16);
        }
    }

    #[test]
    fn generator_converts_as_negative_load() {
        let gen = PqGen {
            bus: 101,
            s_base: 100.0,
            v_base: 34.5,
            p_gen: 0.3,
            q_gen: 0.1,
            v_max: 1.1,
            v_min: 0.9,
            z_convertible: true,
            connected: true,
        };
        let (p, q) = ConstantImpedanceLoad::from_generator(&gen, 1.1).unwrap().power_at(1.1);
        assert!((p + 0.3).abs() < 1e-15 && (q + 0.1).abs() < 1e-15);
        let fixed = PqGen { z_convertible: false, ..gen };
        assert!(ConstantImpedanceLoad::from_generator(&fixed, 1.1).is_err());
    }
}
