//! The market and voltage-security program: a base case and a critical case
//! sharing the market quantities.
//!
//! Variables, in order:
//!
//! ```text
//! theta (non-reference), V, Q_G, P_S, P_D, theta_c, V_c, Q_Gc, lambda_c, k_Gc
//! ```
//!
//! Balance at bus `i` (generation positive):
//!
//! ```text
//! base:     P_i(theta, V)     = P_G - P_L               Q_i = Q_G + Q_W - Q_L
//! critical: P_i(theta_c, V_c) = (lambda_c + k_Gc) P_G - lambda_c P_L
//!           Q_i(theta_c, V_c) = Q_Gc + Q_W - lambda_c Q_L
//! ```
//!
//! with `P_G = P_G0 + P_S`, `P_L = P_L0 + P_D` and `Q_L = Q_L0 + r P_D`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::case::CostPolynomial;
use crate::network::{injections, weighted_hessian, InjectionJacobian};

use super::ipm::Nlp;

#[derive(Clone, Debug)]
pub(crate) struct SupplyVar {
    pub bus: usize,
    pub lower: f64,
    pub upper: f64,
    pub active_cost: CostPolynomial,
    pub reactive_cost: CostPolynomial,
    pub commitment: bool,
    /// Position among the reactive-controlling buses, for reactive pricing.
    pub q_slot: Option<usize>,
}

#[derive(Clone, Debug)]
pub(crate) struct DemandVar {
    pub bus: usize,
    pub lower: f64,
    pub upper: f64,
    /// Reactive consumed per unit of active demand.
    pub ratio: f64,
    pub active_cost: CostPolynomial,
    pub reactive_cost: CostPolynomial,
    pub commitment: bool,
}

#[derive(Clone, Debug)]
pub(crate) struct MarketProblem {
    pub y: DMatrix<Complex64>,
    pub reference: usize,
    pub ref_theta: f64,
    pub v_lower: Vec<f64>,
    pub v_upper: Vec<f64>,
    /// Buses with a reactive-controlling unit and their aggregate bounds.
    pub q_buses: Vec<usize>,
    pub q_lower: Vec<f64>,
    pub q_upper: Vec<f64>,
    pub supplies: Vec<SupplyVar>,
    pub demands: Vec<DemandVar>,
    pub p_g0: Vec<f64>,
    pub p_l0: Vec<f64>,
    pub q_l0: Vec<f64>,
    pub q_w: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub omega: f64,
    /// MVA, converts p.u. quantities to the MW the prices refer to.
    pub system_base: f64,
    /// Positive divisor applied to the objective for conditioning.
    pub objective_scale: f64,
}

/// Offsets of the variable blocks.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Blocks {
    pub theta: usize,
    pub v: usize,
    pub qg: usize,
    pub ps: usize,
    pub pd: usize,
    pub theta_c: usize,
    pub v_c: usize,
    pub qg_c: usize,
    pub lambda: usize,
    pub k_g: usize,
    pub len: usize,
}

/// Network state and market quantities decoded from the variable vector.
pub(crate) struct Decoded {
    pub theta: Vec<f64>,
    pub v: Vec<f64>,
    pub theta_c: Vec<f64>,
    pub v_c: Vec<f64>,
    pub p_gen: Vec<f64>,
    pub p_load: Vec<f64>,
    pub q_load: Vec<f64>,
    pub q_gen: Vec<f64>,
    pub q_gen_c: Vec<f64>,
    pub lambda: f64,
    pub k_g: f64,
}

impl MarketProblem {
    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn blocks(&self) -> Blocks {
        let n = self.n();
        let ng = self.q_buses.len();
        let theta = 0;
        let v = theta + n - 1;
        let qg = v + n;
        let ps = qg + ng;
        let pd = ps + self.supplies.len();
        let theta_c = pd + self.demands.len();
        let v_c = theta_c + n - 1;
        let qg_c = v_c + n;
        let lambda = qg_c + ng;
        let k_g = lambda + 1;
        Blocks { theta, v, qg, ps, pd, theta_c, v_c, qg_c, lambda, k_g, len: k_g + 1 }
    }

    /// Position of bus `i`'s angle within an angle block, if not the reference.
    fn angle_slot(&self, i: usize) -> Option<usize> {
        match i.cmp(&self.reference) {
            std::cmp::Ordering::Less => Some(i),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(i - 1),
        }
    }

    fn angles(&self, z: &DVector<f64>, offset: usize) -> Vec<f64> {
        (0..self.n())
            .map(|i| match self.angle_slot(i) {
                Some(k) => z[offset + k],
                None => self.ref_theta,
            })
            .collect()
    }

    pub fn decode(&self, z: &DVector<f64>) -> Decoded {
        let b = self.blocks();
        let n = self.n();
        let mut p_gen = self.p_g0.clone();
        for (k, s) in self.supplies.iter().enumerate() {
            p_gen[s.bus] += z[b.ps + k];
        }
        let mut p_load = self.p_l0.clone();
        let mut q_load = self.q_l0.clone();
        for (k, d) in self.demands.iter().enumerate() {
            p_load[d.bus] += z[b.pd + k];
            q_load[d.bus] += d.ratio * z[b.pd + k];
        }
        let mut q_gen = vec![0.0; n];
        let mut q_gen_c = vec![0.0; n];
        for (k, &i) in self.q_buses.iter().enumerate() {
            q_gen[i] = z[b.qg + k];
            q_gen_c[i] = z[b.qg_c + k];
        }
        Decoded {
            theta: self.angles(z, b.theta),
            v: z.rows(b.v, n).iter().copied().collect(),
            theta_c: self.angles(z, b.theta_c),
            v_c: z.rows(b.v_c, n).iter().copied().collect(),
            p_gen,
            p_load,
            q_load,
            q_gen,
            q_gen_c,
            lambda: z[b.lambda],
            k_g: z[b.k_g],
        }
    }

    /// Builds a variable vector from its parts.
    #[allow(clippy::too_many_arguments)]
    pub fn encode(
        &self,
        theta: &[f64],
        v: &[f64],
        theta_c: &[f64],
        v_c: &[f64],
        q_gen: &[f64],
        p_s: &[f64],
        p_d: &[f64],
        lambda: f64,
    ) -> DVector<f64> {
        let b = self.blocks();
        let mut z = DVector::zeros(b.len);
        for i in 0..self.n() {
            if let Some(k) = self.angle_slot(i) {
                z[b.theta + k] = theta[i];
                z[b.theta_c + k] = theta_c[i];
            }
            z[b.v + i] = v[i];
            z[b.v_c + i] = v_c[i];
        }
        for (k, &i) in self.q_buses.iter().enumerate() {
            z[b.qg + k] = q_gen[i];
            z[b.qg_c + k] = q_gen[i];
        }
        for (k, p) in p_s.iter().enumerate() {
            z[b.ps + k] = *p;
        }
        for (k, p) in p_d.iter().enumerate() {
            z[b.pd + k] = *p;
        }
        z[b.lambda] = lambda;
        z
    }

    /// `C_D - C_S` in currency per hour.
    pub fn surplus(&self, z: &DVector<f64>) -> f64 {
        let b = self.blocks();
        let mw = self.system_base;
        let mut value = 0.0;
        for (k, s) in self.supplies.iter().enumerate() {
            value -= bid_cost(&s.active_cost, s.commitment, z[b.ps + k] * mw);
            if let Some(slot) = s.q_slot {
                value -= bid_cost(&s.reactive_cost, s.commitment, z[b.qg + slot] * mw);
            }
        }
        for (k, d) in self.demands.iter().enumerate() {
            value += bid_cost(&d.active_cost, d.commitment, z[b.pd + k] * mw);
            value += bid_cost(&d.reactive_cost, d.commitment, d.ratio * z[b.pd + k] * mw);
        }
        value
    }

    /// Unscaled objective `-omega (C_D - C_S) - (1 - omega) lambda_c`.
    pub fn raw_objective(&self, z: &DVector<f64>) -> f64 {
        -self.omega * self.surplus(z) - (1.0 - self.omega) * z[self.blocks().lambda]
    }
}

/// Polynomial cost of a bid; the fixed term only applies to committed bids.
pub(crate) fn bid_cost(poly: &CostPolynomial, committed: bool, quantity: f64) -> f64 {
    let fixed = if committed { poly.c0 } else { 0.0 };
    fixed + poly.c1 * quantity + poly.c2 * quantity * quantity
}

impl Nlp for MarketProblem {
    fn dim(&self) -> usize {
        self.blocks().len
    }

    fn objective(&self, z: &DVector<f64>) -> f64 {
        self.raw_objective(z) / self.objective_scale
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let b = self.blocks();
        let mw = self.system_base;
        let w = self.omega / self.objective_scale;
        let mut g = DVector::zeros(b.len);
        for (k, s) in self.supplies.iter().enumerate() {
            g[b.ps + k] += w * mw * s.active_cost.derivative(z[b.ps + k] * mw);
            if let Some(slot) = s.q_slot {
                g[b.qg + slot] += w * mw * s.reactive_cost.derivative(z[b.qg + slot] * mw);
            }
        }
        for (k, d) in self.demands.iter().enumerate() {
            let p = z[b.pd + k] * mw;
            g[b.pd + k] -= w * mw * d.active_cost.derivative(p);
            g[b.pd + k] -= w * mw * d.ratio * d.reactive_cost.derivative(d.ratio * p);
        }
        g[b.lambda] = -(1.0 - self.omega) / self.objective_scale;
        g
    }

    fn constraints(&self, z: &DVector<f64>) -> DVector<f64> {
        let n = self.n();
        let d = self.decode(z);
        let (p, q) = injections(&self.y, &d.v, &d.theta);
        let (pc, qc) = injections(&self.y, &d.v_c, &d.theta_c);
        let mut h = DVector::zeros(4 * n);
        for i in 0..n {
            h[i] = p[i] - (d.p_gen[i] - d.p_load[i]);
            h[n + i] = q[i] - (d.q_gen[i] + self.q_w[i] - d.q_load[i]);
            h[2 * n + i] = pc[i] - ((d.lambda + d.k_g) * d.p_gen[i] - d.lambda * d.p_load[i]);
            h[3 * n + i] = qc[i] - (d.q_gen_c[i] + self.q_w[i] - d.lambda * d.q_load[i]);
        }
        h
    }

    fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n();
        let b = self.blocks();
        let d = self.decode(z);
        let mut j = DMatrix::zeros(4 * n, b.len);
        let base = InjectionJacobian::new(&self.y, &d.v, &d.theta);
        let crit = InjectionJacobian::new(&self.y, &d.v_c, &d.theta_c);
        for i in 0..n {
            for k in 0..n {
                if let Some(slot) = self.angle_slot(k) {
                    j[(i, b.theta + slot)] = base.dp_dtheta[(i, k)];
                    j[(n + i, b.theta + slot)] = base.dq_dtheta[(i, k)];
                    j[(2 * n + i, b.theta_c + slot)] = crit.dp_dtheta[(i, k)];
                    j[(3 * n + i, b.theta_c + slot)] = crit.dq_dtheta[(i, k)];
                }
                j[(i, b.v + k)] = base.dp_dv[(i, k)];
                j[(n + i, b.v + k)] = base.dq_dv[(i, k)];
                j[(2 * n + i, b.v_c + k)] = crit.dp_dv[(i, k)];
                j[(3 * n + i, b.v_c + k)] = crit.dq_dv[(i, k)];
            }
            j[(2 * n + i, b.lambda)] = -(d.p_gen[i] - d.p_load[i]);
            j[(2 * n + i, b.k_g)] = -d.p_gen[i];
            j[(3 * n + i, b.lambda)] = d.q_load[i];
        }
        for (k, &i) in self.q_buses.iter().enumerate() {
            j[(n + i, b.qg + k)] = -1.0;
            j[(3 * n + i, b.qg_c + k)] = -1.0;
        }
        for (k, s) in self.supplies.iter().enumerate() {
            j[(s.bus, b.ps + k)] -= 1.0;
            j[(2 * n + s.bus, b.ps + k)] -= d.lambda + d.k_g;
        }
        for (k, dm) in self.demands.iter().enumerate() {
            j[(dm.bus, b.pd + k)] += 1.0;
            j[(n + dm.bus, b.pd + k)] += dm.ratio;
            j[(2 * n + dm.bus, b.pd + k)] += d.lambda;
            j[(3 * n + dm.bus, b.pd + k)] += d.lambda * dm.ratio;
        }
        j
    }

    fn hessian(&self, z: &DVector<f64>, mult: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n();
        let b = self.blocks();
        let d = self.decode(z);
        let mw = self.system_base;
        let w = self.omega / self.objective_scale;
        let mut h = DMatrix::zeros(b.len, b.len);

        for (k, s) in self.supplies.iter().enumerate() {
            h[(b.ps + k, b.ps + k)] += w * mw * mw * 2.0 * s.active_cost.c2;
            if let Some(slot) = s.q_slot {
                h[(b.qg + slot, b.qg + slot)] += w * mw * mw * 2.0 * s.reactive_cost.c2;
            }
        }
        for (k, dm) in self.demands.iter().enumerate() {
            let curvature = dm.active_cost.c2 + dm.ratio * dm.ratio * dm.reactive_cost.c2;
            h[(b.pd + k, b.pd + k)] -= w * mw * mw * 2.0 * curvature;
        }

        let cases = [(&d.v, &d.theta, 0, b.theta, b.v), (&d.v_c, &d.theta_c, 2 * n, b.theta_c, b.v_c)];
        for (v, theta, row, th_off, v_off) in cases {
            let mu_p: Vec<f64> = (0..n).map(|i| mult[row + i]).collect();
            let mu_q: Vec<f64> = (0..n).map(|i| mult[row + n + i]).collect();
            let net = weighted_hessian(&self.y, v, theta, &mu_p, &mu_q);
            let position = |r: usize| -> Option<usize> {
                if r < n {
                    self.angle_slot(r).map(|s| th_off + s)
                } else {
                    Some(v_off + r - n)
                }
            };
            for r in 0..2 * n {
                let Some(pr) = position(r) else { continue };
                for c in 0..2 * n {
                    if let Some(pc) = position(c) {
                        h[(pr, pc)] += net[(r, c)];
                    }
                }
            }
        }

        // bilinear terms of the critical specification
        let mut add = |a: usize, c: usize, value: f64| {
            h[(a, c)] += value;
            h[(c, a)] += value;
        };
        for (k, s) in self.supplies.iter().enumerate() {
            let mp = mult[2 * n + s.bus];
            add(b.lambda, b.ps + k, -mp);
            add(b.k_g, b.ps + k, -mp);
        }
        for (k, dm) in self.demands.iter().enumerate() {
            let value = mult[2 * n + dm.bus] + mult[3 * n + dm.bus] * dm.ratio;
            add(b.lambda, b.pd + k, value);
        }
        h
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let b = self.blocks();
        let n = self.n();
        let mut lower = vec![f64::NEG_INFINITY; b.len];
        let mut upper = vec![f64::INFINITY; b.len];
        for i in 0..n {
            for off in [b.v, b.v_c] {
                lower[off + i] = self.v_lower[i];
                upper[off + i] = self.v_upper[i];
            }
        }
        for k in 0..self.q_buses.len() {
            for off in [b.qg, b.qg_c] {
                lower[off + k] = self.q_lower[k];
                upper[off + k] = self.q_upper[k];
            }
        }
        for (k, s) in self.supplies.iter().enumerate() {
            lower[b.ps + k] = s.lower;
            upper[b.ps + k] = s.upper;
        }
        for (k, dm) in self.demands.iter().enumerate() {
            lower[b.pd + k] = dm.lower;
            upper[b.pd + k] = dm.upper;
        }
        lower[b.lambda] = self.lambda_min;
        upper[b.lambda] = self.lambda_max;
        (lower, upper)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Three buses, one supply, one demand, reactive control at the reference.
    fn sample() -> MarketProblem {
        let c = Complex64::new;
        let y = DMatrix::from_row_slice(
            3,
            3,
            &[
                c(3.0, -12.0),
                c(-1.5, 6.0),
                c(-1.5, 6.2),
                c(-1.5, 6.0),
                c(2.5, -9.8),
                c(-1.0, 4.0),
                c(-1.5, 6.2),
                c(-1.0, 4.0),
                c(2.5, -10.1),
            ],
        );
        MarketProblem {
            y,
            reference: 1,
            ref_theta: 0.0,
            v_lower: vec![0.9; 3],
            v_upper: vec![1.1; 3],
            q_buses: vec![1, 2],
            q_lower: vec![-1.0, -1.0],
            q_upper: vec![1.0, 1.0],
            supplies: vec![SupplyVar {
                bus: 2,
                lower: 0.0,
                upper: 1.0,
                active_cost: CostPolynomial::new(5.0, 20.0, 0.3),
                reactive_cost: CostPolynomial::new(0.0, 1.0, 0.2),
                commitment: true,
                q_slot: Some(1),
            }],
            demands: vec![DemandVar {
                bus: 0,
                lower: 0.0,
                upper: 0.5,
                ratio: 0.3,
                active_cost: CostPolynomial::new(0.0, 50.0, 0.1),
                reactive_cost: CostPolynomial::new(0.0, 2.0, 0.05),
                commitment: false,
            }],
            p_g0: vec![0.0, 0.8, 0.2],
            p_l0: vec![0.9, 0.1, 0.0],
            q_l0: vec![0.2, 0.0, 0.0],
            q_w: vec![0.0, 0.0, 0.05],
            lambda_min: 1.01,
            lambda_max: 1.99,
            omega: 0.6,
            system_base: 100.0,
            objective_scale: 7.0,
        }
    }

    fn point(p: &MarketProblem) -> DVector<f64> {
        let len = p.dim();
        DVector::from_iterator(len, (0..len).map(|k| 0.3 + 0.7 * ((k * 37 % 11) as f64) / 11.0))
    }

    #[test]
    fn gradient_matches_differences() {
        let p = sample();
        let z = point(&p);
        let g = p.gradient(&z);
        for k in 0..p.dim() {
            let h = 1e-6;
            let (mut a, mut b) = (z.clone(), z.clone());
            a[k] += h;
            b[k] -= h;
            let fd = (p.objective(&a) - p.objective(&b)) / (2.0 * h);
            assert!((g[k] - fd).abs() < 1e-5 * (1.0 + fd.abs()), "{k}: {} vs {fd}", g[k]);
        }
    }

    #[test]
    fn jacobian_matches_differences() {
        let p = sample();
        let z = point(&p);
        let j = p.jacobian(&z);
        for k in 0..p.dim() {
            let h = 1e-6;
            let (mut a, mut b) = (z.clone(), z.clone());
            a[k] += h;
            b[k] -= h;
            let fd = (p.constraints(&a) - p.constraints(&b)) / (2.0 * h);
            for r in 0..fd.len() {
                assert!((j[(r, k)] - fd[r]).abs() < 1e-6, "({r},{k}): {} vs {}", j[(r, k)], fd[r]);
            }
        }
    }

    #[test]
    fn hessian_matches_differences() {
        let p = sample();
        let z = point(&p);
        let m = p.constraints(&z).len();
        let mult = DVector::from_iterator(m, (0..m).map(|i| ((i * 7 % 5) as f64) - 2.0));
        let hess = p.hessian(&z, &mult);
        let grad_l = |z: &DVector<f64>| p.gradient(z) + p.jacobian(z).transpose() * &mult;
        for k in 0..p.dim() {
            let h = 1e-6;
            let (mut a, mut b) = (z.clone(), z.clone());
            a[k] += h;
            b[k] -= h;
            let fd = (grad_l(&a) - grad_l(&b)) / (2.0 * h);
            for r in 0..p.dim() {
                assert!(
                    (hess[(r, k)] - fd[r]).abs() < 1e-5 * (1.0 + fd[r].abs()),
                    "({r},{k}): {} vs {}",
                    hess[(r, k)],
                    fd[r]
                );
            }
        }
    }
}
