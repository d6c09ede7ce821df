//! Primal-dual interior-point method for
//!
//! ```text
//! min f(z)  subject to  h(z) = 0,  lower <= z <= upper
//! ```
//!
//! Bounds are turned into inequalities with slacks `s > 0`; each iteration
//! takes a Newton step on the perturbed KKT conditions, reduced to the
//! symmetric system `[M  J^T; J  0]`.

use nalgebra::{DMatrix, DVector};

pub(crate) trait Nlp {
    fn dim(&self) -> usize;
    fn objective(&self, z: &DVector<f64>) -> f64;
    fn gradient(&self, z: &DVector<f64>) -> DVector<f64>;
    fn constraints(&self, z: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64>;
    /// Hessian of `f + multipliers^T h`.
    fn hessian(&self, z: &DVector<f64>, multipliers: &DVector<f64>) -> DMatrix<f64>;
    /// `(lower, upper)` per variable, infinite when absent.
    fn bounds(&self) -> (Vec<f64>, Vec<f64>);
}

#[derive(Clone, Debug, PartialEq)]
pub struct IpmOptions {
    pub feasibility_tolerance: f64,
    pub gradient_tolerance: f64,
    pub complementarity_tolerance: f64,
    pub max_iterations: usize,
    /// Fraction of the distance to the boundary a step may cover.
    pub boundary_fraction: f64,
    /// Centering parameter for the barrier update.
    pub centering: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self {
            feasibility_tolerance: 1e-9,
            gradient_tolerance: 1e-6,
            complementarity_tolerance: 1e-8,
            max_iterations: 200,
            boundary_fraction: 0.995,
            centering: 0.1,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct IpmResult {
    pub z: DVector<f64>,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum IpmFailure {
    IterationLimit { feasibility: f64 },
    Numerical { iteration: usize },
}

/// One bound of one variable: `sign * (z_var - value) <= 0`.
struct Bound {
    var: usize,
    value: f64,
    sign: f64,
}

const MIN_INTERIOR: f64 = 1e-4;

pub(crate) fn solve<P: Nlp>(problem: &P, start: &DVector<f64>, options: &IpmOptions) -> Result<IpmResult, IpmFailure> {
    let n = problem.dim();
    let (lower, upper) = problem.bounds();
    let mut bounds = Vec::new();
    for j in 0..n {
        if upper[j].is_finite() {
            bounds.push(Bound { var: j, value: upper[j], sign: 1.0 });
        }
        if lower[j].is_finite() {
            bounds.push(Bound { var: j, value: lower[j], sign: -1.0 });
        }
    }
    let nb = bounds.len();

    // strictly interior start
    let mut z = start.clone();
    for j in 0..n {
        let (lo, hi) = (lower[j], upper[j]);
        if lo.is_finite() && hi.is_finite() {
            let margin = (MIN_INTERIOR * (hi - lo)).min(0.5 * (hi - lo));
            z[j] = z[j].clamp(lo + margin, hi - margin);
        } else if lo.is_finite() {
            z[j] = z[j].max(lo + MIN_INTERIOR);
        } else if hi.is_finite() {
            z[j] = z[j].min(hi - MIN_INTERIOR);
        }
    }
    let slack_of = |z: &DVector<f64>, b: &Bound| b.sign * (z[b.var] - b.value);
    let mut s = DVector::from_iterator(nb, bounds.iter().map(|b| (-slack_of(&z, b)).max(1e-10)));
    let mut barrier = 1.0;
    let mut mu = DVector::from_iterator(nb, s.iter().map(|si| barrier / si));
    let m = problem.constraints(&z).len();
    let mut lam = DVector::zeros(m);

    for iteration in 0..=options.max_iterations {
        let h = problem.constraints(&z);
        let jac = problem.jacobian(&z);
        let grad = problem.gradient(&z);
        let mut grad_l = &grad + jac.transpose() * &lam;
        for (k, b) in bounds.iter().enumerate() {
            grad_l[b.var] += b.sign * mu[k];
        }
        let g: Vec<f64> = bounds.iter().map(|b| slack_of(&z, b)).collect();

        let feasibility = h.amax().max(g.iter().cloned().fold(0.0, f64::max));
        let scale = 1.0 + lam.amax().max(if nb > 0 { mu.amax() } else { 0.0 });
        let gradient = grad_l.amax() / scale;
        let complementarity = if nb > 0 { s.dot(&mu) / nb as f64 } else { 0.0 };
        if !(feasibility.is_finite() && gradient.is_finite()) {
            return Err(IpmFailure::Numerical { iteration });
        }
        if feasibility <= options.feasibility_tolerance
            && gradient <= options.gradient_tolerance
            && complementarity <= options.complementarity_tolerance
        {
            return Ok(IpmResult { z, iterations: iteration });
        }
        if iteration == options.max_iterations {
            return Err(IpmFailure::IterationLimit { feasibility });
        }

        let mut mtx = problem.hessian(&z, &lam);
        let mut rhs_n = grad_l.clone();
        for (k, b) in bounds.iter().enumerate() {
            mtx[(b.var, b.var)] += mu[k] / s[k];
            rhs_n[b.var] += b.sign * (barrier + mu[k] * g[k]) / s[k];
        }

        let dim = n + m;
        let mut kkt = DMatrix::zeros(dim, dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(&mtx);
        kkt.view_mut((n, 0), (m, n)).copy_from(&jac);
        kkt.view_mut((0, n), (n, m)).copy_from(&jac.transpose());
        let mut rhs = DVector::zeros(dim);
        rhs.rows_mut(0, n).copy_from(&(-&rhs_n));
        rhs.rows_mut(n, m).copy_from(&(-&h));

        let step = solve_regularized(&kkt, &rhs, n).ok_or(IpmFailure::Numerical { iteration })?;
        let dz = step.rows(0, n).into_owned();
        let dlam = step.rows(n, m).into_owned();

        let ds = DVector::from_iterator(nb, bounds.iter().enumerate().map(|(k, b)| -g[k] - s[k] - b.sign * dz[b.var]));
        let dmu = DVector::from_iterator(nb, (0..nb).map(|k| -mu[k] + (barrier - mu[k] * ds[k]) / s[k]));

        let alpha_p = step_to_boundary(&s, &ds, options.boundary_fraction);
        let alpha_d = step_to_boundary(&mu, &dmu, options.boundary_fraction);
        z += alpha_p * &dz;
        s += alpha_p * &ds;
        lam += alpha_d * &dlam;
        mu += alpha_d * &dmu;
        if nb > 0 {
            barrier = options.centering * s.dot(&mu) / nb as f64;
        }
    }
    unreachable!("loop returns on its last iteration")
}

fn step_to_boundary(x: &DVector<f64>, dx: &DVector<f64>, fraction: f64) -> f64 {
    let mut alpha: f64 = 1.0;
    for (xi, dxi) in x.iter().zip(dx.iter()) {
        if *dxi < 0.0 {
            alpha = alpha.min(-fraction * xi / dxi);
        }
    }
    alpha
}

/// Solves the KKT system, shifting the primal block when it is singular.
fn solve_regularized(kkt: &DMatrix<f64>, rhs: &DVector<f64>, n: usize) -> Option<DVector<f64>> {
    let mut shift = 0.0;
    for _ in 0..12 {
        let mut a = kkt.clone();
        for j in 0..n {
            a[(j, j)] += shift;
        }
        if let Some(x) = a.lu().solve(rhs) {
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        shift = if shift == 0.0 { 1e-10 } else { shift * 100.0 };
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    /// min (x - 2)^2 + (y - 1)^2  s.t.  x + y = 1,  0 <= x <= 0.5
    struct Quadratic;

    impl Nlp for Quadratic {
        fn dim(&self) -> usize {
            2
        }
        fn objective(&self, z: &DVector<f64>) -> f64 {
            (z[0] - 2.0).powi(2) + (z[1] - 1.0).powi(2)
        }
        fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![2.0 * (z[0] - 2.0), 2.0 * (z[1] - 1.0)])
        }
        fn constraints(&self, z: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![z[0] + z[1] - 1.0])
        }
        fn jacobian(&self, _: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0])
        }
        fn hessian(&self, _: &DVector<f64>, _: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_diagonal_element(2, 2, 2.0)
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![0.0, f64::NEG_INFINITY], vec![0.5, f64::INFINITY])
        }
    }

    #[test]
    fn active_bound_is_found() {
        let r = solve(&Quadratic, &DVector::from_vec(vec![0.2, 0.2]), &IpmOptions::default()).unwrap();
        assert!((r.z[0] - 0.5).abs() < 1e-6);
        assert!((r.z[1] - 0.5).abs() < 1e-6);
    }

    /// min -x*y on the circle x^2 + y^2 = 2 with x, y in [0, 5]
    struct Circle;

    impl Nlp for Circle {
        fn dim(&self) -> usize {
            2
        }
        fn objective(&self, z: &DVector<f64>) -> f64 {
            -z[0] * z[1]
        }
        fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![-z[1], -z[0]])
        }
        fn constraints(&self, z: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![z[0] * z[0] + z[1] * z[1] - 2.0])
        }
        fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_row_slice(1, 2, &[2.0 * z[0], 2.0 * z[1]])
        }
        fn hessian(&self, _: &DVector<f64>, l: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_row_slice(2, 2, &[2.0 * l[0], -1.0, -1.0, 2.0 * l[0]])
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![0.0, 0.0], vec![5.0, 5.0])
        }
    }

    #[test]
    fn nonlinear_equality() {
        let r = solve(&Circle, &DVector::from_vec(vec![1.3, 0.7]), &IpmOptions::default()).unwrap();
        assert!((r.z[0] - 1.0).abs() < 1e-6 && (r.z[1] - 1.0).abs() < 1e-6, "{}", r.z);
    }
}
