use nalgebra::DMatrix;
use num_complex::Complex64;

/// Net injections `P_i + jQ_i = V_i conj(sum_k Y_ik V_k)` in polar coordinates.
pub fn injections(y: &DMatrix<Complex64>, v: &[f64], theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = v.len();
    let volts: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(v[i], theta[i])).collect();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        let mut current = Complex64::new(0.0, 0.0);
        for k in 0..n {
            let yik = y[(i, k)];
            if yik.re != 0.0 || yik.im != 0.0 {
                current += yik * volts[k];
            }
        }
        let s = volts[i] * current.conj();
        p[i] = s.re;
        q[i] = s.im;
    }
    (p, q)
}

/// Partial derivatives of the injections with respect to angles and magnitudes.
#[derive(Clone, Debug)]
pub struct InjectionJacobian {
    pub dp_dtheta: DMatrix<f64>,
    pub dp_dv: DMatrix<f64>,
    pub dq_dtheta: DMatrix<f64>,
    pub dq_dv: DMatrix<f64>,
}

impl InjectionJacobian {
    pub fn new(y: &DMatrix<Complex64>, v: &[f64], theta: &[f64]) -> Self {
        let n = v.len();
        let volts: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(v[i], theta[i])).collect();
        let current: Vec<Complex64> = (0..n).map(|i| (0..n).map(|k| y[(i, k)] * volts[k]).sum()).collect();

        let mut dp_dtheta = DMatrix::zeros(n, n);
        let mut dp_dv = DMatrix::zeros(n, n);
        let mut dq_dtheta = DMatrix::zeros(n, n);
        let mut dq_dv = DMatrix::zeros(n, n);
        let j = Complex64::new(0.0, 1.0);
        for i in 0..n {
            for k in 0..n {
                let yik = y[(i, k)];
                // dS_i/dtheta_k = j V_i conj(I_i) delta_ik - j V_i conj(Y_ik V_k)
                let mut ds_dtheta = -j * volts[i] * (yik * volts[k]).conj();
                // dS_i/dV_k = V_i conj(Y_ik e^{j theta_k}) + delta_ik conj(I_i) e^{j theta_i}
                let unit_k = Complex64::from_polar(1.0, theta[k]);
                let mut ds_dv = volts[i] * (yik * unit_k).conj();
                if i == k {
                    ds_dtheta += j * volts[i] * current[i].conj();
                    ds_dv += current[i].conj() * Complex64::from_polar(1.0, theta[i]);
                }
                dp_dtheta[(i, k)] = ds_dtheta.re;
                dq_dtheta[(i, k)] = ds_dtheta.im;
                dp_dv[(i, k)] = ds_dv.re;
                dq_dv[(i, k)] = ds_dv.im;
            }
        }
        Self { dp_dtheta, dp_dv, dq_dtheta, dq_dv }
    }
}

/// Hessian of `sum_i mu_p[i] P_i + mu_q[i] Q_i` with respect to `[theta; V]`
/// (`2n x 2n`, angles first).
pub(crate) fn weighted_hessian(
    y: &DMatrix<Complex64>,
    v: &[f64],
    theta: &[f64],
    mu_p: &[f64],
    mu_q: &[f64],
) -> DMatrix<f64> {
    let n = v.len();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        let (mp, mq) = (mu_p[i], mu_q[i]);
        if mp == 0.0 && mq == 0.0 {
            continue;
        }
        for k in 0..n {
            let Complex64 { re: g, im: b } = y[(i, k)];
            if g == 0.0 && b == 0.0 {
                continue;
            }
            if i == k {
                // P_ii = G V^2, Q_ii = -B V^2
                h[(n + i, n + i)] += 2.0 * (mp * g - mq * b);
                continue;
            }
            let a = theta[i] - theta[k];
            let (s, c) = a.sin_cos();
            // weighted f, f' for the term V_i V_k f(theta_i - theta_k); f'' = -f
            let f = mp * (g * c + b * s) + mq * (g * s - b * c);
            let fp = mp * (-g * s + b * c) + mq * (g * c + b * s);
            let (vi, vk) = (v[i], v[k]);
            let (ti, tk, ui, uk) = (i, k, n + i, n + k);
            let vv = vi * vk;
            h[(ti, ti)] += -vv * f;
            h[(tk, tk)] += -vv * f;
            h[(ti, tk)] += vv * f;
            h[(tk, ti)] += vv * f;

            h[(ti, ui)] += vk * fp;
            h[(ui, ti)] += vk * fp;
            h[(ti, uk)] += vi * fp;
            h[(uk, ti)] += vi * fp;
            h[(tk, ui)] += -vk * fp;
            h[(ui, tk)] += -vk * fp;
            h[(tk, uk)] += -vi * fp;
            h[(uk, tk)] += -vi * fp;

            h[(ui, uk)] += f;
            h[(uk, ui)] += f;
        }
    }
    h
}
