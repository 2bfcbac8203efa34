//! Damped Gauss-Newton (Levenberg-Marquardt) for small dense problems.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub initial_damping: f64,
    /// Stop when the relative decrease of the cost falls below this.
    pub cost_tolerance: f64,
    /// Stop when the step is this small relative to the parameters.
    pub step_tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            initial_damping: 1e-3,
            cost_tolerance: 1e-15,
            step_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    /// Cost after every accepted step, starting with the initial cost.
    pub trace: Vec<f64>,
}

fn cost(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|x| x * x).sum::<f64>()
}

fn jacobian<F: Fn(&[f64]) -> Vec<f64>>(f: &F, x: &[f64], r0: &[f64]) -> Vec<Vec<f64>> {
    // column k holds d r / d x_k, central differences
    (0..x.len())
        .map(|k| {
            let h = 1e-7 * x[k].abs().max(1e-3);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += h;
            xm[k] -= h;
            let rp = f(&xp);
            let rm = f(&xm);
            debug_assert_eq!(rp.len(), r0.len());
            rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        })
        .collect()
}

/// Gaussian elimination with partial pivoting; `None` for singular systems.
pub(crate) fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot = &upper[col];
        for (offset, r) in lower.iter_mut().enumerate() {
            let factor = r[col] / pivot[col];
            for (x, p) in r[col..].iter_mut().zip(&pivot[col..]) {
                *x -= factor * p;
            }
            b[col + 1 + offset] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Minimizes `0.5 |r(x)|^2`. A step is accepted only if it lowers the cost;
/// otherwise the damping grows and the step is retried.
pub fn levenberg_marquardt<F>(f: F, x0: &[f64], opts: &LmOptions) -> Result<LmResult>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = f(&x);
    if r.len() < n {
        return Err(Error::InsufficientData(format!(
            "{} residuals for {} parameters",
            r.len(),
            n
        )));
    }
    let mut c = cost(&r);
    let mut trace = vec![c];
    let mut lambda = opts.initial_damping;
    for it in 0..opts.max_iterations {
        let jac = jacobian(&f, &x, &r);
        let mut jtj = vec![vec![0.0; n]; n];
        let mut jtr = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                jtj[i][j] = jac[i].iter().zip(&jac[j]).map(|(a, b)| a * b).sum();
            }
            jtr[i] = jac[i].iter().zip(&r).map(|(a, b)| a * b).sum();
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut m = jtj.clone();
            for i in 0..n {
                m[i][i] += lambda * jtj[i][i].max(1e-12);
            }
            let Some(step) = solve_dense(m, jtr.iter().map(|v| -v).collect()) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            let rt = f(&trial);
            let ct = cost(&rt);
            if ct.is_finite() && ct < c {
                let rel_step = step
                    .iter()
                    .zip(&x)
                    .map(|(s, p)| s.abs() / p.abs().max(1e-12))
                    .fold(0.0, f64::max);
                let rel_cost = (c - ct) / c.max(1e-300);
                x = trial;
                r = rt;
                c = ct;
                trace.push(c);
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel_cost < opts.cost_tolerance || rel_step < opts.step_tolerance {
                    return Ok(LmResult {
                        params: x,
                        residuals: r,
                        cost: c,
                        iterations: it + 1,
                        trace,
                    });
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill step at any damping: a (local) minimum
            return Ok(LmResult {
                params: x,
                residuals: r,
                cost: c,
                iterations: it + 1,
                trace,
            });
        }
        if c == 0.0 {
            return Ok(LmResult {
                params: x,
                residuals: r,
                cost: c,
                iterations: it + 1,
                trace,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_exponential_decay() {
        let ts: Vec<f64> = (0..30).map(|k| k as f64 * 0.2).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 2.5 * (-0.7 * t).exp() + 0.3).collect();
        let res = levenberg_marquardt(
            |p| {
                ts.iter()
                    .zip(&ys)
                    .map(|(t, y)| p[0] * (-p[1] * t).exp() + p[2] - y)
                    .collect()
            },
            &[1.0, 0.2, 0.0],
            &LmOptions::default(),
        )
        .unwrap();
        assert!((res.params[0] - 2.5).abs() < 1e-6);
        assert!((res.params[1] - 0.7).abs() < 1e-6);
        assert!((res.params[2] - 0.3).abs() < 1e-6);
        assert!(res.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rejects_underdetermined_problems() {
        let r = levenberg_marquardt(|p| vec![p[0] + p[1]], &[0.0, 0.0], &LmOptions::default());
        assert!(matches!(r, Err(Error::InsufficientData(_))));
    }

    #[test]
    fn reports_non_convergence() {
        let opts = LmOptions {
            max_iterations: 2,
            ..LmOptions::default()
        };
        let r = levenberg_marquardt(|p| vec![p[0].exp() - 1e6, p[0] - 30.0], &[0.0], &opts);
        assert!(matches!(r, Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn dense_solver() {
        let x = solve_dense(vec![vec![2.0, 1.0], vec![1.0, 3.0]], vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!(solve_dense(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 2.0]).is_none());
    }
}
