//! Bounded least squares: `min ‖X·f − y‖²` subject to `f ≥ 0` and, optionally,
//! `Σ f ≤ 1`.
//!
//! Primal active-set method on the normal equations. Small problems only:
//! each iteration solves a dense KKT system.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub coefficients: Vec<f64>,
    /// Constraints holding with equality at the solution: indices `< p` are
    /// `f_i = 0`, index `p` is `Σ f = 1`.
    pub active: Vec<usize>,
    pub iterations: usize,
}

/// Constraint `a·f ≥ b`.
fn constraint(p: usize, i: usize) -> (DVector<f64>, f64) {
    if i < p {
        let mut a = DVector::zeros(p);
        a[i] = 1.0;
        (a, 0.0)
    } else {
        (DVector::from_element(p, -1.0), -1.0)
    }
}

pub fn bounded_least_squares(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    simplex: bool,
) -> Result<QpSolution> {
    let p = x.ncols();
    if p == 0 || x.nrows() != y.len() {
        return Err(Error::Fit("design matrix and data do not match".into()));
    }
    let g = x.transpose() * x;
    let c = x.transpose() * y;
    let n_con = if simplex { p + 1 } else { p };
    let cons: Vec<(DVector<f64>, f64)> = (0..n_con).map(|i| constraint(p, i)).collect();
    let scale = g.amax().max(f64::MIN_POSITIVE);

    let mut f = DVector::<f64>::zeros(p);
    let mut working: Vec<usize> = Vec::new();
    let max_iter = 50 * (n_con + 1);
    for iter in 0..max_iter {
        let grad = &g * &f - &c;
        let k = working.len();
        let mut kkt = DMatrix::<f64>::zeros(p + k, p + k);
        kkt.view_mut((0, 0), (p, p)).copy_from(&g);
        for (j, &w) in working.iter().enumerate() {
            let a = &cons[w].0;
            for r in 0..p {
                kkt[(r, p + j)] = -a[r] * scale;
                kkt[(p + j, r)] = a[r] * scale;
            }
        }
        let mut rhs = DVector::<f64>::zeros(p + k);
        rhs.rows_mut(0, p).copy_from(&(-&grad));
        let sol = kkt
            .lu()
            .solve(&rhs)
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::Fit("basis functions are linearly dependent".into()))?;
        let step = sol.rows(0, p).into_owned();

        if step.norm() <= 1e-12 * (1.0 + f.norm()) {
            let lambdas: Vec<f64> = (0..k).map(|j| sol[p + j] * scale).collect();
            let worst = lambdas
                .iter()
                .enumerate()
                .filter(|(_, &l)| l < -1e-12 * (1.0 + c.amax()))
                .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)));
            match worst {
                None => {
                    let mut active = working.clone();
                    active.sort_unstable();
                    return Ok(QpSolution {
                        coefficients: f.iter().map(|v| v.max(0.0)).collect(),
                        active,
                        iterations: iter + 1,
                    });
                }
                Some((j, _)) => {
                    working.remove(j);
                }
            }
            continue;
        }

        let mut alpha = 1.0;
        let mut blocking = None;
        for (i, (a, b)) in cons.iter().enumerate() {
            if working.contains(&i) {
                continue;
            }
            let ap = a.dot(&step);
            if ap < 0.0 {
                let t = ((b - a.dot(&f)) / ap).max(0.0);
                if t < alpha {
                    alpha = t;
                    blocking = Some(i);
                }
            }
        }
        f += alpha * &step;
        if let Some(i) = blocking {
            working.push(i);
        }
    }
    Err(Error::Fit(format!(
        "active-set iteration did not converge in {max_iter} steps"
    )))
}
