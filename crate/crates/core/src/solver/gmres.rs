//! Restarted GMRES for matrix-free complex operators.

use crate::error::{Error, Result};
use crate::geometry::{C64, ZERO};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            tol: 1e-8,
            max_iter: 2000,
            restart: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<C64>,
    pub iterations: usize,
    /// Relative residual estimate after every iteration (index 0 is the
    /// initial residual).
    pub residual_history: Vec<f64>,
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Solves `A x = b` starting from `x = 0`, stopping when
/// `‖b − Ax‖ ≤ tol·‖b‖`.
pub fn gmres(
    apply: impl Fn(&[C64]) -> Vec<C64>,
    b: &[C64],
    opts: &GmresOptions,
) -> Result<GmresOutcome> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![ZERO; n];
    let mut history = vec![1.0];
    if bnorm == 0.0 {
        return Ok(GmresOutcome {
            x,
            iterations: 0,
            residual_history: vec![0.0],
        });
    }
    if !bnorm.is_finite() {
        return Err(Error::Numerical("non-finite right-hand side".into()));
    }
    let m = opts.restart.max(1);
    let mut iterations = 0;
    let mut r = b.to_vec();
    loop {
        let beta = norm(&r);
        let rel = beta / bnorm;
        if rel <= opts.tol {
            return Ok(GmresOutcome {
                x,
                iterations,
                residual_history: history,
            });
        }
        if iterations >= opts.max_iter || !rel.is_finite() {
            return Err(Error::SolverDiverged {
                iterations,
                final_residual: rel,
                residual_history: history,
                incident: None,
            });
        }
        let mut basis: Vec<Vec<C64>> = vec![r.iter().map(|c| c / beta).collect()];
        let mut hess: Vec<Vec<C64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<C64> = Vec::new();
        let mut g = vec![C64::new(beta, 0.0)];
        let mut steps = 0;
        for kk in 0..m {
            if iterations >= opts.max_iter {
                break;
            }
            let mut v = apply(&basis[kk]);
            let mut col = vec![ZERO; kk + 2];
            for (i, q) in basis.iter().enumerate() {
                let hij = dot(q, &v);
                col[i] = hij;
                v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= hij * qi);
            }
            let hn = norm(&v);
            col[kk + 1] = C64::new(hn, 0.0);
            for i in 0..kk {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i].conj() * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let (c, s, rho) = givens(col[kk], col[kk + 1]);
            col[kk] = rho;
            col[kk + 1] = ZERO;
            cs.push(c);
            sn.push(s);
            g.push(-s.conj() * g[kk]);
            g[kk] *= c;
            hess.push(col);
            iterations += 1;
            steps += 1;
            let est = g[kk + 1].norm() / bnorm;
            history.push(est);
            if est <= opts.tol || hn == 0.0 {
                break;
            }
            basis.push(v.iter().map(|c| c / hn).collect());
        }
        let mut y = vec![ZERO; steps];
        for i in (0..steps).rev() {
            let mut acc = g[i];
            for (j, yj) in y.iter().enumerate().skip(i + 1) {
                acc -= hess[j][i] * yj;
            }
            y[i] = acc / hess[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            x.iter_mut().zip(&basis[j]).for_each(|(xi, q)| *xi += yj * q);
        }
        let ax = apply(&x);
        r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        if let Some(last) = history.last_mut() {
            *last = norm(&r) / bnorm;
        }
    }
}

/// Complex Givens rotation zeroing `b` in `(a, b)`, with real cosine.
fn givens(a: C64, b: C64) -> (f64, C64, C64) {
    let na = a.norm();
    let nb = b.norm();
    if nb == 0.0 {
        return (1.0, ZERO, a);
    }
    if na == 0.0 {
        return (0.0, b.conj() / nb, C64::new(nb, 0.0));
    }
    let r = na.hypot(nb);
    let phase = a / na;
    let c = na / r;
    let s = phase * b.conj() / r;
    (c, s, phase * r)
}
