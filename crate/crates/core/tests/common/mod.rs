#![allow(dead_code)]

use pdi_core::operators::{CMatrix, CVector};
use pdi_core::C64;

/// Reflection and transmission of a symmetric slab `|y| < t` with
/// `(a u')' + k² n u = 0` inside and `u'' + k² u = 0` outside, for the wave
/// `amp·e^{iky}` coming from below. Returns `(R, T)` with
/// `u = amp e^{iky} + R e^{−iky}` below and `u = T e^{iky}` above.
pub fn slab_transfer(k: f64, t: f64, a: f64, n: f64, amp: C64) -> (C64, C64) {
    let i = C64::new(0.0, 1.0);
    let kap = k * (n / a).sqrt();
    // State (u, a u') propagated upward through the slab.
    let layer = |d: f64| -> [[C64; 2]; 2] {
        let c = C64::new((kap * d).cos(), 0.0);
        let s = C64::new((kap * d).sin(), 0.0);
        [[c, s / (a * kap)], [-(a * kap) * s, c]]
    };
    let m = layer(2.0 * t);
    // Below at y = −t: u = amp e^{−ikt} + R e^{ikt}, u' = ik(amp e^{−ikt} − R e^{ikt}).
    // Above at y = t: u = T e^{ikt}, u' = ik T e^{ikt}.
    // m · (u₋, u₋') = (u₊, u₊'): two equations in (R, T).
    let em = (-i * k * t).exp();
    let ep = (i * k * t).exp();
    let u_r = ep;
    let d_r = -i * k * ep;
    let u_a = amp * em;
    let d_a = i * k * amp * em;
    // rows: m00 u + m01 d − T ep = 0 ; m10 u + m11 d − ik T ep = 0
    let a11 = m[0][0] * u_r + m[0][1] * d_r;
    let a12 = -ep;
    let b1 = -(m[0][0] * u_a + m[0][1] * d_a);
    let a21 = m[1][0] * u_r + m[1][1] * d_r;
    let a22 = -i * k * ep;
    let b2 = -(m[1][0] * u_a + m[1][1] * d_a);
    let det = a11 * a22 - a12 * a21;
    let r = (b1 * a22 - a12 * b2) / det;
    let tt = (a11 * b2 - a21 * b1) / det;
    (r, tt)
}

pub fn lcg(state: &mut u64) -> f64 {
    *state = state
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    (*state >> 11) as f64 / (1u64 << 53) as f64
}

/// Cyclic Jacobi eigendecomposition of a real symmetric matrix (row-major),
/// returning eigenvalues and column eigenvectors.
pub fn jacobi(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j].powi(2)).sum();
        if off < 1e-32 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// `|H|` of a Hermitian matrix through the real symmetric embedding
/// `[[Re H, −Im H], [Im H, Re H]]`.
pub fn abs_oracle(h: &CMatrix) -> CMatrix {
    let n = h.nrows();
    let mut e = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            let c = h[(i, j)];
            e[i][j] = c.re;
            e[i + n][j + n] = c.re;
            e[i][j + n] = -c.im;
            e[i + n][j] = c.im;
        }
    }
    let (lam, v) = jacobi(e);
    let m = 2 * n;
    let abs = |i: usize, j: usize| (0..m).map(|k| v[i][k] * lam[k].abs() * v[j][k]).sum::<f64>();
    CMatrix::from_fn(n, n, |i, j| C64::new(abs(i, j), abs(i + n, j)))
}

pub fn sharp_oracle(f: &CMatrix) -> CMatrix {
    let re = (f + f.adjoint()) * C64::new(0.5, 0.0);
    let im = (f - f.adjoint()) * C64::new(0.0, -0.5);
    abs_oracle(&re) + abs_oracle(&im)
}


/// Cost evaluated entry by entry.
pub fn cost(n: &CMatrix, s: &CMatrix, phi: &CVector, alpha: f64, shift: f64, a: &[C64]) -> f64 {
    let dim = a.len();
    let mut pen = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            pen += (a[i].conj() * s[(i, j)] * a[j]).re;
        }
        pen += shift * a[i].norm_sqr();
    }
    let mut fit = 0.0;
    for r in 0..n.nrows() {
        let mut v = -phi[r];
        for c in 0..dim {
            v += n[(r, c)] * a[c];
        }
        fit += v.norm_sqr();
    }
    alpha * pen + fit
}

/// Coarse grid search on each real coordinate followed by coordinate descent
/// with three-point parabolic line minimization.
pub fn descent_oracle(n: &CMatrix, s: &CMatrix, phi: &CVector, alpha: f64, shift: f64) -> Vec<C64> {
    let dim = n.ncols();
    let mut a = vec![C64::default(); dim];
    let f = |a: &[C64]| cost(n, s, phi, alpha, shift, a);
    let set = |a: &mut [C64], k: usize, v: f64| {
        if k % 2 == 0 {
            a[k / 2].re = v
        } else {
            a[k / 2].im = v
        }
    };
    let get = |a: &[C64], k: usize| if k % 2 == 0 { a[k / 2].re } else { a[k / 2].im };
    for k in 0..2 * dim {
        let mut best = (f(&a), 0.0);
        for t in -40..=40 {
            let v = t as f64 * 0.05;
            set(&mut a, k, v);
            let c = f(&a);
            if c < best.0 {
                best = (c, v);
            }
        }
        set(&mut a, k, best.1);
    }
    let mut prev = f(&a);
    for _ in 0..200_000 {
        for k in 0..2 * dim {
            let x0 = get(&a, k);
            let h = 1e-3;
            let c0 = f(&a);
            set(&mut a, k, x0 + h);
            let cp = f(&a);
            set(&mut a, k, x0 - h);
            let cm = f(&a);
            let curv = cp - 2.0 * c0 + cm;
            let step = if curv > 0.0 { -h * (cp - cm) / (2.0 * curv) } else { 0.0 };
            set(&mut a, k, x0 + step);
        }
        let c = f(&a);
        if (prev - c).abs() <= 1e-15 * c {
            break;
        }
        prev = c;
    }
    a
}

