//! Mode-space evaluation of the volume potential
//! `x ↦ ∇·∫ G_M(x−y) g₁(y) dy + k² ∫ G_M(x−y) g₂(y) dy`.
//!
//! The `ML`-periodic convolution is diagonalized by a transverse FFT. For
//! each mode the vertical convolution with `K(t) = (i/2β) e^{iβ|t|}` is done
//! by the midpoint rule on the cell-centred rows, evaluated with two
//! exponential recursions so that the cost is linear in the number of rows.

use std::ops::Range;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::grid::Grid;
use crate::geometry::{WaveParams, C64, I, ZERO};

#[derive(Debug, Clone, Copy)]
struct ModeConst {
    alpha: f64,
    beta: C64,
    step: C64,
    half: C64,
    pre: C64,
}

/// Reusable FFT plans and per-mode constants for one grid.
pub struct Potential {
    grid: Grid,
    k2: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    modes: Vec<Option<ModeConst>>,
}

/// Potential and its gradient on a band of rows, plus optional traces.
#[derive(Debug, Clone)]
pub struct PotentialOutput {
    pub rows: Range<usize>,
    pub w: Vec<C64>,
    pub wx: Vec<C64>,
    pub wy: Vec<C64>,
    pub top: Option<Vec<C64>>,
    pub bottom: Option<Vec<C64>>,
}

impl Potential {
    pub fn new(params: &WaveParams, grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let dy = grid.dy;
        let modes = (0..grid.nx)
            .map(|m| {
                grid.mode_of_bin(m).map(|l| {
                    let beta = params.beta(l);
                    ModeConst {
                        alpha: params.alpha(l),
                        beta,
                        step: (I * beta * dy).exp(),
                        half: (I * beta * (0.5 * dy)).exp(),
                        pre: I * dy / (2.0 * beta),
                    }
                })
            })
            .collect();
        Potential {
            grid,
            k2: params.k() * params.k(),
            fwd: planner.plan_fft_forward(grid.nx),
            inv: planner.plan_fft_inverse(grid.nx),
            modes,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Evaluates the potential of `(g₁, g₂) = ((gx, gy), g2)`, given on the
    /// rows `src_rows` (row-major, `N_x` per row), at the rows `out_rows`.
    pub fn apply(
        &self,
        src_rows: Range<usize>,
        gx: &[C64],
        gy: &[C64],
        g2: &[C64],
        out_rows: Range<usize>,
        traces: bool,
    ) -> PotentialOutput {
        let nx = self.grid.nx;
        let ny = self.grid.ny;
        let ns = src_rows.len();
        assert!(src_rows.end <= ny && out_rows.end <= ny);
        assert!(gx.len() == ns * nx && gy.len() == ns * nx && g2.len() == ns * nx);

        let spectra: Vec<Vec<C64>> = [gx, gy, g2]
            .into_iter()
            .map(|g| self.forward(g))
            .collect();

        let lo = src_rows.start.min(out_rows.start);
        let hi = src_rows.end.max(out_rows.end);
        let no = out_rows.len();

        let per_mode: Vec<ModeResult> = (0..nx)
            .into_par_iter()
            .map(|m| match &self.modes[m] {
                None => ModeResult::zero(no),
                Some(mc) => self.mode_solve(mc, m, &spectra, &src_rows, lo..hi, &out_rows, traces),
            })
            .collect();

        let mut w = vec![ZERO; no * nx];
        let mut wx = vec![ZERO; no * nx];
        let mut wy = vec![ZERO; no * nx];
        for (m, r) in per_mode.iter().enumerate() {
            for t in 0..no {
                w[t * nx + m] = r.w[t];
                wx[t * nx + m] = r.wx[t];
                wy[t * nx + m] = r.wy[t];
            }
        }
        self.inverse(&mut w);
        self.inverse(&mut wx);
        self.inverse(&mut wy);

        let (top, bottom) = if traces {
            let mut top: Vec<C64> = per_mode.iter().map(|r| r.top).collect();
            let mut bottom: Vec<C64> = per_mode.iter().map(|r| r.bottom).collect();
            self.inv.process(&mut top);
            self.inv.process(&mut bottom);
            (Some(top), Some(bottom))
        } else {
            (None, None)
        };

        PotentialOutput {
            rows: out_rows,
            w,
            wx,
            wy,
            top,
            bottom,
        }
    }

    fn forward(&self, g: &[C64]) -> Vec<C64> {
        let nx = self.grid.nx;
        let scale = 1.0 / nx as f64;
        let mut buf = g.to_vec();
        buf.par_chunks_mut(nx).for_each(|row| {
            self.fwd.process(row);
            row.iter_mut().for_each(|c| *c *= scale);
        });
        buf
    }

    fn inverse(&self, buf: &mut [C64]) {
        buf.par_chunks_mut(self.grid.nx)
            .for_each(|row| self.inv.process(row));
    }

    #[allow(clippy::too_many_arguments)]
    fn mode_solve(
        &self,
        mc: &ModeConst,
        m: usize,
        spectra: &[Vec<C64>],
        src_rows: &Range<usize>,
        span: Range<usize>,
        out_rows: &Range<usize>,
        traces: bool,
    ) -> ModeResult {
        let nx = self.grid.nx;
        let column = |c: usize| -> Vec<C64> {
            (span.clone())
                .map(|r| {
                    if src_rows.contains(&r) {
                        spectra[c][(r - src_rows.start) * nx + m]
                    } else {
                        ZERO
                    }
                })
                .collect()
        };
        let conv: Vec<Conv> = (0..3).map(|c| Conv::new(mc, &column(c), self.grid.dy)).collect();

        let ia = I * mc.alpha;
        let k2 = self.k2;
        let b2 = mc.beta * mc.beta;
        let no = out_rows.len();
        let mut res = ModeResult::zero(no);
        for (t, r) in out_rows.clone().enumerate() {
            let i = r - span.start;
            let (cx, cy, c2) = (&conv[0], &conv[1], &conv[2]);
            let w = ia * cx.c(mc, i) + cy.d(i) + k2 * c2.c(mc, i);
            res.w[t] = w;
            res.wx[t] = ia * w;
            res.wy[t] = ia * cx.d(i) - b2 * cy.c(mc, i) - cy.s[i] + k2 * c2.d(i);
        }
        if traces {
            let ny = self.grid.ny;
            let up = (I * mc.beta * ((ny - span.end) as f64 * self.grid.dy)).exp();
            let down = (I * mc.beta * (span.start as f64 * self.grid.dy)).exp();
            let tr = |cv: &Conv| mc.pre * mc.half * up * cv.upper_tail();
            let br = |cv: &Conv| mc.pre * mc.half * down * cv.lower_tail();
            let ib = I * mc.beta;
            res.top = ia * tr(&conv[0]) + ib * tr(&conv[1]) + k2 * tr(&conv[2]);
            res.bottom = ia * br(&conv[0]) - ib * br(&conv[1]) + k2 * br(&conv[2]);
        }
        res
    }
}

struct ModeResult {
    w: Vec<C64>,
    wx: Vec<C64>,
    wy: Vec<C64>,
    top: C64,
    bottom: C64,
}

impl ModeResult {
    fn zero(n: usize) -> Self {
        ModeResult {
            w: vec![ZERO; n],
            wx: vec![ZERO; n],
            wy: vec![ZERO; n],
            top: ZERO,
            bottom: ZERO,
        }
    }
}

/// Partial exponential sums of one modal column:
/// `a[i] = Σ_{m<i} E^{i−m} s[m]`, `b[i] = Σ_{m>i} E^{m−i} s[m]`.
struct Conv {
    dy: f64,
    s: Vec<C64>,
    a: Vec<C64>,
    b: Vec<C64>,
}

impl Conv {
    fn new(mc: &ModeConst, s: &[C64], dy: f64) -> Self {
        let n = s.len();
        let mut a = vec![ZERO; n];
        let mut b = vec![ZERO; n];
        for i in 1..n {
            a[i] = mc.step * (a[i - 1] + s[i - 1]);
        }
        for i in (0..n.saturating_sub(1)).rev() {
            b[i] = mc.step * (b[i + 1] + s[i + 1]);
        }
        Conv {
            dy,
            s: s.to_vec(),
            a,
            b,
        }
    }

    /// Midpoint value of `K * s`.
    fn c(&self, mc: &ModeConst, i: usize) -> C64 {
        mc.pre * (self.a[i] + self.b[i] + self.s[i])
    }

    /// Midpoint value of `K' * s` with `K'(0) = 0`.
    fn d(&self, i: usize) -> C64 {
        -0.5 * self.dy * (self.a[i] - self.b[i])
    }

    fn upper_tail(&self) -> C64 {
        let n = self.s.len();
        if n == 0 {
            ZERO
        } else {
            self.a[n - 1] + self.s[n - 1]
        }
    }

    fn lower_tail(&self) -> C64 {
        if self.s.is_empty() {
            ZERO
        } else {
            self.b[0] + self.s[0]
        }
    }

}
