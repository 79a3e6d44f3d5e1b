//! Regularized GLSM minimizations and the differential imaging indicator.

use nalgebra::Cholesky;
use rayon::prelude::*;

use crate::config::{AlphaRule, ImagingSettings};
use crate::error::{Error, Result};
use crate::geometry::{MediaConfig, Point, Region, WaveParams, C64};
use crate::green::{rayleigh_of_point_source, rayleigh_of_point_source_q, Side};
use crate::operators::{
    class_positions, near_field_q, restrict_matrix, sharp, CMatrix, CVector, NearFieldData,
};

/// Rectangular lattice of sampling points `z`, cell-centred in the extent.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingGrid {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl SamplingGrid {
    /// Lattice over `extent` with spacing as close to `spacing` as fits.
    pub fn with_spacing(extent: [[f64; 2]; 2], spacing: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::config("imaging.sampling_res", "must be positive"));
        }
        let count = |a: f64, b: f64| (((b - a) / spacing).round() as usize).max(1);
        Ok(SamplingGrid {
            x: extent[0],
            y: extent[1],
            nx: count(extent[0][0], extent[0][1]),
            ny: count(extent[1][0], extent[1][1]),
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step(&self) -> [f64; 2] {
        [
            (self.x[1] - self.x[0]) / self.nx as f64,
            (self.y[1] - self.y[0]) / self.ny as f64,
        ]
    }

    /// Point `idx` in row-major order (`y` outer, `x` inner).
    pub fn point(&self, idx: usize) -> Point {
        let [sx, sy] = self.step();
        let (i, j) = (idx % self.nx, idx / self.nx);
        [
            self.x[0] + (i as f64 + 0.5) * sx,
            self.y[0] + (j as f64 + 0.5) * sy,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlsmOptions {
    pub alpha_rule: AlphaRule,
    pub alpha0: f64,
    /// Noise level `δ` entering the penalty.
    pub delta: f64,
    pub q: i64,
    pub sampling: SamplingGrid,
}

impl GlsmOptions {
    pub fn from_settings(s: &ImagingSettings) -> Result<Self> {
        if !(s.alpha0.is_finite() && s.alpha0 > 0.0) {
            return Err(Error::config("imaging.alpha0", "must be positive"));
        }
        Ok(GlsmOptions {
            alpha_rule: s.alpha_rule,
            alpha0: s.alpha0,
            delta: s.delta,
            q: s.q,
            sampling: SamplingGrid::with_spacing(s.extent, s.sampling_res)?,
        })
    }

    pub fn alpha(&self, sharp_norm: f64) -> f64 {
        match self.alpha_rule {
            AlphaRule::Fixed => self.alpha0,
            AlphaRule::Scaled => self.alpha0 * sharp_norm,
        }
    }
}

/// Spectral norm of a Hermitian matrix.
pub fn hermitian_norm(a: &CMatrix) -> f64 {
    a.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0, |m, l| m.max(l.abs()))
}

/// `(A a, a)` for Hermitian `A` (real up to roundoff).
pub fn quad(a: &CMatrix, v: &CVector) -> f64 {
    v.dotc(&(a * v)).re
}

/// `α[(N♯a, a) + δ‖N♯‖‖a‖²] + ‖Na − φ‖²`.
pub fn glsm_cost(n: &CMatrix, nsharp: &CMatrix, phi: &CVector, alpha: f64, delta: f64, a: &CVector) -> f64 {
    let nn = hermitian_norm(nsharp);
    alpha * (quad(nsharp, a) + delta * nn * a.norm_squared()) + (n * a - phi).norm_squared()
}

fn check_finite(m: &CMatrix, what: &str) -> Result<()> {
    if m.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("non-finite entries in {what}")))
    }
}

/// Cholesky factor of `α(P + δ‖N♯‖I) + N*N` for a penalty `P`.
fn normal_factor(n: &CMatrix, penalty: &CMatrix, alpha: f64, shift: f64) -> Result<Cholesky<C64, nalgebra::Dyn>> {
    let dim = penalty.nrows();
    let mut a = (penalty + CMatrix::identity(dim, dim) * C64::new(shift, 0.0)) * C64::new(alpha, 0.0)
        + n.adjoint() * n;
    a = (&a + a.adjoint()) * C64::new(0.5, 0.0);
    Cholesky::new(a).ok_or_else(|| {
        Error::Numerical("GLSM normal matrix is not positive definite".into())
    })
}

/// Exact minimizer of `α[(N♯a, a) + δ‖N♯‖‖a‖²] + ‖Na − φ‖²`.
pub fn glsm_minimize(
    n: &CMatrix,
    nsharp: &CMatrix,
    phi: &CVector,
    alpha: f64,
    delta: f64,
) -> Result<CVector> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::config("imaging.alpha0", "regularization must be positive"));
    }
    if n.ncols() != nsharp.nrows() || !nsharp.is_square() || n.nrows() != phi.len() {
        return Err(Error::Consistency("GLSM dimensions disagree".into()));
    }
    check_finite(n, "N")?;
    check_finite(nsharp, "N♯")?;
    if phi.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::Numerical("non-finite right-hand side".into()));
    }
    let shift = delta * hermitian_norm(nsharp);
    let chol = normal_factor(n, nsharp, alpha, shift)?;
    Ok(chol.solve(&(n.adjoint() * phi)))
}

/// Factorized GLSM problems for one side of data.
pub struct GlsmSystem {
    pub side: Side,
    pub q: i64,
    pub alpha: f64,
    pub delta: f64,
    pub n: CMatrix,
    pub nsharp: CMatrix,
    pub sharp_norm: f64,
    positions: Vec<usize>,
    n_adj: CMatrix,
    nq_adj: CMatrix,
    full: Cholesky<C64, nalgebra::Dyn>,
    reduced: Cholesky<C64, nalgebra::Dyn>,
}

/// Per-point quantities behind the indicator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IndicatorDiagnostics {
    /// `G(a^{α,z}) = (N♯a, a) + δ‖N♯‖‖a‖²`.
    pub cost_full: f64,
    /// `(N♯a_q, a_q)`.
    pub cost_q: f64,
    /// `D(a_q, ã_q)`.
    pub d_term: f64,
    /// `D` vanished and the indicator was set to zero.
    pub degenerate: bool,
}

impl GlsmSystem {
    pub fn new(data: &NearFieldData, params: &WaveParams, opts: &GlsmOptions) -> Result<Self> {
        data.meta.check_matches(params)?;
        let n = data.matrix.clone();
        check_finite(&n, "N")?;
        let nsharp = sharp(&n)?;
        let sharp_norm = hermitian_norm(&nsharp);
        let alpha = opts.alpha(sharp_norm);
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Numerical(
                "regularization parameter vanished (zero data?)".into(),
            ));
        }
        let shift = opts.delta * sharp_norm;
        let full = normal_factor(&n, &nsharp, alpha, shift)?;
        let nq = near_field_q(data, params, opts.q);
        let sq = restrict_matrix(&nsharp, params, opts.q);
        let reduced = normal_factor(&nq, &sq, alpha, shift)?;
        Ok(GlsmSystem {
            side: data.side,
            q: opts.q,
            alpha,
            delta: opts.delta,
            n_adj: n.adjoint(),
            nq_adj: nq.adjoint(),
            n,
            nsharp,
            sharp_norm,
            positions: class_positions(params, opts.q),
            full,
            reduced,
        })
    }

    /// `G(a) = (N♯a, a) + δ‖N♯‖‖a‖²`.
    pub fn g_cost(&self, a: &CVector) -> f64 {
        quad(&self.nsharp, a) + self.delta * self.sharp_norm * a.norm_squared()
    }

    pub fn minimize_full(&self, phi: &CVector) -> CVector {
        self.full.solve(&(&self.n_adj * phi))
    }

    /// Minimizer of the projected functional for a right-hand side given
    /// on the class positions.
    pub fn minimize_reduced(&self, phi_q: &CVector) -> CVector {
        self.reduced.solve(&(&self.nq_adj * phi_q))
    }

    fn embed(&self, b: &CVector) -> CVector {
        let mut out = CVector::zeros(self.n.ncols());
        for (t, &p) in self.positions.iter().enumerate() {
            out[p] = b[t];
        }
        out
    }

    /// Indicator `[G(1 + G/D)]⁻¹` at `z`.
    pub fn indicator_at(&self, params: &WaveParams, z: Point) -> (f64, IndicatorDiagnostics) {
        let phi = CVector::from_column_slice(rayleigh_of_point_source(params, z, self.side).as_slice());
        let phi_q_seq = rayleigh_of_point_source_q(params, self.q, z, self.side);
        let phi_q = CVector::from_column_slice(phi_q_seq.as_slice());
        let phi_qr = CVector::from_iterator(
            self.positions.len(),
            self.positions.iter().map(|&p| phi_q[p]),
        );

        let a = self.minimize_full(&phi);
        let a_q = self.minimize_full(&phi_q);
        let b_q = self.minimize_reduced(&phi_qr);
        let g = self.g_cost(&a);
        let diff = &a_q - self.embed(&b_q);
        let d = quad(&self.nsharp, &diff);
        let diag = IndicatorDiagnostics {
            cost_full: g,
            cost_q: quad(&self.nsharp, &a_q),
            d_term: d,
            degenerate: d == 0.0,
        };
        let value = if d == 0.0 { 0.0 } else { 1.0 / (g * (1.0 + g / d)) };
        (value, diag)
    }
}

/// Indicator values over a sampling grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorMap {
    pub grid: SamplingGrid,
    /// Row-major values (`y` outer).
    pub values: Vec<f64>,
    pub diagnostics: Vec<IndicatorDiagnostics>,
}

impl IndicatorMap {
    pub fn point(&self, idx: usize) -> Point {
        self.grid.point(idx)
    }

    pub fn argmax(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, v)| if v > b.1 { (i, v) } else { b })
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Mean over sampling points satisfying `pred` (`None` if there are none).
    pub fn mean_where(&self, pred: impl Fn(Point) -> bool) -> Option<f64> {
        let (s, n) = (0..self.values.len())
            .filter(|&i| pred(self.point(i)))
            .fold((0.0, 0usize), |(s, n), i| (s + self.values[i], n + 1));
        (n > 0).then(|| s / n as f64)
    }

    pub fn mean_over(&self, region: &Region) -> Option<f64> {
        self.mean_where(|x| region.contains(x))
    }

    /// Points of the 4-connected component of `{I ≥ level}` containing
    /// `seed`.
    pub fn superlevel_component(&self, seed: usize, level: f64) -> Vec<usize> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut seen = vec![false; self.values.len()];
        let mut stack = vec![seed];
        let mut out = Vec::new();
        if self.values[seed] < level {
            return out;
        }
        seen[seed] = true;
        while let Some(i) = stack.pop() {
            out.push(i);
            let (x, y) = (i % nx, i / nx);
            let mut push = |j: usize| {
                if !seen[j] && self.values[j] >= level {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                push(i - 1);
            }
            if x + 1 < nx {
                push(i + 1);
            }
            if y > 0 {
                push(i - nx);
            }
            if y + 1 < ny {
                push(i + nx);
            }
        }
        out.sort_unstable();
        out
    }
}

/// Period cell `m ∈ Z_M` containing the transverse coordinate `x`.
pub fn period_cell(params: &WaveParams, x: f64) -> i64 {
    let l = params.period();
    let m = ((x + 0.5 * l) / l).floor() as i64;
    params.reduce_mode(m)
}

/// Indicator for one side over the sampling grid.
pub fn image_side(params: &WaveParams, data: &NearFieldData, opts: &GlsmOptions) -> Result<IndicatorMap> {
    let sys = GlsmSystem::new(data, params, opts)?;
    let pts: Vec<(f64, IndicatorDiagnostics)> = (0..opts.sampling.len())
        .into_par_iter()
        .map(|i| sys.indicator_at(params, opts.sampling.point(i)))
        .collect();
    Ok(IndicatorMap {
        grid: opts.sampling.clone(),
        values: pts.iter().map(|p| p.0).collect(),
        diagnostics: pts.iter().map(|p| p.1).collect(),
    })
}

/// `I = I⁺ + I⁻` over the sampling grid; diagnostics are summed over the
/// two sides as well.
pub fn image(
    cfg: &MediaConfig,
    plus: &NearFieldData,
    minus: &NearFieldData,
    opts: &GlsmOptions,
) -> Result<IndicatorMap> {
    if plus.side != Side::Top || minus.side != Side::Bottom {
        return Err(Error::Consistency("expected top (+) and bottom (−) data".into()));
    }
    let a = image_side(&cfg.wave, plus, opts)?;
    let b = image_side(&cfg.wave, minus, opts)?;
    Ok(IndicatorMap {
        grid: a.grid.clone(),
        values: a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect(),
        diagnostics: a
            .diagnostics
            .iter()
            .zip(&b.diagnostics)
            .map(|(x, y)| IndicatorDiagnostics {
                cost_full: x.cost_full + y.cost_full,
                cost_q: x.cost_q + y.cost_q,
                d_term: x.d_term + y.d_term,
                degenerate: x.degenerate || y.degenerate,
            })
            .collect(),
    })
}
