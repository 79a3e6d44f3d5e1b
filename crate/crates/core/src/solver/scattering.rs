use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gmres::{gmres, GmresOptions};
use super::grid::{Grid, GridField, SourcePair};
use super::potential::{Potential, PotentialOutput};
use crate::error::{Error, Result};
use crate::geometry::{Contrast, Mat2, MediaConfig, Point, Variant, WaveParams, C64, I, ZERO};
use crate::green::{incident_wave, Direction, RayleighSeq, Side};

/// Discretization and Krylov settings of the forward solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub nx: usize,
    pub ny: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    /// Smooth the coefficient jumps with a one-cell Gaussian.
    pub mollify: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            nx: 264,
            ny: 256,
            tol: 1e-8,
            max_iter: 2000,
            restart: 60,
            mollify: false,
        }
    }
}

impl SolverOptions {
    pub fn with_grid(self, nx: usize, ny: usize) -> Self {
        SolverOptions { nx, ny, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::config("solver.tol", "must lie in (0, 1)"));
        }
        if self.max_iter == 0 {
            return Err(Error::config("solver.max_iter", "must be positive"));
        }
        if self.restart == 0 {
            return Err(Error::config("solver.restart", "must be positive"));
        }
        Ok(())
    }

    fn gmres(&self) -> GmresOptions {
        GmresOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            restart: self.restart,
        }
    }
}

/// Contrasts `q = μ⁻¹ − I` and `p = n − 1` sampled on the grid, stored only
/// on their support.
#[derive(Debug, Clone)]
pub struct ContrastField {
    pub grid: Grid,
    /// Flat indices of cells with nonzero contrast, increasing.
    pub support: Vec<usize>,
    pub q: Vec<Mat2>,
    pub p: Vec<C64>,
}

impl ContrastField {
    /// Samples `f` at every cell centre and keeps the nonzero cells.
    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> Contrast + Sync) -> Self {
        let all: Vec<Contrast> = (0..grid.len())
            .into_par_iter()
            .map(|i| f(grid.point(i)))
            .collect();
        Self::from_dense(grid, &all)
    }

    pub fn from_config(cfg: &MediaConfig, variant: Variant, grid: Grid, mollify: bool) -> Self {
        let field = Self::from_fn(grid, |x| cfg.contrast(x, variant));
        if mollify {
            field.mollified()
        } else {
            field
        }
    }

    fn from_dense(grid: Grid, all: &[Contrast]) -> Self {
        let mut support = Vec::new();
        let mut q = Vec::new();
        let mut p = Vec::new();
        for (i, c) in all.iter().enumerate() {
            if !c.is_zero() {
                support.push(i);
                q.push(c.q);
                p.push(c.p);
            }
        }
        ContrastField {
            grid,
            support,
            q,
            p,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.support.is_empty()
    }

    /// Rows touched by the support (empty range if there is none).
    pub fn row_band(&self) -> Range<usize> {
        match (self.support.first(), self.support.last()) {
            (Some(a), Some(b)) => a / self.grid.nx..b / self.grid.nx + 1,
            _ => 0..0,
        }
    }

    /// Convolution with a separable Gaussian of one-cell width, truncated at
    /// three cells; periodic across `x`, zero-padded across `y`.
    pub fn mollified(&self) -> Self {
        let g = self.grid;
        let w: Vec<f64> = (-3..=3).map(|t: i32| (-0.5 * (t * t) as f64).exp()).collect();
        let total: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|v| v / total).collect();
        let mut dense = vec![Contrast { q: [[ZERO; 2]; 2], p: ZERO }; g.len()];
        for (s, &idx) in self.support.iter().enumerate() {
            dense[idx] = Contrast {
                q: self.q[s],
                p: self.p[s],
            };
        }
        let blur = |src: &[Contrast], along_x: bool| -> Vec<Contrast> {
            (0..g.len())
                .into_par_iter()
                .map(|idx| {
                    let (i, j) = ((idx % g.nx) as i64, (idx / g.nx) as i64);
                    let mut acc = Contrast { q: [[ZERO; 2]; 2], p: ZERO };
                    for (t, wt) in (-3i64..=3).zip(&w) {
                        let n = if along_x {
                            let ii = (i + t).rem_euclid(g.nx as i64);
                            Some(g.index(ii as usize, j as usize))
                        } else {
                            let jj = j + t;
                            (0..g.ny as i64)
                                .contains(&jj)
                                .then(|| g.index(i as usize, jj as usize))
                        };
                        if let Some(n) = n {
                            let c = &src[n];
                            acc.p += *wt * c.p;
                            for a in 0..2 {
                                for b in 0..2 {
                                    acc.q[a][b] += *wt * c.q[a][b];
                                }
                            }
                        }
                    }
                    acc
                })
                .collect()
        };
        let smooth = blur(&blur(&dense, true), false);
        Self::from_dense(g, &smooth)
    }

    fn multiply(&self, gx: &[C64], gy: &[C64], s: &[C64]) -> [Vec<C64>; 3] {
        let n = self.support.len();
        let mut out = [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]];
        for t in 0..n {
            let q = &self.q[t];
            out[0][t] = q[0][0] * gx[t] + q[0][1] * gy[t];
            out[1][t] = q[1][0] * gx[t] + q[1][1] * gy[t];
            out[2][t] = self.p[t] * s[t];
        }
        out
    }
}

/// Scattered field `w` with its gradient; `value` carries the traces on
/// `x_d = ±h`.
#[derive(Debug, Clone)]
pub struct Solution {
    pub value: GridField,
    pub grad: [GridField; 2],
    /// `(w, ∂ₓw, ∂_y w)` on the contrast support as solved for.
    pub support_unknowns: [Vec<C64>; 3],
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

/// Forward solver for one medium on one grid; reusable across right-hand
/// sides and safe to share between threads.
pub struct Solver {
    pub params: WaveParams,
    pub grid: Grid,
    pub contrast: ContrastField,
    pub opts: SolverOptions,
    potential: Potential,
}

impl Solver {
    pub fn new(params: &WaveParams, contrast: ContrastField, opts: SolverOptions) -> Result<Self> {
        opts.validate()?;
        let grid = contrast.grid;
        if grid != Grid::new(params, opts.nx, opts.ny)? {
            return Err(Error::Consistency(
                "contrast field was sampled on a different grid".into(),
            ));
        }
        Ok(Solver {
            params: params.clone(),
            grid,
            potential: Potential::new(params, grid),
            contrast,
            opts,
        })
    }

    pub fn for_config(cfg: &MediaConfig, variant: Variant, opts: SolverOptions) -> Result<Self> {
        opts.validate()?;
        let grid = Grid::new(&cfg.wave, opts.nx, opts.ny)?;
        let contrast = ContrastField::from_config(cfg, variant, grid, opts.mollify);
        Solver::new(&cfg.wave, contrast, opts)
    }

    /// Volume potential of `(g₁, g₂)` supported on the contrast support
    /// (given there, in support order), on the band of support rows.
    fn band_potential(&self, g: &[Vec<C64>; 3], out: Range<usize>, traces: bool) -> PotentialOutput {
        let band = self.contrast.row_band();
        let nx = self.grid.nx;
        let offset = band.start * nx;
        let mut dense = [
            vec![ZERO; band.len() * nx],
            vec![ZERO; band.len() * nx],
            vec![ZERO; band.len() * nx],
        ];
        for (t, &idx) in self.contrast.support.iter().enumerate() {
            for c in 0..3 {
                dense[c][idx - offset] = g[c][t];
            }
        }
        self.potential
            .apply(band, &dense[0], &dense[1], &dense[2], out, traces)
    }

    fn gather(&self, out: &PotentialOutput) -> [Vec<C64>; 3] {
        let offset = out.rows.start * self.grid.nx;
        let pick = |v: &[C64]| -> Vec<C64> {
            self.contrast.support.iter().map(|&i| v[i - offset]).collect()
        };
        [pick(&out.w), pick(&out.wx), pick(&out.wy)]
    }

    /// Solves `w = V[q(∇w + f₁), p(w + f₂)]`.
    pub fn solve(&self, rhs: &SourcePair) -> Result<Solution> {
        if rhs.grid != self.grid {
            return Err(Error::Consistency("source is on a different grid".into()));
        }
        let grid = self.grid;
        if self.contrast.is_zero() {
            let mut value = GridField::zeros(grid);
            value.top = Some(vec![ZERO; grid.nx]);
            value.bottom = Some(vec![ZERO; grid.nx]);
            return Ok(Solution {
                value,
                grad: [GridField::zeros(grid), GridField::zeros(grid)],
                support_unknowns: [vec![], vec![], vec![]],
                iterations: 0,
                residual_history: vec![0.0],
            });
        }
        let sup = &self.contrast.support;
        let n = sup.len();
        let pick = |v: &[C64]| -> Vec<C64> { sup.iter().map(|&i| v[i]).collect() };
        let f = [pick(&rhs.f1[0]), pick(&rhs.f1[1]), pick(&rhs.f2)];
        let band = self.contrast.row_band();

        let lhs = |x: &[C64]| -> Vec<C64> {
            let g = self.contrast.multiply(&x[n..2 * n], &x[2 * n..], &x[..n]);
            let out = self.band_potential(&g, band.clone(), false);
            let v = self.gather(&out);
            let mut y = x.to_vec();
            for c in 0..3 {
                for t in 0..n {
                    y[c * n + t] -= v[c][t];
                }
            }
            y
        };
        let g0 = self.contrast.multiply(&f[0], &f[1], &f[2]);
        let b0 = self.gather(&self.band_potential(&g0, band.clone(), false));
        let b: Vec<C64> = b0.concat();

        let outcome = gmres(lhs, &b, &self.opts.gmres())?;
        let x = outcome.x;
        let total = |c: usize| -> Vec<C64> {
            let off = [n, 2 * n, 0][c];
            (0..n).map(|t| x[off + t] + f[c][t]).collect()
        };
        let g = self.contrast.multiply(&total(0), &total(1), &total(2));
        let full = self.band_potential(&g, 0..grid.ny, true);
        let value = GridField {
            grid,
            data: full.w,
            top: full.top,
            bottom: full.bottom,
        };
        let gx = GridField {
            grid,
            data: full.wx,
            top: None,
            bottom: None,
        };
        let gy = GridField {
            grid,
            data: full.wy,
            top: None,
            bottom: None,
        };
        Ok(Solution {
            value,
            grad: [gx, gy],
            support_unknowns: [
                x[..n].to_vec(),
                x[n..2 * n].to_vec(),
                x[2 * n..].to_vec(),
            ],
            iterations: outcome.iterations,
            residual_history: outcome.residual_history,
        })
    }

    /// Solve for the incident plane wave `u^{i,±}(·; j)`.
    pub fn solve_incident(&self, j: i64, dir: Direction) -> Result<Solution> {
        let rhs = incident_source(&self.params, self.grid, j, dir);
        self.solve(&rhs).map_err(|e| e.with_incident(j))
    }

    /// Volume potential of arbitrary sources on the full grid, with traces.
    /// When `contrasts_applied` the sources are first multiplied by `(q, p)`.
    pub fn potential(&self, src: &SourcePair, contrasts_applied: bool) -> Result<GridField> {
        volume_potential_with(&self.potential, src, contrasts_applied.then_some(&self.contrast))
    }
}

fn volume_potential_with(
    pot: &Potential,
    src: &SourcePair,
    contrast: Option<&ContrastField>,
) -> Result<GridField> {
    let grid = *pot.grid();
    if src.grid != grid {
        return Err(Error::Consistency("source is on a different grid".into()));
    }
    let (gx, gy, g2) = match contrast {
        None => (src.f1[0].clone(), src.f1[1].clone(), src.f2.clone()),
        Some(c) => {
            let pick = |v: &[C64]| -> Vec<C64> { c.support.iter().map(|&i| v[i]).collect() };
            let m = c.multiply(&pick(&src.f1[0]), &pick(&src.f1[1]), &pick(&src.f2));
            let mut dense = [
                vec![ZERO; grid.len()],
                vec![ZERO; grid.len()],
                vec![ZERO; grid.len()],
            ];
            for (t, &i) in c.support.iter().enumerate() {
                for k in 0..3 {
                    dense[k][i] = m[k][t];
                }
            }
            let [a, b, d] = dense;
            (a, b, d)
        }
    };
    let out = pot.apply(0..grid.ny, &gx, &gy, &g2, 0..grid.ny, true);
    Ok(GridField {
        grid,
        data: out.w,
        top: out.top,
        bottom: out.bottom,
    })
}

/// `x ↦ ∇·∫G_M(x−y)g₁(y)dy + k²∫G_M(x−y)g₂(y)dy` on the full grid with
/// traces, where `(g₁, g₂)` is `src`, or `(q·f₁, p·f₂)` when a contrast is
/// given.
pub fn volume_potential(
    params: &WaveParams,
    src: &SourcePair,
    contrast: Option<&ContrastField>,
) -> Result<GridField> {
    let pot = Potential::new(params, src.grid);
    if let Some(c) = contrast {
        if c.grid != src.grid {
            return Err(Error::Consistency("contrast is on a different grid".into()));
        }
    }
    volume_potential_with(&pot, src, contrast)
}

/// `(∇u^{i,±}(·; j), u^{i,±}(·; j))` sampled at the cell centres.
pub fn incident_source(params: &WaveParams, grid: Grid, j: i64, dir: Direction) -> SourcePair {
    SourcePair::from_fn(grid, |x| {
        let (v, g) = incident_wave(params, j, dir, x);
        (g, v)
    })
}

/// Solves the scattering problem for the configured medium.
pub fn solve_scattering(
    cfg: &MediaConfig,
    variant: Variant,
    rhs: &SourcePair,
    opts: SolverOptions,
) -> Result<Solution> {
    Solver::for_config(cfg, variant, opts)?.solve(rhs)
}

/// Rayleigh coefficients `(1/ML) ∫ u(x̄, ±h) e^{−iα(ℓ)x̄} dx̄` of the trace
/// on `side`, by the discrete Fourier transform of the trace row.
pub fn rayleigh_extract(params: &WaveParams, field: &GridField, side: Side) -> Result<RayleighSeq> {
    let trace = field
        .trace(side)
        .ok_or_else(|| Error::Consistency(format!("field has no trace on side {}", side.symbol())))?;
    Ok(rayleigh_of_trace(params, &field.grid, trace, side))
}

pub fn rayleigh_of_trace(params: &WaveParams, grid: &Grid, trace: &[C64], side: Side) -> RayleighSeq {
    RayleighSeq::from_fn(params, side, |l| trace_coefficient(params, grid, trace, l))
}

/// Rayleigh coefficients for the modes `lo..=hi` (any range resolved by the
/// grid), e.g. all propagating modes for power bookkeeping.
pub fn rayleigh_extract_modes(
    params: &WaveParams,
    field: &GridField,
    side: Side,
    modes: std::ops::RangeInclusive<i64>,
) -> Result<RayleighSeq> {
    let trace = field
        .trace(side)
        .ok_or_else(|| Error::Consistency(format!("field has no trace on side {}", side.symbol())))?;
    let (lo, hi) = (*modes.start(), *modes.end());
    if lo > 0 || hi < 0 || field.grid.bin_of_mode(lo).is_none() || field.grid.bin_of_mode(hi).is_none() {
        return Err(Error::Consistency(format!(
            "modes {lo}..={hi} are not resolved by a grid with N_x = {}",
            field.grid.nx
        )));
    }
    Ok(RayleighSeq::from_vec(
        side,
        (-lo) as usize,
        modes.map(|l| trace_coefficient(params, &field.grid, trace, l)).collect(),
    ))
}

fn trace_coefficient(params: &WaveParams, grid: &Grid, trace: &[C64], l: i64) -> C64 {
    let a = params.alpha(l);
    trace
        .iter()
        .enumerate()
        .map(|(i, u)| u * (-I * a * grid.x(i)).exp())
        .sum::<C64>()
        / grid.nx as f64
}

/// Propagating-mode power bookkeeping of one incident wave.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxReport {
    pub incident: f64,
    pub outgoing: f64,
}

/// Outcome of the energy check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyBalance {
    /// `|incident − outgoing| / incident`.
    Residual(f64),
    /// The medium absorbs; conservation does not apply.
    Lossy,
    /// The incident mode carries no power.
    Evanescent,
}

impl EnergyBalance {
    pub fn residual(&self) -> Option<f64> {
        match self {
            EnergyBalance::Residual(r) => Some(*r),
            _ => None,
        }
    }
}

/// Incident and outgoing propagating flux `Σ β(ℓ)|c(ℓ)|²`, with the
/// incident wave's own coefficient added on the transmission side.
pub fn flux(
    params: &WaveParams,
    j: i64,
    dir: Direction,
    us_top: &RayleighSeq,
    us_bottom: &RayleighSeq,
) -> FluxReport {
    let beta = params.beta(j);
    let h = params.half_height();
    let amp = -I / (2.0 * beta.conj());
    let specular = amp * (I * beta.conj() * h).exp();
    let through = dir.measured_side();
    let incident = if params.is_propagating(j) {
        beta.re * amp.norm_sqr()
    } else {
        0.0
    };
    let mut outgoing = 0.0;
    for seq in [us_top, us_bottom] {
        for (l, c) in seq.iter() {
            if !params.is_propagating(l) {
                continue;
            }
            let c = if l == j && seq.side == through {
                c + specular
            } else {
                c
            };
            outgoing += params.beta(l).re * c.norm_sqr();
        }
    }
    FluxReport { incident, outgoing }
}

/// Relative power-balance residual for a lossless medium. The sequences
/// must cover every propagating mode (see [`rayleigh_extract_modes`]).
pub fn energy_balance(
    params: &WaveParams,
    j: i64,
    dir: Direction,
    us_top: &RayleighSeq,
    us_bottom: &RayleighSeq,
    lossless: bool,
) -> Result<EnergyBalance> {
    let prop = params.propagating_modes();
    for seq in [us_top, us_bottom] {
        if prop.clone().any(|l| seq.get(l).is_none()) {
            return Err(Error::Consistency(format!(
                "energy balance needs every propagating mode {}..={}",
                prop.start(),
                prop.end()
            )));
        }
    }
    if !lossless {
        return Ok(EnergyBalance::Lossy);
    }
    if !params.is_propagating(j) {
        return Ok(EnergyBalance::Evanescent);
    }
    let f = flux(params, j, dir, us_top, us_bottom);
    Ok(EnergyBalance::Residual((f.incident - f.outgoing).abs() / f.incident))
}
