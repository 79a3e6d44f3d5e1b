//! Near-field data matrices, noise, the sharp operator, Floquet-Bloch
//! projections and consistency diagnostics of the operator factorizations.

use nalgebra::{DMatrix, DVector};
use rand_core::Rng;
use rand_pcg::Pcg32;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MediaConfig, Variant, WaveParams, C64, I, ZERO};
use crate::green::{incident_wave, Direction, RayleighSeq, Side};
use crate::solver::{
    energy_balance, rayleigh_extract, rayleigh_extract_modes, EnergyBalance, Grid, SourcePair,
    Solver, SolverOptions,
};

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Physical and truncation parameters recorded with every data matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMeta {
    pub k: f64,
    pub period: f64,
    pub periods: usize,
    pub half_height: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub variant: Variant,
}

impl DataMeta {
    pub fn new(params: &WaveParams, variant: Variant) -> Self {
        DataMeta {
            k: params.k(),
            period: params.period(),
            periods: params.periods(),
            half_height: params.half_height(),
            n_min: params.n_min(),
            n_max: params.n_max(),
            variant,
        }
    }

    /// Checks that the data was produced for the same wave and truncation.
    pub fn check_matches(&self, params: &WaveParams) -> Result<()> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        if self.n_min != params.n_min() || self.n_max != params.n_max() {
            return Err(Error::Consistency(format!(
                "data truncation [-{}, {}] differs from configuration [-{}, {}]",
                self.n_min,
                self.n_max,
                params.n_min(),
                params.n_max()
            )));
        }
        if self.periods != params.periods()
            || !close(self.k, params.k())
            || !close(self.period, params.period())
            || !close(self.half_height, params.half_height())
        {
            return Err(Error::Consistency(
                "data was generated for different wave parameters".into(),
            ));
        }
        Ok(())
    }
}

/// Near-field matrix `N(ℓ, j) = û^{s,±}(ℓ; j)`: rows are measured modes,
/// columns incident modes, both over `[−n_min, n_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NearFieldData {
    pub side: Side,
    pub meta: DataMeta,
    pub matrix: CMatrix,
    pub noise_level: f64,
    pub seed: Option<u64>,
}

impl NearFieldData {
    pub fn indices(&self) -> Vec<i64> {
        (-(self.meta.n_min as i64)..=self.meta.n_max as i64).collect()
    }

    pub fn dim(&self) -> usize {
        self.meta.n_min + self.meta.n_max + 1
    }

    /// Entry `N(ℓ, j)` by mode numbers.
    pub fn entry(&self, l: i64, j: i64) -> C64 {
        let o = self.meta.n_min as i64;
        self.matrix[((l + o) as usize, (j + o) as usize)]
    }
}

/// Per-solve diagnostics collected while simulating data.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveRecord {
    pub j: i64,
    pub dir: Direction,
    pub iterations: usize,
    pub final_residual: f64,
    pub energy: EnergyBalance,
}

/// Data from one pass of incident waves in both directions.
#[derive(Debug, Clone)]
pub struct Simulation {
    /// `N⁺`: up-going incidence measured on top.
    pub plus: NearFieldData,
    /// `N⁻`: down-going incidence measured at the bottom.
    pub minus: NearFieldData,
    pub records: Vec<SolveRecord>,
}

struct Column {
    top: RayleighSeq,
    bottom: RayleighSeq,
    record: SolveRecord,
}

fn solve_column(solver: &Solver, j: i64, dir: Direction, lossless: bool) -> Result<Column> {
    let params = &solver.params;
    let sol = solver.solve_incident(j, dir)?;
    let top = rayleigh_extract(params, &sol.value, Side::Top)?;
    let bottom = rayleigh_extract(params, &sol.value, Side::Bottom)?;
    let prop = params.propagating_modes();
    let energy = match (
        rayleigh_extract_modes(params, &sol.value, Side::Top, prop.clone()),
        rayleigh_extract_modes(params, &sol.value, Side::Bottom, prop),
    ) {
        (Ok(t), Ok(b)) => energy_balance(params, j, dir, &t, &b, lossless)?,
        _ => EnergyBalance::Evanescent,
    };
    Ok(Column {
        top,
        bottom,
        record: SolveRecord {
            j,
            dir,
            iterations: sol.iterations,
            final_residual: sol.residual_history.last().copied().unwrap_or(0.0),
            energy,
        },
    })
}

fn matrix_from_columns(cols: &[Column], side: Side) -> CMatrix {
    let n = cols.len();
    CMatrix::from_fn(n, n, |r, c| {
        let seq = match side {
            Side::Top => &cols[c].top,
            Side::Bottom => &cols[c].bottom,
        };
        seq.as_slice()[r]
    })
}

fn solve_direction(solver: &Solver, dir: Direction, lossless: bool) -> Result<Vec<Column>> {
    let js: Vec<i64> = solver.params.data_indices().collect();
    js.par_iter()
        .map(|&j| solve_column(solver, j, dir, lossless))
        .collect()
}

/// Solves for every incident wave in both directions and assembles `N⁺`
/// and `N⁻`.
pub fn simulate(cfg: &MediaConfig, variant: Variant, opts: SolverOptions) -> Result<Simulation> {
    let solver = Solver::for_config(cfg, variant, opts)?;
    simulate_with(&solver, cfg, variant)
}

pub fn simulate_with(solver: &Solver, cfg: &MediaConfig, variant: Variant) -> Result<Simulation> {
    let lossless = cfg.is_lossless();
    let up = solve_direction(solver, Direction::Up, lossless)?;
    let down = solve_direction(solver, Direction::Down, lossless)?;
    let meta = DataMeta::new(&cfg.wave, variant);
    let data = |cols: &[Column], side| NearFieldData {
        side,
        meta: meta.clone(),
        matrix: matrix_from_columns(cols, side),
        noise_level: 0.0,
        seed: None,
    };
    let records = up.iter().chain(&down).map(|c| c.record.clone()).collect();
    Ok(Simulation {
        plus: data(&up, Side::Top),
        minus: data(&down, Side::Bottom),
        records,
    })
}

/// `N^±` for one side: incidence from the opposite half-space, measured on
/// `side`.
pub fn assemble_near_field(
    cfg: &MediaConfig,
    side: Side,
    variant: Variant,
    opts: SolverOptions,
) -> Result<NearFieldData> {
    let solver = Solver::for_config(cfg, variant, opts)?;
    let cols = solve_direction(&solver, Direction::from(side), cfg.is_lossless())?;
    Ok(NearFieldData {
        side,
        meta: DataMeta::new(&cfg.wave, variant),
        matrix: matrix_from_columns(&cols, side),
        noise_level: 0.0,
        seed: None,
    })
}

fn side_stream(side: Side) -> u64 {
    match side {
        Side::Top => 0,
        Side::Bottom => 1,
    }
}

/// The noise matrix `A` for `side`: real and imaginary parts uniform on
/// `[−1, 1]`, drawn row-major from PCG32 (`Pcg32::new(seed, stream)` with
/// stream 0 for the top side and 1 for the bottom), each uniform taken as
/// the top 53 bits of a 64-bit draw.
pub fn noise_matrix(n: usize, seed: u64, side: Side) -> CMatrix {
    let mut rng = Pcg32::new(seed, side_stream(side));
    let mut uniform = move || {
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        2.0 * u - 1.0
    };
    let mut m = CMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let re = uniform();
            let im = uniform();
            m[(r, c)] = C64::new(re, im);
        }
    }
    m
}

/// `N(ℓ, j)(1 + δ A(ℓ, j))` with the seeded noise matrix.
pub fn add_noise(data: &NearFieldData, delta: f64, seed: u64) -> Result<NearFieldData> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::config("imaging.delta", "noise level must be non-negative"));
    }
    if delta == 0.0 {
        return Ok(data.clone());
    }
    let a = noise_matrix(data.dim(), seed, data.side);
    let matrix = data
        .matrix
        .zip_map(&a, |n, a| n * (C64::new(1.0, 0.0) + delta * a));
    Ok(NearFieldData {
        matrix,
        noise_level: delta,
        seed: Some(seed),
        ..data.clone()
    })
}

/// `|H| = V|Λ|V*` for a Hermitian matrix.
pub fn hermitian_abs(h: &CMatrix) -> Result<CMatrix> {
    if h.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::Numerical("non-finite matrix entry".into()));
    }
    let eig = h.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let d = CMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::new(l.abs(), 0.0)));
    Ok(v * d * v.adjoint())
}

pub fn real_part(f: &CMatrix) -> CMatrix {
    (f + f.adjoint()) * C64::new(0.5, 0.0)
}

pub fn imag_part(f: &CMatrix) -> CMatrix {
    (f - f.adjoint()) * (-0.5 * I)
}

/// `F♯ = |Re F| + |Im F|`, symmetrized to be exactly Hermitian.
pub fn sharp(f: &CMatrix) -> Result<CMatrix> {
    if !f.is_square() {
        return Err(Error::Consistency("sharp needs a square matrix".into()));
    }
    let s = hermitian_abs(&real_part(f))? + hermitian_abs(&imag_part(f))?;
    Ok((&s + s.adjoint()) * C64::new(0.5, 0.0))
}

/// Which index set a density lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityClass {
    Full,
    Reduced(i64),
}

/// Herglotz density `a`, either on `[−n_min, n_max]` or on the residue
/// class `q + MZ` within it.
#[derive(Debug, Clone, PartialEq)]
pub struct HerglotzDensity {
    pub entries: CVector,
    pub class: DensityClass,
}

impl HerglotzDensity {
    pub fn full(entries: CVector) -> Self {
        HerglotzDensity {
            entries,
            class: DensityClass::Full,
        }
    }

    pub fn reduced(entries: CVector, q: i64) -> Self {
        HerglotzDensity {
            entries,
            class: DensityClass::Reduced(q),
        }
    }
}

/// Positions (in `[−n_min, n_max]` order) of the modes `j ≡ q (mod M)`.
pub fn class_positions(params: &WaveParams, q: i64) -> Vec<usize> {
    let m = params.periods() as i64;
    params
        .data_indices()
        .enumerate()
        .filter(|(_, j)| (j - q).rem_euclid(m) == 0)
        .map(|(p, _)| p)
        .collect()
}

/// Mode numbers `j = q + Mℓ` inside the truncation.
pub fn class_modes(params: &WaveParams, q: i64) -> Vec<i64> {
    let m = params.periods() as i64;
    params
        .data_indices()
        .filter(|j| (j - q).rem_euclid(m) == 0)
        .collect()
}

/// `I_q`: places a reduced density on its residue class, zero elsewhere.
pub fn project_embed(a: &HerglotzDensity, params: &WaveParams) -> Result<HerglotzDensity> {
    let q = match a.class {
        DensityClass::Reduced(q) => q,
        DensityClass::Full => return Err(Error::Consistency("density is already full".into())),
    };
    let pos = class_positions(params, q);
    if pos.len() != a.entries.len() {
        return Err(Error::Consistency("reduced density has the wrong length".into()));
    }
    let mut out = CVector::zeros(params.n_modes());
    for (t, &p) in pos.iter().enumerate() {
        out[p] = a.entries[t];
    }
    Ok(HerglotzDensity::full(out))
}

/// `I_q*`: keeps the entries on the residue class `q`.
pub fn project_restrict(a: &HerglotzDensity, q: i64, params: &WaveParams) -> Result<HerglotzDensity> {
    if a.class != DensityClass::Full || a.entries.len() != params.n_modes() {
        return Err(Error::Consistency("restriction needs a full density".into()));
    }
    let pos = class_positions(params, q);
    Ok(HerglotzDensity::reduced(
        CVector::from_iterator(pos.len(), pos.iter().map(|&p| a.entries[p])),
        q,
    ))
}

/// `I_q* F I_q`: the submatrix on rows and columns of class `q`.
pub fn restrict_matrix(f: &CMatrix, params: &WaveParams, q: i64) -> CMatrix {
    let pos = class_positions(params, q);
    CMatrix::from_fn(pos.len(), pos.len(), |r, c| f[(pos[r], pos[c])])
}

/// `N_q = I_q* N I_q`.
pub fn near_field_q(data: &NearFieldData, params: &WaveParams, q: i64) -> CMatrix {
    restrict_matrix(&data.matrix, params, q)
}

/// `Σ_j a(j) (∇u^{i,±}(·; j), u^{i,±}(·; j))` on the grid; cells outside
/// `mask` (when given) are zeroed.
pub fn herglotz_field(
    params: &WaveParams,
    grid: Grid,
    a: &HerglotzDensity,
    dir: Direction,
    mask: Option<&[usize]>,
) -> Result<SourcePair> {
    let full = match a.class {
        DensityClass::Full => a.clone(),
        DensityClass::Reduced(_) => project_embed(a, params)?,
    };
    if full.entries.len() != params.n_modes() {
        return Err(Error::Consistency("density has the wrong length".into()));
    }
    let terms: Vec<(i64, C64)> = params
        .data_indices()
        .zip(full.entries.iter().copied())
        .filter(|(_, c)| *c != ZERO)
        .collect();
    let eval = |x| {
        let mut v = ZERO;
        let mut g = [ZERO; 2];
        for &(j, c) in &terms {
            let (u, du) = incident_wave(params, j, dir, x);
            v += c * u;
            g[0] += c * du[0];
            g[1] += c * du[1];
        }
        (g, v)
    };
    let mut src = SourcePair::from_fn(grid, eval);
    if let Some(mask) = mask {
        let mut keep = vec![false; grid.len()];
        mask.iter().for_each(|&i| keep[i] = true);
        for (i, k) in keep.iter().enumerate() {
            if !k {
                src.f1[0][i] = ZERO;
                src.f1[1][i] = ZERO;
                src.f2[i] = ZERO;
            }
        }
    }
    Ok(src)
}

/// Complex `sin z / z`.
fn sinc(z: C64) -> C64 {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        C64::new(1.0, 0.0) - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// `H^{±*}φ` for `φ = (φ₁, φ₂)` constant on grid cells (given on `cells`),
/// integrating the conjugate plane waves exactly over each cell.
pub fn herglotz_adjoint(
    params: &WaveParams,
    grid: &Grid,
    dir: Direction,
    cells: &[usize],
    phi: &[Vec<C64>; 3],
) -> CVector {
    let s = dir.sign();
    let vals: Vec<C64> = params
        .data_indices()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&j| {
            let a = params.alpha(j);
            let b = params.beta(j);
            let amp = I / (2.0 * b);
            let fx = grid.dx * sinc(C64::new(0.5 * a * grid.dx, 0.0));
            let fy = grid.dy * sinc(0.5 * s * b * grid.dy);
            let gx = -I * a;
            let gy = -I * s * b;
            cells
                .iter()
                .enumerate()
                .map(|(t, &idx)| {
                    let x = grid.point(idx);
                    let ubar = amp * (-I * (a * x[0] + s * b * x[1])).exp() * fx * fy;
                    (phi[0][t] * gx + phi[1][t] * gy + phi[2][t]) * ubar
                })
                .sum()
        })
        .collect();
    CVector::from_vec(vals)
}

/// Result of comparing `N a` with `(1/ML) E H* T H a`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationReport {
    /// Largest per-probe relative discrepancy, full data.
    pub full: f64,
    /// Largest per-probe relative discrepancy, projected data.
    pub projected: f64,
    pub per_probe_full: Vec<f64>,
    pub per_probe_projected: Vec<f64>,
}

fn predicted(solver: &Solver, dir: Direction, a: &HerglotzDensity) -> Result<CVector> {
    let params = &solver.params;
    let k2 = params.k() * params.k();
    let sup = &solver.contrast.support;
    let f = herglotz_field(params, solver.grid, a, dir, None)?;
    let sol = solver.solve(&f)?;
    let [w, wx, wy] = &sol.support_unknowns;
    let n = sup.len();
    let mut t = [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]];
    for (s, &idx) in sup.iter().enumerate() {
        let q = &solver.contrast.q[s];
        let gx = f.f1[0][idx] + wx[s];
        let gy = f.f1[1][idx] + wy[s];
        t[0][s] = -(q[0][0] * gx + q[0][1] * gy);
        t[1][s] = -(q[1][0] * gx + q[1][1] * gy);
        t[2][s] = k2 * solver.contrast.p[s] * (f.f2[idx] + w[s]);
    }
    let hstar = herglotz_adjoint(params, &solver.grid, dir, sup, &t);
    let ml = params.total_period();
    let h = params.half_height();
    Ok(CVector::from_iterator(
        hstar.len(),
        params
            .data_indices()
            .zip(hstar.iter())
            .map(|(j, v)| (I * params.beta(j) * h).exp() / ml * v),
    ))
}

fn random_vector(n: usize, rng: &mut Pcg32) -> CVector {
    let mut u = || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * 2.0 - 1.0;
    CVector::from_iterator(n, (0..n).map(|_| C64::new(u(), u())))
}

fn rel(a: &CVector, b: &CVector) -> f64 {
    let d = (a - b).norm();
    let s = a.norm();
    if s == 0.0 {
        d
    } else {
        d / s
    }
}

/// Compares the measured data with the factorized form on `n_probe` random
/// densities, for the full operator and for the class-`q` projection.
/// `data` must have been produced by `solver` for the direction of `side`.
pub fn check_factorization(
    solver: &Solver,
    data: &NearFieldData,
    q: i64,
    n_probe: usize,
    seed: u64,
) -> Result<FactorizationReport> {
    let params = &solver.params;
    data.meta.check_matches(params)?;
    let dir = Direction::from(data.side);
    let mut rng = Pcg32::new(seed, 7);
    let mut per_full = Vec::new();
    let mut per_proj = Vec::new();
    let nq = class_positions(params, q).len();
    let nq_matrix = near_field_q(data, params, q);
    for _ in 0..n_probe {
        let a = HerglotzDensity::full(random_vector(params.n_modes(), &mut rng));
        let lhs = &data.matrix * &a.entries;
        per_full.push(rel(&lhs, &predicted(solver, dir, &a)?));

        let aq = HerglotzDensity::reduced(random_vector(nq, &mut rng), q);
        let lhs_q = &nq_matrix * &aq.entries;
        let full_pred = predicted(solver, dir, &aq)?;
        let rhs_q = project_restrict(&HerglotzDensity::full(full_pred), q, params)?.entries;
        per_proj.push(rel(&lhs_q, &rhs_q));
    }
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    Ok(FactorizationReport {
        full: max(&per_full),
        projected: max(&per_proj),
        per_probe_full: per_full,
        per_probe_projected: per_proj,
    })
}

/// Largest violation of `N⁺(ℓ, j) e^{−iβ(ℓ)h} = N⁻(−j, −ℓ) e^{−iβ(j)h}`
/// relative to the largest phase-adjusted entry, over the propagating modes
/// of the truncation (the incident waves use `β̄`, so evanescent pairs are
/// not reciprocal).
pub fn reciprocity_residual(params: &WaveParams, plus: &NearFieldData, minus: &NearFieldData) -> f64 {
    let h = params.half_height();
    let ph = |j: i64| (-I * params.beta(j) * h).exp();
    let n = (params.n_min().min(params.n_max()) as i64).min(*params.propagating_modes().end());
    let mut scale = 0.0f64;
    let mut worst = 0.0f64;
    for l in -n..=n {
        for j in -n..=n {
            let a = plus.entry(l, j) * ph(l);
            let b = minus.entry(-j, -l) * ph(j);
            scale = scale.max(a.norm()).max(b.norm());
            worst = worst.max((a - b).norm());
        }
    }
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}
