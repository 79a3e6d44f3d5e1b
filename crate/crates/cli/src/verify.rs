//! Oracle-based self checks behind `pdi verify`.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use pdi_core::config::RunConfig;
use pdi_core::geometry::Region;
use pdi_core::green::{green_ml, green_q, point_source_coefficient, rayleigh_of_point_source_q};
use pdi_core::imaging::{glsm_minimize, hermitian_norm};
use pdi_core::operators::{
    check_factorization, project_embed, project_restrict, reciprocity_residual, sharp,
    simulate_with, CMatrix, CVector, HerglotzDensity,
};
use pdi_core::solver::{
    incident_source, rayleigh_extract, ContrastField, Grid, Solver,
    SolverOptions,
};
use pdi_core::{Direction, Result, Side, Variant, WaveParams, C64};
use rand_core::Rng;
use rand_pcg::Pcg32;

pub const EXAMPLE3: &str = include_str!("../../../configs/example3.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Fast,
    Full,
}

/// One line of the report: pass when `value ≤ threshold` (or `≥` for
/// lower bounds).
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub lower_bound: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            lower_bound: false,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            lower_bound: true,
        }
    }

    pub fn passed(&self) -> bool {
        if self.lower_bound {
            self.value >= self.threshold
        } else {
            self.value <= self.threshold
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:.3e} {}{:.3e} {}",
            self.name,
            self.value,
            if self.lower_bound { ">=" } else { "<=" },
            self.threshold,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

fn uniform(rng: &mut Pcg32) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn example_wave() -> WaveParams {
    let k = 3.5 * PI / 3.14;
    let lam = 2.0 * PI / k;
    WaveParams::new(k, PI * lam, 3, 1.5 * lam, 5, 5).expect("valid example parameters")
}

/// Closed-form Rayleigh coefficients of the periodic point source against
/// trapezoid quadrature of its modal series on the boundary lines.
pub fn green_quadrature(n_points: usize, seed: u64) -> Result<f64> {
    let p = example_wave();
    let (x0, x1) = p.cell_bounds();
    let h = p.half_height();
    let lam = p.wavelength();
    let mut rng = Pcg32::new(seed, 0);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let z = [
            x0 + (x1 - x0) * uniform(&mut rng),
            (2.0 * uniform(&mut rng) - 1.0) * (h - 0.5 * lam),
        ];
        for side in [Side::Top, Side::Bottom] {
            let dx = (x1 - x0) / n_points as f64;
            let vals: Vec<(f64, C64)> = (0..n_points)
                .map(|i| {
                    let x = x0 + i as f64 * dx;
                    Ok((x, green_ml(&p, [x, side.sign() * h], z)?))
                })
                .collect::<Result<_>>()?;
            for l in p.data_indices() {
                let a = p.alpha(l);
                let quad: C64 = vals
                    .iter()
                    .map(|(x, g)| g * C64::new(0.0, -a * x).exp())
                    .sum::<C64>()
                    / n_points as f64;
                let exact = point_source_coefficient(&p, z, side, l);
                worst = worst.max((quad - exact).norm() / exact.norm());
            }
        }
    }
    Ok(worst)
}

/// `Φ_q(x + L, z) = e^{iα_q L} Φ_q(x, z)` and the sparsity of `Φ̂_q`.
pub fn quasi_periodicity() -> Result<(f64, bool)> {
    let p = example_wave();
    let l = p.period();
    let mut worst = 0.0f64;
    let mut rng = Pcg32::new(5, 1);
    for q in p.cell_indices() {
        let phase = C64::new(0.0, p.alpha_q(q) * l).exp();
        for _ in 0..10 {
            let x = [uniform(&mut rng) * l - 0.5 * l, 0.5 * p.half_height() * (2.0 * uniform(&mut rng) - 1.0)];
            let z = [0.1 * l, 0.2];
            let a = green_q(&p, q, [x[0] + l, x[1]], z)?;
            let b = phase * green_q(&p, q, x, z)?;
            worst = worst.max((a - b).norm() / b.norm());
        }
    }
    let seq = rayleigh_of_point_source_q(&p, 1, [0.3, 0.1], Side::Top);
    let nz: Vec<i64> = seq.iter().filter(|(_, c)| c.norm() > 0.0).map(|(l, _)| l).collect();
    Ok((worst, nz == vec![-5, -2, 1, 4]))
}

/// Largest scattered-field magnitude for an empty layer on a 128² grid.
pub fn zero_contrast() -> Result<f64> {
    let p = example_wave();
    let grid = Grid::new(&p, 129, 128)?;
    let mut worst = 0.0f64;
    for j in [-2, 0, 3] {
        for dir in [Direction::Up, Direction::Down] {
            let src = incident_source(&p, grid, j, dir);
            let empty = ContrastField::from_fn(grid, |_| pdi_core::geometry::Material::vacuum().contrast());
            let solver = Solver::new(&p, empty, SolverOptions::default().with_grid(129, 128))?;
            let sol = solver.solve(&src)?;
            worst = worst.max(sol.value.max_abs());
        }
    }
    Ok(worst)
}

/// Reflection `R` and transmission `T` of the slab `|y| < t` with
/// `(a u')' + k² n u = 0` inside, for `amp·e^{iky}` coming from below.
pub fn slab_transfer(k: f64, t: f64, a: f64, n: f64, amp: C64) -> (C64, C64) {
    let i = C64::new(0.0, 1.0);
    let kap = k * (n / a).sqrt();
    let (c, s) = ((2.0 * kap * t).cos(), (2.0 * kap * t).sin());
    let m = [[c, s / (a * kap)], [-(a * kap) * s, c]];
    let em = (-i * k * t).exp();
    let ep = (i * k * t).exp();
    let a11 = m[0][0] * ep - m[0][1] * i * k * ep;
    let a21 = m[1][0] * ep - m[1][1] * i * k * ep;
    let (a12, a22) = (-ep, -i * k * ep);
    let b1 = -(m[0][0] * amp * em + m[0][1] * i * k * amp * em);
    let b2 = -(m[1][0] * amp * em + m[1][1] * i * k * amp * em);
    let det = a11 * a22 - a12 * a21;
    ((b1 * a22 - a12 * b2) / det, (a11 * b2 - a21 * b1) / det)
}

/// Relative errors of the slab reflection/transmission coefficients at
/// the given vertical resolutions.
pub fn slab_errors(mu_inv: f64, n: f64, sizes: &[usize]) -> Result<Vec<f64>> {
    let k = 3.5 * PI / 3.14;
    let p = WaveParams::new(k, 1.0, 1, 1.0, 0, 0)?;
    let slab = Region::Rect {
        center: [0.0, 0.0],
        half_extents: [10.0, 0.5],
    };
    let contrast = pdi_core::geometry::Material::isotropic(mu_inv, n).contrast();
    let amp = C64::new(0.0, -1.0 / (2.0 * k));
    let (r, t) = slab_transfer(k, 0.5, mu_inv, n, amp);
    let e = C64::new(0.0, k).exp();
    let (want_bottom, want_top) = (r * e, (t - amp) * e);
    sizes
        .iter()
        .map(|&ny| {
            let grid = Grid::new(&p, 4, ny)?;
            let field = ContrastField::from_fn(grid, |x| {
                if slab.contains(x) {
                    contrast
                } else {
                    pdi_core::geometry::Material::vacuum().contrast()
                }
            });
            let solver = Solver::new(&p, field, SolverOptions::default().with_grid(4, ny))?;
            let sol = solver.solve_incident(0, Direction::Up)?;
            let top = rayleigh_extract(&p, &sol.value, Side::Top)?.get(0).unwrap_or_default();
            let bottom = rayleigh_extract(&p, &sol.value, Side::Bottom)?.get(0).unwrap_or_default();
            Ok(((top - want_top).norm() / want_top.norm())
                .max((bottom - want_bottom).norm() / want_bottom.norm()))
        })
        .collect()
}

/// Hermiticity and positivity residuals of `N♯` for random matrices,
/// relative to the matrix norm.
pub fn sharp_residuals(matrices: &[CMatrix]) -> Result<(f64, f64)> {
    let mut herm = 0.0f64;
    let mut neg = 0.0f64;
    for f in matrices {
        let s = sharp(f)?;
        let norm = hermitian_norm(&s).max(f64::MIN_POSITIVE);
        herm = herm.max((&s - s.adjoint()).norm() / norm);
        let min = s.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        neg = neg.max(-min / norm);
    }
    Ok((herm, neg))
}

pub fn random_matrix(n: usize, rng: &mut Pcg32) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| C64::new(2.0 * uniform(rng) - 1.0, 2.0 * uniform(rng) - 1.0))
}

pub fn random_vector(n: usize, rng: &mut Pcg32) -> CVector {
    CVector::from_fn(n, |_, _| C64::new(2.0 * uniform(rng) - 1.0, 2.0 * uniform(rng) - 1.0))
}

/// Largest relative gradient of the GLSM cost at the computed minimizer,
/// from central differences along random directions.
pub fn glsm_gradient(seed: u64) -> Result<f64> {
    let mut rng = Pcg32::new(seed, 3);
    let mut worst = 0.0f64;
    for n in [4, 6, 11] {
        let nm = random_matrix(n, &mut rng);
        let ns = sharp(&nm)?;
        let phi = random_vector(n, &mut rng);
        let (alpha, delta) = (1e-2, 1e-2);
        let a = glsm_minimize(&nm, &ns, &phi, alpha, delta)?;
        let shift = delta * hermitian_norm(&ns);
        let cost = |v: &CVector| {
            alpha * (v.dotc(&(&ns * v)).re + shift * v.norm_squared()) + (&nm * v - &phi).norm_squared()
        };
        let scale = (nm.adjoint() * &phi).norm();
        let step = 1e-3 * a.norm().max(1e-12);
        for _ in 0..20 {
            let v = random_vector(n, &mut rng).normalize();
            let d = (cost(&(&a + &v * C64::new(step, 0.0))) - cost(&(&a - &v * C64::new(step, 0.0))))
                / (2.0 * step);
            worst = worst.max(d.abs() / scale);
        }
    }
    Ok(worst)
}

/// `⟨I_q b, a⟩ = ⟨b, I_q* a⟩` for random densities.
pub fn projection_adjointness() -> Result<f64> {
    let p = WaveParams::new(example_wave().k(), example_wave().period(), 3, example_wave().half_height(), 16, 16)?;
    let mut rng = Pcg32::new(11, 4);
    let mut worst = 0.0f64;
    for q in p.cell_indices() {
        let n_q = pdi_core::operators::class_positions(&p, q).len();
        let a = HerglotzDensity::full(random_vector(p.n_modes(), &mut rng));
        let b = HerglotzDensity::reduced(random_vector(n_q, &mut rng), q);
        let lhs = project_embed(&b, &p)?.entries.dotc(&a.entries);
        let rhs = b.entries.dotc(&project_restrict(&a, q, &p)?.entries);
        worst = worst.max((lhs - rhs).norm() / lhs.norm().max(1e-300));
    }
    Ok(worst)
}

/// Energy, reciprocity and (optionally) factorization checks on the
/// Example-3 medium at the given grid.
pub fn example3_checks(nx: usize, ny: usize, factorization: bool) -> Result<Vec<Check>> {
    let rc = RunConfig::from_toml(EXAMPLE3)?;
    let solver = Solver::for_config(&rc.media, Variant::Perturbed, rc.solver.with_grid(nx, ny))?;
    let sim = simulate_with(&solver, &rc.media, Variant::Perturbed)?;
    let energy = sim
        .records
        .iter()
        .filter_map(|r| r.energy.residual())
        .fold(0.0, f64::max);
    let mut out = vec![
        Check::at_most(format!("energy_balance_{nx}x{ny}"), energy, 1e-4),
        Check::at_most(
            format!("reciprocity_{nx}x{ny}"),
            reciprocity_residual(&rc.media.wave, &sim.plus, &sim.minus),
            1e-6,
        ),
    ];
    if factorization {
        for data in [&sim.plus, &sim.minus] {
            let rep = check_factorization(&solver, data, rc.imaging.q, 5, 3)?;
            let s = data.side.symbol();
            out.push(Check::at_most(format!("factorization{s}_{nx}x{ny}"), rep.full, 0.02));
            out.push(Check::at_most(format!("factorization_q{s}_{nx}x{ny}"), rep.projected, 0.02));
        }
    }
    Ok(out)
}

/// Runs the suite, printing each line as it completes.
pub fn run(level: Level, mut emit: impl FnMut(&Check)) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut push = |c: Check, checks: &mut Vec<Check>| {
        emit(&c);
        checks.push(c);
    };
    let t = Instant::now();
    push(Check::at_most("green_quadrature", green_quadrature(4096, 1)?, 1e-8), &mut checks);
    let (qp, pattern) = quasi_periodicity()?;
    push(Check::at_most("quasi_periodicity", qp, 1e-12), &mut checks);
    push(Check::at_least("q_sparsity_pattern", f64::from(u8::from(pattern)), 1.0), &mut checks);
    push(Check::at_most("zero_contrast", zero_contrast()?, 1e-10), &mut checks);
    let errs = slab_errors(1.0, 2.0, &[128, 256])?;
    push(Check::at_most("slab_error_256", errs[1], 1e-3), &mut checks);
    push(Check::at_least("slab_order", (errs[0] / errs[1]).log2(), 1.8), &mut checks);
    let errs = slab_errors(3.0, 2.0, &[128, 256])?;
    push(Check::at_most("slab_aniso_error_256", errs[1], 1e-3), &mut checks);
    let mut rng = Pcg32::new(2, 5);
    let mats: Vec<CMatrix> = [4, 4, 4, 11, 33].iter().map(|&n| random_matrix(n, &mut rng)).collect();
    let (herm, neg) = sharp_residuals(&mats)?;
    push(Check::at_most("sharp_hermiticity", herm, 1e-12), &mut checks);
    push(Check::at_most("sharp_negativity", neg, 1e-12), &mut checks);
    push(Check::at_most("glsm_gradient", glsm_gradient(7)?, 1e-10), &mut checks);
    push(Check::at_most("projection_adjointness", projection_adjointness()?, 1e-14), &mut checks);
    let (nx, ny) = match level {
        Level::Fast => (132, 128),
        Level::Full => (264, 256),
    };
    for c in example3_checks(nx, ny, level == Level::Full)? {
        push(c, &mut checks);
    }
    log::info!("verification finished in {:.1?}", t.elapsed());
    Ok(checks)
}
