//! Periodic Green functions, incident plane waves, Rayleigh sequences and
//! Dirichlet-to-Neumann maps.
//!
//! Everything here is a closed-form modal sum over `α(ℓ) = 2πℓ/(ML)` with
//! `β(ℓ) = √(k² − α(ℓ)²)`, `Im β ≥ 0`.
//!
//! Normalization: both `Φ = G_M(· − z)` and the Floquet component `Φ_q`
//! carry the prefactor `i/(2ML)`, so `Σ_{q ∈ Z_M} Φ_q = Φ` and the Rayleigh
//! coefficients of `Φ_q` are exactly those of `Φ` restricted to the residue
//! class `q + MZ`.

use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, WaveParams, C64, I, ZERO};

/// Horizontal line on which Rayleigh coefficients are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `x_d = +h` (`+`).
    Top,
    /// `x_d = −h` (`−`).
    Bottom,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Top => 1.0,
            Side::Bottom => -1.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Side::Top => "+",
            Side::Bottom => "-",
        }
    }

    pub fn parse(s: &str) -> Option<Side> {
        match s {
            "+" | "top" | "plus" => Some(Side::Top),
            "-" | "bottom" | "minus" => Some(Side::Bottom),
            _ => None,
        }
    }
}

/// Propagation direction of an incident plane wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Down-to-up (`u^{i,+}`), measured on the top side.
    Up,
    /// Up-to-down (`u^{i,−}`), measured on the bottom side.
    Down,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Up => 1.0,
            Direction::Down => -1.0,
        }
    }

    /// Side on which the near-field data for this direction is recorded.
    pub fn measured_side(self) -> Side {
        match self {
            Direction::Up => Side::Top,
            Direction::Down => Side::Bottom,
        }
    }
}

impl From<Side> for Direction {
    fn from(side: Side) -> Self {
        match side {
            Side::Top => Direction::Up,
            Side::Bottom => Direction::Down,
        }
    }
}

/// Rayleigh coefficients on one side, indexed by `ℓ ∈ [−n_min, n_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RayleighSeq {
    pub side: Side,
    n_min: usize,
    coeffs: Vec<C64>,
}

impl RayleighSeq {
    pub fn zeros(params: &WaveParams, side: Side) -> Self {
        RayleighSeq {
            side,
            n_min: params.n_min(),
            coeffs: vec![ZERO; params.n_modes()],
        }
    }

    pub fn from_fn(params: &WaveParams, side: Side, mut f: impl FnMut(i64) -> C64) -> Self {
        RayleighSeq {
            side,
            n_min: params.n_min(),
            coeffs: params.data_indices().map(&mut f).collect(),
        }
    }

    /// Builds a sequence from raw coefficients ordered from `−n_min` upwards.
    pub fn from_vec(side: Side, n_min: usize, coeffs: Vec<C64>) -> Self {
        RayleighSeq {
            side,
            n_min,
            coeffs,
        }
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> + '_ {
        let lo = -(self.n_min as i64);
        (0..self.coeffs.len()).map(move |p| lo + p as i64)
    }

    pub fn get(&self, l: i64) -> Option<C64> {
        let p = l + self.n_min as i64;
        if p < 0 {
            None
        } else {
            self.coeffs.get(p as usize).copied()
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, C64)> + '_ {
        self.indices().zip(self.coeffs.iter().copied())
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `ℓ²` inner product `Σ a(ℓ) conj(b(ℓ))`.
    pub fn inner(&self, other: &RayleighSeq) -> C64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b.conj())
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: C64) -> RayleighSeq {
        RayleighSeq {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            ..self.clone()
        }
    }
}

impl Add for &RayleighSeq {
    type Output = RayleighSeq;

    fn add(self, rhs: &RayleighSeq) -> RayleighSeq {
        assert_eq!(self.n_min, rhs.n_min, "index sets differ");
        assert_eq!(self.len(), rhs.len(), "index sets differ");
        RayleighSeq {
            side: self.side,
            n_min: self.n_min,
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Mul<C64> for &RayleighSeq {
    type Output = RayleighSeq;

    fn mul(self, rhs: C64) -> RayleighSeq {
        self.scale(rhs)
    }
}

/// Incident plane wave `u^{i,±}(x; j) = −i/(2β̄) exp(i α x̄ ± i β̄ x_d)` and
/// its gradient.
pub fn incident_wave(params: &WaveParams, j: i64, dir: Direction, x: Point) -> (C64, [C64; 2]) {
    let alpha = params.alpha(j);
    let bc = params.beta(j).conj();
    let s = dir.sign();
    let amp = -I / (2.0 * bc);
    let value = amp * (I * (alpha * x[0] + s * bc * x[1])).exp();
    let grad = [I * alpha * value, I * s * bc * value];
    (value, grad)
}

/// `G_M(x − z)`, the `ML`-periodic outgoing Green function, by its modal sum
/// truncated at `|ℓ| ≤ n_green`.
///
/// The series converges exponentially when `x_d ≠ z_d`; on equal heights it
/// is only conditionally convergent and the truncated value is less accurate.
pub fn green_ml(params: &WaveParams, x: Point, z: Point) -> Result<C64> {
    if x == z {
        return Err(Error::Singular);
    }
    let n = params.n_green() as i64;
    Ok(modal_sum(params, x, z, (-n..=n).map(|l| params.mode(l))))
}

/// `Φ_q(x; z)`: the `α_q`-quasi-periodic component of `G_M(x − z)`, summing
/// the modes `j ≡ q (mod M)` with `|j| ≤ n_green`.
pub fn green_q(params: &WaveParams, q: i64, x: Point, z: Point) -> Result<C64> {
    if x == z {
        return Err(Error::Singular);
    }
    let n = params.n_green() as i64;
    let m = params.periods() as i64;
    Ok(modal_sum(
        params,
        x,
        z,
        (-n..=n)
            .filter(|j| (j - q).rem_euclid(m) == 0)
            .map(|j| params.mode(j)),
    ))
}

fn modal_sum(
    params: &WaveParams,
    x: Point,
    z: Point,
    modes: impl Iterator<Item = crate::geometry::ModeIndex>,
) -> C64 {
    let dx = x[0] - z[0];
    let dy = (x[1] - z[1]).abs();
    let sum: C64 = modes
        .map(|m| (I * (m.alpha * dx + m.beta * dy)).exp() / m.beta)
        .sum();
    I / (2.0 * params.total_period()) * sum
}

/// Rayleigh coefficient of `Φ(·; z)` at mode `l` on `side`.
pub fn point_source_coefficient(params: &WaveParams, z: Point, side: Side, l: i64) -> C64 {
    let alpha = params.alpha(l);
    let beta = params.beta(l);
    let h = params.half_height();
    let dist = (z[1] - side.sign() * h).abs();
    I / (2.0 * params.total_period() * beta) * (-I * (alpha * z[0] - beta * dist)).exp()
}

/// Rayleigh sequence `Φ̂^±(z)` of the periodic point source.
pub fn rayleigh_of_point_source(params: &WaveParams, z: Point, side: Side) -> RayleighSeq {
    RayleighSeq::from_fn(params, side, |l| point_source_coefficient(params, z, side, l))
}

/// Rayleigh sequence `Φ̂_q^±(z)`: nonzero only on `j = q + Mℓ`.
pub fn rayleigh_of_point_source_q(
    params: &WaveParams,
    q: i64,
    z: Point,
    side: Side,
) -> RayleighSeq {
    let m = params.periods() as i64;
    RayleighSeq::from_fn(params, side, |j| {
        if (j - q).rem_euclid(m) == 0 {
            point_source_coefficient(params, z, side, j)
        } else {
            ZERO
        }
    })
}

/// Dirichlet-to-Neumann map on `Γ^{±h}`: multiplies mode `ℓ` by `iβ(ℓ)`.
pub fn dtn_apply(params: &WaveParams, trace: &RayleighSeq) -> RayleighSeq {
    RayleighSeq {
        coeffs: trace
            .iter()
            .map(|(l, c)| I * params.beta(l) * c)
            .collect(),
        ..trace.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params() -> WaveParams {
        let k = 3.5 * PI / 3.14;
        let lambda = 2.0 * PI / k;
        WaveParams::new(k, PI * lambda, 3, 1.5 * lambda, 5, 5).unwrap()
    }

    fn lcg(state: &mut u64) -> f64 {
        *state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (*state >> 11) as f64 / (1u64 << 53) as f64
    }

    #[test]
    fn incident_wave_at_origin() {
        let p = params();
        let (v, g) = incident_wave(&p, 0, Direction::Up, [0.0, 0.0]);
        let expect = C64::new(0.0, -1.0 / (2.0 * p.k()));
        assert!((v - expect).norm() < 1e-16);
        assert!(g[0].norm() < 1e-16);
        assert!((g[1] - I * p.k() * expect).norm() < 1e-15);
    }

    #[test]
    fn incident_wave_plane_structure() {
        let p = params();
        let y = 0.37;
        let (a, _) = incident_wave(&p, 0, Direction::Up, [0.0, y]);
        let (b, _) = incident_wave(&p, 0, Direction::Up, [1.9, y]);
        assert!((a - b).norm() < 1e-15);
        let (c, _) = incident_wave(&p, 0, Direction::Up, [0.0, y + 0.1]);
        let ratio = c / a;
        assert!((ratio - (I * p.k() * 0.1).exp()).norm() < 1e-14);
    }

    #[test]
    fn evanescent_incident_uses_conjugate_beta() {
        let p = WaveParams::new(1.0, 2.0, 3, 1.0, 5, 5).unwrap();
        let j = 5;
        assert!(!p.is_propagating(j));
        let b = p.beta(j);
        assert!((b.conj() + b).norm() < 1e-15);
        // Values frozen from an independent mpmath evaluation of
        // −i/(2 conj β) exp(i α x̄ + i conj β x_d) at three points.
        let cases = [
            ([0.3, 0.2], C64::new(0.0, 0.271_932_231_151_312_56)),
            ([-1.1, -0.4], C64::new(0.010_782_745_324_304_918, 0.006_225_420_915_590_622_7)),
            ([2.5, 0.9], C64::new(8.599_310_210_264_472_7, 4.964_814_064_741_290_7)),
        ];
        for (x, expect) in cases {
            let (v, _) = incident_wave(&p, j, Direction::Up, x);
            assert!((v - expect).norm() < 1e-13 * expect.norm(), "{x:?}: {v} vs {expect}");
        }
    }

    #[test]
    fn green_singular_and_symmetries() {
        let p = params();
        assert!(matches!(
            green_ml(&p, [0.1, 0.2], [0.1, 0.2]),
            Err(Error::Singular)
        ));
        let x = [0.3, 0.5];
        let z = [-0.2, -0.4];
        let g = green_ml(&p, x, z).unwrap();
        let l = p.period();
        let shifted = green_ml(&p, [x[0] + l, x[1]], [z[0] + l, z[1]]).unwrap();
        assert!((g - shifted).norm() < 1e-13 * g.norm());
        let wrapped = green_ml(&p, [x[0] + p.total_period(), x[1]], z).unwrap();
        assert!((g - wrapped).norm() < 1e-13 * g.norm());
    }

    #[test]
    fn green_reciprocity() {
        let p = params();
        let mut s = 7u64;
        for _ in 0..20 {
            let x = [10.0 * lcg(&mut s) - 5.0, 2.0 * lcg(&mut s) - 1.0];
            let z = [10.0 * lcg(&mut s) - 5.0, 2.0 * lcg(&mut s) - 1.0];
            let a = green_ml(&p, x, z).unwrap();
            let b = green_ml(&p, z, x).unwrap();
            assert!((a - b).norm() <= 1e-12 * a.norm());
        }
    }

    #[test]
    fn green_helmholtz_residual_by_finite_differences() {
        let p = params();
        let z = [0.2, -0.1];
        let x = [0.9, 0.6];
        let mut errs = Vec::new();
        for step in [0.02, 0.01, 0.005] {
            let g = |dx: f64, dy: f64| green_ml(&p, [x[0] + dx, x[1] + dy], z).unwrap();
            let lap = (g(step, 0.0) + g(-step, 0.0) + g(0.0, step) + g(0.0, -step)
                - 4.0 * g(0.0, 0.0))
                / (step * step);
            let r = lap + p.k() * p.k() * g(0.0, 0.0);
            errs.push(r.norm() / (p.k() * p.k() * g(0.0, 0.0).norm()));
        }
        // Second order: each halving divides the residual by about four.
        assert!(errs[0] < 2e-3, "{errs:?}");
        assert!(errs[1] < errs[0] / 3.5 && errs[2] < errs[1] / 3.5, "{errs:?}");
    }

    fn doubled(p: &WaveParams) -> WaveParams {
        WaveParams::with_options(
            p.k(),
            p.period(),
            p.periods(),
            p.half_height(),
            p.n_min(),
            p.n_max(),
            2 * p.n_green(),
            p.cutoff_eps(),
        )
        .unwrap()
    }

    fn truncation_change(p: &WaveParams, sep: f64) -> f64 {
        let p2 = doubled(p);
        let z = [0.1, 0.0];
        [[0.7, sep], [-2.0, -1.5 * sep], [4.0, 0.5]]
            .iter()
            .map(|&x| {
                let a = green_ml(p, x, z).unwrap();
                let b = green_ml(&p2, x, z).unwrap();
                (a - b).norm() / b.norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    #[ignore = "with ML = 3*pi*lambda and n_green = 200 the tail at lambda/10 is ~1.7e-8"]
    fn green_truncation_convergence_at_tenth_wavelength() {
        let p = params();
        assert!(truncation_change(&p, p.wavelength() / 10.0) <= 1e-10);
    }

    #[test]
    fn green_truncation_convergence() {
        let p = params();
        assert!(truncation_change(&p, 0.15 * p.wavelength()) <= 1e-10);
        // a single-wavelength total period reaches the bound at lambda/10
        let short = WaveParams::new(5.5, 1.0 / 3.0, 3, 1.0, 1, 1).unwrap();
        assert!(truncation_change(&short, short.wavelength() / 10.0) <= 1e-10);
    }

    #[test]
    fn green_q_quasi_periodicity_and_completeness() {
        let p = params();
        let x = [0.4, 0.3];
        let z = [-0.3, -0.2];
        let q = 1;
        let a = green_q(&p, q, x, z).unwrap();
        let b = green_q(&p, q, [x[0] + p.period(), x[1]], z).unwrap();
        let phase = (I * p.alpha_q(q) * p.period()).exp();
        assert!((b - phase * a).norm() < 1e-13 * a.norm());

        let mut s = 3u64;
        for _ in 0..10 {
            let x = [8.0 * lcg(&mut s) - 4.0, 2.0 * lcg(&mut s) - 1.0];
            let z = [8.0 * lcg(&mut s) - 4.0, 2.0 * lcg(&mut s) - 1.0];
            let total: C64 = p
                .cell_indices()
                .map(|q| green_q(&p, q, x, z).unwrap())
                .sum();
            let g = green_ml(&p, x, z).unwrap();
            assert!((total - g).norm() < 1e-12 * g.norm());
        }

        let p1 = WaveParams::new(p.k(), p.period(), 1, p.half_height(), 5, 5).unwrap();
        assert_eq!(green_q(&p1, 0, x, z).unwrap(), green_ml(&p1, x, z).unwrap());
    }

    /// Trapezoid quadrature of the Rayleigh trace integral of `f` on `side`.
    fn trace_quadrature(p: &WaveParams, side: Side, l: i64, f: impl Fn(Point) -> C64) -> C64 {
        let n = 2048;
        let (lo, _) = p.cell_bounds();
        let ml = p.total_period();
        let h = side.sign() * p.half_height();
        let alpha = p.alpha(l);
        let s: C64 = (0..n)
            .map(|i| {
                let xb = lo + ml * i as f64 / n as f64;
                f([xb, h]) * (-I * alpha * xb).exp()
            })
            .sum();
        s / n as f64
    }

    #[test]
    fn point_source_rayleigh_matches_quadrature() {
        let p = params();
        let mut s = 11u64;
        for _ in 0..10 {
            let z = [
                6.0 * lcg(&mut s) - 3.0,
                (2.0 * lcg(&mut s) - 1.0) * 0.8 * p.half_height(),
            ];
            for side in [Side::Top, Side::Bottom] {
                let seq = rayleigh_of_point_source(&p, z, side);
                for (l, c) in seq.iter() {
                    let quad = trace_quadrature(&p, side, l, |x| green_ml(&p, x, z).unwrap());
                    assert!((c - quad).norm() <= 1e-8 * c.norm(), "l={l}: {c} vs {quad}");
                }
            }
        }
    }

    #[test]
    fn point_source_rayleigh_basic_laws() {
        let p = params();
        let z = [0.3, 0.2];
        let seq = rayleigh_of_point_source(&p, z, Side::Top);
        let c0 = seq.get(0).unwrap();
        let expect = 1.0 / (2.0 * p.total_period() * p.k());
        assert!((c0.norm() - expect).abs() < 1e-15);
        let shifted = rayleigh_of_point_source(&p, [z[0] + p.period(), z[1]], Side::Top);
        for (l, c) in seq.iter() {
            let law = c * (-I * p.alpha(l) * p.period()).exp();
            assert!((shifted.get(l).unwrap() - law).norm() < 1e-14 * c.norm());
        }
    }

    #[test]
    fn floquet_rayleigh_sparsity_and_laws() {
        let p = params();
        let z = [0.2, -0.3];
        let seq = rayleigh_of_point_source_q(&p, 1, z, Side::Bottom);
        let nz: Vec<i64> = seq.iter().filter(|(_, c)| *c != ZERO).map(|(l, _)| l).collect();
        assert_eq!(nz, vec![-5, -2, 1, 4]);
        let full = rayleigh_of_point_source(&p, z, Side::Bottom);
        for l in nz {
            assert_eq!(seq.get(l), full.get(l));
        }
        for side in [Side::Top, Side::Bottom] {
            let seq = rayleigh_of_point_source_q(&p, 1, z, side);
            for (l, c) in seq.iter() {
                let quad = trace_quadrature(&p, side, l, |x| green_q(&p, 1, x, z).unwrap());
                assert!((c - quad).norm() <= 1e-8 * c.norm().max(1e-3), "l={l}");
            }
            for m in p.cell_indices() {
                let shifted =
                    rayleigh_of_point_source_q(&p, 1, [z[0] + m as f64 * p.period(), z[1]], side);
                let phase = (-I * m as f64 * p.period() * p.alpha_q(1)).exp();
                for (l, c) in seq.iter() {
                    assert!((shifted.get(l).unwrap() - phase * c).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn dtn_examples() {
        let p = params();
        let zero = RayleighSeq::zeros(&p, Side::Top);
        assert!(dtn_apply(&p, &zero).norm() == 0.0);
        let one = RayleighSeq::from_fn(&p, Side::Top, |l| if l == 2 { C64::new(1.5, -0.5) } else { ZERO });
        let out = dtn_apply(&p, &one);
        let factor = out.get(2).unwrap() / one.get(2).unwrap();
        assert!(factor.re.abs() < 1e-15 && factor.im > 0.0);

        let pe = WaveParams::new(1.0, 2.0, 3, 1.0, 6, 6).unwrap();
        let mut s = 5u64;
        for _ in 0..100 {
            let phi = RayleighSeq::from_fn(&pe, Side::Top, |_| {
                C64::new(2.0 * lcg(&mut s) - 1.0, 2.0 * lcg(&mut s) - 1.0)
            });
            let form = dtn_apply(&pe, &phi).inner(&phi);
            assert!(form.im >= 0.0);
        }
    }

    #[test]
    fn rayleigh_vector_space_ops() {
        let p = params();
        let a = RayleighSeq::from_fn(&p, Side::Top, |l| C64::new(l as f64, 1.0));
        let b = RayleighSeq::from_fn(&p, Side::Top, |l| C64::new(1.0, -(l as f64)));
        let c = &a + &(&b * C64::new(0.0, 2.0));
        for l in p.data_indices() {
            let expect = a.get(l).unwrap() + C64::new(0.0, 2.0) * b.get(l).unwrap();
            assert_eq!(c.get(l).unwrap(), expect);
        }
        assert!((a.inner(&a).re - a.norm().powi(2)).abs() < 1e-12);
        assert!(a.get(6).is_none() && a.get(-6).is_none());
    }
}
