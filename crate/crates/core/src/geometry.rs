//! Periodic layer geometry and material coefficients.
//!
//! The layer occupies `|x_d| < h`. The healthy background repeats with period
//! `L` in the transverse coordinate; the computational cell covers `M` periods
//! `[M_L⁻, M_L⁺]` and the local defect sits in the central cell `Ω₀`.
//! Materials are described by the inverse permeability tensor `μ⁻¹` and the
//! refractive index `n`; contrasts are `q = μ⁻¹ − I` and `p = n − 1`.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// A point `(x̄, x_d)` of the plane.
pub type Point = [f64; 2];

/// 2×2 complex matrix stored row-major.
pub type Mat2 = [[C64; 2]; 2];

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

pub const IDENTITY: Mat2 = [[ONE, ZERO], [ZERO, ONE]];

/// Wave and truncation parameters shared by every module.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveParams {
    k: f64,
    period: f64,
    periods: usize,
    half_height: f64,
    n_min: usize,
    n_max: usize,
    n_green: usize,
    cutoff_eps: f64,
}

/// Transverse and vertical wavenumbers of one Rayleigh mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeIndex {
    pub j: i64,
    pub alpha: f64,
    pub beta: C64,
}

impl WaveParams {
    pub const DEFAULT_N_GREEN: usize = 200;
    pub const DEFAULT_CUTOFF_REL: f64 = 1e-10;

    pub fn new(
        k: f64,
        period: f64,
        periods: usize,
        half_height: f64,
        n_min: usize,
        n_max: usize,
    ) -> Result<Self> {
        Self::with_options(
            k,
            period,
            periods,
            half_height,
            n_min,
            n_max,
            Self::DEFAULT_N_GREEN,
            Self::DEFAULT_CUTOFF_REL * k * k,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_options(
        k: f64,
        period: f64,
        periods: usize,
        half_height: f64,
        n_min: usize,
        n_max: usize,
        n_green: usize,
        cutoff_eps: f64,
    ) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::config("wave.k", "wavenumber must be positive"));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::config("wave.period", "period must be positive"));
        }
        if periods == 0 {
            return Err(Error::config("wave.periods", "need at least one period"));
        }
        if !(half_height.is_finite() && half_height > 0.0) {
            return Err(Error::config(
                "wave.half_height",
                "half height must be positive",
            ));
        }
        if !(cutoff_eps.is_finite() && cutoff_eps >= 0.0) {
            return Err(Error::config("wave.cutoff_eps", "must be non-negative"));
        }
        let params = WaveParams {
            k,
            period,
            periods,
            half_height,
            n_min,
            n_max,
            n_green,
            cutoff_eps,
        };
        let reach = n_green.max(n_min).max(n_max) as i64;
        params.check_cutoff(-reach..=reach)?;
        Ok(params)
    }

    /// Fails if any mode in `range` sits within `cutoff_eps` of a Wood anomaly.
    pub fn check_cutoff(&self, range: RangeInclusive<i64>) -> Result<()> {
        // Only the integers nearest to ±kML/2π can be close to cutoff.
        let center = self.k * self.total_period() / (2.0 * PI);
        for c in [center, -center] {
            for j in [c.floor() as i64, c.ceil() as i64] {
                if range.contains(&j) {
                    let a = self.alpha(j);
                    let gap = (self.k * self.k - a * a).abs();
                    if gap <= self.cutoff_eps {
                        return Err(Error::config(
                            "wave.k",
                            format!(
                                "mode {j} is at cutoff (|k² − α²| = {gap:.3e}); choose another wavenumber or period"
                            ),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn half_height(&self) -> f64 {
        self.half_height
    }

    pub fn n_min(&self) -> usize {
        self.n_min
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn n_green(&self) -> usize {
        self.n_green
    }

    pub fn cutoff_eps(&self) -> f64 {
        self.cutoff_eps
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.k
    }

    /// `ML`, the period of the perturbed problem.
    pub fn total_period(&self) -> f64 {
        self.periods as f64 * self.period
    }

    /// `(M_L⁻, M_L⁺)`.
    pub fn cell_bounds(&self) -> (f64, f64) {
        let m = self.periods as i64;
        let lo = ((-m).div_euclid(2) as f64 + 0.5) * self.period;
        let hi = (m.div_euclid(2) as f64 + 0.5) * self.period;
        (lo, hi)
    }

    /// The cell indices `Z_M = {⌊−M/2⌋+1, …, ⌊M/2⌋}`.
    pub fn cell_indices(&self) -> RangeInclusive<i64> {
        let m = self.periods as i64;
        ((-m).div_euclid(2) + 1)..=m.div_euclid(2)
    }

    /// Truncated index set `[−n_min, n_max]` of incident and measured modes.
    pub fn data_indices(&self) -> RangeInclusive<i64> {
        -(self.n_min as i64)..=self.n_max as i64
    }

    pub fn n_modes(&self) -> usize {
        self.n_min + self.n_max + 1
    }

    /// Position of mode `j` in [`Self::data_indices`].
    pub fn data_position(&self, j: i64) -> Option<usize> {
        if self.data_indices().contains(&j) {
            Some((j + self.n_min as i64) as usize)
        } else {
            None
        }
    }

    pub fn alpha(&self, j: i64) -> f64 {
        2.0 * PI * j as f64 / self.total_period()
    }

    /// `β(j) = √(k² − α(j)²)` on the branch `Im β ≥ 0`.
    pub fn beta(&self, j: i64) -> C64 {
        beta_from(self.k, self.alpha(j))
    }

    pub fn mode(&self, j: i64) -> ModeIndex {
        ModeIndex {
            j,
            alpha: self.alpha(j),
            beta: self.beta(j),
        }
    }

    pub fn is_propagating(&self, j: i64) -> bool {
        self.alpha(j).abs() < self.k
    }

    /// All propagating mode numbers, `|α(j)| < k`.
    pub fn propagating_modes(&self) -> RangeInclusive<i64> {
        let mut n = (self.k * self.total_period() / (2.0 * std::f64::consts::PI)).floor() as i64;
        while n > 0 && !self.is_propagating(n) {
            n -= 1;
        }
        -n..=n
    }

    /// Quasi-periodicity parameter `α_q = 2πq/(ML)` of Floquet mode `q`.
    pub fn alpha_q(&self, q: i64) -> f64 {
        self.alpha(q)
    }

    /// Representative of `q` in `Z_M`.
    pub fn reduce_mode(&self, q: i64) -> i64 {
        let m = self.periods as i64;
        let lo = *self.cell_indices().start();
        (q - lo).rem_euclid(m) + lo
    }
}

pub(crate) fn beta_from(k: f64, alpha: f64) -> C64 {
    let d = k * k - alpha * alpha;
    if d >= 0.0 {
        C64::new(d.sqrt(), 0.0)
    } else {
        C64::new(0.0, (-d).sqrt())
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min: Point,
    pub max: Point,
}

impl BoundingBox {
    pub fn empty() -> Self {
        BoundingBox {
            min: [f64::INFINITY; 2],
            max: [f64::NEG_INFINITY; 2],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.min[0] > self.max[0] || self.min[1] > self.max[1]
    }

    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            min: [self.min[0].min(other.min[0]), self.min[1].min(other.min[1])],
            max: [self.max[0].max(other.max[0]), self.max[1].max(other.max[1])],
        }
    }

    pub fn contains(&self, x: Point) -> bool {
        x[0] >= self.min[0] && x[0] <= self.max[0] && x[1] >= self.min[1] && x[1] <= self.max[1]
    }
}

/// Planar region built from discs and axis-aligned rectangles.
///
/// Membership is strict: boundary points are outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Region {
    Disc {
        center: Point,
        radius: f64,
    },
    Rect {
        center: Point,
        half_extents: [f64; 2],
    },
    Union {
        parts: Vec<Region>,
    },
}

impl Region {
    pub fn empty() -> Self {
        Region::Union { parts: Vec::new() }
    }

    pub fn contains(&self, x: Point) -> bool {
        match self {
            Region::Disc { center, radius } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                dx * dx + dy * dy < radius * radius
            }
            Region::Rect {
                center,
                half_extents,
            } => {
                (x[0] - center[0]).abs() < half_extents[0]
                    && (x[1] - center[1]).abs() < half_extents[1]
            }
            Region::Union { parts } => parts.iter().any(|r| r.contains(x)),
        }
    }

    pub fn bbox(&self) -> BoundingBox {
        match self {
            Region::Disc { center, radius } => BoundingBox {
                min: [center[0] - radius, center[1] - radius],
                max: [center[0] + radius, center[1] + radius],
            },
            Region::Rect {
                center,
                half_extents,
            } => BoundingBox {
                min: [center[0] - half_extents[0], center[1] - half_extents[1]],
                max: [center[0] + half_extents[0], center[1] + half_extents[1]],
            },
            Region::Union { parts } => parts
                .iter()
                .fold(BoundingBox::empty(), |b, r| b.union(&r.bbox())),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Region::Union { parts } => parts.iter().all(Region::is_empty),
            _ => false,
        }
    }

    /// Copy shifted by `shift` in the transverse direction.
    pub fn translated(&self, shift: f64) -> Region {
        match self {
            Region::Disc { center, radius } => Region::Disc {
                center: [center[0] + shift, center[1]],
                radius: *radius,
            },
            Region::Rect {
                center,
                half_extents,
            } => Region::Rect {
                center: [center[0] + shift, center[1]],
                half_extents: *half_extents,
            },
            Region::Union { parts } => Region::Union {
                parts: parts.iter().map(|r| r.translated(shift)).collect(),
            },
        }
    }

    /// Copy with every length multiplied by `f`.
    pub fn scaled(&self, f: f64) -> Region {
        match self {
            Region::Disc { center, radius } => Region::Disc {
                center: [center[0] * f, center[1] * f],
                radius: radius * f,
            },
            Region::Rect {
                center,
                half_extents,
            } => Region::Rect {
                center: [center[0] * f, center[1] * f],
                half_extents: [half_extents[0] * f, half_extents[1] * f],
            },
            Region::Union { parts } => Region::Union {
                parts: parts.iter().map(|r| r.scaled(f)).collect(),
            },
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        match self {
            Region::Disc { center, radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::config(
                        format!("{path}.radius"),
                        "radius must be positive",
                    ));
                }
                if !center.iter().all(|c| c.is_finite()) {
                    return Err(Error::config(format!("{path}.center"), "non-finite"));
                }
            }
            Region::Rect {
                center,
                half_extents,
            } => {
                if !half_extents.iter().all(|e| e.is_finite() && *e > 0.0) {
                    return Err(Error::config(
                        format!("{path}.half_extents"),
                        "extents must be positive",
                    ));
                }
                if !center.iter().all(|c| c.is_finite()) {
                    return Err(Error::config(format!("{path}.center"), "non-finite"));
                }
            }
            Region::Union { parts } => {
                for (i, r) in parts.iter().enumerate() {
                    r.validate(&format!("{path}.parts[{i}]"))?;
                }
            }
        }
        Ok(())
    }
}

/// Material coefficients `(μ⁻¹, n)` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub mu_inv: Mat2,
    pub n: C64,
}

impl Material {
    pub fn vacuum() -> Self {
        Material {
            mu_inv: IDENTITY,
            n: ONE,
        }
    }

    pub fn isotropic(mu_inv: f64, n: f64) -> Self {
        let m = C64::new(mu_inv, 0.0);
        Material {
            mu_inv: [[m, ZERO], [ZERO, m]],
            n: C64::new(n, 0.0),
        }
    }

    pub fn contrast(&self) -> Contrast {
        let m = &self.mu_inv;
        Contrast {
            q: [[m[0][0] - ONE, m[0][1]], [m[1][0], m[1][1] - ONE]],
            p: self.n - ONE,
        }
    }

    pub fn is_lossless(&self) -> bool {
        self.n.im == 0.0 && self.mu_inv.iter().flatten().all(|c| c.im == 0.0)
    }

    /// Checks symmetry, coercivity of `Re μ⁻¹`, sign of `Im μ⁻¹` and of `n`.
    pub fn validate(&self, path: &str) -> Result<()> {
        let m = &self.mu_inv;
        if !m.iter().flatten().all(|c| c.is_finite()) || !self.n.is_finite() {
            return Err(Error::config(path, "non-finite material entry"));
        }
        if (m[0][1] - m[1][0]).norm() > 1e-14 * (1.0 + m[0][1].norm()) {
            return Err(Error::config(
                format!("{path}.mu_inv"),
                "inverse permeability must be symmetric",
            ));
        }
        for xi in sample_directions() {
            let mx = [
                m[0][0] * xi[0] + m[0][1] * xi[1],
                m[1][0] * xi[0] + m[1][1] * xi[1],
            ];
            let form = xi[0].conj() * mx[0] + xi[1].conj() * mx[1];
            if form.re <= 0.0 {
                return Err(Error::config(
                    format!("{path}.mu_inv"),
                    "real part of inverse permeability must be positive definite",
                ));
            }
            if form.im > 1e-14 * form.norm() {
                return Err(Error::config(
                    format!("{path}.mu_inv"),
                    "imaginary part of inverse permeability must be negative semidefinite",
                ));
            }
        }
        if self.n.re <= 0.0 {
            return Err(Error::config(
                format!("{path}.n"),
                "real part of refractive index must be positive",
            ));
        }
        if self.n.im < 0.0 {
            return Err(Error::config(
                format!("{path}.n"),
                "imaginary part of refractive index must be non-negative",
            ));
        }
        Ok(())
    }
}

/// 16 real and 16 complex unit directions.
fn sample_directions() -> impl Iterator<Item = [C64; 2]> {
    (0..16).flat_map(|i| {
        let t = 2.0 * PI * i as f64 / 16.0;
        let (s, c) = t.sin_cos();
        let tilt = C64::from_polar(1.0, PI / 3.0);
        [
            [C64::new(c, 0.0), C64::new(s, 0.0)],
            [C64::new(c, 0.0), tilt * s],
        ]
    })
}

/// Contrasts `q = μ⁻¹ − I`, `p = n − 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contrast {
    pub q: Mat2,
    pub p: C64,
}

impl Contrast {
    pub fn is_zero(&self) -> bool {
        self.p == ZERO && self.q.iter().flatten().all(|c| *c == ZERO)
    }
}

/// One background component of the reference cell, repeated with period `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Inclusion {
    pub region: Region,
    pub material: Material,
}

/// The local perturbation `ω` placed in cell `Ω₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct Defect {
    pub region: Region,
    pub material: Material,
    /// Material used where the defect overlaps a background component. When
    /// absent, `material` applies throughout the defect.
    pub inside_background: Option<Material>,
}

/// Which medium to evaluate: with the defect, or the healthy background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Perturbed,
    Periodic,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Perturbed => "perturbed",
            Variant::Periodic => "periodic",
        }
    }
}

/// Complete description of the periodic layer with its defect.
#[derive(Debug, Clone, PartialEq)]
pub struct MediaConfig {
    pub wave: WaveParams,
    pub background: Vec<Inclusion>,
    pub defect: Option<Defect>,
    pub q_mode: i64,
}

impl MediaConfig {
    pub fn new(
        wave: WaveParams,
        background: Vec<Inclusion>,
        defect: Option<Defect>,
        q_mode: i64,
    ) -> Result<Self> {
        let cfg = MediaConfig {
            wave,
            background,
            defect,
            q_mode,
        };
        cfg.validate()?;
        for w in cfg.warnings() {
            log::warn!("{w}");
        }
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let half = 0.5 * self.wave.period;
        let h = self.wave.half_height;
        let inside_cell = |b: &BoundingBox| {
            b.min[0] > -half && b.max[0] < half && b.min[1] > -h && b.max[1] < h
        };
        for (i, inc) in self.background.iter().enumerate() {
            let path = format!("background[{i}]");
            inc.region.validate(&path)?;
            inc.material.validate(&path)?;
            let b = inc.region.bbox();
            if !b.is_empty() && !inside_cell(&b) {
                return Err(Error::config(
                    path,
                    "component must lie strictly inside one period cell and |x_d| < h",
                ));
            }
        }
        if let Some(d) = &self.defect {
            d.region.validate("defect")?;
            d.material.validate("defect")?;
            if let Some(m) = &d.inside_background {
                m.validate("defect.inside_background")?;
            }
            let b = d.region.bbox();
            if !b.is_empty() && !inside_cell(&b) {
                return Err(Error::config(
                    "defect",
                    "defect must lie strictly inside the central cell and |x_d| < h",
                ));
            }
        }
        let m = self.wave.periods as i64;
        if self.wave.reduce_mode(self.q_mode) != self.q_mode {
            return Err(Error::config(
                "imaging.q",
                format!(
                    "Floquet mode must be in [{}, {}]",
                    (-m).div_euclid(2) + 1,
                    m.div_euclid(2)
                ),
            ));
        }
        Ok(())
    }

    /// Non-fatal geometry remarks (defect very close to the cell boundary).
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(d) = &self.defect {
            let b = d.region.bbox();
            if !b.is_empty() {
                let half = 0.5 * self.wave.period;
                let clearance = (b.min[0] + half).min(half - b.max[0]);
                let limit = self.wave.wavelength() / 10.0;
                if clearance < limit {
                    out.push(format!(
                        "defect is {clearance:.4} from the cell boundary (below λ/10 = {limit:.4})"
                    ));
                }
            }
        }
        out
    }

    /// Material at `x` for the requested variant.
    pub fn eval_media(&self, x: Point, variant: Variant) -> Material {
        if variant == Variant::Perturbed {
            if let Some(d) = &self.defect {
                let (lo, _) = self.wave.cell_bounds();
                let ml = self.wave.total_period();
                let xw = [(x[0] - lo).rem_euclid(ml) + lo, x[1]];
                if d.region.contains(xw) {
                    return match d.inside_background {
                        Some(m) if self.background_component(xw).is_some() => m,
                        _ => d.material,
                    };
                }
            }
        }
        match self.background_component(x) {
            Some(i) => self.background[i].material,
            None => Material::vacuum(),
        }
    }

    pub fn contrast(&self, x: Point, variant: Variant) -> Contrast {
        self.eval_media(x, variant).contrast()
    }

    /// Index of the background component containing `x` (after reduction to
    /// the reference cell), if any.
    pub fn background_component(&self, x: Point) -> Option<usize> {
        let l = self.wave.period;
        let xr = [(x[0] + 0.5 * l).rem_euclid(l) - 0.5 * l, x[1]];
        self.background.iter().position(|inc| inc.region.contains(xr))
    }

    pub fn is_lossless(&self) -> bool {
        self.background.iter().all(|b| b.material.is_lossless())
            && self.defect.as_ref().is_none_or(|d| {
                d.material.is_lossless() && d.inside_background.is_none_or(|m| m.is_lossless())
            })
    }

    /// The medium with the defect removed.
    pub fn without_defect(&self) -> MediaConfig {
        MediaConfig {
            defect: None,
            ..self.clone()
        }
    }

    /// True if any component or the defect differs from vacuum.
    pub fn has_contrast(&self) -> bool {
        let nonzero = |m: &Material| !m.contrast().is_zero();
        self.background.iter().any(|b| nonzero(&b.material) && !b.region.is_empty())
            || self.defect.as_ref().is_some_and(|d| {
                !d.region.is_empty()
                    && (nonzero(&d.material) || d.inside_background.as_ref().is_some_and(nonzero))
            })
    }
}

/// Regions derived from the defect and the background components of `Ω₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedRegions {
    /// `𝒪`: components of `D_p ∩ Ω₀` meeting the defect.
    pub touched: Region,
    /// `𝒪ᶜ`: the remaining components of `D_p ∩ Ω₀`.
    pub untouched: Region,
    /// `Λ = 𝒪 ∪ ω`.
    pub lambda: Region,
    /// `D̂_p`: copies of `Λ ∪ 𝒪ᶜ` in every cell.
    pub d_hat_p: Region,
    /// Indices into `MediaConfig::background` of the components in `𝒪`.
    pub touched_components: Vec<usize>,
}

/// [`derived_regions_at`] with sampling spacing λ/100.
pub fn derived_regions(cfg: &MediaConfig) -> DerivedRegions {
    derived_regions_at(cfg, cfg.wave.wavelength() / 100.0)
}

/// Splits the reference-cell components by whether they meet the defect,
/// testing intersection on a point lattice of the given spacing.
pub fn derived_regions_at(cfg: &MediaConfig, spacing: f64) -> DerivedRegions {
    let omega = cfg.defect.as_ref().map(|d| &d.region);
    let mut touched_components = Vec::new();
    if let Some(omega) = omega {
        let b = omega.bbox();
        if !b.is_empty() {
            let nx = ((b.max[0] - b.min[0]) / spacing).ceil() as usize + 1;
            let ny = ((b.max[1] - b.min[1]) / spacing).ceil() as usize + 1;
            for (ci, inc) in cfg.background.iter().enumerate() {
                let hit = (0..nx).any(|i| {
                    (0..ny).any(|j| {
                        let x = [
                            b.min[0] + (b.max[0] - b.min[0]) * i as f64 / (nx - 1).max(1) as f64,
                            b.min[1] + (b.max[1] - b.min[1]) * j as f64 / (ny - 1).max(1) as f64,
                        ];
                        omega.contains(x) && inc.region.contains(x)
                    })
                });
                if hit {
                    touched_components.push(ci);
                }
            }
        }
    }
    let collect = |pick: &dyn Fn(usize) -> bool| Region::Union {
        parts: cfg
            .background
            .iter()
            .enumerate()
            .filter(|(i, _)| pick(*i))
            .map(|(_, inc)| inc.region.clone())
            .collect(),
    };
    let touched = collect(&|i| touched_components.contains(&i));
    let untouched = collect(&|i| !touched_components.contains(&i));
    let mut lambda_parts = vec![touched.clone()];
    if let Some(omega) = omega {
        lambda_parts.push(omega.clone());
    }
    let lambda = Region::Union {
        parts: lambda_parts,
    };
    let cell = Region::Union {
        parts: vec![lambda.clone(), untouched.clone()],
    };
    let d_hat_p = Region::Union {
        parts: cfg
            .wave
            .cell_indices()
            .map(|m| cell.translated(m as f64 * cfg.wave.period))
            .collect(),
    };
    DerivedRegions {
        touched,
        untouched,
        lambda,
        d_hat_p,
        touched_components,
    }
}
