//! TOML run configuration.
//!
//! ```toml
//! [wave]
//! k = 3.501775250816648
//! length_unit = "wavelength"   # or "absolute" (default)
//! period = 3.141592653589793
//! periods = 3
//! half_height = 1.5
//! n_min = 5
//! n_max = 5
//!
//! [[background]]
//! shape = "disc"
//! center = [0.75, -0.6]
//! radius = 0.3
//! n = 2.0
//!
//! [defect]
//! shape = "disc"
//! center = [-0.7, 0.65]
//! radius = 0.25
//! mu_inv = 3.0
//!
//! [solver]
//! nx = 264
//! ny = 256
//!
//! [imaging]
//! q = 1
//! delta = 0.01
//! ```
//!
//! Material entries accept a real number, a complex `[re, im]` pair, or for
//! `mu_inv` a 2×2 matrix of either. Omitted materials default to vacuum.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Defect, Inclusion, Mat2, Material, MediaConfig, Region, WaveParams, C64};
use crate::solver::SolverOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    #[default]
    Absolute,
    Wavelength,
}

/// How `n_min`/`n_max` select the incident and measured modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexSet {
    /// The modes `j ∈ [−n_min, n_max]`.
    #[default]
    Contiguous,
    /// The modes `j = q + Mℓ` for all `q ∈ Z_M` and `ℓ ∈ [−n_min, n_max]`.
    Floquet,
}

impl IndexSet {
    /// Mode bounds `(n_min, n_max)` of the resulting contiguous range.
    pub fn mode_bounds(self, periods: usize, n_min: usize, n_max: usize) -> (usize, usize) {
        match self {
            IndexSet::Contiguous => (n_min, n_max),
            IndexSet::Floquet => {
                let m = periods as i64;
                let lo = -((-m).div_euclid(2) + 1) as usize;
                let hi = m.div_euclid(2) as usize;
                (lo + periods * n_min, hi + periods * n_max)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Real(f64),
    Complex([f64; 2]),
}

impl Scalar {
    fn value(&self) -> C64 {
        match *self {
            Scalar::Real(r) => C64::new(r, 0.0),
            Scalar::Complex([re, im]) => C64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Tensor {
    Scalar(Scalar),
    Matrix([[Scalar; 2]; 2]),
}

impl Tensor {
    fn value(&self) -> Mat2 {
        match self {
            Tensor::Scalar(s) => {
                let v = s.value();
                [[v, C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), v]]
            }
            Tensor::Matrix(m) => [
                [m[0][0].value(), m[0][1].value()],
                [m[1][0].value(), m[1][1].value()],
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSection {
    pub k: f64,
    #[serde(default)]
    pub length_unit: LengthUnit,
    pub period: f64,
    pub periods: usize,
    pub half_height: f64,
    pub n_min: usize,
    pub n_max: usize,
    #[serde(default)]
    pub index_set: IndexSet,
    #[serde(default)]
    pub n_green: Option<usize>,
    #[serde(default)]
    pub cutoff_eps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    #[serde(default)]
    pub mu_inv: Option<Tensor>,
    #[serde(default)]
    pub n: Option<Scalar>,
}

impl MaterialSpec {
    fn material(&self) -> Material {
        let vac = Material::vacuum();
        Material {
            mu_inv: self.mu_inv.map_or(vac.mu_inv, |t| t.value()),
            n: self.n.map_or(vac.n, |s| s.value()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSection {
    #[serde(flatten)]
    pub region: Region,
    #[serde(default)]
    pub mu_inv: Option<Tensor>,
    #[serde(default)]
    pub n: Option<Scalar>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectSection {
    #[serde(flatten)]
    pub region: Region,
    #[serde(default)]
    pub mu_inv: Option<Tensor>,
    #[serde(default)]
    pub n: Option<Scalar>,
    #[serde(default)]
    pub inside_background: Option<MaterialSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaRule {
    /// `α = α₀`.
    Fixed,
    /// `α = α₀ ‖N♯‖`.
    #[default]
    Scaled,
}

/// Imaging settings as written in the file (lengths in the file's unit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImagingSection {
    pub q: i64,
    pub alpha0: f64,
    pub alpha_rule: AlphaRule,
    pub delta: f64,
    pub seed: u64,
    /// Sampling spacing; defaults to λ/20.
    pub sampling_res: Option<f64>,
    /// `[[x_min, x_max], [y_min, y_max]]`; defaults to the truncated cell.
    pub extent: Option<[[f64; 2]; 2]>,
}

impl Default for ImagingSection {
    fn default() -> Self {
        ImagingSection {
            q: 1,
            alpha0: 1e-4,
            alpha_rule: AlphaRule::Scaled,
            delta: 0.01,
            seed: 1,
            sampling_res: None,
            extent: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub wave: WaveSection,
    #[serde(default)]
    pub background: Vec<ComponentSection>,
    #[serde(default)]
    pub defect: Option<DefectSection>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub imaging: ImagingSection,
}

/// Imaging settings resolved to absolute lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagingSettings {
    pub q: i64,
    pub alpha0: f64,
    pub alpha_rule: AlphaRule,
    pub delta: f64,
    pub seed: u64,
    pub sampling_res: f64,
    pub extent: [[f64; 2]; 2],
}

/// A fully validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub media: MediaConfig,
    pub solver: SolverOptions,
    pub imaging: ImagingSettings,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| locate_key(text, s.start))
                .unwrap_or_default();
            Error::config(field, e.message().to_string())
        })
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let w = &self.wave;
        if !(w.k.is_finite() && w.k > 0.0) {
            return Err(Error::config("wave.k", "wavenumber must be positive"));
        }
        let lambda = 2.0 * std::f64::consts::PI / w.k;
        let unit = match w.length_unit {
            LengthUnit::Absolute => 1.0,
            LengthUnit::Wavelength => lambda,
        };
        let (n_min, n_max) = w.index_set.mode_bounds(w.periods, w.n_min, w.n_max);
        let wave = WaveParams::with_options(
            w.k,
            w.period * unit,
            w.periods,
            w.half_height * unit,
            n_min,
            n_max,
            w.n_green.unwrap_or(WaveParams::DEFAULT_N_GREEN),
            w.cutoff_eps
                .unwrap_or(WaveParams::DEFAULT_CUTOFF_REL * w.k * w.k),
        )?;
        let background = self
            .background
            .iter()
            .map(|c| Inclusion {
                region: c.region.scaled(unit),
                material: MaterialSpec {
                    mu_inv: c.mu_inv,
                    n: c.n,
                }
                .material(),
            })
            .collect();
        let defect = self.defect.as_ref().map(|d| Defect {
            region: d.region.scaled(unit),
            material: MaterialSpec {
                mu_inv: d.mu_inv,
                n: d.n,
            }
            .material(),
            inside_background: d.inside_background.map(|m| m.material()),
        });
        let im = &self.imaging;
        let media = MediaConfig::new(wave, background, defect, im.q)?;
        self.solver.validate()?;

        if !(im.alpha0.is_finite() && im.alpha0 > 0.0) {
            return Err(Error::config("imaging.alpha0", "must be positive"));
        }
        if !(im.delta.is_finite() && im.delta >= 0.0) {
            return Err(Error::config("imaging.delta", "must be non-negative"));
        }
        let sampling_res = im.sampling_res.map_or(lambda / 20.0, |r| r * unit);
        if !(sampling_res.is_finite() && sampling_res > 0.0) {
            return Err(Error::config("imaging.sampling_res", "must be positive"));
        }
        let (x0, x1) = media.wave.cell_bounds();
        let h = media.wave.half_height();
        let extent = match im.extent {
            None => [[x0, x1], [-h, h]],
            Some(e) => {
                let e = [[e[0][0] * unit, e[0][1] * unit], [e[1][0] * unit, e[1][1] * unit]];
                let inside = e[0][0] >= x0 && e[0][1] <= x1 && e[1][0] >= -h && e[1][1] <= h;
                if !(e[0][0] < e[0][1] && e[1][0] < e[1][1] && inside) {
                    return Err(Error::config(
                        "imaging.extent",
                        "must be a non-empty box inside the truncated cell",
                    ));
                }
                e
            }
        };
        Ok(RunConfig {
            media,
            solver: self.solver,
            imaging: ImagingSettings {
                q: im.q,
                alpha0: im.alpha0,
                alpha_rule: im.alpha_rule,
                delta: im.delta,
                seed: im.seed,
                sampling_res,
                extent,
            },
        })
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        ConfigFile::parse(text)?.resolve()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }
}

/// Best-effort dotted name of the key whose value starts near `offset`.
fn locate_key(text: &str, offset: usize) -> String {
    let mut section = String::new();
    let mut key = String::new();
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        let t = line.trim();
        if pos > offset {
            break;
        }
        if t.starts_with('[') {
            section = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key.clear();
        } else if let Some((k, _)) = t.split_once('=') {
            key = k.trim().to_string();
        }
        pos += line.len();
    }
    match (section.is_empty(), key.is_empty()) {
        (true, _) => key,
        (false, true) => section,
        (false, false) => format!("{section}.{key}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Variant;

    const EXAMPLE: &str = r#"
[wave]
k = 3.501775250816648
length_unit = "wavelength"
period = 3.141592653589793
periods = 3
half_height = 1.5
n_min = 5
n_max = 5

[[background]]
shape = "disc"
center = [0.75, -0.6]
radius = 0.3
n = 2.0

[[background]]
shape = "disc"
center = [-0.75, 0.6]
radius = 0.4
n = 2.0

[defect]
shape = "disc"
center = [-0.7, 0.65]
radius = 0.25
mu_inv = 3.0
n = 1.0

[solver]
nx = 132
ny = 128
"#;

    #[test]
    fn parses_example_in_wavelength_units() {
        let rc = RunConfig::from_toml(EXAMPLE).unwrap();
        let lam = rc.media.wave.wavelength();
        assert!((rc.media.wave.period() - std::f64::consts::PI * lam).abs() < 1e-12);
        assert!((rc.media.wave.half_height() - 1.5 * lam).abs() < 1e-12);
        assert_eq!(rc.media.background.len(), 2);
        let m = rc.media.eval_media([-0.7 * lam, 0.65 * lam], Variant::Perturbed);
        assert_eq!(m.mu_inv[0][0], C64::new(3.0, 0.0));
        assert_eq!(m.mu_inv[0][1], C64::new(0.0, 0.0));
        assert_eq!(m.n, C64::new(1.0, 0.0));
        assert_eq!(rc.solver.nx, 132);
        assert_eq!(rc.solver.tol, 1e-8);
        assert!((rc.imaging.sampling_res - lam / 20.0).abs() < 1e-15);
        assert_eq!(rc.imaging.q, 1);
    }

    #[test]
    fn floquet_index_set() {
        assert_eq!(IndexSet::Floquet.mode_bounds(3, 5, 5), (16, 16));
        assert_eq!(IndexSet::Floquet.mode_bounds(4, 2, 1), (9, 6));
        assert_eq!(IndexSet::Contiguous.mode_bounds(3, 5, 4), (5, 4));
        let text = EXAMPLE.replace("n_max = 5", "n_max = 5\nindex_set = \"floquet\"");
        let rc = RunConfig::from_toml(&text).unwrap();
        assert_eq!(rc.media.wave.data_indices(), -16..=16);
    }

    #[test]
    fn complex_and_matrix_materials() {
        let text = EXAMPLE.replace(
            "mu_inv = 3.0\nn = 1.0",
            "mu_inv = [[2.0, [0.1, 0.0]], [[0.1, 0.0], 3.0]]\nn = [1.0, 0.2]",
        );
        let rc = RunConfig::from_toml(&text).unwrap();
        let m = rc.media.defect.unwrap().material;
        assert_eq!(m.mu_inv[1][0], C64::new(0.1, 0.0));
        assert_eq!(m.mu_inv[1][1], C64::new(3.0, 0.0));
        assert_eq!(m.n, C64::new(1.0, 0.2));
    }

    #[test]
    fn errors_name_the_field() {
        let bad = EXAMPLE.replace("half_height = 1.5", "half_height = -1.5");
        match RunConfig::from_toml(&bad).unwrap_err() {
            Error::Config { field, .. } => assert_eq!(field, "wave.half_height"),
            e => panic!("{e}"),
        }
        let bad = EXAMPLE.replace("periods = 3", "periods = \"three\"");
        match RunConfig::from_toml(&bad).unwrap_err() {
            Error::Config { field, .. } => assert_eq!(field, "wave.periods"),
            e => panic!("{e}"),
        }
        let bad = EXAMPLE.replace("radius = 0.25", "radius = 0.0");
        match RunConfig::from_toml(&bad).unwrap_err() {
            Error::Config { field, .. } => assert_eq!(field, "defect.radius"),
            e => panic!("{e}"),
        }
        let bad = EXAMPLE.replace("ny = 128", "ny = 128\ntol = 0.0");
        match RunConfig::from_toml(&bad).unwrap_err() {
            Error::Config { field, .. } => assert_eq!(field, "solver.tol"),
            e => panic!("{e}"),
        }
        let bad = format!("{EXAMPLE}\n[imaging]\nq = 2\n");
        match RunConfig::from_toml(&bad).unwrap_err() {
            Error::Config { field, .. } => assert_eq!(field, "imaging.q"),
            e => panic!("{e}"),
        }
    }
}
