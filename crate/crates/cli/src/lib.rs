//! Command implementations and file formats of the `pdi` tool.

pub mod io;
pub mod manifest;
pub mod verify;

use std::path::{Path, PathBuf};

use log::{info, warn};
use pdi_core::config::{AlphaRule, RunConfig};
use pdi_core::imaging::{image, image_side, period_cell, GlsmOptions, IndicatorMap};
use pdi_core::operators::{add_noise, simulate_with, NearFieldData, Simulation};
use pdi_core::solver::Solver;
use pdi_core::{Direction, Error, ErrorCategory, Result, Side, Variant};

use crate::manifest::{file_entry, RunManifest};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e.category() {
        ErrorCategory::Config => 2,
        ErrorCategory::Consistency => 3,
        ErrorCategory::Io => 4,
        ErrorCategory::Solver => 5,
    }
}

/// Settings shared by the subcommands, after command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub grid: Option<(usize, usize)>,
    pub tol: Option<f64>,
    pub delta: Option<f64>,
    pub seed: Option<u64>,
    pub alpha0: Option<f64>,
    pub q: Option<i64>,
    pub sampling_res: Option<f64>,
}

/// Configuration file, its text and the run description with overrides.
pub struct LoadedConfig {
    pub path: PathBuf,
    pub text: String,
    pub run: RunConfig,
}

pub fn load_config(path: &Path, o: &Overrides) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut run = RunConfig::from_toml(&text)?;
    if let Some((nx, ny)) = o.grid {
        run.solver = run.solver.with_grid(nx, ny);
    }
    if let Some(tol) = o.tol {
        run.solver.tol = tol;
    }
    run.solver.validate()?;
    let im = &mut run.imaging;
    if let Some(d) = o.delta {
        if !(d.is_finite() && d >= 0.0) {
            return Err(Error::config("imaging.delta", "must be non-negative"));
        }
        im.delta = d;
    }
    if let Some(s) = o.seed {
        im.seed = s;
    }
    if let Some(a) = o.alpha0 {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::config("imaging.alpha0", "must be positive"));
        }
        im.alpha0 = a;
    }
    if let Some(q) = o.q {
        if !run.media.wave.cell_indices().contains(&q) {
            return Err(Error::config("imaging.q", "must lie in Z_M"));
        }
        im.q = q;
        run.media.q_mode = q;
    }
    if let Some(r) = o.sampling_res {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::config("imaging.sampling_res", "must be positive"));
        }
        im.sampling_res = r * run.media.wave.wavelength();
    }
    if im.sampling_res > run.media.wave.wavelength() / 10.0 {
        warn!("sampling spacing is coarser than a tenth of a wavelength");
    }
    for w in run.media.warnings() {
        warn!("{w}");
    }
    Ok(LoadedConfig {
        path: path.to_path_buf(),
        text,
        run,
    })
}

/// Paths written by a command, relative to its output directory.
pub type Outputs = Vec<PathBuf>;

/// Runs the forward solves and writes `perturbed_{top,bottom}.dat`, and
/// unless `skip_periodic`, the defect-free `periodic_{top,bottom}.dat`.
pub fn cmd_simulate(cfg: &LoadedConfig, out: &Path, skip_periodic: bool) -> Result<Outputs> {
    cmd_simulate_with_fields(cfg, out, skip_periodic, &[])
}

/// [`cmd_simulate`], also dumping the scattered field of the up-going
/// incidence `j` for every mode in `dump` to `field_<variant>_j<j>.bin`.
pub fn cmd_simulate_with_fields(cfg: &LoadedConfig, out: &Path, skip_periodic: bool, dump: &[i64]) -> Result<Outputs> {
    let wave = &cfg.run.media.wave;
    let range = -(wave.n_min() as i64)..=wave.n_max() as i64;
    if let Some(j) = dump.iter().find(|j| !range.contains(j)) {
        return Err(Error::config("dump-field", format!("mode {j} is outside {range:?}")));
    }
    io::ensure_dir(out)?;
    let mut written = Vec::new();
    let mut log = String::from("variant,direction,j,iterations,final_residual,energy_residual\n");
    let variants: &[Variant] = if skip_periodic {
        &[Variant::Perturbed]
    } else {
        &[Variant::Perturbed, Variant::Periodic]
    };
    for &variant in variants {
        info!("simulating {} medium", variant.as_str());
        let solver = Solver::for_config(&cfg.run.media, variant, cfg.run.solver)?;
        let sim: Simulation = simulate_with(&solver, &cfg.run.media, variant)?;
        for &j in dump {
            let field = solver.solve_incident(j, Direction::Up)?.value;
            let name = format!("field_{}_j{j}.bin", variant.as_str());
            io::write_atomic(&out.join(&name), &io::format_field(&field))?;
            written.push(PathBuf::from(name));
        }
        for data in [&sim.plus, &sim.minus] {
            let name = io::data_file_name(variant, data.side);
            io::write_near_field(&out.join(&name), data)?;
            written.push(PathBuf::from(name));
        }
        for r in &sim.records {
            log.push_str(&format!(
                "{},{},{},{},{:e},{}\n",
                variant.as_str(),
                r.dir.sign(),
                r.j,
                r.iterations,
                r.final_residual,
                r.energy.residual().map_or("nan".to_string(), |e| format!("{e:e}"))
            ));
        }
    }
    io::write_atomic(&out.join("solves.csv"), log.as_bytes())?;
    written.push(PathBuf::from("solves.csv"));
    finish(cfg, out, "simulate", &[], &written)?;
    Ok(written)
}

/// Reads the perturbed data of both sides from `data_dir`.
pub fn read_data_pair(data_dir: &Path, cfg: &LoadedConfig) -> Result<(NearFieldData, NearFieldData)> {
    let read = |side| -> Result<NearFieldData> {
        let d = io::read_near_field(&data_dir.join(io::data_file_name(Variant::Perturbed, side)))?;
        d.meta.check_matches(&cfg.run.media.wave)?;
        if d.side != side {
            return Err(Error::Consistency("data file has the wrong side".into()));
        }
        Ok(d)
    };
    Ok((read(Side::Top)?, read(Side::Bottom)?))
}

fn noisy(cfg: &LoadedConfig, plus: &NearFieldData, minus: &NearFieldData) -> Result<(NearFieldData, NearFieldData)> {
    let im = &cfg.run.imaging;
    Ok((add_noise(plus, im.delta, im.seed)?, add_noise(minus, im.delta, im.seed)?))
}

/// Applies noise, images both sides and writes `indicator.csv` and
/// `indicator.pgm`.
pub fn cmd_image(cfg: &LoadedConfig, data_dir: &Path, out: &Path) -> Result<(IndicatorMap, Outputs)> {
    let (plus, minus) = read_data_pair(data_dir, cfg)?;
    let (plus, minus) = noisy(cfg, &plus, &minus)?;
    let opts = GlsmOptions::from_settings(&cfg.run.imaging)?;
    info!("imaging on a {}x{} sampling grid", opts.sampling.nx, opts.sampling.ny);
    let map = image(&cfg.run.media, &plus, &minus, &opts)?;
    io::ensure_dir(out)?;
    io::write_atomic(&out.join("indicator.csv"), io::format_indicator_csv(&map).as_bytes())?;
    io::write_atomic(&out.join("indicator.pgm"), &io::format_pgm(&map))?;
    let written = vec![PathBuf::from("indicator.csv"), PathBuf::from("indicator.pgm")];
    let inputs: Vec<PathBuf> = [Side::Top, Side::Bottom]
        .iter()
        .map(|&s| data_dir.join(io::data_file_name(Variant::Perturbed, s)))
        .collect();
    finish(cfg, out, "image", &inputs, &written)?;
    Ok((map, written))
}

/// One row of an α sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha0: f64,
    pub alpha_top: f64,
    pub alpha_bottom: f64,
    pub max: f64,
    pub argmax: [f64; 2],
    pub argmax_cell: i64,
    pub mean: f64,
}

/// Images at each `alpha0` and writes `sweep.csv`.
pub fn cmd_sweep_alpha(cfg: &LoadedConfig, data_dir: &Path, out: &Path, alphas: &[f64]) -> Result<(Vec<SweepRow>, Outputs)> {
    let (plus, minus) = read_data_pair(data_dir, cfg)?;
    let (plus, minus) = noisy(cfg, &plus, &minus)?;
    let wave = &cfg.run.media.wave;
    let mut rows = Vec::new();
    for &a0 in alphas {
        if !(a0.is_finite() && a0 > 0.0) {
            return Err(Error::config("alpha0", "sweep values must be positive"));
        }
        let mut settings = cfg.run.imaging.clone();
        settings.alpha0 = a0;
        let opts = GlsmOptions::from_settings(&settings)?;
        let top = image_side(wave, &plus, &opts)?;
        let bottom = image_side(wave, &minus, &opts)?;
        let sys_alpha = |d: &NearFieldData| -> Result<f64> {
            Ok(pdi_core::imaging::GlsmSystem::new(d, wave, &opts)?.alpha)
        };
        let map = IndicatorMap {
            grid: top.grid.clone(),
            values: top.values.iter().zip(&bottom.values).map(|(a, b)| a + b).collect(),
            diagnostics: top.diagnostics.clone(),
        };
        let (am, max) = map.argmax();
        let p = map.point(am);
        rows.push(SweepRow {
            alpha0: a0,
            alpha_top: sys_alpha(&plus)?,
            alpha_bottom: sys_alpha(&minus)?,
            max,
            argmax: p,
            argmax_cell: period_cell(wave, p[0]),
            mean: map.values.iter().sum::<f64>() / map.values.len() as f64,
        });
    }
    let mut csv = String::from("alpha0,alpha_top,alpha_bottom,max,argmax_x,argmax_y,argmax_cell,mean\n");
    for r in &rows {
        csv.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{},{:e}\n",
            r.alpha0, r.alpha_top, r.alpha_bottom, r.max, r.argmax[0], r.argmax[1], r.argmax_cell, r.mean
        ));
    }
    io::ensure_dir(out)?;
    io::write_atomic(&out.join("sweep.csv"), csv.as_bytes())?;
    let written = vec![PathBuf::from("sweep.csv")];
    finish(cfg, out, "sweep-alpha", &[], &written)?;
    Ok((rows, written))
}

fn finish(cfg: &LoadedConfig, out: &Path, command: &str, inputs: &[PathBuf], written: &[PathBuf]) -> Result<()> {
    let im = &cfg.run.imaging;
    let manifest = RunManifest {
        tool_version: VERSION.to_string(),
        command: command.to_string(),
        config_path: cfg.path.display().to_string(),
        config_sha256: manifest::sha256_hex(cfg.text.as_bytes()),
        solver: cfg.run.solver,
        noise: manifest::NoiseRecord {
            delta: im.delta,
            seed: im.seed,
        },
        glsm: manifest::GlsmRecord {
            alpha_rule: match im.alpha_rule {
                AlphaRule::Fixed => "fixed".into(),
                AlphaRule::Scaled => "scaled".into(),
            },
            alpha0: im.alpha0,
            q: im.q,
            sampling_res: im.sampling_res,
            extent: im.extent,
        },
        out_dir: out.display().to_string(),
        inputs: inputs.iter().map(|p| file_entry(p, p)).collect::<Result<_>>()?,
        outputs: written
            .iter()
            .map(|p| file_entry(&out.join(p), p))
            .collect::<Result<_>>()?,
    };
    manifest.write(&out.join("manifest.toml"))
}
