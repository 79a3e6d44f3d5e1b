//! File formats: near-field data, indicator maps, field dumps and atomic
//! writes.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use pdi_core::imaging::IndicatorMap;
use pdi_core::operators::{CMatrix, DataMeta, NearFieldData};
use pdi_core::solver::GridField;
use pdi_core::{Error, Result, Side, Variant, C64};

pub const DATA_MAGIC: &str = "pdi-near-field 1";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(path.display().to_string(), e)
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::io(path.display().to_string(), std::io::ErrorKind::InvalidInput.into()))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp: PathBuf = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Shortest decimal form that parses back to the same bits.
fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Text form of a near-field data file.
///
/// ```text
/// pdi-near-field 1
/// side top
/// variant perturbed
/// k 3.501775250816648e0
/// period ...
/// periods 3
/// half_height ...
/// n_min 16
/// n_max 16
/// noise_level 1e-2
/// seed 1
/// entries 1089
/// <l> <j> <re> <im>
/// ...
/// ```
pub fn format_near_field(d: &NearFieldData) -> String {
    let m = &d.meta;
    let mut s = String::new();
    let _ = writeln!(s, "{DATA_MAGIC}");
    let _ = writeln!(s, "side {}", side_name(d.side));
    let _ = writeln!(s, "variant {}", m.variant.as_str());
    let _ = writeln!(s, "k {}", num(m.k));
    let _ = writeln!(s, "period {}", num(m.period));
    let _ = writeln!(s, "periods {}", m.periods);
    let _ = writeln!(s, "half_height {}", num(m.half_height));
    let _ = writeln!(s, "n_min {}", m.n_min);
    let _ = writeln!(s, "n_max {}", m.n_max);
    let _ = writeln!(s, "noise_level {}", num(d.noise_level));
    match d.seed {
        Some(seed) => {
            let _ = writeln!(s, "seed {seed}");
        }
        None => {
            let _ = writeln!(s, "seed none");
        }
    }
    let _ = writeln!(s, "entries {}", d.dim() * d.dim());
    let idx = d.indices();
    for (r, &l) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            let v = d.matrix[(r, c)];
            let _ = writeln!(s, "{l} {j} {} {}", num(v.re), num(v.im));
        }
    }
    s
}

fn side_name(side: Side) -> &'static str {
    match side {
        Side::Top => "top",
        Side::Bottom => "bottom",
    }
}

pub fn parse_near_field(text: &str, origin: &str) -> Result<NearFieldData> {
    let bad = |line: usize, msg: &str| Error::format(origin, format!("line {}: {msg}", line + 1));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == DATA_MAGIC => {}
        _ => return Err(bad(0, "missing header")),
    }
    let mut header = |key: &str| -> Result<(usize, String)> {
        let (n, line) = lines.next().ok_or_else(|| bad(0, &format!("missing `{key}`")))?;
        let mut it = line.splitn(2, ' ');
        if it.next() != Some(key) {
            return Err(bad(n, &format!("expected `{key}`")));
        }
        Ok((n, it.next().unwrap_or("").trim().to_string()))
    };
    fn parse<T: std::str::FromStr>(v: &str, n: usize, origin: &str) -> Result<T> {
        v.parse()
            .map_err(|_| Error::format(origin, format!("line {}: cannot parse `{v}`", n + 1)))
    }
    let (n, v) = header("side")?;
    let side = match v.as_str() {
        "top" => Side::Top,
        "bottom" => Side::Bottom,
        _ => return Err(bad(n, "side must be top or bottom")),
    };
    let (n, v) = header("variant")?;
    let variant = match v.as_str() {
        "perturbed" => Variant::Perturbed,
        "periodic" => Variant::Periodic,
        _ => return Err(bad(n, "variant must be perturbed or periodic")),
    };
    let (n, v) = header("k")?;
    let k = parse(&v, n, origin)?;
    let (n, v) = header("period")?;
    let period = parse(&v, n, origin)?;
    let (n, v) = header("periods")?;
    let periods = parse(&v, n, origin)?;
    let (n, v) = header("half_height")?;
    let half_height = parse(&v, n, origin)?;
    let (n, v) = header("n_min")?;
    let n_min: usize = parse(&v, n, origin)?;
    let (n, v) = header("n_max")?;
    let n_max: usize = parse(&v, n, origin)?;
    let (n, v) = header("noise_level")?;
    let noise_level = parse(&v, n, origin)?;
    let (n, v) = header("seed")?;
    let seed = if v == "none" {
        None
    } else {
        Some(parse(&v, n, origin)?)
    };
    let (n, v) = header("entries")?;
    let entries: usize = parse(&v, n, origin)?;
    let dim = n_min + n_max + 1;
    if entries != dim * dim {
        return Err(bad(n, "entry count does not match the truncation"));
    }
    let mut matrix = CMatrix::zeros(dim, dim);
    let mut seen = vec![false; dim * dim];
    let off = n_min as i64;
    let mut count = 0;
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(bad(n, "expected `l j re im`"));
        }
        let l: i64 = parse(f[0], n, origin)?;
        let j: i64 = parse(f[1], n, origin)?;
        let (r, c) = (l + off, j + off);
        if r < 0 || c < 0 || r as usize >= dim || c as usize >= dim {
            return Err(bad(n, "mode index outside the truncation"));
        }
        let (r, c) = (r as usize, c as usize);
        if std::mem::replace(&mut seen[r * dim + c], true) {
            return Err(bad(n, "duplicate entry"));
        }
        matrix[(r, c)] = C64::new(parse(f[2], n, origin)?, parse(f[3], n, origin)?);
        count += 1;
    }
    if count != entries {
        return Err(Error::format(origin, format!("expected {entries} entries, found {count}")));
    }
    Ok(NearFieldData {
        side,
        meta: DataMeta {
            k,
            period,
            periods,
            half_height,
            n_min,
            n_max,
            variant,
        },
        matrix,
        noise_level,
        seed,
    })
}

pub fn write_near_field(path: &Path, d: &NearFieldData) -> Result<()> {
    write_atomic(path, format_near_field(d).as_bytes())
}

pub fn read_near_field(path: &Path) -> Result<NearFieldData> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_near_field(&text, &path.display().to_string())
}

/// CSV with header `x,y,value,cost_full,cost_q,d_term`, one row per
/// sampling point in row-major order.
pub fn format_indicator_csv(map: &IndicatorMap) -> String {
    let mut s = String::from("x,y,value,cost_full,cost_q,d_term\n");
    for (i, (v, d)) in map.values.iter().zip(&map.diagnostics).enumerate() {
        let p = map.point(i);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            num(p[0]),
            num(p[1]),
            num(*v),
            num(d.cost_full),
            num(d.cost_q),
            num(d.d_term)
        );
    }
    s
}

/// Rows of an indicator CSV: `[x, y, value, cost_full, cost_q, d_term]`.
pub fn parse_indicator_csv(text: &str, origin: &str) -> Result<Vec<[f64; 6]>> {
    let mut lines = text.lines();
    if lines.next() != Some("x,y,value,cost_full,cost_q,d_term") {
        return Err(Error::format(origin, "unexpected CSV header"));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(n, l)| {
            let f: Vec<f64> = l
                .split(',')
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::format(origin, format!("row {}: not a number", n + 1)))?;
            f.try_into()
                .map_err(|_| Error::format(origin, format!("row {}: expected 6 columns", n + 1)))
        })
        .collect()
}

/// Binary 8-bit PGM, values mapped linearly from `[min, max]` to
/// `[0, 255]`; the first image row is the largest `y`.
pub fn format_pgm(map: &IndicatorMap) -> Vec<u8> {
    let (nx, ny) = (map.grid.nx, map.grid.ny);
    let (lo, hi) = map.min_max();
    let span = hi - lo;
    let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    for row in (0..ny).rev() {
        for col in 0..nx {
            let v = map.values[row * nx + col];
            let t = if span > 0.0 { (v - lo) / span } else { 0.0 };
            out.push((t * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

/// Parses a binary PGM written by [`format_pgm`]: `(width, height, pixels)`.
pub fn parse_pgm(bytes: &[u8], origin: &str) -> Result<(usize, usize, Vec<u8>)> {
    let bad = || Error::format(origin, "not an 8-bit binary PGM");
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad());
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad())?);
    }
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(bad());
    }
    let w: usize = fields[1].parse().map_err(|_| bad())?;
    let h: usize = fields[2].parse().map_err(|_| bad())?;
    let px = &bytes[pos + 1..];
    if px.len() != w * h {
        return Err(bad());
    }
    Ok((w, h, px.to_vec()))
}

/// Field dump: a text header followed by little-endian `f64` pairs
/// (`re`, `im`) in row-major order.
pub fn format_field(field: &GridField) -> Vec<u8> {
    let g = &field.grid;
    let mut out = format!(
        "pdi-field 1\nnx {}\nny {}\nx0 {}\ny0 {}\ndx {}\ndy {}\nend\n",
        g.nx,
        g.ny,
        num(g.x0),
        num(g.y0),
        num(g.dx),
        num(g.dy)
    )
    .into_bytes();
    for v in &field.data {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

/// Parses a field dump into its grid description and samples.
pub fn parse_field(bytes: &[u8], origin: &str) -> Result<(pdi_core::solver::Grid, Vec<C64>)> {
    let bad = |m: &str| Error::format(origin, m.to_string());
    let marker = b"\nend\n";
    let split = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| bad("missing header terminator"))?;
    let head = std::str::from_utf8(&bytes[..split]).map_err(|_| bad("header is not UTF-8"))?;
    let mut lines = head.lines();
    if lines.next() != Some("pdi-field 1") {
        return Err(bad("unexpected header"));
    }
    let mut kv = std::collections::HashMap::new();
    for l in lines {
        let (k, v) = l.split_once(' ').ok_or_else(|| bad("malformed header line"))?;
        kv.insert(k, v);
    }
    let get = |k: &str| kv.get(k).copied().ok_or_else(|| bad(&format!("missing `{k}`")));
    let int = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| bad(k)) };
    let real = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| bad(k)) };
    let grid = pdi_core::solver::Grid {
        nx: int("nx")?,
        ny: int("ny")?,
        x0: real("x0")?,
        y0: real("y0")?,
        dx: real("dx")?,
        dy: real("dy")?,
    };
    let body = &bytes[split + marker.len()..];
    if body.len() != grid.nx * grid.ny * 16 {
        return Err(bad("sample count does not match the grid"));
    }
    let data = body
        .chunks_exact(16)
        .map(|c| {
            C64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok((grid, data))
}

/// File name used for a data matrix, e.g. `perturbed_top.dat`.
pub fn data_file_name(variant: Variant, side: Side) -> String {
    format!("{}_{}.dat", variant.as_str(), side_name(side))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(io_err(path))
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(io_err(path))
}
