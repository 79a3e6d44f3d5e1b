use crate::error::{Error, Result};
use crate::geometry::{Point, WaveParams, C64, ZERO};

/// Cell-centred tensor grid over `[M_L⁻, M_L⁺] × [−h, h]`.
///
/// Column `i` sits at `x = M_L⁻ + (i + ½)Δx`, row `j` at `y = −h + (j + ½)Δy`.
/// The transverse direction is `ML`-periodic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
}

impl Grid {
    pub fn new(params: &WaveParams, nx: usize, ny: usize) -> Result<Self> {
        let m = params.periods();
        if nx == 0 || nx % m != 0 {
            return Err(Error::config(
                "solver.grid",
                format!("N_x = {nx} must be a positive multiple of M = {m}"),
            ));
        }
        if ny < 2 {
            return Err(Error::config("solver.grid", "N_y must be at least 2"));
        }
        let reach = params.n_min().max(params.n_max());
        if 2 * reach + 1 >= nx {
            return Err(Error::config(
                "solver.grid",
                format!("N_x = {nx} cannot resolve Rayleigh modes up to |ℓ| = {reach}"),
            ));
        }
        let (x0, x1) = params.cell_bounds();
        let h = params.half_height();
        Ok(Grid {
            nx,
            ny,
            x0,
            y0: -h,
            dx: (x1 - x0) / nx as f64,
            dy: 2.0 * h / ny as f64,
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + (j as f64 + 0.5) * self.dy
    }

    pub fn point(&self, idx: usize) -> Point {
        [self.x(idx % self.nx), self.y(idx / self.nx)]
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    /// Signed mode number stored at FFT bin `m`. The Nyquist bin of an even
    /// grid returns `None`.
    pub fn mode_of_bin(&self, m: usize) -> Option<i64> {
        let n = self.nx;
        if 2 * m == n {
            None
        } else if 2 * m < n {
            Some(m as i64)
        } else {
            Some(m as i64 - n as i64)
        }
    }

    /// FFT bin holding mode `l`, if representable.
    pub fn bin_of_mode(&self, l: i64) -> Option<usize> {
        let n = self.nx as i64;
        if 2 * l.abs() >= n {
            None
        } else {
            Some(l.rem_euclid(n) as usize)
        }
    }
}

/// Complex scalar samples on a [`Grid`], optionally with traces on the rows
/// `x_d = ±h`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    /// Row-major samples, `data[j·N_x + i]`.
    pub data: Vec<C64>,
    pub top: Option<Vec<C64>>,
    pub bottom: Option<Vec<C64>>,
}

impl GridField {
    pub fn zeros(grid: Grid) -> Self {
        GridField {
            grid,
            data: vec![ZERO; grid.len()],
            top: None,
            bottom: None,
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> C64) -> Self {
        GridField {
            grid,
            data: (0..grid.len()).map(|i| f(grid.point(i))).collect(),
            top: None,
            bottom: None,
        }
    }

    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.data[self.grid.index(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        let traces = self.top.iter().chain(self.bottom.iter()).flatten();
        self.data
            .iter()
            .chain(traces)
            .fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Trace row on `side`, if recorded.
    pub fn trace(&self, side: crate::green::Side) -> Option<&[C64]> {
        match side {
            crate::green::Side::Top => self.top.as_deref(),
            crate::green::Side::Bottom => self.bottom.as_deref(),
        }
    }
}

/// Volumetric sources `(f₁, f₂)` of the scattering problem on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SourcePair {
    pub grid: Grid,
    pub f1: [Vec<C64>; 2],
    pub f2: Vec<C64>,
}

impl SourcePair {
    pub fn zeros(grid: Grid) -> Self {
        SourcePair {
            grid,
            f1: [vec![ZERO; grid.len()], vec![ZERO; grid.len()]],
            f2: vec![ZERO; grid.len()],
        }
    }

    /// Samples `x ↦ (f₁(x), f₂(x))` at the cell centres.
    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> ([C64; 2], C64) + Sync) -> Self {
        use rayon::prelude::*;
        let vals: Vec<([C64; 2], C64)> = (0..grid.len())
            .into_par_iter()
            .map(|i| f(grid.point(i)))
            .collect();
        SourcePair {
            grid,
            f1: [
                vals.iter().map(|v| v.0[0]).collect(),
                vals.iter().map(|v| v.0[1]).collect(),
            ],
            f2: vals.iter().map(|v| v.1).collect(),
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: C64, other: &SourcePair, b: C64) -> SourcePair {
        let lin = |x: &[C64], y: &[C64]| -> Vec<C64> {
            x.iter().zip(y).map(|(u, v)| a * u + b * v).collect()
        };
        SourcePair {
            grid: self.grid,
            f1: [lin(&self.f1[0], &other.f1[0]), lin(&self.f1[1], &other.f1[1])],
            f2: lin(&self.f2, &other.f2),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> WaveParams {
        WaveParams::new(3.3, 2.0, 3, 1.0, 2, 2).unwrap()
    }

    #[test]
    fn grid_layout() {
        let p = params();
        let g = Grid::new(&p, 12, 8).unwrap();
        assert!((g.dx - 0.5).abs() < 1e-15);
        assert!((g.dy - 0.25).abs() < 1e-15);
        assert!((g.x(0) - (-3.0 + 0.25)).abs() < 1e-15);
        assert!((g.y(7) - (1.0 - 0.125)).abs() < 1e-15);
        assert_eq!(g.point(13), [g.x(1), g.y(1)]);
        assert!(Grid::new(&p, 10, 8).is_err());
        assert!(Grid::new(&p, 3, 8).is_err());
    }

    #[test]
    fn fft_bins() {
        let g = Grid::new(&params(), 12, 4).unwrap();
        assert_eq!(g.mode_of_bin(0), Some(0));
        assert_eq!(g.mode_of_bin(5), Some(5));
        assert_eq!(g.mode_of_bin(6), None);
        assert_eq!(g.mode_of_bin(7), Some(-5));
        assert_eq!(g.bin_of_mode(-1), Some(11));
        assert_eq!(g.bin_of_mode(6), None);
        for m in 0..12 {
            if let Some(l) = g.mode_of_bin(m) {
                assert_eq!(g.bin_of_mode(l), Some(m));
            }
        }
    }
}
