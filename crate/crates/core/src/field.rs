//! Periodic uniform-grid fields on the flat torus `T^d = (R/Z)^d` and the
//! second-order difference operators used throughout the solver.
//!
//! Axis order is `(x1, .., xd)` with row-major storage: the last axis is
//! contiguous. Grid nodes sit at `x_i = i*h`, `i = 0..n`, `h = 1/n`, and all
//! indexing wraps periodically.

use crate::error::Error;

/// Uniform periodic lattice over the unit torus. Same point count on every
/// axis; `h * n == 1` exactly in f64 arithmetic (checked at construction).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    h: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Result<Grid, Error> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Config {
                field: "grid.dim".into(),
                constraint: "dim in {1,2,3}".into(),
            });
        }
        if n < 8 {
            return Err(Error::Config {
                field: "grid.n".into(),
                constraint: "n >= 8".into(),
            });
        }
        let h = 1.0 / n as f64;
        if h * n as f64 != 1.0 {
            return Err(Error::Config {
                field: "grid.n".into(),
                constraint: "h*n must round-trip to 1.0 exactly".into(),
            });
        }
        Ok(Grid { dim, n, h })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Total number of lattice points, `n^d`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell volume `h^d`, the midpoint-quadrature weight.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Coordinates of the lattice node with the given flat index.
    pub fn position(&self, mut flat: usize) -> Vec<f64> {
        let mut idx = vec![0usize; self.dim];
        for a in (0..self.dim).rev() {
            idx[a] = flat % self.n;
            flat /= self.n;
        }
        idx.iter().map(|&i| i as f64 * self.h).collect()
    }

    /// Flat index of the multi-index `(i1,..,id)`, wrapping each axis.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dim);
        let mut flat = 0;
        for &i in idx {
            flat = flat * self.n + (i % self.n);
        }
        flat
    }

    /// Shortest signed displacement `a - b` on the periodic axis, in `[-1/2, 1/2)`.
    #[inline]
    pub fn wrap_delta(a: f64, b: f64) -> f64 {
        let d = a - b;
        d - (d + 0.5).floor()
    }

    /// Torus distance between two points.
    pub fn torus_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| {
                let d = Self::wrap_delta(x, y);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Sampled scalar values on a [`Grid`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> ScalarField {
        ScalarField {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> ScalarField {
        ScalarField {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Sample `f` at every lattice node.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> f64) -> ScalarField {
        let mut values = Vec::with_capacity(grid.len());
        let n = grid.n();
        let h = grid.spacing();
        let mut idx = [0usize; 3];
        let d = grid.dim();
        let mut pos = vec![0.0; d];
        for _ in 0..grid.len() {
            for a in 0..d {
                pos[a] = idx[a] as f64 * h;
            }
            values.push(f(&pos));
            // odometer increment over the last axis fastest
            for a in (0..d).rev() {
                idx[a] += 1;
                if idx[a] < n {
                    break;
                }
                idx[a] = 0;
            }
        }
        ScalarField { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<ScalarField, Error> {
        if values.len() != grid.len() {
            return Err(Error::Config {
                field: "field.values".into(),
                constraint: format!("length must be n^d = {}", grid.len()),
            });
        }
        Ok(ScalarField { grid, values })
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Consume the field, returning its raw buffer.
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Cyclic shift by `offset` nodes along `axis` (used by the
    /// shift-equivariance tests and the scenario tooling).
    pub fn shifted(&self, axis: usize, offset: usize) -> ScalarField {
        let n = self.grid.n();
        let mut out = ScalarField::zeros(self.grid);
        let stride: usize = n.pow((self.grid.dim() - 1 - axis) as u32);
        let block = stride * n; // size of one full cycle along `axis`
        for (flat, v) in self.values.iter().enumerate() {
            let base = flat / block * block;
            let rem = flat % block;
            let i = rem / stride;
            let low = rem % stride;
            let j = (i + offset) % n;
            out.values[base + j * stride + low] = *v;
        }
        out
    }
}

/// One scalar array per axis; holds gradients and the approximate velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> VectorField {
        VectorField {
            grid,
            components: (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect(),
        }
    }

    pub fn from_components(components: Vec<ScalarField>) -> Result<VectorField, Error> {
        let grid = components
            .first()
            .map(|c| c.grid())
            .ok_or_else(|| Error::Config {
                field: "vector.components".into(),
                constraint: "at least one component".into(),
            })?;
        if components.len() != grid.dim() || components.iter().any(|c| c.grid() != grid) {
            return Err(Error::Config {
                field: "vector.components".into(),
                constraint: "d components on one common grid".into(),
            });
        }
        Ok(VectorField { grid, components })
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn component(&self, axis: usize) -> &ScalarField {
        &self.components[axis]
    }

    #[inline]
    pub fn component_mut(&mut self, axis: usize) -> &mut ScalarField {
        &mut self.components[axis]
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(|c| c.is_finite())
    }
}

/// Apply `f(neighbors) -> value` over the lattice where `neighbors` yields,
/// for each axis, the pair `(f[i-1], f[i+1])` with periodic wrap, plus the
/// center value. Drives both stencil operators below.
#[inline]
fn for_each_stencil(
    field: &ScalarField,
    mut f: impl FnMut(usize, f64, &[(f64, f64)]),
) {
    let grid = field.grid();
    let n = grid.n();
    let d = grid.dim();
    let v = field.values();
    let mut nb = [(0.0, 0.0); 3];
    match d {
        1 => {
            for i in 0..n {
                let im = if i == 0 { n - 1 } else { i - 1 };
                let ip = if i + 1 == n { 0 } else { i + 1 };
                nb[0] = (v[im], v[ip]);
                f(i, v[i], &nb[..1]);
            }
        }
        2 => {
            for i in 0..n {
                let im = if i == 0 { n - 1 } else { i - 1 };
                let ip = if i + 1 == n { 0 } else { i + 1 };
                let row = i * n;
                let row_m = im * n;
                let row_p = ip * n;
                for j in 0..n {
                    let jm = if j == 0 { n - 1 } else { j - 1 };
                    let jp = if j + 1 == n { 0 } else { j + 1 };
                    nb[0] = (v[row_m + j], v[row_p + j]);
                    nb[1] = (v[row + jm], v[row + jp]);
                    f(row + j, v[row + j], &nb[..2]);
                }
            }
        }
        3 => {
            let n2 = n * n;
            for i in 0..n {
                let im = if i == 0 { n - 1 } else { i - 1 };
                let ip = if i + 1 == n { 0 } else { i + 1 };
                for j in 0..n {
                    let jm = if j == 0 { n - 1 } else { j - 1 };
                    let jp = if j + 1 == n { 0 } else { j + 1 };
                    let plane = i * n2 + j * n;
                    let plane_im = im * n2 + j * n;
                    let plane_ip = ip * n2 + j * n;
                    let plane_jm = i * n2 + jm * n;
                    let plane_jp = i * n2 + jp * n;
                    for k in 0..n {
                        let km = if k == 0 { n - 1 } else { k - 1 };
                        let kp = if k + 1 == n { 0 } else { k + 1 };
                        nb[0] = (v[plane_im + k], v[plane_ip + k]);
                        nb[1] = (v[plane_jm + k], v[plane_jp + k]);
                        nb[2] = (v[plane + km], v[plane + kp]);
                        f(plane + k, v[plane + k], &nb[..3]);
                    }
                }
            }
        }
        _ => unreachable!(),
    }
}

/// Centered (2d+1)-point Laplacian with periodic wrap. Assembled in
/// difference form `sum_axes ((f[i-1]-f[i]) + (f[i+1]-f[i])) / h^2` so that
/// constant fields map to exact zeros.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let grid = f.grid();
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let mut out = ScalarField::zeros(grid);
    let ov = out.values_mut();
    for_each_stencil(f, |flat, c, nb| {
        let mut s = 0.0;
        for &(m, p) in nb {
            s += (m - c) + (p - c);
        }
        ov[flat] = s * inv_h2;
    });
    out
}

/// Centered first differences `(f[i+1] - f[i-1]) / 2h` per axis.
pub fn gradient(f: &ScalarField) -> VectorField {
    let grid = f.grid();
    let inv_2h = 1.0 / (2.0 * grid.spacing());
    let mut out = VectorField::zeros(grid);
    // split borrows: collect raw pointers to each component buffer
    let d = grid.dim();
    let mut comps: Vec<&mut [f64]> = Vec::with_capacity(d);
    let (mut rest, mut taken): (&mut [ScalarField], usize) = (&mut out.components, 0);
    while taken < d {
        let (head, tail) = rest.split_first_mut().expect("d components");
        comps.push(head.values_mut());
        rest = tail;
        taken += 1;
    }
    for_each_stencil(f, |flat, _c, nb| {
        for (a, &(m, p)) in nb.iter().enumerate() {
            comps[a][flat] = (p - m) * inv_2h;
        }
    });
    out
}

/// Neumaier-compensated accumulator. All quadrature reductions go through
/// this so that sums over the same multiset of addends agree to the last bit
/// regardless of traversal order (cyclic shifts, windowed subsets), which the
/// bit-exact equivariance checks rely on.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Accum {
    sum: f64,
    comp: f64,
}

impl Accum {
    /// Branchless two-sum update (Knuth); exact error term regardless of
    /// operand magnitudes.
    #[inline(always)]
    pub fn add(&mut self, x: f64) {
        let s = self.sum + x;
        let bb = s - self.sum;
        self.comp += (self.sum - (s - bb)) + (x - bb);
        self.sum = s;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Four independent compensated lanes, combined in a fixed order. Breaks the
/// loop-carried dependency of a single accumulator in the hot sweeps while
/// keeping the total effectively exact (each lane is compensated, and the
/// final combine adds eight well-separated terms deterministically).
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Accum4(pub [Accum; 4]);

impl Accum4 {
    #[inline(always)]
    pub fn add(&mut self, lane: usize, x: f64) {
        self.0[lane & 3].add(x);
    }

    #[inline]
    pub fn total(&self) -> f64 {
        let mut t = Accum::default();
        for a in &self.0 {
            t.add(a.sum);
        }
        for a in &self.0 {
            t.add(a.comp);
        }
        t.total()
    }
}

/// Midpoint quadrature `h^d * sum(values)` with compensated summation.
pub fn integrate(f: &ScalarField) -> f64 {
    let mut s = Accum::default();
    for &v in f.values() {
        s.add(v);
    }
    s.total() * f.grid().cell_volume()
}

/// `h^d * sum(g(value))` with compensated summation.
pub fn integrate_map(f: &ScalarField, mut g: impl FnMut(f64) -> f64) -> f64 {
    let mut s = Accum::default();
    for &v in f.values() {
        s.add(g(v));
    }
    s.total() * f.grid().cell_volume()
}
