//! Discretization of the unit disk.
//!
//! Interior quantities live on a cell-centered polar grid: ring `i` sits at
//! radius `(i + 1/2) / nr` and angular node `j` at `beta_j = 2 pi j / nbeta`.
//! Directions of travel are sampled uniformly on the circle with the
//! normalized measure (weights `1 / ntheta`), and the boundary circle shares
//! the angular nodes of the polar grid.
//!
//! Angular Fourier modes follow `u(z, theta) = sum_n u_n(z) e^{i n theta}`;
//! only the non-positive modes are stored for real fields since
//! `u_{-n} = conj(u_n)`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Cell-centered polar grid on the unit disk.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PolarGrid {
    nr: usize,
    nbeta: usize,
}

impl PolarGrid {
    pub fn new(nr: usize, nbeta: usize) -> Result<Self> {
        if nr < 4 {
            return Err(Error::InvalidArgument(format!("nr must be >= 4, got {nr}")));
        }
        if nbeta < 8 || !nbeta.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "nbeta must be even and >= 8, got {nbeta}"
            )));
        }
        Ok(Self { nr, nbeta })
    }

    pub fn nr(&self) -> usize {
        self.nr
    }

    pub fn nbeta(&self) -> usize {
        self.nbeta
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.nr * self.nbeta
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dr(&self) -> f64 {
        1.0 / self.nr as f64
    }

    pub fn dbeta(&self) -> f64 {
        2.0 * PI / self.nbeta as f64
    }

    pub fn radius(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.nr as f64
    }

    pub fn beta(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.nbeta as f64
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nbeta + j
    }

    /// Ring and angular indices of a flat node index.
    #[inline]
    pub fn ring_of(&self, idx: usize) -> (usize, usize) {
        (idx / self.nbeta, idx % self.nbeta)
    }

    /// Complex coordinate `z = r e^{i beta}` of a node.
    pub fn point(&self, idx: usize) -> Complex64 {
        let (i, j) = self.ring_of(idx);
        Complex64::from_polar(self.radius(i), self.beta(j))
    }

    pub fn points(&self) -> impl Iterator<Item = Complex64> + '_ {
        (0..self.len()).map(move |idx| self.point(idx))
    }

    /// Quadrature weight `r dr dbeta` of a node.
    pub fn area_weight(&self, idx: usize) -> f64 {
        let (i, _) = self.ring_of(idx);
        self.radius(i) * self.dr() * self.dbeta()
    }

    pub fn boundary(&self) -> BoundaryGrid {
        BoundaryGrid { nbeta: self.nbeta }
    }

    /// Grid with `factor` times more nodes in both directions.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            nr: self.nr * factor,
            nbeta: self.nbeta * factor,
        }
    }
}

/// Nodes `zeta_j = e^{i beta_j}` on the unit circle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryGrid {
    nbeta: usize,
}

impl BoundaryGrid {
    pub fn new(nbeta: usize) -> Self {
        Self { nbeta }
    }

    pub fn len(&self) -> usize {
        self.nbeta
    }

    pub fn is_empty(&self) -> bool {
        self.nbeta == 0
    }

    pub fn node(&self, j: usize) -> Complex64 {
        Complex64::from_polar(1.0, 2.0 * PI * j as f64 / self.nbeta as f64)
    }

    /// Outer unit normal; on the unit circle it equals the node itself.
    pub fn normal(&self, j: usize) -> Complex64 {
        self.node(j)
    }

    pub fn arc_weight(&self) -> f64 {
        2.0 * PI / self.nbeta as f64
    }
}

/// Uniform directions `theta_m = 2 pi m / ntheta` with weights `1/ntheta`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DirectionGrid {
    ntheta: usize,
}

impl DirectionGrid {
    pub fn new(ntheta: usize) -> Result<Self> {
        if ntheta < 4 || !ntheta.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "ntheta must be even and >= 4, got {ntheta}"
            )));
        }
        Ok(Self { ntheta })
    }

    pub fn len(&self) -> usize {
        self.ntheta
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn angle(&self, m: usize) -> f64 {
        2.0 * PI * m as f64 / self.ntheta as f64
    }

    /// Unit vector of direction `m` as a complex number.
    pub fn direction(&self, m: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.angle(m))
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.ntheta as f64
    }

    /// Index of the opposite direction.
    pub fn opposite(&self, m: usize) -> usize {
        (m + self.ntheta / 2) % self.ntheta
    }

    /// Largest mode count that `angular_modes` accepts.
    pub fn max_modes(&self) -> usize {
        self.ntheta / 2 - 1
    }
}

/// Value types stored on grids.
pub trait Sample:
    Copy
    + Send
    + Sync
    + Default
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<f64, Output = Self>
    + Into<Complex64>
{
}

impl Sample for f64 {}
impl Sample for Complex64 {}

/// Values on the nodes of a [`PolarGrid`], ring-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    grid: PolarGrid,
    values: Vec<T>,
}

pub type ScalarField = Field<f64>;
pub type ComplexField = Field<Complex64>;

impl<T: Sample> Field<T> {
    pub fn from_values(grid: PolarGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: PolarGrid, f: impl FnMut(Complex64) -> T) -> Self {
        let values = grid.points().map(f).collect();
        Self { grid, values }
    }

    pub fn constant(grid: PolarGrid, value: T) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn zeros(grid: PolarGrid) -> Self {
        Self::constant(grid, T::default())
    }

    pub fn grid(&self) -> PolarGrid {
        self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[self.grid.index(i, j)]
    }

    pub fn ring(&self, i: usize) -> &[T] {
        let nb = self.grid.nbeta;
        &self.values[i * nb..(i + 1) * nb]
    }

    pub fn map<U: Sample>(&self, f: impl Fn(T) -> U) -> Field<U> {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map<U: Sample, V: Sample>(
        &self,
        other: &Field<U>,
        f: impl Fn(T, U) -> V,
    ) -> Field<V> {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn to_complex(&self) -> ComplexField {
        self.map(|v| v.into())
    }

    /// Area-weighted L2 norm over the disk.
    pub fn l2_norm(&self) -> f64 {
        self.weighted_sq_sum(|_| true).sqrt()
    }

    /// Area-weighted L2 norm restricted to nodes selected by `mask`.
    pub fn l2_norm_masked(&self, mask: impl Fn(usize) -> bool) -> f64 {
        self.weighted_sq_sum(mask).sqrt()
    }

    fn weighted_sq_sum(&self, mask: impl Fn(usize) -> bool) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(idx, _)| mask(*idx))
            .map(|(idx, &v)| self.grid.area_weight(idx) * Into::<Complex64>::into(v).norm_sqr())
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| Into::<Complex64>::into(v).norm())
            .fold(0.0, f64::max)
    }

    /// Area-weighted integral of the field over the disk.
    pub fn integrate(&self) -> Complex64 {
        self.values
            .iter()
            .enumerate()
            .map(|(idx, &v)| Into::<Complex64>::into(v) * self.grid.area_weight(idx))
            .sum()
    }

    /// Trace at r = 1 by linear extrapolation from the two outermost rings.
    pub fn boundary_trace(&self) -> Vec<T> {
        let nr = self.grid.nr;
        let outer = self.ring(nr - 1);
        let inner = self.ring(nr - 2);
        // Rings sit at 1 - h/2 and 1 - 3h/2; r = 1 is half a cell beyond.
        outer
            .iter()
            .zip(inner)
            .map(|(&o, &p)| o * 1.5 - p * 0.5)
            .collect()
    }
}

impl ScalarField {
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }
}

impl ComplexField {
    pub fn re(&self) -> ScalarField {
        self.map(|v| v.re)
    }

    pub fn im(&self) -> ScalarField {
        self.map(|v| v.im)
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn mul_real(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }
}

/// Real planar vector field stored component-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub x: ScalarField,
    pub y: ScalarField,
}

impl VectorField {
    pub fn new(x: ScalarField, y: ScalarField) -> Result<Self> {
        if x.grid() != y.grid() {
            return Err(Error::GridMismatch(
                "vector components on different grids".into(),
            ));
        }
        Ok(Self { x, y })
    }

    pub fn zeros(grid: PolarGrid) -> Self {
        Self {
            x: ScalarField::zeros(grid),
            y: ScalarField::zeros(grid),
        }
    }

    pub fn from_fn(grid: PolarGrid, f: impl Fn(Complex64) -> (f64, f64)) -> Self {
        let (xs, ys): (Vec<f64>, Vec<f64>) = grid.points().map(f).unzip();
        Self {
            x: Field { grid, values: xs },
            y: Field { grid, values: ys },
        }
    }

    pub fn grid(&self) -> PolarGrid {
        self.x.grid()
    }

    /// Complexification `f1 = (F1 + i F2) / 2`.
    pub fn to_f1(&self) -> ComplexField {
        self.x.zip_map(&self.y, |a, b| Complex64::new(a, b) * 0.5)
    }

    /// Inverse of [`VectorField::to_f1`]: `F = (2 Re f1, 2 Im f1)`.
    pub fn from_f1(f1: &ComplexField) -> Self {
        Self {
            x: f1.map(|v| 2.0 * v.re),
            y: f1.map(|v| 2.0 * v.im),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            x: self.x.add(&other.x),
            y: self.y.add(&other.y),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            x: self.x.sub(&other.x),
            y: self.y.sub(&other.y),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            x: self.x.scale(s),
            y: self.y.scale(s),
        }
    }

    /// Area-weighted L2 norm of the magnitude.
    pub fn l2_norm(&self) -> f64 {
        (self.x.l2_norm().powi(2) + self.y.l2_norm().powi(2)).sqrt()
    }

    pub fn l2_norm_masked(&self, mask: impl Fn(usize) -> bool + Copy) -> f64 {
        (self.x.l2_norm_masked(mask).powi(2) + self.y.l2_norm_masked(mask).powi(2)).sqrt()
    }
}

/// Values on `PolarGrid x DirectionGrid`, direction-major.
#[derive(Clone, Debug, PartialEq)]
pub struct AngularField<T = f64> {
    grid: PolarGrid,
    dirs: DirectionGrid,
    values: Vec<T>,
}

impl<T: Sample> AngularField<T> {
    pub fn zeros(grid: PolarGrid, dirs: DirectionGrid) -> Self {
        Self {
            grid,
            dirs,
            values: vec![T::default(); grid.len() * dirs.len()],
        }
    }

    pub fn from_values(grid: PolarGrid, dirs: DirectionGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() * dirs.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} angular values, got {}",
                grid.len() * dirs.len(),
                values.len()
            )));
        }
        Ok(Self { grid, dirs, values })
    }

    /// Samples `f(z, theta)` where `theta` is passed as a unit complex number.
    pub fn from_fn(
        grid: PolarGrid,
        dirs: DirectionGrid,
        mut f: impl FnMut(Complex64, Complex64) -> T,
    ) -> Self {
        let mut values = Vec::with_capacity(grid.len() * dirs.len());
        for m in 0..dirs.len() {
            let theta = dirs.direction(m);
            values.extend(grid.points().map(|z| f(z, theta)));
        }
        Self { grid, dirs, values }
    }

    pub fn grid(&self) -> PolarGrid {
        self.grid
    }

    pub fn dirs(&self) -> DirectionGrid {
        self.dirs
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// All node values for direction `m`.
    pub fn direction_slice(&self, m: usize) -> &[T] {
        let n = self.grid.len();
        &self.values[m * n..(m + 1) * n]
    }

    pub fn direction_slice_mut(&mut self, m: usize) -> &mut [T] {
        let n = self.grid.len();
        &mut self.values[m * n..(m + 1) * n]
    }

    pub fn get(&self, node: usize, m: usize) -> T {
        self.values[m * self.grid.len() + node]
    }

    /// Angular samples at one node.
    pub fn node_samples(&self, node: usize) -> Vec<T> {
        let n = self.grid.len();
        (0..self.dirs.len())
            .map(|m| self.values[m * n + node])
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| Into::<Complex64>::into(v).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| Into::<Complex64>::into(a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl AngularField<f64> {
    /// Real field with prescribed non-positive modes `<m_0, m_{-1}, ..., m_{-N}>`.
    pub fn from_modes(modes: &[ComplexField], dirs: DirectionGrid) -> Result<Self> {
        let grid = modes
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty mode stack".into()))?
            .grid();
        let mut out = Self::zeros(grid, dirs);
        for m in 0..dirs.len() {
            let theta = dirs.angle(m);
            let twiddles: Vec<Complex64> = (0..modes.len())
                .map(|n| Complex64::from_polar(1.0, -(n as f64) * theta))
                .collect();
            let slice = out.direction_slice_mut(m);
            for (node, value) in slice.iter_mut().enumerate() {
                let mut acc = modes[0].values()[node].re;
                for n in 1..modes.len() {
                    acc += 2.0 * (modes[n].values()[node] * twiddles[n]).re;
                }
                *value = acc;
            }
        }
        Ok(out)
    }
}

/// Stack `<m_0, m_{-1}, ..., m_{-N}>` of angular Fourier coefficients:
/// `m_{-n}(z) = (1/ntheta) sum_m field(z, theta_m) e^{+i n theta_m}`.
pub fn angular_modes<T: Sample>(field: &AngularField<T>, n: usize) -> Result<Vec<ComplexField>> {
    let dirs = field.dirs();
    if n > dirs.max_modes() {
        return Err(Error::InvalidArgument(format!(
            "{n} modes requested but ntheta = {} resolves at most {}",
            dirs.len(),
            dirs.max_modes()
        )));
    }
    let grid = field.grid();
    let nt = dirs.len();
    let w = dirs.weight();
    let mut modes: Vec<ComplexField> = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let twiddles: Vec<Complex64> = (0..nt)
            .map(|m| Complex64::from_polar(w, k as f64 * dirs.angle(m)))
            .collect();
        let values: Vec<Complex64> = (0..grid.len())
            .into_par_iter()
            .map(|node| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (m, tw) in twiddles.iter().enumerate() {
                    acc += Into::<Complex64>::into(field.get(node, m)) * tw;
                }
                acc
            })
            .collect();
        modes.push(Field { grid, values });
    }
    Ok(modes)
}

/// Full discrete angular spectrum of `samples` (coefficients of `e^{i k theta}`,
/// FFT ordering: index `k` for `k >= 0`, `nt + k` for `k < 0`).
pub fn angular_spectrum(samples: &[Complex64], fft: &dyn Fft<f64>) -> Vec<Complex64> {
    let nt = samples.len();
    let mut buf = samples.to_vec();
    fft.process(&mut buf);
    let w = 1.0 / nt as f64;
    buf.iter_mut().for_each(|c| *c *= w);
    buf
}

/// Spectral derivative in beta of every ring, with the Nyquist mode dropped.
fn d_beta(field: &ComplexField) -> ComplexField {
    let grid = field.grid();
    let nb = grid.nbeta();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(nb);
    let inv = planner.plan_fft_inverse(nb);
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    out.par_chunks_mut(nb)
        .enumerate()
        .for_each(|(i, ring_out)| {
            let mut buf = field.ring(i).to_vec();
            fwd.process(&mut buf);
            for (k, c) in buf.iter_mut().enumerate() {
                let wave = wavenumber(k, nb);
                *c = if 2 * k == nb {
                    Complex64::new(0.0, 0.0)
                } else {
                    *c * I * wave as f64
                };
            }
            inv.process(&mut buf);
            let s = 1.0 / nb as f64;
            for (o, c) in ring_out.iter_mut().zip(buf) {
                *o = c * s;
            }
        });
    Field { grid, values: out }
}

/// Signed wavenumber of FFT bin `k`.
pub(crate) fn wavenumber(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Radial derivative: centered differences, reflection through the origin at
/// the innermost ring, second-order one-sided at the outermost ring.
fn d_radius(field: &ComplexField) -> ComplexField {
    let grid = field.grid();
    let (nr, nb) = (grid.nr(), grid.nbeta());
    let h12 = 12.0 * grid.dr();
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    out.par_chunks_mut(nb)
        .enumerate()
        .for_each(|(i, ring_out)| {
            for (j, o) in ring_out.iter_mut().enumerate() {
                // rings below the centre are the opposite rays
                let f = |k: isize| {
                    if k < 0 {
                        field.get((-k - 1) as usize, (j + nb / 2) % nb)
                    } else {
                        field.get(k as usize, j)
                    }
                };
                let i = i as isize;
                *o = if i == nr as isize - 1 {
                    (f(i - 4) * 3.0 - f(i - 3) * 16.0 + f(i - 2) * 36.0 - f(i - 1) * 48.0
                        + f(i) * 25.0)
                        / h12
                } else if i == nr as isize - 2 {
                    (-f(i - 3) + f(i - 2) * 6.0 - f(i - 1) * 18.0 + f(i) * 10.0 + f(i + 1) * 3.0)
                        / h12
                } else {
                    (-f(i + 2) + f(i + 1) * 8.0 - f(i - 1) * 8.0 + f(i - 2)) / h12
                };
            }
        });
    Field { grid, values: out }
}

/// Cauchy-Riemann operator `dbar = (d_x + i d_y) / 2`.
pub fn dbar(field: &ComplexField) -> ComplexField {
    cauchy_riemann(field, 1.0)
}

/// Cauchy-Riemann operator `d = (d_x - i d_y) / 2`.
pub fn d(field: &ComplexField) -> ComplexField {
    cauchy_riemann(field, -1.0)
}

fn cauchy_riemann(field: &ComplexField, sign: f64) -> ComplexField {
    let grid = field.grid();
    let fr = d_radius(field);
    let fb = d_beta(field);
    let nb = grid.nbeta();
    let phases: Vec<Complex64> = (0..nb)
        .map(|j| Complex64::from_polar(0.5, sign * grid.beta(j)))
        .collect();
    let mut values = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let (i, j) = grid.ring_of(idx);
        let r = grid.radius(i);
        values.push(phases[j] * (fr.values[idx] + I * sign * fb.values[idx] / r));
    }
    Field { grid, values }
}

/// Bilinear interpolation in `(r, beta)` at an arbitrary point of the closed disk.
///
/// Below the innermost ring the value is interpolated linearly in `r` between
/// the innermost ring and its mean, taken as the value at the centre; beyond
/// the outermost ring the outermost ring is used.
pub fn interpolate<T: Sample>(field: &Field<T>, point: Complex64) -> Result<T> {
    let r = point.norm();
    if r > 1.0 + 1e-12 {
        return Err(Error::OutOfDomain(format!("{point}")));
    }
    let beta = point.im.atan2(point.re);
    Ok(interp_polar(field.values(), field.grid(), r, beta))
}

/// Interpolation kernel behind [`interpolate`], for callers that already know
/// the polar coordinates of the target.
#[inline]
pub fn interp_polar<T: Sample>(values: &[T], grid: PolarGrid, r: f64, beta: f64) -> T {
    let nb = grid.nbeta;
    let nr = grid.nr;
    let ring_at = |i: usize, beta: f64| -> T {
        let x = beta.rem_euclid(2.0 * PI) / grid.dbeta();
        let j0 = (x.floor() as usize) % nb;
        let t = x - x.floor();
        let j1 = (j0 + 1) % nb;
        let row = i * nb;
        values[row + j0] * (1.0 - t) + values[row + j1] * t
    };
    let x = r * nr as f64 - 0.5;
    if x <= 0.0 {
        let w = r / grid.radius(0);
        let mut centre = T::default();
        for v in &values[..nb] {
            centre = centre + *v;
        }
        return centre * ((1.0 - w) / nb as f64) + ring_at(0, beta) * w;
    }
    if x >= (nr - 1) as f64 {
        return ring_at(nr - 1, beta);
    }
    let i0 = x.floor() as usize;
    let t = x - i0 as f64;
    ring_at(i0, beta) * (1.0 - t) + ring_at(i0 + 1, beta) * t
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> PolarGrid {
        PolarGrid::new(32, 64).unwrap()
    }

    #[test]
    fn grid_invariants() {
        assert!(PolarGrid::new(3, 16).is_err());
        assert!(PolarGrid::new(8, 6).is_err());
        assert!(PolarGrid::new(8, 15).is_err());
        let g = grid();
        assert!(g.radius(0) > 0.0 && g.radius(g.nr() - 1) < 1.0);
        let b = g.boundary();
        for j in 0..b.len() {
            assert!((b.node(j).norm() - 1.0).abs() < 1e-15);
            let n = b.normal(j);
            assert!(((n.conj() * b.node(j)).re - 1.0).abs() < 1e-15);
        }
        let dirs = DirectionGrid::new(16).unwrap();
        assert!((dirs.weight() * dirs.len() as f64 - 1.0).abs() < 1e-15);
        assert!(DirectionGrid::new(7).is_err());
    }

    #[test]
    fn modes_of_constant_and_cosine() {
        let g = grid();
        let dirs = DirectionGrid::new(16).unwrap();
        let one = AngularField::from_fn(g, dirs, |_, _| 1.0);
        let modes = angular_modes(&one, 7).unwrap();
        assert!(modes[0].values().iter().all(|v| (v - 1.0).norm() < 1e-14));
        assert!(modes[1..].iter().all(|m| m.max_abs() < 1e-14));

        let cos = AngularField::from_fn(g, dirs, |_, th| th.re);
        let modes = angular_modes(&cos, 7).unwrap();
        assert!(modes[1].values().iter().all(|v| (v - 0.5).norm() < 1e-14));
        for (n, m) in modes.iter().enumerate() {
            if n != 1 {
                assert!(m.max_abs() < 1e-14);
            }
        }
        assert!(angular_modes(&cos, 8).is_err());
    }

    #[test]
    fn modes_round_trip_and_parseval() {
        let g = PolarGrid::new(4, 8).unwrap();
        let dirs = DirectionGrid::new(32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 12;
        let modes: Vec<ComplexField> = (0..=n)
            .map(|k| {
                Field::from_fn(g, |_| {
                    let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    if k == 0 {
                        Complex64::new(c.re, 0.0)
                    } else {
                        c
                    }
                })
            })
            .collect();
        let field = AngularField::from_modes(&modes, dirs).unwrap();
        // Direct DFT summation oracle.
        for node in 0..g.len() {
            let samples = field.node_samples(node);
            for (k, mode) in modes.iter().enumerate() {
                let direct: Complex64 = samples
                    .iter()
                    .enumerate()
                    .map(|(m, &v)| Complex64::from_polar(v / 32.0, k as f64 * dirs.angle(m)))
                    .sum();
                assert!((direct - mode.values()[node]).norm() < 1e-12);
            }
            let lhs: f64 = samples.iter().map(|v| v * v).sum::<f64>() / 32.0;
            let rhs: f64 = modes[0].values()[node].norm_sqr()
                + 2.0
                    * modes[1..]
                        .iter()
                        .map(|m| m.values()[node].norm_sqr())
                        .sum::<f64>();
            assert!((lhs - rhs).abs() < 1e-12);
        }
        let back = angular_modes(&field, n).unwrap();
        for (a, b) in back.iter().zip(&modes) {
            assert!(a.sub(b).max_abs() < 1e-12);
        }
    }

    fn interior_max(f: &ComplexField, skip_outer: usize) -> f64 {
        let g = f.grid();
        (0..g.len())
            .filter(|&idx| g.ring_of(idx).0 < g.nr() - skip_outer)
            .map(|idx| f.values()[idx].norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn cauchy_riemann_on_monomials() {
        let g = grid();
        let z = ComplexField::from_fn(g, |z| z);
        assert!(interior_max(&d(&z).map(|v| v - 1.0), 0) < 1e-12);
        assert!(interior_max(&dbar(&z), 0) < 1e-12);
        let zc = z.conj();
        assert!(interior_max(&dbar(&zc).map(|v| v - 1.0), 0) < 1e-12);
        assert!(interior_max(&d(&zc), 0) < 1e-12);
    }

    #[test]
    fn d_of_modulus_squared_matches_cartesian_differences() {
        let g = grid();
        let f = ComplexField::from_fn(g, |z| Complex64::new(z.norm_sqr(), 0.0));
        let df = d(&f);
        // Cartesian centered-difference oracle on interpolated samples.
        let eps = 1e-3;
        for idx in (0..g.len()).step_by(37) {
            let z = g.point(idx);
            if z.norm() > 0.9 {
                continue;
            }
            let fx = (interpolate(&f, z + eps).unwrap() - interpolate(&f, z - eps).unwrap())
                / (2.0 * eps);
            let fy = (interpolate(&f, z + I * eps).unwrap()
                - interpolate(&f, z - I * eps).unwrap())
                / (2.0 * eps);
            let oracle = (fx - I * fy) * 0.5;
            assert!((oracle - df.values()[idx]).norm() < 5e-3, "{idx}");
            assert!((df.values()[idx] - z.conj()).norm() < 1e-10);
        }
    }

    #[test]
    fn conjugation_rule_holds_nodewise() {
        let g = grid();
        let f = ComplexField::from_fn(g, |z| {
            (z * z * 0.3 + z.conj() * Complex64::new(0.1, 2.0)).exp()
        });
        let lhs = dbar(&f.conj());
        let rhs = d(&f).conj();
        assert!(lhs.sub(&rhs).max_abs() < 1e-12);
    }

    #[test]
    fn interpolation_cases() {
        let g = grid();
        let c = ScalarField::constant(g, 2.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let p = Complex64::from_polar(rng.gen_range(0.0..1.0), rng.gen_range(0.0..7.0));
            assert!((interpolate(&c, p).unwrap() - 2.5).abs() < 1e-14);
        }
        let re = ScalarField::from_fn(g, |z| z.re);
        for idx in (0..g.len()).step_by(11) {
            let p = g.point(idx);
            assert!((interpolate(&re, p).unwrap() - re.values()[idx]).abs() < 1e-14);
        }
        assert!(interpolate(&re, Complex64::new(1.0 + 1e-9, 0.0)).is_err());
        assert!(interpolate(&re, Complex64::new(1.0, 0.0)).is_ok());
    }

    #[test]
    fn interpolation_is_second_order() {
        let bump = |z: Complex64| (-(z - Complex64::new(0.2, -0.1)).norm_sqr() / 0.09).exp();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Complex64> = (0..100)
            .map(|_| Complex64::from_polar(rng.gen_range(0.0..0.95), rng.gen_range(0.0..7.0)))
            .collect();
        let err = |nr: usize| {
            let g = PolarGrid::new(nr, 4 * nr).unwrap();
            let f = ScalarField::from_fn(g, bump);
            pts.iter()
                .map(|&p| (interpolate(&f, p).unwrap() - bump(p)).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(32), err(64));
        assert!(e2 < 1e-2, "{e2}");
        assert!(e1 / e2 > 3.0, "ratio {}", e1 / e2);
    }
}
