//! Forward problem: `theta . grad u + a u - K u = f0 + theta . F` on the unit
//! disk with zero incoming radiation, solved by source iteration on
//! `u = T1^{-1} f + T1^{-1} K u`.
//!
//! `T1^{-1}` is evaluated per direction on a family of parallel lines with
//! spacing `h_ray` in both the offset and the arc-length variable. Along each
//! line the attenuated integral is accumulated with the trapezoid rule and
//! values at grid nodes are read back by a partial step along the two
//! neighbouring lines followed by linear interpolation across them.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{
    interp_polar, AngularField, BoundaryGrid, ComplexField, DirectionGrid, PolarGrid, ScalarField,
    VectorField,
};

/// Attenuation and the Fourier coefficients `k_0, k_{-1}, ..., k_{-M}` of a
/// kernel `k(z, cos t) = k_0 + 2 sum_n k_{-n} cos(n t)`.
#[derive(Clone, Debug)]
pub struct MediumSpec {
    pub a: ScalarField,
    pub kcoef: Vec<ScalarField>,
}

impl MediumSpec {
    /// Builds a medium; a single isotropic coefficient is padded with
    /// `k_{-1} = 0` so that `M >= 1`.
    pub fn new(a: ScalarField, mut kcoef: Vec<ScalarField>) -> Result<Self> {
        let grid = a.grid();
        if kcoef.is_empty() {
            kcoef.push(ScalarField::zeros(grid));
        }
        if kcoef.len() == 1 {
            kcoef.push(ScalarField::zeros(grid));
        }
        if kcoef.iter().any(|k| k.grid() != grid) {
            return Err(Error::GridMismatch(
                "kernel coefficients and attenuation".into(),
            ));
        }
        let finite = a
            .values()
            .iter()
            .chain(kcoef.iter().flat_map(|k| k.values()))
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument(
                "medium coefficients must be finite".into(),
            ));
        }
        Ok(Self { a, kcoef })
    }

    /// Non-scattering medium.
    pub fn absorbing(a: ScalarField) -> Self {
        let grid = a.grid();
        Self {
            a,
            kcoef: vec![ScalarField::zeros(grid), ScalarField::zeros(grid)],
        }
    }

    pub fn grid(&self) -> PolarGrid {
        self.a.grid()
    }

    /// Highest kernel harmonic `M`.
    pub fn degree(&self) -> usize {
        self.kcoef.len() - 1
    }

    /// `k_{-n}`, zero beyond the kernel degree.
    pub fn k(&self, n: usize) -> ScalarField {
        self.kcoef
            .get(n)
            .cloned()
            .unwrap_or_else(|| ScalarField::zeros(self.grid()))
    }

    /// `sigma_a = a - k_0`.
    pub fn sigma_a(&self) -> ScalarField {
        self.a.sub(&self.kcoef[0])
    }

    pub fn is_scattering(&self) -> bool {
        self.kcoef.iter().any(|k| k.max_abs() > 0.0)
    }

    /// Checks `min(a - k0) >= delta` and returns the minimum.
    pub fn check_subcritical(&self, delta: f64) -> Result<f64> {
        let min_sigma = self.sigma_a().min();
        if min_sigma >= delta && min_sigma > 0.0 {
            Ok(min_sigma)
        } else {
            Err(Error::NotSubcritical { min_sigma })
        }
    }

    /// Kernel value `k(z, cos t)` at node `idx`.
    pub fn kernel_value(&self, idx: usize, t: f64) -> f64 {
        let mut v = self.kcoef[0].values()[idx];
        for (n, k) in self.kcoef.iter().enumerate().skip(1) {
            v += 2.0 * k.values()[idx] * (n as f64 * t).cos();
        }
        v
    }
}

/// Linearly anisotropic source `f(z, theta) = f0(z) + theta . F(z)`.
#[derive(Clone, Debug)]
pub struct SourceSpec {
    pub f0: ScalarField,
    pub f: VectorField,
}

impl SourceSpec {
    pub fn new(f0: ScalarField, f: VectorField) -> Result<Self> {
        if f0.grid() != f.grid() {
            return Err(Error::GridMismatch("f0 and F".into()));
        }
        Ok(Self { f0, f })
    }

    pub fn zeros(grid: PolarGrid) -> Self {
        Self {
            f0: ScalarField::zeros(grid),
            f: VectorField::zeros(grid),
        }
    }

    pub fn isotropic(f0: ScalarField) -> Self {
        let grid = f0.grid();
        Self {
            f0,
            f: VectorField::zeros(grid),
        }
    }

    pub fn grid(&self) -> PolarGrid {
        self.f0.grid()
    }

    /// `f1 = (F1 + i F2) / 2`.
    pub fn f1(&self) -> ComplexField {
        self.f.to_f1()
    }

    /// Same scalar part with `F = 0`.
    pub fn without_vector_part(&self) -> Self {
        Self::isotropic(self.f0.clone())
    }

    pub fn angular(&self, dirs: DirectionGrid) -> AngularField {
        let grid = self.grid();
        let mut out = AngularField::zeros(grid, dirs);
        for m in 0..dirs.len() {
            let th = dirs.direction(m);
            let (f0, fx, fy) = (self.f0.values(), self.f.x.values(), self.f.y.values());
            for (node, v) in out.direction_slice_mut(m).iter_mut().enumerate() {
                *v = f0[node] + th.re * fx[node] + th.im * fy[node];
            }
        }
        out
    }
}

/// Exiting radiation `g(zeta_j, theta_m)`; zero on incoming pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryData {
    boundary: BoundaryGrid,
    dirs: DirectionGrid,
    values: Vec<f64>,
}

impl BoundaryData {
    /// Builds data from raw values (direction-major), zeroing incoming pairs.
    pub fn from_values(
        boundary: BoundaryGrid,
        dirs: DirectionGrid,
        mut values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != boundary.len() * dirs.len() {
            return Err(Error::GridMismatch(format!(
                "boundary data needs {} values, got {}",
                boundary.len() * dirs.len(),
                values.len()
            )));
        }
        for m in 0..dirs.len() {
            for j in 0..boundary.len() {
                if !is_outgoing(boundary, dirs, j, m) {
                    values[m * boundary.len() + j] = 0.0;
                }
            }
        }
        Ok(Self {
            boundary,
            dirs,
            values,
        })
    }

    pub fn from_fn(
        boundary: BoundaryGrid,
        dirs: DirectionGrid,
        f: impl Fn(usize, usize) -> f64,
    ) -> Self {
        let mut values = vec![0.0; boundary.len() * dirs.len()];
        for m in 0..dirs.len() {
            for j in 0..boundary.len() {
                if is_outgoing(boundary, dirs, j, m) {
                    values[m * boundary.len() + j] = f(j, m);
                }
            }
        }
        Self {
            boundary,
            dirs,
            values,
        }
    }

    pub fn zeros(boundary: BoundaryGrid, dirs: DirectionGrid) -> Self {
        Self {
            boundary,
            dirs,
            values: vec![0.0; boundary.len() * dirs.len()],
        }
    }

    pub fn boundary(&self) -> BoundaryGrid {
        self.boundary
    }

    pub fn dirs(&self) -> DirectionGrid {
        self.dirs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at boundary node `j` and direction `m`.
    pub fn get(&self, j: usize, m: usize) -> f64 {
        self.values[m * self.boundary.len() + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Discrete L2 norm with arc and angular weights.
    pub fn l2_norm(&self) -> f64 {
        let w = self.boundary.arc_weight() * self.dirs.weight();
        (self.values.iter().map(|v| v * v).sum::<f64>() * w).sqrt()
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            boundary: self.boundary,
            dirs: self.dirs,
            values,
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            boundary: self.boundary,
            dirs: self.dirs,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.boundary != other.boundary || self.dirs != other.dirs {
            return Err(Error::GridMismatch(
                "boundary data on different grids".into(),
            ));
        }
        Ok(())
    }

    /// Adds Gaussian noise with standard deviation `rel_std * max|g|` on
    /// outgoing pairs.
    pub fn with_noise(&self, rel_std: f64, seed: u64) -> Result<Self> {
        if rel_std < 0.0 || !rel_std.is_finite() {
            return Err(Error::InvalidArgument(format!("noise level {rel_std}")));
        }
        if rel_std == 0.0 {
            return Ok(self.clone());
        }
        let dist = Normal::new(0.0, rel_std * self.max_abs())
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        for m in 0..self.dirs.len() {
            for j in 0..self.boundary.len() {
                if is_outgoing(self.boundary, self.dirs, j, m) {
                    out.values[m * self.boundary.len() + j] += dist.sample(&mut rng);
                }
            }
        }
        Ok(out)
    }

    /// Non-positive angular modes `<g_0, g_{-1}, ..., g_{-N}>` per boundary node,
    /// indexed `[n][j]`.
    pub fn modes(&self, n: usize) -> Result<Vec<Vec<Complex64>>> {
        if n > self.dirs.max_modes() {
            return Err(Error::InvalidArgument(format!(
                "{n} modes requested but ntheta = {} resolves at most {}",
                self.dirs.len(),
                self.dirs.max_modes()
            )));
        }
        let nb = self.boundary.len();
        let w = self.dirs.weight();
        Ok((0..=n)
            .map(|k| {
                let tw: Vec<Complex64> = (0..self.dirs.len())
                    .map(|m| Complex64::from_polar(w, k as f64 * self.dirs.angle(m)))
                    .collect();
                (0..nb)
                    .map(|j| {
                        tw.iter()
                            .enumerate()
                            .map(|(m, t)| t * self.values[m * nb + j])
                            .sum()
                    })
                    .collect()
            })
            .collect())
    }
}

/// `nu(zeta_j) . theta_m > 0`.
pub fn is_outgoing(boundary: BoundaryGrid, dirs: DirectionGrid, j: usize, m: usize) -> bool {
    cos_between(boundary, dirs, j, m) > 1e-12
}

fn cos_between(boundary: BoundaryGrid, dirs: DirectionGrid, j: usize, m: usize) -> f64 {
    let nu = boundary.normal(j);
    let th = dirs.direction(m);
    nu.re * th.re + nu.im * th.im
}

/// Distance from `z` to the unit circle along `theta`.
pub fn exit_length(z: Complex64, theta: Complex64) -> f64 {
    let zt = z.re * theta.re + z.im * theta.im;
    let disc = (1.0 - z.norm_sqr() + zt * zt).max(0.0);
    (-zt + disc.sqrt()).max(0.0)
}

/// Divergent beam transform `Da(z, theta) = int_0^tau a(z + t theta) dt` by the
/// composite trapezoid rule with step at most `h_ray`. Returns `(Da, tau)`.
pub fn ray_integral(
    a: &ScalarField,
    z: Complex64,
    theta: Complex64,
    h_ray: f64,
) -> Result<(f64, f64)> {
    if z.norm() > 1.0 + 1e-12 {
        return Err(Error::OutOfDomain(format!("{z}")));
    }
    let tau = exit_length(z, theta);
    if tau == 0.0 {
        return Ok((0.0, 0.0));
    }
    let n = (tau / h_ray).ceil().max(1.0) as usize;
    let step = tau / n as f64;
    let grid = a.grid();
    let sample = |t: f64| {
        let p = z + theta * t;
        interp_polar(a.values(), grid, p.norm().min(1.0), p.im.atan2(p.re))
    };
    let mut acc = 0.5 * (sample(0.0) + sample(tau));
    for q in 1..n {
        acc += sample(q as f64 * step);
    }
    Ok((acc * step, tau))
}

/// Parallel-line discretization of the disk for one reference direction
/// (`theta = 1`); other directions are rotations of it.
#[derive(Clone, Debug)]
pub(crate) struct LineSweep {
    h: f64,
    offsets: Vec<f64>,
    entry: Vec<f64>,
    exit: Vec<f64>,
    starts: Vec<usize>,
    t: Vec<f64>,
    rho: Vec<f64>,
    phi: Vec<f64>,
}

/// Per-direction samples along the lines of a [`LineSweep`].
pub(crate) struct LineValues {
    pub a: Vec<f64>,
    pub s: Vec<f64>,
    pub u: Vec<f64>,
}

impl LineSweep {
    pub fn new(h: f64) -> Self {
        let nlines = (2.0 / h).round().max(2.0) as usize;
        let h = 2.0 / nlines as f64;
        let mut sweep = LineSweep {
            h,
            offsets: Vec::with_capacity(nlines),
            entry: Vec::with_capacity(nlines),
            exit: Vec::with_capacity(nlines),
            starts: Vec::with_capacity(nlines + 1),
            t: Vec::new(),
            rho: Vec::new(),
            phi: Vec::new(),
        };
        for l in 0..nlines {
            let s = -1.0 + (l as f64 + 0.5) * h;
            let half = (1.0 - s * s).max(0.0).sqrt();
            sweep.offsets.push(s);
            sweep.entry.push(-half);
            sweep.exit.push(half);
            sweep.starts.push(sweep.t.len());
            let nsteps = ((2.0 * half) / h).floor() as usize;
            let mut push = |t: f64| {
                sweep.t.push(t);
                let p = Complex64::new(t, s);
                sweep.rho.push(p.norm().min(1.0));
                sweep.phi.push(p.im.atan2(p.re));
            };
            for q in 0..=nsteps {
                push(-half + q as f64 * h);
            }
            if half - (-half + nsteps as f64 * h) > 1e-12 * h || nsteps == 0 {
                push(half);
            }
        }
        sweep.starts.push(sweep.t.len());
        sweep
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn nlines(&self) -> usize {
        self.offsets.len()
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    fn line(&self, l: usize) -> std::ops::Range<usize> {
        self.starts[l]..self.starts[l + 1]
    }

    /// Samples a grid field along the lines of direction angle `ang`.
    pub fn sample(&self, grid: PolarGrid, values: &[f64], ang: f64) -> Vec<f64> {
        self.rho
            .iter()
            .zip(&self.phi)
            .map(|(&r, &p)| interp_polar(values, grid, r, p + ang))
            .collect()
    }

    /// Attenuated accumulation `U' = S - a U` from the entry point of every line.
    pub fn accumulate(&self, a: Vec<f64>, s: Vec<f64>) -> LineValues {
        let mut u = vec![0.0; self.t.len()];
        for l in 0..self.nlines() {
            let range = self.line(l);
            for q in range.start + 1..range.end {
                let dt = self.t[q] - self.t[q - 1];
                let e = (-0.5 * dt * (a[q - 1] + a[q])).exp();
                u[q] = u[q - 1] * e + 0.5 * dt * (s[q - 1] * e + s[q]);
            }
        }
        LineValues { a, s, u }
    }

    /// Plain cumulative integral of `a` from the entry point of every line.
    pub fn cumulative(&self, a: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; self.t.len()];
        for l in 0..self.nlines() {
            let range = self.line(l);
            for q in range.start + 1..range.end {
                c[q] = c[q - 1] + 0.5 * (self.t[q] - self.t[q - 1]) * (a[q - 1] + a[q]);
            }
        }
        c
    }

    /// Value carried by line `l` at distance `d` from its entry point, zero
    /// before the entry.
    fn line_value(&self, vals: &LineValues, l: usize, d: f64) -> f64 {
        let range = self.line(l);
        if d <= 0.0 {
            return 0.0;
        }
        let t = self.entry[l] + d;
        if t >= self.exit[l] {
            // continue past the exit with the last sampled coefficients
            let k = range.end - 1;
            let dt = t - self.exit[l];
            let e = (-dt * vals.a[k]).exp();
            return vals.u[k] * e + 0.5 * dt * vals.s[k] * (e + 1.0);
        }
        let n = range.len();
        let q = ((d / self.h).floor() as usize).min(n - 2);
        let k = range.start + q;
        let dt_full = self.t[k + 1] - self.t[k];
        let dt = t - self.t[k];
        let w = dt / dt_full;
        let a_t = vals.a[k] * (1.0 - w) + vals.a[k + 1] * w;
        let s_t = vals.s[k] * (1.0 - w) + vals.s[k + 1] * w;
        let e = (-0.5 * dt * (vals.a[k] + a_t)).exp();
        vals.u[k] * e + 0.5 * dt * (vals.s[k] * e + s_t)
    }

    /// Linear interpolation of a per-line quantity across lines.
    pub fn across<F: Fn(usize) -> f64>(&self, s: f64, f: F) -> f64 {
        let n = self.nlines();
        let x = (s - self.offsets[0]) / self.h;
        if x <= 0.0 {
            return f(0);
        }
        if x >= (n - 1) as f64 {
            return f(n - 1);
        }
        let l0 = x.floor() as usize;
        let w = x - l0 as f64;
        f(l0) * (1.0 - w) + f(l0 + 1) * w
    }

    /// Accumulated value at the point with line coordinates `(s, t)`.
    pub fn value_at(&self, vals: &LineValues, s: f64, t: f64) -> f64 {
        let d = t + (1.0 - s * s).max(0.0).sqrt();
        self.across(s, |l| self.line_value(vals, l, d))
    }

    /// Integral of `a` over the last `d` units of arc before the exit, for the
    /// line through offset `s`, given its cumulative integral `c`. Lines
    /// shorter than `d` are continued backwards with their entry value.
    pub fn tail_integral(&self, c: &[f64], a: &[f64], s: f64, d: f64) -> f64 {
        self.across(s, |l| {
            let range = self.line(l);
            let total = c[range.end - 1];
            if d <= 0.0 {
                return 0.0;
            }
            let t = self.exit[l] - d;
            if t <= self.entry[l] {
                return total + a[range.start] * (self.entry[l] - t);
            }
            let q = (((t - self.entry[l]) / self.h).floor() as usize).min(range.len() - 2);
            let k = range.start + q;
            let dt = t - self.t[k];
            let w = dt / (self.t[k + 1] - self.t[k]);
            let a_t = a[k] * (1.0 - w) + a[k + 1] * w;
            total - c[k] - 0.5 * dt * (a[k] + a_t)
        })
    }

    /// Total of a cumulative quantity per line (its exit value).
    pub fn line_totals(&self, c: &[f64]) -> Vec<f64> {
        (0..self.nlines())
            .map(|l| c[self.starts[l + 1] - 1])
            .collect()
    }
}

/// Line coordinates `(s, t) = (x . theta_perp, x . theta)` of a point.
#[inline]
pub(crate) fn line_coords(x: Complex64, ang: f64) -> (f64, f64) {
    let rel = x * Complex64::from_polar(1.0, -ang);
    (rel.im, rel.re)
}

/// Result of applying `T1^{-1}` per direction, including exit values.
struct T1Output {
    u: AngularField,
    exits: Vec<Vec<f64>>,
}

fn t1inv_impl(s: &AngularField, a: &ScalarField, sweep: &LineSweep, keep_exits: bool) -> T1Output {
    let grid = s.grid();
    let dirs = s.dirs();
    let n = grid.len();
    let mut out = AngularField::zeros(grid, dirs);
    let per_dir: Vec<(Vec<f64>, Vec<f64>)> = (0..dirs.len())
        .into_par_iter()
        .map(|m| {
            let ang = dirs.angle(m);
            let av = sweep.sample(grid, a.values(), ang);
            let sv = sweep.sample(grid, s.direction_slice(m), ang);
            let vals = sweep.accumulate(av, sv);
            let nodes: Vec<f64> = (0..n)
                .map(|idx| {
                    let (ls, lt) = line_coords(grid.point(idx), ang);
                    sweep.value_at(&vals, ls, lt)
                })
                .collect();
            let exits = if keep_exits {
                (0..sweep.nlines())
                    .map(|l| vals.u[sweep.starts[l + 1] - 1])
                    .collect()
            } else {
                Vec::new()
            };
            (nodes, exits)
        })
        .collect();
    let mut exits = Vec::with_capacity(dirs.len());
    for (m, (nodes, ex)) in per_dir.into_iter().enumerate() {
        out.direction_slice_mut(m).copy_from_slice(&nodes);
        exits.push(ex);
    }
    T1Output { u: out, exits }
}

/// `(T1^{-1} s)(x, theta) = int_{-tau_-}^0 exp(-int_s^0 a(x + t theta) dt) s(x + s theta, theta) ds`.
pub fn apply_t1inv(s: &AngularField, a: &ScalarField, h_ray: f64) -> Result<AngularField> {
    if s.grid() != a.grid() {
        return Err(Error::GridMismatch("source and attenuation".into()));
    }
    let sweep = LineSweep::new(h_ray);
    Ok(t1inv_impl(s, a, &sweep, false).u)
}

/// `(K u)(z, theta) = sum_{|n| <= M} k_{-|n|}(z) u_n(z) e^{i n theta}`.
pub fn apply_k(u: &AngularField, medium: &MediumSpec) -> Result<AngularField> {
    let grid = u.grid();
    if grid != medium.grid() {
        return Err(Error::GridMismatch("angular field and medium".into()));
    }
    let dirs = u.dirs();
    let mdeg = medium.degree();
    if mdeg > dirs.max_modes() {
        return Err(Error::InvalidArgument(format!(
            "kernel degree {mdeg} not resolved by {} directions",
            dirs.len()
        )));
    }
    let nt = dirs.len();
    let n = grid.len();
    let w = dirs.weight();
    // twiddle[n][m] = e^{i n theta_m}
    let twiddle: Vec<Vec<Complex64>> = (0..=mdeg)
        .map(|k| {
            (0..nt)
                .map(|m| Complex64::from_polar(1.0, k as f64 * dirs.angle(m)))
                .collect()
        })
        .collect();
    let per_node: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|node| {
            let mut modes = vec![Complex64::new(0.0, 0.0); mdeg + 1];
            for m in 0..nt {
                let v = u.get(node, m);
                for (k, mode) in modes.iter_mut().enumerate() {
                    *mode += twiddle[k][m] * v;
                }
            }
            // modes[k] = u_{-k}
            let coef: Vec<Complex64> = modes
                .iter()
                .enumerate()
                .map(|(k, md)| md * w * medium.kcoef[k].values()[node])
                .collect();
            (0..nt)
                .map(|m| {
                    let mut v = coef[0].re;
                    for k in 1..=mdeg {
                        v += 2.0 * (coef[k] * twiddle[k][m].conj()).re;
                    }
                    v
                })
                .collect()
        })
        .collect();
    let mut out = AngularField::zeros(grid, dirs);
    for (node, vals) in per_node.into_iter().enumerate() {
        for (m, v) in vals.into_iter().enumerate() {
            out.values_mut()[m * n + node] = v;
        }
    }
    Ok(out)
}

/// Source iteration controls.
#[derive(Clone, Copy, Debug)]
pub struct ForwardParams {
    pub tol: f64,
    pub max_iter: usize,
    /// Ray marching step; defaults to `0.5 / nr`.
    pub h_ray: Option<f64>,
}

impl Default for ForwardParams {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            h_ray: None,
        }
    }
}

impl ForwardParams {
    pub fn h_ray(&self, grid: PolarGrid) -> f64 {
        self.h_ray.unwrap_or(0.5 / grid.nr() as f64)
    }
}

/// Converged forward solution.
#[derive(Clone, Debug)]
pub struct ForwardSolution {
    pub u: AngularField,
    pub iterations: usize,
    /// Relative sup-norm updates, one per iteration after the first.
    pub updates: Vec<f64>,
    exits: Vec<Vec<f64>>,
    h_line: f64,
}

impl ForwardSolution {
    /// Outgoing trace read directly off the exit points of the sweep lines.
    pub fn exit_trace(&self) -> BoundaryData {
        let grid = self.u.grid();
        let dirs = self.u.dirs();
        let boundary = grid.boundary();
        let sweep_offsets: Vec<f64> = {
            let n = self.exits.first().map_or(0, |e| e.len());
            (0..n)
                .map(|l| -1.0 + (l as f64 + 0.5) * self.h_line)
                .collect()
        };
        BoundaryData::from_fn(boundary, dirs, |j, m| {
            let (s, _) = line_coords(boundary.node(j), dirs.angle(m));
            let ex = &self.exits[m];
            let x = (s - sweep_offsets[0]) / self.h_line;
            let n = ex.len();
            if x <= 0.0 {
                ex[0]
            } else if x >= (n - 1) as f64 {
                ex[n - 1]
            } else {
                let l0 = x.floor() as usize;
                let w = x - l0 as f64;
                ex[l0] * (1.0 - w) + ex[l0 + 1] * w
            }
        })
    }
}

/// Solves `u = T1^{-1} f + T1^{-1} K u` by fixed-point iteration.
pub fn solve_forward(
    medium: &MediumSpec,
    source: &SourceSpec,
    dirs: DirectionGrid,
    params: ForwardParams,
) -> Result<ForwardSolution> {
    let grid = medium.grid();
    if source.grid() != grid {
        return Err(Error::GridMismatch("medium and source".into()));
    }
    if medium.degree() > dirs.max_modes() {
        return Err(Error::InvalidArgument(
            "kernel degree exceeds angular resolution".into(),
        ));
    }
    let sweep = LineSweep::new(params.h_ray(grid));
    let f = source.angular(dirs);
    let first = t1inv_impl(&f, &medium.a, &sweep, true);
    let norm1 = first.u.max_abs();
    let h_line = sweep.spacing();
    if norm1 == 0.0 || !medium.is_scattering() {
        return Ok(ForwardSolution {
            u: first.u,
            iterations: 1,
            updates: Vec::new(),
            exits: first.exits,
            h_line,
        });
    }
    let mut u = first.u;
    let mut exits;
    let mut updates = Vec::new();
    for it in 2..=params.max_iter {
        let ku = apply_k(&u, medium)?;
        let mut s = f.clone();
        s.values_mut()
            .iter_mut()
            .zip(ku.values())
            .for_each(|(a, b)| *a += b);
        let next = t1inv_impl(&s, &medium.a, &sweep, true);
        let update = next.u.max_abs_diff(&u) / norm1;
        u = next.u;
        exits = next.exits;
        updates.push(update);
        if !update.is_finite() {
            break;
        }
        if update < params.tol {
            return Ok(ForwardSolution {
                u,
                iterations: it,
                updates,
                exits,
                h_line,
            });
        }
    }
    Err(Error::Diverged {
        iterations: params.max_iter,
        last_update: updates.last().copied().unwrap_or(f64::NAN),
    })
}

/// Outgoing boundary trace of `u`: linear radial extrapolation from the two
/// outermost rings on outgoing pairs, exact zeros on incoming pairs.
pub fn extract_boundary_data(u: &AngularField) -> BoundaryData {
    let grid = u.grid();
    let dirs = u.dirs();
    let boundary = grid.boundary();
    let nr = grid.nr();
    BoundaryData::from_fn(boundary, dirs, |j, m| {
        let outer = u.get(grid.index(nr - 1, j), m);
        let inner = u.get(grid.index(nr - 2, j), m);
        1.5 * outer - 0.5 * inner
    })
}

/// Both sides of the flux identity
/// `sum_j w_j sum_m (nu . theta_m) u(zeta_j, theta_m) / ntheta = int (f0 - sigma_a u0)`.
#[derive(Clone, Copy, Debug)]
pub struct MassBalance {
    pub boundary_flux: f64,
    pub volume_source: f64,
}

impl MassBalance {
    pub fn relative_error(&self) -> f64 {
        let scale = self.boundary_flux.abs().max(self.volume_source.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.boundary_flux - self.volume_source).abs() / scale
        }
    }
}

pub fn mass_balance(
    u: &AngularField,
    g: &BoundaryData,
    medium: &MediumSpec,
    source: &SourceSpec,
) -> MassBalance {
    let boundary = g.boundary();
    let dirs = g.dirs();
    let mut flux = 0.0;
    for m in 0..dirs.len() {
        for j in 0..boundary.len() {
            flux += cos_between(boundary, dirs, j, m) * g.get(j, m);
        }
    }
    flux *= boundary.arc_weight() * dirs.weight();
    let grid = u.grid();
    let sigma = medium.sigma_a();
    let mut vol = 0.0;
    let w = dirs.weight();
    for node in 0..grid.len() {
        let u0: f64 = (0..dirs.len()).map(|m| u.get(node, m)).sum::<f64>() * w;
        vol += grid.area_weight(node) * (source.f0.values()[node] - sigma.values()[node] * u0);
    }
    MassBalance {
        boundary_flux: flux,
        volume_source: vol,
    }
}
