//! Dirichlet Poisson solver on the disk, the dbar cascade of the
//! reconstruction and the Hodge decomposition.
//!
//! The Laplacian is discretized per angular Fourier mode on the cell-centred
//! radial grid in flux form, so the centre needs no boundary condition
//! (the flux radius `r_{-1/2}` vanishes). The Dirichlet value at `r = 1` enters
//! through the ghost value `u_nr = 2 bc - u_{nr-1}`.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::aanalytic::BoundaryModeSequence;
use crate::error::{Error, Result};
use crate::grid::{d, dbar, wavenumber, ComplexField, PolarGrid, ScalarField, VectorField};
use crate::transport::MediumSpec;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `Delta u = rhs` in the disk with `u = bc` on the boundary nodes.
#[derive(Clone, Debug)]
pub struct PoissonProblem {
    pub rhs: ComplexField,
    pub bc: Vec<Complex64>,
}

impl PoissonProblem {
    pub fn solve(&self) -> Result<ComplexField> {
        poisson_dirichlet(&self.rhs, &self.bc)
    }
}

/// Per-ring FFT in the angle, with spectra laid out ring-major.
fn ring_spectra(field: &ComplexField) -> Vec<Complex64> {
    let grid = field.grid();
    let nb = grid.nbeta();
    let fft = FftPlanner::new().plan_fft_forward(nb);
    let mut out = field.values().to_vec();
    out.par_chunks_mut(nb).for_each(|ring| fft.process(ring));
    out
}

fn from_ring_spectra(grid: PolarGrid, mut spec: Vec<Complex64>) -> ComplexField {
    let nb = grid.nbeta();
    let ifft = FftPlanner::new().plan_fft_inverse(nb);
    let s = 1.0 / nb as f64;
    spec.par_chunks_mut(nb).for_each(|ring| {
        ifft.process(ring);
        ring.iter_mut().for_each(|v| *v *= s);
    });
    ComplexField::from_values(grid, spec).expect("sized")
}

fn boundary_spectrum(bc: &[Complex64]) -> Vec<Complex64> {
    let mut b = bc.to_vec();
    FftPlanner::new().plan_fft_forward(bc.len()).process(&mut b);
    b
}

/// Tridiagonal coefficients of the mode-`m` radial operator at ring `i`:
/// `lower * u_{i-1} + diag * u_i + upper * u_{i+1}`.
fn radial_stencil(grid: PolarGrid, m: f64, i: usize) -> (f64, f64, f64) {
    let h = grid.dr();
    let r = grid.radius(i);
    let rm = i as f64 * h;
    let rp = (i + 1) as f64 * h;
    let scale = 1.0 / (r * h * h);
    let lower = rm * scale;
    let upper = rp * scale;
    (lower, -(lower + upper) - m * m / (r * r), upper)
}

/// Solves `Delta u = rhs`, `u|_boundary = bc`, mode by mode.
pub fn poisson_dirichlet(rhs: &ComplexField, bc: &[Complex64]) -> Result<ComplexField> {
    let grid = rhs.grid();
    let (nr, nb) = (grid.nr(), grid.nbeta());
    if bc.len() != nb {
        return Err(Error::GridMismatch(format!(
            "boundary data has {} values, grid has {nb} angles",
            bc.len()
        )));
    }
    if rhs
        .values()
        .iter()
        .chain(bc)
        .any(|v| !v.re.is_finite() || !v.im.is_finite())
    {
        return Err(Error::InvalidArgument("non-finite Poisson data".into()));
    }
    let spec = ring_spectra(rhs);
    let bspec = boundary_spectrum(bc);
    let cols: Vec<Vec<Complex64>> = (0..nb)
        .into_par_iter()
        .map(|k| {
            let m = wavenumber(k, nb) as f64;
            let mut lower = vec![0.0; nr];
            let mut diag = vec![0.0; nr];
            let mut upper = vec![0.0; nr];
            let mut f: Vec<Complex64> = (0..nr).map(|i| spec[i * nb + k]).collect();
            for i in 0..nr {
                let (l, dg, u) = radial_stencil(grid, m, i);
                lower[i] = l;
                diag[i] = dg;
                upper[i] = u;
            }
            // ghost u_nr = 2 bc - u_{nr-1}
            let up = upper[nr - 1];
            diag[nr - 1] -= up;
            f[nr - 1] -= bspec[k] * (2.0 * up);
            upper[nr - 1] = 0.0;
            thomas(&lower, &diag, &upper, &mut f);
            f
        })
        .collect();
    let mut out = vec![ZERO; grid.len()];
    for (k, col) in cols.into_iter().enumerate() {
        for (i, v) in col.into_iter().enumerate() {
            out[i * nb + k] = v;
        }
    }
    Ok(from_ring_spectra(grid, out))
}

/// In-place tridiagonal solve; `rhs` becomes the solution.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [Complex64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    c[0] = upper[0] / beta;
    rhs[0] /= beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / beta;
        let prev = rhs[i - 1];
        rhs[i] = (rhs[i] - prev * lower[i]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= next * c[i];
    }
}

/// The discrete Laplacian used by [`poisson_dirichlet`]. With `bc` the
/// Dirichlet ghost is used at the rim; without it the ghost is extrapolated
/// quadratically from the three outer rings.
pub fn laplacian(u: &ComplexField, bc: Option<&[Complex64]>) -> Result<ComplexField> {
    let grid = u.grid();
    let (nr, nb) = (grid.nr(), grid.nbeta());
    if let Some(b) = bc {
        if b.len() != nb {
            return Err(Error::GridMismatch("Laplacian boundary data".into()));
        }
    }
    let spec = ring_spectra(u);
    let bspec = bc.map(boundary_spectrum);
    let mut out = vec![ZERO; grid.len()];
    for k in 0..nb {
        let m = wavenumber(k, nb) as f64;
        let col = |i: usize| spec[i * nb + k];
        let ghost = match &bspec {
            Some(b) => b[k] * 2.0 - col(nr - 1),
            None => col(nr - 1) * 3.0 - col(nr - 2) * 3.0 + col(nr - 3),
        };
        for i in 0..nr {
            let (l, dg, up) = radial_stencil(grid, m, i);
            let left = if i == 0 { ZERO } else { col(i - 1) * l };
            let right = if i == nr - 1 { ghost } else { col(i + 1) } * up;
            out[i * nb + k] = left + col(i) * dg + right;
        }
    }
    Ok(from_ring_spectra(grid, out))
}

/// Output of [`dbar_cascade`]: modes `u_{-p}` for `p = M-1 down to 1`.
#[derive(Clone, Debug)]
pub struct CascadeOutput {
    /// `modes[i]` is `u_{-(M-1-i)}`.
    pub modes: Vec<ComplexField>,
    /// L2 norm of `dbar u_{-p} + d u_{-p-2} + (a - k_{-p-1}) u_{-p-1}` per output.
    pub residuals: Vec<f64>,
}

impl CascadeOutput {
    /// The recovered `u_{-p}`.
    pub fn mode(&self, p: usize) -> Option<&ComplexField> {
        let m = self.modes.len() + 1;
        if p == 0 || p >= m {
            return None;
        }
        self.modes.get(m - 1 - p)
    }
}

/// `(a - k_{-n}) u` as a complex field.
pub(crate) fn damped(medium: &MediumSpec, n: usize, u: &ComplexField) -> ComplexField {
    u.mul_real(&medium.a.sub(&medium.k(n)))
}

/// `dbar u_{-p} + d u_{-p-2} + (a - k_{-p-1}) u_{-p-1}`.
pub fn mode_equation_residual(
    medium: &MediumSpec,
    p: usize,
    u_p: &ComplexField,
    u_p1: &ComplexField,
    u_p2: &ComplexField,
) -> ComplexField {
    dbar(u_p).add(&d(u_p2)).add(&damped(medium, p + 1, u_p1))
}

/// Solves for `u_{-M+1}, ..., u_{-1}` from `u_{-M-1}`, `u_{-M}`:
/// `Delta u_{-p} = -4 d^2 u_{-p-2} - 4 d[(a - k_{-p-1}) u_{-p-1}]`,
/// `u_{-p} = g_{-p}` on the boundary, for `p = M-1, ..., 1`.
pub fn dbar_cascade(
    deep: (&ComplexField, &ComplexField),
    medium: &MediumSpec,
    g: &BoundaryModeSequence,
) -> Result<CascadeOutput> {
    let m = medium.degree();
    let grid = medium.grid();
    if deep.0.grid() != grid || deep.1.grid() != grid {
        return Err(Error::GridMismatch("cascade input and medium".into()));
    }
    if g.depth() + 1 < m {
        return Err(Error::InvalidArgument(format!(
            "boundary data needs modes down to -{}",
            m - 1
        )));
    }
    // window[p] holds u_{-p} for p in the active range
    let mut deeper = deep.0.clone(); // u_{-p-2}
    let mut next = deep.1.clone(); // u_{-p-1}
    let mut modes = Vec::new();
    let mut residuals = Vec::new();
    for p in (1..m).rev() {
        let rhs = d(&d(&deeper))
            .add(&d(&damped(medium, p + 1, &next)))
            .scale(-4.0);
        let u = poisson_dirichlet(&rhs, g.get(p))?;
        let res = mode_equation_residual(medium, p, &u, &next, &deeper);
        residuals.push(res.l2_norm());
        modes.push(u.clone());
        deeper = next;
        next = u;
    }
    Ok(CascadeOutput { modes, residuals })
}

/// `div F = 4 Re d f1` with `f1 = (F1 + i F2) / 2`.
pub fn divergence(f: &VectorField) -> ScalarField {
    d(&f.to_f1()).re().scale(4.0)
}

/// Gradient of a real field, `(2 Re dbar psi, 2 Im dbar psi)`.
pub fn gradient(psi: &ScalarField) -> VectorField {
    let g = dbar(&psi.to_complex());
    VectorField::new(g.re().scale(2.0), g.im().scale(2.0)).expect("same grid")
}

/// `F = grad phi + Fs` with `phi = 0` on the boundary and `div Fs = 0`.
pub fn hodge_decompose(f: &VectorField) -> Result<(ScalarField, VectorField)> {
    let grid = f.grid();
    let div = divergence(f).to_complex();
    let phi = poisson_dirichlet(&div, &vec![ZERO; grid.nbeta()])?.re();
    let fs = f.sub(&gradient(&phi));
    Ok((phi, fs))
}
