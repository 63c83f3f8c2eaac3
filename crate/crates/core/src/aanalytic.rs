//! A-analytic machinery: the h-function of an attenuation, the conjugation
//! operators `e^{+-G}`, the Bukhgeim-Cauchy integral and the Bukhgeim-Hilbert
//! transform on the unit circle.
//!
//! Mode sequences store `<m_0, m_{-1}, ..., m_{-N}>` with entry `p` holding
//! `m_{-p}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{
    angular_modes, AngularField, BoundaryGrid, ComplexField, DirectionGrid, PolarGrid, ScalarField,
};
use crate::transport::{line_coords, BoundaryData, LineSweep};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Interior stack `<m_0, m_{-1}, ..., m_{-N}>`.
#[derive(Clone, Debug)]
pub struct ModeSequence {
    modes: Vec<ComplexField>,
}

impl ModeSequence {
    pub fn new(modes: Vec<ComplexField>) -> Result<Self> {
        let Some(first) = modes.first() else {
            return Err(Error::InvalidArgument("empty mode sequence".into()));
        };
        let grid = first.grid();
        if modes.iter().any(|m| m.grid() != grid) {
            return Err(Error::GridMismatch("mode sequence entries".into()));
        }
        Ok(Self { modes })
    }

    pub fn zeros(grid: PolarGrid, depth: usize) -> Self {
        Self {
            modes: vec![ComplexField::zeros(grid); depth + 1],
        }
    }

    /// Non-positive angular modes of a sampled field.
    pub fn from_angular(field: &AngularField, depth: usize) -> Result<Self> {
        Self::new(angular_modes(field, depth)?)
    }

    pub fn grid(&self) -> PolarGrid {
        self.modes[0].grid()
    }

    /// Truncation index `N`.
    pub fn depth(&self) -> usize {
        self.modes.len() - 1
    }

    /// Entry `p`, i.e. the mode `m_{-p}`.
    pub fn get(&self, p: usize) -> &ComplexField {
        &self.modes[p]
    }

    pub fn modes(&self) -> &[ComplexField] {
        &self.modes
    }

    pub fn into_modes(self) -> Vec<ComplexField> {
        self.modes
    }

    /// `L^k`: drops the leading `k` entries.
    pub fn shift(&self, k: usize) -> Result<Self> {
        if k > self.depth() {
            return Err(Error::InvalidArgument(format!(
                "shift by {k} exceeds depth {}",
                self.depth()
            )));
        }
        Ok(Self {
            modes: self.modes[k..].to_vec(),
        })
    }

    pub fn shift_left(&self) -> Result<Self> {
        self.shift(1)
    }

    pub fn max_abs(&self) -> f64 {
        self.modes.iter().fold(0.0, |acc, m| acc.max(m.max_abs()))
    }

    /// Outer-ring traces of all entries, extrapolated to the boundary.
    pub fn boundary_trace(&self) -> BoundaryModeSequence {
        BoundaryModeSequence {
            boundary: self.grid().boundary(),
            modes: self.modes.iter().map(|m| m.boundary_trace()).collect(),
        }
    }
}

/// Per boundary node, the values of modes `0, -1, ..., -N`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryModeSequence {
    boundary: BoundaryGrid,
    modes: Vec<Vec<Complex64>>,
}

impl BoundaryModeSequence {
    pub fn new(boundary: BoundaryGrid, modes: Vec<Vec<Complex64>>) -> Result<Self> {
        if modes.is_empty() || modes.iter().any(|m| m.len() != boundary.len()) {
            return Err(Error::GridMismatch("boundary mode sequence".into()));
        }
        Ok(Self { boundary, modes })
    }

    pub fn zeros(boundary: BoundaryGrid, depth: usize) -> Self {
        Self {
            boundary,
            modes: vec![vec![ZERO; boundary.len()]; depth + 1],
        }
    }

    /// Sequence whose entry `p` is `f(p, zeta)`.
    pub fn from_fn(
        boundary: BoundaryGrid,
        depth: usize,
        mut f: impl FnMut(usize, Complex64) -> Complex64,
    ) -> Self {
        let mut modes = Vec::with_capacity(depth + 1);
        for p in 0..=depth {
            modes.push(
                (0..boundary.len())
                    .map(|j| f(p, boundary.node(j)))
                    .collect(),
            );
        }
        Self { boundary, modes }
    }

    /// Angular modes of boundary data.
    pub fn from_data(g: &BoundaryData, depth: usize) -> Result<Self> {
        Ok(Self {
            boundary: g.boundary(),
            modes: g.modes(depth)?,
        })
    }

    pub fn boundary(&self) -> BoundaryGrid {
        self.boundary
    }

    pub fn depth(&self) -> usize {
        self.modes.len() - 1
    }

    pub fn get(&self, p: usize) -> &[Complex64] {
        &self.modes[p]
    }

    pub fn modes(&self) -> &[Vec<Complex64>] {
        &self.modes
    }

    pub fn shift(&self, k: usize) -> Result<Self> {
        if k > self.depth() {
            return Err(Error::InvalidArgument(format!(
                "shift by {k} exceeds depth {}",
                self.depth()
            )));
        }
        Ok(Self {
            boundary: self.boundary,
            modes: self.modes[k..].to_vec(),
        })
    }

    pub fn shift_left(&self) -> Result<Self> {
        self.shift(1)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            boundary: self.boundary,
            modes: self
                .modes
                .iter()
                .map(|m| m.iter().map(|v| v * s).collect())
                .collect(),
        }
    }

    fn zip(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.boundary != other.boundary || self.depth() != other.depth() {
            return Err(Error::GridMismatch("boundary mode sequences".into()));
        }
        let modes = self
            .modes
            .iter()
            .zip(&other.modes)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect())
            .collect();
        Ok(Self {
            boundary: self.boundary,
            modes,
        })
    }

    /// `sup_zeta sum_n (1 + n^2) |g_{-n}(zeta)|`.
    pub fn weighted_norm(&self) -> f64 {
        (0..self.boundary.len())
            .map(|j| {
                self.modes
                    .iter()
                    .enumerate()
                    .map(|(n, m)| (1.0 + (n * n) as f64) * m[j].norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.modes
            .iter()
            .flatten()
            .fold(0.0, |acc, v| acc.max(v.norm()))
    }
}

/// Uniform cell-centred sample grid `s_l = start + l * step` on a line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl LineGrid {
    /// `n` cell centres covering `[-1, 1]`.
    pub fn unit(n: usize) -> Self {
        let step = 2.0 / n as f64;
        Self {
            start: -1.0 + 0.5 * step,
            step,
            len: n,
        }
    }

    pub fn node(&self, l: usize) -> f64 {
        self.start + l as f64 * self.step
    }

    /// Ends of the support interval covered by the cells.
    pub fn support(&self) -> (f64, f64) {
        (
            self.start - 0.5 * self.step,
            self.node(self.len - 1) + 0.5 * self.step,
        )
    }
}

/// `Ra(s, theta_perp) = int a(s theta_perp + t theta) dt` by the trapezoid rule
/// along each chord, with step at most `h_t`.
pub fn radon_transform(a: &ScalarField, offsets: &[f64], theta: Complex64, h_t: f64) -> Vec<f64> {
    let grid = a.grid();
    let perp = I * theta;
    offsets
        .iter()
        .map(|&s| {
            if s.abs() >= 1.0 {
                return 0.0;
            }
            let half = (1.0 - s * s).sqrt();
            let n = ((2.0 * half) / h_t).ceil().max(1.0) as usize;
            let dt = 2.0 * half / n as f64;
            let sample = |q: usize| {
                let p = perp * s + theta * (-half + q as f64 * dt);
                crate::grid::interp_polar(a.values(), grid, p.norm().min(1.0), p.im.atan2(p.re))
            };
            let mut acc = 0.5 * (sample(0) + sample(n));
            for q in 1..n {
                acc += sample(q);
            }
            acc * dt
        })
        .collect()
}

/// Finite Hilbert transform `(1/pi) PV int h(t) / (s - t) dt` of cell samples,
/// evaluated at the nodes.
pub fn hilbert_line(samples: &[f64], line: LineGrid) -> Vec<f64> {
    let n = samples.len().min(line.len);
    let deriv: Vec<f64> = (0..n)
        .map(|l| central_diff(samples, l) / line.step)
        .collect();
    let (lo, hi) = line.support();
    (0..n)
        .map(|i| {
            let si = line.node(i);
            let hi_v = samples[i];
            let mut acc = -deriv[i] * line.step;
            for (l, &hl) in samples.iter().enumerate().take(n) {
                if l != i {
                    acc += (hl - hi_v) / (si - line.node(l)) * line.step;
                }
            }
            acc += hi_v * ((si - lo) / (si - hi)).abs().ln();
            acc / PI
        })
        .collect()
}

/// Finite Hilbert transform at an arbitrary point of the support interval.
pub fn hilbert_at(samples: &[f64], line: LineGrid, s: f64) -> Result<f64> {
    let (lo, hi) = line.support();
    if !(s > lo && s < hi) {
        return Err(Error::InvalidArgument(format!(
            "target {s} outside ({lo}, {hi})"
        )));
    }
    let x = ((s - line.start) / line.step).clamp(0.0, (line.len - 1) as f64);
    let l0 = (x.floor() as usize).min(line.len.saturating_sub(2));
    let w = x - l0 as f64;
    let lerp = |v: &dyn Fn(usize) -> f64| v(l0) * (1.0 - w) + v((l0 + 1).min(line.len - 1)) * w;
    let hs = lerp(&|l| samples[l]);
    let ds = lerp(&|l| central_diff(samples, l) / line.step);
    let mut acc = 0.0;
    for (l, &hl) in samples.iter().enumerate() {
        let diff = s - line.node(l);
        acc += if diff.abs() < 1e-9 * line.step {
            -ds
        } else {
            (hl - hs) / diff
        } * line.step;
    }
    acc += hs * ((s - lo) / (s - hi)).abs().ln();
    Ok(acc / PI)
}

/// Hilbert transform of `sqrt(1 - t^2) phi(t)` on `[-1, 1]` from cell samples
/// of `phi`. The singular part is subtracted against the weight itself, whose
/// transform is `s`, which keeps the square-root edges out of the quadrature.
fn hilbert_chord(phi: &[f64], line: LineGrid) -> Vec<f64> {
    let n = phi.len();
    let weight: Vec<f64> = (0..n)
        .map(|l| (1.0 - line.node(l).powi(2)).sqrt())
        .collect();
    let deriv: Vec<f64> = (0..n)
        .map(|l| {
            let (lo, hi) = (l.saturating_sub(1), (l + 1).min(n - 1));
            (phi[hi] - phi[lo]) / ((hi - lo) as f64 * line.step)
        })
        .collect();
    (0..n)
        .map(|i| {
            let si = line.node(i);
            let mut acc = -weight[i] * deriv[i] * line.step;
            for l in 0..n {
                if l != i {
                    acc += weight[l] * (phi[l] - phi[i]) / (si - line.node(l)) * line.step;
                }
            }
            acc / PI + phi[i] * si
        })
        .collect()
}

/// Centred difference with zero extension past the ends.
fn central_diff(v: &[f64], l: usize) -> f64 {
    let left = if l == 0 { 0.0 } else { v[l - 1] };
    let right = v.get(l + 1).copied().unwrap_or(0.0);
    0.5 * (right - left)
}

/// Options for [`compute_h`].
#[derive(Clone, Copy, Debug, Default)]
pub struct HParams {
    /// Line spacing and arc step of the Radon and beam integrals; defaults to
    /// `0.125 / nr`.
    pub h_line: Option<f64>,
}

/// `h(z, theta) = Da(z, theta) - (1/2)(I - iH) Ra(z . theta_perp, theta_perp)`
/// at interior nodes and boundary nodes.
#[derive(Clone, Debug)]
pub struct HFunction {
    pub interior: AngularField<Complex64>,
    /// Boundary values, direction-major (`m * nbeta + j`).
    pub boundary: Vec<Complex64>,
}

impl HFunction {
    pub fn dirs(&self) -> DirectionGrid {
        self.interior.dirs()
    }

    pub fn grid(&self) -> PolarGrid {
        self.interior.grid()
    }

    pub fn boundary_value(&self, j: usize, m: usize) -> Complex64 {
        self.boundary[m * self.grid().nbeta() + j]
    }
}

pub fn compute_h(a: &ScalarField, dirs: DirectionGrid, params: HParams) -> HFunction {
    let grid = a.grid();
    let sweep = LineSweep::new(params.h_line.unwrap_or(0.125 / grid.nr() as f64));
    let line = LineGrid {
        start: sweep.offsets()[0],
        step: sweep.spacing(),
        len: sweep.nlines(),
    };
    let boundary = grid.boundary();
    let nb = boundary.len();
    let per_dir: Vec<(Vec<Complex64>, Vec<Complex64>)> = (0..dirs.len())
        .into_par_iter()
        .map(|m| {
            let ang = dirs.angle(m);
            let av = sweep.sample(grid, a.values(), ang);
            let c = sweep.cumulative(&av);
            let radon = sweep.line_totals(&c);
            let weight: Vec<f64> = (0..line.len)
                .map(|l| (1.0 - line.node(l).powi(2)).sqrt())
                .collect();
            let mean: Vec<f64> = radon.iter().zip(&weight).map(|(r, w)| r / w).collect();
            let hr = hilbert_chord(&mean, line);
            let radon_at = |s: f64| (1.0 - s * s).max(0.0).sqrt() * sweep.across(s, |l| mean[l]);
            let tail = |s: f64| {
                let h = sweep.across(s, |l| hr[l]);
                Complex64::new(-0.5 * radon_at(s), 0.5 * h)
            };
            let interior = (0..grid.len())
                .map(|idx| {
                    let (s, t) = line_coords(grid.point(idx), ang);
                    let d_exit = (1.0 - s * s).max(0.0).sqrt() - t;
                    sweep.tail_integral(&c, &av, s, d_exit) + tail(s)
                })
                .collect();
            let th = dirs.direction(m);
            let bd = (0..nb)
                .map(|j| {
                    let nu = boundary.normal(j);
                    let (s, _) = line_coords(boundary.node(j), ang);
                    let incoming = nu.re * th.re + nu.im * th.im < 0.0;
                    let da = if incoming { radon_at(s) } else { 0.0 };
                    da + tail(s)
                })
                .collect();
            (interior, bd)
        })
        .collect();
    let mut interior = AngularField::zeros(grid, dirs);
    let mut bvals = Vec::with_capacity(nb * dirs.len());
    for (m, (vals, bd)) in per_dir.into_iter().enumerate() {
        interior.direction_slice_mut(m).copy_from_slice(&vals);
        bvals.extend(bd);
    }
    HFunction {
        interior,
        boundary: bvals,
    }
}

/// How the coefficients of `e^{+h}` are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BetaMode {
    /// Truncated convolution inverse of `alpha`, so that `alpha * beta` is the
    /// unit sequence up to rounding.
    #[default]
    ConvolutionInverse,
    /// Non-negative angular modes of the sampled `e^{+h}`.
    Dft,
}

#[derive(Clone, Copy, Debug)]
pub struct CoeffParams {
    /// Negative-mode l1 mass above which the h-function is rejected.
    pub fail_threshold: f64,
    pub beta: BetaMode,
}

impl Default for CoeffParams {
    fn default() -> Self {
        Self {
            fail_threshold: 1e-2,
            beta: BetaMode::ConvolutionInverse,
        }
    }
}

/// Coefficients `alpha_k`, `beta_k` of `e^{-h}`, `e^{+h}` at interior and
/// boundary nodes, `k = 0..=K`.
#[derive(Clone, Debug)]
pub struct ConjugationCoeffs {
    grid: PolarGrid,
    /// `alpha[k]` over interior nodes.
    pub alpha: Vec<ComplexField>,
    pub beta: Vec<ComplexField>,
    /// `alpha_boundary[k][j]`.
    pub alpha_boundary: Vec<Vec<Complex64>>,
    pub beta_boundary: Vec<Vec<Complex64>>,
    pub diagnostics: CoeffDiagnostics,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CoeffDiagnostics {
    /// Max over interior nodes of the negative-mode l1 mass of `e^{-h}` and `e^{+h}`.
    pub neg_mass_interior: f64,
    /// Same over boundary nodes.
    pub neg_mass_boundary: f64,
    /// Max over all nodes and k of `|beta_k - (e^{+h})_k|` between the stored
    /// `beta` and the direct modes of `e^{+h}`.
    pub beta_dft_mismatch: f64,
    /// Max over all nodes of `|(alpha * beta)_k - delta_k|`.
    pub inverse_defect: f64,
}

impl CoeffDiagnostics {
    pub fn neg_mass(&self) -> f64 {
        self.neg_mass_interior.max(self.neg_mass_boundary)
    }
}

struct NodeCoeffs {
    alpha: Vec<Complex64>,
    beta: Vec<Complex64>,
    neg_mass: f64,
    mismatch: f64,
    defect: f64,
}

fn node_coeffs(
    samples: &[Complex64],
    fft: &dyn rustfft::Fft<f64>,
    depth: usize,
    mode: BetaMode,
) -> NodeCoeffs {
    let nt = samples.len();
    let scale = 1.0 / nt as f64;
    let mut em: Vec<Complex64> = samples.iter().map(|h| (-h).exp()).collect();
    let mut ep: Vec<Complex64> = samples.iter().map(|h| h.exp()).collect();
    fft.process(&mut em);
    fft.process(&mut ep);
    // FFT bin k carries the coefficient of e^{ik theta}, bin nt-k that of e^{-ik theta}.
    let pos = |v: &[Complex64], k: usize| v[k] * scale;
    let neg = |v: &[Complex64], k: usize| v[nt - k] * scale;
    let mut neg_mass: f64 = 0.0;
    for v in [&em, &ep] {
        let mass: f64 = (1..nt / 2).map(|k| neg(v, k).norm()).sum();
        neg_mass = neg_mass.max(mass);
    }
    let alpha: Vec<Complex64> = (0..=depth).map(|k| pos(&em, k)).collect();
    let beta_dft: Vec<Complex64> = (0..=depth).map(|k| pos(&ep, k)).collect();
    let beta = match mode {
        BetaMode::Dft => beta_dft.clone(),
        BetaMode::ConvolutionInverse => {
            let mut b = vec![ZERO; depth + 1];
            b[0] = 1.0 / alpha[0];
            for k in 1..=depth {
                let acc: Complex64 = (1..=k).map(|j| alpha[j] * b[k - j]).sum();
                b[k] = -acc * b[0];
            }
            b
        }
    };
    let mismatch = beta
        .iter()
        .zip(&beta_dft)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let defect = (0..=depth)
        .map(|k| {
            let c: Complex64 = (0..=k).map(|j| alpha[j] * beta[k - j]).sum();
            let target = if k == 0 { 1.0 } else { 0.0 };
            (c - target).norm()
        })
        .fold(0.0, f64::max);
    NodeCoeffs {
        alpha,
        beta,
        neg_mass,
        mismatch,
        defect,
    }
}

/// Non-negative angular modes of `e^{-h}` and `e^{+h}` at every node, up to
/// `depth` (at most `ntheta/2 - 1`).
pub fn conjugation_coeffs(
    h: &HFunction,
    depth: usize,
    params: CoeffParams,
) -> Result<ConjugationCoeffs> {
    let dirs = h.dirs();
    let grid = h.grid();
    if depth > dirs.max_modes() {
        return Err(Error::InvalidArgument(format!(
            "coefficient depth {depth} exceeds ntheta/2 - 1 = {}",
            dirs.max_modes()
        )));
    }
    let nt = dirs.len();
    let fft = FftPlanner::new().plan_fft_forward(nt);
    let interior: Vec<NodeCoeffs> = (0..grid.len())
        .into_par_iter()
        .map(|node| {
            node_coeffs(
                &h.interior.node_samples(node),
                fft.as_ref(),
                depth,
                params.beta,
            )
        })
        .collect();
    let nb = grid.nbeta();
    let bd: Vec<NodeCoeffs> = (0..nb)
        .into_par_iter()
        .map(|j| {
            let samples: Vec<Complex64> = (0..nt).map(|m| h.boundary_value(j, m)).collect();
            node_coeffs(&samples, fft.as_ref(), depth, params.beta)
        })
        .collect();
    let mut diag = CoeffDiagnostics::default();
    for c in &interior {
        diag.neg_mass_interior = diag.neg_mass_interior.max(c.neg_mass);
    }
    for c in &bd {
        diag.neg_mass_boundary = diag.neg_mass_boundary.max(c.neg_mass);
    }
    for c in interior.iter().chain(&bd) {
        diag.beta_dft_mismatch = diag.beta_dft_mismatch.max(c.mismatch);
        diag.inverse_defect = diag.inverse_defect.max(c.defect);
    }
    if !(diag.neg_mass() <= params.fail_threshold) {
        return Err(Error::HAccuracy {
            mass: diag.neg_mass(),
            threshold: params.fail_threshold,
        });
    }
    let field = |k: usize, beta: bool| {
        let vals = interior
            .iter()
            .map(|c| if beta { c.beta[k] } else { c.alpha[k] })
            .collect();
        ComplexField::from_values(grid, vals).expect("node count matches grid")
    };
    Ok(ConjugationCoeffs {
        grid,
        alpha: (0..=depth).map(|k| field(k, false)).collect(),
        beta: (0..=depth).map(|k| field(k, true)).collect(),
        alpha_boundary: (0..=depth)
            .map(|k| bd.iter().map(|c| c.alpha[k]).collect())
            .collect(),
        beta_boundary: (0..=depth)
            .map(|k| bd.iter().map(|c| c.beta[k]).collect())
            .collect(),
        diagnostics: diag,
    })
}

impl ConjugationCoeffs {
    pub fn grid(&self) -> PolarGrid {
        self.grid
    }

    pub fn depth(&self) -> usize {
        self.alpha.len() - 1
    }

    /// Coefficients for `e^{sign G}`: `alpha` for `Minus`, `beta` for `Plus`.
    fn interior(&self, sign: Sign) -> &[ComplexField] {
        match sign {
            Sign::Minus => &self.alpha,
            Sign::Plus => &self.beta,
        }
    }

    fn boundary(&self, sign: Sign) -> &[Vec<Complex64>] {
        match sign {
            Sign::Minus => &self.alpha_boundary,
            Sign::Plus => &self.beta_boundary,
        }
    }

    /// Largest l1 size over nodes of the coefficients beyond index `k`; bounds
    /// the terms dropped when a convolution is cut at depth `k`.
    pub fn truncation_tail(&self, sign: Sign, k: usize) -> f64 {
        let coeffs = self.interior(sign);
        (0..self.grid.len())
            .map(|node| {
                coeffs
                    .iter()
                    .skip(k + 1)
                    .map(|c| c.values()[node].norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// Selects `e^{-G}` or `e^{+G}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Minus,
    Plus,
}

/// `(e^{-G}u)_{-p} = sum_{k=0}^{K} alpha_k u_{-p-k}` (and `beta` for `+G`),
/// dropping terms past the end of the stack. `depth` is `K`, defaulting to the
/// stack depth.
pub fn apply_eg(
    seq: &ModeSequence,
    sign: Sign,
    coeffs: &ConjugationCoeffs,
    depth: Option<usize>,
) -> Result<ModeSequence> {
    if seq.grid() != coeffs.grid() {
        return Err(Error::GridMismatch(
            "mode sequence and conjugation coefficients".into(),
        ));
    }
    let n = seq.depth();
    let kmax = depth.unwrap_or(n).min(coeffs.depth());
    let c = coeffs.interior(sign);
    let modes = (0..=n)
        .map(|p| {
            let mut acc = ComplexField::zeros(seq.grid());
            for k in 0..=kmax.min(n - p) {
                acc = acc.add(&seq.get(p + k).mul(&c[k]));
            }
            acc
        })
        .collect();
    ModeSequence::new(modes)
}

/// Boundary counterpart of [`apply_eg`].
pub fn apply_eg_boundary(
    seq: &BoundaryModeSequence,
    sign: Sign,
    coeffs: &ConjugationCoeffs,
    depth: Option<usize>,
) -> Result<BoundaryModeSequence> {
    if seq.boundary().len() != coeffs.grid().nbeta() {
        return Err(Error::GridMismatch(
            "boundary sequence and conjugation coefficients".into(),
        ));
    }
    let n = seq.depth();
    let kmax = depth.unwrap_or(n).min(coeffs.depth());
    let c = coeffs.boundary(sign);
    let nb = seq.boundary().len();
    let modes = (0..=n)
        .map(|p| {
            (0..nb)
                .map(|j| {
                    (0..=kmax.min(n - p))
                        .map(|k| c[k][j] * seq.get(p + k)[j])
                        .sum()
                })
                .collect()
        })
        .collect();
    BoundaryModeSequence::new(seq.boundary(), modes)
}

/// Boundary samples refined by trigonometric interpolation, node-major:
/// `out[q * (N + 1) + p]` is entry `p` at fine node `q`.
fn upsample(g: &BoundaryModeSequence, factor: usize) -> Vec<Complex64> {
    let nb = g.boundary().len();
    let nf = nb * factor;
    let np = g.depth() + 1;
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(nb);
    let inv = planner.plan_fft_inverse(nf);
    let mut out = vec![ZERO; nf * np];
    for p in 0..np {
        let mut spec = g.get(p).to_vec();
        fwd.process(&mut spec);
        let fine = if factor == 1 {
            g.get(p).to_vec()
        } else {
            let mut buf = vec![ZERO; nf];
            let half = nb / 2;
            buf[..half].copy_from_slice(&spec[..half]);
            for k in 1..half {
                buf[nf - k] = spec[nb - k];
            }
            // split the Nyquist bin symmetrically
            buf[half] = spec[half] * 0.5;
            buf[nf - half] = spec[half] * 0.5;
            inv.process(&mut buf);
            buf.iter().map(|v| v / nb as f64).collect()
        };
        for (q, v) in fine.into_iter().enumerate() {
            out[q * np + p] = v;
        }
    }
    out
}

/// Fine boundary nodes per target distance `d` from the circle.
fn upsample_factor(nb: usize, d: f64) -> usize {
    let needed = (60.0 / d).ceil() as usize;
    needed.div_ceil(nb).max(1)
}

/// Accumulates the Bukhgeim-Cauchy sum at one target over a fine boundary.
/// `k1[q]`, `w[q]` are evaluated for the target; `data` is node-major.
#[inline]
fn cauchy_sum(
    data: &[Complex64],
    np: usize,
    nf: usize,
    shift: usize,
    k1: &[Complex64],
    w_phase: Complex64,
    w0: &[Complex64],
    out: &mut [Complex64],
    series: &mut [Complex64],
) {
    out.iter_mut().for_each(|v| *v = ZERO);
    for q in 0..nf {
        let qq = (q + shift) % nf;
        let g = &data[qq * np..(qq + 1) * np];
        let kk1 = k1[q];
        let kk2 = kk1 - kk1.conj();
        let w = w0[q] * w_phase;
        // series[p] = sum_{j>=1} g_{p+2j} w^j = w (g_{p+2} + series[p+2])
        for p in (0..np).rev() {
            series[p] = if p + 2 < np {
                w * (g[p + 2] + series[p + 2])
            } else {
                ZERO
            };
        }
        for p in 0..np {
            out[p] += kk1 * g[p] + kk2 * series[p];
        }
    }
    let s = 1.0 / (2.0 * PI * I);
    out.iter_mut().for_each(|v| *v *= s);
}

/// Bukhgeim-Cauchy integral `B g` at arbitrary interior targets. Targets closer
/// than `min_distance` to the circle are rejected.
pub fn bukhgeim_cauchy(
    g: &BoundaryModeSequence,
    targets: &[Complex64],
    min_distance: f64,
) -> Result<Vec<Vec<Complex64>>> {
    for z in targets {
        if 1.0 - z.norm() < min_distance {
            return Err(Error::NearBoundary { radius: z.norm() });
        }
    }
    let nb = g.boundary().len();
    let np = g.depth() + 1;
    let mut cache: std::collections::HashMap<usize, Vec<Complex64>> =
        std::collections::HashMap::new();
    let mut results = Vec::with_capacity(targets.len());
    for &z in targets {
        let factor = upsample_factor(nb, 1.0 - z.norm());
        let data = cache.entry(factor).or_insert_with(|| upsample(g, factor));
        let nf = nb * factor;
        let dphi = 2.0 * PI / nf as f64;
        let mut k1 = Vec::with_capacity(nf);
        let mut w0 = Vec::with_capacity(nf);
        for q in 0..nf {
            let zeta = Complex64::from_polar(1.0, q as f64 * dphi);
            let diff = zeta - z;
            k1.push(I * zeta * dphi / diff);
            w0.push(diff.conj() / diff);
        }
        let mut out = vec![ZERO; np];
        let mut series = vec![ZERO; np];
        cauchy_sum(
            data,
            np,
            nf,
            0,
            &k1,
            Complex64::new(1.0, 0.0),
            &w0,
            &mut out,
            &mut series,
        );
        results.push(out);
    }
    Ok(results)
}

/// `B g` on every node of `grid` except the outermost ring, which lies within
/// one radial cell of the circle; there the values are interpolated
/// linearly in `r` between the next ring and the boundary data itself.
pub fn bukhgeim_cauchy_grid(g: &BoundaryModeSequence, grid: PolarGrid) -> Result<ModeSequence> {
    let nb = grid.nbeta();
    if g.boundary().len() != nb {
        return Err(Error::GridMismatch(
            "boundary sequence and polar grid".into(),
        ));
    }
    let nr = grid.nr();
    let np = g.depth() + 1;
    let mut factors: Vec<usize> = (0..nr - 1)
        .map(|i| upsample_factor(nb, 1.0 - grid.radius(i)))
        .collect();
    factors.dedup();
    let upsampled: std::collections::HashMap<usize, Vec<Complex64>> =
        factors.par_iter().map(|&f| (f, upsample(g, f))).collect();
    let rings: Vec<Vec<Complex64>> = (0..nr - 1)
        .into_par_iter()
        .map(|i| {
            let r = grid.radius(i);
            let factor = upsample_factor(nb, 1.0 - r);
            let data = &upsampled[&factor];
            let nf = nb * factor;
            let dphi = 2.0 * PI / nf as f64;
            let z = Complex64::new(r, 0.0);
            let mut k1 = Vec::with_capacity(nf);
            let mut w0 = Vec::with_capacity(nf);
            for q in 0..nf {
                let zeta = Complex64::from_polar(1.0, q as f64 * dphi);
                let diff = zeta - z;
                k1.push(I * zeta * dphi / diff);
                w0.push(diff.conj() / diff);
            }
            let mut ring = vec![ZERO; nb * np];
            let mut series = vec![ZERO; np];
            for j in 0..nb {
                let phase = Complex64::from_polar(1.0, -2.0 * grid.beta(j));
                cauchy_sum(
                    data,
                    np,
                    nf,
                    j * factor,
                    &k1,
                    phase,
                    &w0,
                    &mut ring[j * np..(j + 1) * np],
                    &mut series,
                );
            }
            ring
        })
        .collect();
    let mut modes = vec![vec![ZERO; grid.len()]; np];
    for (i, ring) in rings.iter().enumerate() {
        for j in 0..nb {
            for p in 0..np {
                modes[p][grid.index(i, j)] = ring[j * np + p];
            }
        }
    }
    for p in 0..np {
        for j in 0..nb {
            let inner = modes[p][grid.index(nr - 2, j)];
            modes[p][grid.index(nr - 1, j)] = inner / 3.0 + g.get(p)[j] * (2.0 / 3.0);
        }
    }
    ModeSequence::new(
        modes
            .into_iter()
            .map(|v| ComplexField::from_values(grid, v).expect("sized"))
            .collect(),
    )
}

/// Bukhgeim-Hilbert transform at the boundary nodes.
pub fn bukhgeim_hilbert(g: &BoundaryModeSequence) -> BoundaryModeSequence {
    let boundary = g.boundary();
    let nb = boundary.len();
    let np = g.depth() + 1;
    let dphi = 2.0 * PI / nb as f64;
    let dg: Vec<Vec<Complex64>> = g.modes().iter().map(|m| spectral_derivative(m)).collect();
    let per_node: Vec<Vec<Complex64>> = (0..nb)
        .into_par_iter()
        .map(|i| {
            let z = boundary.node(i);
            let mut out = vec![ZERO; np];
            let mut series = vec![ZERO; np];
            for q in 0..nb {
                let zeta = boundary.node(q);
                let w = -(zeta * z).conj();
                for p in (0..np).rev() {
                    series[p] = if p + 2 < np {
                        w * (g.get(p + 2)[q] + series[p + 2])
                    } else {
                        ZERO
                    };
                }
                let k1 = if q == i {
                    ZERO
                } else {
                    I * zeta * dphi / (zeta - z)
                };
                for p in 0..np {
                    let gp = g.get(p);
                    let pv = if q == i {
                        dg[p][i] * dphi
                    } else {
                        (gp[q] - gp[i]) * k1
                    };
                    out[p] += pv + I * dphi * series[p];
                }
            }
            for p in 0..np {
                out[p] = (out[p] + g.get(p)[i] * I * PI) / PI;
            }
            out
        })
        .collect();
    let modes = (0..np)
        .map(|p| per_node.iter().map(|v| v[p]).collect())
        .collect();
    BoundaryModeSequence { boundary, modes }
}

/// Spectral derivative in the boundary angle.
fn spectral_derivative(v: &[Complex64]) -> Vec<Complex64> {
    let n = v.len();
    let mut planner = FftPlanner::new();
    let mut buf = v.to_vec();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let wave = crate::grid::wavenumber(k, n);
        *c = if 2 * k == n {
            ZERO
        } else {
            *c * I * wave as f64 / n as f64
        };
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf
}

/// Size of `(I + i H) g` in the weighted norm, absolute and relative to `g`.
#[derive(Clone, Copy, Debug)]
pub struct RangeResidual {
    pub absolute: f64,
    pub relative: f64,
}

pub fn range_residual(g: &BoundaryModeSequence) -> RangeResidual {
    let hg = bukhgeim_hilbert(g);
    let res = g.add(&hg.scale(I)).expect("same shape");
    let absolute = res.weighted_norm();
    let norm = g.weighted_norm();
    RangeResidual {
        absolute,
        relative: if norm > 0.0 { absolute / norm } else { 0.0 },
    }
}

/// `dbar v_{-p} + d v_{-p-2}` for `p = 0..=N-2`.
pub fn analyticity_residual(v: &ModeSequence) -> Vec<ComplexField> {
    (0..v.depth().saturating_sub(1))
        .map(|p| crate::grid::dbar(v.get(p)).add(&crate::grid::d(v.get(p + 2))))
        .collect()
}
