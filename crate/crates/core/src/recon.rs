//! Source reconstruction from outgoing boundary data.
//!
//! All pipelines share one front end: angular modes of the data, conjugation
//! to an attenuation-free system, the Bukhgeim-Cauchy extension into the
//! disk, conjugation back and the dbar cascade for the modes the conjugated
//! system does not see. They differ in how the zeroth mode is obtained.

use num_complex::Complex64;

use crate::aanalytic::{
    apply_eg, apply_eg_boundary, bukhgeim_cauchy_grid, compute_h, conjugation_coeffs,
    range_residual, BoundaryModeSequence, CoeffParams, ConjugationCoeffs, HParams, ModeSequence,
    RangeResidual, Sign,
};
use crate::elliptic::{damped, dbar_cascade, mode_equation_residual, poisson_dirichlet};
use crate::error::{Error, Result};
use crate::grid::{d, dbar, ComplexField, DirectionGrid, ScalarField, VectorField};
use crate::transport::{BoundaryData, MediumSpec};

/// Knobs shared by all pipelines.
#[derive(Clone, Copy, Debug)]
pub struct ReconParams {
    /// Mode truncation `N`; defaults to the largest the direction grid resolves.
    pub n: Option<usize>,
    pub h: HParams,
    pub coeff: CoeffParams,
    /// Relative range residual above which a warning is recorded.
    pub range_warn: f64,
    /// Relative range residual above which the data are rejected.
    pub range_fail: f64,
    /// Lower bound for `a - k0` in the pipelines that divide by it.
    pub delta: f64,
    /// Additive Gaussian noise as a fraction of `max |g|`, with its seed.
    pub noise: Option<(f64, u64)>,
}

impl Default for ReconParams {
    fn default() -> Self {
        Self {
            n: None,
            h: HParams::default(),
            coeff: CoeffParams::default(),
            range_warn: 0.1,
            range_fail: 0.5,
            delta: 1e-8,
            noise: None,
        }
    }
}

/// Diagnostics gathered along a pipeline run.
#[derive(Clone, Debug, Default)]
pub struct ReconDiagnostics {
    /// Range residual of the conjugated boundary sequence, per data set.
    pub range_residuals: Vec<RangeResidual>,
    pub warnings: Vec<String>,
    pub neg_mass: f64,
    pub inverse_defect: f64,
    /// L2 residuals of the mode equations solved by the cascade.
    pub cascade_residuals: Vec<f64>,
    pub noisy: bool,
    pub truncation: usize,
}

/// Modes `u_{-1}, ..., u_{-N}` recovered inside the disk.
#[derive(Clone, Debug)]
pub struct InteriorModes {
    tail: Vec<ComplexField>,
    pub diagnostics: ReconDiagnostics,
}

impl InteriorModes {
    /// `u_{-p}` for `1 <= p <= N`.
    pub fn mode(&self, p: usize) -> &ComplexField {
        &self.tail[p - 1]
    }

    pub fn depth(&self) -> usize {
        self.tail.len()
    }

    /// Stack `<u0, u_{-1}, ..., u_{-N}>` with the given zeroth entry.
    pub fn with_zeroth(&self, u0: ComplexField) -> ModeSequence {
        let mut modes = Vec::with_capacity(self.tail.len() + 1);
        modes.push(u0);
        modes.extend(self.tail.iter().cloned());
        ModeSequence::new(modes).expect("same grid")
    }
}

/// Relative L2 error of one output against ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorMetric {
    pub name: String,
    pub rel_l2: f64,
}

fn rel_err(name: &str, got: f64, truth: f64) -> ErrorMetric {
    ErrorMetric {
        name: name.into(),
        rel_l2: if truth > 0.0 { got / truth } else { got },
    }
}

/// Output of a reconstruction pipeline.
#[derive(Clone, Debug)]
pub struct ReconResult {
    /// `<u0 - phi, u_{-1}, ...>` for the solenoidal pipeline, `<u0, ...>` otherwise.
    pub modes: ModeSequence,
    pub f0: Option<ScalarField>,
    /// `F^s` for the solenoidal pipeline, `F` otherwise.
    pub f: VectorField,
    pub diagnostics: ReconDiagnostics,
}

impl ReconResult {
    /// Relative L2 errors per output and per vector component.
    pub fn metrics(&self, f0: Option<&ScalarField>, f: &VectorField) -> Vec<ErrorMetric> {
        let mut out = Vec::new();
        if let (Some(got), Some(truth)) = (&self.f0, f0) {
            out.push(rel_err("f0", got.sub(truth).l2_norm(), truth.l2_norm()));
        }
        out.push(rel_err("F", self.f.sub(f).l2_norm(), f.l2_norm()));
        out.push(rel_err("F.x", self.f.x.sub(&f.x).l2_norm(), f.x.l2_norm()));
        out.push(rel_err("F.y", self.f.y.sub(&f.y).l2_norm(), f.y.l2_norm()));
        out
    }

    /// `Re d f1` of the vector output.
    pub fn solenoidality(&self) -> ScalarField {
        d(&self.f.to_f1()).re()
    }
}

/// Vector field recovered on a subregion.
#[derive(Clone, Debug)]
pub struct MaskedVectorField {
    pub mask: Vec<bool>,
    /// Zero outside the mask.
    pub field: VectorField,
}

impl MaskedVectorField {
    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }

    pub fn l2_norm(&self) -> f64 {
        self.field.l2_norm_masked(|i| self.mask[i])
    }
}

/// A medium prepared for reconstruction: conjugation coefficients are
/// computed once and shared by every pipeline run on it.
#[derive(Clone, Debug)]
pub struct Reconstructor {
    medium: MediumSpec,
    dirs: DirectionGrid,
    coeffs: ConjugationCoeffs,
    params: ReconParams,
    n: usize,
}

impl Reconstructor {
    pub fn new(medium: &MediumSpec, dirs: DirectionGrid, params: ReconParams) -> Result<Self> {
        let m = medium.degree();
        let n = params.n.unwrap_or(dirs.max_modes());
        if n > dirs.max_modes() {
            return Err(Error::InvalidArgument(format!(
                "truncation {n} exceeds the {} modes resolved by {} directions",
                dirs.max_modes(),
                dirs.len()
            )));
        }
        if n < m + 2 {
            return Err(Error::InvalidArgument(format!(
                "truncation {n} must be at least M + 2 = {}",
                m + 2
            )));
        }
        let h = compute_h(&medium.a, dirs, params.h);
        let coeffs = conjugation_coeffs(&h, n - m, params.coeff)?;
        Ok(Self {
            medium: medium.clone(),
            dirs,
            coeffs,
            params,
            n,
        })
    }

    pub fn medium(&self) -> &MediumSpec {
        &self.medium
    }

    pub fn truncation(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &ConjugationCoeffs {
        &self.coeffs
    }

    fn base_diagnostics(&self) -> ReconDiagnostics {
        ReconDiagnostics {
            neg_mass: self.coeffs.diagnostics.neg_mass(),
            inverse_defect: self.coeffs.diagnostics.inverse_defect,
            noisy: self.params.noise.is_some_and(|(s, _)| s > 0.0),
            truncation: self.n,
            ..Default::default()
        }
    }

    fn prepare(&self, g: &BoundaryData) -> Result<BoundaryModeSequence> {
        if g.dirs() != self.dirs || g.boundary().len() != self.medium.grid().nbeta() {
            return Err(Error::GridMismatch(
                "boundary data and reconstruction grid".into(),
            ));
        }
        let noisy;
        let g = match self.params.noise {
            Some((std, seed)) if std > 0.0 => {
                noisy = g.with_noise(std, seed)?;
                &noisy
            }
            _ => g,
        };
        BoundaryModeSequence::from_data(g, self.n)
    }

    /// Conjugated boundary sequence `e^{-G} L^M g`, checked against the range condition.
    pub fn conjugated_trace(
        &self,
        gm: &BoundaryModeSequence,
        diag: &mut ReconDiagnostics,
    ) -> Result<BoundaryModeSequence> {
        let vb = apply_eg_boundary(
            &gm.shift(self.medium.degree())?,
            Sign::Minus,
            &self.coeffs,
            None,
        )?;
        let res = range_residual(&vb);
        diag.range_residuals.push(res);
        if res.relative > self.params.range_fail {
            return Err(Error::DataConsistency {
                residual: res.relative,
                threshold: self.params.range_fail,
            });
        }
        if res.relative > self.params.range_warn {
            diag.warnings.push(format!(
                "range residual {:.3e} exceeds warning threshold {:.1e}",
                res.relative, self.params.range_warn
            ));
        }
        Ok(vb)
    }

    fn modes_from(
        &self,
        gm: &BoundaryModeSequence,
        mut diag: ReconDiagnostics,
    ) -> Result<InteriorModes> {
        let grid = self.medium.grid();
        if gm.max_abs() == 0.0 {
            return Ok(InteriorModes {
                tail: vec![ComplexField::zeros(grid); self.n],
                diagnostics: diag,
            });
        }
        let vb = self.conjugated_trace(gm, &mut diag)?;
        let v = bukhgeim_cauchy_grid(&vb, grid)?;
        let lu = apply_eg(&v, Sign::Plus, &self.coeffs, None)?;
        let cascade = dbar_cascade((lu.get(1), lu.get(0)), &self.medium, gm)?;
        diag.cascade_residuals = cascade.residuals;
        let mut tail = Vec::with_capacity(self.n);
        tail.extend(cascade.modes.into_iter().rev());
        tail.extend(lu.into_modes());
        Ok(InteriorModes {
            tail,
            diagnostics: diag,
        })
    }

    /// Modes `u_{-1}, ..., u_{-N}` of the solution generating `g`.
    pub fn interior_modes(&self, g: &BoundaryData) -> Result<InteriorModes> {
        let gm = self.prepare(g)?;
        self.modes_from(&gm, self.base_diagnostics())
    }

    /// Zeroth mode from the mode `-1` equation with `f1` solenoidal (or zero):
    /// `Delta u0 = -4 Re[d^2 u_{-2} + d((a - k_{-1}) u_{-1})]`, `u0 = g0` on the boundary.
    fn zeroth_mode(&self, modes: &InteriorModes, g0: &[Complex64]) -> Result<ScalarField> {
        let rhs = self.minus_one_drive(modes);
        let rhs = d(&rhs).re().scale(-4.0).to_complex();
        let bc: Vec<Complex64> = g0.iter().map(|v| Complex64::new(v.re, 0.0)).collect();
        Ok(poisson_dirichlet(&rhs, &bc)?.re())
    }

    /// `d u_{-2} + (a - k_{-1}) u_{-1}`.
    fn minus_one_drive(&self, modes: &InteriorModes) -> ComplexField {
        d(modes.mode(2)).add(&damped(&self.medium, 1, modes.mode(1)))
    }

    fn f1_with(&self, modes: &InteriorModes, u0: &ScalarField) -> ComplexField {
        dbar(&u0.to_complex()).add(&self.minus_one_drive(modes))
    }

    /// `f0 = 2 Re d u_{-1} + (a - k0) u0`.
    fn f0_with(&self, modes: &InteriorModes, u0: &ScalarField) -> ScalarField {
        d(modes.mode(1))
            .re()
            .scale(2.0)
            .add(&u0.mul(&self.medium.sigma_a()))
    }

    fn check_subcritical(&self) -> Result<ScalarField> {
        self.medium.check_subcritical(self.params.delta)?;
        Ok(self.medium.sigma_a())
    }

    /// Solenoidal part `F^s` of the vector source; `modes[0]` is `u0 - phi`.
    pub fn solenoidal(&self, g: &BoundaryData) -> Result<ReconResult> {
        let gm = self.prepare(g)?;
        let modes = self.modes_from(&gm, self.base_diagnostics())?;
        let u0 = self.zeroth_mode(&modes, gm.get(0))?;
        let f1 = self.f1_with(&modes, &u0);
        Ok(ReconResult {
            f: VectorField::from_f1(&f1),
            f0: None,
            modes: modes.with_zeroth(u0.to_complex()),
            diagnostics: modes.diagnostics,
        })
    }

    /// Both `f0` and `F` for a source whose vector part is divergence free.
    pub fn divfree(&self, g: &BoundaryData) -> Result<ReconResult> {
        let gm = self.prepare(g)?;
        let modes = self.modes_from(&gm, self.base_diagnostics())?;
        let u0 = self.zeroth_mode(&modes, gm.get(0))?;
        let f1 = self.f1_with(&modes, &u0);
        let f0 = self.f0_with(&modes, &u0);
        Ok(ReconResult {
            f: VectorField::from_f1(&f1),
            f0: Some(f0),
            modes: modes.with_zeroth(u0.to_complex()),
            diagnostics: modes.diagnostics,
        })
    }

    /// `f0` and the full `F` from the data of `(f0, F)` and of `(f0, 0)`.
    /// The returned modes are those of the isotropic problem.
    pub fn twodata(&self, g_full: &BoundaryData, g_iso: &BoundaryData) -> Result<ReconResult> {
        g_full.check_compatible(g_iso)?;
        let sigma = self.check_subcritical()?;
        let g_diff = g_full.sub(g_iso)?;
        let (iso, aniso) = rayon::join(
            || -> Result<(InteriorModes, Complex64Vec)> {
                let gm = self.prepare(g_iso)?;
                let modes = self.modes_from(&gm, self.base_diagnostics())?;
                Ok((modes, gm.get(0).to_vec()))
            },
            || -> Result<InteriorModes> {
                let gm = self.prepare(&g_diff)?;
                self.modes_from(&gm, self.base_diagnostics())
            },
        );
        let (v, g0) = iso?;
        let w = aniso?;
        let v0 = self.zeroth_mode(&v, &g0)?;
        let f0 = self.f0_with(&v, &v0);
        let w0 = self.balance_zeroth(&w, &sigma);
        let f1 = self.f1_with(&w, &w0);
        let mut diagnostics = v.diagnostics.clone();
        diagnostics
            .range_residuals
            .extend(w.diagnostics.range_residuals.iter().copied());
        diagnostics
            .warnings
            .extend(w.diagnostics.warnings.iter().cloned());
        diagnostics
            .cascade_residuals
            .extend(w.diagnostics.cascade_residuals.iter().copied());
        Ok(ReconResult {
            f: VectorField::from_f1(&f1),
            f0: Some(f0),
            modes: v.with_zeroth(v0.to_complex()),
            diagnostics,
        })
    }

    /// `u0 = -2 Re(d u_{-1}) / (a - k0)`, valid where `f0 = 0`.
    fn balance_zeroth(&self, modes: &InteriorModes, sigma: &ScalarField) -> ScalarField {
        let num = d(modes.mode(1)).re().scale(-2.0);
        num.zip_map(sigma, |x, s| x / s)
    }

    /// `F` on the nodes where `mask` holds, assuming `f0` vanishes there.
    pub fn f_where_f0_zero(&self, g: &BoundaryData, mask: &[bool]) -> Result<MaskedVectorField> {
        let grid = self.medium.grid();
        if mask.len() != grid.len() {
            return Err(Error::GridMismatch("mask and grid".into()));
        }
        let sigma = self.check_subcritical()?;
        if !mask.iter().any(|&m| m) {
            return Ok(MaskedVectorField {
                mask: mask.to_vec(),
                field: VectorField::zeros(grid),
            });
        }
        let modes = self.interior_modes(g)?;
        let u0 = self.balance_zeroth(&modes, &sigma);
        let f = VectorField::from_f1(&self.f1_with(&modes, &u0));
        let keep = |s: &ScalarField| {
            ScalarField::from_values(
                grid,
                s.values()
                    .iter()
                    .zip(mask)
                    .map(|(&v, &m)| if m { v } else { 0.0 })
                    .collect(),
            )
            .expect("sized")
        };
        Ok(MaskedVectorField {
            mask: mask.to_vec(),
            field: VectorField::new(keep(&f.x), keep(&f.y))?,
        })
    }

    /// Residuals of the mode equations `dbar u_{-p} + d u_{-p-2} + (a - k_{-p-1}) u_{-p-1}`
    /// for `p = 1..N-2`, as L2 norms relative to the largest mode.
    pub fn mode_residuals(&self, modes: &InteriorModes) -> Vec<f64> {
        let scale = (1..=modes.depth())
            .map(|p| modes.mode(p).l2_norm())
            .fold(0.0, f64::max);
        (1..modes.depth().saturating_sub(1))
            .map(|p| {
                let r = mode_equation_residual(
                    &self.medium,
                    p,
                    modes.mode(p),
                    modes.mode(p + 1),
                    modes.mode(p + 2),
                );
                if scale > 0.0 {
                    r.l2_norm() / scale
                } else {
                    0.0
                }
            })
            .collect()
    }
}

type Complex64Vec = Vec<Complex64>;

pub fn recover_interior_modes(
    g: &BoundaryData,
    medium: &MediumSpec,
    params: ReconParams,
) -> Result<InteriorModes> {
    Reconstructor::new(medium, g.dirs(), params)?.interior_modes(g)
}

pub fn recover_solenoidal(
    g: &BoundaryData,
    medium: &MediumSpec,
    params: ReconParams,
) -> Result<ReconResult> {
    Reconstructor::new(medium, g.dirs(), params)?.solenoidal(g)
}

pub fn recover_divfree(
    g: &BoundaryData,
    medium: &MediumSpec,
    params: ReconParams,
) -> Result<ReconResult> {
    Reconstructor::new(medium, g.dirs(), params)?.divfree(g)
}

pub fn recover_twodata(
    g_full: &BoundaryData,
    g_iso: &BoundaryData,
    medium: &MediumSpec,
    params: ReconParams,
) -> Result<ReconResult> {
    medium.check_subcritical(params.delta)?;
    Reconstructor::new(medium, g_full.dirs(), params)?.twodata(g_full, g_iso)
}

pub fn recover_f_where_f0_zero(
    g: &BoundaryData,
    medium: &MediumSpec,
    mask: &[bool],
    params: ReconParams,
) -> Result<MaskedVectorField> {
    medium.check_subcritical(params.delta)?;
    Reconstructor::new(medium, g.dirs(), params)?.f_where_f0_zero(g, mask)
}
