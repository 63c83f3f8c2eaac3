//! Source pairs that produce identical boundary data:
//! `(f0, F)` and `(f0~, F~)` with `F = F~ + grad((f0 - f0~) / (a - k0))`.

use crate::elliptic::gradient;
use crate::error::{Error, Result};
use crate::grid::{DirectionGrid, ScalarField, VectorField};
use crate::transport::{
    extract_boundary_data, solve_forward, ForwardParams, MediumSpec, SourceSpec,
};

/// Default bound on `max |psi|` over the boundary, relative to `max |psi|`.
pub const BOUNDARY_TOL: f64 = 1e-4;

/// `psi = (f0 - f0~) / (a - k0)`, checked to vanish on the boundary
/// relative to its largest value.
pub fn gauge_potential(
    f0: &ScalarField,
    f0_tilde: &ScalarField,
    medium: &MediumSpec,
    tol: f64,
) -> Result<ScalarField> {
    let grid = medium.grid();
    if f0.grid() != grid || f0_tilde.grid() != grid {
        return Err(Error::GridMismatch("gauge sources and medium".into()));
    }
    let sigma = medium.sigma_a();
    let min_sigma = sigma.min();
    if min_sigma <= 0.0 {
        return Err(Error::Precondition(format!(
            "a - k0 must be positive, minimum is {min_sigma:.3e}"
        )));
    }
    let psi = f0.sub(f0_tilde).zip_map(&sigma, |x, s| x / s);
    // the outer ring sits half a cell inside; extrapolate to the circle
    let trace = psi
        .boundary_trace()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let peak = psi.max_abs();
    if trace > tol * peak {
        return Err(Error::Precondition(format!(
            "(f0 - f0_tilde) / (a - k0) does not vanish on the boundary: max {trace:.3e} against peak {peak:.3e}"
        )));
    }
    Ok(psi)
}

/// The vector part `F` making `(f0, F)` indistinguishable from `(f0~, F~)`.
pub fn gauge_partner(
    f0: &ScalarField,
    f0_tilde: &ScalarField,
    f_tilde: &VectorField,
    medium: &MediumSpec,
    tol: f64,
) -> Result<VectorField> {
    let psi = gauge_potential(f0, f0_tilde, medium, tol)?;
    if f_tilde.grid() != psi.grid() {
        return Err(Error::GridMismatch("gauge vector field".into()));
    }
    Ok(f_tilde.add(&gradient(&psi)))
}

/// Two sources with their gauge potential.
#[derive(Clone, Debug)]
pub struct GaugePair {
    pub source: SourceSpec,
    pub tilde: SourceSpec,
    pub psi: ScalarField,
}

impl GaugePair {
    /// Builds `(f0, F)` from `(f0~, F~)` and a new isotropic part `f0`.
    pub fn partner_of(
        tilde: SourceSpec,
        f0: ScalarField,
        medium: &MediumSpec,
        tol: f64,
    ) -> Result<Self> {
        let psi = gauge_potential(&f0, &tilde.f0, medium, tol)?;
        let f = tilde.f.add(&gradient(&psi));
        Ok(Self {
            source: SourceSpec::new(f0, f)?,
            tilde,
            psi,
        })
    }
}

/// Data discrepancy between two sources and the residual of the gauge relation.
#[derive(Clone, Debug)]
pub struct GaugeReport {
    pub data_sup: f64,
    pub data_l2: f64,
    /// Sup and L2 norms of the data of the first source, for scale.
    pub data_scale_sup: f64,
    pub data_scale_l2: f64,
    /// `||F - F~ - grad psi||` in area-weighted L2.
    pub converse_residual: f64,
    pub converse_relative: f64,
    pub iterations: (usize, usize),
}

impl GaugeReport {
    pub fn relative_sup(&self) -> f64 {
        if self.data_scale_sup > 0.0 {
            self.data_sup / self.data_scale_sup
        } else {
            self.data_sup
        }
    }

    pub fn relative_l2(&self) -> f64 {
        if self.data_scale_l2 > 0.0 {
            self.data_l2 / self.data_scale_l2
        } else {
            self.data_l2
        }
    }
}

/// Forward-solves both sources and compares their outgoing data.
pub fn gauge_verify(
    a: &SourceSpec,
    b: &SourceSpec,
    medium: &MediumSpec,
    dirs: DirectionGrid,
    params: ForwardParams,
    tol: f64,
) -> Result<GaugeReport> {
    let psi = gauge_potential(&a.f0, &b.f0, medium, tol)?;
    let (sa, sb) = rayon::join(
        || solve_forward(medium, a, dirs, params),
        || solve_forward(medium, b, dirs, params),
    );
    let (sa, sb) = (sa?, sb?);
    let ga = extract_boundary_data(&sa.u);
    let gb = extract_boundary_data(&sb.u);
    let diff = ga.sub(&gb)?;
    let residual = a.f.sub(&b.f).sub(&gradient(&psi));
    let converse_residual = residual.l2_norm();
    let scale = a.f.l2_norm().max(b.f.l2_norm());
    Ok(GaugeReport {
        data_sup: diff.max_abs(),
        data_l2: diff.l2_norm(),
        data_scale_sup: ga.max_abs(),
        data_scale_l2: ga.l2_norm(),
        converse_residual,
        converse_relative: if scale > 0.0 {
            converse_residual / scale
        } else {
            converse_residual
        },
        iterations: (sa.iterations, sb.iterations),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PolarGrid;
    use num_complex::Complex64;

    fn gauss(cx: f64, cy: f64, w2: f64, amp: f64) -> impl Fn(Complex64) -> f64 + Copy {
        move |z| amp * (-((z.re - cx).powi(2) + (z.im - cy).powi(2)) / w2).exp()
    }

    fn medium(g: PolarGrid) -> MediumSpec {
        let a = ScalarField::from_fn(g, |z| 0.8 + 0.2 * z.re);
        MediumSpec::new(
            a,
            vec![ScalarField::constant(g, 0.3), ScalarField::constant(g, 0.1)],
        )
        .unwrap()
    }

    #[test]
    fn equal_scalar_parts_leave_f_alone() {
        let g = PolarGrid::new(16, 32).unwrap();
        let f0 = ScalarField::from_fn(g, gauss(0.0, 0.0, 0.05, 1.0));
        let ft = VectorField::from_fn(g, |z| (z.im, -z.re));
        let f = gauge_partner(&f0, &f0, &ft, &medium(g), BOUNDARY_TOL).unwrap();
        assert_eq!(f.sub(&ft).l2_norm(), 0.0);
    }

    #[test]
    fn partner_of_zero_is_gradient_of_bump() {
        let g = PolarGrid::new(64, 128).unwrap();
        let med = medium(g);
        let b = gauss(0.1, -0.2, 0.04, 1.0);
        let f0 = ScalarField::from_fn(g, b).mul(&med.sigma_a());
        let f = gauge_partner(
            &f0,
            &ScalarField::zeros(g),
            &VectorField::zeros(g),
            &med,
            BOUNDARY_TOL,
        )
        .unwrap();
        let exact = VectorField::from_fn(g, |z| {
            let v = b(z) * (-2.0 / 0.04);
            (v * (z.re - 0.1), v * (z.im + 0.2))
        });
        assert!(f.sub(&exact).l2_norm() < 1e-2 * exact.l2_norm());
    }

    #[test]
    fn preconditions_are_checked() {
        let g = PolarGrid::new(16, 32).unwrap();
        let med = medium(g);
        let wide = ScalarField::constant(g, 1.0);
        let err = gauge_partner(
            &wide,
            &ScalarField::zeros(g),
            &VectorField::zeros(g),
            &med,
            BOUNDARY_TOL,
        );
        assert!(matches!(err, Err(Error::Precondition(msg)) if msg.contains("boundary")));
        let critical = MediumSpec::new(
            ScalarField::constant(g, 0.3),
            vec![ScalarField::constant(g, 0.3)],
        )
        .unwrap();
        let f0 = ScalarField::from_fn(g, gauss(0.0, 0.0, 0.02, 1.0));
        let err = gauge_partner(&f0, &f0, &VectorField::zeros(g), &critical, BOUNDARY_TOL);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn verify_distinguishes_gauge_from_other_changes() {
        let g = PolarGrid::new(32, 128).unwrap();
        let dirs = DirectionGrid::new(32).unwrap();
        let med = medium(g);
        let tilde = SourceSpec::new(
            ScalarField::from_fn(g, gauss(-0.2, 0.1, 0.05, 1.0)),
            VectorField::from_fn(g, |z| (0.2 * z.im, 0.1)),
        )
        .unwrap();
        let f0 = ScalarField::from_fn(g, gauss(0.2, 0.0, 0.04, 1.5));
        let pair = GaugePair::partner_of(tilde.clone(), f0, &med, BOUNDARY_TOL).unwrap();
        let fp = ForwardParams::default();

        let same = gauge_verify(&tilde, &tilde, &med, dirs, fp, BOUNDARY_TOL).unwrap();
        assert_eq!(same.data_sup, 0.0);
        assert_eq!(same.converse_residual, 0.0);

        let rep = gauge_verify(&pair.source, &pair.tilde, &med, dirs, fp, BOUNDARY_TOL).unwrap();
        assert!(rep.converse_residual < 1e-12);

        // rotate the gradient by 90 degrees: same norm, no longer a gradient
        let grad = pair.source.f.sub(&tilde.f);
        let rot = VectorField::new(grad.y.scale(-1.0), grad.x.clone()).unwrap();
        let other = SourceSpec::new(pair.source.f0.clone(), tilde.f.add(&rot)).unwrap();
        let bad = gauge_verify(&other, &pair.tilde, &med, dirs, fp, BOUNDARY_TOL).unwrap();
        assert!(bad.converse_relative > 0.1);
        assert!(
            bad.data_l2 > 10.0 * rep.data_l2,
            "{} vs {}",
            bad.data_l2,
            rep.data_l2
        );
    }
}
