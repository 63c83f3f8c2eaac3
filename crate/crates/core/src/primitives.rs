//! Parametric smooth functions on the disk used to build media and sources.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{PolarGrid, ScalarField, VectorField};

/// One term of a profile.
#[derive(Clone, Debug, PartialEq)]
pub enum Primitive {
    /// `amplitude * exp(-|z - center|^2 / width^2)`.
    Gaussian {
        center: Complex64,
        width: f64,
        amplitude: f64,
    },
    Constant(f64),
    /// `sum_k coeffs[k] * r^k`.
    RadialPolynomial(Vec<f64>),
    /// `amplitude * e * exp(-1 / (1 - |z - center|^2 / radius^2))` inside the
    /// support, so the peak value is `amplitude`.
    Bump {
        center: Complex64,
        radius: f64,
        amplitude: f64,
    },
}

impl Primitive {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Parse(what.to_string()));
        match self {
            Primitive::Gaussian {
                center,
                width,
                amplitude,
            } => {
                if !(width.is_finite() && *width > 0.0) {
                    return bad("gaussian width must be positive");
                }
                if !(center.re.is_finite() && center.im.is_finite() && amplitude.is_finite()) {
                    return bad("gaussian parameters must be finite");
                }
            }
            Primitive::Constant(c) if !c.is_finite() => return bad("constant must be finite"),
            Primitive::RadialPolynomial(c) if c.iter().any(|v| !v.is_finite()) => {
                return bad("polynomial coefficients must be finite")
            }
            Primitive::Bump {
                radius, amplitude, ..
            } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return bad("bump radius must be positive");
                }
                if !amplitude.is_finite() {
                    return bad("bump amplitude must be finite");
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn eval(&self, z: Complex64) -> f64 {
        match self {
            Primitive::Gaussian {
                center,
                width,
                amplitude,
            } => amplitude * (-(z - center).norm_sqr() / (width * width)).exp(),
            Primitive::Constant(c) => *c,
            Primitive::RadialPolynomial(c) => {
                let r = z.norm();
                c.iter().rev().fold(0.0, |acc, &k| acc * r + k)
            }
            Primitive::Bump {
                center,
                radius,
                amplitude,
            } => {
                let x = (z - center).norm_sqr() / (radius * radius);
                if x < 1.0 {
                    amplitude * (1.0 - 1.0 / (1.0 - x)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Exact gradient `(d/dx, d/dy)`.
    pub fn gradient(&self, z: Complex64) -> (f64, f64) {
        match self {
            Primitive::Gaussian { center, width, .. } => {
                let s = -2.0 * self.eval(z) / (width * width);
                let d = z - center;
                (s * d.re, s * d.im)
            }
            Primitive::Constant(_) => (0.0, 0.0),
            Primitive::RadialPolynomial(c) => {
                let r = z.norm();
                if r == 0.0 {
                    // only the linear term has a cone at the origin; take its mean slope 0
                    return (0.0, 0.0);
                }
                let dr: f64 = c
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, &v)| k as f64 * v * r.powi(k as i32 - 1))
                    .sum();
                (dr * z.re / r, dr * z.im / r)
            }
            Primitive::Bump { center, radius, .. } => {
                let d = z - center;
                let x = d.norm_sqr() / (radius * radius);
                if x >= 1.0 {
                    return (0.0, 0.0);
                }
                let s = -self.eval(z) / ((1.0 - x) * (1.0 - x)) * 2.0 / (radius * radius);
                (s * d.re, s * d.im)
            }
        }
    }
}

/// A sum of primitives.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Profile(pub Vec<Primitive>);

impl Profile {
    pub fn new(terms: Vec<Primitive>) -> Result<Self> {
        for t in &terms {
            t.validate()?;
        }
        Ok(Self(terms))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn eval(&self, z: Complex64) -> f64 {
        self.0.iter().map(|p| p.eval(z)).sum()
    }

    pub fn gradient(&self, z: Complex64) -> (f64, f64) {
        self.0.iter().fold((0.0, 0.0), |(x, y), p| {
            let (gx, gy) = p.gradient(z);
            (x + gx, y + gy)
        })
    }

    pub fn field(&self, grid: PolarGrid) -> ScalarField {
        ScalarField::from_fn(grid, |z| self.eval(z))
    }

    /// `grad psi` sampled on the grid.
    pub fn gradient_field(&self, grid: PolarGrid) -> VectorField {
        VectorField::from_fn(grid, |z| self.gradient(z))
    }

    /// `grad^perp psi = (-psi_y, psi_x)`, divergence free.
    pub fn perp_gradient_field(&self, grid: PolarGrid) -> VectorField {
        VectorField::from_fn(grid, |z| {
            let (gx, gy) = self.gradient(z);
            (-gy, gx)
        })
    }
}

/// How the vector part of a source is specified.
#[derive(Clone, Debug, PartialEq)]
pub enum VectorSpec {
    Zero,
    Gradient(Profile),
    PerpGradient(Profile),
    Components(Profile, Profile),
    /// Sum of the above.
    Sum(Vec<VectorSpec>),
}

impl VectorSpec {
    pub fn field(&self, grid: PolarGrid) -> VectorField {
        match self {
            VectorSpec::Zero => VectorField::zeros(grid),
            VectorSpec::Gradient(p) => p.gradient_field(grid),
            VectorSpec::PerpGradient(p) => p.perp_gradient_field(grid),
            VectorSpec::Components(x, y) => {
                VectorField::new(x.field(grid), y.field(grid)).expect("same grid")
            }
            VectorSpec::Sum(parts) => parts
                .iter()
                .fold(VectorField::zeros(grid), |acc, p| acc.add(&p.field(grid))),
        }
    }

    /// Whether the field is divergence free by construction.
    pub fn is_divergence_free(&self) -> bool {
        match self {
            VectorSpec::Zero | VectorSpec::PerpGradient(_) => true,
            VectorSpec::Sum(parts) => parts.iter().all(|p| p.is_divergence_free()),
            _ => false,
        }
    }
}
