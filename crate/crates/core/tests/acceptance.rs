//! Acceptance suite. Runs every criterion at the desk grid (64 x 256 x 64,
//! truncation 31) and prints one PASS/FAIL line each; exits non-zero if any fails.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rte_inverse::aanalytic::{
    bukhgeim_cauchy_grid, compute_h, conjugation_coeffs, BoundaryModeSequence, CoeffParams, HParams,
};
use rte_inverse::elliptic::{hodge_decompose, poisson_dirichlet};
use rte_inverse::gauge::{gauge_verify, GaugePair, BOUNDARY_TOL};
use rte_inverse::grid::{ComplexField, DirectionGrid, PolarGrid, ScalarField, VectorField};
use rte_inverse::primitives::{Primitive, Profile, VectorSpec};
use rte_inverse::recon::{ReconDiagnostics, ReconParams, Reconstructor};
use rte_inverse::transport::{
    apply_t1inv, extract_boundary_data, mass_balance, solve_forward, BoundaryData, ForwardParams,
    MediumSpec, SourceSpec,
};

#[derive(Clone, Copy)]
struct Level {
    nr: usize,
    nbeta: usize,
    ntheta: usize,
}

const COARSE: Level = Level {
    nr: 32,
    nbeta: 128,
    ntheta: 32,
};
const DESK: Level = Level {
    nr: 64,
    nbeta: 256,
    ntheta: 64,
};
const FINE: Level = Level {
    nr: 128,
    nbeta: 512,
    ntheta: 64,
};

impl Level {
    fn grid(self) -> PolarGrid {
        PolarGrid::new(self.nr, self.nbeta).unwrap()
    }

    fn dirs(self) -> DirectionGrid {
        DirectionGrid::new(self.ntheta).unwrap()
    }
}

fn gauss(x: f64, y: f64, width: f64, amplitude: f64) -> Primitive {
    Primitive::Gaussian {
        center: Complex64::new(x, y),
        width,
        amplitude,
    }
}

fn profile(terms: Vec<Primitive>) -> Profile {
    Profile::new(terms).unwrap()
}

/// Gaussian attenuation with a degree-2 kernel, as in `configs/gaussian_m2.toml`.
fn medium_m2(g: PolarGrid) -> MediumSpec {
    let a = profile(vec![
        Primitive::Constant(0.6),
        gauss(0.2, -0.1, 0.1f64.sqrt(), 0.5),
    ]);
    let k0 = profile(vec![Primitive::Constant(0.2), gauss(0.0, 0.0, 1.0, 0.1)]);
    MediumSpec::new(
        a.field(g),
        vec![
            k0.field(g),
            ScalarField::constant(g, 0.1),
            ScalarField::constant(g, 0.05),
        ],
    )
    .unwrap()
}

fn f0_profile() -> Profile {
    profile(vec![gauss(0.1, 0.1, 0.06f64.sqrt(), 1.0)])
}

fn rotational() -> VectorSpec {
    VectorSpec::PerpGradient(profile(vec![gauss(-0.15, 0.05, 0.05f64.sqrt(), 0.3)]))
}

fn potential() -> VectorSpec {
    VectorSpec::Gradient(profile(vec![gauss(0.2, 0.25, 0.2, 0.4)]))
}

fn source(g: PolarGrid, f: &VectorSpec) -> SourceSpec {
    SourceSpec::new(f0_profile().field(g), f.field(g)).unwrap()
}

fn data(medium: &MediumSpec, src: &SourceSpec, dirs: DirectionGrid) -> BoundaryData {
    extract_boundary_data(
        &solve_forward(medium, src, dirs, ForwardParams::default())
            .unwrap()
            .u,
    )
}

fn rel(a: f64, b: f64) -> f64 {
    a / b
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn non_scattering() -> Outcome {
    let g = DESK.grid();
    let dirs = DESK.dirs();
    let medium = MediumSpec::absorbing(
        profile(vec![Primitive::Constant(0.4), gauss(0.2, -0.1, 0.3, 0.8)]).field(g),
    );
    let src = source(g, &rotational());
    let params = ForwardParams::default();
    let sol = solve_forward(&medium, &src, dirs, params).unwrap();
    let direct = apply_t1inv(&src.angular(dirs), &medium.a, params.h_ray(g)).unwrap();
    let diff = sol.u.max_abs_diff(&direct);
    outcome(
        diff <= 1e-12 && sol.iterations == 1,
        format!(
            "max |u - T1^-1 f| = {diff:.2e}, {} iteration(s)",
            sol.iterations
        ),
    )
}

fn mass_balance_media() -> Outcome {
    type Make = fn(PolarGrid) -> MediumSpec;
    let media: [(&str, Make); 3] = [
        ("a=1,k0=0", |g| {
            MediumSpec::absorbing(ScalarField::constant(g, 1.0))
        }),
        ("a=1,k0=0.3", |g| {
            MediumSpec::new(
                ScalarField::constant(g, 1.0),
                vec![ScalarField::constant(g, 0.3)],
            )
            .unwrap()
        }),
        ("gaussian M=2", medium_m2),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, make) in media {
        let errs: Vec<f64> = [DESK, FINE]
            .iter()
            .map(|lv| {
                let g = lv.grid();
                let m = make(g);
                let src = source(g, &rotational());
                let sol = solve_forward(&m, &src, lv.dirs(), ForwardParams::default()).unwrap();
                mass_balance(&sol.u, &extract_boundary_data(&sol.u), &m, &src).relative_error()
            })
            .collect();
        pass &= errs[0] <= 1e-3 && errs[1] < errs[0];
        parts.push(format!("{name}: {:.2e} -> {:.2e}", errs[0], errs[1]));
    }
    outcome(pass, parts.join("; "))
}

fn h_function() -> Outcome {
    let g = DESK.grid();
    let a = profile(vec![
        gauss(0.15, -0.1, 0.3, 0.4),
        gauss(-0.3, 0.2, 0.05f64.sqrt(), 0.2),
    ])
    .field(g);
    let h_line = 0.125 / g.nr() as f64;
    let diag = |ntheta: usize, h_line: f64| {
        let h = compute_h(
            &a,
            DirectionGrid::new(ntheta).unwrap(),
            HParams {
                h_line: Some(h_line),
            },
        );
        conjugation_coeffs(&h, 31, CoeffParams::default())
            .unwrap()
            .diagnostics
    };
    let base = diag(DESK.ntheta, h_line);
    let fine = diag(2 * DESK.ntheta, 0.5 * h_line);
    let (m0, m1) = (base.neg_mass(), fine.neg_mass());
    let defect = base.inverse_defect.max(fine.inverse_defect);
    outcome(
        m0 <= 1e-4 && m1 <= 0.5 * m0 && defect <= 1e-8,
        format!(
            "neg-mode mass {m0:.2e} -> {m1:.2e} ({:.1}x), alpha*beta defect {defect:.1e}",
            m0 / m1
        ),
    )
}

fn cauchy_z2() -> Outcome {
    let g = DESK.grid();
    let data = BoundaryModeSequence::from_fn(g.boundary(), 31, |p, z| {
        if p == 0 {
            z * z
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let v = bukhgeim_cauchy_grid(&data, g).unwrap();
    let err = (0..g.len())
        .map(|i| (v.get(0).values()[i] - g.point(i).powi(2)).norm())
        .fold(0.0, f64::max);
    outcome(err <= 1e-3, format!("max |(Bg)_0 - z^2| = {err:.2e}"))
}

fn relaxed() -> ReconParams {
    ReconParams {
        range_fail: f64::INFINITY,
        ..Default::default()
    }
}

fn range_of(rec: &Reconstructor, g: &BoundaryData) -> f64 {
    let gm = BoundaryModeSequence::from_data(g, rec.truncation()).unwrap();
    let mut diag = ReconDiagnostics::default();
    rec.conjugated_trace(&gm, &mut diag).unwrap();
    diag.range_residuals[0].relative
}

/// Shared state of the round-trip criteria at one grid level.
struct RoundTrip {
    level: Level,
    medium: MediumSpec,
    rec: Reconstructor,
    g_div: BoundaryData,
    setup_seconds: f64,
}

impl RoundTrip {
    fn new(level: Level) -> Self {
        let g = level.grid();
        let medium = medium_m2(g);
        let t = Instant::now();
        let rec = Reconstructor::new(&medium, level.dirs(), relaxed()).unwrap();
        let setup_seconds = t.elapsed().as_secs_f64();
        let g_div = data(&medium, &source(g, &rotational()), level.dirs());
        Self {
            level,
            medium,
            rec,
            g_div,
            setup_seconds,
        }
    }
}

fn range_condition(desk: &RoundTrip, fine: &RoundTrip) -> Outcome {
    let (r0, r1) = (
        range_of(&desk.rec, &desk.g_div),
        range_of(&fine.rec, &fine.g_div),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = desk.level.grid();
    let dirs = desk.level.dirs();
    let values = (0..g.nbeta() * dirs.len())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let random = BoundaryData::from_values(g.boundary(), dirs, values).unwrap();
    let rr = range_of(&desk.rec, &random);
    outcome(
        r0 <= 5e-2 && r1 < r0 && rr > 0.5,
        format!("smooth data {r0:.2e} -> {r1:.2e}, random data {rr:.2e}"),
    )
}

/// Relative errors of (f0, F) from the divergence-free pipeline.
fn divfree_errors(rt: &RoundTrip) -> (f64, f64, f64) {
    let g = rt.level.grid();
    let truth = source(g, &rotational());
    let t = Instant::now();
    let res = rt.rec.divfree(&rt.g_div).unwrap();
    let seconds = rt.setup_seconds + t.elapsed().as_secs_f64();
    let e0 = rel(res.f0.unwrap().sub(&truth.f0).l2_norm(), truth.f0.l2_norm());
    let ef = rel(res.f.sub(&truth.f).l2_norm(), truth.f.l2_norm());
    (e0, ef, seconds)
}

fn round_trip_divfree(desk: &RoundTrip, fine: &RoundTrip) -> (Outcome, f64) {
    let (d0, df, secs) = divfree_errors(desk);
    let (f0, ff, _) = divfree_errors(fine);
    let pass = d0 <= 0.10 && df <= 0.10 && f0 <= 0.05 && ff <= 0.05 && secs <= 600.0;
    (
        outcome(
            pass,
            format!("desk f0 {d0:.2e} F {df:.2e} ({secs:.0} s); refined f0 {f0:.2e} F {ff:.2e}"),
        ),
        df,
    )
}

fn solenoidal_blindness(desk: &RoundTrip, discretization: f64) -> Outcome {
    let g = desk.level.grid();
    let mixed = VectorSpec::Sum(vec![rotational(), potential()]);
    let g_mixed = data(&desk.medium, &source(g, &mixed), desk.level.dirs());
    let base = desk.rec.solenoidal(&desk.g_div).unwrap().f;
    let with = desk.rec.solenoidal(&g_mixed).unwrap().f;
    let change = rel(with.sub(&base).l2_norm(), base.l2_norm());
    let (_, oracle) = hodge_decompose(&mixed.field(g)).unwrap();
    let hodge = rel(with.sub(&oracle).l2_norm(), oracle.l2_norm());
    outcome(
        change <= 2.0 * discretization && hodge <= 0.10,
        format!(
            "change {change:.2e} (bound {:.2e}), vs Hodge oracle {hodge:.2e}",
            2.0 * discretization
        ),
    )
}

fn two_data(desk: &RoundTrip) -> Outcome {
    let g = desk.level.grid();
    let dirs = desk.level.dirs();
    let mixed = VectorSpec::Sum(vec![rotational(), potential()]);
    let truth = source(g, &mixed);
    let (g_full, g_iso) = rayon::join(
        || data(&desk.medium, &truth, dirs),
        || data(&desk.medium, &truth.without_vector_part(), dirs),
    );
    let res = desk.rec.twodata(&g_full, &g_iso).unwrap();
    let e0 = rel(res.f0.unwrap().sub(&truth.f0).l2_norm(), truth.f0.l2_norm());
    let ef = rel(res.f.sub(&truth.f).l2_norm(), truth.f.l2_norm());
    outcome(e0 <= 0.10 && ef <= 0.10, format!("f0 {e0:.2e}, F {ef:.2e}"))
}

/// The gauge pair of `configs/gauge.toml` at one level.
fn gauge_pair(g: PolarGrid, medium: &MediumSpec) -> GaugePair {
    let tilde = SourceSpec::new(
        profile(vec![gauss(-0.2, 0.1, 0.05f64.sqrt(), 1.0)]).field(g),
        VectorField::new(
            profile(vec![gauss(0.0, 0.0, 0.4, 0.2)]).field(g),
            ScalarField::constant(g, 0.1),
        )
        .unwrap(),
    )
    .unwrap();
    let f0 = profile(vec![gauss(0.2, 0.0, 0.2, 1.5)]).field(g);
    GaugePair::partner_of(tilde, f0, medium, BOUNDARY_TOL).unwrap()
}

fn gauge_equivalence() -> Outcome {
    // discretization level of the forward data: Richardson estimate from three levels
    let partner_data: Vec<(BoundaryData, f64)> = [COARSE, DESK, FINE]
        .iter()
        .map(|lv| {
            let g = lv.grid();
            let medium = medium_m2(g);
            let pair = gauge_pair(g, &medium);
            let (gp, gt) = rayon::join(
                || data(&medium, &pair.source, lv.dirs()),
                || data(&medium, &pair.tilde, lv.dirs()),
            );
            let disc = rel(gp.sub(&gt).unwrap().l2_norm(), gt.l2_norm());
            (gp, disc)
        })
        .collect();
    let restrict = |fine: &BoundaryData, coarse: &BoundaryData| {
        let (rb, rt) = (
            fine.boundary().len() / coarse.boundary().len(),
            fine.dirs().len() / coarse.dirs().len(),
        );
        let r = BoundaryData::from_fn(coarse.boundary(), coarse.dirs(), |j, m| {
            fine.get(rb * j, rt * m)
        });
        rel(r.sub(coarse).unwrap().l2_norm(), coarse.l2_norm())
    };
    let d01 = restrict(&partner_data[1].0, &partner_data[0].0);
    let d12 = restrict(&partner_data[2].0, &partner_data[1].0);
    let ratio = d01 / d12;
    let level = d12 * ratio / (ratio - 1.0);
    let disc = partner_data[1].1;

    let g = DESK.grid();
    let medium = medium_m2(g);
    let pair = gauge_pair(g, &medium);
    let fp = ForwardParams::default();
    let rep = gauge_verify(
        &pair.source,
        &pair.tilde,
        &medium,
        DESK.dirs(),
        fp,
        BOUNDARY_TOL,
    )
    .unwrap();
    // rotate the gradient by 90 degrees: equal norm, no longer a gradient
    let grad = pair.source.f.sub(&pair.tilde.f);
    let rot = VectorField::new(grad.y.scale(-1.0), grad.x.clone()).unwrap();
    let other = SourceSpec::new(pair.source.f0.clone(), pair.tilde.f.add(&rot)).unwrap();
    let bad = gauge_verify(&other, &pair.tilde, &medium, DESK.dirs(), fp, BOUNDARY_TOL).unwrap();
    let separation = bad.relative_l2() / rep.relative_l2();
    let converse = rep.converse_relative;
    outcome(
        disc <= level && separation >= 10.0 && converse <= 1e-12,
        format!(
            "data discrepancy {disc:.2e} vs forward discretization {level:.2e}; perturbation {separation:.0}x larger; converse {converse:.1e}"
        ),
    )
}

fn poisson_order() -> Outcome {
    let exact = |z: Complex64| (z.re - 0.5 * z.im).exp() + z.re.powi(3) * z.im;
    let lap = |z: Complex64| 1.25 * (z.re - 0.5 * z.im).exp() + 6.0 * z.re * z.im;
    let errs: Vec<f64> = [32usize, 64, 128]
        .iter()
        .map(|&nr| {
            let g = PolarGrid::new(nr, 4 * nr).unwrap();
            let rhs = ComplexField::from_fn(g, |z| lap(z).into());
            let bd = g.boundary();
            let bc: Vec<Complex64> = (0..bd.len()).map(|j| exact(bd.node(j)).into()).collect();
            let u = poisson_dirichlet(&rhs, &bc).unwrap();
            (0..g.len())
                .map(|i| (u.values()[i].re - exact(g.point(i))).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    outcome(
        orders.iter().all(|p| (1.8..=2.2).contains(p)),
        format!(
            "errors {:.2e} {:.2e} {:.2e}, orders {:.2} {:.2}",
            errs[0], errs[1], errs[2], orders[0], orders[1]
        ),
    )
}

fn main() {
    let start = Instant::now();
    let mut failures = 0;
    let mut report = |n: usize, name: &str, o: Outcome| {
        if !o.pass {
            failures += 1;
        }
        println!(
            "[{n:>2}] {} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    };
    report(1, "non-scattering exactness", non_scattering());
    report(2, "mass balance", mass_balance_media());
    report(3, "h-function validity", h_function());
    report(4, "Cauchy extension of z^2", cauchy_z2());
    let desk = RoundTrip::new(DESK);
    let fine = RoundTrip::new(FINE);
    report(5, "range condition", range_condition(&desk, &fine));
    let (o6, discretization) = round_trip_divfree(&desk, &fine);
    report(6, "divergence-free round trip", o6);
    drop(fine);
    report(
        7,
        "solenoidal blindness",
        solenoidal_blindness(&desk, discretization),
    );
    report(8, "two-data recovery", two_data(&desk));
    report(9, "gauge equivalence", gauge_equivalence());
    report(10, "Poisson order", poisson_order());
    println!(
        "acceptance: {} of 10 passed in {:.0} s",
        10 - failures,
        start.elapsed().as_secs_f64()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
