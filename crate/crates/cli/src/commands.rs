use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use num_complex::Complex64;
use rte_inverse::aanalytic::{
    bukhgeim_cauchy_grid, compute_h, conjugation_coeffs, range_residual, BoundaryModeSequence,
    CoeffParams, HParams,
};
use rte_inverse::elliptic::{gradient, hodge_decompose, poisson_dirichlet};
use rte_inverse::gauge::{gauge_potential, gauge_verify, GaugePair};
use rte_inverse::grid::{ComplexField, DirectionGrid, PolarGrid, ScalarField, VectorField};
use rte_inverse::io::{
    boundary_data_csv, mode_stack_csv, read_boundary_data, scalar_field_csv, write_string,
};
use rte_inverse::recon::{ReconParams, ReconResult, Reconstructor};
use rte_inverse::transport::{
    apply_t1inv, extract_boundary_data, mass_balance, solve_forward, BoundaryData, ForwardParams,
    MediumSpec, SourceSpec,
};

use crate::config::LoadedConfig;
use crate::report::Report;

/// Wrong combination of flags or inputs.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "usage error: {}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

/// Number of mode-stack entries written next to a reconstruction.
const MODES_WRITTEN: usize = 4;

fn prepare_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)
        .with_context(|| format!("cannot create output directory {}", out.display()))
}

fn write(out: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = out.join(name);
    write_string(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

fn load_data(path: &Path) -> Result<BoundaryData> {
    let file = std::fs::File::open(path)
        .with_context(|| format!("cannot open data file {}", path.display()))?;
    read_boundary_data(file).map_err(|e| UsageError(format!("{}: {e}", path.display())).into())
}

fn medium_summary(r: &mut Report, medium: &MediumSpec) {
    r.kv("medium.degree", medium.degree());
    r.kv("medium.min_a", medium.a.min());
    r.kv("medium.min_sigma_a", medium.sigma_a().min());
    r.kv("medium.max_k0", medium.k(0).max_abs());
}

pub fn forward(cfg: &LoadedConfig, out: &Path) -> Result<()> {
    prepare_out(out)?;
    let medium = cfg.medium()?;
    let source = cfg.source()?;
    let dirs = cfg.directions()?;
    let params = cfg.forward_params();
    let start = Instant::now();
    // the two-data variant also needs the data of the isotropic part alone
    let want_g0 = cfg.config.reconstruct.variant.as_deref() == Some("twodata");
    let (sol, sol0) = rayon::join(
        || solve_forward(&medium, &source, dirs, params),
        || want_g0.then(|| solve_forward(&medium, &source.without_vector_part(), dirs, params)),
    );
    let sol = sol?;
    let g0 = sol0.transpose()?.map(|s| extract_boundary_data(&s.u));
    let elapsed = start.elapsed();
    let g = extract_boundary_data(&sol.u);
    let balance = mass_balance(&sol.u, &g, &medium, &source);
    let manifest = cfg.manifest("forward");
    write(out, "g.csv", &boundary_data_csv(&g, &manifest))?;
    if let Some(g0) = &g0 {
        write(out, "g0.csv", &boundary_data_csv(g0, &manifest))?;
    }

    let mut r = Report::new(&manifest);
    r.section("grid");
    let gr = &cfg.config.grid;
    r.kv("nr", gr.nr);
    r.kv("nbeta", gr.nbeta);
    r.kv("ntheta", gr.ntheta);
    r.kv("h_ray", params.h_ray(medium.grid()));
    r.section("medium");
    medium_summary(&mut r, &medium);
    r.section("source");
    r.kv("f0.l2", source.f0.l2_norm());
    r.kv("F.l2", source.f.l2_norm());
    r.section("solver");
    r.kv("tol", params.tol);
    r.kv("max_iter", params.max_iter);
    r.kv("iterations", sol.iterations);
    r.kv("last_update", sol.updates.last().copied().unwrap_or(0.0));
    r.section("mass_balance");
    r.kv("boundary_flux", balance.boundary_flux);
    r.kv("volume_source", balance.volume_source);
    r.kv("relative_error", balance.relative_error());
    r.section("data");
    r.kv("g.max_abs", g.max_abs());
    r.kv("g.l2", g.l2_norm());
    r.kv("file", "g.csv");
    if g0.is_some() {
        r.kv("isotropic_file", "g0.csv");
    }
    write(out, "manifest.txt", &r.finish())?;
    write(
        out,
        "timings.txt",
        &format!("forward_seconds = {:.3}\n", elapsed.as_secs_f64()),
    )?;
    println!(
        "forward: {} iterations, mass balance {:.2e}, wrote {}",
        sol.iterations,
        balance.relative_error(),
        out.join("g.csv").display()
    );
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Solenoidal,
    Divfree,
    Twodata,
    Remark,
}

impl Variant {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "solenoidal" => Variant::Solenoidal,
            "divfree" => Variant::Divfree,
            "twodata" => Variant::Twodata,
            "remark" => Variant::Remark,
            other => {
                return usage(format!(
                    "unknown variant `{other}` (solenoidal, divfree, twodata, remark)"
                ))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Solenoidal => "solenoidal",
            Variant::Divfree => "divfree",
            Variant::Twodata => "twodata",
            Variant::Remark => "remark",
        }
    }
}

pub fn recon_params(cfg: &LoadedConfig, seed: u64) -> ReconParams {
    let noise = cfg.config.solver.noise_std;
    ReconParams {
        n: cfg.config.grid.n,
        noise: (noise > 0.0).then_some((noise, seed)),
        ..Default::default()
    }
}

/// Output of one reconstruction with its ground-truth errors.
pub struct ReconOutcome {
    pub result: ReconResult,
    pub metrics: Vec<(String, f64)>,
    pub mask: Option<Vec<bool>>,
}

fn masked_rel(got: &VectorField, truth: &VectorField, mask: &[bool]) -> f64 {
    let num = got.sub(truth).l2_norm_masked(|i| mask[i]);
    let den = truth.l2_norm_masked(|i| mask[i]);
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

pub fn run_variant(
    cfg: &LoadedConfig,
    variant: Variant,
    g: &BoundaryData,
    g2: Option<&BoundaryData>,
    seed: u64,
    truth: Option<&SourceSpec>,
) -> Result<ReconOutcome> {
    let medium = cfg.medium()?;
    let dirs = g.dirs();
    if dirs != cfg.directions()? || g.boundary().len() != cfg.config.grid.nbeta {
        return usage("data file grid does not match the config grid");
    }
    if variant == Variant::Remark || variant == Variant::Twodata {
        medium.check_subcritical(ReconParams::default().delta)?;
    }
    let rec = Reconstructor::new(&medium, dirs, recon_params(cfg, seed))?;
    let mut mask = None;
    let result = match variant {
        Variant::Solenoidal => rec.solenoidal(g)?,
        Variant::Divfree => rec.divfree(g)?,
        Variant::Twodata => {
            let Some(g2) = g2 else {
                return usage("variant twodata needs --data2 with the isotropic-source data");
            };
            rec.twodata(g, g2)?
        }
        Variant::Remark => {
            let m = cfg.mask()?;
            let masked = rec.f_where_f0_zero(g, &m)?;
            let modes = rec.interior_modes(g)?;
            mask = Some(m);
            ReconResult {
                modes: modes.with_zeroth(ComplexField::zeros(medium.grid())),
                f0: None,
                f: masked.field,
                diagnostics: modes.diagnostics,
            }
        }
    };
    let mut metrics = Vec::new();
    if let Some(t) = truth {
        match variant {
            Variant::Solenoidal => {
                let (_, fs) = hodge_decompose(&t.f)?;
                for m in result.metrics(None, &fs) {
                    metrics.push((format!("Fs{}", m.name.trim_start_matches('F')), m.rel_l2));
                }
            }
            Variant::Remark => {
                let m = mask.as_ref().expect("set above");
                metrics.push(("F_on_mask".to_string(), masked_rel(&result.f, &t.f, m)));
            }
            _ => {
                for m in result.metrics(Some(&t.f0), &t.f) {
                    metrics.push((m.name, m.rel_l2));
                }
            }
        }
    }
    Ok(ReconOutcome {
        result,
        metrics,
        mask,
    })
}

pub struct ReconstructArgs<'a> {
    pub variant: Option<&'a str>,
    pub data: &'a Path,
    pub data2: Option<&'a Path>,
    pub seed: u64,
    pub blind: bool,
}

pub fn reconstruct(cfg: &LoadedConfig, out: &Path, args: ReconstructArgs) -> Result<()> {
    let name = args
        .variant
        .or(cfg.config.reconstruct.variant.as_deref())
        .unwrap_or("solenoidal");
    let variant = Variant::parse(name)?;
    if variant == Variant::Twodata && args.data2.is_none() {
        return usage("variant twodata needs --data2 with the isotropic-source data");
    }
    prepare_out(out)?;
    let g = load_data(args.data)?;
    let g2 = args.data2.map(load_data).transpose()?;
    let truth = if cfg.has_source() && !args.blind {
        Some(cfg.source()?)
    } else {
        None
    };
    let start = Instant::now();
    let outcome = run_variant(cfg, variant, &g, g2.as_ref(), args.seed, truth.as_ref())?;
    let elapsed = start.elapsed();
    let res = &outcome.result;
    let manifest = cfg.manifest(&format!("reconstruct variant={}", variant.name()));

    let vector_name = if variant == Variant::Solenoidal {
        "Fs"
    } else {
        "F"
    };
    if let Some(f0) = &res.f0 {
        write(out, "f0.csv", &scalar_field_csv(f0, &manifest))?;
    }
    write(
        out,
        &format!("{vector_name}_x.csv"),
        &scalar_field_csv(&res.f.x, &manifest),
    )?;
    write(
        out,
        &format!("{vector_name}_y.csv"),
        &scalar_field_csv(&res.f.y, &manifest),
    )?;
    let depth = res.modes.depth().min(MODES_WRITTEN);
    write(
        out,
        "modes.csv",
        &mode_stack_csv(&res.modes.modes()[..=depth], &manifest),
    )?;

    let mut r = Report::new(&manifest);
    r.section("inputs");
    r.kv("variant", variant.name());
    r.kv("data", args.data.display());
    if let Some(p) = args.data2 {
        r.kv("data2", p.display());
    }
    r.kv(
        "truth",
        if truth.is_some() {
            "config source"
        } else {
            "none (blind)"
        },
    );
    r.section("parameters");
    r.kv("truncation_N", res.diagnostics.truncation);
    r.kv("noise_std", cfg.config.solver.noise_std);
    r.kv("noisy_data", res.diagnostics.noisy);
    r.kv("seed", args.seed);
    r.kv(
        "zeroth_mode",
        if variant == Variant::Solenoidal {
            "u0 - phi"
        } else {
            "u0"
        },
    );
    r.kv("modes_written", format!("0..-{depth}"));
    if let Some(m) = &outcome.mask {
        r.kv("mask_nodes", m.iter().filter(|&&b| b).count());
    }
    r.section("diagnostics");
    for (i, rr) in res.diagnostics.range_residuals.iter().enumerate() {
        r.kv(&format!("range_residual[{i}].relative"), rr.relative);
        r.kv(&format!("range_residual[{i}].weighted_abs"), rr.absolute);
    }
    r.kv("neg_mode_mass", res.diagnostics.neg_mass);
    r.kv("inverse_defect", res.diagnostics.inverse_defect);
    for (i, c) in res.diagnostics.cascade_residuals.iter().enumerate() {
        r.kv(&format!("cascade_residual[{i}].l2"), c);
    }
    r.kv("solenoidality.l2(Re d f1)", res.solenoidality().l2_norm());
    for w in &res.diagnostics.warnings {
        r.kv("warning", w);
    }
    if !outcome.metrics.is_empty() {
        r.section("errors (relative L2, area weight r dr dbeta)");
        r.kv(
            "grid",
            format!(
                "{}x{}x{}",
                cfg.config.grid.nr, cfg.config.grid.nbeta, cfg.config.grid.ntheta
            ),
        );
        for (k, v) in &outcome.metrics {
            r.kv(&format!("rel_l2.{k}"), v);
        }
    }
    write(out, "report.txt", &r.finish())?;
    write(
        out,
        "timings.txt",
        &format!("reconstruct_seconds = {:.3}\n", elapsed.as_secs_f64()),
    )?;
    print!("reconstruct ({}):", variant.name());
    for (k, v) in &outcome.metrics {
        print!(" {k}={v:.3e}");
    }
    println!(
        " range_residual={:.3e}",
        res.diagnostics
            .range_residuals
            .first()
            .map_or(0.0, |r| r.relative)
    );
    Ok(())
}

/// The gauge partner of the config source together with its verification.
pub struct GaugeOutcome {
    pub pair: GaugePair,
    pub report: rte_inverse::gauge::GaugeReport,
    /// Data change caused by a rotated copy of the gradient term, or `None` when that term vanishes.
    pub perturbed: Option<rte_inverse::gauge::GaugeReport>,
}

pub fn gauge_run(cfg: &LoadedConfig) -> Result<GaugeOutcome> {
    let medium = cfg.medium()?;
    let tilde = cfg.source()?;
    let dirs = cfg.directions()?;
    let tol = cfg
        .config
        .gauge
        .as_ref()
        .map_or(rte_inverse::gauge::BOUNDARY_TOL, |g| g.boundary_tol);
    let f0 = cfg.gauge_f0()?.unwrap_or_else(|| tilde.f0.clone());
    let pair = GaugePair::partner_of(tilde, f0, &medium, tol)?;
    let fp = cfg.forward_params();
    let report = gauge_verify(&pair.source, &pair.tilde, &medium, dirs, fp, tol)?;
    let grad = pair.source.f.sub(&pair.tilde.f);
    let perturbed = if grad.l2_norm() > 0.0 {
        let rot = VectorField::new(grad.y.scale(-1.0), grad.x.clone())?;
        let other = SourceSpec::new(pair.source.f0.clone(), pair.tilde.f.add(&rot))?;
        Some(gauge_verify(&other, &pair.tilde, &medium, dirs, fp, tol)?)
    } else {
        None
    };
    Ok(GaugeOutcome {
        pair,
        report,
        perturbed,
    })
}

pub fn gauge(cfg: &LoadedConfig, out: &Path) -> Result<()> {
    prepare_out(out)?;
    let o = gauge_run(cfg)?;
    let manifest = cfg.manifest("gauge");
    write(
        out,
        "F_partner_x.csv",
        &scalar_field_csv(&o.pair.source.f.x, &manifest),
    )?;
    write(
        out,
        "F_partner_y.csv",
        &scalar_field_csv(&o.pair.source.f.y, &manifest),
    )?;
    write(out, "psi.csv", &scalar_field_csv(&o.pair.psi, &manifest))?;
    let mut r = Report::new(&manifest);
    r.section("gauge pair");
    r.kv("psi.max_abs", o.pair.psi.max_abs());
    r.kv("grad_psi.l2", gradient(&o.pair.psi).l2_norm());
    r.section("data discrepancy (partner vs tilde)");
    r.kv("sup", o.report.data_sup);
    r.kv("l2", o.report.data_l2);
    r.kv("relative_sup", o.report.relative_sup());
    r.kv("relative_l2", o.report.relative_l2());
    r.kv(
        "iterations",
        format!("{} {}", o.report.iterations.0, o.report.iterations.1),
    );
    r.section("converse identity");
    r.kv("l2(F - F_tilde - grad psi)", o.report.converse_residual);
    r.kv("relative", o.report.converse_relative);
    if let Some(p) = &o.perturbed {
        r.section("non-gradient perturbation of equal norm");
        r.kv("l2", p.data_l2);
        r.kv("relative_l2", p.relative_l2());
        let ratio = if o.report.data_l2 > 0.0 {
            p.data_l2 / o.report.data_l2
        } else {
            f64::INFINITY
        };
        r.kv("ratio_to_gauge_discrepancy", ratio);
    }
    write(out, "gauge_report.txt", &r.finish())?;
    println!(
        "gauge: data discrepancy {:.3e} (relative {:.3e}), converse residual {:.3e}",
        o.report.data_l2,
        o.report.relative_l2(),
        o.report.converse_residual
    );
    Ok(())
}

/// `u* = exp(x - y/2) + x^3 y`, with `Delta u* = 1.25 exp(x - y/2) + 6 x y`.
fn manufactured(z: Complex64) -> (f64, f64) {
    let e = (z.re - 0.5 * z.im).exp();
    (e + z.re.powi(3) * z.im, 1.25 * e + 6.0 * z.re * z.im)
}

/// Max-norm error of the Poisson solver on the manufactured solution.
pub fn poisson_error(grid: PolarGrid) -> Result<f64> {
    let rhs = ComplexField::from_fn(grid, |z| manufactured(z).1.into());
    let bd = grid.boundary();
    let bc: Vec<Complex64> = (0..bd.len())
        .map(|j| manufactured(bd.node(j)).0.into())
        .collect();
    let u = poisson_dirichlet(&rhs, &bc)?;
    Ok((0..grid.len())
        .map(|i| (u.values()[i].re - manufactured(grid.point(i)).0).abs())
        .fold(0.0, f64::max))
}

fn default_variant(cfg: &LoadedConfig) -> Variant {
    match cfg.config.reconstruct.variant.as_deref() {
        Some(v) => Variant::parse(v).unwrap_or(Variant::Solenoidal),
        None if cfg.source_is_divergence_free() => Variant::Divfree,
        None => Variant::Solenoidal,
    }
}

/// One round trip (forward then reconstruct) at the config's grid.
pub fn round_trip(cfg: &LoadedConfig, variant: Variant, seed: u64) -> Result<ReconOutcome> {
    let medium = cfg.medium()?;
    let source = cfg.source()?;
    let dirs = cfg.directions()?;
    let fp = cfg.forward_params();
    let g = extract_boundary_data(&solve_forward(&medium, &source, dirs, fp)?.u);
    let g_iso = if variant == Variant::Twodata {
        Some(extract_boundary_data(
            &solve_forward(&medium, &source.without_vector_part(), dirs, fp)?.u,
        ))
    } else {
        None
    };
    run_variant(cfg, variant, &g, g_iso.as_ref(), seed, Some(&source))
}

pub fn convergence(cfg: &LoadedConfig, out: &Path, levels: u32, seed: u64) -> Result<()> {
    if levels < 2 {
        return usage("convergence needs --levels of at least 2");
    }
    prepare_out(out)?;
    let manifest = cfg.manifest("convergence");
    let mut csv = String::new();
    for c in &manifest {
        let _ = writeln!(csv, "# {c}");
    }
    csv.push_str("study,level,nr,nbeta,ntheta,quantity,value\n");
    let mut r = Report::new(&manifest);
    r.section("poisson manufactured solution (max norm)");
    let mut prev: Option<f64> = None;
    for l in 0..levels.max(3) {
        let c = cfg.refined(l);
        let grid = c.polar_grid()?;
        let err = poisson_error(grid)?;
        let gr = &c.config.grid;
        let _ = writeln!(
            csv,
            "poisson,{l},{},{},{},max_error,{err}",
            gr.nr, gr.nbeta, gr.ntheta
        );
        r.kv(&format!("level{l}.max_error"), err);
        if let Some(p) = prev {
            r.kv(&format!("level{l}.order"), (p / err).log2());
        }
        prev = Some(err);
    }
    if cfg.has_source() {
        let variant = default_variant(cfg);
        r.section(&format!("round trip ({}), relative L2", variant.name()));
        for l in 0..levels {
            let c = cfg.refined(l);
            let outcome = round_trip(&c, variant, seed)?;
            let gr = &c.config.grid;
            for (k, v) in &outcome.metrics {
                let _ = writeln!(
                    csv,
                    "roundtrip,{l},{},{},{},rel_l2.{k},{v}",
                    gr.nr, gr.nbeta, gr.ntheta
                );
                r.kv(&format!("level{l}.rel_l2.{k}"), v);
            }
            println!(
                "convergence level {l}: {}x{}x{} done",
                gr.nr, gr.nbeta, gr.ntheta
            );
        }
    }
    write(out, "convergence.csv", &csv)?;
    write(out, "convergence_report.txt", &r.finish())?;
    println!(
        "convergence: wrote {}",
        out.join("convergence.csv").display()
    );
    Ok(())
}

/// Fast internal consistency checks on a small grid; returns the number of failures.
pub fn selftest() -> Result<usize> {
    let mut failures = 0;
    let mut check = |name: &str, value: f64, limit: f64| {
        let ok = value.is_finite() && value <= limit;
        println!(
            "{} {name}: {value:.3e} (limit {limit:.1e})",
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            failures += 1;
        }
    };
    let grid = PolarGrid::new(32, 128)?;
    let dirs = DirectionGrid::new(32)?;

    let errs: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| poisson_error(PolarGrid::new(n, 2 * n)?))
        .collect::<Result<_>>()?;
    let order = (errs[1] / errs[2]).log2();
    check("poisson order deviation from 2", (order - 2.0).abs(), 0.2);

    let gauss = |c: Complex64, w: f64| move |z: Complex64| (-(z - c).norm_sqr() / (w * w)).exp();
    let a = ScalarField::from_fn(grid, |z| {
        0.5 + 0.3 * gauss(Complex64::new(0.2, 0.0), 0.4)(z)
    });
    let absorbing = MediumSpec::absorbing(a.clone());
    let source = SourceSpec::isotropic(ScalarField::from_fn(
        grid,
        gauss(Complex64::new(0.1, 0.1), 0.25),
    ));
    let fp = ForwardParams::default();
    let sol = solve_forward(&absorbing, &source, dirs, fp)?;
    let direct = apply_t1inv(&source.angular(dirs), &absorbing.a, fp.h_ray(grid))?;
    check(
        "non-scattering exactness",
        sol.u.max_abs_diff(&direct),
        1e-12,
    );

    let h = compute_h(&a, dirs, HParams::default());
    let coeffs = conjugation_coeffs(&h, 12, CoeffParams::default())?;
    check("negative mode mass", coeffs.diagnostics.neg_mass(), 1e-2);
    check(
        "alpha * beta defect",
        coeffs.diagnostics.inverse_defect,
        1e-8,
    );

    let z2 =
        BoundaryModeSequence::from_fn(
            grid.boundary(),
            2,
            |p, z| if p == 0 { z * z } else { 0.0.into() },
        );
    let v = bukhgeim_cauchy_grid(&z2, grid)?;
    let err = (0..grid.len())
        .map(|i| (v.get(0).values()[i] - grid.point(i).powi(2)).norm())
        .fold(0.0, f64::max);
    check("Bukhgeim-Cauchy of z^2", err, 1e-3);

    let g = extract_boundary_data(&sol.u);
    let gm = BoundaryModeSequence::from_data(&g, dirs.max_modes())?;
    check(
        "range residual of transport data",
        range_residual(&gm.shift(1)?).relative,
        0.2,
    );

    let medium = MediumSpec::new(
        a,
        vec![
            ScalarField::constant(grid, 0.1),
            ScalarField::constant(grid, 0.05),
        ],
    )?;
    let sol = solve_forward(&medium, &source, dirs, fp)?;
    let g = extract_boundary_data(&sol.u);
    let balance = mass_balance(&sol.u, &g, &medium, &source);
    check("mass balance", balance.relative_error(), 1e-2);
    let rec = Reconstructor::new(&medium, dirs, ReconParams::default())?;
    let res = rec.divfree(&g)?;
    let m = res.metrics(Some(&source.f0), &VectorField::zeros(grid));
    check("divfree round trip f0", m[0].rel_l2, 0.2);

    let psi = ScalarField::from_fn(grid, gauss(Complex64::new(0.0, 0.2), 0.3));
    let (_, fs) = hodge_decompose(&gradient(&psi))?;
    check(
        "hodge of a gradient",
        fs.l2_norm() / gradient(&psi).l2_norm(),
        5e-2,
    );
    let f0 = ScalarField::from_fn(grid, gauss(Complex64::new(-0.1, 0.0), 0.25));
    check(
        "gauge potential vanishes on boundary",
        gauge_potential(&f0, &ScalarField::zeros(grid), &medium, 1e-4).map_or(1.0, |_| 0.0),
        0.0,
    );
    Ok(failures)
}
