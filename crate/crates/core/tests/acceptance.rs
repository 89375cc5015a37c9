//! Acceptance criteria. Each test writes one `criterion N: PASS|FAIL` line to
//! stderr (bypassing the test harness capture) and then asserts it.

use std::io::Write;

use lorpe::baselines::legendre_osde_raw;
use lorpe::lorpe::{effective_kernel, estimate_on_grid, evaluate_raw};
use lorpe::orthopoly::closed_form_gegenbauer;
use lorpe::quadrature::{integrate_panels, linspace, logspace};
use lorpe::simlab::{
    mise_study, oracle_h_grid, oracle_m_grid, oracle_search, DistributionSpec, EstimatorSpec, OracleKind, OracleResult,
    StudyContext,
};
use lorpe::tuning::{loo_value, plug_in, plus_i_value, CvPolicy, CvTarget, Criterion, DegreeRule, FitPoint};
use lorpe::{BoundaryMode, Kernel, LorpeConfig, PolySystem, Support, Taper};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const REPS: usize = 500;
const SEED: u64 = 2024;

fn report(id: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    writeln!(err, "criterion {id}: {verdict} {detail}").unwrap();
}

fn note(id: u32, detail: &str) {
    let mut err = std::io::stderr().lock();
    writeln!(err, "criterion {id}: note {detail}").unwrap();
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn lorpe_cell(h: f64, degree: f64) -> EstimatorSpec {
    EstimatorSpec::Lorpe { kernel: Kernel::quadweight(), h, degree, mode: BoundaryMode::ClipPolys }
}

fn search(spec: DistributionSpec, kind: OracleKind, h_grid: &[f64]) -> OracleResult {
    let ctx = StudyContext::new(spec, 100);
    oracle_search(&ctx, kind, h_grid, &oracle_m_grid(), REPS, SEED).unwrap()
}

#[test]
fn criterion_01_exp1_oracle_cell() {
    let ctx = StudyContext::new(DistributionSpec::Exp1, 100);
    let r = mise_study(&ctx, &lorpe_cell(4.1, 2.0), REPS, SEED).unwrap();
    let pass = within(r.log10_mise, -2.265, 0.08);
    report(1, pass, &format!("log10 MISE {:.3} (se {:.3}) target -2.265 +- 0.08", r.log10_mise, r.se));
    assert!(pass);
}

#[test]
fn criterion_02_normal_oracle() {
    let ctx = StudyContext::new(DistributionSpec::StdNormal, 100);
    let lorpe = mise_study(&ctx, &lorpe_cell(11.4, 19.0), REPS, SEED).unwrap();
    let kde = search(
        DistributionSpec::StdNormal,
        OracleKind::Kde { kernel: Kernel::quadweight(), mirror: false },
        &logspace(8.3 / 2.0, 8.3 * 2.0, 9),
    );
    let pass_l = within(lorpe.log10_mise, -2.441, 0.08);
    let pass_k = within(kde.best.log10_mise, -2.440, 0.08);
    report(
        2,
        pass_l && pass_k,
        &format!(
            "lorpe (19, 11.4) {:.3} target -2.441 +- 0.08; kde family best (M={}, h={:.2}) {:.3} target -2.440 +- 0.08",
            lorpe.log10_mise, kde.best.degree, kde.best.h, kde.best.log10_mise
        ),
    );
    assert!(pass_l && pass_k);
}

#[test]
fn criterion_03_orderings() {
    let exp = StudyContext::new(DistributionSpec::Exp1, 100);
    let lorpe_exp = mise_study(&exp, &lorpe_cell(4.1, 2.0), REPS, SEED).unwrap();
    let kde_exp = search(
        DistributionSpec::Exp1,
        OracleKind::Kde { kernel: Kernel::quadweight(), mirror: false },
        &logspace(0.48 / 4.0, 0.48 * 4.0, 13),
    );
    let gap = kde_exp.best.log10_mise - lorpe_exp.log10_mise;
    let lorpe_tn = search(
        DistributionSpec::TruncNormal0,
        OracleKind::Lorpe { kernel: Kernel::quadweight(), mode: BoundaryMode::ClipPolys },
        &logspace(1.2 / 2.0, 1.2 * 2.0, 9),
    );
    let kde_tn = search(
        DistributionSpec::TruncNormal0,
        OracleKind::Kde { kernel: Kernel::quadweight(), mirror: true },
        &logspace(9.7 / 2.0, 9.7 * 2.0, 9),
    );
    let pass_gap = gap >= 0.6;
    let pass_mirror = kde_tn.best.log10_mise < lorpe_tn.best.log10_mise;
    report(
        3,
        pass_gap && pass_mirror,
        &format!(
            "exp1 lorpe {:.3} vs kde family best (M={}, h={:.2}) {:.3}, gap {:.3} (need >= 0.6); \
             truncnorm0 kde-mirror best (M={}, h={:.2}) {:.3} vs lorpe best (M={}, h={:.2}) {:.3}",
            lorpe_exp.log10_mise,
            kde_exp.best.degree,
            kde_exp.best.h,
            kde_exp.best.log10_mise,
            gap,
            kde_tn.best.degree,
            kde_tn.best.h,
            kde_tn.best.log10_mise,
            lorpe_tn.best.degree,
            lorpe_tn.best.h,
            lorpe_tn.best.log10_mise,
        ),
    );
    assert!(pass_gap && pass_mirror);
}

#[test]
fn criterion_04_plugin() {
    let ctx = StudyContext::new(DistributionSpec::Exp1, 100);
    let run = |rule| {
        mise_study(&ctx, &EstimatorSpec::LorpePlugin { kernel: Kernel::quadweight(), rule }, REPS, SEED).unwrap()
    };
    let literal = run(DegreeRule::Literal);
    for (name, rule) in [("kernel-order", DegreeRule::KernelOrder), ("even-degree", DegreeRule::EvenDegree)] {
        let r = run(rule);
        note(4, &format!("degree rule {name}: log10 MISE {:.3} (se {:.3})", r.log10_mise, r.se));
    }
    let pass = within(literal.log10_mise, -2.239, 0.12);
    let mean_h = literal.selections.iter().map(|s| s.0).sum::<f64>() / literal.selections.len() as f64;
    report(
        4,
        pass,
        &format!(
            "plug-in (literal degree rule) log10 MISE {:.3} (se {:.3}, mean h {:.2}) target -2.239 +- 0.12",
            literal.log10_mise, literal.se, mean_h
        ),
    );
    assert!(pass);
}

fn keff_moments(kernel: Kernel, degree: usize) -> (Vec<f64>, f64) {
    let cfg = LorpeConfig::new(1.0, degree as f64, kernel, Support::real_line()).unwrap();
    let a = kernel.effective_half_width();
    let panels = if kernel.is_compact() { 8 } else { 96 };
    let keff = |u: f64| effective_kernel(&cfg, 0.0, &[u]).unwrap()[0];
    let moments = (0..=degree + 2)
        .map(|j| integrate_panels(-a, a, panels, 32, |u| u.powi(j as i32) * keff(u)))
        .collect();
    let us: Vec<f64> = linspace(0.01, 0.99 * a.min(6.0), 50);
    let pos = effective_kernel(&cfg, 0.0, &us).unwrap();
    let neg = effective_kernel(&cfg, 0.0, &us.iter().map(|u| -u).collect::<Vec<_>>()).unwrap();
    let asym = pos.iter().zip(&neg).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    (moments, asym)
}

#[test]
fn criterion_05_effective_kernel_properties() {
    let mut failures = Vec::new();
    for kernel in [Kernel::gaussian(), Kernel::epanechnikov()] {
        for m in 0..=8usize {
            let (mu, asym) = keff_moments(kernel, m);
            let last_zero = if m % 2 == 1 { m } else { m + 1 };
            let order = last_zero + 1;
            if (mu[0] - 1.0).abs() > 1e-8 {
                failures.push(format!("{} M={m}: mass {}", kernel.name(), mu[0]));
            }
            if asym > 1e-10 {
                failures.push(format!("{} M={m}: asymmetry {asym:e}", kernel.name()));
            }
            for (j, v) in mu.iter().enumerate().take(last_zero + 1).skip(1) {
                if v.abs() > 1e-6 {
                    failures.push(format!("{} M={m}: mu_{j} = {v:e}", kernel.name()));
                }
            }
            if mu[order].abs() < 1e-6 {
                failures.push(format!("{} M={m}: mu_{order} vanishes", kernel.name()));
            }
        }
    }
    let pass = failures.is_empty();
    report(5, pass, &format!("M 0..8, gaussian and epanechnikov; failures: {failures:?}"));
    assert!(pass);
}

#[test]
fn criterion_06_large_bandwidth_is_legendre_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let sample: Vec<f64> = (0..200).map(|_| rng.random::<f64>().powf(1.5)).collect();
    let grid = linspace(0.0, 1.0, 101);
    let support = Support::new(0.0, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for m in 0..=6usize {
        let cfg = LorpeConfig::new(1e6, m as f64, Kernel::gaussian(), support).unwrap();
        let est = estimate_on_grid(&sample, &cfg, &grid).unwrap();
        let osde = legendre_osde_raw(&sample, 0.0, 1.0, m, &grid).unwrap();
        for (a, b) in est.raw.iter().zip(&osde) {
            worst = worst.max((a - b).abs());
        }
    }
    let pass = worst <= 1e-6;
    report(6, pass, &format!("h = 1e6, M 0..6: sup |lorpe - osde| = {worst:.3e} (need <= 1e-6)"));
    assert!(pass);
}

#[test]
fn criterion_07_beta_kernel_systems_are_gegenbauer() {
    let kernels = [
        (Kernel::epanechnikov(), 1.5),
        (Kernel::biweight(), 2.5),
        (Kernel::triweight(), 3.5),
        (Kernel::quadweight(), 4.5),
    ];
    let mut worst: f64 = 0.0;
    for (kernel, alpha) in kernels {
        let sys = PolySystem::build(kernel, -5.0, 5.0, 6).unwrap();
        for k in 0..=6 {
            let got = sys.monomial_coefficients(k).unwrap();
            let want = closed_form_gegenbauer(alpha, k);
            let scale = want.iter().fold(0.0f64, |m, w| m.max(w.abs()));
            for (g, w) in got.iter().zip(&want) {
                let err = if *w != 0.0 { ((g - w) / w).abs() } else { g.abs() / scale };
                worst = worst.max(err);
            }
        }
    }
    let pass = worst <= 1e-8;
    report(7, pass, &format!("degrees 0..6: worst relative coefficient error {worst:.3e} (need <= 1e-8)"));
    assert!(pass);
}

#[test]
fn criterion_08_silverman_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let sample: Vec<f64> = (0..250).map(|_| rng.random::<f64>() * 3.0 + rng.random::<f64>()).collect();
    let p = plug_in(&sample, Kernel::gaussian(), &[2], DegreeRule::KernelOrder).unwrap();
    let c = p.h_hat / (p.sigma * (sample.len() as f64).powf(-0.2));
    let pass = within(c, 1.0593, 0.001);
    report(8, pass, &format!("gaussian r=2 constant {c:.5} target 1.0593 +- 0.001"));
    assert!(pass);
}

#[test]
fn criterion_09_leave_one_out_identity() {
    let kernels = [Kernel::gaussian(), Kernel::epanechnikov(), Kernel::quadweight(), Kernel::uniform()];
    let supports = [Support::real_line(), Support::new(0.0, f64::INFINITY).unwrap(), Support::new(-1.0, 2.0).unwrap()];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let kernel = kernels[rng.random_range(0..kernels.len())];
        let support = supports[rng.random_range(0..supports.len())];
        let n = rng.random_range(2..40);
        let sample: Vec<f64> = (0..n).map(|_| rng.random_range(-0.9..1.9_f64).max(0.0)).collect();
        let i = rng.random_range(0..n);
        let x = rng.random_range(0.0..1.8);
        let h = rng.random_range(0.1..2.0);
        let m = rng.random_range(0.0..8.0);
        let cfg = LorpeConfig::new(h, m, kernel, support).unwrap();
        let full = evaluate_raw(&sample, x, &cfg).unwrap();
        let plus = plus_i_value(&sample, i, x, &cfg).unwrap();
        let loo = loo_value(&sample, i, x, &cfg).unwrap();
        let nf = n as f64;
        let err = (full - plus - (nf - 1.0) / nf * loo).abs() / full.abs().max(1.0);
        worst = worst.max(err);
    }
    let pass = worst <= 1e-12;
    report(9, pass, &format!("100 random cases: worst residual {worst:.3e} (need <= 1e-12)"));
    assert!(pass);
}

#[test]
fn criterion_10_taper_degrees_of_freedom() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let m = rng.random_range(0.0..12.0);
        let taper = Taper::from_degree(m).unwrap();
        let dof = taper.weights().iter().map(|t| t * t).sum::<f64>() - 1.0;
        worst = worst.max((dof - m).abs()).max((taper.effective_dof() - m).abs());
    }
    let pass = worst <= 1e-12;
    report(10, pass, &format!("50 random M in [0, 12]: worst |sum t^2 - 1 - M| {worst:.3e} (need <= 1e-12)"));
    assert!(pass);
}

fn cv_mise(ctx: &StudyContext, reps: usize, seed: u64, target: CvTarget) -> (f64, f64) {
    let criteria = [Criterion::Rlcv { alpha: 0.5 }, Criterion::Lscv];
    let policy = CvPolicy::new(FitPoint::NearestGrid, target);
    let per_rep: Vec<_> = (0..reps as u64)
        .into_par_iter()
        .map(|r| ctx.cv_reps(Kernel::quadweight(), &ctx.sample(seed, r), &criteria, policy).unwrap())
        .collect();
    let mean = |c: usize| (per_rep.iter().map(|v| v[c].ise).sum::<f64>() / reps as f64).log10();
    (mean(0), mean(1))
}

#[test]
fn criterion_11_cv_tracks_oracle() {
    const N: usize = 1000;
    const CV_REPS: usize = 300;
    let ctx = StudyContext::new(DistributionSpec::Exp1, N);
    let oracle = oracle_search(
        &ctx,
        OracleKind::Lorpe { kernel: Kernel::quadweight(), mode: BoundaryMode::ClipPolys },
        &oracle_h_grid(13.2, 30),
        &oracle_m_grid(),
        CV_REPS,
        SEED,
    )
    .unwrap();
    let min = oracle.best.log10_mise;
    let (rlcv, lscv) = cv_mise(&ctx, CV_REPS, SEED, CvTarget::Raw);
    let (rlcv_n, lscv_n) = cv_mise(&ctx, CV_REPS, SEED, CvTarget::Normalized);
    note(
        11,
        &format!(
            "normalized CV target: rlcv {rlcv_n:.3} (gap {:.3}), lscv {lscv_n:.3} (gap {:.3})",
            rlcv_n - min,
            lscv_n - min
        ),
    );
    let pass_r = rlcv - min <= 0.15;
    let pass_l = lscv - min <= 0.25;
    report(
        11,
        pass_r && pass_l,
        &format!(
            "oracle min (M={}, h={:.2}) {min:.3}; rlcv {rlcv:.3} (gap {:.3}, need <= 0.15); lscv {lscv:.3} (gap {:.3}, need <= 0.25)",
            oracle.best.degree,
            oracle.best.h,
            rlcv - min,
            lscv - min
        ),
    );
    assert!(pass_r && pass_l);
}
