use approx::assert_relative_eq;
use lorpe::baselines::{
    kde_estimate, kde_highorder_estimate, kde_raw, osde_estimate, select_osde_terms, LegendreBasis, OsdeConfig,
    UnitMap, OSDE_J_MAX,
};
use lorpe::lorpe::estimate_on_grid;
use lorpe::quadrature::{linspace, trapezoid};
use lorpe::simlab::{sample_dist, DistributionSpec};
use lorpe::{Kernel, LorpeConfig, Support};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn mirrored_kde_at_the_edge() {
    let v = kde_raw(&[0.1], 1.0, Kernel::gaussian(), Some(0.0), &[0.0]).unwrap();
    assert_relative_eq!(v[0], 0.7940, epsilon = 1e-4);
}

#[test]
fn mirrored_kde_integrates_on_half_line() {
    let sample = sample_dist(&DistributionSpec::Exp1, 300, 9);
    let max = sample.iter().cloned().fold(0.0, f64::max);
    let h = 0.3;
    let grid = linspace(0.0, max + 12.0 * h, 40001);
    let raw = kde_raw(&sample, h, Kernel::gaussian(), Some(0.0), &grid).unwrap();
    assert!((trapezoid(&grid, &raw) - 1.0).abs() < 1e-6);
    let left = kde_raw(&sample, h, Kernel::gaussian(), Some(0.0), &[-0.5, -3.0]).unwrap();
    assert_eq!(left, vec![0.0, 0.0]);
}

#[test]
fn order_two_equals_plain_kde() {
    let sample = sample_dist(&DistributionSpec::StdNormal, 50, 4);
    let grid = linspace(-4.0, 4.0, 257);
    let plain = kde_estimate(&sample, 0.8, Kernel::quadweight(), None, &grid).unwrap();
    let high = kde_highorder_estimate(&sample, 0.8, Kernel::quadweight(), 2, None, &grid).unwrap();
    for (a, b) in plain.raw.iter().zip(&high.raw) {
        assert_relative_eq!(*a, *b, epsilon = 1e-12);
    }
}

#[test]
fn high_order_kde_matches_interior_lorpe() {
    let sample = sample_dist(&DistributionSpec::StdNormal, 80, 5);
    let grid = linspace(-3.0, 3.0, 121);
    for order in [4usize, 6, 8] {
        let kde = kde_highorder_estimate(&sample, 1.7, Kernel::biweight(), order, None, &grid).unwrap();
        let cfg = LorpeConfig::new(1.7, (order - 2) as f64, Kernel::biweight(), Support::real_line()).unwrap();
        let lorpe = estimate_on_grid(&sample, &cfg, &grid).unwrap();
        for (a, b) in kde.raw.iter().zip(&lorpe.raw) {
            assert!((a - b).abs() < 1e-10, "order {order}: {a} vs {b}");
        }
    }
}

#[test]
fn osde_without_terms_is_uniform() {
    let sample = [1.0, 2.0, 2.5, 4.0];
    let est = osde_estimate(&sample, &OsdeConfig { terms: 0, grid_size: 256 }, None).unwrap();
    let (lo, hi) = UnitMap::from_sample(&sample).unwrap().support();
    assert!(lo < 1.0 && hi > 4.0);
    for v in &est.value {
        assert_relative_eq!(*v, 1.0 / (hi - lo), max_relative = 1e-9);
    }
}

#[test]
fn osde_is_normalized() {
    let sample = sample_dist(&DistributionSpec::NormalMix1, 400, 6);
    for terms in [1, 5, 12] {
        let est = osde_estimate(&sample, &OsdeConfig { terms, grid_size: 2048 }, None).unwrap();
        assert!((trapezoid(&est.grid, &est.value) - 1.0).abs() < 1e-9);
    }
}

#[test]
fn unit_map_sends_extremes_to_half_cell_quantiles() {
    let sample = [3.0, 5.0, 4.0, 7.0];
    let map = UnitMap::from_sample(&sample).unwrap();
    assert_relative_eq!(map.to_unit(3.0), 1.0 / 8.0, epsilon = 1e-14);
    assert_relative_eq!(map.to_unit(7.0), 7.0 / 8.0, epsilon = 1e-14);
    assert_relative_eq!(map.from_unit(map.to_unit(4.4)), 4.4, epsilon = 1e-13);
    assert!(UnitMap::from_sample(&[2.0, 2.0]).is_err());
}

#[test]
fn discrete_legendre_tracks_continuous() {
    let d = LegendreBasis::discrete(2048, 10).unwrap();
    let c = LegendreBasis::continuous(10);
    let z = linspace(0.05, 0.95, 37);
    let (td, tc) = (d.coefficients(&z), c.coefficients(&z));
    for (a, b) in td.iter().zip(&tc) {
        assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    }
}

#[test]
fn uniform_sample_selects_few_terms() {
    let mut small = 0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let uniform: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
        if select_osde_terms(&uniform, OSDE_J_MAX).unwrap() <= 2 {
            small += 1;
        }
    }
    assert!(small >= 18, "{small} of 20");
}

#[test]
fn term_count_respects_cap() {
    let sample: Vec<f64> = sample_dist(&DistributionSpec::Exp1, 2000, 1).iter().map(|x| x.powi(3)).collect();
    for cap in [1, 3, 10] {
        assert!(select_osde_terms(&sample, cap).unwrap() <= cap);
    }
    assert!(select_osde_terms(&sample, 0).is_err());
}
