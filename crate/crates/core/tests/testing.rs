use fssd_core::kernel::GaussKernel;
use fssd_core::models::{sample_standard, Distribution, Gaussian, LaplaceProduct};
use fssd_core::optimize::{optimize_locations, random_locations, split, OptimizerConfig};
use fssd_core::stein::{self, TestLocations};
use fssd_core::testing::{
    fssd_test, ksd_test, lks_test, null_eigs, simulate_null, threshold, NullSpec, DEFAULT_BOOTSTRAP,
    DEFAULT_NULL_DRAWS,
};
use fssd_core::{Error, Sample, TestMethod};

fn gauss(mean: Vec<f64>) -> Distribution {
    Distribution::Gauss(Gaussian::isotropic(mean, 1.0).unwrap())
}

fn rate(rejections: &[bool]) -> f64 {
    rejections.iter().filter(|r| **r).count() as f64 / rejections.len() as f64
}

fn fssd_rand(p: &Gaussian, s: &Sample, j: usize, seed: u64) -> bool {
    let l = random_locations(s, j, seed).unwrap();
    fssd_test(p, s, &l, 0.05, DEFAULT_NULL_DRAWS, seed).unwrap().reject
}

#[test]
fn fssd_level_d5() {
    let p = Gaussian::standard(5);
    let q = gauss(vec![0.0; 5]);
    let rej: Vec<bool> = (0..200).map(|t| fssd_rand(&p, &q.sample(500, t).unwrap(), 5, 1000 + t)).collect();
    let r = rate(&rej);
    assert!((0.01..=0.10).contains(&r), "rate {r}");
}

#[test]
fn ksd_level() {
    let p = Gaussian::standard(1);
    let q = gauss(vec![0.0]);
    let rej: Vec<bool> = (0..200)
        .map(|t| {
            let s = q.sample(200, t).unwrap();
            let k = GaussKernel::from_median(&s).unwrap();
            ksd_test(&p, &s, &k, 0.05, DEFAULT_BOOTSTRAP, t).unwrap().reject
        })
        .collect();
    let r = rate(&rej);
    assert!((0.01..=0.10).contains(&r), "rate {r}");
}

#[test]
fn lks_level() {
    let p = Gaussian::standard(2);
    let q = gauss(vec![0.0; 2]);
    let rej: Vec<bool> = (0..200)
        .map(|t| {
            let s = q.sample(500, 50 + t).unwrap();
            let k = GaussKernel::from_median(&s).unwrap();
            lks_test(&p, &s, &k, 0.05).unwrap().reject
        })
        .collect();
    let r = rate(&rej);
    assert!((0.01..=0.10).contains(&r), "rate {r}");
}

#[test]
fn results_are_well_formed() {
    let p = Gaussian::standard(2);
    let s = sample_standard(&gauss(vec![0.3, 0.0]), 300, 1).unwrap().with_seed(1);
    let k = GaussKernel::from_median(&s).unwrap();
    let l = random_locations(&s, 3, 2).unwrap();
    let results = [
        fssd_test(&p, &s, &l, 0.05, 1000, 3).unwrap(),
        ksd_test(&p, &s, &k, 0.05, 100, 3).unwrap(),
        lks_test(&p, &s, &k, 0.05).unwrap(),
    ];
    for (r, m) in results.iter().zip([TestMethod::Fssd, TestMethod::Ksd, TestMethod::Lks]) {
        assert_eq!(r.method, m);
        assert_eq!(r.reject, r.statistic > r.threshold);
        assert!((0.0..=1.0).contains(&r.p_value));
        assert_eq!(r.n, 300);
        assert_eq!(r.seeds.data, Some(1));
        assert!(r.wall_time >= 0.0);
        let json = serde_json::to_string(r).unwrap();
        let back: fssd_core::TestResult = serde_json::from_str(&json).unwrap();
        assert_eq!(&back, r);
    }
}

#[test]
fn statistic_at_threshold_is_not_rejected() {
    // zero features: statistic 0, all eigenvalues 0, threshold 0
    let p = Gaussian::standard(1);
    let s = Sample::new(vec![0.0; 20], 1).unwrap();
    let l = TestLocations::from_rows(&[vec![0.0]], GaussKernel::new(1.0).unwrap()).unwrap();
    let r = fssd_test(&p, &s, &l, 0.05, 500, 0).unwrap();
    assert_eq!(r.statistic, 0.0);
    assert_eq!(r.threshold, 0.0);
    assert!(!r.reject);
}

#[test]
fn single_eigenvalue_quantile_matches_chi_square() {
    let draws = simulate_null(&NullSpec { eigenvalues: vec![1.0], n_draws: 100_000, seed: 9 }).unwrap();
    let t = threshold(&draws, 0.05).unwrap();
    assert!((t - 2.841).abs() < 0.1, "{t}");
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    assert!(mean.abs() < 0.03);
}

#[test]
fn threshold_from_q_and_p_covariances_agree() {
    let p = Gaussian::standard(2);
    let q = gauss(vec![0.0; 2]);
    let l = TestLocations::from_rows(&[vec![1.0, 0.0], vec![-0.5, 1.0]], GaussKernel::new(1.5).unwrap()).unwrap();
    let th = |s: &Sample| {
        let f = stein::moments(&p, s, &l).unwrap();
        let draws = simulate_null(&NullSpec { eigenvalues: null_eigs(&f).unwrap(), n_draws: 50_000, seed: 3 }).unwrap();
        threshold(&draws, 0.05).unwrap()
    };
    let tq = th(&q.sample(5000, 1).unwrap());
    let tp = th(&q.sample(5000, 2).unwrap());
    assert!((tq - tp).abs() <= 0.1 * tp, "{tq} vs {tp}");
}

#[test]
fn null_p_values_are_roughly_uniform() {
    let p = Gaussian::standard(1);
    let q = gauss(vec![0.0]);
    let l = TestLocations::from_rows(&[vec![0.7]], GaussKernel::new(1.0).unwrap()).unwrap();
    let mut pv: Vec<f64> = (0..200)
        .map(|t| fssd_test(&p, &q.sample(500, 300 + t).unwrap(), &l, 0.05, 2000, t).unwrap().p_value)
        .collect();
    pv.sort_by(f64::total_cmp);
    let m = pv.len() as f64;
    let ks = pv
        .iter()
        .enumerate()
        .map(|(i, u)| (u - i as f64 / m).abs().max(((i + 1) as f64 / m - u).abs()))
        .fold(0.0, f64::max);
    assert!(ks <= 0.15, "KS distance {ks}");
}

#[test]
fn null_rejection_with_eigenvalue_threshold() {
    let p = Gaussian::standard(1);
    let q = gauss(vec![0.0]);
    let l = TestLocations::from_rows(&[vec![1.0]], GaussKernel::new(1.0).unwrap()).unwrap();
    let rej: Vec<bool> =
        (0..500).map(|t| fssd_test(&p, &q.sample(2000, 7000 + t).unwrap(), &l, 0.05, 5000, t).unwrap().reject).collect();
    let r = rate(&rej);
    assert!((0.02..=0.09).contains(&r), "rate {r}");
}

#[test]
fn fssd_detects_mean_shift_with_optimized_location() {
    let p = Gaussian::standard(1);
    let q = gauss(vec![0.5]);
    let rej: Vec<bool> = (0..100)
        .map(|t| {
            let s = q.sample(2000, 500 + t).unwrap();
            let (tr, te) = split(&s, 0.2, t).unwrap();
            let cfg = OptimizerConfig { seed: t, ..Default::default() };
            let l = optimize_locations(&p, &tr, 1, &cfg).unwrap();
            fssd_test(&p, &te, &l, 0.05, 2000, t).unwrap().reject
        })
        .collect();
    let r = rate(&rej);
    assert!(r > 0.9, "power {r}");
}

#[test]
fn ksd_at_least_as_powerful_as_random_fssd_in_one_dimension() {
    let p = Gaussian::standard(1);
    let q = Distribution::LaplaceProduct(LaplaceProduct::unit_variance(1));
    let mut ksd = Vec::new();
    let mut rnd = Vec::new();
    for t in 0..100 {
        let s = q.sample(1000, 900 + t).unwrap();
        let k = GaussKernel::from_median(&s).unwrap();
        ksd.push(ksd_test(&p, &s, &k, 0.05, 200, t).unwrap().reject);
        rnd.push(fssd_rand(&p, &s, 5, t));
    }
    assert!(rate(&ksd) >= rate(&rnd), "ksd {} vs fssd-rand {}", rate(&ksd), rate(&rnd));
}

#[test]
fn lks_rejects_constant_pairs() {
    // all points equal: every pair evaluation is identical
    let p = Gaussian::standard(1);
    let s = Sample::new(vec![0.3; 10], 1).unwrap();
    let err = lks_test(&p, &s, &GaussKernel::new(1.0).unwrap(), 0.05).unwrap_err();
    assert!(matches!(err, Error::Degenerate(_)));
    let small = Sample::new(vec![0.1, 0.2, 0.3], 1).unwrap();
    assert!(matches!(lks_test(&p, &small, &GaussKernel::new(1.0).unwrap(), 0.05), Err(Error::SampleSize { .. })));
}

#[test]
fn invalid_alpha_is_rejected() {
    let p = Gaussian::standard(1);
    let s = Sample::new(vec![0.1, -0.4, 0.9, 1.3], 1).unwrap();
    let k = GaussKernel::new(1.0).unwrap();
    assert!(lks_test(&p, &s, &k, 1.0).is_err());
    assert!(ksd_test(&p, &s, &k, 0.0, 10, 0).is_err());
}
