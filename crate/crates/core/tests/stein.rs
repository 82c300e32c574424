//! Stein features and statistics against brute-force, closed-form, and Monte
//! Carlo oracles.

use fssd_core::kernel::GaussKernel;
use fssd_core::models::{sample_standard, Distribution, Gaussian, Gmm, GmmParams, Rbm, RbmParams, ScoredModel};
use fssd_core::rng::rng;
use fssd_core::stein::{self, TestLocations};
use fssd_core::Sample;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn normal_sample(mu: f64, var: f64, d: usize, n: usize, seed: u64) -> Sample {
    let g = Gaussian::isotropic(vec![mu; d], var).unwrap();
    sample_standard(&Distribution::Gauss(g), n, seed).unwrap()
}

fn locs(rows: &[Vec<f64>], s2: f64) -> TestLocations {
    TestLocations::from_rows(rows, GaussKernel::new(s2).unwrap()).unwrap()
}

/// `2/(n(n−1)) Σ_{i<j} τ(x_i)ᵀτ(x_j)` by explicit double loop.
fn brute_fssd2(model: &dyn ScoredModel, s: &Sample, l: &TestLocations) -> f64 {
    let taus: Vec<Vec<f64>> = s.rows().map(|x| stein::tau(model, x, l)).collect();
    let n = taus.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            acc += taus[i].iter().zip(&taus[j]).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    2.0 * acc / (n as f64 * (n as f64 - 1.0))
}

fn random_rbm(d: usize, dh: usize, seed: u64) -> Rbm {
    let mut r = rng(seed);
    let mut z = || -> f64 { r.sample::<f64, _>(StandardNormal) * 0.5 };
    Rbm::new(RbmParams {
        weights: (0..d).map(|_| (0..dh).map(|_| z()).collect()).collect(),
        b: (0..d).map(|_| z()).collect(),
        c: (0..dh).map(|_| z()).collect(),
    })
    .unwrap()
}

#[test]
fn xi_matches_scalar_closed_form() {
    let p = Gaussian::standard(1);
    let closed = |x: f64, v: f64, s2: f64| -(-(v - x).powi(2) / (2.0 * s2)).exp() * (x * s2 - v + x) / s2;
    let k = GaussKernel::new(1.0).unwrap();
    let got = stein::xi(&p, &[0.0], &[1.0], &k)[0];
    assert!((got - (-0.5f64).exp()).abs() < 1e-15);
    for &(x, v, s2) in &[(0.3, -1.2, 0.7), (2.0, 1.0, 3.0), (-1.5, 0.4, 1.1)] {
        let k = GaussKernel::new(s2).unwrap();
        let got = stein::xi(&p, &[x], &[v], &k)[0];
        assert!((got - closed(x, v, s2)).abs() < 1e-14);
    }
    assert_eq!(stein::xi(&p, &[0.0], &[0.0], &k), vec![0.0]);
}

#[test]
fn stein_identity_for_xi() {
    let p = Gaussian::standard(2);
    let s = normal_sample(0.0, 1.0, 2, 100_000, 5);
    let k = GaussKernel::new(1.5).unwrap();
    let v = [0.4, -0.9];
    let vals: Vec<Vec<f64>> = s.rows().map(|x| stein::xi(&p, x, &v, &k)).collect();
    for c in 0..2 {
        let n = vals.len() as f64;
        let m = vals.iter().map(|r| r[c]).sum::<f64>() / n;
        let sd = (vals.iter().map(|r| (r[c] - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(m.abs() < 4.0 * sd / n.sqrt(), "coordinate {c}: mean {m}");
    }
}

#[test]
fn tau_scaling_and_shape() {
    let p = Gaussian::standard(1);
    let k = GaussKernel::new(1.3).unwrap();
    let one = locs(&[vec![0.7]], 1.3);
    let x = [0.2];
    assert_eq!(stein::tau(&p, &x, &one)[0], stein::xi(&p, &x, &[0.7], &k)[0]);

    let q = Gaussian::standard(3);
    let l = locs(&[vec![0.0, 1.0, 2.0], vec![1.0, 1.0, 1.0]], 2.0);
    assert_eq!(stein::tau(&q, &[0.1, 0.2, 0.3], &l).len(), 6);
    let t1 = stein::tau(&q, &[0.1, 0.2, 0.3], &locs(&[vec![0.0, 1.0, 2.0]], 2.0));
    let dup = TestLocations::from_rows(&[vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0]], GaussKernel::new(2.0).unwrap());
    assert!(dup.is_err(), "duplicated locations are rejected by the public constructor");
    // the two blocks of a J=2 feature are the J=1 block scaled by 1/√2
    let l2 = locs(&[vec![0.0, 1.0, 2.0], vec![5.0, 5.0, 5.0]], 2.0);
    let t2 = stein::tau(&q, &[0.1, 0.2, 0.3], &l2);
    for i in 0..3 {
        assert!((t2[i] * 2f64.sqrt() - t1[i]).abs() < 1e-15);
    }
}

#[test]
fn fssd2_single_pair() {
    let p = Gaussian::standard(2);
    let s = Sample::new(vec![0.3, -1.0, 1.2, 0.4], 2).unwrap();
    let l = locs(&[vec![0.0, 0.5], vec![1.0, -1.0]], 0.8);
    let a = stein::tau(&p, s.row(0), &l);
    let b = stein::tau(&p, s.row(1), &l);
    let delta: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let got = stein::fssd2_ustat(&p, &s, &l).unwrap();
    assert!((got - delta).abs() <= 1e-14 * delta.abs().max(1e-300));
}

#[test]
fn fssd2_requires_two_points() {
    let p = Gaussian::standard(1);
    let s = Sample::from_raw(vec![0.3], 1).unwrap();
    assert!(stein::fssd2_ustat(&p, &s, &locs(&[vec![0.0]], 1.0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fssd2_linear_formula_equals_pair_sum(
        seed in 0u64..10_000,
        n in 2usize..50,
        d in 1usize..4,
        j in 1usize..4,
        which in 0usize..3,
    ) {
        let mut r = rng(seed);
        let mut z = || -> f64 { r.sample(StandardNormal) };
        let model: Box<dyn ScoredModel> = match which {
            0 => Box::new(Gaussian::isotropic((0..d).map(|_| z()).collect(), 0.5 + z().abs()).unwrap()),
            1 => Box::new(random_rbm(d, 2, seed)),
            _ => Box::new(Gmm::new(GmmParams {
                weights: vec![0.4, 0.6],
                means: vec![(0..d).map(|_| z()).collect(), (0..d).map(|_| z()).collect()],
                covariances: vec![(0..d).map(|a| (0..d).map(|b| if a == b { 1.0 } else { 0.0 }).collect()).collect(); 2],
            }).unwrap()),
        };
        let data: Vec<f64> = (0..n * d).map(|_| 1.5 * z() + 0.3).collect();
        let s = Sample::new(data, d).unwrap();
        let rows: Vec<Vec<f64>> = (0..j).map(|_| (0..d).map(|_| z()).collect()).collect();
        let l = locs(&rows, 0.5 + 2.0 * z().abs());
        let fast = stein::fssd2_ustat(model.as_ref(), &s, &l).unwrap();
        let slow = brute_fssd2(model.as_ref(), &s, &l);
        prop_assert!((fast - slow).abs() <= 1e-10 * slow.abs(), "fast {} slow {}", fast, slow);
    }

    #[test]
    fn fssd2_ignores_row_order(seed in 0u64..1000) {
        let p = Gaussian::standard(2);
        let s = normal_sample(0.3, 1.2, 2, 40, seed);
        let mut idx: Vec<usize> = (0..40).collect();
        idx.reverse();
        idx.swap(3, 17);
        let t = s.select(&idx).unwrap();
        let l = locs(&[vec![0.1, 0.2], vec![-1.0, 0.5]], 1.0);
        let a = stein::fssd2_ustat(&p, &s, &l).unwrap();
        let b = stein::fssd2_ustat(&p, &t, &l).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-12));
    }
}

#[test]
fn fssd2_is_unbiased_under_null() {
    let p = Gaussian::standard(1);
    let l = locs(&[vec![0.8]], 1.0);
    let vals: Vec<f64> = (0..1000)
        .map(|t| stein::fssd2_ustat(&p, &normal_sample(0.0, 1.0, 1, 100, 1000 + t), &l).unwrap())
        .collect();
    let n = vals.len() as f64;
    let m = vals.iter().sum::<f64>() / n;
    let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(m.abs() < 3.0 * sd / n.sqrt(), "mean {m}, se {}", sd / n.sqrt());
}

#[test]
fn fssd2_detects_mean_shift() {
    let p = Gaussian::standard(1);
    let mut r = rng(77);
    let v: f64 = r.sample(StandardNormal);
    let l = locs(&[vec![v]], 1.0);
    let s = normal_sample(1.0, 1.0, 1, 10_000, 78);
    let f = stein::moments(&p, &s, &l).unwrap();
    let est = f.fssd2();
    let sd = stein::sigma_h1_hat(&f).sqrt() / (s.n() as f64).sqrt();
    assert!(est > 5.0 * sd, "estimate {est}, sd {sd}");
}

#[test]
fn moments_match_brute_force() {
    let p = random_rbm(2, 3, 4);
    let s = normal_sample(0.2, 1.3, 2, 20, 6);
    let l = locs(&[vec![0.0, 0.1], vec![1.0, -1.0], vec![-0.5, 0.5]], 0.9);
    let f = stein::moments(&p, &s, &l).unwrap();
    let taus: Vec<Vec<f64>> = s.rows().map(|x| stein::tau(&p, x, &l)).collect();
    let dj = 6;
    let n = 20.0;
    let mu: Vec<f64> = (0..dj).map(|a| taus.iter().map(|t| t[a]).sum::<f64>() / n).collect();
    for a in 0..dj {
        assert!((mu[a] - f.mu_hat[a]).abs() < 1e-12);
        for b in 0..dj {
            let second = taus.iter().map(|t| t[a] * t[b]).sum::<f64>() / n;
            let cov = second - mu[a] * mu[b];
            assert!((cov - f.sigma_q_hat[(a, b)]).abs() <= 1e-10);
        }
    }
    let eig = f.sigma_q_hat.clone().symmetric_eigenvalues();
    assert!(eig.iter().all(|e| *e >= -1e-8));
}

#[test]
fn constant_features_have_zero_covariance() {
    let f = stein::SteinFeatures::from_tau(vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0], 2).unwrap();
    assert!(f.sigma_q_hat.iter().all(|v| *v == 0.0));
    assert_eq!(f.mu_hat, vec![1.0, 2.0]);
}

#[test]
fn mean_of_concatenation_is_weighted_mean() {
    let p = Gaussian::standard(1);
    let l = locs(&[vec![0.5]], 1.0);
    let a = normal_sample(0.0, 1.0, 1, 30, 1);
    let b = normal_sample(1.0, 2.0, 1, 70, 2);
    let both = Sample::new([a.as_slice(), b.as_slice()].concat(), 1).unwrap();
    let ma = stein::moments(&p, &a, &l).unwrap().mu_hat[0];
    let mb = stein::moments(&p, &b, &l).unwrap().mu_hat[0];
    let m = stein::moments(&p, &both, &l).unwrap().mu_hat[0];
    assert!((m - (0.3 * ma + 0.7 * mb)).abs() < 1e-14);
}

#[test]
fn sigma_h1_quadratic_form() {
    let mut f = stein::SteinFeatures::from_tau(vec![0.0; 12], 6).unwrap();
    assert_eq!(stein::sigma_h1_hat(&f), 0.0);
    f.mu_hat = vec![1.0, -2.0, 0.5, 0.0, 3.0, 1.0];
    f.sigma_q_hat = nalgebra::DMatrix::identity(6, 6);
    assert!((stein::sigma_h1_hat(&f) - 4.0 * 15.25).abs() < 1e-12);

    let mut r = rng(12);
    let a = nalgebra::DMatrix::from_fn(6, 6, |_, _| r.sample::<f64, _>(StandardNormal));
    let sigma = &a * a.transpose();
    let mu: Vec<f64> = (0..6).map(|_| r.sample(StandardNormal)).collect();
    let mut direct = 0.0;
    for i in 0..6 {
        for j in 0..6 {
            direct += mu[i] * sigma[(i, j)] * mu[j];
        }
    }
    f.mu_hat = mu;
    f.sigma_q_hat = sigma;
    assert!((stein::sigma_h1_hat(&f) - 4.0 * direct).abs() < 1e-10 * direct.abs());
}

#[test]
fn hp_matches_scalar_closed_form() {
    let p = Gaussian::standard(1);
    let closed = |x: f64, y: f64, k2: f64| {
        (-(x - y).powi(2) / (2.0 * k2)).exp()
            * (k2 - (k2 + 1.0) * x * x + (k2 * k2 + 2.0 * k2 + 2.0) * x * y - (k2 + 1.0) * y * y)
            / (k2 * k2)
    };
    let k = GaussKernel::new(1.0).unwrap();
    assert!((stein::hp(&p, &[0.0], &[0.0], &k) - 1.0).abs() < 1e-15);
    for &(x, y, k2) in &[(0.3, -1.1, 1.0), (1.7, 0.2, 0.5), (-2.0, -1.5, 4.0)] {
        let k = GaussKernel::new(k2).unwrap();
        let got = stein::hp(&p, &[x], &[y], &k);
        assert!((got - closed(x, y, k2)).abs() < 1e-13, "{got} vs {}", closed(x, y, k2));
    }
}

#[test]
fn hp_symmetric_and_mean_zero_under_p() {
    let p = random_rbm(3, 2, 9);
    let k = GaussKernel::new(1.7).unwrap();
    let s = normal_sample(0.0, 1.0, 3, 10, 3);
    for i in 0..5 {
        let a = stein::hp(&p, s.row(i), s.row(i + 5), &k);
        let b = stein::hp(&p, s.row(i + 5), s.row(i), &k);
        assert!((a - b).abs() < 1e-13);
    }

    let g = Gaussian::standard(2);
    let x = normal_sample(0.0, 1.0, 2, 200_000, 21);
    let k = GaussKernel::new(1.0).unwrap();
    let vals: Vec<f64> = (0..100_000).map(|i| stein::hp(&g, x.row(2 * i), x.row(2 * i + 1), &k)).collect();
    let n = vals.len() as f64;
    let m = vals.iter().sum::<f64>() / n;
    let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(m.abs() < 4.0 * sd / n.sqrt(), "mean {m}");
}

#[test]
fn ksd_and_lks_small_cases() {
    let p = Gaussian::standard(1);
    let k = GaussKernel::new(1.0).unwrap();
    let s = Sample::new(vec![0.4, -1.3], 1).unwrap();
    let h = stein::hp(&p, &[0.4], &[-1.3], &k);
    assert!((stein::ksd2_ustat(&p, &s, &k).unwrap() - h).abs() < 1e-15);

    let s4 = Sample::new(vec![0.4, -1.3, 2.0, 0.1], 1).unwrap();
    let lks = stein::lks2_stat(&p, &s4, &k).unwrap();
    let h2 = stein::hp(&p, &[2.0], &[0.1], &k);
    assert!((lks.mean - (h + h2) / 2.0).abs() < 1e-15);
    assert_eq!(lks.pairs, 2);

    // swapping within a pair leaves the statistic unchanged; odd n drops the tail
    let swapped = Sample::new(vec![-1.3, 0.4, 0.1, 2.0, 9.0], 1).unwrap();
    let lks2 = stein::lks2_stat(&p, &swapped, &k).unwrap();
    assert!((lks2.mean - lks.mean).abs() < 1e-15);
    assert_eq!(lks2.pairs, 2);

    let one = Sample::from_raw(vec![0.0], 1).unwrap();
    assert!(stein::ksd2_ustat(&p, &one, &k).is_err());
    assert!(stein::lks2_stat(&p, &one, &k).is_err());
}

#[test]
fn ksd_monte_carlo_matches_population_value() {
    // S_p²(q) = 1/√3 for p = N(0,1), q = N(1,1), κ² = 1
    let p = Gaussian::standard(1);
    let k = GaussKernel::new(1.0).unwrap();
    let vals: Vec<f64> = (0..20)
        .map(|t| stein::ksd2_ustat(&p, &normal_sample(1.0, 1.0, 1, 2000, 300 + t), &k).unwrap())
        .collect();
    let n = vals.len() as f64;
    let m = vals.iter().sum::<f64>() / n;
    let se = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt();
    assert!((m - 1.0 / 3f64.sqrt()).abs() < 3.0 * se, "mean {m} se {se}");
}

#[test]
fn ksd_and_lks_share_expectation() {
    let p = Gaussian::standard(1);
    let k = GaussKernel::new(1.0).unwrap();
    let mut ksd = Vec::new();
    let mut lks = Vec::new();
    for t in 0..200 {
        let s = normal_sample(0.5, 1.3, 1, 200, 5000 + t);
        ksd.push(stein::ksd2_ustat(&p, &s, &k).unwrap());
        lks.push(stein::lks2_stat(&p, &s, &k).unwrap().mean);
    }
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) / n)
    };
    let (m1, v1) = stats(&ksd);
    let (m2, v2) = stats(&lks);
    assert!((m1 - m2).abs() < 3.0 * (v1 + v2).sqrt(), "{m1} vs {m2}");
}

#[test]
fn statistics_are_reproducible() {
    let p = random_rbm(2, 2, 1);
    let s = normal_sample(0.0, 1.0, 2, 300, 2);
    let l = locs(&[vec![0.1, 0.2]], 1.0);
    let k = GaussKernel::new(1.0).unwrap();
    assert_eq!(stein::fssd2_ustat(&p, &s, &l).unwrap().to_bits(), stein::fssd2_ustat(&p, &s, &l).unwrap().to_bits());
    assert_eq!(stein::ksd2_ustat(&p, &s, &k).unwrap().to_bits(), stein::ksd2_ustat(&p, &s, &k).unwrap().to_bits());
}
