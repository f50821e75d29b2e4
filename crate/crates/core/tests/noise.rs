use approx::assert_relative_eq;
use nhpp_core::noise::{displace_in_domain, radial_max_pdf};
use nhpp_core::rng::rng_from_seed;
use nhpp_core::{Domain, Error, GridDensity, NoiseModel, Point, RadialLaw};
use proptest::prelude::*;

/// CDF of the maximum of two independent Rayleigh(1) radii.
fn rayleigh_max2_cdf(x: f64) -> f64 {
    let f = 1.0 - (-0.5 * x * x).exp();
    f * f
}

#[test]
fn radial_max_of_two_bivariate_normals() {
    let noise = NoiseModel::isotropic(2, 1.0).unwrap();
    let law = noise.radial_law(&[1.0, 1.0]).unwrap();
    let mut rng = rng_from_seed(11);
    let n = 1_000_000;
    let maxima: Vec<f64> = (0..n)
        .map(|_| {
            let a = noise.sample(&mut rng);
            let b = noise.sample(&mut rng);
            a[0].hypot(a[1]).max(b[0].hypot(b[1]))
        })
        .collect();
    for x in [0.5, 1.0, 1.5, 2.0, 3.0] {
        let want = rayleigh_max2_cdf(x);
        assert_relative_eq!(law.max_cdf(2, x), want, max_relative = 1e-12);
        let emp = maxima.iter().filter(|&&m| m <= x).count() as f64 / n as f64;
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((emp - want).abs() < 4.0 * se, "x = {x}: {emp} vs {want}");
    }
    // density of the maximum: d/dx F², against a central difference of the closed form
    for x in [0.3, 1.2, 2.5] {
        let h = 1e-5;
        let want = (rayleigh_max2_cdf(x + h) - rayleigh_max2_cdf(x - h)) / (2.0 * h);
        assert_relative_eq!(radial_max_pdf(&noise, 2, x).unwrap(), want, max_relative = 1e-7);
    }
}

#[test]
fn max_pdf_integrates_to_one() {
    for (dof, k) in [(2, 1), (2, 3), (3, 2), (3, 5)] {
        let law = RadialLaw::Chi { dof, scale: 0.7 };
        let hi = law.max_quantile(k, 1.0 - 1e-14);
        let n = 20_000;
        let h = hi / n as f64;
        let mut s = law.max_pdf(k, 0.0) + law.max_pdf(k, hi);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * law.max_pdf(k, i as f64 * h);
        }
        assert_relative_eq!(s * h / 3.0, 1.0, max_relative = 1e-9);
    }
}

#[test]
fn chi3_cdf_closed_form() {
    // Maxwell distribution: erf(x/√2) - √(2/π) x e^{-x²/2}
    let law = RadialLaw::Chi { dof: 3, scale: 1.0 };
    for (x, want) in [(0.5, 0.030859595783726726), (1.0, 0.1987480430987992), (2.0, 0.7385358700508894)] {
        assert_relative_eq!(law.cdf(x), want, max_relative = 1e-12);
    }
}

#[test]
fn quantile_inverts_cdf() {
    let law = RadialLaw::Chi { dof: 2, scale: 1e-3 };
    for p in [0.1, 0.5, 0.99, 1.0 - 1e-10] {
        let x = law.max_quantile(3, p);
        assert_relative_eq!(law.max_cdf(3, x), p, max_relative = 1e-10);
    }
    assert_eq!(RadialLaw::PointMassAtZero.max_quantile(3, 0.5), 0.0);
}

#[test]
fn anisotropic_weighted_gaussian_has_no_radial_law() {
    let noise = NoiseModel::Gaussian { sigma: vec![1.0, 2.0] };
    assert!(matches!(noise.radial_law(&[1.0, 1.0]), Err(Error::UnsupportedNoise(_))));
    // a weight that equalizes the axes makes it isotropic again
    assert_eq!(noise.radial_law(&[1.0, 0.5]).unwrap(), RadialLaw::Chi { dof: 2, scale: 1.0 });
}

#[test]
fn gridded_density_sampling() {
    let g = GridDensity::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![2, 2], vec![1.0, 0.0, 0.0, 3.0]).unwrap();
    let noise = NoiseModel::Gridded(g.clone());
    assert_relative_eq!(noise.density(&[-0.5, -0.5]), 0.25, max_relative = 1e-14);
    assert_relative_eq!(noise.density(&[0.5, 0.5]), 0.75, max_relative = 1e-14);
    assert_eq!(noise.density(&[-0.5, 0.5]), 0.0);
    assert_eq!(noise.density(&[2.0, 0.0]), 0.0);
    let mut rng = rng_from_seed(5);
    let n = 200_000;
    let mut upper_right = 0;
    for _ in 0..n {
        let e = noise.sample(&mut rng);
        assert!(noise.density(&e) > 0.0);
        if e[0] > 0.0 {
            upper_right += 1;
        }
    }
    let frac = upper_right as f64 / n as f64;
    assert!((frac - 0.75).abs() < 4.0 * (0.75 * 0.25 / n as f64).sqrt(), "{frac}");
    assert!(noise.radial_law(&[1.0, 1.0]).is_err());
}

#[test]
fn grid_rejects_bad_input() {
    assert!(GridDensity::new(vec![0.0], vec![1.0], vec![2], vec![1.0]).is_err());
    assert!(GridDensity::new(vec![0.0], vec![1.0], vec![2], vec![0.0, 0.0]).is_err());
    assert!(GridDensity::new(vec![1.0], vec![0.0], vec![1], vec![1.0]).is_err());
    assert!(GridDensity::new(vec![0.0], vec![1.0], vec![2], vec![-1.0, 2.0]).is_err());
}

#[test]
fn product_split_and_density() {
    let m = NoiseModel::Product(vec![NoiseModel::isotropic(2, 0.2).unwrap(), NoiseModel::Gaussian { sigma: vec![3.0] }]);
    assert_eq!(m.dim(), 3);
    let (head, tail) = m.split_at(2).unwrap();
    assert_eq!(head, NoiseModel::isotropic(2, 0.2).unwrap());
    assert_eq!(tail, Some(NoiseModel::Gaussian { sigma: vec![3.0] }));
    assert!(m.split_at(1).is_some());
    let e = [0.1, -0.05, 2.0];
    let want = head.density(&e[..2]) * tail.unwrap().density(&e[2..]);
    assert_relative_eq!(m.density(&e), want, max_relative = 1e-13);
    let g = GridDensity::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![2, 2], vec![1.0; 4]).unwrap();
    let mixed = NoiseModel::Product(vec![NoiseModel::Gridded(g), NoiseModel::Gaussian { sigma: vec![1.0] }]);
    assert!(mixed.split_at(1).is_none());
    assert!(mixed.split_at(2).is_some());
}

#[test]
fn degenerate_noise() {
    let m = NoiseModel::isotropic(3, 0.0).unwrap();
    assert!(m.is_degenerate());
    assert_eq!(m.radial_law(&[1.0; 3]).unwrap(), RadialLaw::PointMassAtZero);
    let mut rng = rng_from_seed(1);
    assert!(m.sample(&mut rng).iter().all(|&v| v == 0.0));
    assert!(NoiseModel::isotropic(2, -1.0).is_err());
    assert!(NoiseModel::Gaussian { sigma: vec![0.0] }.validate().is_err());
}

#[test]
fn displacement_stays_in_domain() {
    let d = Domain::unit_square();
    let noise = NoiseModel::isotropic(2, 0.3).unwrap();
    let mut rng = rng_from_seed(3);
    let base = Point::new([0.01, 0.99]);
    for _ in 0..1000 {
        assert!(d.contains(&displace_in_domain(&base, &noise, &d, 1.0, &mut rng, 10_000).unwrap()));
    }
    let far = NoiseModel::Gaussian { sigma: vec![1e-9, 1e-9] };
    let outside = Point::new([5.0, 5.0]);
    assert!(matches!(displace_in_domain(&outside, &far, &d, 1.0, &mut rng, 10), Err(Error::RetriesExhausted(10))));
}

#[test]
fn wrapped_axis_never_rejects() {
    let d = Domain::frb_default();
    let noise = NoiseModel::Gaussian { sigma: vec![5.0, 1e-6, 1e-6] };
    let mut rng = rng_from_seed(4);
    for _ in 0..1000 {
        let p = displace_in_domain(&Point::new([359.0, 10.0, 100.0]), &noise, &d, 1.0, &mut rng, 1).unwrap();
        assert!((0.0..360.0).contains(&p[0]));
    }
}

proptest! {
    #[test]
    fn ln_density_is_log_of_density(e in prop::collection::vec(-3.0..3.0f64, 3), s in 0.1..2.0f64) {
        let m = NoiseModel::Gaussian { sigma: vec![s, 2.0 * s, 0.5 * s] };
        let d = m.density(&e);
        prop_assume!(d > 1e-300);
        prop_assert!((m.ln_density(&e) - d.ln()).abs() < 1e-10 * (1.0 + d.ln().abs()));
    }

    #[test]
    fn cdf_is_monotone(x in 0.0..10.0f64, dx in 0.0..1.0f64, dof in 1usize..5, k in 1usize..6) {
        let law = RadialLaw::Chi { dof, scale: 1.3 };
        prop_assert!(law.max_cdf(k, x) <= law.max_cdf(k, x + dx) + 1e-15);
        prop_assert!(law.max_cdf(k, x) <= law.cdf(x) + 1e-15);
    }
}
