use approx::assert_relative_eq;
use nhpp_core::intensity::{Gaussian2, ModelSpec};
use nhpp_core::{Domain, FrbHyperparams, IntensityKind, IntensityModel, Point, Sphere};

const THETA_STAR: [f64; 6] = [525.0, 1.5, 6.0, 2.0, 560.0, 400.0];

fn frb() -> IntensityModel {
    IntensityModel::frb(Domain::frb_default(), FrbHyperparams::from_slice(&THETA_STAR).unwrap()).unwrap()
}

fn gauss_pdf(mean: [f64; 2], cov: [[f64; 2]; 2], x: f64, y: f64) -> f64 {
    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    let (dx, dy) = (x - mean[0], y - mean[1]);
    let q = (cov[1][1] * dx * dx - 2.0 * cov[0][1] * dx * dy + cov[0][0] * dy * dy) / det;
    (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
}

const MEAN1: [f64; 2] = [0.64, 0.61];
const COV1: [[f64; 2]; 2] = [[0.016, 0.007], [0.007, 0.02]];
const MEAN2: [f64; 2] = [0.25, 0.14];
const COV2: [[f64; 2]; 2] = [[0.007, 0.0005], [0.0005, 0.002]];

/// Midpoint sum of `f` over the unit square on an `n × n` grid.
fn unit_square_sum(n: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
    let h = 1.0 / n as f64;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += f((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
        }
    }
    s * h * h
}

#[test]
fn frb_normaliser_matches_high_precision_value() {
    // mpmath quad of g over δ ∈ [-11, 90], DM ∈ [0, 5000]
    let IntensityKind::Frb { norm, .. } = frb().kind().clone() else { unreachable!() };
    assert_relative_eq!(norm, 191_624.578_307_087_07, max_relative = 1e-6);
}

#[test]
fn frb_intensity_matches_high_precision_value() {
    let m = frb();
    let v = m.eval(&Point::new([123.0, 49.32, 500.0]));
    assert_relative_eq!(v, 1.670_786_653_539_381_5e-5, max_relative = 1e-6);
    // uniform in right ascension, including across the seam
    for alpha in [0.0, 0.5, 359.99, 360.0 + 10.0] {
        assert_relative_eq!(m.eval(&Point::new([alpha, 49.32, 500.0])), v, max_relative = 1e-14);
    }
}

#[test]
fn frb_total_mass_is_expected_count() {
    assert_eq!(frb().total_mass(), 525.0);
}

#[test]
fn frb_dm_integral_matches_direct_quadrature() {
    let p = FrbHyperparams::from_slice(&THETA_STAR).unwrap();
    for dec in [-10.0, 0.0, 30.0, 49.32, 75.0, 89.0] {
        for (lo, hi) in [(0.0, 5000.0), (100.0, 400.0), (2000.0, 5000.0)] {
            // composite Simpson on exp(ln g), independent of the gamma-function route
            let n = 20_000;
            let h = (hi - lo) / n as f64;
            let f = |dm: f64| p.ln_shape(dec, dm).exp();
            let mut s = f(lo) + f(hi);
            for i in 1..n {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + i as f64 * h);
            }
            let want = s * h / 3.0;
            assert_relative_eq!(p.dm_integral(dec, lo, hi), want, max_relative = 1e-9);
        }
    }
}

#[test]
fn frb_decreases_in_dm_beyond_mode() {
    // u^3 exp(-u^{3/2}) peaks at u = 2^{2/3}; past it the intensity falls monotonically
    let m = frb();
    let dm_peak = 2f64.powf(2.0 / 3.0) * 400.0;
    let mut prev = f64::INFINITY;
    let mut dm = dm_peak;
    while dm < 5000.0 {
        let v = m.eval(&Point::new([10.0, 20.0, dm]));
        assert!(v < prev);
        prev = v;
        dm += 50.0;
    }
}

#[test]
fn frb_vanishes_outside_domain_and_at_pole_edge() {
    let m = frb();
    assert_eq!(m.eval(&Point::new([10.0, -20.0, 500.0])), 0.0);
    assert_eq!(m.eval(&Point::new([10.0, 20.0, 6000.0])), 0.0);
    assert_eq!(m.eval(&Point::new([10.0, 90.0, 500.0])), 0.0);
}

#[test]
fn frb_rejects_invalid_parameters() {
    let mut theta = THETA_STAR;
    theta[5] = 0.0;
    assert!(IntensityModel::frb(Domain::frb_default(), FrbHyperparams::from_slice(&theta).unwrap()).is_err());
    assert!(FrbHyperparams::from_slice(&THETA_STAR[..5]).is_err());
    assert!(IntensityModel::frb(Domain::unit_square(), FrbHyperparams::from_slice(&THETA_STAR).unwrap()).is_err());
}

#[test]
fn gaussian_benchmark_shape_and_mass() {
    let m = IntensityModel::benchmark_gaussian();
    assert_relative_eq!(m.total_mass(), 200.0, max_relative = 1e-12);
    let mass = unit_square_sum(800, |x, y| m.eval(&Point::new([x, y])));
    assert_relative_eq!(mass, 200.0, max_relative = 1e-5);
    let r0 = m.eval(&Point::new([0.5, 0.5])) / gauss_pdf(MEAN1, COV1, 0.5, 0.5);
    for (x, y) in [(0.1, 0.9), (0.64, 0.61), (0.95, 0.05)] {
        assert_relative_eq!(m.eval(&Point::new([x, y])) / gauss_pdf(MEAN1, COV1, x, y), r0, max_relative = 1e-12);
    }
}

#[test]
fn mixture_benchmark_weights() {
    let m = IntensityModel::benchmark_mixture();
    assert_relative_eq!(m.total_mass(), 200.0, max_relative = 1e-12);
    let shape = |x: f64, y: f64| 0.71 * gauss_pdf(MEAN1, COV1, x, y) + 0.29 * gauss_pdf(MEAN2, COV2, x, y);
    let r0 = m.eval(&Point::new([0.5, 0.5])) / shape(0.5, 0.5);
    for (x, y) in [(0.25, 0.14), (0.64, 0.61), (0.05, 0.95)] {
        assert_relative_eq!(m.eval(&Point::new([x, y])) / shape(x, y), r0, max_relative = 1e-12);
    }
}

#[test]
fn mixture_with_q_one_is_first_component() {
    let d = Domain::unit_square();
    let g1 = Gaussian2::new(MEAN1, COV1).unwrap();
    let g2 = Gaussian2::new(MEAN2, COV2).unwrap();
    let mix = IntensityModel::gaussian_mixture(d.clone(), 1.0, g1.clone(), g2, 200.0).unwrap();
    let single = IntensityModel::bivariate_gaussian(d, g1, 200.0).unwrap();
    for (x, y) in [(0.1, 0.2), (0.64, 0.61), (0.9, 0.3)] {
        let p = Point::new([x, y]);
        assert_relative_eq!(mix.eval(&p), single.eval(&p), max_relative = 1e-12);
    }
}

#[test]
fn homogeneous_ball_mass_is_exact() {
    let m = IntensityModel::homogeneous(Domain::unit_square(), 100.0).unwrap();
    let ball = Sphere::new(Point::new([0.5, 0.5]), 0.05).unwrap();
    let e = m.integrate_ball(&ball, 1000, 1).unwrap();
    assert_relative_eq!(e.value, 100.0 * std::f64::consts::PI * 0.0025, max_relative = 1e-12);
    assert!(e.std_error < 1e-12);
}

#[test]
fn gaussian_ball_mass_matches_polar_quadrature() {
    let m = IntensityModel::benchmark_gaussian();
    for (cx, cy, r) in [(0.6, 0.6, 0.05), (0.3, 0.7, 0.1), (0.5, 0.4, 0.02)] {
        // polar midpoint rule
        let (nr, nt) = (400, 800);
        let mut want = 0.0;
        for i in 0..nr {
            let rho = (i as f64 + 0.5) * r / nr as f64;
            for j in 0..nt {
                let t = (j as f64 + 0.5) * 2.0 * std::f64::consts::PI / nt as f64;
                want += m.eval(&Point::new([cx + rho * t.cos(), cy + rho * t.sin()])) * rho;
            }
        }
        want *= (r / nr as f64) * (2.0 * std::f64::consts::PI / nt as f64);
        let e = m.integrate_ball(&Sphere::new(Point::new([cx, cy]), r).unwrap(), 200_000, 7).unwrap();
        assert!((e.value - want).abs() < 4.0 * e.std_error + 1e-9 * want, "{} vs {want} ± {}", e.value, e.std_error);
    }
}

#[test]
fn ball_mass_clips_to_domain() {
    let m = IntensityModel::homogeneous(Domain::unit_square(), 1.0).unwrap();
    let e = m.integrate_ball(&Sphere::new(Point::new([0.0, 0.0]), 0.1).unwrap(), 400_000, 3).unwrap();
    let quarter = std::f64::consts::PI * 0.01 / 4.0;
    assert!((e.value - quarter).abs() < 4.0 * e.std_error);
}

#[test]
fn scaled_multiplies_everything() {
    let m = frb();
    let s = m.scaled(2.5);
    let p = Point::new([1.0, 30.0, 800.0]);
    assert_relative_eq!(s.eval(&p), 2.5 * m.eval(&p), max_relative = 1e-12);
    assert_relative_eq!(s.total_mass(), 2.5 * m.total_mass(), max_relative = 1e-12);
}

#[test]
fn model_spec_parses_and_rejects_unknown_keys() {
    let spec: ModelSpec = toml::from_str("kind = \"frb\"\ntheta = [525.0, 1.5, 6.0, 2.0, 560.0, 400.0]\n").unwrap();
    assert_eq!(spec.build().unwrap(), frb());
    let spec: ModelSpec = toml::from_str("kind = \"homogeneous\"\nrate = 100.0\n").unwrap();
    assert_eq!(spec.build().unwrap().total_mass(), 100.0);
    assert!(toml::from_str::<ModelSpec>("kind = \"homogeneous\"\nrate = 1.0\nextra = 2\n").is_err());
    assert!(toml::from_str::<ModelSpec>("kind = \"homogeneous\"\nrate = -1.0\n").unwrap().build().is_err());
}
