use elliptope::random::{tag, RngStream};
use elliptope::row::*;
use elliptope::special::BetaCdf;
use elliptope::stats::{ks_one_sample, ks_two_sample};

fn thinned(seed: u64) -> RowChainConfig {
    RowChainConfig::new(0.05, 1000, 100, seed).unwrap()
}

fn beta_cdf(target: &RowTarget) -> BetaCdf {
    let (a, b) = target.first_coordinate_beta();
    BetaCdf::new(a, b)
}

#[test]
fn stepped_chain_matches_first_coordinate_law() {
    let target = RowTarget::new(10, 3).unwrap();
    let config = thinned(3);
    let mut rng = RngStream::substream(3, tag::ROW_CHAIN, 3, 0);
    let mut state = chain_init(&target, &mut rng);
    for _ in 0..config.burn_in {
        chain_step(&mut state, &target, &config, &mut rng);
    }
    let mut xs = Vec::with_capacity(100_000);
    for _ in 0..100_000 {
        for _ in 0..config.thin {
            chain_step(&mut state, &target, &config, &mut rng);
        }
        assert!(state.current().first() > 0.0);
        xs.push(state.current().first().powi(2));
    }
    let beta = beta_cdf(&target);
    let ks = ks_one_sample(&xs, |x| beta.cdf(x)).unwrap();
    assert!(ks.statistic < 0.02, "D = {}", ks.statistic);
}

#[test]
fn sample_row_thinned_passes_ks() {
    let target = RowTarget::new(5, 2).unwrap();
    let mut rng = RngStream::new(17);
    let rows = sample_row(&target, &thinned(17), 2000, &mut rng).unwrap();
    let xs: Vec<f64> = rows.iter().map(|v| v.first().powi(2)).collect();
    let beta = beta_cdf(&target);
    let ks = ks_one_sample(&xs, |x| beta.cdf(x)).unwrap();
    assert!(ks.passes(0.001), "p = {}", ks.p_value);
}

#[test]
fn thinned_chain_agrees_with_exact_rows() {
    for (p, i) in [(5, 1), (5, 3), (10, 5)] {
        let target = RowTarget::new(p, i).unwrap();
        let mut rng = RngStream::new(p as u64 * 31 + i as u64);
        let mh: Vec<f64> = sample_row(&target, &thinned(1), 5000, &mut rng)
            .unwrap()
            .iter()
            .map(|v| v.first().powi(2))
            .collect();
        let exact: Vec<f64> = (0..5000)
            .map(|_| exact_row_sample(&target, &mut rng).first().powi(2))
            .collect();
        let ks = ks_two_sample(&mh, &exact).unwrap();
        assert!(ks.passes(0.001), "({p},{i}) p = {}", ks.p_value);
    }
}

#[test]
fn exact_row_mean() {
    let target = RowTarget::new(10, 4).unwrap();
    let mut rng = RngStream::new(5);
    let n = 100_000;
    let xs: Vec<f64> = (0..n)
        .map(|_| exact_row_sample(&target, &mut rng).first().powi(2))
        .collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!((mean - 5.0 / 11.0).abs() < 3.0 * se);
}

fn random_unit(d: usize, rng: &mut RngStream) -> Vec<f64> {
    let mut v = vec![0.0; d];
    rng.unit_direction(&mut v);
    v
}

#[test]
fn proposal_density_is_symmetric() {
    let mut rng = RngStream::new(2);
    for d in [2, 3, 5] {
        for _ in 0..100 {
            let a = random_unit(d, &mut rng);
            let b = random_unit(d, &mut rng);
            let sigma = 0.05 + rng.uniform();
            let ab = proposal_density(&a, &b, sigma).unwrap();
            let ba = proposal_density(&b, &a, sigma).unwrap();
            assert!((ab - ba).abs() <= 1e-8 * ab.max(1.0), "d={d} {ab} {ba}");
        }
    }
}

/// `√2 Γ((d+1)/2) / Γ(d/2)`: slope of the relative deviation from the
/// uniform density in `cos θ / σ`.
fn first_order_slope(d: usize) -> f64 {
    use elliptope::special::ln_gamma;
    std::f64::consts::SQRT_2 * (ln_gamma((d as f64 + 1.0) / 2.0) - ln_gamma(d as f64 / 2.0)).exp()
}

#[test]
fn proposal_density_wide_limit() {
    let mut rng = RngStream::new(4);
    for d in [2, 3, 5] {
        let limit = limiting_uniform_density(d);
        let slope = first_order_slope(d);
        for _ in 0..20 {
            let a = random_unit(d, &mut rng);
            let b = random_unit(d, &mut rng);
            let cos: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            let q = proposal_density(&a, &b, 100.0).unwrap();
            let rel = q / limit - 1.0;
            assert!(
                (rel - slope * cos / 100.0).abs() < 2e-4,
                "d={d} rel={rel} cos={cos}"
            );
            let q = proposal_density(&a, &b, 1e4).unwrap();
            assert!((q / limit - 1.0).abs() < 1e-3);
        }
    }
    assert!((limiting_uniform_density(2) - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
    assert!((first_order_slope(2) - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-12);
}

/// Composite Simpson over the angle of `ṽ` on the unit circle.
#[test]
fn proposal_density_integrates_to_one_on_circle() {
    for (sigma, theta0) in [(0.3, 0.4), (1.0, 1.2), (0.1, -0.7)] {
        let v = [f64::cos(theta0), f64::sin(theta0)];
        let f = |t: f64| proposal_density(&[t.cos(), t.sin()], &v, sigma).unwrap();
        let n = 4000;
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let mut s = 0.0;
        for k in 0..n {
            let a = theta0 - std::f64::consts::PI + k as f64 * h;
            s += h / 6.0 * (f(a) + 4.0 * f(a + 0.5 * h) + f(a + h));
        }
        assert!((s - 1.0).abs() < 1e-6, "σ={sigma}: {s}");
    }
}

#[test]
fn ergodic_bound_dominates_target() {
    let target = RowTarget::new(5, 2).unwrap();
    let report = ergodic_bound(&target).unwrap();
    let mut rng = RngStream::new(8);
    for _ in 0..10_000 {
        let mut v = random_unit(target.ambient_dim(), &mut rng);
        v[0] = v[0].abs();
        assert!(report.target_density(v[0]) <= report.m_constant * report.c_q * (1.0 + 1e-12));
    }
    assert_eq!(report.tv_bound(0), 2.0);
    let mut prev = report.tv_bound(0);
    for n in 1..200 {
        let t = report.tv_bound(n);
        assert!(t < prev);
        prev = t;
    }
}

#[test]
fn wide_chain_acceptance_meets_bound() {
    let target = RowTarget::new(5, 2).unwrap();
    let report = ergodic_bound(&target).unwrap();
    let config = RowChainConfig::new(100.0, 1000, 1, 21).unwrap();
    let mut chain = RowChain::new(target, config, RngStream::new(21));
    chain.burn_in();
    chain.reset_counters();
    let steps = 200_000;
    chain.advance(steps);
    let rate = chain.stats().acceptance_ratio();
    let se = (rate * (1.0 - rate) / steps as f64).sqrt();
    assert!(
        rate >= report.acceptance_lower_bound() - 3.0 * se,
        "{rate} vs {}",
        report.acceptance_lower_bound()
    );
}

#[test]
fn hemisphere_normalizer_matches_quadrature() {
    // d = 3, exponent 1: ∫ v₁ dS over the upper hemisphere in polar angle.
    let numeric = elliptope::quadrature::adaptive_simpson(
        |t: f64| t.cos() * t.sin() * 2.0 * std::f64::consts::PI,
        0.0,
        std::f64::consts::FRAC_PI_2,
        1e-12,
    )
    .unwrap();
    assert!((hemisphere_moment(3, 1) - numeric).abs() < 1e-8);
    let report = ergodic_bound(&RowTarget::new(3, 1).unwrap()).unwrap();
    assert!((report.c_f - 1.0 / numeric).abs() < 1e-8);
}

#[test]
fn visits_whole_hemisphere() {
    let target = RowTarget::new(4, 1).unwrap();
    let mut chain = RowChain::new(target, thinned(9), RngStream::new(9));
    chain.burn_in();
    let mut bins = [0usize; 10];
    for _ in 0..5000 {
        let v1 = chain.next_sample().first();
        bins[((v1 * 10.0) as usize).min(9)] += 1;
    }
    assert!(bins.iter().all(|&b| b > 0), "{bins:?}");
}
