use maxspi::analytic::{tube_alpha_bound, tube_cv, TubeConstants, TUBE_BRACKET};
use maxspi::mc::max_normal_quantile;
use maxspi::Error;
use nalgebra::DMatrix;

fn closed_form(kappa0: f64, nu: f64, alpha: f64) -> f64 {
    (nu * ((kappa0 / (std::f64::consts::PI * alpha)).powf(2.0 / nu) - 1.0)).sqrt()
}

#[test]
fn p1_bisection_matches_closed_form() {
    for (kappa0, nu, alpha) in [
        (3.0, 20.0, 0.05),
        (1.0, 5.0, 0.1),
        (10.0, 100.0, 0.01),
        (0.5, 2.0, 0.05),
    ] {
        let k = TubeConstants::simple(kappa0, nu);
        let c = tube_cv(1, alpha, &k).unwrap().value;
        let exact = closed_form(kappa0, nu, alpha);
        assert!((c - exact).abs() <= 1e-8, "{c} vs {exact}");
    }
}

fn grid(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    (0..1000).map(move |i| lo + (hi - lo) * i as f64 / 999.0)
}

#[test]
fn p1_bound_strictly_decreases_on_a_grid() {
    let (lo, hi) = TUBE_BRACKET;
    for k in [
        TubeConstants::simple(3.0, 20.0),
        TubeConstants {
            eta0: 0.4,
            euler: 1.0,
            ..TubeConstants::simple(2.0, 8.0)
        },
    ] {
        let mut prev = f64::INFINITY;
        for c in grid(lo, hi) {
            let v = tube_alpha_bound(1, c, &k).unwrap();
            assert!(v < prev, "c={c}");
            prev = v;
        }
    }
}

#[test]
fn higher_dimensional_bounds_decrease_in_the_tail() {
    // the p = 2 bound carries a c * density term that rises below c = 1
    let k = TubeConstants {
        zeta0: 1.5,
        kappa2: 0.5,
        zeta1: 0.2,
        ..TubeConstants::simple(4.0, 30.0)
    };
    for p in [2, 3, 5] {
        let mut prev = f64::INFINITY;
        for c in grid(1.0, TUBE_BRACKET.1) {
            let v = tube_alpha_bound(p, c, &k).unwrap();
            assert!(v <= prev, "p={p} c={c}");
            prev = v;
        }
    }
}

#[test]
fn gaussian_limit() {
    // a half circle: the bound becomes exp(-c^2 / 2)
    let k = TubeConstants::simple(std::f64::consts::PI, 1e4);
    let v = tube_alpha_bound(1, 2.0, &k).unwrap();
    let target = (-2.0f64).exp();
    assert!((v / target - 1.0).abs() < 0.01, "{v} vs {target}");
}

#[test]
fn larger_manifold_needs_larger_c() {
    let small = tube_cv(1, 0.05, &TubeConstants::simple(2.0, 30.0)).unwrap().value;
    let big = tube_cv(1, 0.05, &TubeConstants::simple(4.0, 30.0)).unwrap().value;
    assert!(big > small);
}

#[test]
fn bound_is_conservative_on_the_half_circle() {
    // |cos t z1 + sin t z2| over t in [0, pi] is the max over the full circle
    let grid = 1000;
    let w = DMatrix::from_fn(grid, 2, |i, j| {
        let t = std::f64::consts::PI * i as f64 / grid as f64;
        if j == 0 {
            t.cos()
        } else {
            t.sin()
        }
    });
    let mc = max_normal_quantile(&w, &vec![1.0; grid], 100_000, 0.05, 21).unwrap();
    let vt = tube_cv(1, 0.05, &TubeConstants::simple(std::f64::consts::PI, 1e4))
        .unwrap()
        .value;
    let exact = (-2.0 * 0.05f64.ln()).sqrt();
    assert!(vt >= exact);
    // one-sided, with room for Monte Carlo noise in the quantile
    assert!(vt >= mc - 0.02, "{vt} vs {mc}");
}

#[test]
fn unattainable_level_is_reported() {
    let k = TubeConstants::simple(1e9, 1.0);
    assert!(matches!(tube_cv(1, 1e-6, &k), Err(Error::BoundUnattainable { .. })));
}
