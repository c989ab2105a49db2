use fbm_chaos_core::operators::*;
use fbm_chaos_core::quadrature::Quadrature;
use fbm_chaos_core::special::gamma;
use fbm_chaos_core::{Grid2D, TimeGrid};

fn max_abs_on(f: &GridFunction2D, from: usize, g: impl Fn(f64, f64) -> f64) -> f64 {
    let grid = f.grid;
    let mut worst = 0.0f64;
    for i in from..=grid.n_s() {
        for j in from..=grid.n_t() {
            let want = g(grid.s_axis.point(i), grid.t_axis.point(j));
            worst = worst.max((f.get(i, j) - want).abs());
        }
    }
    worst
}

#[test]
fn integral_of_one_with_unit_orders_is_area() {
    let g = Grid2D::square(8, 1.5).unwrap();
    let one = GridFunction2D::from_fn(g, |_, _| 1.0);
    let out = frac_integral_2d(&one, 1.0, 1.0).unwrap();
    assert!(max_abs_on(&out, 0, |x, y| x * y) < 1e-13);
}

#[test]
fn integral_of_one_with_half_orders() {
    let g = Grid2D::new(10, 7, 1.0).unwrap();
    let one = GridFunction2D::from_fn(g, |_, _| 1.0);
    let out = frac_integral_2d(&one, 0.5, 0.5).unwrap();
    let c = gamma(1.5) * gamma(1.5);
    assert!(max_abs_on(&out, 0, |x, y| libm::sqrt(x * y) / c) < 1e-6);
}

#[test]
fn integral_splits_on_products() {
    let g = Grid2D::square(9, 1.0).unwrap();
    let (g1, g2) = (0.3, 0.8);
    let f = GridFunction2D::from_fn(g, |u, v| u * v);
    let out = frac_integral_2d(&f, g1, g2).unwrap();
    let id = GridFunction1D::from_fn(g.s_axis, |x| x);
    let a = frac_integral_1d(&id, g1, EdgeGrading::Linear).unwrap();
    let b = frac_integral_1d(&id, g2, EdgeGrading::Linear).unwrap();
    for i in 0..=9 {
        for j in 0..=9 {
            assert!((out.get(i, j) - a.samples[i] * b.samples[j]).abs() < 1e-13);
        }
    }
}

#[test]
fn derivative_inverts_integral_on_interior_nodes() {
    let g = Grid2D::square(64, 1.0).unwrap();
    let f = GridFunction2D::from_fn(g, |u, v| 1.0 + u * v);
    for &(g1, g2) in &[(0.3, 0.7), (0.5, 0.5), (0.8, 0.2)] {
        let i = frac_integral_2d(&f, g1, g2).unwrap();
        let d = frac_derivative_2d(&i, g1, g2).unwrap();
        let err = max_abs_on(&d, 1, |u, v| 1.0 + u * v);
        assert!(err < 1e-4, "({g1},{g2}): {err}");
    }
}

#[test]
fn derivative_of_order_near_one_approaches_mixed_partial() {
    let g = Grid2D::square(400, 1.0).unwrap();
    let f = GridFunction2D::from_fn(g, |u, v| u * v);
    let d = frac_derivative_2d(&f, 0.99, 0.99).unwrap();
    let err = max_abs_on(&d, 100, |_, _| 1.0);
    assert!(err < 0.05, "{err}");
}

#[test]
fn derivative_of_one_is_power_law() {
    let g = Grid2D::square(40, 1.0).unwrap();
    let one = GridFunction2D::from_fn(g, |_, _| 1.0);
    let (g1, g2) = (0.3, 0.6);
    let d = frac_derivative_2d(&one, g1, g2).unwrap();
    let c = gamma(1.0 - g1) * gamma(1.0 - g2);
    let err = max_abs_on(&d, 1, |x, y| libm::pow(x, -g1) * libm::pow(y, -g2) / c);
    assert!(err < 1e-5, "{err}");
    assert!(d.get(0, 3).is_nan() && d.get(3, 0).is_nan());
}

#[test]
fn fractional_semigroup_on_one() {
    let g = TimeGrid::new(200, 1.0).unwrap();
    let one = GridFunction1D::from_fn(g, |_| 1.0);
    for &(g1, g2) in &[(0.3, 0.4), (0.5, 0.5), (0.7, 0.6)] {
        let inner = frac_integral_1d(&one, g2, EdgeGrading::Linear).unwrap();
        let twice = frac_integral_1d(&inner, g1, EdgeGrading::Power(g2)).unwrap();
        let once = frac_integral_1d(&one, g1 + g2, EdgeGrading::Linear).unwrap();
        for (a, b) in twice.samples.iter().zip(&once.samples) {
            assert!((a - b).abs() < 1e-5, "({g1},{g2})");
        }
    }
}

/// `∫_0^t (t-u)^{γ-1} u^γ du` with `u = t(1 - v^{1/γ})`, `v = 1 - z^4` and
/// the midpoint rule.
fn axis_oracle(gamma_: f64, t: f64, n: usize) -> Vec<(f64, f64)> {
    let h = 1.0 / n as f64;
    (0..n)
        .map(|k| {
            let z = (k as f64 + 0.5) * h;
            let v = 1.0 - z * z * z * z;
            let u = t * (1.0 - v.powf(1.0 / gamma_));
            (u.powf(gamma_), 4.0 * z * z * z * h * t.powf(gamma_) / gamma_)
        })
        .collect()
}

#[test]
fn below_half_matches_independent_double_integral() {
    let (alpha, beta) = (0.3, 0.2);
    let (ga, gb) = (0.5 - alpha, 0.5 - beta);
    for &(t, s) in &[(0.6, 0.9), (1.0, 0.3)] {
        let xs = axis_oracle(ga, t, 600);
        let ys = axis_oracle(gb, s, 600);
        let mut double = 0.0;
        for &(fx, wx) in &xs {
            for &(fy, wy) in &ys {
                double += fx * wx * fy * wy;
            }
        }
        let want = t.powf(alpha - 0.5) * s.powf(beta - 0.5) * double / (gamma(ga) * gamma(gb));
        let got = kinv_f_at(alpha, beta, t, s, &Quadrature::default()).unwrap();
        assert!((got - want).abs() < 1e-5, "({t},{s}): {got} vs {want}");
    }
}

#[test]
fn one_axis_power_law() {
    let q = Quadrature::default();
    for &alpha in &[0.25, 0.75] {
        let slope = power_law_slope(alpha, &[0.25, 0.5, 1.0], &q).unwrap();
        assert!((slope - (1.0 - 2.0 * alpha)).abs() < 0.02);
    }
    let slope = power_law_slope(0.75, &[0.25, 0.5, 1.0], &q).unwrap();
    assert!((slope + 0.5).abs() < 1e-6);
}

#[test]
fn discrete_norm_is_stable_under_refinement() {
    for &(a, b) in &[(0.3, 0.7), (0.7, 0.8), (0.3, 0.2)] {
        let coarse = interior_l2_norm_sq(&kinv_apply_f(a, b, Grid2D::square(16, 1.0).unwrap()).unwrap());
        let fine = interior_l2_norm_sq(&kinv_apply_f(a, b, Grid2D::square(32, 1.0).unwrap()).unwrap());
        assert!(coarse.is_finite() && fine.is_finite());
        assert!(((fine - coarse) / fine).abs() < 0.05, "({a},{b}): {coarse} vs {fine}");
    }
}

#[test]
fn regimes_meet_at_one_half() {
    let q = Quadrature::default();
    let nodes = [(0.5, 0.5), (1.0, 1.0), (0.25, 0.75)];
    let spread = |d: f64| {
        let (lo, hi) = (0.5 - d, 0.5 + d);
        nodes
            .iter()
            .map(|&(t, s)| {
                let v = [
                    kinv_f_at(lo, lo, t, s, &q).unwrap(),
                    kinv_f_at(hi, hi, t, s, &q).unwrap(),
                    kinv_f_at(lo, hi, t, s, &q).unwrap(),
                ];
                let max = v.iter().cloned().fold(f64::MIN, f64::max);
                let min = v.iter().cloned().fold(f64::MAX, f64::min);
                max - min
            })
            .fold(0.0, f64::max)
    };
    let (wide, mid, narrow) = (spread(0.05), spread(0.02), spread(0.01));
    assert!(narrow < mid && mid < wide, "{wide} {mid} {narrow}");
    assert!(narrow < 0.05, "{narrow}");
    assert!(wide < 0.15, "{wide}");
}

#[test]
fn grid_apply_agrees_with_pointwise() {
    let g = Grid2D::new(4, 5, 2.0).unwrap();
    let f = kinv_apply_f(0.3, 0.7, g).unwrap();
    let q = Quadrature::default();
    assert!(f.get(0, 2).is_nan());
    let p = kinv_f_at(0.3, 0.7, g.s_axis.point(3), g.t_axis.point(2), &q).unwrap();
    assert!((f.get(3, 2) - p).abs() < 1e-12);
    assert!(matches!(kinv_apply_f(0.5, 0.7, g), Err(fbm_chaos_core::Error::RegimeUndefined)));
}
