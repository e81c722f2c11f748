use proptest::prelude::*;

use qcurv::asymptotics::{relative_from_excess, Cutoff};
use qcurv::parametrix::{n8_log_coefficient, psi4_closed_form, psi4_solve, verify_recursion_residual};
use qcurv::polyalg::{harmonic_decompose, solve_aa, HomogPoly};
use qcurv::quadrature::{gauss_gegenbauer, gauss_legendre};
use qcurv::rational::{self, frac, int};
use qcurv::spectral::SpectralSolver;
use qcurv::sphereforms::{bilap_radial, bubble_f, bubble_u, paneitz_c, radial_moment, sharp_constants};
use qcurv::tensor::{fix_trace, quartic_form, required_trace, sphere_average_quartic, Jet, SchoutenHessian, WeylTensor};

/// Homogeneous polynomial of degree `m` in `n` variables with small integer
/// coefficients on up to six random monomials.
fn poly(n: usize, m: u32) -> impl Strategy<Value = HomogPoly> {
    let monomial = (prop::collection::vec(0..n, m as usize), -9i64..=9);
    prop::collection::vec(monomial, 0..6).prop_map(move |ts| {
        let terms = ts.into_iter().map(|(idx, c)| {
            let mut e = vec![0u32; n];
            for i in idx {
                e[i] += 1;
            }
            (e, int(c))
        });
        HomogPoly::from_terms(n, m, terms.collect::<Vec<_>>()).unwrap()
    })
}

fn dim_and_poly() -> impl Strategy<Value = (usize, HomogPoly)> {
    (2usize..=7, 0u32..=6).prop_flat_map(|(n, m)| (Just(n), poly(n, m)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn harmonic_decomposition_reconstructs((_, p) in dim_and_poly()) {
        let dec = harmonic_decompose(&p);
        prop_assert_eq!(dec.reconstruct(), p.clone());
        for k in 0..dec.len() as u32 {
            prop_assert!(dec.harmonic(k).is_harmonic());
        }
    }

    #[test]
    fn laplacian_is_linear_and_lowers_degree((n, p) in dim_and_poly(), c in -5i64..=5) {
        let other = if p.degree() == 0 { p.clone() } else { p.partial(0).mul(&HomogPoly::variable(n, n - 1)) };
        let q = p.scale(&int(c)).add(&other);
        let lhs = q.laplacian();
        let rhs = p.laplacian().scale(&int(c)).add(&other.laplacian());
        prop_assert_eq!(lhs.clone(), rhs);
        prop_assert_eq!(lhs.n(), n);
        if p.degree() >= 2 {
            prop_assert_eq!(p.laplacian().degree(), p.degree() - 2);
        }
    }

    #[test]
    fn product_rule_for_r2((n, p) in dim_and_poly()) {
        // Δ(r²p) = r²Δp + (2n + 4m) p
        let m = p.degree() as i64;
        let lhs = p.mul_r2_pow(1).laplacian();
        let rhs = p.laplacian().mul_r2_pow(1).add(&p.scale(&int(2 * n as i64 + 4 * m)));
        if p.degree() >= 2 {
            prop_assert_eq!(lhs, rhs);
        } else {
            prop_assert_eq!(lhs, p.scale(&int(2 * n as i64 + 4 * m)));
        }
    }

    #[test]
    fn solve_aa_inverts_the_operator((n, rhs) in (1usize..=12, 0u32..=5).prop_flat_map(|(n, m)| (Just(n), poly(n, m)))) {
        let psi = solve_aa(n, &rhs).unwrap();
        prop_assert!(verify_recursion_residual(&psi, &rhs).is_zero());
        prop_assert!(psi.max_logpow() <= 2);
    }

    #[test]
    fn rational_text_round_trip(p in -1_000_000i64..1_000_000, q in 1i64..1_000_000) {
        let r = frac(p, q);
        prop_assert_eq!(rational::parse(&rational::format(&r)).unwrap(), r.clone());
        prop_assert!((rational::to_f64(&r) - p as f64 / q as f64).abs() <= 1e-15 * (p as f64 / q as f64).abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_weyl_tensors_satisfy_the_quartic_identities(n in 4usize..=7, seed in any::<u64>()) {
        let w = WeylTensor::random(n, seed);
        prop_assert!(w.check_symmetries().is_ok());
        prop_assert!(w.trace().iter().flatten().all(|v| v == &rational::zero()));
        let w2 = w.norm_sq();
        let q = quartic_form(&w);
        prop_assert_eq!(q.laplacian().laplacian(), HomogPoly::constant(n, &w2 * int(12)));
        prop_assert_eq!(w.cross_contraction(), &w2 * frac(1, 2));
        prop_assert_eq!(sphere_average_quartic(&w), harmonic_decompose(&q).sphere_mean() * int(n as i64));
    }

    #[test]
    fn weyl_scaling_is_quadratic(n in 4usize..=7, seed in any::<u64>(), c in 1i64..=7) {
        let w = WeylTensor::random(n, seed);
        let k = int(c);
        prop_assert_eq!(w.scale(&k).norm_sq(), w.norm_sq() * &k * &k);
        prop_assert_eq!(quartic_form(&w.scale(&k)), quartic_form(&w).scale(&(&k * &k)));
    }

    #[test]
    fn fix_trace_hits_the_constraint(n in 4usize..=8, seed in any::<u64>(), entries in prop::collection::vec(-4i64..=4, 64)) {
        let w = WeylTensor::random(n, seed);
        let mut m = vec![vec![rational::zero(); n]; n];
        for i in 0..n {
            for j in i..n {
                let v = int(entries[(i * 8 + j) % 64]);
                m[i][j] = v.clone();
                m[j][i] = v;
            }
        }
        let jh = SchoutenHessian::from_matrix(m).unwrap();
        let fixed = fix_trace(&jh, &w);
        prop_assert_eq!(fixed.trace(), required_trace(&w));
        prop_assert_eq!(required_trace(&w), -w.norm_sq() / int(12 * (n as i64 - 1)));
        let jet = Jet { w: w.clone(), jh: fixed };
        prop_assert!(jet.trace_ok());
    }

    #[test]
    fn jet_json_round_trip(n in 4usize..=9, seed in any::<u64>()) {
        let jet = Jet::random(n, seed);
        prop_assert_eq!(Jet::from_json(&jet.to_json()).unwrap(), jet);
    }

    #[test]
    fn bubble_solves_the_paneitz_equation(n in 5usize..=16, lam in 0.05f64..20.0, r in 0.0f64..50.0) {
        let nf = n as f64;
        let u = bubble_u(n, lam);
        let lhs = bilap_radial(&u, n).eval(r);
        let rhs = paneitz_c(n) * u.eval(r).powf((nf + 4.0) / (nf - 4.0));
        prop_assert!((lhs / rhs - 1.0).abs() < 1e-10, "{} vs {}", lhs, rhs);
        prop_assert!((bubble_f(n, lam).eval(r) / u.eval(r).powf((nf + 4.0) / (nf - 4.0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn radial_moments_obey_the_beta_recurrence(n in 5usize..=20, a in 0.05f64..6.0, b in 0.0f64..3.0) {
        // ∫ |x|^b (1+|x|²)^{-a}: raising a by one multiplies by (a - p)/a, p = (n + b)/2
        let p = (n as f64 + b) / 2.0;
        let a = a + p;
        let m0 = radial_moment(a, b, n).unwrap();
        let m1 = radial_moment(a + 1.0, b, n).unwrap();
        prop_assert!((m1 / m0 / ((a - p) / a) - 1.0).abs() < 1e-11);
        prop_assert!(radial_moment(p, b, n).is_err());
    }

    #[test]
    fn sharp_constants_are_dual(n in 5usize..=40) {
        let c = sharp_constants(n).unwrap();
        prop_assert!((c.theta4 * c.y4 - 1.0).abs() < 1e-14);
        prop_assert!(c.y4 > 0.0 && c.omega_n > 0.0);
    }

    #[test]
    fn gauss_legendre_is_exact_to_degree_2m_minus_1(m in 1usize..=30, k in 0usize..60) {
        let k = k % (2 * m);
        let rule = gauss_legendre(m);
        let got = rule.apply(|x| x.powi(k as i32));
        let want = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
        prop_assert!((got - want).abs() < 1e-13, "m={} k={} got {}", m, k, got);
    }

    #[test]
    fn gauss_gegenbauer_weights_sum_to_the_beta_mass(m in 1usize..=40, a in 0.0f64..6.0) {
        // ∫(1-x²)^a dx = B(1/2, a+1), and x² is integrated exactly
        let rule = gauss_gegenbauer(m, a);
        let total: f64 = rule.weights.iter().sum();
        let want = statrs::function::beta::beta(0.5, a + 1.0);
        if m >= 2 {
            let second = rule.apply(|x| x * x);
            prop_assert!((second / statrs::function::beta::beta(1.5, a + 1.0) - 1.0).abs() < 1e-12);
        }
        prop_assert!((total / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cutoff_is_a_monotone_symmetric_step(x in 0.0f64..=1.0, half in 4usize..=8) {
        let c = Cutoff::new(2 * half + 1).unwrap();
        let s = c.jet(x);
        let t = c.jet(1.0 - x);
        prop_assert!((s[0] + t[0] - 1.0).abs() < 1e-14);
        prop_assert!((s[1] - t[1]).abs() <= 1e-12 * s[1].abs().max(1.0));
        prop_assert!(s[1] >= 0.0);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&s[0]));
    }

    #[test]
    fn relative_excess_matches_the_direct_ratio(en in -1e-3f64..1e-3, ed in -1e-3f64..1e-3, n in 5usize..=12) {
        let p = 2.0 * n as f64 / (n as f64 + 4.0);
        let direct = (1.0 + en) / (1.0 + ed).powf(2.0 / p) - 1.0;
        prop_assert!((relative_from_excess(en, ed, p) - direct).abs() < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn psi4_agrees_with_the_closed_form(n in 9usize..=11, seed in any::<u64>()) {
        let jet = Jet::random(n, seed);
        let psi = psi4_solve(&jet).unwrap();
        prop_assert_eq!(psi.term(4, 0), psi4_closed_form(&jet).unwrap());
    }

    #[test]
    fn n8_log_coefficient_tracks_the_weyl_norm(seed in any::<u64>(), c in 1i64..=4) {
        let jet = Jet::random(8, seed);
        let k = int(c);
        let base = n8_log_coefficient(&jet).unwrap();
        prop_assert_eq!(base.clone(), -jet.w.norm_sq() / int(1440));
        prop_assert_eq!(n8_log_coefficient(&jet.rescale(&k)).unwrap(), base * &k * &k);
    }

    #[test]
    fn spectral_round_trip_and_scale_invariance(n in 5usize..=9, coeffs in prop::collection::vec(-1.0f64..1.0, 9), k in 0.1f64..10.0) {
        let s = SpectralSolver::new(n, 24).unwrap();
        let mut c = vec![0.0; 25];
        c[0] = 3.0;
        for (l, v) in coeffs.iter().enumerate() {
            c[l + 1] = v * 0.5f64.powi(l as i32 + 1);
        }
        let f = s.from_coeffs(c).unwrap();
        let back = s.analyze(&s.synthesize(&f));
        prop_assert!(back.dist(&f) <= 1e-12 * f.norm());
        let t = s.theta4_functional(&f).unwrap();
        prop_assert!((s.theta4_functional(&f.scale(k)).unwrap() / t - 1.0).abs() < 1e-12);
        prop_assert!(t <= sharp_constants(n).unwrap().theta4 * (1.0 + 1e-10));
    }

    #[test]
    fn mobius_pullback_composes(n in 5usize..=8, t1 in 0.7f64..1.5, t2 in 0.7f64..1.5) {
        let s = SpectralSolver::new(n, 48).unwrap();
        let mut c = vec![0.0; 49];
        c[0] = 2.0;
        c[1] = 0.3;
        c[2] = -0.1;
        let f = s.from_coeffs(c).unwrap();
        let a = s.mobius_pullback(&s.mobius_pullback(&f, t1), t2);
        let b = s.mobius_pullback(&f, t1 * t2);
        prop_assert!(a.dist(&b) <= 1e-9 * b.norm(), "{}", a.dist(&b) / b.norm());
    }
}
