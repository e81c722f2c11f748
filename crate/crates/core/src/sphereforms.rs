//! Closed-form constants of the round sphere and the standard bubbles on
//! `ℝⁿ`, plus the radial bi-Laplacian they satisfy.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature;
use crate::radial::RadialFn;
use crate::rational::{frac, Rational};

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Volume of the unit ball in `ℝⁿ`, `π^{n/2}/Γ(n/2+1)`.
pub fn omega(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    (h * PI.ln() - ln_gamma(h + 1.0)).exp()
}

/// Area of the unit sphere `S^{n-1} ⊂ ℝⁿ`, i.e. `n ω_n`.
pub fn area_sphere_in(n: usize) -> f64 {
    n as f64 * omega(n)
}

/// Volume of the round `Sⁿ`, `(n+1) ω_{n+1}`.
pub fn vol_sphere(n: usize) -> f64 {
    area_sphere_in(n + 1)
}

/// `∫_{ℝⁿ} |x|^b (|x|²+1)^{-a} dx`.
pub fn radial_moment(a: f64, b: f64, n: usize) -> Result<f64> {
    let nf = n as f64;
    let p = (b + nf) / 2.0;
    if p <= 0.0 || a - p <= 0.0 {
        return Err(Error::Invalid(format!("moment diverges for a = {a}, b = {b}, n = {n}")));
    }
    Ok((nf / 2.0 * PI.ln() + ln_gamma(p) + ln_gamma(a - p) - ln_gamma(a) - ln_gamma(nf / 2.0)).exp())
}

/// Paneitz constant `n(n+2)(n-2)(n-4)`, the coefficient in `Δ²u = c u^{(n+4)/(n-4)}`.
pub fn paneitz_c(n: usize) -> f64 {
    let n = n as f64;
    n * (n + 2.0) * (n - 2.0) * (n - 4.0)
}

#[derive(Clone, Debug)]
pub struct SharpConstants {
    pub n: usize,
    /// Q-curvature of the round sphere, `n(n+2)(n-2)/8`.
    pub q_sphere: Rational,
    pub y4: f64,
    pub theta4: f64,
    pub omega_n: f64,
    pub vol_sphere: f64,
}

pub fn sharp_constants(n: usize) -> Result<SharpConstants> {
    if n < 5 {
        return Err(Error::UnsupportedDimension(n, "sharp constants (needs n >= 5)"));
    }
    let nf = n as f64;
    let ni = n as i64;
    let ln_y4 = (paneitz_c(n) / 16.0).ln() + (4.0 / nf) * 2f64.ln() + 2.0 * (nf + 1.0) / nf * PI.ln()
        - (4.0 / nf) * ln_gamma((nf + 1.0) / 2.0);
    let y4 = ln_y4.exp();
    Ok(SharpConstants {
        n,
        q_sphere: frac(ni * (ni + 2) * (ni - 2), 8),
        y4,
        theta4: (-ln_y4).exp(),
        omega_n: omega(n),
        vol_sphere: vol_sphere(n),
    })
}

/// `u_λ = (λ/(r²+λ²))^{(n-4)/2}`.
pub fn bubble_u(n: usize, lambda: f64) -> RadialFn {
    let s2 = n as i32 - 4;
    RadialFn::term(lambda, lambda.powf(s2 as f64 / 2.0), 0, -s2)
}

/// `f_λ = (λ/(r²+λ²))^{(n+4)/2}`, so that `Δ² u_λ = c f_λ`.
pub fn bubble_f(n: usize, lambda: f64) -> RadialFn {
    let s2 = n as i32 + 4;
    RadialFn::term(lambda, lambda.powf(s2 as f64 / 2.0), 0, -s2)
}

/// Radial bi-Laplacian, by applying `h'' + (n-1)h'/r` twice in closed form.
pub fn bilap_radial(h: &RadialFn, n: usize) -> RadialFn {
    h.bilaplacian(n)
}

/// Green's function of the round-sphere Paneitz operator with pole at the
/// north pole, in stereographic coordinates from the south pole.
pub fn green_north(x: &[f64]) -> f64 {
    let n = x.len();
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let nf = n as f64;
    (r2 + 1.0).powf((nf - 4.0) / 2.0) / (nf * (nf - 2.0) * (nf - 4.0) * 2f64.powi(n as i32 - 3) * omega(n))
}

/// `‖Δu₁‖²_{L²} / ‖u₁‖²_{L^{2n/(n-4)}}` from the moment formula.
pub fn bubble_quotient_moments(n: usize) -> Result<f64> {
    let nf = n as f64;
    let s = (nf - 4.0) / 2.0;
    // Δu₁ = a1 w^{-s-1} + a2 w^{-s-2}
    let a1 = 4.0 * s * (s + 1.0) - 2.0 * s * nf;
    let a2 = -4.0 * s * (s + 1.0);
    let num = a1 * a1 * radial_moment(2.0 * s + 2.0, 0.0, n)?
        + 2.0 * a1 * a2 * radial_moment(2.0 * s + 3.0, 0.0, n)?
        + a2 * a2 * radial_moment(2.0 * s + 4.0, 0.0, n)?;
    let den = radial_moment(nf, 0.0, n)?.powf((nf - 4.0) / nf);
    Ok(num / den)
}

/// The same quotient by direct radial quadrature of `(Δu₁)²` and `u₁^{2n/(n-4)}`.
pub fn bubble_quotient_quadrature(n: usize, tol: f64) -> f64 {
    let nf = n as f64;
    let u = bubble_u(n, 1.0);
    let lap = u.laplacian(n);
    let area = area_sphere_in(n);
    let num = area * quadrature::adaptive_to_infinity(&|r: f64| lap.eval(r).powi(2) * r.powi(n as i32 - 1), 0.0, tol);
    let p = 2.0 * nf / (nf - 4.0);
    let den = area * quadrature::adaptive_to_infinity(&|r: f64| u.eval(r).powf(p) * r.powi(n as i32 - 1), 0.0, tol);
    num / den.powf(2.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_is_accurate_on_integers_and_half_integers() {
        let mut fact = 1.0f64;
        for k in 1..30 {
            fact *= k as f64;
            assert!((ln_gamma(k as f64 + 1.0) - fact.ln()).abs() < 1e-13 * fact.ln().max(1.0));
        }
        // Γ(k + 1/2) = (2k)! √π / (4^k k!)
        let mut v = PI.sqrt();
        for k in 1..20 {
            v *= k as f64 - 0.5;
            assert!((ln_gamma(k as f64 + 0.5) - v.ln()).abs() < 1e-13 * v.ln().abs().max(1.0));
        }
    }

    #[test]
    fn omega_small_cases() {
        assert!((omega(2) - PI).abs() < 1e-15);
        assert!((omega(3) / (4.0 * PI / 3.0) - 1.0).abs() < 1e-14);
        assert!((vol_sphere(5) / PI.powi(3) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn theta4_s5() {
        let c = sharp_constants(5).unwrap();
        let want = 16.0 / (105.0 * PI.powf(12.0 / 5.0));
        assert!((c.theta4 / want - 1.0).abs() < 1e-14);
        assert!((c.theta4 * c.y4 - 1.0).abs() < 1e-14);
        assert_eq!(c.q_sphere, frac(105, 8));
    }

    #[test]
    fn bubble_equation_holds_exactly_in_w_basis() {
        for n in 5..13 {
            for &lam in &[0.5, 1.0, 2.0] {
                let lhs = bilap_radial(&bubble_u(n, lam), n);
                let rhs = bubble_f(n, lam).scale(paneitz_c(n));
                assert_eq!(lhs.terms().count(), 1, "n={n}");
                let (a, b) = (lhs.terms().next().unwrap(), rhs.terms().next().unwrap());
                assert_eq!((a.0, a.1), (b.0, b.1));
                assert!((a.2 / b.2 - 1.0).abs() < 1e-14);
            }
        }
    }
}
