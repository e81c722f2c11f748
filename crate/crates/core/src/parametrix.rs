//! Leading terms of the Green's function of the Paneitz operator at a pole,
//! in conformal normal coordinates.
//!
//! The normalised Green's function is `H = 2n(2-n)(4-n) ω_n G`. Its
//! expansion `H = r^{4-n}(1 + Σ ψ_i)` is built by solving
//! `A_{2-n}A_{4-n} ψ_i + φ_i = 0` shell by shell, with the sources `φ_i`
//! provided by a [`SourceSupplier`].

use num_traits::Zero;
use serde_json::json;

use crate::error::{Error, Result};
use crate::polyalg::{apply_aa, solve_aa, HomogPoly, LogRadialExpansion};
use crate::rational::{self, frac, int, Rational};
use crate::sphereforms::omega;
use crate::tensor::{quartic_form, quartic_gradient_square, Jet};

/// Regularity class of the remainder after the displayed terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Remainder {
    /// `O⁽⁴⁾(r)`, dimensions 5 to 7.
    O4R,
    /// `O⁽⁴⁾(1)`, dimension 8.
    O4One,
    /// `O⁽⁴⁾(r^{9-n})`, dimensions 9 and up.
    O4R9N,
    /// Exact: nothing is left over (flat metric).
    OInfOne,
}

impl Remainder {
    pub fn as_str(&self) -> &'static str {
        match self {
            Remainder::O4R => "O4(r)",
            Remainder::O4One => "O4(1)",
            Remainder::O4R9N => "O4(r^{9-n})",
            Remainder::OInfOne => "Oinf(1)",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GreenExpansion {
    pub n: usize,
    /// Explicit part, carrying the `r^{4-n}` prefactor.
    pub expansion: LogRadialExpansion,
    /// Name of the undetermined constant term (mass), if one appears.
    pub constant: Option<&'static str>,
    pub remainder: Remainder,
}

impl GreenExpansion {
    /// Factor `c` with `G = c·H`.
    pub fn green_scale(&self) -> f64 {
        let n = self.n as f64;
        1.0 / (2.0 * n * (2.0 - n) * (4.0 - n) * omega(self.n))
    }

    /// Terms with a positive power of `log r`.
    pub fn log_terms(&self) -> Vec<(u32, u32, HomogPoly)> {
        self.expansion
            .terms()
            .iter()
            .filter(|(&(_, k), _)| k > 0)
            .map(|(&(d, k), p)| (d, k, p.clone()))
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let logs: Vec<_> = self
            .log_terms()
            .into_iter()
            .map(|(deg, logpow, poly)| json!({"deg": deg, "logpow": logpow, "poly": poly}))
            .collect();
        json!({
            "n": self.n,
            "normalization": "H = 2n(2-n)(4-n) omega_n G",
            "expansion": self.expansion,
            "constant": self.constant,
            "remainder": self.remainder.as_str(),
            "log_terms": logs,
        })
    }
}

/// Supplies the source `φ_d` of the degree-`d` shell from the shells already
/// solved. `None` means the supplier has no data at that order.
pub trait SourceSupplier {
    fn n(&self) -> usize;
    fn source(&self, degree: u32, solved: &LogRadialExpansion) -> Option<HomogPoly>;
}

/// Flat metric: every source vanishes.
pub struct FlatSource {
    pub n: usize,
}

impl SourceSupplier for FlatSource {
    fn n(&self) -> usize {
        self.n
    }

    fn source(&self, degree: u32, _: &LogRadialExpansion) -> Option<HomogPoly> {
        Some(HomogPoly::zero(self.n, degree))
    }
}

/// Sources determined by a curvature jet. Conformal normal coordinates kill
/// the shells below degree 4; beyond degree 4 the jet carries no data.
pub struct JetSource<'a> {
    pub jet: &'a Jet,
}

impl SourceSupplier for JetSource<'_> {
    fn n(&self) -> usize {
        self.jet.n()
    }

    fn source(&self, degree: u32, _: &LogRadialExpansion) -> Option<HomogPoly> {
        match degree {
            0..=3 => Some(HomogPoly::zero(self.n(), degree)),
            4 => Some(phi4(self.jet)),
            _ => None,
        }
    }
}

/// Runs the shell recursion for degrees `1..=max_degree`. Returns
/// `Σ ψ_d` (radial exponent 0) and the last degree reached.
pub fn run_recursion(max_degree: u32, source: &dyn SourceSupplier) -> Result<(LogRadialExpansion, u32)> {
    let n = source.n();
    let mut psi = LogRadialExpansion::new(n, Rational::zero());
    let mut reached = 0;
    for d in 1..=max_degree {
        let Some(phi) = source.source(d, &psi) else { break };
        if phi.degree() != d && !phi.is_zero() {
            return Err(Error::Invalid(format!("source for shell {d} has degree {}", phi.degree())));
        }
        psi = psi.add(&solve_aa(n, &phi)?);
        reached = d;
    }
    Ok((psi, reached))
}

/// `φ₄ = -(4(n-4)/9) Q + 2(n-4)(n-6) r² J_ij x_i x_j + (n-4)|W|²/(24(n-1)) r⁴`.
pub fn phi4(jet: &Jet) -> HomogPoly {
    let n = jet.n() as i64;
    let r4 = HomogPoly::r2(jet.n()).square();
    quartic_form(&jet.w)
        .scale(&frac(-4 * (n - 4), 9))
        .add_scaled(&jet.jh.quadratic().mul_r2_pow(1), &int(2 * (n - 4) * (n - 6)))
        .add_scaled(&r4, &(jet.w.norm_sq() * frac(n - 4, 24 * (n - 1))))
}

/// Minimal solution of `A_{2-n}A_{4-n} ψ₄ + φ₄ = 0`. Needs `n ≥ 8`; for
/// `n = 8` the top block picks up a `log r`.
pub fn psi4_solve(jet: &Jet) -> Result<LogRadialExpansion> {
    if jet.n() < 8 {
        return Err(Error::UnsupportedDimension(jet.n(), "psi4_solve (needs n >= 8)"));
    }
    solve_aa(jet.n(), &phi4(jet))
}

/// The two bracketed polynomials of the `n ≥ 9` closed form of `ψ₄` and
/// its `r⁴` coefficient: `ψ₄ = h4/(40(n-2)) + r² h2/(48(n-6)) + c0 r⁴`.
/// Both brackets should be harmonic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Psi4Parts {
    pub h4: HomogPoly,
    pub h2: HomogPoly,
    pub c0: Rational,
}

pub fn psi4_closed_form_parts(jet: &Jet) -> Result<Psi4Parts> {
    let n = jet.n() as i64;
    if n < 9 {
        return Err(Error::UnsupportedDimension(jet.n(), "psi4_closed_form (needs n >= 9)"));
    }
    let q = quartic_form(&jet.w);
    let s = quartic_gradient_square(&jet.w);
    let jq = jet.jh.quadratic();
    let w2 = jet.w.norm_sq();
    let r2 = HomogPoly::r2(jet.n());
    let r4 = r2.square();

    let h4 = q
        .scale(&frac(2, 9))
        .add_scaled(&s.mul_r2_pow(1), &frac(-2, 9 * (n + 4)))
        .add_scaled(&r4, &(&w2 * frac(1, 3 * (n + 2) * (n + 4))));
    let h2 = s
        .scale(&frac(4, 9 * (n + 4)))
        .add_scaled(&jq, &int(-2 * (n - 6)))
        .add_scaled(&r2, &(&w2 * frac(-(n * n + 6 * n - 32), 6 * n * (n + 4) * (n - 1))));
    let c0 = &w2 * frac((n - 4) * (3 * n * n - 2 * n - 64), 576 * n * (n + 2) * (n - 1) * (n - 6) * (n - 8));
    Ok(Psi4Parts { h4, h2, c0 })
}

/// Closed form of `ψ₄` for `n ≥ 9`, written as harmonic degree-4 part,
/// `r²` times a harmonic degree-2 part and an `r⁴` multiple of `|W|²`.
pub fn psi4_closed_form(jet: &Jet) -> Result<HomogPoly> {
    let n = jet.n() as i64;
    let Psi4Parts { h4, h2, c0 } = psi4_closed_form_parts(jet)?;
    let r4 = HomogPoly::r2(jet.n()).square();
    Ok(h4
        .scale(&frac(1, 40 * (n - 2)))
        .add_scaled(&h2.mul_r2_pow(1), &frac(1, 48 * (n - 6)))
        .add_scaled(&r4, &c0))
}

/// The `n = 9` closed form with its literal coefficients.
pub fn psi4_n9_form(jet: &Jet) -> Result<HomogPoly> {
    if jet.n() != 9 {
        return Err(Error::UnsupportedDimension(jet.n(), "psi4_n9_form"));
    }
    let q = quartic_form(&jet.w);
    let s = quartic_gradient_square(&jet.w);
    let jq = jet.jh.quadratic();
    let w2 = jet.w.norm_sq();
    let r2 = HomogPoly::r2(9);
    let r4 = r2.square();
    let h4 = q
        .scale(&frac(2, 9))
        .add_scaled(&s.mul_r2_pow(1), &frac(-2, 117))
        .add_scaled(&r4, &(&w2 * frac(1, 429)));
    let h2 = s
        .scale(&frac(4, 117))
        .add_scaled(&jq, &int(-6))
        .add_scaled(&r2, &(&w2 * frac(-103, 5616)));
    Ok(h4
        .scale(&frac(1, 280))
        .add_scaled(&h2.mul_r2_pow(1), &frac(1, 144))
        .add_scaled(&r4, &(&w2 * frac(805, 1_368_576))))
}

/// `A_{2-n}A_{4-n} ψ + φ`, computed with the generic log-aware operators.
pub fn verify_recursion_residual(psi: &LogRadialExpansion, phi: &HomogPoly) -> LogRadialExpansion {
    let n = psi.n();
    apply_aa(n, psi).add(&LogRadialExpansion::from_poly(phi.clone(), psi.radial_exp().clone()))
}

/// Flat-space expansion `H = r^{4-n}` (all shells vanish).
pub fn flat_expansion(n: usize, order: u32) -> Result<GreenExpansion> {
    if n < 5 {
        return Err(Error::UnsupportedDimension(n, "flat_expansion (needs n >= 5)"));
    }
    let (psi, _) = run_recursion(order, &FlatSource { n })?;
    let mut lead = LogRadialExpansion::from_poly(HomogPoly::constant(n, rational::one()), int(0));
    lead = lead.add(&psi);
    Ok(GreenExpansion {
        n,
        expansion: lead.times_r_pow(&int(4 - n as i64)),
        constant: None,
        remainder: Remainder::OInfOne,
    })
}

/// Leading terms of `H` for a jet: `r^{4-n} + A` for `n ≤ 7`,
/// `r^{-4}` plus the `log r` term for `n = 8`, and `r^{4-n}(1 + ψ₄)` for
/// `n ≥ 9`. A flat jet gives the flat expansion.
pub fn green_leading(jet: &Jet) -> Result<GreenExpansion> {
    let n = jet.n();
    if n < 5 {
        return Err(Error::UnsupportedDimension(n, "green_leading (needs n >= 5)"));
    }
    if jet.is_flat() {
        return flat_expansion(n, 4);
    }
    if !jet.trace_ok() {
        return Err(Error::Invalid("Schouten Hessian violates the trace constraint".into()));
    }
    let one = LogRadialExpansion::from_poly(HomogPoly::constant(n, rational::one()), int(0));
    let (body, constant, remainder) = match n {
        5..=7 => (one, Some("A"), Remainder::O4R),
        8 => {
            let psi = psi4_solve(jet)?;
            let mut body = one;
            for (&(_, k), p) in psi.terms() {
                if k > 0 {
                    body.add_term(k, p.clone());
                }
            }
            (body, None, Remainder::O4One)
        }
        _ => (one.add(&psi4_solve(jet)?), None, Remainder::O4R9N),
    };
    Ok(GreenExpansion { n, expansion: body.times_r_pow(&int(4 - n as i64)), constant, remainder })
}

/// Coefficient `c` of the `log r` term `c·log r` in `H` for `n = 8`.
pub fn n8_log_coefficient(jet: &Jet) -> Result<Rational> {
    if jet.n() != 8 {
        return Err(Error::UnsupportedDimension(jet.n(), "n8_log_coefficient"));
    }
    let psi = psi4_solve(jet)?;
    let top = psi.term(4, 1);
    let mut e = vec![0u32; 8];
    e[0] = 4;
    let c = top.coeff(&e);
    if top != HomogPoly::r2(8).square().scale(&c) {
        return Err(Error::Numeric("log term is not a multiple of r^4".into()));
    }
    Ok(c)
}
