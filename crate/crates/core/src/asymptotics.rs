//! Test-function energy expansions near a concentration point.
//!
//! A bubble `u_λ` is glued to the Green's function through a smoothstep
//! cutoff on `δ < r < 2δ`. The metric enters through the linear-response
//! model of the Paneitz operator on radial functions,
//!
//! `P v = Δ²v + 2(v'/r)' A(x)/r - ((n-2)/2) r (v'/r)' J(x) - ((n²-4)/2 - 6)(v'/r) J(x) + ((n-4)/2) q₀ v`,
//!
//! with `A` the Schouten quartic, `J = J_ij x_i x_j` and `q₀ = |W|²/(12(n-1))`.
//! The angular dependence is integrated exactly, so only radial quadratures
//! remain. Integrals are assembled as excesses over the bubble values on
//! `ℝⁿ` so that `λ⁴`-sized signals survive in double precision.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::parametrix::{n8_log_coefficient, psi4_solve};
use crate::polyalg::{harmonic_decompose, HomogPoly};
use crate::quadrature::{self, gauss_gegenbauer, gauss_legendre, Rule};
use crate::radial::{RadialFn, RadialJet};
use crate::rational::{self, Rational};
use crate::sphereforms::{area_sphere_in, gamma, paneitz_c, radial_moment, sharp_constants};
use crate::tensor::{schouten_quartic, Jet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Case {
    Flat,
    Lowdim,
    N8,
    N9,
    High,
}

impl Case {
    pub fn as_str(&self) -> &'static str {
        match self {
            Case::Flat => "flat",
            Case::Lowdim => "lowdim",
            Case::N8 => "n8",
            Case::N9 => "n9",
            Case::High => "high",
        }
    }

    pub fn accepts(&self, n: usize) -> bool {
        match self {
            Case::Flat | Case::Lowdim => (5..=7).contains(&n),
            Case::N8 => n == 8,
            Case::N9 => n == 9,
            Case::High => n >= 10,
        }
    }

    /// Default λ grid for the case.
    pub fn default_lambdas(&self) -> Vec<f64> {
        match self {
            Case::Flat | Case::Lowdim => vec![0.1, 0.05, 0.025, 0.0125],
            _ => vec![0.04, 0.02, 0.01, 0.005],
        }
    }

    fn is_relative(&self) -> bool {
        matches!(self, Case::N9 | Case::High)
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(Case::Flat),
            "lowdim" => Ok(Case::Lowdim),
            "n8" => Ok(Case::N8),
            "n9" => Ok(Case::N9),
            "high" => Ok(Case::High),
            _ => Err(Error::Parse(format!("unknown case '{s}' (flat, lowdim, n8, n9, high)"))),
        }
    }
}

/// Odd-degree smoothstep `S` on `[0, 1]` with `(degree-1)/2` vanishing
/// derivatives at both ends; `η₁(r) = S(r/δ - 1)`.
///
/// `S` is the regularised incomplete beta function `I_x(m+1, m+1)`, `m =
/// (degree-1)/2`, evaluated by a positive series below `1/2` and by symmetry
/// above. The monomial form cancels badly once the degree passes 13.
#[derive(Clone, Debug, PartialEq)]
pub struct Cutoff {
    degree: usize,
    m: usize,
    /// `S' = k x^m (1-x)^m`, `k = (2m+1)!/(m!)²`.
    k: f64,
}

impl Cutoff {
    pub fn new(degree: usize) -> Result<Self> {
        if degree < 9 || degree.is_multiple_of(2) {
            return Err(Error::Invalid(format!("cutoff degree must be odd and at least 9, got {degree}")));
        }
        let m = (degree - 1) / 2;
        let k = (0..m).fold(2.0 * m as f64 + 1.0, |acc, i| acc * (2 * m - i) as f64 / (i + 1) as f64);
        Ok(Cutoff { degree, m, k })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `I_x(m+1, m+1)` for `0 ≤ x ≤ 1/2`.
    fn lower_value(&self, x: f64) -> f64 {
        // I_x(a, a) = x^a (1-x)^a / (a B(a, a)) · Σ_j (2a)_j/(a+1)_j x^j
        let a = self.m as f64 + 1.0;
        let (mut term, mut sum, mut j) = (1.0, 1.0, 0.0);
        while term > 1e-17 * sum {
            term *= (2.0 * a + j) / (a + 1.0 + j) * x;
            sum += term;
            j += 1.0;
        }
        self.k / a * (x * (1.0 - x)).powi(self.m as i32 + 1) * sum
    }

    /// `S` and its first four derivatives at `t`, clamped outside `[0, 1]`.
    pub fn jet(&self, t: f64) -> [f64; 5] {
        if t <= 0.0 {
            return [0.0; 5];
        }
        if t >= 1.0 {
            return [1.0, 0.0, 0.0, 0.0, 0.0];
        }
        let m = self.m as i32;
        // d^i/dx^i of x^m and of (1-x)^m
        let falling = |i: i32| (0..i).fold(1.0, |acc, q| acc * (m - q) as f64);
        let dx = |i: i32| falling(i) * t.powi(m - i);
        let dy = |i: i32| if i % 2 == 0 { 1.0 } else { -1.0 } * falling(i) * (1.0 - t).powi(m - i);
        let mut out = [0.0; 5];
        out[0] = if t <= 0.5 { self.lower_value(t) } else { 1.0 - self.lower_value(1.0 - t) };
        for (j, slot) in out.iter_mut().enumerate().skip(1) {
            let d = j as i32 - 1;
            let mut binom = 1.0;
            let mut acc = 0.0;
            for i in 0..=d {
                acc += binom * dx(i) * dy(d - i);
                binom = binom * (d - i) as f64 / (i + 1) as f64;
            }
            *slot = self.k * acc;
        }
        out
    }

    /// `η₁(r) = S(r/δ - 1)` as an `r`-jet.
    pub fn eta1(&self, r: f64, delta: f64) -> RadialJet {
        let s = self.jet(r / delta - 1.0);
        let mut d = [0.0; 5];
        for (k, v) in s.iter().enumerate() {
            d[k] = v / delta.powi(k as i32);
        }
        RadialJet(d)
    }

    pub fn eta2(&self, r: f64, delta: f64) -> RadialJet {
        RadialJet::constant(1.0).add(&self.eta1(r, delta).scale(-1.0))
    }
}

/// Sphere averages of the curvature polynomials entering the model.
#[derive(Clone, Debug, PartialEq)]
pub struct AngularData {
    pub w2: Rational,
    /// Mean of the Schouten quartic on the unit sphere.
    pub a_a: Rational,
    /// Mean of `J_ij x_i x_j`.
    pub a_j: Rational,
    pub q0: Rational,
    /// Mean of `ψ₄` (`n ≥ 9`).
    pub a_psi: Rational,
    /// Coefficient of `log r` in the Green's function (`n = 8`).
    pub log_coef: Rational,
}

impl AngularData {
    pub fn zero() -> Self {
        let z = rational::zero();
        AngularData { w2: z.clone(), a_a: z.clone(), a_j: z.clone(), q0: z.clone(), a_psi: z.clone(), log_coef: z }
    }

    pub fn from_jet(jet: &Jet) -> Result<Self> {
        if !jet.trace_ok() {
            return Err(Error::Invalid("Schouten Hessian violates the trace constraint".into()));
        }
        let n = jet.n();
        let w2 = jet.w.norm_sq();
        let a_a = harmonic_decompose(&schouten_quartic(&jet.w, &jet.jh)).sphere_mean();
        let a_j = harmonic_decompose(&jet.jh.quadratic()).sphere_mean();
        let q0 = &w2 * rational::frac(1, 12 * (n as i64 - 1));
        let a_psi = if n >= 9 { harmonic_decompose(&psi4_solve(jet)?.term(4, 0)).sphere_mean() } else { rational::zero() };
        let log_coef = if n == 8 { n8_log_coefficient(jet)? } else { rational::zero() };
        Ok(AngularData { w2, a_a, a_j, q0, a_psi, log_coef })
    }
}

#[derive(Clone, Copy, Debug)]
struct AngularF64 {
    a_a: f64,
    a_j: f64,
    q0: f64,
    a_psi: f64,
    log_coef: f64,
}

impl From<&AngularData> for AngularF64 {
    fn from(a: &AngularData) -> Self {
        AngularF64 {
            a_a: rational::to_f64(&a.a_a),
            a_j: rational::to_f64(&a.a_j),
            q0: rational::to_f64(&a.q0),
            a_psi: rational::to_f64(&a.a_psi),
            log_coef: rational::to_f64(&a.log_coef),
        }
    }
}

/// Rescales `jet` by `1/k`, `k = ⌈|W|⌉`, so that `1 ≤ |W|² < (1 + 1/|W|)²`;
/// the expansions are then in their linear regime on the default grids.
pub fn unit_jet(jet: &Jet) -> Jet {
    let w = rational::to_f64(&jet.w.norm_sq()).sqrt();
    if w <= 1.0 {
        return jet.clone();
    }
    jet.rescale(&rational::frac(1, w.ceil() as i64))
}

/// Panel layout for the radial quadratures.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialGrid {
    pub per_octave: usize,
    pub order: usize,
    pub annulus_panels: usize,
}

impl Default for RadialGrid {
    fn default() -> Self {
        RadialGrid { per_octave: 2, order: 24, annulus_panels: 8 }
    }
}

impl RadialGrid {
    /// Twice the nodes in every direction.
    pub fn refined(&self) -> Self {
        RadialGrid { per_octave: 2 * self.per_octave, order: 2 * self.order, annulus_panels: 2 * self.annulus_panels }
    }
}

#[derive(Clone, Debug)]
pub struct TestFunctionModel {
    pub case: Case,
    pub n: usize,
    pub angular: AngularData,
    pub a0: f64,
    pub delta: f64,
    pub cutoff: Cutoff,
    pub grid: RadialGrid,
}

/// Radial integrals of one model at one `λ`, split by region. The `*_inner`,
/// `*_annulus` and `*_tail` parts sum to the excess over the `ℝⁿ` bubble
/// values `n_sphere` and `d_sphere`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelIntegrals {
    pub lambda: f64,
    pub n_inner: f64,
    pub n_annulus: f64,
    pub n_tail: f64,
    pub d_inner: f64,
    pub d_annulus: f64,
    pub d_tail: f64,
    pub n_sphere: f64,
    pub d_sphere: f64,
}

impl ModelIntegrals {
    /// `(N - N_S)/N_S` for the numerator `∫ Pφ·φ`.
    pub fn numerator_excess(&self) -> f64 {
        (self.n_inner + self.n_annulus - self.n_tail) / self.n_sphere
    }

    /// `(D - D_S)/D_S` for `D = ∫ |Pφ|^{2n/(n+4)}`.
    pub fn norm_excess(&self) -> f64 {
        (self.d_inner + self.d_annulus - self.d_tail) / self.d_sphere
    }

    pub fn numerator(&self) -> f64 {
        self.n_sphere * (1.0 + self.numerator_excess())
    }

    pub fn norm_integral(&self) -> f64 {
        self.d_sphere * (1.0 + self.norm_excess())
    }
}

/// Profiles at one `λ` with derivatives precomputed.
struct Profiles {
    lam: f64,
    u: Vec<RadialFn>,
    beta: Vec<RadialFn>,
    f: RadialFn,
}

impl Profiles {
    fn new(n: usize, lam: f64) -> Self {
        let s2 = n as i32 - 4;
        let u0 = RadialFn::term(lam, lam.powf(s2 as f64 / 2.0), 0, -s2);
        let b0 = RadialFn::term(lam, lam.powf(s2 as f64 / 2.0), -s2, 0).add(&u0.scale(-1.0));
        let derivs = |f0: RadialFn| {
            let mut v = vec![f0];
            for _ in 0..4 {
                let next = v.last().unwrap().deriv();
                v.push(next);
            }
            v
        };
        let f = RadialFn::term(lam, lam.powf((n as f64 + 4.0) / 2.0), 0, -(n as i32 + 4));
        Profiles { lam, u: derivs(u0), beta: derivs(b0), f }
    }

    fn jet(fs: &[RadialFn], r: f64) -> RadialJet {
        let mut d = [0.0; 5];
        for (slot, f) in d.iter_mut().zip(fs) {
            *slot = f.eval(r);
        }
        RadialJet(d)
    }
}

impl TestFunctionModel {
    /// Model for `case` in dimension `n`. Curved cases take their angular
    /// data from `jet`; `a0` is the mass-type constant for `flat`/`lowdim`.
    pub fn new(case: Case, n: usize, jet: Option<&Jet>, a0: f64) -> Result<Self> {
        if !case.accepts(n) {
            return Err(Error::Invalid(format!("case {case} is not defined for n = {n}")));
        }
        let angular = match (case, jet) {
            (Case::Flat, _) => AngularData::zero(),
            (_, Some(j)) => {
                if j.n() != n {
                    return Err(Error::Dimension { expected: n, got: j.n() });
                }
                AngularData::from_jet(j)?
            }
            (_, None) => return Err(Error::Invalid(format!("case {case} needs a curvature jet"))),
        };
        Ok(TestFunctionModel { case, n, angular, a0, delta: 1.0, cutoff: Cutoff::new(9)?, grid: RadialGrid::default() })
    }

    pub fn with_cutoff(mut self, cutoff: Cutoff) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn with_grid(mut self, grid: RadialGrid) -> Self {
        self.grid = grid;
        self
    }

    /// The same model with the tracked parameter switched off: `A₀ = 0` for
    /// `flat`/`lowdim`, a flat jet otherwise.
    pub fn baseline(&self) -> Self {
        let mut b = self.clone();
        match self.case {
            Case::Flat | Case::Lowdim => b.a0 = 0.0,
            _ => b.angular = AngularData::zero(),
        }
        b
    }

    fn s(&self) -> f64 {
        (self.n as f64 - 4.0) / 2.0
    }

    fn p(&self) -> f64 {
        2.0 * self.n as f64 / (self.n as f64 + 4.0)
    }

    /// Angularly averaged curvature part of `P` on a radial jet.
    fn curvature_term(&self, ang: &AngularF64, v: &RadialJet, r: f64) -> f64 {
        let n = self.n as f64;
        let d = &v.0;
        let g = d[1] / r;
        let gp = v.dr_over_r_prime(r);
        2.0 * gp * ang.a_a * r.powi(3) - 0.5 * (n - 2.0) * r * gp * ang.a_j * r * r
            - (0.5 * (n * n - 4.0) - 6.0) * g * ang.a_j * r * r
            + 0.5 * (n - 4.0) * ang.q0 * d[0]
    }

    fn p_model(&self, ang: &AngularF64, v: &RadialJet, r: f64) -> f64 {
        v.bilaplacian(self.n, r) + self.curvature_term(ang, v, r)
    }

    /// `(Pφ - c f_λ, φ - u_λ)` on `B_δ`: the curvature source and the
    /// correction to the bubble.
    fn inner_parts(&self, pr: &Profiles, ang: &AngularF64, r: f64) -> (f64, f64) {
        let lam_s = pr.lam.powf(self.s());
        match self.case {
            Case::Flat => (0.0, lam_s * self.a0),
            Case::Lowdim => (-self.curvature_term(ang, &Profiles::jet(&pr.beta, r), r), lam_s * self.a0),
            Case::High => (self.curvature_term(ang, &Profiles::jet(&pr.u, r), r), 0.0),
            Case::N9 => {
                let x = -self.curvature_term(ang, &Profiles::jet(&pr.beta, r), r);
                (x, lam_s * ang.a_psi * r.powi(8 - self.n as i32))
            }
            Case::N8 => {
                let x = -self.curvature_term(ang, &Profiles::jet(&pr.beta, r), r);
                (x, lam_s * ang.log_coef * r.ln())
            }
        }
    }

    /// `(Pφ, φ)` on `δ < r < 2δ`.
    fn annulus_parts(&self, pr: &Profiles, ang: &AngularF64, r: f64) -> (f64, f64) {
        let lam_s = pr.lam.powf(self.s());
        let eta2 = self.cutoff.eta2(r, self.delta);
        let green = lam_s * r.powi(4 - self.n as i32);
        match self.case {
            Case::High => {
                let phi = Profiles::jet(&pr.u, r).mul(&eta2);
                (self.p_model(ang, &phi, r), phi.value())
            }
            _ => {
                let cut = Profiles::jet(&pr.beta, r).mul(&eta2);
                let pphi = match self.case {
                    Case::Flat => -cut.bilaplacian(self.n, r),
                    _ => -self.p_model(ang, &cut, r),
                };
                let extra = match self.case {
                    Case::Flat | Case::Lowdim => lam_s * self.a0,
                    Case::N9 => lam_s * ang.a_psi * r.powi(8 - self.n as i32),
                    Case::N8 => lam_s * ang.log_coef * r.ln(),
                    Case::High => unreachable!(),
                };
                (pphi, green + extra - cut.value())
            }
        }
    }

    /// `model_integrands`: the radial densities (already multiplied by
    /// `|S^{n-1}| r^{n-1}`) of the numerator and norm excesses at radius `r`.
    pub fn densities(&self, lambda: f64, r: f64) -> (f64, f64) {
        let pr = Profiles::new(self.n, lambda);
        let ang = AngularF64::from(&self.angular);
        self.densities_with(&pr, &ang, r)
    }

    fn densities_with(&self, pr: &Profiles, ang: &AngularF64, r: f64) -> (f64, f64) {
        let c = paneitz_c(self.n);
        let p = self.p();
        let w = area_sphere_in(self.n) * r.powi(self.n as i32 - 1);
        if r < self.delta {
            let cf = c * pr.f.eval(r);
            let uv = pr.u[0].eval(r);
            let (x, y) = self.inner_parts(pr, ang, r);
            // Pφ·φ - c f u and the linearised |Pφ|^p - (c f)^p
            (w * (cf * y + x * (uv + y)), w * p * cf.powf(p - 1.0) * x)
        } else if r < 2.0 * self.delta {
            let (pphi, phi) = self.annulus_parts(pr, ang, r);
            (w * pphi * phi, w * pphi.abs().powf(p))
        } else {
            (0.0, 0.0)
        }
    }

    fn inner_edges(&self, lambda: f64) -> Vec<f64> {
        let a = (lambda / 64.0).min(self.delta / 2.0);
        quadrature::geometric_edges(a, self.delta, self.grid.per_octave, true)
    }

    /// `∫ |Pφ|^p` over the annulus. `Pφ` changes sign there and may vanish
    /// at either end (at `δ` when `β` is biharmonic), so the range is split at
    /// its zeros and every piece is graded towards both ends with
    /// `r = r₀ + h t^{n+4}`. Since `(n+4)(kp+1)` is an integer for a zero of
    /// order `k`, the integrand is smooth in `t`.
    fn annulus_norm(&self, pr: &Profiles, ang: &AngularF64, rule: &Rule) -> f64 {
        let (a, b) = (self.delta, 2.0 * self.delta);
        let pphi = |r: f64| self.annulus_parts(pr, ang, r).0;
        let dens = |r: f64| self.densities_with(pr, ang, r).1;
        const SAMPLES: usize = 512;
        let mut points = vec![a];
        let mut prev = (a, pphi(a));
        for i in 1..SAMPLES {
            let r = a + (b - a) * i as f64 / SAMPLES as f64;
            let v = pphi(r);
            if v == 0.0 {
                points.push(r);
            } else if prev.1 * v < 0.0 {
                let (mut lo, mut hi, mut flo) = (prev.0, r, prev.1);
                while hi - lo > 4.0 * f64::EPSILON * hi {
                    let mid = 0.5 * (lo + hi);
                    let fm = pphi(mid);
                    if fm == 0.0 {
                        (lo, hi) = (mid, mid);
                    } else if (fm < 0.0) == (flo < 0.0) {
                        (lo, flo) = (mid, fm);
                    } else {
                        hi = mid;
                    }
                }
                points.push(0.5 * (lo + hi));
            }
            prev = (r, v);
        }
        points.push(b);

        let m = (self.n + 4) as i32;
        let graded = |r0: f64, r1: f64| {
            let h = r1 - r0;
            let k = ((self.grid.annulus_panels as f64 * h.abs() / self.delta).ceil() as usize).max(1);
            let edges = quadrature::uniform_edges(0.0, 1.0, k);
            h.abs() * m as f64 * quadrature::composite(rule, &edges, |t| t.powi(m - 1) * dens(r0 + h * t.powi(m)))
        };
        points
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                graded(w[0], mid) + graded(w[1], mid)
            })
            .sum()
    }

    /// Radial integrals at `λ`.
    pub fn integrals(&self, lambda: f64) -> Result<ModelIntegrals> {
        if !(lambda > 0.0 && lambda < self.delta) {
            return Err(Error::Invalid(format!("lambda must lie in (0, delta), got {lambda}")));
        }
        let n = self.n;
        let pr = Profiles::new(n, lambda);
        let ang = AngularF64::from(&self.angular);
        let rule = gauss_legendre(self.grid.order);
        let inner = self.inner_edges(lambda);
        let annulus = quadrature::uniform_edges(self.delta, 2.0 * self.delta, self.grid.annulus_panels);
        let n_inner = quadrature::composite(&rule, &inner, |r| self.densities_with(&pr, &ang, r).0);
        let d_inner = quadrature::composite(&rule, &inner, |r| self.densities_with(&pr, &ang, r).1);
        let n_annulus = quadrature::composite(&rule, &annulus, |r| self.densities_with(&pr, &ang, r).0);
        let d_annulus = self.annulus_norm(&pr, &ang, &rule);

        // f u = f^p = λⁿ (r²+λ²)^{-n}; beyond δ this is an incomplete beta
        // integral in x = 1/(1+ρ²), ρ = r/λ
        let nf = n as f64;
        let rho0 = self.delta / lambda;
        let x0 = 1.0 / (1.0 + rho0 * rho0);
        let h = nf / 2.0;
        let tail = area_sphere_in(n) * 0.5 * statrs::function::beta::beta(h, h) * statrs::function::beta::beta_reg(h, h, x0);
        let whole = radial_moment(nf, 0.0, n)?;
        let c = paneitz_c(n);
        let cp = c.powf(self.p());
        Ok(ModelIntegrals {
            lambda,
            n_inner,
            n_annulus,
            n_tail: c * tail,
            d_inner,
            d_annulus,
            d_tail: cp * tail,
            n_sphere: c * whole,
            d_sphere: cp * whole,
        })
    }

    /// `ratio/Θ₄(Sⁿ) - 1` where `ratio = ∫Pφ·φ / ‖Pφ‖²_{2n/(n+4)}`.
    pub fn relative_ratio(&self, lambda: f64) -> Result<f64> {
        let m = self.integrals(lambda)?;
        Ok(relative_from_excess(m.numerator_excess(), m.norm_excess(), self.p()))
    }

    pub fn theta4_sphere(&self) -> f64 {
        sharp_constants(self.n).map(|c| c.theta4).unwrap_or(f64::NAN)
    }

    /// Closed-form coefficient of the tracked ratio term, in the convention
    /// of [`FitResult::convention`].
    pub fn expected_ratio_coefficient(&self) -> f64 {
        let n = self.n;
        let w2 = rational::to_f64(&self.angular.w2);
        match self.case {
            Case::Flat | Case::Lowdim => flat_ratio_coefficient(n) * self.a0,
            Case::N8 => n8_ratio_log_coefficient() * w2,
            Case::N9 | Case::High => high_ratio_coefficient(n) * w2,
        }
    }

    fn basis(&self) -> Vec<Basis> {
        match self.case {
            Case::Flat | Case::Lowdim => vec![Basis::Power(self.n as f64 - 4.0)],
            Case::N8 => vec![Basis::Log4, Basis::Power(4.0), Basis::Power(self.annulus_exponent())],
            Case::N9 => vec![Basis::Power(4.0)],
            // the curvature part of P on the cutoff annulus enters the norm
            // at λ^{n(n-4)/(n+4)}, barely above λ⁴ for n = 10
            Case::High => {
                let e = self.annulus_exponent();
                let mut b = vec![Basis::Power(4.0), Basis::Power(e)];
                if (e - 6.0).abs() > 0.25 {
                    b.push(Basis::Power(6.0));
                }
                b
            }
        }
    }

    /// Exponent of the cutoff-annulus contribution to the norm integral.
    fn annulus_exponent(&self) -> f64 {
        let n = self.n as f64;
        match self.case {
            Case::High => n * (n - 4.0) / (n + 4.0),
            _ => n * n / (n + 4.0),
        }
    }
}

/// `expm1(ln1p(εN) - (2/p) ln1p(εD))`.
pub fn relative_from_excess(en: f64, ed: f64, p: f64) -> f64 {
    (en.ln_1p() - (2.0 / p) * ed.ln_1p()).exp_m1()
}

/// `4((n-1)!)^{(n+4)/n} / (n²(n+2)²(n-2)(n-4) Γ(n/2)^{(2n+4)/n} π²)`.
pub fn flat_ratio_coefficient(n: usize) -> f64 {
    let nf = n as f64;
    let fact = gamma(nf);
    4.0 * fact.powf((nf + 4.0) / nf)
        / (nf * nf * (nf + 2.0).powi(2) * (nf - 2.0) * (nf - 4.0) * gamma(nf / 2.0).powf((2.0 * nf + 4.0) / nf) * std::f64::consts::PI.powi(2))
}

/// `(n²-4n-4) / (6n(n+2)(n-2)(n-6)(n-8))`, relative to `Θ₄(Sⁿ)` and per `|W|²`.
pub fn high_ratio_coefficient(n: usize) -> f64 {
    let nf = n as f64;
    (nf * nf - 4.0 * nf - 4.0) / (6.0 * nf * (nf + 2.0) * (nf - 2.0) * (nf - 6.0) * (nf - 8.0))
}

/// `210^{3/2} / (41472000 π²)`, the `λ⁴ log(1/λ)` ratio coefficient per `|W|²` at `n = 8`.
pub fn n8_ratio_log_coefficient() -> f64 {
    210f64.powf(1.5) / (41_472_000.0 * std::f64::consts::PI.powi(2))
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Basis {
    Power(f64),
    /// `λ⁴ log(1/λ)`
    Log4,
}

impl Basis {
    fn eval(&self, lam: f64) -> f64 {
        match self {
            Basis::Power(e) => lam.powf(*e),
            Basis::Log4 => lam.powi(4) * (1.0 / lam).ln(),
        }
    }

    fn label(&self) -> String {
        match self {
            Basis::Power(e) if e.fract() == 0.0 => format!("lambda^{}", *e as i64),
            Basis::Power(e) => format!("lambda^{e:.6}"),
            Basis::Log4 => "lambda^4 log(1/lambda)".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    pub residual: f64,
    pub condition: f64,
}

/// Least squares `y ≈ Σ c_k b_k(λ)` with columns scaled to unit norm before
/// the condition number is taken.
fn least_squares(basis: &[Basis], lambdas: &[f64], y: &[f64], max_condition: f64) -> Result<LeastSquares> {
    let (m, k) = (lambdas.len(), basis.len());
    if m < k {
        return Err(Error::Numeric(format!("{m} points cannot determine {k} coefficients")));
    }
    let mut a = DMatrix::<f64>::zeros(m, k);
    for (i, &l) in lambdas.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            a[(i, j)] = b.eval(l);
        }
    }
    let scales: Vec<f64> = (0..k).map(|j| a.column(j).norm()).collect();
    for (j, s) in scales.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let condition = sv.max() / sv.min();
    if !condition.is_finite() || condition > max_condition {
        return Err(Error::Numeric(format!("ill-conditioned fit: condition number {condition:.3e} exceeds {max_condition:.1e}")));
    }
    let rhs = DVector::from_column_slice(y);
    let sol = svd.solve(&rhs, 1e-300).map_err(|e| Error::Numeric(e.to_string()))?;
    let resid = (&a * &sol - &rhs).norm() / (m as f64).sqrt();
    let coefficients = sol.iter().zip(&scales).map(|(c, s)| c / s).collect();
    Ok(LeastSquares { coefficients, residual: resid, condition })
}

pub const MAX_CONDITION: f64 = 1e8;

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub case: Case,
    pub n: usize,
    pub lambdas: Vec<f64>,
    /// "relative" (ratio/Θ₄(Sⁿ) - 1) or "absolute" (ratio - Θ₄(Sⁿ)).
    pub convention: &'static str,
    pub basis: Vec<String>,
    /// Baseline-subtracted samples that were fitted.
    pub samples: Vec<f64>,
    pub fit: LeastSquares,
    /// Coefficient of the tracked term (first basis function).
    pub coefficient: f64,
    pub expected: f64,
    pub rel_error: f64,
    /// Unsubtracted samples fitted with an extra cutoff-annulus term.
    pub raw_samples: Vec<f64>,
    pub raw_basis: Vec<String>,
    pub raw_fit: Option<LeastSquares>,
    pub w2: f64,
    pub a0: f64,
    pub cutoff_degree: usize,
    pub geometric_grid: bool,
}

fn validate_lambdas(lambdas: &[f64], delta: f64) -> Result<bool> {
    if lambdas.len() < 4 {
        return Err(Error::Invalid(format!("need at least 4 lambda values, got {}", lambdas.len())));
    }
    if let Some(l) = lambdas.iter().find(|&&l| !(l > 0.0 && l < delta / 4.0)) {
        return Err(Error::Invalid(format!("lambda {l} outside (0, delta/4)")));
    }
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Invalid("lambda values must be distinct".into()));
    }
    let q0 = sorted[1] / sorted[0];
    Ok(sorted.windows(2).all(|w| ((w[1] / w[0]) / q0 - 1.0).abs() < 1e-9))
}

/// Per-λ excesses of the model and of its baseline.
fn excess_table(model: &TestFunctionModel, lambdas: &[f64]) -> Result<Vec<(ModelIntegrals, ModelIntegrals)>> {
    let base = model.baseline();
    lambdas
        .par_iter()
        .map(|&l| Ok((model.integrals(l)?, base.integrals(l)?)))
        .collect()
}

/// Fits the tracked coefficient of the ratio expansion.
pub fn fit_expansion(model: &TestFunctionModel, lambdas: &[f64]) -> Result<FitResult> {
    let geometric = validate_lambdas(lambdas, model.delta)?;
    let p = model.p();
    let theta = model.theta4_sphere();
    let scale = if model.case.is_relative() { 1.0 } else { theta };
    let table = excess_table(model, lambdas)?;
    let rel = |m: &ModelIntegrals| relative_from_excess(m.numerator_excess(), m.norm_excess(), p);
    // ratio(model)/ratio(baseline) - 1: the baseline divides out the cutoff
    // contributions that do not depend on the tracked parameter
    let samples: Vec<f64> = table.iter().map(|(m, b)| scale * (rel(m) - rel(b)) / (1.0 + rel(b))).collect();
    let raw_samples: Vec<f64> = table.iter().map(|(m, _)| scale * rel(m)).collect();

    let basis = model.basis();
    let fit = least_squares(&basis, lambdas, &samples, MAX_CONDITION)?;
    let mut raw_basis = basis.clone();
    if !matches!(model.case, Case::High | Case::N8) {
        raw_basis.push(Basis::Power(model.annulus_exponent()));
    }
    let raw_fit = least_squares(&raw_basis, lambdas, &raw_samples, MAX_CONDITION).ok();

    let coefficient = fit.coefficients[0];
    let expected = model.expected_ratio_coefficient();
    Ok(FitResult {
        case: model.case,
        n: model.n,
        lambdas: lambdas.to_vec(),
        convention: if model.case.is_relative() { "relative" } else { "absolute" },
        basis: basis.iter().map(Basis::label).collect(),
        samples,
        coefficient,
        expected,
        rel_error: rel_error(coefficient, expected),
        fit,
        raw_samples,
        raw_basis: raw_basis.iter().map(Basis::label).collect(),
        raw_fit,
        w2: rational::to_f64(&model.angular.w2),
        a0: model.a0,
        cutoff_degree: model.cutoff.degree(),
        geometric_grid: geometric,
    })
}

fn rel_error(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        (got / want - 1.0).abs()
    }
}

/// One separately fitted integral of [`numerator_coefficient_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct PartFit {
    pub name: &'static str,
    pub convention: &'static str,
    pub basis: Vec<String>,
    pub samples: Vec<f64>,
    pub fit: LeastSquares,
    pub coefficient: f64,
    pub expected: Option<f64>,
    pub rel_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NumeratorCheck {
    pub case: Case,
    pub n: usize,
    pub lambdas: Vec<f64>,
    pub numerator: PartFit,
    pub norm: PartFit,
}

/// Fits `∫Pφ·φ` and `∫|Pφ|^{2n/(n+4)}` separately against their own
/// closed forms.
pub fn numerator_coefficient_check(model: &TestFunctionModel, lambdas: &[f64]) -> Result<NumeratorCheck> {
    validate_lambdas(lambdas, model.delta)?;
    let table = excess_table(model, lambdas)?;
    let n = model.n;
    let nf = n as f64;
    let w2 = rational::to_f64(&model.angular.w2);
    let relative = model.case.is_relative();
    let basis = model.basis();
    let (n_exp, d_exp) = match model.case {
        Case::Flat | Case::Lowdim => {
            let k = 4.0 * (nf - 2.0) * (nf - 4.0) * std::f64::consts::PI.powf(nf / 2.0) / gamma(nf / 2.0);
            (Some(k * model.a0), Some(0.0))
        }
        Case::High => {
            let k = nf * nf - 4.0 * nf - 4.0;
            let den = (nf + 2.0) * (nf - 2.0) * (nf - 6.0) * (nf - 8.0);
            (Some(-k / (6.0 * nf * den) * w2), Some(-k / (3.0 * (nf + 4.0) * den) * w2))
        }
        Case::N8 => (Some(std::f64::consts::PI.powi(4) / 90.0 * w2), Some(0.0)),
        Case::N9 => (None, None),
    };
    let part = |name: &'static str, pick: &dyn Fn(&ModelIntegrals) -> (f64, f64), expected: Option<f64>| -> Result<PartFit> {
        let samples: Vec<f64> = table
            .iter()
            .map(|(m, b)| {
                let (em, sm) = pick(m);
                let (eb, _) = pick(b);
                if relative {
                    em - eb
                } else {
                    sm * (em - eb)
                }
            })
            .collect();
        let fit = least_squares(&basis, lambdas, &samples, MAX_CONDITION)?;
        let coefficient = fit.coefficients[0];
        Ok(PartFit {
            name,
            convention: if relative { "relative" } else { "absolute" },
            basis: basis.iter().map(Basis::label).collect(),
            samples,
            coefficient,
            expected,
            rel_error: expected.map(|e| rel_error(coefficient, e)),
            fit,
        })
    };
    let numerator = part("numerator", &|m: &ModelIntegrals| (m.numerator_excess(), m.n_sphere), n_exp)?;
    let mut norm = part("norm_integral", &|m: &ModelIntegrals| (m.norm_excess(), m.d_sphere), d_exp)?;
    if let (Some(0.0), Some(ne), false) = (d_exp, n_exp, relative) {
        // a vanishing target has no scale of its own: measure the fitted
        // coefficient against the numerator's, both relative to the bubble
        let (ns, ds) = (table[0].0.n_sphere, table[0].0.d_sphere);
        norm.rel_error = Some(if ne == 0.0 { norm.coefficient.abs() / ds } else { (norm.coefficient / ds).abs() / (ne / ns).abs() });
    }
    Ok(NumeratorCheck { case: model.case, n, lambdas: lambdas.to_vec(), numerator, norm })
}

/// Polynomial with `f64` coefficients for pointwise evaluation.
#[derive(Clone, Debug)]
pub struct PolyF64 {
    n: usize,
    terms: Vec<(Vec<u32>, f64)>,
}

impl PolyF64 {
    pub fn from_poly(p: &HomogPoly) -> Self {
        PolyF64 {
            n: p.n(),
            terms: p.terms().iter().map(|(e, c)| (e.clone(), c.to_f64().unwrap_or_else(|| rational::to_f64(c)))).collect(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n);
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(&k, &xi)| xi.powi(k as i32)).product::<f64>())
            .sum()
    }
}

pub fn eval_poly(p: &HomogPoly, x: &[f64]) -> f64 {
    PolyF64::from_poly(p).eval(x)
}

/// Average over `S^{n-1}` by a product Gauss rule in hyperspherical
/// coordinates, exact for polynomials of degree `≤ degree`.
pub fn sphere_average_product<F: Fn(&[f64]) -> f64>(n: usize, degree: usize, f: F) -> f64 {
    assert!(n >= 2);
    let m = degree / 2 + 1;
    // θ_k for k = 1..n-2 carries sin^{n-1-k}; in t = cos θ that is (1-t²)^{(n-2-k)/2}
    let rules: Vec<Rule> = (1..n - 1).map(|k| gauss_gegenbauer(m, (n as f64 - 2.0 - k as f64) / 2.0)).collect();
    let nphi = degree + 1;
    let mut x = vec![0.0; n];
    let mut total = 0.0;
    let mut mass = 0.0;
    fn rec<F: Fn(&[f64]) -> f64>(
        rules: &[Rule],
        nphi: usize,
        k: usize,
        rad: f64,
        weight: f64,
        x: &mut [f64],
        f: &F,
        total: &mut f64,
        mass: &mut f64,
    ) {
        if k == rules.len() {
            for j in 0..nphi {
                let phi = 2.0 * std::f64::consts::PI * j as f64 / nphi as f64;
                x[k] = rad * phi.cos();
                x[k + 1] = rad * phi.sin();
                *total += weight * f(x);
                *mass += weight;
            }
            return;
        }
        for (t, w) in rules[k].nodes.iter().zip(&rules[k].weights) {
            x[k] = rad * t;
            rec(rules, nphi, k + 1, rad * (1.0 - t * t).max(0.0).sqrt(), weight * w, x, f, total, mass);
        }
    }
    rec(&rules, nphi, 0, 1.0, 1.0, &mut x, &f, &mut total, &mut mass);
    total / mass
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloCheck {
    pub lambda: f64,
    pub samples: usize,
    pub exact: f64,
    pub estimate: f64,
    pub sigma: f64,
    pub within_3sigma: bool,
}

/// Monte-Carlo check of the angular reduction of the high-case numerator.
///
/// The numerator is affine in the sphere averages `(ā, j̄)` of the Schouten
/// quartic and of `J_ij x_i x_j`; replacing them by their values at uniform
/// random directions gives an unbiased estimator of the same number.
pub fn mc_numerator_check(jet: &Jet, lambda: f64, samples: usize, seed: u64) -> Result<MonteCarloCheck> {
    let n = jet.n();
    let model = TestFunctionModel::new(Case::High, n, Some(jet), 0.0)?;
    let numerator = |a_a: f64, a_j: f64| -> Result<f64> {
        let mut m = model.clone();
        m.angular.a_a = Rational::from_float(a_a).ok_or_else(|| Error::Numeric("non-finite average".into()))?;
        m.angular.a_j = Rational::from_float(a_j).ok_or_else(|| Error::Numeric("non-finite average".into()))?;
        Ok(m.integrals(lambda)?.numerator())
    };
    let exact = model.integrals(lambda)?.numerator();
    let base = numerator(0.0, 0.0)?;
    let k_a = numerator(1.0, 0.0)? - base;
    let k_j = numerator(0.0, 1.0)? - base;

    let quartic = PolyF64::from_poly(&schouten_quartic(&jet.w, &jet.jh));
    let quad = PolyF64::from_poly(&jet.jh.quadratic());
    const CHUNK: usize = 10_000;
    let chunks = samples.div_ceil(CHUNK);
    let partial: Vec<(f64, f64, usize)> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(ci as u64);
            let count = CHUNK.min(samples - ci * CHUNK);
            let (mut s1, mut s2) = (0.0, 0.0);
            let mut x = vec![0.0; n];
            for _ in 0..count {
                for xi in x.iter_mut() {
                    *xi = StandardNormal.sample(&mut rng);
                }
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                x.iter_mut().for_each(|v| *v /= norm);
                // deviation from the flat numerator, so the variance does not cancel
                let v = k_a * quartic.eval(&x) + k_j * quad.eval(&x);
                s1 += v;
                s2 += v * v;
            }
            (s1, s2, count)
        })
        .collect();
    let (s1, s2, cnt) = partial.iter().fold((0.0, 0.0, 0usize), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let mean = s1 / cnt as f64;
    let var = (s2 / cnt as f64 - mean * mean).max(0.0) * cnt as f64 / (cnt as f64 - 1.0);
    let sigma = (var / cnt as f64).sqrt();
    let estimate = base + mean;
    Ok(MonteCarloCheck {
        lambda,
        samples: cnt,
        exact,
        estimate,
        sigma,
        within_3sigma: (mean - (exact - base)).abs() <= 3.0 * sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::frac;

    #[test]
    fn smoothstep_matches_derivatives_at_ends() {
        for deg in [9, 11] {
            let c = Cutoff::new(deg).unwrap();
            let a = c.jet(1e-9);
            let b = c.jet(1.0 - 1e-9);
            assert!(a.iter().all(|v| v.abs() < 1e-4));
            assert!((b[0] - 1.0).abs() < 1e-12 && b[1..].iter().all(|v| v.abs() < 1e-4));
            let mid = c.jet(0.5);
            assert!((mid[0] - 0.5).abs() < 1e-15);
        }
        assert!(Cutoff::new(8).is_err() && Cutoff::new(7).is_err());

        // monomial form x^5 Σ_k C(4+k,k) C(9,4-k) (-x)^k and its derivatives
        let coeffs: Vec<f64> = (0..10)
            .map(|p| match p {
                5 => 126.0,
                6 => -420.0,
                7 => 540.0,
                8 => -315.0,
                9 => 70.0,
                _ => 0.0,
            })
            .collect();
        let c = Cutoff::new(9).unwrap();
        for x in [0.1, 0.37, 0.5, 0.81] {
            let mut poly = coeffs.clone();
            let got = c.jet(x);
            for (k, v) in got.iter().enumerate() {
                let want = poly.iter().rev().fold(0.0, |acc, a| acc * x + a);
                assert!((v - want).abs() < 1e-11 * want.abs().max(1.0), "k={k} x={x}: {v} vs {want}");
                poly = poly.iter().enumerate().skip(1).map(|(i, a)| i as f64 * a).collect();
            }
        }
    }

    #[test]
    fn angular_data_closed_forms() {
        for n in [9usize, 10] {
            let jet = Jet::random(n, 3);
            let a = AngularData::from_jet(&jet).unwrap();
            let ni = n as i64;
            let a_q = &a.w2 * frac(3, 2 * ni * (ni + 2));
            let a_j = &a.w2 * frac(-1, 12 * ni * (ni - 1));
            assert_eq!(a.a_j, a_j);
            assert_eq!(a.a_a, a_q * frac(-2, 9 * (ni - 2)) - a_j / rational::int(ni - 2));
            let c0 = &a.w2 * frac((ni - 4) * (3 * ni * ni - 2 * ni - 64), 576 * ni * (ni + 2) * (ni - 1) * (ni - 6) * (ni - 8));
            assert_eq!(a.a_psi, c0);
        }
    }

    #[test]
    fn product_rule_averages_polynomials() {
        // avg x1⁴ on S^{n-1} = 3/(n(n+2))
        for n in [3usize, 6, 10] {
            let v = sphere_average_product(n, 4, |x| x[0].powi(4));
            assert!((v - 3.0 / (n * (n + 2)) as f64).abs() < 1e-14);
            let v = sphere_average_product(n, 4, |x| x[n - 1].powi(2) * x[1].powi(2));
            assert!((v - 1.0 / (n * (n + 2)) as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn flat_model_without_mass_is_a_pure_bubble() {
        let m = TestFunctionModel::new(Case::Flat, 6, None, 0.0).unwrap();
        let i = m.integrals(0.01).unwrap();
        let n = 6.0;
        let want = paneitz_c(6) * gamma(n / 2.0) * std::f64::consts::PI.powf(n / 2.0) / gamma(n);
        assert!((i.n_sphere / want - 1.0).abs() < 1e-13);
        assert!(i.numerator_excess().abs() < 1e-6);
    }
}
