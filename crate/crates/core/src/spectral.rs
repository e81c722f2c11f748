//! Zonal spectral solver on the round `Sⁿ`.
//!
//! Fields depending only on the polar angle are expanded in Gegenbauer
//! polynomials `C_l^{((n-1)/2)}(cos θ)`, orthonormalised on a Gauss rule for
//! the measure `|S^{n-1}| sin^{n-1}θ dθ`. The Paneitz operator, its Green's
//! operator and the conformal Laplacian are diagonal in this basis.

use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_gegenbauer, Rule};
use crate::rational::{frac, int, Rational};
use crate::sphereforms::{area_sphere_in, sharp_constants};

/// `μ_l = λ_l² + ((n²-2n-4)/2) λ_l + n(n+2)(n-2)(n-4)/16`, `λ_l = l(l+n-1)`.
pub fn mu_exact(n: usize, l: usize) -> Rational {
    let (n, l) = (n as i64, l as i64);
    let lam = int(l * (l + n - 1));
    &lam * &lam + &lam * frac(n * n - 2 * n - 4, 2) + frac(n * (n + 2) * (n - 2) * (n - 4), 16)
}

/// Spectrum of `-(4(n-1)/(n-2)) Δ + n(n-1)`.
pub fn nu_exact(n: usize, l: usize) -> Rational {
    let (n, l) = (n as i64, l as i64);
    frac(4 * (n - 1), n - 2) * int(l * (l + n - 1)) + int(n * (n - 1))
}

/// `C_l^{(a)}(x)` for `l = 0..=lmax` by the three-term recurrence.
pub fn gegenbauer_all(lmax: usize, a: f64, x: f64) -> Vec<f64> {
    let mut c = Vec::with_capacity(lmax + 1);
    c.push(1.0);
    if lmax >= 1 {
        c.push(2.0 * a * x);
    }
    for l in 1..lmax {
        let lf = l as f64;
        let next = (2.0 * (lf + a) * x * c[l] - (lf + 2.0 * a - 1.0) * c[l - 1]) / (lf + 1.0);
        c.push(next);
    }
    c
}

#[derive(Clone, Debug)]
struct Grid {
    rule: Rule,
    /// `z[j][l] = Z_l(x_j)`.
    z: Vec<Vec<f64>>,
}

impl Grid {
    fn len(&self) -> usize {
        self.rule.len()
    }
}

/// Zonal fields in coefficient form, `f = Σ_l c_l Z_l`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZonalField {
    pub coeffs: Vec<f64>,
}

impl ZonalField {
    pub fn scale(&self, k: f64) -> Self {
        ZonalField { coeffs: self.coeffs.iter().map(|c| k * c).collect() }
    }

    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        ZonalField { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| x + a * y).collect() }
    }

    pub fn dist(&self, other: &Self) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct IterationTrace {
    pub values: Vec<f64>,
    pub field: ZonalField,
    /// Coefficient distance between consecutive iterates.
    pub steps: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SpectralSolver {
    n: usize,
    l_max: usize,
    base: Grid,
    fine: Grid,
    /// `C_l` normalisation: `Z_l = C_l / norm[l]`.
    norm: Vec<f64>,
    mu: Vec<f64>,
    nu: Vec<f64>,
}

impl SpectralSolver {
    /// Basis up to degree `l_max` on a `2L+2` node base rule and a
    /// threefold-oversampled rule for nonlinear terms.
    pub fn new(n: usize, l_max: usize) -> Result<Self> {
        if n < 5 {
            return Err(Error::UnsupportedDimension(n, "spectral solver (needs n >= 5)"));
        }
        if l_max == 0 {
            return Err(Error::Invalid("L must be at least 1".into()));
        }
        let a = (n as f64 - 1.0) / 2.0;
        let area = area_sphere_in(n);
        let make_rule = |m: usize| {
            let mut r = gauss_gegenbauer(m, (n as f64 - 2.0) / 2.0);
            r.weights.iter_mut().for_each(|w| *w *= area);
            r
        };
        let base_rule = make_rule(2 * l_max + 2);
        let fine_rule = make_rule(3 * (2 * l_max + 2));

        let raw = |rule: &Rule| -> Vec<Vec<f64>> {
            rule.nodes.par_iter().map(|&x| gegenbauer_all(l_max, a, x)).collect()
        };
        let base_raw = raw(&base_rule);
        let norm: Vec<f64> = (0..=l_max)
            .map(|l| base_rule.weights.iter().zip(&base_raw).map(|(w, c)| w * c[l] * c[l]).sum::<f64>().sqrt())
            .collect();
        let scale = |raw: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            raw.into_iter().map(|c| c.iter().zip(&norm).map(|(v, s)| v / s).collect()).collect()
        };
        let base = Grid { z: scale(base_raw), rule: base_rule };
        let fine_raw = raw(&fine_rule);
        let fine = Grid { z: scale(fine_raw), rule: fine_rule };
        let mu = (0..=l_max).map(|l| crate::rational::to_f64(&mu_exact(n, l))).collect();
        let nu = (0..=l_max).map(|l| crate::rational::to_f64(&nu_exact(n, l))).collect();
        Ok(SpectralSolver { n, l_max, base, fine, norm, mu, nu })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn base_nodes(&self) -> &[f64] {
        &self.base.rule.nodes
    }

    pub fn base_weights(&self) -> &[f64] {
        &self.base.rule.weights
    }

    pub fn fine_nodes(&self) -> &[f64] {
        &self.fine.rule.nodes
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    /// Largest off-diagonal entry and largest diagonal deviation of the Gram
    /// matrix of `Z_0..Z_L` on the base rule.
    pub fn orthonormality_defect(&self) -> (f64, f64) {
        let (mut off, mut diag) = (0.0f64, 0.0f64);
        for l in 0..=self.l_max {
            for k in 0..=l {
                let g: f64 = (0..self.base.len()).map(|j| self.base.rule.weights[j] * self.base.z[j][l] * self.base.z[j][k]).sum();
                if k == l {
                    diag = diag.max((g - 1.0).abs());
                } else {
                    off = off.max(g.abs());
                }
            }
        }
        (off, diag)
    }

    pub fn constant(&self, value: f64) -> ZonalField {
        let mut c = vec![0.0; self.l_max + 1];
        c[0] = value / self.base.z[0][0];
        ZonalField { coeffs: c }
    }

    pub fn from_coeffs(&self, coeffs: Vec<f64>) -> Result<ZonalField> {
        if coeffs.len() != self.l_max + 1 {
            return Err(Error::Invalid(format!("expected {} coefficients", self.l_max + 1)));
        }
        Ok(ZonalField { coeffs })
    }

    fn analyze_on(&self, grid: &Grid, values: &[f64]) -> ZonalField {
        assert_eq!(values.len(), grid.len());
        let mut c = vec![0.0; self.l_max + 1];
        for (j, v) in values.iter().enumerate() {
            let wv = grid.rule.weights[j] * v;
            for (cl, z) in c.iter_mut().zip(&grid.z[j]) {
                *cl += wv * z;
            }
        }
        ZonalField { coeffs: c }
    }

    fn synthesize_on(&self, grid: &Grid, f: &ZonalField) -> Vec<f64> {
        grid.z.par_iter().map(|z| z.iter().zip(&f.coeffs).map(|(a, b)| a * b).sum()).collect()
    }

    /// Coefficients from values at the base nodes.
    pub fn analyze(&self, values: &[f64]) -> ZonalField {
        self.analyze_on(&self.base, values)
    }

    pub fn analyze_fine(&self, values: &[f64]) -> ZonalField {
        self.analyze_on(&self.fine, values)
    }

    pub fn synthesize(&self, f: &ZonalField) -> Vec<f64> {
        self.synthesize_on(&self.base, f)
    }

    pub fn synthesize_fine(&self, f: &ZonalField) -> Vec<f64> {
        self.synthesize_on(&self.fine, f)
    }

    /// Value at `x = cos θ` (θ measured from the north pole).
    pub fn eval_at(&self, f: &ZonalField, x: f64) -> f64 {
        let c = gegenbauer_all(self.l_max, (self.n as f64 - 1.0) / 2.0, x);
        c.iter().zip(&self.norm).zip(&f.coeffs).map(|((v, s), a)| v / s * a).sum()
    }

    pub fn apply_p(&self, f: &ZonalField) -> ZonalField {
        ZonalField { coeffs: f.coeffs.iter().zip(&self.mu).map(|(c, m)| c * m).collect() }
    }

    pub fn green_p(&self, f: &ZonalField) -> ZonalField {
        ZonalField { coeffs: f.coeffs.iter().zip(&self.mu).map(|(c, m)| c / m).collect() }
    }

    /// `E(u) = ∫ u P u = Σ μ_l u_l²`.
    pub fn energy(&self, u: &ZonalField) -> f64 {
        u.coeffs.iter().zip(&self.mu).map(|(c, m)| m * c * c).sum()
    }

    /// `∫ f G_P f = Σ f_l²/μ_l`.
    pub fn green_energy(&self, f: &ZonalField) -> f64 {
        f.coeffs.iter().zip(&self.mu).map(|(c, m)| c * c / m).sum()
    }

    /// `‖f‖_{L^p(Sⁿ)}` on the oversampled rule.
    pub fn lp_norm(&self, f: &ZonalField, p: f64) -> f64 {
        let v = self.synthesize_fine(f);
        let s: f64 = v.iter().zip(&self.fine.rule.weights).map(|(x, w)| w * x.abs().powf(p)).sum();
        s.powf(1.0 / p)
    }

    fn p_dual(&self) -> f64 {
        2.0 * self.n as f64 / (self.n as f64 + 4.0)
    }

    fn p_primal(&self) -> f64 {
        2.0 * self.n as f64 / (self.n as f64 - 4.0)
    }

    /// `num / ‖f‖²_p`, refusing a field whose norm vanishes.
    fn quotient(&self, num: f64, f: &ZonalField, p: f64, what: &str) -> Result<f64> {
        let norm = self.lp_norm(f, p);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Invalid(format!("{what}: field is zero (or not finite)")));
        }
        Ok(num / (norm * norm))
    }

    /// `Θ₄(f) = ∫ f G_P f / ‖f‖²_{2n/(n+4)}`.
    pub fn theta4_functional(&self, f: &ZonalField) -> Result<f64> {
        self.quotient(self.green_energy(f), f, self.p_dual(), "theta4")
    }

    /// `E(u) / ‖u‖²_{2n/(n-4)}`.
    pub fn y4(&self, u: &ZonalField) -> Result<f64> {
        self.quotient(self.energy(u), u, self.p_primal(), "y4")
    }

    /// `Y₄⁺`: the quotient restricted to fields positive on the oversampled
    /// nodes.
    pub fn y4plus(&self, u: &ZonalField) -> Result<f64> {
        if let Some(v) = self.synthesize_fine(u).into_iter().find(|&v| !(v > 0.0)) {
            return Err(Error::Invalid(format!("y4plus: field is not positive (value {v} on a node)")));
        }
        self.y4(u)
    }

    /// `E(u) / ‖Pu‖²_{2n/(n+4)}`, the local form of `Θ₄(Pu)`.
    pub fn theta4_local(&self, u: &ZonalField) -> Result<f64> {
        self.quotient(self.energy(u), &self.apply_p(u), self.p_dual(), "theta4_local")
    }

    /// `∫ f G_L f / ‖f‖²_{2n/(n+2)}` for the conformal Laplacian `L`.
    pub fn theta2(&self, f: &ZonalField) -> Result<f64> {
        let g: f64 = f.coeffs.iter().zip(&self.nu).map(|(c, m)| c * c / m).sum();
        self.quotient(g, f, 2.0 * self.n as f64 / (self.n as f64 + 2.0), "theta2")
    }

    /// `∫ u L u / ‖u‖²_{2n/(n-2)}`.
    pub fn yamabe(&self, u: &ZonalField) -> Result<f64> {
        let e: f64 = u.coeffs.iter().zip(&self.nu).map(|(c, m)| m * c * c).sum();
        self.quotient(e, u, 2.0 * self.n as f64 / (self.n as f64 - 2.0), "yamabe")
    }

    /// One step of `f ↦ ((G_P f)_+)^{(n+4)/(n-4)}`, renormalised to unit
    /// `L^{2n/(n+4)}` norm. Fails when `G_P f` has no positive part.
    pub fn extremal_map(&self, f: &ZonalField) -> Result<ZonalField> {
        let q = (self.n as f64 + 4.0) / (self.n as f64 - 4.0);
        let g = self.synthesize_fine(&self.green_p(f));
        let h: Vec<f64> = g.iter().map(|v| v.max(0.0).powf(q)).collect();
        let out = self.analyze_fine(&h);
        let s = self.lp_norm(&out, self.p_dual());
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Numeric("extremal iteration collapsed: G_P f has no positive part".into()));
        }
        Ok(out.scale(1.0 / s))
    }

    /// Damped fixed-point iteration `f ← (1-d) f + d T(f)`, normalised after
    /// every step. Records `Θ₄` of the start and of every iterate.
    pub fn extremal_iteration(&self, f0: &ZonalField, steps: usize, damping: f64) -> Result<IterationTrace> {
        if !(damping > 0.0 && damping <= 1.0) {
            return Err(Error::Invalid(format!("damping must lie in (0, 1], got {damping}")));
        }
        let pd = self.p_dual();
        let n0 = self.lp_norm(f0, pd);
        if !(n0 > 0.0) || !n0.is_finite() {
            return Err(Error::Invalid("extremal iteration needs a nonzero start".into()));
        }
        let mut f = f0.scale(1.0 / n0);
        let mut values = vec![self.theta4_functional(&f)?];
        let mut step_sizes = Vec::with_capacity(steps);
        for _ in 0..steps {
            let t = self.extremal_map(&f)?;
            let mixed = f.scale(1.0 - damping).axpy(damping, &t);
            let m = self.lp_norm(&mixed, pd);
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::Numeric("extremal iteration collapsed to zero".into()));
            }
            let next = mixed.scale(1.0 / m);
            step_sizes.push(next.dist(&f));
            f = next;
            values.push(self.theta4_functional(&f)?);
        }
        Ok(IterationTrace { values, field: f, steps: step_sizes })
    }

    /// Pull-back of `f` under the conformal dilation `y ↦ t y` in
    /// stereographic coordinates from the north pole, weighted by
    /// `σ^{(n+4)/2}` so that the `L^{2n/(n+4)}` norm is preserved.
    pub fn mobius_pullback(&self, f: &ZonalField, t: f64) -> ZonalField {
        let e = (self.n as f64 + 4.0) / 2.0;
        let vals: Vec<f64> = self
            .fine
            .rule
            .nodes
            .par_iter()
            .map(|&x| {
                let s2 = 0.5 * (1.0 - x);
                let c2 = 0.5 * (1.0 + x);
                let den = s2 + t * t * c2;
                let sigma = t / den;
                let xp = (t * t * c2 - s2) / den;
                self.eval_at(f, xp) * sigma.powf(e)
            })
            .collect();
        self.analyze_fine(&vals)
    }

    /// `P u` at the base nodes computed pointwise from `x`-derivatives of the
    /// Gegenbauer expansion, with `Δ = (1-x²)∂² - n x ∂` applied twice.
    pub fn apply_p_pointwise(&self, u: &ZonalField) -> Vec<f64> {
        let n = self.n as f64;
        let a = (n - 1.0) / 2.0;
        let l_max = self.l_max;
        // d^k/dx^k C_l^{(a)} = 2^k (a)_k C_{l-k}^{(a+k)}
        let deriv_factor = |k: usize| -> f64 { (0..k).map(|i| 2.0 * (a + i as f64)).product() };
        let c_a = (n * n - 2.0 * n - 4.0) / 2.0;
        let c_b = n * (n + 2.0) * (n - 2.0) * (n - 4.0) / 16.0;
        self.base
            .rule
            .nodes
            .par_iter()
            .map(|&x| {
                let mut d = [0.0f64; 5];
                for (k, dk) in d.iter_mut().enumerate() {
                    let c = gegenbauer_all(l_max, a + k as f64, x);
                    let fac = deriv_factor(k);
                    *dk = (k..=l_max).map(|l| u.coeffs[l] / self.norm[l] * fac * c[l - k]).sum();
                }
                let y = 1.0 - x * x;
                let lap = y * d[2] - n * x * d[1];
                let bilap = y * (y * d[4] - (n + 4.0) * x * d[3] - 2.0 * (n + 1.0) * d[2])
                    - n * x * (y * d[3] - (n + 2.0) * x * d[2] - n * d[1]);
                bilap - c_a * lap + c_b * d[0]
            })
            .collect()
    }

    /// `∫ Pu · u` by quadrature of the pointwise `Pu` against `u`.
    pub fn energy_quadrature(&self, u: &ZonalField) -> f64 {
        let pu = self.apply_p_pointwise(u);
        let uv = self.synthesize(u);
        pu.iter().zip(&uv).zip(&self.base.rule.weights).map(|((a, b), w)| w * a * b).sum()
    }

    /// `1/Y₄(Sⁿ)` from the closed form.
    pub fn theta4_sphere(&self) -> f64 {
        sharp_constants(self.n).map(|c| c.theta4).unwrap_or(f64::NAN)
    }
}

/// Checks `μ_l = (λ_l + n(n-2)/4)(λ_l + (n+2)(n-4)/4)` exactly.
pub fn mu_factorization_holds(n: usize, l: usize) -> bool {
    let (ni, li) = (n as i64, l as i64);
    let lam = int(li * (li + ni - 1));
    let prod = (&lam + frac(ni * (ni - 2), 4)) * (&lam + frac((ni + 2) * (ni - 4), 4));
    (prod - mu_exact(n, l)).is_zero()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphereforms::vol_sphere;

    #[test]
    fn mu_values() {
        assert_eq!(mu_exact(5, 0), frac(105, 16));
        for n in 5..12 {
            for l in 0..20 {
                assert!(mu_factorization_holds(n, l));
            }
            // μ_1/μ_0 = (n+4)/(n-4)
            assert_eq!(mu_exact(n, 1) / mu_exact(n, 0), frac(n as i64 + 4, n as i64 - 4));
        }
    }

    #[test]
    fn weights_and_orthonormality() {
        let s = SpectralSolver::new(6, 24).unwrap();
        let total: f64 = s.base_weights().iter().sum();
        assert!((total / vol_sphere(6) - 1.0).abs() < 1e-13);
        let (off, diag) = s.orthonormality_defect();
        assert!(off < 1e-12 && diag < 1e-12, "{off} {diag}");
    }

    #[test]
    fn theta4_of_constant_s5() {
        let s = SpectralSolver::new(5, 16).unwrap();
        let c = s.constant(2.5);
        let want = 16.0 / (105.0 * std::f64::consts::PI.powf(12.0 / 5.0));
        assert!((s.theta4_functional(&c).unwrap() / want - 1.0).abs() < 1e-12);
        assert!(s.theta4_functional(&s.constant(0.0)).is_err());
    }

    #[test]
    fn pointwise_paneitz_matches_spectral() {
        let s = SpectralSolver::new(7, 12).unwrap();
        let mut c = vec![0.0; 13];
        c[0] = 1.0;
        c[2] = 0.3;
        c[5] = -0.1;
        c[12] = 0.01;
        let u = s.from_coeffs(c).unwrap();
        let direct = s.synthesize(&s.apply_p(&u));
        let pointwise = s.apply_p_pointwise(&u);
        let scale = direct.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in direct.iter().zip(&pointwise) {
            assert!((a - b).abs() < 1e-9 * scale);
        }
    }
}
