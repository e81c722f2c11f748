//! Radial functions on `ℝⁿ` as finite sums `Σ c r^a (r²+λ²)^{b/2}`, closed
//! under differentiation, so derivatives up to fourth order and the radial
//! bi-Laplacian come out in closed form.

use std::collections::BTreeMap;

/// `Σ c · r^a · w^{b2/2}` with `w = r² + λ²`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialFn {
    lam2: f64,
    terms: BTreeMap<(i32, i32), f64>,
}

impl RadialFn {
    pub fn zero(lambda: f64) -> Self {
        RadialFn { lam2: lambda * lambda, terms: BTreeMap::new() }
    }

    /// `c · r^a · w^{b2/2}`.
    pub fn term(lambda: f64, c: f64, a: i32, b2: i32) -> Self {
        let mut f = Self::zero(lambda);
        f.push(c, a, b2);
        f
    }

    pub fn lambda(&self) -> f64 {
        self.lam2.sqrt()
    }

    pub fn terms(&self) -> impl Iterator<Item = (i32, i32, f64)> + '_ {
        self.terms.iter().map(|(&(a, b), &c)| (a, b, c))
    }

    fn push(&mut self, c: f64, a: i32, b2: i32) {
        if c == 0.0 {
            return;
        }
        let e = self.terms.entry((a, b2)).or_insert(0.0);
        let before = *e;
        *e += c;
        // coefficients are rational multiples of a common power of λ, so a
        // rounding-level remainder is a cancellation that is exact on paper
        if e.abs() <= 64.0 * f64::EPSILON * before.abs().max(c.abs()) {
            self.terms.remove(&(a, b2));
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.lam2, other.lam2, "radial functions with different scales");
        let mut out = self.clone();
        for (&(a, b), &c) in &other.terms {
            out.push(c, a, b);
        }
        out
    }

    pub fn scale(&self, k: f64) -> Self {
        let mut out = Self::zero(self.lambda());
        out.lam2 = self.lam2;
        for (&(a, b), &c) in &self.terms {
            out.push(k * c, a, b);
        }
        out
    }

    /// `d/dr`, using `d/dr (r^a w^β) = a r^{a-1} w^β + 2β r^{a+1} w^{β-1}`.
    pub fn deriv(&self) -> Self {
        let mut out = self.scale(0.0);
        for (&(a, b2), &c) in &self.terms {
            out.push(c * a as f64, a - 1, b2);
            out.push(c * b2 as f64, a + 1, b2 - 2);
        }
        out
    }

    /// Multiplies by `r^k`.
    pub fn mul_r(&self, k: i32) -> Self {
        let mut out = self.scale(0.0);
        for (&(a, b), &c) in &self.terms {
            out.push(c, a + k, b);
        }
        out
    }

    /// Rewrites every `r^{2j}` (j ≥ 0) as `(w - λ²)^j`, merging powers of
    /// `w`; exact cancellations then happen on integer coefficients.
    pub fn normalize(&self) -> Self {
        let mut out = self.scale(0.0);
        for (&(a, b2), &c) in &self.terms {
            if a >= 0 && a % 2 == 0 {
                let j = a / 2;
                let mut binom = 1.0;
                for i in 0..=j {
                    // (w - λ²)^j = Σ C(j,i) w^{j-i} (-λ²)^i
                    out.push(c * binom * (-self.lam2).powi(i), 0, b2 + 2 * (j - i));
                    binom = binom * (j - i) as f64 / (i + 1) as f64;
                }
            } else {
                out.push(c, a, b2);
            }
        }
        out
    }

    /// Radial Laplacian `h'' + (n-1) h'/r`.
    pub fn laplacian(&self, n: usize) -> Self {
        let d1 = self.deriv();
        d1.deriv().add(&d1.mul_r(-1).scale(n as f64 - 1.0)).normalize()
    }

    pub fn bilaplacian(&self, n: usize) -> Self {
        self.laplacian(n).laplacian(n)
    }

    pub fn eval(&self, r: f64) -> f64 {
        let w = r * r + self.lam2;
        let lw = w.ln();
        self.terms
            .iter()
            .map(|(&(a, b2), &c)| c * r.powi(a) * (0.5 * b2 as f64 * lw).exp())
            .sum()
    }

    /// Value and first four derivatives at `r`.
    pub fn jet(&self, r: f64) -> RadialJet {
        let mut d = [0.0; 5];
        let mut f = self.clone();
        for slot in d.iter_mut() {
            *slot = f.eval(r);
            f = f.deriv();
        }
        RadialJet(d)
    }
}

/// Value and first four `r`-derivatives of a radial function at one radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialJet(pub [f64; 5]);

impl RadialJet {
    pub fn constant(c: f64) -> Self {
        RadialJet([c, 0.0, 0.0, 0.0, 0.0])
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    /// Leibniz rule up to fourth order.
    pub fn mul(&self, o: &Self) -> Self {
        let (f, g) = (&self.0, &o.0);
        RadialJet([
            f[0] * g[0],
            f[1] * g[0] + f[0] * g[1],
            f[2] * g[0] + 2.0 * f[1] * g[1] + f[0] * g[2],
            f[3] * g[0] + 3.0 * f[2] * g[1] + 3.0 * f[1] * g[2] + f[0] * g[3],
            f[4] * g[0] + 4.0 * f[3] * g[1] + 6.0 * f[2] * g[2] + 4.0 * f[1] * g[3] + f[0] * g[4],
        ])
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut d = self.0;
        for (x, y) in d.iter_mut().zip(o.0) {
            *x += y;
        }
        RadialJet(d)
    }

    pub fn scale(&self, k: f64) -> Self {
        RadialJet(self.0.map(|x| k * x))
    }

    pub fn laplacian(&self, n: usize, r: f64) -> f64 {
        self.0[2] + (n as f64 - 1.0) * self.0[1] / r
    }

    /// `h'''' + 2(n-1)h'''/r + (n-1)(n-3)(h''/r² - h'/r³)`.
    pub fn bilaplacian(&self, n: usize, r: f64) -> f64 {
        let k = n as f64 - 1.0;
        let d = &self.0;
        d[4] + 2.0 * k * d[3] / r + k * (k - 2.0) * (d[2] / (r * r) - d[1] / (r * r * r))
    }

    /// `(h'/r)'`.
    pub fn dr_over_r_prime(&self, r: f64) -> f64 {
        self.0[2] / r - self.0[1] / (r * r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplacian_of_power_of_w() {
        // Δ w^q = (2qn + 4q(q-1)) w^{q-1} - 4q(q-1) λ² w^{q-2}
        let (n, lam, q2) = (7usize, 0.75, -5);
        let q = q2 as f64 / 2.0;
        let f = RadialFn::term(lam, 1.0, 0, q2).laplacian(n);
        let mut want = RadialFn::term(lam, 2.0 * q * n as f64 + 4.0 * q * (q - 1.0), 0, q2 - 2);
        want = want.add(&RadialFn::term(lam, -4.0 * q * (q - 1.0) * lam * lam, 0, q2 - 4));
        assert_eq!(f, want);
    }

    #[test]
    fn jet_bilaplacian_agrees_with_symbolic() {
        let (n, lam) = (9usize, 1.3);
        let f = RadialFn::term(lam, 2.0, 0, -5).add(&RadialFn::term(lam, -0.5, 2, -7));
        let sym = f.bilaplacian(n);
        for &r in &[0.2, 0.9, 3.0] {
            let a = f.jet(r).bilaplacian(n, r);
            let b = sym.eval(r);
            assert!((a - b).abs() <= 1e-11 * b.abs().max(1e-300), "r={r}: {a} vs {b}");
        }
    }

    #[test]
    fn leibniz_matches_product_derivatives() {
        let lam = 0.4;
        let f = RadialFn::term(lam, 1.0, 0, -3);
        let g = RadialFn::term(lam, 1.0, 2, 1);
        let mut fg = RadialFn::zero(lam);
        for (a1, b1, c1) in f.terms() {
            for (a2, b2, c2) in g.terms() {
                fg = fg.add(&RadialFn::term(lam, c1 * c2, a1 + a2, b1 + b2));
            }
        }
        let r = 0.7;
        let p = f.jet(r).mul(&g.jet(r));
        let q = fg.jet(r);
        for i in 0..5 {
            assert!((p.0[i] - q.0[i]).abs() < 1e-12 * q.0[i].abs().max(1.0));
        }
    }
}
