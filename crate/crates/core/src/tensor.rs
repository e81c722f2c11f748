//! Exact Weyl tensors and Schouten Hessians at a point, and the curvature
//! polynomials built from them.
//!
//! Components are stored as `W[i][k][j][l]` with the Riemann symmetries
//! `W_ikjl = -W_kijl = -W_iklj = W_jlik` and `W_ikjl + W_ijlk + W_ilkj = 0`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polyalg::HomogPoly;
use crate::rational::{self, frac, int, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeylTensor {
    n: usize,
    w: Vec<Rational>,
}

impl WeylTensor {
    pub fn zero(n: usize) -> Self {
        WeylTensor { n, w: vec![Rational::zero(); n * n * n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn idx(&self, i: usize, k: usize, j: usize, l: usize) -> usize {
        ((i * self.n + k) * self.n + j) * self.n + l
    }

    pub fn get(&self, i: usize, k: usize, j: usize, l: usize) -> &Rational {
        &self.w[self.idx(i, k, j, l)]
    }

    pub fn scale(&self, c: &Rational) -> Self {
        WeylTensor { n: self.n, w: self.w.iter().map(|v| v * c).collect() }
    }

    /// Builds a tensor from raw components, checking every Weyl symmetry.
    pub fn from_components(n: usize, w: Vec<Rational>) -> Result<Self> {
        if w.len() != n.pow(4) {
            return Err(Error::Invalid(format!("expected {} components, got {}", n.pow(4), w.len())));
        }
        let t = WeylTensor { n, w };
        t.check_symmetries()?;
        Ok(t)
    }

    /// Seeded generic Weyl tensor: a sum of tensors `h_ij h_kl - h_il h_kj`
    /// (which already satisfy Bianchi) with all traces removed.
    pub fn random(n: usize, seed: u64) -> Self {
        assert!(n >= 4, "Weyl tensors vanish below dimension 4");
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut r = vec![Rational::zero(); n.pow(4)];
        for _ in 0..3 {
            let sign: i64 = if rng.gen_bool(0.5) { 1 } else { -1 };
            let mut h = vec![vec![0i64; n]; n];
            for a in 0..n {
                for b in a..n {
                    let v = rng.gen_range(-3..=3);
                    h[a][b] = v;
                    h[b][a] = v;
                }
            }
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        for d in 0..n {
                            let v = h[a][c] * h[b][d] - h[a][d] * h[b][c];
                            if v != 0 {
                                r[((a * n + b) * n + c) * n + d] += int(sign * v);
                            }
                        }
                    }
                }
            }
        }
        let t = weyl_part(n, &r);
        if t.norm_sq().is_zero() {
            return Self::random(n, seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
        }
        t
    }

    /// `|W|² = Σ W_ikjl²`.
    pub fn norm_sq(&self) -> Rational {
        self.w.iter().map(|v| v * v).sum()
    }

    /// `Σ W_ikjl W_iljk`.
    pub fn cross_contraction(&self) -> Rational {
        let n = self.n;
        let mut s = Rational::zero();
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    for l in 0..n {
                        let a = self.get(i, k, j, l);
                        if !a.is_zero() {
                            s += a * self.get(i, l, j, k);
                        }
                    }
                }
            }
        }
        s
    }

    /// Ricci-type contraction `Σ_i W_ikil`.
    pub fn trace(&self) -> Vec<Vec<Rational>> {
        let n = self.n;
        let mut t = vec![vec![Rational::zero(); n]; n];
        for k in 0..n {
            for l in 0..n {
                t[k][l] = (0..n).map(|i| self.get(i, k, i, l).clone()).sum();
            }
        }
        t
    }

    pub fn check_symmetries(&self) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    for l in 0..n {
                        let w = self.get(i, k, j, l);
                        let bad = |what: &str| {
                            Err(Error::Invalid(format!("{what} fails at ({i},{k},{j},{l})")))
                        };
                        if *w != -self.get(k, i, j, l) || *w != -self.get(i, k, l, j) {
                            return bad("antisymmetry");
                        }
                        if w != self.get(j, l, i, k) {
                            return bad("pair symmetry");
                        }
                        if !(w + self.get(i, j, l, k) + self.get(i, l, k, j)).is_zero() {
                            return bad("first Bianchi identity");
                        }
                    }
                }
            }
        }
        if self.trace().iter().flatten().any(|v| !v.is_zero()) {
            return Err(Error::Invalid("tensor is not trace-free".into()));
        }
        Ok(())
    }
}

/// Weyl part of an algebraic curvature tensor `R` (flat component array).
fn weyl_part(n: usize, r: &[Rational]) -> WeylTensor {
    let at = |a: usize, b: usize, c: usize, d: usize| &r[((a * n + b) * n + c) * n + d];
    let mut ric = vec![vec![Rational::zero(); n]; n];
    for b in 0..n {
        for d in 0..n {
            ric[b][d] = (0..n).map(|a| at(a, b, a, d).clone()).sum();
        }
    }
    let scal: Rational = (0..n).map(|a| ric[a][a].clone()).sum();
    let nn = n as i64;
    // R = W + P ⊙ g with P = (Ric - s g / (2(n-1))) / (n-2)
    let mut p = ric.clone();
    for (a, row) in p.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            if a == b {
                *v -= &scal / int(2 * (nn - 1));
            }
            *v /= int(nn - 2);
        }
    }
    let g = |a: usize, b: usize| if a == b { 1 } else { 0 };
    let mut w = vec![Rational::zero(); n.pow(4)];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut v = at(a, b, c, d).clone();
                    if g(b, d) == 1 {
                        v -= &p[a][c];
                    }
                    if g(a, c) == 1 {
                        v -= &p[b][d];
                    }
                    if g(b, c) == 1 {
                        v += &p[a][d];
                    }
                    if g(a, d) == 1 {
                        v += &p[b][c];
                    }
                    w[((a * n + b) * n + c) * n + d] = v;
                }
            }
        }
    }
    WeylTensor { n, w }
}

/// Symmetric Hessian `J_ij = ∇_i∇_j J` of the trace of the Schouten tensor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchoutenHessian {
    n: usize,
    j: Vec<Vec<Rational>>,
}

impl SchoutenHessian {
    pub fn zero(n: usize) -> Self {
        SchoutenHessian { n, j: vec![vec![Rational::zero(); n]; n] }
    }

    pub fn from_matrix(j: Vec<Vec<Rational>>) -> Result<Self> {
        let n = j.len();
        for (a, row) in j.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Invalid("Schouten Hessian must be square".into()));
            }
            for b in 0..a {
                if row[b] != j[b][a] {
                    return Err(Error::Invalid("Schouten Hessian must be symmetric".into()));
                }
            }
        }
        Ok(SchoutenHessian { n, j })
    }

    /// Seeded symmetric integer matrix, then shifted so the trace satisfies
    /// the conformal-normal-coordinate constraint for `w`.
    pub fn random(w: &WeylTensor, seed: u64) -> Self {
        let n = w.n();
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5c4f_a11e_d00d_beef);
        let mut j = vec![vec![Rational::zero(); n]; n];
        for a in 0..n {
            for b in a..n {
                let v = int(rng.gen_range(-4..=4));
                j[a][b] = v.clone();
                j[b][a] = v;
            }
        }
        fix_trace(&SchoutenHessian { n, j }, w)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &[Vec<Rational>] {
        &self.j
    }

    pub fn trace(&self) -> Rational {
        (0..self.n).map(|a| self.j[a][a].clone()).sum()
    }

    /// `J_ij x_i x_j`.
    pub fn quadratic(&self) -> HomogPoly {
        HomogPoly::quadratic_form(&self.j)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        SchoutenHessian { n: self.n, j: self.j.iter().map(|r| r.iter().map(|v| v * c).collect()).collect() }
    }
}

/// Trace forced by conformal normal coordinates: `tr(Jh) = -|W|²/(12(n-1))`.
pub fn required_trace(w: &WeylTensor) -> Rational {
    -w.norm_sq() / int(12 * (w.n() as i64 - 1))
}

/// Shifts the pure-trace part of `jh` so that [`required_trace`] holds.
pub fn fix_trace(jh: &SchoutenHessian, w: &WeylTensor) -> SchoutenHessian {
    let shift = (required_trace(w) - jh.trace()) / int(jh.n as i64);
    let mut out = jh.clone();
    for a in 0..jh.n {
        out.j[a][a] += &shift;
    }
    out
}

/// Curvature jet at the pole: Weyl tensor plus Schouten Hessian.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Jet {
    pub w: WeylTensor,
    pub jh: SchoutenHessian,
}

impl Jet {
    pub fn flat(n: usize) -> Self {
        Jet { w: WeylTensor::zero(n), jh: SchoutenHessian::zero(n) }
    }

    pub fn random(n: usize, seed: u64) -> Self {
        let w = WeylTensor::random(n, seed);
        let jh = SchoutenHessian::random(&w, seed);
        Jet { w, jh }
    }

    pub fn n(&self) -> usize {
        self.w.n()
    }

    pub fn is_flat(&self) -> bool {
        self.w.norm_sq().is_zero() && self.jh.j.iter().flatten().all(|v| v.is_zero())
    }

    pub fn trace_ok(&self) -> bool {
        self.jh.trace() == required_trace(&self.w)
    }

    /// Multiplies the jet by `c`: `W → cW`, `Jh → c²Jh`, so `|W|²` and `Jh`
    /// scale alike and the trace constraint survives.
    pub fn rescale(&self, c: &Rational) -> Self {
        Jet { w: self.w.scale(c), jh: self.jh.scale(&(c * c)) }
    }
}

/// Components as integers over a common denominator `D`, when every
/// scaled component fits comfortably in an `i128` product.
fn integer_components(w: &WeylTensor) -> Option<(Vec<i128>, BigInt)> {
    let mut d = BigInt::one();
    for v in &w.w {
        d = d.lcm(v.denom());
    }
    let limit = BigInt::from(1i64 << 40);
    let mut out = Vec::with_capacity(w.w.len());
    for v in &w.w {
        let x = v.numer() * (&d / v.denom());
        if x.abs() > limit {
            return None;
        }
        out.push(x.to_i128()?);
    }
    Some((out, d))
}

/// Dense accumulator for polynomials of degree ≤ 4 in `n ≤ 15` variables,
/// keyed by the sorted variable indices packed four bits apiece.
struct IntAccumulator {
    n: usize,
    m: u32,
    slots: Vec<i128>,
}

impl IntAccumulator {
    fn new(n: usize, m: u32) -> Self {
        IntAccumulator { n, m, slots: vec![0; 1 << (4 * m)] }
    }

    fn add(&mut self, idx: &mut [usize], c: i128) -> Option<()> {
        idx.sort_unstable();
        let key = idx.iter().fold(0usize, |k, &i| (k << 4) | i);
        self.slots[key] = self.slots[key].checked_add(c)?;
        Some(())
    }

    fn finish(self, denom: &BigInt) -> HomogPoly {
        let (n, m) = (self.n, self.m);
        let terms = self.slots.iter().enumerate().filter(|(_, &c)| c != 0).map(|(key, &c)| {
            let mut e = vec![0u32; n];
            for t in 0..m {
                e[(key >> (4 * t)) & 15] += 1;
            }
            (e, Rational::new(BigInt::from(c), denom.clone()))
        });
        HomogPoly::from_terms(n, m, terms.collect::<Vec<_>>()).expect("monomials of the right degree")
    }
}

fn quartic_form_int(w: &WeylTensor) -> Option<HomogPoly> {
    let n = w.n();
    if n > 15 {
        return None;
    }
    let (wi, d) = integer_components(w)?;
    let at = |i: usize, k: usize, j: usize, l: usize| wi[((i * n + k) * n + j) * n + l];
    let mut acc = IntAccumulator::new(n, 4);
    for k in 0..n {
        for l in 0..n {
            // Σ_ij W_ikjl x_i x_j as coefficients on pairs i ≤ j
            let mut pairs = Vec::new();
            for i in 0..n {
                for j in i..n {
                    let c = if i == j { at(i, k, i, l) } else { at(i, k, j, l) + at(j, k, i, l) };
                    if c != 0 {
                        pairs.push((i, j, c));
                    }
                }
            }
            for (p, &(i, j, c)) in pairs.iter().enumerate() {
                acc.add(&mut [i, j, i, j], c.checked_mul(c)?)?;
                for &(a, b, e) in &pairs[p + 1..] {
                    acc.add(&mut [i, j, a, b], 2 * c.checked_mul(e)?)?;
                }
            }
        }
    }
    Some(acc.finish(&(&d * &d)))
}

fn quartic_gradient_square_int(w: &WeylTensor) -> Option<HomogPoly> {
    let n = w.n();
    if n > 15 {
        return None;
    }
    let (wi, d) = integer_components(w)?;
    let at = |i: usize, k: usize, j: usize, l: usize| wi[((i * n + k) * n + j) * n + l];
    let mut acc = IntAccumulator::new(n, 2);
    for j in 0..n {
        for k in 0..n {
            for l in 0..n {
                let c: Vec<i128> = (0..n).map(|i| at(i, j, k, l) + at(i, l, k, j)).collect();
                for a in 0..n {
                    if c[a] == 0 {
                        continue;
                    }
                    acc.add(&mut [a, a], c[a].checked_mul(c[a])?)?;
                    for b in a + 1..n {
                        acc.add(&mut [a, b], 2 * c[a].checked_mul(c[b])?)?;
                    }
                }
            }
        }
    }
    Some(acc.finish(&(&d * &d)))
}

/// `Σ_{k,l} (W_ikjl x_i x_j)²`.
pub fn quartic_form(w: &WeylTensor) -> HomogPoly {
    quartic_form_int(w).unwrap_or_else(|| quartic_form_rational(w))
}

fn quartic_form_rational(w: &WeylTensor) -> HomogPoly {
    let n = w.n();
    let mut out = HomogPoly::zero(n, 4);
    for k in 0..n {
        for l in k..n {
            let m: Vec<Vec<Rational>> =
                (0..n).map(|i| (0..n).map(|j| w.get(i, k, j, l).clone()).collect()).collect();
            let q = HomogPoly::quadratic_form(&m);
            if q.is_zero() {
                continue;
            }
            let c = if k == l { rational::one() } else { int(2) };
            out = out.add_scaled(&q.square(), &c);
        }
    }
    out
}

/// `Σ_{j,k,l} (W_ijkl x_i + W_ilkj x_i)²`; the Laplacian of the quartic form
/// is twice this.
pub fn quartic_gradient_square(w: &WeylTensor) -> HomogPoly {
    quartic_gradient_square_int(w).unwrap_or_else(|| quartic_gradient_square_rational(w))
}

fn quartic_gradient_square_rational(w: &WeylTensor) -> HomogPoly {
    let n = w.n();
    let mut out = HomogPoly::zero(n, 2);
    for j in 0..n {
        for k in 0..n {
            for l in 0..n {
                let c: Vec<Rational> = (0..n).map(|i| w.get(i, j, k, l) + w.get(i, l, k, j)).collect();
                let lin = HomogPoly::linear(&c);
                if !lin.is_zero() {
                    out = out.add(&lin.square());
                }
            }
        }
    }
    out
}

/// Closed-form harmonic split of the quartic form: harmonic parts of
/// degree 4, 2 and 0, with `Q = h4 + r² h2 + r⁴ h0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuarticSplit {
    pub h4: HomogPoly,
    pub h2: HomogPoly,
    pub h0: Rational,
}

impl QuarticSplit {
    pub fn reconstruct(&self) -> HomogPoly {
        let n = self.h4.n();
        let r4 = HomogPoly::r2(n).square();
        self.h4.add(&self.h2.mul_r2_pow(1)).add_scaled(&r4, &self.h0)
    }
}

pub fn quartic_harmonic_split(w: &WeylTensor) -> QuarticSplit {
    let n = w.n();
    let nn = n as i64;
    let q = quartic_form(w);
    let s = quartic_gradient_square(w);
    let w2 = w.norm_sq();
    let r2 = HomogPoly::r2(n);
    let r4 = r2.square();
    let h4 = q
        .add_scaled(&s.mul_r2_pow(1), &frac(-1, nn + 4))
        .add_scaled(&r4, &(&w2 * frac(3, 2 * (nn + 2) * (nn + 4))));
    let h2 = s.scale(&frac(1, nn + 4)).add_scaled(&r2, &(&w2 * frac(-3, nn * (nn + 4))));
    let h0 = &w2 * frac(3, 2 * nn * (nn + 2));
    QuarticSplit { h4, h2, h0 }
}

/// `∫_{S^{n-1}} Q dσ = c · ω_n`; returns `c = 3|W|²/(2(n+2))`, where `ω_n`
/// is the volume of the unit ball.
pub fn sphere_average_quartic(w: &WeylTensor) -> Rational {
    w.norm_sq() * frac(3, 2 * (w.n() as i64 + 2))
}

/// `A_ijkl x_i x_j x_k x_l = -2/(9(n-2)) Q - r²/(n-2) J_ij x_i x_j`.
pub fn schouten_quartic(w: &WeylTensor, jh: &SchoutenHessian) -> HomogPoly {
    let nn = w.n() as i64;
    quartic_form(w)
        .scale(&frac(-2, 9 * (nn - 2)))
        .add_scaled(&jh.quadratic().mul_r2_pow(1), &frac(-1, nn - 2))
}

#[derive(Serialize, Deserialize)]
struct JetWire {
    n: usize,
    #[serde(rename = "W")]
    w: Vec<Vec<Vec<Vec<String>>>>,
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    j: Option<Vec<Vec<String>>>,
}

fn tensor_wire(w: &WeylTensor) -> Vec<Vec<Vec<Vec<String>>>> {
    let n = w.n;
    (0..n)
        .map(|i| {
            (0..n)
                .map(|k| (0..n).map(|j| (0..n).map(|l| rational::format(w.get(i, k, j, l))).collect()).collect())
                .collect()
        })
        .collect()
}

fn tensor_from_wire(n: usize, raw: &[Vec<Vec<Vec<String>>>]) -> Result<WeylTensor> {
    let mut comps = Vec::with_capacity(n.pow(4));
    let shape_err = || Error::Invalid(format!("W must be an {n}x{n}x{n}x{n} array"));
    if raw.len() != n {
        return Err(shape_err());
    }
    for a in raw {
        if a.len() != n {
            return Err(shape_err());
        }
        for b in a {
            if b.len() != n {
                return Err(shape_err());
            }
            for c in b {
                if c.len() != n {
                    return Err(shape_err());
                }
                for s in c {
                    comps.push(rational::parse(s)?);
                }
            }
        }
    }
    WeylTensor::from_components(n, comps)
}

impl WeylTensor {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(JetWire { n: self.n, w: tensor_wire(self), j: None }).expect("serializable")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let wire: JetWire = serde_json::from_value(v.clone())?;
        tensor_from_wire(wire.n, &wire.w)
    }
}

impl Jet {
    pub fn to_json(&self) -> serde_json::Value {
        let j = self.jh.j.iter().map(|r| r.iter().map(rational::format).collect()).collect();
        serde_json::to_value(JetWire { n: self.n(), w: tensor_wire(&self.w), j: Some(j) }).expect("serializable")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let wire: JetWire = serde_json::from_value(v.clone())?;
        let w = tensor_from_wire(wire.n, &wire.w)?;
        let jh = match wire.j {
            Some(rows) => SchoutenHessian::from_matrix(
                rows.iter().map(|r| r.iter().map(|s| rational::parse(s)).collect()).collect::<Result<_>>()?,
            )?,
            None => fix_trace(&SchoutenHessian::zero(wire.n), &w),
        };
        if jh.n() != wire.n {
            return Err(Error::Dimension { expected: wire.n, got: jh.n() });
        }
        Ok(Jet { w, jh })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_and_rational_quartics_agree() {
        for (n, seed) in [(4, 1), (6, 2), (9, 3)] {
            let w = WeylTensor::random(n, seed);
            assert_eq!(quartic_form_int(&w).unwrap(), quartic_form_rational(&w));
            assert_eq!(quartic_gradient_square_int(&w).unwrap(), quartic_gradient_square_rational(&w));
        }
    }
    use crate::polyalg::harmonic_decompose;

    #[test]
    fn random_weyl_is_weyl_and_nonzero() {
        for n in 4..8 {
            let w = WeylTensor::random(n, 11 + n as u64);
            w.check_symmetries().unwrap();
            assert!(!w.norm_sq().is_zero());
        }
    }

    #[test]
    fn random_is_reproducible() {
        assert_eq!(WeylTensor::random(6, 3), WeylTensor::random(6, 3));
        assert_ne!(WeylTensor::random(6, 3), WeylTensor::random(6, 4));
    }

    #[test]
    fn fix_trace_hits_target() {
        let jet = Jet::random(7, 5);
        assert!(jet.trace_ok());
        assert_eq!(jet.jh.trace(), -jet.w.norm_sq() / int(72));
        assert!(jet.rescale(&frac(2, 3)).trace_ok());
    }

    #[test]
    fn closed_split_matches_generic_decomposition() {
        let w = WeylTensor::random(5, 9);
        let split = quartic_harmonic_split(&w);
        let d = harmonic_decompose(&quartic_form(&w));
        assert_eq!(&split.h4, d.harmonic(0));
        assert_eq!(&split.h2, d.harmonic(1));
        assert_eq!(d.sphere_mean(), split.h0);
    }

    #[test]
    fn json_round_trip_and_rejection() {
        let jet = Jet::random(4, 2);
        let v = jet.to_json();
        assert_eq!(Jet::from_json(&v).unwrap(), jet);
        assert_eq!(WeylTensor::from_json(&jet.w.to_json()).unwrap(), jet.w);
        let mut bad = v.clone();
        bad["W"][0][1][0][1] = serde_json::Value::String("12345".into());
        assert!(Jet::from_json(&bad).is_err());
    }
}
