//! Exact homogeneous polynomials over the rationals, their splitting into
//! solid harmonics, and the radial operators `A_α`, `B_α` acting on
//! expansions of the form `r^β Σ ψ_{d,k}(x) log^k r`.
//!
//! Everything here is exact; floating-point evaluation lives in
//! `asymptotics`.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};
use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rational::{self, int, Rational};

pub type Exponent = Vec<u32>;

/// Homogeneous polynomial of degree `m` in `n` variables. Terms are kept in
/// lexicographic multi-index order and zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(try_from = "PolyWire")]
pub struct HomogPoly {
    n: usize,
    m: u32,
    terms: BTreeMap<Exponent, Rational>,
}

impl HomogPoly {
    pub fn zero(n: usize, m: u32) -> Self {
        HomogPoly { n, m, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: Rational) -> Self {
        let mut p = Self::zero(n, 0);
        p.add_term(vec![0; n], c);
        p
    }

    pub fn monomial(exp: Exponent, c: Rational) -> Self {
        let m = exp.iter().sum();
        let mut p = Self::zero(exp.len(), m);
        p.add_term(exp, c);
        p
    }

    /// The coordinate function `x_i`.
    pub fn variable(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        Self::monomial(e, rational::one())
    }

    /// `r² = Σ x_i²`.
    pub fn r2(n: usize) -> Self {
        let mut p = Self::zero(n, 2);
        for i in 0..n {
            let mut e = vec![0; n];
            e[i] = 2;
            p.add_term(e, rational::one());
        }
        p
    }

    /// `Σ_{ij} M_ij x_i x_j` for a square matrix `M`.
    pub fn quadratic_form(mat: &[Vec<Rational>]) -> Self {
        let n = mat.len();
        let mut p = Self::zero(n, 2);
        for (i, row) in mat.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                let mut e = vec![0; n];
                e[i] += 1;
                e[j] += 1;
                p.add_term(e, c.clone());
            }
        }
        p
    }

    /// Linear form `Σ c_i x_i`.
    pub fn linear(coeffs: &[Rational]) -> Self {
        let n = coeffs.len();
        let mut p = Self::zero(n, 1);
        for (i, c) in coeffs.iter().enumerate() {
            let mut e = vec![0; n];
            e[i] = 1;
            p.add_term(e, c.clone());
        }
        p
    }

    pub fn from_terms<I>(n: usize, m: u32, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Exponent, Rational)>,
    {
        let mut p = Self::zero(n, m);
        for (e, c) in terms {
            if e.len() != n {
                return Err(Error::Dimension { expected: n, got: e.len() });
            }
            if e.iter().sum::<u32>() != m {
                return Err(Error::Invalid(format!("monomial {e:?} is not of degree {m}")));
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> u32 {
        self.m
    }

    pub fn terms(&self) -> &BTreeMap<Exponent, Rational> {
        &self.terms
    }

    /// Number of nonzero terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, e: &[u32]) -> Rational {
        self.terms.get(e).cloned().unwrap_or_else(Rational::zero)
    }

    fn add_term(&mut self, e: Exponent, c: Rational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(e) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn check_compatible(&self, other: &Self) {
        assert_eq!(self.n, other.n, "polynomials live in different dimensions");
        assert!(
            self.m == other.m || self.is_zero() || other.is_zero(),
            "adding polynomials of degree {} and {}",
            self.m,
            other.m
        );
    }

    /// `self + c·other`.
    pub fn add_scaled(&self, other: &Self, c: &Rational) -> Self {
        self.check_compatible(other);
        let mut out = if self.is_zero() { Self::zero(self.n, other.m) } else { self.clone() };
        if c.is_zero() {
            return out;
        }
        for (e, v) in &other.terms {
            out.add_term(e.clone(), v * c);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_scaled(other, &rational::one())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_scaled(other, &-rational::one())
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero(self.n, self.m);
        }
        HomogPoly {
            n: self.n,
            m: self.m,
            terms: self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(&-rational::one())
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "polynomials live in different dimensions");
        let mut out = Self::zero(self.n, self.m + other.m);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Exponent = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn square(&self) -> Self {
        self.mul(self)
    }

    /// `∂/∂x_i`.
    pub fn partial(&self, i: usize) -> Self {
        let mut out = Self::zero(self.n, self.m.saturating_sub(1));
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut f = e.clone();
                f[i] -= 1;
                out.add_term(f, c * int(e[i] as i64));
            }
        }
        out
    }

    /// Euclidean Laplacian `Σ ∂²/∂x_i²`.
    pub fn laplacian(&self) -> Self {
        let mut out = Self::zero(self.n, self.m.saturating_sub(2));
        for (e, c) in &self.terms {
            for i in 0..self.n {
                if e[i] >= 2 {
                    let mut f = e.clone();
                    f[i] -= 2;
                    out.add_term(f, c * int((e[i] * (e[i] - 1)) as i64));
                }
            }
        }
        out
    }

    pub fn laplacian_pow(&self, j: u32) -> Self {
        (0..j).fold(self.clone(), |p, _| p.laplacian())
    }

    /// Multiplies by `r^{2k}`.
    pub fn mul_r2_pow(&self, k: u32) -> Self {
        if k == 0 {
            return self.clone();
        }
        let r2 = Self::r2(self.n);
        let mut out = self.clone();
        for _ in 0..k {
            out = out.mul(&r2);
        }
        out.m = self.m + 2 * k;
        out
    }

    pub fn is_harmonic(&self) -> bool {
        self.laplacian().is_zero()
    }
}

impl fmt::Display for HomogPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({})", rational::format(c))?;
            for (i, &k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => write!(f, "·x{}", i + 1)?,
                    _ => write!(f, "·x{}^{}", i + 1, k)?,
                }
            }
        }
        Ok(())
    }
}

struct TermsMap<'a>(&'a BTreeMap<Exponent, Rational>);

impl Serialize for TermsMap<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (e, c) in self.0 {
            let key = e.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",");
            map.serialize_entry(&key, &rational::format(c))?;
        }
        map.end()
    }
}

impl Serialize for HomogPoly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("HomogPoly", 3)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("m", &self.m)?;
        st.serialize_field("terms", &TermsMap(&self.terms))?;
        st.end()
    }
}

#[derive(Deserialize)]
struct PolyWire {
    n: usize,
    m: u32,
    terms: BTreeMap<String, String>,
}

impl TryFrom<PolyWire> for HomogPoly {
    type Error = Error;

    fn try_from(w: PolyWire) -> Result<Self> {
        let mut terms = Vec::with_capacity(w.terms.len());
        for (k, v) in &w.terms {
            let e = k
                .split(',')
                .map(|t| t.trim().parse::<u32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Parse(format!("bad exponent key {k:?}")))?;
            terms.push((e, rational::parse(v)?));
        }
        HomogPoly::from_terms(w.n, w.m, terms)
    }
}

/// Eigenvalue of `r²Δ` on `r^{2k} ℋ_{m-2k}`.
pub fn rsq_laplacian_eigen(n: usize, m: u32, k: u32) -> Rational {
    let (n, m, k) = (n as i64, m as i64, k as i64);
    int(2 * k * (2 * m - 2 * k + n - 2))
}

/// Eigenvalue of `A_α = r²Δ + 2α r∂_r + α(α+n-2)` on `r^{2k} ℋ_{m-2k}`.
pub fn eigen_a(n: usize, m: u32, k: u32, alpha: &Rational) -> Rational {
    let (n, m, k) = (int(n as i64), int(m as i64), int(k as i64));
    let two = int(2);
    (alpha + &two * &k) * (&two * &m - &two * &k + alpha + n - two)
}

/// Eigenvalue of `B_α = 2r∂_r + (2α+n-2)` on `𝒫_m`.
pub fn eigen_b(n: usize, m: u32, alpha: &Rational) -> Rational {
    int(2 * m as i64 + n as i64 - 2) + alpha * int(2)
}

/// Eigenvalue of `A_{2-n} A_{4-n}` on `r^{2k} ℋ_{m-2k}`.
pub fn eigen_aa(n: usize, m: u32, k: u32) -> Rational {
    let (n, m, k) = (n as i64, m as i64, k as i64);
    int((2 * m - 2 * k) * (2 * m - 2 * k + 2) * (2 * k + 2 - n) * (2 * k + 4 - n))
}

/// `p = Σ_k r^{2k} h_{m-2k}` with every `h` harmonic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HarmonicDecomposition {
    n: usize,
    m: u32,
    blocks: Vec<HomogPoly>,
}

impl HarmonicDecomposition {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> u32 {
        self.m
    }

    /// Number of blocks, `⌊m/2⌋ + 1`.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// The harmonic factor `h_{m-2k}`.
    pub fn harmonic(&self, k: u32) -> &HomogPoly {
        &self.blocks[k as usize]
    }

    /// The full block `r^{2k} h_{m-2k}`.
    pub fn block(&self, k: u32) -> HomogPoly {
        let mut b = self.blocks[k as usize].mul_r2_pow(k);
        b.m = self.m;
        b
    }

    pub fn reconstruct(&self) -> HomogPoly {
        (0..self.blocks.len() as u32).fold(HomogPoly::zero(self.n, self.m), |acc, k| acc.add(&self.block(k)))
    }

    /// Constant `c` with `avg_{S^{n-1}} p = c` on the unit sphere (nonzero
    /// only for even degree, where it is the top block).
    pub fn sphere_mean(&self) -> Rational {
        if self.m % 2 == 1 {
            return Rational::zero();
        }
        self.blocks[(self.m / 2) as usize].coeff(&vec![0; self.n])
    }
}

/// Scalar by which `Δ^j` maps `r^{2k} h` (h ∈ ℋ_d) onto `r^{2k-2j} h`.
fn lap_pow_scalar(n: usize, d: u32, k: u32, j: u32) -> Rational {
    let mut c = rational::one();
    for i in 0..j {
        let kk = (k - i) as i64;
        c *= int(2 * kk * (2 * kk + 2 * d as i64 + n as i64 - 2));
    }
    c
}

/// Splits `p ∈ 𝒫_m` into solid harmonics by peeling `Δ^j p` from the top
/// block downwards; every step is an exact triangular solve.
pub fn harmonic_decompose(p: &HomogPoly) -> HarmonicDecomposition {
    let (n, m) = (p.n, p.m);
    let kmax = m / 2;
    let mut laps = Vec::with_capacity(kmax as usize + 1);
    laps.push(p.clone());
    for _ in 0..kmax {
        let next = laps.last().unwrap().laplacian();
        laps.push(next);
    }
    let mut blocks: Vec<HomogPoly> = vec![HomogPoly::zero(n, 0); kmax as usize + 1];
    for j in (0..=kmax).rev() {
        let mut resid = laps[j as usize].clone();
        resid.m = m - 2 * j;
        for k in (j + 1)..=kmax {
            let h = &blocks[k as usize];
            if h.is_zero() {
                continue;
            }
            let c = lap_pow_scalar(n, m - 2 * k, k, j);
            let mut t = h.mul_r2_pow(k - j);
            t.m = m - 2 * j;
            resid = resid.add_scaled(&t, &-c);
        }
        let c = lap_pow_scalar(n, m - 2 * j, j, j);
        let mut h = resid.scale(&(rational::one() / c));
        h.m = m - 2 * j;
        blocks[j as usize] = h;
    }
    HarmonicDecomposition { n, m, blocks }
}

/// `r^β Σ_{(d,k)} ψ_{d,k}(x) log^k r` with `ψ_{d,k} ∈ 𝒫_d`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogRadialExpansion {
    n: usize,
    radial_exp: Rational,
    terms: BTreeMap<(u32, u32), HomogPoly>,
}

impl LogRadialExpansion {
    pub fn new(n: usize, radial_exp: Rational) -> Self {
        LogRadialExpansion { n, radial_exp, terms: BTreeMap::new() }
    }

    pub fn from_poly(p: HomogPoly, radial_exp: Rational) -> Self {
        let mut e = Self::new(p.n, radial_exp);
        e.add_term(0, p);
        e
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn radial_exp(&self) -> &Rational {
        &self.radial_exp
    }

    pub fn terms(&self) -> &BTreeMap<(u32, u32), HomogPoly> {
        &self.terms
    }

    pub fn term(&self, deg: u32, logpow: u32) -> HomogPoly {
        self.terms.get(&(deg, logpow)).cloned().unwrap_or_else(|| HomogPoly::zero(self.n, deg))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_logpow(&self) -> u32 {
        self.terms.keys().map(|&(_, k)| k).max().unwrap_or(0)
    }

    /// Adds `p · log^k r` to the expansion.
    pub fn add_term(&mut self, logpow: u32, p: HomogPoly) {
        assert_eq!(p.n, self.n, "expansion and polynomial dimensions differ");
        if p.is_zero() {
            return;
        }
        let key = (p.m, logpow);
        let sum = match self.terms.remove(&key) {
            Some(q) => q.add(&p),
            None => p,
        };
        if !sum.is_zero() {
            self.terms.insert(key, sum);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.radial_exp, other.radial_exp, "radial prefactors differ");
        let mut out = self.clone();
        for (&(_, k), p) in &other.terms {
            out.add_term(k, p.clone());
        }
        out
    }

    pub fn scale(&self, c: &Rational) -> Self {
        let mut out = Self::new(self.n, self.radial_exp.clone());
        for (&(_, k), p) in &self.terms {
            out.add_term(k, p.scale(c));
        }
        out
    }

    /// Multiplies by `r^γ`.
    pub fn times_r_pow(&self, gamma: &Rational) -> Self {
        LogRadialExpansion { n: self.n, radial_exp: &self.radial_exp + gamma, terms: self.terms.clone() }
    }

    /// `A_α` acting through the shift law `A_α(r^β ψ) = r^β A_{α+β} ψ` and the
    /// log rule `A(φ L^k) = AφL^k + kBφL^{k-1} + k(k-1)φL^{k-2}`.
    pub fn apply_a(&self, alpha: &Rational) -> Self {
        let a = alpha + &self.radial_exp;
        let n = int(self.n as i64);
        let mut out = Self::new(self.n, self.radial_exp.clone());
        for (&(m, k), phi) in &self.terms {
            let mm = int(m as i64);
            let scalar = &a * (int(2) * &mm + &a + &n - int(2));
            let mut aphi = phi.scale(&scalar);
            if m >= 2 {
                let mut lap = phi.laplacian().mul_r2_pow(1);
                lap.m = m;
                aphi = aphi.add(&lap);
            }
            out.add_term(k, aphi);
            if k >= 1 {
                let b = int(2) * &mm + int(2) * &a + &n - int(2);
                out.add_term(k - 1, phi.scale(&(b * int(k as i64))));
            }
            if k >= 2 {
                out.add_term(k - 2, phi.scale(&int((k * (k - 1)) as i64)));
            }
        }
        out
    }

    /// `B_α = 2r∂_r + (2α+n-2)` with the log rule `B(φL^k) = BφL^k + 2kφL^{k-1}`.
    pub fn apply_b(&self, alpha: &Rational) -> Self {
        let a = alpha + &self.radial_exp;
        let mut out = Self::new(self.n, self.radial_exp.clone());
        for (&(m, k), phi) in &self.terms {
            out.add_term(k, phi.scale(&eigen_b(self.n, m, &a)));
            if k >= 1 {
                out.add_term(k - 1, phi.scale(&int(2 * k as i64)));
            }
        }
        out
    }
}

impl Serialize for LogRadialExpansion {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Term<'a> {
            deg: u32,
            logpow: u32,
            poly: &'a HomogPoly,
        }
        let terms: Vec<Term> =
            self.terms.iter().map(|(&(deg, logpow), poly)| Term { deg, logpow, poly }).collect();
        let mut st = s.serialize_struct("LogRadialExpansion", 3)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("radial_exp", &rational::format(&self.radial_exp))?;
        st.serialize_field("terms", &terms)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for LogRadialExpansion {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Term {
            deg: u32,
            logpow: u32,
            poly: HomogPoly,
        }
        #[derive(Deserialize)]
        struct Wire {
            n: usize,
            radial_exp: String,
            terms: Vec<Term>,
        }
        use serde::de::Error as _;
        let w = Wire::deserialize(d)?;
        let beta = rational::parse(&w.radial_exp).map_err(D::Error::custom)?;
        let mut out = LogRadialExpansion::new(w.n, beta);
        for t in w.terms {
            if t.poly.n != w.n || t.poly.m != t.deg {
                return Err(D::Error::custom("term does not match its declared degree or dimension"));
            }
            out.add_term(t.logpow, t.poly);
        }
        Ok(out)
    }
}

/// Block scalars `[AA, AB+BA, A+A+BB, B+B]` for `α = 2-n`, `β = 4-n` on
/// `r^{2k}ℋ_{m-2k}`; they are the coefficients in
/// `A_αA_β(φ L^ℓ) = Σ_j ℓ!/(ℓ-j)! e_j φ L^{ℓ-j}` (with `e_4 = 1`).
fn aa_log_scalars(n: usize, m: u32, k: u32) -> [Rational; 4] {
    let a1 = int(2 - n as i64);
    let a2 = int(4 - n as i64);
    let (ea1, ea2) = (eigen_a(n, m, k, &a1), eigen_a(n, m, k, &a2));
    let (eb1, eb2) = (eigen_b(n, m, &a1), eigen_b(n, m, &a2));
    [
        &ea1 * &ea2,
        &ea1 * &eb2 + &eb1 * &ea2,
        &ea1 + &ea2 + &eb1 * &eb2,
        eb1 + eb2,
    ]
}

/// Minimal solution of `A_{2-n}A_{4-n} ψ + rhs = 0`, block by block. Kernel
/// blocks escalate to `log r`, then `log² r`, `log³ r`; anything beyond is
/// reported as [`Error::LogGuard`].
pub fn solve_aa(n: usize, rhs: &HomogPoly) -> Result<LogRadialExpansion> {
    if rhs.n != n {
        return Err(Error::Dimension { expected: n, got: rhs.n });
    }
    let m = rhs.m;
    let dec = harmonic_decompose(rhs);
    let mut out = LogRadialExpansion::new(n, Rational::zero());
    for k in 0..dec.len() as u32 {
        let block = dec.block(k);
        if block.is_zero() {
            continue;
        }
        let scalars = aa_log_scalars(n, m, k);
        let ell = scalars.iter().position(|e| !e.is_zero()).ok_or(Error::LogGuard { m, k })?;
        let mut lead = scalars[ell].clone();
        for i in 1..=ell as i64 {
            lead *= int(i);
        }
        out.add_term(ell as u32, block.scale(&(-rational::one() / lead)));
    }
    Ok(out)
}

/// `A_{2-n} A_{4-n}` applied to an expansion, using the generic log-aware
/// operators (no block scalars involved).
pub fn apply_aa(n: usize, psi: &LogRadialExpansion) -> LogRadialExpansion {
    psi.apply_a(&int(4 - n as i64)).apply_a(&int(2 - n as i64))
}

impl HomogPoly {
    /// `A_α` on a bare polynomial (radial exponent 0, no logs).
    pub fn apply_a(&self, alpha: &Rational) -> HomogPoly {
        LogRadialExpansion::from_poly(self.clone(), Rational::zero()).apply_a(alpha).term(self.m, 0)
    }

    pub fn apply_b(&self, alpha: &Rational) -> HomogPoly {
        self.scale(&eigen_b(self.n, self.m, alpha))
    }
}

/// `true` when every coefficient is an integer.
pub fn is_integral(p: &HomogPoly) -> bool {
    p.terms.values().all(|c| c.denom().is_one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::frac;

    fn x(n: usize, i: usize) -> HomogPoly {
        HomogPoly::variable(n, i)
    }

    #[test]
    fn x1_squared_splits_into_trace_free_part_and_r2() {
        let n = 4;
        let p = x(n, 0).square();
        let d = harmonic_decompose(&p);
        let expect0 = p.add_scaled(&HomogPoly::r2(n), &frac(-1, 4));
        assert_eq!(d.harmonic(0), &expect0);
        assert_eq!(d.harmonic(1), &HomogPoly::constant(n, frac(1, 4)));
        assert_eq!(d.reconstruct(), p);
        assert_eq!(d.sphere_mean(), frac(1, 4));
    }

    #[test]
    fn r4_is_pure_top_block() {
        let n = 5;
        let r4 = HomogPoly::r2(n).square();
        let d = harmonic_decompose(&r4);
        assert!(d.harmonic(0).is_zero());
        assert!(d.harmonic(1).is_zero());
        assert_eq!(d.harmonic(2), &HomogPoly::constant(n, rational::one()));
    }

    #[test]
    fn eigen_aa_examples() {
        assert_eq!(eigen_aa(5, 4, 0), int(240));
        assert_eq!(eigen_aa(8, 4, 2), int(0));
        assert_eq!(aa_log_scalars(8, 4, 2)[1], int(-48));
        for n in 5..14 {
            let want = int(-2 * (n as i64 - 2) * (n as i64 - 4));
            let s = aa_log_scalars(n, (n - 4) as u32, ((n - 4) / 2) as u32);
            if n % 2 == 0 {
                assert_eq!(s[0], int(0));
                assert_eq!(s[1], want);
            }
        }
    }

    #[test]
    fn n8_constant_block_gets_a_log_with_coefficient_c_over_48() {
        let n = 8;
        let c = frac(7, 3);
        let rhs = HomogPoly::r2(n).square().scale(&c);
        let psi = solve_aa(n, &rhs).unwrap();
        assert_eq!(psi.terms().len(), 1);
        assert_eq!(psi.term(4, 1), HomogPoly::r2(n).square().scale(&(c / int(48))));
        assert_eq!(apply_aa(n, &psi).add(&LogRadialExpansion::from_poly(rhs, int(0))), LogRadialExpansion::new(n, int(0)));
    }

    #[test]
    fn escalation_never_needs_more_than_log_squared() {
        for n in 1..16usize {
            for m in 0..10u32 {
                for k in 0..=m / 2 {
                    let s = aa_log_scalars(n, m, k);
                    assert!(s[..3].iter().any(|e| !e.is_zero()), "n={n} m={m} k={k}");
                }
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let p = x(3, 0).mul(&x(3, 2)).scale(&frac(-5, 7)).add(&x(3, 1).square());
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"n":3,"m":2,"terms":{"0,2,0":"1","1,0,1":"-5/7"}}"#);
        let q: HomogPoly = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        let mut e = LogRadialExpansion::from_poly(p.clone(), frac(-5, 1));
        e.add_term(2, x(3, 1).scale(&frac(1, 3)));
        let s = serde_json::to_string(&e).unwrap();
        let f: LogRadialExpansion = serde_json::from_str(&s).unwrap();
        assert_eq!(e, f);
        assert!(serde_json::from_str::<HomogPoly>(r#"{"n":2,"m":2,"terms":{"1,0":"1"}}"#).is_err());
    }
}
