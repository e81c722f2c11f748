//! Gaussian rules and composite/adaptive integrators used by the numeric
//! layers.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::sphereforms::ln_gamma;

/// Nodes and weights of a one-dimensional rule.
#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn apply<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Gauss rule for the weight `(1-x²)^a` on `[-1, 1]` with `m` nodes.
///
/// Golub-Welsch gives starting nodes; each is then polished by Newton on the
/// orthonormal recurrence and weighted by the Christoffel function, which
/// keeps small endpoint weights accurate.
pub fn gauss_gegenbauer(m: usize, a: f64) -> Rule {
    assert!(m >= 1 && a > -1.0);
    let b: Vec<f64> = (1..=m)
        .map(|k| {
            let k = k as f64;
            (k * (k + 2.0 * a) / (4.0 * (k + a) * (k + a) - 1.0)).sqrt()
        })
        .collect();
    let ln_mu0 = 0.5 * std::f64::consts::PI.ln() + ln_gamma(a + 1.0) - ln_gamma(a + 1.5);
    let p0 = (-0.5 * ln_mu0).exp();

    let mut jac = DMatrix::<f64>::zeros(m, m);
    for i in 0..m.saturating_sub(1) {
        jac[(i, i + 1)] = b[i];
        jac[(i + 1, i)] = b[i];
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jac).eigenvalues.iter().copied().collect();
    nodes.sort_by(|x, y| x.partial_cmp(y).unwrap());

    // orthonormal p_0..p_m and p_m' at x
    let eval = |x: f64| -> (f64, f64, f64) {
        let (mut pm1, mut p) = (0.0, p0);
        let (mut dm1, mut d) = (0.0, 0.0);
        let mut sumsq = p * p;
        for k in 0..m {
            let bk = if k == 0 { 0.0 } else { b[k - 1] };
            let pn = (x * p - bk * pm1) / b[k];
            let dn = (x * d + p - bk * dm1) / b[k];
            pm1 = p;
            p = pn;
            dm1 = d;
            d = dn;
            if k + 1 < m {
                sumsq += p * p;
            }
        }
        (p, d, sumsq)
    };

    let mut weights = Vec::with_capacity(m);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, d, _) = eval(*x);
            if d == 0.0 {
                break;
            }
            let step = p / d;
            *x -= step;
            if step.abs() < 1e-17 {
                break;
            }
        }
        weights.push(1.0 / eval(*x).2);
    }
    // enforce exact symmetry of the rule
    for i in 0..m / 2 {
        let j = m - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -x;
        nodes[j] = x;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    Rule { nodes, weights }
}

pub fn gauss_legendre(m: usize) -> Rule {
    gauss_gegenbauer(m, 0.0)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn mapped(rule: &Rule, a: f64, b: f64) -> Rule {
    let (h, c) = (0.5 * (b - a), 0.5 * (a + b));
    Rule {
        nodes: rule.nodes.iter().map(|x| c + h * x).collect(),
        weights: rule.weights.iter().map(|w| h * w).collect(),
    }
}

/// Sum of `rule` applied on every panel `[edges[i], edges[i+1]]`.
pub fn composite<F: Fn(f64) -> f64>(rule: &Rule, edges: &[f64], f: F) -> f64 {
    let mut total = 0.0;
    for win in edges.windows(2) {
        let (h, c) = (0.5 * (win[1] - win[0]), 0.5 * (win[0] + win[1]));
        let s: f64 = rule.nodes.iter().zip(&rule.weights).map(|(&x, &w)| w * f(c + h * x)).sum();
        total += h * s;
    }
    total
}

/// Geometric panel edges from `a > 0` to `b` with `per_octave` panels per
/// doubling, preceded by the panel `[0, a]` when `include_zero` is set.
pub fn geometric_edges(a: f64, b: f64, per_octave: usize, include_zero: bool) -> Vec<f64> {
    assert!(a > 0.0 && b > a && per_octave > 0);
    let octaves = (b / a).log2();
    let count = ((octaves * per_octave as f64).ceil() as usize).max(1);
    let ratio = (b / a).powf(1.0 / count as f64);
    let mut edges = Vec::with_capacity(count + 2);
    if include_zero {
        edges.push(0.0);
    }
    edges.extend((0..count).map(|i| a * ratio.powi(i as i32)));
    edges.push(b);
    edges
}

pub fn uniform_edges(a: f64, b: f64, panels: usize) -> Vec<f64> {
    (0..=panels).map(|i| a + (b - a) * i as f64 / panels as f64).collect()
}

/// Adaptive bisection with a fixed Gauss-Legendre rule to an absolute
/// target `eps`. A panel is also accepted once its two estimates differ by
/// rounding noise only, so underflowing tails cannot force deep recursion.
fn adaptive_abs<F: Fn(f64) -> f64>(rule: &Rule, f: &F, a: f64, b: f64, eps: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(rule: &Rule, f: &F, a: f64, b: f64, whole: f64, eps: f64, depth: u32) -> f64 {
        let mid = 0.5 * (a + b);
        let left = composite(rule, &[a, mid], f);
        let right = composite(rule, &[mid, b], f);
        let halves = left + right;
        let diff = (halves - whole).abs();
        if depth >= 40 || diff <= eps || diff <= 64.0 * f64::EPSILON * (left.abs() + right.abs()) {
            return halves;
        }
        rec(rule, f, a, mid, left, 0.5 * eps, depth + 1) + rec(rule, f, mid, b, right, 0.5 * eps, depth + 1)
    }
    let whole = composite(rule, &[a, b], f);
    rec(rule, f, a, b, whole, eps, 0)
}

/// `∫_a^b f` to relative accuracy about `tol`.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let rule = gauss_legendre(20);
    let est = composite(&rule, &uniform_edges(a, b, 16), f);
    adaptive_abs(&rule, f, a, b, tol * est.abs().max(f64::MIN_POSITIVE))
}

/// `∫_a^∞ f` through `r = a + t/(1-t)`.
pub fn adaptive_to_infinity<F: Fn(f64) -> f64>(f: &F, a: f64, tol: f64) -> f64 {
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - t;
        f(a + t / s) / (s * s)
    };
    let rule = gauss_legendre(20);
    // split so each piece sees a moderate dynamic range
    let cuts = [0.0, 0.5, 0.9, 0.99, 0.999, 0.9999, 1.0];
    let est: f64 = cuts.windows(2).map(|w| composite(&rule, &uniform_edges(w[0], w[1], 4), g)).sum();
    let eps = tol * est.abs().max(f64::MIN_POSITIVE) / (cuts.len() - 1) as f64;
    cuts.windows(2).map(|w| adaptive_abs(&rule, &g, w[0], w[1], eps)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let r = gauss_legendre(8);
        for k in 0..16 {
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((r.apply(|x| x.powi(k)) - exact).abs() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn gegenbauer_weights_sum_to_mass() {
        for &a in &[0.5, 1.0, 1.5, 3.5, 5.0] {
            for &m in &[5, 40, 200] {
                let r = gauss_gegenbauer(m, a);
                let mass = (0.5 * std::f64::consts::PI.ln() + ln_gamma(a + 1.0) - ln_gamma(a + 1.5)).exp();
                let s: f64 = r.weights.iter().sum();
                assert!((s / mass - 1.0).abs() < 1e-13, "a={a} m={m}");
                // second moment of (1-x^2)^a: mass / (2a+3)
                let m2 = r.apply(|x| x * x);
                assert!((m2 / (mass / (2.0 * a + 3.0)) - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn adaptive_semi_infinite() {
        let v = adaptive_to_infinity(&|r: f64| (-r).exp(), 0.0, 1e-13);
        assert!((v - 1.0).abs() < 1e-13);
        let v = adaptive_to_infinity(&|r: f64| 1.0 / (1.0 + r * r), 0.0, 1e-13);
        assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    }
}
